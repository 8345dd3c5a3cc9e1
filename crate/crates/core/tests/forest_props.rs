use std::collections::BTreeMap;

use anchorsim::corpus::{AnswerValue, Instrument, MissingReason, RespondentRecord, SurveyCorpus, SurveyItem};
use anchorsim::forest::{
    evaluate, grid_search_train, preprocess, train, DecisionTree, ForestGrid, ForestModel, ForestParams,
    PreprocessOptions, Target, Targets, TreeParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check_tree(tree: &DecisionTree, params: TreeParams) -> Result<(), TestCaseError> {
    prop_assert_eq!(tree.nodes[0].n_samples, tree.sample_rows.len());
    prop_assert!(tree.depth() <= params.max_depth);
    for node in &tree.nodes {
        match node.feature {
            None => prop_assert!(node.n_samples >= params.min_samples_leaf.max(1)),
            Some(_) => {
                let (l, r) = (&tree.nodes[node.left], &tree.nodes[node.right]);
                prop_assert_eq!(l.n_samples + r.n_samples, node.n_samples);
                prop_assert_eq!(l.depth, node.depth + 1);
                prop_assert!(node.n_samples >= params.min_samples_split);
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn classification_trees_respect_their_limits(
        seed in 0u64..10_000,
        n in 10usize..120,
        p in 1usize..5,
        max_depth in 1usize..6,
        min_split in 2usize..20,
        min_leaf in 1usize..8,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(0..10) as f64).collect()).collect();
        let y: Vec<usize> = x.iter().map(|r| usize::from(r[0] > 4.0) + usize::from(rng.random_bool(0.2))).collect();
        let params = TreeParams { max_depth, min_samples_split: min_split, min_samples_leaf: min_leaf, max_features: p };
        let rows: Vec<usize> = (0..n).collect();
        let tree = DecisionTree::fit(&x, Targets::Classes { y: &y, n_classes: 3 }, rows, params, &mut rng);
        check_tree(&tree, params)?;
        for leaf in tree.leaves() {
            prop_assert!((leaf.value.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn regression_leaves_average_their_rows(seed in 0u64..10_000, n in 10usize..100, max_depth in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] + rng.random_range(-0.1..0.1)).collect();
        let params = TreeParams { max_depth, min_samples_split: 4, min_samples_leaf: 2, max_features: 1 };
        let rows: Vec<usize> = (0..n).collect();
        let tree = DecisionTree::fit(&x, Targets::Reals(&y), rows.clone(), params, &mut rng);
        check_tree(&tree, params)?;
        let mut members: BTreeMap<*const anchorsim::forest::Node, Vec<f64>> = BTreeMap::new();
        for &r in &rows {
            members.entry(tree.leaf_for(&x[r]) as *const _).or_default().push(y[r]);
        }
        for leaf in tree.leaves() {
            let v = &members[&(leaf as *const _)];
            prop_assert!((leaf.value[0] - v.iter().sum::<f64>() / v.len() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn forests_are_reproducible(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let y: Vec<usize> = x.iter().map(|r| usize::from(r[0] + r[1] > 1.0)).collect();
        let params = ForestParams { n_estimators: 5, max_depth: 3, min_samples_split: 4, min_samples_leaf: 2 };
        let rows: Vec<usize> = (0..60).collect();
        let a = ForestModel::fit(&x, Targets::Classes { y: &y, n_classes: 2 }, &rows, params, seed).unwrap();
        let b = ForestModel::fit(&x, Targets::Classes { y: &y, n_classes: 2 }, &rows, params, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

fn mixed_corpus(n: usize) -> SurveyCorpus {
    let items = vec![
        SurveyItem::numeric("NUM", "number", 0.0, 10.0),
        SurveyItem::numeric("SPARSE", "often missing", 0.0, 10.0),
        SurveyItem::categorical("TRI", "three levels", &["x", "y", "z", "never"]),
        SurveyItem::categorical("Y", "target", &["no", "yes"]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let respondents = (0..n)
        .map(|i| {
            let mut a = BTreeMap::new();
            let num = if i % 10 == 0 { AnswerValue::Missing(MissingReason::DontKnow) } else { AnswerValue::Numeric((i % 11) as f64) };
            a.insert("NUM".to_string(), num);
            if i % 5 >= 2 {
                a.insert("SPARSE".to_string(), AnswerValue::Numeric(1.0));
            }
            a.insert("TRI".to_string(), AnswerValue::Categorical(["x", "y", "z"][i % 3].into()));
            a.insert("Y".to_string(), AnswerValue::Categorical(if rng.random_bool(0.5) { "yes" } else { "no" }.into()));
            RespondentRecord { respondent_id: format!("m{i}"), country: ["France", "Spain"][i % 2].into(), age: 50 + (i % 40) as u32, answers: a }
        })
        .collect();
    SurveyCorpus::new(Instrument::new(items).unwrap(), respondents, "mixed").unwrap()
}

#[test]
fn preprocessing_drops_sparse_columns_and_expands_levels() {
    let corpus = mixed_corpus(100);
    let m = preprocess(&corpus, "Y", &PreprocessOptions::default()).unwrap();
    assert_eq!(m.dropped_columns, vec!["SPARSE".to_string()]);
    assert_eq!(
        m.column_names,
        ["NUM", "TRI=x", "TRI=y", "TRI=z", "country=France", "country=Spain", "age"].map(String::from)
    );
    for row in &m.rows {
        assert_eq!(row[1] + row[2] + row[3], 1.0);
        assert!(row[0].is_finite());
    }
    let Target::Labels { classes, y } = &m.target else { panic!("categorical target") };
    assert_eq!(classes, &["no", "yes"].map(String::from));
    assert_eq!(y.len(), 100);
    let s = &m.split;
    assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (60, 20, 20));
}

#[test]
fn imputation_uses_the_training_median() {
    let corpus = mixed_corpus(100);
    let m = preprocess(&corpus, "Y", &PreprocessOptions::default()).unwrap();
    let mut train: Vec<f64> = m
        .split
        .train
        .iter()
        .filter(|&&i| !m.row_ids[i].ends_with('0'))
        .map(|&i| m.rows[i][0])
        .collect();
    train.sort_by(f64::total_cmp);
    let med = if train.len() % 2 == 1 { train[train.len() / 2] } else { (train[train.len() / 2 - 1] + train[train.len() / 2]) / 2.0 };
    for (i, id) in m.row_ids.iter().enumerate() {
        if id.ends_with('0') {
            assert_eq!(m.rows[i][0], med, "{id}");
        }
    }
}

#[test]
fn too_few_rows_is_an_error() {
    let corpus = mixed_corpus(4);
    assert!(preprocess(&corpus, "Y", &PreprocessOptions::default()).is_err());
    assert!(preprocess(&corpus, "MISSING", &PreprocessOptions::default()).is_err());
}

#[test]
fn grid_search_covers_every_point_and_scores_the_winner() {
    let corpus = mixed_corpus(120);
    let m = preprocess(&corpus, "TRI", &PreprocessOptions::default()).unwrap();
    let grid = ForestGrid { n_estimators: vec![3, 5], max_depth: vec![2, 3], min_samples_split: vec![4], min_samples_leaf: vec![2] };
    let out = grid_search_train(&m, &grid, 3).unwrap();
    assert_eq!(out.table.len(), 4);
    let e = evaluate(&out.best, &m).unwrap();
    assert_eq!((e.n_train, e.n_test), (72, 24));
    assert_eq!(e.predicted_frequencies.values().sum::<usize>(), 24);
    assert!((0.0..=1.0).contains(&e.test_tvd));
    let again = train(&m, out.best.params, out.best.seed).unwrap();
    assert_eq!(again.trees, out.best.trees);
    let json = out.best.to_json();
    assert!(json.contains("\"feature_names\""));
}
