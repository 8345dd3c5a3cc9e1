mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use anchorsim::corpus::{
    filter_population, parse_instrument, parse_references, parse_respondents, stratified_match, write_instrument,
    write_respondents, AnswerValue, CorpusFormat, IngestOptions, Instrument, MissingReason, RespondentRecord,
    StratumKey, StratumTargets, SurveyCorpus, SurveyItem,
};
use anchorsim::fixtures::{opinion_references, panel_corpus, social_corpus, write_references};
use anchorsim::Error;
use proptest::prelude::*;

const OPTIONS: [&str; 3] = ["Yes, often", "No \"never\"", "Sometimes"];

fn instrument() -> Instrument {
    Instrument::new(vec![
        SurveyItem::categorical("C1", "Quoted, comma \"text\"", &OPTIONS),
        SurveyItem::numeric("N1", "A number", -5.0, 100.0),
        SurveyItem::numeric("N2", "Another number", 0.0, 1.0),
    ])
    .unwrap()
}

fn answer() -> impl Strategy<Value = Option<AnswerValue>> {
    prop_oneof![
        Just(None),
        prop::sample::select(MissingReason::ALL.to_vec()).prop_map(|r| Some(AnswerValue::Missing(r))),
        (0usize..3).prop_map(|i| Some(AnswerValue::Categorical(OPTIONS[i].into()))),
    ]
}

fn record() -> impl Strategy<Value = (String, u32, Option<AnswerValue>, Option<f64>, Option<f64>)> {
    (
        prop::sample::select(vec!["France", "Côte d'Ivoire", "United States"]).prop_map(String::from),
        18u32..100,
        answer(),
        prop::option::of(-5.0f64..=100.0),
        prop::option::of(0.0f64..=1.0),
    )
}

fn corpus_from(rows: Vec<(String, u32, Option<AnswerValue>, Option<f64>, Option<f64>)>) -> SurveyCorpus {
    let respondents = rows
        .into_iter()
        .enumerate()
        .map(|(i, (country, age, c1, n1, n2))| {
            let mut answers = BTreeMap::new();
            if let Some(a) = c1 {
                answers.insert("C1".to_string(), a);
            }
            if let Some(v) = n1 {
                answers.insert("N1".to_string(), AnswerValue::Numeric(v));
            }
            if let Some(v) = n2 {
                answers.insert("N2".to_string(), AnswerValue::Numeric(v));
            }
            RespondentRecord { respondent_id: format!("id-{i}"), country, age, answers }
        })
        .collect();
    SurveyCorpus::new(instrument(), respondents, "generated").unwrap()
}

fn round_trip(corpus: &SurveyCorpus, format: CorpusFormat) -> SurveyCorpus {
    let opts = IngestOptions::default();
    let mut buf = Vec::new();
    write_respondents(corpus, format, &opts, &mut buf).unwrap();
    parse_respondents("buffer", buf.as_slice(), format, corpus.instrument().clone(), &opts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn respondents_survive_both_formats(rows in prop::collection::vec(record(), 0..30)) {
        let corpus = corpus_from(rows);
        for format in [CorpusFormat::DelimitedTable, CorpusFormat::RecordJson] {
            let back = round_trip(&corpus, format);
            prop_assert_eq!(back.respondents(), corpus.respondents());
        }
    }

    #[test]
    fn filtering_keeps_exactly_the_matching_respondents(rows in prop::collection::vec(record(), 0..40), lo in 18u32..60, span in 0u32..40) {
        let corpus = corpus_from(rows);
        let countries: BTreeSet<String> = ["France".to_string()].into();
        let kept = filter_population(&corpus, &countries, Some((lo, lo + span)));
        let expected: Vec<&RespondentRecord> = corpus
            .respondents()
            .iter()
            .filter(|r| r.country == "France" && r.age >= lo && r.age <= lo + span)
            .collect();
        prop_assert_eq!(kept.respondents().iter().collect::<Vec<_>>(), expected);
    }
}

#[test]
fn instrument_and_references_round_trip() {
    let inst = panel_corpus(5, 1).unwrap().instrument().clone();
    let mut buf = Vec::new();
    write_instrument(&inst, &mut buf).unwrap();
    assert_eq!(parse_instrument("buffer", buf.as_slice()).unwrap(), inst);

    let refs = opinion_references();
    let mut buf = Vec::new();
    write_references(&refs, &mut buf).unwrap();
    assert_eq!(parse_references("buffer", buf.as_slice()).unwrap(), refs);
}

#[test]
fn checked_in_fixtures_match_their_generators() {
    let root = common::repo_root().join("fixtures");
    let opts = IngestOptions::default();
    for (name, corpus) in [("panel", panel_corpus(400, 2021).unwrap()), ("social", social_corpus(1000, 1972).unwrap())] {
        let mut inst = Vec::new();
        write_instrument(corpus.instrument(), &mut inst).unwrap();
        assert_eq!(fs::read(root.join(name).join("instrument.jsonl")).unwrap(), inst, "{name} instrument");
        let mut resp = Vec::new();
        write_respondents(&corpus, CorpusFormat::DelimitedTable, &opts, &mut resp).unwrap();
        assert_eq!(fs::read(root.join(name).join("respondents.csv")).unwrap(), resp, "{name} respondents");
    }
    let mut refs = Vec::new();
    write_references(&opinion_references(), &mut refs).unwrap();
    assert_eq!(fs::read(root.join("opinion/references.csv")).unwrap(), refs);
}

#[test]
fn malformed_inputs_are_rejected() {
    let opts = IngestOptions::default();
    let parse = |text: &str| parse_respondents("t.csv", text.as_bytes(), CorpusFormat::DelimitedTable, instrument(), &opts);
    assert!(matches!(parse("respondent_id,country,age,ZZ\n1,France,50,3\n"), Err(Error::UnknownItems { .. })));
    assert!(matches!(parse("respondent_id,country,age,N1\n1,France,50,3\n1,France,51,4\n"), Err(Error::DuplicateRespondent(_))));
    assert!(parse("respondent_id,country,age,N1\n1,France,50,500\n").is_err());
    assert!(parse("respondent_id,country,age,C1\n1,France,50,Maybe\n").is_err());
    assert!(parse("respondent_id,country,age,N1\n1,France,fifty,3\n").is_err());
    let ok = parse("respondent_id,country,age,N1,C1\n1,France,50,,Don't know\n").unwrap();
    let r = &ok.respondents()[0];
    assert_eq!(r.answer("N1"), None);
    assert_eq!(r.answer("C1"), Some(&AnswerValue::Missing(MissingReason::DontKnow)));
    assert!(parse_instrument("i.jsonl", "{not json}\n".as_bytes()).is_err());
    assert!(parse_references("r.csv", "item_code,stratum,option_label,proportion\nQ,FR,a,0.5\nQ,FR,a,0.5\n".as_bytes()).is_err());
}

#[test]
fn stratified_matching_hits_exact_counts() {
    let corpus = social_corpus(1000, 1972).unwrap();
    let targets = StratumTargets {
        key: StratumKey::Item("SEX".into()),
        counts: [("Male".to_string(), 154), ("Female".to_string(), 116)].into(),
        age_range: Some((25, 45)),
    };
    let a = stratified_match(&corpus, &targets, 270, 11).unwrap();
    let b = stratified_match(&corpus, &targets, 270, 11).unwrap();
    assert_eq!(a.respondents(), b.respondents());
    let males = a.respondents().iter().filter(|r| r.answer("SEX").map(|v| v.category_label()) == Some("Male".into())).count();
    assert_eq!((a.respondents().len(), males), (270, 154));
    assert!(a.respondents().iter().all(|r| (25..=45).contains(&r.age)));
    assert!(stratified_match(&corpus, &targets, 271, 11).is_err());
    let greedy = StratumTargets { counts: [("Male".to_string(), 100_000)].into(), ..targets };
    assert!(matches!(stratified_match(&corpus, &greedy, 100_000, 1), Err(Error::StratumShortage { .. })));
}
