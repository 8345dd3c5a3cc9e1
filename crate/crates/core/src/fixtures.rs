//! Synthetic stand-ins for licensed microdata.
//!
//! Three generators mirror the shapes the study pipeline expects: a European
//! ageing-panel corpus (ages 50-90, three countries), a US general social
//! survey corpus (all adult ages, one country) and country-level reference
//! distributions for items outside either corpus. Answers are driven by a few
//! latent traits per respondent so items correlate and a forest baseline has
//! signal to find. Human-like features are planted on purpose: heaping on
//! round numbers, heavy tails on probability items, non-substantive answers,
//! and a financial-literacy item answered correctly by fewer than 60%.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::agent::AgeRule;
use crate::corpus::{
    AnswerValue, DemographicItems, Instrument, MissingReason, ReferenceDistribution, RespondentRecord, SurveyCorpus,
    SurveyItem,
};
use crate::error::{Error, Result};

/// Correct option of the compound-interest item.
pub const LITERACY_CORRECT: &str = "2420 euros";

pub const PANEL_COUNTRIES: [&str; 3] = ["France", "Germany", "Spain"];

const HEALTH: [&str; 5] = ["Excellent", "Very good", "Good", "Fair", "Poor"];
const YES_NO: [&str; 2] = ["Yes", "No"];
const FREQUENCY: [&str; 4] = ["More than once a week", "Once a week", "One to three times a month", "Hardly ever, or never"];
const PLANNING: [&str; 5] = ["Next few months", "Next year", "Next few years", "Next 5-10 years", "Longer than 10 years"];
const RISK: [&str; 4] = [
    "Take substantial financial risks expecting to earn substantial returns",
    "Take above average financial risks expecting to earn above average returns",
    "Take average financial risks expecting to earn average returns",
    "Not willing to take any financial risks",
];
const LITERACY: [&str; 4] = ["Less than 2200 euros", "2200 euros", "2420 euros", "More than 2420 euros"];

fn z(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Option index from a latent score cut at `cuts` (ascending).
fn ordinal(score: f64, cuts: &[f64]) -> usize {
    cuts.iter().take_while(|c| score > **c).count()
}

/// Replaces a substantive answer by a non-substantive one with probability `p`.
fn maybe_missing(v: AnswerValue, p: f64, rng: &mut ChaCha8Rng) -> AnswerValue {
    let u: f64 = rng.random();
    if u < p * 0.75 {
        AnswerValue::Missing(MissingReason::DontKnow)
    } else if u < p {
        AnswerValue::Missing(MissingReason::Refusal)
    } else {
        v
    }
}

fn cat(options: &[&str], i: usize) -> AnswerValue {
    AnswerValue::Categorical(options[i.min(options.len() - 1)].to_string())
}

/// Probability answers heap on multiples of 10, with 0, 50 and 100 most common.
fn heaped_probability(mean: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random();
    if u < 0.12 {
        return 0.0;
    }
    if u < 0.22 {
        return 100.0;
    }
    if u < 0.34 {
        return 50.0;
    }
    let v = (mean + 22.0 * z(rng)).clamp(0.0, 100.0);
    if rng.random::<f64>() < 0.8 {
        (v / 10.0).round() * 10.0
    } else {
        v.round()
    }
}

/// Target ages substituted into the longevity question, by respondent age.
pub fn longevity_age_rules() -> Vec<AgeRule> {
    [(0, 65, 75), (66, 69, 80), (70, 74, 85), (75, 79, 90), (80, 84, 95), (85, 89, 100), (90, 120, 105)]
        .into_iter()
        .map(|(min_age, max_age, target_age)| AgeRule { min_age, max_age, target_age })
        .collect()
}

pub fn panel_instrument() -> Instrument {
    let items = vec![
        SurveyItem::categorical("DN042", "Note sex of respondent", &["Male", "Female"]).with_section("DN"),
        SurveyItem::categorical(
            "EP005",
            "In general, which of the following best describes your current employment situation?",
            &["Retired", "Employed or self-employed", "Unemployed", "Permanently sick or disabled", "Homemaker"],
        )
        .with_section("EP"),
        SurveyItem::categorical(
            "DN014",
            "What is your marital status?",
            &["Married and living together with spouse", "Registered partnership", "Never married", "Divorced", "Widowed"],
        )
        .with_section("DN"),
        SurveyItem::categorical(
            "CO007",
            "Thinking of your household's total monthly income, would you say that your household is able to make ends meet?",
            &["With great difficulty", "With some difficulty", "Fairly easily", "Easily"],
        )
        .with_section("CO"),
        SurveyItem::numeric("DN041", "How many years have you been in full-time education?", 0.0, 25.0).with_section("DN"),
        SurveyItem::categorical("PH003", "Would you say your health is excellent, very good, good, fair, or poor?", &HEALTH)
            .with_section("PH"),
        SurveyItem::categorical("CF103", "How would you rate your memory at the present time?", &HEALTH).with_section("CF"),
        SurveyItem::categorical("EP026", "Would you like to retire as early as you can from this job?", &YES_NO)
            .with_section("EP"),
        SurveyItem::categorical("BR015", "How often do you engage in activities that require a low or moderate level of energy such as gardening, cleaning the car, or doing a walk?", &FREQUENCY)
            .with_section("BR"),
        SurveyItem::categorical("IT003", "How would you rate your skills in using the computer?", &HEALTH).with_section("IT"),
        SurveyItem::categorical("HC889", "During the last twelve months, did you forgo seeing a doctor because of the costs?", &YES_NO)
            .with_section("HC"),
        SurveyItem::categorical("MH002", "In the last month, have you been sad or depressed?", &YES_NO).with_section("MH"),
        SurveyItem::numeric("AC012", "On a scale from 0 to 10, how satisfied are you with your life?", 0.0, 10.0).with_section("AC"),
        SurveyItem::categorical("CF820", "Do you have any difficulty reading a newspaper, even with glasses?", &YES_NO).with_section("CF"),
        SurveyItem::numeric("cf012_", "If the chance of getting a disease is 10 percent, how many people out of 1000 (one thousand) would be expected to get the disease?", 0.0, 1000.0).with_section("CF"),
        SurveyItem::categorical("cf011_", "Next I would like to ask you some questions which assess how people use numbers in everyday life.", &["Continue", "Stop"]).with_section("CF"),
        SurveyItem::numeric("cf013_", "In a sale, a shop is selling all items at half price. Before the sale, a sofa costs 300 [FLCurr]. How much will it cost in the sale?", 0.0, 1000.0).with_section("CF"),
        SurveyItem::numeric("cf014_", "A second hand car dealer is selling a car for 6,000 [FLCurr]. This is two-thirds of what it costs new. How much did the car cost new?", 0.0, 20000.0).with_section("CF"),
        SurveyItem::categorical("cf015_", "Let's say you have 2000 [FLCurr] in a savings account. The account earns ten per cent interest each year. How much would you have in the account at the end of two years?", &LITERACY).with_section("CF"),
        SurveyItem::numeric("cf108_", "Now let's try some subtraction of numbers. One hundred minus 7 equals what?", 0.0, 100.0).with_section("CF"),
        SurveyItem::numeric("cf109_", "And 7 from that", 0.0, 100.0).with_section("CF"),
        SurveyItem::numeric("cf110_", "And 7 from that", 0.0, 100.0).with_section("CF"),
        SurveyItem::numeric("cf111_", "And 7 from that", 0.0, 100.0).with_section("CF"),
        SurveyItem::numeric("cf112_", "And 7 from that", 0.0, 100.0).with_section("CF"),
        SurveyItem::numeric("FTP01", "What are the chances that you will live to age XX or more?", 0.0, 100.0).with_section("EX"),
        SurveyItem::numeric("FTP02", "Thinking about your work generally and not just your present job, what are the chances that you will be working full-time after you reach age 63?", 0.0, 100.0).with_section("EX"),
        SurveyItem::categorical("FTP03", "In planning your saving and spending, which of the following time periods is most important to you?", &PLANNING).with_section("EX"),
        SurveyItem::categorical("FRT01", "Which of the statements on the card comes closest to the amount of financial risk that you are willing to take when you save or make investments?", &RISK).with_section("FN"),
        SurveyItem::categorical("FK01", "Let's say you have 2000€ in a savings account. The account earns 10% interest each year. How much would you have in the account at the end of two years?", &LITERACY).with_section("FN"),
    ];
    Instrument::new(items).expect("panel instrument is valid")
}

/// Ageing-panel corpus: `n` respondents aged 50-90 across [`PANEL_COUNTRIES`].
pub fn panel_corpus(n: usize, seed: u64) -> Result<SurveyCorpus> {
    let instrument = panel_instrument();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut respondents = Vec::with_capacity(n);
    for i in 0..n {
        let country_idx = rng.random_range(0..PANEL_COUNTRIES.len());
        let age: u32 = rng.random_range(50..=90);
        let old = (age as f64 - 70.0) / 10.0;
        let (health, horizon, risk, literacy, wealth) = (z(&mut rng), z(&mut rng), z(&mut rng), z(&mut rng), z(&mut rng));
        let horizon = horizon - 0.4 * old + 0.3 * health;
        let literacy = literacy + 0.3 * wealth;
        let male = rng.random::<f64>() < 0.46;
        let mut a = std::collections::BTreeMap::new();
        let mut put = |code: &str, v: AnswerValue| {
            a.insert(code.to_string(), v);
        };
        put("DN042", cat(&["Male", "Female"], usize::from(!male)));
        let retired = rng.random::<f64>() < logistic(1.2 * (age as f64 - 63.0) / 3.0);
        let employment = if retired { 0 } else { [1, 1, 1, 2, 3, 4][rng.random_range(0..6)] };
        put("EP005", cat(&["Retired", "Employed or self-employed", "Unemployed", "Permanently sick or disabled", "Homemaker"], employment));
        let widowed = rng.random::<f64>() < logistic(old - 1.5);
        let marital = if widowed { 4 } else { [0, 0, 0, 0, 1, 2, 3][rng.random_range(0..7)] };
        put("DN014", cat(&["Married and living together with spouse", "Registered partnership", "Never married", "Divorced", "Widowed"], marital));
        let ends = cat(&["With great difficulty", "With some difficulty", "Fairly easily", "Easily"], ordinal(wealth + 0.3 * z(&mut rng), &[-1.2, -0.3, 0.7]));
        // A few respondents lack an income answer and so have no complete demographic profile.
        put("CO007", maybe_missing(ends, 0.02, &mut rng));
        let edu = (11.0 + 3.0 * (0.6 * literacy + 0.4 * z(&mut rng)) - 0.5 * old).round().clamp(0.0, 25.0);
        put("DN041", AnswerValue::Numeric(edu));

        let health_score = -health + 0.5 * old;
        let miss = |v: AnswerValue, rng: &mut ChaCha8Rng| maybe_missing(v, 0.03, rng);
        let v = cat(&HEALTH, ordinal(health_score + 0.4 * z(&mut rng), &[-1.5, -0.6, 0.3, 1.2]));
        put("PH003", miss(v, &mut rng));
        let v = cat(&HEALTH, ordinal(0.5 * health_score - 0.4 * literacy + 0.6 * z(&mut rng), &[-1.5, -0.6, 0.4, 1.3]));
        put("CF103", miss(v, &mut rng));
        let v = cat(&YES_NO, usize::from(0.5 * health + 0.3 * horizon + z(&mut rng) > 0.0));
        put("EP026", miss(v, &mut rng));
        let v = cat(&FREQUENCY, ordinal(health_score + 0.7 * z(&mut rng), &[-0.5, 0.2, 0.8]));
        put("BR015", miss(v, &mut rng));
        let v = cat(&HEALTH, ordinal(-literacy + 0.6 * old + 0.6 * z(&mut rng), &[-1.3, -0.4, 0.5, 1.2]));
        put("IT003", miss(v, &mut rng));
        let v = cat(&YES_NO, usize::from(wealth + 1.3 + 0.5 * z(&mut rng) > 0.0));
        put("HC889", miss(v, &mut rng));
        let v = cat(&YES_NO, usize::from(health - 0.5 * z(&mut rng) + 0.6 > 0.0));
        put("MH002", miss(v, &mut rng));
        let v = AnswerValue::Numeric((7.3 + 1.2 * (0.5 * health + 0.4 * wealth) + z(&mut rng)).round().clamp(0.0, 10.0));
        put("AC012", miss(v, &mut rng));
        let v = cat(&YES_NO, usize::from(health_score + z(&mut rng) < 1.0));
        put("CF820", miss(v, &mut rng));

        let numerate = literacy + 0.5 * z(&mut rng) > -0.3;
        put("cf011_", cat(&["Continue", "Stop"], 0));
        put("cf012_", AnswerValue::Numeric(if numerate { 100.0 } else { [10.0, 1.0, 500.0][rng.random_range(0..3)] }));
        put("cf013_", AnswerValue::Numeric(if numerate || rng.random::<f64>() < 0.6 { 150.0 } else { 600.0 }));
        put("cf014_", AnswerValue::Numeric(if numerate && rng.random::<f64>() < 0.7 { 9000.0 } else { 8000.0 }));
        let fk_correct = rng.random::<f64>() < logistic(-0.4 + 1.1 * literacy);
        let literacy_answer = if fk_correct {
            cat(&LITERACY, 2)
        } else {
            cat(&LITERACY, [0, 1, 1, 1, 3][rng.random_range(0..5)])
        };
        put("cf015_", literacy_answer.clone());
        let mut serial = 100.0;
        for code in ["cf108_", "cf109_", "cf110_", "cf111_", "cf112_"] {
            serial -= if numerate || rng.random::<f64>() < 0.7 { 7.0 } else { 6.0 };
            put(code, AnswerValue::Numeric(serial));
        }

        let v = AnswerValue::Numeric(heaped_probability(60.0 + 18.0 * horizon, &mut rng));
        put("FTP01", miss(v, &mut rng));
        let working = if retired && age > 63 { 5.0 } else { 45.0 + 15.0 * horizon };
        let v = AnswerValue::Numeric(heaped_probability(working, &mut rng));
        put("FTP02", miss(v, &mut rng));
        let v = cat(&PLANNING, ordinal(horizon + 0.3 * wealth + 0.7 * z(&mut rng), &[-1.0, -0.2, 0.6, 1.4]));
        put("FTP03", miss(v, &mut rng));
        let v = cat(&RISK, 3 - ordinal(risk + 0.4 * wealth + 0.4 * z(&mut rng), &[0.0, 1.2, 2.3]).min(3));
        put("FRT01", miss(v, &mut rng));
        let v = if rng.random::<f64>() < 0.08 {
            AnswerValue::Missing(MissingReason::DontKnow)
        } else {
            literacy_answer
        };
        put("FK01", v);

        respondents.push(RespondentRecord {
            respondent_id: format!("P{:05}", i + 1),
            country: PANEL_COUNTRIES[country_idx].to_string(),
            age,
            answers: a,
        });
    }
    SurveyCorpus::new(instrument, respondents, format!("synthetic panel (seed {seed})"))
}

/// Demographic item codes of the social-survey corpus.
pub fn social_demographics() -> DemographicItems {
    DemographicItems {
        gender: "SEX".into(),
        employment: "WRKSTAT".into(),
        marital: "MARITAL".into(),
        income: "INCOME".into(),
        education: "DEGREE".into(),
    }
}

const SATISFACTION: [&str; 3] = ["Very happy", "Pretty happy", "Not too happy"];
const CONFIDENCE: [&str; 3] = ["A great deal", "Only some", "Hardly any"];

pub fn social_instrument() -> Instrument {
    let items = vec![
        SurveyItem::categorical("SEX", "Respondent's sex", &["Male", "Female"]),
        SurveyItem::categorical(
            "WRKSTAT",
            "Last week were you working full time, part time, going to school, keeping house, or what?",
            &["Working full time", "Working part time", "Unemployed, laid off, looking for work", "Retired", "In school", "Keeping house"],
        ),
        SurveyItem::categorical("MARITAL", "Are you currently married, widowed, divorced, separated, or have you never been married?", &["Married", "Widowed", "Divorced", "Separated", "Never married"]),
        SurveyItem::categorical("INCOME", "In which of these groups did your total family income, from all sources, fall last year before taxes?", &["Under $25,000", "$25,000 to $49,999", "$50,000 to $89,999", "$90,000 or over"]),
        SurveyItem::categorical("DEGREE", "Respondent's highest degree", &["Less than high school", "High school", "Associate/junior college", "Bachelor's", "Graduate"]),
        SurveyItem::categorical("HAPPY", "Taken all together, how would you say things are these days, would you say that you are very happy, pretty happy, or not too happy?", &SATISFACTION),
        SurveyItem::categorical("HEALTH", "Would you say your own health, in general, is excellent, good, fair, or poor?", &["Excellent", "Good", "Fair", "Poor"]),
        SurveyItem::categorical("SATFIN", "So far as you and your family are concerned, would you say that you are pretty well satisfied with your present financial situation, more or less satisfied, or not satisfied at all?", &["Pretty well satisfied", "More or less satisfied", "Not satisfied at all"]),
        SurveyItem::categorical("FINRELA", "Compared with American families in general, would you say your family income is far below average, below average, average, above average, or far above average?", &["Far below average", "Below average", "Average", "Above average", "Far above average"]),
        SurveyItem::categorical("CONFINAN", "As far as the people running banks and financial institutions are concerned, would you say you have a great deal of confidence, only some confidence, or hardly any confidence at all in them?", &CONFIDENCE),
        SurveyItem::categorical("TRUST", "Generally speaking, would you say that most people can be trusted or that you can't be too careful in dealing with people?", &["Can trust", "Can't be too careful", "Depends"]),
        SurveyItem::categorical("GETAHEAD", "Some people say that people get ahead by their own hard work; others say that lucky breaks or help from other people are more important. Which do you think is most important?", &["Hard work", "Hard work, luck equally important", "Luck or help"]),
        SurveyItem::numeric("HRS1", "How many hours did you work last week, at all jobs?", 0.0, 89.0),
        SurveyItem::numeric("CHILDS", "How many children have you ever had?", 0.0, 8.0),
    ];
    Instrument::new(items).expect("social instrument is valid")
}

/// Social-survey corpus: adults 18-89 in one country, with half the sample
/// drawn from ages 25-45 so demographic matching on that band has room.
pub fn social_corpus(n: usize, seed: u64) -> Result<SurveyCorpus> {
    let instrument = social_instrument();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut respondents = Vec::with_capacity(n);
    for i in 0..n {
        let age: u32 = if rng.random::<f64>() < 0.5 { rng.random_range(25..=45) } else { rng.random_range(18..=89) };
        let (wealth, mood, health) = (z(&mut rng), z(&mut rng), z(&mut rng));
        let male = rng.random::<f64>() < 0.5;
        let mut a = std::collections::BTreeMap::new();
        let mut put = |code: &str, v: AnswerValue| {
            a.insert(code.to_string(), v);
        };
        put("SEX", cat(&["Male", "Female"], usize::from(!male)));
        let work = if age >= 65 {
            3
        } else if age < 23 && rng.random::<f64>() < 0.5 {
            4
        } else {
            [0, 0, 0, 1, 2, 5][rng.random_range(0..6)]
        };
        put("WRKSTAT", cat(&["Working full time", "Working part time", "Unemployed, laid off, looking for work", "Retired", "In school", "Keeping house"], work));
        let marital = if age < 28 && rng.random::<f64>() < 0.6 { 4 } else { [0, 0, 0, 1, 2, 3, 4][rng.random_range(0..7)] };
        put("MARITAL", cat(&["Married", "Widowed", "Divorced", "Separated", "Never married"], marital));
        let income = ordinal(wealth + 0.3 * z(&mut rng), &[-0.8, 0.0, 0.9]);
        put("INCOME", maybe_missing(cat(&["Under $25,000", "$25,000 to $49,999", "$50,000 to $89,999", "$90,000 or over"], income), 0.02, &mut rng));
        put("DEGREE", cat(&["Less than high school", "High school", "Associate/junior college", "Bachelor's", "Graduate"], ordinal(0.6 * wealth + 0.8 * z(&mut rng), &[-1.3, 0.3, 0.7, 1.4])));
        let miss = |v: AnswerValue, rng: &mut ChaCha8Rng| maybe_missing(v, 0.03, rng);
        let v = cat(&SATISFACTION, 2 - ordinal(mood + 0.3 * wealth + 0.5 * z(&mut rng), &[-1.0, 0.9]));
        put("HAPPY", miss(v, &mut rng));
        let v = cat(&["Excellent", "Good", "Fair", "Poor"], ordinal(-health + (age as f64 - 50.0) / 30.0, &[-0.9, 0.4, 1.4]));
        put("HEALTH", miss(v, &mut rng));
        let v = cat(&["Pretty well satisfied", "More or less satisfied", "Not satisfied at all"], 2 - ordinal(wealth + 0.5 * z(&mut rng), &[-0.6, 0.7]));
        put("SATFIN", miss(v, &mut rng));
        let v = cat(&["Far below average", "Below average", "Average", "Above average", "Far above average"], ordinal(wealth + 0.4 * z(&mut rng), &[-1.6, -0.5, 0.6, 1.7]));
        put("FINRELA", miss(v, &mut rng));
        let v = cat(&CONFIDENCE, ordinal(-0.4 * mood + z(&mut rng), &[-0.9, 0.8]));
        put("CONFINAN", miss(v, &mut rng));
        let v = cat(&["Can trust", "Can't be too careful", "Depends"], if rng.random::<f64>() < 0.05 { 2 } else { usize::from(mood + 0.3 * wealth + z(&mut rng) < 0.4) });
        put("TRUST", miss(v, &mut rng));
        let v = cat(&["Hard work", "Hard work, luck equally important", "Luck or help"], ordinal(-0.4 * wealth + z(&mut rng), &[0.2, 1.2]));
        put("GETAHEAD", miss(v, &mut rng));
        let hours = if work <= 1 { (40.0 + 8.0 * z(&mut rng) - if work == 1 { 18.0 } else { 0.0 }).round().clamp(1.0, 89.0) } else { 0.0 };
        put("HRS1", miss(AnswerValue::Numeric(hours), &mut rng));
        let kids = ((age as f64 - 20.0) / 12.0 + 0.8 * z(&mut rng)).round().clamp(0.0, 8.0);
        put("CHILDS", miss(AnswerValue::Numeric(kids), &mut rng));
        respondents.push(RespondentRecord {
            respondent_id: format!("S{:05}", i + 1),
            country: "United States".to_string(),
            age,
            answers: a,
        });
    }
    SurveyCorpus::new(instrument, respondents, format!("synthetic social survey (seed {seed})"))
}

/// Items of the opinion survey whose national shares serve as references.
pub fn opinion_items() -> Vec<SurveyItem> {
    vec![
        SurveyItem::categorical(
            "QA1a_5",
            "How would you judge the current situation in the financial situation of your household?",
            &["Very good", "Rather good", "Rather bad", "Very bad"],
        ),
        SurveyItem::categorical(
            "QA2a_3",
            "What are your expectations for the next twelve months: will the next twelve months be better, worse or the same, when it comes to the financial situation of your household?",
            &["Better", "Worse", "Same"],
        ),
    ]
}

/// National option shares per opinion item, one distribution per country.
pub fn opinion_references() -> Vec<ReferenceDistribution> {
    let table: [(&str, &str, &[f64]); 6] = [
        ("QA1a_5", "France", &[0.09, 0.62, 0.23, 0.06]),
        ("QA1a_5", "Germany", &[0.21, 0.59, 0.16, 0.04]),
        ("QA1a_5", "Spain", &[0.06, 0.58, 0.28, 0.08]),
        ("QA2a_3", "France", &[0.15, 0.27, 0.58]),
        ("QA2a_3", "Germany", &[0.16, 0.17, 0.67]),
        ("QA2a_3", "Spain", &[0.22, 0.21, 0.57]),
    ];
    let items = opinion_items();
    table
        .iter()
        .map(|(code, country, shares)| {
            let item = items.iter().find(|i| i.code == *code).expect("known opinion item");
            let labels = item.options().expect("opinion items are categorical");
            let freqs = labels.iter().cloned().zip(shares.iter().copied()).collect();
            ReferenceDistribution::new(code, country, freqs)
        })
        .collect::<Result<_>>()
        .expect("reference shares sum to one")
}

/// Writes references in the `item_code,stratum,option_label,proportion` layout.
pub fn write_references<W: Write>(refs: &[ReferenceDistribution], out: W) -> Result<()> {
    let err = |e: csv::Error| Error::io("<reference output>", std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["item_code", "stratum", "option_label", "proportion"]).map_err(err)?;
    for r in refs {
        for (label, p) in &r.frequencies {
            w.write_record([r.item_code.as_str(), r.stratum.as_str(), label.as_str(), &p.to_string()]).map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<reference output>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_literacy_below_sixty_percent() {
        let c = panel_corpus(600, 1).unwrap();
        let answered: Vec<_> = c.respondents().iter().filter_map(|r| r.answer("FK01")).collect();
        let correct = answered.iter().filter(|a| a.as_label() == Some(LITERACY_CORRECT)).count();
        let share = correct as f64 / answered.len() as f64;
        assert!(share < 0.6 && share > 0.2, "{share}");
        assert!(c.respondents().iter().all(|r| (50..=90).contains(&r.age)));
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(panel_corpus(50, 9).unwrap(), panel_corpus(50, 9).unwrap());
        assert_eq!(social_corpus(50, 9).unwrap(), social_corpus(50, 9).unwrap());
    }

    #[test]
    fn references_round_trip() {
        let mut buf = Vec::new();
        write_references(&opinion_references(), &mut buf).unwrap();
        let back = crate::corpus::parse_references("mem", buf.as_slice()).unwrap();
        assert_eq!(back, opinion_references());
    }
}
