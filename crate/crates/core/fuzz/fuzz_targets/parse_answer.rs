#![no_main]

use anchorsim::agent::ResponseMode;
use anchorsim::corpus::{AnswerValue, SurveyItem};
use anchorsim::gateway::parse_answer;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|raw: &str| {
    let cat = SurveyItem::categorical("C", "pick", &["Very good", "Rather good", "Rather bad", "Very bad"]);
    match parse_answer(raw, &cat, ResponseMode::DiscreteOptions) {
        AnswerValue::Categorical(l) => assert!(cat.options().unwrap().contains(&l)),
        AnswerValue::Missing(_) => {}
        other => panic!("categorical item parsed to {other:?}"),
    }
    let num = SurveyItem::numeric("N", "amount", 1100.0, 3800.0);
    for mode in [ResponseMode::DiscreteOptions, ResponseMode::Continuous0To100] {
        match parse_answer(raw, &num, mode) {
            AnswerValue::Numeric(v) => assert!((1100.0..=3800.0).contains(&v)),
            AnswerValue::Missing(_) => {}
            other => panic!("numeric item parsed to {other:?}"),
        }
    }
});
