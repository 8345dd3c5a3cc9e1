pub mod agent;
pub mod corpus;
pub mod error;
pub mod fixtures;
pub mod forest;
pub mod gateway;
pub mod inference;
pub mod metrics;
pub mod psychometrics;
pub mod seed;
pub mod study;

pub use error::{Error, Result};
