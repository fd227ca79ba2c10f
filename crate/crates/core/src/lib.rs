pub mod casestudy;
pub mod envelope;
pub mod instances;
pub mod monitor;
pub mod oracle;
pub mod predicate;
pub mod signal;
pub mod spec;
