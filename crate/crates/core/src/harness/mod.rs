pub mod fuzz;
pub mod plot;
pub mod report;
pub mod spec;
pub mod suites;
