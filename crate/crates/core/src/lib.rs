pub mod store;
pub mod parser;
pub mod types;
pub mod dacts;
pub mod lower;
pub mod select;
pub mod engine;
pub mod cli;
pub mod debugsrv;
