pub mod chain;
pub mod cli;
pub mod error;
pub mod exec;
pub mod model;
pub mod scenarios;
pub mod sim;
pub mod solver;
