pub mod check;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod lab;
pub mod noise;
pub mod ops;
pub mod picard;
pub mod reference;
pub mod stochastic;
