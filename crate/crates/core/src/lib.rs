//! Learning retirement drawdown policies for a defined-contribution account.
//!
//! The crate couples a seven-factor economic scenario generator ([`esg`]),
//! projected mortality ([`mortality`]), a means-tested age pension and fee
//! model ([`account`]) and CRRA lifetime utility ([`utility`]) into a
//! controlled Monte Carlo simulation ([`transition`]). A small feed-forward
//! policy ([`policy_net`]) is trained by differentiating the simulated
//! lifetime utility through every year of every path ([`tape`],
//! [`trainer`]) and compared against deterministic drawdown rules
//! ([`baselines`], [`evaluator`]).

pub mod account;
pub mod baselines;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod esg;
pub mod evaluator;
pub mod mortality;
pub mod policy_net;
pub mod tape;
pub mod trainer;
pub mod transition;
pub mod utility;

pub use error::{Error, Result};
