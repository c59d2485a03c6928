//! Simulation laboratory for proof-of-stake leader election.
//!
//! Implements threshold hash lotteries (stake and stake × coin-age weighted),
//! an inverse-CDF election function, lowest-hash sortition with stake
//! splitting, and two closed-form next-block probability models, plus the
//! Monte Carlo and goodness-of-fit machinery to check which model each
//! mechanism actually follows.

pub mod cli_io;
pub mod experiment;
pub mod hash_lottery;
pub mod probability_models;
pub mod sortition;
pub mod stake_model;

pub use experiment::{
    attacker_dominance, fairness_report, run_experiment, AttackReport, EmpiricalResult, RunOptions,
};
pub use hash_lottery::{prf64, LotteryMode};
pub use stake_model::{LotteryParams, Mechanism, MinerAccount, Scenario};
