//! Monte Carlo engine: runs a scenario's mechanism over many independent
//! slots and tests the observed win counts against theory.
//!
//! Slot `j` draws all of its randomness from `prf64(master_seed, j, k)` for a
//! fixed small `k`, so any partition of the slot range across workers yields
//! the same tallies.

mod fairness;
mod stats;

pub use fairness::{fairness_report, gini, nakamoto_coefficient, FairnessReport};
pub use stats::{
    binomial_ci99, chi_square_gof, chi_square_survival, GofOutcome, StatsError, MIN_EXPECTED_COUNT,
    Z_99,
};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash_lottery::{
    finish_prf, key_state, prf64, slot_salt, unit_draw, LotteryMode, LotteryPlan,
};
use crate::probability_models::{
    majority_holder, saad_simulation_probabilities, theoretical_selection_probabilities,
};
use crate::sortition::{participants, split_stake, ElectionTable, SortitionError};
use crate::stake_model::{
    normalize_stakes, rational_to_f64, validate_scenario, Mechanism, Scenario, StakeError,
};

/// Stream counter for the election-function draw.
const ELECTION_DRAW_COUNTER: u64 = 2;
/// Stream counter for direct proportional draws.
const PROPORTIONAL_DRAW_COUNTER: u64 = 3;

/// Significance level of the goodness-of-fit test.
pub const GOF_SIGNIFICANCE: f64 = 0.01;

/// Upper bound on sortition accounts materialized for one experiment.
pub const MAX_SORTITION_ACCOUNTS: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Stake(#[from] StakeError),
    #[error(transparent)]
    Sortition(#[from] SortitionError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error("unknown attacker id {0}")]
    UnknownAttackerId(u64),
    #[error("one split unit per miner expected, got {got} for {miners} miners")]
    SplitUnitCount { got: usize, miners: usize },
    #[error("sortition would need {0} accounts (limit {MAX_SORTITION_ACCOUNTS})")]
    TooManyAccounts(u128),
    #[error("worker pool: {0}")]
    WorkerPool(String),
}

/// Observed outcome of an experiment alongside its theoretical expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalResult {
    pub scenario_name: String,
    pub mechanism: Mechanism,
    pub master_seed: u64,
    pub trials: u64,
    pub empty_slots: u64,
    pub stakes: Vec<u64>,
    pub coin_ages: Vec<u64>,
    /// `(miner_id, count)` in scenario order.
    pub wins: Vec<(u64, u64)>,
    /// Win counts over non-empty slots.
    pub frequencies: Vec<f64>,
    pub theoretical: Vec<f64>,
    pub ci99: Vec<(f64, f64)>,
    pub chi_square: f64,
    pub chi_square_df: u64,
    pub p_value: f64,
    pub gof_pass: bool,
}

impl EmpiricalResult {
    pub fn non_empty_slots(&self) -> u64 {
        self.trials - self.empty_slots
    }

    pub fn win_count(&self, miner_id: u64) -> Option<u64> {
        self.wins
            .iter()
            .find(|(id, _)| *id == miner_id)
            .map(|&(_, c)| c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attacker_id: u64,
    pub stake_ratio: f64,
    pub dominance_eq1: f64,
    pub dominance_mechanism: f64,
    pub mechanism: Mechanism,
}

/// How each miner splits its stake into sortition accounts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SplitPolicy {
    /// Every miner splits at the gcd of all non-zero stakes.
    #[default]
    CommonGcd,
    /// Per-miner account size, positionally.
    PerMiner(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker cap; `None` uses the ambient rayon pool.
    pub threads: Option<usize>,
    pub split: SplitPolicy,
}

impl RunOptions {
    pub fn with_threads(threads: usize) -> Self {
        Self {
            threads: Some(threads),
            ..Self::default()
        }
    }
}

enum SlotSampler {
    Lottery(LotteryPlan),
    Election {
        table: ElectionTable,
        master_seed: u64,
    },
    Sortition {
        /// `(first absorbed seed state, account seed, owner index)`.
        accounts: Vec<(u64, u64, usize)>,
        master_seed: u64,
    },
    Proportional {
        cumulative: Vec<u128>,
        total: u128,
        master_seed: u64,
    },
    Fixed(usize),
}

impl SlotSampler {
    fn new(scenario: &Scenario, split: &SplitPolicy) -> Result<Self, ExperimentError> {
        let master_seed = scenario.master_seed;
        Ok(match scenario.mechanism {
            Mechanism::PeercoinAge => {
                SlotSampler::Lottery(LotteryPlan::new(scenario, LotteryMode::Peercoin)?)
            }
            Mechanism::BlackcoinNxt => {
                SlotSampler::Lottery(LotteryPlan::new(scenario, LotteryMode::BlackcoinNxt)?)
            }
            Mechanism::Ouroboros => {
                let weights = normalize_stakes(&scenario.miners, Mechanism::Ouroboros.weighting())?;
                SlotSampler::Election {
                    table: ElectionTable::new(&weights)?,
                    master_seed,
                }
            }
            Mechanism::Algorand => {
                let units = split_units(scenario, split)?;
                let count: u128 = scenario
                    .miners
                    .iter()
                    .zip(&units)
                    .map(|(m, &u)| (m.stake / u.max(1)) as u128)
                    .sum();
                if count > MAX_SORTITION_ACCOUNTS as u128 {
                    return Err(ExperimentError::TooManyAccounts(count));
                }
                let sets = scenario
                    .miners
                    .iter()
                    .zip(&units)
                    .map(|(m, &u)| split_stake(m, u))
                    .collect::<Result<Vec<_>, _>>()?;
                let accounts = participants(&sets)
                    .into_iter()
                    .map(|(a, owner)| (key_state(a.account_seed), a.account_seed, owner))
                    .collect::<Vec<_>>();
                if accounts.is_empty() {
                    return Err(SortitionError::EmptyParticipantSet.into());
                }
                SlotSampler::Sortition {
                    accounts,
                    master_seed,
                }
            }
            Mechanism::ProportionalModel => proportional_sampler(scenario),
            Mechanism::SaadModel => match majority_holder(scenario) {
                Some(k) => SlotSampler::Fixed(k),
                None => proportional_sampler(scenario),
            },
        })
    }

    #[inline]
    fn winner(&self, slot: u64) -> Option<usize> {
        match self {
            SlotSampler::Lottery(plan) => plan.winner_index(slot),
            SlotSampler::Election { table, master_seed } => {
                let draw = unit_draw(prf64(*master_seed, slot, ELECTION_DRAW_COUNTER));
                Some(table.select(draw))
            }
            SlotSampler::Sortition {
                accounts,
                master_seed,
            } => {
                let salt = slot_salt(*master_seed, slot);
                accounts
                    .iter()
                    .map(|&(keyed, seed, owner)| (finish_prf(keyed, salt, 0), seed, owner))
                    .min()
                    .map(|(_, _, owner)| owner)
            }
            SlotSampler::Proportional {
                cumulative,
                total,
                master_seed,
            } => {
                let x = prf64(*master_seed, slot, PROPORTIONAL_DRAW_COUNTER);
                let token = scale_to_range(x, *total);
                Some(cumulative.partition_point(|&c| c <= token))
            }
            SlotSampler::Fixed(k) => Some(*k),
        }
    }
}

fn proportional_sampler(scenario: &Scenario) -> SlotSampler {
    let mut acc = 0u128;
    let cumulative = scenario
        .miners
        .iter()
        .map(|m| {
            acc += m.stake as u128;
            acc
        })
        .collect();
    SlotSampler::Proportional {
        cumulative,
        total: acc,
        master_seed: scenario.master_seed,
    }
}

/// `floor(x * total / 2^64)`: a token index in `[0, total)`.
#[inline]
fn scale_to_range(x: u64, total: u128) -> u128 {
    let hi = total >> 64;
    let lo = total as u64 as u128;
    (x as u128) * hi + (((x as u128) * lo) >> 64)
}

fn split_units(scenario: &Scenario, split: &SplitPolicy) -> Result<Vec<u64>, ExperimentError> {
    match split {
        SplitPolicy::CommonGcd => {
            let g = scenario
                .miners
                .iter()
                .map(|m| m.stake)
                .filter(|&s| s > 0)
                .fold(0u64, |g, s| g.gcd(&s));
            Ok(vec![g.max(1); scenario.miners.len()])
        }
        SplitPolicy::PerMiner(units) if units.len() == scenario.miners.len() => Ok(units.clone()),
        SplitPolicy::PerMiner(units) => Err(ExperimentError::SplitUnitCount {
            got: units.len(),
            miners: scenario.miners.len(),
        }),
    }
}

/// Runs `trials` slots with default options.
pub fn run_experiment(
    scenario: &Scenario,
    trials: u64,
) -> Result<EmpiricalResult, ExperimentError> {
    run_experiment_with(scenario, trials, &RunOptions::default())
}

pub fn run_experiment_with(
    scenario: &Scenario,
    trials: u64,
    options: &RunOptions,
) -> Result<EmpiricalResult, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::ZeroTrials);
    }
    let scenario = validate_scenario(scenario.clone())?;
    let sampler = SlotSampler::new(&scenario, &options.split)?;
    let counts = with_workers(options.threads, || {
        tally(&sampler, scenario.miners.len(), trials)
    })?;
    summarize(&scenario, trials, &counts)
}

fn with_workers<T: Send>(
    threads: Option<usize>,
    job: impl FnOnce() -> T + Send,
) -> Result<T, ExperimentError> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| ExperimentError::WorkerPool(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// Per-miner win counts, with empty slots tallied in the final position.
fn tally(sampler: &SlotSampler, miners: usize, trials: u64) -> Vec<u64> {
    const CHUNK: u64 = 4096;
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; miners + 1];
            for slot in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                match sampler.winner(slot) {
                    Some(i) => counts[i] += 1,
                    None => counts[miners] += 1,
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; miners + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

fn summarize(
    scenario: &Scenario,
    trials: u64,
    counts: &[u64],
) -> Result<EmpiricalResult, ExperimentError> {
    let n = scenario.miners.len();
    let wins = &counts[..n];
    let empty_slots = counts[n];
    let non_empty = trials - empty_slots;

    let theoretical_exact = theoretical_selection_probabilities(scenario)?;
    let tested = if scenario.mechanism == Mechanism::SaadModel {
        saad_simulation_probabilities(scenario)?
    } else {
        theoretical_exact.clone()
    };

    let frequencies: Vec<f64> = wins
        .iter()
        .map(|&c| {
            if non_empty == 0 {
                0.0
            } else {
                c as f64 / non_empty as f64
            }
        })
        .collect();
    let ci99 = wins
        .iter()
        .map(|&c| {
            if non_empty == 0 {
                (0.0, 1.0)
            } else {
                binomial_ci99(c, non_empty)
            }
        })
        .collect();

    let gof = if non_empty == 0 {
        Err(StatsError::DegenerateTest)
    } else {
        chi_square_gof(wins, &tested, non_empty)
    };
    let gof = match gof {
        Ok(g) => g,
        // Every expected observation lies in one category: the only possible
        // discrepancy is a win outside that model's support.
        Err(StatsError::DegenerateTest) => {
            let outside_support = wins.iter().zip(&tested).any(|(&c, p)| c > 0 && p.is_zero());
            GofOutcome {
                statistic: 0.0,
                df: 1,
                p_value: if outside_support || non_empty == 0 {
                    0.0
                } else {
                    1.0
                },
            }
        }
        Err(e) => return Err(e.into()),
    };

    Ok(EmpiricalResult {
        scenario_name: scenario.name.clone(),
        mechanism: scenario.mechanism,
        master_seed: scenario.master_seed,
        trials,
        empty_slots,
        stakes: scenario.stakes(),
        coin_ages: scenario.miners.iter().map(|m| m.coin_age).collect(),
        wins: scenario
            .miners
            .iter()
            .zip(wins)
            .map(|(m, &c)| (m.id, c))
            .collect(),
        frequencies,
        theoretical: theoretical_exact.iter().map(rational_to_f64).collect(),
        ci99,
        chi_square: gof.statistic,
        chi_square_df: gof.df,
        p_value: gof.p_value,
        gof_pass: gof.p_value >= GOF_SIGNIFICANCE,
    })
}

/// Contrasts the attacker's win share under the majority-capture model with
/// its share under the scenario's own mechanism.
pub fn attacker_dominance(
    scenario: &Scenario,
    attacker_id: u64,
    trials: u64,
) -> Result<AttackReport, ExperimentError> {
    attacker_dominance_with(scenario, attacker_id, trials, &RunOptions::default())
}

pub fn attacker_dominance_with(
    scenario: &Scenario,
    attacker_id: u64,
    trials: u64,
    options: &RunOptions,
) -> Result<AttackReport, ExperimentError> {
    let index = scenario
        .index_of(attacker_id)
        .ok_or(ExperimentError::UnknownAttackerId(attacker_id))?;
    let share = |r: &EmpiricalResult| r.frequencies[index];

    let eq1 = run_experiment_with(
        &scenario.clone().with_mechanism(Mechanism::SaadModel),
        trials,
        options,
    )?;
    let mech = run_experiment_with(scenario, trials, options)?;

    let beta = BigInt::from(scenario.total_stake());
    let alpha = BigInt::from(scenario.miners[index].stake);
    Ok(AttackReport {
        attacker_id,
        stake_ratio: rational_to_f64(&BigRational::new(alpha, beta)),
        dominance_eq1: share(&eq1),
        dominance_mechanism: share(&mech),
        mechanism: scenario.mechanism,
    })
}
