//! Direct leader selection: an inverse-CDF election function over normalized
//! stake, and lowest-hash sortition over unit-granularity accounts.

use thiserror::Error;

use crate::hash_lottery::prf64;
use crate::stake_model::MinerAccount;

/// Counter used when deriving account seeds from a miner seed.
const ACCOUNT_SEED_COUNTER: u64 = 1;

/// Allowed deviation of a weight vector's sum from 1.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SortitionError {
    #[error("malformed weights: {0}")]
    MalformedWeights(String),
    #[error("no participant accounts")]
    EmptyParticipantSet,
    #[error("stake {stake} is not a multiple of unit {unit}")]
    IndivisibleStake { stake: u64, unit: u64 },
    #[error("split unit must be positive")]
    ZeroUnit,
}

/// Cumulative table for repeated [`ouroboros_select`] calls on fixed weights.
#[derive(Debug, Clone)]
pub struct ElectionTable {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl ElectionTable {
    pub fn new(weights: &[f64]) -> Result<Self, SortitionError> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(SortitionError::MalformedWeights(format!(
                "invalid weight {w}"
            )));
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if (acc - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(SortitionError::MalformedWeights(format!(
                "weights sum to {acc}"
            )));
        }
        let last_positive = weights
            .iter()
            .rposition(|&w| w > 0.0)
            .expect("sum is near 1");
        Ok(Self {
            cumulative,
            last_positive,
        })
    }

    /// Index whose half-open cumulative interval contains `draw`.
    #[inline]
    pub fn select(&self, draw: f64) -> usize {
        // First index whose upper boundary exceeds the draw; zero-width
        // intervals are skipped because their boundary equals the previous one.
        let i = self.cumulative.partition_point(|&c| c <= draw);
        // A draw beyond the rounded total belongs to the tail interval.
        i.min(self.last_positive)
    }
}

/// Election function F: maps a uniform draw in `[0, 1)` to a miner index.
pub fn ouroboros_select(weights: &[f64], draw: f64) -> Result<usize, SortitionError> {
    Ok(ElectionTable::new(weights)?.select(draw))
}

/// One sortition participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SortitionAccount {
    pub account_seed: u64,
    pub stake: u64,
}

/// A miner's stake split into equal accounts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitAccountSet {
    pub owner_id: u64,
    pub accounts: Vec<SortitionAccount>,
}

impl UnitAccountSet {
    pub fn total_stake(&self) -> u64 {
        self.accounts.iter().map(|a| a.stake).sum()
    }
}

/// Splits a miner's stake into `stake / unit` accounts of `unit` stake each.
pub fn split_stake(miner: &MinerAccount, unit: u64) -> Result<UnitAccountSet, SortitionError> {
    if unit == 0 {
        return Err(SortitionError::ZeroUnit);
    }
    if !miner.stake.is_multiple_of(unit) {
        return Err(SortitionError::IndivisibleStake {
            stake: miner.stake,
            unit,
        });
    }
    let accounts = (0..miner.stake / unit)
        .map(|j| SortitionAccount {
            account_seed: prf64(miner.seed, j, ACCOUNT_SEED_COUNTER),
            stake: unit,
        })
        .collect();
    Ok(UnitAccountSet {
        owner_id: miner.id,
        accounts,
    })
}

/// Lowest-hash sortition. Each entry pairs an account with the index of its
/// owner; returns the owner index of the account with the minimal
/// `prf64(account_seed, slot_salt, 0)`, ties going to the lower seed.
pub fn algorand_select(
    accounts: &[(SortitionAccount, usize)],
    slot_salt: u64,
) -> Result<usize, SortitionError> {
    accounts
        .iter()
        .filter(|(a, _)| a.stake >= 1)
        .map(|(a, owner)| (prf64(a.account_seed, slot_salt, 0), a.account_seed, *owner))
        .min()
        .map(|(_, _, owner)| owner)
        .ok_or(SortitionError::EmptyParticipantSet)
}

/// Flattens per-miner account sets into the participant list used by
/// [`algorand_select`], tagging each account with its owner's position.
pub fn participants(sets: &[UnitAccountSet]) -> Vec<(SortitionAccount, usize)> {
    sets.iter()
        .enumerate()
        .flat_map(|(i, set)| set.accounts.iter().map(move |a| (*a, i)))
        .collect()
}
