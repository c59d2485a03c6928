//! Threshold hash lotteries: Peercoin (stake × coin age) and Blackcoin/Nxt
//! (stake only).
//!
//! Each miner hashes `(seed, slot salt, tick)` once per tick and is eligible
//! when the hash falls strictly below `difficulty × weight`. A slot is won at
//! the first tick with at least one eligible miner, by the eligible miner with
//! the lowest hash (ties go to the lowest miner id).

use serde::{Deserialize, Serialize};

use crate::stake_model::{LotteryParams, MinerAccount, Scenario, StakeError, Weighting};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Size of the hash domain, 2^64.
pub const HASH_RANGE: u128 = 1 << 64;

/// Stream counter used for per-slot salts.
pub(crate) const SLOT_SALT_COUNTER: u64 = 0;

#[inline(always)]
fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline(always)]
fn absorb(state: u64, word: u64) -> u64 {
    splitmix_finalize((state ^ word).wrapping_add(GOLDEN_GAMMA))
}

/// Counter-based pseudorandom function standing in for the lottery hash.
///
/// `key`, `stream` and `counter` are absorbed in turn, each through one
/// SplitMix64 increment-and-finalize step. The first step alone is the
/// first output of a SplitMix64 generator seeded with `key`.
#[inline]
pub fn prf64(key: u64, stream: u64, counter: u64) -> u64 {
    let h = absorb(0, key);
    let h = absorb(h, stream);
    absorb(h, counter)
}

/// The part of [`prf64`] that depends only on the key.
#[inline]
pub(crate) fn key_state(key: u64) -> u64 {
    absorb(0, key)
}

/// Completes [`prf64`] from a [`key_state`].
#[inline]
pub(crate) fn finish_prf(state: u64, stream: u64, counter: u64) -> u64 {
    absorb(absorb(state, stream), counter)
}

/// Maps a 64-bit output to a uniform draw in `[0, 1)` using its top 53 bits.
#[inline]
pub fn unit_draw(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Per-slot salt; distinct slots get independent hash streams.
#[inline]
pub fn slot_salt(master_seed: u64, slot: u64) -> u64 {
    prf64(master_seed, slot, SLOT_SALT_COUNTER)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LotteryMode {
    Peercoin,
    BlackcoinNxt,
}

impl LotteryMode {
    pub fn weighting(self) -> Weighting {
        match self {
            LotteryMode::Peercoin => Weighting::StakeTimesAge,
            LotteryMode::BlackcoinNxt => Weighting::StakeOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickEligibility {
    pub miner_id: u64,
    pub tick: u64,
    pub proofhash: u64,
    pub eligible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub slot: u64,
    pub winner: Option<u64>,
    pub winning_tick: Option<u64>,
    pub winning_hash: Option<u64>,
}

impl SlotOutcome {
    fn empty(slot: u64) -> Self {
        Self {
            slot,
            winner: None,
            winning_tick: None,
            winning_hash: None,
        }
    }
}

/// `min(2^64, difficulty × weight)`. Capping at the hash range rather than at
/// `2^64 - 1` keeps a saturated miner eligible for every hash value.
#[inline]
pub fn threshold(difficulty: u64, weight: u128) -> u128 {
    (difficulty as u128)
        .checked_mul(weight)
        .map_or(HASH_RANGE, |t| t.min(HASH_RANGE))
}

/// Eligibility of one miner at one tick of the slot identified by `salt`.
pub fn eligibility(
    miner: &MinerAccount,
    salt: u64,
    tick: u64,
    params: &LotteryParams,
    mode: LotteryMode,
) -> TickEligibility {
    let proofhash = prf64(miner.seed, salt, tick);
    let t = threshold(params.difficulty, miner.weight(mode.weighting()));
    TickEligibility {
        miner_id: miner.id,
        tick,
        proofhash,
        eligible: (proofhash as u128) < t,
    }
}

/// Runs one slot of the scenario's lottery.
pub fn run_lottery_slot(
    scenario: &Scenario,
    slot: u64,
    mode: LotteryMode,
) -> Result<SlotOutcome, StakeError> {
    Ok(LotteryPlan::new(scenario, mode)?.run_slot(slot))
}

/// A scenario's lottery prepared for repeated slot evaluation.
///
/// Produces exactly the outcomes of [`run_lottery_slot`]; it only hoists the
/// per-miner parts of the hash out of the tick loop.
#[derive(Debug, Clone)]
pub struct LotteryPlan {
    master_seed: u64,
    tick_limit: u64,
    // Parallel arrays over miners with a non-zero threshold, sorted by id.
    ids: Vec<u64>,
    indices: Vec<usize>,
    keyed: Vec<u64>,
    /// `threshold - 1`: eligible iff `hash <= limit`.
    limits: Vec<u64>,
}

impl LotteryPlan {
    pub fn new(scenario: &Scenario, mode: LotteryMode) -> Result<Self, StakeError> {
        let params = scenario
            .lottery
            .ok_or(StakeError::MissingLotteryParams(scenario.mechanism))?;
        let mut entrants: Vec<(u64, usize, u64, u64)> = scenario
            .miners
            .iter()
            .enumerate()
            .filter_map(|(index, m)| {
                let t = threshold(params.difficulty, m.weight(mode.weighting()));
                // Zero-threshold miners can never be eligible.
                (t > 0).then(|| (m.id, index, key_state(m.seed), (t - 1) as u64))
            })
            .collect();
        entrants.sort_by_key(|e| e.0);
        Ok(Self {
            master_seed: scenario.master_seed,
            tick_limit: params.tick_limit,
            ids: entrants.iter().map(|e| e.0).collect(),
            indices: entrants.iter().map(|e| e.1).collect(),
            keyed: entrants.iter().map(|e| e.2).collect(),
            limits: entrants.iter().map(|e| e.3).collect(),
        })
    }

    pub fn run_slot(&self, slot: u64) -> SlotOutcome {
        match self.resolve(slot) {
            Some((tick, hash, k)) => SlotOutcome {
                slot,
                winner: Some(self.ids[k]),
                winning_tick: Some(tick),
                winning_hash: Some(hash),
            },
            None => SlotOutcome::empty(slot),
        }
    }

    /// Position of the slot winner in the scenario's miner list.
    #[inline]
    pub fn winner_index(&self, slot: u64) -> Option<usize> {
        self.resolve(slot).map(|(_, _, k)| self.indices[k])
    }

    fn resolve(&self, slot: u64) -> Option<(u64, u64, usize)> {
        if self.ids.is_empty() {
            return None;
        }
        let salt = slot_salt(self.master_seed, slot);
        let salted: Vec<u64> = self.keyed.iter().map(|&k| absorb(k, salt)).collect();
        let limits = &self.limits[..salted.len()];
        for tick in 0..self.tick_limit {
            let mut best_hash = u64::MAX;
            let mut best = usize::MAX;
            for (k, (&state, &limit)) in salted.iter().zip(limits).enumerate() {
                let h = absorb(state, tick);
                // Ascending ids plus strict `<` keep the lowest id on ties.
                if h <= limit && (best == usize::MAX || h < best_hash) {
                    best_hash = h;
                    best = k;
                }
            }
            if best != usize::MAX {
                return Some((tick, best_hash, best));
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("total weight is zero")]
    ZeroTotalWeight,
    #[error("target rate must lie in (0, 1], got {0}")]
    InvalidTargetRate(f64),
    #[error("target rate {0} is below the rate reached at difficulty 1")]
    RateUnreachable(f64),
}

/// Largest difficulty whose expected number of eligible miners per tick,
/// `sum_i min(1, D w_i / 2^64)`, does not exceed `target_rate`.
///
/// The search is capped at `floor(2^64 / max_i w_i)`: beyond it the heaviest
/// miner is always eligible and raising `D` changes nothing for it.
pub fn calibrate_difficulty(
    miners: &[MinerAccount],
    target_rate: f64,
    mode: LotteryMode,
) -> Result<u64, CalibrationError> {
    if !(target_rate > 0.0 && target_rate <= 1.0) {
        return Err(CalibrationError::InvalidTargetRate(target_rate));
    }
    let weights: Vec<u128> = miners
        .iter()
        .map(|m| m.weight(mode.weighting()))
        .filter(|&w| w > 0)
        .collect();
    let max_w = *weights
        .iter()
        .max()
        .ok_or(CalibrationError::ZeroTotalWeight)?;
    // Exact: scaling an f64 in (0, 1] by 2^64 is lossless.
    let budget = (target_rate * HASH_RANGE as f64) as u128;
    let expected = |d: u64| -> u128 { weights.iter().map(|&w| threshold(d, w)).sum() };

    let mut hi = (HASH_RANGE / max_w).min(u64::MAX as u128) as u64;
    let mut lo = 1u64;
    if expected(lo) > budget {
        return Err(CalibrationError::RateUnreachable(target_rate));
    }
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if expected(mid) <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(lo)
}

/// Calibrates and attaches lottery parameters for the scenario's weighting.
pub fn calibrated_params(
    scenario: &Scenario,
    target_rate: f64,
    mode: LotteryMode,
) -> Result<LotteryParams, CalibrationError> {
    let difficulty = calibrate_difficulty(&scenario.miners, target_rate, mode)?;
    Ok(LotteryParams::new(difficulty))
}
