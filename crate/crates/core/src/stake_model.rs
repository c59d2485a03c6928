//! Stake distributions, scenario validation and stake weighting.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash_lottery::prf64;

/// Stream counter reserved for deriving default miner seeds from the master seed.
pub(crate) const MINER_SEED_COUNTER: u64 = 1;

/// Default number of ticks evaluated per slot before a lottery slot is declared empty.
pub const DEFAULT_TICK_LIMIT: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StakeError {
    #[error("duplicate miner id {0}")]
    DuplicateMinerId(u64),
    #[error("total stake is zero")]
    ZeroTotalStake,
    #[error("total weight is zero")]
    ZeroTotalWeight,
    #[error("mechanism {0} requires lottery parameters")]
    MissingLotteryParams(Mechanism),
    #[error("invalid lottery parameters: {0}")]
    InvalidLotteryParams(&'static str),
}

/// One staker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinerAccount {
    pub id: u64,
    /// Staked token units.
    pub stake: u64,
    /// Age units; multiplies stake under coin-age weighting.
    pub coin_age: u64,
    /// Unique per-miner seed fed to the lottery hash.
    pub seed: u64,
}

impl MinerAccount {
    /// Miner with coin age 1 and a seed derived from `(master_seed, id)`.
    pub fn new(id: u64, stake: u64, master_seed: u64) -> Self {
        Self {
            id,
            stake,
            coin_age: 1,
            seed: derive_miner_seed(master_seed, id),
        }
    }

    pub fn with_coin_age(mut self, coin_age: u64) -> Self {
        self.coin_age = coin_age;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn weight(&self, weighting: Weighting) -> u128 {
        match weighting {
            Weighting::StakeOnly => self.stake as u128,
            Weighting::StakeTimesAge => self.stake as u128 * self.coin_age as u128,
        }
    }
}

pub fn derive_miner_seed(master_seed: u64, id: u64) -> u64 {
    prf64(master_seed, id, MINER_SEED_COUNTER)
}

/// Leader-selection mechanism or closed-form model a scenario runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    PeercoinAge,
    BlackcoinNxt,
    Ouroboros,
    Algorand,
    SaadModel,
    ProportionalModel,
}

impl Mechanism {
    pub const ALL: [Mechanism; 6] = [
        Mechanism::PeercoinAge,
        Mechanism::BlackcoinNxt,
        Mechanism::Ouroboros,
        Mechanism::Algorand,
        Mechanism::SaadModel,
        Mechanism::ProportionalModel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::PeercoinAge => "PeercoinAge",
            Mechanism::BlackcoinNxt => "BlackcoinNxt",
            Mechanism::Ouroboros => "Ouroboros",
            Mechanism::Algorand => "Algorand",
            Mechanism::SaadModel => "SaadModel",
            Mechanism::ProportionalModel => "ProportionalModel",
        }
    }

    pub fn is_hash_lottery(self) -> bool {
        matches!(self, Mechanism::PeercoinAge | Mechanism::BlackcoinNxt)
    }

    /// Weighting that determines the mechanism's selection probabilities.
    pub fn weighting(self) -> Weighting {
        match self {
            Mechanism::PeercoinAge => Weighting::StakeTimesAge,
            _ => Weighting::StakeOnly,
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weighting {
    StakeOnly,
    StakeTimesAge,
}

/// Threshold-lottery parameters. The hash range is fixed at 2^64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LotteryParams {
    pub difficulty: u64,
    pub tick_limit: u64,
}

impl LotteryParams {
    pub fn new(difficulty: u64) -> Self {
        Self {
            difficulty,
            tick_limit: DEFAULT_TICK_LIMIT,
        }
    }

    pub fn with_tick_limit(mut self, tick_limit: u64) -> Self {
        self.tick_limit = tick_limit;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub miners: Vec<MinerAccount>,
    pub mechanism: Mechanism,
    pub lottery: Option<LotteryParams>,
    pub master_seed: u64,
}

impl Scenario {
    /// Builds an unvalidated scenario with derived seeds and unit coin ages.
    pub fn from_stakes(
        name: impl Into<String>,
        mechanism: Mechanism,
        master_seed: u64,
        stakes: &[u64],
    ) -> Self {
        let miners = stakes
            .iter()
            .enumerate()
            .map(|(i, &s)| MinerAccount::new(i as u64, s, master_seed))
            .collect();
        Self {
            name: name.into(),
            miners,
            mechanism,
            lottery: None,
            master_seed,
        }
    }

    /// Overwrites coin ages positionally. Panics if the lengths differ.
    pub fn with_coin_ages(mut self, ages: &[u64]) -> Self {
        assert_eq!(ages.len(), self.miners.len(), "one coin age per miner");
        for (m, &a) in self.miners.iter_mut().zip(ages) {
            m.coin_age = a;
        }
        self
    }

    pub fn with_lottery(mut self, params: LotteryParams) -> Self {
        self.lottery = Some(params);
        self
    }

    pub fn with_mechanism(mut self, mechanism: Mechanism) -> Self {
        self.mechanism = mechanism;
        self
    }

    pub fn total_stake(&self) -> u128 {
        self.miners.iter().map(|m| m.stake as u128).sum()
    }

    pub fn stakes(&self) -> Vec<u64> {
        self.miners.iter().map(|m| m.stake).collect()
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.miners.iter().position(|m| m.id == id)
    }
}

/// Returns the scenario unchanged when every invariant holds.
pub fn validate_scenario(scenario: Scenario) -> Result<Scenario, StakeError> {
    let mut seen = HashSet::with_capacity(scenario.miners.len());
    for m in &scenario.miners {
        if !seen.insert(m.id) {
            return Err(StakeError::DuplicateMinerId(m.id));
        }
    }
    if scenario.total_stake() == 0 {
        return Err(StakeError::ZeroTotalStake);
    }
    // Coin age is a plain integer defaulting to 1, so it is always recorded;
    // what can still go wrong is every stake-holder having age 0.
    if scenario.mechanism == Mechanism::PeercoinAge
        && total_weight(&scenario.miners, Weighting::StakeTimesAge) == 0
    {
        return Err(StakeError::ZeroTotalWeight);
    }
    if scenario.mechanism.is_hash_lottery() {
        match scenario.lottery {
            None => return Err(StakeError::MissingLotteryParams(scenario.mechanism)),
            Some(p) if p.difficulty == 0 => {
                return Err(StakeError::InvalidLotteryParams("difficulty must be > 0"))
            }
            Some(p) if p.tick_limit == 0 => {
                return Err(StakeError::InvalidLotteryParams("tick_limit must be >= 1"))
            }
            Some(_) => {}
        }
    }
    Ok(scenario)
}

fn total_weight(miners: &[MinerAccount], weighting: Weighting) -> u128 {
    // s*a < 2^128 per miner; the sum saturates rather than wraps, which is
    // enough for the zero test.
    miners
        .iter()
        .fold(0u128, |acc, m| acc.saturating_add(m.weight(weighting)))
}

/// Floating-point normalized weights `w_i / sum(w)`.
pub fn normalize_stakes(
    miners: &[MinerAccount],
    weighting: Weighting,
) -> Result<Vec<f64>, StakeError> {
    let exact = normalize_stakes_exact(miners, weighting)?;
    Ok(exact.iter().map(rational_to_f64).collect())
}

/// Exact-rational normalized weights.
pub fn normalize_stakes_exact(
    miners: &[MinerAccount],
    weighting: Weighting,
) -> Result<Vec<BigRational>, StakeError> {
    let weights: Vec<BigInt> = miners
        .iter()
        .map(|m| BigInt::from(m.weight(weighting)))
        .collect();
    let total: BigInt = weights.iter().sum();
    if total.is_zero() {
        return Err(StakeError::ZeroTotalWeight);
    }
    Ok(weights
        .into_iter()
        .map(|w| BigRational::new(w, total.clone()))
        .collect())
}

/// Correctly rounded conversion for the reporting edge.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn miners(stakes: &[u64]) -> Vec<MinerAccount> {
        Scenario::from_stakes("t", Mechanism::Ouroboros, 7, stakes).miners
    }

    #[test]
    fn valid_scenario_is_returned_unchanged() {
        let s = Scenario::from_stakes("ok", Mechanism::Ouroboros, 1, &[51, 49]);
        assert_eq!(validate_scenario(s.clone()).unwrap(), s);
    }

    #[test]
    fn zero_total_stake_rejected() {
        let s = Scenario::from_stakes("z", Mechanism::Ouroboros, 1, &[0, 0]);
        assert_eq!(validate_scenario(s), Err(StakeError::ZeroTotalStake));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut s = Scenario::from_stakes("d", Mechanism::Ouroboros, 1, &[1, 2]);
        s.miners[0].id = 3;
        s.miners[1].id = 3;
        assert_eq!(validate_scenario(s), Err(StakeError::DuplicateMinerId(3)));
    }

    #[test]
    fn lottery_mechanism_needs_params() {
        let s = Scenario::from_stakes("l", Mechanism::BlackcoinNxt, 1, &[1]);
        assert_eq!(
            validate_scenario(s.clone()),
            Err(StakeError::MissingLotteryParams(Mechanism::BlackcoinNxt))
        );
        assert!(validate_scenario(s.clone().with_lottery(LotteryParams::new(0))).is_err());
        assert!(
            validate_scenario(s.with_lottery(LotteryParams::new(5).with_tick_limit(0))).is_err()
        );
    }

    #[test]
    fn peercoin_with_all_zero_ages_rejected() {
        let s = Scenario::from_stakes("p", Mechanism::PeercoinAge, 1, &[3, 4])
            .with_coin_ages(&[0, 0])
            .with_lottery(LotteryParams::new(1));
        assert_eq!(validate_scenario(s), Err(StakeError::ZeroTotalWeight));
    }

    #[test]
    fn normalize_examples() {
        let p = normalize_stakes_exact(&miners(&[1, 2, 3]), Weighting::StakeOnly).unwrap();
        let expect: Vec<BigRational> = [(1, 6), (1, 3), (1, 2)]
            .iter()
            .map(|&(n, d)| BigRational::new(n.into(), d.into()))
            .collect();
        assert_eq!(p, expect);

        let ms: Vec<_> = miners(&[1, 2])
            .into_iter()
            .zip([2, 1])
            .map(|(m, a)| m.with_coin_age(a))
            .collect();
        assert_eq!(
            normalize_stakes(&ms, Weighting::StakeTimesAge).unwrap(),
            vec![0.5, 0.5]
        );
        assert_eq!(
            normalize_stakes(&miners(&[7]), Weighting::StakeOnly).unwrap(),
            vec![1.0]
        );
    }

    #[test]
    fn zero_weight_error() {
        assert_eq!(
            normalize_stakes(&miners(&[0, 0]), Weighting::StakeOnly),
            Err(StakeError::ZeroTotalWeight)
        );
    }

    proptest! {
        #[test]
        fn normalized_weights_form_a_distribution(
            stakes in prop::collection::vec(0u64..1_000_000, 1..20),
            ages in prop::collection::vec(0u64..1000, 20),
        ) {
            prop_assume!(stakes.iter().zip(&ages).any(|(s, a)| s * a > 0));
            let ms: Vec<_> = miners(&stakes)
                .into_iter()
                .zip(ages)
                .map(|(m, a)| m.with_coin_age(a))
                .collect();
            for weighting in [Weighting::StakeOnly, Weighting::StakeTimesAge] {
                let p = normalize_stakes(&ms, weighting).unwrap();
                let sum: f64 = p.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 2f64.powi(-40));
                for (m, &pi) in ms.iter().zip(&p) {
                    prop_assert!((0.0..=1.0).contains(&pi));
                    if m.weight(weighting) == 0 {
                        prop_assert_eq!(pi, 0.0);
                    }
                }
            }
        }

        #[test]
        fn scaling_stakes_leaves_weights_unchanged(
            stakes in prop::collection::vec(0u64..1_000_000, 1..12),
            c in 1u64..1_000_000,
        ) {
            prop_assume!(stakes.iter().any(|&s| s > 0));
            let scaled: Vec<u64> = stakes.iter().map(|s| s * c).collect();
            let a = normalize_stakes_exact(&miners(&stakes), Weighting::StakeOnly).unwrap();
            let b = normalize_stakes_exact(&miners(&scaled), Weighting::StakeOnly).unwrap();
            prop_assert_eq!(&a, &b);
            let fa = normalize_stakes(&miners(&stakes), Weighting::StakeOnly).unwrap();
            let fb = normalize_stakes(&miners(&scaled), Weighting::StakeOnly).unwrap();
            for (x, y) in fa.iter().zip(&fb) {
                prop_assert!((x - y).abs() <= 2f64.powi(-40));
            }
        }
    }
}
