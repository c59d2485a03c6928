//! Closed-form next-block probability models.
//!
//! Two competing models for the chance that a miner holding `alpha` of
//! `beta` staked tokens mints the next block:
//!
//! * the majority-capture model: `alpha / beta` below one half, otherwise 1;
//! * the proportional model: `alpha / beta` everywhere.
//!
//! All arithmetic here is exact; conversion to floating point happens only
//! where results are reported.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::One;
use thiserror::Error;

use crate::stake_model::{normalize_stakes_exact, Mechanism, Scenario, StakeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("total stake must be positive")]
    ZeroBeta,
    #[error("miner stake {alpha} exceeds total stake {beta}")]
    AlphaExceedsBeta { alpha: u128, beta: u128 },
}

/// A miner's stake against the total stake.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StakeQuery {
    alpha: u128,
    beta: u128,
}

impl StakeQuery {
    pub fn new(alpha: u128, beta: u128) -> Result<Self, QueryError> {
        if beta == 0 {
            return Err(QueryError::ZeroBeta);
        }
        if alpha > beta {
            return Err(QueryError::AlphaExceedsBeta { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> u128 {
        self.alpha
    }

    pub fn beta(&self) -> u128 {
        self.beta
    }

    /// `alpha / beta >= 1/2`, decided without division.
    pub fn is_majority(&self) -> bool {
        // 2 alpha >= beta, rearranged so it cannot overflow.
        self.alpha >= self.beta - self.alpha
    }
}

pub fn saad_next_block_probability(q: StakeQuery) -> Ratio<u128> {
    if q.is_majority() {
        Ratio::one()
    } else {
        Ratio::new(q.alpha, q.beta)
    }
}

pub fn proportional_next_block_probability(q: StakeQuery) -> Ratio<u128> {
    Ratio::new(q.alpha, q.beta)
}

pub fn ratio_to_big(r: Ratio<u128>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// Per-miner selection probabilities the scenario's mechanism should produce.
///
/// For [`Mechanism::SaadModel`] this is the per-miner majority-capture value,
/// which sums to more than 1 once a majority holder exists.
pub fn theoretical_selection_probabilities(
    scenario: &Scenario,
) -> Result<Vec<BigRational>, StakeError> {
    match scenario.mechanism {
        Mechanism::SaadModel => {
            let beta = scenario.total_stake();
            if beta == 0 {
                return Err(StakeError::ZeroTotalWeight);
            }
            Ok(scenario
                .miners
                .iter()
                .map(|m| {
                    let q = StakeQuery::new(m.stake as u128, beta).expect("alpha <= beta");
                    ratio_to_big(saad_next_block_probability(q))
                })
                .collect())
        }
        mech => normalize_stakes_exact(&scenario.miners, mech.weighting()),
    }
}

/// Distribution actually sampled under the majority-capture model: a majority
/// holder (the first one, if two hold exactly half each) wins every slot;
/// otherwise selection is proportional.
pub fn saad_simulation_probabilities(scenario: &Scenario) -> Result<Vec<BigRational>, StakeError> {
    let beta = scenario.total_stake();
    if beta == 0 {
        return Err(StakeError::ZeroTotalWeight);
    }
    match majority_holder(scenario) {
        Some(k) => Ok((0..scenario.miners.len())
            .map(|i| BigRational::from_integer(BigInt::from((i == k) as u8)))
            .collect()),
        None => normalize_stakes_exact(&scenario.miners, Mechanism::SaadModel.weighting()),
    }
}

/// Index of the first miner with `2 alpha >= beta`.
pub fn majority_holder(scenario: &Scenario) -> Option<usize> {
    let beta = scenario.total_stake();
    if beta == 0 {
        return None;
    }
    scenario.miners.iter().position(|m| {
        StakeQuery::new(m.stake as u128, beta)
            .map(|q| q.is_majority())
            .unwrap_or(false)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use proptest::prelude::*;

    fn q(a: u128, b: u128) -> StakeQuery {
        StakeQuery::new(a, b).unwrap()
    }

    fn r(n: u128, d: u128) -> Ratio<u128> {
        Ratio::new(n, d)
    }

    #[test]
    fn majority_capture_examples() {
        assert_eq!(saad_next_block_probability(q(30, 100)), r(3, 10));
        assert_eq!(saad_next_block_probability(q(51, 100)), Ratio::one());
        assert_eq!(saad_next_block_probability(q(50, 100)), Ratio::one());
        assert_eq!(saad_next_block_probability(q(0, 100)), Ratio::zero());
    }

    #[test]
    fn proportional_examples() {
        assert_eq!(proportional_next_block_probability(q(51, 100)), r(51, 100));
        assert_eq!(
            proportional_next_block_probability(q(100, 100)),
            Ratio::one()
        );
        assert_eq!(proportional_next_block_probability(q(25, 100)), r(1, 4));
    }

    #[test]
    fn query_invariants() {
        assert_eq!(StakeQuery::new(1, 0), Err(QueryError::ZeroBeta));
        assert!(StakeQuery::new(5, 4).is_err());
        assert!(q(u128::MAX, u128::MAX).is_majority());
        assert!(!q(u128::MAX / 2, u128::MAX).is_majority());
    }

    fn big(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn table_probabilities() {
        let s = Scenario::from_stakes("b", Mechanism::BlackcoinNxt, 0, &[1, 1, 1, 1]);
        assert_eq!(
            theoretical_selection_probabilities(&s).unwrap(),
            vec![big(1, 4); 4]
        );
        let p =
            Scenario::from_stakes("p", Mechanism::PeercoinAge, 0, &[1, 2]).with_coin_ages(&[2, 1]);
        assert_eq!(
            theoretical_selection_probabilities(&p).unwrap(),
            vec![big(1, 2); 2]
        );
        let o = Scenario::from_stakes("o", Mechanism::Ouroboros, 0, &[1, 2, 3]);
        assert_eq!(
            theoretical_selection_probabilities(&o).unwrap(),
            vec![big(1, 6), big(1, 3), big(1, 2)]
        );
        let saad = Scenario::from_stakes("s", Mechanism::SaadModel, 0, &[51, 49]);
        assert_eq!(
            theoretical_selection_probabilities(&saad).unwrap(),
            vec![big(1, 1), big(49, 100)]
        );
        assert_eq!(
            saad_simulation_probabilities(&saad).unwrap(),
            vec![big(1, 1), big(0, 1)]
        );
    }

    #[test]
    fn half_and_half_goes_to_first_holder() {
        let s = Scenario::from_stakes("h", Mechanism::SaadModel, 0, &[50, 50]);
        assert_eq!(majority_holder(&s), Some(0));
    }

    proptest! {
        #[test]
        fn models_agree_below_half(beta in 1u128..1_000_000_000, frac in 0.0f64..1.0) {
            let alpha = (frac * beta as f64) as u128 % (beta + 1);
            let query = q(alpha, beta);
            let saad = saad_next_block_probability(query);
            let prop = proportional_next_block_probability(query);
            if 2 * alpha < beta {
                prop_assert_eq!(saad, prop);
            } else {
                prop_assert_eq!(saad, Ratio::one());
                prop_assert_eq!(saad - prop, Ratio::one() - r(alpha, beta));
                if alpha < beta {
                    prop_assert!(saad > prop);
                }
            }
        }

        #[test]
        fn proportional_mechanisms_agree(
            stakes in prop::collection::vec(0u64..1_000_000, 1..10),
        ) {
            prop_assume!(stakes.iter().any(|&s| s > 0));
            let base = Scenario::from_stakes("x", Mechanism::BlackcoinNxt, 0, &stakes);
            let reference = theoretical_selection_probabilities(&base).unwrap();
            let sum: BigRational = reference.iter().sum();
            prop_assert_eq!(sum, BigRational::one());
            for m in [Mechanism::Ouroboros, Mechanism::Algorand, Mechanism::ProportionalModel] {
                let v = theoretical_selection_probabilities(&base.clone().with_mechanism(m)).unwrap();
                prop_assert_eq!(&v, &reference);
            }
        }
    }
}
