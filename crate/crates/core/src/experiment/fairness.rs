//! Decentralization metrics over an experiment's outcome.

use serde::{Deserialize, Serialize};

use super::EmpiricalResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub max_abs_deviation: f64,
    pub gini_stake: f64,
    pub gini_wins: f64,
    pub nakamoto_coefficient: u64,
}

pub fn fairness_report(result: &EmpiricalResult) -> FairnessReport {
    let max_abs_deviation = result
        .frequencies
        .iter()
        .zip(&result.theoretical)
        .map(|(f, t)| (f - t).abs())
        .fold(0.0, f64::max);
    let wins: Vec<u64> = result.wins.iter().map(|&(_, c)| c).collect();
    FairnessReport {
        max_abs_deviation,
        gini_stake: gini(&result.stakes),
        gini_wins: gini(&wins),
        nakamoto_coefficient: nakamoto_coefficient(&wins),
    }
}

/// Gini coefficient by the sorted-cumulative formula
/// `(n + 1) / n - 2 sum_i (n + 1 - i) x_(i) / (n sum x)`, ascending order.
pub fn gini(values: &[u64]) -> f64 {
    let total: u128 = values.iter().map(|&v| v as u128).sum();
    if values.is_empty() || total == 0 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (n - i as f64) * x as f64)
        .sum();
    ((n + 1.0) / n - 2.0 * weighted / (n * total as f64)).max(0.0)
}

/// Fewest parties whose combined share strictly exceeds one half.
pub fn nakamoto_coefficient(counts: &[u64]) -> u64 {
    let total: u128 = counts.iter().map(|&c| c as u128).sum();
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut acc = 0u128;
    for (k, &c) in sorted.iter().enumerate() {
        acc += c as u128;
        if 2 * acc > total {
            return k as u64 + 1;
        }
    }
    sorted.len() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stake_model::Mechanism;

    fn result(stakes: &[u64], wins: &[u64], theoretical: &[f64]) -> EmpiricalResult {
        let n: u64 = wins.iter().sum();
        EmpiricalResult {
            scenario_name: "f".into(),
            mechanism: Mechanism::ProportionalModel,
            master_seed: 0,
            trials: n,
            empty_slots: 0,
            stakes: stakes.to_vec(),
            coin_ages: vec![1; stakes.len()],
            wins: wins
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as u64, c))
                .collect(),
            frequencies: wins.iter().map(|&c| c as f64 / n as f64).collect(),
            theoretical: theoretical.to_vec(),
            ci99: vec![(0.0, 1.0); stakes.len()],
            chi_square: 0.0,
            chi_square_df: 1,
            p_value: 1.0,
            gof_pass: true,
        }
    }

    #[test]
    fn equal_and_proportional_is_perfectly_fair() {
        let r = fairness_report(&result(&[5; 4], &[250; 4], &[0.25; 4]));
        assert_eq!(r.gini_stake, 0.0);
        assert_eq!(r.gini_wins, 0.0);
        assert_eq!(r.max_abs_deviation, 0.0);
        assert_eq!(r.nakamoto_coefficient, 3);
    }

    #[test]
    fn single_winner_closed_form() {
        for n in 2..8usize {
            let mut wins = vec![0; n];
            wins[0] = 1000;
            let stakes: Vec<u64> = (0..n as u64).map(|i| if i == 0 { 51 } else { 1 }).collect();
            let r = fairness_report(&result(&stakes, &wins, &vec![0.0; n]));
            let want = (n as f64 - 1.0) / n as f64;
            assert!((r.gini_wins - want).abs() < 1e-12);
            assert_eq!(r.nakamoto_coefficient, 1);
        }
    }

    #[test]
    fn one_two_three_needs_two_parties() {
        let r = fairness_report(&result(
            &[1, 2, 3],
            &[100, 200, 300],
            &[1. / 6., 1. / 3., 0.5],
        ));
        assert_eq!(r.nakamoto_coefficient, 2);
        assert!(r.max_abs_deviation < 1e-15);
        // Mean-difference Gini of [1, 2, 3]: sum |xi - xj| / (2 n^2 mean) = 8 / 36.
        assert!((r.gini_stake - 2.0 / 9.0).abs() < 1e-12);
        assert!((r.gini_wins - 2.0 / 9.0).abs() < 1e-12);
    }
}
