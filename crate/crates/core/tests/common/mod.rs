//! Independent oracles for the selection mechanisms. Nothing here calls the
//! sampling code paths it is used to check.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use pos_lab::hash_lottery::{calibrate_difficulty, LotteryMode};
use pos_lab::sortition::ouroboros_select;
use pos_lab::stake_model::{LotteryParams, Mechanism, Scenario};

pub fn rat(n: u128, d: u128) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

/// Scenario with lottery parameters calibrated at `rate` when the mechanism
/// needs them.
pub fn scenario(
    mech: Mechanism,
    stakes: &[u64],
    ages: Option<&[u64]>,
    seed: u64,
    rate: f64,
) -> Scenario {
    let mut s = Scenario::from_stakes(format!("{mech}-{stakes:?}"), mech, seed, stakes);
    if let Some(a) = ages {
        s = s.with_coin_ages(a);
    }
    let mode = match mech {
        Mechanism::PeercoinAge => Some(LotteryMode::Peercoin),
        Mechanism::BlackcoinNxt => Some(LotteryMode::BlackcoinNxt),
        _ => None,
    };
    if let Some(mode) = mode {
        let d = calibrate_difficulty(&s.miners, rate, mode).unwrap();
        s = s.with_lottery(LotteryParams::new(d));
    }
    s
}

/// Lottery weight of each miner, recomputed from the raw fields.
fn lottery_weights(s: &Scenario, mode: LotteryMode) -> Vec<u128> {
    s.miners
        .iter()
        .map(|m| match mode {
            LotteryMode::Peercoin => m.stake as u128 * m.coin_age as u128,
            LotteryMode::BlackcoinNxt => m.stake as u128,
        })
        .collect()
}

/// Exact winner distribution of a threshold lottery over non-empty slots.
///
/// Per tick, each miner is eligible independently with probability
/// `u_i = min(1, D w_i / 2^64)`. Every eligible set `S` is enumerated; given
/// `S`, eligible hashes are uniform below their thresholds and the winner is
/// the smallest, so
/// `P(i | S) = (1/u_i) ∫_0^{min_S u} prod_{j in S, j != i} (1 - v/u_j) dv`.
/// Ticks are i.i.d., so the first-success winner has law `q_i / sum q`
/// with `q_i = sum_S P(S) P(i | S)`.
pub fn lottery_oracle(s: &Scenario, mode: LotteryMode) -> Vec<BigRational> {
    let d = s.lottery.unwrap().difficulty as u128;
    let range = BigInt::from(1u8) << 64u32;
    let u: Vec<BigRational> = lottery_weights(s, mode)
        .iter()
        .map(|&w| {
            let t = BigInt::from(d) * BigInt::from(w);
            let t = if t > range { range.clone() } else { t };
            BigRational::new(t, range.clone())
        })
        .collect();
    let n = u.len();
    assert!(n <= 12, "enumeration is exponential");
    let mut q = vec![BigRational::zero(); n];
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if members.iter().any(|&i| u[i].is_zero()) {
            continue;
        }
        let mut p_set = BigRational::one();
        for (i, ui) in u.iter().enumerate() {
            if mask >> i & 1 == 1 {
                p_set *= ui;
            } else {
                p_set *= BigRational::one() - ui;
            }
        }
        if p_set.is_zero() {
            continue;
        }
        let upper = members.iter().map(|&i| u[i].clone()).min().unwrap();
        for &i in &members {
            // Coefficients of prod_{j != i} (1 - v / u_j) in ascending powers.
            let mut poly = vec![BigRational::one()];
            for &j in members.iter().filter(|&&j| j != i) {
                let slope = -(BigRational::one() / &u[j]);
                let mut next = vec![BigRational::zero(); poly.len() + 1];
                for (k, c) in poly.iter().enumerate() {
                    next[k] += c;
                    next[k + 1] += c * &slope;
                }
                poly = next;
            }
            let mut integral = BigRational::zero();
            let mut power = upper.clone();
            for (k, c) in poly.iter().enumerate() {
                integral += c * &power / BigRational::from_integer(BigInt::from(k + 1));
                power *= &upper;
            }
            q[i] += &p_set * integral / &u[i];
        }
    }
    let total: BigRational = q.iter().sum();
    q.into_iter().map(|x| x / &total).collect()
}

/// Measure of each index's preimage under the election function, found by
/// bisecting over the ordered bit patterns of non-negative doubles.
pub fn election_interval_measures(weights: &[f64]) -> Vec<f64> {
    let select = |d: f64| ouroboros_select(weights, d).unwrap();
    let one_bits = 1.0f64.to_bits();
    // Smallest draw in [0, 1) mapping to an index >= i, or 1.0 if none.
    let boundary = |i: usize| -> f64 {
        if select(0.0) >= i {
            return 0.0;
        }
        let (mut lo, mut hi) = (0u64, one_bits);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if select(f64::from_bits(mid)) >= i {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        f64::from_bits(hi)
    };
    let bounds: Vec<f64> = (0..=weights.len()).map(boundary).collect();
    bounds.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Sortition over unit accounts: hashes are i.i.d. continuous, so every rank
/// order is equally likely. Enumerates all orderings of the accounts and
/// counts whose account comes first.
pub fn sortition_oracle(accounts_per_owner: &[usize]) -> Vec<BigRational> {
    let owners: Vec<usize> = accounts_per_owner
        .iter()
        .enumerate()
        .flat_map(|(o, &k)| std::iter::repeat_n(o, k))
        .collect();
    assert!(owners.len() <= 8, "enumeration is factorial");
    let mut first = vec![0u128; accounts_per_owner.len()];
    let mut total = 0u128;
    permute(&mut (0..owners.len()).collect::<Vec<_>>(), 0, &mut |perm| {
        first[owners[perm[0]]] += 1;
        total += 1;
    });
    first.iter().map(|&c| rat(c, total)).collect()
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Follow-the-satoshi: enumerate every token and credit its owner.
pub fn token_enumeration_oracle(stakes: &[u64]) -> Vec<BigRational> {
    let total: u64 = stakes.iter().sum();
    let mut owned = vec![0u128; stakes.len()];
    for token in 0..total {
        let mut acc = 0;
        for (i, &s) in stakes.iter().enumerate() {
            acc += s;
            if token < acc {
                owned[i] += 1;
                break;
            }
        }
    }
    owned.iter().map(|&c| rat(c, total as u128)).collect()
}

/// `p ± 3 sqrt(p (1 - p) / n)` contains `freq`.
pub fn within_3_sigma(freq: f64, p: f64, n: u64) -> bool {
    (freq - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// `p ± 2.576 sqrt(p (1 - p) / n)` contains `freq`.
pub fn within_ci99(freq: f64, p: f64, n: u64) -> bool {
    (freq - p).abs() <= 2.576 * (p * (1.0 - p) / n as f64).sqrt()
}
