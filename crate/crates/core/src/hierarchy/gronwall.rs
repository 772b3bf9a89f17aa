//! The cubic sequential recursion bounding the growth of hierarchy coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index range of the recursion `a_N = C Σ_{j+k+ℓ=N, j,k,ℓ≠N} a_j a_k a_ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum IndexConvention {
    /// `j, k, ℓ ≥ 1`.
    FromOne,
    /// `j, k, ℓ ≥ 0` with the given `a_0`.
    FromZero { a0: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct GronwallSequence {
    pub c: f64,
    pub a1: f64,
    pub convention: IndexConvention,
    /// `a_1 ..= a_N`.
    pub a: Vec<f64>,
    /// `Σ_{k≥0} ⟨k⟩^-2`.
    pub c2: f64,
    /// `(9 C C₂²)^{-1/2}`.
    pub c1: f64,
    /// Smallest `C₀` for which the base case `⟨1⟩² a_1 ≤ C₁ C₀ a_1` holds; the
    /// induction step then needs nothing further.
    pub c0_base: f64,
    /// Smallest `C₀` with `C₁C₀ ≥ 1` for which `⟨N⟩² a_N ≤ C₁ (C₀ a_1)^N` holds at every computed `N`.
    pub c0: f64,
    /// `⟨N⟩² a_N / (C₁ (C₀_base a_1)^N)` per `N`; at most 1 when the strengthened bound holds.
    pub strengthened_ratio: Vec<f64>,
    /// `a_N / (C₁ (C₀_base a_1)^N)` per `N`.
    pub plain_ratio: Vec<f64>,
    pub holds: bool,
    /// `a_N^{1/N}` per `N`.
    pub root: Vec<f64>,
}

/// `Σ_{k≥0} 1/(1+k²) = (1 + π coth π)/2`.
pub fn c2_constant() -> f64 {
    let pi = std::f64::consts::PI;
    (1.0 + pi / pi.tanh()) / 2.0
}

fn bracket2(n: usize) -> f64 {
    1.0 + (n * n) as f64
}

/// Equality variant of the recursion together with the majorant constants.
pub fn gronwall_sequence(c: f64, a1: f64, n: usize, convention: IndexConvention) -> Result<GronwallSequence> {
    if !(c > 0.0) || !(a1 > 0.0) || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "need C > 0, a1 > 0 and N ≥ 1, got C = {c}, a1 = {a1}, N = {n}"
        )));
    }
    let (lo, a0) = match convention {
        IndexConvention::FromOne => (1, 0.0),
        IndexConvention::FromZero { a0 } => {
            if !(a0 >= 0.0) {
                return Err(Error::InvalidParameter(format!("a0 must be nonnegative, got {a0}")));
            }
            (0, a0)
        }
    };
    // seq[i] = a_i, seq[0] = a_0 (unused for FromOne)
    let mut seq = vec![a0, a1];
    for big_n in 2..=n {
        let mut sum = 0.0;
        for j in lo..=big_n {
            for k in lo..=big_n - j {
                let l = big_n - j - k;
                if l < lo || j == big_n || k == big_n || l == big_n {
                    continue;
                }
                sum += seq[j] * seq[k] * seq[l];
            }
        }
        seq.push(c * sum);
    }
    let a: Vec<f64> = seq[1..].to_vec();
    let c2 = c2_constant();
    let c1 = 1.0 / (9.0 * c * c2 * c2).sqrt();
    let c0_base = 2.0 / c1;
    let mut c0 = c0_base.max(1.0 / c1);
    for (i, an) in a.iter().enumerate() {
        let big_n = (i + 1) as f64;
        let need = (bracket2(i + 1) * an / c1).powf(1.0 / big_n) / a1;
        c0 = c0.max(need);
    }
    let majorant = |i: usize| c1 * (c0_base * a1).powi(i as i32 + 1);
    let strengthened_ratio: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(i, an)| bracket2(i + 1) * an / majorant(i))
        .collect();
    let plain_ratio = a.iter().enumerate().map(|(i, an)| an / majorant(i)).collect();
    let holds = strengthened_ratio.iter().all(|r| *r <= 1.0 + 1e-12);
    let root = a
        .iter()
        .enumerate()
        .map(|(i, an)| an.powf(1.0 / (i + 1) as f64))
        .collect();
    Ok(GronwallSequence {
        c,
        a1,
        convention,
        a,
        c2,
        c1,
        c0_base,
        c0,
        strengthened_ratio,
        plain_ratio,
        holds,
        root,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c2_matches_partial_sum() {
        let s: f64 = (0..2_000_000).map(|k| 1.0 / (1.0 + (k as f64).powi(2))).sum();
        // tail beyond K is about 1/K
        assert!((c2_constant() - s - 1.0 / 2_000_000.0).abs() < 1e-10);
    }

    #[test]
    fn second_term_vanishes_in_both_conventions() {
        let one = gronwall_sequence(1.0, 1.0, 3, IndexConvention::FromOne).unwrap();
        assert_eq!(one.a[1], 0.0);
        assert_eq!(one.a[2], 1.0);
        let zero = gronwall_sequence(1.0, 1.0, 2, IndexConvention::FromZero { a0: 0.0 }).unwrap();
        assert_eq!(zero.a[1], 0.0);
    }

    #[test]
    fn single_term_sequence() {
        let g = gronwall_sequence(1.0, 0.5, 1, IndexConvention::FromOne).unwrap();
        assert_eq!(g.a, vec![0.5]);
        assert!(g.holds);
    }

    #[test]
    fn rejects_nonpositive_inputs() {
        assert!(gronwall_sequence(0.0, 1.0, 3, IndexConvention::FromOne).is_err());
        assert!(gronwall_sequence(1.0, -1.0, 3, IndexConvention::FromOne).is_err());
    }
}
