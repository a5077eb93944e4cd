//! Hyperbolic (Pliss) times of a sequence of per-step contraction norms.
//!
//! An index `r` of `a_0..a_n` is a time when every subproduct starting at it
//! obeys `Π_{i=r}^{j} a_i ≤ γ₂^{j−r}` for `r ≤ j ≤ n`. The exponent is `j−r`
//! for `j−r+1` factors, one step stricter than the usual textbook form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed in the log-domain comparisons.
const LOG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlissReport {
    pub gamma1: f64,
    pub gamma2: f64,
    /// Per-step norm bound used for the constants.
    pub a_bound: f64,
    /// Last index `n` of the input (`len − 1`).
    pub n: usize,
    pub times: Vec<usize>,
    /// Density constant `c`.
    pub c: f64,
    /// Minimal length `N` from which the density bound applies.
    pub n_min: usize,
    /// `Π_{i=0}^{n} a_i ≤ γ₁ⁿ`.
    pub hypothesis_holds: bool,
    /// `times.len() ≥ c·n`, reported when the hypothesis holds and `n ≥ N`.
    pub density_holds: Option<bool>,
}

impl PlissReport {
    pub fn count(&self) -> usize {
        self.times.len()
    }
}

fn check_thresholds(gamma1: f64, gamma2: f64) -> Result<()> {
    if gamma1 > 0.0 && gamma1 < gamma2 && gamma2 < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidThresholds { gamma1, gamma2 })
    }
}

/// Density constant `c = (ln γ₂ − ln γ₁)/(ln A − ln γ₁)` clamped to 1, and
/// `N = ⌈1/c⌉`.
pub fn pliss_constants(gamma1: f64, gamma2: f64, a_bound: f64) -> Result<(usize, f64)> {
    check_thresholds(gamma1, gamma2)?;
    if !(a_bound > 0.0 && a_bound.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "norm bound must be positive, got {a_bound}"
        )));
    }
    let c = if a_bound <= gamma1 {
        1.0
    } else {
        ((gamma2.ln() - gamma1.ln()) / (a_bound.ln() - gamma1.ln())).min(1.0)
    };
    Ok(((1.0 / c).ceil() as usize, c))
}

/// Indices satisfying the subproduct bound for `gamma2`, ascending.
///
/// Uses the backward recursion `S(r) = ln a_r + max(0, S(r+1) − ln γ₂)` for
/// the worst normalized suffix log-product; `r` is a time iff `S(r) ≤ 0`.
pub fn hyperbolic_times(a: &[f64], gamma2: f64) -> Result<Vec<usize>> {
    validate_norms(a)?;
    let lg = gamma2.ln();
    let mut times = Vec::new();
    let mut s_next: Option<f64> = None;
    for r in (0..a.len()).rev() {
        let s = a[r].ln() + s_next.map_or(0.0, |s| (s - lg).max(0.0));
        if s <= LOG_TOL {
            times.push(r);
        }
        s_next = Some(s);
    }
    times.reverse();
    Ok(times)
}

fn validate_norms(a: &[f64]) -> Result<()> {
    match a.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        Some(i) => Err(Error::InvalidNorm(i)),
        None => Ok(()),
    }
}

/// Pliss times with the norm bound taken as the largest input value (at least
/// `γ₂`, so the constants stay defined).
pub fn pliss_times(a: &[f64], gamma1: f64, gamma2: f64) -> Result<PlissReport> {
    validate_norms(a)?;
    let sup = a.iter().copied().fold(gamma2, f64::max);
    pliss_times_with_bound(a, gamma1, gamma2, sup)
}

/// Pliss times with an externally known bound `A ≥ sup a_i` (for instance
/// `sup ‖Df‖` over the whole map rather than over this orbit).
pub fn pliss_times_with_bound(
    a: &[f64],
    gamma1: f64,
    gamma2: f64,
    a_bound: f64,
) -> Result<PlissReport> {
    check_thresholds(gamma1, gamma2)?;
    if a.is_empty() {
        return Err(Error::InvalidParameter("empty norm sequence".into()));
    }
    let (n_min, c) = pliss_constants(gamma1, gamma2, a_bound)?;
    let times = hyperbolic_times(a, gamma2)?;
    let n = a.len() - 1;
    let log_prod: f64 = a.iter().map(|v| v.ln()).sum();
    let hypothesis_holds = log_prod <= n as f64 * gamma1.ln() + LOG_TOL;
    let density_holds =
        (hypothesis_holds && n >= n_min).then_some(times.len() as f64 >= c * n as f64);
    Ok(PlissReport {
        gamma1,
        gamma2,
        a_bound,
        n,
        times,
        c,
        n_min,
        hypothesis_holds,
        density_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(n²) check of every `(r, j)` pair with running products.
    fn brute_force(a: &[f64], g2: f64) -> Vec<usize> {
        (0..a.len())
            .filter(|&r| {
                let mut prod = 1.0;
                (r..a.len()).all(|j| {
                    prod *= a[j];
                    prod <= g2.powi((j - r) as i32)
                })
            })
            .collect()
    }

    #[test]
    fn constant_contraction_gives_every_index() {
        let r = pliss_times(&[0.5; 11], 0.6, 0.8).unwrap();
        assert_eq!(r.times, (0..=10).collect::<Vec<_>>());
        assert!(r.hypothesis_holds);
    }

    #[test]
    fn neutral_sequence_gives_no_hypothesis() {
        let r = pliss_times(&[1.0; 11], 0.6, 0.8).unwrap();
        assert!(!r.hypothesis_holds);
        assert_eq!(r.density_holds, None);
        // j = r is the single factor 1 ≤ 0.8⁰, every longer window fails
        assert_eq!(r.times, vec![10]);
        assert_eq!(brute_force(&[1.0; 11], 0.8), vec![10]);
    }

    #[test]
    fn alternating_matches_brute_force() {
        let a: Vec<f64> = (0..21).map(|i| if i % 2 == 0 { 2.0 } else { 0.125 }).collect();
        let r = pliss_times(&a, 0.6, 0.8).unwrap();
        assert_eq!(r.times, brute_force(&a, 0.8));
        assert!(!r.times.is_empty());
    }

    #[test]
    fn constants_examples() {
        let (n, c) = pliss_constants(0.5, 0.8, 2.0).unwrap();
        let expected = (0.8f64.ln() - 0.5f64.ln()) / (2f64.ln() - 0.5f64.ln());
        assert!((c - expected).abs() < 1e-15);
        assert!((c - 0.3390).abs() < 1e-4);
        assert_eq!(n, 3);

        let (_, c) = pliss_constants(0.5, 0.5001, 2.0).unwrap();
        assert!((c - 1.44e-4).abs() < 1e-6);

        let (n, c) = pliss_constants(0.5, 0.8, 0.6).unwrap();
        assert_eq!((n, c), (1, 1.0));
    }

    #[test]
    fn thresholds_are_validated() {
        for (g1, g2) in [(0.8, 0.5), (0.0, 0.5), (0.5, 1.0), (0.5, 0.5)] {
            assert!(matches!(
                pliss_times(&[0.5], g1, g2),
                Err(Error::InvalidThresholds { .. })
            ));
        }
        assert_eq!(pliss_times(&[0.5, -1.0], 0.5, 0.8), Err(Error::InvalidNorm(1)));
    }
}
