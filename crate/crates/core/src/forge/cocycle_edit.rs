use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{angle, Direction, Mat2, Vec2};
use crate::periodic::PeriodicOrbit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EditMode {
    /// Make the period product the identity on `E^s`, `E^u`, then finish with
    /// `S` having eigenvalues `1 − β1` on `u0` and `1 + β1` on `v0`.
    NeutralizeAndTilt { u0: Vec2, v0: Vec2, beta1: f64 },
    /// Scale `E^s` by `1 − δ` and `E^u` by `1 + δ` at every step.
    Inflate { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleEdit {
    pub original: Vec<Mat2>,
    /// Left factors: `L_i = edits_i · original_i`.
    pub edits: Vec<Mat2>,
    pub edited: Vec<Mat2>,
    pub deviations: Vec<f64>,
    pub monodromy: Mat2,
    /// Target product for neutralize-and-tilt (`S`); `None` for inflation.
    pub target: Option<Mat2>,
    /// `(stable, unstable)` multipliers of the edited product.
    pub multipliers: (f64, f64),
    /// Angle between the eigenlines of the edited product.
    pub angle: f64,
}

fn product(ms: &[Mat2]) -> Mat2 {
    ms.iter().fold(Mat2::IDENTITY, |acc, m| *m * acc)
}

/// Real saddle multipliers and eigenlines of `m`, stable first.
fn saddle_split(m: &Mat2) -> Result<((f64, Vec2), (f64, Vec2))> {
    let [small, big] = m.eigenvalues();
    if small.im != 0.0 || big.im != 0.0 {
        return Err(Error::NotASaddle);
    }
    let (l, s) = (small.re, big.re);
    if !(l.abs() < 1.0 && s.abs() > 1.0) {
        return Err(Error::NotASaddle);
    }
    Ok(((l, m.eigenvector(l)), (s, m.eigenvector(s))))
}

/// Edits a periodic cocycle `A_0, …, A_{n−1}` (base point to base point) at
/// the matrix level, each step within `budget` in operator norm.
pub fn edit_cocycle(matrices: &[Mat2], mode: EditMode, budget: f64) -> Result<CocycleEdit> {
    let n = matrices.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty cocycle".into()));
    }
    let mono = product(matrices);
    let ((lambda, e0), (sigma, f0)) = saddle_split(&mono)?;

    // Unit eigenlines carried along the orbit; B_i = [e_i | f_i].
    let mut bases = Vec::with_capacity(n + 1);
    let (mut e, mut f) = (e0, f0);
    bases.push(Mat2::from_columns(e, f));
    for a in matrices {
        e = a.apply(e).normalized().ok_or(Error::ZeroVector)?;
        f = a.apply(f).normalized().ok_or(Error::ZeroVector)?;
        bases.push(Mat2::from_columns(e, f));
    }
    // Growth of the carried unit vectors, so the scalings telescope exactly.
    let mut ge = Vec::with_capacity(n);
    let mut gf = Vec::with_capacity(n);
    for (i, a) in matrices.iter().enumerate() {
        let b = bases[i];
        ge.push(a.apply(Vec2::new(b.a, b.c)).norm());
        gf.push(a.apply(Vec2::new(b.b, b.d)).norm());
    }

    let scale_at = |i: usize, p: f64, q: f64| {
        let b = bases[i + 1];
        b * Mat2::diag(p, q) * b.inverse()
    };
    let (edits, target) = match mode {
        EditMode::Inflate { delta } => {
            if !(delta.abs() < 1.0) {
                return Err(Error::InvalidParameter(format!("delta must lie in (-1, 1), got {delta}")));
            }
            ((0..n).map(|i| scale_at(i, 1.0 - delta, 1.0 + delta)).collect::<Vec<_>>(), None)
        }
        EditMode::NeutralizeAndTilt { u0, v0, beta1 } => {
            let u = Direction::new(u0)?;
            let v = Direction::new(v0)?;
            if u.sin_to(v).abs() < crate::linalg::PARALLEL_TOL {
                return Err(Error::ParallelDirections);
            }
            let s = Mat2::from_columns(u0, v0) * Mat2::diag(1.0 - beta1, 1.0 + beta1) * Mat2::from_columns(u0, v0).inverse();
            let mut edits: Vec<Mat2> = (0..n).map(|i| scale_at(i, 1.0 / ge[i], 1.0 / gf[i])).collect();
            // The carried basis returns to ±(e0, f0); undo the signs.
            let close = bases[0].inverse() * bases[n];
            let fix = Mat2::diag(close.a.signum(), close.d.signum());
            edits[n - 1] = s * bases[0] * fix * bases[0].inverse() * edits[n - 1];
            (edits, Some(s))
        }
    };
    let edited: Vec<Mat2> = edits.iter().zip(matrices).map(|(t, a)| *t * *a).collect();
    let deviations: Vec<f64> = edited.iter().zip(matrices).map(|(l, a)| (*l - *a).op_norm()).collect();
    for (step, d) in deviations.iter().enumerate() {
        if *d > budget {
            return Err(Error::BudgetExceeded {
                step,
                deviation: *d,
                budget,
            });
        }
    }
    let monodromy = product(&edited);
    let ((l, el), (s, fl)) = match mode {
        EditMode::Inflate { delta } => {
            let k = n as i32;
            ((lambda * (1.0 - delta).powi(k), e0), (sigma * (1.0 + delta).powi(k), f0))
        }
        EditMode::NeutralizeAndTilt { u0, v0, beta1 } => ((1.0 - beta1, u0), (1.0 + beta1, v0)),
    };
    let ang = angle(Direction::new(el)?, Direction::new(fl)?)?;
    Ok(CocycleEdit {
        original: matrices.to_vec(),
        edits,
        edited,
        deviations,
        monodromy,
        target,
        multipliers: (l, s),
        angle: ang,
    })
}

/// True iff `|λ_p| < (1−δ)^n` or `|σ_p| > (1+δ)^n`.
pub fn dichotomy_check(orbit: &PeriodicOrbit, delta: f64) -> Result<bool> {
    let (l, s) = orbit.real_multipliers().ok_or(Error::NotASaddle)?;
    let n = orbit.period as i32;
    Ok(l.abs() < (1.0 - delta).powi(n) || s.abs() > (1.0 + delta).powi(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{CatMap, Linear};
    use crate::periodic::find_periodic;

    fn rotated_saddle_steps() -> Vec<Mat2> {
        // Five non-commuting steps whose product has multipliers 0.9, 1.1.
        let r = Mat2::rotation(0.3);
        let d = Mat2::diag(0.9f64.powf(0.2), 1.1f64.powf(0.2));
        let mut steps: Vec<Mat2> = (0..4).map(|_| r * d * r.inverse()).collect();
        steps.push(r * d * r.inverse());
        steps
    }

    fn eig_pair(m: &Mat2) -> (f64, f64) {
        let [a, b] = m.eigenvalues();
        (a.re, b.re)
    }

    #[test]
    fn inflate_example() {
        let steps = rotated_saddle_steps();
        let e = edit_cocycle(&steps, EditMode::Inflate { delta: 0.01 }, 0.1).unwrap();
        let (l, s) = eig_pair(&e.monodromy);
        assert!((l - 0.9 * 0.99f64.powi(5)).abs() < 1e-12);
        assert!((s - 1.1 * 1.01f64.powi(5)).abs() < 1e-12);
        assert!((l - 0.855891).abs() < 1e-6 && (s - 1.156111).abs() < 1e-6);
        assert!(l * s < 1.0);
        assert!((e.multipliers.0 - 0.9 * 0.99f64.powi(5)).abs() < 1e-15);
    }

    #[test]
    fn inflate_by_zero_is_the_identity_edit() {
        let steps = rotated_saddle_steps();
        let e = edit_cocycle(&steps, EditMode::Inflate { delta: 0.0 }, 1e-12).unwrap();
        for (l, a) in e.edited.iter().zip(&steps) {
            assert!((*l - *a).max_abs_entry() < 1e-15);
        }
    }

    #[test]
    fn neutralize_and_tilt_on_cat_monodromy() {
        let u0 = Vec2::new(1.0, 0.0);
        let v0 = Vec2::new(1.0, 0.01);
        let mode = EditMode::NeutralizeAndTilt { u0, v0, beta1: 0.05 };
        let e = edit_cocycle(&[CatMap::MATRIX], mode, 10.0).unwrap();
        let s = e.target.unwrap();
        assert!((e.monodromy - s).max_abs_entry() < 1e-12);
        let (l, m) = eig_pair(&e.monodromy);
        assert!((l - 0.95).abs() < 1e-12 && (m - 1.05).abs() < 1e-12);
        assert!((e.angle - 0.01).abs() < 1e-12);
    }

    #[test]
    fn neutralize_handles_negative_multipliers_and_budget() {
        let steps = [Mat2::diag(-0.5, 2.0), Mat2::diag(1.0, -1.0), Mat2::diag(0.8, 1.0)];
        let mode = EditMode::NeutralizeAndTilt {
            u0: Vec2::new(1.0, 0.1),
            v0: Vec2::new(0.0, 1.0),
            beta1: 0.1,
        };
        let e = edit_cocycle(&steps, mode, 10.0).unwrap();
        assert!((e.monodromy - e.target.unwrap()).max_abs_entry() < 1e-12);
        match edit_cocycle(&steps, mode, 0.01) {
            Err(Error::BudgetExceeded { step, .. }) => assert_eq!(step, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dichotomy_examples() {
        let o = find_periodic(&Linear::new(Mat2::diag(0.5, 3.0)).unwrap(), Vec2::new(0.1, 0.1), 1).unwrap();
        assert!(dichotomy_check(&o, 0.0).unwrap());
        assert!(dichotomy_check(&o, 0.1).unwrap());
        let weak = find_periodic(&Linear::new(Mat2::diag(0.99, 1.01)).unwrap(), Vec2::new(0.1, 0.1), 1).unwrap();
        assert!(!dichotomy_check(&weak, 0.1).unwrap());
        assert!(0.5 < 0.9f64.powi(3));
    }
}
