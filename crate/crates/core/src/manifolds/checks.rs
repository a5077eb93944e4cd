use serde::{Deserialize, Serialize};

use super::grow::{grow, local_seed, GrowOptions};
use super::polyline::{ManifoldKind, Polyline};
use crate::error::{Error, Result};
use crate::linalg::{Point, Vec2};
use crate::maps::{orbit, SurfaceMap};
use crate::periodic::PeriodicOrbit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableDecay {
    /// `ℓ(f^k(W))` for `k = 0..=n`.
    pub lengths: Vec<f64>,
    /// Geometric rate `(ℓ_n/ℓ_0)^{1/n}`.
    pub rate: f64,
    /// Per-step stable bound `|λ_p|^{1/period}`.
    pub stable_rate: f64,
    /// Sampled relative variation of `‖Df|_T‖` along the segment.
    pub c: f64,
    /// `stable_rate·(1 + c)`
    pub bound: f64,
    pub within_bound: bool,
}

/// Iterates a stable segment of the given length through the anchor and
/// measures how fast it shrinks.
pub fn stable_decay_check(map: &dyn SurfaceMap, orbit_: &PeriodicOrbit, seed_length: f64, n: usize) -> Result<StableDecay> {
    let (lambda, _) = orbit_.real_multipliers().ok_or(Error::NotASaddle)?;
    // Forward iteration amplifies any offset from W^s, so the segment is
    // grown from a much smaller seed rather than taken straight.
    let seed = local_seed(map, orbit_, ManifoldKind::Stable, (1e-3 * seed_length).min(1e-8))?;
    let w = grow(map, &seed, &GrowOptions::new(seed_length))?;
    let stable_rate = lambda.abs().powf(1.0 / orbit_.period as f64);

    let base = map.jacobian(orbit_.points[0]).apply(w.anchor.as_ref().map_or(Vec2::new(1.0, 0.0), |a| a.direction)).norm();
    let c = w
        .points
        .iter()
        .zip(&w.tangents)
        .map(|(p, t)| map.jacobian(*p).apply(*t).norm() / base - 1.0)
        .fold(0.0, f64::max);

    let mut pts = w.points.clone();
    let mut lengths = vec![w.length()];
    let space = map.phase_space();
    for step in 1..=n {
        for p in pts.iter_mut() {
            *p = map.forward(*p);
            if !space.contains(*p) {
                return Err(Error::OrbitEscape {
                    start: *p,
                    step: step as i64,
                });
            }
        }
        let floor = 1e-2 * lengths[step - 1] * stable_rate;
        lengths.push(thinned_length(&pts, floor));
    }
    let rate = if n == 0 {
        1.0
    } else {
        (lengths[n] / lengths[0]).powf(1.0 / n as f64)
    };
    let bound = stable_rate * (1.0 + c);
    Ok(StableDecay {
        within_bound: rate <= bound * (1.0 + 1e-9),
        lengths,
        rate,
        stable_rate,
        c,
        bound,
    })
}

/// Chord length over vertices at least `min_chord` apart. Closely spaced
/// vertices of a strongly contracted curve carry amplified roundoff across
/// the curve.
fn thinned_length(pts: &[Point], min_chord: f64) -> f64 {
    let mut total = 0.0;
    let mut last = pts[0];
    for (i, p) in pts.iter().enumerate().skip(1) {
        let d = p.dist(last);
        if d >= min_chord || i + 1 == pts.len() {
            total += d;
            last = *p;
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub n: usize,
    /// Lipschitz constant of `log ‖Df⁻¹|_T‖` measured on `J, f⁻¹(J), …`.
    pub k0: f64,
    /// `ℓ(f^{-i}(J))` for `i = 0..=n`.
    pub lengths: Vec<f64>,
    /// `max_{x,y ∈ J} ‖Df^{-n}|_T(x)‖ / ‖Df^{-n}|_T(y)‖`
    pub lhs: f64,
    /// `exp(K0·Σ_{i<n} ℓ(f^{-i}(J)))`
    pub rhs: f64,
    pub ratio_holds: bool,
    /// Largest `‖Df^{-n}|_T(x)‖ / ((ℓ_n/ℓ_0)·rhs)` over the vertices.
    pub length_quotient: f64,
    pub length_bound_holds: bool,
    /// `‖Df^{-n}|_T(x)‖` at each vertex of `J`.
    pub backward_norms: Vec<f64>,
}

/// Bounded-distortion check along backward images of a curve `J` on an
/// unstable manifold.
///
/// Tangents are taken at `f^{-n}(J)` and pushed forward, where the unstable
/// direction is the stable one to propagate; lengths of the backward images
/// are integrals of the derivative along `J`, not sums over noisy vertices.
pub fn distortion_check(map: &dyn SurfaceMap, j: &Polyline, n: usize) -> Result<DistortionReport> {
    if j.len() < 2 {
        return Err(Error::InvalidParameter("distortion needs a curve with two vertices".into()));
    }
    let m = j.len();
    // orbits[v][i] = f^{-i}(J vertex v)
    let orbits: Vec<Vec<Point>> = j
        .points
        .iter()
        .map(|p| orbit(map, *p, -(n as i64)))
        .collect::<Result<_>>()?;

    // Tangent at the deepest level: anchor direction when close to the
    // saddle, else the chord direction of the image curve.
    let deep: Vec<Point> = orbits.iter().map(|o| o[n]).collect();
    let deep_line = Polyline::new(deep.clone(), j.kind, None, j.phase_space);
    let anchor = j.anchor.as_ref();
    // log_step[v][i] = log ‖Df⁻¹|_T‖ at f^{-i}(x_v), i < n
    let mut log_step = vec![vec![0.0; n]; m];
    for v in 0..m {
        let near_anchor = anchor.filter(|a| j.phase_space.dist(a.point, deep[v]) < 1e-2);
        let mut t = match near_anchor {
            Some(a) => a.direction,
            None if deep_line.len() == m => deep_line.tangents[v],
            None => j.tangents[v],
        };
        for i in (0..n).rev() {
            let w = map.jacobian(orbits[v][i + 1]).apply(t);
            let len = w.norm();
            log_step[v][i] = -len.ln();
            t = w * (1.0 / len);
        }
    }
    let log_total: Vec<f64> = log_step.iter().map(|s| s.iter().sum()).collect();
    let backward_norms: Vec<f64> = log_total.iter().map(|l| l.exp()).collect();

    let mut k0: f64 = 0.0;
    for i in 0..n {
        for a in 0..m {
            for b in a + 1..m {
                let d = orbits[a][i].dist(orbits[b][i]);
                if d > 0.0 {
                    k0 = k0.max((log_step[a][i] - log_step[b][i]).abs() / d);
                }
            }
        }
    }

    // ℓ(f^{-i}J) = ∫_J ‖Df^{-i}|_T‖ ds, trapezoid over the segments of J.
    let mut cum = vec![vec![0.0; m]; n + 1];
    for v in 0..m {
        for i in 0..n {
            cum[i + 1][v] = cum[i][v] + log_step[v][i];
        }
    }
    let lengths: Vec<f64> = (0..=n)
        .map(|i| {
            (0..m - 1)
                .map(|v| {
                    let ds = j.arclength[v + 1] - j.arclength[v];
                    0.5 * ds * (cum[i][v].exp() + cum[i][v + 1].exp())
                })
                .sum()
        })
        .collect();

    let (lo, hi) = log_total
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(*l), hi.max(*l)));
    let lhs = (hi - lo).exp();
    let rhs = (k0 * lengths[..n].iter().sum::<f64>()).exp();
    let quotient_bound = lengths[n] / lengths[0] * rhs;
    let length_quotient = backward_norms.iter().map(|b| b / quotient_bound).fold(0.0, f64::max);
    Ok(DistortionReport {
        n,
        k0,
        ratio_holds: lhs <= rhs * (1.0 + 1e-6),
        length_bound_holds: length_quotient <= 1.0 + 1e-6,
        lengths,
        lhs,
        rhs,
        length_quotient,
        backward_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat2;
    use crate::maps::{CatMap, Henon, Linear};
    use crate::periodic::find_periodic;

    #[test]
    fn stable_decay_on_linear_saddle_is_exact() {
        let map = Linear::new(Mat2::diag(0.5, 2.0)).unwrap();
        let o = find_periodic(&map, Vec2::new(0.1, 0.1), 1).unwrap();
        let d = stable_decay_check(&map, &o, 0.2, 10).unwrap();
        for (k, l) in d.lengths.iter().enumerate() {
            assert!((l - 0.2 * 0.5f64.powi(k as i32)).abs() < 1e-12);
        }
        assert!(d.within_bound);
    }

    #[test]
    fn stable_decay_on_cat_map() {
        let cat = CatMap::linear();
        let o = find_periodic(&cat, Vec2::new(0.01, 0.01), 1).unwrap();
        let d = stable_decay_check(&cat, &o, 0.1, 10).unwrap();
        assert!((d.rate - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-6);
    }

    #[test]
    fn distortion_on_linear_maps_is_an_equality() {
        let map = Linear::new(Mat2::diag(0.5, 2.0)).unwrap();
        let pts = (0..50).map(|i| Vec2::new(0.0, 0.5 + i as f64 * 0.01)).collect();
        let j = Polyline::new(pts, ManifoldKind::Unstable, None, map.phase_space());
        let r = distortion_check(&map, &j, 10).unwrap();
        assert_eq!(r.k0, 0.0);
        assert!((r.lhs - 1.0).abs() < 1e-12 && (r.rhs - 1.0).abs() < 1e-12);
        assert!((r.length_quotient - 1.0).abs() < 1e-10);
        assert!(r.ratio_holds && r.length_bound_holds);
    }

    #[test]
    fn distortion_on_henon_unstable_segment() {
        let h = Henon::new(1.4, 0.3).unwrap();
        let o = find_periodic(&h, Vec2::new(0.6, 0.2), 1).unwrap();
        let seed = local_seed(&h, &o, ManifoldKind::Unstable, 0.05).unwrap();
        let wu = grow(&h, &seed, &GrowOptions::new(2.0)).unwrap();
        let mid = 0.5 * wu.length();
        let j = wu.slice(mid + 0.2, mid + 0.3);
        let r = distortion_check(&h, &j, 10).unwrap();
        assert!(r.k0 > 0.0);
        assert!(r.ratio_holds, "{} > {}", r.lhs, r.rhs);
        assert!(r.length_bound_holds, "{}", r.length_quotient);
    }
}
