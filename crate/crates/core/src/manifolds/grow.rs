use serde::{Deserialize, Serialize};

use super::polyline::{Anchor, ManifoldKind, Polyline};
use crate::error::{Error, Result};
use crate::linalg::Point;
use crate::maps::SurfaceMap;
use crate::periodic::PeriodicOrbit;

/// Seeds are shrunk until the return map keeps them this close to the
/// eigenline.
const SEED_LINEARITY_TOL: f64 = 1e-8;
const SEED_POINTS: usize = 21;
const MAX_REFINE_PASSES: usize = 60;
const MAX_LEVELS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowOptions {
    /// Total arclength of the grown curve, split evenly between the branches.
    pub target_arclength: f64,
    /// Largest allowed distance between consecutive vertices.
    pub h_max: f64,
    /// Largest allowed turning angle at a vertex, radians.
    pub alpha_max: f64,
    pub max_points: usize,
}

impl GrowOptions {
    pub fn new(target_arclength: f64) -> Self {
        GrowOptions {
            target_arclength,
            h_max: 1e-3,
            alpha_max: 0.2,
            max_points: 1_000_000,
        }
    }
}

/// `f^{±period}` on the lift, or `None` once the orbit leaves the domain.
fn return_map(map: &dyn SurfaceMap, p: Point, period: usize, forward: bool, times: usize) -> Option<Point> {
    let space = map.phase_space();
    let mut q = p;
    for _ in 0..period * times {
        q = if forward { map.forward(q) } else { map.backward(q) };
        if !space.contains(q) {
            return None;
        }
    }
    Some(q)
}

/// A straight segment of half-length `r0` along the stable or unstable line
/// of `orbit.points[0]`, shrunk until the contracting return map sends its
/// endpoints within 1e-8 of the line.
pub fn local_seed(map: &dyn SurfaceMap, orbit: &PeriodicOrbit, which: ManifoldKind, r0: f64) -> Result<Polyline> {
    let subspaces = orbit.subspaces.as_ref().ok_or(Error::NotASaddle)?;
    let (lambda, sigma) = orbit.real_multipliers().ok_or(Error::NotASaddle)?;
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidParameter(format!("seed radius must be positive, got {r0}")));
    }
    let p = orbit.points[0];
    let (dir, multiplier) = match which {
        ManifoldKind::Unstable => (subspaces[0].f.vector(), sigma),
        ManifoldKind::Stable => (subspaces[0].e.vector(), lambda),
    };
    // The seed contracts under f^{-period} (unstable) or f^{period} (stable).
    let contract_forward = which == ManifoldKind::Stable;
    let base = return_map(map, p, orbit.period, contract_forward, 1).ok_or(Error::OrbitEscape {
        start: p,
        step: orbit.period as i64,
    })?;
    let mut r = r0;
    for _ in 0..80 {
        let ok = [-1.0, 1.0].iter().all(|s| {
            return_map(map, p + dir * (s * r), orbit.period, contract_forward, 1)
                .is_some_and(|q| (q - base).cross(dir).abs() < SEED_LINEARITY_TOL)
        });
        if ok {
            break;
        }
        r *= 0.5;
    }
    let pts = (0..SEED_POINTS)
        .map(|i| p + dir * (r * (2.0 * i as f64 / (SEED_POINTS - 1) as f64 - 1.0)))
        .collect();
    let anchor = Anchor {
        point: p,
        period: orbit.period,
        multiplier,
        direction: dir,
        orbit: orbit.points.clone(),
    };
    Ok(Polyline::new(pts, which, Some(anchor), map.phase_space()))
}

struct Level {
    params: Vec<f64>,
    images: Vec<Point>,
}

fn turning(a: Point, b: Point, c: Point) -> f64 {
    let u = b - a;
    let v = c - b;
    u.cross(v).atan2(u.dot(v)).abs()
}

/// Grows a seed from [`local_seed`] by iterating its outer fundamental
/// domain, inserting parameter midpoints wherever the image has gaps larger
/// than `h_max` or turns by more than `alpha_max`.
pub fn grow(map: &dyn SurfaceMap, seed: &Polyline, opts: &GrowOptions) -> Result<Polyline> {
    let anchor = seed
        .anchor
        .clone()
        .ok_or_else(|| Error::InvalidParameter("seed has no anchor orbit".into()))?;
    if !(opts.h_max > 0.0 && opts.alpha_max > 0.0 && opts.target_arclength >= 0.0) {
        return Err(Error::InvalidParameter("growth tolerances must be positive".into()));
    }
    let forward = seed.kind == ManifoldKind::Unstable;
    // A negative multiplier swaps the branches, so iterate its square.
    let times = if anchor.multiplier < 0.0 { 2 } else { 1 };
    let m = anchor.multiplier.abs().powi(times as i32);
    let mu = if forward { m } else { 1.0 / m };
    let r0 = 0.5 * seed.length();
    let p = anchor.point;
    let v = anchor.direction;
    let half = 0.5 * opts.target_arclength;
    let mut budget = opts.max_points;

    let mut branches = Vec::with_capacity(2);
    for s in [1.0, -1.0] {
        let on_seed = |t: f64| p + v * (s * t);
        let apply_k = |t: f64, k: usize| return_map(map, on_seed(t), anchor.period, forward, times * k);
        let mut branch: Vec<Point> = Vec::new();
        let mut length = 0.0;
        let mut last = p;
        let t_lo = r0 / mu;
        // Straight seed piece between p and the fundamental domain.
        let inner = (t_lo / opts.h_max).ceil() as usize;
        for i in 1..inner {
            let q = on_seed(t_lo * i as f64 / inner as f64);
            length += q.dist(last);
            branch.push(q);
            last = q;
        }
        let n0 = (((r0 - t_lo) / opts.h_max).ceil() as usize).clamp(2, 1000) + 1;
        let mut level = Level {
            params: (0..n0).map(|i| t_lo + (r0 - t_lo) * i as f64 / (n0 - 1) as f64).collect(),
            images: Vec::new(),
        };
        level.images = level.params.iter().map(|t| on_seed(*t)).collect();
        let mut done = false;
        for k in 0..MAX_LEVELS {
            let mut escaped = false;
            if k > 0 {
                let mut images = Vec::with_capacity(level.images.len());
                for q in &level.images {
                    match return_map(map, *q, anchor.period, forward, times) {
                        Some(img) => images.push(img),
                        None => {
                            escaped = true;
                            break;
                        }
                    }
                }
                level.params.truncate(images.len());
                level.images = images;
            }
            refine(&mut level, k, opts, &apply_k);
            if level.images.len() < 2 {
                break;
            }
            // Level k ≥ 1 starts where level k−1 ended.
            let skip = usize::from(k > 0);
            for (idx, q) in level.images.iter().enumerate().skip(skip) {
                let d = q.dist(last);
                if length + d >= half {
                    let want = half - length;
                    let end = if idx == 0 || d <= 0.0 {
                        last + (*q - last) * (if d > 0.0 { want / d } else { 0.0 })
                    } else {
                        // Bisect the parameter so the endpoint lies on the
                        // manifold rather than on the chord.
                        let (mut lo, mut hi) = (level.params[idx - 1], level.params[idx]);
                        let mut end = *q;
                        for _ in 0..60 {
                            let mid = 0.5 * (lo + hi);
                            match apply_k(mid, k) {
                                Some(x) if x.dist(last) < want => lo = mid,
                                Some(x) => {
                                    hi = mid;
                                    end = x;
                                }
                                None => hi = mid,
                            }
                        }
                        end
                    };
                    branch.push(end);
                    done = true;
                    break;
                }
                length += d;
                branch.push(*q);
                last = *q;
            }
            if branch.len() + 1 > budget {
                return Err(Error::PointBudgetExceeded(opts.max_points));
            }
            if done || escaped {
                break;
            }
        }
        budget -= branch.len().min(budget);
        branches.push(branch);
    }
    let mut pts: Vec<Point> = branches[1].iter().rev().copied().collect();
    pts.push(p);
    pts.extend(branches[0].iter().copied());
    Ok(Polyline::new(pts, seed.kind, Some(anchor), seed.phase_space))
}

/// Inserts parameter midpoints until spacing and turning are within bounds.
fn refine(level: &mut Level, k: usize, opts: &GrowOptions, apply_k: &dyn Fn(f64, usize) -> Option<Point>) {
    for _ in 0..MAX_REFINE_PASSES {
        let n = level.images.len();
        if n < 2 {
            return;
        }
        let mut split = vec![false; n - 1];
        for j in 0..n - 1 {
            if level.images[j].dist(level.images[j + 1]) > opts.h_max {
                split[j] = true;
            }
        }
        for j in 1..n - 1 {
            if turning(level.images[j - 1], level.images[j], level.images[j + 1]) > opts.alpha_max {
                split[j - 1] = true;
                split[j] = true;
            }
        }
        let mut params = Vec::with_capacity(n * 2);
        let mut images = Vec::with_capacity(n * 2);
        let mut inserted = false;
        for j in 0..n {
            params.push(level.params[j]);
            images.push(level.images[j]);
            if j + 1 < n && split[j] {
                let (a, b) = (level.params[j], level.params[j + 1]);
                let mid = 0.5 * (a + b);
                if mid > a && mid < b && (b - a) > 1e-15 * b.abs() {
                    if let Some(img) = apply_k(mid, k) {
                        params.push(mid);
                        images.push(img);
                        inserted = true;
                    }
                }
            }
        }
        level.params = params;
        level.images = images;
        if !inserted {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Mat2, Vec2};
    use crate::maps::{CatMap, Henon, Linear};
    use crate::periodic::find_periodic;

    #[test]
    fn linear_saddle_seed_and_growth_stay_on_the_axis() {
        let map = Linear::new(Mat2::diag(0.5, 2.0)).unwrap();
        let orbit = find_periodic(&map, Vec2::new(0.1, 0.1), 1).unwrap();
        let seed = local_seed(&map, &orbit, ManifoldKind::Unstable, 0.1).unwrap();
        assert!((seed.length() - 0.2).abs() < 1e-15);
        assert!(seed.points.iter().all(|p| p.x == 0.0));
        let wu = grow(&map, &seed, &GrowOptions::new(4.0)).unwrap();
        assert!(wu.points.iter().all(|p| p.x.abs() < 1e-12));
        assert!((wu.length() - 4.0).abs() < 1e-9);
        assert!(wu.arclength.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn cat_unstable_lift_is_the_eigenline() {
        let cat = CatMap::linear();
        let orbit = find_periodic(&cat, Vec2::new(0.01, 0.01), 1).unwrap();
        let seed = local_seed(&cat, &orbit, ManifoldKind::Unstable, 0.05).unwrap();
        let dir = Vec2::new(1.0, (5f64.sqrt() - 1.0) / 2.0).normalized().unwrap();
        assert!(seed.tangents[0].cross(dir).abs() < 1e-12);
        let wu = grow(&cat, &seed, &GrowOptions::new(10.0)).unwrap();
        let off = wu.points.iter().map(|p| p.cross(dir).abs()).fold(0.0, f64::max);
        assert!(off < 1e-9, "{off}");
        assert!((wu.length() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn henon_growth_is_adaptive() {
        let h = Henon::new(1.4, 0.3).unwrap();
        let orbit = find_periodic(&h, Vec2::new(0.6, 0.2), 1).unwrap();
        let seed = local_seed(&h, &orbit, ManifoldKind::Unstable, 0.1).unwrap();
        let opts = GrowOptions::new(5.0);
        let wu = grow(&h, &seed, &opts).unwrap();
        assert!(wu.arclength.windows(2).all(|w| w[1] > w[0]));
        assert!((wu.length() - 5.0).abs() < 1e-9);
        for w in wu.points.windows(2) {
            assert!(w[0].dist(w[1]) <= opts.h_max + 1e-6);
        }
    }
}
