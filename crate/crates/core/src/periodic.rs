//! Periodic orbits: Newton location, multipliers, classification, invariant
//! lines and the finite domination scan over saddles.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::linalg::{angle, Direction, Mat2, Point, Rect, Splitting, Vec2};
use crate::maps::{cocycle, PhaseSpace, SurfaceMap};

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_STEPS: usize = 100;
/// Multipliers within this distance of the unit circle are not hyperbolic.
pub const HYPERBOLICITY_TOL: f64 = 1e-8;
/// Orbits sharing a point up to this distance are the same orbit.
pub const DEDUP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Saddle,
    Sink,
    Source,
    Nonhyperbolic,
    Elliptic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// Orbit points, reduced mod 1 on the torus.
    pub points: Vec<Point>,
    pub period: usize,
    /// Monodromy eigenvalues ordered by modulus.
    pub multipliers: [Complex64; 2],
    /// `Df^period` at `points[0]`.
    pub monodromy: Mat2,
    /// Product of per-step Jacobian determinants.
    pub monodromy_det: f64,
    pub residual: f64,
    pub classification: Classification,
    /// `E^s ⊕ E^u` at each orbit point; present for saddles only.
    pub subspaces: Option<Vec<Splitting>>,
    pub angles: Option<Vec<f64>>,
}

impl PeriodicOrbit {
    pub fn is_saddle(&self) -> bool {
        self.classification == Classification::Saddle
    }

    /// `(λ, σ)` as reals; `None` for complex multipliers.
    pub fn real_multipliers(&self) -> Option<(f64, f64)> {
        let [l, s] = self.multipliers;
        (l.im == 0.0 && s.im == 0.0).then_some((l.re, s.re))
    }

    /// True when some point of `self` lies within `tol` of some point of `other`.
    pub fn shares_point(&self, other: &PeriodicOrbit, space: PhaseSpace, tol: f64) -> bool {
        self.points
            .iter()
            .any(|p| other.points.iter().any(|q| space.dist(*p, *q) < tol))
    }
}

/// Residual `f^n(x) − x`, shifted by the nearest integer vector on the torus.
fn periodic_residual(space: PhaseSpace, x: Point, end: Point) -> Vec2 {
    let d = end - x;
    match space {
        PhaseSpace::Plane { .. } => d,
        PhaseSpace::Torus => Vec2::new(d.x - d.x.round(), d.y - d.y.round()),
    }
}

fn has_unit_eigenvalue(m: &Mat2) -> bool {
    m.eigenvalues()
        .iter()
        .any(|mu| (*mu - Complex64::new(1.0, 0.0)).norm() < 1e-10)
}

/// Newton's method on `f^n(x) − x` from `seed`, followed by minimal-period
/// detection and [`classify_and_split`].
pub fn find_periodic(map: &dyn SurfaceMap, seed: Point, n: usize) -> Result<PeriodicOrbit> {
    if n == 0 {
        return Err(Error::InvalidParameter("period must be at least 1".into()));
    }
    let space = map.phase_space();
    let mut x = space.reduce(seed);
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..NEWTON_MAX_STEPS {
        let seg = cocycle(map, x, n as i64)?;
        let r = periodic_residual(space, x, seg.end_point());
        residual = r.norm();
        if residual < NEWTON_TOL {
            converged = true;
            break;
        }
        if has_unit_eigenvalue(&seg.product) {
            return Err(Error::SingularNewtonMatrix);
        }
        let mut step = (seg.product - Mat2::IDENTITY).inverse().apply(r);
        // Damp wild steps so far-off seeds do not jump out of the domain.
        let len = step.norm();
        if len > 0.5 {
            step = step * (0.5 / len);
        }
        x = space.reduce(x - step);
        if !x.is_finite() {
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: NEWTON_MAX_STEPS,
            residual,
        });
    }
    // Polish to roundoff; manifolds anchored here amplify any offset.
    for _ in 0..3 {
        let seg = cocycle(map, x, n as i64)?;
        let r = periodic_residual(space, x, seg.end_point());
        let y = space.reduce(x - (seg.product - Mat2::IDENTITY).inverse().apply(r));
        let ry = cocycle(map, y, n as i64).map(|s| periodic_residual(space, y, s.end_point()).norm());
        match ry {
            Ok(v) if v < r.norm() => x = y,
            _ => break,
        }
    }

    let pts: Vec<Point> = crate::maps::orbit(map, x, n as i64)?
        .into_iter()
        .take(n)
        .map(|p| space.reduce(p))
        .collect();
    let period = (1..=n)
        .find(|d| n % d == 0 && (*d == n || space.dist(pts[*d], pts[0]) < DEDUP_TOL))
        .unwrap_or(n);
    let mut points = pts[..period].to_vec();
    // Canonical start: lexicographically smallest point.
    let start = (0..period)
        .min_by(|&i, &j| {
            let (p, q) = (points[i], points[j]);
            p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
        })
        .unwrap_or(0);
    points.rotate_left(start);

    let seg = cocycle(map, points[0], period as i64)?;
    let orbit = PeriodicOrbit {
        residual: periodic_residual(space, points[0], seg.end_point()).norm(),
        points,
        period,
        multipliers: [Complex64::new(0.0, 0.0); 2],
        monodromy: seg.product,
        monodromy_det: seg.det,
        classification: Classification::Nonhyperbolic,
        subspaces: None,
        angles: None,
    };
    Ok(classify_and_split(map, orbit))
}

pub fn classify(multipliers: [Complex64; 2]) -> Classification {
    let tol = HYPERBOLICITY_TOL;
    let [l, s] = multipliers;
    if l.im != 0.0 || s.im != 0.0 {
        let r = l.norm();
        return if (r - 1.0).abs() < tol {
            Classification::Elliptic
        } else if r < 1.0 {
            Classification::Sink
        } else {
            Classification::Source
        };
    }
    let (ml, ms) = (l.re.abs(), s.re.abs());
    if (ml - 1.0).abs() < tol || (ms - 1.0).abs() < tol {
        Classification::Nonhyperbolic
    } else if ml < 1.0 && ms > 1.0 {
        Classification::Saddle
    } else if ms < 1.0 {
        Classification::Sink
    } else {
        Classification::Source
    }
}

/// Fills multipliers, classification and, for saddles, the invariant lines.
/// `E^u` is pushed forward and `E^s` backward around the orbit so both stay
/// well conditioned.
pub fn classify_and_split(map: &dyn SurfaceMap, mut orbit: PeriodicOrbit) -> PeriodicOrbit {
    let m = orbit.monodromy;
    let mut mult = m.eigenvalues();
    if mult[0].im == 0.0 && mult[1].im == 0.0 {
        // The smaller root is more accurate as det/bigger with the exact det.
        let big = mult[1].re;
        if big != 0.0 {
            mult[0] = Complex64::new(orbit.monodromy_det / big, 0.0);
        }
    }
    orbit.multipliers = mult;
    orbit.classification = classify(mult);
    orbit.subspaces = None;
    orbit.angles = None;
    if orbit.classification != Classification::Saddle {
        return orbit;
    }
    let n = orbit.period;
    let steps: Vec<Mat2> = orbit.points.iter().map(|p| map.jacobian(*p)).collect();
    let (lambda, sigma) = (mult[0].re, mult[1].re);

    let mut eu = Vec::with_capacity(n);
    let mut u = m.eigenvector(sigma);
    for step in steps.iter().take(n) {
        eu.push(u);
        u = step.apply(u).normalized().unwrap_or(u);
    }
    let mut es = vec![Vec2::ZERO; n];
    let mut s = m.eigenvector(lambda);
    es[0] = s;
    for i in (1..n).rev() {
        s = steps[i].inverse().apply(s).normalized().unwrap_or(s);
        es[i] = s;
    }
    // The backward sweep starts from E^s at points[0] viewed as points[n].
    let splits: Option<Vec<Splitting>> = (0..n)
        .map(|i| {
            let e = Direction::new(es[i]).ok()?;
            let f = Direction::new(eu[i]).ok()?;
            Splitting::new(e, f).ok()
        })
        .collect();
    if let Some(splits) = splits {
        orbit.angles = splits.iter().map(|sp| angle(sp.e, sp.f).ok()).collect();
        orbit.subspaces = Some(splits);
    }
    orbit
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub region: Rect,
    pub grid: (usize, usize),
    pub max_period: usize,
    pub exec: Exec,
}

impl ScanOptions {
    pub fn new(region: Rect, max_period: usize) -> Self {
        ScanOptions {
            region,
            grid: (64, 64),
            max_period,
            exec: Exec::default(),
        }
    }
}

/// Seeds [`find_periodic`] from the cell centres of a lattice over the region
/// for every period up to `max_period`. Distinct orbits are returned sorted by
/// period and first point.
pub fn scan_periodic(map: &dyn SurfaceMap, opts: &ScanOptions) -> Vec<PeriodicOrbit> {
    let (nx, ny) = opts.grid;
    let per_seed = opts.max_period;
    let found: Vec<Option<PeriodicOrbit>> = map_indexed(opts.exec, nx * ny * per_seed, |k| {
        let n = k % per_seed + 1;
        let cell = k / per_seed;
        let (i, j) = (cell % nx, cell / nx);
        let seed = opts
            .region
            .at((i as f64 + 0.5) / nx as f64, (j as f64 + 0.5) / ny as f64);
        find_periodic(map, seed, n).ok()
    });
    let space = map.phase_space();
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    for orbit in found.into_iter().flatten() {
        if !orbits.iter().any(|o| o.shares_point(&orbit, space, DEDUP_TOL)) {
            orbits.push(orbit);
        }
    }
    orbits.sort_by(|a, b| {
        a.period.cmp(&b.period).then_with(|| {
            let (p, q) = (a.points[0], b.points[0]);
            p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
        })
    });
    orbits
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitDominationScan {
    /// Smallest qualifying `m` for each base point of the orbit.
    pub per_point: Vec<Option<usize>>,
    /// Largest of the per-point values; absent if any point has none.
    pub m: Option<usize>,
}

/// For each saddle and base point `p`, the smallest `1 ≤ m ≤ m1` with
/// `‖Df^m|E^s_p‖·‖Df^{-m}|E^u_{f^m p}‖ < 1/2`.
pub fn domination_scan(
    map: &dyn SurfaceMap,
    orbits: &[PeriodicOrbit],
    m1: usize,
) -> Result<Vec<OrbitDominationScan>> {
    orbits
        .iter()
        .map(|orbit| {
            let subspaces = orbit.subspaces.as_ref().ok_or(Error::NotASaddle)?;
            let n = orbit.period;
            // Per-step ratio ‖J e‖/‖J u‖ along the invariant lines.
            let step_ratio: Vec<f64> = (0..n)
                .map(|i| {
                    let j = map.jacobian(orbit.points[i]);
                    let sp = subspaces[i];
                    j.apply(sp.e.vector()).norm() / j.apply(sp.f.vector()).norm()
                })
                .collect();
            let per_point: Vec<Option<usize>> = (0..n)
                .map(|i| {
                    let mut prod = 1.0;
                    (1..=m1).find(|m| {
                        prod *= step_ratio[(i + m - 1) % n];
                        prod < 0.5
                    })
                })
                .collect();
            let m = per_point
                .iter()
                .copied()
                .collect::<Option<Vec<usize>>>()
                .and_then(|v| v.into_iter().max());
            Ok(OrbitDominationScan { per_point, m })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{CatMap, Henon, Linear};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn henon_fixed_point() {
        let h = Henon::new(1.4, 0.3).unwrap();
        let o = find_periodic(&h, Vec2::new(0.6, 0.2), 1).unwrap();
        // x* = (b − 1 + √((1−b)² + 4a)) / 2a
        let x = (0.3 - 1.0 + (0.49f64 + 5.6).sqrt()) / 2.8;
        assert!(close(o.points[0].x, x, 1e-12));
        assert!(close(o.points[0].y, 0.3 * x, 1e-12));
        assert!(close(o.points[0].x, 0.6313545, 1e-7));
        assert_eq!(o.classification, Classification::Saddle);
        let (l, s) = o.real_multipliers().unwrap();
        let j = h.jacobian(o.points[0]);
        let root = (j.trace().powi(2) - 4.0 * j.det()).sqrt();
        assert!(close(l, (j.trace() + root) / 2.0, 1e-12));
        assert!(close(s, (j.trace() - root) / 2.0, 1e-12));
        assert!(close(l, 0.1559462, 5e-7) && close(s, -1.9237392, 5e-7));
        assert!(close(l * s, -0.3, 1e-12));
    }

    #[test]
    fn trivial_fixed_points() {
        let cat = CatMap::linear();
        let o = find_periodic(&cat, Vec2::new(0.01, 0.01), 1).unwrap();
        assert!(o.points[0].norm() < 1e-12);
        let (l, s) = o.real_multipliers().unwrap();
        assert!(close(l, (3.0 - 5f64.sqrt()) / 2.0, 1e-12));
        assert!(close(s, (3.0 + 5f64.sqrt()) / 2.0, 1e-12));

        let saddle = Linear::new(Mat2::diag(0.5, 2.0)).unwrap();
        let o = find_periodic(&saddle, Vec2::new(0.1, 0.1), 1).unwrap();
        assert!(o.points[0].norm() < 1e-12);
        assert!(o.is_saddle());
    }

    #[test]
    fn unit_multiplier_is_singular_or_nonhyperbolic() {
        let m = Linear::new(Mat2::diag(1.0, 2.0)).unwrap();
        assert_eq!(
            find_periodic(&m, Vec2::new(0.1, 0.1), 1),
            Err(Error::SingularNewtonMatrix)
        );
        let o = find_periodic(&m, Vec2::new(0.0, 0.0), 1).unwrap();
        assert_eq!(o.classification, Classification::Nonhyperbolic);
    }

    #[test]
    fn minimal_period_is_detected() {
        let cat = CatMap::linear();
        // (A⁴ − I)·seed rounds to 0, so Newton lands on the fixed point.
        let o = find_periodic(&cat, Vec2::new(0.001, 0.001), 4).unwrap();
        assert_eq!(o.period, 1);
        assert_eq!(o.points.len(), 1);
    }

    #[test]
    fn period_two_cat_orbit_is_invariant() {
        let cat = CatMap::linear();
        // (0.2, 0.4) ↦ (0.8, 0.6) ↦ (0.2, 0.4) mod 1
        let o = find_periodic(&cat, Vec2::new(0.21, 0.39), 2).unwrap();
        assert_eq!(o.period, 2);
        assert!(o.points[0].dist(Vec2::new(0.2, 0.4)) < 1e-10);
        let subs = o.subspaces.as_ref().unwrap();
        for i in 0..2 {
            let j = cat.jacobian(o.points[i]);
            let pushed = subs[i].e.push(&j).unwrap();
            assert!(pushed.sin_to(subs[(i + 1) % 2].e).abs() < 1e-8);
            assert_eq!(o.angles.as_ref().unwrap()[i], angle(subs[i].e, subs[i].f).unwrap());
        }
    }

    #[test]
    fn domination_scan_examples() {
        let cat = CatMap::linear();
        let o = find_periodic(&cat, Vec2::new(0.01, 0.01), 1).unwrap();
        let scan = domination_scan(&cat, &[o], 5).unwrap();
        assert_eq!(scan[0].m, Some(1));

        let m = Linear::new(Mat2::diag(0.9, 1.1)).unwrap();
        let o = find_periodic(&m, Vec2::new(0.2, 0.1), 1).unwrap();
        assert_eq!(domination_scan(&m, std::slice::from_ref(&o), 10).unwrap()[0].m, Some(4));
        assert_eq!(domination_scan(&m, &[o], 3).unwrap()[0].m, None);
    }

    #[test]
    fn scan_dedupes_and_is_schedule_independent() {
        let cat = CatMap::linear();
        let mut opts = ScanOptions::new(Rect::unit(), 2);
        opts.grid = (8, 8);
        let par = scan_periodic(&cat, &opts);
        opts.exec = Exec::Sequential;
        let seq = scan_periodic(&cat, &opts);
        assert_eq!(par, seq);
        // |det(A² − I)| = 5 fixed points of f², one of them fixed by f: two period-2 orbits.
        assert_eq!(par.iter().filter(|o| o.period == 1).count(), 1);
        assert_eq!(par.iter().filter(|o| o.period == 2).count(), 2);
    }
}
