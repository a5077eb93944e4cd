use std::sync::Arc;

use serde::Serialize;

use super::bump::{BumpProfile, ChartBump, SUPPORT};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::linalg::{Mat2, Point, Rect, Vec2};
use crate::manifolds::{grow, local_seed, GrowOptions, ManifoldKind};
use crate::maps::{cocycle, PhaseSpace, SurfaceMap};
use crate::periodic::PeriodicOrbit;

const BISECTION_STEPS: usize = 200;
const AUTO_X1_START: f64 = 1e-3;
const AUTO_X1_HALVINGS: usize = 40;
/// Allowed deviation of the local manifolds from their tangent lines inside
/// the support box, as a fraction of `γ·x0`.
const DEVIATION_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForgeOptions {
    /// C¹ budget `ε`, in `(0, 1)`.
    pub epsilon: f64,
    /// Inner end of the unstable fundamental domain; `None` picks it.
    pub x1: Option<f64>,
    /// Grid side for the C¹ distance estimates.
    pub c1_samples: usize,
    pub exec: Exec,
}

impl ForgeOptions {
    pub fn new(epsilon: f64) -> Self {
        ForgeOptions {
            epsilon,
            x1: None,
            c1_samples: 512,
            exec: Exec::default(),
        }
    }
}

/// Chart quantities of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Geometry {
    /// Slope of `E^s` over `E^u` in the chart.
    pub gamma: f64,
    /// `(|σ|−1)/(|σ|+1)·ε/2`
    pub threshold: f64,
    /// Multipliers of the return map used in the chart; squared when the
    /// original ones are negative.
    pub lambda: f64,
    pub sigma: f64,
    pub squared: bool,
    pub x1: f64,
    pub x0: f64,
    pub a: f64,
    pub a_epsilon: f64,
    pub gamma_x0: f64,
    /// Half side of the support box `D` centred at `(x0, 0)`.
    pub half_side: f64,
    pub t0: f64,
    /// Largest measured distance of the local manifolds from their tangent
    /// lines inside `D`.
    pub manifold_deviation: f64,
}

/// `g = p + C⁻¹ Φ̃ (C (f(x) − p))` with `C` the orthonormal chart at `p`.
#[derive(Debug, Clone)]
pub struct ForgedMap {
    pub base: Arc<dyn SurfaceMap>,
    pub p: Point,
    pub chart: Mat2,
    pub bump: ChartBump,
}

impl ForgedMap {
    fn to_chart(&self, x: Point) -> Vec2 {
        self.chart.apply(self.base.phase_space().displacement(self.p, x))
    }

    fn offset_to_world(&self, d: Vec2) -> Vec2 {
        // C is orthogonal.
        self.chart.transpose().apply(d)
    }
}

impl SurfaceMap for ForgedMap {
    fn phase_space(&self) -> PhaseSpace {
        self.base.phase_space()
    }

    fn forward(&self, x: Point) -> Point {
        let y = self.base.forward(x);
        let c = self.to_chart(y);
        let lift = self.bump.lift(c);
        if lift == 0.0 {
            return y;
        }
        y + self.offset_to_world(Vec2::new(0.0, lift))
    }

    fn backward(&self, x: Point) -> Point {
        let c = self.to_chart(x);
        let pre = self.bump.invert(c);
        self.base.backward(x + self.offset_to_world(pre - c))
    }

    fn jacobian(&self, x: Point) -> Mat2 {
        let y = self.base.forward(x);
        let c = self.to_chart(y);
        self.chart.transpose() * self.bump.derivative(c) * self.chart * self.base.jacobian(x)
    }

    fn label(&self) -> String {
        format!("forged({})", self.base.label())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ForgeResult {
    #[serde(skip)]
    pub map: Arc<ForgedMap>,
    pub saddle: Point,
    pub period: usize,
    pub epsilon: f64,
    pub geometry: Geometry,
    pub tangency_point: Point,
    pub tangency_point_chart: Vec2,
    /// `max(|tangent × E^s|, |gap|/a)` at the tangency.
    pub tangency_residual: f64,
    /// `max_x [curve height − γx]` at `t0`; zero at an exact tangency.
    pub gap: f64,
    /// C¹ distance of the chart perturbation from the identity on `D`.
    pub c1_distance: f64,
    /// C¹ distance of `g` from `f` on a box around `f⁻¹(D)`.
    pub c1_distance_vs_f: f64,
    /// `|g^n(p) − p|`
    pub fixed_residual: f64,
    /// `max |Dg^n_p − Df^n_p|` entrywise.
    pub derivative_change: f64,
}

impl ForgeResult {
    /// The perturbed fundamental-domain curve `{Φ̃(x, 0) : x1 ≤ x ≤ σ x1}`
    /// in phase-space coordinates.
    pub fn perturbed_curve(&self, samples: usize) -> Vec<Point> {
        let g = &self.geometry;
        let m = &self.map;
        (0..samples.max(2))
            .map(|i| {
                let x = g.x1 + (g.sigma * g.x1 - g.x1) * i as f64 / (samples.max(2) - 1) as f64;
                let c = m.bump.apply(Vec2::new(x, 0.0));
                self.saddle + m.offset_to_world(c)
            })
            .collect()
    }
}

/// Max over the unit-free offset `u` of `φ(u) − γu`, and its maximiser.
fn ramp_maximum(phi: BumpProfile, gamma: f64) -> (f64, f64) {
    let h = |u: f64| phi.value(u) - gamma * u;
    let n = 4000;
    let mut best = (-SUPPORT, h(-SUPPORT));
    for i in 0..=n {
        let u = -SUPPORT + 2.0 * SUPPORT * i as f64 / n as f64;
        let v = h(u);
        if v > best.1 {
            best = (u, v);
        }
    }
    // Golden section on the neighbouring cells, then Newton on φ'(u) = γ.
    let step = 2.0 * SUPPORT / n as f64;
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let m1 = hi - r * (hi - lo);
        let m2 = lo + r * (hi - lo);
        if h(m1) >= h(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..5 {
        let d2 = phi.second_derivative(u);
        if d2 == 0.0 {
            break;
        }
        let next = u - (phi.derivative(u) - gamma) / d2;
        if h(next) >= h(u) {
            u = next;
        }
    }
    (u, h(u))
}

/// Creates a homoclinic tangency of the saddle `orbit` by a bump supported
/// in a box around the middle of an unstable fundamental domain.
pub fn forge_tangency(map: Arc<dyn SurfaceMap>, orbit: &PeriodicOrbit, opts: &ForgeOptions) -> Result<ForgeResult> {
    let eps = opts.epsilon;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    let (lambda, sigma) = orbit.real_multipliers().ok_or(Error::NotASaddle)?;
    let subspaces = orbit.subspaces.as_ref().ok_or(Error::NotASaddle)?;
    let product = (lambda * sigma).abs();
    // The area-preserving boundary |λσ| = 1 is accepted.
    if product > 1.0 + 1e-12 {
        return Err(Error::DissipationViolated { product });
    }

    let p = orbit.points[0];
    let es = subspaces[0].e.vector();
    let eu = subspaces[0].f.vector();
    let mut w = eu.perp();
    if es.dot(w) * es.dot(eu) < 0.0 {
        w = -w;
    }
    let chart = Mat2::from_rows([[eu.x, eu.y], [w.x, w.y]]);
    let es_chart = chart.apply(es);
    let gamma = (es_chart.y / es_chart.x).abs();
    let threshold = (sigma.abs() - 1.0) / (sigma.abs() + 1.0) * eps / 2.0;
    if gamma >= threshold {
        return Err(Error::ThresholdViolated { gamma, threshold });
    }
    let squared = lambda < 0.0 || sigma < 0.0;
    let (lam, sig) = if squared {
        (lambda * lambda, sigma * sigma)
    } else {
        (lambda, sigma)
    };

    let space = map.phase_space();
    let others: Vec<Vec2> = orbit.points[1..]
        .iter()
        .map(|q| chart.apply(space.displacement(p, *q)))
        .collect();
    let auto = opts.x1.is_none();
    let mut x1 = opts.x1.unwrap_or(AUTO_X1_START);
    if !(x1 > 0.0 && x1.is_finite()) {
        return Err(Error::InvalidParameter(format!("x1 must be positive, got {x1}")));
    }
    let mut geometry = None;
    for _ in 0..=AUTO_X1_HALVINGS {
        let x0 = (sig + 1.0) * x1 / 2.0;
        let a = (sig - 1.0) * x1 / 4.0;
        let half = (sig - 1.0) * x1 / 2.0;
        let overlap = others
            .iter()
            .any(|c| (c.x - x0).abs() <= 2.0 * half && c.y.abs() <= 2.0 * half);
        if overlap {
            if auto {
                x1 *= 0.5;
                continue;
            }
            return Err(Error::DomainOverlap);
        }
        let deviation = manifold_deviation(map.as_ref(), orbit, &chart, gamma, x1, sig, x0, half)?;
        if auto && deviation >= DEVIATION_FRACTION * gamma * x0 {
            x1 *= 0.5;
            continue;
        }
        geometry = Some(Geometry {
            gamma,
            threshold,
            lambda: lam,
            sigma: sig,
            squared,
            x1,
            x0,
            a,
            a_epsilon: a * eps,
            gamma_x0: gamma * x0,
            half_side: half,
            t0: f64::NAN,
            manifold_deviation: deviation,
        });
        break;
    }
    let mut geometry = geometry.ok_or(Error::DomainOverlap)?;
    if geometry.a_epsilon <= geometry.gamma_x0 {
        return Err(Error::ThresholdViolated { gamma, threshold });
    }

    // max_x h(t) = t·a·M − γ·x0 with M = max_u (φ(u) − γu); bisect on its sign.
    let phi = BumpProfile::phi(eps);
    let (u_star, m) = ramp_maximum(phi, gamma);
    let gap = |t: f64| t * geometry.a * m - geometry.gamma_x0;
    if gap(1.0) < 0.0 {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: gap(1.0),
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t0 = hi;
    geometry.t0 = t0;
    let scale = t0 * geometry.a;
    let bump = ChartBump::new(geometry.x0, scale, eps);
    let forged = Arc::new(ForgedMap {
        base: map.clone(),
        p,
        chart,
        bump,
    });

    let x_star = geometry.x0 + scale * u_star;
    let chart_point = Vec2::new(x_star, scale * phi.value(u_star));
    let gap_value = chart_point.y - gamma * x_star;
    let tangent = Vec2::new(1.0, phi.derivative(u_star)).normalized().unwrap_or(Vec2::new(1.0, 0.0));
    let line = Vec2::new(1.0, gamma).normalized().unwrap_or(Vec2::new(1.0, 0.0));
    let tangency_residual = tangent.cross(line).abs().max(gap_value.abs() / geometry.a);
    let tangency_point = p + chart.transpose().apply(chart_point);

    let half = geometry.half_side;
    let d_box = Rect::new(geometry.x0 - half, geometry.x0 + half, -half, half)?;
    let identity = IdentityChart;
    let c1_chart = c1_distance(&identity, &bump, d_box, opts.c1_samples, opts.exec);
    let region = preimage_box(map.as_ref(), p, &chart, &d_box)?;
    let c1_distance_vs_f = c1_distance(map.as_ref(), forged.as_ref(), region, opts.c1_samples, opts.exec);

    let n = orbit.period as i64;
    let before = cocycle(map.as_ref(), p, n)?;
    let after = cocycle(forged.as_ref(), p, n)?;
    let fixed_residual = space.dist(after.end_point(), p);
    let derivative_change = (after.product - before.product).max_abs_entry();

    Ok(ForgeResult {
        map: forged,
        saddle: p,
        period: orbit.period,
        epsilon: eps,
        geometry,
        tangency_point,
        tangency_point_chart: chart_point,
        tangency_residual,
        gap: gap_value,
        c1_distance: c1_chart,
        c1_distance_vs_f,
        fixed_residual,
        derivative_change,
    })
}

/// Bounding box of `f⁻¹` of the corners and edge midpoints of `D`, padded by
/// a tenth of its size.
fn preimage_box(map: &dyn SurfaceMap, p: Point, chart: &Mat2, d: &Rect) -> Result<Rect> {
    let inv = chart.transpose();
    let pts: Vec<Point> = [0.0, 0.5, 1.0]
        .iter()
        .flat_map(|u| [0.0, 0.5, 1.0].map(|v| (*u, v)))
        .map(|(u, v)| map.backward(p + inv.apply(d.at(u, v))))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for q in &pts {
        x0 = x0.min(q.x);
        x1 = x1.max(q.x);
        y0 = y0.min(q.y);
        y1 = y1.max(q.y);
    }
    let pad = 0.1 * (x1 - x0).max(y1 - y0);
    Rect::new(x0 - pad, x1 + pad, y0 - pad, y1 + pad)
}

/// Measured distance of the local unstable (stable) manifold from the chart
/// x-axis (the line `y = γx`) inside the support box.
#[allow(clippy::too_many_arguments)]
fn manifold_deviation(
    map: &dyn SurfaceMap,
    orbit: &PeriodicOrbit,
    chart: &Mat2,
    gamma: f64,
    x1: f64,
    sigma: f64,
    x0: f64,
    half: f64,
) -> Result<f64> {
    let space = map.phase_space();
    let p = orbit.points[0];
    let target = 4.0 * sigma * x1 * (1.0 + gamma);
    let mut dev: f64 = 0.0;
    for kind in [ManifoldKind::Unstable, ManifoldKind::Stable] {
        let seed = local_seed(map, orbit, kind, 0.1 * x1)?;
        let mut opts = GrowOptions::new(target);
        opts.h_max = half / 8.0;
        let curve = grow(map, &seed, &opts)?;
        for q in &curve.points {
            let c = chart.apply(space.displacement(p, *q));
            if (c.x - x0).abs() <= half && c.y.abs() <= half {
                let off = match kind {
                    ManifoldKind::Unstable => c.y.abs(),
                    ManifoldKind::Stable => (c.y - gamma * c.x).abs(),
                };
                dev = dev.max(off);
            }
        }
    }
    Ok(dev)
}

#[derive(Debug, Clone, Copy)]
struct IdentityChart;

impl SurfaceMap for IdentityChart {
    fn phase_space(&self) -> PhaseSpace {
        PhaseSpace::Plane {
            escape_radius: f64::INFINITY,
        }
    }

    fn forward(&self, p: Point) -> Point {
        p
    }

    fn backward(&self, p: Point) -> Point {
        p
    }

    fn jacobian(&self, _p: Point) -> Mat2 {
        Mat2::IDENTITY
    }

    fn label(&self) -> String {
        "identity".into()
    }
}

/// `max ‖f − g‖ + ‖Df − Dg‖` over a `samples × samples` grid of `region`.
pub fn c1_distance(f: &dyn SurfaceMap, g: &dyn SurfaceMap, region: Rect, samples: usize, exec: Exec) -> f64 {
    let n = samples.max(2);
    let space = f.phase_space();
    let values = map_indexed(exec, n * n, |k| {
        let (i, j) = (k % n, k / n);
        let x = region.at(i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64);
        let d0 = space.displacement(f.forward(x), g.forward(x)).norm();
        let d1 = (f.jacobian(x) - g.jacobian(x)).op_norm();
        d0 + d1
    });
    values.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::Linear;
    use crate::periodic::find_periodic;

    fn toy(gamma: f64) -> (Arc<dyn SurfaceMap>, PeriodicOrbit) {
        let map: Arc<dyn SurfaceMap> = Arc::new(Linear::toy_saddle(0.5, 2.0, gamma).unwrap());
        let o = find_periodic(map.as_ref(), Vec2::new(0.01, 0.01), 1).unwrap();
        (map, o)
    }

    fn opts(x1: Option<f64>) -> ForgeOptions {
        ForgeOptions {
            epsilon: 0.1,
            x1,
            c1_samples: 128,
            exec: Exec::Sequential,
        }
    }

    #[test]
    fn toy_geometry_and_closed_form_t0() {
        let (map, o) = toy(0.01);
        let r = forge_tangency(map, &o, &opts(Some(1e-3))).unwrap();
        let g = r.geometry;
        assert!((g.gamma - 0.01).abs() < 1e-12);
        assert!((g.threshold - 0.05 / 3.0).abs() < 1e-15);
        assert!((g.x0 - 0.0015).abs() < 1e-18 && (g.a - 0.00025).abs() < 1e-18);
        assert!((g.a_epsilon - 2.5e-5).abs() < 1e-18 && (g.gamma_x0 - 1.5e-5).abs() < 1e-15);
        // Maximiser of εS(s) − γ(1.5s − 2) on the left ramp.
        let (eps, gamma) = (0.1, g.gamma);
        let s = (1.0 + (1.0 - gamma / eps).sqrt()) / 2.0;
        let u = 1.5 * s - 2.0;
        let t0 = g.gamma_x0 / (g.a * (eps * s * s * (3.0 - 2.0 * s) - gamma * u));
        assert!((g.t0 - t0).abs() < 1e-12, "{} vs {}", g.t0, t0);
        assert!(g.t0 > 0.0 && g.t0 <= 1.0);
        assert!(r.tangency_residual < 1e-8);
        assert!(r.c1_distance <= 0.1 * (1.0 + 1e-3));
        assert!(r.fixed_residual == 0.0 && r.derivative_change == 0.0);
    }

    #[test]
    fn curve_touches_without_crossing() {
        let (map, o) = toy(0.01);
        let r = forge_tangency(map, &o, &opts(Some(1e-3))).unwrap();
        let g = r.geometry;
        for i in 0..=2000 {
            let x = g.x1 + (g.sigma - 1.0) * g.x1 * i as f64 / 2000.0;
            let c = r.map.bump.apply(Vec2::new(x, 0.0));
            assert!(c.y - g.gamma * x <= 1e-10);
        }
    }

    #[test]
    fn threshold_and_dissipation_errors() {
        let (map, o) = toy(0.02);
        assert!(matches!(
            forge_tangency(map, &o, &opts(Some(1e-3))),
            Err(Error::ThresholdViolated { .. })
        ));
        let map: Arc<dyn SurfaceMap> = Arc::new(Linear::toy_saddle(0.6, 2.0, 0.01).unwrap());
        let o = find_periodic(map.as_ref(), Vec2::new(0.01, 0.01), 1).unwrap();
        assert!(matches!(
            forge_tangency(map, &o, &opts(Some(1e-3))),
            Err(Error::DissipationViolated { .. })
        ));
    }

    #[test]
    fn tangency_point_is_homoclinic_for_the_forged_map() {
        let (map, o) = toy(0.01);
        let r = forge_tangency(map, &o, &opts(Some(1e-3))).unwrap();
        let g = r.map.as_ref();
        let (mut f, mut b) = (r.tangency_point, r.tangency_point);
        let (mut best_f, mut best_b) = (f64::INFINITY, f64::INFINITY);
        for _ in 0..40 {
            f = g.forward(f);
            b = g.backward(b);
            best_f = best_f.min(f.dist(r.saddle));
            best_b = best_b.min(b.dist(r.saddle));
        }
        assert!(best_f < 1e-9 && best_b < 1e-9, "{best_f} {best_b}");
    }

    #[test]
    fn c1_distance_examples() {
        let (map, _) = toy(0.01);
        let region = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(c1_distance(map.as_ref(), map.as_ref(), region, 16, Exec::Sequential), 0.0);
        #[derive(Debug)]
        struct Shifted(Arc<dyn SurfaceMap>);
        impl SurfaceMap for Shifted {
            fn phase_space(&self) -> PhaseSpace {
                self.0.phase_space()
            }
            fn forward(&self, p: Point) -> Point {
                self.0.forward(p) + Vec2::new(0.0, 0.25)
            }
            fn backward(&self, p: Point) -> Point {
                self.0.backward(p - Vec2::new(0.0, 0.25))
            }
            fn jacobian(&self, p: Point) -> Mat2 {
                self.0.jacobian(p)
            }
            fn label(&self) -> String {
                "shifted".into()
            }
        }
        let s = Shifted(map.clone());
        assert!((c1_distance(map.as_ref(), &s, region, 16, Exec::Sequential) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn forged_map_is_invertible() {
        let (map, o) = toy(0.01);
        let r = forge_tangency(map, &o, &opts(Some(1e-3))).unwrap();
        let g = r.map.as_ref();
        for i in 0..100 {
            let x = Vec2::new(1e-3 * (i as f64 / 50.0) - 1e-3, 1e-5 * (i % 7) as f64);
            let back = g.backward(g.forward(x));
            assert!(back.dist(x) < 1e-15, "{:e}", back.dist(x));
        }
    }

    /// `h ∘ A ∘ h⁻¹` with `h(x, y) = (x, y + κx²)`: the unstable manifold of
    /// the origin is the parabola `y = κx²`.
    #[derive(Debug)]
    struct Bent {
        a: Linear,
        kappa: f64,
    }

    impl SurfaceMap for Bent {
        fn phase_space(&self) -> PhaseSpace {
            self.a.phase_space()
        }
        fn forward(&self, p: Point) -> Point {
            let q = self.a.forward(Vec2::new(p.x, p.y - self.kappa * p.x * p.x));
            Vec2::new(q.x, q.y + self.kappa * q.x * q.x)
        }
        fn backward(&self, p: Point) -> Point {
            let q = self.a.backward(Vec2::new(p.x, p.y - self.kappa * p.x * p.x));
            Vec2::new(q.x, q.y + self.kappa * q.x * q.x)
        }
        fn label(&self) -> String {
            "bent".into()
        }
    }

    #[test]
    fn auto_x1_shrinks_until_manifolds_are_straight() {
        let map: Arc<dyn SurfaceMap> = Arc::new(Bent {
            a: Linear::toy_saddle(0.4, 2.0, 0.01).unwrap(),
            kappa: 1.0,
        });
        let o = find_periodic(map.as_ref(), Vec2::ZERO, 1).unwrap();
        let r = forge_tangency(map, &o, &opts(None)).unwrap();
        let g = r.geometry;
        assert!(g.x1 < 1e-4);
        assert!(g.manifold_deviation < 0.01 * g.gamma * g.x0);
        assert!(g.manifold_deviation > 0.0);
        assert!(r.tangency_residual < 1e-8);
    }
}
