//! Surface diffeomorphisms, the built-in families and derivative cocycles.
//!
//! Torus maps are evaluated on a continuous lift to the plane; coordinates
//! are reduced mod 1 only by [`SurfaceMap::eval`] and by the reporting code,
//! so derivative products never see the wrap.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Point, Vec2};

/// Default cap on `|n|` for [`cocycle`].
pub const DEFAULT_MAX_COCYCLE_LEN: u64 = 1_000_000;
pub const DEFAULT_ESCAPE_RADIUS: f64 = 1e4;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseSpace {
    /// The plane; orbits farther than `escape_radius` (sup norm) have escaped.
    Plane { escape_radius: f64 },
    /// The unit torus `R²/Z²`.
    Torus,
}

impl PhaseSpace {
    pub fn is_torus(self) -> bool {
        matches!(self, PhaseSpace::Torus)
    }

    /// Representative in `[0, 1)²` on the torus; identity on the plane.
    pub fn reduce(self, p: Point) -> Point {
        match self {
            PhaseSpace::Plane { .. } => p,
            PhaseSpace::Torus => Vec2::new(wrap_unit(p.x), wrap_unit(p.y)),
        }
    }

    /// Shortest displacement from `a` to `b`.
    pub fn displacement(self, a: Point, b: Point) -> Vec2 {
        let d = b - a;
        match self {
            PhaseSpace::Plane { .. } => d,
            PhaseSpace::Torus => Vec2::new(d.x - d.x.round(), d.y - d.y.round()),
        }
    }

    pub fn dist(self, a: Point, b: Point) -> f64 {
        self.displacement(a, b).norm()
    }

    pub fn contains(self, p: Point) -> bool {
        match self {
            PhaseSpace::Plane { escape_radius } => p.is_finite() && p.norm_inf() <= escape_radius,
            PhaseSpace::Torus => p.is_finite(),
        }
    }
}

fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    // x = -1e-18 would otherwise round to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A C¹ diffeomorphism of the plane or the torus.
pub trait SurfaceMap: Send + Sync + fmt::Debug {
    fn phase_space(&self) -> PhaseSpace;

    /// Forward image on the lift.
    fn forward(&self, p: Point) -> Point;

    /// Inverse image on the lift.
    fn backward(&self, p: Point) -> Point;

    /// `Df_p`. Defaults to central differences.
    fn jacobian(&self, p: Point) -> Mat2 {
        fd_jacobian(|q| self.forward(q), p)
    }

    /// `D(f⁻¹)_p`.
    fn inverse_jacobian(&self, p: Point) -> Mat2 {
        self.jacobian(self.backward(p)).inverse()
    }

    /// Short human-readable name with parameters.
    fn label(&self) -> String;

    /// Image point, reduced mod 1 on the torus.
    fn eval(&self, p: Point) -> Point {
        self.phase_space().reduce(self.forward(p))
    }

    fn eval_inverse(&self, p: Point) -> Point {
        self.phase_space().reduce(self.backward(p))
    }
}

/// Central-difference Jacobian with step `1e-6·(1+|x|)` per coordinate.
/// Truncation error is O(h²).
pub fn fd_jacobian(f: impl Fn(Point) -> Point, p: Point) -> Mat2 {
    let hx = 1e-6 * (1.0 + p.x.abs());
    let hy = 1e-6 * (1.0 + p.y.abs());
    let dx = (f(p + Vec2::new(hx, 0.0)) - f(p - Vec2::new(hx, 0.0))) * (0.5 / hx);
    let dy = (f(p + Vec2::new(0.0, hy)) - f(p - Vec2::new(0.0, hy))) * (0.5 / hy);
    Mat2::from_columns(dx, dy)
}

/// Solves `f(x) = target` by Newton's method from `seed`.
pub fn newton_inverse(
    f: impl Fn(Point) -> Point,
    df: impl Fn(Point) -> Mat2,
    target: Point,
    seed: Point,
) -> Point {
    let mut x = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let r = f(x) - target;
        if r.norm() <= NEWTON_TOL * (1.0 + target.norm()) {
            break;
        }
        x = x - df(x).inverse().apply(r);
    }
    x
}

/// Hénon map `(x, y) ↦ (1 + y − a x², b x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Henon {
    pub a: f64,
    pub b: f64,
    pub escape_radius: f64,
}

impl Henon {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if b == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter("henon needs finite a and b != 0".into()));
        }
        Ok(Henon {
            a,
            b,
            escape_radius: DEFAULT_ESCAPE_RADIUS,
        })
    }

    /// The fixed point with positive x, when it exists.
    pub fn fixed_point(&self) -> Option<Point> {
        let disc = (1.0 - self.b).powi(2) + 4.0 * self.a;
        (disc >= 0.0 && self.a != 0.0).then(|| {
            let x = (self.b - 1.0 + disc.sqrt()) / (2.0 * self.a);
            Vec2::new(x, self.b * x)
        })
    }
}

impl SurfaceMap for Henon {
    fn phase_space(&self) -> PhaseSpace {
        PhaseSpace::Plane {
            escape_radius: self.escape_radius,
        }
    }

    fn forward(&self, p: Point) -> Point {
        Vec2::new(1.0 + p.y - self.a * p.x * p.x, self.b * p.x)
    }

    fn backward(&self, p: Point) -> Point {
        let x = p.y / self.b;
        Vec2::new(x, p.x - 1.0 + self.a * x * x)
    }

    fn jacobian(&self, p: Point) -> Mat2 {
        Mat2::new(-2.0 * self.a * p.x, 1.0, self.b, 0.0)
    }

    fn inverse_jacobian(&self, p: Point) -> Mat2 {
        let x = p.y / self.b;
        Mat2::new(0.0, 1.0 / self.b, 1.0, 2.0 * self.a * x / self.b)
    }

    fn label(&self) -> String {
        format!("henon(a={}, b={})", self.a, self.b)
    }
}

/// The cat map `[[2,1],[1,1]]` on the torus plus `ε·(sin 2πx, sin 2πy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatMap {
    pub epsilon: f64,
}

impl CatMap {
    pub const MATRIX: Mat2 = Mat2::new(2.0, 1.0, 1.0, 1.0);

    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.abs() < 0.05) {
            return Err(Error::InvalidParameter(format!(
                "cat map perturbation must satisfy |epsilon| < 0.05, got {epsilon}"
            )));
        }
        Ok(CatMap { epsilon })
    }

    pub fn linear() -> Self {
        CatMap { epsilon: 0.0 }
    }
}

impl SurfaceMap for CatMap {
    fn phase_space(&self) -> PhaseSpace {
        PhaseSpace::Torus
    }

    fn forward(&self, p: Point) -> Point {
        let lin = Self::MATRIX.apply(p);
        if self.epsilon == 0.0 {
            return lin;
        }
        lin + Vec2::new((TAU * p.x).sin(), (TAU * p.y).sin()) * self.epsilon
    }

    fn backward(&self, p: Point) -> Point {
        let inv = Self::MATRIX.inverse();
        let seed = inv.apply(p);
        if self.epsilon == 0.0 {
            return seed;
        }
        newton_inverse(|q| self.forward(q), |q| self.jacobian(q), p, seed)
    }

    fn jacobian(&self, p: Point) -> Mat2 {
        let k = TAU * self.epsilon;
        Self::MATRIX + Mat2::diag(k * (TAU * p.x).cos(), k * (TAU * p.y).cos())
    }

    fn label(&self) -> String {
        if self.epsilon == 0.0 {
            "cat".into()
        } else {
            format!("cat(epsilon={})", self.epsilon)
        }
    }
}

/// Chirikov standard map on the unit torus:
/// `y′ = y + (K/2π) sin 2πx`, `x′ = x + y′`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardMap {
    pub k: f64,
}

impl SurfaceMap for StandardMap {
    fn phase_space(&self) -> PhaseSpace {
        PhaseSpace::Torus
    }

    fn forward(&self, p: Point) -> Point {
        let y = p.y + self.k / TAU * (TAU * p.x).sin();
        Vec2::new(p.x + y, y)
    }

    fn backward(&self, p: Point) -> Point {
        let x = p.x - p.y;
        Vec2::new(x, p.y - self.k / TAU * (TAU * x).sin())
    }

    fn jacobian(&self, p: Point) -> Mat2 {
        let s = self.k * (TAU * p.x).cos();
        Mat2::new(1.0 + s, 1.0, s, 1.0)
    }

    fn label(&self) -> String {
        format!("standard(k={})", self.k)
    }
}

/// A linear map of the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub matrix: Mat2,
    inverse: Mat2,
    pub escape_radius: f64,
}

impl Linear {
    pub fn new(matrix: Mat2) -> Result<Self> {
        let det = matrix.det();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::InvalidParameter("linear map must be invertible".into()));
        }
        Ok(Linear {
            matrix,
            inverse: matrix.inverse(),
            escape_radius: DEFAULT_ESCAPE_RADIUS,
        })
    }

    /// Saddle with multiplier `sigma` on the x-axis and multiplier `lambda` on
    /// `E^s = span(1, shear)`, i.e. `E^s` is the graph of `v ↦ shear·v` over
    /// `E^u` and `angle(E^s, E^u) = |shear|`.
    pub fn toy_saddle(lambda: f64, sigma: f64, shear: f64) -> Result<Self> {
        if shear == 0.0 || !shear.is_finite() {
            return Err(Error::InvalidParameter("toy saddle needs a nonzero shear".into()));
        }
        // P diag(σ, λ) P⁻¹ with P = [[1, 1], [0, shear]]
        Linear::new(Mat2::new(sigma, (lambda - sigma) / shear, 0.0, lambda))
    }
}

impl SurfaceMap for Linear {
    fn phase_space(&self) -> PhaseSpace {
        PhaseSpace::Plane {
            escape_radius: self.escape_radius,
        }
    }

    fn forward(&self, p: Point) -> Point {
        self.matrix.apply(p)
    }

    fn backward(&self, p: Point) -> Point {
        self.inverse.apply(p)
    }

    fn jacobian(&self, _p: Point) -> Mat2 {
        self.matrix
    }

    fn inverse_jacobian(&self, _p: Point) -> Mat2 {
        self.inverse
    }

    fn label(&self) -> String {
        let m = self.matrix;
        format!("linear([[{}, {}], [{}, {}]])", m.a, m.b, m.c, m.d)
    }
}

/// Declarative map description used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Henon {
        a: f64,
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        escape_radius: Option<f64>,
    },
    Cat {
        #[serde(default)]
        epsilon: f64,
    },
    Standard { k: f64 },
    Linear {
        matrix: [[f64; 2]; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        escape_radius: Option<f64>,
    },
    ToySaddle {
        lambda: f64,
        sigma: f64,
        shear: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        escape_radius: Option<f64>,
    },
}

impl MapSpec {
    pub fn build(&self) -> Result<Arc<dyn SurfaceMap>> {
        let radius = |r: &Option<f64>| -> Result<f64> {
            match *r {
                None => Ok(DEFAULT_ESCAPE_RADIUS),
                Some(r) if r > 0.0 => Ok(r),
                Some(r) => Err(Error::InvalidParameter(format!("escape_radius must be positive, got {r}"))),
            }
        };
        Ok(match self {
            MapSpec::Henon { a, b, escape_radius } => {
                let mut h = Henon::new(*a, *b)?;
                h.escape_radius = radius(escape_radius)?;
                Arc::new(h)
            }
            MapSpec::Cat { epsilon } => Arc::new(CatMap::new(*epsilon)?),
            MapSpec::Standard { k } => Arc::new(StandardMap { k: *k }),
            MapSpec::Linear {
                matrix,
                escape_radius,
            } => {
                let mut l = Linear::new(Mat2::from_rows(*matrix))?;
                l.escape_radius = radius(escape_radius)?;
                Arc::new(l)
            }
            MapSpec::ToySaddle {
                lambda,
                sigma,
                shear,
                escape_radius,
            } => {
                let mut l = Linear::toy_saddle(*lambda, *sigma, *shear)?;
                l.escape_radius = radius(escape_radius)?;
                Arc::new(l)
            }
        })
    }
}

/// `Df^n` along an orbit segment, with the per-step factors.
#[derive(Debug, Clone, PartialEq)]
pub struct CocycleSegment {
    pub base_point: Point,
    pub length: i64,
    /// Ordered product of the per-step matrices (last step leftmost).
    pub product: Mat2,
    /// `Df` (or `Df⁻¹` for negative length) at each orbit point.
    pub steps: Vec<Mat2>,
    /// Orbit points on the lift, `|length| + 1` entries starting at the base.
    pub points: Vec<Point>,
    /// Product of per-step determinants; more accurate than `product.det()`.
    pub det: f64,
}

impl CocycleSegment {
    pub fn end_point(&self) -> Point {
        *self.points.last().expect("nonempty orbit")
    }

    /// Per-step restricted norms `‖A_i v_i‖` pushing the unit vector `v` along.
    /// Their product is the restricted norm of the whole product.
    pub fn pushed_norms(&self, v: Vec2) -> Vec<f64> {
        let mut u = v.normalized().expect("nonzero vector");
        self.steps
            .iter()
            .map(|m| {
                let w = m.apply(u);
                let n = w.norm();
                u = w * (1.0 / n);
                n
            })
            .collect()
    }
}

/// Orbit points `x, f(x), …` (or backwards for `n < 0`) on the lift.
pub fn orbit(map: &dyn SurfaceMap, x: Point, n: i64) -> Result<Vec<Point>> {
    let space = map.phase_space();
    let mut pts = Vec::with_capacity(n.unsigned_abs() as usize + 1);
    pts.push(x);
    let mut p = x;
    for k in 1..=n.unsigned_abs() {
        p = if n >= 0 { map.forward(p) } else { map.backward(p) };
        if !space.contains(p) {
            return Err(Error::OrbitEscape {
                start: x,
                step: if n >= 0 { k as i64 } else { -(k as i64) },
            });
        }
        pts.push(p);
    }
    Ok(pts)
}

pub fn cocycle(map: &dyn SurfaceMap, x: Point, n: i64) -> Result<CocycleSegment> {
    cocycle_with_limit(map, x, n, DEFAULT_MAX_COCYCLE_LEN)
}

pub fn cocycle_with_limit(
    map: &dyn SurfaceMap,
    x: Point,
    n: i64,
    max_len: u64,
) -> Result<CocycleSegment> {
    if n.unsigned_abs() > max_len {
        return Err(Error::CocycleTooLong {
            requested: n.unsigned_abs(),
            max: max_len,
        });
    }
    let points = orbit(map, x, n)?;
    let mut product = Mat2::IDENTITY;
    let mut det = 1.0;
    let mut steps = Vec::with_capacity(points.len().saturating_sub(1));
    for p in &points[..points.len() - 1] {
        let m = if n >= 0 {
            map.jacobian(*p)
        } else {
            map.inverse_jacobian(*p)
        };
        product = m * product;
        det *= m.det();
        steps.push(m);
    }
    Ok(CocycleSegment {
        base_point: x,
        length: n,
        product,
        steps,
        points,
        det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (*a - *b).max_abs_entry() <= tol
    }

    #[test]
    fn eval_examples() {
        let cat = CatMap::linear();
        assert_eq!(cat.eval(Vec2::new(0.5, 0.5)), Vec2::new(0.5, 0.0));
        let h = Henon::new(1.4, 0.3).unwrap();
        assert_eq!(h.eval(Vec2::new(0.0, 0.0)), Vec2::new(1.0, 0.0));
        let saddle = Linear::new(Mat2::diag(0.5, 2.0)).unwrap();
        assert_eq!(saddle.eval(Vec2::new(1.0, 1.0)), Vec2::new(0.5, 2.0));
    }

    #[test]
    fn jacobian_examples() {
        let cat = CatMap::linear();
        assert_eq!(cat.jacobian(Vec2::new(0.3, 0.9)), CatMap::MATRIX);
        let h = Henon::new(1.4, 0.3).unwrap();
        let fp = h.fixed_point().unwrap();
        let j = h.jacobian(fp);
        assert!(mat_close(&j, &Mat2::new(-1.7677926, 1.0, 0.3, 0.0), 1e-7));
        let saddle = Linear::new(Mat2::diag(0.5, 2.0)).unwrap();
        assert_eq!(saddle.jacobian(Vec2::new(5.0, -3.0)), Mat2::diag(0.5, 2.0));
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let maps: Vec<Arc<dyn SurfaceMap>> = vec![
            Arc::new(Henon::new(1.4, 0.3).unwrap()),
            Arc::new(CatMap::new(0.03).unwrap()),
            Arc::new(StandardMap { k: 0.9 }),
            Arc::new(Linear::toy_saddle(0.5, 2.0, 0.3).unwrap()),
        ];
        for m in &maps {
            for p in [Vec2::new(0.1, 0.2), Vec2::new(-0.4, 0.35), Vec2::new(0.77, 0.05)] {
                let fd = fd_jacobian(|q| m.forward(q), p);
                assert!(mat_close(&fd, &m.jacobian(p), 1e-7), "{}", m.label());
                let inv = m.inverse_jacobian(m.forward(p));
                assert!(mat_close(&(inv * m.jacobian(p)), &Mat2::IDENTITY, 1e-9));
            }
        }
    }

    #[test]
    fn inverses_roundtrip() {
        let maps: Vec<Arc<dyn SurfaceMap>> = vec![
            Arc::new(Henon::new(1.4, 0.3).unwrap()),
            Arc::new(CatMap::new(0.049).unwrap()),
            Arc::new(StandardMap { k: 1.5 }),
            Arc::new(Linear::toy_saddle(0.5, 2.0, 0.01).unwrap()),
        ];
        for m in &maps {
            for i in 0..50 {
                let p = Vec2::new((i as f64 * 0.137).sin(), (i as f64 * 0.291).cos() * 0.4);
                let q = m.backward(m.forward(p));
                assert!(q.dist(p) < 1e-9, "{} at {p}", m.label());
                assert!(m.jacobian(p).det() != 0.0);
            }
        }
    }

    #[test]
    fn perturbation_bound_is_enforced() {
        assert!(CatMap::new(0.05).is_err());
        assert!(CatMap::new(0.049).is_ok());
        assert!(Henon::new(1.4, 0.0).is_err());
        assert!(Linear::new(Mat2::diag(1.0, 0.0)).is_err());
    }

    #[test]
    fn toy_saddle_has_the_sheared_stable_line() {
        let m = Linear::toy_saddle(0.5, 2.0, 0.01).unwrap();
        let es = Vec2::new(1.0, 0.01);
        assert!((m.forward(es) - es * 0.5).norm() < 1e-15);
        assert_eq!(m.forward(Vec2::new(1.0, 0.0)), Vec2::new(2.0, 0.0));
    }

    #[test]
    fn cocycle_examples() {
        let cat = CatMap::linear();
        let seg = cocycle(&cat, Vec2::new(0.2, 0.7), 2).unwrap();
        assert_eq!(seg.product, Mat2::new(5.0, 3.0, 3.0, 2.0));
        let seg = cocycle(&cat, Vec2::new(0.2, 0.7), 0).unwrap();
        assert_eq!(seg.product, Mat2::IDENTITY);
        let saddle = Linear::new(Mat2::diag(0.5, 2.0)).unwrap();
        let seg = cocycle(&saddle, Vec2::new(0.1, 0.1), 3).unwrap();
        assert_eq!(seg.product, Mat2::diag(0.125, 8.0));
    }

    #[test]
    fn cocycle_limits_and_escape() {
        let cat = CatMap::linear();
        assert!(matches!(
            cocycle_with_limit(&cat, Vec2::ZERO, -11, 10),
            Err(Error::CocycleTooLong { requested: 11, max: 10 })
        ));
        let h = Henon::new(1.4, 0.3).unwrap();
        assert!(matches!(
            cocycle(&h, Vec2::new(3.0, 3.0), 20),
            Err(Error::OrbitEscape { .. })
        ));
    }

    #[test]
    fn negative_cocycle_inverts_positive() {
        let h = Henon::new(1.4, 0.3).unwrap();
        let x = orbit(&h, Vec2::new(0.3, 0.1), 4).unwrap()[4];
        let back = cocycle(&h, x, -4).unwrap();
        assert!(back.end_point().dist(Vec2::new(0.3, 0.1)) < 1e-12);
        let fwd = cocycle(&h, back.end_point(), 4).unwrap();
        assert!(mat_close(&(back.product * fwd.product), &Mat2::IDENTITY, 1e-8));
    }

    #[test]
    fn torus_reduction() {
        let t = PhaseSpace::Torus;
        assert_eq!(t.reduce(Vec2::new(-0.25, 1.5)), Vec2::new(0.75, 0.5));
        assert_eq!(t.reduce(Vec2::new(-1e-18, 0.0)).x, 0.0);
        assert!((t.dist(Vec2::new(0.99, 0.0), Vec2::new(0.01, 0.0)) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn map_spec_rejects_unknown_keys() {
        let ok: MapSpec = serde_json::from_str(r#"{"family":"henon","a":1.4,"b":0.3}"#).unwrap();
        assert!(ok.build().is_ok());
        let bad = serde_json::from_str::<MapSpec>(r#"{"family":"henon","a":1.4,"b":0.3,"c":1}"#);
        assert!(bad.is_err());
    }
}
