//! Tangent-plane primitives: vectors, 2×2 matrices, projective directions,
//! splittings, cones and the angle between two lines.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cross products at or below this magnitude count as parallel.
pub const PARALLEL_TOL: f64 = 1e-12;
/// Cosines at or below this magnitude count as orthogonal for [`angle`].
const ORTHOGONAL_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

pub type Point = Vec2;

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_inf(self) -> f64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Counter-clockwise quarter turn.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Row-major 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Singular value decomposition data of a 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Svd {
    pub s_max: f64,
    pub s_min: f64,
    /// Right singular vector of the larger singular value.
    pub v_max: Vec2,
    /// Right singular vector of the smaller singular value.
    pub v_min: Vec2,
}

impl Svd {
    /// Relative gap `(s_max - s_min) / s_max`.
    pub fn relative_gap(&self) -> f64 {
        if self.s_max == 0.0 {
            0.0
        } else {
            (self.s_max - self.s_min) / self.s_max
        }
    }
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Self {
        Mat2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn from_columns(c0: Vec2, c1: Vec2) -> Self {
        Mat2::new(c0.x, c1.x, c0.y, c1.y)
    }

    pub fn diag(p: f64, q: f64) -> Self {
        Mat2::new(p, 0.0, 0.0, q)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    /// Inverse; non-finite entries when singular.
    pub fn inverse(&self) -> Mat2 {
        let det = self.det();
        Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det)
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    /// Operator (spectral) norm.
    pub fn op_norm(&self) -> f64 {
        self.svd().s_max
    }

    pub fn svd(&self) -> Svd {
        self.svd_with_det(self.det())
    }

    /// SVD using a determinant known more accurately than `ad - bc`, e.g. a
    /// product of per-step determinants along a cocycle. The right singular
    /// vectors come from the eigen-angle of `MᵀM`, which stays accurate even
    /// when the singular values differ by many orders of magnitude.
    pub fn svd_with_det(&self, det: f64) -> Svd {
        let p = self.a * self.a + self.c * self.c;
        let q = self.a * self.b + self.c * self.d;
        let r = self.b * self.b + self.d * self.d;
        let theta = 0.5 * (2.0 * q).atan2(p - r);
        let (s, c) = theta.sin_cos();
        let v_max = Vec2::new(c, s);
        let v_min = v_max.perp();
        let s_max = self.apply(v_max).norm();
        let s_min = if s_max > 0.0 {
            (det.abs() / s_max).min(s_max)
        } else {
            0.0
        };
        Svd {
            s_max,
            s_min,
            v_max,
            v_min,
        }
    }

    /// Eigenvalues ordered by modulus (smaller first).
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let tr = self.trace();
        let det = self.det();
        let half = 0.5 * tr;
        let disc = half * half - det;
        if disc >= 0.0 {
            let root = disc.sqrt();
            // Avoid cancellation: take the larger-magnitude root first.
            let big = if half >= 0.0 { half + root } else { half - root };
            let small = if big != 0.0 { det / big } else { 0.0 };
            let (lo, hi) = if small.abs() <= big.abs() {
                (small, big)
            } else {
                (big, small)
            };
            [Complex64::new(lo, 0.0), Complex64::new(hi, 0.0)]
        } else {
            let im = (-disc).sqrt();
            [Complex64::new(half, -im), Complex64::new(half, im)]
        }
    }

    /// Unit eigenvector for a real eigenvalue `mu`.
    pub fn eigenvector(&self, mu: f64) -> Vec2 {
        let v1 = Vec2::new(self.b, mu - self.a);
        let v2 = Vec2::new(mu - self.d, self.c);
        let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
        v.normalized().unwrap_or(Vec2::new(1.0, 0.0))
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        self.apply(v)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

/// A line through the origin of the tangent plane, stored as a unit vector
/// whose first nonzero component is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec2", into = "Vec2")]
pub struct Direction(Vec2);

impl Direction {
    pub fn new(v: Vec2) -> Result<Self> {
        let u = v.normalized().ok_or(Error::ZeroVector)?;
        let flip = u.x < 0.0 || (u.x == 0.0 && u.y < 0.0);
        Ok(Direction(if flip { -u } else { u }))
    }

    pub fn from_xy(x: f64, y: f64) -> Result<Self> {
        Direction::new(Vec2::new(x, y))
    }

    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Direction::new(Vec2::new(c, s)).expect("unit vector")
    }

    pub const X_AXIS: Direction = Direction(Vec2::new(1.0, 0.0));
    pub const Y_AXIS: Direction = Direction(Vec2::new(0.0, 1.0));

    pub fn vector(self) -> Vec2 {
        self.0
    }

    /// Image of the line under `m`.
    pub fn push(self, m: &Mat2) -> Result<Direction> {
        Direction::new(m.apply(self.0))
    }

    /// Unsigned sine of the angle to `other`; zero when equal.
    pub fn sin_to(self, other: Direction) -> f64 {
        self.0.cross(other.0).abs()
    }
}

impl TryFrom<Vec2> for Direction {
    type Error = Error;
    fn try_from(v: Vec2) -> Result<Self> {
        Direction::new(v)
    }
}

impl From<Direction> for Vec2 {
    fn from(d: Direction) -> Vec2 {
        d.0
    }
}

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Rect { x0, x1, y0, y1 })
    }

    pub fn unit() -> Self {
        Rect {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// Point at relative coordinates `(u, v) ∈ [0, 1]²`.
    pub fn at(&self, u: f64, v: f64) -> Vec2 {
        Vec2::new(self.x0 + u * self.width(), self.y0 + v * self.height())
    }
}

/// A transverse pair of lines `E ⊕ F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Splitting {
    pub e: Direction,
    pub f: Direction,
}

impl Splitting {
    pub fn new(e: Direction, f: Direction) -> Result<Self> {
        if e.vector().cross(f.vector()).abs() <= PARALLEL_TOL {
            return Err(Error::ParallelDirections);
        }
        Ok(Splitting { e, f })
    }

    pub fn axes() -> Self {
        Splitting {
            e: Direction::X_AXIS,
            f: Direction::Y_AXIS,
        }
    }

    /// Coefficients `(s, t)` with `v = s·e + t·f`.
    pub fn decompose(&self, v: Vec2) -> (f64, f64) {
        let e = self.e.vector();
        let f = self.f.vector();
        let det = e.cross(f);
        (v.cross(f) / det, e.cross(v) / det)
    }

    /// Matrix whose columns are the unit vectors of `e` and `f`.
    pub fn basis(&self) -> Mat2 {
        Mat2::from_columns(self.e.vector(), self.f.vector())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeFlavor {
    /// `‖v_E‖ ≤ a‖v_F‖`
    Cu,
    /// `‖v_F‖ ≤ a‖v_E‖`
    Cs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub splitting: Splitting,
    pub half_width: f64,
    pub flavor: ConeFlavor,
}

impl Cone {
    pub fn new(splitting: Splitting, half_width: f64, flavor: ConeFlavor) -> Result<Self> {
        if !(half_width > 0.0 && half_width <= 1.0) {
            return Err(Error::InvalidHalfWidth(half_width));
        }
        Ok(Cone {
            splitting,
            half_width,
            flavor,
        })
    }

    /// The two boundary rays, unit length along the cone axis.
    pub fn boundary_rays(&self) -> [Vec2; 2] {
        let e = self.splitting.e.vector();
        let f = self.splitting.f.vector();
        let a = self.half_width;
        match self.flavor {
            ConeFlavor::Cu => [f + e * a, f - e * a],
            ConeFlavor::Cs => [e + f * a, e - f * a],
        }
    }
}

/// `angle(E, F)`: the norm of `L: E → E⊥` with `F = graph(L)`, i.e. `|tan θ|`.
/// Orthogonal lines give `f64::INFINITY`.
pub fn angle(e: Direction, f: Direction) -> Result<f64> {
    let ev = e.vector();
    let fv = f.vector();
    let sin = ev.cross(fv);
    if sin.abs() <= PARALLEL_TOL {
        return Err(Error::ParallelDirections);
    }
    let cos = ev.dot(fv);
    if cos.abs() <= ORTHOGONAL_TOL {
        return Ok(f64::INFINITY);
    }
    Ok((sin / cos).abs())
}

/// `‖m·v‖` for the unit vector `v` spanning `d`.
pub fn restricted_norm(m: &Mat2, d: Direction) -> f64 {
    m.apply(d.vector()).norm()
}

pub fn cone_contains(c: &Cone, v: Vec2) -> Result<bool> {
    if v.x == 0.0 && v.y == 0.0 {
        return Err(Error::ZeroVector);
    }
    let (s, t) = c.splitting.decompose(v);
    Ok(match c.flavor {
        ConeFlavor::Cu => s.abs() <= c.half_width * t.abs(),
        ConeFlavor::Cs => t.abs() <= c.half_width * s.abs(),
    })
}

/// Image of one cone boundary ray, in coordinates of the image splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayImage {
    pub ray: Vec2,
    /// Component along the axis the cone is built around (F for cu, E for cs).
    pub axial: f64,
    /// Component along the complementary line.
    pub transverse: f64,
}

impl RayImage {
    pub fn ratio(&self) -> f64 {
        self.transverse.abs() / self.axial.abs()
    }
}

/// Images of both boundary rays of `c` under `m`, decomposed over `image`.
pub fn cone_ray_images(m: &Mat2, c: &Cone, image: &Splitting) -> Result<[RayImage; 2]> {
    let rays = c.boundary_rays();
    let img = rays.map(|ray| {
        let (s, t) = image.decompose(m.apply(ray));
        match c.flavor {
            ConeFlavor::Cu => RayImage {
                ray,
                axial: t,
                transverse: s,
            },
            ConeFlavor::Cs => RayImage {
                ray,
                axial: s,
                transverse: t,
            },
        }
    });
    // The axial coordinate is affine along the segment between the rays; if it
    // vanishes anywhere the image cone contains the complementary axis.
    if img[0].axial * img[1].axial <= 0.0 || !img[0].axial.is_finite() || !img[1].axial.is_finite()
    {
        return Err(Error::DegenerateImage);
    }
    Ok(img)
}

/// Smallest `a′` with `m·C ⊂ C_{a′}` over `image` (same flavor). The
/// coordinate ratio is a Möbius function of the ray parameter, so its maximum
/// over the cone is attained on one of the two boundary rays.
pub fn cone_image_halfwidth(m: &Mat2, c: &Cone, image: &Splitting) -> Result<f64> {
    let [r0, r1] = cone_ray_images(m, c, image)?;
    Ok(r0.ratio().max(r1.ratio()))
}
