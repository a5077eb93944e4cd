use serde::{Deserialize, Serialize};

use crate::linalg::{Mat2, Point, Vec2};
use crate::maps::{PhaseSpace, SurfaceMap};

pub const PLATEAU: f64 = 0.5;
pub const SUPPORT: f64 = 2.0;
const RAMP: f64 = SUPPORT - PLATEAU;

/// Even C¹ bump: `height` on `|t| ≤ 0.5`, a cubic smoothstep down to zero on
/// `0.5 ≤ |t| ≤ 2`, zero beyond. The peak slope equals `height`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BumpKind {
    Phi { epsilon: f64 },
    Psi,
}

impl BumpKind {
    pub fn profile(self) -> BumpProfile {
        match self {
            BumpKind::Phi { epsilon } => BumpProfile::phi(epsilon),
            BumpKind::Psi => BumpProfile::psi(),
        }
    }
}

/// `(value, derivative)` of the chosen bump at `t`.
pub fn bump(kind: BumpKind, t: f64) -> (f64, f64) {
    kind.profile().eval(t)
}

impl BumpProfile {
    pub fn phi(epsilon: f64) -> Self {
        BumpProfile { height: epsilon }
    }

    pub fn psi() -> Self {
        BumpProfile { height: 1.0 }
    }

    fn ramp_param(t: f64) -> Option<f64> {
        let a = t.abs();
        (a > PLATEAU && a < SUPPORT).then(|| (SUPPORT - a) / RAMP)
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        let a = t.abs();
        if a <= PLATEAU {
            return (self.height, 0.0);
        }
        match Self::ramp_param(t) {
            Some(s) => {
                let v = self.height * s * s * (3.0 - 2.0 * s);
                let d = -t.signum() * self.height * 6.0 * s * (1.0 - s) / RAMP;
                (v, d)
            }
            None => (0.0, 0.0),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    /// Second derivative inside the ramps, zero elsewhere.
    pub fn second_derivative(&self, t: f64) -> f64 {
        Self::ramp_param(t).map_or(0.0, |s| self.height * 6.0 * (1.0 - 2.0 * s) / (RAMP * RAMP))
    }
}

/// `(x, y) ↦ (x, y + s·φ((x−x0)/s)·ψ(y/s))` in a tangent chart, with `φ` of
/// height `epsilon` and `ψ` of height 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartBump {
    pub x0: f64,
    pub scale: f64,
    pub epsilon: f64,
}

impl ChartBump {
    pub fn new(x0: f64, scale: f64, epsilon: f64) -> Self {
        ChartBump { x0, scale, epsilon }
    }

    fn phi(&self) -> BumpProfile {
        BumpProfile::phi(self.epsilon)
    }

    /// Vertical displacement at `p`.
    pub fn lift(&self, p: Point) -> f64 {
        if self.scale <= 0.0 {
            return 0.0;
        }
        let u = (p.x - self.x0) / self.scale;
        let v = p.y / self.scale;
        self.scale * self.phi().value(u) * BumpProfile::psi().value(v)
    }

    pub fn apply(&self, p: Point) -> Point {
        Vec2::new(p.x, p.y + self.lift(p))
    }

    pub fn derivative(&self, p: Point) -> Mat2 {
        if self.scale <= 0.0 {
            return Mat2::IDENTITY;
        }
        let u = (p.x - self.x0) / self.scale;
        let v = p.y / self.scale;
        let (fv, fd) = self.phi().eval(u);
        let (gv, gd) = BumpProfile::psi().eval(v);
        Mat2::new(1.0, 0.0, fd * gv, 1.0 + fv * gd)
    }

    /// Inverse by safeguarded Newton on the monotone `y`-equation.
    pub fn invert(&self, q: Point) -> Point {
        let target = q.y;
        let (mut lo, mut hi) = (target - self.scale * self.epsilon, target);
        let mut y = target;
        for _ in 0..100 {
            let p = Vec2::new(q.x, y);
            let r = y + self.lift(p) - target;
            if r == 0.0 {
                break;
            }
            if r > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let slope = self.derivative(p).d;
            let mut next = y - r / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == y || hi - lo <= f64::EPSILON * target.abs().max(self.scale) {
                y = next;
                break;
            }
            y = next;
        }
        Vec2::new(q.x, y)
    }
}

impl SurfaceMap for ChartBump {
    fn phase_space(&self) -> PhaseSpace {
        PhaseSpace::Plane {
            escape_radius: f64::INFINITY,
        }
    }

    fn forward(&self, p: Point) -> Point {
        self.apply(p)
    }

    fn backward(&self, p: Point) -> Point {
        self.invert(p)
    }

    fn jacobian(&self, p: Point) -> Mat2 {
        self.derivative(p)
    }

    fn label(&self) -> String {
        format!("chart_bump(x0={}, a={}, eps={})", self.x0, self.scale, self.epsilon)
    }
}

/// The chart perturbation `Φ_a` centred at the origin.
pub fn phi_map(p: Point, a: f64, epsilon: f64) -> Point {
    ChartBump::new(0.0, a, epsilon).apply(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_examples() {
        let k = BumpKind::Phi { epsilon: 0.1 };
        assert_eq!(bump(k, 0.0), (0.1, 0.0));
        assert_eq!(bump(k, 3.0), (0.0, 0.0));
        let (v, d) = bump(k, 1.25);
        assert!((v - 0.05).abs() < 1e-15 && (d + 0.1).abs() < 1e-15);
        let (v, d) = bump(k, -1.25);
        assert!((v - 0.05).abs() < 1e-15 && (d - 0.1).abs() < 1e-15);
    }

    #[test]
    fn profile_bounds_on_a_fine_sample() {
        for prof in [BumpProfile::phi(0.1), BumpProfile::psi()] {
            for i in 0..=10_000 {
                let t = -3.0 + 6.0 * i as f64 / 10_000.0;
                let (v, d) = prof.eval(t);
                assert!(v >= 0.0 && v <= prof.height + 1e-12);
                assert!(d.abs() <= prof.height + 1e-12);
            }
        }
    }

    #[test]
    fn derivative_matches_differences() {
        let prof = BumpProfile::phi(0.3);
        for t in [-1.9, -1.1, -0.7, 0.6, 1.3, 1.8] {
            let h = 1e-6;
            let fd = (prof.value(t + h) - prof.value(t - h)) / (2.0 * h);
            assert!((fd - prof.derivative(t)).abs() < 1e-8);
            let fd2 = (prof.derivative(t + h) - prof.derivative(t - h)) / (2.0 * h);
            assert!((fd2 - prof.second_derivative(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn phi_map_examples() {
        let a = 0.25;
        assert_eq!(phi_map(Vec2::ZERO, a, 0.1), Vec2::new(0.0, a * 0.1));
        let q = Vec2::new(3.0 * a, 0.01);
        assert_eq!(phi_map(q, a, 0.1), q);
        assert_eq!(phi_map(Vec2::new(0.0, 3.0), 1.0, 0.1), Vec2::new(0.0, 3.0));
    }

    #[test]
    fn chart_bump_inverts() {
        let b = ChartBump::new(0.3, 0.2, 0.1);
        for i in 0..50 {
            let p = Vec2::new(-0.2 + 0.02 * i as f64, -0.5 + 0.021 * i as f64);
            let q = b.apply(p);
            assert!(b.invert(q).dist(p) < 1e-15);
        }
    }
}
