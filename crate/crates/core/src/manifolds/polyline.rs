use serde::{Deserialize, Serialize};

use crate::linalg::{Point, Vec2};
use crate::maps::PhaseSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Stable,
    Unstable,
}

/// The saddle a manifold belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub point: Point,
    pub period: usize,
    /// Multiplier of `f^period` along the manifold's tangent line.
    pub multiplier: f64,
    /// Unit tangent of the manifold at `point`.
    pub direction: Vec2,
    /// All points of the orbit (reduced on the torus).
    pub orbit: Vec<Point>,
}

/// A piecewise-linear curve with cumulative arclength and oriented unit
/// tangents at the vertices. Torus curves live on the lift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Point>,
    pub arclength: Vec<f64>,
    pub tangents: Vec<Vec2>,
    pub kind: ManifoldKind,
    pub anchor: Option<Anchor>,
    pub phase_space: PhaseSpace,
}

impl Polyline {
    /// Builds the curve, dropping repeated consecutive vertices.
    pub fn new(points: Vec<Point>, kind: ManifoldKind, anchor: Option<Anchor>, phase_space: PhaseSpace) -> Self {
        let mut pts: Vec<Point> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last().is_none_or(|q: &Point| *q != p) {
                pts.push(p);
            }
        }
        let mut arclength = Vec::with_capacity(pts.len());
        let mut s = 0.0;
        for i in 0..pts.len() {
            if i > 0 {
                s += pts[i].dist(pts[i - 1]);
            }
            arclength.push(s);
        }
        let tangents = vertex_tangents(&pts);
        Polyline {
            points: pts,
            arclength,
            tangents,
            kind,
            anchor,
            phase_space,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.arclength.last().copied().unwrap_or(0.0)
    }

    /// Point at arclength `s` (clamped to the curve).
    pub fn point_at(&self, s: f64) -> Point {
        let (i, tau) = self.locate(s);
        if i + 1 >= self.points.len() {
            return self.points[i];
        }
        self.points[i] + (self.points[i + 1] - self.points[i]) * tau
    }

    /// Segment index and fraction for arclength `s`.
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.points.len();
        if n < 2 || s <= 0.0 {
            return (0, 0.0);
        }
        if s >= self.length() {
            return (n - 2, 1.0);
        }
        let i = self.arclength.partition_point(|a| *a <= s) - 1;
        let seg = self.arclength[i + 1] - self.arclength[i];
        (i, (s - self.arclength[i]) / seg)
    }

    /// Sub-curve between two arclengths.
    pub fn slice(&self, s0: f64, s1: f64) -> Polyline {
        let (i0, _) = self.locate(s0);
        let (i1, _) = self.locate(s1);
        let mut pts = vec![self.point_at(s0)];
        pts.extend(self.points[i0 + 1..=i1].iter().copied());
        pts.push(self.point_at(s1));
        Polyline::new(pts, self.kind, self.anchor.clone(), self.phase_space)
    }

    /// Vertices reduced into the unit square on the torus.
    pub fn reduced_points(&self) -> Vec<Point> {
        self.points.iter().map(|p| self.phase_space.reduce(*p)).collect()
    }
}

fn vertex_tangents(pts: &[Point]) -> Vec<Vec2> {
    let n = pts.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                return Vec2::new(1.0, 0.0);
            }
            let (a, b) = match i {
                0 => (pts[0], pts[1]),
                _ if i == n - 1 => (pts[n - 2], pts[n - 1]),
                _ => {
                    // Bisector of the two segment directions.
                    let u = (pts[i] - pts[i - 1]).normalized().unwrap_or(Vec2::ZERO);
                    let v = (pts[i + 1] - pts[i]).normalized().unwrap_or(Vec2::ZERO);
                    return (u + v).normalized().unwrap_or(v);
                }
            };
            (b - a).normalized().unwrap_or(Vec2::new(1.0, 0.0))
        })
        .collect()
}
