use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::polyline::Polyline;
use crate::exec::{map_indexed, Exec};
use crate::linalg::{Point, Vec2};
use crate::maps::PhaseSpace;

pub const DEFAULT_TANGENCY_TOL: f64 = 1e-6;
/// Close approaches count as touching below this gap.
const TOUCH_TOL: f64 = 1e-8;
/// Segments closer to parallel than this `|sin|` are refined as possible
/// tangencies.
const NEAR_PARALLEL: f64 = 0.05;
/// Events this close to an anchor orbit point are the saddle itself.
const ANCHOR_EXCLUSION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Transversal,
    TangencyCandidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionEvent {
    /// Reduced into the unit square on the torus.
    pub point: Point,
    /// Arclength parameter on the first curve.
    pub s_u: f64,
    /// Arclength parameter on the second curve.
    pub s_s: f64,
    /// Geometric crossing angle in `[0, π/2]`.
    pub angle: f64,
    /// `|sin(angle)|`
    pub tangency_residual: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intersections {
    pub events: Vec<IntersectionEvent>,
    /// Collinear overlapping pieces were found; events are suppressed.
    pub overlap: bool,
}

#[derive(Clone, Copy)]
struct Seg {
    /// Index of the segment in its polyline.
    idx: usize,
    a: Point,
    b: Point,
}

/// Segments of a curve, shifted into the unit square on the torus (each
/// segment once per integer shift that brings one of its corners inside).
fn segments(pl: &Polyline) -> Vec<Seg> {
    let mut out = Vec::with_capacity(pl.len());
    for i in 0..pl.len().saturating_sub(1) {
        let (a, b) = (pl.points[i], pl.points[i + 1]);
        match pl.phase_space {
            PhaseSpace::Plane { .. } => out.push(Seg { idx: i, a, b }),
            PhaseSpace::Torus => {
                let mut shifts = [
                    (a.x.floor(), a.y.floor()),
                    (b.x.floor(), b.y.floor()),
                    (a.x.floor(), b.y.floor()),
                    (b.x.floor(), a.y.floor()),
                ];
                shifts.sort_by(|u, v| u.0.total_cmp(&v.0).then(u.1.total_cmp(&v.1)));
                let mut prev = None;
                for s in shifts {
                    if prev == Some(s) {
                        continue;
                    }
                    prev = Some(s);
                    let d = Vec2::new(s.0, s.1);
                    out.push(Seg { idx: i, a: a - d, b: b - d });
                }
            }
        }
    }
    out
}

struct SpatialHash {
    x0: f64,
    y0: f64,
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialHash {
    fn new(segs: &[Seg], cell: f64) -> Self {
        let x0 = segs.iter().map(|s| s.a.x.min(s.b.x)).fold(f64::INFINITY, f64::min);
        let y0 = segs.iter().map(|s| s.a.y.min(s.b.y)).fold(f64::INFINITY, f64::min);
        let mut h = SpatialHash {
            x0: if x0.is_finite() { x0 } else { 0.0 },
            y0: if y0.is_finite() { y0 } else { 0.0 },
            cell,
            buckets: HashMap::new(),
        };
        for (k, s) in segs.iter().enumerate() {
            for key in h.cells(s, 0.0) {
                h.buckets.entry(key).or_default().push(k);
            }
        }
        h
    }

    fn cells(&self, s: &Seg, pad: f64) -> Vec<(i64, i64)> {
        let f = |v: f64, o: f64| ((v - o) / self.cell).floor() as i64;
        let (ix0, ix1) = (f(s.a.x.min(s.b.x) - pad, self.x0), f(s.a.x.max(s.b.x) + pad, self.x0));
        let (iy0, iy1) = (f(s.a.y.min(s.b.y) - pad, self.y0), f(s.a.y.max(s.b.y) + pad, self.y0));
        let mut out = Vec::with_capacity(((ix1 - ix0 + 1) * (iy1 - iy0 + 1)) as usize);
        for i in ix0..=ix1 {
            for j in iy0..=iy1 {
                out.push((i, j));
            }
        }
        out
    }

    fn query(&self, s: &Seg, pad: f64) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .cells(s, pad)
            .iter()
            .filter_map(|k| self.buckets.get(k))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

enum PairResult {
    None,
    Overlap,
    Cross { t: f64, u: f64 },
}

fn cross_segments(p: &Seg, q: &Seg) -> PairResult {
    let r = p.b - p.a;
    let s = q.b - q.a;
    let qp = q.a - p.a;
    let denom = r.cross(s);
    let scale = r.norm() * s.norm();
    if denom.abs() <= 1e-14 * scale {
        // Parallel: overlapping only if collinear with a common stretch.
        if qp.cross(r).abs() > 1e-12 * r.norm() * (1.0 + qp.norm()) {
            return PairResult::None;
        }
        let rr = r.dot(r);
        let t0 = qp.dot(r) / rr;
        let t1 = (q.b - p.a).dot(r) / rr;
        let (lo, hi) = (t0.min(t1), t0.max(t1));
        return if hi.min(1.0) - lo.max(0.0) > 1e-12 {
            PairResult::Overlap
        } else {
            PairResult::None
        };
    }
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if (0.0..1.0).contains(&t) && (0.0..1.0).contains(&u) {
        PairResult::Cross { t, u }
    } else {
        PairResult::None
    }
}

fn tangent_at(pl: &Polyline, i: usize, t: f64) -> Vec2 {
    let v = pl.tangents[i] * (1.0 - t) + pl.tangents[i + 1] * t;
    v.normalized().unwrap_or(pl.tangents[i])
}

fn hermite(a: Point, b: Point, ta: Vec2, tb: Vec2, t: f64) -> (Point, Vec2) {
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let p = a * h00 + ta * h10 + b * h01 + tb * h11;
    let d = a * (6.0 * t2 - 6.0 * t) + ta * (3.0 * t2 - 4.0 * t + 1.0) + b * (-6.0 * t2 + 6.0 * t) + tb * (3.0 * t2 - 2.0 * t);
    (p, d)
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

fn make_event(point: Point, s_u: f64, s_s: f64, tu: Vec2, ts: Vec2, tol: f64) -> IntersectionEvent {
    let sin = tu.cross(ts).abs();
    let angle = sin.atan2(tu.dot(ts).abs());
    IntersectionEvent {
        point,
        s_u,
        s_s,
        angle,
        tangency_residual: sin,
        kind: if sin > tol {
            EventKind::Transversal
        } else {
            EventKind::TangencyCandidate
        },
    }
}

/// Closest touch of the Hermite arc over `p` with the line through `q`, if
/// the arc comes within [`TOUCH_TOL`] of it inside the segment.
fn close_approach(wu: &Polyline, ws: &Polyline, p: &Seg, q: &Seg, tol: f64) -> Option<IntersectionEvent> {
    let len = p.a.dist(p.b);
    let (ta, tb) = (wu.tangents[p.idx] * len, wu.tangents[p.idx + 1] * len);
    let d = (q.b - q.a).normalized()?;
    let gap = |t: f64| (hermite(p.a, p.b, ta, tb, t).0 - q.a).cross(d).abs();
    let t = golden_min(gap, 0.0, 1.0);
    if gap(t) > TOUCH_TOL {
        return None;
    }
    let (pt, dh) = hermite(p.a, p.b, ta, tb, t);
    let u = (pt - q.a).dot(d) / q.a.dist(q.b);
    if !(0.0..1.0).contains(&u) || !(0.0..1.0).contains(&t) {
        return None;
    }
    let s_u = wu.arclength[p.idx] + t * len;
    let s_s = ws.arclength[q.idx] + u * q.a.dist(q.b);
    Some(make_event(pt, s_u, s_s, dh.normalized()?, tangent_at(ws, q.idx, u), tol))
}

/// All crossings of `wu` with `ws` plus near-parallel touches, sorted by
/// parameters. Points of the anchor orbit are excluded.
pub fn intersections(wu: &Polyline, ws: &Polyline, tangency_tol: f64, exec: Exec) -> Intersections {
    let su = segments(wu);
    let ss = segments(ws);
    if su.is_empty() || ss.is_empty() {
        return Intersections {
            events: Vec::new(),
            overlap: false,
        };
    }
    let longest = su
        .iter()
        .chain(&ss)
        .map(|s| s.a.dist(s.b))
        .fold(0.0, f64::max)
        .max(1e-12);
    let hash = SpatialHash::new(&ss, longest);
    let torus = wu.phase_space.is_torus();
    let space = wu.phase_space;
    let anchors: Vec<Point> = [wu, ws]
        .iter()
        .filter_map(|pl| pl.anchor.as_ref())
        .flat_map(|a| a.orbit.iter().copied().chain([a.point]))
        .collect();

    let per_segment: Vec<(Vec<IntersectionEvent>, bool)> = map_indexed(exec, su.len(), |k| {
        let p = &su[k];
        let mut events = Vec::new();
        let mut overlap = false;
        for j in hash.query(p, longest) {
            let q = &ss[j];
            match cross_segments(p, q) {
                PairResult::Overlap => overlap = true,
                PairResult::Cross { t, u } => {
                    let pt = p.a + (p.b - p.a) * t;
                    let s_u = wu.arclength[p.idx] + t * p.a.dist(p.b);
                    let s_s = ws.arclength[q.idx] + u * q.a.dist(q.b);
                    events.push(make_event(pt, s_u, s_s, tangent_at(wu, p.idx, t), tangent_at(ws, q.idx, u), tangency_tol));
                }
                PairResult::None => {
                    let sin = (p.b - p.a).normalized().zip((q.b - q.a).normalized()).map(|(a, b)| a.cross(b).abs());
                    if sin.is_some_and(|s| s < NEAR_PARALLEL) {
                        events.extend(close_approach(wu, ws, p, q, tangency_tol));
                    }
                }
            }
        }
        (events, overlap)
    });

    let overlap = per_segment.iter().any(|(_, o)| *o);
    let mut events: Vec<IntersectionEvent> = per_segment
        .into_iter()
        .flat_map(|(e, _)| e)
        .filter(|e| !torus || (e.point.x >= 0.0 && e.point.x < 1.0 && e.point.y >= 0.0 && e.point.y < 1.0))
        .filter(|e| anchors.iter().all(|a| space.dist(*a, e.point) > ANCHOR_EXCLUSION))
        .collect();
    if overlap {
        events.clear();
    }
    events.sort_by(|a, b| a.s_u.total_cmp(&b.s_u).then(a.s_s.total_cmp(&b.s_s)));
    // A crossing at a shared vertex, or a touch seen from two segments, is one event.
    let mut deduped: Vec<IntersectionEvent> = Vec::with_capacity(events.len());
    for e in events {
        match deduped.last_mut() {
            Some(last) if last.point.dist(e.point) < 1e-9 && (last.s_u - e.s_u).abs() < 1e-6 => {
                if e.tangency_residual < last.tangency_residual && e.kind == EventKind::TangencyCandidate {
                    *last = e;
                }
            }
            _ => deduped.push(e),
        }
    }
    Intersections {
        events: deduped,
        overlap,
    }
}

#[cfg(test)]
mod tests {
    use super::super::polyline::ManifoldKind;
    use super::*;

    fn line(a: Point, b: Point, n: usize) -> Polyline {
        let pts = (0..=n).map(|i| a + (b - a) * (i as f64 / n as f64)).collect();
        Polyline::new(pts, ManifoldKind::Unstable, None, PhaseSpace::Plane { escape_radius: 1e4 })
    }

    #[test]
    fn straight_lines_cross_once() {
        let u = line(Vec2::new(-1.0, 0.0), Vec2::new(3.0, 0.0), 40);
        let s = line(Vec2::new(-1.0, -2.0), Vec2::new(3.0, 2.0), 33);
        let r = intersections(&u, &s, DEFAULT_TANGENCY_TOL, Exec::Sequential);
        assert!(!r.overlap);
        assert_eq!(r.events.len(), 1);
        let e = r.events[0];
        assert!(e.point.dist(Vec2::new(1.0, 0.0)) < 1e-14);
        assert!((e.angle - std::f64::consts::FRAC_PI_4).abs() < 1e-14);
        assert_eq!(e.kind, EventKind::Transversal);
    }

    #[test]
    fn identical_curves_overlap() {
        let u = line(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 10);
        let r = intersections(&u, &u.clone(), DEFAULT_TANGENCY_TOL, Exec::Sequential);
        assert!(r.overlap);
        assert!(r.events.is_empty());
    }

    #[test]
    fn parabola_touching_a_line_is_a_tangency_candidate() {
        let pts: Vec<Point> = (0..=200)
            .map(|i| {
                let x = -1.0 + i as f64 * 0.01 + 0.003;
                Vec2::new(x, x * x)
            })
            .collect();
        let mut u = Polyline::new(pts, ManifoldKind::Unstable, None, PhaseSpace::Plane { escape_radius: 1e4 });
        // exact tangents of y = x²
        u.tangents = u.points.iter().map(|p| Vec2::new(1.0, 2.0 * p.x).normalized().unwrap()).collect();
        let s = line(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), 7);
        let r = intersections(&u, &s, DEFAULT_TANGENCY_TOL, Exec::Sequential);
        assert_eq!(r.events.len(), 1);
        assert_eq!(r.events[0].kind, EventKind::TangencyCandidate);
        assert!(r.events[0].point.norm() < 1e-4);
    }

    #[test]
    fn torus_crossings_are_found_across_the_seam() {
        let torus = PhaseSpace::Torus;
        let mk = |a: Point, b: Point| {
            let pts = (0..=20).map(|i| a + (b - a) * (i as f64 / 20.0)).collect();
            Polyline::new(pts, ManifoldKind::Unstable, None, torus)
        };
        // On the lift these cross at (1.5, 0.25) ≡ (0.5, 0.25).
        let u = mk(Vec2::new(1.0, 0.25), Vec2::new(2.0, 0.25));
        let s = mk(Vec2::new(0.5, -0.5), Vec2::new(0.5, 0.5));
        let r = intersections(&u, &s, DEFAULT_TANGENCY_TOL, Exec::Sequential);
        assert_eq!(r.events.len(), 1);
        assert!(r.events[0].point.dist(Vec2::new(0.5, 0.25)) < 1e-14);
    }
}
