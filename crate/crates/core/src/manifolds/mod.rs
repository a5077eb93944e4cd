//! Stable and unstable manifolds of saddle orbits as polylines, their
//! intersections, and the length and distortion checks along them.

mod checks;
mod grow;
mod intersect;
mod polyline;

pub use checks::{distortion_check, stable_decay_check, DistortionReport, StableDecay};
pub use grow::{grow, local_seed, GrowOptions};
pub use intersect::{intersections, EventKind, IntersectionEvent, Intersections, DEFAULT_TANGENCY_TOL};
pub use polyline::{Anchor, ManifoldKind, Polyline};
