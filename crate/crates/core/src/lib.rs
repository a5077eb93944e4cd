//! Numerical laboratory for dominated splittings, hyperbolic times and
//! homoclinic tangencies of surface diffeomorphisms.

pub mod domination;
pub mod error;
pub mod exec;
pub mod forge;
pub mod linalg;
pub mod manifolds;
pub mod maps;
pub mod periodic;
pub mod pliss;

pub use error::{Error, Result};
pub use exec::Exec;
pub use linalg::{Cone, ConeFlavor, Direction, Mat2, Point, Splitting, Vec2};
pub use maps::{cocycle, CocycleSegment, MapSpec, PhaseSpace, SurfaceMap};
