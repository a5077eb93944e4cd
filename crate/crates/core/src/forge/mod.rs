//! Tangency-creating perturbation near a saddle, and matrix-level edits of
//! periodic cocycles.

mod bump;
mod cocycle_edit;
mod tangency;

pub use bump::{bump, phi_map, BumpKind, BumpProfile, ChartBump, PLATEAU, SUPPORT};
pub use cocycle_edit::{dichotomy_check, edit_cocycle, CocycleEdit, EditMode};
pub use tangency::{c1_distance, forge_tangency, ForgeOptions, ForgeResult, ForgedMap, Geometry};
