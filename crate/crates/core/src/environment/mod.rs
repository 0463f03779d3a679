//! The parameter triple `(b₁, c, m)`: representation, JSON ingestion and the
//! admissibility audit.

mod bv;
mod measure;
mod spec;

pub use bv::{BvFunction, DiffusionClock, PiecewiseDensity};
pub use measure::{JumpSampler, Kernel, LevyMeasureSpec};
pub use spec::{
    AdmissibilityReport, AtomEvent, Cell, ContinuousTerm, EnvironmentSpec, JumpMeasure, TimeAtom,
};
