//! Differential chains on `R^n`: pointed and marked chains, the operators
//! acting on them, the integral pairing with differential forms, norm
//! certificates, geometric domain builders, complex contour tools and
//! asymptotic cycles of flows.

pub mod chain;
pub mod complex;
pub mod domains;
pub mod dynamics;
pub mod field;
pub mod form;
pub mod jet;
pub mod multivector;
pub mod norm;
pub mod numeric;

pub use chain::{ChainError, ChainTerm, DiffChain, Point};
pub use complex::{CJet, HolomorphicSpec, Pole};
pub use dynamics::{MeasureSpec, Orbit, TorusFlow};
pub use field::{FiniteDifference, ScalarField, SmoothMap, VectorField};
pub use form::{evaluate, FormSpec, Region};
pub use jet::Jet;
pub use multivector::{KVector, MultiIndex};
