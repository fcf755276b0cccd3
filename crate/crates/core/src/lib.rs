//! Gradient-free extremum seeking on Riemannian manifolds and matrix Lie groups.
//!
//! The dither is applied along geodesics (or one-parameter subgroups) so that every
//! perturbed point stays on the state space.

pub mod averaging;
pub mod error;
pub mod es;
pub mod flow;
pub mod lie;
pub mod manifold;
pub mod space;

pub use error::{Error, Result};
pub use es::{CostOracle, CountingOracle, DitherSpec, EsField};
pub use flow::{IntegratorConfig, Method, Trajectory};
pub use lie::{GroupElement, GroupTag};
pub use manifold::{ChartPoint, ManifoldDescriptor};
pub use space::{MatrixGroup, Space};
