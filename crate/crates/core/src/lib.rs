//! Finite-stage calculus of generalized functions on a bounded interval.
//!
//! The interval `[-beta, beta]` is partitioned into cells; every member of the
//! [`space::Space`] is a polynomial of degree at most `p` on each cell, with the
//! node-average convention for point values. On top of that sit
//!
//! * Delta and Sigma bases ([`basis`]): members that reproduce point values
//!   under the L2 pairing, and their duals,
//! * the canonical projection `f -> f~` ([`projection`]),
//! * the generalized derivative `D` (cellwise derivative plus jump deltas) and
//!   the cellwise-only derivative `D2` ([`calculus`]),
//! * embedding of distributions given as `d^k f` ([`distributions`]),
//! * refinement ladders that track quantities as the grid is refined
//!   ([`refinement`]).
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the documented
//! tolerances assume.

// NaN must fail range checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod calculus;
pub mod distributions;
mod error;
pub mod grid;
pub mod linalg;
pub mod projection;
pub mod quadrature;
pub mod refinement;
mod scalar;
pub mod space;
pub mod tol;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use basis::DeltaKind;
pub use calculus::{DerivKind, IdentityCheck};
pub use grid::PointClass;
pub use refinement::RefinePolicy;
pub use space::Side;
pub use projection::Integrability;

pub type Grid = grid::Grid<f64>;
pub type Space = space::Space<f64>;
pub type Ultrafunction = space::Ultrafunction<f64>;
pub type SplittedBasis = space::SplittedBasis<f64>;
pub type BasisPair = basis::BasisPair<f64>;
pub type FunctionHandle = projection::FunctionHandle<f64>;
pub type DerivOperator = calculus::DerivOperator<f64>;
pub type DistributionSpec = distributions::DistributionSpec<f64>;
pub type TestFunction = distributions::TestFunction<f64>;
pub type Stage = refinement::Stage<f64>;
pub type Ladder = refinement::Ladder<f64>;
pub type Observation = refinement::Observation<f64>;

pub type GridF32 = grid::Grid<f32>;
pub type SpaceF32 = space::Space<f32>;
pub type UltrafunctionF32 = space::Ultrafunction<f32>;
