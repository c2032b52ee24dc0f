//! Numeric tolerances shared across modules.
//!
//! Each constant is the `f64` value; the generic accessors clamp it from below
//! by a small multiple of machine epsilon so `f32` code stays meaningful.

use crate::Scalar;

/// Relative distance (to `beta`) within which a point is snapped onto a node.
pub const NODE_SNAP: f64 = 9.094947017729282e-13; // 2^-40

/// Target accuracy for adaptive quadrature of integrands against basis functions.
pub const QUADRATURE: f64 = 1e-12;

/// Jumps below this (times `1 + |value|`) count as continuity.
pub const CONTINUITY: f64 = 1e-12;

/// Contract tolerance for algebraic identities (IBP, FTC, duality).
pub const IDENTITY: f64 = 1e-10;

/// Orthonormality of the splitted basis.
pub const ORTHONORMAL: f64 = 1e-12;

pub fn node_snap<T: Scalar>() -> T {
    T::lit(NODE_SNAP).max(T::epsilon() * T::lit(4.0))
}

pub fn quadrature<T: Scalar>() -> T {
    T::lit(QUADRATURE).max(T::epsilon() * T::lit(64.0))
}

pub fn continuity<T: Scalar>() -> T {
    T::lit(CONTINUITY).max(T::epsilon() * T::lit(64.0))
}

pub fn identity<T: Scalar>() -> T {
    T::lit(IDENTITY).max(T::epsilon() * T::lit(1024.0))
}

pub fn orthonormal<T: Scalar>() -> T {
    T::lit(ORTHONORMAL).max(T::epsilon() * T::lit(256.0))
}
