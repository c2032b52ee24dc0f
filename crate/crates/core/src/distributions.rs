//! Distributions presented as `d^k f` with `f` continuous, embedded as
//! `D^k f~`, and their pairings with test functions.
//!
//! A stage only has `f~`, not `f` itself, so the embedding differentiates the
//! projection. Against members `phi` with `D^i phi(±beta) = 0` for `i < k` the
//! transfer `<D^k f~, phi> = (-1)^k <f~, D^k phi>` is exact; against external
//! test functions it holds in the limit of refinement.

use crate::calculus::{build_d, IdentityCheck};
use crate::error::{invalid, Error, Result};
use crate::projection::{tilde, FunctionHandle};
use crate::space::{Space, Ultrafunction};
use crate::{tol, Scalar};

/// `T = d^k f`. The order `k` is taken as given.
#[derive(Debug, Clone)]
pub struct DistributionSpec<T> {
    pub k: usize,
    pub f: FunctionHandle<T>,
    pub label: String,
}

impl<T: Scalar> DistributionSpec<T> {
    pub fn new(k: usize, f: FunctionHandle<T>, label: impl Into<String>) -> Self {
        Self { k, f, label: label.into() }
    }

    /// Heaviside step as the second derivative of `max(x, 0)^2 / 2`.
    pub fn heaviside() -> Self {
        Self::new(
            2,
            FunctionHandle::new(|x: T| {
                let y = x.max(T::zero());
                y * y * T::lit(0.5)
            }),
            "heaviside",
        )
    }

    /// Dirac delta at 0 as the third derivative of `x|x| / 4`.
    pub fn dirac() -> Self {
        Self::new(3, FunctionHandle::new(|x: T| x * x.abs() * T::lit(0.25)), "dirac")
    }
}

/// A smooth test function with support inside `[lo, hi]`.
///
/// Without a declared support the function is only checked for vanishing at
/// `±beta`.
#[derive(Debug, Clone)]
pub struct TestFunction<T> {
    pub f: FunctionHandle<T>,
    pub support: Option<(T, T)>,
}

impl<T: Scalar> TestFunction<T> {
    pub fn new(f: FunctionHandle<T>) -> Self {
        Self { f, support: None }
    }

    pub fn with_support(f: FunctionHandle<T>, lo: T, hi: T) -> Self {
        Self { f, support: Some((lo, hi)) }
    }

    /// The standard bump `exp(-1 / (1 - ((x - c)/r)^2))` on `(c - r, c + r)`.
    pub fn bump(center: T, radius: T) -> Self {
        let f = FunctionHandle::new(move |x: T| {
            let t = (x - center) / radius;
            let s = T::one() - t * t;
            if s > T::zero() {
                (-T::one() / s).exp()
            } else {
                T::zero()
            }
        });
        Self::with_support(f, center - radius, center + radius)
    }

    fn check_inside(&self, beta: T) -> Result<()> {
        match self.support {
            Some((lo, hi)) if !(lo < hi) => invalid(format!("empty test-function support [{lo}, {hi}]")),
            Some((lo, hi)) if lo <= -beta || hi >= beta => {
                invalid(format!("test-function support [{lo}, {hi}] must lie strictly inside (-{beta}, {beta})"))
            }
            Some(_) => Ok(()),
            None => {
                let limit = tol::continuity::<T>();
                let (l, r) = (self.f.eval(-beta), self.f.eval(beta));
                if l.abs() > limit || r.abs() > limit {
                    return invalid(format!("test function does not vanish at ±{beta} (values {l}, {r})"));
                }
                Ok(())
            }
        }
    }
}

/// `D^k f~`.
pub fn embed<T: Scalar>(space: &Space<T>, spec: &DistributionSpec<T>) -> Result<Ultrafunction<T>> {
    let base = tilde(space, &spec.f)?;
    if spec.k == 0 {
        return Ok(base);
    }
    build_d(space).apply_n(&base, spec.k)
}

/// `<T, phi>` at this stage: `inner(T, phi~)`.
pub fn pair<T: Scalar>(space: &Space<T>, t: &Ultrafunction<T>, phi: &TestFunction<T>) -> Result<T> {
    if t.space() != space {
        return invalid("distribution belongs to a different space");
    }
    phi.check_inside(space.grid().beta())?;
    t.inner(&tilde(space, &phi.f)?)
}

/// Compares `inner(D^k f~, phi)` with `(-1)^k inner(f~, D^k phi)` for a member
/// `phi` whose first `k - 1` generalized derivatives vanish at `±beta`.
pub fn pair_exact_member<T: Scalar>(
    space: &Space<T>,
    spec: &DistributionSpec<T>,
    phi: &Ultrafunction<T>,
) -> Result<IdentityCheck<T>> {
    if phi.space() != space {
        return invalid("test member belongs to a different space");
    }
    let d = build_d(space);
    let beta = space.grid().beta();
    let mut dphi = phi.clone();
    for i in 0..spec.k {
        let limit = tol::continuity::<T>() * (T::one() + dphi.norm());
        let (l, r) = (dphi.eval(-beta), dphi.eval(beta));
        if l.abs() > limit || r.abs() > limit {
            return Err(Error::PreconditionViolation(format!(
                "derivative {i} of the test member is ({l}, {r}) at ±{beta}, not zero"
            )));
        }
        dphi = d.apply(&dphi)?;
    }
    let base = tilde(space, &spec.f)?;
    let lhs = d.apply_n(&base, spec.k)?.inner(phi)?;
    let sign = if spec.k.is_multiple_of(2) { T::one() } else { -T::one() };
    let rhs = sign * base.inner(&dphi)?;
    Ok(IdentityCheck::new(lhs, rhs, base.norm() * dphi.norm().max(phi.norm())))
}
