//! The canonical extension `f -> f~`: orthogonal L2 projection onto a space.
//!
//! Because the space splits into mutually orthogonal cell spaces, the
//! projection is computed cell by cell: `c_{j,k} = integral of f * e_{j,k}`
//! over cell `j`. Consequently `f~` on a cell depends only on `f` restricted to
//! that cell. For `C^1` functions this is the finite-stage version of
//! `f~ = f` locally; here it holds exactly only when `f` is a polynomial of
//! degree `<= p` on the cell, and otherwise the error decays like
//! `h^(p+1)` under refinement.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::BasisPair;
use crate::error::{invalid, Error, Result};
use crate::quadrature::Adaptive;
use crate::space::{Space, Ultrafunction};
use crate::{tol, Scalar};

/// Integrability information attached to a [`FunctionHandle`].
#[derive(Debug, Clone, PartialEq)]
pub enum Integrability<T> {
    Bounded,
    /// Integrable with finitely many singular points; they are never evaluated.
    Singular(Vec<T>),
}

/// A real function on `[-beta, beta]` given by a callback.
#[derive(Clone)]
pub struct FunctionHandle<T> {
    f: Arc<dyn Fn(T) -> T + Send + Sync>,
    integrability: Integrability<T>,
}

impl<T: fmt::Debug> fmt::Debug for FunctionHandle<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionHandle").field("integrability", &self.integrability).finish_non_exhaustive()
    }
}

impl<T: Scalar> FunctionHandle<T> {
    pub fn new(f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), integrability: Integrability::Bounded }
    }

    pub fn singular(f: impl Fn(T) -> T + Send + Sync + 'static, points: Vec<T>) -> Self {
        let integrability = if points.is_empty() { Integrability::Bounded } else { Integrability::Singular(points) };
        Self { f: Arc::new(f), integrability }
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        (self.f)(x)
    }

    pub fn integrability(&self) -> &Integrability<T> {
        &self.integrability
    }

    pub fn singular_points(&self) -> &[T] {
        match &self.integrability {
            Integrability::Bounded => &[],
            Integrability::Singular(p) => p,
        }
    }

    fn merged_singular(&self, other: &Self) -> Vec<T> {
        let mut pts = self.singular_points().to_vec();
        pts.extend_from_slice(other.singular_points());
        pts
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Self {
        let (f, g) = (self.f.clone(), other.f.clone());
        Self::singular(move |x| a * f(x) + b * g(x), self.merged_singular(other))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.lin_comb(T::one(), other, -T::one())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (f, g) = (self.f.clone(), other.f.clone());
        Self::singular(move |x| f(x) * g(x), self.merged_singular(other))
    }

    /// `f` on the open interval `(lo, hi)`, zero elsewhere.
    pub fn restricted(&self, lo: T, hi: T) -> Self {
        let f = self.f.clone();
        Self {
            f: Arc::new(move |x| if x > lo && x < hi { f(x) } else { T::zero() }),
            integrability: self.integrability.clone(),
        }
    }
}

fn rule_points(space_local_dim: usize) -> usize {
    space_local_dim + 15
}

/// Integrals over cell `j` of `f * g_i` for the `n` functions written by `fill`.
fn cell_integrals<T: Scalar>(
    space: &Space<T>,
    f: &FunctionHandle<T>,
    cell: usize,
    n: usize,
    fill: impl Fn(T, &mut [T]),
) -> Result<Vec<T>> {
    let (a, b) = space.grid().cell(cell);
    let adaptive = Adaptive::new(rule_points(space.local_dim()));
    adaptive
        .integrate(a, b, f.singular_points(), n, &|x, out: &mut [T]| {
            fill(x, out);
            let fx = f.eval(x);
            out.iter_mut().for_each(|v| *v = *v * fx);
        })
        .map_err(|e| Error::QuadratureFailure { cell, reason: e.to_string() })
}

fn per_cell<T: Scalar, R: Send>(space: &Space<T>, work: impl Fn(usize) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    (0..space.num_cells()).into_par_iter().map(work).collect()
}

/// The canonical extension of `f`: its L2 projection onto `space`.
pub fn tilde<T: Scalar>(space: &Space<T>, f: &FunctionHandle<T>) -> Result<Ultrafunction<T>> {
    let n = space.local_dim();
    let blocks = per_cell(space, |j| cell_integrals(space, f, j, n, |x, out| space.basis_values(j, x, out)))?;
    Ultrafunction::from_coeffs(space, blocks.concat())
}

/// Projection through a Delta/Sigma pair: `sum_q [integral f delta_q] sigma_q`.
pub fn tilde_via_basis<T: Scalar>(pair: &BasisPair<T>, f: &FunctionHandle<T>) -> Result<Ultrafunction<T>> {
    let weights = pair_weights(pair, f, pair.delta_matrix())?;
    Ultrafunction::from_coeffs(pair.space(), pair.sigma_matrix().mul_vec(&weights))
}

/// The dual formula: `sum_q [integral f sigma_q] delta_q`.
pub fn tilde_via_basis_dual<T: Scalar>(pair: &BasisPair<T>, f: &FunctionHandle<T>) -> Result<Ultrafunction<T>> {
    let weights = pair_weights(pair, f, pair.sigma_matrix())?;
    Ultrafunction::from_coeffs(pair.space(), pair.delta_matrix().mul_vec(&weights))
}

/// `integral f * w_i` for every column `w_i` of `columns` (block-diagonal by cell).
fn pair_weights<T: Scalar>(pair: &BasisPair<T>, f: &FunctionHandle<T>, columns: &crate::linalg::Matrix<T>) -> Result<Vec<T>> {
    let space = pair.space();
    let n = space.local_dim();
    let blocks = per_cell(space, |j| {
        let range = space.block_range(j);
        // local[(k, i)]: coefficient k of column i, both inside cell j
        let local: Vec<Vec<T>> = range.clone().map(|i| columns.column(i)[range.clone()].to_vec()).collect();
        cell_integrals(space, f, j, n, |x, out| {
            let mut vals = vec![T::zero(); n];
            space.basis_values(j, x, &mut vals);
            for (o, col) in out.iter_mut().zip(&local) {
                *o = crate::space::dot(col, &vals);
            }
        })
    })?;
    Ok(blocks.concat())
}

/// `integral of f * v` over `[-beta, beta]`.
pub fn integrate_product<T: Scalar>(space: &Space<T>, f: &FunctionHandle<T>, v: &Ultrafunction<T>) -> Result<T> {
    if v.space() != space {
        return invalid("ultrafunction belongs to a different space");
    }
    let parts = per_cell(space, |j| {
        if v.block(j).iter().all(|&c| c == T::zero()) {
            return Ok(T::zero());
        }
        Ok(cell_integrals(space, f, j, 1, |x, out| out[0] = v.eval_in_cell(j, x))?[0])
    })?;
    Ok(parts.into_iter().sum())
}

/// `||f - u||` in L2 over `[-beta, beta]`.
pub fn l2_distance<T: Scalar>(f: &FunctionHandle<T>, u: &Ultrafunction<T>) -> Result<T> {
    let space = u.space();
    let parts = per_cell(space, |j| {
        let (a, b) = space.grid().cell(j);
        Adaptive::new(rule_points(space.local_dim()))
            .integrate(a, b, f.singular_points(), 1, &|x, out: &mut [T]| {
                let d = f.eval(x) - u.eval_in_cell(j, x);
                out[0] = d * d;
            })
            .map(|v| v[0])
            .map_err(|e| Error::QuadratureFailure { cell: j, reason: e.to_string() })
    })?;
    Ok(parts.into_iter().sum::<T>().sqrt())
}

/// Cells whose closure lies in `[lo, hi]`.
pub fn cells_within<T: Scalar>(space: &Space<T>, lo: T, hi: T) -> Vec<usize> {
    let snap = tol::node_snap::<T>() * space.grid().beta();
    space
        .grid()
        .cells()
        .enumerate()
        .filter(|(_, (a, b))| *a >= lo - snap && *b <= hi + snap)
        .map(|(j, _)| j)
        .collect()
}

/// Whether `f~` and `g~` agree on every cell inside `[lo, hi]`: each block of
/// `(f - g)~` there has norm below `1e-10`.
pub fn compare_ae<T: Scalar>(
    space: &Space<T>,
    f: &FunctionHandle<T>,
    g: &FunctionHandle<T>,
    region: (T, T),
) -> Result<bool> {
    let (lo, hi) = region;
    if !(lo < hi) {
        return invalid(format!("empty region [{lo}, {hi}]"));
    }
    let diff = tilde(space, &f.sub(g))?;
    let limit = T::lit(tol::IDENTITY);
    Ok(cells_within(space, lo, hi).into_iter().all(|j| {
        let norm2: T = diff.block(j).iter().map(|&c| c * c).sum();
        norm2.sqrt() < limit
    }))
}

/// Largest change of a block of `f~` when `f` is cut down to that block's cell.
pub fn locality_check<T: Scalar>(space: &Space<T>, f: &FunctionHandle<T>, cells: &[usize]) -> Result<T> {
    if let Some(&bad) = cells.iter().find(|&&j| j >= space.num_cells()) {
        return invalid(format!("cell {bad} does not exist"));
    }
    let full = tilde(space, f)?;
    let mut residual = T::zero();
    for &j in cells {
        let (a, b) = space.grid().cell(j);
        let local = tilde(space, &f.restricted(a, b))?;
        let d: T = full.block(j).iter().zip(local.block(j)).map(|(&x, &y)| (x - y) * (x - y)).sum();
        residual = residual.max(d.sqrt());
    }
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{basis_pair, default_sigma_points};
    use crate::grid::Grid;
    use approx::assert_abs_diff_eq;

    fn space(beta: f64, ell: usize, p: usize) -> Space<f64> {
        Space::build(Grid::build_uniform(beta, ell).unwrap(), p)
    }

    #[test]
    fn member_is_fixed() {
        let s = space(1.0, 4, 3);
        let u = Ultrafunction::from_cellwise_fn(&s, |x| if x < 0.0 { x.powi(3) - x } else { 2.0 - x * x });
        let uc = u.clone();
        let f = FunctionHandle::new(move |x| uc.eval(x));
        let t = tilde(&s, &f).unwrap();
        assert!(t.max_coeff_diff(&u).unwrap() < 1e-12);
    }

    #[test]
    fn constant_one() {
        let s = space(2.0, 5, 2);
        let t = tilde(&s, &FunctionHandle::new(|_| 1.0)).unwrap();
        assert!(t.max_coeff_diff(&Ultrafunction::constant(&s, 1.0)).unwrap() < 1e-13);
        for x in [-2.0, -1.2, 0.0, 0.33, 2.0] {
            assert_abs_diff_eq!(t.eval(x), 1.0, epsilon = 1e-13);
        }
        assert_eq!(t.eval(2.5), 0.0);
    }

    #[test]
    fn inverse_sqrt_grows_as_cell_shrinks() {
        let f = FunctionHandle::singular(|x: f64| x.abs().powf(-0.5), vec![0.0]);
        let mut prev = 0.0;
        for ell in [4, 8, 16, 32] {
            let s = space(1.0, ell, 1);
            let v = tilde(&s, &f).unwrap().eval(0.0);
            assert!(v.is_finite());
            assert!(v > prev, "{v} <= {prev}");
            prev = v;
        }
    }

    #[test]
    fn via_basis_agrees() {
        let s = space(1.0, 4, 2);
        let pair = basis_pair(&s, &default_sigma_points(&s)).unwrap();
        let f = FunctionHandle::new(|x: f64| (3.0 * x).sin() + x.exp());
        let direct = tilde(&s, &f).unwrap();
        assert!(tilde_via_basis(&pair, &f).unwrap().max_coeff_diff(&direct).unwrap() < 1e-10);
        assert!(tilde_via_basis_dual(&pair, &f).unwrap().max_coeff_diff(&direct).unwrap() < 1e-10);
    }

    #[test]
    fn ae_comparison() {
        let s = space(1.0, 8, 1);
        let g = FunctionHandle::new(|x: f64| x.cos());
        let f_pts = FunctionHandle::new(|x: f64| x.cos() + if x == 0.1 || x == -0.3 { 5.0 } else { 0.0 });
        assert!(compare_ae(&s, &f_pts, &g, (-1.0, 1.0)).unwrap());
        let f_cell = FunctionHandle::new(|x: f64| x.cos() + if x > 0.25 && x < 0.5 { 1.0 } else { 0.0 });
        assert!(!compare_ae(&s, &f_cell, &g, (-1.0, 1.0)).unwrap());
        // the bump is outside this region
        assert!(compare_ae(&s, &f_cell, &g, (-1.0, 0.0)).unwrap());
        assert!(compare_ae(&s, &g, &g, (-1.0, 1.0)).unwrap());
    }

    #[test]
    fn locality() {
        let s = space(1.0, 6, 2);
        let f = FunctionHandle::new(|x: f64| (5.0 * x).sin() * x.exp());
        let all: Vec<usize> = (0..6).collect();
        assert!(locality_check(&s, &f, &all).unwrap() <= 1e-12);
        // changing f outside the region leaves the region's blocks alone
        let g = FunctionHandle::new(|x: f64| (5.0 * x).sin() * x.exp() + if x > 0.0 { 7.0 } else { 0.0 });
        let (tf, tg) = (tilde(&s, &f).unwrap(), tilde(&s, &g).unwrap());
        for j in cells_within(&s, -1.0, 0.0) {
            assert_eq!(tf.block(j), tg.block(j));
        }
    }

    #[test]
    fn quadrature_failure_names_the_cell() {
        let s = space(1.0, 4, 0);
        // 1/x^2 near 0.6 is not integrable and the singular point is undeclared
        let f = FunctionHandle::new(|x: f64| 1.0 / ((x - 0.6) * (x - 0.6)));
        match tilde(&s, &f) {
            Err(Error::QuadratureFailure { cell, .. }) => assert_eq!(cell, 3),
            other => panic!("expected quadrature failure, got {other:?}"),
        }
    }
}
