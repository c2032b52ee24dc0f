//! The stage-level canonical space: piecewise polynomials of degree `<= p`
//! on a [`Grid`], with an orthonormal basis on every cell.
//!
//! Cell `j` carries `e_{j,k}(x) = sqrt(2/h_j) * phi_k(t)` where `t` maps the
//! cell affinely onto `[-1, 1]` and `phi_0..phi_p` are orthonormal on
//! `[-1, 1]` (Gram-Schmidt on monomials, applied twice). Coefficients of an
//! [`Ultrafunction`] are stored cell-major in this splitted basis.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, PointClass};
use crate::linalg::Matrix;
use crate::quadrature::GaussLegendre;
use crate::{tol, Scalar};

/// One-sided limit selector at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

/// Orthonormal polynomials on `[-1, 1]` in monomial coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBasis<T> {
    /// Row `k` holds the monomial coefficients of `phi_k`.
    coeffs: Matrix<T>,
    /// `deriv[(m, k)] = integral of phi_m * phi_k'` over `[-1, 1]`.
    deriv: Matrix<T>,
    at_left: Vec<T>,
    at_right: Vec<T>,
}

impl<T: Scalar> ReferenceBasis<T> {
    fn build(p: usize, rule: &GaussLegendre<T>) -> Self {
        let n = p + 1;
        let nodes = rule.nodes();
        let weights = rule.weights();
        let values = |c: &[T]| -> Vec<T> { nodes.iter().map(|&t| horner(c, t)).collect() };
        let dot = |a: &[T], b: &[T]| -> T {
            let (va, vb) = (values(a), values(b));
            va.iter().zip(&vb).zip(weights).map(|((&x, &y), &w)| w * x * y).sum()
        };

        let mut coeffs = Matrix::zeros(n, n);
        let mut done: Vec<Vec<T>> = Vec::with_capacity(n);
        for k in 0..n {
            let mut v = vec![T::zero(); n];
            v[k] = T::one();
            // two passes of classical Gram-Schmidt
            for _ in 0..2 {
                for q in &done {
                    let r = dot(&v, q);
                    for (vi, &qi) in v.iter_mut().zip(q) {
                        *vi = *vi - r * qi;
                    }
                }
            }
            let norm = dot(&v, &v).sqrt();
            for vi in v.iter_mut() {
                *vi = *vi / norm;
            }
            for (i, &c) in v.iter().enumerate() {
                coeffs[(k, i)] = c;
            }
            done.push(v);
        }

        let derivs: Vec<Vec<T>> = done.iter().map(|c| poly_derivative(c)).collect();
        let deriv = Matrix::from_fn(n, n, |m, k| dot(&done[m], &derivs[k]));
        let at_left = done.iter().map(|c| horner(c, -T::one())).collect();
        let at_right = done.iter().map(|c| horner(c, T::one())).collect();
        Self { coeffs, deriv, at_left, at_right }
    }

    pub fn coefficients(&self) -> &Matrix<T> {
        &self.coeffs
    }

    pub fn derivative_matrix(&self) -> &Matrix<T> {
        &self.deriv
    }

    fn eval_all(&self, t: T, out: &mut [T]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = horner(self.coeffs.row(k), t);
        }
    }
}

fn horner<T: Scalar>(c: &[T], t: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &a| acc * t + a)
}

fn poly_derivative<T: Scalar>(c: &[T]) -> Vec<T> {
    let mut d = vec![T::zero(); c.len()];
    for i in 1..c.len() {
        d[i - 1] = c[i] * T::from_count(i);
    }
    d
}

#[derive(Debug)]
struct SpaceInner<T> {
    grid: Grid<T>,
    degree: usize,
    reference: ReferenceBasis<T>,
    rule: GaussLegendre<T>,
}

/// Piecewise polynomials of degree `<= p` on a grid. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Space<T>(Arc<SpaceInner<T>>);

/// On-disk form: `{"beta": .., "nodes": [..], "degree": p}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceFile<T> {
    pub beta: T,
    pub nodes: Vec<T>,
    pub degree: usize,
}

impl<T: Scalar> PartialEq for Space<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.degree == other.0.degree && self.0.grid == other.0.grid)
    }
}

impl<T: Scalar> Space<T> {
    pub fn build(grid: Grid<T>, degree: usize) -> Self {
        // (2p+2)/2 + 1 points: exact through degree 2p+3
        let rule = GaussLegendre::new((2 * degree + 2) / 2 + 1);
        let reference = ReferenceBasis::build(degree, &rule);
        Self(Arc::new(SpaceInner { grid, degree, reference, rule }))
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.0.grid
    }

    pub fn degree(&self) -> usize {
        self.0.degree
    }

    /// `p + 1`, the dimension of each cell space.
    pub fn local_dim(&self) -> usize {
        self.0.degree + 1
    }

    pub fn num_cells(&self) -> usize {
        self.0.grid.num_cells()
    }

    /// `ell * (p + 1)`.
    pub fn dim(&self) -> usize {
        self.num_cells() * self.local_dim()
    }

    pub fn reference(&self) -> &ReferenceBasis<T> {
        &self.0.reference
    }

    /// The per-cell Gauss rule used for inner products.
    pub fn rule(&self) -> &GaussLegendre<T> {
        &self.0.rule
    }

    /// Global coefficient index of `e_{j,k}`.
    pub fn index(&self, cell: usize, k: usize) -> usize {
        cell * self.local_dim() + k
    }

    pub fn block_range(&self, cell: usize) -> std::ops::Range<usize> {
        let n = self.local_dim();
        cell * n..(cell + 1) * n
    }

    fn scale(&self, cell: usize) -> T {
        (T::lit(2.0) / self.0.grid.width(cell)).sqrt()
    }

    /// Reference coordinate of `x` in cell `j`.
    pub fn to_reference(&self, cell: usize, x: T) -> T {
        let (a, b) = self.0.grid.cell(cell);
        (x + x - a - b) / (b - a)
    }

    /// Values `e_{j,k}(x)` for all `k`, treating `x` as a point of cell `j`'s
    /// polynomial (no support test).
    pub fn basis_values(&self, cell: usize, x: T, out: &mut [T]) {
        let t = self.to_reference(cell, x);
        self.0.reference.eval_all(t, out);
        let s = self.scale(cell);
        out.iter_mut().for_each(|v| *v = *v * s);
    }

    /// One-sided values at the cell's own endpoints: `Side::Plus` gives the
    /// limit at the left end `gamma_j^+`, `Side::Minus` the limit at the right
    /// end `gamma_{j+1}^-`.
    pub fn endpoint_values(&self, cell: usize, side: Side) -> Vec<T> {
        let s = self.scale(cell);
        let r = match side {
            Side::Plus => &self.0.reference.at_left,
            Side::Minus => &self.0.reference.at_right,
        };
        r.iter().map(|&v| v * s).collect()
    }

    /// Values of `e_{cell,k}` at the one-sided limit `node^side`.
    pub(crate) fn sided_kernel_values(&self, node: usize, side: Side) -> Result<(usize, Vec<T>)> {
        let ell = self.num_cells();
        match side {
            Side::Plus if node < ell => Ok((node, self.endpoint_values(node, Side::Plus))),
            Side::Minus if node > 0 && node <= ell => Ok((node - 1, self.endpoint_values(node - 1, Side::Minus))),
            _ => invalid(format!("side {side:?} is not available at node {node} of {ell} cells")),
        }
    }

    pub fn to_file(&self) -> SpaceFile<T> {
        SpaceFile { beta: self.0.grid.beta(), nodes: self.0.grid.nodes().to_vec(), degree: self.0.degree }
    }

    pub fn from_file(file: SpaceFile<T>) -> Result<Self> {
        Ok(Self::build(Grid::from_nodes(file.beta, file.nodes)?, file.degree))
    }

    /// Short content hash identifying the space in serialized ultrafunctions.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.to_file()).expect("space serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// A member of a [`Space`]: one coefficient block of length `p + 1` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Ultrafunction<T: Scalar> {
    space: Space<T>,
    coeffs: Vec<T>,
}

/// On-disk form: `{"space": hash, "blocks": [[..], ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UltrafunctionFile<T> {
    pub space: String,
    pub blocks: Vec<Vec<T>>,
}

impl<T: Scalar> Ultrafunction<T> {
    pub fn zero(space: &Space<T>) -> Self {
        Self { space: space.clone(), coeffs: vec![T::zero(); space.dim()] }
    }

    pub fn from_coeffs(space: &Space<T>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return invalid(format!("expected {} coefficients, got {}", space.dim(), coeffs.len()));
        }
        Ok(Self { space: space.clone(), coeffs })
    }

    pub fn from_blocks(space: &Space<T>, blocks: &[Vec<T>]) -> Result<Self> {
        if blocks.len() != space.num_cells() || blocks.iter().any(|b| b.len() != space.local_dim()) {
            return invalid(format!(
                "expected {} blocks of length {}",
                space.num_cells(),
                space.local_dim()
            ));
        }
        Self::from_coeffs(space, blocks.concat())
    }

    /// Constant `c` on all of `[-beta, beta]`.
    pub fn constant(space: &Space<T>, c: T) -> Self {
        let values = vec![c; space.num_cells()];
        Self::grid_function(space, &values).expect("one value per cell")
    }

    /// Grid function: constant `values[j]` on cell `j`.
    pub fn grid_function(space: &Space<T>, values: &[T]) -> Result<Self> {
        if values.len() != space.num_cells() {
            return invalid(format!("expected {} cell values, got {}", space.num_cells(), values.len()));
        }
        let mut u = Self::zero(space);
        for (j, &c) in values.iter().enumerate() {
            // e_{j,0} is the constant 1/sqrt(h_j)
            let e0 = space.endpoint_values(j, Side::Plus)[0];
            u.coeffs[space.index(j, 0)] = c / e0;
        }
        Ok(u)
    }

    /// Characteristic function of `[gamma_a, gamma_b]` for node indices `a < b`.
    pub fn indicator(space: &Space<T>, a: usize, b: usize) -> Result<Self> {
        if a >= b || b > space.num_cells() {
            return invalid(format!("indicator needs node indices a < b <= {}, got {a}, {b}", space.num_cells()));
        }
        let values: Vec<T> = (0..space.num_cells())
            .map(|j| if j >= a && j < b { T::one() } else { T::zero() })
            .collect();
        Self::grid_function(space, &values)
    }

    /// Cellwise discrete projection of `f` using the space's Gauss rule.
    ///
    /// Exact whenever `f` is a polynomial of degree `<= p` on every cell; for
    /// general integrands use [`crate::projection::tilde`].
    pub fn from_cellwise_fn(space: &Space<T>, f: impl Fn(T) -> T) -> Self {
        let n = space.local_dim();
        let mut coeffs = vec![T::zero(); space.dim()];
        let mut vals = vec![T::zero(); n];
        for j in 0..space.num_cells() {
            let (a, b) = space.grid().cell(j);
            for (x, w) in space.rule().mapped(a, b) {
                let fx = f(x);
                space.basis_values(j, x, &mut vals);
                for k in 0..n {
                    coeffs[space.index(j, k)] = coeffs[space.index(j, k)] + w * fx * vals[k];
                }
            }
        }
        Self { space: space.clone(), coeffs }
    }

    pub fn space(&self) -> &Space<T> {
        &self.space
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn block(&self, cell: usize) -> &[T] {
        &self.coeffs[self.space.block_range(cell)]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[T]> {
        self.coeffs.chunks(self.space.local_dim())
    }

    /// Cells whose block is not identically zero.
    pub fn support_cells(&self) -> Vec<usize> {
        self.blocks()
            .enumerate()
            .filter(|(_, b)| b.iter().any(|&c| c != T::zero()))
            .map(|(j, _)| j)
            .collect()
    }

    /// Value of cell `j`'s polynomial at `x`.
    pub fn eval_in_cell(&self, cell: usize, x: T) -> T {
        let block = self.block(cell);
        if block.iter().all(|&c| c == T::zero()) {
            return T::zero();
        }
        let mut vals = vec![T::zero(); block.len()];
        self.space.basis_values(cell, x, &mut vals);
        dot(block, &vals)
    }

    /// Point value with the node-average convention; zero outside `[-beta, beta]`.
    pub fn eval(&self, x: T) -> T {
        let ell = self.space.num_cells();
        match self.space.grid().locate(x) {
            PointClass::InteriorOf(j) => self.eval_in_cell(j, x),
            PointClass::Outside => T::zero(),
            PointClass::Node(0) => self.sided(0, Side::Plus),
            PointClass::Node(j) if j == ell => self.sided(j, Side::Minus),
            PointClass::Node(j) => (self.sided(j, Side::Plus) + self.sided(j, Side::Minus)) * T::lit(0.5),
        }
    }

    fn sided(&self, node: usize, side: Side) -> T {
        let (cell, vals) = self.space.sided_kernel_values(node, side).expect("side checked by caller");
        dot(self.block(cell), &vals)
    }

    /// One-sided limit `u(gamma_node^side)`.
    pub fn eval_side(&self, node: usize, side: Side) -> Result<T> {
        let (cell, vals) = self.space.sided_kernel_values(node, side)?;
        Ok(dot(self.block(cell), &vals))
    }

    /// `u^+(gamma_j) - u^-(gamma_j)` at an interior node.
    pub fn jump(&self, node: usize) -> Result<T> {
        if node == 0 || node >= self.space.num_cells() {
            return invalid(format!("node {node} is not an interior node"));
        }
        Ok(self.sided(node, Side::Plus) - self.sided(node, Side::Minus))
    }

    pub fn max_jump(&self) -> T {
        (1..self.space.num_cells())
            .map(|j| self.jump(j).expect("interior node").abs())
            .fold(T::zero(), T::max)
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return invalid("ultrafunctions belong to different spaces");
        }
        Ok(())
    }

    /// L2 inner product by per-cell Gauss quadrature of the product.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.inner_on(other, 0, self.space.num_cells())
    }

    /// L2 inner product over `[gamma_n, gamma_m]`, `n <= m`.
    pub fn inner_on(&self, other: &Self, n: usize, m: usize) -> Result<T> {
        self.check_same_space(other)?;
        if n > m || m > self.space.num_cells() {
            return invalid(format!("node range {n}..{m} is not ordered within the grid"));
        }
        let dim = self.space.local_dim();
        let mut vals = vec![T::zero(); dim];
        let mut total = T::zero();
        for j in n..m {
            let (bu, bv) = (self.block(j), other.block(j));
            if bu.iter().all(|&c| c == T::zero()) || bv.iter().all(|&c| c == T::zero()) {
                continue;
            }
            let (a, b) = self.space.grid().cell(j);
            let mut cell_sum = T::zero();
            for (x, w) in self.space.rule().mapped(a, b) {
                self.space.basis_values(j, x, &mut vals);
                cell_sum = cell_sum + w * dot(bu, &vals) * dot(bv, &vals);
            }
            total = total + cell_sum;
        }
        Ok(total)
    }

    pub fn norm(&self) -> T {
        self.inner(self).expect("same space").max(T::zero()).sqrt()
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.check_same_space(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(&x, &y)| a * x + b * y).collect();
        Ok(Self { space: self.space.clone(), coeffs })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lin_comb(T::one(), other, T::one())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(T::one(), other, -T::one())
    }

    pub fn scaled(&self, a: T) -> Self {
        Self { space: self.space.clone(), coeffs: self.coeffs.iter().map(|&c| a * c).collect() }
    }

    /// Largest coefficient difference.
    pub fn max_coeff_diff(&self, other: &Self) -> Result<T> {
        self.check_same_space(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs())))
    }

    pub fn to_file(&self) -> UltrafunctionFile<T> {
        UltrafunctionFile { space: self.space.hash(), blocks: self.blocks().map(<[T]>::to_vec).collect() }
    }

    pub fn from_file(space: &Space<T>, file: &UltrafunctionFile<T>) -> Result<Self> {
        let hash = space.hash();
        if file.space != hash {
            return Err(Error::InvalidArgument(format!(
                "ultrafunction was built on space {}, not {hash}",
                file.space
            )));
        }
        Self::from_blocks(space, &file.blocks)
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// The orthonormal splitted basis: element `i` is `e_{j,k}` for `entries[i] = (j, k)`.
#[derive(Debug, Clone)]
pub struct SplittedBasis<T: Scalar> {
    space: Space<T>,
    entries: Vec<(usize, usize)>,
}

pub fn splitted_basis<T: Scalar>(space: &Space<T>) -> SplittedBasis<T> {
    let entries = (0..space.num_cells())
        .flat_map(|j| (0..space.local_dim()).map(move |k| (j, k)))
        .collect();
    SplittedBasis { space: space.clone(), entries }
}

impl<T: Scalar> SplittedBasis<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn element(&self, i: usize) -> Ultrafunction<T> {
        let (j, k) = self.entries[i];
        let mut u = Ultrafunction::zero(&self.space);
        u.coeffs[self.space.index(j, k)] = T::one();
        u
    }

    /// Gram matrix of the basis under [`Ultrafunction::inner`].
    pub fn gram(&self) -> Matrix<T> {
        let elems: Vec<_> = (0..self.len()).map(|i| self.element(i)).collect();
        Matrix::from_fn(self.len(), self.len(), |a, b| elems[a].inner(&elems[b]).expect("same space"))
    }

    /// Largest entrywise deviation of the Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> T {
        self.gram().sub(&Matrix::identity(self.len())).max_abs()
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormality_error() <= tol::orthonormal::<T>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn space(beta: f64, ell: usize, p: usize) -> Space<f64> {
        Space::build(Grid::build_uniform(beta, ell).unwrap(), p)
    }

    #[test]
    fn single_cell_constant_basis() {
        let s = space(1.0, 1, 0);
        let b = splitted_basis(&s);
        let e = b.element(0);
        // e = 1/sqrt(2) on [-1, 1]; check the value and the normalization by quadrature
        assert_abs_diff_eq!(e.eval(0.3), 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        let q = GaussLegendre::<f64>::new(4).integrate(-1.0, 1.0, |x| e.eval(x).powi(2));
        assert_abs_diff_eq!(q, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn unit_cell_constant_basis() {
        let g = Grid::from_nodes(1.0, vec![-1.0, 0.0, 1.0]).unwrap();
        let s = Space::build(g, 0);
        let e = splitted_basis(&s).element(1);
        assert_abs_diff_eq!(e.eval(0.5), 1.0, epsilon = 1e-15);
        let q = GaussLegendre::<f64>::new(4).integrate(0.0, 1.0, |x| e.eval(x).powi(2));
        assert_abs_diff_eq!(q, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn dimension_count() {
        for ell in [1, 3, 7] {
            let s = space(1.5, ell, 2);
            assert_eq!(s.dim(), 3 * ell);
            assert_eq!(splitted_basis(&s).len(), 3 * ell);
        }
    }

    #[test]
    fn gram_is_identity() {
        for p in 0..=8 {
            let g = Grid::build_tagged(2.0, &[0.1, 0.37], 0.7).unwrap();
            let s = Space::build(g, p);
            let err = splitted_basis(&s).orthonormality_error();
            assert!(err <= 1e-12, "p={p}: {err}");
        }
    }

    #[test]
    fn each_element_has_one_block() {
        let s = space(1.0, 5, 2);
        let b = splitted_basis(&s);
        for i in 0..b.len() {
            assert_eq!(b.element(i).support_cells(), vec![b.entries()[i].0]);
        }
    }

    #[test]
    fn indicator_node_conventions() {
        let s = space(1.0, 4, 1);
        // [a, b] = [-0.5, 0.5], both interior nodes
        let chi = Ultrafunction::indicator(&s, 1, 3).unwrap();
        assert_abs_diff_eq!(chi.eval(-0.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(chi.eval(0.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(chi.eval(0.0), 1.0, epsilon = 1e-15);
        // a = -beta
        let chi = Ultrafunction::indicator(&s, 0, 2).unwrap();
        assert_abs_diff_eq!(chi.eval(-1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(chi.eval(0.0), 0.5, epsilon = 1e-15);
        let chi = Ultrafunction::indicator(&s, 2, 4).unwrap();
        assert_abs_diff_eq!(chi.eval(1.0), 1.0, epsilon = 1e-15);
        assert_eq!(chi.eval(1.5), 0.0);
    }

    #[test]
    fn single_block_value() {
        let g = Grid::from_nodes(1.0, vec![-1.0, 0.0, 1.0]).unwrap();
        let s = Space::build(g, 0);
        let u = Ultrafunction::grid_function(&s, &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(u.eval(0.5), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sided_limits() {
        let s = space(1.0, 4, 2);
        let step = Ultrafunction::indicator(&s, 2, 4).unwrap();
        assert_abs_diff_eq!(step.eval_side(2, Side::Minus).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(step.eval_side(2, Side::Plus).unwrap(), 1.0, epsilon = 1e-14);
        let poly = Ultrafunction::from_cellwise_fn(&s, |x| x * x - 0.3 * x);
        let (p, m) = (poly.eval_side(1, Side::Plus).unwrap(), poly.eval_side(1, Side::Minus).unwrap());
        assert_abs_diff_eq!(p, m, epsilon = 1e-14);
        assert_abs_diff_eq!(poly.eval(-0.5), p, epsilon = 1e-14);
        assert!(matches!(poly.eval_side(0, Side::Minus), Err(Error::InvalidArgument(_))));
        assert!(matches!(poly.eval_side(4, Side::Plus), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn unit_norm_of_cell_indicator() {
        let g = Grid::from_nodes(1.0, vec![-1.0, 0.0, 1.0]).unwrap();
        let s = Space::build(g, 1);
        let u = Ultrafunction::grid_function(&s, &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(u.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn disjoint_blocks_are_exactly_orthogonal() {
        let s = space(1.0, 6, 3);
        let u = Ultrafunction::from_cellwise_fn(&s, |x| if x < 0.0 { x.sin() + 2.0 } else { 0.0 });
        let v = Ultrafunction::from_cellwise_fn(&s, |x| if x > 0.0 { x.exp() } else { 0.0 });
        assert_eq!(u.inner(&v).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_spaces_are_rejected() {
        let a = Ultrafunction::constant(&space(1.0, 4, 1), 1.0);
        let b = Ultrafunction::constant(&space(1.0, 4, 2), 1.0);
        assert!(matches!(a.inner(&b), Err(Error::InvalidArgument(_))));
        // structurally equal spaces are interchangeable
        let c = Ultrafunction::constant(&space(1.0, 4, 1), 1.0);
        assert!(a.inner(&c).is_ok());
    }

    #[test]
    fn file_round_trip_checks_hash() {
        let s = space(1.0, 3, 1);
        let u = Ultrafunction::from_cellwise_fn(&s, |x| 2.0 * x + 1.0);
        let f = u.to_file();
        assert_eq!(Ultrafunction::from_file(&s, &f).unwrap(), u);
        let other = space(1.0, 3, 2);
        assert!(Ultrafunction::from_file(&other, &f).is_err());
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.starts_with(r#"{"space":""#));
    }
}
