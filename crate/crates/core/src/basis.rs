//! Delta ultrafunctions and Sigma (dual) bases.
//!
//! `delta(q)` is the member representing point evaluation at `q` under the L2
//! pairing. Inside a cell it is that cell's reproducing kernel
//! `sum_k e_{j,k}(q) e_{j,k}`; at an interior node it is the average of the two
//! one-sided kernels; at `±beta` it is the one-sided kernel.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::PointClass;
use crate::linalg::Matrix;
use crate::space::{dot, Side, Space, Ultrafunction};
use crate::{tol, Scalar};

/// Which construction a delta uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeltaKind {
    Interior,
    NodeAverage,
    NodePlus,
    NodeMinus,
    EndpointLeft,
    EndpointRight,
}

/// Kind of `delta(space, q)` for a point `q` in `[-beta, beta]`.
pub fn delta_kind<T: Scalar>(space: &Space<T>, q: T) -> Result<DeltaKind> {
    let ell = space.num_cells();
    match space.grid().locate(q) {
        PointClass::Outside => invalid(format!("delta center {q} lies outside [-beta, beta]")),
        PointClass::InteriorOf(_) => Ok(DeltaKind::Interior),
        PointClass::Node(0) => Ok(DeltaKind::EndpointLeft),
        PointClass::Node(j) if j == ell => Ok(DeltaKind::EndpointRight),
        PointClass::Node(_) => Ok(DeltaKind::NodeAverage),
    }
}

/// The delta ultrafunction concentrated at `q`.
pub fn delta<T: Scalar>(space: &Space<T>, q: T) -> Result<Ultrafunction<T>> {
    let ell = space.num_cells();
    let mut coeffs = vec![T::zero(); space.dim()];
    match space.grid().locate(q) {
        PointClass::Outside => return invalid(format!("delta center {q} lies outside [-beta, beta]")),
        PointClass::InteriorOf(j) => {
            let mut vals = vec![T::zero(); space.local_dim()];
            space.basis_values(j, q, &mut vals);
            coeffs[space.block_range(j)].copy_from_slice(&vals);
        }
        PointClass::Node(0) => put_sided(space, &mut coeffs, 0, Side::Plus, T::one()),
        PointClass::Node(j) if j == ell => put_sided(space, &mut coeffs, j, Side::Minus, T::one()),
        PointClass::Node(j) => {
            let half = T::lit(0.5);
            put_sided(space, &mut coeffs, j, Side::Minus, half);
            put_sided(space, &mut coeffs, j, Side::Plus, half);
        }
    }
    Ultrafunction::from_coeffs(space, coeffs)
}

fn put_sided<T: Scalar>(space: &Space<T>, coeffs: &mut [T], node: usize, side: Side, weight: T) {
    let (cell, vals) = space.sided_kernel_values(node, side).expect("side available");
    for (c, v) in coeffs[space.block_range(cell)].iter_mut().zip(vals) {
        *c = *c + weight * v;
    }
}

/// One-sided delta at a node: pairing with it returns `v(gamma_node^side)`.
pub fn delta_sided<T: Scalar>(space: &Space<T>, node: usize, side: Side) -> Result<Ultrafunction<T>> {
    space.sided_kernel_values(node, side)?;
    let mut coeffs = vec![T::zero(); space.dim()];
    put_sided(space, &mut coeffs, node, side, T::one());
    Ultrafunction::from_coeffs(space, coeffs)
}

/// The `p + 1` Gauss abscissae of every cell, cell by cell.
pub fn default_sigma_points<T: Scalar>(space: &Space<T>) -> Vec<T> {
    let rule = crate::quadrature::GaussLegendre::<T>::new(space.local_dim());
    space
        .grid()
        .cells()
        .flat_map(|(a, b)| rule.mapped(a, b).map(|(x, _)| x).collect::<Vec<_>>())
        .collect()
}

/// A Delta basis at independent points together with its dual Sigma basis.
///
/// Both matrices are `dim x dim` in splitted-basis coordinates; column `i`
/// belongs to `points[i]`. Points are grouped by cell in ascending cell order.
#[derive(Debug, Clone)]
pub struct BasisPair<T: Scalar> {
    space: Space<T>,
    points: Vec<T>,
    cells: Vec<usize>,
    delta: Matrix<T>,
    sigma: Matrix<T>,
    condition: Vec<T>,
}

/// On-disk form of a [`BasisPair`]; matrices are lists of columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisPairFile<T> {
    pub space: String,
    pub points: Vec<T>,
    pub delta: Vec<Vec<T>>,
    pub sigma: Vec<Vec<T>>,
    pub condition: Vec<T>,
}

/// Builds the Delta basis at `points` and solves the per-cell duality systems.
///
/// Every cell must receive exactly `p + 1` distinct interior points.
pub fn basis_pair<T: Scalar>(space: &Space<T>, points: &[T]) -> Result<BasisPair<T>> {
    let n = space.local_dim();
    let ell = space.num_cells();
    let mut located = Vec::with_capacity(points.len());
    for &q in points {
        match space.grid().locate(q) {
            PointClass::InteriorOf(j) => located.push((j, q)),
            PointClass::Node(j) => {
                return Err(Error::IndependenceFailure(format!(
                    "point {q} is node {j}; basis points must be cell interiors"
                )))
            }
            PointClass::Outside => return invalid(format!("point {q} lies outside [-beta, beta]")),
        }
    }
    located.sort_by_key(|&(j, _)| j);

    let mut counts = vec![0usize; ell];
    for &(j, _) in &located {
        counts[j] += 1;
    }
    if let Some((j, &c)) = counts.iter().enumerate().find(|(_, &c)| c != n) {
        return Err(Error::IndependenceFailure(format!("cell {j} has {c} points, needs {n}")));
    }

    let dim = space.dim();
    let mut delta_m = Matrix::zeros(dim, dim);
    let mut sigma_m = Matrix::zeros(dim, dim);
    let mut condition = Vec::with_capacity(ell);
    let snap = tol::node_snap::<T>() * space.grid().beta();
    let mut vals = vec![T::zero(); n];
    for j in 0..ell {
        let cell_points = &located[j * n..(j + 1) * n];
        for (i, &(_, a)) in cell_points.iter().enumerate() {
            if cell_points[..i].iter().any(|&(_, b)| (a - b).abs() <= snap) {
                return Err(Error::IndependenceFailure(format!("point {a} is repeated in cell {j}")));
            }
        }
        // local[(k, i)] = e_{j,k}(q_i): the delta columns restricted to cell j
        let mut local = Matrix::zeros(n, n);
        for (i, &(_, q)) in cell_points.iter().enumerate() {
            space.basis_values(j, q, &mut vals);
            for k in 0..n {
                local[(k, i)] = vals[k];
            }
        }
        // duality: local^T * S = I
        let s = local
            .transpose()
            .inverse()
            .ok_or_else(|| Error::IndependenceFailure(format!("points in cell {j} are not unisolvent")))?;
        condition.push(local.norm_1() * s.transpose().norm_1());
        let base = j * n;
        for i in 0..n {
            for k in 0..n {
                delta_m[(base + k, base + i)] = local[(k, i)];
                sigma_m[(base + k, base + i)] = s[(k, i)];
            }
        }
    }

    Ok(BasisPair {
        space: space.clone(),
        points: located.iter().map(|&(_, q)| q).collect(),
        cells: located.iter().map(|&(j, _)| j).collect(),
        delta: delta_m,
        sigma: sigma_m,
        condition,
    })
}

impl<T: Scalar> BasisPair<T> {
    pub fn space(&self) -> &Space<T> {
        &self.space
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn cell_of(&self, i: usize) -> usize {
        self.cells[i]
    }

    pub fn delta_matrix(&self) -> &Matrix<T> {
        &self.delta
    }

    pub fn sigma_matrix(&self) -> &Matrix<T> {
        &self.sigma
    }

    /// 1-norm condition number of each cell's point-evaluation matrix.
    pub fn condition(&self) -> &[T] {
        &self.condition
    }

    pub fn delta_function(&self, i: usize) -> Ultrafunction<T> {
        Ultrafunction::from_coeffs(&self.space, self.delta.column(i)).expect("column has dim entries")
    }

    pub fn sigma_function(&self, i: usize) -> Ultrafunction<T> {
        Ultrafunction::from_coeffs(&self.space, self.sigma.column(i)).expect("column has dim entries")
    }

    /// `[inner(delta_a, sigma_b)]`, computed by quadrature.
    pub fn duality_matrix(&self) -> Matrix<T> {
        let n = self.points.len();
        let deltas: Vec<_> = (0..n).map(|i| self.delta_function(i)).collect();
        let sigmas: Vec<_> = (0..n).map(|i| self.sigma_function(i)).collect();
        Matrix::from_fn(n, n, |a, b| deltas[a].inner(&sigmas[b]).expect("same space"))
    }

    /// Index of `q` among the basis points.
    pub fn position(&self, q: T) -> Option<usize> {
        let snap = tol::node_snap::<T>() * self.space.grid().beta();
        self.points.iter().position(|&p| (p - q).abs() <= snap)
    }

    /// Values of `u` at the basis points.
    pub fn sample(&self, u: &Ultrafunction<T>) -> Vec<T> {
        self.points.iter().map(|&q| u.eval(q)).collect()
    }

    pub fn to_file(&self) -> BasisPairFile<T> {
        let n = self.points.len();
        BasisPairFile {
            space: self.space.hash(),
            points: self.points.clone(),
            delta: (0..n).map(|i| self.delta.column(i)).collect(),
            sigma: (0..n).map(|i| self.sigma.column(i)).collect(),
            condition: self.condition.clone(),
        }
    }
}

/// `sum_q values[q] * sigma_q`.
pub fn reconstruct_from_values<T: Scalar>(pair: &BasisPair<T>, values: &[T]) -> Result<Ultrafunction<T>> {
    if values.len() != pair.points.len() {
        return invalid(format!("expected {} values, got {}", pair.points.len(), values.len()));
    }
    Ultrafunction::from_coeffs(&pair.space, pair.sigma.mul_vec(values))
}

/// `sum_q c_q * delta_q`.
pub fn combine_deltas<T: Scalar>(pair: &BasisPair<T>, weights: &[T]) -> Result<Ultrafunction<T>> {
    if weights.len() != pair.points.len() {
        return invalid(format!("expected {} weights, got {}", pair.points.len(), weights.len()));
    }
    Ultrafunction::from_coeffs(&pair.space, pair.delta.mul_vec(weights))
}

/// Value of `sigma_i` at `x` without materializing it.
pub fn sigma_value<T: Scalar>(pair: &BasisPair<T>, i: usize, x: T) -> T {
    let j = pair.cells[i];
    match pair.space.grid().locate(x) {
        PointClass::InteriorOf(c) if c == j => {
            let mut vals = vec![T::zero(); pair.space.local_dim()];
            pair.space.basis_values(j, x, &mut vals);
            let col = pair.sigma.column(i);
            dot(&col[pair.space.block_range(j)], &vals)
        }
        _ => pair.sigma_function(i).eval(x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::space::splitted_basis;
    use approx::assert_abs_diff_eq;

    fn space(beta: f64, ell: usize, p: usize) -> Space<f64> {
        Space::build(Grid::build_uniform(beta, ell).unwrap(), p)
    }

    #[test]
    fn constant_cell_delta() {
        let g = Grid::from_nodes(1.0, vec![-1.0, 0.0, 1.0]).unwrap();
        let s = Space::build(g, 0);
        let d = delta(&s, 0.5).unwrap();
        assert_abs_diff_eq!(d.eval(0.25), 1.0, epsilon = 1e-15);
        assert_eq!(d.support_cells(), vec![1]);
        for c in [-2.0, 0.5, 3.0] {
            let v = Ultrafunction::constant(&s, c);
            assert_abs_diff_eq!(v.inner(&d).unwrap(), c, epsilon = 1e-14);
        }
    }

    #[test]
    fn node_delta_is_average_of_sided() {
        let s = space(1.0, 4, 2);
        let d = delta(&s, 0.0).unwrap();
        let avg = delta_sided(&s, 2, Side::Minus)
            .unwrap()
            .lin_comb(0.5, &delta_sided(&s, 2, Side::Plus).unwrap(), 0.5)
            .unwrap();
        assert!(d.max_coeff_diff(&avg).unwrap() < 1e-15);
        assert_eq!(d.support_cells(), vec![1, 2]);
    }

    #[test]
    fn sided_deltas_read_step_limits() {
        let s = space(1.0, 4, 1);
        let step = Ultrafunction::indicator(&s, 2, 4).unwrap();
        let minus = delta_sided(&s, 2, Side::Minus).unwrap();
        let plus = delta_sided(&s, 2, Side::Plus).unwrap();
        assert_abs_diff_eq!(step.inner(&minus).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(step.inner(&plus).unwrap(), 1.0, epsilon = 1e-14);
        let smooth = Ultrafunction::from_cellwise_fn(&s, |x| 1.0 - 2.0 * x);
        assert_abs_diff_eq!(smooth.inner(&minus).unwrap(), smooth.inner(&plus).unwrap(), epsilon = 1e-14);
        assert!(matches!(delta_sided(&s, 0, Side::Minus), Err(Error::InvalidArgument(_))));
        assert!(matches!(delta_sided(&s, 4, Side::Plus), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn kinds() {
        let s = space(1.0, 4, 1);
        assert_eq!(delta_kind(&s, 0.1).unwrap(), DeltaKind::Interior);
        assert_eq!(delta_kind(&s, 0.5).unwrap(), DeltaKind::NodeAverage);
        assert_eq!(delta_kind(&s, -1.0).unwrap(), DeltaKind::EndpointLeft);
        assert_eq!(delta_kind(&s, 1.0).unwrap(), DeltaKind::EndpointRight);
        assert!(matches!(delta(&s, 1.5), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn symmetry_and_norm() {
        let s = space(2.0, 5, 3);
        let pts = [-2.0, -1.3, -1.2, 0.4, 0.8, 1.99, 2.0];
        for &a in &pts {
            let da = delta(&s, a).unwrap();
            assert_abs_diff_eq!(da.norm().powi(2), da.eval(a), epsilon = 1e-10);
            for &b in &pts {
                let db = delta(&s, b).unwrap();
                assert_abs_diff_eq!(da.eval(b), db.eval(a), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn default_points() {
        let s = space(1.0, 4, 0);
        assert_eq!(default_sigma_points(&s), vec![-0.75, -0.25, 0.25, 0.75]);
        let s = space(1.0, 3, 2);
        let pts = default_sigma_points(&s);
        assert_eq!(pts.len(), s.dim());
        assert!(pts.iter().all(|&x| matches!(s.grid().locate(x), PointClass::InteriorOf(_))));
    }

    #[test]
    fn piecewise_constant_pair() {
        let s = space(1.0, 4, 0);
        let pair = basis_pair(&s, &default_sigma_points(&s)).unwrap();
        // h = 0.5: delta is 1/h = 2 on the cell, sigma is 1
        for i in 0..4 {
            let q = pair.points()[i];
            assert_abs_diff_eq!(pair.delta_function(i).eval(q), 2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(pair.sigma_function(i).eval(q), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(pair.delta_function(i).inner(&pair.sigma_function(i)).unwrap(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn sigma_interpolates() {
        let s = space(1.0, 3, 3);
        let pair = basis_pair(&s, &default_sigma_points(&s)).unwrap();
        for a in 0..pair.points().len() {
            for (b, &qb) in pair.points().iter().enumerate() {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(sigma_value(&pair, a, qb), expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn duality_identity() {
        let s = space(1.0, 4, 2);
        let pair = basis_pair(&s, &default_sigma_points(&s)).unwrap();
        let err = pair.duality_matrix().sub(&Matrix::identity(s.dim())).max_abs();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn independence_failures() {
        let s = space(1.0, 2, 1);
        assert!(matches!(
            basis_pair(&s, &[-0.5, -0.5, 0.2, 0.7]),
            Err(Error::IndependenceFailure(_))
        ));
        assert!(matches!(basis_pair(&s, &[-0.5, -0.4, 0.2]), Err(Error::IndependenceFailure(_))));
        assert!(matches!(
            basis_pair(&s, &[-0.5, -0.4, 0.0, 0.7]),
            Err(Error::IndependenceFailure(_))
        ));
        assert!(matches!(basis_pair(&s, &[-0.5, -0.4, 0.2, 1.7]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn reconstruction() {
        let s = space(1.0, 3, 2);
        let pair = basis_pair(&s, &default_sigma_points(&s)).unwrap();
        let u = Ultrafunction::from_cellwise_fn(&s, |x| if x < 0.2 { x * x - 1.0 } else { 3.0 * x });
        let back = reconstruct_from_values(&pair, &pair.sample(&u)).unwrap();
        assert!(back.max_coeff_diff(&u).unwrap() < 1e-12);
        let zero = reconstruct_from_values(&pair, &vec![0.0; s.dim()]).unwrap();
        assert_eq!(zero, Ultrafunction::zero(&s));
    }

    #[test]
    fn delta_agrees_with_gram_solve() {
        // independent route: solve G c = (e_i(q))_i without assuming orthonormality
        let s = space(1.0, 3, 2);
        let basis = splitted_basis(&s);
        let g = basis.gram();
        let ginv = g.inverse().unwrap();
        for q in [-0.9, -1.0 / 3.0, 0.1, 1.0] {
            let rhs: Vec<f64> = (0..basis.len()).map(|i| basis.element(i).eval(q)).collect();
            let c = ginv.mul_vec(&rhs);
            let other = Ultrafunction::from_coeffs(&s, c).unwrap();
            assert!(other.max_coeff_diff(&delta(&s, q).unwrap()).unwrap() < 1e-10);
        }
    }
}
