//! The generalized derivative `D`, the cellwise derivative `D2`, definite
//! integrals and the integration-by-parts identities they satisfy.
//!
//! `D u` is the cellwise classical derivative plus, at every interior node,
//! `(u^+ - u^-) * delta` with the node-averaged delta. The cellwise part needs
//! no projection: the derivative of a degree `p` polynomial already lies in
//! the cell space. `D2` drops the jump terms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::space::{dot, Side, Space, Ultrafunction};
use crate::{tol, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DerivKind {
    D,
    D2,
}

impl std::str::FromStr for DerivKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "D" | "d" => Ok(Self::D),
            "D2" | "d2" => Ok(Self::D2),
            other => invalid(format!("unknown derivative kind {other:?} (expected D or D2)")),
        }
    }
}

/// Jump correction at an interior node: kernel values of the cells on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTerm<T> {
    pub node: usize,
    /// `e_{node-1,k}(gamma_node^-)`.
    pub left: Vec<T>,
    /// `e_{node,k}(gamma_node^+)`.
    pub right: Vec<T>,
}

/// A derivative operator in splitted-basis coordinates.
///
/// Stored as one `(p+1) x (p+1)` block per cell plus the jump terms; the dense
/// matrix is assembled on request.
#[derive(Debug, Clone)]
pub struct DerivOperator<T: Scalar> {
    kind: DerivKind,
    space: Space<T>,
    blocks: Vec<Matrix<T>>,
    jumps: Vec<JumpTerm<T>>,
}

fn cell_blocks<T: Scalar>(space: &Space<T>) -> Vec<Matrix<T>> {
    let reference = space.reference().derivative_matrix();
    (0..space.num_cells())
        .into_par_iter()
        .map(|j| {
            let s = T::lit(2.0) / space.grid().width(j);
            Matrix::from_fn(reference.rows(), reference.cols(), |m, k| s * reference[(m, k)])
        })
        .collect()
}

pub fn build_d<T: Scalar>(space: &Space<T>) -> DerivOperator<T> {
    let jumps = (1..space.num_cells())
        .map(|node| JumpTerm {
            node,
            left: space.endpoint_values(node - 1, Side::Minus),
            right: space.endpoint_values(node, Side::Plus),
        })
        .collect();
    DerivOperator { kind: DerivKind::D, space: space.clone(), blocks: cell_blocks(space), jumps }
}

pub fn build_d2<T: Scalar>(space: &Space<T>) -> DerivOperator<T> {
    DerivOperator { kind: DerivKind::D2, space: space.clone(), blocks: cell_blocks(space), jumps: Vec::new() }
}

pub fn build<T: Scalar>(space: &Space<T>, kind: DerivKind) -> DerivOperator<T> {
    match kind {
        DerivKind::D => build_d(space),
        DerivKind::D2 => build_d2(space),
    }
}

impl<T: Scalar> DerivOperator<T> {
    pub fn kind(&self) -> DerivKind {
        self.kind
    }

    pub fn space(&self) -> &Space<T> {
        &self.space
    }

    pub fn jumps(&self) -> &[JumpTerm<T>] {
        &self.jumps
    }

    pub fn apply(&self, u: &Ultrafunction<T>) -> Result<Ultrafunction<T>> {
        if u.space() != &self.space {
            return invalid("ultrafunction belongs to a different space");
        }
        let mut out: Vec<T> = (0..self.space.num_cells())
            .flat_map(|j| self.blocks[j].mul_vec(u.block(j)))
            .collect();
        let half = T::lit(0.5);
        for jt in &self.jumps {
            let jump = dot(&jt.right, u.block(jt.node)) - dot(&jt.left, u.block(jt.node - 1));
            let w = jump * half;
            for (o, &l) in out[self.space.block_range(jt.node - 1)].iter_mut().zip(&jt.left) {
                *o = *o + w * l;
            }
            for (o, &r) in out[self.space.block_range(jt.node)].iter_mut().zip(&jt.right) {
                *o = *o + w * r;
            }
        }
        Ultrafunction::from_coeffs(&self.space, out)
    }

    /// `apply` iterated `k` times.
    pub fn apply_n(&self, u: &Ultrafunction<T>, k: usize) -> Result<Ultrafunction<T>> {
        let mut v = u.clone();
        for _ in 0..k {
            v = self.apply(&v)?;
        }
        Ok(v)
    }

    /// Block-diagonal cellwise derivative, densely.
    pub fn cellwise_matrix(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.space.dim(), self.space.dim());
        for (j, b) in self.blocks.iter().enumerate() {
            let r = self.space.block_range(j);
            for (bi, i) in r.clone().enumerate() {
                for (bk, k) in r.clone().enumerate() {
                    m[(i, k)] = b[(bi, bk)];
                }
            }
        }
        m
    }

    /// `sum_j delta_{gamma_j} (u^+(gamma_j) - u^-(gamma_j))` as a dense matrix;
    /// zero for `D2`.
    pub fn jump_correction_matrix(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.space.dim(), self.space.dim());
        let half = T::lit(0.5);
        for jt in &self.jumps {
            let lr = self.space.block_range(jt.node - 1);
            let rr = self.space.block_range(jt.node);
            let delta: Vec<(usize, T)> = lr
                .clone()
                .zip(&jt.left)
                .chain(rr.clone().zip(&jt.right))
                .map(|(i, &v)| (i, v * half))
                .collect();
            let functional: Vec<(usize, T)> =
                rr.zip(&jt.right).map(|(i, &v)| (i, v)).chain(lr.zip(&jt.left).map(|(i, &v)| (i, -v))).collect();
            for &(i, d) in &delta {
                for &(k, a) in &functional {
                    m[(i, k)] = m[(i, k)] + d * a;
                }
            }
        }
        m
    }

    /// The full operator as a dense `dim x dim` matrix.
    pub fn matrix(&self) -> Matrix<T> {
        let mut m = self.cellwise_matrix();
        if !self.jumps.is_empty() {
            let c = self.jump_correction_matrix();
            for i in 0..m.rows() {
                for k in 0..m.cols() {
                    m[(i, k)] = m[(i, k)] + c[(i, k)];
                }
            }
        }
        m
    }
}

fn node_of<T: Scalar>(space: &Space<T>, x: T) -> Result<usize> {
    space
        .grid()
        .node_index(x)
        .ok_or_else(|| Error::InvalidArgument(format!("{x} is not a node of the grid")))
}

/// `integral of u` over `[a, b]`; `a` and `b` must be nodes with `a <= b`.
pub fn integrate<T: Scalar>(u: &Ultrafunction<T>, a: T, b: T) -> Result<T> {
    let space = u.space();
    let (n, m) = (node_of(space, a)?, node_of(space, b)?);
    if n > m {
        return invalid(format!("integration bounds out of order: {a} > {b}"));
    }
    integrate_nodes(u, n, m)
}

/// `integral of u` over `[gamma_n, gamma_m]`.
pub fn integrate_nodes<T: Scalar>(u: &Ultrafunction<T>, n: usize, m: usize) -> Result<T> {
    let space = u.space();
    if n > m || m > space.num_cells() {
        return invalid(format!("node range {n}..{m} is not ordered within the grid"));
    }
    let mut vals = vec![T::zero(); space.local_dim()];
    let mut total = T::zero();
    for j in n..m {
        let (a, b) = space.grid().cell(j);
        for (x, w) in space.rule().mapped(a, b) {
            space.basis_values(j, x, &mut vals);
            total = total + w * dot(u.block(j), &vals);
        }
    }
    Ok(total)
}

/// Both sides of an identity and whether they agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub defect: T,
    pub tolerance: T,
}

impl<T: Scalar> IdentityCheck<T> {
    pub fn new(lhs: T, rhs: T, scale: T) -> Self {
        Self { lhs, rhs, defect: (lhs - rhs).abs(), tolerance: tol::identity::<T>() * (T::one() + scale) }
    }

    pub fn holds(&self) -> bool {
        self.defect <= self.tolerance
    }
}

fn require_kind<T: Scalar>(op: &DerivOperator<T>, kind: DerivKind) -> Result<()> {
    if op.kind != kind {
        return invalid(format!("this identity needs the {kind:?} operator, got {:?}", op.kind));
    }
    Ok(())
}

fn check_range<T: Scalar>(space: &Space<T>, n: usize, m: usize) -> Result<()> {
    if n > m || m > space.num_cells() {
        return invalid(format!("node range {n}..{m} is not ordered within the grid"));
    }
    Ok(())
}

/// `integral Du v + integral u Dv` against `u(beta)v(beta) - u(-beta)v(-beta)`.
pub fn ibp_defect<T: Scalar>(d: &DerivOperator<T>, u: &Ultrafunction<T>, v: &Ultrafunction<T>) -> Result<IdentityCheck<T>> {
    require_kind(d, DerivKind::D)?;
    let beta = d.space.grid().beta();
    let lhs = d.apply(u)?.inner(v)? + u.inner(&d.apply(v)?)?;
    let rhs = u.eval(beta) * v.eval(beta) - u.eval(-beta) * v.eval(-beta);
    Ok(IdentityCheck::new(lhs, rhs, u.norm() * v.norm()))
}

/// IBP on `[gamma_n, gamma_m]` for members continuous at every interior node
/// of that closed range.
pub fn ibp_c1<T: Scalar>(
    d: &DerivOperator<T>,
    u: &Ultrafunction<T>,
    v: &Ultrafunction<T>,
    n: usize,
    m: usize,
) -> Result<IdentityCheck<T>> {
    require_kind(d, DerivKind::D)?;
    check_range(&d.space, n, m)?;
    let ell = d.space.num_cells();
    for node in n.max(1)..=m.min(ell - 1) {
        for (name, w) in [("u", u), ("v", v)] {
            let jump = w.jump(node)?;
            let scale = T::one() + w.eval_side(node, Side::Plus)?.abs();
            if jump.abs() > tol::continuity::<T>() * scale {
                return Err(Error::PreconditionViolation(format!(
                    "{name} jumps by {jump} at node {node}; the identity needs continuity"
                )));
            }
        }
    }
    let lhs = d.apply(u)?.inner_on(v, n, m)? + u.inner_on(&d.apply(v)?, n, m)?;
    let rhs = if n == m {
        T::zero()
    } else {
        u.eval_side(m, Side::Minus)? * v.eval_side(m, Side::Minus)? - u.eval_side(n, Side::Plus)? * v.eval_side(n, Side::Plus)?
    };
    Ok(IdentityCheck::new(lhs, rhs, u.norm() * v.norm()))
}

/// IBP for `D2` on `[gamma_n, gamma_m]` with one boundary pair per cell.
pub fn ibp_piecewise<T: Scalar>(
    d2: &DerivOperator<T>,
    u: &Ultrafunction<T>,
    v: &Ultrafunction<T>,
    n: usize,
    m: usize,
) -> Result<IdentityCheck<T>> {
    require_kind(d2, DerivKind::D2)?;
    check_range(&d2.space, n, m)?;
    let lhs = d2.apply(u)?.inner_on(v, n, m)? + u.inner_on(&d2.apply(v)?, n, m)?;
    let mut rhs = T::zero();
    for i in n..m {
        rhs = rhs + u.eval_side(i + 1, Side::Minus)? * v.eval_side(i + 1, Side::Minus)?
            - u.eval_side(i, Side::Plus)? * v.eval_side(i, Side::Plus)?;
    }
    Ok(IdentityCheck::new(lhs, rhs, u.norm() * v.norm()))
}

/// `integral_{gamma_n}^{gamma_m} D2 u` against the sum of per-cell increments.
pub fn ftc_piecewise<T: Scalar>(d2: &DerivOperator<T>, u: &Ultrafunction<T>, n: usize, m: usize) -> Result<IdentityCheck<T>> {
    require_kind(d2, DerivKind::D2)?;
    check_range(&d2.space, n, m)?;
    let lhs = integrate_nodes(&d2.apply(u)?, n, m)?;
    let mut rhs = T::zero();
    for i in n..m {
        rhs = rhs + u.eval_side(i + 1, Side::Minus)? - u.eval_side(i, Side::Plus)?;
    }
    Ok(IdentityCheck::new(lhs, rhs, u.norm()))
}

/// `integral_{gamma_n}^{gamma_m} D u` against `u(gamma_m) - u(gamma_n)`.
pub fn ftc<T: Scalar>(d: &DerivOperator<T>, u: &Ultrafunction<T>, n: usize, m: usize) -> Result<IdentityCheck<T>> {
    require_kind(d, DerivKind::D)?;
    check_range(&d.space, n, m)?;
    let nodes = d.space.grid().nodes();
    let lhs = integrate_nodes(&d.apply(u)?, n, m)?;
    let rhs = u.eval(nodes[m]) - u.eval(nodes[n]);
    Ok(IdentityCheck::new(lhs, rhs, u.norm()))
}

/// The two-point IBP formula with node-average values; it is not an identity
/// for discontinuous members.
pub fn naive_ibp<T: Scalar>(
    d: &DerivOperator<T>,
    u: &Ultrafunction<T>,
    v: &Ultrafunction<T>,
    n: usize,
    m: usize,
) -> Result<IdentityCheck<T>> {
    require_kind(d, DerivKind::D)?;
    check_range(&d.space, n, m)?;
    let nodes = d.space.grid().nodes();
    let lhs = d.apply(u)?.inner_on(v, n, m)? + u.inner_on(&d.apply(v)?, n, m)?;
    let rhs = u.eval(nodes[m]) * v.eval(nodes[m]) - u.eval(nodes[n]) * v.eval(nodes[n]);
    Ok(IdentityCheck::new(lhs, rhs, u.norm() * v.norm()))
}
