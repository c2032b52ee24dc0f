//! Partition of `[-beta, beta]` into cells.
//!
//! Cell `j` is the open interval `(nodes[j], nodes[j + 1])`. Point queries snap
//! inputs lying within `2^-40 * beta` of a node onto that node, since the
//! pointwise conventions at nodes are discontinuous.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::{tol, Scalar};

/// Where a real number sits relative to a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointClass {
    InteriorOf(usize),
    Node(usize),
    Outside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFile<T>", into = "GridFile<T>")]
#[serde(bound = "T: Scalar")]
pub struct Grid<T> {
    beta: T,
    nodes: Vec<T>,
    h_max: T,
}

/// On-disk form: `{"beta": .., "nodes": [..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFile<T> {
    pub beta: T,
    pub nodes: Vec<T>,
}

impl<T: Scalar> TryFrom<GridFile<T>> for Grid<T> {
    type Error = Error;
    fn try_from(f: GridFile<T>) -> Result<Self> {
        Grid::from_nodes(f.beta, f.nodes)
    }
}

impl<T: Scalar> From<Grid<T>> for GridFile<T> {
    fn from(g: Grid<T>) -> Self {
        GridFile { beta: g.beta, nodes: g.nodes }
    }
}

impl<T: Scalar> Grid<T> {
    /// `ell` equal cells on `[-beta, beta]`.
    pub fn build_uniform(beta: T, ell: usize) -> Result<Self> {
        if !(beta > T::zero()) || !beta.is_finite() {
            return invalid(format!("beta must be positive and finite, got {beta}"));
        }
        if ell == 0 {
            return invalid("number of cells must be at least 1");
        }
        let l = T::from_count(ell);
        // beta * (2i - ell) / ell keeps the grid exactly symmetric.
        let nodes = (0..=ell)
            .map(|i| {
                let s = T::from_count(2 * i) - l;
                beta * s / l
            })
            .collect();
        Ok(Self { beta, nodes, h_max: (beta + beta) / l })
    }

    /// Grid through `±beta` and every tag, with gaps no larger than `h_max`.
    ///
    /// Gaps longer than `h_max` are split uniformly into the fewest pieces that
    /// satisfy the bound.
    pub fn build_tagged(beta: T, tags: &[T], h_max: T) -> Result<Self> {
        if !(beta > T::zero()) || !beta.is_finite() {
            return invalid(format!("beta must be positive and finite, got {beta}"));
        }
        if !(h_max > T::zero()) || !h_max.is_finite() {
            return invalid(format!("h_max must be positive and finite, got {h_max}"));
        }
        let snap = tol::node_snap::<T>() * beta;
        let mut anchors = Vec::with_capacity(tags.len() + 2);
        for &t in tags {
            if !t.is_finite() || t <= -beta + snap || t >= beta - snap {
                return invalid(format!("tag {t} is not strictly inside (-{beta}, {beta})"));
            }
            anchors.push(t);
        }
        anchors.push(-beta);
        anchors.push(beta);
        anchors.sort_by(|a, b| a.partial_cmp(b).expect("finite tags"));
        anchors.dedup_by(|b, a| (*b - *a).abs() <= snap);

        let slack = T::one() + T::epsilon() * T::lit(8.0);
        let mut nodes = vec![anchors[0]];
        for w in anchors.windows(2) {
            let (a, b) = (w[0], w[1]);
            let gap = b - a;
            let pieces = if gap <= h_max * slack {
                1
            } else {
                (gap / h_max).ceil().to_usize().unwrap_or(usize::MAX).max(1)
            };
            let n = T::from_count(pieces);
            for k in 1..pieces {
                nodes.push(a + gap * T::from_count(k) / n);
            }
            nodes.push(b);
        }
        Self::checked(beta, nodes, h_max)
    }

    /// Grid from explicit nodes; `h_max` becomes the largest gap.
    pub fn from_nodes(beta: T, nodes: Vec<T>) -> Result<Self> {
        let h_max = nodes.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max);
        Self::checked(beta, nodes, h_max)
    }

    fn checked(beta: T, nodes: Vec<T>, h_max: T) -> Result<Self> {
        if !(beta > T::zero()) || !beta.is_finite() {
            return invalid(format!("beta must be positive and finite, got {beta}"));
        }
        if nodes.len() < 2 {
            return invalid("a grid needs at least one cell");
        }
        if nodes[0] != -beta || nodes[nodes.len() - 1] != beta {
            return invalid("first and last nodes must be -beta and beta");
        }
        let slack = T::one() + T::epsilon() * T::lit(8.0);
        for w in nodes.windows(2) {
            let gap = w[1] - w[0];
            if !(gap > T::zero()) {
                return invalid("nodes must be strictly increasing");
            }
            if gap > h_max * slack {
                return invalid(format!("gap {gap} exceeds h_max {h_max}"));
            }
        }
        Ok(Self { beta, nodes, h_max })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn h_max(&self) -> T {
        self.h_max
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Number of cells, `ell`.
    pub fn num_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Endpoints of cell `j`.
    pub fn cell(&self, j: usize) -> (T, T) {
        (self.nodes[j], self.nodes[j + 1])
    }

    pub fn width(&self, j: usize) -> T {
        self.nodes[j + 1] - self.nodes[j]
    }

    pub fn cells(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    fn snap_distance(&self) -> T {
        tol::node_snap::<T>() * self.beta
    }

    pub fn locate(&self, x: T) -> PointClass {
        if x.is_nan() {
            return PointClass::Outside;
        }
        let snap = self.snap_distance();
        if x < -self.beta - snap || x > self.beta + snap {
            return PointClass::Outside;
        }
        let idx = self.nodes.partition_point(|&g| g < x);
        if idx < self.nodes.len() && (self.nodes[idx] - x).abs() <= snap {
            return PointClass::Node(idx);
        }
        if idx > 0 && (x - self.nodes[idx - 1]).abs() <= snap {
            return PointClass::Node(idx - 1);
        }
        debug_assert!(idx >= 1 && idx < self.nodes.len());
        PointClass::InteriorOf(idx - 1)
    }

    /// Index of the node at `x`, if `x` is (snapped to) a node.
    pub fn node_index(&self, x: T) -> Option<usize> {
        match self.locate(x) {
            PointClass::Node(j) => Some(j),
            _ => None,
        }
    }

    /// Whether every node of `other` is also a node of `self`.
    pub fn contains_nodes_of(&self, other: &Self) -> bool {
        other.nodes.iter().all(|&x| self.node_index(x).is_some())
    }

    /// Grid with every cell halved.
    pub fn dyadic_split(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        nodes.push(self.nodes[0]);
        for (a, b) in self.cells() {
            nodes.push(a + (b - a) * T::lit(0.5));
            nodes.push(b);
        }
        Self { beta: self.beta, nodes, h_max: self.h_max * T::lit(0.5) }
    }

    /// Grid on `[-beta*factor, beta*factor]` keeping all current nodes; the new
    /// outer regions are filled with gaps no larger than `h_max`.
    pub fn grow_beta(&self, factor: T) -> Result<Self> {
        if !(factor >= T::one()) || !factor.is_finite() {
            return invalid(format!("beta growth factor must be >= 1, got {factor}"));
        }
        if factor == T::one() {
            return Ok(self.clone());
        }
        let new_beta = self.beta * factor;
        let extra = new_beta - self.beta;
        let pieces = (extra / self.h_max).ceil().to_usize().unwrap_or(1).max(1);
        let n = T::from_count(pieces);
        let mut nodes = Vec::with_capacity(self.nodes.len() + 2 * pieces);
        nodes.push(-new_beta);
        for k in 1..pieces {
            nodes.push(-new_beta + extra * T::from_count(k) / n);
        }
        nodes.extend_from_slice(&self.nodes);
        for k in 1..pieces {
            nodes.push(self.beta + extra * T::from_count(k) / n);
        }
        nodes.push(new_beta);
        Self::checked(new_beta, nodes, self.h_max)
    }
}
