//! Refinement ladders: finite sequences of stages that grow monotonically, with
//! observables evaluated at every stage and convergence orders read off the
//! error sequence.
//!
//! A ladder is only a finite shadow of the limit process. It reports how a
//! quantity behaves along a few refinements and makes no claim about the limit
//! itself.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::space::Space;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Stage<T> {
    pub grid: Grid<T>,
    pub degree: usize,
    pub index: usize,
}

impl<T: Scalar> Stage<T> {
    pub fn new(grid: Grid<T>, degree: usize) -> Self {
        Self { grid, degree, index: 0 }
    }

    pub fn space(&self) -> Space<T> {
        Space::build(self.grid.clone(), self.degree)
    }

    /// Whether `next` may follow `self` on a ladder.
    pub fn precedes(&self, next: &Self) -> bool {
        next.grid.contains_nodes_of(&self.grid)
            && next.grid.beta() >= self.grid.beta()
            && next.grid.h_max() <= self.grid.h_max()
            && next.degree >= self.degree
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum RefinePolicy<T> {
    DyadicSplit,
    BetaGrowth(T),
    DegreeRaise,
}

pub fn refine<T: Scalar>(stage: &Stage<T>, policy: RefinePolicy<T>) -> Result<Stage<T>> {
    let (grid, degree) = match policy {
        RefinePolicy::DyadicSplit => (stage.grid.dyadic_split(), stage.degree),
        RefinePolicy::BetaGrowth(factor) => (stage.grid.grow_beta(factor)?, stage.degree),
        RefinePolicy::DegreeRaise => (stage.grid.clone(), stage.degree + 1),
    };
    Ok(Stage { grid, degree, index: stage.index + 1 })
}

/// Procedure producing one value per stage.
pub type Observable<T> = Arc<dyn Fn(&Stage<T>) -> Result<T> + Send + Sync>;

/// Stages in refinement order plus named observables.
#[derive(Clone)]
pub struct Ladder<T> {
    stages: Vec<Stage<T>>,
    observables: BTreeMap<String, Observable<T>>,
}

impl<T: Scalar> fmt::Debug for Ladder<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ladder")
            .field("stages", &self.stages)
            .field("observables", &self.observables.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl<T: Scalar> Ladder<T> {
    /// `levels` stages starting at `first`, each obtained by `policy`.
    pub fn build(first: Stage<T>, policy: RefinePolicy<T>, levels: usize) -> Result<Self> {
        if levels == 0 {
            return invalid("a ladder needs at least one stage");
        }
        let mut stages = vec![Stage { index: 0, ..first }];
        for _ in 1..levels {
            let next = refine(stages.last().expect("nonempty"), policy)?;
            stages.push(next);
        }
        Ok(Self { stages, observables: BTreeMap::new() })
    }

    /// Ladder from explicit stages, which must grow monotonically.
    pub fn from_stages(stages: Vec<Stage<T>>) -> Result<Self> {
        if stages.is_empty() {
            return invalid("a ladder needs at least one stage");
        }
        for (i, w) in stages.windows(2).enumerate() {
            if !w[0].precedes(&w[1]) {
                return invalid(format!("stage {} does not refine stage {i}", i + 1));
            }
        }
        let stages = stages.into_iter().enumerate().map(|(index, s)| Stage { index, ..s }).collect();
        Ok(Self { stages, observables: BTreeMap::new() })
    }

    pub fn stages(&self) -> &[Stage<T>] {
        &self.stages
    }

    pub fn register(&mut self, label: impl Into<String>, f: impl Fn(&Stage<T>) -> Result<T> + Send + Sync + 'static) {
        self.observables.insert(label.into(), Arc::new(f));
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.observables.keys().map(String::as_str)
    }

    /// Values of an observable, stage by stage (stages evaluated in parallel).
    pub fn evaluate(&self, label: &str) -> Result<Vec<T>> {
        let f = self
            .observables
            .get(label)
            .ok_or_else(|| Error::InvalidArgument(format!("no observable named {label:?}")))?;
        self.stages.par_iter().map(|s| f(s)).collect()
    }

    /// Values and convergence orders of an observable.
    ///
    /// Errors are taken against `target` when given, otherwise against the
    /// finest stage's value.
    pub fn observe(&self, label: &str, target: Option<T>) -> Result<Observation<T>> {
        if self.stages.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "order estimates need at least 3 stages, the ladder has {}",
                self.stages.len()
            )));
        }
        let values = self.evaluate(label)?;
        Ok(Observation::from_values(label, &values, target))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow<T> {
    pub index: usize,
    pub value: T,
    pub error: Option<T>,
    /// `log2(error[i-1] / error[i])`.
    pub order: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationFlag {
    /// Fewer than two nonzero errors; no order can be formed.
    OrderUndefined,
    /// Some error grew from one stage to the next.
    NonMonotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub label: String,
    pub target: Option<T>,
    pub rows: Vec<ObservationRow<T>>,
    /// Least-squares slope of `-log2(error)` against the stage index.
    pub fitted_order: Option<T>,
    pub flags: Vec<ObservationFlag>,
}

impl<T: Scalar> Observation<T> {
    pub fn from_values(label: &str, values: &[T], target: Option<T>) -> Self {
        let reference = target.or_else(|| values.last().copied());
        let counted = if target.is_some() { values.len() } else { values.len().saturating_sub(1) };
        let errors: Vec<Option<T>> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| if i < counted { reference.map(|r| (v - r).abs()) } else { None })
            .collect();

        let mut rows = Vec::with_capacity(values.len());
        for (i, &value) in values.iter().enumerate() {
            let order = match (i.checked_sub(1).and_then(|j| errors[j]), errors[i]) {
                (Some(prev), Some(cur)) if prev > T::zero() && cur > T::zero() => Some((prev / cur).log2()),
                _ => None,
            };
            rows.push(ObservationRow { index: i, value, error: errors[i], order });
        }

        let positive: Vec<(T, T)> = errors
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.filter(|&e| e > T::zero()).map(|e| (T::from_count(i), e.log2())))
            .collect();
        let fitted_order = least_squares_slope(&positive).map(|s| -s);

        let mut flags = Vec::new();
        if fitted_order.is_none() {
            flags.push(ObservationFlag::OrderUndefined);
        }
        if errors.windows(2).any(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b > a)) {
            flags.push(ObservationFlag::NonMonotone);
        }
        Self { label: label.to_string(), target, rows, fitted_order, flags }
    }

    pub fn order_defined(&self) -> bool {
        !self.flags.contains(&ObservationFlag::OrderUndefined)
    }

    /// Order between the last two stages that have one.
    pub fn last_order(&self) -> Option<T> {
        self.rows.iter().rev().find_map(|r| r.order)
    }

    /// `level,value,error,order` with empty fields where undefined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,value,error,order\n");
        let opt = |v: Option<T>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.index, r.value, opt(r.error), opt(r.order));
        }
        out
    }
}

fn least_squares_slope<T: Scalar>(points: &[(T, T)]) -> Option<T> {
    if points.len() < 2 {
        return None;
    }
    let n = T::from_count(points.len());
    let mx = points.iter().map(|p| p.0).sum::<T>() / n;
    let my = points.iter().map(|p| p.1).sum::<T>() / n;
    let sxx: T = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == T::zero() {
        return None;
    }
    Some(sxy / sxx)
}
