//! Gauss-Legendre rules and an adaptive vector-valued integrator.

use std::cell::Cell;

use crate::{tol, Scalar};

/// Gauss-Legendre rule with `n` points on the reference interval `[-1, 1]`.
///
/// Exact for polynomials of degree `2n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss rule needs at least one point");
        let (nodes, weights) = legendre_nodes_weights(n);
        Self {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        }
    }

    /// Number of points needed to integrate degree `deg` exactly.
    pub fn points_for_degree(deg: usize) -> usize {
        deg / 2 + 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Abscissae on `[-1, 1]`, ascending.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Abscissae and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, w * half))
    }

    pub fn integrate<F: Fn(T) -> T>(&self, a: T, b: T, f: F) -> T {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Integrates a vector-valued function; `f(x, out)` fills `out`.
    pub fn integrate_vec<F: Fn(T, &mut [T])>(&self, a: T, b: T, n: usize, f: &F) -> Vec<T> {
        let mut acc = vec![T::zero(); n];
        let mut buf = vec![T::zero(); n];
        for (x, w) in self.mapped(a, b) {
            f(x, &mut buf);
            for (s, v) in acc.iter_mut().zip(&buf) {
                *s = *s + w * *v;
            }
        }
        acc
    }
}

/// Newton iteration on the three-term recurrence, in `f64`.
fn legendre_nodes_weights(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Why an adaptive integration stopped without meeting its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub enum AdaptiveFailure {
    BisectionDepth,
    GeometricSteps,
    NonFinite,
    Budget,
}

impl std::fmt::Display for AdaptiveFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::BisectionDepth => write!(f, "bisection depth limit reached"),
            Self::GeometricSteps => write!(f, "geometric subdivision toward a singular point did not settle"),
            Self::NonFinite => write!(f, "integrand produced a non-finite value"),
            Self::Budget => write!(f, "subinterval budget exhausted"),
        }
    }
}

/// Adaptive Gauss integration of vector-valued integrands.
///
/// Regular subintervals are bisected until the two halves agree with the
/// whole. Subintervals ending at a declared singular point are cut
/// geometrically (ratio 1/2) toward it; the partial sums are accelerated with
/// a geometric tail estimate and accepted once the accelerated total settles.
/// The integrand is never evaluated at a singular point.
#[derive(Debug, Clone)]
pub struct Adaptive<T> {
    rule: GaussLegendre<T>,
    tol: T,
    max_subdivisions: usize,
}

impl<T: Scalar> Adaptive<T> {
    /// Bisection depth and number of geometric pieces are both capped at this.
    pub const MAX_SUBDIVISIONS: usize = 60;
    /// Cap on the number of subintervals visited by one call.
    pub const MAX_INTERVALS: usize = 20_000;

    pub fn new(points: usize) -> Self {
        Self {
            rule: GaussLegendre::new(points),
            tol: tol::quadrature(),
            max_subdivisions: Self::MAX_SUBDIVISIONS,
        }
    }

    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn tolerance(&self) -> T {
        self.tol
    }

    pub fn integrate<F: Fn(T, &mut [T])>(
        &self,
        a: T,
        b: T,
        singular: &[T],
        n: usize,
        f: &F,
    ) -> Result<Vec<T>, AdaptiveFailure> {
        let width = (b - a).abs();
        let close = T::epsilon() * T::lit(16.0) * a.abs().max(b.abs()).max(T::one());
        let mut cuts: Vec<T> = singular
            .iter()
            .copied()
            .filter(|&s| s > a + close && s < b - close)
            .collect();
        cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite singular points"));
        cuts.dedup();
        let is_singular = |x: T| singular.iter().any(|&s| (s - x).abs() <= close);

        let mut breaks = Vec::with_capacity(cuts.len() + 2);
        breaks.push(a);
        breaks.extend(cuts);
        breaks.push(b);

        let mut total = vec![T::zero(); n];
        if width == T::zero() {
            return Ok(total);
        }
        let visited = Cell::new(0);
        let f = &Counted { f, visited: &visited };
        for pair in breaks.windows(2) {
            let (l, r) = (pair[0], pair[1]);
            let part = match (is_singular(l), is_singular(r)) {
                (false, false) => self.bisect_root(l, r, n, f)?,
                (true, false) => self.geometric(l, r, n, f)?,
                (false, true) => self.geometric(r, l, n, f)?,
                (true, true) => {
                    let m = (l + r) * T::lit(0.5);
                    let mut left = self.geometric(l, m, n, f)?;
                    let right = self.geometric(r, m, n, f)?;
                    add_into(&mut left, &right);
                    left
                }
            };
            add_into(&mut total, &part);
        }
        Ok(total)
    }

    fn bisect_root<F: Fn(T, &mut [T])>(&self, l: T, r: T, n: usize, f: &Counted<'_, F>) -> Result<Vec<T>, AdaptiveFailure> {
        f.tick::<T>()?;
        let whole = self.rule.integrate_vec(l, r, n, f.f);
        self.bisect(l, r, whole, 0, n, f)
    }

    fn bisect<F: Fn(T, &mut [T])>(
        &self,
        l: T,
        r: T,
        whole: Vec<T>,
        depth: usize,
        n: usize,
        f: &Counted<'_, F>,
    ) -> Result<Vec<T>, AdaptiveFailure> {
        f.tick::<T>()?;
        let m = (l + r) * T::lit(0.5);
        let left = self.rule.integrate_vec(l, m, n, f.f);
        let right = self.rule.integrate_vec(m, r, n, f.f);
        let mut sum = left.clone();
        add_into(&mut sum, &right);
        if sum.iter().any(|v| !v.is_finite()) {
            return Err(AdaptiveFailure::NonFinite);
        }
        let err = max_abs_diff(&sum, &whole);
        // absolute part shrinks with the subinterval so leaf errors sum to `tol`
        let share = T::lit(0.5).powi(depth as i32);
        let scale = max_abs(&sum).max(share);
        if err <= self.tol * scale {
            return Ok(sum);
        }
        if depth + 1 >= self.max_subdivisions {
            return Err(AdaptiveFailure::BisectionDepth);
        }
        let mut out = self.bisect(l, m, left, depth + 1, n, f)?;
        let rest = self.bisect(m, r, right, depth + 1, n, f)?;
        add_into(&mut out, &rest);
        Ok(out)
    }

    /// Integrates over the segment between `s` (singular) and `far`.
    fn geometric<F: Fn(T, &mut [T])>(&self, s: T, far: T, n: usize, f: &Counted<'_, F>) -> Result<Vec<T>, AdaptiveFailure> {
        let half = T::lit(0.5);
        let mut partial = vec![T::zero(); n];
        let mut prev_inc: Option<Vec<T>> = None;
        let mut prev_total: Option<Vec<T>> = None;
        let mut outer = far;
        for _ in 0..self.max_subdivisions {
            let inner = s + (outer - s) * half;
            let (lo, hi) = if inner < outer { (inner, outer) } else { (outer, inner) };
            let inc = self.bisect_root(lo, hi, n, f)?;
            add_into(&mut partial, &inc);

            let mut total = partial.clone();
            if let Some(prev) = &prev_inc {
                for ((t, &d), &p) in total.iter_mut().zip(&inc).zip(prev) {
                    *t = *t + geometric_tail(d, p);
                }
            }
            if let Some(pt) = &prev_total {
                let scale = max_abs(&total).max(T::one());
                if max_abs_diff(&total, pt) <= self.tol * scale && max_abs(&inc) <= scale {
                    return Ok(total);
                }
            }
            prev_total = Some(total);
            prev_inc = Some(inc);
            outer = inner;
        }
        Err(AdaptiveFailure::GeometricSteps)
    }
}

struct Counted<'a, F> {
    f: &'a F,
    visited: &'a Cell<usize>,
}

impl<F> Counted<'_, F> {
    fn tick<T: Scalar>(&self) -> Result<(), AdaptiveFailure> {
        let v = self.visited.get() + 1;
        self.visited.set(v);
        if v > Adaptive::<T>::MAX_INTERVALS {
            return Err(AdaptiveFailure::Budget);
        }
        Ok(())
    }
}

/// Tail of a geometric series whose last two terms are `prev`, `last`.
fn geometric_tail<T: Scalar>(last: T, prev: T) -> T {
    if prev == T::zero() || last == T::zero() {
        return T::zero();
    }
    let q = last / prev;
    if q <= T::zero() || q >= T::lit(0.99) {
        return T::zero();
    }
    last * q / (T::one() - q)
}

fn add_into<T: Scalar>(acc: &mut [T], v: &[T]) {
    for (a, &b) in acc.iter_mut().zip(v) {
        *a = *a + b;
    }
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |m, (x, y)| m.max((*x - *y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_interval_length() {
        for n in 1..=30 {
            let g = GaussLegendre::<f64>::new(n);
            let s: f64 = g.weights().iter().sum();
            assert_abs_diff_eq!(s, 2.0, epsilon = 1e-13);
            assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn exact_for_degree_2n_minus_1() {
        for n in 1..=12 {
            let g = GaussLegendre::<f64>::new(n);
            for d in 0..2 * n {
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                let got = g.integrate(-1.0, 1.0, |x| x.powi(d as i32));
                assert_abs_diff_eq!(got, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn three_point_rule_matches_closed_form() {
        let g = GaussLegendre::<f64>::new(3);
        let r = (0.6f64).sqrt();
        assert_abs_diff_eq!(g.nodes()[0], -r, epsilon = 1e-15);
        assert_abs_diff_eq!(g.nodes()[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.weights()[0], 5.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.weights()[1], 8.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn adaptive_handles_kink() {
        let a = Adaptive::<f64>::new(12);
        let v = a.integrate(-1.0, 2.0, &[], 1, &|x, out: &mut [f64]| out[0] = (x - 0.3).abs()).unwrap();
        let exact = 0.5 * 1.3 * 1.3 + 0.5 * 1.7 * 1.7;
        assert_abs_diff_eq!(v[0], exact, epsilon = 1e-11);
    }

    #[test]
    fn adaptive_inverse_sqrt_singularity() {
        let a = Adaptive::<f64>::new(12);
        // interior singular point, both sides
        let v = a
            .integrate(-1.0, 1.0, &[0.0], 2, &|x, out: &mut [f64]| {
                let s = x.abs().powf(-0.5);
                out[0] = s;
                out[1] = s * x;
            })
            .unwrap();
        assert_abs_diff_eq!(v[0], 4.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-10);
        // singular endpoint
        let w = a
            .integrate(0.0, 0.25, &[0.0], 1, &|x, out: &mut [f64]| out[0] = x.powf(-0.5))
            .unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn adaptive_reports_nonconvergence() {
        let a = Adaptive::<f64>::new(4);
        // a non-integrable singularity that is not declared
        let r = a.integrate(0.0, 1.0, &[], 1, &|x, out: &mut [f64]| out[0] = 1.0 / x);
        assert!(r.is_err());
    }
}
