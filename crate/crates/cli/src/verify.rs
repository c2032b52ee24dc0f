//! Randomized identity suites behind `ultracalc verify`.
//!
//! Every suite draws from its own ChaCha stream of the run seed, so a suite's
//! results do not depend on which other suites run.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ultracalc_core::basis::{basis_pair, default_sigma_points, delta, reconstruct_from_values};
use ultracalc_core::calculus::{build_d, build_d2, ftc, ftc_piecewise, ibp_defect, ibp_piecewise, naive_ibp};
use ultracalc_core::distributions::{pair_exact_member, DistributionSpec};
use ultracalc_core::grid::PointClass;
use ultracalc_core::projection::{integrate_product, l2_distance, tilde, FunctionHandle};
use ultracalc_core::{tol, Result, Space, Ultrafunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Delta,
    Symmetry,
    Sigma,
    Locality,
    Ibp,
    IbpNaive,
    Ftc,
    Piecewise,
    Projection,
    Distributions,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Delta,
        Suite::Symmetry,
        Suite::Sigma,
        Suite::Locality,
        Suite::Ibp,
        Suite::IbpNaive,
        Suite::Ftc,
        Suite::Piecewise,
        Suite::Projection,
        Suite::Distributions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Delta => "delta",
            Suite::Symmetry => "symmetry",
            Suite::Sigma => "sigma",
            Suite::Locality => "locality",
            Suite::Ibp => "ibp",
            Suite::IbpNaive => "ibp-naive",
            Suite::Ftc => "ftc",
            Suite::Piecewise => "piecewise",
            Suite::Projection => "projection",
            Suite::Distributions => "distributions",
        }
    }

    /// Suites selected by a `--suite` value; `all` selects every suite.
    pub fn select(name: &str) -> Option<Vec<Suite>> {
        match name {
            "all" => Some(Self::ALL.to_vec()),
            // the naive form is the control that accompanies the identity
            "ibp" => Some(vec![Suite::Ibp, Suite::IbpNaive]),
            _ => Self::ALL.iter().find(|s| s.name() == name).map(|&s| vec![s]),
        }
    }

    fn stream(self) -> u64 {
        Self::ALL.iter().position(|&s| s == self).expect("listed") as u64
    }
}

/// One suite's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: usize,
    pub failures: usize,
    /// Largest defect seen; for the naive control this is the smallest.
    pub defect: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub beta: f64,
    pub cells: usize,
    pub degree: usize,
    pub seed: u64,
    pub trials: usize,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "space: beta={} cells={} degree={}  seed={} trials={}",
            self.beta, self.cells, self.degree, self.seed, self.trials
        );
        let _ = writeln!(out, "{:<14} {:>7} {:>9}  {:<24} status", "suite", "checks", "failures", "defect");
        for s in &self.suites {
            let _ = writeln!(
                out,
                "{:<14} {:>7} {:>9}  {:<24} {}",
                s.suite,
                s.checks,
                s.failures,
                format!("{:e}", s.defect),
                if s.passed { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(out, "result: {}", if self.passed { "pass" } else { "FAIL" });
        out
    }
}

struct Tally {
    checks: usize,
    failures: usize,
    defect: f64,
}

impl Tally {
    fn new() -> Self {
        Self { checks: 0, failures: 0, defect: 0.0 }
    }

    fn record(&mut self, defect: f64, tolerance: f64) {
        self.checks += 1;
        // NaN defects count as failures
        if !(defect <= tolerance) {
            self.failures += 1;
        }
        self.defect = if defect.is_nan() { f64::NAN } else { self.defect.max(defect) };
    }
}

pub fn run(space: &Space, suites: &[Suite], trials: usize, seed: u64) -> Result<Report> {
    let mut reports = Vec::with_capacity(suites.len());
    for &suite in suites {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(suite.stream());
        let report = match suite {
            Suite::IbpNaive => naive_control(space)?,
            _ => {
                let t = run_suite(space, suite, trials, &mut rng)?;
                SuiteReport {
                    suite: suite.name().into(),
                    checks: t.checks,
                    failures: t.failures,
                    defect: t.defect,
                    passed: t.failures == 0,
                }
            }
        };
        reports.push(report);
    }
    let grid = space.grid();
    Ok(Report {
        beta: grid.beta(),
        cells: grid.num_cells(),
        degree: space.degree(),
        seed,
        trials,
        passed: reports.iter().all(|r| r.passed),
        suites: reports,
    })
}

pub fn random_member(space: &Space, rng: &mut ChaCha8Rng) -> Ultrafunction {
    let coeffs = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Ultrafunction::from_coeffs(space, coeffs).expect("dimension matches")
}

/// A point of `[-beta, beta]`; one draw in five is a grid node.
pub fn random_point(space: &Space, rng: &mut ChaCha8Rng) -> f64 {
    let nodes = space.grid().nodes();
    if rng.gen_range(0..5) == 0 {
        nodes[rng.gen_range(0..nodes.len())]
    } else {
        let beta = space.grid().beta();
        rng.gen_range(-beta..beta)
    }
}

/// `a sin(b x + c) + d exp(e x) + g |x - t|`.
pub fn random_function(space: &Space, rng: &mut ChaCha8Rng) -> FunctionHandle<f64> {
    let beta = space.grid().beta();
    let (a, b, c) = (rng.gen_range(-2.0..2.0), rng.gen_range(-4.0..4.0), rng.gen_range(-1.0..1.0));
    let (d, e) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let (g, t) = (rng.gen_range(-1.0..1.0), rng.gen_range(-beta..beta));
    FunctionHandle::new(move |x: f64| a * (b * x + c).sin() + d * (e * x).exp() + g * (x - t).abs())
}

/// Random member vanishing on the outer `margin` cells at each end.
pub fn random_interior_member(space: &Space, margin: usize, rng: &mut ChaCha8Rng) -> Ultrafunction {
    let (ell, n) = (space.num_cells(), space.local_dim());
    let coeffs = (0..space.dim())
        .map(|i| {
            let j = i / n;
            let v = rng.gen_range(-1.0..1.0);
            if j < margin || j + margin >= ell {
                0.0
            } else {
                v
            }
        })
        .collect();
    Ultrafunction::from_coeffs(space, coeffs).expect("dimension matches")
}

fn random_nodes(space: &Space, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let ell = space.num_cells();
    let n = rng.gen_range(0..=ell);
    let m = rng.gen_range(0..=ell);
    (n.min(m), n.max(m))
}

fn run_suite(space: &Space, suite: Suite, trials: usize, rng: &mut ChaCha8Rng) -> Result<Tally> {
    let identity = tol::IDENTITY;
    let mut t = Tally::new();
    match suite {
        Suite::Delta => {
            for _ in 0..trials {
                let u = random_member(space, rng);
                let q = random_point(space, rng);
                let d = (u.inner(&delta(space, q)?)? - u.eval(q)).abs();
                t.record(d, identity * (1.0 + u.norm()));
            }
        }
        Suite::Symmetry => {
            for _ in 0..trials {
                let (a, b) = (random_point(space, rng), random_point(space, rng));
                let (da, db) = (delta(space, a)?, delta(space, b)?);
                t.record((da.eval(b) - db.eval(a)).abs(), identity);
                t.record((da.inner(&da)? - da.eval(a)).abs(), identity);
            }
        }
        Suite::Sigma => {
            let pair = basis_pair(space, &default_sigma_points(space))?;
            let duality = pair.duality_matrix();
            let mut worst: f64 = 0.0;
            for i in 0..duality.rows() {
                for k in 0..duality.cols() {
                    let expect = if i == k { 1.0 } else { 0.0 };
                    worst = worst.max((duality[(i, k)] - expect).abs());
                }
            }
            t.record(worst, identity);
            for _ in 0..trials {
                let u = random_member(space, rng);
                let back = reconstruct_from_values(&pair, &pair.sample(&u))?;
                t.record(back.max_coeff_diff(&u)?, identity);
            }
        }
        Suite::Locality => {
            let beta = space.grid().beta();
            for _ in 0..trials {
                let a = rng.gen_range(-beta..beta);
                let b = rng.gen_range(-beta..beta);
                let (da, db) = (delta(space, a)?, delta(space, b)?);
                let (ja, jb) = match (space.grid().locate(a), space.grid().locate(b)) {
                    (PointClass::InteriorOf(ja), PointClass::InteriorOf(jb)) => (ja, jb),
                    _ => continue,
                };
                // exactly one nonzero block, at the cell containing the center
                let blocks = da.support_cells();
                t.record(if blocks == [ja] { 0.0 } else { 1.0 }, 0.0);
                if ja.abs_diff(jb) >= 2 {
                    t.record(da.inner(&db)?.abs(), 0.0);
                }
            }
        }
        Suite::Ibp => {
            let d = build_d(space);
            for _ in 0..trials {
                let (u, v) = (random_member(space, rng), random_member(space, rng));
                let c = ibp_defect(&d, &u, &v)?;
                t.record(c.defect, c.tolerance);
            }
        }
        Suite::Ftc => {
            let d = build_d(space);
            for _ in 0..trials {
                let u = random_member(space, rng);
                let (n, m) = random_nodes(space, rng);
                let c = ftc(&d, &u, n, m)?;
                t.record(c.defect, c.tolerance);
            }
        }
        Suite::Piecewise => {
            let d2 = build_d2(space);
            for _ in 0..trials {
                let (u, v) = (random_member(space, rng), random_member(space, rng));
                let (n, m) = random_nodes(space, rng);
                let c = ibp_piecewise(&d2, &u, &v, n, m)?;
                t.record(c.defect, c.tolerance);
                let c = ftc_piecewise(&d2, &u, n, m)?;
                t.record(c.defect, c.tolerance);
            }
            for _ in 0..trials.min(20) {
                let values: Vec<f64> = (0..space.num_cells()).map(|_| rng.gen_range(-5.0..5.0)).collect();
                let g = Ultrafunction::grid_function(space, &values)?;
                let worst = d2.apply(&g)?.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
                t.record(worst, 0.0);
            }
        }
        Suite::Projection => {
            for _ in 0..trials {
                let f = random_function(space, rng);
                let ft = tilde(space, &f)?;
                let v = random_member(space, rng);
                let d = (ft.inner(&v)? - integrate_product(space, &f, &v)?).abs();
                t.record(d, identity * (1.0 + ft.norm() * v.norm()));
                // any other member is a worse approximation
                let scale = rng.gen_range(1e-3..1.0);
                let w = ft.lin_comb(1.0, &random_member(space, rng), scale)?;
                let best = l2_distance(&f, &ft)?;
                let other = l2_distance(&f, &w)?;
                t.record((best - other).max(0.0), 0.0);
            }
        }
        Suite::Distributions => {
            for _ in 0..trials {
                let k = rng.gen_range(1..=2);
                let spec = DistributionSpec::new(k, random_function(space, rng), "random");
                let phi = random_interior_member(space, k, rng);
                let c = pair_exact_member(space, &spec, &phi)?;
                t.record(c.defect, c.tolerance);
            }
        }
        Suite::IbpNaive => unreachable!("handled by naive_control"),
    }
    Ok(t)
}

/// The two-point IBP formula applied to `u = v = indicator of [gamma_a, beta]`
/// on `[gamma_a, gamma_b]`; passes when the formula is off by more than `1e-3`.
pub fn naive_control(space: &Space) -> Result<SuiteReport> {
    let ell = space.num_cells();
    if ell < 3 {
        return Err(ultracalc_core::Error::InvalidArgument("the naive-IBP control needs at least 3 cells".into()));
    }
    let (a, b) = (ell / 3, (2 * ell) / 3);
    let u = Ultrafunction::indicator(space, a.max(1), ell)?;
    let c = naive_ibp(&build_d(space), &u, &u, a.max(1), b.max(a.max(1) + 1))?;
    let passed = c.defect > 1e-3;
    Ok(SuiteReport { suite: Suite::IbpNaive.name().into(), checks: 1, failures: usize::from(!passed), defect: c.defect, passed })
}
