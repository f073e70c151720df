//! Verdicts for the properties of the evolution: bounds, quasi-minimizers,
//! spatial and cross-time estimates, behavior at `t = 0`, monotonicity in
//! time, ordering of `iD+-` across times, and time-Lipschitz bounds.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lagrangian::{check_axioms, default_xi_grid, hamiltonian, AxiomReport, Lagrangian};
use crate::par;
use crate::section::{bound_k, global_ils, Section};
use crate::semigroup::{Evolution, HopfLax};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub status: Status,
    /// Smallest margin by which the checked inequality held (negative when it failed).
    pub worst_slack: Option<f64>,
    pub location: String,
}

/// Rounds to 12 significant digits so serialized slacks are stable.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.11e}").parse().unwrap_or(x)
    } else {
        x
    }
}

impl Verdict {
    pub fn new(check: impl Into<String>, status: Status, worst_slack: f64, location: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            status,
            worst_slack: worst_slack.is_finite().then(|| round12(worst_slack)),
            location: location.into(),
        }
    }

    /// PASS when `worst_slack >= -tol`.
    pub fn from_slack(check: impl Into<String>, worst_slack: f64, tol: f64, location: impl Into<String>) -> Self {
        let status = if worst_slack >= -tol { Status::Pass } else { Status::Fail };
        Self::new(check, status, worst_slack, location)
    }

    pub fn skipped(check: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            status: Status::Skipped,
            worst_slack: None,
            location: reason.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// True iff every non-skipped verdict passed.
pub fn all_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.status != Status::Fail)
}

/// Absolute tolerance for the finite inequalities below.
pub const SUITE_TOL: f64 = 1e-9;

/// Decreasing schedule `t_n = 2^{-n}`, `n = 1..=20`, with slack `1/n`.
pub const QUASI_STEPS: u32 = 20;

/// Distance bound at the last quasi-minimizer step.
pub const QUASI_FINAL_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub times: Vec<f64>,
    pub xi_resolution: usize,
    pub tau_tie: f64,
}

/// Tracks the smallest slack and where it occurred.
#[derive(Debug, Clone)]
struct Worst {
    slack: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Self {
            slack: f64::INFINITY,
            at: String::new(),
        }
    }

    fn see(&mut self, slack: f64, at: impl FnOnce() -> String) {
        if slack < self.slack || (slack.is_nan() && !self.slack.is_nan()) {
            self.slack = slack;
            self.at = at();
        }
    }

    fn merge(mut self, other: Worst) -> Worst {
        if other.slack < self.slack {
            self = other;
        }
        self
    }

    fn verdict(self, check: &str, scale_tol: f64) -> Verdict {
        Verdict::from_slack(check, self.slack, scale_tol, self.at)
    }
}

struct Grid {
    times: Vec<f64>,
    /// `ev[k][y]`
    ev: Vec<Vec<Evolution>>,
    /// `dpm[k][y] = (iD-, iD+)`
    dpm: Vec<Vec<(f64, f64)>>,
}

impl Grid {
    fn u(&self, k: usize, y: usize) -> f64 {
        self.ev[k][y].value
    }
}

pub struct SuiteReport {
    pub axioms: AxiomReport,
    pub ils: f64,
    pub k: f64,
    pub verdicts: Vec<Verdict>,
}

/// Runs items (a)-(i). Items whose hypotheses fail are SKIPPED with the reason.
pub fn proposition_suite(f: &Section, l: &Lagrangian, cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut times = cfg.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let hl = HopfLax::new(f, l, cfg.tau_tie);
    let n = f.len();
    let axioms = check_axioms(l, f, &times)?;
    let ils = global_ils(f);
    let k = bound_k(f);

    let ev: Vec<Vec<Evolution>> = times
        .iter()
        .map(|&t| par::map_range(n, |y| hl.evolve(y, t).expect("validated grid")))
        .collect();
    let dpm = ev
        .iter()
        .map(|row| row.iter().enumerate().map(|(y, e)| hl.discrete_d(y, e)).collect())
        .collect();
    let grid = Grid { times, ev, dpm };

    let mut verdicts = vec![
        bounds(f, l, &grid),
        quasi_minimizers(&hl),
    ];

    let sqrt_l = |v: f64| l.eval(v).max(0.0).sqrt();
    if axioms.convex() && axioms.transfer_holds() {
        verdicts.push(spatial_estimate(f, &grid, k, &sqrt_l));
    } else {
        verdicts.push(Verdict::skipped("prop.spatial_estimate", "Lagrangian fails the transfer axiom"));
    }
    if axioms.all_hold() {
        verdicts.push(cross_time_estimate(f, &grid, k, &sqrt_l));
    } else {
        verdicts.push(Verdict::skipped("prop.cross_time_estimate", "Lagrangian fails an axiom"));
    }
    if ils.is_finite() && ils > 0.0 {
        verdicts.push(boundary_rate(f, l, &grid, cfg.xi_resolution)?);
    } else {
        verdicts.push(Verdict::skipped(
            "prop.boundary_rate",
            format!("section not intrinsically Lipschitz (ILS = {ils})"),
        ));
    }
    if axioms.scaling_holds() {
        verdicts.push(monotone_in_time(n, &grid));
    } else {
        verdicts.push(Verdict::skipped("prop.monotone_in_time", "Lagrangian fails the scaling axiom"));
    }
    verdicts.push(d_monotone(n, &grid, cfg.tau_tie));
    if !l.is_model() {
        verdicts.push(Verdict::skipped("prop.d_plus_bound", "requires the model Lagrangian"));
        verdicts.push(Verdict::skipped("prop.time_lipschitz", "requires the model Lagrangian"));
    } else {
        if ils.is_finite() {
            verdicts.push(d_plus_bound(n, &grid, ils));
        } else {
            verdicts.push(Verdict::skipped("prop.d_plus_bound", "ILS is infinite"));
        }
        verdicts.push(time_lipschitz(n, &grid, k));
    }

    Ok(SuiteReport {
        axioms,
        ils,
        k,
        verdicts,
    })
}

fn tol(scale: f64) -> f64 {
    SUITE_TOL * (1.0 + scale.abs())
}

fn at(y: usize, t: f64) -> String {
    format!("y={y},t={t}")
}

/// (a) `min_z min_j f_j(z) <= u(y,t) <= g(y) + t L(0)`.
fn bounds(f: &Section, l: &Lagrangian, grid: &Grid) -> Verdict {
    let lower = f.min_coordinate();
    let mut w = Worst::new();
    for (k, &t) in grid.times.iter().enumerate() {
        for y in 0..f.len() {
            let u = grid.u(k, y);
            let upper = f.g(y) + t * l.eval(0.0);
            w.see((u - lower).min(upper - u), || at(y, t));
        }
    }
    let scale = f.sup_norm();
    w.verdict("prop.bounds", tol(scale))
}

/// (b) Quasi-minimizers for `t_n = 2^{-n}` approach the fiber of `y`.
fn quasi_minimizers(hl: &HopfLax<'_>) -> Verdict {
    let f = hl.f;
    let norm = f.sup_norm();
    let rows = par::map_range(f.len(), |y| {
        let mut w = Worst::new();
        for step in 1..=QUASI_STEPS {
            let t = 0.5f64.powi(step as i32);
            let slack_n = 1.0 / step as f64;
            let u = hl.value(y, t);
            if hl.l.is_model() {
                for z in 0..f.len() {
                    if hl.cost(y, z, t) <= u + slack_n {
                        let d = f.fiber_dist(y, z);
                        let bound = 2.0 * t * (2.0 * norm + slack_n);
                        w.see(bound - d * d, || format!("y={y},n={step},z={z}"));
                    }
                }
            }
            if step == QUASI_STEPS {
                let ev = hl.evolve(y, t).expect("valid index");
                let (_, far) = hl.discrete_d(y, &ev);
                w.see(QUASI_FINAL_DISTANCE - far, || format!("y={y},n={step},argmin distance"));
            }
        }
        w
    });
    rows.into_iter()
        .fold(Worst::new(), Worst::merge)
        .verdict("prop.quasi_minimizers", SUITE_TOL)
}

/// (c) `|u(x,t) - u(y,t)| <= 2K sqrt L(d(f(y),f(x))/t)`.
fn spatial_estimate(f: &Section, grid: &Grid, k: f64, sqrt_l: &(dyn Fn(f64) -> f64 + Sync)) -> Verdict {
    let n = f.len();
    let rows = par::map_range(n, |x| {
        let mut w = Worst::new();
        for (kt, &t) in grid.times.iter().enumerate() {
            for y in 0..n {
                let rhs = 2.0 * k * sqrt_l(f.point_dist(y, x) / t);
                let lhs = (grid.u(kt, x) - grid.u(kt, y)).abs();
                w.see(rhs - lhs, || format!("x={x},y={y},t={t}"));
            }
        }
        w
    });
    let scale = f.sup_norm();
    rows.into_iter()
        .fold(Worst::new(), Worst::merge)
        .verdict("prop.spatial_estimate", tol(scale))
}

/// (d) `u(y,t) <= 2K sqrt L(d(f(y),f(x))/t) + u(x,s)` for `s < t`.
fn cross_time_estimate(f: &Section, grid: &Grid, k: f64, sqrt_l: &(dyn Fn(f64) -> f64 + Sync)) -> Verdict {
    let n = f.len();
    let m = grid.times.len();
    let rows = par::map_range(n, |y| {
        let mut w = Worst::new();
        for kt in 0..m {
            let t = grid.times[kt];
            for ks in 0..kt {
                let s = grid.times[ks];
                for x in 0..n {
                    let rhs = 2.0 * k * sqrt_l(f.point_dist(y, x) / t) + grid.u(ks, x);
                    w.see(rhs - grid.u(kt, y), || format!("x={x},y={y},s={s},t={t}"));
                }
            }
        }
        w
    });
    rows.into_iter()
        .fold(Worst::new(), Worst::merge)
        .verdict("prop.cross_time_estimate", tol(f.sup_norm()))
}

/// (e) `|u(x,t) - g(x)| <= C t` with `C = max{|L(0)|, max_xi |H(xi)|}`.
fn boundary_rate(f: &Section, l: &Lagrangian, grid: &Grid, xi_resolution: usize) -> Result<Verdict> {
    let xi = default_xi_grid(f, xi_resolution)?;
    let n = f.len();
    let rows: Vec<Result<Worst>> = par::map_range(n, |x| {
        let mut w = Worst::new();
        for (kt, &t) in grid.times.iter().enumerate() {
            let h = hamiltonian(l, f, x, t, &xi)?;
            let c = l.eval(0.0).abs().max(h.max_abs());
            let dev = (grid.u(kt, x) - f.g(x)).abs();
            w.see(c * t - dev, || format!("{},C={}", at(x, t), round12(c)));
        }
        Ok(w)
    });
    let mut worst = Worst::new();
    for r in rows {
        worst = worst.merge(r?);
    }
    Ok(worst.verdict("prop.boundary_rate", tol(f.sup_norm())))
}

/// (f) `u(y,t) <= u(y,s)` for `s < t`.
fn monotone_in_time(n: usize, grid: &Grid) -> Verdict {
    let mut w = Worst::new();
    let m = grid.times.len();
    for y in 0..n {
        for ks in 0..m {
            for kt in ks + 1..m {
                w.see(grid.u(ks, y) - grid.u(kt, y), || {
                    format!("y={y},s={},t={}", grid.times[ks], grid.times[kt])
                });
            }
        }
    }
    w.verdict("prop.monotone_in_time", SUITE_TOL)
}

/// (g) `iD+(y,t) <= iD-(y,s)` for `t < s`.
fn d_monotone(n: usize, grid: &Grid, tau_tie: f64) -> Verdict {
    let mut w = Worst::new();
    let m = grid.times.len();
    for y in 0..n {
        for kt in 0..m {
            for ks in kt + 1..m {
                let slack = grid.dpm[ks][y].0 - grid.dpm[kt][y].1;
                w.see(slack, || format!("y={y},t={},s={}", grid.times[kt], grid.times[ks]));
            }
        }
    }
    w.verdict("prop.d_monotone", tau_tie + SUITE_TOL)
}

/// (h) `2 t ILS >= iD+(y,t)`.
fn d_plus_bound(n: usize, grid: &Grid, ils: f64) -> Verdict {
    let mut w = Worst::new();
    for (k, &t) in grid.times.iter().enumerate() {
        for y in 0..n {
            w.see(2.0 * t * ils - grid.dpm[k][y].1, || at(y, t));
        }
    }
    w.verdict("prop.d_plus_bound", SUITE_TOL)
}

/// (i) Difference quotients in time bounded by `K^2 / (2 tau_1^2)` on `[tau_1, tau_2]`.
fn time_lipschitz(n: usize, grid: &Grid, k: f64) -> Verdict {
    let mut w = Worst::new();
    for (i, pair) in grid.times.windows(2).enumerate() {
        let (t1, t2) = (pair[0], pair[1]);
        let bound = k * k / (2.0 * t1 * t1);
        for y in 0..n {
            let q = (grid.u(i + 1, y) - grid.u(i, y)).abs() / (t2 - t1);
            w.see(bound - q, || format!("y={y},t={t1}..{t2}"));
        }
    }
    w.verdict("prop.time_lipschitz", tol(k * k))
}
