//! The symmetrized intrinsic Hopf-Lax evolution
//! `u(y,t) = min_z { t L(d(f(y), pi^{-1}(z)) / t) + g(z) }`,
//! the forward operator `iQ_t`, extremal minimizer distances `iD+-`, one-sided
//! time derivatives and Hamilton-Jacobi residuals.
//!
//! On a finite base set every infimum is a minimum. Minimizing sequences are
//! represented by the argmin set, taken with an absolute tie tolerance.

use crate::error::{Error, Result};
use crate::lagrangian::Lagrangian;
use crate::par;
use crate::section::Section;

pub const DEFAULT_TAU_TIE: f64 = 1e-9;

/// Relative step used for one-sided time differences.
pub const RELATIVE_TIME_STEP: f64 = 1e-7;

pub fn default_step(t: f64) -> f64 {
    RELATIVE_TIME_STEP * t
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub value: f64,
    /// Base indices attaining the minimum within the tie tolerance, ascending.
    pub argmin: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeDerivative {
    /// `(u(t+h) - u(t)) / h`
    pub forward: f64,
    /// `(u(t) - u(t-h)) / h`
    pub backward: f64,
    /// `-(iD+)^2 / (2t^2)`, the right derivative.
    pub predicted_plus: f64,
    /// `-(iD-)^2 / (2t^2)`, the left derivative.
    pub predicted_minus: f64,
    pub id_minus: f64,
    pub id_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjResidual {
    /// Forward difference plus the squared slope term; expected `<= 0`.
    pub residual: f64,
    pub derivative: f64,
    /// Largest positive difference quotient over the neighborhood.
    pub slope: f64,
    /// Prefactor applied to `slope^2`.
    pub prefactor: f64,
    pub radius: f64,
    pub neighbors: usize,
    /// `derivative + slope^2 / 2`; the classical Hamilton-Jacobi normalization.
    pub half_residual: f64,
}

impl HjResidual {
    pub fn isolated(&self) -> bool {
        self.neighbors == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScan {
    pub t: f64,
    pub pairs: usize,
    /// Smallest `rhs - lhs` of `u(z,t) - u(y,t) <= d(f(z),f(y))/(2t) (iD-(y,t) + d(f(z), pi^{-1}(y)))`.
    pub worst_slack: f64,
    pub violations: usize,
    /// (z, y) of the worst pair.
    pub worst_pair: (usize, usize),
    /// Same scan for `u(z,t) - u(y,t) <= d(f(z),f(y))/(2t) (2 iD-(y,t) + d(f(z),f(y)))`.
    pub two_sided_worst_slack: f64,
    pub two_sided_violations: usize,
}

/// Hopf-Lax evaluator bound to a section, a Lagrangian and a tie tolerance.
#[derive(Debug, Clone, Copy)]
pub struct HopfLax<'a> {
    pub f: &'a Section,
    pub l: &'a Lagrangian,
    pub tau_tie: f64,
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be positive and finite, got {t}")))
    }
}

fn min_with_ties(tau: f64, costs: impl Iterator<Item = f64> + Clone) -> Evolution {
    let value = costs.clone().fold(f64::INFINITY, f64::min);
    let argmin = costs
        .enumerate()
        .filter(|&(_, c)| c <= value + tau)
        .map(|(z, _)| z)
        .collect();
    Evolution { value, argmin }
}

impl<'a> HopfLax<'a> {
    pub fn new(f: &'a Section, l: &'a Lagrangian, tau_tie: f64) -> Self {
        Self { f, l, tau_tie }
    }

    fn check_index(&self, y: usize) -> Result<()> {
        if y < self.f.len() {
            Ok(())
        } else {
            Err(Error::Domain(format!("base index {y} out of range")))
        }
    }

    fn require_model(&self, what: &str) -> Result<()> {
        if self.l.is_model() {
            Ok(())
        } else {
            Err(Error::Refused(format!(
                "{what} requires the model quadratic Lagrangian, got '{}'",
                self.l.name()
            )))
        }
    }

    /// Cost of reaching `y` from candidate `z` at time `t`.
    #[inline]
    pub fn cost(&self, y: usize, z: usize, t: f64) -> f64 {
        self.l.action(self.f.fiber_dist(y, z), t) + self.f.g(z)
    }

    /// `u(y, t)` and its argmin set.
    pub fn evolve(&self, y: usize, t: f64) -> Result<Evolution> {
        check_time(t)?;
        self.check_index(y)?;
        Ok(self.evolve_unchecked(y, t))
    }

    fn evolve_unchecked(&self, y: usize, t: f64) -> Evolution {
        min_with_ties(self.tau_tie, (0..self.f.len()).map(move |z| self.cost(y, z, t)))
    }

    pub fn value(&self, y: usize, t: f64) -> f64 {
        (0..self.f.len())
            .map(|z| self.cost(y, z, t))
            .fold(f64::INFINITY, f64::min)
    }

    /// `u(., t)` on every base point.
    pub fn values_at(&self, t: f64) -> Vec<f64> {
        par::map_range(self.f.len(), |y| self.value(y, t))
    }

    /// `iQ_t f(y) = min_z { g(z) + d^2(f(z), pi^{-1}(y)) / (2t) }`, with the
    /// original orientation of the fiber distance and a quadratic penalty.
    pub fn evolve_forward(&self, y: usize, t: f64) -> Result<Evolution> {
        check_time(t)?;
        self.check_index(y)?;
        let f = self.f;
        Ok(min_with_ties(
            self.tau_tie,
            (0..f.len()).map(move |z| {
                let d = f.fiber_dist(z, y);
                f.g(z) + d * d / (2.0 * t)
            }),
        ))
    }

    /// `(iD-, iD+)`: min and max of `d(f(y), pi^{-1}(z))` over the argmin set.
    pub fn discrete_d(&self, y: usize, ev: &Evolution) -> (f64, f64) {
        ev.argmin
            .iter()
            .map(|&z| self.f.fiber_dist(y, z))
            .fold((f64::INFINITY, 0.0), |(lo, hi), d| (lo.min(d), hi.max(d)))
    }

    pub fn d_pm(&self, y: usize, t: f64) -> Result<(f64, f64)> {
        let ev = self.evolve(y, t)?;
        Ok(self.discrete_d(y, &ev))
    }

    pub fn time_derivative(&self, y: usize, t: f64, h: f64) -> Result<TimeDerivative> {
        self.require_model("time derivative formula")?;
        check_time(t)?;
        self.check_index(y)?;
        if !(h > 0.0 && h < t) {
            return Err(Error::Domain(format!("step h = {h} must satisfy 0 < h < t = {t}")));
        }
        let ev = self.evolve_unchecked(y, t);
        let (id_minus, id_plus) = self.discrete_d(y, &ev);
        let forward = (self.value(y, t + h) - ev.value) / h;
        let backward = (ev.value - self.value(y, t - h)) / h;
        Ok(TimeDerivative {
            forward,
            backward,
            predicted_plus: -id_plus * id_plus / (2.0 * t * t),
            predicted_minus: -id_minus * id_minus / (2.0 * t * t),
            id_minus,
            id_plus,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn residual_from(
        &self,
        u_t: &[f64],
        z: usize,
        t: f64,
        h: f64,
        r: f64,
        prefactor: f64,
        denom: impl Fn(usize) -> f64,
    ) -> HjResidual {
        let derivative = (self.value(z, t + h) - u_t[z]) / h;
        let nbrs = self.f.neighbors(z, r);
        let slope = nbrs
            .iter()
            .filter_map(|&y| {
                let d = denom(y);
                (d > 0.0).then(|| ((u_t[z] - u_t[y]) / d).max(0.0))
            })
            .fold(0.0, f64::max);
        HjResidual {
            residual: derivative + prefactor * slope * slope,
            derivative,
            slope,
            prefactor,
            radius: r,
            neighbors: nbrs.len(),
            half_residual: derivative + 0.5 * slope * slope,
        }
    }

    fn check_hj_args(&self, t: f64, h: f64, r: f64) -> Result<()> {
        check_time(t)?;
        if !(h > 0.0 && h < t) {
            return Err(Error::Domain(format!("step h = {h} must satisfy 0 < h < t = {t}")));
        }
        if !(r > 0.0) {
            return Err(Error::Domain(format!("radius must be positive, got {r}")));
        }
        Ok(())
    }

    /// `d+/dt u(z,t) + 2 (max_{0<|y-z|<=r} ((u(z,t) - u(y,t)) / d(f(y), f(z)))^+)^2`.
    pub fn hj_residual(&self, z: usize, t: f64, h: f64, r: f64) -> Result<HjResidual> {
        self.require_model("Hamilton-Jacobi residual")?;
        self.check_index(z)?;
        self.check_hj_args(t, h, r)?;
        let u_t = self.values_at(t);
        Ok(self.hj_residual_with(&u_t, z, t, h, r))
    }

    pub(crate) fn hj_residual_with(&self, u_t: &[f64], z: usize, t: f64, h: f64, r: f64) -> HjResidual {
        self.residual_from(u_t, z, t, h, r, 2.0, |y| self.f.point_dist(y, z))
    }

    /// Variant with fiber-distance quotients and prefactor `2 / ILS^2`.
    /// Refused when `ils` is not finite and positive.
    pub fn hj_residual_lipschitz(&self, z: usize, t: f64, h: f64, r: f64, ils: f64) -> Result<HjResidual> {
        self.require_model("Hamilton-Jacobi residual")?;
        self.check_index(z)?;
        self.check_hj_args(t, h, r)?;
        if !(ils.is_finite() && ils > 0.0) {
            return Err(Error::Refused(format!(
                "the residual needs an intrinsically Lipschitz section, ILS = {ils}"
            )));
        }
        let u_t = self.values_at(t);
        Ok(self.hj_residual_lipschitz_with(&u_t, z, t, h, r, ils))
    }

    pub(crate) fn hj_residual_lipschitz_with(
        &self,
        u_t: &[f64],
        z: usize,
        t: f64,
        h: f64,
        r: f64,
        ils: f64,
    ) -> HjResidual {
        self.residual_from(u_t, z, t, h, r, 2.0 / (ils * ils), |y| self.f.fiber_dist(y, z))
    }

    /// Scans the pointwise slope estimate over all ordered base pairs at time `t`.
    pub fn slope_estimate_check(&self, t: f64) -> Result<PairScan> {
        self.require_model("slope estimate")?;
        check_time(t)?;
        let n = self.f.len();
        let evs: Vec<Evolution> = par::map_range(n, |y| self.evolve_unchecked(y, t));
        let id_minus: Vec<f64> = evs
            .iter()
            .enumerate()
            .map(|(y, ev)| self.discrete_d(y, ev).0)
            .collect();
        let f = self.f;
        let rows = par::map_range(n, |z| {
            let mut worst = (f64::INFINITY, (z, z));
            let mut bad = 0;
            let mut worst2 = f64::INFINITY;
            let mut bad2 = 0;
            for y in 0..n {
                let lhs = evs[z].value - evs[y].value;
                let p = f.point_dist(z, y);
                let rhs = p / (2.0 * t) * (id_minus[y] + f.fiber_dist(z, y));
                let slack = rhs - lhs;
                let tol = 1e-12 * (1.0 + lhs.abs());
                if slack < worst.0 {
                    worst = (slack, (z, y));
                }
                if slack < -tol {
                    bad += 1;
                }
                let slack2 = p / (2.0 * t) * (2.0 * id_minus[y] + p) - lhs;
                worst2 = worst2.min(slack2);
                if slack2 < -tol {
                    bad2 += 1;
                }
            }
            (worst, bad, worst2, bad2)
        });
        let mut scan = PairScan {
            t,
            pairs: n * n,
            worst_slack: f64::INFINITY,
            violations: 0,
            worst_pair: (0, 0),
            two_sided_worst_slack: f64::INFINITY,
            two_sided_violations: 0,
        };
        for ((w, pair), b, w2, b2) in rows {
            if w < scan.worst_slack {
                scan.worst_slack = w;
                scan.worst_pair = pair;
            }
            scan.violations += b;
            scan.two_sided_worst_slack = scan.two_sided_worst_slack.min(w2);
            scan.two_sided_violations += b2;
        }
        Ok(scan)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRow {
    pub y: usize,
    pub t: f64,
    pub u: f64,
    /// `iQ_t f(y)` for side-by-side comparison.
    pub forward_u: f64,
    pub argmin: Vec<usize>,
    pub id_minus: f64,
    pub id_plus: f64,
    pub hj: Option<HjResidual>,
}

/// `u`, argmin sets, `iD+-` and (for the model Lagrangian) Hamilton-Jacobi
/// residuals over the grid `base points x times`. Rows are ordered by base
/// index, then time.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTable {
    pub times: Vec<f64>,
    pub hj_radius: Option<f64>,
    pub rows: Vec<EvolutionRow>,
}

impl EvolutionTable {
    /// `hj_radius` enables the residual column; it is ignored unless the
    /// Lagrangian is the model one.
    pub fn build(hl: &HopfLax<'_>, times: &[f64], hj_radius: Option<f64>) -> Result<Self> {
        for &t in times {
            check_time(t)?;
        }
        let hj_radius = hj_radius.filter(|_| hl.l.is_model());
        let n = hl.f.len();
        let u_rows: Vec<Vec<f64>> = times.iter().map(|&t| hl.values_at(t)).collect();
        let m = times.len();
        let rows = par::map_range(n * m, |idx| {
            let (y, k) = (idx / m, idx % m);
            let t = times[k];
            let ev = hl.evolve_unchecked(y, t);
            let (id_minus, id_plus) = hl.discrete_d(y, &ev);
            let forward_u = hl
                .evolve_forward(y, t)
                .map(|e| e.value)
                .unwrap_or(f64::NAN);
            let hj = hj_radius.map(|r| hl.hj_residual_with(&u_rows[k], y, t, default_step(t), r));
            EvolutionRow {
                y,
                t,
                u: ev.value,
                forward_u,
                argmin: ev.argmin,
                id_minus,
                id_plus,
                hj,
            }
        });
        Ok(Self {
            times: times.to_vec(),
            hj_radius,
            rows,
        })
    }

    pub fn row(&self, y: usize, k: usize) -> &EvolutionRow {
        &self.rows[y * self.times.len() + k]
    }

    pub fn u(&self, y: usize, k: usize) -> f64 {
        self.row(y, k).u
    }

    /// True when no entry is `-inf` or NaN, i.e. `t_*(y) = +inf` on the grid.
    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| r.u.is_finite())
    }

    pub fn worst_hj_residual(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.hj.map(|h| h.residual))
            .reduce(f64::max)
    }
}
