//! Convex Lagrangians on `R+`, their compatibility axioms with a section, and
//! the intrinsic Fenchel-Legendre transform where the velocity ranges over the
//! achievable set `{ d(f(y), pi^{-1}(z)) / t : z in Y }`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::par;
use crate::section::{bound_k, global_ils, Section};

type EvalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LagrangianKind {
    /// `L(v) = v^2 / 2`, so that `t L(d/t) = d^2 / (2t)`.
    ModelQuadratic,
    /// `L(v) = coefficient * v^exponent`.
    Power { coefficient: f64, exponent: f64 },
    Custom,
}

#[derive(Clone)]
pub struct Lagrangian {
    name: String,
    kind: LagrangianKind,
    eval: EvalFn,
    cert_grid: Vec<f64>,
}

impl fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lagrangian")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("cert_grid_len", &self.cert_grid.len())
            .finish()
    }
}

fn default_cert_grid() -> Vec<f64> {
    (0..=200).map(|k| k as f64 * 0.05).collect()
}

impl Lagrangian {
    pub fn model_quadratic() -> Self {
        Self {
            name: "model-quadratic".into(),
            kind: LagrangianKind::ModelQuadratic,
            eval: Arc::new(|v| 0.5 * v * v),
            cert_grid: default_cert_grid(),
        }
    }

    pub fn power(coefficient: f64, exponent: f64) -> Result<Self> {
        if !(coefficient >= 0.0 && coefficient.is_finite()) || !(exponent >= 1.0 && exponent.is_finite()) {
            return Err(Error::Domain(format!(
                "power Lagrangian needs coefficient >= 0 and exponent >= 1, got {coefficient}, {exponent}"
            )));
        }
        Ok(Self {
            name: "power".into(),
            kind: LagrangianKind::Power {
                coefficient,
                exponent,
            },
            eval: Arc::new(move |v: f64| coefficient * v.abs().powf(exponent)),
            cert_grid: default_cert_grid(),
        })
    }

    /// Black-box Lagrangian. Nothing is assumed until [`check_axioms`] runs.
    pub fn from_fn(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            kind: LagrangianKind::Custom,
            eval: Arc::new(eval),
            cert_grid: default_cert_grid(),
        }
    }

    pub fn with_cert_grid(mut self, grid: Vec<f64>) -> Self {
        self.cert_grid = grid;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> LagrangianKind {
        self.kind
    }

    pub fn cert_grid(&self) -> &[f64] {
        &self.cert_grid
    }

    pub fn is_model(&self) -> bool {
        self.kind == LagrangianKind::ModelQuadratic
    }

    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        (self.eval)(v)
    }

    /// `t L(d / t)`, the cost of moving a fiber distance `d` in time `t`.
    #[inline]
    pub fn action(&self, d: f64, t: f64) -> f64 {
        if self.is_model() {
            d * d / (2.0 * t)
        } else {
            t * self.eval(d / t)
        }
    }
}

fn tol(scale: f64) -> f64 {
    1e-12 * (1.0 + scale.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub convexity_worst_slack: f64,
    pub convexity_violations: usize,
    /// Worst slack of `tL(d(f(y),pi^{-1}z)/t) - tL(d(f(x),pi^{-1}z)/t) <= 2K sqrt L(d(f(y),f(x))/t)`.
    pub transfer_worst_slack: f64,
    pub transfer_violations: usize,
    /// First violating (x, y, z, t), if any.
    pub transfer_witness: Option<(usize, usize, usize, f64)>,
    /// Worst slack of `t L(D/t) <= s L(D/s)` for `0 < s < t`.
    pub scaling_worst_slack: f64,
    pub scaling_violations: usize,
}

impl AxiomReport {
    pub fn convex(&self) -> bool {
        self.convexity_violations == 0
    }

    pub fn transfer_holds(&self) -> bool {
        self.transfer_violations == 0
    }

    pub fn scaling_holds(&self) -> bool {
        self.scaling_violations == 0
    }

    pub fn all_hold(&self) -> bool {
        self.convex() && self.transfer_holds() && self.scaling_holds()
    }
}

/// Midpoint convexity of `L` on its certification grid.
pub fn convexity_slack(l: &Lagrangian) -> (f64, usize) {
    let grid = l.cert_grid();
    let rows = par::map_range(grid.len(), |i| {
        let mut worst = f64::INFINITY;
        let mut bad = 0usize;
        for &b in &grid[i..] {
            let a = grid[i];
            let avg = 0.5 * (l.eval(a) + l.eval(b));
            let slack = avg - l.eval(0.5 * (a + b));
            worst = worst.min(slack);
            if slack < -tol(avg) {
                bad += 1;
            }
        }
        (worst, bad)
    });
    rows.into_iter()
        .fold((f64::INFINITY, 0), |(w, c), (w2, c2)| (w.min(w2), c + c2))
}

/// Checks convexity and both compatibility axioms against the section for
/// every `t` in `times`.
pub fn check_axioms(l: &Lagrangian, f: &Section, times: &[f64]) -> Result<AxiomReport> {
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Domain("axiom times must be positive".into()));
    }
    let (convexity_worst_slack, convexity_violations) = convexity_slack(l);
    let n = f.len();
    let k = bound_k(f);

    let rows = par::map_range(n, |x| {
        let mut worst = f64::INFINITY;
        let mut bad = 0usize;
        let mut witness = None;
        for &t in times {
            for y in 0..n {
                let rhs = 2.0 * k * l.eval(f.point_dist(y, x) / t).max(0.0).sqrt();
                for z in 0..n {
                    let lhs = l.action(f.fiber_dist(y, z), t) - l.action(f.fiber_dist(x, z), t);
                    let slack = rhs - lhs;
                    worst = worst.min(slack);
                    if slack < -tol(rhs.max(lhs)) {
                        bad += 1;
                        witness.get_or_insert((x, y, z, t));
                    }
                }
            }
        }
        (worst, bad, witness)
    });
    let mut transfer_worst_slack = f64::INFINITY;
    let mut transfer_violations = 0;
    let mut transfer_witness = None;
    for (w, b, wit) in rows {
        transfer_worst_slack = transfer_worst_slack.min(w);
        transfer_violations += b;
        if transfer_witness.is_none() {
            transfer_witness = wit;
        }
    }

    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut scaling_worst_slack = f64::INFINITY;
    let mut scaling_violations = 0;
    for (i, &s) in sorted.iter().enumerate() {
        for &t in &sorted[i + 1..] {
            for x in 0..n {
                for z in 0..n {
                    let d = f.fiber_dist(x, z);
                    let big = l.action(d, s);
                    let slack = big - l.action(d, t);
                    scaling_worst_slack = scaling_worst_slack.min(slack);
                    if slack < -tol(big) {
                        scaling_violations += 1;
                    }
                }
            }
        }
    }

    Ok(AxiomReport {
        convexity_worst_slack,
        convexity_violations,
        transfer_worst_slack,
        transfer_violations,
        transfer_witness,
        scaling_worst_slack,
        scaling_violations,
    })
}

/// `max_w (xi w - L(w))` over a finite set, with the maximizing index.
pub fn conjugate_at(l: &Lagrangian, achievable: &[f64], xi: f64) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, &w) in achievable.iter().enumerate() {
        let v = xi * w - l.eval(w);
        if v > best {
            best = v;
            arg = i;
        }
    }
    (best, arg)
}

/// `H*(w) = max_xi (xi w - H(xi))` for tabulated `H`.
pub fn biconjugate_at(xi_grid: &[f64], h: &[f64], w: f64) -> f64 {
    xi_grid
        .iter()
        .zip(h)
        .map(|(xi, hv)| xi * w - hv)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformTable {
    pub y: usize,
    pub t: f64,
    /// Upper end of the admissible xi range that was used (global ILS).
    pub ils_estimate: f64,
    pub k: f64,
    pub xi_grid: Vec<f64>,
    /// `achievable_w[z] = d(f(y), pi^{-1}(z)) / t`.
    pub achievable_w: Vec<f64>,
    pub lstar: Vec<f64>,
    pub argmax_w: Vec<f64>,
    /// `xi K / t - min_w L(w)`, the closed form claimed for `L*`; reported only.
    pub claimed: Vec<f64>,
}

impl TransformTable {
    /// Largest `|L*(xi) - claimed(xi)|`.
    pub fn claim_mismatch(&self) -> f64 {
        self.lstar
            .iter()
            .zip(&self.claimed)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.lstar.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `resolution` uniform samples of `[0, ILS(f)]`.
pub fn default_xi_grid(f: &Section, resolution: usize) -> Result<Vec<f64>> {
    let ils = global_ils(f);
    if !ils.is_finite() {
        return Err(Error::Refused(
            "the section is not intrinsically Lipschitz (ILS is infinite); xi range undefined".into(),
        ));
    }
    Ok(linspace(0.0, ils, resolution))
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| if k == n - 1 { b } else { a + (b - a) * k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

pub fn achievable_velocities(f: &Section, y: usize, t: f64) -> Vec<f64> {
    (0..f.len()).map(|z| f.fiber_dist(y, z) / t).collect()
}

pub fn legendre_transform(
    l: &Lagrangian,
    f: &Section,
    y: usize,
    t: f64,
    xi_grid: &[f64],
) -> Result<TransformTable> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if y >= f.len() {
        return Err(Error::Domain(format!("base index {y} out of range")));
    }
    let ils = global_ils(f);
    if let Some(&bad) = xi_grid
        .iter()
        .find(|&&xi| !(xi >= 0.0) || xi > ils * (1.0 + 1e-12))
    {
        return Err(Error::Domain(format!(
            "xi = {bad} lies outside [0, {ils}]"
        )));
    }
    let achievable_w = achievable_velocities(f, y, t);
    let k = bound_k(f);
    let min_l = achievable_w
        .iter()
        .map(|&w| l.eval(w))
        .fold(f64::INFINITY, f64::min);
    let (lstar, argmax_w) = xi_grid
        .iter()
        .map(|&xi| {
            let (v, i) = conjugate_at(l, &achievable_w, xi);
            (v, achievable_w[i])
        })
        .unzip();
    let claimed = xi_grid.iter().map(|xi| xi * k / t - min_l).collect();
    Ok(TransformTable {
        y,
        t,
        ils_estimate: ils,
        k,
        xi_grid: xi_grid.to_vec(),
        achievable_w,
        lstar,
        argmax_w,
        claimed,
    })
}

/// The intrinsic Hamiltonian is the transform of `L`; same table.
pub fn hamiltonian(
    l: &Lagrangian,
    f: &Section,
    y: usize,
    t: f64,
    xi_grid: &[f64],
) -> Result<TransformTable> {
    legendre_transform(l, f, y, t, xi_grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiconjugateRow {
    pub w: f64,
    pub h_star: f64,
    pub l: f64,
}

impl BiconjugateRow {
    /// `L(w) - H*(w)`, nonnegative when the Fenchel-Young direction holds.
    pub fn gap(&self) -> f64 {
        self.l - self.h_star
    }
}

pub fn biconjugate(
    l: &Lagrangian,
    f: &Section,
    y: usize,
    t: f64,
    w_grid: &[f64],
    xi_grid: &[f64],
) -> Result<Vec<BiconjugateRow>> {
    let table = hamiltonian(l, f, y, t, xi_grid)?;
    if let Some(&w) = w_grid
        .iter()
        .find(|&&w| !table.achievable_w.iter().any(|&a| (a - w).abs() <= 1e-12 * (1.0 + a)))
    {
        return Err(Error::Domain(format!("w = {w} is not an achievable velocity")));
    }
    Ok(biconjugate_rows(l, &table.xi_grid, &table.lstar, w_grid))
}

pub fn biconjugate_rows(l: &Lagrangian, xi_grid: &[f64], h: &[f64], w_grid: &[f64]) -> Vec<BiconjugateRow> {
    w_grid
        .iter()
        .map(|&w| BiconjugateRow {
            w,
            h_star: biconjugate_at(xi_grid, h, w),
            l: l.eval(w),
        })
        .collect()
}

/// Number of (xi, w) pairs with `L*(xi) < xi w - L(w)`. Zero by construction of
/// the finite max; the comparison reuses the exact expression that was maximized.
pub fn fenchel_young_violations(l: &Lagrangian, table: &TransformTable) -> usize {
    table
        .xi_grid
        .iter()
        .zip(&table.lstar)
        .map(|(&xi, &ls)| {
            table
                .achievable_w
                .iter()
                .filter(|&&w| ls < xi * w - l.eval(w))
                .count()
        })
        .sum()
}

/// Worst `(h[i-j] + h[i+j]) / 2 - h[i]` over a uniformly spaced table.
pub fn midpoint_convexity_slack(h: &[f64]) -> f64 {
    let n = h.len();
    let mut worst = f64::INFINITY;
    for i in 0..n {
        for j in 1..=i.min(n - 1 - i) {
            worst = worst.min(0.5 * (h[i - j] + h[i + j]) - h[i]);
        }
    }
    worst
}
