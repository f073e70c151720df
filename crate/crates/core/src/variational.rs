//! The curve problem
//!
//! ```text
//! v(y,t) = inf { int_0^t L(w'(s)) ds + g(w(0)) : w(t) = w(0) + d(f(y), pi^{-1}(w(0))) }
//! ```
//!
//! discretized on a uniform grid of `m` steps. Curves are scalar and `w(0)` is
//! the parameter of a base point, so the base set must carry a scalar
//! parametrization.

use crate::error::{Error, Result};
use crate::lagrangian::Lagrangian;
use crate::par;
use crate::section::Section;

pub const NODE_TOL: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 10_000;

/// One scalar parameter per base point, pairwise distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarParametrization {
    params: Vec<f64>,
}

impl ScalarParametrization {
    pub fn new(params: Vec<f64>) -> Result<Self> {
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::Refused(format!("parameter of base point {i} is not finite")));
        }
        let mut sorted = params.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Refused("base parameters are not pairwise distinct".into()));
        }
        Ok(Self { params })
    }

    /// Builds from optional per-point parameters; refuses if any is missing.
    pub fn from_optional(params: &[Option<f64>]) -> Result<Self> {
        match params.iter().position(Option::is_none) {
            Some(i) => Err(Error::Refused(format!(
                "base point {i} has no scalar parameter; the curve problem needs a one-dimensional base"
            ))),
            None => Self::new(params.iter().map(|p| p.unwrap()).collect()),
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        self.params[i]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveProblem {
    pub y: usize,
    pub t: f64,
    pub m: usize,
    /// Base index of the starting point `w(0)`.
    pub z: usize,
    /// `m + 1` node values on the uniform grid of `[0, t]`.
    pub nodes: Vec<f64>,
}

impl CurveProblem {
    /// Constant-speed curve between the constrained endpoints.
    pub fn linear(f: &Section, p: &ScalarParametrization, y: usize, t: f64, m: usize, z: usize) -> Self {
        let (w0, w1) = endpoints(f, p, y, z);
        let nodes = (0..=m)
            .map(|k| if k == m { w1 } else { w0 + (w1 - w0) * k as f64 / m as f64 })
            .collect();
        Self { y, t, m, z, nodes }
    }

    /// Starting guess for the descent: `w(s) = w(0) + d (s/t)^2`.
    pub fn quadratic_start(f: &Section, p: &ScalarParametrization, y: usize, t: f64, m: usize, z: usize) -> Self {
        let (w0, w1) = endpoints(f, p, y, z);
        let nodes = (0..=m)
            .map(|k| {
                if k == m {
                    w1
                } else {
                    let s = k as f64 / m as f64;
                    w0 + (w1 - w0) * s * s
                }
            })
            .collect();
        Self { y, t, m, z, nodes }
    }

    pub fn step(&self) -> f64 {
        self.t / self.m as f64
    }

    /// Largest distance of a node from the straight line between the endpoints.
    pub fn deviation_from_linear(&self) -> f64 {
        let (a, b) = (self.nodes[0], self.nodes[self.m]);
        self.nodes
            .iter()
            .enumerate()
            .map(|(k, w)| (w - (a + (b - a) * k as f64 / self.m as f64)).abs())
            .fold(0.0, f64::max)
    }

    pub fn check(&self, f: &Section, p: &ScalarParametrization) -> Result<()> {
        if self.m == 0 || self.nodes.len() != self.m + 1 {
            return Err(Error::Domain(format!(
                "curve needs m >= 1 and m + 1 nodes, got m = {} with {} nodes",
                self.m,
                self.nodes.len()
            )));
        }
        if !(self.t > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {}", self.t)));
        }
        let (w0, w1) = endpoints(f, p, self.y, self.z);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
        if !close(self.nodes[0], w0) || !close(self.nodes[self.m], w1) {
            return Err(Error::Validation(format!(
                "endpoint constraint violated: w(0) = {}, w(t) = {}, expected {w0} and {w1}",
                self.nodes[0], self.nodes[self.m]
            )));
        }
        Ok(())
    }
}

fn endpoints(f: &Section, p: &ScalarParametrization, y: usize, z: usize) -> (f64, f64) {
    let w0 = p.get(z);
    (w0, w0 + f.fiber_dist(y, z))
}

/// Riemann-sum action `sum L(dw/ds) ds + g(z)`.
pub fn action(problem: &CurveProblem, l: &Lagrangian, f: &Section, p: &ScalarParametrization) -> Result<f64> {
    problem.check(f, p)?;
    Ok(raw_action(&problem.nodes, problem.step(), l) + f.g(problem.z))
}

fn raw_action(nodes: &[f64], ds: f64, l: &Lagrangian) -> f64 {
    nodes
        .windows(2)
        .map(|w| l.eval((w[1] - w[0]) / ds) * ds)
        .sum()
}

/// Minimizes `L((x - a)/ds) + L((b - x)/ds)` over `x` between `a` and `b`.
fn golden_section(l: &Lagrangian, a: f64, b: f64, ds: f64) -> f64 {
    let phi = |x: f64| l.eval((x - a) / ds) + l.eval((b - x) / ds);
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = phi(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = phi(x2);
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub problem: CurveProblem,
    pub value: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Cyclic coordinate descent on the interior nodes with exact line
/// minimization. For the model Lagrangian the coordinate minimizer is the
/// neighbor midpoint and sweeps are over-relaxed.
pub fn minimize_curve(
    mut problem: CurveProblem,
    l: &Lagrangian,
    f: &Section,
    p: &ScalarParametrization,
) -> Result<InnerSolution> {
    problem.check(f, p)?;
    let m = problem.m;
    let ds = problem.step();
    let omega = if l.is_model() && m > 2 {
        2.0 / (1.0 + (std::f64::consts::PI / m as f64).sin())
    } else {
        1.0
    };
    let mut sweeps = 0;
    let mut converged = m < 2;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for k in 1..m {
            let (a, b) = (problem.nodes[k - 1], problem.nodes[k + 1]);
            let target = if l.is_model() {
                0.5 * (a + b)
            } else {
                golden_section(l, a, b, ds)
            };
            let old = problem.nodes[k];
            let new = old + omega * (target - old);
            problem.nodes[k] = new;
            max_change = max_change.max((new - old).abs());
        }
        converged = max_change < NODE_TOL;
    }
    let value = raw_action(&problem.nodes, ds, l) + f.g(problem.z);
    Ok(InnerSolution {
        problem,
        value,
        sweeps,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalSolution {
    pub value: f64,
    pub best: InnerSolution,
    /// Converged inner value for every starting base point.
    pub per_start: Vec<f64>,
}

impl VariationalSolution {
    pub fn best_z(&self) -> usize {
        self.best.problem.z
    }
}

/// Outer exact scan over starting points, inner descent per start.
pub fn solve_variational(
    f: &Section,
    l: &Lagrangian,
    p: &ScalarParametrization,
    y: usize,
    t: f64,
    m: usize,
) -> Result<VariationalSolution> {
    if p.len() != f.len() {
        return Err(Error::Refused(format!(
            "parametrization has {} entries for {} base points",
            p.len(),
            f.len()
        )));
    }
    if y >= f.len() {
        return Err(Error::Domain(format!("base index {y} out of range")));
    }
    if m == 0 {
        return Err(Error::Domain("curve needs at least one step".into()));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {t}")));
    }
    let inner: Vec<Result<InnerSolution>> = par::map_range(f.len(), |z| {
        minimize_curve(CurveProblem::quadratic_start(f, p, y, t, m, z), l, f, p)
    });
    let mut per_start = Vec::with_capacity(f.len());
    let mut best: Option<InnerSolution> = None;
    for sol in inner {
        let sol = sol?;
        per_start.push(sol.value);
        if best.as_ref().is_none_or(|b| sol.value < b.value) {
            best = Some(sol);
        }
    }
    let best = best.expect("nonempty base set");
    Ok(VariationalSolution {
        value: best.value,
        best,
        per_start,
    })
}
