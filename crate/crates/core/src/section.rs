//! Sections of the quotient map, the scalar field `g = max_j f_j`, the bound
//! `K`, and the global, local and asymptotic intrinsic Lipschitz constants.

use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};
use crate::geometry::{dist, FiberedSpace, Point};
use crate::par;

pub const DEFAULT_TAU_SEC: f64 = 1e-9;

/// Relative slack applied to neighborhood radii so that sample spacings
/// written in decimal (0.7 - 0.6 != 0.1) still count as inside.
const RADIUS_SLACK: f64 = 1e-9;

pub(crate) fn within_radius(d: f64, r: f64) -> bool {
    d <= r * (1.0 + RADIUS_SLACK)
}

/// A tabulated section `y -> f(y)` with its pairwise distance tables.
///
/// `fiber_dist[i][j] = d(f(y_i), pi^{-1}(y_j))` and
/// `point_dist[i][j] = d(f(y_i), f(y_j))` are computed once at construction.
#[derive(Debug, Clone)]
pub struct Section {
    space: Arc<FiberedSpace>,
    values: Vec<Point>,
    fiber_dist: Vec<Vec<f64>>,
    point_dist: Vec<Vec<f64>>,
    g: Vec<f64>,
}

impl Section {
    /// Checks `pi o f = id` up to `tau_sec` and tabulates all distances.
    pub fn new(space: Arc<FiberedSpace>, values: Vec<Point>, tau_sec: f64) -> Result<Self> {
        let n = space.len();
        if values.len() != n {
            return Err(Error::Validation(format!(
                "section has {} values for {} base points",
                values.len(),
                n
            )));
        }
        if let Some(i) = values
            .iter()
            .position(|v| v.len() != space.kappa || v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::Validation(format!(
                "section value at base point {i} is not a finite point of dimension {}",
                space.kappa
            )));
        }
        let fiber_dist: Vec<Vec<f64>> = par::map_range(n, |i| {
            space
                .fibers
                .iter()
                .map(|fiber| fiber.distance(&values[i]).map(|d| d.0).unwrap_or(f64::INFINITY))
                .collect()
        });
        for (i, row) in fiber_dist.iter().enumerate() {
            if !(row[i] <= tau_sec) {
                return Err(Error::Validation(format!(
                    "section value at base point {i} is off its fiber by {:e}",
                    row[i]
                )));
            }
        }
        let point_dist = par::map_range(n, |i| {
            values.iter().map(|v| dist(&values[i], v)).collect()
        });
        let g = values
            .iter()
            .map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok(Self {
            space,
            values,
            fiber_dist,
            point_dist,
            g,
        })
    }

    pub fn space(&self) -> &FiberedSpace {
        &self.space
    }

    pub fn shared_space(&self) -> Arc<FiberedSpace> {
        Arc::clone(&self.space)
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `d(f(y_i), pi^{-1}(y_j))`.
    #[inline]
    pub fn fiber_dist(&self, i: usize, j: usize) -> f64 {
        self.fiber_dist[i][j]
    }

    /// `d(f(y_i), f(y_j))`.
    #[inline]
    pub fn point_dist(&self, i: usize, j: usize) -> f64 {
        self.point_dist[i][j]
    }

    /// `g(y_i) = max_j f_j(y_i)`.
    #[inline]
    pub fn g(&self, i: usize) -> f64 {
        self.g[i]
    }

    pub fn g_field(&self) -> &[f64] {
        &self.g
    }

    /// `sup_z max_j |f_j(z)|`.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `min_z min_j f_j(z)`.
    pub fn min_coordinate(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// The intrinsic quotient `d(f(y1), f(y2)) / d(f(y1), pi^{-1}(y2))`.
    /// `None` for 0/0; `+inf` for c/0 with c > 0.
    pub fn ratio(&self, y1: usize, y2: usize) -> Option<f64> {
        let num = self.point_dist[y1][y2];
        let den = self.fiber_dist[y1][y2];
        if den == 0.0 {
            if num == 0.0 {
                None
            } else {
                Some(f64::INFINITY)
            }
        } else {
            Some(num / den)
        }
    }

    /// Base indices `y != z` with `|y - z| <= r`.
    pub fn neighbors(&self, z: usize, r: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&y| y != z && within_radius(self.space.base_distance(y, z), r))
            .collect()
    }
}

pub fn g_field(f: &Section) -> Vec<f64> {
    f.g_field().to_vec()
}

/// Global intrinsic Lipschitz constant; `f64::INFINITY` is the unbounded flag.
pub fn global_ils(f: &Section) -> f64 {
    let n = f.len();
    if n < 2 {
        warn!("global ILS requested on a base set with {n} point(s); returning 0");
        return 0.0;
    }
    par::max_range(n, |i| {
        (0..n)
            .filter(|&j| j != i)
            .filter_map(|j| f.ratio(i, j))
            .fold(0.0, f64::max)
    })
}

/// Largest `d(f(y1), pi^{-1}(y2))` over ordered base pairs.
pub fn bound_k(f: &Section) -> f64 {
    let n = f.len();
    par::max_range(n, |i| f.fiber_dist[i].iter().copied().fold(0.0, f64::max)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeReport {
    pub ils_global: f64,
    pub radii: Vec<f64>,
    /// `local[z][k]`: estimate of the intrinsic slope at `z` for `radii[k]`.
    pub local: Vec<Vec<f64>>,
    /// `asymptotic[z][k]`: estimate of the asymptotic constant at `z` for `radii[k]`.
    pub asymptotic: Vec<Vec<f64>>,
    pub k: f64,
}

/// Finite-radius surrogates of the local and asymptotic constants.
///
/// `radii` must be nonempty and strictly decreasing. A point with no other
/// base point inside the radius gets 0.
pub fn local_slopes(f: &Section, radii: &[f64]) -> Result<SlopeReport> {
    if radii.is_empty() {
        return Err(Error::Domain("radius schedule is empty".into()));
    }
    if radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain(
            "radii must be positive and strictly decreasing".into(),
        ));
    }
    let n = f.len();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = par::map_range(n, |z| {
        let mut local = Vec::with_capacity(radii.len());
        let mut asym = Vec::with_capacity(radii.len());
        for &r in radii {
            let nbrs = f.neighbors(z, r);
            if nbrs.is_empty() {
                local.push(0.0);
                asym.push(0.0);
                continue;
            }
            let ils = nbrs
                .iter()
                .filter_map(|&y| f.ratio(y, z))
                .fold(0.0, f64::max);
            let mut ball = nbrs;
            ball.push(z);
            let mut ils_a: f64 = 0.0;
            for &a in &ball {
                for &b in &ball {
                    if a != b {
                        if let Some(q) = f.ratio(a, b) {
                            ils_a = ils_a.max(q);
                        }
                    }
                }
            }
            local.push(ils);
            asym.push(ils_a);
        }
        (local, asym)
    });
    let (local, asymptotic) = rows.into_iter().unzip();
    Ok(SlopeReport {
        ils_global: global_ils(f),
        radii: radii.to_vec(),
        local,
        asymptotic,
        k: bound_k(f),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleRecord {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    /// `d(f(x), pi^{-1}(y)) - d(f(x), pi^{-1}(z))`
    pub lhs: f64,
    /// `d(f(y), f(z))`
    pub rhs: f64,
}

impl TripleRecord {
    pub fn excess(&self) -> f64 {
        self.lhs - self.rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymmetryReport {
    pub triples_checked: usize,
    /// Smallest `d(f(y),f(z)) - [d(f(y),pi^{-1}(x)) - d(f(z),pi^{-1}(x))]`.
    pub first_form_worst_slack: f64,
    pub first_form_violations: Vec<(usize, usize, usize)>,
    /// Triples where `d(f(x),pi^{-1}(y)) - d(f(x),pi^{-1}(z)) > d(f(y),f(z))`.
    pub second_form_violations: Vec<TripleRecord>,
}

/// The two triangle-type inequalities with the fiber-distance orientation
/// swapped. The first always holds; the second may fail.
pub fn asymmetry_probe(f: &Section) -> AsymmetryReport {
    let n = f.len();
    let tol = |scale: f64| 1e-12 * (1.0 + scale);
    let rows = par::map_range(n, |x| {
        let mut worst = f64::INFINITY;
        let mut first = Vec::new();
        let mut second = Vec::new();
        for y in 0..n {
            for z in 0..n {
                let rhs = f.point_dist[y][z];
                let lhs1 = f.fiber_dist[y][x] - f.fiber_dist[z][x];
                let slack = rhs - lhs1;
                worst = worst.min(slack);
                if slack < -tol(rhs) {
                    first.push((x, y, z));
                }
                let rec = probe_triple(f, x, y, z);
                if rec.excess() > tol(rhs) {
                    second.push(rec);
                }
            }
        }
        (worst, first, second)
    });
    let mut report = AsymmetryReport {
        triples_checked: n * n * n,
        first_form_worst_slack: f64::INFINITY,
        first_form_violations: Vec::new(),
        second_form_violations: Vec::new(),
    };
    for (w, a, b) in rows {
        report.first_form_worst_slack = report.first_form_worst_slack.min(w);
        report.first_form_violations.extend(a);
        report.second_form_violations.extend(b);
    }
    report
}

pub fn probe_triple(f: &Section, x: usize, y: usize, z: usize) -> TripleRecord {
    TripleRecord {
        x,
        y,
        z,
        lhs: f.fiber_dist[x][y] - f.fiber_dist[x][z],
        rhs: f.point_dist[y][z],
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::geometry::FiberGeometry;

    #[test]
    fn g_is_max_coordinate() {
        let f = singleton_section(
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]],
            &[vec![8.0, 7.0], vec![3.0, 3.0], vec![1.0, 4.0]],
        );
        assert_eq!(g_field(&f), vec![8.0, 3.0, 4.0]);
    }

    #[test]
    fn two_point_constants() {
        let f = two_point();
        assert_eq!(global_ils(&f), 1.0);
        assert!((bound_k(&f) - 2f64.sqrt()).abs() < 1e-15);
        let rep = local_slopes(&f, &[2.0]).unwrap();
        assert_eq!(rep.local[0], vec![1.0]);
        assert_eq!(rep.asymptotic[0], vec![1.0]);
    }

    #[test]
    fn single_point_base() {
        let f = singleton_section(&[vec![0.0]], &[vec![3.0]]);
        assert_eq!(global_ils(&f), 0.0);
        assert_eq!(bound_k(&f), 0.0);
    }

    #[test]
    fn isolated_point_has_zero_slope() {
        let f = singleton_section(
            &[vec![0.0], vec![0.1], vec![5.0]],
            &[vec![0.0], vec![1.0], vec![2.0]],
        );
        let rep = local_slopes(&f, &[1.0, 0.5]).unwrap();
        assert_eq!(rep.local[2], vec![0.0, 0.0]);
        assert_eq!(rep.asymptotic[2], vec![0.0, 0.0]);
        assert!(rep.local[0][0] > 0.0);
    }

    #[test]
    fn radii_must_decrease() {
        let f = two_point();
        assert!(local_slopes(&f, &[]).is_err());
        assert!(local_slopes(&f, &[1.0, 2.0]).is_err());
        assert!(local_slopes(&f, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn zero_denominator_flags_infinity() {
        // f(1) = (1,0) lies off fiber 0 but fiber 0 reaches it: the pair (1,0)
        // has d(f(1), pi^{-1}(0)) = 0 with d(f(1), f(0)) = 1.
        let space = FiberedSpace::new(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![
                FiberGeometry::Segments(vec![[vec![0.0, 0.0], vec![1.0, 0.0]]]),
                FiberGeometry::Points(vec![vec![1.0, 0.0]]),
            ],
        );
        let f = Section::new(Arc::new(space), vec![vec![0.0, 0.0], vec![1.0, 0.0]], 1e-9).unwrap();
        assert_eq!(f.ratio(1, 0), Some(f64::INFINITY));
        assert_eq!(global_ils(&f), f64::INFINITY);
    }

    #[test]
    fn section_off_fiber_rejected() {
        let space = FiberedSpace::new(
            1,
            vec![vec![0.0]],
            vec![FiberGeometry::Points(vec![vec![1.0]])],
        );
        let err = Section::new(Arc::new(space), vec![vec![1.1]], 1e-9).unwrap_err();
        assert!(err.to_string().contains("base point 0"));
    }

    #[test]
    fn singleton_fibers_give_unit_ils_and_symmetric_probe() {
        let f = singleton_section(
            &[vec![0.0], vec![1.0], vec![2.0]],
            &[vec![0.0, 1.0], vec![3.0, -1.0], vec![2.0, 2.0]],
        );
        assert!((global_ils(&f) - 1.0).abs() < 1e-15);
        let rep = asymmetry_probe(&f);
        assert!(rep.first_form_violations.is_empty());
        // with singleton fibers both forms are the reverse triangle inequality
        assert!(rep.second_form_violations.is_empty());
        assert_eq!(rep.triples_checked, 27);
    }
}
