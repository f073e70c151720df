//! Fibered space: a finite base sample `Y` of `R^k`, one fiber per base point,
//! and exact Euclidean point-to-fiber distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub type Point = Vec<f64>;

pub const DEFAULT_TAU_GEO: f64 = 1e-9;

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn lerp(a: &[f64], b: &[f64], s: f64) -> Point {
    a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
}

/// Closest point to `p` on the segment `[a, b]`, as (distance, point).
pub fn dist_point_segment(p: &[f64], a: &[f64], b: &[f64]) -> (f64, Point) {
    let dir = sub(b, a);
    let len_sq = dot(&dir, &dir);
    if len_sq == 0.0 {
        return (dist(p, a), a.to_vec());
    }
    let s = (dot(&sub(p, a), &dir) / len_sq).clamp(0.0, 1.0);
    let q = lerp(a, b, s);
    (dist(p, &q), q)
}

/// Minimal distance between segments `[p1, q1]` and `[p2, q2]` in any dimension.
pub fn dist_segment_segment(p1: &[f64], q1: &[f64], p2: &[f64], q2: &[f64]) -> f64 {
    let d1 = sub(q1, p1);
    let d2 = sub(q2, p2);
    let r = sub(p1, p2);
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    let (s, t);
    if a == 0.0 && e == 0.0 {
        return dist(p1, p2);
    }
    if a == 0.0 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(&d1, &r);
        if e == 0.0 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(&d1, &d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    dist(&lerp(p1, q1, s), &lerp(p2, q2, t))
}

/// Finite discretization of a fiber `pi^{-1}(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "lowercase")]
pub enum FiberGeometry {
    Points(Vec<Point>),
    Segments(Vec<[Point; 2]>),
}

impl FiberGeometry {
    pub fn is_empty(&self) -> bool {
        match self {
            FiberGeometry::Points(p) => p.is_empty(),
            FiberGeometry::Segments(s) => s.is_empty(),
        }
    }

    fn all_points(&self) -> impl Iterator<Item = &Point> {
        let (pts, segs): (&[Point], &[[Point; 2]]) = match self {
            FiberGeometry::Points(p) => (p, &[]),
            FiberGeometry::Segments(s) => (&[], s),
        };
        pts.iter().chain(segs.iter().flat_map(|s| s.iter()))
    }

    /// Exact Euclidean distance from `p` to the fiber, with a witness point.
    pub fn distance(&self, p: &[f64]) -> Result<(f64, Point)> {
        let best = match self {
            FiberGeometry::Points(pts) => pts
                .iter()
                .map(|q| (dist(p, q), q.clone()))
                .min_by(|a, b| a.0.total_cmp(&b.0)),
            FiberGeometry::Segments(segs) => segs
                .iter()
                .map(|[a, b]| dist_point_segment(p, a, b))
                .min_by(|a, b| a.0.total_cmp(&b.0)),
        };
        best.ok_or_else(|| Error::Validation("distance to an empty fiber".into()))
    }

    /// Minimal distance between two fibers. Both must be nonempty.
    pub fn distance_to_fiber(&self, other: &FiberGeometry) -> f64 {
        use FiberGeometry::*;
        match (self, other) {
            (Points(a), _) => a
                .iter()
                .filter_map(|p| other.distance(p).ok().map(|d| d.0))
                .fold(f64::INFINITY, f64::min),
            (Segments(_), Points(_)) => other.distance_to_fiber(self),
            (Segments(a), Segments(b)) => a
                .iter()
                .flat_map(|[p1, q1]| b.iter().map(move |[p2, q2]| dist_segment_segment(p1, q1, p2, q2)))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// Euclidean distance from `p` to `fiber`, with the witness attaining it.
pub fn dist_to_fiber(p: &[f64], fiber: &FiberGeometry) -> Result<(f64, Point)> {
    fiber.distance(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberedSpace {
    pub kappa: usize,
    pub base_points: Vec<Point>,
    pub fibers: Vec<FiberGeometry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberOverlap {
    pub first: usize,
    pub second: usize,
    pub distance: f64,
}

/// Outcome of [`validate_space`]. Failures are listed, never raised.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpaceReport {
    pub base_count: usize,
    pub empty_base: bool,
    pub fiber_count_mismatch: bool,
    pub non_finite: Vec<String>,
    pub dimension_mismatches: Vec<String>,
    pub duplicate_base_points: Vec<(usize, usize)>,
    pub empty_fibers: Vec<usize>,
    pub degenerate_segments: Vec<usize>,
    pub overlaps: Vec<FiberOverlap>,
}

impl SpaceReport {
    pub fn is_bounded(&self) -> bool {
        self.non_finite.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        !self.empty_base
            && !self.fiber_count_mismatch
            && self.non_finite.is_empty()
            && self.dimension_mismatches.is_empty()
            && self.duplicate_base_points.is_empty()
            && self.empty_fibers.is_empty()
            && self.degenerate_segments.is_empty()
            && self.overlaps.is_empty()
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.empty_base {
            out.push("base point set is empty".to_string());
        }
        if self.fiber_count_mismatch {
            out.push("number of fibers differs from number of base points".to_string());
        }
        out.extend(self.non_finite.iter().map(|s| format!("non-finite coordinate in {s}")));
        out.extend(self.dimension_mismatches.iter().map(|s| format!("wrong dimension in {s}")));
        for (a, b) in &self.duplicate_base_points {
            out.push(format!("base points {a} and {b} coincide"));
        }
        for i in &self.empty_fibers {
            out.push(format!("fiber {i} is empty"));
        }
        for i in &self.degenerate_segments {
            out.push(format!("fiber {i} has a segment with equal endpoints"));
        }
        for o in &self.overlaps {
            out.push(format!(
                "fibers {} and {} are not disjoint (distance {:e})",
                o.first, o.second, o.distance
            ));
        }
        out
    }
}

impl FiberedSpace {
    pub fn new(kappa: usize, base_points: Vec<Point>, fibers: Vec<FiberGeometry>) -> Self {
        Self {
            kappa,
            base_points,
            fibers,
        }
    }

    /// Build and reject the space unless [`validate_space`] reports it valid.
    pub fn validated(
        kappa: usize,
        base_points: Vec<Point>,
        fibers: Vec<FiberGeometry>,
        tau_geo: f64,
    ) -> Result<Self> {
        let space = Self::new(kappa, base_points, fibers);
        let report = validate_space(&space, tau_geo);
        if report.is_valid() {
            Ok(space)
        } else {
            Err(Error::Validation(report.failures().join("; ")))
        }
    }

    pub fn len(&self) -> usize {
        self.base_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base_points.is_empty()
    }

    pub fn base_distance(&self, i: usize, j: usize) -> f64 {
        dist(&self.base_points[i], &self.base_points[j])
    }
}

pub fn validate_space(s: &FiberedSpace, tau_geo: f64) -> SpaceReport {
    let mut report = SpaceReport {
        base_count: s.base_points.len(),
        empty_base: s.base_points.is_empty(),
        fiber_count_mismatch: s.base_points.len() != s.fibers.len(),
        ..Default::default()
    };

    let check_point = |label: String, p: &Point, report: &mut SpaceReport| {
        if p.len() != s.kappa {
            report.dimension_mismatches.push(label.clone());
        }
        if p.iter().any(|x| !x.is_finite()) {
            report.non_finite.push(label);
        }
    };
    if s.kappa == 0 {
        report.dimension_mismatches.push("ambient dimension 0".into());
    }
    for (i, p) in s.base_points.iter().enumerate() {
        check_point(format!("base point {i}"), p, &mut report);
    }
    for (i, fiber) in s.fibers.iter().enumerate() {
        if fiber.is_empty() {
            report.empty_fibers.push(i);
        }
        for p in fiber.all_points() {
            check_point(format!("fiber {i}"), p, &mut report);
        }
        if let FiberGeometry::Segments(segs) = fiber {
            if segs.iter().any(|[a, b]| a == b) {
                report.degenerate_segments.push(i);
            }
        }
    }
    if !report.dimension_mismatches.is_empty() || !report.non_finite.is_empty() {
        // Distances are meaningless on malformed coordinates.
        return report;
    }

    let n = s.base_points.len();
    for i in 0..n {
        for j in i + 1..n {
            if s.base_points[i] == s.base_points[j] {
                report.duplicate_base_points.push((i, j));
            }
        }
    }

    let m = s.fibers.len();
    let rows = par::map_range(m, |i| {
        let mut found = Vec::new();
        if s.fibers[i].is_empty() {
            return found;
        }
        for j in i + 1..m {
            if s.fibers[j].is_empty() {
                continue;
            }
            let d = s.fibers[i].distance_to_fiber(&s.fibers[j]);
            if d < tau_geo {
                found.push(FiberOverlap {
                    first: i,
                    second: j,
                    distance: d,
                });
            }
        }
        found
    });
    report.overlaps = rows.into_iter().flatten().collect();
    report
}
