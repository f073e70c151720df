//! Scenario files: a JSON description of a fibered space, a section, a
//! Lagrangian and the evaluation grids.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "meta": { "name": "two-point", "description": "..." },
//!   "kappa": 2,
//!   "base": [ { "id": "a", "point": [0.0, 0.0], "param": 0.0 }, ... ],
//!   "fibers": [ { "id": "a", "type": "points", "data": [[0.0, 0.0]] }, ... ],
//!   "section": [ { "id": "a", "value": [0.0, 0.0] }, ... ],
//!   "lagrangian": { "name": "model-quadratic" },
//!   "grids": {
//!     "times": [0.5, 1.0], "xi_resolution": 101, "radii": [2.0, 1.0],
//!     "tolerances": { "geo": 1e-9, "sec": 1e-9, "tie": 1e-9 }
//!   },
//!   "reference_triples": [ ... ]
//! }
//! ```
//!
//! Segment fibers use `"type": "segments"` with `data` a list of endpoint
//! pairs. `param` is optional and only needed by the curve problem. The power
//! Lagrangian is `{ "name": "power", "params": { "coefficient": c, "exponent": p } }`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{validate_space, FiberGeometry, FiberedSpace, Point, SpaceReport};
use crate::lagrangian::Lagrangian;
use crate::section::Section;
use crate::suite::SuiteConfig;
use crate::variational::ScalarParametrization;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseRecord {
    pub id: String,
    pub point: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberRecord {
    pub id: String,
    #[serde(flatten)]
    pub geometry: FiberGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionRecord {
    pub id: String,
    pub value: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case")]
pub enum LagrangianSpec {
    ModelQuadratic,
    Power { coefficient: f64, exponent: f64 },
}

impl LagrangianSpec {
    pub fn build(&self) -> Result<Lagrangian> {
        match *self {
            LagrangianSpec::ModelQuadratic => Ok(Lagrangian::model_quadratic()),
            LagrangianSpec::Power {
                coefficient,
                exponent,
            } => Lagrangian::power(coefficient, exponent)
                .map_err(|e| Error::schema("lagrangian.params", e.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub geo: f64,
    pub sec: f64,
    pub tie: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            geo: 1e-9,
            sec: 1e-9,
            tie: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub times: Vec<f64>,
    pub xi_resolution: usize,
    pub radii: Vec<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// A triple `(x, y, z)` whose fiber-distance difference was stated in
/// published form, kept to report the computed value next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTriple {
    pub x: String,
    pub y: String,
    pub z: String,
    pub stated_lhs: f64,
    pub stated_lhs_label: String,
    pub stated_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub meta: Meta,
    pub kappa: usize,
    pub base: Vec<BaseRecord>,
    pub fibers: Vec<FiberRecord>,
    pub section: Vec<SectionRecord>,
    pub lagrangian: LagrangianSpec,
    pub grids: Grids,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference_triples: Vec<ReferenceTriple>,
}

impl ScenarioFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            use serde_json::error::Category;
            match e.classify() {
                Category::Data => Error::schema(format!("line {}, column {}", e.line(), e.column()), e.to_string()),
                Category::Io | Category::Syntax | Category::Eof => Error::Parse {
                    line: e.line(),
                    column: e.column(),
                    message: e.to_string(),
                },
            }
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// A loaded and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub section: Section,
    pub lagrangian: Lagrangian,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_file(ScenarioFile::from_json(&text)?)
}

fn finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// Reorders per-id records into base order, rejecting duplicates and strays.
fn by_base_order<'a, T>(
    field: &str,
    ids: &HashMap<&str, usize>,
    records: &'a [T],
    id_of: impl Fn(&T) -> &str,
) -> Result<Vec<&'a T>> {
    let mut slots: Vec<Option<&T>> = vec![None; ids.len()];
    for (k, r) in records.iter().enumerate() {
        let id = id_of(r);
        let i = *ids
            .get(id)
            .ok_or_else(|| Error::schema(format!("{field}[{k}].id"), format!("unknown base id '{id}'")))?;
        if slots[i].replace(r).is_some() {
            return Err(Error::schema(format!("{field}[{k}].id"), format!("duplicate entry for base id '{id}'")));
        }
    }
    let mut names: Vec<(&str, usize)> = ids.iter().map(|(k, v)| (*k, *v)).collect();
    names.sort_by_key(|p| p.1);
    slots
        .into_iter()
        .zip(names)
        .map(|(s, (id, _))| s.ok_or_else(|| Error::schema(field, format!("missing entry for base id '{id}'"))))
        .collect()
}

fn space_failures(rep: &SpaceReport, ids: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    out.extend(rep.non_finite.iter().map(|s| format!("non-finite coordinate in {s}")));
    out.extend(rep.dimension_mismatches.iter().map(|s| format!("wrong dimension in {s}")));
    for &(a, b) in &rep.duplicate_base_points {
        out.push(format!("base points '{}' and '{}' coincide", ids[a], ids[b]));
    }
    for &i in &rep.empty_fibers {
        out.push(format!("fiber of base id '{}' is empty", ids[i]));
    }
    for &i in &rep.degenerate_segments {
        out.push(format!("fiber of base id '{}' has a segment with equal endpoints", ids[i]));
    }
    for o in &rep.overlaps {
        out.push(format!(
            "fibers of base ids '{}' and '{}' are not disjoint (distance {:e})",
            ids[o.first], ids[o.second], o.distance
        ));
    }
    out
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::schema(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", file.schema_version),
            ));
        }
        if file.kappa == 0 {
            return Err(Error::schema("kappa", "must be at least 1"));
        }
        if file.base.is_empty() {
            return Err(Error::schema("base", "no base points"));
        }
        let mut ids: HashMap<&str, usize> = HashMap::new();
        for (i, b) in file.base.iter().enumerate() {
            if ids.insert(b.id.as_str(), i).is_some() {
                return Err(Error::schema(format!("base[{i}].id"), format!("duplicate base id '{}'", b.id)));
            }
            if b.point.len() != file.kappa {
                return Err(Error::schema(
                    format!("base[{i}].point"),
                    format!("base id '{}' has {} coordinates, kappa is {}", b.id, b.point.len(), file.kappa),
                ));
            }
        }
        let fibers = by_base_order("fibers", &ids, &file.fibers, |r| &r.id)?;
        let values = by_base_order("section", &ids, &file.section, |r| &r.id)?;
        let names: Vec<String> = file.base.iter().map(|b| b.id.clone()).collect();
        let tol = file.grids.tolerances;
        let space = FiberedSpace::new(
            file.kappa,
            file.base.iter().map(|b| b.point.clone()).collect(),
            fibers.iter().map(|r| r.geometry.clone()).collect(),
        );
        let rep = validate_space(&space, tol.geo);
        if !rep.is_valid() {
            return Err(Error::Validation(space_failures(&rep, &names).join("; ")));
        }
        for (i, v) in values.iter().enumerate() {
            if v.value.len() != file.kappa || !finite(&v.value) {
                return Err(Error::Validation(format!(
                    "section value of base id '{}' is not a finite point of dimension {}",
                    names[i], file.kappa
                )));
            }
            let (d, _) = space.fibers[i].distance(&v.value)?;
            if !(d <= tol.sec) {
                return Err(Error::Validation(format!(
                    "section value of base id '{}' is off its fiber by {d:e}",
                    names[i]
                )));
            }
        }
        let grids = &file.grids;
        if grids.times.is_empty() || grids.times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::schema("grids.times", "times must be a nonempty list of positive numbers"));
        }
        if grids.xi_resolution < 2 {
            return Err(Error::schema("grids.xi_resolution", "must be at least 2"));
        }
        if grids.radii.is_empty()
            || grids.radii.iter().any(|r| !(r.is_finite() && *r > 0.0))
            || grids.radii.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::schema("grids.radii", "radii must be positive and strictly decreasing"));
        }
        for (k, r) in file.reference_triples.iter().enumerate() {
            for id in [&r.x, &r.y, &r.z] {
                if !ids.contains_key(id.as_str()) {
                    return Err(Error::schema(
                        format!("reference_triples[{k}]"),
                        format!("unknown base id '{id}'"),
                    ));
                }
            }
        }
        let lagrangian = file.lagrangian.build()?;
        let section = Section::new(
            Arc::new(space),
            values.iter().map(|v| v.value.clone()).collect(),
            tol.sec,
        )?;
        Ok(Self {
            file,
            section,
            lagrangian,
        })
    }

    pub fn name(&self) -> &str {
        &self.file.meta.name
    }

    pub fn id(&self, i: usize) -> &str {
        &self.file.base[i].id
    }

    pub fn ids(&self) -> Vec<&str> {
        self.file.base.iter().map(|b| b.id.as_str()).collect()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.file
            .base
            .iter()
            .position(|b| b.id == id)
            .ok_or_else(|| Error::Domain(format!("unknown base id '{id}'")))
    }

    pub fn times(&self) -> &[f64] {
        &self.file.grids.times
    }

    pub fn radii(&self) -> &[f64] {
        &self.file.grids.radii
    }

    pub fn tolerances(&self) -> Tolerances {
        self.file.grids.tolerances
    }

    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            times: self.file.grids.times.clone(),
            xi_resolution: self.file.grids.xi_resolution,
            tau_tie: self.file.grids.tolerances.tie,
        }
    }

    pub fn parametrization(&self) -> Result<ScalarParametrization> {
        let p: Vec<Option<f64>> = self.file.base.iter().map(|b| b.param).collect();
        ScalarParametrization::from_optional(&p)
    }
}

fn points_fiber(id: String, pts: Vec<Point>) -> FiberRecord {
    FiberRecord {
        id,
        geometry: FiberGeometry::Points(pts),
    }
}

fn default_tolerances() -> Tolerances {
    Tolerances::default()
}

/// The two-line space of the introductory counterexample.
///
/// `X` is the union of the horizontal line `{y2 = 8}` and the line
/// `{y2 = 3 + y1/2}` over `0 <= y1 <= 8`, `Y` is the segment `[0,8] x {0}`
/// sampled with step 0.1, and `pi` is vertical projection. The section follows
/// the lower line except at three base points: `f(1,0) = (1,4)`,
/// `f(6,0) = (8,6)` and `f(7,0) = (8,7)`. Those values are added to the
/// corresponding fibers, and the fiber over `(8,0)` shrinks to `{(8,8)}` so
/// fibers stay disjoint.
pub fn paper_counterexample() -> ScenarioFile {
    let n = 81;
    let id = |i: usize| format!("x{:.1}", i as f64 / 10.0);
    let mut base = Vec::with_capacity(n);
    let mut fibers = Vec::with_capacity(n);
    let mut section = Vec::with_capacity(n);
    for i in 0..n {
        let x = i as f64 / 10.0;
        let lower = vec![x, 3.0 + x / 2.0];
        let (fiber, value) = match i {
            10 => (vec![vec![x, 8.0], lower, vec![1.0, 4.0]], vec![1.0, 4.0]),
            60 => (vec![vec![x, 8.0], lower, vec![8.0, 6.0]], vec![8.0, 6.0]),
            70 => (vec![vec![x, 8.0], lower, vec![8.0, 7.0]], vec![8.0, 7.0]),
            80 => (vec![vec![x, 8.0]], vec![x, 8.0]),
            _ => (vec![vec![x, 8.0], lower.clone()], lower),
        };
        base.push(BaseRecord {
            id: id(i),
            point: vec![x, 0.0],
            param: Some(x),
        });
        fibers.push(points_fiber(id(i), fiber));
        section.push(SectionRecord { id: id(i), value });
    }
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        meta: Meta {
            name: "paper-counterexample".into(),
            description: "Two lines over [0,8] with a section that breaks the triangle inequality for fiber distances"
                .into(),
        },
        kappa: 2,
        base,
        fibers,
        section,
        lagrangian: LagrangianSpec::ModelQuadratic,
        grids: Grids {
            times: vec![0.5, 1.0, 2.0, 4.0],
            xi_resolution: 101,
            radii: vec![1.0, 0.5, 0.1],
            tolerances: default_tolerances(),
        },
        reference_triples: vec![ReferenceTriple {
            x: id(10),
            y: id(70),
            z: id(60),
            stated_lhs: (5.0f64 / 4.0).sqrt(),
            stated_lhs_label: "sqrt(5/4)".into(),
            stated_rhs: 1.0,
        }],
    }
}

/// Base points `(0,0)` and `(1,0)`, singleton fibers `{(0,0)}` and `{(1,1)}`.
pub fn two_point() -> ScenarioFile {
    let ids = ["a", "b"];
    let points = [vec![0.0, 0.0], vec![1.0, 0.0]];
    let values = [vec![0.0, 0.0], vec![1.0, 1.0]];
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        meta: Meta {
            name: "two-point".into(),
            description: "Two base points with singleton fibers; u(b,t) = min(1/t, 1)".into(),
        },
        kappa: 2,
        base: (0..2)
            .map(|i| BaseRecord {
                id: ids[i].into(),
                point: points[i].clone(),
                param: Some(i as f64),
            })
            .collect(),
        fibers: (0..2).map(|i| points_fiber(ids[i].into(), vec![values[i].clone()])).collect(),
        section: (0..2)
            .map(|i| SectionRecord {
                id: ids[i].into(),
                value: values[i].clone(),
            })
            .collect(),
        lagrangian: LagrangianSpec::ModelQuadratic,
        grids: Grids {
            times: vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0],
            xi_resolution: 101,
            radii: vec![2.0, 1.0],
            tolerances: default_tolerances(),
        },
        reference_triples: Vec::new(),
    }
}

/// Singleton fibers over three points with `g` identically 1.
pub fn constant_singletons() -> ScenarioFile {
    let ids = ["p", "q", "r"];
    let values = [vec![0.0, 1.0], vec![1.0, 1.0], vec![-2.0, 1.0]];
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        meta: Meta {
            name: "constant-singletons".into(),
            description: "Singleton fibers with a constant scalar field".into(),
        },
        kappa: 2,
        base: (0..3)
            .map(|i| BaseRecord {
                id: ids[i].into(),
                point: vec![i as f64, 0.0],
                param: Some(i as f64),
            })
            .collect(),
        fibers: (0..3).map(|i| points_fiber(ids[i].into(), vec![values[i].clone()])).collect(),
        section: (0..3)
            .map(|i| SectionRecord {
                id: ids[i].into(),
                value: values[i].clone(),
            })
            .collect(),
        lagrangian: LagrangianSpec::ModelQuadratic,
        grids: Grids {
            times: vec![0.5, 1.0, 2.0],
            xi_resolution: 11,
            radii: vec![3.0, 1.0],
            tolerances: default_tolerances(),
        },
        reference_triples: Vec::new(),
    }
}

/// A valid random scenario: vertical fibers over evenly spaced base points
/// on the first axis, each either a few points or one vertical segment.
pub fn random_scenario(seed: u64) -> ScenarioFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=9);
    let spacing: f64 = rng.gen_range(0.5..1.5);
    let mut base = Vec::with_capacity(n);
    let mut fibers = Vec::with_capacity(n);
    let mut section = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("r{i}");
        let x = i as f64 * spacing;
        let (geometry, value) = if rng.gen_bool(0.5) {
            let k = rng.gen_range(1..=3);
            let mut hs: Vec<f64> = Vec::with_capacity(k);
            while hs.len() < k {
                let h: f64 = rng.gen_range(-3.0..3.0);
                if hs.iter().all(|o| (o - h).abs() > 0.1) {
                    hs.push(h);
                }
            }
            let pts: Vec<Point> = hs.iter().map(|&h| vec![x, h]).collect();
            let value = pts[rng.gen_range(0..k)].clone();
            (FiberGeometry::Points(pts), value)
        } else {
            let lo: f64 = rng.gen_range(-3.0..2.0);
            let hi = lo + rng.gen_range(0.5..2.0);
            let s: f64 = rng.gen_range(0.0..=1.0);
            let value = vec![x, lo + s * (hi - lo)];
            (FiberGeometry::Segments(vec![[vec![x, lo], vec![x, hi]]]), value)
        };
        base.push(BaseRecord {
            id: id.clone(),
            point: vec![x, 0.0],
            param: Some(x),
        });
        fibers.push(FiberRecord {
            id: id.clone(),
            geometry,
        });
        section.push(SectionRecord { id, value });
    }
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        meta: Meta {
            name: format!("random-{seed}"),
            description: "Generated vertical fibers over an evenly spaced base".into(),
        },
        kappa: 2,
        base,
        fibers,
        section,
        lagrangian: LagrangianSpec::ModelQuadratic,
        grids: Grids {
            times: vec![0.5, 1.0, 2.0, 4.0],
            xi_resolution: 101,
            radii: vec![2.0 * spacing, spacing],
            tolerances: default_tolerances(),
        },
        reference_triples: Vec::new(),
    }
}

/// Names of the scenarios shipped under `scenarios/`, with their generators.
pub fn shipped() -> Vec<(&'static str, ScenarioFile)> {
    vec![
        ("paper_counterexample.json", paper_counterexample()),
        ("two_point.json", two_point()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load() {
        for (_, file) in shipped() {
            Scenario::from_file(file).unwrap();
        }
        Scenario::from_file(constant_singletons()).unwrap();
        for seed in 0..20 {
            Scenario::from_file(random_scenario(seed)).unwrap();
        }
    }

    #[test]
    fn counterexample_layout() {
        let s = Scenario::from_file(paper_counterexample()).unwrap();
        assert_eq!(s.section.len(), 81);
        let x = s.index_of("x1.0").unwrap();
        assert_eq!(s.section.values()[x], vec![1.0, 4.0]);
        assert_eq!(s.index_of("x7.0").unwrap(), 70);
        assert!(s.parametrization().is_ok());
    }

    #[test]
    fn json_round_trip() {
        let file = paper_counterexample();
        assert_eq!(ScenarioFile::from_json(&file.to_json()).unwrap(), file);
    }

    #[test]
    fn off_fiber_value_names_the_id() {
        let mut file = two_point();
        file.section[1].value[1] += 0.1;
        let err = Scenario::from_file(file).unwrap_err();
        assert!(matches!(&err, Error::Validation(m) if m.contains("'b'")), "{err}");
    }

    #[test]
    fn duplicate_id_is_schema_violation() {
        let mut file = two_point();
        file.base[1].id = "a".into();
        assert!(matches!(Scenario::from_file(file), Err(Error::Schema { .. })));
    }

    #[test]
    fn missing_and_unknown_ids() {
        let mut file = two_point();
        file.section.pop();
        assert!(matches!(Scenario::from_file(file), Err(Error::Schema { .. })));
        let mut file = two_point();
        file.fibers[0].id = "zz".into();
        assert!(matches!(Scenario::from_file(file), Err(Error::Schema { .. })));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = ScenarioFile::from_json("{\n  \"schema_version\": 1,\n  oops\n}").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = ScenarioFile::from_json("{\"schema_version\": 1}").unwrap_err();
        assert!(matches!(err, Error::Schema { .. }), "{err}");
    }

    #[test]
    fn missing_param_refuses_curve_problem() {
        let mut file = two_point();
        file.base[0].param = None;
        let s = Scenario::from_file(file).unwrap();
        assert!(matches!(s.parametrization(), Err(Error::Refused(_))));
    }

    #[test]
    fn power_lagrangian_parses() {
        let mut file = two_point();
        file.lagrangian = LagrangianSpec::Power {
            coefficient: 0.5,
            exponent: 3.0,
        };
        let back = ScenarioFile::from_json(&file.to_json()).unwrap();
        let s = Scenario::from_file(back).unwrap();
        assert_eq!(s.lagrangian.eval(2.0), 4.0);
    }
}
