//! CSV and JSON report writers, and the `check` pipeline that produces a full
//! report bundle for a scenario.
//!
//! Numbers are written with 12 significant digits (`{:.11e}`), infinities as
//! `inf`/`-inf`. Rows are ordered by base id order, then time, then xi.

use std::fmt::Write as _;
use std::path::Path;

use log::info;

use crate::error::{Error, Result};
use crate::lagrangian::{
    biconjugate_rows, check_axioms, default_xi_grid, fenchel_young_violations, legendre_transform,
    midpoint_convexity_slack, AxiomReport, TransformTable,
};
use crate::par;
use crate::scenario::Scenario;
use crate::section::{asymmetry_probe, global_ils, local_slopes, probe_triple, AsymmetryReport, SlopeReport};
use crate::semigroup::{default_step, EvolutionTable, HjResidual, HopfLax, PairScan};
use crate::suite::{proposition_suite, Status, Verdict, SUITE_TOL};
use crate::variational::solve_variational;

pub const HJ_TOL: f64 = 1e-6;
pub const VARIATIONAL_TOL: f64 = 1e-7;
pub const NODE_LINEARITY_TOL: f64 = 1e-6;
pub const LEGENDRE_TOL: f64 = 1e-12;
pub const VARIATIONAL_STEPS: [usize; 3] = [1, 8, 64];
pub const REFINEMENT_RESOLUTIONS: [usize; 3] = [11, 101, 1001];
/// Number of base points sampled for the curve-problem comparison.
pub const VARIATIONAL_SAMPLES: usize = 9;

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.11e}")
    }
}

fn ids_joined(s: &Scenario, idx: &[usize]) -> String {
    idx.iter().map(|&i| s.id(i)).collect::<Vec<_>>().join(";")
}

pub fn evolution_csv(s: &Scenario, table: &EvolutionTable) -> String {
    let mut out = String::from("y,t,u,forward_u,argmin,id_minus,id_plus\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.id(r.y),
            num(r.t),
            num(r.u),
            num(r.forward_u),
            ids_joined(s, &r.argmin),
            num(r.id_minus),
            num(r.id_plus)
        );
    }
    out
}

pub fn slopes_csv(s: &Scenario, rep: &SlopeReport) -> String {
    let mut out = String::from("y,radius,ils_local,ils_asymptotic,ils_global,k\n");
    for (y, (loc, asy)) in rep.local.iter().zip(&rep.asymptotic).enumerate() {
        for (k, r) in rep.radii.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.id(y),
                num(*r),
                num(loc[k]),
                num(asy[k]),
                num(rep.ils_global),
                num(rep.k)
            );
        }
    }
    out
}

/// One row per (y, t, xi). `claimed` is the closed form `xi K / t - min L`;
/// `claim_gap = claimed - L*` records the mismatch.
pub fn transform_csv(s: &Scenario, tables: &[TransformTable]) -> String {
    let mut out = String::from("y,t,xi,lstar,argmax_w,claimed,claim_gap\n");
    for tab in tables {
        for i in 0..tab.xi_grid.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.id(tab.y),
                num(tab.t),
                num(tab.xi_grid[i]),
                num(tab.lstar[i]),
                num(tab.argmax_w[i]),
                num(tab.claimed[i]),
                num(tab.claimed[i] - tab.lstar[i])
            );
        }
    }
    out
}

/// Triples with `d(f(x),pi^{-1}y) - d(f(x),pi^{-1}z) > d(f(y),f(z))`.
pub fn asymmetry_csv(s: &Scenario, rep: &AsymmetryReport) -> String {
    let mut out = String::from("x,y,z,lhs,rhs,excess\n");
    for r in &rep.second_form_violations {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.id(r.x),
            s.id(r.y),
            s.id(r.z),
            num(r.lhs),
            num(r.rhs),
            num(r.excess())
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRow {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub computed_lhs: f64,
    pub stated_lhs: f64,
    pub stated_lhs_label: String,
    pub computed_rhs: f64,
    pub stated_rhs: f64,
}

impl ReferenceRow {
    pub fn violates(&self) -> bool {
        self.computed_lhs > self.computed_rhs
    }

    pub fn lhs_discrepancy(&self) -> f64 {
        self.computed_lhs - self.stated_lhs
    }

    pub fn flagged(&self) -> bool {
        self.lhs_discrepancy().abs() > 1e-9 || (self.computed_rhs - self.stated_rhs).abs() > 1e-9
    }
}

pub fn reference_rows(s: &Scenario) -> Result<Vec<ReferenceRow>> {
    s.file
        .reference_triples
        .iter()
        .map(|r| {
            let (x, y, z) = (s.index_of(&r.x)?, s.index_of(&r.y)?, s.index_of(&r.z)?);
            let t = probe_triple(&s.section, x, y, z);
            Ok(ReferenceRow {
                x,
                y,
                z,
                computed_lhs: t.lhs,
                stated_lhs: r.stated_lhs,
                stated_lhs_label: r.stated_lhs_label.clone(),
                computed_rhs: t.rhs,
                stated_rhs: r.stated_rhs,
            })
        })
        .collect()
}

pub fn reference_csv(s: &Scenario, rows: &[ReferenceRow]) -> String {
    let mut out = String::from(
        "x,y,z,computed_lhs,stated_lhs_label,stated_lhs,lhs_discrepancy,computed_rhs,stated_rhs,violates,flag\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.id(r.x),
            s.id(r.y),
            s.id(r.z),
            num(r.computed_lhs),
            r.stated_lhs_label,
            num(r.stated_lhs),
            num(r.lhs_discrepancy()),
            num(r.computed_rhs),
            num(r.stated_rhs),
            r.violates(),
            if r.flagged() { "DISCREPANCY" } else { "AGREES" }
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjRow {
    pub z: usize,
    pub t: f64,
    pub kind: &'static str,
    pub res: HjResidual,
}

pub fn hj_csv(s: &Scenario, rows: &[HjRow]) -> String {
    let mut out =
        String::from("z,t,kind,radius,neighbors,derivative,slope,prefactor,residual,half_residual\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.id(r.z),
            num(r.t),
            r.kind,
            num(r.res.radius),
            r.res.neighbors,
            num(r.res.derivative),
            num(r.res.slope),
            num(r.res.prefactor),
            num(r.res.residual),
            num(r.res.half_residual)
        );
    }
    out
}

pub fn pair_scan_csv(s: &Scenario, scans: &[PairScan]) -> String {
    let mut out = String::from(
        "t,pairs,violations,worst_slack,worst_z,worst_y,two_sided_violations,two_sided_worst_slack\n",
    );
    for p in scans {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(p.t),
            p.pairs,
            p.violations,
            num(p.worst_slack),
            s.id(p.worst_pair.0),
            s.id(p.worst_pair.1),
            p.two_sided_violations,
            num(p.two_sided_worst_slack)
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalRow {
    pub y: usize,
    pub t: f64,
    pub m: usize,
    pub value: f64,
    pub evolve: f64,
    pub best_z: usize,
    pub deviation: f64,
    pub sweeps: usize,
}

pub fn variational_csv(s: &Scenario, rows: &[VariationalRow]) -> String {
    let mut out = String::from("y,t,m,variational,evolve,gap,best_z,node_deviation,sweeps\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.id(r.y),
            num(r.t),
            r.m,
            num(r.value),
            num(r.evolve),
            num(r.value - r.evolve),
            s.id(r.best_z),
            num(r.deviation),
            r.sweeps
        );
    }
    out
}

pub fn verdicts_json(verdicts: &[Verdict]) -> String {
    let mut s = serde_json::to_string_pretty(verdicts).expect("verdicts serialize");
    s.push('\n');
    s
}

/// Replaces `x=3`-style base indices in a location string by base ids.
pub fn relabel(s: &Scenario, location: &str) -> String {
    location
        .split(',')
        .map(|tok| match tok.split_once('=') {
            Some((k @ ("x" | "y" | "z"), v)) => match v.parse::<usize>() {
                Ok(i) if i < s.section.len() => format!("{k}={}", s.id(i)),
                _ => tok.to_string(),
            },
            _ => tok.to_string(),
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Evenly spaced base indices, at most `k` of them, always including both ends.
pub fn sample_indices(n: usize, k: usize) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    let mut v: Vec<usize> = (0..k).map(|i| i * (n - 1) / (k - 1)).collect();
    v.dedup();
    v
}

/// Named files plus the verdict list.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub files: Vec<(String, String)>,
    pub verdicts: Vec<Verdict>,
}

impl ReportBundle {
    pub fn passed(&self) -> bool {
        crate::suite::all_pass(&self.verdicts)
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_str())
    }

    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

fn axiom_verdicts(ax: &AxiomReport) -> Vec<Verdict> {
    let v = |name: &str, slack: f64, count: usize| {
        let status = if count == 0 { Status::Pass } else { Status::Fail };
        Verdict::new(name, status, slack, format!("{count} violations"))
    };
    let mut out = vec![
        v("lagrangian.convexity", ax.convexity_worst_slack, ax.convexity_violations),
        v("lagrangian.transfer", ax.transfer_worst_slack, ax.transfer_violations),
        v("lagrangian.scaling", ax.scaling_worst_slack, ax.scaling_violations),
    ];
    if let Some((x, y, z, t)) = ax.transfer_witness {
        out[1].location = format!("{} violations, first x={x},y={y},z={z},t={t}", ax.transfer_violations);
    }
    out
}

struct Legendre {
    tables: Vec<TransformTable>,
    verdicts: Vec<Verdict>,
}

fn legendre_checks(s: &Scenario) -> Result<Legendre> {
    let f = &s.section;
    let l = &s.lagrangian;
    let names = [
        "legendre.fenchel_young",
        "legendre.midpoint_convexity",
        "legendre.biconjugate_below_l",
        "legendre.refinement_monotone",
    ];
    let xi = match default_xi_grid(f, s.file.grids.xi_resolution) {
        Ok(g) => g,
        Err(Error::Refused(why)) => {
            return Ok(Legendre {
                tables: Vec::new(),
                verdicts: names.iter().map(|n| Verdict::skipped(*n, why.clone())).collect(),
            })
        }
        Err(e) => return Err(e),
    };
    let ils = global_ils(f);
    let refine: Vec<Vec<f64>> = REFINEMENT_RESOLUTIONS
        .iter()
        .map(|&r| crate::lagrangian::linspace(0.0, ils, r))
        .collect();
    let keys: Vec<(usize, f64)> = (0..f.len())
        .flat_map(|y| s.times().iter().map(move |&t| (y, t)))
        .collect();
    struct Cell {
        table: TransformTable,
        fy: usize,
        convex: f64,
        below_l: f64,
        refinement: f64,
    }
    let cells: Vec<Result<Cell>> = par::map_slice(&keys, |&(y, t)| {
        let table = legendre_transform(l, f, y, t, &xi)?;
        let fy = fenchel_young_violations(l, &table);
        let convex = midpoint_convexity_slack(&table.lstar) / (1.0 + table.max_abs());
        let below_l = biconjugate_rows(l, &table.xi_grid, &table.lstar, &table.achievable_w)
            .iter()
            .map(|r| r.gap() / (1.0 + r.l.abs()))
            .fold(f64::INFINITY, f64::min);
        let mut gaps = Vec::new();
        for grid in &refine {
            let tab = legendre_transform(l, f, y, t, grid)?;
            let gap = biconjugate_rows(l, &tab.xi_grid, &tab.lstar, &tab.achievable_w)
                .iter()
                .map(|r| r.gap())
                .fold(0.0, f64::max);
            gaps.push(gap);
        }
        let refinement = gaps
            .windows(2)
            .map(|w| (w[0] - w[1]) / (1.0 + w[0].abs()))
            .fold(f64::INFINITY, f64::min);
        Ok(Cell {
            table,
            fy,
            convex,
            below_l,
            refinement,
        })
    });
    let mut tables = Vec::with_capacity(cells.len());
    let mut fy_total = 0;
    let mut worst: [(f64, String); 3] = std::array::from_fn(|_| (f64::INFINITY, String::new()));
    for (cell, &(y, t)) in cells.into_iter().zip(&keys) {
        let c = cell?;
        fy_total += c.fy;
        for (w, v) in worst.iter_mut().zip([c.convex, c.below_l, c.refinement]) {
            if v < w.0 {
                *w = (v, format!("y={},t={t}", s.id(y)));
            }
        }
        tables.push(c.table);
    }
    let fy_status = if fy_total == 0 { Status::Pass } else { Status::Fail };
    let mut verdicts = vec![Verdict::new(
        names[0],
        fy_status,
        0.0,
        format!("{fy_total} violating (xi, w) pairs"),
    )];
    for (name, (slack, at)) in names[1..].iter().zip(worst) {
        verdicts.push(Verdict::from_slack(*name, slack, LEGENDRE_TOL, at));
    }
    Ok(Legendre { tables, verdicts })
}

fn hj_checks(s: &Scenario, hl: &HopfLax<'_>) -> (Vec<HjRow>, Vec<Verdict>) {
    let names = ["hj.residual", "hj.residual_lipschitz"];
    if !s.lagrangian.is_model() {
        let why = "residual is stated for the model Lagrangian";
        return (Vec::new(), names.iter().map(|n| Verdict::skipped(*n, why)).collect());
    }
    let f = &s.section;
    let r = *s.radii().last().expect("radii validated nonempty");
    let ils = global_ils(f);
    let lipschitz = ils.is_finite() && ils > 0.0;
    let mut rows = Vec::new();
    for &t in s.times() {
        let u_t = hl.values_at(t);
        let h = default_step(t);
        let point = par::map_range(f.len(), |z| hl.hj_residual_with(&u_t, z, t, h, r));
        rows.extend(point.into_iter().enumerate().map(|(z, res)| HjRow {
            z,
            t,
            kind: "point",
            res,
        }));
        if lipschitz {
            let lip = par::map_range(f.len(), |z| hl.hj_residual_lipschitz_with(&u_t, z, t, h, r, ils));
            rows.extend(lip.into_iter().enumerate().map(|(z, res)| HjRow {
                z,
                t,
                kind: "lipschitz",
                res,
            }));
        }
    }
    let verdict = |kind: &str, name: &str| {
        let worst = rows
            .iter()
            .filter(|r| r.kind == kind)
            .max_by(|a, b| a.res.residual.total_cmp(&b.res.residual));
        match worst {
            Some(w) => Verdict::from_slack(
                name,
                -w.res.residual,
                HJ_TOL,
                format!("z={},t={},r={r}", s.id(w.z), w.t),
            ),
            None => Verdict::skipped(name, "no grid points"),
        }
    };
    let mut verdicts = vec![verdict("point", names[0])];
    verdicts.push(if lipschitz {
        verdict("lipschitz", names[1])
    } else {
        Verdict::skipped(names[1], format!("ILS = {ils}"))
    });
    (rows, verdicts)
}

fn pair_scan_checks(s: &Scenario, hl: &HopfLax<'_>) -> Result<(Vec<PairScan>, Verdict)> {
    let name = "hj.pair_scan";
    if !s.lagrangian.is_model() {
        return Ok((Vec::new(), Verdict::skipped(name, "estimate is stated for the model Lagrangian")));
    }
    let scans: Vec<PairScan> = s
        .times()
        .iter()
        .map(|&t| hl.slope_estimate_check(t))
        .collect::<Result<_>>()?;
    let worst = scans
        .iter()
        .min_by(|a, b| a.worst_slack.total_cmp(&b.worst_slack))
        .expect("times validated nonempty");
    let total: usize = scans.iter().map(|p| p.violations).sum();
    let v = Verdict::from_slack(
        name,
        worst.worst_slack,
        SUITE_TOL,
        format!(
            "{total} violations, worst z={},y={},t={}",
            s.id(worst.worst_pair.0),
            s.id(worst.worst_pair.1),
            worst.t
        ),
    );
    Ok((scans, v))
}

fn variational_checks(s: &Scenario, hl: &HopfLax<'_>) -> Result<(Vec<VariationalRow>, Vec<Verdict>)> {
    let names = ["variational.equivalence", "variational.linear_nodes"];
    let p = match s.parametrization() {
        Ok(p) => p,
        Err(Error::Refused(why)) => {
            return Ok((Vec::new(), names.iter().map(|n| Verdict::skipped(*n, why.clone())).collect()))
        }
        Err(e) => return Err(e),
    };
    let mut rows = Vec::new();
    for y in sample_indices(s.section.len(), VARIATIONAL_SAMPLES) {
        for &t in s.times() {
            let u = hl.evolve(y, t)?.value;
            for m in VARIATIONAL_STEPS {
                let sol = solve_variational(&s.section, &s.lagrangian, &p, y, t, m)?;
                rows.push(VariationalRow {
                    y,
                    t,
                    m,
                    value: sol.value,
                    evolve: u,
                    best_z: sol.best_z(),
                    deviation: sol.best.problem.deviation_from_linear(),
                    sweeps: sol.best.sweeps,
                });
            }
        }
    }
    let worst_by = |key: &dyn Fn(&VariationalRow) -> f64| {
        rows.iter()
            .max_by(|a, b| key(a).total_cmp(&key(b)))
            .map(|r| (key(r), format!("y={},t={},m={}", s.id(r.y), r.t, r.m)))
            .unwrap_or((0.0, String::new()))
    };
    let (gap, at_gap) = worst_by(&|r| (r.value - r.evolve).abs());
    let (dev, at_dev) = worst_by(&|r| r.deviation);
    let verdicts = vec![
        Verdict::from_slack(names[0], VARIATIONAL_TOL - gap, 0.0, at_gap),
        Verdict::from_slack(names[1], NODE_LINEARITY_TOL - dev, 0.0, at_dev),
    ];
    Ok((rows, verdicts))
}

/// Runs every check on the scenario and assembles the report files.
pub fn check(s: &Scenario) -> Result<ReportBundle> {
    let f = &s.section;
    let l = &s.lagrangian;
    let tol = s.tolerances();
    let hl = HopfLax::new(f, l, tol.tie);
    let mut verdicts = vec![Verdict::new("space.valid", Status::Pass, 0.0, s.name())];

    info!("axioms");
    let axioms = check_axioms(l, f, s.times())?;
    verdicts.extend(axiom_verdicts(&axioms));

    info!("asymmetry probe");
    let asym = asymmetry_probe(f);
    verdicts.push(Verdict::from_slack(
        "asymmetry.first_form",
        asym.first_form_worst_slack,
        SUITE_TOL,
        format!(
            "{} violations in {} triples",
            asym.first_form_violations.len(),
            asym.triples_checked
        ),
    ));
    let refs = reference_rows(s)?;

    info!("proposition suite");
    let suite = proposition_suite(f, l, &s.suite_config())?;
    verdicts.extend(suite.verdicts.into_iter().map(|mut v| {
        v.location = relabel(s, &v.location);
        v
    }));

    info!("evolution table");
    let table = EvolutionTable::build(&hl, s.times(), None)?;
    let slopes = local_slopes(f, s.radii())?;

    info!("hamilton-jacobi residuals");
    let (hj_rows, hj_verdicts) = hj_checks(s, &hl);
    verdicts.extend(hj_verdicts);
    let (scans, scan_verdict) = pair_scan_checks(s, &hl)?;
    verdicts.push(scan_verdict);

    info!("legendre transforms");
    let legendre = legendre_checks(s)?;
    verdicts.extend(legendre.verdicts);

    info!("curve problem");
    let (var_rows, var_verdicts) = variational_checks(s, &hl)?;
    verdicts.extend(var_verdicts);

    let files = vec![
        ("evolution.csv".to_string(), evolution_csv(s, &table)),
        ("slopes.csv".to_string(), slopes_csv(s, &slopes)),
        ("transform.csv".to_string(), transform_csv(s, &legendre.tables)),
        ("asymmetry.csv".to_string(), asymmetry_csv(s, &asym)),
        ("reference_triples.csv".to_string(), reference_csv(s, &refs)),
        ("hj.csv".to_string(), hj_csv(s, &hj_rows)),
        ("pair_scan.csv".to_string(), pair_scan_csv(s, &scans)),
        ("variational.csv".to_string(), variational_csv(s, &var_rows)),
        ("verdicts.json".to_string(), verdicts_json(&verdicts)),
    ];
    Ok(ReportBundle { files, verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{constant_singletons, two_point};

    #[test]
    fn number_format() {
        assert_eq!(num(0.5), "5.00000000000e-1");
        assert_eq!(num(-1.0 / 3.0), "-3.33333333333e-1");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(num(0.0), "0.00000000000e0");
    }

    #[test]
    fn locations_use_ids() {
        let s = Scenario::from_file(two_point()).unwrap();
        assert_eq!(relabel(&s, "x=0,y=1,t=0.5"), "x=a,y=b,t=0.5");
        assert_eq!(relabel(&s, "y=7,n=20"), "y=7,n=20");
    }

    #[test]
    fn samples_cover_ends() {
        assert_eq!(sample_indices(81, 9), vec![0, 10, 20, 30, 40, 50, 60, 70, 80]);
        assert_eq!(sample_indices(3, 9), vec![0, 1, 2]);
    }

    #[test]
    fn constant_section_check_passes() {
        let s = Scenario::from_file(constant_singletons()).unwrap();
        let b = check(&s).unwrap();
        let bad: Vec<_> = b.verdicts.iter().filter(|v| v.status == Status::Fail).collect();
        assert!(bad.is_empty(), "{bad:?}");
        assert!(b.passed());
    }

    #[test]
    fn two_point_evolution_rows() {
        let s = Scenario::from_file(two_point()).unwrap();
        let b = check(&s).unwrap();
        let ev = b.file("evolution.csv").unwrap();
        assert!(ev.starts_with("y,t,u,"));
        assert!(ev.contains("b,2.00000000000e0,5.00000000000e-1,"));
        let json: Vec<Verdict> = serde_json::from_str(b.file("verdicts.json").unwrap()).unwrap();
        assert_eq!(json, b.verdicts);
    }
}
