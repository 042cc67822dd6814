//! Running a scenario and writing its report.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::{equipotential_report, point_residual, Check, ExpectedCheck, Field};
use crate::harness::scenario::{FamilyConfig, ScenarioConfig, Section, Tolerances};
use crate::implicit::{FieldJet, SamplePoint};
use crate::residual::{PointRecord, ResidualReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TOOL: &str = "implicit-pde";
/// Largest fraction of sample points allowed to fail.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// The premise held nowhere, so nothing was claimed.
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureRecord {
    pub index: usize,
    pub point: Vec<f64>,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub tolerance: f64,
    pub status: Status,
    /// `"premise <= tolerance"` when the check is conditional.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub given: Option<String>,
    pub evaluated: usize,
    pub max_normalized: f64,
    pub mean_normalized: f64,
    /// Points the check was evaluated on but which failed tolerance.
    pub over_tolerance: usize,
    pub errors: Vec<FailureRecord>,
    #[serde(skip)]
    pub records: Vec<PointRecord>,
    /// Points skipped because the premise failed there.
    #[serde(skip)]
    pub skipped: Vec<(usize, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyOutcome {
    pub name: String,
    pub kind: String,
    pub points: usize,
    pub solved: usize,
    pub failures: Vec<FailureRecord>,
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioEcho {
    pub name: String,
    pub tolerances: Tolerances,
    pub sections: Vec<Section>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub scenario: ScenarioEcho,
    pub families: Vec<FamilyOutcome>,
    pub pass: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per evaluated point and check, plus one per solver failure.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["family", "check", "index", "point", "phi", "raw", "scale", "normalized", "status", "detail"])
            .map_err(io)?;
        let join = |p: &[f64]| p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
        for fam in &self.families {
            for f in &fam.failures {
                w.write_record([&fam.name, "solve", &f.index.to_string(), &join(&f.point), "", "", "", "", "error", &f.error])
                    .map_err(io)?;
            }
            for c in &fam.checks {
                for r in &c.records {
                    let status = if r.normalized <= c.tolerance { "pass" } else { "fail" };
                    w.write_record([
                        fam.name.as_str(),
                        &c.check,
                        &r.index.to_string(),
                        &join(&r.point),
                        &r.phi.to_string(),
                        &r.raw.to_string(),
                        &r.scale.to_string(),
                        &r.normalized.to_string(),
                        status,
                        "",
                    ])
                    .map_err(io)?;
                }
                for (index, point) in &c.skipped {
                    w.write_record([&fam.name, &c.check, &index.to_string(), &join(point), "", "", "", "", "skipped", "premise failed"])
                        .map_err(io)?;
                }
                for e in &c.errors {
                    w.write_record([&fam.name, &c.check, &e.index.to_string(), &join(&e.point), "", "", "", "", "error", &e.error])
                        .map_err(io)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Builds the field with the scenario's solver tolerances.
pub fn build_field(fam: &FamilyConfig, tol: &Tolerances) -> Result<Field> {
    Ok(match fam.spec.to_constraint()? {
        Field::Implicit(f) => Field::Implicit(f.with_root_tol(tol.root).with_singular_threshold(tol.singular)),
        explicit => explicit,
    })
}

/// Solves every family of the scenario on its sample.
pub fn sample_scenario(cfg: &ScenarioConfig) -> Result<Vec<(String, Vec<SamplePoint<f64>>)>> {
    cfg.families
        .iter()
        .map(|f| Ok((f.name.clone(), build_field(f, &cfg.tolerances)?.sample(&f.sample)?)))
        .collect()
}

fn failure(index: usize, point: &[f64], e: &Error) -> FailureRecord {
    FailureRecord { index, point: point.to_vec(), error: e.to_string() }
}

fn pointwise(fam: &FamilyConfig, expected: &ExpectedCheck, solved: &[(usize, FieldJet<f64>)]) -> CheckOutcome {
    let mut report = ResidualReport::new(expected.check.name(), expected.tolerance);
    let mut errors = Vec::new();
    let mut skipped = Vec::new();
    let mut claimed = 0;
    for (index, j) in solved {
        if let Some((premise, ptol)) = expected.given {
            match point_residual(&fam.spec, premise, j) {
                Ok(r) if r.normalized() <= ptol => {}
                Ok(_) => {
                    skipped.push((*index, j.x().to_vec()));
                    continue;
                }
                Err(e) => {
                    errors.push(failure(*index, j.x(), &e));
                    continue;
                }
            }
        }
        match point_residual(&fam.spec, expected.check, j) {
            Ok(r) => {
                report.push(*index, j, r);
                claimed += 1;
            }
            Err(e) => errors.push(failure(*index, j.x(), &e)),
        }
    }
    let over = report.records.iter().filter(|r| !(r.normalized <= expected.tolerance)).count();
    let status = if !errors.is_empty() || over > 0 {
        Status::Fail
    } else if claimed == 0 && expected.given.is_some() {
        Status::Vacuous
    } else {
        Status::Pass
    };
    CheckOutcome {
        check: expected.check.name().into(),
        tolerance: expected.tolerance,
        status,
        given: expected.given.map(|(c, t)| format!("{c} <= {t:e}")),
        evaluated: claimed,
        max_normalized: if claimed == 0 { 0.0 } else { report.max_normalized },
        mean_normalized: report.mean_normalized,
        over_tolerance: over,
        errors,
        records: report.records,
        skipped,
    }
}

fn equipotential(fam: &FamilyConfig, field: &Field, expected: &ExpectedCheck) -> CheckOutcome {
    let outcome = match field {
        Field::Implicit(f) => equipotential_report(f, fam.level, fam.sample.len(), fam.sample.seed, expected.tolerance),
        Field::Explicit { .. } => Err(Error::Arity("equipotential needs an implicit family".into())),
    };
    let (report, errors) = match outcome {
        Ok(r) => (r, Vec::new()),
        Err(e) => (ResidualReport::new(expected.check.name(), expected.tolerance), vec![failure(0, &[], &e)]),
    };
    CheckOutcome {
        check: expected.check.name().into(),
        tolerance: expected.tolerance,
        status: if errors.is_empty() && report.pass { Status::Pass } else { Status::Fail },
        given: None,
        evaluated: report.len(),
        max_normalized: report.max_normalized,
        mean_normalized: report.mean_normalized,
        over_tolerance: report.records.iter().filter(|r| !(r.normalized <= expected.tolerance)).count(),
        errors,
        records: report.records,
        skipped: Vec::new(),
    }
}

fn run_family(fam: &FamilyConfig, tol: &Tolerances) -> Result<FamilyOutcome> {
    let field = build_field(fam, tol)?;
    let needs_points = fam.checks.is_empty() || fam.checks.iter().any(|c| c.check != Check::Equipotential);
    let points = if needs_points { field.sample(&fam.sample)? } else { Vec::new() };
    let mut failures = Vec::new();
    let mut solved = Vec::new();
    for sp in points.iter() {
        match &sp.outcome {
            Ok(j) => solved.push((sp.index, j.clone())),
            Err(e) => failures.push(failure(sp.index, &sp.x, e)),
        }
    }
    if failures.len() as f64 > MAX_FAILED_FRACTION * points.len() as f64 {
        return Err(Error::SolverCoverage { failed: failures.len(), total: points.len() });
    }
    let checks: Vec<CheckOutcome> = fam
        .checks
        .iter()
        .map(|c| match c.check {
            Check::Equipotential => equipotential(fam, &field, c),
            _ => pointwise(fam, c, &solved),
        })
        .collect();
    let pass = checks.iter().all(|c| c.status != Status::Fail);
    Ok(FamilyOutcome {
        name: fam.name.clone(),
        kind: fam.spec.kind().name().into(),
        points: points.len(),
        solved: solved.len(),
        failures,
        checks,
        pass,
    })
}

/// Runs every family's checks. Fails with [`Error::SolverCoverage`] when
/// more than 10% of a family's points cannot be solved.
pub fn run_checks(cfg: &ScenarioConfig) -> Result<Report> {
    let families = cfg.families.iter().map(|f| run_family(f, &cfg.tolerances)).collect::<Result<Vec<_>>>()?;
    let pass = families.iter().all(|f| f.pass);
    Ok(Report {
        tool: TOOL.into(),
        version: VERSION.into(),
        seed: cfg.seed,
        scenario: ScenarioEcho { name: cfg.name.clone(), tolerances: cfg.tolerances, sections: cfg.sections.clone() },
        families,
        pass,
    })
}
