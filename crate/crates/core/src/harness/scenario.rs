//! Scenario files.
//!
//! ```text
//! # comment
//! [scenario]
//! name=bateman-cubic  seed=42
//!
//! [family]
//! kind=bateman  F=phi  G=phi^2 + 1
//! branch=scan:-5,5,100
//!
//! [sample]
//! box=1,2;1,2  counts=8,8
//!
//! [tolerances]
//! root=1e-12  residual=1e-7  singular=1e-8
//!
//! [output]
//! json=report.json  csv=residuals.csv
//! ```
//!
//! A line may hold several `key=value` pairs. A value runs until the next
//! `key=` on the line, so expressions may contain spaces. Sections other
//! than `[family]` appear at most once; each `[family]` adds a family and may
//! override `box`, `counts` and `points` from `[sample]`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::families::{expected_checks, Check, ExpectedCheck, FamilyKind, FamilySpec};
use crate::implicit::{Branch, SampleMode, SampleSpec, DEFAULT_ROOT_TOL, DEFAULT_SINGULAR_THRESHOLD};
use crate::quad::SymFuncMatrix;

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-7;

/// One `[section]` with its entries and the line each key came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Section {
    pub name: String,
    pub entries: BTreeMap<String, String>,
    #[serde(skip)]
    lines: BTreeMap<String, usize>,
    #[serde(skip)]
    line: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub root: f64,
    /// Overrides every check's own tolerance when set.
    pub residual: Option<f64>,
    pub singular: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { root: DEFAULT_ROOT_TOL, residual: None, singular: DEFAULT_SINGULAR_THRESHOLD }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyConfig {
    pub name: String,
    pub spec: FamilySpec,
    pub checks: Vec<ExpectedCheck>,
    pub sample: SampleSpec,
    /// Level used by the equipotential check.
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub families: Vec<FamilyConfig>,
    pub tolerances: Tolerances,
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    /// Parsed sections, echoed into reports.
    pub sections: Vec<Section>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    build(split_sections(text)?)
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits `a=1 b=x + y` into `[("a", "1"), ("b", "x + y")]`.
fn split_pairs(line: &str, lineno: usize) -> Result<Vec<(String, String)>> {
    let bad = |message: String| Error::Config { line: lineno, message };
    let mut keys = Vec::new();
    for (eq, _) in line.match_indices('=') {
        let head = &line[..eq];
        let start = head.trim_end_matches(is_ident_char).len();
        let key = &head[start..];
        let boundary = head[..start].chars().next_back().is_none_or(char::is_whitespace);
        if key.is_empty() || !boundary || key.starts_with(|c: char| c.is_ascii_digit()) {
            return Err(bad(format!("expected `key=value`, found `{}`", line.trim())));
        }
        keys.push((start, eq, key));
    }
    if keys.is_empty() {
        return Err(bad(format!("expected `key=value`, found `{}`", line.trim())));
    }
    if !line[..keys[0].0].trim().is_empty() {
        return Err(bad(format!("stray text `{}` before `{}=`", line[..keys[0].0].trim(), keys[0].2)));
    }
    let mut out = Vec::new();
    for (i, (_, eq, key)) in keys.iter().enumerate() {
        let end = keys.get(i + 1).map_or(line.len(), |k| k.0);
        let value = line[eq + 1..end].trim();
        if value.is_empty() {
            return Err(bad(format!("`{key}` has no value")));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

const SECTIONS: [&str; 5] = ["scenario", "family", "sample", "tolerances", "output"];

fn split_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config { line: lineno, message: format!("unterminated section header `{line}`") })?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Config { line: lineno, message: format!("unknown section `[{name}]`") });
            }
            if name != "family" && sections.iter().any(|s| s.name == name) {
                return Err(Error::Config { line: lineno, message: format!("section `[{name}]` appears twice") });
            }
            sections.push(Section { name: name.into(), entries: BTreeMap::new(), lines: BTreeMap::new(), line: lineno });
            continue;
        }
        let Some(section) = sections.last_mut() else {
            return Err(Error::Config { line: lineno, message: "key before any section header".into() });
        };
        for (key, value) in split_pairs(line, lineno)? {
            if section.entries.contains_key(&key) {
                return Err(Error::Config { line: lineno, message: format!("duplicate key `{key}`") });
            }
            section.lines.insert(key.clone(), lineno);
            section.entries.insert(key, value);
        }
    }
    Ok(sections)
}

/// Typed access to one section's entries; every read marks the key used.
struct Reader<'a> {
    section: &'a Section,
    prefix: String,
    used: Vec<&'a str>,
}

impl<'a> Reader<'a> {
    fn new(section: &'a Section, prefix: String) -> Self {
        Reader { section, prefix, used: Vec::new() }
    }

    fn field(&self, key: &str) -> String {
        format!("{}.{key}", self.prefix)
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Validation { field: self.field(key), message: message.into() }
    }

    fn raw(&mut self, key: &str) -> Option<&'a str> {
        let (k, v) = self.section.entries.get_key_value(key)?;
        self.used.push(k.as_str());
        Some(v.as_str())
    }

    fn required(&mut self, key: &str) -> Result<&'a str> {
        self.raw(key).ok_or_else(|| self.invalid(key, "is required"))
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| self.invalid(key, format!("`{v}` is not a valid number"))),
        }
    }

    fn expr(&mut self, key: &str) -> Result<Expr> {
        let v = self.required(key)?;
        v.parse().map_err(|e| self.invalid(key, format!("{e}")))
    }

    fn expr_list(&mut self, key: &str) -> Result<Option<Vec<Expr>>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|s| s.trim().parse().map_err(|e| self.invalid(key, format!("{e}"))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str, sep: char) -> Result<Option<Vec<T>>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(sep)
            .map(|s| s.trim().parse().map_err(|_| self.invalid(key, format!("`{}` is not a valid number", s.trim()))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn names(&mut self, key: &str) -> Result<Option<Vec<String>>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let names: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
        for n in &names {
            let ok = n.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') && n.chars().all(is_ident_char);
            if !ok || n == "phi" {
                return Err(self.invalid(key, format!("`{n}` is not a usable coordinate name")));
            }
        }
        Ok(Some(names))
    }

    /// Fails on any key that was never read.
    fn finish(self) -> Result<()> {
        match self.section.entries.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(k) => Err(Error::Validation {
                field: format!("{}.{k}", self.prefix),
                message: format!("unknown key (line {})", self.section.lines[k]),
            }),
            None => Ok(()),
        }
    }
}

fn parse_branch(r: &mut Reader, key: &str) -> Result<Option<Branch<f64>>> {
    let Some(v) = r.raw(key) else { return Ok(None) };
    let bad = |r: &Reader| r.invalid(key, format!("`{v}` is not bracket:lo,hi, guess:g or scan:lo,hi,cells"));
    let (mode, args) = v.split_once(':').ok_or_else(|| bad(r))?;
    let nums: Vec<f64> = args.split(',').map(|s| s.trim().parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad(r))?;
    let branch = match (mode.trim(), nums.as_slice()) {
        ("bracket", [lo, hi]) if lo < hi => Branch::Bracket { lo: *lo, hi: *hi },
        ("guess", [g]) => Branch::Guess(*g),
        ("scan", [lo, hi, cells]) if lo < hi && *cells >= 1.0 && cells.fract() == 0.0 => {
            Branch::Scan { lo: *lo, hi: *hi, cells: *cells as usize }
        }
        _ => return Err(bad(r)),
    };
    Ok(Some(branch))
}

fn parse_box(r: &mut Reader) -> Result<Option<Vec<(f64, f64)>>> {
    let Some(v) = r.raw("box") else { return Ok(None) };
    let mut out = Vec::new();
    for axis in v.split(';') {
        let nums: Vec<f64> = axis
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| r.invalid("box", format!("`{axis}` is not lo,hi")))?;
        match nums.as_slice() {
            [lo, hi] if lo < hi && lo.is_finite() && hi.is_finite() => out.push((*lo, *hi)),
            _ => return Err(r.invalid("box", format!("`{}` is not an interval lo,hi with lo < hi", axis.trim()))),
        }
    }
    Ok(Some(out))
}

/// Box and point layout; family values take precedence over `[sample]`.
#[derive(Clone, Debug, Default)]
struct Layout {
    bounds: Option<Vec<(f64, f64)>>,
    mode: Option<SampleMode>,
}

impl Layout {
    fn read(r: &mut Reader) -> Result<Layout> {
        let bounds = parse_box(r)?;
        let counts = r.list::<usize>("counts", ',')?;
        let points = r.number::<usize>("points")?;
        let mode = match (counts, points) {
            (Some(_), Some(_)) => return Err(r.invalid("points", "give either counts or points, not both")),
            (Some(c), None) => Some(SampleMode::Grid(c)),
            (None, Some(k)) => Some(SampleMode::Random(k)),
            (None, None) => None,
        };
        Ok(Layout { bounds, mode })
    }

    fn over(self, base: &Layout) -> Layout {
        Layout { bounds: self.bounds.or_else(|| base.bounds.clone()), mode: self.mode.or_else(|| base.mode.clone()) }
    }
}

fn build(sections: Vec<Section>) -> Result<ScenarioConfig> {
    let find = |name: &str| sections.iter().find(|s| s.name == name);
    let empty = Section { name: String::new(), entries: BTreeMap::new(), lines: BTreeMap::new(), line: 0 };

    let mut sc = Reader::new(find("scenario").unwrap_or(&empty), "scenario".into());
    let name = sc.raw("name").unwrap_or("scenario").to_string();
    let scenario_seed = sc.number::<u64>("seed")?;
    sc.finish()?;

    let mut sa = Reader::new(find("sample").unwrap_or(&empty), "sample".into());
    let base = Layout::read(&mut sa)?;
    let sample_seed = sa.number::<u64>("seed")?;
    sa.finish()?;
    if let (Some(a), Some(b)) = (scenario_seed, sample_seed) {
        if a != b {
            return Err(Error::Validation { field: "sample.seed".into(), message: format!("conflicts with scenario.seed ({b} vs {a})") });
        }
    }
    let seed = scenario_seed.or(sample_seed).unwrap_or(0);

    let mut to = Reader::new(find("tolerances").unwrap_or(&empty), "tolerances".into());
    let mut tolerances = Tolerances::default();
    for (key, slot) in [("root", &mut tolerances.root), ("singular", &mut tolerances.singular)] {
        if let Some(v) = to.number::<f64>(key)? {
            if !(v > 0.0 && v.is_finite()) {
                return Err(to.invalid(key, "must be positive"));
            }
            *slot = v;
        }
    }
    if let Some(v) = to.number::<f64>("residual")? {
        if !(v > 0.0 && v.is_finite()) {
            return Err(to.invalid("residual", "must be positive"));
        }
        tolerances.residual = Some(v);
    }
    to.finish()?;

    let mut out = Reader::new(find("output").unwrap_or(&empty), "output".into());
    let json = out.raw("json").map(PathBuf::from);
    let csv = out.raw("csv").map(PathBuf::from);
    out.finish()?;

    let family_sections: Vec<&Section> = sections.iter().filter(|s| s.name == "family").collect();
    if family_sections.is_empty() {
        return Err(Error::Validation { field: "family".into(), message: "at least one [family] section is required".into() });
    }
    let mut families = Vec::new();
    for (i, s) in family_sections.into_iter().enumerate() {
        let prefix = if i == 0 { "family".to_string() } else { format!("family[{i}]") };
        families.push(build_family(s, prefix, &base, seed, &tolerances)?);
    }

    Ok(ScenarioConfig { name, seed, families, tolerances, json, csv, sections })
}

fn build_family(s: &Section, prefix: String, base: &Layout, seed: u64, tol: &Tolerances) -> Result<FamilyConfig> {
    let mut r = Reader::new(s, prefix);
    let kind = r.required("kind")?;
    let kind = match kind {
        "bateman" => FamilyKind::Bateman { f: r.expr("F")?, g: r.expr("G")? },
        "linear" => {
            let fs = r.expr_list("F")?.ok_or_else(|| r.invalid("F", "is required"))?;
            FamilyKind::Linear { fs, c: r.number("c")?.unwrap_or(1.0) }
        }
        "quadratic" => {
            let m = match (r.expr_list("M")?, r.expr_list("diag")?) {
                (Some(upper), None) => {
                    let len = upper.len();
                    let n = (1..=8).find(|n| n * (n + 1) / 2 == len).ok_or_else(|| {
                        r.invalid("M", format!("{len} entries is not the upper triangle of a square matrix"))
                    })?;
                    SymFuncMatrix::new(n, upper)
                }
                (None, Some(d)) => SymFuncMatrix::diagonal(d),
                _ => return Err(r.invalid("M", "give exactly one of M (upper triangle) or diag")),
            }
            .map_err(|e| r.invalid("M", e.to_string()))?;
            FamilyKind::Quadratic { m }
        }
        "chaundy" => FamilyKind::Chaundy { f: r.expr("F")?, g: r.expr("G")? },
        "explicit_complex" => FamilyKind::ExplicitComplex { outer: r.expr("F")?, f: r.expr("f")?, g: r.expr("g")? },
        "confocal" => {
            let mut get = |k: &str| r.number::<f64>(k)?.ok_or_else(|| r.invalid(k, "is required"));
            FamilyKind::Confocal { a2: get("a2")?, b2: get("b2")?, c2: get("c2")? }
        }
        "a_surface" => {
            let a = r.expr("A")?;
            let highest = a
                .free_vars()
                .iter()
                .filter_map(|v| v.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()))
                .max()
                .unwrap_or(1);
            FamilyKind::ASurface { k: r.number("k")?.unwrap_or(highest), a }
        }
        "implicit" => {
            let constraint = r.expr("C")?;
            let coords = r.names("vars")?.ok_or_else(|| r.invalid("vars", "is required"))?;
            FamilyKind::Implicit { constraint, coords }
        }
        "explicit" | "explicit_expr" => {
            let e = r.expr("e")?;
            let coords = match r.names("vars")? {
                Some(c) => c,
                None => e.free_vars().into_iter().collect(),
            };
            FamilyKind::Explicit { e, coords, degree: r.number("degree")? }
        }
        other => {
            return Err(r.invalid(
                "kind",
                format!("unknown kind `{other}`; expected one of bateman, linear, quadratic, chaundy, explicit_complex, confocal, a_surface, implicit, explicit"),
            ))
        }
    };
    // Arity messages start with the offending key when there is one.
    let field_of = |e: &Error| match e {
        Error::Arity(m) => m
            .split_whitespace()
            .next()
            .filter(|w| s.entries.contains_key(*w))
            .unwrap_or("kind")
            .to_string(),
        _ => "kind".into(),
    };
    let mut spec = FamilySpec::new(kind).map_err(|e| r.invalid(&field_of(&e), e.to_string()))?;
    if let Some(b) = parse_branch(&mut r, "branch")? {
        spec = spec.with_branch(b);
    }
    let name = r.raw("name").unwrap_or(spec.kind().name()).to_string();
    let level = r.number("level")?.unwrap_or(1.0);

    let defaults = expected_checks(&spec);
    let mut checks = match r.raw("checks") {
        None => defaults.clone(),
        Some(list) => list
            .split(',')
            .map(|c| {
                let c = c.trim();
                let check = Check::from_name(c).ok_or_else(|| r.invalid("checks", format!("unknown check `{c}`")))?;
                Ok(defaults
                    .iter()
                    .find(|d| d.check == check)
                    .copied()
                    .unwrap_or_else(|| ExpectedCheck::new(check, DEFAULT_RESIDUAL_TOL)))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    if let Some(t) = tol.residual {
        for c in &mut checks {
            c.tolerance = t;
        }
    }

    let layout = Layout::read(&mut r)?.over(base);
    let bounds = layout.bounds.ok_or_else(|| r.invalid("box", "no sample box given in [sample] or [family]"))?;
    if bounds.len() != spec.n() {
        return Err(r.invalid("box", format!("{} intervals for a family over {} coordinates", bounds.len(), spec.n())));
    }
    let mode = layout.mode.unwrap_or(SampleMode::Random(50));
    if let SampleMode::Grid(c) = &mode {
        if c.len() != bounds.len() {
            return Err(r.invalid("counts", format!("{} counts for {} box intervals", c.len(), bounds.len())));
        }
    }
    r.finish()?;
    Ok(FamilyConfig { name, spec, checks, sample: SampleSpec { bounds, mode, seed }, level })
}

impl Section {
    pub fn line(&self) -> usize {
        self.line
    }
}
