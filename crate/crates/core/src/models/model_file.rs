use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::algebroid::{base_symbols, LieAlgebroidData};
use super::chart::{ChartKind, ChartPoint, ChartSpec};
use super::section::GridSpec;
use crate::error::{FieldError, Result};
use crate::expr::{CoordRole, ScalarField, SymbolTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ModelKind {
    Lagrangian,
    Hamiltonian,
    SkinnerRusk,
    AlgebroidLagrangian,
    AlgebroidHamiltonian,
}

impl ModelKind {
    pub fn parse(s: &str) -> Option<ModelKind> {
        Some(match s {
            "lagrangian" => ModelKind::Lagrangian,
            "hamiltonian" => ModelKind::Hamiltonian,
            "skinner_rusk" => ModelKind::SkinnerRusk,
            "algebroid_lagrangian" => ModelKind::AlgebroidLagrangian,
            "algebroid_hamiltonian" => ModelKind::AlgebroidHamiltonian,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lagrangian => "lagrangian",
            ModelKind::Hamiltonian => "hamiltonian",
            ModelKind::SkinnerRusk => "skinner_rusk",
            ModelKind::AlgebroidLagrangian => "algebroid_lagrangian",
            ModelKind::AlgebroidHamiltonian => "algebroid_hamiltonian",
        }
    }

    pub fn chart_kind(self) -> ChartKind {
        match self {
            ModelKind::Lagrangian => ChartKind::LagrangianBundle,
            ModelKind::Hamiltonian => ChartKind::HamiltonianBundle,
            ModelKind::SkinnerRusk => ChartKind::WhitneySum,
            ModelKind::AlgebroidLagrangian => ChartKind::AlgebroidVel,
            ModelKind::AlgebroidHamiltonian => ChartKind::AlgebroidMom,
        }
    }

    pub fn is_algebroid(self) -> bool {
        matches!(self, ModelKind::AlgebroidLagrangian | ModelKind::AlgebroidHamiltonian)
    }
}

/// A parsed and cross-validated model file.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub chart: ChartSpec,
    pub lagrangian: Option<ScalarField>,
    pub hamiltonian: Option<ScalarField>,
    pub algebroid: Option<LieAlgebroidData>,
    /// Initial values by coordinate name, in file order.
    pub initial: Option<Vec<(String, f64)>>,
    pub grid: Option<GridSpec>,
    /// Reference fiber coefficients `X{A}_{i}_{B}` for the second-order solve,
    /// stored `[A][i][B]` (A-major). Absent entries are zero.
    pub gauge: Option<Vec<ScalarField>>,
    pub path: Option<PathBuf>,
}

impl ModelSpec {
    /// Symbols legal in `L` for this kind.
    pub fn lagrangian_symbols(&self) -> SymbolTable {
        lagrangian_symbols(self.kind, self.chart.k, self.chart.n, self.chart.m)
    }

    pub fn hamiltonian_symbols(&self) -> SymbolTable {
        hamiltonian_symbols(self.kind, self.chart.k, self.chart.n, self.chart.m)
    }

    pub fn lagrangian(&self) -> Result<&ScalarField> {
        self.lagrangian
            .as_ref()
            .ok_or_else(|| FieldError::Config("model has no L expression".into()))
    }

    pub fn hamiltonian(&self) -> Result<&ScalarField> {
        self.hamiltonian
            .as_ref()
            .ok_or_else(|| FieldError::Config("model has no H expression".into()))
    }

    pub fn algebroid(&self) -> Result<&LieAlgebroidData> {
        self.algebroid
            .as_ref()
            .ok_or_else(|| FieldError::Config("model has no algebroid data".into()))
    }

    /// Initial point on `chart`. Unlisted coordinates are 0; times default to the grid origin.
    pub fn initial_point_on(&self, chart: ChartSpec) -> Result<ChartPoint> {
        let init = self
            .initial
            .as_ref()
            .ok_or_else(|| FieldError::Config("model has no [initial] section".into()))?;
        let mut x = ChartPoint::zeros(chart);
        if let Some(g) = &self.grid {
            x.values[..chart.k].copy_from_slice(&g.origin);
        }
        for (name, v) in init {
            if chart.index_of_name(name).is_some() {
                x.set(name, *v)?;
            }
        }
        Ok(x)
    }

    pub fn initial_point(&self) -> Result<ChartPoint> {
        self.initial_point_on(self.chart)
    }
}

pub fn lagrangian_symbols(kind: ModelKind, k: usize, n: usize, m: usize) -> SymbolTable {
    let chart = if kind.is_algebroid() {
        ChartSpec::algebroid_vel(k, n, m.max(1))
    } else {
        ChartSpec::lagrangian(k, n)
    };
    chart.symbols()
}

pub fn hamiltonian_symbols(kind: ModelKind, k: usize, n: usize, m: usize) -> SymbolTable {
    let chart = if kind.is_algebroid() {
        ChartSpec::algebroid_mom(k, n, m.max(1))
    } else {
        ChartSpec::hamiltonian(k, n)
    };
    chart.symbols()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| FieldError::Io(format!("{}: {e}", path.display())))?;
    let mut spec = parse_model(&text)?;
    spec.path = Some(path.to_path_buf());
    Ok(spec)
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn perr(line: usize, message: impl Into<String>) -> FieldError {
    FieldError::ModelParse { line, message: message.into() }
}

const SECTIONS: [&str; 6] = ["model", "expressions", "algebroid", "initial", "grid", "gauge"];

pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let mut sections: BTreeMap<String, (usize, Vec<Entry>)> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| perr(line, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(perr(line, format!("unknown section [{name}]")));
            }
            if sections.contains_key(name) {
                return Err(perr(line, format!("section [{name}] appears twice")));
            }
            sections.insert(name.to_string(), (line, Vec::new()));
            current = Some(name.to_string());
            continue;
        }
        let sec = current
            .as_ref()
            .ok_or_else(|| perr(line, "key/value line before any section header"))?;
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| perr(line, "expected `key = value`"))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(perr(line, "empty key"));
        }
        let entries = &mut sections.get_mut(sec).unwrap().1;
        if entries.iter().any(|e| e.key == key) {
            return Err(perr(line, format!("duplicate key `{key}`")));
        }
        entries.push(Entry { line, key, value: value.trim().to_string() });
    }

    let (model_line, model) = sections
        .remove("model")
        .ok_or_else(|| perr(0, "missing [model] section"))?;
    let mut kind = None;
    let (mut k, mut n, mut m) = (None, None, None);
    for e in &model {
        let int = |e: &Entry| -> Result<usize> {
            e.value
                .parse::<usize>()
                .map_err(|_| perr(e.line, format!("`{}` must be a non-negative integer", e.key)))
        };
        match e.key.as_str() {
            "kind" => {
                kind = Some(
                    ModelKind::parse(&e.value)
                        .ok_or_else(|| perr(e.line, format!("unknown model kind `{}`", e.value)))?,
                )
            }
            "k" => k = Some(int(e)?),
            "n" => n = Some(int(e)?),
            "m" => m = Some(int(e)?),
            other => return Err(perr(e.line, format!("unknown [model] key `{other}`"))),
        }
    }
    let kind = kind.ok_or_else(|| perr(model_line, "[model] needs `kind`"))?;
    let k = k.ok_or_else(|| perr(model_line, "[model] needs `k`"))?;
    let n = n.ok_or_else(|| perr(model_line, "[model] needs `n`"))?;
    if k == 0 {
        return Err(FieldError::DimensionMismatch("k must be at least 1".into()));
    }
    if n == 0 {
        return Err(FieldError::DimensionMismatch(
            "n = 0 is not supported; use n = 1 with a zero anchor".into(),
        ));
    }
    let m = match (kind.is_algebroid(), m) {
        (true, Some(m)) if m >= 1 => m,
        (true, _) => {
            return Err(FieldError::DimensionMismatch(
                "algebroid models need m >= 1".into(),
            ))
        }
        (false, Some(_)) => {
            return Err(FieldError::DimensionMismatch(format!(
                "m is only meaningful for algebroid kinds, not {}",
                kind.as_str()
            )))
        }
        (false, None) => 0,
    };
    let chart = ChartSpec::new(kind.chart_kind(), k, n, m)?;

    // Expressions
    let lag_syms = lagrangian_symbols(kind, k, n, m);
    let ham_syms = hamiltonian_symbols(kind, k, n, m);
    let mut lagrangian = None;
    let mut hamiltonian = None;
    if let Some((_, exprs)) = sections.remove("expressions") {
        for e in &exprs {
            match e.key.as_str() {
                "L" => lagrangian = Some(parse_in(&e.value, &lag_syms, chart, e.line, "L")?),
                "H" => hamiltonian = Some(parse_in(&e.value, &ham_syms, chart, e.line, "H")?),
                other => return Err(perr(e.line, format!("unknown expression `{other}`"))),
            }
        }
    }
    match kind {
        ModelKind::Lagrangian | ModelKind::SkinnerRusk | ModelKind::AlgebroidLagrangian
            if lagrangian.is_none() =>
        {
            return Err(FieldError::Config(format!("{} model needs L", kind.as_str())))
        }
        ModelKind::Hamiltonian | ModelKind::AlgebroidHamiltonian if hamiltonian.is_none() => {
            return Err(FieldError::Config(format!("{} model needs H", kind.as_str())))
        }
        _ => {}
    }

    // Algebroid
    let algebroid = match (kind.is_algebroid(), sections.remove("algebroid")) {
        (false, Some((line, _))) => {
            return Err(perr(line, "[algebroid] is only allowed for algebroid kinds"))
        }
        (false, None) => None,
        (true, entries) => Some(parse_algebroid(
            n,
            m,
            entries.map(|e| e.1).unwrap_or_default(),
            chart,
        )?),
    };

    // Initial data
    let initial = match sections.remove("initial") {
        None => None,
        Some((_, entries)) => {
            let mut out = Vec::new();
            for e in entries {
                check_coordinate(&e.key, chart, e.line, "[initial]")?;
                let v: f64 = e.value.parse().map_err(|_| {
                    perr(e.line, format!("value for `{}` is not a real number", e.key))
                })?;
                if !v.is_finite() {
                    return Err(perr(e.line, "initial values must be finite"));
                }
                out.push((e.key, v));
            }
            Some(out)
        }
    };

    // Grid
    let grid = match sections.remove("grid") {
        None => None,
        Some((line, entries)) => Some(parse_grid(k, line, entries)?),
    };

    // Reference gauge
    let gauge = match sections.remove("gauge") {
        None => None,
        Some((line, entries)) => {
            if !matches!(kind, ModelKind::Lagrangian | ModelKind::SkinnerRusk | ModelKind::AlgebroidLagrangian) {
                return Err(perr(line, "[gauge] is only allowed for Lagrangian kinds"));
            }
            let fiber = if kind.is_algebroid() { m } else { n };
            let mut g = vec![ScalarField::constant(0.0); k * fiber * k];
            for e in entries {
                let idx = parse_indices(&e.key, "X", 3)
                    .ok_or_else(|| perr(e.line, format!("gauge keys look like X<A>_<i>_<B>, got `{}`", e.key)))?;
                let (a, i, b) = (idx[0], idx[1], idx[2]);
                if a >= k || b >= k || i >= fiber {
                    return Err(FieldError::DimensionMismatch(format!(
                        "line {}: `{}` is out of range",
                        e.line, e.key
                    )));
                }
                g[(a * fiber + i) * k + b] = parse_in(&e.value, &lag_syms, chart, e.line, &e.key)?;
            }
            Some(g)
        }
    };

    Ok(ModelSpec {
        kind,
        chart,
        lagrangian,
        hamiltonian,
        algebroid,
        initial,
        grid,
        gauge,
        path: None,
    })
}

/// Parses an expression, mapping undeclared identifiers to the error the loader promises.
fn parse_in(
    text: &str,
    syms: &SymbolTable,
    chart: ChartSpec,
    line: usize,
    what: &str,
) -> Result<ScalarField> {
    match ScalarField::parse(text, syms) {
        Ok(f) => Ok(f),
        Err(FieldError::UndeclaredIdentifier(name)) => Err(classify(&name, syms, chart, line, what)),
        Err(FieldError::Syntax { offset, message }) => {
            Err(perr(line, format!("{what}: {message} at column {}", offset + 1)))
        }
        Err(e) => Err(e),
    }
}

fn classify(name: &str, syms: &SymbolTable, chart: ChartSpec, line: usize, what: &str) -> FieldError {
    let Some(role) = CoordRole::parse(name) else {
        return perr(line, format!("{what}: undeclared identifier `{name}`"));
    };
    // Same role family as a legal symbol but indices out of range.
    let same_family = syms
        .names()
        .iter()
        .filter_map(|s| CoordRole::parse(s))
        .any(|r| std::mem::discriminant(&r) == std::mem::discriminant(&role));
    if same_family {
        FieldError::DimensionMismatch(format!(
            "line {line}: {what} references `{name}`, outside k={}, n={}, m={}",
            chart.k, chart.n, chart.m
        ))
    } else {
        FieldError::IllegalCoordinate {
            name: name.to_string(),
            context: format!("{what} (line {line})"),
        }
    }
}

fn check_coordinate(name: &str, chart: ChartSpec, line: usize, what: &str) -> Result<()> {
    if chart.index_of_name(name).is_some() {
        return Ok(());
    }
    Err(classify(name, &chart.symbols(), chart, line, what))
}

fn parse_indices(key: &str, prefix: &str, count: usize) -> Option<Vec<usize>> {
    let rest = key.strip_prefix(prefix)?;
    let rest = rest.strip_prefix('_').unwrap_or(rest);
    let idx: Vec<usize> = rest
        .split('_')
        .map(|s| s.parse::<usize>().ok().filter(|&v| v >= 1).map(|v| v - 1))
        .collect::<Option<_>>()?;
    (idx.len() == count).then_some(idx)
}

fn parse_algebroid(n: usize, m: usize, entries: Vec<Entry>, chart: ChartSpec) -> Result<LieAlgebroidData> {
    let syms = base_symbols(n);
    let mut rho = vec![ScalarField::constant(0.0); m * n];
    let mut c: Vec<Option<ScalarField>> = vec![None; m * m * m];
    for e in &entries {
        if let Some(idx) = parse_indices(&e.key, "rho", 2) {
            let (a, i) = (idx[0], idx[1]);
            if a >= m || i >= n {
                return Err(FieldError::DimensionMismatch(format!(
                    "line {}: `{}` is out of range for n={n}, m={m}",
                    e.line, e.key
                )));
            }
            rho[a * n + i] = parse_in(&e.value, &syms, chart, e.line, &e.key)?;
        } else if let Some(idx) = parse_indices(&e.key, "C", 3) {
            let (g, a, b) = (idx[0], idx[1], idx[2]);
            if g >= m || a >= m || b >= m {
                return Err(FieldError::DimensionMismatch(format!(
                    "line {}: `{}` is out of range for m={m}",
                    e.line, e.key
                )));
            }
            c[(g * m + a) * m + b] = Some(parse_in(&e.value, &syms, chart, e.line, &e.key)?);
        } else {
            return Err(perr(e.line, format!("unknown [algebroid] key `{}`", e.key)));
        }
    }
    // Fill omitted antisymmetric partners with negatives.
    let mut full = Vec::with_capacity(m * m * m);
    for g in 0..m {
        for a in 0..m {
            for b in 0..m {
                let v = match (&c[(g * m + a) * m + b], &c[(g * m + b) * m + a]) {
                    (Some(f), _) => f.clone(),
                    (None, Some(partner)) => partner.scale(-1.0),
                    (None, None) => ScalarField::constant(0.0),
                };
                full.push(v);
            }
        }
    }
    LieAlgebroidData::new(n, m, rho, full)
}

fn parse_list<T: std::str::FromStr>(e: &Entry) -> Result<Vec<T>> {
    e.value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| perr(e.line, format!("bad entry `{}` in `{}`", s.trim(), e.key)))
        })
        .collect()
}

fn parse_grid(k: usize, line: usize, entries: Vec<Entry>) -> Result<GridSpec> {
    let mut counts = None;
    let mut spacing = None;
    let mut origin = None;
    for e in &entries {
        match e.key.as_str() {
            "counts" => counts = Some(parse_list::<usize>(e)?),
            "spacing" => spacing = Some(parse_list::<f64>(e)?),
            "origin" => origin = Some(parse_list::<f64>(e)?),
            other => return Err(perr(e.line, format!("unknown [grid] key `{other}`"))),
        }
    }
    let counts = counts.ok_or_else(|| perr(line, "[grid] needs `counts`"))?;
    let mut grid = GridSpec::unit_box(&counts);
    if let Some(s) = spacing {
        grid.spacing = s;
    }
    if let Some(o) = origin {
        grid.origin = o;
    }
    if grid.counts.len() != k || grid.spacing.len() != k || grid.origin.len() != k {
        return Err(FieldError::DimensionMismatch(format!(
            "[grid] entries must each have k={k} components"
        )));
    }
    grid.validate(k)?;
    Ok(grid)
}
