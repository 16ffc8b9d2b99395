//! Scenario files and the built-in scenarios.
//!
//! A scenario names a distribution (generator expressions on a box) plus
//! default numerical settings. The text format is documented in
//! `docs/scenario-format.md`; a JSON body with the same fields is also
//! accepted.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_expr, ParseContext};
use crate::fields::{BoxDomain, DistributionSpec, SmoothField};

pub const BUILTIN_NAMES: [&str; 5] = [
    "heisenberg",
    "martinet",
    "engel",
    "involutive2",
    "contact-perturbed",
];

const HEISENBERG: &str = "\
name = heisenberg
dim = 3

[generators]
X1 = 1, 0, 0
X2 = 0, 1, x1

[domain]
all = -2, 2
";

const MARTINET: &str = "\
name = martinet
dim = 3

[generators]
X1 = 1, 0, 0
X2 = 0, 1, x1^2

[domain]
all = -2, 2
";

const ENGEL: &str = "\
name = engel
dim = 4

[generators]
X1 = 1, 0, 0, 0
X2 = 0, 1, x1, x3

[domain]
all = -2, 2
";

const INVOLUTIVE2: &str = "\
name = involutive2
dim = 3

[generators]
X1 = 1, 0, 0
X2 = 0, 1, 0

[domain]
all = -2, 2
";

// x1^5 sqrt|x1| is replaced by the smooth surrogate x1^5 (x1^2 + eps^2)^(1/4).
const CONTACT_PERTURBED: &str = "\
name = contact-perturbed
dim = 3

[params]
lambda = 0.05
eps = 1e-3

[generators]
X1 = 1, 0, 0
X2 = 0, 1, x1 + lambda * x1^5 * (x1^2 + eps^2)^(1/4) * bump(1, 2, sqrt(x1^2 + x2^2 + x3^2))

[domain]
all = -2, 2
";

/// Numerical defaults carried by a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub tol: f64,
    pub rank_tol: f64,
    pub grid: usize,
    pub seed: u64,
    pub delta: f64,
    pub lmax: usize,
    pub min_radius: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            tol: 1e-10,
            rank_tol: 1e-8,
            grid: 5,
            seed: 0,
            delta: 0.2,
            lmax: 3,
            min_radius: 1e-6,
        }
    }
}

/// An expression source with the position of its first character.
#[derive(Debug, Clone, PartialEq)]
struct Source {
    text: String,
    line: usize,
    column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    generators: Vec<Vec<Source>>,
    pub domain: BoxDomain,
    pub params: BTreeMap<String, f64>,
    pub defaults: Defaults,
}

impl Scenario {
    /// Generator component sources, for display.
    pub fn generator_sources(&self) -> Vec<Vec<String>> {
        self.generators
            .iter()
            .map(|g| g.iter().map(|s| s.text.clone()).collect())
            .collect()
    }

    /// Overrides a parameter; unknown names are rejected.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        match self.params.get_mut(name) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(Error::InvalidArgument(format!(
                "scenario `{}` has no parameter `{name}`",
                self.name
            ))),
        }
    }

    pub fn spec(&self) -> Result<DistributionSpec> {
        let generators = self
            .generators
            .iter()
            .map(|g| {
                let comps = g
                    .iter()
                    .map(|src| {
                        let ctx = ParseContext::new(self.dim)
                            .with_params(&self.params)
                            .at(src.line, src.column);
                        parse_expr(&src.text, &ctx)
                    })
                    .collect::<Result<Vec<_>>>()?;
                SmoothField::new(comps)
            })
            .collect::<Result<Vec<_>>>()?;
        DistributionSpec::new(self.name.clone(), generators, self.domain.clone())
    }
}

pub fn builtin(name: &str) -> Result<Scenario> {
    let text = match name {
        "heisenberg" => HEISENBERG,
        "martinet" => MARTINET,
        "engel" => ENGEL,
        "involutive2" => INVOLUTIVE2,
        "contact-perturbed" => CONTACT_PERTURBED,
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    parse_scenario(text)
}

/// Resolves a built-in name or reads a scenario file.
pub fn load_scenario(source: &str) -> Result<Scenario> {
    if BUILTIN_NAMES.contains(&source) {
        return builtin(source);
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(Error::UnknownScenario(source.to_string()));
    }
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

/// Parses a scenario body in the text or JSON format.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario = if text.trim_start().starts_with('{') {
        parse_json(text)?
    } else {
        parse_text(text)?
    };
    // Validate expressions and dimensions eagerly.
    scenario.spec()?;
    Ok(scenario)
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Splits on commas outside parentheses, returning `(byte offset, piece)`.
fn split_top_level(s: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push((start, &s[start..i]));
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push((start, &s[start..]));
    out
}

fn trimmed(offset: usize, piece: &str) -> (usize, &str) {
    let lead = piece.len() - piece.trim_start().len();
    (offset + lead, piece.trim())
}

fn parse_number(text: &str, line: usize, column: usize) -> Result<f64> {
    text.parse::<f64>()
        .map_err(|_| perr(line, column, format!("expected a number, found `{text}`")))
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Top,
    Generators,
    Domain,
    Params,
    Defaults,
}

fn parse_text(text: &str) -> Result<Scenario> {
    let mut name = None;
    let mut dim: Option<usize> = None;
    let mut generators: Vec<(usize, Vec<Source>)> = Vec::new();
    let mut bounds: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut all_bounds: Option<(f64, f64)> = None;
    let mut params = BTreeMap::new();
    let mut defaults = Defaults::default();
    let mut section = Section::Top;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let content_t = content.trim();
        if content_t.starts_with('[') {
            if !content_t.ends_with(']') {
                return Err(perr(line_no, indent + 1, "unterminated section header"));
            }
            section = match &content_t[1..content_t.len() - 1] {
                "generators" => Section::Generators,
                "domain" => Section::Domain,
                "params" => Section::Params,
                "defaults" => Section::Defaults,
                other => return Err(perr(line_no, indent + 2, format!("unknown section `{other}`"))),
            };
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(perr(line_no, indent + 1, "expected `key = value`"));
        };
        let key = content[..eq].trim();
        let (value_col, value) = trimmed(eq + 1, &content[eq + 1..]);
        let value_column = value_col + 1;
        let key_column = indent + 1;
        match section {
            Section::Top => match key {
                "name" => name = Some(value.to_string()),
                "dim" => {
                    let d = value
                        .parse::<usize>()
                        .ok()
                        .filter(|d| *d > 0)
                        .ok_or_else(|| perr(line_no, value_column, "dim must be a positive integer"))?;
                    dim = Some(d);
                }
                other => return Err(perr(line_no, key_column, format!("unknown key `{other}`"))),
            },
            Section::Generators => {
                let index = key
                    .strip_prefix('X')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|k| *k >= 1)
                    .ok_or_else(|| {
                        perr(line_no, key_column, format!("generator keys are X1, X2, ...; found `{key}`"))
                    })?;
                if generators.iter().any(|(k, _)| *k == index) {
                    return Err(perr(line_no, key_column, format!("duplicate generator `{key}`")));
                }
                let comps = split_top_level(value)
                    .into_iter()
                    .map(|(off, piece)| {
                        let (off, piece) = trimmed(off, piece);
                        Source {
                            text: piece.to_string(),
                            line: line_no,
                            column: value_column + off,
                        }
                    })
                    .collect();
                generators.push((index, comps));
            }
            Section::Domain => {
                let parts = split_top_level(value);
                if parts.len() != 2 {
                    return Err(perr(line_no, value_column, "domain entries are `lo, hi`"));
                }
                let (o0, lo) = trimmed(parts[0].0, parts[0].1);
                let (o1, hi) = trimmed(parts[1].0, parts[1].1);
                let lo = parse_number(lo, line_no, value_column + o0)?;
                let hi = parse_number(hi, line_no, value_column + o1)?;
                if !(lo <= hi) {
                    return Err(perr(line_no, value_column, "empty interval"));
                }
                if key == "all" {
                    all_bounds = Some((lo, hi));
                } else {
                    let axis = key
                        .strip_prefix('x')
                        .and_then(|d| d.parse::<usize>().ok())
                        .filter(|k| *k >= 1)
                        .ok_or_else(|| {
                            perr(line_no, key_column, format!("domain keys are `all` or x1, x2, ...; found `{key}`"))
                        })?;
                    bounds.insert(axis, (lo, hi));
                }
            }
            Section::Params => {
                if key.is_empty()
                    || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                    || !key.starts_with(|c: char| c.is_ascii_alphabetic())
                    || key == "pi"
                    || (key.starts_with('x') && key[1..].parse::<usize>().is_ok())
                {
                    return Err(perr(line_no, key_column, format!("invalid parameter name `{key}`")));
                }
                params.insert(key.to_string(), parse_number(value, line_no, value_column)?);
            }
            Section::Defaults => {
                let num = || parse_number(value, line_no, value_column);
                let int = || {
                    value
                        .parse::<u64>()
                        .map_err(|_| perr(line_no, value_column, "expected a non-negative integer"))
                };
                match key {
                    "tol" => defaults.tol = num()?,
                    "rank_tol" => defaults.rank_tol = num()?,
                    "delta" => defaults.delta = num()?,
                    "min_radius" => defaults.min_radius = num()?,
                    "grid" => defaults.grid = int()? as usize,
                    "lmax" => defaults.lmax = int()? as usize,
                    "seed" => defaults.seed = int()?,
                    other => return Err(perr(line_no, key_column, format!("unknown default `{other}`"))),
                }
            }
        }
    }

    let end = last_line.max(1);
    let name = name.ok_or_else(|| perr(end, 1, "missing `name`"))?;
    let dim = dim.ok_or_else(|| perr(end, 1, "missing `dim`"))?;
    if generators.is_empty() {
        return Err(perr(end, 1, "no generators"));
    }
    generators.sort_by_key(|(k, _)| *k);
    for (expected, (k, comps)) in generators.iter().enumerate() {
        let first = &comps[0];
        if *k != expected + 1 {
            return Err(perr(first.line, 1, format!("generators must be numbered consecutively; missing X{}", expected + 1)));
        }
        if comps.len() != dim {
            return Err(perr(
                first.line,
                first.column,
                format!("X{k} has {} components, expected {dim}", comps.len()),
            ));
        }
    }
    if let Some((&axis, _)) = bounds.iter().find(|(a, _)| **a > dim) {
        return Err(perr(end, 1, format!("domain axis x{axis} exceeds dim {dim}")));
    }
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for axis in 1..=dim {
        let (lo, hi) = bounds
            .get(&axis)
            .copied()
            .or(all_bounds)
            .ok_or_else(|| perr(end, 1, format!("no domain interval for x{axis}")))?;
        lower.push(lo);
        upper.push(hi);
    }
    Ok(Scenario {
        name,
        dim,
        generators: generators.into_iter().map(|(_, c)| c).collect(),
        domain: BoxDomain::new(lower, upper)?,
        params,
        defaults,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonScenario {
    name: String,
    dim: usize,
    generators: Vec<Vec<String>>,
    domain: Vec<[f64; 2]>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default)]
    defaults: Defaults,
}

fn parse_json(text: &str) -> Result<Scenario> {
    let raw: JsonScenario = serde_json::from_str(text).map_err(|e| perr(e.line(), e.column(), e.to_string()))?;
    if raw.dim == 0 {
        return Err(perr(1, 1, "dim must be positive"));
    }
    if raw.domain.len() != raw.dim {
        return Err(perr(1, 1, format!("domain has {} intervals, expected {}", raw.domain.len(), raw.dim)));
    }
    let mut generators = Vec::new();
    for (k, g) in raw.generators.iter().enumerate() {
        if g.len() != raw.dim {
            return Err(perr(1, 1, format!("X{} has {} components, expected {}", k + 1, g.len(), raw.dim)));
        }
        generators.push(
            g.iter()
                .map(|t| Source {
                    text: t.clone(),
                    line: 1,
                    column: 1,
                })
                .collect(),
        );
    }
    if generators.is_empty() {
        return Err(perr(1, 1, "no generators"));
    }
    Ok(Scenario {
        name: raw.name,
        dim: raw.dim,
        generators,
        domain: BoxDomain::new(
            raw.domain.iter().map(|d| d[0]).collect(),
            raw.domain.iter().map(|d| d[1]).collect(),
        )?,
        params: raw.params,
        defaults: raw.defaults,
    })
}
