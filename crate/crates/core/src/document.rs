//! JSON scenario, grid and report documents.
//!
//! Rationals are written as strings (`"3/2"`, `"-1"`); JSON integers are
//! accepted on input, JSON floats are rejected. Diagnostics carry the key
//! path of the offending entry.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::checker::{random_matrices, CheckReport, GeneralGrid, MatchingGrid, TruthGrid};
use crate::dist::ExactDist;
use crate::error::{Error, Result};
use crate::ratio::{self, Rational};
use crate::scenario::{Algorithm, AgentType, Outcome, Scenario, Valuation};
use crate::vcg::{PaymentRule, WeightMatrix};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of a document's raw bytes.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::parse("$", e.to_string()))
}

fn object<'a>(v: &'a Value, key: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::parse(key, "expected an object"))
}

fn field<'a>(obj: &'a Map<String, Value>, parent: &str, name: &str) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| Error::parse(join(parent, name), "missing key"))
}

fn join(parent: &str, name: &str) -> String {
    if parent.is_empty() {
        name.to_string()
    } else {
        format!("{parent}.{name}")
    }
}

fn quoted(parent: &str, name: &str) -> String {
    format!("{parent}.\"{name}\"")
}

fn count(v: &Value, key: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::parse(key, "expected a non-negative integer"))
}

fn string<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| Error::parse(key, "expected a string"))
}

fn rational(v: &Value, key: &str) -> Result<Rational> {
    match v {
        Value::String(s) => ratio::parse(s, key),
        Value::Number(n) if n.is_i64() || n.is_u64() => ratio::parse(&n.to_string(), key),
        Value::Number(_) => Err(Error::parse(key, "floats are not allowed; write the rational as \"p/q\"")),
        _ => Err(Error::parse(key, "expected a rational string")),
    }
}

fn labels(v: &Value, key: &str) -> Result<Vec<String>> {
    let arr = v.as_array().ok_or_else(|| Error::parse(key, "expected a list of labels"))?;
    let mut out: Vec<String> = Vec::with_capacity(arr.len());
    for (i, x) in arr.iter().enumerate() {
        let k = format!("{key}[{i}]");
        let s = string(x, &k)?;
        if s.is_empty() || s.contains(',') {
            return Err(Error::validation(k, "labels must be non-empty and contain no commas"));
        }
        if out.iter().any(|o| o == s) {
            return Err(Error::validation(k, format!("duplicate label {s:?}")));
        }
        out.push(s.to_string());
    }
    Ok(out)
}

fn index_of(labels: &[String], label: &str, key: &str, what: &str) -> Result<usize> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::validation(key, format!("unknown {what} {label:?}")))
}

/// Parses and validates a scenario document.
pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let root = parse_json(text)?;
    let obj = object(&root, "$")?;
    let n = count(field(obj, "", "agents")?, "agents")?;
    let m = count(field(obj, "", "replicas")?, "replicas")?;
    let types = labels(field(obj, "", "types")?, "types")?;
    let outcomes = labels(field(obj, "", "outcomes")?, "outcomes")?;

    let prior_obj = object(field(obj, "", "prior")?, "prior")?;
    let mut masses = Vec::with_capacity(prior_obj.len());
    for (label, p) in prior_obj {
        let key = quoted("prior", label);
        let t = index_of(&types, label, &key, "type")?;
        masses.push((AgentType(t), rational(p, &key)?));
    }
    let prior = ExactDist::from_weighted(masses).map_err(|e| match e {
        Error::BadMass(total) => Error::validation("prior", format!("masses must be non-negative and sum to 1, got {total}")),
        Error::EmptySupport => Error::validation("prior", "prior has no mass"),
        other => other,
    })?;

    let valuation = parse_valuation(field(obj, "", "valuation")?, &types, &outcomes, n)?;
    let algorithm = parse_algorithm(field(obj, "", "algorithm")?, &types, &outcomes, n)?;
    Scenario::new(n, m, types, outcomes, prior, valuation, algorithm)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario_str(&read(path)?)
}

fn parse_table(v: &Value, key: &str, types: &[String], outcomes: &[String]) -> Result<Vec<Vec<Rational>>> {
    let obj = object(v, key)?;
    let mut cells: Vec<Vec<Option<Rational>>> = vec![vec![None; outcomes.len()]; types.len()];
    for (pair, x) in obj {
        let k = quoted(key, pair);
        let (t, o) = pair
            .split_once(',')
            .ok_or_else(|| Error::parse(&k, "expected a \"type,outcome\" key"))?;
        let t = index_of(types, t.trim(), &k, "type")?;
        let o = index_of(outcomes, o.trim(), &k, "outcome")?;
        cells[t][o] = Some(rational(x, &k)?);
    }
    let mut table = Vec::with_capacity(types.len());
    for (t, row) in cells.into_iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        for (o, c) in row.into_iter().enumerate() {
            let pair = format!("{},{}", types[t], outcomes[o]);
            out.push(c.ok_or_else(|| Error::validation(quoted(key, &pair), "missing valuation cell"))?);
        }
        table.push(out);
    }
    Ok(table)
}

fn parse_valuation(v: &Value, types: &[String], outcomes: &[String], n: usize) -> Result<Valuation> {
    let obj = object(v, "valuation")?;
    match obj.get("per_agent") {
        Some(list) => {
            let arr = list
                .as_array()
                .ok_or_else(|| Error::parse("valuation.per_agent", "expected a list of tables"))?;
            if arr.len() != n {
                return Err(Error::validation(
                    "valuation.per_agent",
                    format!("expected {n} tables, got {}", arr.len()),
                ));
            }
            let tables = arr
                .iter()
                .enumerate()
                .map(|(i, t)| parse_table(t, &format!("valuation.per_agent[{i}]"), types, outcomes))
                .collect::<Result<_>>()?;
            Ok(Valuation::PerAgent(tables))
        }
        None => Ok(Valuation::Shared(parse_table(v, "valuation", types, outcomes)?)),
    }
}

fn profile_key(types: &[String], n: usize, index: usize) -> String {
    let base = types.len();
    let mut digits = vec![0; n];
    let mut i = index;
    for d in digits.iter_mut().rev() {
        *d = i % base;
        i /= base;
    }
    digits.iter().map(|&d| types[d].as_str()).collect::<Vec<_>>().join(",")
}

fn profile_index(labels: &str, types: &[String], n: usize, key: &str) -> Result<usize> {
    let parts: Vec<&str> = labels.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(Error::validation(key, format!("expected {n} comma-separated types")));
    }
    parts
        .iter()
        .try_fold(0, |acc, p| Ok(acc * types.len() + index_of(types, p, key, "type")?))
}

fn parse_algorithm(v: &Value, types: &[String], outcomes: &[String], n: usize) -> Result<Algorithm> {
    let obj = object(v, "algorithm")?;
    let kind = string(field(obj, "algorithm", "kind")?, "algorithm.kind")?;
    let rows_needed = types.len().checked_pow(n as u32).unwrap_or(usize::MAX);
    let rows = |obj: &Map<String, Value>| -> Result<Vec<Option<(usize, Value)>>> {
        let rows = object(field(obj, "algorithm", "rows")?, "algorithm.rows")?;
        let mut out = vec![None; rows_needed];
        for (profile, x) in rows {
            let k = quoted("algorithm.rows", profile);
            let i = profile_index(profile, types, n, &k)?;
            out[i] = Some((i, x.clone()));
        }
        if let Some(i) = out.iter().position(Option::is_none) {
            return Err(Error::validation(
                quoted("algorithm.rows", &profile_key(types, n, i)),
                "missing row",
            ));
        }
        Ok(out)
    };
    match kind {
        "builtin" => {
            let name = string(field(obj, "algorithm", "name")?, "algorithm.name")?;
            match name {
                "welfare-max" => Ok(Algorithm::WelfareMax),
                "constant" => {
                    let params = object(field(obj, "algorithm", "params")?, "algorithm.params")?;
                    let label = string(field(params, "algorithm.params", "outcome")?, "algorithm.params.outcome")?;
                    let o = index_of(outcomes, label, "algorithm.params.outcome", "outcome")?;
                    Ok(Algorithm::Constant(Outcome(o)))
                }
                other => Err(Error::validation(
                    "algorithm.name",
                    format!("unknown builtin {other:?}; expected \"welfare-max\" or \"constant\""),
                )),
            }
        }
        "table" => {
            let mut table = Vec::with_capacity(rows_needed);
            for (i, x) in rows(obj)?.into_iter().flatten() {
                let k = quoted("algorithm.rows", &profile_key(types, n, i));
                let label = string(&x, &k)?;
                table.push(Outcome(index_of(outcomes, label, &k, "outcome")?));
            }
            Ok(Algorithm::Table(table))
        }
        "randomized-table" => {
            let mut table = Vec::with_capacity(rows_needed);
            for (i, x) in rows(obj)?.into_iter().flatten() {
                let k = quoted("algorithm.rows", &profile_key(types, n, i));
                let mut masses = Vec::new();
                for (label, p) in object(&x, &k)? {
                    let kk = quoted(&k, label);
                    masses.push((Outcome(index_of(outcomes, label, &kk, "outcome")?), rational(p, &kk)?));
                }
                table.push(
                    ExactDist::from_weighted(masses)
                        .map_err(|e| Error::validation(k.clone(), e.to_string()))?,
                );
            }
            Ok(Algorithm::Randomized(table))
        }
        other => Err(Error::validation(
            "algorithm.kind",
            format!("unknown kind {other:?}; expected \"builtin\", \"table\" or \"randomized-table\""),
        )),
    }
}

/// Input for the VCG checks.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// Every truthful and deviating report in the product grid.
    Truth(TruthGrid),
    /// Matrices only; for permutation checks of randomly drawn instances.
    Matrices(Vec<WeightMatrix>),
}

impl GridSpec {
    pub fn truth_grid(&self) -> TruthGrid {
        match self {
            GridSpec::Truth(g) => g.clone(),
            GridSpec::Matrices(ms) => TruthGrid::Matrices(ms.clone()),
        }
    }

    /// All matrices the grid covers, or `None` for non-matching grids.
    pub fn matrices(&self) -> Option<Vec<WeightMatrix>> {
        match self {
            GridSpec::Truth(TruthGrid::General(_)) => None,
            GridSpec::Truth(TruthGrid::Matching(gs)) => Some(gs.iter().flat_map(|g| g.matrices()).collect()),
            GridSpec::Truth(TruthGrid::Matrices(ms)) | GridSpec::Matrices(ms) => Some(ms.clone()),
        }
    }
}

fn payment(obj: &Map<String, Value>) -> Result<PaymentRule> {
    match obj.get("payment") {
        None => Ok(PaymentRule::Clarke),
        Some(v) => {
            let name = string(v, "payment")?;
            PaymentRule::from_name(name).ok_or_else(|| {
                Error::validation("payment", format!("unknown rule {name:?}; expected \"vcg\" or \"first-price\""))
            })
        }
    }
}

fn rationals(v: &Value, key: &str) -> Result<Vec<Rational>> {
    let arr = v.as_array().ok_or_else(|| Error::parse(key, "expected a list of rationals"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| rational(x, &format!("{key}[{i}]")))
        .collect()
}

fn sizes(v: &Value, key: &str) -> Result<Vec<usize>> {
    let arr = v.as_array().ok_or_else(|| Error::parse(key, "expected a list of sizes"))?;
    let out = arr
        .iter()
        .enumerate()
        .map(|(i, x)| count(x, &format!("{key}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    if out.iter().any(|&s| s == 0) {
        return Err(Error::validation(key, "sizes must be at least 1"));
    }
    Ok(out)
}

/// Parses a grid document. Kinds:
///
/// * `single-item`: `bidders`, `values`, optional `payment`;
/// * `matching`: `sizes`, `entries`;
/// * `matrices`: `matrices` (list of square row lists);
/// * `random`: `count`, `sizes` (`[lo, hi]`), `seed`.
pub fn parse_grid_str(text: &str) -> Result<(GridSpec, PaymentRule)> {
    let root = parse_json(text)?;
    let obj = object(&root, "$")?;
    let kind = string(field(obj, "", "kind")?, "kind")?;
    let rule = payment(obj)?;
    let spec = match kind {
        "single-item" => {
            let bidders = count(field(obj, "", "bidders")?, "bidders")?;
            if bidders == 0 {
                return Err(Error::validation("bidders", "must be at least 1"));
            }
            let values = rationals(field(obj, "", "values")?, "values")?;
            if values.is_empty() {
                return Err(Error::validation("values", "must not be empty"));
            }
            GridSpec::Truth(TruthGrid::General(GeneralGrid::single_item(bidders, &values, rule)))
        }
        "matching" => {
            let entries = rationals(field(obj, "", "entries")?, "entries")?;
            if entries.is_empty() {
                return Err(Error::validation("entries", "must not be empty"));
            }
            let grids = sizes(field(obj, "", "sizes")?, "sizes")?
                .into_iter()
                .map(|size| MatchingGrid {
                    size,
                    entries: entries.clone(),
                })
                .collect();
            GridSpec::Truth(TruthGrid::Matching(grids))
        }
        "matrices" => {
            let list = field(obj, "", "matrices")?
                .as_array()
                .ok_or_else(|| Error::parse("matrices", "expected a list of matrices"))?;
            let mut ms = Vec::with_capacity(list.len());
            for (i, mv) in list.iter().enumerate() {
                let key = format!("matrices[{i}]");
                let rows = mv.as_array().ok_or_else(|| Error::parse(&key, "expected a list of rows"))?;
                let rows = rows
                    .iter()
                    .enumerate()
                    .map(|(r, row)| rationals(row, &format!("{key}[{r}]")))
                    .collect::<Result<Vec<_>>>()?;
                ms.push(WeightMatrix::new(rows).map_err(|e| Error::validation(&key, e.to_string()))?);
            }
            GridSpec::Truth(TruthGrid::Matrices(ms))
        }
        "random" => {
            let n = count(field(obj, "", "count")?, "count")?;
            let range = sizes(field(obj, "", "sizes")?, "sizes")?;
            let (lo, hi) = match range.as_slice() {
                [lo, hi] if lo <= hi => (*lo, *hi),
                _ => return Err(Error::validation("sizes", "expected [lo, hi] with lo <= hi")),
            };
            let seed = field(obj, "", "seed")?
                .as_u64()
                .ok_or_else(|| Error::parse("seed", "expected a non-negative integer"))?;
            GridSpec::Matrices(random_matrices(n, lo..=hi, seed))
        }
        other => {
            return Err(Error::validation(
                "kind",
                format!("unknown grid kind {other:?}; expected \"single-item\", \"matching\", \"matrices\" or \"random\""),
            ))
        }
    };
    Ok((spec, rule))
}

pub fn parse_grid(path: &Path) -> Result<(GridSpec, PaymentRule)> {
    parse_grid_str(&read(path)?)
}

/// A check report with tool metadata, as written by the command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    /// Hex SHA-256 of the scenario or grid document checked.
    pub input_digest: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub settings: BTreeMap<String, String>,
    #[serde(flatten)]
    pub report: CheckReport,
}

impl ReportFile {
    pub fn new(report: CheckReport, input: &[u8]) -> Self {
        ReportFile {
            tool: "mechcheck".into(),
            version: TOOL_VERSION.into(),
            input_digest: digest(input),
            settings: BTreeMap::new(),
            report,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("$", e.to_string()))
    }
}
