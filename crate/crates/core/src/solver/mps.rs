//! Fixed-format MPS export and "name value" solution import.
//!
//! Field positions follow the classic layout (name fields 8 wide, values 12
//! wide). When a name is longer than 8 characters every name field widens to
//! the longest name, keeping columns aligned. Coefficients print as exact
//! decimals when they have a finite expansion and as the shortest round-trip
//! `f64` text otherwise.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use num_traits::{Signed, Zero};

use super::{audit, Solution, Stats, Status};
use crate::error::{Error, Result};
use crate::formulation::{ConstraintTag, ModelSpec, Relation, VarId};
use crate::instance::{read_text, write_text};
use crate::rational::{finite_decimal, parse_rational, to_f64, Rational};

pub const OBJECTIVE_ROW: &str = "obj";

pub fn format_coefficient(v: &Rational) -> String {
    finite_decimal(v).unwrap_or_else(|| format!("{:?}", to_f64(v)))
}

/// Row names in model order: `<tag>_<n>` with `n` counting within the tag.
pub fn row_names(model: &ModelSpec) -> Vec<String> {
    let mut counters: HashMap<ConstraintTag, usize> = HashMap::new();
    model
        .constraints
        .iter()
        .map(|c| {
            let n = counters.entry(c.tag).or_default();
            *n += 1;
            format!("{}_{}", c.tag, *n - 1)
        })
        .collect()
}

pub fn write_mps(model: &ModelSpec) -> String {
    let rows = row_names(model);
    let var_names: Vec<String> = model.variables.iter().map(|v| v.to_string()).collect();
    let width = rows.iter().chain(&var_names).map(String::len).chain([OBJECTIVE_ROW.len(), 8]).max().unwrap();
    let index = model.var_index();

    let mut columns: Vec<Vec<(&str, &Rational)>> = vec![Vec::new(); model.variables.len()];
    for (v, c) in &model.objective {
        columns[index[v]].push((OBJECTIVE_ROW, c));
    }
    for (row, c) in rows.iter().zip(&model.constraints) {
        for (v, a) in &c.terms {
            columns[index[v]].push((row, a));
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "* model {} instance {}", model.meta.name, model.meta.instance_fingerprint);
    if let Some(eps) = model.meta.epsilon {
        let _ = writeln!(out, "* epsilon {eps}");
    }
    let _ = writeln!(out, "NAME          {}", model.meta.name);
    let _ = writeln!(out, "OBJSENSE\n    MAX");
    let _ = writeln!(out, "ROWS");
    let _ = writeln!(out, " N  {OBJECTIVE_ROW}");
    for (row, c) in rows.iter().zip(&model.constraints) {
        let kind = match c.relation {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        let _ = writeln!(out, " {kind}  {row}");
    }
    let _ = writeln!(out, "COLUMNS");
    for (name, entries) in var_names.iter().zip(&columns) {
        for (row, value) in entries {
            let _ = writeln!(out, "    {name:<width$}  {row:<width$}  {:>12}", format_coefficient(value));
        }
    }
    let _ = writeln!(out, "RHS");
    for (row, c) in rows.iter().zip(&model.constraints) {
        if !c.rhs.is_zero() {
            let _ = writeln!(out, "    {:<width$}  {row:<width$}  {:>12}", "RHS", format_coefficient(&c.rhs));
        }
    }
    let _ = writeln!(out, "BOUNDS");
    for name in &var_names {
        let _ = writeln!(out, " BV {:<width$}  {name}", "BND");
    }
    out.push_str("ENDATA\n");
    out
}

pub fn export_mps(model: &ModelSpec, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &write_mps(model))
}

/// One `name value` line per variable, in declaration order.
pub fn write_solution(solution: &Solution, model: &ModelSpec) -> String {
    let mut out = String::new();
    for v in &model.variables {
        let on = solution.assignment.get(v).copied().unwrap_or(false);
        let _ = writeln!(out, "{v} {}", on as u8);
    }
    out
}

/// Parses a solution text against `model`. Unknown names are skipped with a
/// warning; variables not mentioned are 0.
pub fn parse_solution(text: &str, model: &ModelSpec) -> Result<(BTreeMap<VarId, bool>, Vec<String>)> {
    let declared: HashMap<String, VarId> = model.variables.iter().map(|v| (v.to_string(), *v)).collect();
    let mut assignment: BTreeMap<VarId, bool> = model.variables.iter().map(|v| (*v, false)).collect();
    let mut seen = std::collections::HashSet::new();
    let mut unknown = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let [name, value] = fields.as_slice() else {
            return Err(Error::SolutionParse {
                line: line_no,
                message: format!("expected `name value`, found {} fields", fields.len()),
            });
        };
        let parsed = parse_rational(value).map_err(|e| Error::SolutionParse { line: line_no, message: e })?;
        let tolerance = Rational::new(1, 1_000_000);
        let on = if (parsed - Rational::from_integer(1)).abs() <= tolerance {
            true
        } else if parsed.abs() <= tolerance {
            false
        } else {
            return Err(Error::SolutionParse {
                line: line_no,
                message: format!("value {value} of `{name}` is not binary"),
            });
        };
        match declared.get(*name) {
            Some(v) => {
                if !seen.insert(*v) {
                    return Err(Error::SolutionParse { line: line_no, message: format!("`{name}` given twice") });
                }
                assignment.insert(*v, on);
            }
            None => {
                log::warn!("solution line {line_no}: unknown variable `{name}` ignored");
                unknown.push(name.to_string());
            }
        }
    }
    Ok((assignment, unknown))
}

/// Reads and audits an external solution.
pub fn import_solution(path: impl AsRef<Path>, model: &ModelSpec) -> Result<Solution> {
    let start = Instant::now();
    let text = read_text(path.as_ref())?;
    let (assignment, _) = parse_solution(&text, model)?;
    let objective = audit(model, &assignment)?;
    Ok(Solution {
        assignment,
        objective,
        status: Status::Feasible,
        bound: None,
        stats: Stats { nodes: 0, seconds: start.elapsed().as_secs_f64() },
    })
}
