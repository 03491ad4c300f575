//! Just enough of a fixed-format MPS reader to check the writer.

use std::collections::BTreeMap;

use ambloc::rational::Rational;

#[derive(Debug, Default)]
pub struct MpsModel {
    pub name: String,
    pub maximize: bool,
    pub objective_row: String,
    /// Constraint rows in file order with their kind letter.
    pub rows: Vec<(String, char)>,
    /// `(column, row) -> value text`
    pub entries: BTreeMap<(String, String), String>,
    pub columns: Vec<String>,
    pub rhs: BTreeMap<String, String>,
    pub binaries: Vec<String>,
}

pub fn read(text: &str) -> MpsModel {
    let mut m = MpsModel::default();
    let mut section = "";
    for line in text.lines() {
        if line.starts_with('*') || line.trim().is_empty() {
            continue;
        }
        if !line.starts_with(' ') {
            let mut parts = line.split_whitespace();
            section = match parts.next().unwrap() {
                "NAME" => {
                    m.name = parts.next().unwrap_or_default().to_string();
                    "NAME"
                }
                "OBJSENSE" => "OBJSENSE",
                "ROWS" => "ROWS",
                "COLUMNS" => "COLUMNS",
                "RHS" => "RHS",
                "BOUNDS" => "BOUNDS",
                "ENDATA" => "END",
                other => panic!("unknown section {other}"),
            };
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        match section {
            "OBJSENSE" => m.maximize = f[0] == "MAX",
            "ROWS" => {
                let kind = f[0].chars().next().unwrap();
                if kind == 'N' {
                    m.objective_row = f[1].to_string();
                } else {
                    m.rows.push((f[1].to_string(), kind));
                }
            }
            "COLUMNS" => {
                assert_eq!(f.len(), 3, "one entry per line expected: {line}");
                if m.columns.last().map(String::as_str) != Some(f[0]) {
                    assert!(!m.columns.iter().any(|c| c == f[0]), "column {} split", f[0]);
                    m.columns.push(f[0].to_string());
                }
                m.entries.insert((f[0].to_string(), f[1].to_string()), f[2].to_string());
            }
            "RHS" => {
                m.rhs.insert(f[1].to_string(), f[2].to_string());
            }
            "BOUNDS" => {
                assert_eq!(f[0], "BV");
                m.binaries.push(f[2].to_string());
            }
            _ => panic!("data outside a section: {line}"),
        }
    }
    assert_eq!(section, "END");
    m
}

/// Whether the text `written` denotes `value`: exactly for terminating
/// decimals, as the nearest double otherwise.
pub fn same_number(written: &str, value: &Rational) -> bool {
    if let Some(exact) = parse_decimal(written) {
        if exact == *value {
            return true;
        }
    }
    let approx = *value.numer() as f64 / *value.denom() as f64;
    written.parse::<f64>().map_or(false, |w| w == approx)
}

fn parse_decimal(text: &str) -> Option<Rational> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: i128 = format!("{int_part}{frac_part}").parse().ok()?;
    let v = Rational::new(digits, 10i128.checked_pow(frac_part.len() as u32)?);
    Some(if neg { -v } else { v })
}
