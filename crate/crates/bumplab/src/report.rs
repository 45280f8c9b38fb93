//! Report rows with a fixed column schema, written as CSV or JSON.
//!
//! Reals use 17 significant digits (`{:.16e}`), so identical inputs give
//! identical bytes. Columns a command does not compute are left empty in CSV
//! and omitted in JSON. Non-finite values are written as `inf`, `-inf` or
//! `nan` and named in the `flags` column.

use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const REPORT_VERSION: u32 = 1;

/// Every column, in output order.
pub const COLUMNS: &[&str] = &[
    "id",
    "command",
    "dimension",
    "depth",
    "p",
    "arg_mode",
    "ap",
    "separated_sw",
    "separated_ws",
    "entangled_sw_one_plus_rho",
    "entangled_ws_one_plus_rho",
    "entangled_sw_rho",
    "entangled_ws_rho",
    "testing",
    "testing_sigma",
    "testing_w",
    "norm",
    "norm_iterations",
    "norm_converged",
    "sandwich",
    "theorem_ratio",
    "conjecture_ratio",
    "eps_floor",
    "lemma_s",
    "lemma_s1",
    "lemma_s2",
    "lemma_s2_stopping_core",
    "lemma_s3",
    "lemma_s3_literal",
    "quasi_orthogonality",
    "pointwise_sum",
    "decrease",
    "holder",
    "zs2w",
    "sw",
    "sharp_min",
    "sharp_failures",
    "stopping_t",
    "stopping_s",
    "regime_1",
    "regime_2",
    "regime_3",
    "parts",
    "strata",
    "coronas",
    "packing_max",
    "t_not_in_s",
    "is_above_it",
    "mislabeled",
    "prop_case",
    "prop_separated",
    "prop_entangled",
    "prop_ratio",
    "theta_max",
    "ep_max",
    "finite_integral",
    "search_objective",
    "search_steps",
    "search_start",
    "search_best",
    "search_gain",
    "accepted",
    "rejected_infinite",
    "inadmissible",
    "flags",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Real(x) => format_real(*x),
            Value::Int(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) => s.clone(),
        }
    }
}

pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportRow {
    values: BTreeMap<&'static str, Value>,
    flags: Vec<String>,
}

fn column(name: &str) -> &'static str {
    COLUMNS.iter().find(|c| **c == name).unwrap_or_else(|| panic!("unknown report column `{name}`"))
}

impl ReportRow {
    pub fn new(id: &str, command: &str) -> Self {
        let mut row = ReportRow::default();
        row.text("id", id);
        row.text("command", command);
        row
    }

    pub fn real(&mut self, name: &str, x: f64) -> &mut Self {
        let col = column(name);
        if !x.is_finite() {
            self.flag(&format!("{col}-not-finite"));
        }
        self.values.insert(col, Value::Real(x));
        self
    }

    pub fn int(&mut self, name: &str, n: usize) -> &mut Self {
        self.values.insert(column(name), Value::Int(n as u64));
        self
    }

    pub fn boolean(&mut self, name: &str, b: bool) -> &mut Self {
        self.values.insert(column(name), Value::Bool(b));
        self
    }

    pub fn text(&mut self, name: &str, s: &str) -> &mut Self {
        self.values.insert(column(name), Value::Text(s.to_string()));
        self
    }

    pub fn flag(&mut self, f: &str) -> &mut Self {
        if !self.flags.iter().any(|x| x == f) {
            self.flags.push(f.to_string());
        }
        self
    }

    pub fn flags(&self) -> &[String] {
        &self.flags
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    /// Rendered value of a column, `None` if unset.
    pub fn cell(&self, name: &str) -> Option<String> {
        if name == "flags" {
            return (!self.flags.is_empty()).then(|| self.flags.join(";"));
        }
        self.values.get(name).map(Value::render)
    }

    /// Copies every set column of `other` except `id` and `command`.
    pub fn absorb(&mut self, other: &ReportRow) {
        for (k, v) in &other.values {
            if *k != "id" && *k != "command" {
                self.values.insert(k, v.clone());
            }
        }
        for f in &other.flags {
            self.flag(f);
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_header() -> String {
    let mut s = COLUMNS.join(",");
    s.push('\n');
    s
}

pub fn csv_line(row: &ReportRow) -> String {
    let cells: Vec<String> = COLUMNS.iter().map(|c| row.cell(c).map(|v| csv_field(&v)).unwrap_or_default()).collect();
    let mut s = cells.join(",");
    s.push('\n');
    s
}

pub fn to_csv(rows: &[ReportRow], header: bool) -> String {
    let mut out = if header { csv_header() } else { String::new() };
    for r in rows {
        out.push_str(&csv_line(r));
    }
    out
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// `{"version":1,"rows":[...]}` with numbers in the fixed real format.
pub fn to_json(rows: &[ReportRow]) -> String {
    let mut out = format!("{{\"version\":{REPORT_VERSION},\"rows\":[");
    for (i, row) in rows.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("\n{");
        let mut first = true;
        for c in COLUMNS {
            let rendered = match (row.values.get(c), *c) {
                (_, "flags") => row.cell("flags").map(|f| json_string(&f)),
                (Some(Value::Real(x)), _) if x.is_finite() => Some(format_real(*x)),
                (Some(Value::Real(x)), _) => Some(json_string(&format_real(*x))),
                (Some(Value::Int(n)), _) => Some(n.to_string()),
                (Some(Value::Bool(b)), _) => Some(b.to_string()),
                (Some(Value::Text(s)), _) => Some(json_string(s)),
                (None, _) => None,
            };
            if let Some(v) = rendered {
                if !first {
                    out.push(',');
                }
                first = false;
                let _ = write!(out, "{}:{}", json_string(c), v);
            }
        }
        out.push('}');
    }
    out.push_str("\n]}\n");
    out
}

/// Parses a CSV report produced by [`to_csv`] into `column -> cell` maps.
pub fn parse_csv(text: &str) -> Vec<BTreeMap<String, String>> {
    let mut lines = text.lines();
    let Some(header) = lines.next() else { return Vec::new() };
    let cols: Vec<&str> = header.split(',').collect();
    lines
        .map(|line| cols.iter().zip(split_csv_line(line)).filter(|(_, v)| !v.is_empty()).map(|(c, v)| (c.to_string(), v)).collect())
        .collect()
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(ch) = chars.next() {
        match (ch, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => out.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    out.push(cur);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_have_seventeen_digits() {
        assert_eq!(format_real(0.1), "1.0000000000000001e-1");
        assert_eq!(format_real(2.0), "2.0000000000000000e0");
        assert_eq!(format_real(f64::INFINITY), "inf");
        for x in [0.1, 1.0 / 3.0, 6.02e23, 5e-324, f64::MAX] {
            assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_round_trip_and_flags() {
        let mut r = ReportRow::new("a,b", "constants");
        r.real("ap", 1.5).int("stopping_t", 3).real("norm", f64::NAN);
        let text = to_csv(&[r.clone()], true);
        let parsed = parse_csv(&text);
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0]["id"], "a,b");
        assert_eq!(parsed[0]["ap"], "1.5000000000000000e0");
        assert_eq!(parsed[0]["stopping_t"], "3");
        assert_eq!(parsed[0]["flags"], "norm-not-finite");
        assert!(!parsed[0].contains_key("testing"));
        assert_eq!(text.lines().next().unwrap().split(',').count(), COLUMNS.len());
    }

    #[test]
    fn json_report_parses() {
        let mut r = ReportRow::new("x", "norm");
        r.real("norm", 2.5).real("sandwich", f64::INFINITY).boolean("norm_converged", true);
        let v: serde_json::Value = serde_json::from_str(&to_json(&[r])).unwrap();
        assert_eq!(v["rows"][0]["norm"], 2.5);
        assert_eq!(v["rows"][0]["sandwich"], "inf");
        assert_eq!(v["rows"][0]["norm_converged"], true);
    }

    #[test]
    #[should_panic]
    fn unknown_column_panics() {
        ReportRow::new("x", "y").real("no_such_column", 1.0);
    }
}
