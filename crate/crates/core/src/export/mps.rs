use std::collections::HashMap;

use crate::error::{OptexError, Result};
use crate::milp::{MilpModel, Row, Sense};

use super::{fmt_num, parse_num, VarTable, OBJECTIVE_NAME};

/// Start columns of the six fixed MPS fields (1-based 2, 5, 15, 25, 40, 50).
const FIELDS: [usize; 6] = [1, 4, 14, 24, 39, 49];

/// A line with `fields[k]` placed at its fixed column, or one space after
/// the previous field when that one runs long.
fn fixed(fields: &[(usize, &str)]) -> String {
    let mut line = String::new();
    for &(k, text) in fields {
        let col = FIELDS[k];
        if line.len() < col {
            line.push_str(&" ".repeat(col - line.len()));
        } else {
            line.push(' ');
        }
        line.push_str(text);
    }
    line.push('\n');
    line
}

pub(super) fn write(model: &MilpModel, prec: usize) -> String {
    let mut out = String::new();
    if model.name.is_empty() {
        out.push_str("NAME\n");
    } else {
        out.push_str(&format!("NAME          {}\n", model.name));
    }
    out.push_str("ROWS\n");
    out.push_str(&fixed(&[(0, "N"), (1, OBJECTIVE_NAME)]));
    for row in &model.rows {
        let t = match row.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        out.push_str(&fixed(&[(0, t), (1, &row.name)]));
    }

    let n = model.num_vars();
    let mut columns: Vec<Vec<(&str, f64)>> = vec![Vec::new(); n];
    for &(j, c) in &model.objective {
        columns[j].push((OBJECTIVE_NAME, c));
    }
    for row in &model.rows {
        for &(j, a) in &row.coeffs {
            columns[j].push((&row.name, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut markers = 0;
    for (j, entries) in columns.iter_mut().enumerate() {
        if model.integrality[j] != in_int {
            let tag = if in_int { "'INTEND'" } else { "'INTORG'" };
            out.push_str(&fixed(&[(1, &format!("MARKER{markers:04}")), (2, "'MARKER'"), (4, tag)]));
            markers += 1;
            in_int = model.integrality[j];
        }
        if entries.is_empty() {
            // keeps the column in place
            entries.push((OBJECTIVE_NAME, 0.0));
        }
        for &(row, a) in entries.iter() {
            out.push_str(&fixed(&[(1, &model.var_names[j]), (2, row), (3, &fmt_num(a, prec))]));
        }
    }
    if in_int {
        out.push_str(&fixed(&[(1, &format!("MARKER{markers:04}")), (2, "'MARKER'"), (4, "'INTEND'")]));
    }
    out.push_str("RHS\n");
    for row in &model.rows {
        if row.rhs != 0.0 {
            out.push_str(&fixed(&[(1, "RHS"), (2, &row.name), (3, &fmt_num(row.rhs, prec))]));
        }
    }
    out.push_str("BOUNDS\n");
    for (j, name) in model.var_names.iter().enumerate() {
        let (lo, hi) = (model.var_lower[j], model.var_upper[j]);
        let line = |t: &str, v: Option<f64>| match v {
            Some(v) => fixed(&[(0, t), (1, "BND"), (2, name), (3, &fmt_num(v, prec))]),
            None => fixed(&[(0, t), (1, "BND"), (2, name)]),
        };
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => out.push_str(&line("FR", None)),
            _ if lo == hi => out.push_str(&line("FX", Some(lo))),
            (false, true) => {
                out.push_str(&line("MI", None));
                out.push_str(&line("UP", Some(hi)));
            }
            (true, false) => {
                out.push_str(&line("LO", Some(lo)));
                out.push_str(&line("PL", None));
            }
            (true, true) => {
                out.push_str(&line("LO", Some(lo)));
                out.push_str(&line("UP", Some(hi)));
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Start,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    ObjSense,
    End,
}

fn syntax(line: usize, message: impl Into<String>) -> OptexError {
    OptexError::Syntax { line, message: message.into() }
}

fn number(tok: &str, line: usize) -> Result<f64> {
    parse_num(tok).ok_or_else(|| syntax(line, format!("bad number `{tok}`")))
}

pub(super) fn parse(text: &str) -> Result<MilpModel> {
    let mut section = Section::Start;
    let mut name = String::new();
    let mut objective_row: Option<String> = None;
    let mut rows: Vec<Row> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut vars = VarTable::default();
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut integer_block = false;
    let mut integrality: Vec<bool> = Vec::new();
    let mut lo: Vec<f64> = Vec::new();
    let mut hi: Vec<f64> = Vec::new();
    let mut lo_set: Vec<bool> = Vec::new();
    let mut last_line = 0;

    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        last_line = lineno;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(char::is_whitespace) {
            if section == Section::End {
                return Err(syntax(lineno, "content after ENDATA"));
            }
            section = match toks[0].to_ascii_uppercase().as_str() {
                "NAME" => {
                    name = toks.get(1).map_or(String::new(), |s| s.to_string());
                    if toks.len() > 2 {
                        return Err(syntax(lineno, "model name contains whitespace"));
                    }
                    Section::Start
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "OBJSENSE" => match toks.get(1).map(|s| s.to_ascii_uppercase()) {
                    None => Section::ObjSense,
                    Some(s) if s == "MIN" || s == "MINIMIZE" => Section::Start,
                    Some(_) => return Err(syntax(lineno, "maximization is not supported")),
                },
                "ENDATA" => Section::End,
                other => return Err(syntax(lineno, format!("unknown section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::Start | Section::End => return Err(syntax(lineno, "data outside a section")),
            Section::ObjSense => {
                let s = toks[0].to_ascii_uppercase();
                if s != "MIN" && s != "MINIMIZE" {
                    return Err(syntax(lineno, "maximization is not supported"));
                }
            }
            Section::Rows => {
                let [t, r] = toks[..] else {
                    return Err(syntax(lineno, "expected a row type and name"));
                };
                let sense = match t.to_ascii_uppercase().as_str() {
                    "N" => {
                        if objective_row.is_some() {
                            return Err(syntax(lineno, format!("second objective row `{r}`")));
                        }
                        objective_row = Some(r.to_string());
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(syntax(lineno, format!("unknown row type `{other}`"))),
                };
                if row_index.contains_key(r) || objective_row.as_deref() == Some(r) {
                    return Err(OptexError::NameCollision(r.to_string()));
                }
                row_index.insert(r.to_string(), rows.len());
                rows.push(Row { name: r.to_string(), coeffs: Vec::new(), sense, rhs: 0.0 });
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1].trim_matches('\'') == "MARKER" {
                    match toks[2].trim_matches('\'') {
                        "INTORG" => integer_block = true,
                        "INTEND" => integer_block = false,
                        other => return Err(syntax(lineno, format!("unknown marker `{other}`"))),
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(syntax(lineno, "expected column, row, value [, row, value]"));
                }
                let j = vars.get_or_insert(toks[0]);
                if integrality.len() <= j {
                    integrality.push(integer_block);
                    lo.push(0.0);
                    hi.push(f64::INFINITY);
                    lo_set.push(false);
                }
                for pair in toks[1..].chunks(2) {
                    let v = number(pair[1], lineno)?;
                    if objective_row.as_deref() == Some(pair[0]) {
                        if v != 0.0 {
                            objective.push((j, v));
                        }
                    } else {
                        let r = *row_index.get(pair[0]).ok_or_else(|| syntax(lineno, format!("unknown row `{}`", pair[0])))?;
                        if v != 0.0 {
                            rows[r].coeffs.push((j, v));
                        }
                    }
                }
            }
            Section::Rhs => {
                let pairs = match toks.len() {
                    2 => &toks[..],
                    3 | 5 => &toks[1..],
                    _ => return Err(syntax(lineno, "expected [set,] row, value")),
                };
                for pair in pairs.chunks(2) {
                    let v = number(pair[1], lineno)?;
                    if objective_row.as_deref() == Some(pair[0]) {
                        return Err(syntax(lineno, "objective constants are not supported"));
                    }
                    let r = *row_index.get(pair[0]).ok_or_else(|| syntax(lineno, format!("unknown row `{}`", pair[0])))?;
                    rows[r].rhs = v;
                }
            }
            Section::Ranges => return Err(syntax(lineno, "ranged rows are not supported")),
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(syntax(lineno, "expected type, set, column [, value]"));
                }
                let kind = toks[0].to_ascii_uppercase();
                let j = vars.get(toks[2]).unwrap_or_else(|| vars.get_or_insert(toks[2]));
                if integrality.len() <= j {
                    integrality.push(false);
                    lo.push(0.0);
                    hi.push(f64::INFINITY);
                    lo_set.push(false);
                }
                let needs_value = matches!(kind.as_str(), "UP" | "LO" | "FX" | "LI" | "UI");
                if toks.len() > 4 || (needs_value && toks.len() != 4) {
                    return Err(syntax(lineno, format!("wrong number of fields for bound type {kind}")));
                }
                let value = if toks.len() == 4 { Some(number(toks[3], lineno)?) } else { None };
                match (kind.as_str(), value) {
                    ("UP" | "UI", Some(v)) => {
                        hi[j] = v;
                        if v < 0.0 && !lo_set[j] {
                            lo[j] = f64::NEG_INFINITY;
                        }
                        integrality[j] |= kind == "UI";
                    }
                    ("LO" | "LI", Some(v)) => {
                        lo[j] = v;
                        lo_set[j] = true;
                        integrality[j] |= kind == "LI";
                    }
                    ("FX", Some(v)) => {
                        lo[j] = v;
                        hi[j] = v;
                        lo_set[j] = true;
                    }
                    ("FR", None) => {
                        lo[j] = f64::NEG_INFINITY;
                        hi[j] = f64::INFINITY;
                        lo_set[j] = true;
                    }
                    ("MI", None) => {
                        lo[j] = f64::NEG_INFINITY;
                        lo_set[j] = true;
                    }
                    ("PL", None) => hi[j] = f64::INFINITY,
                    ("BV", _) => {
                        lo[j] = 0.0;
                        hi[j] = 1.0;
                        lo_set[j] = true;
                        integrality[j] = true;
                    }
                    _ => return Err(syntax(lineno, format!("unknown bound type `{}`", toks[0]))),
                }
            }
        }
    }
    if section != Section::End {
        return Err(syntax(last_line + 1, "unexpected end of file (missing ENDATA)"));
    }
    if objective_row.is_none() {
        return Err(OptexError::MissingObjective);
    }
    Ok(MilpModel {
        name,
        var_names: vars.names,
        objective,
        rows,
        var_lower: lo,
        var_upper: hi,
        integrality,
        layout: None,
    })
}
