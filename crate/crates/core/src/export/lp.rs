use std::collections::HashSet;
use std::fmt::Write;

use crate::error::{OptexError, Result};
use crate::milp::{MilpModel, Row, Sense};

use super::{fmt_num, parse_num, VarTable, OBJECTIVE_NAME};

const WRAP: usize = 200;

fn push_terms(out: &mut String, line_start: usize, coeffs: &[(usize, f64)], names: &[String], prec: usize) {
    let mut start = line_start;
    for (t, &(j, a)) in coeffs.iter().enumerate() {
        if out.len() - start > WRAP {
            out.push_str("\n  ");
            start = out.len() - 2;
        }
        let sign = match (t, a < 0.0) {
            (0, false) => "",
            (0, true) => "- ",
            (_, false) => " + ",
            (_, true) => " - ",
        };
        out.push_str(sign);
        if a.abs() != 1.0 {
            out.push_str(&fmt_num(a.abs(), prec));
            out.push(' ');
        }
        out.push_str(&names[j]);
    }
}

pub(super) fn write(model: &MilpModel, prec: usize) -> String {
    let names = &model.var_names;
    let mut out = String::new();
    if !model.name.is_empty() {
        let _ = writeln!(out, "\\ Problem name: {}", model.name);
    }
    out.push_str("Minimize\n");
    let start = out.len();
    let _ = write!(out, " {OBJECTIVE_NAME}: ");
    push_terms(&mut out, start, &model.objective, names, prec);
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        let start = out.len();
        let _ = write!(out, " {}: ", row.name);
        push_terms(&mut out, start, &row.coeffs, names, prec);
        let _ = writeln!(out, " {} {}", row.sense, fmt_num(row.rhs, prec));
    }
    out.push_str("Bounds\n");
    for (j, name) in names.iter().enumerate() {
        let (lo, hi) = (model.var_lower[j], model.var_upper[j]);
        let _ = match (lo.is_finite(), hi.is_finite()) {
            (false, false) => writeln!(out, " {name} free"),
            _ if lo == hi => writeln!(out, " {name} = {}", fmt_num(lo, prec)),
            (true, false) => writeln!(out, " {name} >= {}", fmt_num(lo, prec)),
            (false, true) => writeln!(out, " -inf <= {name} <= {}", fmt_num(hi, prec)),
            (true, true) => writeln!(out, " {} <= {name} <= {}", fmt_num(lo, prec), fmt_num(hi, prec)),
        };
    }
    let binary = |j: usize| model.integrality[j] && model.var_lower[j] >= 0.0 && model.var_upper[j] <= 1.0;
    let bins: Vec<usize> = (0..names.len()).filter(|&j| binary(j)).collect();
    let gens: Vec<usize> = (0..names.len()).filter(|&j| model.integrality[j] && !binary(j)).collect();
    for (title, list) in [("Binaries", &bins), ("Generals", &gens)] {
        if !list.is_empty() {
            let _ = writeln!(out, "{title}");
            for &j in list {
                let _ = writeln!(out, " {}", names[j]);
            }
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn header(line: &str) -> Option<std::result::Result<Section, String>> {
    let lower = line.trim().to_ascii_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    Some(Ok(match words.as_slice() {
        ["minimize" | "minimise" | "minimum" | "min"] => Section::Objective,
        ["maximize" | "maximise" | "maximum" | "max"] => return Some(Err("maximization is not supported".into())),
        ["subject", "to"] | ["such", "that"] | ["st"] | ["s.t."] => Section::Constraints,
        ["bounds" | "bound"] => Section::Bounds,
        ["binaries" | "binary" | "bin"] => Section::Binaries,
        ["generals" | "general" | "gen" | "integers"] => Section::Generals,
        ["end"] => Section::End,
        _ => return None,
    }))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Sign(f64),
    Num(f64),
    Name(String),
    Colon,
    Op(Sense),
}

fn syntax(line: usize, message: impl Into<String>) -> OptexError {
    OptexError::Syntax { line, message: message.into() }
}

fn lex(line: &str, lineno: usize, out: &mut Vec<(Tok, usize)>) -> Result<()> {
    let b = line.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '+' | '-' => {
                i += 1;
                Tok::Sign(if c == '-' { -1.0 } else { 1.0 })
            }
            ':' => {
                i += 1;
                Tok::Colon
            }
            '<' | '>' | '=' => {
                let start = i;
                while i < b.len() && matches!(b[i], b'<' | b'>' | b'=') {
                    i += 1;
                }
                match &line[start..i] {
                    "<=" | "=<" | "<" => Tok::Op(Sense::Le),
                    ">=" | "=>" | ">" => Tok::Op(Sense::Ge),
                    "=" => Tok::Op(Sense::Eq),
                    other => return Err(syntax(lineno, format!("unknown operator `{other}`"))),
                }
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                    let mut k = i + 1;
                    if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                        k += 1;
                    }
                    if k < b.len() && b[k].is_ascii_digit() {
                        i = k;
                        while i < b.len() && b[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &line[start..i];
                Tok::Num(parse_num(text).ok_or_else(|| syntax(lineno, format!("bad number `{text}`")))?)
            }
            _ => {
                let start = i;
                while i < b.len() && !(b[i] as char).is_whitespace() && !b"+-<>=:".contains(&b[i]) {
                    i += 1;
                }
                Tok::Name(line[start..i].to_string())
            }
        };
        out.push((tok, lineno));
    }
    Ok(())
}

fn is_inf(name: &str) -> bool {
    matches!(name.to_ascii_lowercase().as_str(), "inf" | "infinity")
}

/// Linear terms from `toks[*pos..]` up to an operator or the end.
fn terms(toks: &[(Tok, usize)], pos: &mut usize, vars: &mut VarTable) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    while *pos < toks.len() {
        let line = toks[*pos].1;
        let mut coef = 1.0;
        let mut seen = false;
        while let Some((Tok::Sign(s), _)) = toks.get(*pos) {
            coef *= s;
            *pos += 1;
            seen = true;
        }
        if let Some((Tok::Num(v), _)) = toks.get(*pos) {
            coef *= v;
            *pos += 1;
            seen = true;
        }
        match toks.get(*pos) {
            Some((Tok::Name(name), _)) if !is_inf(name) => {
                if matches!(toks.get(*pos + 1), Some((Tok::Colon, _))) {
                    return Err(syntax(line, format!("unexpected label `{name}`")));
                }
                out.push((vars.get_or_insert(name), coef));
                *pos += 1;
            }
            Some((Tok::Op(_), l)) if seen => return Err(syntax(*l, "constant terms are not supported")),
            Some((Tok::Op(_), _)) => break,
            None if seen => return Err(syntax(line, "constant terms are not supported")),
            None => break,
            Some((t, l)) => return Err(syntax(*l, format!("unexpected token {t:?}"))),
        }
    }
    Ok(out)
}

/// Optional `name :` prefix.
fn label(toks: &[(Tok, usize)], pos: &mut usize) -> Option<String> {
    if let (Some((Tok::Name(name), _)), Some((Tok::Colon, _))) = (toks.get(*pos), toks.get(*pos + 1)) {
        *pos += 2;
        return Some(name.clone());
    }
    None
}

fn signed_value(toks: &[(Tok, usize)], pos: &mut usize, line: usize) -> Result<f64> {
    let mut sign = 1.0;
    while let Some((Tok::Sign(s), _)) = toks.get(*pos) {
        sign *= s;
        *pos += 1;
    }
    match toks.get(*pos) {
        Some((Tok::Num(v), _)) => {
            *pos += 1;
            Ok(sign * v)
        }
        Some((Tok::Name(n), _)) if is_inf(n) => {
            *pos += 1;
            Ok(sign * f64::INFINITY)
        }
        Some((t, l)) => Err(syntax(*l, format!("expected a number, found {t:?}"))),
        None => Err(syntax(line, "expected a number")),
    }
}

fn parse_bound(toks: &[(Tok, usize)], line: usize, vars: &mut VarTable, lo: &mut Vec<f64>, hi: &mut Vec<f64>) -> Result<usize> {
    let ensure = |vars: &mut VarTable, name: &str, lo: &mut Vec<f64>, hi: &mut Vec<f64>| {
        let j = vars.get_or_insert(name);
        if lo.len() <= j {
            lo.resize(j + 1, 0.0);
            hi.resize(j + 1, f64::INFINITY);
        }
        j
    };
    let name_at = |p: usize| match toks.get(p) {
        Some((Tok::Name(n), _)) if !is_inf(n) => Some(n.clone()),
        _ => None,
    };
    let mut pos = 0;
    if let Some(name) = name_at(0) {
        let j = ensure(vars, &name, lo, hi);
        match toks.get(1) {
            Some((Tok::Name(w), _)) if w.eq_ignore_ascii_case("free") => {
                lo[j] = f64::NEG_INFINITY;
                hi[j] = f64::INFINITY;
                pos = 2;
            }
            Some((Tok::Op(op), _)) => {
                pos = 2;
                let v = signed_value(toks, &mut pos, line)?;
                match op {
                    Sense::Le => hi[j] = v,
                    Sense::Ge => lo[j] = v,
                    Sense::Eq => {
                        lo[j] = v;
                        hi[j] = v;
                    }
                }
            }
            _ => return Err(syntax(line, format!("incomplete bound for `{name}`"))),
        }
        if pos != toks.len() {
            return Err(syntax(line, "trailing tokens after bound"));
        }
        return Ok(j);
    }
    let v = signed_value(toks, &mut pos, line)?;
    let Some((Tok::Op(op), _)) = toks.get(pos) else {
        return Err(syntax(line, "expected an operator in bound"));
    };
    pos += 1;
    let Some(name) = name_at(pos) else {
        return Err(syntax(line, "expected a variable in bound"));
    };
    pos += 1;
    let j = ensure(vars, &name, lo, hi);
    match op {
        Sense::Le => lo[j] = v,
        Sense::Ge => hi[j] = v,
        Sense::Eq => {
            lo[j] = v;
            hi[j] = v;
        }
    }
    if let Some((Tok::Op(op2), _)) = toks.get(pos) {
        pos += 1;
        let w = signed_value(toks, &mut pos, line)?;
        match (op, op2) {
            (Sense::Le, Sense::Le) => hi[j] = w,
            (Sense::Ge, Sense::Ge) => lo[j] = w,
            _ => return Err(syntax(line, "inconsistent operators in bound")),
        }
    }
    if pos != toks.len() {
        return Err(syntax(line, "trailing tokens after bound"));
    }
    Ok(j)
}

pub(super) fn parse(text: &str) -> Result<MilpModel> {
    let mut name = String::new();
    let mut section = Section::Preamble;
    let mut vars = VarTable::default();
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut objective_seen = false;
    let mut rows: Vec<Row> = Vec::new();
    let mut row_names = HashSet::new();
    let mut lo: Vec<f64> = Vec::new();
    let mut hi: Vec<f64> = Vec::new();
    let mut bound_order: Vec<usize> = Vec::new();
    let mut integer: Vec<(usize, bool)> = Vec::new();
    let mut pending: Vec<(Tok, usize)> = Vec::new();
    let mut last_line = 0;

    // objective and constraints may span lines; they are parsed when the section ends
    let mut flush = |section: Section,
                     pending: &mut Vec<(Tok, usize)>,
                     vars: &mut VarTable,
                     objective: &mut Vec<(usize, f64)>,
                     rows: &mut Vec<Row>|
     -> Result<()> {
        let toks = std::mem::take(pending);
        let mut pos = 0;
        match section {
            Section::Objective => {
                label(&toks, &mut pos);
                *objective = terms(&toks, &mut pos, vars)?;
                if let Some((t, l)) = toks.get(pos) {
                    return Err(syntax(*l, format!("unexpected token {t:?} in objective")));
                }
            }
            Section::Constraints => {
                while pos < toks.len() {
                    let line = toks[pos].1;
                    let name = label(&toks, &mut pos).unwrap_or_else(|| format!("r{}", rows.len()));
                    if !row_names.insert(name.clone()) || name == OBJECTIVE_NAME {
                        return Err(OptexError::NameCollision(name));
                    }
                    let coeffs = terms(&toks, &mut pos, vars)?;
                    let Some((Tok::Op(sense), l)) = toks.get(pos) else {
                        return Err(syntax(toks.last().map_or(line, |t| t.1), format!("incomplete constraint `{name}`")));
                    };
                    pos += 1;
                    let rhs = signed_value(&toks, &mut pos, *l)?;
                    if !rhs.is_finite() {
                        return Err(syntax(*l, format!("infinite right-hand side in `{name}`")));
                    }
                    rows.push(Row { name, coeffs, sense: *sense, rhs });
                }
            }
            _ => {}
        }
        Ok(())
    };

    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        last_line = lineno;
        let line = raw.split('\\').next().unwrap_or("");
        if let Some(rest) = raw.trim_start().strip_prefix('\\') {
            if let Some(n) = rest.trim().strip_prefix("Problem name:") {
                name = n.trim().to_string();
            }
        }
        if line.trim().is_empty() {
            continue;
        }
        if section == Section::End {
            return Err(syntax(lineno, "content after End"));
        }
        if let Some(h) = header(line) {
            let next = h.map_err(|m| syntax(lineno, m))?;
            flush(section, &mut pending, &mut vars, &mut objective, &mut rows)?;
            if next == Section::Objective {
                objective_seen = true;
            }
            section = next;
            continue;
        }
        if !line.starts_with(char::is_whitespace) {
            let token = line.split_whitespace().next().unwrap_or("");
            return Err(syntax(lineno, format!("unknown section `{token}`")));
        }
        match section {
            Section::Preamble => return Err(syntax(lineno, "content before the objective")),
            Section::Objective | Section::Constraints => lex(line, lineno, &mut pending)?,
            Section::Bounds => {
                let mut toks = Vec::new();
                lex(line, lineno, &mut toks)?;
                let j = parse_bound(&toks, lineno, &mut vars, &mut lo, &mut hi)?;
                bound_order.push(j);
            }
            Section::Binaries | Section::Generals => {
                for word in line.split_whitespace() {
                    integer.push((vars.get_or_insert(word), section == Section::Binaries));
                }
            }
            Section::End => unreachable!(),
        }
    }
    if section != Section::End {
        return Err(syntax(last_line + 1, "unexpected end of file (missing End)"));
    }
    if !objective_seen {
        return Err(OptexError::MissingObjective);
    }

    let n = vars.len();
    let listed: HashSet<usize> = bound_order.iter().copied().collect();
    let mut is_bounded = vec![false; n];
    for &j in &bound_order {
        is_bounded[j] = true;
    }
    lo.resize(n, 0.0);
    hi.resize(n, f64::INFINITY);
    let mut integrality = vec![false; n];
    for &(j, bin) in &integer {
        integrality[j] = true;
        if bin && !is_bounded[j] {
            lo[j] = 0.0;
            hi[j] = 1.0;
        }
    }
    // a Bounds section listing every variable once fixes the column order
    let order: Vec<usize> = if listed.len() == n && bound_order.len() == n { bound_order } else { (0..n).collect() };
    let mut new_index = vec![0; n];
    for (p, &j) in order.iter().enumerate() {
        new_index[j] = p;
    }
    let remap = |c: &mut Vec<(usize, f64)>| c.iter_mut().for_each(|t| t.0 = new_index[t.0]);
    remap(&mut objective);
    for row in &mut rows {
        remap(&mut row.coeffs);
    }
    Ok(MilpModel {
        name,
        var_names: order.iter().map(|&j| vars.names[j].clone()).collect(),
        objective,
        rows,
        var_lower: order.iter().map(|&j| lo[j]).collect(),
        var_upper: order.iter().map(|&j| hi[j]).collect(),
        integrality: order.iter().map(|&j| integrality[j]).collect(),
        layout: None,
    })
}
