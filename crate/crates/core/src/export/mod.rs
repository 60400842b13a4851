//! LP and MPS text formats for [`MilpModel`].
//!
//! Both writers list every variable with explicit bounds so a parsed model
//! keeps the original column order, bounds and integrality. Numbers are
//! printed with a fixed number of significant digits; the default of 17
//! reproduces every `f64` exactly.

mod lp;
mod mps;

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{OptexError, Result};
use crate::milp::MilpModel;

/// Name of the objective row in both formats.
pub const OBJECTIVE_NAME: &str = "obj";
pub const MAX_NAME_LEN: usize = 255;
pub const MIN_PRECISION: usize = 9;
pub const MAX_PRECISION: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExportFormat {
    #[default]
    Lp,
    Mps,
}

impl FromStr for ExportFormat {
    type Err = OptexError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lp" => Ok(ExportFormat::Lp),
            "mps" => Ok(ExportFormat::Mps),
            other => Err(OptexError::InvalidProblem(format!("unknown export format `{other}`"))),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExportFormat::Lp => "lp",
            ExportFormat::Mps => "mps",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportOptions {
    pub format: ExportFormat,
    /// Significant decimal digits, between 9 and 17.
    pub precision: usize,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self { format: ExportFormat::Lp, precision: MAX_PRECISION }
    }
}

impl ExportOptions {
    pub fn new(format: ExportFormat) -> Self {
        Self { format, ..Self::default() }
    }
}

/// Words that cannot serve as names.
const RESERVED: &[&str] = &[
    "inf", "infinity", "free", "end", "bounds", "bound", "binaries", "binary", "bin", "generals", "general", "gen",
    "integers", "minimize", "minimum", "min", "maximize", "max", "st", "s.t.", "subject", "such",
];

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else { return false };
    name.len() <= MAX_NAME_LEN
        && (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']'))
        && !RESERVED.contains(&name.to_ascii_lowercase().as_str())
}

fn validate(model: &MilpModel, options: &ExportOptions) -> Result<()> {
    if !(MIN_PRECISION..=MAX_PRECISION).contains(&options.precision) {
        return Err(OptexError::InvalidProblem(format!(
            "precision {} outside {MIN_PRECISION}..={MAX_PRECISION}",
            options.precision
        )));
    }
    let n = model.num_vars();
    if model.var_lower.len() != n || model.var_upper.len() != n || model.integrality.len() != n {
        return Err(OptexError::DimensionMismatch("variable attribute lengths differ".into()));
    }
    if model.objective.is_empty() {
        return Err(OptexError::MissingObjective);
    }
    if model.name.chars().any(char::is_whitespace) {
        return Err(OptexError::InvalidProblem(format!("model name `{}` contains whitespace", model.name)));
    }
    let mut seen = HashSet::new();
    for name in &model.var_names {
        if !valid_name(name) {
            return Err(OptexError::InvalidProblem(format!("`{name}` is not a valid variable name")));
        }
        if !seen.insert(name.as_str()) {
            return Err(OptexError::NameCollision(name.clone()));
        }
    }
    let mut rows = HashSet::from([OBJECTIVE_NAME]);
    for row in &model.rows {
        if !valid_name(&row.name) {
            return Err(OptexError::InvalidProblem(format!("`{}` is not a valid row name", row.name)));
        }
        if !rows.insert(row.name.as_str()) {
            return Err(OptexError::NameCollision(row.name.clone()));
        }
    }
    let sorted = |c: &[(usize, f64)]| c.windows(2).all(|w| w[0].0 < w[1].0) && c.iter().all(|&(j, v)| j < n && v != 0.0);
    if !sorted(&model.objective) || !model.rows.iter().all(|r| sorted(&r.coeffs)) {
        return Err(OptexError::InvalidProblem("model is not finalized".into()));
    }
    let finite = |v: &f64| v.is_finite();
    if !model.objective.iter().all(|(_, v)| finite(v))
        || !model.rows.iter().all(|r| finite(&r.rhs) && r.coeffs.iter().all(|(_, v)| finite(v)))
    {
        return Err(OptexError::InvalidProblem("non-finite coefficient".into()));
    }
    for j in 0..n {
        let (lo, hi) = (model.var_lower[j], model.var_upper[j]);
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(OptexError::InvalidProblem(format!("bounds of {} are invalid", model.var_names[j])));
        }
    }
    Ok(())
}

/// Writes `model` in the chosen format.
pub fn write_model<W: Write>(model: &MilpModel, options: &ExportOptions, sink: &mut W) -> Result<()> {
    let text = to_string(model, options)?;
    sink.write_all(text.as_bytes()).map_err(|e| OptexError::Io(e.to_string()))
}

pub fn to_string(model: &MilpModel, options: &ExportOptions) -> Result<String> {
    validate(model, options)?;
    Ok(match options.format {
        ExportFormat::Lp => lp::write(model, options.precision),
        ExportFormat::Mps => mps::write(model, options.precision),
    })
}

/// Parses a model written by [`write_model`] (or a compatible file).
pub fn parse_model(bytes: &[u8], format: ExportFormat) -> Result<MilpModel> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
        OptexError::Syntax { line, message: "invalid UTF-8".into() }
    })?;
    let mut model = match format {
        ExportFormat::Lp => lp::parse(text)?,
        ExportFormat::Mps => mps::parse(text)?,
    };
    model.finalize();
    model.layout = crate::milp::VarLayout::infer(&model.var_names);
    Ok(model)
}

/// `v` with `precision` significant digits, in plain notation for moderate
/// exponents.
pub(crate) fn fmt_num(v: f64, precision: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{:.*e}", precision - 1, v);
    let (mant, exp) = s.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let neg = mant.starts_with('-');
    let mut digits: String = mant.chars().filter(char::is_ascii_digit).collect();
    while digits.len() > 1 && digits.ends_with('0') {
        digits.pop();
    }
    let sign = if neg { "-" } else { "" };
    if (-5..precision as i32).contains(&exp) {
        if exp >= 0 {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                format!("{sign}{digits}{}", "0".repeat(int_len - digits.len()))
            } else {
                format!("{sign}{}.{}", &digits[..int_len], &digits[int_len..])
            }
        } else {
            format!("{sign}0.{}{digits}", "0".repeat((-exp - 1) as usize))
        }
    } else if digits.len() == 1 {
        format!("{sign}{digits}e{exp}")
    } else {
        format!("{sign}{}.{}e{exp}", &digits[..1], &digits[1..])
    }
}

/// Parses a number token, including `inf` and `infinity` with optional sign.
pub(crate) fn parse_num(token: &str) -> Option<f64> {
    let (neg, body) = match token.as_bytes().first() {
        Some(b'-') => (true, &token[1..]),
        Some(b'+') => (false, &token[1..]),
        _ => (false, token),
    };
    let lower = body.to_ascii_lowercase();
    let v = if lower == "inf" || lower == "infinity" {
        f64::INFINITY
    } else if body.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        body.parse::<f64>().ok().filter(|v| v.is_finite())?
    } else {
        return None;
    };
    Some(if neg { -v } else { v })
}

/// Collects parsed variables in first-seen order.
#[derive(Default)]
pub(crate) struct VarTable {
    pub names: Vec<String>,
    index: std::collections::HashMap<String, usize>,
}

impl VarTable {
    pub fn get_or_insert(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        let j = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), j);
        j
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }
}

#[cfg(test)]
mod tests;
