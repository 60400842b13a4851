use super::*;
use crate::bounds::CovBounds;
use crate::linalg::SymMatrix;
use crate::milp::{build, Row, Sense};
use crate::model::{CriterionKind, CriterionSpec, DesignProblem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) fn tiny_model() -> MilpModel {
    let p = DesignProblem::new_unrestricted(vec![vec![1.0], vec![2.0]], 1, None).unwrap();
    let spec = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
    let b = CovBounds { lower: SymMatrix::zeros(1), upper: SymMatrix::diagonal(&[1.0]), alpha: Some(1.0) };
    let mut model = build(&p, &spec, &b, &[]).unwrap();
    model.name = "tiny".into();
    model
}

fn random_value(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..6) {
        0 => rng.random_range(-5..=5) as f64,
        1 => rng.random_range(-1.0..1.0),
        2 => rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-300..300)),
        3 => 1.0 / rng.random_range(1..50) as f64,
        4 => f64::from_bits(rng.random::<u64>() >> 2),
        _ => -rng.random_range(1e-7..1e7),
    }
}

pub(crate) fn random_model(seed: u64) -> MilpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..12);
    let nonzero = |rng: &mut ChaCha8Rng| loop {
        let v = random_value(rng);
        if v != 0.0 && v.is_finite() {
            return v;
        }
    };
    let var_names: Vec<String> = (0..n).map(|j| format!("x{j}_{}", rng.random_range(0..100))).collect();
    let mut var_lower = Vec::new();
    let mut var_upper = Vec::new();
    let mut integrality = Vec::new();
    for _ in 0..n {
        let (lo, hi) = match rng.random_range(0..6) {
            0 => (f64::NEG_INFINITY, f64::INFINITY),
            1 => (0.0, 1.0),
            2 => {
                let v = nonzero(&mut rng);
                (v, v)
            }
            3 => (f64::NEG_INFINITY, nonzero(&mut rng)),
            4 => (nonzero(&mut rng), f64::INFINITY),
            _ => {
                let a = nonzero(&mut rng);
                let b = nonzero(&mut rng);
                (a.min(b), a.max(b))
            }
        };
        var_lower.push(lo);
        var_upper.push(hi);
        integrality.push(rng.random_bool(0.3));
    }
    let mut objective: Vec<(usize, f64)> = (0..n).filter(|_| rng.random_bool(0.5)).map(|j| (j, 0.0)).collect();
    for t in objective.iter_mut() {
        t.1 = nonzero(&mut rng);
    }
    if objective.is_empty() {
        objective.push((rng.random_range(0..n), nonzero(&mut rng)));
    }
    let mut rows = Vec::new();
    for r in 0..rng.random_range(0..15) {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.4) {
                coeffs.push((j, nonzero(&mut rng)));
            }
        }
        let sense = [Sense::Le, Sense::Ge, Sense::Eq][rng.random_range(0..3)];
        let rhs = if rng.random_bool(0.3) { 0.0 } else { nonzero(&mut rng) };
        rows.push(Row { name: format!("row{r}"), coeffs, sense, rhs });
    }
    MilpModel {
        name: if rng.random_bool(0.5) { format!("model{seed}") } else { String::new() },
        var_names,
        objective,
        rows,
        var_lower,
        var_upper,
        integrality,
        layout: None,
    }
}

fn roundtrip(model: &MilpModel, format: ExportFormat) -> MilpModel {
    let text = to_string(model, &ExportOptions::new(format)).unwrap();
    parse_model(text.as_bytes(), format).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

#[test]
fn number_formatting() {
    assert_eq!(fmt_num(0.0, 17), "0");
    assert_eq!(fmt_num(-0.0, 17), "0");
    assert_eq!(fmt_num(1.0, 17), "1");
    assert_eq!(fmt_num(-4.0, 17), "-4");
    assert_eq!(fmt_num(0.25, 17), "0.25");
    assert_eq!(fmt_num(0.1, 17), "0.10000000000000001");
    assert_eq!(fmt_num(0.1, 9), "0.1");
    assert_eq!(fmt_num(1e20, 17), "1e20");
    assert_eq!(fmt_num(1.5e-7, 17), "1.4999999999999999e-7");
    assert_eq!(fmt_num(1.5e-7, 9), "1.5e-7");
    assert_eq!(fmt_num(123456.0, 17), "123456");
    assert_eq!(fmt_num(f64::NEG_INFINITY, 17), "-inf");
}

proptest! {
    #[test]
    fn numbers_survive_printing(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        let back = parse_num(&fmt_num(v, 17)).unwrap();
        prop_assert!(back == v);
    }
}

#[test]
fn random_models_roundtrip() {
    for seed in 0..50 {
        let model = random_model(seed);
        for format in [ExportFormat::Lp, ExportFormat::Mps] {
            let back = roundtrip(&model, format);
            assert_eq!(back, model, "seed {seed} {format}");
            assert_eq!(back.triplets(), model.triplets());
        }
    }
}

#[test]
fn built_models_keep_their_layout() {
    let model = tiny_model();
    for format in [ExportFormat::Lp, ExportFormat::Mps] {
        let back = roundtrip(&model, format);
        assert_eq!(back, model);
        assert_eq!(back.layout, model.layout);
    }
}

#[test]
fn golden_files() {
    let model = tiny_model();
    let lp = to_string(&model, &ExportOptions::new(ExportFormat::Lp)).unwrap();
    assert_eq!(lp, include_str!("../../tests/golden/tiny.lp"));
    let mps = to_string(&model, &ExportOptions::new(ExportFormat::Mps)).unwrap();
    assert_eq!(mps, include_str!("../../tests/golden/tiny.mps"));
}

#[test]
fn binaries_are_the_design_variables() {
    let model = tiny_model();
    let lp = to_string(&model, &ExportOptions::default()).unwrap();
    let bins: Vec<&str> = lp
        .lines()
        .skip_while(|l| *l != "Binaries")
        .skip(1)
        .take_while(|l| l.starts_with(' '))
        .map(str::trim)
        .collect();
    assert_eq!(bins, ["d_0", "d_1"]);
}

#[test]
fn output_is_deterministic() {
    let model = random_model(3);
    for format in [ExportFormat::Lp, ExportFormat::Mps] {
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_model(&model, &ExportOptions::new(format), &mut a).unwrap();
        write_model(&model, &ExportOptions::new(format), &mut b).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn writer_errors() {
    let mut model = tiny_model();
    model.objective.clear();
    assert_eq!(to_string(&model, &ExportOptions::default()), Err(OptexError::MissingObjective));

    let mut model = tiny_model();
    model.var_names[1] = "z_0_0_0".into();
    assert_eq!(to_string(&model, &ExportOptions::default()), Err(OptexError::NameCollision("z_0_0_0".into())));

    let mut model = tiny_model();
    model.rows[1].name = "eq_0_0".into();
    assert!(matches!(to_string(&model, &ExportOptions::default()), Err(OptexError::NameCollision(_))));

    let mut model = tiny_model();
    model.rows[0].name = "obj".into();
    assert!(matches!(to_string(&model, &ExportOptions::default()), Err(OptexError::NameCollision(_))));

    let mut model = tiny_model();
    model.var_names[0] = "x".repeat(256);
    assert!(matches!(to_string(&model, &ExportOptions::default()), Err(OptexError::InvalidProblem(_))));

    let opts = ExportOptions { precision: 8, ..ExportOptions::default() };
    assert!(matches!(to_string(&tiny_model(), &opts), Err(OptexError::InvalidProblem(_))));
}

fn syntax_line(r: Result<MilpModel>) -> (usize, String) {
    match r {
        Err(OptexError::Syntax { line, message }) => (line, message),
        other => panic!("expected a syntax error, got {other:?}"),
    }
}

#[test]
fn truncated_files_are_rejected() {
    let model = tiny_model();
    for format in [ExportFormat::Lp, ExportFormat::Mps] {
        let text = to_string(&model, &ExportOptions::new(format)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        for keep in [lines.len() - 1, lines.len() / 2, 3] {
            let cut = lines[..keep].join("\n");
            let (line, _) = syntax_line(parse_model(cut.as_bytes(), format));
            assert!(line >= 1 && line <= keep + 1);
        }
    }
    let (line, msg) = syntax_line(parse_model(b"Minimize\n obj: x\nSubject To\n c1: x +\n", ExportFormat::Lp));
    assert!(line <= 5, "{line} {msg}");
}

#[test]
fn unknown_sections_are_named() {
    let lp = "Minimize\n obj: x\nSubject To\n c: x >= 1\nFoo\n x\nEnd\n";
    let (line, msg) = syntax_line(parse_model(lp.as_bytes(), ExportFormat::Lp));
    assert_eq!(line, 5);
    assert!(msg.contains("`Foo`"));
    let mps = "NAME x\nROWS\n N obj\nCOLS\n x obj 1\nENDATA\n";
    let (line, msg) = syntax_line(parse_model(mps.as_bytes(), ExportFormat::Mps));
    assert_eq!(line, 4);
    assert!(msg.contains("`COLS`"));
}

#[test]
fn parser_accepts_hand_written_lp() {
    let lp = "\\ a comment\nMinimize\n obj: 2 x - y\nSubject To\n c1: x + y >= 1\n c2: - x <= -0.5\n c3: 3 x\n   + 2 y = 4\nBounds\n -1 <= y <= 5\nBinaries\n z\nEnd\n";
    let m = parse_model(lp.as_bytes(), ExportFormat::Lp).unwrap();
    assert_eq!(m.var_names, ["x", "y", "z"]);
    assert_eq!(m.objective, vec![(0, 2.0), (1, -1.0)]);
    assert_eq!(m.rows.len(), 3);
    assert_eq!(m.rows[1].coeffs, vec![(0, -1.0)]);
    assert_eq!(m.rows[1].rhs, -0.5);
    assert_eq!(m.rows[2].coeffs, vec![(0, 3.0), (1, 2.0)]);
    assert_eq!((m.var_lower[0], m.var_upper[0]), (0.0, f64::INFINITY));
    assert_eq!((m.var_lower[1], m.var_upper[1]), (-1.0, 5.0));
    assert_eq!((m.var_lower[2], m.var_upper[2]), (0.0, 1.0));
    assert_eq!(m.integrality, [false, false, true]);
}

#[test]
fn ranged_rows_are_rejected() {
    let mps = "NAME\nROWS\n N obj\n L c\nCOLUMNS\n x obj 1\n x c 1\nRHS\n RHS c 4\nRANGES\n RNG c 2\nBOUNDS\nENDATA\n";
    let (line, _) = syntax_line(parse_model(mps.as_bytes(), ExportFormat::Mps));
    assert_eq!(line, 11);
}
