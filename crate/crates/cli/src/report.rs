use std::time::Duration;

use serde::Serialize;

use optex_core::bnb::SolveStatus;
use optex_core::pipeline::PipelineResult;
use optex_core::{CriterionSpec, DesignProblem, ExactDesign, SymMatrix};

#[derive(Debug, Serialize)]
pub struct SupportPoint {
    pub point: usize,
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Serialize)]
pub struct DesignReport {
    pub counts: Vec<usize>,
    pub support: Vec<SupportPoint>,
    #[serde(skip)]
    labels: Vec<String>,
}

impl DesignReport {
    pub fn new(problem: &DesignProblem, design: &ExactDesign) -> Self {
        let labels: Vec<String> = (0..problem.n()).map(|i| problem.label(i)).collect();
        let support = design
            .support()
            .into_iter()
            .map(|i| SupportPoint { point: i, label: labels[i].clone(), count: design.counts()[i] })
            .collect();
        Self { counts: design.counts().to_vec(), support, labels }
    }

    /// One `label<TAB>d_i` line per candidate point.
    pub fn tsv(&self) -> String {
        let mut s = String::from("label\td\n");
        for (label, d) in self.labels.iter().zip(&self.counts) {
            s.push_str(&format!("{label}\t{d}\n"));
        }
        s
    }
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub criterion: String,
    #[serde(rename = "N")]
    pub runs: usize,
    pub design: DesignReport,
    pub criterion_value: f64,
    pub sigma: SymMatrix,
    pub status: SolveStatus,
    pub gap: f64,
    pub lower_bound: f64,
    pub nodes: usize,
    pub start: Vec<usize>,
    pub alpha: f64,
    pub wall_time: f64,
}

impl SolveReport {
    pub fn new(problem: &DesignProblem, spec: &CriterionSpec, r: &PipelineResult, elapsed: Duration) -> Self {
        Self {
            criterion: spec.kind().to_string(),
            runs: problem.run_budget(),
            design: DesignReport::new(problem, &r.design),
            criterion_value: r.criterion_value,
            sigma: r.sigma.clone(),
            status: r.status,
            gap: r.gap,
            lower_bound: r.lower_bound,
            nodes: r.nodes,
            start: r.start.counts().to_vec(),
            alpha: r.alpha,
            wall_time: elapsed.as_secs_f64(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BoundsReport {
    pub start: DesignReport,
    pub alpha: f64,
    #[serde(rename = "L")]
    pub lower: SymMatrix,
    #[serde(rename = "U")]
    pub upper: SymMatrix,
}

#[derive(Debug, Serialize)]
pub struct EnumerateReport {
    pub design: DesignReport,
    pub criterion_value: f64,
    pub sigma: SymMatrix,
    pub examined: u64,
}

#[derive(Debug, Serialize)]
pub struct HeuristicReport {
    pub design: DesignReport,
    pub alpha: f64,
}
