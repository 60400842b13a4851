mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use optex_core::bnb::SolveStatus;
use optex_core::export::{write_model, ExportFormat, ExportOptions, MAX_PRECISION};
use optex_core::heuristic::HeuristicConfig;
use optex_core::io::{parse_constraints, parse_design, BlocksFile, ProblemFile};
use optex_core::oracle::DEFAULT_CAP;
use optex_core::pipeline::{self, PipelineConfig};
use optex_core::{CovBounds, CriterionKind, CriterionSpec, DesignProblem, ExtraConstraint};

use report::{BoundsReport, DesignReport, EnumerateReport, HeuristicReport, SolveReport};

#[derive(Parser, Debug)]
#[command(name = "optex", version)]
#[command(about = "Exact optimal designs for minimax criteria (A, I, MV, G and custom) by mixed-integer programming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find a certified optimal design
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: StartArgs,
        /// Wall-clock limit in seconds
        #[arg(long)]
        time_limit: Option<f64>,
        /// Node limit for the search
        #[arg(long)]
        nodes: Option<usize>,
        /// Plot-ready TSV of (label, d_i); defaults to the JSON path with a .tsv extension
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Write the covariance bounds L and U
    Bounds {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: StartArgs,
    },
    /// Write the mixed-integer model in LP or MPS format
    Export {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: StartArgs,
        /// lp or mps; inferred from the --out extension when omitted
        #[arg(long)]
        format: Option<ExportFormat>,
        /// Significant digits of printed numbers (9 to 17)
        #[arg(long, default_value_t = MAX_PRECISION)]
        precision: usize,
    },
    /// Best design by exhaustive enumeration
    Enumerate {
        #[command(flatten)]
        common: Common,
        /// Refuse problems with more designs than this
        #[arg(long, default_value_t = DEFAULT_CAP)]
        max_designs: u128,
    },
    /// Run the exchange heuristic and report d0 and its criterion value
    Heuristic {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Problem file: {"regressors": [[..]], "N": .., "labels": [..]}
    problem: PathBuf,
    /// A, I, MV, G, or a file {"blocks": [..]} with custom blocks
    #[arg(long, default_value = "A")]
    criterion: String,
    /// Number of trials, overriding the problem file
    #[arg(long = "N", id = "runs")]
    runs: Option<usize>,
    /// Constraint file (JSON list)
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Replication caps: one number for every point or a comma-separated list
    #[arg(long)]
    caps: Option<String>,
    /// Seed of the exchange heuristic
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restarts of the exchange heuristic
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Worker threads for the heuristic and enumeration (0 = all cores)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StartArgs {
    /// Starting design {"design": [..]} replacing the heuristic
    #[arg(long)]
    start: Option<PathBuf>,
    /// Covariance bounds {"L": [[..]], "U": [[..]]} replacing the computed ones
    #[arg(long)]
    bounds_override: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse_caps(text: &str, n: usize) -> Result<Vec<usize>> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad cap `{s}`")))
        .collect::<Result<_>>()?;
    match parts.len() {
        1 => Ok(vec![parts[0]; n]),
        k if k == n => Ok(parts),
        k => bail!("{k} caps given for {n} points"),
    }
}

/// Problem, criterion, constraints and caps shared by every subcommand.
struct Setup {
    problem: DesignProblem,
    spec: CriterionSpec,
    extras: Vec<ExtraConstraint>,
    caps: Option<Vec<usize>>,
}

impl Setup {
    fn load(c: &Common) -> Result<Self> {
        if c.threads > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(c.threads).build_global()?;
        }
        let file = ProblemFile::from_json(&read(&c.problem)?)
            .with_context(|| format!("in {}", c.problem.display()))?;
        let n = file.regressors.len();
        let caps = c.caps.as_deref().map(|s| parse_caps(s, n)).transpose()?;
        let problem = file.into_problem(c.runs, caps.is_some())?;
        let spec = match c.criterion.parse::<CriterionKind>() {
            Ok(kind) if kind != CriterionKind::Custom => CriterionSpec::preset(kind, &problem)?,
            _ => {
                let path = Path::new(&c.criterion);
                if !path.exists() {
                    bail!("`{}` is neither A, I, MV, G nor a criterion file", c.criterion);
                }
                BlocksFile::from_json(&read(path)?)
                    .and_then(|b| b.into_spec(problem.m()))
                    .with_context(|| format!("in {}", path.display()))?
            }
        };
        let extras = match &c.constraints {
            Some(path) => parse_constraints(&read(path)?, &problem).with_context(|| format!("in {}", path.display()))?,
            None => Vec::new(),
        };
        info!(
            "n = {}, m = {}, N = {}, criterion {}, {} extra constraints",
            problem.n(),
            problem.m(),
            problem.run_budget(),
            spec.kind(),
            extras.len()
        );
        Ok(Self { problem, spec, extras, caps })
    }

    fn config(&self, c: &Common, s: Option<&StartArgs>) -> Result<PipelineConfig> {
        let mut config = PipelineConfig {
            caps: self.caps.clone(),
            heuristic: HeuristicConfig { restarts: c.restarts, rng_seed: c.seed, ..HeuristicConfig::default() },
            ..PipelineConfig::default()
        };
        if let Some(s) = s {
            if let Some(path) = &s.start {
                config.start = Some(parse_design(&read(path)?).with_context(|| format!("in {}", path.display()))?);
            }
            if let Some(path) = &s.bounds_override {
                config.bounds = Some(
                    CovBounds::from_json(&read(path)?, self.problem.m())
                        .with_context(|| format!("in {}", path.display()))?,
                );
            }
        }
        Ok(config)
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let clock = Instant::now();
    match cli.command {
        Command::Solve { common, start, time_limit, nodes, tsv } => {
            let setup = Setup::load(&common)?;
            let mut config = setup.config(&common, Some(&start))?;
            if let Some(t) = time_limit {
                if !(t.is_finite() && t >= 0.0) {
                    bail!("--time-limit must be a nonnegative number of seconds");
                }
                config.limits.time = Some(Duration::from_secs_f64(t));
            }
            config.limits.nodes = nodes;
            config.limits.progress = log::log_enabled!(log::Level::Debug);
            let prepared = pipeline::prepare(&setup.problem, &setup.spec, &setup.extras, &config)?;
            info!("start design has criterion value {}", prepared.alpha);
            let result = pipeline::solve_prepared(&setup.problem, &setup.spec, &setup.extras, &config, &prepared)?;
            info!("{:?} after {} nodes, gap {:e}", result.status, result.nodes, result.gap);
            let report = SolveReport::new(&setup.problem, &setup.spec, &result, clock.elapsed());
            emit(&common.out, &to_json(&report)?)?;
            let tsv = tsv.or_else(|| common.out.as_ref().map(|p| p.with_extension("tsv")));
            if let Some(path) = tsv {
                fs::write(&path, report.design.tsv()).with_context(|| format!("cannot write {}", path.display()))?;
            }
            Ok(match result.status {
                SolveStatus::Certified => ExitCode::SUCCESS,
                SolveStatus::TimeLimit | SolveStatus::NodeLimit => ExitCode::from(2),
            })
        }
        Command::Bounds { common, start } => {
            let setup = Setup::load(&common)?;
            let config = setup.config(&common, Some(&start))?;
            let prepared = pipeline::prepare(&setup.problem, &setup.spec, &setup.extras, &config)?;
            let report = BoundsReport {
                start: DesignReport::new(&setup.problem, &prepared.start),
                alpha: prepared.alpha,
                lower: prepared.bounds.lower,
                upper: prepared.bounds.upper,
            };
            emit(&common.out, &to_json(&report)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Export { common, start, format, precision } => {
            let setup = Setup::load(&common)?;
            let config = setup.config(&common, Some(&start))?;
            let format = match (format, &common.out) {
                (Some(f), _) => f,
                (None, Some(path)) => match path.extension().and_then(|e| e.to_str()) {
                    Some(ext) => ext.parse().unwrap_or_default(),
                    None => ExportFormat::Lp,
                },
                (None, None) => ExportFormat::Lp,
            };
            let prepared = pipeline::prepare(&setup.problem, &setup.spec, &setup.extras, &config)?;
            let mut buf = Vec::new();
            write_model(&prepared.model, &ExportOptions { format, precision }, &mut buf)?;
            emit(&common.out, std::str::from_utf8(&buf)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Enumerate { common, max_designs } => {
            let setup = Setup::load(&common)?;
            let r = pipeline::enumerate(&setup.problem, &setup.spec, &setup.extras, setup.caps.as_deref(), max_designs)?;
            let sigma = pipeline::verify_design(&setup.problem, setup.caps.as_deref(), &setup.extras, &r.design)?;
            let report = EnumerateReport {
                design: DesignReport::new(&setup.problem, &r.design),
                criterion_value: r.value,
                sigma,
                examined: r.examined,
            };
            emit(&common.out, &to_json(&report)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Heuristic { common } => {
            let setup = Setup::load(&common)?;
            let config = setup.config(&common, None)?;
            let d0 = pipeline::starting_design(&setup.problem, &setup.spec, &setup.extras, &config)?;
            let alpha = optex_core::design_value(&setup.problem, &setup.spec, &d0)?;
            let report = HeuristicReport { design: DesignReport::new(&setup.problem, &d0), alpha };
            emit(&common.out, &to_json(&report)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OPTEX_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
