//! Command-line driver: `train`, `baseline`, `expr` and `problems list`.
//!
//! Every CSV starts with `# manifest <sha256>`, the hash of the command,
//! resolved configuration and seed. Output directories and timestamps are
//! left out of the hash so reruns produce identical files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::baselines::{dme_record, trotter_record, BaselineRecord};
use crate::circuits::Circuit;
use crate::error::{Error, Result};
use crate::expressibility::{self, ExprConfig, ExprResult, Template};
use crate::plot::{self, Series, Style};
use crate::problems::{self, ProblemInstance, BUILTINS};
use crate::simulator::{DensityMatrix, StateVector};
use crate::strategy1::{self, Strategy1Config, TrainTrace};
use crate::strategy2::{self, Resume, StageRecord, Strategy2Config};

pub const SEED_ENV: &str = "HERMEX_SEED";

/// Below this many samples expressibility results are flagged as low confidence.
pub const LOW_CONFIDENCE_SAMPLES: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "hermex", version, about = "Variational compilation of e^{-iρt}")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a circuit for e^{-iρt}.
    Train(TrainArgs),
    /// Trotter or DME reference runs.
    Baseline(BaselineArgs),
    /// Expressibility of the circuit templates.
    Expr(ExprArgs),
    /// Built-in problem instances.
    Problems {
        #[command(subcommand)]
        action: ProblemsAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum ProblemsAction {
    List,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML file with `seed`, `t` and `[strategy1]`, `[strategy2]`, `[expr]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Built-in name or operator file.
    #[arg(long)]
    pub problem: String,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub strategy: u8,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub eps_o: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub n_c: Option<usize>,
    #[arg(long)]
    pub dt_ratio: Option<f64>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    /// Stage file of an interrupted strategy-2 run to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Trotter,
    Dme,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub problem: String,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub t: Option<f64>,
    /// Step or copy count.
    #[arg(long, conflicts_with = "sweep")]
    pub n: Option<usize>,
    /// Doubling ladder `n=a..b`.
    #[arg(long)]
    pub sweep: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ExprArgs {
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub qubits: Option<usize>,
    /// Comma-separated layer counts.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// Templates to run; all four by default.
    #[arg(long, value_delimiter = ',')]
    pub templates: Option<Vec<String>>,
    /// Also write the raw fidelity samples.
    #[arg(long)]
    pub dump_fidelities: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub t: Option<f64>,
    pub layers: Option<usize>,
    pub strategy1: Strategy1Config,
    pub strategy2: Strategy2Config,
    pub expr: ExprConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            }
        }
    }
}

/// Seed precedence: `--seed`, then `HERMEX_SEED`, then the config file.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, fallback: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Ok(v) = std::env::var(SEED_ENV) {
        return v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v} is not an unsigned integer")));
    }
    Ok(file.unwrap_or(fallback))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunManifest {
    fn new(command: &str, config: Value, seed: u64, output_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            output_dir: output_dir.to_path_buf(),
            started_unix: unix_now(),
            finished_unix: 0,
        }
    }

    /// SHA-256 of the canonical JSON of command, config and seed.
    pub fn hash(&self) -> String {
        let key = json!({"command": self.command, "config": self.config, "seed": self.seed});
        let digest = Sha256::digest(key.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn csv(&self, header: &str, body: &str) -> String {
        format!("# manifest {}\n{header}\n{body}", self.hash())
    }

    fn finish(mut self) -> Result<()> {
        self.finished_unix = unix_now();
        write_json(&self.output_dir.join("manifest.json"), &self)
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Parses the process arguments and runs; returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    exit_code(run(cli))
}

pub fn exit_code(result: Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Unknown { .. } => 2,
                _ => 1,
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Baseline(a) => cmd_baseline(&a),
        Command::Expr(a) => cmd_expr(&a),
        Command::Problems {
            action: ProblemsAction::List,
        } => {
            print!("{}", problems_table()?);
            Ok(())
        }
    }
}

pub fn problems_table() -> Result<String> {
    let mut s = String::from("name      qubits  terms  times\n");
    for name in BUILTINS {
        let p = problems::builtin(name)?;
        let times: Vec<String> = p.times.iter().map(|t| t.to_string()).collect();
        s += &format!(
            "{:<9} {:>6}  {:>5}  {}\n",
            p.name,
            p.n_qubits,
            p.operator.pauli_sum()?.len(),
            times.join(",")
        );
    }
    Ok(s)
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    problem: String,
    strategy: u8,
    t: f64,
    final_fidelity: f64,
    iterations: usize,
    restarts: Option<usize>,
    stages: Option<usize>,
    converged: bool,
    wall_time: f64,
    manifest: String,
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let problem = problems::resolve(&a.problem)?;
    let h = problem.operator.pauli_sum()?;
    let t = a.t.or(file.t).unwrap_or(problem.times[0]);
    let layers = a.layers.or(file.layers).unwrap_or(1);
    let out = &a.common.out;
    fs::create_dir_all(out)?;
    let clock = Instant::now();

    let (summary, curve) = if a.strategy == 1 {
        let mut cfg = file.strategy1.clone();
        cfg.t = t;
        cfg.seed = resolve_seed(a.common.seed, file.seed, cfg.seed)?;
        cfg.eta = a.eta.unwrap_or(cfg.eta);
        cfg.eps_o = a.eps_o.unwrap_or(cfg.eps_o);
        cfg.max_iters = a.max_iters.unwrap_or(cfg.max_iters);
        let manifest = RunManifest::new(
            "train",
            json!({"problem": problem.name, "operator": h.to_text(), "strategy": 1, "layers": layers, "strategy1": to_value(&cfg)}),
            cfg.seed,
            out,
        );
        let ansatz = strategy1::default_ansatz(&h, t, layers)?;
        let trace = strategy1::run(&cfg, &ansatz, &h, None)?;
        fs::write(out.join("trace.csv"), manifest.csv(TrainTrace::CSV_HEADER, &trace_body(&trace)))?;
        fs::write(out.join("circuit.txt"), ansatz.bind(&trace.final_params)?.to_text())?;
        let curve: Vec<(f64, f64)> = trace.iterations.iter().map(|r| (r.iter as f64, r.objective)).collect();
        let summary = TrainSummary {
            problem: problem.name.clone(),
            strategy: 1,
            t,
            final_fidelity: trace.final_objective(),
            iterations: trace.iterations.len(),
            restarts: Some(trace.restarts_used),
            stages: None,
            converged: trace.converged,
            wall_time: 0.0,
            manifest: manifest.hash(),
        };
        manifest.finish()?;
        (summary, curve)
    } else {
        train_strategy2(a, &file, &problem, t, layers)?
    };

    let summary = TrainSummary {
        wall_time: clock.elapsed().as_secs_f64(),
        ..summary
    };
    let svg = plot::render(
        &format!("{} strategy {} t={t}", problem.name, a.strategy),
        "iteration",
        "fidelity",
        &[Series::new("objective", curve, Style::Line)],
    );
    fs::write(out.join("fidelity.svg"), svg)?;
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "{} strategy {}: final fidelity {:.6}, converged {}",
        summary.problem, summary.strategy, summary.final_fidelity, summary.converged
    );
    Ok(())
}

fn trace_body(trace: &TrainTrace) -> String {
    let csv = trace.to_csv();
    csv.split_once('\n').map_or(String::new(), |(_, rest)| rest.to_string())
}

fn stage_path(out: &Path, stage: usize) -> PathBuf {
    out.join(format!("stage_{stage:02}.circuit"))
}

fn stage_index(path: &Path) -> Result<usize> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("stage_"))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Config(format!("{} is not a stage_NN file", path.display())))
}

fn train_strategy2(
    a: &TrainArgs,
    file: &FileConfig,
    problem: &ProblemInstance,
    t: f64,
    layers: usize,
) -> Result<(TrainSummary, Vec<(f64, f64)>)> {
    let h = problem.operator.pauli_sum()?;
    let mut cfg = file.strategy2.clone();
    cfg.layers = layers;
    cfg.seed = resolve_seed(a.common.seed, file.seed, cfg.seed)?;
    cfg.eta = a.eta.unwrap_or(cfg.eta);
    cfg.eps_o = a.eps_o.unwrap_or(cfg.eps_o);
    cfg.max_iters_per_stage = a.max_iters.unwrap_or(cfg.max_iters_per_stage);
    cfg.n_c = a.n_c.unwrap_or(cfg.n_c);
    cfg.dt_ratio = a.dt_ratio.unwrap_or(cfg.dt_ratio);
    cfg.fd_step = a.fd_step.unwrap_or(cfg.fd_step);
    let out = &a.common.out;
    let manifest = RunManifest::new(
        "train",
        json!({"problem": problem.name, "operator": h.to_text(), "strategy": 2, "t": t, "strategy2": to_value(&cfg)}),
        cfg.seed,
        out,
    );

    let resume = match &a.resume {
        None => None,
        Some(p) => {
            let ansatz = strategy1::default_ansatz(&h, 1.0, cfg.layers)?;
            let bound = Circuit::parse(&fs::read_to_string(p)?)?;
            Some(Resume {
                stage: stage_index(p)?,
                params: strategy2::params_from_bound(&ansatz, &bound)?,
            })
        }
    };
    let ansatz = strategy1::default_ansatz(&h, 1.0, cfg.layers)?;
    let outcome = strategy2::run_with(&cfg, &h, t, resume, |rec: &StageRecord| {
        fs::write(stage_path(out, rec.stage), ansatz.bind(&rec.params)?.to_text())?;
        Ok(())
    })?;

    let mut body = String::new();
    let mut curve = Vec::new();
    for rec in &outcome.stages {
        for r in &rec.trace.iterations {
            body += &format!("{},{},{:.15e},{:.15e}\n", rec.stage, r.iter, r.objective, r.grad_norm);
            curve.push((curve.len() as f64, r.objective));
        }
    }
    fs::write(out.join("trace.csv"), manifest.csv("stage,iter,objective,grad_norm", &body))?;
    let stage_rows: String = outcome
        .stages
        .iter()
        .map(|r| format!("{},{},{:.15e},{}\n", r.stage, r.trace.iterations.len(), r.objective, r.trace.converged))
        .collect();
    fs::write(out.join("stages.csv"), manifest.csv("stage,iterations,objective,converged", &stage_rows))?;
    fs::write(out.join("circuit.txt"), ansatz.bind(&outcome.final_params)?.to_text())?;

    let summary = TrainSummary {
        problem: problem.name.clone(),
        strategy: 2,
        t,
        final_fidelity: outcome.final_fidelity,
        iterations: curve.len(),
        restarts: None,
        stages: Some(outcome.stages.len()),
        converged: outcome.stages.iter().all(|s| s.trace.converged),
        wall_time: 0.0,
        manifest: manifest.hash(),
    };
    manifest.finish()?;
    Ok((summary, curve))
}

/// `n=a..b` as the doubling ladder `a, 2a, …` up to `b`.
pub fn parse_sweep(spec: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("sweep `{spec}` is not of the form n=a..b"));
    let range = spec.strip_prefix("n=").ok_or_else(bad)?;
    let (a, b) = range.split_once("..").ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok(std::iter::successors(Some(a), |n| n.checked_mul(2)).take_while(|&n| n <= b).collect())
}

fn cmd_baseline(a: &BaselineArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let problem = problems::resolve(&a.problem)?;
    let t = a.t.or(file.t).unwrap_or(problem.times[0]);
    let ns = match (&a.sweep, a.n) {
        (Some(s), _) => parse_sweep(s)?,
        (None, Some(n)) => vec![n],
        (None, None) => return Err(Error::Config("give --n or --sweep".into())),
    };
    let seed = resolve_seed(a.common.seed, file.seed, 0)?;
    let method = match a.method {
        Method::Trotter => "trotter",
        Method::Dme => "dme",
    };
    let out = &a.common.out;
    fs::create_dir_all(out)?;
    let manifest = RunManifest::new(
        "baseline",
        json!({"problem": problem.name, "method": method, "t": t, "n": ns}),
        seed,
        out,
    );

    let records: Vec<BaselineRecord> = match a.method {
        Method::Trotter => {
            let h = problem.operator.pauli_sum()?;
            ns.iter().map(|&n| trotter_record(&h, t, n)).collect::<Result<_>>()?
        }
        Method::Dme => {
            let rho = DensityMatrix::from_matrix(problem.operator.dense()?).map_err(|e| {
                Error::Config(format!("dme needs a density-matrix operator; {}: {e}", problem.name))
            })?;
            let probe = StateVector::zero(problem.n_qubits)?;
            ns.iter().map(|&n| dme_record(&rho, &probe, t, n)).collect::<Result<_>>()?
        }
    };
    let body: String = records.iter().map(|r| r.csv_row() + "\n").collect();
    fs::write(out.join("baseline.csv"), manifest.csv(BaselineRecord::CSV_HEADER, &body))?;
    print!("{}\n{body}", BaselineRecord::CSV_HEADER);
    manifest.finish()
}

fn cmd_expr(a: &ExprArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let mut base = file.expr.clone();
    base.seed = resolve_seed(a.common.seed, file.seed, base.seed)?;
    base.n_samples = a.samples.unwrap_or(base.n_samples);
    base.n_bins = a.bins.unwrap_or(base.n_bins);
    base.n_qubits = a.qubits.unwrap_or(base.n_qubits);
    let layers = a.layers.clone().unwrap_or_else(|| (1..=5).collect());
    let templates: Vec<Template> = match &a.templates {
        None => Template::ALL.to_vec(),
        Some(names) => names.iter().map(|n| n.parse()).collect::<Result<_>>()?,
    };
    let out = &a.common.out;
    fs::create_dir_all(out)?;
    let mut cfg_json = to_value(&base);
    cfg_json["layers"] = json!(layers);
    cfg_json["templates"] = json!(templates);
    let manifest = RunManifest::new("expr", cfg_json, base.seed, out);
    let low = base.n_samples < LOW_CONFIDENCE_SAMPLES;

    let mut results: Vec<ExprResult> = Vec::new();
    for &template in &templates {
        for &l in &layers {
            let cfg = ExprConfig {
                template,
                layers: l,
                ..base.clone()
            };
            let fids = expressibility::sample_fidelities(&cfg)?;
            if a.dump_fidelities {
                let body: String = fids.iter().map(|f| format!("{f:.15e}\n")).collect();
                fs::write(out.join(format!("fidelities_{template}_L{l}.csv")), manifest.csv("f", &body))?;
            }
            results.push(ExprResult {
                template,
                layers: l,
                histogram: expressibility::histogram(&fids, cfg.n_bins),
                kl: expressibility::kl_vs_haar(&fids, cfg.n_bins, 1 << cfg.n_qubits)?,
                n_samples: cfg.n_samples,
                n_bins: cfg.n_bins,
                seed: cfg.seed,
            });
        }
    }

    let mut body = String::new();
    if low {
        body += &format!("# low-confidence: fewer than {LOW_CONFIDENCE_SAMPLES} samples\n");
    }
    body.extend(results.iter().map(|r| r.csv_row() + "\n"));
    fs::write(out.join("expr.csv"), manifest.csv(ExprResult::CSV_HEADER, &body))?;
    let series: Vec<Series> = templates
        .iter()
        .map(|&tp| {
            let pts = results.iter().filter(|r| r.template == tp).map(|r| (r.layers as f64, r.kl)).collect();
            Series::new(tp.name(), pts, Style::Markers)
        })
        .collect();
    fs::write(out.join("expr.svg"), plot::render("expressibility", "layers", "KL vs Haar", &series))?;
    print!("{}\n{body}", ExprResult::CSV_HEADER);
    if low {
        eprintln!("warning: low-confidence estimate, {} samples", base.n_samples);
    }
    manifest.finish()
}
