//! `cvbell` command-line front end.
//!
//! Exit codes: 0 ok, 1 a validation suite failed, 2 input error,
//! 3 domain or physics error, 4 I/O error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod figures;
mod schema;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cvbell::bell::{BellAssignment, BellProblem, Functional, SourceState};
use cvbell::gaussian::GaussianState;
use cvbell::network::{canonical_independent_set, from_family, Family, NetworkTopology};
use cvbell::optimize::{
    supremum, sweep, Ansatz, OptimizerConfig, SourceFamily, SupremumResult, SweepSpec,
};
use cvbell::quasiprob::Smoothing;
use cvbell::validation::{self, ValidationOptions};

use schema::{parse_grid, parse_source_family, SourcesFile, TopologySpec};

pub const CSV_HEADER: [&str; 13] = [
    "family",
    "params",
    "s",
    "r1",
    "r2",
    "B",
    "I",
    "J",
    "k",
    "restarts",
    "evals",
    "boundary_hit",
    "seed",
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("{0}")]
    Domain(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Input(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<cvbell::Error> for CliError {
    fn from(e: cvbell::Error) -> Self {
        match e {
            cvbell::Error::Structural(_) | cvbell::Error::Contract(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Domain(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(
    name = "cvbell",
    version,
    about = "Bell-type nonlocality witnesses for Gaussian quantum networks"
)]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate I, J and B for one assignment; prints JSON.
    Eval(EvalArgs),
    /// Supremum of B for one cell; writes one CSV row.
    Sup(RunArgs),
    /// Supremum of B over an (s, r) grid; writes CSV.
    Sweep(RunArgs),
    /// Regenerate the data behind a figure as CSV files plus a manifest.
    Reproduce(ReproduceArgs),
    /// Run the self-check suites.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct TopologyArgs {
    /// Network family: chain, star, tree or cycle.
    #[arg(long, value_parser = parse_family)]
    family: Option<Family>,
    /// Number of parties (chain, star, cycle).
    #[arg(long)]
    y: Option<usize>,
    /// Tree layers.
    #[arg(long)]
    m: Option<usize>,
    /// Tree fan-out.
    #[arg(long)]
    f: Option<usize>,
    /// Topology JSON: {"family":..,"parties":..,"sources":[[p,q],..]}; trees may give "m" and "f".
    #[arg(long, conflicts_with = "family")]
    topology: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse::<Family>().map_err(|e| e.to_string())
}

impl TopologyArgs {
    fn build(&self) -> Result<NetworkTopology, CliError> {
        if let Some(path) = &self.topology {
            let spec: TopologySpec = read_json(path)?;
            return spec.build();
        }
        let family = self
            .family
            .ok_or_else(|| CliError::Input("give --family or --topology".into()))?;
        let size = match family {
            Family::Tree => match (self.m, self.f) {
                (Some(m), Some(f)) => vec![m, f],
                _ => return Err(CliError::Input("tree needs --m and --f".into())),
            },
            Family::Custom => {
                return Err(CliError::Input("custom networks need --topology".into()))
            }
            _ => vec![self
                .y
                .ok_or_else(|| CliError::Input(format!("{family} needs --y")))?],
        };
        Ok(from_family(family, &size)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctionalArg {
    Literal,
    Factorized,
}

impl From<FunctionalArg> for Functional {
    fn from(f: FunctionalArg) -> Self {
        match f {
            FunctionalArg::Literal => Functional::Literal,
            FunctionalArg::Factorized => Functional::Factorized,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    topo: TopologyArgs,
    /// Shared source: epr, sts:v=1.2 or sts:v1=..,v2=..
    #[arg(long, value_parser = parse_source_family, conflicts_with = "sources")]
    source: Option<SourceFamily>,
    /// Squeezing of every source (first source with --r2).
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    /// Squeezing of the other sources.
    #[arg(long, allow_negative_numbers = true)]
    r2: Option<f64>,
    /// Per-source states JSON: {"sources":[{"kind":"epr","r":..},..]}.
    #[arg(long)]
    sources: Option<PathBuf>,
    /// Assignment JSON: {"sources":[{"a0":[re,im],"a1":..,"b0":..,"b1":..},..]}.
    #[arg(long)]
    assignment: PathBuf,
    /// Smoothing parameter s <= 0.
    #[arg(long, allow_negative_numbers = true)]
    s: f64,
    #[arg(long, value_enum, default_value = "literal")]
    functional: FunctionalArg,
}

#[derive(Args)]
struct OptimizerArgs {
    #[arg(long)]
    restarts: Option<usize>,
    /// Objective evaluations per restart.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Box bound on every displacement coordinate.
    #[arg(long)]
    box_radius: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// full, symmetric_sources or real_only.
    #[arg(long)]
    ansatz: Option<Ansatz>,
}

impl OptimizerArgs {
    fn config(&self) -> Result<OptimizerConfig, CliError> {
        let d = OptimizerConfig::default();
        let c = OptimizerConfig {
            restarts: self.restarts.unwrap_or(d.restarts),
            eval_budget: self.budget.unwrap_or(d.eval_budget),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            box_radius: self.box_radius.unwrap_or(d.box_radius),
            seed: self.seed.unwrap_or(d.seed),
            ansatz: self.ansatz.unwrap_or(d.ansatz),
        };
        c.check()?;
        Ok(c)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    topo: TopologyArgs,
    /// Shared source: epr, sts:v=1.2 or sts:v1=..,v2=..
    #[arg(long, value_parser = parse_source_family, conflicts_with = "sources")]
    source: Option<SourceFamily>,
    /// Squeezing grid `a:b:step` or list; every source, or the first with --r2.
    #[arg(long, allow_hyphen_values = true)]
    r: Option<String>,
    /// Squeezing grid for the other sources.
    #[arg(long, allow_hyphen_values = true)]
    r2: Option<String>,
    /// Per-source states JSON (sup only); r1 and r2 columns stay empty.
    #[arg(long)]
    sources: Option<PathBuf>,
    /// Smoothing grid `a:b:step` or list.
    #[arg(long, allow_hyphen_values = true)]
    s: String,
    #[arg(long, value_enum, default_value = "literal")]
    functional: FunctionalArg,
    #[command(flatten)]
    opt: OptimizerArgs,
    /// CSV output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for `argmax_row<N>.json` files, N = 1-based CSV data row.
    #[arg(long)]
    save_argmax: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// One of fig2, fig3, fig4, fig5, fig6, fig8, fig9, fig11, fig12.
    figure: String,
    /// Output directory (default: the figure id).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    opt: OptimizerArgs,
}

#[derive(Args)]
struct ValidateArgs {
    /// Force every oracle density to this cutoff.
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Random points per oracle suite.
    #[arg(long, default_value_t = 30)]
    points: usize,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn smoothing(s: f64) -> Result<Smoothing, CliError> {
    Ok(Smoothing::new(s)?)
}

fn gaussians(states: &[SourceState]) -> Result<Vec<GaussianState>, CliError> {
    Ok(states
        .iter()
        .map(SourceState::gaussian)
        .collect::<cvbell::Result<_>>()?)
}

fn file_states(path: &Path, topo: &NetworkTopology) -> Result<Vec<SourceState>, CliError> {
    let file: SourcesFile = read_json(path)?;
    if file.sources.len() != topo.source_count() {
        return Err(CliError::Input(format!(
            "{} lists {} sources, the network has {}",
            path.display(),
            file.sources.len(),
            topo.source_count()
        )));
    }
    file.sources.iter().map(|s| s.state()).collect()
}

fn shared_states(
    family: SourceFamily,
    r1: f64,
    r2: Option<f64>,
    topo: &NetworkTopology,
) -> Result<Vec<SourceState>, CliError> {
    (0..topo.source_count())
        .map(|j| Ok(family.state(if j == 0 { r1 } else { r2.unwrap_or(r1) })?))
        .collect()
}

fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    let topo = a.topo.build()?;
    let states = match (&a.sources, a.source) {
        (Some(path), _) => file_states(path, &topo)?,
        (None, Some(family)) => {
            let r =
                a.r.ok_or_else(|| CliError::Input("--source needs --r".into()))?;
            shared_states(family, r, a.r2, &topo)?
        }
        (None, None) => return Err(CliError::Input("give --source or --sources".into())),
    };
    let assignment: BellAssignment = read_json(&a.assignment)?;
    let k = canonical_independent_set(&topo)?;
    let problem = BellProblem::new(
        &topo,
        &k,
        &gaussians(&states)?,
        smoothing(a.s)?,
        a.functional.into(),
    )?;
    let e = problem.evaluate(&assignment)?;
    println!(
        "{}",
        serde_json::to_string(&e).expect("evaluation serializes")
    );
    Ok(())
}

/// One finished cell, ready for the CSV.
pub struct Row {
    pub topo_family: Family,
    pub params: String,
    pub s: f64,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub result: SupremumResult,
    pub seed: u64,
}

fn opt_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Output target, opened before any work starts so a bad path fails fast.
pub struct Sink {
    label: PathBuf,
    inner: Box<dyn Write>,
}

impl Sink {
    pub fn open(out: Option<&Path>) -> Result<Self, CliError> {
        Ok(match out {
            Some(p) => Sink {
                label: p.to_path_buf(),
                inner: Box::new(fs::File::create(p).map_err(|e| io_err(p, e))?),
            },
            None => Sink {
                label: PathBuf::from("<stdout>"),
                inner: Box::new(io::stdout()),
            },
        })
    }
}

/// Writes rows (and optional argmax files) from the calling thread only.
pub fn write_rows(rows: &[Row], sink: Sink, argmax_dir: Option<&Path>) -> Result<(), CliError> {
    let target = sink.label;
    let mut w = csv::Writer::from_writer(sink.inner);
    w.write_record(CSV_HEADER).map_err(|e| io_err(&target, e))?;
    for row in rows {
        let r = &row.result;
        w.write_record([
            row.topo_family.to_string(),
            row.params.clone(),
            row.s.to_string(),
            opt_num(row.r1),
            opt_num(row.r2),
            r.best.b_value.to_string(),
            r.best.i_value.to_string(),
            r.best.j_value.to_string(),
            r.best.k.to_string(),
            r.restarts_run.to_string(),
            r.evals_used.to_string(),
            r.boundary_hit.to_string(),
            row.seed.to_string(),
        ])
        .map_err(|e| io_err(&target, e))?;
    }
    w.flush().map_err(|e| io_err(&target, e))?;
    if let Some(dir) = argmax_dir {
        for (i, row) in rows.iter().enumerate() {
            let path = dir.join(format!("argmax_row{}.json", i + 1));
            write_json(&path, &row.result.argmax)?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn sweep_rows(spec: &SweepSpec, config: &OptimizerConfig) -> Result<Vec<Row>, CliError> {
    let label = spec.topology.params_label();
    Ok(sweep(spec, config)?
        .into_iter()
        .map(|row| Row {
            topo_family: spec.topology.family(),
            params: label.clone(),
            s: row.s,
            r1: Some(row.r1),
            r2: row.r2,
            result: row.result,
            seed: config.seed,
        })
        .collect())
}

fn cmd_run(a: &RunArgs, single: bool) -> Result<(), CliError> {
    let topo = a.topo.build()?;
    let config = a.opt.config()?;
    let s_values = parse_grid(&a.s).map_err(CliError::Input)?;
    let sink = Sink::open(a.out.as_deref())?;
    if let Some(dir) = &a.save_argmax {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let rows = if let Some(path) = &a.sources {
        if !single {
            return Err(CliError::Input("--sources is only accepted by sup".into()));
        }
        if s_values.len() != 1 || a.r.is_some() {
            return Err(CliError::Input(
                "sup with --sources takes one --s and no --r".into(),
            ));
        }
        let states = file_states(path, &topo)?;
        let k = canonical_independent_set(&topo)?;
        let problem = BellProblem::new(
            &topo,
            &k,
            &gaussians(&states)?,
            smoothing(s_values[0])?,
            a.functional.into(),
        )?;
        vec![Row {
            topo_family: topo.family(),
            params: topo.params_label(),
            s: s_values[0],
            r1: None,
            r2: None,
            result: supremum(&problem, &config)?,
            seed: config.seed,
        }]
    } else {
        let source = a
            .source
            .ok_or_else(|| CliError::Input("give --source or --sources".into()))?;
        let r1 = parse_grid(
            a.r.as_deref()
                .ok_or_else(|| CliError::Input("--source needs --r".into()))?,
        )
        .map_err(CliError::Input)?;
        let r2 =
            a.r2.as_deref()
                .map(parse_grid)
                .transpose()
                .map_err(CliError::Input)?;
        let r_values: Vec<(f64, Option<f64>)> = match &r2 {
            None => r1.iter().map(|&x| (x, None)).collect(),
            Some(r2) => r1
                .iter()
                .flat_map(|&x| r2.iter().map(move |&y| (x, Some(y))))
                .collect(),
        };
        if single && (s_values.len() != 1 || r_values.len() != 1) {
            return Err(CliError::Input(
                "sup evaluates one cell; use sweep for grids".into(),
            ));
        }
        let spec = SweepSpec {
            k: canonical_independent_set(&topo)?,
            topology: topo,
            source,
            s_values,
            r_values,
            functional: a.functional.into(),
        };
        sweep_rows(&spec, &config)?
    };
    write_rows(&rows, sink, a.save_argmax.as_deref())
}

fn cmd_reproduce(a: &ReproduceArgs) -> Result<(), CliError> {
    let fig = figures::lookup(&a.figure)?;
    let config = a.opt.config()?;
    let dir = a.out.clone().unwrap_or_else(|| PathBuf::from(&a.figure));
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let mut files = Vec::new();
    for (name, spec) in fig.panels()? {
        let file = format!("{name}.csv");
        let sink = Sink::open(Some(&dir.join(&file)))?;
        write_rows(&sweep_rows(&spec, &config)?, sink, None)?;
        files.push(file);
    }
    let manifest = figures::Manifest {
        figure: a.figure.clone(),
        description: fig.description.to_string(),
        seed: config.seed,
        config,
        files,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), CliError> {
    let report = validation::run(&ValidationOptions {
        seed: a.seed,
        cutoff: a.cutoff,
        points: a.points,
    });
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Failed("validation failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("input error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }
    let out = match &cli.cmd {
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Sup(a) => cmd_run(a, true),
        Cmd::Sweep(a) => cmd_run(a, false),
        Cmd::Reproduce(a) => cmd_reproduce(a),
        Cmd::Validate(a) => cmd_validate(a),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
