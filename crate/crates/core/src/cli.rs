//! Command-line entry points.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use clap::{Parser, Subcommand};

use crate::diffnet::DenseNet;
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::io::{
    load_checkpoint, parse_config, read_grid, save_checkpoint, write_grid, write_history,
    write_trace, Checkpoint, Problem, RunConfig, Target,
};
use crate::metrics::{evaluate, sample_dx, sample_field};
use crate::optim::{train_forward_with, train_inverse_with, EpochRecord, TrainObserver};
use crate::pde::{manufactured_case, BoundaryData, ResidualSpec, ScalarField};
use crate::refsolver::{dirichlet_trace_from_neumann, solve_dirichlet_fd, FieldGrid};

#[derive(Debug, Parser)]
#[command(name = "eitnet", version, about = "Neural-network solver for the conductivity equation on the unit disc")]
pub struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the potential network and export u and ∂u/∂x.
    SolveForward,
    /// Train the conductivity network against a trained potential.
    SolveInverse {
        /// Potential checkpoint; defaults to `u_checkpoint` from the config.
        #[arg(long)]
        u_checkpoint: Option<PathBuf>,
    },
    /// Write finite-difference reference grids and the boundary trace.
    MakeReference,
    /// Compare two grid files and write MSE, PSNR and the relative error grid.
    Evaluate { reference: PathBuf, approx: PathBuf },
    /// Re-export a checkpointed network as value and ∂/∂x grids.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
        /// File stem of the exported grids.
        #[arg(long, default_value = "field")]
        name: String,
    },
}

/// An error together with the pipeline stage that produced it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

type StageResult<T = ()> = std::result::Result<T, StageError>;

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 2 for numerical failures, 1 for everything else.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("eitnet: {e}");
            if e.error.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(cli: &Cli) -> StageResult {
    match &cli.command {
        Command::SolveForward => solve_forward(&load_config(cli)?),
        Command::SolveInverse { u_checkpoint } => {
            let mut cfg = load_config(cli)?;
            if u_checkpoint.is_some() {
                cfg.u_checkpoint = u_checkpoint.clone();
            }
            solve_inverse(&cfg)
        }
        Command::MakeReference => make_reference(&load_config(cli)?),
        Command::Evaluate { reference, approx } => {
            evaluate_grids(reference, approx, &cli.out.clone().unwrap_or_else(|| PathBuf::from(".")))
        }
        Command::Export {
            checkpoint,
            resolution,
            name,
        } => {
            let cfg = cli.config.as_ref().map(|_| load_config(cli)).transpose()?;
            let resolution = resolution
                .or(cfg.as_ref().map(|c| c.export_resolution))
                .unwrap_or(100);
            let out = cli
                .out
                .clone()
                .or(cfg.map(|c| c.out))
                .unwrap_or_else(|| PathBuf::from("."));
            export(checkpoint, resolution, name, &out)
        }
    }
}

fn load_config(cli: &Cli) -> StageResult<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config("this command needs --config"))
        .stage("config")?;
    let mut cfg = parse_config(path).stage("config")?;
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn create_out(cfg_out: &Path) -> StageResult {
    std::fs::create_dir_all(cfg_out)
        .map_err(|e| Error::io(format!("creating {}", cfg_out.display()), e))
        .stage("output directory")
}

/// Writes checkpoints and the history file as training progresses, so a
/// failed run leaves its last good state behind.
struct RunRecorder {
    checkpoint: PathBuf,
    history_path: PathBuf,
    every: usize,
    epochs: usize,
    digest: String,
    history: Vec<EpochRecord>,
}

impl RunRecorder {
    fn new(out: &Path, stem: &str, cfg: &RunConfig) -> Self {
        Self {
            checkpoint: out.join(format!("{stem}.ckpt")),
            history_path: out.join(format!("{stem}_history.csv")),
            every: cfg.checkpoint_every,
            epochs: cfg.train.epochs,
            digest: cfg.digest(),
            history: Vec::new(),
        }
    }

    fn save(&self, net: &DenseNet, epoch: usize, rng_state: u64) -> Result<()> {
        save_checkpoint(
            &Checkpoint {
                net: net.clone(),
                epoch,
                rng_state,
                config_digest: self.digest.clone(),
            },
            &self.checkpoint,
        )?;
        write_history(&self.history, &self.history_path)
    }
}

impl TrainObserver for RunRecorder {
    fn on_epoch(&mut self, record: &EpochRecord, net: &DenseNet, rng_state: u64) -> Result<()> {
        self.history.push(*record);
        let done = record.epoch + 1;
        if done == self.epochs || (self.every > 0 && done % self.every == 0) {
            self.save(net, done, rng_state)?;
        }
        Ok(())
    }
}

/// Dirichlet data and residual specification for a forward run.
fn forward_problem(cfg: &RunConfig) -> Result<(ResidualSpec, BoundaryData)> {
    match &cfg.target {
        Target::Case(id) => {
            let case = manufactured_case(id)?;
            Ok((case.residual_spec(), BoundaryData::Field(case.u_exact.clone())))
        }
        _ => {
            let sigma = cfg.sigma()?;
            let trace = dirichlet_trace_from_neumann(&*sigma, cfg.current, cfg.reference_resolution)?;
            Ok((ResidualSpec::new(sigma), BoundaryData::Table(trace)))
        }
    }
}

fn export_net(net: &dyn ScalarField, layout: &FieldGrid, out: &Path, stem: &str) -> Result<()> {
    write_grid(&sample_field(net, layout)?, &out.join(format!("{stem}.csv")))?;
    write_grid(&sample_dx(net, layout)?, &out.join(format!("{stem}_dx.csv")))
}

fn require(cfg: &RunConfig, problem: Problem) -> StageResult {
    if cfg.problem == problem {
        Ok(())
    } else {
        Err(Error::config_key("problem", format!("expected problem = \"{}\"", match problem {
            Problem::Forward => "forward",
            Problem::Inverse => "inverse",
        })))
        .stage("config")
    }
}

fn solve_forward(cfg: &RunConfig) -> StageResult {
    require(cfg, Problem::Forward)?;
    create_out(&cfg.out)?;
    let (spec, u0) = forward_problem(cfg).stage("boundary data")?;
    if let BoundaryData::Table(t) = &u0 {
        write_trace(t, &cfg.out.join("trace.csv")).stage("boundary data")?;
    }
    let mut recorder = RunRecorder::new(&cfg.out, "u", cfg);
    let outcome = train_forward_with(&cfg.train, &Domain::UnitDisc, &spec, &u0, &mut recorder)
        .stage("training")?;
    if cfg.train.epochs == 0 {
        recorder.save(&outcome.net, 0, outcome.rng_state).stage("training")?;
    }
    let layout = FieldGrid::layout(&Domain::UnitDisc, cfg.export_resolution).stage("export")?;
    export_net(&outcome.net, &layout, &cfg.out, "u").stage("export")?;
    log::info!("wrote {}", cfg.out.display());
    Ok(())
}

fn solve_inverse(cfg: &RunConfig) -> StageResult {
    require(cfg, Problem::Inverse)?;
    let path = cfg
        .u_checkpoint
        .as_ref()
        .ok_or_else(|| Error::config_key("u_checkpoint", "no potential checkpoint given"))
        .stage("config")?;
    let u = load_checkpoint(path).stage("loading potential")?.net;
    create_out(&cfg.out)?;
    let sigma0 = match cfg.sigma0 {
        Some(c) => BoundaryData::Constant(c),
        None => BoundaryData::Field(cfg.sigma().stage("config")?),
    };
    let mut recorder = RunRecorder::new(&cfg.out, "sigma", cfg);
    let outcome = train_inverse_with(&cfg.train, &Domain::UnitDisc, &u, &sigma0, &mut recorder)
        .stage("training")?;
    if cfg.train.epochs == 0 {
        recorder.save(&outcome.net, 0, outcome.rng_state).stage("training")?;
    }
    let layout = FieldGrid::layout(&Domain::UnitDisc, cfg.export_resolution).stage("export")?;
    write_grid(&sample_field(&outcome.net, &layout).stage("export")?, &cfg.out.join("sigma.csv"))
        .stage("export")?;
    Ok(())
}

fn make_reference(cfg: &RunConfig) -> StageResult {
    create_out(&cfg.out)?;
    let sigma = cfg.sigma().stage("config")?;
    let out = &cfg.out;
    let (u_ref, dx_ref) = match &cfg.target {
        Target::Case(id) => {
            let case = manufactured_case(id).stage("config")?;
            let layout = FieldGrid::layout(&Domain::UnitDisc, cfg.export_resolution).stage("reference")?;
            (
                sample_field(&*case.u_exact, &layout).stage("reference")?,
                sample_dx(&*case.u_exact, &layout).stage("reference")?,
            )
        }
        _ => {
            let trace = dirichlet_trace_from_neumann(&*sigma, cfg.current, cfg.reference_resolution)
                .stage("neumann trace")?;
            write_trace(&trace, &out.join("trace.csv")).stage("neumann trace")?;
            let u = solve_dirichlet_fd(&*sigma, &BoundaryData::Table(trace), cfg.export_resolution)
                .stage("dirichlet solve")?;
            let dx = u.derivative_x();
            (u, dx)
        }
    };
    write_grid(&u_ref, &out.join("u_ref.csv")).stage("reference")?;
    write_grid(&dx_ref, &out.join("u_ref_dx.csv")).stage("reference")?;
    let layout = FieldGrid::layout(&Domain::UnitDisc, cfg.export_resolution).stage("reference")?;
    write_grid(&sample_field(&*sigma, &layout).stage("reference")?, &out.join("sigma_ref.csv"))
        .stage("reference")?;
    Ok(())
}

fn evaluate_grids(reference: &Path, approx: &Path, out: &Path) -> StageResult {
    let r = read_grid(reference).stage("reading grids")?;
    let a = read_grid(approx).stage("reading grids")?;
    // Derivative grids can lose cells at the rim; compare on the common mask.
    let r2 = r.restrict_to(&a).stage("evaluation")?;
    let a2 = a.restrict_to(&r).stage("evaluation")?;
    let report = evaluate(&r2, &a2).stage("evaluation")?;
    create_out(out)?;
    let summary = report.summary();
    std::fs::write(out.join("report.txt"), &summary)
        .map_err(|e| Error::io("writing report.txt", e))
        .stage("evaluation")?;
    write_grid(&report.rel_err_grid, &out.join("rel_err.csv")).stage("evaluation")?;
    print!("{summary}");
    Ok(())
}

fn export(checkpoint: &Path, resolution: usize, name: &str, out: &Path) -> StageResult {
    let net = load_checkpoint(checkpoint).stage("loading checkpoint")?.net;
    create_out(out)?;
    let layout = FieldGrid::layout(&Domain::UnitDisc, resolution).stage("export")?;
    export_net(&net, &layout, out, name).stage("export")
}
