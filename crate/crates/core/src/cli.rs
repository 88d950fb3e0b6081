//! Command-line front end.
//!
//! Every run can be described by a JSON config file (`"schema": 1`); flags
//! given on the command line override the corresponding config fields.
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 divergent bound, 4 degenerate sampler target.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::bounds::{
    format_f64, l1_bound, min_truncation_order, truncation_order_curves, validate_bound_monte_carlo, write_curves_csv,
    BoundKind, BoundSpec, EnsembleReport,
};
use crate::distinguishability::{quadratic_mean_visibility, DistinguishabilityModel};
use crate::linalg::ComplexMatrix;
use crate::probability::{exact_probability, truncated_probability, ExperimentInstance, ExperimentSetup, Strategy};
use crate::randgen::EnsembleSpec;
use crate::sampler::{sample, ChainConfig, Proposal};

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "BOSONSIM_SEED";
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] crate::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Engine(e) => match e {
                crate::Error::Divergent { .. } => 3,
                crate::Error::DegenerateTarget { .. } => 4,
                crate::Error::Numerical(_) => 1,
                _ => 2,
            },
            CliError::Io(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Prob,
    Truncate,
    Bound,
    Curves,
    Verify,
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Matrix source of an instance file: explicit entries or a seeded ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    pub input: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Vec<usize>>,
    pub model: DistinguishabilityModel,
}

impl InstanceSpec {
    pub fn setup(&self) -> CliResult<ExperimentSetup> {
        let unitary = match (&self.unitary, &self.ensemble) {
            (Some(u), None) => u.clone(),
            (None, Some(e)) => e.generate()?,
            _ => return Err(config_err("instance needs exactly one of `unitary` and `ensemble`")),
        };
        Ok(ExperimentSetup::new(unitary, self.input.clone(), self.model.clone())?)
    }

    pub fn instance(&self) -> CliResult<ExperimentInstance> {
        let output = self.output.clone().ok_or_else(|| config_err("instance has no `output` occupation"))?;
        Ok(ExperimentInstance::new(self.setup()?, output)?)
    }
}

/// Evenly spaced grid written `start:stop:step`, both ends included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn parse(text: &str) -> CliResult<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(config_err(format!("grid `{text}` is not start:stop:step")));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| config_err(format!("grid `{text}`: {e}")));
        let grid = Grid { start: num(parts[0])?, stop: num(parts[1])?, step: num(parts[2])? };
        grid.points().map(|_| grid)
    }

    pub fn points(&self) -> CliResult<Vec<f64>> {
        let ordered = self.step > 0.0 && self.stop >= self.start && self.start.is_finite() && self.stop.is_finite();
        if !ordered {
            return Err(config_err("grid needs finite start <= stop and step > 0"));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.start + i as f64 * self.step).collect())
    }
}

fn parse_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',').map(|s| s.trim().parse::<f64>().map_err(|e| config_err(format!("list `{text}`: {e}")))).collect()
}

/// Run description loaded from `--config`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub command: Option<CommandKind>,
    pub instance: Option<InstanceSpec>,
    pub k: Option<usize>,
    pub epsilon: Option<Vec<f64>>,
    pub sigma: Option<f64>,
    pub mu_grid: Option<Grid>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub strategy: Option<Strategy>,
    pub bound_kind: Option<BoundKind>,
    pub parameter: Option<f64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub model: Option<DistinguishabilityModel>,
    pub num_samples: Option<usize>,
    pub burn_in: Option<usize>,
    pub thinning: Option<usize>,
    pub proposal: Option<Proposal>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(config_err(format!("unsupported schema {} (expected {SCHEMA_VERSION})", cfg.schema)));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(name = "bosonsim", version, about = "Truncated boson-sampling probabilities and error bounds")]
pub struct Cli {
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (falls back to the config, then BOSONSIM_SEED)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write results here instead of stdout
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<OutputFormat>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Default, Args)]
pub struct InstanceArgs {
    /// Instance JSON file
    #[arg(long)]
    pub instance: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct ModelArgs {
    /// Homogeneous visibility x
    #[arg(long, conflicts_with = "visibilities")]
    pub x: Option<f64>,
    /// Per-photon visibilities x_1,..,x_n of a bad-bit model
    #[arg(long)]
    pub visibilities: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact output probability
    Prob(InstanceArgs),
    /// Truncated probability P_k
    Truncate {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<Strategy>,
    },
    /// L1 bound at order k, or the minimal order for a target distance
    Bound {
        #[command(flatten)]
        model: ModelArgs,
        /// Quadratic-mean parameter √M_2
        #[arg(long)]
        m2_root: Option<f64>,
        /// Largest pairwise visibility
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Minimal truncation orders over a grid of mean visibilities
    Curves {
        #[arg(long)]
        sigma: Option<f64>,
        /// Comma-separated target distances
        #[arg(long)]
        epsilon: Option<String>,
        /// Grid start:stop:step
        #[arg(long)]
        mu: Option<String>,
    },
    /// Monte-Carlo check of the variance prediction and L1 bound
    Verify {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Metropolis samples from the clamped truncated distribution
    Sample {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        thinning: Option<usize>,
        #[arg(long, value_parser = parse_proposal)]
        proposal: Option<Proposal>,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown strategy `{s}`"))
}

fn parse_proposal(s: &str) -> Result<Proposal, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown proposal `{s}`"))
}

impl Command {
    fn kind(&self) -> CommandKind {
        match self {
            Command::Prob(_) => CommandKind::Prob,
            Command::Truncate { .. } => CommandKind::Truncate,
            Command::Bound { .. } => CommandKind::Bound,
            Command::Curves { .. } => CommandKind::Curves,
            Command::Verify { .. } => CommandKind::Verify,
            Command::Sample { .. } => CommandKind::Sample,
        }
    }

    fn empty(kind: CommandKind) -> Self {
        match kind {
            CommandKind::Prob => Command::Prob(InstanceArgs::default()),
            CommandKind::Truncate => Command::Truncate { instance: InstanceArgs::default(), k: None, strategy: None },
            CommandKind::Bound => {
                Command::Bound { model: ModelArgs::default(), m2_root: None, x_max: None, k: None, epsilon: None }
            }
            CommandKind::Curves => Command::Curves { sigma: None, epsilon: None, mu: None },
            CommandKind::Verify => {
                Command::Verify { n: None, m: None, model: ModelArgs::default(), k: None, trials: None }
            }
            CommandKind::Sample => Command::Sample {
                instance: InstanceArgs::default(),
                k: None,
                samples: None,
                burn_in: None,
                thinning: None,
                proposal: None,
            },
        }
    }
}

fn required<T>(value: Option<T>, name: &str) -> CliResult<T> {
    value.ok_or_else(|| config_err(format!("missing required `{name}`")))
}

/// Flag value over config value over `BOSONSIM_SEED` over the default.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|e| config_err(format!("{SEED_ENV}={v}: {e}"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn load_instance(path: &Option<PathBuf>, config: &RunConfig) -> CliResult<InstanceSpec> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))
        }
        None => required(config.instance.clone(), "instance"),
    }
}

fn resolve_model(args: &ModelArgs, config: &RunConfig) -> CliResult<DistinguishabilityModel> {
    if let Some(x) = args.x {
        return Ok(DistinguishabilityModel::homogeneous(x)?);
    }
    if let Some(v) = &args.visibilities {
        return Ok(DistinguishabilityModel::obb(parse_list(v)?)?);
    }
    required(config.model.clone(), "model")
}

#[derive(Serialize)]
struct ProbabilityRecord<'a> {
    probability: f64,
    n: usize,
    input: &'a [usize],
    output: &'a [usize],
    model: &'a DistinguishabilityModel,
}

#[derive(Serialize)]
struct BoundRecord {
    kind: BoundKind,
    parameter: f64,
    k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    l1_bound: f64,
}

fn write_json<T: Serialize, W: Write>(value: &T, out: &mut W) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn bound_csv<W: Write>(r: &BoundRecord, out: &mut W) -> io::Result<()> {
    let kind = serde_json::to_value(r.kind).map_err(io::Error::from)?;
    writeln!(out, "kind,parameter,k,epsilon,l1_bound")?;
    writeln!(
        out,
        "{},{},{},{},{}",
        kind.as_str().unwrap_or_default(),
        format_f64(r.parameter),
        r.k,
        r.epsilon.map(format_f64).unwrap_or_default(),
        format_f64(r.l1_bound)
    )
}

fn report_csv<W: Write>(r: &EnsembleReport, out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "n,m,k,trials,seed,empirical_mean_q,empirical_stderr_q,empirical_mean_abs_q,empirical_var_q,\
         predicted_var,exact_var,predicted_l1_bound,per_outcome_bound,jensen_limit,\
         mean_consistent_with_zero,bound_satisfied"
    )?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.n,
        r.m,
        r.k,
        r.trials,
        r.seed,
        format_f64(r.empirical_mean_q),
        format_f64(r.empirical_stderr_q),
        format_f64(r.empirical_mean_abs_q),
        format_f64(r.empirical_var_q),
        format_f64(r.predicted_var),
        format_f64(r.exact_var),
        format_f64(r.predicted_l1_bound),
        format_f64(r.per_outcome_bound),
        format_f64(r.jensen_limit),
        r.mean_consistent_with_zero,
        r.bound_satisfied
    )
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig { schema: SCHEMA_VERSION, ..RunConfig::default() }),
    }
}

fn execute<W: Write>(cli: Cli, config: RunConfig, out: &mut W) -> CliResult<()> {
    let command = match cli.command {
        Some(c) => {
            if let Some(k) = config.command {
                if k != c.kind() {
                    return Err(config_err(format!("config command {k:?} differs from {:?}", c.kind())));
                }
            }
            c
        }
        None => Command::empty(required(config.command, "command")?),
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(config_err("--threads must be at least 1"));
        }
        // a pool set by an earlier call in this process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let seed = resolve_seed(cli.seed, config.seed)?;
    let format = cli.format.or(config.format);

    match command {
        Command::Prob(args) => {
            let inst = load_instance(&args.instance, &config)?.instance()?;
            let p = exact_probability(&inst)?;
            if format == Some(OutputFormat::Csv) {
                writeln!(out, "probability")?;
                writeln!(out, "{}", format_f64(p))?;
            } else {
                let rec = ProbabilityRecord {
                    probability: p,
                    n: inst.photons(),
                    input: &inst.setup.input,
                    output: &inst.output,
                    model: &inst.setup.model,
                };
                write_json(&rec, out)?;
            }
        }
        Command::Truncate { instance, k, strategy } => {
            let inst = load_instance(&instance.instance, &config)?.instance()?;
            let k = required(k.or(config.k), "k")?;
            let strategy = strategy.or(config.strategy).unwrap_or(Strategy::Laplace);
            let result = truncated_probability(&inst, k, strategy)?;
            if format == Some(OutputFormat::Csv) {
                writeln!(out, "k,order,value")?;
                for t in &result.per_order {
                    writeln!(out, "{},{},{}", k, t.order, format_f64(t.value))?;
                }
            } else {
                write_json(&result, out)?;
            }
        }
        Command::Bound { model, m2_root, x_max, k, epsilon } => {
            let chosen: Vec<(BoundKind, f64)> = [
                model.x.map(|x| (BoundKind::HomogeneousX, x)),
                m2_root.map(|y| (BoundKind::QuadraticMean, y)),
                x_max.map(|x| (BoundKind::MaxVisibility, x)),
                match &model.visibilities {
                    Some(v) => Some((
                        BoundKind::QuadraticMean,
                        quadratic_mean_visibility(&DistinguishabilityModel::obb(parse_list(v)?)?)?,
                    )),
                    None => None,
                },
            ]
            .into_iter()
            .flatten()
            .collect();
            let (kind, parameter) = match chosen.as_slice() {
                [one] => *one,
                [] => (required(config.bound_kind, "bound_kind")?, required(config.parameter, "parameter")?),
                _ => return Err(config_err("give one of --x, --m2-root, --x-max, --visibilities")),
            };
            let epsilon = epsilon.or_else(|| config.epsilon.as_ref().and_then(|e| e.first().copied()));
            let k = k.or(config.k);
            let record = match (k, epsilon) {
                (Some(k), None) => BoundRecord {
                    kind,
                    parameter,
                    k,
                    epsilon: None,
                    l1_bound: l1_bound(&BoundSpec { kind, parameter, k })?,
                },
                (None, Some(eps)) => {
                    let k = min_truncation_order(parameter, eps, kind)?;
                    let l1 = l1_bound(&BoundSpec { kind, parameter, k })?;
                    BoundRecord { kind, parameter, k, epsilon: Some(eps), l1_bound: l1 }
                }
                _ => return Err(config_err("give exactly one of `k` and `epsilon`")),
            };
            if format == Some(OutputFormat::Csv) {
                bound_csv(&record, out)?;
            } else {
                write_json(&record, out)?;
            }
        }
        Command::Curves { sigma, epsilon, mu } => {
            let sigma = required(sigma.or(config.sigma), "sigma")?;
            let epsilons = match epsilon {
                Some(e) => parse_list(&e)?,
                None => required(config.epsilon.clone(), "epsilon")?,
            };
            let grid = match mu {
                Some(g) => Grid::parse(&g)?,
                None => required(config.mu_grid, "mu_grid")?,
            };
            let rows = truncation_order_curves(sigma, &epsilons, &grid.points()?)?;
            if format == Some(OutputFormat::Json) {
                write_json(&rows, out)?;
            } else {
                write_curves_csv(&rows, &mut *out)?;
            }
        }
        Command::Verify { n, m, model, k, trials } => {
            let n = required(n.or(config.n), "n")?;
            let m = required(m.or(config.m), "m")?;
            let k = required(k.or(config.k), "k")?;
            let trials = required(trials.or(config.trials), "trials")?;
            let model = resolve_model(&model, &config)?;
            let report = validate_bound_monte_carlo(n, m, k, &model, trials, seed)?;
            if format == Some(OutputFormat::Csv) {
                report_csv(&report, out)?;
            } else {
                write_json(&report, out)?;
            }
        }
        Command::Sample { instance, k, samples, burn_in, thinning, proposal } => {
            let setup = load_instance(&instance.instance, &config)?.setup()?;
            let k = required(k.or(config.k), "k")?;
            let num_samples = required(samples.or(config.num_samples), "samples")?;
            let mut cfg = ChainConfig::for_modes(setup.modes(), num_samples, seed);
            cfg.burn_in = burn_in.or(config.burn_in).unwrap_or(cfg.burn_in);
            cfg.thinning = thinning.or(config.thinning).unwrap_or(cfg.thinning);
            cfg.proposal = proposal.or(config.proposal).unwrap_or(cfg.proposal);
            let draws = sample(&setup, k, &cfg)?;
            if format == Some(OutputFormat::Csv) {
                let header: Vec<String> = (0..setup.modes()).map(|i| format!("mode_{i}")).collect();
                writeln!(out, "{}", header.join(","))?;
                for s in &draws {
                    let row: Vec<String> = s.iter().map(|c| c.to_string()).collect();
                    writeln!(out, "{}", row.join(","))?;
                }
            } else {
                for s in &draws {
                    serde_json::to_writer(&mut *out, s).map_err(io::Error::from)?;
                    writeln!(out)?;
                }
            }
        }
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_writer(args, &mut io::stdout().lock())
}

/// As [`run`], with `out` in place of stdout when no output path is set.
pub fn run_with_writer<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = (|| -> CliResult<()> {
        let config = load_config(&cli)?;
        match cli.output.clone().or_else(|| config.output_path.clone()) {
            Some(path) => {
                let mut w = BufWriter::new(File::create(&path)?);
                execute(cli, config, &mut w)?;
                w.flush()?;
                Ok(())
            }
            None => execute(cli, config, out),
        }
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bosonsim: {e}");
            e.exit_code()
        }
    }
}
