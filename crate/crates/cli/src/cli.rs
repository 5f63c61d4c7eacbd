//! Command-line definitions and config-file merging.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Parser)]
#[command(
    name = "structcs",
    version,
    about = "Structured compressed sensing toolkit"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Default)]
pub struct GlobalArgs {
    /// Print a machine-readable JSON report on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "STRUCTCS_THREADS")]
    pub threads: Option<usize>,

    /// JSON file with default flag values; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a sensing matrix and export it.
    Build(BuildArgs),
    /// Estimate the restricted isometry constant of a matrix.
    Rip(RipArgs),
    /// Report the row dependency sets of a structured matrix on a support.
    Deps(DepsArgs),
    /// Evaluate the probability bounds and sample-complexity thresholds.
    Bounds(BoundsArgs),
    /// Recover a sparse vector from measurements.
    Recover(RecoverArgs),
    /// Run the Monte Carlo success-curve experiment.
    Bench(BenchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Build(_) => "build",
            Command::Rip(_) => "rip",
            Command::Deps(_) => "deps",
            Command::Bounds(_) => "bounds",
            Command::Recover(_) => "recover",
            Command::Bench(_) => "bench",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    Iid,
    /// Scalar Toeplitz (`1 x 1` blocks).
    Toeplitz,
    ToeplitzBlock,
    Circulant,
    CirculantCirculant,
    Devore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistArg {
    Gaussian,
    Bernoulli,
    SparseTernary,
}

/// Flags that describe a matrix to build.
#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct MatrixArgs {
    /// Matrix family.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<KindArg>,

    /// Row count. Need not be a multiple of the block height; the block
    /// grid is padded and the extra rows dropped.
    #[arg(long = "n")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    /// Column count.
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub big_n: Option<usize>,

    /// Block columns.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,

    /// Block rows (for devore: columns per block).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,

    /// Rows per block.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,

    /// Columns per block.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<usize>,

    /// Entry distribution.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<DistArg>,

    /// Field size of the deterministic construction.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,

    /// Polynomial degree bound of the deterministic construction.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,

    /// Block columns of the deterministic construction.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,

    /// Block rows of the deterministic construction.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,

    /// Read the full matrix spec from a JSON file instead.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Csv,
    Binary,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct BuildArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub matrix: MatrixArgs,

    /// Output file; CSV goes to stdout when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    /// Export format (default: binary for `.bin` paths, CSV otherwise).
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<FormatArg>,

    /// Also write the resolved spec as JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RipMethodArg {
    Exhaustive,
    Mc,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct RipArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub matrix: MatrixArgs,

    /// Load a dense matrix from a CSV or binary file instead of building one.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_file: Option<PathBuf>,

    /// Support size.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<RipMethodArg>,

    /// Random supports for the Monte Carlo method.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct DepsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub matrix: MatrixArgs,

    /// Column support, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<usize>>,

    /// Size of a random support drawn from the seed, used when --support is absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,

    /// Also compute an equitable coloring of the dependency graph.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub coloring: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundsArgs {
    /// Sparsity.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,

    /// Signal length.
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub big_n: Option<usize>,

    /// Measurements; defaults to the sample-complexity threshold.
    #[arg(long = "n")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    /// Block rows (outer block rows for nested circulants).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,

    /// Inner block rows of a nested circulant; uses the product `l * l2`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<usize>,

    /// Isometry constant of order 3m, in (0, 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,

    /// Concentration constant (default delta^2/16 - delta^3/48).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,

    /// Exponent constant (default c0/10).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    Bp,
    Omp,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RecoverArgs {
    /// Sensing matrix file (CSV, or binary for `.bin`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<PathBuf>,

    /// Measurement vector file (CSV, one value per line or one row).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<PathBuf>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverArg>,

    /// Solver tolerance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,

    /// Sparsity for OMP (default: number of rows).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,

    /// Estimate output file; CSV goes to stdout when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetArg {
    Desk,
    Full,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetArg>,

    /// Output directory for curve.csv, config-echo.json and plot.gp.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    /// Directory for per-cell result caching.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,

    /// Signal length.
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub big_n: Option<usize>,

    /// Sparsity.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,

    /// Measurement counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,

    /// Experiment settings (any field of the experiment config).
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Map<String, Value>>,
}

/// The config file: global keys plus one optional section per subcommand.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub json: bool,
    pub build: Option<Value>,
    pub rip: Option<Value>,
    pub deps: Option<Value>,
    pub bounds: Option<Value>,
    pub recover: Option<Value>,
    pub bench: Option<Value>,
}

impl ConfigFile {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn section(&self, name: &str) -> Option<&Value> {
        match name {
            "build" => self.build.as_ref(),
            "rip" => self.rip.as_ref(),
            "deps" => self.deps.as_ref(),
            "bounds" => self.bounds.as_ref(),
            "recover" => self.recover.as_ref(),
            "bench" => self.bench.as_ref(),
            _ => None,
        }
    }
}

/// Overlays the flags given on the command line onto the config section.
pub fn merge<T: Serialize + DeserializeOwned>(
    flags: &T,
    section: Option<&Value>,
) -> anyhow::Result<T> {
    let Some(section) = section else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let Value::Object(mut base) = section.clone() else {
        bail!("config section must be a JSON object");
    };
    let Value::Object(over) = serde_json::to_value(flags)? else {
        unreachable!("argument structs serialize to objects");
    };
    base.extend(over);
    serde_json::from_value(Value::Object(base)).context("invalid config section")
}

/// Global flags after config merging.
pub fn merge_global(flags: &GlobalArgs, config: &ConfigFile) -> GlobalArgs {
    GlobalArgs {
        json: flags.json || config.json,
        seed: flags.seed.or(config.seed),
        threads: flags.threads.or(config.threads),
        ..flags.clone()
    }
}
