//! Argument parsing for the `flexcf` binary. Flags override keys of the
//! `--config` file, which override built-in defaults.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use flexcf_core::cfgen::Strategy;
use flexcf_core::fixture::FixtureSpec;
use flexcf_core::regional::DistanceKind;

use crate::config::{ModelKind, RunConfig};
use crate::error::{Error, Result};
use crate::manifest::OutputSet;
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(name = "flexcf", version, about = "Feature importance from counterfactual change frequencies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score features over a seeded sample of undesirable test instances.
    Global {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        n_factuals: Option<usize>,
    },
    /// Score a neighbourhood and correlate it with a global result.
    Region {
        #[command(flatten)]
        run: RunArgs,
        /// e.g. "colour = red; x between 0.2, 0.4; group in {a, b}"
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        n_members: Option<usize>,
        #[arg(long, value_parser = parse_distance)]
        distance: Option<DistanceKind>,
        /// Previously emitted global flex.json.
        #[arg(long)]
        global: Option<PathBuf>,
        /// Do not compute a fresh global result (requires --global).
        #[arg(long)]
        no_global: bool,
        #[arg(long)]
        n_factuals: Option<usize>,
    },
    /// Score the same counterfactuals under several thresholds.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[arg(long)]
        n_factuals: Option<usize>,
    },
    /// Compare change-frequency scoring against pooled change counts.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        n_factuals: Option<usize>,
    },
    /// Write a synthetic dataset with a planted label rule.
    Fixture {
        /// planted | planted-mixed | accident
        #[arg(long, default_value = "planted", conflicts_with = "spec")]
        preset: String,
        /// Fixture specification as JSON instead of a preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column schema (TOML).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Run seed; every random stream derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative change threshold for continuous features, in [0, 1].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Absolute tolerance for the pooled baseline.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Share of rows used to train the model.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// forest | knn | external
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Neighbours for the knn model.
    #[arg(long)]
    pub k: Option<usize>,
    /// Command for an external predictor (run under `sh -c`).
    #[arg(long)]
    pub command: Option<String>,
    /// Per-batch timeout for the external predictor.
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    /// nun | sparse
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<Strategy>,
    /// Counterfactuals requested per factual.
    #[arg(long)]
    pub n_cf: Option<usize>,
    /// Most features the sparse search may change at once.
    #[arg(long)]
    pub max_changes: Option<usize>,
    /// Candidate evaluations per factual for the sparse search.
    #[arg(long)]
    pub search_budget: Option<usize>,
    #[arg(long)]
    pub sparsity_weight: Option<f64>,
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    match s {
        "forest" => Ok(ModelKind::Forest),
        "knn" => Ok(ModelKind::Knn),
        "external" => Ok(ModelKind::External),
        _ => Err("expected forest, knn or external".into()),
    }
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    match s {
        "nun" | "nearest_unlike_neighbor" => Ok(Strategy::NearestUnlikeNeighbor),
        "sparse" | "sparse_search" => Ok(Strategy::SparseSearch),
        _ => Err("expected nun or sparse".into()),
    }
}

fn parse_distance(s: &str) -> std::result::Result<DistanceKind, String> {
    match s {
        "hamming" => Ok(DistanceKind::Hamming),
        "mixed" => Ok(DistanceKind::Mixed),
        _ => Err("expected hamming or mixed".into()),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RunArgs {
    pub fn resolve(self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::read(p)?,
            None => RunConfig::default(),
        };
        if self.data.is_some() {
            c.data = self.data;
        }
        if self.schema.is_some() {
            c.schema = self.schema;
        }
        c.out = Some(self.out);
        set(&mut c.seed, self.seed);
        set(&mut c.tau, self.tau);
        set(&mut c.epsilon, self.epsilon);
        set(&mut c.train_fraction, self.train_fraction);
        set(&mut c.model.kind, self.model);
        set(&mut c.model.n_trees, self.n_trees);
        set(&mut c.model.max_depth, self.max_depth);
        set(&mut c.model.k, self.k);
        if self.command.is_some() {
            c.model.command = self.command;
        }
        set(&mut c.model.timeout_secs, self.timeout_secs);
        set(&mut c.generator.strategy, self.strategy);
        set(&mut c.generator.n_cf, self.n_cf);
        if self.max_changes.is_some() {
            c.generator.max_changes = self.max_changes;
        }
        set(&mut c.generator.search_budget, self.search_budget);
        set(&mut c.generator.sparsity_weight, self.sparsity_weight);
        Ok(c)
    }
}

/// Resolve a parsed command into its outputs and target directory.
pub fn execute(cmd: Command) -> Result<(OutputSet, PathBuf)> {
    let (out, dir) = match cmd {
        Command::Global { run, n_factuals } => {
            let mut c = run.resolve()?;
            set(&mut c.global.n_factuals, n_factuals);
            (pipeline::cmd_global(&c)?, c.out)
        }
        Command::Region {
            run,
            filter,
            n_members,
            distance,
            global,
            no_global,
            n_factuals,
        } => {
            let mut c = run.resolve()?;
            if filter.is_some() {
                c.region.filter = filter;
            }
            set(&mut c.region.n_members, n_members);
            if distance.is_some() {
                c.region.distance = distance;
            }
            if global.is_some() {
                c.region.global = global;
            }
            c.region.no_global |= no_global;
            set(&mut c.global.n_factuals, n_factuals);
            (pipeline::cmd_region(&c)?, c.out)
        }
        Command::Sweep { run, taus, n_factuals } => {
            let mut c = run.resolve()?;
            set(&mut c.sweep.taus, taus);
            set(&mut c.global.n_factuals, n_factuals);
            (pipeline::cmd_sweep(&c)?, c.out)
        }
        Command::Compare { run, n_factuals } => {
            let mut c = run.resolve()?;
            set(&mut c.global.n_factuals, n_factuals);
            (pipeline::cmd_compare(&c)?, c.out)
        }
        Command::Fixture {
            preset,
            spec,
            rows,
            seed,
            out,
        } => {
            let spec = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
                }
                None => FixtureSpec::preset(&preset, rows)
                    .ok_or_else(|| Error::Config(format!("unknown fixture preset `{preset}`")))?,
            };
            (pipeline::cmd_fixture(&spec, seed)?, Some(out))
        }
    };
    Ok((out, dir.expect("out is a required flag")))
}

/// Parse, run and write outputs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = execute(cli.command).and_then(|(out, dir)| out.write(&dir).map(|_| ()));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
