//! Run configuration: a TOML file whose keys mirror the command-line flags.
//!
//! All sub-seeds derive from `seed` by fixed offsets, see [`Seeds`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use flexcf_core::baseline::DEFAULT_EPSILON;
use flexcf_core::cfgen::{GeneratorConfig, Strategy};
use flexcf_core::flex::DEFAULT_TAU;
use flexcf_core::regional::DistanceKind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Forest,
    Knn,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n_trees: usize,
    pub max_depth: usize,
    pub k: usize,
    pub command: Option<String>,
    pub timeout_secs: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            kind: ModelKind::Forest,
            n_trees: 100,
            max_depth: 8,
            k: 5,
            command: None,
            timeout_secs: 30.0,
        }
    }
}

impl ModelSpec {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

/// Generator settings; the seed is not configurable here, it derives from
/// the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub strategy: Strategy,
    pub n_cf: usize,
    pub max_changes: Option<usize>,
    pub search_budget: usize,
    pub sparsity_weight: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        let d = GeneratorConfig::default();
        GeneratorSpec {
            strategy: d.strategy,
            n_cf: d.n_cf,
            max_changes: d.max_changes,
            search_budget: d.search_budget,
            sparsity_weight: d.sparsity_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalSpec {
    pub n_factuals: usize,
}

impl Default for GlobalSpec {
    fn default() -> Self {
        GlobalSpec { n_factuals: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionSpec {
    pub filter: Option<String>,
    /// Query factual plus its nearest neighbours.
    pub n_members: usize,
    pub distance: Option<DistanceKind>,
    /// A previously emitted global `flex.json` to correlate against.
    pub global: Option<PathBuf>,
    /// Do not compute a fresh global result.
    pub no_global: bool,
}

impl Default for RegionSpec {
    fn default() -> Self {
        RegionSpec {
            filter: None,
            n_members: 5,
            distance: None,
            global: None,
            no_global: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub taus: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            taus: vec![0.1, 0.5, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub seed: u64,
    pub tau: f64,
    pub epsilon: f64,
    pub train_fraction: f64,
    pub model: ModelSpec,
    pub generator: GeneratorSpec,
    pub global: GlobalSpec,
    pub region: RegionSpec,
    pub sweep: SweepSpec,
    /// Output directory; never echoed, so runs into different directories
    /// stay byte-identical.
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            schema: None,
            seed: 0,
            tau: DEFAULT_TAU,
            epsilon: DEFAULT_EPSILON,
            train_fraction: 0.8,
            model: ModelSpec::default(),
            generator: GeneratorSpec::default(),
            global: GlobalSpec::default(),
            region: RegionSpec::default(),
            sweep: SweepSpec::default(),
            out: None,
        }
    }
}

/// Sub-seeds derived from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub split: u64,
    pub model: u64,
    pub factuals: u64,
    pub generator: u64,
    pub region: u64,
}

impl Seeds {
    pub fn from_run_seed(s: u64) -> Self {
        Seeds {
            split: s,
            model: s.wrapping_add(1),
            factuals: s.wrapping_add(2),
            generator: s.wrapping_add(3),
            region: s.wrapping_add(4),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The resolved configuration as written into the output directory.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::from_run_seed(self.seed)
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            strategy: self.generator.strategy,
            n_cf: self.generator.n_cf,
            max_changes: self.generator.max_changes,
            search_budget: self.generator.search_budget,
            sparsity_weight: self.generator.sparsity_weight,
            seed: self.seeds().generator,
        }
    }

    pub fn data_paths(&self) -> Result<(&Path, &Path)> {
        match (&self.data, &self.schema) {
            (Some(d), Some(s)) => Ok((d, s)),
            (None, _) => Err(Error::Config("no data file given (--data or `data`)".into())),
            (_, None) => Err(Error::Config("no schema file given (--schema or `schema`)".into())),
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory given (--out)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.data_paths()?;
        self.out_dir()?;
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau must lie in [0, 1], got {}", self.tau)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.global.n_factuals == 0 {
            return Err(Error::Config("n_factuals must be at least 1".into()));
        }
        if !(self.model.timeout_secs > 0.0 && self.model.timeout_secs.is_finite()) {
            return Err(Error::Config("timeout_secs must be positive".into()));
        }
        if self.model.kind == ModelKind::External && self.model.command.is_none() {
            return Err(Error::Config("external model needs a command".into()));
        }
        self.generator_config().validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_file() {
        let c = RunConfig::parse("seed = 9\n[generator]\nn_cf = 4\n[sweep]\ntaus = [0.2]\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.generator.n_cf, 4);
        assert_eq!(c.generator.search_budget, GeneratorConfig::default().search_budget);
        assert_eq!(c.global.n_factuals, 200);
        assert_eq!(c.region.n_members, 5);
        assert_eq!(c.sweep.taus, [0.2]);
        assert_eq!(c.generator_config().seed, 12);
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let e = RunConfig::parse("sed = 1\n").unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn echo_round_trips_without_out() {
        let mut c = RunConfig::default();
        c.data = Some("d.csv".into());
        c.region.filter = Some("colour = red".into());
        c.out = Some("somewhere".into());
        let text = c.echo();
        assert!(!text.contains("somewhere"));
        let back = RunConfig::parse(&text).unwrap();
        c.out = None;
        assert_eq!(back, c);
    }
}
