//! Counterfactual generation.
//!
//! Two strategies are provided. Nearest-unlike-neighbour borrows feature
//! values from the closest rows of the opposite predicted class. Sparse
//! search is a seeded random search over edits with local reverting moves,
//! scored to prefer few, small changes. Both keep immutable features fixed
//! and only emit candidates whose predicted class differs from the
//! factual's.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Class, Dataset, Instance, Schema};
use crate::model::Predictor;
use crate::regional::{feature_distance, hamming, mixed_distance};
use crate::{Error, Result};

/// Counterfactuals for one factual instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualSet {
    factual: Instance,
    counterfactuals: Vec<Instance>,
    generator_name: String,
    seed: u64,
    changed_feature_counts: Vec<usize>,
    requested: usize,
}

impl CounterfactualSet {
    /// `requested` is the number of counterfactuals asked for; a set holding
    /// fewer reports a shortfall. Pass `0` to mean "whatever is present".
    pub fn new(
        factual: Instance,
        counterfactuals: Vec<Instance>,
        generator_name: impl Into<String>,
        seed: u64,
        requested: usize,
    ) -> Self {
        let changed_feature_counts = counterfactuals
            .iter()
            .map(|c| hamming(&factual, c).unwrap_or(usize::MAX))
            .collect();
        CounterfactualSet {
            requested: requested.max(counterfactuals.len()),
            factual,
            counterfactuals,
            generator_name: generator_name.into(),
            seed,
            changed_feature_counts,
        }
    }

    pub fn factual(&self) -> &Instance {
        &self.factual
    }

    pub fn counterfactuals(&self) -> &[Instance] {
        &self.counterfactuals
    }

    pub fn len(&self) -> usize {
        self.counterfactuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counterfactuals.is_empty()
    }

    pub fn generator_name(&self) -> &str {
        &self.generator_name
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn changed_feature_counts(&self) -> &[usize] {
        &self.changed_feature_counts
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    pub fn shortfall(&self) -> usize {
        self.requested - self.counterfactuals.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[serde(alias = "nun")]
    NearestUnlikeNeighbor,
    #[serde(alias = "sparse")]
    SparseSearch,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::NearestUnlikeNeighbor => "nearest_unlike_neighbor",
            Strategy::SparseSearch => "sparse_search",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub strategy: Strategy,
    pub n_cf: usize,
    /// Upper bound on features edited per sparse-search proposal; all
    /// mutable features when unset.
    pub max_changes: Option<usize>,
    /// Candidate evaluations allowed per factual (sparse search).
    pub search_budget: usize,
    pub sparsity_weight: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            strategy: Strategy::SparseSearch,
            n_cf: 10,
            max_changes: None,
            search_budget: 2000,
            sparsity_weight: 1.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_cf == 0 {
            return bad("n_cf must be at least 1".into());
        }
        if self.search_budget < self.n_cf {
            return bad(format!(
                "search_budget {} is smaller than n_cf {}",
                self.search_budget, self.n_cf
            ));
        }
        if self.max_changes == Some(0) {
            return bad("max_changes must be at least 1".into());
        }
        if !(self.sparsity_weight >= 0.0 && self.sparsity_weight.is_finite()) {
            return bad(format!("sparsity_weight {} must be >= 0", self.sparsity_weight));
        }
        Ok(())
    }

    /// Config for the `index`-th factual of a batch: seed + index.
    pub fn for_instance(&self, index: usize) -> GeneratorConfig {
        GeneratorConfig {
            seed: self.seed.wrapping_add(index as u64),
            ..self.clone()
        }
    }
}

/// A generator bound to a pool/training set and a model. Construction
/// predicts the pool once so repeated calls share that work.
pub struct Generator<'a> {
    pool: &'a Dataset,
    model: &'a dyn Predictor,
    cfg: GeneratorConfig,
    /// Pool rows predicted desirable (nearest-unlike-neighbour only).
    unlike: Vec<usize>,
}

impl<'a> Generator<'a> {
    pub fn new(pool: &'a Dataset, model: &'a dyn Predictor, cfg: GeneratorConfig) -> Result<Self> {
        cfg.validate()?;
        let unlike = match cfg.strategy {
            Strategy::NearestUnlikeNeighbor => model
                .predict_batch(pool.rows())?
                .iter()
                .enumerate()
                .filter(|(_, &c)| c == Class::Desirable)
                .map(|(i, _)| i)
                .collect(),
            Strategy::SparseSearch => Vec::new(),
        };
        Ok(Generator {
            pool,
            model,
            cfg,
            unlike,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    /// Generate for a factual using `cfg.seed + index` as its seed.
    pub fn generate(&self, factual: &Instance, index: usize) -> Result<CounterfactualSet> {
        let cfg = self.cfg.for_instance(index);
        let schema = self.pool.schema();
        schema.check_values(index, factual)?;
        if self.model.predict(factual)? != Class::Undesirable {
            return Err(Error::AlreadyDesirable);
        }
        let found = match cfg.strategy {
            Strategy::NearestUnlikeNeighbor => self.nun(factual, &cfg)?,
            Strategy::SparseSearch => self.sparse(factual, &cfg)?,
        };
        if found.is_empty() {
            return Err(Error::NoCounterfactuals);
        }
        Ok(CounterfactualSet::new(
            factual.clone(),
            found,
            cfg.strategy.name(),
            cfg.seed,
            cfg.n_cf,
        ))
    }

    fn flips(&self, x: &[f64]) -> Result<bool> {
        Ok(self.model.predict(x)? == Class::Desirable)
    }

    fn nun(&self, factual: &Instance, cfg: &GeneratorConfig) -> Result<Vec<Instance>> {
        let schema = self.pool.schema();
        let mut ranked = Vec::with_capacity(self.unlike.len());
        for &i in &self.unlike {
            ranked.push((mixed_distance(schema, factual, self.pool.row(i))?, i));
        }
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &(_, i) in &ranked {
            if out.len() == cfg.n_cf {
                break;
            }
            let neighbour = self.pool.row(i);
            if let Some(cf) = self.copy_until_flip(schema, factual, neighbour)? {
                if seen.insert(cf.bit_key()) {
                    out.push(cf);
                }
            }
        }
        Ok(out)
    }

    /// Copy mutable feature values from `neighbour` into the factual, most
    /// distant feature first (ties by index), until the class flips.
    fn copy_until_flip(&self, schema: &Schema, factual: &Instance, neighbour: &[f64]) -> Result<Option<Instance>> {
        let mut diffs: Vec<(f64, usize)> = schema
            .mutable_indices()
            .into_iter()
            .filter(|&j| factual[j] != neighbour[j])
            .map(|j| (feature_distance(schema.feature(j), factual[j], neighbour[j]), j))
            .collect();
        diffs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut cf = factual.clone();
        for (_, j) in diffs {
            cf.set(j, neighbour[j]);
            if self.flips(&cf)? {
                return Ok(Some(cf));
            }
        }
        Ok(None)
    }

    fn sparse(&self, factual: &Instance, cfg: &GeneratorConfig) -> Result<Vec<Instance>> {
        let schema = self.pool.schema();
        let mutable = schema.mutable_indices();
        if mutable.is_empty() {
            return Ok(Vec::new());
        }
        let max_changes = cfg.max_changes.unwrap_or(mutable.len()).min(mutable.len());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut seen = BTreeSet::new();
        let mut archive: Vec<(f64, Instance)> = Vec::new();

        for _ in 0..cfg.search_budget {
            let candidate = if !archive.is_empty() && rng.random_bool(0.5) {
                let pick = rng.random_range(0..archive.len());
                match self.reduce(schema, factual, &archive[pick].1, &mut rng) {
                    Some(c) => c,
                    None => continue,
                }
            } else {
                self.random_edit(schema, factual, &mutable, max_changes, &mut rng)
            };
            if !seen.insert(candidate.bit_key()) {
                continue;
            }
            if self.flips(&candidate)? {
                let changed = hamming(factual, &candidate)? as f64;
                let magnitude = mixed_distance(schema, factual, &candidate)?;
                archive.push((changed + cfg.sparsity_weight * magnitude, candidate));
            }
        }
        // stable: equal scores keep discovery order
        archive.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(archive.into_iter().take(cfg.n_cf).map(|(_, c)| c).collect())
    }

    fn random_edit(
        &self,
        schema: &Schema,
        factual: &Instance,
        mutable: &[usize],
        max_changes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Instance {
        let m = rng.random_range(1..=max_changes);
        let mut cf = factual.clone();
        for pos in sample(rng, mutable.len(), m) {
            let j = mutable[pos];
            let f = schema.feature(j);
            let v = if f.kind.is_discrete() {
                // uniform over the other categories
                let k = f.n_categories();
                let cur = factual[j] as usize;
                let r = rng.random_range(0..k - 1);
                (if r >= cur { r + 1 } else { r }) as f64
            } else {
                rng.random_range(f.range_min..=f.range_max)
            };
            cf.set(j, v);
        }
        cf
    }

    /// Local move toward the factual: revert one changed feature, or for a
    /// continuous feature possibly move it halfway back.
    fn reduce(&self, schema: &Schema, factual: &Instance, from: &Instance, rng: &mut ChaCha8Rng) -> Option<Instance> {
        let changed: Vec<usize> = (0..factual.len()).filter(|&j| factual[j] != from[j]).collect();
        let j = changed[rng.random_range(0..changed.len())];
        let mut cf = from.clone();
        let halfway = !schema.feature(j).kind.is_discrete() && (changed.len() == 1 || rng.random_bool(0.5));
        if halfway {
            cf.set(j, factual[j] + (from[j] - factual[j]) / 2.0);
        } else if changed.len() > 1 {
            cf.set(j, factual[j]);
        } else {
            return None;
        }
        Some(cf)
    }
}

pub fn generate_nun(
    factual: &Instance,
    pool: &Dataset,
    model: &dyn Predictor,
    cfg: &GeneratorConfig,
) -> Result<CounterfactualSet> {
    let cfg = GeneratorConfig {
        strategy: Strategy::NearestUnlikeNeighbor,
        ..cfg.clone()
    };
    Generator::new(pool, model, cfg)?.generate(factual, 0)
}

pub fn generate_sparse_search(
    factual: &Instance,
    train: &Dataset,
    model: &dyn Predictor,
    cfg: &GeneratorConfig,
) -> Result<CounterfactualSet> {
    let cfg = GeneratorConfig {
        strategy: Strategy::SparseSearch,
        ..cfg.clone()
    };
    Generator::new(train, model, cfg)?.generate(factual, 0)
}

/// A factual for which generation failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkipRecord {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BatchOutcome {
    pub sets: Vec<CounterfactualSet>,
    /// Position in the input factual list of each entry of `sets`.
    pub set_indices: Vec<usize>,
    pub skips: Vec<SkipRecord>,
}

impl BatchOutcome {
    /// Fold per-factual results (in factual order) into an outcome.
    pub fn collect(results: impl IntoIterator<Item = (usize, Result<CounterfactualSet>)>) -> Self {
        let mut out = BatchOutcome::default();
        for (i, r) in results {
            match r {
                Ok(set) => {
                    out.sets.push(set);
                    out.set_indices.push(i);
                }
                Err(e) => out.skips.push(SkipRecord {
                    index: i,
                    reason: e.to_string(),
                }),
            }
        }
        out
    }

    pub fn total_counterfactuals(&self) -> usize {
        self.sets.iter().map(CounterfactualSet::len).sum()
    }
}

/// Run the generator over every factual; failures become skip records.
/// Configuration errors are reported up front.
pub fn generate_batch(
    factuals: &[Instance],
    pool: &Dataset,
    model: &dyn Predictor,
    cfg: &GeneratorConfig,
) -> Result<BatchOutcome> {
    if factuals.is_empty() {
        return Ok(BatchOutcome::default());
    }
    let generator = Generator::new(pool, model, cfg.clone())?;
    Ok(BatchOutcome::collect(
        factuals.iter().enumerate().map(|(i, f)| (i, generator.generate(f, i))),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureSchema;
    use crate::fixture::FixtureSpec;
    use crate::forest::train_forest;
    use crate::model::FnPredictor;
    use alloc::sync::Arc;
    use alloc::vec;

    fn threshold_model() -> impl Predictor {
        FnPredictor(|x: &[f64]| if x[0] > 0.5 { Class::Undesirable } else { Class::Desirable })
    }

    fn one_feature_pool() -> Dataset {
        let schema = Arc::new(Schema::new(vec![FeatureSchema::continuous("x", 0.0, 1.0)], "y").unwrap());
        Dataset::new(
            schema,
            vec![Instance::new(vec![0.2]), Instance::new(vec![0.8])],
            vec![Class::Desirable, Class::Undesirable],
        )
        .unwrap()
    }

    #[test]
    fn nun_single_feature() {
        let pool = one_feature_pool();
        let cfg = GeneratorConfig {
            n_cf: 1,
            ..Default::default()
        };
        let cs = generate_nun(&Instance::new(vec![0.9]), &pool, &threshold_model(), &cfg).unwrap();
        assert_eq!(cs.counterfactuals(), &[Instance::new(vec![0.2])]);
        assert_eq!(cs.changed_feature_counts(), &[1]);
        assert_eq!(cs.generator_name(), "nearest_unlike_neighbor");
    }

    #[test]
    fn nun_reports_shortfall() {
        let pool = one_feature_pool();
        let cfg = GeneratorConfig {
            n_cf: 3,
            ..Default::default()
        };
        let cs = generate_nun(&Instance::new(vec![0.9]), &pool, &threshold_model(), &cfg).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs.shortfall(), 2);
    }

    #[test]
    fn rejects_factual_already_desirable() {
        let pool = one_feature_pool();
        let cfg = GeneratorConfig::default();
        let r = generate_nun(&Instance::new(vec![0.1]), &pool, &threshold_model(), &cfg);
        assert_eq!(r, Err(Error::AlreadyDesirable));
    }

    #[test]
    fn all_immutable_factual_has_no_counterfactuals() {
        let schema = Arc::new(
            Schema::new(vec![FeatureSchema::continuous("x", 0.0, 1.0).with_immutable(true)], "y").unwrap(),
        );
        let pool = Dataset::new(
            schema,
            vec![Instance::new(vec![0.2]), Instance::new(vec![0.8])],
            vec![Class::Desirable, Class::Undesirable],
        )
        .unwrap();
        let cfg = GeneratorConfig::default();
        let x = Instance::new(vec![0.9]);
        assert_eq!(generate_nun(&x, &pool, &threshold_model(), &cfg), Err(Error::NoCounterfactuals));
        assert_eq!(
            generate_sparse_search(&x, &pool, &threshold_model(), &cfg),
            Err(Error::NoCounterfactuals)
        );
    }

    fn planted_forest() -> (Dataset, crate::forest::TreeEnsembleModel) {
        let ds = FixtureSpec::planted_mixed(400).generate(5).unwrap();
        let model = train_forest(&ds, 15, 5, 1).unwrap();
        (ds, model)
    }

    fn assert_valid(ds: &Dataset, model: &dyn Predictor, cs: &CounterfactualSet) {
        for (cf, &k) in cs.counterfactuals().iter().zip(cs.changed_feature_counts()) {
            assert_eq!(model.predict(cf).unwrap(), Class::Desirable);
            assert_eq!(hamming(cs.factual(), cf).unwrap(), k);
            for j in 0..ds.n_features() {
                if ds.schema().feature(j).immutable {
                    assert_eq!(cf[j].to_bits(), cs.factual()[j].to_bits());
                }
            }
            ds.schema().check_values(0, cf).unwrap();
        }
        let mut keys: Vec<_> = cs.counterfactuals().iter().map(Instance::bit_key).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), cs.len());
    }

    #[test]
    fn nun_outputs_are_valid() {
        let (ds, model) = planted_forest();
        let cfg = GeneratorConfig {
            strategy: Strategy::NearestUnlikeNeighbor,
            n_cf: 3,
            ..Default::default()
        };
        let factuals: Vec<Instance> = (0..ds.len())
            .filter(|&i| model.predict(ds.row(i)).unwrap() == Class::Undesirable)
            .take(20)
            .map(|i| ds.row(i).clone())
            .collect();
        let out = generate_batch(&factuals, &ds, &model, &cfg).unwrap();
        assert_eq!(out.sets.len(), 20);
        for cs in &out.sets {
            assert_eq!(cs.len(), 3);
            assert_valid(&ds, &model, cs);
        }
    }

    #[test]
    fn sparse_search_prefers_the_planted_feature() {
        let schema = Arc::new(
            Schema::new(
                vec![
                    FeatureSchema::continuous("x0", 0.0, 1.0),
                    FeatureSchema::continuous("x1", 0.0, 1.0),
                ],
                "y",
            )
            .unwrap(),
        );
        let train = Dataset::new(schema, vec![Instance::new(vec![0.0, 0.0])], vec![Class::Desirable]).unwrap();
        let cfg = GeneratorConfig {
            strategy: Strategy::SparseSearch,
            n_cf: 10,
            search_budget: 500,
            sparsity_weight: 1.0,
            seed: 3,
            ..Default::default()
        };
        let factual = Instance::new(vec![0.9, 0.1]);
        let cs = generate_sparse_search(&factual, &train, &threshold_model(), &cfg).unwrap();
        assert_eq!(cs.len(), 10);
        assert!(cs.counterfactuals().iter().all(|c| c[0] != 0.9));
        let only_x0 = cs.changed_feature_counts().iter().filter(|&&k| k == 1).count();
        assert!(only_x0 >= 8, "{only_x0} of 10 change only x0");

        let again = generate_sparse_search(&factual, &train, &threshold_model(), &cfg).unwrap();
        assert_eq!(cs, again);
    }

    #[test]
    fn sparse_outputs_are_valid() {
        let (ds, model) = planted_forest();
        let cfg = GeneratorConfig {
            strategy: Strategy::SparseSearch,
            n_cf: 5,
            search_budget: 300,
            seed: 9,
            ..Default::default()
        };
        let factuals: Vec<Instance> = (0..ds.len())
            .filter(|&i| model.predict(ds.row(i)).unwrap() == Class::Undesirable)
            .take(10)
            .map(|i| ds.row(i).clone())
            .collect();
        let out = generate_batch(&factuals, &ds, &model, &cfg).unwrap();
        assert!(out.skips.is_empty());
        for cs in &out.sets {
            assert_valid(&ds, &model, cs);
        }
    }

    #[test]
    fn config_validation() {
        let ok = GeneratorConfig::default();
        assert!(ok.validate().is_ok());
        let zero_changes = GeneratorConfig {
            max_changes: Some(0),
            ..ok.clone()
        };
        assert!(matches!(zero_changes.validate(), Err(Error::InvalidConfig(_))));
        let small_budget = GeneratorConfig {
            search_budget: 5,
            n_cf: 10,
            ..ok.clone()
        };
        assert!(small_budget.validate().is_err());
        let no_cf = GeneratorConfig { n_cf: 0, ..ok };
        assert!(no_cf.validate().is_err());
    }

    #[test]
    fn batch_records_skips() {
        let schema = Arc::new(
            Schema::new(
                vec![
                    FeatureSchema::continuous("x", 0.0, 1.0),
                    FeatureSchema::categorical("c", vec!["a".into(), "b".into()]),
                ],
                "y",
            )
            .unwrap(),
        );
        let pool = Dataset::new(
            schema,
            vec![Instance::new(vec![0.2, 0.0]), Instance::new(vec![0.3, 1.0])],
            vec![Class::Desirable; 2],
        )
        .unwrap();
        let mut factuals: Vec<Instance> = (0..10).map(|i| Instance::new(vec![0.6 + 0.03 * i as f64, 0.0])).collect();
        // already desirable: cannot be used as a factual
        factuals[4] = Instance::new(vec![0.1, 1.0]);
        let cfg = GeneratorConfig {
            strategy: Strategy::NearestUnlikeNeighbor,
            n_cf: 2,
            ..Default::default()
        };
        let out = generate_batch(&factuals, &pool, &threshold_model(), &cfg).unwrap();
        assert_eq!(out.sets.len(), 9);
        assert_eq!(out.skips.len(), 1);
        assert_eq!(out.skips[0].index, 4);
        assert!(!out.set_indices.contains(&4));

        let empty = generate_batch(&[], &pool, &threshold_model(), &cfg).unwrap();
        assert!(empty.sets.is_empty() && empty.skips.is_empty());
    }

    #[test]
    fn per_instance_seeds_are_offsets() {
        let cfg = GeneratorConfig {
            seed: 100,
            ..Default::default()
        };
        assert_eq!(cfg.for_instance(7).seed, 107);
    }
}
