//! Feature change frequencies from counterfactual sets.
//!
//! For one factual with counterfactuals `x'_1..x'_N`, feature `j` scores
//! `phi_j = c_j / N`, where `c_j` counts counterfactuals that change `j`.
//! Discrete features count any code change. Continuous features count a
//! change only when `|x'_kj - x_j| / range_j > tau_j`, and also accumulate the
//! mean relative magnitude `mu_j = (1/N) * sum_k |x'_kj - x_j| / range_j`.
//! Aggregation over factuals averages the per-instance values; the
//! per-instance `phi` spread is reported as a population standard deviation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cfgen::CounterfactualSet;
use crate::dataset::{FeatureKind, Schema};
use crate::stats::{mean, population_std, unit_ratio_to_f64};
use crate::{Error, Result};

/// Threshold used when none is given.
pub const DEFAULT_TAU: f64 = 0.05;

/// Per-feature change thresholds, as fractions of each feature's range.
/// Entries for discrete features are carried but never consulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    pub fn uniform(n_features: usize, tau: f64) -> Self {
        ThresholdVector(vec![tau; n_features])
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidThreshold(bad));
        }
        Ok(ThresholdVector(values))
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The common value if every entry is equal.
    pub fn as_uniform(&self) -> Option<f64> {
        let first = *self.0.first()?;
        self.0.iter().all(|&t| t == first).then_some(first)
    }

    fn validate(&self) -> Result<()> {
        match self.0.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            Some(&bad) => Err(Error::InvalidThreshold(bad)),
            None => Ok(()),
        }
    }
}

/// Whether a feature counts as changed between factual value `orig` and
/// counterfactual value `cf`.
pub fn indicator(orig: f64, cf: f64, kind: FeatureKind, tau: f64, range: f64) -> Result<bool> {
    if kind.is_discrete() {
        return Ok(cf != orig);
    }
    if range <= 0.0 || !range.is_finite() {
        return Err(Error::ZeroRange(String::from("<continuous>")));
    }
    Ok(libm::fabs(cf - orig) / range > tau)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceFrequencies {
    pub instance_index: usize,
    pub phi: Vec<f64>,
    /// `Some` for continuous features.
    pub mu: Vec<Option<f64>>,
    /// Raw change counts `c_j`; `phi_j = counts[j] / n_cf`.
    pub counts: Vec<u64>,
    pub n_cf: usize,
    pub tau: ThresholdVector,
    pub generator_name: String,
}

pub fn instance_frequencies(
    cs: &CounterfactualSet,
    schema: &Schema,
    tau: &ThresholdVector,
) -> Result<InstanceFrequencies> {
    if cs.is_empty() {
        return Err(Error::EmptyCounterfactuals);
    }
    schema.check_len(tau.len())?;
    tau.validate()?;
    let factual = cs.factual();
    schema.check_len(factual.len())?;
    let d = schema.len();
    let n = cs.len();
    let mut counts = vec![0u64; d];
    let mut mags = vec![0.0f64; d];
    for cf in cs.counterfactuals() {
        schema.check_len(cf.len())?;
        for (j, f) in schema.features.iter().enumerate() {
            if f.immutable {
                continue;
            }
            let (a, b) = (factual[j], cf[j]);
            if !f.kind.is_discrete() {
                let range = f.range();
                if range <= 0.0 {
                    return Err(Error::ZeroRange(f.name.clone()));
                }
                mags[j] += libm::fabs(b - a) / range;
            }
            if indicator(a, b, f.kind, tau.get(j), f.range())? {
                counts[j] += 1;
            }
        }
    }
    let phi = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let mu = schema
        .features
        .iter()
        .zip(&mags)
        .map(|(f, &m)| (!f.kind.is_discrete()).then(|| m / n as f64))
        .collect();
    Ok(InstanceFrequencies {
        instance_index: 0,
        phi,
        mu,
        counts,
        n_cf: n,
        tau: tau.clone(),
        generator_name: String::from(cs.generator_name()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScore {
    pub name: String,
    pub kind: FeatureKind,
    pub phi_mean: f64,
    pub phi_std: f64,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlexResult {
    pub features: Vec<FeatureScore>,
    pub n_instances: usize,
    pub tau: ThresholdVector,
    pub generator_name: String,
}

impl FlexResult {
    pub fn phi(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.phi_mean).collect()
    }

    /// Feature indices by descending `phi_mean`, ties in schema order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by(|&a, &b| {
            self.features[b]
                .phi_mean
                .total_cmp(&self.features[a].phi_mean)
                .then(a.cmp(&b))
        });
        idx
    }
}

/// Mean of per-instance change fractions, `(1/n) * sum_i c_i / N_i`,
/// computed over exact integers and rounded once. Falls back to a float
/// mean if the common denominator outgrows 126 bits.
fn exact_mean_fraction(counts: &[(u64, u64)]) -> f64 {
    fn gcd(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    let exact = || -> Option<f64> {
        let mut lcm: u128 = 1;
        for &(_, n) in counts {
            let n = n as u128;
            lcm = lcm.checked_mul(n / gcd(lcm, n))?;
        }
        let mut num: u128 = 0;
        for &(c, n) in counts {
            num = num.checked_add((c as u128).checked_mul(lcm / n as u128)?)?;
        }
        let den = lcm.checked_mul(counts.len() as u128)?;
        (den < 1 << 126 && num <= den).then(|| unit_ratio_to_f64(num, den))
    };
    exact().unwrap_or_else(|| counts.iter().map(|&(c, n)| c as f64 / n as f64).sum::<f64>() / counts.len() as f64)
}

pub fn aggregate(schema: &Schema, per_instance: &[InstanceFrequencies]) -> Result<FlexResult> {
    let first = per_instance.first().ok_or(Error::EmptyInput("per-instance frequencies"))?;
    if per_instance.iter().any(|p| p.tau != first.tau) {
        return Err(Error::MixedThresholds);
    }
    for p in per_instance {
        schema.check_len(p.phi.len())?;
    }
    let mut features = Vec::with_capacity(schema.len());
    let mut column = Vec::with_capacity(per_instance.len());
    for (j, f) in schema.features.iter().enumerate() {
        let counts: Vec<(u64, u64)> = per_instance.iter().map(|p| (p.counts[j], p.n_cf as u64)).collect();
        column.clear();
        column.extend(per_instance.iter().map(|p| p.phi[j]));
        let mu = (!f.kind.is_discrete()).then(|| {
            let mus: Vec<f64> = per_instance.iter().map(|p| p.mu[j].unwrap_or(0.0)).collect();
            mean(&mus)
        });
        features.push(FeatureScore {
            name: f.name.clone(),
            kind: f.kind,
            phi_mean: exact_mean_fraction(&counts),
            phi_std: population_std(&column),
            mu,
        });
    }
    let generator_name = if per_instance.iter().all(|p| p.generator_name == first.generator_name) {
        first.generator_name.clone()
    } else {
        String::from("mixed")
    };
    Ok(FlexResult {
        features,
        n_instances: per_instance.len(),
        tau: first.tau.clone(),
        generator_name,
    })
}

/// Per-instance frequencies for every set, then their aggregate.
pub fn score(cfsets: &[CounterfactualSet], schema: &Schema, tau: &ThresholdVector) -> Result<FlexResult> {
    let per = cfsets
        .iter()
        .enumerate()
        .map(|(i, cs)| {
            instance_frequencies(cs, schema, tau).map(|mut f| {
                f.instance_index = i;
                f
            })
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(schema, &per)
}

/// Score the same counterfactual sets under each uniform threshold in
/// `taus` (ascending).
pub fn tau_sweep(cfsets: &[CounterfactualSet], schema: &Schema, taus: &[f64]) -> Result<Vec<(f64, FlexResult)>> {
    if taus.is_empty() {
        return Err(Error::EmptyInput("threshold list"));
    }
    if taus.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::UnsortedThresholds);
    }
    taus.iter()
        .map(|&t| {
            let tv = ThresholdVector::from_values(vec![t; schema.len()])?;
            score(cfsets, schema, &tv).map(|r| (t, r))
        })
        .collect()
}
