//! Pooled change-count importance with an absolute tolerance: every
//! counterfactual of every factual is pooled, a continuous feature counts
//! as changed when `|x'_kj - x_j| > epsilon` in raw units, and counts are
//! divided by the total number of counterfactuals.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::cfgen::CounterfactualSet;
use crate::dataset::{FeatureKind, Schema};
use crate::flex::{score, FlexResult, ThresholdVector};
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiceScore {
    pub name: String,
    pub kind: FeatureKind,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiceResult {
    pub features: Vec<DiceScore>,
    pub epsilon: f64,
    pub n_total_cf: usize,
    pub generator_name: String,
}

impl DiceResult {
    pub fn phi(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.phi).collect()
    }
}

pub fn dice_importance(cfsets: &[CounterfactualSet], schema: &Schema, epsilon: f64) -> Result<DiceResult> {
    if cfsets.is_empty() {
        return Err(Error::EmptyInput("counterfactual sets"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let mut counts = vec![0u64; schema.len()];
    let mut total = 0usize;
    for cs in cfsets {
        let x = cs.factual();
        schema.check_len(x.len())?;
        for cf in cs.counterfactuals() {
            schema.check_len(cf.len())?;
            total += 1;
            for (j, f) in schema.features.iter().enumerate() {
                let changed = if f.kind.is_discrete() {
                    cf[j] != x[j]
                } else {
                    libm::fabs(cf[j] - x[j]) > epsilon
                };
                if changed {
                    counts[j] += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyCounterfactuals);
    }
    let first = cfsets[0].generator_name();
    let generator_name = if cfsets.iter().all(|c| c.generator_name() == first) {
        String::from(first)
    } else {
        String::from("mixed")
    };
    Ok(DiceResult {
        features: schema
            .features
            .iter()
            .zip(&counts)
            .map(|(f, &c)| DiceScore {
                name: f.name.clone(),
                kind: f.kind,
                phi: c as f64 / total as f64,
            })
            .collect(),
        epsilon,
        n_total_cf: total,
        generator_name,
    })
}

/// Thresholds that make the range-relative test reproduce the absolute
/// tolerance: `tau_j = epsilon / range_j` (capped at 1).
pub fn matched_thresholds(schema: &Schema, epsilon: f64) -> Result<ThresholdVector> {
    ThresholdVector::from_values(
        schema
            .features
            .iter()
            .map(|f| if f.kind.is_discrete() { 0.0 } else { (epsilon / f.range()).min(1.0) })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureDiff {
    pub feature: String,
    pub flex: f64,
    pub dice: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// Every feature scores identically under both methods.
    pub holds: bool,
    /// Every factual has the same number of counterfactuals.
    pub equal_n_cf: bool,
    pub mismatches: Vec<FeatureDiff>,
    pub notes: Vec<String>,
    pub flex: FlexResult,
    pub dice: DiceResult,
}

/// Score with both methods, FLEX using `tau_j = epsilon / range_j`, and
/// report per-feature differences. With equal counterfactual counts per
/// factual the two agree exactly; otherwise per-instance averaging and
/// pooled counting can diverge.
pub fn equivalence_check(cfsets: &[CounterfactualSet], schema: &Schema, epsilon: f64) -> Result<EquivalenceReport> {
    let dice = dice_importance(cfsets, schema, epsilon)?;
    let flex = score(cfsets, schema, &matched_thresholds(schema, epsilon)?)?;
    let equal_n_cf = cfsets.windows(2).all(|w| w[0].len() == w[1].len());
    let mismatches: Vec<FeatureDiff> = flex
        .features
        .iter()
        .zip(&dice.features)
        .filter(|(a, b)| a.phi_mean != b.phi)
        .map(|(a, b)| FeatureDiff {
            feature: a.name.clone(),
            flex: a.phi_mean,
            dice: b.phi,
        })
        .collect();
    let mut notes = Vec::new();
    if !equal_n_cf {
        let sizes: Vec<usize> = cfsets.iter().map(CounterfactualSet::len).collect();
        notes.push(format!(
            "unequal counterfactual counts per factual ({}..={}): per-instance averaging weights factuals equally, pooled counting weights counterfactuals equally",
            sizes.iter().min().unwrap_or(&0),
            sizes.iter().max().unwrap_or(&0)
        ));
    }
    if schema.features.iter().any(|f| f.immutable) {
        notes.push(String::from("immutable features are never counted by either method"));
    }
    Ok(EquivalenceReport {
        holds: mismatches.is_empty(),
        equal_n_cf,
        mismatches,
        notes,
        flex,
        dice,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureSchema, Instance};

    fn schema() -> Schema {
        Schema::new(
            vec![
                FeatureSchema::categorical("c", vec!["a".into(), "b".into()]),
                FeatureSchema::continuous("x", 0.0, 10.0),
            ],
            "y",
        )
        .unwrap()
    }

    fn set(factual: [f64; 2], cfs: &[[f64; 2]]) -> CounterfactualSet {
        CounterfactualSet::new(
            Instance::new(factual.to_vec()),
            cfs.iter().map(|c| Instance::new(c.to_vec())).collect(),
            "manual",
            0,
            0,
        )
    }

    #[test]
    fn pooled_three_of_four() {
        let sets = [
            set([0.0, 1.0], &[[1.0, 1.0], [1.0, 1.0]]),
            set([0.0, 1.0], &[[1.0, 1.0], [0.0, 1.0]]),
        ];
        let r = dice_importance(&sets, &schema(), DEFAULT_EPSILON).unwrap();
        assert_eq!(r.features[0].phi, 0.75);
        assert_eq!(r.features[1].phi, 0.0);
        assert_eq!(r.n_total_cf, 4);
    }

    #[test]
    fn tolerance_is_absolute() {
        let sets = [set([0.0, 1.0], &[[0.0, 1.0 + 5e-7], [0.0, 1.0 + 2e-6]])];
        let r = dice_importance(&sets, &schema(), 1e-6).unwrap();
        assert_eq!(r.features[1].phi, 0.5);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(dice_importance(&[], &schema(), 1e-6).is_err());
        let sets = [set([0.0, 1.0], &[[1.0, 1.0]])];
        assert_eq!(dice_importance(&sets, &schema(), 0.0), Err(Error::InvalidEpsilon(0.0)));
        let empty = [set([0.0, 1.0], &[])];
        assert_eq!(dice_importance(&empty, &schema(), 1e-6), Err(Error::EmptyCounterfactuals));
    }

    #[test]
    fn unequal_counts_diverge() {
        // instance A: 1 of 1 changed; instance B: 0 of 3 changed
        let sets = [
            set([0.0, 1.0], &[[1.0, 1.0]]),
            set([0.0, 1.0], &[[0.0, 2.0], [0.0, 3.0], [0.0, 4.0]]),
        ];
        let rep = equivalence_check(&sets, &schema(), DEFAULT_EPSILON).unwrap();
        assert!(!rep.holds);
        assert!(!rep.equal_n_cf);
        assert_eq!(rep.dice.features[0].phi, 0.25);
        assert_eq!(rep.flex.features[0].phi_mean, 0.5);
        // x: per-instance mean of 0/1 and 3/3 = 0.5, pooled 3/4
        assert_eq!(rep.mismatches.len(), 2);
        assert_eq!(rep.mismatches[0].feature, "c");
        assert_eq!((rep.mismatches[1].flex, rep.mismatches[1].dice), (0.5, 0.75));
    }

    #[test]
    fn equal_counts_agree() {
        let sets = [
            set([0.0, 1.0], &[[1.0, 1.0], [0.0, 1.0 + 1e-7], [1.0, 9.0]]),
            set([1.0, 5.0], &[[1.0, 5.5], [0.0, 5.0], [0.0, 4.0]]),
        ];
        let rep = equivalence_check(&sets, &schema(), DEFAULT_EPSILON).unwrap();
        assert!(rep.holds, "{:?}", rep.mismatches);
        assert!(rep.equal_n_cf);
    }
}
