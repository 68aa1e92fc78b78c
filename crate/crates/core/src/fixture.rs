//! Synthetic datasets whose label is a planted rule over a known subset of
//! features, so ground-truth relevance is known by construction.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Class, Dataset, FeatureKind, FeatureSchema, Instance, Schema};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureFeature {
    pub name: String,
    pub kind: FeatureKind,
    /// Number of categories for discrete features.
    #[serde(default)]
    pub n_categories: usize,
    /// Optional category names; generated as `<name>_<code>` otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Uniform sampling range for continuous features.
    #[serde(default = "unit_range")]
    pub range: (f64, f64),
    #[serde(default)]
    pub immutable: bool,
}

fn unit_range() -> (f64, f64) {
    (0.0, 1.0)
}

impl FixtureFeature {
    pub fn continuous(name: &str, lo: f64, hi: f64) -> Self {
        FixtureFeature {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            n_categories: 0,
            categories: Vec::new(),
            range: (lo, hi),
            immutable: false,
        }
    }

    pub fn categorical(name: &str, n_categories: usize) -> Self {
        FixtureFeature {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
            n_categories,
            categories: Vec::new(),
            range: unit_range(),
            immutable: false,
        }
    }

    pub fn ordinal(name: &str, n_categories: usize) -> Self {
        FixtureFeature {
            kind: FeatureKind::Ordinal,
            ..Self::categorical(name, n_categories)
        }
    }

    pub fn immutable(mut self) -> Self {
        self.immutable = true;
        self
    }

    pub fn named(mut self, categories: &[&str]) -> Self {
        self.n_categories = categories.len();
        self.categories = categories.iter().map(|s| s.to_string()).collect();
        self
    }

    fn schema(&self) -> FeatureSchema {
        let f = match self.kind {
            FeatureKind::Continuous => FeatureSchema::continuous(&*self.name, self.range.0, self.range.1),
            kind => {
                let cats = if self.categories.is_empty() {
                    (0..self.n_categories).map(|c| format!("{}_{c}", self.name)).collect()
                } else {
                    self.categories.clone()
                };
                let mut f = FeatureSchema::categorical(&*self.name, cats);
                f.kind = kind;
                f
            }
        };
        f.with_immutable(self.immutable)
    }
}

/// One clause of a planted rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Condition {
    Above { feature: usize, threshold: f64 },
    Below { feature: usize, threshold: f64 },
    InCategories { feature: usize, codes: Vec<u32> },
}

impl Condition {
    pub fn feature(&self) -> usize {
        match self {
            Condition::Above { feature, .. }
            | Condition::Below { feature, .. }
            | Condition::InCategories { feature, .. } => *feature,
        }
    }

    fn holds(&self, x: &[f64]) -> bool {
        match self {
            Condition::Above { feature, threshold } => x[*feature] > *threshold,
            Condition::Below { feature, threshold } => x[*feature] < *threshold,
            Condition::InCategories { feature, codes } => codes.contains(&(x[*feature] as u32)),
        }
    }
}

/// Label is 1 (undesirable) iff every condition holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRule {
    pub conditions: Vec<Condition>,
}

impl PlantedRule {
    pub fn label(&self, x: &[f64]) -> Class {
        if self.conditions.iter().all(|c| c.holds(x)) {
            Class::Undesirable
        } else {
            Class::Desirable
        }
    }

    /// Indices of the features the rule reads.
    pub fn relevant_features(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.conditions.iter().map(Condition::feature).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub n_rows: usize,
    pub features: Vec<FixtureFeature>,
    pub rule: PlantedRule,
    /// Probability of flipping each generated label.
    #[serde(default)]
    pub label_noise: f64,
    #[serde(default = "default_label")]
    pub label: String,
}

fn default_label() -> String {
    "label".to_string()
}

const ACCIDENT_FEATURES: [(&str, usize, bool); 11] = [
    ("Age_band_of_driver", 5, true),
    ("Sex_of_driver", 3, false),
    ("Driving_experience", 7, true),
    ("Types_of_Junction", 8, false),
    ("Road_surface_type", 6, false),
    ("Light_conditions", 4, false),
    ("Weather_conditions", 9, false),
    ("Type_of_collision", 10, false),
    ("Vehicle_movement", 13, false),
    ("Pedestrian_movement", 9, false),
    ("Cause_of_accident", 20, false),
];

impl FixtureSpec {
    /// Two continuous features on `[0, 1]`; label = 1 iff `x0 > 0.5`.
    pub fn planted_threshold(n_rows: usize) -> Self {
        FixtureSpec {
            n_rows,
            features: vec![
                FixtureFeature::continuous("x0", 0.0, 1.0),
                FixtureFeature::continuous("x1", 0.0, 1.0),
            ],
            rule: PlantedRule {
                conditions: vec![Condition::Above {
                    feature: 0,
                    threshold: 0.5,
                }],
            },
            label_noise: 0.0,
            label: default_label(),
        }
    }

    /// Mixed schema: the planted continuous `x0` (label = 1 iff `x0 > 0.5`),
    /// an inert continuous feature, an inert categorical feature and an
    /// inert immutable categorical feature.
    pub fn planted_mixed(n_rows: usize) -> Self {
        FixtureSpec {
            n_rows,
            features: vec![
                FixtureFeature::continuous("x0", 0.0, 1.0),
                FixtureFeature::continuous("x1", 0.0, 10.0),
                FixtureFeature::categorical("colour", 4),
                FixtureFeature::categorical("group", 3).immutable(),
            ],
            ..Self::planted_threshold(n_rows)
        }
    }

    /// Eleven categorical features with the category counts of a road
    /// accident severity table. Age band and driving experience are ordinal,
    /// age band and sex are immutable. Label = 1 iff the vehicle movement
    /// code is below 7 and the collision type code is below 6.
    pub fn accident_shaped(n_rows: usize) -> Self {
        let features = ACCIDENT_FEATURES
            .iter()
            .enumerate()
            .map(|(j, &(name, k, ordinal))| {
                let f = if ordinal {
                    FixtureFeature::ordinal(name, k)
                } else {
                    FixtureFeature::categorical(name, k)
                };
                if j < 2 {
                    f.immutable()
                } else {
                    f
                }
            })
            .collect();
        FixtureSpec {
            n_rows,
            features,
            rule: PlantedRule {
                conditions: vec![
                    Condition::InCategories {
                        feature: 8,
                        codes: (0..7).collect(),
                    },
                    Condition::InCategories {
                        feature: 7,
                        codes: (0..6).collect(),
                    },
                ],
            },
            label_noise: 0.0,
            label: "Accident_severity".to_string(),
        }
    }

    /// Look up a named preset: `planted`, `planted-mixed` or `accident`.
    pub fn preset(name: &str, n_rows: usize) -> Option<Self> {
        match name {
            "planted" => Some(Self::planted_threshold(n_rows)),
            "planted-mixed" => Some(Self::planted_mixed(n_rows)),
            "accident" => Some(Self::accident_shaped(n_rows)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<Schema> {
        let bad = |m: String| Err(Error::InvalidFixture(m));
        if self.n_rows == 0 {
            return bad("n_rows must be positive".into());
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            return bad(format!("label_noise {} outside [0, 0.5]", self.label_noise));
        }
        if self.rule.conditions.is_empty() {
            return bad("planted rule has no conditions".into());
        }
        for c in &self.rule.conditions {
            let j = c.feature();
            let Some(f) = self.features.get(j) else {
                return bad(format!(
                    "planted rule references feature {j} but only {} are declared",
                    self.features.len()
                ));
            };
            match (c, f.kind.is_discrete()) {
                (Condition::InCategories { codes, .. }, true) => {
                    if let Some(code) = codes.iter().find(|&&c| c as usize >= f.n_categories) {
                        return bad(format!("code {code} out of range for `{}`", f.name));
                    }
                }
                (Condition::InCategories { .. }, false) => {
                    return bad(format!("category condition on continuous `{}`", f.name))
                }
                (_, true) => return bad(format!("threshold condition on discrete `{}`", f.name)),
                (_, false) => {}
            }
        }
        for f in &self.features {
            if f.kind.is_discrete() && !f.categories.is_empty() && f.categories.len() != f.n_categories {
                return bad(format!("`{}` declares {} names for {} categories", f.name, f.categories.len(), f.n_categories));
            }
        }
        let schema = Schema::new(self.features.iter().map(FixtureFeature::schema).collect(), &*self.label)?;
        Ok(schema)
    }

    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        let schema = self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(self.n_rows);
        let mut labels = Vec::with_capacity(self.n_rows);
        for _ in 0..self.n_rows {
            let values: Vec<f64> = self
                .features
                .iter()
                .map(|f| {
                    if f.kind.is_discrete() {
                        rng.random_range(0..f.n_categories) as f64
                    } else {
                        rng.random_range(f.range.0..=f.range.1)
                    }
                })
                .collect();
            let mut label = self.rule.label(&values);
            if self.label_noise > 0.0 && rng.random_bool(self.label_noise) {
                label = label.opposite();
            }
            rows.push(Instance::new(values));
            labels.push(label);
        }
        Dataset::new(Arc::new(schema), rows, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_threshold_label_depends_only_on_x0() {
        let ds = FixtureSpec::planted_threshold(200).generate(7).unwrap();
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.n_features(), 2);
        for (x, &y) in ds.rows().iter().zip(ds.labels()) {
            assert_eq!(y == Class::Undesirable, x[0] > 0.5);
        }
        assert!(ds.count_class(Class::Undesirable) > 50);
    }

    #[test]
    fn accident_shape() {
        let spec = FixtureSpec::accident_shaped(500);
        let ds = spec.generate(1).unwrap();
        assert_eq!(ds.n_features(), 11);
        let counts: Vec<usize> = ds.schema().features.iter().map(|f| f.n_categories()).collect();
        assert_eq!(counts, [5, 3, 7, 8, 6, 4, 9, 10, 13, 9, 20]);
        assert!(ds.schema().features.iter().all(|f| f.kind.is_discrete()));
        let rate = ds.count_class(Class::Undesirable) as f64 / ds.len() as f64;
        assert!((0.2..0.45).contains(&rate), "class-1 rate {rate}");
    }

    #[test]
    fn rule_on_undeclared_feature_is_rejected() {
        let mut spec = FixtureSpec::planted_threshold(10);
        spec.features.push(FixtureFeature::continuous("x2", 0.0, 1.0));
        spec.rule.conditions = vec![Condition::Above {
            feature: 99,
            threshold: 0.5,
        }];
        assert!(matches!(spec.generate(0), Err(Error::InvalidFixture(_))));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = FixtureSpec::planted_mixed(50);
        assert_eq!(spec.generate(5).unwrap(), spec.generate(5).unwrap());
        assert_ne!(spec.generate(5).unwrap(), spec.generate(6).unwrap());
    }
}
