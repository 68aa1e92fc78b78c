//! Feature schemas, encoded instances and datasets.
//!
//! Every feature value is stored as an `f64`. Categorical and ordinal
//! features hold the integer code of their category (an index into the
//! schema vocabulary); continuous features hold the raw value.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::Deref;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Categorical,
    Ordinal,
    Continuous,
}

impl FeatureKind {
    /// Categorical and ordinal features are compared by exact code equality.
    pub fn is_discrete(self) -> bool {
        !matches!(self, FeatureKind::Continuous)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Categorical => "categorical",
            FeatureKind::Ordinal => "ordinal",
            FeatureKind::Continuous => "continuous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    /// Category vocabulary in code order (discrete features only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Value range in feature units (continuous features only).
    #[serde(default)]
    pub range_min: f64,
    #[serde(default)]
    pub range_max: f64,
    #[serde(default)]
    pub immutable: bool,
}

impl FeatureSchema {
    pub fn categorical<S: Into<String>>(name: S, categories: Vec<String>) -> Self {
        Self::discrete(name, FeatureKind::Categorical, categories)
    }

    pub fn ordinal<S: Into<String>>(name: S, categories: Vec<String>) -> Self {
        Self::discrete(name, FeatureKind::Ordinal, categories)
    }

    fn discrete<S: Into<String>>(name: S, kind: FeatureKind, categories: Vec<String>) -> Self {
        FeatureSchema {
            name: name.into(),
            kind,
            categories,
            range_min: 0.0,
            range_max: 0.0,
            immutable: false,
        }
    }

    pub fn continuous<S: Into<String>>(name: S, range_min: f64, range_max: f64) -> Self {
        FeatureSchema {
            name: name.into(),
            kind: FeatureKind::Continuous,
            categories: Vec::new(),
            range_min,
            range_max,
            immutable: false,
        }
    }

    pub fn with_immutable(mut self, immutable: bool) -> Self {
        self.immutable = immutable;
        self
    }

    /// `range_max - range_min` for continuous features.
    pub fn range(&self) -> f64 {
        self.range_max - self.range_min
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidSchema {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if self.kind.is_discrete() {
            if self.categories.len() < 2 {
                return fail("needs at least 2 categories");
            }
            for (i, c) in self.categories.iter().enumerate() {
                if self.categories[..i].contains(c) {
                    return Err(Error::InvalidSchema {
                        name: self.name.clone(),
                        reason: format!("duplicate category `{c}`"),
                    });
                }
            }
        } else if !(self.range_min.is_finite() && self.range_max.is_finite()) {
            return fail("range must be finite");
        } else if self.range_max <= self.range_min {
            return Err(Error::ZeroRange(self.name.clone()));
        }
        Ok(())
    }

    /// Whether `value` is a legal encoded value for this feature.
    pub fn accepts(&self, value: f64) -> bool {
        if self.kind.is_discrete() {
            value >= 0.0 && libm::trunc(value) == value && (value as usize) < self.categories.len()
        } else {
            value.is_finite() && value >= self.range_min && value <= self.range_max
        }
    }

    pub fn code_of(&self, category: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == category)
    }

    /// Encode one textual cell.
    pub fn encode(&self, text: &str) -> Result<f64> {
        let text = text.trim();
        if self.kind.is_discrete() {
            self.code_of(text).map(|c| c as f64).ok_or_else(|| Error::InvalidSchema {
                name: self.name.clone(),
                reason: format!("unknown category `{text}`"),
            })
        } else {
            text.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidSchema {
                    name: self.name.clone(),
                    reason: format!("unparsable value `{text}`"),
                })
        }
    }

    /// Decode an encoded value back to text. Continuous values use the
    /// shortest representation that parses back to the same `f64`.
    pub fn decode(&self, value: f64) -> String {
        if self.kind.is_discrete() {
            self.categories
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| format!("<code {value}>"))
        } else {
            format!("{value}")
        }
    }
}

/// Ordered feature schemas plus the label column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureSchema>,
    pub label: String,
}

impl Schema {
    pub fn new(features: Vec<FeatureSchema>, label: impl Into<String>) -> Result<Self> {
        for (i, f) in features.iter().enumerate() {
            f.validate()?;
            if features[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::InvalidSchema {
                    name: f.name.clone(),
                    reason: "duplicate feature name".to_string(),
                });
            }
        }
        Ok(Schema {
            features,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, j: usize) -> &FeatureSchema {
        &self.features[j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn has_continuous(&self) -> bool {
        self.features.iter().any(|f| !f.kind.is_discrete())
    }

    pub fn mutable_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| !self.features[j].immutable).collect()
    }

    pub fn check_len(&self, found: usize) -> Result<()> {
        if found == self.len() {
            Ok(())
        } else {
            Err(Error::SchemaMismatch {
                expected: self.len(),
                found,
            })
        }
    }

    /// Validate a full row of encoded values; `row` is used in the error.
    pub fn check_values(&self, row: usize, values: &[f64]) -> Result<()> {
        self.check_len(values.len())?;
        for (f, &v) in self.features.iter().zip(values) {
            if !f.accepts(v) {
                return Err(Error::InvalidRow {
                    row,
                    reason: format!("value {v} is not valid for feature `{}`", f.name),
                });
            }
        }
        Ok(())
    }
}

/// Binary class. `Undesirable` (label 1) marks factual instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Class {
    Desirable,
    Undesirable,
}

impl Class {
    pub fn as_u8(self) -> u8 {
        match self {
            Class::Desirable => 0,
            Class::Undesirable => 1,
        }
    }

    pub fn opposite(self) -> Class {
        match self {
            Class::Desirable => Class::Undesirable,
            Class::Undesirable => Class::Desirable,
        }
    }
}

impl From<Class> for u8 {
    fn from(c: Class) -> u8 {
        c.as_u8()
    }
}

impl TryFrom<u8> for Class {
    type Error = &'static str;

    fn try_from(v: u8) -> core::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(Class::Desirable),
            1 => Ok(Class::Undesirable),
            _ => Err("class must be 0 or 1"),
        }
    }
}

/// One encoded row, aligned to schema order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Instance(Vec<f64>);

impl Instance {
    pub fn new(values: Vec<f64>) -> Self {
        Instance(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn set(&mut self, j: usize, value: f64) {
        self.0[j] = value;
    }

    /// Bit pattern of every value; used for exact-equality deduplication.
    pub fn bit_key(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }
}

impl Deref for Instance {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Instance {
    fn from(v: Vec<f64>) -> Self {
        Instance(v)
    }
}

/// Encoded rows with their labels. Immutable once built; subsets and splits
/// share the parent's schema through an `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    rows: Vec<Instance>,
    labels: Vec<Class>,
}

impl Dataset {
    pub fn new(schema: Arc<Schema>, rows: Vec<Instance>, labels: Vec<Class>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidRow {
                row: rows.len().min(labels.len()),
                reason: format!("{} rows but {} labels", rows.len(), labels.len()),
            });
        }
        for (i, r) in rows.iter().enumerate() {
            schema.check_values(i, r)?;
        }
        Ok(Dataset {
            schema,
            rows,
            labels,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn rows(&self) -> &[Instance] {
        &self.rows
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &Instance {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> Class {
        self.labels[i]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    /// Rows at `indices` in the given order, sharing this schema.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn count_class(&self, class: Class) -> usize {
        self.labels.iter().filter(|&&c| c == class).count()
    }

    /// Decode row `i` back to text cells in schema order.
    pub fn decode_row(&self, i: usize) -> Vec<String> {
        self.schema
            .features
            .iter()
            .zip(self.rows[i].values())
            .map(|(f, &v)| f.decode(v))
            .collect()
    }
}

/// Seeded shuffle, then the first `floor(n * train_fraction)` rows become
/// the training part and the remainder the test part.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidFraction(train_fraction));
    }
    let n = ds.len();
    let n_train = libm::floor(n as f64 * train_fraction) as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::EmptySplit {
            train: n_train,
            test: n - n_train,
        });
    }
    let order = shuffled_indices(n, seed);
    Ok((ds.subset(&order[..n_train]), ds.subset(&order[n_train..])))
}

/// Unstratified k-fold partition of a seeded shuffle: returns
/// `(train_indices, test_indices)` per fold.
pub fn kfold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidConfig(format!(
            "fold count {folds} must lie in 2..={n}"
        )));
    }
    let order = shuffled_indices(n, seed);
    let mut out = Vec::with_capacity(folds);
    for f in 0..folds {
        let lo = f * n / folds;
        let hi = (f + 1) * n / folds;
        let test = order[lo..hi].to_vec();
        let train = order[..lo].iter().chain(&order[hi..]).copied().collect();
        out.push((train, test));
    }
    Ok(out)
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cats(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn tiny(n: usize) -> Dataset {
        let schema = Schema::new(vec![FeatureSchema::continuous("x", 0.0, 1.0)], "y").unwrap();
        let rows = (0..n).map(|i| Instance::new(vec![i as f64 / n as f64])).collect();
        let labels = (0..n)
            .map(|i| if i % 2 == 0 { Class::Desirable } else { Class::Undesirable })
            .collect();
        Dataset::new(Arc::new(schema), rows, labels).unwrap()
    }

    #[test]
    fn schema_rejects_degenerate_features() {
        assert!(FeatureSchema::categorical("c", cats(&["a"])).validate().is_err());
        assert!(FeatureSchema::categorical("c", cats(&["a", "a"])).validate().is_err());
        assert_eq!(
            FeatureSchema::continuous("x", 1.0, 1.0).validate(),
            Err(Error::ZeroRange("x".into()))
        );
        assert!(FeatureSchema::ordinal("o", cats(&["lo", "hi"])).validate().is_ok());
    }

    #[test]
    fn encode_decode_round_trip() {
        let f = FeatureSchema::categorical("color", cats(&["red", "blue"]));
        assert_eq!(f.encode("blue").unwrap(), 1.0);
        assert_eq!(f.decode(1.0), "blue");
        assert!(f.encode("green").is_err());
        let g = FeatureSchema::continuous("x", 0.0, 10.0);
        assert_eq!(g.decode(g.encode("2.5").unwrap()), "2.5");
        assert!(g.encode("abc").is_err());
    }

    #[test]
    fn dataset_rejects_invalid_codes() {
        let schema = Arc::new(
            Schema::new(vec![FeatureSchema::categorical("c", cats(&["a", "b"]))], "y").unwrap(),
        );
        let bad = Dataset::new(schema.clone(), vec![Instance::new(vec![2.0])], vec![Class::Desirable]);
        assert!(matches!(bad, Err(Error::InvalidRow { row: 0, .. })));
        let mismatched = Dataset::new(schema, vec![Instance::new(vec![0.0])], vec![]);
        assert!(mismatched.is_err());
    }

    #[test]
    fn split_sizes_follow_floor() {
        let ds = tiny(10);
        let (tr, te) = split(&ds, 0.8, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert!(Arc::ptr_eq(tr.schema_arc(), ds.schema_arc()));
        assert!(Arc::ptr_eq(te.schema_arc(), ds.schema_arc()));
    }

    #[test]
    fn split_is_deterministic() {
        let ds = tiny(37);
        let a = split(&ds, 0.7, 42).unwrap();
        let b = split(&ds, 0.7, 42).unwrap();
        assert_eq!(a, b);
        let c = split(&ds, 0.7, 43).unwrap();
        assert_ne!(a.0.rows(), c.0.rows());
    }

    #[test]
    fn split_rejects_empty_side_and_bad_fraction() {
        let ds = tiny(1);
        assert_eq!(split(&ds, 0.8, 1), Err(Error::EmptySplit { train: 0, test: 1 }));
        let ds = tiny(10);
        assert_eq!(split(&ds, 1.0, 1), Err(Error::InvalidFraction(1.0)));
        assert_eq!(split(&ds, 0.0, 1), Err(Error::InvalidFraction(0.0)));
    }

    #[test]
    fn kfold_covers_every_row_once() {
        let folds = kfold_indices(23, 5, 9).unwrap();
        let mut seen: Vec<usize> = folds.iter().flat_map(|(_, t)| t.clone()).collect();
        seen.sort();
        assert_eq!(seen, (0..23).collect::<Vec<_>>());
        for (tr, te) in &folds {
            assert_eq!(tr.len() + te.len(), 23);
        }
    }
}
