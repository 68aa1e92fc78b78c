//! Rankings of feature scores and rank comparison across methods.
//!
//! Ranks follow competition ("1224") ranking: equal scores share the
//! lowest rank of their group and the next distinct score skips ahead, so
//! three features tied at rank 4 are followed by rank 7.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::baseline::DiceResult;
use crate::flex::{FlexResult, ThresholdVector};
use crate::stats::{spearman, Pearson};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow {
    pub rank: usize,
    pub feature: String,
    /// Position of the feature in the schema.
    pub index: usize,
    pub score: f64,
    pub std: Option<f64>,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RankingMeta {
    pub tau: Option<ThresholdVector>,
    pub epsilon: Option<f64>,
    pub generator: String,
    pub seed: Option<u64>,
    pub dataset_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingTable {
    pub method: String,
    /// Sorted by rank, ties in schema order.
    pub rows: Vec<RankRow>,
    pub metadata: RankingMeta,
}

impl RankingTable {
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.rows.iter().find(|r| r.feature == feature).map(|r| r.rank)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.metadata.seed = Some(seed);
        self
    }

    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.metadata.dataset_fingerprint = Some(fingerprint.into());
        self
    }
}

/// Anything that yields one score per feature.
pub trait Scored {
    fn method(&self) -> &str;
    fn entries(&self) -> Vec<(String, f64, Option<f64>)>;
    fn metadata(&self) -> RankingMeta;
}

impl Scored for FlexResult {
    fn method(&self) -> &str {
        "flex"
    }

    fn entries(&self) -> Vec<(String, f64, Option<f64>)> {
        self.features
            .iter()
            .map(|f| (f.name.clone(), f.phi_mean, Some(f.phi_std)))
            .collect()
    }

    fn metadata(&self) -> RankingMeta {
        RankingMeta {
            tau: Some(self.tau.clone()),
            generator: self.generator_name.clone(),
            ..Default::default()
        }
    }
}

impl Scored for DiceResult {
    fn method(&self) -> &str {
        "dice"
    }

    fn entries(&self) -> Vec<(String, f64, Option<f64>)> {
        self.features.iter().map(|f| (f.name.clone(), f.phi, None)).collect()
    }

    fn metadata(&self) -> RankingMeta {
        RankingMeta {
            epsilon: Some(self.epsilon),
            generator: self.generator_name.clone(),
            ..Default::default()
        }
    }
}

/// Competition ranks for `scores` (largest first), aligned with the input.
pub fn competition_ranks(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = alloc::vec![0; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = if pos > 0 && scores[order[pos - 1]] == scores[i] {
            ranks[order[pos - 1]]
        } else {
            pos + 1
        };
    }
    ranks
}

pub fn rank<S: Scored + ?Sized>(result: &S) -> RankingTable {
    let entries = result.entries();
    let scores: Vec<f64> = entries.iter().map(|e| e.1).collect();
    let ranks = competition_ranks(&scores);
    let mut rows: Vec<RankRow> = entries
        .into_iter()
        .enumerate()
        .map(|(i, (feature, score, std))| RankRow {
            rank: ranks[i],
            feature,
            index: i,
            score,
            std,
            method: String::from(result.method()),
        })
        .collect();
    rows.sort_by(|a, b| a.rank.cmp(&b.rank).then(a.index.cmp(&b.index)));
    RankingTable {
        method: String::from(result.method()),
        rows,
        metadata: result.metadata(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparedFeature {
    pub feature: String,
    /// Rank under each table, in table order.
    pub ranks: Vec<usize>,
    /// `ranks[t] - ranks[0]`.
    pub deltas: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCorrelation {
    pub a: String,
    pub b: String,
    pub spearman: Pearson,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub methods: Vec<String>,
    pub features: Vec<ComparedFeature>,
    pub spearman: Vec<PairCorrelation>,
}

/// Align tables by feature name (in the first table's schema order) and
/// report rank deltas plus Spearman correlation for every pair of tables.
pub fn compare(tables: &[RankingTable]) -> Result<Comparison> {
    let first = tables.first().ok_or(Error::EmptyInput("ranking tables"))?;
    let mut names: Vec<(usize, &str)> = first.rows.iter().map(|r| (r.index, r.feature.as_str())).collect();
    names.sort();
    let mut scores: Vec<Vec<f64>> = Vec::with_capacity(tables.len());
    for t in tables {
        if t.rows.len() != names.len() {
            return Err(Error::FeatureMismatch(format!(
                "`{}` has {} features, `{}` has {}",
                first.method,
                names.len(),
                t.method,
                t.rows.len()
            )));
        }
        let mut s = Vec::with_capacity(names.len());
        for &(_, n) in &names {
            let row = t
                .rows
                .iter()
                .find(|r| r.feature == n)
                .ok_or_else(|| Error::FeatureMismatch(format!("`{}` lacks feature `{n}`", t.method)))?;
            s.push(row.score);
        }
        scores.push(s);
    }
    let features = names
        .iter()
        .map(|&(_, n)| {
            let ranks: Vec<usize> = tables.iter().map(|t| t.rank_of(n).unwrap_or(0)).collect();
            let deltas = ranks.iter().map(|&r| r as i64 - ranks[0] as i64).collect();
            ComparedFeature {
                feature: String::from(n),
                ranks,
                deltas,
            }
        })
        .collect();
    let mut pairs = Vec::new();
    for a in 0..tables.len() {
        for b in a + 1..tables.len() {
            pairs.push(PairCorrelation {
                a: tables[a].method.clone(),
                b: tables[b].method.clone(),
                spearman: spearman(&scores[a], &scores[b]),
            });
        }
    }
    Ok(Comparison {
        methods: tables.iter().map(|t| t.method.clone()).collect(),
        features,
        spearman: pairs,
    })
}
