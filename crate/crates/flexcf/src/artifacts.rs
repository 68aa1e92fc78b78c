//! Versioned JSON documents and their CSV mirrors.
//!
//! JSON keeps full float precision (shortest round-trip form); CSV carries
//! the same numbers plus a two-decimal display column. Field order is fixed
//! by struct declaration order, so identical inputs give identical bytes.

use std::fs;
use std::path::Path;

use flexcf_core::baseline::{DiceResult, EquivalenceReport, FeatureDiff};
use flexcf_core::cfgen::SkipRecord;
use flexcf_core::dataset::FeatureKind;
use flexcf_core::flex::{FeatureScore, FlexResult, ThresholdVector};
use flexcf_core::rank::{competition_ranks, ComparedFeature, Comparison, PairCorrelation};
use flexcf_core::regional::{CorrelationReport, ModeShiftReport, Region};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "flexcf-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// A document that can be written as JSON and, optionally, as CSV.
pub trait Artifact: Serialize {
    fn csv(&self) -> Option<String> {
        None
    }
}

pub fn to_json<T: Serialize + ?Sized>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

pub fn render<A: Artifact + ?Sized>(doc: &A, format: Format) -> Result<String> {
    match format {
        Format::Json => to_json(doc),
        Format::Csv => doc
            .csv()
            .ok_or_else(|| Error::Config("this document has no CSV form".into())),
    }
}

pub fn emit<A: Artifact + ?Sized>(doc: &A, path: &Path, format: Format) -> Result<()> {
    fs::write(path, render(doc, format)?).map_err(|e| Error::io(path, e))
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// A uniform threshold is written as a number, a per-feature one as a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauField {
    Uniform(f64),
    PerFeature(Vec<f64>),
}

impl TauField {
    pub fn of(tau: &ThresholdVector) -> Self {
        match tau.as_uniform() {
            Some(t) => TauField::Uniform(t),
            None => TauField::PerFeature(tau.values().to_vec()),
        }
    }

    fn to_vector(&self, n: usize) -> Result<ThresholdVector> {
        Ok(match self {
            TauField::Uniform(t) => ThresholdVector::from_values(vec![*t; n])?,
            TauField::PerFeature(v) => ThresholdVector::from_values(v.clone())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexFeatureRow {
    pub name: String,
    pub kind: FeatureKind,
    pub phi_mean: f64,
    pub phi_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub rank: usize,
}

/// A scored feature table, features in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexDoc {
    pub format: String,
    pub method: String,
    pub tau: TauField,
    pub generator: String,
    pub n_instances: usize,
    pub features: Vec<FlexFeatureRow>,
}

impl FlexDoc {
    pub fn new(result: &FlexResult) -> Self {
        let ranks = competition_ranks(&result.phi());
        FlexDoc {
            format: FORMAT.into(),
            method: "flex".into(),
            tau: TauField::of(&result.tau),
            generator: result.generator_name.clone(),
            n_instances: result.n_instances,
            features: result
                .features
                .iter()
                .zip(ranks)
                .map(|(f, rank)| FlexFeatureRow {
                    name: f.name.clone(),
                    kind: f.kind,
                    phi_mean: f.phi_mean,
                    phi_std: f.phi_std,
                    mu: f.mu,
                    rank,
                })
                .collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: FlexDoc = serde_json::from_str(&text)?;
        if doc.format != FORMAT || doc.method != "flex" {
            return Err(Error::Config(format!(
                "{}: not a flex result ({} / {})",
                path.display(),
                doc.format,
                doc.method
            )));
        }
        Ok(doc)
    }

    pub fn to_result(&self) -> Result<FlexResult> {
        Ok(FlexResult {
            features: self
                .features
                .iter()
                .map(|f| FeatureScore {
                    name: f.name.clone(),
                    kind: f.kind,
                    phi_mean: f.phi_mean,
                    phi_std: f.phi_std,
                    mu: f.mu,
                })
                .collect(),
            n_instances: self.n_instances,
            tau: self.tau.to_vector(self.features.len())?,
            generator_name: self.generator.clone(),
        })
    }
}

impl Artifact for FlexDoc {
    fn csv(&self) -> Option<String> {
        Some(csv_table(
            &["feature", "kind", "rank", "phi_mean", "phi_std", "mu", "display"],
            self.features.iter().map(|f| {
                vec![
                    f.name.clone(),
                    f.kind.as_str().into(),
                    f.rank.to_string(),
                    f.phi_mean.to_string(),
                    f.phi_std.to_string(),
                    opt(f.mu),
                    format!("{} ({:.2} ± {:.2})", f.rank, f.phi_mean, f.phi_std),
                ]
            }),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceFeatureRow {
    pub name: String,
    pub kind: FeatureKind,
    pub phi: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceDoc {
    pub format: String,
    pub method: String,
    pub epsilon: f64,
    pub generator: String,
    pub n_total_cf: usize,
    pub features: Vec<DiceFeatureRow>,
}

impl DiceDoc {
    pub fn new(result: &DiceResult) -> Self {
        let ranks = competition_ranks(&result.phi());
        DiceDoc {
            format: FORMAT.into(),
            method: "dice".into(),
            epsilon: result.epsilon,
            generator: result.generator_name.clone(),
            n_total_cf: result.n_total_cf,
            features: result
                .features
                .iter()
                .zip(ranks)
                .map(|(f, rank)| DiceFeatureRow {
                    name: f.name.clone(),
                    kind: f.kind,
                    phi: f.phi,
                    rank,
                })
                .collect(),
        }
    }
}

impl Artifact for DiceDoc {
    fn csv(&self) -> Option<String> {
        Some(csv_table(
            &["feature", "kind", "rank", "phi", "display"],
            self.features.iter().map(|f| {
                vec![
                    f.name.clone(),
                    f.kind.as_str().into(),
                    f.rank.to_string(),
                    f.phi.to_string(),
                    format!("{} ({:.2})", f.rank, f.phi),
                ]
            }),
        ))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionDoc {
    pub format: String,
    pub filter: Option<String>,
    pub query: usize,
    pub members: Vec<usize>,
    pub distance: String,
    pub skips: Vec<SkipRecord>,
    pub flex: FlexDoc,
    pub mode_shift: ModeShiftReport,
    pub correlation: CorrelationReport,
}

impl RegionDoc {
    pub fn new(
        region: &Region,
        skips: Vec<SkipRecord>,
        flex: &FlexResult,
        mode_shift: ModeShiftReport,
        correlation: CorrelationReport,
    ) -> Self {
        RegionDoc {
            format: FORMAT.into(),
            filter: region.selection_filter.clone(),
            query: region.query_index,
            members: region.member_indices.clone(),
            distance: format!("{:?}", region.distance_used).to_lowercase(),
            skips,
            flex: FlexDoc::new(flex),
            mode_shift,
            correlation,
        }
    }

    /// Plot-ready regional-vs-global scatter.
    pub fn scatter(&self) -> Scatter<'_> {
        Scatter(&self.correlation)
    }
}

impl Artifact for RegionDoc {}

pub struct Scatter<'a>(&'a CorrelationReport);

impl Serialize for Scatter<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl Artifact for Scatter<'_> {
    fn csv(&self) -> Option<String> {
        Some(csv_table(
            &["feature", "F_global", "F_region", "quadrant"],
            self.0.features.iter().map(|q| {
                vec![
                    q.feature.clone(),
                    q.f_global.to_string(),
                    q.f_region.to_string(),
                    q.quadrant.as_str().into(),
                ]
            }),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFeature {
    pub name: String,
    pub kind: FeatureKind,
    pub phi: Vec<f64>,
    /// Continuous features only; discrete scores do not depend on the threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub non_increasing: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDoc {
    pub format: String,
    pub taus: Vec<f64>,
    pub generator: String,
    pub n_instances: usize,
    pub files: Vec<String>,
    pub features: Vec<SweepFeature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

impl SweepDoc {
    pub fn new(sweep: &[(f64, FlexResult)], files: Vec<String>) -> Self {
        let first = &sweep[0].1;
        let features: Vec<SweepFeature> = first
            .features
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let phi: Vec<f64> = sweep.iter().map(|(_, r)| r.features[j].phi_mean).collect();
                SweepFeature {
                    name: f.name.clone(),
                    kind: f.kind,
                    non_increasing: (f.kind == FeatureKind::Continuous)
                        .then(|| phi.windows(2).all(|w| w[0] >= w[1])),
                    phi,
                }
            })
            .collect();
        let notice = features
            .iter()
            .all(|f| f.non_increasing.is_none())
            .then(|| "no continuous features: every score is identical across thresholds".to_string());
        SweepDoc {
            format: FORMAT.into(),
            taus: sweep.iter().map(|(t, _)| *t).collect(),
            generator: first.generator_name.clone(),
            n_instances: first.n_instances,
            files,
            features,
            notice,
        }
    }
}

impl Artifact for SweepDoc {
    fn csv(&self) -> Option<String> {
        Some(csv_table(
            &["tau", "feature", "phi_mean"],
            self.taus.iter().enumerate().flat_map(|(i, tau)| {
                self.features
                    .iter()
                    .map(move |f| vec![tau.to_string(), f.name.clone(), f.phi[i].to_string()])
            }),
        ))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceDoc {
    pub holds: bool,
    pub equal_n_cf: bool,
    pub epsilon: f64,
    pub mismatches: Vec<FeatureDiff>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareDoc {
    pub format: String,
    pub methods: Vec<String>,
    pub features: Vec<ComparedFeature>,
    pub spearman: Vec<PairCorrelation>,
    pub equivalence: EquivalenceDoc,
}

impl CompareDoc {
    pub fn new(comparison: Comparison, equivalence: &EquivalenceReport) -> Self {
        CompareDoc {
            format: FORMAT.into(),
            methods: comparison.methods,
            features: comparison.features,
            spearman: comparison.spearman,
            equivalence: EquivalenceDoc {
                holds: equivalence.holds,
                equal_n_cf: equivalence.equal_n_cf,
                epsilon: equivalence.dice.epsilon,
                mismatches: equivalence.mismatches.clone(),
                notes: equivalence.notes.clone(),
            },
        }
    }
}

impl Artifact for CompareDoc {
    fn csv(&self) -> Option<String> {
        let mut header = vec!["feature".to_string()];
        header.extend(self.methods.iter().map(|m| format!("rank_{m}")));
        header.extend(self.methods.iter().skip(1).map(|m| format!("delta_{m}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        Some(csv_table(
            &header,
            self.features.iter().map(|f| {
                let mut row = vec![f.feature.clone()];
                row.extend(f.ranks.iter().map(usize::to_string));
                row.extend(f.deltas.iter().skip(1).map(i64::to_string));
                row
            }),
        ))
    }
}

/// Run-level diagnostics: what was sampled, what was skipped, and why.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunDoc {
    pub format: String,
    pub command: String,
    pub dataset_fingerprint: String,
    pub n_rows: usize,
    pub skipped_input_rows: Vec<usize>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_eligible: usize,
    /// `"test"` (rows of the held-out partition) or `"data"` (rows of the
    /// loaded file, 0-based, after skipped rows are dropped).
    pub factual_source: String,
    pub factual_rows: Vec<usize>,
    pub n_counterfactuals: usize,
    pub shortfalls: Vec<(usize, usize)>,
    pub skips: Vec<SkipRecord>,
    pub warnings: Vec<String>,
}

impl Artifact for RunDoc {}

#[cfg(test)]
mod tests {
    use super::*;
    use flexcf_core::flex::FeatureScore;

    fn nine() -> FlexResult {
        FlexResult {
            features: (0..9)
                .map(|j| FeatureScore {
                    name: format!("f{j}"),
                    kind: if j % 3 == 0 { FeatureKind::Continuous } else { FeatureKind::Categorical },
                    phi_mean: [0.34, 0.33, 0.1, 0.08, 0.08, 0.08, 0.06, 0.0, 0.2][j],
                    phi_std: 0.1 * j as f64,
                    mu: (j % 3 == 0).then_some(0.25),
                })
                .collect(),
            n_instances: 200,
            tau: ThresholdVector::uniform(9, 0.1),
            generator_name: "sparse_search".into(),
        }
    }

    #[test]
    fn json_round_trips_and_is_stable() {
        let doc = FlexDoc::new(&nine());
        let a = render(&doc, Format::Json).unwrap();
        assert_eq!(a, render(&FlexDoc::new(&nine()), Format::Json).unwrap());
        let back: FlexDoc = serde_json::from_str(&a).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_result().unwrap(), nine());
        assert!(a.ends_with('\n'));
    }

    #[test]
    fn csv_has_one_line_per_feature_plus_header() {
        let csv = render(&FlexDoc::new(&nine()), Format::Csv).unwrap();
        assert_eq!(csv.lines().count(), 10);
        assert!(csv.ends_with('\n'));
        // shared rank for the three 0.08 scores, then a skip
        let ranks: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
        assert_eq!(ranks, ["1", "2", "4", "5", "5", "5", "8", "9", "3"]);
        assert!(csv.contains("5 (0.08 ± 0.40)"));
    }

    #[test]
    fn per_feature_tau_serializes_as_list() {
        let mut r = nine();
        r.tau = ThresholdVector::from_values((0..9).map(|j| j as f64 / 10.0).collect()).unwrap();
        let json = to_json(&FlexDoc::new(&r)).unwrap();
        let back: FlexDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_result().unwrap().tau, r.tau);
    }

    #[test]
    fn emit_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        emit(&FlexDoc::new(&nine()), &p, Format::Csv).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 10);
        let bad = dir.path().join("missing-dir").join("x.json");
        assert!(matches!(emit(&FlexDoc::new(&nine()), &bad, Format::Json), Err(Error::Io { .. })));
    }
}
