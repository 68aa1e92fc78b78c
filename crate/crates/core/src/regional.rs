//! Regions of similar factuals, mode-shift diagnostics and
//! regional-vs-global correlation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cfgen::CounterfactualSet;
use crate::dataset::{Class, Dataset, FeatureSchema, Schema};
use crate::flex::FlexResult;
use crate::model::Predictor;
use crate::stats::{mean, pearson, Pearson};
use crate::{Error, Result};

/// Number of features whose values differ exactly.
pub fn hamming(x: &[f64], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::SchemaMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(x.iter().zip(y).filter(|(a, b)| a != b).count())
}

/// Distance contribution of one feature: exact inequality for discrete
/// features, `|a - b| / range` for continuous ones.
pub fn feature_distance(f: &FeatureSchema, a: f64, b: f64) -> f64 {
    if f.kind.is_discrete() {
        if a == b {
            0.0
        } else {
            1.0
        }
    } else {
        libm::fabs(a - b) / f.range()
    }
}

/// Gower-style sum of per-feature distances. Reduces to [`hamming`] on
/// all-discrete schemas.
pub fn mixed_distance(schema: &Schema, x: &[f64], y: &[f64]) -> Result<f64> {
    schema.check_len(x.len())?;
    schema.check_len(y.len())?;
    let mut d = 0.0;
    for ((f, &a), &b) in schema.features.iter().zip(x).zip(y) {
        if !f.kind.is_discrete() && f.range() <= 0.0 {
            return Err(Error::ZeroRange(f.name.clone()));
        }
        d += feature_distance(f, a, b);
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Hamming,
    Mixed,
}

impl DistanceKind {
    pub fn measure(self, schema: &Schema, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            DistanceKind::Hamming => hamming(x, y).map(|d| d as f64),
            DistanceKind::Mixed => mixed_distance(schema, x, y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ClauseTest {
    Equals { code: u32 },
    OneOf { codes: Vec<u32> },
    Between { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clause {
    pub feature: usize,
    pub feature_name: String,
    pub test: ClauseTest,
    /// Category names for display, parallel to the codes in `test`.
    #[serde(skip)]
    labels: Vec<String>,
}

impl Clause {
    pub fn matches(&self, x: &[f64]) -> bool {
        let v = x[self.feature];
        match &self.test {
            ClauseTest::Equals { code } => v == *code as f64,
            ClauseTest::OneOf { codes } => codes.iter().any(|&c| v == c as f64),
            ClauseTest::Between { low, high } => v >= *low && v <= *high,
        }
    }
}

/// Conjunction of clauses, written as text separated by `;`:
///
/// ```text
/// Driving_experience = Above 10yr; Weather in {Normal, Raining}; x between 0.2, 0.8
/// ```
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionFilter {
    pub clauses: Vec<Clause>,
}

impl RegionFilter {
    pub fn parse(schema: &Schema, text: &str) -> Result<Self> {
        let clauses = text
            .split(';')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(|c| parse_clause(schema, c))
            .collect::<Result<Vec<_>>>()?;
        if clauses.is_empty() {
            return Err(Error::InvalidFilter("empty filter".into()));
        }
        Ok(RegionFilter { clauses })
    }

    pub fn matches(&self, x: &[f64]) -> bool {
        self.clauses.iter().all(|c| c.matches(x))
    }
}

fn parse_clause(schema: &Schema, text: &str) -> Result<Clause> {
    let bad = |m: String| Error::InvalidFilter(m);
    let feature_of = |name: &str| {
        let name = name.trim();
        schema
            .index_of(name)
            .map(|j| (j, schema.feature(j)))
            .ok_or_else(|| bad(format!("unknown feature `{name}`")))
    };
    let code_of = |f: &FeatureSchema, cat: &str| {
        let cat = cat.trim();
        if !f.kind.is_discrete() {
            return Err(bad(format!("`{}` is continuous; use `between`", f.name)));
        }
        f.code_of(cat)
            .map(|c| c as u32)
            .ok_or_else(|| bad(format!("unknown category `{cat}` for `{}`", f.name)))
    };

    if let Some((name, rest)) = text.split_once(" between ") {
        let (j, f) = feature_of(name)?;
        if f.kind.is_discrete() {
            return Err(bad(format!("`between` needs a continuous feature, `{}` is not", f.name)));
        }
        let (lo, hi) = rest
            .split_once(',')
            .ok_or_else(|| bad(format!("expected `low, high` in `{text}`")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("bad bound `{}`", s.trim())))
        };
        let (low, high) = (parse(lo)?, parse(hi)?);
        if low > high {
            return Err(bad(format!("empty interval [{low}, {high}]")));
        }
        return Ok(Clause {
            feature: j,
            feature_name: f.name.clone(),
            test: ClauseTest::Between { low, high },
            labels: Vec::new(),
        });
    }
    if let Some((name, rest)) = text.split_once(" in ") {
        let rest = rest.trim();
        if let Some(inner) = rest.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
            let (j, f) = feature_of(name)?;
            let mut codes = Vec::new();
            let mut labels = Vec::new();
            for cat in inner.split(',').map(str::trim).filter(|c| !c.is_empty()) {
                codes.push(code_of(f, cat)?);
                labels.push(cat.to_string());
            }
            if codes.is_empty() {
                return Err(bad(format!("empty set in `{text}`")));
            }
            return Ok(Clause {
                feature: j,
                feature_name: f.name.clone(),
                test: ClauseTest::OneOf { codes },
                labels,
            });
        }
    }
    if let Some((name, cat)) = text.split_once('=') {
        let (j, f) = feature_of(name)?;
        let code = code_of(f, cat)?;
        return Ok(Clause {
            feature: j,
            feature_name: f.name.clone(),
            test: ClauseTest::Equals { code },
            labels: alloc::vec![cat.trim().to_string()],
        });
    }
    Err(bad(format!("cannot parse clause `{text}`")))
}

impl fmt::Display for RegionFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            match &c.test {
                ClauseTest::Equals { .. } => write!(f, "{} = {}", c.feature_name, c.labels[0])?,
                ClauseTest::OneOf { .. } => write!(f, "{} in {{{}}}", c.feature_name, c.labels.join(", "))?,
                ClauseTest::Between { low, high } => write!(f, "{} between {low}, {high}", c.feature_name)?,
            }
        }
        Ok(())
    }
}

/// A query factual plus its nearest eligible neighbours. Indices refer to
/// rows of the dataset the region was built from; the query comes first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub query_index: usize,
    pub member_indices: Vec<usize>,
    pub selection_filter: Option<String>,
    pub distance_used: DistanceKind,
}

/// Pick a seeded random query among rows predicted undesirable that satisfy
/// `filter`, then add its `n_members - 1` nearest eligible neighbours (ties
/// by lower row index).
///
/// `distance` defaults to Hamming on all-discrete schemas and to the mixed
/// distance otherwise.
pub fn build_region(
    ds: &Dataset,
    model: &dyn Predictor,
    filter: Option<&RegionFilter>,
    n_members: usize,
    seed: u64,
    distance: Option<DistanceKind>,
) -> Result<Region> {
    if n_members == 0 {
        return Err(Error::InvalidConfig("n_members must be at least 1".into()));
    }
    let preds = model.predict_batch(ds.rows())?;
    let eligible: Vec<usize> = (0..ds.len())
        .filter(|&i| preds[i] == Class::Undesirable)
        .filter(|&i| filter.is_none_or(|f| f.matches(ds.row(i))))
        .collect();
    if eligible.len() < n_members {
        return Err(Error::InsufficientEligible {
            needed: n_members,
            found: eligible.len(),
        });
    }
    let distance = distance.unwrap_or(if ds.schema().has_continuous() {
        DistanceKind::Mixed
    } else {
        DistanceKind::Hamming
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let query = eligible[rng.random_range(0..eligible.len())];
    let q = ds.row(query);
    let mut others = Vec::with_capacity(eligible.len() - 1);
    for &i in eligible.iter().filter(|&&i| i != query) {
        others.push((distance.measure(ds.schema(), q, ds.row(i))?, i));
    }
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut members = Vec::with_capacity(n_members);
    members.push(query);
    members.extend(others.iter().take(n_members - 1).map(|&(_, i)| i));
    Ok(Region {
        query_index: query,
        member_indices: members,
        selection_filter: filter.map(ToString::to_string),
        distance_used: distance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeShiftRow {
    pub feature: String,
    pub factual_mode: String,
    pub p_orig: f64,
    pub p_cf: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeShiftReport {
    pub rows: Vec<ModeShiftRow>,
    /// Continuous features left out of the mode analysis.
    pub excluded: Vec<String>,
}

/// Relative change of the factual mode's share, `(p_cf - p_orig) / p_orig`.
pub fn relative_change(p_orig: f64, p_cf: f64) -> f64 {
    (p_cf - p_orig) / p_orig
}

/// Mode of each discrete feature over the region's factuals (ties to the
/// lower code) and that category's share of all pooled counterfactual rows.
/// `delta` is evaluated from the integer counts and rounded once, so it is
/// the float closest to the true ratio.
///
/// `cfsets[i]` must belong to `region.member_indices[i]`.
pub fn mode_shift(ds: &Dataset, region: &Region, cfsets: &[CounterfactualSet]) -> Result<ModeShiftReport> {
    if cfsets.len() != region.member_indices.len() {
        return Err(Error::RegionMismatch(format!(
            "{} members but {} counterfactual sets",
            region.member_indices.len(),
            cfsets.len()
        )));
    }
    for (k, (&m, cs)) in region.member_indices.iter().zip(cfsets).enumerate() {
        if cs.factual().values() != ds.row(m).values() {
            return Err(Error::RegionMismatch(format!(
                "counterfactual set {k} does not belong to member row {m}"
            )));
        }
    }
    let pooled: Vec<&[f64]> = cfsets
        .iter()
        .flat_map(|cs| cs.counterfactuals().iter().map(|c| c.values()))
        .collect();
    let schema = ds.schema();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for (j, f) in schema.features.iter().enumerate() {
        if !f.kind.is_discrete() {
            excluded.push(f.name.clone());
            continue;
        }
        let mut counts = alloc::vec![0usize; f.n_categories()];
        for &m in &region.member_indices {
            counts[ds.row(m)[j] as usize] += 1;
        }
        let mode = (0..counts.len())
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
            .unwrap_or(0);
        let n_members = region.member_indices.len();
        let p_orig = counts[mode] as f64 / n_members as f64;
        let hits = pooled.iter().filter(|x| x[j] == mode as f64).count();
        let (p_cf, delta) = if pooled.is_empty() {
            (0.0, -1.0)
        } else {
            // (hits/n_cf - count/n) / (count/n) as one fraction, rounded once
            let num = (hits * n_members) as i128 - (counts[mode] * pooled.len()) as i128;
            let den = (counts[mode] * pooled.len()) as i128;
            (hits as f64 / pooled.len() as f64, num as f64 / den as f64)
        };
        rows.push(ModeShiftRow {
            feature: f.name.clone(),
            factual_mode: f.decode(mode as f64),
            p_orig,
            p_cf,
            delta,
        });
    }
    Ok(ModeShiftReport { rows, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Quadrant {
    /// Low global, high regional importance.
    A,
    /// Low in both.
    B,
    /// High in both.
    C,
    /// High global, low regional importance.
    D,
}

impl Quadrant {
    /// Split at the mean global (`mu_g`) and regional (`mu_re`) frequencies.
    pub fn classify(f_region: f64, f_global: f64, mu_re: f64, mu_g: f64) -> Quadrant {
        match (f_global > mu_g, f_region > mu_re) {
            (false, true) => Quadrant::A,
            (false, false) => Quadrant::B,
            (true, true) => Quadrant::C,
            (true, false) => Quadrant::D,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::A => "A",
            Quadrant::B => "B",
            Quadrant::C => "C",
            Quadrant::D => "D",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadrantRow {
    pub feature: String,
    pub f_region: f64,
    pub f_global: f64,
    pub quadrant: Quadrant,
    /// Distance from the `y = x` line; 0 means equal importance.
    pub diagonal_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub r: Pearson,
    pub mu_region: f64,
    pub mu_global: f64,
    pub features: Vec<QuadrantRow>,
}

pub fn correlate(regional: &FlexResult, global: &FlexResult) -> Result<CorrelationReport> {
    let names_r: Vec<&str> = regional.features.iter().map(|f| f.name.as_str()).collect();
    let names_g: Vec<&str> = global.features.iter().map(|f| f.name.as_str()).collect();
    if names_r != names_g {
        return Err(Error::FeatureMismatch(format!("{names_r:?} vs {names_g:?}")));
    }
    if names_r.len() < 2 {
        return Err(Error::FeatureMismatch("correlation needs at least 2 features".into()));
    }
    let fr = regional.phi();
    let fg = global.phi();
    let mu_region = mean(&fr);
    let mu_global = mean(&fg);
    let features = names_r
        .iter()
        .zip(fr.iter().zip(&fg))
        .map(|(name, (&r, &g))| QuadrantRow {
            feature: name.to_string(),
            f_region: r,
            f_global: g,
            quadrant: Quadrant::classify(r, g, mu_region, mu_global),
            diagonal_distance: libm::fabs(r - g) / core::f64::consts::SQRT_2,
        })
        .collect();
    Ok(CorrelationReport {
        r: pearson(&fr, &fg),
        mu_region,
        mu_global,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Instance;
    use crate::fixture::FixtureSpec;
    use crate::flex::{FeatureScore, ThresholdVector};
    use crate::model::FnPredictor;
    use alloc::sync::Arc;
    use alloc::vec;
    use proptest::prelude::*;

    fn cats(n: usize) -> Vec<String> {
        (0..n).map(|c| format!("c{c}")).collect()
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0);
        assert_eq!(hamming(&[1.0, 2.0, 3.0], &[1.0, 0.0, 3.0]).unwrap(), 1);
        assert_eq!(hamming(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap(), 3);
        assert!(hamming(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mixed_distance_examples() {
        let schema = Schema::new(
            vec![
                FeatureSchema::categorical("c", cats(3)),
                FeatureSchema::continuous("x", 0.0, 4.0),
            ],
            "y",
        )
        .unwrap();
        assert_eq!(mixed_distance(&schema, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mixed_distance(&schema, &[1.0, 1.0], &[2.0, 3.0]).unwrap(), 1.5);
        assert!(mixed_distance(&schema, &[1.0], &[1.0, 2.0]).is_err());

        let cat_only = Schema::new(
            vec![
                FeatureSchema::categorical("a", cats(3)),
                FeatureSchema::ordinal("b", cats(4)),
            ],
            "y",
        )
        .unwrap();
        let (x, y) = ([0.0, 3.0], [2.0, 3.0]);
        assert_eq!(mixed_distance(&cat_only, &x, &y).unwrap(), hamming(&x, &y).unwrap() as f64);
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric(
            x in proptest::collection::vec(0u8..3, 6),
            y in proptest::collection::vec(0u8..3, 6),
            z in proptest::collection::vec(0u8..3, 6),
        ) {
            let f = |v: &Vec<u8>| v.iter().map(|&c| c as f64).collect::<Vec<f64>>();
            let (x, y, z) = (f(&x), f(&y), f(&z));
            let d = |a: &[f64], b: &[f64]| hamming(a, b).unwrap();
            prop_assert_eq!(d(&x, &y), d(&y, &x));
            prop_assert_eq!(d(&x, &y) == 0, x == y);
            prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z));
        }
    }

    fn accident() -> Dataset {
        FixtureSpec::accident_shaped(600).generate(3).unwrap()
    }

    fn rule_model() -> impl Predictor {
        let spec = FixtureSpec::accident_shaped(1);
        FnPredictor(move |x: &[f64]| spec.rule.label(x))
    }

    #[test]
    fn region_members_satisfy_filter_and_class() {
        let ds = accident();
        let model = rule_model();
        let filter = RegionFilter::parse(ds.schema(), "Driving_experience = Driving_experience_6").unwrap();
        let region = build_region(&ds, &model, Some(&filter), 5, 11, None).unwrap();
        assert_eq!(region.member_indices.len(), 5);
        assert_eq!(region.member_indices[0], region.query_index);
        assert_eq!(region.distance_used, DistanceKind::Hamming);
        let mut uniq = region.member_indices.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 5);
        for &m in &region.member_indices {
            assert!(filter.matches(ds.row(m)));
            assert_eq!(model.predict(ds.row(m)).unwrap(), Class::Undesirable);
        }
        let again = build_region(&ds, &model, Some(&filter), 5, 11, None).unwrap();
        assert_eq!(region, again);
    }

    #[test]
    fn region_neighbours_are_nearest() {
        let ds = accident();
        let model = rule_model();
        let region = build_region(&ds, &model, None, 6, 2, None).unwrap();
        let q = ds.row(region.query_index);
        let worst = region.member_indices[1..]
            .iter()
            .map(|&m| hamming(q, ds.row(m)).unwrap())
            .max()
            .unwrap();
        for i in 0..ds.len() {
            if region.member_indices.contains(&i) || model.predict(ds.row(i)).unwrap() != Class::Undesirable {
                continue;
            }
            assert!(hamming(q, ds.row(i)).unwrap() >= worst);
        }
    }

    #[test]
    fn single_member_region_is_the_query() {
        let ds = accident();
        let model = rule_model();
        let region = build_region(&ds, &model, None, 1, 4, None).unwrap();
        assert_eq!(region.member_indices, vec![region.query_index]);
    }

    #[test]
    fn too_few_eligible_rows() {
        let ds = accident();
        let model = rule_model();
        // pick a category combination rare enough to match < 5 undesirable rows
        let preds = model.predict_batch(ds.rows()).unwrap();
        let target = (0..ds.len())
            .find(|&i| preds[i] == Class::Undesirable)
            .unwrap();
        let row = ds.decode_row(target);
        let names: Vec<&str> = ds.schema().names().collect();
        let text = format!(
            "{} = {}; {} = {}; {} = {}",
            names[10], row[10], names[6], row[6], names[3], row[3]
        );
        let filter = RegionFilter::parse(ds.schema(), &text).unwrap();
        let matching = (0..ds.len())
            .filter(|&i| preds[i] == Class::Undesirable && filter.matches(ds.row(i)))
            .count();
        assert!((1..5).contains(&matching));
        assert_eq!(
            build_region(&ds, &model, Some(&filter), 5, 0, None),
            Err(Error::InsufficientEligible { needed: 5, found: matching })
        );
    }

    #[test]
    fn filter_parsing() {
        let schema = Schema::new(
            vec![
                FeatureSchema::categorical("Weather", vec!["Normal".into(), "Raining".into(), "Fog".into()]),
                FeatureSchema::continuous("x", 0.0, 1.0),
            ],
            "y",
        )
        .unwrap();
        let f = RegionFilter::parse(&schema, "Weather in {Normal, Fog}; x between 0.2, 0.8").unwrap();
        assert!(f.matches(&[2.0, 0.5]));
        assert!(!f.matches(&[1.0, 0.5]));
        assert!(!f.matches(&[0.0, 0.9]));
        assert_eq!(f.to_string(), "Weather in {Normal, Fog}; x between 0.2, 0.8");
        assert!(RegionFilter::parse(&schema, "Weather = Snow").is_err());
        assert!(RegionFilter::parse(&schema, "Nope = Normal").is_err());
        assert!(RegionFilter::parse(&schema, "x = 3").is_err());
        assert!(RegionFilter::parse(&schema, "Weather between 0, 1").is_err());
        assert!(RegionFilter::parse(&schema, " ; ").is_err());
    }

    fn one_feature_region(member_codes: &[f64], cf_codes: &[&[f64]]) -> (Dataset, Region, Vec<CounterfactualSet>) {
        let schema = Arc::new(Schema::new(vec![FeatureSchema::categorical("f", cats(4))], "y").unwrap());
        let rows: Vec<Instance> = member_codes.iter().map(|&c| Instance::new(vec![c])).collect();
        let ds = Dataset::new(schema, rows.clone(), vec![Class::Undesirable; rows.len()]).unwrap();
        let region = Region {
            query_index: 0,
            member_indices: (0..rows.len()).collect(),
            selection_filter: None,
            distance_used: DistanceKind::Hamming,
        };
        let sets = rows
            .iter()
            .zip(cf_codes)
            .map(|(r, cfs)| {
                let cfs = cfs.iter().map(|&c| Instance::new(vec![c])).collect();
                CounterfactualSet::new(r.clone(), cfs, "manual", 0, 0)
            })
            .collect();
        (ds, region, sets)
    }

    #[test]
    fn mode_shift_counts() {
        // mode 0 in 3/5 factuals; 2 of 8 pooled counterfactuals keep code 0
        let (ds, region, sets) = one_feature_region(
            &[0.0, 0.0, 1.0, 0.0, 2.0],
            &[&[1.0, 2.0], &[0.0, 1.0], &[0.0, 3.0], &[1.0, 1.0], &[3.0]],
        );
        let rep = mode_shift(&ds, &region, &sets).unwrap();
        let row = &rep.rows[0];
        assert_eq!(row.factual_mode, "c0");
        assert_eq!(row.p_orig, 0.6);
        assert_eq!(row.p_cf, 2.0 / 9.0);
        // (2/9 - 3/5) / (3/5) = -17/27, rounded once
        assert_eq!(row.delta, -17.0 / 27.0);
    }

    #[test]
    fn shift_is_rounded_once_from_counts() {
        // every factual has code 0; 29 of 50 counterfactuals keep it
        let keep: [f64; 10] = [0.0; 10];
        let mut other = [1.0; 10];
        other[..9].fill(0.0);
        let (ds, region, sets) = one_feature_region(&[0.0; 5], &[&keep, &keep, &other, &[1.0; 10], &[1.0; 10]]);
        let rep = mode_shift(&ds, &region, &sets).unwrap();
        assert_eq!(rep.rows[0].p_cf, 0.58);
        // the two-step float formula lands one ulp away from -0.42
        assert_ne!(relative_change(1.0, 0.58), -0.42);
        assert_eq!(rep.rows[0].delta, -0.42);
    }

    #[test]
    fn mode_ties_take_lower_code() {
        let (ds, region, sets) = one_feature_region(&[2.0, 1.0], &[&[0.0], &[0.0]]);
        let rep = mode_shift(&ds, &region, &sets).unwrap();
        assert_eq!(rep.rows[0].factual_mode, "c1");
        assert_eq!(rep.rows[0].delta, -1.0);
    }

    #[test]
    fn untouched_constant_feature_has_zero_shift() {
        let (ds, region, sets) = one_feature_region(&[3.0, 3.0, 3.0], &[&[3.0], &[3.0, 3.0], &[3.0]]);
        let rep = mode_shift(&ds, &region, &sets).unwrap();
        assert_eq!(rep.rows[0].p_orig, 1.0);
        assert_eq!(rep.rows[0].p_cf, 1.0);
        assert_eq!(rep.rows[0].delta, 0.0);
    }

    #[test]
    fn mode_shift_rejects_mismatched_sets() {
        let (ds, region, mut sets) = one_feature_region(&[0.0, 1.0], &[&[2.0], &[2.0]]);
        sets.swap(0, 1);
        assert!(matches!(mode_shift(&ds, &region, &sets), Err(Error::RegionMismatch(_))));
        sets.pop();
        assert!(matches!(mode_shift(&ds, &region, &sets), Err(Error::RegionMismatch(_))));
    }

    fn flex_of(names: &[&str], phi: &[f64]) -> FlexResult {
        FlexResult {
            features: names
                .iter()
                .zip(phi)
                .map(|(n, &p)| FeatureScore {
                    name: n.to_string(),
                    kind: crate::dataset::FeatureKind::Categorical,
                    phi_mean: p,
                    phi_std: 0.0,
                    mu: None,
                })
                .collect(),
            n_instances: 1,
            tau: ThresholdVector::uniform(names.len(), 0.05),
            generator_name: "manual".into(),
        }
    }

    #[test]
    fn correlation_identity_and_negation() {
        let names = ["a", "b", "c", "d"];
        let g = flex_of(&names, &[0.1, 0.7, 0.3, 0.2]);
        let rep = correlate(&g, &g).unwrap();
        assert!((rep.r.value().unwrap() - 1.0).abs() < 1e-12);
        let neg = flex_of(&names, &[0.9, 0.3, 0.7, 0.8]);
        let rep = correlate(&neg, &g).unwrap();
        assert!((rep.r.value().unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_constant_is_undefined() {
        let names = ["a", "b", "c"];
        let rep = correlate(&flex_of(&names, &[0.2; 3]), &flex_of(&names, &[0.1, 0.5, 0.3])).unwrap();
        assert_eq!(rep.r, Pearson::Undefined);
        assert!(correlate(&flex_of(&names[..1], &[0.2]), &flex_of(&names[..1], &[0.2])).is_err());
        assert!(correlate(&flex_of(&["a", "b"], &[0.1, 0.2]), &flex_of(&["a", "c"], &[0.1, 0.2])).is_err());
    }

    #[test]
    fn quadrants_split_at_means() {
        let names = ["a", "b", "c", "d"];
        // mu_g = 0.4, mu_re = 0.4
        let global = flex_of(&names, &[0.1, 0.1, 0.7, 0.7]);
        let region = flex_of(&names, &[0.7, 0.1, 0.7, 0.1]);
        let rep = correlate(&region, &global).unwrap();
        let q: Vec<Quadrant> = rep.features.iter().map(|f| f.quadrant).collect();
        assert_eq!(q, [Quadrant::A, Quadrant::B, Quadrant::C, Quadrant::D]);
        assert!((rep.features[0].diagonal_distance - 0.6 / core::f64::consts::SQRT_2).abs() < 1e-15);
    }
}
