//! End-to-end commands. Each returns the set of files it would write; the
//! caller writes them (plus a manifest) into the output directory.

use std::fs;

use flexcf_core::baseline::{dice_importance, equivalence_check};
use flexcf_core::cfgen::{BatchOutcome, CounterfactualSet, Generator};
use flexcf_core::dataset::{split, Class, Dataset};
use flexcf_core::fixture::FixtureSpec;
use flexcf_core::flex::{score, tau_sweep, FlexResult, ThresholdVector};
use flexcf_core::forest::{train_forest, TreeEnsembleModel};
use flexcf_core::knn::train_knn;
use flexcf_core::model::Predictor;
use flexcf_core::rank::{compare, rank};
use flexcf_core::regional::{build_region, correlate, mode_shift, Region, RegionFilter};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::artifacts::{self, Artifact, CompareDoc, DiceDoc, FlexDoc, Format, RegionDoc, RunDoc, SweepDoc};
use crate::config::{ModelKind, RunConfig};
use crate::csv_io::{load_csv, write_csv};
use crate::error::{Error, Result};
use crate::external::ExternalPredictor;
use crate::manifest::{sha256_hex, OutputSet};
use crate::schema_file::SchemaFile;

/// Loaded data, partitions and a ready model.
pub struct Prepared {
    pub data: Dataset,
    pub train: Dataset,
    pub test: Dataset,
    pub model: Box<dyn Predictor>,
    /// Kept for `model.json` when the built-in forest is used.
    pub forest: Option<TreeEnsembleModel>,
    pub fingerprint: String,
    pub skipped_rows: Vec<usize>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let (data_path, schema_path) = cfg.data_paths()?;
    let loaded = load_csv(data_path, schema_path)?;
    let mut fp = fs::read(data_path).map_err(|e| Error::io(data_path, e))?;
    fp.extend(fs::read(schema_path).map_err(|e| Error::io(schema_path, e))?);
    let seeds = cfg.seeds();
    let (train, test) = split(&loaded.dataset, cfg.train_fraction, seeds.split)?;
    let (model, forest): (Box<dyn Predictor>, _) = match cfg.model.kind {
        ModelKind::Forest => {
            let f = train_forest(&train, cfg.model.n_trees, cfg.model.max_depth, seeds.model)?;
            (Box::new(f.clone()), Some(f))
        }
        ModelKind::Knn => (Box::new(train_knn(&train, cfg.model.k)?), None),
        ModelKind::External => {
            let command = cfg.model.command.as_deref().expect("validated");
            (Box::new(ExternalPredictor::spawn(command, cfg.model.timeout())?), None)
        }
    };
    Ok(Prepared {
        data: loaded.dataset,
        train,
        test,
        model,
        forest,
        fingerprint: sha256_hex(&fp),
        skipped_rows: loaded.skipped_rows,
    })
}

/// Generate counterfactual sets for `rows` of `source` in parallel, seeding
/// each factual by its row index. Results come back in `rows` order.
pub fn generate_for_rows(prep: &Prepared, source: &Dataset, rows: &[usize], cfg: &RunConfig) -> Result<BatchOutcome> {
    let generator = Generator::new(&prep.train, prep.model.as_ref(), cfg.generator_config())?;
    let results: Vec<_> = rows
        .par_iter()
        .map(|&r| (r, generator.generate(source.row(r), r)))
        .collect();
    // A model failure is fatal; per-factual search failures are skips.
    for (_, r) in &results {
        if let Err(e @ flexcf_core::Error::Model(_)) = r {
            return Err(e.clone().into());
        }
    }
    Ok(BatchOutcome::collect(results))
}

/// Global factual sample and its counterfactuals.
pub struct GlobalRun {
    pub outcome: BatchOutcome,
    pub run: RunDoc,
}

fn run_doc(command: &str, prep: &Prepared) -> RunDoc {
    RunDoc {
        format: artifacts::FORMAT.into(),
        command: command.into(),
        dataset_fingerprint: prep.fingerprint.clone(),
        n_rows: prep.data.len(),
        skipped_input_rows: prep.skipped_rows.clone(),
        n_train: prep.train.len(),
        n_test: prep.test.len(),
        ..Default::default()
    }
}

fn finish_run_doc(run: &mut RunDoc, outcome: &BatchOutcome) {
    run.n_counterfactuals = outcome.total_counterfactuals();
    run.shortfalls = outcome
        .sets
        .iter()
        .zip(&outcome.set_indices)
        .filter(|(s, _)| s.shortfall() > 0)
        .map(|(s, &i)| (i, s.shortfall()))
        .collect();
    run.skips = outcome.skips.clone();
    if !run.skipped_input_rows.is_empty() {
        run.warnings.push(format!(
            "{} input rows skipped for missing cells",
            run.skipped_input_rows.len()
        ));
    }
}

/// Sample up to `n_factuals` test rows predicted undesirable and generate
/// counterfactuals for them.
pub fn global_counterfactuals(prep: &Prepared, cfg: &RunConfig, command: &str) -> Result<GlobalRun> {
    let preds = prep.model.predict_batch(prep.test.rows())?;
    let eligible: Vec<usize> = (0..prep.test.len())
        .filter(|&i| preds[i] == Class::Undesirable)
        .collect();
    let mut run = run_doc(command, prep);
    run.n_eligible = eligible.len();
    if eligible.is_empty() {
        return Err(flexcf_core::Error::InsufficientEligible { needed: 1, found: 0 }.into());
    }
    let n = cfg.global.n_factuals;
    let mut rows = if eligible.len() <= n {
        if eligible.len() < n {
            run.warnings.push(format!(
                "only {} eligible factuals for the requested {n}; using all of them",
                eligible.len()
            ));
        }
        eligible
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds().factuals);
        sample(&mut rng, eligible.len(), n).into_iter().map(|k| eligible[k]).collect()
    };
    rows.sort_unstable();
    let outcome = generate_for_rows(prep, &prep.test, &rows, cfg)?;
    if outcome.sets.is_empty() {
        return Err(flexcf_core::Error::NoCounterfactuals.into());
    }
    run.factual_source = "test".into();
    run.factual_rows = rows;
    finish_run_doc(&mut run, &outcome);
    Ok(GlobalRun { outcome, run })
}

fn add_doc<A: Artifact + ?Sized>(out: &mut OutputSet, stem: &str, doc: &A, csv: bool) -> Result<()> {
    out.add(format!("{stem}.json"), artifacts::render(doc, Format::Json)?);
    if csv {
        out.add(format!("{stem}.csv"), artifacts::render(doc, Format::Csv)?);
    }
    Ok(())
}

fn common_outputs(out: &mut OutputSet, cfg: &RunConfig, prep: &Prepared, run: &RunDoc) -> Result<()> {
    out.add("config.toml", cfg.echo());
    add_doc(out, "run", run, false)?;
    if let Some(forest) = &prep.forest {
        out.add("model.json", artifacts::to_json(forest)?);
    }
    Ok(())
}

fn uniform_tau(cfg: &RunConfig, prep: &Prepared) -> ThresholdVector {
    ThresholdVector::uniform(prep.data.n_features(), cfg.tau)
}

pub fn cmd_global(cfg: &RunConfig) -> Result<OutputSet> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let g = global_counterfactuals(&prep, cfg, "global")?;
    let result = score(&g.outcome.sets, prep.data.schema(), &uniform_tau(cfg, &prep))?;
    let mut out = OutputSet::new();
    add_doc(&mut out, "flex", &FlexDoc::new(&result), true)?;
    common_outputs(&mut out, cfg, &prep, &g.run)?;
    Ok(out)
}

pub fn cmd_region(cfg: &RunConfig) -> Result<OutputSet> {
    cfg.validate()?;
    if cfg.region.no_global && cfg.region.global.is_none() {
        return Err(Error::Config("correlation requires global result".into()));
    }
    let prep = prepare(cfg)?;
    let schema = prep.data.schema();
    let filter = cfg
        .region
        .filter
        .as_deref()
        .map(|text| RegionFilter::parse(schema, text))
        .transpose()?;
    let region = build_region(
        &prep.data,
        prep.model.as_ref(),
        filter.as_ref(),
        cfg.region.n_members,
        cfg.seeds().region,
        cfg.region.distance,
    )?;
    let outcome = generate_for_rows(&prep, &prep.data, &region.member_indices, cfg)?;
    if outcome.sets.is_empty() {
        return Err(flexcf_core::Error::NoCounterfactuals.into());
    }
    // Members without counterfactuals drop out of the regional statistics.
    let scored_region = Region {
        member_indices: outcome.set_indices.clone(),
        ..region.clone()
    };
    let tau = uniform_tau(cfg, &prep);
    let regional = score(&outcome.sets, schema, &tau)?;
    let shift = mode_shift(&prep.data, &scored_region, &outcome.sets)?;

    let mut out = OutputSet::new();
    let mut run = run_doc("region", &prep);
    run.n_eligible = region.member_indices.len();
    run.factual_source = "data".into();
    run.factual_rows = region.member_indices.clone();
    finish_run_doc(&mut run, &outcome);

    let global = match &cfg.region.global {
        Some(path) => artifacts::FlexDoc::read(path)?.to_result()?,
        None => {
            let g = global_counterfactuals(&prep, cfg, "region")?;
            let result = score(&g.outcome.sets, schema, &tau)?;
            add_doc(&mut out, "global_flex", &FlexDoc::new(&result), true)?;
            add_doc(&mut out, "global_run", &g.run, false)?;
            result
        }
    };
    let correlation = correlate(&regional, &global)?;
    let doc = RegionDoc::new(&region, outcome.skips.clone(), &regional, shift, correlation);
    add_doc(&mut out, "region", &doc, false)?;
    add_doc(&mut out, "region_flex", &doc.flex, true)?;
    out.add("scatter.csv", artifacts::render(&doc.scatter(), Format::Csv)?);
    common_outputs(&mut out, cfg, &prep, &run)?;
    Ok(out)
}

fn tau_file_stem(tau: f64) -> String {
    format!("flex_tau_{tau}")
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<OutputSet> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let g = global_counterfactuals(&prep, cfg, "sweep")?;
    let sweep = tau_sweep(&g.outcome.sets, prep.data.schema(), &cfg.sweep.taus)?;
    let mut out = OutputSet::new();
    let mut files = Vec::with_capacity(sweep.len());
    for (tau, result) in &sweep {
        let stem = tau_file_stem(*tau);
        add_doc(&mut out, &stem, &FlexDoc::new(result), true)?;
        files.push(format!("{stem}.json"));
    }
    add_doc(&mut out, "sweep", &SweepDoc::new(&sweep, files), true)?;
    common_outputs(&mut out, cfg, &prep, &g.run)?;
    Ok(out)
}

/// FLEX and pooled-count scores over the same counterfactual sets.
pub fn compare_sets(sets: &[CounterfactualSet], cfg: &RunConfig, prep: &Prepared) -> Result<(FlexResult, OutputSet)> {
    let schema = prep.data.schema();
    let flex = score(sets, schema, &uniform_tau(cfg, prep))?;
    let dice = dice_importance(sets, schema, cfg.epsilon)?;
    let comparison = compare(&[rank(&flex), rank(&dice)])?;
    let equivalence = equivalence_check(sets, schema, cfg.epsilon)?;
    let mut out = OutputSet::new();
    add_doc(&mut out, "flex", &FlexDoc::new(&flex), true)?;
    add_doc(&mut out, "dice", &DiceDoc::new(&dice), true)?;
    add_doc(&mut out, "comparison", &CompareDoc::new(comparison, &equivalence), true)?;
    Ok((flex, out))
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<OutputSet> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let g = global_counterfactuals(&prep, cfg, "compare")?;
    let (_, mut out) = compare_sets(&g.outcome.sets, cfg, &prep)?;
    common_outputs(&mut out, cfg, &prep, &g.run)?;
    Ok(out)
}

/// Synthetic dataset as `data.csv` + `schema.toml`.
pub fn cmd_fixture(spec: &FixtureSpec, seed: u64) -> Result<OutputSet> {
    let ds = spec.generate(seed)?;
    let mut csv = Vec::new();
    write_csv(&ds, &mut csv)?;
    let mut out = OutputSet::new();
    out.add("data.csv", csv);
    out.add("schema.toml", SchemaFile::from_schema(ds.schema()).to_toml());
    out.add("fixture.json", artifacts::to_json(&spec)?);
    Ok(out)
}
