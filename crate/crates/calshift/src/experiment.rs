use std::path::Path;
use std::time::Instant;

use cp_core::{
    build_set, ccp_adjust, cp_threshold, estimate_tv, majority_vote, top_k_set, wcp_set,
    MiscoverageLevel, PredictionSet,
};
use rand::Rng;
use ratio_meta::RatioModel;
use serde::Serialize;

use context_select::{select_adaptive, select_fixed_k, select_single, ContextCatalog};

use crate::config::{ExperimentConfig, Method, SelectionConfig};
use crate::metrics::empirical_metrics;
use crate::pipelines::{full_label_set, require_scores, true_label_scores};
use crate::rng::{cell_stream, stage};
use crate::scenario::{DrawnSample, Scenario};
use crate::{HarnessError, Result};

/// Trained ratio models a run may need: ML pipelines read the pairwise
/// model, the mixture pipeline its own.
#[derive(Default)]
pub struct ModelSet {
    pub pairwise: Option<RatioModel>,
    pub mixture: Option<RatioModel>,
}

impl ModelSet {
    pub fn none() -> Self {
        Self::default()
    }
}

/// One (test context, trial) outcome. `wall_ms` is measured in-process but
/// persisted as zero so record files stay byte-identical for a fixed
/// (config, seed); run timing is reported by the caller instead.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub test_context: String,
    pub cal_contexts: Vec<String>,
    pub method: String,
    pub alpha: f64,
    pub trial: usize,
    pub coverage: f64,
    pub inefficiency: f64,
    pub wall_ms: u64,
    pub seed: u64,
}

/// Outcome of one evaluated cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    pub coverage: f64,
    pub inefficiency: f64,
    pub cal_contexts: Vec<String>,
}

pub fn run_experiment(cfg: &ExperimentConfig, models: &ModelSet) -> Result<Vec<ExperimentRecord>> {
    run_experiment_with_jobs(cfg, models, Some(1))
}

/// Run every (test context, trial) cell of the experiment. `jobs` bounds
/// the worker threads (`None` uses all cores); results are identical
/// regardless of parallelism because each cell owns counter-derived
/// streams, and records are emitted in (test context, trial) order.
pub fn run_experiment_with_jobs(
    cfg: &ExperimentConfig,
    models: &ModelSet,
    jobs: Option<usize>,
) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let scenario = Scenario::build(&cfg.scenario, &cfg.counts, cfg.seed)?;
    check_models(cfg, &scenario, models)?;

    let cells: Vec<(usize, usize)> = (0..scenario.test_pool().len())
        .flat_map(|pair| (0..cfg.counts.trials).map(move |trial| (pair, trial)))
        .collect();

    let run_cell = |&(pair, trial): &(usize, usize)| -> Result<ExperimentRecord> {
        let started = Instant::now();
        let te_id = &scenario.test_pool()[pair];
        let selected = select_contexts(cfg, &scenario, te_id, pair as u64, trial as u64)?;
        let outcome = evaluate_fixed_pair(
            &scenario,
            models,
            cfg.method,
            cfg.alpha,
            te_id,
            &selected,
            cfg.counts.samples_per_context,
            cfg.seed,
            pair as u64,
            trial as u64,
        )?;
        Ok(ExperimentRecord {
            test_context: te_id.clone(),
            cal_contexts: outcome.cal_contexts,
            method: cfg.method.name(),
            alpha: cfg.alpha,
            trial,
            coverage: outcome.coverage,
            inefficiency: outcome.inefficiency,
            wall_ms: started.elapsed().as_millis() as u64,
            seed: cfg.seed,
        })
    };

    match jobs {
        Some(1) => cells.iter().map(run_cell).collect(),
        _ => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
            pool.install(|| cells.par_iter().map(run_cell).collect())
        }
    }
}

fn check_models(cfg: &ExperimentConfig, scenario: &Scenario, models: &ModelSet) -> Result<()> {
    if !scenario.has_scores() {
        return Err(HarnessError::Config(
            "this dataset carries covariates only; prediction sets need score-mode data".into(),
        ));
    }
    if cfg.method.needs_pairwise_model(scenario.has_oracle()) && models.pairwise.is_none() {
        return Err(HarnessError::Config(format!(
            "method {} needs a pairwise-trained ratio model; run meta-train first",
            cfg.method
        )));
    }
    if cfg.method.needs_mixture_model() && models.mixture.is_none() {
        return Err(HarnessError::Config(format!(
            "method {} needs a mixture-trained ratio model; run meta-train first",
            cfg.method
        )));
    }
    if matches!(cfg.method, Method::WcpIdeal) && !scenario.has_oracle() {
        return Err(HarnessError::Config(
            "wcp-ideal needs the exact likelihood oracle of a synthetic scenario".into(),
        ));
    }
    if let Method::TopK(k) = cfg.method {
        if k > scenario.label_count() {
            return Err(HarnessError::Config(format!(
                "top-{k} exceeds the {}-label space",
                scenario.label_count()
            )));
        }
    }
    Ok(())
}

fn select_contexts(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    te_id: &str,
    pair: u64,
    trial: u64,
) -> Result<Vec<String>> {
    let candidates: Vec<&str> = scenario
        .cal_ids()
        .iter()
        .map(String::as_str)
        .filter(|id| *id != te_id)
        .collect();
    if candidates.is_empty() {
        return Err(HarnessError::Config(format!(
            "no calibration candidates remain for test context '{te_id}'"
        )));
    }
    let catalog = ContextCatalog::new(
        candidates
            .iter()
            .map(|id| scenario.context_record(id).cloned())
            .collect::<Result<Vec<_>>>()?,
    )?;
    let test_record = scenario.context_record(te_id)?;
    Ok(match cfg.selection {
        SelectionConfig::Single => vec![select_single(test_record, &catalog)?],
        SelectionConfig::FixedK { k } => select_fixed_k(test_record, &catalog, k)?,
        SelectionConfig::Adaptive { epsilon } => {
            select_adaptive(test_record, &catalog, epsilon)?.ids
        }
        SelectionConfig::Random => {
            let mut rng = cell_stream(cfg.seed, stage::SELECT, pair, trial);
            vec![candidates[rng.random_range(0..candidates.len())].to_string()]
        }
    })
}

/// Evaluate one method on one explicit (test context, calibration
/// selection) cell: fresh calibration and test draws from the cell's
/// streams, one prediction set per test point, empirical metrics over the
/// draw. This is the building block `run_experiment` iterates, exposed for
/// targeted experiments on pinned context pairs.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_fixed_pair(
    scenario: &Scenario,
    models: &ModelSet,
    method: Method,
    alpha: f64,
    te_id: &str,
    selected: &[String],
    samples_per_context: usize,
    master_seed: u64,
    pair: u64,
    trial: u64,
) -> Result<PairOutcome> {
    if selected.is_empty() {
        return Err(HarnessError::Config("no calibration contexts selected".into()));
    }
    if method.requires_single_context() && selected.len() != 1 {
        return Err(HarnessError::Config(format!(
            "method {method} calibrates on exactly one context, got {}",
            selected.len()
        )));
    }
    let alpha = MiscoverageLevel::new(alpha).map_err(HarnessError::Cp)?;

    let mut rng_test = cell_stream(master_seed, stage::TEST_DRAW, pair, trial);
    let test_data = scenario.draw(te_id, samples_per_context, &mut rng_test)?;
    let truths: Vec<usize> = test_data.iter().map(|s| s.label).collect();

    // Calibration draws (skipped by top-k, which needs none); the shared
    // stream walks the selected contexts in selection order, so the
    // nearest context's draw is identical across single- and multi-context
    // methods at matched settings.
    let cal_data: Vec<(String, Vec<DrawnSample>)> = if matches!(method, Method::TopK(_)) {
        Vec::new()
    } else {
        let mut rng_cal = cell_stream(master_seed, stage::CAL_DRAW, pair, trial);
        selected
            .iter()
            .map(|id| Ok((id.clone(), scenario.draw(id, samples_per_context, &mut rng_cal)?)))
            .collect::<Result<_>>()?
    };

    let sets = build_sets(
        scenario, models, method, alpha, te_id, selected, &cal_data, &test_data, master_seed,
        pair, trial,
    )?;
    let (coverage, inefficiency) = empirical_metrics(&sets, &truths)?;
    Ok(PairOutcome {
        coverage,
        inefficiency,
        cal_contexts: selected.to_vec(),
    })
}

#[allow(clippy::too_many_arguments)]
fn build_sets(
    scenario: &Scenario,
    models: &ModelSet,
    method: Method,
    alpha: MiscoverageLevel,
    te_id: &str,
    selected: &[String],
    cal_data: &[(String, Vec<DrawnSample>)],
    test_data: &[DrawnSample],
    master_seed: u64,
    pair: u64,
    trial: u64,
) -> Result<Vec<PredictionSet>> {
    let te_features = scenario.context_record(te_id)?.features.clone();

    match method {
        Method::TopK(k) => test_data
            .iter()
            .map(|s| Ok(top_k_set(require_scores(s)?, k)?))
            .collect(),

        Method::Cp => {
            let pooled: Vec<f64> = cal_data
                .iter()
                .map(|(_, samples)| true_label_scores(samples))
                .collect::<Result<Vec<_>>>()?
                .concat();
            let threshold = cp_threshold(&pooled, alpha)?;
            test_data
                .iter()
                .map(|s| Ok(build_set(require_scores(s)?, threshold)?))
                .collect()
        }

        Method::Ccp => {
            let (cal_id, samples) = &cal_data[0];
            let weights: Vec<f64> = match (&models.pairwise, scenario.has_oracle()) {
                // The oracle path derates by the exact total variation; the
                // estimated path follows the meta-learned ratio model.
                (_, true) => samples
                    .iter()
                    .map(|s| scenario.exact_pair_weight(&s.features, te_id, cal_id))
                    .collect::<Result<_>>()?,
                (Some(model), false) => {
                    let cal_features = &scenario.context_record(cal_id)?.features;
                    samples
                        .iter()
                        .map(|s| {
                            Ok(model.pairwise_ratio(&s.features, &te_features, cal_features)?)
                        })
                        .collect::<Result<Vec<f64>>>()?
                }
                (None, false) => unreachable!("checked in check_models"),
            };
            let tv = estimate_tv(&weights)?;
            let adjusted = ccp_adjust(alpha, tv);
            if adjusted == 0.0 {
                return test_data
                    .iter()
                    .map(|s| Ok(full_label_set(require_scores(s)?)))
                    .collect();
            }
            let scores = true_label_scores(samples)?;
            let threshold = cp_threshold(&scores, MiscoverageLevel::new(adjusted)?)?;
            test_data
                .iter()
                .map(|s| Ok(build_set(require_scores(s)?, threshold)?))
                .collect()
        }

        Method::WcpIdeal => {
            let weight = |features: &[f64]| -> Result<f64> {
                if selected.len() == 1 {
                    scenario.exact_pair_weight(features, te_id, &selected[0])
                } else {
                    scenario.exact_mixture_weight(features, te_id, selected)
                }
            };
            let entries = weighted_entries(cal_data, weight)?;
            test_data
                .iter()
                .map(|s| {
                    let w_te = weight(&s.features)?;
                    Ok(wcp_set(require_scores(s)?, &entries, w_te, alpha)?)
                })
                .collect()
        }

        Method::MlWcp => {
            let model = models.pairwise.as_ref().expect("checked in check_models");
            let cal_features = scenario.context_record(&selected[0])?.features.clone();
            let weight = |features: &[f64]| -> Result<f64> {
                Ok(model.pairwise_ratio(features, &te_features, &cal_features)?)
            };
            let entries = weighted_entries(cal_data, weight)?;
            test_data
                .iter()
                .map(|s| {
                    let w_te = weight(&s.features)?;
                    Ok(wcp_set(require_scores(s)?, &entries, w_te, alpha)?)
                })
                .collect()
        }

        Method::MlWcpMv => {
            let model = models.pairwise.as_ref().expect("checked in check_models");
            // Per-context calibration entries, then one vote per test point
            // with a fresh uniform draw.
            let mut per_context = Vec::with_capacity(cal_data.len());
            for (cal_id, samples) in cal_data {
                let cal_features = &scenario.context_record(cal_id)?.features;
                let entries = entries_for(samples, |features| {
                    Ok(model.pairwise_ratio(features, &te_features, cal_features)?)
                })?;
                per_context.push((cal_features.clone(), entries));
            }
            let mut rng_vote = cell_stream(master_seed, stage::VOTE, pair, trial);
            test_data
                .iter()
                .map(|s| {
                    let scores = require_scores(s)?;
                    let member_sets = per_context
                        .iter()
                        .map(|(cal_features, entries)| {
                            let w_te =
                                model.pairwise_ratio(&s.features, &te_features, cal_features)?;
                            Ok(wcp_set(scores, entries, w_te, alpha)?)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let u: f64 = rng_vote.random();
                    Ok(majority_vote(&member_sets, u)?)
                })
                .collect()
        }

        Method::MlWcpMix => {
            let model = models.mixture.as_ref().expect("checked in check_models");
            let te_record = scenario.context_record(te_id)?;
            let member_records = selected
                .iter()
                .map(|id| scenario.context_record(id).cloned())
                .collect::<Result<Vec<_>>>()?;
            let weight = |features: &[f64]| -> Result<f64> {
                Ok(model.mixture_ratio(features, te_record, &member_records)?)
            };
            let entries = weighted_entries(cal_data, weight)?;
            test_data
                .iter()
                .map(|s| {
                    let w_te = weight(&s.features)?;
                    Ok(wcp_set(require_scores(s)?, &entries, w_te, alpha)?)
                })
                .collect()
        }
    }
}

/// Pool every calibration sample into `(true-label score, raw weight)`
/// entries under the given weight function.
fn weighted_entries(
    cal_data: &[(String, Vec<DrawnSample>)],
    weight: impl Fn(&[f64]) -> Result<f64>,
) -> Result<Vec<(f64, f64)>> {
    let mut entries = Vec::new();
    for (_, samples) in cal_data {
        entries.extend(entries_for(samples, &weight)?);
    }
    Ok(entries)
}

fn entries_for(
    samples: &[DrawnSample],
    weight: impl Fn(&[f64]) -> Result<f64>,
) -> Result<Vec<(f64, f64)>> {
    let scores = true_label_scores(samples)?;
    samples
        .iter()
        .zip(scores)
        .map(|(sample, score)| Ok((score, weight(&sample.features)?)))
        .collect()
}

/// Write records in the stable CSV schema. The `wall_ms` column is always
/// zero on disk so repeated runs of one (config, seed) are byte-identical.
pub fn write_records_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let mut out = String::from(
        "test_context,cal_contexts,method,alpha,trial,coverage,inefficiency,wall_ms,seed\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},0,{}\n",
            r.test_context,
            r.cal_contexts.join(";"),
            r.method,
            r.alpha,
            r.trial,
            r.coverage,
            r.inefficiency,
            r.seed
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    seed: u64,
    records: Vec<String>,
    versions: ManifestVersions,
}

#[derive(Serialize)]
struct ManifestVersions {
    calshift: &'static str,
    format: u32,
}

/// Deterministic run manifest: config echo, seed, record files, versions.
pub fn write_manifest(cfg: &ExperimentConfig, records: &[String], path: &Path) -> Result<()> {
    let manifest = Manifest {
        config: cfg,
        seed: cfg.seed,
        records: records.to_vec(),
        versions: ManifestVersions {
            calshift: env!("CARGO_PKG_VERSION"),
            format: 1,
        },
    };
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
