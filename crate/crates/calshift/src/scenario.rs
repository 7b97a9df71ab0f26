use std::collections::BTreeMap;

use context_select::{ContextCatalog, ContextRecord};
use cp_core::ScoreVector;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use phy_scenario::gaussian::{self, GaussianToyContext};
use phy_scenario::{
    default_grid, generate_frame, BurstProfile, Codebook, ConvCode, Informativeness, PhyContext,
};

use crate::config::{
    CountsConfig, GaussianScenarioConfig, InformativenessConfig, IngestedScenarioConfig,
    PhyContextSpec, PhyScenarioConfig, ScenarioConfig,
};
use crate::ingest::{ingest_dataset, IngestMode, IngestedSample};
use crate::rng::{run_stream, stage};
use crate::{HarnessError, Result};

/// One drawn observation: covariate features for ratio estimation, the true
/// label, and (when the scenario produces them) the per-label scores.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawnSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub scores: Option<ScoreVector>,
}

enum Backend {
    Gaussian {
        contexts: BTreeMap<String, GaussianToyContext>,
    },
    Phy {
        contexts: BTreeMap<String, PhyContext>,
        code: ConvCode,
        book: Codebook,
    },
    Ingested {
        samples: BTreeMap<String, Vec<IngestedSample>>,
        mode: IngestMode,
    },
}

/// A fully constructed experiment world: the context catalog, its
/// train/calibration split, the test pool, and a sampling backend.
pub struct Scenario {
    catalog: ContextCatalog,
    train_ids: Vec<String>,
    cal_ids: Vec<String>,
    test_pool: Vec<String>,
    label_count: usize,
    backend: Backend,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn features_to_frame(features: &[f64]) -> Result<Vec<Complex64>> {
    if features.len() != 2 * phy_scenario::FRAME_SYMBOLS {
        return Err(HarnessError::Config(format!(
            "expected {} interleaved re/im values, got {}",
            2 * phy_scenario::FRAME_SYMBOLS,
            features.len()
        )));
    }
    Ok(features
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect())
}

fn phy_context_from_spec(
    spec: &PhyContextSpec,
    level: InformativenessConfig,
    snr_db: f64,
    inr_db: f64,
) -> Result<PhyContext> {
    let burst = match level {
        InformativenessConfig::Least => {
            let p_b = spec.p_b.ok_or_else(|| {
                HarnessError::Config("least-informative contexts need p_b".into())
            })?;
            if spec.i_b.is_some() || spec.t_0.is_some() {
                return Err(HarnessError::Config(
                    "least-informative contexts carry only p_b and t_b".into(),
                ));
            }
            BurstProfile::Least { burst_prob: p_b, burst_len: spec.t_b }
        }
        InformativenessConfig::Moderate => {
            let i_b = spec.i_b.ok_or_else(|| {
                HarnessError::Config("moderately-informative contexts need i_b".into())
            })?;
            if spec.p_b.is_some() || spec.t_0.is_some() {
                return Err(HarnessError::Config(
                    "moderately-informative contexts carry only i_b and t_b".into(),
                ));
            }
            BurstProfile::Moderate { active: i_b != 0, burst_len: spec.t_b }
        }
        InformativenessConfig::Most => {
            let i_b = spec.i_b.ok_or_else(|| {
                HarnessError::Config("most-informative contexts need i_b".into())
            })?;
            let t_0 = spec.t_0.ok_or_else(|| {
                HarnessError::Config("most-informative contexts need t_0".into())
            })?;
            if spec.p_b.is_some() {
                return Err(HarnessError::Config(
                    "most-informative contexts carry i_b, t_b, t_0".into(),
                ));
            }
            BurstProfile::Most { active: i_b != 0, burst_len: spec.t_b, burst_start: t_0 }
        }
    };
    Ok(PhyContext::new(burst, snr_db, inr_db)?)
}

fn informativeness(level: InformativenessConfig) -> Informativeness {
    match level {
        InformativenessConfig::Least => Informativeness::Least,
        InformativenessConfig::Moderate => Informativeness::Moderate,
        InformativenessConfig::Most => Informativeness::Most,
    }
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig, counts: &CountsConfig, master_seed: u64) -> Result<Self> {
        match cfg {
            ScenarioConfig::Gaussian(g) => Self::build_gaussian(g, counts),
            ScenarioConfig::Phy(p) => Self::build_phy(p, counts, master_seed),
            ScenarioConfig::Ingested(i) => Self::build_ingested(i),
        }
    }

    fn build_gaussian(cfg: &GaussianScenarioConfig, counts: &CountsConfig) -> Result<Self> {
        let mut contexts = BTreeMap::new();
        let mut records = Vec::new();
        let mut train_ids = Vec::new();
        let mut cal_ids = Vec::new();
        for spec in &cfg.contexts {
            let ctx = GaussianToyContext::new(spec.mean, spec.variance)?;
            records.push(ContextRecord::new(spec.id.clone(), ctx.features())?);
            match spec.split {
                crate::config::SplitTag::Train => train_ids.push(spec.id.clone()),
                crate::config::SplitTag::Cal => cal_ids.push(spec.id.clone()),
            }
            if contexts.insert(spec.id.clone(), ctx).is_some() {
                return Err(HarnessError::Config(format!(
                    "duplicate gaussian context id '{}'",
                    spec.id
                )));
            }
        }
        let catalog = ContextCatalog::new(records)?;
        train_ids.sort();
        cal_ids.sort();
        check_counts(counts, train_ids.len(), cal_ids.len())?;
        let test_pool = resolve_test_pool(cfg.test_pool.as_deref(), &cal_ids, &catalog)?;
        Ok(Self {
            catalog,
            train_ids,
            cal_ids,
            test_pool,
            label_count: 2,
            backend: Backend::Gaussian { contexts },
        })
    }

    fn build_phy(cfg: &PhyScenarioConfig, counts: &CountsConfig, master_seed: u64) -> Result<Self> {
        let (g1, g2) = cfg.code_polynomials.unwrap_or((7, 5));
        let code = ConvCode::new(g1, g2)?;
        let grid: Vec<PhyContext> = match &cfg.grid {
            Some(specs) => specs
                .iter()
                .map(|s| phy_context_from_spec(s, cfg.informativeness, cfg.snr_db, cfg.inr_db))
                .collect::<Result<_>>()?,
            None => default_grid(informativeness(cfg.informativeness), cfg.snr_db, cfg.inr_db),
        };

        let mut contexts = BTreeMap::new();
        let mut records = Vec::new();
        for ctx in grid {
            let id = ctx.id();
            records.push(ContextRecord::new(id.clone(), ctx.features())?);
            if contexts.insert(id.clone(), ctx).is_some() {
                return Err(HarnessError::Config(format!("duplicate grid context '{id}'")));
            }
        }
        let catalog = ContextCatalog::new(records)?;

        let train_n = counts.train_contexts.ok_or_else(|| {
            HarnessError::Config("counts.train_contexts is required for the link scenario".into())
        })?;
        let cal_n = counts.cal_contexts.ok_or_else(|| {
            HarnessError::Config("counts.cal_contexts is required for the link scenario".into())
        })?;
        if cal_n == 0 || train_n + cal_n > contexts.len() {
            return Err(HarnessError::Config(format!(
                "split sizes {train_n}+{cal_n} do not fit a grid of {}",
                contexts.len()
            )));
        }

        // The calibration split is the tail of one seeded shuffle, so it
        // stays fixed while the training size is swept.
        let mut ids: Vec<String> = contexts.keys().cloned().collect();
        let mut rng = run_stream(master_seed, stage::SPLIT);
        for i in 0..ids.len() {
            let j = rng.random_range(i..ids.len());
            ids.swap(i, j);
        }
        let mut cal_ids: Vec<String> = ids[ids.len() - cal_n..].to_vec();
        let mut train_ids: Vec<String> = ids[..train_n].to_vec();
        cal_ids.sort();
        train_ids.sort();

        let test_pool = resolve_test_pool(cfg.test_pool.as_deref(), &cal_ids, &catalog)?;
        let book = Codebook::new(&code, cfg.snr_db)?;
        Ok(Self {
            catalog,
            train_ids,
            cal_ids,
            test_pool,
            label_count: phy_scenario::MESSAGE_COUNT,
            backend: Backend::Phy { contexts, code, book },
        })
    }

    fn build_ingested(cfg: &IngestedScenarioConfig) -> Result<Self> {
        let data = ingest_dataset(&cfg.path)?;
        let test_pool = data.cal_ids.clone();
        Ok(Self {
            catalog: data.catalog,
            train_ids: data.train_ids,
            cal_ids: data.cal_ids,
            test_pool,
            label_count: data.label_count,
            backend: Backend::Ingested { samples: data.samples, mode: data.mode },
        })
    }

    pub fn catalog(&self) -> &ContextCatalog {
        &self.catalog
    }

    pub fn train_ids(&self) -> &[String] {
        &self.train_ids
    }

    pub fn cal_ids(&self) -> &[String] {
        &self.cal_ids
    }

    pub fn test_pool(&self) -> &[String] {
        &self.test_pool
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    /// Whether exact covariate likelihood ratios are available.
    pub fn has_oracle(&self) -> bool {
        !matches!(self.backend, Backend::Ingested { .. })
    }

    /// Whether drawn samples carry per-label scores (everything except
    /// feature-mode ingested data).
    pub fn has_scores(&self) -> bool {
        !matches!(
            self.backend,
            Backend::Ingested { mode: IngestMode::Features, .. }
        )
    }

    pub fn context_record(&self, id: &str) -> Result<&ContextRecord> {
        self.catalog
            .get(id)
            .ok_or_else(|| HarnessError::Config(format!("unknown context '{id}'")))
    }

    /// Draw `n` fresh samples of one context. Synthetic backends simulate;
    /// the ingested backend subsamples its stored rows without replacement.
    pub fn draw(&self, id: &str, n: usize, rng: &mut ChaCha12Rng) -> Result<Vec<DrawnSample>> {
        match &self.backend {
            Backend::Gaussian { contexts } => {
                let ctx = contexts
                    .get(id)
                    .ok_or_else(|| HarnessError::Config(format!("unknown context '{id}'")))?;
                Ok((0..n)
                    .map(|_| {
                        let x = gaussian::sample(ctx, rng);
                        let label = usize::from(rng.random::<f64>() < sigmoid(x));
                        let scores =
                            ScoreVector::new(vec![softplus(x), softplus(-x)]).expect("finite");
                        DrawnSample { features: vec![x], label, scores: Some(scores) }
                    })
                    .collect())
            }
            Backend::Phy { contexts, code, book } => {
                let ctx = contexts
                    .get(id)
                    .ok_or_else(|| HarnessError::Config(format!("unknown context '{id}'")))?;
                (0..n)
                    .map(|_| {
                        let frame = generate_frame(code, ctx, rng)?;
                        let scores = book.scores(&frame.received)?;
                        let features = frame
                            .received
                            .iter()
                            .flat_map(|c| [c.re, c.im])
                            .collect();
                        Ok(DrawnSample {
                            features,
                            label: frame.message as usize,
                            scores: Some(scores),
                        })
                    })
                    .collect()
            }
            Backend::Ingested { samples, .. } => {
                let pool = samples
                    .get(id)
                    .ok_or_else(|| HarnessError::Config(format!("unknown context '{id}'")))?;
                if n > pool.len() {
                    return Err(HarnessError::Config(format!(
                        "context '{id}' has {} stored samples, {n} requested",
                        pool.len()
                    )));
                }
                let mut idx: Vec<usize> = (0..pool.len()).collect();
                for i in 0..n {
                    let j = rng.random_range(i..idx.len());
                    idx.swap(i, j);
                }
                Ok(idx[..n]
                    .iter()
                    .map(|&i| DrawnSample {
                        features: pool[i].features.clone(),
                        label: pool[i].label,
                        scores: pool[i].scores.clone(),
                    })
                    .collect())
            }
        }
    }

    /// Exact covariate likelihood ratio `p(x | test) / p(x | calibration)`.
    pub fn exact_pair_weight(&self, features: &[f64], test: &str, cal: &str) -> Result<f64> {
        match &self.backend {
            Backend::Gaussian { contexts } => {
                let te = lookup(contexts, test)?;
                let ca = lookup(contexts, cal)?;
                Ok(gaussian::ratio(features[0], te, ca))
            }
            Backend::Phy { contexts, book, .. } => {
                let frame = features_to_frame(features)?;
                Ok(book.likelihood_ratio(&frame, lookup(contexts, test)?, lookup(contexts, cal)?)?)
            }
            Backend::Ingested { .. } => Err(HarnessError::Config(
                "ingested data has no exact likelihood oracle".into(),
            )),
        }
    }

    /// Exact ratio of the test density to the uniform mixture of the
    /// calibration contexts' densities.
    pub fn exact_mixture_weight(&self, features: &[f64], test: &str, cals: &[String]) -> Result<f64> {
        if cals.is_empty() {
            return Err(HarnessError::Config("empty calibration mixture".into()));
        }
        match &self.backend {
            Backend::Gaussian { contexts } => {
                let lp_te = gaussian::log_density(lookup(contexts, test)?, features[0]);
                let lps: Vec<f64> = cals
                    .iter()
                    .map(|id| Ok(gaussian::log_density(lookup(contexts, id)?, features[0])))
                    .collect::<Result<_>>()?;
                Ok((lp_te - log_mean_exp(&lps)).exp())
            }
            Backend::Phy { contexts, book, .. } => {
                let frame = features_to_frame(features)?;
                let d = book.distances(&frame)?;
                let lp_te = book.log_likelihood_from(&d, lookup(contexts, test)?);
                let lps: Vec<f64> = cals
                    .iter()
                    .map(|id| Ok(book.log_likelihood_from(&d, lookup(contexts, id)?)))
                    .collect::<Result<_>>()?;
                Ok((lp_te - log_mean_exp(&lps)).exp())
            }
            Backend::Ingested { .. } => Err(HarnessError::Config(
                "ingested data has no exact likelihood oracle".into(),
            )),
        }
    }

    /// Static meta-training pool: `samples_per_context` draws of every
    /// training context, each context on its own derived stream.
    pub fn training_covariates(
        &self,
        samples_per_context: usize,
        master_seed: u64,
    ) -> Result<(BTreeMap<String, Vec<Vec<f64>>>, BTreeMap<String, ContextRecord>)> {
        let mut covariates = BTreeMap::new();
        let mut contexts = BTreeMap::new();
        for (idx, id) in self.train_ids.iter().enumerate() {
            let mut rng =
                crate::rng::cell_stream(master_seed, stage::META_DATA, idx as u64, 0);
            let samples = self.draw(id, samples_per_context, &mut rng)?;
            covariates.insert(
                id.clone(),
                samples.into_iter().map(|s| s.features).collect(),
            );
            contexts.insert(id.clone(), self.context_record(id)?.clone());
        }
        Ok((covariates, contexts))
    }
}

fn lookup<'a, V>(map: &'a BTreeMap<String, V>, id: &str) -> Result<&'a V> {
    map.get(id)
        .ok_or_else(|| HarnessError::Config(format!("unknown context '{id}'")))
}

fn log_mean_exp(terms: &[f64]) -> f64 {
    let best = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    best + (terms.iter().map(|t| (t - best).exp()).sum::<f64>() / terms.len() as f64).ln()
}

fn check_counts(counts: &CountsConfig, train: usize, cal: usize) -> Result<()> {
    if let Some(expect) = counts.train_contexts {
        if expect != train {
            return Err(HarnessError::Config(format!(
                "counts.train_contexts = {expect} but the scenario defines {train}"
            )));
        }
    }
    if let Some(expect) = counts.cal_contexts {
        if expect != cal {
            return Err(HarnessError::Config(format!(
                "counts.cal_contexts = {expect} but the scenario defines {cal}"
            )));
        }
    }
    if cal == 0 {
        return Err(HarnessError::Config(
            "at least one calibration context is required".into(),
        ));
    }
    Ok(())
}

fn resolve_test_pool(
    requested: Option<&[String]>,
    cal_ids: &[String],
    catalog: &ContextCatalog,
) -> Result<Vec<String>> {
    match requested {
        None => Ok(cal_ids.to_vec()),
        Some(ids) => {
            if ids.is_empty() {
                return Err(HarnessError::Config("explicit test_pool is empty".into()));
            }
            for id in ids {
                if catalog.get(id).is_none() {
                    return Err(HarnessError::Config(format!(
                        "test_pool context '{id}' is not in the catalog"
                    )));
                }
            }
            Ok(ids.to_vec())
        }
    }
}
