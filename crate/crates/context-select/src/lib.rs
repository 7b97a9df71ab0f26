//! Calibration-context selection: a cosine distance over context feature
//! vectors and three rules for picking which contexts supply calibration
//! data for a given test context (single nearest, the k nearest, or every
//! context within a distance threshold).
//!
//! All selectors order their output deterministically (ascending distance,
//! then lexicographic id) so experiment runs are reproducible regardless of
//! catalog iteration order.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, SelectError>;

/// A context id bound to its numeric feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextRecord {
    pub id: String,
    pub features: Vec<f64>,
}

impl ContextRecord {
    pub fn new(id: impl Into<String>, features: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if features.is_empty() {
            return Err(SelectError::InvalidInput(format!(
                "context '{id}' has an empty feature vector"
            )));
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(SelectError::InvalidInput(format!(
                "context '{id}' has a non-finite feature {v}"
            )));
        }
        Ok(Self { id, features })
    }
}

/// Nonempty collection of contexts with unique ids and equal dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextCatalog {
    entries: BTreeMap<String, ContextRecord>,
}

impl ContextCatalog {
    pub fn new(records: impl IntoIterator<Item = ContextRecord>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut dim = None;
        for record in records {
            match dim {
                None => dim = Some(record.features.len()),
                Some(d) if d != record.features.len() => {
                    return Err(SelectError::InvalidInput(format!(
                        "context '{}' has dimension {} but the catalog has {d}",
                        record.id,
                        record.features.len()
                    )))
                }
                _ => {}
            }
            if entries.insert(record.id.clone(), record).is_some() {
                return Err(SelectError::InvalidInput(
                    "duplicate context id in catalog".into(),
                ));
            }
        }
        if entries.is_empty() {
            return Err(SelectError::InvalidInput("catalog is empty".into()));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, id: &str) -> Option<&ContextRecord> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn records(&self) -> impl Iterator<Item = &ContextRecord> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The catalog with one id removed; `None` if that would empty it.
    pub fn without(&self, id: &str) -> Option<ContextCatalog> {
        if !self.entries.contains_key(id) || self.entries.len() == 1 {
            return None;
        }
        let entries = self
            .entries
            .iter()
            .filter(|(k, _)| k.as_str() != id)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Some(ContextCatalog { entries })
    }
}

/// Cosine distance `1 - (a . b) / (|a| |b|)`, in `[0, 2]`.
///
/// A zero-norm vector has no direction; the distance is reported as the
/// agnostic midpoint 1 and a warning is logged, since one-hot encoded
/// contexts never hit this but ingested numeric contexts might.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SelectError::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        log::warn!("cosine distance of a zero-norm context vector; reporting 1");
        return Ok(1.0);
    }
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

fn ranked_by_distance(test: &ContextRecord, catalog: &ContextCatalog) -> Result<Vec<(f64, String)>> {
    let mut ranked = Vec::with_capacity(catalog.len());
    for record in catalog.records() {
        let d = cosine_distance(&test.features, &record.features)?;
        ranked.push((d, record.id.clone()));
    }
    ranked.sort_by(|(da, ia), (db, ib)| da.total_cmp(db).then_with(|| ia.cmp(ib)));
    Ok(ranked)
}

/// The id at minimum cosine distance from `test`; ties broken by
/// lexicographically smallest id.
pub fn select_single(test: &ContextRecord, catalog: &ContextCatalog) -> Result<String> {
    let ranked = ranked_by_distance(test, catalog)?;
    Ok(ranked.into_iter().next().expect("catalog is nonempty").1)
}

/// The `k` nearest context ids, ordered by ascending distance then id.
pub fn select_fixed_k(
    test: &ContextRecord,
    catalog: &ContextCatalog,
    k: usize,
) -> Result<Vec<String>> {
    if k == 0 || k > catalog.len() {
        return Err(SelectError::InvalidInput(format!(
            "k must lie in 1..={}, got {k}",
            catalog.len()
        )));
    }
    let ranked = ranked_by_distance(test, catalog)?;
    Ok(ranked.into_iter().take(k).map(|(_, id)| id).collect())
}

/// Result of the adaptive rule, carrying the fallback flag for when no
/// context fell within the threshold and the nearest one was substituted.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveSelection {
    pub ids: Vec<String>,
    pub fell_back: bool,
}

/// Every context within distance `epsilon`, ordered by ascending distance
/// then id. An empty result falls back to the single nearest context so
/// threshold sweeps never abort.
pub fn select_adaptive(
    test: &ContextRecord,
    catalog: &ContextCatalog,
    epsilon: f64,
) -> Result<AdaptiveSelection> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(SelectError::InvalidInput(format!(
            "epsilon must be finite and nonnegative, got {epsilon}"
        )));
    }
    let ranked = ranked_by_distance(test, catalog)?;
    let ids: Vec<String> = ranked
        .iter()
        .filter(|(d, _)| *d <= epsilon)
        .map(|(_, id)| id.clone())
        .collect();
    if ids.is_empty() {
        return Ok(AdaptiveSelection {
            ids: vec![ranked.into_iter().next().expect("catalog is nonempty").1],
            fell_back: true,
        });
    }
    Ok(AdaptiveSelection {
        ids,
        fell_back: false,
    })
}
