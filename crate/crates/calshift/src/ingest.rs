//! CSV dataset ingestion. Two schemas are accepted, distinguished by the
//! header: feature mode `context_id,split,y,x_0..x_{d-1},c_0..c_{m-1}`
//! carries raw covariates (enough to meta-train a ratio model), and score
//! mode `context_id,split,y,s_0..s_{k-1},c_0..c_{m-1}` carries per-label
//! scores from an external model (enough to build prediction sets; the
//! score vector doubles as the covariate for ratio estimation).

use std::collections::BTreeMap;
use std::path::Path;

use context_select::{ContextCatalog, ContextRecord};
use cp_core::ScoreVector;

use crate::config::SplitTag;
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestMode {
    /// Raw covariate columns; no scores available.
    Features,
    /// Per-label score columns; scores double as covariates.
    Scores,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestedSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub scores: Option<ScoreVector>,
}

#[derive(Debug)]
pub struct IngestedDataset {
    pub catalog: ContextCatalog,
    pub train_ids: Vec<String>,
    pub cal_ids: Vec<String>,
    pub samples: BTreeMap<String, Vec<IngestedSample>>,
    pub label_count: usize,
    pub mode: IngestMode,
}

fn bad(line: u64, msg: impl Into<String>) -> HarnessError {
    HarnessError::IngestAt {
        line,
        msg: msg.into(),
    }
}

/// Validate an indexed column run like `x_0, x_1, ...` starting at
/// `columns[from]`; returns the count.
fn indexed_run(columns: &[&str], from: usize, prefix: &str) -> usize {
    let mut count = 0;
    while let Some(name) = columns.get(from + count) {
        if *name == format!("{prefix}_{count}") {
            count += 1;
        } else {
            break;
        }
    }
    count
}

pub fn ingest_dataset(path: &Path) -> Result<IngestedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::Ingest(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| HarnessError::Ingest(format!("unreadable header: {e}")))?
        .clone();
    let columns: Vec<&str> = headers.iter().collect();
    if columns.len() < 5 || columns[0] != "context_id" || columns[1] != "split" || columns[2] != "y"
    {
        return Err(HarnessError::Ingest(
            "header must start with context_id,split,y".into(),
        ));
    }

    let (mode, value_cols) = if columns[3].starts_with("x_") {
        (IngestMode::Features, indexed_run(&columns, 3, "x"))
    } else if columns[3].starts_with("s_") {
        (IngestMode::Scores, indexed_run(&columns, 3, "s"))
    } else {
        return Err(HarnessError::Ingest(format!(
            "column 4 must begin the x_* or s_* block, got '{}'",
            columns[3]
        )));
    };
    if value_cols == 0 {
        return Err(HarnessError::Ingest(
            "value columns must be indexed contiguously from 0".into(),
        ));
    }
    let context_cols = indexed_run(&columns, 3 + value_cols, "c");
    if context_cols == 0 {
        return Err(HarnessError::Ingest(
            "at least one contiguous c_* column is required".into(),
        ));
    }
    let expected = 3 + value_cols + context_cols;
    if columns.len() != expected {
        return Err(HarnessError::Ingest(format!(
            "unknown column '{}' after the c_* block",
            columns[expected.min(columns.len() - 1)]
        )));
    }

    let mut samples: BTreeMap<String, Vec<IngestedSample>> = BTreeMap::new();
    let mut context_features: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut splits: BTreeMap<String, SplitTag> = BTreeMap::new();
    let mut max_label = 0usize;

    for row in reader.records() {
        let record = row.map_err(|e| {
            let line = e.position().map_or(0, csv::Position::line);
            bad(line, format!("{e}"))
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        if record.len() != expected {
            return Err(bad(
                line,
                format!("expected {expected} fields, found {}", record.len()),
            ));
        }

        let context_id = record[0].to_string();
        if context_id.is_empty() {
            return Err(bad(line, "empty context_id"));
        }
        let split = match &record[1] {
            "train" => SplitTag::Train,
            "cal" => SplitTag::Cal,
            other => return Err(bad(line, format!("split must be train or cal, got '{other}'"))),
        };
        let label: usize = record[2]
            .parse()
            .map_err(|_| bad(line, format!("label '{}' is not a nonnegative integer", &record[2])))?;
        max_label = max_label.max(label);

        let mut parse_f64 = |idx: usize| -> Result<f64> {
            let raw = &record[idx];
            let v: f64 = raw
                .parse()
                .map_err(|_| bad(line, format!("'{raw}' in column {} is not a number", columns[idx])))?;
            if !v.is_finite() {
                return Err(bad(
                    line,
                    format!("non-finite value '{raw}' in column {}", columns[idx]),
                ));
            }
            Ok(v)
        };

        let values: Vec<f64> = (3..3 + value_cols)
            .map(&mut parse_f64)
            .collect::<Result<_>>()?;
        let ctx_vec: Vec<f64> = (3 + value_cols..expected)
            .map(&mut parse_f64)
            .collect::<Result<_>>()?;

        match context_features.get(&context_id) {
            None => {
                context_features.insert(context_id.clone(), ctx_vec);
                splits.insert(context_id.clone(), split);
            }
            Some(existing) => {
                if *existing != ctx_vec {
                    return Err(bad(
                        line,
                        format!("context '{context_id}' has inconsistent c_* features"),
                    ));
                }
                if splits[&context_id] != split {
                    return Err(bad(
                        line,
                        format!("context '{context_id}' appears in both splits"),
                    ));
                }
            }
        }

        let scores = match mode {
            IngestMode::Scores => {
                if label >= value_cols {
                    return Err(bad(
                        line,
                        format!("label {label} outside the {value_cols} score columns"),
                    ));
                }
                Some(ScoreVector::new(values.clone())?)
            }
            IngestMode::Features => None,
        };
        samples.entry(context_id).or_default().push(IngestedSample {
            features: values,
            label,
            scores,
        });
    }

    if samples.is_empty() {
        return Err(HarnessError::Ingest("dataset has no rows".into()));
    }

    let records = context_features
        .iter()
        .map(|(id, features)| ContextRecord::new(id.clone(), features.clone()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let catalog = ContextCatalog::new(records)?;
    let train_ids: Vec<String> = splits
        .iter()
        .filter(|(_, s)| **s == SplitTag::Train)
        .map(|(id, _)| id.clone())
        .collect();
    let cal_ids: Vec<String> = splits
        .iter()
        .filter(|(_, s)| **s == SplitTag::Cal)
        .map(|(id, _)| id.clone())
        .collect();
    let label_count = match mode {
        IngestMode::Scores => samples
            .values()
            .flatten()
            .next()
            .and_then(|s| s.scores.as_ref())
            .map_or(0, ScoreVector::label_count),
        IngestMode::Features => max_label + 1,
    };

    Ok(IngestedDataset {
        catalog,
        train_ids,
        cal_ids,
        samples,
        label_count,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn well_formed_feature_file_builds_catalog_and_samples() {
        let f = write_file(
            "context_id,split,y,x_0,x_1,c_0\n\
             a,cal,0,0.1,0.2,1.0\n\
             a,cal,1,0.3,0.4,1.0\n\
             b,train,0,0.5,0.6,2.0\n\
             b,train,1,0.7,0.8,2.0\n",
        );
        let data = ingest_dataset(f.path()).unwrap();
        assert_eq!(data.catalog.len(), 2);
        assert_eq!(data.samples["a"].len(), 2);
        assert_eq!(data.samples["b"].len(), 2);
        assert_eq!(data.mode, IngestMode::Features);
        assert_eq!(data.label_count, 2);
        assert_eq!(data.cal_ids, vec!["a"]);
        assert_eq!(data.train_ids, vec!["b"]);
    }

    #[test]
    fn nan_scores_are_rejected_with_the_line_number() {
        let f = write_file(
            "context_id,split,y,s_0,s_1,c_0\n\
             a,cal,0,0.1,0.2,1.0\n\
             a,cal,1,NaN,0.4,1.0\n",
        );
        match ingest_dataset(f.path()) {
            Err(HarnessError::IngestAt { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected line-tagged error, got {other:?}"),
        }
    }

    #[test]
    fn score_mode_yields_score_vectors_of_the_column_count() {
        let f = write_file(
            "context_id,split,y,s_0,s_1,s_2,s_3,c_0,c_1\n\
             a,cal,2,0.1,0.2,0.05,0.9,1.0,0.0\n\
             b,cal,0,0.3,0.4,0.6,0.8,0.0,1.0\n",
        );
        let data = ingest_dataset(f.path()).unwrap();
        assert_eq!(data.mode, IngestMode::Scores);
        assert_eq!(data.label_count, 4);
        let s = data.samples["a"][0].scores.as_ref().unwrap();
        assert_eq!(s.label_count(), 4);
        assert_eq!(data.samples["a"][0].features.len(), 4);
    }

    #[test]
    fn schema_violations_are_descriptive() {
        let bad_header = write_file("context_id,split,y,w_0,c_0\na,cal,0,1,2\n");
        assert!(ingest_dataset(bad_header.path()).is_err());

        let ragged = write_file("context_id,split,y,x_0,c_0\na,cal,0,1.0\n");
        match ingest_dataset(ragged.path()) {
            Err(HarnessError::IngestAt { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected line-tagged error, got {other:?}"),
        }

        let bad_split = write_file("context_id,split,y,x_0,c_0\na,test,0,1.0,2.0\n");
        assert!(ingest_dataset(bad_split.path()).is_err());

        let no_context_cols = write_file("context_id,split,y,x_0\na,cal,0,1.0\n");
        assert!(ingest_dataset(no_context_cols.path()).is_err());

        let label_outside = write_file("context_id,split,y,s_0,s_1,c_0\na,cal,2,0.5,0.5,1.0\n");
        assert!(ingest_dataset(label_outside.path()).is_err());

        let inconsistent = write_file(
            "context_id,split,y,x_0,c_0\n\
             a,cal,0,1.0,2.0\n\
             a,cal,0,1.0,3.0\n",
        );
        match ingest_dataset(inconsistent.path()) {
            Err(HarnessError::IngestAt { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected line-tagged error, got {other:?}"),
        }
    }
}
