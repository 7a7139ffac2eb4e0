use serde::{Deserialize, Serialize};

use super::{fid, max_iou, overlap, relation_error, CorruptionClassifier, MetricsError};
use crate::model::{Difficulty, LayoutGraph};
use crate::relations::{derive_relations, RelationMatrix};

/// One generated layout and what it is judged against.
#[derive(Debug, Clone)]
pub struct EvalSample {
    pub generated: LayoutGraph,
    pub reference: LayoutGraph,
    /// Relations the generation was asked for; derived from `reference` when absent.
    pub target: Option<RelationMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyBreakdown {
    pub difficulty: Difficulty,
    pub count: usize,
    pub re: f64,
    pub miou: f64,
    pub ol: f64,
    /// Fréchet distance within this bucket only; it does not average into
    /// the overall value.
    pub fid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: String,
    pub dataset: String,
    /// Fingerprint of the classifier that produced the FID features.
    pub extractor: Option<String>,
    pub count: usize,
    pub re: f64,
    pub miou: f64,
    pub ol: f64,
    pub fid: Option<f64>,
    pub per_difficulty: Vec<DifficultyBreakdown>,
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub task: String,
    pub dataset: String,
    #[serde(rename = "RE")]
    pub re: f64,
    #[serde(rename = "mIoU")]
    pub miou: f64,
    #[serde(rename = "OL")]
    pub ol: f64,
    #[serde(rename = "FID")]
    pub fid: Option<f64>,
    pub difficulty: String,
}

struct Scores {
    re: f64,
    miou: f64,
    ol: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> (f64, usize) {
    let (s, n) = xs.fold((0.0, 0), |(s, n), x| (s + x, n + 1));
    (if n == 0 { 0.0 } else { s / n as f64 }, n)
}

/// Scores every sample and aggregates overall and per difficulty of the
/// reference. RE, mIoU and OL are per-layout means, so the buckets' values
/// weighted by count give the overall value. FID needs `extractor`.
pub fn evaluate(
    samples: &[EvalSample],
    extractor: Option<&CorruptionClassifier>,
    task: &str,
    dataset: &str,
) -> Result<MetricReport, MetricsError> {
    let scores = samples
        .iter()
        .map(|s| {
            let target = s.target.clone().unwrap_or_else(|| derive_relations(&s.reference));
            Ok(Scores {
                re: relation_error(&derive_relations(&s.generated), &target)?,
                miou: max_iou(&s.generated, &s.reference),
                ol: overlap(&s.generated),
            })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    let feats = extractor.map(|x| {
        let gen: Vec<Vec<f64>> = samples.iter().map(|s| x.features(&s.generated)).collect();
        let refs: Vec<Vec<f64>> = samples.iter().map(|s| x.features(&s.reference)).collect();
        (gen, refs)
    });
    let fid_of = |keep: &dyn Fn(usize) -> bool| -> Result<Option<f64>, MetricsError> {
        let Some((gen, refs)) = &feats else { return Ok(None) };
        let pick = |set: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            set.iter().enumerate().filter(|(k, _)| keep(*k)).map(|(_, v)| v.clone()).collect()
        };
        let (a, b) = (pick(gen), pick(refs));
        if a.is_empty() {
            return Ok(None);
        }
        fid(&a, &b).map(Some)
    };

    let mut per_difficulty = Vec::new();
    for d in Difficulty::ALL {
        let keep = |k: usize| samples[k].reference.difficulty() == d;
        let idx: Vec<usize> = (0..samples.len()).filter(|&k| keep(k)).collect();
        if idx.is_empty() {
            continue;
        }
        per_difficulty.push(DifficultyBreakdown {
            difficulty: d,
            count: idx.len(),
            re: mean(idx.iter().map(|&k| scores[k].re)).0,
            miou: mean(idx.iter().map(|&k| scores[k].miou)).0,
            ol: mean(idx.iter().map(|&k| scores[k].ol)).0,
            fid: fid_of(&keep)?,
        });
    }
    Ok(MetricReport {
        task: task.to_string(),
        dataset: dataset.to_string(),
        extractor: extractor.map(CorruptionClassifier::fingerprint),
        count: samples.len(),
        re: mean(scores.iter().map(|s| s.re)).0,
        miou: mean(scores.iter().map(|s| s.miou)).0,
        ol: mean(scores.iter().map(|s| s.ol)).0,
        fid: fid_of(&|_| true)?,
        per_difficulty,
    })
}

impl MetricReport {
    /// The overall row first, labelled `all`, then one row per difficulty.
    pub fn rows(&self) -> Vec<MetricRow> {
        let row = |difficulty: &str, re, miou, ol, fid| MetricRow {
            task: self.task.clone(),
            dataset: self.dataset.clone(),
            re,
            miou,
            ol,
            fid,
            difficulty: difficulty.to_string(),
        };
        let mut out = vec![row("all", self.re, self.miou, self.ol, self.fid)];
        for b in &self.per_difficulty {
            out.push(row(b.difficulty.as_str(), b.re, b.miou, b.ol, b.fid));
        }
        out
    }

    pub fn to_csv(&self) -> Result<String, MetricsError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.rows() {
            w.serialize(row).map_err(|e| MetricsError::Csv(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| MetricsError::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| MetricsError::Csv(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
