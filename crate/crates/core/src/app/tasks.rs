use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{random_toggles, replay, AppError};
use crate::dataset::{mask_graph, sub_seed, Corpus, ManifestEntry, NodeSlot, SplitName};
use crate::encoder::{embed, predict_relations, reconcile, EncoderParams, GraphInput};
use crate::metrics::{evaluate, CorruptionClassifier, EvalSample, MetricReport};
use crate::model::LayoutGraph;
use crate::relations::{derive_relations, RelationMatrix};
use crate::synth::{
    synthesize_relaxed, BackendRegistry, ConstraintMode, GenerationRequest, GenerationResult, SynthError, SOLVER_ID,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    UiGen,
    Completion,
    GraphEditing,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::UiGen, Task::Completion, Task::GraphEditing];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::UiGen => "ui_gen",
            Task::Completion => "completion",
            Task::GraphEditing => "graph_editing",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s || t.as_str().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown task {s:?}; expected ui_gen, completion or graph_editing"))
    }
}

/// One evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: Task,
    /// Corpus manifest.
    pub dataset: PathBuf,
    pub backend: String,
    pub seed: u64,
    /// Report path; `.json` selects JSON, anything else CSV.
    pub output: PathBuf,
}

#[derive(Debug, Clone)]
pub struct TaskOptions {
    /// Entries evaluated; the whole corpus when unset.
    pub split: Option<SplitName>,
    pub mask_ratio: f64,
    pub toggles: usize,
    /// Decoded relations replace derived ones as the ui_gen target.
    pub encoder: Option<EncoderParams>,
    pub extractor: Option<CorruptionClassifier>,
}

impl Default for TaskOptions {
    fn default() -> Self {
        TaskOptions {
            split: None,
            mask_ratio: 0.15,
            toggles: 3,
            encoder: None,
            extractor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub report: MetricReport,
    /// `(entry id, error)` for every layout the backend could not produce.
    pub failures: Vec<(String, String)>,
}

fn free_request(reference: &LayoutGraph, target: RelationMatrix, backend: &str, seed: u64) -> GenerationRequest {
    let mut req = GenerationRequest::new(target, reference.canvas()).with_seed(seed);
    req.backend = backend.to_string();
    req.known_categories = reference.nodes().iter().map(|n| (n.node_id, n.category)).collect();
    req
}

fn build_request(
    task: Task,
    reference: &LayoutGraph,
    backend: &str,
    seed: u64,
    opts: &TaskOptions,
) -> Result<GenerationRequest, AppError> {
    let derived = derive_relations(reference);
    Ok(match task {
        Task::UiGen => match &opts.encoder {
            Some(params) => {
                let input = GraphInput::from_graph(reference, &derived, params.config.stub_dim)?;
                let decoded = reconcile(&predict_relations(&input, params)?).map_err(|e| AppError::Data(e.to_string()))?;
                let mut req = free_request(reference, decoded, backend, seed);
                req.embedding = Some(embed(&input, params)?.pooled);
                req
            }
            None => free_request(reference, derived, backend, seed),
        },
        Task::Completion => {
            let masked = mask_graph(reference, &derived, opts.mask_ratio, seed)?;
            let mut req = free_request(reference, derived, backend, seed);
            req.known_categories.clear();
            for slot in &masked.nodes {
                if let NodeSlot::Visible(node) = slot {
                    req.free_nodes.remove(&node.node_id);
                    req.fixed_nodes.insert(node.node_id, node.clone());
                }
            }
            req
        }
        Task::GraphEditing => {
            let edits = random_toggles(&derived, opts.toggles, seed);
            let edited = replay(&derived, &edits)?;
            free_request(reference, edited, backend, seed)
        }
    })
}

/// Generates with every entry binding, falling back to asserted mode when
/// the exact request is infeasible.
pub fn generate_auto(registry: &BackendRegistry, req: &GenerationRequest) -> Result<GenerationResult, SynthError> {
    match registry.generate(&req.clone().with_mode(ConstraintMode::Exact)) {
        Err(SynthError::Infeasible { .. }) => registry.generate(&req.clone().with_mode(ConstraintMode::Asserted)),
        other => other,
    }
}

/// [`generate_auto`], then for the solver backend a last asserted attempt
/// that drops the positional entries it cannot honour. Suits decoded
/// matrices, which need not be realisable.
pub fn generate_lenient(registry: &BackendRegistry, req: &GenerationRequest) -> Result<GenerationResult, SynthError> {
    match generate_auto(registry, req) {
        Err(SynthError::Infeasible { .. }) if req.backend == SOLVER_ID => {
            let asserted = req.clone().with_mode(ConstraintMode::Asserted);
            synthesize_relaxed(&asserted, RELAX_ROUNDS).map(|(res, _)| res)
        }
        other => other,
    }
}

const RELAX_ROUNDS: usize = 16;

/// Generates one layout per evaluated corpus entry and scores the set.
/// Entries the backend fails on are listed in the outcome; the report only
/// covers the others.
pub fn run_task(spec: &TaskSpec, registry: &BackendRegistry, opts: &TaskOptions) -> Result<TaskOutcome, AppError> {
    let corpus = Corpus::open(&spec.dataset)?;
    let entries: Vec<&ManifestEntry> = match opts.split {
        Some(s) => corpus.in_split(s),
        None => corpus.entries.iter().collect(),
    };
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (k, entry) in entries.iter().enumerate() {
        let reference = corpus.load(entry)?;
        let seed = sub_seed(spec.seed, k as u64);
        let req = match build_request(spec.task, &reference, &spec.backend, seed, opts) {
            Ok(r) => r,
            Err(AppError::Dataset(e)) => {
                failures.push((entry.id.clone(), e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        let generated = match spec.task {
            Task::GraphEditing => generate_auto(registry, &req),
            Task::UiGen if opts.encoder.is_some() => generate_lenient(registry, &req),
            _ => registry.generate(&req),
        };
        match generated {
            Ok(res) => samples.push(EvalSample {
                generated: res.layout,
                reference,
                target: Some(req.relations),
            }),
            Err(e @ SynthError::UnknownBackend(_)) => return Err(e.into()),
            Err(e) => failures.push((entry.id.clone(), e.to_string())),
        }
    }
    if samples.is_empty() {
        return Err(AppError::NothingGenerated {
            failures: failures.len(),
            first: failures.first().map(|(id, e)| format!("{id}: {e}")).unwrap_or_default(),
        });
    }
    let dataset = spec.dataset.display().to_string();
    let report = evaluate(&samples, opts.extractor.as_ref(), spec.task.as_str(), &dataset)?;
    write_report(&report, &spec.output)?;
    Ok(TaskOutcome { report, failures })
}

pub(crate) fn write_report(report: &MetricReport, path: &Path) -> Result<(), AppError> {
    let text = if path.extension().is_some_and(|e| e == "json") {
        report.to_json()
    } else {
        report.to_csv()?
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(AppError::io(dir))?;
    }
    std::fs::write(path, text).map_err(AppError::io(path))
}
