//! `layout-workbench` subcommands.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 infeasible
//! generation.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{run_task, AppError, ServiceConfig, Task, TaskOptions, TaskSpec, EXIT_OK, EXIT_USAGE};
use crate::dataset::{
    build_triplets, mask_graph, read_manifest, split, store_layout, sub_seed, synthetic_corpus, write_manifest, Corpus,
    ManifestEntry, SplitName,
};
use crate::encoder::{
    grad_check, ranking_accuracy, train, CheckSample, EncoderConfig, EncoderParams, GraphInput, LossConfig, TrainConfig,
    TrainingSet,
};
use crate::metrics::{train_corruption_classifier, ClassifierConfig, CorruptionClassifier};
use crate::model::{parse_layout, parse_rico_document, serialize_layout, Canvas, LayoutGraph};
use crate::relations::{derive_relations, validate, RelationMatrix};
use crate::synth::{complete, insert_random_nodes, BackendRegistry, ConstraintMode, GenerationRequest, SynthError, SOLVER_ID};

#[derive(Debug, Parser)]
#[command(name = "layout-workbench", version, about = "Relation-constrained UI layout toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a directory of RICO view hierarchies into a corpus.
    Ingest {
        #[arg(long)]
        rico_dir: PathBuf,
        /// Corpus directory; the manifest is written as manifest.jsonl.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        canvas: CanvasArgs,
    },
    /// Write a seeded synthetic corpus.
    SynthCorpus {
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        min_nodes: usize,
        #[arg(long, default_value_t = 32)]
        max_nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign a 7:2:1 train/val/test split to a manifest.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Split file; defaults to split.json next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build masked-positive triplets for one split.
    Triplets {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the graph encoder on the train split.
    TrainEncoder {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        /// Narrow encoder widths, for quick runs.
        #[arg(long)]
        compact: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Generate a layout from a relation matrix file.
    Generate {
        #[arg(long)]
        relations: PathBuf,
        #[command(flatten)]
        canvas: CanvasArgs,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value = "exact")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        insert_random: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mask part of a layout and complete it against its own relations.
    Complete {
        /// Layout in Listing form.
        #[arg(long)]
        layout: PathBuf,
        #[command(flatten)]
        canvas: CanvasArgs,
        #[arg(long, default_value_t = 0.15)]
        mask_ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one evaluation task over a corpus and write a metric report.
    Eval {
        #[arg(long)]
        task: Task,
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        /// Report path; `.json` writes JSON, anything else CSV.
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
        /// Only evaluate this split.
        #[arg(long)]
        split: Option<String>,
        #[arg(long, default_value_t = 0.15)]
        mask_ratio: f64,
        #[arg(long, default_value_t = 3)]
        toggles: usize,
        /// Encoder checkpoint whose decoded relations drive ui_gen.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Corruption classifier checkpoint for FID.
        #[arg(long)]
        classifier: Option<PathBuf>,
        /// Train a corruption classifier on the train split (or the whole
        /// corpus) and use it for FID.
        #[arg(long, conflicts_with = "classifier")]
        fit_classifier: bool,
        /// Where to save a fitted classifier.
        #[arg(long, requires = "fit_classifier")]
        save_classifier: Option<PathBuf>,
    },
    /// Start the HTTP service.
    Serve {
        /// TOML or JSON config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
    },
    /// Compare encoder gradients with finite differences.
    GradCheck {
        #[arg(long, default_value_t = 20)]
        graphs: usize,
        #[arg(long, default_value_t = 8)]
        max_nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.01)]
        fraction: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Debug, Args)]
struct CanvasArgs {
    #[arg(long, default_value_t = Canvas::RICO.width)]
    width: u32,
    #[arg(long, default_value_t = Canvas::RICO.height)]
    height: u32,
}

impl CanvasArgs {
    fn canvas(&self) -> Result<Canvas, AppError> {
        Ok(Canvas::new(self.width, self.height)?)
    }
}

#[derive(Debug, Args)]
struct BackendArgs {
    #[arg(long, default_value = SOLVER_ID)]
    backend: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e {
                AppError::Synth(SynthError::Conflicts(c)) => {
                    println!("{}", serde_json::to_string_pretty(c).expect("conflicts serialize"));
                }
                AppError::Synth(SynthError::Infeasible { .. }) => {
                    println!("{}", serde_json::to_string_pretty(&e.body()).expect("json"));
                }
                _ => {}
            }
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(AppError::io(path))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), AppError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(AppError::io(dir))?;
            }
            std::fs::write(p, text).map_err(AppError::io(p))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(AppError::io("<stdout>"))
        }
    }
}

fn parse_split(s: &str) -> Result<SplitName, AppError> {
    match s {
        "train" => Ok(SplitName::Train),
        "val" => Ok(SplitName::Val),
        "test" => Ok(SplitName::Test),
        _ => Err(AppError::Usage(format!("unknown split {s:?}; expected train, val or test"))),
    }
}

fn parse_mode(s: &str) -> Result<ConstraintMode, AppError> {
    match s {
        "exact" => Ok(ConstraintMode::Exact),
        "asserted" => Ok(ConstraintMode::Asserted),
        _ => Err(AppError::Usage(format!("unknown mode {s:?}; expected exact or asserted"))),
    }
}

/// Every layout of a corpus with its derived relations.
fn load_corpus(corpus: &Corpus) -> Result<(Vec<LayoutGraph>, Vec<RelationMatrix>), AppError> {
    let graphs = corpus
        .entries
        .iter()
        .map(|e| corpus.load(e))
        .collect::<Result<Vec<_>, _>>()?;
    let rels = graphs.iter().map(derive_relations).collect();
    Ok((graphs, rels))
}

fn members(corpus: &Corpus, split: SplitName) -> Vec<usize> {
    corpus
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.split == Some(split))
        .map(|(k, _)| k)
        .collect()
}

fn dispatch(cmd: Command) -> Result<(), AppError> {
    match cmd {
        Command::Ingest { rico_dir, out, canvas } => ingest(&rico_dir, &out, canvas.canvas()?),
        Command::SynthCorpus {
            count,
            min_nodes,
            max_nodes,
            seed,
            out,
        } => {
            if min_nodes == 0 || min_nodes > max_nodes {
                return Err(AppError::Usage(format!("bad node range {min_nodes}..={max_nodes}")));
            }
            let graphs = synthetic_corpus(count, min_nodes..=max_nodes, seed)?;
            let entries = graphs
                .iter()
                .enumerate()
                .map(|(k, g)| store_layout(&out, &format!("syn{k:05}"), g))
                .collect::<Result<Vec<_>, _>>()?;
            write_manifest(&out.join("manifest.jsonl"), &entries)?;
            eprintln!("wrote {} layouts to {}", entries.len(), out.display());
            Ok(())
        }
        Command::Split { manifest, seed, out } => {
            let mut entries = read_manifest(&manifest)?;
            let ids: Vec<&str> = entries.iter().map(|e| e.id.as_str()).collect();
            let s = split(&ids, seed)?;
            for e in &mut entries {
                e.split = Some(if s.train.contains(&e.id) {
                    SplitName::Train
                } else if s.val.contains(&e.id) {
                    SplitName::Val
                } else {
                    SplitName::Test
                });
            }
            write_manifest(&manifest, &entries)?;
            let out = out.unwrap_or_else(|| manifest.with_file_name("split.json"));
            let text = serde_json::to_string_pretty(&s).expect("split serializes");
            write_out(Some(&out), &(text + "\n"))?;
            eprintln!("train {} / val {} / test {}", s.train.len(), s.val.len(), s.test.len());
            Ok(())
        }
        Command::Triplets {
            manifest,
            split,
            seed,
            out,
        } => {
            let corpus = Corpus::open(&manifest)?;
            let (graphs, rels) = load_corpus(&corpus)?;
            let ids: Vec<String> = corpus.entries.iter().map(|e| e.id.clone()).collect();
            let members = members(&corpus, parse_split(&split)?);
            let ts = build_triplets(&graphs, &rels, &members, seed)?;
            let mut text = String::new();
            for t in &ts {
                text.push_str(&serde_json::to_string(&t.record(&ids)).expect("records serialize"));
                text.push('\n');
            }
            write_out(Some(&out), &text)?;
            eprintln!("wrote {} triplets", ts.len());
            Ok(())
        }
        Command::TrainEncoder {
            manifest,
            seed,
            epochs,
            compact,
            out,
            loss_csv,
        } => {
            let corpus = Corpus::open(&manifest)?;
            let train_members = members(&corpus, SplitName::Train);
            if train_members.len() < 2 {
                return Err(AppError::Usage("manifest has no train split; run `split` first".into()));
            }
            let (graphs, rels) = load_corpus(&corpus)?;
            let encoder = if compact { EncoderConfig::compact() } else { EncoderConfig::default() };
            let mut cfg = TrainConfig {
                seed,
                ..TrainConfig::default()
            };
            if let Some(e) = epochs {
                cfg.high_epochs = cfg.high_epochs * e / cfg.epochs.max(1);
                cfg.epochs = e;
            }
            let set = TrainingSet::from_corpus(&graphs, &rels, &train_members, seed, &encoder)?;
            let (params, trace) = train(&set, encoder, &cfg)?;
            params.save(&out)?;
            if let Some(p) = loss_csv {
                write_out(Some(&p), &trace.to_csv())?;
            }
            let val = members(&corpus, SplitName::Val);
            if val.len() >= 2 {
                let vs = TrainingSet::from_corpus(&graphs, &rels, &val, sub_seed(seed, 1), &encoder)?;
                let r = ranking_accuracy(&params, &vs)?;
                eprintln!("validation ranking accuracy {:.3}", r.accuracy);
            }
            Ok(())
        }
        Command::Generate {
            relations,
            canvas,
            backend,
            mode,
            insert_random,
            out,
        } => {
            let m: RelationMatrix = serde_json::from_str(&read(&relations)?)
                .map_err(|e| AppError::Usage(format!("{}: {e}", relations.display())))?;
            let conflicts = validate(&m);
            if !conflicts.is_empty() {
                return Err(SynthError::Conflicts(conflicts).into());
            }
            let mut req = GenerationRequest::new(m, canvas.canvas()?)
                .with_seed(backend.seed)
                .with_mode(parse_mode(&mode)?);
            req.backend = backend.backend;
            let mut res = BackendRegistry::with_solver().generate(&req)?;
            if insert_random > 0 {
                res = insert_random_nodes(&res, insert_random, backend.seed);
            }
            write_out(out.as_deref(), &serialize_layout(&res.layout, &res.relations_out)?)
        }
        Command::Complete {
            layout,
            canvas,
            mask_ratio,
            seed,
            out,
        } => {
            let (graph, rels) = parse_layout(&read(&layout)?, canvas.canvas()?)?;
            let masked = mask_graph(&graph, &rels, mask_ratio, seed)?;
            let res = complete(&masked, &rels, seed)?;
            write_out(out.as_deref(), &serialize_layout(&res.layout, &res.relations_out)?)
        }
        Command::Eval {
            task,
            dataset,
            backend,
            out,
            split,
            mask_ratio,
            toggles,
            checkpoint,
            classifier,
            fit_classifier,
            save_classifier,
        } => {
            let mut opts = TaskOptions {
                split: split.as_deref().map(parse_split).transpose()?,
                mask_ratio,
                toggles,
                ..TaskOptions::default()
            };
            if let Some(p) = checkpoint {
                opts.encoder = Some(EncoderParams::load(&p)?);
            }
            if let Some(p) = classifier {
                opts.extractor = Some(CorruptionClassifier::from_json(&read(&p)?)?);
            }
            if fit_classifier {
                let corpus = Corpus::open(&dataset)?;
                let train_ids = members(&corpus, SplitName::Train);
                let pool: Vec<&ManifestEntry> = if train_ids.is_empty() {
                    corpus.entries.iter().collect()
                } else {
                    train_ids.iter().map(|&k| &corpus.entries[k]).collect()
                };
                let clean = pool.iter().map(|e| corpus.load(e)).collect::<Result<Vec<_>, _>>()?;
                let c = train_corruption_classifier(&clean, backend.seed, &ClassifierConfig::default())?;
                eprintln!("classifier held-out accuracy {:.3}", c.held_out_accuracy);
                if let Some(p) = save_classifier {
                    write_out(Some(&p), &c.to_json())?;
                }
                opts.extractor = Some(c);
            }
            let spec = TaskSpec {
                task,
                dataset,
                backend: backend.backend,
                seed: backend.seed,
                output: out,
            };
            let outcome = run_task(&spec, &BackendRegistry::with_solver(), &opts)?;
            for (id, err) in &outcome.failures {
                eprintln!("{id}: {err}");
            }
            let r = &outcome.report;
            eprintln!(
                "{} layouts ({} failed): RE {:.4} mIoU {:.4} OL {:.4}{}",
                r.count,
                outcome.failures.len(),
                r.re,
                r.miou,
                r.ol,
                r.fid.map(|f| format!(" FID {f:.4}")).unwrap_or_default()
            );
            Ok(())
        }
        Command::Serve { config, listen } => {
            let mut cfg = match config {
                Some(p) => ServiceConfig::load(&p)?,
                None => ServiceConfig::default(),
            };
            if let Some(l) = listen {
                cfg.listen = l;
            }
            let cfg = cfg.with_env();
            let rt = tokio::runtime::Runtime::new().map_err(AppError::io("<runtime>"))?;
            rt.block_on(super::http::serve(&cfg, BackendRegistry::with_solver()))
        }
        Command::GradCheck {
            graphs,
            max_nodes,
            seed,
            epsilon,
            fraction,
            tolerance,
        } => {
            if max_nodes < 3 {
                return Err(AppError::Usage("max-nodes must be at least 3".into()));
            }
            let pool = graphs.max(2) * 2;
            let layouts = synthetic_corpus(pool, 3..=max_nodes, seed)?;
            let rels: Vec<_> = layouts.iter().map(derive_relations).collect();
            let all: Vec<usize> = (0..pool).collect();
            let ts = build_triplets(&layouts, &rels, &all, seed)?;
            let cfg = EncoderConfig::compact();
            let mut worst: f64 = 0.0;
            for (k, t) in ts.iter().take(graphs).enumerate() {
                let sample = CheckSample {
                    gt: GraphInput::from_graph(&layouts[t.gt], &rels[t.gt], cfg.stub_dim)?,
                    pos: GraphInput::from_masked(&t.pos, cfg.stub_dim)?,
                    neg: GraphInput::from_graph(&layouts[t.neg], &rels[t.neg], cfg.stub_dim)?,
                };
                let params = EncoderParams::init(cfg, sub_seed(seed, k as u64));
                let r = grad_check(&params, &sample, epsilon, fraction, 1.0, &LossConfig::default(), sub_seed(seed, k as u64))?;
                println!("{}", serde_json::to_string(&r).expect("report serializes"));
                worst = worst.max(r.max_relative_error);
            }
            eprintln!("max relative error {worst:.3e}");
            if worst < tolerance {
                Ok(())
            } else {
                Err(AppError::Data(format!("gradient error {worst:.3e} exceeds {tolerance:.0e}")))
            }
        }
    }
}

fn ingest(dir: &Path, out: &Path, canvas: Canvas) -> Result<(), AppError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(AppError::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    let mut entries = Vec::new();
    for path in &files {
        let bytes = std::fs::read(path).map_err(AppError::io(path))?;
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("layout").to_string();
        match parse_rico_document(&bytes, canvas) {
            Ok(graph) => entries.push(store_layout(out, &id, &graph)?),
            Err(e) => eprintln!("skipping {}: {e}", path.display()),
        }
    }
    if entries.is_empty() {
        return Err(AppError::Data(format!("no usable RICO documents in {}", dir.display())));
    }
    write_manifest(&out.join("manifest.jsonl"), &entries)?;
    eprintln!("ingested {} of {} documents", entries.len(), files.len());
    Ok(())
}
