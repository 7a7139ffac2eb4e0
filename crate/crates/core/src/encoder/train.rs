use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::GraphInput;
use super::loss::{cosine_similarity, LossConfig};
use super::model::{decode_on, decode_relations, embed, encode_on, featurize_on, repair, ParamVars};
use super::params::{EncoderConfig, EncoderParams};
use super::tape::{norm, Tape, Var};
use super::EncoderError;
use crate::dataset::{build_triplets, rng, sub_seed, Triplet};
use crate::model::LayoutGraph;
use crate::relations::{RelationChannel, RelationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// Two-stage schedule: `lr_high` for the first `high_epochs`, then `lr_low`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub high_epochs: usize,
    pub lr_high: f64,
    pub lr_low: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// Weight of the relation decode loss.
    pub lambda: f64,
    pub loss: LossConfig,
    pub seed: u64,
    /// Draw fresh masks and negatives every epoch when the set knows its
    /// source corpus.
    pub remask: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            high_epochs: 30,
            lr_high: 3e-4,
            lr_low: 3e-5,
            batch_size: 16,
            optimizer: Optimizer::Adam,
            lambda: 10.0,
            loss: LossConfig::default(),
            seed: 0,
            remask: true,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if epoch < self.high_epochs {
            self.lr_high
        } else {
            self.lr_low
        }
    }
}

/// Encoder inputs for a corpus and its triplets.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub graphs: Vec<GraphInput>,
    pub positives: Vec<GraphInput>,
    /// `(gt, positive, negative)`: indices into `graphs`, `positives`, `graphs`.
    pub triplets: Vec<(usize, usize, usize)>,
    source: Option<Source>,
}

/// What is needed to draw new triplets for the same members.
#[derive(Debug, Clone)]
struct Source {
    layouts: Vec<LayoutGraph>,
    relations: Vec<RelationMatrix>,
    members: Vec<usize>,
    stub_dim: usize,
}

impl TrainingSet {
    pub fn new(
        graphs: &[LayoutGraph],
        relations: &[RelationMatrix],
        triplets: &[Triplet],
        config: &EncoderConfig,
    ) -> Result<Self, EncoderError> {
        let inputs = graphs
            .iter()
            .zip(relations)
            .map(|(g, m)| GraphInput::from_graph(g, m, config.stub_dim))
            .collect::<Result<Vec<_>, _>>()?;
        let positives = triplets
            .iter()
            .map(|t| GraphInput::from_masked(&t.pos, config.stub_dim))
            .collect::<Result<Vec<_>, _>>()?;
        let triplets = triplets.iter().enumerate().map(|(k, t)| (t.gt, k, t.neg)).collect();
        Ok(TrainingSet {
            graphs: inputs,
            positives,
            triplets,
            source: None,
        })
    }

    /// Wraps already built inputs. `triplets` index `graphs`, `positives`, `graphs`.
    pub fn from_inputs(graphs: Vec<GraphInput>, positives: Vec<GraphInput>, triplets: Vec<(usize, usize, usize)>) -> Self {
        TrainingSet {
            graphs,
            positives,
            triplets,
            source: None,
        }
    }

    /// Builds triplets for `members` and remembers the corpus so training
    /// can draw new ones.
    pub fn from_corpus(
        graphs: &[LayoutGraph],
        relations: &[RelationMatrix],
        members: &[usize],
        seed: u64,
        config: &EncoderConfig,
    ) -> Result<Self, EncoderError> {
        let triplets = build_triplets(graphs, relations, members, seed).map_err(|e| EncoderError::Triplets(e.to_string()))?;
        let mut set = Self::new(graphs, relations, &triplets, config)?;
        set.source = Some(Source {
            layouts: graphs.to_vec(),
            relations: relations.to_vec(),
            members: members.to_vec(),
            stub_dim: config.stub_dim,
        });
        Ok(set)
    }

    /// Same graphs, freshly drawn positives and negatives.
    pub fn redrawn(&self, seed: u64) -> Result<Option<Self>, EncoderError> {
        let Some(src) = &self.source else {
            return Ok(None);
        };
        let triplets = build_triplets(&src.layouts, &src.relations, &src.members, seed)
            .map_err(|e| EncoderError::Triplets(e.to_string()))?;
        let positives = triplets
            .iter()
            .map(|t| GraphInput::from_masked(&t.pos, src.stub_dim))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some(TrainingSet {
            graphs: self.graphs.clone(),
            positives,
            triplets: triplets.iter().enumerate().map(|(k, t)| (t.gt, k, t.neg)).collect(),
            source: self.source.clone(),
        }))
    }

    /// Ground-truth inputs referenced as anchors, each once.
    pub fn graphs_in_triplets(&self) -> Vec<GraphInput> {
        let anchors: std::collections::BTreeSet<usize> = self.triplets.iter().map(|t| t.0).collect();
        anchors.into_iter().map(|g| self.graphs[g].clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
}

/// Per-epoch means over all triplets seen in that epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub simcse: f64,
    pub decode: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub epochs: Vec<EpochLoss>,
}

impl LossTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,simcse,decode,total\n");
        for e in &self.epochs {
            writeln!(out, "{},{},{},{}", e.epoch, e.simcse, e.decode, e.total).expect("string write");
        }
        out
    }
}

/// Loss terms of one triplet on a tape.
pub(crate) struct TripletTerms {
    pub simcse: Var,
    pub decode: Var,
    pub total: Var,
}

pub(crate) fn triplet_terms(
    tape: &mut Tape,
    pv: &ParamVars,
    params: &EncoderParams,
    gt: &GraphInput,
    pos: &GraphInput,
    neg: &GraphInput,
    lambda: f64,
    loss: &LossConfig,
) -> Result<TripletTerms, EncoderError> {
    let mut pooled = Vec::with_capacity(3);
    let mut gt_nodes = None;
    for (k, input) in [gt, pos, neg].into_iter().enumerate() {
        let f = featurize_on(tape, pv, input);
        let enc = encode_on(tape, pv, params, f, input);
        if norm(tape.value(enc.pooled)) == 0.0 {
            return Err(EncoderError::ZeroNorm);
        }
        if k == 0 {
            gt_nodes = Some(enc.nodes);
        }
        pooled.push(enc.pooled);
    }
    let sp = tape.cosine(pooled[0], pooled[1]);
    let sn = tape.cosine(pooled[0], pooled[2]);
    let simcse = tape.contrast(sp, &[sn], loss.tau);

    let logits = decode_on(tape, pv, params, gt_nodes.expect("gt encoded"));
    let n = gt.len();
    let pairs = (4 * n * n.saturating_sub(1)).max(1) as f64;
    let weight = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { 1.0 / pairs });
    let parts: Vec<Var> = RelationChannel::ALL
        .iter()
        .map(|&c| {
            let target = Array2::from_shape_fn((n, n), |(i, j)| gt.relations.get(c, i, j) as u8 as f64);
            tape.bce_logits(logits[c.index()], target, weight.clone())
        })
        .collect();
    let decode = tape.sum(&parts);
    let weighted = tape.scale(decode, lambda);
    let total = tape.sum(&[simcse, weighted]);
    Ok(TripletTerms { simcse, decode, total })
}

struct AdamState {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Trains from a fresh seeded initialisation.
pub fn train(
    set: &TrainingSet,
    encoder: EncoderConfig,
    cfg: &TrainConfig,
) -> Result<(EncoderParams, LossTrace), EncoderError> {
    train_from(EncoderParams::init(encoder, cfg.seed), set, cfg)
}

/// Mini-batch training of the joint contrastive and decode loss.
pub fn train_from(
    params: EncoderParams,
    set: &TrainingSet,
    cfg: &TrainConfig,
) -> Result<(EncoderParams, LossTrace), EncoderError> {
    train_observed(params, set, cfg, &mut |_, _| Ok(()))
}

/// [`train_from`] with a hook called after every epoch.
pub fn train_observed(
    mut params: EncoderParams,
    set: &TrainingSet,
    cfg: &TrainConfig,
    observe: &mut dyn FnMut(&EpochLoss, &EncoderParams) -> Result<(), EncoderError>,
) -> Result<(EncoderParams, LossTrace), EncoderError> {
    if set.is_empty() {
        return Err(EncoderError::EmptyCorpus);
    }
    cfg.loss.check()?;
    if cfg.batch_size == 0 {
        return Err(EncoderError::InvalidConfig("batch size must be positive".into()));
    }
    let mut r = rng(cfg.seed ^ 0x7472_6169_6e);
    let mut current: Option<TrainingSet> = None;
    let mut adam = AdamState {
        m: params.tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect(),
        v: params.tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect(),
        t: 0,
    };
    let mut trace = LossTrace::default();
    for epoch in 0..cfg.epochs {
        if cfg.remask && epoch > 0 {
            if let Some(fresh) = set.redrawn(sub_seed(cfg.seed, epoch as u64))? {
                current = Some(fresh);
            }
        }
        let set = current.as_ref().unwrap_or(set);
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.shuffle(&mut r);
        let lr = cfg.learning_rate(epoch);
        let (mut s_sum, mut d_sum, mut t_sum) = (0.0, 0.0, 0.0);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut tape = Tape::new();
            let pv = ParamVars::trainable(&mut tape, &params);
            let mut totals = Vec::with_capacity(batch.len());
            for &k in batch {
                let (g, p, n) = set.triplets[k];
                let terms = triplet_terms(
                    &mut tape,
                    &pv,
                    &params,
                    &set.graphs[g],
                    &set.positives[p],
                    &set.graphs[n],
                    cfg.lambda,
                    &cfg.loss,
                )?;
                s_sum += tape.scalar(terms.simcse);
                d_sum += tape.scalar(terms.decode);
                t_sum += tape.scalar(terms.total);
                totals.push(terms.total);
            }
            let sum = tape.sum(&totals);
            let mean = tape.scale(sum, 1.0 / batch.len() as f64);
            let value = tape.scalar(mean);
            if !value.is_finite() {
                return Err(EncoderError::NonFinite {
                    epoch,
                    batch: b,
                    loss: value,
                });
            }
            let mut grads = tape.backward(mean);
            adam.t += 1;
            for (k, var) in pv.0.iter().enumerate() {
                let Some(g) = grads.take(*var) else { continue };
                match cfg.optimizer {
                    Optimizer::Sgd => params.tensors[k].scaled_add(-lr, &g),
                    Optimizer::Adam => {
                        adam.m[k] = &adam.m[k] * BETA1 + &g * (1.0 - BETA1);
                        adam.v[k] = &adam.v[k] * BETA2 + &(&g * &g) * (1.0 - BETA2);
                        let c1 = 1.0 - BETA1.powi(adam.t);
                        let c2 = 1.0 - BETA2.powi(adam.t);
                        let step = ndarray::Zip::from(&adam.m[k])
                            .and(&adam.v[k])
                            .map_collect(|m, v| (m / c1) / ((v / c2).sqrt() + ADAM_EPS));
                        params.tensors[k].scaled_add(-lr, &step);
                    }
                }
            }
            if !params.is_finite() {
                return Err(EncoderError::NonFinite {
                    epoch,
                    batch: b,
                    loss: value,
                });
            }
        }
        let k = set.len() as f64;
        let loss = EpochLoss {
            epoch,
            simcse: s_sum / k,
            decode: d_sum / k,
            total: t_sum / k,
        };
        observe(&loss, &params)?;
        trace.epochs.push(loss);
    }
    Ok((params, trace))
}

/// Mean loss terms over a set without updating anything.
pub fn evaluate_loss(params: &EncoderParams, set: &TrainingSet, cfg: &TrainConfig) -> Result<EpochLoss, EncoderError> {
    let (mut s, mut d, mut t) = (0.0, 0.0, 0.0);
    for &(g, p, n) in &set.triplets {
        let mut tape = Tape::new();
        let pv = ParamVars::frozen(&mut tape, params);
        let terms = triplet_terms(
            &mut tape,
            &pv,
            params,
            &set.graphs[g],
            &set.positives[p],
            &set.graphs[n],
            cfg.lambda,
            &cfg.loss,
        )?;
        s += tape.scalar(terms.simcse);
        d += tape.scalar(terms.decode);
        t += tape.scalar(terms.total);
    }
    let k = set.len().max(1) as f64;
    Ok(EpochLoss {
        epoch: 0,
        simcse: s / k,
        decode: d / k,
        total: t / k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    /// Fraction of triplets with `sim(gt, pos) > sim(gt, neg)`.
    pub accuracy: f64,
    pub mean_pos_sim: f64,
    pub mean_neg_sim: f64,
}

pub fn ranking_accuracy(params: &EncoderParams, set: &TrainingSet) -> Result<RankingReport, EncoderError> {
    let pooled = |input: &GraphInput| embed(input, params).map(|e| e.pooled);
    let gts: Vec<Vec<f64>> = set.graphs.iter().map(pooled).collect::<Result<_, _>>()?;
    let (mut hits, mut sp_sum, mut sn_sum) = (0usize, 0.0, 0.0);
    for &(g, p, n) in &set.triplets {
        let sp = cosine_similarity(&gts[g], &pooled(&set.positives[p])?)?;
        let sn = cosine_similarity(&gts[g], &gts[n])?;
        hits += (sp > sn) as usize;
        sp_sum += sp;
        sn_sum += sn;
    }
    let k = set.len().max(1) as f64;
    Ok(RankingReport {
        accuracy: hits as f64 / k,
        mean_pos_sim: sp_sum / k,
        mean_neg_sim: sn_sum / k,
    })
}

/// Repaired decoder output for one graph.
pub fn predict_relations(input: &GraphInput, params: &EncoderParams) -> Result<RelationMatrix, EncoderError> {
    let emb = embed(input, params)?;
    Ok(repair(&decode_relations(&emb, params)?))
}

/// Per-channel F1 of the repaired decoder output, pooled over all graphs.
pub fn decoder_f1(params: &EncoderParams, inputs: &[GraphInput]) -> Result<[f64; 4], EncoderError> {
    let mut tp = [0usize; 4];
    let mut fp = [0usize; 4];
    let mut fn_ = [0usize; 4];
    for input in inputs {
        let pred = predict_relations(input, params)?;
        let n = input.len();
        for c in RelationChannel::ALL {
            for i in 0..n {
                for j in 0..n {
                    match (pred.get(c, i, j), input.relations.get(c, i, j)) {
                        (true, true) => tp[c.index()] += 1,
                        (true, false) => fp[c.index()] += 1,
                        (false, true) => fn_[c.index()] += 1,
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(std::array::from_fn(|c| {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        if denom == 0 {
            1.0
        } else {
            2.0 * tp[c] as f64 / denom as f64
        }
    }))
}
