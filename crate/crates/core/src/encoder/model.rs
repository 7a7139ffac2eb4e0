use ndarray::Array2;

use super::features::GraphInput;
use super::params::EncoderParams;
use super::tape::{Tape, Var};
use super::EncoderError;
use crate::relations::{contain_forest, ForestError, RelationChannel, RelationMatrix};

/// Pooled `h_a` plus the final node states it was pooled from.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbedding {
    pub pooled: Vec<f64>,
    pub per_node: Array2<f64>,
}

/// Sigmoid scores per channel, indexed by [`RelationChannel::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct RelationScores {
    pub channels: [Array2<f64>; 4],
}

impl RelationScores {
    pub fn len(&self) -> usize {
        self.channels[0].nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, c: RelationChannel) -> &Array2<f64> {
        &self.channels[c.index()]
    }
}

/// Parameter tensors placed on a tape.
pub(crate) struct ParamVars(pub Vec<Var>);

impl ParamVars {
    pub fn trainable(tape: &mut Tape, params: &EncoderParams) -> Self {
        ParamVars(params.tensors.iter().map(|t| tape.param(t.clone())).collect())
    }

    pub fn frozen(tape: &mut Tape, params: &EncoderParams) -> Self {
        ParamVars(params.tensors.iter().map(|t| tape.constant(t.clone())).collect())
    }
}

/// Final node states and the pooled embedding.
pub(crate) struct Encoded {
    pub nodes: Var,
    pub pooled: Var,
}

pub(crate) fn featurize_on(tape: &mut Tape, pv: &ParamVars, input: &GraphInput) -> Var {
    let raw = tape.constant(input.raw.clone());
    let h = tape.matmul(raw, pv.0[0]);
    let h = tape.add_row(h, pv.0[1]);
    tape.relu(h)
}

pub(crate) fn encode_on(
    tape: &mut Tape,
    pv: &ParamVars,
    params: &EncoderParams,
    features: Var,
    input: &GraphInput,
) -> Encoded {
    let stats = tape.constant(input.stats.clone());
    let mut h = tape.concat_cols(&[features, stats]);
    let aggs: Vec<Var> = input.aggregators.iter().map(|a| tape.constant(a.clone())).collect();
    for l in 0..params.config.layers {
        let mut blocks = vec![h];
        for &a in &aggs {
            blocks.push(tape.matmul(a, h));
        }
        let stacked = tape.concat_cols(&blocks);
        let k = params.layer_index(l);
        let z = tape.matmul(stacked, pv.0[k]);
        let z = tape.add_row(z, pv.0[k + 1]);
        h = tape.relu(z);
    }
    let mean = tape.mean_rows(h);
    let k = params.pool_index();
    let pooled = tape.matmul(mean, pv.0[k]);
    let pooled = tape.add_row(pooled, pv.0[k + 1]);
    Encoded { nodes: h, pooled }
}

/// Bilinear logits `S B_c Sᵀ` for each channel.
pub(crate) fn decode_on(tape: &mut Tape, pv: &ParamVars, params: &EncoderParams, nodes: Var) -> [Var; 4] {
    let st = tape.transpose(nodes);
    RelationChannel::ALL.map(|c| {
        let sb = tape.matmul(nodes, pv.0[params.decoder_index(c.index())]);
        tape.matmul(sb, st)
    })
}

fn check_input(input: &GraphInput, params: &EncoderParams) -> Result<(), EncoderError> {
    if input.raw.ncols() != params.config.raw_dim() {
        return Err(EncoderError::DimensionMismatch {
            expected: params.config.raw_dim(),
            found: input.raw.ncols(),
        });
    }
    Ok(())
}

/// Projects every node of `input` to the feature space.
pub fn featurize(input: &GraphInput, params: &EncoderParams) -> Result<Array2<f64>, EncoderError> {
    check_input(input, params)?;
    let mut tape = Tape::new();
    let pv = ParamVars::frozen(&mut tape, params);
    let f = featurize_on(&mut tape, &pv, input);
    Ok(tape.value(f).clone())
}

/// Runs the message-passing layers over projected `features` and pools.
pub fn encode_graph(
    features: &Array2<f64>,
    input: &GraphInput,
    params: &EncoderParams,
) -> Result<GraphEmbedding, EncoderError> {
    if features.nrows() != input.len() {
        return Err(EncoderError::DimensionMismatch {
            expected: input.len(),
            found: features.nrows(),
        });
    }
    if features.ncols() != params.config.feature_dim {
        return Err(EncoderError::DimensionMismatch {
            expected: params.config.feature_dim,
            found: features.ncols(),
        });
    }
    let mut tape = Tape::new();
    let pv = ParamVars::frozen(&mut tape, params);
    let f = tape.constant(features.clone());
    let enc = encode_on(&mut tape, &pv, params, f, input);
    Ok(GraphEmbedding {
        pooled: tape.value(enc.pooled).iter().copied().collect(),
        per_node: tape.value(enc.nodes).clone(),
    })
}

/// Featurizes and encodes in one go.
pub fn embed(input: &GraphInput, params: &EncoderParams) -> Result<GraphEmbedding, EncoderError> {
    let features = featurize(input, params)?;
    encode_graph(&features, input, params)
}

/// Sigmoid of the bilinear form per ordered pair and channel.
pub fn decode_relations(emb: &GraphEmbedding, params: &EncoderParams) -> Result<RelationScores, EncoderError> {
    if emb.per_node.ncols() != params.config.hidden_dim {
        return Err(EncoderError::DimensionMismatch {
            expected: params.config.hidden_dim,
            found: emb.per_node.ncols(),
        });
    }
    let s = &emb.per_node;
    let channels = RelationChannel::ALL.map(|c| {
        s.dot(&params.tensors[params.decoder_index(c.index())])
            .dot(&s.t())
            .mapv(|z| 1.0 / (1.0 + (-z).exp()))
    });
    Ok(RelationScores { channels })
}

/// Binarises scores at 0.5 and repairs the obvious structural defects:
/// PARALLEL is symmetrised by max, TOP and LEFT keep only the stronger
/// direction of each pair, and entries that would close a TOP, LEFT or
/// CONTAIN cycle are dropped, strongest first. CONTAIN also keeps only the
/// strongest parent of each node.
pub fn repair(scores: &RelationScores) -> RelationMatrix {
    let n = scores.len();
    let mut m = RelationMatrix::zeros(n);
    let p = scores.get(RelationChannel::Parallel);
    for i in 0..n {
        for j in 0..n {
            if i != j && p[[i, j]].max(p[[j, i]]) > 0.5 {
                m.set(RelationChannel::Parallel, i, j, true, false);
            }
        }
    }
    for c in [RelationChannel::Top, RelationChannel::Left] {
        let s = scores.get(c);
        let mut edges: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && s[[i, j]] > 0.5 && s[[i, j]] >= s[[j, i]] && !(s[[i, j]] == s[[j, i]] && i > j) {
                    edges.push((s[[i, j]], i, j));
                }
            }
        }
        for (i, j) in acyclic(n, edges) {
            m.set(c, i, j, true, false);
        }
    }
    let s = scores.get(RelationChannel::Contain);
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n];
    for j in 0..n {
        for i in 0..n {
            if i != j && s[[i, j]] > 0.5 && best[j].is_none_or(|(b, _)| s[[i, j]] > b) {
                best[j] = Some((s[[i, j]], i));
            }
        }
    }
    let edges = best
        .iter()
        .enumerate()
        .filter_map(|(j, b)| b.map(|(score, i)| (score, i, j)))
        .collect();
    for (i, j) in acyclic(n, edges) {
        m.set(RelationChannel::Contain, i, j, true, false);
    }
    m
}

/// Keeps edges in descending score order unless they close a cycle.
fn acyclic(n: usize, mut edges: Vec<(f64, usize, usize)>) -> Vec<(usize, usize)> {
    edges.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut kept = Vec::new();
    for (_, i, j) in edges {
        let mut stack = vec![j];
        let mut seen = vec![false; n];
        let mut cycle = false;
        while let Some(v) = stack.pop() {
            if v == i {
                cycle = true;
                break;
            }
            if !std::mem::replace(&mut seen[v], true) {
                stack.extend(&out[v]);
            }
        }
        if !cycle {
            out[i].push(j);
            kept.push((i, j));
        }
    }
    kept
}

/// Makes a repaired matrix acceptable to the solver: PARALLEL only between
/// nodes with the same parent, no positional entry between a node and its
/// ancestor. CONTAIN must already form a forest, as [`repair`] guarantees.
pub fn reconcile(m: &RelationMatrix) -> Result<RelationMatrix, ForestError> {
    let forest = contain_forest(m)?;
    let n = m.len();
    let mut out = m.clone();
    for i in 0..n {
        for j in 0..n {
            let same_parent = forest.parent(i).is_some() && forest.parent(i) == forest.parent(j);
            if m.get(RelationChannel::Parallel, i, j) && !same_parent {
                out.set(RelationChannel::Parallel, i, j, false, false);
            }
            if forest.related(i, j) {
                out.set(RelationChannel::Top, i, j, false, false);
                out.set(RelationChannel::Left, i, j, false, false);
            }
        }
    }
    Ok(out)
}
