use ndarray::Array2;
use rand::seq::index::sample;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{overlap, MetricsError};
use crate::dataset::{rng, sub_seed};
use crate::encoder::tape::Tape;
use crate::model::{BBox, Category, ComponentNode, LayoutGraph};

/// Width of [`handcrafted_vector`].
pub const HANDCRAFTED_DIM: usize = 12;
const MIN_CLEAN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub target_accuracy: f64,
    /// Fraction of clean layouts (with their twins) kept out of training.
    pub held_out: f64,
    /// Centre shift bound, as a fraction of the canvas.
    pub jitter: f64,
    /// Fraction of nodes whose category is redrawn.
    pub reshuffle: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            hidden: 32,
            steps: 2000,
            learning_rate: 1e-2,
            target_accuracy: 0.85,
            held_out: 0.2,
            jitter: 0.1,
            reshuffle: 0.2,
        }
    }
}

/// Shifts every box centre by up to `jitter` per axis, keeping it on the
/// canvas, and gives `⌈reshuffle·n⌉` random nodes a different category.
pub fn corrupt_layout(layout: &LayoutGraph, seed: u64, jitter: f64, reshuffle: f64) -> LayoutGraph {
    let mut r = rng(seed);
    let n = layout.len();
    let mut nodes = layout.nodes().to_vec();
    for node in &mut nodes {
        let b = node.bbox;
        let shift = |r: &mut rand_chacha::ChaCha8Rng, c: f64, size: f64| {
            let c = c + r.random_range(-jitter..=jitter);
            if size >= 1.0 {
                0.5
            } else {
                c.clamp(size / 2.0, 1.0 - size / 2.0)
            }
        };
        let x = shift(&mut r, b.x, b.w);
        let y = shift(&mut r, b.y, b.h);
        node.bbox = BBox { x, y, ..b };
    }
    let k = ((reshuffle * n as f64).ceil() as usize).min(n);
    for i in sample(&mut r, n, k) {
        let old = nodes[i].category;
        let others: Vec<Category> = Category::ALL.into_iter().filter(|&c| c != old).collect();
        let cat = *others.choose(&mut r).expect("six categories");
        let node = &nodes[i];
        nodes[i] = ComponentNode::new(node.node_id, cat, node.bbox).with_payload(node.content.payload.clone());
    }
    LayoutGraph::new(layout.canvas(), nodes).expect("ids and boxes unchanged")
}

/// Category fractions, `ln(1+n)`, box-area mean/std/min/max and the overlap
/// total as a canvas fraction.
pub fn handcrafted_vector(layout: &LayoutGraph) -> Vec<f64> {
    let n = layout.len() as f64;
    let mut v: Vec<f64> = layout.category_histogram().iter().map(|&c| c as f64 / n).collect();
    v.push((1.0 + n).ln());
    let areas: Vec<f64> = layout.bboxes().iter().map(BBox::area).collect();
    let mean = areas.iter().sum::<f64>() / n;
    let var = areas.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    v.push(mean);
    v.push(var.sqrt());
    v.push(areas.iter().copied().fold(f64::INFINITY, f64::min));
    v.push(areas.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    v.push(overlap(layout) / 100.0);
    v
}

/// Two-layer clean-vs-corrupt MLP. Its hidden activations are the layout
/// features used for FID.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionClassifier {
    pub config: ClassifierConfig,
    pub seed: u64,
    pub held_out_accuracy: f64,
    mean: Vec<f64>,
    scale: Vec<f64>,
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl CorruptionClassifier {
    fn standardize(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect()
    }

    /// Hidden-layer activations for one layout.
    pub fn features(&self, layout: &LayoutGraph) -> Vec<f64> {
        self.hidden(&handcrafted_vector(layout))
    }

    fn hidden(&self, raw: &[f64]) -> Vec<f64> {
        let x = self.standardize(raw);
        (0..self.b1.len())
            .map(|h| {
                let z: f64 = x.iter().zip(&self.w1).map(|(xi, row)| xi * row[h]).sum::<f64>() + self.b1[h];
                z.max(0.0)
            })
            .collect()
    }

    /// Probability that `layout` is a corrupted one.
    pub fn predict(&self, layout: &LayoutGraph) -> f64 {
        1.0 / (1.0 + (-self.logit(&handcrafted_vector(layout))).exp())
    }

    fn logit(&self, raw: &[f64]) -> f64 {
        self.hidden(raw).iter().zip(&self.w2).map(|(a, b)| a * b).sum::<f64>() + self.b2
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("classifier serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, MetricsError> {
        let c: CorruptionClassifier = serde_json::from_str(s).map_err(|e| MetricsError::Checkpoint(e.to_string()))?;
        let h = c.b1.len();
        let ok = c.mean.len() == HANDCRAFTED_DIM
            && c.scale.len() == HANDCRAFTED_DIM
            && c.w1.len() == HANDCRAFTED_DIM
            && c.w1.iter().all(|r| r.len() == h)
            && c.w2.len() == h;
        if !ok {
            return Err(MetricsError::Checkpoint("tensor shapes do not match".into()));
        }
        Ok(c)
    }

    /// Short content hash naming this checkpoint in reports.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

/// Trains the classifier on `clean` layouts and one corrupted twin of each.
/// Fails when held-out accuracy stays below the configured target.
pub fn train_corruption_classifier(
    clean: &[LayoutGraph],
    seed: u64,
    cfg: &ClassifierConfig,
) -> Result<CorruptionClassifier, MetricsError> {
    if clean.len() < MIN_CLEAN {
        return Err(MetricsError::TooFewLayouts {
            needed: MIN_CLEAN,
            got: clean.len(),
        });
    }
    let mut rows = Vec::with_capacity(2 * clean.len());
    for (k, g) in clean.iter().enumerate() {
        let twin = corrupt_layout(g, sub_seed(seed, k as u64), cfg.jitter, cfg.reshuffle);
        rows.push((k, handcrafted_vector(g), 0.0));
        rows.push((k, handcrafted_vector(&twin), 1.0));
    }
    let mut order: Vec<usize> = (0..clean.len()).collect();
    let mut r = rng(seed ^ 0x636c_6173);
    order.shuffle(&mut r);
    let held = ((cfg.held_out * clean.len() as f64).round() as usize).clamp(1, clean.len() - 1);
    let mut is_held = vec![false; clean.len()];
    for &k in &order[..held] {
        is_held[k] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = rows.into_iter().partition(|(k, _, _)| is_held[*k]);

    let d = HANDCRAFTED_DIM;
    let mut mean = vec![0.0; d];
    for (_, x, _) in &train {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / train.len() as f64;
        }
    }
    let mut scale = vec![0.0; d];
    for (_, x, _) in &train {
        for ((s, v), m) in scale.iter_mut().zip(x).zip(&mean) {
            *s += (v - m).powi(2) / train.len() as f64;
        }
    }
    let scale: Vec<f64> = scale.iter().map(|s| if s.sqrt() > 1e-9 { s.sqrt() } else { 1.0 }).collect();
    let standardize = |x: &[f64]| -> Vec<f64> { x.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s).collect() };
    let xs = Array2::from_shape_fn((train.len(), d), |(i, j)| standardize(&train[i].1)[j]);
    let ys = Array2::from_shape_fn((train.len(), 1), |(i, _)| train[i].2);
    let weight = Array2::from_elem((train.len(), 1), 1.0 / train.len() as f64);

    let h = cfg.hidden;
    let b1_bound = (6.0 / d as f64).sqrt();
    let b2_bound = (6.0 / (h + 1) as f64).sqrt();
    let mut params = vec![
        Array2::from_shape_fn((d, h), |_| r.random_range(-b1_bound..b1_bound)),
        Array2::zeros((1, h)),
        Array2::from_shape_fn((h, 1), |_| r.random_range(-b2_bound..b2_bound)),
        Array2::zeros((1, 1)),
    ];
    let mut m: Vec<Array2<f64>> = params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
    let mut v = m.clone();
    let mut trace = Vec::new();
    for step in 1..=cfg.steps {
        let mut tape = Tape::new();
        let p: Vec<_> = params.iter().map(|t| tape.param(t.clone())).collect();
        let x = tape.constant(xs.clone());
        let z = tape.matmul(x, p[0]);
        let z = tape.add_row(z, p[1]);
        let a = tape.relu(z);
        let o = tape.matmul(a, p[2]);
        let o = tape.add_row(o, p[3]);
        let loss = tape.bce_logits(o, ys.clone(), weight.clone());
        if step % 100 == 1 {
            trace.push(tape.scalar(loss));
        }
        let mut grads = tape.backward(loss);
        for k in 0..params.len() {
            let Some(g) = grads.take(p[k]) else { continue };
            m[k] = &m[k] * 0.9 + &g * 0.1;
            v[k] = &v[k] * 0.999 + &(&g * &g) * 0.001;
            let c1 = 1.0 - 0.9f64.powi(step as i32);
            let c2 = 1.0 - 0.999f64.powi(step as i32);
            let upd = ndarray::Zip::from(&m[k])
                .and(&v[k])
                .map_collect(|a, b| (a / c1) / ((b / c2).sqrt() + 1e-8));
            params[k].scaled_add(-cfg.learning_rate, &upd);
        }
    }

    let rows_of = |a: &Array2<f64>| -> Vec<Vec<f64>> { a.rows().into_iter().map(|r| r.to_vec()).collect() };
    let mut model = CorruptionClassifier {
        config: *cfg,
        seed,
        held_out_accuracy: 0.0,
        w1: rows_of(&params[0]),
        b1: params[1].row(0).to_vec(),
        w2: params[2].column(0).to_vec(),
        b2: params[3][[0, 0]],
        mean,
        scale,
    };
    let hits = test.iter().filter(|(_, x, y)| (model.logit(x) > 0.0) == (*y > 0.5)).count();
    let accuracy = hits as f64 / test.len() as f64;
    if accuracy < cfg.target_accuracy {
        return Err(MetricsError::ClassifierUnderfit {
            accuracy,
            target: cfg.target_accuracy,
            trace,
        });
    }
    model.held_out_accuracy = accuracy;
    Ok(model)
}
