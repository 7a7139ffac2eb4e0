use layout_workbench::dataset::{build_triplets, mask_graph, synthesize_random_layout, synthetic_corpus};
use layout_workbench::encoder::*;
use layout_workbench::relations::{derive_relations, RelationChannel, RelationMatrix};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn input_of(n: usize, seed: u64, cfg: &EncoderConfig) -> GraphInput {
    let g = synthesize_random_layout(n, seed).unwrap();
    GraphInput::from_graph(&g, &derive_relations(&g), cfg.stub_dim).unwrap()
}

fn sample(n: usize, seed: u64, cfg: &EncoderConfig) -> CheckSample {
    let g = synthesize_random_layout(n, seed).unwrap();
    let m = derive_relations(&g);
    let masked = mask_graph(&g, &m, 0.25, seed).unwrap();
    CheckSample {
        gt: GraphInput::from_graph(&g, &m, cfg.stub_dim).unwrap(),
        pos: GraphInput::from_masked(&masked, cfg.stub_dim).unwrap(),
        neg: input_of(n + 1, seed + 1000, cfg),
    }
}

#[test]
fn distinct_payloads_give_nearly_orthogonal_stubs() {
    let mut close = 0;
    for k in 0..10_000 {
        let a = content_stub(&format!("payload-a-{k}"), 32);
        let b = content_stub(&format!("payload-b-{k}"), 32);
        let cos: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        if cos.abs() >= 0.5 {
            close += 1;
        }
    }
    assert!(close < 100, "{close} of 10000 pairs had |cos| >= 0.5");
    assert_eq!(content_stub("same", 32), content_stub("same", 32));
}

#[test]
fn mask_features_have_no_box_and_the_mask_slot() {
    let g = synthesize_random_layout(6, 3).unwrap();
    let m = derive_relations(&g);
    let masked = mask_graph(&g, &m, 0.25, 3).unwrap();
    let input = GraphInput::from_masked(&masked, 32).unwrap();
    for (i, slot) in masked.nodes.iter().enumerate() {
        let row = input.raw.row(i);
        if slot.is_masked() {
            assert!(row.iter().take(4).all(|&v| v == 0.0));
            assert_eq!(row[4 + MASK_SLOT], 1.0);
            assert_eq!(row.iter().filter(|&&v| v != 0.0).count(), 1);
        } else {
            assert_eq!(row[4 + MASK_SLOT], 0.0);
        }
    }
}

#[test]
fn permuting_nodes_permutes_states_and_keeps_the_pooled_vector() {
    let params = EncoderParams::init(EncoderConfig::default(), 5);
    let mut r = ChaCha8Rng::seed_from_u64(8);
    for (n, seed) in [(7, 1), (12, 2), (18, 3)] {
        let g = synthesize_random_layout(n, seed).unwrap();
        let m = derive_relations(&g);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let pg = g.permuted(&perm);
        let pm = m.permuted(&perm);
        assert!(derive_relations(&pg).values_eq(&pm));

        let a = embed(&GraphInput::from_graph(&g, &m, 32).unwrap(), &params).unwrap();
        let b = embed(&GraphInput::from_graph(&pg, &pm, 32).unwrap(), &params).unwrap();
        for i in 0..n {
            for k in 0..a.per_node.ncols() {
                assert!((a.per_node[[i, k]] - b.per_node[[perm[i], k]]).abs() < 1e-9);
            }
        }
        assert!(a.pooled.iter().zip(&b.pooled).all(|(x, y)| (x - y).abs() < 1e-9));

        let sa = decode_relations(&a, &params).unwrap();
        let sb = decode_relations(&b, &params).unwrap();
        for c in RelationChannel::ALL {
            for i in 0..n {
                for j in 0..n {
                    assert!((sa.get(c)[[i, j]] - sb.get(c)[[perm[i], perm[j]]]).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn a_graph_is_identical_to_itself() {
    let params = EncoderParams::init(EncoderConfig::default(), 1);
    let e = embed(&input_of(9, 4, &params.config), &params).unwrap();
    assert_eq!(e.pooled.len(), 1024);
    assert_eq!(e.per_node.dim(), (9, 128));
    assert!((cosine_similarity(&e.pooled, &e.pooled).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn encode_graph_rejects_wrong_widths() {
    let params = EncoderParams::init(EncoderConfig::compact(), 0);
    let input = input_of(4, 0, &params.config);
    let wrong = ndarray::Array2::zeros((4, params.config.feature_dim + 1));
    assert!(matches!(encode_graph(&wrong, &input, &params), Err(EncoderError::DimensionMismatch { .. })));
    let short = ndarray::Array2::zeros((3, params.config.feature_dim));
    assert!(matches!(encode_graph(&short, &input, &params), Err(EncoderError::DimensionMismatch { .. })));
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let cfg = EncoderConfig::compact();
    for seed in 0..8 {
        let params = EncoderParams::init(cfg, seed);
        let s = sample(4 + (seed as usize % 5), seed, &cfg);
        let report = grad_check(&params, &s, 1e-5, 0.01, 1.0, &LossConfig::default(), seed).unwrap();
        assert!(report.checked > 0);
        assert!(report.max_relative_error < 1e-4, "seed {seed}: {report:?}");
    }
}

#[test]
fn zero_loss_setup_has_zero_gradients() {
    let cfg = EncoderConfig::compact();
    let params = EncoderParams::init(cfg, 2);
    let s = sample(5, 2, &cfg);
    // Positive equal to the negative and no decode term: the loss is exactly zero.
    let flat = CheckSample {
        gt: s.gt.clone(),
        pos: s.neg.clone(),
        neg: s.neg.clone(),
    };
    let report = grad_check(&params, &flat, 1e-5, 0.05, 0.0, &LossConfig::default(), 2).unwrap();
    assert!(report.max_abs_analytic < 1e-8, "{report:?}");
    assert!(report.max_abs_numeric < 1e-8, "{report:?}");
}

#[test]
fn central_difference_error_is_second_order() {
    let cfg = EncoderConfig::compact();
    let params = EncoderParams::init(cfg, 6);
    let s = sample(5, 6, &cfg);
    let loss = LossConfig::default();
    let total = params.count();
    let mut checked = 0;
    for flat in (0..total).step_by(97) {
        let d1 = numeric_derivative(&params, &s, flat, 1e-3, 1.0, &loss).unwrap();
        let d2 = numeric_derivative(&params, &s, flat, 2e-3, 1.0, &loss).unwrap();
        let d4 = numeric_derivative(&params, &s, flat, 4e-3, 1.0, &loss).unwrap();
        let (a, b) = ((d2 - d1).abs(), (d4 - d2).abs());
        if b < 1e-9 {
            continue;
        }
        // Halving ε should cut the change by about 4; a kink would break the pattern.
        let ratio = b / a.max(1e-300);
        if (2.0..8.0).contains(&ratio) {
            checked += 1;
        }
    }
    assert!(checked >= 5, "only {checked} coordinates showed quadratic convergence");
}

#[test]
fn one_triplet_is_overfit() {
    let cfg = EncoderConfig::compact();
    let s = sample(6, 11, &cfg);
    let set = TrainingSet::from_inputs(vec![s.gt.clone(), s.neg.clone()], vec![s.pos.clone()], vec![(0, 0, 1)]);
    let train_cfg = TrainConfig {
        epochs: 200,
        high_epochs: 200,
        batch_size: 1,
        remask: false,
        ..TrainConfig::default()
    };
    let (_, trace) = train(&set, cfg, &train_cfg).unwrap();
    let first = trace.epochs[0].total;
    let last = trace.epochs.last().unwrap().total;
    assert!(last <= first - 0.5 * first.abs(), "{first} -> {last}");
}

fn empty_set() -> TrainingSet {
    TrainingSet::from_inputs(vec![], vec![], vec![])
}

fn small_corpus(cfg: &EncoderConfig) -> TrainingSet {
    let graphs = synthetic_corpus(24, 3..=8, 7).unwrap();
    let rels: Vec<_> = graphs.iter().map(derive_relations).collect();
    let members: Vec<usize> = (0..graphs.len()).collect();
    TrainingSet::from_corpus(&graphs, &rels, &members, 7, cfg).unwrap()
}

#[test]
fn seeded_training_is_reproducible() {
    let cfg = EncoderConfig::compact();
    let set = small_corpus(&cfg);
    let tc = TrainConfig {
        epochs: 3,
        high_epochs: 2,
        ..TrainConfig::default()
    };
    let (p1, t1) = train(&set, cfg, &tc).unwrap();
    let (p2, t2) = train(&set, cfg, &tc).unwrap();
    assert_eq!(t1, t2);
    assert_eq!(p1.tensors, p2.tensors);
    let csv = t1.to_csv();
    assert!(csv.starts_with("epoch,simcse,decode,total\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn sgd_training_reduces_decode_loss() {
    let cfg = EncoderConfig::compact();
    let set = small_corpus(&cfg);
    let tc = TrainConfig {
        epochs: 30,
        high_epochs: 30,
        lr_high: 0.05,
        optimizer: Optimizer::Sgd,
        remask: false,
        ..TrainConfig::default()
    };
    let before = EncoderParams::init(cfg, tc.seed);
    let (after, _) = train(&set, cfg, &tc).unwrap();
    let inputs = set.graphs_in_triplets();
    let decode = |p: &EncoderParams| -> f64 {
        inputs
            .iter()
            .map(|g| relation_decode_loss(&decode_relations(&embed(g, p).unwrap(), p).unwrap(), &g.relations).unwrap())
            .sum()
    };
    assert!(decode(&after) < decode(&before));
}

#[test]
fn empty_corpus_and_bad_configs_are_rejected() {
    let cfg = EncoderConfig::compact();
    assert_eq!(train(&empty_set(), cfg, &TrainConfig::default()).unwrap_err(), EncoderError::EmptyCorpus);
    let set = small_corpus(&cfg);
    let bad_tau = TrainConfig {
        loss: LossConfig { tau: 0.0, negatives: 1 },
        ..TrainConfig::default()
    };
    assert!(matches!(train(&set, cfg, &bad_tau), Err(EncoderError::InvalidConfig(_))));
    let bad_batch = TrainConfig {
        batch_size: 0,
        ..TrainConfig::default()
    };
    assert!(matches!(train(&set, cfg, &bad_batch), Err(EncoderError::InvalidConfig(_))));
}

fn f1_of(pairs: &[(RelationMatrix, RelationMatrix)]) -> [f64; 4] {
    std::array::from_fn(|c| {
        let c = RelationChannel::ALL[c];
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for (pred, truth) in pairs {
            for i in 0..pred.len() {
                for j in 0..pred.len() {
                    match (pred.get(c, i, j), truth.get(c, i, j)) {
                        (true, true) => tp += 1.0,
                        (true, false) => fp += 1.0,
                        (false, true) => fn_ += 1.0,
                        _ => {}
                    }
                }
            }
        }
        2.0 * tp / (2.0 * tp + fp + fn_)
    })
}

#[test]
fn untrained_decoder_is_close_to_chance() {
    use rand::Rng;
    let graphs = synthetic_corpus(100, 3..=12, 19).unwrap();
    let inputs: Vec<GraphInput> = graphs
        .iter()
        .map(|g| GraphInput::from_graph(g, &derive_relations(g), 32).unwrap())
        .collect();
    // Chance: uniform noise scores through the same repair.
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let noise: Vec<_> = inputs
        .iter()
        .map(|g| {
            let n = g.len();
            let channels = RelationChannel::ALL.map(|_| ndarray::Array2::from_shape_fn((n, n), |_| r.random::<f64>()));
            (repair(&RelationScores { channels }), g.relations.clone())
        })
        .collect();
    let chance = f1_of(&noise);
    for seed in 0..3 {
        let params = EncoderParams::init(EncoderConfig::default(), seed);
        let f1 = decoder_f1(&params, &inputs).unwrap();
        for c in 0..4 {
            assert!(f1[c] < chance[c] + 0.15, "seed {seed} channel {c}: {f1:?} vs chance {chance:?}");
        }
    }
}

#[test]
fn decode_loss_matches_a_direct_sum() {
    let n = 4;
    let mut target = RelationMatrix::zeros(n);
    target.set(RelationChannel::Top, 0, 1, true, false);
    target.set(RelationChannel::Contain, 0, 2, true, false);
    let exact = RelationScores {
        channels: RelationChannel::ALL
            .map(|c| ndarray::Array2::from_shape_fn((n, n), |(i, j)| if target.get(c, i, j) { 1.0 } else { 0.0 })),
    };
    assert!(relation_decode_loss(&exact, &target).unwrap() <= 1e-6);
    let s = 0.3;
    let flat = RelationScores {
        channels: std::array::from_fn(|_| ndarray::Array2::from_elem((n, n), s)),
    };
    let pairs = (4 * n * (n - 1)) as f64;
    let expected = (-2.0 * f64::ln(s) - (pairs - 2.0) * f64::ln(1.0 - s)) / pairs;
    assert!((relation_decode_loss(&flat, &target).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn checkpoints_round_trip() {
    let params = EncoderParams::init(EncoderConfig::compact(), 9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("enc.json");
    params.save(&path).unwrap();
    let back = EncoderParams::load(&path).unwrap();
    assert_eq!(back, params);
    let mut broken: serde_json::Value = serde_json::from_str(&params.to_json()).unwrap();
    broken["version"] = serde_json::json!(99);
    assert!(matches!(EncoderParams::from_json(&broken.to_string()), Err(EncoderError::Checkpoint(_))));
}

#[test]
fn triplet_loss_ranks_after_a_short_run() {
    let cfg = EncoderConfig::compact();
    let graphs = synthetic_corpus(40, 4..=10, 3).unwrap();
    let rels: Vec<_> = graphs.iter().map(derive_relations).collect();
    let members: Vec<usize> = (0..graphs.len()).collect();
    let triplets = build_triplets(&graphs, &rels, &members, 3).unwrap();
    let set = TrainingSet::new(&graphs, &rels, &triplets, &cfg).unwrap();
    let tc = TrainConfig {
        epochs: 5,
        high_epochs: 5,
        ..TrainConfig::default()
    };
    let (params, _) = train(&set, cfg, &tc).unwrap();
    let report = ranking_accuracy(&params, &set).unwrap();
    assert!(report.mean_pos_sim > report.mean_neg_sim, "{report:?}");
}
