use layout_workbench::dataset::{synthesize_random_layout, synthetic_corpus};
use layout_workbench::metrics::*;
use layout_workbench::model::{BBox, Canvas, Category, ComponentNode, LayoutGraph};
use layout_workbench::relations::{derive_relations, RelationChannel, RelationMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn canvas() -> Canvas {
    Canvas::new(1440, 2560).unwrap()
}

fn layout(boxes: &[(Category, BBox)]) -> LayoutGraph {
    let nodes = boxes
        .iter()
        .enumerate()
        .map(|(i, (c, b))| ComponentNode::new(i as u32 + 1, *c, *b))
        .collect();
    LayoutGraph::new(canvas(), nodes).unwrap()
}

fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
    BBox::new(x, y, w, h).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn relation_error_counts_off_diagonal_slots() {
    let g = synthesize_random_layout(9, 2).unwrap();
    let m = derive_relations(&g);
    assert_eq!(relation_error(&m, &m).unwrap(), 0.0);
    let z = RelationMatrix::zeros(9);
    let set: usize = RelationChannel::ALL.iter().map(|&c| m.count(c)).sum();
    let expected = set as f64 / (4 * 9 * 8) as f64;
    assert!((relation_error(&m, &z).unwrap() - expected).abs() < 1e-15);
    assert_eq!(relation_error(&m, &z).unwrap(), relation_error(&z, &m).unwrap());
    assert!(matches!(relation_error(&m, &RelationMatrix::zeros(3)), Err(MetricsError::DimensionMismatch { .. })));
}

#[test]
fn assignment_is_optimal_against_enumeration() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let rows = r.random_range(1..=5);
        let cols = r.random_range(1..=5);
        let w: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| r.random::<f64>()).collect()).collect();
        let got: f64 = max_assignment(&w)
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| w[i][j]))
            .sum();
        // Enumerate over the larger side's permutations.
        let k = rows.max(cols);
        let best = permutations(k)
            .iter()
            .map(|p| (0..rows).filter(|&i| p[i] < cols).map(|i| w[i][p[i]]).sum::<f64>())
            .fold(0.0, f64::max);
        assert!((got - best).abs() < 1e-12, "{w:?}: {got} vs {best}");
        let matched = max_assignment(&w).iter().flatten().count();
        assert_eq!(matched, rows.min(cols));
    }
}

#[test]
fn crossed_ious_pick_the_optimal_pair() {
    let w = vec![vec![0.9, 0.8], vec![0.85, 0.1]];
    let pick = max_assignment(&w);
    let total: f64 = pick.iter().enumerate().map(|(i, j)| w[i][j.unwrap()]).sum();
    assert!((total - 1.65).abs() < 1e-12);
    assert!((total / 2.0 - 0.825).abs() < 1e-12);
}

#[test]
fn max_iou_examples() {
    let root = (Category::Background, BBox::FULL);
    let l = layout(&[root, (Category::Text, b(0.3, 0.3, 0.2, 0.1)), (Category::Icon, b(0.7, 0.7, 0.1, 0.1))]);
    assert_eq!(max_iou(&l, &l), 1.0);
    let a = layout(&[(Category::Text, b(0.2, 0.2, 0.2, 0.2))]);
    let far = layout(&[(Category::Text, b(0.8, 0.8, 0.2, 0.2))]);
    assert_eq!(max_iou(&a, &far), 0.0);
    // An extra box of a category the reference lacks lowers the score.
    let extra = layout(&[root, (Category::Text, b(0.3, 0.3, 0.2, 0.1)), (Category::Image, b(0.7, 0.7, 0.1, 0.1))]);
    assert!((max_iou(&extra, &l) - 2.0 / 4.0).abs() < 1e-12);
}

#[test]
fn max_iou_prefers_the_global_matching() {
    // Greedy would pair g0 with the box it overlaps most and leave g1 unmatched.
    let g = layout(&[(Category::Text, b(0.40, 0.5, 0.4, 0.2)), (Category::Text, b(0.15, 0.5, 0.2, 0.2))]);
    let r = layout(&[(Category::Text, b(0.30, 0.5, 0.4, 0.2)), (Category::Text, b(0.60, 0.5, 0.4, 0.2))]);
    let gb = g.bboxes();
    let rb = r.bboxes();
    let straight = gb[0].iou(&rb[0]) + gb[1].iou(&rb[1]);
    let crossed = gb[0].iou(&rb[1]) + gb[1].iou(&rb[0]);
    assert!((max_iou(&g, &r) - straight.max(crossed) / 2.0).abs() < 1e-12);
    assert!(gb[0].iou(&rb[0]) > gb[0].iou(&rb[1]));
    assert!(crossed > straight);
}

#[test]
fn overlap_examples() {
    for seed in 0..30 {
        let g = synthesize_random_layout(3 + seed as usize, seed).unwrap();
        assert_eq!(overlap(&g), 0.0, "seed {seed}");
    }
    let halves = layout(&[
        (Category::Background, BBox::FULL),
        (Category::Image, b(0.5, 0.25, 1.0, 0.5)),
        (Category::Text, b(0.5, 0.25, 1.0, 0.5)),
    ]);
    assert!((overlap(&halves) - 50.0).abs() < 1e-9);
    let perm = halves.permuted(&[2, 0, 1]);
    assert_eq!(overlap(&perm), overlap(&halves));
}

/// Ancestry from the CONTAIN channel by transitive closure.
fn overlap_oracle(g: &LayoutGraph) -> f64 {
    let m = derive_relations(g);
    let n = g.len();
    let mut anc = vec![vec![false; n]; n];
    for (i, j) in m.entries(RelationChannel::Contain) {
        anc[i][j] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if anc[i][k] && anc[k][j] {
                    anc[i][j] = true;
                }
            }
        }
    }
    let bx = g.bboxes();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if !anc[i][j] && !anc[j][i] {
                total += bx[i].intersection_area(&bx[j]);
            }
        }
    }
    100.0 * total
}

fn random_layout(r: &mut ChaCha8Rng, n: usize) -> LayoutGraph {
    let mut boxes = vec![(Category::Background, BBox::FULL)];
    for _ in 1..n {
        let w = r.random_range(0.05..0.6);
        let h = r.random_range(0.05..0.6);
        let x = r.random_range(w / 2.0..=1.0 - w / 2.0);
        let y = r.random_range(h / 2.0..=1.0 - h / 2.0);
        boxes.push((Category::ALL[r.random_range(0..6)], b(x, y, w, h)));
    }
    layout(&boxes)
}

#[test]
fn overlap_matches_a_pairwise_oracle() {
    let mut r = ChaCha8Rng::seed_from_u64(12);
    let mut zero = 0;
    for k in 0..300 {
        let g = random_layout(&mut r, 2 + k % 7);
        let (got, want) = (overlap(&g), overlap_oracle(&g));
        assert!((got - want).abs() < 1e-9);
        assert_eq!(got == 0.0, want == 0.0);
        zero += (got == 0.0) as usize;
    }
    assert!(zero > 0, "the sample should include overlap-free layouts");
}

proptest! {
    #[test]
    fn metrics_ignore_node_order(seed in 0u64..500, n in 2usize..10, rot in 0usize..10) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = random_layout(&mut r, n);
        let h = random_layout(&mut r, n);
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let gp = g.permuted(&perm);
        prop_assert!((overlap(&gp) - overlap(&g)).abs() < 1e-9);
        prop_assert!((max_iou(&gp, &h) - max_iou(&g, &h)).abs() < 1e-12);
        prop_assert!((max_iou(&g, &h) - max_iou(&h, &g)).abs() < 1e-12);
        let iou = max_iou(&g, &h);
        prop_assert!((0.0..=1.0).contains(&iou));
        let (mg, mh) = (derive_relations(&g), derive_relations(&h));
        let re = relation_error(&mg, &mh).unwrap();
        let re_p = relation_error(&mg.permuted(&perm), &mh.permuted(&perm)).unwrap();
        prop_assert!((re - re_p).abs() < 1e-15);
    }
}

fn gaussian(r: &mut ChaCha8Rng, n: usize, mu: &[f64]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| mu.iter().map(|m| { let z: f64 = StandardNormal.sample(r); m + z }).collect())
        .collect()
}

#[test]
fn fid_of_shifted_gaussians_matches_the_mean_term() {
    let mut r = ChaCha8Rng::seed_from_u64(21);
    let mu = [1.0, -1.0, 0.5, 0.5];
    let a = gaussian(&mut r, 10_000, &[0.0; 4]);
    let b = gaussian(&mut r, 10_000, &mu);
    let expected: f64 = mu.iter().map(|m| m * m).sum();
    let got = fid(&a, &b).unwrap();
    assert!((got - expected).abs() / expected < 0.05, "{got} vs {expected}");
    assert!((fid(&b, &a).unwrap() - got).abs() < 1e-9);
}

#[test]
fn fid_of_a_set_with_itself_is_zero() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let a = gaussian(&mut r, 200, &[0.3, 0.1, -2.0]);
    assert!(fid(&a, &a).unwrap() < 1e-6);
    // Fewer samples than dimensions still works thanks to the shrinkage.
    let few = gaussian(&mut r, 2, &[0.0; 8]);
    assert!(fid(&few, &few).unwrap() < 1e-6);
}

fn classifier() -> (Vec<LayoutGraph>, CorruptionClassifier) {
    let clean = synthetic_corpus(300, 4..=16, 31).unwrap();
    let c = train_corruption_classifier(&clean, 1, &ClassifierConfig::default()).unwrap();
    (clean, c)
}

#[test]
fn corruption_classifier_separates_clean_from_corrupt() {
    let (clean, c) = classifier();
    assert!(c.held_out_accuracy >= 0.85, "{}", c.held_out_accuracy);

    let corrupt: Vec<LayoutGraph> = clean.iter().enumerate().map(|(k, g)| corrupt_layout(g, 900 + k as u64, 0.1, 0.2)).collect();
    let fa: Vec<Vec<f64>> = clean.iter().map(|g| c.features(g)).collect();
    let fb: Vec<Vec<f64>> = corrupt.iter().map(|g| c.features(g)).collect();
    assert!(fa.iter().all(|v| v.len() == 32));
    let mean = |s: &[Vec<f64>]| -> Vec<f64> { (0..32).map(|d| s.iter().map(|v| v[d]).sum::<f64>() / s.len() as f64).collect() };
    let gap: f64 = mean(&fa).iter().zip(mean(&fb)).map(|(a, b)| (a - b).powi(2)).sum();
    assert!(gap > 0.0);
    assert!(fid(&fa, &fb).unwrap() > fid(&fa[..150], &fa[150..]).unwrap());

    let back = CorruptionClassifier::from_json(&c.to_json()).unwrap();
    assert_eq!(back.features(&clean[0]), c.features(&clean[0]));
    assert_eq!(back.fingerprint(), c.fingerprint());
}

#[test]
fn corruption_classifier_needs_enough_layouts() {
    let few = synthetic_corpus(20, 4..=8, 1).unwrap();
    assert!(matches!(
        train_corruption_classifier(&few, 0, &ClassifierConfig::default()),
        Err(MetricsError::TooFewLayouts { .. })
    ));
    let clean = synthetic_corpus(100, 4..=8, 2).unwrap();
    let impossible = ClassifierConfig {
        steps: 1,
        target_accuracy: 1.01,
        ..ClassifierConfig::default()
    };
    match train_corruption_classifier(&clean, 0, &impossible) {
        Err(MetricsError::ClassifierUnderfit { trace, .. }) => assert!(!trace.is_empty()),
        other => panic!("expected underfit, got {other:?}"),
    }
}

#[test]
fn corruption_keeps_ids_and_moves_boxes() {
    let g = synthesize_random_layout(12, 4).unwrap();
    let c = corrupt_layout(&g, 4, 0.1, 0.2);
    assert_eq!(c.len(), g.len());
    assert!(c.bboxes().iter().all(BBox::within_canvas));
    let changed = g.nodes().iter().zip(c.nodes()).filter(|(a, b)| a.category != b.category).count();
    assert_eq!(changed, 3);
    assert_eq!(c, corrupt_layout(&g, 4, 0.1, 0.2));
}

#[test]
fn report_buckets_add_up_and_serialize() {
    let (clean, c) = classifier();
    let samples: Vec<EvalSample> = clean
        .iter()
        .take(60)
        .enumerate()
        .map(|(k, g)| EvalSample {
            generated: corrupt_layout(g, k as u64, 0.05, 0.0),
            reference: g.clone(),
            target: None,
        })
        .collect();
    let report = evaluate(&samples, Some(&c), "gen", "toy").unwrap();
    let total: usize = report.per_difficulty.iter().map(|d| d.count).sum();
    assert_eq!(total, report.count);
    for (overall, pick) in [
        (report.re, (|d: &DifficultyBreakdown| d.re) as fn(&DifficultyBreakdown) -> f64),
        (report.miou, |d| d.miou),
        (report.ol, |d| d.ol),
    ] {
        let weighted: f64 = report.per_difficulty.iter().map(|d| pick(d) * d.count as f64).sum::<f64>() / total as f64;
        assert!((weighted - overall).abs() < 1e-9);
    }
    assert!(report.fid.unwrap() >= 0.0);
    assert_eq!(report.extractor.as_deref(), Some(c.fingerprint().as_str()));

    let csv = report.to_csv().unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("task,dataset,RE,mIoU,OL,FID,difficulty"));
    assert!(lines.next().unwrap().starts_with("gen,toy,"));
    assert_eq!(csv.lines().count(), 2 + report.per_difficulty.len());
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["count"], 60);

    let identical: Vec<EvalSample> = clean
        .iter()
        .take(10)
        .map(|g| EvalSample {
            generated: g.clone(),
            reference: g.clone(),
            target: None,
        })
        .collect();
    let perfect = evaluate(&identical, None, "gen", "toy").unwrap();
    assert_eq!((perfect.re, perfect.miou, perfect.ol, perfect.fid), (0.0, 1.0, 0.0, None));
}
