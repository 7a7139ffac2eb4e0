use std::sync::Arc;

use layout_workbench::app::{generate_auto, generate_lenient};
use layout_workbench::dataset::{mask_graph, synthesize_random_layout, NodeSlot};
use layout_workbench::metrics::relation_error;
use layout_workbench::model::{parse_layout, parse_rico_document, serialize_layout, Canvas, LayoutGraph};
use layout_workbench::relations::{derive_relations, RelationChannel, RelationMatrix};
use layout_workbench::synth::{
    complete, insert_random_nodes, BackendRegistry, ConstraintMode, GenerationRequest, GenerationResult, SynthError,
};

fn screen() -> LayoutGraph {
    let doc = serde_json::json!({
        "bounds": [0, 0, 1440, 2560],
        "children": [
            {"bounds": [0, 0, 1440, 240], "componentLabel": "Toolbar", "children": [
                {"bounds": [40, 40, 200, 200], "componentLabel": "Icon"},
                {"bounds": [240, 40, 1400, 200], "componentLabel": "Text", "text": "Inbox"}
            ]},
            {"bounds": [80, 400, 680, 1000], "componentLabel": "Image"},
            {"bounds": [760, 400, 1360, 1000], "componentLabel": "Text", "text": "hello"},
            {"bounds": [80, 1200, 1360, 1400], "componentLabel": "Input"},
            {"bounds": [80, 1600, 680, 1800], "componentLabel": "Text Button"},
            {"bounds": [760, 1600, 1360, 1800], "componentLabel": "Text Button"}
        ]
    });
    parse_rico_document(doc.to_string().as_bytes(), Canvas::RICO).unwrap()
}

#[test]
fn pixel_screen_regenerates_exactly() {
    let g = screen();
    let m = derive_relations(&g);
    let reg = BackendRegistry::with_solver();
    let res = reg.generate(&GenerationRequest::new(m.clone(), Canvas::RICO)).unwrap();
    assert!(derive_relations(&res.layout).values_eq(&m));
}

#[test]
fn pixel_screen_completes_for_every_mask() {
    let g = screen();
    let m = derive_relations(&g);
    for seed in 0..60 {
        let masked = mask_graph(&g, &m, 0.25, seed).unwrap();
        let res = complete(&masked, &m, seed).unwrap();
        assert_eq!(relation_error(&derive_relations(&res.layout), &m).unwrap(), 0.0);
        for (slot, node) in masked.nodes.iter().zip(res.layout.nodes()) {
            if let NodeSlot::Visible(v) = slot {
                assert_eq!(v, node);
            }
        }
    }
}

#[test]
fn rounded_listing_completion_mostly_succeeds() {
    let mut ok = 0;
    for seed in 0..100u64 {
        let g = synthesize_random_layout(6 + (seed as usize % 20), seed).unwrap();
        let m = derive_relations(&g);
        let (g, _) = parse_layout(&serialize_layout(&g, &m).unwrap(), Canvas::RICO).unwrap();
        let m = derive_relations(&g);
        let masked = mask_graph(&g, &m, 0.15, seed).unwrap();
        if let Ok(res) = complete(&masked, &m, seed) {
            assert!(derive_relations(&res.layout).values_eq(&m));
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok}/100");
}

#[test]
fn auto_falls_back_to_asserted() {
    let g = synthesize_random_layout(8, 3).unwrap();
    let mut m = derive_relations(&g);
    let (i, j) = m.entries(RelationChannel::Left).next().unwrap();
    m.set(RelationChannel::Left, i, j, false, false);
    let reg = BackendRegistry::with_solver();
    let exact = GenerationRequest::new(m.clone(), Canvas::RICO);
    assert!(matches!(reg.generate(&exact), Err(SynthError::Infeasible { .. })));
    let res = generate_auto(&reg, &exact).unwrap();
    let got = derive_relations(&res.layout);
    for c in RelationChannel::ALL {
        assert!(m.entries(c).all(|(a, b)| got.get(c, a, b)));
    }
}

#[test]
fn lenient_generation_drops_unrealisable_entries() {
    // Siblings 2 and 3, with 3's child ordered before 2 and 2 before 3 on both axes.
    let mut m = RelationMatrix::zeros(4);
    m.set(RelationChannel::Contain, 0, 1, true, false);
    m.set(RelationChannel::Contain, 0, 2, true, false);
    m.set(RelationChannel::Contain, 2, 3, true, false);
    for c in [RelationChannel::Top, RelationChannel::Left] {
        m.set(c, 1, 2, true, false);
        m.set(c, 3, 1, true, false);
    }
    let reg = BackendRegistry::with_solver();
    let req = GenerationRequest::new(m.clone(), Canvas::RICO);
    assert!(generate_auto(&reg, &req).is_err());
    let res = generate_lenient(&reg, &req).unwrap();
    let got = derive_relations(&res.layout);
    assert!(m.entries(RelationChannel::Contain).all(|(a, b)| got.get(RelationChannel::Contain, a, b)));
}

#[test]
fn custom_backends_are_checked() {
    let mut reg = BackendRegistry::with_solver();
    let liar = |req: &GenerationRequest| -> Result<GenerationResult, SynthError> {
        let mut res = layout_workbench::synth::synthesize(&req.clone().with_mode(ConstraintMode::Exact))?;
        res.layout = synthesize_random_layout(req.relations.len(), 99).unwrap();
        Ok(res)
    };
    reg.register("liar", Arc::new(liar)).unwrap();
    assert!(matches!(reg.register("liar", Arc::new(liar)), Err(SynthError::DuplicateBackend(_))));
    let g = synthesize_random_layout(9, 4).unwrap();
    let mut req = GenerationRequest::new(derive_relations(&g), Canvas::RICO);
    req.backend = "liar".into();
    assert!(matches!(reg.generate(&req), Err(SynthError::ContractViolation { .. })));
    req.backend = "nobody".into();
    assert!(matches!(reg.generate(&req), Err(SynthError::UnknownBackend(_))));
}

#[test]
fn inserted_nodes_keep_existing_relations() {
    let g = synthesize_random_layout(7, 12).unwrap();
    let m = derive_relations(&g);
    let reg = BackendRegistry::with_solver();
    let res = reg.generate(&GenerationRequest::new(m.clone(), Canvas::RICO)).unwrap();
    let more = insert_random_nodes(&res, 3, 5);
    let n = m.len();
    let got = derive_relations(&more.layout);
    assert!(more.layout.len() >= n);
    for c in RelationChannel::ALL {
        for i in 0..n {
            for j in 0..n {
                if c != RelationChannel::Contain && c != RelationChannel::Parallel {
                    assert_eq!(got.get(c, i, j), m.get(c, i, j), "{c:?} {i} {j}");
                }
            }
        }
    }
}
