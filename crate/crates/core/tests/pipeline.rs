//! Cross-module flows through files and the public API.

use espatial::bench::{generate_dataset, run_bench, strip_wall_clock, CategoryMix, QaDataset};
use espatial::config::EngineConfig;
use espatial::cot::{
    question_for, reason_over_plan, validate_step, FallbackReasoner, Grounding, LmClient, Policy,
    ProposalRequest,
};
use espatial::lego::{random_structure, GridExtent, LegoStructure};
use espatial::perception::{
    build_graph, load_graph, load_scene, save_graph, save_scene, synth_scene, SynthParams,
};
use espatial::query::{Category, SpatialQuery};
use espatial::scene::{Dynamics, Provenance, SceneGraph};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn scene_and_graph_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let dynamics = Dynamics::default();
    for seed in 0..10 {
        let s = synth_scene(
            seed,
            SynthParams {
                n_objects: 6,
                brick_mode: seed % 2 == 0,
            },
            &dynamics,
        );
        let (scene_path, graph_path) = (dir.path().join("s.json"), dir.path().join("g.json"));
        save_scene(&scene_path, &s.frame).unwrap();
        save_graph(&graph_path, &s.graph).unwrap();

        assert_eq!(load_graph(&graph_path).unwrap(), s.graph);
        let frame = load_scene(&scene_path).unwrap();
        let rebuilt = build_graph(&frame.detections, &frame.depths, None, &dynamics).unwrap();
        assert!(rebuilt.same_state(&s.graph), "seed {seed}");
    }
}

#[test]
fn saved_dataset_benches_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = EngineConfig {
        workers: 2,
        ..EngineConfig::default()
    };
    let ds = generate_dataset(17, 80, &CategoryMix::default(), &cfg);
    let path = dir.path().join("qa.json");
    ds.save(&path).unwrap();
    let loaded = QaDataset::load(&path).unwrap();
    assert_eq!(loaded, ds);

    let a = run_bench(&ds, &cfg).unwrap().to_json();
    let b = run_bench(&loaded, &EngineConfig { workers: 1, ..cfg })
        .unwrap()
        .to_json();
    assert_eq!(strip_wall_clock(&a).unwrap(), strip_wall_clock(&b).unwrap());
}

#[test]
fn plan_reasoning_rebuilds_the_target() {
    let dynamics = Dynamics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=10 {
        let target = random_structure(&mut rng, n, GridExtent::default());
        let empty = SceneGraph::empty(Provenance::Synthetic);
        let run = reason_over_plan(
            &target,
            &empty,
            &FallbackReasoner,
            &dynamics,
            Policy::default(),
        )
        .unwrap();
        assert_eq!(run.traces.len(), n);
        assert!(run.traces.iter().all(|t| !t.is_abstained()));
        let built = LegoStructure::from_graph(&run.final_graph, &dynamics.layout).unwrap();
        assert!(built.equals(&target));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every citation of a validated fallback step is necessary.
    #[test]
    fn fallback_citations_are_minimal(seed in 0u64..10_000, n in 2usize..6, brick_mode: bool) {
        let s = synth_scene(seed, SynthParams { n_objects: n, brick_mode }, &Dynamics::default());
        let mut gr = Grounding::new(s.graph.clone());
        if let Some(t) = &s.structure {
            gr = gr.with_target(t.clone());
        }
        let ids: Vec<_> = s.graph.nodes.iter().map(|n| n.id.clone()).collect();
        prop_assume!(ids.len() >= 2);
        let mut queries = vec![
            SpatialQuery::single(Category::Reachability, ids[0].clone()),
            SpatialQuery::single(Category::ArmFeasibility, ids[1].clone()),
        ];
        for c in [Category::Adjacency, Category::Overlap, Category::Distance, Category::Direction] {
            queries.push(SpatialQuery::pair(c, ids[0].clone(), ids[1].clone()));
        }
        if let Some(t) = &s.structure {
            queries.push(SpatialQuery::success(t.clone()));
        }
        for q in &queries {
            let req = ProposalRequest { context: String::new(), question: question_for(q), feedback: vec![] };
            let proposal = FallbackReasoner.propose(&req, &gr).unwrap();
            for step in proposal.steps.iter().filter(|s| validate_step(s, &gr).unwrap().is_validated()) {
                for i in 0..step.grounded_refs.len() {
                    let mut cut = step.clone();
                    cut.grounded_refs.remove(i);
                    prop_assert!(!validate_step(&cut, &gr).unwrap().is_validated(), "{}", step.claim);
                }
            }
        }
    }
}
