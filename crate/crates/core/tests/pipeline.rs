use std::collections::BTreeSet;

use proptest::prelude::*;

use regret3d::evaluation::{ground_truth_objects, IouMode, IouTable};
use regret3d::oversegment::RansacConfig;
use regret3d::pipeline::{prepare_scene, GridConfig, PreparedScene};
use regret3d::predictor::{majority_label, FnPredictor, ModelConfig, OraclePredictor, PredictorModel};
use regret3d::regret_grouping::{run_grouping, GroupingConfig};
use regret3d::synthgen::{generate_scene, Scene, SceneSpec};
use regret3d::training::{curriculum_train, TrainConfig, TrainScene};

fn scene(seed: u64) -> (Scene, PreparedScene) {
    let spec = SceneSpec {
        max_objects: 4,
        ..Default::default()
    };
    let scene = generate_scene(&spec, seed).unwrap();
    let prep = prepare_scene(&scene.cloud, &RansacConfig::default(), &GridConfig::default()).unwrap();
    (scene, prep)
}

#[test]
fn segments_are_disjoint_and_mostly_pure() {
    for seed in 0..3 {
        let (scene, prep) = scene(seed);
        let labels = scene.cloud.labels().unwrap();
        let mut seen = BTreeSet::new();
        for s in &prep.segments {
            assert!(s.indices().iter().all(|&i| seen.insert(i)), "seed {seed}: overlap");
            let major = majority_label(labels, s).unwrap();
            let agree = s.indices().iter().filter(|&&i| labels[i] == major).count();
            assert!(agree * 10 >= s.len() * 9, "seed {seed}: impure segment {}", s.id);
        }
        for (a, b) in prep.pairs.iter() {
            assert!(prep.segments.iter().any(|s| s.id == a) && prep.segments.iter().any(|s| s.id == b));
        }
    }
}

#[test]
fn oracle_proposals_never_mix_objects() {
    for seed in 0..3 {
        let (scene, prep) = scene(seed);
        let oracle = OraclePredictor::new(&scene.cloud).unwrap();
        let out = run_grouping(
            &scene.cloud,
            prep.segments,
            prep.pairs,
            &oracle,
            &GroupingConfig::default(),
        )
        .unwrap();
        let labels = scene.cloud.labels().unwrap();
        for p in &out.proposals {
            let objects: BTreeSet<u32> = p.segment.indices().iter().map(|&i| labels[i]).collect();
            assert!(
                objects.len() <= 2,
                "seed {seed}: proposal {} spans {objects:?}",
                p.segment.id
            );
        }
        let gts = ground_truth_objects(&scene.cloud, 20).unwrap();
        let ranked: Vec<(u32, Vec<usize>)> = out
            .proposals
            .iter()
            .map(|p| (p.segment.id.0, p.segment.indices().to_vec()))
            .collect();
        let table = IouTable::new(&scene.cloud, &ranked, &gts, IouMode::PointSet).unwrap();
        assert_eq!(table.recall(0.5, None).unwrap(), 1.0, "seed {seed}");
    }
}

#[test]
fn short_curriculum_on_real_scenes() {
    let scenes: Vec<TrainScene> = (10..13)
        .map(|seed| {
            let (scene, prep) = scene(seed);
            TrainScene {
                cloud: scene.cloud,
                segments: prep.segments,
                pairs: prep.pairs,
            }
        })
        .collect();
    let cfg = ModelConfig {
        encoder_widths: vec![8, 16],
        mlp_widths: vec![16, 8],
        seed: 3,
    };
    let model = PredictorModel::new(&cfg, 32).unwrap();
    let train = TrainConfig {
        epochs: 3,
        ..Default::default()
    };
    let out = curriculum_train(&scenes, model, &train).unwrap();
    let sizes: Vec<usize> = out.log.iter().map(|p| p.dataset_size).collect();
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(out.log.last().unwrap().merges, 0);
    for (scene, snap) in scenes.iter().zip(&out.state.snapshots) {
        let labels = scene.cloud.labels().unwrap();
        let covered: usize = snap.segments.values().map(|s| s.len()).sum();
        assert_eq!(covered, scene.segments.iter().map(|s| s.len()).sum::<usize>());
        for s in snap.segments.values() {
            let objects: BTreeSet<u32> = s.indices().iter().map(|&i| labels[i]).collect();
            assert!(objects.len() <= 2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn any_predictor_conserves_scene_points(salt in any::<u64>(), t in 0.0f64..1.0, k in 1usize..5, regret in any::<bool>()) {
        let (scene, prep) = scene(4);
        let covered: BTreeSet<usize> = prep.segments.iter().flat_map(|s| s.indices().to_vec()).collect();
        let g = FnPredictor(move |a: &regret3d::geometry::Segment, b: &regret3d::geometry::Segment| {
            let h = (a.indices()[0] as u64 ^ salt).wrapping_mul(0x9e37_79b9_7f4a_7c15)
                ^ (b.indices()[0] as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            (h >> 11) as f64 / (1u64 << 53) as f64
        });
        let cfg = GroupingConfig { t, k, regret_enabled: regret, ..Default::default() };
        let out = run_grouping(&scene.cloud, prep.segments, prep.pairs, &g, &cfg).unwrap();
        let mut all = Vec::new();
        for p in &out.proposals {
            all.extend_from_slice(p.segment.indices());
        }
        let set: BTreeSet<usize> = all.iter().copied().collect();
        prop_assert_eq!(set.len(), all.len());
        prop_assert_eq!(set, covered);
    }
}
