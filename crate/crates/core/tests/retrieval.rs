mod common;

use std::f64::consts::PI;

use common::context_violations;
use context_memory::geometry::{fov_overlap_heuristic, Bounds, CameraPose, OverlapConfig};
use context_memory::retrieval::{
    dedup_non_adjacent, far_space_time_select, retrieve_context, retrieve_context_detailed,
    training_sample, DedupFill, RetrievalConfig, RetrievalError, Stage, StrategyKind,
    TrainingSampler,
};
use context_memory::store::MemoryStore;
use context_memory::trajectory::{generate_roam, RoamSpec, Trajectory};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn walk(n: usize, seed: u64) -> Vec<CameraPose> {
    // A wandering camera that keeps coming back near the origin.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut y, mut yaw) = (0.0f64, 0.0f64, 0.0f64);
    (0..n)
        .map(|_| {
            yaw += rng.random_range(-0.15..0.15);
            x = (x + 0.3 * yaw.cos()).clamp(-25.0, 25.0);
            y = (y + 0.3 * yaw.sin()).clamp(-25.0, 25.0);
            CameraPose::at(x, y, yaw)
        })
        .collect()
}

fn store(n: usize, seed: u64) -> MemoryStore {
    MemoryStore::from_poses(OverlapConfig::default(), &walk(n, seed)).unwrap()
}

#[test]
fn invariants_across_strategies_and_fills() {
    let s = store(900, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for strategy in StrategyKind::ALL {
        for fill in [DedupFill::None, DedupFill::Uniform, DedupFill::Spread] {
            for round in 0..12 {
                let cfg = RetrievalConfig {
                    strategy,
                    dedup_fill: fill,
                    k: [1, 2, 5, 20][round % 4],
                    far_slots: if round % 4 == 0 { 0 } else { 1 },
                    seed: round as u64,
                    ..RetrievalConfig::default()
                };
                let recent = rng.random_range(0..900);
                let target = CameraPose::at(
                    rng.random_range(-25.0..25.0),
                    rng.random_range(-25.0..25.0),
                    rng.random_range(-PI..PI),
                );
                let ids = retrieve_context(&s, &target, &cfg, Some(recent)).unwrap();
                let bad = context_violations(&s, &target, &cfg, recent, &ids);
                assert!(bad.is_empty(), "{strategy} {fill:?}: {bad:?}");
                assert_eq!(
                    ids,
                    retrieve_context(&s, &target, &cfg, Some(recent)).unwrap()
                );
            }
        }
    }
}

#[test]
fn stage_labels_are_consistent() {
    let s = store(600, 2);
    let target = *s.pose(300).unwrap();
    let out =
        retrieve_context_detailed(&s, &target, &RetrievalConfig::default(), Some(599)).unwrap();
    let recent: Vec<_> = out
        .context
        .iter()
        .filter(|c| c.stage == Stage::MostRecent)
        .collect();
    assert_eq!(recent.len(), 1);
    assert_eq!(recent[0].id, 599);
    for c in &out.context {
        match c.stage {
            Stage::DedupSurvivor => assert!(out.dedup_survivors.contains(&c.id)),
            Stage::FovPass | Stage::FarSlot => assert!(out.fov_candidates.contains(&c.id)),
            Stage::MostRecent => {}
            other => panic!("unexpected stage {other:?}"),
        }
    }
    assert!(out.context.iter().any(|c| c.stage == Stage::FarSlot));
}

#[test]
fn far_slots_widen_to_history_when_asked() {
    let s = store(600, 3);
    let target = CameraPose::at(24.0, 24.0, 0.0);
    let cfg = RetrievalConfig {
        far_from_all_history: true,
        ..RetrievalConfig::default()
    };
    let out = retrieve_context_detailed(&s, &target, &cfg, Some(599)).unwrap();
    assert!(out.context.len() <= 20);
    let far: Vec<u32> = out
        .context
        .iter()
        .filter(|c| c.stage == Stage::FarSlot)
        .map(|c| c.id)
        .collect();
    assert_eq!(far.len(), cfg.far_slots.min(599));
}

#[test]
fn empty_store_and_under_full() {
    let empty = MemoryStore::new(OverlapConfig::default()).unwrap();
    let t = CameraPose::at(0.0, 0.0, 0.0);
    assert!(
        retrieve_context(&empty, &t, &RetrievalConfig::default(), None)
            .unwrap()
            .is_empty()
    );
    let s = MemoryStore::from_poses(OverlapConfig::default(), &[t, t, t]).unwrap();
    for strategy in StrategyKind::ALL {
        let ids =
            retrieve_context(&s, &t, &RetrievalConfig::with_strategy(strategy), None).unwrap();
        if strategy == StrategyKind::FirstFrame {
            assert_eq!(ids, [2]);
        } else {
            assert_eq!(ids, [0, 1, 2], "{strategy}");
        }
    }
}

#[test]
fn far_target_gets_only_the_recent_frame() {
    let s = store(300, 8);
    let t = CameraPose::at(500.0, 500.0, 0.0);
    for strategy in [
        StrategyKind::FovRandom,
        StrategyKind::FovNonAdj,
        StrategyKind::FovNonAdjFarSpaceTime,
    ] {
        let ids =
            retrieve_context(&s, &t, &RetrievalConfig::with_strategy(strategy), None).unwrap();
        assert_eq!(ids, [299]);
    }
}

#[test]
fn unknown_recent_frame_is_an_error() {
    let s = store(10, 1);
    let err = retrieve_context(
        &s,
        &CameraPose::at(0.0, 0.0, 0.0),
        &RetrievalConfig::default(),
        Some(10),
    )
    .unwrap_err();
    assert!(matches!(err, RetrievalError::UnknownFrame(10)));
}

#[test]
fn invalid_config_names_field() {
    let s = store(10, 1);
    let t = CameraPose::at(0.0, 0.0, 0.0);
    for (cfg, field) in [
        (
            RetrievalConfig {
                k: 0,
                ..Default::default()
            },
            "k",
        ),
        (
            RetrievalConfig {
                far_slots: 20,
                ..Default::default()
            },
            "far_slots",
        ),
        (
            RetrievalConfig {
                time_scale: 0.0,
                ..Default::default()
            },
            "time_scale",
        ),
        (
            RetrievalConfig {
                recent_only_prob: 1.5,
                ..Default::default()
            },
            "recent_only_prob",
        ),
    ] {
        let err = retrieve_context(&s, &t, &cfg, None).unwrap_err();
        assert_eq!(err.field(), Some(field));
    }
}

#[test]
fn far_space_time_picks_line_endpoints() {
    let poses: Vec<CameraPose> = (0..10)
        .map(|i| CameraPose::at(i as f64, 0.0, 0.0))
        .collect();
    let s = MemoryStore::from_poses(OverlapConfig::default(), &poses).unwrap();
    let ids: Vec<u32> = (0..10).collect();
    let target = context_memory::retrieval::SpaceTime {
        x: 4.5,
        y: 0.0,
        t: 10.0,
    };
    let mut got = far_space_time_select(&ids, &s, target, 2, 1e12, 3);
    got.sort_unstable();
    assert_eq!(got, [0, 9]);
    assert!(far_space_time_select(&ids, &s, target, 0, 1.0, 3).is_empty());
}

proptest! {
    #[test]
    fn dedup_keeps_one_per_run(raw in proptest::collection::btree_set(0u32..200, 0..80), seed in any::<u64>()) {
        let ids: Vec<u32> = raw.into_iter().collect();
        let out = dedup_non_adjacent(&ids, seed);
        // Independent run count.
        let runs = ids.iter().enumerate().filter(|&(i, &v)| i == 0 || ids[i - 1] + 1 != v).count();
        prop_assert_eq!(out.len(), runs);
        prop_assert!(out.windows(2).all(|w| w[1] > w[0] + 1));
        prop_assert!(out.iter().all(|v| ids.contains(v)));
        prop_assert_eq!(out, dedup_non_adjacent(&ids, seed));
    }
}

fn roam() -> Trajectory {
    generate_roam(&RoamSpec::desk(Bounds::centered(30.0), 12, 7)).unwrap()
}

#[test]
fn training_samples_have_exact_sizes() {
    let traj = roam();
    let sampler =
        TrainingSampler::new(&traj, OverlapConfig::default(), RetrievalConfig::default()).unwrap();
    let mut recent_only = 0;
    for draw in 0..400 {
        let s = sampler.sample(draw);
        let ids = s.context_ids();
        assert!(ids.contains(&s.segment.start));
        if s.recent_only {
            recent_only += 1;
            assert_eq!(ids, [s.segment.start]);
        } else {
            assert_eq!(ids.len(), 20);
            assert!(ids.windows(2).all(|w| w[0] < w[1]));
            for &id in &ids {
                assert!(id == s.segment.start || !s.segment.contains(&id));
            }
        }
        assert_eq!(s, sampler.sample(draw));
    }
    assert!((20..=70).contains(&recent_only), "{recent_only}");
}

#[test]
fn training_fov_context_overlaps_the_segment() {
    let traj = roam();
    let cfg = RetrievalConfig::with_strategy(StrategyKind::FovNonAdj);
    let sampler = TrainingSampler::new(&traj, OverlapConfig::default(), cfg).unwrap();
    let poses: Vec<&CameraPose> = traj.poses().collect();
    for draw in 0..50 {
        let s = sampler.sample(draw);
        for c in s
            .context
            .iter()
            .filter(|c| matches!(c.stage, Stage::DedupSurvivor | Stage::FovPass))
        {
            let hit = s.segment.clone().any(|f| {
                let (a, b) = (poses[f as usize], poses[c.id as usize]);
                fov_overlap_heuristic(a, b, &OverlapConfig::default()).overlaps
                    || fov_overlap_heuristic(b, a, &OverlapConfig::default()).overlaps
            });
            assert!(hit, "draw {draw}: {} overlaps no segment frame", c.id);
        }
    }
}

#[test]
fn training_rejects_short_trajectories() {
    let traj = Trajectory::from_poses(
        (0..77).map(|i| CameraPose::at(i as f64 * 0.05, 0.0, 0.0)),
        None,
    );
    let err = training_sample(
        &traj,
        OverlapConfig::default(),
        &RetrievalConfig::default(),
        0,
    )
    .unwrap_err();
    assert!(matches!(
        err,
        RetrievalError::TrajectoryTooShort { len: 77, .. }
    ));
}
