use std::f64::consts::PI;
use std::io::BufReader;

use context_memory::geometry::{Bounds, CameraPose};
use context_memory::trajectory::{
    check_constraints, generate_roam, loop_roam, rotate_and_return, ConstraintLimits, LoopSpec,
    RoamSpec, Trajectory, TrajectoryError, SEGMENT_LEN,
};
use proptest::prelude::*;

fn wrap(a: f64) -> f64 {
    (a + 3.0 * PI).rem_euclid(2.0 * PI) - PI
}

/// Segment limits recomputed from the raw poses.
fn segments_ok(t: &Trajectory) -> bool {
    let poses: Vec<&CameraPose> = t.poses().collect();
    poses.chunks_exact(SEGMENT_LEN).all(|seg| {
        let (a, b) = (seg[0], seg[SEGMENT_LEN - 1]);
        let disp = (b.x() - a.x()).hypot(b.y() - a.y());
        let net = wrap(b.yaw() - a.yaw()).abs();
        let cum: f64 = seg
            .windows(2)
            .map(|w| wrap(w[1].yaw() - w[0].yaw()).abs())
            .sum();
        (3.0..=6.0).contains(&disp) && net < 60f64.to_radians() && cum < 90f64.to_radians()
    })
}

#[test]
fn roams_satisfy_limits() {
    for seed in 0..12 {
        let t = generate_roam(&RoamSpec::desk(Bounds::centered(30.0), 12, seed)).unwrap();
        assert_eq!(t.len(), 1001);
        assert!(
            check_constraints(&t, &ConstraintLimits::default()).pass,
            "seed {seed}"
        );
        assert!(segments_ok(&t), "seed {seed}");
        assert!(t
            .poses()
            .all(|p| p.x().abs() <= 30.0 && p.y().abs() <= 30.0));
    }
}

#[test]
fn roam_is_deterministic() {
    let spec = RoamSpec::desk(Bounds::centered(30.0), 12, 7);
    assert_eq!(generate_roam(&spec).unwrap(), generate_roam(&spec).unwrap());
}

#[test]
fn tiny_bounds_are_unsatisfiable() {
    let mut spec = RoamSpec::desk(Bounds::centered(0.5), 6, 1);
    spec.max_attempts = 5;
    assert!(matches!(
        generate_roam(&spec),
        Err(TrajectoryError::ConstraintUnsatisfiable { attempts: 5 })
            | Err(TrajectoryError::SplineTooShort { .. })
    ));
}

#[test]
fn checker_examples() {
    let line = |step: f64| {
        Trajectory::from_poses(
            (0..77).map(|i| CameraPose::at(i as f64 * step, 0.0, 0.0)),
            None,
        )
    };
    let limits = ConstraintLimits::default();
    assert!(check_constraints(&line(4.2 / 76.0), &limits).pass);
    assert!(!check_constraints(&line(6.8 / 76.0), &limits).pass);
    assert!(!check_constraints(&line(0.0), &limits).pass);
    let r = check_constraints(&line(4.2 / 76.0), &limits);
    assert!((r.segments[0].displacement - 4.2).abs() < 1e-9);
}

#[test]
fn rotate_and_return_examples() {
    let start = CameraPose::at_deg(0.0, 0.0, 0.0);
    let t = rotate_and_return(start, 90.0, 154).unwrap();
    let p: Vec<&CameraPose> = t.poses().collect();
    assert!((p[77].yaw().to_degrees() - 90.0).abs() < 1e-9);
    assert_eq!(*p[153], start);

    let s = CameraPose::at_deg(2.0, 3.0, 45.0);
    let t = rotate_and_return(s, 180.0, 308).unwrap();
    let p: Vec<&CameraPose> = t.poses().collect();
    assert!((p[154].yaw().to_degrees() + 135.0).abs() < 1e-9);
    assert!(p.iter().all(|q| q.x() == 2.0 && q.y() == 3.0));

    let t = rotate_and_return(s, 0.0, 10).unwrap();
    assert!(t.poses().all(|q| *q == s));
    assert!(matches!(
        rotate_and_return(s, 10.0, 7),
        Err(TrajectoryError::InvalidFrameCount(7))
    ));
}

proptest! {
    #[test]
    fn rotate_and_return_ends_exactly_at_start(
        x in -100.0..100.0f64, y in -100.0..100.0f64, yaw in -PI..PI,
        deg in -720.0..720.0f64, half in 1usize..400,
    ) {
        let start = CameraPose::at(x, y, yaw);
        let t = rotate_and_return(start, deg, 2 * half).unwrap();
        let last = t.poses().last().unwrap();
        prop_assert_eq!(last.x().to_bits(), start.x().to_bits());
        prop_assert_eq!(last.y().to_bits(), start.y().to_bits());
        prop_assert_eq!(last.yaw().to_bits(), start.yaw().to_bits());
    }
}

#[test]
fn loop_revisits_its_start() {
    let t = loop_roam(&LoopSpec::default()).unwrap();
    let p: Vec<&CameraPose> = t.poses().collect();
    let lap = p.len() / 2;
    assert!((p[0].x() - p[lap].x()).hypot(p[0].y() - p[lap].y()) < 0.1);
    assert!(check_constraints(&t, &ConstraintLimits::default()).pass);
}

#[test]
fn jsonl_round_trip_is_bit_exact() {
    let t = generate_roam(&RoamSpec::desk(Bounds::centered(30.0), 10, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    t.save(&path).unwrap();
    let back = Trajectory::load(&path).unwrap();
    assert_eq!(back, t);
    for (a, b) in back.poses().zip(t.poses()) {
        assert_eq!(
            [a.x(), a.y(), a.yaw(), a.fov()].map(f64::to_bits),
            [b.x(), b.y(), b.yaw(), b.fov()].map(f64::to_bits)
        );
    }
    let text = std::fs::read_to_string(&path).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["fps"], 30);
    assert_eq!(header["segment_len"], 77);
    assert_eq!(header["seed"], 3);
    let first: serde_json::Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
    for key in ["t", "x", "y", "yaw", "fov"] {
        assert!(first.get(key).is_some(), "{key}");
    }
}

#[test]
fn bad_lines_report_their_number() {
    let text = "{\"fps\":30,\"segment_len\":77,\"seed\":null}\n{\"t\":0,\"x\":0,\"y\":0,\"yaw\":0,\"fov\":1}\n{\"t\":1,\"x\":0}\n";
    match Trajectory::read_jsonl(BufReader::new(text.as_bytes())) {
        Err(TrajectoryError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let text = "{\"fps\":30,\"segment_len\":77,\"seed\":null}\n{\"t\":0,\"x\":0,\"y\":0,\"yaw\":0,\"fov\":0}\n";
    assert!(Trajectory::read_jsonl(BufReader::new(text.as_bytes())).is_err());
}
