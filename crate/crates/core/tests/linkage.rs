mod common;

use common::*;
use locmob::linkage::*;
use locmob::screw::{unhat, Screw, Transform};
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::collections::BTreeMap;

const MISSING_JOINT: &str = r#"{
  "name": "broken",
  "joints": [
    { "id": 1, "kind": "revolute", "screw": [0, 0, 1, 0, 0, 0] },
    { "id": 2, "kind": "revolute", "screw": [0, 0, 1, 0, 1, 0] }
  ],
  "cycles": [ { "id": 1, "steps": [ { "joint": 1, "sign": 1 }, { "joint": 99, "sign": 1 } ] } ]
}"#;

fn validation_fields(text: &str) -> Vec<String> {
    match Linkage::from_json_str(text, &BTreeMap::new()) {
        Err(LinkageError::Validation(d)) => d.into_iter().map(|d| d.field).collect(),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn fixtures_load() {
    let fb = fourbar(1.0);
    assert_eq!((fb.n(), fb.gamma()), (4, 1));
    let dw = double_watt();
    assert_eq!((dw.n(), dw.gamma()), (10, 3));
    assert_eq!(dw.joints[8].screw, Screw::from_array([0., 0., 1., -0.5, 1.5, 0.]));
}

#[test]
fn parameters_are_substituted() {
    let lk = fourbar(2.5);
    assert_eq!(lk.joints[1].screw.v.y, 5.0);
    assert_eq!(lk.parameters["L"], 2.5);
}

#[test]
fn dangling_joint_is_reported() {
    let fields = validation_fields(MISSING_JOINT);
    assert!(fields.contains(&"cycles[0].steps[1].joint".to_string()));
    assert!(fields.contains(&"joints".to_string()));
}

#[test]
fn bad_screws_and_signs_are_reported() {
    let text = r#"{
      "name": "bad",
      "joints": [
        { "id": 1, "kind": "revolute", "screw": [0, 0, 2, 0, 0, 0] },
        { "id": 2, "kind": "revolute", "screw": [0, 0, 1, 0, 0, 1] },
        { "id": 3, "kind": "prismatic", "screw": [0, 0, 1, 1, 0, 0] },
        { "id": 3, "kind": "revolute", "screw": [0, 0, 1, 0, "Q", 0] }
      ],
      "cycles": [ { "id": 1, "steps": [
        { "joint": 1, "sign": 2 }, { "joint": 2, "sign": 1 }, { "joint": 2, "sign": 1 }, { "joint": 3, "sign": -1 }
      ] } ]
    }"#;
    let fields = validation_fields(text);
    for f in ["joints[0].screw", "joints[1].screw", "joints[2].screw", "joints[3].screw[4]", "joints[3].id", "cycles[0].steps[0].sign", "cycles[0].steps[2].joint"] {
        assert!(fields.contains(&f.to_string()), "{f} missing from {fields:?}");
    }
}

#[test]
fn malformed_and_missing_files() {
    assert!(matches!(Linkage::from_json_str("{ not json", &BTreeMap::new()), Err(LinkageError::Parse(_))));
    assert!(matches!(load_linkage("/nonexistent/linkage.json"), Err(LinkageError::Io { .. })));
    let over = BTreeMap::from([("M".to_string(), 1.0)]);
    assert!(load_linkage_with(fixture("fourbar.json"), &over).is_err());
}

#[test]
fn zero_configuration_closes_every_cycle() {
    let dw = double_watt();
    for l in 0..3 {
        assert_eq!(dw.cycle_map(l, &[0.0; 10]), Transform::identity());
    }
    let fb = fourbar(1.0);
    assert!(fb.closure_residual(&[0.3, 0.2, -0.1, 0.4]) > 1e-3);
}

#[test]
fn double_watt_third_cycle_uses_negative_signs() {
    let dw = double_watt();
    let signs: Vec<(usize, f64)> = dw.cycle_steps(2);
    assert_eq!(signs, vec![(4, -1.0), (5, -1.0), (6, 1.0), (7, 1.0)]);
    let j3 = dw.cycle_jacobian(2, &[0.0; 10]);
    for j in 0..10 {
        let col = Screw::from_array(std::array::from_fn(|r| j3[(r, j)]));
        let want = match j {
            4 | 5 => dw.joints[j].screw.scale(-1.0),
            6 | 7 => dw.joints[j].screw,
            _ => Screw::zero(),
        };
        assert_eq!(col, want);
    }
}

#[test]
fn single_joint_screw_is_constant_along_its_motion() {
    let lk = random_chain(4, 1);
    for q in [-1.0, 0.3, 2.0] {
        assert_eq!(lk.instantaneous_screws(0, &[q])[0], lk.joints[0].screw.scale(lk.cycle_steps(0)[0].1));
    }
}

#[test]
fn ranks_at_reference_configuration() {
    for l in [0.5, 1.0, 2.0] {
        let r = numeric_rank(&fourbar(l).stacked_jacobian(&[0.0; 4]), DEFAULT_RANK_TOL);
        assert_eq!(r.rank, 2);
        assert_eq!(r.kernel.ncols(), 2);
    }
    let dw = double_watt();
    let j = dw.stacked_jacobian(&[0.0; 10]);
    assert_eq!(j.shape(), (18, 10));
    let r = numeric_rank(&j, DEFAULT_RANK_TOL);
    assert_eq!(r.rank, 8);
    assert_eq!(r.kernel.ncols(), 2);
    assert_eq!(r.cokernel.ncols(), 10);
    assert!((&j * &r.kernel).abs().max() < 1e-12);
    assert!((r.cokernel.transpose() * &j).abs().max() < 1e-12);
}

#[test]
fn rank_ignores_row_order() {
    let j = double_watt().stacked_jacobian(&[0.0; 10]);
    let perm: Vec<usize> = (0..18).rev().collect();
    let p = DMatrix::from_fn(18, 10, |r, c| j[(perm[r], c)]);
    assert_eq!(numeric_rank(&p, DEFAULT_RANK_TOL).rank, 8);
}

#[test]
fn projection_reaches_the_closure_variety() {
    let lk = fourbar(1.0);
    let q = lk.project_to_closure(&[0.3, -0.01, -0.3, 0.02], 50, 1e-12).unwrap();
    assert!(lk.closure_residual(&q) < 1e-10);
    assert_eq!(numeric_rank(&lk.stacked_jacobian(&q), DEFAULT_RANK_TOL).rank, 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn screws_match_finite_differences(seed in 0u64..10_000, joints in 2usize..6, qseed in 0u64..10_000) {
        let lk = random_chain(seed, joints);
        let q = random_vec(qseed, joints, 1.5);
        let g0inv = lk.cycle_map(0, &q).inverse().to_homogeneous();
        let screws = lk.instantaneous_screws(0, &q);
        let h = 1e-5;
        for i in 0..joints {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            let d = (lk.cycle_map(0, &qp).to_homogeneous() - lk.cycle_map(0, &qm).to_homogeneous()) / (2.0 * h);
            let s = unhat(&(d * g0inv));
            prop_assert!((s - screws[i]).norm() < 1e-6, "joint {}: {:?} vs {:?}", i, s, screws[i]);
        }
    }
}
