mod common;

use common::*;
use locmob::analysis::system::{build_cspace_system, PolySystem, SystemKind};
use locmob::poly::Poly;
use locmob::solver::*;

fn fourbar_v2() -> PolySystem {
    build_cspace_system(&fourbar(1.0), &[0.0; 4], 2).unwrap()
}

#[test]
fn newton_defaults() {
    let c = NewtonConfig::default();
    assert_eq!((c.max_iter, c.step_tol, c.residual_tol, c.damping), (50, 1e-12, 1e-10, 1.0));
}

#[test]
fn point_on_variety_is_returned_unchanged() {
    let sys = fourbar_v2();
    let x0 = [0.05, 0.0, -0.05, 0.0];
    let rep = newton_project(&sys, &x0, &NewtonConfig::default());
    assert_eq!(rep.status, NewtonStatus::Converged);
    assert_eq!(rep.iterations, 0);
    assert_eq!(rep.x, x0.to_vec());
}

#[test]
fn newton_lands_on_the_nearby_branch() {
    let sys = fourbar_v2();
    let rep = newton_project(&sys, &[0.1, 0.001, -0.1, 0.001], &NewtonConfig::default());
    assert!(rep.converged());
    let x = &rep.x;
    for f in [p("x1 + x3", 4), p("x2", 4), p("x4", 4)] {
        assert!(f.eval(x).abs() < 1e-8, "{f} = {}", f.eval(x));
    }
    assert!((x[0] - 0.1).abs() < 0.01);
}

#[test]
fn newton_reports_failure_with_diagnostics() {
    let sys = fourbar_v2();
    let cfg = NewtonConfig { max_iter: 2, ..NewtonConfig::default() };
    let rep = newton_project(&sys, &[5.0, -3.0, 4.0, 7.0], &cfg);
    assert_eq!(rep.status, NewtonStatus::Failed);
    assert!(!rep.converged());
    assert_eq!(rep.iterations, 2);
    assert!(rep.residual > 0.0 && rep.residual.is_finite());
}

#[test]
fn radius_floor_rejects_the_origin() {
    let sys = fourbar_v2();
    let cfg = NewtonConfig { radius_floor: Some(1e-3), ..NewtonConfig::default() };
    let rep = newton_project(&sys, &[1e-4, 0.0, 0.0, 0.0], &cfg);
    assert_eq!(rep.status, NewtonStatus::BelowFloor);
}

#[test]
fn section_validation() {
    assert!(SectionSpec::new(0, 0, -1.0, 1.0, 5).validate(4).is_err());
    assert!(SectionSpec::new(0, 4, -1.0, 1.0, 5).validate(4).is_err());
    assert!(SectionSpec::new(0, 1, 0.5, 0.5, 5).validate(4).is_err());
    assert!(SectionSpec::new(0, 1, f64::NAN, 0.5, 5).validate(4).is_err());
    assert_eq!(SectionSpec::new(0, 1, -1.0, 1.0, 5).values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
}

#[test]
fn empty_range_gives_empty_cloud() {
    let spec = SectionSpec::new(0, 1, -0.3, 0.3, 0);
    let cloud = sweep_section(&fourbar_v2(), &spec, 0, &SamplingConfig::default()).unwrap();
    assert!(cloud.points.is_empty());
    assert_eq!(cloud.to_csv(), "branch,residual,x1,x2,x3,x4\n");
}

#[test]
fn fourbar_section_has_two_crossing_branches() {
    let sys = fourbar_v2();
    let spec = SectionSpec::new(0, 1, -0.3, 0.3, 121);
    let cloud = sweep_section(&sys, &spec, 1, &SamplingConfig::default()).unwrap();
    let compiled = sys.compile();
    for pt in &cloud.points {
        assert!(compiled.residual(&pt.x).norm() < 1e-8);
    }
    for id in cloud.branch_ids() {
        let b = cloud.branch(id);
        for w in b.windows(2) {
            let d = w[0].x.iter().zip(&w[1].x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(d < 3.0 * 0.005 * 3.0 + 1e-12);
        }
    }
    assert!(cloud.points.iter().any(|p| p.x[0] < -0.1));
    assert!(cloud.points.iter().any(|p| p.x[0] > 0.1));
    let tangents = limiting_tangents(&cloud).unwrap();
    let (angle, a, b) = closest_branch_pair(&tangents).unwrap();
    assert_ne!(a, b);
    assert!(angle > 10.0, "angle {angle}");
}

#[test]
fn straight_line_cloud_has_one_tangent() {
    let dir = [0.6, 0.0, -0.8];
    let points = (1..=10)
        .map(|i| {
            let t = 0.01 * i as f64;
            CloudPoint { x: dir.iter().map(|d| d * t).collect(), residual: 0.0, branch: Some(0) }
        })
        .collect();
    let cloud = PointCloud { nvars: 3, points };
    let tangents = limiting_tangents(&cloud).unwrap();
    assert_eq!(tangents.len(), 1);
    assert!(angle_deg(&tangents[0].direction, &dir) < 1e-6);
    assert!(closest_branch_pair(&tangents).is_none());
}

#[test]
fn sparse_cloud_is_inconclusive() {
    let cloud = PointCloud { nvars: 2, points: vec![CloudPoint { x: vec![0.01, 0.0], residual: 0.0, branch: Some(0) }] };
    assert!(matches!(limiting_tangents(&cloud), Err(SolverError::Inconclusive(_))));
}

#[test]
fn csv_layout() {
    let cloud = PointCloud {
        nvars: 2,
        points: vec![
            CloudPoint { x: vec![0.1, -0.2], residual: 1e-13, branch: Some(3) },
            CloudPoint { x: vec![1.0 / 3.0, 0.0], residual: 0.0, branch: None },
        ],
    };
    let csv = cloud.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "branch,residual,x1,x2");
    assert!(lines[1].starts_with("3,1.0000000000000000e-13,"));
    assert!(lines[2].starts_with(","));
    let third: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(third, 1.0 / 3.0);
}

#[test]
fn plane_has_dimension_two() {
    let mut sys = PolySystem::new(3, vec![0.0; 3], 1, SystemKind::Cspace);
    sys.push(Poly::var(3, 2), "x3");
    let est = local_dimension(&sys, 0.05, 30, &SamplingConfig::default());
    assert_eq!(est.dimension, Some(2));
    assert!(est.consistent);
    assert_eq!(est.radii.iter().map(|r| r.radius).collect::<Vec<_>>(), vec![0.05, 0.025, 0.0125]);
    assert!(est.radii.iter().all(|r| r.convergence_rate() == 1.0));
}

#[test]
fn isolated_origin() {
    let mut sys = PolySystem::new(2, vec![0.0; 2], 2, SystemKind::Cspace);
    sys.push(Poly::parse("x1^2 + x2^2", 2).unwrap(), "circle");
    let est = local_dimension(&sys, 0.05, 30, &SamplingConfig::default());
    assert_eq!(est.dimension, Some(0));
    assert_eq!(est.status, DimensionStatus::IsolatedPoint);
}
