mod common;

use common::*;
use locmob::analysis::cone::{tangent_cone, ConeConfig, ConeMode, ConeProblem};
use locmob::analysis::system::build_cspace_system;
use locmob::differentials::*;
use locmob::linkage::{CycleStep, FundamentalCycle, Joint, JointKind, Linkage};
use locmob::screw::Screw;
use locmob::solver::{local_dimension, sweep_section, SamplingConfig, SectionSpec};
use nalgebra::{DMatrix, Matrix4};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn fitted_slope(eps: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

const EPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Remainders below this are rounding noise of entries of size one.
const NOISE_FLOOR: f64 = 1e-14;

/// Log-log slope over the points above the noise floor; `None` if fewer than two remain.
fn remainder_slope(errs: &[f64]) -> Option<f64> {
    let (eps, errs): (Vec<f64>, Vec<f64>) = EPS.iter().zip(errs).filter(|(_, e)| **e > NOISE_FLOOR).unzip();
    (eps.len() >= 2).then(|| fitted_slope(&eps, &errs))
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn h1(lk: &Linkage, jet: &Jet, t: f64) -> [f64; 6] {
    let q = jet.point(t);
    let n = lk.n();
    let mut qd = vec![0.0; n];
    for (m, d) in jet.derivatives.iter().enumerate() {
        let c = t.powi(m as i32) / factorial(m);
        for j in 0..n {
            qd[j] += c * d[j];
        }
    }
    let v = lk.cycle_jacobian(0, &q) * nalgebra::DVector::from_vec(qd);
    std::array::from_fn(|i| v[i])
}

fn minor_along(lk: &Linkage, jet: &Jet, rows: &[usize], cols: &[usize], t: f64) -> f64 {
    let j = lk.stacked_jacobian(&jet.point(t));
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| j[(rows[a], cols[b])]).determinant()
}

/// Four revolute joints on one line: a flattened 4-bar with random link lengths.
fn collinear_fourbar(xs: [f64; 4]) -> Linkage {
    Linkage {
        name: "collinear".into(),
        parameters: BTreeMap::new(),
        joints: xs
            .iter()
            .enumerate()
            .map(|(i, &x)| Joint { id: i + 1, kind: JointKind::Revolute, screw: Screw::from_array([0., 0., 1., 0., -x, 0.]) })
            .collect(),
        cycles: vec![FundamentalCycle { id: 1, steps: (1..=4).map(|j| CycleStep { joint: j, sign: 1 }).collect() }],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn recursion_matches_direct(seed in 0u64..100_000, joints in 1usize..7, nu in 1usize..4) {
        let lk = random_chain(seed, joints);
        let q0 = vec![0.0; joints];
        let a = differential_table(&lk, 0, &q0, nu).unwrap();
        let b = differential_table_direct(&lk, 0, &q0, nu).unwrap();
        for k in 0..nu {
            prop_assert!(a.df[k].max_abs_diff(&b.df[k]) < 1e-10);
            prop_assert!(a.df_inv[k].max_abs_diff(&b.df_inv[k]) < 1e-10);
        }
    }

    #[test]
    fn differentials_are_homogeneous(seed in 0u64..100_000, joints in 1usize..7) {
        let lk = random_chain(seed, joints);
        let t = differential_table(&lk, 0, &vec![0.0; joints], 4).unwrap();
        for k in 1..=4 {
            prop_assert!(t.df[k - 1].is_homogeneous(k));
            prop_assert!(t.df_inv[k - 1].is_homogeneous(k));
            for s in &t.ds {
                prop_assert!(s[k].0.iter().all(|p| p.is_homogeneous(k)));
            }
        }
    }

    #[test]
    fn taylor_remainder_slope(seed in 0u64..100_000, joints in 2usize..7, nu in 1usize..4) {
        let lk = random_chain(seed, joints);
        let t = differential_table(&lk, 0, &vec![0.0; joints], nu).unwrap();
        let sum = t.taylor_sum(nu);
        let dir = unit(&random_vec(seed ^ 0xabc, joints, 1.0));
        let errs: Vec<f64> = EPS.iter().map(|e| {
            let x: Vec<f64> = dir.iter().map(|d| d * e).collect();
            let f = lk.cycle_map(0, &x).to_homogeneous();
            (f - Matrix4::identity() - Matrix4::from_iterator(sum.eval(&x).iter().copied())).norm()
        }).collect();
        let slope = remainder_slope(&errs);
        prop_assume!(slope.is_some());
        let slope = slope.unwrap();
        prop_assert!(slope >= nu as f64 + 0.7, "nu {} slope {} errs {:?}", nu, slope, errs);
    }

    #[test]
    fn minor_remainder_slope(seed in 0u64..100_000, nu in 1usize..4) {
        let lk = random_chain(seed, 5);
        let tables = all_tables(&lk, &[0.0; 5], nu + 2).unwrap();
        let (rows, cols) = ([0usize, 2, 4], [0usize, 2, 3]);
        let mut dm = minor_differentials(&tables, &rows, &cols, nu + 2).unwrap();
        let next = dm.pop().unwrap();
        let lead = dm.pop().unwrap();
        let dir = unit(&random_vec(seed ^ 0x5eed, 5, 1.0));
        let (a, b) = (lead.eval(&dir) / factorial(nu + 1), next.eval(&dir) / factorial(nu + 2));
        prop_assume!(lead.eval(&dir).abs() > 0.1 * lead.max_abs_coeff());
        prop_assume!((b * EPS[0]).abs() < 0.5 * a.abs());
        let m0 = minor_along(&lk, &Jet::straight(vec![0.0; 5], dir.clone(), 1), &rows, &cols, 0.0);
        let errs: Vec<f64> = EPS.iter().map(|e| {
            let x: Vec<f64> = dir.iter().map(|d| d * e).collect();
            let approx: f64 = dm.iter().enumerate().map(|(k, p)| p.eval(&x) / factorial(k + 1)).sum();
            let jet = Jet::straight(vec![0.0; 5], dir.clone(), 1);
            (minor_along(&lk, &jet, &rows, &cols, *e) - m0 - approx).abs()
        }).collect();
        let slope = remainder_slope(&errs);
        prop_assume!(slope.is_some());
        let slope = slope.unwrap();
        prop_assert!(slope >= nu as f64 + 0.7, "nu {} slope {} errs {:?}", nu, slope, errs);
    }

    #[test]
    fn screw_derivatives_match_finite_differences(seed in 0u64..100_000) {
        let lk = random_chain(seed, 3);
        let jet = Jet::new(random_vec(seed + 1, 3, 1.0), vec![random_vec(seed + 2, 3, 1.0), random_vec(seed + 3, 3, 1.0)]);
        let sj = screw_time_derivatives(&lk, 0, &jet, 2).unwrap();
        let h = 1e-3;
        let s = |t: f64| lk.instantaneous_screws(0, &jet.point(t));
        let (sp, s0, sm) = (s(h), s(0.0), s(-h));
        for i in 0..3 {
            let d1 = (sp[i] - sm[i]).scale(0.5 / h);
            let d2 = (sp[i] - s0[i].scale(2.0) + sm[i]).scale(1.0 / (h * h));
            prop_assert!((d1 - sj.derivatives[i][1]).norm() < 1e-5 * (1.0 + d1.norm()));
            prop_assert!((d2 - sj.derivatives[i][2]).norm() < 1e-5 * (1.0 + d2.norm()));
        }
    }

    #[test]
    fn constraint_derivatives_match_finite_differences(seed in 0u64..100_000, joints in 2usize..6) {
        let lk = random_chain(seed, joints);
        let jet = Jet::new(
            random_vec(seed + 1, joints, 1.0),
            (0..3).map(|m| random_vec(seed + 2 + m, joints, 1.0)).collect(),
        );
        let h = 1e-3;
        let (hp, h0, hm) = (h1(&lk, &jet, h), h1(&lk, &jet, 0.0), h1(&lk, &jet, -h));
        let (b1, _) = constraint_derivative(&lk, 0, &jet, 1).unwrap();
        let (b2, _) = constraint_derivative(&lk, 0, &jet, 2).unwrap();
        let (b3, _) = constraint_derivative(&lk, 0, &jet, 3).unwrap();
        for c in 0..6 {
            let d1 = (hp[c] - hm[c]) / (2.0 * h);
            let d2 = (hp[c] - 2.0 * h0[c] + hm[c]) / (h * h);
            prop_assert!((h0[c] - b1.to_array()[c]).abs() < 1e-12);
            prop_assert!((d1 - b2.to_array()[c]).abs() < 1e-5 * (1.0 + d1.abs()), "H2 {} vs {}", d1, b2.to_array()[c]);
            prop_assert!((d2 - b3.to_array()[c]).abs() < 1e-5 * (1.0 + d2.abs()), "H3 {} vs {}", d2, b3.to_array()[c]);
        }
    }

    #[test]
    fn split_constraint_derivative_is_consistent(seed in 0u64..100_000, joints in 2usize..6, i in 1usize..4) {
        let lk = random_chain(seed, joints);
        let jet = Jet::new(random_vec(seed + 1, joints, 1.0), (0..3).map(|m| random_vec(seed + 7 + m, joints, 1.0)).collect());
        let (h, b) = constraint_derivative(&lk, 0, &jet, i).unwrap();
        let jq = lk.cycle_jacobian(0, &jet.base) * nalgebra::DVector::from_column_slice(&jet.derivatives[i - 1]);
        for c in 0..6 {
            prop_assert!((h.to_array()[c] - jq[c] - b.to_array()[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn minor_derivatives_match_finite_differences(seed in 0u64..100_000, k in 1usize..4) {
        let lk = random_chain(seed, 3);
        let jet = Jet::new(random_vec(seed + 1, 3, 1.0), vec![random_vec(seed + 2, 3, 1.0), random_vec(seed + 3, 3, 1.0)]);
        let rows: Vec<usize> = (0..k).map(|r| (r * 2 + seed as usize) % 6).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        prop_assume!(rows.len() == k);
        let cols: Vec<usize> = (0..k).collect();
        let mt = minor_time_derivatives(&lk, &jet, &rows, &cols, 2).unwrap();
        let h = 1e-3;
        let m = |t: f64| minor_along(&lk, &jet, &rows, &cols, t);
        let d1 = (m(h) - m(-h)) / (2.0 * h);
        let d2 = (m(h) - 2.0 * m(0.0) + m(-h)) / (h * h);
        prop_assert!((d1 - mt[0]).abs() < 1e-5 * (1.0 + d1.abs()), "M1 {} vs {}", d1, mt[0]);
        prop_assert!((d2 - mt[1]).abs() < 1e-5 * (1.0 + d2.abs()), "M2 {} vs {}", d2, mt[1]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn cone_sequence_is_monotone(a in 0.3f64..2.0, b in 0.3f64..2.0, c in 0.3f64..2.0) {
        let lk = collinear_fourbar([0.0, a, a + b, a + b + c]);
        let q0 = [0.0; 4];
        let cfg = ConeConfig { max_order: 4, ..ConeConfig::default() };
        let res = tangent_cone(&lk, &q0, &cfg, ConeMode::Exact).unwrap();
        let problem = ConeProblem::new(&lk, &q0, 4, None, cfg.tol_rank).unwrap();
        for w in res.history.windows(2) {
            for br in &w[1].branches {
                for v in &br.basis {
                    let r = problem.membership(v, w[0].order);
                    prop_assert!(r < 1e3 * cfg.tol_cone, "order {} direction {:?} residual {}", w[0].order, v, r);
                }
            }
            prop_assert!(w[1].branches.iter().map(|b| b.dimension).max() <= w[0].branches.iter().map(|b| b.dimension).max());
        }
    }
}

#[test]
fn seeded_sampling_is_deterministic() {
    let lk = fourbar(1.0);
    let sys = build_cspace_system(&lk, &[0.0; 4], 3).unwrap();
    let cfg = SamplingConfig { seed: 42, ..SamplingConfig::default() };
    let a = local_dimension(&sys, 0.05, 40, &cfg);
    let b = local_dimension(&sys, 0.05, 40, &cfg);
    assert_eq!(a, b);
    let c = local_dimension(&sys, 0.05, 40, &SamplingConfig { seed: 43, ..cfg });
    assert_ne!(a.samples, c.samples);

    let spec = SectionSpec::new(0, 1, -0.2, 0.2, 40);
    let s1 = sweep_section(&sys, &spec, 7, &cfg).unwrap().to_csv();
    let s2 = sweep_section(&sys, &spec, 7, &cfg).unwrap().to_csv();
    assert_eq!(s1, s2);

    let cone_cfg = ConeConfig { samples: 90, seed: 5, ..ConeConfig::default() };
    let k1 = tangent_cone(&lk, &[0.0; 4], &cone_cfg, ConeMode::Sampled).unwrap();
    let k2 = tangent_cone(&lk, &[0.0; 4], &cone_cfg, ConeMode::Sampled).unwrap();
    assert_eq!(k1, k2);
}
