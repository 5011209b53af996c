#![allow(dead_code)]

use locmob::linkage::{load_linkage, load_linkage_with, Linkage};
use locmob::poly::{Poly, PolyMatrix};
use std::collections::BTreeMap;
use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fourbar(l: f64) -> Linkage {
    load_linkage_with(fixture("fourbar.json"), &BTreeMap::from([("L".to_string(), l)])).unwrap()
}

pub fn double_watt() -> Linkage {
    load_linkage(fixture("double_watt.json")).unwrap()
}

pub fn p(s: &str, n: usize) -> Poly {
    Poly::parse(s, n).unwrap()
}

/// Printed Taylor sums of the 4-bar loop map (orders 1..=3), as 4x4 polynomial matrices.
pub fn fourbar_printed(l: f64, order: usize) -> PolyMatrix {
    let x: Vec<Poly> = (0..4).map(|i| Poly::var(4, i)).collect();
    let s = x.iter().fold(Poly::zero(4), |a, b| a.add(b));
    let lin = x[0].add(&x[1].scale(2.0)).add(&x[2]);
    let mut m = PolyMatrix::zeros(4, 4, 4);
    m.set(0, 1, s.scale(-1.0));
    m.set(1, 0, s.clone());
    m.set(1, 3, lin.scale(-l));
    if order >= 2 {
        let sq = s.pow(2).scale(-0.5);
        m.set(0, 0, sq.clone());
        m.set(1, 1, sq);
        let x12 = x[0].add(&x[1]);
        let q = x[0].pow(2)
            .add(&x[0].mul(&x[1]).scale(4.0))
            .add(&x[1].pow(2).scale(2.0))
            .add(&x[2].pow(2))
            .add(&x12.mul(&x[2]).scale(2.0));
        m.set(0, 3, q.scale(0.5 * l));
    }
    if order >= 3 {
        let cube = s.pow(3).scale(1.0 / 6.0);
        m.set(0, 1, cube.sub(&s));
        m.set(1, 0, cube.scale(-1.0).add(&s));
        let x12 = x[0].add(&x[1]);
        let c = x[0].pow(3)
            .add(&x[1].mul(&x[0].pow(2)).scale(6.0))
            .add(&x[1].pow(2).mul(&x[0]).scale(6.0))
            .add(&x[1].pow(3).scale(2.0))
            .add(&x[2].pow(3))
            .add(&x12.mul(&x[2].pow(2)).scale(3.0))
            .add(&x12.pow(2).mul(&x[2]).scale(3.0))
            .sub(&lin.scale(6.0));
        m.set(1, 3, c.scale(l / 6.0));
    }
    m
}

/// Single-cycle linkage with `joints` random revolute/prismatic/helical screws.
pub fn random_chain(seed: u64, joints: usize) -> Linkage {
    use locmob::linkage::{CycleStep, FundamentalCycle, Joint, JointKind};
    use locmob::screw::Screw;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut rand_chacha::ChaCha8Rng| {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        v / v.norm()
    };
    let mut js = Vec::new();
    for id in 1..=joints {
        let kind = match rng.gen_range(0..6) {
            0 => JointKind::Prismatic,
            1 => JointKind::Helical,
            _ => JointKind::Revolute,
        };
        let w = unit(&mut rng);
        let p = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let screw = match kind {
            JointKind::Prismatic => Screw::new(Vector3::zeros(), w),
            JointKind::Helical => Screw::new(w, p.cross(&w) + w * rng.gen_range(-0.5..0.5)),
            JointKind::Revolute => Screw::new(w, p.cross(&w)),
        };
        js.push(Joint { id, kind, screw });
    }
    let steps = (1..=joints).map(|j| CycleStep { joint: j, sign: if rng.gen_bool(0.8) { 1 } else { -1 } }).collect();
    Linkage {
        name: format!("random chain {seed}"),
        parameters: BTreeMap::new(),
        joints: js,
        cycles: vec![FundamentalCycle { id: 1, steps }],
    }
}

pub fn random_vec(seed: u64, n: usize, scale: f64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}
