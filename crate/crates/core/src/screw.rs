//! Rigid-body algebra on screws: exponential map, adjoint, Lie bracket.

use nalgebra::{DMatrix, Matrix3, Matrix4, Matrix6, Vector3};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// Twist coordinates `(w; v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Screw {
    pub w: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl Screw {
    pub fn new(w: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { w, v }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(Vector3::new(a[0], a[1], a[2]), Vector3::new(a[3], a[4], a[5]))
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.w.x, self.w.y, self.w.z, self.v.x, self.v.y, self.v.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w.norm_squared() + self.v.norm_squared()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.w * s, self.v * s)
    }

    pub fn hat(&self) -> ScrewMatrix {
        ScrewMatrix::from_screw(self)
    }

    pub fn bracket(&self, other: &Screw) -> Screw {
        lie_bracket(self, other)
    }
}

impl Add for Screw {
    type Output = Screw;
    fn add(self, o: Screw) -> Screw {
        Screw::new(self.w + o.w, self.v + o.v)
    }
}

impl Sub for Screw {
    type Output = Screw;
    fn sub(self, o: Screw) -> Screw {
        Screw::new(self.w - o.w, self.v - o.v)
    }
}

impl Neg for Screw {
    type Output = Screw;
    fn neg(self) -> Screw {
        Screw::new(-self.w, -self.v)
    }
}

pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// 4×4 hat form `[[ŵ, v], [0, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrewMatrix(Matrix4<f64>);

impl ScrewMatrix {
    pub fn from_screw(s: &Screw) -> Self {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&s.w));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&s.v);
        Self(m)
    }

    /// Reads the screw back; the skew part is taken from the lower triangle.
    pub fn to_screw(&self) -> Screw {
        let m = &self.0;
        Screw::new(
            Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]),
            Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]),
        )
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }
}

/// Un-hats a general 4×4 matrix, projecting its rotation block onto skew form.
pub fn unhat(m: &Matrix4<f64>) -> Screw {
    Screw::new(
        Vector3::new(
            0.5 * (m[(2, 1)] - m[(1, 2)]),
            0.5 * (m[(0, 2)] - m[(2, 0)]),
            0.5 * (m[(1, 0)] - m[(0, 1)]),
        ),
        Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]),
    )
}

/// Rigid displacement `(R, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Transform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn translation(p: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), p)
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Self {
        Self::new(m.fixed_view::<3, 3>(0, 0).into(), m.fixed_view::<3, 1>(0, 3).into())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    pub fn compose(&self, other: &Transform) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    /// `Ad_g` applied to a screw.
    pub fn act(&self, s: &Screw) -> Screw {
        let w = self.rotation * s.w;
        Screw::new(w, self.translation.cross(&w) + self.rotation * s.v)
    }

    /// Frobenius distance to the identity.
    pub fn distance_to_identity(&self) -> f64 {
        (self.to_homogeneous() - Matrix4::identity()).norm()
    }
}

impl Mul for Transform {
    type Output = Transform;
    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

impl Mul<&Transform> for &Transform {
    type Output = Transform;
    fn mul(self, rhs: &Transform) -> Transform {
        self.compose(rhs)
    }
}

pub fn exp_twist(y: &Screw, q: f64) -> Transform {
    let w = y.w * q;
    let v = y.v * q;
    let theta = w.norm();
    let wh = skew(&w);
    let wh2 = wh * wh;
    let (a, b, c) = if theta < 1e-6 {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let t2 = theta * theta;
        (
            theta.sin() / theta,
            (1.0 - theta.cos()) / t2,
            (theta - theta.sin()) / (t2 * theta),
        )
    };
    let id = Matrix3::identity();
    let r = id + wh * a + wh2 * b;
    let p = (id + wh * b + wh2 * c) * v;
    Transform::new(r, p)
}

pub fn adjoint(g: &Transform) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    let r = g.rotation;
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(skew(&g.translation) * r));
    m
}

pub fn lie_bracket(a: &Screw, b: &Screw) -> Screw {
    Screw::new(a.w.cross(&b.w), a.w.cross(&b.v) - b.w.cross(&a.v))
}

pub fn screws_to_matrix(screws: &[Screw]) -> DMatrix<f64> {
    DMatrix::from_fn(6, screws.len(), |i, j| screws[j].to_array()[i])
}

/// Lie algebra generated by a set of screws.
#[derive(Debug, Clone)]
pub struct Closure {
    pub dimension: usize,
    pub basis: Vec<Screw>,
}

pub const CLOSURE_TOL: f64 = 1e-9;

pub fn involutive_closure(screws: &[Screw], tol: f64) -> Closure {
    let mut basis = span_basis(screws, tol, None);
    let scale = screws_to_matrix(screws).norm().max(f64::MIN_POSITIVE);
    loop {
        let mut gens = basis.clone();
        for i in 0..basis.len() {
            for j in i + 1..basis.len() {
                gens.push(lie_bracket(&basis[i], &basis[j]));
            }
        }
        let next = span_basis(&gens, tol, Some(scale));
        if next.len() == basis.len() {
            return Closure { dimension: basis.len(), basis };
        }
        basis = next;
    }
}

fn span_basis(screws: &[Screw], tol: f64, scale: Option<f64>) -> Vec<Screw> {
    if screws.is_empty() {
        return Vec::new();
    }
    let m = screws_to_matrix(screws);
    let mut padded = DMatrix::zeros(6, m.ncols().max(6));
    padded.view_mut((0, 0), (6, m.ncols())).copy_from(&m);
    let svd = padded.svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let smax = svd.singular_values.max();
    let reference = scale.unwrap_or(smax);
    if reference == 0.0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    idx.into_iter()
        .filter(|&i| svd.singular_values[i] > tol * reference)
        .map(|i| {
            let c = u.column(i);
            Screw::from_array([c[0], c[1], c[2], c[3], c[4], c[5]])
        })
        .collect()
}
