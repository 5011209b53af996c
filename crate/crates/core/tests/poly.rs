use locmob::poly::*;
use proptest::prelude::*;

const N: usize = 3;

fn poly_strategy(max_deg: u8, coeff: f64) -> impl Strategy<Value = Poly> {
    prop::collection::vec((prop::collection::vec(0..=max_deg, N), -coeff..coeff), 0..6).prop_map(|terms| {
        Poly::from_terms(N, terms.into_iter().map(|(e, c)| (Monomial::from_exponents(&e), c)))
    })
}

fn int_poly_strategy() -> impl Strategy<Value = Poly> {
    prop::collection::vec((prop::collection::vec(0u8..=2, N), -5i32..=5), 0..4).prop_map(|terms| {
        Poly::from_terms(N, terms.into_iter().map(|(e, c)| (Monomial::from_exponents(&e), c as f64)))
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, N)
}

fn fitted_slope(eps: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn product_of_variables() {
    let x1 = Poly::var(2, 0);
    let x2 = Poly::var(2, 1);
    assert_eq!(x1.mul(&x2), Poly::parse("x1*x2", 2).unwrap());
}

#[test]
fn square_of_sum_matches_evaluation() {
    let s = Poly::parse("x1 + x2", 2).unwrap();
    let sq = s.pow(2);
    assert_eq!(sq, Poly::parse("x1^2 + 2*x1*x2 + x2^2", 2).unwrap());
    for k in 0..20 {
        let x = [0.37 * k as f64 - 3.0, 1.1 - 0.21 * k as f64];
        assert!(close(sq.eval(&x), (x[0] + x[1]).powi(2), 1e-14));
    }
}

#[test]
fn homogeneous_component_examples() {
    let p = Poly::parse("1 + x1 + x1*x2", 2).unwrap();
    assert_eq!(p.homogeneous_component(2), Poly::parse("x1*x2", 2).unwrap());
    assert!(p.homogeneous_component(3).is_zero());
    assert_eq!(p.eval(&[0.0, 0.0]), 1.0);
}

#[test]
fn fourbar_entry_evaluates_to_four() {
    let p = Poly::parse("x1 + x2 + x3 + x4", 4).unwrap();
    assert_eq!(p.eval(&[1.0; 4]), 4.0);
}

#[test]
fn mismatched_variable_counts_are_rejected() {
    let a = Poly::var(2, 0);
    let b = Poly::var(3, 0);
    assert_eq!(a.try_add(&b), Err(PolyError::VariableCount(2, 3)));
    assert!(a.try_mul(&b, 4).is_err());
}

#[test]
fn matrix_dimension_errors() {
    let a = PolyMatrix::zeros(2, 2, 3);
    assert!(matches!(a.mul(&a, 2), Err(PolyError::Dimension(_))));
    assert!(matches!(a.det(2), Err(PolyError::Dimension(_))));
}

#[test]
fn identity_is_neutral_and_zero_truncation_keeps_constants() {
    let x = Poly::var(2, 0);
    let a = PolyMatrix::from_fn(2, 2, |i, j| x.scale((i + 2 * j) as f64).add(&Poly::constant(2, 1.0)));
    assert_eq!(a.mul(&PolyMatrix::identity(2, 2), 5).unwrap(), a);
    let c = a.mul(&a, 0).unwrap();
    assert_eq!(c.get(0, 0), &Poly::constant(2, 2.0));
}

#[test]
fn constant_and_diagonal_determinants() {
    let m = nalgebra::DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
    let d = PolyMatrix::from_numeric(2, &m).det(3).unwrap();
    assert!((d.constant_term() - m.determinant()).abs() < 1e-12);
    let x1 = Poly::var(2, 0);
    let x2 = Poly::var(2, 1);
    let z = Poly::zero(2);
    let diag = PolyMatrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => x1.clone(),
        (1, 1) => x2.clone(),
        _ => z.clone(),
    });
    assert_eq!(diag.det(2).unwrap(), x1.mul(&x2));
}

#[test]
fn parse_accepts_printed_forms() {
    let p = Poly::parse("x1^4 + 4*x1^3*x2 - 8*x1 + 2.5e-1", 2).unwrap();
    assert_eq!(p.coeff_of(&[4, 0]), 1.0);
    assert_eq!(p.coeff_of(&[3, 1]), 4.0);
    assert_eq!(p.coeff_of(&[1, 0]), -8.0);
    assert_eq!(p.constant_term(), 0.25);
    assert!(Poly::parse("x3", 2).is_err());
    assert!(Poly::parse("", 2).is_err());
    assert!(Poly::parse("2 * y1", 2).is_err());
}

proptest! {
    #[test]
    fn arithmetic_commutes_with_evaluation(a in poly_strategy(4, 1e3), b in poly_strategy(4, 1e3), x in point(), s in -10.0f64..10.0) {
        let (ea, eb) = (a.eval(&x), b.eval(&x));
        let scale = a.max_term_at(&x).max(1.0) * b.max_term_at(&x).max(1.0);
        prop_assert!((a.add(&b).eval(&x) - (ea + eb)).abs() <= 1e-9 * scale);
        prop_assert!((a.sub(&b).eval(&x) - (ea - eb)).abs() <= 1e-9 * scale);
        prop_assert!((a.mul(&b).eval(&x) - ea * eb).abs() <= 1e-9 * scale);
        prop_assert!((a.scale(s).eval(&x) - s * ea).abs() <= 1e-9 * scale * s.abs().max(1.0));
        prop_assert!(a.add(&a.scale(-1.0)).is_zero());
    }

    #[test]
    fn components_reconstruct(p in poly_strategy(3, 10.0)) {
        let deg = p.degree().unwrap_or(0);
        let sum = (0..=deg).fold(Poly::zero(N), |acc, k| acc.add(&p.homogeneous_component(k)));
        prop_assert_eq!(sum, p);
    }

    #[test]
    fn homogeneous_scaling(p in poly_strategy(3, 10.0), x in point(), lambda in -3.0f64..3.0, k in 0usize..4) {
        let h = p.homogeneous_component(k);
        let scaled: Vec<f64> = x.iter().map(|v| v * lambda).collect();
        let want = lambda.powi(k as i32) * h.eval(&x);
        prop_assert!((h.eval(&scaled) - want).abs() <= 1e-10 * (1.0 + h.max_term_at(&scaled)));
    }

    #[test]
    fn text_form_round_trips(p in poly_strategy(3, 10.0)) {
        let q = Poly::parse(&p.to_string(), N).unwrap();
        prop_assert!(q.sub(&p).max_abs_coeff() == 0.0, "{} vs {}", p, q);
    }

    #[test]
    fn truncated_product_error_slope(
        pa in poly_strategy(3, 3.0),
        pb in poly_strategy(3, 3.0),
        la in prop::array::uniform4(0.5f64..2.0),
        lb in prop::array::uniform4(0.5f64..2.0),
        dir in point(),
        t in 0usize..3,
    ) {
        let a = pa.add(&Poly::linear(&la[1..])).add(&Poly::constant(N, la[0]));
        let b = pb.add(&Poly::linear(&lb[1..])).add(&Poly::constant(N, lb[0]));
        let full = a.mul(&b);
        let trunc = a.mul_trunc(&b, t);
        let rest = full.sub(&trunc);
        prop_assume!(!rest.is_zero());
        let lead = rest.homogeneous_component(t + 1);
        prop_assume!(lead.eval(&dir).abs() > 1e-2 * rest.max_abs_coeff());
        let eps = [1e-2, 1e-3, 1e-4];
        let errs: Vec<f64> = eps.iter().map(|e| {
            let x: Vec<f64> = dir.iter().map(|d| d * e).collect();
            (full.eval(&x) - trunc.eval(&x)).abs()
        }).collect();
        let slope = fitted_slope(&eps, &errs);
        prop_assert!(slope >= t as f64 + 0.7, "slope {}", slope);
        prop_assert!(trunc.degree().map_or(true, |d| d <= t));
    }

    #[test]
    fn matrix_product_commutes_with_evaluation(
        ea in prop::collection::vec(poly_strategy(2, 5.0), 4),
        eb in prop::collection::vec(poly_strategy(2, 5.0), 4),
        x in point(),
    ) {
        let a = PolyMatrix::from_fn(2, 2, |i, j| ea[2 * i + j].clone());
        let b = PolyMatrix::from_fn(2, 2, |i, j| eb[2 * i + j].clone());
        let prod = a.mul(&b, 64).unwrap().eval(&x);
        let want = a.eval(&x) * b.eval(&x);
        prop_assert!((prod - &want).abs().max() <= 1e-9 * (1.0 + want.abs().max() * 100.0));
    }

    #[test]
    fn leibniz_equals_cofactor(entries in prop::collection::vec(int_poly_strategy(), 16), size in 1usize..=4, t in 1usize..6) {
        let m = PolyMatrix::from_fn(size, size, |i, j| entries[4 * i + j].clone());
        prop_assert_eq!(m.det(t).unwrap(), m.det_leibniz(t).unwrap());
    }

    #[test]
    fn series_determinant_matches_polynomial_determinant(entries in prop::collection::vec(poly_strategy(2, 3.0), 9), x in point()) {
        let m = PolyMatrix::from_fn(3, 3, |i, j| entries[3 * i + j].clone());
        let d = m.det(64).unwrap();
        prop_assert!((d.eval(&x) - m.eval(&x).determinant()).abs() <= 1e-9 * (1.0 + d.max_term_at(&x)));
    }
}
