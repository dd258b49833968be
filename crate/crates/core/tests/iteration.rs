use cocycle_lab::cocycle::*;
use cocycle_lab::linalg::Matrix;
use cocycle_lab::models::{schrodinger_cocycle, SchrodingerParams};
use cocycle_lab::torus::{translate, Frequency, TorusPoint};
use cocycle_lab::trig::{MatrixTrigPoly, MatrixTrigTerm, TrigPoly};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use proptest::prelude::*;

/// `m * 2^e` exactly.
#[derive(Clone)]
struct Dyadic {
    m: BigInt,
    e: i64,
}

fn dyadic(v: f64) -> Dyadic {
    if v == 0.0 {
        return Dyadic { m: BigInt::zero(), e: 0 };
    }
    let bits = v.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    let m = BigInt::from(mant);
    Dyadic { m: if v < 0.0 { -m } else { m }, e }
}

fn align(a: &Dyadic, e: i64) -> BigInt {
    &a.m << (a.e - e) as usize
}

fn add(a: &Dyadic, b: &Dyadic) -> Dyadic {
    let e = a.e.min(b.e);
    Dyadic { m: align(a, e) + align(b, e), e }
}

fn mul(a: &Dyadic, b: &Dyadic) -> Dyadic {
    Dyadic { m: &a.m * &b.m, e: a.e + b.e }
}

/// `log |x|` for a huge dyadic, exact to double rounding.
fn log_abs(a: &Dyadic) -> f64 {
    let bits = a.m.bits() as i64;
    let shift = (bits - 60).max(0);
    let top = (a.m.abs() >> shift as usize).to_f64().unwrap();
    top.ln() + (shift + a.e) as f64 * std::f64::consts::LN_2
}

fn exact_product(c: &CocycleSpec, x: &TorusPoint, n: u64) -> Vec<Dyadic> {
    let m = c.dim();
    let mut acc: Vec<Dyadic> = (0..m * m).map(|i| dyadic(if i % (m + 1) == 0 { 1.0 } else { 0.0 })).collect();
    for j in 0..n {
        let step = c.eval(&translate(x, c.frequency(), j));
        assert_eq!(step.log_scale, 0.0);
        let s: Vec<Dyadic> = step.mat.as_slice().iter().map(|&v| dyadic(v)).collect();
        let mut next = Vec::with_capacity(m * m);
        for r in 0..m {
            for col in 0..m {
                let mut t = Dyadic { m: BigInt::zero(), e: 0 };
                for k in 0..m {
                    t = add(&t, &mul(&s[r * m + k], &acc[k * m + col]));
                }
                next.push(t);
            }
        }
        acc = next;
    }
    acc
}

/// Spectral norm of an exact 2x2 product from its Frobenius norm and
/// determinant: `s1^2 = (F^2 + sqrt(F^4 - 4 det^2)) / 2`.
fn exact_log_norm_2x2(p: &[Dyadic]) -> f64 {
    let f2 = p.iter().fold(Dyadic { m: BigInt::zero(), e: 0 }, |acc, v| add(&acc, &mul(v, v)));
    let det = add(&mul(&p[0], &p[3]), &Dyadic { m: -mul(&p[1], &p[2]).m, e: p[1].e + p[2].e });
    let lf2 = log_abs(&f2);
    // 4 det^2 / F^4 in [0, 1], computed in logs
    let ratio = if det.m.is_zero() { 0.0 } else { (2.0 * log_abs(&det) + 4f64.ln() - 2.0 * lf2).exp() };
    0.5 * (lf2 + ((1.0 + (1.0 - ratio).max(0.0).sqrt()) / 2.0).ln())
}

#[test]
fn renormalized_product_matches_big_integer_product() {
    let c = schrodinger_cocycle(SchrodingerParams::new(TrigPoly::cos1(1), 10.0, 0.0), Frequency::golden()).unwrap();
    for x0 in [0.0, 0.123, 0.77] {
        let x = TorusPoint::scalar(x0);
        let exact = exact_log_norm_2x2(&exact_product(&c, &x, 50));
        let ledger = iterate(&c, &x, 50).unwrap();
        assert!((ledger.log_norm() - exact).abs() <= 1e-12 * exact.abs(), "{} vs {exact}", ledger.log_norm());
    }
}

#[test]
fn constant_diagonal_has_log_two() {
    let c = CocycleSpec::constant(Matrix::from_diag(&[2.0, 1.0]), Frequency::golden()).unwrap();
    for n in [1u64, 10, 1000, 100_000] {
        let u = u_n(&c, &TorusPoint::scalar(0.3), n).unwrap();
        // rounding in the running log sum grows like n * eps
        assert!((u - 2f64.ln()).abs() < 1e-15 * (n as f64) + 1e-14, "n={n}: {u}");
    }
    let l = finite_scale_top_le(&c, 100, &Quadrature::with_grid(64)).unwrap();
    assert!((l.estimate - 2f64.ln()).abs() < 1e-13);
}

#[test]
fn huge_products_do_not_overflow() {
    let c = CocycleSpec::constant(Matrix::from_diag(&[1e200, 1e-200]), Frequency::golden()).unwrap();
    let led = iterate(&c, &TorusPoint::scalar(0.0), 10_000).unwrap();
    let want = 10_000.0 * 200.0 * 10f64.ln();
    assert!((led.log_norm() - want).abs() <= 1e-12 * want, "{} vs {want}", led.log_norm());
    assert!(led.factor.is_finite());
}

#[test]
fn vanishing_product_gives_minus_infinity() {
    let c = CocycleSpec::constant(Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap(), Frequency::golden()).unwrap();
    assert_eq!(u_n(&c, &TorusPoint::scalar(0.1), 1).unwrap(), 0.0);
    assert_eq!(u_n(&c, &TorusPoint::scalar(0.1), 2).unwrap(), f64::NEG_INFINITY);
    let l = finite_scale_top_le(&c, 5, &Quadrature::with_grid(64)).unwrap();
    assert!(l.degenerate);
    assert_eq!(l.estimate, f64::NEG_INFINITY);
}

#[test]
fn herman_lower_bound_is_attained_for_almost_mathieu() {
    // log(lambda / 2) = int log |lambda cos(2 pi x)| dx
    let lambda = 6.0;
    let c = schrodinger_cocycle(SchrodingerParams::new(TrigPoly::cos1(1), lambda, 0.0), Frequency::golden()).unwrap();
    let l = finite_scale_top_le(&c, 3000, &Quadrature::with_grid(512)).unwrap();
    assert!((l.estimate - (lambda / 2.0f64).ln()).abs() < 5e-3, "{}", l.estimate);
    let b = l.birkhoff.unwrap();
    assert!((b - l.estimate).abs() < 1e-2);
}

#[test]
fn truncation_floors_vanishing_samples() {
    let c = CocycleSpec::constant(Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap(), Frequency::golden()).unwrap();
    let q = Quadrature { truncation: Truncation::Floor(3.0), ..Quadrature::with_grid(64) };
    let l = finite_scale_top_le(&c, 5, &q).unwrap();
    assert_eq!(l.estimate, -3.0);
    let d = Quadrature { truncation: Truncation::Default, ..Quadrature::with_grid(64) };
    assert_eq!(finite_scale_top_le(&c, 5, &d).unwrap().estimate, -(5f64.powf(0.9)));
}

#[test]
fn rejects_bad_inputs() {
    let c = CocycleSpec::constant(Matrix::identity(2), Frequency::golden()).unwrap();
    assert!(iterate(&c, &TorusPoint::scalar(0.0), 0).is_err());
    assert!(iterate(&c, &TorusPoint::origin(2), 3).is_err());
    assert!(finite_scale_top_le(&c, 3, &Quadrature::with_grid(16)).is_err());
    assert!(CocycleSpec::constant(Matrix::zeros(2, 3), Frequency::golden()).is_err());
}

fn random_trig(coef: &[f64]) -> CocycleSpec {
    let m0 = Matrix::new(2, 2, coef[..4].to_vec()).unwrap();
    let m1 = Matrix::new(2, 2, coef[4..8].to_vec()).unwrap();
    let m2 = Matrix::new(2, 2, coef[8..12].to_vec()).unwrap();
    let p = MatrixTrigPoly::new(
        1,
        2,
        2,
        vec![
            MatrixTrigTerm { k: vec![0], cos: m0, sin: Matrix::zeros(2, 2) },
            MatrixTrigTerm { k: vec![1], cos: m1, sin: m2 },
        ],
    )
    .unwrap();
    CocycleSpec::trig(p, Frequency::golden()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_norm_is_subadditive(coef in prop::collection::vec(-2.0f64..2.0, 12), x in 0.0f64..1.0, n in 1u64..40, m in 1u64..40) {
        let c = random_trig(&coef);
        let x = TorusPoint::scalar(x);
        let whole = iterate(&c, &x, n + m).unwrap().log_norm();
        let first = iterate(&c, &x, n).unwrap().log_norm();
        let second = iterate_from(&c, &x, n, m).unwrap().log_norm();
        prop_assert!(whole <= first + second + 1e-9 * (1.0 + whole.abs()));
    }

    #[test]
    fn u_n_is_bounded_by_log_sup(coef in prop::collection::vec(-2.0f64..2.0, 12), x in 0.0f64..1.0, n in 1u64..60) {
        let c = random_trig(&coef);
        let u = u_n(&c, &TorusPoint::scalar(x), n).unwrap();
        prop_assert!(u <= c.log_sup_bound().unwrap() + 1e-12);
    }

    #[test]
    fn schrodinger_u_n_is_nonnegative(lambda in 0.1f64..20.0, e in -5.0f64..5.0, x in 0.0f64..1.0, n in 1u64..200) {
        // det = 1 forces ||A^(n)|| >= 1
        let c = schrodinger_cocycle(SchrodingerParams::new(TrigPoly::cos1(1), lambda, e), Frequency::golden()).unwrap();
        prop_assert!(u_n(&c, &TorusPoint::scalar(x), n).unwrap() >= -1e-12);
    }
}
