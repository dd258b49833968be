use cocycle_lab::cocycle::*;
use cocycle_lab::linalg::Matrix;
use cocycle_lab::models::{schrodinger_cocycle, SchrodingerParams};
use cocycle_lab::torus::Frequency;
use cocycle_lab::trig::{MatrixTrigPoly, TrigPoly};

/// `int log(a + cos(2 pi x)) dx = log((a + sqrt(a^2 - 1)) / 2)` for `a > 1`.
fn log_shifted_cos(a: f64) -> f64 {
    ((a + (a * a - 1.0).sqrt()) / 2.0).ln()
}

#[test]
fn constant_matrix_exponents_are_log_singular_moduli() {
    let c = CocycleSpec::constant(Matrix::from_diag(&[0.5, 3.0, 2.0]), Frequency::golden()).unwrap();
    let s = lyapunov_spectrum(&c, 50, 4).unwrap();
    for (got, want) in s.exponents.iter().zip([3f64.ln(), 2f64.ln(), 0.5f64.ln()]) {
        assert!((got - want).abs() < 1e-14, "{:?}", s.exponents);
    }
    // upper triangular: eigenvalue moduli, not singular values
    let t = CocycleSpec::constant(Matrix::from_rows(&[vec![2.0, 5.0], vec![0.0, 0.5]]).unwrap(), Frequency::golden()).unwrap();
    let s = lyapunov_spectrum(&t, 5000, 1).unwrap();
    assert!((s.exponents[0] - 2f64.ln()).abs() < 1e-3);
    assert!((s.exponents[1] - 0.5f64.ln()).abs() < 1e-3);
    assert!(s.sum().abs() < 1e-12);
}

#[test]
fn diagonal_cocycle_exponents_are_space_averages() {
    let p = MatrixTrigPoly::diagonal(&[
        TrigPoly::cos1(1).plus_constant(3.0),
        TrigPoly::cos1(1).plus_constant(1.5),
        TrigPoly::constant(1, 0.25),
    ])
    .unwrap();
    let c = CocycleSpec::trig(p, Frequency::golden()).unwrap();
    let s = lyapunov_spectrum(&c, 3000, 16).unwrap();
    let want = [log_shifted_cos(3.0), log_shifted_cos(1.5), 0.25f64.ln()];
    for (got, w) in s.exponents.iter().zip(want) {
        assert!((got - w).abs() < 2e-3, "{:?} vs {want:?}", s.exponents);
    }
}

#[test]
fn schrodinger_spectrum_is_symmetric() {
    let c = schrodinger_cocycle(SchrodingerParams::new(TrigPoly::cos1(1), 3.0, 0.7), Frequency::golden()).unwrap();
    let s = lyapunov_spectrum(&c, 2000, 16).unwrap();
    assert!((s.exponents[0] + s.exponents[1]).abs() < 1e-10);
    // Herman: L >= log(lambda / 2), with equality on the spectrum
    assert!(s.top() > 1.5f64.ln() - 1e-2, "{}", s.top());
}

#[test]
fn wedge_square_top_is_sum_of_two() {
    let p = MatrixTrigPoly::diagonal(&[
        TrigPoly::cos1(1).plus_constant(3.0),
        TrigPoly::sin1(1).plus_constant(2.0),
        TrigPoly::constant(1, 0.5),
    ])
    .unwrap();
    let c = CocycleSpec::trig(p, Frequency::golden()).unwrap();
    let w = ExteriorSquare::new(c.clone()).unwrap();
    assert_eq!(w.dim(), 3);
    let top = finite_scale_top_le(&w, 2000, &Quadrature::with_grid(64).without_birkhoff()).unwrap().estimate;
    let want = log_shifted_cos(3.0) + log_shifted_cos(2.0);
    assert!((top - want).abs() < 3e-3, "{top} vs {want}");
}

#[test]
fn spectrum_sum_obeys_determinant_rule() {
    // det A(x) = (2 + cos)(1 + 0.5 sin) - 0.25 sin cos
    let rows = |a: f64, b: f64, c: f64, d: f64| Matrix::from_rows(&[vec![a, b], vec![c, d]]).unwrap();
    let p = MatrixTrigPoly::new(
        1,
        2,
        2,
        vec![
            cocycle_lab::trig::MatrixTrigTerm { k: vec![0], cos: rows(2.0, 0.0, 0.0, 1.0), sin: Matrix::zeros(2, 2) },
            cocycle_lab::trig::MatrixTrigTerm { k: vec![1], cos: rows(1.0, 0.5, 0.0, 0.0), sin: rows(0.0, 0.0, 0.5, 0.5) },
        ],
    )
    .unwrap();
    let c = CocycleSpec::trig(p, Frequency::golden()).unwrap();
    let s = lyapunov_spectrum(&c, 4000, 16).unwrap();
    let grid = 1 << 16;
    let integral: f64 = (0..grid)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / grid as f64;
            ((2.0 + t.cos()) * (1.0 + 0.5 * t.sin()) - 0.25 * t.sin() * t.cos()).abs().ln()
        })
        .sum::<f64>()
        / grid as f64;
    assert!((s.sum() - integral).abs() < 1e-3, "{} vs {integral}", s.sum());
}

#[test]
fn singular_cocycle_has_minus_infinity_tail() {
    let c = CocycleSpec::constant(Matrix::from_diag(&[2.0, 0.0]), Frequency::golden()).unwrap();
    let s = lyapunov_spectrum(&c, 10, 2).unwrap();
    assert!((s.exponents[0] - 2f64.ln()).abs() < 1e-14);
    assert_eq!(s.exponents[1], f64::NEG_INFINITY);
}
