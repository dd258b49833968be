use cocycle_lab::cocycle::{finite_scale_top_le, lyapunov_spectrum, Quadrature};
use cocycle_lab::linalg::Matrix;
use cocycle_lab::models::*;
use cocycle_lab::torus::{phase_grid, Frequency};
use cocycle_lab::trig::{MatrixTrigPoly, TrigPoly};

/// `int log |lambda cos(2 pi x) - E| dx`, Jensen's formula.
fn cos_log_integral(lambda: f64, e: f64) -> f64 {
    let lambda = lambda.abs();
    if e.abs() <= lambda {
        (lambda / 2.0).ln()
    } else {
        ((e.abs() + (e * e - lambda * lambda).sqrt()) / 2.0).ln()
    }
}

#[test]
fn potential_integral_matches_jensen() {
    for (lambda, e) in [(1.0, 0.0), (3.0, 2.9), (3.0, -1.0), (2.0, 5.0), (0.5, -3.0), (10.0, 25.0)] {
        let got = log_potential_integral(&TrigPoly::cos1(1), lambda, e);
        let want = cos_log_integral(lambda, e);
        // the log singularities cost a little accuracy inside the band
        assert!((got - want).abs() < 1e-4, "lambda={lambda} E={e}: {got} vs {want}");
    }
}

#[test]
fn schrodinger_le_tracks_jensen_in_both_regimes() {
    let lambda = 8.0;
    let rows = verify_sorets_spencer(
        &TrigPoly::cos1(1),
        &Frequency::golden(),
        lambda,
        &[-20.0, -4.0, 0.0, 7.0, 18.0],
        2000,
        &Quadrature::with_grid(256).without_birkhoff(),
    )
    .unwrap();
    for r in &rows {
        assert!((r.integral - cos_log_integral(lambda, r.energy)).abs() < 1e-4);
        assert!(r.residual < 2e-2, "{r:?}");
    }
    assert_eq!(rows.iter().filter(|r| r.regime == Regime::Inside).count(), 3);
    assert!(fitted_positivity_constant(&rows) <= 2f64.ln() + 2e-2);
}

/// `N(E) = 1 - arccos(E / 2) / pi` on `[-2, 2]`.
fn free_ids(e: f64) -> f64 {
    1.0 - (e / 2.0).clamp(-1.0, 1.0).acos() / std::f64::consts::PI
}

#[test]
fn free_laplacian_ids_matches_arccos_law() {
    let p = JacobiParams::free_laplacian();
    let phases = phase_grid(1, 4);
    for e in [-1.9, -1.0, -0.3, 0.0, 0.7, 1.5] {
        let got = ids(&p, &Frequency::golden(), e, 1000, &phases).unwrap().value;
        assert!((got - free_ids(e)).abs() <= 2e-3, "E={e}: {got} vs {}", free_ids(e));
    }
    assert_eq!(ids(&p, &Frequency::golden(), -2.5, 100, &phases).unwrap().value, 0.0);
    assert_eq!(ids(&p, &Frequency::golden(), 2.5, 100, &phases).unwrap().value, 1.0);
}

#[test]
fn free_laplacian_exponent_outside_the_band() {
    // L(E) = arccosh(|E| / 2) for |E| > 2, and 0 inside
    let p = JacobiParams::free_laplacian();
    for e in [2.5, -3.0, 6.0] {
        let c = jacobi_cocycle(&p, Frequency::golden(), e, false).unwrap();
        let s = lyapunov_spectrum(&c, 400, 4).unwrap();
        assert!((s.top() - (e.abs() / 2.0f64).acosh()).abs() < 1e-2, "E={e}: {}", s.top());
        let th = thouless_check(&p, &Frequency::golden(), e, 400, 400, &phase_grid(1, 4)).unwrap();
        assert!((th.rhs - (e.abs() / 2.0f64).acosh()).abs() < 1e-2, "{th:?}");
    }
    let c = jacobi_cocycle(&p, Frequency::golden(), 0.5, false).unwrap();
    assert!(lyapunov_spectrum(&c, 4000, 4).unwrap().top() < 5e-3);
}

#[test]
fn sturm_count_agrees_with_dense_eigenvalues() {
    let w = MatrixTrigPoly::diagonal(&[TrigPoly::cos1(1).scaled(0.3).plus_constant(1.0), TrigPoly::sin1(1).scaled(0.3).plus_constant(1.0)]).unwrap();
    let r = MatrixTrigPoly::constant(1, Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap());
    let f = MatrixTrigPoly::diagonal(&[TrigPoly::cos1(1), TrigPoly::sin1(1)]).unwrap();
    let p = JacobiParams::new(w, r, f, 2.0).unwrap();
    let freq = Frequency::golden();
    for x0 in [0.0, 0.31, 0.8] {
        let h = p.finite_volume(&[x0], freq.omega(), 25);
        let dense = nalgebra::DMatrix::from_fn(50, 50, |i, j| h[(i, j)]);
        let eig = nalgebra::SymmetricEigen::new(dense).eigenvalues;
        for e in [-3.0, -0.4, 0.0, 1.1, 2.6] {
            let want = eig.iter().filter(|&&v| v <= e).count();
            assert_eq!(inertia(&p, freq.omega(), &[x0], 25, e).below, want, "x={x0} E={e}");
        }
    }
}

#[test]
fn scalar_block_s_is_continuous_in_delta() {
    let f = TrigPoly::cos1(1).plus_constant(2.0);
    let q = Quadrature::with_grid(256).without_birkhoff();
    let base = finite_scale_top_le(&scalar_block_s(&f, 0.0, 0.0, Frequency::golden()).unwrap(), 500, &q).unwrap().estimate;
    // the diagonal limit is the Birkhoff average of log(2 + cos)
    assert!((base - ((2.0 + 3f64.sqrt()) / 2.0).ln()).abs() < 1e-6, "{base}");
    let mut prev = f64::INFINITY;
    for delta in [1e-1, 1e-2, 1e-3] {
        let c = scalar_block_s(&f, 0.0, delta, Frequency::golden()).unwrap();
        let d = (finite_scale_top_le(&c, 500, &q).unwrap().estimate - base).abs();
        assert!(d < prev, "delta={delta}: {d}");
        prev = d;
    }
    assert!(prev < 1e-2);
}

#[test]
fn decoupled_channels_have_almost_mathieu_exponents() {
    let w = MatrixTrigPoly::constant(1, Matrix::identity(2));
    let r = MatrixTrigPoly::constant(1, Matrix::zeros(2, 2));
    let f = MatrixTrigPoly::diagonal(&[TrigPoly::cos1(1), TrigPoly::sin1(1)]).unwrap();
    let p = JacobiParams::new(w, r, f, 1.0).unwrap();
    let rep = verify_positivity_simplicity(&p, &Frequency::golden(), &[20.0], &[0.0], 1000, 8).unwrap();
    for row in &rep.rows {
        // decoupled diagonal: both channels are almost Mathieu at coupling 20
        for e in &row.exponents {
            assert!((e - 10f64.ln()).abs() < 2e-2, "{row:?}");
        }
    }
}
