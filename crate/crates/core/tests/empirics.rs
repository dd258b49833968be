use std::f64::consts::PI;

use cocycle_lab::cocycle::CocycleSpec;
use cocycle_lab::empirics::*;
use cocycle_lab::linalg::Matrix;
use cocycle_lab::torus::{Frequency, TorusPoint};
use cocycle_lab::trig::{MatrixTrigPoly, TrigPoly};
use proptest::prelude::*;

/// The 1 x 1 cocycle `x -> cos(2 pi x)`, so `u_1(x) = log |cos(2 pi x)|`.
fn scalar_cos() -> CocycleSpec {
    CocycleSpec::trig(MatrixTrigPoly::scalar_times(&TrigPoly::cos1(1), &Matrix::identity(1)), Frequency::golden()).unwrap()
}

/// Lebesgue measure of `|cos(2 pi x)| < a`.
fn below(a: f64) -> f64 {
    1.0 - 2.0 / PI * a.min(1.0).acos()
}

#[test]
fn deviation_measure_of_log_cos_matches_arccos_law() {
    // mean of log |cos| is -log 2; deviating means |cos| < e^(-eps)/2 or |cos| > e^eps / 2
    let c = scalar_cos();
    for eps in [0.2, 0.5, 1.0] {
        let row = deviation_measure(&c, 1, eps, 20_000, Sampling::Grid).unwrap();
        assert!((row.mean_u + 2f64.ln()).abs() < 1e-3, "{row:?}");
        let want = below(0.5 * (-eps).exp()) + (1.0 - below(0.5 * eps.exp()));
        assert!((row.measure - want).abs() < 2e-3, "eps={eps}: {} vs {want}", row.measure);
    }
}

#[test]
fn dip_measure_of_log_cos_matches_arccos_law() {
    let c = scalar_cos();
    for t in [0.5, 2.0, 5.0] {
        let grid = dip_measure(&c, 1, t, 20_000, Sampling::Grid).unwrap();
        assert!((grid.measure - below((-t).exp())).abs() < 2e-4, "T={t}: {grid:?}");
        let rnd = dip_measure(&c, 1, t, 20_000, Sampling::Random { seed: 7 }).unwrap();
        assert!((rnd.measure - below((-t).exp())).abs() < 4.0 * rnd.uncertainty.max(1e-4), "T={t}: {rnd:?}");
    }
}

#[test]
fn truncated_mean_matches_quadrature() {
    let c = scalar_cos();
    let t = 1.5;
    let obs = truncate_u(&c, 1, t, 20_000, Sampling::Grid).unwrap();
    let fine = 1 << 20;
    let want = (0..fine)
        .map(|i| (2.0 * PI * (i as f64 + 0.5) / fine as f64).cos().abs().ln().max(-t))
        .sum::<f64>()
        / fine as f64;
    assert!((obs.truncated_mean - want).abs() < 1e-4, "{} vs {want}", obs.truncated_mean);
    let dips = dip_measure(&c, 1, t, 20_000, Sampling::Grid).unwrap();
    assert_eq!(obs.floored, (dips.measure * dips.samples as f64).round() as usize);
    assert!(obs.values.iter().all(|&v| v >= -t));
    assert!(obs.truncated_mean > obs.mean);
}

#[test]
fn birkhoff_average_converges_to_space_mean() {
    let p = MatrixTrigPoly::diagonal(&[TrigPoly::cos1(1).plus_constant(2.0), TrigPoly::constant(1, 1.0)]).unwrap();
    let c = CocycleSpec::trig(p, Frequency::golden()).unwrap();
    let want = ((2.0 + 3f64.sqrt()) / 2.0).ln();
    let rep = birkhoff_average(&c, 1, 20_000, &TorusPoint::scalar(0.1), want).unwrap();
    assert!(rep.deviation < 1e-3, "{rep:?}");
}

#[test]
fn random_sampling_is_reproducible() {
    let a = sample_phases(2, 1500, Sampling::Random { seed: 3 });
    let b = sample_phases(2, 1500, Sampling::Random { seed: 3 });
    let c = sample_phases(2, 1500, Sampling::Random { seed: 4 });
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(sample_u(&scalar_cos(), 1, 999, Sampling::Grid).is_err());
}

#[test]
fn decay_fit_recovers_stretched_exponential() {
    // mu_n = exp(-0.3 n^0.4)
    let ns = [100u64, 200, 400, 800, 1600];
    let mu: Vec<f64> = ns.iter().map(|&n| (-0.3 * (n as f64).powf(0.4)).exp()).collect();
    let fit = fit_decay_exponent(&ns, &mu).unwrap();
    assert!((fit.exponent - 0.4).abs() < 1e-12);
    assert!((fit.intercept - 0.3f64.ln()).abs() < 1e-12);
    assert!(fit_decay_exponent(&ns, &[0.0; 5]).is_none());
}

proptest! {
    #[test]
    fn measures_are_monotone_in_their_thresholds(values in prop::collection::vec(-10.0f64..2.0, 50..400), a in 0.01f64..3.0, b in 0.01f64..3.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(deviation_from_samples(&values, 1, hi).measure <= deviation_from_samples(&values, 1, lo).measure);
        prop_assert!(dip_from_samples(&values, 1, hi).measure <= dip_from_samples(&values, 1, lo).measure);
        let tr = truncate_from_samples(&values, 1, hi);
        prop_assert!(tr.truncated_mean >= tr.mean - 1e-12);
        prop_assert!(truncate_from_samples(&values, 1, lo).truncated_mean >= tr.truncated_mean - 1e-12);
    }
}
