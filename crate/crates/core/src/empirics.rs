//! Empirical measurement of deviation sets, dips, truncation and Birkhoff
//! averages of `u_n(x) = (1/n) log ||A^(n)(x)||` on the torus.
//!
//! Measures are fractions of a deterministic midpoint grid by default; a
//! seeded random mode exists for higher-dimensional tori. `-inf` samples
//! count as deviating and as dipping.

use crate::cocycle::{iterate_from, truncated_mean, u_values, Cocycle};
use crate::error::{input, Result};
use crate::linalg::pairwise_mean;
use crate::rng::SeedStream;
use crate::torus::{phase_grid_at_least, random_phases, TorusPoint};

pub const MIN_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// Smallest midpoint grid with at least the requested number of points.
    Grid,
    Random { seed: u64 },
}

/// The phases a [`Sampling`] mode visits, in order.
pub fn sample_phases(d: usize, samples: usize, sampling: Sampling) -> Vec<TorusPoint> {
    match sampling {
        Sampling::Grid => phase_grid_at_least(d, samples),
        Sampling::Random { seed } => random_phases(d, samples, &mut SeedStream::new(seed).stream("empirics/phases")),
    }
}

/// `u_n` over the sampling set, in sampling order.
pub fn sample_u<C: Cocycle + ?Sized>(c: &C, n: u64, samples: usize, sampling: Sampling) -> Result<Vec<f64>> {
    if n < 1 {
        return input("n must be at least 1");
    }
    if samples < MIN_SAMPLES {
        return input(format!("at least {MIN_SAMPLES} samples are required, got {samples}"));
    }
    Ok(u_values(c, &sample_phases(c.torus_dim(), samples, sampling), n))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationRow {
    pub n: u64,
    pub epsilon: f64,
    pub measure: f64,
    /// `sqrt(p (1 - p) / N)`
    pub uncertainty: f64,
    pub samples: usize,
    /// Sample mean of `u_n` with `-inf` excluded.
    pub mean_u: f64,
    /// `max |u_n - <u_n>|` over the samples; `inf` if any sample is `-inf`.
    pub max_deviation: f64,
}

fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Deviation set measure from precomputed samples.
pub fn deviation_from_samples(values: &[f64], n: u64, epsilon: f64) -> DeviationRow {
    let (mean_u, _) = truncated_mean(values, None);
    let hits = values.iter().filter(|&&u| !(u.is_finite() && (u - mean_u).abs() <= epsilon)).count();
    let measure = hits as f64 / values.len() as f64;
    let max_deviation = values.iter().fold(0.0f64, |m, &u| m.max((u - mean_u).abs()));
    DeviationRow {
        n,
        epsilon,
        measure,
        uncertainty: binomial_sigma(measure, values.len()),
        samples: values.len(),
        mean_u,
        max_deviation,
    }
}

/// Fraction of phases with `|u_n(x) - <u_n>| > epsilon`.
pub fn deviation_measure<C: Cocycle + ?Sized>(
    c: &C,
    n: u64,
    epsilon: f64,
    samples: usize,
    sampling: Sampling,
) -> Result<DeviationRow> {
    if !(epsilon > 0.0) {
        return input("epsilon must be positive");
    }
    Ok(deviation_from_samples(&sample_u(c, n, samples, sampling)?, n, epsilon))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DipRow {
    pub n: u64,
    pub t: f64,
    pub measure: f64,
    pub uncertainty: f64,
    pub samples: usize,
}

pub fn dip_from_samples(values: &[f64], n: u64, t: f64) -> DipRow {
    let hits = values.iter().filter(|&&u| u < -t).count();
    let measure = hits as f64 / values.len() as f64;
    DipRow { n, t, measure, uncertainty: binomial_sigma(measure, values.len()), samples: values.len() }
}

/// Fraction of phases with `u_n(x) < -T`.
pub fn dip_measure<C: Cocycle + ?Sized>(c: &C, n: u64, t: f64, samples: usize, sampling: Sampling) -> Result<DipRow> {
    if !(t > 0.0) {
        return input("T must be positive");
    }
    Ok(dip_from_samples(&sample_u(c, n, samples, sampling)?, n, t))
}

/// `x -> max(u_n(x), -T)` sampled on the sampling set.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedObservable {
    pub n: u64,
    pub floor: f64,
    pub values: Vec<f64>,
    /// Mean of the untruncated samples, `-inf` excluded.
    pub mean: f64,
    pub truncated_mean: f64,
    /// `|mean - truncated_mean|`
    pub shift: f64,
    /// Samples raised to the floor.
    pub floored: usize,
}

impl TruncatedObservable {
    pub fn deviation(&self, epsilon: f64) -> DeviationRow {
        deviation_from_samples(&self.values, self.n, epsilon)
    }
}

pub fn truncate_from_samples(values: &[f64], n: u64, t: f64) -> TruncatedObservable {
    let (mean, _) = truncated_mean(values, None);
    let trunc: Vec<f64> = values.iter().map(|&u| u.max(-t)).collect();
    let truncated_mean = pairwise_mean(&trunc);
    TruncatedObservable {
        n,
        floor: t,
        floored: values.iter().filter(|&&u| u < -t).count(),
        shift: (mean - truncated_mean).abs(),
        mean,
        truncated_mean,
        values: trunc,
    }
}

pub fn truncate_u<C: Cocycle + ?Sized>(
    c: &C,
    n: u64,
    t: f64,
    samples: usize,
    sampling: Sampling,
) -> Result<TruncatedObservable> {
    if !(t > 0.0) {
        return input("T must be positive");
    }
    Ok(truncate_from_samples(&sample_u(c, n, samples, sampling)?, n, t))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BirkhoffReport {
    pub n0: u64,
    pub terms: u64,
    /// `(1/N) sum_{j<N} u_{n0}(x + j n0 omega)`
    pub average: f64,
    /// Grid mean of `u_{n0}`.
    pub space_mean: f64,
    pub deviation: f64,
}

/// Birkhoff average of `u_{n0}` along the translation by `n0 omega`.
pub fn birkhoff_average<C: Cocycle + ?Sized>(c: &C, n0: u64, terms: u64, x: &TorusPoint, space_mean: f64) -> Result<BirkhoffReport> {
    if terms < 1 || n0 < 1 {
        return input("n0 and N must be at least 1");
    }
    let vals: Vec<f64> = (0..terms)
        .map(|j| iterate_from(c, x, j * n0, n0).map(|l| l.log_norm() / n0 as f64))
        .collect::<Result<_>>()?;
    let average = pairwise_mean(&vals);
    Ok(BirkhoffReport { n0, terms, average, space_mean, deviation: (average - space_mean).abs() })
}

/// Least-squares fit of `log(-log mu_n) = b log n + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    /// Fitted exponent `b`; empirical.
    pub exponent: f64,
    pub intercept: f64,
    /// Points with `0 < mu < 1` that entered the fit.
    pub points: usize,
}

pub fn fit_decay_exponent(ns: &[u64], measures: &[f64]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(measures)
        .filter(|(_, &m)| m > 0.0 && m < 1.0)
        .map(|(&n, &m)| ((n as f64).ln(), (-m.ln()).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    Some(DecayFit { exponent, intercept: my - exponent * mx, points: pts.len() })
}

/// Number of `i` with `measures[i+1] > measures[i]` by more than the combined
/// two-sigma sampling uncertainty.
pub fn significant_inversions(rows: &[DeviationRow]) -> usize {
    rows.windows(2)
        .filter(|w| w[1].measure > w[0].measure + 2.0 * (w[0].uncertainty + w[1].uncertainty))
        .count()
}

/// Number of `i` with `measures[i+1] > measures[i]` at all.
pub fn raw_inversions(rows: &[DeviationRow]) -> usize {
    rows.windows(2).filter(|w| w[1].measure > w[0].measure).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::CocycleSpec;
    use crate::linalg::Matrix;
    use crate::torus::Frequency;

    fn constant() -> CocycleSpec {
        CocycleSpec::constant(Matrix::from_diag(&[2.0, 1.0]), Frequency::golden()).unwrap()
    }

    #[test]
    fn constant_cocycle_has_no_deviation_or_dips() {
        let c = constant();
        let d = deviation_measure(&c, 10, 1e-6, 1000, Sampling::Grid).unwrap();
        assert_eq!(d.measure, 0.0);
        assert_eq!(dip_measure(&c, 10, 0.1, 1000, Sampling::Grid).unwrap().measure, 0.0);
        let t = truncate_u(&c, 10, 1.0, 1000, Sampling::Grid).unwrap();
        assert_eq!(t.shift, 0.0);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(deviation_measure(&constant(), 10, 0.1, 999, Sampling::Grid).is_err());
    }

    #[test]
    fn truncation_floors_neg_inf() {
        let t = truncate_from_samples(&[f64::NEG_INFINITY, 0.0, 1.0, -0.5], 1, 2.0);
        assert_eq!(t.values, vec![-2.0, 0.0, 1.0, -0.5]);
        assert_eq!(t.floored, 1);
    }

    #[test]
    fn fit_recovers_exponent() {
        let ns = [100u64, 200, 400, 800];
        let ms: Vec<f64> = ns.iter().map(|&n| (-(n as f64).powf(0.3)).exp()).collect();
        let f = fit_decay_exponent(&ns, &ms).unwrap();
        assert!((f.exponent - 0.3).abs() < 1e-12);
    }

    #[test]
    fn birkhoff_of_constant_is_exact() {
        let c = constant();
        let r = birkhoff_average(&c, 3, 50, &TorusPoint::scalar(0.2), 2f64.ln()).unwrap();
        assert!(r.deviation < 1e-14);
    }
}
