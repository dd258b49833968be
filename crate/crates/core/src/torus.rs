//! Torus phases, translations and Diophantine certification.

use rand::Rng;

use crate::error::{input, Result};

/// Wraps a real number into `[0, 1)`.
#[inline]
pub fn wrap(y: f64) -> f64 {
    let f = y - y.floor();
    // y slightly negative can round to exactly 1.0
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Distance to the nearest integer, `min(frac(y), 1 - frac(y))`.
#[inline]
pub fn dist_to_int(y: f64) -> f64 {
    let f = wrap(y);
    f.min(1.0 - f)
}

/// `frac(a * b)` with the rounding error of the product folded back in.
#[inline]
fn frac_of_product(a: f64, b: f64) -> f64 {
    let p = a * b;
    wrap(wrap(p) + product_error(a, b, p))
}

// Dekker's exact product error; `mul_add` is a slow libm call without
// hardware FMA.
#[inline]
fn product_error(a: f64, b: f64, p: f64) -> f64 {
    const SPLIT: f64 = 134_217_729.0; // 2^27 + 1
    let split = |v: f64| {
        let t = SPLIT * v;
        let hi = t - (t - v);
        (hi, v - hi)
    };
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    ((ah * bh - p) + ah * bl + al * bh) + al * bl
}

/// A point of the d-torus, each coordinate in `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return input("torus point needs at least one coordinate");
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return input("torus point has non-finite coordinates");
        }
        Ok(TorusPoint { coords: coords.into_iter().map(wrap).collect() })
    }

    pub fn origin(d: usize) -> Self {
        TorusPoint { coords: vec![0.0; d] }
    }

    pub fn scalar(x: f64) -> Self {
        TorusPoint { coords: vec![wrap(x)] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Record of a passed Diophantine scan.
#[derive(Clone, Debug, PartialEq)]
pub struct DcCertificate {
    pub t: f64,
    pub exponent: u32,
    pub k_max: u64,
}

/// Translation vector of the torus, with an optional Diophantine certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct Frequency {
    omega: Vec<f64>,
    certificate: Option<DcCertificate>,
}

impl Frequency {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() || omega.len() > 3 {
            return input(format!("frequency dimension must be 1..=3, got {}", omega.len()));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return input("frequency has non-finite components");
        }
        Ok(Frequency { omega, certificate: None })
    }

    /// `(sqrt(5) - 1) / 2`.
    pub fn golden() -> Self {
        Frequency { omega: vec![(5f64.sqrt() - 1.0) / 2.0], certificate: None }
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn certificate(&self) -> Option<&DcCertificate> {
        self.certificate.as_ref()
    }

    /// Frequency of the `n`-fold translation, `n * omega mod 1`.
    pub fn multiple(&self, n: u64) -> Frequency {
        Frequency {
            omega: self.omega.iter().map(|&w| frac_of_product(n as f64, w)).collect(),
            certificate: None,
        }
    }

    /// Runs [`diophantine_check`] and attaches the certificate on success.
    pub fn certify(mut self, t: f64, k_max: u64) -> Result<(Self, DcReport)> {
        let report = diophantine_check(&self, t, k_max)?;
        if let DcOutcome::Certified(c) = &report.outcome {
            self.certificate = Some(c.clone());
        }
        Ok((self, report))
    }
}

/// Writes `x + steps * omega mod 1` into `out`. The product `steps * omega` is
/// formed with its rounding error compensated, so long orbits do not drift.
#[inline]
pub fn orbit_point_into(x: &[f64], omega: &[f64], steps: u64, out: &mut [f64]) {
    if steps >= 1 << 53 {
        // not exact as a double: split as hi * 2^32 + lo, scaling omega exactly
        let (hi, lo) = ((steps >> 32) as f64, (steps & 0xffff_ffff) as f64);
        for ((o, &xi), &w) in out.iter_mut().zip(x).zip(omega) {
            *o = wrap(xi + frac_of_product(hi, w * 4_294_967_296.0) + frac_of_product(lo, w));
        }
        return;
    }
    let s = steps as f64;
    for ((o, &xi), &w) in out.iter_mut().zip(x).zip(omega) {
        *o = wrap(xi + frac_of_product(s, w));
    }
}

pub fn translate(x: &TorusPoint, omega: &Frequency, steps: u64) -> TorusPoint {
    assert_eq!(x.dim(), omega.dim(), "phase and frequency dimensions differ");
    let mut out = vec![0.0; x.dim()];
    orbit_point_into(&x.coords, &omega.omega, steps, &mut out);
    TorusPoint { coords: out }
}

/// Midpoint grid with `per_dim` points per axis: `(i + 1/2) / per_dim`.
pub fn phase_grid(d: usize, per_dim: usize) -> Vec<TorusPoint> {
    let axis: Vec<f64> = (0..per_dim).map(|i| (i as f64 + 0.5) / per_dim as f64).collect();
    let total = per_dim.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut c = vec![0.0; d];
            for slot in c.iter_mut().rev() {
                *slot = axis[idx % per_dim];
                idx /= per_dim;
            }
            TorusPoint { coords: c }
        })
        .collect()
}

/// Smallest midpoint grid with at least `min_points` points in dimension `d`.
pub fn phase_grid_at_least(d: usize, min_points: usize) -> Vec<TorusPoint> {
    let mut per = (min_points as f64).powf(1.0 / d as f64).floor() as usize;
    while per.pow(d as u32) < min_points {
        per += 1;
    }
    phase_grid(d, per.max(1))
}

pub fn random_phases<R: Rng + ?Sized>(d: usize, count: usize, rng: &mut R) -> Vec<TorusPoint> {
    (0..count)
        .map(|_| TorusPoint { coords: (0..d).map(|_| rng.random::<f64>()).collect() })
        .collect()
}

// ---------------------------------------------------------------------------
// Diophantine condition
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub enum DcOutcome {
    Certified(DcCertificate),
    /// First multi-index (ordered by `|k|_inf`, then lexicographically) with
    /// `||k . omega|| < t / |k|^(d+1)`. `resonance` marks `||k . omega|| = 0`.
    Violation { k: Vec<i64>, distance: f64, resonance: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DcReport {
    pub outcome: DcOutcome,
    /// `min |k|^(d+1) ||k . omega||` over all checked `k`.
    pub t_star: f64,
    pub t_star_at: Vec<i64>,
    pub checked: u64,
}

impl DcReport {
    pub fn passed(&self) -> bool {
        matches!(self.outcome, DcOutcome::Certified(_))
    }
}

pub fn default_k_max(d: usize) -> u64 {
    match d {
        1 => 10_000,
        2 => 200,
        _ => 40,
    }
}

/// Exhaustive scan of `||k . omega|| >= t / |k|_inf^(d+1)` over `0 < |k|_inf <= k_max`.
///
/// `k` and `-k` give the same distance, so only multi-indices whose first
/// non-zero entry is positive are visited.
pub fn diophantine_check(omega: &Frequency, t: f64, k_max: u64) -> Result<DcReport> {
    if !(t > 0.0) {
        return input(format!("t must be positive, got {t}"));
    }
    if k_max < 1 {
        return input("k_max must be at least 1");
    }
    let d = omega.dim();
    let exponent = d as u32 + 1;
    let mut t_star = f64::INFINITY;
    let mut t_star_at = Vec::new();
    let mut violation: Option<DcOutcome> = None;
    let mut checked = 0u64;
    let km = k_max as i64;
    let mut k = vec![0i64; d];
    'shells: for shell in 1..=km {
        // all k with |k|_inf == shell and first non-zero entry positive
        let side = (2 * shell + 1) as u64;
        let total = side.pow(d as u32);
        for code in 0..total {
            let mut c = code;
            for slot in k.iter_mut().rev() {
                *slot = (c % side) as i64 - shell;
                c /= side;
            }
            if k.iter().map(|v| v.abs()).max() != Some(shell) {
                continue;
            }
            if k.iter().find(|&&v| v != 0).is_some_and(|&v| v < 0) {
                continue;
            }
            checked += 1;
            let dist = dot_distance(&k, omega.omega());
            let scaled = (shell as f64).powi(exponent as i32) * dist;
            if scaled < t_star {
                t_star = scaled;
                t_star_at = k.clone();
            }
            let resonance = dist <= 64.0 * f64::EPSILON * shell as f64;
            if violation.is_none() && (resonance || scaled < t) {
                violation = Some(DcOutcome::Violation { k: k.clone(), distance: dist, resonance });
                if resonance {
                    break 'shells;
                }
            }
        }
    }
    let outcome = violation.unwrap_or(DcOutcome::Certified(DcCertificate { t, exponent, k_max }));
    Ok(DcReport { outcome, t_star, t_star_at, checked })
}

/// `||k . omega||` with each product compensated.
fn dot_distance(k: &[i64], omega: &[f64]) -> f64 {
    let s: f64 = k.iter().zip(omega).map(|(&ki, &w)| frac_of_product(ki as f64, w)).sum();
    dist_to_int(s)
}
