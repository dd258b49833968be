//! Quasi-periodic cocycles: representation, renormalized iteration and
//! Lyapunov exponents.
//!
//! The iterate is `A^(n)(x) = A(T^(n-1) x) ... A(T x) A(x)` with `T x = x + omega`.
//! Products are kept in an [`IterationLedger`]: a matrix factor whose norm
//! stays in a fixed band plus the accumulated log of everything divided out.

use crate::error::{input, Result};
use crate::linalg::{self, pairwise_mean, Matrix, ScaledMatrix};
use crate::models::{BlockSData, JacobiParams, SchrodingerParams};
use crate::par;
use crate::torus::{orbit_point_into, phase_grid, phase_grid_at_least, Frequency, TorusPoint};
use crate::trig::MatrixTrigPoly;

/// A matrix-valued map over a torus translation.
pub trait Cocycle: Send + Sync {
    fn dim(&self) -> usize;

    fn frequency(&self) -> &Frequency;

    /// Writes the matrix part of `A(x)` into `out` and returns its log scale,
    /// so that `A(x) = exp(scale) * out`. Plain cocycles return `0.0`.
    fn eval_into(&self, x: &[f64], out: &mut Matrix) -> f64;

    fn eval(&self, x: &TorusPoint) -> ScaledMatrix {
        let mut out = Matrix::zeros(self.dim(), self.dim());
        let s = self.eval_into(x.coords(), &mut out);
        ScaledMatrix::new(s, out)
    }

    fn torus_dim(&self) -> usize {
        self.frequency().dim()
    }
}

impl<C: Cocycle + ?Sized> Cocycle for &C {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn frequency(&self) -> &Frequency {
        (**self).frequency()
    }
    fn eval_into(&self, x: &[f64], out: &mut Matrix) -> f64 {
        (**self).eval_into(x, out)
    }
}

/// How the matrix values of a [`CocycleSpec`] are produced.
#[derive(Clone, Debug, PartialEq)]
pub enum CocycleKind {
    Constant(Matrix),
    TrigPoly(MatrixTrigPoly),
    Schrodinger(SchrodingerParams),
    BlockS(BlockSData),
    Jacobi { params: JacobiParams, energy: f64, regularized: bool },
}

/// An analytic cocycle: a matrix-valued evaluation rule plus the frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct CocycleSpec {
    frequency: Frequency,
    kind: CocycleKind,
    dim: usize,
}

impl CocycleSpec {
    pub fn constant(m: Matrix, frequency: Frequency) -> Result<Self> {
        if !m.is_square() {
            return input("constant cocycle must be square");
        }
        if !m.is_finite() {
            return input("constant cocycle has non-finite entries");
        }
        let dim = m.rows();
        Ok(CocycleSpec { frequency, kind: CocycleKind::Constant(m), dim })
    }

    pub fn trig(poly: MatrixTrigPoly, frequency: Frequency) -> Result<Self> {
        if poly.rows() != poly.cols() {
            return input("cocycle polynomial must be square");
        }
        if poly.dim() != frequency.dim() {
            return input(format!(
                "polynomial lives on T^{} but the frequency on T^{}",
                poly.dim(),
                frequency.dim()
            ));
        }
        let dim = poly.rows();
        Ok(CocycleSpec { frequency, kind: CocycleKind::TrigPoly(poly), dim })
    }

    pub(crate) fn from_kind(kind: CocycleKind, dim: usize, frequency: Frequency) -> Self {
        CocycleSpec { frequency, kind, dim }
    }

    pub fn kind(&self) -> &CocycleKind {
        &self.kind
    }

    pub fn with_frequency(mut self, frequency: Frequency) -> Self {
        self.frequency = frequency;
        self
    }

    /// Upper bound for `log sup_x ||A(x)||` where one is cheaply available.
    pub fn log_sup_bound(&self) -> Option<f64> {
        match &self.kind {
            CocycleKind::Constant(m) => Some(m.norm().ln()),
            CocycleKind::TrigPoly(p) => Some(p.sup_bound().ln()),
            CocycleKind::Schrodinger(p) => {
                let a = (p.lambda * p.potential.sup_bound()).abs() + p.energy.abs();
                // ||[[a, -1], [1, 0]]|| <= |a| + 1
                Some((a + 1.0).ln())
            }
            _ => None,
        }
    }
}

impl Cocycle for CocycleSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn frequency(&self) -> &Frequency {
        &self.frequency
    }

    #[inline]
    fn eval_into(&self, x: &[f64], out: &mut Matrix) -> f64 {
        match &self.kind {
            CocycleKind::Constant(m) => {
                out.copy_from(m);
                0.0
            }
            CocycleKind::TrigPoly(p) => {
                p.eval_into(x, out);
                0.0
            }
            CocycleKind::Schrodinger(p) => {
                p.eval_into(x, out);
                0.0
            }
            CocycleKind::BlockS(b) => {
                b.eval_into(x, out);
                0.0
            }
            CocycleKind::Jacobi { params, energy, regularized } => {
                params.eval_into(x, self.frequency.omega(), *energy, *regularized, out)
            }
        }
    }
}

/// `x -> wedge_2 A(x)`.
pub struct ExteriorSquare<C> {
    base: C,
    dim: usize,
}

impl<C: Cocycle> ExteriorSquare<C> {
    pub fn new(base: C) -> Result<Self> {
        let m = base.dim();
        if m < 2 {
            return input("exterior square needs dimension at least 2");
        }
        Ok(ExteriorSquare { dim: m * (m - 1) / 2, base })
    }
}

impl<C: Cocycle> Cocycle for ExteriorSquare<C> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn frequency(&self) -> &Frequency {
        self.base.frequency()
    }
    fn eval_into(&self, x: &[f64], out: &mut Matrix) -> f64 {
        let mut a = Matrix::zeros(self.base.dim(), self.base.dim());
        let s = self.base.eval_into(x, &mut a);
        linalg::exterior_square_into(&a, out);
        2.0 * s
    }
}

// ---------------------------------------------------------------------------
// Iteration
// ---------------------------------------------------------------------------

const BAND_HI: f64 = 1e2;
const BAND_LO: f64 = 1e-2;

/// Renormalized running product.
///
/// `exp(log_scale) * factor = A^(steps)(x)`; the spectral norm of `factor`
/// stays in `[1e-2, 1e2]` unless the product vanished, in which case
/// `vanished` is set and `log_scale` is `-inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationLedger {
    pub factor: Matrix,
    pub log_scale: f64,
    pub steps: u64,
    pub vanished: bool,
}

impl IterationLedger {
    pub fn identity(m: usize) -> Self {
        IterationLedger { factor: Matrix::identity(m), log_scale: 0.0, steps: 0, vanished: false }
    }

    /// `log ||A^(n)(x)||`, `-inf` if the product vanished.
    pub fn log_norm(&self) -> f64 {
        if self.vanished {
            return f64::NEG_INFINITY;
        }
        let n = self.factor.norm();
        if n == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_scale + n.ln()
        }
    }

    pub fn as_scaled(&self) -> ScaledMatrix {
        if self.vanished {
            ScaledMatrix::unscaled(Matrix::zeros(self.factor.rows(), self.factor.cols()))
        } else {
            ScaledMatrix::new(self.log_scale, self.factor.clone())
        }
    }

    /// Left-multiplies by `exp(scale) * step`, renormalizing as needed.
    pub fn push(&mut self, step: &Matrix, scale: f64, scratch: &mut Matrix) {
        self.steps += 1;
        if self.vanished {
            return;
        }
        step.mul_into(&self.factor, scratch);
        std::mem::swap(&mut self.factor, scratch);
        if scale == f64::NEG_INFINITY {
            self.mark_vanished();
            return;
        }
        self.log_scale += scale;
        self.renormalize();
    }

    fn mark_vanished(&mut self) {
        self.vanished = true;
        self.log_scale = f64::NEG_INFINITY;
        let (r, c) = (self.factor.rows(), self.factor.cols());
        self.factor.reset(r, c);
    }

    fn renormalize(&mut self) {
        let mut f2: f64 = self.factor.as_slice().iter().map(|v| v * v).sum();
        if !f2.is_finite() || f2 < f64::MIN_POSITIVE {
            // squares overflowed or underflowed; rescale by the largest entry first
            let amax = self.factor.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if amax == 0.0 {
                self.mark_vanished();
                return;
            }
            self.factor.scale_mut(1.0 / amax);
            self.log_scale += amax.ln();
            f2 = self.factor.as_slice().iter().map(|v| v * v).sum();
        }
        // Frobenius in [sqrt(m) * lo, hi] keeps the spectral norm in [lo, hi]
        let lo2 = BAND_LO * BAND_LO * self.factor.rows().min(self.factor.cols()) as f64;
        if f2 > BAND_HI * BAND_HI || f2 < lo2 {
            let f = f2.sqrt();
            self.factor.scale_mut(1.0 / f);
            self.log_scale += f.ln();
        }
    }
}

/// Reusable buffers for stepping a cocycle along an orbit.
pub(crate) struct Stepper {
    phase: Vec<f64>,
    step: Matrix,
    scratch: Matrix,
}

impl Stepper {
    pub(crate) fn new(m: usize, d: usize) -> Self {
        Stepper { phase: vec![0.0; d], step: Matrix::zeros(m, m), scratch: Matrix::zeros(m, m) }
    }

    /// Applies `A(T^j x)` for `j = start .. start + n` to `ledger`.
    pub(crate) fn run<C: Cocycle + ?Sized>(
        &mut self,
        c: &C,
        x: &[f64],
        start: u64,
        n: u64,
        ledger: &mut IterationLedger,
    ) {
        let omega = c.frequency().omega();
        for j in start..start + n {
            if ledger.vanished {
                ledger.steps += start + n - j;
                return;
            }
            orbit_point_into(x, omega, j, &mut self.phase);
            let s = c.eval_into(&self.phase, &mut self.step);
            ledger.push(&self.step, s, &mut self.scratch);
        }
    }
}

/// `A^(n)(T^start x)` as a ledger.
pub fn iterate_from<C: Cocycle + ?Sized>(c: &C, x: &TorusPoint, start: u64, n: u64) -> Result<IterationLedger> {
    if n < 1 {
        return input("iterate needs n >= 1");
    }
    check_phase(c, x)?;
    let mut st = Stepper::new(c.dim(), c.torus_dim());
    let mut ledger = IterationLedger::identity(c.dim());
    st.run(c, x.coords(), start, n, &mut ledger);
    Ok(ledger)
}

pub fn iterate<C: Cocycle + ?Sized>(c: &C, x: &TorusPoint, n: u64) -> Result<IterationLedger> {
    iterate_from(c, x, 0, n)
}

fn check_phase<C: Cocycle + ?Sized>(c: &C, x: &TorusPoint) -> Result<()> {
    if x.dim() != c.torus_dim() {
        return input(format!("phase lives on T^{} but the cocycle on T^{}", x.dim(), c.torus_dim()));
    }
    Ok(())
}

/// `u_n(x) = (1/n) log ||A^(n)(x)||`, `-inf` when the product vanishes.
pub fn u_n<C: Cocycle + ?Sized>(c: &C, x: &TorusPoint, n: u64) -> Result<f64> {
    Ok(iterate(c, x, n)?.log_norm() / n as f64)
}

/// `u_n` at every phase, in order, possibly in parallel.
pub fn u_values<C: Cocycle + ?Sized>(c: &C, phases: &[TorusPoint], n: u64) -> Vec<f64> {
    par::map_slice(phases, |x| {
        let mut st = Stepper::new(c.dim(), c.torus_dim());
        let mut ledger = IterationLedger::identity(c.dim());
        st.run(c, x.coords(), 0, n, &mut ledger);
        ledger.log_norm() / n as f64
    })
}

// ---------------------------------------------------------------------------
// Finite-scale top exponent
// ---------------------------------------------------------------------------

/// Lower truncation of `u_n` before averaging.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    /// `-inf` samples are excluded from the mean and counted.
    Off,
    /// `u <- max(u, -n^0.9)`.
    Default,
    Floor(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    /// Grid points per torus axis; `None` picks 2048 (d=1), 256 (d=2), 32 (d=3).
    pub per_dim: Option<usize>,
    pub truncation: Truncation,
    /// Also average `u_n` along one Birkhoff orbit as a consistency check.
    pub birkhoff_check: bool,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { per_dim: None, truncation: Truncation::Off, birkhoff_check: true }
    }
}

impl Quadrature {
    pub fn with_grid(per_dim: usize) -> Self {
        Quadrature { per_dim: Some(per_dim), ..Default::default() }
    }

    pub fn without_birkhoff(mut self) -> Self {
        self.birkhoff_check = false;
        self
    }

    pub fn grid_size(&self, d: usize) -> usize {
        self.per_dim.unwrap_or(match d {
            1 => 2048,
            2 => 256,
            _ => 32,
        })
    }

    pub fn floor(&self, n: u64) -> Option<f64> {
        match self.truncation {
            Truncation::Off => None,
            Truncation::Default => Some((n as f64).powf(0.9)),
            Truncation::Floor(t) => Some(t),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteScaleLe {
    pub n: u64,
    pub estimate: f64,
    /// `|fine-grid mean - half-grid mean|`; heuristic.
    pub error_estimate: f64,
    /// Samples where `u_n = -inf` (dropped from the mean unless truncated).
    pub excluded: usize,
    pub samples: usize,
    /// More than half of the samples were `-inf`.
    pub degenerate: bool,
    pub birkhoff: Option<f64>,
}

/// Quadrature estimate of `L_1^(n)(A) = int (1/n) log ||A^(n)(x)|| dx`.
pub fn finite_scale_top_le<C: Cocycle + ?Sized>(c: &C, n: u64, quad: &Quadrature) -> Result<FiniteScaleLe> {
    if n < 1 {
        return input("finite_scale_top_le needs n >= 1");
    }
    let d = c.torus_dim();
    let per = quad.grid_size(d);
    if per < 64 && d == 1 || per < 8 {
        return input(format!("quadrature grid of {per} points per axis is too coarse"));
    }
    let grid = phase_grid(d, per);
    let values = u_values(c, &grid, n);
    let floor = quad.floor(n);
    let (estimate, excluded) = truncated_mean(&values, floor);
    // every other grid point (shifted coarse grid) for the refinement estimate
    let coarse: Vec<f64> = values.iter().step_by(2).copied().collect();
    let (coarse_mean, _) = truncated_mean(&coarse, floor);
    let error_estimate = if estimate.is_finite() && coarse_mean.is_finite() {
        (estimate - coarse_mean).abs()
    } else {
        f64::INFINITY
    };
    let birkhoff = if quad.birkhoff_check {
        let x0 = grid[0].coords().to_vec();
        let omega = c.frequency().omega().to_vec();
        let orbit: Vec<TorusPoint> = (0..grid.len() as u64)
            .map(|j| {
                let mut p = vec![0.0; d];
                orbit_point_into(&x0, &omega, j, &mut p);
                TorusPoint::new(p).expect("orbit point is finite")
            })
            .collect();
        Some(truncated_mean(&u_values(c, &orbit, n), floor).0)
    } else {
        None
    };
    Ok(FiniteScaleLe {
        n,
        estimate,
        error_estimate,
        excluded,
        samples: values.len(),
        degenerate: 2 * excluded > values.len(),
        birkhoff,
    })
}

/// Mean with `-inf` either excluded (and counted) or floored at `-floor`.
pub fn truncated_mean(values: &[f64], floor: Option<f64>) -> (f64, usize) {
    let excluded = values.iter().filter(|v| **v == f64::NEG_INFINITY).count();
    let kept: Vec<f64> = match floor {
        Some(t) => values.iter().map(|&v| v.max(-t)).collect(),
        None => values.iter().copied().filter(|v| v.is_finite()).collect(),
    };
    if kept.is_empty() {
        return (f64::NEG_INFINITY, excluded);
    }
    (pairwise_mean(&kept), excluded)
}

// ---------------------------------------------------------------------------
// Full spectrum
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct WedgeCheck {
    /// `L_1 + L_2` from the spectrum.
    pub sum_top_two: f64,
    /// Finite-scale top exponent of `wedge_2 A` over the same phases.
    pub wedge_top: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovSpectrum {
    /// Non-increasing; `-inf` entries only in a suffix.
    pub exponents: Vec<f64>,
    pub n: u64,
    pub phases: usize,
    pub wedge_check: Option<WedgeCheck>,
}

impl LyapunovSpectrum {
    pub fn top(&self) -> f64 {
        self.exponents[0]
    }

    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

/// Per-phase exponents by orthogonal-triangular re-factorization at every
/// step; sorted non-increasing.
pub fn spectrum_at<C: Cocycle + ?Sized>(c: &C, x: &[f64], n: u64) -> Vec<f64> {
    let m = c.dim();
    let omega = c.frequency().omega();
    let mut phase = vec![0.0; x.len()];
    let mut step = Matrix::zeros(m, m);
    let mut q = Matrix::identity(m);
    let mut aq = Matrix::zeros(m, m);
    let mut rdiag = vec![0.0; m];
    let mut work = Vec::new();
    let mut sums = vec![0.0; m];
    let mut dead = vec![false; m];
    for j in 0..n {
        orbit_point_into(x, omega, j, &mut phase);
        let s = c.eval_into(&phase, &mut step);
        step.mul_into(&q, &mut aq);
        linalg::qr_in_place(&mut aq, &mut rdiag, &mut work, 1e-13);
        std::mem::swap(&mut q, &mut aq);
        for k in 0..m {
            if dead[k] {
                continue;
            }
            if rdiag[k] == 0.0 || s == f64::NEG_INFINITY {
                dead[k] = true;
                sums[k] = f64::NEG_INFINITY;
            } else {
                sums[k] += rdiag[k].ln() + s;
            }
        }
    }
    let mut ex: Vec<f64> = sums.iter().map(|&v| v / n as f64).collect();
    ex.sort_by(|a, b| b.total_cmp(a));
    ex
}

/// Lyapunov spectrum averaged over `phases` grid phases at scale `n`.
pub fn lyapunov_spectrum<C: Cocycle + ?Sized>(c: &C, n: u64, phases: usize) -> Result<LyapunovSpectrum> {
    let m = c.dim();
    if n < m as u64 {
        return input(format!("spectrum needs n >= m = {m}"));
    }
    if phases == 0 {
        return input("spectrum needs at least one phase");
    }
    let grid = phase_grid_at_least(c.torus_dim(), phases);
    let per_phase = par::map_slice(&grid, |x| spectrum_at(c, x.coords(), n));
    let exponents: Vec<f64> = (0..m)
        .map(|k| {
            let col: Vec<f64> = per_phase.iter().map(|v| v[k]).collect();
            if col.iter().any(|v| *v == f64::NEG_INFINITY) {
                f64::NEG_INFINITY
            } else {
                pairwise_mean(&col)
            }
        })
        .collect();
    let wedge_check = if (2..=4).contains(&m) {
        let w = ExteriorSquare::new(c)?;
        let (wedge_top, _) = truncated_mean(&u_values(&w, &grid, n), None);
        Some(WedgeCheck { sum_top_two: exponents[0] + exponents[1], wedge_top })
    } else {
        None
    };
    Ok(LyapunovSpectrum { exponents, n, phases: grid.len(), wedge_check })
}
