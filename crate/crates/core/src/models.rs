//! Built-in model families: Schrödinger cocycles, block-structured
//! `S_delta` cocycles and quasi-periodic block Jacobi operators with their
//! transfer cocycles, integrated density of states and Thouless check.

use crate::cocycle::{finite_scale_top_le, lyapunov_spectrum, CocycleKind, CocycleSpec, Quadrature};
use crate::error::{input, Error, Result};
use crate::linalg::{self, pairwise_mean, Matrix};
use crate::par;
use crate::torus::{orbit_point_into, phase_grid, Frequency, TorusPoint};
use crate::trig::{MatrixTrigPoly, TrigPoly};

// ---------------------------------------------------------------------------
// Schrödinger
// ---------------------------------------------------------------------------

/// `A(x) = [[lambda f(x) - E, -1], [1, 0]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchrodingerParams {
    pub potential: TrigPoly,
    pub lambda: f64,
    pub energy: f64,
}

impl SchrodingerParams {
    pub fn new(potential: TrigPoly, lambda: f64, energy: f64) -> Self {
        SchrodingerParams { potential, lambda, energy }
    }

    #[inline]
    pub(crate) fn eval_into(&self, x: &[f64], out: &mut Matrix) {
        let a = self.lambda * self.potential.eval(x) - self.energy;
        if out.rows() != 2 || out.cols() != 2 {
            out.reset(2, 2);
        }
        let d = out.as_mut_slice();
        d[0] = a;
        d[1] = -1.0;
        d[2] = 1.0;
        d[3] = 0.0;
    }
}

/// The Schrödinger cocycle. A constant non-zero potential is rejected; the
/// zero potential is accepted as the free model.
pub fn schrodinger_cocycle(p: SchrodingerParams, frequency: Frequency) -> Result<CocycleSpec> {
    if p.lambda == 0.0 || !p.lambda.is_finite() {
        return input("lambda must be finite and non-zero");
    }
    if !p.energy.is_finite() {
        return input("energy must be finite");
    }
    if p.potential.dim() != frequency.dim() {
        return input("potential and frequency live on tori of different dimension");
    }
    if p.potential.is_constant() && p.potential.sup_bound() != 0.0 {
        return input("the potential must be non-constant");
    }
    Ok(CocycleSpec::from_kind(CocycleKind::Schrodinger(p), 2, frequency))
}

/// Which asymptotic branch an energy belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// `|E| <= 2 |lambda| ||f||`
    Inside,
    Outside,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoretsSpencerRow {
    pub energy: f64,
    pub regime: Regime,
    pub le: f64,
    pub le_error: f64,
    /// `int log |lambda f(x) - E| dx` by fine quadrature.
    pub integral: f64,
    pub residual: f64,
    /// `L_1 - log |lambda|`
    pub margin: f64,
}

/// `int log |lambda f(x) - E| dx` on a fine midpoint grid.
pub fn log_potential_integral(f: &TrigPoly, lambda: f64, energy: f64) -> f64 {
    let per = match f.dim() {
        1 => 1 << 18,
        2 => 512,
        _ => 64,
    };
    let vals = par::map_slice(&phase_grid(f.dim(), per), |x| (lambda * f.eval(x.coords()) - energy).abs().ln());
    let finite: Vec<f64> = vals.into_iter().filter(|v| v.is_finite()).collect();
    pairwise_mean(&finite)
}

/// Compares the finite-scale top exponent with `int log |lambda f - E|` over
/// an energy grid.
pub fn verify_sorets_spencer(
    f: &TrigPoly,
    frequency: &Frequency,
    lambda: f64,
    energies: &[f64],
    n: u64,
    quad: &Quadrature,
) -> Result<Vec<SoretsSpencerRow>> {
    let fnorm = f.sup_bound();
    energies
        .iter()
        .map(|&e| {
            let c = schrodinger_cocycle(SchrodingerParams::new(f.clone(), lambda, e), frequency.clone())?;
            let le = finite_scale_top_le(&c, n, quad)?;
            let integral = log_potential_integral(f, lambda, e);
            Ok(SoretsSpencerRow {
                energy: e,
                regime: if e.abs() <= 2.0 * lambda.abs() * fnorm { Regime::Inside } else { Regime::Outside },
                le: le.estimate,
                le_error: le.error_estimate,
                integral,
                residual: (le.estimate - integral).abs(),
                margin: le.estimate - lambda.abs().ln(),
            })
        })
        .collect()
}

/// Smallest `C >= 0` with `L_1 >= log |lambda| - C` on every row.
pub fn fitted_positivity_constant(rows: &[SoretsSpencerRow]) -> f64 {
    rows.iter().map(|r| -r.margin).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Block S_delta
// ---------------------------------------------------------------------------

/// `S_delta(x) = [[M(x), delta N(x)], [delta P(x), delta Q(x)]]`, `M` of size `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSData {
    pub m: MatrixTrigPoly,
    pub n: MatrixTrigPoly,
    pub p: MatrixTrigPoly,
    pub q: MatrixTrigPoly,
    pub delta: f64,
}

impl BlockSData {
    pub fn l(&self) -> usize {
        self.m.rows()
    }

    pub fn size(&self) -> usize {
        self.m.rows() + self.q.rows()
    }

    pub(crate) fn eval_into(&self, x: &[f64], out: &mut Matrix) {
        let l = self.l();
        out.reset(self.size(), self.size());
        out.set_block(0, 0, &self.m.eval(x));
        if self.delta != 0.0 {
            out.set_block(0, l, &self.n.eval(x).scaled(self.delta));
            out.set_block(l, 0, &self.p.eval(x).scaled(self.delta));
            out.set_block(l, l, &self.q.eval(x).scaled(self.delta));
        }
    }
}

pub fn block_cocycle_s(
    delta: f64,
    m: MatrixTrigPoly,
    n: MatrixTrigPoly,
    p: MatrixTrigPoly,
    q: MatrixTrigPoly,
    frequency: Frequency,
) -> Result<CocycleSpec> {
    let l = m.rows();
    let r = q.rows();
    if m.cols() != l || q.cols() != r || r == 0 {
        return input("M and Q must be square and Q non-empty");
    }
    if (n.rows(), n.cols()) != (l, r) || (p.rows(), p.cols()) != (r, l) {
        return input(format!("N must be {l}x{r} and P {r}x{l}"));
    }
    if [&m, &n, &p, &q].iter().any(|b| b.dim() != frequency.dim()) {
        return input("blocks and frequency live on tori of different dimension");
    }
    if !delta.is_finite() {
        return input("delta must be finite");
    }
    let data = BlockSData { m, n, p, q, delta };
    let size = data.size();
    Ok(CocycleSpec::from_kind(CocycleKind::BlockS(data), size, frequency))
}

/// `[[f(x) - s, -delta], [delta, 0]]`, the rescaled Schrödinger cocycle.
pub fn scalar_block_s(f: &TrigPoly, s: f64, delta: f64, frequency: Frequency) -> Result<CocycleSpec> {
    let d = f.dim();
    let one = |v: f64| MatrixTrigPoly::constant(d, Matrix::from_diag(&[v]));
    let m = MatrixTrigPoly::diagonal(&[f.clone().plus_constant(-s)])?;
    block_cocycle_s(delta, m, one(-1.0), one(1.0), one(0.0), frequency)
}

// ---------------------------------------------------------------------------
// Block Jacobi
// ---------------------------------------------------------------------------

/// Data of the operator
/// `(H psi)_j = -W_{j+1} psi_{j+1} - W_j^T psi_{j-1} + (lambda F_j + R_j) psi_j`
/// with `W_j = W(x + j omega)` and likewise for `F`, `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiParams {
    pub w: MatrixTrigPoly,
    pub r: MatrixTrigPoly,
    pub f: MatrixTrigPoly,
    pub lambda: f64,
}

impl JacobiParams {
    pub fn new(w: MatrixTrigPoly, r: MatrixTrigPoly, f: MatrixTrigPoly, lambda: f64) -> Result<Self> {
        let l = w.rows();
        for (name, b) in [("W", &w), ("R", &r), ("F", &f)] {
            if b.rows() != l || b.cols() != l {
                return input(format!("{name} must be {l}x{l}"));
            }
            if b.dim() != w.dim() {
                return input("W, R, F live on tori of different dimension");
            }
        }
        if !r.is_symmetric(1e-12) || !f.is_symmetric(1e-12) {
            return input("R and F must be symmetric");
        }
        if !lambda.is_finite() {
            return input("lambda must be finite");
        }
        let p = JacobiParams { w, r, f, lambda };
        if p.det_w_identically_zero() {
            return input("W is identically singular");
        }
        Ok(p)
    }

    /// Free Laplacian: `l = 1`, `W = 1`, `R = F = 0`.
    pub fn free_laplacian() -> Self {
        let c = |v: f64| MatrixTrigPoly::constant(1, Matrix::from_diag(&[v]));
        JacobiParams { w: c(1.0), r: c(0.0), f: c(0.0), lambda: 1.0 }
    }

    pub fn l(&self) -> usize {
        self.w.rows()
    }

    pub fn torus_dim(&self) -> usize {
        self.w.dim()
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        JacobiParams { lambda, ..self.clone() }
    }

    fn det_w_identically_zero(&self) -> bool {
        let grid = phase_grid(self.torus_dim(), if self.torus_dim() == 1 { 256 } else { 16 });
        let scale = self.w.sup_bound().powi(self.l() as i32).max(f64::MIN_POSITIVE);
        grid.iter().all(|x| linalg::det(&self.w.eval(x.coords())).abs() <= 1e-12 * scale)
    }

    /// `lambda F(x) + R(x)`.
    pub fn diagonal_block(&self, x: &[f64]) -> Matrix {
        self.f.eval(x).scaled(self.lambda).add(&self.r.eval(x))
    }

    /// Writes `g(x + omega) A(x)` into `out` (with `g = det W`) and returns
    /// `log |g(x + omega)|`, so the raw cocycle is `out / g(x + omega)`.
    pub(crate) fn eval_regularized(&self, x: &[f64], omega: &[f64], energy: f64, out: &mut Matrix) -> (f64, f64) {
        let l = self.l();
        let mut x1 = vec![0.0; x.len()];
        orbit_point_into(x, omega, 1, &mut x1);
        let w1 = self.w.eval(&x1);
        let w0 = self.w.eval(x);
        let g = linalg::det(&w1);
        let u = linalg::adjugate(&w1).expect("block size is at most 8");
        let mut d = self.diagonal_block(x);
        for i in 0..l {
            d[(i, i)] -= energy;
        }
        out.reset(2 * l, 2 * l);
        out.set_block(0, 0, &u.mul(&d));
        out.set_block(0, l, &u.mul(&w0.transpose()).scaled(-1.0));
        for i in 0..l {
            out[(l + i, i)] = g;
        }
        (g, g.abs().ln())
    }

    pub(crate) fn eval_into(&self, x: &[f64], omega: &[f64], energy: f64, regularized: bool, out: &mut Matrix) -> f64 {
        let (g, log_g) = self.eval_regularized(x, omega, energy, out);
        if regularized {
            return 0.0;
        }
        if g < 0.0 {
            out.scale_mut(-1.0);
        }
        // g = 0 sits on a null set the samplers never hit in practice
        -log_g
    }

    /// `C(W) = int log |det W(x)| dx`.
    pub fn weight_constant(&self) -> f64 {
        let per = match self.torus_dim() {
            1 => 1 << 14,
            2 => 256,
            _ => 32,
        };
        let vals = par::map_slice(&phase_grid(self.torus_dim(), per), |x| {
            linalg::det(&self.w.eval(x.coords())).abs().ln()
        });
        let finite: Vec<f64> = vals.into_iter().filter(|v| v.is_finite()).collect();
        pairwise_mean(&finite)
    }

    /// Dense Dirichlet restriction to `{0, .., n-1}`, of size `n l`.
    pub fn finite_volume(&self, x: &[f64], omega: &[f64], n: usize) -> Matrix {
        let l = self.l();
        let mut h = Matrix::zeros(n * l, n * l);
        let mut xj = vec![0.0; x.len()];
        for j in 0..n {
            orbit_point_into(x, omega, j as u64, &mut xj);
            h.set_block(j * l, j * l, &self.diagonal_block(&xj));
            if j + 1 < n {
                orbit_point_into(x, omega, j as u64 + 1, &mut xj);
                let b = self.w.eval(&xj).scaled(-1.0);
                h.set_block(j * l, (j + 1) * l, &b);
                h.set_block((j + 1) * l, j * l, &b.transpose());
            }
        }
        h
    }
}

/// The `2l x 2l` transfer cocycle. With `regularized` the cocycle is
/// `det W(x + omega) A(x)`, defined everywhere and with every exponent shifted
/// by `C(W)`.
pub fn jacobi_cocycle(p: &JacobiParams, frequency: Frequency, energy: f64, regularized: bool) -> Result<CocycleSpec> {
    if p.torus_dim() != frequency.dim() {
        return input("Jacobi data and frequency live on tori of different dimension");
    }
    if !energy.is_finite() {
        return input("energy must be finite");
    }
    let dim = 2 * p.l();
    Ok(CocycleSpec::from_kind(
        CocycleKind::Jacobi { params: p.clone(), energy, regularized },
        dim,
        frequency,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSample {
    pub n: usize,
    pub phase: TorusPoint,
    /// Sorted, `n l` values.
    pub eigenvalues: Vec<f64>,
}

/// Eigenvalues of the Dirichlet finite-volume operator by a dense symmetric solver.
pub fn spectral_sample(p: &JacobiParams, frequency: &Frequency, x: &TorusPoint, n: usize) -> Result<SpectralSample> {
    let size = n * p.l();
    if n == 0 || size > 4096 {
        return input(format!("finite volume of size {size} is outside 1..=4096"));
    }
    let h = p.finite_volume(x.coords(), frequency.omega(), n);
    let dm = nalgebra::DMatrix::from_row_slice(size, size, h.as_slice());
    let mut eigenvalues: Vec<f64> = dm.symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(SpectralSample { n, phase: x.clone(), eigenvalues })
}

/// Inertia of `H - E` from the block `L D L^T` recursion
/// `S_0 = D_0 - E`, `S_{j+1} = D_{j+1} - E - B_j^T S_j^{-1} B_j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Inertia {
    /// Number of eigenvalues below `E`.
    pub below: usize,
    /// `log |det(H - E)|`.
    pub log_abs_det: f64,
    /// Some pivot block was numerically singular.
    pub near_singular: bool,
}

pub fn inertia(p: &JacobiParams, omega: &[f64], x: &[f64], n: usize, energy: f64) -> Inertia {
    let l = p.l();
    let mut xj = vec![0.0; x.len()];
    let mut below = 0;
    let mut log_det = 0.0;
    let mut near_singular = false;
    let mut prev: Option<(Matrix, Matrix)> = None; // (S_j^{-1}, B_j)
    for j in 0..n {
        orbit_point_into(x, omega, j as u64, &mut xj);
        let mut s = p.diagonal_block(&xj);
        for i in 0..l {
            s[(i, i)] -= energy;
        }
        if let Some((sinv, b)) = &prev {
            s = s.sub(&b.transpose().mul(sinv).mul(b));
            // restore exact symmetry lost to rounding
            s = Matrix::from_fn(l, l, |a, c| 0.5 * (s[(a, c)] + s[(c, a)]));
        }
        let ev = linalg::symmetric_eigenvalues(&s);
        let scale = ev.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        below += ev.iter().filter(|v| **v < 0.0).count();
        for v in &ev {
            if v.abs() <= 1e-14 * scale {
                near_singular = true;
            }
            log_det += v.abs().ln();
        }
        if j + 1 < n {
            orbit_point_into(x, omega, j as u64 + 1, &mut xj);
            let b = p.w.eval(&xj).scaled(-1.0);
            let sinv = linalg::inverse(&s).unwrap_or_else(|_| {
                near_singular = true;
                let mut t = s.clone();
                for i in 0..l {
                    t[(i, i)] += 1e-14 * scale;
                }
                linalg::inverse(&t).unwrap_or_else(|_| Matrix::identity(l).scaled(1e14))
            });
            prev = Some((sinv, b));
        }
    }
    Inertia { below, log_abs_det: log_det, near_singular }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdsEstimate {
    /// Phase mean of `#{E_j <= E} / (n l)`, in `[0, 1]`.
    pub value: f64,
    pub per_phase: Vec<f64>,
}

/// Integrated density of states normalized to `[0, 1]`, averaged over `phases`.
pub fn ids(p: &JacobiParams, frequency: &Frequency, energy: f64, n: usize, phases: &[TorusPoint]) -> Result<IdsEstimate> {
    if n == 0 || phases.is_empty() {
        return input("ids needs n >= 1 and at least one phase");
    }
    if !energy.is_finite() {
        return input("energy must be finite");
    }
    let size = (n * p.l()) as f64;
    // counting eigenvalues <= E: nudge E up past a possible exact hit
    let e = energy + 1e-12 * energy.abs().max(1.0);
    let per_phase = par::map_slice(phases, |x| inertia(p, frequency.omega(), x.coords(), n, e).below as f64 / size);
    Ok(IdsEstimate { value: pairwise_mean(&per_phase), per_phase })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThoulessReport {
    /// `L_1 + ... + L_l` from the transfer cocycle.
    pub lhs: f64,
    /// `l int log |E - E'| dN(E') - C(W)`, with `N` normalized to `[0, 1]`.
    pub rhs: f64,
    pub weight_constant: f64,
    pub residual: f64,
    /// The energy had to be shifted off an eigenvalue.
    pub shifted: bool,
}

/// Thouless-type identity at energy `E`: the left side from the Lyapunov
/// spectrum at scale `le_n`, the right side from `log |det(H_n - E)| / n`
/// averaged over `phases`.
pub fn thouless_check(
    p: &JacobiParams,
    frequency: &Frequency,
    energy: f64,
    n: usize,
    le_n: u64,
    phases: &[TorusPoint],
) -> Result<ThoulessReport> {
    if n == 0 || phases.is_empty() {
        return input("thouless_check needs n >= 1 and at least one phase");
    }
    let l = p.l();
    let weight_constant = p.weight_constant();
    let c = jacobi_cocycle(p, frequency.clone(), energy, true)?;
    let spec = lyapunov_spectrum(&c, le_n, 16)?;
    let lhs = spec.exponents[..l].iter().sum::<f64>() - l as f64 * weight_constant;

    let mut shifted = false;
    let mut logs = Vec::with_capacity(phases.len());
    for x in phases {
        let mut e = energy;
        let mut inr = inertia(p, frequency.omega(), x.coords(), n, e);
        let mut tries = 0;
        while inr.near_singular {
            tries += 1;
            if tries > 8 {
                return Err(Error::Degenerate(format!("energy {energy} collides with the finite-volume spectrum")));
            }
            shifted = true;
            e = energy + 1e-9 * tries as f64 * energy.abs().max(1.0);
            inr = inertia(p, frequency.omega(), x.coords(), n, e);
        }
        logs.push(inr.log_abs_det / n as f64);
    }
    let rhs = pairwise_mean(&logs) - weight_constant;
    Ok(ThoulessReport { lhs, rhs, weight_constant, residual: (lhs - rhs).abs(), shifted })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PositivityRow {
    pub lambda: f64,
    pub energy: f64,
    /// Top `l` exponents of the raw cocycle.
    pub exponents: Vec<f64>,
    /// `L_l - log |lambda|`
    pub margin: f64,
    /// `min_k (L_k - L_{k+1})` over `k < l`; `+inf` when `l = 1`.
    pub min_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PositivityReport {
    pub rows: Vec<PositivityRow>,
    /// `det W` is not identically zero on the check grid.
    pub weight_nonsingular: bool,
    /// Values of `s` at which `det(F - s I)` vanished on the whole check grid.
    pub constant_eigenvalue_hits: Vec<f64>,
}

/// Positivity margins and top-`l` gaps over a `(lambda, E)` grid.
pub fn verify_positivity_simplicity(
    p: &JacobiParams,
    frequency: &Frequency,
    lambdas: &[f64],
    energies: &[f64],
    n: u64,
    phases: usize,
) -> Result<PositivityReport> {
    let l = p.l();
    let c_w = p.weight_constant();
    let grid = phase_grid(p.torus_dim(), if p.torus_dim() == 1 { 256 } else { 16 });
    let fsup = p.f.sup_bound();
    let mut constant_eigenvalue_hits = Vec::new();
    for i in 0..=20 {
        let s = -2.0 * fsup + 4.0 * fsup * i as f64 / 20.0;
        let all_zero = grid.iter().all(|x| {
            let mut m = p.f.eval(x.coords());
            for k in 0..l {
                m[(k, k)] -= s;
            }
            linalg::det(&m).abs() <= 1e-12 * fsup.max(1.0).powi(l as i32)
        });
        if all_zero {
            constant_eigenvalue_hits.push(s);
        }
    }
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let q = p.with_lambda(lambda);
        for &e in energies {
            let c = jacobi_cocycle(&q, frequency.clone(), e, true)?;
            let spec = lyapunov_spectrum(&c, n, phases)?;
            let exponents: Vec<f64> = spec.exponents[..l].iter().map(|v| v - c_w).collect();
            let min_gap = exponents.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
            rows.push(PositivityRow {
                lambda,
                energy: e,
                margin: exponents[l - 1] - lambda.abs().ln(),
                exponents,
                min_gap,
            });
        }
    }
    Ok(PositivityReport { rows, weight_nonsingular: true, constant_eigenvalue_hits })
}
