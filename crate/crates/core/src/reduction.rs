//! Reduction of an identically singular cocycle to a maximal-rank one.
//!
//! With `k` the stabilized rank of `A`, `V(x)` is a fixed choice of `k` rows
//! of `A^(m)(x)`. From it:
//!
//! * `delta_i` are the leading principal minors of `V V^T`, `g = prod delta_i`;
//! * `P(x) = V^+ V` is the orthogonal projector onto the row space of `V`;
//! * `h(x) = delta_k(x) g(T x)^3`, `At(x) = h(x) P(T x) A(x)`;
//! * `R(x) = V(T x) (g(T x)^3 P(T x) A(x)) V(x)^T adj(V(x) V(x)^T)`.
//!
//! `R` is `k x k` with `det R` not identically zero, and the iterates satisfy
//! `R^(n) V = (V o T^n) At^(n)` and
//! `A^(n) = (h^(n-m))^{-1} (A^(m) o T^(n-m)) At^(n-m)` for `n >= m`.
//! `h^(n)` under- and overflows quickly, so every quantity here carries an
//! explicit log scale.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cocycle::{Cocycle, CocycleSpec, IterationLedger, Stepper};
use crate::error::{input, Error, Result};
use crate::linalg::{self, pairwise_mean, scaled_residual, Matrix, ScaledMatrix};
use crate::par;
use crate::rng::SeedStream;
use crate::torus::{orbit_point_into, phase_grid_at_least, random_phases, Frequency, TorusPoint};
use crate::trig::{MatrixTrigPoly, MatrixTrigTerm};

pub use crate::linalg::DEFAULT_RANK_TOL;

#[derive(Clone, Debug, PartialEq)]
pub struct RankProfile {
    /// `r(A^(n))` for `n = 1..=m`.
    pub geometric_ranks: Vec<usize>,
    pub stabilized_rank: usize,
    /// Least `n` from which the profile is constant.
    pub stabilization_index: usize,
}

/// Numerical rank of `A^(n)(x)` with the threshold taken relative to the
/// product of the factor norms, the natural size of the rounding error.
fn iterate_ranks<C: Cocycle + ?Sized>(c: &C, x: &[f64], upto: usize, tol: f64) -> Vec<usize> {
    let m = c.dim();
    let omega = c.frequency().omega();
    let mut phase = vec![0.0; x.len()];
    let mut step = Matrix::zeros(m, m);
    let mut scratch = Matrix::zeros(m, m);
    let mut led = IterationLedger::identity(m);
    let mut log_bound = 0.0;
    let mut out = Vec::with_capacity(upto);
    for j in 0..upto {
        orbit_point_into(x, omega, j as u64, &mut phase);
        let s = c.eval_into(&phase, &mut step);
        let nrm = step.norm();
        led.push(&step, s, &mut scratch);
        if led.vanished || nrm == 0.0 {
            out.resize(upto, 0);
            return out;
        }
        log_bound += s + nrm.ln();
        let vals = linalg::singular_values(&led.factor);
        let thr = tol * (log_bound - led.log_scale).exp();
        out.push(linalg::rank_from_values(&vals, thr));
    }
    out
}

/// Grid maximum of the numerical ranks of `A^(1), ..., A^(m)`.
pub fn rank_profile<C: Cocycle + ?Sized>(c: &C, grid_points: usize, tol: f64) -> Result<RankProfile> {
    let m = c.dim();
    if grid_points == 0 {
        return input("rank profile needs at least one grid point");
    }
    if !(tol > 0.0 && tol < 1.0) {
        return input("rank tolerance must lie in (0, 1)");
    }
    let grid = phase_grid_at_least(c.torus_dim(), grid_points);
    let per_point = par::map_slice(&grid, |x| iterate_ranks(c, x.coords(), m, tol));
    let mut ranks = vec![0usize; m];
    for r in &per_point {
        for (acc, v) in ranks.iter_mut().zip(r) {
            *acc = (*acc).max(*v);
        }
    }
    // rounding can only lose rank, never create it; enforce monotonicity
    for i in 1..m {
        ranks[i] = ranks[i].min(ranks[i - 1]);
    }
    let k = ranks[m - 1];
    let stabilization_index = (1..=m).find(|&i| ranks[i - 1..].iter().all(|&r| r == k)).unwrap_or(m);
    Ok(RankProfile { geometric_ranks: ranks, stabilized_rank: k, stabilization_index })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NilpotencyReport {
    pub nilpotent: bool,
    /// Least `n <= m` with `A^(n)` vanishing on the grid.
    pub witness: Option<usize>,
    pub profile: RankProfile,
}

pub fn is_nilpotent<C: Cocycle + ?Sized>(c: &C) -> Result<NilpotencyReport> {
    let profile = rank_profile(c, 256, DEFAULT_RANK_TOL)?;
    let witness = profile.geometric_ranks.iter().position(|&r| r == 0).map(|i| i + 1);
    Ok(NilpotencyReport { nilpotent: profile.stabilized_rank == 0, witness, profile })
}

// ---------------------------------------------------------------------------
// Reduced cocycle
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionOptions {
    pub seed: u64,
    pub reference_phases: usize,
    pub selection_grid: usize,
    pub rank_grid: usize,
    pub rank_tol: f64,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        ReductionOptions { seed: 0, reference_phases: 32, selection_grid: 512, rank_grid: 256, rank_tol: DEFAULT_RANK_TOL }
    }
}

impl ReductionOptions {
    pub fn with_seed(seed: u64) -> Self {
        ReductionOptions { seed, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedCocycle {
    base: CocycleSpec,
    m: usize,
    k: usize,
    rows: Vec<usize>,
    reference_phase: TorusPoint,
    profile: RankProfile,
    /// Grid minimum of `det(V V^T) / prod ||v_i||^2` for the chosen rows.
    min_volume: f64,
}

/// Everything the reduction needs at one phase.
#[derive(Clone, Debug)]
pub struct LocalData {
    /// `A(x)`
    pub a: ScaledMatrix,
    /// `A^(m)(x)`
    pub am: ScaledMatrix,
    /// `V(x)` with `v.mat` max-entry normalized.
    pub v: ScaledMatrix,
    /// `adj(V V^T)` of the normalized `V`.
    pub gram_adj: Matrix,
    /// Pseudo-inverse of the normalized `V` where it has full rank.
    pub pinv: Option<Matrix>,
    pub projector: Matrix,
    pub log_g: f64,
    pub log_delta_k: f64,
    /// `det(V V^T) / prod ||v_i||^2`, in `[0, 1]`.
    pub volume: f64,
}

/// Normalized Gram volume `det(V V^T) / prod ||v_i||^2`.
fn hadamard_volume(v: &Matrix) -> f64 {
    let gram = v.mul(&v.transpose());
    let norms: f64 = (0..v.rows()).map(|i| gram[(i, i)]).product();
    if norms == 0.0 {
        return 0.0;
    }
    let piv = linalg::ldl_pivots(&gram);
    (piv.iter().product::<f64>() / norms).max(0.0)
}

/// Greedy volume maximization: repeatedly take the row with the largest
/// component orthogonal to the rows already chosen.
fn greedy_rows(a: &Matrix, k: usize) -> Vec<usize> {
    let (m, n) = (a.rows(), a.cols());
    let mut resid: Vec<Vec<f64>> = (0..m).map(|i| a.row(i).to_vec()).collect();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let best = (0..m)
            .filter(|i| !chosen.contains(i))
            .map(|i| (i, resid[i].iter().map(|v| v * v).sum::<f64>()))
            .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc })
            .0;
        if best == usize::MAX {
            break;
        }
        chosen.push(best);
        let q = resid[best].clone();
        let qn: f64 = q.iter().map(|v| v * v).sum();
        if qn == 0.0 {
            continue;
        }
        for (i, r) in resid.iter_mut().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let d: f64 = r.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() / qn;
            for j in 0..n {
                r[j] -= d * q[j];
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

fn k_subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// Gram-Schmidt (two passes) on the rows of `v`: the projector onto their
/// span, or `None` when some row is numerically dependent on the previous.
fn row_projector(v: &Matrix) -> Option<Matrix> {
    let (k, m) = (v.rows(), v.cols());
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        let mut r = v.row(i).to_vec();
        let orig: f64 = r.iter().map(|a| a * a).sum::<f64>().sqrt();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = r.iter().zip(b).map(|(a, c)| a * c).sum();
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri -= d * bi;
                }
            }
        }
        let nr = r.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(nr > 1e-14 * orig) {
            return None;
        }
        basis.push(r.into_iter().map(|a| a / nr).collect());
    }
    Some(Matrix::from_fn(m, m, |i, j| basis.iter().map(|b| b[i] * b[j]).sum()))
}

impl ReducedCocycle {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn reference_phase(&self) -> &TorusPoint {
        &self.reference_phase
    }

    pub fn profile(&self) -> &RankProfile {
        &self.profile
    }

    pub fn min_volume(&self) -> f64 {
        self.min_volume
    }

    pub fn base(&self) -> &CocycleSpec {
        &self.base
    }

    fn frequency(&self) -> &Frequency {
        self.base.frequency()
    }

    fn eval_a(&self, x: &[f64]) -> ScaledMatrix {
        let mut out = Matrix::zeros(self.m, self.m);
        let s = self.base.eval_into(x, &mut out);
        ScaledMatrix::new(s, out)
    }

    fn local_from(&self, a: ScaledMatrix, am: ScaledMatrix) -> LocalData {
        let v = ScaledMatrix::new(am.log_scale, am.mat.select_rows(&self.rows)).normalized();
        let gram = v.mat.mul(&v.mat.transpose());
        let piv = linalg::ldl_pivots(&gram);
        let k = self.k;
        // delta_i = prod_{j<=i} d_j, so log g = sum_i (k - i) log d_i (0-based i)
        let mut log_g_hat = 0.0;
        let mut log_dk_hat = 0.0;
        for (i, d) in piv.iter().enumerate() {
            let l = d.ln();
            log_g_hat += (k - i) as f64 * l;
            log_dk_hat += l;
        }
        let s = v.log_scale;
        let kf = k as f64;
        let norms: f64 = (0..k).map(|i| gram[(i, i)]).product();
        let volume = if norms > 0.0 { (piv.iter().product::<f64>() / norms).max(0.0) } else { 0.0 };
        let projector = row_projector(&v.mat).unwrap_or_else(|| Matrix::zeros(self.m, self.m));
        let gram_adj = linalg::adjugate(&gram).expect("k <= 8");
        let pinv = (volume > 0.0).then(|| {
            let f = linalg::svd(&v.mat);
            let mut w = f.v.clone();
            for j in 0..k {
                for i in 0..self.m {
                    w[(i, j)] /= f.s[j];
                }
            }
            w.mul(&f.u.transpose())
        });
        LocalData {
            a,
            am,
            gram_adj,
            pinv,
            projector,
            log_g: log_g_hat + s * kf * (kf + 1.0),
            log_delta_k: log_dk_hat + 2.0 * s * kf,
            volume,
            v,
        }
    }

    /// `A(T^j x)` for `j < count`.
    fn orbit_a(&self, x: &[f64], count: usize) -> Vec<ScaledMatrix> {
        let omega = self.frequency().omega().to_vec();
        let mut p = vec![0.0; x.len()];
        (0..count)
            .map(|j| {
                orbit_point_into(x, &omega, j as u64, &mut p);
                self.eval_a(&p)
            })
            .collect()
    }

    fn product(blocks: &[ScaledMatrix]) -> ScaledMatrix {
        let mut acc = blocks[0].clone().normalized();
        for b in &blocks[1..] {
            acc = b.mul(&acc);
        }
        acc
    }

    /// Local data at `T^j x` for `j = 0..=len`, plus the raw `A(T^j x)`.
    pub fn orbit(&self, x: &TorusPoint, len: usize) -> Vec<LocalData> {
        let a = self.orbit_a(x.coords(), len + self.m);
        (0..=len)
            .map(|j| self.local_from(a[j].clone(), Self::product(&a[j..j + self.m])))
            .collect()
    }

    pub fn local(&self, x: &TorusPoint) -> LocalData {
        self.orbit(x, 0).pop().expect("orbit of length 0 has one point")
    }

    /// `log h` at the first point, from data at `x` and `T x`.
    pub fn log_h(here: &LocalData, next: &LocalData) -> f64 {
        here.log_delta_k + 3.0 * next.log_g
    }

    /// `At(x) = h(x) P(T x) A(x)`.
    pub fn a_tilde(here: &LocalData, next: &LocalData) -> ScaledMatrix {
        ScaledMatrix::new(Self::log_h(here, next) + here.a.log_scale, next.projector.mul(&here.a.mat))
    }

    /// `R(x) = V(T x) At(x) V^+(x)`; in the adjugate form where `V(x)` is
    /// singular, which is the continuous extension.
    pub fn r_matrix(&self, here: &LocalData, next: &LocalData) -> ScaledMatrix {
        if let Some(pinv) = &here.pinv {
            let mat = next.v.mat.mul(&next.projector).mul(&here.a.mat).mul(pinv);
            let scale = next.v.log_scale + Self::log_h(here, next) + here.a.log_scale - here.v.log_scale;
            return ScaledMatrix::new(scale, mat);
        }
        let k = self.k as f64;
        let mat = next
            .v
            .mat
            .mul(&next.projector)
            .mul(&here.a.mat)
            .mul(&here.v.mat.transpose())
            .mul(&here.gram_adj);
        let scale = next.v.log_scale + 3.0 * next.log_g + here.a.log_scale + here.v.log_scale * (2.0 * k - 1.0);
        ScaledMatrix::new(scale, mat)
    }

    /// The reduced cocycle `R` as a [`Cocycle`].
    pub fn r_cocycle(&self) -> ReducedPart<'_> {
        ReducedPart { red: self, which: Part::R }
    }

    /// The scalar cocycle `h` as a `1 x 1` [`Cocycle`].
    pub fn h_cocycle(&self) -> ReducedPart<'_> {
        ReducedPart { red: self, which: Part::H }
    }

    /// `At` as an `m x m` [`Cocycle`].
    pub fn a_tilde_cocycle(&self) -> ReducedPart<'_> {
        ReducedPart { red: self, which: Part::ATilde }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Part {
    R,
    H,
    ATilde,
}

/// One of the cocycles derived from a reduction.
pub struct ReducedPart<'a> {
    red: &'a ReducedCocycle,
    which: Part,
}

impl Cocycle for ReducedPart<'_> {
    fn dim(&self) -> usize {
        match self.which {
            Part::R => self.red.k,
            Part::H => 1,
            Part::ATilde => self.red.m,
        }
    }

    fn frequency(&self) -> &Frequency {
        self.red.frequency()
    }

    fn eval_into(&self, x: &[f64], out: &mut Matrix) -> f64 {
        let p = TorusPoint::new(x.to_vec()).expect("phase is finite");
        let o = self.red.orbit(&p, 1);
        let s = match self.which {
            Part::R => self.red.r_matrix(&o[0], &o[1]),
            Part::H => {
                let lh = ReducedCocycle::log_h(&o[0], &o[1]);
                ScaledMatrix::new(lh, Matrix::identity(1))
            }
            Part::ATilde => ReducedCocycle::a_tilde(&o[0], &o[1]),
        };
        out.copy_from(&s.mat);
        s.log_scale
    }
}

/// Picks the rows of `A^(m)` defining `V` and assembles the reduction.
pub fn build_reduction(c: &CocycleSpec, opts: &ReductionOptions) -> Result<ReducedCocycle> {
    let m = c.dim();
    if m > 8 {
        return input("reduction supports m <= 8");
    }
    let profile = rank_profile(c, opts.rank_grid, opts.rank_tol)?;
    let k = profile.stabilized_rank;
    if k == 0 {
        let witness = profile.geometric_ranks.iter().position(|&r| r == 0).map_or(m, |i| i + 1);
        return Err(Error::Nilpotent { witness });
    }
    let d = c.torus_dim();
    let mut rng: ChaCha8Rng = SeedStream::new(opts.seed).stream("reduction/reference-phases");
    let refs = random_phases(d, opts.reference_phases.max(1), &mut rng);
    let probe = ReducedCocycle {
        base: c.clone(),
        m,
        k,
        rows: (0..k).collect(),
        reference_phase: refs[0].clone(),
        profile: profile.clone(),
        min_volume: 0.0,
    };
    let mut candidates: Vec<(Vec<usize>, TorusPoint)> = Vec::new();
    for x in &refs {
        let a = probe.orbit_a(x.coords(), m);
        let am = ReducedCocycle::product(&a).normalized();
        let rows = greedy_rows(&am.mat, k);
        if !candidates.iter().any(|(r, _)| *r == rows) {
            candidates.push((rows, x.clone()));
        }
    }
    // small problems: every row subset competes, not only the greedy picks
    let subsets = k_subsets(m, k);
    if subsets.len() <= 64 {
        for rows in subsets {
            if !candidates.iter().any(|(r, _)| *r == rows) {
                candidates.push((rows, refs[0].clone()));
            }
        }
    }
    let grid = phase_grid_at_least(d, opts.selection_grid);
    let products: Vec<Matrix> =
        par::map_slice(&grid, |x| ReducedCocycle::product(&probe.orbit_a(x.coords(), m)).normalized().mat);
    let mut best: Option<(f64, usize)> = None;
    for (ci, (rows, _)) in candidates.iter().enumerate() {
        let vol = products
            .iter()
            .map(|p| hadamard_volume(&p.select_rows(rows)))
            .fold(f64::INFINITY, f64::min);
        if best.is_none_or(|(b, _)| vol > b) {
            best = Some((vol, ci));
        }
    }
    let (min_volume, ci) = best.expect("at least one reference phase");
    if !(min_volume > 0.0) && candidates.iter().all(|(rows, _)| {
        products.iter().all(|p| hadamard_volume(&p.select_rows(rows)) == 0.0)
    }) {
        return Err(Error::DegenerateReduction("no choice of rows has full rank anywhere on the grid".into()));
    }
    let (rows, reference_phase) = candidates.swap_remove(ci);
    Ok(ReducedCocycle { base: c.clone(), m, k, rows, reference_phase, profile, min_volume })
}

/// Random `A(x) = U(x) W(x)` with `U` of size `m x k` and `W` of size
/// `k x m`, both first-degree trigonometric polynomials whose constant term
/// dominates, so `A` has rank `k` at every phase and a moving kernel.
pub fn random_low_rank_cocycle(m: usize, k: usize, frequency: Frequency, seed: u64) -> Result<CocycleSpec> {
    if k == 0 || k >= m {
        return input("need 1 <= k < m");
    }
    if frequency.dim() != 1 {
        return input("random low-rank cocycles live on the circle");
    }
    let mut rng: ChaCha8Rng = SeedStream::new(seed).stream("reduction/random-low-rank");
    let mut gauss = |r: usize, c: usize, s: f64| Matrix::from_fn(r, c, |_, _| s * rng.sample::<f64, _>(StandardNormal));
    let (u0, u1, u2) = (gauss(m, k, 1.0), gauss(m, k, 0.3), gauss(m, k, 0.3));
    let (w0, w1, w2) = (gauss(k, m, 1.0), gauss(k, m, 0.3), gauss(k, m, 0.3));
    // (u0 + u1 cos + u2 sin)(w0 + w1 cos + w2 sin), with products of first
    // harmonics folded into the second
    let zero = Matrix::zeros(m, m);
    let terms = vec![
        MatrixTrigTerm { k: vec![0], cos: u0.mul(&w0).add(&u1.mul(&w1).add(&u2.mul(&w2)).scaled(0.5)), sin: zero.clone() },
        MatrixTrigTerm { k: vec![1], cos: u0.mul(&w1).add(&u1.mul(&w0)), sin: u0.mul(&w2).add(&u2.mul(&w0)) },
        MatrixTrigTerm {
            k: vec![2],
            cos: u1.mul(&w1).sub(&u2.mul(&w2)).scaled(0.5),
            sin: u1.mul(&w2).add(&u2.mul(&w1)).scaled(0.5),
        },
    ];
    CocycleSpec::trig(MatrixTrigPoly::new(1, m, m, terms)?, frequency)
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct SemiconjugationReport {
    pub n: usize,
    /// Max scale-normalized residual of `R^(n) V = (V o T^n) At^(n)`.
    pub rv: f64,
    /// Of `At^(n) = h^(n-m) (At^(m) o T^(n-m)) A^(n-m)`.
    pub bn: f64,
    /// Of `A^(n) = (h^(n-m))^{-1} (A^(m) o T^(n-m)) At^(n-m)`.
    pub an: f64,
    pub phases: usize,
    pub rejected: usize,
}

impl SemiconjugationReport {
    pub fn max(&self) -> f64 {
        self.rv.max(self.bn).max(self.an)
    }
}

/// Phases whose orbit segment stays at least this far from the set where
/// `V V^T` is singular (in normalized volume).
pub const ADMISSIBLE_VOLUME: f64 = 1e-12;

fn product_or_identity(blocks: &[ScaledMatrix], m: usize) -> ScaledMatrix {
    if blocks.is_empty() {
        ScaledMatrix::unscaled(Matrix::identity(m))
    } else {
        ReducedCocycle::product(blocks)
    }
}

fn residuals_at(red: &ReducedCocycle, o: &[LocalData], n: usize) -> (f64, f64, f64) {
    let m = red.m;
    let at: Vec<ScaledMatrix> = (0..n).map(|j| ReducedCocycle::a_tilde(&o[j], &o[j + 1])).collect();
    let rs: Vec<ScaledMatrix> = (0..n).map(|j| red.r_matrix(&o[j], &o[j + 1])).collect();
    let a: Vec<ScaledMatrix> = (0..n).map(|j| o[j].a.clone()).collect();
    let log_h: Vec<f64> = (0..n).map(|j| ReducedCocycle::log_h(&o[j], &o[j + 1])).collect();

    let at_n = product_or_identity(&at, m);
    let rv_l = ReducedCocycle::product(&rs).mul(&o[0].v);
    let rv_r = o[n].v.mul(&at_n);

    let lh: f64 = log_h[..n - m].iter().sum();
    let a_nm = product_or_identity(&a[..n - m], m);
    let mut bn_r = product_or_identity(&at[n - m..], m).mul(&a_nm);
    bn_r.log_scale += lh;

    let a_n = product_or_identity(&a, m);
    let mut an_r = o[n - m].am.mul(&product_or_identity(&at[..n - m], m));
    an_r.log_scale -= lh;

    (scaled_residual(&rv_l, &rv_r), scaled_residual(&at_n, &bn_r), scaled_residual(&a_n, &an_r))
}

/// Checks the three semi-conjugation identities at `phases` admissible random
/// phases; phases whose orbit comes near the singular set are resampled.
pub fn verify_semiconjugation(red: &ReducedCocycle, n: usize, phases: usize, seed: u64) -> Result<SemiconjugationReport> {
    if n < red.m {
        return input(format!("identities hold for n >= m = {}", red.m));
    }
    let mut rng: ChaCha8Rng = SeedStream::new(seed).stream("reduction/verification-phases");
    let d = red.frequency().dim();
    let mut report = SemiconjugationReport { n, rv: 0.0, bn: 0.0, an: 0.0, phases: 0, rejected: 0 };
    let mut streak = 0;
    while report.phases < phases {
        let x = random_phases(d, 1, &mut rng).pop().expect("one phase");
        let o = red.orbit(&x, n);
        if o.iter().any(|l| l.volume < ADMISSIBLE_VOLUME || !l.log_g.is_finite()) {
            report.rejected += 1;
            streak += 1;
            if streak >= 100 {
                return Err(Error::DegenerateReduction(format!(
                    "100 consecutive phases hit the singular set of V V^T (n = {n})"
                )));
            }
            continue;
        }
        streak = 0;
        let (rv, bn, an) = residuals_at(red, &o, n);
        report.rv = report.rv.max(rv);
        report.bn = report.bn.max(bn);
        report.an = report.an.max(an);
        report.phases += 1;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeDecomposition {
    pub n: usize,
    pub l_a: f64,
    pub l_r: f64,
    pub l_h: f64,
    /// Grid mean of `r_n = u^A - u^R + u^h`.
    pub remainder_mean: f64,
    pub remainder_l2: f64,
    pub remainder_max: f64,
    /// `C0 n^{-a/3}`
    pub threshold: f64,
    /// Fraction of the grid where `|r_n|` exceeds `threshold`.
    pub fraction_above: f64,
    pub samples: usize,
    /// Grid points dropped because some term was infinite.
    pub excluded: usize,
}

impl LeDecomposition {
    /// `|L(A) - (L(R) - L(h))|`
    pub fn gap(&self) -> f64 {
        (self.l_a - (self.l_r - self.l_h)).abs()
    }
}

pub const DEFAULT_A: f64 = 0.5;
pub const DEFAULT_C0: f64 = 1.0;

/// Grid means of `u_n` for `A`, `R` and `h` and the remainder statistics.
pub fn le_decomposition(red: &ReducedCocycle, n: usize, grid_points: usize, a: f64, c0: f64) -> Result<LeDecomposition> {
    if n < red.m {
        return input(format!("decomposition needs n >= m = {}", red.m));
    }
    if !(a > 0.0 && a < 1.0) {
        return input("a must lie in (0, 1)");
    }
    let grid = phase_grid_at_least(red.frequency().dim(), grid_points);
    let nf = n as f64;
    let triples = par::map_slice(&grid, |x| {
        let o = red.orbit(x, n);
        let mut st = Stepper::new(red.m, x.dim());
        let mut led = IterationLedger::identity(red.m);
        st.run(&red.base, x.coords(), 0, n as u64, &mut led);
        let ua = led.log_norm() / nf;
        let rs: Vec<ScaledMatrix> = (0..n).map(|j| red.r_matrix(&o[j], &o[j + 1])).collect();
        let ur = ReducedCocycle::product(&rs).log_norm() / nf;
        let uh: f64 = (0..n).map(|j| ReducedCocycle::log_h(&o[j], &o[j + 1])).sum::<f64>() / nf;
        (ua, ur, uh)
    });
    let kept: Vec<(f64, f64, f64)> =
        triples.iter().copied().filter(|t| t.0.is_finite() && t.1.is_finite() && t.2.is_finite()).collect();
    if kept.is_empty() {
        return Err(Error::DegenerateReduction("every grid point hit the singular set".into()));
    }
    let col = |f: fn(&(f64, f64, f64)) -> f64| pairwise_mean(&kept.iter().map(f).collect::<Vec<_>>());
    let rem: Vec<f64> = kept.iter().map(|t| t.0 - t.1 + t.2).collect();
    let threshold = c0 * nf.powf(-a / 3.0);
    let above = rem.iter().filter(|r| r.abs() > threshold).count();
    Ok(LeDecomposition {
        n,
        l_a: col(|t| t.0),
        l_r: col(|t| t.1),
        l_h: col(|t| t.2),
        remainder_mean: pairwise_mean(&rem),
        remainder_l2: pairwise_mean(&rem.iter().map(|r| r * r).collect::<Vec<_>>()).sqrt(),
        remainder_max: rem.iter().fold(0.0, |a, r| a.max(r.abs())),
        threshold,
        fraction_above: above as f64 / rem.len() as f64,
        samples: triples.len(),
        excluded: triples.len() - kept.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trig::{MatrixTrigPoly, TrigPoly};

    fn diag_f0() -> CocycleSpec {
        let f = TrigPoly::cos1(1).plus_constant(2.0);
        let p = MatrixTrigPoly::diagonal(&[f, TrigPoly::constant(1, 0.0)]).unwrap();
        CocycleSpec::trig(p, Frequency::golden()).unwrap()
    }

    #[test]
    fn profile_of_diag_f0() {
        let p = rank_profile(&diag_f0(), 64, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(p.geometric_ranks, vec![1, 1]);
        assert_eq!(p.stabilized_rank, 1);
    }

    #[test]
    fn nilpotent_upper_triangular() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let c = CocycleSpec::constant(a, Frequency::golden()).unwrap();
        let r = is_nilpotent(&c).unwrap();
        assert!(r.nilpotent);
        assert_eq!(r.witness, Some(2));
        assert!(matches!(build_reduction(&c, &ReductionOptions::default()), Err(Error::Nilpotent { witness: 2 })));
    }

    #[test]
    fn diag_f0_reduction_identities() {
        let c = diag_f0();
        let red = build_reduction(&c, &ReductionOptions::default()).unwrap();
        assert_eq!(red.k(), 1);
        assert_eq!(red.rows(), &[0]);
        let rep = verify_semiconjugation(&red, 7, 20, 1).unwrap();
        assert!(rep.max() <= 1e-9, "{rep:?}");
    }

    #[test]
    fn projector_is_orthogonal() {
        let c = diag_f0();
        let red = build_reduction(&c, &ReductionOptions::default()).unwrap();
        let l = red.local(&TorusPoint::scalar(0.3));
        let p = &l.projector;
        assert!(p.mul(p).sub(p).max_abs() < 1e-12);
        assert!(p.is_symmetric(1e-14));
    }
}
