//! The acceptance suite: twelve end-to-end checks with fixed inputs and
//! tolerances. Each check returns a pass flag and a one-line summary of the
//! measured quantities.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::avalanche::{ap_apply, random_chain, MatrixChain, DEFAULT_AP_C};
use crate::cocycle::{finite_scale_top_le, lyapunov_spectrum, CocycleSpec, ExteriorSquare, Quadrature};
use crate::empirics::{deviation_measure, fit_decay_exponent, raw_inversions, significant_inversions, Sampling};
use crate::error::Result;
use crate::linalg::{self, pairwise_mean, Matrix};
use crate::models::{
    fitted_positivity_constant, jacobi_cocycle, schrodinger_cocycle, scalar_block_s, thouless_check,
    verify_sorets_spencer, ids, JacobiParams, Regime, SchrodingerParams, SoretsSpencerRow,
};
use crate::reduction::{
    build_reduction, is_nilpotent, le_decomposition, random_low_rank_cocycle, verify_semiconjugation,
    ReductionOptions, DEFAULT_A, DEFAULT_C0,
};
use crate::rng::SeedStream;
use crate::torus::{diophantine_check, phase_grid, DcOutcome, Frequency};
use crate::trig::{MatrixTrigPoly, TrigPoly};

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

pub const NAMES: [&str; 12] = [
    "herman-identity",
    "sorets-spencer-sweep",
    "positivity-margin",
    "avalanche-principle",
    "semiconjugation",
    "le-decomposition",
    "nilpotency",
    "spectrum-identities",
    "singular-continuity",
    "empirical-ldt",
    "ids-thouless",
    "diophantine",
];

/// Runs criterion `id` (1-based). Errors count as failures.
pub fn run(id: usize) -> Outcome {
    assert!((1..=12).contains(&id), "criteria are numbered 1..=12");
    let t = Instant::now();
    let res = match id {
        1 => herman(),
        2 => sorets_spencer(),
        3 => positivity(),
        4 => avalanche(),
        5 => semiconjugation(),
        6 => decomposition(),
        7 => nilpotency(),
        8 => spectrum_identities(),
        9 => singular_continuity(),
        10 => ldt(),
        11 => ids_thouless(),
        _ => diophantine(),
    };
    let elapsed = t.elapsed();
    let (passed, detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
    Outcome { id, name: NAMES[id - 1], passed, detail, elapsed }
}

pub fn run_all() -> Vec<Outcome> {
    (1..=12).map(run).collect()
}

type Check = Result<(bool, String)>;

fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
}

fn within(t: Instant, secs: u64) -> bool {
    t.elapsed() <= Duration::from_secs(secs)
}

fn almost_mathieu(lambda: f64, energy: f64) -> Result<CocycleSpec> {
    schrodinger_cocycle(SchrodingerParams::new(TrigPoly::cos1(1), lambda, energy), Frequency::golden())
}

fn herman() -> Check {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for lambda in [10.0, 30.0] {
        let r = finite_scale_top_le(&almost_mathieu(lambda, 0.0)?, 100_000, &Quadrature::with_grid(2048).without_birkhoff())?;
        let err = (r.estimate - (lambda / 2.0f64).ln()).abs();
        ok &= err <= 5e-3;
        parts.push(format!("lambda={lambda}: L={:.6} |L-log(lambda/2)|={err:.2e}", r.estimate));
    }
    ok &= within(t, 120);
    Ok((ok, parts.join("; ")))
}

const SS_N: u64 = 2000;

fn ss_sweep(lambda: f64) -> Result<Vec<SoretsSpencerRow>> {
    verify_sorets_spencer(
        &TrigPoly::cos1(1),
        &Frequency::golden(),
        lambda,
        &linspace(-3.0 * lambda, 3.0 * lambda, 21),
        SS_N,
        &Quadrature::default().without_birkhoff(),
    )
}

fn sweep_30() -> Result<&'static Vec<SoretsSpencerRow>> {
    static CELL: OnceLock<Result<Vec<SoretsSpencerRow>>> = OnceLock::new();
    CELL.get_or_init(|| ss_sweep(30.0)).as_ref().map_err(Clone::clone)
}

fn max_residual(rows: &[SoretsSpencerRow]) -> f64 {
    rows.iter().map(|r| r.residual).fold(0.0, f64::max)
}

fn sorets_spencer() -> Check {
    let rows = sweep_30()?;
    let inside = rows.iter().filter(|r| r.regime == Regime::Inside).count();
    let max30 = max_residual(rows);
    let max10 = max_residual(&ss_sweep(10.0)?);
    let max100 = max_residual(&ss_sweep(100.0)?);
    let ok = max30 <= 0.05 && inside > 0 && inside < rows.len() && max100 < max10;
    Ok((
        ok,
        format!(
            "lambda=30: max residual {max30:.2e} over {} energies ({inside} inside); max residual lambda=10 {max10:.2e}, lambda=100 {max100:.2e}",
            rows.len()
        ),
    ))
}

fn positivity() -> Check {
    let rows = sweep_30()?;
    let c = fitted_positivity_constant(rows);
    let worst = rows.iter().min_by(|a, b| a.margin.total_cmp(&b.margin)).expect("non-empty sweep");
    Ok((c <= 1.0, format!("fitted C = {c:.4} (smallest margin at E = {:.1})", worst.energy)))
}

fn diagonal_chain(len: usize, rng: &mut ChaCha8Rng) -> Result<MatrixChain> {
    let blocks = (0..len)
        .map(|_| {
            let top = rng.random_range(1.0..5.0);
            let d = [top, top * rng.random_range(0.01..0.9), top * rng.random_range(0.001..0.01)];
            Matrix::from_diag(&d)
        })
        .collect();
    MatrixChain::new(blocks)
}

fn avalanche() -> Check {
    let t = Instant::now();
    let seeds = SeedStream::new(4);
    let mut rng = seeds.stream("acceptance/diagonal-chains");
    let mut diag_max = 0.0f64;
    for len in [10, 31, 100, 316, 1000] {
        diag_max = diag_max.max(ap_apply(&diagonal_chain(len, &mut rng)?, DEFAULT_AP_C)?.residual);
    }
    let mut rng = seeds.stream("acceptance/random-chains");
    let (mut good, mut admissible, mut worst) = (0, 0, 0.0f64);
    for _ in 0..100 {
        let m = rng.random_range(2..=4);
        let n = rng.random_range(3..=200);
        let r = ap_apply(&random_chain(m, n, 1e-6, &mut rng)?, DEFAULT_AP_C)?;
        let ratio = r.kappa / (r.epsilon * r.epsilon);
        if ratio <= 1e-4 {
            admissible += 1;
        }
        if r.residual <= 10.0 * r.bound {
            good += 1;
        }
        worst = worst.max(r.residual / r.bound);
    }
    let ok = diag_max <= 1e-10 && admissible == 100 && good == 100 && within(t, 60);
    Ok((
        ok,
        format!(
            "diagonal max residual {diag_max:.2e}; random chains {good}/100 within 10 n kappa/eps^2 ({admissible}/100 with kappa/eps^2 <= 1e-4, worst residual/bound {worst:.2e})"
        ),
    ))
}

/// `(m, k)` shapes of the seeded rank-deficient test cocycles.
pub const LOW_RANK_SHAPES: [(usize, usize); 10] =
    [(2, 1), (3, 1), (3, 2), (2, 1), (3, 1), (3, 2), (2, 1), (3, 1), (3, 2), (3, 2)];

fn low_rank(i: usize) -> Result<CocycleSpec> {
    let (m, k) = LOW_RANK_SHAPES[i];
    random_low_rank_cocycle(m, k, Frequency::golden(), i as u64)
}

fn semiconjugation() -> Check {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut rejected = 0;
    for i in 0..LOW_RANK_SHAPES.len() {
        let red = build_reduction(&low_rank(i)?, &ReductionOptions::with_seed(1))?;
        for n in [red.m(), 10, 20, 30] {
            let r = verify_semiconjugation(&red, n, 100, 3 + n as u64)?;
            worst = worst.max(r.max());
            rejected += r.rejected;
        }
    }
    let ok = worst <= 1e-8 && within(t, 120);
    Ok((ok, format!("10 cocycles, n in {{m,10,20,30}}, 100 phases each: max residual {worst:.2e} ({rejected} phases resampled)")))
}

fn decomposition() -> Check {
    let (mut gap, mut drift) = (0.0f64, 0.0f64);
    for i in 0..LOW_RANK_SHAPES.len() {
        let c = low_rank(i)?;
        let a = le_decomposition(&build_reduction(&c, &ReductionOptions::with_seed(1))?, 256, 2048, DEFAULT_A, DEFAULT_C0)?;
        let b = le_decomposition(&build_reduction(&c, &ReductionOptions::with_seed(2))?, 256, 2048, DEFAULT_A, DEFAULT_C0)?;
        gap = gap.max(a.gap()).max(b.gap());
        drift = drift.max(((a.l_r - a.l_h) - (b.l_r - b.l_h)).abs());
    }
    Ok((
        gap <= 1e-2 && drift <= 1e-2,
        format!("n=256: max |L(A) - (L(R) - L(h))| = {gap:.2e}; max change across selection seeds {drift:.2e}"),
    ))
}

fn nilpotency() -> Check {
    let a = Matrix::from_rows(&[vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 3.0], vec![0.0, 0.0, 0.0]])?;
    let c = CocycleSpec::constant(a, Frequency::golden())?;
    let r = is_nilpotent(&c)?;
    let le = finite_scale_top_le(&c, 10, &Quadrature::with_grid(64))?;
    let ok = r.nilpotent && r.witness.is_some_and(|w| w <= 3) && le.estimate == f64::NEG_INFINITY;
    Ok((ok, format!(
            "nilpotent={} witness={} L1={}",
            r.nilpotent,
            r.witness.map_or("none".to_string(), |w| w.to_string()),
            le.estimate
        )))
}

/// The 4x4 test Jacobi cocycle: `l = 2`, non-constant invertible `W`.
pub fn test_jacobi() -> Result<JacobiParams> {
    let w = MatrixTrigPoly::diagonal(&[
        TrigPoly::cos1(1).scaled(0.3).plus_constant(1.0),
        TrigPoly::sin1(1).scaled(0.3).plus_constant(1.0),
    ])?;
    let r = MatrixTrigPoly::constant(1, Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]])?);
    let f = MatrixTrigPoly::diagonal(&[TrigPoly::cos1(1), TrigPoly::sin1(1)])?;
    JacobiParams::new(w, r, f, 3.0)
}

fn mean_log_det(c: &CocycleSpec) -> f64 {
    use crate::cocycle::Cocycle;
    let vals: Vec<f64> = phase_grid(1, 1 << 14)
        .iter()
        .map(|x| {
            let a = c.eval(x);
            a.log_scale * a.mat.rows() as f64 + linalg::det(&a.mat).abs().ln()
        })
        .collect();
    pairwise_mean(&vals)
}

fn spectrum_identities() -> Check {
    let n = 2000;
    let sch = almost_mathieu(3.0, 0.5)?;
    let s = lyapunov_spectrum(&sch, n, 64)?;
    let sum_sch = (s.sum() - mean_log_det(&sch)).abs();

    let jac = jacobi_cocycle(&test_jacobi()?, Frequency::golden(), 0.5, false)?;
    let j = lyapunov_spectrum(&jac, n, 64)?;
    let sum_jac = (j.sum() - mean_log_det(&jac)).abs();
    let e = &j.exponents;
    let sym = (0..e.len()).map(|k| (e[k] + e[e.len() - 1 - k]).abs()).fold(0.0, f64::max);
    let wedge = finite_scale_top_le(&ExteriorSquare::new(&jac)?, n, &Quadrature::with_grid(256).without_birkhoff())?;
    let wedge_res = (wedge.estimate - (e[0] + e[1])).abs();
    let ok = sum_sch <= 1e-2 && sum_jac <= 1e-2 && sym <= 1e-2 && wedge_res <= 2e-2;
    Ok((
        ok,
        format!(
            "sum rule: schrodinger {sum_sch:.2e}, jacobi {sum_jac:.2e}; symmetry {sym:.2e}; wedge {wedge_res:.2e}"
        ),
    ))
}

fn singular_continuity() -> Check {
    let f = TrigPoly::cos1(1).plus_constant(2.0);
    let q = Quadrature::default().without_birkhoff();
    let n = 1000;
    let l0 = finite_scale_top_le(&scalar_block_s(&f, 0.0, 0.0, Frequency::golden())?, n, &q)?.estimate;
    let mut diffs = Vec::new();
    for delta in [1e-1, 1e-2, 1e-3] {
        let l = finite_scale_top_le(&scalar_block_s(&f, 0.0, delta, Frequency::golden())?, n, &q)?.estimate;
        diffs.push((l - l0).abs());
    }
    let ok = diffs.windows(2).all(|w| w[1] < w[0]) && diffs[2] < 1e-2;
    Ok((ok, format!("|L(S_d) - L(S_0)| for d = 1e-1, 1e-2, 1e-3: {:.2e}, {:.2e}, {:.2e}", diffs[0], diffs[1], diffs[2])))
}

fn ldt() -> Check {
    let c = almost_mathieu(10.0, 0.0)?;
    let ns = [100u64, 200, 400, 800, 1600];
    let rows = ns
        .iter()
        .map(|&n| deviation_measure(&c, n, (n as f64).powf(-0.2), 20_000, Sampling::Grid))
        .collect::<Result<Vec<_>>>()?;
    let ok = significant_inversions(&rows) == 0 && raw_inversions(&rows) <= 1;
    let measures: Vec<f64> = rows.iter().map(|r| r.measure).collect();
    let fit = match fit_decay_exponent(&ns, &measures) {
        Some(f) => format!("fitted exponent {:.3} (empirical)", f.exponent),
        None => "no fit: fewer than two measures strictly inside (0, 1)".to_string(),
    };
    let meas: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.measure)).collect();
    let maxdev: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.max_deviation)).collect();
    Ok((ok, format!("measures [{}]; max |u_n - <u_n>| [{}]; {fit}", meas.join(", "), maxdev.join(", "))))
}

fn ids_thouless() -> Check {
    let t = Instant::now();
    let om = Frequency::golden();
    let phases = phase_grid(1, 8);
    let free = JacobiParams::free_laplacian();
    let n0 = ids(&free, &om, 0.0, 2000, &phases)?.value;
    let n1 = ids(&free, &om, -1.0, 2000, &phases)?.value;
    let th0 = thouless_check(&free, &om, 0.0, 2000, 2000, &phases)?.residual;
    let th3 = thouless_check(&free, &om, 3.0, 2000, 2000, &phases)?.residual;

    let w = MatrixTrigPoly::constant(1, Matrix::identity(2));
    let r = MatrixTrigPoly::constant(1, Matrix::zeros(2, 2));
    let f = MatrixTrigPoly::diagonal(&[TrigPoly::cos1(1), TrigPoly::sin1(1)])?;
    let p = JacobiParams::new(w, r, f, 20.0)?;
    let mut th2 = 0.0f64;
    for e in [0.0, 5.0] {
        th2 = th2.max(thouless_check(&p, &om, e, 2000, 2000, &phases)?.residual);
    }
    let ok = (n0 - 0.5).abs() <= 0.01
        && (n1 - 1.0 / 3.0).abs() <= 0.01
        && th0 <= 0.05
        && th3 <= 0.05
        && th2 <= 0.1
        && within(t, 180);
    Ok((
        ok,
        format!("N(0)={n0:.4} N(-1)={n1:.4}; Thouless residual E=0 {th0:.2e}, E=3 {th3:.2e}; l=2 lambda=20 {th2:.2e}"),
    ))
}

fn diophantine() -> Check {
    let golden = diophantine_check(&Frequency::golden(), 0.3, 10_000)?;
    let half = diophantine_check(&Frequency::new(vec![0.5])?, 0.3, 10_000)?;
    let half_k = match &half.outcome {
        DcOutcome::Violation { k, .. } => Some(k.clone()),
        DcOutcome::Certified(_) => None,
    };
    // convergent denominators of the golden mean are Fibonacci numbers, and
    // q^2 ||q omega|| is minimized over q <= k_max at a convergent
    let w = Frequency::golden().omega()[0];
    let (mut q0, mut q1) = (1u64, 1u64);
    let mut cf_min = f64::INFINITY;
    while q1 <= 10_000 {
        let q = q1 as f64;
        cf_min = cf_min.min(q * q * (q * w - (q * w).round()).abs());
        (q0, q1) = (q1, q0 + q1);
    }
    let agree = (golden.t_star - cf_min).abs() <= 1e-9;
    let ok = golden.passed() && golden.t_star >= 0.3 && agree && half_k.as_deref() == Some(&[2][..]);
    Ok((
        ok,
        format!(
            "golden t*={:.6} at k={:?} (continued fractions: {cf_min:.6}); omega=1/2 violation at k={}",
            golden.t_star,
            golden.t_star_at,
            half_k.map_or("none".to_string(), |k| format!("{k:?}"))
        ),
    ))
}
