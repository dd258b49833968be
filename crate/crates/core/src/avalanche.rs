//! The Avalanche Principle on finite matrix chains.
//!
//! For a chain `g_0, ..., g_{n-1}` with large gaps and non-degenerate angles,
//! `log ||g_{n-1} ... g_0||` is approximated by
//! `-sum_{i=1}^{n-2} log ||g_i|| + sum_{i=1}^{n-1} log ||g_i g_{i-1}||`.
//! Blocks are stored with a separate log scale, so only log-norms of
//! single blocks and adjacent pairs are ever formed.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cocycle::{iterate_from, Cocycle};
use crate::error::{input, Result};
use crate::linalg::{self, pairwise_sum, Matrix, ScaledMatrix};
use crate::torus::TorusPoint;

/// `s_1(g) / s_2(g)`; `+inf` when `s_2 = 0` or `g` is `1 x 1`.
pub fn gap_ratio(g: &Matrix) -> Result<f64> {
    let s = linalg::singular_values(g);
    if s.first().map_or(true, |&s1| s1 == 0.0) {
        return input("gap ratio of the zero matrix");
    }
    match s.get(1) {
        Some(&s2) if s2 > 0.0 => Ok(s[0] / s2),
        _ => Ok(f64::INFINITY),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixChain {
    blocks: Vec<ScaledMatrix>,
    /// Cocycle steps per block when the chain comes from a cocycle.
    lengths: Option<Vec<u64>>,
}

impl MatrixChain {
    pub fn new(blocks: Vec<Matrix>) -> Result<Self> {
        Self::from_scaled(blocks.into_iter().map(ScaledMatrix::unscaled).collect())
    }

    pub fn from_scaled(blocks: Vec<ScaledMatrix>) -> Result<Self> {
        if blocks.len() < 3 {
            return input(format!("a chain needs at least 3 blocks, got {}", blocks.len()));
        }
        let (r, c) = (blocks[0].mat.rows(), blocks[0].mat.cols());
        if r != c {
            return input("chain blocks must be square");
        }
        for (i, b) in blocks.iter().enumerate() {
            if (b.mat.rows(), b.mat.cols()) != (r, c) {
                return input(format!("block {i} has a different size"));
            }
            if b.is_zero() || b.log_scale == f64::NEG_INFINITY {
                return input(format!("block {i} is zero"));
            }
            if !b.mat.is_finite() || !b.log_scale.is_finite() {
                return input(format!("block {i} is not finite"));
            }
        }
        Ok(MatrixChain { blocks, lengths: None })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].mat.rows()
    }

    pub fn blocks(&self) -> &[ScaledMatrix] {
        &self.blocks
    }

    pub fn lengths(&self) -> Option<&[u64]> {
        self.lengths.as_deref()
    }

    /// Every block multiplied by a positive constant.
    pub fn rescaled(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.len() || factors.iter().any(|f| !(*f > 0.0)) {
            return input("one positive factor per block is required");
        }
        let blocks = self
            .blocks
            .iter()
            .zip(factors)
            .map(|(b, f)| ScaledMatrix::new(b.log_scale + f.ln(), b.mat.clone()))
            .collect();
        Ok(MatrixChain { blocks, lengths: self.lengths.clone() })
    }

    /// `log ||g_{n-1} ... g_0||` through a renormalized running product.
    pub fn exact_log_norm(&self) -> f64 {
        let mut acc = self.blocks[0].clone().normalized();
        for b in &self.blocks[1..] {
            acc = b.mul(&acc);
            if acc.is_zero() {
                return f64::NEG_INFINITY;
            }
        }
        acc.log_norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct APReport {
    pub n: usize,
    /// `max_i 1 / gr(g_i)`
    pub kappa: f64,
    /// `min_i ||g_i g_{i-1}|| / (||g_i|| ||g_{i-1}||)`
    pub epsilon: f64,
    pub c: f64,
    pub hypotheses_met: bool,
    pub ap_estimate: f64,
    pub exact_log_norm: f64,
    pub residual: f64,
    /// `n kappa / epsilon^2`
    pub bound: f64,
}

pub const DEFAULT_AP_C: f64 = 1e-2;

pub fn ap_apply(chain: &MatrixChain, c: f64) -> Result<APReport> {
    if !(c > 0.0) {
        return input("the AP constant c must be positive");
    }
    let n = chain.len();
    let g = chain.blocks();
    let single: Vec<f64> = g.iter().map(ScaledMatrix::log_norm).collect();
    let pairs: Vec<f64> = (1..n).map(|i| g[i].mul(&g[i - 1]).log_norm()).collect();
    let mut kappa = 0.0f64;
    for b in g {
        kappa = kappa.max(1.0 / gap_ratio(&b.mat)?);
    }
    let epsilon = (1..n)
        .map(|i| (pairs[i - 1] - single[i] - single[i - 1]).exp())
        .fold(f64::INFINITY, f64::min);
    let ap_estimate = pairwise_sum(&pairs) - pairwise_sum(&single[1..n - 1]);
    let exact_log_norm = chain.exact_log_norm();
    let residual = (exact_log_norm - ap_estimate).abs();
    Ok(APReport {
        n,
        kappa,
        epsilon,
        c,
        hypotheses_met: epsilon < 1.0 && kappa <= c * epsilon * epsilon,
        ap_estimate,
        exact_log_norm,
        residual,
        bound: n as f64 * kappa / (epsilon * epsilon),
    })
}

/// Blocks `g_i = A^(n0)(T^(i n0) x)` for `i < blocks - 1` and a last block of
/// length `last_len` (default `n0`, must lie in `[n0, 2 n0)`).
pub fn schrodinger_chain<C: Cocycle + ?Sized>(
    c: &C,
    x: &TorusPoint,
    n0: u64,
    blocks: usize,
    last_len: Option<u64>,
) -> Result<MatrixChain> {
    if blocks < 3 {
        return input("a chain needs at least 3 blocks");
    }
    if n0 < 1 {
        return input("block length must be at least 1");
    }
    let m0 = last_len.unwrap_or(n0);
    if m0 < n0 || m0 >= 2 * n0 {
        return input(format!("last block length {m0} is outside [{n0}, {})", 2 * n0));
    }
    let mut out = Vec::with_capacity(blocks);
    let mut lengths = Vec::with_capacity(blocks);
    for i in 0..blocks {
        let len = if i + 1 == blocks { m0 } else { n0 };
        let led = iterate_from(c, x, i as u64 * n0, len)?;
        out.push(led.as_scaled());
        lengths.push(len);
    }
    let mut chain = MatrixChain::from_scaled(out)?;
    chain.lengths = Some(lengths);
    Ok(chain)
}

/// Random orthogonal matrix whose first column is `first` (unit).
fn orthogonal_with_first<R: Rng + ?Sized>(first: &[f64], rng: &mut R) -> Matrix {
    let m = first.len();
    let mut cols: Vec<Vec<f64>> = vec![first.to_vec()];
    while cols.len() < m {
        let mut v: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= d * ci;
            }
        }
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nv > 1e-8 {
            cols.push(v.into_iter().map(|a| a / nv).collect());
        }
    }
    Matrix::from_fn(m, m, |i, j| cols[j][i])
}

fn unit<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

/// Random chain of `m x m` blocks `U_i diag(s_i) V_i^T` with gap ratio at
/// least `1 / kappa` and the top input direction of each block tilted from
/// the top output direction of its predecessor by a random angle below
/// about 50 degrees, so the angle condition holds with room to spare.
pub fn random_chain<R: Rng + ?Sized>(m: usize, n: usize, kappa: f64, rng: &mut R) -> Result<MatrixChain> {
    if m < 2 {
        return input("random chains need m >= 2");
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return input("kappa must lie in (0, 1)");
    }
    let mut prev_out = unit(m, rng);
    let mut blocks = Vec::with_capacity(n);
    for _ in 0..n {
        let tilt: Vec<f64> = unit(m, rng).into_iter().map(|a| 0.6 * a).collect();
        let mut v1: Vec<f64> = prev_out.iter().zip(&tilt).map(|(a, b)| a + b).collect();
        let nv = v1.iter().map(|a| a * a).sum::<f64>().sqrt();
        v1.iter_mut().for_each(|a| *a /= nv);
        let v = orthogonal_with_first(&v1, rng);
        let out_dir = unit(m, rng);
        let u = orthogonal_with_first(&out_dir, rng);
        let top = rng.random_range(0.5..2.0);
        let mut s = vec![top];
        for _ in 1..m {
            s.push(top * kappa * rng.random_range(0.1..1.0));
        }
        s[1..].sort_by(|a, b| b.total_cmp(a));
        blocks.push(u.mul(&Matrix::from_diag(&s)).mul(&v.transpose()));
        prev_out = out_dir;
    }
    MatrixChain::new(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gap_ratio_examples() {
        assert!((gap_ratio(&Matrix::from_diag(&[4.0, 2.0])).unwrap() - 2.0).abs() < 1e-14);
        let t = 0.3f64;
        let rot = Matrix::from_rows(&[vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]]).unwrap();
        assert!((gap_ratio(&rot).unwrap() - 1.0).abs() < 1e-12);
        assert!(gap_ratio(&Matrix::zeros(2, 2)).is_err());
        assert_eq!(gap_ratio(&Matrix::from_diag(&[1.0, 0.0])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn diagonal_chain_telescopes() {
        let chain = MatrixChain::new(vec![Matrix::from_diag(&[5.0, 1.0]); 10]).unwrap();
        let r = ap_apply(&chain, DEFAULT_AP_C).unwrap();
        assert!(r.residual < 1e-12, "{}", r.residual);
        assert!((r.exact_log_norm - 10.0 * 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn misaligned_chain_fails_hypotheses() {
        let a = Matrix::from_diag(&[10.0, 0.01]);
        let b = Matrix::from_rows(&[vec![0.01, 0.0], vec![0.0, 10.0]]).unwrap();
        let chain = MatrixChain::new(vec![a.clone(), b, a]).unwrap();
        let r = ap_apply(&chain, DEFAULT_AP_C).unwrap();
        assert!(!r.hypotheses_met);
        assert!(r.epsilon < 1e-2);
    }

    #[test]
    fn short_or_zero_chains_rejected() {
        assert!(MatrixChain::new(vec![Matrix::identity(2); 2]).is_err());
        assert!(MatrixChain::new(vec![Matrix::identity(2), Matrix::zeros(2, 2), Matrix::identity(2)]).is_err());
    }

    #[test]
    fn random_chain_meets_requested_gap() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let chain = random_chain(3, 50, 1e-5, &mut rng).unwrap();
        let r = ap_apply(&chain, DEFAULT_AP_C).unwrap();
        assert!(r.kappa <= 1e-5 * 1.0000001);
        assert!(r.epsilon > 0.2, "{}", r.epsilon);
        assert!(r.residual <= r.bound);
    }
}
