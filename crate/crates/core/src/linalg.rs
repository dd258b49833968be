//! Dense real matrix kernel.
//!
//! Everything here works on small matrices (dimension at most 16): the
//! cocycles in this crate are evaluated pointwise and multiplied step by
//! step, so the kernel favours accuracy and allocation-free products over
//! blocked algorithms. All norms are spectral norms unless the name says
//! otherwise.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{input, Error, Result};

/// Default relative rank tolerance (relative to the largest singular value).
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Row-major dense real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>14.6e} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data, checking shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return input("matrix dimensions must be at least 1x1");
        }
        if data.len() != rows * cols {
            return input(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return input(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return input("ragged rows");
        }
        Self::new(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Resizes `self` to `rows x cols` and fills it with zeros, reusing the allocation.
    pub fn reset(&mut self, rows: usize, cols: usize) {
        self.rows = rows;
        self.cols = cols;
        self.data.clear();
        self.data.resize(rows * cols, 0.0);
    }

    pub fn copy_from(&mut self, other: &Matrix) {
        self.rows = other.rows;
        self.cols = other.cols;
        self.data.clear();
        self.data.extend_from_slice(&other.data);
    }

    /// `out = self * rhs` without allocating when `out` already has capacity.
    pub fn mul_into(&self, rhs: &Matrix, out: &mut Matrix) {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in product");
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        out.reset(n, m);
        if n == 2 && k == 2 && m == 2 {
            let a = &self.data;
            let b = &rhs.data;
            out.data[0] = a[0] * b[0] + a[1] * b[2];
            out.data[1] = a[0] * b[1] + a[1] * b[3];
            out.data[2] = a[2] * b[0] + a[3] * b[2];
            out.data[3] = a[2] * b[1] + a[3] * b[3];
            return;
        }
        for i in 0..n {
            let arow = &self.data[i * k..(i + 1) * k];
            let orow = &mut out.data[i * m..(i + 1) * m];
            for (p, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let brow = &rhs.data[p * m..(p + 1) * m];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        self.mul_into(rhs, &mut out);
        out
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        out.scale_mut(s);
        out
    }

    pub fn scale_mut(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Spectral norm s_1.
    pub fn norm(&self) -> f64 {
        match (self.rows, self.cols) {
            (1, _) | (_, 1) => self.frobenius_norm(),
            (2, 2) => {
                let [a, b, c, d] = [self.data[0], self.data[1], self.data[2], self.data[3]];
                0.5 * ((a + d).hypot(b - c) + (a - d).hypot(b + c))
            }
            _ => singular_values(self)[0],
        }
    }

    /// Rows selected by `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (r, &i) in indices.iter().enumerate() {
            out.data[r * self.cols..(r + 1) * self.cols].copy_from_slice(self.row(i));
        }
        out
    }

    /// Leading `k x k` principal submatrix.
    pub fn leading(&self, k: usize) -> Matrix {
        Matrix::from_fn(k, k, |i, j| self[(i, j)])
    }

    /// Block placement: copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol * (1.0 + self.max_abs()))
            })
    }
}

/// A matrix together with a logarithmic scale: represents `exp(log_scale) * mat`.
///
/// Long products and the reduction's scalar factors leave the range of
/// `f64`; carrying the magnitude separately keeps `mat` in a sane band.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledMatrix {
    pub log_scale: f64,
    pub mat: Matrix,
}

impl ScaledMatrix {
    pub fn new(log_scale: f64, mat: Matrix) -> Self {
        ScaledMatrix { log_scale, mat }
    }

    pub fn unscaled(mat: Matrix) -> Self {
        ScaledMatrix { log_scale: 0.0, mat }
    }

    /// Pulls the max-abs entry magnitude into the log scale. Zero stays zero with scale 0.
    pub fn normalized(mut self) -> Self {
        let s = self.mat.max_abs();
        if s > 0.0 && s.is_finite() {
            self.mat.scale_mut(1.0 / s);
            self.log_scale += s.ln();
        }
        self
    }

    pub fn mul(&self, rhs: &ScaledMatrix) -> ScaledMatrix {
        ScaledMatrix::new(self.log_scale + rhs.log_scale, self.mat.mul(&rhs.mat)).normalized()
    }

    pub fn is_zero(&self) -> bool {
        self.mat.is_zero()
    }

    /// `log ||exp(s) M||`, `-inf` for the zero matrix.
    pub fn log_norm(&self) -> f64 {
        let n = self.mat.norm();
        if n == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_scale + n.ln()
        }
    }

    /// Materializes the matrix; may overflow for extreme scales.
    pub fn to_matrix(&self) -> Matrix {
        self.mat.scaled(self.log_scale.exp())
    }
}

/// Max entrywise difference after bringing both sides to a common scale set by the
/// larger of the two max-abs entries. Zero when both sides vanish.
pub fn scaled_residual(lhs: &ScaledMatrix, rhs: &ScaledMatrix) -> f64 {
    assert_eq!((lhs.mat.rows(), lhs.mat.cols()), (rhs.mat.rows(), rhs.mat.cols()));
    let ml = lhs.mat.max_abs();
    let mr = rhs.mat.max_abs();
    let log_l = if ml > 0.0 { lhs.log_scale + ml.ln() } else { f64::NEG_INFINITY };
    let log_r = if mr > 0.0 { rhs.log_scale + mr.ln() } else { f64::NEG_INFINITY };
    let common = log_l.max(log_r);
    if common == f64::NEG_INFINITY {
        return 0.0;
    }
    let fl = (lhs.log_scale - common).exp();
    let fr = (rhs.log_scale - common).exp();
    lhs.mat
        .as_slice()
        .iter()
        .zip(rhs.mat.as_slice())
        .map(|(a, b)| (a * fl - b * fr).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Singular values
// ---------------------------------------------------------------------------

/// Thin singular value decomposition `g = u * diag(s) * v^T`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

/// One-sided Jacobi (Hestenes) SVD. Singular values are returned sorted
/// non-increasing; `u` is `rows x p`, `v` is `cols x p` with `p = min(rows, cols)`.
pub fn svd(g: &Matrix) -> Svd {
    if g.rows < g.cols {
        let t = svd(&g.transpose());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let (r, c) = (g.rows, g.cols);
    // columns stored contiguously
    let mut a: Vec<Vec<f64>> = (0..c).map(|j| (0..r).map(|i| g[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..c)
        .map(|j| (0..c).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let eps = f64::EPSILON;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let (alpha, beta, gamma) = {
                    let (ap, aq) = (&a[p], &a[q]);
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = 0.0;
                    for i in 0..r {
                        al += ap[i] * ap[i];
                        be += aq[i] * aq[i];
                        ga += ap[i] * aq[i];
                    }
                    (al, be, ga)
                };
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                let (lo, hi) = a.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = cs * xp - sn * yq;
                    *y = sn * xp + cs * yq;
                }
                let (lo, hi) = v.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = cs * xp - sn * yq;
                    *y = sn * xp + cs * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = a.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = Matrix::zeros(r, c);
    let mut vm = Matrix::zeros(c, c);
    let mut s = Vec::with_capacity(c);
    for (k, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        for i in 0..r {
            u[(i, k)] = if norms[j] > 0.0 { a[j][i] / norms[j] } else { 0.0 };
        }
        for i in 0..c {
            vm[(i, k)] = v[j][i];
        }
    }
    Svd { u, s, v: vm }
}

/// Singular values, non-increasing.
pub fn singular_values(g: &Matrix) -> Vec<f64> {
    if g.rows == 1 || g.cols == 1 {
        return vec![g.frobenius_norm()];
    }
    svd(g).s
}

/// Singular values together with the numerical rank at a relative tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularProfile {
    pub values: Vec<f64>,
    pub numerical_rank: usize,
    pub tolerance: f64,
}

pub fn singular_profile(g: &Matrix, tol: f64) -> Result<SingularProfile> {
    if !(tol > 0.0 && tol < 1.0) {
        return input(format!("rank tolerance must lie in (0, 1), got {tol}"));
    }
    if !g.is_finite() {
        return input("matrix has non-finite entries");
    }
    let values = singular_values(g);
    let numerical_rank = rank_from_values(&values, tol * values[0]);
    Ok(SingularProfile { values, numerical_rank, tolerance: tol })
}

/// `#{ j : s_j > threshold }`, zero when `s_1 = 0`.
pub fn rank_from_values(values: &[f64], threshold: f64) -> usize {
    if values.first().copied().unwrap_or(0.0) == 0.0 {
        return 0;
    }
    values.iter().filter(|&&s| s > threshold).count()
}

// ---------------------------------------------------------------------------
// LU, determinants, inverses
// ---------------------------------------------------------------------------

struct Lu {
    lu: Matrix,
    perm_sign: f64,
    piv: Vec<usize>,
    singular: bool,
}

fn lu(g: &Matrix) -> Lu {
    assert!(g.is_square());
    let n = g.rows;
    let mut lu = g.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut perm_sign = 1.0;
    let mut singular = false;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax == 0.0 {
            singular = true;
            continue;
        }
        if p != k {
            for j in 0..n {
                lu.data.swap(k * n + j, p * n + j);
            }
            piv.swap(k, p);
            perm_sign = -perm_sign;
        }
        let d = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / d;
            lu[(i, k)] = f;
            if f != 0.0 {
                for j in k + 1..n {
                    let t = lu[(k, j)];
                    lu[(i, j)] -= f * t;
                }
            }
        }
    }
    Lu { lu, perm_sign, piv, singular }
}

pub fn det(g: &Matrix) -> f64 {
    assert!(g.is_square(), "determinant of a non-square matrix");
    match g.rows {
        1 => g.data[0],
        2 => g.data[0] * g.data[3] - g.data[1] * g.data[2],
        _ => {
            let f = lu(g);
            if f.singular {
                return 0.0;
            }
            (0..g.rows).map(|i| f.lu[(i, i)]).product::<f64>() * f.perm_sign
        }
    }
}

/// `log |det g|` without overflow; `-inf` if singular.
pub fn log_abs_det(g: &Matrix) -> f64 {
    let f = lu(g);
    if f.singular {
        return f64::NEG_INFINITY;
    }
    (0..g.rows).map(|i| f.lu[(i, i)].abs().ln()).sum()
}

/// Inverse via partially pivoted LU.
pub fn inverse(g: &Matrix) -> Result<Matrix> {
    if !g.is_square() {
        return input("inverse of a non-square matrix");
    }
    let n = g.rows;
    let f = lu(g);
    if f.singular {
        return Err(Error::Singular { index: n, value: 0.0 });
    }
    let mut inv = Matrix::zeros(n, n);
    for col in 0..n {
        // solve L U x = P e_col
        let mut x: Vec<f64> = (0..n).map(|i| if f.piv[i] == col { 1.0 } else { 0.0 }).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= f.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= f.lu[(i, j)] * x[j];
            }
            x[i] /= f.lu[(i, i)];
        }
        for i in 0..n {
            inv[(i, col)] = x[i];
        }
    }
    Ok(inv)
}

/// Moore-Penrose pseudo-inverse of a full-row-rank `k x m` matrix,
/// `V^+ = V^T (V V^T)^{-1}`.
pub fn pseudo_inverse(v: &Matrix) -> Result<Matrix> {
    pseudo_inverse_tol(v, DEFAULT_RANK_TOL)
}

pub fn pseudo_inverse_tol(v: &Matrix, tol: f64) -> Result<Matrix> {
    if v.rows > v.cols {
        return input(format!(
            "pseudo_inverse expects a wide matrix (k <= m), got {}x{}",
            v.rows, v.cols
        ));
    }
    let prof = singular_profile(v, tol)?;
    if prof.numerical_rank < v.rows {
        let idx = prof.numerical_rank;
        return Err(Error::Singular { index: idx + 1, value: prof.values[idx] });
    }
    let vt = v.transpose();
    let gram = v.mul(&vt);
    Ok(vt.mul(&inverse(&gram)?))
}

/// Classical adjoint: the transpose of the cofactor matrix, so `g adj(g) = det(g) I`.
///
/// Cofactor expansion up to 4x4; above that the SVD identity
/// `adj(U S V^T) = det(U) det(V) V adj(S) U^T` is used, which stays exact in
/// structure for singular input as well.
pub fn adjugate(g: &Matrix) -> Result<Matrix> {
    if !g.is_square() {
        return input("adjugate of a non-square matrix");
    }
    let n = g.rows;
    if n > 8 {
        return input(format!("adjugate supports m <= 8, got {n}"));
    }
    if n == 1 {
        return Ok(Matrix::identity(1));
    }
    if n <= 4 {
        return Ok(Matrix::from_fn(n, n, |i, j| {
            // adj(g)_{ij} = (-1)^{i+j} M_{ji}
            let minor = minor_matrix(g, j, i);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * det_cofactor(&minor)
        }));
    }
    let d = svd(g);
    let sign = det(&d.u).signum() * det(&d.v).signum();
    let cof: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| d.s[j]).product())
        .collect();
    let mut vs = d.v.clone();
    for i in 0..n {
        for j in 0..n {
            vs[(i, j)] *= cof[j];
        }
    }
    Ok(vs.mul(&d.u.transpose()).scaled(sign))
}

fn minor_matrix(g: &Matrix, row: usize, col: usize) -> Matrix {
    let n = g.rows;
    let mut m = Matrix::zeros(n - 1, n - 1);
    let mut r = 0;
    for i in (0..n).filter(|&i| i != row) {
        let mut c = 0;
        for j in (0..n).filter(|&j| j != col) {
            m[(r, c)] = g[(i, j)];
            c += 1;
        }
        r += 1;
    }
    m
}

fn det_cofactor(g: &Matrix) -> f64 {
    match g.rows {
        1 => g.data[0],
        2 => g.data[0] * g.data[3] - g.data[1] * g.data[2],
        n => (0..n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                s * g[(0, j)] * det_cofactor(&minor_matrix(g, 0, j))
            })
            .sum(),
    }
}

// ---------------------------------------------------------------------------
// Exterior square
// ---------------------------------------------------------------------------

/// Index pairs `(i, j)`, `i < j`, in lexicographic order: the basis `e_i ^ e_j`.
pub fn wedge_basis(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect()
}

/// Second exterior power on the lexicographic basis `e_i ^ e_j`.
pub fn exterior_square(g: &Matrix) -> Result<Matrix> {
    if !g.is_square() {
        return input("exterior square of a non-square matrix");
    }
    if g.rows < 2 {
        return input("exterior square needs dimension at least 2");
    }
    let mut out = Matrix::zeros(0, 0);
    exterior_square_into(g, &mut out);
    Ok(out)
}

pub(crate) fn exterior_square_into(g: &Matrix, out: &mut Matrix) {
    let basis = wedge_basis(g.rows);
    out.reset(basis.len(), basis.len());
    for (r, &(i, j)) in basis.iter().enumerate() {
        for (c, &(k, l)) in basis.iter().enumerate() {
            out[(r, c)] = g[(i, k)] * g[(j, l)] - g[(i, l)] * g[(j, k)];
        }
    }
}

// ---------------------------------------------------------------------------
// Orthogonal-triangular factorization
// ---------------------------------------------------------------------------

/// Householder QR of a square matrix, in place: on return `a` holds `Q` and
/// `rdiag` the diagonal of `R` (sign-normalized so that `Q` has positive
/// orientation relative to `a`). Columns whose residual norm is below
/// `drop_tol * ||a||_F` are reported as exact zeros.
pub fn qr_in_place(a: &mut Matrix, rdiag: &mut [f64], work: &mut Vec<f64>, drop_tol: f64) {
    let n = a.rows;
    assert!(a.is_square() && rdiag.len() == n);
    let scale = a.frobenius_norm();
    // Householder vectors stored in `work` (n*n)
    work.clear();
    work.resize(n * n, 0.0);
    let mut r = a.clone();
    for k in 0..n {
        let mut norm2 = 0.0;
        for i in k..n {
            norm2 += r[(i, k)] * r[(i, k)];
        }
        let norm = norm2.sqrt();
        if norm <= drop_tol * scale || norm == 0.0 {
            rdiag[k] = 0.0;
            for i in k..n {
                r[(i, k)] = 0.0;
            }
            continue;
        }
        let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
        let v = &mut work[k * n..(k + 1) * n];
        for i in 0..n {
            v[i] = if i < k { 0.0 } else { r[(i, k)] };
        }
        v[k] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..n {
                let mut dot = 0.0;
                for i in k..n {
                    dot += v[i] * r[(i, j)];
                }
                let f = 2.0 * dot / vnorm2;
                for i in k..n {
                    r[(i, j)] -= f * v[i];
                }
            }
            for x in v.iter_mut() {
                *x /= vnorm2.sqrt();
            }
        }
        rdiag[k] = r[(k, k)];
    }
    // Q = H_0 H_1 ... H_{n-1} applied to identity
    let mut q = Matrix::identity(n);
    for k in (0..n).rev() {
        let v = &work[k * n..(k + 1) * n];
        if v.iter().all(|&x| x == 0.0) {
            continue;
        }
        for j in 0..n {
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i] * q[(i, j)];
            }
            for i in k..n {
                q[(i, j)] -= 2.0 * dot * v[i];
            }
        }
    }
    // flip signs so that the diagonal of R is non-negative
    for k in 0..n {
        if rdiag[k] < 0.0 {
            rdiag[k] = -rdiag[k];
            for i in 0..n {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    a.copy_from(&q);
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues and leading minors
// ---------------------------------------------------------------------------

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations, sorted ascending.
pub fn symmetric_eigenvalues(s: &Matrix) -> Vec<f64> {
    assert!(s.is_square());
    let n = s.rows;
    if n == 1 {
        return vec![s.data[0]];
    }
    if n == 2 {
        let (a, b, d) = (s[(0, 0)], 0.5 * (s[(0, 1)] + s[(1, 0)]), s[(1, 1)]);
        let mean = 0.5 * (a + d);
        let rad = (0.5 * (a - d)).hypot(b);
        // the smaller root through the product to avoid cancellation
        let hi = if mean >= 0.0 { mean + rad } else { mean - rad };
        let prod = a * d - b * b;
        let lo = if hi != 0.0 { prod / hi } else { 0.0 };
        let mut v = [hi, lo];
        v.sort_by(f64::total_cmp);
        return v.to_vec();
    }
    let mut a = s.clone();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= 1e-30 * a.frobenius_norm().powi(2) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Pivots `d_1, ..., d_k` of the unpivoted `L D L^T` factorization of a symmetric
/// matrix; the `i`-th leading principal minor is `d_1 * ... * d_i`. Stops at
/// the first non-positive pivot (the remaining entries are zero).
pub fn ldl_pivots(g: &Matrix) -> Vec<f64> {
    let n = g.rows;
    let mut l = Matrix::zeros(n, n);
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut dj = g[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * d[k];
        }
        d[j] = dj;
        if dj <= 0.0 {
            for v in d.iter_mut().skip(j) {
                *v = 0.0;
            }
            return d;
        }
        l[(j, j)] = 1.0;
        for i in j + 1..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = s / dj;
        }
    }
    d
}

// ---------------------------------------------------------------------------
// Summation
// ---------------------------------------------------------------------------

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn profile_of_diagonal() {
        let p = singular_profile(&Matrix::from_diag(&[3.0, 1.0]), DEFAULT_RANK_TOL).unwrap();
        assert!((p.values[0] - 3.0).abs() < 1e-15 && (p.values[1] - 1.0).abs() < 1e-15);
        assert_eq!(p.numerical_rank, 2);
    }

    #[test]
    fn profile_of_zero() {
        let p = singular_profile(&Matrix::zeros(2, 2), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(p.values, vec![0.0, 0.0]);
        assert_eq!(p.numerical_rank, 0);
    }

    #[test]
    fn profile_rejects_bad_tolerance() {
        assert!(singular_profile(&Matrix::identity(2), 0.0).is_err());
        assert!(singular_profile(&Matrix::identity(2), 1.0).is_err());
    }

    #[test]
    fn non_finite_entries_rejected() {
        assert!(Matrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn pseudo_inverse_of_orthonormal_rows_is_transpose() {
        let v = m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let w = pseudo_inverse(&v).unwrap();
        assert_eq!(w, v.transpose());
    }

    #[test]
    fn pseudo_inverse_scalar() {
        let w = pseudo_inverse(&m(&[&[2.0]])).unwrap();
        assert!((w[(0, 0)] - 0.5).abs() < 1e-16);
    }

    #[test]
    fn pseudo_inverse_rank_deficient_names_singular_value() {
        let v = m(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]]);
        match pseudo_inverse(&v) {
            Err(Error::Singular { index, value }) => {
                assert_eq!(index, 2);
                assert!(value < 1e-12);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn adjugate_identity_and_2x2() {
        assert_eq!(adjugate(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        let g = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(adjugate(&g).unwrap(), m(&[&[4.0, -2.0], &[-3.0, 1.0]]));
    }

    #[test]
    fn adjugate_of_singular_matrix() {
        // rank one: adj has rank one too and g adj(g) = 0
        let g = m(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[1.0, 1.0, 1.0]]);
        let a = adjugate(&g).unwrap();
        assert!(g.mul(&a).max_abs() < 1e-12);
    }

    #[test]
    fn adjugate_large_matches_det_inverse() {
        let g = Matrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 + if i == j { 4.0 } else { 0.0 });
        let a = adjugate(&g).unwrap();
        let expect = inverse(&g).unwrap().scaled(det(&g));
        assert!(a.sub(&expect).max_abs() <= 1e-10 * expect.max_abs());
    }

    #[test]
    fn exterior_square_small_cases() {
        let w = exterior_square(&Matrix::from_diag(&[3.0, 2.0])).unwrap();
        assert_eq!(w, m(&[&[6.0]]));
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let w = exterior_square(&m(&[&[c, -s], &[s, c]])).unwrap();
        assert!((w[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(exterior_square(&Matrix::identity(1)).is_err());
    }

    #[test]
    fn orthogonal_profile_all_ones() {
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let q = m(&[&[c, -s, 0.0], &[s, c, 0.0], &[0.0, 0.0, -1.0]]);
        let p = singular_profile(&q, DEFAULT_RANK_TOL).unwrap();
        for v in p.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_norm_matches_svd() {
        let g = m(&[&[1e-3, 5.0], &[-2.0, 7.0]]);
        let s = svd(&g).s[0];
        assert!((g.norm() - s).abs() < 1e-14 * s);
    }

    #[test]
    fn qr_reconstructs() {
        let a = m(&[&[2.0, 1.0, 0.5], &[-1.0, 3.0, 1.0], &[0.0, 1.0, 4.0]]);
        let mut q = a.clone();
        let mut d = vec![0.0; 3];
        let mut work = Vec::new();
        qr_in_place(&mut q, &mut d, &mut work, 0.0);
        // Q orthogonal
        let qtq = q.transpose().mul(&q);
        assert!(qtq.sub(&Matrix::identity(3)).max_abs() < 1e-14);
        // |det a| = prod diag R
        let prod: f64 = d.iter().product();
        assert!((prod - det(&a).abs()).abs() < 1e-12);
        // R = Q^T a is upper triangular with the reported diagonal
        let r = q.transpose().mul(&a);
        for i in 0..3 {
            assert!((r[(i, i)] - d[i]).abs() < 1e-12);
            for j in 0..i {
                assert!(r[(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qr_rank_deficient_reports_zero() {
        let a = Matrix::from_diag(&[2.0, 0.0]);
        let mut q = a.clone();
        let mut d = vec![0.0; 2];
        qr_in_place(&mut q, &mut d, &mut Vec::new(), 1e-13);
        assert_eq!(d[1], 0.0);
        assert_eq!(d[0], 2.0);
    }

    #[test]
    fn ldl_pivots_give_minors() {
        let g = m(&[&[4.0, 2.0, 0.0], &[2.0, 5.0, 1.0], &[0.0, 1.0, 3.0]]);
        let d = ldl_pivots(&g);
        assert!((d[0] - 4.0).abs() < 1e-14);
        assert!((d[0] * d[1] - 16.0).abs() < 1e-12);
        assert!((d.iter().product::<f64>() - det(&g)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_eigen_small() {
        let s = m(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 0.0], &[0.0, 0.0, -1.0]]);
        let ev = symmetric_eigenvalues(&s);
        assert!((ev[0] + 1.0).abs() < 1e-13 && (ev[1] - 1.0).abs() < 1e-13 && (ev[2] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn scaled_residual_handles_scales() {
        let a = ScaledMatrix::new(500.0, Matrix::identity(2));
        let b = ScaledMatrix::new(500.0 + 2f64.ln(), Matrix::identity(2).scaled(0.5));
        assert!(scaled_residual(&a, &b) < 1e-14);
        let z = ScaledMatrix::unscaled(Matrix::zeros(2, 2));
        assert_eq!(scaled_residual(&z, &z), 0.0);
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let v = vec![0.1; 100_000];
        assert!((pairwise_sum(&v) - 10_000.0).abs() < 1e-9);
    }
}
