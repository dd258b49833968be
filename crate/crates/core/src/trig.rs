//! Real trigonometric polynomials on the torus, scalar and matrix valued.
//!
//! A term with multi-index `k` contributes `a cos(2 pi k.x) + b sin(2 pi k.x)`.

use std::f64::consts::TAU;

use crate::error::{input, Result};
use crate::linalg::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct TrigTerm {
    pub k: Vec<i32>,
    pub cos: f64,
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    dim: usize,
    terms: Vec<TrigTerm>,
}

#[inline]
fn phase(k: &[i32], x: &[f64]) -> f64 {
    // k.x reduced mod 1 before scaling keeps the argument of cos/sin small
    let s: f64 = k.iter().zip(x).map(|(&ki, &xi)| ki as f64 * xi).sum();
    TAU * (s - s.floor())
}

impl TrigPoly {
    pub fn new(dim: usize, terms: Vec<TrigTerm>) -> Result<Self> {
        if dim == 0 {
            return input("trig polynomial needs torus dimension >= 1");
        }
        for t in &terms {
            if t.k.len() != dim {
                return input(format!("multi-index {:?} does not have length {dim}", t.k));
            }
            if !t.cos.is_finite() || !t.sin.is_finite() {
                return input("non-finite trig coefficient");
            }
        }
        Ok(TrigPoly { dim, terms })
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        TrigPoly { dim, terms: vec![TrigTerm { k: vec![0; dim], cos: c, sin: 0.0 }] }
    }

    /// `cos(2 pi x_1)` on the d-torus.
    pub fn cos1(dim: usize) -> Self {
        let mut k = vec![0; dim];
        k[0] = 1;
        TrigPoly { dim, terms: vec![TrigTerm { k, cos: 1.0, sin: 0.0 }] }
    }

    /// `sin(2 pi x_1)` on the d-torus.
    pub fn sin1(dim: usize) -> Self {
        let mut k = vec![0; dim];
        k[0] = 1;
        TrigPoly { dim, terms: vec![TrigTerm { k, cos: 0.0, sin: 1.0 }] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.terms.push(TrigTerm { k: vec![0; self.dim], cos: c, sin: 0.0 });
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.cos *= s;
            t.sin *= s;
        }
        self
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for t in &self.terms {
            if t.k.iter().all(|&k| k == 0) {
                v += t.cos;
                continue;
            }
            let th = phase(&t.k, x);
            if t.sin == 0.0 {
                v += t.cos * th.cos();
            } else if t.cos == 0.0 {
                v += t.sin * th.sin();
            } else {
                let (s, c) = th.sin_cos();
                v += t.cos * c + t.sin * s;
            }
        }
        v
    }

    /// True when every non-zero frequency carries zero coefficients.
    pub fn is_constant(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.k.iter().all(|&k| k == 0) || (t.cos == 0.0 && t.sin == 0.0))
    }

    /// Upper bound `sum |a| + |b|` for the sup norm.
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.cos.abs() + t.sin.abs()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTrigTerm {
    pub k: Vec<i32>,
    pub cos: Matrix,
    pub sin: Matrix,
}

/// Matrix-valued trigonometric polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTrigPoly {
    dim: usize,
    rows: usize,
    cols: usize,
    terms: Vec<MatrixTrigTerm>,
}

impl MatrixTrigPoly {
    pub fn new(dim: usize, rows: usize, cols: usize, terms: Vec<MatrixTrigTerm>) -> Result<Self> {
        if dim == 0 || rows == 0 || cols == 0 {
            return input("matrix trig polynomial needs positive dimensions");
        }
        for t in &terms {
            if t.k.len() != dim {
                return input(format!("multi-index {:?} does not have length {dim}", t.k));
            }
            for m in [&t.cos, &t.sin] {
                if (m.rows(), m.cols()) != (rows, cols) {
                    return input(format!(
                        "coefficient is {}x{}, expected {rows}x{cols}",
                        m.rows(),
                        m.cols()
                    ));
                }
                if !m.is_finite() {
                    return input("non-finite matrix coefficient");
                }
            }
        }
        Ok(MatrixTrigPoly { dim, rows, cols, terms })
    }

    pub fn constant(dim: usize, c: Matrix) -> Self {
        let (rows, cols) = (c.rows(), c.cols());
        MatrixTrigPoly {
            dim,
            rows,
            cols,
            terms: vec![MatrixTrigTerm { k: vec![0; dim], sin: Matrix::zeros(rows, cols), cos: c }],
        }
    }

    /// Diagonal matrix whose entries are the given scalar polynomials.
    pub fn diagonal(entries: &[TrigPoly]) -> Result<Self> {
        let l = entries.len();
        let dim = entries.first().map_or(1, TrigPoly::dim);
        let mut terms = Vec::new();
        for (i, p) in entries.iter().enumerate() {
            if p.dim() != dim {
                return input("diagonal entries live on tori of different dimension");
            }
            for t in p.terms() {
                let mut c = Matrix::zeros(l, l);
                let mut s = Matrix::zeros(l, l);
                c[(i, i)] = t.cos;
                s[(i, i)] = t.sin;
                terms.push(MatrixTrigTerm { k: t.k.clone(), cos: c, sin: s });
            }
        }
        Self::new(dim, l, l, terms)
    }

    /// Scalar polynomial times a constant matrix.
    pub fn scalar_times(p: &TrigPoly, c: &Matrix) -> Self {
        MatrixTrigPoly {
            dim: p.dim(),
            rows: c.rows(),
            cols: c.cols(),
            terms: p
                .terms()
                .iter()
                .map(|t| MatrixTrigTerm { k: t.k.clone(), cos: c.scaled(t.cos), sin: c.scaled(t.sin) })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn terms(&self) -> &[MatrixTrigTerm] {
        &self.terms
    }

    pub fn eval_into(&self, x: &[f64], out: &mut Matrix) {
        out.reset(self.rows, self.cols);
        for t in &self.terms {
            if t.k.iter().all(|&k| k == 0) {
                out.axpy(1.0, &t.cos);
                continue;
            }
            let (s, c) = phase(&t.k, x).sin_cos();
            out.axpy(c, &t.cos);
            out.axpy(s, &t.sin);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        self.eval_into(x, &mut out);
        out
    }

    /// Upper bound on `sup_x ||A(x)||` from the coefficient norms.
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.cos.norm() + t.sin.norm()).sum()
    }

    /// Coefficient-wise check that every evaluation is symmetric.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && self.terms.iter().all(|t| t.cos.is_symmetric(tol) && t.sin.is_symmetric(tol))
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.cos.scale_mut(s);
            t.sin.scale_mut(s);
        }
        self
    }
}
