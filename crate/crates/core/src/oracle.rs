//! Small dense reference computations.
//!
//! Everything here goes through the complex Schur decomposition, truncated
//! Taylor sums or the SVD, never through the real canonical form used by the
//! production matrix functions, so the two can be compared against each other.
//! Inputs are capped by an [`OracleBudget`].

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, Schur, SVD};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SkewGenerator, DEFAULT_GUARD};
use crate::structure::{assemble_dense, GsAdapter};

type CMatrix = DMatrix<Complex<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_n: usize,
    pub max_terms: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_n: 16, max_terms: 30 }
    }
}

impl OracleBudget {
    fn check_dim(&self, what: &'static str, n: usize) -> Result<()> {
        if n > self.max_n {
            return Err(Error::OracleBudget {
                what,
                value: n,
                max: self.max_n,
            });
        }
        Ok(())
    }

    fn check_terms(&self, terms: usize) -> Result<()> {
        if terms > self.max_terms {
            return Err(Error::OracleBudget {
                what: "series terms",
                value: terms,
                max: self.max_terms,
            });
        }
        Ok(())
    }

    /// Dense `A_C · exp(−t · log(A_Sᵀ A_C))` on the assembled adapters.
    pub fn ambient_geodesic(&self, c: &GsAdapter, s: &GsAdapter, t: f64) -> Result<Matrix> {
        c.check_compatible(s)?;
        self.check_dim("ambient geodesic dimension", c.n())?;
        let a_c = assemble_dense(c)?;
        let a_s = assemble_dense(s)?;
        self.dense_geodesic(&a_c, &a_s, t)
    }

    /// Geodesic between two dense orthogonal matrices.
    pub fn dense_geodesic(&self, a_c: &Matrix, a_s: &Matrix, t: f64) -> Result<Matrix> {
        self.check_dim("dense geodesic dimension", a_c.nrows())?;
        let relative = a_s.transpose() * a_c;
        let log = self.complex_log(&relative, DEFAULT_GUARD)?;
        Ok(a_c * self.normal_exp(&(log * -t))?)
    }

    /// Principal logarithm of an orthogonal matrix via its complex Schur form.
    pub fn complex_log(&self, m: &Matrix, guard: f64) -> Result<Matrix> {
        self.check_dim("log dimension", m.nrows())?;
        let (q, lambdas) = normal_schur(m);
        let mut logs = Vec::with_capacity(lambdas.len());
        for l in &lambdas {
            let phase = l.arg();
            if PI - phase.abs() <= guard {
                return Err(Error::EigenvalueNearMinusOne { phase, guard });
            }
            logs.push(Complex::new(l.norm().ln(), phase));
        }
        Ok(reassemble(&q, &logs))
    }

    /// `exp` of a normal real matrix (skew-symmetric in practice).
    pub fn normal_exp(&self, k: &Matrix) -> Result<Matrix> {
        self.check_dim("exp dimension", k.nrows())?;
        let (q, lambdas) = normal_schur(k);
        let exps: Vec<Complex<f64>> = lambdas.iter().map(|l| l.exp()).collect();
        Ok(reassemble(&q, &exps))
    }

    /// Eigenphases (radians, ascending) from the complex Schur diagonal.
    pub fn complex_phases(&self, m: &Matrix) -> Result<Vec<f64>> {
        self.check_dim("phase dimension", m.nrows())?;
        let (_, lambdas) = normal_schur(m);
        let mut phases: Vec<f64> = lambdas.iter().map(|l| l.arg()).collect();
        phases.sort_by(f64::total_cmp);
        Ok(phases)
    }

    /// `Σ_{i>r} σᵢ(T)²`, the best rank-`r` residual.
    pub fn svd_optimum(&self, target: &Matrix, r: usize) -> Result<f64> {
        self.check_dim("svd rows", target.nrows())?;
        self.check_dim("svd cols", target.ncols())?;
        if r > target.nrows().min(target.ncols()) {
            return Err(Error::InvalidArgument(format!("rank {r} exceeds min(n, m)")));
        }
        let mut sv: Vec<f64> = SVD::new(target.clone(), false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        Ok(sv.iter().skip(r).map(|s| s * s).sum())
    }

    /// Truncated Taylor sum `Σ_{j<terms} K^j / j!`.
    pub fn series_exp(&self, k: &SkewGenerator, terms: usize) -> Result<Matrix> {
        self.check_terms(terms)?;
        self.check_dim("series dimension", k.dim())?;
        let norm = SVD::new(k.matrix().clone(), false, false).singular_values.max();
        if norm > 1.0 {
            return Err(Error::InvalidArgument(format!("series oracle needs ‖K‖₂ ≤ 1, got {norm}")));
        }
        let n = k.dim();
        let mut sum = Matrix::zeros(n, n);
        let mut term = Matrix::identity(n, n);
        for j in 0..terms {
            sum += &term;
            term = &term * k.matrix() / (j + 1) as f64;
        }
        Ok(sum)
    }
}

pub fn ambient_geodesic(c: &GsAdapter, s: &GsAdapter, t: f64) -> Result<Matrix> {
    OracleBudget::default().ambient_geodesic(c, s, t)
}

pub fn svd_optimum(target: &Matrix, r: usize) -> Result<f64> {
    OracleBudget::default().svd_optimum(target, r)
}

pub fn series_exp(k: &SkewGenerator, terms: usize) -> Result<Matrix> {
    OracleBudget::default().series_exp(k, terms)
}

/// Unitary `Q` and the diagonal of the complex Schur form. For normal input
/// the triangular factor is diagonal up to rounding.
fn normal_schur(m: &Matrix) -> (CMatrix, Vec<Complex<f64>>) {
    let cm: CMatrix = m.map(|x| Complex::new(x, 0.0));
    let (q, t) = Schur::new(cm).unpack();
    let diag = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    (q, diag)
}

fn reassemble(q: &CMatrix, values: &[Complex<f64>]) -> Matrix {
    let n = q.nrows();
    let mut scaled = q.clone();
    for (j, v) in values.iter().enumerate() {
        for i in 0..n {
            scaled[(i, j)] *= v;
        }
    }
    (scaled * q.adjoint()).map(|z| z.re)
}
