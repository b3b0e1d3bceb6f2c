//! Dense matrix primitives and matrix functions on the special orthogonal group.
//!
//! Every function here works in the real canonical form of an orthogonal
//! matrix. For `B ∈ SO(n)` the symmetric part `S = (B + Bᵀ)/2` and the skew
//! part `A = (B − Bᵀ)/2` commute, and on each invariant rotation plane they act
//! as `cos φ · I₂` and `sin φ · J`. Any function `f` of the rotation angles can
//! therefore be written as
//!
//! ```text
//! f(B) = even(S) + A · odd(S)
//! ```
//!
//! where `even` and `odd` are scalar functions of `cos φ` applied through the
//! symmetric eigendecomposition of `S`. Logarithm, fractional power and the
//! geodesic all reduce to one symmetric eigensolve, with no complex arithmetic,
//! and the outputs are skew-symmetric or orthogonal by construction.
//!
//! The exponential of a skew generator `K` uses the same idea with
//! `KᵀK = −K²`, whose eigenvalues are the squared angles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense real matrix. Row-major is the semantic order of every file format;
/// the in-memory layout is nalgebra's column-major storage.
pub type Matrix = DMatrix<f64>;

/// Default distance (radians) an eigenphase must keep from ±π.
pub const DEFAULT_GUARD: f64 = 1e-6;
/// Default bound on `‖BᵀB − I‖_F` when validating orthogonal blocks.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Default bound on `|det B − 1|`.
pub const DETERMINANT_TOL: f64 = 1e-8;

/// Plane rotation `R(θ) = [[cos θ, −sin θ], [sin θ, cos θ]]`.
pub fn rotation(theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    Matrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// The 2×2 generator `J = [[0, −1], [1, 0]]`.
pub fn unit_generator() -> Matrix {
    Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// `‖MᵀM − I‖_F`.
pub fn orthogonality_residual(m: &Matrix) -> f64 {
    let n = m.ncols();
    (m.transpose() * m - Matrix::identity(n, n)).norm()
}

/// Block-diagonal matrix with the given square blocks.
pub fn block_diagonal<'a>(blocks: impl IntoIterator<Item = &'a Matrix>) -> Matrix {
    let blocks: Vec<&Matrix> = blocks.into_iter().collect();
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(n, n);
    let mut offset = 0;
    for b in blocks {
        let d = b.nrows();
        out.view_mut((offset, offset), (d, d)).copy_from(b);
        offset += d;
    }
    out
}

fn require_square(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// A skew-symmetric generator `K` (`Kᵀ = −K` exactly, zero diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct SkewGenerator(Matrix);

impl SkewGenerator {
    pub fn zeros(dim: usize) -> Self {
        SkewGenerator(Matrix::zeros(dim, dim))
    }

    /// Accepts `m` only if it is exactly skew-symmetric as stored.
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        let n = require_square(&m)?;
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(Error::NotSkew);
            }
            for j in (i + 1)..n {
                if m[(j, i)] != -m[(i, j)] {
                    return Err(Error::NotSkew);
                }
            }
        }
        Ok(SkewGenerator(m))
    }

    /// Builds a generator from its strictly-upper entries in row-major order.
    pub fn from_upper(dim: usize, upper: &[f64]) -> Result<Self> {
        let expected = dim * dim.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "strictly upper entries",
                expected,
                found: upper.len(),
            });
        }
        let mut m = Matrix::zeros(dim, dim);
        let mut it = upper.iter();
        for i in 0..dim {
            for j in (i + 1)..dim {
                let v = *it.next().expect("length checked");
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        Ok(SkewGenerator(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> SkewGenerator {
        SkewGenerator(&self.0 * s)
    }

    pub fn neg(&self) -> SkewGenerator {
        SkewGenerator(-&self.0)
    }

    /// `(1 − t)·self + t·other`. Exactly skew since negation commutes with rounding.
    pub fn lerp(&self, other: &SkewGenerator, t: f64) -> SkewGenerator {
        SkewGenerator(&self.0 * (1.0 - t) + &other.0 * t)
    }

    pub fn norm_spectral(&self) -> f64 {
        spectral_norm(&self.0)
    }
}

/// A block of `SO(dim)`. Constructors either validate or say they don't.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalBlock(Matrix);

impl OrthogonalBlock {
    pub fn identity(dim: usize) -> Self {
        OrthogonalBlock(Matrix::identity(dim, dim))
    }

    /// Validates orthogonality and `det = +1` at the default tolerances.
    pub fn new(m: Matrix) -> Result<Self> {
        Self::with_tolerance(m, ORTHOGONALITY_TOL, DETERMINANT_TOL)
    }

    pub fn with_tolerance(m: Matrix, ortho_tol: f64, det_tol: f64) -> Result<Self> {
        require_square(&m)?;
        let residual = orthogonality_residual(&m);
        if !(residual <= ortho_tol) {
            return Err(Error::NotOrthogonal {
                residual,
                tolerance: ortho_tol,
            });
        }
        let det = m.determinant();
        if !((det - 1.0).abs() <= det_tol) {
            return Err(Error::NotOrthogonal {
                residual: (det - 1.0).abs(),
                tolerance: det_tol,
            });
        }
        Ok(OrthogonalBlock(m))
    }

    /// Wraps `m` without any check. Used for file input (validation is a
    /// separate step) and for outputs that are orthogonal by construction.
    pub fn from_matrix_unchecked(m: Matrix) -> Self {
        OrthogonalBlock(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn transpose(&self) -> OrthogonalBlock {
        OrthogonalBlock(self.0.transpose())
    }

    pub fn compose(&self, other: &OrthogonalBlock) -> OrthogonalBlock {
        OrthogonalBlock(&self.0 * &other.0)
    }

    pub fn orthogonality_residual(&self) -> f64 {
        orthogonality_residual(&self.0)
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// `‖B − I‖₂`, the smallness parameter ε of this block.
    pub fn distance_to_identity(&self) -> f64 {
        let n = self.dim();
        spectral_norm(&(&self.0 - Matrix::identity(n, n)))
    }
}

/// Eigenphases of an orthogonal block, conjugate pairs as `±φ`, sorted by
/// decreasing `|φ|` with the positive member first.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpectrum(Vec<f64>);

impl PhaseSpectrum {
    pub fn phases(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean_abs(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().map(|p| p.abs()).sum::<f64>() / self.0.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |a, p| a.max(p.abs()))
    }
}

/// Cayley transform `(I − K)⁻¹(I + K)`.
pub fn cayley(k: &SkewGenerator) -> Result<OrthogonalBlock> {
    let n = k.dim();
    let id = Matrix::identity(n, n);
    let lhs = &id - k.matrix();
    let rhs = &id + k.matrix();
    match lhs.lu().solve(&rhs) {
        Some(b) if b.iter().all(|v| v.is_finite()) => Ok(OrthogonalBlock(b)),
        _ => Err(Error::SolveFailed {
            context: "cayley",
            detail: format!(
                "I - K singular or non-finite (|K|_F = {:e}, dim = {n})",
                k.matrix().norm()
            ),
        }),
    }
}

/// `(M − Mᵀ)/2`, stored exactly skew.
pub fn skew_part(m: &Matrix) -> Result<SkewGenerator> {
    let n = require_square(m)?;
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (m[(i, j)] - m[(j, i)]) / 2.0;
            out[(i, j)] = v;
            out[(j, i)] = -v;
        }
    }
    Ok(SkewGenerator(out))
}

/// Inverse Cayley map `K = (B − I)(B + I)⁻¹`, guarded against eigenvalues near −1.
pub fn inverse_cayley(b: &OrthogonalBlock) -> Result<SkewGenerator> {
    inverse_cayley_guarded(b, DEFAULT_GUARD)
}

pub fn inverse_cayley_guarded(b: &OrthogonalBlock, guard: f64) -> Result<SkewGenerator> {
    let n = b.dim();
    let id = Matrix::identity(n, n);
    // (B − I) and (B + I)⁻¹ commute, so a left solve gives the same product.
    let k = (b.matrix() + &id)
        .lu()
        .solve(&(b.matrix() - &id))
        .ok_or_else(|| Error::SolveFailed {
            context: "inverse_cayley",
            detail: "B + I singular".into(),
        })?;
    // Eigenvalues of K are ±i·tan(φ/2). ‖K‖_F bounds the largest one, so the
    // eigendecomposition is only needed when the bound reaches the guard.
    if !(k.norm() < (0.5 * (PI - guard)).tan()) {
        CanonicalForm::new(b.matrix()).check_guard(guard)?;
    }
    skew_part(&k)
}

/// Principal logarithm of `B ∈ SO(n)`.
pub fn so_log(b: &OrthogonalBlock) -> Result<SkewGenerator> {
    so_log_guarded(b, DEFAULT_GUARD)
}

pub fn so_log_guarded(b: &OrthogonalBlock, guard: f64) -> Result<SkewGenerator> {
    let form = CanonicalForm::new(b.matrix());
    form.check_guard(guard)?;
    let m = form.apply(|_| 0.0, phase_over_sin);
    skew_part(&m)
}

/// Exponential of a skew generator.
pub fn so_exp(k: &SkewGenerator) -> OrthogonalBlock {
    let km = k.matrix();
    if km.iter().all(|v| *v == 0.0) {
        return OrthogonalBlock::identity(k.dim());
    }
    let gram = km.transpose() * km;
    let eig = SymmetricEigen::new(gram);
    let angles: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let even = spectral_apply(&eig.eigenvectors, &angles, f64::cos);
    let odd = spectral_apply(&eig.eigenvectors, &angles, sinc);
    OrthogonalBlock(even + km * odd)
}

/// `exp(s · log B)`. Errors if any scaled phase would leave `(−π, π)`.
pub fn so_power(b: &OrthogonalBlock, s: f64) -> Result<OrthogonalBlock> {
    so_power_guarded(b, s, DEFAULT_GUARD)
}

pub fn so_power_guarded(b: &OrthogonalBlock, s: f64, guard: f64) -> Result<OrthogonalBlock> {
    let form = CanonicalForm::new(b.matrix());
    form.check_guard(guard)?;
    if s == 1.0 {
        return Ok(b.clone());
    }
    if s == 0.0 {
        return Ok(OrthogonalBlock::identity(b.dim()));
    }
    form.power(s, guard)
}

/// Eigenphases of an orthogonal block.
pub fn phase_spectrum(b: &OrthogonalBlock) -> Result<PhaseSpectrum> {
    phase_spectrum_with_tolerance(b, ORTHOGONALITY_TOL)
}

pub fn phase_spectrum_with_tolerance(b: &OrthogonalBlock, ortho_tol: f64) -> Result<PhaseSpectrum> {
    require_square(b.matrix())?;
    let residual = b.orthogonality_residual();
    if !(residual <= ortho_tol) {
        return Err(Error::NotOrthogonal {
            residual,
            tolerance: ortho_tol,
        });
    }
    let n = b.dim();
    let form = CanonicalForm::new(b.matrix());
    // Singular values of the logarithm give |φ| to absolute accuracy ~1e-16;
    // arccos of the symmetric part is the fallback when the log is undefined.
    let mut mags: Vec<f64> = match form.check_guard(DEFAULT_GUARD) {
        Ok(()) => {
            let log = form.apply(|_| 0.0, phase_over_sin);
            log.singular_values().iter().copied().collect()
        }
        Err(_) => form.cosines.iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect(),
    };
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut phases = Vec::with_capacity(n);
    let mut i = 0;
    while i + 1 < n {
        let phi = 0.5 * (mags[i] + mags[i + 1]);
        phases.push(phi);
        phases.push(if phi == 0.0 { 0.0 } else { -phi });
        i += 2;
    }
    if n % 2 == 1 {
        // Odd dimension: the unpaired eigenvalue is +1.
        phases.push(0.0);
    }
    Ok(PhaseSpectrum(phases))
}

/// Largest eigenphase magnitude of an orthogonal block.
pub fn max_phase(b: &OrthogonalBlock) -> f64 {
    CanonicalForm::new(b.matrix()).max_phase()
}

/// Polar projection onto the orthogonal matrices, `M (MᵀM)^{-1/2}`.
///
/// Never applied implicitly; callers opt in to repairing a drifted block.
pub fn reorthogonalize(m: &Matrix) -> Result<OrthogonalBlock> {
    require_square(m)?;
    let eig = SymmetricEigen::new(m.transpose() * m);
    if eig.eigenvalues.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::SolveFailed {
            context: "reorthogonalize",
            detail: "matrix is singular".into(),
        });
    }
    let inv_sqrt: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()).collect();
    let correction = spectral_apply(&eig.eigenvectors, &inv_sqrt, |x| x);
    Ok(OrthogonalBlock(m * correction))
}

/// Real canonical form data of an orthogonal matrix: skew part plus the
/// eigendecomposition of the symmetric part.
pub(crate) struct CanonicalForm {
    skew: Matrix,
    basis: Matrix,
    cosines: DVector<f64>,
}

impl CanonicalForm {
    pub(crate) fn new(b: &Matrix) -> Self {
        let sym = (b + b.transpose()) * 0.5;
        let skew = (b - b.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        CanonicalForm {
            skew,
            basis: eig.eigenvectors,
            cosines: eig.eigenvalues,
        }
    }

    pub(crate) fn max_phase(&self) -> f64 {
        let min_cos = self.cosines.iter().copied().fold(1.0_f64, f64::min);
        min_cos.clamp(-1.0, 1.0).acos()
    }

    pub(crate) fn check_guard(&self, guard: f64) -> Result<()> {
        let phase = self.max_phase();
        if PI - phase <= guard {
            return Err(Error::EigenvalueNearMinusOne { phase, guard });
        }
        Ok(())
    }

    /// `even(S) + A·odd(S)` with both functions expressed in the angle φ.
    pub(crate) fn apply(&self, even: impl Fn(f64) -> f64, odd: impl Fn(f64) -> f64) -> Matrix {
        let angles: Vec<f64> = self
            .cosines
            .iter()
            .map(|c| c.clamp(-1.0, 1.0).acos())
            .collect();
        let e = spectral_apply(&self.basis, &angles, even);
        let o = spectral_apply(&self.basis, &angles, odd);
        e + &self.skew * o
    }

    pub(crate) fn power(&self, s: f64, guard: f64) -> Result<OrthogonalBlock> {
        let scaled = s.abs() * self.max_phase();
        if scaled >= PI - guard {
            return Err(Error::PhaseOverflow { scaled, guard });
        }
        let m = self.apply(
            |phi| (s * phi).cos(),
            |phi| {
                if phi < 1e-8 {
                    s * (1.0 - (s * s - 1.0) * phi * phi / 6.0)
                } else {
                    (s * phi).sin() / phi.sin()
                }
            },
        );
        Ok(OrthogonalBlock(m))
    }
}

/// `V · diag(f(x)) · Vᵀ`.
fn spectral_apply(basis: &Matrix, xs: &[f64], f: impl Fn(f64) -> f64) -> Matrix {
    let mut scaled = basis.clone();
    for (j, x) in xs.iter().enumerate() {
        let fx = f(*x);
        scaled.column_mut(j).scale_mut(fx);
    }
    scaled * basis.transpose()
}

fn phase_over_sin(phi: f64) -> f64 {
    if phi < 1e-8 {
        1.0 + phi * phi / 6.0
    } else {
        phi / phi.sin()
    }
}

fn sinc(theta: f64) -> f64 {
    if theta < 1e-8 {
        1.0 - theta * theta / 6.0
    } else {
        theta.sin() / theta
    }
}
