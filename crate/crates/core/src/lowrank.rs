//! Fixed-rank merging baseline for additive low-rank adapters.
//!
//! Minimizes `t‖X − X_S‖²_F + (1 − t)‖X − X_C‖²_F` over rank-`r` matrices
//! `X = U Vᵀ` by alternating least squares. Up to a constant the objective is
//! `‖X − T‖²_F` with target `T = (1 − t)·X_C + t·X_S`, so each half-step is a
//! projection of `T` onto the current column (or row) space.

use nalgebra::{ColPivQR, QR};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `X = U Vᵀ` with `U: n×r`, `V: m×r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactors {
    u: Matrix,
    v: Matrix,
}

impl LowRankFactors {
    pub fn new(u: Matrix, v: Matrix) -> Result<Self> {
        let r = u.ncols();
        if r == 0 {
            return Err(Error::InvalidArgument("rank must be >= 1".into()));
        }
        if v.ncols() != r {
            return Err(Error::DimensionMismatch {
                what: "V columns (rank)",
                expected: r,
                found: v.ncols(),
            });
        }
        if r > u.nrows().min(v.nrows()) {
            return Err(Error::InvalidArgument(format!(
                "rank {r} exceeds min(n, m) = {}",
                u.nrows().min(v.nrows())
            )));
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("factors must be finite".into()));
        }
        Ok(LowRankFactors { u, v })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn m(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn dense(&self) -> Matrix {
        &self.u * self.v.transpose()
    }

    fn same_shape(&self, other: &LowRankFactors) -> Result<()> {
        if self.n() != other.n() || self.m() != other.m() {
            return Err(Error::StructureMismatch(format!(
                "low-rank shapes differ: {}x{} vs {}x{}",
                self.n(),
                self.m(),
                other.n(),
                other.m()
            )));
        }
        Ok(())
    }
}

/// `t‖X − X_S‖²_F + (1 − t)‖X − X_C‖²_F`.
pub fn als_objective(x: &LowRankFactors, x_c: &LowRankFactors, x_s: &LowRankFactors, t: f64) -> Result<f64> {
    x.same_shape(x_c)?;
    x.same_shape(x_s)?;
    let xd = x.dense();
    Ok(t * (&xd - x_s.dense()).norm_squared() + (1.0 - t) * (&xd - x_c.dense()).norm_squared())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlsInit {
    /// Start from the first adapter's `U` (the concept factors for a pair).
    Warm,
    /// Random Gaussian `U` from a seeded ChaCha20 stream.
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsOptions {
    pub max_iters: usize,
    /// Stop when the relative objective decrease falls below this.
    pub tol: f64,
    pub init: AlsInit,
    /// Allowed absolute increase of the objective between iterations.
    pub slack: f64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        AlsOptions {
            max_iters: 200,
            tol: 1e-10,
            init: AlsInit::Warm,
            slack: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlsTrace {
    /// Objective after each full V-step + U-step iteration (index 0 is the start).
    pub objectives: Vec<f64>,
    pub converged: bool,
    pub factors: LowRankFactors,
    /// Number of QR factorizations that fell back to column pivoting.
    pub rank_deficient_steps: usize,
}

impl AlsTrace {
    pub fn final_objective(&self) -> f64 {
        *self.objectives.last().expect("trace always holds the initial objective")
    }

    pub fn iterations(&self) -> usize {
        self.objectives.len() - 1
    }
}

/// ALS merge of two rank-`r` adapters at fusion parameter `t`.
pub fn als_merge(x_c: &LowRankFactors, x_s: &LowRankFactors, t: f64, opts: &AlsOptions) -> Result<AlsTrace> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t must lie in [0, 1], got {t}")));
    }
    multi_als_merge(&[(x_c.clone(), 1.0 - t), (x_s.clone(), t)], opts)
}

/// ALS merge of any number of adapters with non-negative weights summing to 1.
pub fn multi_als_merge(adapters: &[(LowRankFactors, f64)], opts: &AlsOptions) -> Result<AlsTrace> {
    let (first, _) = adapters
        .first()
        .ok_or_else(|| Error::InvalidArgument("no adapters to merge".into()))?;
    if opts.max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
    }
    let r = first.rank();
    for (x, w) in adapters {
        first.same_shape(x)?;
        if x.rank() != r {
            return Err(Error::StructureMismatch(format!("ranks differ: {r} vs {}", x.rank())));
        }
        if !(*w >= 0.0) {
            return Err(Error::InvalidArgument(format!("weights must be non-negative, got {w}")));
        }
    }
    let total: f64 = adapters.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("weights must sum to 1, got {total}")));
    }

    let denses: Vec<(Matrix, f64)> = adapters.iter().map(|(x, w)| (x.dense(), *w)).collect();
    let mut target = Matrix::zeros(first.n(), first.m());
    for (d, w) in &denses {
        target += d * *w;
    }
    let objective = |x: &Matrix| -> f64 { denses.iter().map(|(d, w)| w * (x - d).norm_squared()).sum() };

    let mut u = match opts.init {
        AlsInit::Warm => first.u.clone(),
        AlsInit::Random(seed) => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            Matrix::from_fn(first.n(), r, |_, _| StandardNormal.sample(&mut rng))
        }
    };
    let mut v = first.v.clone();
    let mut deficient = 0;
    let mut objectives = vec![objective(&(&u * v.transpose()))];
    let mut converged = false;

    for iteration in 1..=opts.max_iters {
        // V-step: X = Q_U V̂ᵀ with V̂ = Tᵀ Q_U.
        let q_u = orthonormal_basis(&u, &mut deficient);
        let v_hat = target.transpose() * &q_u;
        // U-step: X = Û Q_Vᵀ with Û = T Q_V.
        let q_v = orthonormal_basis(&v_hat, &mut deficient);
        u = &target * &q_v;
        v = q_v;

        let current = objective(&(&u * v.transpose()));
        let previous = *objectives.last().unwrap();
        if current > previous + opts.slack {
            return Err(Error::ObjectiveIncreased {
                iteration,
                previous,
                current,
            });
        }
        objectives.push(current);
        let decrease = previous - current;
        if current <= f64::MIN_POSITIVE || decrease <= opts.tol * previous {
            converged = true;
            break;
        }
    }

    Ok(AlsTrace {
        objectives,
        converged,
        factors: LowRankFactors { u, v },
        rank_deficient_steps: deficient,
    })
}

/// Thin orthonormal basis for the columns of `a` (n×r, r ≤ n).
fn orthonormal_basis(a: &Matrix, deficient: &mut usize) -> Matrix {
    let r = a.ncols();
    let qr = QR::new(a.clone());
    let diag = qr.r().diagonal();
    let scale = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    if diag.iter().any(|d| d.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE)) {
        *deficient += 1;
        let q = ColPivQR::new(a.clone()).q();
        return q.columns(0, r).into_owned();
    }
    qr.q()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rank1(u: &[f64], v: &[f64]) -> LowRankFactors {
        LowRankFactors::new(
            Matrix::from_column_slice(u.len(), 1, u),
            Matrix::from_column_slice(v.len(), 1, v),
        )
        .unwrap()
    }

    #[test]
    fn objective_examples() {
        let xc = rank1(&[1.0, 2.0, 0.0], &[1.0, -1.0]);
        let xs = rank1(&[0.0, 1.0, 1.0], &[2.0, 0.5]);
        assert_eq!(als_objective(&xc, &xc, &xs, 0.0).unwrap(), 0.0);
        assert_eq!(als_objective(&xs, &xc, &xs, 1.0).unwrap(), 0.0);
        let zero = rank1(&[0.0, 0.0, 0.0], &[0.0, 0.0]);
        let x0 = xc.clone();
        let expected = x0.dense().norm_squared();
        for t in [0.0, 0.3, 1.0] {
            assert!((als_objective(&zero, &x0, &x0, t).unwrap() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn endpoints_recover_adapters() {
        let xc = rank1(&[1.0, 2.0, 0.5, -1.0], &[1.0, -1.0, 0.3]);
        let xs = rank1(&[0.2, 1.0, 1.0, 0.0], &[2.0, 0.5, -0.7]);
        let tr = als_merge(&xc, &xs, 0.0, &AlsOptions::default()).unwrap();
        assert!((tr.factors.dense() - xc.dense()).norm() < 1e-10);
        let tr = als_merge(&xc, &xs, 1.0, &AlsOptions::default()).unwrap();
        assert!((tr.factors.dense() - xs.dense()).norm() < 1e-10);
    }

    #[test]
    fn single_and_repeated_adapters() {
        let x0 = rank1(&[1.0, -2.0, 0.5], &[0.3, 1.0, 2.0]);
        let tr = multi_als_merge(&[(x0.clone(), 1.0)], &AlsOptions::default()).unwrap();
        assert!((tr.factors.dense() - x0.dense()).norm() < 1e-12);
        let third = 1.0 / 3.0;
        let adapters = [(x0.clone(), third), (x0.clone(), third), (x0.clone(), 1.0 - 2.0 * third)];
        let tr = multi_als_merge(&adapters, &AlsOptions::default()).unwrap();
        assert!((tr.factors.dense() - x0.dense()).norm() < 1e-12);
    }

    #[test]
    fn argument_errors() {
        let x = rank1(&[1.0, 0.0], &[1.0, 0.0]);
        let y = rank1(&[1.0, 0.0, 0.0], &[1.0, 0.0]);
        assert!(als_merge(&x, &y, 0.5, &AlsOptions::default()).is_err());
        assert!(als_merge(&x, &x, 1.5, &AlsOptions::default()).is_err());
        assert!(multi_als_merge(&[(x.clone(), 0.4)], &AlsOptions::default()).is_err());
        assert!(multi_als_merge(&[(x.clone(), 1.2), (x.clone(), -0.2)], &AlsOptions::default()).is_err());
        assert!(LowRankFactors::new(Matrix::zeros(3, 0), Matrix::zeros(2, 0)).is_err());
        assert!(LowRankFactors::new(Matrix::zeros(3, 2), Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn rank_deficient_start_is_reported() {
        let x0 = rank1(&[0.0, 0.0, 0.0], &[0.0, 0.0]);
        let xs = rank1(&[1.0, 1.0, 0.0], &[1.0, 2.0]);
        let tr = als_merge(&x0, &xs, 0.5, &AlsOptions::default()).unwrap();
        assert!(tr.rank_deficient_steps > 0);
        assert!(tr.objectives.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
