//! Adapter fusion: block-wise geodesic interpolation followed by spectra
//! restoration, plus the Cayley-space fast variant and reference modes.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Factor, Result};
use crate::geodesic::BlockGeodesic;
use crate::linalg::{
    cayley, skew_part, so_power_guarded, Matrix, OrthogonalBlock, SkewGenerator, DEFAULT_GUARD,
};
use crate::structure::{assemble_dense, BlockDiagonalFactor, GsAdapter};

/// Phase multiplier `η(t) = 1 + 4(η₀ − 1)·t(1 − t)`, so `η(0) = η(1) = 1`
/// and `η(1/2) = η₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSchedule {
    pub eta0: f64,
}

impl Default for EtaSchedule {
    fn default() -> Self {
        EtaSchedule { eta0: 2.0 }
    }
}

impl EtaSchedule {
    pub fn new(eta0: f64) -> Result<Self> {
        if !(eta0 >= 0.0) || !eta0.is_finite() {
            return Err(Error::InvalidArgument(format!("eta0 must be finite and >= 0, got {eta0}")));
        }
        Ok(EtaSchedule { eta0 })
    }

    pub fn at(&self, t: f64) -> f64 {
        eta_at(self, t)
    }
}

pub fn eta_at(schedule: &EtaSchedule, t: f64) -> f64 {
    1.0 + 4.0 * (schedule.eta0 - 1.0) * t * (1.0 - t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MergeMethod {
    /// Block geodesic only, no spectra restoration.
    GeodesicOnly,
    /// Block geodesic, then Cayley-form spectra restoration.
    Full,
    /// Linear interpolation of Cayley generators, then spectra restoration.
    Fast,
    /// Dense product of the two assembled adapters (comparison baseline).
    NaiveMultiply,
    /// Block geodesic, then the exact rotation `exp(η log B)`.
    ExactRotate,
}

impl MergeMethod {
    pub const ALL: [MergeMethod; 5] = [
        MergeMethod::GeodesicOnly,
        MergeMethod::Full,
        MergeMethod::Fast,
        MergeMethod::NaiveMultiply,
        MergeMethod::ExactRotate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MergeMethod::GeodesicOnly => "geodesic",
            MergeMethod::Full => "full",
            MergeMethod::Fast => "fast",
            MergeMethod::NaiveMultiply => "naive",
            MergeMethod::ExactRotate => "exact",
        }
    }

    /// Methods whose output is a GS adapter (everything but the dense product).
    pub fn is_blockwise(self) -> bool {
        self != MergeMethod::NaiveMultiply
    }
}

impl fmt::Display for MergeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MergeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MergeMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown merge method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeConfig {
    pub t: f64,
    pub eta: EtaSchedule,
    pub method: MergeMethod,
    /// Minimum distance (radians) of any relevant eigenphase from ±π.
    pub guard: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            t: 0.6,
            eta: EtaSchedule::default(),
            method: MergeMethod::Full,
            guard: DEFAULT_GUARD,
        }
    }
}

impl MergeConfig {
    pub fn with_method(method: MergeMethod, t: f64) -> Self {
        MergeConfig {
            t,
            method,
            ..MergeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() {
            return Err(Error::InvalidArgument(format!("t must be finite, got {}", self.t)));
        }
        if !(self.guard > 0.0) {
            return Err(Error::InvalidArgument(format!("guard must be > 0, got {}", self.guard)));
        }
        EtaSchedule::new(self.eta.eta0)?;
        Ok(())
    }

    pub fn eta_value(&self) -> f64 {
        self.eta.at(self.t)
    }
}

/// Skew generator of the spectra-restored block, `(η/4)(B − Bᵀ)`.
pub fn restoration_generator(b_t: &OrthogonalBlock, eta: f64) -> SkewGenerator {
    skew_part(b_t.matrix())
        .expect("orthogonal blocks are square")
        .scale(eta / 2.0)
}

/// `(I − (η/4)(B − Bᵀ))⁻¹ (I + (η/4)(B − Bᵀ))` with `η = η(t)`.
pub fn spectra_restore(b_t: &OrthogonalBlock, t: f64, schedule: &EtaSchedule) -> Result<OrthogonalBlock> {
    let g = restoration_generator(b_t, schedule.at(t));
    cayley(&g).map_err(|e| match e {
        Error::SolveFailed { context, detail } => Error::SolveFailed {
            context,
            detail: format!("{detail}; |B_t - I|_2 = {:e}", b_t.distance_to_identity()),
        },
        other => other,
    })
}

/// `exp(η(t) · log B_t)`, the rotation that `spectra_restore` approximates.
pub fn rotate_exact(b_t: &OrthogonalBlock, t: f64, schedule: &EtaSchedule) -> Result<OrthogonalBlock> {
    rotate_exact_guarded(b_t, t, schedule, DEFAULT_GUARD)
}

pub fn rotate_exact_guarded(
    b_t: &OrthogonalBlock,
    t: f64,
    schedule: &EtaSchedule,
    guard: f64,
) -> Result<OrthogonalBlock> {
    so_power_guarded(b_t, schedule.at(t), guard)
}

/// Geodesic merge of one block pair, finished according to `cfg.method`.
///
/// `Fast` and `NaiveMultiply` are not block-pair operations on orthogonal
/// blocks; they are rejected here (see [`merge_blocks_fast`]).
pub fn merge_blocks_full(
    c: &OrthogonalBlock,
    s: &OrthogonalBlock,
    cfg: &MergeConfig,
) -> Result<OrthogonalBlock> {
    let b_t = BlockGeodesic::new(c, s, cfg.guard)?.at(cfg.t)?;
    match cfg.method {
        MergeMethod::GeodesicOnly => Ok(b_t),
        MergeMethod::Full => spectra_restore(&b_t, cfg.t, &cfg.eta),
        MergeMethod::ExactRotate => rotate_exact_guarded(&b_t, cfg.t, &cfg.eta, cfg.guard),
        MergeMethod::Fast | MergeMethod::NaiveMultiply => Err(Error::InvalidArgument(format!(
            "method {} is not a geodesic block merge",
            cfg.method
        ))),
    }
}

/// Interpolated Cayley generators, `cayley(skew((1 − t)·D_C + t·D_S))`, before restoration.
pub fn cayley_interpolate(d_c: &SkewGenerator, d_s: &SkewGenerator, t: f64) -> Result<OrthogonalBlock> {
    if d_c.dim() != d_s.dim() {
        return Err(Error::DimensionMismatch {
            what: "generator pair",
            expected: d_c.dim(),
            found: d_s.dim(),
        });
    }
    let merged = d_c.lerp(d_s, t);
    cayley(&skew_part(merged.matrix())?)
}

/// Cayley-space merge followed by spectra restoration.
pub fn merge_blocks_fast(d_c: &SkewGenerator, d_s: &SkewGenerator, cfg: &MergeConfig) -> Result<OrthogonalBlock> {
    let b_t = cayley_interpolate(d_c, d_s, cfg.t)?;
    spectra_restore(&b_t, cfg.t, &cfg.eta)
}

/// Result of merging two adapters.
#[derive(Debug, Clone, PartialEq)]
pub enum MergeOutput {
    Adapter(GsAdapter),
    /// Dense `assemble(A_C) · assemble(A_S)` from [`MergeMethod::NaiveMultiply`].
    Dense(Matrix),
}

impl MergeOutput {
    pub fn adapter(&self) -> Option<&GsAdapter> {
        match self {
            MergeOutput::Adapter(a) => Some(a),
            MergeOutput::Dense(_) => None,
        }
    }

    pub fn into_adapter(self) -> Option<GsAdapter> {
        match self {
            MergeOutput::Adapter(a) => Some(a),
            MergeOutput::Dense(_) => None,
        }
    }

    pub fn dense(&self) -> Result<Matrix> {
        match self {
            MergeOutput::Adapter(a) => assemble_dense(a),
            MergeOutput::Dense(m) => Ok(m.clone()),
        }
    }
}

/// Merges every (left, left) and (right, right) block pair independently.
///
/// Blocks are processed in parallel on the current rayon pool; the result is
/// collected in index order, so it does not depend on the schedule. The first
/// failing block (in factor, then index order) aborts the merge.
pub fn merge_adapters(c: &GsAdapter, s: &GsAdapter, cfg: &MergeConfig) -> Result<MergeOutput> {
    cfg.validate()?;
    c.check_compatible(s)?;
    if cfg.method == MergeMethod::NaiveMultiply {
        return Ok(MergeOutput::Dense(assemble_dense(c)? * assemble_dense(s)?));
    }
    let left = merge_factor(c, s, Factor::Left, cfg)?;
    let right = merge_factor(c, s, Factor::Right, cfg)?;
    let merged = GsAdapter::new(
        BlockDiagonalFactor::Orthogonal(left),
        BlockDiagonalFactor::Orthogonal(right),
    )?;
    Ok(MergeOutput::Adapter(merged))
}

fn merge_factor(c: &GsAdapter, s: &GsAdapter, factor: Factor, cfg: &MergeConfig) -> Result<Vec<OrthogonalBlock>> {
    let results: Vec<Result<OrthogonalBlock>> = if cfg.method == MergeMethod::Fast {
        let dc = c.factor(factor).generators(factor, cfg.guard)?;
        let ds = s.factor(factor).generators(factor, cfg.guard)?;
        dc.par_iter()
            .zip(ds.par_iter())
            .map(|(a, b)| merge_blocks_fast(a, b, cfg))
            .collect()
    } else {
        let bc = c.factor(factor).materialize(factor)?;
        let bs = s.factor(factor).materialize(factor)?;
        bc.par_iter()
            .zip(bs.par_iter())
            .map(|(a, b)| merge_blocks_full(a, b, cfg))
            .collect()
    };
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| e.in_block(factor, i)))
        .collect()
}
