//! Training-free merging of group-and-shuffle orthogonal adapters.
//!
//! An adapter is an orthogonal `n × n` matrix `A = Pᵀ L P R` where `L`, `R`
//! are block-diagonal with `k = n/b` orthogonal `b × b` blocks and `P` is the
//! perfect shuffle. Two adapters are merged block by block: each pair of
//! blocks is joined by its geodesic on `SO(b)`, and the eigenphases of the
//! interpolated block are then widened again by a Cayley-form rotation.
//!
//! ```
//! use gsfuse::{merge_adapters, random_adapter, validate, MergeConfig, SynthSpec};
//!
//! let concept = random_adapter(&SynthSpec::new(16, 4, 0.05, 1)).unwrap();
//! let style = random_adapter(&SynthSpec::new(16, 4, 0.05, 2)).unwrap();
//! let merged = merge_adapters(&concept, &style, &MergeConfig::default()).unwrap();
//! assert!(validate(merged.adapter().unwrap()).passed);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fuse;
pub mod geodesic;
pub mod io;
pub mod linalg;
pub mod lowrank;
pub mod oracle;
pub mod structure;
pub mod synth;
pub mod verify;

pub use error::{Error, Factor, Result};
pub use fuse::{
    cayley_interpolate, eta_at, merge_adapters, merge_blocks_fast, merge_blocks_full, rotate_exact, spectra_restore,
    EtaSchedule, MergeConfig, MergeMethod, MergeOutput,
};
pub use geodesic::{block_geodesic, geodesic_path, velocity_profile, GeodesicPath};
pub use linalg::{
    cayley, inverse_cayley, phase_spectrum, skew_part, so_exp, so_log, so_power, Matrix, OrthogonalBlock,
    PhaseSpectrum, SkewGenerator,
};
pub use lowrank::{als_merge, als_objective, multi_als_merge, AlsOptions, AlsTrace, LowRankFactors};
pub use structure::{
    apply_to_weights, assemble_dense, perfect_shuffle, validate, BlockDiagonalFactor, GsAdapter, PerfectShuffle,
    Storage, ValidationReport,
};
pub use synth::{epsilon_of, random_adapter, SynthSpec};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/structure.md")]
    mod structure {}
    #[doc = include_str!("../../../book/src/rotations.md")]
    mod rotations {}
    #[doc = include_str!("../../../book/src/geodesics.md")]
    mod geodesics {}
    #[doc = include_str!("../../../book/src/fusion.md")]
    mod fusion {}
    #[doc = include_str!("../../../book/src/fast-merge.md")]
    mod fast_merge {}
    #[doc = include_str!("../../../book/src/low-rank.md")]
    mod low_rank {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
