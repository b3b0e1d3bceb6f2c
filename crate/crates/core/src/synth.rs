//! Deterministic synthetic adapters at a controlled distance from the identity.
//!
//! Generator entries are drawn from ChaCha20 (`rand_chacha` 0.9) with one
//! stream per block, so block `j` of an adapter depends only on `(seed, j)`.
//! Left blocks use streams `0..k`, right blocks `k..2k`. Normal samples come
//! from `rand_distr::StandardNormal` scaled by `sigma`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Factor, Result};
use crate::linalg::{cayley, OrthogonalBlock, SkewGenerator};
use crate::structure::{validate, BlockDiagonalFactor, GsAdapter, Metadata, Storage};

/// Name recorded in the metadata of generated adapters.
pub const GENERATOR_NAME: &str = "chacha20-per-block-stream/standard-normal (rand_chacha 0.9, rand_distr 0.5)";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub b: usize,
    pub sigma: f64,
    pub seed: u64,
    pub storage: Storage,
}

impl SynthSpec {
    pub fn new(n: usize, b: usize, sigma: f64, seed: u64) -> Self {
        SynthSpec {
            n,
            b,
            sigma,
            seed,
            storage: Storage::Orthogonal,
        }
    }

    pub fn with_storage(self, storage: Storage) -> Self {
        SynthSpec { storage, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SynthSpec { seed, ..self }
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        SynthSpec { sigma, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 || self.n == 0 || !self.n.is_multiple_of(self.b) {
            return Err(Error::BlockSize { b: self.b, n: self.n });
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Skew generator with strictly-upper entries i.i.d. `N(0, sigma²)`.
pub fn random_skew<R: Rng + ?Sized>(dim: usize, sigma: f64, rng: &mut R) -> SkewGenerator {
    let upper: Vec<f64> = (0..dim * dim.saturating_sub(1) / 2)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect();
    SkewGenerator::from_upper(dim, &upper).expect("length matches dim")
}

/// The seeded stream for block `index` (left blocks first, then right).
pub fn block_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generator of block `index` of the adapter described by `spec`.
pub fn block_generator(spec: &SynthSpec, index: usize) -> SkewGenerator {
    random_skew(spec.b, spec.sigma, &mut block_rng(spec.seed, index as u64))
}

pub fn random_adapter(spec: &SynthSpec) -> Result<GsAdapter> {
    spec.validate()?;
    let k = spec.n / spec.b;
    let generators: Vec<SkewGenerator> = (0..2 * k).into_par_iter().map(|i| block_generator(spec, i)).collect();
    let (left, right) = generators.split_at(k);
    let factor = |gens: &[SkewGenerator], which: Factor| -> Result<BlockDiagonalFactor> {
        Ok(match spec.storage {
            Storage::Cayley => BlockDiagonalFactor::Cayley(gens.to_vec()),
            Storage::Orthogonal => BlockDiagonalFactor::Orthogonal(
                gens.iter()
                    .enumerate()
                    .map(|(i, g)| cayley(g).map_err(|e| e.in_block(which, i)))
                    .collect::<Result<Vec<OrthogonalBlock>>>()?,
            ),
        })
    };
    let adapter = GsAdapter::new(factor(left, Factor::Left)?, factor(right, Factor::Right)?)?;
    Ok(adapter.with_metadata(Metadata {
        seed: Some(spec.seed),
        sigma: Some(spec.sigma),
        provenance: Some(format!("synthetic; rng = {GENERATOR_NAME}")),
    }))
}

/// Max over all blocks of `‖Bᵢ − I‖₂`.
pub fn epsilon_of(a: &GsAdapter) -> Result<f64> {
    let report = validate(a);
    if report.blocks.len() != 2 * a.block_count() {
        // materialization failed; surface the underlying error
        a.left().materialize(Factor::Left)?;
        a.right().materialize(Factor::Right)?;
    }
    Ok(report.epsilon)
}
