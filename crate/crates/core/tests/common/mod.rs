#![allow(dead_code)]

use gsfuse::linalg::{cayley, rotation, OrthogonalBlock, SkewGenerator};
use gsfuse::synth::block_generator;
use gsfuse::{BlockDiagonalFactor, GsAdapter, Matrix, SynthSpec};

pub const EPSILONS: [f64; 4] = [0.02, 0.04, 0.08, 0.16];

/// Generator norm `a` with `‖cayley(aJ) − I‖₂ = eps`: the angle is `2·atan(a)`
/// and the distance `2·sin(angle/2)`.
pub fn generator_norm_for(eps: f64) -> f64 {
    (eps / 2.0).asin().tan()
}

/// Adapter whose block generators are the seed's random generators, rescaled
/// by one common factor so the largest block sits at exactly `eps` from I.
pub fn adapter_at_epsilon(n: usize, b: usize, eps: f64, seed: u64) -> GsAdapter {
    let spec = SynthSpec::new(n, b, 1.0, seed);
    let k = n / b;
    let gens: Vec<SkewGenerator> = (0..2 * k).map(|i| block_generator(&spec, i)).collect();
    let largest = gens.iter().map(|g| g.norm_spectral()).fold(0.0, f64::max);
    let factor = generator_norm_for(eps) / largest;
    let blocks: Vec<OrthogonalBlock> = gens.iter().map(|g| cayley(&g.scale(factor)).unwrap()).collect();
    GsAdapter::new(
        BlockDiagonalFactor::Orthogonal(blocks[..k].to_vec()),
        BlockDiagonalFactor::Orthogonal(blocks[k..].to_vec()),
    )
    .unwrap()
}

/// Unit-spectral-norm skew generator.
pub fn unit_generator(b: usize, seed: u64, stream: usize) -> SkewGenerator {
    let g = block_generator(&SynthSpec::new(b, b, 1.0, seed), stream);
    let norm = g.norm_spectral();
    g.scale(1.0 / norm)
}

pub fn rotation_block(theta: f64) -> OrthogonalBlock {
    OrthogonalBlock::new(rotation(theta)).unwrap()
}

pub fn angle_of(b: &OrthogonalBlock) -> f64 {
    let m = b.matrix();
    m[(1, 0)].atan2(m[(0, 0)])
}

/// All blocks, left factor first.
pub fn blocks_of(a: &GsAdapter) -> Vec<OrthogonalBlock> {
    let mut v = a.left().materialize(gsfuse::Factor::Left).unwrap();
    v.extend(a.right().materialize(gsfuse::Factor::Right).unwrap());
    v
}

/// Adapter from explicit 2×2 rotation angles (left then right).
pub fn rotation_adapter(left: &[f64], right: &[f64]) -> GsAdapter {
    GsAdapter::new(
        BlockDiagonalFactor::Orthogonal(left.iter().map(|&a| rotation_block(a)).collect()),
        BlockDiagonalFactor::Orthogonal(right.iter().map(|&a| rotation_block(a)).collect()),
    )
    .unwrap()
}

/// Perfect shuffle matrix built straight from the reshape–transpose–flatten
/// definition: element `x[j]` sits at `(j / k, j % k)` of the `b × k` matrix
/// and lands at flat position `(j % k)·b + j / k` after transposing.
pub fn shuffle_oracle(b: usize, n: usize) -> Matrix {
    let k = n / b;
    let mut p = Matrix::zeros(n, n);
    for j in 0..n {
        let (row, col) = (j / k, j % k);
        p[(col * b + row, j)] = 1.0;
    }
    p
}
