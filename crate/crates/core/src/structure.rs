//! Group-and-shuffle orthogonal adapters: `A = Pᵀ L P R` with block-diagonal
//! orthogonal `L`, `R` and the perfect shuffle `P = P_(b,n)`.

use std::fmt;

use crate::error::{Error, Factor, Result};
use crate::linalg::{
    block_diagonal, cayley, inverse_cayley_guarded, Matrix, OrthogonalBlock, SkewGenerator,
    DETERMINANT_TOL, ORTHOGONALITY_TOL,
};

/// The perfect shuffle `P_(b,n)`: reshape a length-`n` vector into a
/// `b × n/b` row-major matrix, transpose, flatten row-major.
///
/// Stored as a gather map: `(P x)[i] = x[forward[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerfectShuffle {
    b: usize,
    n: usize,
    forward: Vec<usize>,
}

impl PerfectShuffle {
    pub fn new(b: usize, n: usize) -> Result<Self> {
        if b == 0 || n == 0 || !n.is_multiple_of(b) {
            return Err(Error::BlockSize { b, n });
        }
        let k = n / b;
        let mut forward = vec![0; n];
        // Output position c·b + r holds input element r·k + c.
        for c in 0..k {
            for r in 0..b {
                forward[c * b + r] = r * k + c;
            }
        }
        Ok(PerfectShuffle { b, n, forward })
    }

    pub fn block_size(&self) -> usize {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.n];
        for (i, &f) in self.forward.iter().enumerate() {
            inv[f] = i;
        }
        inv
    }

    /// True if `forward` is a bijection matching the reshape–transpose map.
    pub fn is_consistent(&self) -> bool {
        match PerfectShuffle::new(self.b, self.n) {
            Ok(fresh) => fresh.forward == self.forward,
            Err(_) => false,
        }
    }

    /// `P x`.
    pub fn apply<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.forward.iter().map(|&f| x[f]).collect()
    }

    /// `Pᵀ x`.
    pub fn apply_transpose<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.inverse().into_iter().map(|f| x[f]).collect()
    }

    /// Dense permutation matrix. Test and oracle use only.
    pub fn to_matrix(&self) -> Matrix {
        let mut p = Matrix::zeros(self.n, self.n);
        for (i, &f) in self.forward.iter().enumerate() {
            p[(i, f)] = 1.0;
        }
        p
    }

    /// Rows of `m` permuted by `P` (i.e. `P·m`).
    fn gather_rows(&self, m: &Matrix, map: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(m.nrows(), m.ncols());
        for (i, &src) in map.iter().enumerate() {
            out.row_mut(i).copy_from(&m.row(src));
        }
        out
    }
}

pub fn perfect_shuffle(b: usize, n: usize) -> Result<PerfectShuffle> {
    PerfectShuffle::new(b, n)
}

/// Kronecker product with row-major block layout.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// How a factor's blocks are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    Orthogonal,
    Cayley,
}

impl Storage {
    pub fn as_str(self) -> &'static str {
        match self {
            Storage::Orthogonal => "orthogonal",
            Storage::Cayley => "cayley",
        }
    }

    pub fn parse(s: &str) -> Option<Storage> {
        match s {
            "orthogonal" => Some(Storage::Orthogonal),
            "cayley" => Some(Storage::Cayley),
            _ => None,
        }
    }
}

impl fmt::Display for Storage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Permutation triple of the adapter. Only `P_L = Pᵀ, P_R = I` is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    #[default]
    ShuffleTransposeLeft,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::ShuffleTransposeLeft => "PL=PT,PR=I",
        }
    }

    pub fn parse(s: &str) -> Option<Convention> {
        (s == "PL=PT,PR=I").then_some(Convention::ShuffleTransposeLeft)
    }
}

/// A block-diagonal factor (`L` or `R`) in one of the two storage modes.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockDiagonalFactor {
    Orthogonal(Vec<OrthogonalBlock>),
    Cayley(Vec<SkewGenerator>),
}

impl BlockDiagonalFactor {
    pub fn identity(b: usize, k: usize, storage: Storage) -> Self {
        match storage {
            Storage::Orthogonal => {
                BlockDiagonalFactor::Orthogonal(vec![OrthogonalBlock::identity(b); k])
            }
            Storage::Cayley => BlockDiagonalFactor::Cayley(vec![SkewGenerator::zeros(b); k]),
        }
    }

    pub fn storage(&self) -> Storage {
        match self {
            BlockDiagonalFactor::Orthogonal(_) => Storage::Orthogonal,
            BlockDiagonalFactor::Cayley(_) => Storage::Cayley,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BlockDiagonalFactor::Orthogonal(v) => v.len(),
            BlockDiagonalFactor::Cayley(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Block sizes of every block, in order.
    fn block_dims(&self) -> Vec<usize> {
        match self {
            BlockDiagonalFactor::Orthogonal(v) => v.iter().map(|b| b.dim()).collect(),
            BlockDiagonalFactor::Cayley(v) => v.iter().map(|b| b.dim()).collect(),
        }
    }

    /// Orthogonal blocks; Cayley-stored generators are mapped through `cayley`.
    pub fn materialize(&self, factor: Factor) -> Result<Vec<OrthogonalBlock>> {
        match self {
            BlockDiagonalFactor::Orthogonal(v) => Ok(v.clone()),
            BlockDiagonalFactor::Cayley(v) => v
                .iter()
                .enumerate()
                .map(|(i, k)| cayley(k).map_err(|e| e.in_block(factor, i)))
                .collect(),
        }
    }

    /// Skew generators; orthogonal blocks go through the guarded inverse Cayley map.
    pub fn generators(&self, factor: Factor, guard: f64) -> Result<Vec<SkewGenerator>> {
        match self {
            BlockDiagonalFactor::Cayley(v) => Ok(v.clone()),
            BlockDiagonalFactor::Orthogonal(v) => v
                .iter()
                .enumerate()
                .map(|(i, b)| inverse_cayley_guarded(b, guard).map_err(|e| e.in_block(factor, i)))
                .collect(),
        }
    }
}

/// Optional provenance carried alongside an adapter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metadata {
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub provenance: Option<String>,
}

impl Metadata {
    pub fn is_empty(&self) -> bool {
        self.seed.is_none() && self.sigma.is_none() && self.provenance.is_none()
    }
}

/// A GS-orthogonal adapter `A = Pᵀ L P R`.
#[derive(Debug, Clone, PartialEq)]
pub struct GsAdapter {
    n: usize,
    b: usize,
    left: BlockDiagonalFactor,
    right: BlockDiagonalFactor,
    perm: PerfectShuffle,
    convention: Convention,
    pub metadata: Metadata,
}

impl GsAdapter {
    /// Checks shapes only; numeric validation is [`validate`].
    pub fn new(left: BlockDiagonalFactor, right: BlockDiagonalFactor) -> Result<Self> {
        let k = left.len();
        if k == 0 {
            return Err(Error::StructureMismatch("adapter has no blocks".into()));
        }
        if right.len() != k {
            return Err(Error::StructureMismatch(format!(
                "left has {k} blocks, right has {}",
                right.len()
            )));
        }
        if left.storage() != right.storage() {
            return Err(Error::StructureMismatch(
                "left and right factors use different storage modes".into(),
            ));
        }
        let dims: Vec<usize> = left.block_dims().into_iter().chain(right.block_dims()).collect();
        let b = dims[0];
        if b == 0 || dims.iter().any(|&d| d != b) {
            return Err(Error::StructureMismatch("blocks have differing sizes".into()));
        }
        let n = b * k;
        Ok(GsAdapter {
            n,
            b,
            left,
            right,
            perm: PerfectShuffle::new(b, n)?,
            convention: Convention::ShuffleTransposeLeft,
            metadata: Metadata::default(),
        })
    }

    pub fn identity(n: usize, b: usize, storage: Storage) -> Result<Self> {
        if b == 0 || !n.is_multiple_of(b) {
            return Err(Error::BlockSize { b, n });
        }
        let k = n / b;
        GsAdapter::new(
            BlockDiagonalFactor::identity(b, k, storage),
            BlockDiagonalFactor::identity(b, k, storage),
        )
    }

    pub fn with_metadata(mut self, metadata: Metadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.b
    }

    pub fn block_count(&self) -> usize {
        self.n / self.b
    }

    pub fn storage(&self) -> Storage {
        self.left.storage()
    }

    pub fn left(&self) -> &BlockDiagonalFactor {
        &self.left
    }

    pub fn right(&self) -> &BlockDiagonalFactor {
        &self.right
    }

    pub fn factor(&self, factor: Factor) -> &BlockDiagonalFactor {
        match factor {
            Factor::Left => &self.left,
            Factor::Right => &self.right,
        }
    }

    pub fn permutation(&self) -> &PerfectShuffle {
        &self.perm
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Same adapter with both factors converted to orthogonal storage.
    pub fn to_orthogonal_storage(&self) -> Result<GsAdapter> {
        let left = BlockDiagonalFactor::Orthogonal(self.left.materialize(Factor::Left)?);
        let right = BlockDiagonalFactor::Orthogonal(self.right.materialize(Factor::Right)?);
        Ok(GsAdapter::new(left, right)?.with_metadata(self.metadata.clone()))
    }

    /// Checks that two adapters can be merged block by block.
    pub fn check_compatible(&self, other: &GsAdapter) -> Result<()> {
        if self.n != other.n || self.b != other.b || self.convention != other.convention {
            return Err(Error::StructureMismatch(format!(
                "adapters differ in structure: (n={}, b={}) vs (n={}, b={})",
                self.n, self.b, other.n, other.b
            )));
        }
        Ok(())
    }
}

/// Dense `Pᵀ L P R`.
pub fn assemble_dense(a: &GsAdapter) -> Result<Matrix> {
    let left = a.left.materialize(Factor::Left)?;
    let right = a.right.materialize(Factor::Right)?;
    let l = block_diagonal(left.iter().map(|b| b.matrix()));
    let r = block_diagonal(right.iter().map(|b| b.matrix()));
    // (Pᵀ L P)[i, j] = L[f⁻¹(i), f⁻¹(j)]
    let inv = a.perm.inverse();
    let n = a.n;
    let mut plp = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            plp[(i, j)] = l[(inv[i], inv[j])];
        }
    }
    Ok(plp * r)
}

/// `A·W`, applied through the factored form without assembling `A`.
pub fn apply_to_weights(a: &GsAdapter, w: &Matrix) -> Result<Matrix> {
    if w.nrows() != a.n {
        return Err(Error::DimensionMismatch {
            what: "weight rows",
            expected: a.n,
            found: w.nrows(),
        });
    }
    let left = a.left.materialize(Factor::Left)?;
    let right = a.right.materialize(Factor::Right)?;
    let y = block_rows_mul(&right, w, a.b);
    let y = a.perm.gather_rows(&y, a.perm.forward());
    let y = block_rows_mul(&left, &y, a.b);
    Ok(a.perm.gather_rows(&y, &a.perm.inverse()))
}

fn block_rows_mul(blocks: &[OrthogonalBlock], w: &Matrix, b: usize) -> Matrix {
    let mut out = Matrix::zeros(w.nrows(), w.ncols());
    for (i, blk) in blocks.iter().enumerate() {
        let rows = w.rows(i * b, b);
        out.rows_mut(i * b, b).copy_from(&(blk.matrix() * rows));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub factor: Factor,
    pub index: usize,
    pub orthogonality_residual: f64,
    pub determinant_deviation: f64,
    pub distance_to_identity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub blocks: Vec<BlockReport>,
    /// Max `‖Bᵢ − I‖₂` over all blocks.
    pub epsilon: f64,
    pub permutation_consistent: bool,
    pub orthogonality_tolerance: f64,
    pub determinant_tolerance: f64,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &BlockReport> {
        self.blocks.iter().filter(|r| {
            !(r.orthogonality_residual <= self.orthogonality_tolerance
                && r.determinant_deviation <= self.determinant_tolerance)
        })
    }

    pub fn max_residual(&self, factor: Factor) -> f64 {
        self.blocks
            .iter()
            .filter(|r| r.factor == factor)
            .fold(0.0_f64, |m, r| m.max(r.orthogonality_residual))
    }
}

pub fn validate(a: &GsAdapter) -> ValidationReport {
    validate_with_tolerance(a, ORTHOGONALITY_TOL, DETERMINANT_TOL)
}

pub fn validate_with_tolerance(a: &GsAdapter, ortho_tol: f64, det_tol: f64) -> ValidationReport {
    let mut blocks = Vec::with_capacity(2 * a.block_count());
    let mut materialized = true;
    for factor in [Factor::Left, Factor::Right] {
        match a.factor(factor).materialize(factor) {
            Ok(list) => {
                for (index, blk) in list.iter().enumerate() {
                    blocks.push(BlockReport {
                        factor,
                        index,
                        orthogonality_residual: blk.orthogonality_residual(),
                        determinant_deviation: (blk.determinant() - 1.0).abs(),
                        distance_to_identity: blk.distance_to_identity(),
                    });
                }
            }
            Err(_) => materialized = false,
        }
    }
    let epsilon = blocks.iter().fold(0.0_f64, |m, r| m.max(r.distance_to_identity));
    let permutation_consistent = a.perm.is_consistent() && a.perm.dim() == a.n;
    let mut report = ValidationReport {
        blocks,
        epsilon,
        permutation_consistent,
        orthogonality_tolerance: ortho_tol,
        determinant_tolerance: det_tol,
        passed: false,
    };
    report.passed = materialized && permutation_consistent && report.failures().next().is_none();
    report
}
