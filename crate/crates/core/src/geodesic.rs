//! Geodesics between orthogonal blocks: `B(t) = B_C · exp(−t · log(B_Sᵀ B_C))`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CanonicalForm, OrthogonalBlock, DEFAULT_GUARD};

/// The relative rotation `B_Sᵀ B_C` of a block pair, decomposed once so the
/// geodesic can be evaluated at many `t`.
pub struct BlockGeodesic {
    start: OrthogonalBlock,
    end: OrthogonalBlock,
    relative: Option<CanonicalForm>,
    guard: f64,
}

impl BlockGeodesic {
    pub fn new(start: &OrthogonalBlock, end: &OrthogonalBlock, guard: f64) -> Result<Self> {
        if start.dim() != end.dim() {
            return Err(Error::DimensionMismatch {
                what: "geodesic endpoints",
                expected: start.dim(),
                found: end.dim(),
            });
        }
        let relative = if start == end {
            None
        } else {
            let m = end.matrix().transpose() * start.matrix();
            let form = CanonicalForm::new(&m);
            form.check_guard(guard)?;
            Some(form)
        };
        Ok(BlockGeodesic {
            start: start.clone(),
            end: end.clone(),
            relative,
            guard,
        })
    }

    /// Distance of the largest eigenphase of `B_Sᵀ B_C` from ±π.
    pub fn guard_margin(&self) -> f64 {
        match &self.relative {
            Some(form) => PI - form.max_phase(),
            None => PI,
        }
    }

    /// Point at parameter `t`. Endpoints are returned exactly.
    pub fn at(&self, t: f64) -> Result<OrthogonalBlock> {
        let Some(form) = &self.relative else {
            return Ok(self.start.clone());
        };
        if t == 0.0 {
            return Ok(self.start.clone());
        }
        if t == 1.0 {
            return Ok(self.end.clone());
        }
        let step = form.power(-t, self.guard)?;
        Ok(self.start.compose(&step))
    }
}

/// `B_C · exp(−t · log(B_Sᵀ B_C))` with the default guard.
pub fn block_geodesic(c: &OrthogonalBlock, s: &OrthogonalBlock, t: f64) -> Result<OrthogonalBlock> {
    block_geodesic_guarded(c, s, t, DEFAULT_GUARD)
}

pub fn block_geodesic_guarded(
    c: &OrthogonalBlock,
    s: &OrthogonalBlock,
    t: f64,
    guard: f64,
) -> Result<OrthogonalBlock> {
    BlockGeodesic::new(c, s, guard)?.at(t)
}

/// True when `t` lies outside `[0, 1]` (extrapolation along the geodesic).
pub fn is_extrapolation(t: f64) -> bool {
    !(0.0..=1.0).contains(&t)
}

/// Min over pairs of the distance of any eigenphase of `B_Sᵀ B_C` to ±π.
pub fn guard_margin(c: &OrthogonalBlock, s: &OrthogonalBlock) -> f64 {
    if c == s {
        return PI;
    }
    let m = s.matrix().transpose() * c.matrix();
    PI - CanonicalForm::new(&m).max_phase()
}

/// Samples of a curve on a uniform `t` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub steps: Vec<(f64, OrthogonalBlock)>,
}

impl GeodesicPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn first(&self) -> &OrthogonalBlock {
        &self.steps[0].1
    }

    pub fn last(&self) -> &OrthogonalBlock {
        &self.steps[self.steps.len() - 1].1
    }
}

/// Uniform grid `t_i = i/(steps−1)` along the block geodesic.
pub fn geodesic_path(c: &OrthogonalBlock, s: &OrthogonalBlock, steps: usize) -> Result<GeodesicPath> {
    geodesic_path_guarded(c, s, steps, DEFAULT_GUARD)
}

pub fn geodesic_path_guarded(
    c: &OrthogonalBlock,
    s: &OrthogonalBlock,
    steps: usize,
    guard: f64,
) -> Result<GeodesicPath> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("steps must be >= 2, got {steps}")));
    }
    let geo = BlockGeodesic::new(c, s, guard)?;
    let steps = t_grid(steps)
        .into_iter()
        .map(|t| geo.at(t).map(|b| (t, b)))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeodesicPath { steps })
}

/// `i/(steps−1)` for `i = 0..steps`, with both endpoints exact.
pub fn t_grid(steps: usize) -> Vec<f64> {
    let last = (steps - 1) as f64;
    (0..steps).map(|i| i as f64 / last).collect()
}

/// Frobenius chord lengths between consecutive samples.
pub fn velocity_profile(path: &GeodesicPath) -> Vec<f64> {
    path.steps
        .windows(2)
        .map(|w| (w[1].1.matrix() - w[0].1.matrix()).norm())
        .collect()
}

/// Chord lengths of a whole adapter: per step, the root of the summed squared
/// block chords over all paths (one path per block).
pub fn adapter_velocity_profile(paths: &[GeodesicPath]) -> Vec<f64> {
    let Some(first) = paths.first() else {
        return Vec::new();
    };
    let mut sq = vec![0.0; first.len().saturating_sub(1)];
    for p in paths {
        for (acc, chord) in sq.iter_mut().zip(velocity_profile(p)) {
            *acc += chord * chord;
        }
    }
    sq.into_iter().map(f64::sqrt).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cayley, rotation, Matrix, SkewGenerator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, Normal};

    fn random_block(dim: usize, sigma: f64, seed: u64) -> OrthogonalBlock {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).unwrap();
        let upper: Vec<f64> = (0..dim * (dim - 1) / 2).map(|_| normal.sample(&mut rng)).collect();
        cayley(&SkewGenerator::from_upper(dim, &upper).unwrap()).unwrap()
    }

    fn ob(m: Matrix) -> OrthogonalBlock {
        OrthogonalBlock::new(m).unwrap()
    }

    #[test]
    fn quarter_turn_midpoint() {
        let b = block_geodesic(&ob(rotation(0.0)), &ob(rotation(PI / 2.0)), 0.5).unwrap();
        assert!((b.matrix() - rotation(PI / 4.0)).norm() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b.matrix()[(0, 0)] - h).abs() < 1e-15);
    }

    #[test]
    fn equal_endpoints_stay_put() {
        let c = random_block(4, 0.2, 3);
        for t in [0.0, 0.3, 0.6, 1.0, 1.4] {
            assert_eq!(block_geodesic(&c, &c, t).unwrap(), c);
        }
    }

    #[test]
    fn endpoints_seed_21() {
        let c = random_block(4, 0.1, 21);
        let s = random_block(4, 0.1, 22);
        assert_eq!(block_geodesic(&c, &s, 0.0).unwrap(), c);
        assert_eq!(block_geodesic(&c, &s, 1.0).unwrap(), s);
        // t = 1 through the formula, without the exact shortcut
        let geo = BlockGeodesic::new(&c, &s, DEFAULT_GUARD).unwrap();
        let near = geo.at(1.0 - 1e-15).unwrap();
        assert!((near.matrix() - s.matrix()).norm() < 1e-12);
    }

    #[test]
    fn path_chords_for_plane_rotation() {
        let path = geodesic_path(&ob(rotation(0.0)), &ob(rotation(0.4)), 5).unwrap();
        let expected = 2.0 * 2f64.sqrt() * (0.05f64).sin();
        for chord in velocity_profile(&path) {
            assert!((chord - expected).abs() < 1e-15, "{chord} vs {expected}");
        }
        assert!((expected - 0.14136).abs() < 1e-5);
    }

    #[test]
    fn two_step_path_is_the_endpoints() {
        let c = random_block(3, 0.2, 1);
        let s = random_block(3, 0.2, 2);
        let path = geodesic_path(&c, &s, 2).unwrap();
        assert_eq!(path.first(), &c);
        assert_eq!(path.last(), &s);
        assert!(geodesic_path(&c, &s, 1).is_err());
    }

    #[test]
    fn identical_endpoints_have_zero_velocity() {
        let c = random_block(3, 0.2, 1);
        let path = geodesic_path(&c, &c, 6).unwrap();
        assert!(velocity_profile(&path).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn guard_trips_for_antipodal_pair() {
        let c = ob(rotation(0.0));
        let s = OrthogonalBlock::from_matrix_unchecked(rotation(PI - 1e-9));
        assert!(matches!(
            block_geodesic(&c, &s, 0.5),
            Err(Error::EigenvalueNearMinusOne { .. })
        ));
        assert!(guard_margin(&c, &s) < 1e-6);
    }

    #[test]
    fn extrapolation_flag() {
        assert!(is_extrapolation(1.2));
        assert!(is_extrapolation(-0.1));
        assert!(!is_extrapolation(0.6));
    }
}
