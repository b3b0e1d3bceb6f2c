//! Error-order fits, spectrum tables, trajectories, oracle comparisons and timing.
//!
//! CSV output: header row, comma separators, LF line endings, reals in
//! `{:.16e}` form (17 significant digits).

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Factor, Result};
use crate::fuse::{merge_adapters, spectra_restore, MergeConfig, MergeMethod};
use crate::geodesic::{t_grid, BlockGeodesic};
use crate::linalg::{phase_spectrum, OrthogonalBlock};
use crate::oracle::OracleBudget;
use crate::structure::GsAdapter;
use crate::synth::{random_adapter, SynthSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    /// `(ln scale, ln error)` pairs.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl OrderFit {
    pub fn within(&self, lo: f64, hi: f64, min_r_squared: f64) -> bool {
        self.slope >= lo && self.slope <= hi && self.r_squared >= min_r_squared
    }
}

/// Least-squares fit of `ln(error)` against `ln(scale)`.
pub fn order_fit(scales: &[f64], errors: &[f64]) -> Result<OrderFit> {
    if scales.len() != errors.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scales but {} errors",
            scales.len(),
            errors.len()
        )));
    }
    if scales.len() < 3 {
        return Err(Error::InvalidArgument("an order fit needs at least 3 points".into()));
    }
    if let Some(bad) = scales.iter().chain(errors).find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "order fit inputs must be positive and finite, got {bad}"
        )));
    }
    let points: Vec<(f64, f64)> = scales.iter().zip(errors).map(|(s, e)| (s.ln(), e.ln())).collect();
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("order fit needs at least two distinct scales".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(OrderFit {
        points,
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub factor: Factor,
    pub block: usize,
    pub phase_index: usize,
    pub phase: f64,
    pub re: f64,
    pub im: f64,
}

/// Eigenphases of every block, left factor first.
pub fn spectrum_table(a: &GsAdapter) -> Result<Vec<SpectrumRow>> {
    let mut rows = Vec::new();
    for factor in [Factor::Left, Factor::Right] {
        for (block, b) in a.factor(factor).materialize(factor)?.iter().enumerate() {
            let spectrum = phase_spectrum(b).map_err(|e| e.in_block(factor, block))?;
            for (phase_index, &phase) in spectrum.phases().iter().enumerate() {
                rows.push(SpectrumRow {
                    factor,
                    block,
                    phase_index,
                    phase,
                    re: phase.cos(),
                    im: phase.sin(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn mean_abs_phase(rows: &[SpectrumRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().map(|r| r.phase.abs()).sum::<f64>() / rows.len() as f64
}

pub fn spectrum_csv(rows: &[SpectrumRow]) -> String {
    let mut out = String::from("factor,block,phase_index,phase,re,im\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.16e},{:.16e},{:.16e}",
            r.factor, r.block, r.phase_index, r.phase, r.re, r.im
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub chord: f64,
}

/// Chord lengths of the merged adapter along a uniform `t` grid.
///
/// The chord between consecutive samples is the Frobenius distance of the
/// block-diagonal factors, `sqrt(Σ ‖ΔLᵢ‖² + Σ ‖ΔRᵢ‖²)`. For the geodesic
/// method every block moves at constant speed, so the chords are constant.
pub fn trajectory(
    c: &GsAdapter,
    s: &GsAdapter,
    steps: usize,
    method: MergeMethod,
    base: &MergeConfig,
) -> Result<Vec<TrajectoryRow>> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("steps must be >= 2, got {steps}")));
    }
    if !method.is_blockwise() {
        return Err(Error::InvalidArgument(format!("trajectory needs a blockwise method, got {method}")));
    }
    c.check_compatible(s)?;
    let grid = t_grid(steps);
    let samples: Vec<Vec<OrthogonalBlock>> = if method == MergeMethod::GeodesicOnly {
        geodesic_samples(c, s, &grid, base.guard)?
    } else {
        grid.iter()
            .map(|&t| {
                let cfg = MergeConfig { t, method, ..*base };
                let merged = merge_adapters(c, s, &cfg)?.into_adapter().expect("blockwise method");
                all_blocks(&merged)
            })
            .collect::<Result<_>>()?
    };
    Ok(samples
        .windows(2)
        .enumerate()
        .map(|(step, w)| {
            let sq: f64 = w[0]
                .iter()
                .zip(&w[1])
                .map(|(a, b)| (b.matrix() - a.matrix()).norm_squared())
                .sum();
            TrajectoryRow {
                step,
                t_start: grid[step],
                t_end: grid[step + 1],
                chord: sq.sqrt(),
            }
        })
        .collect())
}

fn all_blocks(a: &GsAdapter) -> Result<Vec<OrthogonalBlock>> {
    let mut blocks = a.left().materialize(Factor::Left)?;
    blocks.extend(a.right().materialize(Factor::Right)?);
    Ok(blocks)
}

// One decomposition per block pair, evaluated at every t.
fn geodesic_samples(c: &GsAdapter, s: &GsAdapter, grid: &[f64], guard: f64) -> Result<Vec<Vec<OrthogonalBlock>>> {
    let mut per_block = Vec::new();
    for factor in [Factor::Left, Factor::Right] {
        let bc = c.factor(factor).materialize(factor)?;
        let bs = s.factor(factor).materialize(factor)?;
        for (i, (x, y)) in bc.iter().zip(&bs).enumerate() {
            let geo = BlockGeodesic::new(x, y, guard).map_err(|e| e.in_block(factor, i))?;
            per_block.push(
                grid.iter()
                    .map(|&t| geo.at(t))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| e.in_block(factor, i))?,
            );
        }
    }
    Ok((0..grid.len())
        .map(|j| per_block.iter().map(|p| p[j].clone()).collect())
        .collect())
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from("step,t_start,t_end,chord\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e}", r.step, r.t_start, r.t_end, r.chord);
    }
    out
}

/// Relative standard deviation of a set of chords (0 for all-zero input).
pub fn relative_spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if mean == 0.0 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    var.sqrt() / mean.abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub t: f64,
    pub method: MergeMethod,
    /// `‖merged − ambient(t)‖_F / ‖ambient(t)‖_F` on assembled matrices.
    pub relative_error: f64,
    pub seconds: f64,
}

/// Every method against the dense ambient geodesic on a grid of `t`.
pub fn compare_merges(
    c: &GsAdapter,
    s: &GsAdapter,
    ts: &[f64],
    methods: &[MergeMethod],
    base: &MergeConfig,
    budget: &OracleBudget,
) -> Result<Vec<CompareRow>> {
    c.check_compatible(s)?;
    let mut rows = Vec::with_capacity(ts.len() * methods.len());
    for &t in ts {
        let reference = budget.ambient_geodesic(c, s, t)?;
        let scale = reference.norm();
        for &method in methods {
            let cfg = MergeConfig { t, method, ..*base };
            let start = Instant::now();
            let merged = merge_adapters(c, s, &cfg)?.dense()?;
            let seconds = start.elapsed().as_secs_f64();
            rows.push(CompareRow {
                t,
                method,
                relative_error: (merged - &reference).norm() / scale,
                seconds,
            });
        }
    }
    Ok(rows)
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("t,method,relative_error,seconds\n");
    for r in rows {
        let _ = writeln!(out, "{:.16e},{},{:.16e},{:.16e}", r.t, r.method, r.relative_error, r.seconds);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingCell {
    pub method: MergeMethod,
    /// Wall time of each repeat, seconds.
    pub samples: Vec<f64>,
}

impl TimingCell {
    pub fn median(&self) -> f64 {
        let mut v = self.samples.clone();
        v.sort_by(f64::total_cmp);
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Time spent in the two stages of one full merge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseBreakdown {
    /// Decomposition of `B_Sᵀ B_C` and evaluation at `t`, all blocks.
    pub geodesic: f64,
    /// Spectra restoration, all blocks.
    pub restore: f64,
}

impl PhaseBreakdown {
    pub fn geodesic_share(&self) -> f64 {
        self.geodesic / (self.geodesic + self.restore)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub n: usize,
    pub b: usize,
    pub repeats: usize,
    pub cells: Vec<TimingCell>,
    pub phases: Option<PhaseBreakdown>,
}

impl TimingReport {
    pub fn cell(&self, method: MergeMethod) -> Option<&TimingCell> {
        self.cells.iter().find(|c| c.method == method)
    }

    /// `median(a) / median(b)`, if both were measured.
    pub fn median_ratio(&self, a: MergeMethod, b: MergeMethod) -> Option<f64> {
        Some(self.cell(a)?.median() / self.cell(b)?.median())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,n,b,repeats,median_s,min_s\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.16e},{:.16e}",
                c.method,
                self.n,
                self.b,
                self.repeats,
                c.median(),
                c.min()
            );
        }
        out
    }
}

/// Wall-clock timing of merges between `random_adapter(spec)` and the adapter
/// with seed `spec.seed + 1`, on a single thread.
pub fn bench_merge(spec: &SynthSpec, methods: &[MergeMethod], repeats: usize, t: f64) -> Result<TimingReport> {
    if repeats < 3 {
        return Err(Error::InvalidArgument(format!("repeats must be >= 3, got {repeats}")));
    }
    let c = random_adapter(spec)?;
    let s = random_adapter(&spec.with_seed(spec.seed.wrapping_add(1)))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        let mut cells = Vec::with_capacity(methods.len());
        for &method in methods {
            let cfg = MergeConfig::with_method(method, t);
            let mut samples = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let start = Instant::now();
                let out = merge_adapters(&c, &s, &cfg)?;
                samples.push(start.elapsed().as_secs_f64());
                std::hint::black_box(out);
            }
            cells.push(TimingCell { method, samples });
        }
        let phases = if methods.contains(&MergeMethod::Full) {
            Some(phase_breakdown(&c, &s, t)?)
        } else {
            None
        };
        Ok(TimingReport {
            n: spec.n,
            b: spec.b,
            repeats,
            cells,
            phases,
        })
    })
}

fn phase_breakdown(c: &GsAdapter, s: &GsAdapter, t: f64) -> Result<PhaseBreakdown> {
    let cfg = MergeConfig::with_method(MergeMethod::Full, t);
    let bc = all_blocks(c)?;
    let bs = all_blocks(s)?;
    let start = Instant::now();
    let mid = bc
        .iter()
        .zip(&bs)
        .map(|(x, y)| BlockGeodesic::new(x, y, cfg.guard)?.at(t))
        .collect::<Result<Vec<_>>>()?;
    let geodesic = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let restored = mid
        .iter()
        .map(|b| spectra_restore(b, t, &cfg.eta))
        .collect::<Result<Vec<_>>>()?;
    let restore = start.elapsed().as_secs_f64();
    std::hint::black_box(restored);
    Ok(PhaseBreakdown { geodesic, restore })
}
