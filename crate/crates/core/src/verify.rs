//! Self-check batteries behind `gsfuse verify`.
//!
//! `props` checks exact identities (endpoints, transpose, equivariance,
//! constant speed, orthogonality, the shuffle/Kronecker relation, the scalar
//! closed form for 2×2 blocks, agreement with the complex-Schur oracle).
//! `orders` fits log-log slopes of the four cubic-order approximations over
//! `ε ∈ {0.02, 0.04, 0.08, 0.16}`.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::analysis::{order_fit, relative_spread, OrderFit};
use crate::error::Result;
use crate::fuse::{
    merge_adapters, merge_blocks_fast, merge_blocks_full, restoration_generator, rotate_exact, spectra_restore,
    EtaSchedule, MergeConfig, MergeMethod,
};
use crate::geodesic::{block_geodesic, geodesic_path, velocity_profile};
use crate::linalg::{cayley, so_exp, so_log, spectral_norm, Matrix, OrthogonalBlock, SkewGenerator};
use crate::oracle::OracleBudget;
use crate::structure::{kron, validate, PerfectShuffle};
use crate::synth::{block_rng, random_adapter, random_skew, SynthSpec};

pub const EPSILONS: [f64; 4] = [0.02, 0.04, 0.08, 0.16];
pub const SLOPE_WINDOW: (f64, f64) = (2.7, 3.3);
pub const MIN_R_SQUARED: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Props,
    Orders,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        match s {
            "props" => Some(Suite::Props),
            "orders" => Some(Suite::Orders),
            "all" => Some(Suite::All),
            _ => None,
        }
    }

    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub suite: Suite,
    /// Block sizes to exercise.
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Flip the sign of the restoration generator in the order checks.
    pub inject_defect: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            suite: Suite::All,
            sizes: vec![2, 8],
            seeds: (0..5).collect(),
            inject_defect: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub suite: &'static str,
    pub check: String,
    pub size: usize,
    /// Worst observed value (residual, or slope for order checks).
    pub measured: f64,
    /// Secondary figure: min r² for order checks, unused otherwise.
    pub aux: Option<f64>,
    pub bound: String,
    pub passed: bool,
}

pub fn all_passed(rows: &[CheckRow]) -> bool {
    rows.iter().all(|r| r.passed)
}

pub fn format_table(rows: &[CheckRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<6} {:<7} {:<28} {:>5} {:>14} {:>10}  bound", "status", "suite", "check", "b", "measured", "r2");
    for r in rows {
        let aux = r.aux.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<6} {:<7} {:<28} {:>5} {:>14.6e} {:>10}  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.suite,
            r.check,
            r.size,
            r.measured,
            aux,
            r.bound
        );
    }
    out
}

pub fn run(opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    if opts.suite.includes(Suite::Props) {
        rows.extend(props_suite(opts)?);
    }
    if opts.suite.includes(Suite::Orders) {
        rows.extend(orders_suite(opts)?);
    }
    Ok(rows)
}

/// Unit-spectral-norm skew generator from stream `stream` of `seed`.
pub fn unit_generator_for(b: usize, seed: u64, stream: u64) -> SkewGenerator {
    let k = random_skew(b, 1.0, &mut block_rng(seed, stream));
    let norm = k.norm_spectral();
    if norm == 0.0 {
        k
    } else {
        k.scale(1.0 / norm)
    }
}

fn bounded_row(suite: &'static str, check: &str, size: usize, measured: f64, bound: f64) -> CheckRow {
    CheckRow {
        suite,
        check: check.to_string(),
        size,
        measured,
        aux: None,
        bound: format!("<= {bound:e}"),
        passed: measured <= bound,
    }
}

fn random_block(b: usize, sigma: f64, seed: u64, stream: u64) -> Result<OrthogonalBlock> {
    cayley(&random_skew(b, sigma, &mut block_rng(seed, stream)))
}

fn props_suite(opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let grid: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
    for &b in &opts.sizes {
        let mut endpoint: f64 = 0.0;
        let mut transpose: f64 = 0.0;
        let mut equivariance: f64 = 0.0;
        let mut speed: f64 = 0.0;
        let mut ortho: f64 = 0.0;
        let mut oracle_log: f64 = 0.0;
        let mut doubling_excess = f64::NEG_INFINITY;
        for &seed in &opts.seeds {
            let c = random_block(b, 0.1, seed, 0)?;
            let s = random_block(b, 0.1, seed, 1)?;
            let q = random_block(b, 0.5, seed, 2)?;
            endpoint = endpoint
                .max((block_geodesic(&c, &s, 0.0)?.matrix() - c.matrix()).norm())
                .max((block_geodesic(&c, &s, 1.0)?.matrix() - s.matrix()).norm());
            for &t in &grid {
                let direct = block_geodesic(&c, &s, t)?;
                let via_t = block_geodesic(&c.transpose(), &s.transpose(), t)?.transpose();
                transpose = transpose.max((direct.matrix() - via_t.matrix()).norm());
                let rotated = block_geodesic(&q.compose(&c), &q.compose(&s), t)?;
                equivariance = equivariance.max((rotated.matrix() - q.matrix() * direct.matrix()).norm());
            }
            speed = speed.max(relative_spread(&velocity_profile(&geodesic_path(&c, &s, 11)?)));

            let n = 4 * b;
            let ac = random_adapter(&SynthSpec::new(n, b, 0.05, seed))?;
            let asty = random_adapter(&SynthSpec::new(n, b, 0.05, seed.wrapping_add(1000)))?;
            for method in [MergeMethod::GeodesicOnly, MergeMethod::Full, MergeMethod::Fast, MergeMethod::ExactRotate] {
                let merged = merge_adapters(&ac, &asty, &MergeConfig::with_method(method, 0.6))?;
                let report = validate(merged.adapter().expect("blockwise"));
                ortho = ortho.max(report.max_residual(crate::Factor::Left)).max(report.max_residual(crate::Factor::Right));
            }

            let mid = merge_adapters(&ac, &asty, &MergeConfig::with_method(MergeMethod::GeodesicOnly, 0.5))?;
            let restored = merge_adapters(&ac, &asty, &MergeConfig::with_method(MergeMethod::Full, 0.5))?;
            let mid = mid.adapter().expect("blockwise");
            let eps = validate(&ac).epsilon.max(validate(&asty).epsilon);
            let g = crate::analysis::mean_abs_phase(&crate::analysis::spectrum_table(mid)?);
            let f = crate::analysis::mean_abs_phase(&crate::analysis::spectrum_table(restored.adapter().unwrap())?);
            doubling_excess = doubling_excess.max((f - 2.0 * g).abs() - 5.0 * eps.powi(3));

            if b <= OracleBudget::default().max_n {
                let reference = OracleBudget::default().complex_log(c.matrix(), crate::linalg::DEFAULT_GUARD)?;
                oracle_log = oracle_log.max((so_log(&c)?.matrix() - reference).norm());
            }
        }
        rows.push(bounded_row("props", "geodesic endpoints", b, endpoint, 1e-12));
        rows.push(bounded_row("props", "transpose identity", b, transpose, 1e-11));
        rows.push(bounded_row("props", "equivariance", b, equivariance, 1e-11));
        rows.push(bounded_row("props", "constant speed (rel. sd)", b, speed, 1e-8));
        rows.push(bounded_row("props", "merged orthogonality", b, ortho, 1e-10));
        rows.push(CheckRow {
            suite: "props",
            check: "phase doubling - 5eps^3".into(),
            size: b,
            measured: doubling_excess,
            aux: None,
            bound: "<= 0".into(),
            passed: doubling_excess <= 0.0,
        });
        if b <= OracleBudget::default().max_n {
            rows.push(bounded_row("props", "log vs complex Schur", b, oracle_log, 1e-10));
        }
        if b == 2 {
            rows.push(bounded_row("props", "scalar closed form", b, scalar_closed_form_error(&opts.seeds)?, 1e-12));
        }
    }
    rows.push(bounded_row("props", "shuffle Kronecker lemma", 0, kronecker_residual(24, 3, 0), 0.0));
    Ok(rows)
}

/// Max angle error of merged 2×2 blocks against
/// `2·atan(η(t)·sin((1 − t)θ_C + tθ_S)/2)`.
pub fn scalar_closed_form_error(seeds: &[u64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let schedule = EtaSchedule::default();
    for &seed in seeds {
        let mut rng = block_rng(seed, 99);
        let theta_c: f64 = rng.random_range(-1.0..1.0);
        let theta_s: f64 = rng.random_range(-1.0..1.0);
        let c = OrthogonalBlock::new(crate::linalg::rotation(theta_c))?;
        let s = OrthogonalBlock::new(crate::linalg::rotation(theta_s))?;
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let merged = merge_blocks_full(&c, &s, &MergeConfig::with_method(MergeMethod::Full, t))?;
            let m = merged.matrix();
            let angle = m[(1, 0)].atan2(m[(0, 0)]);
            let theta = (1.0 - t) * theta_c + t * theta_s;
            let expected = 2.0 * (schedule.at(t) * theta.sin() / 2.0).atan();
            worst = worst.max((angle - expected).abs());
        }
    }
    Ok(worst)
}

/// Max entry of `|P(D⊗M)Pᵀ − M⊗D|` over all `b | n ≤ max_n`, `draws` random
/// pairs per size. Exactly zero when the shuffle is right.
pub fn kronecker_residual(max_n: usize, draws: usize, seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut stream = 0;
    for n in 1..=max_n {
        for b in (1..=n).filter(|b| n % b == 0) {
            let p = PerfectShuffle::new(b, n).expect("b divides n").to_matrix();
            for _ in 0..draws {
                let mut rng = block_rng(seed, stream);
                stream += 1;
                let d = Matrix::from_fn(b, b, |_, _| rng.sample(StandardNormal));
                let m = Matrix::from_fn(n / b, n / b, |_, _| rng.sample(StandardNormal));
                let lhs = &p * kron(&d, &m) * p.transpose();
                worst = worst.max((lhs - kron(&m, &d)).amax());
            }
        }
    }
    worst
}

fn order_row(check: &str, size: usize, fits: &[OrderFit]) -> CheckRow {
    let worst_slope = fits
        .iter()
        .map(|f| f.slope)
        .max_by(|a, b| (a - 3.0).abs().total_cmp(&(b - 3.0).abs()))
        .unwrap_or(f64::NAN);
    let min_r2 = fits.iter().map(|f| f.r_squared).fold(f64::INFINITY, f64::min);
    CheckRow {
        suite: "orders",
        check: check.to_string(),
        size,
        measured: worst_slope,
        aux: Some(min_r2),
        bound: format!("slope in [{}, {}], r2 >= {}", SLOPE_WINDOW.0, SLOPE_WINDOW.1, MIN_R_SQUARED),
        passed: !fits.is_empty() && fits.iter().all(|f| f.within(SLOPE_WINDOW.0, SLOPE_WINDOW.1, MIN_R_SQUARED)),
    }
}

/// The four order sweeps for one block size and seed.
pub struct OrderSweeps {
    pub log_vs_skew: OrderFit,
    pub exp_vs_pade: OrderFit,
    /// One fit per `t ∈ {0.25, 0.5, 0.75}`.
    pub restore_vs_exact: Vec<OrderFit>,
    pub fast_vs_full: Vec<OrderFit>,
}

pub fn order_sweeps(b: usize, seed: u64, inject_defect: bool) -> Result<OrderSweeps> {
    let k0 = unit_generator_for(b, seed, 0);
    let k1 = unit_generator_for(b, seed, 1);
    let schedule = EtaSchedule::default();
    let ts = [0.25, 0.5, 0.75];

    let mut x_log = Vec::new();
    let mut e_log = Vec::new();
    let mut x_exp = Vec::new();
    let mut e_exp = Vec::new();
    let mut x_restore = Vec::new();
    let mut e_restore = vec![Vec::new(); ts.len()];
    let mut x_fast = Vec::new();
    let mut e_fast = vec![Vec::new(); ts.len()];

    for &eps in &EPSILONS {
        let d = k0.scale(eps);
        let blk = cayley(&d)?;
        let dist = blk.distance_to_identity();
        let skew = crate::linalg::skew_part(blk.matrix())?;
        x_log.push(dist);
        e_log.push((so_log(&blk)?.matrix() - skew.matrix()).norm());

        let e = so_exp(&d);
        let pade = cayley(&d.scale(0.5))?;
        x_exp.push(spectral_norm(&(e.matrix() - Matrix::identity(b, b))));
        e_exp.push((e.matrix() - pade.matrix()).norm());

        x_restore.push(dist);
        for (j, &t) in ts.iter().enumerate() {
            let approx = if inject_defect {
                cayley(&restoration_generator(&blk, schedule.at(t)).neg())?
            } else {
                spectra_restore(&blk, t, &schedule)?
            };
            let exact = rotate_exact(&blk, t, &schedule)?;
            e_restore[j].push((approx.matrix() - exact.matrix()).norm());
        }

        // half length, so 2×2 pairs (where k1 = ±k0) still differ
        let d_s = k1.scale(0.5 * eps);
        x_fast.push(eps);
        let bc = cayley(&d)?;
        let bs = cayley(&d_s)?;
        for (j, &t) in ts.iter().enumerate() {
            let cfg = MergeConfig::with_method(MergeMethod::Full, t);
            let full = merge_blocks_full(&bc, &bs, &cfg)?;
            let fast = merge_blocks_fast(&d, &d_s, &cfg)?;
            e_fast[j].push((full.matrix() - fast.matrix()).norm());
        }
    }
    Ok(OrderSweeps {
        log_vs_skew: order_fit(&x_log, &e_log)?,
        exp_vs_pade: order_fit(&x_exp, &e_exp)?,
        restore_vs_exact: e_restore.iter().map(|e| order_fit(&x_restore, e)).collect::<Result<_>>()?,
        fast_vs_full: e_fast.iter().map(|e| order_fit(&x_fast, e)).collect::<Result<_>>()?,
    })
}

fn orders_suite(opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for &b in &opts.sizes {
        let sweeps: Vec<OrderSweeps> = opts
            .seeds
            .iter()
            .map(|&seed| order_sweeps(b, seed, opts.inject_defect))
            .collect::<Result<_>>()?;
        let log: Vec<OrderFit> = sweeps.iter().map(|s| s.log_vs_skew.clone()).collect();
        let exp: Vec<OrderFit> = sweeps.iter().map(|s| s.exp_vs_pade.clone()).collect();
        let restore: Vec<OrderFit> = sweeps.iter().flat_map(|s| s.restore_vs_exact.clone()).collect();
        let fast: Vec<OrderFit> = sweeps.iter().flat_map(|s| s.fast_vs_full.clone()).collect();
        rows.push(order_row("log vs skew part", b, &log));
        rows.push(order_row("exp vs pade", b, &exp));
        rows.push(order_row("restore vs exact rotation", b, &restore));
        rows.push(order_row("fast vs full merge", b, &fast));
    }
    Ok(rows)
}
