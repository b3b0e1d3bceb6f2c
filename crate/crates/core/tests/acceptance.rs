//! Acceptance battery: one test per criterion, each printing a single
//! `criterion NN PASS|FAIL` line. Run with
//! `cargo test -p gsfuse --test acceptance -- --nocapture --test-threads=1`.

mod common;

use common::*;
use gsfuse::analysis::{bench_merge, order_fit, relative_spread, spectrum_table, trajectory, OrderFit};
use gsfuse::fuse::{merge_blocks_fast, merge_blocks_full, rotate_exact};
use gsfuse::geodesic::block_geodesic;
use gsfuse::io::{adapter_from_str, adapter_to_string, lowrank_from_str, lowrank_to_string, read_adapter, read_lowrank, write_adapter, write_lowrank};
use gsfuse::linalg::{cayley, skew_part, so_exp, so_log, spectral_norm};
use gsfuse::lowrank::{als_merge, AlsOptions, LowRankFactors};
use gsfuse::oracle::OracleBudget;
use gsfuse::structure::{kron, validate};
use gsfuse::synth::block_rng;
use gsfuse::{
    assemble_dense, merge_adapters, random_adapter, spectra_restore, EtaSchedule, Factor, Matrix, MergeConfig,
    MergeMethod, PerfectShuffle, Storage, SynthSpec,
};
use rand::Rng;
use rand_distr::StandardNormal;

fn report(id: u32, title: &str, passed: bool, detail: String) {
    println!("criterion {id:02} {} {title}: {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "criterion {id} ({title}) failed: {detail}");
}

fn slope_ok(fit: &OrderFit) -> bool {
    fit.within(2.7, 3.3, 0.98)
}

/// The 20 random pairs shared by criteria 1 and 3: every `(n, b)` with
/// `b | n` from `n ∈ {8, 64, 256}`, `b ∈ {2, 8, 32}`, crossed with
/// `σ ∈ {0.02, 0.1}`, cycled until 20 pairs exist.
fn instance_set() -> Vec<(SynthSpec, SynthSpec)> {
    let mut shapes = Vec::new();
    for n in [8, 64, 256] {
        for b in [2, 8, 32] {
            if b <= n && n % b == 0 {
                for sigma in [0.02, 0.1] {
                    shapes.push((n, b, sigma));
                }
            }
        }
    }
    (0..20u64)
        .map(|i| {
            let (n, b, sigma) = shapes[i as usize % shapes.len()];
            (SynthSpec::new(n, b, sigma, 100 + i), SynthSpec::new(n, b, sigma, 500 + i))
        })
        .collect()
}

#[test]
fn criterion_01_orthogonality_preservation() {
    let mut worst_block: f64 = 0.0;
    let mut worst_dense_ratio: f64 = 0.0;
    let mut skipped_exact = 0;
    let mut merges = 0;
    for (cs, ss) in instance_set() {
        let c = random_adapter(&cs).unwrap();
        let s = random_adapter(&ss).unwrap();
        for method in MergeMethod::ALL {
            let cfg = MergeConfig::with_method(method, 0.6);
            let out = match merge_adapters(&c, &s, &cfg) {
                Ok(out) => out,
                // exp(η log B) needs every scaled phase inside (−π, π); that is a
                // precondition of the reference mode, not an orthogonality defect
                Err(e) if method == MergeMethod::ExactRotate && matches!(e.root(), gsfuse::Error::PhaseOverflow { .. }) => {
                    skipped_exact += 1;
                    continue;
                }
                Err(e) => panic!("{method} on n={} b={} sigma={}: {e}", cs.n, cs.b, cs.sigma),
            };
            merges += 1;
            match out.adapter() {
                Some(a) => {
                    for blk in blocks_of(a) {
                        let m = blk.matrix();
                        let r = (m.transpose() * m - Matrix::identity(m.nrows(), m.ncols())).norm();
                        worst_block = worst_block.max(r);
                    }
                }
                None => {
                    let d = out.dense().unwrap();
                    let r = (d.transpose() * &d - Matrix::identity(d.nrows(), d.ncols())).norm();
                    worst_dense_ratio = worst_dense_ratio.max(r / (1e-9 * cs.n as f64));
                }
            }
        }
    }
    report(
        1,
        "orthogonality preservation",
        worst_block <= 1e-10 && worst_dense_ratio <= 1.0,
        format!(
            "{merges} merges, max block residual {worst_block:.3e} (bound 1e-10), dense residual at {worst_dense_ratio:.3e} of 1e-9*n, exact-rotate n/a on {skipped_exact}"
        ),
    );
}

#[test]
fn criterion_02_endpoint_recovery() {
    let mut geodesic_err: f64 = 0.0;
    for (cs, ss) in instance_set().into_iter().take(10) {
        let c = random_adapter(&cs).unwrap();
        let s = random_adapter(&ss).unwrap();
        for (t, target) in [(0.0, &c), (1.0, &s)] {
            let out = merge_adapters(&c, &s, &MergeConfig::with_method(MergeMethod::GeodesicOnly, t)).unwrap();
            for (x, y) in blocks_of(out.adapter().unwrap()).iter().zip(blocks_of(target)) {
                geodesic_err = geodesic_err.max((x.matrix() - y.matrix()).norm());
            }
        }
    }

    // Restored methods at the endpoints: error against the endpoint block is cubic.
    let mut fits = Vec::new();
    for b in [2, 8] {
        for seed in 0..5 {
            let k0 = unit_generator(b, seed, 0);
            let k1 = unit_generator(b, seed, 1);
            for method in [MergeMethod::Full, MergeMethod::Fast] {
                for t in [0.0, 1.0] {
                    let mut xs = Vec::new();
                    let mut es = Vec::new();
                    for eps in EPSILONS {
                        let (dc, ds) = (k0.scale(eps), k1.scale(eps));
                        let (bc, bs) = (cayley(&dc).unwrap(), cayley(&ds).unwrap());
                        let cfg = MergeConfig::with_method(method, t);
                        let out = if method == MergeMethod::Fast {
                            merge_blocks_fast(&dc, &ds, &cfg).unwrap()
                        } else {
                            merge_blocks_full(&bc, &bs, &cfg).unwrap()
                        };
                        let target = if t == 0.0 { &bc } else { &bs };
                        xs.push(bc.distance_to_identity().max(bs.distance_to_identity()));
                        es.push((out.matrix() - target.matrix()).norm());
                    }
                    fits.push(order_fit(&xs, &es).unwrap());
                }
            }
        }
    }
    let (lo, hi) = slope_range(&fits);
    let min_r2 = fits.iter().map(|f| f.r_squared).fold(f64::INFINITY, f64::min);
    report(
        2,
        "endpoint recovery",
        geodesic_err <= 1e-11 && fits.iter().all(slope_ok),
        format!("geodesic max error {geodesic_err:.3e} (bound 1e-11); restored-endpoint slopes in [{lo:.3}, {hi:.3}], min r2 {min_r2:.5}"),
    );
}

fn slope_range(fits: &[OrderFit]) -> (f64, f64) {
    fits.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f.slope), hi.max(f.slope)))
}

#[test]
fn criterion_03_constant_geodesic_speed() {
    let mut worst: f64 = 0.0;
    for (cs, ss) in instance_set() {
        let c = random_adapter(&cs).unwrap();
        let s = random_adapter(&ss).unwrap();
        let rows = trajectory(&c, &s, 11, MergeMethod::GeodesicOnly, &MergeConfig::default()).unwrap();
        let chords: Vec<f64> = rows.iter().map(|r| r.chord).collect();
        worst = worst.max(relative_spread(&chords));
    }
    report(3, "constant geodesic speed", worst <= 1e-8, format!("max chord relative sd {worst:.3e} (bound 1e-8)"));
}

#[test]
fn criterion_04_cubic_order_battery() {
    let schedule = EtaSchedule::default();
    let mut by_check: Vec<(&str, Vec<OrderFit>)> =
        vec![("log vs skew", vec![]), ("exp vs pade", vec![]), ("restore vs exact", vec![]), ("fast vs full", vec![])];
    for b in [2, 8] {
        for seed in 0..5 {
            let k0 = unit_generator(b, seed, 0);
            let k1 = unit_generator(b, seed, 1);
            let mut dist = Vec::new();
            let mut exp_dist = Vec::new();
            let (mut e_log, mut e_exp) = (Vec::new(), Vec::new());
            let ts = [0.25, 0.5, 0.75];
            let mut e_restore = vec![Vec::new(); 3];
            let mut e_fast = vec![Vec::new(); 3];
            for eps in EPSILONS {
                let d = k0.scale(eps);
                let blk = cayley(&d).unwrap();
                dist.push(blk.distance_to_identity());
                let log = so_log(&blk).unwrap();
                e_log.push((log.matrix() - skew_part(blk.matrix()).unwrap().matrix()).norm());

                let e = so_exp(&d);
                exp_dist.push(spectral_norm(&(e.matrix() - Matrix::identity(b, b))));
                e_exp.push((e.matrix() - cayley(&d.scale(0.5)).unwrap().matrix()).norm());

                // half-length second generator keeps 2×2 pairs distinct
                let ds = k1.scale(0.5 * eps);
                let bs = cayley(&ds).unwrap();
                for (j, &t) in ts.iter().enumerate() {
                    let approx = spectra_restore(&blk, t, &schedule).unwrap();
                    let exact = rotate_exact(&blk, t, &schedule).unwrap();
                    e_restore[j].push((approx.matrix() - exact.matrix()).norm());
                    let cfg = MergeConfig::with_method(MergeMethod::Full, t);
                    let full = merge_blocks_full(&blk, &bs, &cfg).unwrap();
                    let fast = merge_blocks_fast(&d, &ds, &cfg).unwrap();
                    e_fast[j].push((full.matrix() - fast.matrix()).norm());
                }
            }
            by_check[0].1.push(order_fit(&dist, &e_log).unwrap());
            by_check[1].1.push(order_fit(&exp_dist, &e_exp).unwrap());
            let eps_axis: Vec<f64> = EPSILONS.to_vec();
            for j in 0..3 {
                by_check[2].1.push(order_fit(&dist, &e_restore[j]).unwrap());
                by_check[3].1.push(order_fit(&eps_axis, &e_fast[j]).unwrap());
            }
        }
    }
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, fits) in &by_check {
        let (lo, hi) = slope_range(fits);
        let r2 = fits.iter().map(|f| f.r_squared).fold(f64::INFINITY, f64::min);
        passed &= fits.iter().all(slope_ok);
        parts.push(format!("{name} [{lo:.3}, {hi:.3}] r2>={r2:.4}"));
    }
    report(4, "cubic-order battery", passed, parts.join("; "));
}

#[test]
fn criterion_05_scalar_closed_form() {
    let schedule = EtaSchedule::default();
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = block_rng(seed, 7);
        let left_c: Vec<f64> = (0..4).map(|_| rng.random_range(-0.8..0.8)).collect();
        let right_c: Vec<f64> = (0..4).map(|_| rng.random_range(-0.8..0.8)).collect();
        let left_s: Vec<f64> = (0..4).map(|_| rng.random_range(-0.8..0.8)).collect();
        let right_s: Vec<f64> = (0..4).map(|_| rng.random_range(-0.8..0.8)).collect();
        let c = rotation_adapter(&left_c, &right_c);
        let s = rotation_adapter(&left_s, &right_s);
        let theta_c: Vec<f64> = left_c.iter().chain(&right_c).copied().collect();
        let theta_s: Vec<f64> = left_s.iter().chain(&right_s).copied().collect();
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let out = merge_adapters(&c, &s, &MergeConfig::with_method(MergeMethod::Full, t)).unwrap();
            let eta = 1.0 + 4.0 * t * (1.0 - t);
            for (j, blk) in blocks_of(out.adapter().unwrap()).iter().enumerate() {
                let theta = (1.0 - t) * theta_c[j] + t * theta_s[j];
                let expected = 2.0 * (eta * theta.sin() / 2.0).atan();
                worst = worst.max((angle_of(blk) - expected).abs());
            }
            assert_eq!(schedule.at(t), eta);
        }
    }
    report(5, "scalar oracle agreement", worst <= 1e-12, format!("max angle error {worst:.3e} rad (bound 1e-12)"));
}

#[test]
fn criterion_06_phase_doubling() {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut cells = 0;
    for (n, b) in [(8, 2), (16, 4), (32, 8)] {
        for seed in 0..5u64 {
            let c = random_adapter(&SynthSpec::new(n, b, 0.05, seed)).unwrap();
            let s = random_adapter(&SynthSpec::new(n, b, 0.05, seed + 50)).unwrap();
            let eps = validate(&c).epsilon.max(validate(&s).epsilon);
            let geo = merge_adapters(&c, &s, &MergeConfig::with_method(MergeMethod::GeodesicOnly, 0.5)).unwrap();
            let full = merge_adapters(&c, &s, &MergeConfig::with_method(MergeMethod::Full, 0.5)).unwrap();
            let g = spectrum_table(geo.adapter().unwrap()).unwrap();
            let f = spectrum_table(full.adapter().unwrap()).unwrap();
            for factor in [Factor::Left, Factor::Right] {
                for blk in 0..n / b {
                    let mean = |rows: &[gsfuse::analysis::SpectrumRow]| {
                        let sel: Vec<f64> =
                            rows.iter().filter(|r| r.factor == factor && r.block == blk).map(|r| r.phase.abs()).collect();
                        sel.iter().sum::<f64>() / sel.len() as f64
                    };
                    let excess = (mean(&f) - 2.0 * mean(&g)).abs() - 5.0 * eps.powi(3);
                    worst_excess = worst_excess.max(excess);
                    cells += 1;
                }
            }
        }
    }
    report(
        6,
        "phase doubling",
        worst_excess <= 0.0,
        format!("{cells} blocks, max (|ratio gap| - 5 eps^3) = {worst_excess:.3e} (must be <= 0)"),
    );
}

#[test]
fn criterion_07_transpose_identity() {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let b = [2, 3, 4, 8, 16][seed as usize % 5];
        let c = cayley(&unit_generator(b, seed, 0).scale(0.3)).unwrap();
        let s = cayley(&unit_generator(b, seed, 1).scale(0.3)).unwrap();
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let direct = block_geodesic(&c, &s, t).unwrap();
            let mirrored = block_geodesic(&c.transpose(), &s.transpose(), t).unwrap().transpose();
            worst = worst.max((direct.matrix() - mirrored.matrix()).norm());
        }
    }
    report(7, "transpose identity", worst <= 1e-11, format!("max deviation {worst:.3e} (bound 1e-11)"));
}

#[test]
fn criterion_08_shuffle_kronecker_lemma() {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut stream = 0;
    for n in 1..=24usize {
        for b in (1..=n).filter(|b| n % b == 0) {
            let p = shuffle_oracle(b, n);
            assert_eq!(PerfectShuffle::new(b, n).unwrap().to_matrix(), p, "shuffle matrix (b={b}, n={n})");
            for _ in 0..3 {
                let mut rng = block_rng(8, stream);
                stream += 1;
                let d = Matrix::from_fn(b, b, |_, _| rng.sample(StandardNormal));
                let m = Matrix::from_fn(n / b, n / b, |_, _| rng.sample(StandardNormal));
                let lhs = &p * kron(&d, &m) * p.transpose();
                worst = worst.max((lhs - kron(&m, &d)).amax());
                cases += 1;
            }
        }
    }
    report(8, "perfect-shuffle Kronecker lemma", worst == 0.0, format!("{cases} cases, max |residual| {worst:e} (must be 0)"));
}

/// Relative Frobenius error of the blockwise geodesic against the dense SO(8)
/// geodesic at `t`, one value per ε of the standard sweep.
fn ambient_errors(seed: u64, t: f64) -> Vec<f64> {
    let budget = OracleBudget::default();
    EPSILONS
        .iter()
        .map(|&eps| {
            let c = adapter_at_epsilon(8, 2, eps, seed);
            let s = adapter_at_epsilon(8, 2, eps, seed + 1000);
            let blockwise = merge_adapters(&c, &s, &MergeConfig::with_method(MergeMethod::GeodesicOnly, t))
                .unwrap()
                .dense()
                .unwrap();
            let ambient = budget.ambient_geodesic(&c, &s, t).unwrap();
            (blockwise - &ambient).norm() / ambient.norm()
        })
        .collect()
}

#[test]
fn criterion_09_ambient_geodesic_closeness() {
    // Documented as not attainable: the gap between the blockwise and the
    // ambient geodesic has a second-order commutator term, so the measured
    // slope is ≈ 2. The criterion is evaluated as stated.
    let mut slopes = Vec::new();
    for seed in 0..5u64 {
        let fit = order_fit(&EPSILONS, &ambient_errors(seed, 0.5)).unwrap();
        slopes.push(fit.slope);
    }
    let min = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let max = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    report(
        9,
        "ambient-geodesic closeness",
        min >= 2.5,
        format!("n=8, t=0.5, 5 seeds: slopes in [{min:.3}, {max:.3}] (required >= 2.5)"),
    );
}

fn random_factors(n: usize, m: usize, r: usize, seed: u64, stream: u64) -> LowRankFactors {
    let mut rng = block_rng(seed, stream);
    let u = Matrix::from_fn(n, r, |_, _| rng.sample(StandardNormal));
    let v = Matrix::from_fn(m, r, |_, _| rng.sample(StandardNormal));
    LowRankFactors::new(u, v).unwrap()
}

#[test]
fn criterion_10_als_correctness() {
    let budget = OracleBudget::default();
    let opts = AlsOptions::default();
    let mut worst_rel: f64 = 0.0;
    let mut worst_increase = f64::NEG_INFINITY;
    let mut worst_endpoint: f64 = 0.0;
    let mut instances = 0;
    for r in [1, 2] {
        for seed in 0..10u64 {
            let mut rng = block_rng(seed, 40 + r as u64);
            let n = rng.random_range(r + 2..=8);
            let m = rng.random_range(r + 1..=7);
            let t: f64 = rng.random_range(0.05..0.95);
            let xc = random_factors(n, m, r, seed, r as u64);
            let xs = random_factors(n, m, r, seed, 10 + r as u64);
            let trace = als_merge(&xc, &xs, t, &opts).unwrap();
            for w in trace.objectives.windows(2) {
                worst_increase = worst_increase.max(w[1] - w[0]);
            }
            // Eckart–Young: min over rank r of ‖X − T‖² plus the constant
            // t(1−t)‖X_C − X_S‖² from expanding the weighted objective.
            let target = xc.dense() * (1.0 - t) + xs.dense() * t;
            let offset = t * (1.0 - t) * (xc.dense() - xs.dense()).norm_squared();
            let optimum = budget.svd_optimum(&target, r).unwrap() + offset;
            worst_rel = worst_rel.max((trace.final_objective() - optimum).abs() / optimum);

            for (tt, x) in [(0.0, &xc), (1.0, &xs)] {
                let end = als_merge(&xc, &xs, tt, &opts).unwrap();
                worst_endpoint = worst_endpoint.max((end.factors.dense() - x.dense()).norm());
            }
            instances += 1;
        }
    }
    report(
        10,
        "ALS correctness",
        worst_increase <= 1e-12 && worst_endpoint <= 1e-10 && worst_rel <= 1e-8,
        format!(
            "{instances} instances: max step increase {worst_increase:.3e} (<= 1e-12), endpoint error {worst_endpoint:.3e} (<= 1e-10), optimum gap {worst_rel:.3e} relative (<= 1e-8)"
        ),
    );
}

#[test]
fn criterion_11_performance_ordering() {
    let spec = SynthSpec::new(2048, 64, 0.05, 11).with_storage(Storage::Cayley);
    let rep = bench_merge(&spec, &[MergeMethod::Full, MergeMethod::Fast], 5, 0.6).unwrap();
    let full = rep.cell(MergeMethod::Full).unwrap().median();
    let fast = rep.cell(MergeMethod::Fast).unwrap().median();
    let phases = rep.phases.unwrap();
    report(
        11,
        "performance ordering",
        fast < full,
        format!(
            "n=2048 b=64: fast median {fast:.4}s, full median {full:.4}s, ratio {:.3}; geodesic share of full {:.0}%",
            fast / full,
            100.0 * phases.geodesic_share()
        ),
    );
}

#[test]
fn criterion_12_format_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut total = 0;
    let mut ok = 0;
    for (i, (n, b)) in [(4, 2), (8, 2), (8, 4), (12, 3), (16, 16), (64, 8)].into_iter().enumerate() {
        for storage in [Storage::Orthogonal, Storage::Cayley] {
            for seed in 0..3u64 {
                let a = random_adapter(&SynthSpec::new(n, b, 0.1, seed).with_storage(storage)).unwrap();
                let path = dir.path().join(format!("a{i}_{seed}_{storage}.json"));
                write_adapter(&a, &path).unwrap();
                let text = std::fs::read_to_string(&path).unwrap();
                let back = read_adapter(&path).unwrap();
                total += 1;
                if back == a && adapter_to_string(&back) == text && adapter_from_str(&text).unwrap() == a {
                    ok += 1;
                }
            }
        }
    }
    for r in [1, 2, 3] {
        for seed in 0..5u64 {
            let x = random_factors(7, 5, r, seed, 90);
            let path = dir.path().join(format!("lr{r}_{seed}.json"));
            write_lowrank(&x, &path).unwrap();
            let text = std::fs::read_to_string(&path).unwrap();
            let back = read_lowrank(&path).unwrap();
            total += 1;
            if back == x && lowrank_to_string(&back) == text && lowrank_from_str(&text).unwrap() == x {
                ok += 1;
            }
        }
    }
    // assembled matrices survive too, as a cross-check on block order
    let a = random_adapter(&SynthSpec::new(8, 2, 0.1, 3)).unwrap();
    let back = adapter_from_str(&adapter_to_string(&a)).unwrap();
    assert_eq!(assemble_dense(&a).unwrap(), assemble_dense(&back).unwrap());
    report(12, "format round trips", ok == total, format!("{ok}/{total} fixtures bitwise identical"));
}
