//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset:
//! `cargo test --release --test acceptance -- 2 4`.
//!
//! Full-scale models are cached under the cargo target tmp dir, keyed by the
//! complete config echoed in the model metadata, so reruns skip training.
//! Set `SSDA_ACCEPTANCE_RETRAIN=1` to ignore the cache.

mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng as _;
use ssda_amc::channel::{add_awgn, SnrTarget};
use ssda_amc::config::ExperimentConfig;
use ssda_amc::eval::{
    confusion, evaluate, evaluate_at_snr, noise_stream_index, snr_sweep, write_metrics_csv,
};
use ssda_amc::modelio::{load_model, read_model, save_model, write_dataset, write_model};
use ssda_amc::pipeline::{config_from_metadata, generate, train};
use ssda_amc::rng::{derived_rng, purpose, rng_from_seed};
use ssda_amc::siggen::{Dataset, ModulationFamily, NUM_FAMILIES};
use ssda_amc::stack::{ArchName, StackedNetwork};
use ssda_amc::whiten::fit_zca;

const GRADIENT_INSTANCES: u64 = 50;
const GRADIENT_TOL: f64 = 1e-4;
const GRADIENT_BUDGET: Duration = Duration::from_secs(60);

const WHITEN_SCALE: f64 = 0.1;
const WHITEN_OFF_DIAGONAL_TOL: f64 = 1e-3;
const WHITEN_EIGEN_RANGE: (f64, f64) = (0.95, 1.05);
const WHITEN_BUDGET: Duration = Duration::from_secs(60);

const CALIBRATION_TARGETS_DB: [f64; 6] = [-10.0, -5.0, 0.0, 5.0, 10.0, 20.0];
const CALIBRATION_TOL_DB: f64 = 0.1;

const METRIC_CASES: usize = 1000;
const METRIC_MAX_LEN: usize = 50;

const DESK_SCALE: f64 = 0.1;
const DESK_MIN_PCC: f64 = 0.90;
const DESK_BUDGET: Duration = Duration::from_secs(20 * 60);
/// Sparsity weights reported alongside the desk run; the verdict uses the default.
const DESK_BETA_SWEEP: [f64; 4] = [0.0, 1.0, 3.0, 10.0];

const FULL_MIN_CLEAN_PCC: f64 = 0.95;
const FULL_MIN_0DB_PCC: f64 = 0.75;
const FULL_BUDGET: Duration = Duration::from_secs(8 * 3600);

const ORDERING_SEEDS: [u64; 3] = [0, 1, 2];
const ORDERING_MARGIN: f64 = 0.05;

const CHANCE_SNR_DB: f64 = -60.0;
const CHANCE_TOL: f64 = 0.05;

const DEGRADATION_SLACK: f64 = 0.02;

const TRAIN_SECONDS_KEY: &str = "acceptance.train_seconds";

type Check<'a> = Box<dyn Fn() -> ssda_amc::Result<Verdict> + 'a>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Trains full-scale models once per (arch, seed) and shares them between
/// criteria.
struct FullScale {
    cache_dir: PathBuf,
    retrain: bool,
}

struct Trained {
    net: StackedNetwork,
    test: Dataset,
    train_time: Duration,
    cached: bool,
}

impl FullScale {
    fn new() -> Self {
        let cache_dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
        std::fs::create_dir_all(&cache_dir).expect("cache dir");
        Self {
            cache_dir,
            retrain: std::env::var_os("SSDA_ACCEPTANCE_RETRAIN").is_some(),
        }
    }

    fn config(arch: ArchName, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            arch,
            seed,
            ..ExperimentConfig::default()
        }
    }

    fn get(&self, arch: ArchName, seed: u64) -> ssda_amc::Result<Trained> {
        let cfg = Self::config(arch, seed);
        let (train_set, test) = generate(&cfg)?;
        let path = self.cache_dir.join(format!("{arch}_seed{seed}.ssda"));
        if !self.retrain {
            if let Ok(net) = load_model(&path) {
                let same_config = config_from_metadata(&net).is_ok_and(|c| c == cfg);
                let same_crate =
                    net.metadata.get("crate.version").map(String::as_str) == Some(env!("CARGO_PKG_VERSION"));
                let seconds = net
                    .metadata
                    .get(TRAIN_SECONDS_KEY)
                    .and_then(|s| s.parse::<f64>().ok());
                if let (true, true, Some(s)) = (same_config, same_crate, seconds) {
                    return Ok(Trained {
                        net,
                        test,
                        train_time: Duration::from_secs_f64(s),
                        cached: true,
                    });
                }
            }
        }
        eprintln!("training {arch} seed {seed} at full scale ...");
        let start = Instant::now();
        let mut net = train(&cfg, &train_set)?.network;
        let train_time = start.elapsed();
        net.metadata
            .insert(TRAIN_SECONDS_KEY.into(), train_time.as_secs_f64().to_string());
        save_model(&path, &net)?;
        Ok(Trained {
            net,
            test,
            train_time,
            cached: false,
        })
    }
}

fn snr(db: f64) -> SnrTarget {
    SnrTarget::new(db).expect("valid SNR")
}

fn c1_gradients() -> Verdict {
    let start = Instant::now();
    let layer = (0..GRADIENT_INSTANCES)
        .map(|i| common::layer_gradient_error(0xA11CE + i))
        .fold(0.0, f64::max);
    let network = (0..GRADIENT_INSTANCES)
        .map(|i| common::network_gradient_error(0xB0B + i))
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    verdict(
        layer < GRADIENT_TOL && network < GRADIENT_TOL && elapsed < GRADIENT_BUDGET,
        format!(
            "gradient check, {GRADIENT_INSTANCES}+{GRADIENT_INSTANCES} instances: max rel err layer {layer:.2e}, \
             network {network:.2e} (tol {GRADIENT_TOL:.0e}), {elapsed:.1?}"
        ),
    )
}

fn c2_whitening() -> ssda_amc::Result<Verdict> {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        scale: WHITEN_SCALE,
        ..ExperimentConfig::default()
    };
    let (train_set, _) = generate(&cfg)?;
    let filter = fit_zca(&train_set, cfg.whiten_epsilon)?;
    let x = filter.apply_dataset(&train_set)?;
    let n = x.nrows() as f64;
    let mean = x.mean_axis(ndarray::Axis(0)).expect("rows");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / n;
    let d = cov.nrows();
    let mut off = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                off = off.max(cov[[i, j]].abs());
            }
        }
    }
    let eig = DMatrix::from_fn(d, d, |i, j| cov[[i, j]]).symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let elapsed = start.elapsed();
    let (min_eig, max_eig) = WHITEN_EIGEN_RANGE;
    Ok(verdict(
        off < WHITEN_OFF_DIAGONAL_TOL && lo >= min_eig && hi <= max_eig && elapsed < WHITEN_BUDGET,
        format!(
            "whitening at scale {WHITEN_SCALE}, eps {}: max |off-diag| {off:.2e} (tol {WHITEN_OFF_DIAGONAL_TOL:.0e}), \
             eigenvalues [{lo:.4}, {hi:.4}] (want [{min_eig}, {max_eig}]), {elapsed:.1?}",
            cfg.whiten_epsilon
        ),
    ))
}

/// Mean square per real component, per family.
fn family_power(data: &Dataset, other: Option<&Dataset>) -> [f64; NUM_FAMILIES] {
    let mut sum = [0.0f64; NUM_FAMILIES];
    let mut count = [0usize; NUM_FAMILIES];
    for (i, v) in data.vectors.iter().enumerate() {
        let k = v.label.index();
        for (j, &s) in v.samples.iter().enumerate() {
            let e = match other {
                Some(o) => f64::from(o.vectors[i].samples[j]) - f64::from(s),
                None => f64::from(s),
            };
            sum[k] += e * e;
            count[k] += 1;
        }
    }
    std::array::from_fn(|k| sum[k] / count[k] as f64)
}

fn c3_calibration() -> ssda_amc::Result<Verdict> {
    let cfg = ExperimentConfig::default();
    let (_, test) = generate(&cfg)?;
    let signal = family_power(&test, None);
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for target in CALIBRATION_TARGETS_DB {
        let t = snr(target);
        let mut rng = derived_rng(cfg.seed, purpose::NOISE, noise_stream_index(t));
        let noisy = add_awgn(&test, t, &mut rng);
        let noise = family_power(&test, Some(&noisy));
        for k in 0..NUM_FAMILIES {
            let measured = 10.0 * (signal[k] / noise[k]).log10();
            let err = (measured - target).abs();
            if err > worst {
                worst = err;
                let fam = ModulationFamily::from_index(k).expect("family");
                worst_at = format!("{fam} at {target} dB measured {measured:.3}");
            }
        }
    }
    Ok(verdict(
        worst <= CALIBRATION_TOL_DB,
        format!(
            "AWGN calibration over {} vectors, targets {CALIBRATION_TARGETS_DB:?} dB: worst error {worst:.4} dB \
             ({worst_at}, tol {CALIBRATION_TOL_DB} dB)",
            test.len()
        ),
    ))
}

fn c4_metrics() -> Verdict {
    let mut rng = rng_from_seed(4);
    let mut failures = 0usize;
    let mut undefined = 0usize;
    for _ in 0..METRIC_CASES {
        let len = rng.random_range(1..=METRIC_MAX_LEN);
        let preds: Vec<usize> = (0..len).map(|_| rng.random_range(0..NUM_FAMILIES)).collect();
        let truths: Vec<usize> = (0..len).map(|_| rng.random_range(0..NUM_FAMILIES)).collect();
        let m = confusion(&preds, &truths).expect("valid labels");
        let brute = common::brute_force_confusion(&preds, &truths, NUM_FAMILIES);
        let mut ok = m.counts() == brute.as_slice();
        let mut sens = Vec::new();
        for k in 0..NUM_FAMILIES {
            let row: u64 = brute[k].iter().sum();
            let col: u64 = brute.iter().map(|r| r[k]).sum();
            let want_prec = (col > 0).then(|| brute[k][k] as f64 / col as f64);
            ok &= m.precision(k) == want_prec;
            match (m.sensitivity(k), row) {
                (Err(_), 0) => {}
                (Ok(s), r) if r > 0 => {
                    ok &= s == brute[k][k] as f64 / r as f64;
                    sens.push(s);
                }
                _ => ok = false,
            }
        }
        let correct = preds.iter().zip(&truths).filter(|(p, t)| p == t).count();
        ok &= m.accuracy() == Some(correct as f64 / len as f64);
        match m.pcc() {
            Ok(p) => ok &= sens.len() == NUM_FAMILIES && p == sens.iter().sum::<f64>() / NUM_FAMILIES as f64,
            Err(_) => {
                ok &= sens.len() < NUM_FAMILIES;
                undefined += 1;
            }
        }
        failures += usize::from(!ok);
    }
    verdict(
        failures == 0,
        format!(
            "metric oracles on {METRIC_CASES} random cases (length <= {METRIC_MAX_LEN}): {failures} mismatches, \
             {undefined} cases with an absent class reported undefined"
        ),
    )
}

fn c5_desk() -> ssda_amc::Result<Verdict> {
    let cfg = ExperimentConfig {
        scale: DESK_SCALE,
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let (train_set, test) = generate(&cfg)?;
    let net = train(&cfg, &train_set)?.network;
    let elapsed = start.elapsed();
    let pcc = evaluate(&net, &test, None)?.pcc;
    let widths: Vec<String> = net.arch.layers.iter().map(|l| l.hidden.to_string()).collect();
    let mut sweep = Vec::new();
    for beta in DESK_BETA_SWEEP {
        let mut c = cfg.clone();
        c.pretrain.sparsity_weight = beta;
        let p = evaluate(&train(&c, &train_set)?.network, &test, None)?.pcc;
        sweep.push(format!("beta {beta}: {p:.4}"));
    }
    Ok(verdict(
        pcc >= DESK_MIN_PCC && elapsed <= DESK_BUDGET,
        format!(
            "desk scale {DESK_SCALE} preset D ({}): clean P_cc {pcc:.4} (want >= {DESK_MIN_PCC}), {elapsed:.1?} \
             (budget {DESK_BUDGET:?}); sparsity sweep {}",
            widths.join("/"),
            sweep.join(", ")
        ),
    ))
}

fn c6_full(full: &FullScale) -> ssda_amc::Result<Verdict> {
    let d = full.get(ArchName::D, 0)?;
    let clean = evaluate(&d.net, &d.test, None)?.pcc;
    let zero = evaluate_at_snr(&d.net, &d.test, snr(0.0), 0)?.pcc;
    Ok(verdict(
        clean >= FULL_MIN_CLEAN_PCC && zero >= FULL_MIN_0DB_PCC && d.train_time <= FULL_BUDGET,
        format!(
            "full scale preset D seed 0: clean P_cc {clean:.4} (want >= {FULL_MIN_CLEAN_PCC}), 0 dB P_cc {zero:.4} \
             (want >= {FULL_MIN_0DB_PCC}), trained in {:.0?}{}",
            d.train_time,
            if d.cached { " (cached)" } else { "" }
        ),
    ))
}

fn c7_ordering(full: &FullScale) -> ssda_amc::Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in ORDERING_SEEDS {
        let d = full.get(ArchName::D, seed)?;
        let a = full.get(ArchName::A, seed)?;
        let pd = evaluate_at_snr(&d.net, &d.test, snr(0.0), seed)?.pcc;
        let pa = evaluate_at_snr(&a.net, &a.test, snr(0.0), seed)?.pcc;
        pass &= pd - pa >= ORDERING_MARGIN;
        parts.push(format!("seed {seed}: D {pd:.4} A {pa:.4}"));
    }
    Ok(verdict(
        pass,
        format!(
            "0 dB regularization ordering, D - A >= {ORDERING_MARGIN} on every seed: {}",
            parts.join("; ")
        ),
    ))
}

fn c8_chance(full: &FullScale) -> ssda_amc::Result<Verdict> {
    let d = full.get(ArchName::D, 0)?;
    let pcc = evaluate_at_snr(&d.net, &d.test, snr(CHANCE_SNR_DB), 0)?.pcc;
    let chance = 1.0 / NUM_FAMILIES as f64;
    Ok(verdict(
        (pcc - chance).abs() <= CHANCE_TOL,
        format!("P_cc at {CHANCE_SNR_DB} dB {pcc:.4} (want {chance:.4} +/- {CHANCE_TOL})"),
    ))
}

fn c9_degradation(full: &FullScale) -> ssda_amc::Result<Verdict> {
    let d = full.get(ArchName::D, 0)?;
    let grid: Vec<SnrTarget> = ExperimentConfig::default()
        .snr_grid
        .into_iter()
        .map(snr)
        .collect();
    let sweep = snr_sweep(&d.net, &d.test, &grid, 0)?;
    let pcc: Vec<f64> = sweep.points.iter().map(|p| p.pcc).collect();
    let worst = pcc
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let curve: Vec<String> = pcc.iter().map(|p| format!("{p:.3}")).collect();
    Ok(verdict(
        worst <= DEGRADATION_SLACK,
        format!(
            "P_cc over {} dB .. {} dB: largest rise between steps {worst:+.4} (slack {DEGRADATION_SLACK}); curve [{}]",
            grid[0].db(),
            grid[grid.len() - 1].db(),
            curve.join(", ")
        ),
    ))
}

fn c10_determinism() -> ssda_amc::Result<Verdict> {
    let cfg = ExperimentConfig::from_text(
        "scale=0.01\nhidden=16/16\npretrain_epochs=2\nfinetune_epochs=2\nsnr_grid=20:-20:10\nseed=10\n",
    )?;
    let grid: Vec<SnrTarget> = cfg.snr_grid.iter().map(|&s| snr(s)).collect();
    let run = || -> ssda_amc::Result<[Vec<u8>; 4]> {
        let (train_set, test) = generate(&cfg)?;
        let (mut train_bytes, mut test_bytes, mut model, mut csv) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        write_dataset(&mut train_bytes, &train_set)?;
        write_dataset(&mut test_bytes, &test)?;
        let net = train(&cfg, &train_set)?.network;
        write_model(&mut model, &net)?;
        write_metrics_csv(&mut csv, &snr_sweep(&net, &test, &grid, cfg.seed)?.points)?;
        Ok([train_bytes, test_bytes, model, csv])
    };
    let a = run()?;
    let b = run()?;
    let names = ["train set", "test set", "model", "sweep CSV"];
    let differing: Vec<&str> = names
        .iter()
        .zip(a.iter().zip(&b))
        .filter(|(_, (x, y))| x != y)
        .map(|(n, _)| *n)
        .collect();

    let net = read_model(a[2].as_slice())?;
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("m.ssda");
    save_model(&path, &net)?;
    let round_trip_exact = std::fs::read(&path).expect("saved model") == a[2] && load_model(&path)? == net;
    Ok(verdict(
        differing.is_empty() && round_trip_exact,
        format!(
            "two identical runs: {} differing artifacts{}; model save/load bit-exact: {round_trip_exact}",
            differing.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!(" ({})", differing.join(", "))
            }
        ),
    ))
}

fn main() {
    let selected: BTreeSet<u32> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .filter_map(|a| a.parse().ok())
        .collect();
    let wanted = |n: u32| selected.is_empty() || selected.contains(&n);
    let full = FullScale::new();

    let criteria: Vec<(u32, Check)> = vec![
        (1, Box::new(|| Ok(c1_gradients()))),
        (2, Box::new(c2_whitening)),
        (3, Box::new(c3_calibration)),
        (4, Box::new(|| Ok(c4_metrics()))),
        (5, Box::new(c5_desk)),
        (6, Box::new(|| c6_full(&full))),
        (7, Box::new(|| c7_ordering(&full))),
        (8, Box::new(|| c8_chance(&full))),
        (9, Box::new(|| c9_degradation(&full))),
        (10, Box::new(c10_determinism)),
    ];
    let mut failed = Vec::new();
    for (n, check) in &criteria {
        if !wanted(*n) {
            continue;
        }
        let v = check().unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        println!("[{}] {n:>2} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed.push(*n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
