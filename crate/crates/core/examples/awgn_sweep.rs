//! Trains a small preset-D network and sweeps its P_cc over an SNR grid,
//! writing the per-family precision/sensitivity table as CSV.
//!
//! ```text
//! cargo run --release --example awgn_sweep -- sweep.csv
//! ```

use std::fs::File;
use std::io::BufWriter;

use ssda_amc::channel::{add_awgn_with_report, SnrTarget};
use ssda_amc::config::{parse_snr_grid, ExperimentConfig};
use ssda_amc::eval::{noise_stream_index, snr_sweep, write_metrics_csv};
use ssda_amc::pipeline::{generate, train};
use ssda_amc::rng::{derived_rng, purpose};
use ssda_amc::siggen::ModulationFamily;

fn main() -> ssda_amc::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "sweep.csv".into());
    let cfg = ExperimentConfig {
        scale: 0.05,
        ..ExperimentConfig::default()
    };
    let (train_set, test) = generate(&cfg)?;
    let net = train(&cfg, &train_set)?.network;

    // The channel on its own: calibrated noise and the SNR it actually produced.
    let target = SnrTarget::new(0.0)?;
    let mut rng = derived_rng(cfg.seed, purpose::NOISE, noise_stream_index(target));
    let (_, report) = add_awgn_with_report(&test, target, &mut rng);
    for family in ModulationFamily::ALL {
        if let Some(db) = report.measured_snr_db(family) {
            println!("{family:>6} measured {db:+.3} dB at target 0 dB");
        }
    }

    let mut grid = parse_snr_grid("20:-20:5")?;
    grid.push(-60.0);
    let grid: Vec<SnrTarget> = grid.into_iter().map(SnrTarget::new).collect::<Result<_, _>>()?;
    let sweep = snr_sweep(&net, &test, &grid, cfg.seed)?;
    for p in &sweep.points {
        println!("{:>6.1} dB  P_cc {:.4}", p.snr_db.unwrap_or(f64::INFINITY), p.pcc);
    }
    write_metrics_csv(BufWriter::new(File::create(&out)?), &sweep.points)?;
    println!("wrote {out}");
    Ok(())
}
