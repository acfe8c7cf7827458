//! Generates data, trains a preset network and reports clean and noisy P_cc.
//!
//! Arguments are config `key=value` pairs applied over the defaults, e.g.
//!
//! ```text
//! cargo run --release --example train_classifier -- scale=0.1 arch=D
//! ```

use std::time::Instant;

use ssda_amc::channel::SnrTarget;
use ssda_amc::config::ExperimentConfig;
use ssda_amc::eval::{evaluate, evaluate_at_snr};
use ssda_amc::pipeline::{generate, train};
use ssda_amc::siggen::ModulationFamily;

fn main() -> ssda_amc::Result<()> {
    let mut cfg = ExperimentConfig {
        scale: 0.1,
        ..ExperimentConfig::default()
    };
    for arg in std::env::args().skip(1) {
        let (k, v) = arg
            .split_once('=')
            .ok_or_else(|| ssda_amc::Error::Config(format!("expected key=value, got {arg:?}")))?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    let arch = cfg.architecture();
    let widths: Vec<String> = arch.layers.iter().map(|l| l.hidden.to_string()).collect();
    println!(
        "arch {} hidden {} scale {}",
        arch.name,
        widths.join("/"),
        cfg.scale
    );

    let start = Instant::now();
    let (train_set, test_set) = generate(&cfg)?;
    println!("{} train / {} test vectors", train_set.len(), test_set.len());
    let outcome = train(&cfg, &train_set)?;
    for (i, report) in outcome.pretrain.iter().enumerate() {
        println!(
            "pretrain layer {} final cost {:.4}",
            i + 1,
            report.epoch_costs.last().unwrap_or(&f64::NAN)
        );
    }
    println!(
        "finetune final NLL {:.4}",
        outcome.finetune.epoch_nll.last().unwrap_or(&f64::NAN)
    );
    println!("trained in {:.1?}", start.elapsed());

    let net = &outcome.network;
    println!("train P_cc {:.4}", evaluate(net, &train_set, None)?.pcc);
    let clean = evaluate(net, &test_set, None)?;
    println!("clean P_cc {:.4}", clean.pcc);
    for snr in [20.0, 10.0, 5.0, 0.0, -10.0, -60.0] {
        let point = evaluate_at_snr(net, &test_set, SnrTarget::new(snr)?, cfg.seed)?;
        println!("{snr:>5} dB P_cc {:.4}", point.pcc);
    }
    println!("clean confusion (rows true, columns predicted):");
    for (k, row) in clean.confusion.counts().iter().enumerate() {
        let name = ModulationFamily::from_index(k).map_or("?".into(), |f| f.to_string());
        println!("  {name:>6} {row:?}");
    }
    Ok(())
}
