//! Trains a small stacked network and exports the receptive fields of its
//! first two layers as CSV and as a PGM tile image.
//!
//! ```text
//! cargo run --release --example receptive_fields -- out/rf
//! ```

use ssda_amc::config::ExperimentConfig;
use ssda_amc::modelio::{export_receptive_fields, receptive_fields};
use ssda_amc::pipeline::{generate, train};

fn main() -> ssda_amc::Result<()> {
    let prefix = std::env::args().nth(1).unwrap_or_else(|| "out/rf".into());
    if let Some(dir) = std::path::Path::new(&prefix).parent() {
        std::fs::create_dir_all(dir)?;
    }
    let cfg = ExperimentConfig::from_text("scale=0.05\nhidden=36/16\nfinetune_epochs=5\n")?;
    let (train_set, _) = generate(&cfg)?;
    let net = train(&cfg, &train_set)?.network;

    for layer in 1..=net.layers.len() {
        let fields = receptive_fields(&net, layer)?;
        let peak = fields.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let (csv, pgm) = export_receptive_fields(&net, layer, &prefix)?;
        println!(
            "layer {layer}: {} fields of {} inputs, peak |w| {peak:.3} -> {}, {}",
            fields.nrows(),
            fields.ncols(),
            csv.display(),
            pgm.display()
        );
    }
    Ok(())
}
