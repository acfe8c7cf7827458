//! Generates a small labeled train/test pair, prints per-family statistics and
//! writes both splits as IQDS files with `.meta` sidecars.
//!
//! ```text
//! cargo run --release --example generate_dataset -- out_dir
//! ```

use std::path::PathBuf;

use ssda_amc::modelio::{load_dataset, save_dataset, sidecar_path, write_kv_file};
use ssda_amc::siggen::{build_dataset, modulate, payload_bytes_for, GenConfig, ModulationFamily};

fn main() -> ssda_amc::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "out/example_data".into()),
    );
    std::fs::create_dir_all(&out)?;

    let cfg = GenConfig {
        train_vectors_per_mod: 200,
        test_vectors_total: 600,
        seed: 7,
        ..GenConfig::default()
    };

    // One modulator call on its own: the payload size needed for 100 samples.
    let bytes = payload_bytes_for(ModulationFamily::Dqpsk, cfg.samples_per_vector, &cfg);
    let stream = modulate(ModulationFamily::Dqpsk, &vec![0xA5; bytes], &cfg)?;
    println!("DQPSK: {bytes} payload bytes -> {} complex samples", stream.len());

    let (train, test) = build_dataset(&cfg)?;
    println!(
        "{} train / {} test vectors of {} reals",
        train.len(),
        test.len(),
        train.vector_len
    );
    for family in ModulationFamily::ALL {
        let vectors: Vec<_> = train.family(family).collect();
        let power = vectors.iter().map(|v| v.power()).sum::<f64>() / vectors.len() as f64;
        println!(
            "  {family:>6}: {:>4} vectors, mean power {power:.4}",
            vectors.len()
        );
    }

    let train_path = out.join("train.iqd");
    save_dataset(&train_path, &train)?;
    write_kv_file(&sidecar_path(&train_path), [("split", "train")])?;
    save_dataset(out.join("test.iqd"), &test)?;
    let back = load_dataset(&train_path)?;
    assert_eq!(back, train);
    println!(
        "wrote {} (split {:?} read back from the sidecar)",
        train_path.display(),
        back.split
    );
    Ok(())
}
