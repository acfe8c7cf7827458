//! Saves and reloads a dataset and a trained model, checks that both round
//! trips are bit-exact and prints the stored model metadata.

use ssda_amc::config::ExperimentConfig;
use ssda_amc::modelio::{load_dataset, load_model, save_dataset, save_model};
use ssda_amc::pipeline::{config_from_metadata, generate, train};

fn main() -> ssda_amc::Result<()> {
    let dir = std::env::temp_dir().join(format!("ssda-persistence-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let cfg = ExperimentConfig::from_text("scale=0.01\narch=C\nhidden=16/16\nseed=3\n")?;
    let (train_set, test) = generate(&cfg)?;
    let net = train(&cfg, &train_set)?.network;

    let data_path = dir.join("test.iqd");
    let model_path = dir.join("model.ssda");
    save_dataset(&data_path, &test)?;
    save_model(&model_path, &net)?;

    let test_back = load_dataset(&data_path)?;
    let net_back = load_model(&model_path)?;
    assert_eq!(test_back.vectors, test.vectors);
    assert_eq!(net_back, net);

    let first = std::fs::read(&model_path)?;
    save_model(&model_path, &net_back)?;
    assert_eq!(std::fs::read(&model_path)?, first);
    println!(
        "dataset {} bytes, model {} bytes, both round trips exact",
        std::fs::metadata(&data_path)?.len(),
        first.len()
    );

    for (k, v) in net_back
        .metadata
        .iter()
        .filter(|(k, _)| !k.starts_with("config."))
    {
        println!("  {k}: {v}");
    }
    let recovered = config_from_metadata(&net_back)?;
    assert_eq!(recovered, cfg);
    println!(
        "config recovered from the model: arch {} seed {}",
        recovered.arch, recovered.seed
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
