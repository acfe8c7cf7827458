//! Pretrains one sparse denoising autoencoder layer on whitened vectors and
//! prints the per-epoch cost together with the held-out monitoring cost.

use ssda_amc::rng::{derived_rng, purpose};
use ssda_amc::sda::{pretrain_layer, CorruptionSpec, PretrainConfig, SparsitySpec};
use ssda_amc::siggen::{build_dataset, GenConfig};
use ssda_amc::whiten::{fit_zca, DEFAULT_EPSILON};

fn main() -> ssda_amc::Result<()> {
    let gen = GenConfig {
        train_vectors_per_mod: 500,
        test_vectors_total: 6,
        ..GenConfig::default()
    };
    let (train, _) = build_dataset(&gen)?;
    let x = fit_zca(&train, DEFAULT_EPSILON)?.apply_dataset(&train)?;

    let cfg = PretrainConfig {
        epochs: 10,
        corruption: CorruptionSpec::new(0.2)?,
        sparsity: SparsitySpec::new(0.05, 3.0)?,
        ..PretrainConfig::default()
    };
    let mut rng = derived_rng(gen.seed, purpose::INIT, 0);
    let (layer, report) = pretrain_layer(x.view(), 64, &cfg, &mut rng)?;

    println!("layer {} -> {}", layer.visible(), layer.hidden());
    println!("monitor cost before training {:.4}", report.monitor_costs[0]);
    for (epoch, (cost, monitor)) in report
        .epoch_costs
        .iter()
        .zip(&report.monitor_costs[1..])
        .enumerate()
    {
        println!("epoch {:>2}: train {cost:.4}  monitor {monitor:.4}", epoch + 1);
    }

    let codes = layer.encode_rows(x.view())?;
    let active = codes.iter().filter(|&&y| y > 0.0).count() as f64 / codes.len() as f64;
    println!("fraction of positive hidden activations {active:.3}");
    Ok(())
}
