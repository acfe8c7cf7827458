//! Fits a ZCA filter on generated training vectors and compares the
//! covariance spectrum before and after whitening.

use nalgebra::DMatrix;
use ndarray::Array2;
use ssda_amc::siggen::{build_dataset, GenConfig};
use ssda_amc::whiten::{dataset_matrix, fit_zca, mean_and_covariance, DEFAULT_EPSILON};

fn spectrum(cov: &Array2<f64>) -> Vec<f64> {
    let d = cov.nrows();
    let mut eig: Vec<f64> = DMatrix::from_fn(d, d, |i, j| cov[[i, j]])
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

fn summary(label: &str, eig: &[f64]) {
    let picks: Vec<String> = [0, eig.len() / 4, eig.len() / 2, 3 * eig.len() / 4, eig.len() - 1]
        .iter()
        .map(|&i| format!("{:.3e}", eig[i]))
        .collect();
    println!(
        "{label:>9} eigenvalues (largest .. smallest): {}",
        picks.join("  ")
    );
}

fn main() -> ssda_amc::Result<()> {
    let cfg = GenConfig {
        train_vectors_per_mod: 500,
        test_vectors_total: 6,
        ..GenConfig::default()
    };
    let (train, _) = build_dataset(&cfg)?;
    let (_, raw_cov) = mean_and_covariance(dataset_matrix(&train).view());
    summary("raw", &spectrum(&raw_cov));

    for eps in [DEFAULT_EPSILON, 0.1, 1.0] {
        let filter = fit_zca(&train, eps)?;
        let (_, cov) = mean_and_covariance(filter.apply_dataset(&train)?.view());
        let off = cov
            .indexed_iter()
            .filter(|((i, j), _)| i != j)
            .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
        println!("eps {eps:e}: max |off-diagonal| {off:.2e}");
        summary("whitened", &spectrum(&cov));
    }
    Ok(())
}
