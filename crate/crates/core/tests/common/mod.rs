#![allow(dead_code)]

use fedcs::bpdn::SolverOptions;
use fedcs::fl::{HyperParams, Scheme};
use fedcs::ml::{Activation, ModelSpec, PartitionMode, SyntheticSpec};
use fedcs::sim::{DataSource, ExperimentConfig, OutputFormat, SensingSpec};

/// A few-second federated task: 3 classes of 4×4 images, 12 clients.
pub fn toy_config(scheme: Scheme, ratio: f64) -> ExperimentConfig {
    ExperimentConfig {
        name: None,
        scheme,
        hyper: HyperParams {
            eta: 0.2,
            eta_g: 1.0,
            rho: 0.9,
            sensitivity: 1.0,
            sigma: 0.0,
            client_fraction: 0.5,
            rounds: 4,
            local_epochs: 2,
            batch_size: 5,
            delta: 1e-5,
            weighting: None,
            lambda: None,
            masking: true,
            frac_bits: 20,
        },
        sensing: SensingSpec { ratio, chunks: 1, shuffle_seed: None },
        solver: SolverOptions { max_iters: 100, ..Default::default() },
        model: ModelSpec::mlp(16, &[8], Activation::Relu, 3).unwrap(),
        data: DataSource::Synthetic(SyntheticSpec {
            classes: 3,
            height: 4,
            width: 4,
            train: 240,
            test: 90,
            blobs: 2,
            seed: 3,
            ..Default::default()
        }),
        clients: 12,
        partition: PartitionMode::Iid,
        downsample: false,
        guarantee_class: None,
        master_seed: 17,
        output: None,
        format: OutputFormat::Csv,
        eval_every: 1,
        timing: false,
    }
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
