//! Shared fixtures for the cascade benchmarks.

use cascadefin::{generate_synthetic, BankAssetNetwork, GroundTruthLabels, ReferenceCascade, SyntheticConfig};

/// Seeded synthetic network with reference-cascade labels.
pub fn fixture(banks: usize) -> (BankAssetNetwork, GroundTruthLabels) {
    let config = SyntheticConfig {
        banks,
        reference: Some(ReferenceCascade {
            asset: 0,
            p: 0.6,
            alpha: 0.05,
            eta: 0.1,
            seed: 7,
        }),
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&config, 11).expect("valid synthetic config");
    (data.network, data.labels.expect("reference labels"))
}
