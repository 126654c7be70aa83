//! Seeded synthetic bank-asset networks for desk-scale experiments.
//!
//! Bank sizes are log-normal, portfolio weights Dirichlet around configured
//! mean weights, leverage `L_i / B_i` uniform. Optional ground-truth labels
//! come only from a reference cascade run on the generated network.

use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::cascade::{run_cascade, CascadeParams};
use crate::error::{Error, Result};
use crate::ingest::GroundTruthLabels;
use crate::network::{asset_categories, BalanceSheet, BankAssetNetwork, CANONICAL_ASSETS};
use crate::rng::stream_rng;

/// Stream reserved for network generation; cascades use their own streams.
const GENERATOR_STREAM: u64 = u64::MAX;

/// Catch-all category that absorbs the part of the 2007 average weights
/// not attributed to any of the 13 categories ("All other loans").
const RESIDUAL_ASSET: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCascade {
    pub asset: usize,
    pub p: f64,
    pub alpha: f64,
    pub eta: f64,
    pub seed: u64,
}

impl ReferenceCascade {
    pub fn params(&self) -> CascadeParams {
        CascadeParams::single(self.asset, self.p, self.alpha, self.eta).with_seed(self.seed)
    }
}

/// Distribution of the liabilities-to-assets ratio `L_i / B_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Leverage {
    Uniform {
        min: f64,
        max: f64,
    },
    /// Equity ratio `1 - L_i / B_i` normal, redrawn until inside `[min, max]`.
    NormalEquity {
        mean: f64,
        sd: f64,
        min: f64,
        max: f64,
    },
}

impl Default for Leverage {
    fn default() -> Self {
        Leverage::Uniform { min: 0.85, max: 0.98 }
    }
}

enum LeverageSampler {
    Uniform(Uniform<f64>),
    NormalEquity { normal: Normal<f64>, min: f64, max: f64 },
}

impl LeverageSampler {
    fn new(leverage: Leverage) -> Result<Self> {
        match leverage {
            Leverage::Uniform { min, max } => {
                if !(min >= 0.0 && min <= max) {
                    return Err(invalid("leverage_min", min));
                }
                Ok(LeverageSampler::Uniform(
                    Uniform::new_inclusive(min, max).map_err(|_| invalid("leverage_max", max))?,
                ))
            }
            Leverage::NormalEquity { mean, sd, min, max } => {
                if !(min < max && min <= mean && mean <= max && min > -1.0 && max <= 1.0) {
                    return Err(invalid("equity_mean", mean));
                }
                let normal = Normal::new(mean, sd).map_err(|_| invalid("equity_sd", sd))?;
                Ok(LeverageSampler::NormalEquity { normal, min, max })
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LeverageSampler::Uniform(u) => u.sample(rng),
            LeverageSampler::NormalEquity { normal, min, max } => loop {
                let e = normal.sample(rng);
                if (*min..=*max).contains(&e) {
                    break 1.0 - e;
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub banks: usize,
    pub assets: usize,
    /// Thousands of dollars.
    pub median_total_assets: f64,
    pub size_sigma: f64,
    /// Target mean weight per asset; `None` selects [`default_mean_weights`].
    pub mean_weights: Option<Vec<f64>>,
    /// Dirichlet concentration; larger values give more similar portfolios.
    pub concentration: f64,
    pub leverage: Leverage,
    /// Probability that a bank holds none of a given asset.
    pub sparsity: f64,
    pub reference: Option<ReferenceCascade>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            banks: 1000,
            assets: CANONICAL_ASSETS.len(),
            median_total_assets: 100_000.0,
            size_sigma: 1.0,
            mean_weights: None,
            concentration: 20.0,
            leverage: Leverage::default(),
            sparsity: 0.0,
            reference: None,
        }
    }
}

/// 2007 population-average weights for the 13-asset schema with the unattributed
/// remainder (they sum to 0.863) assigned to "All other loans"; uniform for
/// any other asset count.
pub fn default_mean_weights(assets: usize) -> Vec<f64> {
    if assets == CANONICAL_ASSETS.len() {
        let mut w: Vec<f64> = CANONICAL_ASSETS.iter().map(|(_, _, w)| *w).collect();
        let sum: f64 = w.iter().sum();
        w[RESIDUAL_ASSET] += 1.0 - sum;
        w
    } else {
        vec![1.0 / assets as f64; assets]
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub network: BankAssetNetwork,
    pub labels: Option<GroundTruthLabels>,
    pub mean_weights: Vec<f64>,
    pub warnings: Vec<String>,
}

fn invalid(name: &'static str, value: f64) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason: "out of range for synthetic generation",
    }
}

pub fn generate_synthetic(config: &SyntheticConfig, seed: u64) -> Result<SyntheticDataset> {
    let m = config.assets;
    if m == 0 {
        return Err(invalid("assets", 0.0));
    }
    if !(config.median_total_assets > 0.0) {
        return Err(invalid("median_total_assets", config.median_total_assets));
    }
    if !(config.size_sigma >= 0.0) {
        return Err(invalid("size_sigma", config.size_sigma));
    }
    if !(config.concentration > 0.0) {
        return Err(invalid("concentration", config.concentration));
    }
    if !(0.0..=1.0).contains(&config.sparsity) {
        return Err(invalid("sparsity", config.sparsity));
    }

    let mut warnings = Vec::new();
    let mut mean = config.mean_weights.clone().unwrap_or_else(|| default_mean_weights(m));
    if mean.len() != m {
        return Err(Error::Domain(format!(
            "{} mean weights given for {m} assets",
            mean.len()
        )));
    }
    if mean.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::Domain("mean weights must be non-negative".into()));
    }
    let sum: f64 = mean.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Domain("mean weights sum to zero".into()));
    }
    if (sum - 1.0).abs() > 1e-9 {
        let msg = format!("mean weights sum to {sum}; renormalized");
        log::warn!("{msg}");
        warnings.push(msg);
        mean.iter_mut().for_each(|w| *w /= sum);
    }

    let mut rng = stream_rng(seed, GENERATOR_STREAM);
    let size = LogNormal::new(config.median_total_assets.ln(), config.size_sigma)
        .map_err(|_| invalid("size_sigma", config.size_sigma))?;
    let leverage = LeverageSampler::new(config.leverage)?;
    let gammas: Vec<Option<Gamma<f64>>> = mean
        .iter()
        .map(|&w| (w > 0.0).then(|| Gamma::new(config.concentration * w, 1.0).expect("positive shape")))
        .collect();

    let mut banks = Vec::with_capacity(config.banks);
    let mut raw = vec![0.0; m];
    for i in 0..config.banks {
        let total = size.sample(&mut rng);
        for (r, g) in raw.iter_mut().zip(&gammas) {
            *r = g.as_ref().map_or(0.0, |g| g.sample(&mut rng));
        }
        if config.sparsity > 0.0 {
            let keep = raw
                .iter()
                .enumerate()
                .fold(0, |best, (k, &v)| if v > raw[best] { k } else { best });
            for (k, r) in raw.iter_mut().enumerate() {
                if k != keep && rng.random::<f64>() < config.sparsity {
                    *r = 0.0;
                }
            }
        }
        let norm: f64 = raw.iter().sum();
        let holdings: Vec<f64> = if norm > 0.0 {
            raw.iter().map(|r| total * r / norm).collect()
        } else {
            mean.iter().map(|w| total * w).collect()
        };
        let ratio = leverage.sample(&mut rng);
        let mut sheet = BalanceSheet::from_holdings(format!("bank_{i:05}"), holdings, 0.0);
        sheet.total_liabilities = sheet.total_assets * ratio;
        sheet.equity = sheet.total_assets - sheet.total_liabilities;
        banks.push(sheet);
    }

    let network = BankAssetNetwork::new(asset_categories(m), banks)?;
    let labels = match &config.reference {
        Some(reference) => {
            let result = run_cascade(&network, &reference.params(), None)?;
            let ids = result
                .fates
                .iter()
                .zip(network.banks())
                .filter(|(f, _)| f.failed_by_shock())
                .map(|(_, b)| b.bank_id.clone());
            Some(GroundTruthLabels::from_ids(ids))
        }
        None => None,
    };

    Ok(SyntheticDataset {
        network,
        labels,
        mean_weights: mean,
        warnings,
    })
}
