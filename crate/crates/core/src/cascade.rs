//! Shock, distress-barrier and fire-sale cascade on a [`BankAssetNetwork`].
//!
//! A run proceeds as:
//!
//! 1. round 0: banks already insolvent before any shock are removed
//!    (`Failed { round: 0 }`) without triggering fire sales;
//! 2. each shocked asset `m` has its price and market value scaled by `p_m`;
//! 3. rounds `k = 1, 2, ...`: every alive bank draws a fresh `r ~ U[0, η]`
//!    and fails iff `B_i < (1 - r) L_i`, all banks judged against the same
//!    pre-round prices; failures of the round are aggregated into one
//!    fire-sale price update per asset;
//! 4. stop at the first round without failures.
//!
//! Failed banks are frozen: their holdings are excluded from every later
//! sum. Liabilities never change.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::GroundTruthLabels;
use crate::network::BankAssetNetwork;
use crate::rng::{stream_rng, CascadeRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    /// Post-shock value multiplier per shocked asset.
    pub shocks: BTreeMap<usize, f64>,
    pub eta: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Run id within `seed`; selects the random stream.
    pub stream: u64,
    /// Defaults to `10 * N` when unset.
    pub max_rounds: Option<usize>,
}

impl CascadeParams {
    pub fn single(asset: usize, p: f64, alpha: f64, eta: f64) -> Self {
        CascadeParams {
            shocks: BTreeMap::from([(asset, p)]),
            eta,
            alpha,
            seed: 0,
            stream: 0,
            max_rounds: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    /// The shock multiplier when exactly one asset is shocked.
    pub fn p(&self) -> Option<f64> {
        match self.shocks.len() {
            1 => self.shocks.values().next().copied(),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &p in self.shocks.values() {
            check_range("p", p, 0.0, 1.0)?;
        }
        check_range("eta", self.eta, 0.0, 0.5)?;
        check_range("alpha", self.alpha, 0.0, 1.0)?;
        Ok(())
    }

    fn validate_for(&self, network: &BankAssetNetwork) -> Result<()> {
        self.validate()?;
        for &asset in self.shocks.keys() {
            network.check_asset(asset)?;
        }
        Ok(())
    }
}

fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if !(lo..=hi).contains(&value) {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "out of range",
        });
    }
    Ok(())
}

/// Failure probability of a bank with total assets `assets` and liabilities
/// `liabilities` under a barrier `(1 - r) L`, `r ~ U[0, η]`.
pub fn failure_probability(assets: f64, liabilities: f64, eta: f64) -> Result<f64> {
    if assets < 0.0 || liabilities < 0.0 || eta < 0.0 {
        return Err(Error::Domain(format!(
            "failure probability needs non-negative inputs (B={assets}, L={liabilities}, eta={eta})"
        )));
    }
    if assets >= liabilities {
        return Ok(0.0);
    }
    if assets <= (1.0 - eta) * liabilities {
        return Ok(1.0);
    }
    Ok((liabilities - assets) / (eta * liabilities))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Fate {
    Survived,
    Failed { round: usize },
}

impl Fate {
    pub fn failed_round(self) -> Option<usize> {
        match self {
            Fate::Survived => None,
            Fate::Failed { round } => Some(round),
        }
    }

    /// Failed after the shock (round ≥ 1).
    pub fn failed_by_shock(self) -> bool {
        matches!(self, Fate::Failed { round } if round >= 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub converged: bool,
    /// `(round, asset)` pairs where the fire-sale factor was clamped at 0.
    pub clamped: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

/// Working state of one run between rounds.
#[derive(Debug, Clone)]
pub struct RoundState<'a> {
    network: &'a BankAssetNetwork,
    round: usize,
    alive: Vec<bool>,
    holdings: Vec<f64>,
    price_index: Vec<f64>,
    market_value: Vec<f64>,
    draws: Vec<f64>,
    totals: Vec<f64>,
}

impl<'a> RoundState<'a> {
    pub fn new(network: &'a BankAssetNetwork) -> Self {
        let n = network.bank_count();
        RoundState {
            network,
            round: 0,
            alive: vec![true; n],
            holdings: network.holdings_matrix().to_vec(),
            price_index: vec![1.0; network.asset_count()],
            market_value: network.market_value().to_vec(),
            draws: vec![0.0; n],
            totals: vec![0.0; n],
        }
    }

    pub fn network(&self) -> &'a BankAssetNetwork {
        self.network
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn alive(&self) -> &[bool] {
        &self.alive
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn price_index(&self) -> &[f64] {
        &self.price_index
    }

    pub fn market_value(&self) -> &[f64] {
        &self.market_value
    }

    pub fn holding(&self, bank: usize, asset: usize) -> f64 {
        self.holdings[bank * self.network.asset_count() + asset]
    }

    /// Barrier draws `r_i` of the most recent evaluation (0 for banks that
    /// were not alive).
    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    /// `B_i` as a sum of current holdings, ascending asset order.
    pub fn bank_total(&self, bank: usize) -> f64 {
        let m = self.network.asset_count();
        self.holdings[bank * m..(bank + 1) * m]
            .iter()
            .fold(0.0, |acc, h| acc + h)
    }

    /// Scales each shocked asset's price, market value and every alive
    /// holding by its multiplier. Returns warnings for assets nobody holds.
    pub fn apply_shock(&mut self, shocks: &BTreeMap<usize, f64>) -> Vec<String> {
        let m = self.network.asset_count();
        let mut warnings = Vec::new();
        for (&asset, &p) in shocks {
            if self.market_value[asset] == 0.0 {
                warnings.push(format!("shocked asset {asset} has zero market value; shock ignored"));
                continue;
            }
            self.price_index[asset] *= p;
            self.market_value[asset] *= p;
            for (row, _) in self.holdings.chunks_exact_mut(m).zip(&self.alive).filter(|(_, &a)| a) {
                row[asset] *= p;
            }
        }
        warnings
    }

    /// Judges every alive bank against its barrier and marks failures dead.
    /// Draws happen in ascending bank order, one per alive bank.
    pub fn evaluate_round<R: Rng + ?Sized>(&mut self, eta: f64, rng: &mut R) -> Vec<usize> {
        let banks = self.network.banks();
        for i in 0..banks.len() {
            if !self.alive[i] {
                self.draws[i] = 0.0;
                continue;
            }
            self.totals[i] = self.bank_total(i);
            self.draws[i] = if eta > 0.0 { rng.random::<f64>() * eta } else { 0.0 };
        }
        let failures: Vec<usize> = (0..banks.len())
            .filter(|&i| self.alive[i] && self.totals[i] < (1.0 - self.draws[i]) * banks[i].total_liabilities)
            .collect();
        for &i in &failures {
            self.alive[i] = false;
        }
        failures
    }

    /// Devalues every asset by the aggregated sales `α Σ_failed B_{i,m}` of
    /// this round's failures. Returns assets whose factor was clamped at 0.
    pub fn apply_fire_sales(&mut self, failures: &[usize], alpha: f64) -> Vec<usize> {
        let m = self.network.asset_count();
        let mut sold = vec![0.0; m];
        for &i in failures {
            let row = &self.holdings[i * m..(i + 1) * m];
            for (d, h) in sold.iter_mut().zip(row) {
                *d += alpha * h;
            }
        }
        let mut factor = vec![1.0; m];
        let mut clamped = Vec::new();
        for asset in 0..m {
            let total = self.market_value[asset];
            let d = sold[asset];
            if total <= 0.0 {
                debug_assert!(d <= 0.0, "sales from an asset with no market value");
                continue;
            }
            let remaining = total - d;
            if remaining < 0.0 {
                clamped.push(asset);
            }
            factor[asset] = (remaining / total).max(0.0);
            self.market_value[asset] = remaining.max(0.0);
            self.price_index[asset] *= factor[asset];
        }
        if factor.iter().any(|&f| f != 1.0) {
            for (row, _) in self.holdings.chunks_exact_mut(m).zip(&self.alive).filter(|(_, &a)| a) {
                for (h, f) in row.iter_mut().zip(&factor) {
                    *h *= f;
                }
            }
        }
        clamped
    }
}

/// Fresh state with the shocks of `params` applied.
pub fn apply_initial_shock<'a>(network: &'a BankAssetNetwork, params: &CascadeParams) -> Result<RoundState<'a>> {
    params.validate_for(network)?;
    let mut state = RoundState::new(network);
    for w in state.apply_shock(&params.shocks) {
        log::warn!("{w}");
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    pub fates: Vec<Fate>,
    /// Evaluation rounds after the shock, including the final quiet round.
    pub rounds_executed: usize,
    /// Failures per round; index 0 holds pre-shock insolvencies.
    pub failures_per_round: Vec<usize>,
    pub price_index: Vec<f64>,
    pub market_value: Vec<f64>,
    pub survival_fraction_all: f64,
    pub survival_fraction_labeled: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl CascadeResult {
    pub fn total_failures(&self) -> usize {
        self.fates.iter().filter(|f| !matches!(f, Fate::Survived)).count()
    }

    pub fn failed_set(&self) -> Vec<usize> {
        (0..self.fates.len())
            .filter(|&i| self.fates[i] != Fate::Survived)
            .collect()
    }

    pub fn survivors(&self) -> Vec<usize> {
        (0..self.fates.len())
            .filter(|&i| self.fates[i] == Fate::Survived)
            .collect()
    }
}

pub fn run_cascade(
    network: &BankAssetNetwork,
    params: &CascadeParams,
    labels: Option<&GroundTruthLabels>,
) -> Result<CascadeResult> {
    run_cascade_observed(network, params, labels, |_| {})
}

/// [`run_cascade`], calling `observe` at every round boundary: after the
/// pre-shock check, after the shock, and after each round's fire sales.
pub fn run_cascade_observed<F>(
    network: &BankAssetNetwork,
    params: &CascadeParams,
    labels: Option<&GroundTruthLabels>,
    mut observe: F,
) -> Result<CascadeResult>
where
    F: FnMut(&RoundState<'_>),
{
    params.validate_for(network)?;
    let labeled = labels.map(|l| l.indices_in(network));
    let mut rng: CascadeRng = stream_rng(params.seed, params.stream);
    let n = network.bank_count();
    let max_rounds = params.max_rounds.unwrap_or(10 * n.max(1));

    let mut state = RoundState::new(network);
    let mut fates = vec![Fate::Survived; n];
    let mut diagnostics = Diagnostics::default();

    let insolvent = state.evaluate_round(params.eta, &mut rng);
    for &i in &insolvent {
        fates[i] = Fate::Failed { round: 0 };
    }
    let mut failures_per_round = vec![insolvent.len()];
    observe(&state);

    diagnostics.warnings.extend(state.apply_shock(&params.shocks));
    observe(&state);

    let mut rounds = 0;
    diagnostics.converged = false;
    while rounds < max_rounds {
        rounds += 1;
        state.round = rounds;
        let failures = state.evaluate_round(params.eta, &mut rng);
        if failures.is_empty() {
            diagnostics.converged = true;
            break;
        }
        failures_per_round.push(failures.len());
        for &i in &failures {
            fates[i] = Fate::Failed { round: rounds };
        }
        for asset in state.apply_fire_sales(&failures, params.alpha) {
            diagnostics.clamped.push((rounds, asset));
        }
        observe(&state);
        if state.alive_count() == 0 {
            diagnostics.converged = true;
            break;
        }
    }
    debug_assert!(diagnostics.converged, "cascade exceeded max_rounds");
    if !diagnostics.converged {
        diagnostics
            .warnings
            .push(format!("stopped after max_rounds = {max_rounds} without converging"));
    }

    let survived = fates.iter().filter(|f| **f == Fate::Survived).count();
    let survival_fraction_all = if n == 0 { 1.0 } else { survived as f64 / n as f64 };
    let survival_fraction_labeled = labeled.and_then(|idx| {
        if idx.is_empty() {
            return None;
        }
        let s = idx.iter().filter(|&&i| fates[i] == Fate::Survived).count();
        Some(s as f64 / idx.len() as f64)
    });

    Ok(CascadeResult {
        fates,
        rounds_executed: rounds,
        failures_per_round,
        price_index: state.price_index,
        market_value: state.market_value,
        survival_fraction_all,
        survival_fraction_labeled,
        diagnostics,
    })
}
