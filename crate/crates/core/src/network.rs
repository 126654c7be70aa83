//! Bipartite bank-asset system: balance sheets, asset categories and the
//! derived weight / market-share quantities.
//!
//! Amounts are `f64` in thousands of dollars. A bank is linked to an asset
//! iff it holds a strictly positive amount of it. All aggregate sums run in
//! ascending bank or asset index order so that runs are bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssetGroup {
    RealEstateLoans,
    OtherLoans,
    OtherAssets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetCategory {
    pub index: usize,
    pub name: String,
    pub group: AssetGroup,
}

/// The 13 balance-sheet asset categories of the commercial-bank schema,
/// together with the population-average weight observed for 2007.
pub const CANONICAL_ASSETS: [(&str, AssetGroup, f64); 13] = [
    (
        "Loans for construction and land development",
        AssetGroup::RealEstateLoans,
        0.082,
    ),
    ("Loans secured by farmland", AssetGroup::RealEstateLoans, 0.038),
    (
        "Loans secured by 1-4 family residential properties",
        AssetGroup::RealEstateLoans,
        0.167,
    ),
    (
        "Loans secured by multifamily (>5) residential properties",
        AssetGroup::RealEstateLoans,
        0.013,
    ),
    (
        "Loans secured by nonfarm nonresidential properties",
        AssetGroup::RealEstateLoans,
        0.150,
    ),
    ("Agricultural loans", AssetGroup::OtherLoans, 0.041),
    ("Commercial and industrial loans", AssetGroup::OtherLoans, 0.031),
    ("Loans to individuals", AssetGroup::OtherLoans, 0.097),
    ("All other loans", AssetGroup::OtherLoans, 0.171),
    (
        "Obligations of states and political subdivisions in the U.S.",
        AssetGroup::OtherLoans,
        0.046,
    ),
    ("Held-to-maturity securities", AssetGroup::OtherAssets, 0.003),
    ("Available-for-sale securities, total", AssetGroup::OtherAssets, 0.004),
    (
        "Premises and fixed assets including capitalized leases",
        AssetGroup::OtherAssets,
        0.020,
    ),
];

pub fn canonical_assets() -> Vec<AssetCategory> {
    CANONICAL_ASSETS
        .iter()
        .enumerate()
        .map(|(index, (name, group, _))| AssetCategory {
            index,
            name: (*name).to_string(),
            group: *group,
        })
        .collect()
}

/// Asset categories for a network with `count` assets: the canonical schema
/// when `count == 13`, generic `asset_NN` names otherwise.
pub fn asset_categories(count: usize) -> Vec<AssetCategory> {
    if count == CANONICAL_ASSETS.len() {
        return canonical_assets();
    }
    (0..count)
        .map(|index| AssetCategory {
            index,
            name: format!("asset_{index:02}"),
            group: AssetGroup::OtherAssets,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSheet {
    pub bank_id: String,
    pub holdings: Vec<f64>,
    pub total_assets: f64,
    pub total_liabilities: f64,
    pub equity: f64,
}

impl BalanceSheet {
    pub fn new(bank_id: impl Into<String>, holdings: Vec<f64>, total_assets: f64, total_liabilities: f64) -> Self {
        BalanceSheet {
            bank_id: bank_id.into(),
            holdings,
            total_assets,
            total_liabilities,
            equity: total_assets - total_liabilities,
        }
    }

    /// Builds a sheet whose total assets is the ascending-order sum of `holdings`.
    pub fn from_holdings(bank_id: impl Into<String>, holdings: Vec<f64>, total_liabilities: f64) -> Self {
        let total = ordered_sum(holdings.iter().copied());
        BalanceSheet::new(bank_id, holdings, total, total_liabilities)
    }

    fn validate(&self, asset_count: usize) -> Result<()> {
        if self.holdings.len() != asset_count {
            return Err(Error::Domain(format!(
                "bank `{}` has {} holdings, expected {}",
                self.bank_id,
                self.holdings.len(),
                asset_count
            )));
        }
        let finite_non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if !self.holdings.iter().all(|&h| finite_non_negative(h)) {
            return Err(Error::Domain(format!(
                "bank `{}` has a negative or non-finite holding",
                self.bank_id
            )));
        }
        if !finite_non_negative(self.total_assets) || !finite_non_negative(self.total_liabilities) {
            return Err(Error::Domain(format!(
                "bank `{}` has negative or non-finite totals",
                self.bank_id
            )));
        }
        Ok(())
    }

    pub fn holdings_sum(&self) -> f64 {
        ordered_sum(self.holdings.iter().copied())
    }

    pub fn equity_ratio(&self) -> Result<f64> {
        if self.total_assets <= 0.0 {
            return Err(Error::ZeroTotalAssets {
                bank_id: self.bank_id.clone(),
            });
        }
        Ok((self.total_assets - self.total_liabilities) / self.total_assets)
    }
}

/// `w_{i,m} = B_{i,m} / B_i`.
pub fn weight(bank: &BalanceSheet, asset: usize) -> Result<f64> {
    if bank.total_assets <= 0.0 {
        return Err(Error::ZeroTotalAssets {
            bank_id: bank.bank_id.clone(),
        });
    }
    let holding = bank.holdings.get(asset).ok_or(Error::UnknownAsset {
        asset,
        count: bank.holdings.len(),
    })?;
    Ok(holding / bank.total_assets)
}

pub(crate) fn ordered_sum(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |acc, v| acc + v)
}

/// The bank-asset bipartite system at initialization.
///
/// Immutable once built; a cascade works on its own [`RoundState`] copy, so
/// one network can be shared by many concurrent runs.
///
/// [`RoundState`]: crate::cascade::RoundState
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankAssetNetwork {
    banks: Vec<BalanceSheet>,
    assets: Vec<AssetCategory>,
    market_value: Vec<f64>,
    holdings: Vec<f64>,
}

impl BankAssetNetwork {
    pub fn new(assets: Vec<AssetCategory>, banks: Vec<BalanceSheet>) -> Result<Self> {
        for (i, a) in assets.iter().enumerate() {
            if a.index != i {
                return Err(Error::Domain(format!(
                    "asset `{}` has index {}, expected {}",
                    a.name, a.index, i
                )));
            }
        }
        let m = assets.len();
        for b in &banks {
            b.validate(m)?;
        }
        let mut seen = std::collections::HashSet::with_capacity(banks.len());
        for b in &banks {
            if !seen.insert(b.bank_id.as_str()) {
                return Err(Error::Domain(format!("duplicate bank id `{}`", b.bank_id)));
            }
        }
        let holdings: Vec<f64> = banks.iter().flat_map(|b| b.holdings.iter().copied()).collect();
        let mut market_value = vec![0.0; m];
        for row in holdings.chunks_exact(m.max(1)).take(banks.len()) {
            for (a, h) in market_value.iter_mut().zip(row) {
                *a += h;
            }
        }
        Ok(BankAssetNetwork {
            banks,
            assets,
            market_value,
            holdings,
        })
    }

    pub fn banks(&self) -> &[BalanceSheet] {
        &self.banks
    }

    pub fn assets(&self) -> &[AssetCategory] {
        &self.assets
    }

    pub fn bank_count(&self) -> usize {
        self.banks.len()
    }

    pub fn asset_count(&self) -> usize {
        self.assets.len()
    }

    /// `A_m = Σ_i B_{i,m}` at initialization.
    pub fn market_value(&self) -> &[f64] {
        &self.market_value
    }

    /// Row-major `bank_count × asset_count` holdings matrix.
    pub fn holdings_matrix(&self) -> &[f64] {
        &self.holdings
    }

    pub fn holding(&self, bank: usize, asset: usize) -> f64 {
        self.holdings[bank * self.assets.len() + asset]
    }

    pub fn bank_index(&self, bank_id: &str) -> Option<usize> {
        self.banks.iter().position(|b| b.bank_id == bank_id)
    }

    pub fn is_linked(&self, bank: usize, asset: usize) -> bool {
        self.holding(bank, asset) > 0.0
    }

    pub fn check_asset(&self, asset: usize) -> Result<()> {
        if asset >= self.assets.len() {
            return Err(Error::UnknownAsset {
                asset,
                count: self.assets.len(),
            });
        }
        Ok(())
    }

    /// `s_{i,m} = B_{i,m} / A_m`.
    pub fn market_share(&self, bank_id: &str, asset: usize) -> Result<f64> {
        self.check_asset(asset)?;
        let bank = self.bank_index(bank_id).ok_or_else(|| Error::UnknownBank {
            bank_id: bank_id.to_string(),
        })?;
        let total = self.market_value[asset];
        if total <= 0.0 {
            return Err(Error::AssetNotHeld { asset });
        }
        Ok(self.holding(bank, asset) / total)
    }
}
