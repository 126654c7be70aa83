//! Balance-sheet CSV ingestion and missing-asset completion.
//!
//! CSV schema: `bank_id,total_assets,total_liabilities,asset_00,...,asset_NN`
//! with one column per asset category (13 for the commercial-bank schema).
//! A blank asset cell is a missing value.
//!
//! Completion fills the blanks of a row with the residual
//! `R = B_i - Σ_known B_{i,m}`, spread over the missing assets in proportion
//! to the population-average weights `⟨w⟩_m`.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{asset_categories, ordered_sum, BalanceSheet, BankAssetNetwork};

/// Relative tolerance on `|Σ_m B_{i,m} - B_i|` for a consistent sheet.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawBalanceSheetRow {
    pub bank_id: String,
    pub holdings: Vec<Option<f64>>,
    pub total_assets: f64,
    pub total_liabilities: f64,
}

impl RawBalanceSheetRow {
    pub fn from_sheet(sheet: &BalanceSheet) -> Self {
        RawBalanceSheetRow {
            bank_id: sheet.bank_id.clone(),
            holdings: sheet.holdings.iter().map(|&h| Some(h)).collect(),
            total_assets: sheet.total_assets,
            total_liabilities: sheet.total_liabilities,
        }
    }

    pub fn missing(&self) -> impl Iterator<Item = usize> + '_ {
        self.holdings
            .iter()
            .enumerate()
            .filter(|(_, h)| h.is_none())
            .map(|(m, _)| m)
    }
}

/// Per-asset mean weight over the rows where that asset is present.
/// `None` marks an asset no row reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageWeights {
    pub values: Vec<Option<f64>>,
    /// Contributing rows per asset.
    pub counts: Vec<usize>,
}

impl AverageWeights {
    pub fn get(&self, asset: usize) -> Option<f64> {
        self.values.get(asset).copied().flatten()
    }
}

pub fn compute_average_weights(rows: &[RawBalanceSheetRow]) -> AverageWeights {
    let m = rows.first().map_or(0, |r| r.holdings.len());
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for row in rows.iter().filter(|r| r.total_assets > 0.0) {
        for (asset, h) in row.holdings.iter().enumerate() {
            if let Some(h) = h {
                sums[asset] += h / row.total_assets;
                counts[asset] += 1;
            }
        }
    }
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    AverageWeights { values, counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairAction {
    /// Known holdings exceeded total assets: missing set to 0, known rescaled.
    ClampRescale,
    /// Residual spread uniformly because every missing asset has weight 0.
    UniformFill,
    /// No missing cells but the holdings did not add up: rescaled to total.
    Rescale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairRecord {
    pub row_id: String,
    pub action: RepairAction,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub sheet: BalanceSheet,
    pub repair: Option<RepairRecord>,
}

pub fn complete_balance_sheet(row: &RawBalanceSheetRow, avg: &AverageWeights) -> Result<Completion> {
    let total = row.total_assets;
    let known_sum = ordered_sum(row.holdings.iter().flatten().copied());
    let residual = total - known_sum;
    let missing: Vec<usize> = row.missing().collect();
    let consistent = residual.abs() <= SUM_TOLERANCE * total;
    let repair = |action| {
        Some(RepairRecord {
            row_id: row.bank_id.clone(),
            action,
            residual,
        })
    };

    let rescaled_known = |missing_value: f64| -> Vec<f64> {
        let scale = if known_sum > 0.0 { total / known_sum } else { 0.0 };
        row.holdings
            .iter()
            .map(|h| h.map_or(missing_value, |v| v * scale))
            .collect()
    };

    let (holdings, repair) = if missing.is_empty() {
        if consistent {
            (row.holdings.iter().map(|h| h.unwrap_or(0.0)).collect(), None)
        } else if known_sum > 0.0 {
            (rescaled_known(0.0), repair(RepairAction::Rescale))
        } else {
            return Err(Error::Domain(format!(
                "bank `{}` reports total assets {total} but all holdings are zero",
                row.bank_id
            )));
        }
    } else {
        let mut weights = Vec::with_capacity(missing.len());
        for &asset in &missing {
            let w = avg.get(asset).ok_or_else(|| Error::UndefinedAverageWeight {
                bank_id: row.bank_id.clone(),
                asset,
            })?;
            weights.push(w);
        }
        if residual < 0.0 && !consistent {
            (rescaled_known(0.0), repair(RepairAction::ClampRescale))
        } else {
            let residual = residual.max(0.0);
            let weight_sum = ordered_sum(weights.iter().copied());
            let mut holdings: Vec<f64> = row.holdings.iter().map(|h| h.unwrap_or(0.0)).collect();
            let uniform = weight_sum <= 0.0 && residual > 0.0;
            for (&asset, &w) in missing.iter().zip(&weights) {
                holdings[asset] = if uniform {
                    residual / missing.len() as f64
                } else if residual > 0.0 {
                    residual * w / weight_sum
                } else {
                    0.0
                };
            }
            (
                holdings,
                if uniform {
                    repair(RepairAction::UniformFill)
                } else {
                    None
                },
            )
        }
    };

    Ok(Completion {
        sheet: BalanceSheet::new(row.bank_id.clone(), holdings, total, row.total_liabilities),
        repair,
    })
}

#[derive(Debug, Clone)]
pub struct CompletedDataset {
    pub network: BankAssetNetwork,
    pub averages: AverageWeights,
    pub repairs: Vec<RepairRecord>,
}

/// Average-weight pass over all rows, then per-row completion.
pub fn complete_rows(rows: &[RawBalanceSheetRow]) -> Result<CompletedDataset> {
    let averages = compute_average_weights(rows);
    let m = rows.first().map_or(0, |r| r.holdings.len());
    let mut banks = Vec::with_capacity(rows.len());
    let mut repairs = Vec::new();
    for row in rows {
        let c = complete_balance_sheet(row, &averages)?;
        banks.push(c.sheet);
        repairs.extend(c.repair);
    }
    let network = BankAssetNetwork::new(asset_categories(m), banks)?;
    Ok(CompletedDataset {
        network,
        averages,
        repairs,
    })
}

pub fn asset_column(asset: usize) -> String {
    format!("asset_{asset:02}")
}

fn parse_amount(field: &str, column: &str, line: Option<u64>) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::schema(line, format!("column `{column}`: `{field}` is not a number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::schema(
            line,
            format!("column `{column}`: `{field}` must be a non-negative amount"),
        ));
    }
    Ok(v)
}

pub fn read_balance_sheets<R: Read>(reader: R) -> Result<Vec<RawBalanceSheetRow>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let expected = ["bank_id", "total_assets", "total_liabilities"];
    for (i, want) in expected.iter().enumerate() {
        match headers.get(i) {
            Some(h) if h == *want => {}
            Some(h) => {
                return Err(Error::schema(
                    Some(1),
                    format!("column `{h}` found where `{want}` was expected"),
                ))
            }
            None => return Err(Error::schema(Some(1), format!("missing column `{want}`"))),
        }
    }
    let asset_count = headers.len() - expected.len();
    if asset_count == 0 {
        return Err(Error::schema(Some(1), "no asset columns"));
    }
    for (m, h) in headers.iter().skip(expected.len()).enumerate() {
        if h != asset_column(m) {
            return Err(Error::schema(
                Some(1),
                format!("column `{h}` found where `{}` was expected", asset_column(m)),
            ));
        }
    }

    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line());
            Error::schema(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line());
        let bank_id = record[0].to_string();
        if bank_id.is_empty() {
            return Err(Error::schema(line, "column `bank_id` is blank"));
        }
        let total_assets = parse_amount(&record[1], "total_assets", line)?;
        let total_liabilities = parse_amount(&record[2], "total_liabilities", line)?;
        let holdings = (0..asset_count)
            .map(|m| {
                let field = &record[expected.len() + m];
                if field.is_empty() {
                    Ok(None)
                } else {
                    parse_amount(field, &asset_column(m), line).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(RawBalanceSheetRow {
            bank_id,
            holdings,
            total_assets,
            total_liabilities,
        });
    }
    Ok(rows)
}

pub fn load_balance_sheets(path: &Path) -> Result<Vec<RawBalanceSheetRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_balance_sheets(file)
}

/// Writes the network in the balance-sheet schema, no blanks.
pub fn write_network<W: Write>(network: &BankAssetNetwork, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["bank_id".to_string(), "total_assets".into(), "total_liabilities".into()];
    header.extend((0..network.asset_count()).map(asset_column));
    csv.write_record(&header)?;
    for bank in network.banks() {
        let mut record = vec![
            bank.bank_id.clone(),
            bank.total_assets.to_string(),
            bank.total_liabilities.to_string(),
        ];
        record.extend(bank.holdings.iter().map(f64::to_string));
        csv.write_record(&record)?;
    }
    csv.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Bank ids known to have failed, from an external failed-bank list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthLabels {
    pub failed: BTreeSet<String>,
    /// Informational, e.g. `2008-01-01..2011-07-01`.
    pub window: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCoverage {
    pub listed: usize,
    pub present: usize,
}

impl GroundTruthLabels {
    pub fn from_ids<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        GroundTruthLabels {
            failed: ids.into_iter().map(Into::into).collect(),
            window: None,
        }
    }

    pub fn len(&self) -> usize {
        self.failed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.failed.is_empty()
    }

    pub fn contains(&self, bank_id: &str) -> bool {
        self.failed.contains(bank_id)
    }

    /// Network indices of labeled banks, ascending.
    pub fn indices_in(&self, network: &BankAssetNetwork) -> Vec<usize> {
        network
            .banks()
            .iter()
            .enumerate()
            .filter(|(_, b)| self.failed.contains(&b.bank_id))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn mask(&self, network: &BankAssetNetwork) -> Vec<bool> {
        network
            .banks()
            .iter()
            .map(|b| self.failed.contains(&b.bank_id))
            .collect()
    }

    pub fn coverage(&self, network: &BankAssetNetwork) -> LabelCoverage {
        LabelCoverage {
            listed: self.failed.len(),
            present: self.indices_in(network).len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedLabels {
    pub labels: GroundTruthLabels,
    pub duplicates: usize,
}

/// One bank id per line; an optional `bank_id` header; extra columns ignored.
pub fn read_labels<R: Read>(reader: R) -> Result<LoadedLabels> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut labels = GroundTruthLabels::default();
    let mut duplicates = 0;
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let Some(id) = record.get(0).filter(|s| !s.is_empty()) else {
            continue;
        };
        if i == 0 && id == "bank_id" {
            continue;
        }
        if !labels.failed.insert(id.to_string()) {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!("label list contained {duplicates} duplicate id(s)");
    }
    Ok(LoadedLabels { labels, duplicates })
}

pub fn load_labels(path: &Path) -> Result<LoadedLabels> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(file)
}

pub fn write_labels<W: Write>(labels: &GroundTruthLabels, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["bank_id"])?;
    for id in &labels.failed {
        csv.write_record([id])?;
    }
    csv.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
