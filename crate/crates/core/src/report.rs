//! Plain-text outputs: cascade result JSON and the per-analysis CSV tables.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::cascade::{CascadeParams, CascadeResult, Diagnostics, Fate};
use crate::error::{Error, Result};
use crate::evaluation::{PhaseDiagram, Region, RocPoint, SurvivalRow, SweepGrid};
use crate::network::BankAssetNetwork;
use crate::rng::RNG_ALGORITHM;
use crate::stats::SummaryTables;

#[derive(Debug, Serialize)]
pub struct ParamsRecord {
    /// Asset index → post-shock multiplier `p`.
    pub shocks: BTreeMap<usize, f64>,
    pub alpha: f64,
    pub eta: f64,
}

#[derive(Debug, Serialize)]
pub struct FateRecord<'a> {
    pub bank_id: &'a str,
    #[serde(flatten)]
    pub fate: Fate,
}

/// Serialized form of one cascade; field order is fixed.
#[derive(Debug, Serialize)]
pub struct CascadeRecord<'a> {
    pub params: ParamsRecord,
    pub seed: u64,
    pub stream: u64,
    pub rng: &'static str,
    pub rounds: usize,
    pub failures_per_round: &'a [usize],
    pub fates: Vec<FateRecord<'a>>,
    pub price_index: &'a [f64],
    pub market_value: &'a [f64],
    pub survival_fraction_all: f64,
    pub survival_fraction_labeled: Option<f64>,
    pub diagnostics: &'a Diagnostics,
}

impl<'a> CascadeRecord<'a> {
    pub fn new(network: &'a BankAssetNetwork, params: &CascadeParams, result: &'a CascadeResult) -> Self {
        CascadeRecord {
            params: ParamsRecord {
                shocks: params.shocks.clone(),
                alpha: params.alpha,
                eta: params.eta,
            },
            seed: params.seed,
            stream: params.stream,
            rng: RNG_ALGORITHM,
            rounds: result.rounds_executed,
            failures_per_round: &result.failures_per_round,
            fates: network
                .banks()
                .iter()
                .zip(&result.fates)
                .map(|(b, &fate)| FateRecord {
                    bank_id: &b.bank_id,
                    fate,
                })
                .collect(),
            price_index: &result.price_index,
            market_value: &result.market_value,
            survival_fraction_all: result.survival_fraction_all,
            survival_fraction_labeled: result.survival_fraction_labeled,
            diagnostics: &result.diagnostics,
        }
    }
}

pub fn write_cascade_json<W: Write>(
    network: &BankAssetNetwork,
    params: &CascadeParams,
    result: &CascadeResult,
    mut writer: W,
) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, &CascadeRecord::new(network, params, result))?;
    writeln!(writer).map_err(|e| Error::io("<json output>", e))?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn finish<W: Write>(mut csv: csv::Writer<W>) -> Result<()> {
    csv.flush().map_err(|e| Error::io("<csv output>", e))
}

/// `roc.csv`: `alpha,eta,p,split,fpr,tpr,tp_count`.
pub fn write_roc_csv<W: Write>(points: &[RocPoint], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["alpha", "eta", "p", "split", "fpr", "tpr", "tp_count"])?;
    for pt in points {
        csv.write_record([
            pt.alpha.to_string(),
            pt.eta.to_string(),
            pt.p.to_string(),
            pt.split.as_str().to_string(),
            pt.fpr.to_string(),
            pt.tpr.to_string(),
            pt.true_positives.to_string(),
        ])?;
    }
    finish(csv)
}

/// `survival.csv`: one row per `(α, p)` cell; blank labeled fraction when undefined.
pub fn write_survival_csv<W: Write>(rows: &[SurvivalRow], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["alpha", "eta", "p", "survival_all", "survival_labeled"])?;
    for r in rows {
        csv.write_record([
            r.alpha.to_string(),
            r.eta.to_string(),
            r.p.to_string(),
            r.survival_all.to_string(),
            opt(r.survival_labeled),
        ])?;
    }
    finish(csv)
}

/// Replicated sweep cells with confidence half-widths.
pub fn write_sweep_csv<W: Write>(grid: &SweepGrid, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "alpha",
        "eta",
        "p",
        "mean_all",
        "ci_half_all",
        "mean_labeled",
        "ci_half_labeled",
    ])?;
    for c in &grid.cells {
        csv.write_record([
            c.point.alpha.to_string(),
            c.point.eta.to_string(),
            c.point.p.to_string(),
            c.survival_all.mean.to_string(),
            opt(c.survival_all.ci_half),
            opt(c.survival_labeled.map(|m| m.mean)),
            opt(c.survival_labeled.and_then(|m| m.ci_half)),
        ])?;
    }
    finish(csv)
}

/// `phase.csv`: parameter values, mean survival, CI half-width, region.
pub fn write_phase_csv<W: Write>(diagram: &PhaseDiagram, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["p", "alpha", "eta", "mean", "ci_half", "region"])?;
    for c in &diagram.cells {
        csv.write_record([
            c.point.p.to_string(),
            c.point.alpha.to_string(),
            c.point.eta.to_string(),
            c.survival.mean.to_string(),
            opt(c.survival.ci_half),
            match c.region {
                Region::Stable => "I".to_string(),
                Region::Collapsed => "II".to_string(),
            },
        ])?;
    }
    finish(csv)
}

/// `transition.csv`: the largest adjacent-cell change per scan line.
pub fn write_transition_csv<W: Write>(diagram: &PhaseDiagram, writer: W) -> Result<()> {
    let axis = diagram.axes.last().map_or("", |a| a.param.as_str());
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["line", "axis", "from", "to", "from_mean", "to_mean", "change"])?;
    for d in &diagram.drops {
        csv.write_record([
            d.line.to_string(),
            axis.to_string(),
            d.from_value.to_string(),
            d.to_value.to_string(),
            d.from_mean.to_string(),
            d.to_mean.to_string(),
            (d.to_mean - d.from_mean).to_string(),
        ])?;
    }
    finish(csv)
}

/// `densities.csv`: one row per (quantity, bin) with all-bank and
/// labeled-failed counts and densities; out-of-range counts are omitted.
pub fn write_density_csv<W: Write>(tables: &SummaryTables, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "quantity",
        "bin_lo",
        "bin_hi",
        "count_all",
        "density_all",
        "count_failed",
        "density_failed",
    ])?;
    for table in tables.weights.iter().chain(std::iter::once(&tables.equity_ratio)) {
        for k in 0..table.all.counts.len() {
            let failed = table.failed.as_ref();
            csv.write_record([
                table.quantity.clone(),
                table.all.edges[k].to_string(),
                table.all.edges[k + 1].to_string(),
                table.all.counts[k].to_string(),
                table.all.density[k].to_string(),
                failed.map_or_else(String::new, |h| h.counts[k].to_string()),
                failed.map_or_else(String::new, |h| h.density[k].to_string()),
            ])?;
        }
    }
    finish(csv)
}
