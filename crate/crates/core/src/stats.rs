//! Binned densities of portfolio weights and equity ratios, all banks vs.
//! labeled-failed banks, plus a two-sample Kolmogorov-Smirnov statistic.

use serde::{Deserialize, Serialize};

use crate::ingest::GroundTruthLabels;
use crate::network::BankAssetNetwork;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `count / (n · width)`; integrates to the in-range fraction.
    pub density: Vec<f64>,
    pub below: usize,
    pub above: usize,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(bins > 0 && hi > lo, "histogram needs a non-empty range");
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
        edges[bins] = hi;
        Histogram::with_edges(edges)
    }

    pub fn with_edges(edges: Vec<f64>) -> Self {
        assert!(
            edges.len() >= 2 && edges.windows(2).all(|w| w[0] < w[1]),
            "edges must increase"
        );
        let bins = edges.len() - 1;
        Histogram {
            edges,
            counts: vec![0; bins],
            density: vec![0.0; bins],
            below: 0,
            above: 0,
        }
    }

    /// Bin of `value`: half-open `[lo, hi)`, except the last bin is closed.
    pub fn bin_of(&self, value: f64) -> Option<usize> {
        let last = *self.edges.last().unwrap();
        if value < self.edges[0] || value > last {
            return None;
        }
        if value == last {
            return Some(self.counts.len() - 1);
        }
        Some(self.edges.partition_point(|&e| e <= value) - 1)
    }

    pub fn fill(&mut self, values: impl IntoIterator<Item = f64>) {
        for v in values {
            match self.bin_of(v) {
                Some(b) => self.counts[b] += 1,
                None if v < self.edges[0] => self.below += 1,
                None => self.above += 1,
            }
        }
        let n = self.total();
        for (k, d) in self.density.iter_mut().enumerate() {
            let width = self.edges[k + 1] - self.edges[k];
            *d = if n == 0 {
                0.0
            } else {
                self.counts[k] as f64 / (n as f64 * width)
            };
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.below + self.above
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub quantity: String,
    pub all: Histogram,
    pub failed: Option<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTables {
    /// One table per asset category (weight distribution).
    pub weights: Vec<DensityTable>,
    pub equity_ratio: DensityTable,
    /// Set when no labeled bank is present in the network.
    pub no_labels: bool,
}

/// Weight and equity-ratio densities on `edges` (evenly spaced `[0,1]` bins
/// when `None`, 50 of them by default).
pub fn summary_statistics(
    network: &BankAssetNetwork,
    labels: &GroundTruthLabels,
    edges: Option<Vec<f64>>,
) -> SummaryTables {
    let template = match edges {
        Some(e) => Histogram::with_edges(e),
        None => Histogram::uniform(0.0, 1.0, 50),
    };
    let failed = labels.mask(network);
    let no_labels = !failed.iter().any(|&f| f);
    if no_labels {
        log::warn!("no labeled banks in the network; emitting all-bank densities only");
    }
    let banks: Vec<_> = network.banks().iter().filter(|b| b.total_assets > 0.0).collect();
    let failed: Vec<bool> = network
        .banks()
        .iter()
        .zip(&failed)
        .filter(|(b, _)| b.total_assets > 0.0)
        .map(|(_, &f)| f)
        .collect();

    let table = |quantity: String, values: Vec<f64>| {
        let mut all = template.clone();
        all.fill(values.iter().copied());
        let failed = (!no_labels).then(|| {
            let mut h = template.clone();
            h.fill(values.iter().zip(&failed).filter(|(_, &f)| f).map(|(&v, _)| v));
            h
        });
        DensityTable { quantity, all, failed }
    };

    let weights = network
        .assets()
        .iter()
        .map(|asset| {
            let values = banks.iter().map(|b| b.holdings[asset.index] / b.total_assets).collect();
            table(format!("weight:{}", asset.name), values)
        })
        .collect();
    let equity = banks
        .iter()
        .map(|b| (b.total_assets - b.total_liabilities) / b.total_assets)
        .collect();
    SummaryTables {
        weights,
        equity_ratio: table("equity_ratio".into(), equity),
        no_labels,
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{asset_categories, BalanceSheet};

    #[test]
    fn bins_are_half_open_with_closed_top() {
        let h = Histogram::uniform(0.0, 1.0, 50);
        assert_eq!(h.bin_of(0.0), Some(0));
        assert_eq!(h.bin_of(1.0), Some(49));
        assert_eq!(h.bin_of(0.02), Some(1));
        assert_eq!(h.bin_of(-0.1), None);
        // 10/110 lands in [0.08, 0.10)
        assert_eq!(h.bin_of(10.0 / 110.0), Some(4));
    }

    #[test]
    fn failed_point_mass_in_top_bin() {
        let banks = vec![
            BalanceSheet::from_holdings("f1", vec![10.0, 0.0], 9.0),
            BalanceSheet::from_holdings("f2", vec![5.0, 0.0], 4.0),
            BalanceSheet::from_holdings("ok", vec![2.0, 8.0], 4.0),
        ];
        let net = BankAssetNetwork::new(asset_categories(2), banks).unwrap();
        let tables = summary_statistics(&net, &GroundTruthLabels::from_ids(["f1", "f2"]), None);
        let failed = tables.weights[0].failed.as_ref().unwrap();
        assert_eq!(failed.counts[49], 2);
        assert_eq!(failed.counts.iter().sum::<usize>(), 2);
        assert!((failed.density[49] - 50.0).abs() < 1e-9);
        assert_eq!(tables.weights[0].all.counts[49], 2);
        assert_eq!(tables.weights[0].all.counts[10], 1);
        assert!(!tables.no_labels);
    }

    #[test]
    fn empty_labels_give_all_banks_only() {
        let banks = vec![BalanceSheet::from_holdings("a", vec![1.0], 0.5)];
        let net = BankAssetNetwork::new(asset_categories(1), banks).unwrap();
        let tables = summary_statistics(&net, &GroundTruthLabels::default(), None);
        assert!(tables.no_labels);
        assert!(tables.equity_ratio.failed.is_none());
        assert_eq!(tables.equity_ratio.all.counts[25], 1);
    }

    #[test]
    fn ks_of_identical_and_disjoint_samples() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0]) - 0.5).abs() < 1e-15);
    }
}
