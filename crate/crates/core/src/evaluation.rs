//! Parameter sweeps over `(α, η, p)`: survival curves, ROC grids against a
//! failed-bank list, first-step vs. consecutive-step attribution, and
//! phase-diagram scans.
//!
//! Every lattice cell and replicate runs on its own random stream
//! `cell_stream(cell, replicate)` under the master seed. Work is spread over
//! the current rayon pool and reduced in lattice order, so outputs do not
//! depend on the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{run_cascade, CascadeParams, CascadeResult, Fate};
use crate::error::{Error, Result};
use crate::ingest::GroundTruthLabels;
use crate::network::BankAssetNetwork;
use crate::rng::cell_stream;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

pub const DEFAULT_REPLICATES: usize = 300;

pub const DEFAULT_REGION_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub alpha: f64,
    pub eta: f64,
    pub p: f64,
}

impl ParamPoint {
    pub fn params(&self, asset: usize, seed: u64, stream: u64) -> CascadeParams {
        CascadeParams::single(asset, self.p, self.alpha, self.eta)
            .with_seed(seed)
            .with_stream(stream)
    }
}

/// Cartesian product of parameter values; cells ordered α-major, then η, then p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLattice {
    pub alpha: Vec<f64>,
    pub eta: Vec<f64>,
    pub p: Vec<f64>,
}

impl ParamLattice {
    pub fn cells(&self) -> Vec<ParamPoint> {
        let mut cells = Vec::with_capacity(self.alpha.len() * self.eta.len() * self.p.len());
        for &alpha in &self.alpha {
            for &eta in &self.eta {
                for &p in &self.p {
                    cells.push(ParamPoint { alpha, eta, p });
                }
            }
        }
        cells
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty() || self.eta.is_empty() || self.p.is_empty()
    }
}

fn check_cells(network: &BankAssetNetwork, asset: usize, cells: &[ParamPoint]) -> Result<()> {
    network.check_asset(asset)?;
    if cells.is_empty() {
        return Err(Error::Domain("parameter grid is empty".into()));
    }
    for c in cells {
        c.params(asset, 0, 0).validate()?;
    }
    Ok(())
}

/// Runs `replicates` cascades per cell in parallel; results in cell-major order.
fn run_cells(
    network: &BankAssetNetwork,
    labels: Option<&GroundTruthLabels>,
    asset: usize,
    cells: &[ParamPoint],
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<CascadeResult>>> {
    let jobs: Vec<(usize, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, cell)| {
            // η = 0 cascades are deterministic: one run stands for all replicates.
            let runs = if cell.eta == 0.0 { 1 } else { replicates };
            (0..runs).map(move |r| (c, r))
        })
        .collect();
    let results: Vec<CascadeResult> = jobs
        .par_iter()
        .map(|&(c, r)| run_cascade(network, &cells[c].params(asset, seed, cell_stream(c, r)), labels))
        .collect::<Result<_>>()?;
    let mut grouped: Vec<Vec<CascadeResult>> = cells.iter().map(|_| Vec::new()).collect();
    for ((c, _), result) in jobs.into_iter().zip(results) {
        grouped[c].push(result);
    }
    Ok(grouped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    /// Half-width of the 95% normal-approximation interval; `None` with
    /// fewer than two replicates.
    pub ci_half: Option<f64>,
}

pub fn mean_ci(values: &[f64], replicates: usize) -> MeanCi {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    // Deterministic cells carry one run standing in for every replicate.
    if n == 1 && replicates >= 2 {
        return MeanCi {
            mean,
            ci_half: Some(0.0),
        };
    }
    let ci_half = (n >= 2).then(|| {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        Z_95 * (var / n as f64).sqrt()
    });
    MeanCi { mean, ci_half }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub point: ParamPoint,
    pub survival_all: MeanCi,
    pub survival_labeled: Option<MeanCi>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub asset: usize,
    pub seed: u64,
    pub replicates: usize,
    pub cells: Vec<SweepCell>,
}

/// Mean survival fractions per cell over `replicates` seeded runs.
pub fn sweep_survival(
    network: &BankAssetNetwork,
    labels: Option<&GroundTruthLabels>,
    asset: usize,
    cells: &[ParamPoint],
    replicates: usize,
    seed: u64,
) -> Result<SweepGrid> {
    check_cells(network, asset, cells)?;
    let replicates = replicates.max(1);
    let grouped = run_cells(network, labels, asset, cells, replicates, seed)?;
    let cells = cells
        .iter()
        .zip(grouped)
        .map(|(&point, runs)| {
            let all: Vec<f64> = runs.iter().map(|r| r.survival_fraction_all).collect();
            let labeled: Option<Vec<f64>> = runs.iter().map(|r| r.survival_fraction_labeled).collect();
            SweepCell {
                point,
                survival_all: mean_ci(&all, replicates),
                survival_labeled: labeled.map(|l| mean_ci(&l, replicates)),
            }
        })
        .collect();
    Ok(SweepGrid {
        asset,
        seed,
        replicates,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub alpha: f64,
    pub eta: f64,
    pub p: f64,
    pub survival_all: f64,
    /// `None` when no labeled bank is in the network.
    pub survival_labeled: Option<f64>,
}

/// Survival fraction of all banks and of labeled banks, one run per
/// `(α, p)` cell (α-major).
pub fn survival_curves(
    network: &BankAssetNetwork,
    labels: &GroundTruthLabels,
    asset: usize,
    p_grid: &[f64],
    alpha_grid: &[f64],
    eta: f64,
    seed: u64,
) -> Result<Vec<SurvivalRow>> {
    let lattice = ParamLattice {
        alpha: alpha_grid.to_vec(),
        eta: vec![eta],
        p: p_grid.to_vec(),
    };
    let grid = sweep_survival(network, Some(labels), asset, &lattice.cells(), 1, seed)?;
    Ok(grid
        .cells
        .iter()
        .map(|c| SurvivalRow {
            alpha: c.point.alpha,
            eta: c.point.eta,
            p: c.point.p,
            survival_all: c.survival_all.mean,
            survival_labeled: c.survival_labeled.map(|m| m.mean),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Full,
    FirstStepOnly,
    ConsecutiveStepsOnly,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Full, Split::FirstStepOnly, Split::ConsecutiveStepsOnly];

    /// Whether a fate counts as a model-predicted failure in this split.
    /// Pre-shock insolvencies (round 0) count in none.
    pub fn includes(self, fate: Fate) -> bool {
        match (self, fate.failed_round()) {
            (_, None | Some(0)) => false,
            (Split::Full, Some(_)) => true,
            (Split::FirstStepOnly, Some(k)) => k == 1,
            (Split::ConsecutiveStepsOnly, Some(k)) => k >= 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Full => "full",
            Split::FirstStepOnly => "first_step",
            Split::ConsecutiveStepsOnly => "consecutive_steps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub alpha: f64,
    pub eta: f64,
    pub p: f64,
    pub split: Split,
    pub fpr: f64,
    pub tpr: f64,
    pub true_positives: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// One seeded run per lattice point.
    SingleRun,
    /// Failed iff failed in more than half of `R` seeded runs.
    MajorityVote(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub positives: usize,
    pub negatives: usize,
    pub points: Vec<RocPoint>,
    pub warnings: Vec<String>,
}

/// Positives are labeled banks present in the network; negatives are all
/// other network banks. Emits the three splits for every lattice point.
pub fn roc_grid(
    network: &BankAssetNetwork,
    labels: &GroundTruthLabels,
    asset: usize,
    lattice: &ParamLattice,
    classification: Classification,
    seed: u64,
) -> Result<RocReport> {
    let cells = lattice.cells();
    check_cells(network, asset, &cells)?;
    let positive = labels.mask(network);
    let positives = positive.iter().filter(|&&p| p).count();
    let negatives = positive.len() - positives;
    if positives == 0 || negatives == 0 {
        let msg = format!("rates undefined ({positives} positives, {negatives} negatives); all points skipped");
        log::warn!("{msg}");
        return Ok(RocReport {
            positives,
            negatives,
            points: Vec::new(),
            warnings: vec![msg],
        });
    }
    let replicates = match classification {
        Classification::SingleRun => 1,
        Classification::MajorityVote(r) => r.max(1),
    };
    let grouped = run_cells(network, None, asset, &cells, replicates, seed)?;

    let mut points = Vec::with_capacity(cells.len() * 3);
    for (cell, runs) in cells.iter().zip(&grouped) {
        for split in Split::ALL {
            let (mut tp, mut fp) = (0, 0);
            for (i, &is_positive) in positive.iter().enumerate() {
                let votes = runs.iter().filter(|r| split.includes(r.fates[i])).count();
                if 2 * votes > runs.len() {
                    if is_positive {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            points.push(RocPoint {
                alpha: cell.alpha,
                eta: cell.eta,
                p: cell.p,
                split,
                fpr: fp as f64 / negatives as f64,
                tpr: tp as f64 / positives as f64,
                true_positives: tp,
                false_positives: fp,
            });
        }
    }
    Ok(RocReport {
        positives,
        negatives,
        points,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    pub first_step: usize,
    pub consecutive: usize,
}

impl Attribution {
    pub fn total(&self) -> usize {
        self.first_step + self.consecutive
    }
}

/// Correctly identified labeled banks, by whether they failed in the first
/// post-shock round or later. Pre-shock insolvencies are excluded.
pub fn attribution_split(
    result: &CascadeResult,
    network: &BankAssetNetwork,
    labels: &GroundTruthLabels,
) -> Attribution {
    let mut split = Attribution {
        first_step: 0,
        consecutive: 0,
    };
    for i in labels.indices_in(network) {
        match result.fates[i].failed_round() {
            Some(1) => split.first_step += 1,
            Some(k) if k >= 2 => split.consecutive += 1,
            _ => {}
        }
    }
    split
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    P,
    Alpha,
    Eta,
}

impl Param {
    pub fn as_str(self) -> &'static str {
        match self {
            Param::P => "p",
            Param::Alpha => "alpha",
            Param::Eta => "eta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Region I: a significant fraction of banks survives.
    Stable,
    /// Region II: near-total collapse.
    Collapsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub point: ParamPoint,
    pub survival: MeanCi,
    pub region: Region,
}

/// Largest change in mean survival between neighbouring cells of one line
/// along the last axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDrop {
    /// Index along the first axis for 2-D scans, 0 for 1-D scans.
    pub line: usize,
    /// Index `k` of the step `k -> k + 1`.
    pub step: usize,
    pub from_value: f64,
    pub to_value: f64,
    pub from_mean: f64,
    pub to_mean: f64,
}

impl StepDrop {
    pub fn magnitude(&self) -> f64 {
        (self.from_mean - self.to_mean).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub axes: Vec<Axis>,
    pub fixed: ParamPoint,
    pub threshold: f64,
    /// Row-major: first axis outer.
    pub cells: Vec<PhaseCell>,
    pub drops: Vec<StepDrop>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseOptions {
    pub replicates: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        PhaseOptions {
            replicates: DEFAULT_REPLICATES,
            threshold: DEFAULT_REGION_THRESHOLD,
            seed: 0,
        }
    }
}

fn with_param(mut point: ParamPoint, param: Param, value: f64) -> ParamPoint {
    match param {
        Param::P => point.p = value,
        Param::Alpha => point.alpha = value,
        Param::Eta => point.eta = value,
    }
    point
}

/// Mean survival over a 1-D or 2-D grid of varying parameters, the others
/// held at `fixed`. Cells below `threshold` are region II.
pub fn phase_scan(
    network: &BankAssetNetwork,
    asset: usize,
    axes: &[Axis],
    fixed: ParamPoint,
    options: &PhaseOptions,
) -> Result<PhaseDiagram> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::Domain(format!(
            "phase scan needs 1 or 2 axes, got {}",
            axes.len()
        )));
    }
    if axes.len() == 2 && axes[0].param == axes[1].param {
        return Err(Error::Domain("phase scan axes must vary different parameters".into()));
    }
    if axes.iter().any(|a| a.values.is_empty()) {
        return Err(Error::Domain("phase scan axis has no values".into()));
    }
    let (outer, inner) = match axes {
        [only] => (None, only),
        [first, second] => (Some(first), second),
        _ => unreachable!(),
    };
    let outer_values: Vec<Option<f64>> = match outer {
        Some(a) => a.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut points = Vec::new();
    for &o in &outer_values {
        let base = match (outer, o) {
            (Some(a), Some(v)) => with_param(fixed, a.param, v),
            _ => fixed,
        };
        for &v in &inner.values {
            points.push(with_param(base, inner.param, v));
        }
    }
    let grid = sweep_survival(network, None, asset, &points, options.replicates, options.seed)?;
    let cells: Vec<PhaseCell> = grid
        .cells
        .iter()
        .map(|c| PhaseCell {
            point: c.point,
            survival: c.survival_all,
            region: if c.survival_all.mean < options.threshold {
                Region::Collapsed
            } else {
                Region::Stable
            },
        })
        .collect();

    let width = inner.values.len();
    let drops = cells
        .chunks(width)
        .enumerate()
        .filter(|_| width >= 2)
        .map(|(line, row)| {
            let step = (0..width - 1)
                .max_by(|&a, &b| {
                    let da = (row[a].survival.mean - row[a + 1].survival.mean).abs();
                    let db = (row[b].survival.mean - row[b + 1].survival.mean).abs();
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .unwrap();
            StepDrop {
                line,
                step,
                from_value: inner.values[step],
                to_value: inner.values[step + 1],
                from_mean: row[step].survival.mean,
                to_mean: row[step + 1].survival.mean,
            }
        })
        .collect();

    Ok(PhaseDiagram {
        axes: axes.to_vec(),
        fixed,
        threshold: options.threshold,
        cells,
        drops,
    })
}

impl PhaseDiagram {
    /// `(rows, cols)`; a 1-D scan has one row.
    pub fn shape(&self) -> (usize, usize) {
        let cols = self.axes.last().map_or(0, |a| a.values.len());
        let rows = if self.axes.len() == 2 {
            self.axes[0].values.len()
        } else {
            1
        };
        (rows, cols)
    }

    pub fn region_at(&self, row: usize, col: usize) -> Region {
        self.cells[row * self.shape().1 + col].region
    }

    /// Number of 4-connected components of cells labeled `region`.
    pub fn components(&self, region: Region) -> usize {
        let (rows, cols) = self.shape();
        let mut seen = vec![false; rows * cols];
        let mut count = 0;
        for start in 0..rows * cols {
            if seen[start] || self.cells[start].region != region {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(k) = stack.pop() {
                let (r, c) = (k / cols, k % cols);
                let mut visit = |rr: usize, cc: usize| {
                    let idx = rr * cols + cc;
                    if !seen[idx] && self.cells[idx].region == region {
                        seen[idx] = true;
                        stack.push(idx);
                    }
                };
                if r > 0 {
                    visit(r - 1, c);
                }
                if r + 1 < rows {
                    visit(r + 1, c);
                }
                if c > 0 {
                    visit(r, c - 1);
                }
                if c + 1 < cols {
                    visit(r, c + 1);
                }
            }
        }
        count
    }

    /// Both regions present, each a single connected component.
    pub fn is_two_region_partition(&self) -> bool {
        self.components(Region::Stable) == 1 && self.components(Region::Collapsed) == 1
    }

    pub fn largest_drop(&self) -> Option<&StepDrop> {
        self.drops.iter().max_by(|a, b| a.magnitude().total_cmp(&b.magnitude()))
    }
}
