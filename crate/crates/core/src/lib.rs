//! Cascading bank failures on a bipartite bank-asset network.
//!
//! Banks hold amounts of asset categories; a shock devalues one asset, banks
//! whose assets fall below a randomized distress barrier fail, and their fire
//! sales depress prices further until the cascade stops. Around the engine
//! sit balance-sheet ingestion, seeded synthetic data, and sweep/ROC/phase
//! analyses.

pub mod cascade;
pub mod error;
pub mod evaluation;
pub mod ingest;
pub mod network;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synth;

pub use cascade::{
    apply_initial_shock, failure_probability, run_cascade, run_cascade_observed, CascadeParams, CascadeResult,
    Diagnostics, Fate, RoundState,
};
pub use error::{Error, Result};
pub use evaluation::{
    attribution_split, phase_scan, roc_grid, survival_curves, sweep_survival, Attribution, Axis, Classification,
    MeanCi, Param, ParamLattice, ParamPoint, PhaseDiagram, PhaseOptions, Region, RocPoint, RocReport, Split,
    SurvivalRow, SweepGrid,
};
pub use ingest::{
    complete_balance_sheet, complete_rows, compute_average_weights, load_labels, AverageWeights, GroundTruthLabels,
    RawBalanceSheetRow, RepairAction, RepairRecord,
};
pub use network::{weight, AssetCategory, AssetGroup, BalanceSheet, BankAssetNetwork};
pub use stats::{summary_statistics, SummaryTables};
pub use synth::{generate_synthetic, Leverage, ReferenceCascade, SyntheticConfig, SyntheticDataset};
