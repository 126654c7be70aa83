//! Subcommand implementations. Every command that writes to `--out` also
//! writes `experiment.conf` (re-runnable via `--config`) and `manifest.json`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use cascadefin::evaluation::DEFAULT_REPLICATES;
use cascadefin::ingest::{read_balance_sheets, read_labels, write_labels, write_network};
use cascadefin::report::{
    write_cascade_json, write_density_csv, write_phase_csv, write_roc_csv, write_sweep_csv, write_transition_csv,
};
use cascadefin::rng::RNG_ALGORITHM;
use cascadefin::stats::Histogram;
use cascadefin::{
    complete_rows, generate_synthetic, phase_scan, roc_grid, run_cascade, summary_statistics, sweep_survival, Axis,
    BankAssetNetwork, CascadeParams, Classification, GroundTruthLabels, Param, ParamLattice, ParamPoint, PhaseOptions,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{parse_grid, parse_synthetic, required_scalar, resolve_seed, usage, Settings};

const STREAM_SCHEME: &str = "stream = (cell_index << 32) | replicate_index";

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
struct InputRecord {
    role: &'static str,
    path: String,
    sha256: String,
}

#[derive(Debug, Clone, Default, Serialize)]
struct Seeds {
    master: Option<u64>,
    synthetic: Option<u64>,
    label_reference: Option<u64>,
}

#[derive(Debug, Serialize)]
struct RngRecord {
    algorithm: &'static str,
    streams: &'static str,
}

#[derive(Debug, Serialize)]
struct FileRecord {
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a BTreeMap<String, String>,
    inputs: &'a [InputRecord],
    seeds: &'a Seeds,
    rng: RngRecord,
    grid: Option<&'a ParamLattice>,
    outputs: Vec<FileRecord>,
}

struct Source {
    network: BankAssetNetwork,
    labels: Option<GroundTruthLabels>,
    inputs: Vec<InputRecord>,
    seeds: Seeds,
}

fn read_input(path: &str) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("cannot read {path}"))
}

fn load_source(settings: &Settings) -> anyhow::Result<Source> {
    let mut inputs = Vec::new();
    let mut seeds = Seeds::default();
    let (network, mut labels) = match (settings.get("input"), settings.get("synthetic")) {
        (Some(_), Some(_)) => return Err(usage("--input and --synthetic are mutually exclusive")),
        (None, None) => return Err(usage("one of --input or --synthetic is required")),
        (Some(path), None) => {
            let bytes = read_input(path)?;
            inputs.push(InputRecord {
                role: "balance_sheets",
                path: path.to_string(),
                sha256: sha256_hex(&bytes),
            });
            let completed = complete_rows(&read_balance_sheets(&bytes[..])?)?;
            if !completed.repairs.is_empty() {
                log::warn!(
                    "{} balance sheet(s) completed or rescaled on load",
                    completed.repairs.len()
                );
            }
            (completed.network, None)
        }
        (None, Some(spec)) => {
            let spec = parse_synthetic(spec)?;
            seeds.synthetic = Some(spec.seed);
            seeds.label_reference = spec.config.reference.as_ref().map(|r| r.seed);
            let data = generate_synthetic(&spec.config, spec.seed)?;
            (data.network, data.labels)
        }
    };
    if let Some(path) = settings.get("labels") {
        let bytes = read_input(path)?;
        inputs.push(InputRecord {
            role: "labels",
            path: path.to_string(),
            sha256: sha256_hex(&bytes),
        });
        let loaded = read_labels(&bytes[..])?;
        let coverage = loaded.labels.coverage(&network);
        if coverage.present < coverage.listed {
            log::warn!(
                "{} of {} labeled bank(s) are not in the network and are ignored",
                coverage.listed - coverage.present,
                coverage.listed
            );
        }
        labels = Some(loaded.labels);
    }
    Ok(Source {
        network,
        labels,
        inputs,
        seeds,
    })
}

fn asset(settings: &Settings) -> anyhow::Result<usize> {
    Ok(settings.parse("asset")?.unwrap_or(0))
}

fn lattice(settings: &Settings) -> anyhow::Result<ParamLattice> {
    let grid = |key| parse_grid(key, settings.get(key).unwrap_or_default());
    Ok(ParamLattice {
        alpha: grid("alpha")?,
        eta: grid("eta")?,
        p: grid("p")?,
    })
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> cascadefin::Result<()>) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Everything a command produced, written out together with its manifest.
struct Run<'a> {
    command: &'a str,
    settings: Settings,
    inputs: Vec<InputRecord>,
    seeds: Seeds,
    grid: Option<ParamLattice>,
    files: Vec<(&'static str, Vec<u8>)>,
}

impl Run<'_> {
    fn write(self, out: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        let mut settings = self.settings;
        settings.set("command", self.command);
        let conf = format!(
            "# cascadefin {} --config experiment.conf\n{}",
            self.command,
            settings.to_conf()
        );
        let mut files = self.files;
        files.push(("experiment.conf", conf.into_bytes()));
        let mut outputs = Vec::new();
        for (name, bytes) in &files {
            let path = out.join(name);
            std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
            outputs.push(FileRecord {
                file: name.to_string(),
                sha256: sha256_hex(bytes),
            });
        }
        let manifest = Manifest {
            tool: "cascadefin",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: settings.map(),
            inputs: &self.inputs,
            seeds: &self.seeds,
            rng: RngRecord {
                algorithm: RNG_ALGORITHM,
                streams: STREAM_SCHEME,
            },
            grid: self.grid.as_ref(),
            outputs,
        };
        let mut json = serde_json::to_vec_pretty(&manifest)?;
        json.push(b'\n');
        let path = out.join("manifest.json");
        std::fs::write(&path, json).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

fn require_out(out: Option<&Path>, command: &str) -> anyhow::Result<PathBuf> {
    out.map(Path::to_path_buf)
        .ok_or_else(|| usage(format!("{command} requires --out <DIR>")))
}

pub fn ingest(settings: Settings, out: Option<&Path>) -> anyhow::Result<()> {
    let out = require_out(out, "ingest")?;
    let path = settings
        .get("input")
        .ok_or_else(|| usage("ingest requires --input"))?
        .to_string();
    let bytes = read_input(&path)?;
    let rows = read_balance_sheets(&bytes[..])?;
    let completed = complete_rows(&rows)?;

    #[derive(Serialize)]
    struct RepairReport<'a> {
        rows: usize,
        imputed_rows: usize,
        imputed_cells: usize,
        repaired: usize,
        average_weights: &'a cascadefin::AverageWeights,
        repairs: &'a [cascadefin::RepairRecord],
    }
    let report = RepairReport {
        rows: rows.len(),
        imputed_rows: rows.iter().filter(|r| r.missing().next().is_some()).count(),
        imputed_cells: rows.iter().map(|r| r.missing().count()).sum(),
        repaired: completed.repairs.len(),
        average_weights: &completed.averages,
        repairs: &completed.repairs,
    };
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    Run {
        command: "ingest",
        inputs: vec![InputRecord {
            role: "balance_sheets",
            path,
            sha256: sha256_hex(&bytes),
        }],
        settings,
        seeds: Seeds::default(),
        grid: None,
        files: vec![
            ("completed.csv", render(|w| write_network(&completed.network, w))?),
            ("repairs.json", json),
        ],
    }
    .write(&out)
}

pub fn generate(settings: Settings, out: Option<&Path>) -> anyhow::Result<()> {
    let out = require_out(out, "generate")?;
    if settings.get("synthetic").is_none() {
        return Err(usage("generate requires --synthetic"));
    }
    let source = load_source(&settings)?;
    let mut files = vec![("network.csv", render(|w| write_network(&source.network, w))?)];
    if let Some(labels) = &source.labels {
        files.push(("labels.csv", render(|w| write_labels(labels, w))?));
    }
    Run {
        command: "generate",
        settings,
        inputs: source.inputs,
        seeds: source.seeds,
        grid: None,
        files,
    }
    .write(&out)
}

pub fn run(mut settings: Settings, out: Option<&Path>) -> anyhow::Result<()> {
    settings.set_default("asset", "0");
    let p = required_scalar("p", &settings)?;
    let alpha = required_scalar("alpha", &settings)?;
    let eta = required_scalar("eta", &settings)?;
    let seed = resolve_seed(&settings, &[eta])?;
    settings.set("seed", seed.to_string());
    let source = load_source(&settings)?;
    let params = CascadeParams::single(asset(&settings)?, p, alpha, eta).with_seed(seed);
    let result = run_cascade(&source.network, &params, source.labels.as_ref())?;
    let json = render(|w| write_cascade_json(&source.network, &params, &result, w))?;
    match out {
        None => std::io::stdout().write_all(&json).context("cannot write to stdout"),
        Some(out) => Run {
            command: "run",
            settings,
            inputs: source.inputs,
            seeds: Seeds {
                master: Some(seed),
                ..source.seeds
            },
            grid: Some(ParamLattice {
                alpha: vec![alpha],
                eta: vec![eta],
                p: vec![p],
            }),
            files: vec![("cascade.json", json)],
        }
        .write(out),
    }
}

pub fn sweep(mut settings: Settings, out: Option<&Path>) -> anyhow::Result<()> {
    let out = require_out(out, "sweep")?;
    settings.set_default("asset", "0");
    settings.set_default("p", "0:1:0.02");
    settings.set_default("alpha", "0:0.1:0.01");
    settings.set_default("eta", "0");
    settings.set_default("replicates", &DEFAULT_REPLICATES.to_string());
    let lattice = lattice(&settings)?;
    let seed = resolve_seed(&settings, &lattice.eta)?;
    settings.set("seed", seed.to_string());
    let replicates: usize = settings.parse("replicates")?.unwrap_or(DEFAULT_REPLICATES);
    let source = load_source(&settings)?;
    let grid = sweep_survival(
        &source.network,
        source.labels.as_ref(),
        asset(&settings)?,
        &lattice.cells(),
        replicates,
        seed,
    )?;
    Run {
        command: "sweep",
        settings,
        inputs: source.inputs,
        seeds: Seeds {
            master: Some(seed),
            ..source.seeds
        },
        grid: Some(lattice),
        files: vec![("survival.csv", render(|w| write_sweep_csv(&grid, w))?)],
    }
    .write(&out)
}

pub fn roc(mut settings: Settings, out: Option<&Path>) -> anyhow::Result<()> {
    let out = require_out(out, "roc")?;
    settings.set_default("asset", "0");
    settings.set_default("p", "0:1:0.02");
    settings.set_default("alpha", "0:1:0.02");
    settings.set_default("eta", "0:0.5:0.02");
    settings.set_default("classification", "single");
    let classification = match settings.get("classification") {
        Some("single") => Classification::SingleRun,
        Some("majority") => {
            settings.set_default("replicates", &DEFAULT_REPLICATES.to_string());
            Classification::MajorityVote(settings.parse("replicates")?.unwrap_or(DEFAULT_REPLICATES))
        }
        Some(other) => {
            return Err(usage(format!(
                "--classification must be single or majority, got `{other}`"
            )))
        }
        None => unreachable!(),
    };
    let lattice = lattice(&settings)?;
    let seed = resolve_seed(&settings, &lattice.eta)?;
    settings.set("seed", seed.to_string());
    let source = load_source(&settings)?;
    let labels = source
        .labels
        .as_ref()
        .ok_or_else(|| usage("roc requires --labels (or label_p in --synthetic)"))?;
    let report = roc_grid(
        &source.network,
        labels,
        asset(&settings)?,
        &lattice,
        classification,
        seed,
    )?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Run {
        command: "roc",
        settings,
        inputs: source.inputs,
        seeds: Seeds {
            master: Some(seed),
            ..source.seeds
        },
        grid: Some(lattice),
        files: vec![("roc.csv", render(|w| write_roc_csv(&report.points, w))?)],
    }
    .write(&out)
}

pub fn phase(mut settings: Settings, out: Option<&Path>) -> anyhow::Result<()> {
    let out = require_out(out, "phase")?;
    settings.set_default("asset", "0");
    settings.set_default("p", "0:1:0.02");
    settings.set_default("alpha", "0:1:0.02");
    settings.set_default("eta", "0.26");
    settings.set_default("replicates", &DEFAULT_REPLICATES.to_string());
    settings.set_default("threshold", "0.05");
    let lattice = lattice(&settings)?;
    let seed = resolve_seed(&settings, &lattice.eta)?;
    settings.set("seed", seed.to_string());

    let mut axes = Vec::new();
    for (param, values) in [
        (Param::P, &lattice.p),
        (Param::Alpha, &lattice.alpha),
        (Param::Eta, &lattice.eta),
    ] {
        if values.len() > 1 {
            axes.push(Axis {
                param,
                values: values.clone(),
            });
        }
    }
    if axes.is_empty() || axes.len() > 2 {
        return Err(usage("phase needs one or two of --p/--alpha/--eta given as ranges"));
    }
    let fixed = ParamPoint {
        alpha: lattice.alpha[0],
        eta: lattice.eta[0],
        p: lattice.p[0],
    };
    let options = PhaseOptions {
        replicates: settings.parse("replicates")?.unwrap_or(DEFAULT_REPLICATES),
        threshold: settings.parse("threshold")?.unwrap_or(0.05),
        seed,
    };
    let source = load_source(&settings)?;
    let diagram = phase_scan(&source.network, asset(&settings)?, &axes, fixed, &options)?;
    Run {
        command: "phase",
        settings,
        inputs: source.inputs,
        seeds: Seeds {
            master: Some(seed),
            ..source.seeds
        },
        grid: Some(lattice),
        files: vec![
            ("phase.csv", render(|w| write_phase_csv(&diagram, w))?),
            ("transition.csv", render(|w| write_transition_csv(&diagram, w))?),
        ],
    }
    .write(&out)
}

pub fn stats(mut settings: Settings, out: Option<&Path>) -> anyhow::Result<()> {
    let out = require_out(out, "stats")?;
    settings.set_default("bins", "50");
    let bins: usize = settings.parse("bins")?.unwrap_or(50);
    if bins == 0 {
        return Err(usage("--bins must be positive"));
    }
    let source = load_source(&settings)?;
    let labels = source.labels.clone().unwrap_or_default();
    let edges = Histogram::uniform(0.0, 1.0, bins).edges;
    let tables = summary_statistics(&source.network, &labels, Some(edges));
    Run {
        command: "stats",
        settings,
        inputs: source.inputs,
        seeds: source.seeds,
        grid: None,
        files: vec![("densities.csv", render(|w| write_density_csv(&tables, w))?)],
    }
    .write(&out)
}
