//! Experiment settings: a flat `key=value` map merged from an optional config
//! file and command-line flags (flags win), then resolved into typed values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use cascadefin::{Leverage, ReferenceCascade, SyntheticConfig};

/// Keys accepted in config files, in the order they are written back.
pub const KEYS: &[&str] = &[
    "command",
    "input",
    "synthetic",
    "labels",
    "asset",
    "p",
    "alpha",
    "eta",
    "seed",
    "replicates",
    "threshold",
    "classification",
    "bins",
];

pub const SEED_ENV: &str = "CASCADEFIN_SEED";

/// Invalid invocation or configuration; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse_conf(text: &str) -> anyhow::Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(usage(format!("config line {}: expected key=value", n + 1)));
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(usage(format!("config line {}: unknown key `{key}`", n + 1)));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Settings { values })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_conf(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(KEYS.contains(&key));
        self.values.insert(key.to_string(), value.into());
    }

    pub fn remove(&mut self, key: &str) {
        self.values.remove(key);
    }

    pub fn set_default(&mut self, key: &str, value: &str) {
        self.values.entry(key.to_string()).or_insert_with(|| value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> anyhow::Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| usage(format!("invalid value for --{key}: `{v}`")))
            })
            .transpose()
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Flat `key=value` text that reproduces these settings via `--config`.
    pub fn to_conf(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            if let Some(v) = self.values.get(*key) {
                out.push_str(&format!("{key}={v}\n"));
            }
        }
        out
    }
}

fn round12(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Scalar `v`, comma list `a,b,c`, or inclusive range `lo:hi:step`.
pub fn parse_grid(name: &str, spec: &str) -> anyhow::Result<Vec<f64>> {
    let bad = || usage(format!("invalid grid for --{name}: `{spec}`"));
    let num =
        |s: &str| -> anyhow::Result<f64> { s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad) };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [lo, hi, step] = parts[..] else {
            return Err(bad());
        };
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| round12(lo + k as f64 * step)).collect());
    }
    spec.split(',').map(num).collect()
}

pub fn required_scalar(name: &str, settings: &Settings) -> anyhow::Result<f64> {
    let spec = settings
        .get(name)
        .ok_or_else(|| usage(format!("--{name} is required")))?;
    match parse_grid(name, spec)?[..] {
        [v] => Ok(v),
        _ => Err(usage(format!("--{name} must be a single value for this command"))),
    }
}

/// `--seed` if given; otherwise the environment fallback, which is only
/// honoured when every η is zero.
pub fn resolve_seed(settings: &Settings, etas: &[f64]) -> anyhow::Result<u64> {
    if let Some(seed) = settings.parse::<u64>("seed")? {
        return Ok(seed);
    }
    if etas.iter().any(|&e| e > 0.0) {
        return Err(usage("--seed is required when eta > 0"));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV} is not an unsigned integer: `{v}`"))),
        Err(_) => Ok(0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub config: SyntheticConfig,
    pub seed: u64,
}

const SYNTH_KEYS: &[&str] = &[
    "banks",
    "assets",
    "seed",
    "median_total_assets",
    "size_sigma",
    "concentration",
    "sparsity",
    "leverage",
    "leverage_min",
    "leverage_max",
    "equity_mean",
    "equity_sd",
    "equity_min",
    "equity_max",
    "label_asset",
    "label_p",
    "label_alpha",
    "label_eta",
    "label_seed",
];

/// Comma-separated `key=value` pairs, e.g.
/// `banks=2000,leverage=normal_equity,equity_mean=0.1,label_p=0.6`.
pub fn parse_synthetic(spec: &str) -> anyhow::Result<SyntheticSpec> {
    let mut kv = BTreeMap::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("--synthetic: expected key=value, got `{part}`")))?;
        let k = k.trim();
        if !SYNTH_KEYS.contains(&k) {
            return Err(usage(format!("--synthetic: unknown key `{k}`")));
        }
        kv.insert(k, v.trim());
    }
    fn get<T: std::str::FromStr>(kv: &BTreeMap<&str, &str>, key: &str) -> anyhow::Result<Option<T>> {
        kv.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| usage(format!("--synthetic: invalid {key} `{v}`")))
            })
            .transpose()
    }

    let mut config = SyntheticConfig::default();
    if let Some(v) = get(&kv, "banks")? {
        config.banks = v;
    }
    if let Some(v) = get(&kv, "assets")? {
        config.assets = v;
    }
    if let Some(v) = get(&kv, "median_total_assets")? {
        config.median_total_assets = v;
    }
    if let Some(v) = get(&kv, "size_sigma")? {
        config.size_sigma = v;
    }
    if let Some(v) = get(&kv, "concentration")? {
        config.concentration = v;
    }
    if let Some(v) = get(&kv, "sparsity")? {
        config.sparsity = v;
    }
    config.leverage = match kv.get("leverage").copied().unwrap_or("uniform") {
        "uniform" => {
            let Leverage::Uniform { min, max } = Leverage::default() else {
                unreachable!()
            };
            Leverage::Uniform {
                min: get(&kv, "leverage_min")?.unwrap_or(min),
                max: get(&kv, "leverage_max")?.unwrap_or(max),
            }
        }
        "normal_equity" => Leverage::NormalEquity {
            mean: get(&kv, "equity_mean")?.unwrap_or(0.10),
            sd: get(&kv, "equity_sd")?.unwrap_or(0.025),
            min: get(&kv, "equity_min")?.unwrap_or(0.005),
            max: get(&kv, "equity_max")?.unwrap_or(0.3),
        },
        other => return Err(usage(format!("--synthetic: unknown leverage `{other}`"))),
    };
    if let Some(p) = get::<f64>(&kv, "label_p")? {
        let eta: f64 = get(&kv, "label_eta")?.unwrap_or(0.0);
        let seed = get(&kv, "label_seed")?;
        if eta > 0.0 && seed.is_none() {
            return Err(usage("--synthetic: label_seed is required when label_eta > 0"));
        }
        config.reference = Some(ReferenceCascade {
            asset: get(&kv, "label_asset")?.unwrap_or(0),
            p,
            alpha: get(&kv, "label_alpha")?.unwrap_or(0.0),
            eta,
            seed: seed.unwrap_or(0),
        });
    } else if ["label_asset", "label_alpha", "label_eta", "label_seed"]
        .iter()
        .any(|k| kv.contains_key(k))
    {
        return Err(usage("--synthetic: label_* keys need label_p"));
    }
    Ok(SyntheticSpec {
        config,
        seed: get(&kv, "seed")?.unwrap_or(0),
    })
}
