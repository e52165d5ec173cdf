//! Run outputs: file bodies, summary report and manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ScenarioConfig, SCHEMA_VERSION};
use super::engine::ScenarioError;

/// Consecutive rail switches that count as an oscillation.
pub const OSCILLATION_SWITCHES: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub schedule: usize,
    pub market: usize,
    pub agc: usize,
    pub device: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederOscillation {
    pub feeder: String,
    /// Intervals where the capacity bound and the price rose above the anchor.
    pub congested_intervals: usize,
    /// Changes between congested and uncongested intervals.
    pub switches: usize,
    pub max_consecutive_alternations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    pub span_s: u64,
    pub counts: Counts,
    pub peak_load_kw: f64,
    pub total_energy_kwh: f64,
    pub price_mean: f64,
    pub price_sigma: f64,
    pub price_max: f64,
    pub traded_intervals: usize,
    pub ufls_events: usize,
    pub max_shed_kw: f64,
    pub min_frequency: f64,
    pub max_frequency: f64,
    pub settlement_imbalance: f64,
    pub oscillation_detected: bool,
    pub feeders: Vec<FeederOscillation>,
    #[serde(skip)]
    traded_prices: Vec<f64>,
}

impl Summary {
    pub(crate) fn new(cfg: &ScenarioConfig) -> Self {
        Summary {
            schema_version: SCHEMA_VERSION,
            name: cfg.name.clone(),
            seed: cfg.seed,
            config_hash: cfg.hash(),
            span_s: cfg.span_s,
            counts: Counts::default(),
            peak_load_kw: 0.0,
            total_energy_kwh: 0.0,
            price_mean: 0.0,
            price_sigma: 0.0,
            price_max: 0.0,
            traded_intervals: 0,
            ufls_events: 0,
            max_shed_kw: 0.0,
            min_frequency: cfg.interconnection.f_nominal,
            max_frequency: cfg.interconnection.f_nominal,
            settlement_imbalance: 0.0,
            oscillation_detected: false,
            feeders: Vec::new(),
            traded_prices: Vec::new(),
        }
    }

    pub(crate) fn record_load(&mut self, load_kw: f64, h_s: f64) {
        self.peak_load_kw = self.peak_load_kw.max(load_kw);
        self.total_energy_kwh += load_kw * h_s / 3600.0;
    }

    pub(crate) fn record_frequency(&mut self, f: f64) {
        self.min_frequency = self.min_frequency.min(f);
        self.max_frequency = self.max_frequency.max(f);
    }

    pub(crate) fn add_feeder(
        &mut self,
        id: &str,
        prices: &[f64],
        anchors: &[f64],
        quantities: &[f64],
        capacity_kw: f64,
    ) {
        let congested: Vec<bool> = prices
            .iter()
            .zip(anchors)
            .zip(quantities)
            .map(|((&p, &a), &q)| is_congested(p, a, q, capacity_kw))
            .collect();
        let (switches, max_run) = detect_alternations(&congested);
        self.oscillation_detected |= max_run >= OSCILLATION_SWITCHES;
        self.feeders.push(FeederOscillation {
            feeder: id.to_string(),
            congested_intervals: congested.iter().filter(|&&c| c).count(),
            switches,
            max_consecutive_alternations: max_run,
        });
        for (&p, &q) in prices.iter().zip(quantities) {
            if q > 0.0 {
                self.traded_prices.push(p);
            }
        }
        let n = self.traded_prices.len();
        self.traded_intervals = n;
        if n > 0 {
            let mean = self.traded_prices.iter().sum::<f64>() / n as f64;
            let var = self
                .traded_prices
                .iter()
                .map(|p| (p - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            self.price_mean = mean;
            self.price_sigma = var.sqrt();
            self.price_max = self
                .traded_prices
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
}

/// The feeder limit binds and scarcity lifts the price above the anchor.
pub fn is_congested(price: f64, anchor: f64, quantity: f64, capacity_kw: f64) -> bool {
    quantity > 0.0 && quantity >= capacity_kw && price > anchor
}

/// Total state changes and the longest run of back-to-back changes.
pub fn detect_alternations(high: &[bool]) -> (usize, usize) {
    let mut switches = 0;
    let mut run = 0;
    let mut best = 0;
    for w in high.windows(2) {
        if w[0] != w[1] {
            switches += 1;
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    (switches, best)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    pub files: BTreeMap<String, FileEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    /// File name to contents, including `summary.json` and `manifest.json`.
    pub files: BTreeMap<String, Vec<u8>>,
    pub summary: Summary,
    pub manifest: Manifest,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunArtifacts {
    pub(crate) fn assemble(
        cfg: &ScenarioConfig,
        mut files: BTreeMap<String, Vec<u8>>,
        summary: Summary,
    ) -> Self {
        let mut json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
        json.push(b'\n');
        files.insert("summary.json".into(), json);
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            name: cfg.name.clone(),
            seed: cfg.seed,
            config_hash: cfg.hash(),
            files: files
                .iter()
                .map(|(name, body)| {
                    (
                        name.clone(),
                        FileEntry {
                            sha256: sha256_hex(body),
                            bytes: body.len(),
                        },
                    )
                })
                .collect(),
        };
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        files.insert("manifest.json".into(), json);
        RunArtifacts {
            files,
            summary,
            manifest,
        }
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files
            .get(name)
            .and_then(|b| std::str::from_utf8(b).ok())
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), ScenarioError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| ScenarioError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, body) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(io(&path))?;
        }
        Ok(())
    }
}
