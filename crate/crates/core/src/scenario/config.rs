//! Scenario configuration: a versioned TOML document.
//!
//! Parsing fills defaults; [`load_config`] then validates the whole document
//! and reports every problem with its key path.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::hierarchy::Cadence;
use crate::thermal::{ThermostatConfig, ThermostatKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConfigError {
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    Invalid {
        issues: Vec<ConfigIssue>,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse {
                line,
                column,
                message,
            } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            ConfigError::Invalid { issues } => {
                write!(f, "{} validation error(s)", issues.len())?;
                for i in issues {
                    write!(f, "\n  {i}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub device_tick_s: u64,
    pub market_interval_s: u64,
    pub agc_tick_s: u64,
    pub schedule_interval_s: u64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        let c = Cadence::default();
        TimeConfig {
            device_tick_s: c.device_s,
            market_interval_s: c.market_s,
            agc_tick_s: c.agc_s,
            schedule_interval_s: c.schedule_s,
        }
    }
}

impl TimeConfig {
    pub fn cadence(&self) -> Cadence {
        Cadence {
            agc_s: self.agc_tick_s,
            device_s: self.device_tick_s,
            market_s: self.market_interval_s,
            schedule_s: self.schedule_interval_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketConfig {
    pub price_floor: f64,
    pub price_cap: f64,
    /// Clearings retained for expected price and volatility.
    pub price_window: usize,
    pub prior_mean: f64,
    pub prior_sigma: f64,
    /// Market intervals averaged into the next day-ahead forecast.
    pub availability_lookback: usize,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            price_floor: 0.0,
            price_cap: 1000.0,
            price_window: 12,
            prior_mean: 30.0,
            prior_sigma: 10.0,
            availability_lookback: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputsConfig {
    pub outdoor_temperature_c: Option<f64>,
    pub outdoor_temperature_csv: Option<String>,
    pub da_price: Option<f64>,
    pub da_price_csv: Option<String>,
    /// Longest run of missing samples that may be interpolated.
    pub max_gap: usize,
}

impl Default for InputsConfig {
    fn default() -> Self {
        InputsConfig {
            outdoor_temperature_c: None,
            outdoor_temperature_csv: None,
            da_price: None,
            da_price_csv: None,
            max_gap: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThermostatChoice {
    Hysteresis,
    Tdz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Temperatures spread over the band, random on/off.
    Diverse,
    /// Every house at `initial_t_in` with `initial_on`.
    Synchronized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationConfig {
    pub thermostat: ThermostatChoice,
    /// Bid into the feeder market; otherwise a plain thermostat.
    pub transactive: bool,
    pub r_median: f64,
    pub c_median: f64,
    /// Geometric spread of R and C (0.2 = ±20 %).
    pub spread: f64,
    pub q_hvac: f64,
    pub p_rated: f64,
    pub t_desired: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub deadband: f64,
    pub k_median: f64,
    pub k_spread: f64,
    pub initial: InitialState,
    pub initial_t_in: f64,
    pub initial_on: bool,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            thermostat: ThermostatChoice::Hysteresis,
            transactive: true,
            r_median: 2.0,
            c_median: 2.0,
            spread: 0.2,
            q_hvac: -10.0,
            p_rated: 3.5,
            t_desired: 22.0,
            t_min: 20.0,
            t_max: 24.0,
            deadband: 1.0,
            k_median: 2.0,
            k_spread: 0.0,
            initial: InitialState::Diverse,
            initial_t_in: 22.0,
            initial_on: false,
        }
    }
}

impl PopulationConfig {
    pub fn thermostat_config(&self) -> ThermostatConfig {
        ThermostatConfig {
            t_desired: self.t_desired,
            t_min: self.t_min,
            t_max: self.t_max,
            kind: match self.thermostat {
                ThermostatChoice::Hysteresis => ThermostatKind::Hysteresis {
                    deadband: self.deadband,
                },
                ThermostatChoice::Tdz => ThermostatKind::Tdz,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StorageFleetConfig {
    pub capacity_kwh: f64,
    pub soc_kwh: f64,
    pub p_charge_kw: f64,
    pub p_discharge_kw: f64,
    pub buy_below: f64,
    pub sell_above: f64,
    pub efficiency: f64,
}

impl Default for StorageFleetConfig {
    fn default() -> Self {
        StorageFleetConfig {
            capacity_kwh: 10.0,
            soc_kwh: 5.0,
            p_charge_kw: 4.0,
            p_discharge_kw: 4.0,
            buy_below: 20.0,
            sell_above: 60.0,
            efficiency: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterconnectionConfig {
    pub f_nominal: f64,
    /// Inertial gain M, Hz/s per MW.
    pub m: f64,
    /// Frequency correction D, 1/s (must be negative).
    pub d: f64,
    /// Time error (s) beyond which the scheduled frequency is offset.
    pub tec_threshold_s: f64,
}

impl Default for InterconnectionConfig {
    fn default() -> Self {
        InterconnectionConfig {
            f_nominal: 60.0,
            m: 0.1,
            d: -0.2,
            tec_threshold_s: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationEvent {
    pub at_s: u64,
    /// Step change in the area's generation, MW (negative for a loss).
    pub delta_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeederConfig {
    pub id: String,
    pub capacity_kw: f64,
    /// `[price, extra_kw]` pairs above the wholesale price.
    pub scarcity_steps: Vec<(f64, f64)>,
    pub houses: usize,
    pub storage: usize,
}

impl Default for FeederConfig {
    fn default() -> Self {
        FeederConfig {
            id: String::new(),
            capacity_kw: 1.0e6,
            scarcity_steps: Vec::new(),
            houses: 0,
            storage: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AreaConfig {
    pub id: String,
    /// Frequency bias B, MW per 0.1 Hz (conventionally negative).
    pub bias_mw_per_0_1hz: f64,
    pub scheduled_interchange_mw: f64,
    pub metering_error_mw: f64,
    pub renewables_price: f64,
    pub renewables_kw: f64,
    pub bulk_kw: f64,
    pub alpha: f64,
    pub beta: f64,
    pub agc_tau_s: f64,
    pub agc_gain: f64,
    pub regulation_capacity_mw: f64,
    /// |filtered ACE| above which feeders follow the balancing signal.
    pub contingency_ace_mw: f64,
    pub ufls_threshold_hz: f64,
    pub ufls_probability: f64,
    pub ufls_armed_fraction: f64,
    pub ufls_hold_s: f64,
    pub events: Vec<GenerationEvent>,
    pub feeders: Vec<FeederConfig>,
}

impl Default for AreaConfig {
    fn default() -> Self {
        AreaConfig {
            id: String::new(),
            bias_mw_per_0_1hz: -0.01,
            scheduled_interchange_mw: 0.0,
            metering_error_mw: 0.0,
            renewables_price: 10.0,
            renewables_kw: 0.0,
            bulk_kw: 1.0e9,
            alpha: 0.0,
            beta: 0.0,
            agc_tau_s: 60.0,
            agc_gain: 0.5,
            regulation_capacity_mw: 0.0,
            contingency_ace_mw: f64::INFINITY,
            ufls_threshold_hz: 59.95,
            ufls_probability: 1.0,
            ufls_armed_fraction: 0.0,
            ufls_hold_s: 60.0,
            events: Vec::new(),
            feeders: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub house_trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start: chrono::DateTime<chrono::Utc>,
    pub span_s: u64,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub market: MarketConfig,
    #[serde(default)]
    pub inputs: InputsConfig,
    #[serde(default)]
    pub population: PopulationConfig,
    #[serde(default)]
    pub storage: StorageFleetConfig,
    #[serde(default)]
    pub interconnection: InterconnectionConfig,
    #[serde(default)]
    pub areas: Vec<AreaConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_start() -> chrono::DateTime<chrono::Utc> {
    chrono::DateTime::<chrono::Utc>::UNIX_EPOCH
}

impl ScenarioConfig {
    /// SHA-256 of the canonical JSON form of the validated config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn house_count(&self) -> usize {
        self.areas
            .iter()
            .flat_map(|a| &a.feeders)
            .map(|f| f.houses)
            .sum()
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |i| before.len() - i - 1)
        + 1;
    (line, column)
}

/// Parse and validate a scenario document.
pub fn load_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let issues = validate(&cfg);
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid { issues })
    }
}

struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn check(&mut self, ok: bool, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.0.push(ConfigIssue {
                path: path.into(),
                message: message.into(),
            });
        }
    }

    fn fraction(&mut self, v: f64, path: String) {
        self.check(
            (0.0..=1.0).contains(&v),
            path,
            format!("must lie in [0, 1], got {v}"),
        );
    }
}

/// Every semantic problem in the document.
pub fn validate(cfg: &ScenarioConfig) -> Vec<ConfigIssue> {
    let mut v = Issues(Vec::new());
    v.check(
        cfg.schema_version == SCHEMA_VERSION,
        "schema_version",
        format!(
            "unsupported schema version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version
        ),
    );

    let t = &cfg.time;
    if let Err(e) = t.cadence().validate() {
        let key = e.split_whitespace().next().unwrap_or("time").to_string();
        v.check(false, format!("time.{key}"), e);
    }
    v.check(cfg.span_s > 0, "span_s", "must be > 0");
    if t.market_interval_s > 0 {
        v.check(
            cfg.span_s.is_multiple_of(t.market_interval_s),
            "span_s",
            format!(
                "{} s is not a whole number of market intervals ({} s)",
                cfg.span_s, t.market_interval_s
            ),
        );
    }

    let m = &cfg.market;
    v.check(
        m.price_floor.is_finite() && m.price_cap.is_finite() && m.price_floor < m.price_cap,
        "market.price_cap",
        format!(
            "need price_floor < price_cap, got {} / {}",
            m.price_floor, m.price_cap
        ),
    );
    v.check(m.price_window >= 2, "market.price_window", "must be >= 2");
    v.check(m.prior_sigma >= 0.0, "market.prior_sigma", "must be >= 0");
    v.check(
        m.availability_lookback >= 1,
        "market.availability_lookback",
        "must be >= 1",
    );

    let i = &cfg.inputs;
    v.check(
        i.outdoor_temperature_c.is_some() != i.outdoor_temperature_csv.is_some(),
        "inputs.outdoor_temperature_c",
        "set exactly one of outdoor_temperature_c and outdoor_temperature_csv",
    );
    v.check(
        i.da_price.is_some() != i.da_price_csv.is_some(),
        "inputs.da_price",
        "set exactly one of da_price and da_price_csv",
    );
    if let Some(p) = i.da_price {
        v.check(
            p >= m.price_floor && p <= m.price_cap,
            "inputs.da_price",
            "must lie within the market price limits",
        );
    }

    let p = &cfg.population;
    v.check(
        p.t_min < p.t_max,
        "population.t_min",
        format!("t_min ({}) must be below t_max ({})", p.t_min, p.t_max),
    );
    v.check(
        p.t_min < p.t_desired && p.t_desired < p.t_max,
        "population.t_desired",
        "must lie strictly between t_min and t_max",
    );
    if p.thermostat == ThermostatChoice::Hysteresis {
        v.check(
            p.deadband > 0.0,
            "population.deadband",
            "must be > 0 for hysteresis thermostats",
        );
    }
    v.check(p.r_median > 0.0, "population.r_median", "must be > 0");
    v.check(p.c_median > 0.0, "population.c_median", "must be > 0");
    v.check(p.spread >= 0.0, "population.spread", "must be >= 0");
    v.check(
        p.q_hvac != 0.0 && p.q_hvac.is_finite(),
        "population.q_hvac",
        "must be non-zero",
    );
    v.check(p.p_rated > 0.0, "population.p_rated", "must be > 0");
    v.check(p.k_median >= 0.0, "population.k_median", "must be >= 0");
    v.check(p.k_spread >= 0.0, "population.k_spread", "must be >= 0");

    let s = &cfg.storage;
    v.check(
        s.capacity_kwh >= 0.0,
        "storage.capacity_kwh",
        "capacity must be >= 0",
    );
    v.check(
        s.soc_kwh >= 0.0 && s.soc_kwh <= s.capacity_kwh,
        "storage.soc_kwh",
        "must lie in [0, capacity_kwh]",
    );
    v.check(s.p_charge_kw > 0.0, "storage.p_charge_kw", "must be > 0");
    v.check(
        s.p_discharge_kw > 0.0,
        "storage.p_discharge_kw",
        "must be > 0",
    );
    v.check(
        s.buy_below < s.sell_above,
        "storage.buy_below",
        "must be below sell_above",
    );
    v.check(
        s.efficiency > 0.0 && s.efficiency <= 1.0,
        "storage.efficiency",
        "must lie in (0, 1]",
    );
    v.check(
        s.buy_below >= m.price_floor && s.sell_above <= m.price_cap,
        "storage.sell_above",
        "storage thresholds must lie within the market price limits",
    );

    let ic = &cfg.interconnection;
    v.check(
        ic.f_nominal > 0.0,
        "interconnection.f_nominal",
        "must be > 0",
    );
    v.check(
        ic.m > 0.0,
        "interconnection.m",
        format!("inertial gain M must be > 0, got {}", ic.m),
    );
    v.check(
        ic.d < 0.0,
        "interconnection.d",
        format!(
            "D must be < 0 for a stable fixed point of df/dt = M·ΔP + D·Δf, got {}",
            ic.d
        ),
    );
    v.check(
        (t.agc_tick_s as f64) * ic.d.abs() < 1.0,
        "interconnection.d",
        format!(
            "explicit swing step unstable: agc_tick_s·|D| = {} must be < 1",
            t.agc_tick_s as f64 * ic.d.abs()
        ),
    );
    v.check(
        ic.tec_threshold_s > 0.0,
        "interconnection.tec_threshold_s",
        "must be > 0",
    );

    v.check(
        !cfg.areas.is_empty(),
        "areas",
        "at least one area is required",
    );
    let mut area_ids = BTreeSet::new();
    let mut feeder_ids = BTreeSet::new();
    for (ai, a) in cfg.areas.iter().enumerate() {
        let at = |k: &str| format!("areas[{ai}].{k}");
        v.check(!a.id.is_empty(), at("id"), "must be set");
        v.check(
            area_ids.insert(a.id.clone()),
            at("id"),
            format!("duplicate area id {:?}", a.id),
        );
        v.fraction(a.alpha, at("alpha"));
        v.fraction(a.beta, at("beta"));
        v.fraction(a.ufls_probability, at("ufls_probability"));
        v.fraction(a.ufls_armed_fraction, at("ufls_armed_fraction"));
        v.check(a.agc_tau_s > 0.0, at("agc_tau_s"), "must be > 0");
        v.check(a.agc_gain >= 0.0, at("agc_gain"), "must be >= 0");
        v.check(
            a.regulation_capacity_mw >= 0.0,
            at("regulation_capacity_mw"),
            "must be >= 0",
        );
        v.check(a.ufls_hold_s >= 0.0, at("ufls_hold_s"), "must be >= 0");
        v.check(a.renewables_kw >= 0.0, at("renewables_kw"), "must be >= 0");
        v.check(a.bulk_kw >= 0.0, at("bulk_kw"), "must be >= 0");
        v.check(
            a.renewables_price >= m.price_floor && a.renewables_price <= m.price_cap,
            at("renewables_price"),
            "must lie within the market price limits",
        );
        for (ei, e) in a.events.iter().enumerate() {
            v.check(
                e.at_s < cfg.span_s,
                at(&format!("events[{ei}].at_s")),
                "event falls outside the simulated span",
            );
        }
        for (fi, f) in a.feeders.iter().enumerate() {
            let ft = |k: &str| format!("areas[{ai}].feeders[{fi}].{k}");
            v.check(!f.id.is_empty(), ft("id"), "must be set");
            v.check(
                feeder_ids.insert(f.id.clone()),
                ft("id"),
                format!("duplicate feeder id {:?}", f.id),
            );
            v.check(
                f.capacity_kw >= 0.0,
                ft("capacity_kw"),
                format!("capacity must be >= 0, got {}", f.capacity_kw),
            );
            let mut last = f64::NEG_INFINITY;
            for (si, &(price, kw)) in f.scarcity_steps.iter().enumerate() {
                let path = ft(&format!("scarcity_steps[{si}]"));
                v.check(
                    price > last,
                    path.clone(),
                    "step prices must strictly increase",
                );
                v.check(kw >= 0.0, path.clone(), "step quantity must be >= 0");
                v.check(
                    price <= m.price_cap,
                    path,
                    "step price above the market price cap",
                );
                last = price;
            }
        }
    }
    v.0
}
