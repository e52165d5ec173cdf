//! Device controllers that turn state into bids and cleared prices back into
//! setpoints, plus threshold bidding for storage.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::{DeviceId, Fill, PriceLimits};
use crate::thermal::{Mode, ThermostatConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BiddingError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("comfort band is degenerate (t_max == t_desired or t_min == t_desired)")]
    DegenerateComfortBand,
    #[error("comfort slider k must be >= 0, got {0}")]
    NegativeComfort(f64),
    #[error("invalid storage configuration: {0}")]
    BadStorage(String),
    #[error("price window must hold at least 2 clearings, got {0}")]
    BadWindow(usize),
}

/// Rolling statistics of recent cleared prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceStats {
    window: usize,
    history: VecDeque<f64>,
    prior_mean: f64,
    prior_sigma: f64,
}

impl PriceStats {
    pub const DEFAULT_PRIOR_MEAN: f64 = 30.0;
    pub const DEFAULT_PRIOR_SIGMA: f64 = 10.0;

    pub fn new(window: usize, prior_mean: f64, prior_sigma: f64) -> Result<Self, BiddingError> {
        if window < 2 {
            return Err(BiddingError::BadWindow(window));
        }
        if !(prior_mean.is_finite() && prior_sigma.is_finite()) || prior_sigma < 0.0 {
            return Err(BiddingError::NonFinite("price prior"));
        }
        Ok(PriceStats {
            window,
            history: VecDeque::with_capacity(window),
            prior_mean,
            prior_sigma,
        })
    }

    pub fn with_window(window: usize) -> Result<Self, BiddingError> {
        Self::new(window, Self::DEFAULT_PRIOR_MEAN, Self::DEFAULT_PRIOR_SIGMA)
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn observations(&self) -> usize {
        self.history.len()
    }

    fn warmed_up(&self) -> bool {
        self.history.len() >= self.window
    }

    /// Mean of the retained clearings, or the prior until the window fills.
    pub fn expected(&self) -> f64 {
        if !self.warmed_up() {
            return self.prior_mean;
        }
        self.history.iter().sum::<f64>() / self.history.len() as f64
    }

    /// Population standard deviation of the retained clearings, or the prior.
    pub fn sigma(&self) -> f64 {
        if !self.warmed_up() {
            return self.prior_sigma;
        }
        let mean = self.expected();
        let n = self.history.len() as f64;
        (self.history.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt()
    }
}

pub fn update_price_stats(mut stats: PriceStats, p_clear: f64) -> Result<PriceStats, BiddingError> {
    if !p_clear.is_finite() {
        return Err(BiddingError::NonFinite("p_clear"));
    }
    if stats.history.len() == stats.window {
        stats.history.pop_front();
    }
    stats.history.push_back(p_clear);
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub device_id: DeviceId,
    pub side: Side,
    /// $/MWh
    pub price: f64,
    /// kW
    pub quantity: f64,
    /// false for must-run orders placed at the price cap.
    pub flexible: bool,
}

/// Comfort slider; 0 makes the device ignore price entirely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortSetting {
    pub k: f64,
}

impl ComfortSetting {
    pub fn new(k: f64) -> Result<Self, BiddingError> {
        if !k.is_finite() {
            return Err(BiddingError::NonFinite("k"));
        }
        if k < 0.0 {
            return Err(BiddingError::NegativeComfort(k));
        }
        Ok(ComfortSetting { k })
    }
}

// Width of the comfort band on the side where the device needs service.
fn service_half_band(cfg: &ThermostatConfig, mode: Mode) -> f64 {
    match mode {
        Mode::Cooling => (cfg.t_max - cfg.t_desired).abs(),
        Mode::Heating => (cfg.t_desired - cfg.t_min).abs(),
    }
}

pub fn validate_comfort_band(cfg: &ThermostatConfig) -> Result<(), BiddingError> {
    if cfg.t_max == cfg.t_desired || cfg.t_min == cfg.t_desired {
        return Err(BiddingError::DegenerateComfortBand);
    }
    Ok(())
}

/// Unclamped price on the bid line for a measured temperature.
fn line_price(t: f64, cfg: &ThermostatConfig, mode: Mode, k: f64, stats: &PriceStats) -> f64 {
    let need = mode.need_sign() * (t - cfg.t_desired);
    stats.expected() + k * stats.sigma() * need / service_half_band(cfg, mode)
}

/// Price-responsive thermostat bid for an on/off unit.
///
/// Cooling: no bid below `t_min`; a must-run bid at the cap at or above
/// `t_max`; in between the price follows a line through `P_expected` at
/// `t_desired` with slope `k * sigma_P` per comfort half-band, clamped to the
/// line's own values at the band edges. Heating mirrors this.
/// With `k == 0` the unit bids at the cap whenever it bids at all.
#[allow(clippy::too_many_arguments)]
pub fn thermostat_bid(
    device_id: DeviceId,
    t_measured: f64,
    cfg: &ThermostatConfig,
    mode: Mode,
    comfort: ComfortSetting,
    stats: &PriceStats,
    p_rated: f64,
    limits: PriceLimits,
) -> Result<Option<Bid>, BiddingError> {
    if !t_measured.is_finite() {
        return Err(BiddingError::NonFinite("t_measured"));
    }
    validate_comfort_band(cfg)?;
    let (no_service, must_run) = match mode {
        Mode::Cooling => (t_measured < cfg.t_min, t_measured >= cfg.t_max),
        Mode::Heating => (t_measured > cfg.t_max, t_measured <= cfg.t_min),
    };
    if no_service {
        return Ok(None);
    }
    let buy = |price, flexible| Bid {
        device_id,
        side: Side::Buy,
        price,
        quantity: p_rated,
        flexible,
    };
    if must_run || comfort.k == 0.0 {
        return Ok(Some(buy(limits.cap, false)));
    }
    let (t_low, t_high) = match mode {
        Mode::Cooling => (cfg.t_min, cfg.t_max),
        Mode::Heating => (cfg.t_max, cfg.t_min),
    };
    let p_min = limits.clamp(line_price(t_low, cfg, mode, comfort.k, stats));
    let p_max = limits.clamp(line_price(t_high, cfg, mode, comfort.k, stats));
    let raw = line_price(t_measured, cfg, mode, comfort.k, stats);
    Ok(Some(buy(raw.clamp(p_min, p_max), true)))
}

/// Setpoint implied by a cleared price; the inverse of the bid line.
pub fn setpoint_from_price(
    p_clear: f64,
    cfg: &ThermostatConfig,
    mode: Mode,
    comfort: ComfortSetting,
    stats: &PriceStats,
) -> f64 {
    let slope = comfort.k * stats.sigma();
    if slope <= 0.0 {
        return cfg.t_desired;
    }
    let offset = (p_clear - stats.expected()) * service_half_band(cfg, mode) / slope;
    (cfg.t_desired + mode.need_sign() * offset).clamp(cfg.t_min, cfg.t_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageConfig {
    /// kWh
    pub capacity: f64,
    /// kWh
    pub soc: f64,
    /// kW
    pub p_charge: f64,
    /// kW
    pub p_discharge: f64,
    /// $/MWh
    pub buy_below: f64,
    /// $/MWh
    pub sell_above: f64,
    /// Round-trip efficiency in (0, 1].
    pub efficiency: f64,
}

impl StorageConfig {
    pub fn validate(&self) -> Result<(), BiddingError> {
        let all = [
            self.capacity,
            self.soc,
            self.p_charge,
            self.p_discharge,
            self.buy_below,
            self.sell_above,
            self.efficiency,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(BiddingError::NonFinite("storage configuration"));
        }
        if self.capacity < 0.0 || self.soc < 0.0 || self.soc > self.capacity {
            return Err(BiddingError::BadStorage(format!(
                "need 0 <= soc <= capacity, got soc {} capacity {}",
                self.soc, self.capacity
            )));
        }
        if self.p_charge <= 0.0 || self.p_discharge <= 0.0 {
            return Err(BiddingError::BadStorage("power limits must be > 0".into()));
        }
        if self.buy_below >= self.sell_above {
            return Err(BiddingError::BadStorage(format!(
                "buy_below ({}) must be below sell_above ({})",
                self.buy_below, self.sell_above
            )));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(BiddingError::BadStorage(format!(
                "efficiency {} outside (0, 1]",
                self.efficiency
            )));
        }
        Ok(())
    }
}

/// Charge bid when not full, discharge offer when not empty.
pub fn storage_bids(device_id: DeviceId, cfg: &StorageConfig) -> Vec<Bid> {
    let mut bids = Vec::with_capacity(2);
    if cfg.soc < cfg.capacity {
        bids.push(Bid {
            device_id,
            side: Side::Buy,
            price: cfg.buy_below,
            quantity: cfg.p_charge,
            flexible: true,
        });
    }
    if cfg.soc > 0.0 {
        bids.push(Bid {
            device_id,
            side: Side::Sell,
            price: cfg.sell_above,
            quantity: cfg.p_discharge,
            flexible: true,
        });
    }
    bids
}

/// Move energy in or out of the battery according to its accepted fills.
///
/// Losses are split evenly between charge and discharge (`sqrt(efficiency)`
/// each way).
///
/// # Panics
/// If the same device has both a charge and a discharge fill; the auction
/// cannot produce that for a non-crossing pair of thresholds.
pub fn apply_clearing_to_storage(
    mut cfg: StorageConfig,
    device_id: DeviceId,
    buy_fills: &[Fill],
    sell_fills: &[Fill],
    h: f64,
) -> StorageConfig {
    let charge: f64 = buy_fills
        .iter()
        .filter(|f| f.id == device_id)
        .map(|f| f.quantity)
        .sum();
    let discharge: f64 = sell_fills
        .iter()
        .filter(|f| f.id == device_id)
        .map(|f| f.quantity)
        .sum();
    assert!(
        !(charge > 0.0 && discharge > 0.0),
        "storage {device_id} accepted for both charge and discharge"
    );
    let leg = cfg.efficiency.sqrt();
    cfg.soc = (cfg.soc + charge * h * leg - discharge * h / leg).clamp(0.0, cfg.capacity);
    cfg
}
