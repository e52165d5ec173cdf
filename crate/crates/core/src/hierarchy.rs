//! Multi-temporal coordination: hourly scheduling, 5-minute feeder
//! redispatch, feeder reference blending and two-settlement accounting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::{
    build_demand_curve, build_feeder_supply, clear, clear_area, AreaSupply, AuctionError,
    ClearingResult, FeederSupplySpec, PriceLimits, StepCurve,
};
use crate::bidding::{Bid, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("expected {expected} hourly entries, got {got}")]
    MissingHours { expected: usize, got: usize },
    #[error("expected {expected} feeders, got {got}")]
    FeederCount { expected: usize, got: usize },
    #[error("hour {0} is not in the schedule")]
    HourNotScheduled(usize),
    #[error("feeder {feeder}: {reason}")]
    BadFeeder { feeder: usize, reason: String },
    #[error(
        "settlement rows misaligned at row {row}: position ({pp}, {pi}) vs actual ({ap}, {ai})"
    )]
    Misaligned {
        row: usize,
        pp: String,
        pi: u64,
        ap: String,
        ai: u64,
    },
    #[error("settlement inputs differ in length: {0} positions vs {1} actuals")]
    LengthMismatch(usize, usize),
    #[error("no cleared intervals to learn availability from")]
    NoHistory,
    #[error(transparent)]
    Auction(#[from] AuctionError),
}

pub const HOURS_PER_DAY: usize = 24;

/// kW held for `hours` → MWh.
pub fn mwh(kw: f64, hours: f64) -> f64 {
    kw * hours / 1000.0
}

/// Cost in $ of `kw` for `hours` at `price` $/MWh.
pub fn dollars(price: f64, kw: f64, hours: f64) -> f64 {
    price * mwh(kw, hours)
}

/// Area resources offered in the day-ahead run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayAheadSupply {
    pub renewables_price: f64,
    pub renewables_kw: f64,
    pub bulk_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub hour: usize,
    /// Day-ahead area price, $/MWh.
    pub price: f64,
    /// Area energy for the hour, MWh.
    pub energy_mwh: f64,
    /// Financially binding feeder positions, kW.
    pub feeder_positions_kw: Vec<f64>,
    /// Forecast curves this entry was cleared from.
    #[serde(skip)]
    pub availability: Vec<StepCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
}

impl Schedule {
    pub fn entry(&self, hour: usize) -> Result<&ScheduleEntry, HierarchyError> {
        self.entries
            .iter()
            .find(|e| e.hour == hour)
            .ok_or(HierarchyError::HourNotScheduled(hour))
    }
}

fn anchored(
    spec: &FeederSupplySpec,
    price: f64,
    feeder: usize,
) -> Result<FeederSupplySpec, HierarchyError> {
    let s = FeederSupplySpec {
        wholesale_price: price,
        ..spec.clone()
    };
    s.validate()
        .map_err(|reason| HierarchyError::BadFeeder { feeder, reason })?;
    Ok(s)
}

/// Clear one hour of forecast feeder demand against renewables then bulk.
///
/// The area clearing fixes the hourly price; each feeder's position is its
/// own retail clearing against supply anchored at that price, so feeder
/// capacity limits apply to positions too.
pub fn schedule_hour(
    hour: usize,
    availability: &[StepCurve],
    da_price: f64,
    supply: DayAheadSupply,
    feeders: &[FeederSupplySpec],
    limits: PriceLimits,
) -> Result<ScheduleEntry, HierarchyError> {
    if availability.len() != feeders.len() {
        return Err(HierarchyError::FeederCount {
            expected: feeders.len(),
            got: availability.len(),
        });
    }
    let area = clear_area(
        availability,
        AreaSupply {
            renewables_price: supply.renewables_price,
            renewables_kw: supply.renewables_kw,
            bulk_price: da_price,
            bulk_kw: supply.bulk_kw,
        },
        limits,
    )?;
    let price = area.result.price;
    let feeder_positions_kw = feeders
        .iter()
        .zip(availability)
        .enumerate()
        .map(|(i, (spec, demand))| {
            let supply = build_feeder_supply(&anchored(spec, price, i)?, &[], limits)?;
            Ok(clear(demand, &supply, limits).quantity)
        })
        .collect::<Result<Vec<f64>, HierarchyError>>()?;
    Ok(ScheduleEntry {
        hour,
        price,
        energy_mwh: mwh(area.result.quantity, 1.0),
        feeder_positions_kw,
        availability: availability.to_vec(),
    })
}

/// Day-ahead schedule: one [`schedule_hour`] per hour of the day.
pub fn schedule_hourly(
    availability: &[Vec<StepCurve>],
    da_prices: &[f64],
    supply: DayAheadSupply,
    feeders: &[FeederSupplySpec],
    limits: PriceLimits,
) -> Result<Schedule, HierarchyError> {
    if da_prices.len() != HOURS_PER_DAY {
        return Err(HierarchyError::MissingHours {
            expected: HOURS_PER_DAY,
            got: da_prices.len(),
        });
    }
    if availability.len() != HOURS_PER_DAY {
        return Err(HierarchyError::MissingHours {
            expected: HOURS_PER_DAY,
            got: availability.len(),
        });
    }
    let entries = (0..HOURS_PER_DAY)
        .map(|h| schedule_hour(h, &availability[h], da_prices[h], supply, feeders, limits))
        .collect::<Result<_, _>>()?;
    Ok(Schedule { entries })
}

/// Live order book of one feeder.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeederBook {
    pub buys: Vec<Bid>,
    pub sells: Vec<Bid>,
}

/// Money flows of one feeder retail clearing, $.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RetailLedger {
    pub buyer_payments: f64,
    /// Paid to local sellers (storage, DG) at the retail price.
    pub local_seller_receipts: f64,
    /// Paid for grid import at the wholesale anchor.
    pub grid_cost: f64,
    /// Retail minus wholesale on grid import, kept by the market maker.
    pub scarcity_rent: f64,
}

impl RetailLedger {
    pub fn seller_receipts(&self) -> f64 {
        self.local_seller_receipts + self.grid_cost
    }

    /// `buyers − (sellers + rent)`; zero up to rounding.
    pub fn imbalance(&self) -> f64 {
        self.buyer_payments - (self.seller_receipts() + self.scarcity_rent)
    }
}

pub fn retail_ledger(result: &ClearingResult, anchor_price: f64, hours: f64) -> RetailLedger {
    let mut ledger = RetailLedger::default();
    for f in &result.accepted_buys {
        ledger.buyer_payments += dollars(result.price, f.quantity, hours);
    }
    for f in &result.accepted_sells {
        if f.id.is_grid() {
            ledger.grid_cost += dollars(anchor_price, f.quantity, hours);
            ledger.scarcity_rent += dollars(result.price - anchor_price, f.quantity, hours);
        } else {
            ledger.local_seller_receipts += dollars(result.price, f.quantity, hours);
        }
    }
    ledger
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederDispatch {
    pub feeder: usize,
    pub setpoint_kw: f64,
    pub price: f64,
    pub anchor_price: f64,
    pub scheduled_kw: f64,
    /// Setpoint minus scheduled position, kW.
    pub deviation_kw: f64,
    pub supply_total_kw: f64,
    pub demand_total_kw: f64,
    pub clearing: ClearingResult,
    pub ledger: RetailLedger,
    #[serde(skip)]
    pub demand: StepCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub feeders: Vec<FeederDispatch>,
}

/// Run every feeder's retail auction for one market interval.
///
/// Supply is anchored at the scheduled hourly price plus the feeder's
/// scarcity headroom and local sell offers.
pub fn redispatch_5min(
    entry: &ScheduleEntry,
    books: &[FeederBook],
    feeders: &[FeederSupplySpec],
    limits: PriceLimits,
    interval_h: f64,
) -> Result<Dispatch, HierarchyError> {
    if books.len() != feeders.len() || entry.feeder_positions_kw.len() != feeders.len() {
        return Err(HierarchyError::FeederCount {
            expected: feeders.len(),
            got: books.len(),
        });
    }
    let feeders = feeders
        .iter()
        .zip(books)
        .enumerate()
        .map(|(i, (spec, book))| {
            let spec = anchored(spec, entry.price, i)?;
            let demand = build_demand_curve(&book.buys, limits)?;
            let supply = build_feeder_supply(&spec, &book.sells, limits)?;
            let clearing = clear(&demand, &supply, limits);
            let scheduled_kw = entry.feeder_positions_kw[i];
            Ok(FeederDispatch {
                feeder: i,
                setpoint_kw: clearing.quantity,
                price: clearing.price,
                anchor_price: entry.price,
                scheduled_kw,
                deviation_kw: clearing.quantity - scheduled_kw,
                supply_total_kw: supply.total_quantity(),
                demand_total_kw: demand.total_quantity(),
                ledger: retail_ledger(&clearing, entry.price, interval_h),
                clearing,
                demand,
            })
        })
        .collect::<Result<_, HierarchyError>>()?;
    Ok(Dispatch { feeders })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    Normal,
    Contingency,
}

impl ControlMode {
    /// Weight on the market reference.
    pub fn market_weight(self) -> f64 {
        match self {
            ControlMode::Normal => 0.9,
            ControlMode::Contingency => 0.1,
        }
    }

    /// Contingency when filtered ACE is large or load shedding fired recently.
    pub fn select(ace_filtered: f64, ace_threshold: f64, ufls_recent: bool) -> ControlMode {
        if ace_filtered.abs() > ace_threshold || ufls_recent {
            ControlMode::Contingency
        } else {
            ControlMode::Normal
        }
    }
}

/// Blend the market and balancing references for a feeder.
pub fn feeder_reference(p_retail: f64, p_balance: f64, mode: ControlMode) -> f64 {
    p_balance + mode.market_weight() * (p_retail - p_balance)
}

/// Mean demand curve over recent intervals, used as the next forecast.
pub fn availability_feedback(
    recent: &[StepCurve],
    limits: PriceLimits,
) -> Result<StepCurve, HierarchyError> {
    if recent.is_empty() {
        return Err(HierarchyError::NoHistory);
    }
    let scale = 1.0 / recent.len() as f64;
    let scaled: Vec<StepCurve> = recent.iter().map(|c| c.scaled(scale)).collect();
    let side = recent[0].side;
    let merged = StepCurve::from_orders(
        side,
        scaled.iter().flat_map(|c| c.orders().copied()),
        limits,
    )?;
    debug_assert_eq!(merged.side, Side::Buy);
    Ok(merged)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub participant: String,
    pub interval: u64,
    pub da_mwh: f64,
    pub da_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actual {
    pub participant: String,
    pub interval: u64,
    pub mwh: f64,
    pub rt_price: f64,
}

/// One settled participant-interval. Positive payment means the participant
/// pays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlementRecord {
    pub participant: String,
    pub interval: u64,
    pub da_mwh: f64,
    pub da_price: f64,
    pub rt_dev_mwh: f64,
    pub rt_price: f64,
    pub payment: f64,
}

impl SettlementRecord {
    pub fn rt_payment(&self) -> f64 {
        self.rt_dev_mwh * self.rt_price
    }

    pub const CSV_HEADER: &'static str =
        "participant,interval,da_MWh,da_price,rt_dev_MWh,rt_price,payment";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.participant,
            self.interval,
            self.da_mwh,
            self.da_price,
            self.rt_dev_mwh,
            self.rt_price,
            self.payment
        )
    }
}

/// Day-ahead position at the day-ahead price plus deviation at real time.
pub fn settle(
    positions: &[Position],
    actuals: &[Actual],
) -> Result<Vec<SettlementRecord>, HierarchyError> {
    if positions.len() != actuals.len() {
        return Err(HierarchyError::LengthMismatch(
            positions.len(),
            actuals.len(),
        ));
    }
    positions
        .iter()
        .zip(actuals)
        .enumerate()
        .map(|(row, (p, a))| {
            if p.participant != a.participant || p.interval != a.interval {
                return Err(HierarchyError::Misaligned {
                    row,
                    pp: p.participant.clone(),
                    pi: p.interval,
                    ap: a.participant.clone(),
                    ai: a.interval,
                });
            }
            let rt_dev_mwh = a.mwh - p.da_mwh;
            Ok(SettlementRecord {
                participant: p.participant.clone(),
                interval: p.interval,
                da_mwh: p.da_mwh,
                da_price: p.da_price,
                rt_dev_mwh,
                rt_price: a.rt_price,
                payment: p.da_mwh * p.da_price + rt_dev_mwh * a.rt_price,
            })
        })
        .collect()
}

/// Net real-time energy across participants, MWh.
pub fn system_imbalance(records: &[SettlementRecord]) -> f64 {
    records.iter().map(|r| r.rt_dev_mwh).sum()
}

/// Tick lengths of the nested loops, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cadence {
    pub agc_s: u64,
    pub device_s: u64,
    pub market_s: u64,
    pub schedule_s: u64,
}

impl Default for Cadence {
    fn default() -> Self {
        Cadence {
            agc_s: 4,
            device_s: 60,
            market_s: 300,
            schedule_s: 3600,
        }
    }
}

impl Cadence {
    /// Each tick must divide its parent interval exactly.
    pub fn validate(&self) -> Result<(), String> {
        let pairs = [
            ("agc_tick_s", self.agc_s, "device_tick_s", self.device_s),
            (
                "device_tick_s",
                self.device_s,
                "market_interval_s",
                self.market_s,
            ),
            (
                "market_interval_s",
                self.market_s,
                "schedule_interval_s",
                self.schedule_s,
            ),
        ];
        for (child, c, parent, p) in pairs {
            if c == 0 {
                return Err(format!("{child} must be > 0"));
            }
            if p % c != 0 {
                return Err(format!(
                    "{child} ({c} s) must divide {parent} ({p} s) exactly"
                ));
            }
        }
        Ok(())
    }
}
