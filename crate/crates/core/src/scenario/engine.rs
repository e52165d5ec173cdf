//! The master tick loop.
//!
//! Order at each AGC tick `t`: day-ahead schedule (hour boundaries), feeder
//! and area markets (market boundaries), device decisions (device
//! boundaries), AGC and frequency, then house integration over the next
//! device tick.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::auction::{clear_area, AreaSupply, DeviceId, FeederSupplySpec, PriceLimits, StepCurve};
use crate::bidding::{
    apply_clearing_to_storage, setpoint_from_price, storage_bids, thermostat_bid,
    update_price_stats, Bid, PriceStats, Side,
};
use crate::frequency::{
    nerc_ace, swing_step, tec_offset, time_error_step, AceInputs, AgcController, FrequencyState,
    RegulationSplit, SwingParams, UflsRelay,
};
use crate::hierarchy::{
    availability_feedback, feeder_reference, mwh, redispatch_5min, schedule_hour, settle, Actual,
    ControlMode, DayAheadSupply, Dispatch, FeederBook, Position, ScheduleEntry, SettlementRecord,
};
use crate::spectral::{Series, Unit};
use crate::thermal::{hysteresis_decide, step_house, tdz_decide, Mode, ThermostatKind};

use super::artifacts::{RunArtifacts, Summary};
use super::config::{ConfigError, ScenarioConfig};
use super::ingest::{ingest_series, IngestError};
use super::population::{stream_rng, synthesize, FeederFleet, STREAM_UFLS};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("t = {tick_s} s, {module}: {message}")]
    Module {
        tick_s: u64,
        module: &'static str,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn at<E: std::fmt::Display>(tick_s: u64, module: &'static str) -> impl Fn(E) -> ScenarioError {
    move |e| ScenarioError::Module {
        tick_s,
        module,
        message: e.to_string(),
    }
}

/// An exogenous input: constant or a sampled series.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Constant(f64),
    Series(Series),
}

impl Signal {
    pub fn at(&self, t: chrono::DateTime<chrono::Utc>) -> f64 {
        match self {
            Signal::Constant(v) => *v,
            Signal::Series(s) => s.sample(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunInputs {
    pub outdoor_c: Signal,
    /// Wholesale day-ahead price, $/MWh.
    pub da_price: Signal,
}

impl RunInputs {
    /// Resolve the inputs named by the config; relative paths are taken
    /// from `base_dir`.
    pub fn from_config(cfg: &ScenarioConfig, base_dir: &Path) -> Result<Self, ScenarioError> {
        let i = &cfg.inputs;
        let load =
            |path: &Option<String>, constant: Option<f64>, unit| -> Result<Signal, ScenarioError> {
                match (constant, path) {
                    (Some(v), _) => Ok(Signal::Constant(v)),
                    (None, Some(p)) => Ok(Signal::Series(ingest_series(
                        &base_dir.join(p),
                        unit,
                        i.max_gap,
                    )?)),
                    (None, None) => Ok(Signal::Constant(0.0)),
                }
            };
        Ok(RunInputs {
            outdoor_c: load(
                &i.outdoor_temperature_csv,
                i.outdoor_temperature_c,
                Unit::Celsius,
            )?,
            da_price: load(&i.da_price_csv, i.da_price, Unit::DollarsPerMwh)?,
        })
    }
}

#[derive(Serialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum Event<'a> {
    Schedule {
        t: u64,
        area: &'a str,
        hour: usize,
        price: f64,
        energy_mwh: f64,
        feeder_positions_kw: &'a [f64],
    },
    Bid {
        t: u64,
        market_id: &'a str,
        device_id: DeviceId,
        side: Side,
        price: f64,
        quantity: f64,
    },
    Clearing {
        t: u64,
        market_id: &'a str,
        price: f64,
        quantity: f64,
        n_buys: usize,
        n_sells: usize,
    },
    Ufls {
        t: u64,
        area: &'a str,
        f: f64,
        shed: usize,
    },
}

struct FeederState {
    id: String,
    spec: FeederSupplySpec,
    fleet: FeederFleet,
    stats: PriceStats,
    history: VecDeque<StepCurve>,
    /// Regulation nudge as a fraction of each device's distance to limit.
    nudge: f64,
    prices: Vec<f64>,
    anchors: Vec<f64>,
    quantities: Vec<f64>,
}

impl FeederState {
    fn flexible_kw(&self) -> f64 {
        self.fleet
            .houses
            .iter()
            .map(|h| h.house.params.p_rated)
            .sum()
    }
}

struct AreaState {
    id: String,
    feeders: Vec<FeederState>,
    agc: AgcController,
    relay: UflsRelay,
    entry: Option<ScheduleEntry>,
    dispatch: Option<Dispatch>,
    rt_price: f64,
    /// Base generation, redispatched to metered load each market interval.
    dispatch_kw: f64,
    reg_to_gens: f64,
    mode: ControlMode,
    last_ufls_s: Option<u64>,
}

struct Writers {
    events: String,
    frequency: String,
    markets: String,
    load: String,
    settlement: String,
    retail: String,
    trace: Option<String>,
}

impl Writers {
    fn event(&mut self, e: &Event<'_>) {
        self.events
            .push_str(&serde_json::to_string(e).expect("event serializes"));
        self.events.push('\n');
    }
}

/// Seconds within which a shed event keeps feeders in contingency mode.
const UFLS_RECENT_S: u64 = 300;

fn house_bid(
    a: &super::population::HouseAgent,
    stats: &PriceStats,
    limits: PriceLimits,
    tick_s: u64,
) -> Result<Option<Bid>, ScenarioError> {
    let h = &a.house;
    thermostat_bid(
        DeviceId(h.id),
        h.state.t_in,
        &h.thermostat,
        h.state.mode,
        a.comfort,
        stats,
        h.params.p_rated,
        limits,
    )
    .map_err(at(tick_s, "bidding"))
}

/// Setpoint after applying a regulation nudge: positive `nudge` asks for
/// more load, negative for less, as a fraction of the distance to the
/// comfort limit in that direction.
fn nudged_setpoint(base: f64, nudge: f64, t_min: f64, t_max: f64, mode: Mode) -> f64 {
    if nudge == 0.0 {
        return base;
    }
    // Cooling uses more energy at lower setpoints; heating at higher ones.
    let more_load_limit = match mode {
        Mode::Cooling => t_min,
        Mode::Heating => t_max,
    };
    let less_load_limit = match mode {
        Mode::Cooling => t_max,
        Mode::Heating => t_min,
    };
    let target = if nudge > 0.0 {
        more_load_limit
    } else {
        less_load_limit
    };
    base + nudge.abs() * (target - base)
}

/// Run a scenario to completion and collect its artifacts.
pub fn run(cfg: &ScenarioConfig, inputs: &RunInputs) -> Result<RunArtifacts, ScenarioError> {
    let issues = super::config::validate(cfg);
    if !issues.is_empty() {
        return Err(ConfigError::Invalid { issues }.into());
    }
    let limits =
        PriceLimits::new(cfg.market.price_floor, cfg.market.price_cap).map_err(at(0, "auction"))?;
    let cad = cfg.time.cadence();
    let h_agc = cad.agc_s as f64;
    let h_device_h = cad.device_s as f64 / 3600.0;
    let interval_h = cad.market_s as f64 / 3600.0;
    let ic = &cfg.interconnection;
    let swing = SwingParams::new(ic.m, ic.d).map_err(at(0, "frequency"))?;
    swing.check_step(h_agc).map_err(at(0, "frequency"))?;

    let mut ufls_rng: ChaCha8Rng = stream_rng(cfg.seed, STREAM_UFLS);
    let fleets = synthesize(cfg);
    let mut areas: Vec<AreaState> = Vec::with_capacity(cfg.areas.len());
    for (a, area_fleets) in cfg.areas.iter().zip(fleets) {
        let mut feeders = Vec::new();
        let mut armed = Vec::new();
        for (f, fleet) in a.feeders.iter().zip(area_fleets) {
            armed.extend(
                fleet
                    .houses
                    .iter()
                    .filter(|h| h.armed)
                    .map(|h| DeviceId(h.house.id)),
            );
            feeders.push(FeederState {
                id: f.id.clone(),
                spec: FeederSupplySpec {
                    wholesale_price: limits.floor,
                    capacity_normal: f.capacity_kw,
                    scarcity_steps: f.scarcity_steps.clone(),
                    price_cap: limits.cap,
                },
                fleet,
                stats: PriceStats::new(
                    cfg.market.price_window,
                    cfg.market.prior_mean,
                    cfg.market.prior_sigma,
                )
                .map_err(at(0, "bidding"))?,
                history: VecDeque::new(),
                nudge: 0.0,
                prices: Vec::new(),
                anchors: Vec::new(),
                quantities: Vec::new(),
            });
        }
        let split = RegulationSplit::new(a.alpha, a.beta).map_err(at(0, "frequency"))?;
        areas.push(AreaState {
            id: a.id.clone(),
            feeders,
            agc: AgcController::new(a.agc_tau_s, a.agc_gain, a.regulation_capacity_mw, split),
            relay: UflsRelay::new(
                a.ufls_threshold_hz,
                a.ufls_probability,
                a.ufls_hold_s,
                armed,
            )
            .map_err(at(0, "frequency"))?,
            entry: None,
            dispatch: None,
            rt_price: limits.floor,
            dispatch_kw: 0.0,
            reg_to_gens: 0.0,
            mode: ControlMode::Normal,
            last_ufls_s: None,
        });
    }

    let mut w = Writers {
        events: String::new(),
        frequency: "t,area,f,delta_f,ace_raw,ace_filtered,reg_to_loads,reg_to_gens,ufls_shed_kW,time_error\n".into(),
        markets: "t,market_id,price,anchor_price,quantity,capacity_kW,supply_total_kW,demand_total_kW,unserved_kW,n_buys,n_sells\n".into(),
        load: "t,area,load_kW,houses_kW,storage_kW,generation_MW\n".into(),
        settlement: format!("{}\n", SettlementRecord::CSV_HEADER),
        retail: "t,feeder,buyer_payments,local_seller_receipts,grid_cost,scarcity_rent\n".into(),
        trace: cfg.output.house_trace.then(|| "time,house_id,T_in,hvac_on,p\n".to_string()),
    };

    let mut freq = FrequencyState::nominal(ic.f_nominal);
    let mut summary = Summary::new(cfg);
    let mut settlements: Vec<SettlementRecord> = Vec::new();

    let mut t = 0u64;
    while t < cfg.span_s {
        let now = cfg.start + chrono::Duration::seconds(t as i64);
        let t_out = inputs.outdoor_c.at(now);
        let da_price = inputs.da_price.at(now);
        let market_tick = t.is_multiple_of(cad.market_s);
        let schedule_tick = t.is_multiple_of(cad.schedule_s);
        let device_tick = t.is_multiple_of(cad.device_s);

        for (ai, area) in areas.iter_mut().enumerate() {
            let acfg = &cfg.areas[ai];
            if !market_tick {
                continue;
            }
            let books = collect_books(area, limits, t)?;
            if schedule_tick {
                let availability = area
                    .feeders
                    .iter()
                    .zip(&books)
                    .map(|(f, book)| {
                        let recent: Vec<StepCurve> = f.history.iter().cloned().collect();
                        if recent.is_empty() {
                            crate::auction::build_demand_curve(&book.buys, limits)
                                .map_err(at(t, "hierarchy"))
                        } else {
                            availability_feedback(&recent, limits).map_err(at(t, "hierarchy"))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let specs: Vec<FeederSupplySpec> =
                    area.feeders.iter().map(|f| f.spec.clone()).collect();
                let supply = DayAheadSupply {
                    renewables_price: acfg.renewables_price,
                    renewables_kw: acfg.renewables_kw,
                    bulk_kw: acfg.bulk_kw,
                };
                let hour = (t / cad.schedule_s) as usize;
                let entry = schedule_hour(hour, &availability, da_price, supply, &specs, limits)
                    .map_err(at(t, "hierarchy"))?;
                w.event(&Event::Schedule {
                    t,
                    area: &area.id,
                    hour,
                    price: entry.price,
                    energy_mwh: entry.energy_mwh,
                    feeder_positions_kw: &entry.feeder_positions_kw,
                });
                area.entry = Some(entry);
                summary.counts.schedule += usize::from(ai == 0);
            }
            run_market(
                area,
                acfg,
                &books,
                limits,
                interval_h,
                da_price,
                t,
                cad.market_s,
                cfg.market.availability_lookback,
                &mut w,
                &mut settlements,
            )?;
            summary.counts.market += usize::from(ai == 0);
        }

        if device_tick {
            for area in areas.iter_mut() {
                let relay = &area.relay;
                for f in area.feeders.iter_mut() {
                    let nudge = f.nudge;
                    for a in f.fleet.houses.iter_mut() {
                        let th = a.house.thermostat;
                        let mode = a.house.state.mode;
                        a.house.setpoint =
                            nudged_setpoint(a.market_setpoint, nudge, th.t_min, th.t_max, mode);
                        let on = match th.kind {
                            ThermostatKind::Hysteresis { deadband } => hysteresis_decide(
                                a.house.state.t_in,
                                a.house.setpoint,
                                deadband,
                                mode,
                                a.house.state.hvac_on,
                            ),
                            // Switching happens only at market boundaries.
                            ThermostatKind::Tdz => a.house.state.hvac_on,
                        };
                        a.house.state.hvac_on = on && !relay.is_shed(DeviceId(a.house.id));
                    }
                }
            }
            summary.counts.device += 1;
        }

        agc_tick(
            &mut areas,
            cfg,
            &swing,
            &mut freq,
            t,
            h_agc,
            &mut ufls_rng,
            &mut w,
            &mut summary,
        )?;
        summary.counts.agc += 1;

        if device_tick {
            for area in areas.iter_mut() {
                for f in area.feeders.iter_mut() {
                    if let Some(trace) = w.trace.as_mut() {
                        for a in &f.fleet.houses {
                            let s = &a.house.state;
                            let p = if s.hvac_on {
                                a.house.params.p_rated
                            } else {
                                0.0
                            };
                            let _ = writeln!(
                                trace,
                                "{t},{},{},{},{p}",
                                a.house.id,
                                s.t_in,
                                u8::from(s.hvac_on)
                            );
                        }
                    }
                    f.fleet
                        .houses
                        .par_iter_mut()
                        .try_for_each(|a| {
                            a.house.state =
                                step_house(a.house.state, &a.house.params, t_out, h_device_h)?;
                            Ok(())
                        })
                        .map_err(|e: crate::thermal::ThermalError| at(t, "thermal")(e))?;
                }
            }
        }
        t += cad.agc_s;
    }

    for area in &areas {
        for f in &area.feeders {
            summary.add_feeder(
                &f.id,
                &f.prices,
                &f.anchors,
                &f.quantities,
                f.spec.capacity_normal,
            );
        }
    }
    summary.ufls_events = areas.iter().map(|a| a.relay.events()).sum();
    summary.settlement_imbalance = crate::hierarchy::system_imbalance(&settlements);

    let mut files = BTreeMap::new();
    files.insert("events.jsonl".to_string(), w.events.into_bytes());
    files.insert("frequency.csv".to_string(), w.frequency.into_bytes());
    files.insert("markets.csv".to_string(), w.markets.into_bytes());
    files.insert("load.csv".to_string(), w.load.into_bytes());
    files.insert("settlement.csv".to_string(), w.settlement.into_bytes());
    files.insert("retail_ledger.csv".to_string(), w.retail.into_bytes());
    if let Some(trace) = w.trace {
        files.insert("house_trace.csv".to_string(), trace.into_bytes());
    }
    Ok(RunArtifacts::assemble(cfg, files, summary))
}

fn collect_books(
    area: &AreaState,
    limits: PriceLimits,
    t: u64,
) -> Result<Vec<FeederBook>, ScenarioError> {
    area.feeders
        .iter()
        .map(|f| {
            let mut book = FeederBook::default();
            for a in &f.fleet.houses {
                if !a.transactive || area.relay.is_shed(DeviceId(a.house.id)) {
                    continue;
                }
                if let Some(bid) = house_bid(a, &f.stats, limits, t)? {
                    book.buys.push(bid);
                }
            }
            for s in &f.fleet.storage {
                for bid in storage_bids(s.id, &s.cfg) {
                    match bid.side {
                        Side::Buy => book.buys.push(bid),
                        Side::Sell => book.sells.push(bid),
                    }
                }
            }
            Ok(book)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_market(
    area: &mut AreaState,
    acfg: &super::config::AreaConfig,
    books: &[FeederBook],
    limits: PriceLimits,
    interval_h: f64,
    da_price: f64,
    t: u64,
    market_s: u64,
    lookback: usize,
    w: &mut Writers,
    settlements: &mut Vec<SettlementRecord>,
) -> Result<(), ScenarioError> {
    let entry = area
        .entry
        .as_ref()
        .ok_or_else(|| at(t, "hierarchy")("no schedule in force"))?;
    let specs: Vec<FeederSupplySpec> = area.feeders.iter().map(|f| f.spec.clone()).collect();
    let dispatch =
        redispatch_5min(entry, books, &specs, limits, interval_h).map_err(at(t, "hierarchy"))?;
    let curves: Vec<StepCurve> = dispatch.feeders.iter().map(|d| d.demand.clone()).collect();
    let area_clear = clear_area(
        &curves,
        AreaSupply {
            renewables_price: acfg.renewables_price,
            renewables_kw: acfg.renewables_kw,
            bulk_price: da_price,
            bulk_kw: acfg.bulk_kw,
        },
        limits,
    )
    .map_err(at(t, "auction"))?;
    area.rt_price = area_clear.result.price;

    for (book, f) in books.iter().zip(&area.feeders) {
        for b in book.buys.iter().chain(&book.sells) {
            w.event(&Event::Bid {
                t,
                market_id: &f.id,
                device_id: b.device_id,
                side: b.side,
                price: b.price,
                quantity: b.quantity,
            });
        }
    }

    let interval = t / market_s;
    let mut positions = Vec::new();
    let mut actuals = Vec::new();
    for (f, d) in area.feeders.iter_mut().zip(&dispatch.feeders) {
        let c = &d.clearing;
        w.event(&Event::Clearing {
            t,
            market_id: &f.id,
            price: c.price,
            quantity: c.quantity,
            n_buys: c.n_buys,
            n_sells: c.n_sells,
        });
        let _ = writeln!(
            w.markets,
            "{t},{},{},{},{},{},{},{},{},{},{}",
            f.id,
            c.price,
            d.anchor_price,
            c.quantity,
            f.spec.capacity_normal,
            d.supply_total_kw,
            d.demand_total_kw,
            d.demand_total_kw - c.quantity,
            c.n_buys,
            c.n_sells
        );
        let l = &d.ledger;
        let _ = writeln!(
            w.retail,
            "{t},{},{},{},{},{}",
            f.id, l.buyer_payments, l.local_seller_receipts, l.grid_cost, l.scarcity_rent
        );

        // A one-sided book prices at the floor, which says nothing about value.
        let informative = c.n_buys > 0 && c.n_sells > 0;
        for a in f.fleet.houses.iter_mut() {
            let id = DeviceId(a.house.id);
            let th = a.house.thermostat;
            match th.kind {
                ThermostatKind::Tdz => {
                    let on = if a.transactive {
                        let filled = c.buy_fill(id);
                        filled > 0.0 && filled >= a.house.params.p_rated
                    } else {
                        tdz_decide(
                            a.house.state.t_in,
                            a.market_setpoint,
                            a.house.state.mode,
                            a.house.state.hvac_on,
                            true,
                        )
                    };
                    a.house.state.hvac_on = on && !area.relay.is_shed(id);
                }
                ThermostatKind::Hysteresis { .. } => {
                    if a.transactive && informative {
                        a.market_setpoint = setpoint_from_price(
                            c.price,
                            &th,
                            a.house.state.mode,
                            a.comfort,
                            &f.stats,
                        );
                    }
                }
            }
        }
        for s in f.fleet.storage.iter_mut() {
            s.charge_kw = c.buy_fill(s.id);
            s.discharge_kw = c.sell_fill(s.id);
            s.cfg = apply_clearing_to_storage(
                s.cfg,
                s.id,
                &c.accepted_buys,
                &c.accepted_sells,
                interval_h,
            );
        }
        if informative {
            f.stats = update_price_stats(f.stats.clone(), c.price).map_err(at(t, "bidding"))?;
        }
        f.history.push_back(d.demand.clone());
        while f.history.len() > lookback {
            f.history.pop_front();
        }
        f.prices.push(c.price);
        f.anchors.push(d.anchor_price);
        f.quantities.push(c.quantity);

        positions.push(Position {
            participant: f.id.clone(),
            interval,
            da_mwh: mwh(d.scheduled_kw, interval_h),
            da_price: d.anchor_price,
        });
        actuals.push(Actual {
            participant: f.id.clone(),
            interval,
            mwh: mwh(d.setpoint_kw, interval_h),
            rt_price: area.rt_price,
        });
    }
    let ac = &area_clear.result;
    w.event(&Event::Clearing {
        t,
        market_id: &area.id,
        price: ac.price,
        quantity: ac.quantity,
        n_buys: ac.n_buys,
        n_sells: ac.n_sells,
    });

    let records = settle(&positions, &actuals).map_err(at(t, "hierarchy"))?;
    for r in &records {
        w.settlement.push_str(&r.csv_row());
        w.settlement.push('\n');
    }
    settlements.extend(records);
    area.dispatch = Some(dispatch);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn agc_tick(
    areas: &mut [AreaState],
    cfg: &ScenarioConfig,
    swing: &SwingParams,
    freq: &mut FrequencyState,
    t: u64,
    h: f64,
    rng: &mut ChaCha8Rng,
    w: &mut Writers,
    summary: &mut Summary,
) -> Result<(), ScenarioError> {
    let ic = &cfg.interconnection;
    // Net interchange of each area, MW.
    let mut p_a = Vec::with_capacity(areas.len());
    let mut delta_p = 0.0;
    let mut total_load_kw = 0.0;
    for (area, acfg) in areas.iter_mut().zip(&cfg.areas) {
        let (houses_kw, storage_kw) = area_load(area);
        let load_kw = houses_kw + storage_kw;
        let events_mw: f64 = acfg
            .events
            .iter()
            .filter(|e| e.at_s <= t)
            .map(|e| e.delta_mw)
            .sum();
        if t.is_multiple_of(cfg.time.market_interval_s) {
            area.dispatch_kw = load_kw;
        }
        let gen_mw = area.dispatch_kw / 1000.0
            + acfg.scheduled_interchange_mw
            + area.reg_to_gens
            + events_mw;
        let _ = writeln!(
            w.load,
            "{t},{},{load_kw},{houses_kw},{storage_kw},{gen_mw}",
            area.id
        );
        let pa = gen_mw - load_kw / 1000.0;
        delta_p += pa - acfg.scheduled_interchange_mw;
        p_a.push(pa);
        total_load_kw += load_kw;
    }
    summary.record_load(total_load_kw, h);

    freq.delta_f = swing_step(freq.delta_f, delta_p, swing, h).map_err(at(t, "frequency"))?;
    freq.f = ic.f_nominal + freq.delta_f;
    let f_s = ic.f_nominal + tec_offset(freq.time_error, ic.tec_threshold_s);
    summary.record_frequency(freq.f);

    for ((area, acfg), pa) in areas.iter_mut().zip(&cfg.areas).zip(p_a) {
        let raw = nerc_ace(&AceInputs {
            p_a: pa,
            p_s: acfg.scheduled_interchange_mw,
            b: acfg.bias_mw_per_0_1hz,
            f_a: freq.f,
            f_s,
            e_m: acfg.metering_error_mw,
        });
        let cmd = area.agc.tick(raw, h).map_err(at(t, "frequency"))?;
        area.reg_to_gens = cmd.to_generators;

        // Aggregators: spread the load-side command over feeders by flexible kW.
        let fleet_kw: f64 = area.feeders.iter().map(FeederState::flexible_kw).sum();
        let retail_kw: Vec<f64> = area.dispatch.as_ref().map_or(Vec::new(), |d| {
            d.feeders.iter().map(|fd| fd.setpoint_kw).collect()
        });
        for (fi, f) in area.feeders.iter_mut().enumerate() {
            let flex = f.flexible_kw();
            if fleet_kw <= 0.0 || flex <= 0.0 {
                f.nudge = 0.0;
                continue;
            }
            let retail = retail_kw.get(fi).copied().unwrap_or(0.0);
            // Positive regulation means more generation, i.e. less load.
            let balance = retail - cmd.to_aggregators * 1000.0 * flex / fleet_kw;
            let reference = feeder_reference(retail, balance, area.mode);
            f.nudge = ((reference - retail) / flex).clamp(-1.0, 1.0);
        }

        let newly = area
            .relay
            .update(freq.f, h, rng)
            .map_err(at(t, "frequency"))?;
        if !newly.is_empty() {
            area.last_ufls_s = Some(t);
            w.event(&Event::Ufls {
                t,
                area: &area.id,
                f: freq.f,
                shed: newly.len(),
            });
            for f in area.feeders.iter_mut() {
                for a in f.fleet.houses.iter_mut() {
                    if area.relay.is_shed(DeviceId(a.house.id)) {
                        a.house.state.hvac_on = false;
                    }
                }
            }
        }
        let shed_kw: f64 = area
            .feeders
            .iter()
            .flat_map(|f| &f.fleet.houses)
            .filter(|a| area.relay.is_shed(DeviceId(a.house.id)))
            .map(|a| a.house.params.p_rated)
            .fold(0.0, |acc, p| acc + p);
        summary.max_shed_kw = summary.max_shed_kw.max(shed_kw);
        let recent = area.last_ufls_s.is_some_and(|s| t - s <= UFLS_RECENT_S);
        area.mode = ControlMode::select(cmd.ace_filtered, acfg.contingency_ace_mw, recent);
        let _ = writeln!(
            w.frequency,
            "{t},{},{},{},{},{},{},{},{shed_kw},{}",
            area.id,
            freq.f,
            freq.delta_f,
            cmd.ace_raw,
            cmd.ace_filtered,
            // `+ 0.0` turns a clamped -0.0 into 0.0.
            cmd.to_aggregators + 0.0,
            cmd.to_generators + 0.0,
            freq.time_error
        );
    }

    *freq = time_error_step(*freq, ic.f_nominal, h).map_err(at(t, "frequency"))?;
    Ok(())
}

fn area_load(area: &AreaState) -> (f64, f64) {
    let mut houses = 0.0;
    let mut storage = 0.0;
    for f in &area.feeders {
        houses += f
            .fleet
            .houses
            .iter()
            .filter(|a| a.house.state.hvac_on)
            .map(|a| a.house.params.p_rated)
            .sum::<f64>();
        storage += f
            .fleet
            .storage
            .iter()
            .map(|s| s.charge_kw - s.discharge_kw)
            .sum::<f64>();
    }
    (houses, storage)
}
