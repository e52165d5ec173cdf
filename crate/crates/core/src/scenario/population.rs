//! Seeded synthesis of house and storage fleets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::auction::DeviceId;
use crate::bidding::{ComfortSetting, StorageConfig};
use crate::thermal::{House, ThermalParams};

use super::config::{
    InitialState, PopulationConfig, ScenarioConfig, StorageFleetConfig, ThermostatChoice,
};

/// Named RNG streams; each consumer draws from its own.
pub const STREAM_POPULATION: u64 = 1;
pub const STREAM_UFLS: u64 = 2;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct HouseAgent {
    pub house: House,
    pub comfort: ComfortSetting,
    pub transactive: bool,
    pub armed: bool,
    /// Setpoint from the last cleared price, before regulation nudges.
    pub market_setpoint: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageAgent {
    pub id: DeviceId,
    pub cfg: StorageConfig,
    pub charge_kw: f64,
    pub discharge_kw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeederFleet {
    pub houses: Vec<HouseAgent>,
    pub storage: Vec<StorageAgent>,
}

fn lognormal<R: Rng>(rng: &mut R, median: f64, spread: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    median * ((1.0 + spread).ln() * z).exp()
}

/// Draw one house. Always consumes the same number of variates so the
/// stream position does not depend on the initial-state option.
fn draw_house<R: Rng>(rng: &mut R, id: u64, p: &PopulationConfig) -> (House, ComfortSetting) {
    let r = lognormal(rng, p.r_median, p.spread);
    let c = lognormal(rng, p.c_median, p.spread);
    let k = lognormal(rng, p.k_median, p.k_spread);
    let u: f64 = rng.random();
    let on: bool = rng.random_bool(0.5);
    let half = match p.thermostat {
        ThermostatChoice::Hysteresis => p.deadband / 2.0,
        ThermostatChoice::Tdz => ((p.t_max - p.t_min) / 4.0).min(p.deadband / 2.0),
    };
    let (t_in, hvac_on) = match p.initial {
        InitialState::Diverse => (p.t_desired - half + 2.0 * half * u, on),
        InitialState::Synchronized => (p.initial_t_in, p.initial_on),
    };
    let params = ThermalParams {
        r,
        c,
        q_hvac: p.q_hvac,
        p_rated: p.p_rated,
    };
    let house = House::new(id, params, p.thermostat_config(), t_in, hvac_on);
    (house, ComfortSetting { k })
}

/// A standalone hysteresis population (ids 1..=n) for thermal studies.
pub fn synthesize_houses(p: &PopulationConfig, n: usize, seed: u64) -> Vec<House> {
    let mut rng = stream_rng(seed, STREAM_POPULATION);
    (1..=n as u64)
        .map(|id| draw_house(&mut rng, id, p).0)
        .collect()
}

/// Evenly spread `round(fraction·n)` flags over `n` slots.
fn armed_flags(n: usize, fraction: f64) -> Vec<bool> {
    (0..n)
        .map(|i| ((i + 1) as f64 * fraction).floor() > (i as f64 * fraction).floor())
        .collect()
}

fn storage_config(s: &StorageFleetConfig) -> StorageConfig {
    StorageConfig {
        capacity: s.capacity_kwh,
        soc: s.soc_kwh,
        p_charge: s.p_charge_kw,
        p_discharge: s.p_discharge_kw,
        buy_below: s.buy_below,
        sell_above: s.sell_above,
        efficiency: s.efficiency,
    }
}

/// Fleets per area and feeder. House ids run 1.. in config order; storage
/// ids follow the last house.
pub fn synthesize(cfg: &ScenarioConfig) -> Vec<Vec<FeederFleet>> {
    let mut rng = stream_rng(cfg.seed, STREAM_POPULATION);
    let mut next_id = 1u64;
    let mut fleets: Vec<Vec<FeederFleet>> = cfg
        .areas
        .iter()
        .map(|area| {
            let n_area: usize = area.feeders.iter().map(|f| f.houses).sum();
            let mut armed = armed_flags(n_area, area.ufls_armed_fraction).into_iter();
            area.feeders
                .iter()
                .map(|f| {
                    let houses = (0..f.houses)
                        .map(|_| {
                            let (house, comfort) = draw_house(&mut rng, next_id, &cfg.population);
                            next_id += 1;
                            HouseAgent {
                                market_setpoint: house.setpoint,
                                house,
                                comfort,
                                transactive: cfg.population.transactive,
                                armed: armed.next().unwrap_or(false),
                            }
                        })
                        .collect();
                    FeederFleet {
                        houses,
                        storage: Vec::new(),
                    }
                })
                .collect()
        })
        .collect();
    for (area, area_fleets) in cfg.areas.iter().zip(fleets.iter_mut()) {
        for (f, fleet) in area.feeders.iter().zip(area_fleets.iter_mut()) {
            fleet.storage = (0..f.storage)
                .map(|_| {
                    let id = DeviceId(next_id);
                    next_id += 1;
                    StorageAgent {
                        id,
                        cfg: storage_config(&cfg.storage),
                        charge_kw: 0.0,
                        discharge_kw: 0.0,
                    }
                })
                .collect();
        }
    }
    fleets
}
