//! First-order building thermal models and thermostats.
//!
//! Each house is a single air node with resistance `r` (°C/kW) to outdoors and
//! capacitance `c` (kWh/°C). The HVAC adds `q_hvac` kW of heat while running;
//! the sign of `q_hvac` selects the mode (negative cools, positive heats), so
//! heating and cooling share one code path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermalError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("step length must be positive, got {0} h")]
    BadStep(f64),
    #[error("invalid thermal parameters: {0}")]
    BadParams(String),
    #[error("invalid thermostat configuration: {0}")]
    BadThermostat(String),
    #[error("population is empty")]
    EmptyPopulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Heating,
    Cooling,
}

impl Mode {
    pub fn from_q(q_hvac: f64) -> Mode {
        if q_hvac > 0.0 {
            Mode::Heating
        } else {
            Mode::Cooling
        }
    }

    /// +1 when service lowers temperature (cooling), -1 when it raises it.
    ///
    /// Multiplying a temperature deviation by this sign turns it into a
    /// "need for service" that is positive for both modes.
    pub fn need_sign(self) -> f64 {
        match self {
            Mode::Cooling => 1.0,
            Mode::Heating => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    /// Thermal resistance, °C per kW.
    pub r: f64,
    /// Thermal capacitance, kWh per °C.
    pub c: f64,
    /// HVAC heat rate while running, kW (negative for cooling).
    pub q_hvac: f64,
    /// Electrical draw while running, kW.
    pub p_rated: f64,
}

impl ThermalParams {
    pub fn new(r: f64, c: f64, q_hvac: f64, p_rated: f64) -> Result<Self, ThermalError> {
        let p = ThermalParams {
            r,
            c,
            q_hvac,
            p_rated,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        if !(self.r.is_finite()
            && self.c.is_finite()
            && self.q_hvac.is_finite()
            && self.p_rated.is_finite())
        {
            return Err(ThermalError::NonFinite("thermal parameters"));
        }
        if self.r <= 0.0 {
            return Err(ThermalError::BadParams(format!(
                "r must be > 0, got {}",
                self.r
            )));
        }
        if self.c <= 0.0 {
            return Err(ThermalError::BadParams(format!(
                "c must be > 0, got {}",
                self.c
            )));
        }
        if self.p_rated <= 0.0 {
            return Err(ThermalError::BadParams(format!(
                "p_rated must be > 0, got {}",
                self.p_rated
            )));
        }
        if self.q_hvac == 0.0 {
            return Err(ThermalError::BadParams("q_hvac must be non-zero".into()));
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        Mode::from_q(self.q_hvac)
    }

    /// Time constant in hours.
    pub fn tau(&self) -> f64 {
        self.r * self.c
    }

    /// Temperature the house settles at for the given HVAC state.
    pub fn equilibrium(&self, t_out: f64, hvac_on: bool) -> f64 {
        let q = if hvac_on { self.q_hvac } else { 0.0 };
        t_out + q * self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HouseState {
    pub t_in: f64,
    pub hvac_on: bool,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ThermostatKind {
    Hysteresis { deadband: f64 },
    Tdz,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermostatConfig {
    pub t_desired: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub kind: ThermostatKind,
}

impl ThermostatConfig {
    pub fn validate(&self) -> Result<(), ThermalError> {
        if !(self.t_desired.is_finite() && self.t_min.is_finite() && self.t_max.is_finite()) {
            return Err(ThermalError::NonFinite("thermostat temperatures"));
        }
        if !(self.t_min < self.t_desired && self.t_desired < self.t_max) {
            return Err(ThermalError::BadThermostat(format!(
                "need t_min < t_desired < t_max, got {} / {} / {}",
                self.t_min, self.t_desired, self.t_max
            )));
        }
        if let ThermostatKind::Hysteresis { deadband } = self.kind {
            if !(deadband > 0.0 && deadband.is_finite()) {
                return Err(ThermalError::BadThermostat(format!(
                    "deadband must be > 0, got {deadband}"
                )));
            }
        }
        Ok(())
    }

    pub fn deadband(&self) -> Option<f64> {
        match self.kind {
            ThermostatKind::Hysteresis { deadband } => Some(deadband),
            ThermostatKind::Tdz => None,
        }
    }
}

/// Advance one house by `h` hours with the HVAC state held fixed.
///
/// Uses the exact solution of `C dT/dt = (T_out - T)/R + q`, so the result does
/// not depend on how a constant-input segment is subdivided.
pub fn step_house(
    state: HouseState,
    params: &ThermalParams,
    t_out: f64,
    h: f64,
) -> Result<HouseState, ThermalError> {
    if !state.t_in.is_finite() {
        return Err(ThermalError::NonFinite("t_in"));
    }
    if !t_out.is_finite() {
        return Err(ThermalError::NonFinite("t_out"));
    }
    if !h.is_finite() {
        return Err(ThermalError::NonFinite("h"));
    }
    if h <= 0.0 {
        return Err(ThermalError::BadStep(h));
    }
    let t_eq = params.equilibrium(t_out, state.hvac_on);
    let decay = (-h / params.tau()).exp();
    Ok(HouseState {
        t_in: t_eq + (state.t_in - t_eq) * decay,
        ..state
    })
}

/// Conventional thermostat with a hysteresis band centred on `setpoint`.
pub fn hysteresis_decide(
    t_in: f64,
    setpoint: f64,
    deadband: f64,
    mode: Mode,
    prior_on: bool,
) -> bool {
    let half = deadband / 2.0;
    match mode {
        Mode::Cooling => {
            if t_in >= setpoint + half {
                true
            } else if t_in <= setpoint - half {
                false
            } else {
                prior_on
            }
        }
        Mode::Heating => {
            if t_in <= setpoint - half {
                true
            } else if t_in >= setpoint + half {
                false
            } else {
                prior_on
            }
        }
    }
}

/// Zero-deadband thermostat that may only switch at a market boundary.
///
/// At a boundary a cooling unit runs iff `t_in > setpoint`; equality is off.
pub fn tdz_decide(
    t_in: f64,
    setpoint: f64,
    mode: Mode,
    prior_on: bool,
    at_market_boundary: bool,
) -> bool {
    if !at_market_boundary {
        return prior_on;
    }
    match mode {
        Mode::Cooling => t_in > setpoint,
        Mode::Heating => t_in < setpoint,
    }
}

/// Total electrical draw of the running units, kW.
pub fn aggregate_power<'a, I>(population: I) -> f64
where
    I: IntoIterator<Item = (&'a HouseState, &'a ThermalParams)>,
{
    population
        .into_iter()
        .filter(|(s, _)| s.hvac_on)
        .map(|(_, p)| p.p_rated)
        .sum()
}

/// `1 - |mean(exp(i 2π φ))|` over cycle phases in [0, 1).
///
/// 0 when every unit sits at the same point of its cycle, 1 when the phasors
/// cancel.
pub fn diversity_metric(phases: &[f64]) -> Result<f64, ThermalError> {
    if phases.is_empty() {
        return Err(ThermalError::EmptyPopulation);
    }
    let n = phases.len() as f64;
    let (re, im) = phases.iter().fold((0.0, 0.0), |(re, im), phi| {
        let a = std::f64::consts::TAU * phi;
        (re + a.cos(), im + a.sin())
    });
    let magnitude = (re / n).hypot(im / n);
    Ok((1.0 - magnitude).clamp(0.0, 1.0))
}

// Hours to move from `from` to `to` while relaxing toward `t_eq`.
fn transit_time(tau: f64, t_eq: f64, from: f64, to: f64) -> Option<f64> {
    let a = t_eq - from;
    let b = t_eq - to;
    if a == 0.0 || b == 0.0 || a.signum() != b.signum() || b.abs() > a.abs() {
        return None;
    }
    Some(tau * (a / b).ln())
}

/// Position of a unit within its on/off cycle, as a fraction in [0, 1).
///
/// The cycle starts when the unit switches off at the far edge of the band
/// `[lo, hi]`; the off (drift) leg comes first, then the on (service) leg.
/// Phase is measured in time using the exponential transit times. If the
/// unit cannot complete a cycle at `t_out`, temperature position in the band
/// is used instead.
pub fn cycle_phase(
    state: &HouseState,
    params: &ThermalParams,
    t_out: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    let t = state.t_in.clamp(lo, hi);
    let (off_edge, on_edge) = match state.mode {
        Mode::Cooling => (lo, hi),
        Mode::Heating => (hi, lo),
    };
    let tau = params.tau();
    let t_drift = params.equilibrium(t_out, false);
    let t_serve = params.equilibrium(t_out, true);
    let legs = (
        transit_time(tau, t_drift, off_edge, on_edge),
        transit_time(tau, t_serve, on_edge, off_edge),
    );
    let frac = |x: f64| if hi > lo { (x - lo) / (hi - lo) } else { 0.5 };
    let phase = match legs {
        (Some(off_total), Some(on_total)) if off_total + on_total > 0.0 => {
            let period = off_total + on_total;
            if state.hvac_on {
                let elapsed = transit_time(tau, t_serve, on_edge, t).unwrap_or(0.0);
                (off_total + elapsed) / period
            } else {
                let elapsed = transit_time(tau, t_drift, off_edge, t).unwrap_or(0.0);
                elapsed / period
            }
        }
        _ => {
            let need = match state.mode {
                Mode::Cooling => frac(t),
                Mode::Heating => 1.0 - frac(t),
            };
            if state.hvac_on {
                0.5 + 0.5 * (1.0 - need)
            } else {
                0.5 * need
            }
        }
    };
    phase.rem_euclid(1.0)
}

/// One simulated building with its thermostat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct House {
    pub id: u64,
    pub params: ThermalParams,
    pub state: HouseState,
    pub thermostat: ThermostatConfig,
    /// Setpoint currently in force (starts at `t_desired`).
    pub setpoint: f64,
}

impl House {
    pub fn new(
        id: u64,
        params: ThermalParams,
        thermostat: ThermostatConfig,
        t_in: f64,
        hvac_on: bool,
    ) -> Self {
        House {
            id,
            state: HouseState {
                t_in,
                hvac_on,
                mode: params.mode(),
            },
            params,
            thermostat,
            setpoint: thermostat.t_desired,
        }
    }

    /// Band used for phase estimation.
    pub fn band(&self) -> (f64, f64) {
        match self.thermostat.kind {
            ThermostatKind::Hysteresis { deadband } => (
                self.setpoint - deadband / 2.0,
                self.setpoint + deadband / 2.0,
            ),
            ThermostatKind::Tdz => (self.thermostat.t_min, self.thermostat.t_max),
        }
    }

    pub fn phase(&self, t_out: f64) -> f64 {
        let (lo, hi) = self.band();
        cycle_phase(&self.state, &self.params, t_out, lo, hi)
    }
}

/// A set of independent houses stepped together.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Population {
    pub houses: Vec<House>,
}

impl Population {
    pub fn new(houses: Vec<House>) -> Self {
        Population { houses }
    }

    pub fn power(&self) -> f64 {
        aggregate_power(self.houses.iter().map(|h| (&h.state, &h.params)))
    }

    pub fn diversity(&self, t_out: f64) -> Result<f64, ThermalError> {
        let phases: Vec<f64> = self.houses.iter().map(|h| h.phase(t_out)).collect();
        diversity_metric(&phases)
    }

    /// Let every hysteresis thermostat decide, then integrate `h` hours.
    ///
    /// `forced_off` overrides the thermostats (curtailment); the thermostat
    /// state is still updated so units resume on release. Runs in parallel;
    /// each house only touches its own state.
    pub fn step_hysteresis(
        &mut self,
        t_out: f64,
        h: f64,
        forced_off: bool,
    ) -> Result<(), ThermalError> {
        self.houses.par_iter_mut().try_for_each(|house| {
            if let Some(deadband) = house.thermostat.deadband() {
                let on = hysteresis_decide(
                    house.state.t_in,
                    house.setpoint,
                    deadband,
                    house.state.mode,
                    house.state.hvac_on,
                );
                house.state.hvac_on = on && !forced_off;
            } else if forced_off {
                house.state.hvac_on = false;
            }
            house.state = step_house(house.state, &house.params, t_out, h)?;
            Ok(())
        })
    }
}
