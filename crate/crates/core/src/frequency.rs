//! Interconnection frequency, area control error, AGC and load shedding.
//!
//! Frequency follows `df/dt = M·ΔP + D·Δf` integrated with forward Euler.
//! With `M > 0` the fixed point is only stable for `D < 0`, so `D` keeps that
//! sign rather than being rewritten into the textbook damping form.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::DeviceId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrequencyError {
    #[error("swing parameters invalid: {0}")]
    BadSwing(String),
    #[error("explicit step unstable: h·|D| = {0} must be < 1")]
    Unstable(f64),
    #[error("step length must be positive, got {0}")]
    BadStep(f64),
    #[error("{0} must lie in [0, 1], got {1}")]
    BadFraction(&'static str, f64),
    #[error("time constant must be positive, got {0}")]
    BadTau(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwingParams {
    /// Inertial gain, Hz per second per MW.
    pub m: f64,
    /// Frequency correction coefficient, 1/s; negative.
    pub d: f64,
}

impl SwingParams {
    pub fn new(m: f64, d: f64) -> Result<Self, FrequencyError> {
        let p = SwingParams { m, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FrequencyError> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(FrequencyError::BadSwing(format!(
                "M must be > 0, got {}",
                self.m
            )));
        }
        if !(self.d.is_finite() && self.d < 0.0) {
            return Err(FrequencyError::BadSwing(format!(
                "D must be < 0 for a stable fixed point of df/dt = M·ΔP + D·Δf, got {}",
                self.d
            )));
        }
        Ok(())
    }

    pub fn check_step(&self, h: f64) -> Result<(), FrequencyError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(FrequencyError::BadStep(h));
        }
        let g = h * self.d.abs();
        if g >= 1.0 {
            return Err(FrequencyError::Unstable(g));
        }
        Ok(())
    }

    /// Steady-state deviation under a constant imbalance.
    pub fn steady_state(&self, delta_p: f64) -> f64 {
        -self.m * delta_p / self.d
    }
}

/// One forward-Euler step of the swing equation.
pub fn swing_step(
    delta_f: f64,
    delta_p: f64,
    params: &SwingParams,
    h: f64,
) -> Result<f64, FrequencyError> {
    params.check_step(h)?;
    Ok(delta_f + h * (params.m * delta_p + params.d * delta_f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyState {
    pub f: f64,
    pub delta_f: f64,
    /// Accumulated clock error, seconds.
    pub time_error: f64,
}

impl FrequencyState {
    pub fn nominal(f_nominal: f64) -> Self {
        FrequencyState {
            f: f_nominal,
            delta_f: 0.0,
            time_error: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AceInputs {
    /// Actual net interchange, MW.
    pub p_a: f64,
    /// Scheduled net interchange, MW.
    pub p_s: f64,
    /// Frequency bias, MW per 0.1 Hz (negative).
    pub b: f64,
    pub f_a: f64,
    pub f_s: f64,
    /// Metering error correction, MW.
    pub e_m: f64,
}

/// NERC reporting form: `(Pa − Ps) − 10·B·(fa − fs) − Em`.
pub fn nerc_ace(i: &AceInputs) -> f64 {
    (i.p_a - i.p_s) - 10.0 * i.b * (i.f_a - i.f_s) - i.e_m
}

/// Control-loop form: `[Q − Qs] + B·[f − fs]`, with `B` in MW/Hz.
pub fn control_error(q: f64, q_s: f64, b: f64, f: f64, f_s: f64) -> f64 {
    (q - q_s) + b * (f - f_s)
}

/// First-order low-pass on the raw ACE.
pub fn smooth_ace(filtered: f64, raw: f64, tau: f64, h: f64) -> Result<f64, FrequencyError> {
    if !(tau > 0.0) {
        return Err(FrequencyError::BadTau(tau));
    }
    if !(h > 0.0) {
        return Err(FrequencyError::BadStep(h));
    }
    Ok(filtered + (h / tau) * (raw - filtered))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegulationSplit {
    /// Share of primary (droop) response carried by loads.
    pub alpha: f64,
    /// Share of the AGC command sent to aggregators.
    pub beta: f64,
}

impl RegulationSplit {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, FrequencyError> {
        let s = RegulationSplit { alpha, beta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), FrequencyError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(FrequencyError::BadFraction("alpha", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(FrequencyError::BadFraction("beta", self.beta));
        }
        Ok(())
    }
}

/// `(to_aggregators, to_generators)` for a secondary command.
pub fn split_regulation(command: f64, split: &RegulationSplit) -> (f64, f64) {
    (split.beta * command, (1.0 - split.beta) * command)
}

/// `(to_loads, to_generators)` for a primary (droop) response.
pub fn split_droop(response: f64, split: &RegulationSplit) -> (f64, f64) {
    (split.alpha * response, (1.0 - split.alpha) * response)
}

/// Regulation dispatch from filtered ACE.
///
/// Each AGC tick adds `-gain · filtered_ace` to the regulation level (integral
/// action), bounded by `capacity` MW in either direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgcController {
    pub tau: f64,
    pub gain: f64,
    pub capacity: f64,
    pub split: RegulationSplit,
    pub filtered: f64,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegulationCommand {
    pub ace_raw: f64,
    pub ace_filtered: f64,
    /// Total regulation level, MW (positive asks for more generation).
    pub total: f64,
    pub to_aggregators: f64,
    pub to_generators: f64,
}

impl AgcController {
    pub const DEFAULT_TAU: f64 = 60.0;
    pub const DEFAULT_GAIN: f64 = 0.5;

    pub fn new(tau: f64, gain: f64, capacity: f64, split: RegulationSplit) -> Self {
        AgcController {
            tau,
            gain,
            capacity,
            split,
            filtered: 0.0,
            level: 0.0,
        }
    }

    pub fn tick(&mut self, ace_raw: f64, h: f64) -> Result<RegulationCommand, FrequencyError> {
        self.filtered = smooth_ace(self.filtered, ace_raw, self.tau, h)?;
        self.level = (self.level - self.gain * self.filtered).clamp(-self.capacity, self.capacity);
        let (to_aggregators, to_generators) = split_regulation(self.level, &self.split);
        Ok(RegulationCommand {
            ace_raw,
            ace_filtered: self.filtered,
            total: self.level,
            to_aggregators,
            to_generators,
        })
    }
}

/// Devices that shed when `f < threshold`. Call once per excursion.
pub fn ufls_check<R: Rng + ?Sized>(
    f: f64,
    threshold: f64,
    p: f64,
    armed: &[DeviceId],
    rng: &mut R,
) -> Result<Vec<DeviceId>, FrequencyError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(FrequencyError::BadFraction("probability", p));
    }
    if !(f < threshold) {
        return Ok(Vec::new());
    }
    Ok(armed
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < p)
        .collect())
}

/// Latching under-frequency relay bank.
///
/// A draw happens on each new excursion below the threshold. Shed devices
/// stay off until frequency has been back at or above the threshold for
/// `hold_s` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UflsRelay {
    pub threshold: f64,
    pub probability: f64,
    pub hold_s: f64,
    pub armed: Vec<DeviceId>,
    shed: BTreeSet<DeviceId>,
    in_excursion: bool,
    recovered_for: f64,
    events: usize,
}

impl UflsRelay {
    pub const DEFAULT_THRESHOLD: f64 = 59.95;
    pub const DEFAULT_HOLD_S: f64 = 60.0;

    pub fn new(
        threshold: f64,
        probability: f64,
        hold_s: f64,
        armed: Vec<DeviceId>,
    ) -> Result<Self, FrequencyError> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(FrequencyError::BadFraction("probability", probability));
        }
        Ok(UflsRelay {
            threshold,
            probability,
            hold_s,
            armed,
            shed: BTreeSet::new(),
            in_excursion: false,
            recovered_for: 0.0,
            events: 0,
        })
    }

    /// Advance by `h` seconds at frequency `f`; returns newly shed devices.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        f: f64,
        h: f64,
        rng: &mut R,
    ) -> Result<Vec<DeviceId>, FrequencyError> {
        if f < self.threshold {
            self.recovered_for = 0.0;
            if self.in_excursion {
                return Ok(Vec::new());
            }
            self.in_excursion = true;
            self.events += 1;
            let candidates: Vec<DeviceId> = self
                .armed
                .iter()
                .copied()
                .filter(|d| !self.shed.contains(d))
                .collect();
            let newly = ufls_check(f, self.threshold, self.probability, &candidates, rng)?;
            self.shed.extend(newly.iter().copied());
            return Ok(newly);
        }
        self.in_excursion = false;
        if !self.shed.is_empty() {
            self.recovered_for += h;
            if self.recovered_for >= self.hold_s {
                self.shed.clear();
                self.recovered_for = 0.0;
            }
        }
        Ok(Vec::new())
    }

    pub fn is_shed(&self, id: DeviceId) -> bool {
        self.shed.contains(&id)
    }

    pub fn shed(&self) -> impl Iterator<Item = &DeviceId> {
        self.shed.iter()
    }

    pub fn events(&self) -> usize {
        self.events
    }
}

/// Integrate clock error: `time_error += h·(f − f_nominal)/f_nominal`.
pub fn time_error_step(
    state: FrequencyState,
    f_nominal: f64,
    h: f64,
) -> Result<FrequencyState, FrequencyError> {
    if !(h > 0.0) {
        return Err(FrequencyError::BadStep(h));
    }
    Ok(FrequencyState {
        time_error: state.time_error + h * (state.f - f_nominal) / f_nominal,
        ..state
    })
}

pub const TEC_OFFSET_HZ: f64 = 0.02;

/// Scheduled-frequency offset while time-error correction is active.
pub fn tec_offset(time_error: f64, threshold: f64) -> f64 {
    if time_error > threshold {
        -TEC_OFFSET_HZ
    } else if time_error < -threshold {
        TEC_OFFSET_HZ
    } else {
        0.0
    }
}
