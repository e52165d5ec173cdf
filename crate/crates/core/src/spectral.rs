//! Time-series tools for variability analysis.
//!
//! Convolution uses the rectangle rule (each discrete sum is scaled by the
//! sample period) so that it approximates the continuous integral; energy
//! integration uses the trapezoid rule.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{DateTime, Duration, SecondsFormat, Utc};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("sample periods differ: {0} s vs {1} s")]
    PeriodMismatch(f64, f64),
    #[error("series needs at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("wind penetration {0} outside [0, 0.40]")]
    PenetrationOutOfRange(f64),
    #[error("unknown pollutant {0:?}")]
    UnknownPollutant(String),
    #[error("shift of {0} h is not a whole number of samples")]
    OffGrid(f64),
    #[error("shift of {shift} samples moves the load outside the price window (max {max})")]
    ShiftOutOfRange { shift: i64, max: i64 },
    #[error("direct and FFT routes disagree: {direct} vs {fft}")]
    RouteMismatch { direct: f64, fft: f64 },
    #[error("invalid series: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "kW")]
    Kw,
    #[serde(rename = "kWh")]
    Kwh,
    #[serde(rename = "kW/h")]
    KwPerHour,
    #[serde(rename = "$/MWh")]
    DollarsPerMwh,
    #[serde(rename = "kg/MWh")]
    KgPerMwh,
    #[serde(rename = "degC")]
    Celsius,
    #[serde(rename = "1")]
    Dimensionless,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Kw => "kW",
            Unit::Kwh => "kWh",
            Unit::KwPerHour => "kW/h",
            Unit::DollarsPerMwh => "$/MWh",
            Unit::KgPerMwh => "kg/MWh",
            Unit::Celsius => "degC",
            Unit::Dimensionless => "1",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.trim() {
            "kW" => Unit::Kw,
            "kWh" => Unit::Kwh,
            "kW/h" => Unit::KwPerHour,
            "$/MWh" => Unit::DollarsPerMwh,
            "kg/MWh" => Unit::KgPerMwh,
            "degC" | "C" | "°C" => Unit::Celsius,
            "1" => Unit::Dimensionless,
            other => return Err(format!("unknown unit {other:?}")),
        })
    }
}

/// Uniformly sampled series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub start: DateTime<Utc>,
    /// Seconds between samples.
    pub period_s: f64,
    pub values: Vec<f64>,
    pub unit: Unit,
}

impl Series {
    pub fn new(
        start: DateTime<Utc>,
        period_s: f64,
        values: Vec<f64>,
        unit: Unit,
    ) -> Result<Self, SpectralError> {
        if !(period_s > 0.0 && period_s.is_finite()) {
            return Err(SpectralError::Invalid(format!(
                "period must be > 0, got {period_s}"
            )));
        }
        if values.is_empty() {
            return Err(SpectralError::TooShort { needed: 1, got: 0 });
        }
        Ok(Series {
            start,
            period_s,
            values,
            unit,
        })
    }

    /// Series starting at the Unix epoch; convenient for tests and tools.
    pub fn from_values(period_s: f64, values: Vec<f64>, unit: Unit) -> Result<Self, SpectralError> {
        Self::new(DateTime::<Utc>::UNIX_EPOCH, period_s, values, unit)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn period_h(&self) -> f64 {
        self.period_s / 3600.0
    }

    pub fn time_at(&self, i: usize) -> DateTime<Utc> {
        self.start + Duration::milliseconds((self.period_s * 1000.0 * i as f64).round() as i64)
    }

    /// Value at an arbitrary instant: linear between samples, held at the
    /// ends.
    pub fn sample(&self, t: DateTime<Utc>) -> f64 {
        let offset = (t - self.start).num_milliseconds() as f64 / 1000.0;
        let x = offset / self.period_s;
        if x <= 0.0 {
            return self.values[0];
        }
        let last = self.values.len() - 1;
        if x >= last as f64 {
            return self.values[last];
        }
        let i = x.floor() as usize;
        let frac = x - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// `time,value` CSV with ISO-8601 timestamps, preceded by a unit comment.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# unit={}", self.unit)?;
        writeln!(out, "time,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(
                out,
                "{},{}",
                self.time_at(i).to_rfc3339_opts(SecondsFormat::Secs, true),
                v
            )?;
        }
        Ok(())
    }
}

fn check_periods(a: &Series, b: &Series) -> Result<(), SpectralError> {
    if a.period_s != b.period_s {
        return Err(SpectralError::PeriodMismatch(a.period_s, b.period_s));
    }
    Ok(())
}

fn scaled_output(v: &Series, values: Vec<f64>, unit: Unit) -> Series {
    Series {
        start: v.start,
        period_s: v.period_s,
        values,
        unit,
    }
}

fn direct_sum(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn fft_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() + b.len() - 1;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |x: &[f64]| {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&r| Complex::new(r, 0.0)).collect();
        buf.resize(n, Complex::new(0.0, 0.0));
        buf
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa.iter().map(|c| c.re * scale).collect()
}

/// Full discrete convolution `(v * L)`, scaled by the sample period in hours.
///
/// The output has `|v| + |L| − 1` samples; sample `k` is the lag of
/// `k` periods from the common start.
pub fn convolve_direct(v: &Series, l: &Series) -> Result<Series, SpectralError> {
    check_periods(v, l)?;
    let dt = v.period_h();
    let values = direct_sum(&v.values, &l.values)
        .into_iter()
        .map(|x| x * dt)
        .collect();
    Ok(scaled_output(v, values, v.unit))
}

/// Same contract as [`convolve_direct`], via zero-padded FFT products.
pub fn convolve_fft(v: &Series, l: &Series) -> Result<Series, SpectralError> {
    check_periods(v, l)?;
    let dt = v.period_h();
    let values = fft_product(&v.values, &l.values)
        .into_iter()
        .map(|x| x * dt)
        .collect();
    Ok(scaled_output(v, values, v.unit))
}

/// Cumulative trapezoid energy (kWh for kW input) and first-difference ramp
/// (per hour). The ramp has one fewer sample than the load.
pub fn energy_load_ramp(load: &Series) -> Result<(Series, Series), SpectralError> {
    if load.len() < 2 {
        return Err(SpectralError::TooShort {
            needed: 2,
            got: load.len(),
        });
    }
    let dt = load.period_h();
    let mut energy = Vec::with_capacity(load.len());
    let mut acc = 0.0;
    energy.push(0.0);
    for w in load.values.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * dt;
        energy.push(acc);
    }
    let ramp = load.values.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    let (eu, ru) = match load.unit {
        Unit::Kw => (Unit::Kwh, Unit::KwPerHour),
        u => (u, u),
    };
    Ok((
        scaled_output(load, energy, eu),
        scaled_output(load, ramp, ru),
    ))
}

/// Inverse of the trapezoid rule: recover load from energy given the first
/// load sample.
pub fn load_from_energy(energy: &[f64], initial_load: f64, period_h: f64) -> Vec<f64> {
    let mut load = Vec::with_capacity(energy.len());
    if energy.is_empty() {
        return load;
    }
    load.push(initial_load);
    for (i, w) in energy.windows(2).enumerate() {
        load.push(2.0 * (w[1] - w[0]) / period_h - load[i]);
    }
    load
}

/// Running integral of a ramp; equals load minus its initial value.
pub fn integrate_ramp(ramp: &[f64], period_h: f64) -> Vec<f64> {
    std::iter::once(0.0)
        .chain(ramp.iter().scan(0.0, |acc, r| {
            *acc += r * period_h;
            Some(*acc)
        }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pollutant {
    Co2,
    N2o,
    Ch4,
    Co,
    Nox,
    Sox,
    Pm,
}

impl Pollutant {
    pub const ALL: [Pollutant; 7] = [
        Pollutant::Co2,
        Pollutant::N2o,
        Pollutant::Ch4,
        Pollutant::Co,
        Pollutant::Nox,
        Pollutant::Sox,
        Pollutant::Pm,
    ];

    fn column(self) -> usize {
        self as usize
    }
}

impl FromStr for Pollutant {
    type Err = SpectralError;
    fn from_str(s: &str) -> Result<Self, SpectralError> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "CO2" => Pollutant::Co2,
            "N2O" => Pollutant::N2o,
            "CH4" => Pollutant::Ch4,
            "CO" => Pollutant::Co,
            "NOX" => Pollutant::Nox,
            "SOX" => Pollutant::Sox,
            "PM" => Pollutant::Pm,
            _ => return Err(SpectralError::UnknownPollutant(s.to_string())),
        })
    }
}

/// Emission reductions relative to a system without wind.
pub struct EmissionsTable;

impl EmissionsTable {
    pub const PENETRATION: [f64; 5] = [0.0, 0.10, 0.20, 0.30, 0.40];

    /// Columns: CO2, N2O, CH4, CO, NOx, SOx, PM.
    pub const ROWS: [[f64; 7]; 5] = [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.12, 0.09, 0.12, 0.10, 0.13, 0.08, 0.11],
        [0.21, 0.11, 0.17, 0.15, 0.22, 0.17, 0.22],
        [0.28, 0.10, 0.21, 0.19, 0.29, 0.24, 0.32],
        [0.33, 0.04, 0.23, 0.20, 0.34, 0.30, 0.40],
    ];
}

/// Reduction fraction at a wind penetration; linear between table rows,
/// no extrapolation past 40 %.
pub fn emissions_reduction(
    wind_penetration: f64,
    pollutant: Pollutant,
) -> Result<f64, SpectralError> {
    let grid = &EmissionsTable::PENETRATION;
    if !(wind_penetration >= 0.0 && wind_penetration <= grid[grid.len() - 1]) {
        return Err(SpectralError::PenetrationOutOfRange(wind_penetration));
    }
    let col = pollutant.column();
    if let Some(i) = grid.iter().position(|&g| g == wind_penetration) {
        return Ok(EmissionsTable::ROWS[i][col]);
    }
    let hi = grid
        .iter()
        .position(|&g| g > wind_penetration)
        .expect("inside table range");
    let lo = hi - 1;
    let w = (wind_penetration - grid[lo]) / (grid[hi] - grid[lo]);
    let (a, b) = (EmissionsTable::ROWS[lo][col], EmissionsTable::ROWS[hi][col]);
    Ok(a + w * (b - a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftImpact {
    /// Cost (or emissions) of the load at its original position.
    pub base: f64,
    /// Cost with the load delayed by the shift.
    pub shifted: f64,
    /// `shifted − base`, direct route.
    pub difference: f64,
    /// `shifted − base`, FFT route.
    pub difference_fft: f64,
}

/// Change in `Σ v(t)·L(t − s)·Δt` when the load moves `shift_h` hours later.
///
/// The load is aligned with the start of `v`. The cross-correlation is read
/// from the convolution of `v` with the time-reversed load, once directly and
/// once via FFT; the routes must agree to 1e-9 of the larger magnitude.
pub fn shift_impact(v: &Series, load: &Series, shift_h: f64) -> Result<ShiftImpact, SpectralError> {
    check_periods(v, load)?;
    let samples = shift_h * 3600.0 / v.period_s;
    let k = samples.round();
    if (samples - k).abs() > 1e-9 {
        return Err(SpectralError::OffGrid(shift_h));
    }
    let k = k as i64;
    let max = v.len() as i64 - load.len() as i64;
    if k < 0 || k > max {
        return Err(SpectralError::ShiftOutOfRange {
            shift: k,
            max: max.max(0),
        });
    }
    let mut reversed = load.clone();
    reversed.values.reverse();
    let direct = convolve_direct(v, &reversed)?;
    let fft = convolve_fft(v, &reversed)?;
    let at = |s: &Series, lag: i64| s.values[(lag + load.len() as i64 - 1) as usize];
    let (base, shifted) = (at(&direct, 0), at(&direct, k));
    let difference = shifted - base;
    let difference_fft = at(&fft, k) - at(&fft, 0);
    let scale = base.abs().max(shifted.abs()).max(f64::MIN_POSITIVE);
    if (difference - difference_fft).abs() > 1e-9 * scale {
        return Err(SpectralError::RouteMismatch {
            direct: difference,
            fft: difference_fft,
        });
    }
    Ok(ShiftImpact {
        base,
        shifted,
        difference,
        difference_fft,
    })
}

/// One-sided power spectral density with a Hann window.
///
/// Returns `(frequency Hz, power)` pairs from DC up to Nyquist. Power is
/// `|X_k|² / (fs · Σ w²)`, doubled for bins that have a negative-frequency
/// twin, so that the sum times the bin width approximates the windowed
/// signal's variance.
pub fn power_spectral_density(series: &Series) -> Result<Vec<(f64, f64)>, SpectralError> {
    let n = series.len();
    if n < 2 {
        return Err(SpectralError::TooShort { needed: 2, got: n });
    }
    let fs = 1.0 / series.period_s;
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos())
        .collect();
    let norm: f64 = window.iter().map(|w| w * w).sum::<f64>() * fs;
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series
        .values
        .iter()
        .zip(&window)
        .map(|(x, w)| Complex::new((x - mean) * w, 0.0))
        .collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(n)
        .process(&mut buf);
    let bins = n / 2 + 1;
    Ok((0..bins)
        .map(|k| {
            let twin = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
            let p = buf[k].norm_sqr() / norm * if twin { 2.0 } else { 1.0 };
            (k as f64 * fs / n as f64, p)
        })
        .collect())
}
