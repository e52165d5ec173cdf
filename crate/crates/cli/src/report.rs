//! Post-run reporting computed purely from artifact files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use tgsim_core::scenario::Summary;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub span_s: u64,
    pub peak_load_kw: f64,
    pub total_energy_kwh: f64,
    pub price_mean: f64,
    pub price_sigma: f64,
    pub ufls_events: usize,
    pub oscillation_detected: bool,
    /// Feeder clearing prices sorted from highest to lowest.
    #[serde(skip)]
    pub price_duration: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    /// Positive when the run peaks lower than the baseline.
    pub peak_reduction_pct: f64,
    /// Run energy relative to the baseline.
    pub energy_delta_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub run: RunMetrics,
    pub baseline: Option<RunMetrics>,
    pub comparison: Option<Comparison>,
}

fn read(dir: &Path, name: &str) -> Result<String, CliError> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn column(header: &str, name: &str, file: &str) -> Result<usize, CliError> {
    header
        .split(',')
        .position(|c| c == name)
        .ok_or_else(|| CliError::Invalid(format!("{file}: missing column {name}")))
}

fn parse_f64(s: &str, file: &str) -> Result<f64, CliError> {
    s.parse()
        .map_err(|_| CliError::Invalid(format!("{file}: bad number {s:?}")))
}

/// Peak and energy of total load, summed over areas at each tick.
fn load_metrics(text: &str) -> Result<(f64, f64), CliError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let t_col = column(header, "t", "load.csv")?;
    let l_col = column(header, "load_kW", "load.csv")?;
    let mut totals: Vec<(u64, f64)> = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let t: u64 = cells[t_col]
            .parse()
            .map_err(|_| CliError::Invalid(format!("load.csv: bad time {:?}", cells[t_col])))?;
        let load = parse_f64(cells[l_col], "load.csv")?;
        match totals.last_mut() {
            Some((last, sum)) if *last == t => *sum += load,
            _ => totals.push((t, load)),
        }
    }
    let dt_h = match totals.as_slice() {
        [(a, _), (b, _), ..] => (b - a) as f64 / 3600.0,
        _ => 0.0,
    };
    let peak = totals.iter().map(|x| x.1).fold(0.0, f64::max);
    let energy = totals.iter().map(|x| x.1 * dt_h).sum();
    Ok((peak, energy))
}

fn prices(text: &str) -> Result<Vec<f64>, CliError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let p_col = column(header, "price", "markets.csv")?;
    let mut out = lines
        .filter(|l| !l.is_empty())
        .map(|l| parse_f64(l.split(',').nth(p_col).unwrap_or_default(), "markets.csv"))
        .collect::<Result<Vec<f64>, _>>()?;
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

pub fn run_metrics(dir: &Path) -> Result<RunMetrics, CliError> {
    let summary: Summary = serde_json::from_str(&read(dir, "summary.json")?)
        .map_err(|e| CliError::Invalid(format!("summary.json: {e}")))?;
    let (peak_load_kw, total_energy_kwh) = load_metrics(&read(dir, "load.csv")?)?;
    Ok(RunMetrics {
        span_s: summary.span_s,
        peak_load_kw,
        total_energy_kwh,
        price_mean: summary.price_mean,
        price_sigma: summary.price_sigma,
        ufls_events: summary.ufls_events,
        oscillation_detected: summary.oscillation_detected,
        price_duration: prices(&read(dir, "markets.csv")?)?,
    })
}

fn pct(delta: f64, base: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        100.0 * delta / base
    }
}

pub fn compare(run: &RunMetrics, baseline: &RunMetrics) -> Result<Comparison, CliError> {
    if run.span_s != baseline.span_s {
        return Err(CliError::Invalid(format!(
            "span mismatch: run covers {} s, baseline {} s",
            run.span_s, baseline.span_s
        )));
    }
    Ok(Comparison {
        peak_reduction_pct: pct(
            baseline.peak_load_kw - run.peak_load_kw,
            baseline.peak_load_kw,
        ),
        energy_delta_pct: pct(
            run.total_energy_kwh - baseline.total_energy_kwh,
            baseline.total_energy_kwh,
        ),
    })
}

pub fn build(run_dir: &Path, baseline_dir: Option<&Path>) -> Result<Report, CliError> {
    let run = run_metrics(run_dir)?;
    let (baseline, comparison) = match baseline_dir {
        Some(dir) => {
            let base = run_metrics(dir)?;
            let cmp = compare(&run, &base)?;
            (Some(base), Some(cmp))
        }
        None => (None, None),
    };
    Ok(Report {
        schema_version: 1,
        run,
        baseline,
        comparison,
    })
}

/// Price duration curve: rank, fraction of intervals, price (and baseline).
pub fn price_duration_csv(report: &Report) -> String {
    let mut out = String::from("rank,fraction,price");
    if report.baseline.is_some() {
        out.push_str(",baseline_price");
    }
    out.push('\n');
    let run = &report.run.price_duration;
    let base = report.baseline.as_ref().map(|b| &b.price_duration);
    let n = run.len().max(base.map_or(0, Vec::len));
    for i in 0..n {
        let frac = (i + 1) as f64 / n as f64;
        let cell = |v: Option<&f64>| v.map(|p| p.to_string()).unwrap_or_default();
        let _ = write!(out, "{},{frac},{}", i + 1, cell(run.get(i)));
        if let Some(b) = base {
            let _ = write!(out, ",{}", cell(b.get(i)));
        }
        out.push('\n');
    }
    out
}

pub fn render_table(report: &Report) -> String {
    let mut out = String::new();
    let row = |out: &mut String, label: &str, run: String, base: Option<String>| {
        let _ = match base {
            Some(b) => writeln!(out, "{label:<22}{run:>16}{b:>16}"),
            None => writeln!(out, "{label:<22}{run:>16}"),
        };
    };
    let b = report.baseline.as_ref();
    if b.is_some() {
        let _ = writeln!(out, "{:<22}{:>16}{:>16}", "metric", "run", "baseline");
    }
    let r = &report.run;
    row(
        &mut out,
        "peak load (kW)",
        format!("{:.3}", r.peak_load_kw),
        b.map(|b| format!("{:.3}", b.peak_load_kw)),
    );
    row(
        &mut out,
        "energy (kWh)",
        format!("{:.3}", r.total_energy_kwh),
        b.map(|b| format!("{:.3}", b.total_energy_kwh)),
    );
    row(
        &mut out,
        "price mean ($/MWh)",
        format!("{:.3}", r.price_mean),
        b.map(|b| format!("{:.3}", b.price_mean)),
    );
    row(
        &mut out,
        "price sigma ($/MWh)",
        format!("{:.3}", r.price_sigma),
        b.map(|b| format!("{:.3}", b.price_sigma)),
    );
    row(
        &mut out,
        "UFLS events",
        r.ufls_events.to_string(),
        b.map(|b| b.ufls_events.to_string()),
    );
    if let Some(c) = &report.comparison {
        let _ = writeln!(out, "peak reduction: {:.3} %", c.peak_reduction_pct);
        let _ = writeln!(out, "energy delta:   {:.3} %", c.energy_delta_pct);
    }
    out
}
