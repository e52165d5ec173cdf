//! `tgsim` command-line entry point.
//!
//! Exit codes: 0 success, 1 invalid input or failed run, 2 I/O failure.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use tgsim_core::scenario::{
    load_config, run, ConfigError, RunInputs, ScenarioConfig, ScenarioError,
};
use tgsim_core::spectral::{convolve_fft, power_spectral_density, shift_impact, Unit};

const JSON_SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. }
            | ScenarioError::Ingest(tgsim_core::scenario::IngestError::Io { .. }) => {
                CliError::Io(e.to_string())
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "tgsim", version, about = "Transactive grid control simulator")]
struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    /// Extra diagnostics.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a scenario file.
    Validate {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Run a scenario and write its artifacts.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: $TGSIM_OUT/<config name>).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long, env = "TGSIM_OUT", default_value = "out", hide_env_values = true)]
        out_root: PathBuf,
    },
    /// Summarize a run, optionally against a baseline run.
    Report {
        /// Artifact directory of the run.
        run: PathBuf,
        #[arg(long, value_name = "DIR")]
        baseline: Option<PathBuf>,
        /// Where to write plot-ready CSVs (default: <run>/report).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Spectral density, convolution with a signal and load-shift impact.
    Spectra {
        /// Load series CSV (kW).
        #[arg(long, value_name = "PATH")]
        load: PathBuf,
        /// Per-MWh signal to convolve with the load (price, emissions).
        #[arg(long, value_name = "PATH")]
        signal: Option<PathBuf>,
        #[arg(long, default_value = "$/MWh")]
        signal_unit: String,
        /// Shift of the load, hours, for the impact calculation.
        #[arg(long)]
        shift_h: Option<f64>,
        #[arg(long, default_value_t = 2)]
        max_gap: usize,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run every scenario in a directory into per-scenario output folders.
    Golden {
        #[arg(long, default_value = "scenarios")]
        dir: PathBuf,
        #[arg(
            long,
            env = "TGSIM_OUT",
            default_value = "goldens",
            hide_env_values = true
        )]
        out: PathBuf,
    },
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, body: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

#[derive(Serialize)]
struct ValidateOutput<'a> {
    schema_version: u32,
    path: String,
    valid: bool,
    error: Option<&'a ConfigError>,
}

fn cmd_validate(cli: &Cli, config: &Path) -> Result<(), CliError> {
    let text = read_text(config)?;
    let result = load_config(&text);
    if cli.json {
        let out = ValidateOutput {
            schema_version: JSON_SCHEMA_VERSION,
            path: config.display().to_string(),
            valid: result.is_ok(),
            error: result.as_ref().err(),
        };
        println!("{}", to_json(&out));
    }
    match result {
        Ok(_) => {
            if cli.verbose && !cli.json {
                println!("{}: ok", config.display());
            }
            Ok(())
        }
        Err(e) => {
            if !cli.json {
                match &e {
                    ConfigError::Parse { .. } => eprintln!("{}: {e}", config.display()),
                    ConfigError::Invalid { issues } => {
                        for i in issues {
                            eprintln!("{}: {i}", config.display());
                        }
                    }
                }
            }
            Err(CliError::Invalid(format!(
                "{} is invalid",
                config.display()
            )))
        }
    }
}

fn load_scenario(path: &Path) -> Result<(ScenarioConfig, RunInputs), CliError> {
    let text = read_text(path)?;
    let cfg =
        load_config(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let inputs = RunInputs::from_config(&cfg, base)?;
    Ok((cfg, inputs))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned())
}

fn run_one(cli: &Cli, config: &Path, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let (mut cfg, inputs) = load_scenario(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let artifacts = run(&cfg, &inputs)?;
    artifacts.write_to(out)?;
    let s = &artifacts.summary;
    if cli.json {
        println!("{}", to_json(s));
    } else {
        println!(
            "scenario:             {}",
            if s.name.is_empty() {
                stem(config)
            } else {
                s.name.clone()
            }
        );
        println!("output:               {}", out.display());
        println!("peak load:            {:.3} kW", s.peak_load_kw);
        println!("total energy:         {:.3} kWh", s.total_energy_kwh);
        println!(
            "price mean / sigma:   {:.3} / {:.3} $/MWh",
            s.price_mean, s.price_sigma
        );
        println!("UFLS events:          {}", s.ufls_events);
        println!(
            "oscillation detected: {}",
            if s.oscillation_detected { "yes" } else { "no" }
        );
        if cli.verbose {
            let manifest = &artifacts.files["manifest.json"];
            println!(
                "manifest sha256:      {}",
                tgsim_core::scenario::artifacts::sha256_hex(manifest)
            );
        }
    }
    Ok(())
}

fn cmd_report(
    cli: &Cli,
    run_dir: &Path,
    baseline: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let rep = report::build(run_dir, baseline)?;
    let out = out.map_or_else(|| run_dir.join("report"), Path::to_path_buf);
    write_file(
        &out.join("price_duration.csv"),
        report::price_duration_csv(&rep).as_bytes(),
    )?;
    let mut json = to_json(&rep);
    json.push('\n');
    write_file(&out.join("report.json"), json.as_bytes())?;
    if cli.json {
        print!("{json}");
    } else {
        print!("{}", report::render_table(&rep));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_spectra(
    cli: &Cli,
    load: &Path,
    signal: Option<&Path>,
    signal_unit: &str,
    shift_h: Option<f64>,
    max_gap: usize,
    out: &Path,
) -> Result<(), CliError> {
    let ingest = |p: &Path, unit| {
        tgsim_core::scenario::ingest_series(p, unit, max_gap).map_err(|e| match e {
            tgsim_core::scenario::IngestError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        })
    };
    let invalid = |e: tgsim_core::spectral::SpectralError| CliError::Invalid(e.to_string());
    let load = ingest(load, Unit::Kw)?;
    let psd = power_spectral_density(&load).map_err(invalid)?;
    let mut csv = String::from("frequency_hz,power\n");
    for (f, p) in &psd {
        csv.push_str(&format!("{f},{p}\n"));
    }
    write_file(&out.join("psd.csv"), csv.as_bytes())?;
    let mut written = vec!["psd.csv"];

    if let Some(signal) = signal {
        let unit: Unit = signal_unit.parse().map_err(CliError::Invalid)?;
        let v = ingest(signal, unit)?;
        let conv = convolve_fft(&v, &load).map_err(invalid)?;
        let mut body = Vec::new();
        conv.write_csv(&mut body)
            .map_err(|e| CliError::Io(e.to_string()))?;
        write_file(&out.join("convolution.csv"), &body)?;
        written.push("convolution.csv");
        if let Some(shift) = shift_h {
            let impact = shift_impact(&v, &load, shift).map_err(invalid)?;
            let mut json = to_json(&impact);
            json.push('\n');
            write_file(&out.join("shift_impact.json"), json.as_bytes())?;
            written.push("shift_impact.json");
            if !cli.json {
                println!(
                    "shift {shift} h: base {:.6}, shifted {:.6}, difference {:.6}",
                    impact.base, impact.shifted, impact.difference
                );
            }
        }
    } else if shift_h.is_some() {
        return Err(CliError::Invalid("--shift-h needs --signal".into()));
    }
    if cli.json {
        println!(
            "{}",
            to_json(
                &serde_json::json!({ "schema_version": JSON_SCHEMA_VERSION, "files": written })
            )
        );
    } else if cli.verbose {
        for f in written {
            println!("wrote {}", out.join(f).display());
        }
    }
    Ok(())
}

fn cmd_golden(cli: &Cli, dir: &Path, out: &Path) -> Result<(), CliError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut configs: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    configs.sort();
    if configs.is_empty() {
        return Err(CliError::Invalid(format!(
            "no scenarios in {}",
            dir.display()
        )));
    }
    for config in configs {
        run_one(cli, &config, None, &out.join(stem(&config)))?;
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate { config } => cmd_validate(cli, config),
        Command::Run {
            config,
            seed,
            out,
            out_root,
        } => {
            let out = out.clone().unwrap_or_else(|| out_root.join(stem(config)));
            run_one(cli, config, *seed, &out)
        }
        Command::Report { run, baseline, out } => {
            cmd_report(cli, run, baseline.as_deref(), out.as_deref())
        }
        Command::Spectra {
            load,
            signal,
            signal_unit,
            shift_h,
            max_gap,
            out,
        } => cmd_spectra(
            cli,
            load,
            signal.as_deref(),
            signal_unit,
            *shift_h,
            *max_gap,
            out,
        ),
        Command::Golden { dir, out } => cmd_golden(cli, dir, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(&e, CliError::Invalid(m) if m.ends_with("is invalid")) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.code())
        }
    }
}
