//! Command-line front end: config validation, compensation design, field
//! maps, transient simulation, resonance sweeps, heating tables, and the
//! consolidated report.
//!
//! Data goes to stdout and files under `--out`; diagnostics go to stderr.
//! Exit codes: 0 success, 1 config or validation failure, 2 solver/numeric
//! error. Output files carry no timestamps, so re-running a subcommand on
//! the same config reproduces them byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use fieldforge::config::{validate_config, ChamberConfig, ConfigError};
use fieldforge::drive::{
    simulate_transient, steady_state, DriveWaveformSpec, SimTrace, SolverError,
};
use fieldforge::magnetics::{
    channel_cross_coupling, compute_field_map, uniformity, MagneticsError,
};
use fieldforge::report::{DesignReport, ReportError, ReportOptions};
use fieldforge::resonance::{design_network, predicted_resonance, ResonanceError};
use fieldforge::thermal::{heating_curve, safety_check, HeatingResult, ThermalError};

#[derive(Parser)]
#[command(
    name = "fieldforge",
    about = "Dual-channel resonant magnetic chamber models",
    version
)]
struct Cli {
    /// Path to the chamber config file.
    #[arg(long, global = true, default_value = "table1.cfg")]
    config: PathBuf,
    /// Output directory for data files.
    #[arg(long, global = true, default_value = "./out")]
    out: PathBuf,
    /// Format for structured exports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ChannelArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Check the config against every invariant and cross-reference.
    Validate,
    /// Compensation capacitance, bank composition, and predicted resonance.
    DesignCaps,
    /// Map one channel's field over the chamber interior.
    FieldMap {
        #[arg(long, value_enum)]
        channel: ChannelArg,
        /// Excitation current (A peak); defaults to the channel rating.
        #[arg(long)]
        current: Option<f64>,
    },
    /// Transient simulation of the coupled channel loops.
    Simulate {
        #[arg(long, value_enum)]
        channel: ChannelArg,
        /// Duty ratio for the driven channel(s); defaults to the rating.
        #[arg(long)]
        duty: Option<f64>,
        /// Simulated time (s); defaults to a settled run.
        #[arg(long)]
        duration: Option<f64>,
        /// Integration step (s); defaults to 1/400 of the faster period.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Locate the resonance by maximizing simulated coil current.
    Sweep {
        #[arg(long, value_enum)]
        channel: ChannelArg,
        /// Sweep start (Hz); defaults to 10% below the predicted resonance.
        #[arg(long)]
        from: Option<f64>,
        /// Sweep end (Hz); defaults to 10% above the predicted resonance.
        #[arg(long)]
        to: Option<f64>,
        #[arg(long, default_value_t = 41)]
        steps: u32,
    },
    /// Nanoparticle heating table with the wall safety line.
    Heat {
        #[arg(long)]
        sample: String,
        #[arg(long, value_enum)]
        channel: ChannelArg,
        #[arg(long)]
        duration: f64,
    },
    /// Consolidated design report across all modules.
    Report,
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Validation(usize),
    Magnetics(MagneticsError),
    Resonance(ResonanceError),
    Solver(SolverError),
    Thermal(ThermalError),
    Io(std::io::Error),
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Validation(_) | CliError::Usage(_) => 1,
            CliError::Magnetics(_)
            | CliError::Resonance(_)
            | CliError::Solver(_)
            | CliError::Thermal(_)
            | CliError::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Validation(n) => write!(f, "config failed validation with {n} violations"),
            CliError::Magnetics(e) => write!(f, "{e}"),
            CliError::Resonance(e) => write!(f, "{e}"),
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Thermal(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}
impl From<MagneticsError> for CliError {
    fn from(e: MagneticsError) -> Self {
        CliError::Magnetics(e)
    }
}
impl From<ResonanceError> for CliError {
    fn from(e: ResonanceError) -> Self {
        CliError::Resonance(e)
    }
}
impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Solver(e)
    }
}
impl From<ThermalError> for CliError {
    fn from(e: ThermalError) -> Self {
        CliError::Thermal(e)
    }
}
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Config(e) => CliError::Config(e),
            ReportError::Magnetics(e) => CliError::Magnetics(e),
            ReportError::Resonance(e) => CliError::Resonance(e),
            ReportError::Solver(e) => CliError::Solver(e),
            ReportError::Thermal(e) => CliError::Thermal(e),
        }
    }
}

/// Per-run manifest tying outputs to the exact config that produced them.
#[derive(Serialize)]
struct ScenarioResult {
    scenario: String,
    config_sha256: String,
    outputs: Vec<String>,
    passed: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_thread_pool();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

/// FIELDFORGE_THREADS caps the rayon pool.
fn init_thread_pool() {
    if let Ok(value) = std::env::var("FIELDFORGE_THREADS") {
        match value.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => eprintln!("warning: ignoring invalid FIELDFORGE_THREADS={value:?}"),
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&cli.config).map_err(|source| ConfigError::Io {
        path: cli.config.display().to_string(),
        source,
    })?;
    let digest = format!("{:x}", Sha256::digest(text.as_bytes()));
    let config = ChamberConfig::from_toml_str(&text)?;

    match &cli.command {
        Command::Validate => cmd_validate(&config),
        other => {
            // Every other subcommand refuses to run on an invalid config.
            let report = validate_config(&config);
            if !report.is_valid() {
                for v in &report.violations {
                    eprintln!("violation: {v}");
                }
                return Err(CliError::Validation(report.violations.len()));
            }
            match other {
                Command::Validate => unreachable!(),
                Command::DesignCaps => cmd_design_caps(cli, &config, &digest),
                Command::FieldMap { channel, current } => {
                    cmd_field_map(cli, &config, &digest, *channel, *current)
                }
                Command::Simulate {
                    channel,
                    duty,
                    duration,
                    step,
                } => cmd_simulate(cli, &config, &digest, *channel, *duty, *duration, *step),
                Command::Sweep {
                    channel,
                    from,
                    to,
                    steps,
                } => cmd_sweep(cli, &config, &digest, *channel, *from, *to, *steps),
                Command::Heat {
                    sample,
                    channel,
                    duration,
                } => cmd_heat(cli, &config, &digest, sample, *channel, *duration),
                Command::Report => cmd_report(cli, &config, &digest),
            }
        }
    }
}

fn channel_ids(arg: ChannelArg) -> Vec<u8> {
    match arg {
        ChannelArg::One => vec![1],
        ChannelArg::Two => vec![2],
        ChannelArg::Both => vec![1, 2],
    }
}

fn single_channel(arg: ChannelArg) -> Result<u8, CliError> {
    match arg {
        ChannelArg::One => Ok(1),
        ChannelArg::Two => Ok(2),
        ChannelArg::Both => Err(CliError::Usage(
            "this subcommand takes --channel 1 or --channel 2".into(),
        )),
    }
}

fn write_output(
    out_dir: &Path,
    name: &str,
    contents: &str,
    outputs: &mut Vec<String>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    std::fs::write(&path, contents)?;
    outputs.push(path.display().to_string());
    Ok(())
}

fn write_manifest(
    out_dir: &Path,
    scenario: &str,
    digest: &str,
    outputs: Vec<String>,
    passed: bool,
) -> Result<(), CliError> {
    let manifest = ScenarioResult {
        scenario: scenario.to_string(),
        config_sha256: digest.to_string(),
        outputs,
        passed,
    };
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{scenario}_manifest.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap())?;
    Ok(())
}

fn cmd_validate(config: &ChamberConfig) -> Result<(), CliError> {
    let report = validate_config(config);
    println!("{} violations", report.violations.len());
    for v in &report.violations {
        println!("  {v}");
    }
    if report.is_valid() {
        Ok(())
    } else {
        Err(CliError::Validation(report.violations.len()))
    }
}

fn cmd_design_caps(cli: &Cli, config: &ChamberConfig, digest: &str) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for ch in &config.channels {
        let network = config.network(ch.id)?;
        rows.extend(design_network(network, ch.nominal_frequency)?);
    }

    println!("channel half  C_calc_nF  C_bank_nF  f_predicted_kHz  bank");
    for row in &rows {
        let bank = row
            .bank_parts
            .iter()
            .map(|&(v, n)| format!("{} x {:.1} nF", n, v * 1e9))
            .collect::<Vec<_>>()
            .join(" + ");
        println!(
            "{:>7} {:>4} {:>10.1} {:>10.1} {:>16.2}  ({}) / 2",
            row.channel,
            row.half,
            row.c_calc_f * 1e9,
            row.c_bank_f * 1e9,
            row.f_predicted_hz / 1e3,
            bank
        );
    }

    let mut outputs = Vec::new();
    match cli.format {
        Format::Json => {
            let json = serde_json::to_string_pretty(&rows).unwrap();
            write_output(&cli.out, "design_caps.json", &json, &mut outputs)?;
        }
        Format::Csv => {
            let mut csv =
                String::from("channel,half,C_calc_F,bank_parts,C_bank_F,f_predicted_Hz\n");
            for row in &rows {
                let bank = row
                    .bank_parts
                    .iter()
                    .map(|&(v, n)| format!("{n} x {v:e}"))
                    .collect::<Vec<_>>()
                    .join(" + ");
                let _ = writeln!(
                    csv,
                    "{},{},{:e},\"{}\",{:e},{:e}",
                    row.channel, row.half, row.c_calc_f, bank, row.c_bank_f, row.f_predicted_hz
                );
            }
            write_output(&cli.out, "design_caps.csv", &csv, &mut outputs)?;
        }
    }
    write_manifest(&cli.out, "design_caps", digest, outputs, true)
}

fn cmd_field_map(
    cli: &Cli,
    config: &ChamberConfig,
    digest: &str,
    channel: ChannelArg,
    current: Option<f64>,
) -> Result<(), CliError> {
    let mut outputs = Vec::new();
    for id in channel_ids(channel) {
        let ch = config.channel(id)?;
        let amps = current.unwrap_or(ch.max_current);
        eprintln!("mapping channel {id} at {amps} A");
        let map = compute_field_map(config, id, amps)?;
        let stats = uniformity(&map, 0.10)?;
        println!(
            "channel {id}: median {:.2} mT, min {:.2} mT, max {:.2} mT, band(+/-10%) fraction {:.3}",
            stats.median_magnitude * 1e3,
            stats.min * 1e3,
            stats.max * 1e3,
            stats.band_fraction
        );
        write_output(
            &cli.out,
            &format!("field_map_ch{id}.csv"),
            &map.to_csv(Some(&stats)),
            &mut outputs,
        )?;
    }
    write_manifest(&cli.out, "field_map", digest, outputs, true)
}

/// Build the per-channel drives for a simulation run: driven channels run at
/// their predicted resonance and rated (or given) duty.
fn build_drives(
    config: &ChamberConfig,
    driven: &[u8],
    duty: Option<f64>,
) -> Result<[DriveWaveformSpec; 2], CliError> {
    let mut drives = Vec::new();
    for id in [1u8, 2u8] {
        let network = config.network(id)?;
        let f0 = predicted_resonance(network, 0);
        if driven.contains(&id) {
            let ch = config.channel(id)?;
            drives.push(DriveWaveformSpec {
                frequency: f0,
                duty: duty.unwrap_or(ch.max_duty),
                bus_voltage: network.dc_bus_voltage,
                interleave_submodules: if id == 2 { 2 } else { 1 },
                phase: 0.0,
            });
        } else {
            drives.push(DriveWaveformSpec::idle(f0));
        }
    }
    Ok([drives[0].clone(), drives[1].clone()])
}

fn run_simulation(
    config: &ChamberConfig,
    driven: &[u8],
    duty: Option<f64>,
    duration: Option<f64>,
    step: Option<f64>,
) -> Result<SimTrace, CliError> {
    let n1 = config.network(1)?;
    let n2 = config.network(2)?;
    let drives = build_drives(config, driven, duty)?;
    let coupling = channel_cross_coupling(config)?;

    let f_fast = drives[0].frequency.max(drives[1].frequency);
    let f_slow = drives[0].frequency.min(drives[1].frequency);
    let step = step.unwrap_or(1.0 / (f_fast * 400.0));
    let duration = duration.unwrap_or_else(|| {
        // Settle the slowest driven channel's envelope, then a tail to measure.
        let settle = driven
            .iter()
            .filter_map(|&id| config.network(id).ok())
            .map(|n| {
                let f0 = predicted_resonance(n, 0);
                let q = 2.0 * std::f64::consts::PI * f0 * n.equivalent_inductance(0)
                    / n.series_resistance.max(1e-6);
                (2.5 * q + 20.0) / f0
            })
            .fold(0.0_f64, f64::max);
        settle.max(21.0 / f_slow)
    });

    eprintln!(
        "simulating {} s at step {:.3e} s ({} samples)",
        duration,
        step,
        (duration / step).round() as usize
    );
    Ok(simulate_transient(
        [n1, n2],
        [&drives[0], &drives[1]],
        coupling,
        duration,
        step,
    )?)
}

fn cmd_simulate(
    cli: &Cli,
    config: &ChamberConfig,
    digest: &str,
    channel: ChannelArg,
    duty: Option<f64>,
    duration: Option<f64>,
    step: Option<f64>,
) -> Result<(), CliError> {
    let driven = channel_ids(channel);
    let trace = run_simulation(config, &driven, duty, duration, step)?;
    let metrics = steady_state(&trace, 10)?;
    println!(
        "peak current: ch1 {:.1} A, ch2 {:.1} A",
        metrics.peak_current[0], metrics.peak_current[1]
    );
    println!(
        "peak coil voltage: ch1 {:.1} V, ch2 {:.1} V",
        metrics.peak_coil_voltage[0], metrics.peak_coil_voltage[1]
    );
    println!(
        "crosstalk ratio: {:.3e}, settle cycles: {}",
        metrics.crosstalk_ratio, metrics.settle_cycles
    );

    let mut outputs = Vec::new();
    write_output(&cli.out, "trace.csv", &trace.to_csv(), &mut outputs)?;
    write_manifest(&cli.out, "simulate", digest, outputs, true)
}

fn cmd_sweep(
    cli: &Cli,
    config: &ChamberConfig,
    digest: &str,
    channel: ChannelArg,
    from: Option<f64>,
    to: Option<f64>,
    steps: u32,
) -> Result<(), CliError> {
    let id = single_channel(channel)?;
    let network = config.network(id)?;
    let ch = config.channel(id)?;
    let predicted = predicted_resonance(network, 0);
    let lo = from.unwrap_or(predicted * 0.9);
    let hi = to.unwrap_or(predicted * 1.1);
    let drive = DriveWaveformSpec::new(predicted, ch.max_duty, network.dc_bus_voltage);
    eprintln!("sweeping channel {id}: {lo} Hz to {hi} Hz in {steps} steps");
    let found = fieldforge::resonance::sweep_resonance(network, &drive, (lo, hi), steps)?;
    println!(
        "channel {id}: sweep argmax {:.3} kHz, closed form {:.3} kHz, measured {}",
        found / 1e3,
        predicted / 1e3,
        network
            .measured_resonance
            .map(|f| format!("{:.3} kHz", f / 1e3))
            .unwrap_or_else(|| "-".into())
    );

    #[derive(Serialize)]
    struct SweepResult {
        channel: u8,
        f_found_hz: f64,
        f_predicted_hz: f64,
        f_lo_hz: f64,
        f_hi_hz: f64,
        steps: u32,
    }
    let json = serde_json::to_string_pretty(&SweepResult {
        channel: id,
        f_found_hz: found,
        f_predicted_hz: predicted,
        f_lo_hz: lo,
        f_hi_hz: hi,
        steps,
    })
    .unwrap();
    let mut outputs = Vec::new();
    write_output(&cli.out, &format!("sweep_ch{id}.json"), &json, &mut outputs)?;
    write_manifest(&cli.out, "sweep", digest, outputs, true)
}

fn cmd_heat(
    cli: &Cli,
    config: &ChamberConfig,
    digest: &str,
    sample: &str,
    channel: ChannelArg,
    duration: f64,
) -> Result<(), CliError> {
    let id = single_channel(channel)?;
    let sample = config.sample(sample)?;
    let result = heating_curve(sample, id, duration)?;
    println!(
        "{}: channel {} for {:.2} s -> rate {:.3} C/s, dT {:.2} C",
        sample.name, id, duration, result.rate, result.delta_t
    );

    let safety = config.thermal.wall_rate_for_channel(id).map(|rate| {
        let wall = HeatingResult {
            rate,
            delta_t: rate * duration,
            duration,
            subject: format!("enclosure wall, channel {id}"),
        };
        safety_check(&wall, &config.thermal)
    });
    let passed = match &safety {
        Some(check) => {
            println!(
                "wall safety: rate {:.2} C/s vs limit {:.2} C/s -> {} (margin {:.2} C/s)",
                check.rate,
                check.limit,
                if check.pass { "pass" } else { "FAIL" },
                check.margin
            );
            check.pass
        }
        None => {
            println!("wall safety: no measured wall rate for channel {id}");
            true
        }
    };

    // Constant-rate curve samples for plotting.
    let mut csv = String::from("t_s,T_C\n");
    let points = 100usize;
    for k in 0..=points {
        let t = duration * k as f64 / points as f64;
        let _ = writeln!(
            csv,
            "{:.9e},{:.9e}",
            t,
            config.thermal.ambient + result.rate * t
        );
    }
    let mut outputs = Vec::new();
    write_output(
        &cli.out,
        &format!("heat_{}_ch{id}.csv", sample.name),
        &csv,
        &mut outputs,
    )?;
    write_manifest(&cli.out, "heat", digest, outputs, passed)
}

fn cmd_report(cli: &Cli, config: &ChamberConfig, digest: &str) -> Result<(), CliError> {
    let report = DesignReport::generate(config, &ReportOptions::default())?;
    print!("{}", report.render_text());

    let passed = report.crosstalk.iter().all(|x| x.ratio < 0.01)
        && report
            .channels
            .iter()
            .all(|ch| ch.wall_safety.as_ref().is_none_or(|s| s.pass));
    let mut outputs = Vec::new();
    write_output(
        &cli.out,
        "report.json",
        &serde_json::to_string_pretty(&report).unwrap(),
        &mut outputs,
    )?;
    write_manifest(&cli.out, "report", digest, outputs, passed)
}
