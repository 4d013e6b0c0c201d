//! `dualpulse`: batch front-end for dual-pulse gate simulations.
//!
//! Every subcommand reads one JSON run configuration (see `config.rs` and the
//! README) and writes CSV/JSON artifacts plus a manifest into the output
//! directory. File names carry a hash of the resolved configuration.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use dualpulse_core::gate::{gate_error, GateRecord};
use dualpulse_core::optimizer::optimize_waveform;
use dualpulse_core::physics::Channel;
use dualpulse_core::propagator::{evolve_trajectory, ground_phase, unwrap_phases};
use dualpulse_core::scans::{
    scan_blockade, scan_decay, scan_temperature, scan_velocity, RngSpec, ScanTable,
};
use dualpulse_core::waveform::Envelope;

use config::{ConfigError, Resolved, RunConfig};

const THREADS_VAR: &str = "DUALPULSE_THREADS";

#[derive(Parser)]
#[command(
    name = "dualpulse",
    version,
    about = "Dual-pulse Rydberg CZ gate simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Single-pulse trajectories of all four channels.
    Pulse,
    /// Dual-pulse gate error for the configured scenario.
    Gate,
    /// Gate error versus atomic velocity.
    ScanVelocity,
    /// Thermally averaged gate error versus temperature.
    ScanTemperature,
    /// Thermally averaged gate error versus Rydberg decay rate.
    ScanDecay,
    /// Gate error at rest versus Förster coupling.
    ScanBlockade,
    /// Refine the waveform coefficients and detuning.
    Optimize,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Pulse => "pulse",
            Command::Gate => "gate",
            Command::ScanVelocity => "scan-velocity",
            Command::ScanTemperature => "scan-temperature",
            Command::ScanDecay => "scan-decay",
            Command::ScanBlockade => "scan-blockade",
            Command::Optimize => "optimize",
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("computation failed: {0}")]
    Compute(#[from] dualpulse_core::Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Compute(_) | Failure::Write { .. } => 1,
        }
    }
}

/// One emitted file: name relative to the output directory and its bytes.
struct Artifact {
    name: String,
    bytes: Vec<u8>,
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: &'a str,
    seed: u64,
    inputs: &'a RunConfig,
    files: Vec<FileEntry>,
    wall_time_s: f64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

/// Hash of everything that determines the output bytes. The output
/// directory is excluded so that relocating a run keeps its file names.
fn config_hash(cmd: Command, cfg: &RunConfig) -> String {
    let mut value = serde_json::to_value(cfg).expect("serializable config");
    if let Some(obj) = value.as_object_mut() {
        obj.remove("output_dir");
    }
    let doc = serde_json::json!({ "command": cmd.name(), "config": value });
    sha256_hex(&serde_json::to_vec(&doc).expect("serializable config"))[..12].to_string()
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        ConfigError::Invalid(format!(
            "{THREADS_VAR} must be a positive integer, got {raw:?}"
        ))
    })?;
    // Fails only if the global pool already exists, which cannot happen here.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn cmd_pulse(cfg: &RunConfig, r: &Resolved, stem: &str) -> Result<Vec<Artifact>, Failure> {
    #[derive(Serialize)]
    struct ChannelSummary {
        channel: &'static str,
        labels: Vec<String>,
        final_populations: Vec<f64>,
        ground_population: f64,
        ground_phase_rad: Option<f64>,
        norm: f64,
    }
    #[derive(Serialize)]
    struct Summary {
        waveform: dualpulse_core::waveform::WaveformDoc,
        samples: usize,
        channels: Vec<ChannelSummary>,
    }

    let samples = cfg.pulse.samples;
    let mut artifacts = Vec::new();
    let mut channels = Vec::new();
    let to_mhz = |w: f64| r.units.to_megahertz(w);
    for channel in Channel::ALL {
        let sys = r.scenario.system(channel, 1)?;
        let traj = evolve_trajectory(
            &sys,
            &r.waveform,
            &sys.ground_state(),
            &r.scenario.tolerances,
            samples,
        )
        .map_err(|e| dualpulse_core::Error::Channel {
            channel: channel.label(),
            source: Box::new(e),
        })?;

        let raw: Vec<Option<f64>> = traj
            .iter()
            .map(|(_, psi)| ground_phase(psi).ok().map(|p| p.1))
            .collect();
        let defined: Vec<f64> = raw.iter().flatten().copied().collect();
        let mut unwrapped = unwrap_phases(&defined).into_iter();
        let phases: Vec<Option<f64>> = raw
            .iter()
            .map(|p| p.and_then(|_| unwrapped.next()))
            .collect();

        let mut csv = String::from("t_us,omega_MHz");
        for label in &sys.labels {
            write!(csv, ",pop_{label}").unwrap();
        }
        csv.push_str(",phase_ground_rad,norm\n");
        for ((t, psi), phase) in traj.iter().zip(&phases) {
            write!(csv, "{:e},{:e}", t * 1e6, to_mhz(r.waveform.omega(*t))).unwrap();
            for p in psi.populations() {
                write!(csv, ",{p:e}").unwrap();
            }
            match phase {
                Some(ph) => write!(csv, ",{ph:e}").unwrap(),
                None => csv.push_str(",NaN"),
            }
            writeln!(csv, ",{:e}", psi.norm()).unwrap();
        }
        artifacts.push(Artifact {
            name: format!("{stem}-{}.csv", channel.label()),
            bytes: csv.into_bytes(),
        });

        let end = &traj.last().expect("at least two samples").1;
        let pops = end.populations();
        channels.push(ChannelSummary {
            channel: channel.label(),
            labels: sys.labels.iter().map(|l| l.to_string()).collect(),
            ground_population: pops[0],
            final_populations: pops,
            ground_phase_rad: ground_phase(end).ok().map(|p| p.1),
            norm: end.norm(),
        });
    }

    let summary = Summary {
        waveform: r.waveform.to_doc(r.units),
        samples,
        channels,
    };
    artifacts.push(Artifact {
        name: format!("{stem}.summary.json"),
        bytes: json_bytes(&summary),
    });
    Ok(artifacts)
}

fn cmd_gate(r: &Resolved, stem: &str) -> Result<Vec<Artifact>, Failure> {
    let result = gate_error(&r.scenario)?;
    let record = GateRecord::new(&result, &r.scenario, r.units);
    Ok(vec![Artifact {
        name: format!("{stem}.json"),
        bytes: json_bytes(&record),
    }])
}

fn scan_artifacts(table: &ScanTable, x_unit: &str, stem: &str) -> Vec<Artifact> {
    #[derive(Serialize)]
    struct Doc<'a> {
        x_unit: &'a str,
        #[serde(flatten)]
        table: &'a ScanTable,
    }
    vec![
        Artifact {
            name: format!("{stem}.csv"),
            bytes: table.to_csv().into_bytes(),
        },
        Artifact {
            name: format!("{stem}.json"),
            bytes: json_bytes(&Doc { x_unit, table }),
        },
    ]
}

fn cmd_optimize(cfg: &RunConfig, r: &Resolved, stem: &str) -> Result<Vec<Artifact>, Failure> {
    let opt = cfg.optimizer_config(r)?;
    let report = optimize_waveform(&opt, &r.physics)?.to_doc();
    Ok(vec![
        Artifact {
            name: format!("{stem}.json"),
            bytes: json_bytes(&report),
        },
        Artifact {
            name: format!("{stem}.waveform.json"),
            bytes: json_bytes(&report.best_waveform),
        },
    ])
}

fn execute(cmd: Command, cfg: &RunConfig, stem: &str) -> Result<Vec<Artifact>, Failure> {
    let r = cfg.resolve()?;
    cfg.validate_scans()?;
    if cmd == Command::Optimize {
        cfg.optimizer_config(&r)?;
    }
    let rng = RngSpec::new(cfg.seed);
    match cmd {
        Command::Pulse => cmd_pulse(cfg, &r, stem),
        Command::Gate => cmd_gate(&r, stem),
        Command::ScanVelocity => {
            let table = scan_velocity(&r.scenario, &cfg.velocity_grid(&r), cfg.scan_velocity.mode)?;
            Ok(scan_artifacts(&table, "m/s", stem))
        }
        Command::ScanTemperature => {
            let s = &cfg.scan_temperature;
            let temps: Vec<f64> = s.temperatures_uK.iter().map(|t| t / 1e6).collect();
            let table = scan_temperature(&r.scenario, &temps, s.n_samples, rng)?;
            Ok(scan_artifacts(&table, "K", stem))
        }
        Command::ScanDecay => {
            let s = &cfg.scan_decay;
            let table = scan_decay(
                &r.scenario,
                &s.gammas_per_s,
                s.temperature_uK / 1e6,
                s.n_samples,
                rng,
            )?;
            Ok(scan_artifacts(&table, "1/s", stem))
        }
        Command::ScanBlockade => {
            let couplings: Vec<f64> = cfg
                .scan_blockade
                .B_MHz_times_2pi
                .iter()
                .map(|b| std::f64::consts::TAU * 1e6 * b)
                .collect();
            let table = scan_blockade(&r.scenario, &couplings)?;
            Ok(scan_artifacts(&table, "rad/s", stem))
        }
        Command::Optimize => cmd_optimize(cfg, &r, stem),
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|source| Failure::Write { path, source })
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    configure_threads()?;
    let path = cli
        .config
        .ok_or_else(|| ConfigError::Invalid("missing required option --config <PATH>".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }

    let started = Instant::now();
    let hash = config_hash(cli.command, &cfg);
    let stem = format!("{}-{hash}", cli.command.name());
    let artifacts = execute(cli.command, &cfg, &stem)?;

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|source| Failure::Write {
        path: dir.clone(),
        source,
    })?;
    let mut written = Vec::new();
    for a in &artifacts {
        write_file(dir, &a.name, &a.bytes)?;
        written.push(dir.join(&a.name));
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        config_hash: &hash,
        seed: cfg.seed,
        inputs: &cfg,
        files: artifacts
            .iter()
            .map(|a| FileEntry {
                name: a.name.clone(),
                sha256: sha256_hex(&a.bytes),
                bytes: a.bytes.len(),
            })
            .collect(),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let name = format!("{stem}.manifest.json");
    write_file(dir, &name, &json_bytes(&manifest))?;
    written.push(dir.join(name));
    Ok(written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
