//! Run configuration: one JSON document drives every subcommand.
//!
//! Frequencies are given in MHz (`*_MHz_times_2pi` means the value is
//! multiplied by 2π×10⁶ to get rad/s), times in μs, velocities in m/s,
//! temperatures in μK. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use dualpulse_core::gate::{GateScenario, Propagation};
use dualpulse_core::optimizer::{InitialGuess, ObjectiveWeights, OptimizerConfig};
use dualpulse_core::physics::{PhysicsParams, Species, ATOMIC_MASS_UNIT};
use dualpulse_core::propagator::Tolerances;
use dualpulse_core::scans::VelocityMode;
use dualpulse_core::waveform::{PulseWaveform, UnitsMode, WaveformDoc};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn negative_or_nan(x: f64) -> bool {
    x.is_nan() || x < 0.0
}

fn two_pi_mhz(x: f64) -> f64 {
    TAU * 1e6 * x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physics: PhysicsDoc,
    /// Inline waveform document or `{"file": "path.json"}`.
    pub waveform: serde_json::Value,
    #[serde(default)]
    pub scenario: ScenarioDoc,
    #[serde(default)]
    pub tolerances: ToleranceDoc,
    #[serde(default)]
    pub pulse: PulseDoc,
    #[serde(default)]
    pub scan_velocity: ScanVelocityDoc,
    #[serde(default)]
    pub scan_temperature: ScanTemperatureDoc,
    #[serde(default)]
    pub scan_decay: ScanDecayDoc,
    #[serde(default)]
    pub scan_blockade: ScanBlockadeDoc,
    #[serde(default)]
    pub optimizer: OptimizerDoc,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsDoc {
    pub B_MHz_times_2pi: f64,
    pub delta_p_MHz_times_2pi: f64,
    #[serde(default)]
    pub gamma_per_s: f64,
    #[serde(default)]
    pub wavelength_nm: Option<f64>,
    pub species: Species,
    #[serde(default)]
    pub mass_u: Option<f64>,
}

impl PhysicsDoc {
    pub fn to_params(&self) -> Result<PhysicsParams, ConfigError> {
        let mass_u = match (self.species, self.mass_u) {
            (_, Some(m)) => m,
            (s, None) => s.mass_u().ok_or_else(|| {
                ConfigError::Invalid("physics.mass_u is required for species \"custom\"".into())
            })?,
        };
        let wavelength_nm = match (self.species, self.wavelength_nm) {
            (_, Some(l)) => l,
            (s, None) => s.wavelength_nm().ok_or_else(|| {
                ConfigError::Invalid(
                    "physics.wavelength_nm is required for species \"custom\"".into(),
                )
            })?,
        };
        PhysicsParams::new(
            two_pi_mhz(self.B_MHz_times_2pi),
            two_pi_mhz(self.delta_p_MHz_times_2pi),
            self.gamma_per_s,
            wavelength_nm * 1e-9,
            mass_u * ATOMIC_MASS_UNIT,
        )
        .map_err(|e| ConfigError::Invalid(format!("physics: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub v_control: f64,
    #[serde(default)]
    pub v_target: f64,
    #[serde(default = "default_propagation")]
    pub propagation: Propagation,
    #[serde(default)]
    pub gap_time_us: f64,
}

fn default_propagation() -> Propagation {
    Propagation::CounterPropagating
}

impl Default for ScenarioDoc {
    fn default() -> Self {
        Self {
            v_control: 0.0,
            v_target: 0.0,
            propagation: default_propagation(),
            gap_time_us: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceDoc {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default)]
    pub max_step_us: Option<f64>,
}

fn default_rel_tol() -> f64 {
    Tolerances::default().rel_tol
}

fn default_abs_tol() -> f64 {
    Tolerances::default().abs_tol
}

impl Default for ToleranceDoc {
    fn default() -> Self {
        Self {
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            max_step_us: None,
        }
    }
}

impl ToleranceDoc {
    pub fn to_tolerances(&self) -> Result<Tolerances, ConfigError> {
        let t = Tolerances {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step_us.map(|h| h / 1e6),
        };
        t.validate()
            .map_err(|e| ConfigError::Invalid(format!("tolerances: {e}")))?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseDoc {
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    2000
}

impl Default for PulseDoc {
    fn default() -> Self {
        Self {
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanVelocityDoc {
    /// Explicit grid; when absent, `k v T ∈ {−0.3, −0.25, …, 0.3}`.
    #[serde(default)]
    pub velocities_m_per_s: Option<Vec<f64>>,
    #[serde(default = "default_velocity_mode")]
    pub mode: VelocityMode,
}

fn default_velocity_mode() -> VelocityMode {
    VelocityMode::BothAtoms
}

impl Default for ScanVelocityDoc {
    fn default() -> Self {
        Self {
            velocities_m_per_s: None,
            mode: default_velocity_mode(),
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanTemperatureDoc {
    #[serde(default = "default_temperatures")]
    pub temperatures_uK: Vec<f64>,
    #[serde(default = "default_mc_samples")]
    pub n_samples: usize,
}

fn default_temperatures() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 3.0, 5.0, 7.5, 10.0]
}

fn default_mc_samples() -> usize {
    1000
}

impl Default for ScanTemperatureDoc {
    fn default() -> Self {
        Self {
            temperatures_uK: default_temperatures(),
            n_samples: default_mc_samples(),
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanDecayDoc {
    #[serde(default = "default_gammas")]
    pub gammas_per_s: Vec<f64>,
    #[serde(default = "default_decay_temperature")]
    pub temperature_uK: f64,
    #[serde(default = "default_mc_samples")]
    pub n_samples: usize,
}

fn default_gammas() -> Vec<f64> {
    vec![0.0, 1000.0, 2000.0, 3000.0, 4000.0, 5000.0]
}

fn default_decay_temperature() -> f64 {
    2.0
}

impl Default for ScanDecayDoc {
    fn default() -> Self {
        Self {
            gammas_per_s: default_gammas(),
            temperature_uK: default_decay_temperature(),
            n_samples: default_mc_samples(),
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlockadeDoc {
    #[serde(default = "default_blockade")]
    pub B_MHz_times_2pi: Vec<f64>,
}

fn default_blockade() -> Vec<f64> {
    vec![250.0, 354.0, 500.0, 707.0, 1000.0]
}

impl Default for ScanBlockadeDoc {
    fn default() -> Self {
        Self {
            B_MHz_times_2pi: default_blockade(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialDoc {
    PaperSeed,
    AdiabaticSketch,
    /// Random start drawn from the run seed.
    Random,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerDoc {
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_true")]
    pub symmetric: bool,
    /// Defaults to the configured waveform's duration.
    #[serde(default)]
    pub duration_us: Option<f64>,
    #[serde(default = "default_coefficient_bound")]
    pub coefficient_bound_MHz_times_2pi: f64,
    #[serde(default = "default_detuning_bounds")]
    pub detuning_bounds_MHz_times_2pi: [f64; 2],
    #[serde(default = "default_initial")]
    pub initial: InitialDoc,
    #[serde(default)]
    pub weights: Option<ObjectiveWeights>,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default = "default_target")]
    pub target_error: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_degree() -> usize {
    8
}
fn default_true() -> bool {
    true
}
fn default_coefficient_bound() -> f64 {
    50.0
}
fn default_detuning_bounds() -> [f64; 2] {
    [-20.0, 20.0]
}
fn default_initial() -> InitialDoc {
    InitialDoc::PaperSeed
}
fn default_max_evals() -> usize {
    5000
}
fn default_target() -> f64 {
    OptimizerConfig::default().target_error
}
fn default_restarts() -> usize {
    OptimizerConfig::default().restarts
}

impl Default for OptimizerDoc {
    fn default() -> Self {
        Self {
            degree: default_degree(),
            symmetric: true,
            duration_us: None,
            coefficient_bound_MHz_times_2pi: default_coefficient_bound(),
            detuning_bounds_MHz_times_2pi: default_detuning_bounds(),
            initial: default_initial(),
            weights: None,
            max_evals: default_max_evals(),
            target_error: default_target(),
            restarts: default_restarts(),
        }
    }
}

/// Fully resolved inputs shared by the subcommands.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub physics: PhysicsParams,
    pub waveform: PulseWaveform,
    pub units: UnitsMode,
    pub scenario: GateScenario,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|source| ConfigError::Parse {
                path: path.to_owned(),
                source,
            })?;
        cfg.inline_waveform(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    /// Replaces a `{"file": …}` waveform reference by the document it names,
    /// so that hashing and echoing see the actual waveform.
    fn inline_waveform(&mut self, base: &Path) -> Result<(), ConfigError> {
        let file = match self.waveform.as_object() {
            Some(obj) if obj.contains_key("file") => {
                if obj.len() != 1 {
                    return Err(ConfigError::Invalid(
                        "waveform: a file reference takes no other keys".into(),
                    ));
                }
                obj["file"].as_str().map(PathBuf::from).ok_or_else(|| {
                    ConfigError::Invalid("waveform.file must be a string path".into())
                })?
            }
            _ => return Ok(()),
        };
        let path = if file.is_absolute() {
            file
        } else {
            base.join(file)
        };
        let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read {
            path: path.clone(),
            source,
        })?;
        self.waveform = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.clone(),
            source,
        })?;
        Ok(())
    }

    pub fn waveform_doc(&self) -> Result<WaveformDoc, ConfigError> {
        serde_json::from_value(self.waveform.clone())
            .map_err(|e| ConfigError::Invalid(format!("waveform: {e}")))
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let physics = self.physics.to_params()?;
        let doc = self.waveform_doc()?;
        let waveform = doc
            .to_waveform()
            .map_err(|e| ConfigError::Invalid(format!("waveform: {e}")))?;
        let s = &self.scenario;
        if !(s.gap_time_us >= 0.0 && s.gap_time_us.is_finite()) {
            return Err(ConfigError::Invalid(
                "scenario.gap_time_us must be finite and >= 0".into(),
            ));
        }
        if !(s.v_control.is_finite() && s.v_target.is_finite()) {
            return Err(ConfigError::Invalid(
                "scenario velocities must be finite".into(),
            ));
        }
        let scenario = GateScenario {
            waveform: waveform.clone(),
            physics,
            v_control: s.v_control,
            v_target: s.v_target,
            propagation: s.propagation,
            gap_time: s.gap_time_us / 1e6,
            tolerances: self.tolerances.to_tolerances()?,
        };
        Ok(Resolved {
            physics,
            waveform,
            units: doc.units_mode,
            scenario,
        })
    }

    pub fn velocity_grid(&self, resolved: &Resolved) -> Vec<f64> {
        match &self.scan_velocity.velocities_m_per_s {
            Some(v) => v.clone(),
            None => {
                let per_kvt = 1.0 / (resolved.physics.wave_number() * resolved.waveform.duration());
                (-6..=6).map(|i| 0.05 * i as f64 * per_kvt).collect()
            }
        }
    }

    pub fn optimizer_config(&self, resolved: &Resolved) -> Result<OptimizerConfig, ConfigError> {
        let o = &self.optimizer;
        let defaults = OptimizerConfig::default();
        let cfg = OptimizerConfig {
            degree: o.degree,
            symmetric: o.symmetric,
            duration: o
                .duration_us
                .map_or(resolved.waveform.duration(), |d| d / 1e6),
            coefficient_bound: two_pi_mhz(o.coefficient_bound_MHz_times_2pi),
            detuning_bounds: (
                two_pi_mhz(o.detuning_bounds_MHz_times_2pi[0]),
                two_pi_mhz(o.detuning_bounds_MHz_times_2pi[1]),
            ),
            initial: match o.initial {
                InitialDoc::PaperSeed => InitialGuess::PaperSeed,
                InitialDoc::AdiabaticSketch => InitialGuess::AdiabaticSketch,
                InitialDoc::Random => InitialGuess::Random { seed: self.seed },
            },
            weights: o.weights.unwrap_or_default(),
            max_evals: o.max_evals,
            target_error: o.target_error,
            restarts: o.restarts,
            tolerances: resolved.scenario.tolerances,
            ..defaults
        };
        cfg.validate()
            .map_err(|e| ConfigError::Invalid(format!("optimizer: {e}")))?;
        Ok(cfg)
    }

    pub fn validate_scans(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.pulse.samples < 2 {
            return bad("pulse.samples must be at least 2");
        }
        if self.scan_temperature.n_samples < 2 || self.scan_decay.n_samples < 2 {
            return bad("Monte-Carlo n_samples must be at least 2");
        }
        if self
            .scan_temperature
            .temperatures_uK
            .iter()
            .any(|&t| negative_or_nan(t))
        {
            return bad("scan_temperature.temperatures_uK must be non-negative");
        }
        if self
            .scan_decay
            .gammas_per_s
            .iter()
            .any(|&g| negative_or_nan(g))
        {
            return bad("scan_decay.gammas_per_s must be non-negative");
        }
        if negative_or_nan(self.scan_decay.temperature_uK) {
            return bad("scan_decay.temperature_uK must be non-negative");
        }
        if self
            .scan_blockade
            .B_MHz_times_2pi
            .iter()
            .any(|&b| negative_or_nan(b) || b == 0.0)
        {
            return bad("scan_blockade.B_MHz_times_2pi must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "physics": {"B_MHz_times_2pi": 500, "delta_p_MHz_times_2pi": -3, "species": "Rb"},
        "waveform": {"degree": 8, "coefficients_MHz": [0.794, 0, 5.841, 9.725, 5.841, 0, 0.794],
                     "detuning_MHz": -2.36, "duration_us": 1, "units_mode": "two_pi_megahertz"}
    }"#;

    #[test]
    fn minimal_config_resolves() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("x.json")).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.waveform, PulseWaveform::paper(UnitsMode::TwoPiMegahertz));
        assert_eq!(r.physics, PhysicsParams::default());
        assert_eq!(r.scenario.propagation, Propagation::CounterPropagating);
        assert_eq!(cfg.scan_temperature.n_samples, 1000);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = MINIMAL.replacen(
            "\"species\": \"Rb\"",
            "\"species\": \"Rb\", \"colour\": 1",
            1,
        );
        let err = RunConfig::parse(&text, Path::new("x.json")).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replacen("\"species\": \"Rb\"", "\"gamma_per_s\": 0", 1);
        let err = RunConfig::parse(&text, Path::new("x.json")).unwrap_err();
        assert!(err.to_string().contains("species"), "{err}");
    }

    #[test]
    fn custom_species_needs_mass() {
        let text = MINIMAL.replacen("\"Rb\"", "\"custom\", \"wavelength_nm\": 300", 1);
        let cfg = RunConfig::parse(&text, Path::new("x.json")).unwrap();
        assert!(cfg.resolve().unwrap_err().to_string().contains("mass_u"));
    }

    #[test]
    fn default_velocity_grid_spans_kvt() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("x.json")).unwrap();
        let r = cfg.resolve().unwrap();
        let grid = cfg.velocity_grid(&r);
        assert_eq!(grid.len(), 13);
        let kvt = grid[12] * r.physics.wave_number() * 1e-6;
        assert!((kvt - 0.3).abs() < 1e-12);
    }
}
