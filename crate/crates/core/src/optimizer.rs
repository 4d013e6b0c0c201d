//! Waveform refinement by bounded Nelder–Mead search with restarts.
//!
//! Search coordinates are frequencies in units of 2π×MHz:
//! `[β_1..β_m, Δ0]`, where in symmetric mode only `β_1..β_{⌈(n-1)/2⌉}` are
//! free and the rest mirror them.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{invalid, Result};
use crate::gate::{
    continue_pulse, fidelity_from_diag, ground_amplitudes, optimize_local_phases,
    simulate_pulse_states, GateScenario,
};
use crate::physics::PhysicsParams;
use crate::propagator::Tolerances;
use crate::waveform::{
    PulseWaveform, UnitsMode, WaveformDoc, PAPER_COEFFICIENTS_MHZ, PAPER_DETUNING_MHZ,
};

/// Objective value returned when a candidate cannot be simulated.
pub const FAILURE_PENALTY: f64 = 1e6;

const UNITS: UnitsMode = UnitsMode::TwoPiMegahertz;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialGuess {
    PaperSeed,
    AdiabaticSketch,
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub population: f64,
    pub phase: f64,
    pub infidelity: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            population: 1.0,
            phase: 1.0,
            infidelity: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub degree: usize,
    pub symmetric: bool,
    /// Pulse length (s).
    pub duration: f64,
    /// Cap on |β_ν| (rad/s).
    pub coefficient_bound: f64,
    /// Allowed detuning interval (rad/s).
    pub detuning_bounds: (f64, f64),
    pub initial: InitialGuess,
    pub weights: ObjectiveWeights,
    pub max_evals: usize,
    /// Stop once the objective drops to this value.
    pub target_error: f64,
    /// Simplex collapse: vertex spread in search units (2π×MHz).
    pub x_tol: f64,
    /// Simplex collapse: objective spread.
    pub f_tol: f64,
    /// Fresh simplices built around the incumbent after a collapse.
    pub restarts: usize,
    pub tolerances: Tolerances,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            degree: 8,
            symmetric: true,
            duration: 1e-6,
            coefficient_bound: UNITS.to_rad_per_s(50.0),
            detuning_bounds: (UNITS.to_rad_per_s(-20.0), UNITS.to_rad_per_s(20.0)),
            initial: InitialGuess::PaperSeed,
            weights: ObjectiveWeights::default(),
            max_evals: 5000,
            target_error: 1e-10,
            x_tol: 1e-7,
            f_tol: 1e-13,
            restarts: 6,
            tolerances: Tolerances::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=crate::waveform::MAX_DEGREE).contains(&self.degree) {
            return invalid("optimizer degree out of range");
        }
        let w = &self.weights;
        if [w.population, w.phase, w.infidelity]
            .iter()
            .any(|x| !(*x >= 0.0 && x.is_finite()))
        {
            return invalid("objective weights must be finite and non-negative");
        }
        if w.population + w.phase + w.infidelity <= 0.0 {
            return invalid("at least one objective weight must be positive");
        }
        let (lo, hi) = self.detuning_bounds;
        if !(self.coefficient_bound > 0.0 && self.coefficient_bound.is_finite())
            || !(lo.is_finite() && hi.is_finite() && lo < hi)
        {
            return invalid("optimizer bounds must be finite and non-empty");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return invalid("duration must be positive");
        }
        if self.max_evals == 0 {
            return invalid("max_evals must be at least 1");
        }
        self.tolerances.validate()
    }

    /// Number of free coefficients (excluding detuning).
    pub fn free_coefficients(&self) -> usize {
        let m = self.degree - 1;
        if self.symmetric {
            m.div_ceil(2)
        } else {
            m
        }
    }

    pub fn dimension(&self) -> usize {
        self.free_coefficients() + 1
    }

    /// Expands search coordinates into a waveform.
    pub fn waveform(&self, params: &[f64]) -> Result<PulseWaveform> {
        if params.len() != self.dimension() {
            return invalid(format!(
                "expected {} search parameters, got {}",
                self.dimension(),
                params.len()
            ));
        }
        let m = self.degree - 1;
        let free = &params[..self.free_coefficients()];
        let coeffs: Vec<f64> = (0..m)
            .map(|i| {
                if self.symmetric {
                    free[i.min(m - 1 - i)]
                } else {
                    free[i]
                }
            })
            .collect();
        PulseWaveform::from_megahertz(
            self.degree,
            &coeffs,
            params[params.len() - 1],
            self.duration * 1e6,
            UNITS,
        )
    }

    /// Search coordinates of a waveform (inverse of [`waveform`](Self::waveform)).
    pub fn params_of(&self, w: &PulseWaveform) -> Vec<f64> {
        let doc = w.to_doc(UNITS);
        let mut p: Vec<f64> = doc.coefficients_mhz[..self.free_coefficients()].to_vec();
        p.push(doc.detuning_mhz);
        p
    }

    fn clamp(&self, params: &mut [f64]) {
        let cap = UNITS.to_megahertz(self.coefficient_bound);
        let last = params.len() - 1;
        for p in &mut params[..last] {
            *p = p.clamp(-cap, cap);
        }
        let (lo, hi) = self.detuning_bounds;
        params[last] = params[last].clamp(UNITS.to_megahertz(lo), UNITS.to_megahertz(hi));
    }
}

/// The three penalty terms (already weighted) and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub population: f64,
    pub phase: f64,
    pub infidelity: f64,
    pub total: f64,
}

fn circular_distance(x: f64, target: f64) -> f64 {
    let d = (x - target) % TAU;
    let d = if d < 0.0 { d + TAU } else { d };
    d.min(TAU - d)
}

/// Phase condition violation: circular distance of `2(φ01 + φ10 − φ00)`
/// from ±π.
pub fn phase_violation(single: &[C64; 4]) -> f64 {
    let chi = 2.0 * (single[1].arg() + single[2].arg() - single[0].arg() - single[3].arg());
    circular_distance(chi, PI).min(circular_distance(chi, -PI))
}

/// Objective terms for a waveform at rest without decay.
pub fn objective_terms(
    waveform: &PulseWaveform,
    cfg: &OptimizerConfig,
    physics: &PhysicsParams,
) -> Result<ObjectiveTerms> {
    let mut scenario = GateScenario::new(waveform.clone(), physics.with_decay(0.0));
    scenario.tolerances = cfg.tolerances;
    let first = simulate_pulse_states(&scenario, 1)?;
    let single = ground_amplitudes(&first);
    let leak: f64 = single[..3].iter().map(|a| 1.0 - a.norm_sqr()).sum();
    let chi = phase_violation(&single);
    let w = &cfg.weights;
    let infidelity = if w.infidelity > 0.0 {
        let dual = ground_amplitudes(&continue_pulse(&scenario, 1, &first)?);
        1.0 - optimize_local_phases(&dual).fidelity
    } else {
        0.0
    };
    let population = w.population * leak.max(0.0);
    let phase = w.phase * chi * chi;
    let infidelity = w.infidelity * infidelity.max(0.0);
    Ok(ObjectiveTerms {
        population,
        phase,
        infidelity,
        total: population + phase + infidelity,
    })
}

/// Scalar objective; simulation failures map to [`FAILURE_PENALTY`].
pub fn objective(params: &[f64], cfg: &OptimizerConfig, physics: &PhysicsParams) -> f64 {
    cfg.waveform(params)
        .and_then(|w| objective_terms(&w, cfg, physics))
        .map(|t| {
            if t.total.is_finite() {
                t.total
            } else {
                FAILURE_PENALTY
            }
        })
        .unwrap_or(FAILURE_PENALTY)
}

/// Smooth single-lobe starting point: `β_ν ∝ sin²(πν/n)` with a peak Rabi
/// frequency of 2π×10 MHz and Δ0 = −2π×2 MHz.
pub fn adiabatic_sketch(cfg: &OptimizerConfig) -> Result<Vec<f64>> {
    if !cfg.symmetric {
        return invalid("adiabatic sketch is defined for symmetric waveforms");
    }
    let n = cfg.degree;
    let shape: Vec<f64> = (1..n)
        .map(|nu| (PI * nu as f64 / n as f64).sin().powi(2))
        .collect();
    let unit = PulseWaveform::new(n, shape.clone(), 0.0, cfg.duration)?;
    let peak = unit.peak_omega(2001);
    let scale = 10.0 / peak;
    let mut p: Vec<f64> = shape[..cfg.free_coefficients()]
        .iter()
        .map(|s| s * scale)
        .collect();
    p.push(-2.0);
    Ok(p)
}

fn initial_point(cfg: &OptimizerConfig) -> Result<Vec<f64>> {
    let mut p = match cfg.initial {
        InitialGuess::PaperSeed => {
            if cfg.degree != 8 {
                return invalid("the paper seed has degree 8");
            }
            let mut p = PAPER_COEFFICIENTS_MHZ[..cfg.free_coefficients()].to_vec();
            p.push(PAPER_DETUNING_MHZ);
            p
        }
        InitialGuess::AdiabaticSketch => adiabatic_sketch(cfg)?,
        InitialGuess::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p: Vec<f64> = (0..cfg.free_coefficients())
                .map(|_| rng.gen_range(0.0..12.0))
                .collect();
            p.push(rng.gen_range(-5.0..-0.5));
            p
        }
    };
    cfg.clamp(&mut p);
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TargetReached,
    MaxEvals,
    SimplexCollapsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub eval: usize,
    pub objective: f64,
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub best_waveform: PulseWaveform,
    pub best_params: Vec<f64>,
    pub best_objective: f64,
    pub evals: usize,
    pub trace: Vec<TraceEntry>,
    pub termination: Termination,
}

/// JSON export of an [`OptimizationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub best_waveform: WaveformDoc,
    /// Search coordinates in 2π×MHz.
    pub best_params: Vec<f64>,
    pub best_objective: f64,
    pub evals: usize,
    pub termination: Termination,
    pub trace: Vec<TraceEntry>,
}

impl OptimizationReport {
    pub fn to_doc(&self) -> ReportDoc {
        ReportDoc {
            best_waveform: self.best_waveform.to_doc(UNITS),
            best_params: self.best_params.clone(),
            best_objective: self.best_objective,
            evals: self.evals,
            termination: self.termination,
            trace: self.trace.clone(),
        }
    }
}

struct Search<'a> {
    cfg: &'a OptimizerConfig,
    physics: &'a PhysicsParams,
    trace: Vec<TraceEntry>,
    best: (Vec<f64>, f64),
}

impl Search<'_> {
    fn budget(&self) -> usize {
        self.cfg.max_evals - self.trace.len()
    }

    fn done(&self) -> Option<Termination> {
        if self.best.1 <= self.cfg.target_error {
            Some(Termination::TargetReached)
        } else if self.trace.len() >= self.cfg.max_evals {
            Some(Termination::MaxEvals)
        } else {
            None
        }
    }

    /// Evaluates points (in parallel) and records them in order.
    fn eval_many(&mut self, points: Vec<Vec<f64>>) -> Vec<(Vec<f64>, f64)> {
        let take = points.len().min(self.budget());
        let mut points = points;
        points.truncate(take);
        let values: Vec<f64> = points
            .par_iter()
            .map(|p| objective(p, self.cfg, self.physics))
            .collect();
        points
            .into_iter()
            .zip(values)
            .map(|(p, f)| {
                self.record(&p, f);
                (p, f)
            })
            .collect()
    }

    fn eval(&mut self, mut p: Vec<f64>) -> Option<(Vec<f64>, f64)> {
        self.cfg.clamp(&mut p);
        self.eval_many(vec![p]).pop()
    }

    fn record(&mut self, p: &[f64], f: f64) {
        if f < self.best.1 {
            self.best = (p.to_vec(), f);
        }
        self.trace.push(TraceEntry {
            eval: self.trace.len(),
            objective: f,
            best: self.best.1,
        });
    }

    /// One Nelder–Mead run from `x0` with per-axis steps `steps`.
    fn nelder_mead(&mut self, x0: &[f64], f0: Option<f64>, steps: &[f64]) -> Option<Termination> {
        let n = x0.len();
        let mut vertices = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] += steps[i];
            self.cfg.clamp(&mut v);
            if v[i] == x0[i] {
                v[i] -= steps[i];
                self.cfg.clamp(&mut v);
            }
            vertices.push(v);
        }
        let mut simplex: Vec<(Vec<f64>, f64)> = match f0 {
            Some(f) => vec![(x0.to_vec(), f)],
            None => self.eval_many(vec![x0.to_vec()]),
        };
        simplex.extend(self.eval_many(vertices));
        if let Some(t) = self.done() {
            return Some(t);
        }

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread_f = simplex[n].1 - simplex[0].1;
            let spread_x = simplex[1..]
                .iter()
                .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread_f <= self.cfg.f_tol && spread_x <= self.cfg.x_tol {
                return None;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|k| simplex[..n].iter().map(|(v, _)| v[k]).sum::<f64>() / n as f64)
                .collect();
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let refl = self.eval(along(1.0))?;
            if let Some(t) = self.done() {
                return Some(t);
            }
            if refl.1 < simplex[0].1 {
                let exp = self.eval(along(2.0))?;
                simplex[n] = if exp.1 < refl.1 { exp } else { refl };
            } else if refl.1 < simplex[n - 1].1 {
                simplex[n] = refl;
            } else {
                let contracted = if refl.1 < worst.1 {
                    self.eval(along(0.5))?
                } else {
                    self.eval(along(-0.5))?
                };
                if contracted.1 < refl.1.min(worst.1) {
                    simplex[n] = contracted;
                } else {
                    let best = simplex[0].0.clone();
                    let shrunk: Vec<Vec<f64>> = simplex[1..]
                        .iter()
                        .map(|(v, _)| best.iter().zip(v).map(|(b, x)| b + 0.5 * (x - b)).collect())
                        .collect();
                    let evaluated = self.eval_many(shrunk);
                    if evaluated.len() < n {
                        return self.done();
                    }
                    simplex.truncate(1);
                    simplex.extend(evaluated);
                }
            }
            if let Some(t) = self.done() {
                return Some(t);
            }
        }
    }
}

/// Minimises [`objective`] from the configured starting point.
///
/// After each simplex collapse a new simplex is built around the incumbent
/// with the initial step sizes; the search stops when a restart brings no
/// improvement, the budget is exhausted or the target is met.
pub fn optimize_waveform(
    cfg: &OptimizerConfig,
    physics: &PhysicsParams,
) -> Result<OptimizationReport> {
    cfg.validate()?;
    physics.validate()?;
    let x0 = initial_point(cfg)?;
    let mut search = Search {
        cfg,
        physics,
        trace: Vec::new(),
        best: (x0.clone(), f64::INFINITY),
    };
    let f0 = search.eval_many(vec![x0.clone()])[0].1;
    let steps: Vec<f64> = x0
        .iter()
        .map(|x| if x.abs() > 0.5 { 0.1 * x.abs() } else { 0.5 })
        .collect();

    let mut termination = search.done();
    let mut start = (x0, f0);
    let mut restarts = 0;
    while termination.is_none() {
        termination = search.nelder_mead(&start.0, Some(start.1), &steps);
        if termination.is_some() {
            break;
        }
        let improved = search.best.1 < start.1;
        if !improved || restarts >= cfg.restarts {
            termination = Some(Termination::SimplexCollapsed);
            break;
        }
        restarts += 1;
        start = search.best.clone();
    }

    let (best_params, best_objective) = search.best.clone();
    Ok(OptimizationReport {
        best_waveform: cfg.waveform(&best_params)?,
        best_params,
        best_objective,
        evals: search.trace.len(),
        trace: search.trace,
        termination: termination.unwrap_or(Termination::MaxEvals),
    })
}

/// Dual-pulse gate error at rest for a waveform, without decay.
pub fn rest_error(
    waveform: &PulseWaveform,
    physics: &PhysicsParams,
    tol: Tolerances,
) -> Result<f64> {
    let mut s = GateScenario::new(waveform.clone(), physics.with_decay(0.0));
    s.tolerances = tol;
    crate::gate::gate_error(&s).map(|r| r.error)
}

/// Dual-pulse fidelity implied by single-pulse amplitudes when every channel
/// returns to its ground state, so the second pulse repeats the first.
pub fn ideal_return_fidelity(single: &[C64; 4]) -> f64 {
    let dual = single.map(|a| a * a);
    optimize_local_phases(&dual)
        .fidelity
        .max(fidelity_from_diag(&dual))
}
