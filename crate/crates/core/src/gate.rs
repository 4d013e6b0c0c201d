//! Dual-pulse controlled-PHASE gate: channel composition, local phase
//! correction and fidelity.
//!
//! The four computational channels never mix, so the gate is fully described
//! by its diagonal `(U00, U01, U10, U11)`; leakage shows up as `|U_ij| < 1`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::physics::{build_channel, Channel, ChannelSystem, PhysicsParams};
use crate::propagator::{evolve, StateVector, Tolerances};
use crate::waveform::{ConstantEnvelope, PulseWaveform, UnitsMode, WaveformDoc};

/// Direction of the second pulse relative to the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    CoPropagating,
    CounterPropagating,
}

impl Propagation {
    /// Wave-vector sign of the second pulse; the first is always +1.
    pub fn second_pulse_sign(self) -> i8 {
        match self {
            Propagation::CoPropagating => 1,
            Propagation::CounterPropagating => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateScenario {
    pub waveform: PulseWaveform,
    pub physics: PhysicsParams,
    /// Axial velocity of the control atom (m/s).
    pub v_control: f64,
    /// Axial velocity of the target atom (m/s).
    pub v_target: f64,
    pub propagation: Propagation,
    /// Drive-free interval between the pulses (s).
    pub gap_time: f64,
    pub tolerances: Tolerances,
}

impl GateScenario {
    /// Atoms at rest, counter-propagating pulses, no gap.
    pub fn new(waveform: PulseWaveform, physics: PhysicsParams) -> Self {
        Self {
            waveform,
            physics,
            v_control: 0.0,
            v_target: 0.0,
            propagation: Propagation::CounterPropagating,
            gap_time: 0.0,
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_velocities(mut self, v_control: f64, v_target: f64) -> Self {
        self.v_control = v_control;
        self.v_target = v_target;
        self
    }

    pub fn with_propagation(mut self, propagation: Propagation) -> Self {
        self.propagation = propagation;
        self
    }

    pub fn system(&self, channel: Channel, k_sign: i8) -> Result<ChannelSystem> {
        build_channel(
            channel,
            &self.physics,
            self.waveform.detuning(),
            self.v_control,
            self.v_target,
            k_sign,
        )
    }
}

/// Final state vectors of the four channels.
pub type ChannelStates = [StateVector; 4];

fn ground_states(scenario: &GateScenario) -> Result<ChannelStates> {
    let mk = |c| scenario.system(c, 1).map(|s| StateVector(s.ground_state()));
    Ok([
        mk(Channel::C00)?,
        mk(Channel::C01)?,
        mk(Channel::C10)?,
        mk(Channel::C11)?,
    ])
}

fn run_channels(
    scenario: &GateScenario,
    k_sign: i8,
    start: &ChannelStates,
    window: Option<f64>,
) -> Result<ChannelStates> {
    let mut out = start.clone();
    for (idx, channel) in Channel::ALL.into_iter().enumerate() {
        if channel == Channel::C11 {
            continue;
        }
        let sys = scenario.system(channel, k_sign)?;
        let result = match window {
            None => evolve(&sys, &scenario.waveform, &start[idx], &scenario.tolerances),
            Some(gap) => {
                let idle = ConstantEnvelope {
                    omega: 0.0,
                    duration: gap,
                };
                evolve(&sys, &idle, &start[idx], &scenario.tolerances)
            }
        };
        out[idx] = result.map_err(|e| Error::Channel {
            channel: channel.label(),
            source: Box::new(e),
        })?;
    }
    Ok(out)
}

/// One pulse from the channel ground states with wave-vector sign `k_sign`.
pub fn simulate_pulse_states(scenario: &GateScenario, k_sign: i8) -> Result<ChannelStates> {
    run_channels(scenario, k_sign, &ground_states(scenario)?, None)
}

/// One pulse starting from arbitrary channel states.
pub fn continue_pulse(
    scenario: &GateScenario,
    k_sign: i8,
    start: &ChannelStates,
) -> Result<ChannelStates> {
    run_channels(scenario, k_sign, start, None)
}

/// Ground amplitudes `(00, 01, 10, 11)` after a single pulse.
pub fn simulate_pulse(scenario: &GateScenario, k_sign: i8) -> Result<[C64; 4]> {
    Ok(ground_amplitudes(&simulate_pulse_states(scenario, k_sign)?))
}

pub fn ground_amplitudes(states: &ChannelStates) -> [C64; 4] {
    [states[0][0], states[1][0], states[2][0], states[3][0]]
}

/// Both pulses with the full channel states carried across the gap.
///
/// During the gap the residual excited amplitudes evolve under the
/// first pulse's drive-free Hamiltonian.
pub fn compose_dual_pulse_states(scenario: &GateScenario) -> Result<ChannelStates> {
    let mut states = simulate_pulse_states(scenario, 1)?;
    if scenario.gap_time > 0.0 {
        states = run_channels(scenario, 1, &states, Some(scenario.gap_time))?;
    }
    run_channels(
        scenario,
        scenario.propagation.second_pulse_sign(),
        &states,
        None,
    )
}

/// Ground amplitudes `(00, 01, 10, 11)` after the pulse pair.
pub fn compose_dual_pulse(scenario: &GateScenario) -> Result<[C64; 4]> {
    Ok(ground_amplitudes(&compose_dual_pulse_states(scenario)?))
}

/// `F = (Tr(M M†) + |Tr M|²) / 20` with `M = U_CZ† U`, `U_CZ = diag(1,1,1,−1)`.
pub fn fidelity_from_diag(diag: &[C64; 4]) -> f64 {
    let m = [diag[0], diag[1], diag[2], -diag[3]];
    let tr_mm: f64 = m.iter().map(|x| x.norm_sqr()).sum();
    let tr: C64 = m.iter().sum();
    (tr_mm + tr.norm_sqr()) / 20.0
}

/// `diag(1, e^{iθt}, e^{iθc}, e^{i(θc+θt)})` applied to `diag`.
pub fn apply_local_phases(diag: &[C64; 4], theta_c: f64, theta_t: f64) -> [C64; 4] {
    [
        diag[0],
        diag[1] * C64::from_polar(1.0, theta_t),
        diag[2] * C64::from_polar(1.0, theta_c),
        diag[3] * C64::from_polar(1.0, theta_c + theta_t),
    ]
}

/// Fidelity with a fixed local rotation, best over the two sign conventions.
pub fn fidelity_with_angles(diag: &[C64; 4], theta_c: f64, theta_t: f64) -> f64 {
    let r = apply_local_phases(diag, theta_c, theta_t);
    let flipped = [-r[0], r[1], r[2], -r[3]];
    fidelity_from_diag(&r).max(fidelity_from_diag(&flipped))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPhases {
    pub theta_c: f64,
    pub theta_t: f64,
    pub fidelity: f64,
}

fn wrap_angle(x: f64) -> f64 {
    let y = x - TAU * (x / TAU).round();
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

/// Local single-qubit phase rotations maximising the fidelity.
///
/// `Tr(MM†)` does not depend on the angles, so only `|Tr M|` is maximised.
/// With `Tr M = a + b e^{iθt} + c e^{iθc} + d e^{i(θc+θt)}` the optimal θt
/// for fixed θc is closed-form, which leaves a one-dimensional search over
/// θc: a coarse grid plus the analytic phase-zeroing seed, each refined by
/// golden-section search. Both `diag(1,1,1,−1)` and `diag(−1,1,1,1)` targets
/// are tried.
pub fn optimize_local_phases(diag: &[C64; 4]) -> LocalPhases {
    let mut best = LocalPhases {
        theta_c: 0.0,
        theta_t: 0.0,
        fidelity: fidelity_from_diag(diag),
    };
    for target in [[1.0, 1.0, 1.0, -1.0], [-1.0, 1.0, 1.0, 1.0]] {
        let a = diag[0] * target[0];
        let b = diag[1] * target[1];
        let c = diag[2] * target[2];
        let d = diag[3] * target[3];
        let reduced = |tc: f64| {
            let e = C64::from_polar(1.0, tc);
            (a + c * e).norm() + (b + d * e).norm()
        };
        let theta_t_for = |tc: f64| {
            let e = C64::from_polar(1.0, tc);
            let p = a + c * e;
            let q = b + d * e;
            if q.norm() == 0.0 || p.norm() == 0.0 {
                0.0
            } else {
                p.arg() - q.arg()
            }
        };

        const GRID: usize = 64;
        let spacing = TAU / GRID as f64;
        let mut seeds: Vec<f64> = (0..GRID).map(|i| -PI + spacing * i as f64).collect();
        if a.norm() > 0.0 && c.norm() > 0.0 {
            seeds.push(a.arg() - c.arg());
        }
        let mut starts: Vec<(f64, f64)> = seeds.iter().map(|&s| (reduced(s), s)).collect();
        starts.sort_by(|x, y| y.0.total_cmp(&x.0));
        starts.truncate(4);

        for &(_, s) in &starts {
            let tc = golden_max(&reduced, s - spacing, s + spacing);
            let tt = theta_t_for(tc);
            let (tc, tt) = (wrap_angle(tc), wrap_angle(tt));
            let f = fidelity_from_diag(&{
                let r = apply_local_phases(diag, tc, tt);
                [r[0] * target[0], r[1], r[2], r[3] * target[3] * -1.0]
            });
            if f > best.fidelity {
                best = LocalPhases {
                    theta_c: tc,
                    theta_t: tt,
                    fidelity: f,
                };
            }
        }
    }
    best
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > 1e-10 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    /// `(U00, U01, U10, U11)` before the local rotation.
    pub diag: [C64; 4],
    /// `arg U_ij` for `(00, 01, 10, 11)`.
    pub phases: [f64; 4],
    pub theta_c: f64,
    pub theta_t: f64,
    pub fidelity: f64,
    pub error: f64,
}

impl GateResult {
    pub fn from_diag(diag: [C64; 4]) -> Self {
        let local = optimize_local_phases(&diag);
        Self {
            diag,
            phases: diag.map(|u| u.arg()),
            theta_c: local.theta_c,
            theta_t: local.theta_t,
            fidelity: local.fidelity,
            error: 1.0 - local.fidelity,
        }
    }

    pub fn moduli(&self) -> [f64; 4] {
        self.diag.map(|u| u.norm())
    }
}

/// Dual-pulse gate error after the optimal local phase rotation.
pub fn gate_error(scenario: &GateScenario) -> Result<GateResult> {
    Ok(GateResult::from_diag(compose_dual_pulse(scenario)?))
}

/// Serializable summary of a gate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub moduli: [f64; 4],
    pub phases_rad: [f64; 4],
    pub theta_c: f64,
    pub theta_t: f64,
    pub fidelity: f64,
    pub error: f64,
    pub scenario: ScenarioEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEcho {
    pub waveform: WaveformDoc,
    pub physics: PhysicsParams,
    pub v_control: f64,
    pub v_target: f64,
    pub propagation: Propagation,
    pub gap_time: f64,
}

impl GateRecord {
    pub fn new(result: &GateResult, scenario: &GateScenario, units: UnitsMode) -> Self {
        Self {
            moduli: result.moduli(),
            phases_rad: result.phases,
            theta_c: result.theta_c,
            theta_t: result.theta_t,
            fidelity: result.fidelity,
            error: result.error,
            scenario: ScenarioEcho {
                waveform: scenario.waveform.to_doc(units),
                physics: scenario.physics,
                v_control: scenario.v_control,
                v_target: scenario.v_target,
                propagation: scenario.propagation,
                gap_time: scenario.gap_time,
            },
        }
    }
}
