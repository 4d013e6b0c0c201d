//! Channel Hamiltonians for the four computational-basis states.
//!
//! Each computational state evolves in its own small subspace: |11⟩ is
//! untouched, |01⟩ and |10⟩ are ground-Rydberg two-level systems and |00⟩
//! couples to |r0⟩, |0r'⟩, |rr'⟩ and the Förster partner |pp'⟩. A stated
//! Rabi frequency Ω appears as the off-diagonal element Ω/2.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{invalid, Result};

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Species {
    Rb,
    Cs,
    #[serde(rename = "custom")]
    Custom,
}

impl Species {
    /// Default mass in atomic mass units (⁸⁷Rb, ¹³³Cs).
    pub fn mass_u(self) -> Option<f64> {
        match self {
            Species::Rb => Some(86.909),
            Species::Cs => Some(132.905),
            Species::Custom => None,
        }
    }

    /// Default single-photon ground-Rydberg wavelength in nm.
    pub fn wavelength_nm(self) -> Option<f64> {
        match self {
            Species::Rb => Some(297.0),
            Species::Cs => Some(319.0),
            Species::Custom => None,
        }
    }
}

/// Atomic and interaction parameters shared by all channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    /// Förster coupling B between |rr'⟩ and |pp'⟩ (rad/s).
    pub forster_coupling: f64,
    /// Energy offset δ_p of |pp'⟩ (rad/s).
    pub forster_penalty: f64,
    /// Per-atom Rydberg decay rate γ (1/s).
    pub decay_rate: f64,
    /// Driving wavelength (m).
    pub wavelength: f64,
    /// Atom mass (kg).
    pub atom_mass: f64,
}

impl PhysicsParams {
    pub fn new(
        forster_coupling: f64,
        forster_penalty: f64,
        decay_rate: f64,
        wavelength: f64,
        atom_mass: f64,
    ) -> Result<Self> {
        let p = Self {
            forster_coupling,
            forster_penalty,
            decay_rate,
            wavelength,
            atom_mass,
        };
        p.validate()?;
        Ok(p)
    }

    /// B = 2π×500 MHz, δ_p = 2π×(−3) MHz, no decay, at the species defaults.
    pub fn for_species(species: Species) -> Self {
        let mass_u = species.mass_u().unwrap_or(86.909);
        let wavelength_nm = species.wavelength_nm().unwrap_or(297.0);
        Self {
            forster_coupling: TAU * 500e6,
            forster_penalty: TAU * -3e6,
            decay_rate: 0.0,
            wavelength: wavelength_nm * 1e-9,
            atom_mass: mass_u * ATOMIC_MASS_UNIT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.forster_coupling,
            self.forster_penalty,
            self.decay_rate,
            self.wavelength,
            self.atom_mass,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !all_finite {
            return invalid("physics parameters must be finite");
        }
        if self.forster_coupling < 0.0 {
            return invalid("Förster coupling must be non-negative");
        }
        if self.decay_rate < 0.0 {
            return invalid("decay rate must be non-negative");
        }
        if self.wavelength <= 0.0 || self.atom_mass <= 0.0 {
            return invalid("wavelength and atom mass must be positive");
        }
        Ok(())
    }

    /// Laser wave number 2π/λ (1/m).
    pub fn wave_number(&self) -> f64 {
        TAU / self.wavelength
    }

    pub fn with_decay(mut self, gamma: f64) -> Self {
        self.decay_rate = gamma;
        self
    }

    pub fn with_forster_coupling(mut self, b: f64) -> Self {
        self.forster_coupling = b;
        self
    }
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self::for_species(Species::Rb)
    }
}

/// Doppler shift k·v seen by an atom moving at `v` along the beam (rad/s).
pub fn doppler_shift(params: &PhysicsParams, v: f64) -> f64 {
    params.wave_number() * v
}

/// Which computational-basis state a [`ChannelSystem`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "00")]
    C00,
    #[serde(rename = "01")]
    C01,
    #[serde(rename = "10")]
    C10,
    #[serde(rename = "11")]
    C11,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::C00, Channel::C01, Channel::C10, Channel::C11];

    pub fn label(self) -> &'static str {
        match self {
            Channel::C00 => "00",
            Channel::C01 => "01",
            Channel::C10 => "10",
            Channel::C11 => "11",
        }
    }
}

/// Time-dependent Hamiltonian on a few-level subspace.
///
/// `H(t) = diag(diagonal) + Σ_drive scale·Ω(t)·(|i⟩⟨j| + |j⟩⟨i|)
///        + Σ_fixed g·(|i⟩⟨j| + |j⟩⟨i|)`.
/// Index 0 is always the computational ground state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSystem {
    pub labels: Vec<&'static str>,
    pub diagonal: Vec<C64>,
    /// `(row, col, scale)`: element equals `scale·Ω(t)`.
    pub drive: Vec<(usize, usize, f64)>,
    /// `(row, col, g)`: constant symmetric coupling.
    pub fixed: Vec<(usize, usize, f64)>,
}

impl ChannelSystem {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// Writes `-i·H(Ω)·ψ` into `out`.
    #[inline]
    pub fn rhs(&self, omega: f64, psi: &[C64], out: &mut [C64]) {
        for ((o, d), p) in out.iter_mut().zip(&self.diagonal).zip(psi) {
            *o = d * p;
        }
        for &(i, j, s) in &self.drive {
            let g = s * omega;
            out[i] += psi[j] * g;
            out[j] += psi[i] * g;
        }
        for &(i, j, g) in &self.fixed {
            out[i] += psi[j] * g;
            out[j] += psi[i] * g;
        }
        for o in out.iter_mut() {
            // multiply by -i
            *o = C64::new(o.im, -o.re);
        }
    }

    /// Dense Hamiltonian at drive amplitude `omega`, row-major.
    pub fn matrix(&self, omega: f64) -> Vec<Vec<C64>> {
        let n = self.dim();
        let mut h = vec![vec![C64::new(0.0, 0.0); n]; n];
        for (i, d) in self.diagonal.iter().enumerate() {
            h[i][i] = *d;
        }
        for &(i, j, s) in &self.drive {
            h[i][j] += s * omega;
            h[j][i] += s * omega;
        }
        for &(i, j, g) in &self.fixed {
            h[i][j] += g;
            h[j][i] += g;
        }
        h
    }

    /// `H → −H`, used to run evolution backwards in time.
    pub fn negated(&self) -> Self {
        Self {
            labels: self.labels.clone(),
            diagonal: self.diagonal.iter().map(|d| -d).collect(),
            drive: self.drive.iter().map(|&(i, j, s)| (i, j, -s)).collect(),
            fixed: self.fixed.iter().map(|&(i, j, g)| (i, j, -g)).collect(),
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.diagonal.iter().all(|d| d.im == 0.0)
    }

    /// Unit amplitude on the computational ground state.
    pub fn ground_state(&self) -> Vec<C64> {
        let mut psi = vec![C64::new(0.0, 0.0); self.dim()];
        psi[0] = C64::new(1.0, 0.0);
        psi
    }
}

fn check_sign(k_sign: i8) -> Result<f64> {
    match k_sign {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        other => invalid(format!("k_sign must be +1 or -1, got {other}")),
    }
}

/// Two-level ground-Rydberg channel (|01⟩ or |10⟩) for an atom moving at `v`.
pub fn build_single_channel(
    params: &PhysicsParams,
    delta0: f64,
    v: f64,
    k_sign: i8,
) -> Result<ChannelSystem> {
    let s = check_sign(k_sign)?;
    let half_gamma = 0.5 * params.decay_rate;
    Ok(ChannelSystem {
        labels: vec!["g", "r"],
        diagonal: vec![
            C64::new(0.0, 0.0),
            C64::new(delta0 + s * doppler_shift(params, v), -half_gamma),
        ],
        drive: vec![(0, 1, 0.5)],
        fixed: vec![],
    })
}

/// Five-level |00⟩ channel on (|00⟩, |r0⟩, |0r'⟩, |rr'⟩, |pp'⟩).
pub fn build_double_channel(
    params: &PhysicsParams,
    delta0: f64,
    v_control: f64,
    v_target: f64,
    k_sign: i8,
) -> Result<ChannelSystem> {
    let s = check_sign(k_sign)?;
    let g = params.decay_rate;
    let kc = s * doppler_shift(params, v_control);
    let kt = s * doppler_shift(params, v_target);
    let double = 2.0 * delta0 + kc + kt;
    Ok(ChannelSystem {
        labels: vec!["00", "r0", "0r'", "rr'", "pp'"],
        diagonal: vec![
            C64::new(0.0, 0.0),
            C64::new(delta0 + kc, -0.5 * g),
            C64::new(delta0 + kt, -0.5 * g),
            C64::new(double, -g),
            C64::new(double + params.forster_penalty, -g),
        ],
        drive: vec![(0, 1, 0.5), (0, 2, 0.5), (1, 3, 0.5), (2, 3, 0.5)],
        fixed: vec![(3, 4, params.forster_coupling)],
    })
}

/// |11⟩ does not couple to the light.
pub fn build_channel_11() -> ChannelSystem {
    ChannelSystem {
        labels: vec!["11"],
        diagonal: vec![C64::new(0.0, 0.0)],
        drive: vec![],
        fixed: vec![],
    }
}

/// Channel system for `channel`, with the channel-specific velocities
/// picked out: |01⟩ follows the control atom, |10⟩ the target atom.
pub fn build_channel(
    channel: Channel,
    params: &PhysicsParams,
    delta0: f64,
    v_control: f64,
    v_target: f64,
    k_sign: i8,
) -> Result<ChannelSystem> {
    let mut sys = match channel {
        Channel::C00 => build_double_channel(params, delta0, v_control, v_target, k_sign)?,
        Channel::C01 => build_single_channel(params, delta0, v_control, k_sign)?,
        Channel::C10 => build_single_channel(params, delta0, v_target, k_sign)?,
        Channel::C11 => build_channel_11(),
    };
    match channel {
        Channel::C01 => sys.labels = vec!["01", "r1"],
        Channel::C10 => sys.labels = vec!["10", "1r'"],
        _ => {}
    }
    Ok(sys)
}
