//! Bernstein-polynomial amplitude envelopes with constant detuning.
//!
//! Frequencies are stored as angular frequencies (rad/s) and times in
//! seconds. The only place a "MHz" number is turned into rad/s is
//! [`UnitsMode::scale`], used by [`PulseWaveform::from_megahertz`] and the
//! JSON document reader.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{invalid, Error, Result};

pub const MAX_DEGREE: usize = 64;

/// Interpretation of a frequency quoted in "MHz".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitsMode {
    /// value × 10⁶ rad/s
    PlainMegahertz,
    /// value × 2π × 10⁶ rad/s
    TwoPiMegahertz,
}

impl UnitsMode {
    /// rad/s per quoted MHz unit.
    pub fn scale(self) -> f64 {
        match self {
            UnitsMode::PlainMegahertz => 1e6,
            UnitsMode::TwoPiMegahertz => TAU * 1e6,
        }
    }

    pub fn to_rad_per_s(self, mhz: f64) -> f64 {
        mhz * self.scale()
    }

    /// Inverse of [`to_rad_per_s`](Self::to_rad_per_s). When an exact
    /// preimage exists within a few ulps it is returned, so that values
    /// originating from a MHz document survive a write/read cycle unchanged.
    pub fn to_megahertz(self, rad_per_s: f64) -> f64 {
        exact_preimage(rad_per_s, self.scale())
    }
}

/// Finds `m` near `x / s` with `m * s == x`, preferring the shortest decimal
/// form; falls back to `x / s` when no such `m` exists nearby.
fn exact_preimage(x: f64, s: f64) -> f64 {
    let guess = x / s;
    if !guess.is_finite() {
        return guess;
    }
    let mut best: Option<(usize, f64)> = None;
    let mut consider = |m: f64| {
        if m * s == x {
            let len = format!("{m}").len();
            if best.is_none_or(|(l, _)| len < l) {
                best = Some((len, m));
            }
        }
    };
    consider(guess);
    let (mut up, mut down) = (guess, guess);
    for _ in 0..8 {
        up = next_after(up, f64::INFINITY);
        down = next_after(down, f64::NEG_INFINITY);
        consider(up);
        consider(down);
    }
    best.map_or(guess, |(_, m)| m)
}

fn next_after(x: f64, toward: f64) -> f64 {
    if x == toward || x.is_nan() {
        return x;
    }
    if x == 0.0 {
        let tiny = f64::from_bits(1);
        return if toward > 0.0 { tiny } else { -tiny };
    }
    let bits = x.to_bits();
    let away_from_zero = (toward > x) == (x > 0.0);
    f64::from_bits(if away_from_zero { bits + 1 } else { bits - 1 })
}

/// Time-dependent Rabi-frequency envelope on `[0, duration]`.
///
/// The propagator only needs these two methods, which lets tests substitute
/// constant or windowed envelopes for the Bernstein waveform.
pub trait Envelope: Sync {
    /// Rabi frequency at time `t` (rad/s).
    fn omega(&self, t: f64) -> f64;
    /// Length of the integration window (s).
    fn duration(&self) -> f64;
}

/// Binomial coefficient by multiplicative recurrence in floating point.
fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Bernstein basis polynomial `C(n,ν) x^ν (1-x)^(n-ν)`.
pub fn bernstein_basis(nu: usize, n: usize, x: f64) -> Result<f64> {
    if n > MAX_DEGREE {
        return invalid(format!("degree {n} exceeds maximum {MAX_DEGREE}"));
    }
    if nu > n {
        return invalid(format!("basis index {nu} outside 0..={n}"));
    }
    if !(0.0..=1.0).contains(&x) {
        return invalid(format!("basis argument {x} outside [0, 1]"));
    }
    Ok(basis_unchecked(nu, n, x))
}

fn basis_unchecked(nu: usize, n: usize, x: f64) -> f64 {
    binomial(n, nu) * x.powi(nu as i32) * (1.0 - x).powi((n - nu) as i32)
}

/// Amplitude-modulated pulse: `Ω(t) = Σ_{ν=1}^{n-1} β_ν b_{ν,n}(t/T)` with a
/// constant detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseWaveform {
    degree: usize,
    coefficients: Vec<f64>,
    binomials: Vec<f64>,
    detuning: f64,
    duration: f64,
}

impl PulseWaveform {
    /// Builds a waveform from angular-frequency coefficients `β_1..β_{n-1}`.
    pub fn new(
        degree: usize,
        coefficients: Vec<f64>,
        detuning: f64,
        duration: f64,
    ) -> Result<Self> {
        if !(2..=MAX_DEGREE).contains(&degree) {
            return invalid(format!("degree must lie in 2..={MAX_DEGREE}, got {degree}"));
        }
        if coefficients.len() != degree - 1 {
            return invalid(format!(
                "degree {degree} needs {} coefficients, got {}",
                degree - 1,
                coefficients.len()
            ));
        }
        if coefficients.iter().any(|c| !c.is_finite()) || !detuning.is_finite() {
            return invalid("waveform coefficients and detuning must be finite");
        }
        if !(duration.is_finite() && duration > 0.0) {
            return invalid(format!(
                "duration must be finite and positive, got {duration}"
            ));
        }
        let binomials = (1..degree).map(|nu| binomial(degree, nu)).collect();
        Ok(Self {
            degree,
            coefficients,
            binomials,
            detuning,
            duration,
        })
    }

    /// Builds a waveform from values quoted in MHz and a duration in μs.
    pub fn from_megahertz(
        degree: usize,
        coefficients_mhz: &[f64],
        detuning_mhz: f64,
        duration_us: f64,
        units: UnitsMode,
    ) -> Result<Self> {
        let coefficients = coefficients_mhz
            .iter()
            .map(|&c| units.to_rad_per_s(c))
            .collect();
        Self::new(
            degree,
            coefficients,
            units.to_rad_per_s(detuning_mhz),
            duration_us * 1e-6,
        )
    }

    /// The published symmetric n = 8 coefficient set with T = 1 μs.
    pub fn paper(units: UnitsMode) -> Self {
        Self::from_megahertz(8, &PAPER_COEFFICIENTS_MHZ, PAPER_DETUNING_MHZ, 1.0, units)
            .expect("published coefficients are valid")
    }

    /// A pulse with identically zero drive.
    pub fn zero(degree: usize, detuning: f64, duration: f64) -> Result<Self> {
        Self::new(
            degree,
            vec![0.0; degree.saturating_sub(1)],
            detuning,
            duration,
        )
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `β_1..β_{n-1}` in rad/s.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn detuning(&self) -> f64 {
        self.detuning
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Rabi frequency at `t ∈ [0, T]`.
    pub fn omega_at(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.duration).contains(&t) {
            return invalid(format!(
                "time {t:e} outside pulse window [0, {:e}]",
                self.duration
            ));
        }
        Ok(self.eval(t / self.duration))
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.degree as i32;
        let y = 1.0 - x;
        self.coefficients
            .iter()
            .zip(&self.binomials)
            .enumerate()
            .map(|(i, (&beta, &c))| {
                let nu = i as i32 + 1;
                beta * c * x.powi(nu) * y.powi(n - nu)
            })
            .sum()
    }

    /// True iff `|β_ν − β_{n−ν}| ≤ tol · max|β|` for every ν.
    pub fn is_time_symmetric(&self, tol: f64) -> bool {
        let scale = self
            .coefficients
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.abs()));
        let b = &self.coefficients;
        let m = b.len();
        (0..m).all(|i| (b[i] - b[m - 1 - i]).abs() <= tol * scale)
    }

    /// Peak |Ω| over a uniform grid, useful for reporting.
    pub fn peak_omega(&self, samples: usize) -> f64 {
        let samples = samples.max(2);
        (0..samples)
            .map(|i| self.eval(i as f64 / (samples - 1) as f64).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_doc(&self, units: UnitsMode) -> WaveformDoc {
        WaveformDoc {
            degree: self.degree,
            coefficients_mhz: self
                .coefficients
                .iter()
                .map(|&c| units.to_megahertz(c))
                .collect(),
            detuning_mhz: units.to_megahertz(self.detuning),
            duration_us: micro_from_seconds(self.duration),
            units_mode: units,
        }
    }
}

fn micro_from_seconds(t: f64) -> f64 {
    exact_preimage(t, 1e-6)
}

impl Envelope for PulseWaveform {
    fn omega(&self, t: f64) -> f64 {
        self.eval((t / self.duration).clamp(0.0, 1.0))
    }

    fn duration(&self) -> f64 {
        self.duration
    }
}

pub const PAPER_COEFFICIENTS_MHZ: [f64; 7] = [0.794, 0.0, 5.841, 9.725, 5.841, 0.0, 0.794];
pub const PAPER_DETUNING_MHZ: f64 = -2.360;

/// Serialized waveform. Field names are part of the configuration schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformDoc {
    pub degree: usize,
    #[serde(rename = "coefficients_MHz")]
    pub coefficients_mhz: Vec<f64>,
    #[serde(rename = "detuning_MHz")]
    pub detuning_mhz: f64,
    pub duration_us: f64,
    pub units_mode: UnitsMode,
}

impl WaveformDoc {
    pub fn to_waveform(&self) -> Result<PulseWaveform> {
        PulseWaveform::from_megahertz(
            self.degree,
            &self.coefficients_mhz,
            self.detuning_mhz,
            self.duration_us,
            self.units_mode,
        )
    }
}

impl TryFrom<&WaveformDoc> for PulseWaveform {
    type Error = Error;

    fn try_from(doc: &WaveformDoc) -> Result<Self> {
        doc.to_waveform()
    }
}

/// Constant-amplitude envelope, mainly for analytic checks.
#[derive(Debug, Clone, Copy)]
pub struct ConstantEnvelope {
    pub omega: f64,
    pub duration: f64,
}

impl Envelope for ConstantEnvelope {
    fn omega(&self, _t: f64) -> f64 {
        self.omega
    }

    fn duration(&self) -> f64 {
        self.duration
    }
}

/// The sub-window `[start, start + duration]` of another envelope, re-based
/// to start at zero.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a, E: ?Sized> {
    pub inner: &'a E,
    pub start: f64,
    pub duration: f64,
}

impl<E: Envelope + ?Sized> Envelope for Window<'_, E> {
    fn omega(&self, t: f64) -> f64 {
        self.inner.omega(self.start + t)
    }

    fn duration(&self) -> f64 {
        self.duration
    }
}

/// Time-reversed envelope: `Ω'(t) = Ω(T − t)`.
#[derive(Debug, Clone, Copy)]
pub struct Reversed<'a, E: ?Sized>(pub &'a E);

impl<E: Envelope + ?Sized> Envelope for Reversed<'_, E> {
    fn omega(&self, t: f64) -> f64 {
        let d = self.0.duration();
        self.0.omega((d - t).max(0.0))
    }

    fn duration(&self) -> f64 {
        self.0.duration()
    }
}
