//! Velocity, temperature, decay-rate and blockade sweeps.
//!
//! Monte-Carlo sample `j` of scan point `i` draws from its own ChaCha stream
//! `(i << 32) | j`, so tables do not depend on evaluation order or on the
//! number of worker threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gate::{gate_error, GateScenario};
use crate::physics::BOLTZMANN;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub x: f64,
    pub mean_error: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub fit: Option<LinearFit>,
}

impl ScanTable {
    fn from_rows(mut rows: Vec<ScanRow>, with_fit: bool) -> Result<Self> {
        rows.sort_by(|a, b| a.x.total_cmp(&b.x));
        let fit = if with_fit {
            let xs: Vec<f64> = rows.iter().map(|r| r.x).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.mean_error).collect();
            Some(linear_fit(&xs, &ys)?)
        } else {
            None
        };
        Ok(Self { rows, fit })
    }

    pub fn xs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.x).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_error).collect()
    }

    /// CSV with header `x,mean_error,stderr,n` and, when a fit is present,
    /// a trailing `# fit:` comment line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,mean_error,stderr,n\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:e},{:e},{:e},{}\n",
                r.x, r.mean_error, r.std_error, r.n_samples
            ));
        }
        if let Some(f) = &self.fit {
            s.push_str(&format!(
                "# fit: slope={:e}, intercept={:e}, r2={}\n",
                f.slope, f.intercept, f.r_squared
            ));
        }
        s
    }
}

/// Seed plus stream selector for a ChaCha8 generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    /// Stream for sample `sample` of scan point `point`.
    pub fn for_sample(self, point: usize, sample: usize) -> Self {
        Self {
            seed: self.seed,
            stream_id: ((point as u64) << 32) | sample as u64,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// One-dimensional Maxwell–Boltzmann velocity component, σ = √(k_B T / m).
pub fn sample_axial_velocity<R: Rng + ?Sized>(
    temperature: f64,
    mass: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return invalid(format!(
            "temperature must be non-negative, got {temperature}"
        ));
    }
    if mass.is_nan() || mass <= 0.0 {
        return invalid("mass must be positive");
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let sigma = (BOLTZMANN * temperature / mass).sqrt();
    let z: f64 = rng.sample(StandardNormal);
    Ok(sigma * z)
}

/// Mean and standard error of the mean, computed relative to the first
/// sample so identical inputs give exactly zero spread.
fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let x0 = xs[0];
    let mean = x0 + xs.iter().map(|x| x - x0).sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Ordinary least squares with `R² = 1 − SS_res/SS_tot`; a constant series
/// that is fit exactly reports `R² = 1`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("linear fit needs at least two (x, y) pairs");
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityMode {
    /// Both atoms move with the scanned velocity.
    BothAtoms,
    /// Only the control atom moves.
    ControlOnly,
}

/// Deterministic gate error per velocity (m/s).
pub fn scan_velocity(
    base: &GateScenario,
    velocities: &[f64],
    mode: VelocityMode,
) -> Result<ScanTable> {
    let rows = velocities
        .par_iter()
        .map(|&v| {
            let (vc, vt) = match mode {
                VelocityMode::BothAtoms => (v, v),
                VelocityMode::ControlOnly => (v, 0.0),
            };
            let r = gate_error(&base.clone().with_velocities(vc, vt))?;
            Ok(ScanRow {
                x: v,
                mean_error: r.error,
                std_error: 0.0,
                n_samples: 1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ScanTable::from_rows(rows, false)
}

/// Thermal Monte-Carlo over independent control/target velocities at each
/// point. `configure(i)` adapts the base scenario for point `i`.
fn monte_carlo<F>(
    base: &GateScenario,
    xs: &[f64],
    temperature_of: impl Fn(usize) -> f64 + Sync,
    configure: F,
    n_samples: usize,
    rng: RngSpec,
) -> Result<Vec<ScanRow>>
where
    F: Fn(usize) -> GateScenario + Sync,
{
    if n_samples < 2 {
        return invalid("Monte-Carlo scans need at least two samples per point");
    }
    let mass = base.physics.atom_mass;
    let jobs: Vec<(usize, usize)> = (0..xs.len())
        .flat_map(|i| {
            // A zero temperature has a single deterministic sample.
            let count = if temperature_of(i) == 0.0 {
                1
            } else {
                n_samples
            };
            (0..count).map(move |j| (i, j))
        })
        .collect();
    let errors = jobs
        .par_iter()
        .map(|&(i, j)| {
            let t = temperature_of(i);
            let mut r = rng.for_sample(i, j).rng();
            let vc = sample_axial_velocity(t, mass, &mut r)?;
            let vt = sample_axial_velocity(t, mass, &mut r)?;
            gate_error(&configure(i).with_velocities(vc, vt)).map(|g| g.error)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut rows = Vec::with_capacity(xs.len());
    let mut offset = 0;
    for (i, &x) in xs.iter().enumerate() {
        let count = if temperature_of(i) == 0.0 {
            1
        } else {
            n_samples
        };
        let chunk = &errors[offset..offset + count];
        offset += count;
        let (mean, se) = mean_and_stderr(chunk);
        rows.push(ScanRow {
            x,
            mean_error: mean,
            std_error: se,
            n_samples,
        });
    }
    Ok(rows)
}

/// Mean gate error versus temperature (K), with a linear fit.
pub fn scan_temperature(
    base: &GateScenario,
    temperatures: &[f64],
    n_samples: usize,
    rng: RngSpec,
) -> Result<ScanTable> {
    if let Some(t) = temperatures.iter().find(|t| t.is_nan() || **t < 0.0) {
        return invalid(format!("temperature must be non-negative, got {t}"));
    }
    let rows = monte_carlo(
        base,
        temperatures,
        |i| temperatures[i],
        |_| base.clone(),
        n_samples,
        rng,
    )?;
    ScanTable::from_rows(rows, temperatures.len() >= 2)
}

/// Mean gate error versus Rydberg decay rate (1/s) at fixed temperature.
pub fn scan_decay(
    base: &GateScenario,
    gammas: &[f64],
    temperature: f64,
    n_samples: usize,
    rng: RngSpec,
) -> Result<ScanTable> {
    if let Some(g) = gammas.iter().find(|g| g.is_nan() || **g < 0.0) {
        return invalid(format!("decay rate must be non-negative, got {g}"));
    }
    if temperature.is_nan() || temperature < 0.0 {
        return invalid(format!(
            "temperature must be non-negative, got {temperature}"
        ));
    }
    let rows = monte_carlo(
        base,
        gammas,
        |_| temperature,
        |i| {
            let mut s = base.clone();
            s.physics = s.physics.with_decay(gammas[i]);
            s
        },
        n_samples,
        rng,
    )?;
    ScanTable::from_rows(rows, gammas.len() >= 2)
}

/// Gate error at rest and without decay for each Förster coupling (rad/s).
pub fn scan_blockade(base: &GateScenario, couplings: &[f64]) -> Result<ScanTable> {
    if let Some(b) = couplings.iter().find(|b| b.is_nan() || **b <= 0.0) {
        return invalid(format!("blockade coupling must be positive, got {b}"));
    }
    let rows = couplings
        .par_iter()
        .map(|&b| {
            let mut s = base.clone().with_velocities(0.0, 0.0);
            s.physics = s.physics.with_decay(0.0).with_forster_coupling(b);
            let r = gate_error(&s)?;
            Ok(ScanRow {
                x: b,
                mean_error: r.error,
                std_error: 0.0,
                n_samples: 1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ScanTable::from_rows(rows, false)
}
