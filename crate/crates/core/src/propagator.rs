//! Time-dependent Schrödinger propagation, `i dψ/dt = H(t) ψ`.
//!
//! The production path is an embedded Dormand–Prince 5(4) pair with
//! step-size control and its fourth-order continuous extension for
//! trajectory sampling. [`oracle_evolve`] is a plain fixed-step RK4 kept as an
//! independent cross-check.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use crate::error::{invalid, Error, Result};
use crate::physics::ChannelSystem;
use crate::waveform::Envelope;

/// Complex amplitudes in the basis of a [`ChannelSystem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<C64>);

impl StateVector {
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn ground(&self) -> C64 {
        self.0[0]
    }
}

impl Deref for StateVector {
    type Target = [C64];

    fn deref(&self) -> &[C64] {
        &self.0
    }
}

impl DerefMut for StateVector {
    fn deref_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }
}

impl From<Vec<C64>> for StateVector {
    fn from(v: Vec<C64>) -> Self {
        Self(v)
    }
}

/// Local error control for [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step in seconds; `None` means one hundredth of the window.
    #[serde(default)]
    pub max_step: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: None,
        }
    }
}

impl Tolerances {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            max_step: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.rel_tol.is_finite()
            && self.abs_tol.is_finite()
            && self.max_step.is_none_or(|h| h > 0.0 && h.is_finite());
        if ok {
            Ok(())
        } else {
            invalid("tolerances must be positive and finite")
        }
    }
}

const MAX_STEPS: usize = 50_000_000;

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Coefficients of the dense-output polynomial over one accepted step.
struct DenseStep<'a> {
    t0: f64,
    h: f64,
    y0: &'a [C64],
    r: &'a [[C64; 4]],
}

impl DenseStep<'_> {
    fn eval(&self, t: f64, out: &mut [C64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        for ((o, y), r) in out.iter_mut().zip(self.y0).zip(self.r) {
            *o = y + (r[0] + (r[1] + (r[2] + r[3] * th1) * th) * th1) * th;
        }
    }
}

fn check_dim(system: &ChannelSystem, psi0: &[C64]) -> Result<()> {
    if psi0.len() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            got: psi0.len(),
        });
    }
    Ok(())
}

/// Adaptive integration over `[0, env.duration()]`. `on_step` receives every
/// accepted step's dense-output polynomial.
fn integrate<E, F>(
    system: &ChannelSystem,
    env: &E,
    psi0: &[C64],
    tol: &Tolerances,
    mut on_step: F,
) -> Result<Vec<C64>>
where
    E: Envelope + ?Sized,
    F: FnMut(&DenseStep<'_>),
{
    check_dim(system, psi0)?;
    tol.validate()?;
    let t_end = env.duration();
    if !(t_end.is_finite() && t_end >= 0.0) {
        return invalid("integration window must be finite and non-negative");
    }
    let n = system.dim();
    let mut y = psi0.to_vec();
    if t_end == 0.0 {
        return Ok(y);
    }
    let zero = C64::new(0.0, 0.0);
    let max_step = tol.max_step.unwrap_or(t_end / 100.0);

    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut dense = vec![[zero; 4]; n];

    let f = |t: f64, y: &[C64], out: &mut [C64]| system.rhs(env.omega(t), y, out);

    let mut t = 0.0;
    f(t, &y, &mut k1);

    // Initial step from the scale of the derivative.
    let dnorm = k1.iter().map(|k| k.norm_sqr()).sum::<f64>().sqrt();
    let ynorm = y
        .iter()
        .map(|k| k.norm_sqr())
        .sum::<f64>()
        .sqrt()
        .max(tol.abs_tol);
    let mut h = if dnorm > 0.0 {
        0.01 * ynorm / dnorm
    } else {
        max_step
    };
    h = h.min(max_step).min(t_end);
    let mut h_prev_rejected = false;
    let mut steps = 0usize;

    while t < t_end {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::StepUnderflow { time: t, step: h });
        }
        // Absorb a sliver left by rounding into the final step.
        let last = t + 1.01 * h >= t_end;
        if last {
            h = t_end - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(t_end) {
            return Err(Error::StepUnderflow { time: t, step: h });
        }

        for i in 0..n {
            stage[i] = y[i] + k1[i] * (h * A21);
        }
        f(t + C2 * h, &stage, &mut k2);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        f(t + C3 * h, &stage, &mut k3);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        f(t + C4 * h, &stage, &mut k4);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        f(t + C5 * h, &stage, &mut k5);
        for i in 0..n {
            stage[i] =
                y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        let t_next = if last { t_end } else { t + h };
        f(t_next, &stage, &mut k6);
        for i in 0..n {
            y_new[i] =
                y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        f(t_next, &y_new, &mut k7);

        let mut err_sq = 0.0;
        for i in 0..n {
            let e =
                (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = tol.abs_tol + tol.rel_tol * y[i].norm().max(y_new[i].norm());
            err_sq += e.norm_sqr() / (sc * sc);
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            for i in 0..n {
                let dy = y_new[i] - y[i];
                let bspl = k1[i] * h - dy;
                dense[i] = [
                    dy,
                    bspl,
                    dy - k7[i] * h - bspl,
                    (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7)
                        * h,
                ];
            }
            on_step(&DenseStep {
                t0: t,
                h,
                y0: &y,
                r: &dense,
            });
            t = t_next;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            let mut fac = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
            fac = fac.clamp(0.2, 5.0);
            if h_prev_rejected {
                fac = fac.min(1.0);
            }
            h_prev_rejected = false;
            h = (h * fac).min(max_step);
        } else {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            h_prev_rejected = true;
        }
    }
    Ok(y)
}

/// Propagates `psi0` through the full envelope window and returns the final
/// state.
pub fn evolve<E: Envelope + ?Sized>(
    system: &ChannelSystem,
    env: &E,
    psi0: &[C64],
    tol: &Tolerances,
) -> Result<StateVector> {
    integrate(system, env, psi0, tol, |_| {}).map(StateVector)
}

/// Dense output at `num_samples` equally spaced times including both ends.
/// The final sample is the integrator's own end state, identical to
/// [`evolve`].
pub fn evolve_trajectory<E: Envelope + ?Sized>(
    system: &ChannelSystem,
    env: &E,
    psi0: &[C64],
    tol: &Tolerances,
    num_samples: usize,
) -> Result<Vec<(f64, StateVector)>> {
    if num_samples < 2 {
        return invalid("trajectory needs at least two samples");
    }
    check_dim(system, psi0)?;
    let t_end = env.duration();
    let times: Vec<f64> = (0..num_samples)
        .map(|k| {
            if k == num_samples - 1 {
                t_end
            } else {
                t_end * k as f64 / (num_samples - 1) as f64
            }
        })
        .collect();
    let mut out = Vec::with_capacity(num_samples);
    out.push((0.0, StateVector(psi0.to_vec())));
    let mut next = 1;
    let mut buf = vec![C64::new(0.0, 0.0); system.dim()];
    let last = integrate(system, env, psi0, tol, |step| {
        let end = step.t0 + step.h;
        while next < num_samples - 1 && times[next] <= end {
            step.eval(times[next], &mut buf);
            out.push((times[next], StateVector(buf.clone())));
            next += 1;
        }
    })?;
    // Samples past the last step boundary can only be the endpoint.
    while next < num_samples - 1 {
        out.push((times[next], StateVector(last.clone())));
        next += 1;
    }
    out.push((t_end, StateVector(last)));
    Ok(out)
}

/// Population and principal-value phase `(−π, π]` of the ground amplitude.
pub fn ground_phase(psi: &[C64]) -> Result<(f64, f64)> {
    let a0 = psi[0];
    let pop = a0.norm_sqr();
    if pop < 1e-12 {
        return Err(Error::UndefinedPhase(pop));
    }
    let mut phase = a0.arg();
    if phase <= -PI {
        phase += 2.0 * PI;
    }
    Ok((pop, phase))
}

/// Continues a sequence of principal-value phases onto the nearest branch of
/// the previous sample.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut prev: Option<f64> = None;
    for &p in phases {
        let v = match prev {
            None => p,
            Some(q) => {
                let mut d = p - q;
                d -= 2.0 * PI * (d / (2.0 * PI)).round();
                q + d
            }
        };
        out.push(v);
        prev = Some(v);
    }
    out
}

/// Fixed-step classical RK4 with `steps` uniform steps. Slow; meant as an
/// independent reference for [`evolve`].
pub fn oracle_evolve<E: Envelope + ?Sized>(
    system: &ChannelSystem,
    env: &E,
    psi0: &[C64],
    steps: usize,
) -> Result<StateVector> {
    check_dim(system, psi0)?;
    if steps == 0 {
        return invalid("oracle needs at least one step");
    }
    let n = system.dim();
    let zero = C64::new(0.0, 0.0);
    let h = env.duration() / steps as f64;
    let mut y = psi0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut tmp = vec![zero; n];
    for s in 0..steps {
        let t = s as f64 * h;
        let om0 = env.omega(t);
        let om_mid = env.omega(t + 0.5 * h);
        let om1 = env.omega(t + h);
        system.rhs(om0, &y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        system.rhs(om_mid, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        system.rhs(om_mid, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + k3[i] * h;
        }
        system.rhs(om1, &tmp, &mut k4);
        for i in 0..n {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    Ok(StateVector(y))
}
