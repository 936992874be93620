//! Damped two-frequency EMF model and its least-squares fit.
//!
//! The model is the time derivative of a damped precession signal,
//!
//!   E(t) = −d/dt [A (sin Ω₊t + sin Ω₋t) e^{−t/τ}]
//!        = −A e^{−t/τ} Σ_k (Ω_k cos Ω_k t − sin Ω_k t / τ),   t ≥ 0,
//!
//! and zero before the excitation. Only samples with t ≥ 0 enter the fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::PrecessionFrequencies;
use crate::waveform::Waveform;

pub const DEFAULT_MAX_ITERATIONS: usize = 200;
/// Convergence threshold on the cosine between the residual and every
/// Jacobian column.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
/// Residuals below this fraction of the data norm count as an exact fit.
const EXACT_FIT: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    /// Only A and τ are free; Ω± are held at the seed values.
    #[default]
    FrequenciesFixed,
    FrequenciesFree,
}

impl std::str::FromStr for FitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frequencies-fixed" | "fixed" => Ok(Self::FrequenciesFixed),
            "frequencies-free" | "free" => Ok(Self::FrequenciesFree),
            other => Err(Error::InvalidInput(format!("unknown fit mode '{other}'"))),
        }
    }
}

/// Model parameters; also used as fit seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub amplitude: f64,
    pub tau: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
}

pub type FitSeed = ModelParams;

impl ModelParams {
    pub fn new(amplitude: f64, tau: f64, frequencies: &PrecessionFrequencies) -> Self {
        Self { amplitude, tau, omega_plus: frequencies.omega_plus, omega_minus: frequencies.omega_minus }
    }

    fn to_vec(self, mode: FitMode) -> Vec<f64> {
        match mode {
            FitMode::FrequenciesFixed => vec![self.amplitude, self.tau],
            FitMode::FrequenciesFree => vec![self.amplitude, self.tau, self.omega_plus, self.omega_minus],
        }
    }

    fn with_vec(self, v: &[f64]) -> Self {
        let mut out = Self { amplitude: v[0], tau: v[1], ..self };
        if v.len() == 4 {
            out.omega_plus = v[2];
            out.omega_minus = v[3];
        }
        out
    }

    fn admissible(&self) -> bool {
        self.amplitude.is_finite() && self.tau > 0.0 && self.omega_plus > 0.0 && self.omega_minus > 0.0
    }
}

/// Model value at time `t`.
pub fn emf_model(p: &ModelParams, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let d = (-t / p.tau).exp();
    let g: f64 = [p.omega_plus, p.omega_minus]
        .iter()
        .map(|&w| {
            let (s, c) = (w * t).sin_cos();
            w * c - s / p.tau
        })
        .sum();
    -p.amplitude * d * g
}

/// Partial derivatives with respect to (A, τ, Ω₊, Ω₋).
pub fn model_gradient(p: &ModelParams, t: f64) -> [f64; 4] {
    if t < 0.0 {
        return [0.0; 4];
    }
    let tau = p.tau;
    let d = (-t / tau).exp();
    let (mut g, mut s_sum) = (0.0, 0.0);
    let mut d_omega = [0.0; 2];
    for (k, &w) in [p.omega_plus, p.omega_minus].iter().enumerate() {
        let (s, c) = (w * t).sin_cos();
        g += w * c - s / tau;
        s_sum += s;
        d_omega[k] = -p.amplitude * d * (c - w * t * s - t * c / tau);
    }
    [-d * g, -p.amplitude * d / (tau * tau) * (t * g + s_sum), d_omega[0], d_omega[1]]
}

/// Samples the model on a uniform grid.
pub fn synthesize_model(p: &ModelParams, t0: f64, dt: f64, len: usize) -> Result<Waveform> {
    let samples = (0..len).map(|i| emf_model(p, t0 + i as f64 * dt)).collect();
    Ok(Waveform::new(t0, dt, samples, crate::waveform::WaveUnit::Volt)?
        .with_meta("model", "damped-two-frequency")
        .with_meta("A", p.amplitude)
        .with_meta("tau_s", p.tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uncertainties {
    pub amplitude: f64,
    pub tau: f64,
    pub omega_plus: Option<f64>,
    pub omega_minus: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub amplitude: f64,
    pub tau: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// One-sigma, from s²(JᵀJ)⁻¹ at the optimum with uniform weights.
    pub uncertainties: Uncertainties,
    pub residual_rms: f64,
    pub initial_residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    pub mode: FitMode,
    pub samples_used: usize,
    pub weighting: String,
}

impl FitResult {
    pub fn params(&self) -> ModelParams {
        ModelParams { amplitude: self.amplitude, tau: self.tau, omega_plus: self.omega_plus, omega_minus: self.omega_minus }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub mode: FitMode,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { mode: FitMode::FrequenciesFixed, max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

struct Problem<'a> {
    times: Vec<f64>,
    data: &'a [f64],
    base: ModelParams,
    /// Parameter scales: the solver works in units of the seed.
    scale: Vec<f64>,
}

impl Problem<'_> {
    fn params(&self, x: &[f64]) -> ModelParams {
        let raw: Vec<f64> = x.iter().zip(&self.scale).map(|(a, s)| a * s).collect();
        self.base.with_vec(&raw)
    }

    fn residual(&self, p: &ModelParams) -> Vec<f64> {
        self.times.iter().zip(self.data).map(|(&t, &y)| y - emf_model(p, t)).collect()
    }

    /// JᵀJ and Jᵀr in scaled coordinates (J is the model Jacobian).
    fn normal_equations(&self, p: &ModelParams, r: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let k = self.scale.len();
        let mut jtj = DMatrix::zeros(k, k);
        let mut jtr = DVector::zeros(k);
        for (&t, &ri) in self.times.iter().zip(r) {
            let g = model_gradient(p, t);
            let row: Vec<f64> = (0..k).map(|i| g[i] * self.scale[i]).collect();
            for i in 0..k {
                jtr[i] += row[i] * ri;
                for j in 0..=i {
                    jtj[(i, j)] += row[i] * row[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                jtj[(j, i)] = jtj[(i, j)];
            }
        }
        (jtj, jtr)
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Largest cosine between the residual and a Jacobian column.
fn gradient_cosine(jtj: &DMatrix<f64>, jtr: &DVector<f64>, rr: f64) -> f64 {
    (0..jtr.len())
        .map(|i| {
            let denom = (jtj[(i, i)] * rr).sqrt();
            if denom > 0.0 { jtr[i].abs() / denom } else { 0.0 }
        })
        .fold(0.0, f64::max)
}

/// Levenberg–Marquardt fit of the damped two-frequency model to `emf`.
/// Accepted steps never increase the residual.
pub fn fit_emf(emf: &Waveform, seed: &FitSeed, options: &FitOptions) -> Result<FitResult> {
    emf.validate()?;
    if !seed.admissible() || seed.amplitude == 0.0 {
        return Err(Error::InvalidInput("fit seed needs A ≠ 0, τ > 0 and Ω± > 0".into()));
    }
    let first = emf.times().position(|t| t >= 0.0).ok_or_else(|| Error::InvalidInput("waveform has no t >= 0 samples".into()))?;
    let times: Vec<f64> = (first..emf.len()).map(|i| emf.time(i)).collect();
    let data = &emf.samples[first..];
    let span = times.last().unwrap() - times[0];
    let slowest = seed.omega_plus.min(seed.omega_minus);
    if span < 2.0 * std::f64::consts::TAU / slowest {
        return Err(Error::InvalidInput(format!(
            "fit window {span:e} s covers fewer than two oscillation periods"
        )));
    }
    let scale: Vec<f64> = seed.to_vec(options.mode).iter().map(|v| v.abs()).collect();
    let k = scale.len();
    if times.len() <= k {
        return Err(Error::InvalidInput("too few samples for the fit".into()));
    }
    let problem = Problem { times, data, base: *seed, scale };
    let data_sq = sum_sq(data);

    let mut x: Vec<f64> = seed.to_vec(options.mode).iter().zip(&problem.scale).map(|(v, s)| v / s).collect();
    let mut p = problem.params(&x);
    let mut r = problem.residual(&p);
    let mut rr = sum_sq(&r);
    let initial_rr = rr;
    let (mut jtj, mut jtr) = problem.normal_equations(&p, &r);
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut done = rr <= EXACT_FIT * EXACT_FIT * data_sq || gradient_cosine(&jtj, &jtr, rr) <= GRADIENT_TOLERANCE;

    while !done && iterations < options.max_iterations {
        iterations += 1;
        let mut accepted = false;
        // inner loop raises damping until a step lowers the residual
        for _ in 0..60 {
            let mut a = jtj.clone();
            for i in 0..k {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let delta = chol.solve(&jtr);
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let tp = problem.params(&trial);
            if tp.admissible() {
                let tr = problem.residual(&tp);
                let trr = sum_sq(&tr);
                if trr <= rr {
                    let step = delta.amax() / x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let small_change = rr - trr <= 1e-15 * rr && step < 1e-12;
                    x = trial;
                    p = tp;
                    r = tr;
                    rr = trr;
                    (jtj, jtr) = problem.normal_equations(&p, &r);
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    done = rr <= EXACT_FIT * EXACT_FIT * data_sq
                        || gradient_cosine(&jtj, &jtr, rr) <= GRADIENT_TOLERANCE
                        || small_change;
                    break;
                }
            }
            mu *= 4.0;
        }
        if !accepted {
            // no descent direction left at any damping
            break;
        }
    }

    let exact = rr <= EXACT_FIT * EXACT_FIT * data_sq;
    let cosine = gradient_cosine(&jtj, &jtr, rr);
    let converged = exact || cosine <= 1e3 * GRADIENT_TOLERANCE;

    let n = problem.times.len();
    let s2 = rr / (n - k) as f64;
    let cov = jtj
        .clone()
        .try_inverse()
        .filter(|c| c.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Conditioning("normal equations are singular at the optimum".into()))?;
    let sigma = |i: usize| (s2 * cov[(i, i)]).max(0.0).sqrt() * problem.scale[i];
    let uncertainties = Uncertainties {
        amplitude: sigma(0),
        tau: sigma(1),
        omega_plus: (k == 4).then(|| sigma(2)),
        omega_minus: (k == 4).then(|| sigma(3)),
    };
    Ok(FitResult {
        amplitude: p.amplitude,
        tau: p.tau,
        omega_plus: p.omega_plus,
        omega_minus: p.omega_minus,
        uncertainties,
        residual_rms: (rr / n as f64).sqrt(),
        initial_residual_rms: (initial_rr / n as f64).sqrt(),
        converged,
        iterations,
        mode: options.mode,
        samples_used: n,
        weighting: "uniform".into(),
    })
}

/// Seed values from the waveform alone: Ω from zero-crossing spacing,
/// τ from a log-linear fit of the extrema, A from the first extremum.
pub fn initial_guess(emf: &Waveform) -> Result<FitSeed> {
    emf.validate()?;
    let first = emf.times().position(|t| t >= 0.0).unwrap_or(emf.len());
    let times: Vec<f64> = (first..emf.len()).map(|i| emf.time(i)).collect();
    // three-point smoothing keeps noise from splitting lobes
    let raw = &emf.samples[first..];
    let y: Vec<f64> = (0..raw.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(raw.len() - 1);
            raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) {
        return Err(Error::HeuristicFailure("waveform is identically zero after t = 0".into()));
    }
    let threshold = 0.1 * peak;

    // lobes: maximal runs whose |y| exceeds the threshold with one sign
    let mut extrema: Vec<(f64, f64)> = Vec::new();
    let mut crossings: Vec<f64> = Vec::new();
    let mut sign = 0.0;
    let mut last_idx = 0;
    for (i, &v) in y.iter().enumerate() {
        if v.abs() < threshold {
            continue;
        }
        let s = v.signum();
        if s != sign {
            if sign != 0.0 {
                // zero crossing between the previous lobe and this one
                let j = (last_idx..i).rev().find(|&j| y[j].signum() != s).unwrap_or(last_idx);
                let frac = y[j] / (y[j] - y[j + 1]);
                crossings.push(times[j] + frac * (times[j + 1] - times[j]));
            }
            sign = s;
            extrema.push((times[i], v));
        } else if v.abs() > extrema.last().unwrap().1.abs() {
            *extrema.last_mut().unwrap() = (times[i], v);
        }
        last_idx = i;
    }
    if extrema.len() < 2 || crossings.len() < 2 {
        return Err(Error::HeuristicFailure(format!(
            "found {} extrema and {} zero crossings; supply explicit initial values",
            extrema.len(),
            crossings.len()
        )));
    }
    let half_period = (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;
    let omega = std::f64::consts::PI / half_period;

    let n = extrema.len() as f64;
    let (st, sl) = extrema.iter().fold((0.0, 0.0), |(a, b), &(t, v)| (a + t, b + v.abs().ln()));
    let (mt, ml) = (st / n, sl / n);
    let (cov, var) = extrema.iter().fold((0.0, 0.0), |(c, v), &(t, e)| (c + (t - mt) * (e.abs().ln() - ml), v + (t - mt).powi(2)));
    let slope = cov / var;
    if !(slope < 0.0) {
        return Err(Error::HeuristicFailure("extrema envelope does not decay".into()));
    }
    let tau = -1.0 / slope;

    let (t1, e1) = extrema[0];
    let amplitude = -e1 * (t1 / tau).exp() / (2.0 * omega * (1.0 + 1.0 / (omega * tau).powi(2)).sqrt());
    Ok(FitSeed { amplitude, tau, omega_plus: omega, omega_minus: omega })
}
