//! Ensemble magnetization traces built from single-molecule spin dynamics.
//!
//! Per-molecule moments are computed first (J/T) and scaled by the number
//! density of centrifuged molecules to magnetization (A/m). Longitudinal is
//! the projection on the beam axis x̂, transverse the projection on ŷ.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{zero_field_energy, Branch, PrecessionFrequencies};
use crate::units::{MolecularConstants, CODATA, PASCAL_PER_BAR};

/// Default fraction of molecules captured by the centrifuge.
pub const DEFAULT_ETA: f64 = 0.04;
/// In-field rise time of the longitudinal moment (s), pressure independent.
pub const INFIELD_RISE_TIME: f64 = 0.25e-9;

/// Gas pressure, temperature and centrifuged fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasConditions {
    /// Pa.
    pub pressure: f64,
    /// K.
    pub temperature: f64,
    pub eta: f64,
}

impl GasConditions {
    pub fn new(pressure: f64, temperature: f64, eta: f64) -> Result<Self> {
        let gas = Self { pressure, temperature, eta };
        gas.validate()?;
        Ok(gas)
    }

    pub fn from_bar(pressure_bar: f64, temperature: f64, eta: f64) -> Result<Self> {
        Self::new(pressure_bar * PASCAL_PER_BAR, temperature, eta)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.pressure.is_finite()
            && self.pressure > 0.0
            && self.temperature.is_finite()
            && self.temperature > 0.0
            && self.eta > 0.0
            && self.eta <= 1.0;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "gas conditions need P > 0, T > 0, 0 < eta <= 1 (got P={} Pa, T={} K, eta={})",
                self.pressure, self.temperature, self.eta
            )));
        }
        Ok(())
    }

    pub fn pressure_bar(&self) -> f64 {
        self.pressure / PASCAL_PER_BAR
    }

    /// A collisional time constant known at `p_ref`, rescaled ∝ 1/P.
    pub fn collisional_time(&self, reference_time: f64, p_ref: f64) -> f64 {
        reference_time * p_ref / self.pressure
    }
}

/// Number density of centrifuged molecules n_c = ηP/(k_B T), in m⁻³.
pub fn number_density(gas: &GasConditions) -> f64 {
    gas.eta * gas.pressure / (CODATA.k_b * gas.temperature)
}

/// Model parameters for one synthesized trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceParameters {
    /// Per-molecule amplitude (J/T).
    pub amplitude: f64,
    /// Decay time (s); `f64::INFINITY` for an undamped trace.
    pub tau: f64,
    pub frequencies: PrecessionFrequencies,
    /// Rise time of the longitudinal moment (s).
    pub rise_time: f64,
    /// Decay of the S_N = +1 population (two-rate model only).
    pub tau_plus: Option<f64>,
    /// Decay of the S_N = −1 population (two-rate model only).
    pub tau_minus: Option<f64>,
}

impl TraceParameters {
    pub fn precession(amplitude: f64, tau: f64, frequencies: PrecessionFrequencies) -> Self {
        Self {
            amplitude,
            tau,
            frequencies,
            rise_time: INFIELD_RISE_TIME,
            tau_plus: None,
            tau_minus: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && !x.is_nan();
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidInput(format!("amplitude must be >= 0, got {}", self.amplitude)));
        }
        if !positive(self.tau) || !positive(self.rise_time) {
            return Err(Error::InvalidInput("time constants must be > 0".into()));
        }
        for t in [self.tau_plus, self.tau_minus].into_iter().flatten() {
            if !positive(t) {
                return Err(Error::InvalidInput("branch decay times must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Uniform time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || len == 0 || !t0.is_finite() {
            return Err(Error::InvalidInput(format!("invalid grid t0={t0} dt={dt} len={len}")));
        }
        Ok(Self { t0, dt, len })
    }

    /// Grid from `t_start` to `t_end` inclusive (to within rounding).
    pub fn span(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t_end > t_start) {
            return Err(Error::InvalidInput(format!("grid end {t_end} must exceed start {t_start}")));
        }
        let len = ((t_end - t_start) / dt + 1e-9).floor() as usize + 1;
        Self::new(t_start, dt, len)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.time(i))
    }
}

/// Magnetization time series on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationTrace {
    pub grid: TimeGrid,
    /// M∥ along x̂ (A/m).
    pub longitudinal: Vec<f64>,
    /// M⊥ along ŷ (A/m).
    pub transverse: Vec<f64>,
    /// n_c used for the per-molecule ↔ volume conversion (m⁻³).
    pub number_density: f64,
    /// Fastest angular frequency present (rad/s), for sampling checks.
    pub max_omega: f64,
}

impl MagnetizationTrace {
    fn to_bohr(&self, m: f64) -> f64 {
        m / (self.number_density * CODATA.mu_b)
    }

    pub fn longitudinal_bohr(&self) -> Vec<f64> {
        self.longitudinal.iter().map(|&m| self.to_bohr(m)).collect()
    }

    pub fn transverse_bohr(&self) -> Vec<f64> {
        self.transverse.iter().map(|&m| self.to_bohr(m)).collect()
    }

    /// CSV with columns `time_s,m_par_A_per_m,m_perp_A_per_m,mu_par_bohr,mu_perp_bohr`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_s,m_par_A_per_m,m_perp_A_per_m,mu_par_bohr,mu_perp_bohr")?;
        for (i, t) in self.grid.times().enumerate() {
            let (mp, mt) = (self.longitudinal[i], self.transverse[i]);
            writeln!(w, "{:e},{:e},{:e},{:e},{:e}", t, mp, mt, self.to_bohr(mp), self.to_bohr(mt))?;
        }
        Ok(())
    }
}

fn decay(t: f64, tau: f64) -> f64 {
    (-t / tau).exp()
}

fn rise(t: f64, rise_time: f64) -> f64 {
    -(-t / rise_time).exp_m1()
}

/// Per-molecule transverse moment A(sin Ω₊t + sin Ω₋t)e^{−t/τ}, zero for t < 0.
pub fn transverse_moment(params: &TraceParameters, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let f = &params.frequencies;
    params.amplitude * ((f.omega_plus * t).sin() + (f.omega_minus * t).sin()) * decay(t, params.tau)
}

/// Per-molecule in-field longitudinal moment A(cos Ω₊t + cos Ω₋t)e^{−t/τ}(1 − e^{−t/t_r}).
pub fn longitudinal_infield_moment(params: &TraceParameters, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let f = &params.frequencies;
    params.amplitude
        * ((f.omega_plus * t).cos() + (f.omega_minus * t).cos())
        * decay(t, params.tau)
        * rise(t, params.rise_time)
}

/// Per-molecule field-free longitudinal moment: the two-rate population
/// difference plus the Boltzmann bias term, both gated by the collisional rise.
///
/// The S_N = +1 component is energetically favoured and its excess gives a
/// positive moment (antiparallel to N).
pub fn longitudinal_fieldfree_moment(
    params: &TraceParameters,
    constants: &MolecularConstants,
    boltzmann_bias: f64,
    t: f64,
) -> Result<f64> {
    let (Some(tp), Some(tm)) = (params.tau_plus, params.tau_minus) else {
        return Err(Error::InvalidInput("field-free model needs tau_plus and tau_minus".into()));
    };
    if t < 0.0 {
        return Ok(0.0);
    }
    let mu = constants.spin_moment();
    let mean_tau = 0.5 * (tp + tm);
    let two_rate = mu / 3.0 * (decay(t, tp) - decay(t, tm));
    let bias = mu * boltzmann_bias * decay(t, mean_tau);
    Ok((two_rate + bias) * rise(t, params.rise_time))
}

/// Time derivative of [`transverse_moment`] (J/(T·s)).
pub fn transverse_rate(params: &TraceParameters, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let f = &params.frequencies;
    let inv_tau = params.tau.recip();
    let (sp, cp) = (f.omega_plus * t).sin_cos();
    let (sm, cm) = (f.omega_minus * t).sin_cos();
    params.amplitude * decay(t, params.tau) * (f.omega_plus * cp + f.omega_minus * cm - (sp + sm) * inv_tau)
}

/// Time derivative of [`longitudinal_infield_moment`].
pub fn longitudinal_infield_rate(params: &TraceParameters, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let f = &params.frequencies;
    let (sp, cp) = (f.omega_plus * t).sin_cos();
    let (sm, cm) = (f.omega_minus * t).sin_cos();
    let c = cp + cm;
    let dc = -(f.omega_plus * sp + f.omega_minus * sm);
    let (d, r) = (decay(t, params.tau), rise(t, params.rise_time));
    let dr = decay(t, params.rise_time) / params.rise_time;
    params.amplitude * d * (dc * r - c * r / params.tau + c * dr)
}

/// Time derivative of [`longitudinal_fieldfree_moment`].
pub fn longitudinal_fieldfree_rate(
    params: &TraceParameters,
    constants: &MolecularConstants,
    boltzmann_bias: f64,
    t: f64,
) -> Result<f64> {
    let (Some(tp), Some(tm)) = (params.tau_plus, params.tau_minus) else {
        return Err(Error::InvalidInput("field-free model needs tau_plus and tau_minus".into()));
    };
    if t < 0.0 {
        return Ok(0.0);
    }
    let mu = constants.spin_moment();
    let mean_tau = 0.5 * (tp + tm);
    let value = mu / 3.0 * (decay(t, tp) - decay(t, tm)) + mu * boltzmann_bias * decay(t, mean_tau);
    let slope = mu / 3.0 * (decay(t, tm) / tm - decay(t, tp) / tp) - mu * boltzmann_bias * decay(t, mean_tau) / mean_tau;
    let (r, dr) = (rise(t, params.rise_time), decay(t, params.rise_time) / params.rise_time);
    Ok(slope * r + value * dr)
}

/// Branch-resolved transverse-plane moments (x̂, ŷ) for S_N = +1 and −1.
///
/// The two branches carry opposite moments along N and precess in opposite
/// senses about the field; their ŷ components add up to the transverse
/// kernel while the x̂ components cancel at equal frequencies.
pub fn branch_resolved_moments(params: &TraceParameters, t: f64) -> [(Branch, [f64; 2]); 2] {
    if t < 0.0 {
        return [(Branch::Plus, [0.0; 2]), (Branch::Minus, [0.0; 2])];
    }
    let f = &params.frequencies;
    let a = params.amplitude * decay(t, params.tau);
    let phi_plus = f.omega_plus * t;
    let phi_minus = -f.omega_minus * t;
    [
        (Branch::Plus, [a * phi_plus.cos(), a * phi_plus.sin()]),
        (Branch::Minus, [-a * phi_minus.cos(), -a * phi_minus.sin()]),
    ]
}

fn check_bound(constants: &MolecularConstants, moments: &[f64]) -> Result<()> {
    let bound = 2.0 * constants.spin_moment();
    let worst = moments.iter().fold(0.0f64, |a, m| a.max(m.abs()));
    if worst > bound * (1.0 + 1e-12) {
        return Err(Error::PhysicalBound {
            moment_bohr: worst / CODATA.mu_b,
            bound_bohr: bound / CODATA.mu_b,
        });
    }
    Ok(())
}

fn assemble(
    constants: &MolecularConstants,
    gas: &GasConditions,
    grid: &TimeGrid,
    longitudinal: Vec<f64>,
    transverse: Vec<f64>,
    max_omega: f64,
) -> Result<MagnetizationTrace> {
    gas.validate()?;
    check_bound(constants, &longitudinal)?;
    check_bound(constants, &transverse)?;
    let nc = number_density(gas);
    Ok(MagnetizationTrace {
        grid: *grid,
        longitudinal: longitudinal.into_iter().map(|m| m * nc).collect(),
        transverse: transverse.into_iter().map(|m| m * nc).collect(),
        number_density: nc,
        max_omega,
    })
}

/// Transverse precession trace; the longitudinal channel is zero.
pub fn transverse_trace(
    constants: &MolecularConstants,
    params: &TraceParameters,
    gas: &GasConditions,
    grid: &TimeGrid,
) -> Result<MagnetizationTrace> {
    params.validate()?;
    let mu: Vec<f64> = grid.times().map(|t| transverse_moment(params, t)).collect();
    assemble(constants, gas, grid, vec![0.0; grid.len], mu, params.frequencies.max())
}

/// In-field longitudinal trace, in quadrature with the transverse kernel.
pub fn longitudinal_trace_infield(
    constants: &MolecularConstants,
    params: &TraceParameters,
    gas: &GasConditions,
    grid: &TimeGrid,
) -> Result<MagnetizationTrace> {
    params.validate()?;
    let mu: Vec<f64> = grid.times().map(|t| longitudinal_infield_moment(params, t)).collect();
    assemble(constants, gas, grid, mu, vec![0.0; grid.len], params.frequencies.max())
}

/// Field-free longitudinal trace from the two-rate model plus Boltzmann bias.
pub fn longitudinal_trace_fieldfree(
    constants: &MolecularConstants,
    params: &TraceParameters,
    boltzmann_bias: f64,
    gas: &GasConditions,
    grid: &TimeGrid,
) -> Result<MagnetizationTrace> {
    params.validate()?;
    let mu = grid
        .times()
        .map(|t| longitudinal_fieldfree_moment(params, constants, boltzmann_bias, t))
        .collect::<Result<Vec<_>>>()?;
    assemble(constants, gas, grid, mu, vec![0.0; grid.len], 0.0)
}

/// Thermal imbalance tanh(|ΔE|/k_B T) between the S_N = ±1 branches at B = 0.
pub fn boltzmann_imbalance(n: u32, temperature: f64, constants: &MolecularConstants) -> Result<f64> {
    if n < 1 || !(temperature > 0.0) {
        return Err(Error::InvalidInput(format!("need N >= 1 and T > 0 (N={n}, T={temperature})")));
    }
    let de = zero_field_energy(constants, n, Branch::Plus) - zero_field_energy(constants, n, Branch::Minus);
    Ok((de.abs() / (CODATA.k_b * temperature)).tanh())
}

/// Local flux density µ0·M for both channels (T).
#[derive(Debug, Clone, PartialEq)]
pub struct FluxDensity {
    pub longitudinal: Vec<f64>,
    pub transverse: Vec<f64>,
}

pub fn flux_density(trace: &MagnetizationTrace) -> FluxDensity {
    let scale = |v: &[f64]| v.iter().map(|m| CODATA.mu_0 * m).collect();
    FluxDensity {
        longitudinal: scale(&trace.longitudinal),
        transverse: scale(&trace.transverse),
    }
}

/// Location and value of the extremum of a continuous model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub time: f64,
    pub value: f64,
}

/// Largest |f| over the grid, refined by golden-section search between the
/// neighbouring samples.
pub fn refine_peak<F: Fn(f64) -> f64>(f: F, grid: &TimeGrid) -> Peak {
    let (best, _) = grid
        .times()
        .enumerate()
        .map(|(i, t)| (i, f(t).abs()))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let mut lo = grid.time(best.saturating_sub(1));
    let mut hi = grid.time((best + 1).min(grid.len - 1));
    let g = |t: f64| -f(t).abs();
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * grid.dt.max(hi.abs()) {
            break;
        }
        if g1 < g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - ratio * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + ratio * (hi - lo);
            g2 = g(x2);
        }
    }
    let candidates = [grid.time(best), 0.5 * (lo + hi)];
    let t = candidates
        .into_iter()
        .max_by(|a, b| f(*a).abs().total_cmp(&f(*b).abs()))
        .unwrap();
    Peak { time: t, value: f(t) }
}

/// Lag (in samples, within `0..=max_lag`) maximizing the normalized
/// correlation Σ a[i]·b[i + lag] / √(Σ a[i]² · Σ b[i + lag]²) over the
/// overlap. The normalization removes the bias towards short lags that a
/// common exponential envelope would otherwise introduce.
pub fn cross_correlation_lag(a: &[f64], b: &[f64], max_lag: usize) -> usize {
    (0..=max_lag.min(b.len().saturating_sub(1)))
        .map(|lag| {
            let (mut s, mut aa, mut bb) = (0.0, 0.0, 0.0);
            for (x, y) in a.iter().zip(&b[lag..]) {
                s += x * y;
                aa += x * x;
                bb += y * y;
            }
            let norm = (aa * bb).sqrt();
            (lag, if norm > 0.0 { s / norm } else { 0.0 })
        })
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
        .0
}

/// Lag of the transverse oscillation behind the in-field longitudinal one,
/// in samples, measured after `settle` seconds so the rise gate does not
/// bias it. Returns the lag and the expected quarter period at `omega`,
/// both in samples.
pub fn quadrature_lag(longitudinal: &[f64], transverse: &[f64], grid: &TimeGrid, settle: f64, omega: f64) -> (usize, f64) {
    let start = grid.times().position(|t| t >= settle).unwrap_or(0);
    let quarter = std::f64::consts::FRAC_PI_2 / omega / grid.dt;
    let lag = cross_correlation_lag(&longitudinal[start..], &transverse[start..], (4.0 * quarter).ceil() as usize);
    (lag, quarter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{frequencies_approximate, FrequencyMethod, RotorFieldConfig};
    use approx::assert_relative_eq;

    fn o2() -> MolecularConstants {
        MolecularConstants::oxygen()
    }

    fn room(p_bar: f64) -> GasConditions {
        GasConditions::from_bar(p_bar, 295.0, DEFAULT_ETA).unwrap()
    }

    #[test]
    fn number_density_values() {
        // ideal-gas arithmetic, cm⁻³
        assert_relative_eq!(number_density(&room(1.0)) * 1e-6, 9.820_976_970_9e17, max_relative = 1e-9);
        assert_relative_eq!(number_density(&room(0.5)) * 1e-6, 4.910_488_485_5e17, max_relative = 1e-9);
        assert!(number_density(&room(1.0)) * 1e-6 > 6e17);
        let tiny = GasConditions::new(1e-30, 295.0, 0.04).unwrap();
        assert!(number_density(&tiny) < 1e-6);
    }

    #[test]
    fn gas_validation() {
        assert!(GasConditions::new(0.0, 295.0, 0.04).is_err());
        assert!(GasConditions::new(1e5, 0.0, 0.04).is_err());
        assert!(GasConditions::new(1e5, 295.0, 1.5).is_err());
        assert!(GasConditions::new(1e5, 295.0, 1.0).is_ok());
    }

    fn approximate_params(n: u32, b: f64, amplitude: f64, tau: f64) -> TraceParameters {
        let f = frequencies_approximate(&o2(), &RotorFieldConfig::new(n, b)).unwrap();
        TraceParameters::precession(amplitude, tau, f)
    }

    #[test]
    fn undamped_transverse_peak_is_two_thirds_g() {
        let c = o2();
        let p = approximate_params(89, 1.0, c.spin_moment() / 3.0, f64::INFINITY);
        let quarter = p.frequencies.quarter_period_plus();
        let grid = TimeGrid::new(0.0, quarter / 500.0, 1001).unwrap();
        let trace = transverse_trace(&c, &p, &room(0.5), &grid).unwrap();
        let peak = trace.transverse_bohr().into_iter().fold(0.0, f64::max);
        assert_relative_eq!(peak, 2.0 / 3.0 * 2.0023, max_relative = 1e-9);
        assert_eq!(trace.transverse[0], 0.0);
        assert!(trace.longitudinal.iter().all(|&m| m == 0.0));
        assert!((quarter - 0.8e-9).abs() < 0.03 * 0.8e-9);
    }

    #[test]
    fn envelope_and_bound() {
        let c = o2();
        let p = approximate_params(43, 1.0, c.spin_moment() / 3.0, 1.8e-9);
        for k in 0..2000 {
            let t = k as f64 * 5e-12;
            let mu = transverse_moment(&p, t);
            assert!(mu.abs() <= 2.0 * p.amplitude * (-t / p.tau).exp() * (1.0 + 1e-12));
        }
        let too_big = TraceParameters { amplitude: 2.0 * c.spin_moment(), ..p };
        let grid = TimeGrid::new(0.0, 1e-11, 400).unwrap();
        assert!(matches!(
            transverse_trace(&c, &too_big, &room(0.5), &grid),
            Err(Error::PhysicalBound { .. })
        ));
    }

    #[test]
    fn pressure_scaling_is_exact_ratio() {
        let c = o2();
        let p = approximate_params(71, 1.0, 0.2 * c.spin_moment(), 3.1e-9);
        let grid = TimeGrid::new(-1e-9, 1e-11, 800).unwrap();
        let a = transverse_trace(&c, &p, &room(0.9), &grid).unwrap();
        let b = transverse_trace(&c, &p, &room(0.45), &grid).unwrap();
        for (x, y) in a.transverse.iter().zip(&b.transverse) {
            if *y != 0.0 {
                assert!((x / y - 2.0).abs() <= 2e-12);
            }
        }
    }

    #[test]
    fn rates_match_finite_differences() {
        let c = o2();
        let mut p = approximate_params(61, 1.0, 0.3 * c.spin_moment(), 2.4e-9);
        p.frequencies.omega_minus *= 0.93;
        p.tau_plus = Some(1.5e-9);
        p.tau_minus = Some(1.0e-9);
        let h = 1e-15;
        for t in [0.05e-9, 0.4e-9, 1.3e-9, 4.0e-9] {
            let fd = |f: &dyn Fn(f64) -> f64| (f(t + h) - f(t - h)) / (2.0 * h);
            let cases = [
                (transverse_rate(&p, t), fd(&|x| transverse_moment(&p, x))),
                (longitudinal_infield_rate(&p, t), fd(&|x| longitudinal_infield_moment(&p, x))),
                (
                    longitudinal_fieldfree_rate(&p, &c, 0.01, t).unwrap(),
                    fd(&|x| longitudinal_fieldfree_moment(&p, &c, 0.01, x).unwrap()),
                ),
            ];
            for (analytic, numeric) in cases {
                let scale = p.amplitude.max(c.spin_moment()) * p.frequencies.omega_plus;
                assert!((analytic - numeric).abs() <= 1e-6 * scale, "{analytic} vs {numeric} at {t}");
            }
        }
    }

    #[test]
    fn infield_longitudinal_starts_at_zero_and_lags_by_quarter_period() {
        let c = o2();
        let p = approximate_params(71, 1.0, 0.2 * c.spin_moment(), 50e-9);
        let period = 2.0 * std::f64::consts::PI / p.frequencies.omega_plus;
        let dt = period / 64.0;
        let grid = TimeGrid::new(0.0, dt, 64 * 40).unwrap();
        let lon = longitudinal_trace_infield(&c, &p, &room(0.5), &grid).unwrap();
        let tra = transverse_trace(&c, &p, &room(0.5), &grid).unwrap();
        assert_eq!(lon.longitudinal[0], 0.0);
        let lag = cross_correlation_lag(&lon.longitudinal, &tra.transverse, 32);
        assert!((lag as i64 - 16).abs() <= 1, "lag {lag}");
    }

    #[test]
    fn two_rate_equal_rates_cancel() {
        let c = o2();
        let p = TraceParameters {
            tau_plus: Some(2e-9),
            tau_minus: Some(2e-9),
            rise_time: 1e-9,
            ..approximate_params(33, 0.0, 0.0, 2e-9)
        };
        for k in 0..100 {
            let mu = longitudinal_fieldfree_moment(&p, &c, 0.0, k as f64 * 1e-10).unwrap();
            assert_eq!(mu, 0.0);
        }
        let biased = longitudinal_fieldfree_moment(&p, &c, 0.01, 1e-9).unwrap();
        assert!(biased > 0.0);
    }

    #[test]
    fn two_rate_peak_closed_form() {
        let c = o2();
        let tau_m = 1e-9;
        let p = TraceParameters {
            tau_plus: Some(1.5 * tau_m),
            tau_minus: Some(tau_m),
            rise_time: 1e-30,
            ..approximate_params(33, 0.0, 0.0, 1e-9)
        };
        let grid = TimeGrid::new(0.0, 1e-11, 1000).unwrap();
        let peak = refine_peak(|t| longitudinal_fieldfree_moment(&p, &c, 0.0, t).unwrap(), &grid);
        // (|g|/3)(1.5⁻² − 1.5⁻³) at t = 3τ₋ ln 1.5
        let expect = 2.0023 / 3.0 * (1.5f64.powi(-2) - 1.5f64.powi(-3));
        assert_relative_eq!(peak.value / CODATA.mu_b, expect, max_relative = 1e-6);
        assert_relative_eq!(peak.time, 3.0 * tau_m * 1.5f64.ln(), max_relative = 1e-4);
        assert!(longitudinal_fieldfree_moment(&TraceParameters { tau_plus: None, ..p }, &c, 0.0, 0.0).is_err());
    }

    #[test]
    fn boltzmann_factor_values() {
        let c = o2();
        let b33 = boltzmann_imbalance(33, 295.0, &c).unwrap();
        assert_relative_eq!(b33, 2.175_291_720_27e-3, max_relative = 1e-6);
        assert!(b33 < boltzmann_imbalance(89, 295.0, &c).unwrap());
        assert!(boltzmann_imbalance(33, 1e12, &c).unwrap() < 1e-10);
        assert!((boltzmann_imbalance(33, 1e-3, &c).unwrap() - 1.0).abs() < 1e-12);
        assert!(boltzmann_imbalance(33, 0.0, &c).is_err());
    }

    #[test]
    fn flux_density_for_observed_moment() {
        let gas = room(0.5);
        let grid = TimeGrid::new(0.0, 1e-12, 1).unwrap();
        let nc = number_density(&gas);
        let m = 0.65 * CODATA.mu_b * nc;
        let trace = MagnetizationTrace {
            grid,
            longitudinal: vec![0.0],
            transverse: vec![m],
            number_density: nc,
            max_omega: 0.0,
        };
        let b = flux_density(&trace);
        // 37.2 mG
        assert_relative_eq!(b.transverse[0] * 1e7, 37.197_648_088, max_relative = 1e-8);
        assert_eq!(b.longitudinal[0], 0.0);
    }

    #[test]
    fn branch_resolved_sum_matches_kernel() {
        let f = PrecessionFrequencies { omega_plus: 2.1e9, omega_minus: 1.9e9, method: FrequencyMethod::Exact };
        let p = TraceParameters::precession(1.0, 2e-9, f);
        for k in 0..200 {
            let t = k as f64 * 1.3e-11;
            let [(_, a), (_, b)] = branch_resolved_moments(&p, t);
            assert_relative_eq!(a[1] + b[1], transverse_moment(&p, t), epsilon = 1e-12);
        }
        let eq = TraceParameters::precession(1.0, 2e-9, PrecessionFrequencies::degenerate(2e9, FrequencyMethod::Approximate));
        let [(_, a), (_, b)] = branch_resolved_moments(&eq, 0.7e-9);
        assert!((a[0] + b[0]).abs() < 1e-15);
    }

    #[test]
    fn csv_header() {
        let c = o2();
        let p = approximate_params(61, 1.0, 0.1 * c.spin_moment(), 2.4e-9);
        let grid = TimeGrid::new(0.0, 1e-11, 5).unwrap();
        let trace = transverse_trace(&c, &p, &room(0.5), &grid).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("time_s,m_par_A_per_m,m_perp_A_per_m,mu_par_bohr,mu_perp_bohr\n"));
        assert_eq!(s.lines().count(), 6);
    }
}
