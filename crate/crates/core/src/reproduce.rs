//! Model-based datasets for the four measurement figures.
//!
//! No raw data is available, so every dataset is synthesized from the
//! closed-form models. The constants below are the calibration choices; each
//! summary lists the headline numbers next to the observed values with an
//! explicit acceptance range.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::coil::CoilGeometry;
use crate::commands::{echo_config, synthesize_emf, synthesize_trace, write_json, write_text, write_with};
use crate::config::{Channel, RunConfig};
use crate::dynamics::{
    boltzmann_imbalance, number_density, quadrature_lag, refine_peak, transverse_moment, TimeGrid,
    TraceParameters,
};
use crate::error::{Error, Result};
use crate::fit::{fit_emf, FitOptions};
use crate::spectrum::{frequencies_approximate, frequencies_exact, FrequencyMethod};
use crate::units::CODATA;

/// Observed peak transverse moment at N = 89, 1 T, 0.5 bar (µB per molecule);
/// the transverse amplitude is scaled to reproduce it.
pub const TRANSVERSE_PEAK_BOHR: f64 = 0.65;
/// Observed peak field-free longitudinal moment at N = 33 (µB per molecule).
pub const FIELDFREE_PEAK_BOHR: f64 = 0.16;
/// Transverse decay time at N = 89 and 0.5 bar (s), extrapolated linearly
/// from the fitted N = 43, 61, 71 values.
pub const TAU_N89: f64 = 3.9e-9;
/// Fitted decay times at 1 T (s) with one-sigma errors.
pub const FIG4_PANELS: [(u32, f64, f64, f64); 4] =
    [(43, 1.0, 1.8e-9, 0.4e-9), (61, 1.0, 2.4e-9, 0.4e-9), (71, 1.0, 3.1e-9, 0.6e-9), (71, 0.5, 3.1e-9, 0.6e-9)];
/// Collisional time constants of the field-free model at the reference
/// pressure (s): rise, S_N = −1 decay, S_N = +1 decay (τ₊ = 1.5 τ₋).
pub const FIELDFREE_REFERENCE: (f64, f64, f64) = (0.3e-9, 1.0e-9, 1.5e-9);
pub const FIELDFREE_REFERENCE_BAR: f64 = 0.45;
/// Pressures of the field-free comparison (bar).
pub const FIG2_PRESSURES: [f64; 2] = [0.45, 0.9];
/// Pressures of the transverse pressure series (bar).
pub const FIG5_PRESSURES: [f64; 3] = [0.25, 0.5, 1.0];
/// Normalization time of the pressure series (s).
pub const FIG5_NORMALIZE_AT: f64 = 0.8e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Self::Fig2),
            "fig3" => Ok(Self::Fig3),
            "fig4" => Ok(Self::Fig4),
            "fig5" => Ok(Self::Fig5),
            other => Err(Error::InvalidInput(format!("unknown figure tag '{other}' (expected fig2..fig5)"))),
        }
    }
}

/// One headline number with its acceptance range.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub low: f64,
    pub high: f64,
    pub observed: Option<f64>,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, value: f64, low: f64, high: f64, observed: Option<f64>) -> Self {
        Self { name: name.into(), value, low, high, observed, pass: (low..=high).contains(&value) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureSummary {
    pub figure: String,
    pub calibration: serde_json::Value,
    pub values: serde_json::Value,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
}

impl FigureSummary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn base(cfg: &RunConfig, name: &str) -> RunConfig {
    let mut c = cfg.clone();
    c.output_dir = cfg.output_dir.join(name);
    c.frequency_method = FrequencyMethod::Exact;
    c
}

fn names(files: &[PathBuf]) -> Vec<String> {
    files.iter().map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect()
}

/// Per-molecule amplitude giving the observed transverse peak for τ = `tau`.
pub fn calibrated_transverse_amplitude(cfg: &RunConfig, n: u32, b: f64, tau: f64) -> Result<f64> {
    let constants = cfg.constants()?;
    let f = frequencies_exact(&constants, &crate::spectrum::RotorFieldConfig::new(n, b))?;
    let unit = TraceParameters::precession(CODATA.mu_b, tau, f);
    let grid = TimeGrid::span(0.0, 10.0 * tau, 1e-12)?;
    let peak = refine_peak(|t| transverse_moment(&unit, t), &grid);
    Ok(TRANSVERSE_PEAK_BOHR * CODATA.mu_b / peak.value.abs())
}

fn fieldfree_times(pressure_bar: f64) -> (f64, f64, f64) {
    let s = FIELDFREE_REFERENCE_BAR / pressure_bar;
    let (rise, tm, tp) = FIELDFREE_REFERENCE;
    (rise * s, tm * s, tp * s)
}

/// Time after the peak at which |v| first falls below peak/e.
fn decay_time(times: &[f64], v: &[f64]) -> Option<f64> {
    let (ip, peak) = v.iter().enumerate().fold((0, 0.0f64), |a, (i, x)| if x.abs() > a.1 { (i, x.abs()) } else { a });
    let j = (ip..v.len()).find(|&j| v[j].abs() < peak / std::f64::consts::E)?;
    Some(times[j] - times[ip])
}

fn fig2(cfg: &RunConfig) -> Result<FigureSummary> {
    let mut files = Vec::new();
    let mut rows = Vec::new();
    let constants = cfg.constants()?;
    for &p in &FIG2_PRESSURES {
        let mut c = base(cfg, "fig2");
        c.n = 33;
        c.b_tesla = 0.0;
        c.pressure_bar = p;
        c.channel = Channel::LongitudinalFieldfree;
        c.t_start_ns = -2.0;
        c.t_end_ns = 12.0;
        let (rise, tm, tp) = fieldfree_times(p);
        c.rise_ns = rise * 1e9;
        c.tau_minus_ns = tm * 1e9;
        c.tau_plus_ns = tp * 1e9;
        let longitudinal = CoilGeometry::longitudinal_default();
        c.coil_shape = longitudinal.shape;
        c.coil_a_mm = longitudinal.semi_axis_a * 1e3;
        c.coil_b_mm = longitudinal.semi_axis_b * 1e3;
        c.coil_alpha_deg = 0.0;
        c.coil_alignment = longitudinal.axis_alignment;
        let (trace, _) = synthesize_trace(&c)?;
        let emf = synthesize_emf(&c, &trace)?;
        let tag = format!("P{p}bar");
        files.push(write_with(&c.output_dir, &format!("magnetization_{tag}.csv"), |w| trace.write_csv(w))?);
        files.push(write_with(&c.output_dir, &format!("emf_{tag}.csv"), |w| emf.write_csv(w))?);
        files.push(write_text(&c.output_dir, &format!("config_{tag}.txt"), &c.to_text())?);
        let times: Vec<f64> = trace.grid.times().collect();
        let mu = trace.longitudinal_bohr();
        let (ip, peak) = mu.iter().enumerate().fold((0, 0.0f64), |a, (i, x)| if x.abs() > a.1 { (i, x.abs()) } else { a });
        let emf_peak = emf.samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        rows.push(serde_json::json!({
            "pressure_bar": p,
            "peak_moment_bohr": peak,
            "peak_time_ns": times[ip] * 1e9,
            "decay_time_ns": decay_time(&times, &mu).map(|t| t * 1e9),
            "emf_peak_volt": emf_peak,
            "rise_ns": rise * 1e9,
            "tau_minus_ns": tm * 1e9,
            "tau_plus_ns": tp * 1e9,
        }));
    }
    let peak_t = |i: usize| rows[i]["peak_time_ns"].as_f64().unwrap_or(f64::NAN);
    let decay = |i: usize| rows[i]["decay_time_ns"].as_f64().unwrap_or(f64::NAN);
    let peak_m = rows[0]["peak_moment_bohr"].as_f64().unwrap_or(f64::NAN);
    let bias = boltzmann_imbalance(33, cfg.temperature_k, &constants)?;
    let checks = vec![
        Check::new("high_pressure_peak_time_ratio", peak_t(1) / peak_t(0), 0.0, 0.999, None),
        Check::new("high_pressure_decay_time_ratio", decay(1) / decay(0), 0.0, 0.999, None),
        Check::new("peak_moment_bohr", peak_m, FIELDFREE_PEAK_BOHR / 2.0, FIELDFREE_PEAK_BOHR * 2.0, Some(FIELDFREE_PEAK_BOHR)),
        Check::new("boltzmann_factor_n33", bias, 0.002, 0.004, Some(0.003)),
    ];
    let dir = base(cfg, "fig2").output_dir;
    files.push(dir.join("summary.json"));
    let summary = FigureSummary {
        figure: "fig2".into(),
        calibration: serde_json::json!({
            "reference_pressure_bar": FIELDFREE_REFERENCE_BAR,
            "rise_ns": FIELDFREE_REFERENCE.0 * 1e9,
            "tau_minus_ns": FIELDFREE_REFERENCE.1 * 1e9,
            "tau_plus_ns": FIELDFREE_REFERENCE.2 * 1e9,
            "scaling": "time constants inversely proportional to pressure",
        }),
        values: serde_json::json!({ "traces": rows, "boltzmann_factor_n33": bias }),
        checks,
        files: names(&files),
    };
    write_json(&dir, "summary.json", &summary)?;
    Ok(summary)
}

fn fig3(cfg: &RunConfig) -> Result<FigureSummary> {
    let mut c = base(cfg, "fig3");
    c.n = 89;
    c.b_tesla = 1.0;
    c.pressure_bar = 0.5;
    c.tau_ns = TAU_N89 * 1e9;
    c.t_start_ns = -2.0;
    c.t_end_ns = 15.0;
    let amplitude = calibrated_transverse_amplitude(&c, 89, 1.0, TAU_N89)?;
    c.amplitude_bohr = amplitude;

    c.channel = Channel::Transverse;
    let (transverse, _) = synthesize_trace(&c)?;
    c.channel = Channel::LongitudinalInfield;
    let (infield, _) = synthesize_trace(&c)?;
    c.channel = Channel::LongitudinalFieldfree;
    let (rise, tm, tp) = fieldfree_times(c.pressure_bar);
    c.rise_ns = rise * 1e9;
    c.tau_minus_ns = tm * 1e9;
    c.tau_plus_ns = tp * 1e9;
    let (fieldfree, bias89) = synthesize_trace(&c)?;
    c.channel = Channel::Transverse;

    let mut csv = String::from("time_s,mu_perp_bohr,mu_par_infield_bohr,mu_par_fieldfree_bohr,b_perp_mG\n");
    let (mt, ml, mf) = (transverse.transverse_bohr(), infield.longitudinal_bohr(), fieldfree.longitudinal_bohr());
    for (i, t) in transverse.grid.times().enumerate() {
        let b_mg = CODATA.mu_0 * transverse.transverse[i] * 1e7;
        let _ = writeln!(csv, "{t:e},{:e},{:e},{:e},{b_mg:e}", mt[i], ml[i], mf[i]);
    }
    let mut files = vec![write_text(&c.output_dir, "moments.csv", &csv)?, echo_config(&c)?];

    let constants = c.constants()?;
    let params = c.trace_parameters()?;
    let peak = refine_peak(|t| transverse_moment(&params, t), &c.grid()?);
    let peak_bohr = peak.value / CODATA.mu_b;
    let nc = number_density(&c.gas()?);
    let flux_mg = CODATA.mu_0 * nc * peak.value * 1e7;
    let approx = frequencies_approximate(&constants, &c.rotor())?;
    let exact = frequencies_exact(&constants, &c.rotor())?;
    let bias33 = boltzmann_imbalance(33, c.temperature_k, &constants)?;
    let checks = vec![
        Check::new("peak_transverse_bohr", peak_bohr, 0.6, 0.7, Some(0.65)),
        Check::new("flux_density_mG", flux_mg, 36.0, 40.0, Some(40.0)),
        Check::new("quarter_period_ns", approx.quarter_period_plus() * 1e9, 0.8 * 0.97, 0.8 * 1.03, Some(0.8)),
        Check::new("boltzmann_factor_n33", bias33, 0.002, 0.004, Some(0.003)),
        Check::new("number_density_1bar_cm3", nc * 2.0 * 1e-6, 6e17, f64::INFINITY, Some(6e17)),
    ];
    files.push(c.output_dir.join("summary.json"));
    let summary = FigureSummary {
        figure: "fig3".into(),
        calibration: serde_json::json!({
            "transverse_amplitude_bohr": amplitude,
            "target_peak_bohr": TRANSVERSE_PEAK_BOHR,
            "tau_ns": TAU_N89 * 1e9,
        }),
        values: serde_json::json!({
            "peak_transverse_bohr": peak_bohr,
            "peak_time_ns": peak.time * 1e9,
            "flux_density_mG": flux_mg,
            "number_density_cm3": nc * 1e-6,
            "quarter_period_approximate_ns": approx.quarter_period_plus() * 1e9,
            "quarter_period_exact_plus_ns": exact.quarter_period_plus() * 1e9,
            "quarter_period_exact_minus_ns": exact.quarter_period_minus() * 1e9,
            "boltzmann_factor_n33": bias33,
            "boltzmann_factor_n89": bias89,
        }),
        checks,
        files: names(&files),
    };
    write_json(&c.output_dir, "summary.json", &summary)?;
    Ok(summary)
}

fn fig4(cfg: &RunConfig) -> Result<FigureSummary> {
    let mut files = Vec::new();
    let mut panels = Vec::new();
    let mut periods = Vec::new();
    let mut checks = Vec::new();
    for &(n, b, tau, sigma) in &FIG4_PANELS {
        let mut c = base(cfg, "fig4");
        c.n = n;
        c.b_tesla = b;
        c.tau_ns = tau * 1e9;
        c.channel = Channel::Transverse;
        c.amplitude_bohr = calibrated_transverse_amplitude(&c, n, b, tau)?;
        let (trace, _) = synthesize_trace(&c)?;
        let emf = synthesize_emf(&c, &trace)?;
        files.push(write_with(&c.output_dir, &format!("emf_N{n}_B{b}.csv"), |w| emf.write_csv(w))?);
        files.push(write_text(&c.output_dir, &format!("config_N{n}_B{b}.txt"), &c.to_text())?);
        let f = c.frequencies()?;
        let (seed, _) = crate::commands::fit_seed(&emf, &c)?;
        let fit = fit_emf(&emf, &seed, &FitOptions::default())?;
        let mean_period = std::f64::consts::TAU / (0.5 * (f.omega_plus + f.omega_minus));
        periods.push(mean_period);
        checks.push(Check::new(&format!("fit_tau_N{n}_B{b}_ns"), fit.tau * 1e9, (tau - sigma) * 1e9, (tau + sigma) * 1e9, Some(tau * 1e9)));
        panels.push(serde_json::json!({
            "n": n, "b_tesla": b,
            "omega_plus": f.omega_plus, "omega_minus": f.omega_minus,
            "mean_period_ns": mean_period * 1e9,
            "tau_ns": tau * 1e9,
            "fit_tau_ns": fit.tau * 1e9,
            "fit_amplitude": fit.amplitude,
            "fit_converged": fit.converged,
        }));
    }
    let dir = base(cfg, "fig4").output_dir;
    // periods shrink with decreasing N at fixed field
    let ordered = periods[0] < periods[1] && periods[1] < periods[2];
    checks.push(Check::new("period_order_43_61_71", if ordered { 1.0 } else { 0.0 }, 1.0, 1.0, None));
    checks.push(Check::new("period_ratio_N71_0.5T_over_1T", periods[3] / periods[2], 1.6, 2.4, Some(2.0)));
    files.push(dir.join("summary.json"));
    let summary = FigureSummary {
        figure: "fig4".into(),
        calibration: serde_json::json!({ "amplitude": "per panel, scaled to the observed transverse peak" }),
        values: serde_json::json!({ "panels": panels }),
        checks,
        files: names(&files),
    };
    write_json(&dir, "summary.json", &summary)?;
    Ok(summary)
}

fn fig5(cfg: &RunConfig) -> Result<FigureSummary> {
    let mut files = Vec::new();
    // (a) pressure series at N = 89, 1 T, normalized at 0.8 ns
    let mut series = Vec::new();
    let mut grid = None;
    for &p in &FIG5_PRESSURES {
        let mut c = base(cfg, "fig5");
        c.n = 89;
        c.b_tesla = 1.0;
        c.pressure_bar = p;
        c.tau_ns = TAU_N89 * 1e9 * 0.5 / p;
        c.channel = Channel::Transverse;
        let params = c.trace_parameters()?;
        let norm = transverse_moment(&params, FIG5_NORMALIZE_AT);
        let (trace, _) = synthesize_trace(&c)?;
        grid = Some(trace.grid);
        let nc = trace.number_density;
        series.push(trace.transverse.iter().map(|m| m / (nc * norm)).collect::<Vec<f64>>());
    }
    let grid = grid.expect("at least one pressure");
    let mut csv = String::from("time_s");
    for p in FIG5_PRESSURES {
        let _ = write!(csv, ",P{p}bar");
    }
    csv.push('\n');
    for (i, t) in grid.times().enumerate() {
        let _ = write!(csv, "{t:e}");
        for s in &series {
            let _ = write!(csv, ",{:e}", s[i]);
        }
        csv.push('\n');
    }
    let mut c = base(cfg, "fig5");
    files.push(write_text(&c.output_dir, "pressure_series.csv", &csv)?);

    // (b) N = 71, 1 T: in-field longitudinal vs transverse
    c.n = 71;
    c.b_tesla = 1.0;
    c.tau_ns = 3.1;
    c.channel = Channel::Transverse;
    let (transverse, _) = synthesize_trace(&c)?;
    c.channel = Channel::LongitudinalInfield;
    let (infield, _) = synthesize_trace(&c)?;
    let mut csv = String::from("time_s,mu_par_bohr,mu_perp_bohr\n");
    let (ml, mt) = (infield.longitudinal_bohr(), transverse.transverse_bohr());
    for (i, t) in transverse.grid.times().enumerate() {
        let _ = writeln!(csv, "{t:e},{:e},{:e}", ml[i], mt[i]);
    }
    files.push(write_text(&c.output_dir, "quadrature.csv", &csv)?);
    files.push(echo_config(&c)?);

    let f = c.frequencies()?;
    let omega = 0.5 * (f.omega_plus + f.omega_minus);
    let (lag, quarter_samples) = quadrature_lag(
        &infield.longitudinal,
        &transverse.transverse,
        &infield.grid,
        5.0 * c.rise_ns * 1e-9,
        omega,
    );
    let checks = vec![Check::new(
        "lag_minus_quarter_period_samples",
        lag as f64 - quarter_samples,
        -1.0,
        1.0,
        Some(0.0),
    )];
    files.push(c.output_dir.join("summary.json"));
    let summary = FigureSummary {
        figure: "fig5".into(),
        calibration: serde_json::json!({
            "tau_n89_ns_at_0.5bar": TAU_N89 * 1e9,
            "pressure_scaling": "decay time inversely proportional to pressure",
            "normalize_at_ns": FIG5_NORMALIZE_AT * 1e9,
        }),
        values: serde_json::json!({
            "pressures_bar": FIG5_PRESSURES,
            "lag_samples": lag,
            "quarter_period_samples": quarter_samples,
        }),
        checks,
        files: names(&files),
    };
    write_json(&c.output_dir, "summary.json", &summary)?;
    Ok(summary)
}

/// Writes the dataset and summary of one figure under `<out>/<tag>/`.
pub fn reproduce(figure: Figure, cfg: &RunConfig) -> Result<FigureSummary> {
    match figure {
        Figure::Fig2 => fig2(cfg),
        Figure::Fig3 => fig3(cfg),
        Figure::Fig4 => fig4(cfg),
        Figure::Fig5 => fig5(cfg),
    }
}
