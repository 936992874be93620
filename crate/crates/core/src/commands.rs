//! Command implementations behind the `spinmag` binary. Each command writes
//! its files under the configured output directory, echoes the resolved
//! configuration as `config.txt`, and returns a serializable report.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::coil::{coupling_coefficient, emf_from_rates, CoilGeometry, CouplingCoefficient, SampleModel, Vec3};
use crate::config::{Channel, RunConfig};
use crate::dynamics::{
    boltzmann_imbalance, longitudinal_fieldfree_rate, longitudinal_infield_rate, longitudinal_trace_fieldfree,
    longitudinal_trace_infield, transverse_rate, transverse_trace, MagnetizationTrace,
};
use crate::error::{Error, Result};
use crate::fit::{emf_model, fit_emf, initial_guess, FitResult, FitSeed};
use crate::spectrum::{
    diagonalize, frequencies_approximate, frequencies_exact, oracle, PrecessionFrequencies, RotorFieldConfig,
};
use crate::units::CODATA;
use crate::waveform::{add_noise, difference_protocol, integrate_emf, WaveUnit, Waveform};

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub(crate) fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

pub(crate) fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dir, name, &text)
}

pub(crate) fn write_with<F>(dir: &Path, name: &str, f: F) -> Result<PathBuf>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    ensure_dir(dir)?;
    let mut buf = Vec::new();
    f(&mut buf)?;
    let path = dir.join(name);
    fs::write(&path, buf)?;
    Ok(path)
}

pub(crate) fn echo_config(cfg: &RunConfig) -> Result<PathBuf> {
    write_text(&cfg.output_dir, "config.txt", &cfg.to_text())
}

fn file_names(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect()
}

/// Frequencies with the derived quantities users usually want.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencySummary {
    #[serde(flatten)]
    pub frequencies: PrecessionFrequencies,
    pub f_plus_ghz: f64,
    pub f_minus_ghz: f64,
    pub quarter_period_plus_ns: f64,
    pub quarter_period_minus_ns: f64,
}

impl From<PrecessionFrequencies> for FrequencySummary {
    fn from(f: PrecessionFrequencies) -> Self {
        let tau = std::f64::consts::TAU;
        Self {
            frequencies: f,
            f_plus_ghz: f.omega_plus / tau * 1e-9,
            f_minus_ghz: f.omega_minus / tau * 1e-9,
            quarter_period_plus_ns: f.quarter_period_plus() * 1e9,
            quarter_period_minus_ns: f.quarter_period_minus() * 1e9,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub n: u32,
    pub b_tesla: f64,
    pub inverted: bool,
    pub warnings: Vec<String>,
    pub total_states: usize,
    /// Distinct energies (GHz), merged to 1e-9 relative.
    pub distinct_energies_ghz: usize,
    pub approximate: FrequencySummary,
    pub exact: Option<FrequencySummary>,
    pub exact_error: Option<String>,
    pub oracle_max_relative_deviation: Option<f64>,
    pub files: Vec<String>,
}

/// Diagonalizes the configured rotor, writes the energy table and both
/// frequency estimates.
pub fn cmd_spectrum(cfg: &RunConfig, with_oracle: bool) -> Result<SpectrumReport> {
    let constants = cfg.constants()?;
    let rotor = cfg.rotor();
    let warnings = rotor.validate()?;
    let spectrum = diagonalize(&constants, &rotor)?;
    let mut energies = spectrum.all_energies();
    energies.sort_by(f64::total_cmp);
    let scale = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut distinct = 0;
    let mut last = f64::NEG_INFINITY;
    for e in &energies {
        if (e - last).abs() > 1e-9 * scale {
            distinct += 1;
            last = *e;
        }
    }
    let approximate = frequencies_approximate(&constants, &rotor)?.into();
    let (exact, exact_error) = match frequencies_exact(&constants, &rotor) {
        Ok(f) => (Some(f.into()), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let oracle_max_relative_deviation = if with_oracle {
        Some(oracle::max_relative_deviation(&constants, &rotor)?)
    } else {
        None
    };
    let dir = &cfg.output_dir;
    let tag = format!("N{}_B{}", rotor.n, rotor.b_tesla);
    let mut files = vec![
        write_with(dir, &format!("spectrum_{tag}.csv"), |w| spectrum.write_csv(w))?,
        echo_config(cfg)?,
    ];
    let mut report = SpectrumReport {
        n: rotor.n,
        b_tesla: rotor.b_tesla,
        inverted: rotor.inverted,
        warnings,
        total_states: spectrum.total_states(),
        distinct_energies_ghz: distinct,
        approximate,
        exact,
        exact_error,
        oracle_max_relative_deviation,
        files: Vec::new(),
    };
    files.push(dir.join(format!("frequencies_{tag}.json")));
    report.files = file_names(&files);
    write_json(dir, &format!("frequencies_{tag}.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisReport {
    pub channel: Channel,
    pub n: u32,
    pub b_tesla: f64,
    pub frequencies: Option<FrequencySummary>,
    pub number_density_cm3: f64,
    pub peak_longitudinal_bohr: f64,
    pub peak_transverse_bohr: f64,
    pub peak_flux_density_mg: f64,
    pub boltzmann_bias: Option<f64>,
    pub coupling: Option<CouplingCoefficient>,
    pub emf_rms_volt: f64,
    pub snr_db: Option<f64>,
    pub files: Vec<String>,
}

/// Magnetization trace for the configured channel.
pub fn synthesize_trace(cfg: &RunConfig) -> Result<(MagnetizationTrace, Option<f64>)> {
    let constants = cfg.constants()?;
    let gas = cfg.gas()?;
    let grid = cfg.grid()?;
    let params = cfg.trace_parameters()?;
    Ok(match cfg.channel {
        Channel::Transverse => (transverse_trace(&constants, &params, &gas, &grid)?, None),
        Channel::LongitudinalInfield => (longitudinal_trace_infield(&constants, &params, &gas, &grid)?, None),
        Channel::LongitudinalFieldfree => {
            let bias = boltzmann_imbalance(cfg.n, cfg.temperature_k, &constants)?;
            (longitudinal_trace_fieldfree(&constants, &params, bias, &gas, &grid)?, Some(bias))
        }
    })
}

fn channel_axis(channel: Channel) -> Vec3 {
    match channel {
        Channel::Transverse => crate::coil::Y_HAT,
        _ => crate::coil::X_HAT,
    }
}

fn annotate(wave: Waveform, cfg: &RunConfig) -> Waveform {
    wave.with_meta("N", cfg.n)
        .with_meta("B_T", cfg.b_tesla)
        .with_meta("P_bar", cfg.pressure_bar)
        .with_meta("channel", cfg.channel.tag())
        .with_meta("sense", if cfg.inverted { "-" } else { "+" })
}

/// EMF induced in the configured coil by the analytic magnetization rate of
/// the configured channel, with optional noise.
pub fn synthesize_emf(cfg: &RunConfig, trace: &MagnetizationTrace) -> Result<Waveform> {
    let constants = cfg.constants()?;
    let params = cfg.trace_parameters()?;
    let nc = trace.number_density;
    let rate: Vec<f64> = match cfg.channel {
        Channel::Transverse => trace.grid.times().map(|t| nc * transverse_rate(&params, t)).collect(),
        Channel::LongitudinalInfield => trace.grid.times().map(|t| nc * longitudinal_infield_rate(&params, t)).collect(),
        Channel::LongitudinalFieldfree => {
            let bias = boltzmann_imbalance(cfg.n, cfg.temperature_k, &constants)?;
            trace
                .grid
                .times()
                .map(|t| Ok(nc * longitudinal_fieldfree_rate(&params, &constants, bias, t)?))
                .collect::<Result<_>>()?
        }
    };
    let zeros = vec![0.0; rate.len()];
    let (lon, tra) = match cfg.channel {
        Channel::Transverse => (&zeros, &rate),
        _ => (&rate, &zeros),
    };
    let emf = emf_from_rates(&trace.grid, lon, tra, trace.max_omega, &cfg.coil()?, &cfg.sample()?)?;
    let emf = match cfg.snr_db {
        Some(snr) => add_noise(&emf, snr, cfg.seed)?,
        None => emf,
    };
    Ok(annotate(emf, cfg))
}

pub fn cmd_synthesize(cfg: &RunConfig) -> Result<SynthesisReport> {
    cfg.validate()?;
    let (trace, bias) = synthesize_trace(cfg)?;
    let emf = synthesize_emf(cfg, &trace)?;
    let coupling = coupling_coefficient(&cfg.coil()?, &cfg.sample()?, channel_axis(cfg.channel)).ok();
    let peak = |v: Vec<f64>| v.iter().fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m });
    let peak_m = trace.transverse.iter().chain(&trace.longitudinal).fold(0.0f64, |m, x| m.max(x.abs()));
    let dir = &cfg.output_dir;
    let tag = cfg.channel.tag();
    let files = vec![
        write_with(dir, &format!("magnetization_{tag}.csv"), |w| trace.write_csv(w))?,
        write_with(dir, &format!("emf_{tag}.csv"), |w| emf.write_csv(w))?,
        echo_config(cfg)?,
        dir.join("synthesis.json"),
    ];
    let frequencies = match cfg.channel {
        Channel::LongitudinalFieldfree => None,
        _ => Some(cfg.frequencies()?.into()),
    };
    let report = SynthesisReport {
        channel: cfg.channel,
        n: cfg.n,
        b_tesla: cfg.b_tesla,
        frequencies,
        number_density_cm3: trace.number_density * 1e-6,
        peak_longitudinal_bohr: peak(trace.longitudinal_bohr()),
        peak_transverse_bohr: peak(trace.transverse_bohr()),
        peak_flux_density_mg: CODATA.mu_0 * peak_m * 1e7,
        boltzmann_bias: bias,
        coupling,
        emf_rms_volt: emf.rms(),
        snr_db: cfg.snr_db,
        files: file_names(&files),
    };
    write_json(dir, "synthesis.json", &report)?;
    Ok(report)
}

/// Waveform inputs for [`cmd_fit`]: one averaged shot, or a ± pair that is
/// differenced first.
#[derive(Debug, Clone)]
pub enum FitInput {
    Single(PathBuf),
    Pair { plus: PathBuf, minus: PathBuf },
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub input: Vec<String>,
    pub differenced: bool,
    pub n: u32,
    pub b_tesla: f64,
    pub seed: FitSeed,
    pub seed_source: String,
    pub fit: FitResult,
    pub coupling: Option<CouplingCoefficient>,
    pub magnetization_note: Option<String>,
    pub files: Vec<String>,
}

pub fn read_waveform(path: &Path) -> Result<Waveform> {
    let file = fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Waveform::read_csv(BufReader::new(file))
}

/// Linear least-squares amplitude for fixed τ and Ω±.
fn amplitude_for(emf: &Waveform, seed: &FitSeed) -> f64 {
    let unit = FitSeed { amplitude: 1.0, ..*seed };
    let (num, den) = emf
        .times()
        .zip(&emf.samples)
        .filter(|(t, _)| *t >= 0.0)
        .fold((0.0, 0.0), |(n, d), (t, y)| {
            let m = emf_model(&unit, t);
            (n + y * m, d + m * m)
        });
    if den > 0.0 { num / den } else { 0.0 }
}

/// Seed for the fit: frequencies from the spectrum, τ and A from the
/// waveform heuristic, falling back to the configured τ.
pub fn fit_seed(emf: &Waveform, cfg: &RunConfig) -> Result<(FitSeed, String)> {
    let f = cfg.frequencies()?;
    let (tau, source) = match initial_guess(emf) {
        Ok(g) => (g.tau, "heuristic"),
        Err(_) => (cfg.tau_ns * 1e-9, "config"),
    };
    let mut seed = FitSeed { amplitude: 1.0, tau, omega_plus: f.omega_plus, omega_minus: f.omega_minus };
    seed.amplitude = amplitude_for(emf, &seed);
    if seed.amplitude == 0.0 {
        return Err(Error::HeuristicFailure("waveform has no projection on the model".into()));
    }
    Ok((seed, source.into()))
}

/// Differences (if paired), fits, and integrates to magnetization.
///
/// When `rotor_from_meta` is set, N and B recorded in the waveform metadata
/// replace the configured values.
pub fn cmd_fit(cfg: &RunConfig, input: &FitInput, rotor_from_meta: bool) -> Result<FitReport> {
    let (emf, inputs, differenced) = match input {
        FitInput::Single(p) => (read_waveform(p)?, vec![p.display().to_string()], false),
        FitInput::Pair { plus, minus } => {
            let d = difference_protocol(&read_waveform(plus)?, &read_waveform(minus)?, "sense")?;
            (d, vec![plus.display().to_string(), minus.display().to_string()], true)
        }
    };
    if emf.unit != WaveUnit::Volt {
        return Err(Error::InvalidInput(format!("fit expects an EMF in volt, got {}", emf.unit)));
    }
    let mut cfg = cfg.clone();
    if rotor_from_meta {
        if let Some(n) = emf.meta.get("N") {
            cfg.set("rotor.n", n)?;
        }
        if let Some(b) = emf.meta.get("B_T") {
            cfg.set("rotor.b_tesla", b)?;
        }
    }
    let (seed, seed_source) = fit_seed(&emf, &cfg)?;
    let fit = fit_emf(&emf, &seed, &cfg.fit_options())?;

    let dir = cfg.output_dir.clone();
    let mut files = vec![dir.join("fit.json"), echo_config(&cfg)?];
    let coupling = coupling_coefficient(&cfg.coil()?, &cfg.sample()?, cfg.coil()?.moment_axis()).ok();
    let baseline = emf.range_before(cfg.baseline_end_ns * 1e-9);
    let magnetization_note = match (&coupling, baseline.is_empty()) {
        (Some(c), false) => {
            let m = integrate_emf(&emf, c.coefficient, baseline)?;
            files.push(write_with(&dir, "magnetization_fit_input.csv", |w| m.write_csv(w))?);
            None
        }
        (None, _) => Some("coil does not sense its nominal axis; magnetization not integrated".to_string()),
        (_, true) => Some("no pre-trigger samples for the baseline; magnetization not integrated".to_string()),
    };
    let report = FitReport {
        input: inputs,
        differenced,
        n: cfg.n,
        b_tesla: cfg.b_tesla,
        seed,
        seed_source,
        fit,
        coupling,
        magnetization_note,
        files: file_names(&files),
    };
    write_json(&dir, "fit.json", &report)?;
    if !report.fit.converged {
        return Err(Error::FitNotConverged { iterations: report.fit.iterations, residual_rms: report.fit.residual_rms });
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoilEntry {
    pub axis: String,
    pub coupling: Option<CouplingCoefficient>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoilReport {
    pub geometry: CoilGeometry,
    pub sample: SampleModel,
    pub sample_volume_m3: f64,
    pub nominal: CouplingCoefficient,
    pub axes: Vec<CoilEntry>,
}

/// Coupling coefficients of the configured coil for x̂, ŷ and its nominal axis.
pub fn cmd_coil(cfg: &RunConfig) -> Result<CoilReport> {
    let coil = cfg.coil()?;
    let sample = cfg.sample()?;
    let nominal = coupling_coefficient(&coil, &sample, coil.moment_axis())?;
    let axes = [("x", crate::coil::X_HAT), ("y", crate::coil::Y_HAT), ("z", crate::coil::Z_HAT)]
        .into_iter()
        .map(|(name, axis)| match coupling_coefficient(&coil, &sample, axis) {
            Ok(c) => CoilEntry { axis: name.into(), coupling: Some(c), error: None },
            Err(e) => CoilEntry { axis: name.into(), coupling: None, error: Some(e.to_string()) },
        })
        .collect();
    let report = CoilReport { geometry: coil, sample_volume_m3: sample.volume(), sample, nominal, axes };
    write_json(&cfg.output_dir, "coil.json", &report)?;
    echo_config(cfg)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: u32,
    pub b_tesla: f64,
    pub omega_approx: f64,
    pub omega_plus: Option<f64>,
    pub omega_minus: Option<f64>,
    pub error: Option<String>,
}

/// Precession frequencies over an (N, B) grid, computed in parallel and
/// written in grid order.
pub fn cmd_sweep(cfg: &RunConfig, ns: &[u32], bs: &[f64]) -> Result<Vec<SweepRow>> {
    if ns.is_empty() || bs.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one N and one B".into()));
    }
    let constants = cfg.constants()?;
    let points: Vec<(u32, f64)> = ns.iter().flat_map(|&n| bs.iter().map(move |&b| (n, b))).collect();
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(n, b)| {
            let rotor = RotorFieldConfig { inverted: cfg.inverted, ..RotorFieldConfig::new(n, b) };
            let approx = frequencies_approximate(&constants, &rotor);
            let exact = frequencies_exact(&constants, &rotor);
            let error = approx.as_ref().err().or(exact.as_ref().err()).map(|e| e.to_string());
            SweepRow {
                n,
                b_tesla: b,
                omega_approx: approx.map(|f| f.omega_plus).unwrap_or(f64::NAN),
                omega_plus: exact.as_ref().ok().map(|f| f.omega_plus),
                omega_minus: exact.as_ref().ok().map(|f| f.omega_minus),
                error,
            }
        })
        .collect();
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
    let mut csv = String::from("n,b_tesla,omega_approx_rad_s,omega_plus_rad_s,omega_minus_rad_s,error\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{:e},{},{},{}\n",
            r.n,
            r.b_tesla,
            r.omega_approx,
            opt(r.omega_plus),
            opt(r.omega_minus),
            r.error.as_deref().unwrap_or("").replace(',', ";")
        ));
    }
    write_text(&cfg.output_dir, "sweep.csv", &csv)?;
    echo_config(cfg)?;
    Ok(rows)
}
