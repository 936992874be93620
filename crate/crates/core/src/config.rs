//! Run configuration: a flat `section.key = value` text format.
//!
//! Lines starting with `#` are comments. Unknown keys are rejected so typos
//! surface early. [`RunConfig::to_text`] writes every key, and reading that
//! text back yields an identical configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coil::{AxisAlignment, CoilGeometry, CoilShape, SampleModel};
use crate::dynamics::{GasConditions, TimeGrid, TraceParameters, DEFAULT_ETA, INFIELD_RISE_TIME};
use crate::error::{Error, Result};
use crate::fit::{FitMode, FitOptions, DEFAULT_MAX_ITERATIONS};
use crate::spectrum::{
    frequencies_approximate, frequencies_exact, FrequencyMethod, PrecessionFrequencies, RotorFieldConfig,
};
use crate::units::{MolecularConstants, CODATA, ELECTRON_G, O2_GAMMA_GHZ, O2_LAMBDA_GHZ};
use crate::waveform::DEFAULT_BASELINE_END;

/// Environment variable consulted when no `--config` flag is given.
pub const CONFIG_ENV: &str = "SRM_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    Transverse,
    LongitudinalInfield,
    LongitudinalFieldfree,
}

impl Channel {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Transverse => "transverse",
            Self::LongitudinalInfield => "longitudinal-infield",
            Self::LongitudinalFieldfree => "longitudinal-fieldfree",
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transverse" => Ok(Self::Transverse),
            "longitudinal-infield" => Ok(Self::LongitudinalInfield),
            "longitudinal-fieldfree" => Ok(Self::LongitudinalFieldfree),
            other => Err(Error::Config(format!("unknown channel '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub gamma_ghz: f64,
    pub lambda_ghz: f64,
    pub g_factor: f64,

    pub pressure_bar: f64,
    pub temperature_k: f64,
    pub eta: f64,

    pub n: u32,
    pub b_tesla: f64,
    pub inverted: bool,

    pub coil_shape: CoilShape,
    pub coil_a_mm: f64,
    pub coil_b_mm: f64,
    pub coil_alpha_deg: f64,
    pub coil_turns: u32,
    pub coil_alignment: AxisAlignment,

    pub sample_extent_mm: f64,
    pub sample_points: usize,
    pub sample_radius_um: f64,

    pub t_start_ns: f64,
    pub t_end_ns: f64,
    pub dt_ps: f64,

    pub channel: Channel,
    pub amplitude_bohr: f64,
    pub tau_ns: f64,
    pub rise_ns: f64,
    pub tau_plus_ns: f64,
    pub tau_minus_ns: f64,
    pub frequency_method: FrequencyMethod,

    /// `None` means noiseless.
    pub snr_db: Option<f64>,

    pub fit_mode: FitMode,
    pub fit_max_iterations: usize,
    pub baseline_end_ns: f64,

    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let transverse = CoilGeometry::transverse_default();
        Self {
            gamma_ghz: O2_GAMMA_GHZ,
            lambda_ghz: O2_LAMBDA_GHZ,
            g_factor: ELECTRON_G,
            pressure_bar: 0.5,
            temperature_k: 295.0,
            eta: DEFAULT_ETA,
            n: 71,
            b_tesla: 1.0,
            inverted: false,
            coil_shape: transverse.shape,
            coil_a_mm: transverse.semi_axis_a * 1e3,
            coil_b_mm: transverse.semi_axis_b * 1e3,
            coil_alpha_deg: 59.0,
            coil_turns: transverse.turns,
            coil_alignment: transverse.axis_alignment,
            sample_extent_mm: crate::coil::DEFAULT_SAMPLE_EXTENT * 1e3,
            sample_points: crate::coil::DEFAULT_SAMPLE_POINTS,
            sample_radius_um: crate::coil::DEFAULT_SAMPLE_RADIUS * 1e6,
            t_start_ns: -2.0,
            t_end_ns: 15.0,
            dt_ps: 10.0,
            channel: Channel::Transverse,
            amplitude_bohr: (ELECTRON_G.abs() / 3.0),
            tau_ns: 3.1,
            rise_ns: INFIELD_RISE_TIME * 1e9,
            tau_plus_ns: 1.5,
            tau_minus_ns: 1.0,
            frequency_method: FrequencyMethod::Exact,
            snr_db: None,
            fit_mode: FitMode::FrequenciesFixed,
            fit_max_iterations: DEFAULT_MAX_ITERATIONS,
            baseline_end_ns: DEFAULT_BASELINE_END * 1e9,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("cannot parse '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("cannot parse '{value}' for {key} as a boolean"))),
    }
}

fn method_tag(m: FrequencyMethod) -> &'static str {
    match m {
        FrequencyMethod::Approximate => "approximate",
        FrequencyMethod::Exact => "exact",
    }
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "constants.gamma_ghz" => self.gamma_ghz = parse(key, v)?,
            "constants.lambda_ghz" => self.lambda_ghz = parse(key, v)?,
            "constants.g_factor" => self.g_factor = parse(key, v)?,
            "gas.pressure_bar" => self.pressure_bar = parse(key, v)?,
            "gas.temperature_k" => self.temperature_k = parse(key, v)?,
            "gas.eta" => self.eta = parse(key, v)?,
            "rotor.n" => self.n = parse(key, v)?,
            "rotor.b_tesla" => self.b_tesla = parse(key, v)?,
            "rotor.inverted" => self.inverted = parse_bool(key, v)?,
            "coil.shape" => {
                self.coil_shape = match v {
                    "circular" => CoilShape::Circular,
                    "elliptical" => CoilShape::Elliptical,
                    _ => return Err(Error::Config(format!("unknown coil shape '{v}'"))),
                }
            }
            "coil.a_mm" => self.coil_a_mm = parse(key, v)?,
            "coil.b_mm" => self.coil_b_mm = parse(key, v)?,
            "coil.alpha_deg" => self.coil_alpha_deg = parse(key, v)?,
            "coil.turns" => self.coil_turns = parse(key, v)?,
            "coil.alignment" => {
                self.coil_alignment = match v {
                    "longitudinal" => AxisAlignment::Longitudinal,
                    "transverse-tilted" => AxisAlignment::TransverseTilted,
                    _ => return Err(Error::Config(format!("unknown coil alignment '{v}'"))),
                }
            }
            "sample.extent_mm" => self.sample_extent_mm = parse(key, v)?,
            "sample.points" => self.sample_points = parse(key, v)?,
            "sample.radius_um" => self.sample_radius_um = parse(key, v)?,
            "grid.t_start_ns" => self.t_start_ns = parse(key, v)?,
            "grid.t_end_ns" => self.t_end_ns = parse(key, v)?,
            "grid.dt_ps" => self.dt_ps = parse(key, v)?,
            "trace.channel" => self.channel = v.parse()?,
            "trace.amplitude_bohr" => self.amplitude_bohr = parse(key, v)?,
            "trace.tau_ns" => self.tau_ns = parse(key, v)?,
            "trace.rise_ns" => self.rise_ns = parse(key, v)?,
            "trace.tau_plus_ns" => self.tau_plus_ns = parse(key, v)?,
            "trace.tau_minus_ns" => self.tau_minus_ns = parse(key, v)?,
            "trace.method" => {
                self.frequency_method = match v {
                    "approximate" => FrequencyMethod::Approximate,
                    "exact" => FrequencyMethod::Exact,
                    _ => return Err(Error::Config(format!("unknown frequency method '{v}'"))),
                }
            }
            "noise.snr_db" => {
                self.snr_db = match v {
                    "none" | "inf" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "fit.mode" => self.fit_mode = v.parse().map_err(|_| Error::Config(format!("unknown fit mode '{v}'")))?,
            "fit.max_iterations" => self.fit_max_iterations = parse(key, v)?,
            "fit.baseline_end_ns" => self.baseline_end_ns = parse(key, v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "seed" => self.seed = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every assignment in `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            self.set(k, v).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Serializes every key; floats use the shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("constants.gamma_ghz", self.gamma_ghz.to_string());
        put("constants.lambda_ghz", self.lambda_ghz.to_string());
        put("constants.g_factor", self.g_factor.to_string());
        put("gas.pressure_bar", self.pressure_bar.to_string());
        put("gas.temperature_k", self.temperature_k.to_string());
        put("gas.eta", self.eta.to_string());
        put("rotor.n", self.n.to_string());
        put("rotor.b_tesla", self.b_tesla.to_string());
        put("rotor.inverted", self.inverted.to_string());
        put(
            "coil.shape",
            match self.coil_shape {
                CoilShape::Circular => "circular",
                CoilShape::Elliptical => "elliptical",
            }
            .into(),
        );
        put("coil.a_mm", self.coil_a_mm.to_string());
        put("coil.b_mm", self.coil_b_mm.to_string());
        put("coil.alpha_deg", self.coil_alpha_deg.to_string());
        put("coil.turns", self.coil_turns.to_string());
        put(
            "coil.alignment",
            match self.coil_alignment {
                AxisAlignment::Longitudinal => "longitudinal",
                AxisAlignment::TransverseTilted => "transverse-tilted",
            }
            .into(),
        );
        put("sample.extent_mm", self.sample_extent_mm.to_string());
        put("sample.points", self.sample_points.to_string());
        put("sample.radius_um", self.sample_radius_um.to_string());
        put("grid.t_start_ns", self.t_start_ns.to_string());
        put("grid.t_end_ns", self.t_end_ns.to_string());
        put("grid.dt_ps", self.dt_ps.to_string());
        put("trace.channel", self.channel.tag().into());
        put("trace.amplitude_bohr", self.amplitude_bohr.to_string());
        put("trace.tau_ns", self.tau_ns.to_string());
        put("trace.rise_ns", self.rise_ns.to_string());
        put("trace.tau_plus_ns", self.tau_plus_ns.to_string());
        put("trace.tau_minus_ns", self.tau_minus_ns.to_string());
        put("trace.method", method_tag(self.frequency_method).into());
        put("noise.snr_db", self.snr_db.map_or("none".into(), |v| v.to_string()));
        put(
            "fit.mode",
            match self.fit_mode {
                FitMode::FrequenciesFixed => "frequencies-fixed",
                FitMode::FrequenciesFree => "frequencies-free",
            }
            .into(),
        );
        put("fit.max_iterations", self.fit_max_iterations.to_string());
        put("fit.baseline_end_ns", self.baseline_end_ns.to_string());
        put("output.dir", self.output_dir.display().to_string());
        put("seed", self.seed.to_string());
        s
    }

    pub fn constants(&self) -> Result<MolecularConstants> {
        MolecularConstants::from_ghz(self.gamma_ghz, self.lambda_ghz, self.g_factor)
    }

    pub fn gas(&self) -> Result<GasConditions> {
        GasConditions::from_bar(self.pressure_bar, self.temperature_k, self.eta)
    }

    pub fn rotor(&self) -> RotorFieldConfig {
        RotorFieldConfig { inverted: self.inverted, ..RotorFieldConfig::new(self.n, self.b_tesla) }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::span(self.t_start_ns * 1e-9, self.t_end_ns * 1e-9, self.dt_ps * 1e-12)
    }

    pub fn coil(&self) -> Result<CoilGeometry> {
        let coil = CoilGeometry {
            shape: self.coil_shape,
            semi_axis_a: self.coil_a_mm * 1e-3,
            semi_axis_b: self.coil_b_mm * 1e-3,
            tilt_alpha: self.coil_alpha_deg.to_radians(),
            turns: self.coil_turns,
            center_offset: [0.0; 3],
            axis_alignment: self.coil_alignment,
        };
        coil.validate()?;
        Ok(coil)
    }

    pub fn sample(&self) -> Result<SampleModel> {
        SampleModel::line(self.sample_extent_mm * 1e-3, self.sample_points, self.sample_radius_um * 1e-6)
    }

    pub fn frequencies(&self) -> Result<PrecessionFrequencies> {
        let constants = self.constants()?;
        match self.frequency_method {
            FrequencyMethod::Approximate => frequencies_approximate(&constants, &self.rotor()),
            FrequencyMethod::Exact => frequencies_exact(&constants, &self.rotor()),
        }
    }

    pub fn trace_parameters(&self) -> Result<TraceParameters> {
        let frequencies = match self.channel {
            // the field-free channel does not precess
            Channel::LongitudinalFieldfree => PrecessionFrequencies::degenerate(0.0, self.frequency_method),
            _ => self.frequencies()?,
        };
        let mut p = TraceParameters::precession(self.amplitude_bohr * CODATA.mu_b, self.tau_ns * 1e-9, frequencies);
        p.rise_time = self.rise_ns * 1e-9;
        p.tau_plus = Some(self.tau_plus_ns * 1e-9);
        p.tau_minus = Some(self.tau_minus_ns * 1e-9);
        p.validate()?;
        Ok(p)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions { mode: self.fit_mode, max_iterations: self.fit_max_iterations }
    }

    /// Checks everything that can be checked without running a command.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.constants()?;
        self.gas()?;
        self.grid()?;
        self.coil()?;
        self.sample()?;
        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return Err(Error::Config("noise.snr_db must be finite or 'none'".into()));
            }
        }
        self.rotor().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.n = 43;
        c.b_tesla = 0.5;
        c.snr_db = Some(20.0);
        c.channel = Channel::LongitudinalFieldfree;
        c.fit_mode = FitMode::FrequenciesFree;
        c.coil_alignment = AxisAlignment::Longitudinal;
        c.coil_shape = CoilShape::Circular;
        c.seed = 42;
        assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
        assert_eq!(RunConfig::from_text(&RunConfig::default().to_text()).unwrap(), RunConfig::default());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let c = RunConfig::from_text("# header\n\nrotor.n = 61\n  # indented\nrotor.b_tesla=0.5\n").unwrap();
        assert_eq!(c.n, 61);
        assert_eq!(c.b_tesla, 0.5);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::from_text("rotor.n = 61\nrotor.nn = 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(RunConfig::from_text("rotor.n 61").is_err());
        assert!(RunConfig::from_text("rotor.n = many").is_err());
    }

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        assert!(c.validate().unwrap().is_empty());
        assert!(c.trace_parameters().is_ok());
    }

    #[test]
    fn even_n_is_a_warning() {
        let c = RunConfig::from_text("rotor.n = 70").unwrap();
        assert_eq!(c.validate().unwrap().len(), 1);
    }
}
