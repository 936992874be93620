//! Uniformly sampled waveforms and the measurement-protocol arithmetic:
//! shot differencing, averaging, noise injection and EMF integration.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default end of the pre-trigger baseline window (s).
pub const DEFAULT_BASELINE_END: f64 = -1.0e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveUnit {
    #[serde(rename = "volt")]
    Volt,
    #[serde(rename = "ampere/meter")]
    AmperePerMeter,
    #[serde(rename = "tesla")]
    Tesla,
}

impl WaveUnit {
    pub fn tag(self) -> &'static str {
        match self {
            WaveUnit::Volt => "volt",
            WaveUnit::AmperePerMeter => "ampere/meter",
            WaveUnit::Tesla => "tesla",
        }
    }
}

impl fmt::Display for WaveUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for WaveUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "volt" | "V" => Ok(WaveUnit::Volt),
            "ampere/meter" | "A/m" => Ok(WaveUnit::AmperePerMeter),
            "tesla" | "T" => Ok(WaveUnit::Tesla),
            other => Err(Error::InvalidInput(format!("unknown waveform unit '{other}'"))),
        }
    }
}

/// Uniformly sampled time series with free-form metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
    pub unit: WaveUnit,
    pub meta: BTreeMap<String, String>,
}

impl Waveform {
    pub fn new(t0: f64, dt: f64, samples: Vec<f64>, unit: WaveUnit) -> Result<Self> {
        let w = Self { t0, dt, samples, unit, meta: BTreeMap::new() };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !self.t0.is_finite() {
            return Err(Error::InvalidInput(format!("invalid time base t0={} dt={}", self.t0, self.dt)));
        }
        if self.samples.is_empty() {
            return Err(Error::InvalidInput("waveform has no samples".into()));
        }
        if let Some(i) = self.samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("sample {i} is not finite")));
        }
        Ok(())
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.time(i))
    }

    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.len() as f64).sqrt()
    }

    /// Index range of samples with t < `t_end`.
    pub fn range_before(&self, t_end: f64) -> Range<usize> {
        // index arithmetic, so a sample sitting on `t_end` is excluded regardless of rounding
        let n = ((t_end - self.t0) / self.dt - 1e-9).ceil().clamp(0.0, self.len() as f64) as usize;
        0..n
    }

    pub fn same_grid(&self, other: &Waveform) -> bool {
        self.len() == other.len()
            && self.unit == other.unit
            && (self.dt - other.dt).abs() <= 1e-9 * self.dt
            && (self.t0 - other.t0).abs() <= 1e-6 * self.dt
    }

    fn require_same_grid(&self, other: &Waveform) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::InvalidInput(format!(
                "waveform grids differ: ({}, {}, {}, {}) vs ({}, {}, {}, {})",
                self.t0,
                self.dt,
                self.len(),
                self.unit,
                other.t0,
                other.dt,
                other.len(),
                other.unit
            )));
        }
        Ok(())
    }

    /// CSV: `# key=value` comment lines (unit first), header `time_s,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# unit={}", self.unit)?;
        for (k, v) in &self.meta {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "time_s,value")?;
        for (t, x) in self.times().zip(&self.samples) {
            writeln!(w, "{t:e},{x:e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut unit = None;
        let mut times = Vec::new();
        let mut samples = Vec::new();
        let mut header_seen = false;
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = comment.split_once('=') {
                    let (k, v) = (k.trim(), v.trim());
                    if k == "unit" {
                        unit = Some(v.parse::<WaveUnit>()?);
                    } else {
                        meta.insert(k.to_string(), v.to_string());
                    }
                }
                continue;
            }
            if !header_seen {
                if trimmed.replace(' ', "") != "time_s,value" {
                    return Err(Error::Parse { line: lineno, message: format!("expected header 'time_s,value', got '{trimmed}'") });
                }
                header_seen = true;
                continue;
            }
            let (t, x) = trimmed
                .split_once(',')
                .ok_or_else(|| Error::Parse { line: lineno, message: "expected two columns".into() })?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { line: lineno, message: format!("'{}': {e}", s.trim()) })
            };
            times.push(parse(t)?);
            samples.push(parse(x)?);
        }
        if times.is_empty() {
            return Err(Error::InvalidInput("waveform file has no data rows".into()));
        }
        let t0 = times[0];
        let dt = if times.len() > 1 { (times[times.len() - 1] - t0) / (times.len() - 1) as f64 } else { 1.0 };
        for (i, t) in times.iter().enumerate() {
            if (t - (t0 + i as f64 * dt)).abs() > 1e-6 * dt {
                return Err(Error::InvalidInput(format!("non-uniform time axis at row {}", i + 1)));
            }
        }
        let mut w = Waveform::new(t0, dt, samples, unit.unwrap_or(WaveUnit::Volt))?;
        w.meta = meta;
        Ok(w)
    }
}

/// Half the difference of two shots taken with one experimental parameter
/// reversed; common-mode contributions cancel.
pub fn difference_protocol(plus: &Waveform, minus: &Waveform, axis: &str) -> Result<Waveform> {
    plus.validate()?;
    minus.validate()?;
    plus.require_same_grid(minus)?;
    let samples = plus.samples.iter().zip(&minus.samples).map(|(a, b)| 0.5 * (a - b)).collect();
    let mut meta = plus.meta.clone();
    let differenced = match meta.get("differenced") {
        Some(prev) => format!("{prev};{axis}"),
        None => axis.to_string(),
    };
    meta.insert("differenced".into(), differenced);
    Ok(Waveform { t0: plus.t0, dt: plus.dt, samples, unit: plus.unit, meta })
}

/// Sample-wise mean of several shots on one grid.
pub fn average(shots: &[Waveform]) -> Result<Waveform> {
    let first = shots.first().ok_or_else(|| Error::InvalidInput("nothing to average".into()))?;
    let mut acc = vec![0.0; first.len()];
    for s in shots {
        first.require_same_grid(s)?;
        for (a, x) in acc.iter_mut().zip(&s.samples) {
            *a += x;
        }
    }
    let n = shots.len() as f64;
    Ok(Waveform {
        samples: acc.into_iter().map(|a| a / n).collect(),
        ..first.clone()
    })
}

/// Magnetization from EMF: subtract the baseline mean, integrate
/// cumulatively (trapezoid) and scale by −c.
pub fn integrate_emf(emf: &Waveform, coefficient: f64, baseline: Range<usize>) -> Result<Waveform> {
    emf.validate()?;
    if emf.unit != WaveUnit::Volt {
        return Err(Error::InvalidInput(format!("expected EMF in volt, got {}", emf.unit)));
    }
    if baseline.is_empty() || baseline.end > emf.len() {
        return Err(Error::InvalidInput(format!(
            "baseline window {baseline:?} is empty or outside the {} samples",
            emf.len()
        )));
    }
    let offset = emf.samples[baseline.clone()].iter().sum::<f64>() / baseline.len() as f64;
    let mut out = Vec::with_capacity(emf.len());
    let mut acc = 0.0;
    let mut prev = emf.samples[0] - offset;
    out.push(0.0);
    for &x in &emf.samples[1..] {
        let cur = x - offset;
        acc += 0.5 * (prev + cur) * emf.dt;
        out.push(-coefficient * acc);
        prev = cur;
    }
    let mut w = Waveform { t0: emf.t0, dt: emf.dt, samples: out, unit: WaveUnit::AmperePerMeter, meta: emf.meta.clone() };
    w.meta.insert("coupling_coefficient".into(), format!("{coefficient:e}"));
    Ok(w)
}

/// Adds zero-mean Gaussian noise at the given signal-to-noise ratio (dB,
/// relative to the signal RMS). `+∞` leaves the waveform untouched.
pub fn add_noise(wave: &Waveform, snr_db: f64, seed: u64) -> Result<Waveform> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidInput(format!("invalid SNR {snr_db} dB")));
    }
    if snr_db == f64::INFINITY {
        return Ok(wave.clone());
    }
    let sigma = wave.rms() / 10f64.powf(snr_db / 20.0);
    let mut out = wave.clone();
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in &mut out.samples {
            *x += normal.sample(&mut rng);
        }
    }
    out.meta.insert("snr_db".into(), snr_db.to_string());
    out.meta.insert("noise_seed".into(), seed.to_string());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wave(samples: Vec<f64>) -> Waveform {
        Waveform::new(-2e-9, 1e-11, samples, WaveUnit::Volt).unwrap()
    }

    fn ramp(n: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..n).map(f).collect()
    }

    #[test]
    fn common_mode_cancels() {
        let s = ramp(50, |i| (i as f64 * 0.3).sin());
        let b = ramp(50, |i| 0.7 + i as f64 * 1e-3);
        let plus = wave(s.iter().zip(&b).map(|(s, b)| s + b).collect());
        let minus = wave(s.iter().zip(&b).map(|(s, b)| -s + b).collect());
        let d = difference_protocol(&plus, &minus, "rotation").unwrap();
        for (x, y) in d.samples.iter().zip(&s) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(d.meta["differenced"], "rotation");
        let z = difference_protocol(&plus, &plus, "rotation").unwrap();
        assert!(z.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = wave(vec![1.0; 10]);
        let b = Waveform::new(0.0, 1e-11, vec![1.0; 10], WaveUnit::Volt).unwrap();
        assert!(difference_protocol(&a, &b, "b").is_err());
        let c = wave(vec![1.0; 11]);
        assert!(difference_protocol(&a, &c, "b").is_err());
    }

    #[test]
    fn swapped_difference_negates() {
        let a = wave(ramp(20, |i| i as f64 * 0.37));
        let b = wave(ramp(20, |i| (i as f64).cos()));
        let ab = difference_protocol(&a, &b, "x").unwrap();
        let ba = difference_protocol(&b, &a, "x").unwrap();
        for (x, y) in ab.samples.iter().zip(&ba.samples) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn zero_emf_integrates_to_zero() {
        let m = integrate_emf(&wave(vec![0.0; 100]), 3.0, 0..10).unwrap();
        assert!(m.samples.iter().all(|&x| x == 0.0));
        assert_eq!(m.unit, WaveUnit::AmperePerMeter);
    }

    #[test]
    fn baseline_offset_removed() {
        let m = integrate_emf(&wave(vec![4.2e-3; 100]), 3.0, 0..100).unwrap();
        assert!(m.samples.iter().all(|&x| x.abs() < 1e-25));
    }

    #[test]
    fn empty_baseline_rejected() {
        assert!(integrate_emf(&wave(vec![1.0; 10]), 1.0, 0..0).is_err());
        assert!(integrate_emf(&wave(vec![1.0; 10]), 1.0, 5..20).is_err());
    }

    #[test]
    fn default_baseline_is_pre_trigger() {
        let w = wave(vec![0.0; 400]);
        assert_eq!(w.range_before(DEFAULT_BASELINE_END), 0..100);
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let w = wave(ramp(500, |i| (i as f64 * 0.1).sin()));
        assert_eq!(add_noise(&w, 20.0, 7).unwrap(), add_noise(&w, 20.0, 7).unwrap());
        assert_ne!(add_noise(&w, 20.0, 7).unwrap().samples, add_noise(&w, 20.0, 8).unwrap().samples);
        assert_eq!(add_noise(&w, f64::INFINITY, 7).unwrap(), w);
        assert!(add_noise(&w, f64::NAN, 7).is_err());
    }

    #[test]
    fn noise_rms_matches_snr() {
        let w = wave(ramp(20_000, |i| (i as f64 * 0.05).sin()));
        let noisy = add_noise(&w, 20.0, 1).unwrap();
        let resid: f64 = noisy.samples.iter().zip(&w.samples).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let rms = (resid / w.len() as f64).sqrt();
        assert!((rms / (w.rms() / 10.0) - 1.0).abs() < 0.03);
    }

    #[test]
    fn averaging_shots_reduces_noise() {
        let clean = wave(ramp(2000, |i| (i as f64 * 0.02).sin()));
        let shots: Vec<Waveform> = (0..1000).map(|s| add_noise(&clean, 10.0, s).unwrap()).collect();
        let single: f64 = shots[0].samples.iter().zip(&clean.samples).map(|(a, b)| (a - b).powi(2)).sum();
        let avg = average(&shots).unwrap();
        let averaged: f64 = avg.samples.iter().zip(&clean.samples).map(|(a, b)| (a - b).powi(2)).sum();
        let ratio = (single / averaged).sqrt();
        assert!((ratio / 1000f64.sqrt() - 1.0).abs() < 0.1, "reduction {ratio}");
    }

    #[test]
    fn csv_round_trip_keeps_meta() {
        let w = wave(ramp(30, |i| i as f64 * 1e-4)).with_meta("N", 71).with_meta("B_T", 1.0).with_meta("sense", "+");
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# unit=volt\n"));
        assert!(text.contains("# N=71\n") && text.contains("time_s,value\n"));
        let back = Waveform::read_csv(&buf[..]).unwrap();
        assert_eq!(back.meta, w.meta);
        assert_eq!(back.samples, w.samples);
        assert!((back.dt - w.dt).abs() < 1e-20);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let bad = "# unit=volt\ntime_s,value\n0,1\n1e-11,x\n";
        assert!(matches!(Waveform::read_csv(bad.as_bytes()), Err(Error::Parse { line: 4, .. })));
        let uneven = "time_s,value\n0,1\n1,1\n3,1\n";
        assert!(Waveform::read_csv(uneven.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn integration_is_linear(
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
            e1 in proptest::collection::vec(-1.0f64..1.0, 64),
            e2 in proptest::collection::vec(-1.0f64..1.0, 64),
        ) {
            let w1 = wave(e1.clone());
            let w2 = wave(e2.clone());
            let combo = wave(e1.iter().zip(&e2).map(|(x, y)| a * x + b * y).collect());
            let i1 = integrate_emf(&w1, 2.5, 0..8).unwrap();
            let i2 = integrate_emf(&w2, 2.5, 0..8).unwrap();
            let ic = integrate_emf(&combo, 2.5, 0..8).unwrap();
            let scale = i1.samples.iter().chain(&i2.samples).fold(1e-30f64, |m, x| m.max(x.abs())) * (a.abs() + b.abs() + 1.0);
            for k in 0..64 {
                let expect = a * i1.samples[k] + b * i2.samples[k];
                prop_assert!((ic.samples[k] - expect).abs() <= 1e-12 * scale);
            }
        }
    }
}
