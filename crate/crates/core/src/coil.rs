//! Pickup-coil geometry, dipole-to-coil flux coupling and EMF synthesis.
//!
//! Coordinates: x̂ is the beam axis, ẑ the applied field, ŷ completes the
//! right-handed frame. A coil is a filamentary ellipse whose normal lies in
//! the x–y plane at angle α from x̂; its semi-axis `a` lies in the x–y plane
//! and `b` along ẑ.
//!
//! Flux is computed as the circulation of the dipole vector potential
//! around the wire, Φ = ∮ A·dl with A = µ0/(4π) m × r / r³, which stays
//! finite for dipoles lying inside the coil plane. The flat-surface
//! integral of B·n is kept as an independent route for off-plane dipoles.

use serde::{Deserialize, Serialize};

use crate::dynamics::{MagnetizationTrace, TimeGrid};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadResult};
use crate::units::CODATA;
use crate::waveform::{WaveUnit, Waveform};

pub type Vec3 = [f64; 3];

/// Relative tolerance of the flux quadrature.
pub const FLUX_REL_TOL: f64 = 1e-8;
const MAX_SEGMENTS: usize = 4000;
/// Dipoles closer than this to the wire (line route) or to the coil plane
/// (surface route) are rejected as singular.
pub const SINGULAR_DISTANCE: f64 = 1e-9;

pub const X_HAT: Vec3 = [1.0, 0.0, 0.0];
pub const Y_HAT: Vec3 = [0.0, 1.0, 0.0];
pub const Z_HAT: Vec3 = [0.0, 0.0, 1.0];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(p: Vec3, s: f64, d: Vec3) -> Vec3 {
    [p[0] + s * d[0], p[1] + s * d[1], p[2] + s * d[2]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoilShape {
    Circular,
    Elliptical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisAlignment {
    /// Normal along the beam; senses M∥.
    Longitudinal,
    /// Normal tilted towards ŷ; senses M⊥.
    TransverseTilted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoilGeometry {
    pub shape: CoilShape,
    /// Semi-axis in the x–y plane (m).
    pub semi_axis_a: f64,
    /// Semi-axis along ẑ (m).
    pub semi_axis_b: f64,
    /// Angle between the coil normal and x̂ (rad).
    pub tilt_alpha: f64,
    pub turns: u32,
    /// Coil center relative to the sample centroid (m).
    pub center_offset: Vec3,
    pub axis_alignment: AxisAlignment,
}

impl CoilGeometry {
    /// Circular coil of 1.2 mm diameter coaxial with the beam.
    pub fn longitudinal_default() -> Self {
        Self {
            shape: CoilShape::Circular,
            semi_axis_a: 0.6e-3,
            semi_axis_b: 0.6e-3,
            tilt_alpha: 0.0,
            turns: 1,
            center_offset: [0.0; 3],
            axis_alignment: AxisAlignment::Longitudinal,
        }
    }

    /// Elliptical 0.93 × 3.8 mm² coil tilted by 59°.
    pub fn transverse_default() -> Self {
        Self {
            shape: CoilShape::Elliptical,
            semi_axis_a: 1.9e-3,
            semi_axis_b: 0.465e-3,
            tilt_alpha: 59f64.to_radians(),
            turns: 1,
            center_offset: [0.0; 3],
            axis_alignment: AxisAlignment::TransverseTilted,
        }
    }

    pub fn circular(radius: f64) -> Self {
        Self { semi_axis_a: radius, semi_axis_b: radius, ..Self::longitudinal_default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.semi_axis_a > 0.0 && self.semi_axis_b > 0.0) {
            return Err(Error::InvalidInput("coil semi-axes must be > 0".into()));
        }
        if self.shape == CoilShape::Circular && self.semi_axis_a != self.semi_axis_b {
            return Err(Error::InvalidInput("circular coil needs equal semi-axes".into()));
        }
        if self.turns < 1 {
            return Err(Error::InvalidInput("coil needs at least one turn".into()));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.tilt_alpha) {
            return Err(Error::InvalidInput(format!("tilt {} rad outside [0, π/2)", self.tilt_alpha)));
        }
        if self.center_offset.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("coil offset must be finite".into()));
        }
        Ok(())
    }

    /// (normal, in-plane axis of `a`, in-plane axis of `b`).
    pub fn frame(&self) -> (Vec3, Vec3, Vec3) {
        let (s, c) = self.tilt_alpha.sin_cos();
        ([c, s, 0.0], [-s, c, 0.0], Z_HAT)
    }

    pub fn normal(&self) -> Vec3 {
        self.frame().0
    }

    /// Magnetization component this coil is meant to sense.
    pub fn moment_axis(&self) -> Vec3 {
        match self.axis_alignment {
            AxisAlignment::Longitudinal => X_HAT,
            AxisAlignment::TransverseTilted => Y_HAT,
        }
    }

    fn boundary(&self, theta: f64) -> (Vec3, Vec3) {
        let (_, u, v) = self.frame();
        let (s, c) = theta.sin_cos();
        let p = axpy(axpy(self.center_offset, self.semi_axis_a * c, u), self.semi_axis_b * s, v);
        let tangent = axpy(axpy([0.0; 3], -self.semi_axis_a * s, u), self.semi_axis_b * c, v);
        (p, tangent)
    }

    /// Distance from `r` to the wire, by dense sampling of the ellipse.
    fn wire_distance(&self, r: Vec3) -> f64 {
        (0..4096)
            .map(|k| norm(sub(self.boundary(k as f64 * std::f64::consts::TAU / 4096.0).0, r)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Magnetized sample as weighted point dipoles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleModel {
    pub dipole_positions: Vec<Vec3>,
    /// Non-negative, summing to 1.
    pub weights: Vec<f64>,
    /// Magnetized column length along the beam (m).
    pub extent: f64,
    /// Radius of the magnetized column (m).
    pub radius: f64,
}

/// Default magnetized column length (m).
pub const DEFAULT_SAMPLE_EXTENT: f64 = 4.0e-3;
/// Default magnetized column radius (m), set by the focal spot.
pub const DEFAULT_SAMPLE_RADIUS: f64 = 50.0e-6;
pub const DEFAULT_SAMPLE_POINTS: usize = 11;

impl Default for SampleModel {
    fn default() -> Self {
        Self::line(DEFAULT_SAMPLE_EXTENT, DEFAULT_SAMPLE_POINTS, DEFAULT_SAMPLE_RADIUS)
            .expect("default sample is valid")
    }
}

impl SampleModel {
    /// `points` equally weighted dipoles spanning `extent` along x̂,
    /// symmetric about the origin.
    pub fn line(extent: f64, points: usize, radius: f64) -> Result<Self> {
        if points == 0 || !(extent >= 0.0) || !(radius > 0.0) {
            return Err(Error::InvalidInput("sample needs >= 1 point, extent >= 0, radius > 0".into()));
        }
        let positions = (0..points)
            .map(|k| {
                let x = if points == 1 { 0.0 } else { extent * (k as f64 / (points - 1) as f64 - 0.5) };
                [x, 0.0, 0.0]
            })
            .collect();
        Ok(Self {
            dipole_positions: positions,
            weights: vec![1.0 / points as f64; points],
            extent,
            radius,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dipole_positions.is_empty() || self.dipole_positions.len() != self.weights.len() {
            return Err(Error::InvalidInput("sample positions and weights must match and be non-empty".into()));
        }
        if self.weights.iter().any(|&w| w < 0.0) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("sample weights must be >= 0 and sum to 1".into()));
        }
        Ok(())
    }

    /// Volume converting total moment to magnetization: π r² × extent.
    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius * self.extent
    }
}

/// Flux through one turn from a point dipole `moment` at `position`, by the
/// vector-potential circulation.
pub fn dipole_flux(coil: &CoilGeometry, position: Vec3, moment: Vec3) -> Result<QuadResult> {
    dipole_flux_tol(coil, position, moment, FLUX_REL_TOL)
}

/// [`dipole_flux`] at an explicit relative tolerance.
pub fn dipole_flux_tol(coil: &CoilGeometry, position: Vec3, moment: Vec3, rel_tol: f64) -> Result<QuadResult> {
    coil.validate()?;
    if coil.wire_distance(position) < SINGULAR_DISTANCE {
        return Err(Error::SingularConfiguration(format!("dipole at {position:?} lies on the coil wire")));
    }
    let pref = CODATA.mu_0 / (4.0 * std::f64::consts::PI);
    let scale = pref * norm(moment) / coil.semi_axis_a.min(coil.semi_axis_b);
    let integrand = |theta: f64| {
        let (p, tangent) = coil.boundary(theta);
        let r = sub(p, position);
        let d = norm(r);
        pref * dot(cross(moment, r), tangent) / (d * d * d)
    };
    integrate(integrand, 0.0, std::f64::consts::TAU, rel_tol, 1e-14 * scale, MAX_SEGMENTS)
}

/// Point-dipole field B(r) = µ0/(4π) [3(m·r̂)r̂ − m]/r³.
pub fn dipole_field(position: Vec3, moment: Vec3, at: Vec3) -> Vec3 {
    let r = sub(at, position);
    let d = norm(r);
    let mr = dot(moment, r);
    let pref = CODATA.mu_0 / (4.0 * std::f64::consts::PI);
    let d3 = d * d * d;
    let d5 = d3 * d * d;
    [
        pref * (3.0 * mr * r[0] / d5 - moment[0] / d3),
        pref * (3.0 * mr * r[1] / d5 - moment[1] / d3),
        pref * (3.0 * mr * r[2] / d5 - moment[2] / d3),
    ]
}

/// Flux through the flat elliptical surface by nested adaptive quadrature of
/// B·n. Dipoles in the coil plane make this integral singular.
pub fn dipole_flux_surface(coil: &CoilGeometry, position: Vec3, moment: Vec3) -> Result<QuadResult> {
    coil.validate()?;
    let (n, u, v) = coil.frame();
    let height = dot(sub(position, coil.center_offset), n);
    if height.abs() < SINGULAR_DISTANCE {
        return Err(Error::SingularConfiguration(format!(
            "dipole at {position:?} lies in the coil plane (distance {height:e} m)"
        )));
    }
    let (a, b) = (coil.semi_axis_a, coil.semi_axis_b);
    let mut inner_error = 0.0;
    let mut failure = None;
    let outer = integrate(
        |theta: f64| {
            let (s, c) = theta.sin_cos();
            let radial = integrate(
                |rho: f64| {
                    let at = axpy(axpy(coil.center_offset, rho * a * c, u), rho * b * s, v);
                    dot(dipole_field(position, moment, at), n) * a * b * rho
                },
                0.0,
                1.0,
                FLUX_REL_TOL * 1e-2,
                0.0,
                MAX_SEGMENTS,
            );
            match radial {
                Ok(r) => {
                    inner_error += r.error;
                    r.value
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        std::f64::consts::TAU,
        FLUX_REL_TOL,
        0.0,
        MAX_SEGMENTS,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(outer)
}

/// Flux per unit total moment along `axis`, summed over the sample dipoles.
pub fn flux_per_unit_moment(coil: &CoilGeometry, sample: &SampleModel, axis: Vec3) -> Result<QuadResult> {
    flux_per_unit_moment_tol(coil, sample, axis, FLUX_REL_TOL)
}

pub fn flux_per_unit_moment_tol(coil: &CoilGeometry, sample: &SampleModel, axis: Vec3, rel_tol: f64) -> Result<QuadResult> {
    sample.validate()?;
    let len = norm(axis);
    if !(len > 0.0) {
        return Err(Error::InvalidInput("moment axis must be non-zero".into()));
    }
    let unit = [axis[0] / len, axis[1] / len, axis[2] / len];
    let mut total = QuadResult { value: 0.0, error: 0.0 };
    for (p, &w) in sample.dipole_positions.iter().zip(&sample.weights) {
        if w == 0.0 {
            continue;
        }
        let m = [unit[0] * w, unit[1] * w, unit[2] * w];
        let q = dipole_flux_tol(coil, *p, m, rel_tol)?;
        total.value += q.value;
        total.error += q.error;
    }
    Ok(total)
}

/// Coupling coefficient of `M = −c ∫ E dt` with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingCoefficient {
    /// c in (A/m) per (V·s).
    pub coefficient: f64,
    /// Absolute error estimate of c from the flux quadrature.
    pub error_estimate: f64,
    /// Flux per unit moment along the axis (Wb per A·m²).
    pub flux_per_unit_moment: f64,
    pub volume: f64,
    pub turns: u32,
    pub moment_axis: Vec3,
}

/// c = 1/(turns · Φ_unit · V).
pub fn coupling_coefficient(coil: &CoilGeometry, sample: &SampleModel, moment_axis: Vec3) -> Result<CouplingCoefficient> {
    let flux = flux_per_unit_moment(coil, sample, moment_axis)?;
    let volume = sample.volume();
    if !(volume > 0.0) {
        return Err(Error::InvalidInput("sample volume must be > 0 for a coupling coefficient".into()));
    }
    if flux.value.abs() <= flux.error {
        return Err(Error::SingularConfiguration(format!(
            "flux {:e} Wb is below its error estimate {:e}; the coil does not sense this axis",
            flux.value, flux.error
        )));
    }
    let c = 1.0 / (coil.turns as f64 * flux.value * volume);
    Ok(CouplingCoefficient {
        coefficient: c,
        error_estimate: c.abs() * flux.error / flux.value.abs(),
        flux_per_unit_moment: flux.value,
        volume,
        turns: coil.turns,
        moment_axis,
    })
}

/// Central-difference derivative, one-sided at the ends.
fn derivative(samples: &[f64], dt: f64) -> Vec<f64> {
    let n = samples.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| match i {
            0 => (samples[1] - samples[0]) / dt,
            i if i == n - 1 => (samples[n - 1] - samples[n - 2]) / dt,
            i => (samples[i + 1] - samples[i - 1]) / (2.0 * dt),
        })
        .collect()
}

/// EMF induced by a magnetization trace: E = −turns · V · Σ Φ_axis dM_axis/dt,
/// with M∥ along x̂ and M⊥ along ŷ. The rates come from central differences.
pub fn emf_from_magnetization(trace: &MagnetizationTrace, coil: &CoilGeometry, sample: &SampleModel) -> Result<Waveform> {
    let dt = trace.grid.dt;
    emf_from_rates(
        &trace.grid,
        &derivative(&trace.longitudinal, dt),
        &derivative(&trace.transverse, dt),
        trace.max_omega,
        coil,
        sample,
    )
}

/// EMF from known magnetization rates dM∥/dt and dM⊥/dt (A/(m·s)).
/// Rejects grids with fewer than eight samples per period of `max_omega`.
pub fn emf_from_rates(
    grid: &TimeGrid,
    longitudinal_rate: &[f64],
    transverse_rate: &[f64],
    max_omega: f64,
    coil: &CoilGeometry,
    sample: &SampleModel,
) -> Result<Waveform> {
    let dt = grid.dt;
    if max_omega > 0.0 {
        let bound = std::f64::consts::TAU / (8.0 * max_omega);
        if dt > bound {
            return Err(Error::Undersampled { dt, bound });
        }
    }
    if longitudinal_rate.len() != grid.len || transverse_rate.len() != grid.len {
        return Err(Error::InvalidInput("rate vectors must match the grid length".into()));
    }
    let scale = coil.turns as f64 * sample.volume();
    let mut emf = vec![0.0; grid.len];
    for (axis, channel) in [(X_HAT, longitudinal_rate), (Y_HAT, transverse_rate)] {
        if channel.iter().all(|&m| m == 0.0) {
            continue;
        }
        let phi = flux_per_unit_moment(coil, sample, axis)?.value;
        for (e, d) in emf.iter_mut().zip(channel) {
            *e -= scale * phi * d;
        }
    }
    Waveform::new(grid.t0, dt, emf, WaveUnit::Volt)
}
