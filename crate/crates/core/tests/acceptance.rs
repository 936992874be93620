//! Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use spinmag::coil::{dipole_flux, emf_from_magnetization, CoilGeometry, SampleModel, coupling_coefficient, X_HAT, Y_HAT, Z_HAT};
use spinmag::dynamics::{
    boltzmann_imbalance, longitudinal_fieldfree_moment, longitudinal_trace_infield, number_density, quadrature_lag,
    refine_peak, transverse_moment, transverse_trace, GasConditions, TimeGrid, TraceParameters,
};
use spinmag::fit::{fit_emf, initial_guess, synthesize_model, ModelParams, FitOptions};
use spinmag::spectrum::{frequencies_approximate, frequencies_exact, oracle, RotorFieldConfig};
use spinmag::units::{MolecularConstants, CODATA};
use spinmag::waveform::{add_noise, difference_protocol, integrate_emf, WaveUnit, Waveform};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn o2() -> MolecularConstants {
    MolecularConstants::oxygen()
}

fn gas(bar: f64) -> GasConditions {
    GasConditions::from_bar(bar, 295.0, 0.04).unwrap()
}

fn c1_quarter_period() -> Outcome {
    let f = frequencies_approximate(&o2(), &RotorFieldConfig::new(89, 1.0)).unwrap();
    let q = f.quarter_period_plus();
    outcome(((q - 0.8e-9) / 0.8e-9).abs() <= 0.03, format!("quarter period {:.4} ns", q * 1e9))
}

fn c2_peak_bound() -> Outcome {
    let c = o2();
    let f = frequencies_approximate(&c, &RotorFieldConfig::new(89, 1.0)).unwrap();
    let p = TraceParameters::precession(c.spin_moment() / 3.0, f64::INFINITY, f);
    let period = std::f64::consts::TAU / f.omega_plus;
    let grid = TimeGrid::new(0.0, period / 200.0, 400).unwrap();
    let trace = transverse_trace(&c, &p, &gas(0.5), &grid).unwrap();
    let sampled = trace.transverse_bohr().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let peak = refine_peak(|t| transverse_moment(&p, t), &grid).value / CODATA.mu_b;
    let target = 2.0 / 3.0 * c.g_factor.abs();
    let ok = ((peak - target) / target).abs() <= 1e-6 && sampled <= target * (1.0 + 1e-12);
    outcome(ok, format!("peak {peak:.8} µB, bound {target:.8} µB"))
}

fn c3_flux_density() -> Outcome {
    let m = number_density(&gas(0.5)) * 0.65 * CODATA.mu_b;
    let mg = CODATA.mu_0 * m * 1e7;
    outcome((36.0..=40.0).contains(&mg), format!("µ0·M⊥ = {mg:.3} mG"))
}

fn c4_boltzmann() -> Outcome {
    let b = boltzmann_imbalance(33, 295.0, &o2()).unwrap();
    outcome((0.002..=0.004).contains(&b), format!("tanh(ΔE/kT) = {b:.6}"))
}

fn c5_density() -> Outcome {
    let n = number_density(&gas(1.0)) * 1e-6;
    outcome(n >= 6e17, format!("n_c = {n:.4e} cm⁻³"))
}

fn c6_oracle() -> Outcome {
    let c = o2();
    let mut worst = 0.0f64;
    for n in [1, 3, 5, 7, 9] {
        for b in [0.0, 0.1, 0.5, 1.0] {
            worst = worst.max(oracle::max_relative_deviation(&c, &RotorFieldConfig::new(n, b)).unwrap());
        }
    }
    outcome(worst <= 1e-10, format!("max relative deviation {worst:.2e}"))
}

fn c7_lande_limit() -> Outcome {
    let c = o2();
    let n = 71.0;
    let low = frequencies_exact(&c, &RotorFieldConfig::new(71, 0.01)).unwrap();
    let w = CODATA.mu_b * c.g_factor.abs() * 0.01 / CODATA.hbar;
    let (dp, dm) = ((low.omega_plus / (w / (n + 1.0)) - 1.0).abs(), (low.omega_minus / (w / n) - 1.0).abs());
    let high = frequencies_exact(&c, &RotorFieldConfig::new(71, 1.0)).unwrap();
    let split = (high.omega_plus - high.omega_minus).abs() / high.omega_plus.max(high.omega_minus);
    outcome(
        dp <= 2e-3 && dm <= 2e-3 && split >= 5e-3,
        format!("0.01 T deviations {:.3}% / {:.3}%, 1 T split {:.2}%", dp * 100.0, dm * 100.0, split * 100.0),
    )
}

fn c8_field_scaling() -> Outcome {
    let c = o2();
    let full = frequencies_exact(&c, &RotorFieldConfig::new(71, 1.0)).unwrap();
    let half = frequencies_exact(&c, &RotorFieldConfig::new(71, 0.5)).unwrap();
    let (rp, rm) = (full.omega_plus / half.omega_plus, full.omega_minus / half.omega_minus);
    let ok = ((rp - 2.0) / 2.0).abs() <= 0.05 && ((rm - 2.0) / 2.0).abs() <= 0.05;
    outcome(ok, format!("Ω(1 T)/Ω(0.5 T) = {rp:.4} (+1), {rm:.4} (−1)"))
}

fn c9_fit() -> Outcome {
    let c = o2();
    let cases = [(43, 1.8e-9, 0.4e-9), (61, 2.4e-9, 0.4e-9), (71, 3.1e-9, 0.6e-9)];
    let (t0, dt, len) = (-2e-9, 1e-11, 1701);
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, tau, bar) in cases {
        let f = frequencies_exact(&c, &RotorFieldConfig::new(n, 1.0)).unwrap();
        let truth = ModelParams::new(1.0, tau, &f);
        let clean = synthesize_model(&truth, t0, dt, len).unwrap();
        let seed = ModelParams { amplitude: 0.8, tau: 1.2 * tau, ..truth };
        let fit = fit_emf(&clean, &seed, &FitOptions::default()).unwrap();
        let (ea, et) = ((fit.amplitude - 1.0).abs(), (fit.tau / tau - 1.0).abs());
        ok &= fit.converged && ea <= 1e-6 && et <= 1e-6;

        let hits: usize = (0..200u64)
            .into_par_iter()
            .map(|s| {
                let noisy = add_noise(&clean, 20.0, s).unwrap();
                let guess = initial_guess(&noisy).map(|g| ModelParams { omega_plus: f.omega_plus, omega_minus: f.omega_minus, ..g });
                let seed = guess.unwrap_or(seed);
                match fit_emf(&noisy, &seed, &FitOptions::default()) {
                    Ok(r) if r.converged && (r.tau - tau).abs() <= bar => 1,
                    _ => 0,
                }
            })
            .sum();
        ok &= hits >= 180;
        notes.push(format!("N={n}: dA {ea:.1e}, dτ {et:.1e}, {hits}/200 within ±{:.1} ns", bar * 1e9));
    }
    outcome(ok, notes.join("; "))
}

fn c10_protocol() -> Outcome {
    let len = 500;
    let wave = |f: &dyn Fn(f64) -> f64| {
        Waveform::new(-1e-9, 1e-11, (0..len).map(|i| f(i as f64 * 0.037)).collect(), WaveUnit::Volt).unwrap()
    };
    let s = |x: f64| (x * 1.3).sin() * (-x / 7.0).exp();
    let u = |x: f64| 0.7 * (x * 0.4).cos();
    let v = |x: f64| 0.3 * x.sqrt();
    let w = |x: f64| 5.0 + 0.01 * x * x;
    // shot(r, b) = r·b·s + r·u + b·v + w
    let shot = |r: f64, b: f64| wave(&|x| r * b * s(x) + r * u(x) + b * v(x) + w(x));
    let by_b = |b: f64| difference_protocol(&shot(1.0, b), &shot(-1.0, b), "sense").unwrap();
    let isolated = difference_protocol(&by_b(1.0), &by_b(-1.0), "B").unwrap();
    let truth = wave(&s);
    let scale = truth.samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let err = isolated.samples.iter().zip(&truth.samples).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
    outcome(err <= 1e-12, format!("max relative error {err:.2e}"))
}

fn c11_coil() -> Outcome {
    let r = 0.6e-3;
    let coil = CoilGeometry::circular(r);
    let axial = dipole_flux(&coil, [0.0; 3], X_HAT).unwrap().value;
    let exact = CODATA.mu_0 / (2.0 * r);
    let rel = (axial / exact - 1.0).abs();
    let in_plane = [Y_HAT, Z_HAT].iter().map(|m| dipole_flux(&coil, [0.0; 3], *m).unwrap().value.abs()).fold(0.0, f64::max);
    outcome(rel <= 1e-6 && in_plane < 1e-12 * axial, format!("axial rel error {rel:.2e}, in-plane ratio {:.2e}", in_plane / axial))
}

fn c12_round_trip() -> Outcome {
    let c = o2();
    let f = frequencies_exact(&c, &RotorFieldConfig::new(71, 1.0)).unwrap();
    let p = TraceParameters::precession(c.spin_moment() / 3.0, 3.1e-9, f);
    let grid = TimeGrid::new(-2e-9, 17e-9 / 1e4, 10_000).unwrap();
    let trace = transverse_trace(&c, &p, &gas(0.5), &grid).unwrap();
    let coil = CoilGeometry::transverse_default();
    let sample = SampleModel::default();
    let emf = emf_from_magnetization(&trace, &coil, &sample).unwrap();
    let cc = coupling_coefficient(&coil, &sample, Y_HAT).unwrap();
    let m = integrate_emf(&emf, cc.coefficient, emf.range_before(-1e-9)).unwrap();
    let rms = |v: &mut dyn Iterator<Item = f64>| {
        let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
        (s / n as f64).sqrt()
    };
    let err = rms(&mut m.samples.iter().zip(&trace.transverse).map(|(a, b)| a - b)) / rms(&mut trace.transverse.iter().copied());
    outcome(err <= 1e-3, format!("relative RMS error {err:.2e} on {} points", grid.len))
}

fn c13_two_rate() -> Outcome {
    let c = o2();
    let tau_minus = 1.0e-9;
    let tau_plus = 1.5 * tau_minus;
    let mut p = TraceParameters::precession(0.0, 1e-9, spinmag::spectrum::PrecessionFrequencies::degenerate(0.0, spinmag::spectrum::FrequencyMethod::Approximate));
    p.tau_plus = Some(tau_plus);
    p.tau_minus = Some(tau_minus);
    p.rise_time = 1e-18;
    let grid = TimeGrid::span(0.0, 10e-9, 1e-12).unwrap();
    let peak = refine_peak(|t| longitudinal_fieldfree_moment(&p, &c, 0.0, t).unwrap(), &grid);
    // closed form: maximum at t* = 3 τ₋ ln 1.5 with value (|g|µB/3)(1.5⁻² − 1.5⁻³)
    let closed = c.spin_moment() / 3.0 * (1.5f64.powi(-2) - 1.5f64.powi(-3));
    let t_star = 3.0 * tau_minus * 1.5f64.ln();
    let rel = (peak.value / closed - 1.0).abs();
    let bohr = peak.value / CODATA.mu_b;
    let ok = rel <= 1e-6 && (peak.time - t_star).abs() <= 1e-3 * t_star && (0.08..=0.32).contains(&bohr);
    outcome(ok, format!("peak {bohr:.6} µB at {:.4} ns, closed-form rel error {rel:.1e}", peak.time * 1e9))
}

fn c14_phase() -> Outcome {
    let c = o2();
    let f = frequencies_exact(&c, &RotorFieldConfig::new(71, 1.0)).unwrap();
    let p = TraceParameters::precession(c.spin_moment() / 3.0, 3.1e-9, f);
    let grid = TimeGrid::span(-2e-9, 15e-9, 1e-11).unwrap();
    let lon = longitudinal_trace_infield(&c, &p, &gas(0.5), &grid).unwrap();
    let tra = transverse_trace(&c, &p, &gas(0.5), &grid).unwrap();
    let omega = 0.5 * (f.omega_plus + f.omega_minus);
    let (lag, quarter) = quadrature_lag(&lon.longitudinal, &tra.transverse, &grid, 5.0 * p.rise_time, omega);
    outcome((lag as f64 - quarter).abs() <= 1.0, format!("lag {lag} samples, quarter period {quarter:.2} samples"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 14] = [
        ("quarter period at N=89, 1 T", c1_quarter_period, Duration::from_secs(1)),
        ("peak transverse moment bound", c2_peak_bound, Duration::from_secs(1)),
        ("flux density at 0.5 bar", c3_flux_density, Duration::from_secs(1)),
        ("Boltzmann factor at N=33", c4_boltzmann, Duration::from_secs(1)),
        ("number density at 1 bar", c5_density, Duration::from_secs(1)),
        ("spectrum vs uncoupled brute force", c6_oracle, Duration::from_secs(30)),
        ("Landé limit and high-field split", c7_lande_limit, Duration::from_secs(10)),
        ("field scaling 1 T to 0.5 T at N=71", c8_field_scaling, Duration::from_secs(10)),
        ("fit self-inversion and noise coverage", c9_fit, Duration::from_secs(300)),
        ("four-shot protocol algebra", c10_protocol, Duration::from_secs(1)),
        ("coil flux oracle", c11_coil, Duration::from_secs(10)),
        ("EMF round trip", c12_round_trip, Duration::from_secs(5)),
        ("two-rate longitudinal peak", c13_two_rate, Duration::from_secs(1)),
        ("quarter-period phase lag", c14_phase, Duration::from_secs(5)),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= *budget;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2}: {} {name}: {} [{:.3} s of {} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
