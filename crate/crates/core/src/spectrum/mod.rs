//! Spin-rotation Hamiltonian of a triplet Hund's-case-(b) rotor in a static
//! magnetic field, block-diagonalized in the total projection m.
//!
//! H = γ N·S − λ (N·S)² / (N(N+1)) − g µB S·B, with B along z and S = 1.
//! In the coupled basis |(N S) J m⟩, N·S is diagonal with eigenvalue
//! [J(J+1) − N(N+1) − 2]/2 and the Zeeman term only connects ΔJ = 0, ±1,
//! so every m-block is at most 3×3.

pub mod oracle;

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::spin_z_coupled;
use crate::eigen::jacobi_eigen;
use crate::error::{Error, Result};
use crate::units::{joule_to_ghz, MolecularConstants, CODATA};

const SPIN: i64 = 1;
const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 64;
/// Largest field increment (T) between adiabatic tracking samples.
pub const TRACKING_STEP_TESLA: f64 = 0.01;

/// Rotational level and applied field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotorFieldConfig {
    /// Rotational quantum number N.
    pub n: u32,
    /// Field magnitude (T), along +z unless `inverted`.
    pub b_tesla: f64,
    #[serde(default)]
    pub inverted: bool,
}

impl RotorFieldConfig {
    pub fn new(n: u32, b_tesla: f64) -> Self {
        Self { n, b_tesla, inverted: false }
    }

    /// Checks the invariants. Returns non-fatal warnings (even N is
    /// unphysical for ¹⁶O₂ but still computable).
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.n < 1 {
            return Err(Error::InvalidInput("rotational quantum number N must be >= 1".into()));
        }
        if !self.b_tesla.is_finite() || self.b_tesla < 0.0 {
            return Err(Error::InvalidInput(format!(
                "field magnitude must be finite and >= 0, got {}",
                self.b_tesla
            )));
        }
        let mut warnings = Vec::new();
        if self.n % 2 == 0 {
            warnings.push(format!("N = {} is even; only odd N exist in 16O2", self.n));
        }
        Ok(warnings)
    }

    /// Signed z component of the field.
    pub fn field_z(&self) -> f64 {
        if self.inverted {
            -self.b_tesla
        } else {
            self.b_tesla
        }
    }

    fn with_field_z(&self, bz: f64) -> Self {
        Self { n: self.n, b_tesla: bz.abs(), inverted: bz < 0.0 }
    }
}

/// Fine-structure branch, labelled by the spin projection on N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// S_N = +1, J = N + 1.
    Plus,
    /// S_N = 0, J = N.
    Zero,
    /// S_N = −1, J = N − 1.
    Minus,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::Plus, Branch::Zero, Branch::Minus];

    pub fn spin_projection(self) -> i64 {
        match self {
            Branch::Plus => 1,
            Branch::Zero => 0,
            Branch::Minus => -1,
        }
    }

    /// Total angular momentum J the branch correlates with at zero field.
    pub fn j(self, n: u32) -> i64 {
        n as i64 + self.spin_projection()
    }

    fn from_j(n: u32, j: i64) -> Branch {
        match j - n as i64 {
            1 => Branch::Plus,
            0 => Branch::Zero,
            -1 => Branch::Minus,
            d => unreachable!("J - N = {d} outside the triplet"),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Zero => "zero",
            Branch::Minus => "minus",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Eigenvalue of N·S for total angular momentum `j`.
pub fn n_dot_s(n: u32, j: i64) -> f64 {
    let n = n as i64;
    ((j * (j + 1) - n * (n + 1) - SPIN * (SPIN + 1)) / 2) as f64
}

/// Zero-field energy of a branch (J).
pub fn zero_field_energy(constants: &MolecularConstants, n: u32, branch: Branch) -> f64 {
    let ns = n_dot_s(n, branch.j(n));
    let nn = (n as f64) * (n as f64 + 1.0);
    constants.gamma * ns - constants.lambda * ns * ns / nn
}

/// Coupled-basis J values present in block m, ascending.
pub fn block_basis(n: u32, m: i64) -> Vec<i64> {
    let n = n as i64;
    ((n - 1)..=(n + 1)).filter(|&j| j >= 0 && j >= m.abs()).collect()
}

/// One m-block of the Hamiltonian in the coupled basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianBlock {
    pub m: i64,
    /// Basis labels J, ascending.
    pub basis: Vec<i64>,
    pub matrix: DMatrix<f64>,
}

fn check_projection(n: u32, m: i64) -> Result<()> {
    if m.abs() > n as i64 + 1 {
        return Err(Error::EmptyBlock { m, max: n + 1 });
    }
    Ok(())
}

/// Field-free part of block m: diagonal in J.
pub fn field_free_block(constants: &MolecularConstants, n: u32, m: i64) -> Result<HamiltonianBlock> {
    check_projection(n, m)?;
    let basis = block_basis(n, m);
    let diag: Vec<f64> = basis
        .iter()
        .map(|&j| zero_field_energy(constants, n, Branch::from_j(n, j)))
        .collect();
    let matrix = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    Ok(HamiltonianBlock { m, basis, matrix })
}

/// Zeeman operator −g µB S_z per tesla of B_z, in block m.
pub fn zeeman_block_per_tesla(constants: &MolecularConstants, n: u32, m: i64) -> Result<HamiltonianBlock> {
    check_projection(n, m)?;
    let basis = block_basis(n, m);
    let k = basis.len();
    let scale = -constants.g_factor * CODATA.mu_b;
    let mut matrix = DMatrix::zeros(k, k);
    for r in 0..k {
        for c in r..k {
            let v = scale * spin_z_coupled(n as i64, SPIN, basis[r], basis[c], m);
            matrix[(r, c)] = v;
            matrix[(c, r)] = v;
        }
    }
    Ok(HamiltonianBlock { m, basis, matrix })
}

/// Full Hamiltonian block for projection m.
pub fn build_hamiltonian_block(
    constants: &MolecularConstants,
    config: &RotorFieldConfig,
    m: i64,
) -> Result<HamiltonianBlock> {
    let mut h = field_free_block(constants, config.n, m)?;
    let bz = config.field_z();
    if bz != 0.0 {
        let z = zeeman_block_per_tesla(constants, config.n, m)?;
        h.matrix += z.matrix * bz;
    }
    Ok(h)
}

/// Diagonalized block with branch labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBlock {
    pub m: i64,
    pub basis: Vec<i64>,
    /// Ascending eigenvalues (J).
    pub energies: Vec<f64>,
    /// Branch label of each eigenvalue.
    pub branches: Vec<Branch>,
    /// `weights[k][i]` = |⟨J_i|ψ_k⟩|².
    pub weights: Vec<Vec<f64>>,
    /// Eigenvectors as columns, ordered like `energies`.
    pub vectors: DMatrix<f64>,
}

impl SpectrumBlock {
    pub fn energy(&self, branch: Branch) -> Option<f64> {
        self.branches.iter().position(|&b| b == branch).map(|k| self.energies[k])
    }
}

/// Full spectrum at one (N, B): every m-block, ordered by m.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinRotationSpectrum {
    pub config: RotorFieldConfig,
    pub blocks: Vec<SpectrumBlock>,
}

impl SpinRotationSpectrum {
    pub fn block(&self, m: i64) -> Option<&SpectrumBlock> {
        let n = self.config.n as i64;
        let idx = m + n + 1;
        if idx < 0 {
            return None;
        }
        self.blocks.get(idx as usize).filter(|b| b.m == m)
    }

    pub fn energy(&self, branch: Branch, m: i64) -> Option<f64> {
        self.block(m).and_then(|b| b.energy(branch))
    }

    pub fn total_states(&self) -> usize {
        self.blocks.iter().map(|b| b.energies.len()).sum()
    }

    /// All eigenvalues, ascending.
    pub fn all_energies(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.blocks.iter().flat_map(|b| b.energies.iter().copied()).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// CSV with columns `m,branch,energy_joule,energy_ghz`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,branch,energy_joule,energy_ghz")?;
        for block in &self.blocks {
            for (e, b) in block.energies.iter().zip(&block.branches) {
                writeln!(w, "{},{},{:e},{}", block.m, b, e, joule_to_ghz(*e))?;
            }
        }
        Ok(())
    }
}

fn eigen_of(block: &HamiltonianBlock) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let e = jacobi_eigen(&block.matrix, JACOBI_TOL, JACOBI_MAX_SWEEPS)
        .ok_or(Error::EigenNonConvergence { m: block.m, sweeps: JACOBI_MAX_SWEEPS })?;
    Ok((e.values, e.vectors))
}

/// Assigns each current eigenvector the label of the previous vector it
/// overlaps most with, choosing the permutation with the largest total
/// overlap.
fn match_labels(prev: &DMatrix<f64>, prev_labels: &[Branch], cur: &DMatrix<f64>) -> Vec<Branch> {
    let k = prev_labels.len();
    let overlap = |i: usize, j: usize| -> f64 { prev.column(i).dot(&cur.column(j)).abs() };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(k) {
        // perm[j] = index of previous vector matched to current vector j
        let score: f64 = perm.iter().enumerate().map(|(j, &i)| overlap(i, j)).sum();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, perm));
        }
    }
    let (_, perm) = best.expect("at least one permutation");
    perm.into_iter().map(|i| prev_labels[i]).collect()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    match k {
        0 => vec![vec![]],
        _ => {
            let mut out = Vec::new();
            for p in permutations(k - 1) {
                for pos in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(pos, k - 1);
                    out.push(q);
                }
            }
            out
        }
    }
}

/// Diagonalizes block m along a field path, carrying branch labels by
/// maximum eigenvector overlap from the zero-field basis states.
fn track_block(
    constants: &MolecularConstants,
    config: &RotorFieldConfig,
    m: i64,
    fields_z: &[f64],
) -> Result<Vec<SpectrumBlock>> {
    let h0 = field_free_block(constants, config.n, m)?;
    let z = zeeman_block_per_tesla(constants, config.n, m)?;
    let k = h0.basis.len();
    let mut prev_vectors = DMatrix::<f64>::identity(k, k);
    let mut prev_labels: Vec<Branch> = h0.basis.iter().map(|&j| Branch::from_j(config.n, j)).collect();
    let mut prev_field = 0.0;
    let mut out = Vec::with_capacity(fields_z.len());

    let mut step_to = |target: f64, record: bool, out: &mut Vec<SpectrumBlock>| -> Result<()> {
        let block = HamiltonianBlock {
            m,
            basis: h0.basis.clone(),
            matrix: &h0.matrix + &z.matrix * target,
        };
        let (values, vectors) = eigen_of(&block)?;
        let labels = match_labels(&prev_vectors, &prev_labels, &vectors);
        if record {
            let weights = (0..k)
                .map(|c| (0..k).map(|r| vectors[(r, c)] * vectors[(r, c)]).collect())
                .collect();
            out.push(SpectrumBlock {
                m,
                basis: h0.basis.clone(),
                energies: values,
                branches: labels.clone(),
                weights,
                vectors: vectors.clone(),
            });
        }
        prev_vectors = vectors;
        prev_labels = labels;
        Ok(())
    };

    for &target in fields_z {
        let gap = target - prev_field;
        let steps = (gap.abs() / TRACKING_STEP_TESLA).ceil().max(1.0) as usize;
        for s in 1..=steps {
            let b = prev_field + gap * s as f64 / steps as f64;
            step_to(b, s == steps, &mut out)?;
        }
        prev_field = target;
    }
    Ok(out)
}

fn projections(n: u32) -> Vec<i64> {
    let top = n as i64 + 1;
    (-top..=top).collect()
}

/// Diagonalizes every m-block at the configured field.
pub fn diagonalize(constants: &MolecularConstants, config: &RotorFieldConfig) -> Result<SpinRotationSpectrum> {
    config.validate()?;
    constants.validate()?;
    let bz = config.field_z();
    let blocks = projections(config.n)
        .into_par_iter()
        .map(|m| track_block(constants, config, m, &[bz]).map(|mut v| v.remove(0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpinRotationSpectrum { config: *config, blocks })
}

/// Spectra along a sequence of field magnitudes with branch labels carried
/// continuously from one sample to the next.
pub fn track_branches(
    constants: &MolecularConstants,
    n: u32,
    fields_tesla: &[f64],
    inverted: bool,
) -> Result<Vec<SpinRotationSpectrum>> {
    let base = RotorFieldConfig { n, b_tesla: 0.0, inverted };
    base.validate()?;
    constants.validate()?;
    for &b in fields_tesla {
        base.with_field_z(b).validate()?;
    }
    let sign = if inverted { -1.0 } else { 1.0 };
    let fields_z: Vec<f64> = fields_tesla.iter().map(|b| sign * b).collect();
    let per_m = projections(n)
        .into_par_iter()
        .map(|m| track_block(constants, &base, m, &fields_z))
        .collect::<Result<Vec<_>>>()?;
    Ok(fields_tesla
        .iter()
        .enumerate()
        .map(|(i, &b)| SpinRotationSpectrum {
            config: RotorFieldConfig { n, b_tesla: b, inverted },
            blocks: per_m.iter().map(|blocks| blocks[i].clone()).collect(),
        })
        .collect())
}

/// How the precession frequencies were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencyMethod {
    #[serde(rename = "approximate")]
    Approximate,
    #[serde(rename = "exact-spectrum")]
    Exact,
}

/// Precession frequency magnitudes (rad/s) of the two outer branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecessionFrequencies {
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub method: FrequencyMethod,
}

impl PrecessionFrequencies {
    /// Both branches at the same frequency.
    pub fn degenerate(omega: f64, method: FrequencyMethod) -> Self {
        Self { omega_plus: omega, omega_minus: omega, method }
    }

    pub fn max(&self) -> f64 {
        self.omega_plus.max(self.omega_minus)
    }

    /// Quarter precession period π/(2Ω) of the plus branch (s).
    pub fn quarter_period_plus(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 / self.omega_plus
    }

    pub fn quarter_period_minus(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 / self.omega_minus
    }
}

/// Strong-coupling precession frequency µB|g|B/(ħN), equal for both branches.
pub fn frequencies_approximate(
    constants: &MolecularConstants,
    config: &RotorFieldConfig,
) -> Result<PrecessionFrequencies> {
    config.validate()?;
    let omega = CODATA.mu_b * constants.g_factor.abs() * config.b_tesla / (CODATA.hbar * config.n as f64);
    Ok(PrecessionFrequencies::degenerate(omega, FrequencyMethod::Approximate))
}

fn branch_splitting(lower: &SpectrumBlock, upper: &SpectrumBlock, branch: Branch) -> Option<f64> {
    Some(((upper.energy(branch)? - lower.energy(branch)?) / CODATA.hbar).abs())
}

/// Branch frequencies from the m = 0 → m = 1 energy differences of the
/// diagonalized Hamiltonian.
pub fn frequencies_exact(constants: &MolecularConstants, config: &RotorFieldConfig) -> Result<PrecessionFrequencies> {
    config.validate()?;
    constants.validate()?;
    if config.n < 2 {
        return Err(Error::InvalidInput(
            "N = 1: the S_N = -1 branch is J = 0 and has no m = 1 state".into(),
        ));
    }
    let bz = config.field_z();
    let b0 = track_block(constants, config, 0, &[bz])?.remove(0);
    let b1 = track_block(constants, config, 1, &[bz])?.remove(0);
    let omega_plus = branch_splitting(&b0, &b1, Branch::Plus).expect("plus branch present for m=0,1");
    let omega_minus = branch_splitting(&b0, &b1, Branch::Minus).expect("minus branch present for N>=2");
    Ok(PrecessionFrequencies { omega_plus, omega_minus, method: FrequencyMethod::Exact })
}

/// Spread of the adjacent-m splittings across the whole spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingSpread {
    pub plus_min: f64,
    pub plus_max: f64,
    pub minus_min: f64,
    pub minus_max: f64,
}

impl SplittingSpread {
    /// (max − min)/min for each branch.
    pub fn relative(&self) -> (f64, f64) {
        (
            (self.plus_max - self.plus_min) / self.plus_min,
            (self.minus_max - self.minus_min) / self.minus_min,
        )
    }
}

/// m-dependence of the adjacent-block splittings (m, m+1) for m ≥ 0.
pub fn splitting_spread(spectrum: &SpinRotationSpectrum) -> Option<SplittingSpread> {
    let n = spectrum.config.n as i64;
    let collect = |branch: Branch, top: i64| -> Vec<f64> {
        (0..top)
            .filter_map(|m| branch_splitting(spectrum.block(m)?, spectrum.block(m + 1)?, branch))
            .collect()
    };
    let plus = collect(Branch::Plus, n + 1);
    let minus = collect(Branch::Minus, n - 1);
    if plus.is_empty() || minus.is_empty() {
        return None;
    }
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(SplittingSpread {
        plus_min: min(&plus),
        plus_max: max(&plus),
        minus_min: min(&minus),
        minus_max: max(&minus),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn o2() -> MolecularConstants {
        MolecularConstants::oxygen()
    }

    fn closed_form(n: u32) -> [f64; 3] {
        let c = o2();
        let nf = n as f64;
        [
            c.gamma * nf - c.lambda * nf / (nf + 1.0),
            -c.gamma - c.lambda / (nf * (nf + 1.0)),
            -c.gamma * (nf + 1.0) - c.lambda * (nf + 1.0) / nf,
        ]
    }

    #[test]
    fn zero_field_block_is_closed_form_diagonal() {
        let cfg = RotorFieldConfig::new(33, 0.0);
        let h = build_hamiltonian_block(&o2(), &cfg, 0).unwrap();
        assert_eq!(h.basis, vec![32, 33, 34]);
        let [plus, zero, minus] = closed_form(33);
        assert_relative_eq!(h.matrix[(0, 0)], minus, max_relative = 1e-14);
        assert_relative_eq!(h.matrix[(1, 1)], zero, max_relative = 1e-14);
        assert_relative_eq!(h.matrix[(2, 2)], plus, max_relative = 1e-14);
        assert_eq!(h.matrix[(0, 1)], 0.0);
        assert_eq!(h.matrix[(1, 2)], 0.0);
    }

    #[test]
    fn block_sizes_follow_projection() {
        let cfg = RotorFieldConfig::new(3, 1.0);
        assert_eq!(build_hamiltonian_block(&o2(), &cfg, 3).unwrap().basis, vec![3, 4]);
        assert_eq!(build_hamiltonian_block(&o2(), &cfg, -4).unwrap().basis, vec![4]);
        assert_eq!(build_hamiltonian_block(&o2(), &cfg, 2).unwrap().basis.len(), 3);
        assert!(matches!(
            build_hamiltonian_block(&o2(), &cfg, 5),
            Err(Error::EmptyBlock { m: 5, max: 4 })
        ));
    }

    #[test]
    fn zeeman_part_is_linear_in_field() {
        let c = o2();
        for m in -4..=4 {
            let h1 = build_hamiltonian_block(&c, &RotorFieldConfig::new(3, 1.0), m).unwrap().matrix;
            let h05 = build_hamiltonian_block(&c, &RotorFieldConfig::new(3, 0.5), m).unwrap().matrix;
            let h0 = build_hamiltonian_block(&c, &RotorFieldConfig::new(3, 0.0), m).unwrap().matrix;
            let expect = &h0 + (&h1 - &h0) * 0.5;
            assert!((h05 - expect).norm() <= 1e-12 * h0.norm());
        }
    }

    #[test]
    fn blocks_are_symmetric() {
        let c = o2();
        for n in [1, 2, 7, 89] {
            let cfg = RotorFieldConfig::new(n, 0.7);
            for m in projections(n) {
                let h = build_hamiltonian_block(&c, &cfg, m).unwrap().matrix;
                assert_eq!(h, h.transpose());
            }
        }
    }

    #[test]
    fn zero_field_spectrum_is_m_degenerate() {
        let spec = diagonalize(&o2(), &RotorFieldConfig::new(5, 0.0)).unwrap();
        let [plus, zero, minus] = closed_form(5);
        for block in &spec.blocks {
            for (e, b) in block.energies.iter().zip(&block.branches) {
                let want = match b {
                    Branch::Plus => plus,
                    Branch::Zero => zero,
                    Branch::Minus => minus,
                };
                assert_relative_eq!(*e, want, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn state_count_is_full_dimension() {
        let spec = diagonalize(&o2(), &RotorFieldConfig::new(89, 1.0)).unwrap();
        assert_eq!(spec.blocks.len(), 2 * 90 + 1);
        assert_eq!(spec.total_states(), 3 * (2 * 89 + 1));
    }

    #[test]
    fn trace_is_preserved() {
        let c = o2();
        let cfg = RotorFieldConfig::new(9, 1.0);
        let spec = diagonalize(&c, &cfg).unwrap();
        for block in &spec.blocks {
            let h = build_hamiltonian_block(&c, &cfg, block.m).unwrap().matrix;
            let sum: f64 = block.energies.iter().sum();
            assert!(((sum - h.trace()) / h.trace()).abs() <= 1e-12);
        }
    }

    #[test]
    fn approximate_frequency_values() {
        let c = o2();
        let f = frequencies_approximate(&c, &RotorFieldConfig::new(89, 1.0)).unwrap();
        assert_relative_eq!(f.omega_plus, 1.978_474_891_879e9, max_relative = 1e-9);
        assert!((f.quarter_period_plus() - 0.8e-9).abs() / 0.8e-9 < 0.03);
        let f = frequencies_approximate(&c, &RotorFieldConfig::new(43, 1.0)).unwrap();
        assert_relative_eq!(f.omega_minus, 4.094_982_915_75e9, max_relative = 1e-9);
        let f = frequencies_approximate(&c, &RotorFieldConfig::new(43, 0.0)).unwrap();
        assert_eq!(f.omega_plus, 0.0);
    }

    #[test]
    fn approximate_frequency_times_n_is_constant() {
        let c = o2();
        let base = frequencies_approximate(&c, &RotorFieldConfig::new(1, 0.8)).unwrap().omega_plus;
        for n in [3, 17, 43, 89, 150] {
            let w = frequencies_approximate(&c, &RotorFieldConfig::new(n, 0.8)).unwrap().omega_plus;
            assert_relative_eq!(w * n as f64, base, max_relative = 1e-14);
        }
    }

    #[test]
    fn exact_frequencies_low_field_lande_limit() {
        let c = o2();
        let (n, b) = (71u32, 0.01);
        let f = frequencies_exact(&c, &RotorFieldConfig::new(n, b)).unwrap();
        let scale = CODATA.mu_b * c.g_factor.abs() * b / CODATA.hbar;
        let plus = scale / (n as f64 + 1.0);
        let minus = scale / n as f64;
        assert!((f.omega_plus - plus).abs() / plus < 2e-3);
        assert!((f.omega_minus - minus).abs() / minus < 2e-3);
    }

    #[test]
    fn exact_frequencies_split_at_one_tesla() {
        let f = frequencies_exact(&o2(), &RotorFieldConfig::new(71, 1.0)).unwrap();
        let rel = (f.omega_plus - f.omega_minus).abs() / f.omega_plus.max(f.omega_minus);
        assert!(rel > 5e-3, "relative split {rel}");
        // oracle values from uncoupled-basis diagonalization, GHz·2π
        let ghz = |w: f64| w / (2.0 * std::f64::consts::PI) / 1e9;
        assert!((ghz(f.omega_plus) - 0.35033).abs() < 2e-5);
        assert!((ghz(f.omega_minus) - 0.32472).abs() < 2e-5);
    }

    #[test]
    fn exact_frequencies_vanish_at_zero_field() {
        let f = frequencies_exact(&o2(), &RotorFieldConfig::new(71, 0.0)).unwrap();
        assert!(f.omega_plus.abs() < 1e-3 && f.omega_minus.abs() < 1e-3);
    }

    #[test]
    fn exact_frequencies_reject_n_one() {
        assert!(frequencies_exact(&o2(), &RotorFieldConfig::new(1, 1.0)).is_err());
    }

    #[test]
    fn low_field_linearity() {
        let c = o2();
        for n in [43, 61, 71, 89] {
            let slopes: Vec<(f64, f64)> = [0.01, 0.02, 0.03, 0.04, 0.05]
                .iter()
                .map(|&b| {
                    let f = frequencies_exact(&c, &RotorFieldConfig::new(n, b)).unwrap();
                    (f.omega_plus / b, f.omega_minus / b)
                })
                .collect();
            for (p, m) in &slopes {
                assert!((p - slopes[0].0).abs() / slopes[0].0 < 1e-3);
                assert!((m - slopes[0].1).abs() / slopes[0].1 < 1e-3);
            }
        }
    }

    #[test]
    fn field_doubling_at_low_field() {
        let c = o2();
        for n in [43, 71, 89] {
            for b in [0.05, 0.1, 0.25] {
                let f1 = frequencies_exact(&c, &RotorFieldConfig::new(n, b)).unwrap();
                let f2 = frequencies_exact(&c, &RotorFieldConfig::new(n, 2.0 * b)).unwrap();
                for r in [f2.omega_plus / f1.omega_plus, f2.omega_minus / f1.omega_minus] {
                    assert!((1.9..=2.1).contains(&r), "N={n} B={b}: ratio {r}");
                }
            }
        }
    }

    #[test]
    fn inverted_field_mirrors_projection() {
        let c = o2();
        let up = diagonalize(&c, &RotorFieldConfig::new(5, 1.0)).unwrap();
        let down = diagonalize(&c, &RotorFieldConfig { n: 5, b_tesla: 1.0, inverted: true }).unwrap();
        for m in -6..=6 {
            for b in Branch::ALL {
                match (up.energy(b, m), down.energy(b, -m)) {
                    (Some(x), Some(y)) => assert_relative_eq!(x, y, max_relative = 1e-13),
                    (None, None) => {}
                    other => panic!("branch {b} m={m}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn labels_are_continuous_along_a_sweep() {
        let c = o2();
        let fields: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.002).collect();
        let sweep = track_branches(&c, 7, &fields, false).unwrap();
        for pair in sweep.windows(2) {
            for (a, b) in pair[0].blocks.iter().zip(&pair[1].blocks) {
                for (ka, branch) in a.branches.iter().enumerate() {
                    let kb = b.branches.iter().position(|x| x == branch).unwrap();
                    let ov = a.vectors.column(ka).dot(&b.vectors.column(kb)).abs();
                    assert!(ov > 0.5, "m={} branch {branch}: overlap {ov}", a.m);
                }
            }
        }
        // direct diagonalization at the endpoint assigns the same labels
        let direct = diagonalize(&c, &RotorFieldConfig::new(7, 2.0)).unwrap();
        for (a, b) in direct.blocks.iter().zip(&sweep.last().unwrap().blocks) {
            assert_eq!(a.branches, b.branches, "m={}", a.m);
            for (x, y) in a.energies.iter().zip(&b.energies) {
                assert_relative_eq!(*x, *y, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn even_n_warns() {
        assert_eq!(RotorFieldConfig::new(4, 1.0).validate().unwrap().len(), 1);
        assert!(RotorFieldConfig::new(5, 1.0).validate().unwrap().is_empty());
        assert!(RotorFieldConfig::new(0, 1.0).validate().is_err());
        assert!(RotorFieldConfig::new(5, -1.0).validate().is_err());
    }

    #[test]
    fn csv_export_has_all_states() {
        let spec = diagonalize(&o2(), &RotorFieldConfig::new(3, 1.0)).unwrap();
        let mut buf = Vec::new();
        spec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("m,branch,energy_joule,energy_ghz\n"));
        assert_eq!(text.lines().count(), 1 + 21);
    }
}
