//! Brute-force reference spectrum in the uncoupled product basis
//! |N m_N⟩|S m_S⟩, built from ladder operators and diagonalized as one
//! dense matrix. Shares no code with the coupled-basis path beyond the
//! constants.

use nalgebra::DMatrix;

use super::{diagonalize, RotorFieldConfig};
use crate::error::Result;
use crate::units::{MolecularConstants, CODATA};

/// (J_z, J_+) for angular momentum `j` in the |j m⟩ basis ordered m = −j..j.
fn angular_momentum_ops(j: u32) -> (DMatrix<f64>, DMatrix<f64>) {
    let dim = 2 * j as usize + 1;
    let jf = j as f64;
    let m_of = |k: usize| k as f64 - jf;
    let jz = DMatrix::from_fn(dim, dim, |r, c| if r == c { m_of(r) } else { 0.0 });
    let jp = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c + 1 {
            let m = m_of(c);
            (jf * (jf + 1.0) - m * (m + 1.0)).sqrt()
        } else {
            0.0
        }
    });
    (jz, jp)
}

/// Full Hamiltonian in the uncoupled basis, dimension 3(2N+1).
pub fn uncoupled_hamiltonian(constants: &MolecularConstants, config: &RotorFieldConfig) -> DMatrix<f64> {
    let n = config.n;
    let (nz, np) = angular_momentum_ops(n);
    let (sz, sp) = angular_momentum_ops(1);
    let id_n = DMatrix::<f64>::identity(nz.nrows(), nz.nrows());

    let n_dot_s = nz.kronecker(&sz)
        + (np.kronecker(&sp.transpose()) + np.transpose().kronecker(&sp)) * 0.5;
    let nn = n as f64 * (n as f64 + 1.0);
    let zeeman = id_n.kronecker(&sz) * (-constants.g_factor * CODATA.mu_b * config.field_z());
    &n_dot_s * constants.gamma - (&n_dot_s * &n_dot_s) * (constants.lambda / nn) + zeeman
}

/// Ascending eigenvalues of the uncoupled Hamiltonian.
pub fn uncoupled_eigenvalues(constants: &MolecularConstants, config: &RotorFieldConfig) -> Vec<f64> {
    let h = uncoupled_hamiltonian(constants, config);
    let mut e: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Largest |E_coupled − E_oracle| over all states, relative to the largest
/// |E| of the oracle spectrum.
pub fn max_relative_deviation(constants: &MolecularConstants, config: &RotorFieldConfig) -> Result<f64> {
    let coupled = diagonalize(constants, config)?.all_energies();
    let reference = uncoupled_eigenvalues(constants, config);
    assert_eq!(coupled.len(), reference.len(), "state count mismatch");
    let scale = reference.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    Ok(coupled
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_operators_satisfy_commutator() {
        let (jz, jp) = angular_momentum_ops(3);
        let jm = jp.transpose();
        let comm = &jp * &jm - &jm * &jp;
        assert!((comm - &jz * 2.0).norm() < 1e-12);
    }

    #[test]
    fn oracle_dimension() {
        let h = uncoupled_hamiltonian(&MolecularConstants::oxygen(), &RotorFieldConfig::new(4, 1.0));
        assert_eq!(h.nrows(), 27);
    }

    #[test]
    fn coupled_blocks_match_oracle() {
        let c = MolecularConstants::oxygen();
        for n in 1..=10 {
            for b in [0.0, 0.1, 0.5, 1.0] {
                let dev = max_relative_deviation(&c, &RotorFieldConfig::new(n, b)).unwrap();
                assert!(dev <= 1e-10, "N={n} B={b}: {dev:e}");
            }
        }
    }
}
