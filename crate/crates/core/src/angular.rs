//! Wigner 3j/6j symbols for integer angular momenta and the spin
//! projection operator in a coupled |(N S) J m⟩ basis.
//!
//! Racah sums are evaluated term by term in log space so that arguments up
//! to a few hundred do not overflow.

use std::sync::OnceLock;

const LN_FACTORIAL_TABLE: usize = 4096;

fn ln_factorial(n: i64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE);
        t.push(0.0);
        let mut acc = 0.0;
        for k in 1..LN_FACTORIAL_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    });
    debug_assert!(n >= 0);
    let n = n as usize;
    if n < table.len() {
        table[n]
    } else {
        table[table.len() - 1] + ((table.len())..=n).map(|k| (k as f64).ln()).sum::<f64>()
    }
}

fn parity(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn triangle(a: i64, b: i64, c: i64) -> bool {
    a >= 0 && b >= 0 && c >= 0 && c <= a + b && c >= (a - b).abs()
}

fn ln_delta(a: i64, b: i64, c: i64) -> f64 {
    ln_factorial(a + b - c) + ln_factorial(a - b + c) + ln_factorial(-a + b + c)
        - ln_factorial(a + b + c + 1)
}

/// Wigner 3j symbol (j1 j2 j3; m1 m2 m3) for integer arguments.
pub fn wigner_3j(j1: i64, j2: i64, j3: i64, m1: i64, m2: i64, m3: i64) -> f64 {
    if m1 + m2 + m3 != 0
        || !triangle(j1, j2, j3)
        || m1.abs() > j1
        || m2.abs() > j2
        || m3.abs() > j3
    {
        return 0.0;
    }
    let k_min = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let k_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    if k_min > k_max {
        return 0.0;
    }
    let ln_pre = 0.5
        * (ln_delta(j1, j2, j3)
            + ln_factorial(j1 + m1)
            + ln_factorial(j1 - m1)
            + ln_factorial(j2 + m2)
            + ln_factorial(j2 - m2)
            + ln_factorial(j3 + m3)
            + ln_factorial(j3 - m3));
    let sum: f64 = (k_min..=k_max)
        .map(|k| {
            let ln_den = ln_factorial(k)
                + ln_factorial(j3 - j2 + k + m1)
                + ln_factorial(j3 - j1 + k - m2)
                + ln_factorial(j1 + j2 - j3 - k)
                + ln_factorial(j1 - k - m1)
                + ln_factorial(j2 - k + m2);
            parity(k) * (ln_pre - ln_den).exp()
        })
        .sum();
    parity(j1 - j2 - m3) * sum
}

/// Wigner 6j symbol {j1 j2 j3; j4 j5 j6} for integer arguments.
pub fn wigner_6j(j1: i64, j2: i64, j3: i64, j4: i64, j5: i64, j6: i64) -> f64 {
    if !(triangle(j1, j2, j3) && triangle(j1, j5, j6) && triangle(j4, j2, j6) && triangle(j4, j5, j3))
    {
        return 0.0;
    }
    let a = [j1 + j2 + j3, j1 + j5 + j6, j4 + j2 + j6, j4 + j5 + j3];
    let b = [j1 + j2 + j4 + j5, j2 + j3 + j5 + j6, j3 + j1 + j6 + j4];
    let t_min = *a.iter().max().unwrap();
    let t_max = *b.iter().min().unwrap();
    if t_min > t_max {
        return 0.0;
    }
    let ln_pre = 0.5
        * (ln_delta(j1, j2, j3) + ln_delta(j1, j5, j6) + ln_delta(j4, j2, j6) + ln_delta(j4, j5, j3));
    (t_min..=t_max)
        .map(|t| {
            let ln_den: f64 = a.iter().map(|&ai| ln_factorial(t - ai)).sum::<f64>()
                + b.iter().map(|&bi| ln_factorial(bi - t)).sum::<f64>();
            parity(t) * (ln_pre + ln_factorial(t + 1) - ln_den).exp()
        })
        .sum()
}

/// ⟨(n s) J' m | S_z | (n s) J m⟩ for spin quantum number `s` coupled to `n`.
///
/// Wigner–Eckart in the coupled basis: the reduced element of S in the
/// composite system is the spin reduced element √(s(s+1)(2s+1)) times a 6j
/// recoupling factor.
pub fn spin_z_coupled(n: i64, s: i64, j_bra: i64, j_ket: i64, m: i64) -> f64 {
    if m.abs() > j_bra || m.abs() > j_ket || (j_bra - j_ket).abs() > 1 {
        return 0.0;
    }
    let spin_reduced = ((s * (s + 1) * (2 * s + 1)) as f64).sqrt();
    let reduced = parity(n + s + j_ket + 1)
        * (((2 * j_ket + 1) * (2 * j_bra + 1)) as f64).sqrt()
        * wigner_6j(s, j_bra, n, j_ket, s, 1)
        * spin_reduced;
    parity(j_bra - m) * wigner_3j(j_bra, 1, j_ket, -m, 0, m) * reduced
}

/// Landé projection of S_z onto J: m [J(J+1) + s(s+1) − n(n+1)] / [2J(J+1)].
pub fn lande_spin_projection(n: i64, s: i64, j: i64, m: i64) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let jj = (j * (j + 1)) as f64;
    m as f64 * (jj + (s * (s + 1)) as f64 - (n * (n + 1)) as f64) / (2.0 * jj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_3j_values() {
        // (1 1 0; 0 0 0) = -1/sqrt(3)
        assert_relative_eq!(wigner_3j(1, 1, 0, 0, 0, 0), -1.0 / 3f64.sqrt(), epsilon = 1e-14);
        // (1 1 2; 1 -1 0) = 1/sqrt(30)
        assert_relative_eq!(wigner_3j(1, 1, 2, 1, -1, 0), 1.0 / 30f64.sqrt(), epsilon = 1e-14);
        // (2 2 2; 0 0 0) = -sqrt(2/35)
        assert_relative_eq!(wigner_3j(2, 2, 2, 0, 0, 0), -(2.0f64 / 35.0).sqrt(), epsilon = 1e-14);
        assert_eq!(wigner_3j(1, 1, 1, 0, 0, 0), 0.0);
        assert_eq!(wigner_3j(1, 1, 3, 0, 0, 0), 0.0);
    }

    #[test]
    fn known_6j_values() {
        // {1 1 1; 1 1 1} = 1/6
        assert_relative_eq!(wigner_6j(1, 1, 1, 1, 1, 1), 1.0 / 6.0, epsilon = 1e-14);
        // {1 1 0; 1 1 1} = 1/3 · (-1)^{...}: closed form (-1)^{a+b+c} / sqrt((2a+1)(2b+1)) for c=0
        // {a b 0; b a c}: a=1,b=1,c=1 → (-1)^{3}/3
        assert_relative_eq!(wigner_6j(1, 1, 0, 1, 1, 1), -1.0 / 3.0, epsilon = 1e-14);
        // {2 2 2; 2 2 2} = -3/70
        assert_relative_eq!(wigner_6j(2, 2, 2, 2, 2, 2), -3.0 / 70.0, epsilon = 1e-14);
    }

    #[test]
    fn three_j_orthogonality() {
        let (j1, j2) = (7, 1);
        for j3 in (j1 - j2)..=(j1 + j2) {
            for j3p in (j1 - j2)..=(j1 + j2) {
                let m3 = 2;
                let s: f64 = (-j1..=j1)
                    .map(|m1| {
                        let m2 = -m3 - m1;
                        wigner_3j(j1, j2, j3, m1, m2, m3) * wigner_3j(j1, j2, j3p, m1, m2, m3)
                    })
                    .sum();
                let expect = if j3 == j3p { 1.0 / (2 * j3 + 1) as f64 } else { 0.0 };
                assert!((s - expect).abs() < 1e-13, "j3={j3} j3'={j3p}: {s}");
            }
        }
    }

    #[test]
    fn diagonal_spin_projection_matches_lande() {
        for n in [1, 2, 5, 33, 89] {
            for j in (n - 1).max(0)..=(n + 1) {
                for m in -j..=j {
                    let w = spin_z_coupled(n, 1, j, j, m);
                    let l = lande_spin_projection(n, 1, j, m);
                    assert!((w - l).abs() < 1e-12, "n={n} j={j} m={m}: {w} vs {l}");
                }
            }
        }
    }

    #[test]
    fn large_arguments_stay_finite() {
        let v = spin_z_coupled(150, 1, 151, 150, 3);
        assert!(v.is_finite() && v.abs() > 0.0 && v.abs() < 1.0);
    }

    #[test]
    fn spin_projection_is_symmetric() {
        for n in [3, 10] {
            for m in -(n - 1)..=(n - 1) {
                for (a, b) in [(n - 1, n), (n, n + 1)] {
                    let ab = spin_z_coupled(n, 1, a, b, m);
                    let ba = spin_z_coupled(n, 1, b, a, m);
                    assert!((ab - ba).abs() < 1e-14);
                }
            }
        }
    }
}
