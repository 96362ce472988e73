//! Small dense complex-matrix helpers shared by circuit verification, the
//! decomposition solvers, and test oracles. Row-major `Vec<Complex64>`
//! throughout; these are deliberately simple O(n³) routines for dimensions up
//! to a few thousand.

use num_complex::Complex64;

pub type C64 = Complex64;

pub fn czero() -> C64 {
    Complex64::new(0.0, 0.0)
}

pub fn cone() -> C64 {
    Complex64::new(1.0, 0.0)
}

pub fn mat_identity(dim: usize) -> Vec<C64> {
    let mut m = vec![czero(); dim * dim];
    for i in 0..dim {
        m[i * dim + i] = cone();
    }
    m
}

pub fn mat_mul(a: &[C64], b: &[C64], dim: usize) -> Vec<C64> {
    assert_eq!(a.len(), dim * dim);
    assert_eq!(b.len(), dim * dim);
    let mut out = vec![czero(); dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            if aik == czero() {
                continue;
            }
            for j in 0..dim {
                out[i * dim + j] += aik * b[k * dim + j];
            }
        }
    }
    out
}

pub fn mat_adjoint(a: &[C64], dim: usize) -> Vec<C64> {
    let mut out = vec![czero(); dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            out[j * dim + i] = a[i * dim + j].conj();
        }
    }
    out
}

pub fn kron(a: &[C64], da: usize, b: &[C64], db: usize) -> Vec<C64> {
    let dim = da * db;
    let mut out = vec![czero(); dim * dim];
    for ia in 0..da {
        for ja in 0..da {
            let va = a[ia * da + ja];
            if va == czero() {
                continue;
            }
            for ib in 0..db {
                for jb in 0..db {
                    out[(ia * db + ib) * dim + (ja * db + jb)] = va * b[ib * db + jb];
                }
            }
        }
    }
    out
}

pub fn mat_vec(a: &[C64], x: &[C64], dim: usize) -> Vec<C64> {
    let mut out = vec![czero(); dim];
    for i in 0..dim {
        let mut acc = czero();
        for j in 0..dim {
            acc += a[i * dim + j] * x[j];
        }
        out[i] = acc;
    }
    out
}

pub fn frobenius_norm(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius distance between `a` and `b` minimized over a global phase on
/// `a`: ‖e^{iφ}a − b‖ with φ = arg Tr[a†b]. Falls back to the plain distance
/// when the overlap vanishes.
pub fn phase_dist(a: &[C64], b: &[C64], dim: usize) -> f64 {
    assert_eq!(a.len(), dim * dim);
    assert_eq!(b.len(), dim * dim);
    let mut tr = czero();
    for i in 0..dim {
        for j in 0..dim {
            tr += a[i * dim + j].conj() * b[i * dim + j];
        }
    }
    let phase = if tr.norm() < 1e-14 {
        cone()
    } else {
        tr / tr.norm()
    };
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += (x * phase - y).norm_sqr();
    }
    acc.sqrt()
}

/// Embed a 2×2 single-qubit matrix on qubit `q` of an `n`-qubit register
/// (qubit q ↔ bit n−1−q).
pub fn embed_1q(u: &[C64], q: usize, n: usize) -> Vec<C64> {
    assert_eq!(u.len(), 4);
    let dim = 1usize << n;
    let bit = n - 1 - q;
    let mut out = vec![czero(); dim * dim];
    for col in 0..dim {
        let a = (col >> bit) & 1;
        let base = col & !(1usize << bit);
        for r in 0..2 {
            let row = base | (r << bit);
            out[row * dim + col] = u[r * 2 + a];
        }
    }
    out
}

/// Embed a 4×4 two-qubit matrix on qubits (i, j); gate basis (b_i, b_j) with
/// b_i the high bit, matching the crate's gate-matrix convention.
pub fn embed_2q(u: &[C64], i: usize, j: usize, n: usize) -> Vec<C64> {
    assert_eq!(u.len(), 16);
    let dim = 1usize << n;
    let (bi, bj) = (n - 1 - i, n - 1 - j);
    let mut out = vec![czero(); dim * dim];
    for col in 0..dim {
        let ai = (col >> bi) & 1;
        let aj = (col >> bj) & 1;
        let base = col & !((1usize << bi) | (1usize << bj));
        let cin = 2 * ai + aj;
        for r in 0..4 {
            let row = base | ((r >> 1) << bi) | ((r & 1) << bj);
            out[row * dim + col] = u[r * 4 + cin];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_and_mul() {
        let i4 = mat_identity(4);
        let m: Vec<C64> = (0..16).map(|k| Complex64::new(k as f64, -(k as f64))).collect();
        let lhs = mat_mul(&i4, &m, 4);
        let rhs = mat_mul(&m, &i4, 4);
        for k in 0..16 {
            assert_abs_diff_eq!(lhs[k].re, m[k].re);
            assert_abs_diff_eq!(rhs[k].im, m[k].im);
        }
    }

    #[test]
    fn phase_dist_ignores_global_phase() {
        let m: Vec<C64> = (0..16).map(|k| Complex64::new(1.0 + k as f64, 0.3)).collect();
        let phased: Vec<C64> = m
            .iter()
            .map(|v| v * Complex64::from_polar(1.0, 1.234))
            .collect();
        assert!(phase_dist(&m, &phased, 4) < 1e-12);
        assert!(phase_dist(&m, &mat_identity(4), 4) > 1.0);
    }

    #[test]
    fn kron_dimensions() {
        let z = vec![cone(), czero(), czero(), -cone()];
        let x = vec![czero(), cone(), cone(), czero()];
        let zx = kron(&z, 2, &x, 2);
        // ZX |00⟩ = |01⟩ with +1 → entry at (row 0b01, col 0b00)
        assert_abs_diff_eq!(zx[1 * 4 + 0].re, 1.0);
        assert_abs_diff_eq!(zx[3 * 4 + 2].re, -1.0);
    }

    #[test]
    fn embeddings_agree_with_kron() {
        let x = vec![czero(), cone(), cone(), czero()];
        let i2 = mat_identity(2);
        let full = kron(&i2, 2, &x, 2);
        let emb = embed_1q(&x, 1, 2);
        for k in 0..16 {
            assert_abs_diff_eq!(full[k].re, emb[k].re);
            assert_abs_diff_eq!(full[k].im, emb[k].im);
        }
    }
}
