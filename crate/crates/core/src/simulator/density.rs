//! Exact density-matrix evolution: unitary layers applied as UρU†, error
//! channels in closed form on the matrix entries.

use num_complex::Complex64;

use crate::circuits::{Circuit, Gate};
use crate::error::Result;
use crate::simulator::{DensityState, NoiseModel};

/// ρ → UρU† for one gate: rows mix by U, then columns by U*.
fn apply_gate(rho: &mut DensityState, gate: &Gate, n: usize) {
    let dim = rho.dim();
    let qs = gate.qubits();
    if qs.len() == 1 {
        let m = gate.matrix();
        let mask = 1usize << (n - 1 - qs[0]);
        let e = rho.entries_mut();
        for c in 0..dim {
            for r0 in 0..dim {
                if r0 & mask != 0 {
                    continue;
                }
                let r1 = r0 | mask;
                let a = e[r0 * dim + c];
                let b = e[r1 * dim + c];
                e[r0 * dim + c] = m[0] * a + m[1] * b;
                e[r1 * dim + c] = m[2] * a + m[3] * b;
            }
        }
        for r in 0..dim {
            for c0 in 0..dim {
                if c0 & mask != 0 {
                    continue;
                }
                let c1 = c0 | mask;
                let a = e[r * dim + c0];
                let b = e[r * dim + c1];
                e[r * dim + c0] = m[0].conj() * a + m[1].conj() * b;
                e[r * dim + c1] = m[2].conj() * a + m[3].conj() * b;
            }
        }
    } else {
        let m = gate.matrix();
        let mi = 1usize << (n - 1 - qs[0]);
        let mj = 1usize << (n - 1 - qs[1]);
        let e = rho.entries_mut();
        let idx4 = |base: usize, k: usize| {
            let mut v = base;
            if k & 2 != 0 {
                v |= mi;
            }
            if k & 1 != 0 {
                v |= mj;
            }
            v
        };
        for c in 0..dim {
            for base in 0..dim {
                if base & (mi | mj) != 0 {
                    continue;
                }
                let mut old = [Complex64::new(0.0, 0.0); 4];
                for (k, o) in old.iter_mut().enumerate() {
                    *o = e[idx4(base, k) * dim + c];
                }
                for r in 0..4 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (k, o) in old.iter().enumerate() {
                        acc += m[r * 4 + k] * o;
                    }
                    e[idx4(base, r) * dim + c] = acc;
                }
            }
        }
        for r in 0..dim {
            for base in 0..dim {
                if base & (mi | mj) != 0 {
                    continue;
                }
                let mut old = [Complex64::new(0.0, 0.0); 4];
                for (k, o) in old.iter_mut().enumerate() {
                    *o = e[r * dim + idx4(base, k)];
                }
                for cc in 0..4 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (k, o) in old.iter().enumerate() {
                        acc += m[cc * 4 + k].conj() * o;
                    }
                    e[r * dim + idx4(base, cc)] = acc;
                }
            }
        }
    }
}

/// ρ → (1−p)ρ + p (I/2 ⊗ Tr_q ρ) on one qubit.
fn depolarize_1q(rho: &mut DensityState, q: usize, p: f64, n: usize) {
    let dim = rho.dim();
    let mask = 1usize << (n - 1 - q);
    let e = rho.entries_mut();
    for r0 in 0..dim {
        if r0 & mask != 0 {
            continue;
        }
        let r1 = r0 | mask;
        for c0 in 0..dim {
            if c0 & mask != 0 {
                continue;
            }
            let c1 = c0 | mask;
            let d00 = e[r0 * dim + c0];
            let d11 = e[r1 * dim + c1];
            let t = d00 + d11;
            e[r0 * dim + c0] = (1.0 - p) * d00 + 0.5 * p * t;
            e[r1 * dim + c1] = (1.0 - p) * d11 + 0.5 * p * t;
            e[r0 * dim + c1] *= 1.0 - p;
            e[r1 * dim + c0] *= 1.0 - p;
        }
    }
}

/// ρ → (1−p)ρ + p (I/4 ⊗ Tr_pair ρ) on a qubit pair.
fn depolarize_2q(rho: &mut DensityState, a: usize, b: usize, p: f64, n: usize) {
    let dim = rho.dim();
    let mi = 1usize << (n - 1 - a);
    let mj = 1usize << (n - 1 - b);
    let e = rho.entries_mut();
    let idx4 = |base: usize, k: usize| {
        let mut v = base;
        if k & 2 != 0 {
            v |= mi;
        }
        if k & 1 != 0 {
            v |= mj;
        }
        v
    };
    for rb in 0..dim {
        if rb & (mi | mj) != 0 {
            continue;
        }
        for cb in 0..dim {
            if cb & (mi | mj) != 0 {
                continue;
            }
            let mut trace = Complex64::new(0.0, 0.0);
            for k in 0..4 {
                trace += e[idx4(rb, k) * dim + idx4(cb, k)];
            }
            for rk in 0..4 {
                for ck in 0..4 {
                    let idx = idx4(rb, rk) * dim + idx4(cb, ck);
                    let mut v = (1.0 - p) * e[idx];
                    if rk == ck {
                        v += 0.25 * p * trace;
                    }
                    e[idx] = v;
                }
            }
        }
    }
}

/// Amplitude damping on one qubit.
fn damp_1q(rho: &mut DensityState, q: usize, gamma: f64, n: usize) {
    let dim = rho.dim();
    let mask = 1usize << (n - 1 - q);
    let keep = (1.0 - gamma).sqrt();
    let e = rho.entries_mut();
    for r0 in 0..dim {
        if r0 & mask != 0 {
            continue;
        }
        let r1 = r0 | mask;
        for c0 in 0..dim {
            if c0 & mask != 0 {
                continue;
            }
            let c1 = c0 | mask;
            let d00 = e[r0 * dim + c0];
            let d01 = e[r0 * dim + c1];
            let d10 = e[r1 * dim + c0];
            let d11 = e[r1 * dim + c1];
            e[r0 * dim + c0] = d00 + gamma * d11;
            e[r0 * dim + c1] = keep * d01;
            e[r1 * dim + c0] = keep * d10;
            e[r1 * dim + c1] = (1.0 - gamma) * d11;
        }
    }
}

/// Phase flip with probability λ: off-diagonals in the qubit scale by 1−2λ.
fn dephase_1q(rho: &mut DensityState, q: usize, lambda: f64, n: usize) {
    let dim = rho.dim();
    let mask = 1usize << (n - 1 - q);
    let factor = 1.0 - 2.0 * lambda;
    let e = rho.entries_mut();
    for r in 0..dim {
        for c in 0..dim {
            if (r & mask) != (c & mask) {
                e[r * dim + c] *= factor;
            }
        }
    }
}

/// Coherent drift e^{ih ΣZ}: entry (r, c) gains e^{−2ih(w(r) − w(c))}.
fn apply_field(rho: &mut DensityState, h: f64) {
    let dim = rho.dim();
    let e = rho.entries_mut();
    for r in 0..dim {
        let wr = (r as u64).count_ones() as f64;
        for c in 0..dim {
            let wc = (c as u64).count_ones() as f64;
            e[r * dim + c] *= Complex64::new(0.0, -2.0 * h * (wr - wc)).exp();
        }
    }
}

fn global_depolarize(rho: &mut DensityState, survival: f64) {
    let dim = rho.dim();
    let mixed = (1.0 - survival) / dim as f64;
    let e = rho.entries_mut();
    for r in 0..dim {
        for c in 0..dim {
            e[r * dim + c] *= survival;
            if r == c {
                e[r * dim + c] += mixed;
            }
        }
    }
}

pub fn evolve_density(
    state: &DensityState,
    circuit: &Circuit,
    noise: &NoiseModel,
) -> Result<DensityState> {
    let n = circuit.n_qubits;
    if state.n_qubits() != n {
        return Err(crate::error::Error::dim(format!(
            "state on {} qubits fed to circuit on {}",
            state.n_qubits(),
            n
        )));
    }
    let mut rho = state.clone();
    for layer in &circuit.layers {
        for gate in layer {
            apply_gate(&mut rho, gate, n);
            if !gate.is_virtual() {
                if gate.is_two_qubit() {
                    if noise.two_qubit_depolarizing > 0.0 {
                        let qs = gate.qubits();
                        depolarize_2q(&mut rho, qs[0], qs[1], noise.two_qubit_depolarizing, n);
                    }
                } else if noise.single_qubit_depolarizing > 0.0 {
                    depolarize_1q(&mut rho, gate.qubits()[0], noise.single_qubit_depolarizing, n);
                }
            }
        }
        let virtual_only = layer.iter().all(Gate::is_virtual);
        if virtual_only {
            continue;
        }
        if noise.amplitude_damping > 0.0 {
            for q in 0..n {
                damp_1q(&mut rho, q, noise.amplitude_damping, n);
            }
        }
        if noise.dephasing > 0.0 {
            for q in 0..n {
                dephase_1q(&mut rho, q, noise.dephasing, n);
            }
        }
        if noise.background_field != 0.0 {
            apply_field(&mut rho, noise.background_field);
        }
    }
    if noise.global_depolarizing_survival < 1.0 {
        global_depolarize(&mut rho, noise.global_depolarizing_survival);
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-10 {
        return Err(crate::error::Error::numerical(format!(
            "trace drifted to {tr} during evolution"
        )));
    }
    Ok(rho)
}
