//! Single-trajectory statevector evolution: each error channel is realized
//! by sampling one Kraus branch, so averaging trajectories reproduces the
//! exact channel.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::circuits::{apply_gate_statevector, Circuit, Gate};
use crate::error::Result;
use crate::simulator::{NoiseModel, PureState};

const PAULI_1Q: [[Complex64; 4]; 4] = {
    let z = Complex64 { re: 0.0, im: 0.0 };
    let one = Complex64 { re: 1.0, im: 0.0 };
    let neg = Complex64 { re: -1.0, im: 0.0 };
    let i = Complex64 { re: 0.0, im: 1.0 };
    let ni = Complex64 { re: 0.0, im: -1.0 };
    [
        [one, z, z, one], // I
        [z, one, one, z], // X
        [z, ni, i, z],    // Y
        [one, z, z, neg], // Z
    ]
};

fn apply_1q(amps: &mut [Complex64], n: usize, q: usize, m: &[Complex64; 4]) {
    let mask = 1usize << (n - 1 - q);
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        let a0 = amps[base];
        let a1 = amps[base | mask];
        amps[base] = m[0] * a0 + m[1] * a1;
        amps[base | mask] = m[2] * a0 + m[3] * a1;
    }
}

fn sample_pauli_1q(amps: &mut [Complex64], n: usize, q: usize, rng: &mut ChaCha12Rng) {
    let which = rng.gen_range(0..4usize);
    if which != 0 {
        apply_1q(amps, n, q, &PAULI_1Q[which]);
    }
}

fn depolarize_gate(
    amps: &mut [Complex64],
    n: usize,
    gate: &Gate,
    noise: &NoiseModel,
    rng: &mut ChaCha12Rng,
) {
    if gate.is_virtual() {
        return;
    }
    if gate.is_two_qubit() {
        let p = noise.two_qubit_depolarizing;
        if p > 0.0 && rng.gen::<f64>() < p {
            let (a, b) = {
                let qs = gate.qubits();
                (qs[0], qs[1])
            };
            sample_pauli_1q(amps, n, a, rng);
            sample_pauli_1q(amps, n, b, rng);
        }
    } else {
        let p = noise.single_qubit_depolarizing;
        if p > 0.0 && rng.gen::<f64>() < p {
            let q = gate.qubits()[0];
            sample_pauli_1q(amps, n, q, rng);
        }
    }
}

fn damp_qubit(amps: &mut [Complex64], n: usize, q: usize, gamma: f64, rng: &mut ChaCha12Rng) {
    let mask = 1usize << (n - 1 - q);
    let mut excited = 0.0;
    for (idx, a) in amps.iter().enumerate() {
        if idx & mask != 0 {
            excited += a.norm_sqr();
        }
    }
    let p_jump = gamma * excited;
    if rng.gen::<f64>() < p_jump {
        // jump branch: |1⟩ → |0⟩
        let norm = excited.sqrt();
        for base in 0..amps.len() {
            if base & mask != 0 {
                continue;
            }
            amps[base] = amps[base | mask] / norm;
            amps[base | mask] = Complex64::new(0.0, 0.0);
        }
    } else {
        // no-jump branch: damp the excited amplitude and renormalize
        let keep = (1.0 - gamma).sqrt();
        let norm = (1.0 - p_jump).sqrt();
        for (idx, a) in amps.iter_mut().enumerate() {
            if idx & mask != 0 {
                *a *= keep / norm;
            } else {
                *a /= norm;
            }
        }
    }
}

fn apply_field(amps: &mut [Complex64], n: usize, h: f64) {
    // e^{ih ΣZ}: phase e^{ih(n − 2·weight)} per basis state
    for (idx, a) in amps.iter_mut().enumerate() {
        let w = (idx as u64).count_ones() as f64;
        *a *= Complex64::new(0.0, h * (n as f64 - 2.0 * w)).exp();
    }
}

pub fn evolve_pure(
    state: &PureState,
    circuit: &Circuit,
    noise: &NoiseModel,
    rng: &mut ChaCha12Rng,
) -> Result<PureState> {
    let n = circuit.n_qubits;
    let mut out = state.clone();
    let amps_len = out.amplitudes().len();
    if amps_len != 1usize << n {
        return Err(crate::error::Error::dim(format!(
            "state dimension {} does not match circuit on {} qubits",
            amps_len, n
        )));
    }
    for layer in &circuit.layers {
        for gate in layer {
            apply_gate_statevector(out.amplitudes_mut(), gate, n);
            depolarize_gate(out.amplitudes_mut(), n, gate, noise, rng);
        }
        let virtual_only = layer.iter().all(Gate::is_virtual);
        if virtual_only {
            continue;
        }
        if noise.amplitude_damping > 0.0 {
            for q in 0..n {
                damp_qubit(out.amplitudes_mut(), n, q, noise.amplitude_damping, rng);
            }
        }
        if noise.dephasing > 0.0 {
            for q in 0..n {
                if rng.gen::<f64>() < noise.dephasing {
                    apply_1q(out.amplitudes_mut(), n, q, &PAULI_1Q[3]);
                }
            }
        }
        if noise.background_field != 0.0 {
            apply_field(out.amplitudes_mut(), n, noise.background_field);
        }
    }
    let s = noise.global_depolarizing_survival;
    if s < 1.0 && rng.gen::<f64>() >= s {
        let idx = rng.gen_range(0..amps_len);
        for a in out.amplitudes_mut() {
            *a = Complex64::new(0.0, 0.0);
        }
        out.amplitudes_mut()[idx] = Complex64::new(1.0, 0.0);
    }
    Ok(out)
}
