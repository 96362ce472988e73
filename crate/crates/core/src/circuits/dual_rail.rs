//! Logical gate gadgets for the dual-rail encoding |0̃⟩ = |01⟩, |1̃⟩ = |10⟩,
//! built entirely from GS gates so every gadget preserves excitation number.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::circuits::{Circuit, Gate};
use crate::error::Result;

fn gs(a: usize, b: usize, theta: f64) -> Gate {
    Gate::GS { a, b, theta }
}

/// Logical Hadamard on the rail pair (q, q+1).
pub fn hadamard_gadget(q: usize, n_qubits: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits);
    c.push_layer(vec![gs(q, q + 1, FRAC_PI_4)])?;
    Ok(c)
}

/// Logical X on the rail pair (q, q+1).
pub fn x_gadget(q: usize, n_qubits: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits);
    c.push_layer(vec![gs(q, q + 1, 0.0)])?;
    Ok(c)
}

/// Logical Z on the rail pair (q, q+1).
pub fn z_gadget(q: usize, n_qubits: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits);
    c.push_layer(vec![gs(q, q + 1, FRAC_PI_2)])?;
    Ok(c)
}

/// Logical RY(θ): cos(θ/2)-style rotation in the code space, two GS gates.
pub fn ry_gadget(q: usize, theta: f64, n_qubits: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits);
    c.push_layer(vec![gs(q, q + 1, theta)])?;
    c.push_layer(vec![gs(q, q + 1, 0.0)])?;
    Ok(c)
}

/// Logical CNOT between rail pairs (q..q+1) control and (q+2..q+3) target.
pub fn cnot_gadget(q: usize, n_qubits: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits);
    let outer = vec![gs(q, q + 1, 0.0), gs(q + 2, q + 3, FRAC_PI_4)];
    c.push_layer(outer.clone())?;
    c.push_layer(vec![gs(q + 1, q + 2, FRAC_PI_2)])?;
    c.push_layer(outer)?;
    c.push_layer(vec![gs(q, q + 1, FRAC_PI_2)])?;
    Ok(c)
}

/// Logical SWAP between adjacent rail pairs: three physical SWAP layers.
pub fn swap_gadget(q: usize, n_qubits: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits);
    c.push_layer(vec![gs(q + 1, q + 2, 0.0)])?;
    c.push_layer(vec![gs(q, q + 1, 0.0), gs(q + 2, q + 3, 0.0)])?;
    c.push_layer(vec![gs(q + 1, q + 2, 0.0)])?;
    Ok(c)
}

/// The full gadget set, named, on a minimal register (2 qubits for
/// single-logical gadgets, 4 for two-logical ones). RY is built at the given
/// angle.
pub fn dual_rail_gadgets(ry_theta: f64) -> Result<Vec<(&'static str, Circuit)>> {
    Ok(vec![
        ("hadamard", hadamard_gadget(0, 2)?),
        ("x", x_gadget(0, 2)?),
        ("z", z_gadget(0, 2)?),
        ("ry", ry_gadget(0, ry_theta, 2)?),
        ("cnot", cnot_gadget(0, 4)?),
        ("swap", swap_gadget(0, 4)?),
    ])
}

/// Indices of the computational code states inside the physical register:
/// logical bitstring ℓ (MSB-first over pairs) → physical basis index, where
/// logical 0 occupies the second rail of its pair.
pub fn code_index(logical: usize, n_logical: usize) -> usize {
    let mut phys = 0usize;
    for l in 0..n_logical {
        let bit = (logical >> (n_logical - 1 - l)) & 1;
        // pair l covers physical qubits 2l, 2l+1 → bits (n_phys−1−2l, n_phys−2−2l)
        let hi = 2 * n_logical - 1 - 2 * l;
        if bit == 1 {
            phys |= 1 << hi;
        } else {
            phys |= 1 << (hi - 1);
        }
    }
    phys
}

/// Project a physical gadget unitary onto the code space: returns the
/// 2^k × 2^k logical block (row-major, logical MSB-first).
pub fn logical_block(circuit: &Circuit, n_logical: usize) -> Result<Vec<num_complex::Complex64>> {
    let u = circuit.unitary()?;
    let dim_phys = 1usize << circuit.n_qubits;
    let dim = 1usize << n_logical;
    let mut block = vec![num_complex::Complex64::new(0.0, 0.0); dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            block[r * dim + c] = u[code_index(r, n_logical) * dim_phys + code_index(c, n_logical)];
        }
    }
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{phase_dist, C64};
    use num_complex::Complex64;

    const SQ: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_logical_gadgets() {
        let h = logical_block(&hadamard_gadget(0, 2).unwrap(), 1).unwrap();
        assert!(phase_dist(&h, &[c(SQ, 0.0), c(SQ, 0.0), c(SQ, 0.0), c(-SQ, 0.0)], 2) < 1e-12);
        let x = logical_block(&x_gadget(0, 2).unwrap(), 1).unwrap();
        assert!(phase_dist(&x, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)], 2) < 1e-12);
        let z = logical_block(&z_gadget(0, 2).unwrap(), 1).unwrap();
        assert!(phase_dist(&z, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)], 2) < 1e-12);
    }

    #[test]
    fn ry_block_is_rotation() {
        let th = 0.7f64;
        let ry = logical_block(&ry_gadget(0, th, 2).unwrap(), 1).unwrap();
        let expect = [
            c(th.cos(), 0.0),
            c(-th.sin(), 0.0),
            c(th.sin(), 0.0),
            c(th.cos(), 0.0),
        ];
        assert!(phase_dist(&ry, &expect, 2) < 1e-12);
    }

    #[test]
    fn cnot_block() {
        let b = logical_block(&cnot_gadget(0, 4).unwrap(), 2).unwrap();
        let mut expect = vec![c(0.0, 0.0); 16];
        // control = first logical qubit (MSB)
        expect[0 * 4 + 0] = c(1.0, 0.0);
        expect[1 * 4 + 1] = c(1.0, 0.0);
        expect[2 * 4 + 3] = c(1.0, 0.0);
        expect[3 * 4 + 2] = c(1.0, 0.0);
        assert!(phase_dist(&b, &expect, 4) < 1e-12, "block: {b:?}");
    }

    #[test]
    fn swap_block() {
        let b = logical_block(&swap_gadget(0, 4).unwrap(), 2).unwrap();
        let mut expect = vec![c(0.0, 0.0); 16];
        expect[0 * 4 + 0] = c(1.0, 0.0);
        expect[1 * 4 + 2] = c(1.0, 0.0);
        expect[2 * 4 + 1] = c(1.0, 0.0);
        expect[3 * 4 + 3] = c(1.0, 0.0);
        assert!(phase_dist(&b, &expect, 4) < 1e-12);
    }

    #[test]
    fn gadgets_preserve_code_space() {
        // every gadget unitary maps code states to code states exactly
        for (name, circ) in dual_rail_gadgets(0.3).unwrap() {
            let n_logical = circ.n_qubits / 2;
            let u = circ.unitary().unwrap();
            let dim_phys = 1usize << circ.n_qubits;
            for col in 0..(1usize << n_logical) {
                let pc = code_index(col, n_logical);
                let mut leak = 0.0;
                for r in 0..dim_phys {
                    let in_code = (0..(1usize << n_logical)).any(|l| code_index(l, n_logical) == r);
                    if !in_code {
                        leak += u[r * dim_phys + pc].norm_sqr();
                    }
                }
                assert!(leak < 1e-20, "{name} leaks {leak:e} from code column {col}");
            }
        }
    }
}
