//! Circuit representation: gates, layered circuits, ladder layout, and the
//! Givens-swap (GS) gate family used by the pair-correlated ansatz.

pub mod decompose;
pub mod dual_rail;
pub mod echo;
pub mod distill;
pub mod schedule;

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, C64};

/// One- or two-qubit gate. `PhasedXZ(x, axis, z)` denotes
/// e^{i(z+axis)Z}·e^{i x X}·e^{−i axis Z}; `VirtualZ(β)` is the frame phase
/// e^{iβZ} (zero-duration; layers of virtual gates attract no layer noise).
/// `CX` is the atomic CNOT-equivalent used by verification-circuit plumbing
/// (cat-state ladders, parity mappings); `decompose_cx` provides its
/// native-gate expansion for cost accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    GS { a: usize, b: usize, theta: f64 },
    CZ { a: usize, b: usize },
    Swap { a: usize, b: usize },
    SqrtSwap { a: usize, b: usize },
    SqrtISwap { a: usize, b: usize },
    CX { control: usize, target: usize },
    /// e^{iα Z⊗Z}: diagonal two-qubit phase pulse (one physical layer)
    ZZPhase { a: usize, b: usize, alpha: f64 },
    PhasedXZ { q: usize, x: f64, axis: f64, z: f64 },
    VirtualZ { q: usize, beta: f64 },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::GS { a, b, .. }
            | Gate::CZ { a, b }
            | Gate::Swap { a, b }
            | Gate::SqrtSwap { a, b }
            | Gate::SqrtISwap { a, b }
            | Gate::ZZPhase { a, b, .. } => vec![a, b],
            Gate::CX { control, target } => vec![control, target],
            Gate::PhasedXZ { q, .. } | Gate::VirtualZ { q, .. } => vec![q],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        self.qubits().len() == 2
    }

    pub fn is_virtual(&self) -> bool {
        matches!(self, Gate::VirtualZ { .. })
    }

    /// Dense matrix: 2×2 for single-qubit gates, 4×4 for two-qubit gates.
    /// Two-qubit basis order (b_first, b_second) = 00, 01, 10, 11 with the
    /// first listed qubit as the high bit.
    pub fn matrix(&self) -> Vec<C64> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match *self {
            Gate::GS { theta, .. } => gs_matrix(theta),
            Gate::CZ { .. } => {
                let mut m = linalg::mat_identity(4);
                m[15] = c(-1.0, 0.0);
                m
            }
            Gate::Swap { .. } => {
                let mut m = vec![Complex64::new(0.0, 0.0); 16];
                m[0] = c(1.0, 0.0);
                m[1 * 4 + 2] = c(1.0, 0.0);
                m[2 * 4 + 1] = c(1.0, 0.0);
                m[15] = c(1.0, 0.0);
                m
            }
            Gate::SqrtSwap { .. } => {
                // exp(iπ/4(SWAP−I)) on the middle block: [[e^{−iπ/4}, e^{iπ/4}], …]/√2
                let s = 1.0 / 2.0_f64.sqrt();
                let em = Complex64::from_polar(s, -std::f64::consts::FRAC_PI_4);
                let ep = Complex64::from_polar(s, std::f64::consts::FRAC_PI_4);
                let mut m = vec![Complex64::new(0.0, 0.0); 16];
                m[0] = c(1.0, 0.0);
                m[1 * 4 + 1] = em;
                m[1 * 4 + 2] = ep;
                m[2 * 4 + 1] = ep;
                m[2 * 4 + 2] = em;
                m[15] = c(1.0, 0.0);
                m
            }
            Gate::SqrtISwap { .. } => {
                // exp(iπ/8(XX+YY)): middle block [[cos, i sin],[i sin, cos]] at π/4
                let t = std::f64::consts::FRAC_PI_4;
                let mut m = vec![Complex64::new(0.0, 0.0); 16];
                m[0] = c(1.0, 0.0);
                m[1 * 4 + 1] = c(t.cos(), 0.0);
                m[1 * 4 + 2] = c(0.0, t.sin());
                m[2 * 4 + 1] = c(0.0, t.sin());
                m[2 * 4 + 2] = c(t.cos(), 0.0);
                m[15] = c(1.0, 0.0);
                m
            }
            Gate::CX { .. } => {
                let mut m = vec![Complex64::new(0.0, 0.0); 16];
                m[0] = c(1.0, 0.0);
                m[1 * 4 + 1] = c(1.0, 0.0);
                m[2 * 4 + 3] = c(1.0, 0.0);
                m[3 * 4 + 2] = c(1.0, 0.0);
                m
            }
            Gate::ZZPhase { alpha, .. } => {
                // diag with phase e^{iα·(±1)(±1)} per two-qubit parity
                let p = Complex64::from_polar(1.0, alpha);
                let mut m = vec![Complex64::new(0.0, 0.0); 16];
                m[0] = p;
                m[1 * 4 + 1] = p.conj();
                m[2 * 4 + 2] = p.conj();
                m[15] = p;
                m
            }
            Gate::PhasedXZ { x, axis, z, .. } => {
                // e^{i(z+axis)Z} · e^{ixX} · e^{−i axis Z}
                let zl = Complex64::from_polar(1.0, z + axis);
                let zr = Complex64::from_polar(1.0, -axis);
                let (cx, sx) = (x.cos(), x.sin());
                // rows: e^{ixX} = [[cos x, i sin x],[i sin x, cos x]]
                vec![
                    zl * zr * cx,
                    zl * zr.conj() * Complex64::new(0.0, sx),
                    zl.conj() * zr * Complex64::new(0.0, sx),
                    zl.conj() * zr.conj() * cx,
                ]
            }
            Gate::VirtualZ { beta, .. } => vec![
                Complex64::from_polar(1.0, beta),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::from_polar(1.0, -beta),
            ],
        }
    }

    /// Textual form used in circuit dumps.
    pub fn dump(&self) -> String {
        match *self {
            Gate::GS { a, b, theta } => format!("GS({a},{b},{theta})"),
            Gate::CZ { a, b } => format!("CZ({a},{b})"),
            Gate::Swap { a, b } => format!("SWAP({a},{b})"),
            Gate::SqrtSwap { a, b } => format!("SQRTSWAP({a},{b})"),
            Gate::SqrtISwap { a, b } => format!("SQRTISWAP({a},{b})"),
            Gate::CX { control, target } => format!("CX({control},{target})"),
            Gate::ZZPhase { a, b, alpha } => format!("ZZP({a},{b},{alpha})"),
            Gate::PhasedXZ { q, x, axis, z } => format!("PXZ({q},{x},{axis},{z})"),
            Gate::VirtualZ { q, beta } => format!("VZ({q},{beta})"),
        }
    }
}

/// The Givens-swap gate: SWAP·Givens(θ), acting as
/// [[1,0,0,0],[0,sinθ,cosθ,0],[0,cosθ,−sinθ,0],[0,0,0,1]].
/// Involution: GS(θ)² = I. GS(0)=SWAP, GS(π/2)=diag(1,1,−1,1), GS(π/4)
/// is the dual-rail logical Hadamard.
pub fn gs_matrix(theta: f64) -> Vec<C64> {
    let (s, c) = (theta.sin(), theta.cos());
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    vec![
        one,
        z,
        z,
        z,
        z,
        Complex64::new(s, 0.0),
        Complex64::new(c, 0.0),
        z,
        z,
        Complex64::new(c, 0.0),
        Complex64::new(-s, 0.0),
        z,
        z,
        z,
        z,
        one,
    ]
}

/// Layered circuit; gates within a layer act on disjoint qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub layers: Vec<Vec<Gate>>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Circuit {
        Circuit {
            n_qubits,
            layers: Vec::new(),
        }
    }

    /// Append a layer, validating qubit ranges and intra-layer disjointness.
    pub fn push_layer(&mut self, gates: Vec<Gate>) -> Result<()> {
        let mut used = vec![false; self.n_qubits];
        for g in &gates {
            let qs = g.qubits();
            if qs.len() == 2 && qs[0] == qs[1] {
                return Err(Error::invalid(format!("gate {} touches one qubit twice", g.dump())));
            }
            for q in qs {
                if q >= self.n_qubits {
                    return Err(Error::invalid(format!(
                        "gate {} addresses qubit {q} on a {}-qubit circuit",
                        g.dump(),
                        self.n_qubits
                    )));
                }
                if used[q] {
                    return Err(Error::invalid(format!(
                        "layer gates overlap on qubit {q}"
                    )));
                }
                used[q] = true;
            }
        }
        self.layers.push(gates);
        Ok(())
    }

    pub fn push_gate(&mut self, gate: Gate) -> Result<()> {
        self.push_layer(vec![gate])
    }

    /// Concatenate another circuit's layers after this one's.
    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::dim("circuit qubit counts differ"));
        }
        self.layers.extend(other.layers.iter().cloned());
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.iter())
            .filter(|g| g.is_two_qubit())
            .count()
    }

    /// Layers that attract per-layer noise (any non-virtual gate present).
    pub fn noisy_layer_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| !l.iter().all(Gate::is_virtual))
            .count()
    }

    /// Dense unitary of the whole circuit (test/oracle use; n ≤ 12).
    pub fn unitary(&self) -> Result<Vec<C64>> {
        if self.n_qubits > 12 {
            return Err(Error::MemoryLimit { requested: self.n_qubits, allowed: 12 });
        }
        let dim = 1usize << self.n_qubits;
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
        for b in 0..dim {
            let mut v = vec![Complex64::new(0.0, 0.0); dim];
            v[b] = Complex64::new(1.0, 0.0);
            self.apply_to_statevector(&mut v)?;
            cols.push(v);
        }
        let mut u = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (b, col) in cols.iter().enumerate() {
            for r in 0..dim {
                u[r * dim + b] = col[r];
            }
        }
        Ok(u)
    }

    /// Apply the circuit unitary (noise-free) to an amplitude vector in place.
    pub fn apply_to_statevector(&self, amps: &mut [C64]) -> Result<()> {
        let dim = 1usize << self.n_qubits;
        if amps.len() != dim {
            return Err(Error::dim("statevector length mismatch"));
        }
        for layer in &self.layers {
            for g in layer {
                apply_gate_statevector(amps, g, self.n_qubits);
            }
        }
        Ok(())
    }

    /// One layer per line, gates space-separated.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for layer in &self.layers {
            let mut first = true;
            for g in layer {
                if !first {
                    out.push(' ');
                }
                let _ = write!(out, "{}", g.dump());
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// Apply a single gate to a statevector (qubit q ↔ bit n−1−q).
pub fn apply_gate_statevector(amps: &mut [C64], gate: &Gate, n: usize) {
    let qs = gate.qubits();
    let m = gate.matrix();
    if qs.len() == 1 {
        let bit = n - 1 - qs[0];
        let mask = 1usize << bit;
        let dim = amps.len();
        let mut idx = 0usize;
        while idx < dim {
            if idx & mask == 0 {
                let hi = idx | mask;
                let a0 = amps[idx];
                let a1 = amps[hi];
                amps[idx] = m[0] * a0 + m[1] * a1;
                amps[hi] = m[2] * a0 + m[3] * a1;
            }
            idx += 1;
        }
    } else {
        let (bi, bj) = (n - 1 - qs[0], n - 1 - qs[1]);
        let (mi, mj) = (1usize << bi, 1usize << bj);
        let dim = amps.len();
        for idx in 0..dim {
            if idx & (mi | mj) != 0 {
                continue;
            }
            let i00 = idx;
            let i01 = idx | mj;
            let i10 = idx | mi;
            let i11 = idx | mi | mj;
            let a = [amps[i00], amps[i01], amps[i10], amps[i11]];
            for (r, &target) in [i00, i01, i10, i11].iter().enumerate() {
                amps[target] =
                    m[r * 4] * a[0] + m[r * 4 + 1] * a[1] + m[r * 4 + 2] * a[2] + m[r * 4 + 3] * a[3];
            }
        }
    }
}

/// 2×(N/2) ladder: the ansatz couples along the perimeter ring, measurement
/// cross-links connect qubit i with qubit N−1−i.
#[derive(Debug, Clone)]
pub struct LadderLayout {
    pub n_qubits: usize,
}

impl LadderLayout {
    pub fn new(n_qubits: usize) -> Result<LadderLayout> {
        if n_qubits < 2 || n_qubits % 2 != 0 {
            return Err(Error::invalid(format!(
                "ladder layout needs an even qubit count ≥ 2, got {n_qubits}"
            )));
        }
        Ok(LadderLayout { n_qubits })
    }

    /// Perimeter ring edges (i, i+1 mod N).
    pub fn ring_edges(&self) -> Vec<(usize, usize)> {
        (0..self.n_qubits)
            .map(|i| (i, (i + 1) % self.n_qubits))
            .collect()
    }

    /// Cross couplers (i, N−1−i).
    pub fn cross_edges(&self) -> Vec<(usize, usize)> {
        (0..self.n_qubits / 2)
            .map(|i| (i, self.n_qubits - 1 - i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat_adjoint, mat_identity, mat_mul, phase_dist};
    use approx::assert_abs_diff_eq;

    #[test]
    fn gs_special_values() {
        let swap = Gate::Swap { a: 0, b: 1 }.matrix();
        assert!(phase_dist(&gs_matrix(0.0), &swap, 4) < 1e-15);
        let z_tilde = gs_matrix(std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(z_tilde[5].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z_tilde[10].re, -1.0, epsilon = 1e-15);
        // logical Hadamard block at π/4
        let h = gs_matrix(std::f64::consts::FRAC_PI_4);
        let r = 1.0 / 2.0_f64.sqrt();
        assert_abs_diff_eq!(h[5].re, r, epsilon = 1e-15);
        assert_abs_diff_eq!(h[6].re, r, epsilon = 1e-15);
        assert_abs_diff_eq!(h[9].re, r, epsilon = 1e-15);
        assert_abs_diff_eq!(h[10].re, -r, epsilon = 1e-15);
    }

    #[test]
    fn gs_is_an_involution() {
        for theta in [0.3, -1.1, 2.2] {
            let g = gs_matrix(theta);
            let sq = mat_mul(&g, &g, 4);
            assert!(phase_dist(&sq, &mat_identity(4), 4) < 1e-14);
        }
    }

    #[test]
    fn all_gate_matrices_unitary() {
        let gates = [
            Gate::GS { a: 0, b: 1, theta: 0.7 },
            Gate::CZ { a: 0, b: 1 },
            Gate::Swap { a: 0, b: 1 },
            Gate::SqrtSwap { a: 0, b: 1 },
            Gate::SqrtISwap { a: 0, b: 1 },
            Gate::CX { control: 0, target: 1 },
        ];
        for g in gates {
            let m = g.matrix();
            let prod = mat_mul(&mat_adjoint(&m, 4), &m, 4);
            assert!(
                phase_dist(&prod, &mat_identity(4), 4) < 1e-14,
                "{} not unitary",
                g.dump()
            );
        }
        for (x, axis, z) in [(0.3, -0.2, 1.0), (0.0, 0.0, 0.0), (1.2, 0.4, -0.9)] {
            let m = Gate::PhasedXZ { q: 0, x, axis, z }.matrix();
            let prod = mat_mul(&mat_adjoint(&m, 2), &m, 2);
            assert!(phase_dist(&prod, &mat_identity(2), 2) < 1e-14);
        }
    }

    #[test]
    fn sqrt_swap_squares_to_swap() {
        let m = Gate::SqrtSwap { a: 0, b: 1 }.matrix();
        let sq = mat_mul(&m, &m, 4);
        assert!(phase_dist(&sq, &Gate::Swap { a: 0, b: 1 }.matrix(), 4) < 1e-14);
        let mi = Gate::SqrtISwap { a: 0, b: 1 }.matrix();
        let sqi = mat_mul(&mi, &mi, 4);
        // iSWAP: middle block [[0, i],[i, 0]]
        assert_abs_diff_eq!(sqi[6].im, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sqi[9].im, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn layer_disjointness_enforced() {
        let mut c = Circuit::new(4);
        assert!(c
            .push_layer(vec![
                Gate::GS { a: 0, b: 1, theta: 0.1 },
                Gate::GS { a: 1, b: 2, theta: 0.1 },
            ])
            .is_err());
        assert!(c
            .push_layer(vec![
                Gate::GS { a: 0, b: 1, theta: 0.1 },
                Gate::GS { a: 2, b: 3, theta: 0.1 },
            ])
            .is_ok());
        assert!(c.push_gate(Gate::VirtualZ { q: 7, beta: 0.0 }).is_err());
    }

    #[test]
    fn circuit_unitary_matches_embedding() {
        let mut c = Circuit::new(3);
        c.push_gate(Gate::GS { a: 0, b: 2, theta: 0.4 }).unwrap();
        c.push_gate(Gate::PhasedXZ { q: 1, x: 0.3, axis: 0.1, z: -0.2 })
            .unwrap();
        let u = c.unitary().unwrap();
        let g1 = linalg::embed_2q(&gs_matrix(0.4), 0, 2, 3);
        let g2 = linalg::embed_1q(
            &Gate::PhasedXZ { q: 1, x: 0.3, axis: 0.1, z: -0.2 }.matrix(),
            1,
            3,
        );
        let expect = mat_mul(&g2, &g1, 8);
        assert!(phase_dist(&u, &expect, 8) < 1e-12);
    }

    #[test]
    fn dump_format() {
        let mut c = Circuit::new(4);
        c.push_layer(vec![
            Gate::GS { a: 0, b: 1, theta: 0.5 },
            Gate::CZ { a: 2, b: 3 },
        ])
        .unwrap();
        c.push_gate(Gate::VirtualZ { q: 0, beta: -0.25 }).unwrap();
        let dump = c.dump();
        assert_eq!(dump, "GS(0,1,0.5) CZ(2,3)\nVZ(0,-0.25)\n");
    }
}
