//! Two-copy purification circuits: both registers prepare the ansatz, a
//! cross layer of GS(π/4) gates diagonalizes the pair-transfer observables,
//! and ratio estimators on the joint readout realize Tr[ρ²O]/Tr[ρ²].

use std::f64::consts::FRAC_PI_4;

use crate::circuits::echo::EvTarget;
use crate::circuits::schedule::{build_upccd_variant, initial_bitstring, track_orbitals};
use crate::circuits::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::simulator::Symmetry;

pub type VdTarget = EvTarget;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VdMode {
    /// registers paired index-to-index, cross layer applied directly
    Logical,
    /// second register compiled mirrored and re-aligned by one SWAP routing
    /// layer along its cross couplers before pairing
    LayoutAware,
}

#[derive(Clone, Debug)]
pub struct VdCircuit {
    pub circuit: Circuit,
    /// qubits per register; the joint circuit uses 2n
    pub n: usize,
    pub mode: VdMode,
    pub target: VdTarget,
    /// register-A qubit carrying the mapped target Z
    pub target_qubit: usize,
    /// transfer pairs (A qubit, B qubit) coupled by the cross layer
    pub pairs: Vec<(usize, usize)>,
    pub symmetry: Symmetry,
    pub circuit_id: String,
}

impl VdCircuit {
    /// Joint-register computational input: the Fermi sea in each copy.
    pub fn input_bitstring(&self) -> usize {
        let sea = initial_bitstring(self.n, 0);
        let b_register = match self.mode {
            VdMode::Logical => sea,
            VdMode::LayoutAware => {
                // the mirrored register wants the sea pattern reversed
                let mut out = 0usize;
                for q in 0..self.n {
                    if sea & (1 << q) != 0 {
                        out |= 1 << (self.n - 1 - q);
                    }
                }
                out
            }
        };
        (sea << self.n) | b_register
    }

    /// Diagonal value of the transfer observable for one joint readout:
    /// numerator (target pair replaced by the distilled-Z table) over the
    /// product of per-pair parity factors.
    pub fn pair_bits(&self, joint: usize, pair: (usize, usize)) -> (usize, usize) {
        let nbits = 2 * self.n;
        let a = (joint >> (nbits - 1 - pair.0)) & 1;
        let b = (joint >> (nbits - 1 - pair.1)) & 1;
        (a, b)
    }
}

fn shift_layers(layers: &[Vec<Gate>], offset: usize, mirror_within: Option<usize>) -> Vec<Vec<Gate>> {
    let map = |q: usize| match mirror_within {
        Some(n) => offset + (n - 1 - q),
        None => offset + q,
    };
    layers
        .iter()
        .map(|layer| {
            layer
                .iter()
                .map(|g| match *g {
                    Gate::GS { a, b, theta } => Gate::GS { a: map(a), b: map(b), theta },
                    Gate::CX { control, target } => {
                        Gate::CX { control: map(control), target: map(target) }
                    }
                    Gate::Swap { a, b } => Gate::Swap { a: map(a), b: map(b) },
                    Gate::CZ { a, b } => Gate::CZ { a: map(a), b: map(b) },
                    Gate::SqrtSwap { a, b } => Gate::SqrtSwap { a: map(a), b: map(b) },
                    Gate::SqrtISwap { a, b } => Gate::SqrtISwap { a: map(a), b: map(b) },
                    Gate::ZZPhase { a, b, alpha } => Gate::ZZPhase { a: map(a), b: map(b), alpha },
                    Gate::PhasedXZ { q, x, axis, z } => Gate::PhasedXZ { q: map(q), x, axis, z },
                    Gate::VirtualZ { q, beta } => Gate::VirtualZ { q: map(q), beta },
                })
                .collect()
        })
        .collect()
}

fn merge_parallel(a: Vec<Vec<Gate>>, b: Vec<Vec<Gate>>) -> Result<Vec<Vec<Gate>>> {
    if a.len() != b.len() {
        return Err(Error::dim("register layer counts differ"));
    }
    Ok(a.into_iter()
        .zip(b)
        .map(|(mut la, lb)| {
            la.extend(lb);
            la
        })
        .collect())
}

/// Build the two-copy purification circuit for one target observable.
pub fn build_vd_circuit(
    n: usize,
    n_layers: usize,
    theta: &[f64],
    target: VdTarget,
    mode: VdMode,
) -> Result<VdCircuit> {
    let ansatz = build_upccd_variant(n, n_layers, theta, 0)?;
    let track = track_orbitals(n, n_layers, 0)?;
    let qubit_of = |slot| {
        track
            .final_orbitals
            .iter()
            .position(|&s| s == slot)
            .ok_or_else(|| Error::invalid(format!("slot {slot} not present in register")))
    };

    // per-register mapping bringing the target onto single-qubit Z carriers
    let mut mapping: Vec<Vec<Gate>> = Vec::new();
    let (target_qubit, symmetry) = match target {
        VdTarget::Z(a) => (qubit_of(a)?, Symmetry::Number),
        VdTarget::DPlus(a, b) => {
            let qa = qubit_of(a)?;
            let qb = qubit_of(b)?;
            mapping.push(vec![Gate::GS { a: qa, b: qb, theta: FRAC_PI_4 }]);
            (qa, Symmetry::Number)
        }
        VdTarget::ZZ(a, b) => {
            let qa = qubit_of(a)?;
            let qb = qubit_of(b)?;
            mapping.push(vec![Gate::CX { control: qb, target: qa }]);
            (qa, Symmetry::Parity)
        }
    };

    let mirror = match mode {
        VdMode::Logical => None,
        VdMode::LayoutAware => Some(n),
    };
    let body_a = {
        let mut v = ansatz.layers.clone();
        v.extend(mapping.clone());
        v
    };
    let body_b = shift_layers(&body_a, n, mirror);
    let body_a = shift_layers(&body_a, 0, None);
    let mut layers = merge_parallel(body_a, body_b)?;

    if mode == VdMode::LayoutAware {
        // re-align the mirrored register along its own cross couplers
        let routing: Vec<Gate> = (0..n / 2)
            .map(|c| Gate::Swap { a: n + c, b: n + (n - 1 - c) })
            .collect();
        layers.push(routing);
    }

    let pairs: Vec<(usize, usize)> = (0..n).map(|q| (q, n + q)).collect();
    layers.push(
        pairs
            .iter()
            .map(|&(a, b)| Gate::GS { a, b, theta: FRAC_PI_4 })
            .collect(),
    );

    let mut circuit = Circuit::new(2 * n);
    for layer in layers {
        circuit.push_layer(layer)?;
    }

    let mode_tag = match mode {
        VdMode::Logical => "logical",
        VdMode::LayoutAware => "layout",
    };
    Ok(VdCircuit {
        circuit,
        n,
        mode,
        target,
        target_qubit,
        pairs,
        symmetry,
        circuit_id: format!("vd/{target}/{mode_tag}"),
    })
}

/// Denominator factor for one transfer pair's bits: −1 on (1,0), +1 otherwise.
pub fn denominator_factor(bits: (usize, usize)) -> f64 {
    if bits == (1, 0) {
        -1.0
    } else {
        1.0
    }
}

/// Numerator factor at the target pair: +1 on (0,0), −1 on (1,1), 0 otherwise.
pub fn numerator_factor(bits: (usize, usize)) -> f64 {
    match bits {
        (0, 0) => 1.0,
        (1, 1) => -1.0,
        _ => 0.0,
    }
}

/// Diagonal numerator/denominator values for a joint readout bitstring.
pub fn transfer_values(vd: &VdCircuit, joint: usize) -> (f64, f64) {
    let mut den = 1.0;
    let mut num_rest = 1.0;
    let mut num_target = 0.0;
    for &pair in &vd.pairs {
        let bits = vd.pair_bits(joint, pair);
        den *= denominator_factor(bits);
        if pair.0 == vd.target_qubit {
            num_target = numerator_factor(bits);
        } else {
            num_rest *= denominator_factor(bits);
        }
    }
    (num_rest * num_target, den)
}
