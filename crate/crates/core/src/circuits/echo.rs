//! Echo-verified phase-kick circuits: a cat state witnesses the phase
//! e^{iαO} picked up by the ansatz branch, the whole evolution is mirrored,
//! and the witness qubit is read out in the ±X/±Y bases conditioned on every
//! other qubit returning to 0.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;

use crate::circuits::schedule::{track_orbitals, OrbitalSlot};
use crate::circuits::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::pauli::PauliSum;

/// Physical qubit carrying the cat seed and the tomography readout.
pub const MEASUREMENT_QUBIT: usize = 1;

/// Diagonal-after-mapping operator targeted by one echo circuit, named by
/// register slots so the builder can locate the carriers after the ansatz.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvTarget {
    /// pair occupation sign Z on one slot
    Z(OrbitalSlot),
    /// hop-plus operator [Z_i + Z_j + X_iX_j + Y_iY_j]/2 on a slot pair
    DPlus(OrbitalSlot, OrbitalSlot),
    /// Z_iZ_j on a slot pair
    ZZ(OrbitalSlot, OrbitalSlot),
}

impl std::fmt::Display for EvTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvTarget::Z(a) => write!(f, "Z[{a}]"),
            EvTarget::DPlus(a, b) => write!(f, "D+[{a},{b}]"),
            EvTarget::ZZ(a, b) => write!(f, "ZZ[{a},{b}]"),
        }
    }
}

/// Readout basis for the witness qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tomography {
    XPlus,
    XMinus,
    YPlus,
    YMinus,
}

impl Tomography {
    pub const ALL: [Tomography; 4] = [
        Tomography::XPlus,
        Tomography::XMinus,
        Tomography::YPlus,
        Tomography::YMinus,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Tomography::XPlus => "x+",
            Tomography::XMinus => "x-",
            Tomography::YPlus => "y+",
            Tomography::YMinus => "y-",
        }
    }

    /// +1 for the + settings, −1 for the − settings.
    pub fn sign(&self) -> f64 {
        match self {
            Tomography::XPlus | Tomography::YPlus => 1.0,
            Tomography::XMinus | Tomography::YMinus => -1.0,
        }
    }

    pub fn is_x(&self) -> bool {
        matches!(self, Tomography::XPlus | Tomography::XMinus)
    }

    /// Rotation mapping (±X or ±Y) onto Z for computational readout.
    fn rotation(&self, q: usize) -> Gate {
        match self {
            Tomography::XPlus => Gate::PhasedXZ { q, x: FRAC_PI_4, axis: -FRAC_PI_4, z: 0.0 },
            Tomography::XMinus => Gate::PhasedXZ { q, x: -FRAC_PI_4, axis: -FRAC_PI_4, z: 0.0 },
            Tomography::YPlus => Gate::PhasedXZ { q, x: -FRAC_PI_4, axis: 0.0, z: 0.0 },
            Tomography::YMinus => Gate::PhasedXZ { q, x: FRAC_PI_4, axis: 0.0, z: 0.0 },
        }
    }
}

/// A built echo circuit plus everything the estimator needs to interpret it.
#[derive(Clone, Debug)]
pub struct EvCircuit {
    pub circuit: Circuit,
    pub n: usize,
    pub target: EvTarget,
    pub alpha: f64,
    pub basis: Tomography,
    pub measurement_qubit: usize,
    /// diagonal value of the kicked operator on the vacuum branch
    pub vacuum_eigenvalue: f64,
    /// Σ over field-active layers of the cat-branch excitation imbalance;
    /// the fitted phase drift is −2·h·(this)
    pub field_sensitivity: f64,
    pub circuit_id: String,
}

const H_EQUIV: fn(usize) -> Gate = |q| Gate::PhasedXZ {
    q,
    x: FRAC_PI_4,
    axis: -FRAC_PI_4,
    z: FRAC_PI_2,
};

fn qubit_of_slot(final_orbitals: &[OrbitalSlot], slot: OrbitalSlot) -> Result<usize> {
    final_orbitals
        .iter()
        .position(|&s| s == slot)
        .ok_or_else(|| Error::invalid(format!("slot {slot} not present in register")))
}

/// Phase kick inserted between the body and its mirror. Single-Z kicks are
/// frame rotations (zero-duration, noiseless); the ZZ kick is a physical
/// diagonal pulse and attracts layer noise like any other two-qubit gate.
enum Kick {
    SingleZ(usize),
    PairZZ(usize, usize),
}

struct EchoFrame {
    /// pre-kick layers excluding the cat preparation
    body: Vec<Vec<Gate>>,
    /// excitation count of the cat branch after each body layer
    body_weights: Vec<f64>,
    kick: Kick,
}

/// Ansatz plus mapping layers in time order, with the cat-branch weight after
/// each layer. Every mapping layer conserves excitation number, so the branch
/// weight is exact throughout.
fn echo_body(n: usize, n_layers: usize, theta: &[f64], target: EvTarget) -> Result<EchoFrame> {
    use crate::circuits::schedule::build_upccd_variant;
    let ansatz = build_upccd_variant(n, n_layers, theta, 0)?;
    let track = track_orbitals(n, n_layers, 0)?;
    let half = (n / 2) as f64;

    let mut body: Vec<Vec<Gate>> = Vec::new();
    let mut body_weights: Vec<f64> = Vec::new();
    for layer in &ansatz.layers {
        body.push(layer.clone());
        body_weights.push(half);
    }
    let kick = match target {
        EvTarget::Z(a) => Kick::SingleZ(qubit_of_slot(&track.final_orbitals, a)?),
        EvTarget::DPlus(a, b) => {
            let qa = qubit_of_slot(&track.final_orbitals, a)?;
            let qb = qubit_of_slot(&track.final_orbitals, b)?;
            body.push(vec![Gate::GS { a: qa, b: qb, theta: FRAC_PI_4 }]);
            body_weights.push(half);
            Kick::SingleZ(qa)
        }
        EvTarget::ZZ(a, b) => {
            let qa = qubit_of_slot(&track.final_orbitals, a)?;
            let qb = qubit_of_slot(&track.final_orbitals, b)?;
            Kick::PairZZ(qa, qb)
        }
    };
    Ok(EchoFrame { body, body_weights, kick })
}

fn push_cat_prep(
    circuit: &mut Circuit,
    n: usize,
    weights: &mut Vec<f64>,
) -> Result<()> {
    circuit.push_layer(vec![H_EQUIV(MEASUREMENT_QUBIT)])?;
    weights.push(1.0);
    for i in 0..(n / 2 - 1) {
        circuit.push_layer(vec![Gate::CX { control: 2 * i + 1, target: 2 * i + 3 }])?;
        weights.push((i + 2) as f64);
    }
    Ok(())
}

fn push_cat_unprep(
    circuit: &mut Circuit,
    n: usize,
    weights: &mut Vec<f64>,
    with_final_h: bool,
) -> Result<()> {
    for i in (0..(n / 2 - 1)).rev() {
        circuit.push_layer(vec![Gate::CX { control: 2 * i + 1, target: 2 * i + 3 }])?;
        weights.push((i + 1) as f64);
    }
    if with_final_h {
        circuit.push_layer(vec![H_EQUIV(MEASUREMENT_QUBIT)])?;
        weights.push(0.0); // branch collapsed; layer still counted as active
    }
    Ok(())
}

/// Build one echo circuit for `target` at kick angle `alpha`, read out in
/// `basis`. The mirror reuses the same angles because every GS gate is an
/// involution; the tomography rotation is the only layer after the echo and
/// contributes nothing to the field sensitivity.
pub fn build_ev_circuit(
    n: usize,
    n_layers: usize,
    theta: &[f64],
    target: EvTarget,
    alpha: f64,
    basis: Tomography,
) -> Result<EvCircuit> {
    let frame = echo_body(n, n_layers, theta, target)?;
    let mut circuit = Circuit::new(n);
    let mut weights: Vec<f64> = Vec::new();

    push_cat_prep(&mut circuit, n, &mut weights)?;
    for (layer, &w) in frame.body.iter().zip(&frame.body_weights) {
        circuit.push_layer(layer.clone())?;
        weights.push(w);
    }
    match frame.kick {
        // frame rotation: virtual layer, no weight entry
        Kick::SingleZ(q) => circuit.push_layer(vec![Gate::VirtualZ { q, beta: alpha }])?,
        // physical diagonal pulse: conserves the branch weight, counts as a
        // field-active layer like the body it sits between
        Kick::PairZZ(a, b) => {
            circuit.push_layer(vec![Gate::ZZPhase { a, b, alpha }])?;
            weights.push((n / 2) as f64);
        }
    }
    for (layer, &w) in frame.body.iter().zip(&frame.body_weights).rev() {
        circuit.push_layer(layer.clone())?;
        weights.push(w);
    }
    push_cat_unprep(&mut circuit, n, &mut weights, false)?;
    circuit.push_layer(vec![basis.rotation(MEASUREMENT_QUBIT)])?;

    // field_sensitivity: excitation imbalance summed over field-active layers;
    // the final rotation precedes readout immediately, so diagonal phases
    // after it cannot shift any outcome probability and it is left out
    let field_sensitivity: f64 = weights.iter().sum();
    debug_assert_eq!(weights.len(), circuit.noisy_layer_count() - 1);

    Ok(EvCircuit {
        circuit,
        n,
        target,
        alpha,
        basis,
        measurement_qubit: MEASUREMENT_QUBIT,
        vacuum_eigenvalue: 1.0,
        field_sensitivity,
        circuit_id: format!("ev/{target}/a{alpha:.6}/{}", basis.label()),
    })
}

/// Identity echo used to gauge circuit fidelity: cat prep, ansatz, mirror,
/// cat unprep with the closing Hadamard-equivalent. Noiseless output is
/// exactly |0…0⟩.
pub fn build_loschmidt_circuit(n: usize, n_layers: usize, theta: &[f64]) -> Result<Circuit> {
    use crate::circuits::schedule::build_upccd_variant;
    let ansatz = build_upccd_variant(n, n_layers, theta, 0)?;
    let mut circuit = Circuit::new(n);
    let mut weights = Vec::new();
    push_cat_prep(&mut circuit, n, &mut weights)?;
    for layer in &ansatz.layers {
        circuit.push_layer(layer.clone())?;
    }
    for layer in ansatz.layers.iter().rev() {
        circuit.push_layer(layer.clone())?;
    }
    push_cat_unprep(&mut circuit, n, &mut weights, true)?;
    Ok(circuit)
}

/// The kicked operator expressed on post-ansatz qubit positions — the
/// reference for what the echo estimates.
pub fn target_observable(n: usize, n_layers: usize, target: EvTarget) -> Result<PauliSum> {
    use crate::pauli::Pauli;
    let track = track_orbitals(n, n_layers, 0)?;
    let mut sum = PauliSum::new(n);
    match target {
        EvTarget::Z(a) => {
            let q = qubit_of_slot(&track.final_orbitals, a)?;
            sum.add_ops(&[(q, Pauli::Z)], 1.0)?;
        }
        EvTarget::DPlus(a, b) => {
            let qa = qubit_of_slot(&track.final_orbitals, a)?;
            let qb = qubit_of_slot(&track.final_orbitals, b)?;
            sum.add_ops(&[(qa, Pauli::Z)], 0.5)?;
            sum.add_ops(&[(qb, Pauli::Z)], 0.5)?;
            sum.add_ops(&[(qa, Pauli::X), (qb, Pauli::X)], 0.5)?;
            sum.add_ops(&[(qa, Pauli::Y), (qb, Pauli::Y)], 0.5)?;
        }
        EvTarget::ZZ(a, b) => {
            let qa = qubit_of_slot(&track.final_orbitals, a)?;
            let qb = qubit_of_slot(&track.final_orbitals, b)?;
            sum.add_ops(&[(qa, Pauli::Z), (qb, Pauli::Z)], 1.0)?;
        }
    }
    Ok(sum)
}

/// Witness signal from a final statevector: 2·ā(0…0)·a(witness bit), whose
/// noiseless value is e^{−iα}(cos α + i sin α⟨O⟩).
pub fn ideal_signal(amps: &[Complex64], n: usize, measurement_qubit: usize) -> Complex64 {
    let a0 = amps[0];
    let a1 = amps[1 << (n - 1 - measurement_qubit)];
    2.0 * a0.conj() * a1
}
