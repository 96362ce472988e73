//! Infinite-shot estimates: every mitigation strategy evaluated on exact
//! readout distributions instead of sampled records. Small registers evolve
//! as density matrices; two-copy purification at larger N contracts a
//! factorized pair-transfer network so the joint register never materializes.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;

use crate::circuits::distill::{
    build_vd_circuit, denominator_factor, numerator_factor, transfer_values, VdMode,
};
use crate::circuits::echo::{build_ev_circuit, build_loschmidt_circuit, EvTarget, Tomography};
use crate::circuits::schedule::{
    build_upccd, initial_bitstring, measurement_circuits, track_orbitals, OrbitalSlot,
};
use crate::circuits::{gs_matrix, Circuit, Gate};
use crate::error::{Error, Result};
use crate::estimation::{optimal_coefficients, CoefficientProblem};
use crate::mitigation::{clip_expectation, ev_estimate, EvEstimate, EvReading, EvReadout, MitigationMethod};
use crate::models::{GroupKind, MeasurementGroup, MeasurementScheme, ModelSystem};
use crate::pauli::{Pauli, PauliSum};
use crate::simulator::{
    apply_circuit, exact_distribution, rng::stream_rng, DensityState, NoiseModel, QuantumState,
    Symmetry,
};

/// Kick angles used by every echo fit.
pub const EV_KICK_ANGLES: [f64; 3] = [FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4];

/// Largest register the joint two-copy density simulation is allowed to use;
/// beyond it the factorized contraction takes over.
const JOINT_VD_LIMIT: usize = 10;

#[derive(Clone, Debug)]
pub struct OracleEstimate {
    pub value: f64,
    /// probability mass surviving postselection (1 when none applies)
    pub keep_fraction: f64,
    /// echo fidelity F averaged over operators (EV only)
    pub fidelity: Option<f64>,
    /// background field inferred from the echo phase drift (EV only)
    pub inferred_field: Option<f64>,
    /// pair occupation ⟨n_p⟩ per orbital
    pub occupations: Vec<f64>,
}

/// Noiseless ansatz state for a model at the given depth.
pub fn exact_state(n: usize, n_layers: usize, theta: &[f64]) -> Result<Vec<Complex64>> {
    let mut psi = vec![Complex64::new(0.0, 0.0); 1 << n];
    psi[initial_bitstring(n, 0)] = Complex64::new(1.0, 0.0);
    build_upccd(n, Some(n_layers), theta)?.apply_to_statevector(&mut psi)?;
    Ok(psi)
}

/// Exact noiseless ⟨H⟩ at the given ansatz parameters.
pub fn exact_energy(system: &ModelSystem, n_layers: usize, theta: &[f64]) -> Result<f64> {
    let psi = exact_state(system.n, n_layers, theta)?;
    let track = track_orbitals(system.n, n_layers, 0)?;
    system
        .hamiltonian_on_layout(&track.final_orbitals)?
        .expectation_statevector(&psi)
}

/// Exact noiseless value of one echo/distillation target observable.
pub fn exact_observable(n: usize, n_layers: usize, theta: &[f64], target: EvTarget) -> Result<f64> {
    let psi = exact_state(n, n_layers, theta)?;
    crate::circuits::echo::target_observable(n, n_layers, target)?.expectation_statevector(&psi)
}

/// Probability of the all-zeros return from the identity echo.
pub fn loschmidt_oracle(n: usize, n_layers: usize, theta: &[f64], noise: &NoiseModel) -> Result<f64> {
    let circuit = build_loschmidt_circuit(n, n_layers, theta)?;
    let probs = circuit_distribution(&circuit, 0, noise)?;
    Ok(probs[0])
}

fn circuit_distribution(circuit: &Circuit, input: usize, noise: &NoiseModel) -> Result<Vec<f64>> {
    let rho = DensityState::basis(circuit.n_qubits, input)?;
    let mut rng = stream_rng(0, "oracle", 0);
    let out = apply_circuit(&QuantumState::Density(rho), circuit, noise, &mut rng)?;
    Ok(exact_distribution(&out, noise))
}

/// ⟨obs⟩ for a diagonal (Z/I) observable under an outcome distribution.
pub fn diagonal_expectation_dist(probs: &[f64], n_bits: usize, obs: &PauliSum) -> Result<f64> {
    let mut masks = Vec::new();
    for (factors, coeff) in obs.iter() {
        let mut zmask = 0usize;
        for (q, p) in factors.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::Z => zmask |= 1 << (n_bits - 1 - q),
                _ => {
                    return Err(Error::invalid(
                        "diagonal readout asked for an observable with X/Y content",
                    ))
                }
            }
        }
        masks.push((zmask, coeff));
    }
    let mut total = 0.0;
    let mut acc = 0.0;
    for (bits, &p) in probs.iter().enumerate() {
        total += p;
        let mut v = 0.0;
        for &(zmask, coeff) in &masks {
            let sign = if (bits & zmask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            v += sign * coeff;
        }
        acc += p * v;
    }
    if total <= 0.0 {
        return Err(Error::Empty("empty outcome distribution".into()));
    }
    Ok(acc / total)
}

/// Filter a distribution on the declared symmetry; returns the kept
/// (unnormalized) distribution and the kept mass.
pub fn postselect_dist(
    probs: &[f64],
    n_bits: usize,
    symmetry: Symmetry,
    reference_weight: u32,
) -> Result<(Vec<f64>, f64)> {
    let keep = |bits: usize| match symmetry {
        Symmetry::Number => (bits as u64).count_ones() == reference_weight,
        Symmetry::Parity => (bits as u64).count_ones() % 2 == reference_weight % 2,
        Symmetry::None => true,
    };
    let mut kept = vec![0.0; probs.len()];
    let mut mass = 0.0;
    for (bits, &p) in probs.iter().enumerate() {
        if keep(bits) {
            kept[bits] = p;
            mass += p;
        }
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 || mass <= 1e-15 {
        return Err(Error::Empty(format!(
            "postselection on {n_bits}-bit records removed all probability mass"
        )));
    }
    Ok((kept, mass / total))
}

/// One measurement group realized as a circuit: what to run, which basis
/// state to feed it, and the layout-frame diagonal observables whose readout
/// estimates the group's orbital-frame observables, index for index.
pub struct GroupExecution {
    pub circuit: Circuit,
    pub input: usize,
    pub readout: Vec<PauliSum>,
    pub symmetry: Symmetry,
}

pub(crate) fn layout_perm(system: &ModelSystem, orbital_of_qubit: &[OrbitalSlot]) -> Vec<usize> {
    let mut perm = vec![0usize; system.n];
    for (q, slot) in orbital_of_qubit.iter().enumerate() {
        perm[system.orbital_of_slot(*slot)] = q;
    }
    perm
}

/// X/Y support of a single-term observable: (qubits, pauli) pairs.
fn term_pattern(obs: &PauliSum) -> Result<Vec<(usize, Pauli)>> {
    let mut terms = obs.iter();
    let pattern: Vec<(usize, Pauli)> = match terms.next() {
        Some((factors, _)) => factors
            .iter()
            .enumerate()
            .filter(|(_, p)| !matches!(p, Pauli::I))
            .map(|(q, &p)| (q, p))
            .collect(),
        None => return Err(Error::Empty("observable with no terms".into())),
    };
    Ok(pattern)
}

const H_EQUIV: fn(usize) -> Gate = |q| Gate::PhasedXZ {
    q,
    x: FRAC_PI_4,
    axis: -FRAC_PI_4,
    z: FRAC_PI_2,
};

/// Compile one measurement group into an executable circuit + readout plan.
/// Echo/distillation groups have their own estimators and are not handled
/// here.
pub fn group_execution(
    system: &ModelSystem,
    group: &MeasurementGroup,
    n_layers: usize,
    theta: &[f64],
) -> Result<GroupExecution> {
    let n = system.n;
    match &group.kind {
        GroupKind::Computational => {
            let circuit = build_upccd(n, Some(n_layers), theta)?;
            let track = track_orbitals(n, n_layers, 0)?;
            let perm = layout_perm(system, &track.final_orbitals);
            let readout = group
                .observables
                .iter()
                .map(|o| o.permuted(&perm))
                .collect::<Result<Vec<_>>>()?;
            Ok(GroupExecution {
                circuit,
                input: initial_bitstring(n, 0),
                readout,
                symmetry: group.symmetry,
            })
        }
        GroupKind::CrossLink { variant, with_swap } => {
            if n_layers != n / 2 {
                return Err(Error::invalid(
                    "cross-coupler readout is defined at the default ansatz depth N/2",
                ));
            }
            let mv = measurement_circuits(n)?
                .into_iter()
                .find(|m| m.variant == *variant && m.with_swap_layer == *with_swap)
                .ok_or_else(|| Error::invalid("measurement variant not found"))?;
            let circuit = mv.circuit(n, n_layers, theta)?;
            // orbital pair of each cross link, for matching observables
            let link_orbitals: Vec<((usize, usize), (usize, usize))> = mv
                .cross_links
                .iter()
                .map(|&((qa, qb), (sa, sb))| {
                    ((qa, qb), (system.orbital_of_slot(sa), system.orbital_of_slot(sb)))
                })
                .collect();
            let find_link = |p: usize, q: usize| {
                link_orbitals
                    .iter()
                    .find(|(_, (a, b))| (*a == p && *b == q) || (*a == q && *b == p))
                    .map(|&(qs, os)| (qs, os))
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "observable on orbitals ({p},{q}) is not on a cross coupler of this variant"
                        ))
                    })
            };
            let mut readout = Vec::with_capacity(group.observables.len());
            for obs in &group.observables {
                let pattern = term_pattern(obs)?;
                let has_x = obs
                    .iter()
                    .any(|(f, _)| f.iter().any(|p| matches!(p, Pauli::X)));
                if has_x {
                    // hop operator: the GS(π/4) suffix maps D⁺ onto Z of the
                    // link's first qubit and D⁻ onto the second
                    let (xs, sign) = obs
                        .iter()
                        .find_map(|(f, c)| {
                            let xs: Vec<usize> = f
                                .iter()
                                .enumerate()
                                .filter(|(_, p)| matches!(p, Pauli::X))
                                .map(|(q, _)| q)
                                .collect();
                            (xs.len() == 2).then_some((xs, c))
                        })
                        .ok_or_else(|| Error::invalid("unrecognized hop observable"))?;
                    let ((qa, qb), (pa, _)) = find_link(xs[0], xs[1])?;
                    let _ = pa;
                    let target = if sign > 0.0 { qa } else { qb };
                    let mut z = PauliSum::new(n);
                    z.add_ops(&[(target, Pauli::Z)], 1.0)?;
                    readout.push(z);
                } else {
                    match pattern.as_slice() {
                        [(p, Pauli::Z), (q, Pauli::Z)] => {
                            let ((qa, qb), _) = find_link(*p, *q)?;
                            let mut zz = PauliSum::new(n);
                            zz.add_ops(&[(qa, Pauli::Z), (qb, Pauli::Z)], 1.0)?;
                            readout.push(zz);
                        }
                        _ => {
                            return Err(Error::invalid(
                                "cross-coupler groups carry only hop and ZZ observables",
                            ))
                        }
                    }
                }
            }
            Ok(GroupExecution {
                circuit,
                input: initial_bitstring(n, mv.variant),
                readout,
                symmetry: group.symmetry,
            })
        }
        GroupKind::SingleBasis { x_orbitals, y_orbitals } => {
            let mut circuit = build_upccd(n, Some(n_layers), theta)?;
            let track = track_orbitals(n, n_layers, 0)?;
            let perm = layout_perm(system, &track.final_orbitals);
            if !y_orbitals.is_empty() {
                circuit.push_layer(
                    y_orbitals
                        .iter()
                        .map(|&o| Gate::VirtualZ { q: perm[o], beta: FRAC_PI_4 })
                        .collect(),
                )?;
            }
            let rotated: Vec<usize> = x_orbitals.iter().chain(y_orbitals).map(|&o| perm[o]).collect();
            circuit.push_layer(rotated.iter().map(|&q| H_EQUIV(q)).collect())?;
            let mut readout = Vec::with_capacity(group.observables.len());
            for obs in &group.observables {
                let mut z = PauliSum::new(n);
                for (factors, coeff) in obs.iter() {
                    let ops: Vec<(usize, Pauli)> = factors
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| !matches!(p, Pauli::I))
                        .map(|(q, _)| (perm[q], Pauli::Z))
                        .collect();
                    z.add_ops(&ops, coeff)?;
                }
                readout.push(z);
            }
            Ok(GroupExecution {
                circuit,
                input: initial_bitstring(n, 0),
                readout,
                symmetry: group.symmetry,
            })
        }
        GroupKind::PairOperator { .. } => Err(Error::invalid(
            "pair-operator groups are estimated by the echo/distillation paths",
        )),
    }
}

/// The Hamiltonian decomposed over the observables a group family measures:
/// flattened operators, their optimal combination weights, and the identity
/// offset added back after combination.
pub struct EnergyDecomposition {
    pub operators: Vec<PauliSum>,
    pub group_of_operator: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub offset: f64,
}

pub fn energy_decomposition(
    system: &ModelSystem,
    groups: &[MeasurementGroup],
) -> Result<EnergyDecomposition> {
    let mut operators = Vec::new();
    let mut group_of_operator = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        for obs in &g.observables {
            operators.push(obs.clone());
            group_of_operator.push(gi);
        }
    }
    if operators.is_empty() {
        return Err(Error::Empty("no observables to combine".into()));
    }
    let mut target = PauliSum::new(system.n);
    let mut offset = 0.0;
    for (factors, coeff) in system.hamiltonian.iter() {
        if factors.iter().all(|p| matches!(p, Pauli::I)) {
            offset += coeff;
        } else {
            target.add_term(factors, coeff)?;
        }
    }
    let coefficients = optimal_coefficients(&CoefficientProblem {
        operators: operators.clone(),
        target,
        sigma: None,
    })?;
    Ok(EnergyDecomposition {
        operators,
        group_of_operator,
        coefficients,
        offset,
    })
}

/// Pair occupations from per-orbital ⟨Z⟩ estimates; empty when the scheme
/// did not measure every orbital.
fn occupations_from_z(n: usize, z_of_orbital: &BTreeMap<usize, f64>) -> Vec<f64> {
    if (0..n).all(|p| z_of_orbital.contains_key(&p)) {
        (0..n).map(|p| (1.0 - z_of_orbital[&p]) / 2.0).collect()
    } else {
        Vec::new()
    }
}

/// Raw or postselected energy at infinite shots under the given scheme.
pub fn raw_ps_energy_oracle(
    system: &ModelSystem,
    n_layers: usize,
    theta: &[f64],
    scheme: MeasurementScheme,
    noise: &NoiseModel,
    postselected: bool,
) -> Result<OracleEstimate> {
    let groups = system.measurement_groups(scheme)?;
    if groups.iter().any(|g| matches!(g.kind, GroupKind::PairOperator { .. })) {
        return Err(Error::invalid(
            "per-operator echo scheme has no raw readout; use the computational or cross-coupler schemes",
        ));
    }
    let decomp = energy_decomposition(system, &groups)?;
    let n = system.n;
    let half = (n / 2) as u32;

    let mut estimates = vec![0.0; decomp.operators.len()];
    let mut keep_acc = 0.0;
    for (gi, group) in groups.iter().enumerate() {
        let exec = group_execution(system, group, n_layers, theta)?;
        let probs = circuit_distribution(&exec.circuit, exec.input, noise)?;
        let (kept, keep) = if postselected {
            postselect_dist(&probs, n, exec.symmetry, half)?
        } else {
            (probs, 1.0)
        };
        keep_acc += keep;
        let mut flat = decomp
            .group_of_operator
            .iter()
            .enumerate()
            .filter(|(_, &g)| g == gi)
            .map(|(k, _)| k);
        for ro in &exec.readout {
            let k = flat.next().expect("operator flattening matches group order");
            estimates[k] = clip_expectation(diagonal_expectation_dist(&kept, n, ro)?);
        }
    }
    // occupations come from a plain computational-readout run so every
    // orbital has an estimate regardless of which terms the model carries
    let plain = build_upccd(n, Some(n_layers), theta)?;
    let track = track_orbitals(n, n_layers, 0)?;
    let perm = layout_perm(system, &track.final_orbitals);
    let probs = circuit_distribution(&plain, initial_bitstring(n, 0), noise)?;
    let (kept, _) = if postselected {
        postselect_dist(&probs, n, Symmetry::Number, half)?
    } else {
        (probs, 1.0)
    };
    let mut occupations = Vec::with_capacity(n);
    for p in 0..n {
        let mut z = PauliSum::new(n);
        z.add_ops(&[(perm[p], Pauli::Z)], 1.0)?;
        occupations.push((1.0 - diagonal_expectation_dist(&kept, n, &z)?) / 2.0);
    }
    let value = decomp
        .coefficients
        .iter()
        .zip(&estimates)
        .map(|(c, e)| c * e)
        .sum::<f64>()
        + decomp.offset;
    Ok(OracleEstimate {
        value,
        keep_fraction: keep_acc / groups.len() as f64,
        fidelity: None,
        inferred_field: None,
        occupations,
    })
}

/// One echoed operator at infinite shots: exact per-setting readouts fed to
/// the three-angle fit.
pub fn ev_observable_oracle(
    n: usize,
    n_layers: usize,
    theta: &[f64],
    target: EvTarget,
    noise: &NoiseModel,
) -> Result<(EvEstimate, f64)> {
    let mut readings = Vec::with_capacity(EV_KICK_ANGLES.len() * Tomography::ALL.len());
    let mut keep_acc = 0.0;
    let mut sensitivity = 0.0;
    let mut vacuum = 1.0;
    for &alpha in &EV_KICK_ANGLES {
        for basis in Tomography::ALL {
            let ev = build_ev_circuit(n, n_layers, theta, target, alpha, basis)?;
            let probs = circuit_distribution(&ev.circuit, 0, noise)?;
            let mbit = 1usize << (n - 1 - ev.measurement_qubit);
            let m_plus = probs[0];
            let m_minus = probs[mbit];
            let m_rest = (1.0 - m_plus - m_minus).max(0.0);
            keep_acc += m_plus + m_minus;
            sensitivity = ev.field_sensitivity;
            vacuum = ev.vacuum_eigenvalue;
            readings.push(EvReading {
                alpha,
                basis,
                readout: EvReadout { m_plus, m_minus, m_rest },
            });
        }
    }
    let est = ev_estimate(&readings, vacuum, Some(sensitivity))?;
    Ok((est, keep_acc / readings.len() as f64))
}

/// Echo-verified energy at infinite shots: per-operator circuits, optimal
/// recombination.
pub fn ev_energy_oracle(
    system: &ModelSystem,
    n_layers: usize,
    theta: &[f64],
    noise: &NoiseModel,
) -> Result<OracleEstimate> {
    let groups = system.measurement_groups(MeasurementScheme::XxYyIzZi)?;
    let decomp = energy_decomposition(system, &groups)?;
    let mut estimates = vec![0.0; decomp.operators.len()];
    let mut keep_acc = 0.0;
    let mut fid_acc = 0.0;
    let mut field_acc = 0.0;
    let mut z_of_orbital = BTreeMap::new();
    for (gi, group) in groups.iter().enumerate() {
        let target = match &group.kind {
            GroupKind::PairOperator { target } => *target,
            _ => return Err(Error::invalid("echo scheme produced a non-echo group")),
        };
        let (est, keep) = ev_observable_oracle(system.n, n_layers, theta, target, noise)?;
        let k = decomp
            .group_of_operator
            .iter()
            .position(|&g| g == gi)
            .expect("each group carries one operator");
        estimates[k] = clip_expectation(est.observable);
        keep_acc += keep;
        fid_acc += est.fidelity;
        field_acc += est.inferred_field.unwrap_or(0.0);
        if let EvTarget::Z(slot) = target {
            z_of_orbital.insert(system.orbital_of_slot(slot), estimates[k]);
        }
    }
    let m = groups.len() as f64;
    let value = decomp
        .coefficients
        .iter()
        .zip(&estimates)
        .map(|(c, e)| c * e)
        .sum::<f64>()
        + decomp.offset;
    Ok(OracleEstimate {
        value,
        keep_fraction: keep_acc / m,
        fidelity: Some(fid_acc / m),
        inferred_field: Some(field_acc / m),
        occupations: occupations_from_z(system.n, &z_of_orbital),
    })
}

/// One distilled operator at infinite shots. Joint density evolution while
/// the two copies fit in the density budget, factorized contraction beyond.
pub fn vd_observable_oracle(
    n: usize,
    n_layers: usize,
    theta: &[f64],
    target: EvTarget,
    noise: &NoiseModel,
    postselected: bool,
) -> Result<(f64, f64)> {
    if 2 * n <= JOINT_VD_LIMIT {
        vd_oracle_joint(n, n_layers, theta, target, noise, postselected)
    } else {
        vd_oracle_factorized(n, n_layers, theta, target, noise, postselected)
    }
}

fn vd_oracle_joint(
    n: usize,
    n_layers: usize,
    theta: &[f64],
    target: EvTarget,
    noise: &NoiseModel,
    postselected: bool,
) -> Result<(f64, f64)> {
    let vd = build_vd_circuit(n, n_layers, theta, target, VdMode::Logical)?;
    let probs = circuit_distribution(&vd.circuit, vd.input_bitstring(), noise)?;
    let nbits = 2 * n;
    let reference = (vd.input_bitstring() as u64).count_ones();
    let symmetry = if postselected { vd.symmetry } else { Symmetry::None };
    let (kept, keep) = postselect_dist(&probs, nbits, symmetry, reference)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (bits, &p) in kept.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let (nv, dv) = transfer_values(&vd, bits);
        num += p * nv;
        den += p * dv;
    }
    if den.abs() <= 1e-12 {
        return Err(Error::numerical("purity denominator vanished in distillation"));
    }
    Ok((num / den, keep))
}

// --- factorized two-copy contraction -------------------------------------
//
// After the per-register bodies the joint state is ρ⊗ρ and every remaining
// operation — the GS(π/4) cross gate, its depolarizing, the layer channels,
// readout, and the diagonal estimator weights — acts pair by pair. Writing
// ρ as a vector u over per-qubit (row, col) digit pairs turns each estimator
// sum into u·(⊗_q T_q)·u with T_q a 16×16 pair-transfer matrix, evaluated at
// roots of unity in a weight-counting variable to project onto the
// postselected excitation number.

/// ρ entries rearranged into base-4 digits d_q = 2·row_q + col_q, digit
/// position matching the qubit's bit position.
fn density_to_pair_vector(rho: &DensityState, n: usize) -> Vec<Complex64> {
    let dim = 1usize << n;
    let mut u = vec![Complex64::new(0.0, 0.0); 1 << (2 * n)];
    for r in 0..dim {
        for c in 0..dim {
            let mut idx = 0usize;
            for p in 0..n {
                let d = 2 * ((r >> p) & 1) + ((c >> p) & 1);
                idx |= d << (2 * p);
            }
            u[idx] = rho.entries()[r * dim + c];
        }
    }
    u
}

/// Apply a 16-dimensional (4×4 over base-4 digits) matrix to digit `pos` of
/// a pair vector.
fn apply_digit_matrix(v: &mut [Complex64], t: &[Complex64; 16], pos: usize, n: usize) {
    let stride = 1usize << (2 * pos);
    let outer = 1usize << (2 * n);
    let mut base = 0usize;
    while base < outer {
        if (base >> (2 * pos)) & 3 != 0 {
            base += stride;
            continue;
        }
        let idx = [base, base + stride, base + 2 * stride, base + 3 * stride];
        let old = [v[idx[0]], v[idx[1]], v[idx[2]], v[idx[3]]];
        for r in 0..4 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, o) in old.iter().enumerate() {
                acc += t[r * 4 + k] * o;
            }
            v[idx[r]] = acc;
        }
        base += 1;
    }
}

/// Single-qubit Kraus channels applied inside one 4-dim pair space.
fn pair_channel(m: &mut [Complex64; 16], noise: &NoiseModel) {
    let dep = |m: &mut [Complex64; 16], p: f64| {
        let tr = m[0] + m[5] + m[10] + m[15];
        for (i, e) in m.iter_mut().enumerate() {
            *e *= 1.0 - p;
            if i % 5 == 0 {
                *e += 0.25 * p * tr;
            }
        }
    };
    if noise.two_qubit_depolarizing > 0.0 {
        dep(m, noise.two_qubit_depolarizing);
    }
    // (high bit, low bit) = (copy A, copy B); both damp and dephase per layer
    for bit in [1usize, 0] {
        let mask = 1usize << bit;
        if noise.amplitude_damping > 0.0 {
            let g = noise.amplitude_damping;
            let keep = (1.0 - g).sqrt();
            for r0 in 0..4 {
                if r0 & mask != 0 {
                    continue;
                }
                let r1 = r0 | mask;
                for c0 in 0..4 {
                    if c0 & mask != 0 {
                        continue;
                    }
                    let c1 = c0 | mask;
                    let d00 = m[r0 * 4 + c0];
                    let d01 = m[r0 * 4 + c1];
                    let d10 = m[r1 * 4 + c0];
                    let d11 = m[r1 * 4 + c1];
                    m[r0 * 4 + c0] = d00 + g * d11;
                    m[r0 * 4 + c1] = keep * d01;
                    m[r1 * 4 + c0] = keep * d10;
                    m[r1 * 4 + c1] = (1.0 - g) * d11;
                }
            }
        }
        if noise.dephasing > 0.0 {
            let f = 1.0 - 2.0 * noise.dephasing;
            for r in 0..4 {
                for c in 0..4 {
                    if (r & mask) != (c & mask) {
                        m[r * 4 + c] *= f;
                    }
                }
            }
        }
    }
    if noise.background_field != 0.0 {
        let h = noise.background_field;
        for r in 0..4usize {
            for c in 0..4usize {
                let dw = r.count_ones() as f64 - c.count_ones() as f64;
                m[r * 4 + c] *= Complex64::new(0.0, -2.0 * h * dw).exp();
            }
        }
    }
}

/// Observed-outcome quasiprobabilities for every pair input |r⟩⟨c|:
/// q[o][r*4+c] with o = 2·bitA + bitB after the cross gate, channels, and
/// readout flips.
fn pair_outcome_tensor(noise: &NoiseModel) -> [[Complex64; 16]; 4] {
    let g = gs_matrix(FRAC_PI_4);
    let mut q = [[Complex64::new(0.0, 0.0); 16]; 4];
    for r in 0..4 {
        for c in 0..4 {
            // G |r⟩⟨c| G†
            let mut m = [Complex64::new(0.0, 0.0); 16];
            for a in 0..4 {
                for b in 0..4 {
                    m[a * 4 + b] = g[a * 4 + r] * g[b * 4 + c].conj();
                }
            }
            pair_channel(&mut m, noise);
            let diag = [m[0], m[5], m[10], m[15]];
            for (o, row) in q.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, d) in diag.iter().enumerate() {
                    let mut w = 1.0;
                    for bit in [2usize, 1] {
                        let tb = t & bit != 0;
                        let ob = o & bit != 0;
                        w *= match (tb, ob) {
                            (false, false) => 1.0 - noise.readout_01,
                            (false, true) => noise.readout_01,
                            (true, false) => noise.readout_10,
                            (true, true) => 1.0 - noise.readout_10,
                        };
                    }
                    acc += w * d;
                }
                row[r * 4 + c] = acc;
            }
        }
    }
    q
}

/// Pair-transfer matrix over (d_A, d_B) digits for given per-outcome weights.
fn transfer_matrix(q: &[[Complex64; 16]; 4], weights: &[Complex64; 4]) -> [Complex64; 16] {
    let mut t = [Complex64::new(0.0, 0.0); 16];
    for da in 0..4 {
        let (ra, ca) = (da >> 1, da & 1);
        for db in 0..4 {
            let (rb, cb) = (db >> 1, db & 1);
            let r = 2 * ra + rb;
            let c = 2 * ca + cb;
            let mut acc = Complex64::new(0.0, 0.0);
            for o in 0..4 {
                acc += weights[o] * q[o][r * 4 + c];
            }
            t[da * 4 + db] = acc;
        }
    }
    t
}

fn bilinear_contraction(
    u: &[Complex64],
    t_default: &[Complex64; 16],
    t_target: Option<(usize, [Complex64; 16])>,
    n: usize,
) -> Complex64 {
    let mut v = u.to_vec();
    for q in 0..n {
        let pos = n - 1 - q;
        let t = match &t_target {
            Some((tq, tt)) if *tq == q => tt,
            _ => t_default,
        };
        apply_digit_matrix(&mut v, t, pos, n);
    }
    u.iter().zip(&v).map(|(a, b)| a * b).sum()
}

fn vd_oracle_factorized(
    n: usize,
    n_layers: usize,
    theta: &[f64],
    target: EvTarget,
    noise: &NoiseModel,
    postselected: bool,
) -> Result<(f64, f64)> {
    let vd = build_vd_circuit(n, n_layers, theta, target, VdMode::Logical)?;
    // register-A body: every joint layer except the cross layer, restricted
    // to the first copy's qubits
    let mut body = Circuit::new(n);
    for layer in &vd.circuit.layers[..vd.circuit.layers.len() - 1] {
        let gates: Vec<Gate> = layer
            .iter()
            .filter(|g| g.qubits().iter().all(|&q| q < n))
            .cloned()
            .collect();
        body.push_layer(gates)?;
    }
    let survival = noise.global_depolarizing_survival;
    let body_noise = NoiseModel { global_depolarizing_survival: 1.0, ..noise.clone() };
    let rho0 = DensityState::basis(n, initial_bitstring(n, 0))?;
    let mut rng = stream_rng(0, "oracle", 0);
    let rho = match apply_circuit(&QuantumState::Density(rho0), &body, &body_noise, &mut rng)? {
        QuantumState::Density(r) => r,
        QuantumState::Pure(_) => unreachable!("density input stays density"),
    };
    let u = density_to_pair_vector(&rho, n);
    let q = pair_outcome_tensor(noise);

    let weight_of = |o: usize| (o as u32).count_ones();
    let den_w = |o: usize| denominator_factor(((o >> 1) & 1, o & 1));
    let num_w = |o: usize| numerator_factor(((o >> 1) & 1, o & 1));
    let target_q = vd.target_qubit;

    // estimator sums as polynomials in the weight variable x
    let eval_at = |x: Complex64| -> (Complex64, Complex64, Complex64) {
        let mut den_weights = [Complex64::new(0.0, 0.0); 4];
        let mut num_weights = [Complex64::new(0.0, 0.0); 4];
        let mut one_weights = [Complex64::new(0.0, 0.0); 4];
        for o in 0..4 {
            let xw = x.powu(weight_of(o));
            den_weights[o] = den_w(o) * xw;
            num_weights[o] = num_w(o) * xw;
            one_weights[o] = xw;
        }
        let t_den = transfer_matrix(&q, &den_weights);
        let t_num = transfer_matrix(&q, &num_weights);
        let t_one = transfer_matrix(&q, &one_weights);
        let den = bilinear_contraction(&u, &t_den, None, n);
        let num = bilinear_contraction(&u, &t_den, Some((target_q, t_num)), n);
        let mass = bilinear_contraction(&u, &t_one, None, n);
        if survival < 1.0 {
            // fully mixed joint contribution from the global depolarizing
            // floor, which lands right before readout: every pair outcome
            // carries the readout-folded uniform marginals
            let p0 = 0.5 * (1.0 - noise.readout_01 + noise.readout_10);
            let p1 = 1.0 - p0;
            let m = |o: usize| -> f64 {
                (if o & 2 != 0 { p1 } else { p0 }) * (if o & 1 != 0 { p1 } else { p0 })
            };
            let pair_sum = |w: &[Complex64; 4]| -> Complex64 {
                (0..4).map(|o| w[o] * m(o)).sum()
            };
            let d_pair = pair_sum(&den_weights);
            let n_pair = pair_sum(&num_weights);
            let o_pair = pair_sum(&one_weights);
            let mix = 1.0 - survival;
            let den_mm = d_pair.powu(n as u32);
            let num_mm = d_pair.powu((n - 1) as u32) * n_pair;
            let one_mm = o_pair.powu(n as u32);
            (
                survival * den + mix * den_mm,
                survival * num + mix * num_mm,
                survival * mass + mix * one_mm,
            )
        } else {
            (den, num, mass)
        }
    };

    let reference = (vd.input_bitstring() as u64).count_ones();
    let symmetry = if postselected { vd.symmetry } else { Symmetry::None };
    let (den, num, mass) = match symmetry {
        Symmetry::None => eval_at(Complex64::new(1.0, 0.0)),
        Symmetry::Parity => {
            let (d1, n1, m1) = eval_at(Complex64::new(1.0, 0.0));
            let (d2, n2, m2) = eval_at(Complex64::new(-1.0, 0.0));
            let s = if reference % 2 == 0 { 1.0 } else { -1.0 };
            (0.5 * (d1 + s * d2), 0.5 * (n1 + s * n2), 0.5 * (m1 + s * m2))
        }
        Symmetry::Number => {
            // coefficient of x^reference via 2n+1 roots of unity
            let k = 2 * n + 1;
            let mut den = Complex64::new(0.0, 0.0);
            let mut num = Complex64::new(0.0, 0.0);
            let mut mass = Complex64::new(0.0, 0.0);
            for j in 0..k {
                let phi = std::f64::consts::TAU * j as f64 / k as f64;
                let x = Complex64::from_polar(1.0, phi);
                let twiddle = Complex64::from_polar(1.0, -phi * reference as f64);
                let (d, nn, m) = eval_at(x);
                den += twiddle * d;
                num += twiddle * nn;
                mass += twiddle * m;
            }
            let kf = k as f64;
            (den / kf, num / kf, mass / kf)
        }
    };
    if den.im.abs() > 1e-8 || num.im.abs() > 1e-8 {
        return Err(Error::numerical(
            "pair-transfer contraction produced a complex estimator sum",
        ));
    }
    if den.re.abs() <= 1e-12 {
        return Err(Error::numerical("purity denominator vanished in distillation"));
    }
    Ok((num.re / den.re, mass.re.clamp(0.0, 1.0)))
}

/// Distilled energy at infinite shots.
pub fn vd_energy_oracle(
    system: &ModelSystem,
    n_layers: usize,
    theta: &[f64],
    noise: &NoiseModel,
    postselected: bool,
) -> Result<OracleEstimate> {
    let groups = system.measurement_groups(MeasurementScheme::XxYyIzZi)?;
    let decomp = energy_decomposition(system, &groups)?;
    let mut estimates = vec![0.0; decomp.operators.len()];
    let mut keep_acc = 0.0;
    let mut z_of_orbital = BTreeMap::new();
    for (gi, group) in groups.iter().enumerate() {
        let target = match &group.kind {
            GroupKind::PairOperator { target } => *target,
            _ => return Err(Error::invalid("echo scheme produced a non-echo group")),
        };
        let (value, keep) =
            vd_observable_oracle(system.n, n_layers, theta, target, noise, postselected)?;
        let k = decomp
            .group_of_operator
            .iter()
            .position(|&g| g == gi)
            .expect("each group carries one operator");
        estimates[k] = clip_expectation(value);
        keep_acc += keep;
        if let EvTarget::Z(slot) = target {
            z_of_orbital.insert(system.orbital_of_slot(slot), estimates[k]);
        }
    }
    let value = decomp
        .coefficients
        .iter()
        .zip(&estimates)
        .map(|(c, e)| c * e)
        .sum::<f64>()
        + decomp.offset;
    Ok(OracleEstimate {
        value,
        keep_fraction: keep_acc / groups.len() as f64,
        fidelity: None,
        inferred_field: None,
        occupations: occupations_from_z(system.n, &z_of_orbital),
    })
}

/// Infinite-shot energy estimate for any mitigation strategy. Raw and
/// postselected readout follow the given scheme; the echo and distillation
/// strategies always run their per-operator circuit family.
pub fn energy_oracle(
    system: &ModelSystem,
    n_layers: usize,
    theta: &[f64],
    scheme: MeasurementScheme,
    method: MitigationMethod,
    noise: &NoiseModel,
) -> Result<OracleEstimate> {
    match method {
        MitigationMethod::Raw => {
            raw_ps_energy_oracle(system, n_layers, theta, scheme, noise, false)
        }
        MitigationMethod::Postselect => {
            raw_ps_energy_oracle(system, n_layers, theta, scheme, noise, true)
        }
        MitigationMethod::EchoVerification => ev_energy_oracle(system, n_layers, theta, noise),
        MitigationMethod::Distillation => {
            vd_energy_oracle(system, n_layers, theta, noise, false)
        }
        MitigationMethod::PostselectDistillation => {
            vd_energy_oracle(system, n_layers, theta, noise, true)
        }
    }
}
