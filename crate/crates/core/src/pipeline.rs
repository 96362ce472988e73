//! Finite-shot estimation: each distinct circuit is simulated once (density
//! matrix while it fits, stochastic trajectories beyond), sampled into
//! measurement records, and handed to the record-level estimators with
//! uncertainty propagation. Every random draw is keyed by (seed, circuit
//! label, trajectory), so results are independent of worker scheduling.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::circuits::distill::{build_vd_circuit, VdMode};
use crate::circuits::echo::{build_ev_circuit, EvTarget, Tomography};
use crate::circuits::schedule::{build_upccd, initial_bitstring, track_orbitals};
use crate::circuits::Circuit;
use crate::error::{Error, Result};
use rand::Rng;

use crate::estimation::{
    bootstrap, propagate_delta_variance, propagate_energy_variance, reflection_covariance,
    sample_binomial, BOOTSTRAP_RESAMPLES_EV, BOOTSTRAP_RESAMPLES_VD,
};
use crate::mitigation::{
    clip_expectation, diagonal_expectation, ev_estimate, postselect, vd_estimate, EvReading,
    EvReadout, MitigationMethod,
};
use crate::models::{order_parameter, GroupKind, MeasurementScheme, ModelSystem};
use crate::oracle::{
    diagonal_expectation_dist, energy_decomposition, exact_observable, group_execution,
    layout_perm, EV_KICK_ANGLES,
};
use crate::pauli::{Pauli, PauliSum};
use crate::simulator::{
    apply_circuit, exact_distribution, rng::stream_rng, sample, DensityState, MeasurementRecord,
    NoiseModel, PureState, QuantumState, Symmetry,
};

/// Registers wider than this sample from stochastic trajectories instead of
/// one density evolution.
pub const DENSITY_QUBIT_LIMIT: usize = 8;

/// How many trajectories the stochastic path spreads its shots over. On top
/// of shot noise the trajectory average fluctuates at O(spread/√T), but with
/// the end-of-circuit depolarizing branch sampled exactly (see
/// [`sampled_record`]) only surviving-branch jumps contribute to that spread,
/// so a modest budget keeps wide registers affordable.
pub fn trajectory_budget(n_qubits: usize, shots: u64) -> u64 {
    let cap = if n_qubits <= 12 { 96 } else { 64 };
    shots.min(cap)
}

/// One method's full energy estimate with propagated uncertainties.
#[derive(Clone, Debug)]
pub struct EnergyEstimate {
    pub method: MitigationMethod,
    pub energy: f64,
    pub energy_std: f64,
    pub delta: f64,
    pub delta_std: f64,
    pub keep_fraction: f64,
    /// echo fidelity (EV) or purification denominator (VD); absent for
    /// computational readout
    pub fidelity: Option<f64>,
    pub inferred_field: Option<f64>,
    pub total_shots: u64,
    pub distinct_circuits: u64,
}

/// One operator's sampled estimate next to its noiseless value.
#[derive(Clone, Debug)]
pub struct OperatorEstimate {
    pub label: String,
    pub estimate: f64,
    pub std: f64,
    pub exact: f64,
}

/// Simulate a circuit once and draw `shots` outcomes from its exact noisy
/// distribution. Registers above [`DENSITY_QUBIT_LIMIT`] average stochastic
/// pure-state trajectories instead, splitting the shot budget across at most
/// [`trajectory_budget`] of them.
pub fn sampled_record(
    circuit: &Circuit,
    input: usize,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
    circuit_id: &str,
    symmetry: Symmetry,
) -> Result<MeasurementRecord> {
    if shots == 0 {
        return Err(Error::invalid("shot budget must be positive"));
    }
    let n = circuit.n_qubits;
    if n <= DENSITY_QUBIT_LIMIT {
        let rho = DensityState::basis(n, input)?;
        let mut rng = stream_rng(seed, circuit_id, 0);
        let state = apply_circuit(&QuantumState::Density(rho), circuit, noise, &mut rng)?;
        sample(&state, shots, noise, &mut rng, circuit_id, symmetry)
    } else {
        trajectory_record(
            circuit,
            input,
            noise,
            shots,
            seed,
            circuit_id,
            symmetry,
            trajectory_budget(n, shots),
        )
    }
}

/// Trajectory-averaged sampling for registers too wide for a density matrix.
///
/// The end-of-circuit depolarizing branch replaces the state with a uniformly
/// random basis state, so its share of shots is drawn per shot from the
/// readout-folded uniform distribution — exactly, with no evolution — and
/// only the surviving share pays for statevector trajectories. Coherent-only
/// noise makes every trajectory identical, so one suffices.
#[allow(clippy::too_many_arguments)]
pub(crate) fn trajectory_record(
    circuit: &Circuit,
    input: usize,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
    circuit_id: &str,
    symmetry: Symmetry,
    trajectories: u64,
) -> Result<MeasurementRecord> {
    let n = circuit.n_qubits;
    let mut merged = MeasurementRecord::new(circuit_id, n, symmetry);
    let s = noise.global_depolarizing_survival;
    let mut surviving = shots;
    if s < 1.0 {
        // the mixing stream sits one index past the per-trajectory streams
        let mut mix_rng = stream_rng(seed, circuit_id, trajectories);
        let collapsed = sample_binomial(&mut mix_rng, shots, 1.0 - s);
        surviving = shots - collapsed;
        // a uniformly random true bit reads 1 with this probability
        let p_read1 = 0.5 * (1.0 - noise.readout_10 + noise.readout_01);
        for _ in 0..collapsed {
            let mut bits = 0u64;
            for _ in 0..n {
                bits = (bits << 1) | u64::from(mix_rng.gen::<f64>() < p_read1);
            }
            merged.add(bits, 1);
        }
    }
    if surviving == 0 {
        return Ok(merged);
    }
    let survive_noise = NoiseModel {
        global_depolarizing_survival: 1.0,
        ..noise.clone()
    };
    let t = if survive_noise.is_coherent_only() {
        1
    } else {
        trajectories.clamp(1, surviving)
    };
    let base = surviving / t;
    let rem = surviving % t;
    let partials: Vec<MeasurementRecord> = (0..t)
        .into_par_iter()
        .map(|traj| {
            let mut rng = stream_rng(seed, circuit_id, traj);
            let pure = PureState::basis(n, input)?;
            let state = apply_circuit(&QuantumState::Pure(pure), circuit, &survive_noise, &mut rng)?;
            let share = base + u64::from(traj < rem);
            sample(&state, share, noise, &mut rng, circuit_id, symmetry)
        })
        .collect::<Result<_>>()?;
    for p in partials {
        for (&bits, &count) in &p.counts {
            merged.add(bits, count);
        }
    }
    Ok(merged)
}

/// Order-parameter uncertainty with boundary care: exactly saturated
/// occupations carry zero sampled variance, so they are nudged inward where
/// the gradient is finite and contribute nothing.
fn delta_std_from(occupations: &[f64], variances: &[f64]) -> f64 {
    if occupations.is_empty() {
        return f64::NAN;
    }
    let eps = 1e-9;
    let clamped: Vec<f64> = occupations.iter().map(|o| o.clamp(eps, 1.0 - eps)).collect();
    match propagate_delta_variance(&clamped, variances) {
        Ok(v) => v.max(0.0).sqrt(),
        Err(_) => f64::NAN,
    }
}

fn delta_from(occupations: &[f64]) -> f64 {
    if occupations.is_empty() {
        return f64::NAN;
    }
    order_parameter(occupations).unwrap_or(f64::NAN)
}

struct GroupSample {
    estimates: Vec<f64>,
    /// within-group covariance of the estimate means, row-major
    covariance: Vec<f64>,
    keep: f64,
    kept_record: MeasurementRecord,
    computational: bool,
}

fn raw_ps_estimate(
    system: &ModelSystem,
    n_layers: usize,
    theta: &[f64],
    scheme: MeasurementScheme,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
    postselected: bool,
) -> Result<EnergyEstimate> {
    let groups = system.measurement_groups(scheme)?;
    if groups
        .iter()
        .any(|g| matches!(g.kind, GroupKind::PairOperator { .. }))
    {
        return Err(Error::invalid(
            "per-operator echo scheme has no raw readout; use the computational or cross-coupler schemes",
        ));
    }
    let decomp = energy_decomposition(system, &groups)?;
    let n = system.n;
    let half = n / 2;

    let samples: Vec<GroupSample> = groups
        .par_iter()
        .map(|group| {
            let exec = group_execution(system, group, n_layers, theta)?;
            let label = format!("{}/{}", system.name, group.label);
            let record =
                sampled_record(&exec.circuit, exec.input, noise, shots, seed, &label, exec.symmetry)?;
            let (kept, keep) = if postselected {
                let ps = postselect(&record, half)?;
                (ps.record, ps.keep_fraction)
            } else {
                (record, 1.0)
            };
            let estimates: Vec<f64> = exec
                .readout
                .iter()
                .map(|ro| diagonal_expectation(&kept, ro).map(clip_expectation))
                .collect::<Result<_>>()?;
            let k = exec.readout.len();
            let mut covariance = vec![0.0; k * k];
            for i in 0..k {
                for j in i..k {
                    let cij = reflection_covariance(&kept, &exec.readout[i], &exec.readout[j])?;
                    covariance[i * k + j] = cij;
                    covariance[j * k + i] = cij;
                }
            }
            Ok(GroupSample {
                estimates,
                covariance,
                keep,
                kept_record: kept,
                computational: matches!(group.kind, GroupKind::Computational),
            })
        })
        .collect::<Result<_>>()?;

    // flatten estimates and assemble the block-diagonal covariance
    let k_total = decomp.operators.len();
    let mut estimates = Vec::with_capacity(k_total);
    let mut sigma = vec![0.0; k_total * k_total];
    let mut keep_acc = 0.0;
    for s in &samples {
        let base = estimates.len();
        let k = s.estimates.len();
        estimates.extend_from_slice(&s.estimates);
        for i in 0..k {
            for j in 0..k {
                sigma[(base + i) * k_total + (base + j)] = s.covariance[i * k + j];
            }
        }
        keep_acc += s.keep;
    }
    let energy = decomp
        .coefficients
        .iter()
        .zip(&estimates)
        .map(|(c, e)| c * e)
        .sum::<f64>()
        + decomp.offset;
    let energy_std = propagate_energy_variance(&decomp.coefficients, &sigma)?
        .max(0.0)
        .sqrt();

    // occupations from a computational-readout record; reuse a group's when
    // one ran the bare ansatz, otherwise run a dedicated circuit
    let track = track_orbitals(n, n_layers, 0)?;
    let perm = layout_perm(system, &track.final_orbitals);
    let mut extra_circuit = 0u64;
    let occ_record = match samples.iter().find(|s| s.computational) {
        Some(s) => s.kept_record.clone(),
        None => {
            extra_circuit = 1;
            let plain = build_upccd(n, Some(n_layers), theta)?;
            let label = format!("{}/occupations", system.name);
            let record = sampled_record(
                &plain,
                initial_bitstring(n, 0),
                noise,
                shots,
                seed,
                &label,
                Symmetry::Number,
            )?;
            if postselected {
                postselect(&record, half)?.record
            } else {
                record
            }
        }
    };
    let mut occupations = Vec::with_capacity(n);
    let mut occ_vars = Vec::with_capacity(n);
    for p in 0..n {
        let mut z = PauliSum::new(n);
        z.add_ops(&[(perm[p], Pauli::Z)], 1.0)?;
        occupations.push((1.0 - diagonal_expectation(&occ_record, &z)?) / 2.0);
        occ_vars.push(reflection_covariance(&occ_record, &z, &z)?.max(0.0) / 4.0);
    }

    Ok(EnergyEstimate {
        method: if postselected {
            MitigationMethod::Postselect
        } else {
            MitigationMethod::Raw
        },
        energy,
        energy_std,
        delta: delta_from(&occupations),
        delta_std: delta_std_from(&occupations, &occ_vars),
        keep_fraction: keep_acc / samples.len() as f64,
        fidelity: None,
        inferred_field: None,
        total_shots: shots * (samples.len() as u64 + extra_circuit),
        distinct_circuits: samples.len() as u64 + extra_circuit,
    })
}

struct EchoOpSample {
    estimate: f64,
    std: f64,
    keep: f64,
    fidelity: f64,
    field: Option<f64>,
    target: EvTarget,
}

fn echo_targets(groups: &[crate::models::MeasurementGroup]) -> Result<Vec<EvTarget>> {
    groups
        .iter()
        .map(|g| match &g.kind {
            GroupKind::PairOperator { target } => Ok(*target),
            _ => Err(Error::invalid("echo scheme produced a non-echo group")),
        })
        .collect()
}

fn ev_estimate_sampled(
    system: &ModelSystem,
    n_layers: usize,
    theta: &[f64],
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
) -> Result<EnergyEstimate> {
    let groups = system.measurement_groups(MeasurementScheme::XxYyIzZi)?;
    let decomp = energy_decomposition(system, &groups)?;
    let targets = echo_targets(&groups)?;
    let n = system.n;

    let ops: Vec<EchoOpSample> = targets
        .par_iter()
        .map(|&target| {
            let mut records = Vec::with_capacity(12);
            let mut meta = Vec::with_capacity(12);
            let mut vacuum = 1.0;
            let mut sensitivity = 0.0;
            for &alpha in &EV_KICK_ANGLES {
                for basis in Tomography::ALL {
                    let ev = build_ev_circuit(n, n_layers, theta, target, alpha, basis)?;
                    let label = format!("{}/{}", system.name, ev.circuit_id);
                    let record =
                        sampled_record(&ev.circuit, 0, noise, shots, seed, &label, Symmetry::None)?;
                    records.push(record);
                    meta.push((alpha, basis, ev.measurement_qubit));
                    vacuum = ev.vacuum_eigenvalue;
                    sensitivity = ev.field_sensitivity;
                }
            }
            let fit = |recs: &[MeasurementRecord]| -> Result<crate::mitigation::EvEstimate> {
                let readings: Vec<EvReading> = recs
                    .iter()
                    .zip(&meta)
                    .map(|(r, &(alpha, basis, mq))| {
                        Ok(EvReading {
                            alpha,
                            basis,
                            readout: EvReadout::from_record(r, mq)?,
                        })
                    })
                    .collect::<Result<_>>()?;
                ev_estimate(&readings, vacuum, Some(sensitivity))
            };
            let point = fit(&records)?;
            let (_, std) = bootstrap(&records, BOOTSTRAP_RESAMPLES_EV, seed, |recs| {
                fit(recs).map(|e| clip_expectation(e.observable))
            })?;
            let mut keep = 0.0;
            for (r, &(_, _, mq)) in records.iter().zip(&meta) {
                let ro = EvReadout::from_record(r, mq)?;
                keep += (ro.m_plus + ro.m_minus) / ro.total();
            }
            Ok(EchoOpSample {
                estimate: clip_expectation(point.observable),
                std,
                keep: keep / records.len() as f64,
                fidelity: point.fidelity,
                field: point.inferred_field,
                target,
            })
        })
        .collect::<Result<_>>()?;

    assemble_per_operator(
        system,
        &decomp,
        &ops,
        MitigationMethod::EchoVerification,
        shots,
        12 * ops.len() as u64,
    )
}

fn vd_estimate_sampled(
    system: &ModelSystem,
    n_layers: usize,
    theta: &[f64],
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
    postselected: bool,
) -> Result<EnergyEstimate> {
    let groups = system.measurement_groups(MeasurementScheme::XxYyIzZi)?;
    let decomp = energy_decomposition(system, &groups)?;
    let targets = echo_targets(&groups)?;
    let n = system.n;

    let ops: Vec<EchoOpSample> = targets
        .par_iter()
        .map(|&target| {
            let vd = build_vd_circuit(n, n_layers, theta, target, VdMode::Logical)?;
            let label = format!("{}/{}", system.name, vd.circuit_id);
            let record = sampled_record(
                &vd.circuit,
                vd.input_bitstring(),
                noise,
                shots,
                seed,
                &label,
                vd.symmetry,
            )?;
            let point = vd_estimate(&vd, &record, postselected)?;
            let records = [record];
            let (_, std) = bootstrap(&records, BOOTSTRAP_RESAMPLES_VD, seed, |recs| {
                vd_estimate(&vd, &recs[0], postselected).map(|o| clip_expectation(o.value))
            })?;
            Ok(EchoOpSample {
                estimate: clip_expectation(point.value),
                std,
                keep: point.keep_fraction,
                fidelity: point.purity,
                field: None,
                target,
            })
        })
        .collect::<Result<_>>()?;

    assemble_per_operator(
        system,
        &decomp,
        &ops,
        if postselected {
            MitigationMethod::PostselectDistillation
        } else {
            MitigationMethod::Distillation
        },
        shots,
        ops.len() as u64,
    )
}

fn assemble_per_operator(
    system: &ModelSystem,
    decomp: &crate::oracle::EnergyDecomposition,
    ops: &[EchoOpSample],
    method: MitigationMethod,
    shots: u64,
    circuits: u64,
) -> Result<EnergyEstimate> {
    let energy = decomp
        .coefficients
        .iter()
        .zip(ops)
        .map(|(c, o)| c * o.estimate)
        .sum::<f64>()
        + decomp.offset;
    let var: f64 = decomp
        .coefficients
        .iter()
        .zip(ops)
        .map(|(c, o)| c * c * o.std * o.std)
        .sum();

    let mut z_est: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for o in ops {
        if let EvTarget::Z(slot) = o.target {
            z_est.insert(system.orbital_of_slot(slot), (o.estimate, o.std));
        }
    }
    let (occupations, occ_vars): (Vec<f64>, Vec<f64>) = if (0..system.n)
        .all(|p| z_est.contains_key(&p))
    {
        (0..system.n)
            .map(|p| {
                let (z, s) = z_est[&p];
                ((1.0 - z) / 2.0, s * s / 4.0)
            })
            .unzip()
    } else {
        (Vec::new(), Vec::new())
    };

    let m = ops.len() as f64;
    let fields: Vec<f64> = ops.iter().filter_map(|o| o.field).collect();
    Ok(EnergyEstimate {
        method,
        energy,
        energy_std: var.max(0.0).sqrt(),
        delta: delta_from(&occupations),
        delta_std: delta_std_from(&occupations, &occ_vars),
        keep_fraction: ops.iter().map(|o| o.keep).sum::<f64>() / m,
        fidelity: Some(ops.iter().map(|o| o.fidelity).sum::<f64>() / m),
        inferred_field: if fields.is_empty() {
            None
        } else {
            Some(fields.iter().sum::<f64>() / fields.len() as f64)
        },
        total_shots: shots * circuits,
        distinct_circuits: circuits,
    })
}

/// Finite-shot energy estimate for one mitigation strategy. Raw and
/// postselected readout follow the given scheme; echo verification and
/// distillation always run their per-operator circuit family.
#[allow(clippy::too_many_arguments)]
pub fn estimate_energy(
    system: &ModelSystem,
    n_layers: usize,
    theta: &[f64],
    scheme: MeasurementScheme,
    method: MitigationMethod,
    noise: &NoiseModel,
    shots_per_circuit: u64,
    seed: u64,
) -> Result<EnergyEstimate> {
    match method {
        MitigationMethod::Raw => raw_ps_estimate(
            system, n_layers, theta, scheme, noise, shots_per_circuit, seed, false,
        ),
        MitigationMethod::Postselect => raw_ps_estimate(
            system, n_layers, theta, scheme, noise, shots_per_circuit, seed, true,
        ),
        MitigationMethod::EchoVerification => {
            ev_estimate_sampled(system, n_layers, theta, noise, shots_per_circuit, seed)
        }
        MitigationMethod::Distillation => vd_estimate_sampled(
            system, n_layers, theta, noise, shots_per_circuit, seed, false,
        ),
        MitigationMethod::PostselectDistillation => vd_estimate_sampled(
            system, n_layers, theta, noise, shots_per_circuit, seed, true,
        ),
    }
}

/// Per-operator sampled estimates next to their noiseless values, for error
/// histograms. Raw/postselected readout reports each readout observable of
/// the scheme's groups; echo and distillation report each pair operator.
#[allow(clippy::too_many_arguments)]
pub fn estimate_operators(
    system: &ModelSystem,
    n_layers: usize,
    theta: &[f64],
    scheme: MeasurementScheme,
    method: MitigationMethod,
    noise: &NoiseModel,
    shots_per_circuit: u64,
    seed: u64,
) -> Result<Vec<OperatorEstimate>> {
    let n = system.n;
    match method {
        MitigationMethod::Raw | MitigationMethod::Postselect => {
            let postselected = method == MitigationMethod::Postselect;
            let groups = system.measurement_groups(scheme)?;
            if groups
                .iter()
                .any(|g| matches!(g.kind, GroupKind::PairOperator { .. }))
            {
                return Err(Error::invalid(
                    "per-operator echo scheme has no raw readout; use the computational or cross-coupler schemes",
                ));
            }
            let half = n / 2;
            let per_group: Vec<Vec<OperatorEstimate>> = groups
                .par_iter()
                .map(|group| {
                    let exec = group_execution(system, group, n_layers, theta)?;
                    let label = format!("{}/{}", system.name, group.label);
                    let record = sampled_record(
                        &exec.circuit,
                        exec.input,
                        noise,
                        shots_per_circuit,
                        seed,
                        &label,
                        exec.symmetry,
                    )?;
                    let kept = if postselected {
                        postselect(&record, half)?.record
                    } else {
                        record
                    };
                    // noiseless reference distribution of the same circuit
                    let mut psi = PureState::basis(exec.circuit.n_qubits, exec.input)?;
                    let ideal = NoiseModel::noiseless();
                    let mut rng = stream_rng(0, "ideal", 0);
                    let out =
                        apply_circuit(&QuantumState::Pure(psi.clone()), &exec.circuit, &ideal, &mut rng)?;
                    psi = match out {
                        QuantumState::Pure(p) => p,
                        QuantumState::Density(_) => unreachable!("pure input stays pure"),
                    };
                    let probs = exact_distribution(&QuantumState::Pure(psi), &ideal);
                    exec.readout
                        .iter()
                        .enumerate()
                        .map(|(i, ro)| {
                            Ok(OperatorEstimate {
                                label: format!("{}[{i}]", group.label),
                                estimate: clip_expectation(diagonal_expectation(&kept, ro)?),
                                std: reflection_covariance(&kept, ro, ro)?.max(0.0).sqrt(),
                                exact: diagonal_expectation_dist(&probs, n, ro)?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            Ok(per_group.into_iter().flatten().collect())
        }
        MitigationMethod::EchoVerification
        | MitigationMethod::Distillation
        | MitigationMethod::PostselectDistillation => {
            let groups = system.measurement_groups(MeasurementScheme::XxYyIzZi)?;
            let targets = echo_targets(&groups)?;
            let labels: Vec<String> = groups.iter().map(|g| g.label.clone()).collect();
            targets
                .par_iter()
                .zip(labels)
                .map(|(&target, label)| {
                    let exact = exact_observable(n, n_layers, theta, target)?;
                    let (estimate, std) = match method {
                        MitigationMethod::EchoVerification => {
                            let one = ev_single_operator(
                                system, n_layers, theta, target, noise, shots_per_circuit, seed,
                            )?;
                            (one.estimate, one.std)
                        }
                        _ => {
                            let postselected =
                                method == MitigationMethod::PostselectDistillation;
                            let vd = build_vd_circuit(n, n_layers, theta, target, VdMode::Logical)?;
                            let rec_label = format!("{}/{}", system.name, vd.circuit_id);
                            let record = sampled_record(
                                &vd.circuit,
                                vd.input_bitstring(),
                                noise,
                                shots_per_circuit,
                                seed,
                                &rec_label,
                                vd.symmetry,
                            )?;
                            let point = vd_estimate(&vd, &record, postselected)?;
                            let records = [record];
                            let (_, std) =
                                bootstrap(&records, BOOTSTRAP_RESAMPLES_VD, seed, |recs| {
                                    vd_estimate(&vd, &recs[0], postselected)
                                        .map(|o| clip_expectation(o.value))
                                })?;
                            (clip_expectation(point.value), std)
                        }
                    };
                    Ok(OperatorEstimate {
                        label,
                        estimate,
                        std,
                        exact,
                    })
                })
                .collect()
        }
    }
}

struct SingleOp {
    estimate: f64,
    std: f64,
}

fn ev_single_operator(
    system: &ModelSystem,
    n_layers: usize,
    theta: &[f64],
    target: EvTarget,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
) -> Result<SingleOp> {
    let n = system.n;
    let mut records = Vec::with_capacity(12);
    let mut meta = Vec::with_capacity(12);
    let mut vacuum = 1.0;
    let mut sensitivity = 0.0;
    for &alpha in &EV_KICK_ANGLES {
        for basis in Tomography::ALL {
            let ev = build_ev_circuit(n, n_layers, theta, target, alpha, basis)?;
            let label = format!("{}/{}", system.name, ev.circuit_id);
            let record = sampled_record(&ev.circuit, 0, noise, shots, seed, &label, Symmetry::None)?;
            records.push(record);
            meta.push((alpha, basis, ev.measurement_qubit));
            vacuum = ev.vacuum_eigenvalue;
            sensitivity = ev.field_sensitivity;
        }
    }
    let fit = |recs: &[MeasurementRecord]| -> Result<f64> {
        let readings: Vec<EvReading> = recs
            .iter()
            .zip(&meta)
            .map(|(r, &(alpha, basis, mq))| {
                Ok(EvReading {
                    alpha,
                    basis,
                    readout: EvReadout::from_record(r, mq)?,
                })
            })
            .collect::<Result<_>>()?;
        ev_estimate(&readings, vacuum, Some(sensitivity)).map(|e| clip_expectation(e.observable))
    };
    let point = fit(&records)?;
    let (_, std) = bootstrap(&records, BOOTSTRAP_RESAMPLES_EV, seed, |recs| fit(recs))?;
    Ok(SingleOp {
        estimate: point,
        std,
    })
}
