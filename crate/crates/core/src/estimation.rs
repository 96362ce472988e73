//! Estimator assembly: optimal linear recombination of measured operators,
//! covariance propagation, bootstrap resampling, echo count reconstruction,
//! shot allocation, and the wall-clock cost model.

use std::collections::BTreeSet;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::mitigation::{diagonal_expectation, MitigationMethod};
use crate::pauli::{Pauli, PauliSum};
use crate::simulator::MeasurementRecord;

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_CUTOFF: f64 = 1e-10;
/// Recombination solutions must reproduce the target coefficients this well.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Find coefficients c with Σᵢ cᵢ Qᵢ = H.
#[derive(Clone, Debug)]
pub struct CoefficientProblem {
    /// measured operators Qᵢ
    pub operators: Vec<PauliSum>,
    /// target operator H
    pub target: PauliSum,
    /// covariance of the Qᵢ estimates, row-major k×k; `None` = identity
    pub sigma: Option<Vec<f64>>,
}

fn pauli_basis(problem: &CoefficientProblem) -> Vec<Vec<Pauli>> {
    let mut keys: BTreeSet<Vec<Pauli>> = BTreeSet::new();
    for q in &problem.operators {
        for (f, _) in q.iter() {
            keys.insert(f.to_vec());
        }
    }
    for (f, _) in problem.target.iter() {
        keys.insert(f.to_vec());
    }
    keys.into_iter().collect()
}

fn design_matrix(problem: &CoefficientProblem) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let k = problem.operators.len();
    if k == 0 {
        return Err(Error::Empty("no operators to recombine".into()));
    }
    let n = problem.target.n_qubits();
    for q in &problem.operators {
        if q.n_qubits() != n {
            return Err(Error::dim("operators and target act on different registers"));
        }
    }
    let keys = pauli_basis(problem);
    let m = keys.len();
    // rows = operators, columns = Pauli basis strings
    let mut a = DMatrix::<f64>::zeros(k, m);
    for (i, q) in problem.operators.iter().enumerate() {
        for (j, key) in keys.iter().enumerate() {
            a[(i, j)] = q.coefficient(key);
        }
    }
    let mut b = DVector::<f64>::zeros(m);
    for (j, key) in keys.iter().enumerate() {
        b[j] = problem.target.coefficient(key);
    }
    Ok((a, b))
}

fn min_norm_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    // Minimum-norm least squares x = mᵀ(m mᵀ)⁺ rhs through the Gram matrix.
    // The symmetric eigendecomposition stays accurate on the highly
    // degenerate spectra these recombination problems produce, where the
    // general SVD can return a visibly suboptimal solve.
    let gram = m * m.transpose();
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if lmax <= 0.0 {
        return Err(Error::numerical("operator matrix is zero"));
    }
    // eigenvalues are squared singular values; apply the documented cutoff on
    // the singular-value scale, floored so eigenvalue-level rounding noise is
    // never inverted
    let tol = lmax * (PINV_CUTOFF * PINV_CUTOFF).max(1e-12);
    let mut y = DVector::zeros(rhs.len());
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > tol {
            let u = eig.eigenvectors.column(i);
            y += u * (u.dot(rhs) / l);
        }
    }
    Ok(m.transpose() * y)
}

/// Solve for the recombination coefficients. The default (Σ = identity) path
/// is the minimum-norm solution; with a covariance supplied the solution
/// minimizes the propagated variance cᵀΣc subject to the same constraint.
/// Errors when the target is outside the span of the operators.
pub fn optimal_coefficients(problem: &CoefficientProblem) -> Result<Vec<f64>> {
    let (a, b) = design_matrix(problem)?;
    let k = a.nrows();
    let c = match &problem.sigma {
        None => min_norm_solve(&a.transpose(), &b)?,
        Some(flat) => {
            if flat.len() != k * k {
                return Err(Error::dim("covariance must be k×k for k operators"));
            }
            let sigma = DMatrix::from_row_slice(k, k, flat);
            let chol = Cholesky::new(sigma)
                .ok_or_else(|| Error::numerical("covariance is not positive definite"))?;
            // minimize cᵀΣc  s.t.  Aᵀc = b  →  c = Σ⁻¹A (AᵀΣ⁻¹A)⁺ b
            let sigma_inv_a = chol.solve(&a);
            let gram = a.transpose() * &sigma_inv_a;
            let y = min_norm_solve(&gram, &b)?;
            sigma_inv_a * y
        }
    };
    let residual = (a.transpose() * &c - &b).amax();
    if residual > RESIDUAL_TOLERANCE {
        return Err(Error::numerical(format!(
            "target operator is outside the measured span (residual {residual:e})"
        )));
    }
    Ok(c.iter().cloned().collect())
}

/// Covariance of two diagonal-observable estimates extracted from the same
/// record: (⟨PᵢPⱼ⟩ − ⟨Pᵢ⟩⟨Pⱼ⟩)/M. Estimates from independent circuits have
/// zero covariance by construction and never call this.
pub fn reflection_covariance(
    record: &MeasurementRecord,
    p_i: &PauliSum,
    p_j: &PauliSum,
) -> Result<f64> {
    let shots: u64 = record.counts.values().sum();
    if shots == 0 {
        return Err(Error::Empty("no shots in record".into()));
    }
    let prod = p_i.product(p_j)?;
    let e_ij = diagonal_expectation(record, &prod)?;
    let e_i = diagonal_expectation(record, p_i)?;
    let e_j = diagonal_expectation(record, p_j)?;
    Ok((e_ij - e_i * e_j) / shots as f64)
}

/// Var(E) = cᵀΣc for a row-major k×k covariance.
pub fn propagate_energy_variance(c: &[f64], sigma: &[f64]) -> Result<f64> {
    let k = c.len();
    if sigma.len() != k * k {
        return Err(Error::dim("covariance must be k×k"));
    }
    let mut acc = 0.0;
    for i in 0..k {
        for j in 0..k {
            acc += c[i] * sigma[i * k + j] * c[j];
        }
    }
    Ok(acc)
}

/// First-order variance of the order parameter from per-orbital occupation
/// variances. Rejects occupations at the boundary, where the derivative
/// diverges.
pub fn propagate_delta_variance(occupations: &[f64], variances: &[f64]) -> Result<f64> {
    if occupations.len() != variances.len() {
        return Err(Error::dim("occupations and variances must align"));
    }
    let grad = crate::models::order_parameter_gradient(occupations)?;
    Ok(grad
        .iter()
        .zip(variances)
        .map(|(g, v)| g * g * v)
        .sum())
}

/// Rebuild the echo readout's three-bin shot split from a retained summary:
/// per-shot signal s (signed conditioned difference) and conditioned weight
/// v = F·|⟨U_α⟩|². Returns (M₊, M₋, M₀) with M₊+M₋+M₀ = shots. When the
/// summary is inconsistent (a bin goes negative), shots are shifted from the
/// rejected bin to both conditioned bins, preserving the total and the
/// difference.
pub fn reconstruct_ev_counts(signal: f64, kept_weight: f64, shots: f64) -> Result<(f64, f64, f64)> {
    if shots <= 0.0 {
        return Err(Error::invalid("shots must be positive"));
    }
    if !(0.0..=1.0 + 1e-9).contains(&kept_weight) {
        return Err(Error::invalid(format!(
            "conditioned weight {kept_weight} outside [0, 1]"
        )));
    }
    let mut m_plus = shots * (kept_weight + signal) / 2.0;
    let mut m_minus = shots * (kept_weight - signal) / 2.0;
    let mut m_rest = shots * (1.0 - kept_weight);
    let m = m_plus.min(m_minus);
    if m < 0.0 {
        m_plus -= m;
        m_minus -= m;
        m_rest += 2.0 * m;
    }
    if m_rest < -1e-9 * shots {
        return Err(Error::numerical(
            "echo count reconstruction is infeasible: |signal| exceeds the shot budget",
        ));
    }
    Ok((m_plus, m_minus, m_rest.max(0.0)))
}

fn box_muller(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Binomial(n, p) sampler: exact CDF inversion in the thin regimes, normal
/// approximation when the count is comfortably Gaussian.
pub(crate) fn sample_binomial(rng: &mut ChaCha12Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if p > 0.5 {
        // mirror into the thin tail; the recursion bottoms out immediately
        return n - sample_binomial(rng, n, 1.0 - p);
    }
    let nf = n as f64;
    if nf * p * (1.0 - p) >= 25.0 {
        let g = box_muller(rng);
        let v = (nf * p + g * (nf * p * (1.0 - p)).sqrt()).round();
        return v.clamp(0.0, nf) as u64;
    }
    // CDF recurrence from k = 0; p ≤ 1/2 with np(1−p) < 25 bounds np by 50,
    // keeping (1−p)^n well above underflow
    let mut pk = (nf * (1.0 - p).ln()).exp();
    let mut cdf = pk;
    let u: f64 = rng.gen();
    let mut k: u64 = 0;
    while cdf < u && k < n {
        let kf = k as f64;
        pk *= (nf - kf) / (kf + 1.0) * (p / (1.0 - p));
        cdf += pk;
        k += 1;
    }
    k
}

/// Multinomial resample of a record's counts with the same shot total.
pub fn resample_record(record: &MeasurementRecord, rng: &mut ChaCha12Rng) -> MeasurementRecord {
    let total: u64 = record.counts.values().sum();
    let mut out = record.clone();
    out.counts.clear();
    out.shots = 0;
    let mut remaining = total;
    let mut mass_left = total as f64;
    let entries: Vec<(u64, u64)> = record.counts.iter().map(|(&b, &c)| (b, c)).collect();
    for (idx, (bits, count)) in entries.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let draw = if idx + 1 == entries.len() {
            remaining
        } else {
            let p = (*count as f64 / mass_left).clamp(0.0, 1.0);
            sample_binomial(rng, remaining, p)
        };
        if draw > 0 {
            out.add(*bits, draw);
        }
        remaining -= draw.min(remaining);
        mass_left -= *count as f64;
    }
    out
}

/// Resample all records with replacement, re-run the estimator, and report
/// the sample mean and standard deviation across resamples.
pub fn bootstrap<F>(
    records: &[MeasurementRecord],
    resamples: usize,
    seed: u64,
    mut estimator: F,
) -> Result<(f64, f64)>
where
    F: FnMut(&[MeasurementRecord]) -> Result<f64>,
{
    if resamples < 2 {
        return Err(Error::invalid("bootstrap needs at least 2 resamples"));
    }
    let mut values = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let mut resampled = Vec::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let label = format!("bootstrap/{}/{i}", rec.circuit_id);
            let mut rng = crate::simulator::rng::stream_rng(seed, &label, r as u64);
            resampled.push(resample_record(rec, &mut rng));
        }
        values.push(estimator(&resampled)?);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Ok((mean, var.sqrt()))
}

/// default bootstrap resample counts
pub const BOOTSTRAP_RESAMPLES_EV: usize = 100;
pub const BOOTSTRAP_RESAMPLES_VD: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AllocationScheme {
    Uniform,
    Weights,
}

/// Shots assigned to each measurement group plus the wall-clock accounting
/// triple (calls, distinct circuits, total shots).
#[derive(Clone, Debug)]
pub struct ShotPlan {
    pub shots: Vec<u64>,
    pub scheme: AllocationScheme,
    pub calls: u64,
    pub distinct_circuits: u64,
}

impl ShotPlan {
    pub fn total_shots(&self) -> u64 {
        self.shots.iter().sum()
    }

    pub fn wall_clock_seconds(&self) -> f64 {
        wall_clock(self.calls, self.distinct_circuits, self.total_shots())
    }
}

/// Euclidean norm of a group's recombination coefficients, the group's
/// relative weight in proportional allocation.
pub fn group_weight(coefficients: &[f64]) -> f64 {
    coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn largest_remainder(ideal: &[f64], budget: u64) -> Vec<u64> {
    let mut shots: Vec<u64> = ideal.iter().map(|v| v.floor() as u64).collect();
    let mut leftover = budget - shots.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..ideal.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - ideal[a].floor();
        let rb = ideal[b] - ideal[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    'outer: while leftover > 0 {
        for &i in &order {
            if leftover == 0 {
                break 'outer;
            }
            shots[i] += 1;
            leftover -= 1;
        }
    }
    shots
}

/// Split a shot budget across groups, uniformly or proportional to weights,
/// with largest-remainder rounding so the budget is preserved exactly. The
/// optional `quantize` base rounds each count to a multiple of the base
/// instead (budget then only approximately preserved).
pub fn allocate_shots(
    weights: &[f64],
    budget: u64,
    scheme: AllocationScheme,
    quantize: Option<u64>,
) -> Result<ShotPlan> {
    if weights.is_empty() {
        return Err(Error::Empty("no measurement groups".into()));
    }
    let k = weights.len();
    let ideal: Vec<f64> = match scheme {
        AllocationScheme::Uniform => vec![budget as f64 / k as f64; k],
        AllocationScheme::Weights => {
            let total: f64 = weights.iter().sum();
            if total <= 0.0 || weights.iter().any(|w| *w < 0.0) {
                return Err(Error::invalid("weights must be nonnegative with positive sum"));
            }
            weights.iter().map(|w| budget as f64 * w / total).collect()
        }
    };
    let shots = match quantize {
        None => largest_remainder(&ideal, budget),
        Some(base) => {
            if base == 0 {
                return Err(Error::invalid("quantization base must be positive"));
            }
            ideal
                .iter()
                .map(|v| ((v / base as f64).round() as u64) * base)
                .collect()
        }
    };
    Ok(ShotPlan {
        calls: 1,
        distinct_circuits: k as u64,
        shots,
        scheme,
    })
}

/// Allocate shots so the propagated variance Σᵢ cᵢ²σᵢ²/mᵢ hits the target:
/// mᵢ = |cᵢ|σᵢ · Σⱼ|cⱼ|σⱼ / V_target, rounded up.
pub fn lagrangian_allocation(
    variances_per_shot: &[f64],
    coefficients: &[f64],
    target_variance: f64,
) -> Result<ShotPlan> {
    if variances_per_shot.len() != coefficients.len() {
        return Err(Error::dim("variances and coefficients must align"));
    }
    if variances_per_shot.is_empty() {
        return Err(Error::Empty("no measurement groups".into()));
    }
    if target_variance <= 0.0 {
        return Err(Error::invalid("target variance must be positive"));
    }
    if variances_per_shot.iter().any(|v| *v < 0.0) {
        return Err(Error::invalid("variances must be nonnegative"));
    }
    let scale: f64 = coefficients
        .iter()
        .zip(variances_per_shot)
        .map(|(c, v)| c.abs() * v.sqrt())
        .sum();
    let shots: Vec<u64> = coefficients
        .iter()
        .zip(variances_per_shot)
        .map(|(c, v)| {
            let ideal = c.abs() * v.sqrt() * scale / target_variance;
            ideal.ceil().max(1.0) as u64
        })
        .collect();
    Ok(ShotPlan {
        calls: 1,
        distinct_circuits: shots.len() as u64,
        shots,
        scheme: AllocationScheme::Weights,
    })
}

/// Wall-clock model: 1 s per batched call, 0.042 s per distinct circuit,
/// 5·10⁻⁵ s per shot.
pub fn wall_clock(calls: u64, distinct_circuits: u64, total_shots: u64) -> f64 {
    calls as f64 + 0.042 * distinct_circuits as f64 + 5e-5 * total_shots as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HamiltonianKind {
    PairingChain,
    Chemistry,
}

/// Distinct circuits an estimator family needs at size N: postselected
/// direct measurement uses the cross-coupler set plus the computational
/// circuit (N+1); echo verification measures each operator separately under
/// 12 settings (3 kick angles × 4 tomography bases).
pub fn circuit_count(method: MitigationMethod, n: usize, kind: HamiltonianKind) -> Result<u64> {
    let n = n as u64;
    match method {
        MitigationMethod::Raw | MitigationMethod::Postselect => Ok(n + 1),
        MitigationMethod::EchoVerification => match kind {
            HamiltonianKind::Chemistry => Ok(12 * n * n),
            HamiltonianKind::PairingChain => Ok(6 * n * n + 6 * n),
        },
        other => Err(Error::invalid(format!(
            "no circuit-count model for {}",
            other.label()
        ))),
    }
}
