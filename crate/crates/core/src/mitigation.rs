//! Error-mitigation estimators: symmetry postselection, echo-verified
//! expectation values, and purity distillation readout.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::circuits::distill::{transfer_values, VdCircuit};
use crate::circuits::echo::Tomography;
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliSum};
use crate::simulator::{MeasurementRecord, Symmetry};

/// Estimator family, as named in result tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum MitigationMethod {
    Raw,
    Postselect,
    EchoVerification,
    Distillation,
    PostselectDistillation,
}

impl MitigationMethod {
    pub const ALL: [MitigationMethod; 5] = [
        MitigationMethod::Raw,
        MitigationMethod::Postselect,
        MitigationMethod::EchoVerification,
        MitigationMethod::Distillation,
        MitigationMethod::PostselectDistillation,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            MitigationMethod::Raw => "raw",
            MitigationMethod::Postselect => "ps",
            MitigationMethod::EchoVerification => "ev",
            MitigationMethod::Distillation => "vd",
            MitigationMethod::PostselectDistillation => "ps-vd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(MitigationMethod::Raw),
            "ps" | "postselect" => Ok(MitigationMethod::Postselect),
            "ev" | "echo" => Ok(MitigationMethod::EchoVerification),
            "vd" | "distill" => Ok(MitigationMethod::Distillation),
            "ps-vd" | "psvd" => Ok(MitigationMethod::PostselectDistillation),
            other => Err(Error::parse(format!("unknown mitigation method '{other}'"))),
        }
    }
}

/// A record filtered to its symmetry sector plus the fraction of shots kept.
#[derive(Clone, Debug)]
pub struct Postselected {
    pub record: MeasurementRecord,
    pub keep_fraction: f64,
}

/// Keep only bitstrings compatible with the record's symmetry: exact
/// Hamming weight for [`Symmetry::Number`], weight parity for
/// [`Symmetry::Parity`]. `expected_weight` is the noiseless total weight.
pub fn postselect(record: &MeasurementRecord, expected_weight: usize) -> Result<Postselected> {
    let keep = |bits: u64| -> bool {
        let w = bits.count_ones() as usize;
        match record.symmetry {
            Symmetry::Number => w == expected_weight,
            Symmetry::Parity => w % 2 == expected_weight % 2,
            Symmetry::None => true,
        }
    };
    let mut out = record.clone();
    out.counts.retain(|bits, _| keep(*bits));
    let total: u64 = record.counts.values().sum();
    if total == 0 {
        return Err(Error::Empty("no shots in record".into()));
    }
    let kept: u64 = out.counts.values().sum();
    out.shots = kept;
    Ok(Postselected {
        record: out,
        keep_fraction: kept as f64 / total as f64,
    })
}

/// ⟨O⟩ from computational-basis counts for an observable diagonal in Z.
/// Non-diagonal terms are rejected.
pub fn diagonal_expectation(record: &MeasurementRecord, observable: &PauliSum) -> Result<f64> {
    if observable.n_qubits() != record.n_bits {
        return Err(Error::dim("observable width does not match record"));
    }
    let shots: u64 = record.counts.values().sum();
    if shots == 0 {
        return Err(Error::Empty("no shots in record".into()));
    }
    let n = record.n_bits;
    let mut masks: Vec<(u64, f64)> = Vec::new();
    let mut offset = 0.0;
    for (factors, coeff) in observable.iter() {
        let mut mask: u64 = 0;
        for (q, p) in factors.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::Z => mask |= 1 << (n - 1 - q),
                _ => {
                    return Err(Error::invalid(
                        "diagonal readout requires a Z/I observable",
                    ))
                }
            }
        }
        if mask == 0 {
            offset += coeff;
        } else {
            masks.push((mask, coeff));
        }
    }
    let mut acc = 0.0;
    for (&bits, &count) in &record.counts {
        let mut v = 0.0;
        for &(mask, coeff) in &masks {
            let sign = if (bits & mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            v += coeff * sign;
        }
        acc += v * count as f64;
    }
    Ok(offset + acc / shots as f64)
}

/// Tallies of an echo readout: measurement-qubit outcomes conditioned on all
/// other bits being zero, plus the rejected remainder. Kept as floats so
/// exact (infinite-shot) probabilities flow through the same code path.
#[derive(Clone, Copy, Debug, Default)]
pub struct EvReadout {
    pub m_plus: f64,
    pub m_minus: f64,
    pub m_rest: f64,
}

impl EvReadout {
    pub fn from_record(record: &MeasurementRecord, measurement_qubit: usize) -> Result<Self> {
        if measurement_qubit >= record.n_bits {
            return Err(Error::invalid("measurement qubit outside record"));
        }
        let mbit: u64 = 1 << (record.n_bits - 1 - measurement_qubit);
        let mut out = EvReadout::default();
        for (&bits, &count) in &record.counts {
            let c = count as f64;
            if bits & !mbit != 0 {
                out.m_rest += c;
            } else if bits & mbit == 0 {
                out.m_plus += c;
            } else {
                out.m_minus += c;
            }
        }
        Ok(out)
    }

    pub fn total(&self) -> f64 {
        self.m_plus + self.m_minus + self.m_rest
    }

    /// (M₊ − M₋)/M over all shots, the echo signal component.
    pub fn diff(&self) -> Result<f64> {
        let t = self.total();
        if t <= 0.0 {
            return Err(Error::Empty("no shots in echo readout".into()));
        }
        Ok((self.m_plus - self.m_minus) / t)
    }
}

/// One tomography setting's readout at a given kick angle.
#[derive(Clone, Copy, Debug)]
pub struct EvReading {
    pub alpha: f64,
    pub basis: Tomography,
    pub readout: EvReadout,
}

/// Result of the echo-verification fit.
#[derive(Clone, Copy, Debug)]
pub struct EvEstimate {
    pub observable: f64,
    pub fidelity: f64,
    pub phase_drift: f64,
    /// coherent background field inferred from the drift, when the circuit's
    /// sensitivity is known
    pub inferred_field: Option<f64>,
}

fn signal_at_alpha(readings: &[&EvReading]) -> Result<Complex64> {
    let mut re_parts = Vec::new();
    let mut im_parts = Vec::new();
    for r in readings {
        let d = r.readout.diff()?;
        match r.basis {
            Tomography::XPlus => re_parts.push(d),
            Tomography::XMinus => re_parts.push(-d),
            Tomography::YPlus => im_parts.push(d),
            Tomography::YMinus => im_parts.push(-d),
        }
    }
    if re_parts.is_empty() || im_parts.is_empty() {
        return Err(Error::invalid(
            "echo fit needs both X-type and Y-type readings at every kick angle",
        ));
    }
    let re = re_parts.iter().sum::<f64>() / re_parts.len() as f64;
    let im = im_parts.iter().sum::<f64>() / im_parts.len() as f64;
    Ok(Complex64::new(re, im))
}

fn solve_2x2_lsq(rows: &[(f64, f64)], rhs: &[f64]) -> Result<(f64, f64)> {
    // normal equations for a tall 2-column system
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((c1, c2), y) in rows.iter().zip(rhs) {
        a11 += c1 * c1;
        a12 += c1 * c2;
        a22 += c2 * c2;
        b1 += c1 * y;
        b2 += c2 * y;
    }
    let det = a11 * a22 - a12 * a12;
    let scale = a11.abs().max(a22.abs());
    if scale <= 0.0 || det.abs() < scale * scale / 1e8 {
        return Err(Error::numerical(
            "echo fit design matrix is ill-conditioned; vary the kick angles",
        ));
    }
    Ok(((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det))
}

/// Fit echo readings to V(α)·e^{iαλ} = z·cosα + i·w·sinα and report
/// ⟨O⟩ = Re(w/z), the echo fidelity F = |z|, and the residual phase drift
/// arg z. Requires at least three distinct kick angles; `vacuum_eigenvalue`
/// is the target operator's eigenvalue on the reference state (λ), and
/// `field_sensitivity`, when given, converts the drift into a field value
/// h = −arg(z)/(2S).
pub fn ev_estimate(
    readings: &[EvReading],
    vacuum_eigenvalue: f64,
    field_sensitivity: Option<f64>,
) -> Result<EvEstimate> {
    let mut by_alpha: BTreeMap<u64, (f64, Vec<&EvReading>)> = BTreeMap::new();
    for r in readings {
        let key = r.alpha.to_bits();
        by_alpha.entry(key).or_insert_with(|| (r.alpha, Vec::new())).1.push(r);
    }
    if by_alpha.len() < 3 {
        return Err(Error::invalid(format!(
            "echo fit needs at least 3 kick angles, got {}",
            by_alpha.len()
        )));
    }
    // V'(α) = V(α)e^{iαλ} = z cosα + i w sinα; real/imag parts decouple into
    // two 2-unknown least-squares problems.
    let mut rows_re = Vec::new(); // columns (cosα, −sinα) for (Re z, Im w)
    let mut rhs_re = Vec::new();
    let mut rows_im = Vec::new(); // columns (cosα, sinα) for (Im z, Re w)
    let mut rhs_im = Vec::new();
    for (_, (alpha, group)) in &by_alpha {
        let v = signal_at_alpha(group)?;
        let vp = v * Complex64::from_polar(1.0, alpha * vacuum_eigenvalue);
        rows_re.push((alpha.cos(), -alpha.sin()));
        rhs_re.push(vp.re);
        rows_im.push((alpha.cos(), alpha.sin()));
        rhs_im.push(vp.im);
    }
    let (z_re, w_im) = solve_2x2_lsq(&rows_re, &rhs_re)?;
    let (z_im, w_re) = solve_2x2_lsq(&rows_im, &rhs_im)?;
    let z = Complex64::new(z_re, z_im);
    let w = Complex64::new(w_re, w_im);
    let fidelity = z.norm();
    if fidelity <= 1e-12 {
        return Err(Error::numerical(
            "echo fidelity collapsed to zero; observable is unrecoverable",
        ));
    }
    let observable = (w / z).re;
    let phase_drift = z.arg();
    let inferred_field = field_sensitivity.map(|s| -phase_drift / (2.0 * s));
    Ok(EvEstimate {
        observable,
        fidelity,
        phase_drift,
        inferred_field,
    })
}

/// Probability that the echo returned the register to all-zeros.
pub fn loschmidt_fidelity(record: &MeasurementRecord) -> Result<f64> {
    let shots: u64 = record.counts.values().sum();
    if shots == 0 {
        return Err(Error::Empty("no shots in record".into()));
    }
    Ok(record.counts.get(&0).copied().unwrap_or(0) as f64 / shots as f64)
}

/// Distillation readout result.
#[derive(Clone, Copy, Debug)]
pub struct VdOutcome {
    pub value: f64,
    /// ⟨copy-swap⟩ denominator, a purity proxy
    pub purity: f64,
    /// shots surviving the symmetry filter when postselection was applied
    pub keep_fraction: f64,
}

/// Estimate the target from joint two-register counts: ratio of the
/// transfer-averaged numerator to the copy-swap denominator, optionally
/// postselecting on the circuit's symmetry first.
pub fn vd_estimate(
    vd: &VdCircuit,
    record: &MeasurementRecord,
    postselected: bool,
) -> Result<VdOutcome> {
    if record.n_bits != 2 * vd.n {
        return Err(Error::dim("distillation record must cover both registers"));
    }
    let (counts, keep_fraction) = if postselected {
        let expected = vd.input_bitstring().count_ones() as usize;
        let ps = postselect(record, expected)?;
        (ps.record.counts, ps.keep_fraction)
    } else {
        (record.counts.clone(), 1.0)
    };
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::Empty("no shots survived postselection".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&bits, &count) in &counts {
        let (tn, td) = transfer_values(vd, bits as usize);
        let w = count as f64;
        num += tn * w;
        den += td * w;
    }
    if den <= 1e-12 * total as f64 {
        return Err(Error::numerical(
            "distillation denominator is non-positive; purity signal lost",
        ));
    }
    Ok(VdOutcome {
        value: num / den,
        purity: den / total as f64,
        keep_fraction,
    })
}

/// Clamp a physical expectation value into [−1, 1].
pub fn clip_expectation(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::distill::{build_vd_circuit, VdMode};
    use crate::circuits::echo::EvTarget;
    use crate::circuits::schedule::OrbitalSlot;
    use crate::simulator::{exact_distribution, PureState, QuantumState};

    fn record_from(bits_counts: &[(u64, u64)], n_bits: usize, symmetry: Symmetry) -> MeasurementRecord {
        let mut r = MeasurementRecord::new("test", n_bits, symmetry);
        for &(b, c) in bits_counts {
            r.add(b, c);
        }
        r
    }

    #[test]
    fn postselection_filters_weight() {
        let r = record_from(&[(0b0101, 70), (0b0111, 20), (0b0000, 10)], 4, Symmetry::Number);
        let ps = postselect(&r, 2).unwrap();
        assert_eq!(ps.record.counts.len(), 1);
        assert_eq!(ps.record.counts[&0b0101], 70);
        assert!((ps.keep_fraction - 0.7).abs() < 1e-12);
        // parity keeps both even-weight outcomes
        let r = record_from(&[(0b0101, 70), (0b0111, 20), (0b0000, 10)], 4, Symmetry::Parity);
        let ps = postselect(&r, 2).unwrap();
        assert!((ps.keep_fraction - 0.8).abs() < 1e-12);
    }

    #[test]
    fn diagonal_expectation_matches_state() {
        // ⟨Z₀⟩ and ⟨Z₀Z₁⟩ on a mixture of |01⟩ and |10⟩
        let r = record_from(&[(0b01, 300), (0b10, 100)], 2, Symmetry::Number);
        let mut z0 = PauliSum::new(2);
        z0.add_ops(&[(0, Pauli::Z)], 1.0).unwrap();
        assert!((diagonal_expectation(&r, &z0).unwrap() - 0.5).abs() < 1e-12);
        let mut zz = PauliSum::new(2);
        zz.add_ops(&[(0, Pauli::Z), (1, Pauli::Z)], 2.0).unwrap();
        zz.add_ops(&[], 1.0).unwrap();
        assert!((diagonal_expectation(&r, &zz).unwrap() - (-1.0)).abs() < 1e-12);
        let mut x = PauliSum::new(2);
        x.add_ops(&[(0, Pauli::X)], 1.0).unwrap();
        assert!(diagonal_expectation(&r, &x).is_err());
    }

    fn synth_reading(alpha: f64, basis: Tomography, v: Complex64, keep: f64) -> EvReading {
        // diff(X±) = ±Re V, diff(Y±) = ±Im V, diluted by the keep fraction
        let d = match basis {
            Tomography::XPlus => v.re,
            Tomography::XMinus => -v.re,
            Tomography::YPlus => v.im,
            Tomography::YMinus => -v.im,
        } * keep;
        let shots = 1e6;
        EvReading {
            alpha,
            basis,
            readout: EvReadout {
                m_plus: shots * (keep + d) / 2.0,
                m_minus: shots * (keep - d) / 2.0,
                m_rest: shots * (1.0 - keep),
            },
        }
    }

    #[test]
    fn ev_fit_recovers_signal() {
        let o = -0.37;
        let f = 0.62;
        let chi = 0.11;
        let s = 12.0;
        let mut readings = Vec::new();
        for &alpha in &[std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2, 2.356194490192345] {
            // V(α) = F e^{iχ} e^{−iα}(cosα + i sinα O); note the readout keeps
            // only a fraction F of shots in the conditioned bins
            let v = Complex64::from_polar(f, chi)
                * Complex64::from_polar(1.0, -alpha)
                * Complex64::new(alpha.cos(), alpha.sin() * o);
            for basis in Tomography::ALL {
                readings.push(synth_reading(alpha, basis, v / f, f));
            }
        }
        let est = ev_estimate(&readings, 1.0, Some(s)).unwrap();
        assert!((est.observable - o).abs() < 1e-10, "O = {}", est.observable);
        assert!((est.fidelity - f).abs() < 1e-10, "F = {}", est.fidelity);
        assert!((est.phase_drift - chi).abs() < 1e-10);
        assert!((est.inferred_field.unwrap() - (-chi / (2.0 * s))).abs() < 1e-12);
    }

    #[test]
    fn ev_fit_error_paths() {
        let v = Complex64::new(0.5, 0.1);
        let mut two_alphas = Vec::new();
        for &alpha in &[0.3, 0.9] {
            for basis in Tomography::ALL {
                two_alphas.push(synth_reading(alpha, basis, v, 1.0));
            }
        }
        assert!(ev_estimate(&two_alphas, 1.0, None).is_err());
        // three identical angles: ill-conditioned design
        let mut degenerate = Vec::new();
        for _ in 0..3 {
            for basis in Tomography::ALL {
                degenerate.push(synth_reading(0.5, basis, v, 1.0));
            }
        }
        // identical α keys collapse into one group, caught by the angle count
        assert!(ev_estimate(&degenerate, 1.0, None).is_err());
        // missing Y-type readings
        let xs_only: Vec<EvReading> = [0.2, 0.5, 0.8]
            .iter()
            .map(|&a| synth_reading(a, Tomography::XPlus, v, 1.0))
            .collect();
        assert!(ev_estimate(&xs_only, 1.0, None).is_err());
        // vanished fidelity
        let mut dead = Vec::new();
        for &alpha in &[0.3, 0.9, 1.4] {
            for basis in Tomography::ALL {
                dead.push(synth_reading(alpha, basis, Complex64::new(0.0, 0.0), 1.0));
            }
        }
        assert!(ev_estimate(&dead, 1.0, None).is_err());
    }

    #[test]
    fn loschmidt_counts_zeros() {
        let r = record_from(&[(0, 90), (0b10, 10)], 4, Symmetry::None);
        assert!((loschmidt_fidelity(&r).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn vd_estimate_matches_pure_expectation() {
        let n = 4;
        let theta = [0.35, -0.6, 0.2, 0.05];
        let target = EvTarget::DPlus(OrbitalSlot::Occupied(0), OrbitalSlot::Virtual(0));
        let vd = build_vd_circuit(n, 2, &theta, target, VdMode::Logical).unwrap();
        let noise = crate::simulator::NoiseModel::noiseless();
        let state = QuantumState::Pure(PureState::basis(2 * n, vd.input_bitstring()).unwrap());
        let mut rng = crate::simulator::rng::stream_rng(7, "vd-test", 0);
        let evolved = crate::simulator::apply_circuit(&state, &vd.circuit, &noise, &mut rng).unwrap();
        let probs = exact_distribution(&evolved, &noise);
        // exact probabilities as integer-ish counts
        let mut rec = MeasurementRecord::new(&vd.circuit_id, 2 * n, vd.symmetry);
        for (b, p) in probs.iter().enumerate() {
            let c = (p * 1e12).round() as u64;
            if c > 0 {
                rec.add(b as u64, c);
            }
        }
        let got = vd_estimate(&vd, &rec, true).unwrap();
        // oracle: direct expectation on the single-register pure state
        let ansatz = crate::circuits::schedule::build_upccd(n, None, &theta).unwrap();
        let single = QuantumState::Pure(
            PureState::basis(n, crate::circuits::schedule::initial_bitstring(n, 0)).unwrap(),
        );
        let evolved_single =
            crate::simulator::apply_circuit(&single, &ansatz, &noise, &mut rng).unwrap();
        let obs = crate::circuits::echo::target_observable(n, 2, target).unwrap();
        let want = crate::pauli::expectation(&evolved_single, &obs).unwrap();
        assert!((got.value - want).abs() < 1e-6, "vd {} vs direct {}", got.value, want);
        assert!(got.purity > 0.9);
    }

    #[test]
    fn clip_bounds() {
        assert_eq!(clip_expectation(1.7), 1.0);
        assert_eq!(clip_expectation(-3.0), -1.0);
        assert_eq!(clip_expectation(0.25), 0.25);
    }
}
