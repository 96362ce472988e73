//! Noisy circuit simulation: statevector trajectories with sampled Kraus
//! branches, exact density-matrix evolution, computational-basis sampling
//! with readout error, and serializable measurement records.

pub mod density;
pub mod pure;
pub mod rng;

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::circuits::Circuit;
use crate::error::{Error, Result};

/// Default register caps: statevectors up to 2^21 amplitudes, density
/// matrices up to 2^10 × 2^10. Raise explicitly for larger studies.
#[derive(Clone, Copy, Debug)]
pub struct MemoryLimits {
    pub pure_qubits: usize,
    pub density_qubits: usize,
}

impl Default for MemoryLimits {
    fn default() -> Self {
        MemoryLimits { pure_qubits: 21, density_qubits: 10 }
    }
}

/// Conserved quantity a record declares for postselection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    /// total excitation number fixed by the input state
    Number,
    /// excitation parity only
    Parity,
    /// no postselection applies
    None,
}

impl Symmetry {
    pub fn label(&self) -> &'static str {
        match self {
            Symmetry::Number => "number",
            Symmetry::Parity => "parity",
            Symmetry::None => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Symmetry> {
        match s {
            "number" => Ok(Symmetry::Number),
            "parity" => Ok(Symmetry::Parity),
            "none" => Ok(Symmetry::None),
            other => Err(Error::parse(format!("unknown symmetry '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PureState {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl PureState {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::zero_with_limits(n_qubits, &MemoryLimits::default())
    }

    pub fn zero_with_limits(n_qubits: usize, limits: &MemoryLimits) -> Result<Self> {
        if n_qubits > limits.pure_qubits {
            return Err(Error::MemoryLimit {
                requested: n_qubits,
                allowed: limits.pure_qubits,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(PureState { n_qubits, amps })
    }

    /// |b⟩ for a computational bitstring index (qubit q ↔ bit n−1−q).
    pub fn basis(n_qubits: usize, bitstring: usize) -> Result<Self> {
        let mut s = Self::zero(n_qubits)?;
        s.amps[0] = Complex64::new(0.0, 0.0);
        s.amps[bitstring] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << n_qubits {
            return Err(Error::dim(format!(
                "expected {} amplitudes for {} qubits, got {}",
                1usize << n_qubits,
                n_qubits,
                amps.len()
            )));
        }
        Ok(PureState { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn renormalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n < 1e-14 {
            return Err(Error::numerical("state norm collapsed to zero"));
        }
        let inv = 1.0 / n;
        for a in &mut self.amps {
            *a *= inv;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DensityState {
    n_qubits: usize,
    dim: usize,
    entries: Vec<Complex64>,
}

impl DensityState {
    pub fn basis(n_qubits: usize, bitstring: usize) -> Result<Self> {
        Self::basis_with_limits(n_qubits, bitstring, &MemoryLimits::default())
    }

    pub fn basis_with_limits(
        n_qubits: usize,
        bitstring: usize,
        limits: &MemoryLimits,
    ) -> Result<Self> {
        if n_qubits > limits.density_qubits {
            return Err(Error::MemoryLimit {
                requested: n_qubits,
                allowed: limits.density_qubits,
            });
        }
        let dim = 1usize << n_qubits;
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        entries[bitstring * dim + bitstring] = Complex64::new(1.0, 0.0);
        Ok(DensityState { n_qubits, dim, entries })
    }

    pub fn from_pure(state: &PureState) -> Result<Self> {
        Self::from_pure_with_limits(state, &MemoryLimits::default())
    }

    pub fn from_pure_with_limits(state: &PureState, limits: &MemoryLimits) -> Result<Self> {
        let mut rho = Self::basis_with_limits(state.n_qubits, 0, limits)?;
        let a = state.amplitudes();
        for r in 0..rho.dim {
            for c in 0..rho.dim {
                rho.entries[r * rho.dim + c] = a[r] * a[c].conj();
            }
        }
        Ok(rho)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.entries
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i]).sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr[ρ²] for Hermitian ρ
        let mut acc = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let a = self.entries[r * self.dim + c];
                let b = self.entries[c * self.dim + r];
                acc += (a * b).re;
            }
        }
        acc
    }
}

#[derive(Clone, Debug)]
pub enum QuantumState {
    Pure(PureState),
    Density(DensityState),
}

impl QuantumState {
    pub fn n_qubits(&self) -> usize {
        match self {
            QuantumState::Pure(s) => s.n_qubits(),
            QuantumState::Density(s) => s.n_qubits(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, QuantumState::Pure(_))
    }

    /// Sum of |amplitude|² or the real trace — 1 for a valid state.
    pub fn weight(&self) -> f64 {
        match self {
            QuantumState::Pure(s) => s.norm().powi(2),
            QuantumState::Density(s) => s.trace().re,
        }
    }
}

/// Per-gate, per-layer, and readout error rates. Everything defaults to
/// zero; `global_depolarizing_survival` is the probability the full circuit
/// output is kept rather than replaced by the maximally mixed state.
#[derive(Clone, Copy, Debug)]
pub struct NoiseModel {
    pub two_qubit_depolarizing: f64,
    pub single_qubit_depolarizing: f64,
    /// amplitude damping per qubit per non-virtual layer
    pub amplitude_damping: f64,
    /// phase flip probability per qubit per non-virtual layer
    pub dephasing: f64,
    /// coherent drift e^{ih ΣZ} per non-virtual layer
    pub background_field: f64,
    /// P(read 1 | prepared 0)
    pub readout_01: f64,
    /// P(read 0 | prepared 1)
    pub readout_10: f64,
    pub global_depolarizing_survival: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            two_qubit_depolarizing: 0.0,
            single_qubit_depolarizing: 0.0,
            amplitude_damping: 0.0,
            dephasing: 0.0,
            background_field: 0.0,
            readout_01: 0.0,
            readout_10: 0.0,
            global_depolarizing_survival: 1.0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("two_qubit_depolarizing", self.two_qubit_depolarizing),
            ("single_qubit_depolarizing", self.single_qubit_depolarizing),
            ("amplitude_damping", self.amplitude_damping),
            ("dephasing", self.dephasing),
            ("readout_01", self.readout_01),
            ("readout_10", self.readout_10),
            ("global_depolarizing_survival", self.global_depolarizing_survival),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if !self.background_field.is_finite() {
            return Err(Error::invalid("background_field must be finite"));
        }
        Ok(())
    }

    pub fn is_coherent_only(&self) -> bool {
        self.two_qubit_depolarizing == 0.0
            && self.single_qubit_depolarizing == 0.0
            && self.amplitude_damping == 0.0
            && self.dephasing == 0.0
            && self.global_depolarizing_survival == 1.0
    }

    pub fn has_readout_error(&self) -> bool {
        self.readout_01 != 0.0 || self.readout_10 != 0.0
    }
}

/// Bitstring counts from one circuit plus the metadata needed to interpret
/// them downstream.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub circuit_id: String,
    pub n_bits: usize,
    pub shots: u64,
    pub counts: BTreeMap<u64, u64>,
    /// what each readout bit reports, qubit order (empty = unlabeled)
    pub bit_labels: Vec<String>,
    /// witness-qubit basis for echo records
    pub tomography: Option<String>,
    pub symmetry: Symmetry,
}

impl MeasurementRecord {
    pub fn new(circuit_id: impl Into<String>, n_bits: usize, symmetry: Symmetry) -> Self {
        MeasurementRecord {
            circuit_id: circuit_id.into(),
            n_bits,
            shots: 0,
            counts: BTreeMap::new(),
            bit_labels: Vec::new(),
            tomography: None,
            symmetry,
        }
    }

    pub fn add(&mut self, bitstring: u64, count: u64) {
        *self.counts.entry(bitstring).or_insert(0) += count;
        self.shots += count;
    }

    fn bitstring_text(&self, b: u64) -> String {
        (0..self.n_bits)
            .map(|q| {
                if b & (1 << (self.n_bits - 1 - q)) != 0 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    /// Header lines `# key value`, then one `bitstring count` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# circuit {}\n", self.circuit_id));
        out.push_str(&format!("# bits {}\n", self.n_bits));
        out.push_str(&format!("# shots {}\n", self.shots));
        out.push_str(&format!("# symmetry {}\n", self.symmetry.label()));
        if let Some(t) = &self.tomography {
            out.push_str(&format!("# tomography {t}\n"));
        }
        if !self.bit_labels.is_empty() {
            out.push_str(&format!("# labels {}\n", self.bit_labels.join(",")));
        }
        for (&b, &c) in &self.counts {
            out.push_str(&format!("{} {}\n", self.bitstring_text(b), c));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut circuit_id = String::new();
        let mut n_bits: Option<usize> = None;
        let mut symmetry = Symmetry::None;
        let mut tomography = None;
        let mut bit_labels = Vec::new();
        let mut counts = BTreeMap::new();
        let mut shots = 0u64;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("circuit ") {
                    circuit_id = v.trim().to_string();
                } else if let Some(v) = rest.strip_prefix("bits ") {
                    n_bits = Some(v.trim().parse().map_err(|_| {
                        Error::parse(format!("bad bit count '{v}'"))
                    })?);
                } else if let Some(v) = rest.strip_prefix("symmetry ") {
                    symmetry = Symmetry::parse(v.trim())?;
                } else if let Some(v) = rest.strip_prefix("tomography ") {
                    tomography = Some(v.trim().to_string());
                } else if let Some(v) = rest.strip_prefix("labels ") {
                    bit_labels = v.trim().split(',').map(str::to_string).collect();
                } else if rest.strip_prefix("shots ").is_none() {
                    return Err(Error::parse(format!("unknown header line '{line}'")));
                }
                continue;
            }
            let mut parts = line.split_whitespace();
            let (bits, count) = match (parts.next(), parts.next(), parts.next()) {
                (Some(b), Some(c), None) => (b, c),
                _ => return Err(Error::parse(format!("bad record line '{line}'"))),
            };
            let nb = n_bits.ok_or_else(|| Error::parse("record body before bits header"))?;
            if bits.len() != nb {
                return Err(Error::parse(format!(
                    "bitstring '{bits}' has {} bits, expected {nb}",
                    bits.len()
                )));
            }
            let mut idx = 0u64;
            for ch in bits.chars() {
                idx <<= 1;
                match ch {
                    '0' => {}
                    '1' => idx |= 1,
                    _ => return Err(Error::parse(format!("bad bitstring '{bits}'"))),
                }
            }
            let c: u64 = count
                .parse()
                .map_err(|_| Error::parse(format!("bad count '{count}'")))?;
            *counts.entry(idx).or_insert(0) += c;
            shots += c;
        }
        let n_bits = n_bits.ok_or_else(|| Error::parse("missing bits header"))?;
        if circuit_id.is_empty() {
            return Err(Error::parse("missing circuit header"));
        }
        Ok(MeasurementRecord {
            circuit_id,
            n_bits,
            shots,
            counts,
            bit_labels,
            tomography,
            symmetry,
        })
    }

    /// Iterate outcomes as (bitstring, fraction-of-shots).
    pub fn weighted(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        let total = self.shots as f64;
        self.counts.iter().map(move |(&b, &c)| (b, c as f64 / total))
    }
}

/// Run one circuit: pure inputs evolve as a single Kraus trajectory (use the
/// provided stream for reproducibility), density inputs evolve exactly.
pub fn apply_circuit(
    state: &QuantumState,
    circuit: &Circuit,
    noise: &NoiseModel,
    rng: &mut ChaCha12Rng,
) -> Result<QuantumState> {
    noise.validate()?;
    match state {
        QuantumState::Pure(s) => Ok(QuantumState::Pure(pure::evolve_pure(
            s, circuit, noise, rng,
        )?)),
        QuantumState::Density(s) => Ok(QuantumState::Density(density::evolve_density(
            s, circuit, noise,
        )?)),
    }
}

/// Ideal computational-basis distribution of a state (before readout error).
pub fn born_probabilities(state: &QuantumState) -> Vec<f64> {
    match state {
        QuantumState::Pure(s) => s.amplitudes().iter().map(|a| a.norm_sqr()).collect(),
        QuantumState::Density(s) => {
            let dim = s.dim();
            (0..dim)
                .map(|i| s.entries()[i * dim + i].re.max(0.0))
                .collect()
        }
    }
}

/// Push a distribution through the per-bit readout flip channel.
pub fn apply_readout_error(probs: &mut [f64], n_bits: usize, p01: f64, p10: f64) {
    if p01 == 0.0 && p10 == 0.0 {
        return;
    }
    for q in 0..n_bits {
        let mask = 1usize << (n_bits - 1 - q);
        for base in 0..probs.len() {
            if base & mask != 0 {
                continue;
            }
            let p0 = probs[base];
            let p1 = probs[base | mask];
            probs[base] = p0 * (1.0 - p01) + p1 * p10;
            probs[base | mask] = p0 * p01 + p1 * (1.0 - p10);
        }
    }
}

/// Exact readout distribution: Born probabilities with readout error folded
/// in. This is the infinite-shot limit of `sample`.
pub fn exact_distribution(state: &QuantumState, noise: &NoiseModel) -> Vec<f64> {
    let mut probs = born_probabilities(state);
    apply_readout_error(&mut probs, state.n_qubits(), noise.readout_01, noise.readout_10);
    probs
}

/// Multinomial sampling with per-shot readout bit flips.
pub fn sample(
    state: &QuantumState,
    shots: u64,
    noise: &NoiseModel,
    rng: &mut ChaCha12Rng,
    circuit_id: &str,
    symmetry: Symmetry,
) -> Result<MeasurementRecord> {
    let n_bits = state.n_qubits();
    let probs = born_probabilities(state);
    let total: f64 = probs.iter().sum();
    if total < 1e-12 {
        return Err(Error::numerical("state has vanishing total probability"));
    }
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p / total;
        cdf.push(acc);
    }
    let mut record = MeasurementRecord::new(circuit_id, n_bits, symmetry);
    for _ in 0..shots {
        let u: f64 = rng.gen();
        let mut idx = cdf.partition_point(|&c| c < u);
        if idx >= probs.len() {
            idx = probs.len() - 1;
        }
        let mut bits = idx as u64;
        if noise.has_readout_error() {
            for q in 0..n_bits {
                let mask = 1u64 << (n_bits - 1 - q);
                let flip = if bits & mask == 0 {
                    rng.gen::<f64>() < noise.readout_01
                } else {
                    rng.gen::<f64>() < noise.readout_10
                };
                if flip {
                    bits ^= mask;
                }
            }
        }
        record.add(bits, 1);
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{Circuit, Gate};
    use crate::simulator::rng::stream_rng;
    use std::f64::consts::FRAC_PI_4;

    fn bell_circuit() -> Circuit {
        let mut c = Circuit::new(2);
        c.push_layer(vec![Gate::PhasedXZ {
            q: 0,
            x: FRAC_PI_4,
            axis: -FRAC_PI_4,
            z: std::f64::consts::FRAC_PI_2,
        }])
        .unwrap();
        c.push_layer(vec![Gate::CX { control: 0, target: 1 }]).unwrap();
        c
    }

    #[test]
    fn pure_and_density_agree_noiseless() {
        let c = bell_circuit();
        let noise = NoiseModel::noiseless();
        let mut rng = stream_rng(1, "t", 0);
        let pure = apply_circuit(
            &QuantumState::Pure(PureState::zero(2).unwrap()),
            &c,
            &noise,
            &mut rng,
        )
        .unwrap();
        let dens = apply_circuit(
            &QuantumState::Density(DensityState::basis(2, 0).unwrap()),
            &c,
            &noise,
            &mut rng,
        )
        .unwrap();
        let pp = born_probabilities(&pure);
        let pd = born_probabilities(&dens);
        for (a, b) in pp.iter().zip(&pd) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((pp[0] - 0.5).abs() < 1e-12);
        assert!((pp[3] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn trajectories_average_to_density() {
        let c = bell_circuit();
        let noise = NoiseModel {
            two_qubit_depolarizing: 0.2,
            single_qubit_depolarizing: 0.05,
            amplitude_damping: 0.03,
            dephasing: 0.02,
            background_field: 0.04,
            ..NoiseModel::noiseless()
        };
        let dens = apply_circuit(
            &QuantumState::Density(DensityState::basis(2, 0).unwrap()),
            &c,
            &noise,
            &mut stream_rng(0, "x", 0),
        )
        .unwrap();
        let exact = born_probabilities(&dens);

        let trials = 60_000u64;
        let mut acc = vec![0.0f64; 4];
        for t in 0..trials {
            let mut rng = stream_rng(5, "avg", t);
            let out = apply_circuit(
                &QuantumState::Pure(PureState::zero(2).unwrap()),
                &c,
                &noise,
                &mut rng,
            )
            .unwrap();
            for (a, p) in acc.iter_mut().zip(born_probabilities(&out)) {
                *a += p;
            }
        }
        for a in &mut acc {
            *a /= trials as f64;
        }
        for (i, (a, b)) in acc.iter().zip(&exact).enumerate() {
            assert!(
                (a - b).abs() < 0.01,
                "outcome {i}: trajectory {a} vs exact {b}"
            );
        }
    }

    #[test]
    fn record_round_trip() {
        let mut r = MeasurementRecord::new("test/1", 4, Symmetry::Number);
        r.add(0b0101, 40);
        r.add(0b1010, 25);
        r.add(0b0000, 1);
        r.bit_labels = vec!["virt0".into(), "occ0".into(), "virt1".into(), "occ1".into()];
        r.tomography = Some("x+".into());
        let text = r.to_text();
        let back = MeasurementRecord::from_text(&text).unwrap();
        assert_eq!(r, back);
        assert!(text.contains("0101 40"));
    }

    #[test]
    fn record_rejects_garbage() {
        assert!(MeasurementRecord::from_text("junk").is_err());
        assert!(MeasurementRecord::from_text("# circuit a\n# bits 2\n0101 3\n").is_err());
        assert!(MeasurementRecord::from_text("# circuit a\n# bits 4\n01x1 3\n").is_err());
    }

    #[test]
    fn readout_transform_is_stochastic() {
        let mut probs = vec![0.25; 4];
        apply_readout_error(&mut probs, 2, 0.1, 0.3);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut probs = vec![1.0, 0.0, 0.0, 0.0];
        apply_readout_error(&mut probs, 2, 0.1, 0.0);
        // each bit flips 0→1 with 0.1
        assert!((probs[0] - 0.81).abs() < 1e-12);
        assert!((probs[3] - 0.01).abs() < 1e-12);
    }

    #[test]
    fn sampling_matches_distribution() {
        let state = QuantumState::Pure(
            PureState::from_amplitudes(
                2,
                vec![
                    Complex64::new(0.8, 0.0),
                    Complex64::new(0.0, 0.6),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.0),
                ],
            )
            .unwrap(),
        );
        let noise = NoiseModel { readout_01: 0.05, ..NoiseModel::noiseless() };
        let mut rng = stream_rng(3, "sample", 0);
        let rec = sample(&state, 200_000, &noise, &mut rng, "sample", Symmetry::None).unwrap();
        let expect = exact_distribution(&state, &noise);
        for (idx, &e) in expect.iter().enumerate() {
            let got = *rec.counts.get(&(idx as u64)).unwrap_or(&0) as f64 / rec.shots as f64;
            assert!((got - e).abs() < 0.005, "idx {idx}: {got} vs {e}");
        }
    }

    #[test]
    fn memory_limits_enforced() {
        assert!(PureState::zero(22).is_err());
        assert!(DensityState::basis(11, 0).is_err());
        let loose = MemoryLimits { pure_qubits: 23, density_qubits: 11 };
        assert!(PureState::zero_with_limits(22, &loose).is_ok());
    }
}
