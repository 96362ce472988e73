//! Pauli-string and Pauli-sum algebra.
//!
//! Conventions used throughout the crate:
//! - qubit `q` of an `n`-qubit register maps to bit `n-1-q` of a basis index,
//!   so bitstrings print left-to-right as qubit 0, 1, 2, …;
//! - a [`PauliString`] carries an explicit phase in {+1, +i, -1, -i};
//! - a [`PauliSum`] stores real coefficients keyed by phase-free strings
//!   (Hermitian operators only).

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::simulator::QuantumState;

/// Coefficients at or below this magnitude are dropped by [`PauliSum::simplify`].
pub const PRUNE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Result<Pauli> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::parse(format!("unknown Pauli letter '{other}'"))),
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Single-site product `self · other` as (result, phase exponent k) with
    /// the phase i^k.
    fn mul(self, other: Pauli) -> (Pauli, u8) {
        use Pauli::*;
        match (self, other) {
            (I, p) => (p, 0),
            (p, I) => (p, 0),
            (X, X) | (Y, Y) | (Z, Z) => (I, 0),
            (X, Y) => (Z, 1),
            (Y, X) => (Z, 3),
            (Y, Z) => (X, 1),
            (Z, Y) => (X, 3),
            (Z, X) => (Y, 1),
            (X, Z) => (Y, 3),
        }
    }
}

/// A power of i: `Phase(k)` represents i^k, k ∈ {0,1,2,3}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn new(k: u8) -> Phase {
        Phase(k % 4)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn value(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn is_real(self) -> bool {
        self.0 % 2 == 0
    }

    fn compose(self, other: Phase) -> Phase {
        Phase((self.0 + other.0) % 4)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.0 {
            0 => "+1",
            1 => "+i",
            2 => "-1",
            _ => "-i",
        };
        write!(f, "{s}")
    }
}

/// A phased tensor product of single-qubit Paulis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub phase: Phase,
    pub factors: Vec<Pauli>,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> PauliString {
        PauliString {
            phase: Phase::ONE,
            factors: vec![Pauli::I; n_qubits],
        }
    }

    /// Build a string on `n_qubits` qubits with the given single-site
    /// operators; unspecified sites are identity.
    pub fn from_ops(n_qubits: usize, ops: &[(usize, Pauli)]) -> Result<PauliString> {
        let mut factors = vec![Pauli::I; n_qubits];
        for &(q, p) in ops {
            if q >= n_qubits {
                return Err(Error::invalid(format!(
                    "qubit {q} out of range for {n_qubits} qubits"
                )));
            }
            if factors[q] != Pauli::I {
                return Err(Error::invalid(format!("duplicate qubit {q} in operator list")));
            }
            factors[q] = p;
        }
        Ok(PauliString {
            phase: Phase::ONE,
            factors,
        })
    }

    pub fn from_label(label: &str) -> Result<PauliString> {
        let factors = label
            .chars()
            .map(Pauli::from_char)
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString {
            phase: Phase::ONE,
            factors,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.factors.len()
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        self.factors.iter().filter(|p| **p != Pauli::I).count()
    }

    pub fn label(&self) -> String {
        self.factors.iter().map(|p| p.to_char()).collect()
    }

    /// Bit masks (x, z) of the X- and Z-type content: site q has pauli X or Y
    /// iff bit n-1-q of x is set, Z or Y iff the bit of z is set.
    pub(crate) fn masks(&self) -> (usize, usize, u32) {
        let n = self.factors.len();
        let mut x = 0usize;
        let mut z = 0usize;
        let mut n_y = 0u32;
        for (q, p) in self.factors.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    n_y += 1;
                }
                Pauli::Z => z |= bit,
            }
        }
        (x, z, n_y)
    }

    /// Dense matrix (row-major, dimension 2^n). Intended for tests and small
    /// oracles; guarded to n ≤ 12.
    pub fn matrix(&self) -> Result<Vec<Complex64>> {
        let n = self.factors.len();
        if n > 12 {
            return Err(Error::MemoryLimit { requested: n, allowed: 12 });
        }
        let dim = 1usize << n;
        let (x, z, n_y) = self.masks();
        let base = self.phase.value() * Phase::new((n_y % 4) as u8).value();
        let mut m = vec![Complex64::new(0.0, 0.0); dim * dim];
        for col in 0..dim {
            let row = col ^ x;
            let sign = if ((col & z).count_ones()) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            m[row * dim + col] = base * sign;
        }
        Ok(m)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})·{}", self.phase, self.label())
    }
}

/// Product of two Pauli strings with phase tracking.
pub fn multiply(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::dim(format!(
            "cannot multiply strings on {} and {} qubits",
            a.n_qubits(),
            b.n_qubits()
        )));
    }
    let mut phase = a.phase.compose(b.phase);
    let factors = a
        .factors
        .iter()
        .zip(&b.factors)
        .map(|(&pa, &pb)| {
            let (p, k) = pa.mul(pb);
            phase = phase.compose(Phase::new(k));
            p
        })
        .collect();
    Ok(PauliString { phase, factors })
}

/// True iff the strings commute site-by-site (each site's factors are equal
/// or at least one is identity) — the grouping condition for simultaneous
/// computational-basis measurement after a shared rotation.
pub fn qubitwise_commutes(a: &PauliString, b: &PauliString) -> bool {
    a.n_qubits() == b.n_qubits()
        && a.factors.iter().zip(&b.factors).all(|(&pa, &pb)| {
            pa == pb || pa == Pauli::I || pb == Pauli::I
        })
}

/// Hermitian operator: real linear combination of phase-free Pauli strings.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<Vec<Pauli>, f64>,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> PauliSum {
        PauliSum {
            n_qubits,
            terms: BTreeMap::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[Pauli], f64)> {
        self.terms.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn coefficient(&self, factors: &[Pauli]) -> f64 {
        self.terms.get(factors).copied().unwrap_or(0.0)
    }

    /// Accumulate `coeff` × (identity-phase string of `factors`).
    pub fn add_term(&mut self, factors: &[Pauli], coeff: f64) -> Result<()> {
        if factors.len() != self.n_qubits {
            return Err(Error::dim(format!(
                "term on {} qubits added to sum on {}",
                factors.len(),
                self.n_qubits
            )));
        }
        *self.terms.entry(factors.to_vec()).or_insert(0.0) += coeff;
        Ok(())
    }

    /// Accumulate `coeff` × string, folding the string's phase into the
    /// coefficient. Imaginary phases are rejected (sum must stay Hermitian).
    pub fn add_string(&mut self, s: &PauliString, coeff: f64) -> Result<()> {
        if !s.phase.is_real() {
            return Err(Error::invalid(format!(
                "imaginary phase {} cannot enter a real-coefficient sum",
                s.phase
            )));
        }
        let sign = if s.phase == Phase::MINUS_ONE { -1.0 } else { 1.0 };
        self.add_term(&s.factors, sign * coeff)
    }

    /// Convenience: sparse single-term accumulate.
    pub fn add_ops(&mut self, ops: &[(usize, Pauli)], coeff: f64) -> Result<()> {
        let s = PauliString::from_ops(self.n_qubits, ops)?;
        self.add_term(&s.factors, coeff)
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.terms.values_mut() {
            *v *= factor;
        }
    }

    pub fn add_sum(&mut self, other: &PauliSum) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::dim("summing operators on different qubit counts"));
        }
        for (k, &v) in &other.terms {
            *self.terms.entry(k.clone()).or_insert(0.0) += v;
        }
        Ok(())
    }

    /// Combine duplicates (already automatic) and drop terms with |coeff| ≤
    /// [`PRUNE_THRESHOLD`].
    pub fn simplify(&mut self) {
        self.terms.retain(|_, v| v.abs() > PRUNE_THRESHOLD);
    }

    /// Relabel qubits: factor on qubit q moves to qubit perm[q]. `perm` must
    /// be a permutation of 0..n.
    pub fn permuted(&self, perm: &[usize]) -> Result<PauliSum> {
        if perm.len() != self.n_qubits {
            return Err(Error::dim("permutation length must match qubit count"));
        }
        let mut seen = vec![false; self.n_qubits];
        for &t in perm {
            if t >= self.n_qubits || seen[t] {
                return Err(Error::invalid("not a permutation"));
            }
            seen[t] = true;
        }
        let mut out = PauliSum::new(self.n_qubits);
        for (factors, coeff) in self.iter() {
            let mut moved = vec![Pauli::I; self.n_qubits];
            for (q, &p) in factors.iter().enumerate() {
                moved[perm[q]] = p;
            }
            out.add_term(&moved, coeff)?;
        }
        Ok(out)
    }

    /// Identity-term coefficient (constant offset).
    pub fn offset(&self) -> f64 {
        self.coefficient(&vec![Pauli::I; self.n_qubits])
    }

    /// Operator product of two sums (used by test oracles and the reflection
    /// covariance machinery). Imaginary parts must cancel for the result to
    /// be representable; they do whenever the product is Hermitian.
    pub fn product(&self, other: &PauliSum) -> Result<PauliSum> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::dim("product of operators on different qubit counts"));
        }
        let mut acc: BTreeMap<Vec<Pauli>, Complex64> = BTreeMap::new();
        for (fa, ca) in self.iter() {
            let sa = PauliString {
                phase: Phase::ONE,
                factors: fa.to_vec(),
            };
            for (fb, cb) in other.iter() {
                let sb = PauliString {
                    phase: Phase::ONE,
                    factors: fb.to_vec(),
                };
                let prod = multiply(&sa, &sb)?;
                *acc.entry(prod.factors).or_insert(Complex64::new(0.0, 0.0)) +=
                    prod.phase.value() * ca * cb;
            }
        }
        let mut out = PauliSum::new(self.n_qubits);
        for (k, v) in acc {
            if v.im.abs() > 1e-9 {
                return Err(Error::numerical(format!(
                    "non-Hermitian product: imaginary residue {} on {}",
                    v.im,
                    k.iter().map(|p| p.to_char()).collect::<String>()
                )));
            }
            if v.re.abs() > PRUNE_THRESHOLD {
                out.terms.insert(k, v.re);
            }
        }
        Ok(out)
    }

    /// ⟨ψ|self|ψ⟩ for a raw amplitude vector.
    pub fn expectation_statevector(&self, amps: &[Complex64]) -> Result<f64> {
        let dim = 1usize << self.n_qubits;
        if amps.len() != dim {
            return Err(Error::dim(format!(
                "statevector length {} vs operator dimension {dim}",
                amps.len()
            )));
        }
        let mut total = 0.0;
        for (factors, coeff) in self.iter() {
            let s = PauliString {
                phase: Phase::ONE,
                factors: factors.to_vec(),
            };
            let (x, z, n_y) = s.masks();
            let base = Phase::new((n_y % 4) as u8).value();
            let mut acc = Complex64::new(0.0, 0.0);
            for idx in 0..dim {
                let amp = amps[idx];
                if amp.re == 0.0 && amp.im == 0.0 {
                    continue;
                }
                let sign = if ((idx & z).count_ones()) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                acc += amps[idx ^ x].conj() * amp * sign;
            }
            total += coeff * (base * acc).re;
        }
        Ok(total)
    }

    /// Tr[ρ·self] for a row-major density matrix.
    pub fn expectation_density(&self, rho: &[Complex64], dim: usize) -> Result<f64> {
        if dim != 1usize << self.n_qubits || rho.len() != dim * dim {
            return Err(Error::dim("density matrix dimension mismatch"));
        }
        let mut total = 0.0;
        for (factors, coeff) in self.iter() {
            let s = PauliString {
                phase: Phase::ONE,
                factors: factors.to_vec(),
            };
            let (x, z, n_y) = s.masks();
            let base = Phase::new((n_y % 4) as u8).value();
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..dim {
                let sign = if ((b & z).count_ones()) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                acc += rho[b * dim + (b ^ x)] * sign;
            }
            total += coeff * (base * acc).re;
        }
        Ok(total)
    }

    /// Apply the operator to a statevector (dense small-scale helper).
    pub fn apply_to_statevector(&self, amps: &[Complex64]) -> Result<Vec<Complex64>> {
        let dim = 1usize << self.n_qubits;
        if amps.len() != dim {
            return Err(Error::dim("statevector length mismatch"));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (factors, coeff) in self.iter() {
            let s = PauliString {
                phase: Phase::ONE,
                factors: factors.to_vec(),
            };
            let (x, z, n_y) = s.masks();
            let base = Phase::new((n_y % 4) as u8).value() * coeff;
            for idx in 0..dim {
                let amp = amps[idx];
                if amp.re == 0.0 && amp.im == 0.0 {
                    continue;
                }
                let sign = if ((idx & z).count_ones()) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                out[idx ^ x] += base * sign * amp;
            }
        }
        Ok(out)
    }

    /// Dense matrix of the operator; guarded to n ≤ 12.
    pub fn matrix(&self) -> Result<Vec<Complex64>> {
        if self.n_qubits > 12 {
            return Err(Error::MemoryLimit { requested: self.n_qubits, allowed: 12 });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (factors, coeff) in self.iter() {
            let s = PauliString {
                phase: Phase::ONE,
                factors: factors.to_vec(),
            };
            let (x, z, n_y) = s.masks();
            let base = Phase::new((n_y % 4) as u8).value() * coeff;
            for col in 0..dim {
                let row = col ^ x;
                let sign = if ((col & z).count_ones()) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                m[row * dim + col] += base * sign;
            }
        }
        Ok(m)
    }

    /// Serialize as one term per line: `coefficient label`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (factors, coeff) in self.iter() {
            let label: String = factors.iter().map(|p| p.to_char()).collect();
            out.push_str(&format!("{coeff} {label}\n"));
        }
        out
    }

    /// Parse the `to_text` format. Blank lines and `#` comments are skipped;
    /// duplicate labels accumulate.
    pub fn from_text(text: &str) -> Result<PauliSum> {
        let mut sum: Option<PauliSum> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let coeff: f64 = parts
                .next()
                .ok_or_else(|| Error::parse(format!("line {}: missing coefficient", lineno + 1)))?
                .parse()
                .map_err(|e| Error::parse(format!("line {}: bad coefficient ({e})", lineno + 1)))?;
            let label = parts
                .next()
                .ok_or_else(|| Error::parse(format!("line {}: missing label", lineno + 1)))?;
            if parts.next().is_some() {
                return Err(Error::parse(format!("line {}: trailing tokens", lineno + 1)));
            }
            let s = PauliString::from_label(label)?;
            let sum = sum.get_or_insert_with(|| PauliSum::new(s.n_qubits()));
            sum.add_term(&s.factors, coeff)?;
        }
        sum.ok_or_else(|| Error::parse("no terms found"))
    }
}

/// Expectation value ⟨state|op|state⟩ (pure) or Tr[ρ·op] (density).
pub fn expectation(state: &QuantumState, op: &PauliSum) -> Result<f64> {
    if state.n_qubits() != op.n_qubits() {
        return Err(Error::dim(format!(
            "state on {} qubits, operator on {}",
            state.n_qubits(),
            op.n_qubits()
        )));
    }
    match state {
        QuantumState::Pure(sv) => op.expectation_statevector(sv.amplitudes()),
        QuantumState::Density(rho) => op.expectation_density(rho.entries(), rho.dim()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn all_paulis() -> [Pauli; 4] {
        [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z]
    }

    #[test]
    fn two_qubit_products_match_dense_oracle() {
        // Exhaustive 16×16 check of multiply() against dense matrix products.
        for pa in all_paulis() {
            for pb in all_paulis() {
                for pc in all_paulis() {
                    for pd in all_paulis() {
                        let a = PauliString {
                            phase: Phase::ONE,
                            factors: vec![pa, pb],
                        };
                        let b = PauliString {
                            phase: Phase::ONE,
                            factors: vec![pc, pd],
                        };
                        let prod = multiply(&a, &b).unwrap();
                        let dense = linalg::mat_mul(&a.matrix().unwrap(), &b.matrix().unwrap(), 4);
                        let from_prod = prod.matrix().unwrap();
                        for (x, y) in dense.iter().zip(&from_prod) {
                            assert_abs_diff_eq!(x.re, y.re, epsilon = 1e-12);
                            assert_abs_diff_eq!(x.im, y.im, epsilon = 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn phases_compose() {
        let x = PauliString::from_label("X").unwrap();
        let y = PauliString::from_label("Y").unwrap();
        let xy = multiply(&x, &y).unwrap();
        assert_eq!(xy.phase, Phase::I);
        assert_eq!(xy.label(), "Z");
        let yx = multiply(&y, &x).unwrap();
        assert_eq!(yx.phase, Phase::MINUS_I);
        // (iZ)·(-iZ) = I with phase +1
        let back = multiply(&xy, &yx).unwrap();
        assert_eq!(back.phase, Phase::ONE);
        assert_eq!(back.label(), "I");
    }

    #[test]
    fn self_product_is_identity() {
        for label in ["XYZI", "ZZZZ", "IXIY"] {
            let s = PauliString::from_label(label).unwrap();
            let sq = multiply(&s, &s).unwrap();
            assert_eq!(sq.phase, Phase::ONE);
            assert_eq!(sq.label(), "I".repeat(label.len()));
        }
    }

    #[test]
    fn qubitwise_commutation() {
        let a = PauliString::from_label("XIZ").unwrap();
        let b = PauliString::from_label("XZI").unwrap();
        assert!(qubitwise_commutes(&a, &b));
        let c = PauliString::from_label("ZIZ").unwrap();
        assert!(!qubitwise_commutes(&a, &c));
        // commuting globally but not qubitwise:
        let d = PauliString::from_label("XX").unwrap();
        let e = PauliString::from_label("YY").unwrap();
        assert!(!qubitwise_commutes(&d, &e));
    }

    #[test]
    fn simplify_prunes_small_terms() {
        let mut sum = PauliSum::new(2);
        sum.add_ops(&[(0, Pauli::Z)], 0.5).unwrap();
        sum.add_ops(&[(0, Pauli::Z)], -0.5).unwrap();
        sum.add_ops(&[(1, Pauli::X)], 1e-13).unwrap();
        sum.add_ops(&[(0, Pauli::X), (1, Pauli::X)], 0.25).unwrap();
        sum.simplify();
        assert_eq!(sum.len(), 1);
        assert_abs_diff_eq!(sum.coefficient(&[Pauli::X, Pauli::X]), 0.25);
    }

    #[test]
    fn text_round_trip() {
        let mut sum = PauliSum::new(3);
        sum.add_ops(&[(0, Pauli::Z)], -1.5).unwrap();
        sum.add_ops(&[(1, Pauli::X), (2, Pauli::X)], 0.125).unwrap();
        sum.add_ops(&[], 2.0).unwrap();
        let text = sum.to_text();
        let back = PauliSum::from_text(&text).unwrap();
        assert_eq!(sum, back);
    }

    #[test]
    fn text_rejects_garbage() {
        assert!(PauliSum::from_text("").is_err());
        assert!(PauliSum::from_text("1.0 XQ").is_err());
        assert!(PauliSum::from_text("zz XX").is_err());
        assert!(PauliSum::from_text("1.0 XX extra").is_err());
    }

    #[test]
    fn expectation_on_basis_states() {
        // |01⟩: qubit 0 = 0, qubit 1 = 1 → index 0b01 = 1.
        let mut amps = vec![Complex64::new(0.0, 0.0); 4];
        amps[1] = Complex64::new(1.0, 0.0);
        let mut z0 = PauliSum::new(2);
        z0.add_ops(&[(0, Pauli::Z)], 1.0).unwrap();
        let mut z1 = PauliSum::new(2);
        z1.add_ops(&[(1, Pauli::Z)], 1.0).unwrap();
        assert_abs_diff_eq!(z0.expectation_statevector(&amps).unwrap(), 1.0);
        assert_abs_diff_eq!(z1.expectation_statevector(&amps).unwrap(), -1.0);
    }

    #[test]
    fn density_expectation_matches_pure() {
        let amps = vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.0, -0.5),
        ];
        let mut rho = vec![Complex64::new(0.0, 0.0); 16];
        for r in 0..4 {
            for c in 0..4 {
                rho[r * 4 + c] = amps[r] * amps[c].conj();
            }
        }
        let mut op = PauliSum::new(2);
        op.add_ops(&[(0, Pauli::X), (1, Pauli::Y)], 0.7).unwrap();
        op.add_ops(&[(1, Pauli::Z)], -0.3).unwrap();
        let ev_pure = op.expectation_statevector(&amps).unwrap();
        let ev_rho = op.expectation_density(&rho, 4).unwrap();
        assert_abs_diff_eq!(ev_pure, ev_rho, epsilon = 1e-12);
    }

    #[test]
    fn product_reproduces_reflection_identity() {
        // D⁺·D⁻ = Z_iZ_j for the two-qubit reflections.
        let mut dp = PauliSum::new(2);
        dp.add_ops(&[(0, Pauli::Z)], 0.5).unwrap();
        dp.add_ops(&[(1, Pauli::Z)], 0.5).unwrap();
        dp.add_ops(&[(0, Pauli::X), (1, Pauli::X)], 0.5).unwrap();
        dp.add_ops(&[(0, Pauli::Y), (1, Pauli::Y)], 0.5).unwrap();
        let mut dm = PauliSum::new(2);
        dm.add_ops(&[(0, Pauli::Z)], 0.5).unwrap();
        dm.add_ops(&[(1, Pauli::Z)], 0.5).unwrap();
        dm.add_ops(&[(0, Pauli::X), (1, Pauli::X)], -0.5).unwrap();
        dm.add_ops(&[(0, Pauli::Y), (1, Pauli::Y)], -0.5).unwrap();
        let prod = dp.product(&dm).unwrap();
        assert_eq!(prod.len(), 1);
        assert_abs_diff_eq!(prod.coefficient(&[Pauli::Z, Pauli::Z]), 1.0, epsilon = 1e-12);
    }

    fn arb_pauli() -> impl Strategy<Value = Pauli> {
        prop_oneof![
            Just(Pauli::I),
            Just(Pauli::X),
            Just(Pauli::Y),
            Just(Pauli::Z)
        ]
    }

    proptest! {
        #[test]
        fn multiply_associative(
            a in proptest::collection::vec(arb_pauli(), 3),
            b in proptest::collection::vec(arb_pauli(), 3),
            c in proptest::collection::vec(arb_pauli(), 3),
        ) {
            let pa = PauliString { phase: Phase::ONE, factors: a };
            let pb = PauliString { phase: Phase::ONE, factors: b };
            let pc = PauliString { phase: Phase::ONE, factors: c };
            let left = multiply(&multiply(&pa, &pb).unwrap(), &pc).unwrap();
            let right = multiply(&pa, &multiply(&pb, &pc).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn qubitwise_commuting_strings_commute_densely(
            a in proptest::collection::vec(arb_pauli(), 3),
            b in proptest::collection::vec(arb_pauli(), 3),
        ) {
            let pa = PauliString { phase: Phase::ONE, factors: a };
            let pb = PauliString { phase: Phase::ONE, factors: b };
            if qubitwise_commutes(&pa, &pb) {
                let ab = multiply(&pa, &pb).unwrap();
                let ba = multiply(&pb, &pa).unwrap();
                prop_assert_eq!(ab, ba);
            }
        }

        #[test]
        fn text_round_trip_random(
            terms in proptest::collection::btree_map(
                proptest::collection::vec(arb_pauli(), 4),
                -10.0f64..10.0,
                1..6,
            )
        ) {
            let mut sum = PauliSum::new(4);
            for (factors, coeff) in &terms {
                sum.add_term(factors, *coeff).unwrap();
            }
            sum.simplify();
            if !sum.is_empty() {
                let back = PauliSum::from_text(&sum.to_text()).unwrap();
                prop_assert_eq!(sum, back);
            }
        }
    }
}
