//! Pair-sector model Hamiltonians (pairing chains and seniority-zero
//! chemistry), the exact ground state in the fixed-pair-number sector, the
//! superfluid order parameter, and measurement groupings.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::circuits::echo::EvTarget;
use crate::circuits::schedule::OrbitalSlot;
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliSum};
use crate::simulator::{PureState, QuantumState, Symmetry};

/// Pairing chain with uniform level spacing and all-to-all pair hopping.
#[derive(Clone, Debug)]
pub struct RGSpec {
    pub n: usize,
    pub g: f64,
    /// level energies; default ε_p = p − (N+1)/2 for p = 1..N
    pub epsilons: Option<Vec<f64>>,
}

impl RGSpec {
    pub fn new(n: usize, g: f64) -> Self {
        RGSpec { n, g, epsilons: None }
    }

    pub fn level_energies(&self) -> Vec<f64> {
        match &self.epsilons {
            Some(e) => e.clone(),
            None => {
                let mu = (self.n as f64 + 1.0) / 2.0;
                (1..=self.n).map(|p| p as f64 - mu).collect()
            }
        }
    }
}

/// Seniority-zero chemistry coefficients over spatial orbitals: diagonal
/// one-body h_pp, pair Coulomb V_pqpq, pair exchange V_pqqp, and pair
/// hopping V_ppqq. The V_pqpq diagonal holds the intra-pair V_pppp.
#[derive(Clone, Debug, PartialEq)]
pub struct S0ChemSpec {
    pub n: usize,
    pub h: Vec<f64>,
    pub v_pqpq: Vec<f64>,
    pub v_pqqp: Vec<f64>,
    pub v_ppqq: Vec<f64>,
}

impl S0ChemSpec {
    pub fn zeros(n: usize) -> Self {
        S0ChemSpec {
            n,
            h: vec![0.0; n],
            v_pqpq: vec![0.0; n * n],
            v_pqqp: vec![0.0; n * n],
            v_ppqq: vec![0.0; n * n],
        }
    }

    fn tensors(&self) -> [(&'static str, &Vec<f64>); 3] {
        [
            ("Vpqpq", &self.v_pqpq),
            ("Vpqqp", &self.v_pqqp),
            ("Vppqq", &self.v_ppqq),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.len() != self.n {
            return Err(Error::dim("h length must equal norb"));
        }
        for (name, t) in self.tensors() {
            if t.len() != self.n * self.n {
                return Err(Error::dim(format!("{name} must be norb x norb")));
            }
            for p in 0..self.n {
                for q in 0..p {
                    let asym = (t[p * self.n + q] - t[q * self.n + p]).abs();
                    if asym > 1e-10 {
                        return Err(Error::invalid(format!(
                            "{name} asymmetric at ({p},{q}): |Δ| = {asym:e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Text format: `norb N`, then `h p v`, `Vpqpq p q v`, `Vpqqp p q v`,
    /// `Vppqq p q v` lines with 0-based indices; omitted entries are zero,
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<S0ChemSpec> {
        let mut spec: Option<S0ChemSpec> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let tag = parts.next().unwrap();
            let fields: Vec<&str> = parts.collect();
            let ctx = |msg: &str| Error::parse(format!("line {}: {msg}", lineno + 1));
            if tag == "norb" {
                let n: usize = fields
                    .first()
                    .ok_or_else(|| ctx("norb needs a value"))?
                    .parse()
                    .map_err(|_| ctx("bad norb value"))?;
                if n == 0 || n % 2 != 0 {
                    return Err(ctx("norb must be positive and even"));
                }
                spec = Some(S0ChemSpec::zeros(n));
                continue;
            }
            let spec_ref = spec.as_mut().ok_or_else(|| ctx("entry before norb"))?;
            let n = spec_ref.n;
            let parse_idx = |s: &str| -> Result<usize> {
                let v: usize = s.parse().map_err(|_| ctx("bad orbital index"))?;
                if v >= n {
                    return Err(ctx(&format!("orbital index {v} out of range")));
                }
                Ok(v)
            };
            match tag {
                "h" => {
                    if fields.len() != 2 {
                        return Err(ctx("h needs: p value"));
                    }
                    let p = parse_idx(fields[0])?;
                    spec_ref.h[p] = fields[1].parse().map_err(|_| ctx("bad h value"))?;
                }
                "Vpqpq" | "Vpqqp" | "Vppqq" => {
                    if fields.len() != 3 {
                        return Err(ctx(&format!("{tag} needs: p q value")));
                    }
                    let p = parse_idx(fields[0])?;
                    let q = parse_idx(fields[1])?;
                    let v: f64 = fields[2].parse().map_err(|_| ctx("bad tensor value"))?;
                    let t = match tag {
                        "Vpqpq" => &mut spec_ref.v_pqpq,
                        "Vpqqp" => &mut spec_ref.v_pqqp,
                        _ => &mut spec_ref.v_ppqq,
                    };
                    t[p * n + q] = v;
                    t[q * n + p] = v;
                }
                other => return Err(ctx(&format!("unknown entry '{other}'"))),
            }
        }
        let spec = spec.ok_or_else(|| Error::parse("missing norb header"))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Pairing chain → qubit operator: Σ_p ε_p(1−Z_p) + (g/2)Σ_{p<q}(XX+YY).
pub fn build_rg_hamiltonian(spec: &RGSpec) -> Result<PauliSum> {
    if spec.n < 2 || spec.n % 2 != 0 {
        return Err(Error::invalid("level count must be even and at least 2"));
    }
    let eps = spec.level_energies();
    if eps.len() != spec.n {
        return Err(Error::dim("level energies must match n"));
    }
    let mut h = PauliSum::new(spec.n);
    for (p, &e) in eps.iter().enumerate() {
        h.add_ops(&[], e)?;
        h.add_ops(&[(p, Pauli::Z)], -e)?;
    }
    for p in 0..spec.n {
        for q in (p + 1)..spec.n {
            h.add_ops(&[(p, Pauli::X), (q, Pauli::X)], spec.g / 2.0)?;
            h.add_ops(&[(p, Pauli::Y), (q, Pauli::Y)], spec.g / 2.0)?;
        }
    }
    Ok(h)
}

/// Seniority-zero chemistry → qubit operator with pair occupations
/// n_p = (1−Z_p)/2:
///   Σ_p (2h_pp + V_pppp) n_p
/// + Σ_{p<q} 2(2V_pqpq − V_pqqp) n_p n_q
/// + Σ_{p<q} V_ppqq (X_pX_q + Y_pY_q)/2.
pub fn build_s0_chemistry(spec: &S0ChemSpec) -> Result<PauliSum> {
    spec.validate()?;
    let n = spec.n;
    let mut h = PauliSum::new(n);
    for p in 0..n {
        let c = 2.0 * spec.h[p] + spec.v_pqpq[p * n + p];
        // n_p = (1−Z_p)/2
        h.add_ops(&[], c / 2.0)?;
        h.add_ops(&[(p, Pauli::Z)], -c / 2.0)?;
    }
    for p in 0..n {
        for q in (p + 1)..n {
            let c = 2.0 * (2.0 * spec.v_pqpq[p * n + q] - spec.v_pqqp[p * n + q]);
            // n_p n_q = (1 − Z_p − Z_q + Z_pZ_q)/4
            h.add_ops(&[], c / 4.0)?;
            h.add_ops(&[(p, Pauli::Z)], -c / 4.0)?;
            h.add_ops(&[(q, Pauli::Z)], -c / 4.0)?;
            h.add_ops(&[(p, Pauli::Z), (q, Pauli::Z)], c / 4.0)?;
            let w = spec.v_ppqq[p * n + q];
            h.add_ops(&[(p, Pauli::X), (q, Pauli::X)], w / 2.0)?;
            h.add_ops(&[(p, Pauli::Y), (q, Pauli::Y)], w / 2.0)?;
        }
    }
    Ok(h)
}

fn sector_indices(n: usize, weight: usize) -> Vec<usize> {
    (0..1usize << n)
        .filter(|b| (*b as u32).count_ones() as usize == weight)
        .collect()
}

/// Exact lowest eigenstate of a pair-sector Hamiltonian restricted to the
/// fixed-excitation subspace of the given weight. Dense diagonalization,
/// N ≤ 14. Terms that break pair-number conservation are rejected.
pub fn doci_ground_state(ham: &PauliSum, n_pairs: usize) -> Result<(f64, QuantumState)> {
    let n = ham.n_qubits();
    if n > 14 {
        return Err(Error::MemoryLimit { requested: n, allowed: 14 });
    }
    if n_pairs > n {
        return Err(Error::invalid("pair count exceeds register size"));
    }
    let basis = sector_indices(n, n_pairs);
    let dim = basis.len();
    let index_of: BTreeMap<usize, usize> = basis.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let mut m = DMatrix::<f64>::zeros(dim, dim);

    for (factors, coeff) in ham.iter() {
        let xs: Vec<usize> = factors
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Pauli::X))
            .map(|(q, _)| q)
            .collect();
        let ys: Vec<usize> = factors
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Pauli::Y))
            .map(|(q, _)| q)
            .collect();
        let zs: Vec<usize> = factors
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Pauli::Z))
            .map(|(q, _)| q)
            .collect();
        let bad = |label: &str| {
            Err(Error::numerical(format!(
                "term '{label}' breaks pair-number symmetry (|coeff| = {:e})",
                coeff.abs()
            )))
        };
        if xs.len() + ys.len() == 0 {
            // diagonal term
            let zmask: usize = zs.iter().map(|&q| 1usize << (n - 1 - q)).sum();
            for (i, &b) in basis.iter().enumerate() {
                let parity = (b & zmask).count_ones() % 2;
                let sign = if parity == 0 { 1.0 } else { -1.0 };
                m[(i, i)] += coeff * sign;
            }
        } else if xs.len() == 2 && ys.is_empty() && zs.is_empty()
            || ys.len() == 2 && xs.is_empty() && zs.is_empty()
        {
            if coeff.abs() <= 1e-10 {
                continue;
            }
            let pair = if xs.len() == 2 { &xs } else { &ys };
            let mask = (1usize << (n - 1 - pair[0])) | (1usize << (n - 1 - pair[1]));
            for (i, &b) in basis.iter().enumerate() {
                if (b & mask).count_ones() == 1 {
                    let b2 = b ^ mask;
                    let j = index_of[&b2];
                    // XX and YY have the same +1 element inside the sector
                    m[(j, i)] += coeff;
                }
            }
        } else if coeff.abs() > 1e-10 {
            let label: String = factors.iter().map(|p| p.to_char()).collect();
            return bad(&label);
        }
    }

    let eig = SymmetricEigen::new(m);
    let mut best = 0;
    for i in 1..dim {
        if eig.eigenvalues[i] < eig.eigenvalues[best] {
            best = i;
        }
    }
    let energy = eig.eigenvalues[best];
    let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << n];
    for (i, &b) in basis.iter().enumerate() {
        amps[b] = Complex64::new(eig.eigenvectors[(i, best)], 0.0);
    }
    let state = PureState::from_amplitudes(n, amps)?;
    Ok((energy, QuantumState::Pure(state)))
}

/// Pair occupations ⟨n_p⟩ = (1 − ⟨Z_p⟩)/2 of a state in the orbital frame.
pub fn occupations(state: &QuantumState) -> Result<Vec<f64>> {
    let n = state.n_qubits();
    let mut out = Vec::with_capacity(n);
    for p in 0..n {
        let mut z = PauliSum::new(n);
        z.add_ops(&[(p, Pauli::Z)], 1.0)?;
        out.push((1.0 - crate::pauli::expectation(state, &z)?) / 2.0);
    }
    Ok(out)
}

/// Superfluid order parameter Δ = (2/N) Σ_p √(n_p − n_p²). Occupations are
/// clipped to [0, 1] first; values outside [−0.05, 1.05] are rejected.
pub fn order_parameter(occupations: &[f64]) -> Result<f64> {
    if occupations.is_empty() {
        return Err(Error::Empty("occupations".into()));
    }
    let n = occupations.len() as f64;
    let mut acc = 0.0;
    for (p, &v) in occupations.iter().enumerate() {
        if !(-0.05..=1.05).contains(&v) {
            return Err(Error::invalid(format!(
                "occupation {v} at orbital {p} outside the tolerated window"
            )));
        }
        let c = v.clamp(0.0, 1.0);
        acc += (c - c * c).max(0.0).sqrt();
    }
    Ok(2.0 * acc / n)
}

/// ∂Δ/∂n_p of the clipped order parameter; errors when any occupation sits
/// at a boundary where the derivative diverges.
pub fn order_parameter_gradient(occupations: &[f64]) -> Result<Vec<f64>> {
    if occupations.is_empty() {
        return Err(Error::Empty("occupations".into()));
    }
    let n = occupations.len() as f64;
    occupations
        .iter()
        .enumerate()
        .map(|(p, &v)| {
            let c = v.clamp(0.0, 1.0);
            let s = c - c * c;
            if s < 1e-12 {
                return Err(Error::numerical(format!(
                    "order-parameter derivative diverges at orbital {p} (n = {v})"
                )));
            }
            Ok((1.0 - 2.0 * c) / (n * s.sqrt()))
        })
        .collect()
}

/// How the Hamiltonian's terms are grouped into simultaneously measurable
/// sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasurementScheme {
    /// one group per Pauli term
    Termwise,
    /// one computational group plus one circuit per cross-coupler variant
    XxPlusYy,
    /// one group per {Z_p, Z_pZ_q, D⁺_pq} operator, echo-compatible
    XxYyIzZi,
}

impl MeasurementScheme {
    pub fn label(&self) -> &'static str {
        match self {
            MeasurementScheme::Termwise => "termwise",
            MeasurementScheme::XxPlusYy => "xxplusyy",
            MeasurementScheme::XxYyIzZi => "xxyyizzi",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "termwise" => Ok(MeasurementScheme::Termwise),
            "xxplusyy" | "xx+yy" => Ok(MeasurementScheme::XxPlusYy),
            "xxyyizzi" => Ok(MeasurementScheme::XxYyIzZi),
            other => Err(Error::parse(format!("unknown measurement scheme '{other}'"))),
        }
    }
}

/// Circuit recipe attached to a measurement group.
#[derive(Clone, Debug, PartialEq)]
pub enum GroupKind {
    /// bare ansatz, computational readout
    Computational,
    /// ansatz variant with the cross-coupler suffix
    CrossLink { variant: usize, with_swap: bool },
    /// ansatz plus single-qubit basis rotations on the listed orbitals
    SingleBasis { x_orbitals: Vec<usize>, y_orbitals: Vec<usize> },
    /// one echo/distillation target
    PairOperator { target: EvTarget },
}

/// Observables measurable from one circuit, in the orbital frame, plus the
/// symmetry their readout respects.
#[derive(Clone, Debug)]
pub struct MeasurementGroup {
    pub label: String,
    pub observables: Vec<PauliSum>,
    pub kind: GroupKind,
    pub symmetry: Symmetry,
}

/// A model plus the register bookkeeping the circuit layer needs: which
/// orbital sits in which schedule slot (lowest-energy half occupied).
#[derive(Clone, Debug)]
pub struct ModelSystem {
    pub name: String,
    pub n: usize,
    pub hamiltonian: PauliSum,
    pub orbital_energies: Vec<f64>,
    slot_of_orbital: Vec<OrbitalSlot>,
}

impl ModelSystem {
    fn assemble(
        name: String,
        n: usize,
        hamiltonian: PauliSum,
        orbital_energies: Vec<f64>,
    ) -> Result<Self> {
        if n % 2 != 0 || n < 2 {
            return Err(Error::invalid("orbital count must be even and at least 2"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            orbital_energies[a]
                .partial_cmp(&orbital_energies[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut slot_of_orbital = vec![OrbitalSlot::Occupied(0); n];
        for (rank, &orb) in order.iter().enumerate() {
            slot_of_orbital[orb] = if rank < n / 2 {
                OrbitalSlot::Occupied(rank)
            } else {
                OrbitalSlot::Virtual(rank - n / 2)
            };
        }
        Ok(ModelSystem {
            name,
            n,
            hamiltonian,
            orbital_energies,
            slot_of_orbital,
        })
    }

    pub fn richardson_gaudin(spec: &RGSpec) -> Result<Self> {
        let ham = build_rg_hamiltonian(spec)?;
        Self::assemble(
            format!("rg-n{}-g{}", spec.n, spec.g),
            spec.n,
            ham,
            spec.level_energies(),
        )
    }

    pub fn seniority_zero(spec: &S0ChemSpec) -> Result<Self> {
        let ham = build_s0_chemistry(spec)?;
        Self::assemble(format!("s0-n{}", spec.n), spec.n, ham, spec.h.clone())
    }

    pub fn n_pairs(&self) -> usize {
        self.n / 2
    }

    pub fn slot_of_orbital(&self, p: usize) -> OrbitalSlot {
        self.slot_of_orbital[p]
    }

    pub fn orbital_of_slot(&self, slot: OrbitalSlot) -> usize {
        self.slot_of_orbital
            .iter()
            .position(|&s| s == slot)
            .expect("slot assignment is a bijection")
    }

    /// Hamiltonian re-indexed so orbital p's operators act on the qubit the
    /// schedule placed it at (given the readout-time orbital of each qubit).
    pub fn hamiltonian_on_layout(&self, orbital_of_qubit: &[OrbitalSlot]) -> Result<PauliSum> {
        let mut perm = vec![0usize; self.n];
        for (q, slot) in orbital_of_qubit.iter().enumerate() {
            perm[self.orbital_of_slot(*slot)] = q;
        }
        self.hamiltonian.permuted(&perm)
    }

    /// Pauli content of the Hamiltonian split by pattern: (Z orbitals,
    /// XX+YY pairs, ZZ pairs).
    fn term_patterns(&self) -> (BTreeSet<usize>, BTreeSet<(usize, usize)>, BTreeSet<(usize, usize)>) {
        let mut z = BTreeSet::new();
        let mut xy = BTreeSet::new();
        let mut zz = BTreeSet::new();
        for (factors, _) in self.hamiltonian.iter() {
            let nz: Vec<(usize, Pauli)> = factors
                .iter()
                .enumerate()
                .filter(|(_, p)| !matches!(p, Pauli::I))
                .map(|(q, &p)| (q, p))
                .collect();
            match nz.as_slice() {
                [] => {}
                [(q, Pauli::Z)] => {
                    z.insert(*q);
                }
                [(a, Pauli::Z), (b, Pauli::Z)] => {
                    zz.insert((*a, *b));
                }
                [(a, Pauli::X), (b, Pauli::X)] | [(a, Pauli::Y), (b, Pauli::Y)] => {
                    xy.insert((*a, *b));
                }
                _ => {}
            }
        }
        (z, xy, zz)
    }

    fn z_sum(&self, p: usize) -> Result<PauliSum> {
        let mut s = PauliSum::new(self.n);
        s.add_ops(&[(p, Pauli::Z)], 1.0)?;
        Ok(s)
    }

    fn zz_sum(&self, p: usize, q: usize) -> Result<PauliSum> {
        let mut s = PauliSum::new(self.n);
        s.add_ops(&[(p, Pauli::Z), (q, Pauli::Z)], 1.0)?;
        Ok(s)
    }

    fn d_sum(&self, p: usize, q: usize, sign: f64) -> Result<PauliSum> {
        let mut s = PauliSum::new(self.n);
        s.add_ops(&[(p, Pauli::Z)], 0.5)?;
        s.add_ops(&[(q, Pauli::Z)], 0.5)?;
        s.add_ops(&[(p, Pauli::X), (q, Pauli::X)], 0.5 * sign)?;
        s.add_ops(&[(p, Pauli::Y), (q, Pauli::Y)], 0.5 * sign)?;
        Ok(s)
    }

    /// Split the Hamiltonian into measurement groups under the given scheme.
    pub fn measurement_groups(&self, scheme: MeasurementScheme) -> Result<Vec<MeasurementGroup>> {
        let (z_orbs, xy_pairs, zz_pairs) = self.term_patterns();
        let mut groups = Vec::new();
        match scheme {
            MeasurementScheme::Termwise => {
                for &p in &z_orbs {
                    groups.push(MeasurementGroup {
                        label: format!("term-z{p}"),
                        observables: vec![self.z_sum(p)?],
                        kind: GroupKind::Computational,
                        symmetry: Symmetry::Number,
                    });
                }
                for &(p, q) in &zz_pairs {
                    groups.push(MeasurementGroup {
                        label: format!("term-zz{p}-{q}"),
                        observables: vec![self.zz_sum(p, q)?],
                        kind: GroupKind::Computational,
                        symmetry: Symmetry::Number,
                    });
                }
                for &(p, q) in &xy_pairs {
                    let mut xx = PauliSum::new(self.n);
                    xx.add_ops(&[(p, Pauli::X), (q, Pauli::X)], 1.0)?;
                    groups.push(MeasurementGroup {
                        label: format!("term-xx{p}-{q}"),
                        observables: vec![xx],
                        kind: GroupKind::SingleBasis {
                            x_orbitals: vec![p, q],
                            y_orbitals: vec![],
                        },
                        symmetry: Symmetry::None,
                    });
                    let mut yy = PauliSum::new(self.n);
                    yy.add_ops(&[(p, Pauli::Y), (q, Pauli::Y)], 1.0)?;
                    groups.push(MeasurementGroup {
                        label: format!("term-yy{p}-{q}"),
                        observables: vec![yy],
                        kind: GroupKind::SingleBasis {
                            x_orbitals: vec![],
                            y_orbitals: vec![p, q],
                        },
                        symmetry: Symmetry::None,
                    });
                }
            }
            MeasurementScheme::XxPlusYy => {
                let mut comp = Vec::new();
                for &p in &z_orbs {
                    comp.push(self.z_sum(p)?);
                }
                for &(p, q) in &zz_pairs {
                    comp.push(self.zz_sum(p, q)?);
                }
                groups.push(MeasurementGroup {
                    label: "computational".into(),
                    observables: comp,
                    kind: GroupKind::Computational,
                    symmetry: Symmetry::Number,
                });
                let variants = crate::circuits::schedule::measurement_circuits(self.n)?;
                for (i, mv) in variants.iter().enumerate() {
                    let mut obs = Vec::new();
                    for (_, (sa, sb)) in &mv.cross_links {
                        let p = self.orbital_of_slot(*sa);
                        let q = self.orbital_of_slot(*sb);
                        obs.push(self.d_sum(p, q, 1.0)?);
                        obs.push(self.d_sum(p, q, -1.0)?);
                        let key = if p < q { (p, q) } else { (q, p) };
                        if zz_pairs.contains(&key) {
                            obs.push(self.zz_sum(p, q)?);
                        }
                    }
                    groups.push(MeasurementGroup {
                        label: format!("crosslink-{i}"),
                        observables: obs,
                        kind: GroupKind::CrossLink {
                            variant: mv.variant,
                            with_swap: mv.with_swap_layer,
                        },
                        symmetry: Symmetry::Number,
                    });
                }
            }
            MeasurementScheme::XxYyIzZi => {
                for &p in &z_orbs {
                    groups.push(MeasurementGroup {
                        label: format!("op-z{p}"),
                        observables: vec![self.z_sum(p)?],
                        kind: GroupKind::PairOperator {
                            target: EvTarget::Z(self.slot_of_orbital(p)),
                        },
                        symmetry: Symmetry::Number,
                    });
                }
                for &(p, q) in &xy_pairs {
                    groups.push(MeasurementGroup {
                        label: format!("op-dplus{p}-{q}"),
                        observables: vec![self.d_sum(p, q, 1.0)?],
                        kind: GroupKind::PairOperator {
                            target: EvTarget::DPlus(
                                self.slot_of_orbital(p),
                                self.slot_of_orbital(q),
                            ),
                        },
                        symmetry: Symmetry::Number,
                    });
                }
                for &(p, q) in &zz_pairs {
                    groups.push(MeasurementGroup {
                        label: format!("op-zz{p}-{q}"),
                        observables: vec![self.zz_sum(p, q)?],
                        kind: GroupKind::PairOperator {
                            target: EvTarget::ZZ(
                                self.slot_of_orbital(p),
                                self.slot_of_orbital(q),
                            ),
                        },
                        symmetry: Symmetry::Parity,
                    });
                }
            }
        }
        Ok(groups)
    }
}
