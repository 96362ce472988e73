//! Brick-wall scheduling of pair-hopping gates on the ring, orbital tracking
//! through the swap network, and the measurement-circuit family that covers
//! every orbital pair on the cross couplers.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use crate::circuits::{Circuit, Gate, LadderLayout};
use crate::error::{Error, Result};

/// Which kind of orbital a register slot carries: the j-th occupied or the
/// j-th virtual one (j counts from the Fermi level outward by energy order).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OrbitalSlot {
    Occupied(usize),
    Virtual(usize),
}

impl OrbitalSlot {
    pub fn is_occupied(&self) -> bool {
        matches!(self, OrbitalSlot::Occupied(_))
    }
}

impl std::fmt::Display for OrbitalSlot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OrbitalSlot::Occupied(j) => write!(f, "occ{j}"),
            OrbitalSlot::Virtual(j) => write!(f, "virt{j}"),
        }
    }
}

fn check_even(n: usize) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::invalid(format!(
            "ring size must be even and at least 2, got {n}"
        )));
    }
    Ok(())
}

/// Qubit pairs touched by brick-wall layer `m` of cyclic variant `k`:
/// ((2t + (m+k)) mod N, (2t + 1 + (m+k)) mod N) for t < N/2.
pub fn layer_pairs(n: usize, m: usize, variant: usize) -> Vec<(usize, usize)> {
    let par = (m + variant) % 2;
    (0..n / 2)
        .map(|t| ((2 * t + par) % n, (2 * t + 1 + par) % n))
        .collect()
}

/// Initial orbital living at each qubit of variant `k`: the variant-0
/// pattern (virtuals on even qubits, occupieds on odd) rotated by k sites.
pub fn initial_orbitals(n: usize, variant: usize) -> Vec<OrbitalSlot> {
    (0..n)
        .map(|q| {
            let q0 = (q + n - variant % n) % n;
            if q0 % 2 == 0 {
                OrbitalSlot::Virtual(q0 / 2)
            } else {
                OrbitalSlot::Occupied((q0 - 1) / 2)
            }
        })
        .collect()
}

/// Computational-basis input for variant `k`: occupied slots read 1.
pub fn initial_bitstring(n: usize, variant: usize) -> usize {
    let mut b = 0usize;
    for (q, slot) in initial_orbitals(n, variant).iter().enumerate() {
        if slot.is_occupied() {
            b |= 1 << (n - 1 - q);
        }
    }
    b
}

/// Orbital positions after `n_layers` brick-wall layers, plus the orbital
/// pair each gate couples, layer by layer. Every GS gate swaps the labels it
/// touches.
pub struct OrbitalTrack {
    pub n: usize,
    pub variant: usize,
    /// couplings[m][t] = (slot at first qubit, slot at second) before gate t
    /// of layer m fires; the gate order matches `layer_pairs`.
    pub couplings: Vec<Vec<(OrbitalSlot, OrbitalSlot)>>,
    /// orbital at each qubit after the last layer
    pub final_orbitals: Vec<OrbitalSlot>,
}

pub fn track_orbitals(n: usize, n_layers: usize, variant: usize) -> Result<OrbitalTrack> {
    check_even(n)?;
    let mut orbs = initial_orbitals(n, variant);
    let mut couplings = Vec::with_capacity(n_layers);
    for m in 0..n_layers {
        let pairs = layer_pairs(n, m, variant);
        let mut layer = Vec::with_capacity(pairs.len());
        for &(a, b) in &pairs {
            layer.push((orbs[a], orbs[b]));
            orbs.swap(a, b);
        }
        couplings.push(layer);
    }
    Ok(OrbitalTrack {
        n,
        variant,
        couplings,
        final_orbitals: orbs,
    })
}

/// (occupied, virtual) index pair coupled by each gate of each layer.
/// Errors if any gate would couple two orbitals of the same kind, which the
/// brick-wall pattern never does.
pub fn schedule_coverage(n: usize, n_layers: usize) -> Result<Vec<Vec<(usize, usize)>>> {
    let track = track_orbitals(n, n_layers, 0)?;
    track
        .couplings
        .iter()
        .map(|layer| {
            layer
                .iter()
                .map(|&(a, b)| match (a, b) {
                    (OrbitalSlot::Occupied(o), OrbitalSlot::Virtual(v))
                    | (OrbitalSlot::Virtual(v), OrbitalSlot::Occupied(o)) => Ok((o, v)),
                    _ => Err(Error::numerical(format!(
                        "schedule coupled same-kind orbitals {a} and {b}"
                    ))),
                })
                .collect()
        })
        .collect()
}

/// Per-gate angles for the hop between occupied o and virtual v, independent
/// of where the schedule has routed them.
pub type PairAngles = BTreeMap<(usize, usize), f64>;

/// Layer-major parameter array (shape n_layers × N/2, one angle per gate of
/// the variant-0 circuit) → orbital-pair-keyed map. Layers past the first
/// N/2 reuse pairs, so the key gains the layer's own index only when needed:
/// here each (layer, pair) is distinct because angles are per-gate.
fn theta_by_pair(
    n: usize,
    n_layers: usize,
    theta: &[f64],
) -> Result<Vec<BTreeMap<(usize, usize), f64>>> {
    if theta.len() != n_layers * n / 2 {
        return Err(Error::dim(format!(
            "expected {} angles ({} layers x {} gates), got {}",
            n_layers * n / 2,
            n_layers,
            n / 2,
            theta.len()
        )));
    }
    let coverage = schedule_coverage(n, n_layers)?;
    let mut by_layer = Vec::with_capacity(n_layers);
    for (m, layer) in coverage.iter().enumerate() {
        let mut map = BTreeMap::new();
        for (t, &pair) in layer.iter().enumerate() {
            map.insert(pair, theta[m * (n / 2) + t]);
        }
        by_layer.push(map);
    }
    Ok(by_layer)
}

/// Brick-wall hop ansatz for N qubits: `n_layers` layers of GS gates with
/// angles given layer-major for the variant-0 gate order. Any cyclic variant
/// applies the same orbital-pair angles, so all variants compile to the same
/// unitary up to qubit relabeling.
pub fn build_upccd_variant(
    n: usize,
    n_layers: usize,
    theta: &[f64],
    variant: usize,
) -> Result<Circuit> {
    check_even(n)?;
    let by_pair = theta_by_pair(n, n_layers, theta)?;
    let track = track_orbitals(n, n_layers, variant)?;
    let mut circuit = Circuit::new(n);
    for m in 0..n_layers {
        let pairs = layer_pairs(n, m, variant);
        let mut gates = Vec::with_capacity(pairs.len());
        for (t, &(a, b)) in pairs.iter().enumerate() {
            let (sa, sb) = track.couplings[m][t];
            let key = match (sa, sb) {
                (OrbitalSlot::Occupied(o), OrbitalSlot::Virtual(v))
                | (OrbitalSlot::Virtual(v), OrbitalSlot::Occupied(o)) => (o, v),
                _ => unreachable!("checked by schedule_coverage"),
            };
            let theta = *by_pair[m]
                .get(&key)
                .ok_or_else(|| Error::numerical(format!("no angle for pair {key:?}")))?;
            gates.push(Gate::GS { a, b, theta });
        }
        circuit.push_layer(gates)?;
    }
    Ok(circuit)
}

/// Variant-0 ansatz; defaults to N/2 layers when `n_layers` is None.
pub fn build_upccd(n: usize, n_layers: Option<usize>, theta: &[f64]) -> Result<Circuit> {
    build_upccd_variant(n, n_layers.unwrap_or(n / 2), theta, 0)
}

/// One measurement circuit: a cyclic ansatz variant, an optional partial
/// SWAP layer, and the orbital content of each cross-coupler rung at
/// measurement time.
#[derive(Clone, Debug)]
pub struct MeasurementVariant {
    pub variant: usize,
    pub with_swap_layer: bool,
    /// SWAP gates inserted after the ansatz (second family only)
    pub swap_pairs: Vec<(usize, usize)>,
    /// cross couplers (c, N−1−c) with the orbitals they hold at readout
    pub cross_links: Vec<((usize, usize), (OrbitalSlot, OrbitalSlot))>,
    /// orbital at each qubit at readout
    pub orbital_of_qubit: Vec<OrbitalSlot>,
}

impl MeasurementVariant {
    /// GS(π/4) layer on the cross couplers, preceded by the SWAP layer when
    /// this is a second-family circuit. Appended to the ansatz by callers.
    pub fn suffix_circuit(&self, n: usize) -> Result<Circuit> {
        let mut c = Circuit::new(n);
        if self.with_swap_layer {
            let gates = self
                .swap_pairs
                .iter()
                .map(|&(a, b)| Gate::Swap { a, b })
                .collect();
            c.push_layer(gates)?;
        }
        let layout = LadderLayout::new(n)?;
        let gates = layout
            .cross_edges()
            .into_iter()
            .map(|(a, b)| Gate::GS { a, b, theta: FRAC_PI_4 })
            .collect();
        c.push_layer(gates)?;
        Ok(c)
    }

    /// Full circuit: ansatz variant + suffix.
    pub fn circuit(&self, n: usize, n_layers: usize, theta: &[f64]) -> Result<Circuit> {
        let mut c = build_upccd_variant(n, n_layers, theta, self.variant)?;
        c.extend(&self.suffix_circuit(n)?)?;
        Ok(c)
    }
}

/// The N measurement circuits for an N-qubit ring at the default depth
/// N/2: N/2 cyclic variants measuring occupied-virtual pairs on the cross
/// couplers, plus N/2 more with a partial SWAP layer that brings same-kind
/// pairs onto the couplers.
pub fn measurement_circuits(n: usize) -> Result<Vec<MeasurementVariant>> {
    check_even(n)?;
    let n_layers = n / 2;
    let layout = LadderLayout::new(n)?;
    let mut out = Vec::with_capacity(n);
    for family in 0..2 {
        for k in 0..n / 2 {
            let with_swap_layer = family == 1;
            let swap_pairs: Vec<(usize, usize)> = if with_swap_layer {
                (0..n / 4).map(|l| (2 * l + k % 2, 2 * l + k % 2 + 1)).collect()
            } else {
                Vec::new()
            };
            let track = track_orbitals(n, n_layers, k)?;
            let mut orbs = track.final_orbitals.clone();
            for &(a, b) in &swap_pairs {
                orbs.swap(a, b);
            }
            let cross_links = layout
                .cross_edges()
                .into_iter()
                .map(|(a, b)| ((a, b), (orbs[a], orbs[b])))
                .collect();
            out.push(MeasurementVariant {
                variant: k,
                with_swap_layer,
                swap_pairs,
                cross_links,
                orbital_of_qubit: orbs,
            });
        }
    }
    Ok(out)
}

/// All unordered orbital-slot pairs appearing on cross couplers across the
/// measurement family — used to verify complete two-body coverage.
pub fn measurement_coverage(n: usize) -> Result<BTreeMap<(OrbitalSlot, OrbitalSlot), usize>> {
    let mut seen: BTreeMap<(OrbitalSlot, OrbitalSlot), usize> = BTreeMap::new();
    for mv in measurement_circuits(n)? {
        for (_, (a, b)) in mv.cross_links {
            let key = if a <= b { (a, b) } else { (b, a) };
            *seen.entry(key).or_insert(0) += 1;
        }
    }
    Ok(seen)
}
