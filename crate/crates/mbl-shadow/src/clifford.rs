//! The 24-element single-qubit Clifford group, enumerated as matrices plus
//! exact signed-Pauli conjugation tables.
//!
//! Sampling a gate uniformly from this group reproduces single-qubit Haar
//! moments up to the third order, which is all the snapshot estimator needs.

use ndarray::{array, Array2};
use num_complex::Complex64 as C64;
use once_cell::sync::Lazy;
use rand::Rng;

use crate::linalg::dagger;
use crate::pauli::{PauliAxis, PauliString};

/// Image of one Pauli axis under conjugation: `g P g† = sign · image`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignedAxis {
    pub axis: PauliAxis,
    pub sign: i8,
}

/// One single-qubit Clifford element.
#[derive(Clone, Debug)]
pub struct CliffordGate {
    /// Stable index in [0, 24); the identity is index 0.
    pub index: usize,
    /// A unitary representative (global phase is arbitrary).
    pub matrix: Array2<C64>,
    /// Conjugation images of X, Y, Z in that order.
    pub action: [SignedAxis; 3],
}

impl CliffordGate {
    pub fn image(&self, axis: PauliAxis) -> SignedAxis {
        self.action[axis_slot(axis)]
    }
}

fn axis_slot(axis: PauliAxis) -> usize {
    match axis {
        PauliAxis::X => 0,
        PauliAxis::Y => 1,
        PauliAxis::Z => 2,
    }
}

/// Numerically classify `g P g†` as a signed Pauli; panics if it is not one.
fn conjugation_image(g: &Array2<C64>, axis: PauliAxis) -> SignedAxis {
    let m = g.dot(&axis.matrix()).dot(&dagger(g));
    for out in PauliAxis::ALL {
        // tr(Q m) / 2 = ±1 exactly when m = ±Q
        let q = out.matrix();
        let tr: C64 = q.dot(&m).diag().sum();
        let coeff = tr / C64::new(2.0, 0.0);
        if (coeff.re - 1.0).abs() < 1e-9 && coeff.im.abs() < 1e-9 {
            return SignedAxis { axis: out, sign: 1 };
        }
        if (coeff.re + 1.0).abs() < 1e-9 && coeff.im.abs() < 1e-9 {
            return SignedAxis { axis: out, sign: -1 };
        }
    }
    panic!("matrix does not conjugate Paulis to signed Paulis");
}

fn action_of(g: &Array2<C64>) -> [SignedAxis; 3] {
    [
        conjugation_image(g, PauliAxis::X),
        conjugation_image(g, PauliAxis::Y),
        conjugation_image(g, PauliAxis::Z),
    ]
}

/// Action-table key: images of X and Z determine a Clifford mod phase.
fn action_key(action: &[SignedAxis; 3]) -> (usize, i8, usize, i8) {
    (
        axis_slot(action[0].axis),
        action[0].sign,
        axis_slot(action[2].axis),
        action[2].sign,
    )
}

fn compose(outer: &[SignedAxis; 3], inner: &[SignedAxis; 3]) -> [SignedAxis; 3] {
    // (g2 g1) P (g2 g1)† = g2 (g1 P g1†) g2†
    let mut out = *inner;
    for slot in 0..3 {
        let first = inner[slot];
        let second = outer[axis_slot(first.axis)];
        out[slot] = SignedAxis { axis: second.axis, sign: first.sign * second.sign };
    }
    out
}

struct CliffordTables {
    gates: Vec<CliffordGate>,
    inverse: Vec<usize>,
}

static TABLES: Lazy<CliffordTables> = Lazy::new(|| {
    let s2 = C64::from(1.0 / 2.0_f64.sqrt());
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let hadamard: Array2<C64> = array![[s2, s2], [s2, -s2]];
    let phase: Array2<C64> = array![[one, zero], [zero, i]];

    // breadth-first closure of {H, S} starting from the identity
    let mut gates: Vec<CliffordGate> = Vec::with_capacity(24);
    let mut seen = std::collections::BTreeSet::new();
    let identity: Array2<C64> = Array2::eye(2);
    let id_action = action_of(&identity);
    seen.insert(action_key(&id_action));
    gates.push(CliffordGate { index: 0, matrix: identity, action: id_action });
    let mut cursor = 0;
    while cursor < gates.len() {
        let current = gates[cursor].matrix.clone();
        for generator in [&hadamard, &phase] {
            let candidate = generator.dot(&current);
            let action = action_of(&candidate);
            if seen.insert(action_key(&action)) {
                let index = gates.len();
                gates.push(CliffordGate { index, matrix: candidate, action });
            }
        }
        cursor += 1;
    }
    assert_eq!(gates.len(), 24, "single-qubit Clifford group has 24 phase classes");

    let inverse = (0..24)
        .map(|idx| {
            let act = &gates[idx].action;
            (0..24)
                .find(|&j| compose(&gates[j].action, act) == gates[0].action)
                .expect("every Clifford has an inverse in the table")
        })
        .collect();
    CliffordTables { gates, inverse }
});

/// All 24 single-qubit Clifford gates; the identity is element 0.
pub fn enumerate_cliffords() -> &'static [CliffordGate] {
    &TABLES.gates
}

/// Index of the group inverse of element `index`.
pub fn inverse_index(index: usize) -> usize {
    TABLES.inverse[index]
}

/// Draw one uniform Clifford index per site.
pub fn sample_layer(n: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..n).map(|_| rng.gen_range(0..24u8)).collect()
}

/// Conjugate a Pauli string site-locally by a layer of Clifford gates:
/// `P ↦ (⊗ᵢ gᵢ) P (⊗ᵢ gᵢ)†`, exact signs included.
pub fn conjugate_pauli_by_clifford_layer(p: &PauliString, layer: &[u8]) -> PauliString {
    let gates = enumerate_cliffords();
    let mut out = PauliString::identity().with_sign(p.sign());
    for (site, axis) in p.iter() {
        let image = gates[layer[site] as usize].image(axis);
        out.set_axis(site, image.axis);
        if image.sign < 0 {
            out.flip_sign();
        }
    }
    out
}
