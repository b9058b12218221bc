//! Spin-chain Hamiltonians and their Trotterized gate schedules: the
//! random-field XXZ chain, an optional disordered quantum Ising chain, and
//! the four-copy lift onto the 16-dimensional per-site operator space.
//!
//! All chains are open-boundary. On-site fields are absorbed into bond
//! terms, half-and-half on interior sites and with full weight at the two
//! chain ends, so the bond terms sum exactly to the full Hamiltonian.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::Rng;
use thiserror::Error;

use crate::linalg::{embed_two_qubit, expm_minus_i_herm, kron};
use crate::mps::TwoSiteGate;
use crate::pauli::PauliAxis;
use crate::seeding;

#[derive(Debug, Error)]
pub enum HamiltonianError {
    #[error("chain needs at least 2 sites, got {0}")]
    TooFewSites(usize),
    #[error("disorder half-width must be nonnegative, got {0}")]
    NegativeDisorder(f64),
    #[error("expected {expected} field values, got {got}")]
    FieldCount { expected: usize, got: usize },
    #[error("Trotter step must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error("expected single-copy qubit terms (physical dimension 2), got {0}")]
    NotQubitTerms(usize),
    #[error("linear-algebra backend: {0}")]
    Backend(String),
}

/// Random-field XXZ chain parameters.
///
/// `J` multiplies XX + YY + Δ·ZZ on every bond; on-site fields are drawn
/// uniformly from `[-W, W]` with the given seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XxzParams {
    pub n: usize,
    pub j: f64,
    pub delta: f64,
    pub w: f64,
    pub seed: u64,
}

impl XxzParams {
    pub fn validate(&self) -> Result<(), HamiltonianError> {
        if self.n < 2 {
            return Err(HamiltonianError::TooFewSites(self.n));
        }
        if self.w < 0.0 {
            return Err(HamiltonianError::NegativeDisorder(self.w));
        }
        Ok(())
    }
}

/// Disordered quantum Ising chain: nearest-neighbor ZZ couplings drawn
/// uniformly from `[J - δJ, J + δJ]` plus transverse X fields.
#[derive(Clone, Debug, PartialEq)]
pub struct DqimParams {
    pub n: usize,
    pub j: f64,
    pub delta_j: f64,
    pub transverse_fields: Vec<f64>,
    pub seed: u64,
}

impl DqimParams {
    pub fn with_uniform_field(
        n: usize,
        j: f64,
        delta_j: f64,
        h: f64,
        seed: u64,
    ) -> Self {
        Self { n, j, delta_j, transverse_fields: vec![h; n], seed }
    }

    pub fn validate(&self) -> Result<(), HamiltonianError> {
        if self.n < 2 {
            return Err(HamiltonianError::TooFewSites(self.n));
        }
        if self.delta_j < 0.0 {
            return Err(HamiltonianError::NegativeDisorder(self.delta_j));
        }
        if self.transverse_fields.len() != self.n {
            return Err(HamiltonianError::FieldCount {
                expected: self.n,
                got: self.transverse_fields.len(),
            });
        }
        Ok(())
    }
}

/// One Hermitian two-site term on `(bond, bond + 1)`, of shape `d² × d²`.
#[derive(Clone, Debug)]
pub struct BondTerm {
    pub bond: usize,
    pub matrix: Array2<C64>,
}

/// A Hamiltonian decomposed into nearest-neighbor bond terms.
#[derive(Clone, Debug)]
pub struct BondTerms {
    pub n_sites: usize,
    pub phys_dim: usize,
    pub terms: Vec<BondTerm>,
}

/// Sign of the exponent in the evolution gates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeDirection {
    /// `exp(-i h τ)`, ordinary Schrödinger evolution.
    Forward,
    /// `exp(+i h τ)`, the reversed phase used by the doubled-space overlap
    /// and by snapshot back-evolution.
    Reversed,
}

/// Gates for one second-order Trotter step of duration `tau`:
/// even bonds at τ/2, odd bonds at τ, even bonds at τ/2, each sweep in
/// ascending bond order.
#[derive(Clone, Debug)]
pub struct TrotterStep {
    pub n_sites: usize,
    pub phys_dim: usize,
    pub tau: f64,
    pub direction: TimeDirection,
    pub gates: Vec<TwoSiteGate>,
}

/// Truncation summary of one full Trotter step.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepReport {
    /// Sum of relative discarded weights over all gates in the step.
    pub discarded_weight: f64,
    /// Largest bond dimension after the step.
    pub max_bond_dim: usize,
}

impl TrotterStep {
    /// Apply every gate of this step to the state, in order.
    pub fn apply(
        &self,
        mps: &mut crate::mps::Mps,
        policy: &crate::mps::TruncationPolicy,
    ) -> Result<StepReport, crate::mps::MpsError> {
        let mut report = StepReport::default();
        for gate in &self.gates {
            let r = mps.apply_two_site_gate(gate, policy)?;
            report.discarded_weight += r.discarded_weight;
        }
        report.max_bond_dim = mps.max_bond_dim();
        Ok(report)
    }
}

/// Draw the on-site fields `h_i` uniform in `[-W, W]`, deterministically in
/// the seed.
pub fn sample_disorder(params: &XxzParams) -> Result<Vec<f64>, HamiltonianError> {
    params.validate()?;
    let mut rng = seeding::stream_rng(params.seed, seeding::DISORDER_STREAM);
    Ok((0..params.n)
        .map(|_| (2.0 * rng.gen::<f64>() - 1.0) * params.w)
        .collect())
}

fn pauli_m(axis: PauliAxis) -> Array2<C64> {
    axis.matrix()
}

fn eye2() -> Array2<C64> {
    Array2::eye(2)
}

/// Weight of site `i`'s field on the bond to its left/right under the
/// half-and-half interior split with full weight at the chain ends.
fn field_split(site: usize, n: usize) -> f64 {
    if site == 0 || site == n - 1 {
        1.0
    } else {
        0.5
    }
}

/// Bond terms of `J Σ (XX + YY + Δ ZZ) + Σ hᵢ Zᵢ`.
pub fn build_xxz_bonds(params: &XxzParams, fields: &[f64]) -> Result<BondTerms, HamiltonianError> {
    params.validate()?;
    if fields.len() != params.n {
        return Err(HamiltonianError::FieldCount { expected: params.n, got: fields.len() });
    }
    let n = params.n;
    let xx = kron(&pauli_m(PauliAxis::X), &pauli_m(PauliAxis::X));
    let yy = kron(&pauli_m(PauliAxis::Y), &pauli_m(PauliAxis::Y));
    let zz = kron(&pauli_m(PauliAxis::Z), &pauli_m(PauliAxis::Z));
    let zi = kron(&pauli_m(PauliAxis::Z), &eye2());
    let iz = kron(&eye2(), &pauli_m(PauliAxis::Z));
    let terms = (0..n - 1)
        .map(|bond| {
            let exchange = (&xx + &yy + &zz.mapv(|v| v * C64::from(params.delta)))
                .mapv(|v| v * C64::from(params.j));
            let left = fields[bond] * field_split(bond, n);
            let right = fields[bond + 1] * field_split(bond + 1, n);
            let matrix =
                exchange + zi.mapv(|v| v * C64::from(left)) + iz.mapv(|v| v * C64::from(right));
            BondTerm { bond, matrix }
        })
        .collect();
    Ok(BondTerms { n_sites: n, phys_dim: 2, terms })
}

/// Bond terms of `Σ J_b Z_b Z_{b+1} + Σ hᵢ Xᵢ` with couplings drawn uniform
/// in `[J - δJ, J + δJ]`.
pub fn build_dqim_bonds(params: &DqimParams) -> Result<BondTerms, HamiltonianError> {
    params.validate()?;
    let n = params.n;
    let mut rng = seeding::stream_rng(params.seed, seeding::DISORDER_STREAM);
    let zz = kron(&pauli_m(PauliAxis::Z), &pauli_m(PauliAxis::Z));
    let xi = kron(&pauli_m(PauliAxis::X), &eye2());
    let ix = kron(&eye2(), &pauli_m(PauliAxis::X));
    let terms = (0..n - 1)
        .map(|bond| {
            let coupling = params.j + (2.0 * rng.gen::<f64>() - 1.0) * params.delta_j;
            let left = params.transverse_fields[bond] * field_split(bond, n);
            let right = params.transverse_fields[bond + 1] * field_split(bond + 1, n);
            let matrix = zz.mapv(|v| v * C64::from(coupling))
                + xi.mapv(|v| v * C64::from(left))
                + ix.mapv(|v| v * C64::from(right));
            BondTerm { bond, matrix }
        })
        .collect();
    Ok(BondTerms { n_sites: n, phys_dim: 2, terms })
}

/// Sum duplicate bond entries into one matrix per bond.
fn merged_bond_matrices(terms: &BondTerms) -> Vec<Option<Array2<C64>>> {
    let mut merged: Vec<Option<Array2<C64>>> = vec![None; terms.n_sites.saturating_sub(1)];
    for term in &terms.terms {
        match &mut merged[term.bond] {
            Some(m) => *m = &*m + &term.matrix,
            slot @ None => *slot = Some(term.matrix.clone()),
        }
    }
    merged
}

/// Second-order Trotter gates for one step of duration `tau`.
pub fn trotterize(
    terms: &BondTerms,
    tau: f64,
    direction: TimeDirection,
) -> Result<TrotterStep, HamiltonianError> {
    if tau <= 0.0 {
        return Err(HamiltonianError::NonPositiveTau(tau));
    }
    let signed = match direction {
        TimeDirection::Forward => 1.0,
        TimeDirection::Reversed => -1.0,
    };
    let merged = merged_bond_matrices(terms);
    let mut gate_for = |bond: usize, dt: f64| -> Result<Option<TwoSiteGate>, HamiltonianError> {
        match &merged[bond] {
            None => Ok(None),
            Some(h) => {
                let matrix = expm_minus_i_herm(h, signed * dt)
                    .map_err(|e| HamiltonianError::Backend(e.to_string()))?;
                Ok(Some(TwoSiteGate { bond, matrix }))
            }
        }
    };
    let mut gates = Vec::new();
    let n_bonds = terms.n_sites - 1;
    for bond in (0..n_bonds).step_by(2) {
        if let Some(g) = gate_for(bond, tau / 2.0)? {
            gates.push(g);
        }
    }
    for bond in (1..n_bonds).step_by(2) {
        if let Some(g) = gate_for(bond, tau)? {
            gates.push(g);
        }
    }
    for bond in (0..n_bonds).step_by(2) {
        if let Some(g) = gate_for(bond, tau / 2.0)? {
            gates.push(g);
        }
    }
    Ok(TrotterStep {
        n_sites: terms.n_sites,
        phys_dim: terms.phys_dim,
        tau,
        direction,
        gates,
    })
}

/// Lift single-copy bond terms to the doubled operator space:
/// `h ↦ h⊗1⊗1⊗1 − 1⊗hᵀ⊗1⊗1 + 1⊗1⊗h⊗1 − 1⊗1⊗1⊗hᵀ`, with the four copies
/// interleaved per site so every chain site carries one 16-dimensional space.
///
/// Within a site the four qubit factors order as (ket₁, bra₁, ket₂, bra₂),
/// most significant first; a two-site lifted term therefore acts on eight
/// qubit factors, with copy `c` occupying positions `c` and `c + 4`.
pub fn build_doubled_bonds(terms: &BondTerms) -> Result<BondTerms, HamiltonianError> {
    if terms.phys_dim != 2 {
        return Err(HamiltonianError::NotQubitTerms(terms.phys_dim));
    }
    let lifted = terms
        .terms
        .iter()
        .map(|term| {
            let h = &term.matrix;
            let ht = h.t().to_owned();
            let mut m = embed_two_qubit(h, 0, 4, 8);
            m = m - embed_two_qubit(&ht, 1, 5, 8);
            m = m + embed_two_qubit(h, 2, 6, 8);
            m = m - embed_two_qubit(&ht, 3, 7, 8);
            BondTerm { bond: term.bond, matrix: m }
        })
        .collect();
    Ok(BondTerms { n_sites: terms.n_sites, phys_dim: 16, terms: lifted })
}

/// Dense sum of the embedded bond terms (for cross-checks at small sizes).
pub fn dense_from_bond_terms(terms: &BondTerms) -> Array2<C64> {
    let d = terms.phys_dim;
    let dim = d.pow(terms.n_sites as u32);
    let mut h = Array2::zeros((dim, dim));
    for term in &terms.terms {
        let left = d.pow(term.bond as u32);
        let right = d.pow((terms.n_sites - term.bond - 2) as u32);
        let eye_l = Array2::eye(left);
        let eye_r = Array2::eye(right);
        h = h + kron(&kron(&eye_l, &term.matrix), &eye_r);
    }
    h
}

/// The per-site all-identity vector of the doubled space, `|I⟩⟩ ⊗ |I⟩⟩`.
pub fn doubled_identity_site_vector() -> Array1<C64> {
    let v = crate::shadow_norm::vectorized_pauli(None);
    crate::linalg::kron_vec(&v, &v)
}
