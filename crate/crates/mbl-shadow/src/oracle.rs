//! Dense state-vector and operator brute force at small sizes: exact
//! eigenvalues λ_O of the measurement channel, exact Pauli weight
//! distributions, and an exact snapshot pipeline. Everything here is the
//! ground truth the tensor-network paths are checked against, so none of it
//! may share code with those paths beyond basic dense algebra.

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use rand::Rng;
use thiserror::Error;

use crate::clifford::{conjugate_pauli_by_clifford_layer, enumerate_cliffords, inverse_index, sample_layer};
use crate::hamiltonian::BondTerms;
use crate::linalg::{dagger, embed_two_qubit};
use crate::mps::Mps;
use crate::pauli::{PauliAxis, PauliString};

/// Hard cap on dense qubit registers.
pub const MAX_DENSE_QUBITS: usize = 10;
/// Hard cap on any dense Hilbert-space dimension (covers the 16-dim local
/// space at very small site counts).
pub const MAX_DENSE_DIM: usize = 4096;
/// Largest region enumerated exhaustively: 3^6 = 729 Pauli strings.
pub const MAX_ENUMERATED_REGION: usize = 6;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dense representation too large: dimension {dim} exceeds {max}")]
    TooLarge { dim: usize, max: usize },
    #[error("dense qubit register too large: {n} sites exceeds {max}")]
    TooManyQubits { n: usize, max: usize },
    #[error("region of {k} sites exceeds the enumeration cap {max}; use sampling")]
    EnumerationTooLarge { k: usize, max: usize },
    #[error("operator is zero")]
    ZeroOperator,
    #[error("region site {site} out of range for {n} sites")]
    RegionOutOfRange { site: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("linear-algebra backend: {0}")]
    Backend(String),
}

/// Dense matrix on an `n`-qubit register (site 0 = most significant bit).
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub n_sites: usize,
    pub matrix: Array2<C64>,
}

impl DenseOperator {
    pub fn new(n_sites: usize, matrix: Array2<C64>) -> Result<Self, OracleError> {
        if n_sites > MAX_DENSE_QUBITS {
            return Err(OracleError::TooManyQubits { n: n_sites, max: MAX_DENSE_QUBITS });
        }
        let dim = 1usize << n_sites;
        if matrix.dim() != (dim, dim) {
            return Err(OracleError::Shape(format!(
                "expected {dim}×{dim}, got {:?}",
                matrix.dim()
            )));
        }
        Ok(Self { n_sites, matrix })
    }
}

/// Contract a tensor train into a dense amplitude vector, scale included.
pub fn dense_vector(mps: &Mps) -> Result<Array1<C64>, OracleError> {
    let d = mps.phys_dim();
    let n = mps.n_sites();
    let dim = d.checked_pow(n as u32).filter(|&x| x <= MAX_DENSE_DIM).ok_or(
        OracleError::TooLarge { dim: usize::MAX, max: MAX_DENSE_DIM },
    )?;
    // row-major amplitude block of shape (dim_so_far, right_bond)
    let mut block: Array2<C64> = Array2::ones((1, 1));
    for i in 0..n {
        let t = mps.tensor(i);
        let (l, _, r) = t.dim();
        let flat = t
            .view()
            .into_shape_with_order((l, d * r))
            .map_err(|e| OracleError::Backend(e.to_string()))?
            .as_standard_layout()
            .to_owned();
        block = block
            .dot(&flat)
            .into_shape_with_order((block.dim().0 * d, r))
            .map_err(|e| OracleError::Backend(e.to_string()))?;
    }
    let scale = C64::from(mps.log_scale().exp());
    let vec = block.index_axis(Axis(1), 0).to_owned().mapv(|z| z * scale);
    debug_assert_eq!(vec.len(), dim);
    Ok(vec)
}

/// Assemble the dense Hamiltonian from nearest-neighbor bond terms.
pub fn dense_hamiltonian(terms: &BondTerms) -> Result<DenseOperator, OracleError> {
    if terms.phys_dim != 2 {
        return Err(OracleError::Shape(format!(
            "dense_hamiltonian expects qubit terms, got physical dimension {}",
            terms.phys_dim
        )));
    }
    let n = terms.n_sites;
    if n > MAX_DENSE_QUBITS {
        return Err(OracleError::TooManyQubits { n, max: MAX_DENSE_QUBITS });
    }
    let dim = 1usize << n;
    let mut h = Array2::zeros((dim, dim));
    for term in &terms.terms {
        h = h + embed_two_qubit(&term.matrix, term.bond, term.bond + 1, n);
    }
    DenseOperator::new(n, h)
}

/// Dense matrix of a signed Pauli string.
pub fn dense_pauli(p: &PauliString, n: usize) -> Result<DenseOperator, OracleError> {
    if let Some(max) = p.max_site() {
        if max >= n {
            return Err(OracleError::RegionOutOfRange { site: max, n });
        }
    }
    let dim = 1usize << n;
    let mut m = Array2::eye(dim);
    for (site, axis) in p.iter() {
        m = crate::linalg::embed_one_qubit(&axis.matrix(), site, n).dot(&m);
    }
    if p.sign() < 0 {
        m.mapv_inplace(|z| -z);
    }
    DenseOperator::new(n, m)
}

/// Eigendecomposition of a Hermitian Hamiltonian, cached for repeated
/// evolutions at different times.
pub struct HamiltonianEigen {
    pub n_sites: usize,
    evals: Array1<f64>,
    evecs: Array2<C64>,
}

impl HamiltonianEigen {
    pub fn new(h: &DenseOperator) -> Result<Self, OracleError> {
        let (evals, evecs) = h
            .matrix
            .eigh(UPLO::Lower)
            .map_err(|e| OracleError::Backend(e.to_string()))?;
        Ok(Self { n_sites: h.n_sites, evals, evecs })
    }

    /// Dense evolution operator `exp(-i H t)`.
    pub fn evolution(&self, t: f64) -> Array2<C64> {
        let mut scaled = self.evecs.clone();
        for (mut col, &v) in scaled.columns_mut().into_iter().zip(self.evals.iter()) {
            let ph = C64::from_polar(1.0, -v * t);
            col.mapv_inplace(|z| z * ph);
        }
        scaled.dot(&dagger(&self.evecs))
    }

    /// `exp(-i H t) |ψ⟩` without forming the dense evolution operator.
    pub fn evolve_state(&self, psi: &Array1<C64>, t: f64) -> Array1<C64> {
        let mut in_basis = dagger(&self.evecs).dot(psi);
        for (z, &v) in in_basis.iter_mut().zip(self.evals.iter()) {
            *z *= C64::from_polar(1.0, -v * t);
        }
        self.evecs.dot(&in_basis)
    }

    /// Heisenberg evolution `O(t) = exp(+i H t) O exp(-i H t)`.
    pub fn heisenberg_evolve(&self, o: &Array2<C64>, t: f64) -> Array2<C64> {
        let u = self.evolution(t);
        // e^{iHt} O e^{-iHt} = u† O u with u = e^{-iHt}
        dagger(&u).dot(o).dot(&u)
    }
}

/// One-shot wrapper over [`HamiltonianEigen::heisenberg_evolve`].
pub fn heisenberg_evolve(
    h: &DenseOperator,
    o: &DenseOperator,
    t: f64,
) -> Result<DenseOperator, OracleError> {
    if h.n_sites != o.n_sites {
        return Err(OracleError::Shape(format!(
            "operator on {} sites, Hamiltonian on {}",
            o.n_sites, h.n_sites
        )));
    }
    let eig = HamiltonianEigen::new(h)?;
    DenseOperator::new(o.n_sites, eig.heisenberg_evolve(&o.matrix, t))
}

/// Operator size distribution: `P(n)` is the squared Pauli-coefficient weight
/// of strings with exactly `n` non-identity sites, normalized to Σ P(n) = 1.
#[derive(Clone, Debug)]
pub struct PauliWeightDistribution {
    pub p: Vec<f64>,
}

impl PauliWeightDistribution {
    /// The channel eigenvalue Σ_n P(n) 3^{-n}.
    pub fn lambda(&self) -> f64 {
        self.p
            .iter()
            .enumerate()
            .map(|(n, &w)| w / 3.0_f64.powi(n as i32))
            .sum()
    }
}

/// Expand a dense operator in the Pauli basis and histogram squared
/// coefficients by string weight.
pub fn pauli_weight_distribution(
    o: &DenseOperator,
) -> Result<PauliWeightDistribution, OracleError> {
    let n = o.n_sites;
    let dim = 1usize << n;
    // coeff[idx]: base-4 digits, one per site (site 0 most significant);
    // digit = row_bit * 2 + col_bit initially, transformed site-by-site into
    // the Pauli index (0=I, 1=X, 2=Y, 3=Z).
    let mut coeff: Vec<C64> = vec![C64::new(0.0, 0.0); dim * dim];
    for row in 0..dim {
        for col in 0..dim {
            let mut idx = 0usize;
            for site in 0..n {
                let rb = (row >> (n - 1 - site)) & 1;
                let cb = (col >> (n - 1 - site)) & 1;
                idx = idx * 4 + (rb * 2 + cb);
            }
            coeff[idx] = o.matrix[[row, col]];
        }
    }
    // per-site map from (row_bit, col_bit) amplitudes to tr(P† A)/2
    let half = C64::from(0.5);
    let ih = C64::new(0.0, 0.5);
    for site in 0..n {
        let stride = 4usize.pow((n - 1 - site) as u32);
        let block = stride * 4;
        let mut base = 0usize;
        while base < coeff.len() {
            for off in 0..stride {
                let i00 = base + off;
                let i01 = base + stride + off;
                let i10 = base + 2 * stride + off;
                let i11 = base + 3 * stride + off;
                let (a00, a01, a10, a11) = (coeff[i00], coeff[i01], coeff[i10], coeff[i11]);
                coeff[i00] = half * (a00 + a11); // I
                coeff[i01] = half * (a01 + a10); // X
                coeff[i10] = ih * (a01 - a10); // Y
                coeff[i11] = half * (a00 - a11); // Z
            }
            base += block;
        }
    }
    let mut hist = vec![0.0_f64; n + 1];
    for (idx, c) in coeff.iter().enumerate() {
        let w = c.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let mut weight = 0usize;
        let mut rest = idx;
        for _ in 0..n {
            if rest % 4 != 0 {
                weight += 1;
            }
            rest /= 4;
        }
        hist[weight] += w;
    }
    let total: f64 = hist.iter().sum();
    if total <= 0.0 {
        return Err(OracleError::ZeroOperator);
    }
    for w in hist.iter_mut() {
        *w /= total;
    }
    Ok(PauliWeightDistribution { p: hist })
}

/// How `lambda_exact` averages over the Pauli strings on a region.
#[derive(Clone, Copy, Debug)]
pub enum LambdaMode {
    /// All 3^k strings, exact; capped at k ≤ 6.
    Enumerate,
    /// Uniformly sampled strings (for larger regions).
    Sample { draws: usize, seed: u64 },
}

/// Channel eigenvalue λ for the region `sites`: the average over Pauli
/// strings non-identity on every listed site of Σ_n P(n) 3^{-n}, where the
/// size distribution is taken of the back-evolved string
/// `e^{-iHt} P e^{+iHt}`.
pub fn lambda_exact(
    eig: &HamiltonianEigen,
    t: f64,
    sites: &[usize],
    mode: LambdaMode,
) -> Result<f64, OracleError> {
    let n = eig.n_sites;
    for &s in sites {
        if s >= n {
            return Err(OracleError::RegionOutOfRange { site: s, n });
        }
    }
    let k = sites.len();
    if k == 0 {
        return Ok(1.0);
    }
    let lambda_of = |axes: &[PauliAxis]| -> Result<f64, OracleError> {
        let p = PauliString::new(sites.iter().copied().zip(axes.iter().copied()));
        let dense = dense_pauli(&p, n)?;
        let evolved = eig.heisenberg_evolve(&dense.matrix, -t);
        let dist = pauli_weight_distribution(&DenseOperator::new(n, evolved)?)?;
        Ok(dist.lambda())
    };
    match mode {
        LambdaMode::Enumerate => {
            if k > MAX_ENUMERATED_REGION {
                return Err(OracleError::EnumerationTooLarge { k, max: MAX_ENUMERATED_REGION });
            }
            let count = 3usize.pow(k as u32);
            let mut acc = 0.0;
            let mut axes = vec![PauliAxis::X; k];
            for code in 0..count {
                let mut rest = code;
                for slot in 0..k {
                    axes[slot] = PauliAxis::ALL[rest % 3];
                    rest /= 3;
                }
                acc += lambda_of(&axes)?;
            }
            Ok(acc / count as f64)
        }
        LambdaMode::Sample { draws, seed } => {
            let mut rng = crate::seeding::stream_rng(seed, crate::seeding::MONTE_CARLO_STREAM);
            let mut acc = 0.0;
            let mut axes = vec![PauliAxis::X; k];
            for _ in 0..draws {
                for slot in axes.iter_mut() {
                    *slot = PauliAxis::ALL[rng.gen_range(0..3)];
                }
                acc += lambda_of(&axes)?;
            }
            Ok(acc / draws as f64)
        }
    }
}

/// ⟨ψ|P|ψ⟩ for a signed Pauli string on a dense state vector.
pub fn pauli_expectation(psi: &Array1<C64>, p: &PauliString, n: usize) -> C64 {
    let dim = 1usize << n;
    debug_assert_eq!(psi.len(), dim);
    let mut acc = C64::new(0.0, 0.0);
    for b in 0..dim {
        let amp = psi[b];
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        // P|b⟩ = phase · |b'⟩
        let mut target = b;
        let mut phase = C64::new(p.sign() as f64, 0.0);
        for (site, axis) in p.iter() {
            let shift = n - 1 - site;
            let bit = (b >> shift) & 1;
            match axis {
                PauliAxis::X => target ^= 1 << shift,
                PauliAxis::Y => {
                    target ^= 1 << shift;
                    phase *= if bit == 0 { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
                }
                PauliAxis::Z => {
                    if bit == 1 {
                        phase = -phase;
                    }
                }
            }
        }
        acc += psi[target].conj() * phase * amp;
    }
    acc
}

/// Apply a one-qubit gate to a dense state vector in place.
pub fn apply_one_qubit_gate_vec(psi: &mut Array1<C64>, m: &Array2<C64>, site: usize, n: usize) {
    let shift = n - 1 - site;
    let mask = 1usize << shift;
    for b in 0..psi.len() {
        if b & mask != 0 {
            continue;
        }
        let b1 = b | mask;
        let (a0, a1) = (psi[b], psi[b1]);
        psi[b] = m[[0, 0]] * a0 + m[[0, 1]] * a1;
        psi[b1] = m[[1, 0]] * a0 + m[[1, 1]] * a1;
    }
}

/// Monte Carlo evaluation of λ_O straight from its defining expectation
/// `E[⟨0|U O U†|0⟩²]` over the sandwich ensemble. Returns (mean, stderr).
pub fn lambda_mc_definition(
    eig: &HamiltonianEigen,
    t: f64,
    o: &PauliString,
    draws: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64), OracleError> {
    let n = eig.n_sites;
    if let Some(max) = o.max_site() {
        if max >= n {
            return Err(OracleError::RegionOutOfRange { site: max, n });
        }
    }
    let dim = 1usize << n;
    let gates = enumerate_cliffords();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let v_layer = sample_layer(n, rng);
        let u_layer = sample_layer(n, rng);
        // φ = e^{+iHt} u†|0⟩ ; estimate = ⟨φ| v O v† |φ⟩²
        let mut psi = Array1::zeros(dim);
        psi[0] = C64::new(1.0, 0.0);
        for site in 0..n {
            let ud = dagger(&gates[u_layer[site] as usize].matrix);
            apply_one_qubit_gate_vec(&mut psi, &ud, site, n);
        }
        let phi = eig.evolve_state(&psi, -t);
        let rotated = conjugate_pauli_by_clifford_layer(o, &v_layer);
        let m = pauli_expectation(&phi, &rotated, n).re;
        let est = m * m;
        sum += est;
        sum_sq += est * est;
    }
    let mean = sum / draws as f64;
    let var = (sum_sq / draws as f64 - mean * mean).max(0.0);
    let stderr = if draws > 1 { (var / (draws as f64 - 1.0)).sqrt() } else { 0.0 };
    Ok((mean, stderr))
}

/// Initial state for the dense reference pipeline.
#[derive(Clone, Debug)]
pub enum DenseState {
    Pure(Array1<C64>),
    Mixed(Array2<C64>),
}

impl DenseState {
    fn dim(&self) -> usize {
        match self {
            DenseState::Pure(v) => v.len(),
            DenseState::Mixed(m) => m.dim().0,
        }
    }
}

/// Exact sandwich-pipeline estimates: samples `draws` snapshots with dense
/// Born statistics and returns the per-snapshot estimator values for each
/// observable (`result[obs][draw]`).
pub fn dense_snapshot_reference(
    state: &DenseState,
    eig: &HamiltonianEigen,
    t: f64,
    observables: &[PauliString],
    lambdas: &[f64],
    draws: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>, OracleError> {
    let n = eig.n_sites;
    let dim = 1usize << n;
    if state.dim() != dim {
        return Err(OracleError::Shape(format!(
            "state dimension {} vs 2^{n}",
            state.dim()
        )));
    }
    if observables.len() != lambdas.len() {
        return Err(OracleError::Shape("one λ per observable required".into()));
    }
    let gates = enumerate_cliffords();
    let forward = eig.evolution(t);
    let mut estimates = vec![Vec::with_capacity(draws); observables.len()];
    for _ in 0..draws {
        let v_layer = sample_layer(n, rng);
        let u_layer = sample_layer(n, rng);
        // Born probabilities of the evolved state
        let probs: Vec<f64> = match state {
            DenseState::Pure(psi0) => {
                let mut psi = psi0.clone();
                for site in 0..n {
                    apply_one_qubit_gate_vec(&mut psi, &gates[v_layer[site] as usize].matrix, site, n);
                }
                let mut psi = forward.dot(&psi);
                for site in 0..n {
                    apply_one_qubit_gate_vec(&mut psi, &gates[u_layer[site] as usize].matrix, site, n);
                }
                psi.iter().map(|z| z.norm_sqr()).collect()
            }
            DenseState::Mixed(rho0) => {
                let mut v = Array2::eye(1);
                let mut u = Array2::eye(1);
                for site in 0..n {
                    v = crate::linalg::kron(&v, &gates[v_layer[site] as usize].matrix);
                    u = crate::linalg::kron(&u, &gates[u_layer[site] as usize].matrix);
                }
                let m = u.dot(&forward.dot(&v));
                let rho = m.dot(rho0).dot(&dagger(&m));
                (0..dim).map(|b| rho[[b, b]].re.max(0.0)).collect()
            }
        };
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(OracleError::ZeroNorm);
        }
        let mut pick = rng.gen::<f64>() * total;
        let mut b = dim - 1;
        for (idx, &p) in probs.iter().enumerate() {
            if pick < p {
                b = idx;
                break;
            }
            pick -= p;
        }
        // φ = e^{+iHt} u†|b⟩, estimate = λ⁻¹ ⟨φ| v O v† |φ⟩
        let mut psi = Array1::zeros(dim);
        psi[b] = C64::new(1.0, 0.0);
        for site in 0..n {
            let idx = inverse_index(u_layer[site] as usize);
            apply_one_qubit_gate_vec(&mut psi, &gates[idx].matrix, site, n);
        }
        let phi = eig.evolve_state(&psi, -t);
        for (slot, (obs, &lambda)) in observables.iter().zip(lambdas.iter()).enumerate() {
            let rotated = conjugate_pauli_by_clifford_layer(obs, &v_layer);
            let est = pauli_expectation(&phi, &rotated, n).re / lambda;
            estimates[slot].push(est);
        }
    }
    Ok(estimates)
}

/// Sequentially sample a bitstring from dense amplitudes, consuming exactly
/// one uniform variate per site (mirrors the MPS sampler's stream usage).
pub fn sequential_sample_dense(psi: &Array1<C64>, n: usize, rng: &mut impl Rng) -> Vec<u8> {
    let probs: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let mut lo = 0usize;
    let mut hi = probs.len();
    let mut bits = Vec::with_capacity(n);
    for _ in 0..n {
        let mid = lo + (hi - lo) / 2;
        let p0: f64 = probs[lo..mid].iter().sum();
        let p1: f64 = probs[mid..hi].iter().sum();
        let u = rng.gen::<f64>() * (p0 + p1);
        if u < p0 {
            bits.push(0);
            hi = mid;
        } else {
            bits.push(1);
            lo = mid;
        }
    }
    bits
}
