//! Channel eigenvalues λ_O (inverse shadow norms) for all contiguous regions
//! and checkpoint times, from one TEBD evolution in the doubled operator
//! space, plus the exponential-ansatz fit `||O||²_sh = c₀ αᵏ`.
//!
//! The per-site doubled space vectorizes a 2×2 operator as its flattened
//! matrix divided by √2, so `{|I⟩⟩, |X⟩⟩, |Y⟩⟩, |Z⟩⟩}` is orthonormal, and
//! takes the tensor square of that 4-dimensional space. The size-weighting
//! product state and the region projectors are then explicit per-site
//! vectors, and the overlap of the evolved weighting state with a region
//! state is the channel eigenvalue for every Pauli supported exactly on the
//! region.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::hamiltonian::{
    build_doubled_bonds, build_xxz_bonds, sample_disorder, trotterize, HamiltonianError,
    TimeDirection, XxzParams,
};
use crate::mps::{Mps, MpsError, TruncationPolicy};
use crate::pauli::PauliAxis;

/// Per-step discarded weight above which a truncation warning is recorded.
pub const TRUNCATION_WARN_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ShadowNormError {
    #[error("checkpoint {t} is not a multiple of the Trotter step {tau}")]
    CheckpointOffGrid { t: f64, tau: f64 },
    #[error("region [{start}, {start}+{len}) exceeds the chain of {n} sites")]
    RegionOutOfRange { start: usize, len: usize, n: usize },
    #[error("k_max {k_max} exceeds the chain of {n} sites")]
    RegionTooLong { k_max: usize, n: usize },
    #[error("fit needs at least 3 points, got {0}")]
    TooFewFitPoints(usize),
    #[error("fit input must be positive, got {value} at k = {k}")]
    NonPositiveNorm { k: usize, value: f64 },
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Mps(#[from] MpsError),
}

/// A contiguous run of `len` sites starting at `start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegionSpec {
    pub start: usize,
    pub len: usize,
}

impl RegionSpec {
    pub fn validate(&self, n: usize) -> Result<(), ShadowNormError> {
        if self.start + self.len > n {
            return Err(ShadowNormError::RegionOutOfRange {
                start: self.start,
                len: self.len,
                n,
            });
        }
        Ok(())
    }

    pub fn sites(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// The centered placement of a length-`k` block used for boundary-free
/// observables: sites `n/2 - ⌊(k-1)/2⌋ - 1 … n/2 + ⌊k/2⌋ - 1` (0-based).
pub fn centered_region(n: usize, k: usize) -> RegionSpec {
    let start = (n / 2).saturating_sub((k - 1) / 2 + 1);
    RegionSpec { start, len: k }
}

/// Which starts populate the table for each region length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionPlacement {
    /// All starts `0 ..= n - k`; means over starts feed the fit.
    AllStarts,
    /// One centered region per length.
    Centered,
}

/// |P⟩⟩: the flattened single-site Pauli (or identity for `None`) divided by
/// √2, in row-major (ket, bra) order.
pub fn vectorized_pauli(axis: Option<PauliAxis>) -> Array1<C64> {
    let m = match axis {
        Some(a) => a.matrix(),
        None => Array2::eye(2),
    };
    let s = C64::from(1.0 / 2.0_f64.sqrt());
    Array1::from_iter(m.iter().map(|&z| z * s))
}

/// Per-site all-identity vector `|I⟩⟩ ⊗ |I⟩⟩` of the 16-dim doubled space.
pub fn site_identity_vector() -> Array1<C64> {
    let v = vectorized_pauli(None);
    crate::linalg::kron_vec(&v, &v)
}

/// Per-site region vector `3⁻¹ Σ_P |P⟩⟩ ⊗ |P⟩⟩`.
pub fn site_region_vector() -> Array1<C64> {
    let mut out = Array1::zeros(16);
    for axis in PauliAxis::ALL {
        let v = vectorized_pauli(Some(axis));
        out = out + crate::linalg::kron_vec(&v, &v);
    }
    out.mapv(|z| z / C64::from(3.0))
}

/// Per-site size-weighting vector `|I⟩⟩⊗|I⟩⟩ + 3⁻¹ Σ_P |P⟩⟩⊗|P⟩⟩`.
pub fn site_s_vector() -> Array1<C64> {
    site_identity_vector() + site_region_vector()
}

/// The size-weighting product state over `n` sites (kept unnormalized; its
/// squared norm is (4/3)ⁿ).
pub fn build_s_state(n: usize) -> Result<Mps, MpsError> {
    let v = site_s_vector();
    Mps::product_state(&vec![v; n])
}

/// The region product state: region vector inside `region`, identity vector
/// elsewhere.
pub fn build_a_state(region: &RegionSpec, n: usize) -> Result<Mps, ShadowNormError> {
    region.validate(n)?;
    let inside = site_region_vector();
    let outside = site_identity_vector();
    let vectors: Vec<Array1<C64>> = (0..n)
        .map(|i| if region.sites().contains(&i) { inside.clone() } else { outside.clone() })
        .collect();
    Ok(Mps::product_state(&vectors)?)
}

/// One table cell: the channel eigenvalue of region `(k, start)` at
/// checkpoint index `t_index`.
#[derive(Clone, Copy, Debug)]
pub struct ShadowNormEntry {
    pub k: usize,
    pub start: usize,
    pub t_index: usize,
    pub lambda: f64,
}

/// λ values for every requested region and checkpoint, with run metadata.
#[derive(Clone, Debug)]
pub struct ShadowNormTable {
    pub params: XxzParams,
    pub policy: TruncationPolicy,
    pub tau: f64,
    pub checkpoints: Vec<f64>,
    pub k_max: usize,
    pub placement: RegionPlacement,
    pub entries: Vec<ShadowNormEntry>,
    /// Largest per-step discarded weight seen during the evolution.
    pub max_step_discard: f64,
    /// Number of steps whose discarded weight exceeded the warning threshold.
    pub truncation_warnings: usize,
    /// Largest bond dimension reached.
    pub max_bond_dim: usize,
}

impl ShadowNormTable {
    pub fn lambda(&self, k: usize, start: usize, t_index: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.k == k && e.start == start && e.t_index == t_index)
            .map(|e| e.lambda)
    }

    /// Mean λ over starts for each (k, checkpoint index).
    pub fn average_over_starts(&self) -> BTreeMap<(usize, usize), f64> {
        let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        for e in &self.entries {
            let slot = sums.entry((e.k, e.t_index)).or_insert((0.0, 0));
            slot.0 += e.lambda;
            slot.1 += 1;
        }
        sums.into_iter().map(|(key, (sum, count))| (key, sum / count as f64)).collect()
    }

    /// Shadow norms `k → (mean λ)⁻¹` at one checkpoint, `k ≥ 1`.
    pub fn shadow_norms_at(&self, t_index: usize) -> Vec<(usize, f64)> {
        self.average_over_starts()
            .into_iter()
            .filter(|&((k, ti), _)| ti == t_index && k >= 1)
            .map(|((k, _), lambda)| (k, 1.0 / lambda))
            .collect()
    }
}

fn region_list(n: usize, k_max: usize, placement: RegionPlacement) -> Vec<RegionSpec> {
    let mut regions = Vec::new();
    for k in 0..=k_max {
        match placement {
            RegionPlacement::AllStarts => {
                if k == 0 {
                    regions.push(RegionSpec { start: 0, len: 0 });
                } else {
                    for start in 0..=(n - k) {
                        regions.push(RegionSpec { start, len: k });
                    }
                }
            }
            RegionPlacement::Centered => {
                if k == 0 {
                    regions.push(RegionSpec { start: 0, len: 0 });
                } else {
                    regions.push(centered_region(n, k));
                }
            }
        }
    }
    regions
}

/// Per-site bra transfer matrix `Σ_m v̄[m] · T[:, m, :]`.
fn bra_transfer(site_tensor: &ndarray::Array3<C64>, bra: &Array1<C64>) -> Array2<C64> {
    let (l, d, r) = site_tensor.dim();
    debug_assert_eq!(d, bra.len());
    let mut out = Array2::zeros((l, r));
    for m in 0..d {
        let w = bra[m].conj();
        if w == C64::new(0.0, 0.0) {
            continue;
        }
        out.zip_mut_with(&site_tensor.index_axis(Axis(1), m), |o, &t| *o += w * t);
    }
    out
}

/// Evaluate λ for every region against the current evolved weighting state,
/// using cached identity-contraction prefixes and suffixes from both chain
/// ends.
fn evaluate_regions(
    state: &Mps,
    regions: &[RegionSpec],
    t_index: usize,
    entries: &mut Vec<ShadowNormEntry>,
) {
    let n = state.n_sites();
    let identity = site_identity_vector();
    let region_vec = site_region_vector();
    let id_mats: Vec<Array2<C64>> =
        (0..n).map(|i| bra_transfer(state.tensor(i), &identity)).collect();
    let reg_mats: Vec<Array2<C64>> =
        (0..n).map(|i| bra_transfer(state.tensor(i), &region_vec)).collect();

    // prefix[i]: row vector of the identity contraction over sites < i
    let mut prefix: Vec<Array2<C64>> = Vec::with_capacity(n + 1);
    prefix.push(Array2::ones((1, 1)));
    for i in 0..n {
        let next = prefix[i].dot(&id_mats[i]);
        prefix.push(next);
    }
    // suffix[i]: column vector of the identity contraction over sites ≥ i
    let mut suffix: Vec<Array2<C64>> = vec![Array2::ones((1, 1)); n + 1];
    for i in (0..n).rev() {
        suffix[i] = id_mats[i].dot(&suffix[i + 1]);
    }

    let scale = state.log_scale().exp();
    for region in regions {
        let mut row = prefix[region.start].clone();
        for i in region.sites() {
            row = row.dot(&reg_mats[i]);
        }
        let value = row.dot(&suffix[region.start + region.len]);
        let lambda = value[[0, 0]].re * scale;
        entries.push(ShadowNormEntry {
            k: region.len,
            start: region.start,
            t_index,
            lambda,
        });
    }
}

/// Evolve the size-weighting state once under the doubled schedule with the
/// reversed phase and tabulate λ for every requested region at every
/// checkpoint. Checkpoints must sit on the Trotter grid; `t = 0` is allowed.
pub fn run_shadow_norm(
    params: &XxzParams,
    policy: &TruncationPolicy,
    tau: f64,
    checkpoints: &[f64],
    k_max: usize,
    placement: RegionPlacement,
) -> Result<ShadowNormTable, ShadowNormError> {
    params.validate()?;
    if k_max > params.n {
        return Err(ShadowNormError::RegionTooLong { k_max, n: params.n });
    }
    let mut times: Vec<f64> = checkpoints.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut step_counts = Vec::with_capacity(times.len());
    for &t in &times {
        let steps = (t / tau).round();
        if (t - steps * tau).abs() > 1e-9 * tau.max(t.abs()) || t < 0.0 {
            return Err(ShadowNormError::CheckpointOffGrid { t, tau });
        }
        step_counts.push(steps as usize);
    }

    let fields = sample_disorder(params)?;
    let single = build_xxz_bonds(params, &fields)?;
    let doubled = build_doubled_bonds(&single)?;
    // Eq-of-motion phase: the doubled overlap uses exp(+i H_tot t)
    let step = trotterize(&doubled, tau, TimeDirection::Reversed)?;

    let regions = region_list(params.n, k_max, placement);
    for r in &regions {
        r.validate(params.n)?;
    }

    let mut state = build_s_state(params.n)?;
    let mut entries = Vec::new();
    let mut max_step_discard = 0.0_f64;
    let mut warnings = 0usize;
    let mut max_bond = 1usize;

    let last = *step_counts.last().unwrap_or(&0);
    let mut checkpoint_iter = step_counts.iter().zip(0..).peekable();
    for done_steps in 0..=last {
        while let Some(&(&steps, t_index)) = checkpoint_iter.peek() {
            if steps == done_steps {
                evaluate_regions(&state, &regions, t_index, &mut entries);
                checkpoint_iter.next();
            } else {
                break;
            }
        }
        if done_steps == last {
            break;
        }
        let report = step.apply(&mut state, policy)?;
        max_bond = max_bond.max(report.max_bond_dim);
        max_step_discard = max_step_discard.max(report.discarded_weight);
        if report.discarded_weight > TRUNCATION_WARN_THRESHOLD {
            warnings += 1;
            log::warn!(
                "step {} discarded weight {:.3e} exceeds {:.0e}",
                done_steps + 1,
                report.discarded_weight,
                TRUNCATION_WARN_THRESHOLD
            );
        }
    }

    Ok(ShadowNormTable {
        params: *params,
        policy: *policy,
        tau,
        checkpoints: times,
        k_max,
        placement,
        entries,
        max_step_discard,
        truncation_warnings: warnings,
        max_bond_dim: max_bond,
    })
}

/// Exponential-ansatz fit of shadow norms against region length.
#[derive(Clone, Copy, Debug)]
pub struct FitResult {
    pub c0: f64,
    pub alpha: f64,
    pub stderr_alpha: f64,
    pub k_min: usize,
    pub k_max: usize,
}

/// Least-squares fit of `ln ||O||²_sh = ln c₀ + k ln α` over `(k, norm)`
/// points. The α standard error comes from the residual variance of the
/// regression slope.
pub fn fit_alpha(norms: &[(usize, f64)]) -> Result<FitResult, ShadowNormError> {
    if norms.len() < 3 {
        return Err(ShadowNormError::TooFewFitPoints(norms.len()));
    }
    for &(k, v) in norms {
        if v <= 0.0 {
            return Err(ShadowNormError::NonPositiveNorm { k, value: v });
        }
    }
    let m = norms.len() as f64;
    let xs: Vec<f64> = norms.iter().map(|&(k, _)| k as f64).collect();
    let ys: Vec<f64> = norms.iter().map(|&(_, v)| v.ln()).collect();
    let xm = xs.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residual_var: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum::<f64>()
        / (m - 2.0);
    let slope_err = (residual_var / sxx).sqrt();
    let alpha = slope.exp();
    Ok(FitResult {
        c0: intercept.exp(),
        alpha,
        stderr_alpha: alpha * slope_err,
        k_min: norms.iter().map(|&(k, _)| k).min().unwrap(),
        k_max: norms.iter().map(|&(k, _)| k).max().unwrap(),
    })
}
