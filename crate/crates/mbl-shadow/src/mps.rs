//! Matrix product state engine: construction, canonical forms, two-site gate
//! application with singular-value truncation, overlaps, local expectation
//! values, and exact bitstring sampling.
//!
//! Site tensors are rank-3 complex arrays indexed `(left bond, physical,
//! right bond)`; boundary bonds have dimension 1 and every site shares one
//! physical dimension (2 for qubit chains, 16 for the doubled operator
//! space). States may be unnormalized: a running `log_scale` absorbs scalar
//! factors pulled out during gate application and is reapplied by the
//! overlap routines.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use ndarray_linalg::{JobSvd, SVDDC, QR};
use num_complex::Complex64 as C64;
use rand::Rng;
use thiserror::Error;

/// Relative floor below which singular values are treated as exact zeros.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("empty system: need at least one site")]
    EmptySystem,
    #[error("physical dimension must be at least 2, found {0}")]
    BadPhysicalDim(usize),
    #[error("mixed physical dimensions: site {site} has {got}, expected {expected}")]
    MixedPhysicalDims { site: usize, got: usize, expected: usize },
    #[error("bond mismatch between sites {site} and {next}: {left} vs {right}")]
    BrokenChain { site: usize, next: usize, left: usize, right: usize },
    #[error("boundary bond dimension must be 1, found {0}")]
    OpenBoundary(usize),
    #[error("site {site} out of range for {n} sites")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("bond {bond} out of range for {n} sites")]
    BondOutOfRange { bond: usize, n: usize },
    #[error("operator has shape {got:?}, expected {expected:?}")]
    OperatorShape { expected: (usize, usize), got: (usize, usize) },
    #[error("states are incompatible: {0}")]
    Incompatible(String),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("bitstring sampling requires physical dimension 2, found {0}")]
    NotAQubitChain(usize),
    #[error("at most one operator per site (site {0} repeated)")]
    DuplicateSite(usize),
    #[error("linear-algebra backend: {0}")]
    Backend(String),
}

/// Bond-truncation policy for two-site updates.
///
/// `cutoff` bounds the total discarded squared singular weight relative to
/// the pre-truncation total; `chi_max` caps the kept bond dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy {
    pub chi_max: usize,
    pub cutoff: f64,
}

impl TruncationPolicy {
    pub fn new(chi_max: usize, cutoff: f64) -> Self {
        assert!(chi_max >= 1, "chi_max must be at least 1");
        assert!((0.0..1.0).contains(&cutoff), "cutoff must lie in [0, 1)");
        Self { chi_max, cutoff }
    }

    /// No truncation beyond exact zeros.
    pub fn exact() -> Self {
        Self { chi_max: usize::MAX, cutoff: 0.0 }
    }
}

/// What a two-site update threw away.
#[derive(Clone, Copy, Debug, Default)]
pub struct TruncationReport {
    /// Relative discarded squared singular weight, in [0, 1].
    pub discarded_weight: f64,
    /// Bond dimension after the cut.
    pub kept: usize,
}

/// A `d × d` operator acting on one site.
#[derive(Clone, Debug)]
pub struct OneSiteOperator {
    pub site: usize,
    pub matrix: Array2<C64>,
}

/// A `d² × d²` gate acting on the pair `(bond, bond + 1)`.
///
/// Row and column indices group as `(left site, right site)` with the left
/// site most significant.
#[derive(Clone, Debug)]
pub struct TwoSiteGate {
    pub bond: usize,
    pub matrix: Array2<C64>,
}

/// Tensor-train state over `n` sites with uniform physical dimension.
#[derive(Clone, Debug)]
pub struct Mps {
    tensors: Vec<Array3<C64>>,
    phys_dim: usize,
    ortho_center: Option<usize>,
    log_scale: f64,
}

impl Mps {
    /// Bond-dimension-1 product state from per-site local vectors.
    pub fn product_state(local_vectors: &[Array1<C64>]) -> Result<Self, MpsError> {
        if local_vectors.is_empty() {
            return Err(MpsError::EmptySystem);
        }
        let d = local_vectors[0].len();
        if d < 2 {
            return Err(MpsError::BadPhysicalDim(d));
        }
        for (site, v) in local_vectors.iter().enumerate() {
            if v.len() != d {
                return Err(MpsError::MixedPhysicalDims { site, got: v.len(), expected: d });
            }
        }
        let tensors = local_vectors
            .iter()
            .map(|v| {
                Array3::from_shape_fn((1, d, 1), |(_, a, _)| v[a])
            })
            .collect();
        Ok(Self { tensors, phys_dim: d, ortho_center: None, log_scale: 0.0 })
    }

    /// Assemble from explicit site tensors, validating the chain structure.
    pub fn from_tensors(tensors: Vec<Array3<C64>>) -> Result<Self, MpsError> {
        if tensors.is_empty() {
            return Err(MpsError::EmptySystem);
        }
        let d = tensors[0].dim().1;
        if d < 2 {
            return Err(MpsError::BadPhysicalDim(d));
        }
        for (site, t) in tensors.iter().enumerate() {
            if t.dim().1 != d {
                return Err(MpsError::MixedPhysicalDims { site, got: t.dim().1, expected: d });
            }
        }
        if tensors[0].dim().0 != 1 {
            return Err(MpsError::OpenBoundary(tensors[0].dim().0));
        }
        if tensors[tensors.len() - 1].dim().2 != 1 {
            return Err(MpsError::OpenBoundary(tensors[tensors.len() - 1].dim().2));
        }
        for i in 0..tensors.len() - 1 {
            let (l, r) = (tensors[i].dim().2, tensors[i + 1].dim().0);
            if l != r {
                return Err(MpsError::BrokenChain { site: i, next: i + 1, left: l, right: r });
            }
        }
        Ok(Self { tensors, phys_dim: d, ortho_center: None, log_scale: 0.0 })
    }

    /// Seeded random state with bond dimensions capped at `chi`.
    ///
    /// Entries are uniform in the complex unit square; useful for tests and
    /// benchmarks, not physical.
    pub fn random_state(n: usize, d: usize, chi: usize, rng: &mut impl Rng) -> Result<Self, MpsError> {
        if n == 0 {
            return Err(MpsError::EmptySystem);
        }
        if d < 2 {
            return Err(MpsError::BadPhysicalDim(d));
        }
        let chi = chi.max(1);
        let mut dims = vec![1usize; n + 1];
        for i in 1..n {
            // largest representable bond at this cut, capped by chi
            let from_left = d.saturating_pow(i.min(32) as u32);
            let from_right = d.saturating_pow((n - i).min(32) as u32);
            dims[i] = chi.min(from_left).min(from_right);
        }
        let tensors = (0..n)
            .map(|i| {
                Array3::from_shape_fn((dims[i], d, dims[i + 1]), |_| {
                    C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                })
            })
            .collect();
        Ok(Self { tensors, phys_dim: d, ortho_center: None, log_scale: 0.0 })
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    /// Bond dimensions including the two trivial boundary bonds (`n + 1` entries).
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.tensors.len() + 1);
        dims.push(self.tensors[0].dim().0);
        for t in &self.tensors {
            dims.push(t.dim().2);
        }
        dims
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn ortho_center(&self) -> Option<usize> {
        self.ortho_center
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn tensor(&self, site: usize) -> &Array3<C64> {
        &self.tensors[site]
    }

    /// ⟨ψ|ψ⟩ including the folded-out scale.
    pub fn norm_sqr(&self) -> f64 {
        inner(self, self).map(|z| z.re).unwrap_or(0.0)
    }

    /// Rescale to ⟨ψ|ψ⟩ = 1 and reset `log_scale` to zero.
    pub fn normalize(&mut self) -> Result<(), MpsError> {
        let bare = bare_inner(self, self)?.re;
        if bare <= 0.0 {
            return Err(MpsError::ZeroNorm);
        }
        let site = self.ortho_center.unwrap_or(0);
        let factor = C64::from(1.0 / bare.sqrt());
        self.tensors[site].mapv_inplace(|z| z * factor);
        self.log_scale = 0.0;
        Ok(())
    }

    /// Gauge the chain so tensors left (right) of `center` are left (right)
    /// isometries. The represented state is unchanged.
    pub fn canonicalize(&mut self, center: usize) -> Result<(), MpsError> {
        let n = self.n_sites();
        if center >= n {
            return Err(MpsError::SiteOutOfRange { site: center, n });
        }
        match self.ortho_center {
            Some(c) => self.move_center_from(c, center)?,
            None => {
                for i in 0..center {
                    self.push_right(i)?;
                }
                for i in (center + 1..n).rev() {
                    self.push_left(i)?;
                }
                self.ortho_center = Some(center);
            }
        }
        Ok(())
    }

    fn move_center_from(&mut self, from: usize, to: usize) -> Result<(), MpsError> {
        let mut c = from;
        while c < to {
            self.push_right(c)?;
            c += 1;
        }
        while c > to {
            self.push_left(c)?;
            c -= 1;
        }
        self.ortho_center = Some(to);
        Ok(())
    }

    /// Left-orthogonalize site `i`, absorbing the remainder into `i + 1`.
    fn push_right(&mut self, i: usize) -> Result<(), MpsError> {
        let (l, d, r) = self.tensors[i].dim();
        let mat = self.tensors[i]
            .view()
            .into_shape_with_order((l * d, r))
            .map_err(|e| MpsError::Backend(e.to_string()))?
            .as_standard_layout()
            .to_owned();
        let (q, rr) = mat.qr().map_err(|e| MpsError::Backend(e.to_string()))?;
        let k = q.dim().1;
        self.tensors[i] = q
            .into_shape_with_order((l, d, k))
            .map_err(|e| MpsError::Backend(e.to_string()))?;
        let (rn, dn, r2) = self.tensors[i + 1].dim();
        debug_assert_eq!(rn, r);
        let next = self.tensors[i + 1]
            .view()
            .into_shape_with_order((rn, dn * r2))
            .map_err(|e| MpsError::Backend(e.to_string()))?
            .as_standard_layout()
            .to_owned();
        self.tensors[i + 1] = rr
            .dot(&next)
            .into_shape_with_order((k, dn, r2))
            .map_err(|e| MpsError::Backend(e.to_string()))?;
        Ok(())
    }

    /// Right-orthogonalize site `i`, absorbing the remainder into `i - 1`.
    fn push_left(&mut self, i: usize) -> Result<(), MpsError> {
        let (l, d, r) = self.tensors[i].dim();
        let mat = self.tensors[i]
            .view()
            .into_shape_with_order((l, d * r))
            .map_err(|e| MpsError::Backend(e.to_string()))?
            .as_standard_layout()
            .to_owned();
        // LQ of `mat` via QR of its conjugate transpose
        let mat_h = mat.t().mapv(|z| z.conj());
        let (q, rr) = mat_h
            .as_standard_layout()
            .to_owned()
            .qr()
            .map_err(|e| MpsError::Backend(e.to_string()))?;
        let k = q.dim().1;
        let b = q.t().mapv(|z| z.conj()); // (k, d*r), right isometry
        self.tensors[i] = b
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((k, d, r))
            .map_err(|e| MpsError::Backend(e.to_string()))?;
        let carry = rr.t().mapv(|z| z.conj()); // (l, k)
        let (l1, d1, ln) = self.tensors[i - 1].dim();
        debug_assert_eq!(ln, l);
        let prev = self.tensors[i - 1]
            .view()
            .into_shape_with_order((l1 * d1, ln))
            .map_err(|e| MpsError::Backend(e.to_string()))?
            .as_standard_layout()
            .to_owned();
        self.tensors[i - 1] = prev
            .dot(&carry)
            .into_shape_with_order((l1, d1, k))
            .map_err(|e| MpsError::Backend(e.to_string()))?;
        Ok(())
    }

    /// Apply a `d × d` operator on one site.
    ///
    /// A unitary gate keeps the orthogonality center; anything else clears it.
    pub fn apply_one_site(&mut self, op: &OneSiteOperator) -> Result<(), MpsError> {
        let n = self.n_sites();
        if op.site >= n {
            return Err(MpsError::SiteOutOfRange { site: op.site, n });
        }
        let d = self.phys_dim;
        if op.matrix.dim() != (d, d) {
            return Err(MpsError::OperatorShape { expected: (d, d), got: op.matrix.dim() });
        }
        let (l, _, r) = self.tensors[op.site].dim();
        let t = &self.tensors[op.site];
        let mut out = Array3::zeros((l, d, r));
        for a_new in 0..d {
            for a_old in 0..d {
                let w = op.matrix[[a_new, a_old]];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                let slice = t.index_axis(Axis(1), a_old);
                let mut dst = out.index_axis_mut(Axis(1), a_new);
                dst.zip_mut_with(&slice, |o, &s| *o += w * s);
            }
        }
        self.tensors[op.site] = out;
        if self.ortho_center != Some(op.site)
            && crate::linalg::unitarity_defect(&op.matrix) > 1e-12
        {
            self.ortho_center = None;
        }
        Ok(())
    }

    /// Apply a two-site gate at `bond` (sites `bond`, `bond + 1`) and truncate.
    ///
    /// The orthogonality center migrates to `bond + 1`; singular weight below
    /// the policy is discarded and the unit-norm rescaling is folded into
    /// `log_scale`.
    /// Apply a `d³ × d³` operator on sites `start .. start + 3` and restore
    /// the tensor-train form with two splits. The operator need not be
    /// unitary; the orthogonality center ends on `start + 2`.
    pub fn apply_three_site_operator(
        &mut self,
        start: usize,
        matrix: &Array2<C64>,
        policy: &TruncationPolicy,
    ) -> Result<TruncationReport, MpsError> {
        let n = self.n_sites();
        if start + 2 >= n {
            return Err(MpsError::SiteOutOfRange { site: start + 2, n });
        }
        let d = self.phys_dim;
        let d3 = d * d * d;
        if matrix.dim() != (d3, d3) {
            return Err(MpsError::OperatorShape { expected: (d3, d3), got: matrix.dim() });
        }
        match self.ortho_center {
            Some(c) if (start..start + 3).contains(&c) => {}
            Some(c) => self.move_center_from(c, start)?,
            None => self.canonicalize(start)?,
        }
        let (l, _, m1) = self.tensors[start].dim();
        let (_, _, m2) = self.tensors[start + 1].dim();
        let (_, _, r) = self.tensors[start + 2].dim();
        let reshape_err = |e: ndarray::ShapeError| MpsError::Backend(e.to_string());
        let a = self.tensors[start]
            .view()
            .into_shape_with_order((l * d, m1))
            .map_err(reshape_err)?
            .as_standard_layout()
            .to_owned();
        let b = self.tensors[start + 1]
            .view()
            .into_shape_with_order((m1, d * m2))
            .map_err(reshape_err)?
            .as_standard_layout()
            .to_owned();
        let c = self.tensors[start + 2]
            .view()
            .into_shape_with_order((m2, d * r))
            .map_err(reshape_err)?
            .as_standard_layout()
            .to_owned();
        let theta = a
            .dot(&b)
            .into_shape_with_order((l * d * d, m2))
            .map_err(reshape_err)?
            .dot(&c); // (l·d·d, d·r)
        let grouped = theta
            .into_shape_with_order((l, d3, r))
            .map_err(reshape_err)?
            .permuted_axes([1, 0, 2])
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((d3, l * r))
            .map_err(reshape_err)?;
        let acted = matrix.dot(&grouped);
        let theta = acted
            .into_shape_with_order((d3, l, r))
            .map_err(reshape_err)?
            .permuted_axes([1, 0, 2])
            .as_standard_layout()
            .to_owned();

        // first split: (l·d) × (d·d·r)
        let merged = theta.into_shape_with_order((l * d, d * d * r)).map_err(reshape_err)?;
        let cut1 = split_svd(&merged, policy)?;
        self.log_scale += cut1.log_norm;
        self.tensors[start] =
            cut1.left.into_shape_with_order((l, d, cut1.kept)).map_err(reshape_err)?;
        // second split: (kept·d) × (d·r)
        let merged2 =
            cut1.right.into_shape_with_order((cut1.kept * d, d * r)).map_err(reshape_err)?;
        let cut2 = split_svd(&merged2, policy)?;
        self.log_scale += cut2.log_norm;
        self.tensors[start + 1] =
            cut2.left.into_shape_with_order((cut1.kept, d, cut2.kept)).map_err(reshape_err)?;
        self.tensors[start + 2] =
            cut2.right.into_shape_with_order((cut2.kept, d, r)).map_err(reshape_err)?;
        self.ortho_center = Some(start + 2);
        Ok(TruncationReport {
            discarded_weight: cut1.discarded_weight + cut2.discarded_weight,
            kept: cut1.kept.max(cut2.kept),
        })
    }

    pub fn apply_two_site_gate(
        &mut self,
        gate: &TwoSiteGate,
        policy: &TruncationPolicy,
    ) -> Result<TruncationReport, MpsError> {
        let n = self.n_sites();
        let bond = gate.bond;
        if bond + 1 >= n {
            return Err(MpsError::BondOutOfRange { bond, n });
        }
        let d = self.phys_dim;
        if gate.matrix.dim() != (d * d, d * d) {
            return Err(MpsError::OperatorShape { expected: (d * d, d * d), got: gate.matrix.dim() });
        }
        match self.ortho_center {
            Some(c) if c == bond || c == bond + 1 => {}
            Some(c) => self.move_center_from(c, bond)?,
            None => self.canonicalize(bond)?,
        }

        let (l, _, m) = self.tensors[bond].dim();
        let (_, _, r) = self.tensors[bond + 1].dim();
        let left = self.tensors[bond]
            .view()
            .into_shape_with_order((l * d, m))
            .map_err(|e| MpsError::Backend(e.to_string()))?
            .as_standard_layout()
            .to_owned();
        let right = self.tensors[bond + 1]
            .view()
            .into_shape_with_order((m, d * r))
            .map_err(|e| MpsError::Backend(e.to_string()))?
            .as_standard_layout()
            .to_owned();
        // theta[(l a), (b r)] -> reorder to [(a b), (l r)] to contract the gate
        let theta = left.dot(&right);
        let theta4 = theta
            .into_shape_with_order((l, d, d, r))
            .map_err(|e| MpsError::Backend(e.to_string()))?;
        let grouped = theta4
            .permuted_axes([1, 2, 0, 3])
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((d * d, l * r))
            .map_err(|e| MpsError::Backend(e.to_string()))?;
        let acted = gate.matrix.dot(&grouped);
        let theta4 = acted
            .into_shape_with_order((d, d, l, r))
            .map_err(|e| MpsError::Backend(e.to_string()))?;
        let merged = theta4
            .permuted_axes([2, 0, 1, 3])
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((l * d, d * r))
            .map_err(|e| MpsError::Backend(e.to_string()))?;

        let cut = split_svd(&merged, policy)?;
        self.log_scale += cut.log_norm;
        self.tensors[bond] = cut
            .left
            .into_shape_with_order((l, d, cut.kept))
            .map_err(|e| MpsError::Backend(e.to_string()))?;
        self.tensors[bond + 1] = cut
            .right
            .into_shape_with_order((cut.kept, d, r))
            .map_err(|e| MpsError::Backend(e.to_string()))?;
        self.ortho_center = Some(bond + 1);

        Ok(TruncationReport { discarded_weight: cut.discarded_weight, kept: cut.kept })
    }
}

/// Outcome of one truncated SVD split: `left` has orthonormal columns, the
/// kept singular values (rescaled to unit square-sum) are folded into
/// `right`, and `log_norm` is the logarithm of the factored-out scale.
struct SvdCut {
    left: Array2<C64>,
    right: Array2<C64>,
    kept: usize,
    discarded_weight: f64,
    log_norm: f64,
}

fn split_svd(merged: &Array2<C64>, policy: &TruncationPolicy) -> Result<SvdCut, MpsError> {
    let (u, s, vt) = merged
        .svddc(JobSvd::Some)
        .map_err(|e| MpsError::Backend(e.to_string()))?;
    let u = u.ok_or_else(|| MpsError::Backend("svd returned no u".into()))?;
    let vt = vt.ok_or_else(|| MpsError::Backend("svd returned no vt".into()))?;

    let total: f64 = s.iter().map(|x| x * x).sum();
    if total <= 0.0 {
        return Err(MpsError::ZeroNorm);
    }
    let floor = s[0] * SINGULAR_VALUE_FLOOR;
    let hard_rank = s.iter().take_while(|&&x| x > floor).count().max(1);
    let budget = policy.cutoff * total;
    // largest cut keeping the discarded square-sum within budget
    let mut kept = hard_rank.min(policy.chi_max);
    let mut tail: f64 = s.iter().skip(kept).map(|x| x * x).sum();
    while kept > 1 {
        let candidate = s[kept - 1] * s[kept - 1];
        if tail + candidate <= budget {
            tail += candidate;
            kept -= 1;
        } else {
            break;
        }
    }
    let discarded: f64 = s.iter().skip(kept).map(|x| x * x).sum();
    let keep_norm = (total - discarded).sqrt();

    let left = u.slice(s![.., ..kept]).to_owned();
    let mut right = vt.slice(s![..kept, ..]).to_owned();
    for (mut row, &w) in right.rows_mut().into_iter().zip(s.slice(s![..kept]).iter()) {
        let scaled = C64::from(w / keep_norm);
        row.mapv_inplace(|z| z * scaled);
    }
    Ok(SvdCut {
        left,
        right,
        kept,
        discarded_weight: discarded / total,
        log_norm: keep_norm.ln(),
    })
}

fn check_compatible(a: &Mps, b: &Mps) -> Result<(), MpsError> {
    if a.n_sites() != b.n_sites() {
        return Err(MpsError::Incompatible(format!(
            "site counts {} vs {}",
            a.n_sites(),
            b.n_sites()
        )));
    }
    if a.phys_dim() != b.phys_dim() {
        return Err(MpsError::Incompatible(format!(
            "physical dimensions {} vs {}",
            a.phys_dim(),
            b.phys_dim()
        )));
    }
    Ok(())
}

fn conj_t(v: ArrayView2<C64>) -> Array2<C64> {
    v.t().mapv(|z| z.conj())
}

/// Transfer-matrix contraction of ⟨a|b⟩ without the log-scale factors.
fn bare_inner(a: &Mps, b: &Mps) -> Result<C64, MpsError> {
    let mut t: Array2<C64> = Array2::ones((1, 1));
    for i in 0..a.n_sites() {
        let ta = a.tensors[i].view();
        let tb = b.tensors[i].view();
        let (la, _, ra) = ta.dim();
        let (lb, _, rb) = tb.dim();
        debug_assert_eq!(t.dim(), (la, lb));
        let mut next = Array2::zeros((ra, rb));
        for p in 0..a.phys_dim {
            let sa = ta.index_axis(Axis(1), p);
            let sb = tb.index_axis(Axis(1), p).as_standard_layout().to_owned();
            let tb_block = t.dot(&sb);
            next = next + conj_t(sa).dot(&tb_block);
        }
        t = next;
    }
    Ok(t[[0, 0]])
}

/// Overlap ⟨a|b⟩ including both states' folded-out scales.
pub fn inner(a: &Mps, b: &Mps) -> Result<C64, MpsError> {
    check_compatible(a, b)?;
    Ok(bare_inner(a, b)? * (a.log_scale + b.log_scale).exp())
}

/// ⟨ψ| ∏ᵢ opᵢ |ψ⟩ / ⟨ψ|ψ⟩ for at most one operator per site.
pub fn expect_product_operator(mps: &Mps, ops: &[OneSiteOperator]) -> Result<C64, MpsError> {
    let n = mps.n_sites();
    let d = mps.phys_dim;
    let mut by_site: Vec<Option<&Array2<C64>>> = vec![None; n];
    for op in ops {
        if op.site >= n {
            return Err(MpsError::SiteOutOfRange { site: op.site, n });
        }
        if op.matrix.dim() != (d, d) {
            return Err(MpsError::OperatorShape { expected: (d, d), got: op.matrix.dim() });
        }
        if by_site[op.site].replace(&op.matrix).is_some() {
            return Err(MpsError::DuplicateSite(op.site));
        }
    }
    let mut num: Array2<C64> = Array2::ones((1, 1));
    let mut den: Array2<C64> = Array2::ones((1, 1));
    for i in 0..n {
        let t = mps.tensors[i].view();
        let (_, _, r) = t.dim();
        let mut num_next = Array2::zeros((r, r));
        let mut den_next = Array2::zeros((r, r));
        for p in 0..d {
            let bra = conj_t(t.index_axis(Axis(1), p));
            let ket = t.index_axis(Axis(1), p).as_standard_layout().to_owned();
            den_next = den_next + bra.dot(&den.dot(&ket));
            match by_site[i] {
                None => {
                    num_next = num_next + bra.dot(&num.dot(&ket));
                }
                Some(m) => {
                    // ⟨p|op|q⟩ couples the bra index p to ket index q
                    for q in 0..d {
                        let w = m[[p, q]];
                        if w == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let ketq = t.index_axis(Axis(1), q).as_standard_layout().to_owned();
                        num_next = num_next + bra.dot(&num.dot(&ketq)).mapv(|z| z * w);
                    }
                }
            }
        }
        num = num_next;
        den = den_next;
    }
    let d0 = den[[0, 0]].re;
    if d0 <= 0.0 {
        return Err(MpsError::ZeroNorm);
    }
    Ok(num[[0, 0]] / C64::from(d0))
}

/// Draws computational-basis strings with the exact Born distribution.
///
/// Canonicalizes once at construction; each draw costs `O(n d χ²)` and
/// consumes exactly one uniform variate per site.
pub struct BitstringSampler {
    mps: Mps,
}

impl BitstringSampler {
    pub fn new(mps: &Mps) -> Result<Self, MpsError> {
        if mps.phys_dim != 2 {
            return Err(MpsError::NotAQubitChain(mps.phys_dim));
        }
        let mut owned = mps.clone();
        owned.canonicalize(0)?;
        let bare = bare_inner(&owned, &owned)?.re;
        if bare <= 0.0 {
            return Err(MpsError::ZeroNorm);
        }
        // normalize so per-site conditionals start from a unit state
        let factor = C64::from(1.0 / bare.sqrt());
        owned.tensors[0].mapv_inplace(|z| z * factor);
        owned.log_scale = 0.0;
        Ok(Self { mps: owned })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<u8> {
        let n = self.mps.n_sites();
        let mut bits = Vec::with_capacity(n);
        let mut left: Array2<C64> = Array2::ones((1, 1));
        for i in 0..n {
            let t = self.mps.tensors[i].view();
            let w0 = left.dot(&t.index_axis(Axis(1), 0).as_standard_layout().to_owned());
            let w1 = left.dot(&t.index_axis(Axis(1), 1).as_standard_layout().to_owned());
            let p0: f64 = w0.iter().map(|z| z.norm_sqr()).sum();
            let p1: f64 = w1.iter().map(|z| z.norm_sqr()).sum();
            let total = p0 + p1;
            let u: f64 = rng.gen::<f64>() * total;
            let (bit, w, p) = if u < p0 { (0u8, w0, p0) } else { (1u8, w1, p1) };
            bits.push(bit);
            let renorm = C64::from(1.0 / p.sqrt());
            left = w.mapv(|z| z * renorm);
        }
        bits
    }
}

/// One-shot convenience wrapper over [`BitstringSampler`].
pub fn sample_bitstring(mps: &Mps, rng: &mut impl Rng) -> Result<Vec<u8>, MpsError> {
    Ok(BitstringSampler::new(mps)?.sample(rng))
}

/// Exact isometry defect of the canonical form around `center` (test aid).
pub fn canonical_defect(mps: &Mps, center: usize) -> f64 {
    let mut worst = 0.0_f64;
    for (i, t) in mps.tensors.iter().enumerate() {
        let (l, d, r) = t.dim();
        if i < center {
            // left isometry: sum_a A_a† A_a = 1
            let m = t.view().into_shape_with_order((l * d, r)).unwrap().as_standard_layout().to_owned();
            let p = conj_t(m.view()).dot(&m);
            for ((a, b), z) in p.indexed_iter() {
                let want = if a == b { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                worst = worst.max((z - want).norm());
            }
        } else if i > center {
            // right isometry: sum_a A_a A_a† = 1
            let m = t.view().into_shape_with_order((l, d * r)).unwrap().as_standard_layout().to_owned();
            let p = m.dot(&conj_t(m.view()));
            for ((a, b), z) in p.indexed_iter() {
                let want = if a == b { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                worst = worst.max((z - want).norm());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::dense_vector;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn qubit_vec(a: f64, b: f64) -> Array1<C64> {
        array![c(a, 0.0), c(b, 0.0)]
    }

    fn ghz(n: usize) -> Mps {
        crate::pipeline::prepare_ghz(n).unwrap()
    }

    #[test]
    fn product_state_identity_case() {
        let vs = vec![qubit_vec(1.0, 0.0); 3];
        let mps = Mps::product_state(&vs).unwrap();
        assert!((mps.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(mps.bond_dims(), vec![1, 1, 1, 1]);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        assert_eq!(sample_bitstring(&mps, &mut rng).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn product_state_norm_is_product_of_vector_norms() {
        let vs = vec![qubit_vec(2.0, 0.0), qubit_vec(1.0, 0.0)];
        let mps = Mps::product_state(&vs).unwrap();
        assert!((mps.norm_sqr() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn product_state_rejects_mixed_lengths() {
        let vs = vec![qubit_vec(1.0, 0.0), array![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]];
        match Mps::product_state(&vs) {
            Err(MpsError::MixedPhysicalDims { site: 1, got: 3, expected: 2 }) => {}
            other => panic!("expected MixedPhysicalDims, got {other:?}"),
        }
    }

    #[test]
    fn doubled_space_site_vectors_give_four_thirds_norm() {
        // per-site |S_i)) has squared norm 1 + 3/9 = 4/3
        let n = 4;
        let s = crate::shadow_norm::build_s_state(n).unwrap();
        let expect = (4.0f64 / 3.0).powi(n as i32);
        assert!((s.norm_sqr() - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn canonicalize_preserves_product_state_overlap() {
        let vs = vec![qubit_vec(0.6, 0.8), qubit_vec(1.0, 0.0), qubit_vec(0.0, 1.0)];
        let orig = Mps::product_state(&vs).unwrap();
        for center in 0..3 {
            let mut m = orig.clone();
            m.canonicalize(center).unwrap();
            assert_eq!(m.ortho_center(), Some(center));
            let ov = inner(&m, &orig).unwrap();
            let nrm = inner(&orig, &orig).unwrap();
            assert!((ov - nrm).norm() < 1e-12);
            assert!(canonical_defect(&m, center) < 1e-10);
        }
    }

    #[test]
    fn canonicalize_ghz_keeps_unit_norm() {
        let mut g = ghz(5);
        g.canonicalize(0).unwrap();
        assert!((g.norm_sqr() - 1.0).abs() < 1e-12);
        g.canonicalize(4).unwrap();
        assert!((g.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonicalize_random_state_preserves_dense_vector() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let orig = Mps::random_state(6, 2, 5, &mut rng).unwrap();
        let dense_before = dense_vector(&orig).unwrap();
        let norm2 = inner(&orig, &orig).unwrap().re;
        for center in [0, 3, 5] {
            let mut m = orig.clone();
            m.canonicalize(center).unwrap();
            let dense_after = dense_vector(&m).unwrap();
            let err: f64 = dense_before
                .iter()
                .zip(dense_after.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "dense mismatch {err} at center {center}");
            let ov = inner(&m, &orig).unwrap();
            assert!((ov.re - norm2).abs() < 1e-10 && ov.im.abs() < 1e-10);
        }
    }

    #[test]
    fn identity_gate_changes_nothing() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut m = Mps::random_state(5, 2, 4, &mut rng).unwrap();
        let before = dense_vector(&m).unwrap();
        let gate = TwoSiteGate { bond: 2, matrix: Array2::eye(4) };
        let rep = m.apply_two_site_gate(&gate, &TruncationPolicy::exact()).unwrap();
        assert_eq!(rep.discarded_weight, 0.0);
        let after = dense_vector(&m).unwrap();
        let err: f64 = before.iter().zip(after.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn swap_gate_on_01_samples_10() {
        let vs = vec![qubit_vec(1.0, 0.0), qubit_vec(0.0, 1.0)];
        let mut m = Mps::product_state(&vs).unwrap();
        let mut swap = Array2::zeros((4, 4));
        swap[[0, 0]] = c(1.0, 0.0);
        swap[[1, 2]] = c(1.0, 0.0);
        swap[[2, 1]] = c(1.0, 0.0);
        swap[[3, 3]] = c(1.0, 0.0);
        m.apply_two_site_gate(&TwoSiteGate { bond: 0, matrix: swap }, &TruncationPolicy::exact())
            .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(sample_bitstring(&m, &mut rng).unwrap(), vec![1, 0]);
        }
    }

    #[test]
    fn xy_rotation_matches_dense_two_qubit_evolution() {
        // exp(-iθ(XX+YY)) on |01⟩ against the dense 4×4 oracle
        let theta = std::f64::consts::FRAC_PI_4;
        let x = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let y = array![[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]];
        let h = crate::linalg::kron(&x, &x) + crate::linalg::kron(&y, &y);
        let gate = crate::linalg::expm_minus_i_herm(&h, theta).unwrap();

        let vs = vec![qubit_vec(1.0, 0.0), qubit_vec(0.0, 1.0)];
        let mut m = Mps::product_state(&vs).unwrap();
        m.apply_two_site_gate(&TwoSiteGate { bond: 0, matrix: gate.clone() }, &TruncationPolicy::exact())
            .unwrap();
        let got = dense_vector(&m).unwrap();

        let psi0 = array![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let want = gate.dot(&psi0);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).norm() < 1e-12);
        }
        // θ = π/4 sends |01⟩ to -i|10⟩
        assert!((want[2] - c(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn inner_of_ghz_is_one_and_conjugate_symmetric() {
        let g = ghz(6);
        assert!((inner(&g, &g).unwrap().re - 1.0).abs() < 1e-12);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let r = Mps::random_state(6, 2, 3, &mut rng).unwrap();
        let ab = inner(&g, &r).unwrap();
        let ba = inner(&r, &g).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-12);
    }

    #[test]
    fn inner_of_product_states_is_product_of_vector_inners() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let mut draw = |n: usize| -> Vec<Array1<C64>> {
            (0..n)
                .map(|_| array![c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5), c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)])
                .collect()
        };
        let va = draw(4);
        let vb = draw(4);
        let a = Mps::product_state(&va).unwrap();
        let b = Mps::product_state(&vb).unwrap();
        let mut want = c(1.0, 0.0);
        for (x, y) in va.iter().zip(vb.iter()) {
            let site: C64 = x.iter().zip(y.iter()).map(|(p, q)| p.conj() * q).sum();
            want *= site;
        }
        assert!((inner(&a, &b).unwrap() - want).norm() < 1e-12);
    }

    #[test]
    fn gauge_invariance_of_inner() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let a = Mps::random_state(6, 2, 4, &mut rng).unwrap();
        let b = Mps::random_state(6, 2, 5, &mut rng).unwrap();
        let base = inner(&a, &b).unwrap();
        for center in [0, 2, 5] {
            let mut a2 = a.clone();
            a2.canonicalize(center).unwrap();
            assert!((inner(&a2, &b).unwrap() - base).norm() < 1e-10);
            let mut b2 = b.clone();
            b2.canonicalize(center).unwrap();
            assert!((inner(&a, &b2).unwrap() - base).norm() < 1e-10);
        }
    }

    #[test]
    fn expectation_values_on_stabilizer_states() {
        let z = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        let vs = vec![qubit_vec(1.0, 0.0); 3];
        let m = Mps::product_state(&vs).unwrap();
        let e = expect_product_operator(&m, &[OneSiteOperator { site: 1, matrix: z.clone() }]).unwrap();
        assert!((e.re - 1.0).abs() < 1e-12);

        let g = ghz(5);
        let zz = expect_product_operator(
            &g,
            &[
                OneSiteOperator { site: 1, matrix: z.clone() },
                OneSiteOperator { site: 3, matrix: z.clone() },
            ],
        )
        .unwrap();
        assert!((zz.re - 1.0).abs() < 1e-12);
        let single = expect_product_operator(&g, &[OneSiteOperator { site: 2, matrix: z.clone() }]).unwrap();
        assert!(single.norm() < 1e-12);
    }

    #[test]
    fn expectation_rejects_out_of_range_and_duplicates() {
        let z = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        let m = Mps::product_state(&vec![qubit_vec(1.0, 0.0); 2]).unwrap();
        assert!(matches!(
            expect_product_operator(&m, &[OneSiteOperator { site: 5, matrix: z.clone() }]),
            Err(MpsError::SiteOutOfRange { site: 5, n: 2 })
        ));
        assert!(matches!(
            expect_product_operator(
                &m,
                &[
                    OneSiteOperator { site: 0, matrix: z.clone() },
                    OneSiteOperator { site: 0, matrix: z },
                ]
            ),
            Err(MpsError::DuplicateSite(0))
        ));
    }

    #[test]
    fn sampling_ghz_hits_both_branches_evenly() {
        let g = ghz(6);
        let sampler = BitstringSampler::new(&g).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let draws = 2000;
        let mut zeros = 0usize;
        for _ in 0..draws {
            let bits = sampler.sample(&mut rng);
            let ones: usize = bits.iter().map(|&b| b as usize).sum();
            assert!(ones == 0 || ones == 6, "GHZ sample must be uniform string");
            if ones == 0 {
                zeros += 1;
            }
        }
        // 3σ band around p = 1/2
        let sigma = (draws as f64 * 0.25).sqrt();
        assert!((zeros as f64 - draws as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn sampling_uniform_product_state_has_half_marginals() {
        let amp = 1.0 / 2.0_f64.sqrt();
        let vs = vec![qubit_vec(amp, amp); 5];
        let m = Mps::product_state(&vs).unwrap();
        let sampler = BitstringSampler::new(&m).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let draws = 2000;
        let mut ones = vec![0usize; 5];
        for _ in 0..draws {
            for (site, &b) in sampler.sample(&mut rng).iter().enumerate() {
                ones[site] += b as usize;
            }
        }
        let sigma = (draws as f64 * 0.25).sqrt();
        for &count in &ones {
            assert!((count as f64 - draws as f64 / 2.0).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn zero_norm_state_fails_to_sample() {
        let vs = vec![qubit_vec(0.0, 0.0), qubit_vec(1.0, 0.0)];
        let m = Mps::product_state(&vs).unwrap();
        assert!(matches!(sample_bitstring(&m, &mut ChaCha12Rng::seed_from_u64(0)), Err(MpsError::ZeroNorm)));
    }

    #[test]
    fn truncation_reports_are_nonnegative_and_zero_for_exact_ops() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let mut m = Mps::random_state(6, 2, 8, &mut rng).unwrap();
        let h = {
            let x = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
            let z = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
            crate::linalg::kron(&x, &x) + crate::linalg::kron(&z, &z)
        };
        let gate = crate::linalg::expm_minus_i_herm(&h, 0.3).unwrap();
        for bond in 0..5 {
            let rep = m
                .apply_two_site_gate(&TwoSiteGate { bond, matrix: gate.clone() }, &TruncationPolicy::exact())
                .unwrap();
            assert!(rep.discarded_weight >= 0.0);
            assert_eq!(rep.discarded_weight, 0.0);
        }
    }

    #[test]
    fn unitary_schedule_preserves_norm_without_truncation() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let mut m = Mps::random_state(6, 2, 4, &mut rng).unwrap();
        let norm0 = m.norm_sqr();
        let x = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let y = array![[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]];
        let z = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        let h = crate::linalg::kron(&x, &x)
            + crate::linalg::kron(&y, &y)
            + crate::linalg::kron(&z, &z).mapv(|v| v * c(0.7, 0.0));
        for step in 0..10 {
            let tau = 0.1 + 0.03 * step as f64;
            let gate = crate::linalg::expm_minus_i_herm(&h, tau).unwrap();
            for bond in [0, 2, 4, 1, 3] {
                m.apply_two_site_gate(&TwoSiteGate { bond, matrix: gate.clone() }, &TruncationPolicy::exact())
                    .unwrap();
            }
        }
        assert!((m.norm_sqr() - norm0).abs() < 1e-10 * norm0.max(1.0));
    }

    #[test]
    fn truncation_cap_is_respected() {
        let mut rng = ChaCha12Rng::seed_from_u64(4242);
        let mut m = Mps::random_state(8, 2, 16, &mut rng).unwrap();
        m.canonicalize(3).unwrap();
        let x = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let h = crate::linalg::kron(&x, &x);
        let gate = crate::linalg::expm_minus_i_herm(&h, 0.9).unwrap();
        let policy = TruncationPolicy::new(3, 0.0);
        let rep = m.apply_two_site_gate(&TwoSiteGate { bond: 3, matrix: gate }, &policy).unwrap();
        assert!(rep.kept <= 3);
        assert!(m.bond_dims()[4] <= 3);
        assert!(rep.discarded_weight > 0.0);
    }
}
