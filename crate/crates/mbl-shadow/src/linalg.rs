//! Small dense linear-algebra helpers shared across the crate: Kronecker
//! products, Hermitian matrix exponentials, and unitarity checks.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::mps::MpsError;

/// Kronecker product `a ⊗ b` of dense complex matrices.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Kronecker product of dense complex vectors.
pub fn kron_vec(a: &Array1<C64>, b: &Array1<C64>) -> Array1<C64> {
    let mut out = Array1::zeros(a.len() * b.len());
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Conjugate transpose.
pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// `exp(-i h t)` for Hermitian `h`, via eigendecomposition.
///
/// Pass a negative `t` for the reversed phase `exp(+i h |t|)`.
pub fn expm_minus_i_herm(h: &Array2<C64>, t: f64) -> Result<Array2<C64>, MpsError> {
    let (vals, vecs) = h
        .eigh(UPLO::Lower)
        .map_err(|e| MpsError::Backend(e.to_string()))?;
    let phases: Array1<C64> = vals.mapv(|v| C64::from_polar(1.0, -v * t));
    // V diag(e^{-iλt}) V†
    let mut scaled = vecs.clone();
    for (mut col, ph) in scaled.columns_mut().into_iter().zip(phases.iter()) {
        col.mapv_inplace(|z| z * ph);
    }
    Ok(scaled.dot(&dagger(&vecs)))
}

/// Embed a one-qubit operator at `site` of an `n`-qubit register.
///
/// Dense indices order site 0 as the most significant bit.
pub fn embed_one_qubit(m: &Array2<C64>, site: usize, n: usize) -> Array2<C64> {
    debug_assert_eq!(m.dim(), (2, 2));
    debug_assert!(site < n);
    let dim = 1usize << n;
    let shift = n - 1 - site;
    let mut out = Array2::zeros((dim, dim));
    for col in 0..dim {
        let a = (col >> shift) & 1;
        for a_new in 0..2 {
            let w = m[[a_new, a]];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            let row = (col & !(1 << shift)) | (a_new << shift);
            out[[row, col]] += w;
        }
    }
    out
}

/// Embed a two-qubit operator on qubit positions `(pos_a, pos_b)` of an
/// `n`-qubit register; `pos_a` indexes the more significant factor of the
/// 4-dimensional operator basis.
pub fn embed_two_qubit(m: &Array2<C64>, pos_a: usize, pos_b: usize, n: usize) -> Array2<C64> {
    debug_assert_eq!(m.dim(), (4, 4));
    debug_assert!(pos_a < n && pos_b < n && pos_a != pos_b);
    let dim = 1usize << n;
    let sa = n - 1 - pos_a;
    let sb = n - 1 - pos_b;
    let mut out = Array2::zeros((dim, dim));
    for col in 0..dim {
        let a = (col >> sa) & 1;
        let b = (col >> sb) & 1;
        let src = a * 2 + b;
        for a_new in 0..2 {
            for b_new in 0..2 {
                let w = m[[a_new * 2 + b_new, src]];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = (col & !(1 << sa) & !(1 << sb)) | (a_new << sa) | (b_new << sb);
                out[[row, col]] += w;
            }
        }
    }
    out
}

/// Max-norm deviation of `m† m` from the identity.
pub fn unitarity_defect(m: &Array2<C64>) -> f64 {
    let p = dagger(m).dot(m);
    let mut worst = 0.0_f64;
    for ((i, j), z) in p.indexed_iter() {
        let want = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        worst = worst.max((z - want).norm());
    }
    worst
}

/// Max-norm deviation of `m` from Hermiticity.
pub fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let d = dagger(m);
    (&d - m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn fro_norm(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
