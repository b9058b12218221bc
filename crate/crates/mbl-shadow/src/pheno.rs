//! Closed-form and Monte Carlo evaluation of the dephasing pseudospin model:
//! exponentially localized two-body couplings, the exact and
//! disorder-averaged channel eigenvalue of a Z·X pair, per-site factor rules,
//! and the asymptotic scaling law with its logarithmic-lightcone correction.
//!
//! Couplings decay as `J_ij = Ĵ_ij e^{-|i-j|/ξ}` with `Ĵ_ij` uniform on
//! `[-J₀, J₀]`; the dephasing field is dropped since it creates no
//! entanglement between pseudospins. The pair formulas place the Z·X pair at
//! the chain center by default so the operator spreads into both halves,
//! matching the two-boundary counting of the scaling law.

use ndarray::Array2;
use rand::Rng;
use thiserror::Error;

use crate::seeding;

#[derive(Debug, Error)]
pub enum PhenoError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("chain needs at least 2 sites, got {0}")]
    TooFewSites(usize),
}

/// Parameters of the localized-coupling ensemble.
///
/// `t` is carried here because the disorder-averaged formulas are functions
/// of one evolution time per evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhenoParams {
    pub n: usize,
    pub xi: f64,
    pub j0: f64,
    pub t: f64,
    pub seed: u64,
}

impl PhenoParams {
    pub fn validate(&self) -> Result<(), PhenoError> {
        if self.n < 2 {
            return Err(PhenoError::TooFewSites(self.n));
        }
        if self.xi <= 0.0 {
            return Err(PhenoError::NonPositive { name: "xi", value: self.xi });
        }
        if self.j0 <= 0.0 {
            return Err(PhenoError::NonPositive { name: "j0", value: self.j0 });
        }
        if self.t < 0.0 {
            return Err(PhenoError::NegativeTime(self.t));
        }
        Ok(())
    }

    /// 0-based site carrying the Z factor of the centered pair; the X factor
    /// sits one site to its right.
    pub fn pair_z_site(&self) -> usize {
        crate::shadow_norm::centered_region(self.n, 2).start
    }
}

/// `sin(x)/x`, continued by 1 at the origin: the characteristic function of
/// the uniform coupling distribution.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Draw one symmetric coupling matrix `J_ij = Ĵ_ij e^{-|i-j|/ξ}`,
/// deterministic in the seed; the diagonal is zero.
pub fn sample_couplings(params: &PhenoParams) -> Result<Array2<f64>, PhenoError> {
    params.validate()?;
    let mut rng = seeding::stream_rng(params.seed, seeding::DISORDER_STREAM);
    let n = params.n;
    let mut j = Array2::zeros((n, n));
    for a in 0..n {
        for b in a + 1..n {
            let raw = (2.0 * rng.gen::<f64>() - 1.0) * params.j0;
            let value = raw * (-((b - a) as f64) / params.xi).exp();
            j[[a, b]] = value;
            j[[b, a]] = value;
        }
    }
    Ok(j)
}

/// Exact channel eigenvalue of a Z·X pair for one coupling realization:
///
/// `(1/3)(sin²(2 J₁₂ t) + cos²(2 J₁₂ t)/3) · Π_j (cos²(2 J_Xj t) + sin²(2 J_Xj t)/3)`
///
/// where `j12` couples the pair and `x_couplings` lists the X-site couplings
/// to every other site.
pub fn lambda_pair_exact(x_couplings: &[f64], j12: f64, t: f64) -> f64 {
    let (s, c) = (2.0 * j12 * t).sin_cos();
    let mut value = (s * s + c * c / 3.0) / 3.0;
    for &jx in x_couplings {
        let (s, c) = (2.0 * jx * t).sin_cos();
        value *= c * c + s * s / 3.0;
    }
    value
}

/// X-site distances of a centered pair: every site except the pair itself,
/// measured from the X site.
fn pair_distances(params: &PhenoParams) -> Vec<usize> {
    let z = params.pair_z_site();
    let x = z + 1;
    (0..params.n)
        .filter(|&j| j != z && j != x)
        .map(|j| j.abs_diff(x))
        .collect()
}

/// Disorder average of [`lambda_pair_exact`] over the uniform coupling
/// ensemble:
///
/// `(1/3)(2/3 − f(4 J₀ e^{−1/ξ} t)/3) · Π_j (2/3 + f(4 J₀ e^{−d_j/ξ} t)/3)`
///
/// with `f = sinc` and `d_j` the distances from the X site.
pub fn lambda_pair_avg(params: &PhenoParams) -> Result<f64, PhenoError> {
    params.validate()?;
    let f12 = sinc(4.0 * params.j0 * (-1.0 / params.xi).exp() * params.t);
    let mut value = (2.0 / 3.0 - f12 / 3.0) / 3.0;
    for d in pair_distances(params) {
        let f = sinc(4.0 * params.j0 * (-(d as f64) / params.xi).exp() * params.t);
        value *= 2.0 / 3.0 + f / 3.0;
    }
    Ok(value)
}

/// Monte Carlo average of [`lambda_pair_exact`] over fresh coupling draws,
/// with the same geometry as [`lambda_pair_avg`]. Returns (mean, stderr).
pub fn mc_lambda_pair(params: &PhenoParams, draws: usize) -> Result<(f64, f64), PhenoError> {
    params.validate()?;
    let mut rng = seeding::stream_rng(params.seed, seeding::MONTE_CARLO_STREAM);
    let distances = pair_distances(params);
    let decay_pair = (-1.0 / params.xi).exp();
    let decays: Vec<f64> = distances.iter().map(|&d| (-(d as f64) / params.xi).exp()).collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut x_couplings = vec![0.0; decays.len()];
    for _ in 0..draws {
        let j12 = (2.0 * rng.gen::<f64>() - 1.0) * params.j0 * decay_pair;
        for (slot, &decay) in x_couplings.iter_mut().zip(decays.iter()) {
            *slot = (2.0 * rng.gen::<f64>() - 1.0) * params.j0 * decay;
        }
        let v = lambda_pair_exact(&x_couplings, j12, params.t);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / draws as f64;
    let var = (sum_sq / draws as f64 - mean * mean).max(0.0);
    let stderr = if draws > 1 { (var / (draws as f64 - 1.0)).sqrt() } else { 0.0 };
    Ok((mean, stderr))
}

/// Number of sites inside the logarithmic lightcone after time `t`:
/// `2 ξ ln(J₀ t)` once `J₀ t > 1`, zero before.
pub fn lightcone_width(xi: f64, j0: f64, t: f64) -> f64 {
    let arg = j0 * t;
    if arg <= 1.0 {
        0.0
    } else {
        2.0 * xi * arg.ln()
    }
}

/// Lightcone width saturated at the number of sites outside the operator
/// support (`n - k`).
pub fn lightcone_width_clipped(xi: f64, j0: f64, t: f64, n: usize, k: usize) -> f64 {
    lightcone_width(xi, j0, t).min(n.saturating_sub(k) as f64)
}

/// Whether the asymptotic scaling law is inside its validity window
/// `J₀ e^{−1/ξ} t ≥ 3`.
pub fn statement1_in_regime(xi: f64, j0: f64, t: f64) -> bool {
    j0 * (-1.0 / xi).exp() * t >= 3.0
}

/// Asymptotic channel eigenvalue for a random length-`k` operator:
/// `(4/9)^k (2/3)^{2 ξ ln(J₀ t)}`, natural logarithm.
///
/// This is the raw closed form; callers should gate physical use on
/// [`statement1_in_regime`].
pub fn lambda_statement1(k: usize, xi: f64, j0: f64, t: f64) -> Result<f64, PhenoError> {
    let arg = j0 * t;
    if arg <= 0.0 {
        return Err(PhenoError::NonPositive { name: "j0 * t", value: arg });
    }
    Ok((4.0_f64 / 9.0).powi(k as i32) * (2.0_f64 / 3.0).powf(lightcone_width(xi, j0, t)))
}

/// Initial single-site content classes for the factor rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteClass {
    /// Initially X or Y: scrambles within {X, Y}.
    XorY,
    /// Initially Z: mixes with the identity.
    Z,
    /// No initial support: only participates once the lightcone arrives.
    Untouched,
}

/// Per-site contribution to Σ_n P(n) 3^{-n} after scrambling.
pub fn sitewise_factor(class: SiteClass, in_lightcone: bool) -> f64 {
    match class {
        SiteClass::XorY => 1.0 / 3.0,
        SiteClass::Z => 2.0 / 3.0,
        SiteClass::Untouched => {
            if in_lightcone {
                2.0 / 3.0
            } else {
                1.0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{pauli_weight_distribution, DenseOperator, HamiltonianEigen};
    use crate::pauli::{PauliAxis, PauliString};
    use num_complex::Complex64 as C64;

    fn params(n: usize, xi: f64, j0: f64, t: f64, seed: u64) -> PhenoParams {
        PhenoParams { n, xi, j0, t, seed }
    }

    #[test]
    fn couplings_respect_bound_symmetry_and_determinism() {
        let p = params(12, 0.7, 1.5, 0.0, 42);
        let j = sample_couplings(&p).unwrap();
        let j2 = sample_couplings(&p).unwrap();
        assert_eq!(j, j2);
        for a in 0..12 {
            assert_eq!(j[[a, a]], 0.0);
            for b in 0..12 {
                assert_eq!(j[[a, b]], j[[b, a]]);
                let bound = 1.5 * (-(a.abs_diff(b) as f64) / 0.7).exp();
                assert!(j[[a, b]].abs() <= bound + 1e-15);
            }
        }
    }

    #[test]
    fn couplings_vanish_for_tiny_localization_length() {
        let p = params(6, 1e-3, 1.0, 0.0, 1);
        let j = sample_couplings(&p).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                if a != b {
                    assert_eq!(j[[a, b]], 0.0, "e^{{-1000}} underflows to exactly zero");
                }
            }
        }
    }

    #[test]
    fn coupling_statistics_at_fixed_distance() {
        // 10⁴ draws of the distance-3 coupling: mean within 3σ of 0
        let r = 3usize;
        let xi = 1.1;
        let j0 = 2.0;
        let decay = (-(r as f64) / xi).exp();
        let mut values = Vec::with_capacity(10_000);
        for seed in 0..10_000u64 {
            let p = params(5, xi, j0, 0.0, seed);
            let j = sample_couplings(&p).unwrap();
            values.push(j[[0, r]]);
        }
        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        let sigma_mean = j0 * decay / 3.0_f64.sqrt() / (values.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma_mean, "{mean} vs σ {sigma_mean}");
        assert!(values.iter().all(|v| v.abs() <= j0 * decay));
    }

    #[test]
    fn pair_exact_baseline_values() {
        // t = 0: 3^{-2}
        assert!((lambda_pair_exact(&[0.3, 0.1], 0.7, 0.0) - 1.0 / 9.0).abs() < 1e-15);
        // lone pair coupling at 2 J t = π/2: (1/3)·1
        let t = std::f64::consts::FRAC_PI_2 / 2.0;
        assert!((lambda_pair_exact(&[], 1.0, t) - 1.0 / 3.0).abs() < 1e-12);
        // value stays in (0, 1/3]
        for i in 0..50 {
            let v = lambda_pair_exact(&[0.4, 0.2, 0.05], 0.9, 0.1 * i as f64);
            assert!(v > 0.0 && v <= 1.0 / 3.0 + 1e-12);
        }
    }

    #[test]
    fn pair_exact_matches_dense_commuting_evolution() {
        // Z₀X₁ under a dense all-to-all ZZ Hamiltonian at N=6, three draws
        let n = 6;
        for seed in [3u64, 14, 59] {
            let p = params(n, 0.8, 1.3, 0.9, seed);
            let j = sample_couplings(&p).unwrap();
            let dim = 1usize << n;
            let mut h = ndarray::Array2::<C64>::zeros((dim, dim));
            for a in 0..n {
                for b in a + 1..n {
                    let za = crate::linalg::embed_one_qubit(&PauliAxis::Z.matrix(), a, n);
                    let zb = crate::linalg::embed_one_qubit(&PauliAxis::Z.matrix(), b, n);
                    h = h + za.dot(&zb).mapv(|v| v * C64::from(j[[a, b]]));
                }
            }
            let eig = HamiltonianEigen::new(&DenseOperator::new(n, h).unwrap()).unwrap();
            let o = crate::oracle::dense_pauli(&PauliString::parse("+Z0X1").unwrap(), n).unwrap();
            let evolved = eig.heisenberg_evolve(&o.matrix, -p.t);
            let dist = pauli_weight_distribution(&DenseOperator::new(n, evolved).unwrap()).unwrap();
            let x_couplings: Vec<f64> = (2..n).map(|k| j[[1, k]]).collect();
            let formula = lambda_pair_exact(&x_couplings, j[[0, 1]], p.t);
            assert!(
                (dist.lambda() - formula).abs() < 1e-10,
                "seed {seed}: dense {} vs formula {formula}",
                dist.lambda()
            );
        }
    }

    #[test]
    fn pair_average_baseline_and_asymptotics() {
        let p0 = params(8, 0.5, 1.0, 0.0, 0);
        assert!((lambda_pair_avg(&p0).unwrap() - 1.0 / 9.0).abs() < 1e-15);

        // finite chain, t → ∞: every f → 0, so the value approaches
        // (1/3)(2/3) · (2/3)^{n-2}; at n = 4 that is 8/81
        let p = params(4, 0.5, 1.0, 1.0e8, 0);
        let limit = 8.0 / 81.0;
        let got = lambda_pair_avg(&p).unwrap();
        assert!((got - limit).abs() / limit < 0.02, "{got} vs {limit}");

        // moderate time on a longer chain: far sites still untouched, so the
        // value stays well above the all-dephased floor
        let p = params(16, 0.5, 1.0, 30.0, 0);
        let floor = (2.0 / 9.0) * (2.0_f64 / 3.0).powi(14);
        let got = lambda_pair_avg(&p).unwrap();
        assert!(got > 10.0 * floor, "far factors must stay near 1: {got} vs floor {floor}");
    }

    #[test]
    fn mc_average_agrees_with_closed_form() {
        let p = params(8, 0.5, 1.0, 1.7, 11);
        let (mean, stderr) = mc_lambda_pair(&p, 20_000).unwrap();
        let want = lambda_pair_avg(&p).unwrap();
        assert!(
            (mean - want).abs() < 3.0 * stderr,
            "mc {mean} ± {stderr} vs exact {want}"
        );
    }

    #[test]
    fn statement1_baseline_and_arithmetic() {
        // J₀ t = 1: the lightcone factor is 1
        for k in 0..5 {
            let v = lambda_statement1(k, 1.0, 2.0, 0.5).unwrap();
            assert!((v - (4.0_f64 / 9.0).powi(k as i32)).abs() < 1e-15);
        }
        // k = 2, ξ = 1, J₀ t = e: (4/9)² (2/3)² = 64/729
        let v = lambda_statement1(2, 1.0, 1.0, std::f64::consts::E).unwrap();
        assert!((v - 64.0 / 729.0).abs() < 1e-12);
        // implied norm scaling: ||O||² ∝ (9/4)^k at fixed t
        let t = 40.0;
        let norm_ratio = lambda_statement1(3, 1.0, 1.0, t).unwrap()
            / lambda_statement1(4, 1.0, 1.0, t).unwrap();
        assert!((norm_ratio - 2.25).abs() < 1e-12);
        assert!(lambda_statement1(2, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn consistency_chain_is_exact() {
        for (k, xi, j0, t) in [(1usize, 0.5, 1.0, 7.0), (3, 1.2, 2.0, 31.0), (5, 0.8, 0.7, 900.0)] {
            let direct = lambda_statement1(k, xi, j0, t).unwrap();
            let via_factors =
                (4.0_f64 / 9.0).powi(k as i32) * (2.0_f64 / 3.0).powf(lightcone_width(xi, j0, t));
            assert_eq!(direct, via_factors);
        }
    }

    #[test]
    fn lightcone_width_examples() {
        assert_eq!(lightcone_width(1.0, 1.0, 1.0), 0.0);
        assert_eq!(lightcone_width(0.5, 2.0, 0.4), 0.0);
        let w = lightcone_width(1.0, 1.0, std::f64::consts::E.powi(2));
        assert!((w - 4.0).abs() < 1e-12);
        // clipping saturates at n - k
        assert_eq!(lightcone_width_clipped(1.0, 1.0, 1.0e9, 10, 2), 8.0);
    }

    #[test]
    fn sitewise_factors_match_the_rules() {
        assert_eq!(sitewise_factor(SiteClass::XorY, true), 1.0 / 3.0);
        assert_eq!(sitewise_factor(SiteClass::XorY, false), 1.0 / 3.0);
        assert_eq!(sitewise_factor(SiteClass::Z, true), 2.0 / 3.0);
        assert_eq!(sitewise_factor(SiteClass::Untouched, true), 2.0 / 3.0);
        assert_eq!(sitewise_factor(SiteClass::Untouched, false), 1.0);
    }

    #[test]
    fn regime_guard_follows_the_validity_window() {
        assert!(!statement1_in_regime(0.5, 1.0, 10.0)); // e^{-2}·10 ≈ 1.35
        assert!(statement1_in_regime(0.5, 1.0, 30.0)); // e^{-2}·30 ≈ 4.06
        assert!(statement1_in_regime(1.0, 3.0, 3.0));
    }

    #[test]
    fn long_time_pair_average_tracks_statement1() {
        // The pair average crosses lightcone radii in discrete steps while
        // the scaling law moves continuously, so the pointwise ratio
        // oscillates with period e^{1/ξ} in t; agreement at phenomenological
        // accuracy means the window-averaged ratio stays near 1.
        let xi = 0.5;
        let points = 9;
        let mut log_ratio_sum = 0.0;
        for i in 0..points {
            let j0t = 10.0_f64 * 10.0_f64.powf(i as f64 / (points - 1) as f64);
            let p = params(24, xi, 1.0, j0t, 0);
            let avg = lambda_pair_avg(&p).unwrap();
            let s1 = lambda_statement1(2, xi, 1.0, j0t).unwrap();
            let ratio = avg / s1;
            assert!(
                (0.5..2.0).contains(&ratio),
                "J0t = {j0t}: pointwise ratio {ratio} outside the oscillation envelope"
            );
            log_ratio_sum += ratio.ln();
        }
        let geometric_mean = (log_ratio_sum / points as f64).exp();
        assert!(
            (geometric_mean - 1.0).abs() < 0.25,
            "window-averaged ratio {geometric_mean} deviates beyond 25%"
        );
    }

    #[test]
    fn single_draw_time_average_converges_to_disorder_average() {
        let xi = 0.5;
        let j0 = 1.0;
        let t_start = 50.0;
        let samples = 4001;
        let p_seed = params(8, xi, j0, 0.0, 5);
        let j = sample_couplings(&p_seed).unwrap();
        let z = p_seed.pair_z_site();
        let x = z + 1;
        let x_couplings: Vec<f64> =
            (0..8).filter(|&s| s != z && s != x).map(|s| j[[x, s]]).collect();
        let mut exact_mean = 0.0;
        let mut avg_mean = 0.0;
        for i in 0..samples {
            let t = t_start + t_start * i as f64 / (samples - 1) as f64;
            exact_mean += lambda_pair_exact(&x_couplings, j[[z, x]], t);
            avg_mean += lambda_pair_avg(&params(8, xi, j0, t, 0)).unwrap();
        }
        exact_mean /= samples as f64;
        avg_mean /= samples as f64;
        let rel = (exact_mean / avg_mean - 1.0).abs();
        assert!(rel < 0.05, "time-averaged {exact_mean} vs disorder-averaged {avg_mean} ({rel})");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(matches!(
            sample_couplings(&params(1, 1.0, 1.0, 0.0, 0)),
            Err(PhenoError::TooFewSites(1))
        ));
        assert!(matches!(
            sample_couplings(&params(4, 0.0, 1.0, 0.0, 0)),
            Err(PhenoError::NonPositive { name: "xi", .. })
        ));
        assert!(matches!(
            lambda_pair_avg(&params(4, 1.0, 1.0, -1.0, 0)),
            Err(PhenoError::NegativeTime(_))
        ));
    }
}
