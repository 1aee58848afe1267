//! Property tests for the model invariants: probability normalization,
//! switch symmetry, log-ratio linearity, scale equivariance, the classical
//! special cases, and the gradient identity.

use proptest::prelude::*;

use elo_mov::model::{DiscretizationScheme, ModelCoefficients};

/// Builds valid coefficients from free values: mirrored alpha, positive
/// normalized gaps for the increasing delta, arbitrary eta and sigma.
fn build_coefficients(
    j: usize,
    alpha_free: &[f64],
    gaps: &[f64],
    eta: f64,
    sigma: f64,
) -> ModelCoefficients {
    let n_pos = j - j / 2;
    assert_eq!(gaps.len(), n_pos);
    let total: f64 = gaps.iter().sum();
    let mut alpha = vec![0.0; j + 1];
    for (k, &a) in alpha_free.iter().enumerate() {
        alpha[k + 1] = a;
        alpha[j - (k + 1)] = a;
    }
    let mut delta = vec![0.0; j + 1];
    let mut cum = 0.0;
    for (i, &g) in gaps.iter().enumerate() {
        cum += g / total;
        let h = j - n_pos + i + 1;
        let value = if h == j { 1.0 } else { cum };
        delta[h] = value;
        delta[j - h] = -value;
    }
    ModelCoefficients::new(alpha, delta, eta, sigma).unwrap()
}

fn coefficients_strategy(j: usize) -> impl Strategy<Value = ModelCoefficients> {
    let n_alpha = j / 2;
    let n_pos = j - j / 2;
    (
        prop::collection::vec(-1.5..1.5f64, n_alpha),
        prop::collection::vec(0.05..1.0f64, n_pos),
        -0.5..0.5f64,
        50.0..800.0f64,
    )
        .prop_map(move |(alpha_free, gaps, eta, sigma)| {
            build_coefficients(j, &alpha_free, &gaps, eta, sigma)
        })
}

fn any_coefficients() -> impl Strategy<Value = ModelCoefficients> {
    prop::sample::select(vec![1usize, 2, 4, 6]).prop_flat_map(coefficients_strategy)
}

proptest! {
    #[test]
    fn probabilities_form_a_simplex(coeffs in any_coefficients(), zu in -6.0..6.0f64) {
        let z = zu * coeffs.sigma();
        for include_hfa in [false, true] {
            let p = coeffs.category_probs(z, include_hfa).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn switch_symmetry_without_hfa(coeffs in any_coefficients(), zu in -6.0..6.0f64) {
        let z = zu * coeffs.sigma();
        let j = coeffs.j();
        let fwd = coeffs.category_probs(z, false).unwrap();
        let rev = coeffs.category_probs(-z, false).unwrap();
        for h in 0..=j {
            prop_assert!((rev[h] - fwd[j - h]).abs() <= 1e-12);
        }
    }

    #[test]
    fn log_probability_ratios_are_linear(coeffs in any_coefficients(), zu in -3.0..3.0f64) {
        let z = zu * coeffs.sigma();
        let p = coeffs.category_probs(z, false).unwrap();
        let (alpha, delta) = (coeffs.alpha(), coeffs.delta());
        for h in 0..=coeffs.j() {
            for l in 0..=coeffs.j() {
                let observed = (p[h] / p[l]).log10();
                let predicted = (alpha[h] - alpha[l]) + (delta[h] - delta[l]) * z / coeffs.sigma();
                prop_assert!((observed - predicted).abs() <= 1e-9,
                    "h={h} l={l}: {observed} vs {predicted}");
            }
        }
    }

    #[test]
    fn scale_equivariance(coeffs in any_coefficients(), zu in -3.0..3.0f64, c in 0.1..10.0f64) {
        let z = zu * coeffs.sigma();
        let scaled = ModelCoefficients::new(
            coeffs.alpha().to_vec(),
            coeffs.delta().to_vec(),
            coeffs.eta(),
            coeffs.sigma() * c,
        ).unwrap();
        let a = coeffs.category_probs(z, true).unwrap();
        let b = scaled.category_probs(z * c, true).unwrap();
        for h in 0..=coeffs.j() {
            prop_assert!((a[h] - b[h]).abs() <= 1e-12);
        }
    }

    #[test]
    fn binary_case_reduces_to_bradley_terry(zu in -4.0..4.0f64, sigma in 50.0..800.0f64) {
        let z = zu * sigma;
        let coeffs = ModelCoefficients::bradley_terry(0.0, sigma).unwrap();
        let p = coeffs.category_probs(z, false).unwrap();
        let win = 10f64.powf(z / sigma) / (10f64.powf(z / sigma) + 10f64.powf(-z / sigma));
        prop_assert!((p[1] - win).abs() <= 1e-12);
        prop_assert!((p[0] - (1.0 - win)).abs() <= 1e-12);
        let g = coeffs.expected_score(z, false).unwrap();
        prop_assert!((g - win).abs() <= 1e-12);
    }

    #[test]
    fn ternary_case_reduces_to_davidson(
        zu in -4.0..4.0f64,
        kappa in 0.05..20.0f64,
        sigma in 50.0..800.0f64,
    ) {
        let z = zu * sigma;
        let coeffs = ModelCoefficients::davidson(kappa, 0.0, sigma).unwrap();
        let p = coeffs.category_probs(z, false).unwrap();
        let up = 10f64.powf(z / sigma);
        let down = 10f64.powf(-z / sigma);
        let denom = up + kappa + down;
        prop_assert!((p[2] - up / denom).abs() <= 1e-12);
        prop_assert!((p[1] - kappa / denom).abs() <= 1e-12);
        prop_assert!((p[0] - down / denom).abs() <= 1e-12);
        // Expected score in closed form.
        let g = coeffs.expected_score(z, false).unwrap();
        prop_assert!((g - (up + kappa / 2.0) / denom).abs() <= 1e-12);
    }

    #[test]
    fn expected_score_is_score_weighted_probability_sum(
        coeffs in any_coefficients(),
        zu in -4.0..4.0f64,
    ) {
        let z = zu * coeffs.sigma();
        let p = coeffs.category_probs(z, false).unwrap();
        let scores = coeffs.score_map();
        let weighted: f64 = scores.scores().iter().zip(&p).map(|(&s, &q)| s * q).sum();
        let g = coeffs.expected_score(z, false).unwrap();
        prop_assert!((g - weighted).abs() <= 1e-15);
    }

    #[test]
    fn gradient_matches_finite_difference(
        coeffs in any_coefficients(),
        zu in -3.0..3.0f64,
        y_raw in 0usize..16,
    ) {
        let z = zu * coeffs.sigma();
        let y = y_raw % (coeffs.j() + 1);
        let h = 1e-5 * coeffs.sigma() / 400.0;
        let analytic = coeffs.grad_z(y, z).unwrap();
        let plus = coeffs.log_likelihood(y, z + h).unwrap();
        let minus = coeffs.log_likelihood(y, z - h).unwrap();
        let fd = (plus - minus) / (2.0 * h);
        // 1e-6 relative, plus the rounding floor of the difference quotient.
        let fd_noise = 16.0 * f64::EPSILON * plus.abs().max(minus.abs()).max(1.0) / h;
        prop_assert!((analytic - fd).abs() <= 1e-6 * analytic.abs() + fd_noise);
    }

    #[test]
    fn log_likelihood_is_log_of_probability(
        coeffs in any_coefficients(),
        zu in -4.0..4.0f64,
        y_raw in 0usize..16,
    ) {
        let z = zu * coeffs.sigma();
        let y = y_raw % (coeffs.j() + 1);
        let l = coeffs.log_likelihood(y, z).unwrap();
        let p = coeffs.category_probs(z, false).unwrap()[y];
        prop_assert!((l - p.ln()).abs() <= 1e-12);
        prop_assert!(l <= 0.0);
    }

    #[test]
    fn discretization_total_and_symmetric(
        raw in prop::collection::btree_set(1u32..40, 0..3),
        d in -100i32..100,
    ) {
        let scheme = DiscretizationScheme::new(raw.into_iter().collect()).unwrap();
        let y = scheme.categorize(d);
        prop_assert!(y <= scheme.j());
        prop_assert_eq!(scheme.categorize(-d), scheme.j() - y);
        let representative = scheme.representative_margin(y).unwrap();
        prop_assert_eq!(scheme.categorize(representative), y);
    }
}
