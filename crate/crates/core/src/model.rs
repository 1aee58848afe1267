//! Adjacent-categories model over discretized margin-of-victory outcomes.
//!
//! A game result is the ordinal category `y` of the signed point difference
//! `d`, and the model ties category probabilities to the rating difference
//! `z` through
//!
//! ```text
//! P_h(z) ∝ 10^(alpha_h + delta_h * z / sigma),   h = 0..=J
//! ```
//!
//! With the symmetry constraints `alpha_h = alpha_{J-h}`,
//! `delta_h = -delta_{J-h}` and the pins `alpha_0 = alpha_J = 0`,
//! `delta_J = -delta_0 = 1`, the model reduces to Bradley-Terry at J=1 and to
//! the Davidson draw model at J=2. The derived scores
//! `delta~_h = (delta_h - delta_0) / 2` live in [0, 1] and play the role of
//! the classical Elo game score; their probability-weighted mean `G(z)` is
//! the expected score.

use serde::{Deserialize, Deserializer, Serialize};
use std::f64::consts::LN_10;
use thiserror::Error;

/// Tolerance for the symmetry checks performed at construction time.
const SYMMETRY_TOL: f64 = 1e-9;
/// Strictness tolerance for the ordinality condition (delta increasing).
const STRICT_INCREASE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid discretization scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("rating difference must be finite, got {0}")]
    NonFiniteRating(f64),
    #[error("category {category} out of range for J={j}")]
    CategoryOutOfRange { category: usize, j: usize },
    #[error("expected score {0} is only reached asymptotically")]
    UnreachableScore(f64),
}

/// Maps an integer game-point difference to one of J+1 ordinal categories.
///
/// `thresholds` lists the strictly increasing positive margins that separate
/// the home-win categories; away-win categories mirror them, and `d = 0` is
/// always its own draw category. An empty threshold list is the plain
/// ternary win/draw/loss scheme (J = 2); `[2]` gives the five-level scheme
/// (J = 4) with weak wins decided by at most two points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscretizationScheme {
    thresholds: Vec<u32>,
}

impl DiscretizationScheme {
    pub fn new(thresholds: Vec<u32>) -> Result<Self, ModelError> {
        if thresholds.contains(&0) {
            return Err(ModelError::InvalidScheme(
                "thresholds must be positive".into(),
            ));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidScheme(
                "thresholds must be strictly increasing".into(),
            ));
        }
        Ok(Self { thresholds })
    }

    /// The ternary win/draw/loss scheme (J = 2).
    pub fn ternary() -> Self {
        Self { thresholds: Vec::new() }
    }

    pub fn thresholds(&self) -> &[u32] {
        &self.thresholds
    }

    /// Highest category index; there are J+1 categories and J is even.
    pub fn j(&self) -> usize {
        2 * (self.thresholds.len() + 1)
    }

    pub fn categories(&self) -> usize {
        self.j() + 1
    }

    /// Index of the draw category (J/2).
    pub fn draw_category(&self) -> usize {
        self.j() / 2
    }

    /// Category of a signed point difference. Total over all integers and
    /// symmetric: `categorize(-d) == J - categorize(d)`.
    pub fn categorize(&self, margin: i32) -> usize {
        let margin = margin as i64;
        if margin == 0 {
            return self.draw_category();
        }
        if margin > 0 {
            let above = self
                .thresholds
                .iter()
                .filter(|&&t| (t as i64) < margin)
                .count();
            self.draw_category() + 1 + above
        } else {
            let below = self
                .thresholds
                .iter()
                .filter(|&&t| (t as i64) < -margin)
                .count();
            self.draw_category() - 1 - below
        }
    }

    /// Smallest-magnitude margin inside a category's interval, e.g. the
    /// representative of "home win by more than 2" is 3. Inverts
    /// `categorize` exactly.
    pub fn representative_margin(&self, category: usize) -> Result<i32, ModelError> {
        let j = self.j();
        if category > j {
            return Err(ModelError::CategoryOutOfRange { category, j });
        }
        let mid = self.draw_category();
        if category == mid {
            return Ok(0);
        }
        if category > mid {
            let step = category - mid;
            let lower = if step == 1 { 0 } else { self.thresholds[step - 2] };
            Ok(lower as i32 + 1)
        } else {
            Ok(-self.representative_margin(j - category)?)
        }
    }

    /// Human-readable label for a category, e.g. `"home win by 3+"`.
    pub fn describe(&self, category: usize) -> String {
        let mid = self.draw_category();
        if category == mid {
            return "draw".to_string();
        }
        let (side, step) = if category > mid {
            ("home", category - mid)
        } else {
            ("away", mid - category)
        };
        let k = self.thresholds.len();
        if k == 0 {
            return format!("{side} win");
        }
        if step == k + 1 {
            format!("{side} win by {}+", self.thresholds[k - 1] + 1)
        } else {
            let lower = if step == 1 { 1 } else { self.thresholds[step - 2] + 1 };
            let upper = self.thresholds[step - 1];
            if lower == upper {
                format!("{side} win by {lower}")
            } else {
                format!("{side} win by {lower}-{upper}")
            }
        }
    }
}

/// Softmax over `[logits.., 0]`: positive gaps that sum to one. The pinned
/// final logit removes the scale redundancy of the softmax.
pub(crate) fn gaps_from_logits(gap_logits: &[f64]) -> Vec<f64> {
    let max_logit = gap_logits.iter().fold(0.0_f64, |m, &u| m.max(u));
    let mut gaps: Vec<f64> = gap_logits.iter().map(|&u| (u - max_logit).exp()).collect();
    gaps.push((-max_logit).exp());
    let total: f64 = gaps.iter().sum();
    for g in &mut gaps {
        *g /= total;
    }
    gaps
}

/// Builds full (alpha, delta) vectors from the free parameters: the
/// independent alpha entries `alpha_1..alpha_ceil(J/2)` and the positive-side
/// delta gap logits (softmax with the last logit pinned to zero). All
/// symmetry pins hold exactly on the output.
pub(crate) fn vectors_from_free(
    j: usize,
    alpha_free: &[f64],
    gap_logits: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n_alpha = j / 2;
    let n_pos = j - j / 2;
    debug_assert_eq!(alpha_free.len(), n_alpha);
    debug_assert_eq!(gap_logits.len(), n_pos - 1);

    let mut alpha = vec![0.0; j + 1];
    for (k, &a) in alpha_free.iter().enumerate() {
        alpha[k + 1] = a;
        alpha[j - (k + 1)] = a;
    }

    let gaps = gaps_from_logits(gap_logits);
    let mut delta = vec![0.0; j + 1];
    let mut cum = 0.0;
    for (i, g) in gaps.iter().enumerate() {
        cum += g;
        let h = j - n_pos + i + 1;
        let value = if h == j { 1.0 } else { cum };
        delta[h] = value;
        delta[j - h] = -value;
    }
    (alpha, delta)
}

/// Derived score set: `score(h) = (delta_h - delta_0) / 2`, the fraction of a
/// win credited to the home team when category `h` is observed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreMap {
    scores: Vec<f64>,
}

impl ScoreMap {
    fn from_delta(delta: &[f64]) -> Self {
        let d0 = delta[0];
        Self {
            scores: delta.iter().map(|&d| (d - d0) / 2.0).collect(),
        }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score(&self, category: usize) -> Option<f64> {
        self.scores.get(category).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Coefficients of the adjacent-categories model: the symmetric `alpha`
/// vector, the antisymmetric strictly increasing `delta` vector, the
/// home-advantage coefficient `eta` (in units of `sigma`) and the rating
/// scale `sigma`.
///
/// Construction validates the symmetry conditions to 1e-9, then
/// canonicalizes so the pins `alpha_0 = alpha_J = 0` and
/// `delta_J = -delta_0 = 1` hold exactly (a common alpha offset and a joint
/// delta/sigma rescaling leave all probabilities unchanged).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelCoefficients {
    alpha: Vec<f64>,
    delta: Vec<f64>,
    eta: f64,
    sigma: f64,
}

impl ModelCoefficients {
    pub fn new(
        alpha: Vec<f64>,
        delta: Vec<f64>,
        eta: f64,
        sigma: f64,
    ) -> Result<Self, ModelError> {
        if alpha.len() != delta.len() {
            return Err(ModelError::InvalidCoefficients(format!(
                "alpha has {} entries but delta has {}",
                alpha.len(),
                delta.len()
            )));
        }
        if alpha.len() < 2 {
            return Err(ModelError::InvalidCoefficients(
                "at least two categories (J >= 1) required".into(),
            ));
        }
        let j = alpha.len() - 1;
        if alpha.iter().chain(delta.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidCoefficients(
                "alpha and delta must be finite".into(),
            ));
        }
        if !eta.is_finite() {
            return Err(ModelError::InvalidCoefficients("eta must be finite".into()));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ModelError::InvalidCoefficients(format!(
                "sigma must be a positive real, got {sigma}"
            )));
        }
        if (delta[j] - 1.0).abs() > SYMMETRY_TOL || (delta[0] + 1.0).abs() > SYMMETRY_TOL {
            return Err(ModelError::InvalidCoefficients(
                "delta must be pinned to delta_J = -delta_0 = 1".into(),
            ));
        }
        for h in 0..=j {
            if (alpha[h] - alpha[j - h]).abs() > SYMMETRY_TOL {
                return Err(ModelError::InvalidCoefficients(format!(
                    "alpha must be symmetric: alpha[{h}] != alpha[{}]",
                    j - h
                )));
            }
            if (delta[h] + delta[j - h]).abs() > SYMMETRY_TOL {
                return Err(ModelError::InvalidCoefficients(format!(
                    "delta must be antisymmetric: delta[{h}] != -delta[{}]",
                    j - h
                )));
            }
        }
        if delta.windows(2).any(|w| w[1] - w[0] <= STRICT_INCREASE_TOL) {
            return Err(ModelError::InvalidCoefficients(
                "delta must be strictly increasing (ordinality condition)".into(),
            ));
        }

        // Canonicalize: exact symmetry, alpha_0 = 0, delta_J = 1.
        let mut alpha_c: Vec<f64> = (0..=j).map(|h| (alpha[h] + alpha[j - h]) / 2.0).collect();
        let offset = alpha_c[0];
        for a in &mut alpha_c {
            *a -= offset;
        }
        let mut delta_c: Vec<f64> = (0..=j).map(|h| (delta[h] - delta[j - h]) / 2.0).collect();
        let scale = delta_c[j];
        for d in &mut delta_c {
            *d /= scale;
        }

        Ok(Self {
            alpha: alpha_c,
            delta: delta_c,
            eta,
            sigma,
        })
    }

    /// The Bradley-Terry model for binary games (J = 1).
    pub fn bradley_terry(eta: f64, sigma: f64) -> Result<Self, ModelError> {
        Self::new(vec![0.0, 0.0], vec![-1.0, 1.0], eta, sigma)
    }

    /// The Davidson draw model for ternary games (J = 2) with draw
    /// parameter `kappa = 10^alpha_1`.
    pub fn davidson(kappa: f64, eta: f64, sigma: f64) -> Result<Self, ModelError> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(ModelError::InvalidCoefficients(format!(
                "draw parameter kappa must be positive, got {kappa}"
            )));
        }
        let a1 = kappa.log10();
        Self::new(vec![0.0, a1, 0.0], vec![-1.0, 0.0, 1.0], eta, sigma)
    }

    /// Uninformative coefficients: all alpha zero, equally spaced delta.
    pub fn neutral(j: usize, eta: f64, sigma: f64) -> Result<Self, ModelError> {
        if j == 0 {
            return Err(ModelError::InvalidCoefficients("J must be >= 1".into()));
        }
        let (alpha, delta) = vectors_from_free(j, &vec![0.0; j / 2], &vec![0.0; j - j / 2 - 1]);
        Self::new(alpha, delta, eta, sigma)
    }

    pub fn j(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn categories(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Davidson draw parameter `10^alpha_1`, defined only for J = 2.
    pub fn kappa(&self) -> Option<f64> {
        if self.j() == 2 {
            Some(10f64.powf(self.alpha[1]))
        } else {
            None
        }
    }

    pub fn score_map(&self) -> ScoreMap {
        ScoreMap::from_delta(&self.delta)
    }

    /// Score credited to the home team for an observed category.
    pub fn score(&self, category: usize) -> Result<f64, ModelError> {
        self.check_category(category)?;
        Ok((self.delta[category] - self.delta[0]) / 2.0)
    }

    fn check_category(&self, category: usize) -> Result<(), ModelError> {
        if category > self.j() {
            Err(ModelError::CategoryOutOfRange {
                category,
                j: self.j(),
            })
        } else {
            Ok(())
        }
    }

    fn check_rating(z: f64) -> Result<(), ModelError> {
        if z.is_finite() {
            Ok(())
        } else {
            Err(ModelError::NonFiniteRating(z))
        }
    }

    /// Base-10 exponents `alpha_h + delta_h * w` at normalized predictor `w`.
    fn exponents(&self, w: f64) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.delta)
            .map(|(&a, &d)| a + d * w)
            .collect()
    }

    fn normalized_predictor(&self, z: f64, include_hfa: bool) -> f64 {
        let w = z / self.sigma;
        if include_hfa {
            w + self.eta
        } else {
            w
        }
    }

    /// Category probabilities `P_h(z)`, or `P_h(z + eta*sigma)` when
    /// `include_hfa` is set. The largest exponent is subtracted before
    /// exponentiating, so the result is a proper probability vector for any
    /// finite `z`.
    pub fn category_probs(&self, z: f64, include_hfa: bool) -> Result<Vec<f64>, ModelError> {
        Self::check_rating(z)?;
        let xs = self.exponents(self.normalized_predictor(z, include_hfa));
        let m = xs.iter().fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
        let mut p: Vec<f64> = xs.iter().map(|&x| 10f64.powf(x - m)).collect();
        let sum: f64 = p.iter().sum();
        for v in &mut p {
            *v /= sum;
        }
        Ok(p)
    }

    /// Expected score `G(z) = sum_h score(h) * P_h(z)`; strictly increasing
    /// in `z` with `G(-z) = 1 - G(z)` when eta is zero.
    pub fn expected_score(&self, z: f64, include_hfa: bool) -> Result<f64, ModelError> {
        let probs = self.category_probs(z, include_hfa)?;
        let d0 = self.delta[0];
        Ok(self
            .delta
            .iter()
            .zip(&probs)
            .map(|(&d, &p)| (d - d0) / 2.0 * p)
            .sum())
    }

    /// Natural log of the probability of observing `category` at rating
    /// difference `z` (no home-advantage shift; shift `z` at the call site
    /// when needed).
    pub fn log_likelihood(&self, category: usize, z: f64) -> Result<f64, ModelError> {
        self.check_category(category)?;
        Self::check_rating(z)?;
        let xs = self.exponents(self.normalized_predictor(z, false));
        let m = xs.iter().fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
        let sum: f64 = xs.iter().map(|&x| 10f64.powf(x - m)).sum();
        Ok(LN_10 * (xs[category] - m) - sum.ln())
    }

    /// Derivative of [`log_likelihood`](Self::log_likelihood) with respect to
    /// `z`: `(2 ln 10 / sigma) * (score(y) - G(z))`.
    pub fn grad_z(&self, category: usize, z: f64) -> Result<f64, ModelError> {
        let score = self.score(category)?;
        let expected = self.expected_score(z, false)?;
        Ok(2.0 * LN_10 / self.sigma * (score - expected))
    }

    /// Solves `G(z) = target` by bisection; with `include_hfa` set, solves
    /// `G(z + eta*sigma) = target`. These are the rating differences at which
    /// each interior category is the most likely outcome.
    pub fn z_at_expected_score(&self, target: f64, include_hfa: bool) -> Result<f64, ModelError> {
        if !(target > 0.0 && target < 1.0) {
            return Err(ModelError::UnreachableScore(target));
        }
        let mut lo = -4.0 * self.sigma;
        let mut hi = 4.0 * self.sigma;
        for _ in 0..60 {
            if self.expected_score(lo, include_hfa)? < target {
                break;
            }
            lo *= 2.0;
        }
        for _ in 0..60 {
            if self.expected_score(hi, include_hfa)? > target {
                break;
            }
            hi *= 2.0;
        }
        let tol = 1e-9 * self.sigma.max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.expected_score(mid, include_hfa)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < tol {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

impl<'de> Deserialize<'de> for ModelCoefficients {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            alpha: Vec<f64>,
            delta: Vec<f64>,
            eta: f64,
            sigma: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        ModelCoefficients::new(raw.alpha, raw.delta, raw.eta, raw.sigma)
            .map_err(serde::de::Error::custom)
    }
}
