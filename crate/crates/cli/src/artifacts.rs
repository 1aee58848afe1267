//! The coefficients JSON artifact written by `estimate` and read back by
//! the rating, evaluation, sweep, simulation and curve commands.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use elo_mov::model::{DiscretizationScheme, ModelCoefficients};

pub const COEFFICIENTS_SCHEMA_VERSION: u32 = 1;

/// Full-precision persisted coefficients. Presentation rounding happens only
/// in the plain-text report, never here.
#[derive(Debug, Serialize, Deserialize)]
pub struct CoefficientsFile {
    pub schema_version: u32,
    /// How the coefficients were obtained: "freq", "ml", or "manual".
    pub mode: String,
    /// Discretization thresholds the estimate was computed under, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme_thresholds: Option<Vec<u32>>,
    /// Conventions baked into the model: probabilities use base-10
    /// exponentials, scores and log scores use the natural log.
    pub exponent_base: f64,
    pub log_score_base: String,
    pub sigma: f64,
    pub eta: f64,
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    pub delta_tilde: Vec<f64>,
    /// Davidson draw parameter, present only for J=2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Normalization factor of the frequency estimator, present in freq mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_games: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_likelihood: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

impl CoefficientsFile {
    pub fn new(mode: &str, scheme: &DiscretizationScheme, coeffs: &ModelCoefficients) -> Self {
        Self {
            schema_version: COEFFICIENTS_SCHEMA_VERSION,
            mode: mode.to_string(),
            scheme_thresholds: Some(scheme.thresholds().to_vec()),
            exponent_base: 10.0,
            log_score_base: "e".to_string(),
            sigma: coeffs.sigma(),
            eta: coeffs.eta(),
            alpha: coeffs.alpha().to_vec(),
            delta: coeffs.delta().to_vec(),
            delta_tilde: coeffs.score_map().scores().to_vec(),
            kappa: coeffs.kappa(),
            xi: None,
            n_games: None,
            log_likelihood: None,
            converged: None,
        }
    }

    pub fn coefficients(&self) -> Result<ModelCoefficients> {
        if self.schema_version != COEFFICIENTS_SCHEMA_VERSION {
            bail!(
                "unsupported coefficients schema version {}",
                self.schema_version
            );
        }
        ModelCoefficients::new(
            self.alpha.clone(),
            self.delta.clone(),
            self.eta,
            self.sigma,
        )
        .context("coefficients file failed validation")
    }

    pub fn scheme(&self) -> Result<Option<DiscretizationScheme>> {
        match &self.scheme_thresholds {
            None => Ok(None),
            Some(thresholds) => {
                let scheme = DiscretizationScheme::new(thresholds.clone())
                    .context("coefficients file carries an invalid scheme")?;
                if scheme.j() + 1 != self.alpha.len() {
                    bail!(
                        "coefficients file scheme (J={}) does not match its {} coefficient entries",
                        scheme.j(),
                        self.alpha.len()
                    );
                }
                Ok(Some(scheme))
            }
        }
    }

    /// The plain-text report shown by `estimate`: values rounded to four
    /// decimals for reading, with the conventions spelled out in the header.
    pub fn report(&self, scheme: &DiscretizationScheme) -> String {
        let mut out = String::new();
        out.push_str(&format!("coefficient estimates (mode: {})\n", self.mode));
        out.push_str(&format!(
            "scheme: {} categories (J={}), thresholds {:?}\n",
            scheme.categories(),
            scheme.j(),
            scheme.thresholds()
        ));
        out.push_str(
            "conventions: base-10 exponentials in the model; natural log for scores\n",
        );
        out.push_str(&format!("sigma: {}\n", self.sigma));
        if let Some(n) = self.n_games {
            out.push_str(&format!("games: {n}\n"));
        }
        out.push_str(&format!("eta: {:.4}\n", self.eta));
        if let Some(kappa) = self.kappa {
            out.push_str(&format!("kappa: {kappa:.4}\n"));
        }
        if let Some(xi) = self.xi {
            out.push_str(&format!("xi: {xi:.4}\n"));
        }
        if let Some(ll) = self.log_likelihood {
            out.push_str(&format!("log-likelihood: {ll:.4}\n"));
        }
        if let Some(converged) = self.converged {
            out.push_str(&format!("converged: {converged}\n"));
        }
        out.push_str("h      alpha      delta     score\n");
        for h in 0..self.alpha.len() {
            out.push_str(&format!(
                "{h:<4} {:>9.4} {:>9.4} {:>9.4}\n",
                self.alpha[h], self.delta[h], self.delta_tilde[h]
            ));
        }
        out
    }
}
