//! Prediction quality: ternary-merged probabilities, the logarithmic score,
//! burn-in-averaged evaluation across seasons, and the betting-odds baseline.
//!
//! Models with different category counts are compared on the common ternary
//! events (home win / draw / away win) by merging categories on each side of
//! the draw. Scores are negative natural logs of the probability assigned to
//! the realized outcome; lower is better.

use serde::Serialize;
use thiserror::Error;

use crate::data::{Odds, SeasonDataset};
use crate::engine::{run_season, EngineConfig, EngineError, SeasonRun, SkillTable};
use crate::model::{DiscretizationScheme, ModelCoefficients, ModelError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ternary predictions need an even J (a draw category); got J={0}")]
    NoDrawCategory(usize),
    #[error("burn-in fraction must lie in [0, 1), got {0}")]
    InvalidTau(f64),
    #[error("evaluation window contains no games")]
    EmptyWindow,
    #[error("invalid odds: {0}")]
    InvalidOdds(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Probabilities for the merged ternary outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TernaryProbs {
    pub home: f64,
    pub draw: f64,
    pub away: f64,
}

impl TernaryProbs {
    pub fn sum(&self) -> f64 {
        self.home + self.draw + self.away
    }

    pub fn probability_of(&self, outcome: TernaryOutcome) -> f64 {
        match outcome {
            TernaryOutcome::HomeWin => self.home,
            TernaryOutcome::Draw => self.draw,
            TernaryOutcome::AwayWin => self.away,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TernaryOutcome {
    HomeWin,
    Draw,
    AwayWin,
}

impl TernaryOutcome {
    pub fn from_margin(margin: i32) -> Self {
        match margin.cmp(&0) {
            std::cmp::Ordering::Greater => TernaryOutcome::HomeWin,
            std::cmp::Ordering::Equal => TernaryOutcome::Draw,
            std::cmp::Ordering::Less => TernaryOutcome::AwayWin,
        }
    }
}

/// Merges category probabilities into (home win, draw, away win). The draw
/// is category J/2; everything above merges into the home win and everything
/// below into the away win.
pub fn ternary_probs(
    z: f64,
    coeffs: &ModelCoefficients,
    include_hfa: bool,
) -> Result<TernaryProbs, EvalError> {
    let j = coeffs.j();
    if !j.is_multiple_of(2) {
        return Err(EvalError::NoDrawCategory(j));
    }
    let probs = coeffs.category_probs(z, include_hfa)?;
    let mid = j / 2;
    Ok(TernaryProbs {
        home: probs[mid + 1..].iter().sum(),
        draw: probs[mid],
        away: probs[..mid].iter().sum(),
    })
}

/// Logarithmic score of a ternary prediction: `-ln` of the probability given
/// to the realized outcome. Zero probability yields `+inf`.
pub fn log_score(probs: &TernaryProbs, outcome: TernaryOutcome) -> f64 {
    let p = probs.probability_of(outcome);
    if p > 0.0 {
        -p.ln()
    } else {
        f64::INFINITY
    }
}

/// Implied ternary probabilities from decimal odds, proportional to the
/// inverse odds (this removes the bookmaker margin).
pub fn odds_baseline(odds: &Odds) -> Result<TernaryProbs, EvalError> {
    for (label, value) in [("home", odds.home), ("draw", odds.draw), ("away", odds.away)] {
        if !(value.is_finite() && value > 1.0) {
            return Err(EvalError::InvalidOdds(format!(
                "{label} odds must exceed 1.0, got {value}"
            )));
        }
    }
    let inv = (1.0 / odds.home, 1.0 / odds.draw, 1.0 / odds.away);
    let total = inv.0 + inv.1 + inv.2;
    Ok(TernaryProbs {
        home: inv.0 / total,
        draw: inv.1 / total,
        away: inv.2 / total,
    })
}

/// Evaluation window configuration: the first `floor(tau_fraction * T)`
/// games of each season are burn-in and excluded from averages.
#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    pub tau_fraction: f64,
}

impl EvalConfig {
    pub fn new(tau_fraction: f64) -> Result<Self, EvalError> {
        if !(0.0..1.0).contains(&tau_fraction) {
            return Err(EvalError::InvalidTau(tau_fraction));
        }
        Ok(Self { tau_fraction })
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { tau_fraction: 0.5 }
    }
}

/// Number of burn-in games for a season of length `t_total`.
pub fn burn_in(t_total: usize, tau_fraction: f64) -> usize {
    (tau_fraction * t_total as f64).floor() as usize
}

/// Per-game logarithmic scores of the model along a season trajectory;
/// predictions use the pre-update ratings stored in the trajectory.
pub fn season_log_scores(
    run: &SeasonRun,
    coeffs: &ModelCoefficients,
    include_hfa: bool,
) -> Result<Vec<f64>, EvalError> {
    run.updates
        .iter()
        .map(|u| {
            let probs = ternary_probs(u.z, coeffs, include_hfa)?;
            Ok(log_score(&probs, TernaryOutcome::from_margin(u.margin)))
        })
        .collect()
}

/// Pools the post-burn-in games of every season and averages their scores.
pub fn average_log_score(per_season: &[Vec<f64>], config: &EvalConfig) -> Result<f64, EvalError> {
    if !(0.0..1.0).contains(&config.tau_fraction) {
        return Err(EvalError::InvalidTau(config.tau_fraction));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for scores in per_season {
        let tau = burn_in(scores.len(), config.tau_fraction);
        for &s in &scores[tau..] {
            sum += s;
            count += 1;
        }
    }
    if count == 0 {
        return Err(EvalError::EmptyWindow);
    }
    Ok(sum / count as f64)
}

/// Evaluation summary for one season.
#[derive(Debug, Clone, Serialize)]
pub struct SeasonEvalRow {
    pub label: String,
    pub games: usize,
    pub scored: usize,
    pub model_log_score: Option<f64>,
    pub infinite_scores: usize,
    pub baseline_log_score: Option<f64>,
    pub baseline_scored: usize,
    pub baseline_excluded: usize,
}

/// Full evaluation report. The baseline average covers only games with valid
/// odds; the model average always covers the whole window, and the exclusion
/// counts make the window mismatch visible.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub tau_fraction: f64,
    pub seasons: Vec<SeasonEvalRow>,
    pub pooled_model_log_score: f64,
    pub pooled_baseline_log_score: Option<f64>,
    pub total_games: usize,
    pub total_scored: usize,
    pub total_baseline_scored: usize,
    pub total_baseline_excluded: usize,
}

impl EvalReport {
    pub fn to_csv_string(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(
            "label,games,scored,model_log_score,infinite_scores,baseline_log_score,baseline_scored,baseline_excluded\n",
        );
        for row in &self.seasons {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.label,
                row.games,
                row.scored,
                fmt_opt(row.model_log_score),
                row.infinite_scores,
                fmt_opt(row.baseline_log_score),
                row.baseline_scored,
                row.baseline_excluded
            ));
        }
        out.push_str(&format!(
            "(pooled),{},{},{},,{},{},{}\n",
            self.total_games,
            self.total_scored,
            self.pooled_model_log_score,
            fmt_opt(self.pooled_baseline_log_score),
            self.total_baseline_scored,
            self.total_baseline_excluded
        ));
        out
    }
}

/// Runs the engine over the given seasons and scores the predictions.
///
/// With `reset_per_season` (the default protocol) every season starts from a
/// fresh table; otherwise ratings carry over in input order.
pub fn evaluate_seasons(
    seasons: &[SeasonDataset],
    scheme: &DiscretizationScheme,
    engine_config: &EngineConfig,
    eval_config: &EvalConfig,
    reset_per_season: bool,
) -> Result<EvalReport, EvalError> {
    if !(0.0..1.0).contains(&eval_config.tau_fraction) {
        return Err(EvalError::InvalidTau(eval_config.tau_fraction));
    }
    let mut rows = Vec::with_capacity(seasons.len());
    let mut model_sum = 0.0;
    let mut model_count = 0usize;
    let mut baseline_sum = 0.0;
    let mut baseline_count = 0usize;
    let mut excluded_total = 0usize;
    let mut total_games = 0usize;
    let mut carried = SkillTable::default();

    for season in seasons {
        let initial = if reset_per_season {
            SkillTable::default()
        } else {
            std::mem::take(&mut carried)
        };
        let run = run_season(season, scheme, engine_config, initial)?;
        let scores = season_log_scores(&run, &engine_config.coefficients, engine_config.apply_hfa)?;
        let tau = burn_in(scores.len(), eval_config.tau_fraction);

        let window = &scores[tau..];
        let scored = window.len();
        let infinite = window.iter().filter(|s| s.is_infinite()).count();
        let model_mean = if scored > 0 {
            Some(window.iter().sum::<f64>() / scored as f64)
        } else {
            None
        };

        let mut season_baseline_sum = 0.0;
        let mut season_baseline_count = 0usize;
        for (m, &_score) in season.matches[tau..].iter().zip(window.iter()) {
            let Some(odds) = m.odds else {
                continue;
            };
            if let Ok(probs) = odds_baseline(&odds) {
                season_baseline_sum +=
                    log_score(&probs, TernaryOutcome::from_margin(m.margin()));
                season_baseline_count += 1;
            }
        }
        let excluded = scored - season_baseline_count;

        model_sum += window.iter().sum::<f64>();
        model_count += scored;
        baseline_sum += season_baseline_sum;
        baseline_count += season_baseline_count;
        excluded_total += excluded;
        total_games += season.len();

        rows.push(SeasonEvalRow {
            label: season.label.clone(),
            games: season.len(),
            scored,
            model_log_score: model_mean,
            infinite_scores: infinite,
            baseline_log_score: if season_baseline_count > 0 {
                Some(season_baseline_sum / season_baseline_count as f64)
            } else {
                None
            },
            baseline_scored: season_baseline_count,
            baseline_excluded: excluded,
        });

        if !reset_per_season {
            carried = run.table;
        }
    }

    if model_count == 0 {
        return Err(EvalError::EmptyWindow);
    }
    Ok(EvalReport {
        tau_fraction: eval_config.tau_fraction,
        seasons: rows,
        pooled_model_log_score: model_sum / model_count as f64,
        pooled_baseline_log_score: if baseline_count > 0 {
            Some(baseline_sum / baseline_count as f64)
        } else {
            None
        },
        total_games,
        total_scored: model_count,
        total_baseline_scored: baseline_count,
        total_baseline_excluded: excluded_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MatchRecord;
    use chrono::NaiveDate;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ternary_is_identity_for_davidson() {
        let coeffs = ModelCoefficients::davidson(1.7, 0.12, 400.0).unwrap();
        for z in [-300.0, 0.0, 150.0] {
            let merged = ternary_probs(z, &coeffs, true).unwrap();
            let raw = coeffs.category_probs(z, true).unwrap();
            assert_eq!(merged.away, raw[0]);
            assert_eq!(merged.draw, raw[1]);
            assert_eq!(merged.home, raw[2]);
        }
    }

    #[test]
    fn ternary_symmetric_at_zero_without_hfa() {
        let coeffs = ModelCoefficients::new(
            vec![0.0, 0.57, 0.53, 0.57, 0.0],
            vec![-1.0, -0.5543, 0.0, 0.5543, 1.0],
            0.0,
            400.0,
        )
        .unwrap();
        let p = ternary_probs(0.0, &coeffs, false).unwrap();
        assert!(close(p.home, p.away, 1e-15));
        assert!(close(p.sum(), 1.0, 1e-12));
    }

    #[test]
    fn ternary_components_are_partial_sums() {
        let coeffs = ModelCoefficients::new(
            vec![0.0, 0.57, 0.53, 0.57, 0.0],
            vec![-1.0, -0.5543, 0.0, 0.5543, 1.0],
            0.17,
            400.0,
        )
        .unwrap();
        for z in [-410.0, -55.0, 0.0, 123.0, 640.0] {
            let merged = ternary_probs(z, &coeffs, true).unwrap();
            let raw = coeffs.category_probs(z, true).unwrap();
            assert_eq!(merged.away, raw[0] + raw[1]);
            assert_eq!(merged.draw, raw[2]);
            assert_eq!(merged.home, raw[3] + raw[4]);
            assert!(close(merged.sum(), 1.0, 1e-12));
        }
    }

    #[test]
    fn ternary_at_equal_skills_recovers_merged_frequencies() {
        // Coefficients built from the closed form on a frequency vector put
        // the category probabilities back at those frequencies when skills
        // are equal, so the merged triple is (sum above, draw, sum below).
        let f = [0.051, 0.226, 0.256, 0.353, 0.114];
        let coeffs = crate::estimation::closed_form_from_frequencies(&f, 400.0).unwrap();
        let merged = ternary_probs(0.0, &coeffs, true).unwrap();
        assert!(close(merged.home, 0.353 + 0.114, 1e-9));
        assert!(close(merged.draw, 0.256, 1e-9));
        assert!(close(merged.away, 0.051 + 0.226, 1e-9));
    }

    #[test]
    fn average_log_score_invariant_to_season_order() {
        let config = EvalConfig::new(0.5).unwrap();
        let a = vec![0.9, 0.4, 1.2, 0.7];
        let b = vec![1.1, 0.3, 0.2, 0.8, 0.5, 1.4];
        let fwd = average_log_score(&[a.clone(), b.clone()], &config).unwrap();
        let rev = average_log_score(&[b, a], &config).unwrap();
        assert!(close(fwd, rev, 1e-15));
    }

    #[test]
    fn ternary_rejects_odd_j() {
        let coeffs = ModelCoefficients::bradley_terry(0.0, 400.0).unwrap();
        assert!(matches!(
            ternary_probs(0.0, &coeffs, false),
            Err(EvalError::NoDrawCategory(1))
        ));
    }

    #[test]
    fn log_score_values() {
        let certain = TernaryProbs {
            home: 1.0,
            draw: 0.0,
            away: 0.0,
        };
        assert_eq!(log_score(&certain, TernaryOutcome::HomeWin), 0.0);
        assert_eq!(log_score(&certain, TernaryOutcome::Draw), f64::INFINITY);

        let uniform = TernaryProbs {
            home: 1.0 / 3.0,
            draw: 1.0 / 3.0,
            away: 1.0 / 3.0,
        };
        assert!(close(
            log_score(&uniform, TernaryOutcome::AwayWin),
            3.0_f64.ln(),
            1e-12
        ));

        let probs = TernaryProbs {
            home: 0.4615,
            draw: 0.3077,
            away: 0.2308,
        };
        assert!(close(
            log_score(&probs, TernaryOutcome::HomeWin),
            0.7732,
            1e-4
        ));
    }

    #[test]
    fn odds_baseline_normalizes_inverse_odds() {
        let p = odds_baseline(&Odds {
            home: 2.0,
            draw: 3.0,
            away: 4.0,
        })
        .unwrap();
        assert!(close(p.home, 0.461538, 1e-6));
        assert!(close(p.draw, 0.307692, 1e-6));
        assert!(close(p.away, 0.230769, 1e-6));

        let uniform = odds_baseline(&Odds {
            home: 3.0,
            draw: 3.0,
            away: 3.0,
        })
        .unwrap();
        assert!(close(uniform.home, 1.0 / 3.0, 1e-12));

        let lopsided = odds_baseline(&Odds {
            home: 1.01,
            draw: 50.0,
            away: 100.0,
        })
        .unwrap();
        assert!(lopsided.home > 0.9);
        assert!(close(lopsided.sum(), 1.0, 1e-12));

        assert!(odds_baseline(&Odds {
            home: 0.0,
            draw: 3.0,
            away: 3.0,
        })
        .is_err());
        assert!(odds_baseline(&Odds {
            home: 1.0,
            draw: 3.0,
            away: 3.0,
        })
        .is_err());
    }

    #[test]
    fn average_log_score_windows() {
        // Single game, no burn-in: the average is that game's score.
        let config = EvalConfig::new(0.0).unwrap();
        let avg = average_log_score(&[vec![0.42]], &config).unwrap();
        assert_eq!(avg, 0.42);

        // Uniform predictions average to ln 3 regardless of outcomes.
        let config = EvalConfig::new(0.5).unwrap();
        let scores = vec![vec![3.0_f64.ln(); 10], vec![3.0_f64.ln(); 8]];
        assert!(close(
            average_log_score(&scores, &config).unwrap(),
            3.0_f64.ln(),
            1e-12
        ));

        // Burn-in excludes the first floor(tau * T) games.
        let scores = vec![vec![100.0, 100.0, 1.0, 3.0]];
        let avg = average_log_score(&scores, &config).unwrap();
        assert!(close(avg, 2.0, 1e-12));

        assert!(matches!(
            average_log_score(&[vec![]], &config),
            Err(EvalError::EmptyWindow)
        ));
        assert!(EvalConfig::new(1.0).is_err());
        assert!(EvalConfig::new(-0.1).is_err());
    }

    fn scored_match(t: usize, margin: i32, odds: Option<Odds>) -> MatchRecord {
        let (hp, ap) = if margin >= 0 {
            (margin as u32, 0)
        } else {
            (0, (-margin) as u32)
        };
        MatchRecord {
            t,
            date: NaiveDate::from_ymd_opt(2021, 8, 1).unwrap() + chrono::Days::new(t as u64),
            home: if t.is_multiple_of(2) { "a".into() } else { "b".into() },
            away: if t.is_multiple_of(2) { "b".into() } else { "a".into() },
            home_points: hp,
            away_points: ap,
            odds,
        }
    }

    #[test]
    fn evaluate_seasons_counts_baseline_exclusions() {
        let odds = Odds {
            home: 2.0,
            draw: 3.4,
            away: 3.8,
        };
        let matches = vec![
            scored_match(0, 1, Some(odds)),
            scored_match(1, 0, None),
            scored_match(2, -2, Some(odds)),
            scored_match(3, 1, None),
        ];
        let season = SeasonDataset::new("s", matches);
        let scheme = DiscretizationScheme::ternary();
        let coeffs = ModelCoefficients::davidson(1.5, 0.1, 400.0).unwrap();
        let config = EngineConfig::new(0.1, coeffs).unwrap();
        let eval = EvalConfig::new(0.5).unwrap();
        let report =
            evaluate_seasons(&[season], &scheme, &config, &eval, true).unwrap();
        assert_eq!(report.seasons.len(), 1);
        let row = &report.seasons[0];
        assert_eq!(row.games, 4);
        assert_eq!(row.scored, 2);
        assert_eq!(row.baseline_scored, 1);
        assert_eq!(row.baseline_excluded, 1);
        assert!(report.pooled_model_log_score.is_finite());
        let csv = report.to_csv_string();
        assert!(csv.lines().count() == 3);
        assert!(csv.contains("(pooled)"));
    }
}
