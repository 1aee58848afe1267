//! Online rating updates: one stochastic-gradient step per game, in time
//! order.
//!
//! Each game moves the two participants symmetrically by
//! `K~ * sigma * (score - G(z))`, where `score` is the home team's score for
//! the observed category and `G` the expected score at the pre-game rating
//! difference (shifted by `eta * sigma` when the home advantage is applied).
//! All other ratings stay untouched, so the total rating mass is conserved.

use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::data::SeasonDataset;
use crate::model::{DiscretizationScheme, ModelCoefficients, ModelError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("home and away teams are identical: {0}")]
    SameTeam(String),
    #[error("adaptation step must be a positive real, got {0}")]
    InvalidStep(f64),
    #[error("season {label:?} is out of time order at match index {index}")]
    UnorderedSeason { label: String, index: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Current ratings for all known teams. Teams seen for the first time enter
/// at `theta_init`; the initialization only offsets the ratings and changes
/// no prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkillTable {
    skills: BTreeMap<String, f64>,
    theta_init: f64,
}

impl SkillTable {
    pub fn new(theta_init: f64) -> Self {
        Self {
            skills: BTreeMap::new(),
            theta_init,
        }
    }

    pub fn theta_init(&self) -> f64 {
        self.theta_init
    }

    /// Rating of a team, or `theta_init` if it has not played yet.
    pub fn rating(&self, team: &str) -> f64 {
        self.skills.get(team).copied().unwrap_or(self.theta_init)
    }

    pub fn contains(&self, team: &str) -> bool {
        self.skills.contains_key(team)
    }

    /// Inserts the team at `theta_init` if absent and returns its rating.
    pub fn ensure(&mut self, team: &str) -> f64 {
        *self
            .skills
            .entry(team.to_string())
            .or_insert(self.theta_init)
    }

    pub fn set(&mut self, team: &str, theta: f64) {
        self.skills.insert(team.to_string(), theta);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.skills.iter()
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    /// Sum of all stored ratings; conserved by updates at fixed membership.
    pub fn total(&self) -> f64 {
        self.skills.values().sum()
    }

    /// Final ratings as CSV, strongest team first. Also reports the
    /// sigma-normalized rating, which does not depend on the scale.
    pub fn ratings_csv(&self, sigma: f64) -> String {
        let mut rows: Vec<(&String, f64)> =
            self.skills.iter().map(|(team, &theta)| (team, theta)).collect();
        rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
        let mut out = String::from("team,theta,theta_over_sigma\n");
        for (team, theta) in rows {
            out.push_str(&format!("{team},{theta},{}\n", theta / sigma));
        }
        out
    }
}

impl Default for SkillTable {
    fn default() -> Self {
        Self::new(0.0)
    }
}

/// Engine configuration: normalized adaptation step, model coefficients, and
/// the home-advantage switch.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub k_tilde: f64,
    pub coefficients: ModelCoefficients,
    pub apply_hfa: bool,
    /// When set, games sharing a date are all scored and updated from the
    /// ratings as of the start of that date. Off by default: strictly
    /// sequential processing in file order.
    pub batch_simultaneous: bool,
}

impl EngineConfig {
    pub fn new(k_tilde: f64, coefficients: ModelCoefficients) -> Result<Self, EngineError> {
        if !(k_tilde.is_finite() && k_tilde > 0.0) {
            return Err(EngineError::InvalidStep(k_tilde));
        }
        Ok(Self {
            k_tilde,
            coefficients,
            apply_hfa: true,
            batch_simultaneous: false,
        })
    }
}

/// What one update did: pre-game rating difference, expected and observed
/// score, and the rating change applied to the home team (the away team
/// moves by the negative).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairUpdate {
    pub z: f64,
    pub expected: f64,
    pub score: f64,
    pub delta: f64,
}

/// Applies one game to the table.
pub fn update_pair(
    table: &mut SkillTable,
    home: &str,
    away: &str,
    category: usize,
    config: &EngineConfig,
) -> Result<PairUpdate, EngineError> {
    if home == away {
        return Err(EngineError::SameTeam(home.to_string()));
    }
    if !(config.k_tilde.is_finite() && config.k_tilde > 0.0) {
        return Err(EngineError::InvalidStep(config.k_tilde));
    }
    let theta_home = table.ensure(home);
    let theta_away = table.ensure(away);
    let z = theta_home - theta_away;
    let expected = config.coefficients.expected_score(z, config.apply_hfa)?;
    let score = config.coefficients.score(category)?;
    let k = config.k_tilde * config.coefficients.sigma();
    let delta = k * (score - expected);
    table.set(home, theta_home + delta);
    table.set(away, theta_away - delta);
    Ok(PairUpdate {
        z,
        expected,
        score,
        delta,
    })
}

/// One row of a season trajectory. `z` and `expected` are computed from the
/// ratings before this game's own update, which is what honest prediction
/// scoring requires.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameUpdate {
    pub t: usize,
    pub home: String,
    pub away: String,
    pub margin: i32,
    pub category: usize,
    pub z: f64,
    pub expected: f64,
    pub delta: f64,
    pub theta_home_after: f64,
    pub theta_away_after: f64,
}

/// A finished season run: the per-game trajectory and the final table.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonRun {
    pub label: String,
    pub updates: Vec<GameUpdate>,
    pub table: SkillTable,
}

impl SeasonRun {
    /// Trajectory export: one CSV row per game.
    pub fn trajectory_csv(&self) -> String {
        let mut out =
            String::from("t,home,away,d,y,z,G,delta_applied,theta_home_after,theta_away_after\n");
        for u in &self.updates {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                u.t,
                u.home,
                u.away,
                u.margin,
                u.category,
                u.z,
                u.expected,
                u.delta,
                u.theta_home_after,
                u.theta_away_after
            ));
        }
        out
    }
}

/// Runs a season in time order starting from `initial`, applying one update
/// per game. Games must already be sorted by date.
pub fn run_season(
    season: &SeasonDataset,
    scheme: &DiscretizationScheme,
    config: &EngineConfig,
    initial: SkillTable,
) -> Result<SeasonRun, EngineError> {
    if !(config.k_tilde.is_finite() && config.k_tilde > 0.0) {
        return Err(EngineError::InvalidStep(config.k_tilde));
    }
    for (i, pair) in season.matches.windows(2).enumerate() {
        if pair[0].date > pair[1].date {
            return Err(EngineError::UnorderedSeason {
                label: season.label.clone(),
                index: i + 1,
            });
        }
    }

    let mut table = initial;
    let mut updates = Vec::with_capacity(season.len());
    let mut i = 0;
    while i < season.matches.len() {
        // A "group" is one game, or all games sharing a date in batch mode.
        let group_end = if config.batch_simultaneous {
            let date = season.matches[i].date;
            season.matches[i..]
                .iter()
                .take_while(|m| m.date == date)
                .count()
                + i
        } else {
            i + 1
        };
        let snapshot = if config.batch_simultaneous {
            Some(table.clone())
        } else {
            None
        };
        let mut pending = Vec::with_capacity(group_end - i);
        for m in &season.matches[i..group_end] {
            if m.home == m.away {
                return Err(EngineError::SameTeam(m.home.clone()));
            }
            let category = scheme.categorize(m.margin());
            let reference = snapshot.as_ref().unwrap_or(&table);
            let z = reference.rating(&m.home) - reference.rating(&m.away);
            let expected = config.coefficients.expected_score(z, config.apply_hfa)?;
            let score = config.coefficients.score(category)?;
            let k = config.k_tilde * config.coefficients.sigma();
            let delta = k * (score - expected);
            pending.push((m, category, z, expected, delta));
        }
        for (m, category, z, expected, delta) in pending {
            let theta_home = table.ensure(&m.home) + delta;
            let theta_away = table.ensure(&m.away) - delta;
            table.set(&m.home, theta_home);
            table.set(&m.away, theta_away);
            updates.push(GameUpdate {
                t: m.t,
                home: m.home.clone(),
                away: m.away.clone(),
                margin: m.margin(),
                category,
                z,
                expected,
                delta,
                theta_home_after: theta_home,
                theta_away_after: theta_away,
            });
        }
        i = group_end;
    }
    Ok(SeasonRun {
        label: season.label.clone(),
        updates,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MatchRecord;
    use chrono::NaiveDate;

    fn day(offset: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(offset)
    }

    fn game(t: usize, home: &str, away: &str, hp: u32, ap: u32) -> MatchRecord {
        MatchRecord {
            t,
            date: day(t as u64),
            home: home.into(),
            away: away.into(),
            home_points: hp,
            away_points: ap,
            odds: None,
        }
    }

    fn binary_config(k_tilde: f64, sigma: f64) -> EngineConfig {
        let coeffs = ModelCoefficients::bradley_terry(0.0, sigma).unwrap();
        let mut config = EngineConfig::new(k_tilde, coeffs).unwrap();
        config.apply_hfa = false;
        config
    }

    #[test]
    fn equal_teams_home_win_moves_sixteen_points() {
        // J=1, equal ratings, K~ = 0.08, sigma = 400: 0.08 * 400 * (1 - 0.5).
        let config = binary_config(0.08, 400.0);
        let mut table = SkillTable::default();
        let update = update_pair(&mut table, "home", "away", 1, &config).unwrap();
        assert_eq!(update.delta, 16.0);
        assert_eq!(table.rating("home"), 16.0);
        assert_eq!(table.rating("away"), -16.0);
    }

    #[test]
    fn zero_gradient_leaves_ratings_unchanged() {
        // Davidson kappa=2 at z=0: score(draw) = G(0) = 1/2.
        let coeffs = ModelCoefficients::davidson(2.0, 0.0, 400.0).unwrap();
        let mut config = EngineConfig::new(0.1, coeffs).unwrap();
        config.apply_hfa = false;
        let mut table = SkillTable::default();
        let update = update_pair(&mut table, "a", "b", 1, &config).unwrap();
        assert_eq!(update.delta, 0.0);
        assert_eq!(table.rating("a"), 0.0);
        assert_eq!(table.rating("b"), 0.0);
    }

    #[test]
    fn weaker_team_win_moves_more() {
        let config = binary_config(0.08, 400.0);
        let mut strong_wins = SkillTable::default();
        strong_wins.set("s", 200.0);
        strong_wins.set("w", -200.0);
        let d_strong = update_pair(&mut strong_wins, "s", "w", 1, &config)
            .unwrap()
            .delta;
        let mut weak_wins = SkillTable::default();
        weak_wins.set("s", 200.0);
        weak_wins.set("w", -200.0);
        let d_weak = update_pair(&mut weak_wins, "w", "s", 1, &config).unwrap().delta;
        assert!(d_weak > d_strong);
    }

    #[test]
    fn same_team_rejected() {
        let config = binary_config(0.08, 400.0);
        let mut table = SkillTable::default();
        assert!(matches!(
            update_pair(&mut table, "a", "a", 1, &config),
            Err(EngineError::SameTeam(_))
        ));
        assert!(matches!(
            update_pair(&mut table, "a", "b", 7, &config),
            Err(EngineError::Model(ModelError::CategoryOutOfRange { .. }))
        ));
    }

    #[test]
    fn empty_season_returns_initial_table() {
        let season = SeasonDataset::new("empty", vec![]);
        let scheme = DiscretizationScheme::ternary();
        let coeffs = ModelCoefficients::davidson(1.5, 0.1, 400.0).unwrap();
        let config = EngineConfig::new(0.1, coeffs).unwrap();
        let mut initial = SkillTable::default();
        initial.set("x", 123.0);
        let run = run_season(&season, &scheme, &config, initial.clone()).unwrap();
        assert!(run.updates.is_empty());
        assert_eq!(run.table, initial);
    }

    #[test]
    fn rating_sum_is_conserved() {
        let scheme = DiscretizationScheme::new(vec![2]).unwrap();
        let coeffs = ModelCoefficients::new(
            vec![0.0, 0.57, 0.53, 0.57, 0.0],
            vec![-1.0, -0.5543, 0.0, 0.5543, 1.0],
            0.17,
            400.0,
        )
        .unwrap();
        let config = EngineConfig::new(0.14, coeffs).unwrap();
        let teams = ["a", "b", "c", "d", "e"];
        let mut matches = Vec::new();
        let mut t = 0;
        for round in 0..20u32 {
            for (i, home) in teams.iter().enumerate() {
                for (k, away) in teams.iter().enumerate() {
                    if i != k {
                        let margin = ((i + 2 * k + round as usize) % 7) as i32 - 3;
                        let (hp, ap) = if margin >= 0 {
                            (margin as u32, 0)
                        } else {
                            (0, (-margin) as u32)
                        };
                        matches.push(game(t, home, away, hp, ap));
                        t += 1;
                    }
                }
            }
        }
        let season = SeasonDataset::new("conserve", matches);
        let run = run_season(&season, &scheme, &config, SkillTable::default()).unwrap();
        assert!(run.table.total().abs() < 1e-9);
    }

    #[test]
    fn unordered_season_rejected() {
        let mut matches = vec![game(0, "a", "b", 1, 0), game(1, "c", "d", 0, 0)];
        matches[1].date = day(0) - chrono::Days::new(1);
        let season = SeasonDataset::new("bad", matches);
        let scheme = DiscretizationScheme::ternary();
        let coeffs = ModelCoefficients::davidson(1.5, 0.0, 400.0).unwrap();
        let config = EngineConfig::new(0.1, coeffs).unwrap();
        assert!(matches!(
            run_season(&season, &scheme, &config, SkillTable::default()),
            Err(EngineError::UnorderedSeason { index: 1, .. })
        ));
    }

    #[test]
    fn offset_invariance() {
        let scheme = DiscretizationScheme::ternary();
        let coeffs = ModelCoefficients::davidson(1.5, 0.1, 400.0).unwrap();
        let config = EngineConfig::new(0.1, coeffs).unwrap();
        let matches = vec![
            game(0, "a", "b", 3, 0),
            game(1, "b", "c", 1, 1),
            game(2, "c", "a", 0, 2),
            game(3, "a", "c", 1, 4),
        ];
        let season = SeasonDataset::new("offset", matches);
        let base = run_season(&season, &scheme, &config, SkillTable::new(0.0)).unwrap();
        let shifted = run_season(&season, &scheme, &config, SkillTable::new(1000.0)).unwrap();
        for (u, v) in base.updates.iter().zip(&shifted.updates) {
            assert!((u.z - v.z).abs() < 1e-9);
            assert!((u.expected - v.expected).abs() < 1e-9);
            assert!((u.delta - v.delta).abs() < 1e-9);
            assert!((v.theta_home_after - u.theta_home_after - 1000.0).abs() < 1e-9);
        }
    }

    #[test]
    fn batch_simultaneous_uses_start_of_day_ratings() {
        let scheme = DiscretizationScheme::ternary();
        let coeffs = ModelCoefficients::davidson(1.5, 0.0, 400.0).unwrap();
        let mut config = EngineConfig::new(0.1, coeffs).unwrap();
        config.apply_hfa = false;
        // Two same-day games sharing team "a".
        let mut matches = vec![
            game(0, "a", "b", 2, 0),
            game(1, "a", "c", 2, 0),
        ];
        matches[1].date = matches[0].date;
        let season = SeasonDataset::new("same-day", matches);

        let sequential = run_season(&season, &scheme, &config, SkillTable::default()).unwrap();
        // Sequential: the second game sees "a" already above "c".
        assert!(sequential.updates[1].z > 0.0);

        config.batch_simultaneous = true;
        let batched = run_season(&season, &scheme, &config, SkillTable::default()).unwrap();
        assert_eq!(batched.updates[1].z, 0.0);
        assert_eq!(batched.updates[0].delta, batched.updates[1].delta);
        // Both deltas still land on the table.
        assert!(
            (batched.table.rating("a") - 2.0 * batched.updates[0].delta).abs() < 1e-12
        );
    }

    #[test]
    fn trajectory_csv_has_expected_header() {
        let season = SeasonDataset::new("csv", vec![game(0, "a", "b", 1, 0)]);
        let scheme = DiscretizationScheme::ternary();
        let coeffs = ModelCoefficients::davidson(1.5, 0.0, 400.0).unwrap();
        let config = EngineConfig::new(0.1, coeffs).unwrap();
        let run = run_season(&season, &scheme, &config, SkillTable::default()).unwrap();
        let csv = run.trajectory_csv();
        assert!(csv.starts_with(
            "t,home,away,d,y,z,G,delta_applied,theta_home_after,theta_away_after\n"
        ));
        assert_eq!(csv.lines().count(), 2);
    }
}
