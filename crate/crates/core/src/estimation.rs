//! Coefficient estimation.
//!
//! Two routes produce [`ModelCoefficients`] from data:
//!
//! - the closed form: invert the category frequencies observed in training
//!   data under the equal-skills linearization, which gives every
//!   coefficient as an explicit log-ratio of frequencies;
//! - maximum likelihood: treat the coefficients as unknowns alongside
//!   per-season constant skills and ascend the joint likelihood over all
//!   training seasons.
//!
//! The module also hosts the adaptation-step sweep that picks the step
//! minimizing the average logarithmic score on training seasons.

use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::LN_10;
use thiserror::Error;

use crate::data::SeasonDataset;
use crate::engine::{run_season, EngineConfig, EngineError, SkillTable};
use crate::evaluation::{average_log_score, season_log_scores, EvalConfig, EvalError};
use crate::model::{
    gaps_from_logits, vectors_from_free, DiscretizationScheme, ModelCoefficients, ModelError,
};

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("no games available for estimation")]
    EmptyInput,
    #[error("invalid frequency table: {0}")]
    InvalidFrequencies(String),
    #[error("category {0} has zero observed frequency; widen the discretization or enable smoothing")]
    ZeroFrequency(usize),
    #[error("strong-away and strong-home frequencies coincide, so the home advantage (and with it the delta scale) is undefined")]
    DegenerateHfa,
    #[error("estimated delta coefficients are not strictly increasing")]
    NonMonotoneDelta,
    #[error("step grid must be nonempty with positive finite entries")]
    InvalidGrid,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Relative frequency of each outcome category over a body of games.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTable {
    f: Vec<f64>,
    n_games: u64,
    scheme: DiscretizationScheme,
}

impl FrequencyTable {
    pub fn from_counts(
        counts: &[u64],
        scheme: DiscretizationScheme,
    ) -> Result<Self, EstimationError> {
        if counts.len() != scheme.categories() {
            return Err(EstimationError::InvalidFrequencies(format!(
                "{} counts for a scheme with {} categories",
                counts.len(),
                scheme.categories()
            )));
        }
        let n_games: u64 = counts.iter().sum();
        if n_games == 0 {
            return Err(EstimationError::EmptyInput);
        }
        Ok(Self {
            f: counts.iter().map(|&c| c as f64 / n_games as f64).collect(),
            n_games,
            scheme,
        })
    }

    /// Builds a table from already-computed relative frequencies (e.g.
    /// published values). They must be nonnegative and sum to one to 1e-9.
    pub fn from_frequencies(
        f: Vec<f64>,
        n_games: u64,
        scheme: DiscretizationScheme,
    ) -> Result<Self, EstimationError> {
        if f.len() != scheme.categories() {
            return Err(EstimationError::InvalidFrequencies(format!(
                "{} frequencies for a scheme with {} categories",
                f.len(),
                scheme.categories()
            )));
        }
        if n_games == 0 {
            return Err(EstimationError::EmptyInput);
        }
        if f.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(EstimationError::InvalidFrequencies(
                "frequencies must be nonnegative".into(),
            ));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EstimationError::InvalidFrequencies(format!(
                "frequencies sum to {sum}, expected 1"
            )));
        }
        Ok(Self { f, n_games, scheme })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.f
    }

    pub fn n_games(&self) -> u64 {
        self.n_games
    }

    pub fn scheme(&self) -> &DiscretizationScheme {
        &self.scheme
    }

    /// Additive smoothing `f_h <- (count_h + lambda) / (N + lambda*(J+1))`,
    /// a guard against empty categories in small samples.
    pub fn smoothed(&self, lambda: f64) -> Result<Self, EstimationError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(EstimationError::InvalidFrequencies(format!(
                "smoothing lambda must be nonnegative, got {lambda}"
            )));
        }
        let n = self.n_games as f64;
        let denom = n + lambda * self.f.len() as f64;
        Ok(Self {
            f: self.f.iter().map(|&x| (x * n + lambda) / denom).collect(),
            n_games: self.n_games,
            scheme: self.scheme.clone(),
        })
    }
}

/// Counts category frequencies over every game of the given seasons.
pub fn count_frequencies(
    seasons: &[SeasonDataset],
    scheme: &DiscretizationScheme,
) -> Result<FrequencyTable, EstimationError> {
    let mut counts = vec![0u64; scheme.categories()];
    for season in seasons {
        for m in &season.matches {
            counts[scheme.categorize(m.margin())] += 1;
        }
    }
    FrequencyTable::from_counts(&counts, scheme.clone())
}

/// Closed-form coefficients from category frequencies.
///
/// Under equal skills the category probabilities equal `P_h(eta*sigma)`, and
/// matching them to the observed frequencies solves in closed form:
///
/// ```text
/// eta       = log10(f_J / f_0) / 2
/// alpha_h   = log10(f_h * f_{J-h}) / 2 - log10(sqrt(f_0 * f_J))
/// delta_h   = log10(f_h / f_{J-h}) / (2 * eta)
/// ```
///
/// Every frequency must be positive, and `f_0 != f_J` (otherwise the home
/// advantage, which also sets the delta scale, is undefined).
pub fn closed_form_coefficients(
    freq: &FrequencyTable,
    sigma: f64,
) -> Result<ModelCoefficients, EstimationError> {
    closed_form_from_frequencies(freq.frequencies(), sigma)
}

/// Closed form on a raw frequency vector; works for odd J as well (no draw
/// category), which even-J schemes never produce but the model supports.
pub fn closed_form_from_frequencies(
    f: &[f64],
    sigma: f64,
) -> Result<ModelCoefficients, EstimationError> {
    if f.len() < 2 {
        return Err(EstimationError::InvalidFrequencies(
            "need at least two categories".into(),
        ));
    }
    let j = f.len() - 1;
    if let Some(h) = f.iter().position(|&x| x <= 0.0) {
        return Err(EstimationError::ZeroFrequency(h));
    }
    if (f[0] - f[j]).abs() <= 1e-12 {
        return Err(EstimationError::DegenerateHfa);
    }
    let eta = 0.5 * (f[j] / f[0]).log10();
    let log_xi = (f[0] * f[j]).sqrt().log10();

    let mut alpha = vec![0.0; j + 1];
    let mut delta = vec![0.0; j + 1];
    delta[0] = -1.0;
    delta[j] = 1.0;
    for h in 1..j {
        alpha[h] = 0.5 * (f[h] * f[j - h]).log10() - log_xi;
        delta[h] = (f[h] / f[j - h]).log10() / (2.0 * eta);
    }
    if delta.windows(2).any(|w| w[1] - w[0] <= 1e-9) {
        return Err(EstimationError::NonMonotoneDelta);
    }
    Ok(ModelCoefficients::new(alpha, delta, eta, sigma)?)
}

/// Starting point for the maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitInit {
    /// Start from the closed-form frequency solution (falls back to neutral
    /// when that solution is unavailable, e.g. a zero frequency).
    Frequency,
    /// Start from zero: flat alpha, equally spaced delta, no home advantage.
    Neutral,
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub sigma: f64,
    /// Convergence threshold on the max-norm of the joint gradient, taken in
    /// the normalized parameterization (skills measured in units of sigma).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Additive smoothing used when counting frequencies for the starting
    /// point; zero disables it.
    pub smoothing: f64,
    pub init: FitInit,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            sigma: 400.0,
            tolerance: 1e-6,
            max_iterations: 10_000,
            smoothing: 0.0,
            init: FitInit::Frequency,
        }
    }
}

/// Fitted constant skills of one season, in rating units.
#[derive(Debug, Clone, Serialize)]
pub struct SeasonSkills {
    pub label: String,
    pub skills: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub coefficients: ModelCoefficients,
    pub per_season_skills: Vec<SeasonSkills>,
    pub final_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the joint gradient at the returned iterate.
    pub gradient_norm: f64,
    /// Objective value at the start of each iteration; nondecreasing up to
    /// floating-point noise.
    pub objective_trace: Vec<f64>,
}

struct SeasonGames {
    label: String,
    teams: Vec<String>,
    games: Vec<(usize, usize, usize)>,
}

fn index_seasons(
    seasons: &[SeasonDataset],
    scheme: &DiscretizationScheme,
) -> Result<Vec<SeasonGames>, EstimationError> {
    let indexed: Vec<SeasonGames> = seasons
        .iter()
        .map(|season| {
            let teams: Vec<String> = season.teams().into_iter().collect();
            let index: BTreeMap<&str, usize> = teams
                .iter()
                .enumerate()
                .map(|(i, name)| (name.as_str(), i))
                .collect();
            let games = season
                .matches
                .iter()
                .map(|m| {
                    (
                        index[m.home.as_str()],
                        index[m.away.as_str()],
                        scheme.categorize(m.margin()),
                    )
                })
                .collect();
            SeasonGames {
                label: season.label.clone(),
                teams,
                games,
            }
        })
        .collect();
    if indexed.iter().map(|s| s.games.len()).sum::<usize>() == 0 {
        return Err(EstimationError::EmptyInput);
    }
    Ok(indexed)
}

/// Free-parameter layout for the fit: the independent alpha entries, the
/// delta gap logits, and eta, in that order. Skills are handled separately
/// and in units of sigma so every gradient component has comparable scale.
#[derive(Clone, Copy)]
struct FreeLayout {
    j: usize,
}

impl FreeLayout {
    fn n_alpha(&self) -> usize {
        self.j / 2
    }

    fn n_pos(&self) -> usize {
        self.j - self.j / 2
    }

    fn n_logits(&self) -> usize {
        self.n_pos() - 1
    }

    fn len(&self) -> usize {
        self.n_alpha() + self.n_logits() + 1
    }

    fn unpack(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let (alpha, delta) = vectors_from_free(
            self.j,
            &v[..self.n_alpha()],
            &v[self.n_alpha()..self.n_alpha() + self.n_logits()],
        );
        (alpha, delta, v[self.len() - 1])
    }

    fn pack(&self, coeffs: &ModelCoefficients) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&coeffs.alpha()[1..=self.n_alpha()]);
        let delta = coeffs.delta();
        let mut gaps = Vec::with_capacity(self.n_pos());
        let mut prev = 0.0;
        for i in 0..self.n_pos() {
            let h = self.j - self.n_pos() + i + 1;
            gaps.push(delta[h] - prev);
            prev = delta[h];
        }
        let pivot = gaps[self.n_pos() - 1].ln();
        for &g in &gaps[..self.n_logits()] {
            v.push(g.ln() - pivot);
        }
        v.push(coeffs.eta());
        v
    }

    fn logits_range(&self) -> std::ops::Range<usize> {
        self.n_alpha()..self.n_alpha() + self.n_logits()
    }
}

/// Season log-likelihood at fixed coefficients, skills in units of sigma.
#[allow(clippy::needless_range_loop)]
fn season_objective(
    alpha: &[f64],
    delta: &[f64],
    eta: f64,
    thetas: &[f64],
    games: &[(usize, usize, usize)],
    scratch: &mut [f64],
) -> f64 {
    let n = alpha.len();
    let mut total = 0.0;
    for &(home, away, y) in games {
        let w = thetas[home] - thetas[away] + eta;
        let mut max_x = f64::NEG_INFINITY;
        for h in 0..n {
            scratch[h] = alpha[h] + delta[h] * w;
            max_x = max_x.max(scratch[h]);
        }
        let mut sum = 0.0;
        for h in 0..n {
            sum += (LN_10 * (scratch[h] - max_x)).exp();
        }
        total += LN_10 * (scratch[y] - max_x) - sum.ln();
    }
    total
}

fn total_objective(
    layout: FreeLayout,
    v: &[f64],
    indexed: &[SeasonGames],
    thetas: &[Vec<f64>],
    scratch: &mut [f64],
) -> f64 {
    let (alpha, delta, eta) = layout.unpack(v);
    indexed
        .iter()
        .zip(thetas)
        .map(|(s, th)| season_objective(&alpha, &delta, eta, th, &s.games, scratch))
        .sum()
}

/// Joint analytic gradient of the total log-likelihood with respect to the
/// free coefficient vector and all normalized skills. Returns the objective
/// as a byproduct.
#[allow(clippy::needless_range_loop)]
fn full_gradient(
    layout: FreeLayout,
    v: &[f64],
    indexed: &[SeasonGames],
    thetas: &[Vec<f64>],
) -> (Vec<f64>, Vec<Vec<f64>>, f64) {
    let j = layout.j;
    let n = j + 1;
    let (alpha, delta, eta) = layout.unpack(v);
    let scores: Vec<f64> = delta.iter().map(|&d| (d + 1.0) / 2.0).collect();
    let gaps = gaps_from_logits(&v[layout.logits_range()]);
    let cums: Vec<f64> = gaps
        .iter()
        .scan(0.0, |acc, &g| {
            *acc += g;
            Some(*acc)
        })
        .collect();

    let mut g_alpha = vec![0.0; layout.n_alpha()];
    let mut g_delta_pos = vec![0.0; layout.n_pos()];
    let mut g_eta = 0.0;
    let mut g_thetas: Vec<Vec<f64>> = indexed.iter().map(|s| vec![0.0; s.teams.len()]).collect();
    let mut loglik = 0.0;
    let mut xs = vec![0.0; n];
    let mut probs = vec![0.0; n];

    for (s, season) in indexed.iter().enumerate() {
        let th = &thetas[s];
        let gt = &mut g_thetas[s];
        for &(home, away, y) in &season.games {
            let w = th[home] - th[away] + eta;
            let mut max_x = f64::NEG_INFINITY;
            for h in 0..n {
                xs[h] = alpha[h] + delta[h] * w;
                max_x = max_x.max(xs[h]);
            }
            let mut sum = 0.0;
            for h in 0..n {
                probs[h] = (LN_10 * (xs[h] - max_x)).exp();
                sum += probs[h];
            }
            for p in probs.iter_mut() {
                *p /= sum;
            }
            loglik += LN_10 * (xs[y] - max_x) - sum.ln();

            let expected: f64 = scores.iter().zip(&probs).map(|(&s, &p)| s * p).sum();
            let common = 2.0 * LN_10 * (scores[y] - expected);
            gt[home] += common;
            gt[away] -= common;
            g_eta += common;

            for k in 1..=layout.n_alpha() {
                let mirror = j - k;
                let term = if mirror == k {
                    f64::from(y == k) - probs[k]
                } else {
                    f64::from(y == k) + f64::from(y == mirror) - (probs[k] + probs[mirror])
                };
                g_alpha[k - 1] += LN_10 * term;
            }
            for i in 0..layout.n_logits() {
                let h = j - layout.n_pos() + i + 1;
                let mirror = j - h;
                let ind = f64::from(y == h) - f64::from(y == mirror);
                g_delta_pos[i] += LN_10 * w * (ind - (probs[h] - probs[mirror]));
            }
        }
    }

    // Chain through the softmax: d delta_pos[i] / d logit[m] = g_m (1{m<=i} - c_i).
    let mut gv = g_alpha;
    for m in 0..layout.n_logits() {
        let mut acc = 0.0;
        for i in 0..layout.n_logits() {
            let step = if m <= i { 1.0 } else { 0.0 };
            acc += g_delta_pos[i] * gaps[m] * (step - cums[i]);
        }
        gv.push(acc);
    }
    gv.push(g_eta);
    (gv, g_thetas, loglik)
}

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-10;
const MAX_STEP: f64 = 1e4;

/// Per-block line-search state: the previous iterate and gradient for the
/// Barzilai-Borwein step estimate, plus the last accepted step as fallback.
struct BlockState {
    prev: Option<(Vec<f64>, Vec<f64>)>,
    fallback: f64,
}

impl BlockState {
    fn new() -> Self {
        Self {
            prev: None,
            fallback: 1e-2,
        }
    }

    /// Spectral (Barzilai-Borwein) step from the last iterate/gradient pair;
    /// falls back to a growing multiple of the last accepted step when no
    /// curvature information is available.
    fn initial_step(&self, x: &[f64], g: &[f64]) -> f64 {
        let t = match &self.prev {
            Some((px, pg)) => {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..x.len() {
                    let s = x[i] - px[i];
                    let y = g[i] - pg[i];
                    ss += s * s;
                    sy += s * y;
                }
                // Near a maximum the gradient shrinks along the movement, so
                // s'y < 0 and -s's/s'y estimates the inverse curvature.
                if sy < 0.0 && ss > 0.0 {
                    -ss / sy
                } else {
                    self.fallback * 2.0
                }
            }
            None => self.fallback,
        };
        t.clamp(MIN_STEP, MAX_STEP)
    }

    fn remember(&mut self, x: &[f64], g: &[f64]) {
        self.prev = Some((x.to_vec(), g.to_vec()));
    }
}

/// Backtracking (Armijo) line search along an ascent direction. Moves `x` in
/// place and returns the new objective; on failure leaves `x` untouched and
/// returns `f0`.
fn line_search(
    x: &mut Vec<f64>,
    direction: &[f64],
    f0: f64,
    state: &mut BlockState,
    mut eval: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let norm2: f64 = direction.iter().map(|d| d * d).sum();
    if norm2 == 0.0 || !norm2.is_finite() {
        return f0;
    }
    let mut t = state.initial_step(x, direction);
    state.remember(x, direction);
    for _ in 0..60 {
        let candidate: Vec<f64> = x
            .iter()
            .zip(direction)
            .map(|(&xi, &di)| xi + t * di)
            .collect();
        let f1 = eval(&candidate);
        if f1.is_finite() && f1 >= f0 + ARMIJO_C * t * norm2 {
            *x = candidate;
            state.fallback = t;
            return f1;
        }
        t *= 0.5;
    }
    f0
}

/// Maximum-likelihood fit of the coefficients with constant per-season
/// skills, by block-coordinate gradient ascent: full-batch steps on each
/// season's skills alternate with steps on the free coefficients, each with
/// a backtracking line search, until the joint gradient max-norm drops below
/// the tolerance. Skills are re-centered to mean zero after every iteration
/// (the likelihood only sees differences).
pub fn ml_fit(
    seasons: &[SeasonDataset],
    scheme: &DiscretizationScheme,
    config: &FitConfig,
) -> Result<FitReport, EstimationError> {
    let indexed = index_seasons(seasons, scheme)?;
    let layout = FreeLayout { j: scheme.j() };
    let n_categories = scheme.categories();

    // A category never observed in training puts its maximum-likelihood
    // weight on the boundary of the parameter space (the likelihood is
    // unbounded in that direction). The fit still returns its best interior
    // iterate but is never reported as converged.
    let counts = count_frequencies(seasons, scheme)?;
    let boundary_data = counts.frequencies().contains(&0.0);

    let mut v: Vec<f64> = match config.init {
        FitInit::Neutral => vec![0.0; layout.len()],
        FitInit::Frequency => {
            let freq = if config.smoothing > 0.0 {
                counts.smoothed(config.smoothing)?
            } else {
                counts.clone()
            };
            match closed_form_coefficients(&freq, config.sigma) {
                Ok(coeffs) => layout.pack(&coeffs),
                Err(_) => vec![0.0; layout.len()],
            }
        }
    };
    let mut thetas: Vec<Vec<f64>> = indexed.iter().map(|s| vec![0.0; s.teams.len()]).collect();
    let mut theta_states: Vec<BlockState> = indexed.iter().map(|_| BlockState::new()).collect();
    let mut v_state = BlockState::new();
    let mut scratch = vec![0.0; n_categories];

    let (mut gv, mut g_thetas, mut objective) = full_gradient(layout, &v, &indexed, &thetas);
    let grad_max = |gv: &[f64], gts: &[Vec<f64>]| -> f64 {
        gv.iter()
            .chain(gts.iter().flatten())
            .fold(0.0_f64, |m, &g| m.max(g.abs()))
    };
    let mut gradient_norm = grad_max(&gv, &g_thetas);
    let mut objective_trace = vec![objective];
    let mut iterations = 0;
    let mut converged = !boundary_data && gradient_norm < config.tolerance;
    let mut stalled = 0;

    while iterations < config.max_iterations && !converged {
        iterations += 1;
        let mut moved = false;

        for (s, season) in indexed.iter().enumerate() {
            let (alpha, delta, eta) = layout.unpack(&v);
            let f0 = season_objective(&alpha, &delta, eta, &thetas[s], &season.games, &mut scratch);
            let f1 = line_search(&mut thetas[s], &g_thetas[s], f0, &mut theta_states[s], |cand| {
                season_objective(&alpha, &delta, eta, cand, &season.games, &mut scratch)
            });
            if f1 > f0 {
                moved = true;
            }
        }
        for th in &mut thetas {
            let mean = th.iter().sum::<f64>() / th.len() as f64;
            for x in th.iter_mut() {
                *x -= mean;
            }
        }

        let (gv_now, _, f0) = full_gradient(layout, &v, &indexed, &thetas);
        let f1 = line_search(&mut v, &gv_now, f0, &mut v_state, |cand| {
            total_objective(layout, cand, &indexed, &thetas, &mut scratch)
        });
        for u in &mut v[layout.logits_range()] {
            *u = u.clamp(-30.0, 30.0);
        }
        if f1 > f0 {
            moved = true;
        }

        let (gv_next, g_thetas_next, obj_next) = full_gradient(layout, &v, &indexed, &thetas);
        gv = gv_next;
        g_thetas = g_thetas_next;
        objective = obj_next;
        gradient_norm = grad_max(&gv, &g_thetas);
        objective_trace.push(objective);
        if gradient_norm < config.tolerance {
            converged = !boundary_data;
            break;
        }
        if moved {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 2 {
                break;
            }
        }
    }

    let (alpha, delta, eta) = layout.unpack(&v);
    if delta.windows(2).any(|w| w[1] - w[0] <= 1e-9) {
        return Err(EstimationError::NonMonotoneDelta);
    }
    let coefficients = ModelCoefficients::new(alpha, delta, eta, config.sigma)?;
    let per_season_skills = indexed
        .iter()
        .zip(&thetas)
        .map(|(season, th)| SeasonSkills {
            label: season.label.clone(),
            skills: season
                .teams
                .iter()
                .zip(th)
                .map(|(team, &t)| (team.clone(), t * config.sigma))
                .collect(),
        })
        .collect();
    Ok(FitReport {
        coefficients,
        per_season_skills,
        final_log_likelihood: objective,
        iterations,
        converged,
        gradient_norm,
        objective_trace,
    })
}

/// One point of the adaptation-step sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KScorePoint {
    pub k_tilde: f64,
    pub log_score: f64,
}

/// Result of sweeping the adaptation step over a grid.
#[derive(Debug, Clone, Serialize)]
pub struct KSweep {
    pub best_k_tilde: f64,
    pub best_log_score: f64,
    pub curve: Vec<KScorePoint>,
}

impl KSweep {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("k_tilde,log_score\n");
        for p in &self.curve {
            out.push_str(&format!("{},{}\n", p.k_tilde, p.log_score));
        }
        out
    }
}

/// Evenly spaced step grid over `[lo, hi]` (inclusive up to rounding).
pub fn k_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, EstimationError> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite())
        || lo <= 0.0
        || step <= 0.0
        || hi < lo
    {
        return Err(EstimationError::InvalidGrid);
    }
    let mut grid = Vec::new();
    let mut i = 0u32;
    loop {
        let k = lo + step * i as f64;
        if k > hi + 1e-12 {
            break;
        }
        grid.push(k);
        i += 1;
    }
    Ok(grid)
}

/// Runs the engine over each season for every step in the grid and scores
/// the post-burn-in predictions; returns the score-minimizing step and the
/// full curve. Every season starts from a fresh table.
pub fn sweep_k(
    seasons: &[SeasonDataset],
    scheme: &DiscretizationScheme,
    coeffs: &ModelCoefficients,
    apply_hfa: bool,
    grid: &[f64],
    tau_fraction: f64,
) -> Result<KSweep, EstimationError> {
    if grid.is_empty() || grid.iter().any(|&k| !(k.is_finite() && k > 0.0)) {
        return Err(EstimationError::InvalidGrid);
    }
    let eval_config = EvalConfig::new(tau_fraction)?;
    let mut curve = Vec::with_capacity(grid.len());
    for &k_tilde in grid {
        let mut engine_config = EngineConfig::new(k_tilde, coeffs.clone())?;
        engine_config.apply_hfa = apply_hfa;
        let mut per_season = Vec::with_capacity(seasons.len());
        for season in seasons {
            let run = run_season(season, scheme, &engine_config, SkillTable::default())?;
            per_season.push(season_log_scores(&run, coeffs, apply_hfa)?);
        }
        curve.push(KScorePoint {
            k_tilde,
            log_score: average_log_score(&per_season, &eval_config)?,
        });
    }
    let best = curve
        .iter()
        .copied()
        .min_by(|a, b| a.log_score.total_cmp(&b.log_score))
        .expect("grid is nonempty");
    Ok(KSweep {
        best_k_tilde: best.k_tilde,
        best_log_score: best.log_score,
        curve,
    })
}
