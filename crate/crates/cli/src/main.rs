//! `elo-mov`: rate one-on-one competitions from the discretized margin of
//! victory.
//!
//! Typical pipeline: `ingest` season CSVs into canonical JSON, `estimate`
//! coefficients on the training seasons, `sweep-k` the adaptation step,
//! then `rate` and `eval` on held-out seasons. `simulate` generates
//! synthetic leagues and `curves` exports the model's probability and
//! expected-score curves for plotting.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

mod artifacts;
mod settings;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use elo_mov::data::{parse_season_csv, SeasonDataset};
use elo_mov::engine::{run_season, EngineConfig, SkillTable};
use elo_mov::estimation::{
    closed_form_coefficients, count_frequencies, k_grid, ml_fit, sweep_k, FitConfig, FitInit,
};
use elo_mov::evaluation::{evaluate_seasons, EvalConfig};
use elo_mov::model::{DiscretizationScheme, ModelCoefficients};
use elo_mov::simulator::{generate_league, SimSpec};

use artifacts::CoefficientsFile;
use settings::{parse_range, parse_scheme, FileConfig};

#[derive(Parser)]
#[command(name = "elo-mov", version, about = "Margin-of-victory rating engine")]
struct Cli {
    /// Flat TOML config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for generated artifacts (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert season CSV files (football-data.co.uk layout) to season JSON
    Ingest {
        /// CSV files, one per season
        files: Vec<PathBuf>,
        /// Season labels, comma separated (default: file stems)
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
    },
    /// Estimate model coefficients from season JSON files
    Estimate {
        files: Vec<PathBuf>,
        /// freq (closed form from category frequencies) or ml
        #[arg(long)]
        mode: Option<String>,
        /// Discretization, e.g. 2, 4:2 or 6:1,2
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Additive smoothing for category counts
        #[arg(long)]
        smoothing: Option<f64>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
        /// ML starting point: freq or neutral
        #[arg(long)]
        init: Option<String>,
        /// Restrict to these season labels, comma separated
        #[arg(long, value_delimiter = ',')]
        train_labels: Vec<String>,
    },
    /// Run the online rating over seasons, exporting trajectories
    Rate {
        files: Vec<PathBuf>,
        #[arg(long)]
        coefficients: PathBuf,
        /// Normalized adaptation step
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        scheme: Option<String>,
        /// Apply the home advantage inside predictions (default: true)
        #[arg(long)]
        hfa: Option<bool>,
        /// Carry ratings across seasons instead of resetting
        #[arg(long)]
        carry: bool,
    },
    /// Score out-of-sample predictions against outcomes and the odds baseline
    Eval {
        files: Vec<PathBuf>,
        #[arg(long)]
        coefficients: PathBuf,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        scheme: Option<String>,
        /// Burn-in fraction excluded from score averages (default: 0.5)
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        hfa: Option<bool>,
        #[arg(long, value_delimiter = ',')]
        test_labels: Vec<String>,
        #[arg(long)]
        carry: bool,
    },
    /// Sweep the adaptation step, exporting the (step, score) curve
    #[command(name = "sweep-k")]
    SweepK {
        files: Vec<PathBuf>,
        #[arg(long)]
        coefficients: PathBuf,
        /// Grid as lo:hi:step (default 0.01:0.5:0.01)
        #[arg(long)]
        k_grid: Option<String>,
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        hfa: Option<bool>,
        #[arg(long, value_delimiter = ',')]
        train_labels: Vec<String>,
    },
    /// Generate a synthetic league from a coefficients file
    Simulate {
        #[arg(long)]
        coefficients: PathBuf,
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        teams: Option<usize>,
        /// True skills are evenly spread over this many rating points
        #[arg(long)]
        spread: Option<f64>,
        /// Number of double round-robins
        #[arg(long)]
        rounds: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        label: Option<String>,
    },
    /// Export probability and expected-score curves plus the score anchors
    Curves {
        #[arg(long)]
        coefficients: PathBuf,
        /// z grid as lo:hi:step (default -3*sigma:3*sigma:sigma/50)
        #[arg(long, allow_hyphen_values = true)]
        z_range: Option<String>,
    },
}

struct CliError {
    code: i32,
    error: anyhow::Error,
}

type CliResult<T> = Result<T, CliError>;

fn usage(error: anyhow::Error) -> CliError {
    CliError { code: 1, error }
}

fn data(error: impl Into<anyhow::Error>) -> CliError {
    CliError {
        code: 2,
        error: error.into(),
    }
}

fn numeric(error: impl Into<anyhow::Error>) -> CliError {
    CliError {
        code: 3,
        error: error.into(),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/usage text.
            let _ = e.print();
            let code = if e.use_stderr() { 1 } else { 0 };
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {:#}", err.error);
        std::process::exit(err.code);
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let config = FileConfig::load(cli.config.as_deref()).map_err(usage)?;
    let out_dir = cli
        .out
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir).map_err(data)?;

    match cli.command {
        Command::Ingest { files, labels } => cmd_ingest(&files, &labels, &out_dir),
        Command::Estimate {
            files,
            mode,
            scheme,
            sigma,
            smoothing,
            tolerance,
            max_iterations,
            init,
            train_labels,
        } => {
            let scheme = scheme
                .or_else(|| config.scheme.clone())
                .ok_or_else(|| usage(anyhow!("a --scheme (e.g. 4:2) is required")))?;
            let scheme = parse_scheme(&scheme).map_err(usage)?;
            let params = EstimateParams {
                mode: mode.or_else(|| config.mode.clone()).unwrap_or_else(|| "freq".into()),
                sigma: sigma.or(config.sigma).unwrap_or(400.0),
                smoothing: smoothing.or(config.smoothing).unwrap_or(0.0),
                tolerance: tolerance.or(config.tolerance).unwrap_or(1e-6),
                max_iterations: max_iterations.or(config.max_iterations).unwrap_or(10_000),
                init: init.or_else(|| config.init.clone()).unwrap_or_else(|| "freq".into()),
            };
            let labels = merge_labels(train_labels, config.train_labels.clone());
            cmd_estimate(&files, &labels, &scheme, &params, &out_dir)
        }
        Command::Rate {
            files,
            coefficients,
            k,
            scheme,
            hfa,
            carry,
        } => {
            let (coeffs, scheme) = load_model(&coefficients, scheme, &config)?;
            let k = k
                .or(config.k)
                .ok_or_else(|| usage(anyhow!("an adaptation step --k is required")))?;
            let apply_hfa = hfa.or(config.hfa).unwrap_or(true);
            let reset = !carry && config.reset_per_season.unwrap_or(true);
            cmd_rate(&files, coeffs, &scheme, k, apply_hfa, reset, &out_dir)
        }
        Command::Eval {
            files,
            coefficients,
            k,
            scheme,
            tau,
            hfa,
            test_labels,
            carry,
        } => {
            let (coeffs, scheme) = load_model(&coefficients, scheme, &config)?;
            let k = k
                .or(config.k)
                .ok_or_else(|| usage(anyhow!("an adaptation step --k is required")))?;
            let tau = tau.or(config.tau).unwrap_or(0.5);
            let apply_hfa = hfa.or(config.hfa).unwrap_or(true);
            let reset = !carry && config.reset_per_season.unwrap_or(true);
            let labels = merge_labels(test_labels, config.test_labels.clone());
            cmd_eval(&files, &labels, coeffs, &scheme, k, tau, apply_hfa, reset, &out_dir)
        }
        Command::SweepK {
            files,
            coefficients,
            k_grid: grid,
            scheme,
            tau,
            hfa,
            train_labels,
        } => {
            let (coeffs, scheme) = load_model(&coefficients, scheme, &config)?;
            let grid_spec = grid
                .or_else(|| config.k_grid.clone())
                .unwrap_or_else(|| "0.01:0.5:0.01".into());
            let (lo, hi, step) = parse_range(&grid_spec).map_err(usage)?;
            let grid = k_grid(lo, hi, step).map_err(|e| usage(anyhow!("{e}")))?;
            let tau = tau.or(config.tau).unwrap_or(0.5);
            let apply_hfa = hfa.or(config.hfa).unwrap_or(true);
            let labels = merge_labels(train_labels, config.train_labels.clone());
            cmd_sweep_k(&files, &labels, coeffs, &scheme, &grid, tau, apply_hfa, &out_dir)
        }
        Command::Simulate {
            coefficients,
            scheme,
            teams,
            spread,
            rounds,
            seed,
            label,
        } => {
            let (coeffs, scheme) = load_model(&coefficients, scheme, &config)?;
            let teams = teams.or(config.teams).unwrap_or(20);
            let spread = spread.or(config.spread).unwrap_or(0.0);
            let rounds = rounds.or(config.rounds).unwrap_or(10);
            let seed = seed.or(config.seed).unwrap_or(1);
            let label = label
                .or_else(|| config.label.clone())
                .unwrap_or_else(|| format!("sim-{seed}"));
            cmd_simulate(coeffs, scheme, teams, spread, rounds, seed, &label, &out_dir)
        }
        Command::Curves {
            coefficients,
            z_range,
        } => {
            let (coeffs, _) = load_model(&coefficients, None, &config)?;
            let range = match z_range.or_else(|| config.z_range.clone()) {
                Some(spec) => Some(parse_range(&spec).map_err(usage)?),
                None => None,
            };
            cmd_curves(coeffs, range, &out_dir)
        }
    }
}

fn merge_labels(flag: Vec<String>, file: Option<Vec<String>>) -> Vec<String> {
    if !flag.is_empty() {
        flag
    } else {
        file.unwrap_or_default()
    }
}

/// Loads the coefficients artifact; the scheme comes from the flag, the
/// config file, or the artifact itself, in that order.
fn load_model(
    path: &Path,
    scheme_flag: Option<String>,
    config: &FileConfig,
) -> CliResult<(ModelCoefficients, DiscretizationScheme)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read coefficients file {}", path.display()))
        .map_err(data)?;
    let file: CoefficientsFile = serde_json::from_str(&text)
        .with_context(|| format!("cannot parse coefficients file {}", path.display()))
        .map_err(data)?;
    let coeffs = file.coefficients().map_err(numeric)?;
    let scheme = match scheme_flag.or_else(|| config.scheme.clone()) {
        Some(spec) => parse_scheme(&spec).map_err(usage)?,
        None => file
            .scheme()
            .map_err(numeric)?
            .ok_or_else(|| usage(anyhow!("no scheme in coefficients file; pass --scheme")))?,
    };
    if scheme.j() != coeffs.j() {
        return Err(usage(anyhow!(
            "scheme has J={} but coefficients have J={}",
            scheme.j(),
            coeffs.j()
        )));
    }
    Ok((coeffs, scheme))
}

fn load_seasons(files: &[PathBuf]) -> CliResult<Vec<SeasonDataset>> {
    if files.is_empty() {
        return Err(usage(anyhow!("at least one season file is required")));
    }
    let mut seasons = Vec::with_capacity(files.len());
    let mut seen = BTreeSet::new();
    for path in files {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read season file {}", path.display()))
            .map_err(data)?;
        let season = SeasonDataset::from_json(&text)
            .with_context(|| format!("invalid season file {}", path.display()))
            .map_err(data)?;
        if !seen.insert(season.label.clone()) {
            return Err(data(anyhow!("duplicate season label {:?}", season.label)));
        }
        seasons.push(season);
    }
    Ok(seasons)
}

/// Restricts to the listed labels (all seasons when the list is empty).
fn select_labels(seasons: Vec<SeasonDataset>, labels: &[String]) -> CliResult<Vec<SeasonDataset>> {
    if labels.is_empty() {
        return Ok(seasons);
    }
    let mut selected = Vec::with_capacity(labels.len());
    for label in labels {
        match seasons.iter().find(|s| &s.label == label) {
            Some(season) => selected.push(season.clone()),
            None => return Err(data(anyhow!("label {label:?} not found among season files"))),
        }
    }
    Ok(selected)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(data)
}

fn cmd_ingest(files: &[PathBuf], labels: &[String], out_dir: &Path) -> CliResult<()> {
    if files.is_empty() {
        return Err(usage(anyhow!("at least one CSV file is required")));
    }
    if !labels.is_empty() && labels.len() != files.len() {
        return Err(usage(anyhow!(
            "{} labels given for {} files",
            labels.len(),
            files.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for (i, path) in files.iter().enumerate() {
        let label = if labels.is_empty() {
            path.file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .ok_or_else(|| usage(anyhow!("cannot derive a label from {}", path.display())))?
        } else {
            labels[i].clone()
        };
        if !seen.insert(label.clone()) {
            return Err(data(anyhow!("duplicate season label {label:?}")));
        }
        let file = fs::File::open(path)
            .with_context(|| format!("cannot open {}", path.display()))
            .map_err(data)?;
        let season = parse_season_csv(file, &label)
            .with_context(|| format!("while parsing {}", path.display()))
            .map_err(data)?;
        let target = out_dir.join(format!("{label}.json"));
        write_file(&target, &season.to_json().map_err(data)?)?;
        println!(
            "{label}: {} games, {} teams, full double round-robin: {} -> {}",
            season.len(),
            season.teams().len(),
            if season.is_full_double_round_robin() { "yes" } else { "no" },
            target.display()
        );
    }
    Ok(())
}

struct EstimateParams {
    mode: String,
    sigma: f64,
    smoothing: f64,
    tolerance: f64,
    max_iterations: usize,
    init: String,
}

fn cmd_estimate(
    files: &[PathBuf],
    labels: &[String],
    scheme: &DiscretizationScheme,
    params: &EstimateParams,
    out_dir: &Path,
) -> CliResult<()> {
    let seasons = select_labels(load_seasons(files)?, labels)?;
    let n_games: u64 = seasons.iter().map(|s| s.len() as u64).sum();

    let artifact = match params.mode.as_str() {
        "freq" => {
            let freq = count_frequencies(&seasons, scheme).map_err(numeric)?;
            let freq = if params.smoothing > 0.0 {
                freq.smoothed(params.smoothing).map_err(numeric)?
            } else {
                freq
            };
            let coeffs = closed_form_coefficients(&freq, params.sigma).map_err(numeric)?;
            let f = freq.frequencies();
            let mut artifact = CoefficientsFile::new("freq", scheme, &coeffs);
            artifact.xi = Some((f[0] * f[scheme.j()]).sqrt());
            artifact.n_games = Some(n_games);
            artifact
        }
        "ml" => {
            let init = match params.init.as_str() {
                "freq" => FitInit::Frequency,
                "neutral" => FitInit::Neutral,
                other => return Err(usage(anyhow!("unknown init {other:?} (freq|neutral)"))),
            };
            let config = FitConfig {
                sigma: params.sigma,
                tolerance: params.tolerance,
                max_iterations: params.max_iterations,
                smoothing: params.smoothing,
                init,
            };
            let report = ml_fit(&seasons, scheme, &config).map_err(numeric)?;
            let mut artifact = CoefficientsFile::new("ml", scheme, &report.coefficients);
            artifact.n_games = Some(n_games);
            artifact.log_likelihood = Some(report.final_log_likelihood);
            artifact.converged = Some(report.converged);
            artifact
        }
        other => return Err(usage(anyhow!("unknown mode {other:?} (freq|ml)"))),
    };

    let json_path = out_dir.join("coefficients.json");
    write_file(
        &json_path,
        &serde_json::to_string_pretty(&artifact).map_err(data)?,
    )?;
    let report = artifact.report(scheme);
    write_file(&out_dir.join("report.txt"), &report)?;
    print!("{report}");
    println!("coefficients -> {}", json_path.display());
    Ok(())
}

fn cmd_rate(
    files: &[PathBuf],
    coeffs: ModelCoefficients,
    scheme: &DiscretizationScheme,
    k: f64,
    apply_hfa: bool,
    reset: bool,
    out_dir: &Path,
) -> CliResult<()> {
    let seasons = load_seasons(files)?;
    let sigma = coeffs.sigma();
    let mut config = EngineConfig::new(k, coeffs).map_err(numeric)?;
    config.apply_hfa = apply_hfa;
    let mut table = SkillTable::default();
    for season in &seasons {
        let initial = if reset { SkillTable::default() } else { table };
        let run = run_season(season, scheme, &config, initial).map_err(numeric)?;
        let trajectory_path = out_dir.join(format!("trajectory_{}.csv", season.label));
        write_file(&trajectory_path, &run.trajectory_csv())?;
        let ratings_path = out_dir.join(format!("ratings_{}.csv", season.label));
        write_file(&ratings_path, &run.table.ratings_csv(sigma))?;
        println!(
            "{}: {} games -> {}, {}",
            season.label,
            run.updates.len(),
            trajectory_path.display(),
            ratings_path.display()
        );
        table = run.table;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    files: &[PathBuf],
    labels: &[String],
    coeffs: ModelCoefficients,
    scheme: &DiscretizationScheme,
    k: f64,
    tau: f64,
    apply_hfa: bool,
    reset: bool,
    out_dir: &Path,
) -> CliResult<()> {
    let seasons = select_labels(load_seasons(files)?, labels)?;
    let mut config = EngineConfig::new(k, coeffs).map_err(numeric)?;
    config.apply_hfa = apply_hfa;
    let eval_config = EvalConfig::new(tau).map_err(numeric)?;
    let report =
        evaluate_seasons(&seasons, scheme, &config, &eval_config, reset).map_err(numeric)?;

    write_file(
        &out_dir.join("eval_report.json"),
        &serde_json::to_string_pretty(&report).map_err(data)?,
    )?;
    write_file(&out_dir.join("eval_report.csv"), &report.to_csv_string())?;
    println!(
        "model log score: {:.6} over {} games ({} seasons, burn-in fraction {})",
        report.pooled_model_log_score,
        report.total_scored,
        report.seasons.len(),
        tau
    );
    match report.pooled_baseline_log_score {
        Some(baseline) => println!(
            "odds baseline:   {:.6} over {} games ({} excluded for missing odds)",
            baseline, report.total_baseline_scored, report.total_baseline_excluded
        ),
        None => println!("odds baseline:   (no games with odds)"),
    }
    println!("report -> {}", out_dir.join("eval_report.json").display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep_k(
    files: &[PathBuf],
    labels: &[String],
    coeffs: ModelCoefficients,
    scheme: &DiscretizationScheme,
    grid: &[f64],
    tau: f64,
    apply_hfa: bool,
    out_dir: &Path,
) -> CliResult<()> {
    let seasons = select_labels(load_seasons(files)?, labels)?;
    let sweep = sweep_k(&seasons, scheme, &coeffs, apply_hfa, grid, tau).map_err(numeric)?;
    let path = out_dir.join("sweep.csv");
    write_file(&path, &sweep.to_csv_string())?;
    println!(
        "best k: {} (log score {:.6}) over {} grid points -> {}",
        sweep.best_k_tilde,
        sweep.best_log_score,
        sweep.curve.len(),
        path.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    coeffs: ModelCoefficients,
    scheme: DiscretizationScheme,
    teams: usize,
    spread: f64,
    rounds: u32,
    seed: u64,
    label: &str,
    out_dir: &Path,
) -> CliResult<()> {
    if teams < 2 {
        return Err(usage(anyhow!("at least two teams are required")));
    }
    let true_skills: Vec<f64> = (0..teams)
        .map(|i| {
            if teams == 1 || spread == 0.0 {
                0.0
            } else {
                -spread / 2.0 + spread * i as f64 / (teams - 1) as f64
            }
        })
        .collect();
    let spec = SimSpec {
        coefficients: coeffs,
        scheme,
        true_skills,
        rounds,
        seed,
        label: label.to_string(),
    };
    let season = generate_league(&spec).map_err(numeric)?;
    let path = out_dir.join(format!("{label}.json"));
    write_file(&path, &season.to_json().map_err(data)?)?;
    println!(
        "{label}: {} games, {} teams, seed {seed} -> {}",
        season.len(),
        teams,
        path.display()
    );
    Ok(())
}

fn cmd_curves(
    coeffs: ModelCoefficients,
    range: Option<(f64, f64, f64)>,
    out_dir: &Path,
) -> CliResult<()> {
    let sigma = coeffs.sigma();
    let (lo, hi, step) = range.unwrap_or((-3.0 * sigma, 3.0 * sigma, sigma / 50.0));
    if !(step > 0.0 && hi > lo) {
        return Err(usage(anyhow!("z range must satisfy lo < hi with step > 0")));
    }
    let points = ((hi - lo) / step).ceil() as usize + 1;
    if points > 1_000_000 {
        return Err(usage(anyhow!("z range yields {points} points; use a coarser step")));
    }

    let j = coeffs.j();
    let mut csv = String::from("z");
    for h in 0..=j {
        let _ = write!(csv, ",p{h}");
    }
    csv.push_str(",G\n");
    for i in 0..points {
        let z = (lo + step * i as f64).min(hi);
        let probs = coeffs.category_probs(z, true).map_err(numeric)?;
        let expected = coeffs.expected_score(z, true).map_err(numeric)?;
        let _ = write!(csv, "{z}");
        for p in probs {
            let _ = write!(csv, ",{p}");
        }
        let _ = writeln!(csv, ",{expected}");
    }
    let curves_path = out_dir.join("curves.csv");
    write_file(&curves_path, &csv)?;

    // Rating differences at which each interior category is most likely:
    // the solutions of G(z + eta*sigma) = score(h).
    let scores = coeffs.score_map();
    let mut anchors = String::from("h,score,z_hat\n");
    for h in 1..j {
        let target = scores.scores()[h];
        let z_hat = coeffs.z_at_expected_score(target, true).map_err(numeric)?;
        let _ = writeln!(anchors, "{h},{target},{z_hat}");
    }
    let anchors_path = out_dir.join("score_anchors.csv");
    write_file(&anchors_path, &anchors)?;
    println!(
        "{points} grid points -> {}, anchors -> {}",
        curves_path.display(),
        anchors_path.display()
    );
    Ok(())
}
