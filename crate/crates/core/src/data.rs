//! Season data: ingestion of real match CSVs (football-data.co.uk layout),
//! the canonical season JSON format, and train/test splits.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use thiserror::Error;

/// Version tag written into every canonical season JSON file.
pub const SEASON_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing required column(s): {0}")]
    MissingColumns(String),
    #[error("file contains no match rows")]
    EmptyFile,
    #[error("row {line}: {reason}")]
    Row { line: u64, reason: String },
    #[error("duplicate season label: {0}")]
    DuplicateLabel(String),
    #[error("train and test label sets overlap: {0}")]
    OverlappingSplit(String),
    #[error("label not found among datasets: {0}")]
    MissingLabel(String),
    #[error("unsupported season schema version {0} (expected {SEASON_SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("invalid season data: {0}")]
    InvalidSeason(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Decimal betting odds for the ternary outcome of one match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Odds {
    pub home: f64,
    pub draw: f64,
    pub away: f64,
}

/// One game: sequence index within the season, calendar date, the two team
/// identifiers, final points for each side and optional decimal odds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub t: usize,
    pub date: NaiveDate,
    pub home: String,
    pub away: String,
    pub home_points: u32,
    pub away_points: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub odds: Option<Odds>,
}

impl MatchRecord {
    /// Signed margin of victory `home_points - away_points`.
    pub fn margin(&self) -> i32 {
        self.home_points as i32 - self.away_points as i32
    }
}

/// A time-ordered season of matches under one label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonDataset {
    pub label: String,
    pub matches: Vec<MatchRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct SeasonFile {
    schema_version: u32,
    label: String,
    matches: Vec<MatchRecord>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl SeasonDataset {
    pub fn new(label: impl Into<String>, matches: Vec<MatchRecord>) -> Self {
        Self {
            label: label.into(),
            matches,
            metadata: BTreeMap::new(),
        }
    }

    /// All team identifiers appearing in the season.
    pub fn teams(&self) -> BTreeSet<String> {
        let mut set = BTreeSet::new();
        for m in &self.matches {
            set.insert(m.home.clone());
            set.insert(m.away.clone());
        }
        set
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// True when the season is a full double round-robin: with M teams,
    /// exactly M(M-1) games.
    pub fn is_full_double_round_robin(&self) -> bool {
        let m = self.teams().len();
        m >= 2 && self.matches.len() == m * (m - 1)
    }

    /// Serializes to the canonical season JSON (with schema version field).
    pub fn to_json(&self) -> Result<String, DataError> {
        let file = SeasonFile {
            schema_version: SEASON_SCHEMA_VERSION,
            label: self.label.clone(),
            matches: self.matches.clone(),
            metadata: self.metadata.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses canonical season JSON, checking the schema version and the
    /// basic season invariants.
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let file: SeasonFile = serde_json::from_str(text)?;
        if file.schema_version != SEASON_SCHEMA_VERSION {
            return Err(DataError::SchemaVersion(file.schema_version));
        }
        let season = Self {
            label: file.label,
            matches: file.matches,
            metadata: file.metadata,
        };
        season.validate()?;
        Ok(season)
    }

    fn validate(&self) -> Result<(), DataError> {
        for (i, m) in self.matches.iter().enumerate() {
            if m.home == m.away {
                return Err(DataError::InvalidSeason(format!(
                    "match {i}: home and away team are both {:?}",
                    m.home
                )));
            }
            if i > 0 && self.matches[i - 1].date > m.date {
                return Err(DataError::InvalidSeason(format!(
                    "match {i} is dated before match {}",
                    i - 1
                )));
            }
        }
        Ok(())
    }
}

/// Parses one season in the football-data.co.uk CSV layout.
///
/// Required columns: `Date`, `HomeTeam`, `AwayTeam`, `FTHG`, `FTAG`; the
/// Bet365 odds columns `B365H`, `B365D`, `B365A` are picked up when present
/// and every other column is ignored. Rows are ordered by date (stable, so
/// same-day games keep file order) and indexed `t = 0..`.
pub fn parse_season_csv<R: Read>(reader: R, label: &str) -> Result<SeasonDataset, DataError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = csv_reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let required = ["Date", "HomeTeam", "AwayTeam", "FTHG", "FTAG"];
    let missing: Vec<&str> = required
        .iter()
        .filter(|name| find(name).is_none())
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(DataError::MissingColumns(missing.join(", ")));
    }
    let idx_date = find("Date").unwrap();
    let idx_home = find("HomeTeam").unwrap();
    let idx_away = find("AwayTeam").unwrap();
    let idx_fthg = find("FTHG").unwrap();
    let idx_ftag = find("FTAG").unwrap();
    let idx_odds = (find("B365H"), find("B365D"), find("B365A"));

    let mut matches = Vec::new();
    for record in csv_reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|field| field.is_empty()) {
            continue;
        }
        let field = |idx: usize| record.get(idx).unwrap_or("").trim();

        let date = parse_archive_date(field(idx_date)).ok_or_else(|| DataError::Row {
            line,
            reason: format!("unparseable date {:?}", field(idx_date)),
        })?;
        let home = field(idx_home).to_string();
        let away = field(idx_away).to_string();
        if home.is_empty() || away.is_empty() {
            return Err(DataError::Row {
                line,
                reason: "empty team name".into(),
            });
        }
        if home == away {
            return Err(DataError::Row {
                line,
                reason: format!("home and away team are both {home:?}"),
            });
        }
        let goals = |idx: usize, name: &str| -> Result<u32, DataError> {
            field(idx).parse::<u32>().map_err(|_| DataError::Row {
                line,
                reason: format!("{name} is not a nonnegative integer: {:?}", field(idx)),
            })
        };
        let home_points = goals(idx_fthg, "FTHG")?;
        let away_points = goals(idx_ftag, "FTAG")?;
        let odds = match idx_odds {
            (Some(h), Some(d), Some(a)) => {
                let parse = |idx: usize| field(idx).parse::<f64>().ok();
                match (parse(h), parse(d), parse(a)) {
                    (Some(home), Some(draw), Some(away)) => Some(Odds { home, draw, away }),
                    _ => None,
                }
            }
            _ => None,
        };
        matches.push(MatchRecord {
            t: 0,
            date,
            home,
            away,
            home_points,
            away_points,
            odds,
        });
    }
    if matches.is_empty() {
        return Err(DataError::EmptyFile);
    }

    matches.sort_by_key(|m| m.date);
    for (t, m) in matches.iter_mut().enumerate() {
        m.t = t;
    }
    let mut season = SeasonDataset::new(label, matches);
    season
        .metadata
        .insert("source_format".into(), "football-data.co.uk csv".into());
    Ok(season)
}

/// The archive mixes dd/mm/yy and dd/mm/yyyy date forms; dispatch on the
/// year width (a two-digit year fed to `%Y` would parse as the first
/// century).
fn parse_archive_date(text: &str) -> Option<NaiveDate> {
    let format = if text.rsplit('/').next()?.len() <= 2 {
        "%d/%m/%y"
    } else {
        "%d/%m/%Y"
    };
    NaiveDate::parse_from_str(text, format).ok()
}

/// Partitions datasets into train and test sets by label, preserving input
/// order. The label sets must be disjoint and every listed label must exist;
/// datasets mentioned in neither set are dropped.
pub fn split_seasons(
    datasets: &[SeasonDataset],
    train_labels: &BTreeSet<String>,
    test_labels: &BTreeSet<String>,
) -> Result<(Vec<SeasonDataset>, Vec<SeasonDataset>), DataError> {
    let mut seen = BTreeSet::new();
    for season in datasets {
        if !seen.insert(season.label.clone()) {
            return Err(DataError::DuplicateLabel(season.label.clone()));
        }
    }
    if let Some(shared) = train_labels.intersection(test_labels).next() {
        return Err(DataError::OverlappingSplit(shared.clone()));
    }
    for label in train_labels.iter().chain(test_labels.iter()) {
        if !seen.contains(label) {
            return Err(DataError::MissingLabel(label.clone()));
        }
    }
    let train = datasets
        .iter()
        .filter(|s| train_labels.contains(&s.label))
        .cloned()
        .collect();
    let test = datasets
        .iter()
        .filter(|s| test_labels.contains(&s.label))
        .cloned()
        .collect();
    Ok((train, test))
}
