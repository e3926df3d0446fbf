//! Rating and report files derived from a trace directory.
//!
//! Every file written here is a pure function of the traces (and the
//! bootstrap seed), so deleting the outputs and regenerating them yields
//! identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::GameId;
use crate::ratings::{
    bootstrap_ci, cumulative_ratings, fit_bradley_terry, rating_delta, read_outcome_csv,
    BootstrapConfig, CumulativeTable, DeltaCell, RatingTable, RatingsError, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
use crate::tournament::{aggregate_outcomes, CategoryCount, CorruptTrace, MatchRecordStore};

pub const RATINGS_CSV: &str = "ratings.csv";
pub const RATINGS_JSON: &str = "ratings.json";
pub const CUMULATIVE_CSV: &str = "cumulative.csv";
pub const OUTCOMES_CSV: &str = "outcomes.csv";
pub const MOVES_CSV: &str = "move_distributions.csv";
pub const DELTAS_CSV: &str = "deltas.csv";
pub const REPORT_JSON: &str = "report.json";

pub const RATINGS_HEADER: &str = "game,rank,model,rating,ci_low,ci_high,strength,games,flags";
pub const OUTCOMES_HEADER: &str = "game,model,role,result,reason,count";
pub const MOVES_HEADER: &str = "game,model,moves,count";
pub const DELTAS_HEADER: &str = "game,variant_a,variant_b,delta";
/// Leading columns of the cumulative table; one column per game follows, then `absent_from`.
pub const CUMULATIVE_LEAD: &str = "rank,model,total";

/// Game key used when rating a pre-aggregated outcome CSV.
pub const CSV_GAME_KEY: &str = "outcomes";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no traces found in {0}")]
    NoTraces(PathBuf),
    #[error("no completed matches for {0}")]
    NoMatches(String),
    #[error(transparent)]
    Ratings(#[from] RatingsError),
    #[error("i/o failure on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateOptions {
    pub game: Option<GameId>,
    pub bootstrap: BootstrapConfig,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateOutput {
    pub tables: BTreeMap<String, RatingTable>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

fn load_store(trace_dir: &Path) -> Result<MatchRecordStore, ReportError> {
    let store = MatchRecordStore::load(trace_dir).map_err(io_err(trace_dir))?;
    if store.is_empty() {
        return Err(ReportError::NoTraces(trace_dir.to_path_buf()));
    }
    Ok(store)
}

fn corrupt_warnings(corrupt: &[CorruptTrace]) -> Vec<String> {
    corrupt
        .iter()
        .map(|c| format!("corrupt trace {}:{}: {}", c.file.display(), c.line, c.error))
        .collect()
}

fn table_warnings(game: &str, table: &RatingTable) -> Vec<String> {
    let mut out = Vec::new();
    if !table.is_connected() {
        out.push(format!(
            "{game}: comparison graph has {} components; ratings are only comparable within one",
            table.components.len()
        ));
    }
    if !table.converged {
        out.push(format!("{game}: strength fit hit the iteration limit"));
    }
    out
}

/// Aggregate, fit, bootstrap and write `ratings.csv` plus `ratings.json`.
///
/// `input` is a trace directory or a pre-aggregated outcome CSV file.
pub fn cmd_rate(input: &Path, opts: &RateOptions) -> Result<RateOutput, ReportError> {
    let mut tables = BTreeMap::new();
    let mut warnings = Vec::new();
    if input.is_file() {
        let file = fs::File::open(input).map_err(io_err(input))?;
        let matrix = read_outcome_csv(file)?;
        let full = fit_bradley_terry(&matrix, DEFAULT_TOL, DEFAULT_MAX_ITER);
        let ci = bootstrap_ci(&matrix.to_results(), &full, &opts.bootstrap);
        tables.insert(CSV_GAME_KEY.to_string(), full.with_ci(ci));
    } else {
        let store = load_store(input)?;
        warnings.extend(corrupt_warnings(&store.corrupt));
        let games: Vec<GameId> = match opts.game {
            Some(g) => vec![g],
            None => store.games().into_iter().collect(),
        };
        for game in games {
            let agg = aggregate_outcomes(&store, game);
            if agg.results.is_empty() {
                if opts.game.is_some() {
                    return Err(ReportError::NoMatches(game.to_string()));
                }
                continue;
            }
            let full = fit_bradley_terry(&agg.matrix, DEFAULT_TOL, DEFAULT_MAX_ITER);
            let ci = bootstrap_ci(&agg.results, &full, &opts.bootstrap);
            tables.insert(game.to_string(), full.with_ci(ci));
        }
        if tables.is_empty() {
            return Err(ReportError::NoMatches("any game".into()));
        }
    }
    for (game, table) in &tables {
        warnings.extend(table_warnings(game, table));
    }
    fs::create_dir_all(&opts.out_dir).map_err(io_err(&opts.out_dir))?;
    let csv_path = opts.out_dir.join(RATINGS_CSV);
    let json_path = opts.out_dir.join(RATINGS_JSON);
    write_file(&csv_path, &ratings_csv(&tables))?;
    let json = serde_json::to_string_pretty(&tables).expect("rating tables serialize");
    write_file(&json_path, &(json + "\n"))?;
    Ok(RateOutput {
        tables,
        warnings,
        files: vec![csv_path, json_path],
    })
}

/// Rows per game ordered by rating descending, then model id.
pub fn ratings_csv(tables: &BTreeMap<String, RatingTable>) -> String {
    let mut out = String::from(RATINGS_HEADER);
    out.push('\n');
    for (game, table) in tables {
        for (rank, (model, rating)) in table.ranked().into_iter().enumerate() {
            let (lo, hi) = table.ci[&model];
            let flags = table.flags.get(&model).map(|f| f.join("; ")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.9e},{},{}",
                csv_cell(game),
                rank + 1,
                csv_cell(&model),
                num(rating),
                num(lo),
                num(hi),
                table.strengths[&model],
                table.games_played[&model],
                csv_cell(&flags),
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveBucket {
    pub game: String,
    pub model: String,
    pub moves: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameCategories {
    pub game: String,
    pub categories: Vec<CategoryCount>,
}

/// All report tables in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub cumulative: CumulativeTable,
    pub outcomes: Vec<GameCategories>,
    pub move_distributions: Vec<MoveBucket>,
    pub deltas: Vec<DeltaCell>,
    pub ratings: BTreeMap<String, RatingTable>,
    pub aborted: BTreeMap<String, Vec<String>>,
    pub corrupt: Vec<CorruptTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub variant_pairs: Vec<(String, String)>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutput {
    pub bundle: ReportBundle,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn build_bundle(store: &MatchRecordStore, variant_pairs: &[(String, String)]) -> ReportBundle {
    let mut ratings = BTreeMap::new();
    let mut outcomes = Vec::new();
    let mut buckets: BTreeMap<(String, String, usize), u64> = BTreeMap::new();
    let mut aborted = BTreeMap::new();
    let mut corrupt = store.corrupt.clone();
    for game in store.games() {
        let agg = aggregate_outcomes(store, game);
        let key = game.to_string();
        if !agg.aborted.is_empty() {
            aborted.insert(key.clone(), agg.aborted.clone());
        }
        for c in &agg.corrupt {
            if !corrupt.contains(c) {
                corrupt.push(c.clone());
            }
        }
        if agg.results.is_empty() {
            continue;
        }
        for sample in &agg.move_counts {
            for model in &sample.players {
                *buckets.entry((key.clone(), model.clone(), sample.moves)).or_default() += 1;
            }
        }
        outcomes.push(GameCategories {
            game: key.clone(),
            categories: agg.categories.clone(),
        });
        ratings.insert(key, fit_bradley_terry(&agg.matrix, DEFAULT_TOL, DEFAULT_MAX_ITER));
    }
    ReportBundle {
        cumulative: cumulative_ratings(&ratings),
        outcomes,
        move_distributions: buckets
            .into_iter()
            .map(|((game, model, moves), count)| MoveBucket {
                game,
                model,
                moves,
                count,
            })
            .collect(),
        deltas: rating_delta(variant_pairs, &ratings),
        ratings,
        aborted,
        corrupt,
    }
}

pub fn cumulative_csv(table: &CumulativeTable) -> String {
    let mut out = String::from(CUMULATIVE_LEAD);
    for g in &table.games {
        out.push(',');
        out.push_str(&csv_cell(g));
    }
    out.push_str(",absent_from\n");
    for (rank, row) in table.rows.iter().enumerate() {
        let _ = write!(out, "{},{},{}", rank + 1, csv_cell(&row.model), num(row.total));
        for g in &table.games {
            out.push(',');
            if let Some(v) = row.contributions.get(g) {
                out.push_str(&num(*v));
            }
        }
        let _ = writeln!(out, ",{}", csv_cell(&row.absent_from.join(";")));
    }
    out
}

pub fn outcomes_csv(outcomes: &[GameCategories]) -> String {
    let mut out = String::from(OUTCOMES_HEADER);
    out.push('\n');
    for g in outcomes {
        for c in &g.categories {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_cell(&g.game),
                csv_cell(&c.model),
                csv_cell(&c.role),
                c.result,
                c.reason,
                c.count
            );
        }
    }
    out
}

pub fn moves_csv(buckets: &[MoveBucket]) -> String {
    let mut out = String::from(MOVES_HEADER);
    out.push('\n');
    for b in buckets {
        let _ = writeln!(out, "{},{},{},{}", csv_cell(&b.game), csv_cell(&b.model), b.moves, b.count);
    }
    out
}

/// Absent deltas are written as empty cells.
pub fn deltas_csv(deltas: &[DeltaCell]) -> String {
    let mut out = String::from(DELTAS_HEADER);
    out.push('\n');
    for d in deltas {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_cell(&d.game),
            csv_cell(&d.variant_a),
            csv_cell(&d.variant_b),
            d.delta.map(num).unwrap_or_default()
        );
    }
    out
}

/// Write the cumulative, outcome, move-distribution and (with declared pairs) delta tables.
pub fn cmd_report(trace_dir: &Path, opts: &ReportOptions) -> Result<ReportOutput, ReportError> {
    let store = load_store(trace_dir)?;
    let bundle = build_bundle(&store, &opts.variant_pairs);
    let mut warnings = corrupt_warnings(&bundle.corrupt);
    for (game, table) in &bundle.ratings {
        warnings.extend(table_warnings(game, table));
    }
    fs::create_dir_all(&opts.out_dir).map_err(io_err(&opts.out_dir))?;
    let mut files = Vec::new();
    let mut emit = |name: &str, contents: String| -> Result<(), ReportError> {
        let path = opts.out_dir.join(name);
        write_file(&path, &contents)?;
        files.push(path);
        Ok(())
    };
    emit(CUMULATIVE_CSV, cumulative_csv(&bundle.cumulative))?;
    emit(OUTCOMES_CSV, outcomes_csv(&bundle.outcomes))?;
    emit(MOVES_CSV, moves_csv(&bundle.move_distributions))?;
    if !opts.variant_pairs.is_empty() {
        emit(DELTAS_CSV, deltas_csv(&bundle.deltas))?;
    }
    let json = serde_json::to_string_pretty(&bundle).expect("report bundle serializes");
    emit(REPORT_JSON, json + "\n")?;
    Ok(ReportOutput {
        bundle,
        files,
        warnings,
    })
}
