//! Python bindings: rule engines, match playing, tournaments and ratings.
//!
//! Structured results cross the boundary as JSON and come back as plain
//! Python dicts and lists.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gamearena_core::engine::{run_match, GameId, MatchConfig, MatchSpec};
use gamearena_core::games::cards::{poker_rank_hand, Card};
use gamearena_core::games::chess::{chess_apply_move, chess_legal_moves, chess_outcome, perft, ChessState, Position};
use gamearena_core::games::dice::{dice_resolve_call, Bid};
use gamearena_core::games::gandalf::detect_password;
use gamearena_core::games::{new_game, GameOptions};
use gamearena_core::players::PlayerSpec;
use gamearena_core::ratings::{fit_bradley_terry, OutcomeMatrix, DEFAULT_LEVEL, DEFAULT_MAX_ITER, DEFAULT_TOL};
use gamearena_core::ratings::BootstrapConfig;
use gamearena_core::report::{cmd_rate, cmd_report, RateOptions, ReportOptions};
use gamearena_core::trace::{FixedClock, MemorySink};
use gamearena_core::tournament::{run_tournament, RunOptions, TournamentConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl ToString) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn game_id(name: &str) -> PyResult<GameId> {
    name.parse().map_err(value_err)
}

/// A chess game in progress. Moves are SAN; coordinate notation is accepted too.
#[pyclass(module = "gamearena", skip_from_py_object)]
#[derive(Clone)]
struct ChessBoard {
    state: ChessState,
}

#[pymethods]
impl ChessBoard {
    #[new]
    #[pyo3(signature = (fen = None))]
    fn new(fen: Option<&str>) -> PyResult<Self> {
        let state = match fen {
            Some(f) => ChessState::from_fen(f).map_err(value_err)?,
            None => ChessState::new(),
        };
        Ok(ChessBoard { state })
    }

    #[staticmethod]
    fn replay(history: Vec<String>) -> PyResult<Self> {
        Ok(ChessBoard {
            state: ChessState::replay(&history).map_err(value_err)?,
        })
    }

    #[getter]
    fn fen(&self) -> String {
        self.state.fen.clone()
    }

    #[getter]
    fn history(&self) -> Vec<String> {
        self.state.history.clone()
    }

    fn legal_moves(&self) -> Vec<String> {
        chess_legal_moves(&self.state)
    }

    /// Play `mv`; returns its canonical SAN.
    fn push(&mut self, mv: &str) -> PyResult<String> {
        self.state = chess_apply_move(&self.state, mv).map_err(value_err)?;
        Ok(self.state.history.last().cloned().unwrap_or_default())
    }

    /// Terminal outcome as a dict, or None while the game is running.
    fn outcome<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &chess_outcome(&self.state))
    }

    fn perft(&self, depth: u32) -> u64 {
        perft(&self.state.position(), depth)
    }

    fn __repr__(&self) -> String {
        format!("ChessBoard('{}')", self.state.fen)
    }
}

/// Leaf count of the legal move tree below `fen` to `depth` plies.
#[pyfunction]
fn chess_perft(fen: &str, depth: u32) -> PyResult<u64> {
    Ok(perft(&Position::from_fen(fen).map_err(value_err)?, depth))
}

/// Best five-card category and tiebreak ranks of 5 to 7 cards such as "As", "Td".
#[pyfunction]
fn poker_rank(cards: Vec<String>) -> PyResult<(String, Vec<u32>)> {
    let cards: Vec<Card> = cards
        .iter()
        .map(|c| c.parse().map_err(value_err))
        .collect::<PyResult<_>>()?;
    let rank = poker_rank_hand(&cards).map_err(value_err)?;
    let category = serde_json::to_value(rank.category)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    Ok((category, rank.tiebreak.into_iter().map(u32::from).collect()))
}

/// Winner role when `bidder`'s bid is challenged.
#[pyfunction]
fn dice_resolve(hands: BTreeMap<String, Vec<u8>>, quantity: u32, face: u8, bidder: &str) -> PyResult<String> {
    if !(1..=6).contains(&face) {
        return Err(value_err(format!("face must be 1..=6, got {face}")));
    }
    if !hands.contains_key(bidder) {
        return Err(value_err(format!("unknown bidder '{bidder}'")));
    }
    Ok(dice_resolve_call(&hands, &Bid { quantity, face }, bidder))
}

#[pyfunction]
fn password_revealed(message: &str, passphrase: &str) -> bool {
    detect_password(message, passphrase)
}

#[pyfunction]
fn games() -> Vec<&'static str> {
    GameId::ALL.iter().map(|g| g.as_str()).collect()
}

#[pyfunction]
fn default_max_attempts(game: &str) -> PyResult<u32> {
    Ok(game_id(game)?.default_max_attempts())
}

/// Ratings from `(model_a, model_b, wins_a, wins_b, draws)` rows.
#[pyfunction]
fn fit_ratings<'py>(py: Python<'py>, outcomes: Vec<(String, String, u64, u64, u64)>) -> PyResult<Bound<'py, PyAny>> {
    let mut m = OutcomeMatrix::new(Vec::new());
    for (a, b, wa, wb, d) in outcomes {
        m.add_wins(&a, &b, wa).map_err(value_err)?;
        m.add_wins(&b, &a, wb).map_err(value_err)?;
        m.add_draws(&a, &b, d).map_err(value_err)?;
    }
    if m.models.is_empty() {
        return Err(value_err("no outcomes given"));
    }
    to_py(py, &fit_bradley_terry(&m, DEFAULT_TOL, DEFAULT_MAX_ITER))
}

/// Play one match between seeded random-legal players; returns the trace events.
#[pyfunction]
#[pyo3(signature = (game, seed, options_json = None))]
fn play_random_match<'py>(
    py: Python<'py>,
    game: &str,
    seed: u64,
    options_json: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let id = game_id(game)?;
    let mut options: GameOptions = match options_json {
        Some(text) => serde_json::from_str(text).map_err(value_err)?,
        None => GameOptions::default(),
    };
    let mut players = BTreeMap::new();
    for (k, role) in id.roles().iter().enumerate() {
        players.insert(role.to_string(), PlayerSpec::random_legal(&format!("random-{k}"), seed + k as u64));
    }
    if id == GameId::Debate && options.judges.is_empty() {
        options.judges = vec!["random-judge".to_string()];
    }
    for judge in &options.judges {
        players.insert(
            gamearena_core::games::debate::judge_role(judge),
            PlayerSpec::random_legal(judge, seed),
        );
    }
    let g = new_game(id, seed, &options).map_err(value_err)?;
    let config = MatchConfig::for_game(id);
    let spec = MatchSpec {
        match_id: "python",
        seed,
        config: &config,
    };
    let mut sink = MemorySink::new();
    let result = py.detach(|| run_match(g, &players, &spec, &mut sink, &FixedClock(0)));
    result.map_err(runtime_err)?;
    to_py(py, &sink.events)
}

/// Run (or resume) the tournament described by TOML `config`; returns a summary.
#[pyfunction]
#[pyo3(signature = (config, output_dir = None))]
fn tournament<'py>(py: Python<'py>, config: &str, output_dir: Option<PathBuf>) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = TournamentConfig::from_toml(config).map_err(value_err)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    cfg.validate().map_err(value_err)?;
    let run = py
        .detach(|| run_tournament(&cfg, RunOptions::default()))
        .map_err(runtime_err)?;
    let summary = serde_json::json!({
        "scheduled": run.schedule_size,
        "played": run.executed.iter().map(|r| &r.entry.match_id).collect::<Vec<_>>(),
        "skipped": run.skipped,
        "aborted": run.aborted().map(|r| &r.entry.match_id).collect::<Vec<_>>(),
    });
    to_py(py, &summary)
}

/// Fit ratings with bootstrap intervals and write ratings.csv / ratings.json.
#[pyfunction]
#[pyo3(signature = (input, out_dir, resamples = 200, seed = 0, game = None))]
fn rate<'py>(
    py: Python<'py>,
    input: PathBuf,
    out_dir: PathBuf,
    resamples: usize,
    seed: u64,
    game: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = RateOptions {
        game: game.map(game_id).transpose()?,
        bootstrap: BootstrapConfig {
            resamples,
            level: DEFAULT_LEVEL,
            seed,
        },
        out_dir,
    };
    let out = py.detach(|| cmd_rate(&input, &opts)).map_err(runtime_err)?;
    to_py(py, &out)
}

/// Write the cumulative, outcome, move-distribution and delta tables; returns the file paths.
#[pyfunction]
#[pyo3(signature = (trace_dir, out_dir, pairs = Vec::new()))]
fn report(py: Python<'_>, trace_dir: PathBuf, out_dir: PathBuf, pairs: Vec<(String, String)>) -> PyResult<Vec<PathBuf>> {
    let opts = ReportOptions {
        variant_pairs: pairs,
        out_dir,
    };
    let out = py
        .detach(|| cmd_report(Path::new(&trace_dir), &opts))
        .map_err(runtime_err)?;
    Ok(out.files)
}

#[pymodule]
fn gamearena(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ChessBoard>()?;
    m.add_function(wrap_pyfunction!(chess_perft, m)?)?;
    m.add_function(wrap_pyfunction!(poker_rank, m)?)?;
    m.add_function(wrap_pyfunction!(dice_resolve, m)?)?;
    m.add_function(wrap_pyfunction!(password_revealed, m)?)?;
    m.add_function(wrap_pyfunction!(games, m)?)?;
    m.add_function(wrap_pyfunction!(default_max_attempts, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ratings, m)?)?;
    m.add_function(wrap_pyfunction!(play_random_match, m)?)?;
    m.add_function(wrap_pyfunction!(tournament, m)?)?;
    m.add_function(wrap_pyfunction!(rate, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    Ok(())
}
