//! Round-robin scheduling, resumable execution and outcome aggregation.
//!
//! Traces land in `output_dir/<game_id>/<match_id>.jsonl`. A match whose file
//! already ends in a verdict is never replayed, so rerunning an interrupted
//! tournament only executes what is missing.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{run_match, GameId, MatchConfig, MatchOutcome, MatchSpec, Winner};
use crate::games::{new_game, GameOptions};
use crate::players::{mix_seed, PlayerSpec};
use crate::ratings::{OutcomeMatrix, PairOutcome, PairResult};
use crate::trace::{
    read_trace, trace_path, Clock, EventKind, FixedClock, JsonlDirSink, SystemClock, TraceEvent,
    TraceSink, MANAGER_ROLE,
};

/// Attempts per scheduled match: the original run plus one retry after an abort.
pub const MATCH_RUNS: u32 = 2;

fn default_rounds() -> u32 {
    1
}

fn default_true() -> bool {
    true
}

fn default_parallel() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TournamentConfig {
    pub game_id: GameId,
    pub players: Vec<PlayerSpec>,
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    /// Falls back to the game's default when absent.
    #[serde(default)]
    pub max_player_attempts: Option<u32>,
    #[serde(default = "default_true")]
    pub seat_permutation: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_parallel")]
    pub max_parallel_matches: usize,
    pub output_dir: PathBuf,
    /// Debate jury; their ids are bound to `judge:<id>` roles.
    #[serde(default)]
    pub judges: Vec<PlayerSpec>,
    #[serde(default)]
    pub options: GameOptions,
    /// Stamp every trace event with this time instead of the wall clock.
    #[serde(default)]
    pub fixed_clock_ms: Option<u64>,
    /// `(variant_a, variant_b)` model ids compared in delta reports.
    #[serde(default)]
    pub variant_pairs: Vec<(String, String)>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl TournamentConfig {
    /// Minimal config: defaults everywhere except the required fields.
    pub fn new(game_id: GameId, players: Vec<PlayerSpec>, output_dir: impl Into<PathBuf>) -> Self {
        TournamentConfig {
            game_id,
            players,
            rounds: 1,
            max_player_attempts: None,
            seat_permutation: true,
            seed: 0,
            max_parallel_matches: 1,
            output_dir: output_dir.into(),
            judges: Vec::new(),
            options: GameOptions::default(),
            fixed_clock_ms: None,
            variant_pairs: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: TournamentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// First failing field, if any.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.players.len() < 2 {
            return Err(ConfigError::invalid("players", "at least two players are required"));
        }
        let mut ids = BTreeSet::new();
        for p in &self.players {
            if p.id.trim().is_empty() {
                return Err(ConfigError::invalid("players", "player id must not be empty"));
            }
            if !ids.insert(p.id.as_str()) {
                return Err(ConfigError::invalid("players", format!("duplicate player id '{}'", p.id)));
            }
        }
        if self.rounds == 0 {
            return Err(ConfigError::invalid("rounds", "must be at least 1"));
        }
        if self.max_player_attempts == Some(0) {
            return Err(ConfigError::invalid("max_player_attempts", "must be at least 1"));
        }
        if self.max_parallel_matches == 0 {
            return Err(ConfigError::invalid("max_parallel_matches", "must be at least 1"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(ConfigError::invalid("output_dir", "must not be empty"));
        }
        if self.game_id == GameId::Debate && self.judges.is_empty() {
            return Err(ConfigError::invalid("judges", "debate needs at least one judge"));
        }
        let mut judge_ids = BTreeSet::new();
        for j in &self.judges {
            if !judge_ids.insert(j.id.as_str()) {
                return Err(ConfigError::invalid("judges", format!("duplicate judge id '{}'", j.id)));
            }
        }
        if self.game_id == GameId::Pyjail && self.options.sandbox_command.is_empty() {
            return Err(ConfigError::invalid(
                "options.sandbox_command",
                "pyjail needs a sandbox executor command",
            ));
        }
        Ok(())
    }

    pub fn attempts(&self) -> u32 {
        self.max_player_attempts
            .unwrap_or_else(|| self.game_id.default_max_attempts())
    }

    pub fn game_dir(&self) -> PathBuf {
        self.output_dir.join(self.game_id.as_str())
    }

    /// Options actually handed to the game factory.
    pub fn game_options(&self) -> GameOptions {
        let mut options = self.options.clone();
        if self.game_id == GameId::Debate {
            options.judges = self.judges.iter().map(|j| j.id.clone()).collect();
        }
        options
    }

    fn clock(&self) -> Arc<dyn Clock> {
        match self.fixed_clock_ms {
            Some(ms) => Arc::new(FixedClock(ms)),
            None => Arc::new(SystemClock),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub index: usize,
    pub match_id: String,
    pub game_id: GameId,
    pub round: u32,
    /// Role to player id.
    pub seats: BTreeMap<String, String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn match_digest(game: GameId, seed: u64, round: u32, first: &str, second: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("{game}\n{seed}\n{round}\n{first}\n{second}").as_bytes());
    hex::encode(&h.finalize()[..8])
}

/// Every ordered pair per round with seat permutation, else every unordered pair once.
pub fn build_round_robin(config: &TournamentConfig) -> Schedule {
    let [seat_a, seat_b] = config.game_id.roles();
    let n = config.players.len();
    let mut entries = Vec::new();
    for round in 0..config.rounds {
        for i in 0..n {
            for j in 0..n {
                if i == j || (!config.seat_permutation && j < i) {
                    continue;
                }
                let (first, second) = (&config.players[i].id, &config.players[j].id);
                let index = entries.len();
                entries.push(ScheduleEntry {
                    index,
                    match_id: match_digest(config.game_id, config.seed, round, first, second),
                    game_id: config.game_id,
                    round,
                    seats: BTreeMap::from([
                        (seat_a.to_string(), first.clone()),
                        (seat_b.to_string(), second.clone()),
                    ]),
                    seed: mix_seed(&[config.seed, index as u64]),
                });
            }
        }
    }
    Schedule { entries }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MatchStatus {
    Completed { outcome: MatchOutcome },
    Aborted { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub entry: ScheduleEntry,
    pub status: MatchStatus,
    /// 1, or 2 when the first run aborted.
    pub runs: u32,
}

impl MatchReport {
    /// One human-readable progress line.
    pub fn progress_line(&self, done: usize, total: usize) -> String {
        let [a, b] = self.entry.game_id.roles();
        let who = |role: &str| self.entry.seats.get(role).cloned().unwrap_or_default();
        let result = match &self.status {
            MatchStatus::Completed { outcome } => match &outcome.winner {
                Winner::Draw => format!("draw ({})", outcome.reason),
                Winner::Role(r) => format!("{} wins as {r} ({})", who(r), outcome.reason),
            },
            MatchStatus::Aborted { reason } => format!("ABORTED: {reason}"),
        };
        format!(
            "[{done}/{total}] {} {} {} vs {}: {result}",
            self.entry.game_id,
            self.entry.match_id,
            who(a),
            who(b)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TournamentRun {
    pub schedule_size: usize,
    /// Matches run in this invocation, in schedule order.
    pub executed: Vec<MatchReport>,
    /// Match ids already complete on disk.
    pub skipped: Vec<String>,
}

impl TournamentRun {
    pub fn aborted(&self) -> impl Iterator<Item = &MatchReport> {
        self.executed
            .iter()
            .filter(|r| matches!(r.status, MatchStatus::Aborted { .. }))
    }
}

#[derive(Debug, Error)]
pub enum TournamentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot prepare output directory {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
}

/// Knobs that do not belong in the persisted config.
/// Progress callback: finished match, matches done, matches in this run.
pub type MatchCallback<'a> = &'a mut dyn FnMut(&MatchReport, usize, usize);

#[derive(Default)]
pub struct RunOptions<'a> {
    /// Overrides the clock derived from the config.
    pub clock: Option<Arc<dyn Clock>>,
    /// Stop after starting this many new matches, as an interruption would.
    pub max_new_matches: Option<usize>,
    /// Called on the calling thread as each match finishes.
    pub on_match: Option<MatchCallback<'a>>,
}

/// Whether the trace at `path` exists and ends in a verdict.
pub fn is_complete(path: &Path) -> bool {
    let Ok(text) = fs::read_to_string(path) else {
        return false;
    };
    text.lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| serde_json::from_str::<TraceEvent>(l).ok())
        .is_some_and(|e| e.is_verdict())
}

pub fn run_tournament(
    config: &TournamentConfig,
    mut opts: RunOptions<'_>,
) -> Result<TournamentRun, TournamentError> {
    config.validate()?;
    let dir = config.game_dir();
    fs::create_dir_all(&dir).map_err(|source| TournamentError::Output {
        path: dir.clone(),
        source,
    })?;
    let schedule = build_round_robin(config);
    let clock = opts.clock.clone().unwrap_or_else(|| config.clock());
    let mut run = TournamentRun {
        schedule_size: schedule.len(),
        ..TournamentRun::default()
    };
    let mut pending = Vec::new();
    for entry in &schedule.entries {
        if is_complete(&trace_path(&dir, &entry.match_id)) {
            run.skipped.push(entry.match_id.clone());
        } else {
            pending.push(entry.clone());
        }
    }
    if let Some(limit) = opts.max_new_matches {
        pending.truncate(limit);
    }
    let total = pending.len();
    let next = AtomicUsize::new(0);
    let workers = config.max_parallel_matches.min(total.max(1));
    let options = config.game_options();
    let mut reports: Vec<MatchReport> = Vec::with_capacity(total);

    thread::scope(|s| {
        let (tx, rx) = mpsc::channel::<MatchReport>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (pending, next, clock, options, dir) = (&pending, &next, &clock, &options, &dir);
            s.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(entry) = pending.get(k) else {
                    break;
                };
                let report = play_entry(config, entry, options, dir, clock.as_ref());
                if tx.send(report).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for report in rx {
            reports.push(report);
            if let Some(cb) = opts.on_match.as_mut() {
                cb(reports.last().expect("just pushed"), reports.len(), total);
            }
        }
    });
    reports.sort_by_key(|r| r.entry.index);
    run.executed = reports;
    Ok(run)
}

fn player_map(config: &TournamentConfig, entry: &ScheduleEntry) -> BTreeMap<String, PlayerSpec> {
    let by_id: BTreeMap<&str, &PlayerSpec> = config.players.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut map: BTreeMap<String, PlayerSpec> = entry
        .seats
        .iter()
        .map(|(role, id)| (role.clone(), (*by_id[id.as_str()]).clone()))
        .collect();
    if config.game_id == GameId::Debate {
        for judge in &config.judges {
            map.insert(crate::games::debate::judge_role(&judge.id), judge.clone());
        }
    }
    map
}

fn play_entry(
    config: &TournamentConfig,
    entry: &ScheduleEntry,
    options: &GameOptions,
    dir: &Path,
    clock: &dyn Clock,
) -> MatchReport {
    let players = player_map(config, entry);
    let match_config = MatchConfig {
        max_player_attempts: config.attempts(),
    };
    let spec = MatchSpec {
        match_id: &entry.match_id,
        seed: entry.seed,
        config: &match_config,
    };
    let mut last_error = String::new();
    for run in 1..=MATCH_RUNS {
        let result = JsonlDirSink::new(dir)
            .map_err(|e| e.to_string())
            .and_then(|mut sink| {
                let game = new_game(entry.game_id, entry.seed, options).map_err(|e| e.to_string())?;
                run_match(game, &players, &spec, &mut sink, clock).map_err(|e| e.to_string())
            });
        match result {
            Ok(outcome) => {
                return MatchReport {
                    entry: entry.clone(),
                    status: MatchStatus::Completed { outcome },
                    runs: run,
                }
            }
            Err(e) => last_error = e,
        }
    }
    record_abort(dir, entry, &players, &last_error, clock);
    MatchReport {
        entry: entry.clone(),
        status: MatchStatus::Aborted { reason: last_error },
        runs: MATCH_RUNS,
    }
}

/// Make sure the trace ends in an aborted verdict even when the engine never got to write one.
fn record_abort(
    dir: &Path,
    entry: &ScheduleEntry,
    players: &BTreeMap<String, PlayerSpec>,
    reason: &str,
    clock: &dyn Clock,
) {
    let path = trace_path(dir, &entry.match_id);
    if is_complete(&path) {
        return;
    }
    let ids: BTreeMap<&String, &String> = players.iter().map(|(r, p)| (r, &p.id)).collect();
    let event = TraceEvent {
        match_id: entry.match_id.clone(),
        seq: 0,
        game_id: entry.game_id,
        role: MANAGER_ROLE.to_string(),
        event_kind: EventKind::Verdict,
        action_name: "Verdict".to_string(),
        payload: json!({
            "outcome": null,
            "aborted": true,
            "abort_reason": reason,
            "players": ids,
            "moves": 0,
        }),
        rationale: String::new(),
        attempt: 0,
        valid: false,
        error: reason.to_string(),
        clock_ms: clock.now_ms(),
    };
    if let Ok(mut sink) = JsonlDirSink::new(dir) {
        let _ = sink.emit(&event);
    }
}

/// What the verdict event of a finished match carries.
#[derive(Debug, Clone, PartialEq, Deserialize)]
struct VerdictPayload {
    outcome: Option<MatchOutcome>,
    #[serde(default)]
    aborted: bool,
    #[serde(default)]
    abort_reason: String,
    players: BTreeMap<String, String>,
    #[serde(default)]
    moves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub match_id: String,
    pub game_id: GameId,
    pub file: PathBuf,
    /// Role to player id, including auxiliary roles such as judges.
    pub players: BTreeMap<String, String>,
    pub outcome: Option<MatchOutcome>,
    pub abort_reason: Option<String>,
    pub moves: usize,
    pub events: usize,
}

impl MatchRecord {
    pub fn is_aborted(&self) -> bool {
        self.outcome.is_none()
    }

    /// Competing player ids in seat order.
    pub fn competitors(&self) -> Option<[String; 2]> {
        let [a, b] = self.game_id.roles();
        Some([self.players.get(a)?.clone(), self.players.get(b)?.clone()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptTrace {
    pub file: PathBuf,
    /// 1-based line of the first problem.
    pub line: usize,
    pub error: String,
}

/// Parsed traces under an output directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchRecordStore {
    pub records: Vec<MatchRecord>,
    pub corrupt: Vec<CorruptTrace>,
    /// Traces without a verdict (interrupted matches).
    pub incomplete: Vec<PathBuf>,
}

fn jsonl_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "jsonl") {
            out.push(path);
        }
    }
    Ok(out)
}

impl MatchRecordStore {
    /// Read `root/*.jsonl` and `root/<game_id>/*.jsonl`, in path order.
    pub fn load(root: &Path) -> io::Result<Self> {
        let mut files = jsonl_files(root)?;
        for game in GameId::ALL {
            files.extend(jsonl_files(&root.join(game.as_str()))?);
        }
        files.sort();
        let mut store = MatchRecordStore::default();
        for file in files {
            store.add_file(&file)?;
        }
        Ok(store)
    }

    fn add_file(&mut self, file: &Path) -> io::Result<()> {
        let text = fs::read_to_string(file)?;
        let events = match read_trace(&text) {
            Ok(events) => events,
            Err((line, error)) => {
                self.corrupt.push(CorruptTrace {
                    file: file.to_path_buf(),
                    line,
                    error,
                });
                return Ok(());
            }
        };
        let Some(verdict) = events.last().filter(|e| e.is_verdict()) else {
            self.incomplete.push(file.to_path_buf());
            return Ok(());
        };
        let verdict_line = text.lines().filter(|l| !l.trim().is_empty()).count();
        let payload: VerdictPayload = match serde_json::from_value(verdict.payload.clone()) {
            Ok(p) => p,
            Err(e) => {
                self.corrupt.push(CorruptTrace {
                    file: file.to_path_buf(),
                    line: verdict_line,
                    error: format!("verdict payload: {e}"),
                });
                return Ok(());
            }
        };
        if payload.outcome.is_none() && !payload.aborted {
            self.corrupt.push(CorruptTrace {
                file: file.to_path_buf(),
                line: verdict_line,
                error: "verdict has neither an outcome nor an abort".into(),
            });
            return Ok(());
        }
        self.records.push(MatchRecord {
            match_id: verdict.match_id.clone(),
            game_id: verdict.game_id,
            file: file.to_path_buf(),
            players: payload.players,
            outcome: if payload.aborted { None } else { payload.outcome },
            abort_reason: payload.aborted.then_some(payload.abort_reason),
            moves: payload.moves,
            events: events.len(),
        });
        Ok(())
    }

    pub fn games(&self) -> BTreeSet<GameId> {
        self.records.iter().map(|r| r.game_id).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty() && self.corrupt.is_empty() && self.incomplete.is_empty()
    }

    pub fn for_game(&self, game: GameId) -> impl Iterator<Item = &MatchRecord> {
        self.records.iter().filter(move |r| r.game_id == game)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CategoryCount {
    pub model: String,
    pub role: String,
    /// "win", "loss" or "draw".
    pub result: String,
    pub reason: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveSample {
    pub match_id: String,
    pub players: [String; 2],
    pub moves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameAggregate {
    pub game_id: GameId,
    pub matrix: OutcomeMatrix,
    pub results: Vec<PairResult>,
    pub categories: Vec<CategoryCount>,
    pub move_counts: Vec<MoveSample>,
    pub aborted: Vec<String>,
    /// Unreadable traces found under this game's directory.
    pub corrupt: Vec<CorruptTrace>,
}

fn pair_outcome(winner: &Winner, roles: [&str; 2]) -> Option<PairOutcome> {
    match winner {
        Winner::Draw => Some(PairOutcome::Draw),
        Winner::Role(r) if r == roles[0] => Some(PairOutcome::AWins),
        Winner::Role(r) if r == roles[1] => Some(PairOutcome::BWins),
        Winner::Role(_) => None,
    }
}

/// Outcome matrix, per-model category counts and move counts for one game.
pub fn aggregate_outcomes(store: &MatchRecordStore, game: GameId) -> GameAggregate {
    let roles = game.roles();
    let mut models = BTreeSet::new();
    let mut results = Vec::new();
    let mut categories: BTreeMap<(String, String, String, String), u64> = BTreeMap::new();
    let mut move_counts = Vec::new();
    let mut aborted = Vec::new();
    let mut corrupt = Vec::new();
    for record in store.for_game(game) {
        let Some(players) = record.competitors() else {
            corrupt.push(CorruptTrace {
                file: record.file.clone(),
                line: record.events,
                error: "verdict does not name both competitors".into(),
            });
            continue;
        };
        let Some(outcome) = &record.outcome else {
            aborted.push(record.match_id.clone());
            continue;
        };
        let Some(result) = pair_outcome(&outcome.winner, roles) else {
            corrupt.push(CorruptTrace {
                file: record.file.clone(),
                line: record.events,
                error: format!("winner {:?} is not a competing role", outcome.winner),
            });
            continue;
        };
        models.extend(players.iter().cloned());
        results.push(PairResult::new(&players[0], &players[1], result));
        for (k, role) in roles.iter().enumerate() {
            let label = match (&outcome.winner, result) {
                (Winner::Draw, _) => "draw",
                (_, PairOutcome::AWins) if k == 0 => "win",
                (_, PairOutcome::BWins) if k == 1 => "win",
                _ => "loss",
            };
            *categories
                .entry((
                    players[k].clone(),
                    role.to_string(),
                    label.to_string(),
                    outcome.reason.as_str().to_string(),
                ))
                .or_default() += 1;
        }
        move_counts.push(MoveSample {
            match_id: record.match_id.clone(),
            players,
            moves: record.moves,
        });
    }
    corrupt.extend(
        store
            .corrupt
            .iter()
            .filter(|c| c.file.parent().and_then(|p| p.file_name()).is_some_and(|n| n == game.as_str()))
            .cloned(),
    );
    let matrix = OutcomeMatrix::from_results(&models.into_iter().collect::<Vec<_>>(), &results)
        .expect("competitors are distinct");
    GameAggregate {
        game_id: game,
        matrix,
        results,
        categories: categories
            .into_iter()
            .map(|((model, role, result, reason), count)| CategoryCount {
                model,
                role,
                result,
                reason,
                count,
            })
            .collect(),
        move_counts,
        aborted,
        corrupt,
    }
}
