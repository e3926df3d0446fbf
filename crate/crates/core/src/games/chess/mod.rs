//! Classical chess played in FEN/SAN.

pub mod position;
pub mod san;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    sample_from_legal, ActionRequest, ActionSampler, ContextView, Fields, Game, GameId, GameState,
    MatchOutcome, OutputField, Reason, Transition,
};
pub use position::{perft, Color, Move, PieceKind, Position, START_FEN};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChessError {
    #[error("unparseable move '{0}': expected SAN such as Nf3, exd5, O-O or e7e8=Q")]
    Unparseable(String),
    #[error("illegal move {san}: {detail}")]
    Illegal { san: String, detail: String },
    #[error("ambiguous move {san}: could be {}", candidates.join(" or "))]
    Ambiguous { san: String, candidates: Vec<String> },
    #[error("move {san} does not deliver {claimed}")]
    BadAnnotation { san: String, claimed: &'static str },
    #[error("invalid FEN {0}")]
    InvalidFen(String),
    #[error("history move {index} ({san}) cannot be replayed: {source}")]
    Replay {
        index: usize,
        san: String,
        source: Box<ChessError>,
    },
}

pub const DEFAULT_MOVE_CAP: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChessState {
    pub fen: String,
    /// SAN of every move played since `start_fen`.
    pub history: Vec<String>,
    /// Starting position when not the standard one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_fen: Option<String>,
    /// Repetition keys of every position reached, starting position included.
    pub repetition: Vec<String>,
    /// Full moves after which an unfinished game is adjudicated a draw.
    pub move_cap: u32,
}

impl Default for ChessState {
    fn default() -> Self {
        ChessState::new()
    }
}

impl ChessState {
    pub fn new() -> Self {
        let pos = Position::start();
        ChessState {
            fen: START_FEN.to_string(),
            history: Vec::new(),
            start_fen: None,
            repetition: vec![pos.repetition_key()],
            move_cap: DEFAULT_MOVE_CAP,
        }
    }

    pub fn from_fen(fen: &str) -> Result<Self, ChessError> {
        let pos = Position::from_fen(fen)?;
        let fen = pos.to_fen();
        Ok(ChessState {
            start_fen: (fen != START_FEN).then(|| fen.clone()),
            fen,
            history: Vec::new(),
            repetition: vec![pos.repetition_key()],
            move_cap: DEFAULT_MOVE_CAP,
        })
    }

    pub fn with_move_cap(mut self, cap: u32) -> Self {
        self.move_cap = cap;
        self
    }

    pub fn position(&self) -> Position {
        Position::from_fen(&self.fen).expect("ChessState always holds a valid FEN")
    }

    pub fn side_to_move(&self) -> Color {
        self.position().side
    }

    /// Replay `history` from the standard start.
    pub fn replay<S: AsRef<str>>(history: &[S]) -> Result<Self, ChessError> {
        let mut state = ChessState::new();
        for (index, san) in history.iter().enumerate() {
            state = chess_apply_move(&state, san.as_ref()).map_err(|e| ChessError::Replay {
                index,
                san: san.as_ref().to_string(),
                source: Box::new(e),
            })?;
        }
        Ok(state)
    }
}

/// Successor state after the move `san`.
pub fn chess_apply_move(state: &ChessState, san: &str) -> Result<ChessState, ChessError> {
    let pos = state.position();
    let mv = san::parse_move(&pos, san)?;
    let canonical = san::to_san(&pos, &mv);
    let next = pos.make_move(&mv);
    let mut out = state.clone();
    out.fen = next.to_fen();
    out.history.push(canonical);
    out.repetition.push(next.repetition_key());
    Ok(out)
}

/// Every legal move in SAN, sorted lexicographically.
pub fn chess_legal_moves(state: &ChessState) -> Vec<String> {
    let mut moves: Vec<String> = san::all_san(&state.position())
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    moves.sort();
    moves
}

/// Checkmate, or one of the automatic draw rules, if the game is over.
pub fn chess_outcome(state: &ChessState) -> Option<MatchOutcome> {
    let pos = state.position();
    let draw = |detail: &str| {
        Some(MatchOutcome::draw(GameId::Chess, Reason::StalemateDraw).with_detail(detail))
    };
    if pos.legal_moves().is_empty() {
        if pos.in_check(pos.side) {
            let winner = pos.side.flip().name();
            return Some(MatchOutcome::win(GameId::Chess, winner, Reason::Checkmate));
        }
        return draw("stalemate");
    }
    if pos.insufficient_material() {
        return draw("insufficient_material");
    }
    if pos.halfmove >= 100 {
        return draw("fifty_move_rule");
    }
    if let Some(last) = state.repetition.last() {
        if state.repetition.iter().filter(|k| *k == last).count() >= 3 {
            return draw("threefold_repetition");
        }
    }
    if state.history.len() >= 2 * state.move_cap as usize {
        return draw("move_cap");
    }
    None
}

/// Chess as an engine game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChessGame {
    pub state: ChessState,
    pub outcome: Option<MatchOutcome>,
}

impl ChessGame {
    pub fn new(state: ChessState) -> Self {
        let outcome = chess_outcome(&state);
        ChessGame { state, outcome }
    }

    fn request(&self) -> ActionRequest {
        ActionRequest::new(
            self.state.side_to_move().name(),
            "MakeMove",
            vec![OutputField::new(
                "Move",
                "your next move in standard algebraic notation, e.g. Nf3",
            )],
            "You are playing chess. Choose the best legal move for your side.",
        )
    }
}

impl ActionSampler for ChessGame {
    fn sample_action(&self, request: &ActionRequest, rng: &mut dyn RngCore) -> Option<Fields> {
        sample_from_legal(request, &chess_legal_moves(&self.state), rng)
    }
}

impl Game for ChessGame {
    fn game_id(&self) -> GameId {
        GameId::Chess
    }

    fn snapshot(&self) -> GameState {
        GameState {
            game_id: GameId::Chess,
            phase: if self.outcome.is_some() { "finished" } else { "play" }.into(),
            turn_role: self.state.side_to_move().name().into(),
            payload: serde_json::to_value(self).expect("chess state serializes"),
            terminal: self.outcome.clone(),
        }
    }

    fn outcome(&self) -> Option<MatchOutcome> {
        self.outcome.clone()
    }

    fn next_request(&self) -> Option<ActionRequest> {
        self.outcome.is_none().then(|| self.request())
    }

    fn view(&self, role: &str) -> ContextView {
        let history = if self.state.history.is_empty() {
            "(no moves yet)".to_string()
        } else {
            self.state.history.join(", ")
        };
        ContextView::new(GameId::Chess, role)
            .with("Role", format!("you play {role}"))
            .with("Position (FEN)", self.state.fen.clone())
            .with("Move History", history)
            .with("Side To Move", self.state.side_to_move().name())
    }

    fn validate(&self, _request: &ActionRequest, fields: &Fields) -> Result<(), String> {
        let text = fields.get("Move").map(String::as_str).unwrap_or("");
        san::parse_move(&self.state.position(), text)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }

    fn apply(&mut self, _request: &ActionRequest, fields: &Fields) -> Transition {
        let text = fields.get("Move").map(String::as_str).unwrap_or("");
        match chess_apply_move(&self.state, text) {
            Ok(next) => {
                self.state = next;
                self.outcome = chess_outcome(&self.state);
                match &self.outcome {
                    Some(o) => Transition::Finished(o.clone()),
                    None => Transition::Continue,
                }
            }
            Err(e) => Transition::Abort(format!("validated move failed to apply: {e}")),
        }
    }

    fn moves_played(&self) -> usize {
        self.state.history.len()
    }
}
