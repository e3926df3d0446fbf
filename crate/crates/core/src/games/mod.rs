//! The seven games and a factory to build or restore them by id.

pub mod cards;
pub mod challenge;
pub mod chess;
pub mod debate;
pub mod dice;
pub mod gandalf;
pub mod poker;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Game, GameId, GameState};
use crate::sandbox::{ExecPolicy, ProcessExecutor, SandboxError, SandboxExecutor};

pub use challenge::{MathQuizGame, PyJailGame};
pub use chess::{ChessGame, ChessState};
pub use debate::DebateGame;
pub use dice::LiarsDiceGame;
pub use gandalf::GandalfGame;
pub use poker::PokerGame;

/// Per-game knobs; every field has a default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameOptions {
    pub chess_move_cap: u32,
    pub poker_hands: u32,
    pub gandalf_max_turns: u32,
    pub debate_rebuttal_rounds: u32,
    /// Judge player ids for debate.
    pub judges: Vec<String>,
    pub pyjail_attack_turns: u32,
    pub sandbox_command: Vec<String>,
    pub sandbox_policy: ExecPolicy,
}

impl Default for GameOptions {
    fn default() -> Self {
        GameOptions {
            chess_move_cap: chess::DEFAULT_MOVE_CAP,
            poker_hands: poker::DEFAULT_HANDS,
            gandalf_max_turns: gandalf::DEFAULT_MAX_TURNS,
            debate_rebuttal_rounds: debate::DEFAULT_REBUTTAL_ROUNDS,
            judges: Vec::new(),
            pyjail_attack_turns: challenge::pyjail::DEFAULT_ATTACK_TURNS,
            sandbox_command: Vec::new(),
            sandbox_policy: ExecPolicy::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("debate needs at least one judge")]
    NoJudges,
    #[error("pyjail needs a sandbox_command")]
    NoSandbox,
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("cannot restore {game}: {detail}")]
    Restore { game: GameId, detail: String },
}

/// A fresh game, fully determined by `seed` and `options`.
pub fn new_game(game: GameId, seed: u64, options: &GameOptions) -> Result<Box<dyn Game>, GameError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match game {
        GameId::Chess => Box::new(ChessGame::new(ChessState::new().with_move_cap(options.chess_move_cap))),
        GameId::Poker => Box::new(PokerGame::new(seed, options.poker_hands)),
        GameId::LiarsDice => Box::new(LiarsDiceGame::new(seed)),
        GameId::Gandalf => Box::new(GandalfGame::new(&mut rng, options.gandalf_max_turns)),
        GameId::Debate => Box::new(
            DebateGame::new(&mut rng, options.judges.clone(), options.debate_rebuttal_rounds)
                .map_err(|_| GameError::NoJudges)?,
        ),
        GameId::Mathquiz => Box::new(MathQuizGame::new(&mut rng)),
        GameId::Pyjail => {
            let executor = spawn_sandbox(options)?;
            Box::new(PyJailGame::new(
                &mut rng,
                executor,
                options.pyjail_attack_turns,
                options.sandbox_policy.wall_timeout_ms,
            ))
        }
    })
}

pub fn spawn_sandbox(options: &GameOptions) -> Result<Box<dyn SandboxExecutor>, GameError> {
    if options.sandbox_command.is_empty() {
        return Err(GameError::NoSandbox);
    }
    Ok(Box::new(ProcessExecutor::spawn(
        &options.sandbox_command,
        options.sandbox_policy.clone(),
    )?))
}

/// Rebuild a game from its snapshot. Restored PyJail games cannot execute code.
pub fn restore(state: &GameState) -> Result<Box<dyn Game>, GameError> {
    fn load<T: serde::de::DeserializeOwned>(state: &GameState) -> Result<T, GameError> {
        serde_json::from_value(state.payload.clone()).map_err(|e| GameError::Restore {
            game: state.game_id,
            detail: e.to_string(),
        })
    }
    Ok(match state.game_id {
        GameId::Chess => Box::new(load::<ChessGame>(state)?),
        GameId::Poker => Box::new(load::<PokerGame>(state)?),
        GameId::LiarsDice => Box::new(load::<LiarsDiceGame>(state)?),
        GameId::Gandalf => Box::new(load::<GandalfGame>(state)?),
        GameId::Debate => Box::new(load::<DebateGame>(state)?),
        GameId::Mathquiz => Box::new(load::<MathQuizGame>(state)?),
        GameId::Pyjail => Box::new(load::<PyJailGame>(state)?),
    })
}
