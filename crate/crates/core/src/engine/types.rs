use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Parsed output fields of one player response, keyed by field name.
pub type Fields = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameId {
    Chess,
    Poker,
    LiarsDice,
    Gandalf,
    Debate,
    Mathquiz,
    Pyjail,
}

impl GameId {
    pub const ALL: [GameId; 7] = [
        GameId::Chess,
        GameId::Poker,
        GameId::LiarsDice,
        GameId::Gandalf,
        GameId::Debate,
        GameId::Mathquiz,
        GameId::Pyjail,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GameId::Chess => "chess",
            GameId::Poker => "poker",
            GameId::LiarsDice => "liars_dice",
            GameId::Gandalf => "gandalf",
            GameId::Debate => "debate",
            GameId::Mathquiz => "mathquiz",
            GameId::Pyjail => "pyjail",
        }
    }

    /// The two competing roles, in seat order.
    pub fn roles(self) -> [&'static str; 2] {
        match self {
            GameId::Chess => ["white", "black"],
            GameId::Poker => ["player_1", "player_2"],
            GameId::LiarsDice => ["player_1", "player_2"],
            GameId::Gandalf => ["sentinel", "infiltrator"],
            GameId::Debate => ["debater_1", "debater_2"],
            GameId::Mathquiz => ["teacher", "student"],
            GameId::Pyjail => ["defender", "attacker"],
        }
    }

    /// Retry budget per invalid action used in the reference experiments.
    pub fn default_max_attempts(self) -> u32 {
        match self {
            GameId::Debate | GameId::Gandalf | GameId::LiarsDice => 3,
            GameId::Chess | GameId::Mathquiz | GameId::Pyjail | GameId::Poker => 5,
        }
    }

    pub fn opponent_of(self, role: &str) -> Option<&'static str> {
        let [a, b] = self.roles();
        if role == a {
            Some(b)
        } else if role == b {
            Some(a)
        } else {
            None
        }
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GameId::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown game id '{s}'"))
    }
}

/// Winning role, or a draw. Serialized as the role name or `"draw"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Winner {
    Role(String),
    Draw,
}

impl Winner {
    pub fn role(r: impl Into<String>) -> Self {
        Winner::Role(r.into())
    }

    pub fn as_role(&self) -> Option<&str> {
        match self {
            Winner::Role(r) => Some(r),
            Winner::Draw => None,
        }
    }
}

impl From<String> for Winner {
    fn from(s: String) -> Self {
        if s == "draw" {
            Winner::Draw
        } else {
            Winner::Role(s)
        }
    }
}

impl From<Winner> for String {
    fn from(w: Winner) -> Self {
        match w {
            Winner::Role(r) => r,
            Winner::Draw => "draw".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Checkmate,
    StalemateDraw,
    InvalidMoveForfeit,
    ChipsExhausted,
    ChipCount,
    CallResolved,
    PasswordRevealed,
    MaxTurnsSurvived,
    JuryScore,
    CorrectAnswer,
    WrongAnswer,
    InvalidChallengeForfeit,
    FlagCaptured,
    FlagDefended,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Checkmate => "checkmate",
            Reason::StalemateDraw => "stalemate_draw",
            Reason::InvalidMoveForfeit => "invalid_move_forfeit",
            Reason::ChipsExhausted => "chips_exhausted",
            Reason::ChipCount => "chip_count",
            Reason::CallResolved => "call_resolved",
            Reason::PasswordRevealed => "password_revealed",
            Reason::MaxTurnsSurvived => "max_turns_survived",
            Reason::JuryScore => "jury_score",
            Reason::CorrectAnswer => "correct_answer",
            Reason::WrongAnswer => "wrong_answer",
            Reason::InvalidChallengeForfeit => "invalid_challenge_forfeit",
            Reason::FlagCaptured => "flag_captured",
            Reason::FlagDefended => "flag_defended",
        }
    }

    /// Whether a verdict with this reason can legitimately end `game`.
    pub fn valid_for(self, game: GameId) -> bool {
        use Reason::*;
        match game {
            GameId::Chess => matches!(self, Checkmate | StalemateDraw | InvalidMoveForfeit),
            GameId::Poker => matches!(self, ChipsExhausted | ChipCount | InvalidMoveForfeit),
            GameId::LiarsDice => matches!(self, CallResolved | InvalidMoveForfeit),
            GameId::Gandalf => {
                matches!(self, PasswordRevealed | MaxTurnsSurvived | InvalidMoveForfeit)
            }
            GameId::Debate => matches!(self, JuryScore | InvalidMoveForfeit),
            GameId::Mathquiz => {
                matches!(self, CorrectAnswer | WrongAnswer | InvalidChallengeForfeit)
            }
            GameId::Pyjail => matches!(
                self,
                FlagCaptured | FlagDefended | InvalidChallengeForfeit | InvalidMoveForfeit
            ),
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub winner: Winner,
    pub reason: Reason,
    pub scores: BTreeMap<String, f64>,
    /// Finer-grained explanation, e.g. which draw rule applied.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl MatchOutcome {
    pub fn win(game: GameId, winner: &str, reason: Reason) -> Self {
        let mut scores = BTreeMap::new();
        for role in game.roles() {
            scores.insert(role.to_string(), if role == winner { 1.0 } else { 0.0 });
        }
        MatchOutcome {
            winner: Winner::role(winner),
            reason,
            scores,
            detail: String::new(),
        }
    }

    pub fn draw(game: GameId, reason: Reason) -> Self {
        let scores = game.roles().iter().map(|r| (r.to_string(), 0.5)).collect();
        MatchOutcome {
            winner: Winner::Draw,
            reason,
            scores,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn with_scores(mut self, scores: BTreeMap<String, f64>) -> Self {
        self.scores = scores;
        self
    }
}

/// Serializable snapshot of any game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub game_id: GameId,
    pub phase: String,
    pub turn_role: String,
    pub payload: serde_json::Value,
    pub terminal: Option<MatchOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputField {
    pub name: String,
    pub description: String,
}

impl OutputField {
    pub fn new(name: &str, description: &str) -> Self {
        OutputField {
            name: name.to_string(),
            description: description.to_string(),
        }
    }
}

/// What the engine asks a role to do next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRequest {
    pub role: String,
    pub action_name: String,
    pub fields_required: Vec<OutputField>,
    pub instructions: String,
    /// Overrides the match-wide retry budget for this action.
    #[serde(default)]
    pub max_attempts: Option<u32>,
    /// Marks a generator self-solve step of the challenge verification protocol.
    #[serde(default)]
    pub verification: bool,
}

impl ActionRequest {
    pub fn new(role: &str, action_name: &str, fields: Vec<OutputField>, instructions: &str) -> Self {
        ActionRequest {
            role: role.to_string(),
            action_name: action_name.to_string(),
            fields_required: fields,
            instructions: instructions.to_string(),
            max_attempts: None,
            verification: false,
        }
    }

    pub fn field_names(&self) -> impl Iterator<Item = &str> {
        self.fields_required.iter().map(|f| f.name.as_str())
    }

    /// The first required field; the "action" carried by a single-field request.
    pub fn primary_field(&self) -> &str {
        &self.fields_required[0].name
    }
}

/// The slice of game state one role is allowed to see, plus retry feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextView {
    pub game_id: GameId,
    pub role: String,
    pub fields: Vec<(String, String)>,
    #[serde(default)]
    pub feedback: Vec<String>,
}

impl ContextView {
    pub fn new(game_id: GameId, role: &str) -> Self {
        ContextView {
            game_id,
            role: role.to_string(),
            fields: Vec::new(),
            feedback: Vec::new(),
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<String>) -> Self {
        self.fields.push((name.to_string(), value.into()));
        self
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn has(&self, name: &str) -> bool {
        self.get(name).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionResult {
    pub accepted: bool,
    pub attempts_used: u32,
    pub feedback_history: Vec<String>,
    pub parsed_fields: Fields,
}

/// Result of applying an accepted action or exhausting a retry budget.
#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    Continue,
    Finished(MatchOutcome),
    Abort(String),
}

/// A deterministic manager step to be recorded as a `verification_step` event.
#[derive(Debug, Clone, PartialEq)]
pub struct ManagerNote {
    pub step: String,
    pub payload: serde_json::Value,
    pub error: String,
}

impl ManagerNote {
    pub fn new(step: &str, payload: serde_json::Value) -> Self {
        ManagerNote {
            step: step.to_string(),
            payload,
            error: String::new(),
        }
    }

    pub fn failed(step: &str, payload: serde_json::Value, error: impl Into<String>) -> Self {
        ManagerNote {
            step: step.to_string(),
            payload,
            error: error.into(),
        }
    }
}

/// Per-match settings shared by all games.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub max_player_attempts: u32,
}

impl MatchConfig {
    pub fn for_game(game: GameId) -> Self {
        MatchConfig {
            max_player_attempts: game.default_max_attempts(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn winner_serializes_as_plain_string() {
        let o = MatchOutcome::win(GameId::Chess, "white", Reason::Checkmate);
        let v = serde_json::to_value(&o).unwrap();
        assert_eq!(v["winner"], "white");
        assert_eq!(v["reason"], "checkmate");
        let d = MatchOutcome::draw(GameId::Chess, Reason::StalemateDraw);
        let back: MatchOutcome = serde_json::from_value(serde_json::to_value(&d).unwrap()).unwrap();
        assert_eq!(back.winner, Winner::Draw);
    }

    #[test]
    fn reasons_are_game_specific() {
        assert!(Reason::Checkmate.valid_for(GameId::Chess));
        assert!(!Reason::Checkmate.valid_for(GameId::Poker));
        assert!(!Reason::FlagCaptured.valid_for(GameId::Mathquiz));
        for g in GameId::ALL {
            assert!(g.to_string().parse::<GameId>().unwrap() == g);
        }
    }

    #[test]
    fn attempt_budgets_follow_reference_settings() {
        assert_eq!(GameId::Debate.default_max_attempts(), 3);
        assert_eq!(GameId::Gandalf.default_max_attempts(), 3);
        assert_eq!(GameId::LiarsDice.default_max_attempts(), 3);
        assert_eq!(GameId::Chess.default_max_attempts(), 5);
        assert_eq!(GameId::Poker.default_max_attempts(), 5);
        assert_eq!(GameId::Mathquiz.default_max_attempts(), 5);
        assert_eq!(GameId::Pyjail.default_max_attempts(), 5);
    }
}
