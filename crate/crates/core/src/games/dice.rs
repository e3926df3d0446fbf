//! Two-player Liar's Dice: five hidden dice each, strict raises, one call ends it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    sample_from_legal, ActionRequest, ActionSampler, ContextView, Fields, Game, GameId, GameState,
    MatchOutcome, OutputField, Reason, Transition,
};

pub const DICE_PER_PLAYER: usize = 5;
const ROLES: [&str; 2] = ["player_1", "player_2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Bid {
    pub quantity: u32,
    pub face: u8,
}

impl Bid {
    /// Higher quantity, or the same quantity with a higher face.
    pub fn raises(&self, previous: &Bid) -> bool {
        self.quantity > previous.quantity
            || (self.quantity == previous.quantity && self.face > previous.face)
    }
}

impl fmt::Display for Bid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bid {} {}", self.quantity, self.face)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiceAction {
    Bid(Bid),
    Call,
}

impl fmt::Display for DiceAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiceAction::Bid(b) => b.fmt(f),
            DiceAction::Call => f.write_str("call"),
        }
    }
}

impl FromStr for DiceAction {
    type Err = DiceError;

    /// `call`, or `bid <quantity> <face>`; "bid 3 fives" style words are not accepted.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let words: Vec<&str> = lower
            .split(|c: char| c.is_whitespace() || c == ',' || c == 'x' || c == '(' || c == ')')
            .filter(|w| !w.is_empty())
            .collect();
        let bad = || DiceError::Unparseable(s.trim().to_string());
        match words.as_slice() {
            ["call"] => Ok(DiceAction::Call),
            ["bid", q, f] => {
                let quantity: u32 = q.parse().map_err(|_| bad())?;
                let face: u8 = f.parse().map_err(|_| bad())?;
                if quantity == 0 || !(1..=6).contains(&face) {
                    return Err(DiceError::OutOfRange { quantity, face });
                }
                Ok(DiceAction::Bid(Bid { quantity, face }))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiceError {
    #[error("unparseable action '{0}': use 'bid <quantity> <face>' or 'call'")]
    Unparseable(String),
    #[error("bid ({quantity}, {face}) out of range: quantity must be at least 1 and face 1 to 6")]
    OutOfRange { quantity: u32, face: u8 },
    #[error("it is {expected}'s turn, not {got}'s")]
    OutOfTurn { expected: String, got: String },
    #[error("cannot call before any bid has been made")]
    CallWithoutBid,
    #[error("{new} does not raise the current bid of {current}: increase the quantity, or keep it and increase the face")]
    NotARaise { new: Bid, current: Bid },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiarsDiceState {
    pub hands: BTreeMap<String, Vec<u8>>,
    pub current_bid: Option<Bid>,
    pub bidder: Option<String>,
    pub turn: String,
    pub history: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiceStep {
    Continue(LiarsDiceState),
    Finished {
        state: LiarsDiceState,
        outcome: MatchOutcome,
    },
}

impl LiarsDiceState {
    pub fn roll(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hands = ROLES
            .iter()
            .map(|r| {
                let dice = (0..DICE_PER_PLAYER).map(|_| rng.gen_range(1..=6)).collect();
                (r.to_string(), dice)
            })
            .collect();
        LiarsDiceState {
            hands,
            current_bid: None,
            bidder: None,
            turn: ROLES[0].to_string(),
            history: Vec::new(),
        }
    }

    pub fn check_action(&self, role: &str, action: &DiceAction) -> Result<(), DiceError> {
        if role != self.turn {
            return Err(DiceError::OutOfTurn {
                expected: self.turn.clone(),
                got: role.to_string(),
            });
        }
        match (action, &self.current_bid) {
            (DiceAction::Call, None) => Err(DiceError::CallWithoutBid),
            (DiceAction::Call, Some(_)) => Ok(()),
            (DiceAction::Bid(b), Some(cur)) if !b.raises(cur) => Err(DiceError::NotARaise {
                new: *b,
                current: *cur,
            }),
            (DiceAction::Bid(_), _) => Ok(()),
        }
    }

    pub fn total_dice(&self) -> u32 {
        self.hands.values().map(|h| h.len() as u32).sum()
    }

    /// Legal actions with quantity capped at the number of dice on the table.
    pub fn sensible_actions(&self) -> Vec<DiceAction> {
        let mut out = Vec::new();
        if self.current_bid.is_some() {
            out.push(DiceAction::Call);
        }
        for quantity in 1..=self.total_dice() {
            for face in 1..=6 {
                let bid = Bid { quantity, face };
                if self.current_bid.is_none_or(|cur| bid.raises(&cur)) {
                    out.push(DiceAction::Bid(bid));
                }
            }
        }
        out
    }
}

/// The bidder wins iff at least `bid.quantity` dice show exactly `bid.face`.
pub fn dice_resolve_call(hands: &BTreeMap<String, Vec<u8>>, bid: &Bid, bidder: &str) -> String {
    let count = hands
        .values()
        .flatten()
        .filter(|&&d| d == bid.face)
        .count() as u32;
    if count >= bid.quantity {
        bidder.to_string()
    } else {
        hands
            .keys()
            .find(|r| *r != bidder)
            .cloned()
            .expect("a caller distinct from the bidder")
    }
}

pub fn dice_apply(state: &LiarsDiceState, role: &str, action: DiceAction) -> Result<DiceStep, DiceError> {
    state.check_action(role, &action)?;
    let mut s = state.clone();
    s.history.push((role.to_string(), action.to_string()));
    let opponent = GameId::LiarsDice.opponent_of(role).expect("competing role");
    match action {
        DiceAction::Bid(b) => {
            s.current_bid = Some(b);
            s.bidder = Some(role.to_string());
            s.turn = opponent.to_string();
            Ok(DiceStep::Continue(s))
        }
        DiceAction::Call => {
            let bid = s.current_bid.expect("checked above");
            let bidder = s.bidder.clone().expect("bid has a bidder");
            let winner = dice_resolve_call(&s.hands, &bid, &bidder);
            let outcome = MatchOutcome::win(GameId::LiarsDice, &winner, Reason::CallResolved);
            Ok(DiceStep::Finished { state: s, outcome })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiarsDiceGame {
    pub state: LiarsDiceState,
    pub outcome: Option<MatchOutcome>,
}

impl LiarsDiceGame {
    pub fn new(seed: u64) -> Self {
        LiarsDiceGame {
            state: LiarsDiceState::roll(seed),
            outcome: None,
        }
    }
}

impl ActionSampler for LiarsDiceGame {
    fn sample_action(&self, request: &ActionRequest, rng: &mut dyn RngCore) -> Option<Fields> {
        let legal: Vec<String> = self
            .state
            .sensible_actions()
            .iter()
            .map(|a| a.to_string())
            .collect();
        sample_from_legal(request, &legal, rng)
    }
}

impl Game for LiarsDiceGame {
    fn game_id(&self) -> GameId {
        GameId::LiarsDice
    }

    fn snapshot(&self) -> GameState {
        GameState {
            game_id: GameId::LiarsDice,
            phase: if self.outcome.is_some() { "finished" } else { "bidding" }.into(),
            turn_role: self.state.turn.clone(),
            payload: serde_json::to_value(self).expect("dice state serializes"),
            terminal: self.outcome.clone(),
        }
    }

    fn outcome(&self) -> Option<MatchOutcome> {
        self.outcome.clone()
    }

    fn next_request(&self) -> Option<ActionRequest> {
        if self.outcome.is_some() {
            return None;
        }
        Some(ActionRequest::new(
            &self.state.turn,
            "DiceAction",
            vec![OutputField::new(
                "Action",
                "either 'bid <quantity> <face>' (face 1-6) or 'call'",
            )],
            "You are playing Liar's Dice. Raise the bid or call your opponent's bluff.",
        ))
    }

    fn view(&self, role: &str) -> ContextView {
        let s = &self.state;
        let dice = s
            .hands
            .get(role)
            .map(|h| h.iter().map(u8::to_string).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        let bid = match (&s.current_bid, &s.bidder) {
            (Some(b), Some(by)) => format!("{} {} by {by}", b.quantity, b.face),
            _ => "none".to_string(),
        };
        let history: Vec<String> = s.history.iter().map(|(r, a)| format!("{r}: {a}")).collect();
        ContextView::new(GameId::LiarsDice, role)
            .with("Role", role)
            .with("Your Dice", dice)
            .with("Total Dice", s.total_dice().to_string())
            .with("Current Bid", bid)
            .with("History", history.join("; "))
    }

    fn validate(&self, request: &ActionRequest, fields: &Fields) -> Result<(), String> {
        let text = fields.get("Action").map(String::as_str).unwrap_or("");
        let action: DiceAction = text.parse().map_err(|e: DiceError| e.to_string())?;
        self.state
            .check_action(&request.role, &action)
            .map_err(|e| e.to_string())
    }

    fn apply(&mut self, request: &ActionRequest, fields: &Fields) -> Transition {
        let text = fields.get("Action").map(String::as_str).unwrap_or("");
        match text.parse().and_then(|a| dice_apply(&self.state, &request.role, a)) {
            Ok(DiceStep::Continue(s)) => {
                self.state = s;
                Transition::Continue
            }
            Ok(DiceStep::Finished { state, outcome }) => {
                self.state = state;
                self.outcome = Some(outcome.clone());
                Transition::Finished(outcome)
            }
            Err(e) => Transition::Abort(format!("validated action failed to apply: {e}")),
        }
    }

    fn moves_played(&self) -> usize {
        self.state.history.len()
    }
}
