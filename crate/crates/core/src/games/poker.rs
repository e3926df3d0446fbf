//! Heads-up no-limit hold'em over a fixed number of hands.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cards::{format_cards, poker_rank_hand, Card};
use crate::engine::{
    sample_from_legal, ActionRequest, ActionSampler, ContextView, Fields, Game, GameId, GameState,
    MatchOutcome, OutputField, Reason, Transition,
};
use crate::players::mix_seed;

pub const STARTING_STACK: u32 = 1000;
pub const TOTAL_CHIPS: u32 = 2 * STARTING_STACK;
pub const SMALL_BLIND: u32 = 10;
pub const BIG_BLIND: u32 = 20;
pub const DEFAULT_HANDS: u32 = 10;

const ROLES: [&str; 2] = ["player_1", "player_2"];

fn other(role: &str) -> &'static str {
    if role == ROLES[0] {
        ROLES[1]
    } else {
        ROLES[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Street {
    Preflop,
    Flop,
    Turn,
    River,
    Showdown,
}

impl Street {
    pub fn community_len(self) -> usize {
        match self {
            Street::Preflop => 0,
            Street::Flop => 3,
            Street::Turn => 4,
            Street::River | Street::Showdown => 5,
        }
    }

    fn next(self) -> Street {
        match self {
            Street::Preflop => Street::Flop,
            Street::Flop => Street::Turn,
            Street::Turn => Street::River,
            Street::River | Street::Showdown => Street::Showdown,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Street::Preflop => "preflop",
            Street::Flop => "flop",
            Street::Turn => "turn",
            Street::River => "river",
            Street::Showdown => "showdown",
        }
    }
}

/// `Bet` opens a street; `Raise` is the increment on top of the call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PokerAction {
    Fold,
    Check,
    Call,
    Bet(u32),
    Raise(u32),
}

impl fmt::Display for PokerAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PokerAction::Fold => f.write_str("fold"),
            PokerAction::Check => f.write_str("check"),
            PokerAction::Call => f.write_str("call"),
            PokerAction::Bet(n) => write!(f, "bet {n}"),
            PokerAction::Raise(n) => write!(f, "raise {n}"),
        }
    }
}

impl FromStr for PokerAction {
    type Err = PokerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let cleaned: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == '(' || c == ')' || c == ':' { ' ' } else { c })
            .collect();
        let words: Vec<&str> = cleaned.split_whitespace().collect();
        let amount = |w: Option<&&str>| -> Result<u32, PokerError> {
            w.and_then(|w| w.trim_end_matches('.').parse().ok())
                .ok_or_else(|| PokerError::Unparseable(s.trim().to_string()))
        };
        match words.first().copied() {
            Some("fold") if words.len() == 1 => Ok(PokerAction::Fold),
            Some("check") if words.len() == 1 => Ok(PokerAction::Check),
            Some("call") if words.len() == 1 => Ok(PokerAction::Call),
            Some("bet") if words.len() == 2 => Ok(PokerAction::Bet(amount(words.get(1))?)),
            Some("raise") if words.len() == 2 => Ok(PokerAction::Raise(amount(words.get(1))?)),
            _ => Err(PokerError::Unparseable(s.trim().to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PokerError {
    #[error("unparseable action '{0}': use fold, check, call, bet <amount> or raise <amount>")]
    Unparseable(String),
    #[error("it is {expected}'s turn, not {got}'s")]
    OutOfTurn { expected: String, got: String },
    #[error("the hand is over")]
    HandOver,
    #[error("cannot check facing a bet of {0}; call, raise or fold")]
    CheckFacingBet(u32),
    #[error("nothing to call; check or bet")]
    NothingToCall,
    #[error("a bet is already open on this street; use raise")]
    BetAlreadyOpen,
    #[error("no bet to raise; use bet")]
    NoBetToRaise,
    #[error("bet of {amount} is below the minimum of {min}")]
    BetBelowMinimum { amount: u32, min: u32 },
    #[error("raise of {amount} is below the last raise size of {min}")]
    RaiseBelowMinimum { amount: u32, min: u32 },
    #[error("{amount} chips exceeds your stack of {stack}")]
    ExceedsStack { amount: u32, stack: u32 },
    #[error("opponent is all-in; call or fold")]
    OpponentAllIn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BetRecord {
    pub hand: u32,
    pub street: Street,
    pub role: String,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandResult {
    pub hand: u32,
    pub winner: Option<String>,
    pub pot: u32,
    pub showdown: bool,
}

/// Full table state. `pot` includes bets of the current street, so
/// `stacks` plus `pot` always totals [`TOTAL_CHIPS`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PokerState {
    pub stacks: BTreeMap<String, u32>,
    pub hole_cards: BTreeMap<String, Vec<Card>>,
    pub community: Vec<Card>,
    pub pot: u32,
    pub street: Street,
    pub bet_history: Vec<BetRecord>,
    pub hand_index: u32,
    pub button: String,
    pub num_hands: u32,
    pub turn: String,
    /// Chips committed on the current street.
    pub street_bets: BTreeMap<String, u32>,
    pub last_raise: u32,
    /// Roles that have acted voluntarily on the current street.
    pub acted: Vec<String>,
    /// Undealt cards of the current hand, next card last.
    pub deck: Vec<Card>,
    pub seed: u64,
    pub results: Vec<HandResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PokerStep {
    Continue(PokerState),
    Finished {
        state: PokerState,
        outcome: MatchOutcome,
    },
}

impl PokerStep {
    pub fn state(&self) -> &PokerState {
        match self {
            PokerStep::Continue(s) | PokerStep::Finished { state: s, .. } => s,
        }
    }
}

impl PokerState {
    pub fn new(seed: u64, num_hands: u32) -> Self {
        let mut state = PokerState {
            stacks: ROLES.iter().map(|r| (r.to_string(), STARTING_STACK)).collect(),
            hole_cards: BTreeMap::new(),
            community: Vec::new(),
            pot: 0,
            street: Street::Preflop,
            bet_history: Vec::new(),
            hand_index: 0,
            button: ROLES[0].to_string(),
            num_hands: num_hands.max(1),
            turn: ROLES[0].to_string(),
            street_bets: BTreeMap::new(),
            last_raise: BIG_BLIND,
            acted: Vec::new(),
            deck: Vec::new(),
            seed,
            results: Vec::new(),
        };
        state.start_hand();
        state
    }

    pub fn chips_in_play(&self) -> u32 {
        self.stacks.values().sum::<u32>() + self.pot
    }

    fn bet_of(&self, role: &str) -> u32 {
        self.street_bets.get(role).copied().unwrap_or(0)
    }

    fn stack_of(&self, role: &str) -> u32 {
        self.stacks[role]
    }

    pub fn to_call(&self, role: &str) -> u32 {
        self.bet_of(other(role)).saturating_sub(self.bet_of(role))
    }

    fn big_blind_role(&self) -> &'static str {
        other(&self.button)
    }

    fn commit(&mut self, role: &str, amount: u32) {
        let stack = self.stacks.get_mut(role).expect("known role");
        debug_assert!(amount <= *stack);
        *stack -= amount;
        *self.street_bets.entry(role.to_string()).or_insert(0) += amount;
        self.pot += amount;
    }

    fn deal(&mut self, n: usize) -> Vec<Card> {
        (0..n).map(|_| self.deck.pop().expect("deck holds enough cards")).collect()
    }

    fn start_hand(&mut self) {
        let mut deck = Card::deck();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[self.seed, self.hand_index as u64]));
        deck.shuffle(&mut rng);
        self.deck = deck;
        self.community.clear();
        self.street = Street::Preflop;
        self.street_bets.clear();
        self.acted.clear();
        self.last_raise = BIG_BLIND;
        let sb = self.button.clone();
        let bb = self.big_blind_role().to_string();
        let sb_cards = self.deal(2);
        let bb_cards = self.deal(2);
        self.hole_cards.insert(sb.clone(), sb_cards);
        self.hole_cards.insert(bb.clone(), bb_cards);
        self.commit(&sb, SMALL_BLIND.min(self.stack_of(&sb)));
        self.commit(&bb, BIG_BLIND.min(self.stack_of(&bb)));
        self.turn = sb;
    }

    /// Return the uncalled part of a bet once the shorter side is all-in.
    fn refund_uncalled(&mut self) {
        for role in ROLES {
            let opp = other(role);
            if self.stack_of(role) == 0 && self.bet_of(role) < self.bet_of(opp) {
                let excess = self.bet_of(opp) - self.bet_of(role);
                *self.stacks.get_mut(opp).unwrap() += excess;
                *self.street_bets.get_mut(opp).unwrap() -= excess;
                self.pot -= excess;
            }
        }
    }

    /// No further betting is possible: someone is all-in and matched.
    fn betting_closed(&self) -> bool {
        ROLES.iter().any(|r| self.stack_of(r) == 0) && self.to_call(ROLES[0]) == 0 && self.to_call(ROLES[1]) == 0
    }

    pub fn check_action(&self, role: &str, action: PokerAction) -> Result<(), PokerError> {
        if self.street == Street::Showdown {
            return Err(PokerError::HandOver);
        }
        if role != self.turn {
            return Err(PokerError::OutOfTurn {
                expected: self.turn.clone(),
                got: role.to_string(),
            });
        }
        let to_call = self.to_call(role);
        let stack = self.stack_of(role);
        let opp_stack = self.stack_of(other(role));
        let open = self.bet_of(role).max(self.bet_of(other(role))) > 0;
        match action {
            PokerAction::Fold => Ok(()),
            PokerAction::Check if to_call > 0 => Err(PokerError::CheckFacingBet(to_call)),
            PokerAction::Check => Ok(()),
            PokerAction::Call if to_call == 0 => Err(PokerError::NothingToCall),
            PokerAction::Call => Ok(()),
            PokerAction::Bet(_) if open => Err(PokerError::BetAlreadyOpen),
            PokerAction::Bet(n) if n > stack => Err(PokerError::ExceedsStack { amount: n, stack }),
            PokerAction::Bet(n) if n < BIG_BLIND && n != stack => {
                Err(PokerError::BetBelowMinimum { amount: n, min: BIG_BLIND })
            }
            PokerAction::Bet(_) if opp_stack == 0 => Err(PokerError::OpponentAllIn),
            PokerAction::Bet(_) => Ok(()),
            PokerAction::Raise(_) if !open => Err(PokerError::NoBetToRaise),
            PokerAction::Raise(_) if opp_stack == 0 => Err(PokerError::OpponentAllIn),
            PokerAction::Raise(n) if to_call + n > stack => Err(PokerError::ExceedsStack {
                amount: to_call + n,
                stack,
            }),
            PokerAction::Raise(n) if n == 0 || (n < self.last_raise && to_call + n != stack) => {
                Err(PokerError::RaiseBelowMinimum { amount: n, min: self.last_raise })
            }
            PokerAction::Raise(_) => Ok(()),
        }
    }

    /// Every distinct action worth offering a random player.
    pub fn sample_actions(&self) -> Vec<PokerAction> {
        let role = self.turn.clone();
        let to_call = self.to_call(&role);
        let stack = self.stack_of(&role);
        let mut out = vec![PokerAction::Fold, PokerAction::Check, PokerAction::Call];
        out.extend([BIG_BLIND, self.pot.max(BIG_BLIND), stack].map(PokerAction::Bet));
        let room = stack.saturating_sub(to_call);
        out.extend([self.last_raise, self.pot.max(self.last_raise), room].map(PokerAction::Raise));
        out.retain(|a| self.check_action(&role, *a).is_ok());
        // folding when checking is free is legal but pointless
        if to_call == 0 {
            out.retain(|a| *a != PokerAction::Fold);
        }
        out.dedup();
        out
    }
}

/// Apply `action` by `role`, advancing streets, hands and the match.
pub fn poker_step(state: &PokerState, role: &str, action: PokerAction) -> Result<PokerStep, PokerError> {
    state.check_action(role, action)?;
    let mut s = state.clone();
    s.bet_history.push(BetRecord {
        hand: s.hand_index,
        street: s.street,
        role: role.to_string(),
        action: action.to_string(),
    });
    let opp = other(role);
    let to_call = s.to_call(role);
    match action {
        PokerAction::Fold => return Ok(finish_hand(s, Some(opp.to_string()), false)),
        PokerAction::Check => {}
        PokerAction::Call => {
            let pay = to_call.min(s.stack_of(role));
            s.commit(role, pay);
        }
        PokerAction::Bet(n) => {
            s.commit(role, n);
            s.last_raise = s.last_raise.max(n).max(BIG_BLIND);
        }
        PokerAction::Raise(n) => {
            s.commit(role, to_call + n);
            s.last_raise = s.last_raise.max(n);
        }
    }
    if !s.acted.iter().any(|r| r == role) {
        s.acted.push(role.to_string());
    }
    s.refund_uncalled();
    Ok(advance(s, opp))
}

/// Move the action on, closing the street or the hand when betting is done.
fn advance(mut s: PokerState, next_role: &str) -> PokerStep {
    let equal = s.to_call(next_role) == 0 && s.to_call(other(next_role)) == 0;
    let everyone_acted = ROLES
        .iter()
        .all(|r| s.acted.iter().any(|a| a == r) || s.stack_of(r) == 0);
    if s.betting_closed() {
        let missing = 5 - s.community.len();
        let cards = s.deal(missing);
        s.community.extend(cards);
        s.street = Street::Showdown;
        return showdown(s);
    }
    if !(equal && everyone_acted) {
        s.turn = next_role.to_string();
        return PokerStep::Continue(s);
    }
    s.street = s.street.next();
    if s.street == Street::Showdown {
        return showdown(s);
    }
    let n = s.street.community_len() - s.community.len();
    let cards = s.deal(n);
    s.community.extend(cards);
    s.street_bets.clear();
    s.acted.clear();
    s.last_raise = BIG_BLIND;
    s.turn = s.big_blind_role().to_string();
    PokerStep::Continue(s)
}

fn showdown(s: PokerState) -> PokerStep {
    let rank_of = |role: &str| {
        let mut seven = s.hole_cards[role].clone();
        seven.extend_from_slice(&s.community);
        poker_rank_hand(&seven).expect("dealt cards are distinct")
    };
    let (a, b) = (rank_of(ROLES[0]), rank_of(ROLES[1]));
    let winner = match a.cmp(&b) {
        std::cmp::Ordering::Greater => Some(ROLES[0].to_string()),
        std::cmp::Ordering::Less => Some(ROLES[1].to_string()),
        std::cmp::Ordering::Equal => None,
    };
    finish_hand(s, winner, true)
}

fn finish_hand(mut s: PokerState, winner: Option<String>, at_showdown: bool) -> PokerStep {
    let pot = s.pot;
    match &winner {
        Some(w) => *s.stacks.get_mut(w).unwrap() += pot,
        None => {
            // odd chip to the big blind
            let bb = s.big_blind_role();
            *s.stacks.get_mut(bb).unwrap() += pot - pot / 2;
            *s.stacks.get_mut(other(bb)).unwrap() += pot / 2;
        }
    }
    s.pot = 0;
    s.street_bets.clear();
    s.street = Street::Showdown;
    s.results.push(HandResult {
        hand: s.hand_index,
        winner,
        pot,
        showdown: at_showdown,
    });
    s.hand_index += 1;

    if let Some(broke) = ROLES.iter().find(|r| s.stack_of(r) == 0) {
        let outcome = MatchOutcome::win(GameId::Poker, other(broke), Reason::ChipsExhausted);
        return PokerStep::Finished { state: s, outcome };
    }
    if s.hand_index >= s.num_hands {
        let (a, b) = (s.stack_of(ROLES[0]), s.stack_of(ROLES[1]));
        let outcome = match a.cmp(&b) {
            std::cmp::Ordering::Greater => MatchOutcome::win(GameId::Poker, ROLES[0], Reason::ChipCount),
            std::cmp::Ordering::Less => MatchOutcome::win(GameId::Poker, ROLES[1], Reason::ChipCount),
            std::cmp::Ordering::Equal => MatchOutcome::draw(GameId::Poker, Reason::ChipCount),
        };
        return PokerStep::Finished { state: s, outcome };
    }
    s.button = other(&s.button).to_string();
    s.start_hand();
    // a blind can put a short stack all-in before anyone acts
    s.refund_uncalled();
    if s.betting_closed() {
        let missing = 5 - s.community.len();
        let cards = s.deal(missing);
        s.community.extend(cards);
        return showdown(s);
    }
    PokerStep::Continue(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PokerGame {
    pub state: PokerState,
    pub outcome: Option<MatchOutcome>,
}

impl PokerGame {
    pub fn new(seed: u64, num_hands: u32) -> Self {
        PokerGame {
            state: PokerState::new(seed, num_hands),
            outcome: None,
        }
    }
}

impl ActionSampler for PokerGame {
    fn sample_action(&self, request: &ActionRequest, rng: &mut dyn RngCore) -> Option<Fields> {
        let legal: Vec<String> = self.state.sample_actions().iter().map(|a| a.to_string()).collect();
        sample_from_legal(request, &legal, rng)
    }
}

impl Game for PokerGame {
    fn game_id(&self) -> GameId {
        GameId::Poker
    }

    fn snapshot(&self) -> GameState {
        GameState {
            game_id: GameId::Poker,
            phase: self.state.street.name().into(),
            turn_role: self.state.turn.clone(),
            payload: serde_json::to_value(self).expect("poker state serializes"),
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
            "PokerAction",
            vec![OutputField::new(
                "Action",
                "one of: fold, check, call, bet <amount>, raise <amount above the call>",
            )],
            "You are playing heads-up Texas Hold'em. Choose your betting action.",
        ))
    }

    fn view(&self, role: &str) -> ContextView {
        let s = &self.state;
        let opp = other(role);
        let history: Vec<String> = s
            .bet_history
            .iter()
            .filter(|b| b.hand == s.hand_index)
            .map(|b| format!("{} {}: {}", b.street.name(), b.role, b.action))
            .collect();
        let hole = s.hole_cards.get(role).map(|c| format_cards(c)).unwrap_or_default();
        ContextView::new(GameId::Poker, role)
            .with("Role", role)
            .with("Hand", format!("{} of {}", s.hand_index + 1, s.num_hands))
            .with("Street", s.street.name())
            .with("Your Hole Cards", hole)
            .with("Community Cards", format_cards(&s.community))
            .with("Pot", s.pot.to_string())
            .with("Your Stack", s.stacks.get(role).copied().unwrap_or(0).to_string())
            .with("Opponent Stack", s.stacks.get(opp).copied().unwrap_or(0).to_string())
            .with("To Call", s.to_call(role).to_string())
            .with("Button", s.button.clone())
            .with("Betting History", history.join("; "))
    }

    fn validate(&self, request: &ActionRequest, fields: &Fields) -> Result<(), String> {
        let text = fields.get("Action").map(String::as_str).unwrap_or("");
        let action: PokerAction = text.parse().map_err(|e: PokerError| e.to_string())?;
        self.state
            .check_action(&request.role, action)
            .map_err(|e| e.to_string())
    }

    fn apply(&mut self, request: &ActionRequest, fields: &Fields) -> Transition {
        let text = fields.get("Action").map(String::as_str).unwrap_or("");
        let step = text
            .parse()
            .and_then(|a| poker_step(&self.state, &request.role, a));
        match step {
            Ok(PokerStep::Continue(s)) => {
                self.state = s;
                Transition::Continue
            }
            Ok(PokerStep::Finished { state, outcome }) => {
                self.state = state;
                self.outcome = Some(outcome.clone());
                Transition::Finished(outcome)
            }
            Err(e) => Transition::Abort(format!("validated action failed to apply: {e}")),
        }
    }

    fn moves_played(&self) -> usize {
        self.state.bet_history.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(s: &PokerState, action: PokerAction) -> PokerStep {
        poker_step(s, &s.turn.clone(), action).unwrap()
    }

    fn cont(p: PokerStep) -> PokerState {
        match p {
            PokerStep::Continue(s) => s,
            other => panic!("expected continuation, got {other:?}"),
        }
    }

    #[test]
    fn blinds_posted_and_conserved() {
        let s = PokerState::new(1, 10);
        assert_eq!(s.pot, 30);
        assert_eq!(s.chips_in_play(), TOTAL_CHIPS);
        assert_eq!(s.turn, "player_1");
        assert_eq!(s.to_call("player_1"), 10);
    }

    #[test]
    fn limp_and_check_reaches_flop() {
        let s = PokerState::new(1, 10);
        let s = cont(step(&s, PokerAction::Call));
        assert_eq!(s.street, Street::Preflop);
        assert_eq!(s.turn, "player_2");
        let s = cont(step(&s, PokerAction::Check));
        assert_eq!(s.street, Street::Flop);
        assert_eq!(s.community.len(), 3);
        assert_eq!(s.pot, 40);
        assert_eq!(s.turn, "player_2", "big blind acts first after the flop");
    }

    #[test]
    fn fold_awards_pot_and_starts_next_hand() {
        let s = PokerState::new(3, 10);
        let s = cont(step(&s, PokerAction::Fold));
        assert_eq!(s.hand_index, 1);
        assert_eq!(s.stacks["player_2"] + s.stacks["player_1"] + s.pot, TOTAL_CHIPS);
        assert_eq!(s.button, "player_2");
        assert_eq!(s.results[0].winner.as_deref(), Some("player_2"));
    }

    #[test]
    fn illegal_actions_explained() {
        let s = PokerState::new(1, 10);
        assert_eq!(
            s.check_action("player_1", PokerAction::Check),
            Err(PokerError::CheckFacingBet(10))
        );
        assert!(matches!(
            s.check_action("player_2", PokerAction::Call),
            Err(PokerError::OutOfTurn { .. })
        ));
        assert!(matches!(
            s.check_action("player_1", PokerAction::Raise(5)),
            Err(PokerError::RaiseBelowMinimum { min: 20, .. })
        ));
        assert!(matches!(
            s.check_action("player_1", PokerAction::Bet(40)),
            Err(PokerError::BetAlreadyOpen)
        ));
        let s = cont(step(&s, PokerAction::Raise(60)));
        assert!(matches!(
            s.check_action("player_2", PokerAction::Raise(40)),
            Err(PokerError::RaiseBelowMinimum { min: 60, .. })
        ));
    }

    #[test]
    fn all_in_runs_out_the_board() {
        let s = PokerState::new(5, 10);
        let s = cont(step(&s, PokerAction::Raise(980)));
        assert_eq!(s.stacks["player_1"], 0);
        let next = step(&s, PokerAction::Call);
        let s = next.state();
        assert_eq!(s.chips_in_play(), TOTAL_CHIPS);
        assert_eq!(s.results.len(), 1);
        assert!(s.results[0].showdown);
    }

    #[test]
    fn action_text_parsing() {
        assert_eq!("Raise 40".parse::<PokerAction>().unwrap(), PokerAction::Raise(40));
        assert_eq!("bet(25)".parse::<PokerAction>().unwrap(), PokerAction::Bet(25));
        assert_eq!(" CALL ".parse::<PokerAction>().unwrap(), PokerAction::Call);
        assert!("raise".parse::<PokerAction>().is_err());
        assert!("shove everything".parse::<PokerAction>().is_err());
    }
}
