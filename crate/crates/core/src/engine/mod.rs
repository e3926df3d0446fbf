//! Game-agnostic match execution.
//!
//! The engine asks a [`Game`] what happens next, shows the acting role only
//! its regulated [`ContextView`], runs the bounded retry-with-feedback loop
//! against the role's [`Agent`], and records every attempt, manager step and
//! the final verdict as [`TraceEvent`]s.

mod types;

use std::collections::BTreeMap;

use rand::RngCore;
use serde_json::json;
use thiserror::Error;

use crate::players::{
    build_agent, parse_structured_output, Agent, BackendError, PlayerSpec, PromptSignature, Turn,
    RATIONALE,
};
use crate::trace::{Clock, EventKind, TraceError, TraceEvent, TraceSink, MANAGER_ROLE};
pub use types::*;

/// Hard ceiling on requests per match, far above any game's natural length.
const MAX_REQUESTS_PER_MATCH: usize = 20_000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no player bound to role '{0}'")]
    MissingPlayer(String),
    #[error("max_player_attempts must be at least 1")]
    ZeroAttempts,
    #[error("match aborted: {0}")]
    Aborted(String),
    #[error("trace sink failure: {0}")]
    Trace(#[from] TraceError),
    #[error("invalid game state: {0}")]
    InvalidState(String),
}

impl EngineError {
    /// Aborts are infrastructure failures, not game results.
    pub fn is_abort(&self) -> bool {
        matches!(self, EngineError::Aborted(_) | EngineError::Trace(_))
    }
}

/// Produces a random valid action for a request; drives baseline players.
pub trait ActionSampler {
    fn sample_action(&self, request: &ActionRequest, rng: &mut dyn RngCore) -> Option<Fields>;
}

/// A two-sided game as a state machine of action requests.
pub trait Game: ActionSampler + Send {
    fn game_id(&self) -> GameId;

    /// Every role that may be asked to act (competitors plus auxiliaries such as judges).
    fn declared_roles(&self) -> Vec<String> {
        self.game_id().roles().iter().map(|r| r.to_string()).collect()
    }

    fn snapshot(&self) -> GameState;

    /// Set once the game is over.
    fn outcome(&self) -> Option<MatchOutcome>;

    /// What to ask next; `None` iff the game is over.
    fn next_request(&self) -> Option<ActionRequest>;

    /// Information `role` is allowed to see right now.
    fn view(&self, role: &str) -> ContextView;

    /// Pure legality check used by the retry loop.
    fn validate(&self, request: &ActionRequest, fields: &Fields) -> Result<(), String>;

    fn apply(&mut self, request: &ActionRequest, fields: &Fields) -> Transition;

    /// Called when `request.role` used up its retry budget. Defaults to forfeit.
    fn on_exhausted(&mut self, request: &ActionRequest) -> Transition {
        let outcome = forfeit(self.game_id(), &request.role, Reason::InvalidMoveForfeit);
        Transition::Finished(outcome)
    }

    /// Manager steps recorded since the last call.
    fn take_notes(&mut self) -> Vec<ManagerNote> {
        Vec::new()
    }

    /// Accepted game moves so far (plies for chess).
    fn moves_played(&self) -> usize;
}

/// The opponent of `loser` wins.
pub fn forfeit(game: GameId, loser: &str, reason: Reason) -> MatchOutcome {
    let winner = game
        .opponent_of(loser)
        .expect("forfeit by a competing role");
    MatchOutcome::win(game, winner, reason)
}

/// Pick uniformly among `legal` values of the request's primary field.
pub fn sample_from_legal(
    request: &ActionRequest,
    legal: &[String],
    rng: &mut dyn RngCore,
) -> Option<Fields> {
    let choice = crate::players::random_legal_next(rng, legal).ok()?;
    Some(Fields::from([(request.primary_field().to_string(), choice)]))
}

/// Fields visible to `role` in a serialized game state.
pub fn regulate_context(state: &GameState, role: &str) -> Result<ContextView, EngineError> {
    let game = crate::games::restore(state).map_err(|e| EngineError::InvalidState(e.to_string()))?;
    if !game.declared_roles().iter().any(|r| r == role) {
        return Err(EngineError::InvalidState(format!(
            "role '{role}' is not declared by {}",
            state.game_id
        )));
    }
    Ok(game.view(role))
}

/// One query/parse/validate cycle, reported to observers.
#[derive(Debug)]
pub struct AttemptRecord<'a> {
    pub attempt: u32,
    pub raw: &'a str,
    pub fields: Option<&'a Fields>,
    pub error: Option<&'a str>,
}

/// Query `agent` until `validate` accepts or `max_attempts` are used.
///
/// Each retry sees the original view plus every earlier failure formatted as
/// `attempt k failed: <message>`.
pub fn attempt_action(
    agent: &mut dyn Agent,
    view: &ContextView,
    request: &ActionRequest,
    validate: &dyn Fn(&ContextView, &Fields) -> Result<(), String>,
    max_attempts: u32,
    sampler: Option<&dyn ActionSampler>,
) -> Result<ActionResult, BackendError> {
    attempt_action_observed(
        agent,
        view,
        request,
        validate,
        max_attempts,
        sampler,
        &mut |_| Ok(()),
    )
    .map_err(|e| match e {
        AttemptError::Backend(b) => b,
        AttemptError::Observer(_) => unreachable!("no-op observer never fails"),
    })
}

#[derive(Debug)]
pub enum AttemptError {
    Backend(BackendError),
    Observer(EngineError),
}

pub fn attempt_action_observed(
    agent: &mut dyn Agent,
    view: &ContextView,
    request: &ActionRequest,
    validate: &dyn Fn(&ContextView, &Fields) -> Result<(), String>,
    max_attempts: u32,
    sampler: Option<&dyn ActionSampler>,
    observer: &mut dyn FnMut(&AttemptRecord<'_>) -> Result<(), EngineError>,
) -> Result<ActionResult, AttemptError> {
    assert!(max_attempts >= 1, "max_attempts must be at least 1");
    let signature = PromptSignature::from_request(request, view);
    let parse_sig = signature.with_strategy(agent.strategy());
    let mut history: Vec<String> = Vec::new();

    for attempt in 1..=max_attempts {
        let mut current = view.clone();
        current.feedback.extend(history.iter().cloned());
        let raw = agent
            .respond(&Turn {
                view: &current,
                request,
                signature: &signature,
                sampler,
            })
            .map_err(AttemptError::Backend)?;
        let checked = parse_structured_output(&raw, &parse_sig)
            .map_err(|e| (None, e.to_string()))
            .and_then(|fields| match validate(&current, &fields) {
                Ok(()) => Ok(fields),
                Err(msg) => Err((Some(fields), msg)),
            });
        match checked {
            Ok(fields) => {
                observer(&AttemptRecord {
                    attempt,
                    raw: &raw,
                    fields: Some(&fields),
                    error: None,
                })
                .map_err(AttemptError::Observer)?;
                return Ok(ActionResult {
                    accepted: true,
                    attempts_used: attempt,
                    feedback_history: history,
                    parsed_fields: fields,
                });
            }
            Err((fields, msg)) => {
                observer(&AttemptRecord {
                    attempt,
                    raw: &raw,
                    fields: fields.as_ref(),
                    error: Some(&msg),
                })
                .map_err(AttemptError::Observer)?;
                history.push(format!("attempt {attempt} failed: {msg}"));
            }
        }
    }
    Ok(ActionResult {
        accepted: false,
        attempts_used: max_attempts,
        feedback_history: history,
        parsed_fields: Fields::new(),
    })
}

struct Recorder<'a> {
    match_id: String,
    game_id: GameId,
    seq: u64,
    sink: &'a mut dyn TraceSink,
    clock: &'a dyn Clock,
}

impl Recorder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn emit(
        &mut self,
        role: &str,
        kind: EventKind,
        action_name: &str,
        payload: serde_json::Value,
        rationale: &str,
        attempt: u32,
        error: &str,
    ) -> Result<(), TraceError> {
        let event = TraceEvent {
            match_id: self.match_id.clone(),
            seq: self.seq,
            game_id: self.game_id,
            role: role.to_string(),
            event_kind: kind,
            action_name: action_name.to_string(),
            payload,
            rationale: rationale.to_string(),
            attempt,
            valid: error.is_empty(),
            error: error.to_string(),
            clock_ms: self.clock.now_ms(),
        };
        self.sink.emit(&event)?;
        self.seq += 1;
        Ok(())
    }

    fn notes(&mut self, notes: Vec<ManagerNote>) -> Result<(), TraceError> {
        for note in notes {
            self.emit(
                MANAGER_ROLE,
                EventKind::VerificationStep,
                &note.step,
                note.payload,
                "",
                0,
                &note.error,
            )?;
        }
        Ok(())
    }
}

fn without_rationale(fields: &Fields) -> (serde_json::Value, String) {
    let rationale = fields.get(RATIONALE).cloned().unwrap_or_default();
    let rest: BTreeMap<_, _> = fields.iter().filter(|(k, _)| *k != RATIONALE).collect();
    (json!(rest), rationale)
}

/// Identifies one match for tracing.
#[derive(Debug, Clone)]
pub struct MatchSpec<'a> {
    pub match_id: &'a str,
    pub seed: u64,
    pub config: &'a MatchConfig,
}

/// Drive `game` to completion with agents built from `players`.
pub fn run_match(
    game: Box<dyn Game>,
    players: &BTreeMap<String, PlayerSpec>,
    spec: &MatchSpec<'_>,
    sink: &mut dyn TraceSink,
    clock: &dyn Clock,
) -> Result<MatchOutcome, EngineError> {
    let mut agents: BTreeMap<String, Box<dyn Agent>> = BTreeMap::new();
    let mut ids = BTreeMap::new();
    for role in game.declared_roles() {
        let player = players
            .get(&role)
            .ok_or_else(|| EngineError::MissingPlayer(role.clone()))?;
        agents.insert(role.clone(), build_agent(player, spec.seed, &role));
        ids.insert(role, player.id.clone());
    }
    run_match_with_agents(game, agents, ids, spec, sink, clock)
}

/// Like [`run_match`] but with caller-supplied agents (arbitrary strategies).
/// `player_ids` maps roles to the ids recorded in the verdict.
pub fn run_match_with_agents(
    mut game: Box<dyn Game>,
    mut agents: BTreeMap<String, Box<dyn Agent>>,
    player_ids: BTreeMap<String, String>,
    spec: &MatchSpec<'_>,
    sink: &mut dyn TraceSink,
    clock: &dyn Clock,
) -> Result<MatchOutcome, EngineError> {
    if spec.config.max_player_attempts == 0 {
        return Err(EngineError::ZeroAttempts);
    }
    for role in game.declared_roles() {
        if !agents.contains_key(&role) {
            return Err(EngineError::MissingPlayer(role));
        }
    }
    let game_id = game.game_id();
    let mut rec = Recorder {
        match_id: spec.match_id.to_string(),
        game_id,
        seq: 0,
        sink,
        clock,
    };

    let result = drive(&mut *game, &mut agents, spec.config, &mut rec);
    let moves = game.moves_played();
    let verdict_payload = |outcome: Option<&MatchOutcome>, abort: &str| {
        json!({
            "outcome": outcome,
            "aborted": !abort.is_empty(),
            "abort_reason": abort,
            "players": player_ids,
            "moves": moves,
        })
    };
    match result {
        Ok(outcome) => {
            debug_assert!(outcome.reason.valid_for(game_id), "{:?}", outcome);
            rec.emit(
                MANAGER_ROLE,
                EventKind::Verdict,
                "Verdict",
                verdict_payload(Some(&outcome), ""),
                "",
                0,
                "",
            )?;
            Ok(outcome)
        }
        Err(EngineError::Aborted(reason)) => {
            // the abort itself is the result; a failing sink cannot change that
            let _ = rec.emit(
                MANAGER_ROLE,
                EventKind::Verdict,
                "Verdict",
                verdict_payload(None, &reason),
                "",
                0,
                &reason,
            );
            Err(EngineError::Aborted(reason))
        }
        Err(e) => Err(e),
    }
}

fn drive(
    game: &mut dyn Game,
    agents: &mut BTreeMap<String, Box<dyn Agent>>,
    config: &MatchConfig,
    rec: &mut Recorder<'_>,
) -> Result<MatchOutcome, EngineError> {
    for _ in 0..MAX_REQUESTS_PER_MATCH {
        rec.notes(game.take_notes())?;
        if let Some(outcome) = game.outcome() {
            return Ok(outcome);
        }
        let request = game.next_request().ok_or_else(|| {
            EngineError::InvalidState("game has neither an outcome nor a request".into())
        })?;
        let view = game.view(&request.role);
        if request.verification {
            rec.emit(
                MANAGER_ROLE,
                EventKind::VerificationStep,
                &request.action_name,
                json!({"step": "self_solve", "solve_view": view}),
                "",
                0,
                "",
            )?;
        }
        let budget = request.max_attempts.unwrap_or(config.max_player_attempts);
        let agent = agents
            .get_mut(&request.role)
            .ok_or_else(|| EngineError::MissingPlayer(request.role.clone()))?;

        let result = {
            let game_ref: &dyn Game = game;
            let validate = |_: &ContextView, f: &Fields| game_ref.validate(&request, f);
            let mut observer = |r: &AttemptRecord<'_>| -> Result<(), EngineError> {
                let (payload, rationale) = match r.fields {
                    Some(f) => {
                        let (p, rationale) = without_rationale(f);
                        (json!({"fields": p}), rationale)
                    }
                    None => (json!({"raw": r.raw}), String::new()),
                };
                rec.emit(
                    &request.role,
                    EventKind::ActionAttempt,
                    &request.action_name,
                    payload,
                    &rationale,
                    r.attempt,
                    r.error.unwrap_or(""),
                )?;
                Ok(())
            };
            attempt_action_observed(
                agent.as_mut(),
                &view,
                &request,
                &validate,
                budget,
                Some(game_ref as &dyn ActionSampler),
                &mut observer,
            )
        };
        let result = match result {
            Ok(r) => r,
            Err(AttemptError::Backend(e)) => return Err(EngineError::Aborted(e.to_string())),
            Err(AttemptError::Observer(e)) => return Err(e),
        };

        let transition = if result.accepted {
            let (payload, rationale) = without_rationale(&result.parsed_fields);
            rec.emit(
                &request.role,
                EventKind::ActionAccepted,
                &request.action_name,
                json!({"fields": payload}),
                &rationale,
                result.attempts_used,
                "",
            )?;
            game.apply(&request, &result.parsed_fields)
        } else {
            game.on_exhausted(&request)
        };
        match transition {
            Transition::Continue => {}
            Transition::Finished(outcome) => {
                rec.notes(game.take_notes())?;
                return Ok(outcome);
            }
            Transition::Abort(reason) => {
                rec.notes(game.take_notes())?;
                return Err(EngineError::Aborted(reason));
            }
        }
    }
    Err(EngineError::Aborted(format!(
        "exceeded {MAX_REQUESTS_PER_MATCH} requests without a verdict"
    )))
}
