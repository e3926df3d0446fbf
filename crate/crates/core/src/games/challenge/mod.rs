//! Challenges whose generator must first solve its own challenge blind.
//!
//! The generator sees the target while writing the statement, then sees only
//! the statement while solving it. A statement is usable only if that blind
//! solution matches the target.

pub mod mathquiz;
pub mod pyjail;

use std::sync::OnceLock;

use rand::{Rng, RngCore};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{attempt_action, ActionRequest, ContextView, Fields};
use crate::players::Agent;

pub use mathquiz::{mathquiz_judge_answer, MathQuizGame, MathQuizHooks, MathQuizState};
pub use pyjail::{pyjail_attack_step, pyjail_check_flag, PyJailGame, PyJailHooks, PyJailState};

pub const TARGET_MIN: i64 = 1;
pub const TARGET_MAX: i64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    IntegerAnswer,
    FlagString,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationTarget {
    pub kind: TargetKind,
    pub value: String,
    pub sampled_from: String,
}

fn flag_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^ZSE\{[a-f0-9]{16}\}$").expect("valid flag regex"))
}

impl VerificationTarget {
    pub fn integer(value: i64) -> Self {
        VerificationTarget {
            kind: TargetKind::IntegerAnswer,
            value: value.to_string(),
            sampled_from: format!("uniform integer in [{TARGET_MIN}, {TARGET_MAX}]"),
        }
    }

    pub fn flag(value: impl Into<String>) -> Self {
        VerificationTarget {
            kind: TargetKind::FlagString,
            value: value.into(),
            sampled_from: "16 uniform hex digits".into(),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            TargetKind::IntegerAnswer => self
                .value
                .parse::<i64>()
                .is_ok_and(|v| (TARGET_MIN..=TARGET_MAX).contains(&v)),
            TargetKind::FlagString => flag_regex().is_match(&self.value),
        }
    }
}

pub fn sample_target(rng: &mut dyn RngCore, kind: TargetKind) -> VerificationTarget {
    match kind {
        TargetKind::IntegerAnswer => VerificationTarget::integer(rng.gen_range(TARGET_MIN..=TARGET_MAX)),
        TargetKind::FlagString => {
            let hex: String = (0..16)
                .map(|_| char::from_digit(rng.gen_range(0..16), 16).expect("hex digit"))
                .collect();
            VerificationTarget::flag(format!("ZSE{{{hex}}}"))
        }
    }
}

/// Integers standing alone in `text`, thousands separators removed.
/// Digits glued to letters or underscores are not tokens.
pub fn integer_tokens(text: &str) -> Vec<i64> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"-?\d{1,3}(?:,\d{3})+|-?\d+").expect("valid integer regex"));
    let bytes = text.as_bytes();
    let glued = |b: u8| b.is_ascii_alphanumeric() || b == b'_';
    re.find_iter(text)
        .filter(|m| {
            let before = m.start().checked_sub(1).map(|i| bytes[i]);
            let after = bytes.get(m.end()).copied();
            let fractional = after == Some(b'.') && bytes.get(m.end() + 1).is_some_and(u8::is_ascii_digit);
            let decimal_tail = before == Some(b'.') && m.start() >= 2 && bytes[m.start() - 2].is_ascii_digit();
            !before.is_some_and(glued) && !after.is_some_and(glued) && !fractional && !decimal_tail
        })
        .filter_map(|m| m.as_str().replace(',', "").parse().ok())
        .collect()
}

/// The verbatim-leak screen: the target as a standalone integer token, or
/// the flag as a substring.
pub fn statement_leaks_target(statement: &str, target: &VerificationTarget) -> bool {
    match target.kind {
        TargetKind::IntegerAnswer => match target.value.parse::<i64>() {
            Ok(v) => integer_tokens(statement).contains(&v),
            Err(_) => statement.contains(&target.value),
        },
        TargetKind::FlagString => statement.contains(&target.value),
    }
}

/// Whether serialized `text` shows the target, by the same token rule.
pub fn text_exposes_target(text: &str, target: &VerificationTarget) -> bool {
    statement_leaks_target(text, target)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiedChallenge {
    pub statement: String,
    pub generator_solution: String,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerificationFailure {
    #[error("target leaked in statement")]
    Leaked { statement: String },
    #[error("generator produced no valid statement")]
    GenerateExhausted,
    #[error("generator produced no well-formed solution")]
    SolveExhausted { statement: String },
    #[error("generator solution '{solution}' does not match the target")]
    Mismatch { statement: String, solution: String },
    #[error("challenge setup failed: {0}")]
    Setup(String),
    #[error("player backend failed: {0}")]
    Backend(String),
}

/// Game-specific pieces of the verification protocol.
pub trait ChallengeHooks {
    fn generate_request(&self) -> ActionRequest;
    /// The generator's view while writing; contains the target.
    fn generate_view(&self, target: &VerificationTarget) -> ContextView;
    fn statement_of(&self, fields: &Fields) -> Result<String, String>;
    fn solve_request(&self) -> ActionRequest;
    /// The generator's view while solving; must not contain the target.
    fn solve_view(&self, statement: &str) -> ContextView;
    /// Format check only; a well-formed wrong solution passes.
    fn extract_solution(&self, fields: &Fields) -> Result<String, String>;
    /// Deterministic preparation after the statement passes screening.
    fn prepare(&mut self, _statement: &str, _target: &VerificationTarget) -> Result<(), String> {
        Ok(())
    }
    fn solution_matches(&mut self, solution: &str, target: &VerificationTarget) -> bool;
}

/// Generate, screen, blind-solve and compare, outside of any match.
pub fn run_verification(
    generator: &mut dyn Agent,
    target: &VerificationTarget,
    hooks: &mut dyn ChallengeHooks,
    max_attempts: u32,
) -> Result<VerifiedChallenge, VerificationFailure> {
    let backend = |e: crate::players::BackendError| VerificationFailure::Backend(e.to_string());

    let gen_req = hooks.generate_request();
    let gen_view = hooks.generate_view(target);
    let generated = {
        let h: &dyn ChallengeHooks = hooks;
        let validate = |_: &ContextView, f: &Fields| h.statement_of(f).map(|_| ());
        attempt_action(generator, &gen_view, &gen_req, &validate, max_attempts, None).map_err(backend)?
    };
    if !generated.accepted {
        return Err(VerificationFailure::GenerateExhausted);
    }
    let statement = hooks
        .statement_of(&generated.parsed_fields)
        .expect("accepted statement validates");
    if statement_leaks_target(&statement, target) {
        return Err(VerificationFailure::Leaked { statement });
    }
    hooks
        .prepare(&statement, target)
        .map_err(VerificationFailure::Setup)?;

    let solve_req = hooks.solve_request();
    let solve_view = hooks.solve_view(&statement);
    debug_assert!(!text_exposes_target(
        &serde_json::to_string(&solve_view).unwrap_or_default(),
        target
    ));
    let solved = {
        let h: &dyn ChallengeHooks = hooks;
        let validate = |_: &ContextView, f: &Fields| h.extract_solution(f).map(|_| ());
        attempt_action(generator, &solve_view, &solve_req, &validate, max_attempts, None).map_err(backend)?
    };
    if !solved.accepted {
        return Err(VerificationFailure::SolveExhausted { statement });
    }
    let solution = hooks
        .extract_solution(&solved.parsed_fields)
        .expect("accepted solution validates");
    if !hooks.solution_matches(&solution, target) {
        return Err(VerificationFailure::Mismatch { statement, solution });
    }
    Ok(VerifiedChallenge {
        statement,
        generator_solution: solution,
        verified: true,
    })
}
