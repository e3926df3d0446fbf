//! Teacher writes a question for a secret integer answer; student answers it.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    integer_tokens, sample_target, statement_leaks_target, ChallengeHooks, TargetKind,
    VerificationTarget, VerifiedChallenge, TARGET_MAX, TARGET_MIN,
};
use crate::engine::{
    ActionRequest, ActionSampler, ContextView, Fields, Game, GameId, GameState, ManagerNote,
    MatchOutcome, OutputField, Reason, Transition,
};
use crate::games::gandalf::wordlist;

pub const NO_INTEGER: &str = "no final integer answer found";
pub const INCORRECT: &str = "incorrect";

/// Last standalone integer in the text.
pub fn extract_final_integer(text: &str) -> Option<i64> {
    integer_tokens(text).last().copied()
}

pub fn mathquiz_judge_answer(answer_text: &str, target: &VerificationTarget) -> bool {
    match (extract_final_integer(answer_text), target.value.parse::<i64>()) {
        (Some(a), Ok(t)) => a == t,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MathQuizHooks;

impl ChallengeHooks for MathQuizHooks {
    fn generate_request(&self) -> ActionRequest {
        ActionRequest::new(
            "teacher",
            "GenerateQuestion",
            vec![OutputField::new(
                "Question",
                "a challenging math question whose answer is the target integer",
            )],
            "Write a challenging math question whose answer is exactly the target answer. \
             Do not state the answer in the question.",
        )
    }

    fn generate_view(&self, target: &VerificationTarget) -> ContextView {
        ContextView::new(GameId::Mathquiz, "teacher")
            .with("Role", "teacher")
            .with("Target Answer", target.value.clone())
    }

    fn statement_of(&self, fields: &Fields) -> Result<String, String> {
        match fields.get("Question").map(|q| q.trim()) {
            Some(q) if !q.is_empty() => Ok(q.to_string()),
            _ => Err("question must not be empty".into()),
        }
    }

    fn solve_request(&self) -> ActionRequest {
        let mut req = ActionRequest::new(
            "teacher",
            "SolveQuestion",
            vec![OutputField::new("Answer", "the final integer answer")],
            "Solve the math question. End with the final integer answer.",
        );
        req.verification = true;
        req
    }

    fn solve_view(&self, statement: &str) -> ContextView {
        ContextView::new(GameId::Mathquiz, "teacher")
            .with("Role", "teacher")
            .with("Question", statement)
    }

    fn extract_solution(&self, fields: &Fields) -> Result<String, String> {
        fields
            .get("Answer")
            .and_then(|a| extract_final_integer(a))
            .map(|v| v.to_string())
            .ok_or_else(|| NO_INTEGER.to_string())
    }

    fn solution_matches(&mut self, solution: &str, target: &VerificationTarget) -> bool {
        mathquiz_judge_answer(solution, target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MathPhase {
    Generate,
    SelfSolve,
    StudentAnswer,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MathQuizState {
    pub target: VerificationTarget,
    pub statement: Option<String>,
    pub challenge: Option<VerifiedChallenge>,
    pub phase: MathPhase,
    /// Accepted actions so far.
    #[serde(default)]
    pub moves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MathQuizGame {
    pub state: MathQuizState,
    pub outcome: Option<MatchOutcome>,
    #[serde(skip)]
    notes: Vec<ManagerNote>,
}

impl MathQuizGame {
    pub fn new(rng: &mut dyn RngCore) -> Self {
        Self::with_target(sample_target(rng, TargetKind::IntegerAnswer))
    }

    pub fn with_target(target: VerificationTarget) -> Self {
        MathQuizGame {
            state: MathQuizState {
                target,
                statement: None,
                challenge: None,
                phase: MathPhase::Generate,
                moves: 0,
            },
            outcome: None,
            notes: Vec::new(),
        }
    }

    fn finish(&mut self, winner: &str, reason: Reason, detail: &str) -> Transition {
        let o = MatchOutcome::win(GameId::Mathquiz, winner, reason).with_detail(detail);
        self.state.phase = MathPhase::Finished;
        self.outcome = Some(o.clone());
        Transition::Finished(o)
    }

    fn statement(&self) -> &str {
        self.state.statement.as_deref().unwrap_or("")
    }
}

impl ActionSampler for MathQuizGame {
    fn sample_action(&self, request: &ActionRequest, rng: &mut dyn RngCore) -> Option<Fields> {
        let field = request.primary_field().to_string();
        let text = match self.state.phase {
            MathPhase::Generate => {
                let words = wordlist();
                let w: Vec<&str> = (0..3).map(|_| words[rng.gen_range(0..words.len())]).collect();
                format!("Which number is described by the riddle of the {}?", w.join(" "))
            }
            MathPhase::SelfSolve | MathPhase::StudentAnswer => {
                rng.gen_range(TARGET_MIN..=TARGET_MAX).to_string()
            }
            MathPhase::Finished => return None,
        };
        Some(Fields::from([(field, text)]))
    }
}

impl Game for MathQuizGame {
    fn game_id(&self) -> GameId {
        GameId::Mathquiz
    }

    fn snapshot(&self) -> GameState {
        let phase = serde_json::to_value(self.state.phase)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        GameState {
            game_id: GameId::Mathquiz,
            phase,
            turn_role: self.next_request().map(|r| r.role).unwrap_or_default(),
            payload: serde_json::to_value(self).expect("mathquiz state serializes"),
            terminal: self.outcome.clone(),
        }
    }

    fn outcome(&self) -> Option<MatchOutcome> {
        self.outcome.clone()
    }

    fn next_request(&self) -> Option<ActionRequest> {
        let hooks = MathQuizHooks;
        match self.state.phase {
            MathPhase::Generate => Some(hooks.generate_request()),
            MathPhase::SelfSolve => Some(hooks.solve_request()),
            MathPhase::StudentAnswer => Some(ActionRequest::new(
                "student",
                "AnswerQuestion",
                vec![OutputField::new("Answer", "the final integer answer")],
                "Solve the math question. End with the final integer answer.",
            )),
            MathPhase::Finished => None,
        }
    }

    fn view(&self, role: &str) -> ContextView {
        let hooks = MathQuizHooks;
        match (role, self.state.phase) {
            ("teacher", MathPhase::Generate) => hooks.generate_view(&self.state.target),
            ("teacher", _) => hooks.solve_view(self.statement()),
            _ => ContextView::new(GameId::Mathquiz, role)
                .with("Role", role)
                .with("Question", self.statement()),
        }
    }

    fn validate(&self, _request: &ActionRequest, fields: &Fields) -> Result<(), String> {
        let hooks = MathQuizHooks;
        match self.state.phase {
            MathPhase::Generate => hooks.statement_of(fields).map(|_| ()),
            MathPhase::SelfSolve => hooks.extract_solution(fields).map(|_| ()),
            MathPhase::StudentAnswer => {
                let answer = hooks.extract_solution(fields)?;
                if mathquiz_judge_answer(&answer, &self.state.target) {
                    Ok(())
                } else {
                    Err(INCORRECT.into())
                }
            }
            MathPhase::Finished => Err("the game is over".into()),
        }
    }

    fn apply(&mut self, _request: &ActionRequest, fields: &Fields) -> Transition {
        let mut hooks = MathQuizHooks;
        self.state.moves += 1;
        match self.state.phase {
            MathPhase::Generate => {
                let statement = hooks.statement_of(fields).unwrap_or_default();
                let leaked = statement_leaks_target(&statement, &self.state.target);
                self.state.statement = Some(statement);
                if leaked {
                    self.notes.push(ManagerNote::failed(
                        "leak_screen",
                        json!({"leaked": true}),
                        "target leaked in statement",
                    ));
                    return self.finish("student", Reason::InvalidChallengeForfeit, "target_leaked");
                }
                self.notes.push(ManagerNote::new("leak_screen", json!({"leaked": false})));
                self.state.phase = MathPhase::SelfSolve;
                Transition::Continue
            }
            MathPhase::SelfSolve => {
                let solution = hooks.extract_solution(fields).unwrap_or_default();
                let verified = hooks.solution_matches(&solution, &self.state.target);
                let payload = json!({
                    "solution": solution,
                    "target": self.state.target.value,
                    "verified": verified,
                });
                self.state.challenge = Some(VerifiedChallenge {
                    statement: self.statement().to_string(),
                    generator_solution: solution,
                    verified,
                });
                if !verified {
                    self.notes.push(ManagerNote::failed("compare", payload, "generator solution does not match the target"));
                    return self.finish("student", Reason::InvalidChallengeForfeit, "verification_failed");
                }
                self.notes.push(ManagerNote::new("compare", payload));
                self.state.phase = MathPhase::StudentAnswer;
                Transition::Continue
            }
            MathPhase::StudentAnswer => self.finish("student", Reason::CorrectAnswer, ""),
            MathPhase::Finished => Transition::Abort("action after the game ended".into()),
        }
    }

    fn on_exhausted(&mut self, _request: &ActionRequest) -> Transition {
        match self.state.phase {
            MathPhase::Generate => self.finish("student", Reason::InvalidChallengeForfeit, "no_valid_question"),
            MathPhase::SelfSolve => {
                self.notes.push(ManagerNote::failed(
                    "compare",
                    json!({"solution": null, "target": self.state.target.value, "verified": false}),
                    "generator produced no well-formed solution",
                ));
                self.finish("student", Reason::InvalidChallengeForfeit, "verification_failed")
            }
            MathPhase::StudentAnswer => self.finish("teacher", Reason::WrongAnswer, ""),
            MathPhase::Finished => Transition::Abort("action after the game ended".into()),
        }
    }

    fn take_notes(&mut self) -> Vec<ManagerNote> {
        std::mem::take(&mut self.notes)
    }

    fn moves_played(&self) -> usize {
        self.state.moves
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields(name: &str, v: &str) -> Fields {
        Fields::from([(name.to_string(), v.to_string())])
    }

    #[test]
    fn judging_extracts_the_last_integer() {
        let t = VerificationTarget::integer(439);
        assert!(mathquiz_judge_answer("439", &t));
        assert!(mathquiz_judge_answer("The answer is 439.", &t));
        assert!(mathquiz_judge_answer("first 12, then 439", &t));
        assert!(!mathquiz_judge_answer("440", &t));
        assert!(!mathquiz_judge_answer("no idea", &t));
    }

    #[test]
    fn verified_path_then_student_wins() {
        let mut g = MathQuizGame::with_target(VerificationTarget::integer(439));
        let q = "smallest prime > 400 that is 1 mod 6 and 5 mod 7";
        let req = g.next_request().unwrap();
        assert!(g.validate(&req, &fields("Question", q)).is_ok());
        assert_eq!(g.apply(&req, &fields("Question", q)), Transition::Continue);
        let req = g.next_request().unwrap();
        assert!(req.verification);
        let solve_view = serde_json::to_string(&g.view("teacher")).unwrap();
        assert!(!solve_view.contains("439"));
        assert_eq!(g.apply(&req, &fields("Answer", "439")), Transition::Continue);
        assert!(g.state.challenge.as_ref().unwrap().verified);
        let req = g.next_request().unwrap();
        assert_eq!(req.role, "student");
        assert_eq!(g.validate(&req, &fields("Answer", "440")), Err(INCORRECT.into()));
        assert_eq!(g.validate(&req, &fields("Answer", "dunno")), Err(NO_INTEGER.into()));
        match g.apply(&req, &fields("Answer", "439")) {
            Transition::Finished(o) => assert_eq!(o.reason, Reason::CorrectAnswer),
            t => panic!("{t:?}"),
        }
    }

    #[test]
    fn mismatch_forfeits_to_student() {
        let mut g = MathQuizGame::with_target(VerificationTarget::integer(439));
        let req = g.next_request().unwrap();
        g.apply(&req, &fields("Question", "a hard question"));
        let req = g.next_request().unwrap();
        match g.apply(&req, &fields("Answer", "441")) {
            Transition::Finished(o) => {
                assert_eq!(o.winner.as_role(), Some("student"));
                assert_eq!(o.reason, Reason::InvalidChallengeForfeit);
            }
            t => panic!("{t:?}"),
        }
    }

    #[test]
    fn leaked_statement_forfeits() {
        let mut g = MathQuizGame::with_target(VerificationTarget::integer(439));
        let req = g.next_request().unwrap();
        assert!(matches!(
            g.apply(&req, &fields("Question", "What is 439?")),
            Transition::Finished(_)
        ));
        let notes = g.take_notes();
        assert_eq!(notes[0].error, "target leaked in statement");
    }

    #[test]
    fn student_exhaustion_favours_teacher() {
        let mut g = MathQuizGame::with_target(VerificationTarget::integer(5));
        g.state.phase = MathPhase::StudentAnswer;
        let req = g.next_request().unwrap();
        match g.on_exhausted(&req) {
            Transition::Finished(o) => {
                assert_eq!(o.winner.as_role(), Some("teacher"));
                assert_eq!(o.reason, Reason::WrongAnswer);
            }
            t => panic!("{t:?}"),
        }
    }
}
