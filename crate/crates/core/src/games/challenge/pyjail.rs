//! Defender writes a Python jail around a flag; attacker tries to break out.
//!
//! Defender code must define `jail(submission)`. The flag is installed as
//! the global `flag` ahead of the defender's code, and each submission runs
//! as `jail(<submission as a string literal>)`.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{sample_target, statement_leaks_target, ChallengeHooks, TargetKind, VerificationTarget, VerifiedChallenge};
use crate::engine::{
    ActionRequest, ActionSampler, ContextView, Fields, Game, GameId, GameState, ManagerNote,
    MatchOutcome, OutputField, Reason, Transition,
};
use crate::sandbox::{ExecResponse, SandboxExecutor};

pub const DEFAULT_ATTACK_TURNS: u32 = 5;
pub const DEFAULT_EXEC_TIMEOUT_MS: u64 = 2000;
/// Output shown back to players is cut to this many characters.
const FEEDBACK_CHARS: usize = 2000;

pub fn pyjail_check_flag(output: &str, flag: &VerificationTarget) -> bool {
    !flag.value.is_empty() && output.contains(&flag.value)
}

/// Setup code with the flag installed ahead of the defender's code.
pub fn setup_code(sandbox_code: &str, flag: &VerificationTarget) -> String {
    let literal = serde_json::to_string(&flag.value).expect("string serializes");
    format!("flag = {literal}\n{sandbox_code}")
}

/// Exec code that passes `submission` to the defender's jail.
pub fn submission_code(submission: &str) -> String {
    let literal = serde_json::to_string(submission).expect("string serializes");
    format!("jail({literal})")
}

fn truncate_chars(s: &str, n: usize) -> String {
    match s.char_indices().nth(n) {
        Some((i, _)) => format!("{}... [truncated]", &s[..i]),
        None => s.to_string(),
    }
}

/// Feedback text for one execution, or the failure that prevented it.
pub fn describe_execution(result: &Result<ExecResponse, String>) -> String {
    match result {
        Ok(r) if r.ok => format!(
            "exit status {}\nstdout:\n{}\nstderr:\n{}",
            r.exit.map_or("none".to_string(), |c| c.to_string()),
            truncate_chars(&r.stdout, FEEDBACK_CHARS),
            truncate_chars(&r.stderr, FEEDBACK_CHARS),
        ),
        Ok(r) => format!(
            "execution failed: {}\nstdout:\n{}\nstderr:\n{}",
            r.failure().unwrap_or_default(),
            truncate_chars(&r.stdout, FEEDBACK_CHARS),
            truncate_chars(&r.stderr, FEEDBACK_CHARS),
        ),
        Err(e) => format!("execution failed: {e}"),
    }
}

/// Run one submission; captured output and the flag decision.
fn run_submission(
    executor: &mut dyn SandboxExecutor,
    submission: &str,
    timeout_ms: u64,
    flag: &VerificationTarget,
) -> (Result<ExecResponse, String>, bool) {
    let result = executor
        .exec(&submission_code(submission), timeout_ms)
        .map_err(|e| e.to_string());
    let captured = match &result {
        Ok(r) => pyjail_check_flag(&r.combined_output(), flag),
        Err(_) => false,
    };
    (result, captured)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JailPhase {
    Generate,
    SelfSolve,
    Attack,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub submission: String,
    pub feedback: String,
    pub captured: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PyJailState {
    pub flag: VerificationTarget,
    pub sandbox_code: String,
    pub phase: JailPhase,
    pub attacker_turns_left: u32,
    pub challenge: Option<VerifiedChallenge>,
    pub attacks: Vec<AttackRecord>,
    pub exec_timeout_ms: u64,
    #[serde(default)]
    pub moves: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JailStep {
    Continue(PyJailState),
    Finished {
        state: PyJailState,
        outcome: MatchOutcome,
    },
}

/// Execute one attack turn and decide capture, continuation or defence.
pub fn pyjail_attack_step(
    state: &PyJailState,
    submission: &str,
    executor: &mut dyn SandboxExecutor,
) -> JailStep {
    debug_assert!(state.phase == JailPhase::Attack && state.attacker_turns_left > 0);
    let mut s = state.clone();
    let (result, captured) = run_submission(executor, submission, s.exec_timeout_ms, &s.flag);
    s.attacks.push(AttackRecord {
        submission: submission.to_string(),
        feedback: describe_execution(&result),
        captured,
    });
    s.attacker_turns_left = s.attacker_turns_left.saturating_sub(1);
    if captured {
        s.phase = JailPhase::Finished;
        let outcome = MatchOutcome::win(GameId::Pyjail, "attacker", Reason::FlagCaptured);
        return JailStep::Finished { state: s, outcome };
    }
    if s.attacker_turns_left == 0 {
        s.phase = JailPhase::Finished;
        let outcome = MatchOutcome::win(GameId::Pyjail, "defender", Reason::FlagDefended);
        return JailStep::Finished { state: s, outcome };
    }
    JailStep::Continue(s)
}

/// Verification hooks bound to one executor session.
pub struct PyJailHooks<'a> {
    pub executor: &'a mut dyn SandboxExecutor,
    pub timeout_ms: u64,
}

fn code_request(role: &str, action: &str, field: &str, desc: &str, instructions: &str) -> ActionRequest {
    ActionRequest::new(role, action, vec![OutputField::new(field, desc)], instructions)
}

fn generate_request() -> ActionRequest {
    code_request(
        "defender",
        "GenerateSandbox",
        "Sandbox Code",
        "Python source defining jail(submission)",
        "Write Python code defining jail(submission) that executes untrusted submissions \
         while keeping the global variable `flag` secret. You will have to break your own \
         jail to prove it is solvable.",
    )
}

fn solve_request() -> ActionRequest {
    let mut req = code_request(
        "defender",
        "SolveSandbox",
        "Exploit",
        "a submission string that makes jail print the flag",
        "Break this Python jail: produce a submission that makes it print the hidden flag.",
    );
    req.verification = true;
    req
}

fn non_empty(fields: &Fields, name: &str) -> Result<String, String> {
    match fields.get(name) {
        Some(v) if !v.trim().is_empty() => Ok(strip_code_fence(v)),
        _ => Err(format!("{} must not be empty", name.to_lowercase())),
    }
}

/// Drop a surrounding markdown code fence, keeping the code inside.
fn strip_code_fence(text: &str) -> String {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let body = rest.split_once('\n').map_or("", |(_, b)| b);
        return body.trim_end().trim_end_matches("```").trim_end().to_string();
    }
    t.to_string()
}

fn generate_view(flag: &VerificationTarget) -> ContextView {
    ContextView::new(GameId::Pyjail, "defender")
        .with("Role", "defender")
        .with("Flag", flag.value.clone())
}

fn code_view(role: &str, code: &str) -> ContextView {
    ContextView::new(GameId::Pyjail, role)
        .with("Role", role)
        .with("Sandbox Code", code)
}

impl ChallengeHooks for PyJailHooks<'_> {
    fn generate_request(&self) -> ActionRequest {
        generate_request()
    }

    fn generate_view(&self, target: &VerificationTarget) -> ContextView {
        generate_view(target)
    }

    fn statement_of(&self, fields: &Fields) -> Result<String, String> {
        non_empty(fields, "Sandbox Code")
    }

    fn solve_request(&self) -> ActionRequest {
        solve_request()
    }

    fn solve_view(&self, statement: &str) -> ContextView {
        code_view("defender", statement)
    }

    fn extract_solution(&self, fields: &Fields) -> Result<String, String> {
        non_empty(fields, "Exploit")
    }

    fn prepare(&mut self, statement: &str, target: &VerificationTarget) -> Result<(), String> {
        let r = self
            .executor
            .setup(&setup_code(statement, target))
            .map_err(|e| e.to_string())?;
        match r.failure() {
            None => Ok(()),
            Some(f) => Err(format!("sandbox setup failed: {f}")),
        }
    }

    fn solution_matches(&mut self, solution: &str, target: &VerificationTarget) -> bool {
        run_submission(self.executor, solution, self.timeout_ms, target).1
    }
}

#[derive(Serialize, Deserialize)]
pub struct PyJailGame {
    pub state: PyJailState,
    pub outcome: Option<MatchOutcome>,
    #[serde(skip)]
    executor: Option<Box<dyn SandboxExecutor>>,
    #[serde(skip)]
    notes: Vec<ManagerNote>,
}

impl std::fmt::Debug for PyJailGame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PyJailGame")
            .field("state", &self.state)
            .field("outcome", &self.outcome)
            .field("has_executor", &self.executor.is_some())
            .finish()
    }
}

impl PyJailGame {
    pub fn new(
        rng: &mut dyn RngCore,
        executor: Box<dyn SandboxExecutor>,
        attack_turns: u32,
        exec_timeout_ms: u64,
    ) -> Self {
        Self::with_flag(sample_target(rng, TargetKind::FlagString), executor, attack_turns, exec_timeout_ms)
    }

    pub fn with_flag(
        flag: VerificationTarget,
        executor: Box<dyn SandboxExecutor>,
        attack_turns: u32,
        exec_timeout_ms: u64,
    ) -> Self {
        PyJailGame {
            state: PyJailState {
                flag,
                sandbox_code: String::new(),
                phase: JailPhase::Generate,
                attacker_turns_left: attack_turns.max(1),
                challenge: None,
                attacks: Vec::new(),
                exec_timeout_ms,
                moves: 0,
            },
            outcome: None,
            executor: Some(executor),
            notes: Vec::new(),
        }
    }

    /// A detached copy for inspection; it cannot execute code.
    pub fn from_state(state: PyJailState, outcome: Option<MatchOutcome>) -> Self {
        PyJailGame {
            state,
            outcome,
            executor: None,
            notes: Vec::new(),
        }
    }

    fn finish(&mut self, winner: &str, reason: Reason, detail: &str) -> Transition {
        let o = MatchOutcome::win(GameId::Pyjail, winner, reason).with_detail(detail);
        self.state.phase = JailPhase::Finished;
        self.outcome = Some(o.clone());
        Transition::Finished(o)
    }

    fn setup(&mut self) -> Result<(), String> {
        let code = setup_code(&self.state.sandbox_code, &self.state.flag);
        let executor = self.executor.as_mut().ok_or("no sandbox executor attached")?;
        let r = executor.setup(&code).map_err(|e| e.to_string())?;
        match r.failure() {
            None => Ok(()),
            Some(f) => Err(format!("{f}\n{}", truncate_chars(&r.stderr, FEEDBACK_CHARS))),
        }
    }

    fn apply_generate(&mut self, code: String) -> Transition {
        self.state.sandbox_code = code;
        if statement_leaks_target(&self.state.sandbox_code, &self.state.flag) {
            self.notes.push(ManagerNote::failed(
                "leak_screen",
                json!({"leaked": true}),
                "target leaked in statement",
            ));
            return self.finish("attacker", Reason::InvalidChallengeForfeit, "target_leaked");
        }
        self.notes.push(ManagerNote::new("leak_screen", json!({"leaked": false})));
        if self.executor.is_none() {
            return Transition::Abort("no sandbox executor attached".into());
        }
        match self.setup() {
            Ok(()) => {
                self.notes.push(ManagerNote::new("sandbox_setup", json!({"ok": true})));
                self.state.phase = JailPhase::SelfSolve;
                Transition::Continue
            }
            Err(e) => {
                self.notes.push(ManagerNote::failed("sandbox_setup", json!({"ok": false}), e));
                self.finish("attacker", Reason::InvalidChallengeForfeit, "sandbox_setup_failed")
            }
        }
    }

    fn apply_self_solve(&mut self, exploit: String) -> Transition {
        let Some(executor) = self.executor.as_mut() else {
            return Transition::Abort("no sandbox executor attached".into());
        };
        let (result, captured) =
            run_submission(executor.as_mut(), &exploit, self.state.exec_timeout_ms, &self.state.flag);
        let payload = json!({
            "solution": exploit,
            "output": describe_execution(&result),
            "verified": captured,
        });
        self.state.challenge = Some(VerifiedChallenge {
            statement: self.state.sandbox_code.clone(),
            generator_solution: exploit,
            verified: captured,
        });
        if !captured {
            self.notes.push(ManagerNote::failed("compare", payload, "generator exploit did not reveal the flag"));
            return self.finish("attacker", Reason::InvalidChallengeForfeit, "verification_failed");
        }
        self.notes.push(ManagerNote::new("compare", payload));
        // the attacker gets a jail untouched by the defender's own exploit
        if let Err(e) = self.setup() {
            return Transition::Abort(format!("sandbox reset failed: {e}"));
        }
        self.state.phase = JailPhase::Attack;
        Transition::Continue
    }
}

impl ActionSampler for PyJailGame {
    fn sample_action(&self, request: &ActionRequest, _rng: &mut dyn RngCore) -> Option<Fields> {
        // random play: an open jail and the obvious exploit
        let text = match self.state.phase {
            JailPhase::Generate => "def jail(submission):\n    exec(submission)\n",
            JailPhase::SelfSolve | JailPhase::Attack => "print(flag)",
            JailPhase::Finished => return None,
        };
        Some(Fields::from([(request.primary_field().to_string(), text.to_string())]))
    }
}

impl Game for PyJailGame {
    fn game_id(&self) -> GameId {
        GameId::Pyjail
    }

    fn snapshot(&self) -> GameState {
        let phase = serde_json::to_value(self.state.phase)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        GameState {
            game_id: GameId::Pyjail,
            phase,
            turn_role: self.next_request().map(|r| r.role).unwrap_or_default(),
            payload: serde_json::to_value(self).expect("pyjail state serializes"),
            terminal: self.outcome.clone(),
        }
    }

    fn outcome(&self) -> Option<MatchOutcome> {
        self.outcome.clone()
    }

    fn next_request(&self) -> Option<ActionRequest> {
        match self.state.phase {
            JailPhase::Generate => Some(generate_request()),
            JailPhase::SelfSolve => Some(solve_request()),
            JailPhase::Attack => Some(code_request(
                "attacker",
                "AttackSandbox",
                "Exploit",
                "a submission string passed to jail()",
                "Break this Python jail: make it print the hidden flag.",
            )),
            JailPhase::Finished => None,
        }
    }

    fn view(&self, role: &str) -> ContextView {
        let s = &self.state;
        match (role, s.phase) {
            ("defender", JailPhase::Generate) => generate_view(&s.flag),
            ("defender", _) => code_view(role, &s.sandbox_code),
            _ => {
                let history: Vec<String> = s
                    .attacks
                    .iter()
                    .enumerate()
                    .map(|(i, a)| format!("attempt {}:\n{}\n-> {}", i + 1, a.submission, a.feedback))
                    .collect();
                code_view(role, &s.sandbox_code)
                    .with("Turns Left", s.attacker_turns_left.to_string())
                    .with("Previous Attempts", history.join("\n\n"))
            }
        }
    }

    fn validate(&self, _request: &ActionRequest, fields: &Fields) -> Result<(), String> {
        match self.state.phase {
            JailPhase::Generate => non_empty(fields, "Sandbox Code").map(|_| ()),
            JailPhase::SelfSolve | JailPhase::Attack => non_empty(fields, "Exploit").map(|_| ()),
            JailPhase::Finished => Err("the game is over".into()),
        }
    }

    fn apply(&mut self, _request: &ActionRequest, fields: &Fields) -> Transition {
        self.state.moves += 1;
        match self.state.phase {
            JailPhase::Generate => self.apply_generate(non_empty(fields, "Sandbox Code").unwrap_or_default()),
            JailPhase::SelfSolve => self.apply_self_solve(non_empty(fields, "Exploit").unwrap_or_default()),
            JailPhase::Attack => {
                let submission = non_empty(fields, "Exploit").unwrap_or_default();
                let Some(executor) = self.executor.as_mut() else {
                    return Transition::Abort("no sandbox executor attached".into());
                };
                match pyjail_attack_step(&self.state, &submission, executor.as_mut()) {
                    JailStep::Continue(s) => {
                        self.state = s;
                        Transition::Continue
                    }
                    JailStep::Finished { state, outcome } => {
                        self.state = state;
                        self.outcome = Some(outcome.clone());
                        Transition::Finished(outcome)
                    }
                }
            }
            JailPhase::Finished => Transition::Abort("action after the game ended".into()),
        }
    }

    fn on_exhausted(&mut self, request: &ActionRequest) -> Transition {
        match self.state.phase {
            JailPhase::Generate => self.finish("attacker", Reason::InvalidChallengeForfeit, "no_valid_sandbox"),
            JailPhase::SelfSolve => self.finish("attacker", Reason::InvalidChallengeForfeit, "verification_failed"),
            _ => {
                let o = crate::engine::forfeit(GameId::Pyjail, &request.role, Reason::InvalidMoveForfeit);
                self.state.phase = JailPhase::Finished;
                self.outcome = Some(o.clone());
                Transition::Finished(o)
            }
        }
    }

    fn take_notes(&mut self) -> Vec<ManagerNote> {
        std::mem::take(&mut self.notes)
    }

    fn moves_played(&self) -> usize {
        self.state.moves
    }
}
