//! Judged debate: two debaters argue a stance, a jury scores both sides.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    attempt_action, ActionRequest, ActionSampler, ContextView, Fields, Game, GameId, GameState,
    MatchOutcome, OutputField, Reason, Transition,
};
use crate::players::{build_agent, PlayerSpec};

const STANCES_TEXT: &str = include_str!("../../data/stances.txt");
pub const DEFAULT_REBUTTAL_ROUNDS: u32 = 2;
pub const JUDGE_ATTEMPTS: u32 = 2;
pub const JUDGE_PREFIX: &str = "judge:";

pub fn stances() -> &'static [&'static str] {
    static STANCES: OnceLock<Vec<&'static str>> = OnceLock::new();
    STANCES.get_or_init(|| {
        STANCES_TEXT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

/// Criterion name and its maximum points.
pub const RUBRIC: [(&str, u32); 4] = [
    ("Argument Quality", 10),
    ("Evidence", 10),
    ("Rebuttal", 10),
    ("Clarity", 5),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    For,
    Against,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::For => "For",
            Side::Against => "Against",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn judge_role(judge_id: &str) -> String {
    format!("{JUDGE_PREFIX}{judge_id}")
}

/// Output fields a judge must fill: every criterion plus a total, per side.
pub fn judge_fields() -> Vec<OutputField> {
    let mut out = Vec::new();
    for side in [Side::For, Side::Against] {
        for (criterion, max) in RUBRIC {
            out.push(OutputField::new(
                &format!("{side} {criterion}"),
                &format!("integer 0-{max} for the {} side", side.label().to_lowercase()),
            ));
        }
        out.push(OutputField::new(
            &format!("{side} Total"),
            "sum of the criteria above for this side",
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JuryScore {
    pub judge_id: String,
    /// Rubric subtotal per debater role.
    pub per_side: BTreeMap<String, u32>,
    /// Points per field name, e.g. "For Evidence".
    pub rubric_lines: BTreeMap<String, u32>,
}

fn leading_int(text: &str) -> Option<u32> {
    let t = text.trim();
    let digits: String = t.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

/// Check a judge's fields and turn them into a score card.
pub fn parse_jury_score(
    judge_id: &str,
    fields: &Fields,
    sides: &BTreeMap<String, Side>,
) -> Result<JuryScore, String> {
    let mut lines = BTreeMap::new();
    let mut per_side = BTreeMap::new();
    for side in [Side::For, Side::Against] {
        let mut sum = 0;
        for (criterion, max) in RUBRIC {
            let name = format!("{side} {criterion}");
            let raw = fields.get(&name).ok_or_else(|| format!("output missing field {name}"))?;
            let points = leading_int(raw).ok_or_else(|| format!("{name} must be an integer, got '{}'", raw.trim()))?;
            if points > max {
                return Err(format!("{name} must be between 0 and {max}, got {points}"));
            }
            sum += points;
            lines.insert(name, points);
        }
        let total_name = format!("{side} Total");
        let raw = fields
            .get(&total_name)
            .ok_or_else(|| format!("output missing field {total_name}"))?;
        let total = leading_int(raw).ok_or_else(|| format!("{total_name} must be an integer"))?;
        if total != sum {
            return Err(format!(
                "subtotal must equal criteria sum: {total_name} is {total} but the criteria add up to {sum}"
            ));
        }
        let role = sides
            .iter()
            .find(|(_, s)| **s == side)
            .map(|(r, _)| r.clone())
            .ok_or_else(|| format!("no debater argues {side}"))?;
        per_side.insert(role, sum);
    }
    Ok(JuryScore {
        judge_id: judge_id.to_string(),
        per_side,
        rubric_lines: lines,
    })
}

/// Higher summed subtotal wins; equal sums draw. `None` without any score.
pub fn jury_outcome(scores: &[JuryScore]) -> Option<MatchOutcome> {
    if scores.is_empty() {
        return None;
    }
    let mut sorted: Vec<&JuryScore> = scores.iter().collect();
    sorted.sort_by(|a, b| a.judge_id.cmp(&b.judge_id));
    let mut totals: BTreeMap<&str, u64> = GameId::Debate.roles().iter().map(|r| (*r, 0)).collect();
    for s in sorted {
        for (role, pts) in &s.per_side {
            *totals.entry(role.as_str()).or_insert(0) += *pts as u64;
        }
    }
    let [a, b] = GameId::Debate.roles();
    let detail = format!("{a} {} vs {b} {}", totals[a], totals[b]);
    let outcome = match totals[a].cmp(&totals[b]) {
        std::cmp::Ordering::Greater => MatchOutcome::win(GameId::Debate, a, Reason::JuryScore),
        std::cmp::Ordering::Less => MatchOutcome::win(GameId::Debate, b, Reason::JuryScore),
        std::cmp::Ordering::Equal => MatchOutcome::draw(GameId::Debate, Reason::JuryScore),
    };
    Some(outcome.with_detail(detail))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "phase", content = "round")]
pub enum DebatePhase {
    Opening,
    Rebuttal(u32),
    Judging,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateState {
    pub stance: String,
    pub sides: BTreeMap<String, Side>,
    pub phase: DebatePhase,
    pub transcript: Vec<(String, String)>,
    pub rebuttal_rounds: u32,
    pub judges: Vec<String>,
    pub scores: Vec<JuryScore>,
    pub dropped_judges: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DebateError {
    #[error("a debate needs at least one judge")]
    NoJudges,
    #[error("every judge failed to produce a valid score")]
    NoValidJudges,
    #[error("judge backend failed: {0}")]
    Backend(String),
}

impl DebateState {
    pub fn new(rng: &mut dyn RngCore, judges: Vec<String>, rebuttal_rounds: u32) -> Self {
        let list = stances();
        let stance = list[rng.gen_range(0..list.len())].to_string();
        let [a, b] = GameId::Debate.roles();
        let sides = if rng.gen_bool(0.5) {
            [(a, Side::For), (b, Side::Against)]
        } else {
            [(a, Side::Against), (b, Side::For)]
        };
        DebateState {
            stance,
            sides: sides.iter().map(|(r, s)| (r.to_string(), *s)).collect(),
            phase: DebatePhase::Opening,
            transcript: Vec::new(),
            rebuttal_rounds,
            judges,
            scores: Vec::new(),
            dropped_judges: Vec::new(),
        }
    }

    fn role_of(&self, side: Side) -> &str {
        self.sides
            .iter()
            .find(|(_, s)| **s == side)
            .map(|(r, _)| r.as_str())
            .expect("both sides assigned")
    }

    pub fn total_statements(&self) -> usize {
        2 * (1 + self.rebuttal_rounds as usize)
    }

    /// The "for" side opens every round.
    pub fn next_speaker(&self) -> Option<&str> {
        let i = self.transcript.len();
        (i < self.total_statements())
            .then(|| self.role_of(if i.is_multiple_of(2) { Side::For } else { Side::Against }))
    }

    fn phase_for(&self, statements: usize) -> DebatePhase {
        match statements / 2 {
            _ if statements >= self.total_statements() => DebatePhase::Judging,
            0 => DebatePhase::Opening,
            k => DebatePhase::Rebuttal(k as u32),
        }
    }

    /// Judges that have neither scored nor been dropped, in order.
    pub fn pending_judge(&self) -> Option<&str> {
        self.judges
            .iter()
            .find(|j| {
                !self.scores.iter().any(|s| &s.judge_id == *j) && !self.dropped_judges.contains(j)
            })
            .map(String::as_str)
    }

    pub fn labelled_transcript(&self) -> String {
        self.transcript
            .iter()
            .map(|(r, m)| format!("{} ({}): {m}", self.sides[r], r))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// Score a finished debate with `judges`, each getting [`JUDGE_ATTEMPTS`] tries.
pub fn debate_judge(
    state: &DebateState,
    judges: &[PlayerSpec],
    seed: u64,
) -> Result<(MatchOutcome, Vec<JuryScore>), DebateError> {
    if judges.is_empty() {
        return Err(DebateError::NoJudges);
    }
    let mut scores = Vec::new();
    for spec in judges {
        let role = judge_role(&spec.id);
        let mut agent = build_agent(spec, seed, &role);
        let game = DebateGame {
            state: DebateState {
                phase: DebatePhase::Judging,
                judges: vec![spec.id.clone()],
                ..state.clone()
            },
            outcome: None,
        };
        let request = game.judge_request(&spec.id);
        let view = game.view(&role);
        let validate = |_: &ContextView, f: &Fields| parse_jury_score(&spec.id, f, &state.sides).map(|_| ());
        let result = attempt_action(agent.as_mut(), &view, &request, &validate, JUDGE_ATTEMPTS, Some(&game as &dyn ActionSampler))
            .map_err(|e| DebateError::Backend(e.to_string()))?;
        if result.accepted {
            let score = parse_jury_score(&spec.id, &result.parsed_fields, &state.sides)
                .expect("accepted fields validate");
            scores.push(score);
        }
    }
    let outcome = jury_outcome(&scores).ok_or(DebateError::NoValidJudges)?;
    Ok((outcome, scores))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateGame {
    pub state: DebateState,
    pub outcome: Option<MatchOutcome>,
}

impl DebateGame {
    pub fn new(rng: &mut dyn RngCore, judges: Vec<String>, rebuttal_rounds: u32) -> Result<Self, DebateError> {
        if judges.is_empty() {
            return Err(DebateError::NoJudges);
        }
        Ok(DebateGame {
            state: DebateState::new(rng, judges, rebuttal_rounds),
            outcome: None,
        })
    }

    fn judge_request(&self, judge_id: &str) -> ActionRequest {
        let mut req = ActionRequest::new(
            &judge_role(judge_id),
            "JudgeDebate",
            judge_fields(),
            "Score both sides of this debate with the rubric: argument quality 0-10, \
             evidence 0-10, rebuttal effectiveness 0-10, clarity 0-5. Each total must equal \
             the sum of its side's criteria.",
        );
        req.max_attempts = Some(JUDGE_ATTEMPTS);
        req
    }

    fn conclude(&mut self) -> Transition {
        self.state.phase = DebatePhase::Finished;
        match jury_outcome(&self.state.scores) {
            Some(o) => {
                self.outcome = Some(o.clone());
                Transition::Finished(o)
            }
            None => Transition::Abort(DebateError::NoValidJudges.to_string()),
        }
    }

    fn after_judge(&mut self) -> Transition {
        if self.state.pending_judge().is_some() {
            Transition::Continue
        } else {
            self.conclude()
        }
    }
}

impl ActionSampler for DebateGame {
    fn sample_action(&self, request: &ActionRequest, rng: &mut dyn RngCore) -> Option<Fields> {
        if !request.role.starts_with(JUDGE_PREFIX) {
            return None;
        }
        let mut fields = Fields::new();
        for side in [Side::For, Side::Against] {
            let mut sum = 0;
            for (criterion, max) in RUBRIC {
                let pts = rng.gen_range(0..=max);
                sum += pts;
                fields.insert(format!("{side} {criterion}"), pts.to_string());
            }
            fields.insert(format!("{side} Total"), sum.to_string());
        }
        Some(fields)
    }
}

impl Game for DebateGame {
    fn game_id(&self) -> GameId {
        GameId::Debate
    }

    fn declared_roles(&self) -> Vec<String> {
        let mut roles: Vec<String> = GameId::Debate.roles().iter().map(|r| r.to_string()).collect();
        roles.extend(self.state.judges.iter().map(|j| judge_role(j)));
        roles
    }

    fn snapshot(&self) -> GameState {
        let turn = self
            .next_request()
            .map(|r| r.role)
            .unwrap_or_default();
        let phase = match self.state.phase {
            DebatePhase::Opening => "opening".to_string(),
            DebatePhase::Rebuttal(k) => format!("rebuttal_{k}"),
            DebatePhase::Judging => "judging".to_string(),
            DebatePhase::Finished => "finished".to_string(),
        };
        GameState {
            game_id: GameId::Debate,
            phase,
            turn_role: turn,
            payload: serde_json::to_value(self).expect("debate state serializes"),
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
        if let Some(speaker) = self.state.next_speaker() {
            let kind = match self.state.phase {
                DebatePhase::Opening => "opening statement",
                _ => "rebuttal",
            };
            return Some(ActionRequest::new(
                speaker,
                "Argue",
                vec![OutputField::new("Statement", &format!("your {kind}"))],
                "You are in a formal debate. Argue your assigned side of the stance persuasively.",
            ));
        }
        self.state.pending_judge().map(|j| self.judge_request(j))
    }

    fn view(&self, role: &str) -> ContextView {
        let s = &self.state;
        let mut view = ContextView::new(GameId::Debate, role).with("Stance", s.stance.clone());
        if let Some(side) = s.sides.get(role) {
            view = view
                .with("Your Side", side.label())
                .with(
                    "Phase",
                    match s.phase {
                        DebatePhase::Opening => "opening".to_string(),
                        DebatePhase::Rebuttal(k) => format!("rebuttal {k} of {}", s.rebuttal_rounds),
                        _ => "judging".to_string(),
                    },
                );
        }
        view.with("Transcript", s.labelled_transcript())
    }

    fn validate(&self, request: &ActionRequest, fields: &Fields) -> Result<(), String> {
        if let Some(judge) = request.role.strip_prefix(JUDGE_PREFIX) {
            return parse_jury_score(judge, fields, &self.state.sides).map(|_| ());
        }
        if self.state.next_speaker() != Some(request.role.as_str()) {
            return Err(format!("it is not {}'s turn to speak", request.role));
        }
        match fields.get("Statement") {
            Some(t) if !t.trim().is_empty() => Ok(()),
            _ => Err("statement must not be empty".into()),
        }
    }

    fn apply(&mut self, request: &ActionRequest, fields: &Fields) -> Transition {
        if let Some(judge) = request.role.strip_prefix(JUDGE_PREFIX) {
            match parse_jury_score(judge, fields, &self.state.sides) {
                Ok(score) => self.state.scores.push(score),
                Err(e) => return Transition::Abort(format!("validated score failed to apply: {e}")),
            }
            return self.after_judge();
        }
        let text = fields.get("Statement").cloned().unwrap_or_default();
        self.state.transcript.push((request.role.clone(), text.trim().to_string()));
        self.state.phase = self.state.phase_for(self.state.transcript.len());
        Transition::Continue
    }

    fn on_exhausted(&mut self, request: &ActionRequest) -> Transition {
        match request.role.strip_prefix(JUDGE_PREFIX) {
            Some(judge) => {
                self.state.dropped_judges.push(judge.to_string());
                self.after_judge()
            }
            None => {
                let o = crate::engine::forfeit(GameId::Debate, &request.role, Reason::InvalidMoveForfeit);
                self.state.phase = DebatePhase::Finished;
                self.outcome = Some(o.clone());
                Transition::Finished(o)
            }
        }
    }

    fn moves_played(&self) -> usize {
        self.state.transcript.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sides() -> BTreeMap<String, Side> {
        BTreeMap::from([
            ("debater_1".to_string(), Side::For),
            ("debater_2".to_string(), Side::Against),
        ])
    }

    fn card(for_pts: [u32; 4], against: [u32; 4]) -> Fields {
        let mut f = Fields::new();
        for (side, pts) in [(Side::For, for_pts), (Side::Against, against)] {
            for ((c, _), p) in RUBRIC.iter().zip(pts) {
                f.insert(format!("{side} {c}"), p.to_string());
            }
            f.insert(format!("{side} Total"), pts.iter().sum::<u32>().to_string());
        }
        f
    }

    #[test]
    fn twenty_stances_shipped() {
        assert_eq!(stances().len(), 20);
    }

    #[test]
    fn higher_total_wins() {
        let s = parse_jury_score("j1", &card([10, 10, 5, 5], [5, 5, 5, 5]), &sides()).unwrap();
        assert_eq!(s.per_side["debater_1"], 30);
        assert_eq!(s.per_side["debater_2"], 20);
        let o = jury_outcome(&[s]).unwrap();
        assert_eq!(o.winner.as_role(), Some("debater_1"));
    }

    #[test]
    fn split_jury_draws() {
        let a = parse_jury_score("j1", &card([10, 5, 5, 5], [5, 5, 5, 5]), &sides()).unwrap();
        let b = parse_jury_score("j2", &card([5, 5, 5, 5], [10, 5, 5, 5]), &sides()).unwrap();
        assert!(jury_outcome(&[a.clone(), b.clone()]).unwrap().winner == crate::engine::Winner::Draw);
        assert_eq!(jury_outcome(&[a.clone(), b.clone()]), jury_outcome(&[b, a]));
    }

    #[test]
    fn subtotal_mismatch_rejected() {
        let mut f = card([5, 5, 5, 5], [5, 5, 5, 5]);
        f.insert("For Total".into(), "21".into());
        let err = parse_jury_score("j", &f, &sides()).unwrap_err();
        assert!(err.contains("subtotal must equal criteria sum"), "{err}");
        let mut f = card([5, 5, 5, 5], [5, 5, 5, 5]);
        f.insert("Against Clarity".into(), "6".into());
        f.insert("Against Total".into(), "21".into());
        assert!(parse_jury_score("j", &f, &sides()).is_err());
    }

    #[test]
    fn statement_order_and_phases() {
        let mut g = DebateGame::new(&mut ChaCha8Rng::seed_from_u64(3), vec!["j".into()], 2).unwrap();
        let mut speakers = Vec::new();
        while let Some(req) = g.next_request() {
            if req.role.starts_with(JUDGE_PREFIX) {
                break;
            }
            speakers.push(req.role.clone());
            let f = Fields::from([("Statement".to_string(), "point".to_string())]);
            assert!(g.validate(&req, &f).is_ok());
            g.apply(&req, &f);
        }
        assert_eq!(speakers.len(), 6);
        assert_eq!(g.state.phase, DebatePhase::Judging);
        let first = g.state.role_of(Side::For).to_string();
        assert_eq!(speakers[0], first);
        assert_ne!(speakers[1], first);
    }

    #[test]
    fn exhausted_judges_are_dropped_then_abort() {
        let mut g = DebateGame::new(&mut ChaCha8Rng::seed_from_u64(1), vec!["a".into(), "b".into()], 0).unwrap();
        g.state.transcript = vec![("debater_1".into(), "x".into()), ("debater_2".into(), "y".into())];
        g.state.phase = DebatePhase::Judging;
        let r = g.next_request().unwrap();
        assert_eq!(r.role, "judge:a");
        assert_eq!(r.max_attempts, Some(2));
        assert_eq!(g.on_exhausted(&r), Transition::Continue);
        let r = g.next_request().unwrap();
        assert_eq!(r.role, "judge:b");
        assert!(matches!(g.on_exhausted(&r), Transition::Abort(_)));
    }
}
