//! Structured input/output signatures and the `Field: value` text contract.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ActionRequest, ContextView, Fields};

pub const RATIONALE: &str = "Rationale";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Predict,
    Cot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSignature {
    pub name: String,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
    pub instructions: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignatureError {
    #[error("duplicate field name '{0}' in signature")]
    DuplicateField(String),
    #[error("signature declares no output fields")]
    NoOutputs,
    #[error("missing input value for field '{0}'")]
    MissingInput(String),
}

/// Parser failure; its message is what the player sees as retry feedback.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("output missing field {0}")]
pub struct ParseError(pub String);

impl PromptSignature {
    pub fn new(
        name: &str,
        inputs: Vec<(String, String)>,
        outputs: Vec<(String, String)>,
        instructions: &str,
    ) -> Result<Self, SignatureError> {
        let sig = PromptSignature {
            name: name.to_string(),
            inputs,
            outputs,
            instructions: instructions.to_string(),
        };
        sig.check()?;
        Ok(sig)
    }

    fn check(&self) -> Result<(), SignatureError> {
        if self.outputs.is_empty() {
            return Err(SignatureError::NoOutputs);
        }
        let mut seen = HashSet::new();
        for (name, _) in self.inputs.iter().chain(&self.outputs) {
            if !seen.insert(name.to_ascii_lowercase()) {
                return Err(SignatureError::DuplicateField(name.clone()));
            }
        }
        Ok(())
    }

    /// Signature for an engine request, with inputs named after the view's fields.
    pub fn from_request(request: &ActionRequest, view: &ContextView) -> Self {
        PromptSignature {
            name: request.action_name.clone(),
            inputs: view
                .fields
                .iter()
                .map(|(k, _)| (k.clone(), String::new()))
                .collect(),
            outputs: request
                .fields_required
                .iter()
                .map(|f| (f.name.clone(), f.description.clone()))
                .collect(),
            instructions: request.instructions.clone(),
        }
    }

    /// Output fields the response must carry under `strategy`.
    pub fn output_fields(&self, strategy: Strategy) -> Vec<(String, String)> {
        let mut out = Vec::with_capacity(self.outputs.len() + 1);
        if strategy == Strategy::Cot && !self.has_output(RATIONALE) {
            out.push((
                RATIONALE.to_string(),
                "think step by step before answering".to_string(),
            ));
        }
        out.extend(self.outputs.iter().cloned());
        out
    }

    /// The same signature with the strategy's extra fields made explicit.
    pub fn with_strategy(&self, strategy: Strategy) -> Self {
        PromptSignature {
            outputs: self.output_fields(strategy),
            ..self.clone()
        }
    }

    fn has_output(&self, name: &str) -> bool {
        self.outputs.iter().any(|(n, _)| n.eq_ignore_ascii_case(name))
    }
}

/// Render a deterministic prompt for `sig`.
pub fn render_prompt(
    sig: &PromptSignature,
    values: &BTreeMap<String, String>,
    strategy: Strategy,
    feedback: &[String],
) -> Result<String, SignatureError> {
    let mut text = String::new();
    text.push_str(sig.instructions.trim());
    text.push_str("\n\n");
    for (name, _) in &sig.inputs {
        let value = values
            .get(name)
            .ok_or_else(|| SignatureError::MissingInput(name.clone()))?;
        text.push_str(&format!("{name}: {value}\n"));
    }
    if !feedback.is_empty() {
        text.push_str("\nPrevious attempt errors:\n");
        for line in feedback {
            text.push_str(line);
            text.push('\n');
        }
    }
    text.push_str("\nRespond with the following fields, each starting on its own line as \"<Field>: <value>\":\n");
    for (name, desc) in sig.output_fields(strategy) {
        if desc.is_empty() {
            text.push_str(&format!("{name}:\n"));
        } else {
            text.push_str(&format!("{name}: <{desc}>\n"));
        }
    }
    Ok(text)
}

/// Render the view of an engine request as a prompt.
pub fn render_view_prompt(
    request: &ActionRequest,
    view: &ContextView,
    strategy: Strategy,
) -> String {
    let sig = PromptSignature::from_request(request, view);
    let values = view.fields.iter().cloned().collect();
    render_prompt(&sig, &values, strategy, &view.feedback).expect("view covers its own fields")
}

/// Extract every declared output field from `Field: value` sections.
///
/// Headers are matched case-insensitively and may be wrapped in markdown
/// (`**Move:**`, `### Move:`, `- Move:`). A field's value runs until the next
/// declared header, so trailing fields may span several lines. When a header
/// repeats, the last occurrence wins.
pub fn parse_structured_output(text: &str, sig: &PromptSignature) -> Result<Fields, ParseError> {
    let names: Vec<&str> = sig.outputs.iter().map(|(n, _)| n.as_str()).collect();
    let mut found: BTreeMap<String, String> = BTreeMap::new();
    let mut current: Option<(usize, String)> = None;

    let close = |cur: &mut Option<(usize, String)>, found: &mut BTreeMap<String, String>| {
        if let Some((idx, body)) = cur.take() {
            found.insert(names[idx].to_string(), clean_value(&body));
        }
    };

    for line in text.lines() {
        if let Some((idx, rest)) = match_header(line, &names) {
            close(&mut current, &mut found);
            current = Some((idx, rest.to_string()));
        } else if let Some((_, body)) = current.as_mut() {
            body.push('\n');
            body.push_str(line);
        }
    }
    close(&mut current, &mut found);

    for name in &names {
        match found.get(*name) {
            Some(v) if !v.is_empty() => {}
            _ => return Err(ParseError(name.to_string())),
        }
    }
    Ok(found)
}

fn match_header<'a>(line: &'a str, names: &[&str]) -> Option<(usize, &'a str)> {
    let stripped = line.trim_start_matches(|c: char| {
        c.is_whitespace() || matches!(c, '#' | '*' | '_' | '-' | '>' | '`')
    });
    for (idx, name) in names.iter().enumerate() {
        let Some(head) = stripped.get(..name.len()) else {
            continue;
        };
        if !head.eq_ignore_ascii_case(name) {
            continue;
        }
        let after = stripped[name.len()..].trim_start_matches(['*', '_', '`', ' ']);
        if let Some(rest) = after.strip_prefix(':') {
            return Some((idx, rest.trim_start_matches(['*', '_']).trim_start()));
        }
    }
    None
}

fn clean_value(body: &str) -> String {
    let trimmed = body.trim();
    let trimmed = trimmed
        .strip_prefix("**")
        .and_then(|t| t.strip_suffix("**"))
        .unwrap_or(trimmed);
    let trimmed = trimmed
        .strip_prefix('`')
        .and_then(|t| t.strip_suffix('`'))
        .unwrap_or(trimmed);
    trimmed.trim().to_string()
}

/// A compliant response text for `fields`, in signature order.
pub fn format_response(sig_outputs: &[(String, String)], fields: &Fields) -> String {
    let mut out = String::new();
    for (name, _) in sig_outputs {
        if let Some(v) = fields.get(name) {
            out.push_str(&format!("{name}: {v}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert_eq, prop_assume, proptest};

    fn move_sig() -> PromptSignature {
        PromptSignature::new(
            "MakeMove",
            vec![("Position".into(), "FEN".into())],
            vec![("Move".into(), "a move in SAN".into())],
            "Play the best legal chess move.",
        )
        .unwrap()
    }

    #[test]
    fn render_is_deterministic() {
        let sig = move_sig();
        let values = BTreeMap::from([("Position".to_string(), "startpos".to_string())]);
        let a = render_prompt(&sig, &values, Strategy::Cot, &[]).unwrap();
        let b = render_prompt(&sig, &values, Strategy::Cot, &[]).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("Position: startpos"));
    }

    #[test]
    fn cot_prepends_rationale() {
        let sig = move_sig();
        let cot = sig.output_fields(Strategy::Cot);
        assert_eq!(cot[0].0, RATIONALE);
        let predict = sig.output_fields(Strategy::Predict);
        assert!(predict.iter().all(|(n, _)| n != RATIONALE));
        assert_eq!(&cot[1..], &predict[..]);
    }

    #[test]
    fn strategy_switch_only_changes_rationale_line() {
        let sig = move_sig();
        let values = BTreeMap::from([("Position".to_string(), "x".to_string())]);
        let p = render_prompt(&sig, &values, Strategy::Predict, &[]).unwrap();
        let c = render_prompt(&sig, &values, Strategy::Cot, &[]).unwrap();
        let extra: Vec<_> = c.lines().filter(|l| !p.lines().any(|pl| pl == *l)).collect();
        assert_eq!(extra.len(), 1);
        assert!(extra[0].starts_with("Rationale:"));
    }

    #[test]
    fn feedback_appears_verbatim() {
        let sig = move_sig();
        let values = BTreeMap::from([("Position".to_string(), "x".to_string())]);
        let fb = vec!["attempt 1 failed: illegal move".to_string()];
        let text = render_prompt(&sig, &values, Strategy::Predict, &fb).unwrap();
        assert!(text.contains("attempt 1 failed: illegal move"));
    }

    #[test]
    fn missing_input_is_contract_error() {
        let err = render_prompt(&move_sig(), &BTreeMap::new(), Strategy::Predict, &[]).unwrap_err();
        assert_eq!(err, SignatureError::MissingInput("Position".into()));
    }

    #[test]
    fn duplicate_fields_rejected() {
        let err = PromptSignature::new(
            "x",
            vec![("A".into(), String::new())],
            vec![("a".into(), String::new())],
            "",
        )
        .unwrap_err();
        assert!(matches!(err, SignatureError::DuplicateField(_)));
    }

    #[test]
    fn parses_rationale_and_move() {
        let sig = move_sig().with_strategy(Strategy::Cot);
        let out = parse_structured_output("Rationale: because…\nMove: Nf3", &sig).unwrap();
        assert_eq!(out["Rationale"], "because…");
        assert_eq!(out["Move"], "Nf3");
    }

    #[test]
    fn missing_field_names_it() {
        let sig = move_sig().with_strategy(Strategy::Cot);
        let err = parse_structured_output("Rationale: hmm", &sig).unwrap_err();
        assert_eq!(err.to_string(), "output missing field Move");
    }

    #[test]
    fn order_case_and_markdown_tolerant() {
        let sig = move_sig().with_strategy(Strategy::Cot);
        let text = "**move:** `e4`\n\n### RATIONALE:\nfirst line\nsecond line\n";
        let out = parse_structured_output(text, &sig).unwrap();
        assert_eq!(out["Move"], "e4");
        assert_eq!(out["Rationale"], "first line\nsecond line");
    }

    #[test]
    fn empty_value_counts_as_missing() {
        let err = parse_structured_output("Move:   \n", &move_sig()).unwrap_err();
        assert_eq!(err, ParseError("Move".into()));
    }

    proptest! {
        #[test]
        fn render_then_parse_round_trips(
            values in proptest::collection::vec("[a-zA-Z0-9 ,.!?]{1,30}", 1..4),
            cot in any::<bool>(),
        ) {
            let outputs: Vec<(String, String)> = (0..values.len())
                .map(|i| (format!("Field{i}"), String::new()))
                .collect();
            let sig = PromptSignature::new("s", vec![], outputs, "do it").unwrap();
            let strategy = if cot { Strategy::Cot } else { Strategy::Predict };
            let full = sig.with_strategy(strategy);
            let mut fields: Fields = values
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("Field{i}"), v.trim().to_string()))
                .filter(|(_, v)| !v.is_empty())
                .collect();
            prop_assume!(fields.len() == values.len());
            if cot {
                fields.insert(RATIONALE.into(), "step by step".into());
            }
            let text = format_response(&full.outputs, &fields);
            let parsed = parse_structured_output(&text, &full).unwrap();
            prop_assert_eq!(parsed, fields);
        }
    }
}
