//! Player backends and the prompt abstraction.
//!
//! A [`PlayerSpec`] binds a player id to a backend (scripted responses, a
//! seeded random-legal baseline, or an OpenAI-compatible model endpoint) and a
//! prompting strategy. The engine only talks to the [`Agent`] trait, which is
//! also the extension point for arbitrary user-defined strategies.

pub mod model;
pub mod signature;

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ActionRequest, ActionSampler, ContextView, Fields};
pub use model::{model_complete, preflight, ModelEndpoint, ModelParams, RateLimiter, TimeSource};
pub use signature::{
    format_response, parse_structured_output, render_prompt, render_view_prompt, ParseError,
    PromptSignature, SignatureError, Strategy, RATIONALE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerSpec {
    pub id: String,
    pub backend: Backend,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default = "default_backend_retries")]
    pub max_backend_retries: u32,
}

fn default_backend_retries() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    /// Canned responses consumed in order. `by_role` scripts take precedence
    /// over `script` when the player is asked to act as that role.
    Scripted {
        #[serde(default)]
        script: Vec<String>,
        #[serde(default)]
        by_role: BTreeMap<String, Vec<String>>,
    },
    RandomLegal {
        #[serde(default)]
        seed: u64,
    },
    Model {
        endpoint: ModelEndpoint,
        #[serde(default)]
        params: ModelParams,
    },
}

impl PlayerSpec {
    pub fn scripted(id: &str, script: &[&str]) -> Self {
        PlayerSpec {
            id: id.to_string(),
            backend: Backend::Scripted {
                script: script.iter().map(|s| s.to_string()).collect(),
                by_role: BTreeMap::new(),
            },
            strategy: Strategy::Predict,
            max_backend_retries: default_backend_retries(),
        }
    }

    pub fn random_legal(id: &str, seed: u64) -> Self {
        PlayerSpec {
            id: id.to_string(),
            backend: Backend::RandomLegal { seed },
            strategy: Strategy::Predict,
            max_backend_retries: default_backend_retries(),
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn is_model(&self) -> bool {
        matches!(self.backend, Backend::Model { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("script for player {player} exhausted after {used} responses")]
    ScriptExhausted { player: String, used: usize },
    #[error("random-legal choice from an empty action list")]
    NoLegalActions,
    #[error("environment variable {0} with the API key is not set")]
    MissingApiKey(String),
    #[error("authentication rejected by {url} (HTTP {status}); check the API key in ${env}")]
    Auth { url: String, status: u16, env: String },
    #[error("request rejected by {url} (HTTP {status}): {body}")]
    Rejected { url: String, status: u16, body: String },
    #[error("endpoint {url} unreachable after {attempts} attempts: {last}")]
    Unreachable { url: String, attempts: u32, last: String },
    #[error("malformed completion response: {0}")]
    Malformed(String),
}

/// Everything an agent gets to see when asked to act.
pub struct Turn<'a> {
    pub view: &'a ContextView,
    pub request: &'a ActionRequest,
    pub signature: &'a PromptSignature,
    pub sampler: Option<&'a dyn ActionSampler>,
}

pub trait Agent: Send {
    fn strategy(&self) -> Strategy {
        Strategy::Predict
    }

    /// Produce raw response text for one attempt.
    fn respond(&mut self, turn: &Turn<'_>) -> Result<String, BackendError>;
}

/// Replays canned responses.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    player: String,
    script: Vec<String>,
    by_role: BTreeMap<String, Vec<String>>,
    cursors: BTreeMap<String, usize>,
    strategy: Strategy,
}

impl ScriptedAgent {
    pub fn new(player: &str, script: Vec<String>) -> Self {
        ScriptedAgent {
            player: player.to_string(),
            script,
            by_role: BTreeMap::new(),
            cursors: BTreeMap::new(),
            strategy: Strategy::Predict,
        }
    }

    pub fn with_roles(mut self, by_role: BTreeMap<String, Vec<String>>) -> Self {
        self.by_role = by_role;
        self
    }

    /// Next canned response for `role`.
    pub fn scripted_next(&mut self, role: &str) -> Result<String, BackendError> {
        let (key, script) = match self.by_role.get(role) {
            Some(s) => (role.to_string(), s),
            None => (String::new(), &self.script),
        };
        let cursor = self.cursors.entry(key).or_insert(0);
        let text = script
            .get(*cursor)
            .cloned()
            .ok_or_else(|| BackendError::ScriptExhausted {
                player: self.player.clone(),
                used: *cursor,
            })?;
        *cursor += 1;
        Ok(text)
    }
}

impl Agent for ScriptedAgent {
    fn strategy(&self) -> Strategy {
        self.strategy
    }

    fn respond(&mut self, turn: &Turn<'_>) -> Result<String, BackendError> {
        self.scripted_next(&turn.request.role)
    }
}

/// Uniform choice from `legal`.
pub fn random_legal_next(rng: &mut dyn RngCore, legal: &[String]) -> Result<String, BackendError> {
    if legal.is_empty() {
        return Err(BackendError::NoLegalActions);
    }
    Ok(legal[rng.gen_range(0..legal.len())].clone())
}

const FILLER: [&str; 6] = [
    "Let us keep this conversation friendly.",
    "I have nothing further to add at the moment.",
    "That is an interesting point worth considering.",
    "Could you tell me more about that?",
    "I will respond briefly and carefully.",
    "Here is my considered reply.",
];

/// Baseline opponent: picks a uniformly random legal action, or filler text
/// for free-form actions.
#[derive(Debug, Clone)]
pub struct RandomLegalAgent {
    rng: ChaCha8Rng,
    strategy: Strategy,
}

impl RandomLegalAgent {
    pub fn new(seed: u64, strategy: Strategy) -> Self {
        RandomLegalAgent {
            rng: ChaCha8Rng::seed_from_u64(seed),
            strategy,
        }
    }
}

impl Agent for RandomLegalAgent {
    fn strategy(&self) -> Strategy {
        self.strategy
    }

    fn respond(&mut self, turn: &Turn<'_>) -> Result<String, BackendError> {
        let sampled = turn
            .sampler
            .and_then(|s| s.sample_action(turn.request, &mut self.rng));
        let mut fields: Fields = match sampled {
            Some(f) => f,
            None => turn
                .request
                .field_names()
                .map(|n| {
                    let line = FILLER[self.rng.gen_range(0..FILLER.len())];
                    (n.to_string(), line.to_string())
                })
                .collect(),
        };
        if self.strategy == Strategy::Cot {
            fields.insert(RATIONALE.to_string(), "random legal choice".to_string());
        }
        Ok(format_response(
            &turn.signature.output_fields(self.strategy),
            &fields,
        ))
    }
}

/// Wraps a closure as a player strategy.
pub struct FnAgent<F> {
    f: F,
    strategy: Strategy,
}

impl<F> FnAgent<F>
where
    F: FnMut(&Turn<'_>) -> Result<String, BackendError> + Send,
{
    pub fn new(f: F) -> Self {
        FnAgent {
            f,
            strategy: Strategy::Predict,
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }
}

impl<F> Agent for FnAgent<F>
where
    F: FnMut(&Turn<'_>) -> Result<String, BackendError> + Send,
{
    fn strategy(&self) -> Strategy {
        self.strategy
    }

    fn respond(&mut self, turn: &Turn<'_>) -> Result<String, BackendError> {
        (self.f)(turn)
    }
}

/// Renders the prompt and queries a chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct ModelAgent {
    endpoint: ModelEndpoint,
    params: ModelParams,
    strategy: Strategy,
    max_retries: u32,
}

impl Agent for ModelAgent {
    fn strategy(&self) -> Strategy {
        self.strategy
    }

    fn respond(&mut self, turn: &Turn<'_>) -> Result<String, BackendError> {
        let values = turn.view.fields.iter().cloned().collect();
        let prompt = render_prompt(turn.signature, &values, self.strategy, &turn.view.feedback)
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        model_complete(&self.endpoint, &prompt, &self.params, self.max_retries)
    }
}

/// Instantiate the agent for one match. `match_seed` and `role` make
/// random-legal players vary between matches while staying reproducible.
pub fn build_agent(spec: &PlayerSpec, match_seed: u64, role: &str) -> Box<dyn Agent> {
    match &spec.backend {
        Backend::Scripted { script, by_role } => {
            let mut agent = ScriptedAgent::new(&spec.id, script.clone()).with_roles(by_role.clone());
            agent.strategy = spec.strategy;
            Box::new(agent)
        }
        Backend::RandomLegal { seed } => {
            let mixed = mix_seed(&[*seed, match_seed, fnv1a(role.as_bytes())]);
            Box::new(RandomLegalAgent::new(mixed, spec.strategy))
        }
        Backend::Model { endpoint, params } => Box::new(ModelAgent {
            endpoint: endpoint.clone(),
            params: params.clone(),
            strategy: spec.strategy,
            max_retries: spec.max_backend_retries,
        }),
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// SplitMix64-style combination of several seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut acc: u64 = 0x9E3779B97F4A7C15;
    for p in parts {
        let mut z = acc ^ p.wrapping_add(0x9E3779B97F4A7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        acc = z ^ (z >> 31);
    }
    acc
}
