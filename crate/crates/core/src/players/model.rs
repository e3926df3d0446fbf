//! OpenAI-compatible chat-completion client.
//!
//! One request per call (`POST {base_url}/chat/completions`), with transport
//! errors, 429 and 5xx retried under exponential backoff. Rate limits are
//! enforced per endpoint across the whole process by a shared token bucket.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::BackendError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key. The key itself
    /// is never stored.
    pub api_key_env: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Requests per minute; 0 disables limiting.
    #[serde(default)]
    pub rate_limit: u32,
}

fn default_timeout_ms() -> u64 {
    60_000
}

impl ModelEndpoint {
    pub fn new(base_url: &str, model_name: &str, api_key_env: &str) -> Self {
        ModelEndpoint {
            base_url: base_url.trim_end_matches('/').to_string(),
            model_name: model_name.to_string(),
            api_key_env: api_key_env.to_string(),
            timeout_ms: default_timeout_ms(),
            rate_limit: 0,
        }
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    fn limiter_key(&self) -> String {
        format!("{}|{}", self.base_url, self.model_name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// First backoff delay; doubles on each retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_temperature() -> f64 {
    0.7
}

fn default_max_tokens() -> u32 {
    1024
}

fn default_backoff_ms() -> u64 {
    500
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

/// Time source for the rate limiter; swapped for a virtual clock in tests.
pub trait TimeSource: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

struct RealTime(Instant);

impl TimeSource for RealTime {
    fn now(&self) -> Duration {
        self.0.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

struct Bucket {
    tokens: f64,
    last: Duration,
}

/// Token bucket holding up to one minute's worth of requests.
pub struct RateLimiter {
    per_minute: u32,
    time: Arc<dyn TimeSource>,
    bucket: Mutex<Bucket>,
}

impl RateLimiter {
    pub fn new(per_minute: u32) -> Self {
        Self::with_time(per_minute, Arc::new(RealTime(Instant::now())))
    }

    pub fn with_time(per_minute: u32, time: Arc<dyn TimeSource>) -> Self {
        let now = time.now();
        RateLimiter {
            per_minute,
            time,
            bucket: Mutex::new(Bucket {
                tokens: per_minute as f64,
                last: now,
            }),
        }
    }

    /// Block until a request may be sent.
    pub fn acquire(&self) {
        if self.per_minute == 0 {
            return;
        }
        let per_sec = self.per_minute as f64 / 60.0;
        let wait = {
            let mut b = self.bucket.lock().expect("rate limiter poisoned");
            let now = self.time.now();
            let elapsed = now.saturating_sub(b.last).as_secs_f64();
            b.tokens = (b.tokens + elapsed * per_sec).min(self.per_minute as f64);
            b.last = now;
            // reserve the token now; concurrent callers queue behind it
            b.tokens -= 1.0;
            if b.tokens >= 0.0 {
                Duration::ZERO
            } else {
                Duration::from_secs_f64(-b.tokens / per_sec)
            }
        };
        if !wait.is_zero() {
            self.time.sleep(wait);
        }
    }
}

fn limiter_for(endpoint: &ModelEndpoint) -> Option<Arc<RateLimiter>> {
    if endpoint.rate_limit == 0 {
        return None;
    }
    static LIMITERS: OnceLock<Mutex<HashMap<String, Arc<RateLimiter>>>> = OnceLock::new();
    let map = LIMITERS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = map.lock().expect("limiter registry poisoned");
    Some(
        map.entry(endpoint.limiter_key())
            .or_insert_with(|| Arc::new(RateLimiter::new(endpoint.rate_limit)))
            .clone(),
    )
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(BackendError),
}

/// Send `prompt` as a single user message and return the reply text.
pub fn model_complete(
    endpoint: &ModelEndpoint,
    prompt: &str,
    params: &ModelParams,
    max_retries: u32,
) -> Result<String, BackendError> {
    let key = std::env::var(&endpoint.api_key_env)
        .map_err(|_| BackendError::MissingApiKey(endpoint.api_key_env.clone()))?;
    let url = endpoint.completions_url();
    let body = serde_json::to_string(&ChatRequest {
        model: &endpoint.model_name,
        messages: vec![ChatMessage {
            role: "user",
            content: prompt,
        }],
        temperature: params.temperature,
        max_tokens: params.max_tokens,
    })
    .map_err(|e| BackendError::Malformed(e.to_string()))?;

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(endpoint.timeout_ms)))
        .http_status_as_error(false)
        .build()
        .into();
    let limiter = limiter_for(endpoint);

    let mut last = String::new();
    for attempt in 0..=max_retries {
        if attempt > 0 {
            let delay = params.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
            std::thread::sleep(Duration::from_millis(delay));
        }
        if let Some(l) = &limiter {
            l.acquire();
        }
        match send_once(&agent, &url, &key, &body, endpoint) {
            Attempt::Done(text) => return Ok(text),
            Attempt::Fatal(e) => return Err(e),
            Attempt::Retry(msg) => last = msg,
        }
    }
    Err(BackendError::Unreachable {
        url,
        attempts: max_retries + 1,
        last,
    })
}

/// Check that the API key is set and the endpoint answers HTTP at all.
pub fn preflight(endpoint: &ModelEndpoint) -> Result<(), BackendError> {
    let key = std::env::var(&endpoint.api_key_env)
        .map_err(|_| BackendError::MissingApiKey(endpoint.api_key_env.clone()))?;
    let url = format!("{}/models", endpoint.base_url.trim_end_matches('/'));
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(endpoint.timeout_ms.min(10_000))))
        .http_status_as_error(false)
        .build()
        .into();
    let resp = agent
        .get(&url)
        .header("Authorization", &format!("Bearer {key}"))
        .call()
        .map_err(|e| BackendError::Unreachable {
        url: url.clone(),
        attempts: 1,
        last: e.to_string(),
    })?;
    match resp.status().as_u16() {
        status @ (401 | 403) => Err(BackendError::Auth {
            url,
            status,
            env: endpoint.api_key_env.clone(),
        }),
        _ => Ok(()),
    }
}

fn send_once(
    agent: &ureq::Agent,
    url: &str,
    key: &str,
    body: &str,
    endpoint: &ModelEndpoint,
) -> Attempt {
    let resp = agent
        .post(url)
        .header("Authorization", &format!("Bearer {key}"))
        .header("Content-Type", "application/json")
        .send(body);
    let mut resp = match resp {
        Ok(r) => r,
        Err(e) => return Attempt::Retry(e.to_string()),
    };
    let status = resp.status().as_u16();
    let text = match resp.body_mut().read_to_string() {
        Ok(t) => t,
        Err(e) => return Attempt::Retry(e.to_string()),
    };
    match status {
        200..=299 => match serde_json::from_str::<ChatResponse>(&text) {
            Ok(parsed) => match parsed.choices.into_iter().next() {
                Some(Choice {
                    message: ResponseMessage { content: Some(c) },
                }) => Attempt::Done(c),
                _ => Attempt::Fatal(BackendError::Malformed("no message content".into())),
            },
            Err(e) => Attempt::Fatal(BackendError::Malformed(e.to_string())),
        },
        401 | 403 => Attempt::Fatal(BackendError::Auth {
            url: url.to_string(),
            status,
            env: endpoint.api_key_env.clone(),
        }),
        408 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}")),
        _ => Attempt::Fatal(BackendError::Rejected {
            url: url.to_string(),
            status,
            body: text.chars().take(200).collect(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

    /// Serves canned (status, body) pairs in order, recording request bodies.
    fn mock_server(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let seen = Arc::new(Mutex::new(Vec::new()));
        let seen2 = seen.clone();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let Ok((mut stream, _)) = listener.accept() else {
                    return;
                };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                let mut headers = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    headers.push_str(&line);
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                seen2
                    .lock()
                    .unwrap()
                    .push(format!("{headers}\n{}", String::from_utf8_lossy(&buf)));
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}"), seen)
    }

    fn ok_body(content: &str) -> String {
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
            .to_string()
    }

    fn fast() -> ModelParams {
        ModelParams {
            backoff_ms: 1,
            ..ModelParams::default()
        }
    }

    #[test]
    fn echoes_content_verbatim() {
        std::env::set_var("GA_KEY_ECHO", "k-echo");
        let (url, seen) = mock_server(vec![(200, ok_body("Move: Nf3"))]);
        let ep = ModelEndpoint::new(&url, "test-model", "GA_KEY_ECHO");
        let out = model_complete(&ep, "hello", &fast(), 2).unwrap();
        assert_eq!(out, "Move: Nf3");
        let req = seen.lock().unwrap()[0].clone();
        assert!(req.to_ascii_lowercase().contains("authorization: bearer k-echo"));
        assert!(req.contains("\"model\":\"test-model\""));
        assert!(req.contains("\"role\":\"user\""));
        assert!(req.contains("\"max_tokens\""));
    }

    #[test]
    fn retries_server_errors() {
        std::env::set_var("GA_KEY_RETRY", "k");
        let (url, seen) = mock_server(vec![
            (500, "{}".into()),
            (500, "{}".into()),
            (200, ok_body("fine")),
        ]);
        let ep = ModelEndpoint::new(&url, "m", "GA_KEY_RETRY");
        assert_eq!(model_complete(&ep, "p", &fast(), 3).unwrap(), "fine");
        assert_eq!(seen.lock().unwrap().len(), 3);
    }

    #[test]
    fn exhausted_retries_report_unreachable() {
        std::env::set_var("GA_KEY_DOWN", "k");
        let (url, _) = mock_server(vec![(503, "{}".into()), (503, "{}".into())]);
        let ep = ModelEndpoint::new(&url, "m", "GA_KEY_DOWN");
        let err = model_complete(&ep, "p", &fast(), 1).unwrap_err();
        assert!(matches!(err, BackendError::Unreachable { attempts: 2, .. }));
    }

    #[test]
    fn auth_failure_aborts_immediately() {
        std::env::set_var("GA_KEY_AUTH", "bad");
        let (url, seen) = mock_server(vec![(401, "{}".into()), (200, ok_body("x"))]);
        let ep = ModelEndpoint::new(&url, "m", "GA_KEY_AUTH");
        let err = model_complete(&ep, "p", &fast(), 3).unwrap_err();
        assert!(matches!(err, BackendError::Auth { status: 401, .. }));
        assert!(err.to_string().contains("GA_KEY_AUTH"));
        assert_eq!(seen.lock().unwrap().len(), 1);
    }

    #[test]
    fn missing_key_is_reported() {
        let ep = ModelEndpoint::new("http://127.0.0.1:9", "m", "GA_KEY_DEFINITELY_UNSET");
        assert_eq!(
            model_complete(&ep, "p", &fast(), 0).unwrap_err(),
            BackendError::MissingApiKey("GA_KEY_DEFINITELY_UNSET".into())
        );
    }

    struct VirtualTime {
        now_ms: AtomicU64,
        sleeps: AtomicUsize,
    }

    impl TimeSource for VirtualTime {
        fn now(&self) -> Duration {
            Duration::from_millis(self.now_ms.load(Ordering::SeqCst))
        }

        fn sleep(&self, d: Duration) {
            self.sleeps.fetch_add(1, Ordering::SeqCst);
            self.now_ms
                .fetch_add(d.as_millis() as u64, Ordering::SeqCst);
        }
    }

    #[test]
    fn token_bucket_spaces_out_queued_calls() {
        let time = Arc::new(VirtualTime {
            now_ms: AtomicU64::new(0),
            sleeps: AtomicUsize::new(0),
        });
        let limiter = RateLimiter::with_time(60, time.clone());
        for _ in 0..120 {
            limiter.acquire();
        }
        // 60 burst tokens, then one per second for the remaining 60
        let elapsed = time.now().as_secs_f64();
        assert!(elapsed >= 59.0, "elapsed {elapsed}");
        assert!(elapsed <= 61.0, "elapsed {elapsed}");
        assert_eq!(time.sleeps.load(Ordering::SeqCst), 60);
    }
}
