//! Model client for an OpenAI-compatible chat endpoint with image input.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use base64::Engine as _;
use chartrefine_core::prompts::{PromptTemplates, CONFIRM_TOKEN};
use chartrefine_core::refine::{ClientError, ModelClient, Verdict};
use chartrefine_core::{ParseResult, PixelPoint, Raster};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::io::encode_png;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    /// Base URL up to and including the API version, e.g. `http://host:8000/v1`.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth header.
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Requests in flight across all charts of one run.
    pub max_in_flight: usize,
    /// Attempts per request, the first included.
    pub max_attempts: u32,
    pub backoff_initial_ms: u64,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "chart-parser".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 120,
            max_in_flight: 4,
            max_attempts: 3,
            backoff_initial_ms: 500,
            temperature: 0.0,
            max_tokens: 4096,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub struct InFlight {
    used: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

pub struct Permit<'a>(&'a InFlight);

impl InFlight {
    pub fn new(cap: usize) -> Arc<Self> {
        Arc::new(Self {
            used: Mutex::new(0),
            freed: Condvar::new(),
            cap: cap.max(1),
        })
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.cap {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

/// One chart's connection to the endpoint. Clones share the in-flight cap.
#[derive(Clone)]
pub struct RemoteClient {
    config: EndpointConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    prompts: PromptTemplates,
    limiter: Arc<InFlight>,
    /// Transport retries so far; not inference calls.
    pub retries: u32,
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

impl RemoteClient {
    pub fn new(config: EndpointConfig, prompts: PromptTemplates, limiter: Arc<InFlight>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self {
            config,
            agent,
            api_key,
            prompts,
            limiter,
            retries: 0,
        }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn body(&self, prompt: &str, images: &[&Raster]) -> Value {
        let mut content = vec![json!({"type": "text", "text": prompt})];
        for img in images {
            let b64 = base64::engine::general_purpose::STANDARD.encode(encode_png(img));
            content.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:image/png;base64,{b64}")}
            }));
        }
        json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "messages": [{"role": "user", "content": content}],
        })
    }

    fn attempt(&self, body: &Value) -> Result<String, Failure> {
        let _permit = self.limiter.acquire();
        let mut req = self.agent.post(&self.endpoint());
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        match status {
            200..=299 => Ok(text),
            429 | 500..=599 => Err(Failure::Retryable(format!("HTTP {status}: {}", snippet(&text)))),
            _ => Err(Failure::Fatal(format!("HTTP {status}: {}", snippet(&text)))),
        }
    }

    /// Sends one chat request, retrying transport failures with exponential
    /// backoff, and returns the assistant text.
    fn chat(&mut self, prompt: &str, images: &[&Raster]) -> Result<String, ClientError> {
        let body = self.body(prompt, images);
        let attempts = self.config.max_attempts.max(1);
        let mut delay = Duration::from_millis(self.config.backoff_initial_ms);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(&body) {
                Ok(text) => return reply_text(&text),
                Err(Failure::Fatal(m)) => return Err(ClientError::Transport(m)),
                Err(Failure::Retryable(m)) => {
                    last = m;
                    if attempt < attempts {
                        self.retries += 1;
                        log::warn!(
                            "request failed ({last}); retry {attempt} of {} in {delay:?}",
                            attempts - 1
                        );
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(ClientError::Transport(format!(
            "{attempts} attempts failed, last: {last}"
        )))
    }
}

fn snippet(s: &str) -> &str {
    let end = s.char_indices().nth(200).map_or(s.len(), |(i, _)| i);
    &s[..end]
}

/// Assistant message text of a chat-completions response.
pub fn reply_text(raw: &str) -> Result<String, ClientError> {
    let protocol = || ClientError::Protocol { raw: raw.to_string() };
    let v: Value = serde_json::from_str(raw).map_err(|_| protocol())?;
    let content = &v["choices"][0]["message"]["content"];
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join("")),
        _ => Err(protocol()),
    }
}

/// First JSON value opening with `open` at any position in `text` for which
/// `accept` succeeds.
fn first_json<T>(text: &str, open: char, accept: impl Fn(Value) -> Option<T>) -> Option<T> {
    text.match_indices(open).find_map(|(i, _)| {
        let mut it = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        it.next()?.ok().and_then(&accept)
    })
}

fn as_points(v: Value) -> Option<Vec<PixelPoint>> {
    v.as_array()?
        .iter()
        .map(|p| {
            let pair = p.as_array()?;
            if pair.len() != 2 {
                return None;
            }
            let x = pair[0].as_f64()?.round();
            let y = pair[1].as_f64()?.round();
            let range = f64::from(i32::MIN)..=f64::from(i32::MAX);
            (range.contains(&x) && range.contains(&y)).then(|| PixelPoint::new(x as i32, y as i32))
        })
        .collect()
}

/// Extracts the first `[[x, y], ...]` array from a model reply.
pub fn parse_points(reply: &str) -> Result<Vec<PixelPoint>, ClientError> {
    first_json(reply, '[', as_points).ok_or_else(|| ClientError::Protocol { raw: reply.into() })
}

pub fn parse_verdict(reply: &str) -> Result<Verdict, ClientError> {
    let bare = reply
        .trim()
        .trim_matches(|c: char| c == '"' || c == '.' || c == '`' || c.is_whitespace());
    if bare.eq_ignore_ascii_case(CONFIRM_TOKEN) {
        return Ok(Verdict::Confirm);
    }
    if let Some(points) = first_json(reply, '[', as_points) {
        return Ok(Verdict::Corrected(points));
    }
    if reply.contains(CONFIRM_TOKEN) {
        return Ok(Verdict::Confirm);
    }
    Err(ClientError::Protocol { raw: reply.into() })
}

pub fn parse_decode(reply: &str) -> Result<ParseResult, ClientError> {
    first_json(reply, '{', |v| {
        let r: ParseResult = serde_json::from_value(v).ok()?;
        r.validate().ok().map(|_| r)
    })
    .ok_or_else(|| ClientError::Protocol { raw: reply.into() })
}

impl ModelClient for RemoteClient {
    fn localize(&mut self, image: &Raster) -> Result<Vec<PixelPoint>, ClientError> {
        let prompt = self.prompts.localize(image.width(), image.height());
        let reply = self.chat(&prompt, &[image])?;
        parse_points(&reply)
    }

    fn verify(&mut self, original: &Raster, overlaid: &Raster, current: &[PixelPoint]) -> Result<Verdict, ClientError> {
        let prompt = self.prompts.verify(original.width(), original.height(), current);
        let reply = self.chat(&prompt, &[original, overlaid])?;
        parse_verdict(&reply)
    }

    fn decode(&mut self, image: &Raster, anchors: Option<&[PixelPoint]>) -> Result<ParseResult, ClientError> {
        let prompt = self.prompts.decode(image.width(), image.height(), anchors);
        let reply = self.chat(&prompt, &[image])?;
        parse_decode(&reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_from_bare_array() {
        assert_eq!(
            parse_points("[[10,20],[30,40]]").unwrap(),
            [PixelPoint::new(10, 20), PixelPoint::new(30, 40)]
        );
        assert_eq!(parse_points("[]").unwrap(), []);
    }

    #[test]
    fn points_inside_prose() {
        let reply = "Sure! The points are [[1, 2], [3.4, 5.6]] as requested [see above].";
        assert_eq!(
            parse_points(reply).unwrap(),
            [PixelPoint::new(1, 2), PixelPoint::new(3, 6)]
        );
        // an earlier bracket that is not a point list is skipped
        assert_eq!(parse_points("[note] [[7,8]]").unwrap(), [PixelPoint::new(7, 8)]);
        assert!(matches!(parse_points("no idea"), Err(ClientError::Protocol { .. })));
    }

    #[test]
    fn verdicts() {
        assert_eq!(parse_verdict("CONFIRM").unwrap(), Verdict::Confirm);
        assert_eq!(parse_verdict(" \"CONFIRM\".\n").unwrap(), Verdict::Confirm);
        assert_eq!(
            parse_verdict("Fixed: [[1,1]]").unwrap(),
            Verdict::Corrected(vec![PixelPoint::new(1, 1)])
        );
        assert!(parse_verdict("hmm").is_err());
    }

    #[test]
    fn decode_reply_with_fence() {
        let reply = "```json\n{\"chart_type\": \"bar\", \"series\": [{\"label\": \"A\", \"points\": [{\"category\": \"x\", \"y\": 1.5}]}]}\n```";
        let r = parse_decode(reply).unwrap();
        assert_eq!(r.series[0].points[0].y, 1.5);
        assert!(parse_decode("{\"series\": 3}").is_err());
    }

    #[test]
    fn chat_completion_text() {
        let raw = r#"{"choices":[{"message":{"role":"assistant","content":"CONFIRM"}}]}"#;
        assert_eq!(reply_text(raw).unwrap(), "CONFIRM");
        let raw =
            r#"{"choices":[{"message":{"content":[{"type":"text","text":"[[1,"},{"type":"text","text":"2]]"}]}}]}"#;
        assert_eq!(reply_text(raw).unwrap(), "[[1,2]]");
        assert!(reply_text("oops").is_err());
    }

    #[test]
    fn in_flight_cap_blocks_until_release() {
        let lim = InFlight::new(1);
        let p = lim.acquire();
        let l2 = lim.clone();
        let h = std::thread::spawn(move || {
            let _q = l2.acquire();
        });
        std::thread::sleep(Duration::from_millis(20));
        assert!(!h.is_finished());
        drop(p);
        h.join().unwrap();
    }
}
