//! Blocking HTTP client for a local chat-completion service.

use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::config::{ApiFlavor, EndpointConfig, GenerationConfig};
use crate::agent::PromptBundle;
use crate::error::{Error, Result};

/// Safe to share across worker threads.
#[derive(Debug, Clone)]
pub struct LiveClient {
    endpoint: EndpointConfig,
    agent: ureq::Agent,
}

/// Request body for the configured service flavor.
pub fn request_body(flavor: ApiFlavor, bundle: &PromptBundle) -> Value {
    let g: &GenerationConfig = &bundle.generation;
    let messages = json!([
        {"role": "system", "content": bundle.system_text},
        {"role": "user", "content": bundle.user_text},
    ]);
    match flavor {
        ApiFlavor::Ollama => json!({
            "model": g.model_name,
            "messages": messages,
            "stream": false,
            "think": g.thinking_enabled,
            "options": {
                "temperature": g.temperature,
                "top_k": g.top_k,
                "top_p": g.top_p,
                "repeat_penalty": g.repeat_penalty,
                "num_ctx": g.context_window,
            },
        }),
        ApiFlavor::OpenAi => json!({
            "model": g.model_name,
            "messages": messages,
            "stream": false,
            "temperature": g.temperature,
            "top_k": g.top_k,
            "top_p": g.top_p,
            "repetition_penalty": g.repeat_penalty,
            "max_tokens": g.context_window,
        }),
    }
}

/// Extracts the assistant text from either reply shape.
pub fn response_text(body: &Value) -> Option<String> {
    body.pointer("/message/content")
        .or_else(|| body.pointer("/choices/0/message/content"))
        .or_else(|| body.pointer("/choices/0/text"))
        .or_else(|| body.get("response"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

impl LiveClient {
    pub fn new(endpoint: EndpointConfig) -> Result<Self> {
        endpoint.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(endpoint.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(LiveClient { endpoint, agent })
    }

    pub fn endpoint(&self) -> &EndpointConfig {
        &self.endpoint
    }

    fn attempt(&self, body: &Value) -> Result<String> {
        let mut req = self.agent.post(self.endpoint.url());
        if let Some((name, value)) = &self.endpoint.auth_header {
            req = req.header(name.as_str(), value.as_str());
        }
        let started = Instant::now();
        let mut resp = req.send_json(body).map_err(|e| self.transport_error(e, started))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| self.transport_error(e, started))?;
        if self.endpoint.audit {
            log::info!(target: "anchorsim::audit", "request={body} status={status} response={text}");
        }
        if !(200..300).contains(&status) {
            return Err(Error::Http { status, body: text });
        }
        let json: Value = serde_json::from_str(&text).map_err(|e| Error::Transport {
            attempts: 1,
            message: format!("response is not JSON: {e}"),
        })?;
        response_text(&json).ok_or_else(|| Error::Transport {
            attempts: 1,
            message: "response has no message content".into(),
        })
    }

    fn transport_error(&self, e: ureq::Error, started: Instant) -> Error {
        match e {
            ureq::Error::Timeout(_) => Error::ElicitationTimeout {
                after_ms: started.elapsed().as_millis() as u64,
            },
            other => Error::Transport {
                attempts: 1,
                message: other.to_string(),
            },
        }
    }

    /// Sends the prompt, retrying retryable failures with exponential backoff.
    pub fn complete(&self, bundle: &PromptBundle) -> Result<String> {
        let body = request_body(self.endpoint.flavor, bundle);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() && attempt < self.endpoint.max_attempts => {
                    let wait = self.endpoint.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                    log::warn!("attempt {attempt} failed ({e}); retrying in {wait} ms");
                    thread::sleep(Duration::from_millis(wait));
                }
                Err(Error::Transport { message, .. }) => {
                    return Err(Error::Transport { attempts: attempt, message })
                }
                Err(e) => return Err(e),
            }
        }
    }
}
