use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling parameters sent with every completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub top_k: u32,
    pub top_p: f64,
    pub repeat_penalty: f64,
    pub thinking_enabled: bool,
    pub context_window: u32,
    pub model_name: String,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            temperature: 0.6,
            top_k: 20,
            top_p: 0.95,
            repeat_penalty: 1.0,
            thinking_enabled: true,
            context_window: 8000,
            model_name: "qwen3:14b".to_string(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0) {
            return Err(Error::Config(format!("temperature {} < 0", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if self.context_window == 0 {
            return Err(Error::Config("context_window must be positive".into()));
        }
        Ok(())
    }
}

/// Request/response shape of the completion service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiFlavor {
    /// `/api/chat` with an `options` object and a `message` reply.
    Ollama,
    /// `/v1/chat/completions` with top-level sampling fields and a `choices` reply.
    OpenAi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub path: String,
    pub flavor: ApiFlavor,
    /// Header name and value, e.g. `("Authorization", "Bearer ...")`.
    pub auth_header: Option<(String, String)>,
    pub timeout_ms: u64,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    /// Log full request and response bodies at info level.
    pub audit: bool,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:11434".to_string(),
            path: "/api/chat".to_string(),
            flavor: ApiFlavor::Ollama,
            auth_header: None,
            timeout_ms: 120_000,
            max_attempts: 3,
            backoff_ms: 250,
            audit: false,
        }
    }
}

impl EndpointConfig {
    pub fn url(&self) -> String {
        format!(
            "{}/{}",
            self.base_url.trim_end_matches('/'),
            self.path.trim_start_matches('/')
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(Error::Config(format!("endpoint `{}` is not an http(s) URL", self.base_url)));
        }
        Ok(())
    }
}
