use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::provider::{DescribeRequest, ProviderError, VlmOp, VlmProvider};
use super::LabeledBox;
use crate::net::record_outbound;

/// Environment variable holding the model API key.
pub const VLM_KEY_ENV: &str = "AUTOTOUR_VLM_KEY";

/// Settings for an OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpVlmSettings {
    pub endpoint: String,
    pub model: String,
    pub timeout_ms: u64,
    pub max_tokens: u32,
}

impl Default for HttpVlmSettings {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            timeout_ms: 60_000,
            max_tokens: 1024,
        }
    }
}

pub struct HttpVlmProvider {
    settings: HttpVlmSettings,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for HttpVlmProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpVlmProvider")
            .field("settings", &self.settings)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

const GROUND_PROMPT: &str = "Locate the feature described below in the image. Reply with JSON only: \
{\"label\": <label>, \"bounding_box\": [x_min, y_min, x_max, y_max]} using coordinates relative to the \
image size in [0, 1], origin at the top-left. If the feature is not visible reply {\"found\": false}.\n\nFeature: ";

const FIX_PROMPT: &str = "Judge whether the bounding box below adequately covers the named feature in the image. \
Reply with JSON only: {\"label\": <label>, \"modified\": \"yes\" or \"no\", \"bounding_box\": [x_min, y_min, x_max, y_max]} \
in relative coordinates. Use \"no\" and repeat the box when it is adequate.\n\n";

impl HttpVlmProvider {
    /// Reads the key from `AUTOTOUR_VLM_KEY`.
    pub fn from_env(settings: HttpVlmSettings) -> Result<Self, ProviderError> {
        let key = std::env::var(VLM_KEY_ENV)
            .map_err(|_| ProviderError::Config(format!("{VLM_KEY_ENV} is not set")))?;
        Self::new(settings, key)
    }

    pub fn new(settings: HttpVlmSettings, api_key: String) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(settings.timeout_ms))
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self {
            settings,
            api_key,
            client,
        })
    }

    fn image_part(photo: &[u8]) -> Value {
        let mime = if photo.starts_with(b"\x89PNG") { "image/png" } else { "image/jpeg" };
        let data = base64::engine::general_purpose::STANDARD.encode(photo);
        json!({"type": "image_url", "image_url": {"url": format!("data:{mime};base64,{data}")}})
    }

    fn complete(&self, op: VlmOp, text: &str, photo: &[u8]) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.settings.model,
            "max_tokens": self.settings.max_tokens,
            "temperature": 0,
            "messages": [{
                "role": "user",
                "content": [Self::image_part(photo), {"type": "text", "text": text}],
            }],
        });
        log::debug!("{} request to {}", op.as_str(), self.settings.endpoint);
        record_outbound();
        let resp = self
            .client
            .post(&self.settings.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    ProviderError::Timeout(self.settings.timeout_ms)
                } else {
                    ProviderError::Transport(e.without_url().to_string())
                }
            })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ProviderError::Transport(format!("HTTP {status}")));
        }
        let v: Value = resp.json().map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::BadResponse("missing choices[0].message.content".into()))
    }
}

impl VlmProvider for HttpVlmProvider {
    fn name(&self) -> &str {
        &self.settings.model
    }

    fn detect(&self, prompt: &str, photo: &[u8]) -> Result<String, ProviderError> {
        self.complete(VlmOp::Detect, prompt, photo)
    }

    fn ground(&self, photo: &[u8], label: &str) -> Result<String, ProviderError> {
        self.complete(VlmOp::Ground, &format!("{GROUND_PROMPT}{label}"), photo)
    }

    fn fix(&self, photo: &[u8], draft: &LabeledBox) -> Result<String, ProviderError> {
        let draft_json = serde_json::to_string(draft).expect("plain data serializes");
        self.complete(VlmOp::Fix, &format!("{FIX_PROMPT}{draft_json}"), photo)
    }

    fn describe(&self, photo: &[u8], request: &DescribeRequest) -> Result<String, ProviderError> {
        self.complete(VlmOp::Describe, &request.prompt(), photo)
    }

    fn probe(&self) -> bool {
        record_outbound();
        self.client.head(&self.settings.endpoint).send().is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn serve_once(status: &str, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let status = status.to_string();
        let h = std::thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(s.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            write!(
                s,
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            head + &String::from_utf8(buf).unwrap()
        });
        (format!("http://{addr}/v1/chat/completions"), h)
    }

    fn provider(endpoint: String) -> HttpVlmProvider {
        let settings = HttpVlmSettings {
            endpoint,
            timeout_ms: 5_000,
            ..Default::default()
        };
        HttpVlmProvider::new(settings, "secret-key".into()).unwrap()
    }

    #[test]
    fn chat_completion_round_trip() {
        let (url, h) = serve_once("200 OK", r#"{"choices":[{"message":{"content":"hello"}}]}"#);
        let p = provider(url);
        let before = crate::net::outbound_requests();
        assert_eq!(p.detect("prompt text", b"\x89PNGdata").unwrap(), "hello");
        assert!(crate::net::outbound_requests() > before);
        let req = h.join().unwrap();
        assert!(req.to_ascii_lowercase().contains("authorization: bearer secret-key"));
        assert!(req.contains("data:image/png;base64,"));
        assert!(req.contains("prompt text"));
    }

    #[test]
    fn http_error_is_transport() {
        let (url, h) = serve_once("500 Internal Server Error", "{}");
        let p = provider(url);
        assert!(matches!(p.ground(b"", "x"), Err(ProviderError::Transport(_))));
        h.join().unwrap();
    }

    #[test]
    fn debug_redacts_key() {
        let p = provider("http://127.0.0.1:9/".into());
        assert!(!format!("{p:?}").contains("secret-key"));
    }
}
