//! HTTP pilot for OpenAI-style and Gemini-style chat endpoints.

use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{check_response, Decision, DecisionContext, Pilot, PilotConfig, PilotError, Provider};

/// One provider call, ready to send.
#[derive(Clone, Debug, PartialEq)]
pub struct ProviderRequest {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Value,
}

impl ProviderRequest {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        provider: Provider,
        endpoint: &str,
        model: &str,
        key: &str,
        temperature: f64,
        instructions: &str,
        user: &str,
        image_b64: &str,
    ) -> ProviderRequest {
        let endpoint = endpoint.trim_end_matches('/');
        match provider {
            Provider::Gemini => {
                let mut parts = vec![json!({ "text": user })];
                if !image_b64.is_empty() {
                    parts.push(json!({ "inline_data": { "mime_type": "image/png", "data": image_b64 } }));
                }
                ProviderRequest {
                    url: format!("{endpoint}/models/{model}:generateContent"),
                    headers: vec![("x-goog-api-key".into(), key.into())],
                    body: json!({
                        "systemInstruction": { "parts": [{ "text": instructions }] },
                        "contents": [{ "role": "user", "parts": parts }],
                        "generationConfig": { "temperature": temperature },
                    }),
                }
            }
            _ => {
                let mut content = vec![json!({ "type": "text", "text": user })];
                if !image_b64.is_empty() {
                    content.push(json!({
                        "type": "image_url",
                        "image_url": { "url": format!("data:image/png;base64,{image_b64}") },
                    }));
                }
                ProviderRequest {
                    url: format!("{endpoint}/chat/completions"),
                    headers: vec![("Authorization".into(), format!("Bearer {key}"))],
                    body: json!({
                        "model": model,
                        "temperature": temperature,
                        "messages": [
                            { "role": "system", "content": instructions },
                            { "role": "user", "content": content },
                        ],
                    }),
                }
            }
        }
    }

    /// Pulls the assistant text out of a provider reply.
    pub fn extract_text(provider: Provider, reply: &Value) -> Option<String> {
        match provider {
            Provider::Gemini => {
                let parts = reply.pointer("/candidates/0/content/parts")?.as_array()?;
                let text: String = parts
                    .iter()
                    .filter_map(|p| p.get("text").and_then(Value::as_str))
                    .collect();
                Some(text)
            }
            _ => reply
                .pointer("/choices/0/message/content")?
                .as_str()
                .map(str::to_string),
        }
    }
}

pub struct LivePilot {
    provider: Provider,
    model: String,
    endpoint: String,
    key: String,
    temperature: f64,
    max_retries: u32,
    agent: ureq::Agent,
}

impl LivePilot {
    pub fn from_config(config: &PilotConfig) -> Result<Self, PilotError> {
        let var = config
            .provider
            .key_var()
            .ok_or_else(|| PilotError::Transport(format!("{:?} is not a live provider", config.provider)))?;
        let key = match &config.api_key {
            Some(k) => k.clone(),
            None => std::env::var(var).map_err(|_| PilotError::MissingApiKey(var))?,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(LivePilot {
            provider: config.provider,
            model: config.model_name().to_string(),
            endpoint: config
                .endpoint
                .clone()
                .unwrap_or_else(|| config.provider.default_endpoint().to_string()),
            key,
            temperature: config.temperature,
            max_retries: config.max_retries,
            agent,
        })
    }

    fn send(&self, req: &ProviderRequest) -> Result<String, PilotError> {
        let mut call = self.agent.post(&req.url);
        for (k, v) in &req.headers {
            call = call.header(k, v);
        }
        let mut resp = call.send_json(&req.body).map_err(map_err)?;
        let code = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(map_err)?;
        if !(200..300).contains(&code) {
            return Err(PilotError::HttpStatus { code, body });
        }
        Ok(body)
    }
}

fn map_err(e: ureq::Error) -> PilotError {
    match e {
        ureq::Error::Timeout(_) => PilotError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => PilotError::Timeout,
        other => PilotError::Transport(other.to_string()),
    }
}

impl Pilot for LivePilot {
    fn label(&self) -> String {
        self.model.clone()
    }

    fn needs_frames(&self) -> bool {
        true
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision, PilotError> {
        let started = Instant::now();
        let instructions = ctx.bundle.instructions();
        let base_user = ctx.bundle.user_text();
        let mut history = Vec::new();
        let mut feedback = String::new();
        let mut last = (Vec::new(), String::new());
        for attempt in 1..=self.max_retries + 1 {
            let user = format!("{base_user}{feedback}");
            let req = ProviderRequest::build(
                self.provider,
                &self.endpoint,
                &self.model,
                &self.key,
                self.temperature,
                &instructions,
                &user,
                &ctx.bundle.frontal_image,
            );
            let body = self.send(&req)?;
            let raw = serde_json::from_str::<Value>(&body)
                .ok()
                .and_then(|v| ProviderRequest::extract_text(self.provider, &v));
            let outcome = match &raw {
                Some(text) => check_response(text, ctx.state),
                None => Err(vec!["provider reply has no message text".to_string()]),
            };
            let raw = raw.unwrap_or(body);
            match outcome {
                Ok(response) => {
                    return Ok(Decision {
                        response,
                        raw,
                        attempts: attempt,
                        violations: history,
                        latency_ms: Some(started.elapsed().as_millis() as u64),
                    })
                }
                Err(v) => {
                    feedback = format!(
                        "\n\n## CORRECTION\nYour previous answer was rejected: {}. Reply again with a single valid JSON object.\n",
                        v.join("; ")
                    );
                    history.extend(v.iter().cloned());
                    last = (v, raw);
                }
            }
        }
        Err(PilotError::RetriesExhausted {
            attempts: self.max_retries + 1,
            last: last.0,
            raw: last.1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn openai_request_shape() {
        let r = ProviderRequest::build(Provider::OpenAi, "http://h/v1/", "gpt-4.1", "k", 0.0, "sys", "usr", "QUJD");
        assert_eq!(r.url, "http://h/v1/chat/completions");
        assert_eq!(r.headers, [("Authorization".to_string(), "Bearer k".to_string())]);
        assert_eq!(r.body["messages"][0]["content"], "sys");
        assert_eq!(r.body["messages"][1]["content"][1]["image_url"]["url"], "data:image/png;base64,QUJD");
        let reply = json!({"choices":[{"message":{"content":"hi"}}]});
        assert_eq!(ProviderRequest::extract_text(Provider::OpenAi, &reply).as_deref(), Some("hi"));
    }

    #[test]
    fn gemini_request_shape() {
        let r = ProviderRequest::build(Provider::Gemini, "http://h", "gemini-2.5-flash", "k", 0.0, "sys", "usr", "");
        assert_eq!(r.url, "http://h/models/gemini-2.5-flash:generateContent");
        assert_eq!(r.headers[0].0, "x-goog-api-key");
        assert_eq!(r.body["contents"][0]["parts"].as_array().unwrap().len(), 1);
        let reply = json!({"candidates":[{"content":{"parts":[{"text":"a"},{"text":"b"}]}}]});
        assert_eq!(ProviderRequest::extract_text(Provider::Gemini, &reply).as_deref(), Some("ab"));
        assert_eq!(ProviderRequest::extract_text(Provider::Gemini, &json!({})), None);
    }

    #[test]
    fn missing_key_is_reported() {
        let mut cfg = PilotConfig::new(Provider::Gemini);
        cfg.endpoint = Some("http://127.0.0.1:9".into());
        if std::env::var("GEMINI_API_KEY").is_err() {
            assert_eq!(LivePilot::from_config(&cfg).err(), Some(PilotError::MissingApiKey("GEMINI_API_KEY")));
        }
        cfg.api_key = Some("k".into());
        assert!(LivePilot::from_config(&cfg).is_ok());
    }
}
