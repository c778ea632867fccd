//! Provider wire formats. Every adapter takes the same request (system text,
//! user text, optional PNG) and yields visible text plus any separate reasoning.

use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde_json::{json, Map, Value};

use crate::config::{ModelConfig, ProviderKind};

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderRequest<'a> {
    pub system: &'a str,
    pub user: &'a str,
    pub image_png: Option<&'a [u8]>,
    /// Spec id; only used by canned providers to pick a response file.
    pub spec_key: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderReply {
    pub text: String,
    pub reasoning: Option<String>,
}

/// A prepared HTTP call.
#[derive(Debug, Clone, PartialEq)]
pub struct HttpCall {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Value,
}

fn merge_extra(body: &mut Value, extra: &Map<String, Value>) {
    if let Value::Object(obj) = body {
        for (k, v) in extra {
            obj.insert(k.clone(), v.clone());
        }
    }
}

fn data_url(png: &[u8]) -> String {
    format!("data:image/png;base64,{}", B64.encode(png))
}

/// Builds the HTTP call for a network provider. `key` is the resolved credential.
pub fn build_call(cfg: &ModelConfig, req: &ProviderRequest<'_>, key: Option<&str>) -> Option<HttpCall> {
    let mut headers = vec![("content-type".to_string(), "application/json".to_string())];
    let (url, mut body) = match cfg.kind {
        ProviderKind::Static => return None,
        ProviderKind::Openai | ProviderKind::OpenaiCompatible => {
            if let Some(k) = key {
                headers.push(("authorization".into(), format!("Bearer {k}")));
            }
            let user = match req.image_png {
                None => json!(req.user),
                Some(png) => json!([
                    {"type": "text", "text": req.user},
                    {"type": "image_url", "image_url": {"url": data_url(png)}},
                ]),
            };
            let tokens_field = if cfg.kind == ProviderKind::Openai {
                "max_completion_tokens"
            } else {
                "max_tokens"
            };
            let body = json!({
                "model": cfg.api_model,
                "messages": [
                    {"role": "system", "content": req.system},
                    {"role": "user", "content": user},
                ],
                tokens_field: cfg.max_new_tokens,
            });
            (format!("{}/chat/completions", cfg.endpoint), body)
        }
        ProviderKind::Anthropic => {
            if let Some(k) = key {
                headers.push(("x-api-key".into(), k.to_string()));
            }
            headers.push(("anthropic-version".into(), "2023-06-01".into()));
            let mut content = Vec::new();
            if let Some(png) = req.image_png {
                content.push(json!({
                    "type": "image",
                    "source": {"type": "base64", "media_type": "image/png", "data": B64.encode(png)},
                }));
            }
            content.push(json!({"type": "text", "text": req.user}));
            let mut body = json!({
                "model": cfg.api_model,
                "max_tokens": cfg.max_new_tokens,
                "system": req.system,
                "messages": [{"role": "user", "content": content}],
            });
            if cfg.thinking {
                body["thinking"] = json!({"type": "enabled", "budget_tokens": cfg.max_new_tokens / 2});
            }
            (format!("{}/v1/messages", cfg.endpoint), body)
        }
        ProviderKind::Gemini => {
            if let Some(k) = key {
                headers.push(("x-goog-api-key".into(), k.to_string()));
            }
            let mut parts = Vec::new();
            if let Some(png) = req.image_png {
                parts.push(json!({"inline_data": {"mime_type": "image/png", "data": B64.encode(png)}}));
            }
            parts.push(json!({"text": req.user}));
            let mut gen = json!({"maxOutputTokens": cfg.max_new_tokens});
            if cfg.thinking {
                gen["thinkingConfig"] = json!({"includeThoughts": true});
            }
            let body = json!({
                "systemInstruction": {"parts": [{"text": req.system}]},
                "contents": [{"role": "user", "parts": parts}],
                "generationConfig": gen,
            });
            (format!("{}/v1beta/models/{}:generateContent", cfg.endpoint, cfg.api_model), body)
        }
    };
    merge_extra(&mut body, &cfg.extra);
    Some(HttpCall { url, headers, body })
}

fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        // Some compatible servers return content as a list of parts.
        Value::Array(parts) => {
            let texts: Vec<&str> = parts.iter().filter_map(|p| p.get("text")?.as_str()).collect();
            (!texts.is_empty()).then(|| texts.concat())
        }
        _ => None,
    }
}

fn joined(parts: Vec<&str>) -> Option<String> {
    (!parts.is_empty()).then(|| parts.join("\n"))
}

/// Decodes a provider response body.
pub fn parse_reply(kind: ProviderKind, body: &Value) -> Result<ProviderReply, String> {
    match kind {
        ProviderKind::Openai | ProviderKind::OpenaiCompatible => {
            let msg = body
                .pointer("/choices/0/message")
                .ok_or("response has no choices[0].message")?;
            let text = msg.get("content").and_then(text_of).unwrap_or_default();
            let reasoning = msg
                .get("reasoning_content")
                .or_else(|| msg.get("reasoning"))
                .and_then(Value::as_str)
                .map(str::to_string);
            Ok(ProviderReply { text, reasoning })
        }
        ProviderKind::Anthropic => {
            let blocks = body
                .get("content")
                .and_then(Value::as_array)
                .ok_or("response has no content array")?;
            let pick = |ty: &str, field: &str| -> Vec<&str> {
                blocks
                    .iter()
                    .filter(|b| b.get("type").and_then(Value::as_str) == Some(ty))
                    .filter_map(|b| b.get(field)?.as_str())
                    .collect()
            };
            Ok(ProviderReply {
                text: pick("text", "text").concat(),
                reasoning: joined(pick("thinking", "thinking")),
            })
        }
        ProviderKind::Gemini => {
            let parts = body
                .pointer("/candidates/0/content/parts")
                .and_then(Value::as_array)
                .ok_or("response has no candidates[0].content.parts")?;
            let thought = |p: &Value| p.get("thought").and_then(Value::as_bool).unwrap_or(false);
            let visible: Vec<&str> =
                parts.iter().filter(|p| !thought(p)).filter_map(|p| p.get("text")?.as_str()).collect();
            let hidden: Vec<&str> =
                parts.iter().filter(|p| thought(p)).filter_map(|p| p.get("text")?.as_str()).collect();
            Ok(ProviderReply { text: visible.concat(), reasoning: joined(hidden) })
        }
        ProviderKind::Static => Err("static providers have no wire format".into()),
    }
}

/// Spec ids contain `/`, `@` and `+`; file names use `_` in their place.
pub fn spec_file_stem(spec_key: &str) -> String {
    spec_key.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Candidate files for a canned response, most specific first.
pub fn canned_candidates(dir: &Path, model_id: &str, spec_key: &str) -> Vec<PathBuf> {
    let model = spec_file_stem(model_id);
    vec![
        dir.join(&model).join(format!("{}.txt", spec_file_stem(spec_key))),
        dir.join(&model).join("default.txt"),
        dir.join(format!("{model}.txt")),
        dir.join("default.txt"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Roster;

    fn req(image: Option<&[u8]>) -> ProviderRequest<'_> {
        ProviderRequest { system: "sys", user: "usr", image_png: image, spec_key: "walking/base" }
    }

    #[test]
    fn openai_body() {
        let cfg = Roster::builtin().model("gpt-4o-2024-11-20").unwrap();
        let call = build_call(cfg, &req(Some(&[1, 2, 3])), Some("k")).unwrap();
        assert_eq!(call.url, "https://api.openai.com/v1/chat/completions");
        assert!(call.headers.contains(&("authorization".into(), "Bearer k".into())));
        assert_eq!(call.body["max_completion_tokens"], 32768);
        assert_eq!(call.body["messages"][0]["content"], "sys");
        assert_eq!(call.body["messages"][1]["content"][1]["image_url"]["url"], "data:image/png;base64,AQID");

        let compat = Roster::builtin().model("qwen2.5-72b-instruct").unwrap();
        let call = build_call(compat, &req(None), Some("k")).unwrap();
        assert_eq!(call.body["max_tokens"], 32768);
        assert_eq!(call.body["messages"][1]["content"], "usr");
    }

    #[test]
    fn anthropic_thinking_body() {
        let cfg = Roster::builtin().model("claude-opus-4-20250514-thinking").unwrap();
        let call = build_call(cfg, &req(Some(&[0])), Some("k")).unwrap();
        assert_eq!(call.url, "https://api.anthropic.com/v1/messages");
        assert_eq!(call.body["model"], "claude-opus-4-20250514");
        assert_eq!(call.body["thinking"]["budget_tokens"], 16384);
        assert_eq!(call.body["messages"][0]["content"][0]["type"], "image");
        assert_eq!(call.body["messages"][0]["content"][1]["text"], "usr");
    }

    #[test]
    fn gemini_body() {
        let cfg = Roster::builtin().model("gemini-2.5-pro").unwrap();
        let call = build_call(cfg, &req(None), Some("k")).unwrap();
        assert!(call.url.ends_with("/v1beta/models/gemini-2.5-pro:generateContent"));
        assert_eq!(call.body["generationConfig"]["maxOutputTokens"], 32768);
        assert_eq!(call.body["contents"][0]["parts"][0]["text"], "usr");
    }

    #[test]
    fn replies_separate_reasoning() {
        let oa = json!({"choices": [{"message": {"content": "hi", "reasoning_content": "hmm"}}]});
        let r = parse_reply(ProviderKind::OpenaiCompatible, &oa).unwrap();
        assert_eq!((r.text.as_str(), r.reasoning.as_deref()), ("hi", Some("hmm")));

        let an = json!({"content": [
            {"type": "thinking", "thinking": "plan"},
            {"type": "text", "text": "a"},
            {"type": "text", "text": "b"},
        ]});
        let r = parse_reply(ProviderKind::Anthropic, &an).unwrap();
        assert_eq!((r.text.as_str(), r.reasoning.as_deref()), ("ab", Some("plan")));

        let ge = json!({"candidates": [{"content": {"parts": [
            {"text": "idea", "thought": true},
            {"text": "out"},
        ]}}]});
        let r = parse_reply(ProviderKind::Gemini, &ge).unwrap();
        assert_eq!((r.text.as_str(), r.reasoning.as_deref()), ("out", Some("idea")));

        assert!(parse_reply(ProviderKind::Openai, &json!({"error": "x"})).is_err());
    }

    #[test]
    fn canned_lookup_order() {
        let c = canned_candidates(Path::new("/r"), "m1", "walking/happy@10+left");
        assert_eq!(c[0], Path::new("/r/m1/walking_happy_10_left.txt"));
        assert_eq!(c[3], Path::new("/r/default.txt"));
    }
}
