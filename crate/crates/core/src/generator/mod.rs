//! Template and slot-set generation from seed examples, through an LLM
//! chat-completions backend or a deterministic offline recombiner.

mod offline;
mod prompt;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{SlotHolderSet, SlotSchema, Template};

pub use offline::{generate_offline, ContractBank, OfflineBackendConfig};
pub use prompt::{build_prompt, parse_generation_output, ParsedAssets};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub schema: SlotSchema,
    pub seed_templates: Vec<Template>,
    pub seed_slot_sets: Vec<SlotHolderSet>,
    pub want_templates: usize,
    pub want_slot_sets: usize,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.seed_templates.is_empty() {
            return Err(GenError::InvalidRequest("no seed template"));
        }
        if self.seed_slot_sets.is_empty() {
            return Err(GenError::InvalidRequest("no seed slot set"));
        }
        Ok(())
    }

    /// Fact templates given to generated templates: those of the first seed.
    pub fn fact_templates(&self) -> &[crate::lang::Atom] {
        self.seed_templates
            .first()
            .map(|t| t.fact_templates.as_slice())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Templates,
    SlotSets,
}

impl AssetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AssetKind::Templates => "templates",
            AssetKind::SlotSets => "slot_sets",
        }
    }
}

/// One chat turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        Message {
            role: String::from(role),
            content: content.into(),
        }
    }
}

pub const DEFAULT_API_KEY_ENV: &str = "PROLEG_LLM_API_KEY";

/// OpenAI-compatible endpoint settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmBackendConfig {
    pub base_url: String,
    pub model_name: String,
    pub api_key_env_var: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: u64,
    /// First backoff delay; doubled after every retry.
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for LlmBackendConfig {
    fn default() -> Self {
        LlmBackendConfig {
            base_url: String::from("http://127.0.0.1:8000"),
            model_name: String::from("gpt-3.5-turbo"),
            api_key_env_var: String::from(DEFAULT_API_KEY_ENV),
            temperature: 0.8,
            max_retries: 3,
            timeout_secs: 60,
            backoff_ms: 500,
            max_in_flight: 4,
        }
    }
}

impl LlmBackendConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GenError::InvalidConfig("temperature must be >= 0"));
        }
        if self.timeout_secs == 0 {
            return Err(GenError::InvalidConfig("timeout must be > 0"));
        }
        if self.max_in_flight == 0 {
            return Err(GenError::InvalidConfig("max_in_flight must be > 0"));
        }
        Ok(())
    }

    /// Chat-completions request body.
    pub fn request_body(&self, messages: &[Message]) -> serde_json::Value {
        serde_json::json!({
            "model": self.model_name,
            "messages": messages,
            "temperature": self.temperature,
        })
    }

    /// Delay before retry number `attempt` (0-based).
    pub fn backoff_for(&self, attempt: u32) -> u64 {
        self.backoff_ms.saturating_mul(1u64 << attempt.min(16))
    }
}

/// Reads `choices[0].message.content` from a chat-completions response.
pub fn response_content(body: &str) -> Result<String, BackendError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| BackendError::Malformed(format!("{e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(String::from)
        .ok_or_else(|| BackendError::Malformed(String::from("no choices[0].message.content")))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("transport failed: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Something that answers a chat turn list with assistant text.
pub trait ChatCompletion {
    fn complete(&mut self, messages: &[Message]) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid generation request: {0}")]
    InvalidRequest(&'static str),
    #[error("invalid backend config: {0}")]
    InvalidConfig(&'static str),
    #[error("no JSON array found in model output")]
    NoJsonFound,
    #[error("offline banks for {contract} are insufficient: {reason}")]
    InsufficientBank { contract: String, reason: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// A dropped item and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub kind: AssetKind,
    pub item: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedAssets {
    pub templates: Vec<Template>,
    pub slot_sets: Vec<SlotHolderSet>,
    pub rejects: Vec<Reject>,
    /// Requested counts that could not be met, by kind.
    pub shortfall: BTreeMap<AssetKind, usize>,
}

pub enum Backend<'a> {
    Llm(&'a mut dyn ChatCompletion),
    Offline(&'a OfflineBackendConfig),
}

pub fn generate_assets(
    backend: Backend<'_>,
    req: &GenerationRequest,
) -> Result<GeneratedAssets, GenError> {
    req.validate()?;
    match backend {
        Backend::Llm(client) => generate_llm(client, req),
        Backend::Offline(cfg) => generate_offline(cfg, req),
    }
}

/// Asks once per kind, then once more for any shortfall.
pub fn generate_llm(
    client: &mut dyn ChatCompletion,
    req: &GenerationRequest,
) -> Result<GeneratedAssets, GenError> {
    req.validate()?;
    let mut out = GeneratedAssets::default();
    for kind in [AssetKind::Templates, AssetKind::SlotSets] {
        let want = match kind {
            AssetKind::Templates => req.want_templates,
            AssetKind::SlotSets => req.want_slot_sets,
        };
        let mut have = 0;
        for _ in 0..2 {
            if have >= want {
                break;
            }
            let mut ask = req.clone();
            match kind {
                AssetKind::Templates => ask.want_templates = want - have,
                AssetKind::SlotSets => ask.want_slot_sets = want - have,
            }
            let raw = client.complete(&build_prompt(&ask, kind))?;
            let parsed = match parse_generation_output(&raw, kind, &req.schema) {
                Ok(p) => p,
                Err(GenError::NoJsonFound) => {
                    out.rejects.push(Reject {
                        kind,
                        item: raw,
                        reason: String::from("no JSON array in reply"),
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            out.rejects.extend(parsed.rejects);
            match kind {
                AssetKind::Templates => {
                    for mut t in parsed.templates {
                        if have == want {
                            break;
                        }
                        let dup = out
                            .templates
                            .iter()
                            .chain(&req.seed_templates)
                            .any(|x| x.text == t.text);
                        if dup {
                            out.rejects.push(Reject {
                                kind,
                                item: t.text,
                                reason: String::from("duplicate template"),
                            });
                            continue;
                        }
                        t.id = format!("llm{}", out.templates.len());
                        t.contract_id = req.schema.contract_id.clone();
                        if t.fact_templates.is_empty() {
                            t.fact_templates = req.fact_templates().to_vec();
                        }
                        out.templates.push(t);
                        have += 1;
                    }
                }
                AssetKind::SlotSets => {
                    for s in parsed.slot_sets {
                        if have == want {
                            break;
                        }
                        out.slot_sets.push(s);
                        have += 1;
                    }
                }
            }
        }
        if have < want {
            out.shortfall.insert(kind, want - have);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
