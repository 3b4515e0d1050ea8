use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use super::{default_gen_prompts, wrap_chat_instruction, write_generations, GenEvalError, GenPrompt, Generation};
use crate::http::{JsonClient, RetryPolicy};
use crate::scoring::protocol::{GenerateRequest, GenerateResponse, GENERATE_PATH};
use crate::text::derive_seed;

pub const GENERATE_ENDPOINT_ENV: &str = "CBS_GENERATE_ENDPOINT";

/// Follow-up requests made when a backend returns too few completions.
const TOP_UP_ATTEMPTS: usize = 3;

pub trait GenerationBackend: Send + Sync {
    fn model_id(&self) -> &str;

    fn generate(
        &self,
        text: &str,
        n: usize,
        max_tokens: usize,
        seed: Option<u64>,
    ) -> Result<GenerateResponse, GenEvalError>;
}

/// Client for `POST /v1/generate`.
#[derive(Debug, Clone)]
pub struct HttpGenerationBackend {
    client: JsonClient,
    model_id: String,
}

impl HttpGenerationBackend {
    pub fn new(endpoint: &str, model_id: &str, retry: RetryPolicy) -> Self {
        Self {
            client: JsonClient::new(endpoint, retry),
            model_id: model_id.to_string(),
        }
    }
}

impl GenerationBackend for HttpGenerationBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn generate(
        &self,
        text: &str,
        n: usize,
        max_tokens: usize,
        seed: Option<u64>,
    ) -> Result<GenerateResponse, GenEvalError> {
        let req = GenerateRequest {
            model: self.model_id.clone(),
            text: text.to_string(),
            n,
            max_tokens,
            seed,
        };
        Ok(self.client.post(GENERATE_PATH, &req)?)
    }
}

/// Draw `n` continuations of `prompt`.
///
/// Short answers are topped up with further requests (each with its own
/// derived seed); surplus completions are dropped. Chat prompts are sent
/// inside the instruction wrapper, but `prompt_text` keeps the bare prompt.
pub fn sample_generations(
    backend: &dyn GenerationBackend,
    prompt: &GenPrompt,
    n: usize,
    seed: Option<u64>,
    max_tokens: usize,
) -> Result<Vec<Generation>, GenEvalError> {
    prompt.check()?;
    if n == 0 {
        return Err(GenEvalError::ZeroSamples);
    }
    let request_text = if prompt.chat_mode {
        wrap_chat_instruction(prompt, n)?
    } else {
        prompt.text.clone()
    };
    let mut texts: Vec<(String, Option<u64>)> = Vec::with_capacity(n);
    for attempt in 0..=TOP_UP_ATTEMPTS {
        let missing = n - texts.len();
        let attempt_seed = match (seed, attempt) {
            (Some(s), 0) => Some(s),
            (Some(s), k) => Some(derive_seed(s, &["top-up", &k.to_string()])),
            (None, _) => None,
        };
        let resp = backend.generate(&request_text, missing, max_tokens, attempt_seed)?;
        texts.extend(resp.generations.into_iter().take(missing).map(|t| (t, resp.seed)));
        if texts.len() == n {
            break;
        }
        log::warn!(
            "prompt {}: backend returned {} of {n} generations so far",
            prompt.id,
            texts.len()
        );
    }
    if texts.len() < n {
        return Err(GenEvalError::ShortGeneration {
            prompt_id: prompt.id.clone(),
            expected: n,
            got: texts.len(),
        });
    }
    let model_id = backend.model_id();
    Ok(texts
        .into_iter()
        .enumerate()
        .map(|(i, (text, seed))| Generation {
            id: Generation::make_id(model_id, &prompt.id, i),
            gen_prompt_id: prompt.id.clone(),
            aspect_id: prompt.aspect_id.clone(),
            model_id: model_id.to_string(),
            prompt_text: prompt.text.clone(),
            text,
            sample_index: i,
            seed,
            max_tokens,
        })
        .collect())
}

fn default_samples() -> usize {
    25
}

fn default_max_tokens() -> usize {
    64
}

fn default_in_flight() -> usize {
    2
}

/// Configuration for `gen`. Paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub model_id: String,
    /// Falls back to `CBS_GENERATE_ENDPOINT`.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// JSON-lines file of prompts; the built-in set when absent.
    #[serde(default)]
    pub prompts_path: Option<PathBuf>,
    /// Force chat wrapping on (or off) for every prompt.
    #[serde(default)]
    pub chat_mode: Option<bool>,
    #[serde(default = "default_samples")]
    pub samples_per_prompt: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    pub output_path: PathBuf,
}

impl GenConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, GenEvalError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|source| GenEvalError::Io {
            file: path.display().to_string(),
            source,
        })?;
        let mut cfg: GenConfig =
            serde_json::from_str(&raw).map_err(|e| GenEvalError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if cfg.output_path.is_relative() {
            cfg.output_path = base.join(&cfg.output_path);
        }
        if let Some(p) = cfg.prompts_path.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        Ok(cfg)
    }

    pub fn prompts(&self) -> Result<Vec<GenPrompt>, GenEvalError> {
        let mut prompts = match &self.prompts_path {
            None => default_gen_prompts(),
            Some(path) => super::store::read_jsonl(path)?,
        };
        if let Some(chat) = self.chat_mode {
            prompts.iter_mut().for_each(|p| p.chat_mode = chat);
        }
        for p in &prompts {
            p.check()?;
        }
        Ok(prompts)
    }
}

/// Sample every prompt and write the generations file. Prompts run
/// concurrently up to `max_in_flight`; output order follows prompt order.
pub fn run_generation(config: &GenConfig, backend: &dyn GenerationBackend) -> Result<Vec<Generation>, GenEvalError> {
    if config.max_in_flight == 0 {
        return Err(GenEvalError::Config("max_in_flight must be at least 1".into()));
    }
    let prompts = config.prompts()?;
    let slots: Vec<Mutex<Option<Result<Vec<Generation>, GenEvalError>>>> =
        prompts.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|s| {
        for _ in 0..config.max_in_flight.min(prompts.len()).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(prompt) = prompts.get(i) else { break };
                let seed = config.seed.map(|s| derive_seed(s, &[&prompt.id]));
                let out = sample_generations(backend, prompt, config.samples_per_prompt, seed, config.max_tokens);
                *slots[i].lock().expect("slot lock") = Some(out);
            });
        }
    });
    let mut all = Vec::new();
    for slot in slots {
        all.extend(slot.into_inner().expect("slot lock").expect("every prompt ran")?);
    }
    write_generations(&config.output_path, &all)?;
    Ok(all)
}
