//! Text generation backends, the completion cache, and the cascaded
//! current-description -> subsequent-action inference.

mod cache;
mod http;
mod mock;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::Serialize;

pub use cache::GenerationCache;
pub use http::HttpGenerator;
pub use mock::MockGenerator;

use crate::context::ContextTriple;
use crate::error::Result;
use crate::prompt::{
    parse_generation, render_description_prompt, render_subsequent_prompt, DescriptionPair, PromptKind, PromptText, STOP_MARKERS,
};
use crate::vocab::Vocabulary;

pub const DESCRIPTION_MAX_TOKENS: u32 = 260;
pub const SUBSEQUENT_MAX_TOKENS: u32 = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub prompt: PromptText,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
    pub seed: Option<u64>,
}

impl GenerationRequest {
    /// Greedy decoding with the per-kind token limit and the stop markers.
    pub fn new(prompt: PromptText) -> Self {
        let max_tokens = match prompt.kind {
            PromptKind::CurrentDescription => DESCRIPTION_MAX_TOKENS,
            PromptKind::SubsequentAction => SUBSEQUENT_MAX_TOKENS,
        };
        Self { prompt, max_tokens, temperature: 0.0, stop: STOP_MARKERS.iter().map(|s| s.to_string()).collect(), seed: None }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub(crate) fn wire_body(&self) -> WireRequest<'_> {
        WireRequest {
            prompt: &self.prompt.text,
            max_tokens: self.max_tokens,
            temperature: self.temperature,
            stop: &self.stop,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Serialize)]
pub(crate) struct WireRequest<'a> {
    pub prompt: &'a str,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: &'a [String],
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationResponse {
    /// Raw completion, before [`parse_generation`].
    pub text: String,
    pub backend_id: String,
    pub cached: bool,
}

pub trait GenerationBackend: Send + Sync {
    fn id(&self) -> &str;

    fn complete(&self, req: &GenerationRequest) -> Result<String>;
}

pub fn generate(backend: &dyn GenerationBackend, req: &GenerationRequest) -> Result<GenerationResponse> {
    Ok(GenerationResponse { text: backend.complete(req)?, backend_id: backend.id().to_owned(), cached: false })
}

/// Serve from the cache when possible, otherwise call the backend and
/// persist the completion.
pub fn cached_generate(
    cache: &GenerationCache,
    backend: &dyn GenerationBackend,
    req: &GenerationRequest,
) -> Result<GenerationResponse> {
    let key = GenerationCache::key(req);
    if let Some(text) = cache.get(&key) {
        return Ok(GenerationResponse { text, backend_id: backend.id().to_owned(), cached: true });
    }
    let resp = generate(backend, req)?;
    cache.put(&key, &resp.text)?;
    Ok(resp)
}

/// Counts backend invocations; used for run manifests and cache checks.
pub struct CountingBackend {
    inner: Arc<dyn GenerationBackend>,
    calls: AtomicUsize,
}

impl CountingBackend {
    pub fn new(inner: Arc<dyn GenerationBackend>) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl GenerationBackend for CountingBackend {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, req: &GenerationRequest) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(req)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationParams {
    pub temperature: f64,
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self { temperature: 0.0, seed: None }
    }
}

/// The commonsense-reasoning stage: context triple -> current description
/// -> subsequent action.
pub struct Reasoner {
    backend: Arc<dyn GenerationBackend>,
    cache: Option<GenerationCache>,
    vocab: Arc<Vocabulary>,
    params: GenerationParams,
}

impl Reasoner {
    pub fn new(
        backend: Arc<dyn GenerationBackend>,
        cache: Option<GenerationCache>,
        vocab: Arc<Vocabulary>,
        params: GenerationParams,
    ) -> Self {
        Self { backend, cache, vocab, params }
    }

    fn complete(&self, prompt: PromptText) -> Result<String> {
        let kind = prompt.kind;
        let req = GenerationRequest::new(prompt).with_seed(self.params.seed).with_temperature(self.params.temperature);
        let resp = match &self.cache {
            Some(cache) => cached_generate(cache, self.backend.as_ref(), &req)?,
            None => generate(self.backend.as_ref(), &req)?,
        };
        parse_generation(&resp.text, kind)
    }

    pub fn describe_frame(&self, triple: &ContextTriple) -> Result<String> {
        self.complete(render_description_prompt(triple, &self.vocab)?)
    }

    pub fn infer_subsequent(&self, current: &str) -> Result<String> {
        self.complete(render_subsequent_prompt(current)?)
    }

    /// Both stages in order; the subsequent action is conditioned on the
    /// generated description.
    pub fn describe_and_reason(&self, triple: &ContextTriple) -> Result<DescriptionPair> {
        let current = self.describe_frame(triple)?;
        let subsequent = self.infer_subsequent(&current)?;
        Ok(DescriptionPair { current, subsequent })
    }
}
