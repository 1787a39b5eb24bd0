use serde::Deserialize;

use super::{GenerationBackend, GenerationRequest};
use crate::error::Result;
use crate::util::{HttpSettings, JsonPoster};

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

/// Client for `POST {base_url}/v1/generate`.
pub struct HttpGenerator {
    id: String,
    poster: JsonPoster,
}

impl HttpGenerator {
    pub fn new(settings: HttpSettings) -> Result<Self> {
        Ok(Self { id: format!("http:{}", settings.base_url), poster: JsonPoster::new(settings)? })
    }
}

impl GenerationBackend for HttpGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &GenerationRequest) -> Result<String> {
        let resp: WireResponse = self.poster.post("/v1/generate", &req.wire_body())?;
        Ok(resp.text)
    }
}
