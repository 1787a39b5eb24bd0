use serde::{Deserialize, Serialize};

use super::EmbeddingBackend;
use crate::error::Result;
use crate::util::{HttpSettings, JsonPoster};

#[derive(Serialize)]
struct WireRequest<'a> {
    kind: &'a str,
    payload: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    vector: Vec<f32>,
}

/// Client for `POST {base_url}/v1/embed`; encoding happens server-side.
pub struct HttpEmbedder {
    id: String,
    dim: usize,
    poster: JsonPoster,
}

impl HttpEmbedder {
    pub fn new(settings: HttpSettings, dim: usize) -> Result<Self> {
        Ok(Self { id: format!("http:{}", settings.base_url), dim, poster: JsonPoster::new(settings)? })
    }

    fn embed(&self, kind: &str, payload: &str) -> Result<Vec<f32>> {
        let resp: WireResponse = self.poster.post("/v1/embed", &WireRequest { kind, payload })?;
        Ok(resp.vector)
    }
}

impl EmbeddingBackend for HttpEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image_raw(&self, image_ref: &str) -> Result<Vec<f32>> {
        self.embed("image", image_ref)
    }

    fn embed_text_raw(&self, text: &str) -> Result<Vec<f32>> {
        self.embed("text", text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{embed_image, embed_text};
    use crate::error::Error;
    use crate::util::testserver;

    #[test]
    fn wire_contract() {
        let server = testserver::spawn(|path, body| {
            assert_eq!(path, "/v1/embed");
            let req: serde_json::Value = serde_json::from_str(body).unwrap();
            let v = if req["kind"] == "image" { "[1.0, 0.0, 0.0]" } else { "[0.0, 1.0]" };
            (200, format!(r#"{{"vector": {v}}}"#))
        });
        let e = HttpEmbedder::new(HttpSettings::new(&server.url), 3).unwrap();
        assert_eq!(embed_image(&e, "V/0").unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(matches!(embed_text(&e, "hello"), Err(Error::Dimension { expected: 3, actual: 2 })));
        let requests = server.requests.lock().unwrap();
        let first: serde_json::Value = serde_json::from_str(&requests[0].1).unwrap();
        assert_eq!(first, serde_json::json!({"kind": "image", "payload": "V/0"}));
    }
}
