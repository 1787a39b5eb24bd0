use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// SHA-256 over length-prefixed fields, so `("ab", "c")` and `("a", "bc")`
/// hash differently.
pub fn hash_fields<'a>(fields: impl IntoIterator<Item = &'a [u8]>) -> [u8; 32] {
    let mut h = Sha256::new();
    for f in fields {
        h.update((f.len() as u64).to_le_bytes());
        h.update(f);
    }
    h.finalize().into()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Git-style object id: SHA-256 over `blob <len>\0<content>`.
pub fn git_blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

pub fn seeded_rng<'a>(fields: impl IntoIterator<Item = &'a [u8]>) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(hash_fields(fields))
}

/// Counting semaphore bounding in-flight backend requests.
#[derive(Debug)]
pub struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self { permits: Mutex::new(permits.max(1)), freed: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap();
        while *n == 0 {
            n = self.freed.wait(n).unwrap();
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

/// Settings shared by the HTTP generation and embedding clients.
#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub base_url: String,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub backoff_base: Duration,
    pub concurrency: usize,
}

impl HttpSettings {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            timeout: Duration::from_secs(60),
            max_attempts: 3,
            backoff_base: Duration::from_millis(250),
            concurrency: 4,
        }
    }
}

/// Blocking JSON POST client with bounded concurrency and exponential
/// backoff. Transport failures, timeouts and 5xx responses are retried.
pub struct JsonPoster {
    settings: HttpSettings,
    client: reqwest::blocking::Client,
    in_flight: Semaphore,
}

impl JsonPoster {
    pub fn new(settings: HttpSettings) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| Error::BackendUnavailable(e.to_string()))?;
        Ok(Self { in_flight: Semaphore::new(settings.concurrency), settings, client })
    }

    pub fn settings(&self) -> &HttpSettings {
        &self.settings
    }

    pub fn post<Req, Resp>(&self, route: &str, body: &Req) -> Result<Resp>
    where
        Req: serde::Serialize,
        Resp: serde::de::DeserializeOwned,
    {
        let url = format!("{}{}", self.settings.base_url, route);
        let _permit = self.in_flight.acquire();
        let attempts = self.settings.max_attempts.max(1);
        let mut last = Error::BackendUnavailable("no attempt made".into());
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.settings.backoff_base * 2u32.pow(attempt - 1));
            }
            match self.client.post(&url).json(body).send() {
                Ok(resp) if resp.status().is_success() => {
                    return resp
                        .json::<Resp>()
                        .map_err(|e| Error::BackendUnavailable(format!("malformed response from {url}: {e}")));
                }
                Ok(resp) => {
                    let status = resp.status();
                    last = Error::BackendError { status: status.as_u16() };
                    if !status.is_server_error() {
                        return Err(last);
                    }
                }
                Err(e) if e.is_timeout() => last = Error::BackendTimeout,
                Err(e) => last = Error::BackendUnavailable(e.to_string()),
            }
            log::warn!("POST {url} attempt {} failed: {last}", attempt + 1);
        }
        Err(last)
    }
}
