//! Content-addressed response cache: `cache/<model>/<digest>.json`.
//!
//! The key digests everything that determines a reply: model name, the
//! serialized message sequence, the temperature bits, and the request
//! seed. SHA-256 over that encoding is stable across runs and platforms,
//! which is what makes cached reruns byte-reproducible. Writes go through
//! a temp file and rename, so concurrent writers of the same key settle on
//! last-write-wins with both values identical by construction.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use theater_core::{ChatMessage, JudgeResponse};

use crate::ClientError;

/// One cached reply, stored with the key it was filed under so a
/// misplaced or tampered file can never answer for another request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub created_at_unix: u64,
    pub value: JudgeResponse,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Digest of (model, messages, temperature, seed).
    pub fn key(
        model: &str,
        messages: &[ChatMessage],
        temperature: f64,
        seed: Option<u64>,
    ) -> String {
        let messages_json =
            serde_json::to_string(messages).expect("message serialization cannot fail");
        let mut hasher = Sha256::new();
        hasher.update(model.as_bytes());
        hasher.update(b"\n");
        hasher.update(temperature.to_bits().to_le_bytes());
        hasher.update(b"\n");
        match seed {
            Some(s) => {
                hasher.update(b"seed:");
                hasher.update(s.to_le_bytes());
            }
            None => hasher.update(b"seed:none"),
        }
        hasher.update(b"\n");
        hasher.update(messages_json.as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    fn sanitize(component: &str) -> String {
        component
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    }

    fn path_for(&self, model: &str, key: &str) -> PathBuf {
        self.root
            .join(Self::sanitize(model))
            .join(format!("{key}.json"))
    }

    /// Cached response for a key, or `None` on miss. Unreadable entries
    /// and entries filed under a different key count as misses.
    pub fn load(&self, model: &str, key: &str) -> Option<JudgeResponse> {
        let path = self.path_for(model, key);
        let text = fs::read_to_string(path).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        (entry.key == key).then_some(entry.value)
    }

    pub fn store(
        &self,
        model: &str,
        key: &str,
        response: &JudgeResponse,
    ) -> Result<(), ClientError> {
        let path = self.path_for(model, key);
        let dir = path.parent().expect("cache path has a parent");
        let io_err = |source: std::io::Error, p: &Path| ClientError::Cache {
            path: p.display().to_string(),
            source,
        };
        fs::create_dir_all(dir).map_err(|e| io_err(e, dir))?;
        let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
        let entry = CacheEntry {
            key: key.to_string(),
            created_at_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            value: response.clone(),
        };
        let body = serde_json::to_string(&entry).expect("entry serialization cannot fail");
        fs::write(&tmp, body).map_err(|e| io_err(e, &tmp))?;
        fs::rename(&tmp, &path).map_err(|e| io_err(e, &path))?;
        Ok(())
    }
}
