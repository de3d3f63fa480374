//! Response cache keyed by request fingerprint.
//!
//! The directory store keeps one file per fingerprint holding the response
//! bytes verbatim. Files are written to a temporary name and renamed into
//! place, so concurrent writers never expose partial entries.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{BackendIdentity, ChatModel, DecodeParams, VqaModel};
use crate::error::BackendError;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Request<'a> {
    Chat { prompt: &'a str },
    Vqa { image_ref: &'a str, question: &'a str },
}

/// Hex SHA-256 over (backend identity, request, decode parameters).
pub fn fingerprint(identity: &BackendIdentity, params: &DecodeParams, request: &Request<'_>) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        backend: &'a BackendIdentity,
        params: &'a DecodeParams,
        request: &'a Request<'a>,
    }
    let key = serde_json::to_vec(&Key {
        backend: identity,
        params,
        request,
    })
    .expect("fingerprint key serializes");
    hex::encode(Sha256::digest(&key))
}

#[derive(Debug)]
enum Store {
    Memory(Mutex<HashMap<String, String>>),
    Directory {
        dir: PathBuf,
        write_lock: tokio::sync::Mutex<()>,
    },
}

#[derive(Debug)]
pub struct ResponseCache {
    store: Store,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self {
            store: Store::Memory(Mutex::new(HashMap::new())),
        }
    }

    pub fn directory(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| BackendError::Store(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            store: Store::Directory {
                dir,
                write_lock: tokio::sync::Mutex::new(()),
            },
        })
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.store {
            Store::Directory { dir, .. } => Some(dir),
            Store::Memory(_) => None,
        }
    }

    pub async fn get(&self, key: &str) -> Result<Option<String>, BackendError> {
        match &self.store {
            Store::Memory(map) => Ok(map.lock().unwrap().get(key).cloned()),
            Store::Directory { dir, .. } => match tokio::fs::read(dir.join(key)).await {
                Ok(bytes) => String::from_utf8(bytes)
                    .map(Some)
                    .map_err(|e| BackendError::Store(format!("{key}: {e}"))),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(BackendError::Store(format!("{key}: {e}"))),
            },
        }
    }

    pub async fn put(&self, key: &str, value: &str) -> Result<(), BackendError> {
        match &self.store {
            Store::Memory(map) => {
                map.lock().unwrap().insert(key.to_string(), value.to_string());
                Ok(())
            }
            Store::Directory { dir, write_lock } => {
                let _guard = write_lock.lock().await;
                let tmp = dir.join(format!(".{key}.{}.tmp", uuid::Uuid::new_v4()));
                let store_err = |e: std::io::Error| BackendError::Store(format!("{key}: {e}"));
                tokio::fs::write(&tmp, value.as_bytes()).await.map_err(store_err)?;
                tokio::fs::rename(&tmp, dir.join(key)).await.map_err(store_err)
            }
        }
    }

    pub fn len(&self) -> usize {
        match &self.store {
            Store::Memory(map) => map.lock().unwrap().len(),
            Store::Directory { dir, .. } => std::fs::read_dir(dir)
                .map(|it| {
                    it.filter_map(|e| e.ok())
                        .filter(|e| !e.file_name().to_string_lossy().starts_with('.'))
                        .count()
                })
                .unwrap_or(0),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A backend whose successful responses are served from a [`ResponseCache`].
#[derive(Debug)]
pub struct Cached<B> {
    inner: B,
    cache: Arc<ResponseCache>,
}

pub fn wrap_with_cache<B>(inner: B, cache: Arc<ResponseCache>) -> Cached<B> {
    Cached { inner, cache }
}

impl<B> Cached<B> {
    pub fn inner(&self) -> &B {
        &self.inner
    }

    async fn through<F>(&self, key: String, call: F) -> Result<String, BackendError>
    where
        F: std::future::Future<Output = Result<String, BackendError>>,
    {
        if let Some(hit) = self.cache.get(&key).await? {
            return Ok(hit);
        }
        let response = call.await?;
        // Blank completions are rejected downstream; keep them out of the store.
        if !response.trim().is_empty() {
            self.cache.put(&key, &response).await?;
        }
        Ok(response)
    }
}

#[async_trait]
impl<B: ChatModel> ChatModel for Cached<B> {
    fn identity(&self) -> BackendIdentity {
        self.inner.identity()
    }

    fn decode_params(&self) -> DecodeParams {
        self.inner.decode_params()
    }

    async fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let key = fingerprint(
            &self.inner.identity(),
            &self.inner.decode_params(),
            &Request::Chat { prompt },
        );
        self.through(key, self.inner.complete(prompt)).await
    }
}

#[async_trait]
impl<B: VqaModel> VqaModel for Cached<B> {
    fn identity(&self) -> BackendIdentity {
        self.inner.identity()
    }

    fn decode_params(&self) -> DecodeParams {
        self.inner.decode_params()
    }

    async fn answer(&self, image_ref: &str, question: &str) -> Result<String, BackendError> {
        let key = fingerprint(
            &self.inner.identity(),
            &self.inner.decode_params(),
            &Request::Vqa { image_ref, question },
        );
        self.through(key, self.inner.answer(image_ref, question)).await
    }
}
