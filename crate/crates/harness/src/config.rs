//! Run configuration and the TOML backend description.
//!
//! ```toml
//! [judge]
//! kind = "openai"
//! base_url = "https://api.openai.com/v1"
//! model = "gpt-3.5-turbo-0613"
//!
//! [lvlm]
//! kind = "scripted"
//! script = "lvlm.json"   # relative to this file
//!
//! [cache]
//! dir = "cache"
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use dentist_core::backend::{
    wrap_with_cache, DecodeParams, HttpEndpoint, OpenAiChat, OpenAiVqa, ResponseCache, RetryPolicy,
};
use dentist_core::{load_templates, ChatModel, LoopConfig, Pipeline, ScriptedBackend, TemplateSet, VqaModel};
use serde::{Deserialize, Serialize};

use crate::error::{io_error, HarnessError, Result};

pub const CACHE_DIR_ENV: &str = "DENTIST_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Correct,
    DirectRejection,
    RepeatedCorrection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub backend_config: PathBuf,
    pub templates: Option<PathBuf>,
    pub loop_config: LoopConfig,
    pub concurrency: usize,
    pub out: PathBuf,
    pub mode: RunMode,
    pub repeats: u32,
    /// Forwarded to hosted backends as the sampling seed.
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn new(corpus: impl Into<PathBuf>, backend_config: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            corpus: corpus.into(),
            backend_config: backend_config.into(),
            templates: None,
            loop_config: LoopConfig::default(),
            concurrency: 4,
            out: out.into(),
            mode: RunMode::Correct,
            repeats: 10,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loop_config.validate()?;
        if self.concurrency == 0 {
            return Err(HarnessError::Config("concurrency must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(HarnessError::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load_templates(&self) -> Result<TemplateSet> {
        match &self.templates {
            Some(path) => Ok(load_templates(path)?),
            None => Ok(TemplateSet::builtin()),
        }
    }

    /// Loads templates and backends and assembles the pipeline.
    pub fn build_pipeline(&self) -> Result<Pipeline> {
        let backends = BackendConfig::load(&self.backend_config)?;
        Ok(backends
            .build(self.seed)?
            .with_templates(self.load_templates()?)
            .with_config(self.loop_config.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendSpec {
    Openai {
        base_url: String,
        model: String,
        #[serde(default)]
        temperature: f32,
        max_tokens: Option<u32>,
        #[serde(default = "default_max_retries")]
        max_retries: u32,
        timeout_secs: Option<u64>,
    },
    Scripted {
        script: PathBuf,
    },
}

fn default_max_retries() -> u32 {
    RetryPolicy::default().max_retries
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSpec {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub judge: BackendSpec,
    pub lvlm: BackendSpec,
    pub sub_answerer: Option<BackendSpec>,
    pub cache: Option<CacheSpec>,
    #[serde(skip)]
    base_dir: PathBuf,
}

enum Built {
    Openai {
        endpoint: HttpEndpoint,
        params: DecodeParams,
        retry: RetryPolicy,
    },
    Scripted(Arc<ScriptedBackend>),
}

impl BackendConfig {
    pub fn from_toml_str(source: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut config: Self = toml::from_str(source).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.base_dir = base_dir.into();
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(io_error(path))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_toml_str(&source, base).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// `DENTIST_CACHE_DIR` wins over the `[cache]` table.
    pub fn cache_dir(&self) -> Option<PathBuf> {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Some(PathBuf::from(dir)),
            _ => self.cache.as_ref().map(|c| self.resolve(&c.dir)),
        }
    }

    fn build_one(&self, role: &str, spec: &BackendSpec, seed: Option<u64>) -> Result<Built> {
        Ok(match spec {
            BackendSpec::Openai {
                base_url,
                model,
                temperature,
                max_tokens,
                max_retries,
                timeout_secs,
            } => {
                let mut endpoint = HttpEndpoint::new(base_url, model).with_env_api_key();
                if let Some(t) = timeout_secs {
                    endpoint.timeout_secs = *t;
                }
                Built::Openai {
                    endpoint,
                    params: DecodeParams {
                        temperature: *temperature,
                        max_tokens: *max_tokens,
                        seed,
                    },
                    retry: RetryPolicy {
                        max_retries: *max_retries,
                        ..RetryPolicy::default()
                    },
                }
            }
            BackendSpec::Scripted { script } => Built::Scripted(Arc::new(
                ScriptedBackend::from_json_file(role, self.resolve(script))
                    .map_err(|e| HarnessError::Config(format!("[{role}] {e}")))?,
            )),
        })
    }

    fn chat(
        &self,
        role: &str,
        spec: &BackendSpec,
        seed: Option<u64>,
        cache: &Option<Arc<ResponseCache>>,
    ) -> Result<Arc<dyn ChatModel>> {
        let inner: Arc<dyn ChatModel> = match self.build_one(role, spec, seed)? {
            Built::Openai {
                endpoint,
                params,
                retry,
            } => Arc::new(OpenAiChat::new(endpoint, params, retry)?),
            Built::Scripted(s) => s,
        };
        Ok(match cache {
            Some(cache) => Arc::new(wrap_with_cache(inner, cache.clone())),
            None => inner,
        })
    }

    fn vqa(
        &self,
        role: &str,
        spec: &BackendSpec,
        seed: Option<u64>,
        cache: &Option<Arc<ResponseCache>>,
    ) -> Result<Arc<dyn VqaModel>> {
        let inner: Arc<dyn VqaModel> = match self.build_one(role, spec, seed)? {
            Built::Openai {
                endpoint,
                params,
                retry,
            } => Arc::new(OpenAiVqa::new(endpoint, params, retry)?),
            Built::Scripted(s) => s,
        };
        Ok(match cache {
            Some(cache) => Arc::new(wrap_with_cache(inner, cache.clone())),
            None => inner,
        })
    }

    /// Pipeline with builtin templates and default loop settings.
    pub fn build(&self, seed: Option<u64>) -> Result<Pipeline> {
        let cache = self
            .cache_dir()
            .map(ResponseCache::directory)
            .transpose()?
            .map(Arc::new);
        let mut pipeline = Pipeline::new(
            self.chat("judge", &self.judge, seed, &cache)?,
            self.vqa("lvlm", &self.lvlm, seed, &cache)?,
        );
        if let Some(spec) = &self.sub_answerer {
            pipeline = pipeline.with_sub_answerer(self.vqa("sub_answerer", spec, seed, &cache)?);
        }
        Ok(pipeline)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_kinds() {
        let config = BackendConfig::from_toml_str(
            r#"
            [judge]
            kind = "openai"
            base_url = "https://api.openai.com/v1"
            model = "gpt-3.5-turbo-0613"
            max_tokens = 256

            [lvlm]
            kind = "scripted"
            script = "lvlm.json"
            "#,
            "/tmp/configs",
        )
        .unwrap();
        match &config.judge {
            BackendSpec::Openai {
                temperature,
                max_retries,
                max_tokens,
                ..
            } => {
                assert_eq!((*temperature, *max_retries, *max_tokens), (0.0, 1, Some(256)));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            config.resolve(Path::new("lvlm.json")),
            Path::new("/tmp/configs/lvlm.json")
        );
        assert!(config.sub_answerer.is_none());
    }

    #[test]
    fn rejects_unknown_kind_and_fields() {
        let bad = "[judge]\nkind = \"local\"\n[lvlm]\nkind = \"scripted\"\nscript = \"x\"\n";
        assert!(matches!(
            BackendConfig::from_toml_str(bad, "."),
            Err(HarnessError::Config(_))
        ));
        let bad =
            "[judge]\nkind = \"scripted\"\nscript = \"x\"\ntemp = 1\n[lvlm]\nkind = \"scripted\"\nscript = \"x\"\n";
        assert!(BackendConfig::from_toml_str(bad, ".").is_err());
    }

    #[test]
    fn missing_script_is_config_error() {
        let config = BackendConfig::from_toml_str(
            "[judge]\nkind = \"scripted\"\nscript = \"nope.json\"\n[lvlm]\nkind = \"scripted\"\nscript = \"nope.json\"\n",
            "/nonexistent",
        )
        .unwrap();
        assert!(matches!(config.build(None), Err(HarnessError::Config(_))));
    }

    #[test]
    fn run_config_validation() {
        let mut c = RunConfig::new("c.jsonl", "b.toml", "out");
        assert!(c.validate().is_ok());
        c.repeats = 0;
        assert!(c.validate().is_err());
        c.repeats = 1;
        c.concurrency = 0;
        assert!(c.validate().is_err());
    }
}
