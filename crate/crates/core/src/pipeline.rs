use std::sync::Arc;

use crate::backend::{BackendIdentity, ChatModel, VqaModel};
use crate::model::LoopConfig;
use crate::template::TemplateSet;

/// Backends, templates and loop settings shared by every verification.
///
/// Sub-questions are answered by the model under correction unless a
/// separate sub-answerer is configured.
#[derive(Clone)]
pub struct Pipeline {
    judge: Arc<dyn ChatModel>,
    lvlm: Arc<dyn VqaModel>,
    sub_answerer: Option<Arc<dyn VqaModel>>,
    templates: TemplateSet,
    config: LoopConfig,
}

impl Pipeline {
    pub fn new(judge: Arc<dyn ChatModel>, lvlm: Arc<dyn VqaModel>) -> Self {
        Self {
            judge,
            lvlm,
            sub_answerer: None,
            templates: TemplateSet::builtin(),
            config: LoopConfig::default(),
        }
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_config(mut self, config: LoopConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_sub_answerer(mut self, vqa: Arc<dyn VqaModel>) -> Self {
        self.sub_answerer = Some(vqa);
        self
    }

    pub fn judge(&self) -> &dyn ChatModel {
        self.judge.as_ref()
    }

    pub fn lvlm(&self) -> &dyn VqaModel {
        self.lvlm.as_ref()
    }

    pub fn sub_answerer(&self) -> &dyn VqaModel {
        self.sub_answerer.as_deref().unwrap_or(self.lvlm.as_ref())
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn config(&self) -> &LoopConfig {
        &self.config
    }

    /// Identities of the judge, the LVLM and (if distinct) the sub-answerer.
    pub fn identities(&self) -> Vec<(&'static str, BackendIdentity)> {
        let mut out = vec![("judge", self.judge.identity()), ("lvlm", self.lvlm.identity())];
        if let Some(sub) = &self.sub_answerer {
            out.push(("sub_answerer", sub.identity()));
        }
        out
    }
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("backends", &self.identities())
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}
