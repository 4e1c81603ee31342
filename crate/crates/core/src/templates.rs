//! The shipped prompt-template catalog: 66 zero-shot and 36 few-shot
//! templates plus the per-model best-template table.
//!
//! Catalog bodies use the slots {SRC_LANG}, {TGT_LANG}, {QUERY}, {MASK};
//! few-shot bodies additionally carry an {EXAMPLES} slot expanded from a
//! per-example sub-pattern ({EX_SRC}, {EX_TGT}) joined by a separator.
//! Typographic apostrophes are normalized to ASCII in the shipped data.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::prompts::PromptError;

const CATALOG_JSON: &str = include_str!("../data/templates.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateStyle {
    MaskFilling,
    GptStyle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotKind {
    ZeroShot,
    FewShot,
}

impl ShotKind {
    pub fn label(self) -> &'static str {
        match self {
            ShotKind::ZeroShot => "zero-shot",
            ShotKind::FewShot => "few-shot",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Template {
    pub id: u32,
    pub style: TemplateStyle,
    pub shot_kind: ShotKind,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_sep: Option<String>,
}

#[derive(Debug, Deserialize)]
struct BestTable {
    zero_shot: BTreeMap<String, u32>,
    few_shot: BTreeMap<String, u32>,
}

#[derive(Debug, Deserialize)]
struct CatalogFile {
    version: u32,
    templates: Vec<Template>,
    best_templates: BestTable,
}

pub struct TemplateCatalog {
    version: u32,
    templates: Vec<Template>,
    best: BestTable,
}

/// Normalize a model name to the catalog key: lowercase, vendor prefix and
/// underscores dropped ("google/mT5_small" -> "mt5-small").
pub fn model_key(name: &str) -> String {
    let base = name.rsplit('/').next().unwrap_or(name);
    base.to_lowercase().replace('_', "-")
}

impl TemplateCatalog {
    /// The catalog compiled into the binary.
    pub fn builtin() -> &'static TemplateCatalog {
        static CATALOG: OnceLock<TemplateCatalog> = OnceLock::new();
        CATALOG.get_or_init(|| {
            Self::parse(CATALOG_JSON).expect("embedded template catalog is valid")
        })
    }

    pub fn load_from(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::BadCatalog(e.to_string()))?;
        Self::parse(&text)
    }

    fn parse(text: &str) -> Result<Self, PromptError> {
        let file: CatalogFile =
            serde_json::from_str(text).map_err(|e| PromptError::BadCatalog(e.to_string()))?;
        let catalog = Self {
            version: file.version,
            templates: file.templates,
            best: file.best_templates,
        };
        catalog.validate()?;
        Ok(catalog)
    }

    fn validate(&self) -> Result<(), PromptError> {
        let bad = |msg: String| Err(PromptError::BadCatalog(msg));
        for (i, t) in self.templates.iter().enumerate() {
            if t.id as usize != i + 1 {
                return bad(format!("ids must be consecutive from 1, found {} at {i}", t.id));
            }
            let mask_slots = t.body.matches("{MASK}").count();
            let query_slots = t.body.matches("{QUERY}").count();
            let example_slots = t.body.matches("{EXAMPLES}").count();
            if query_slots != 1 {
                return bad(format!("template {}: need exactly one {{QUERY}}", t.id));
            }
            match t.style {
                TemplateStyle::MaskFilling if mask_slots != 1 => {
                    return bad(format!("template {}: need exactly one {{MASK}}", t.id));
                }
                TemplateStyle::GptStyle if mask_slots != 0 => {
                    return bad(format!("template {}: GPT-style must not carry {{MASK}}", t.id));
                }
                _ => {}
            }
            match t.shot_kind {
                ShotKind::ZeroShot => {
                    if example_slots != 0 || t.example_pattern.is_some() || t.example_sep.is_some()
                    {
                        return bad(format!("template {}: zero-shot has no example slots", t.id));
                    }
                }
                ShotKind::FewShot => {
                    if example_slots != 1 {
                        return bad(format!("template {}: need exactly one {{EXAMPLES}}", t.id));
                    }
                    let pattern = t.example_pattern.as_deref().unwrap_or("");
                    if !pattern.contains("{EX_SRC}") || !pattern.contains("{EX_TGT}") {
                        return bad(format!("template {}: bad example pattern", t.id));
                    }
                    if t.example_sep.is_none() {
                        return bad(format!("template {}: missing example separator", t.id));
                    }
                }
            }
        }
        for (model, id) in self.best.zero_shot.iter().chain(&self.best.few_shot) {
            if self.get(*id).is_none() {
                return bad(format!("best-template table: {model} points at missing id {id}"));
            }
        }
        Ok(())
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn get(&self, id: u32) -> Option<&Template> {
        self.templates.get(id.checked_sub(1)? as usize)
    }

    /// The recorded best template for a model at the given shot kind.
    pub fn best_template(&self, model: &str, shot_kind: ShotKind) -> Result<&Template, PromptError> {
        let key = model_key(model);
        let table = match shot_kind {
            ShotKind::ZeroShot => &self.best.zero_shot,
            ShotKind::FewShot => &self.best.few_shot,
        };
        let id = table
            .get(&key)
            .ok_or_else(|| PromptError::UnknownModel(model.to_string()))?;
        Ok(self.get(*id).expect("validated"))
    }
}
