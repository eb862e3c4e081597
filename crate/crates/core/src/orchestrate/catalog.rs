//! Bug-prompt catalog, demonstration PR pool and prompt templating.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::functions::FunctionRef;
use super::OrchestrateError;

pub const CATALOG_SIZE: usize = 51;

pub const DEFAULT_FIRST_TEMPLATE: &str = "There is a {bug} downstream of function {function}.";

const BUNDLED_CATALOG: &str = include_str!("../../data/bug_catalog.json");
const BUNDLED_DEMOS: &str = include_str!("../../data/demonstrations.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugEntry {
    pub id: u32,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugPromptCatalog {
    pub entries: Vec<BugEntry>,
}

impl BugPromptCatalog {
    /// The placeholder catalog shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_CATALOG).expect("bundled catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, OrchestrateError> {
        let c: Self = serde_json::from_str(text).map_err(|e| OrchestrateError::Config(format!("bug catalog: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, OrchestrateError> {
        let text = std::fs::read_to_string(path).map_err(|e| OrchestrateError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), OrchestrateError> {
        if self.entries.len() != CATALOG_SIZE {
            return Err(OrchestrateError::Config(format!(
                "bug catalog needs exactly {CATALOG_SIZE} entries, has {}",
                self.entries.len()
            )));
        }
        let ids: BTreeSet<u32> = self.entries.iter().map(|e| e.id).collect();
        if ids.len() != CATALOG_SIZE || ids.first() != Some(&1) || ids.last() != Some(&(CATALOG_SIZE as u32)) {
            return Err(OrchestrateError::Config("bug catalog ids must be unique and cover 1..=51".into()));
        }
        Ok(())
    }

    pub fn get(&self, id: u32) -> Option<&BugEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &BugEntry {
        &self.entries[rng.random_range(0..self.entries.len())]
    }

    /// Uniform draw that avoids `exclude` whenever possible.
    pub fn sample_excluding<R: Rng + ?Sized>(&self, rng: &mut R, exclude: &[u32]) -> &BugEntry {
        let pool: Vec<&BugEntry> = self.entries.iter().filter(|e| !exclude.contains(&e.id)).collect();
        if pool.is_empty() {
            return self.sample(rng);
        }
        pool[rng.random_range(0..pool.len())]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub id: String,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemonstrationPool {
    pub entries: Vec<Demonstration>,
}

impl DemonstrationPool {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_DEMOS).expect("bundled demonstrations are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, OrchestrateError> {
        let p: Self =
            serde_json::from_str(text).map_err(|e| OrchestrateError::Config(format!("demonstrations: {e}")))?;
        if p.entries.is_empty() {
            return Err(OrchestrateError::Config("demonstration pool is empty".into()));
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, OrchestrateError> {
        let text = std::fs::read_to_string(path).map_err(|e| OrchestrateError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Demonstration {
        &self.entries[rng.random_range(0..self.entries.len())]
    }
}

/// Single-pass `{name}` substitution. Values are inserted verbatim and
/// never rescanned, so a value containing `{bug}` stays literal.
/// Unknown placeholders are left as they are.
pub fn render_template(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let key = &after[..close];
                match slots.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(key);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn render_first_prompt(template: &str, func: &FunctionRef, bug: &BugEntry) -> String {
    render_template(
        template,
        &[("bug", &bug.description), ("function", &func.name), ("file", &func.file)],
    )
}
