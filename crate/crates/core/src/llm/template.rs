use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GatewayError;

pub const PLACEHOLDER: &str = "{{code}}";

/// A system/user prompt pair with one `{{code}}` slot in the user text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system: String,
    pub user: String,
}

impl PromptTemplate {
    pub fn improve() -> Self {
        toml::from_str(include_str!("../../templates/improve.toml")).expect("bundled improve template")
    }

    pub fn contamination() -> Self {
        toml::from_str(include_str!("../../templates/contamination.toml")).expect("bundled contamination template")
    }

    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("cannot read template {}: {e}", path.display())))?;
        let t: PromptTemplate =
            toml::from_str(&text).map_err(|e| GatewayError::Config(format!("bad template {}: {e}", path.display())))?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self.user.matches(PLACEHOLDER).count() {
            1 => Ok(()),
            0 => Err(GatewayError::Config(format!("template has no {PLACEHOLDER} placeholder"))),
            n => Err(GatewayError::Config(format!("template has {n} {PLACEHOLDER} placeholders, expected one"))),
        }
    }

    pub fn render(&self, code: &str) -> Result<String, GatewayError> {
        self.validate()?;
        Ok(self.user.replacen(PLACEHOLDER, code, 1))
    }
}
