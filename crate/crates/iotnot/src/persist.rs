//! Model files: every saved model is a single JSON object whose `kind` field
//! names the classifier, so one loader can open any of them. Floats are
//! written at full round-trip precision; a saved model scores bit-identically
//! after reload.

use crate::dhcp::DhcpSignatureModel;
use crate::linear::LinearModel;
use serde::Serialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("model file has no \"kind\" field")]
    MissingKind,
    #[error("unknown model kind {0:?}")]
    UnknownKind(String),
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Any model this toolkit can persist.
#[derive(Clone, PartialEq, Debug, Serialize)]
#[serde(untagged)]
pub enum AnyModel {
    Linear(LinearModel),
    Dhcp(DhcpSignatureModel),
}

impl AnyModel {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Linear(_) => LinearModel::KIND,
            AnyModel::Dhcp(_) => DhcpSignatureModel::KIND,
        }
    }

    /// Slot width for traffic models; DHCP signatures are width-free.
    pub fn slot_width(&self) -> Option<u32> {
        match self {
            AnyModel::Linear(m) => Some(m.slot_width),
            AnyModel::Dhcp(_) => None,
        }
    }

    pub fn validate(&self) -> Result<(), PersistError> {
        match self {
            AnyModel::Linear(m) => m.validate().map_err(|e| PersistError::Invalid(e.to_string())),
            AnyModel::Dhcp(m) => m.validate().map_err(|e| PersistError::Invalid(e.to_string())),
        }
    }
}

impl From<LinearModel> for AnyModel {
    fn from(m: LinearModel) -> Self {
        AnyModel::Linear(m)
    }
}

impl From<DhcpSignatureModel> for AnyModel {
    fn from(m: DhcpSignatureModel) -> Self {
        AnyModel::Dhcp(m)
    }
}

/// Parses and validates a model from its JSON text, dispatching on `kind`.
pub fn parse_model(text: &str) -> Result<AnyModel, PersistError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let kind = value
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or(PersistError::MissingKind)?;
    let model = match kind {
        LinearModel::KIND => AnyModel::Linear(serde_json::from_value(value)?),
        DhcpSignatureModel::KIND => AnyModel::Dhcp(serde_json::from_value(value)?),
        other => return Err(PersistError::UnknownKind(other.to_string())),
    };
    model.validate()?;
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<AnyModel, PersistError> {
    parse_model(&std::fs::read_to_string(path)?)
}

/// Serializes a model to its canonical single-object JSON (plus a trailing
/// newline). Serde prints each float as the shortest digits that parse back
/// to the same value, so nothing is lost between save and load.
pub fn model_to_json(model: &AnyModel) -> String {
    let mut text = serde_json::to_string(model).expect("models always serialize");
    text.push('\n');
    text
}

pub fn save_model(path: &Path, model: &AnyModel) -> Result<(), PersistError> {
    model.validate()?;
    std::fs::write(path, model_to_json(model))?;
    Ok(())
}
