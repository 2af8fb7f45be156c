//! Versioned JSON container for trained models.
//!
//! ```text
//! {"format_version": 1, "model_kind": "svm", "model": {...}}
//! ```
//!
//! Floats are written in shortest round-trip form, so a loaded model
//! reproduces the saved model's predictions bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::adaboost::AdaBoostModel;
use crate::error::{Error, Result};
use crate::svm::SvmModel;

pub const FORMAT_VERSION: u32 = 1;

pub trait Persist: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

impl Persist for SvmModel {
    const KIND: &'static str = "svm";
}

impl Persist for AdaBoostModel {
    const KIND: &'static str = "adaboost";
}

#[derive(Serialize)]
struct EnvelopeOut<'a, M> {
    format_version: u32,
    model_kind: &'a str,
    model: &'a M,
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
    model_kind: String,
}

#[derive(Deserialize)]
struct EnvelopeIn<M> {
    model: M,
}

pub fn to_json<M: Persist>(model: &M) -> Result<String> {
    Ok(serde_json::to_string(&EnvelopeOut {
        format_version: FORMAT_VERSION,
        model_kind: M::KIND,
        model,
    })?)
}

pub fn from_json<M: Persist>(text: &str) -> Result<M> {
    let header: Header = serde_json::from_str(text)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { found: header.format_version, expected: FORMAT_VERSION });
    }
    if header.model_kind != M::KIND {
        return Err(Error::KindMismatch { expected: M::KIND.to_string(), found: header.model_kind });
    }
    let env: EnvelopeIn<M> = serde_json::from_str(text)?;
    Ok(env.model)
}

/// Writes to a temporary sibling and renames, so a crash never leaves a
/// half-written model behind.
pub fn save_model<M: Persist>(model: &M, path: &Path) -> Result<()> {
    let json = to_json(model)?;
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(json.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_model<M: Persist>(path: &Path) -> Result<M> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
