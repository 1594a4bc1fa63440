//! Key resolution: `--key-hex`, `--key-file`, or `PRIVTIER_KEY_HEX`.

use std::path::Path;

use privtier_core::{KeyMaterial, KeyOrigin};

use crate::error::{Error, Result};

pub const KEY_ENV: &str = "PRIVTIER_KEY_HEX";

/// Reads a key file holding either 32 hex characters or exactly 16 raw bytes.
pub fn key_from_file(path: &Path) -> Result<KeyMaterial> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() == 16 {
        if let Ok(k) = KeyMaterial::new(&bytes, KeyOrigin::KeyFile) {
            if std::str::from_utf8(&bytes).map_or(true, |s| !s.bytes().all(|b| b.is_ascii_hexdigit())) {
                return Ok(k);
            }
        }
    }
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::Config(format!("{}: key file is neither 16 raw bytes nor hex", path.display())))?;
    Ok(KeyMaterial::from_hex(text, KeyOrigin::KeyFile)?)
}

/// Picks the key from the flag, then the file, then the environment value. Absent everywhere is an error.
pub fn resolve_key(hex: Option<&str>, file: Option<&Path>, env: Option<&str>) -> Result<KeyMaterial> {
    match (hex, file) {
        (Some(_), Some(_)) => Err(Error::Config("use only one of --key-hex and --key-file".into())),
        (Some(h), None) => Ok(KeyMaterial::from_hex(h, KeyOrigin::CliFlag)?),
        (None, Some(p)) => key_from_file(p),
        (None, None) => match env {
            Some(h) if !h.trim().is_empty() => Ok(KeyMaterial::from_hex(h, KeyOrigin::EnvVar)?),
            _ => Err(Error::Config(format!(
                "no key supplied: pass --key-hex, --key-file or set {KEY_ENV}"
            ))),
        },
    }
}
