//! Per-file SHA-256 manifests (`manifest.json`).
//!
//! Paths are relative to the root, `/`-separated and NFC-normalized; the
//! serialized object is sorted by path.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;
use walkdir::WalkDir;

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.entries.get(path).map(String::as_str)
    }

    pub fn insert(&mut self, path: impl Into<String>, digest: impl Into<String>) {
        self.entries.insert(path.into(), digest.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> Vec<u8> {
        let map: Map<String, Value> = self
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), Value::from(v.as_str())))
            .collect();
        let mut out = serde_json::to_vec_pretty(&Value::Object(map)).expect("serializable");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let value = crate::annotations::parse_json(bytes)?;
        let obj = value.as_object().ok_or_else(|| Error::Parse {
            offset: 0,
            message: "manifest must be a JSON object".into(),
        })?;
        let mut entries = BTreeMap::new();
        for (path, digest) in obj {
            let digest = digest
                .as_str()
                .filter(|d| d.len() == 64 && d.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')))
                .ok_or_else(|| Error::Config(format!("manifest entry {path:?} is not a lowercase hex SHA-256 digest")))?;
            entries.insert(normalize(path), digest.to_string());
        }
        Ok(Self { entries })
    }
}

fn normalize(path: &str) -> String {
    path.nfc().collect()
}

/// `rel` as a normalized manifest key.
pub fn manifest_key(rel: &Path) -> String {
    let parts: Vec<String> = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    normalize(&parts.join("/"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

struct Listing {
    files: Vec<(String, PathBuf)>,
    errors: Vec<(String, String)>,
}

fn list_files(root: &Path, exclude: &[&str]) -> Listing {
    let mut files = Vec::new();
    let mut errors = Vec::new();
    for entry in WalkDir::new(root).follow_links(true).sort_by_file_name() {
        match entry {
            Ok(e) if e.file_type().is_file() => {
                let rel = e.path().strip_prefix(root).unwrap_or(e.path());
                let key = manifest_key(rel);
                if !exclude.contains(&key.as_str()) {
                    files.push((key, e.into_path()));
                }
            }
            Ok(_) => {}
            Err(err) => {
                let path = err.path().unwrap_or(root).to_path_buf();
                let message = if err.loop_ancestor().is_some() {
                    "symlink cycle".to_string()
                } else {
                    err.to_string()
                };
                errors.push((path.display().to_string(), message));
            }
        }
    }
    Listing { files, errors }
}

/// Hashes every regular file under `root`.
pub fn build_manifest(root: &Path) -> Result<Manifest> {
    build_manifest_excluding(root, &[])
}

/// Like [`build_manifest`], skipping the given root-relative keys.
pub fn build_manifest_excluding(root: &Path, exclude: &[&str]) -> Result<Manifest> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            io::Error::new(io::ErrorKind::NotFound, "manifest root is not a directory"),
        ));
    }
    let listing = list_files(root, exclude);
    if let Some((path, message)) = listing.errors.into_iter().next() {
        return Err(Error::Walk {
            path: path.into(),
            message,
        });
    }
    let hashed: Vec<(String, String)> = listing
        .files
        .into_par_iter()
        .map(|(key, path)| {
            sha256_file(&path)
                .map(|d| (key, d))
                .map_err(|e| Error::io(path, e))
        })
        .collect::<Result<_>>()?;
    Ok(Manifest {
        entries: hashed.into_iter().collect(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerificationReport {
    pub matched: Vec<String>,
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
    /// Files on disk with no manifest entry. Reported, not fatal.
    pub extra: Vec<String>,
    /// Paths that could not be read, with the reason.
    pub errors: Vec<(String, String)>,
}

impl VerificationReport {
    pub fn is_clean(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty() && self.errors.is_empty()
    }
}

/// Compares the files under `root` with `manifest`. `manifest.json` itself is not checked.
pub fn verify_manifest(root: &Path, manifest: &Manifest) -> VerificationReport {
    let listing = list_files(root, &[MANIFEST_FILE]);
    let on_disk: BTreeMap<String, PathBuf> = listing.files.into_iter().collect();
    let mut report = VerificationReport {
        errors: listing.errors,
        ..Default::default()
    };

    enum Outcome {
        Match(String),
        Mismatch(String),
        Error(String, String),
    }
    let checked: Vec<Outcome> = manifest
        .entries
        .par_iter()
        .filter_map(|(key, digest)| {
            let path = on_disk.get(key)?;
            Some(match sha256_file(path) {
                Ok(d) if &d == digest => Outcome::Match(key.clone()),
                Ok(_) => Outcome::Mismatch(key.clone()),
                Err(e) => Outcome::Error(key.clone(), e.to_string()),
            })
        })
        .collect();
    for o in checked {
        match o {
            Outcome::Match(k) => report.matched.push(k),
            Outcome::Mismatch(k) => report.mismatched.push(k),
            Outcome::Error(k, e) => report.errors.push((k, e)),
        }
    }
    report.missing = manifest
        .entries
        .keys()
        .filter(|k| !on_disk.contains_key(*k))
        .cloned()
        .collect();
    report.extra = on_disk
        .keys()
        .filter(|k| !manifest.entries.contains_key(*k))
        .cloned()
        .collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert!(build_manifest(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn abc_vector_and_ordering() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.txt"), "abc").unwrap();
        fs::create_dir(dir.path().join("a")).unwrap();
        fs::write(dir.path().join("a/x.bin"), [1u8, 2, 3]).unwrap();
        let m = build_manifest(dir.path()).unwrap();
        assert_eq!(
            m.get("b.txt"),
            Some("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
        );
        let keys: Vec<&String> = m.entries().keys().collect();
        assert_eq!(keys, ["a/x.bin", "b.txt"]);
        let json = String::from_utf8(m.to_json()).unwrap();
        assert!(json.find("a/x.bin").unwrap() < json.find("b.txt").unwrap());
        assert_eq!(Manifest::from_json(json.as_bytes()).unwrap(), m);
    }

    #[test]
    fn verification_findings() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["one", "two", "three"] {
            fs::write(dir.path().join(name), name.repeat(100)).unwrap();
        }
        let m = build_manifest(dir.path()).unwrap();
        let clean = verify_manifest(dir.path(), &m);
        assert!(clean.is_clean());
        assert_eq!(clean.matched.len(), 3);

        let mut bytes = fs::read(dir.path().join("two")).unwrap();
        bytes[17] ^= 0x01;
        fs::write(dir.path().join("two"), &bytes).unwrap();
        fs::remove_file(dir.path().join("three")).unwrap();
        fs::write(dir.path().join("four"), "new").unwrap();
        let r = verify_manifest(dir.path(), &m);
        assert_eq!(r.mismatched, ["two"]);
        assert_eq!(r.missing, ["three"]);
        assert_eq!(r.extra, ["four"]);
        assert!(!r.is_clean());
    }

    #[test]
    fn rejects_bad_digests() {
        assert!(Manifest::from_json(br#"{"a": "ABC"}"#).is_err());
        assert!(Manifest::from_json(b"[]").is_err());
    }

    #[test]
    fn nfc_keys() {
        // "é" as e + combining acute becomes the precomposed code point.
        assert_eq!(manifest_key(Path::new("cafe\u{301}/x")), "caf\u{e9}/x");
    }

    #[cfg(unix)]
    #[test]
    fn symlink_cycle_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("d")).unwrap();
        std::os::unix::fs::symlink(dir.path(), dir.path().join("d/loop")).unwrap();
        assert!(matches!(build_manifest(dir.path()), Err(Error::Walk { .. })));
    }
}
