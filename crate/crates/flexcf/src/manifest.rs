//! Run manifest: every emitted file with its SHA-256.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::artifacts::{self, FORMAT};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    format: &'a str,
    files: BTreeMap<&'a str, String>,
}

/// Output files collected in memory and written together, manifest last.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: BTreeMap<String, Vec<u8>>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        let name = name.into();
        assert!(name != MANIFEST_NAME, "reserved file name");
        self.files.insert(name, contents.into());
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    pub fn manifest(&self) -> Result<String> {
        artifacts::to_json(&Manifest {
            format: FORMAT,
            files: self.files.iter().map(|(k, v)| (k.as_str(), sha256_hex(v))).collect(),
        })
    }

    /// Write every file into `dir` (created if needed); returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::with_capacity(self.files.len() + 1);
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        let path = dir.join(MANIFEST_NAME);
        fs::write(&path, self.manifest()?).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_lists_files_sorted() {
        let mut out = OutputSet::new();
        out.add("b.csv", "x\n");
        out.add("a.json", "{}\n");
        let m = out.manifest().unwrap();
        assert!(m.find("a.json").unwrap() < m.find("b.csv").unwrap());
        let dir = tempfile::tempdir().unwrap();
        let paths = out.write(dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        assert_eq!(fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap(), m);
    }
}
