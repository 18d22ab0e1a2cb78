//! Run record written next to every command's outputs.

use std::path::Path;

use asqg_core::train::hex_digest;
use asqg_core::Result;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(FileHash {
            path: path.display().to_string(),
            sha256: hex_digest(&bytes),
        })
    }
}

/// Object id of `bytes` as git computes it in a SHA-256 repository:
/// the hash of `blob <len>\0` followed by the content.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut buf = format!("blob {}\0", bytes.len()).into_bytes();
    buf.extend_from_slice(bytes);
    hex_digest(&buf)
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    /// Rendered training config, when the command has one.
    pub config: Option<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    /// Git-style object id of the checkpoint read or written.
    pub checkpoint: Option<String>,
    pub started: String,
    pub finished: String,
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            args: std::env::args().collect(),
            config: None,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            checkpoint: None,
            started: chrono::Utc::now().to_rfc3339(),
            finished: String::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileHash::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileHash::of(path)?);
        Ok(())
    }

    pub fn checkpoint(&mut self, path: &Path) -> Result<()> {
        self.checkpoint = Some(git_blob_hash(&std::fs::read(path)?));
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.finished = chrono::Utc::now().to_rfc3339();
        let json = serde_json::to_string_pretty(&self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

/// `<file>.manifest.json` next to `output`.
pub fn sidecar(output: &Path) -> std::path::PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_uses_git_header() {
        assert_eq!(git_blob_hash(b"hi"), hex_digest(b"blob 2\0hi"));
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            sidecar(Path::new("a/b.jsonl")),
            Path::new("a/b.jsonl.manifest.json")
        );
    }
}
