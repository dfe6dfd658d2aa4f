use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CSV_FORMAT_VERSION: u32 = 1;
pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub format_version: u32,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub input: String,
    pub spec: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjusted: Option<String>,
    pub output_dir: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub started_at: String,
    pub finished_at: String,
    pub artifacts: Vec<Artifact>,
}

/// Current time, or `SOURCE_DATE_EPOCH` when set so reruns are byte-identical.
pub fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|s| DateTime::<Utc>::from_timestamp(s, 0));
    fixed
        .unwrap_or_else(Utc::now)
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Writes files into one directory via temp-file-then-rename, recording each one.
pub struct OutputDir {
    dir: PathBuf,
    pub artifacts: Vec<Artifact>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn write_unlisted(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp-{}", std::process::id()));
        let mut file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        file.write_all(bytes)
            .and_then(|_| file.sync_all())
            .with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &target).with_context(|| format!("renaming to {}", target.display()))?;
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8], format_version: u32) -> Result<()> {
        self.write_unlisted(name, bytes)?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            format_version,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T, format_version: u32) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes, format_version)
    }

    pub fn finish(mut self, name: &str, mut manifest: RunManifest) -> Result<()> {
        manifest.artifacts = std::mem::take(&mut self.artifacts);
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        self.write_unlisted(name, &bytes)
    }
}
