//! Output files and their metadata sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use deconfrec::dataio::{write_dataset, InteractionDataset};
use deconfrec::mcdcf::{EpochRecord, ModelParams};
use deconfrec::numkit::{read_checkpoint, write_checkpoint};
use serde::{Deserialize, Serialize};

/// Provenance written next to every artifact whose own format has no room
/// for it. Holds no timestamps, so reruns reproduce it byte for byte.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_hash: Option<String>,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

pub fn write_meta(path: &Path, meta: &ArtifactMeta) -> anyhow::Result<()> {
    let mut json = serde_json::to_string_pretty(meta)?;
    json.push('\n');
    let target = meta_path(path);
    fs::write(&target, json).with_context(|| format!("writing {}", target.display()))
}

pub fn read_meta(path: &Path) -> anyhow::Result<Option<ArtifactMeta>> {
    let target = meta_path(path);
    if !target.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&target).with_context(|| format!("reading {}", target.display()))?;
    Ok(Some(serde_json::from_str(&text)?))
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn save_dataset(path: &Path, ds: &InteractionDataset, meta: &ArtifactMeta) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    write_dataset(ds, path)?;
    write_meta(path, meta)
}

pub fn save_model(path: &Path, model: &ModelParams, meta: &ArtifactMeta) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    write_checkpoint(&model.to_checkpoint(), path)?;
    write_meta(path, meta)
}

pub fn load_model(path: &Path) -> anyhow::Result<ModelParams> {
    Ok(ModelParams::from_checkpoint(read_checkpoint(path)?)?)
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LogLine<'a> {
    Run(&'a ArtifactMeta),
    Epoch(&'a EpochRecord),
}

/// Line-delimited JSON: one run record, then one record per epoch.
pub fn training_log(meta: &ArtifactMeta, log: &[EpochRecord]) -> anyhow::Result<String> {
    let mut out = serde_json::to_string(&LogLine::Run(meta))?;
    out.push('\n');
    for rec in log {
        out.push_str(&serde_json::to_string(&LogLine::Epoch(rec))?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> ArtifactMeta {
        ArtifactMeta {
            kind: "checkpoint".into(),
            config_hash: "ab".into(),
            seed: 3,
            method: Some("mf".into()),
            dataset_hash: None,
        }
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        assert_eq!(meta_path(&path), dir.path().join("model.ckpt.meta.json"));
        write_meta(&path, &meta()).unwrap();
        assert_eq!(read_meta(&path).unwrap(), Some(meta()));
        assert_eq!(read_meta(&dir.path().join("none")).unwrap(), None);
    }

    #[test]
    fn log_starts_with_run_record() {
        let rec = EpochRecord {
            epoch: 1,
            l_click: 0.5,
            l_elbo: 0.25,
            l_total: 0.75,
            val_recall: Some(0.1),
            wall_secs: 1.0,
        };
        let text = training_log(&meta(), &[rec]).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["record"], "run");
        assert_eq!(lines[0]["config_hash"], "ab");
        assert_eq!(lines[1]["record"], "epoch");
        assert_eq!(lines[1]["l_click"], 0.5);
    }
}
