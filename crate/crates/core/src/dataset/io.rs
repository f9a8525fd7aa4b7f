//! On-disk dataset layout: `manifest.json` plus one raw little-endian `f64`
//! file per record holding `p_a`, `p_a_goal` and `p_b` back to back.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use xdisp_sim::Vec3;

use super::record::{DemoRecord, RecordMeta};
use crate::error::{CoreError, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
const ARRAYS: [&str; 3] = ["p_a", "p_a_goal", "p_b"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DemoSet {
    /// Free-form provenance (regime, seed, generator settings).
    pub meta: BTreeMap<String, String>,
    pub records: Vec<DemoRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RecordEntry {
    file: String,
    arrays: Vec<ArrayEntry>,
    #[serde(flatten)]
    meta: RecordMeta,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    dtype: String,
    endianness: String,
    meta: BTreeMap<String, String>,
    records: Vec<RecordEntry>,
}

fn record_file(i: usize) -> String {
    format!("record_{i:05}.bin")
}

pub fn save_dataset(set: &DemoSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let mut entries = Vec::with_capacity(set.records.len());
    for (i, rec) in set.records.iter().enumerate() {
        rec.validate()?;
        let clouds = [&rec.p_a, &rec.p_a_goal, &rec.p_b];
        let mut bytes = Vec::with_capacity(clouds.iter().map(|c| c.len() * 24).sum());
        for p in clouds.iter().flat_map(|c| c.iter()).flatten() {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        let file = record_file(i);
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(|e| CoreError::io(&path, e))?;
        entries.push(RecordEntry {
            file,
            arrays: ARRAYS
                .iter()
                .zip(clouds)
                .map(|(name, c)| ArrayEntry {
                    name: name.to_string(),
                    shape: vec![c.len(), 3],
                })
                .collect(),
            meta: rec.meta.clone(),
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dtype: "f64".into(),
        endianness: "little".into(),
        meta: set.meta.clone(),
        records: entries,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CoreError::format(&path, e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| CoreError::io(&path, e))
}

pub fn load_dataset(dir: &Path) -> Result<DemoSet> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CoreError::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CoreError::format(&path, format!("corrupt manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(CoreError::format(
            &path,
            format!("unknown format_version {}", manifest.format_version),
        ));
    }
    if manifest.dtype != "f64" || manifest.endianness != "little" {
        return Err(CoreError::format(
            &path,
            format!(
                "unsupported storage {} / {}",
                manifest.dtype, manifest.endianness
            ),
        ));
    }
    let mut records = Vec::with_capacity(manifest.records.len());
    for entry in manifest.records {
        let file = dir.join(&entry.file);
        let names: Vec<&str> = entry.arrays.iter().map(|a| a.name.as_str()).collect();
        if names != ARRAYS
            || entry
                .arrays
                .iter()
                .any(|a| a.shape.len() != 2 || a.shape[1] != 3)
        {
            return Err(CoreError::format(
                &file,
                format!(
                    "record {} must declare p_a, p_a_goal, p_b as n x 3",
                    entry.file
                ),
            ));
        }
        let bytes = fs::read(&file).map_err(|e| CoreError::io(&file, e))?;
        let declared: usize = entry.arrays.iter().map(|a| a.shape[0] * 3 * 8).sum();
        if bytes.len() != declared {
            return Err(CoreError::format(
                &file,
                format!(
                    "record {} declares {declared} bytes but holds {}",
                    entry.file,
                    bytes.len()
                ),
            ));
        }
        let mut vals = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
        let mut take = |n: usize| -> Vec<Vec3> {
            (0..n)
                .map(|_| {
                    let mut p = [0.0; 3];
                    for x in &mut p {
                        *x = vals.next().expect("length checked");
                    }
                    p
                })
                .collect()
        };
        let rec = DemoRecord {
            p_a: take(entry.arrays[0].shape[0]),
            p_a_goal: take(entry.arrays[1].shape[0]),
            p_b: take(entry.arrays[2].shape[0]),
            meta: entry.meta,
        };
        rec.validate()
            .map_err(|e| CoreError::format(&file, format!("record {}: {e}", entry.file)))?;
        records.push(rec);
    }
    Ok(DemoSet {
        meta: manifest.meta,
        records,
    })
}
