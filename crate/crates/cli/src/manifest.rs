use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::Command;

/// Sidecar describing one invocation well enough to re-run it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Every flag after defaults and sidecar lookups were resolved.
    pub command: Command,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    /// File names under `out_dir`.
    pub outputs: Vec<String>,
    pub out_dir: PathBuf,
    pub version: String,
    pub wall_time_ms: u64,
}

impl RunManifest {
    pub fn file_name(stem: &str) -> String {
        format!("{stem}.manifest.json")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

fn strip_wall_times(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !k.starts_with("wall_time"));
            map.values_mut().for_each(strip_wall_times);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_wall_times),
        _ => {}
    }
}

/// Byte equality, except that JSON files are compared with every
/// `wall_time*` field removed.
pub fn same_output(a: &Path, b: &Path) -> Result<bool> {
    let x = std::fs::read(a).with_context(|| format!("reading {}", a.display()))?;
    let y = std::fs::read(b).with_context(|| format!("reading {}", b.display()))?;
    if a.extension().is_some_and(|e| e == "json") {
        if let (Ok(mut p), Ok(mut q)) = (serde_json::from_slice::<Value>(&x), serde_json::from_slice::<Value>(&y)) {
            strip_wall_times(&mut p);
            strip_wall_times(&mut q);
            return Ok(p == q);
        }
    }
    Ok(x == y)
}
