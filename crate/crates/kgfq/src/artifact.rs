//! Every file the driver writes carries its provenance: tool version, config
//! hash and seed. JSON artifacts embed it next to a `kind` tag; line-oriented
//! files (JSONL, plain text) get a `<file>.provenance.json` sidecar so their
//! own schema stays untouched. Nothing time-dependent is recorded, so equal
//! inputs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const TOOL: &str = "kgfq";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SIDECAR_SUFFIX: &str = ".provenance.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn of(cfg: &RunConfig) -> Self {
        Provenance { tool: TOOL.into(), version: VERSION.into(), config_hash: cfg.hash(), seed: cfg.seed }
    }
}

/// A JSON artifact: `kind` and `provenance` followed by the body's fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact<T> {
    pub kind: String,
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: T,
}

impl<T: DeserializeOwned> Artifact<T> {
    /// Splits the envelope off by hand: serde's flattening cannot read back
    /// maps with integer keys.
    fn from_value(v: serde_json::Value) -> std::result::Result<Self, String> {
        let serde_json::Value::Object(mut map) = v else { return Err("artifact is not a JSON object".into()) };
        let kind = match map.remove("kind") {
            Some(serde_json::Value::String(k)) => k,
            _ => return Err("not a kgfq artifact (no `kind`)".into()),
        };
        let provenance = map.remove("provenance").ok_or("artifact has no provenance")?;
        let provenance = serde_json::from_value(provenance).map_err(|e| format!("provenance: {e}"))?;
        let body = serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| e.to_string())?;
        Ok(Artifact { kind, provenance, body })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    kind: String,
    file: String,
    provenance: Provenance,
}

/// Destination directory plus the provenance stamped on everything written there.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub provenance: Provenance,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: PathBuf, provenance: Provenance) -> Self {
        Output { dir, provenance, written: Vec::new() }
    }

    /// Paths written so far, in order.
    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        log::info!("wrote {}", path.display());
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes a JSON artifact after checking it reads back as `T`.
    pub fn json<T: Serialize + DeserializeOwned>(&mut self, name: &str, kind: &str, body: &T) -> Result<PathBuf> {
        let artifact = Artifact { kind: kind.to_string(), provenance: self.provenance.clone(), body };
        let mut text = serde_json::to_string_pretty(&artifact).map_err(|e| Error::schema(name, e))?;
        text.push('\n');
        let value = serde_json::from_str(&text).map_err(|e| Error::schema(name, e))?;
        let back = Artifact::<T>::from_value(value).map_err(|e| Error::schema(name, e))?;
        if back.kind != kind {
            return Err(Error::schema(name, "artifact does not read back"));
        }
        self.put(name, text.as_bytes())
    }

    /// Writes a line-oriented file and its provenance sidecar.
    pub fn text(&mut self, name: &str, kind: &str, contents: &str) -> Result<PathBuf> {
        let path = self.put(name, contents.as_bytes())?;
        let sidecar = Sidecar { kind: kind.to_string(), file: name.to_string(), provenance: self.provenance.clone() };
        let mut meta = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        meta.push('\n');
        self.put(&format!("{name}{SIDECAR_SUFFIX}"), meta.as_bytes())?;
        Ok(path)
    }

    pub fn jsonl<T: Serialize>(&mut self, name: &str, kind: &str, records: &[T]) -> Result<PathBuf> {
        let mut text = String::new();
        for r in records {
            text.push_str(&serde_json::to_string(r).map_err(|e| Error::schema(name, e))?);
            text.push('\n');
        }
        self.text(name, kind, &text)
    }

    /// Markdown carries its provenance in a trailing comment line.
    pub fn markdown(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let p = &self.provenance;
        let text = format!("{body}\n<!-- {} {} config sha256:{} seed {} -->\n", p.tool, p.version, p.config_hash, p.seed);
        self.put(name, text.as_bytes())
    }
}

/// Reads a JSON artifact of `kind`. A missing file is a missing checkpoint.
pub fn read_artifact<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<Artifact<T>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::MissingCheckpoint(path.to_path_buf())),
        Err(e) => return Err(Error::io(path, e)),
    };
    let head: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::schema(path, e))?;
    match head.get("kind").and_then(|k| k.as_str()) {
        Some(k) if k == kind => {}
        Some(k) => return Err(Error::schema(path, format!("expected a `{kind}` artifact, found `{k}`"))),
        None => return Err(Error::schema(path, "not a kgfq artifact (no `kind`)")),
    }
    Artifact::from_value(head).map_err(|e| Error::schema(path, e))
}

/// Kind tag of any artifact file, for commands that accept several kinds.
pub fn artifact_kind(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::schema(path, e))?;
    v.get("kind")
        .and_then(|k| k.as_str())
        .map(str::to_string)
        .ok_or_else(|| Error::schema(path, "not a kgfq artifact (no `kind`)"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Body {
        values: Vec<f64>,
        names: BTreeMap<String, u32>,
        histogram: BTreeMap<usize, usize>,
    }

    fn out(dir: &Path) -> Output {
        Output::new(dir.to_path_buf(), Provenance::of(&RunConfig::default()))
    }

    #[test]
    fn json_artifacts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let body = Body { values: vec![0.0, 1.5, -2.25], names: [("a".into(), 1)].into(), histogram: [(3, 4)].into() };
        let path = out(dir.path()).json("x.json", "test", &body).unwrap();
        let back: Artifact<Body> = read_artifact(&path, "test").unwrap();
        assert_eq!(back.body, body);
        assert_eq!(back.provenance.version, VERSION);
        assert!(matches!(read_artifact::<Body>(&path, "other"), Err(Error::Schema { .. })));
        assert!(matches!(read_artifact::<Body>(&dir.path().join("nope.json"), "test"), Err(Error::MissingCheckpoint(_))));
    }

    #[test]
    fn line_files_get_sidecars() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = out(dir.path());
        o.text("a.txt", "export", "line\n").unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("a.txt")).unwrap(), "line\n");
        let meta = fs::read_to_string(dir.path().join("a.txt.provenance.json")).unwrap();
        assert!(meta.contains("config_hash"));
        assert_eq!(o.written().len(), 2);
    }
}
