//! Parameter archives (safetensors, `f64`) and the JSON manifest beside them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use autograd::Tensor;
use safetensors::{tensor::TensorView, Dtype, SafeTensors};
use serde::{Deserialize, Serialize};

use super::{DiscriminatorConfig, Generator, GeneratorConfig, ParamStore};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const ARCHIVE_FILE: &str = "params.safetensors";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Prefix of generator tensors inside an archive.
pub const GENERATOR_PREFIX: &str = "generator.";
/// Prefix of discriminator tensors inside an archive.
pub const DISCRIMINATOR_PREFIX: &str = "discriminator.";

/// Sidecar describing a checkpoint directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    /// Fully resolved run configuration that produced the checkpoint.
    pub config: serde_json::Value,
    pub generator: GeneratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discriminator: Option<DiscriminatorConfig>,
    pub epoch: u64,
    pub step: u64,
    /// Generator parameters.
    pub parameter_count: usize,
    /// Extra state owned by whoever wrote the checkpoint.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub state: serde_json::Value,
}

impl ModelManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| Error::CheckpointMismatch(format!("{}: {e}", path.display())))?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::CheckpointMismatch(format!(
                "format version {} (supported: {FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes named tensors as `f64` safetensors, atomically.
pub fn write_archive<'a>(path: &Path, tensors: impl IntoIterator<Item = (String, &'a Tensor)>) -> Result<()> {
    let owned: Vec<(String, Vec<usize>, Vec<u8>)> = tensors
        .into_iter()
        .map(|(k, t)| (k, t.shape().to_vec(), t.data().iter().flat_map(|v| v.to_le_bytes()).collect()))
        .collect();
    let views = owned
        .iter()
        .map(|(k, shape, bytes)| {
            TensorView::new(Dtype::F64, shape.clone(), bytes)
                .map(|v| (k.clone(), v))
                .map_err(|e| Error::Archive(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let bytes = safetensors::serialize(views, None).map_err(|e| Error::Archive(e.to_string()))?;
    write_atomic(path, &bytes)
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Reads every tensor of an `f64` safetensors archive.
pub fn read_archive(path: &Path) -> Result<BTreeMap<String, Tensor>> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    let st = SafeTensors::deserialize(&bytes).map_err(|e| Error::Archive(e.to_string()))?;
    let mut out = BTreeMap::new();
    for (name, view) in st.tensors() {
        if view.dtype() != Dtype::F64 {
            return Err(Error::Archive(format!("`{name}` is {:?}, expected F64", view.dtype())));
        }
        let data = view
            .data()
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        out.insert(name, Tensor::from_vec(view.shape(), data)?);
    }
    Ok(out)
}

/// Tensors under `prefix`, with the prefix removed.
pub fn strip_prefix(all: &BTreeMap<String, Tensor>, prefix: &str) -> ParamStore {
    let mut store = ParamStore::new();
    for (k, t) in all {
        if let Some(rest) = k.strip_prefix(prefix) {
            store.insert(rest, t.clone());
        }
    }
    store
}

impl Generator {
    /// Writes a generator-only checkpoint directory.
    pub fn save(&self, dir: &Path, config: serde_json::Value, epoch: u64, step: u64) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_archive(
            &dir.join(ARCHIVE_FILE),
            self.params().iter().map(|(k, t)| (format!("{GENERATOR_PREFIX}{k}"), t)),
        )?;
        ModelManifest {
            format_version: FORMAT_VERSION,
            config,
            generator: self.config().clone(),
            discriminator: None,
            epoch,
            step,
            parameter_count: self.parameter_count(),
            state: serde_json::Value::Null,
        }
        .write(dir)
    }

    /// Loads the generator of a checkpoint directory. When `expect` is given its
    /// architecture must match the stored one (the TFR switch may differ).
    pub fn load(dir: &Path, expect: Option<&GeneratorConfig>) -> Result<Self> {
        let manifest = ModelManifest::read(dir)?;
        let mut cfg = manifest.generator.clone();
        if let Some(e) = expect {
            let stored = GeneratorConfig { tfr_enabled: e.tfr_enabled, ..cfg.clone() };
            if &stored != e {
                return Err(Error::CheckpointMismatch(format!(
                    "checkpoint generator {:?} differs from requested {:?}",
                    manifest.generator, e
                )));
            }
            cfg = e.clone();
        }
        let mut g = Generator::new(cfg, 0).map_err(|e| Error::CheckpointMismatch(e.to_string()))?;
        let all = read_archive(&dir.join(ARCHIVE_FILE))?;
        g.params_mut().load_from(&strip_prefix(&all, GENERATOR_PREFIX))?;
        Ok(g)
    }
}
