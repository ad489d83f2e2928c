//! Model checkpoints in the chunked container layout under magic `CVRN`.
//! The header is the JSON of [`CheckpointHeader`]; records hold every
//! parameter-store entry in store order.

use std::path::Path;

use cvrnet_core::model::Architecture;
use cvrnet_core::{Model, ModelConfig, ParamStore, Scalar, Tensor};
use serde::{Deserialize, Serialize};

use crate::container::{self, Record};
use crate::{fs, Error, Result};

pub const MAGIC: [u8; 4] = *b"CVRN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    /// Seed the run was started from.
    pub seed: u64,
    /// Class names in label order, empty when unknown.
    #[serde(default)]
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub entries: Vec<Record>,
}

/// Outcome of a name-matched import.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImportReport {
    pub imported: Vec<String>,
    /// Checkpoint entries left out, with the reason.
    pub rejected: Vec<(String, String)>,
    /// Model entries the checkpoint did not provide.
    pub untouched: Vec<String>,
}

pub fn encode<T: Scalar>(model: &Model<T>, seed: u64, class_names: &[String]) -> Vec<u8> {
    let header = CheckpointHeader { model: model.config().clone(), seed, class_names: class_names.to_vec() };
    let json = serde_json::to_string(&header).expect("header serializes");
    let records = model
        .params()
        .iter()
        .map(|(name, t)| (name, t.shape(), t.data().iter().map(|v| v.as_f64() as f32).collect::<Vec<f32>>()));
    container::encode(MAGIC, VERSION, &json, records)
}

pub fn save_checkpoint<T: Scalar>(path: &Path, model: &Model<T>, seed: u64, class_names: &[String]) -> Result<()> {
    fs::write_atomic(path, &encode(model, seed, class_names))
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    let c = container::decode(bytes, MAGIC, VERSION).map_err(|e| e.to_string())?;
    let header: CheckpointHeader = serde_json::from_str(&c.header).map_err(|e| format!("header: {}", e))?;
    Ok(Checkpoint { header, entries: c.records })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|d| Error::Mismatch(format!("{}: {}", path.display(), d)))
}

/// Reads a checkpoint and rebuilds the model it describes.
pub fn load_checkpoint(path: &Path) -> Result<Model<f32>> {
    read_checkpoint(path)?.into_model()
}

fn tensor(r: &Record) -> Tensor<f32> {
    Tensor::new(&r.shape, r.data.clone()).expect("record payload matches its extents")
}

impl Checkpoint {
    /// Rebuilds the model; entries must match the architecture of the stored
    /// config one for one, and the first disagreement is reported.
    pub fn into_model(self) -> Result<Model<f32>> {
        let arch = Architecture::new(&self.header.model).map_err(|e| Error::Mismatch(format!("stored config: {}", e)))?;
        for (i, spec) in arch.specs.iter().enumerate() {
            let Some(r) = self.entries.get(i) else {
                return Err(Error::Mismatch(format!("entry {}: missing, expected `{}` {:?}", i, spec.name, spec.shape)));
            };
            if r.name != spec.name || r.shape != spec.shape {
                return Err(Error::Mismatch(format!(
                    "entry {}: `{}` {:?}, expected `{}` {:?}",
                    i, r.name, r.shape, spec.name, spec.shape
                )));
            }
        }
        if let Some(extra) = self.entries.get(arch.specs.len()) {
            return Err(Error::Mismatch(format!("entry {}: unexpected `{}`", arch.specs.len(), extra.name)));
        }
        let mut store = ParamStore::new();
        for (spec, r) in arch.specs.iter().zip(&self.entries) {
            store.add(&r.name, tensor(r), spec.trainable)?;
        }
        Ok(Model::from_parts(arch, store)?)
    }

    /// Overwrites every model entry whose name and shape match; anything else
    /// is listed rather than applied.
    pub fn import_partial(&self, model: &mut Model<f32>) -> ImportReport {
        let mut report = ImportReport::default();
        let store = model.params_mut();
        let mut seen = vec![false; store.len()];
        for r in &self.entries {
            match store.id(&r.name) {
                None => report.rejected.push((r.name.clone(), "no such parameter in the model".into())),
                Some(id) if store.value(id).shape() != r.shape.as_slice() => {
                    let reason = format!("shape {:?} in checkpoint, {:?} in model", r.shape, store.value(id).shape());
                    report.rejected.push((r.name.clone(), reason));
                }
                Some(id) => {
                    store.set(id, tensor(r)).expect("shape checked above");
                    seen[id.index()] = true;
                    report.imported.push(r.name.clone());
                }
            }
        }
        report.untouched = store.ids().filter(|id| !seen[id.index()]).map(|id| store.name(id).to_string()).collect();
        report
    }
}
