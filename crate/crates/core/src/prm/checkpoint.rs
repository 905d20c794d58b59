use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Graph, PrmArch, PrmModel};
use crate::artifact::ArtifactMeta;
use crate::container::{Container, NamedTensor};
use crate::error::{CheckpointError, Result};

const KIND: &str = "prm";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    model_version: String,
    arch: PrmArch,
    vocab_size: usize,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<ArtifactMeta>,
}

pub fn to_container(model: &PrmModel, meta: Option<&ArtifactMeta>) -> Container {
    let header = Header {
        kind: KIND.into(),
        model_version: model.version.clone(),
        arch: model.arch,
        vocab_size: model.arch.vocab_size,
        seed: model.seed,
        meta: meta.cloned(),
    };
    let mut c = Container::new(serde_json::to_value(header).expect("header serializes"));
    for spec in model.layout.specs() {
        let data = &model.params[spec.offset..spec.offset + spec.numel()];
        c.push(NamedTensor::from_f64(spec.name.clone(), &spec.shape, data));
    }
    c
}

pub fn from_container(c: &Container) -> Result<PrmModel> {
    let header: Header =
        serde_json::from_value(c.header.clone()).map_err(|e| CheckpointError::Header(e.to_string()))?;
    if header.kind != KIND {
        return Err(CheckpointError::Header(format!("container holds `{}`, not a PRM", header.kind)).into());
    }
    if header.vocab_size != header.arch.vocab_size {
        return Err(CheckpointError::Header("vocab_size disagrees with arch".into()).into());
    }
    header.arch.validate()?;
    let (layout, _) = Graph::build(&header.arch);
    let mut params = vec![0.0; layout.len()];
    for spec in layout.specs() {
        let t = c
            .get(&spec.name)
            .ok_or_else(|| CheckpointError::MissingTensor(spec.name.clone()))?;
        if t.shape != spec.shape {
            return Err(CheckpointError::Shape {
                name: spec.name.clone(),
                found: t.shape.clone(),
                expected: spec.shape.clone(),
            }
            .into());
        }
        for (dst, &src) in params[spec.offset..spec.offset + spec.numel()].iter_mut().zip(&t.data) {
            *dst = src as f64;
        }
    }
    PrmModel::from_parts(header.arch, params, header.seed, header.model_version)
}

pub fn save_checkpoint(model: &PrmModel, path: &Path, meta: Option<&ArtifactMeta>) -> Result<()> {
    to_container(model, meta).save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<PrmModel> {
    from_container(&Container::load(path)?)
}
