//! Per-sentence token embedding sequences stored in the tensor container.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::artifact::ArtifactMeta;
use crate::container::{Container, NamedTensor};
use crate::error::{CheckpointError, Error, Result};

const KIND: &str = "embeddings";

#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingSequence {
    pub study_id: String,
    pub sentence_index: usize,
    /// One row per token.
    pub vectors: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    dim: usize,
    /// `(study_id, sentence_index, rows)` in storage order.
    index: Vec<(String, usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<ArtifactMeta>,
}

/// All sequences concatenated into one `[total_rows, dim]` tensor; the header
/// indexes the row ranges.
pub fn embeddings_container(seqs: &[TokenEmbeddingSequence], meta: Option<&ArtifactMeta>) -> Result<Container> {
    let dim = seqs.first().map_or(0, |s| s.vectors.ncols());
    if seqs.iter().any(|s| s.vectors.nrows() == 0 || s.vectors.ncols() != dim) {
        return Err(Error::Feature("embedding sequences must be non-empty with a uniform dimension".into()));
    }
    let header = Header {
        kind: KIND.into(),
        dim,
        index: seqs
            .iter()
            .map(|s| (s.study_id.clone(), s.sentence_index, s.vectors.nrows()))
            .collect(),
        meta: meta.cloned(),
    };
    let total: usize = seqs.iter().map(|s| s.vectors.nrows()).sum();
    let data: Vec<f64> = seqs.iter().flat_map(|s| s.vectors.iter().copied()).collect();
    let mut c = Container::new(serde_json::to_value(header).expect("header serializes"));
    c.push(NamedTensor::from_f64("vectors", &[total, dim], &data));
    Ok(c)
}

pub fn embeddings_from_container(c: &Container) -> Result<Vec<TokenEmbeddingSequence>> {
    let header: Header =
        serde_json::from_value(c.header.clone()).map_err(|e| CheckpointError::Header(e.to_string()))?;
    if header.kind != KIND {
        return Err(CheckpointError::Header(format!("container holds `{}`, not embeddings", header.kind)).into());
    }
    let t = c
        .get("vectors")
        .ok_or_else(|| CheckpointError::MissingTensor("vectors".into()))?;
    let total: usize = header.index.iter().map(|e| e.2).sum();
    if t.shape != [total, header.dim] {
        return Err(CheckpointError::Shape {
            name: "vectors".into(),
            found: t.shape.clone(),
            expected: vec![total, header.dim],
        }
        .into());
    }
    let mut out = Vec::with_capacity(header.index.len());
    let mut row = 0;
    for (study_id, sentence_index, rows) in header.index {
        let start = row * header.dim;
        let slice = &t.data[start..start + rows * header.dim];
        let vectors = Array2::from_shape_fn((rows, header.dim), |(i, j)| slice[i * header.dim + j] as f64);
        out.push(TokenEmbeddingSequence {
            study_id,
            sentence_index,
            vectors,
        });
        row += rows;
    }
    Ok(out)
}

pub fn write_embeddings(path: &Path, meta: &ArtifactMeta, seqs: &[TokenEmbeddingSequence]) -> Result<()> {
    embeddings_container(seqs, Some(meta))?.save(path)
}

pub fn read_embeddings(path: &Path) -> Result<Vec<TokenEmbeddingSequence>> {
    embeddings_from_container(&Container::load(path)?)
}
