//! Glue between record files and the metric modules.

use serde::{Deserialize, Serialize};

use crate::detection::{BBox, Detection};
use crate::embeddings::{
    build_class_embedding, mask_unseen_imitation, ClassEmbedding, ClassVocabulary,
    EmbeddingMode, EmbeddingTable, WordVectors,
};
use crate::error::{Error, Result};
use crate::scoring::{score_cells, CellEmbedding};
use crate::vocab::{ClassEntry, ClassList, ClassRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub name: String,
    pub role: ClassRole,
    pub superclass: String,
    pub embedding: Vec<f64>,
    /// Embedding with unseen-imitation coordinates zeroed; present when the
    /// class list has unseen-imitation classes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked: Option<Vec<f64>>,
}

/// Similarity embeddings of a whole class list, as written by
/// `build-embeddings`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingFile {
    /// Coordinate order of every embedding.
    pub seen_classes: Vec<String>,
    pub classes: Vec<EmbeddingRecord>,
}

impl EmbeddingFile {
    pub fn build(classes: &ClassList, words: &WordVectors) -> Result<Self> {
        let vocab = ClassVocabulary::new(classes.clone(), words)?;
        let has_imitation = classes.imitation().next().is_some();
        let records = classes
            .entries()
            .iter()
            .map(|e| {
                let emb = build_class_embedding(&e.name, &vocab)?;
                let masked = has_imitation.then(|| mask_unseen_imitation(&emb, classes).vector);
                Ok(EmbeddingRecord {
                    name: e.name.clone(),
                    role: e.role,
                    superclass: e.superclass.clone(),
                    embedding: emb.vector,
                    masked,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            seen_classes: classes.seen().map(|e| e.name.clone()).collect(),
            classes: records,
        })
    }

    pub fn class_list(&self) -> Result<ClassList> {
        ClassList::new(
            self.classes
                .iter()
                .map(|r| ClassEntry::new(r.name.clone(), r.role, r.superclass.clone()))
                .collect(),
        )
    }

    /// Table of plain or masked embeddings.
    pub fn table(&self, masked: bool) -> Result<EmbeddingTable> {
        let dim = self.seen_classes.len();
        let entries = self
            .classes
            .iter()
            .map(|r| {
                let vector = if masked {
                    r.masked.clone().ok_or_else(|| {
                        Error::Protocol(format!("no masked embedding for `{}`", r.name))
                    })?
                } else {
                    r.embedding.clone()
                };
                if vector.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: vector.len(),
                    });
                }
                Ok((
                    r.role,
                    ClassEmbedding {
                        class_name: r.name.clone(),
                        vector,
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EmbeddingTable {
            mode: EmbeddingMode::Similarity,
            entries,
        })
    }
}

/// One detection per object cell that carries a box: the best-scoring class,
/// with score `objectness × class score`.
pub fn detections_from_cells(
    cells: &[CellEmbedding],
    table: &EmbeddingTable,
    alpha: f64,
) -> Result<Vec<Detection>> {
    let dim = table.dim();
    for c in cells {
        if c.vector.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: c.vector.len(),
            });
        }
    }
    let scores = score_cells(cells, table, alpha)?;
    let mut out = Vec::new();
    for (cell, row) in cells.iter().zip(&scores.rows) {
        let Some(bbox) = cell.bbox else { continue };
        if !cell.is_object() {
            continue;
        }
        let Some(best) = crate::scoring::argmax(&row.scores) else {
            continue;
        };
        out.push(Detection {
            image_id: cell.image_id.clone(),
            class_name: scores.class_names[best].clone(),
            score: cell.objectness * row.scores[best],
            bbox: BBox::try_from(bbox)?,
        });
    }
    Ok(out)
}
