//! Word-vector loading and similarity-based class embeddings.
//!
//! A class embedding describes a class through its word-vector similarity to
//! every seen class: coordinate `k` holds `φ(c)·φ(s_k) + 1`, where `s_k` is
//! the k-th seen class in class-list order and `φ` is the unit-normalized
//! class-name vector. With unit vectors every coordinate lies in `[0, 2]`.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::vocab::{ClassList, ClassRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordVector {
    pub token: String,
    pub values: Vec<f64>,
}

/// Word vectors of a single dimension, keyed by token.
#[derive(Debug, Clone, Default)]
pub struct WordVectors {
    dim: usize,
    map: HashMap<String, WordVector>,
}

impl WordVectors {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&WordVector> {
        self.map.get(token)
    }

    pub fn insert(&mut self, vector: WordVector) -> Result<()> {
        if vector.values.is_empty() {
            return Err(Error::Contract(format!(
                "vector for `{}` is empty",
                vector.token
            )));
        }
        if self.map.is_empty() {
            self.dim = vector.values.len();
        } else if vector.values.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.values.len(),
            });
        }
        self.map.insert(vector.token.clone(), vector);
        Ok(())
    }

    /// Parses `token v1 ... vD` lines. Blank lines are skipped.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut out = WordVectors::default();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::format(lineno, e.to_string()))?;
            let mut fields = line.split_ascii_whitespace();
            let Some(token) = fields.next() else {
                continue;
            };
            let values = fields
                .map(|f| match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    Ok(_) => Err(Error::format(lineno, format!("non-finite value `{f}`"))),
                    Err(_) => Err(Error::format(lineno, format!("cannot parse `{f}` as float"))),
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.is_empty() {
                return Err(Error::format(lineno, format!("token `{token}` has no values")));
            }
            if !out.map.is_empty() && values.len() != out.dim {
                return Err(Error::format(
                    lineno,
                    format!(
                        "dimension mismatch: expected {}, got {}",
                        out.dim,
                        values.len()
                    ),
                ));
            }
            if out.map.contains_key(token) {
                return Err(Error::format(lineno, format!("duplicate token `{token}`")));
            }
            out.insert(WordVector {
                token: token.to_string(),
                values,
            })?;
        }
        Ok(out)
    }
}

impl FromIterator<(String, Vec<f64>)> for WordVectors {
    /// Panics on inconsistent dimensions; intended for fixtures.
    fn from_iter<I: IntoIterator<Item = (String, Vec<f64>)>>(iter: I) -> Self {
        let mut out = WordVectors::default();
        for (token, values) in iter {
            out.insert(WordVector { token, values })
                .expect("consistent word-vector dimensions");
        }
        out
    }
}

pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<WordVectors> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    WordVectors::from_reader(std::io::BufReader::new(file))
}

/// Mean of the per-word vectors of a class name, normalized to unit length.
pub fn class_name_vector(name: &str, vectors: &WordVectors) -> Result<WordVector> {
    let mut sum = vec![0.0; vectors.dim()];
    let mut count = 0usize;
    for word in name.split_ascii_whitespace() {
        let v = vectors
            .get(word)
            .ok_or_else(|| Error::UnknownToken(word.to_string()))?;
        for (s, x) in sum.iter_mut().zip(&v.values) {
            *s += x;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Contract("empty class name".into()));
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let values = linalg::normalized(&mean)
        .ok_or_else(|| Error::Degenerate(format!("word vector of `{name}` has zero norm")))?;
    Ok(WordVector {
        token: name.to_string(),
        values,
    })
}

/// A class list with every class resolved to its unit class-name vector.
#[derive(Debug, Clone)]
pub struct ClassVocabulary {
    classes: ClassList,
    vectors: HashMap<String, WordVector>,
}

impl ClassVocabulary {
    pub fn new(classes: ClassList, words: &WordVectors) -> Result<Self> {
        let vectors = classes
            .entries()
            .iter()
            .map(|e| Ok((e.name.clone(), class_name_vector(&e.name, words)?)))
            .collect::<Result<HashMap<_, _>>>()?;
        Ok(Self { classes, vectors })
    }

    pub fn classes(&self) -> &ClassList {
        &self.classes
    }

    pub fn vector(&self, name: &str) -> Result<&WordVector> {
        self.vectors
            .get(name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn dim(&self) -> usize {
        self.vectors.values().next().map_or(0, |v| v.values.len())
    }
}

/// Class embedding. In similarity mode `vector` has one coordinate per seen
/// class; in raw mode it is the class-name word vector itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEmbedding {
    pub class_name: String,
    pub vector: Vec<f64>,
}

pub fn build_class_embedding(class_name: &str, vocab: &ClassVocabulary) -> Result<ClassEmbedding> {
    let phi = &vocab.vector(class_name)?.values;
    let vector = vocab
        .classes()
        .seen()
        .map(|s| Ok(linalg::dot(phi, &vocab.vector(&s.name)?.values) + 1.0))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ClassEmbedding {
        class_name: class_name.to_string(),
        vector,
    })
}

/// Zeroes the coordinates of unseen-imitation classes.
pub fn mask_unseen_imitation(embedding: &ClassEmbedding, classes: &ClassList) -> ClassEmbedding {
    let mask = classes.imitation_mask();
    let vector = embedding
        .vector
        .iter()
        .zip(mask.iter().chain(std::iter::repeat(&false)))
        .map(|(&v, &masked)| if masked { 0.0 } else { v })
        .collect();
    ClassEmbedding {
        class_name: embedding.class_name.clone(),
        vector,
    }
}

/// Unit class-name vector used directly as the class embedding.
pub fn raw_class_embedding(class_name: &str, vocab: &ClassVocabulary) -> Result<ClassEmbedding> {
    Ok(ClassEmbedding {
        class_name: class_name.to_string(),
        vector: vocab.vector(class_name)?.values.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// Class-to-class similarity embeddings.
    #[default]
    Similarity,
    /// Class-name word vectors.
    Raw,
}

impl std::str::FromStr for EmbeddingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sim" | "similarity" => Ok(EmbeddingMode::Similarity),
            "raw" => Ok(EmbeddingMode::Raw),
            other => Err(format!("unknown embedding mode `{other}` (expected sim or raw)")),
        }
    }
}

/// Embeddings for every class in the list, in list order.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub mode: EmbeddingMode,
    pub entries: Vec<(ClassRole, ClassEmbedding)>,
}

impl EmbeddingTable {
    pub fn build(vocab: &ClassVocabulary, mode: EmbeddingMode) -> Result<Self> {
        let entries = vocab
            .classes()
            .entries()
            .iter()
            .map(|e| {
                let emb = match mode {
                    EmbeddingMode::Similarity => build_class_embedding(&e.name, vocab)?,
                    EmbeddingMode::Raw => raw_class_embedding(&e.name, vocab)?,
                };
                Ok((e.role, emb))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { mode, entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.first().map_or(0, |(_, e)| e.vector.len())
    }

    /// Same table with unseen-imitation coordinates zeroed in every entry.
    pub fn masked(&self, classes: &ClassList) -> Self {
        Self {
            mode: self.mode,
            entries: self
                .entries
                .iter()
                .map(|(r, e)| (*r, mask_unseen_imitation(e, classes)))
                .collect(),
        }
    }
}
