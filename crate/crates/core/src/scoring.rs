//! Compatibility scores, unseen-class score scaling and the entropy-based
//! calibration loss, plus gradient-descent fitting of the scale coefficient.

use serde::{Deserialize, Serialize};

use crate::embeddings::{ClassEmbedding, EmbeddingTable};
use crate::error::{Error, Result};
use crate::linalg;
use crate::vocab::{ClassList, ClassRole};

/// Cells with objectness at or above this value count as object cells.
pub const OBJECTNESS_THRESHOLD: f64 = 0.5;

pub const ALPHA_MIN: f64 = 0.1;
pub const ALPHA_MAX: f64 = 10.0;

/// One grid cell of detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEmbedding {
    pub image_id: String,
    pub cell_index: usize,
    pub objectness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub vector: Vec<f64>,
    /// Box predicted by the cell, `[x, y, w, h]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
}

impl CellEmbedding {
    pub fn is_object(&self) -> bool {
        self.objectness >= OBJECTNESS_THRESHOLD
    }

    pub fn validate(&self) -> Result<()> {
        if self.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "cell {}/{} has non-finite entries",
                self.image_id, self.cell_index
            )));
        }
        if !(0.0..=1.0).contains(&self.objectness) {
            return Err(Error::Contract(format!(
                "cell {}/{} objectness {} outside [0, 1]",
                self.image_id, self.cell_index, self.objectness
            )));
        }
        Ok(())
    }
}

/// Cosine similarity between two vectors of equal length.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            actual: a.len(),
        });
    }
    let na = linalg::norm(a);
    let nb = linalg::norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("zero-norm vector in cosine".into()));
    }
    Ok((linalg::dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn compatibility(cell: &CellEmbedding, class: &ClassEmbedding) -> Result<f64> {
    cosine(&cell.vector, &class.vector)
}

/// Which roles receive the scale coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalePolicy {
    /// Only unseen classes are scaled.
    Inference,
    /// Unseen-imitation classes are scaled as well.
    AlphaTraining,
}

impl ScalePolicy {
    pub fn scales(self, role: ClassRole) -> bool {
        match role {
            ClassRole::Unseen => true,
            ClassRole::UnseenImitation => self == ScalePolicy::AlphaTraining,
            ClassRole::Seen => false,
        }
    }
}

pub fn scale(score: f64, role: ClassRole, alpha: f64, policy: ScalePolicy) -> f64 {
    if policy.scales(role) {
        score * alpha
    } else {
        score
    }
}

pub fn scaled_score(
    cell: &CellEmbedding,
    class: &ClassEmbedding,
    role: ClassRole,
    alpha: f64,
    policy: ScalePolicy,
) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Contract(format!("alpha must be positive, got {alpha}")));
    }
    Ok(scale(compatibility(cell, class)?, role, alpha, policy))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Contract(format!("tau must be positive, got {tau}")))
    }
}

/// Temperature softmax over unseen-class scores.
pub fn unseen_likelihoods(scores: &[f64], tau: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Contract("unseen class set is empty".into()));
    }
    check_tau(tau)?;
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| ((s - max) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Shannon entropy in nats with `0 log 0 = 0`.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Entropy of the temperature softmax and its gradient with respect to the
/// raw scores: `dH/df_k = -p_k (ln p_k + H) / tau`.
pub fn entropy_with_score_gradient(scores: &[f64], tau: f64) -> Result<(f64, Vec<f64>)> {
    let p = unseen_likelihoods(scores, tau)?;
    let h = entropy(&p);
    let grad = p
        .iter()
        .map(|&pk| if pk > 0.0 { -pk * (pk.ln() + h) / tau } else { 0.0 })
        .collect();
    Ok((h, grad))
}

/// Sum over object cells of the entropy of unseen-class likelihoods.
/// Unseen scores are multiplied by `alpha`; pass 1.0 for raw scores.
pub fn uncertainty_loss(
    cells: &[CellEmbedding],
    unseen: &[ClassEmbedding],
    tau: f64,
    alpha: f64,
) -> Result<f64> {
    if unseen.is_empty() {
        return Err(Error::Contract("unseen class set is empty".into()));
    }
    check_tau(tau)?;
    let mut loss = 0.0;
    for cell in cells.iter().filter(|c| c.is_object()) {
        let scores = unseen
            .iter()
            .map(|e| compatibility(cell, e).map(|s| s * alpha))
            .collect::<Result<Vec<f64>>>()?;
        loss += entropy(&unseen_likelihoods(&scores, tau)?);
    }
    Ok(loss)
}

/// Scale coefficient and its training configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaModel {
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub tau: f64,
}

impl Default for AlphaModel {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            learning_rate: 0.1,
            epochs: 10,
            tau: 1.0,
        }
    }
}

/// Labeled compatibility scores over the seen classes, ready for fitting.
#[derive(Debug, Clone)]
pub struct AlphaBatch {
    /// Row per labeled cell, column per seen class.
    pub scores: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Columns that are scaled (unseen-imitation classes).
    pub scaled: Vec<bool>,
}

impl AlphaBatch {
    /// Scores each labeled cell against the seen-class rows of `table`,
    /// which should already carry the unseen-imitation mask.
    pub fn from_cells(
        cells: &[CellEmbedding],
        table: &EmbeddingTable,
        classes: &ClassList,
    ) -> Result<Self> {
        let seen: Vec<(usize, &ClassEmbedding)> = table
            .entries
            .iter()
            .filter(|(role, _)| role.is_seen())
            .map(|(_, e)| e)
            .enumerate()
            .collect();
        let scaled: Vec<bool> = seen
            .iter()
            .map(|(_, e)| classes.get(&e.class_name).map(|c| c.role) == Some(ClassRole::UnseenImitation))
            .collect();
        if !scaled.iter().any(|&s| s) {
            return Err(Error::Protocol("no unseen-imitation classes".into()));
        }
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for cell in cells {
            let Some(label) = &cell.label else { continue };
            cell.validate()?;
            let idx = seen
                .iter()
                .position(|(_, e)| &e.class_name == label)
                .ok_or_else(|| {
                    if classes.contains(label) {
                        Error::Protocol(format!("training label `{label}` is not a seen class"))
                    } else {
                        Error::UnknownClass(label.clone())
                    }
                })?;
            let row = seen
                .iter()
                .map(|(_, e)| compatibility(cell, e))
                .collect::<Result<Vec<f64>>>()?;
            scores.push(row);
            labels.push(idx);
        }
        if labels.is_empty() {
            return Err(Error::Protocol("no labeled training cells".into()));
        }
        Ok(Self {
            scores,
            labels,
            scaled,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn logits(&self, row: &[f64], alpha: f64, tau: f64) -> Vec<f64> {
        row.iter()
            .zip(&self.scaled)
            .map(|(&s, &sc)| if sc { alpha * s } else { s } / tau)
            .collect()
    }

    /// Mean softmax cross-entropy and its derivative with respect to alpha.
    pub fn objective(&self, alpha: f64, tau: f64) -> (f64, f64) {
        let mut loss = 0.0;
        let mut grad = 0.0;
        for (row, &y) in self.scores.iter().zip(&self.labels) {
            let z = self.logits(row, alpha, tau);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            loss += max + total.ln() - z[y];
            for (k, (&e, &s)) in exps.iter().zip(row).enumerate() {
                if !self.scaled[k] {
                    continue;
                }
                let p = e / total;
                let target = if k == y { 1.0 } else { 0.0 };
                grad += (p - target) * s / tau;
            }
        }
        let n = self.len() as f64;
        (loss / n, grad / n)
    }

    /// Fraction of rows whose scaled argmax equals the label. Ties go to the
    /// lower column index.
    pub fn accuracy(&self, alpha: f64) -> f64 {
        let correct = self
            .scores
            .iter()
            .zip(&self.labels)
            .filter(|(row, &y)| {
                let z = self.logits(row, alpha, 1.0);
                argmax(&z) == Some(y)
            })
            .count();
        correct as f64 / self.len() as f64
    }
}

pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlphaTrace {
    pub initial_alpha: f64,
    /// Objective before each epoch, followed by the final objective.
    pub loss_history: Vec<f64>,
    pub alpha_history: Vec<f64>,
}

/// Full-batch gradient descent on alpha alone.
pub fn fit_alpha(batch: &AlphaBatch, model: &mut AlphaModel) -> Result<AlphaTrace> {
    if !(model.alpha > 0.0) {
        return Err(Error::Contract(format!("alpha must be positive, got {}", model.alpha)));
    }
    if !(model.learning_rate > 0.0) {
        return Err(Error::Contract(format!(
            "learning rate must be positive, got {}",
            model.learning_rate
        )));
    }
    check_tau(model.tau)?;
    if batch.is_empty() {
        return Err(Error::Protocol("no labeled training cells".into()));
    }
    let mut trace = AlphaTrace {
        initial_alpha: model.alpha,
        ..Default::default()
    };
    model.alpha = model.alpha.clamp(ALPHA_MIN, ALPHA_MAX);
    for _ in 0..model.epochs {
        let (loss, grad) = batch.objective(model.alpha, model.tau);
        trace.loss_history.push(loss);
        trace.alpha_history.push(model.alpha);
        model.alpha = (model.alpha - model.learning_rate * grad).clamp(ALPHA_MIN, ALPHA_MAX);
    }
    trace.loss_history.push(batch.objective(model.alpha, model.tau).0);
    trace.alpha_history.push(model.alpha);
    Ok(trace)
}

/// Fits alpha on labeled cells with unseen-imitation classes treated as
/// unseen. `table` must already be masked.
pub fn learn_alpha(
    cells: &[CellEmbedding],
    table: &EmbeddingTable,
    classes: &ClassList,
    model: &mut AlphaModel,
) -> Result<AlphaTrace> {
    if classes.imitation().next().is_none() {
        return Err(Error::Protocol("no unseen-imitation classes".into()));
    }
    let batch = AlphaBatch::from_cells(cells, table, classes)?;
    fit_alpha(&batch, model)
}

/// Inference scores of every class for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub image_id: String,
    pub cell_index: usize,
    pub objectness: f64,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub class_names: Vec<String>,
    pub alpha: f64,
    pub rows: Vec<ScoreRow>,
}

/// Scores every cell against every class, scaling unseen classes by `alpha`.
pub fn score_cells(cells: &[CellEmbedding], table: &EmbeddingTable, alpha: f64) -> Result<ScoreTable> {
    if !(alpha > 0.0) {
        return Err(Error::Contract(format!("alpha must be positive, got {alpha}")));
    }
    let rows = cells
        .iter()
        .map(|cell| {
            cell.validate()?;
            let scores = table
                .entries
                .iter()
                .map(|(role, e)| {
                    compatibility(cell, e).map(|s| scale(s, *role, alpha, ScalePolicy::Inference))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(ScoreRow {
                image_id: cell.image_id.clone(),
                cell_index: cell.cell_index,
                objectness: cell.objectness,
                scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreTable {
        class_names: table.entries.iter().map(|(_, e)| e.class_name.clone()).collect(),
        alpha,
        rows,
    })
}
