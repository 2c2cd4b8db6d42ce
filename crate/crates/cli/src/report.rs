//! Report documents written by the commands.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use zscap_core::caption::{CaptionAverages, ClassF1};
use zscap_core::detection::{DiagnosisCounts, EvalReport};
use zscap_core::embeddings::EmbeddingMode;
use zscap_core::scoring::AlphaTrace;
use zscap_core::vocab::ClassRole;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetConfig {
    pub command: String,
    pub gt: String,
    pub classes: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dets: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vectors: Option<String>,
    pub iou_thresh: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetMetadata {
    /// `"detections"` when scored boxes were read directly, `"cells"` when
    /// they were produced from cell embeddings.
    pub detection_source: String,
    /// Class embedding used to score cells; absent for pre-scored input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_mode: Option<EmbeddingMode>,
    pub ap_interpolation: String,
    pub classes_without_ground_truth_excluded_from_map: bool,
    pub n_detections: usize,
    pub n_ground_truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetReport {
    pub config: DetConfig,
    pub metadata: DetMetadata,
    pub evaluation: EvalReport,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub config: DetConfig,
    pub fp_diagnosis: BTreeMap<String, DiagnosisCounts>,
    pub total_false_positives: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaConfig {
    pub command: String,
    pub cells: String,
    pub embeddings: String,
    pub lr: f64,
    pub epochs: usize,
    pub tau: f64,
    pub initial_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub config: AlphaConfig,
    pub alpha: f64,
    pub training_cells: usize,
    pub accuracy_at_initial_alpha: f64,
    pub accuracy_at_learned_alpha: f64,
    /// Entropy of unseen-imitation likelihoods summed over object cells, at
    /// the learned alpha.
    pub uncertainty_loss: f64,
    pub trace: AlphaTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapConfig {
    pub command: String,
    pub captions: String,
    pub classes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCaptionRow {
    pub role: ClassRole,
    /// Images where the class is named in some reference.
    pub relevant_images: usize,
    /// METEOR-family means over the relevant images; `null` without any.
    pub meteor: Option<f64>,
    pub v_meteor: Option<f64>,
    pub v_meteor_vis: Option<f64>,
    pub v_meteor_nvis: Option<f64>,
    pub f1: ClassF1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionOverall {
    /// Mean best-reference METEOR over all images.
    pub corpus_meteor: f64,
    pub all_classes: CaptionAverages,
    pub unseen_classes: CaptionAverages,
    pub avg_f1_all: f64,
    pub avg_f1_unseen: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapReport {
    pub config: CapConfig,
    pub images: usize,
    pub per_class: BTreeMap<String, ClassCaptionRow>,
    pub overall: CaptionOverall,
    /// Classes never named in a reference; left out of the METEOR-family
    /// averages.
    pub classes_without_relevant_images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub detection: DetReport,
    pub captioning: CapReport,
}
