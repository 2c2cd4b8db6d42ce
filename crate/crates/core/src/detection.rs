//! Detection evaluation: IoU, greedy matching, all-point average precision,
//! seen/unseen mAP with their harmonic mean, and false-positive diagnosis.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{ClassList, ClassRole};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
/// Minimum overlap for a false positive to count as touching an object.
pub const DIAGNOSIS_MIN_OVERLAP: f64 = 0.1;

/// Axis-aligned box `(x, y)` top-left, `w × h` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::Contract(format!(
                "invalid box [{x}, {y}, {w}, {h}]: width and height must be positive"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from([x, y, w, h]: [f64; 4]) -> Result<Self> {
        BBox::new(x, y, w, h)
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    #[serde(rename = "class")]
    pub class_name: String,
    pub score: f64,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: String,
    #[serde(rename = "class")]
    pub class_name: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Detection indices by descending score; ties keep input order.
    pub order: Vec<usize>,
    /// True-positive flag per detection index.
    pub is_tp: Vec<bool>,
    /// Matched ground-truth index per detection index.
    pub matched_gt: Vec<Option<usize>>,
}

impl MatchResult {
    /// TP flags of one class in ranked order.
    pub fn ranked_flags(&self, dets: &[Detection], class_name: &str) -> Vec<bool> {
        self.order
            .iter()
            .filter(|&&i| dets[i].class_name == class_name)
            .map(|&i| self.is_tp[i])
            .collect()
    }
}

pub fn rank_by_score(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    order
}

/// Greedy matching: in score order, each detection takes the unmatched
/// same-image same-class ground truth with the highest IoU at or above
/// `iou_thresh`; IoU ties go to the earlier ground truth.
pub fn match_detections(dets: &[Detection], gts: &[GroundTruth], iou_thresh: f64) -> MatchResult {
    let mut by_key: HashMap<(&str, &str), Vec<usize>> = HashMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_key
            .entry((g.image_id.as_str(), g.class_name.as_str()))
            .or_default()
            .push(i);
    }
    let order = rank_by_score(dets);
    let mut used = vec![false; gts.len()];
    let mut is_tp = vec![false; dets.len()];
    let mut matched_gt = vec![None; dets.len()];
    for &d in &order {
        let det = &dets[d];
        let Some(cands) = by_key.get(&(det.image_id.as_str(), det.class_name.as_str())) else {
            continue;
        };
        let mut best: Option<(usize, f64)> = None;
        for &g in cands {
            if used[g] {
                continue;
            }
            let o = iou(&det.bbox, &gts[g].bbox);
            if o >= iou_thresh && best.is_none_or(|(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        if let Some((g, _)) = best {
            used[g] = true;
            is_tp[d] = true;
            matched_gt[d] = Some(g);
        }
    }
    MatchResult {
        order,
        is_tp,
        matched_gt,
    }
}

/// All-point interpolated AP over ranked TP/FP flags.
pub fn average_precision(flags: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 || flags.is_empty() {
        return 0.0;
    }
    let mut tp = 0usize;
    let precision: Vec<f64> = flags
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            tp += usize::from(f);
            tp as f64 / (k + 1) as f64
        })
        .collect();
    let mut ap = 0.0;
    let mut envelope = 0.0f64;
    for (k, &f) in flags.iter().enumerate().rev() {
        envelope = envelope.max(precision[k]);
        if f {
            ap += envelope;
        }
    }
    ap / n_gt as f64
}

pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisCounts {
    pub localization: usize,
    pub background: usize,
    pub similar_object: usize,
    pub other: usize,
}

impl DiagnosisCounts {
    pub fn total(&self) -> usize {
        self.localization + self.background + self.similar_object + self.other
    }

    fn add(&mut self, cat: FpCategory) {
        match cat {
            FpCategory::Localization => self.localization += 1,
            FpCategory::Background => self.background += 1,
            FpCategory::SimilarObject => self.similar_object += 1,
            FpCategory::Other => self.other += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpCategory {
    Localization,
    Background,
    SimilarObject,
    Other,
}

/// Category of one false positive, checked in order: localization (same
/// class, overlap at least 0.1), similar object (other class of the same
/// superclass), other (different superclass), background.
pub fn classify_false_positive(
    det: &Detection,
    gts: &[&GroundTruth],
    classes: &ClassList,
) -> Result<FpCategory> {
    let det_super = classes.superclass_of(&det.class_name)?;
    let mut similar = false;
    let mut other = false;
    let mut localization = false;
    for g in gts {
        let g_super = classes.superclass_of(&g.class_name)?;
        if iou(&det.bbox, &g.bbox) < DIAGNOSIS_MIN_OVERLAP {
            continue;
        }
        if g.class_name == det.class_name {
            localization = true;
        } else if g_super == det_super {
            similar = true;
        } else {
            other = true;
        }
    }
    Ok(if localization {
        FpCategory::Localization
    } else if similar {
        FpCategory::SimilarObject
    } else if other {
        FpCategory::Other
    } else {
        FpCategory::Background
    })
}

/// Diagnosis of every false positive, keyed by the detection's superclass.
pub fn diagnose_false_positives(
    dets: &[Detection],
    gts: &[GroundTruth],
    classes: &ClassList,
    iou_thresh: f64,
) -> Result<BTreeMap<String, DiagnosisCounts>> {
    let matches = match_detections(dets, gts, iou_thresh);
    diagnose_with_matches(dets, gts, classes, &matches)
}

pub fn diagnose_with_matches(
    dets: &[Detection],
    gts: &[GroundTruth],
    classes: &ClassList,
    matches: &MatchResult,
) -> Result<BTreeMap<String, DiagnosisCounts>> {
    let mut by_image: HashMap<&str, Vec<&GroundTruth>> = HashMap::new();
    for g in gts {
        classes.require(&g.class_name)?;
        by_image.entry(g.image_id.as_str()).or_default().push(g);
    }
    let mut out: BTreeMap<String, DiagnosisCounts> = BTreeMap::new();
    for &d in &matches.order {
        if matches.is_tp[d] {
            continue;
        }
        let det = &dets[d];
        let image_gts = by_image.get(det.image_id.as_str()).map_or(&[][..], |v| v);
        let cat = classify_false_positive(det, image_gts, classes)?;
        out.entry(classes.superclass_of(&det.class_name)?.to_string())
            .or_default()
            .add(cat);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class_ap: BTreeMap<String, f64>,
    pub seen_map: f64,
    pub unseen_map: f64,
    pub hm: f64,
    pub fp_diagnosis: BTreeMap<String, DiagnosisCounts>,
    /// Classes without ground truth; left out of the mAP averages.
    pub excluded_classes: Vec<String>,
    pub true_positives: usize,
    pub false_positives: usize,
    /// Detection images that have no ground truth at all.
    pub images_without_ground_truth: Vec<String>,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub fn evaluate(
    dets: &[Detection],
    gts: &[GroundTruth],
    classes: &ClassList,
    iou_thresh: f64,
) -> Result<EvalReport> {
    if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
        return Err(Error::Contract(format!(
            "IoU threshold must lie in (0, 1], got {iou_thresh}"
        )));
    }
    for d in dets {
        classes.require(&d.class_name)?;
        if !d.score.is_finite() {
            return Err(Error::Contract(format!("non-finite score in image {}", d.image_id)));
        }
    }
    for g in gts {
        classes.require(&g.class_name)?;
    }
    let matches = match_detections(dets, gts, iou_thresh);
    let mut gt_count: HashMap<&str, usize> = HashMap::new();
    for g in gts {
        *gt_count.entry(g.class_name.as_str()).or_default() += 1;
    }
    let mut per_class_ap = BTreeMap::new();
    let mut excluded = Vec::new();
    let mut seen_aps = Vec::new();
    let mut unseen_aps = Vec::new();
    for entry in classes.entries() {
        let n_gt = gt_count.get(entry.name.as_str()).copied().unwrap_or(0);
        let ap = average_precision(&matches.ranked_flags(dets, &entry.name), n_gt);
        per_class_ap.insert(entry.name.clone(), ap);
        if n_gt == 0 {
            excluded.push(entry.name.clone());
        } else if entry.role == ClassRole::Unseen {
            unseen_aps.push(ap);
        } else {
            seen_aps.push(ap);
        }
    }
    let seen_map = mean(&seen_aps);
    let unseen_map = mean(&unseen_aps);
    let gt_images: HashSet<&str> = gts.iter().map(|g| g.image_id.as_str()).collect();
    let mut orphan: Vec<String> = dets
        .iter()
        .filter(|d| !gt_images.contains(d.image_id.as_str()))
        .map(|d| d.image_id.clone())
        .collect();
    orphan.sort();
    orphan.dedup();
    let tp = matches.is_tp.iter().filter(|&&t| t).count();
    Ok(EvalReport {
        per_class_ap,
        seen_map,
        unseen_map,
        hm: harmonic_mean(seen_map, unseen_map),
        fp_diagnosis: diagnose_with_matches(dets, gts, classes, &matches)?,
        excluded_classes: excluded,
        true_positives: tp,
        false_positives: dets.len() - tp,
        images_without_ground_truth: orphan,
    })
}
