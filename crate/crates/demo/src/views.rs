use serde::Serialize;
use zscap_core::caption::{align, meteor, tokenize, v_meteor, Alignment};
use zscap_core::detection::{
    classify_false_positive, iou, BBox, Detection, FpCategory, GroundTruth,
};
use zscap_core::scoring::{entropy_with_score_gradient, unseen_likelihoods};
use zscap_core::vocab::ClassList;

type ViewResult = Result<String, String>;

fn json<T: Serialize>(v: &T) -> ViewResult {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn classes_from(text: &str) -> Result<ClassList, String> {
    ClassList::from_reader(text.as_bytes()).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Token {
    text: String,
    /// Index of the aligned reference token.
    aligned_to: Option<usize>,
}

#[derive(Serialize)]
struct CaptionView {
    candidate: Vec<Token>,
    reference: Vec<String>,
    reference_index: usize,
    matches: usize,
    chunks: usize,
    precision: f64,
    recall: f64,
    f_mean: f64,
    penalty: f64,
    meteor: f64,
    f_mean_visual: f64,
    f_mean_non_visual: f64,
    v_meteor: f64,
    v_meteor_vis: f64,
    v_meteor_nvis: f64,
}

pub fn score_caption(candidate: &str, references: &str, class_name: &str, classes: &str) -> ViewResult {
    let classes = classes_from(classes)?;
    let cand = tokenize(candidate);
    let refs: Vec<Vec<String>> = references
        .lines()
        .map(tokenize)
        .filter(|r| !r.is_empty())
        .collect();
    let m = meteor(&cand, &refs).map_err(|e| e.to_string())?;
    let v = v_meteor(&cand, &refs, class_name.trim(), &classes).map_err(|e| e.to_string())?;
    let best = &refs[m.reference];
    let Alignment { pairs, .. } = align(&cand, best);
    let candidate = cand
        .iter()
        .enumerate()
        .map(|(i, t)| Token {
            text: t.clone(),
            aligned_to: pairs.iter().find(|p| p.0 == i).map(|p| p.1),
        })
        .collect();
    json(&CaptionView {
        candidate,
        reference: best.clone(),
        reference_index: m.reference,
        matches: m.matches,
        chunks: m.chunks,
        precision: m.precision,
        recall: m.recall,
        f_mean: m.f_mean,
        penalty: m.penalty,
        meteor: m.score,
        f_mean_visual: v.f_mean_v,
        f_mean_non_visual: v.f_mean_n,
        v_meteor: v.v_meteor,
        v_meteor_vis: v.v_meteor_vis,
        v_meteor_nvis: v.v_meteor_nvis,
    })
}

#[derive(Serialize)]
struct TemperatureView {
    scaled_scores: Vec<f64>,
    likelihoods: Vec<f64>,
    entropy: f64,
    max_entropy: f64,
    /// Derivative of the entropy with respect to each scaled score.
    gradient: Vec<f64>,
}

fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: `{s}`")))
        .collect()
}

pub fn temperature(scores: &str, tau: f64, alpha: f64) -> ViewResult {
    let scaled: Vec<f64> = parse_numbers(scores)?.into_iter().map(|s| s * alpha).collect();
    let probs = unseen_likelihoods(&scaled, tau).map_err(|e| e.to_string())?;
    let (h, grad) = entropy_with_score_gradient(&scaled, tau).map_err(|e| e.to_string())?;
    json(&TemperatureView {
        max_entropy: (scaled.len() as f64).ln(),
        scaled_scores: scaled,
        likelihoods: probs,
        entropy: h,
        gradient: grad,
    })
}

#[derive(Serialize)]
struct BoxView {
    iou: f64,
    true_positive: bool,
    /// Set when the detection is a false positive.
    category: Option<FpCategory>,
}

fn parse_box(text: &str) -> Result<BBox, String> {
    let v = parse_numbers(text)?;
    let [x, y, w, h] = v[..] else {
        return Err(format!("expected x,y,w,h, got {} numbers", v.len()));
    };
    BBox::new(x, y, w, h).map_err(|e| e.to_string())
}

pub fn diagnose_box(
    det_box: &str,
    det_class: &str,
    gt_box: &str,
    gt_class: &str,
    classes: &str,
    iou_thresh: f64,
) -> ViewResult {
    let classes = classes_from(classes)?;
    let det = Detection {
        image_id: "demo".into(),
        class_name: det_class.trim().into(),
        score: 1.0,
        bbox: parse_box(det_box)?,
    };
    let gt = GroundTruth {
        image_id: "demo".into(),
        class_name: gt_class.trim().into(),
        bbox: parse_box(gt_box)?,
    };
    let overlap = iou(&det.bbox, &gt.bbox);
    let tp = det.class_name == gt.class_name && overlap >= iou_thresh;
    let category = if tp {
        None
    } else {
        Some(classify_false_positive(&det, &[&gt], &classes).map_err(|e| e.to_string())?)
    };
    json(&BoxView {
        iou: overlap,
        true_positive: tp,
        category,
    })
}
