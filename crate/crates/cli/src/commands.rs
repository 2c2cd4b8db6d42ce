use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use zscap_core::caption::{average_classes, class_f1, corpus_v_meteor, meteor, CaptionItem};
use zscap_core::detection::{self, Detection, GroundTruth, DEFAULT_IOU_THRESHOLD};
use zscap_core::embeddings::{load_word_vectors, ClassVocabulary, EmbeddingMode, EmbeddingTable};
use zscap_core::pipeline::{detections_from_cells, EmbeddingFile};
use zscap_core::records::{load_jsonl, write_jsonl, CaptionRecord};
use zscap_core::scoring::{
    learn_alpha, uncertainty_loss, AlphaBatch, AlphaModel, CellEmbedding,
};
use zscap_core::vocab::{ClassList, ClassRole};

use crate::report::*;
use crate::{read_to_string, to_json, write_output, CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "zscap", version, about = "Zero-shot detection and caption evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build similarity class embeddings from a class list and word vectors.
    BuildEmbeddings(BuildEmbeddingsArgs),
    /// Score cell embeddings into detections (JSON lines).
    Score(ScoreArgs),
    /// Fit the unseen-class score scale on unseen-imitation classes.
    LearnAlpha(LearnAlphaArgs),
    /// Evaluate detections: per-class AP, seen/unseen mAP, HM, diagnosis.
    EvalDet(EvalDetArgs),
    /// Categorize false positives per superclass.
    Diagnose(DiagnoseArgs),
    /// Caption metrics: METEOR, V-METEOR and per-class F1.
    EvalCap(EvalCapArgs),
    /// Detection and caption evaluation in one report.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct BuildEmbeddingsArgs {
    #[arg(long)]
    pub classes: PathBuf,
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub cells: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LearnAlphaArgs {
    #[arg(long)]
    pub cells: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Starting value of alpha.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct DetectionInput {
    /// Scored detections (JSON lines).
    #[arg(long, conflicts_with = "cells")]
    pub dets: Option<PathBuf>,
    /// Cell embeddings with boxes (JSON lines), scored against class
    /// embeddings built from `--vectors`.
    #[arg(long, requires = "vectors")]
    pub cells: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// `sim` for class-to-class similarity embeddings, `raw` for word vectors.
    #[arg(long, default_value = "sim")]
    pub embedding_mode: EmbeddingMode,
}

#[derive(Debug, Args)]
pub struct EvalDetArgs {
    #[command(flatten)]
    pub input: DetectionInput,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub classes: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou_thresh: f64,
    /// Unseen-class scale used when scoring cells.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub dets: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub classes: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou_thresh: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalCapArgs {
    #[arg(long)]
    pub captions: PathBuf,
    #[arg(long)]
    pub classes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: DetectionInput,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub captions: PathBuf,
    #[arg(long)]
    pub classes: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou_thresh: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

/// Runs a parsed command and writes its output file. Warnings go to stderr.
pub fn run(cli: Cli) -> Result<()> {
    let (out, contents, warnings) = match cli.command {
        Command::BuildEmbeddings(a) => (a.out.clone(), to_json(&build_embeddings(&a)?), vec![]),
        Command::Score(a) => (a.out.clone(), score(&a)?, vec![]),
        Command::LearnAlpha(a) => (a.out.clone(), to_json(&learn_alpha_cmd(&a)?), vec![]),
        Command::EvalDet(a) => {
            let r = eval_det(&a)?;
            (a.out.clone(), to_json(&r), r.warnings.clone())
        }
        Command::Diagnose(a) => {
            let r = diagnose(&a)?;
            (a.out.clone(), to_json(&r), r.warnings.clone())
        }
        Command::EvalCap(a) => (a.out.clone(), to_json(&eval_cap(&a)?), vec![]),
        Command::Eval(a) => {
            let r = eval_pipeline(&a)?;
            (a.out.clone(), to_json(&r), r.detection.warnings.clone())
        }
    };
    for w in warnings {
        eprintln!("warning: {w}");
    }
    write_output(&out, &contents)
}

pub fn build_embeddings(args: &BuildEmbeddingsArgs) -> Result<EmbeddingFile> {
    let classes = ClassList::load(&args.classes)?;
    let words = load_word_vectors(&args.vectors)?;
    Ok(EmbeddingFile::build(&classes, &words)?)
}

fn load_embedding_file(path: &Path) -> Result<EmbeddingFile> {
    serde_json::from_str(&read_to_string(path)?).map_err(|e| {
        CliError::Core(zscap_core::Error::Format {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })
    })
}

pub fn score(args: &ScoreArgs) -> Result<String> {
    let file = load_embedding_file(&args.embeddings)?;
    let cells: Vec<CellEmbedding> = load_jsonl(&args.cells)?;
    let dets = detections_from_cells(&cells, &file.table(false)?, args.alpha)?;
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &dets).expect("writing to memory");
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

pub fn learn_alpha_cmd(args: &LearnAlphaArgs) -> Result<AlphaReport> {
    let file = load_embedding_file(&args.embeddings)?;
    let classes = file.class_list()?;
    if classes.imitation().next().is_none() {
        return Err(zscap_core::Error::Protocol("class list has no unseen-imitation classes".into()).into());
    }
    let table = file.table(true)?;
    let cells: Vec<CellEmbedding> = load_jsonl(&args.cells)?;
    let mut model = AlphaModel {
        alpha: args.alpha,
        learning_rate: args.lr,
        epochs: args.epochs,
        tau: args.tau,
    };
    let batch = AlphaBatch::from_cells(&cells, &table, &classes)?;
    let before = batch.accuracy(args.alpha);
    let trace = learn_alpha(&cells, &table, &classes, &mut model)?;
    let imitation: Vec<_> = table
        .entries
        .iter()
        .filter(|(r, _)| *r == ClassRole::UnseenImitation)
        .map(|(_, e)| e.clone())
        .collect();
    let h = uncertainty_loss(&cells, &imitation, model.tau, model.alpha)?;
    Ok(AlphaReport {
        config: AlphaConfig {
            command: "learn-alpha".into(),
            cells: display(&args.cells),
            embeddings: display(&args.embeddings),
            lr: args.lr,
            epochs: args.epochs,
            tau: args.tau,
            initial_alpha: args.alpha,
        },
        alpha: model.alpha,
        training_cells: batch.len(),
        accuracy_at_initial_alpha: before,
        accuracy_at_learned_alpha: batch.accuracy(model.alpha),
        uncertainty_loss: h,
        trace,
    })
}

struct LoadedDetections {
    dets: Vec<Detection>,
    source: &'static str,
    mode: Option<EmbeddingMode>,
}

fn load_detections(
    input: &DetectionInput,
    classes: &ClassList,
    alpha: f64,
) -> Result<LoadedDetections> {
    match (&input.dets, &input.cells) {
        (Some(path), None) => Ok(LoadedDetections {
            dets: load_jsonl(path)?,
            source: "detections",
            mode: None,
        }),
        (None, Some(cells_path)) => {
            let vectors = input
                .vectors
                .as_ref()
                .ok_or_else(|| CliError::Usage("--cells requires --vectors".into()))?;
            let words = load_word_vectors(vectors)?;
            let vocab = ClassVocabulary::new(classes.clone(), &words)?;
            let table = EmbeddingTable::build(&vocab, input.embedding_mode)?;
            let cells: Vec<CellEmbedding> = load_jsonl(cells_path)?;
            Ok(LoadedDetections {
                dets: detections_from_cells(&cells, &table, alpha)?,
                source: "cells",
                mode: Some(input.embedding_mode),
            })
        }
        _ => Err(CliError::Usage("exactly one of --dets or --cells is required".into())),
    }
}

fn orphan_warnings(report: &detection::EvalReport) -> Vec<String> {
    report
        .images_without_ground_truth
        .iter()
        .map(|id| format!("image `{id}` has detections but no ground truth; all its detections count as false positives"))
        .collect()
}

fn det_report(
    input: &DetectionInput,
    gt_path: &Path,
    classes_path: &Path,
    iou_thresh: f64,
    alpha: f64,
) -> Result<DetReport> {
    let classes = ClassList::load(classes_path)?;
    let gts: Vec<GroundTruth> = load_jsonl(gt_path)?;
    let loaded = load_detections(input, &classes, alpha)?;
    let evaluation = detection::evaluate(&loaded.dets, &gts, &classes, iou_thresh)?;
    Ok(DetReport {
        config: DetConfig {
            command: "eval-det".into(),
            gt: display(gt_path),
            classes: display(classes_path),
            dets: input.dets.as_deref().map(display),
            cells: input.cells.as_deref().map(display),
            vectors: input.vectors.as_deref().map(display),
            iou_thresh,
            alpha,
        },
        metadata: DetMetadata {
            detection_source: loaded.source.into(),
            embedding_mode: loaded.mode,
            ap_interpolation: "all-point".into(),
            classes_without_ground_truth_excluded_from_map: true,
            n_detections: loaded.dets.len(),
            n_ground_truth: gts.len(),
        },
        warnings: orphan_warnings(&evaluation),
        evaluation,
    })
}

pub fn eval_det(args: &EvalDetArgs) -> Result<DetReport> {
    det_report(&args.input, &args.gt, &args.classes, args.iou_thresh, args.alpha)
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<DiagnoseReport> {
    let classes = ClassList::load(&args.classes)?;
    let gts: Vec<GroundTruth> = load_jsonl(&args.gt)?;
    let dets: Vec<Detection> = load_jsonl(&args.dets)?;
    let report = detection::evaluate(&dets, &gts, &classes, args.iou_thresh)?;
    Ok(DiagnoseReport {
        config: DetConfig {
            command: "diagnose".into(),
            gt: display(&args.gt),
            classes: display(&args.classes),
            dets: Some(display(&args.dets)),
            cells: None,
            vectors: None,
            iou_thresh: args.iou_thresh,
            alpha: 1.0,
        },
        total_false_positives: report.false_positives,
        warnings: orphan_warnings(&report),
        fp_diagnosis: report.fp_diagnosis,
    })
}

fn cap_report(captions_path: &Path, classes_path: &Path) -> Result<CapReport> {
    let classes = ClassList::load(classes_path)?;
    let records: Vec<CaptionRecord> = load_jsonl(captions_path)?;
    if let Some(r) = records.iter().find(|r| r.references.is_empty()) {
        return Err(zscap_core::Error::Contract(format!("image `{}` has no references", r.image_id)).into());
    }
    let items: Vec<CaptionItem> = records.iter().map(CaptionRecord::to_item).collect();
    let corpus = corpus_v_meteor(&items, &classes, None)?;
    let mut per_class = std::collections::BTreeMap::new();
    let mut f1_all = Vec::new();
    let mut f1_unseen = Vec::new();
    for entry in classes.entries() {
        let f1 = if items.is_empty() {
            Default::default()
        } else {
            class_f1(&items, &entry.name)?
        };
        f1_all.push(f1.f1);
        if entry.role == ClassRole::Unseen {
            f1_unseen.push(f1.f1);
        }
        let scores = corpus.per_class.get(&entry.name);
        per_class.insert(
            entry.name.clone(),
            ClassCaptionRow {
                role: entry.role,
                relevant_images: scores.map_or(0, |s| s.images),
                meteor: scores.map(|s| s.meteor),
                v_meteor: scores.map(|s| s.v_meteor),
                v_meteor_vis: scores.map(|s| s.v_meteor_vis),
                v_meteor_nvis: scores.map(|s| s.v_meteor_nvis),
                f1,
            },
        );
    }
    let unseen_avg = average_classes(
        corpus
            .per_class
            .iter()
            .filter(|(name, _)| classes.get(name).is_some_and(|e| e.role == ClassRole::Unseen))
            .map(|(_, s)| s),
    );
    let mut corpus_meteor = 0.0;
    for item in &items {
        corpus_meteor += meteor(&item.candidate, &item.references)?.score;
    }
    if !items.is_empty() {
        corpus_meteor /= items.len() as f64;
    }
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(CapReport {
        config: CapConfig {
            command: "eval-cap".into(),
            captions: display(captions_path),
            classes: display(classes_path),
        },
        images: items.len(),
        per_class,
        overall: CaptionOverall {
            corpus_meteor,
            all_classes: corpus.overall,
            unseen_classes: unseen_avg,
            avg_f1_all: mean(&f1_all),
            avg_f1_unseen: mean(&f1_unseen),
        },
        classes_without_relevant_images: corpus.excluded_classes,
    })
}

pub fn eval_cap(args: &EvalCapArgs) -> Result<CapReport> {
    cap_report(&args.captions, &args.classes)
}

pub fn eval_pipeline(args: &EvalArgs) -> Result<PipelineReport> {
    let mut detection = det_report(&args.input, &args.gt, &args.classes, args.iou_thresh, args.alpha)?;
    detection.config.command = "eval".into();
    let mut captioning = cap_report(&args.captions, &args.classes)?;
    captioning.config.command = "eval".into();
    Ok(PipelineReport {
        detection,
        captioning,
    })
}
