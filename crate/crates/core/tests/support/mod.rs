//! Brute-force reference implementations used by the test suites. They share
//! no code with the library paths they check.
#![allow(dead_code)]

use std::collections::BTreeMap;

/// IoU from corner coordinates.
pub fn iou_corners(a: [f64; 4], b: [f64; 4]) -> f64 {
    let (ax2, ay2, bx2, by2) = (a[0] + a[2], a[1] + a[3], b[0] + b[2], b[1] + b[3]);
    let left = if a[0] > b[0] { a[0] } else { b[0] };
    let right = if ax2 < bx2 { ax2 } else { bx2 };
    let top = if a[1] > b[1] { a[1] } else { b[1] };
    let bottom = if ay2 < by2 { ay2 } else { by2 };
    if right <= left || bottom <= top {
        return 0.0;
    }
    let inter = (right - left) * (bottom - top);
    inter / (a[2] * a[3] + b[2] * b[3] - inter)
}

#[derive(Debug, Clone)]
pub struct OracleDet {
    pub image: String,
    pub class: String,
    pub score: f64,
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone)]
pub struct OracleGt {
    pub image: String,
    pub class: String,
    pub bbox: [f64; 4],
}

/// Detection indices ranked by score, ties by index (insertion sort).
pub fn oracle_rank(dets: &[OracleDet]) -> Vec<usize> {
    let mut order: Vec<usize> = Vec::new();
    for i in 0..dets.len() {
        let pos = order
            .iter()
            .position(|&j| dets[j].score < dets[i].score)
            .unwrap_or(order.len());
        order.insert(pos, i);
    }
    order
}

/// Greedy matching recovered by exhaustive search: over every injective
/// partial assignment of detections to eligible ground truths, take the one
/// whose per-detection key sequence `(iou, -gt_index)` (unmatched lowest) is
/// lexicographically largest in ranked order. Returns the TP flag per
/// detection index.
pub fn oracle_match(dets: &[OracleDet], gts: &[OracleGt], thresh: f64) -> Vec<bool> {
    let order = oracle_rank(dets);
    let eligible: Vec<Vec<(usize, f64)>> = order
        .iter()
        .map(|&d| {
            gts.iter()
                .enumerate()
                .filter(|(_, g)| g.image == dets[d].image && g.class == dets[d].class)
                .map(|(gi, g)| (gi, iou_corners(dets[d].bbox, g.bbox)))
                .filter(|&(_, o)| o >= thresh)
                .collect()
        })
        .collect();
    let mut best: Option<(Vec<(f64, i64)>, Vec<Option<usize>>)> = None;
    let mut current = Vec::new();
    let mut keys = Vec::new();
    let mut used = vec![false; gts.len()];
    enumerate(&eligible, 0, &mut used, &mut current, &mut keys, &mut best);
    let (_, assignment) = best.expect("at least the empty assignment");
    let mut flags = vec![false; dets.len()];
    for (rank, a) in assignment.iter().enumerate() {
        flags[order[rank]] = a.is_some();
    }
    flags
}

fn lex_greater(a: &[(f64, i64)], b: &[(f64, i64)]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x.0 != y.0 {
            return x.0 > y.0;
        }
        if x.1 != y.1 {
            return x.1 > y.1;
        }
    }
    false
}

fn enumerate(
    eligible: &[Vec<(usize, f64)>],
    k: usize,
    used: &mut Vec<bool>,
    current: &mut Vec<Option<usize>>,
    keys: &mut Vec<(f64, i64)>,
    best: &mut Option<(Vec<(f64, i64)>, Vec<Option<usize>>)>,
) {
    if k == eligible.len() {
        if best.as_ref().is_none_or(|(bk, _)| lex_greater(keys, bk)) {
            *best = Some((keys.clone(), current.clone()));
        }
        return;
    }
    current.push(None);
    keys.push((-1.0, 0));
    enumerate(eligible, k + 1, used, current, keys, best);
    current.pop();
    keys.pop();
    for &(g, o) in &eligible[k] {
        if used[g] {
            continue;
        }
        used[g] = true;
        current.push(Some(g));
        keys.push((o, -(g as i64)));
        enumerate(eligible, k + 1, used, current, keys, best);
        current.pop();
        keys.pop();
        used[g] = false;
    }
}

/// All-point AP by integrating interpolated precision over the recall
/// levels `1/n, 2/n, ..., 1`.
pub fn oracle_ap(flags: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut points = Vec::new();
    let mut tp = 0;
    for (k, &f) in flags.iter().enumerate() {
        if f {
            tp += 1;
        }
        points.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
    }
    let mut total = 0.0;
    for level in 1..=n_gt {
        let r = level as f64 / n_gt as f64;
        let interp = points
            .iter()
            .filter(|(rec, _)| *rec >= r - 1e-12)
            .map(|&(_, p)| p)
            .fold(0.0, f64::max);
        total += interp;
    }
    total / n_gt as f64
}

fn chunks_of(mut pairs: Vec<(usize, usize)>) -> usize {
    pairs.sort();
    let mut chunks = 0;
    let mut last: Option<(usize, usize)> = None;
    for p in pairs {
        match last {
            Some((i, j)) if p.0 == i + 1 && p.1 == j + 1 => {}
            _ => chunks += 1,
        }
        last = Some(p);
    }
    chunks
}

/// Injective sequences of length `k` drawn from `pool`.
fn arrangements(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, &x) in pool.iter().enumerate() {
        let mut rest = pool.to_vec();
        rest.remove(i);
        for mut tail in arrangements(&rest, k - 1) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

/// `(matches, chunks)` of the best alignment by enumerating every maximum
/// matching: per token type, every injection of the rarer side's positions
/// into the other side's.
pub fn oracle_alignment(cand: &[&str], refr: &[&str]) -> (usize, usize) {
    let mut types: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, t) in cand.iter().enumerate() {
        types.entry(t).or_default().0.push(i);
    }
    for (j, t) in refr.iter().enumerate() {
        if let Some(e) = types.get_mut(t) {
            e.1.push(j);
        }
    }
    // Per type: list of alternative pair sets.
    let options: Vec<Vec<Vec<(usize, usize)>>> = types
        .values()
        .filter(|(c, r)| !c.is_empty() && !r.is_empty())
        .map(|(c, r)| {
            if c.len() <= r.len() {
                arrangements(r, c.len())
                    .into_iter()
                    .map(|sel| c.iter().copied().zip(sel).collect())
                    .collect()
            } else {
                arrangements(c, r.len())
                    .into_iter()
                    .map(|sel| sel.into_iter().zip(r.iter().copied()).collect())
                    .collect()
            }
        })
        .collect();
    let m: usize = options.iter().map(|o| o[0].len()).sum();
    let mut best = usize::MAX;
    let mut stack = Vec::new();
    product(&options, 0, &mut stack, &mut best);
    (m, if m == 0 { 0 } else { best })
}

fn product(
    options: &[Vec<Vec<(usize, usize)>>],
    k: usize,
    stack: &mut Vec<(usize, usize)>,
    best: &mut usize,
) {
    if k == options.len() {
        *best = (*best).min(chunks_of(stack.clone()));
        return;
    }
    for choice in &options[k] {
        let n = stack.len();
        stack.extend_from_slice(choice);
        product(options, k + 1, stack, best);
        stack.truncate(n);
    }
}

/// Entropy of the temperature softmax, computed naively.
pub fn naive_entropy(scores: &[f64], tau: f64) -> f64 {
    let z: f64 = scores.iter().map(|s| (s / tau).exp()).sum();
    scores
        .iter()
        .map(|s| {
            let p = (s / tau).exp() / z;
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        })
        .sum()
}

pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

pub mod fixtures {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use zscap_core::detection::{BBox, Detection, GroundTruth};
    use zscap_core::embeddings::{ClassEmbedding, EmbeddingMode, EmbeddingTable};
    use zscap_core::scoring::CellEmbedding;
    use zscap_core::vocab::{ClassEntry, ClassList, ClassRole};

    use super::{OracleDet, OracleGt};

    /// Six seen classes, two of them unseen-imitation, one-hot embeddings.
    pub fn imitation_classes() -> (ClassList, EmbeddingTable) {
        let roles = [
            ClassRole::Seen,
            ClassRole::UnseenImitation,
            ClassRole::Seen,
            ClassRole::Seen,
            ClassRole::UnseenImitation,
            ClassRole::Seen,
        ];
        let classes = ClassList::new(
            roles
                .iter()
                .enumerate()
                .map(|(i, &r)| ClassEntry::new(format!("s{i}"), r, "x"))
                .collect(),
        )
        .unwrap();
        let entries = roles
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let mut v = vec![0.0; roles.len()];
                v[i] = 1.0;
                (
                    r,
                    ClassEmbedding {
                        class_name: format!("s{i}"),
                        vector: v,
                    },
                )
            })
            .collect();
        (
            classes,
            EmbeddingTable {
                mode: EmbeddingMode::Similarity,
                entries,
            },
        )
    }

    /// Labeled cells: the true class coordinate is 1, the others uniform in
    /// `[0, 0.8)`. Every unseen-imitation coordinate is then multiplied by
    /// `damping`, so those classes' compatibility scores shrink by that
    /// factor relative to the rest.
    pub fn damped_cells(seed: u64, n: usize, damping: f64) -> Vec<CellEmbedding> {
        let (classes, _) = imitation_classes();
        let mask = classes.imitation_mask();
        let k = mask.len();
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let y = rng.gen_range(0..k);
                let mut v: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..0.8)).collect();
                v[y] = 1.0;
                for (x, &m) in v.iter_mut().zip(&mask) {
                    if m {
                        *x *= damping;
                    }
                }
                CellEmbedding {
                    image_id: format!("img{}", i / 4),
                    cell_index: i % 4,
                    objectness: 1.0,
                    label: Some(format!("s{y}")),
                    vector: v,
                    bbox: None,
                }
            })
            .collect()
    }

    pub struct MatchInstance {
        pub dets: Vec<Detection>,
        pub gts: Vec<GroundTruth>,
        pub odets: Vec<OracleDet>,
        pub ogts: Vec<OracleGt>,
    }

    /// Up to 5 detections and 4 ground truths on a coarse grid, so that
    /// overlaps, duplicates and score ties all occur.
    pub fn match_instance(rng: &mut StdRng) -> MatchInstance {
        let n_det = rng.gen_range(0..=5);
        let n_gt = rng.gen_range(0..=4);
        let rbox = |rng: &mut StdRng| {
            [
                rng.gen_range(0..6) as f64,
                rng.gen_range(0..6) as f64,
                rng.gen_range(2..6) as f64,
                rng.gen_range(2..6) as f64,
            ]
        };
        let ogts: Vec<OracleGt> = (0..n_gt)
            .map(|_| OracleGt {
                image: format!("i{}", rng.gen_range(0..2)),
                class: format!("c{}", rng.gen_range(0..2)),
                bbox: rbox(rng),
            })
            .collect();
        let odets: Vec<OracleDet> = (0..n_det)
            .map(|_| OracleDet {
                image: format!("i{}", rng.gen_range(0..2)),
                class: format!("c{}", rng.gen_range(0..2)),
                score: rng.gen_range(0..4) as f64 / 4.0,
                bbox: rbox(rng),
            })
            .collect();
        let to_box = |b: [f64; 4]| BBox::new(b[0], b[1], b[2], b[3]).unwrap();
        MatchInstance {
            dets: odets
                .iter()
                .map(|d| Detection {
                    image_id: d.image.clone(),
                    class_name: d.class.clone(),
                    score: d.score,
                    bbox: to_box(d.bbox),
                })
                .collect(),
            gts: ogts
                .iter()
                .map(|g| GroundTruth {
                    image_id: g.image.clone(),
                    class_name: g.class.clone(),
                    bbox: to_box(g.bbox),
                })
                .collect(),
            odets,
            ogts,
        }
    }

    pub fn random_tokens(rng: &mut StdRng, max_len: usize, vocab: usize) -> Vec<String> {
        let n = rng.gen_range(0..=max_len);
        (0..n).map(|_| format!("t{}", rng.gen_range(0..vocab))).collect()
    }
}
