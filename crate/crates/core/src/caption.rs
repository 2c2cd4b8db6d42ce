//! Caption metrics: exact-match METEOR, V-METEOR with its visual and
//! non-visual variants, corpus averaging per class, and per-class F1.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::ClassList;

/// Candidates up to this length are aligned by exact search.
pub const EXACT_ALIGNMENT_MAX_LEN: usize = 12;

/// Lowercases, splits on whitespace and strips ASCII punctuation from both
/// ends of every token.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// True when `words` occur contiguously in `tokens`.
pub fn contains_phrase<S: AsRef<str>>(tokens: &[S], words: &[&str]) -> bool {
    if words.is_empty() || words.len() > tokens.len() {
        return false;
    }
    tokens
        .windows(words.len())
        .any(|w| w.iter().zip(words).all(|(t, x)| t.as_ref() == *x))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    /// `(candidate index, reference index)` sorted by candidate index.
    pub pairs: Vec<(usize, usize)>,
    pub chunks: usize,
    pub matches: usize,
    pub exact: bool,
}

/// Number of maximal runs of pairs that are contiguous and in order in both
/// sentences. `pairs` must be sorted by candidate index.
pub fn chunk_count(pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

/// Exact-token unigram alignment with the maximum number of matches and,
/// among those, the fewest chunks.
///
/// Candidates of at most [`EXACT_ALIGNMENT_MAX_LEN`] tokens are solved
/// exactly by memoized search. Longer candidates use a left-to-right greedy
/// pass that extends the current chunk when it can and otherwise picks the
/// reference position with the longest run of agreeing tokens ahead.
pub fn align<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Alignment {
    let cand: Vec<&str> = candidate.iter().map(AsRef::as_ref).collect();
    let refr: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    if cand.len() <= EXACT_ALIGNMENT_MAX_LEN {
        if let Some(pairs) = ExactAligner::new(&cand, &refr).map(|a| a.solve()) {
            return Alignment {
                chunks: chunk_count(&pairs),
                matches: pairs.len(),
                pairs,
                exact: true,
            };
        }
    }
    let pairs = greedy_alignment(&cand, &refr);
    Alignment {
        chunks: chunk_count(&pairs),
        matches: pairs.len(),
        pairs,
        exact: false,
    }
}

fn greedy_alignment(cand: &[&str], refr: &[&str]) -> Vec<(usize, usize)> {
    let mut used = vec![false; refr.len()];
    let mut pairs = Vec::new();
    let mut prev: Option<usize> = None;
    for (i, tok) in cand.iter().enumerate() {
        let extend = prev
            .map(|j| j + 1)
            .filter(|&j| j < refr.len() && !used[j] && refr[j] == *tok);
        let choice = extend.or_else(|| {
            let run = |j: usize| {
                (1..)
                    .take_while(|&k| {
                        i + k < cand.len()
                            && j + k < refr.len()
                            && !used[j + k]
                            && cand[i + k] == refr[j + k]
                    })
                    .count()
            };
            (0..refr.len())
                .filter(|&j| !used[j] && refr[j] == *tok)
                .max_by(|&a, &b| run(a).cmp(&run(b)).then(b.cmp(&a)))
        });
        match choice {
            Some(j) => {
                used[j] = true;
                pairs.push((i, j));
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    pairs
}

const NO_PREV: u8 = u8::MAX;
const INFEASIBLE: u32 = u32::MAX;

/// A new chunk starts unless the previous candidate token was aligned to
/// the reference position just before `j`.
fn chunk_cost(prev: u8, j: usize) -> u32 {
    u32::from(!(prev != NO_PREV && prev as usize + 1 == j))
}

/// Memoized search over which reference position (if any) each candidate
/// token takes. Reference positions that can match are packed into a bitmask.
struct ExactAligner {
    /// Token type id per candidate position.
    cand: Vec<usize>,
    /// Relevant reference positions per type: `(bit, ref index)`.
    slots: Vec<Vec<(u32, usize)>>,
    /// Occurrences of each type in the candidate suffix starting at `i`.
    suffix_counts: Vec<Vec<usize>>,
    /// Bitmask of reference positions per type.
    type_mask: Vec<u128>,
    target: usize,
    memo: HashMap<(u8, u128, u8), u32>,
}

impl ExactAligner {
    fn new(cand: &[&str], refr: &[&str]) -> Option<Self> {
        if refr.len() >= NO_PREV as usize {
            return None;
        }
        let mut type_of: HashMap<&str, usize> = HashMap::new();
        let cand_ids: Vec<usize> = cand
            .iter()
            .map(|t| {
                let n = type_of.len();
                *type_of.entry(t).or_insert(n)
            })
            .collect();
        let n_types = type_of.len();
        let mut slots = vec![Vec::new(); n_types];
        let mut type_mask = vec![0u128; n_types];
        let mut bit = 0u32;
        for (j, t) in refr.iter().enumerate() {
            if let Some(&ty) = type_of.get(t) {
                if bit >= 128 {
                    return None;
                }
                slots[ty].push((bit, j));
                type_mask[ty] |= 1u128 << bit;
                bit += 1;
            }
        }
        let mut suffix_counts = vec![vec![0usize; n_types]; cand.len() + 1];
        for i in (0..cand.len()).rev() {
            suffix_counts[i] = suffix_counts[i + 1].clone();
            suffix_counts[i][cand_ids[i]] += 1;
        }
        let target = (0..n_types)
            .map(|ty| suffix_counts[0][ty].min(slots[ty].len()))
            .sum();
        Some(Self {
            cand: cand_ids,
            slots,
            suffix_counts,
            type_mask,
            target,
            memo: HashMap::new(),
        })
    }

    /// Most matches still obtainable from position `i` given used slots.
    fn reachable(&self, i: usize, mask: u128) -> usize {
        self.type_mask
            .iter()
            .enumerate()
            .map(|(ty, &tm)| {
                let free = (tm & !mask).count_ones() as usize;
                self.suffix_counts[i][ty].min(free)
            })
            .sum()
    }

    fn best(&mut self, i: usize, mask: u128, prev: u8) -> u32 {
        let done = mask.count_ones() as usize;
        if self.reachable(i, mask) + done < self.target {
            return INFEASIBLE;
        }
        if i == self.cand.len() {
            return 0;
        }
        let key = (i as u8, mask, prev);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let mut best = self.best(i + 1, mask, NO_PREV);
        let ty = self.cand[i];
        for k in 0..self.slots[ty].len() {
            let (bit, j) = self.slots[ty][k];
            if mask & (1u128 << bit) != 0 {
                continue;
            }
            let cost = chunk_cost(prev, j);
            let rest = self.best(i + 1, mask | (1u128 << bit), j as u8);
            if rest != INFEASIBLE && rest + cost < best {
                best = rest + cost;
            }
        }
        self.memo.insert(key, best);
        best
    }

    fn solve(mut self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        let (mut mask, mut prev) = (0u128, NO_PREV);
        let mut remaining = self.best(0, 0, NO_PREV);
        for i in 0..self.cand.len() {
            let ty = self.cand[i];
            let mut chosen: Option<(u32, usize)> = None;
            for k in 0..self.slots[ty].len() {
                let (bit, j) = self.slots[ty][k];
                if mask & (1u128 << bit) != 0 {
                    continue;
                }
                let cost = chunk_cost(prev, j);
                let rest = self.best(i + 1, mask | (1u128 << bit), j as u8);
                if rest != INFEASIBLE && rest + cost == remaining {
                    chosen = Some((bit, j));
                    remaining = rest;
                    break;
                }
            }
            match chosen {
                Some((bit, j)) => {
                    mask |= 1u128 << bit;
                    prev = j as u8;
                    pairs.push((i, j));
                }
                None => {
                    debug_assert_eq!(self.best(i + 1, mask, NO_PREV), remaining);
                    prev = NO_PREV;
                }
            }
        }
        pairs
    }
}

/// Recall-weighted harmonic mean `10PR / (R + 9P)`; zero without matches.
pub fn f_mean(matches: usize, candidate_len: usize, reference_len: usize) -> f64 {
    if matches == 0 || candidate_len == 0 || reference_len == 0 {
        return 0.0;
    }
    let p = matches as f64 / candidate_len as f64;
    let r = matches as f64 / reference_len as f64;
    10.0 * p * r / (r + 9.0 * p)
}

/// Fragmentation penalty `0.5 (chunks / matches)^3`; zero without matches.
pub fn fragmentation_penalty(chunks: usize, matches: usize) -> f64 {
    if matches == 0 {
        return 0.0;
    }
    // Integer cubes keep small ratios exact.
    let (c, m) = (chunks as f64, matches as f64);
    0.5 * (c * c * c) / (m * m * m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorBreakdown {
    pub precision: f64,
    pub recall: f64,
    pub f_mean: f64,
    pub penalty: f64,
    pub score: f64,
    pub matches: usize,
    pub chunks: usize,
    /// Index of the reference the breakdown was computed against.
    pub reference: usize,
}

pub fn meteor_single<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> MeteorBreakdown {
    let al = align(candidate, reference);
    let ratio = |m: usize, n: usize| if n == 0 { 0.0 } else { m as f64 / n as f64 };
    let f = f_mean(al.matches, candidate.len(), reference.len());
    let penalty = fragmentation_penalty(al.chunks, al.matches);
    MeteorBreakdown {
        precision: ratio(al.matches, candidate.len()),
        recall: ratio(al.matches, reference.len()),
        f_mean: f,
        penalty,
        score: f * (1.0 - penalty),
        matches: al.matches,
        chunks: al.chunks,
        reference: 0,
    }
}

/// METEOR against the best of several references; ties keep the first.
pub fn meteor<S: AsRef<str>>(candidate: &[S], references: &[Vec<S>]) -> Result<MeteorBreakdown> {
    if references.is_empty() {
        return Err(Error::Contract("METEOR needs at least one reference".into()));
    }
    let mut best: Option<MeteorBreakdown> = None;
    for (k, r) in references.iter().enumerate() {
        let mut b = meteor_single(candidate, r);
        b.reference = k;
        if best.is_none_or(|cur| b.score > cur.score) {
            best = Some(b);
        }
    }
    Ok(best.expect("non-empty references"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VMeteorBreakdown {
    pub f_mean_v: f64,
    pub f_mean_n: f64,
    pub penalty: f64,
    pub v_meteor: f64,
    pub v_meteor_vis: f64,
    pub v_meteor_nvis: f64,
    pub reference: usize,
}

/// Token roles for one class: words of the class name are visual, words of
/// other class names are left out, everything else is non-visual.
#[derive(Debug, Clone)]
pub struct VisualSplit {
    visual: HashSet<String>,
    excluded: HashSet<String>,
}

impl VisualSplit {
    pub fn for_class(class_name: &str, classes: &ClassList) -> Result<Self> {
        classes.require(class_name)?;
        let visual: HashSet<String> = class_name
            .split_ascii_whitespace()
            .map(str::to_string)
            .collect();
        let excluded = classes
            .entries()
            .iter()
            .filter(|e| e.name != class_name)
            .flat_map(|e| e.words().map(str::to_string).collect::<Vec<_>>())
            .filter(|w| !visual.contains(w))
            .collect();
        Ok(Self { visual, excluded })
    }

    pub fn is_visual(&self, token: &str) -> bool {
        self.visual.contains(token)
    }

    pub fn is_non_visual(&self, token: &str) -> bool {
        !self.visual.contains(token) && !self.excluded.contains(token)
    }

    pub fn split<'a, S: AsRef<str>>(&self, tokens: &'a [S]) -> (Vec<&'a str>, Vec<&'a str>) {
        let vis = tokens
            .iter()
            .map(AsRef::as_ref)
            .filter(|t| self.is_visual(t))
            .collect();
        let nvis = tokens
            .iter()
            .map(AsRef::as_ref)
            .filter(|t| self.is_non_visual(t))
            .collect();
        (vis, nvis)
    }
}

pub fn v_meteor_single<S: AsRef<str>>(
    candidate: &[S],
    reference: &[S],
    split: &VisualSplit,
) -> VMeteorBreakdown {
    let (cv, cn) = split.split(candidate);
    let (rv, rn) = split.split(reference);
    let fv = f_mean(align(&cv, &rv).matches, cv.len(), rv.len());
    let fn_ = f_mean(align(&cn, &rn).matches, cn.len(), rn.len());
    let full = align(candidate, reference);
    let penalty = fragmentation_penalty(full.chunks, full.matches);
    let hm = if fv == 0.0 || fn_ == 0.0 {
        0.0
    } else {
        2.0 * fv * fn_ / (fv + fn_)
    };
    VMeteorBreakdown {
        f_mean_v: fv,
        f_mean_n: fn_,
        penalty,
        v_meteor: hm * (1.0 - penalty),
        v_meteor_vis: fv * (1.0 - penalty),
        v_meteor_nvis: fn_ * (1.0 - penalty),
        reference: 0,
    }
}

/// V-METEOR of a caption for one class against the best reference (by
/// V-METEOR; ties keep the first).
pub fn v_meteor<S: AsRef<str>>(
    candidate: &[S],
    references: &[Vec<S>],
    class_name: &str,
    classes: &ClassList,
) -> Result<VMeteorBreakdown> {
    if references.is_empty() {
        return Err(Error::Contract("V-METEOR needs at least one reference".into()));
    }
    let split = VisualSplit::for_class(class_name, classes)?;
    Ok(best_v_meteor(candidate, references, &split))
}

fn best_v_meteor<S: AsRef<str>>(
    candidate: &[S],
    references: &[Vec<S>],
    split: &VisualSplit,
) -> VMeteorBreakdown {
    let mut best: Option<VMeteorBreakdown> = None;
    for (k, r) in references.iter().enumerate() {
        let mut b = v_meteor_single(candidate, r, split);
        b.reference = k;
        if best.is_none_or(|cur| b.v_meteor > cur.v_meteor) {
            best = Some(b);
        }
    }
    best.expect("non-empty references")
}

/// One captioned image: tokenized candidate and references.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionItem {
    pub image_id: String,
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl CaptionItem {
    pub fn from_text(image_id: &str, candidate: &str, references: &[&str]) -> Self {
        Self {
            image_id: image_id.to_string(),
            candidate: tokenize(candidate),
            references: references.iter().map(|r| tokenize(r)).collect(),
        }
    }

    /// The class is relevant when its name appears in any reference.
    pub fn is_relevant(&self, class_name: &str) -> bool {
        let words: Vec<&str> = class_name.split_ascii_whitespace().collect();
        self.references.iter().any(|r| contains_phrase(r, &words))
    }

    pub fn mentions(&self, class_name: &str) -> bool {
        let words: Vec<&str> = class_name.split_ascii_whitespace().collect();
        contains_phrase(&self.candidate, &words)
    }
}

pub fn relevant_classes<'a>(item: &CaptionItem, classes: &'a ClassList) -> Vec<&'a str> {
    classes
        .entries()
        .iter()
        .filter(|e| item.is_relevant(&e.name))
        .map(|e| e.name.as_str())
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCaptionScores {
    pub images: usize,
    pub meteor: f64,
    pub v_meteor: f64,
    pub v_meteor_vis: f64,
    pub v_meteor_nvis: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CaptionAverages {
    pub classes: usize,
    pub meteor: f64,
    pub v_meteor: f64,
    pub v_meteor_vis: f64,
    pub v_meteor_nvis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusVMeteor {
    pub per_class: BTreeMap<String, ClassCaptionScores>,
    /// Unweighted mean over classes with at least one relevant image.
    pub overall: CaptionAverages,
    /// Classes with no relevant image; not part of the averages.
    pub excluded_classes: Vec<String>,
}

/// Per-class means of per-image scores over the images where the class is
/// relevant, for the classes in `scored` (all classes when `None`).
pub fn corpus_v_meteor(
    items: &[CaptionItem],
    classes: &ClassList,
    scored: Option<&[&str]>,
) -> Result<CorpusVMeteor> {
    let names: Vec<&str> = match scored {
        Some(s) => {
            for n in s {
                classes.require(n)?;
            }
            s.to_vec()
        }
        None => classes.entries().iter().map(|e| e.name.as_str()).collect(),
    };
    let mut per_class = BTreeMap::new();
    let mut excluded = Vec::new();
    for name in names {
        let split = VisualSplit::for_class(name, classes)?;
        let mut acc = ClassCaptionScores::default();
        for item in items.iter().filter(|it| it.is_relevant(name)) {
            let v = best_v_meteor(&item.candidate, &item.references, &split);
            let m = meteor(&item.candidate, &item.references)?;
            acc.images += 1;
            acc.meteor += m.score;
            acc.v_meteor += v.v_meteor;
            acc.v_meteor_vis += v.v_meteor_vis;
            acc.v_meteor_nvis += v.v_meteor_nvis;
        }
        if acc.images == 0 {
            excluded.push(name.to_string());
            continue;
        }
        let n = acc.images as f64;
        acc.meteor /= n;
        acc.v_meteor /= n;
        acc.v_meteor_vis /= n;
        acc.v_meteor_nvis /= n;
        per_class.insert(name.to_string(), acc);
    }
    let overall = average_classes(per_class.values());
    Ok(CorpusVMeteor {
        per_class,
        overall,
        excluded_classes: excluded,
    })
}

pub fn average_classes<'a>(scores: impl Iterator<Item = &'a ClassCaptionScores>) -> CaptionAverages {
    let mut avg = CaptionAverages::default();
    for s in scores {
        avg.classes += 1;
        avg.meteor += s.meteor;
        avg.v_meteor += s.v_meteor;
        avg.v_meteor_vis += s.v_meteor_vis;
        avg.v_meteor_nvis += s.v_meteor_nvis;
    }
    if avg.classes > 0 {
        let n = avg.classes as f64;
        avg.meteor /= n;
        avg.v_meteor /= n;
        avg.v_meteor_vis /= n;
        avg.v_meteor_nvis /= n;
    }
    avg
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

/// Agreement between a class being mentioned by the candidate and being
/// relevant (named in any reference).
pub fn class_f1(items: &[CaptionItem], class_name: &str) -> Result<ClassF1> {
    if items.is_empty() {
        return Err(Error::Contract("class F1 needs at least one image".into()));
    }
    let mut out = ClassF1::default();
    for item in items {
        match (item.is_relevant(class_name), item.mentions(class_name)) {
            (true, true) => out.true_positives += 1,
            (false, true) => out.false_positives += 1,
            (true, false) => out.false_negatives += 1,
            (false, false) => out.true_negatives += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    out.precision = ratio(out.true_positives, out.true_positives + out.false_positives);
    out.recall = ratio(out.true_positives, out.true_positives + out.false_negatives);
    out.f1 = if out.precision + out.recall == 0.0 {
        0.0
    } else {
        2.0 * out.precision * out.recall / (out.precision + out.recall)
    };
    out.accuracy = ratio(out.true_positives + out.true_negatives, items.len());
    Ok(out)
}
