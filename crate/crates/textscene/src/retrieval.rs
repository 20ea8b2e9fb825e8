//! Layout similarity scoring, ranking, the occurrence-histogram baseline
//! and the retrieval metrics.
//!
//! The similarity between a 2D reference layout and an image's detections
//! maximizes `sum_i p(b'_a_i) * IOU(s*b_i + t, b'_a_i)` subject to equal
//! categories, over 5 uniform scale factors, a stride-grid of translations
//! and a greedy assignment. Hard mode thresholds detections and weighs
//! them uniformly; soft mode keeps everything and weighs by detection
//! confidence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::projection::{Box2D, ReferenceLayout};
use crate::query::Query;

/// Per-image object detections.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectionSet {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub boxes: Vec<Box2D>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Hard,
    Soft,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub mode: MatchMode,
    /// Detections below this confidence are ignored in hard mode (and by
    /// the histogram baseline).
    pub detection_threshold: f64,
    pub scale_count: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Translation grid stride in pixels.
    pub stride: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            mode: MatchMode::Soft,
            detection_threshold: 0.5,
            scale_count: 5,
            scale_min: 0.5,
            scale_max: 1.0,
            stride: 10.0,
        }
    }
}

impl MatchConfig {
    fn scales(&self) -> Vec<f64> {
        if self.scale_count <= 1 {
            return vec![self.scale_max];
        }
        (0..self.scale_count)
            .map(|i| {
                self.scale_min
                    + i as f64 * (self.scale_max - self.scale_min)
                        / (self.scale_count - 1) as f64
            })
            .collect()
    }
}

/// Best transform and assignment found for one reference layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub score: f64,
    /// Applied uniform scale (including the canvas-normalization factor).
    pub scale: f64,
    pub translation: (f64, f64),
    /// Per reference box: matched detection index, or None.
    pub assignment: Vec<Option<usize>>,
}

impl MatchResult {
    fn empty(n_refs: usize) -> MatchResult {
        MatchResult {
            score: 0.0,
            scale: 1.0,
            translation: (0.0, 0.0),
            assignment: vec![None; n_refs],
        }
    }
}

/// Intersection-over-union of two axis-aligned boxes.
pub fn iou(a: &Box2D, b: &Box2D) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Greedy assignment over precomputed gains: repeatedly take the highest
/// positive `p * IOU` pair among unused boxes (ties: lowest reference
/// index, then lowest detection index).
fn greedy_assign(gains: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let nr = gains.len();
    let nd = gains.first().map_or(0, |g| g.len());
    let mut used_ref = vec![false; nr];
    let mut used_det = vec![false; nd];
    let mut assignment = vec![None; nr];
    let mut score = 0.0;
    loop {
        let mut best = 0.0;
        let mut pick: Option<(usize, usize)> = None;
        for i in 0..nr {
            if used_ref[i] {
                continue;
            }
            for k in 0..nd {
                if used_det[k] {
                    continue;
                }
                if gains[i][k] > best {
                    best = gains[i][k];
                    pick = Some((i, k));
                }
            }
        }
        let Some((i, k)) = pick else { break };
        used_ref[i] = true;
        used_det[k] = true;
        assignment[i] = Some(k);
        score += best;
    }
    (score, assignment)
}

/// Optimizes the layout-matching objective over scale, translation and
/// greedy assignment for one reference layout.
pub fn match_layout(
    reference: &ReferenceLayout,
    det: &DetectionSet,
    cfg: &MatchConfig,
) -> MatchResult {
    let n_refs = reference.boxes.len();
    // detections by mode; remember original indices for the assignment
    let mut detections: Vec<(usize, &Box2D, f64)> = Vec::new();
    for (k, b) in det.boxes.iter().enumerate() {
        match cfg.mode {
            MatchMode::Hard => {
                if b.confidence >= cfg.detection_threshold {
                    detections.push((k, b, 1.0));
                }
            }
            MatchMode::Soft => detections.push((k, b, b.confidence)),
        }
    }
    if detections.is_empty() || n_refs == 0 {
        return MatchResult::empty(n_refs);
    }

    // category comparability per pair is fixed across the transform search
    let compatible: Vec<Vec<bool>> = reference
        .boxes
        .iter()
        .map(|rb| {
            detections
                .iter()
                .map(|(_, db, _)| rb.category == db.category)
                .collect()
        })
        .collect();

    let rw = reference.camera.intrinsics.width as f64;
    let rh = reference.camera.intrinsics.height as f64;
    let base = (det.width as f64 / rw).min(det.height as f64 / rh);
    let (dw, dh) = (det.width as f64, det.height as f64);

    let hull = {
        let mut lo = [f64::MAX; 2];
        let mut hi = [f64::MIN; 2];
        for b in &reference.boxes {
            lo[0] = lo[0].min(b.x_min);
            lo[1] = lo[1].min(b.y_min);
            hi[0] = hi[0].max(b.x_max);
            hi[1] = hi[1].max(b.y_max);
        }
        (lo, hi)
    };

    let mut best = MatchResult::empty(n_refs);
    let mut scaled: Vec<Box2D> = reference.boxes.clone();
    for rel_scale in cfg.scales() {
        let s = rel_scale * base;
        for (sb, b) in scaled.iter_mut().zip(&reference.boxes) {
            sb.x_min = b.x_min * s;
            sb.y_min = b.y_min * s;
            sb.x_max = b.x_max * s;
            sb.y_max = b.y_max * s;
        }
        // translations keeping the scaled hull at least partially inside
        let tx_range = grid_range(-s * hull.1[0], dw - s * hull.0[0], cfg.stride);
        let ty_range = grid_range(-s * hull.1[1], dh - s * hull.0[1], cfg.stride);
        let mut gains = vec![vec![0.0; detections.len()]; n_refs];
        for &ty in &ty_range {
            for &tx in &tx_range {
                for (i, sb) in scaled.iter().enumerate() {
                    let moved = Box2D {
                        category: String::new(),
                        x_min: sb.x_min + tx,
                        y_min: sb.y_min + ty,
                        x_max: sb.x_max + tx,
                        y_max: sb.y_max + ty,
                        confidence: 1.0,
                    };
                    for (col, (_, db, p)) in detections.iter().enumerate() {
                        gains[i][col] = if compatible[i][col] {
                            p * iou(&moved, db)
                        } else {
                            0.0
                        };
                    }
                }
                let (score, assignment) = greedy_assign(&gains);
                if score > best.score {
                    best = MatchResult {
                        score,
                        scale: s,
                        translation: (tx, ty),
                        assignment: assignment
                            .into_iter()
                            .map(|a| a.map(|col| detections[col].0))
                            .collect(),
                    };
                }
            }
        }
    }
    best
}

/// Stride-aligned grid covering `[lo, hi]`, always non-empty.
fn grid_range(lo: f64, hi: f64, stride: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = (lo / stride).ceil() * stride;
    while t <= hi {
        out.push(t);
        t += stride;
    }
    if out.is_empty() {
        out.push(lo);
    }
    out
}

/// An image's score: the best match over all reference layouts.
pub fn score_image(
    references: &[ReferenceLayout],
    det: &DetectionSet,
    cfg: &MatchConfig,
) -> (f64, usize, MatchResult) {
    assert!(!references.is_empty());
    let mut best: Option<(f64, usize, MatchResult)> = None;
    for (ri, reference) in references.iter().enumerate() {
        let m = match_layout(reference, det, cfg);
        if best.as_ref().map_or(true, |(s, _, _)| m.score > *s) {
            best = Some((m.score, ri, m));
        }
    }
    best.expect("at least one reference")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankedImage {
    pub rank: usize,
    pub image_id: String,
    pub score: f64,
    pub best_reference: usize,
    pub best_scale: f64,
    pub best_translation: (f64, f64),
    /// Matched detection index per reference box; missing objects are None.
    pub assignment: Vec<Option<usize>>,
}

/// Scores the whole database (in parallel) and ranks it by descending
/// score, ties broken by image id.
pub fn rank_database(
    references: &[ReferenceLayout],
    db: &[DetectionSet],
    cfg: &MatchConfig,
) -> Vec<RankedImage> {
    let mut scored: Vec<RankedImage> = db
        .par_iter()
        .map(|det| {
            let (score, best_reference, m) = score_image(references, det, cfg);
            RankedImage {
                rank: 0,
                image_id: det.image_id.clone(),
                score,
                best_reference,
                best_scale: m.scale,
                best_translation: m.translation,
                assignment: m.assignment,
            }
        })
        .collect();
    sort_and_rank(&mut scored);
    scored
}

/// Ranks by a per-image scalar score (used by the histogram baseline).
pub fn rank_by_scores(mut scored: Vec<RankedImage>) -> Vec<RankedImage> {
    sort_and_rank(&mut scored);
    scored
}

fn sort_and_rank(scored: &mut [RankedImage]) {
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| a.image_id.cmp(&b.image_id))
    });
    for (i, s) in scored.iter_mut().enumerate() {
        s.rank = i + 1;
    }
}

/// Occurrence-histogram baseline: negative L1 distance between the
/// query's category counts and the thresholded detections' counts, so that
/// higher scores mean more similar.
pub fn baseline_histogram(query: &Query, det: &DetectionSet, cfg: &MatchConfig) -> f64 {
    use std::collections::BTreeMap;
    let mut want: BTreeMap<&str, i64> = BTreeMap::new();
    for (r, k) in &query.counts {
        *want.entry(r.category.as_str()).or_insert(0) += i64::from(*k);
    }
    let mut have: BTreeMap<&str, i64> = BTreeMap::new();
    for b in &det.boxes {
        if b.confidence >= cfg.detection_threshold {
            *have.entry(b.category.as_str()).or_insert(0) += 1;
        }
    }
    let mut l1 = 0i64;
    for (cat, w) in &want {
        l1 += (w - have.get(cat).copied().unwrap_or(0)).abs();
    }
    for (cat, h) in &have {
        if !want.contains_key(cat) {
            l1 += h.abs();
        }
    }
    -(l1 as f64)
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("query {0} has no ground-truth ranks")]
    EmptyGroundTruth(usize),
    #[error("no queries")]
    NoQueries,
}

/// Fraction of queries whose best ground-truth rank is within the top `k`.
pub fn recall_at_k(ranks_per_query: &[Vec<usize>], k: usize) -> Result<f64, MetricsError> {
    if ranks_per_query.is_empty() {
        return Err(MetricsError::NoQueries);
    }
    let mut hits = 0usize;
    for (qi, ranks) in ranks_per_query.iter().enumerate() {
        let best = ranks
            .iter()
            .min()
            .ok_or(MetricsError::EmptyGroundTruth(qi))?;
        if *best <= k {
            hits += 1;
        }
    }
    Ok(hits as f64 / ranks_per_query.len() as f64)
}

/// Median of all ground-truth ranks pooled across queries (mean of the two
/// middle values for even counts).
pub fn median_rank(ranks_per_query: &[Vec<usize>]) -> Result<f64, MetricsError> {
    if ranks_per_query.is_empty() {
        return Err(MetricsError::NoQueries);
    }
    let mut all = Vec::new();
    for (qi, ranks) in ranks_per_query.iter().enumerate() {
        if ranks.is_empty() {
            return Err(MetricsError::EmptyGroundTruth(qi));
        }
        all.extend_from_slice(ranks);
    }
    all.sort_unstable();
    let n = all.len();
    Ok(if n % 2 == 1 {
        all[n / 2] as f64
    } else {
        (all[n / 2 - 1] + all[n / 2]) as f64 / 2.0
    })
}
