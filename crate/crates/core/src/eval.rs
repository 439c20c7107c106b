//! Boundary evaluation harness.
//!
//! Two protocols over a shared threshold sweep:
//!
//! - S-Eval: oriented non-maximum suppression on the probability map, then
//!   per-threshold binarize -> morphological thinning -> correspondence.
//! - C-Eval: per-threshold binarize -> correspondence on the raw map, no
//!   post-processing. Thick predictions pay for every extra pixel here.
//!
//! Correspondence is a one-to-one assignment between predicted and
//! ground-truth pixels within a pixel tolerance, solved as maximum-cardinality
//! bipartite matching (augmenting paths), which is optimal and therefore
//! matches the exhaustive oracle on small instances.

use rayon::prelude::*;

use crate::classic::{BinaryMap, GrayImage};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("dimension mismatch: prediction {ph}x{pw} vs ground truth {gh}x{gw}")]
    DimensionMismatch { ph: usize, pw: usize, gh: usize, gw: usize },
    #[error("prediction and ground-truth lists differ in length: {preds} vs {gts}")]
    MisalignedLists { preds: usize, gts: usize },
    #[error("ground-truth set must contain at least one annotator map")]
    EmptyGroundTruthSet,
    #[error("annotator maps must share dimensions")]
    AnnotatorSizeMismatch,
    #[error("evaluation needs at least one image and two thresholds")]
    EmptyInput,
}

/// One or more binary annotator maps of equal size.
#[derive(Debug, Clone)]
pub struct GroundTruthSet {
    maps: Vec<BinaryMap>,
}

impl GroundTruthSet {
    pub fn new(maps: Vec<BinaryMap>) -> Result<Self, EvalError> {
        let first = maps.first().ok_or(EvalError::EmptyGroundTruthSet)?;
        let (h, w) = (first.h, first.w);
        if maps.iter().any(|m| m.h != h || m.w != w) {
            return Err(EvalError::AnnotatorSizeMismatch);
        }
        Ok(GroundTruthSet { maps })
    }

    pub fn single(map: BinaryMap) -> Self {
        GroundTruthSet { maps: vec![map] }
    }

    pub fn maps(&self) -> &[BinaryMap] {
        &self.maps
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.maps[0].h, self.maps[0].w)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl MatchCounts {
    fn add(&mut self, other: &MatchCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    SEval,
    CEval,
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalMode::SEval => write!(f, "s-eval"),
            EvalMode::CEval => write!(f, "c-eval"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PrPoint {
    pub threshold: f64,
    pub counts: MatchCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub ods_f: f64,
    pub ods_threshold: f64,
    pub ois_f: f64,
    pub ap: f64,
    pub pr_points: Vec<PrPoint>,
}

/// The standard benchmark sweep: 99 thresholds, 0.01 to 0.99 step 0.01.
pub fn default_thresholds() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Matching tolerance in pixels: 0.0075 x image diagonal, rounded up.
pub fn default_tolerance(h: usize, w: usize) -> f64 {
    (0.0075 * ((h * h + w * w) as f64).sqrt()).ceil()
}

/// Pixel set iff `p >= t`.
pub fn binarize(p: &GrayImage, t: f64) -> BinaryMap {
    BinaryMap::new(p.h, p.w, p.values.iter().map(|&v| v >= t).collect())
}

fn gaussian_smooth(p: &GrayImage, sigma: f64) -> GrayImage {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::new();
    for k in -radius..=radius {
        kernel.push((-(k * k) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let s: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= s;
    }
    let at = |v: &[f64], i: isize, j: isize| {
        v[(i.clamp(0, p.h as isize - 1) as usize) * p.w + j.clamp(0, p.w as isize - 1) as usize]
    };
    let mut tmp = vec![0.0; p.h * p.w];
    for i in 0..p.h as isize {
        for j in 0..p.w as isize {
            tmp[i as usize * p.w + j as usize] = kernel
                .iter()
                .enumerate()
                .map(|(idx, k)| k * at(&p.values, i, j + idx as isize - radius))
                .sum();
        }
    }
    let mut out = vec![0.0; p.h * p.w];
    for i in 0..p.h as isize {
        for j in 0..p.w as isize {
            out[i as usize * p.w + j as usize] = kernel
                .iter()
                .enumerate()
                .map(|(idx, k)| k * at(&tmp, i + idx as isize - radius, j))
                .sum();
        }
    }
    GrayImage::new(p.h, p.w, out)
}

/// Suppress non-maximal responses along the local gradient direction.
///
/// Orientation comes from the smoothed structure tensor, so it is well
/// defined on ridge crests. Each retained pixel keeps its original value; a
/// pixel survives iff it is strictly greater than the bilinearly interpolated
/// forward neighbor and at least the backward one (single survivor on
/// plateaus).
pub fn oriented_nms(p: &GrayImage) -> GrayImage {
    let (h, w) = (p.h, p.w);
    let smoothed = gaussian_smooth(p, 1.0);
    let at = |v: &[f64], i: isize, j: isize| {
        v[(i.clamp(0, h as isize - 1) as usize) * w + j.clamp(0, w as isize - 1) as usize]
    };
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for i in 0..h as isize {
        for j in 0..w as isize {
            gx[i as usize * w + j as usize] =
                0.5 * (at(&smoothed.values, i, j + 1) - at(&smoothed.values, i, j - 1));
            gy[i as usize * w + j as usize] =
                0.5 * (at(&smoothed.values, i + 1, j) - at(&smoothed.values, i - 1, j));
        }
    }
    let tensor = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
        gaussian_smooth(&GrayImage::new(h, w, prod), 1.5).values
    };
    let jxx = tensor(&gx, &gx);
    let jxy = tensor(&gx, &gy);
    let jyy = tensor(&gy, &gy);

    // Bilinear sample of p, zero outside the image.
    let sample = |y: f64, x: f64| -> f64 {
        if y < -1.0 || x < -1.0 || y > h as f64 || x > w as f64 {
            return 0.0;
        }
        let y0 = y.floor();
        let x0 = x.floor();
        let fy = y - y0;
        let fx = x - x0;
        let get = |i: isize, j: isize| {
            if i < 0 || j < 0 || i >= h as isize || j >= w as isize {
                0.0
            } else {
                p.values[i as usize * w + j as usize]
            }
        };
        let (i0, j0) = (y0 as isize, x0 as isize);
        get(i0, j0) * (1.0 - fy) * (1.0 - fx)
            + get(i0, j0 + 1) * (1.0 - fy) * fx
            + get(i0 + 1, j0) * fy * (1.0 - fx)
            + get(i0 + 1, j0 + 1) * fy * fx
    };

    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let idx = i * w + j;
            let v = p.values[idx];
            if v <= 0.0 {
                continue;
            }
            // Dominant eigenvector angle of the structure tensor.
            let theta = 0.5 * (2.0 * jxy[idx]).atan2(jxx[idx] - jyy[idx]);
            let (dx, dy) = (theta.cos(), theta.sin());
            let fwd = sample(i as f64 + dy, j as f64 + dx);
            let bwd = sample(i as f64 - dy, j as f64 - dx);
            if v > fwd && v >= bwd {
                out[idx] = v;
            }
        }
    }
    GrayImage::new(h, w, out)
}

/// Zhang-Suen iterative thinning to an 8-connected skeleton.
pub fn morphological_thin(b: &BinaryMap) -> BinaryMap {
    let (h, w) = (b.h, b.w);
    let mut img: Vec<bool> = b.values.clone();
    let idx = |i: usize, j: usize| i * w + j;
    let get = |v: &[bool], i: isize, j: isize| {
        if i < 0 || j < 0 || i >= h as isize || j >= w as isize {
            false
        } else {
            v[i as usize * w + j as usize]
        }
    };
    loop {
        let mut changed = false;
        for phase in 0..2 {
            let mut to_clear = Vec::new();
            for i in 0..h {
                for j in 0..w {
                    if !img[idx(i, j)] {
                        continue;
                    }
                    let (ii, jj) = (i as isize, j as isize);
                    // Neighbors P2..P9 clockwise from north.
                    let p: [bool; 8] = [
                        get(&img, ii - 1, jj),
                        get(&img, ii - 1, jj + 1),
                        get(&img, ii, jj + 1),
                        get(&img, ii + 1, jj + 1),
                        get(&img, ii + 1, jj),
                        get(&img, ii + 1, jj - 1),
                        get(&img, ii, jj - 1),
                        get(&img, ii - 1, jj - 1),
                    ];
                    let bsum = p.iter().filter(|&&v| v).count();
                    if !(2..=6).contains(&bsum) {
                        continue;
                    }
                    // Keep stroke endpoints: a pixel with at most one
                    // 4-connected neighbor terminates a 1-pixel line and
                    // deleting it would shorten an already-thin stroke.
                    if [p[0], p[2], p[4], p[6]].iter().filter(|&&v| v).count() <= 1 {
                        continue;
                    }
                    let transitions = (0..8).filter(|&k| !p[k] && p[(k + 1) % 8]).count();
                    if transitions != 1 {
                        continue;
                    }
                    let (p2, p4, p6, p8) = (p[0], p[2], p[4], p[6]);
                    let ok = if phase == 0 {
                        !(p2 && p4 && p6) && !(p4 && p6 && p8)
                    } else {
                        !(p2 && p4 && p8) && !(p2 && p6 && p8)
                    };
                    if ok {
                        to_clear.push(idx(i, j));
                    }
                }
            }
            if !to_clear.is_empty() {
                changed = true;
                for c in to_clear {
                    img[c] = false;
                }
            }
        }
        if !changed {
            break;
        }
    }
    BinaryMap::new(h, w, img)
}

fn pixels_of(map: &BinaryMap) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..map.h {
        for j in 0..map.w {
            if map.values[i * map.w + j] {
                out.push((i, j));
            }
        }
    }
    out
}

/// Maximum-cardinality bipartite matching via augmenting paths.
/// `adj[p]` lists candidate ground-truth pixel indices for predicted pixel `p`.
fn max_matching(adj: &[Vec<usize>], n_gt: usize) -> Vec<Option<usize>> {
    let mut gt_owner: Vec<Option<usize>> = vec![None; n_gt];
    let mut pred_match: Vec<Option<usize>> = vec![None; adj.len()];

    fn augment(
        p: usize,
        adj: &[Vec<usize>],
        gt_owner: &mut [Option<usize>],
        pred_match: &mut [Option<usize>],
        visited: &mut [bool],
    ) -> bool {
        for &g in &adj[p] {
            if visited[g] {
                continue;
            }
            visited[g] = true;
            if gt_owner[g].is_none()
                || augment(gt_owner[g].unwrap(), adj, gt_owner, pred_match, visited)
            {
                gt_owner[g] = Some(p);
                pred_match[p] = Some(g);
                return true;
            }
        }
        false
    }

    for p in 0..adj.len() {
        let mut visited = vec![false; n_gt];
        augment(p, adj, &mut gt_owner, &mut pred_match, &mut visited);
    }
    pred_match
}

/// Tolerance-based one-to-one correspondence against every annotator.
///
/// TP: predicted pixels matched to at least one annotator. FP: predicted
/// pixels matched to none. FN: summed over annotators, each annotator's
/// unmatched pixels.
pub fn correspond(pred: &BinaryMap, gts: &GroundTruthSet, tol_px: f64) -> Result<MatchCounts, EvalError> {
    let (gh, gw) = gts.dims();
    if pred.h != gh || pred.w != gw {
        return Err(EvalError::DimensionMismatch { ph: pred.h, pw: pred.w, gh, gw });
    }
    let pred_px = pixels_of(pred);
    let tol2 = tol_px * tol_px;
    let r = tol_px.floor() as isize;
    let mut matched_any = vec![false; pred_px.len()];
    let mut fn_total = 0usize;
    for gt in gts.maps() {
        let gt_px = pixels_of(gt);
        // Spatial hash of ground-truth pixels for candidate lookup.
        let mut grid: std::collections::HashMap<(usize, usize), Vec<usize>> =
            std::collections::HashMap::new();
        for (gi, &(y, x)) in gt_px.iter().enumerate() {
            grid.entry((y, x)).or_default().push(gi);
        }
        let adj: Vec<Vec<usize>> = pred_px
            .iter()
            .map(|&(y, x)| {
                let mut cands = Vec::new();
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (ny, nx) = (y as isize + dy, x as isize + dx);
                        if ny < 0 || nx < 0 || ny >= gh as isize || nx >= gw as isize {
                            continue;
                        }
                        if (dy * dy + dx * dx) as f64 <= tol2 {
                            if let Some(list) = grid.get(&(ny as usize, nx as usize)) {
                                cands.extend_from_slice(list);
                            }
                        }
                    }
                }
                cands
            })
            .collect();
        let pred_match = max_matching(&adj, gt_px.len());
        let matches = pred_match.iter().filter(|m| m.is_some()).count();
        for (pi, m) in pred_match.iter().enumerate() {
            if m.is_some() {
                matched_any[pi] = true;
            }
        }
        fn_total += gt_px.len() - matches;
    }
    let tp = matched_any.iter().filter(|&&v| v).count();
    Ok(MatchCounts { tp, fp: pred_px.len() - tp, fn_: fn_total })
}

/// ODS from pooled counts, OIS as the mean of per-image best-threshold
/// F-scores, AP as the trapezoidal area under the recall-sorted PR polyline
/// anchored at (recall 0, first precision).
pub fn summarize(
    per_image: &[Vec<MatchCounts>],
    thresholds: &[f64],
    mode: EvalMode,
) -> Result<EvalReport, EvalError> {
    if per_image.is_empty() || thresholds.len() < 2 {
        return Err(EvalError::EmptyInput);
    }
    let nt = thresholds.len();
    let mut pr_points = Vec::with_capacity(nt);
    for (ti, &t) in thresholds.iter().enumerate() {
        let mut pooled = MatchCounts::default();
        for img in per_image {
            pooled.add(&img[ti]);
        }
        pr_points.push(PrPoint {
            threshold: t,
            counts: pooled,
            precision: pooled.precision(),
            recall: pooled.recall(),
            f1: pooled.f1(),
        });
    }
    let best = pr_points
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.f1.partial_cmp(&b.f1).unwrap())
        .map(|(i, p)| (p.f1, thresholds[i]))
        .unwrap();
    let (ods_f, ods_threshold) = best;

    // OIS: each image contributes the counts at its own best-F threshold;
    // the pooled F of those counts is reported (the benchmark convention,
    // which keeps OIS >= ODS).
    let mut ois_pooled = MatchCounts::default();
    for img in per_image {
        let best = img
            .iter()
            .max_by(|a, b| a.f1().partial_cmp(&b.f1()).unwrap())
            .unwrap();
        ois_pooled.add(best);
    }
    let ois_f = ois_pooled.f1();

    // AP: sort by recall, anchor at recall 0 with the lowest-recall precision.
    let mut pr: Vec<(f64, f64)> = pr_points.iter().map(|p| (p.recall, p.precision)).collect();
    pr.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut ap = 0.0;
    let mut prev = (0.0, pr[0].1);
    for &(r, p) in &pr {
        ap += (r - prev.0) * 0.5 * (p + prev.1);
        prev = (r, p);
    }

    Ok(EvalReport { mode, ods_f, ods_threshold, ois_f, ap, pr_points })
}

/// Run the full protocol over aligned prediction / ground-truth lists.
pub fn evaluate(
    preds: &[GrayImage],
    gts: &[GroundTruthSet],
    mode: EvalMode,
    thresholds: &[f64],
    tol_px: f64,
) -> Result<EvalReport, EvalError> {
    if preds.len() != gts.len() {
        return Err(EvalError::MisalignedLists { preds: preds.len(), gts: gts.len() });
    }
    if preds.is_empty() || thresholds.len() < 2 {
        return Err(EvalError::EmptyInput);
    }
    let per_image: Result<Vec<Vec<MatchCounts>>, EvalError> = preds
        .par_iter()
        .zip(gts.par_iter())
        .map(|(p, gt)| {
            let processed = match mode {
                EvalMode::SEval => oriented_nms(p),
                EvalMode::CEval => p.clone(),
            };
            thresholds
                .iter()
                .map(|&t| {
                    let mut b = binarize(&processed, t);
                    if mode == EvalMode::SEval {
                        b = morphological_thin(&b);
                    }
                    correspond(&b, gt, tol_px)
                })
                .collect()
        })
        .collect();
    summarize(&per_image?, thresholds, mode)
}

/// One CSV row per threshold plus a summary row.
pub fn report_to_csv(report: &EvalReport) -> String {
    let mut out = String::from("threshold,tp,fp,fn,precision,recall,f1\n");
    for p in &report.pr_points {
        out.push_str(&format!(
            "{:.4},{},{},{},{:.6},{:.6},{:.6}\n",
            p.threshold, p.counts.tp, p.counts.fp, p.counts.fn_, p.precision, p.recall, p.f1
        ));
    }
    out.push_str(&format!(
        "summary,mode={},ods={:.6},ods_t={:.4},ois={:.6},ap={:.6}\n",
        report.mode, report.ods_f, report.ods_threshold, report.ois_f, report.ap
    ));
    out
}
