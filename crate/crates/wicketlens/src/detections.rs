//! Detection data model, YOLO text-file I/O, and the mAP evaluator.
//!
//! Boxes are stored center/size normalized to the image; corners are
//! clipped to the unit square before any area arithmetic. Matching is
//! greedy by descending confidence with best-IoU ground-truth choice,
//! and AP uses all-point interpolation (precision envelope).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized center/size bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBoxNorm {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBoxNorm {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok_center = (0.0..=1.0).contains(&self.cx) && (0.0..=1.0).contains(&self.cy);
        let ok_size = self.w > 0.0 && self.w <= 1.0 && self.h > 0.0 && self.h <= 1.0;
        if !(ok_center && ok_size) {
            return Err(Error::Validation(format!(
                "box out of range: cx={} cy={} w={} h={}",
                self.cx, self.cy, self.w, self.h
            )));
        }
        Ok(())
    }

    /// Corner form (x0, y0, x1, y1) intersected with the unit square.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            (self.cx - self.w / 2.0).max(0.0),
            (self.cy - self.h / 2.0).max(0.0),
            (self.cx + self.w / 2.0).min(1.0),
            (self.cy + self.h / 2.0).min(1.0),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub category: u32,
    pub bbox: BBoxNorm,
    /// Present on predictions, absent on ground truth.
    pub confidence: Option<f64>,
}

impl Detection {
    fn conf(&self) -> f64 {
        self.confidence.unwrap_or(1.0)
    }
}

/// Parses one YOLO annotation file: `category cx cy w h [confidence]`.
pub fn parse_yolo_file(path: &Path) -> Result<Vec<Detection>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_yolo_str(&text)
}

pub fn parse_yolo_str(text: &str) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 && fields.len() != 6 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 5 or 6 fields, got {}", fields.len()),
            });
        }
        let parse_num = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad {what} '{s}'"),
            })
        };
        let category: u32 = fields[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad category '{}'", fields[0]),
        })?;
        let bbox = BBoxNorm {
            cx: parse_num(fields[1], "cx")?,
            cy: parse_num(fields[2], "cy")?,
            w: parse_num(fields[3], "w")?,
            h: parse_num(fields[4], "h")?,
        };
        bbox.validate()?;
        let confidence = if fields.len() == 6 {
            let c = parse_num(fields[5], "confidence")?;
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Validation(format!(
                    "line {line_no}: confidence {c} outside [0,1]"
                )));
            }
            Some(c)
        } else {
            None
        };
        out.push(Detection {
            category,
            bbox,
            confidence,
        });
    }
    Ok(out)
}

/// Writes detections in the same format (confidence included if present).
pub fn write_yolo_file(dets: &[Detection], path: &Path) -> Result<()> {
    let mut text = String::new();
    for d in dets {
        let b = d.bbox;
        match d.confidence {
            Some(c) => writeln!(text, "{} {} {} {} {} {}", d.category, b.cx, b.cy, b.w, b.h, c),
            None => writeln!(text, "{} {} {} {} {}", d.category, b.cx, b.cy, b.w, b.h),
        }
        .expect("string write");
    }
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

/// Intersection over union in corner coordinates; 0 for disjoint boxes.
pub fn iou(a: &BBoxNorm, b: &BBoxNorm) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Outcome of greedy matching within one image and category.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// (index into `preds`, is-true-positive), sorted by confidence
    /// descending with input order breaking ties.
    pub pred_flags: Vec<(usize, bool)>,
    pub fn_count: usize,
}

/// Greedy matcher: predictions in confidence order claim the unmatched
/// ground truth with the highest IoU at or above `iou_thresh`.
pub fn match_detections(preds: &[Detection], gts: &[Detection], iou_thresh: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| {
        preds[j]
            .conf()
            .partial_cmp(&preds[i].conf())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut gt_used = vec![false; gts.len()];
    let mut pred_flags = Vec::with_capacity(preds.len());
    for &pi in &order {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if gt_used[gi] || gt.category != preds[pi].category {
                continue;
            }
            let v = iou(&preds[pi].bbox, &gt.bbox);
            if v >= iou_thresh && best.map_or(true, |(_, bv)| v > bv) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, _)) = best {
            gt_used[gi] = true;
            pred_flags.push((pi, true));
        } else {
            pred_flags.push((pi, false));
        }
    }
    let fn_count = gt_used.iter().filter(|u| !**u).count();
    MatchResult {
        pred_flags,
        fn_count,
    }
}

/// All-point interpolated AP over a globally confidence-sorted TP/FP
/// sequence. `records` must already be sorted by descending confidence.
pub fn average_precision(records: &[(f64, bool)], total_gt: usize) -> f64 {
    if total_gt == 0 {
        return if records.is_empty() { 1.0 } else { 0.0 };
    }
    if records.is_empty() {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut precisions = Vec::with_capacity(records.len());
    let mut recalls = Vec::with_capacity(records.len());
    for (i, &(_, is_tp)) in records.iter().enumerate() {
        if is_tp {
            tp += 1;
        }
        precisions.push(tp as f64 / (i + 1) as f64);
        recalls.push(tp as f64 / total_gt as f64);
    }
    // precision envelope: max precision at or beyond each point
    let mut envelope = precisions.clone();
    for i in (0..envelope.len() - 1).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..records.len() {
        ap += (recalls[i] - prev_recall) * envelope[i];
        prev_recall = recalls[i];
    }
    ap
}

/// Standard IoU sweep 0.50:0.05:0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| 0.50 + 0.05 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAp {
    pub iou: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub ap50: f64,
    pub map50_95: f64,
    pub per_threshold: Vec<ThresholdAp>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// File stems present in only one of the two directories.
    pub skipped: Vec<String>,
}

impl EvalReport {
    /// Aligned plain-text rendering of the headline numbers.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<12} {:>10} {:>10} {:>10} {:>10}",
            "", "precision", "recall", "mAP50", "mAP50-95"
        )
        .unwrap();
        writeln!(
            s,
            "{:<12} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            "all", self.precision, self.recall, self.ap50, self.map50_95
        )
        .unwrap();
        writeln!(s, "tp={} fp={} fn={}", self.tp, self.fp, self.fn_).unwrap();
        if !self.skipped.is_empty() {
            writeln!(s, "skipped (stem mismatch): {}", self.skipped.join(", ")).unwrap();
        }
        s
    }
}

/// One image's predictions and ground truth, keyed by file stem.
pub type Dataset = Vec<(String, Vec<Detection>, Vec<Detection>)>;

/// Loads matching `.txt` stems from a prediction and a ground-truth
/// directory; returns the paired dataset plus unmatched stems.
pub fn load_dataset(preds_dir: &Path, gts_dir: &Path) -> Result<(Dataset, Vec<String>)> {
    let preds = list_stems(preds_dir)?;
    let gts = list_stems(gts_dir)?;
    let mut skipped: Vec<String> = Vec::new();
    let mut dataset = Vec::new();
    for (stem, pred_path) in &preds {
        match gts.get(stem) {
            Some(gt_path) => {
                let p = parse_yolo_file(pred_path)?;
                let g = parse_yolo_file(gt_path)?;
                dataset.push((stem.clone(), p, g));
            }
            None => skipped.push(stem.clone()),
        }
    }
    for stem in gts.keys() {
        if !preds.contains_key(stem) {
            skipped.push(stem.clone());
        }
    }
    skipped.sort();
    dataset.sort_by(|a, b| a.0.cmp(&b.0));
    Ok((dataset, skipped))
}

fn list_stems(dir: &Path) -> Result<BTreeMap<String, std::path::PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::file(dir, e))? {
        let entry = entry.map_err(|e| Error::file(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("txt") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

/// Evaluates predictions against ground truth over the given IoU sweep.
pub fn evaluate_dataset(
    dataset: &Dataset,
    thresholds: &[f64],
    conf_threshold: f64,
    op_iou: f64,
    skipped: Vec<String>,
) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput(
            "no image stems shared between predictions and ground truth".into(),
        ));
    }
    let mut per_threshold = Vec::with_capacity(thresholds.len());
    for &th in thresholds {
        per_threshold.push(ThresholdAp {
            iou: th,
            ap: map_at_threshold(dataset, th),
        });
    }
    let ap50 = per_threshold
        .iter()
        .find(|t| (t.iou - 0.5).abs() < 1e-9)
        .map(|t| t.ap)
        .unwrap_or_else(|| map_at_threshold(dataset, 0.5));
    let map50_95 =
        per_threshold.iter().map(|t| t.ap).sum::<f64>() / per_threshold.len() as f64;

    // operating point: confidence-filtered matching at op_iou
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (_, preds, gts) in dataset {
        let filtered: Vec<Detection> = preds
            .iter()
            .filter(|d| d.conf() >= conf_threshold)
            .cloned()
            .collect();
        for category in categories(&filtered, gts) {
            let p: Vec<Detection> = filtered
                .iter()
                .filter(|d| d.category == category)
                .cloned()
                .collect();
            let g: Vec<Detection> = gts
                .iter()
                .filter(|d| d.category == category)
                .cloned()
                .collect();
            let m = match_detections(&p, &g, op_iou);
            tp += m.pred_flags.iter().filter(|(_, t)| *t).count();
            fp += m.pred_flags.iter().filter(|(_, t)| !*t).count();
            fn_ += m.fn_count;
        }
    }
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    Ok(EvalReport {
        precision,
        recall,
        ap50,
        map50_95,
        per_threshold,
        tp,
        fp,
        fn_,
        skipped,
    })
}

/// Directory-level evaluation entry point.
pub fn evaluate(
    preds_dir: &Path,
    gts_dir: &Path,
    thresholds: &[f64],
    conf_threshold: f64,
) -> Result<EvalReport> {
    let (dataset, skipped) = load_dataset(preds_dir, gts_dir)?;
    evaluate_dataset(&dataset, thresholds, conf_threshold, 0.5, skipped)
}

fn categories(preds: &[Detection], gts: &[Detection]) -> Vec<u32> {
    let mut cats: Vec<u32> = preds
        .iter()
        .chain(gts.iter())
        .map(|d| d.category)
        .collect();
    cats.sort_unstable();
    cats.dedup();
    cats
}

/// Mean AP over categories at one IoU threshold; the PR accumulation is
/// an ordered reduction by (confidence desc, stem asc, input order).
fn map_at_threshold(dataset: &Dataset, iou_thresh: f64) -> f64 {
    let mut all_cats: Vec<u32> = Vec::new();
    for (_, preds, gts) in dataset {
        all_cats.extend(categories(preds, gts));
    }
    all_cats.sort_unstable();
    all_cats.dedup();
    if all_cats.is_empty() {
        return 1.0; // nothing predicted, nothing to find
    }
    let mut ap_sum = 0.0;
    for &category in &all_cats {
        // (conf, stem index, input order, tp)
        let mut records: Vec<(f64, usize, usize, bool)> = Vec::new();
        let mut total_gt = 0usize;
        for (stem_idx, (_, preds, gts)) in dataset.iter().enumerate() {
            let p: Vec<Detection> = preds
                .iter()
                .filter(|d| d.category == category)
                .cloned()
                .collect();
            let g: Vec<Detection> = gts
                .iter()
                .filter(|d| d.category == category)
                .cloned()
                .collect();
            total_gt += g.len();
            let m = match_detections(&p, &g, iou_thresh);
            for (rank, &(pi, tp)) in m.pred_flags.iter().enumerate() {
                records.push((p[pi].conf(), stem_idx, rank, tp));
            }
        }
        records.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let flat: Vec<(f64, bool)> = records.iter().map(|r| (r.0, r.3)).collect();
        ap_sum += average_precision(&flat, total_gt);
    }
    ap_sum / all_cats.len() as f64
}

/// Highest-confidence ball detection of a frame; input order breaks ties.
pub fn best_ball_per_frame(dets: &[Detection]) -> Option<&Detection> {
    let mut best: Option<&Detection> = None;
    for d in dets {
        if best.map_or(true, |b| d.conf() > b.conf()) {
            best = Some(d);
        }
    }
    best
}
