//! Frame-timeline driver: sample frames, run the crop/preprocess/OCR/
//! parse/track chain, and turn wicket events into clip specifications
//! and a byte-stable JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ocr::{self, OcrEngineConfig};
use crate::raster::{self, PreprocessParams, Roi, StageSelection};
use crate::scoreparse::{self, FormatPolicy, ScoreTracker, WicketEvent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub fps: f64,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub start_time: f64,
}

impl VideoMeta {
    pub fn timestamp(&self, frame_index: usize) -> f64 {
        frame_index as f64 / self.fps + self.start_time
    }

    pub fn duration(&self) -> f64 {
        self.frame_count as f64 / self.fps
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let meta: VideoMeta = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if !(meta.fps > 0.0) {
            return Err(Error::Config(format!(
                "{}: fps must be positive",
                path.display()
            )));
        }
        Ok(meta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("meta serializes");
        fs::write(path, text + "\n").map_err(|e| Error::file(path, e))
    }
}

/// A wicket clip interval derived from one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub label: String,
    pub start_s: f64,
    pub end_s: f64,
    pub frame_start: usize,
    pub frame_end: usize,
    pub event: WicketEvent,
}

/// Frame indices sampled at `interval_s`, strictly increasing.
pub fn sample_timeline(meta: &VideoMeta, interval_s: f64) -> Result<Vec<usize>> {
    if !(interval_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample interval must be positive, got {interval_s}"
        )));
    }
    let mut indices = Vec::new();
    let mut k = 0u64;
    loop {
        let idx = (k as f64 * interval_s * meta.fps + 0.5).floor();
        if idx >= meta.frame_count as f64 {
            break;
        }
        let idx = idx as usize;
        if indices.last() != Some(&idx) {
            indices.push(idx);
        }
        k += 1;
    }
    Ok(indices)
}

/// Expands an event into a clip with pre/post roll, clamped to the video.
pub fn event_to_clip(
    event: &WicketEvent,
    pre_roll_s: f64,
    post_roll_s: f64,
    meta: &VideoMeta,
) -> ClipSpec {
    let lo = meta.start_time;
    let hi = meta.start_time + meta.duration();
    let start_s = (event.t - pre_roll_s).max(lo);
    let mut end_s = (event.t + post_roll_s).min(hi);
    if end_s <= start_s {
        end_s = start_s + 1.0 / meta.fps; // zero-length guard
    }
    let last = meta.frame_count.saturating_sub(1);
    let frame_start = (((start_s - meta.start_time) * meta.fps + 0.5).floor() as usize).min(last);
    let frame_end = (((end_s - meta.start_time) * meta.fps + 0.5).floor() as usize)
        .min(last)
        .max(frame_start);
    ClipSpec {
        label: format!("wicket_{}_{}", event.innings_index, event.wickets_after),
        start_s,
        end_s,
        frame_start,
        frame_end,
        event: event.clone(),
    }
}

/// Runtime configuration for `run_segmentation`.
#[derive(Debug, Clone)]
pub struct SegmentationConfig {
    pub roi: Roi,
    pub preprocess: PreprocessParams,
    pub stages: StageSelection,
    pub sample_interval_s: f64,
    pub score_format: FormatPolicy,
    pub debounce: usize,
    pub pre_roll_s: f64,
    pub post_roll_s: f64,
    pub ocr: OcrEngineConfig,
    /// Worker threads for preprocessing + OCR; 0 means all processors.
    pub jobs: usize,
}

impl SegmentationConfig {
    pub fn new(roi: Roi) -> Self {
        Self {
            roi,
            preprocess: PreprocessParams::default(),
            stages: StageSelection::default(),
            sample_interval_s: 0.1,
            score_format: FormatPolicy::Auto,
            debounce: 2,
            pre_roll_s: 8.0,
            post_roll_s: 2.5,
            ocr: OcrEngineConfig::default(),
            jobs: 0,
        }
    }
}

/// Per-sampled-frame audit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLogEntry {
    pub frame_index: usize,
    pub t: f64,
    pub ocr_text: String,
    pub parsed: Option<(u32, u32)>,
    pub decision: String,
}

#[derive(Debug, Clone)]
pub struct SegmentationOutput {
    pub meta: VideoMeta,
    pub events: Vec<WicketEvent>,
    pub clips: Vec<ClipSpec>,
    pub score_log: Vec<ScoreLogEntry>,
    pub warnings: Vec<String>,
}

pub fn frame_file(dir: &Path, index: usize) -> Option<PathBuf> {
    for ext in ["ppm", "pgm", "png"] {
        let p = dir.join(format!("frame_{index:06}.{ext}"));
        if p.exists() {
            return Some(p);
        }
    }
    None
}

/// Runs the full scoreboard pipeline over a frame directory.
///
/// Per-frame read failures are warnings; more than half unreadable or
/// a failing OCR engine is fatal. OCR of sampled frames runs in
/// parallel, tracker updates are applied strictly in timestamp order.
pub fn run_segmentation(frames_dir: &Path, config: &SegmentationConfig) -> Result<SegmentationOutput> {
    let meta = VideoMeta::load(&frames_dir.join("meta.json"))?;
    config.preprocess.validate()?;
    let indices = sample_timeline(&meta, config.sample_interval_s)?;

    let ocr_frame = |&index: &usize| -> (usize, Result<String>) {
        let outcome = match frame_file(frames_dir, index) {
            None => Err(Error::InvalidInput(format!("frame {index:06}: no frame file"))),
            Some(path) => crate::pnm::read_auto(&path)
                .and_then(|img| {
                    raster::preprocess_scorecard_stages(
                        &img,
                        &config.roi,
                        &config.preprocess,
                        &config.stages,
                    )
                })
                .and_then(|pre| ocr::recognize(&pre, &config.ocr))
                .map(|res| res.text),
        };
        (index, outcome)
    };

    let recognized: Vec<(usize, Result<String>)> = if config.jobs == 1 {
        indices.iter().map(ocr_frame).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| indices.par_iter().map(ocr_frame).collect())
    };

    let mut tracker = ScoreTracker::new(config.debounce);
    let mut events = Vec::new();
    let mut score_log = Vec::new();
    let mut warnings = Vec::new();
    let mut unreadable = 0usize;

    for (index, outcome) in recognized {
        let t = meta.timestamp(index);
        match outcome {
            // a broken OCR engine is fatal, not a per-frame condition
            Err(e @ Error::OcrEngine(_)) => return Err(e),
            Err(e) => {
                let warning = format!("frame {index:06}: {e}");
                unreadable += 1;
                warnings.push(warning.clone());
                score_log.push(ScoreLogEntry {
                    frame_index: index,
                    t,
                    ocr_text: String::new(),
                    parsed: None,
                    decision: format!("unreadable: {warning}"),
                });
            }
            Ok(text) => {
                let reading =
                    scoreparse::parse_score(&text, config.score_format, tracker.accepted(), t);
                let (parsed, decision) = match &reading {
                    None => (None, "no_score".to_string()),
                    Some(r) => {
                        let before = tracker.accepted().cloned();
                        let new_events = tracker.update(r, index)?;
                        let decision = if !new_events.is_empty() {
                            format!("wicket x{}", new_events.len())
                        } else if tracker.accepted() != before.as_ref() {
                            "accepted".to_string()
                        } else {
                            "pending".to_string()
                        };
                        events.extend(new_events);
                        (Some((r.runs, r.wickets)), decision)
                    }
                };
                score_log.push(ScoreLogEntry {
                    frame_index: index,
                    t,
                    ocr_text: text,
                    parsed,
                    decision,
                });
            }
        }
    }

    if !indices.is_empty() && unreadable * 2 > indices.len() {
        return Err(Error::InvalidInput(format!(
            "{unreadable} of {} sampled frames unreadable",
            indices.len()
        )));
    }

    let clips = events
        .iter()
        .map(|e| event_to_clip(e, config.pre_roll_s, config.post_roll_s, &meta))
        .collect();
    Ok(SegmentationOutput {
        meta,
        events,
        clips,
        score_log,
        warnings,
    })
}

/// Row of the clip manifest file; key order is the file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub innings: u32,
    pub wicket_number: u32,
    pub start_s: f64,
    pub end_s: f64,
    pub frame_start: usize,
    pub frame_end: usize,
    pub runs_at_event: u32,
}

impl From<&ClipSpec> for ManifestEntry {
    fn from(clip: &ClipSpec) -> Self {
        ManifestEntry {
            label: clip.label.clone(),
            innings: clip.event.innings_index,
            wicket_number: clip.event.wickets_after,
            start_s: clip.start_s,
            end_s: clip.end_s,
            frame_start: clip.frame_start,
            frame_end: clip.frame_end,
            runs_at_event: clip.event.runs_at_event,
        }
    }
}

pub fn manifest_entries(clips: &[ClipSpec]) -> Vec<ManifestEntry> {
    clips.iter().map(ManifestEntry::from).collect()
}

/// Writes the UTF-8 JSON clip manifest, two-space indent.
pub fn emit_clip_manifest(clips: &[ClipSpec], path: &Path) -> Result<()> {
    let entries = manifest_entries(clips);
    let text = serde_json::to_string_pretty(&entries).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(|e| Error::file(path, e))
}

pub fn read_clip_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Writes the per-frame score log as JSON.
pub fn emit_score_log(log: &[ScoreLogEntry], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(log).expect("score log serializes");
    fs::write(path, text + "\n").map_err(|e| Error::file(path, e))
}

/// Invokes an external trimmer per clip; failures downgrade to warnings.
///
/// `command` uses `{input} {start} {end} {output}` placeholders.
pub fn trim_clips(
    command: &str,
    input: &Path,
    clips: &[ClipSpec],
    out_dir: &Path,
) -> Vec<String> {
    let mut warnings = Vec::new();
    for clip in clips {
        let output = out_dir.join(format!("{}.mp4", clip.label));
        let words: Vec<String> = command
            .split_whitespace()
            .map(|w| {
                w.replace("{input}", &input.to_string_lossy())
                    .replace("{start}", &clip.start_s.to_string())
                    .replace("{end}", &clip.end_s.to_string())
                    .replace("{output}", &output.to_string_lossy())
            })
            .collect();
        let Some((program, args)) = words.split_first() else {
            warnings.push("empty trimmer command".into());
            continue;
        };
        match Command::new(program).args(args).status() {
            Ok(status) if status.success() => {}
            Ok(status) => warnings.push(format!("trimmer for {}: exit {status}", clip.label)),
            Err(e) => warnings.push(format!("trimmer for {}: {e}", clip.label)),
        }
    }
    warnings
}
