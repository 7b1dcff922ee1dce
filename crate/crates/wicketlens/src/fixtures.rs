//! Hermetic test-asset generation: synthetic scoreboard frame sequences
//! with scripted score timelines, and synthetic detection files with
//! known trajectories. Every generator is deterministic under a fixed
//! seed and returns machine-readable ground truth.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::detections::{BBoxNorm, Detection};
use crate::error::{Error, Result};
use crate::ocr::GlyphFont;
use crate::raster::{RasterImage, Roi};
use crate::scoreparse::{format_score, FormatPolicy, ScoreFormat};
use crate::segmenter::VideoMeta;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreChange {
    pub t: f64,
    pub runs: u32,
    pub wickets: u32,
}

/// Scripted scoreboard timeline for one synthetic match video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchScript {
    pub fps: f64,
    pub duration_s: f64,
    /// Sorted by t; coordinate-wise non-decreasing (single innings).
    pub score_changes: Vec<ScoreChange>,
    #[serde(default = "default_separator")]
    pub separator: char,
    #[serde(default = "default_format")]
    pub format: ScoreFormat,
    #[serde(default = "default_frame_width")]
    pub frame_width: usize,
    #[serde(default = "default_frame_height")]
    pub frame_height: usize,
    #[serde(default = "default_roi")]
    pub roi: Roi,
    #[serde(default = "default_glyph_scale")]
    pub glyph_scale: usize,
    /// Salt-and-pepper flip probability per pixel, at most 0.05.
    #[serde(default)]
    pub noise_density: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_separator() -> char {
    '-'
}
fn default_format() -> ScoreFormat {
    ScoreFormat::RunsFirst
}
fn default_frame_width() -> usize {
    320
}
fn default_frame_height() -> usize {
    96
}
fn default_roi() -> Roi {
    Roi {
        x: 16,
        y: 24,
        w: 288,
        h: 48,
    }
}
fn default_glyph_scale() -> usize {
    5
}

impl MatchScript {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0) || !(self.duration_s > 0.0) {
            return Err(Error::Validation("fps and duration must be positive".into()));
        }
        if !(0.0..=0.05).contains(&self.noise_density) {
            return Err(Error::Validation(format!(
                "noise density {} outside [0, 0.05]",
                self.noise_density
            )));
        }
        if self.glyph_scale == 0 {
            return Err(Error::Validation("glyph scale must be >= 1".into()));
        }
        for pair in self.score_changes.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b.t < a.t || b.runs < a.runs || b.wickets < a.wickets {
                return Err(Error::Validation(format!(
                    "score changes must be non-decreasing: ({},{}) at {} then ({},{}) at {}",
                    a.runs, a.wickets, a.t, b.runs, b.wickets, b.t
                )));
            }
        }
        if self.score_changes.iter().any(|c| c.wickets > 10) {
            return Err(Error::Validation("wickets exceed 10".into()));
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.fps * self.duration_s).round() as usize
    }

    pub fn score_at(&self, t: f64) -> (u32, u32) {
        self.score_changes
            .iter()
            .take_while(|c| c.t <= t)
            .last()
            .map(|c| (c.runs, c.wickets))
            .unwrap_or((0, 0))
    }

    /// A pipeline config matched to this script, and the score-format
    /// policy mirrors the scripted display order.
    ///
    /// The morphology kernel must fit inside a single glyph cell even
    /// after a noise hole: the font draws diagonals as corner-connected
    /// cells, and an opening whose element cannot dodge a hole inside
    /// one of those isolated cells erases the entire cell. Cells of
    /// `glyph_scale` < 7 leave no room for a 3x3 element to dodge, so
    /// the kernel degenerates to 1 there and the median pass does the
    /// denoising on its own.
    pub fn matching_config(&self) -> Config {
        let mut config = Config::with_roi(self.roi);
        config.morph_kernel = if self.glyph_scale >= 7 { 3 } else { 1 };
        config.score_format = match self.format {
            ScoreFormat::WicketsFirst => FormatPolicy::WicketsFirst,
            ScoreFormat::RunsFirst => FormatPolicy::RunsFirst,
        };
        config
    }
}

/// One expected wicket event, with the exact scripted time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEvent {
    pub t: f64,
    pub runs: u32,
    pub wickets_after: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchGroundTruth {
    pub seed: u64,
    pub noise_density: f64,
    pub roi: Roi,
    pub events: Vec<GroundTruthEvent>,
}

/// Expands score changes into one ground-truth event per wicket increment.
pub fn scripted_events(script: &MatchScript) -> Vec<GroundTruthEvent> {
    let mut events = Vec::new();
    let mut wickets = script
        .score_changes
        .first()
        .filter(|c| c.t <= 0.0)
        .map(|c| c.wickets)
        .unwrap_or(0);
    for change in &script.score_changes {
        if change.t <= 0.0 {
            wickets = wickets.max(change.wickets);
            continue;
        }
        for w in wickets..change.wickets {
            events.push(GroundTruthEvent {
                t: change.t,
                runs: change.runs,
                wickets_after: w + 1,
            });
        }
        wickets = wickets.max(change.wickets);
    }
    events
}

/// Renders one scoreboard frame: black background, white glyphs
/// centered in the ROI.
pub fn render_scoreboard_frame(
    runs: u32,
    wickets: u32,
    script: &MatchScript,
) -> Result<RasterImage> {
    let font = GlyphFont::builtin();
    let text = format_score(runs, wickets, script.separator, script.format);
    let text_w = font.text_width(&text, script.glyph_scale);
    let text_h = font.text_height(script.glyph_scale);
    if text_w > script.roi.w || text_h > script.roi.h {
        return Err(Error::Layout(format!(
            "score '{text}' needs {text_w}x{text_h}, roi is {}x{}",
            script.roi.w, script.roi.h
        )));
    }
    if script.roi.x + script.roi.w > script.frame_width
        || script.roi.y + script.roi.h > script.frame_height
    {
        return Err(Error::Layout("roi exceeds frame".into()));
    }
    let mut frame = RasterImage::filled(script.frame_width, script.frame_height, 3, 0)?;
    let x = script.roi.x + (script.roi.w - text_w) / 2;
    let y = script.roi.y + (script.roi.h - text_h) / 2;
    font.blit_text(&mut frame, &text, x, y, script.glyph_scale, 255)?;
    Ok(frame)
}

fn apply_salt_pepper(frame: &mut RasterImage, density: f64, rng: &mut ChaCha8Rng) {
    if density <= 0.0 {
        return;
    }
    let channels = frame.channels();
    let pixels = frame.width() * frame.height();
    for p in 0..pixels {
        if rng.gen::<f64>() < density {
            let value = if rng.gen::<bool>() { 255 } else { 0 };
            for c in 0..channels {
                frame.data_mut()[p * channels + c] = value;
            }
        }
    }
}

/// Writes the frame directory (`frame_%06d.ppm` + `meta.json` +
/// `config.json` + `ground_truth.json`) and returns the ground truth.
pub fn gen_match_sequence(script: &MatchScript, out_dir: &Path) -> Result<MatchGroundTruth> {
    script.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;
    let frame_count = script.frame_count();
    for index in 0..frame_count {
        let t = index as f64 / script.fps;
        let (runs, wickets) = script.score_at(t);
        let mut frame = render_scoreboard_frame(runs, wickets, script)?;
        // per-frame stream keeps noise independent of render order
        let mut rng =
            ChaCha8Rng::seed_from_u64(script.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        apply_salt_pepper(&mut frame, script.noise_density, &mut rng);
        crate::pnm::write_ppm(&frame, &out_dir.join(format!("frame_{index:06}.ppm")))?;
    }
    let meta = VideoMeta {
        fps: script.fps,
        frame_count,
        width: script.frame_width,
        height: script.frame_height,
        start_time: 0.0,
    };
    meta.save(&out_dir.join("meta.json"))?;
    script.matching_config().save(&out_dir.join("config.json"))?;
    let ground_truth = MatchGroundTruth {
        seed: script.seed,
        noise_density: script.noise_density,
        roi: script.roi,
        events: scripted_events(script),
    };
    let text = serde_json::to_string_pretty(&ground_truth).expect("ground truth serializes");
    fs::write(out_dir.join("ground_truth.json"), text + "\n")
        .map_err(|e| Error::file(out_dir.join("ground_truth.json"), e))?;
    Ok(ground_truth)
}

/// Parametric ball path for a synthetic detection fixture; waypoints
/// are interpolated linearly across the frame range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionFixtureSpec {
    pub pitch: BBoxNorm,
    pub frame_start: usize,
    pub frame_end: usize,
    /// (u, v) waypoints in pitch-normalized coordinates.
    pub path: Vec<(f64, f64)>,
    #[serde(default = "default_ball_size")]
    pub ball_size: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_ball_size() -> f64 {
    0.02
}
fn default_confidence() -> f64 {
    0.9
}

impl DetectionFixtureSpec {
    pub fn validate(&self) -> Result<()> {
        self.pitch.validate()?;
        if self.frame_end < self.frame_start {
            return Err(Error::Validation("frame range is empty".into()));
        }
        if self.path.is_empty() {
            return Err(Error::Validation("path needs at least one waypoint".into()));
        }
        for &(u, v) in &self.path {
            if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "path point ({u}, {v}) outside [0,1]^2"
                )));
            }
        }
        Ok(())
    }

    /// Path position at fraction `s` in [0, 1].
    pub fn path_at(&self, s: f64) -> (f64, f64) {
        if self.path.len() == 1 {
            return self.path[0];
        }
        let segments = (self.path.len() - 1) as f64;
        let x = s.clamp(0.0, 1.0) * segments;
        let i = (x.floor() as usize).min(self.path.len() - 2);
        let frac = x - i as f64;
        let (u0, v0) = self.path[i];
        let (u1, v1) = self.path[i + 1];
        (u0 + (u1 - u0) * frac, v0 + (v1 - v0) * frac)
    }
}

/// Writes `pitch/frame_%06d.txt` and `ball/frame_%06d.txt` under
/// `out_root`; returns per-frame ground-truth (frame, u, v).
pub fn gen_detection_fixture(
    spec: &DetectionFixtureSpec,
    out_root: &Path,
) -> Result<Vec<(usize, f64, f64)>> {
    spec.validate()?;
    let pitch_dir = out_root.join("pitch");
    let ball_dir = out_root.join("ball");
    fs::create_dir_all(&pitch_dir).map_err(|e| Error::file(&pitch_dir, e))?;
    fs::create_dir_all(&ball_dir).map_err(|e| Error::file(&ball_dir, e))?;

    let (px0, py0, px1, py1) = spec.pitch.corners();
    let span = (spec.frame_end - spec.frame_start).max(1) as f64;
    let mut ground_truth = Vec::new();
    for frame in spec.frame_start..=spec.frame_end {
        let s = (frame - spec.frame_start) as f64 / span;
        let (u, v) = spec.path_at(s);
        let ball = Detection {
            category: 0,
            bbox: BBoxNorm {
                cx: px0 + u * (px1 - px0),
                cy: py0 + v * (py1 - py0),
                w: spec.ball_size,
                h: spec.ball_size,
            },
            confidence: Some(spec.confidence),
        };
        let pitch = Detection {
            category: 0,
            bbox: spec.pitch,
            confidence: Some(0.95),
        };
        crate::detections::write_yolo_file(
            &[pitch],
            &pitch_dir.join(format!("frame_{frame:06}.txt")),
        )?;
        crate::detections::write_yolo_file(
            &[ball],
            &ball_dir.join(format!("frame_{frame:06}.txt")),
        )?;
        ground_truth.push((frame, u, v));
    }
    let text = serde_json::to_string_pretty(&ground_truth).expect("ground truth serializes");
    fs::write(out_root.join("ground_truth.json"), text + "\n")
        .map_err(|e| Error::file(out_root.join("ground_truth.json"), e))?;
    Ok(ground_truth)
}
