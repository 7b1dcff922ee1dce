//! Pitch-plane trajectories, heatmap accumulation, and weak-zone
//! ranking.
//!
//! A ball detection contributes a point when its center lies inside the
//! frame's pitch bounding box (closed boundaries); the point is the
//! ball center linearly mapped into pitch-normalized (u, v), u across
//! the pitch width and v along its length with v = 0 at the box top.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detections::{best_ball_per_frame, BBoxNorm, Detection};
use crate::error::{Error, Result};
use crate::segmenter::{ClipSpec, VideoMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub frame_index: usize,
    pub u: f64,
    pub v: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub clip_label: String,
    pub points: Vec<TrajectoryPoint>,
}

/// 2D bin-count grid over the pitch plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub nu: usize,
    pub nv: usize,
    /// Row-major, `nv` rows of `nu` counts.
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Heatmap {
    pub fn count(&self, bin_u: usize, bin_v: usize) -> u64 {
        self.counts[bin_v * self.nu + bin_u]
    }
}

/// Closed-boundary containment of the ball center in the pitch box.
pub fn ball_in_pitch(ball: &BBoxNorm, pitch: &BBoxNorm) -> bool {
    let (x0, y0, x1, y1) = pitch.corners();
    (x0..=x1).contains(&ball.cx) && (y0..=y1).contains(&ball.cy)
}

/// Linear map of the ball center into pitch-normalized coordinates.
pub fn normalize_to_pitch(ball: &BBoxNorm, pitch: &BBoxNorm) -> Result<(f64, f64)> {
    let (x0, y0, x1, y1) = pitch.corners();
    let (w, h) = (x1 - x0, y1 - y0);
    if w <= 0.0 || h <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "degenerate pitch box {w}x{h}"
        )));
    }
    Ok(((ball.cx - x0) / w, (ball.cy - y0) / h))
}

/// Per-frame pitch and ball detections, keyed by frame index.
pub type FrameDetections = BTreeMap<usize, (Vec<Detection>, Vec<Detection>)>;

/// Loads `pitch/` and `ball/` subdirectories of `frame_%06d.txt` files.
pub fn load_frame_detections(root: &Path) -> Result<FrameDetections> {
    let mut out = FrameDetections::new();
    for (sub, slot) in [("pitch", 0usize), ("ball", 1)] {
        let dir = root.join(sub);
        if !dir.exists() {
            return Err(Error::InvalidInput(format!(
                "missing detection directory {}",
                dir.display()
            )));
        }
        for entry in fs::read_dir(&dir).map_err(|e| Error::file(&dir, e))? {
            let path = entry.map_err(|e| Error::file(&dir, e))?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(index) = name
                .strip_prefix("frame_")
                .and_then(|s| s.strip_suffix(".txt"))
                .and_then(|s| s.parse::<usize>().ok())
            else {
                continue;
            };
            let dets = crate::detections::parse_yolo_file(&path)?;
            let entry = out.entry(index).or_insert_with(|| (Vec::new(), Vec::new()));
            if slot == 0 {
                entry.0 = dets;
            } else {
                entry.1 = dets;
            }
        }
    }
    Ok(out)
}

/// Default number of frames a pitch box persists when the detector
/// momentarily drops it.
pub const DEFAULT_PITCH_GAP_FRAMES: usize = 15;

/// Builds the trajectory of one clip, or `None` when no ball point
/// survives the pitch-containment filter.
pub fn build_trajectory(
    dets: &FrameDetections,
    clip: &ClipSpec,
    meta: &VideoMeta,
    pitch_gap_frames: usize,
) -> Result<Option<Trajectory>> {
    let mut points = Vec::new();
    let mut last_pitch: Option<(usize, BBoxNorm)> = None;
    let warmup = clip.frame_start.saturating_sub(pitch_gap_frames);
    for frame in warmup..=clip.frame_end {
        let Some((pitches, balls)) = dets.get(&frame) else {
            continue;
        };
        if let Some(p) = best_ball_per_frame(pitches) {
            last_pitch = Some((frame, p.bbox));
        }
        if frame < clip.frame_start {
            continue;
        }
        let Some((pitch_frame, pitch)) = last_pitch else {
            continue;
        };
        if frame - pitch_frame > pitch_gap_frames {
            continue;
        }
        let Some(ball) = best_ball_per_frame(balls) else {
            continue;
        };
        if !ball_in_pitch(&ball.bbox, &pitch) {
            continue;
        }
        let (u, v) = normalize_to_pitch(&ball.bbox, &pitch)?;
        points.push(TrajectoryPoint {
            t: meta.timestamp(frame),
            frame_index: frame,
            u,
            v,
            confidence: ball.confidence.unwrap_or(1.0),
        });
    }
    Ok(if points.is_empty() {
        None
    } else {
        Some(Trajectory {
            clip_label: clip.label.clone(),
            points,
        })
    })
}

/// Bins every trajectory point into an `nu` x `nv` count grid.
pub fn accumulate_heatmap(trajs: &[Trajectory], nu: usize, nv: usize) -> Result<Heatmap> {
    if nu == 0 || nv == 0 {
        return Err(Error::InvalidParameter(format!(
            "heatmap grid must be at least 1x1, got {nu}x{nv}"
        )));
    }
    let mut counts = vec![0u64; nu * nv];
    let mut total = 0u64;
    for traj in trajs {
        for p in &traj.points {
            let bu = ((p.u * nu as f64).floor() as usize).min(nu - 1);
            let bv = ((p.v * nv as f64).floor() as usize).min(nv - 1);
            counts[bv * nu + bu] += 1;
            total += 1;
        }
    }
    Ok(Heatmap {
        nu,
        nv,
        counts,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakZone {
    pub bin_u: usize,
    pub bin_v: usize,
    pub count: u64,
    pub share: f64,
}

/// Top-`k` busiest bins; ties go to the lower `bin_v` then lower
/// `bin_u`. Empty bins are never listed.
pub fn weak_zones(hm: &Heatmap, k: usize) -> Vec<WeakZone> {
    if hm.total == 0 {
        return Vec::new();
    }
    let mut bins: Vec<WeakZone> = (0..hm.nv)
        .flat_map(|bv| (0..hm.nu).map(move |bu| (bu, bv)))
        .filter_map(|(bu, bv)| {
            let count = hm.count(bu, bv);
            (count > 0).then(|| WeakZone {
                bin_u: bu,
                bin_v: bv,
                count,
                share: count as f64 / hm.total as f64,
            })
        })
        .collect();
    bins.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(a.bin_v.cmp(&b.bin_v))
            .then(a.bin_u.cmp(&b.bin_u))
    });
    bins.truncate(k);
    bins
}

pub const TRAJECTORY_CSV_HEADER: &str = "clip_label,frame_index,t,u,v,confidence";

pub fn trajectories_to_csv(trajs: &[Trajectory]) -> String {
    let mut s = String::from(TRAJECTORY_CSV_HEADER);
    s.push('\n');
    for traj in trajs {
        for p in &traj.points {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                traj.clip_label, p.frame_index, p.t, p.u, p.v, p.confidence
            )
            .unwrap();
        }
    }
    s
}

pub fn trajectories_from_csv(text: &str) -> Result<Vec<Trajectory>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRAJECTORY_CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header '{TRAJECTORY_CSV_HEADER}'"),
            })
        }
    }
    let mut trajs: Vec<Trajectory> = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad {what} '{s}'"),
            })
        };
        let point = TrajectoryPoint {
            frame_index: fields[1].parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad frame index '{}'", fields[1]),
            })?,
            t: num(fields[2], "t")?,
            u: num(fields[3], "u")?,
            v: num(fields[4], "v")?,
            confidence: num(fields[5], "confidence")?,
        };
        match trajs.last_mut() {
            Some(last) if last.clip_label == fields[0] => last.points.push(point),
            _ => trajs.push(Trajectory {
                clip_label: fields[0].to_string(),
                points: vec![point],
            }),
        }
    }
    Ok(trajs)
}

pub fn heatmap_to_csv(hm: &Heatmap) -> String {
    let mut s = String::new();
    for bv in 0..hm.nv {
        let row: Vec<String> = (0..hm.nu).map(|bu| hm.count(bu, bv).to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Gnuplot-friendly 3D polylines: `u v t` columns, blank line between
/// trajectories, time as the third axis.
pub fn trajectories_to_gnuplot(trajs: &[Trajectory]) -> String {
    let mut s = String::new();
    for (i, traj) in trajs.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        writeln!(s, "# {}", traj.clip_label).unwrap();
        for p in &traj.points {
            writeln!(s, "{} {} {}", p.u, p.v, p.t).unwrap();
        }
    }
    s
}

/// Writes `<prefix>_trajectories.csv`, `<prefix>_heatmap.csv`, and
/// `<prefix>_trajectories_3d.dat`.
pub fn export_plot_data(trajs: &[Trajectory], hm: &Heatmap, path_prefix: &Path) -> Result<()> {
    let prefix = path_prefix.to_string_lossy();
    let write = |suffix: &str, contents: String| -> Result<()> {
        let path = std::path::PathBuf::from(format!("{prefix}{suffix}"));
        fs::write(&path, contents).map_err(|e| Error::file(path, e))
    };
    write("_trajectories.csv", trajectories_to_csv(trajs))?;
    write("_heatmap.csv", heatmap_to_csv(hm))?;
    write("_trajectories_3d.dat", trajectories_to_gnuplot(trajs))?;
    Ok(())
}
