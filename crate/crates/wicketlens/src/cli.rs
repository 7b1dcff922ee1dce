//! Subcommand implementations behind the `wicketlens` binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 input/validation error,
//! 3 external-tool error. Diagnostics go to stderr; machine output goes
//! to files or stdout only.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::detections;
use crate::error::{Error, Result};
use crate::fixtures::{self, DetectionFixtureSpec, MatchScript};
use crate::raster::{Roi, StageSelection};
use crate::scoreparse::FormatPolicy;
use crate::segmenter::{self, SegmentationOutput, VideoMeta};
use crate::trajectory::{self, Trajectory};

#[derive(Debug, Parser)]
#[command(name = "wicketlens", version, about = "Cricket broadcast scoreboard analytics")]
struct Cli {
    /// Worker threads for frame processing (0 = all processors).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Detect wicket events and write the clip manifest.
    Segment(SegmentArgs),
    /// Segment, then build trajectories and heatmaps in one pass.
    Analyze(AnalyzeArgs),
    /// Run the scorecard preprocessing chain on a single image.
    Preprocess(PreprocessArgs),
    /// Score detection files against ground truth.
    Evaluate(EvaluateArgs),
    /// Build per-clip trajectories from detection files.
    Trajectory(TrajectoryArgs),
    /// Accumulate a heatmap and rank weak zones from trajectory CSV.
    Heatmap(HeatmapArgs),
    /// Generate synthetic scoreboard or detection fixtures.
    GenFixture(GenFixtureArgs),
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// Frame directory (frame_%06d.ppm/.pgm + meta.json).
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Manifest output path; defaults to <out-dir>/manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// External trimmer command with {input} {start} {end} {output}.
    #[arg(long)]
    trimmer: Option<String>,
    /// Source video handed to the trimmer.
    #[arg(long)]
    video: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Detection root with pitch/ and ball/ subdirectories; trajectory
    /// and heatmap outputs are skipped when absent.
    #[arg(long)]
    detections: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

/// Flag-level overrides; flags beat the config file which beats defaults.
#[derive(Debug, Args)]
struct ConfigOverrides {
    #[arg(long)]
    interval: Option<f64>,
    #[arg(long)]
    debounce: Option<usize>,
    #[arg(long, value_parser = parse_policy)]
    format: Option<FormatPolicy>,
    #[arg(long)]
    pre_roll: Option<f64>,
    #[arg(long)]
    post_roll: Option<f64>,
}

fn parse_policy(s: &str) -> std::result::Result<FormatPolicy, String> {
    match s {
        "wickets_first" => Ok(FormatPolicy::WicketsFirst),
        "runs_first" => Ok(FormatPolicy::RunsFirst),
        "auto" => Ok(FormatPolicy::Auto),
        other => Err(format!(
            "unknown score format '{other}' (wickets_first|runs_first|auto)"
        )),
    }
}

impl ConfigOverrides {
    fn apply(&self, config: &mut Config) {
        if let Some(v) = self.interval {
            config.sample_interval_s = v;
        }
        if let Some(v) = self.debounce {
            config.debounce = v;
        }
        if let Some(v) = self.format {
            config.score_format = v;
        }
        if let Some(v) = self.pre_roll {
            config.pre_roll_s = v;
        }
        if let Some(v) = self.post_roll {
            config.post_roll_s = v;
        }
    }
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated subset of gray,gamma,invert,dilate,erode,median.
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Crop rectangle x,y,w,h; full image when omitted and no config.
    #[arg(long)]
    roi: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    morph_kernel: Option<usize>,
    #[arg(long)]
    median_kernel: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    preds: PathBuf,
    #[arg(long)]
    gts: PathBuf,
    /// IoU threshold for the operating-point precision/recall.
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Confidence threshold for the operating point.
    #[arg(long, default_value_t = 0.25)]
    conf: f64,
    /// Write the JSON report here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrajectoryArgs {
    /// Detection root with pitch/ and ball/ subdirectories.
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Video meta.json of the frame timeline.
    #[arg(long)]
    meta: PathBuf,
    /// Trajectory CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Gnuplot 3D polyline output path (optional).
    #[arg(long)]
    out_3d: Option<PathBuf>,
    #[arg(long, default_value_t = trajectory::DEFAULT_PITCH_GAP_FRAMES)]
    pitch_gap: usize,
}

#[derive(Debug, Args)]
struct HeatmapArgs {
    /// Trajectory CSV produced by the trajectory subcommand.
    #[arg(long)]
    trajectories: PathBuf,
    /// Grid as NUxNV, e.g. 10x20.
    #[arg(long, default_value = "10x20")]
    grid: String,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    /// Heatmap CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Weak-zone ranking JSON output path (optional).
    #[arg(long)]
    out_zones: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenFixtureArgs {
    /// Fixture script JSON (match script or detection path spec).
    #[arg(long)]
    script: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the script's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, serde::Deserialize)]
#[serde(untagged)]
enum FixtureScript {
    Match(MatchScript),
    Detections(DetectionFixtureSpec),
}

/// Parses argv and runs one subcommand, mapping errors onto the exit
/// code contract.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let jobs = cli.jobs;
    let result = match cli.command {
        Cmd::Segment(args) => cmd_segment(args, jobs),
        Cmd::Analyze(args) => cmd_analyze(args, jobs),
        Cmd::Preprocess(args) => cmd_preprocess(args),
        Cmd::Evaluate(args) => cmd_evaluate(args),
        Cmd::Trajectory(args) => cmd_trajectory(args),
        Cmd::Heatmap(args) => cmd_heatmap(args),
        Cmd::GenFixture(args) => cmd_gen_fixture(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_segmentation_with(
    frames: &Path,
    config_path: &Path,
    overrides: &ConfigOverrides,
    jobs: usize,
) -> Result<(Config, SegmentationOutput)> {
    let mut config = Config::load(config_path)?;
    overrides.apply(&mut config);
    config.validate()?;
    let seg_config = config.segmentation(jobs)?;
    let output = segmenter::run_segmentation(frames, &seg_config)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    Ok((config, output))
}

fn cmd_segment(args: SegmentArgs, jobs: usize) -> Result<()> {
    let (_, output) = run_segmentation_with(&args.frames, &args.config, &args.overrides, jobs)?;
    let manifest_path = match (&args.out, &args.out_dir) {
        (Some(path), _) => path.clone(),
        (None, Some(dir)) => {
            fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
            dir.join("manifest.json")
        }
        (None, None) => PathBuf::from("manifest.json"),
    };
    segmenter::emit_clip_manifest(&output.clips, &manifest_path)?;
    if let Some(dir) = &args.out_dir {
        segmenter::emit_score_log(&output.score_log, &dir.join("score_log.json"))?;
    }
    eprintln!(
        "{} wicket event(s), manifest written to {}",
        output.events.len(),
        manifest_path.display()
    );
    if let Some(trimmer) = &args.trimmer {
        let video = args.video.as_deref().ok_or_else(|| {
            Error::InvalidParameter("--trimmer requires --video".into())
        })?;
        let out_dir = args
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."));
        for w in segmenter::trim_clips(trimmer, video, &output.clips, &out_dir) {
            eprintln!("warning: {w}");
        }
    }
    Ok(())
}

fn build_clip_trajectories(
    detections_root: &Path,
    entries: &[segmenter::ManifestEntry],
    meta: &VideoMeta,
    pitch_gap: usize,
) -> Result<Vec<Trajectory>> {
    let dets = trajectory::load_frame_detections(detections_root)?;
    let mut trajs = Vec::new();
    for entry in entries {
        let clip = segmenter::ClipSpec {
            label: entry.label.clone(),
            start_s: entry.start_s,
            end_s: entry.end_s,
            frame_start: entry.frame_start,
            frame_end: entry.frame_end,
            event: crate::scoreparse::WicketEvent {
                t: entry.start_s,
                frame_index: entry.frame_start,
                wickets_before: entry.wicket_number.saturating_sub(1),
                wickets_after: entry.wicket_number,
                runs_at_event: entry.runs_at_event,
                innings_index: entry.innings,
            },
        };
        if let Some(traj) = trajectory::build_trajectory(&dets, &clip, meta, pitch_gap)? {
            trajs.push(traj);
        }
    }
    Ok(trajs)
}

fn cmd_analyze(args: AnalyzeArgs, jobs: usize) -> Result<()> {
    let (config, output) =
        run_segmentation_with(&args.frames, &args.config, &args.overrides, jobs)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::file(&args.out_dir, e))?;
    segmenter::emit_clip_manifest(&output.clips, &args.out_dir.join("manifest.json"))?;
    segmenter::emit_score_log(&output.score_log, &args.out_dir.join("score_log.json"))?;
    eprintln!("{} wicket event(s)", output.events.len());

    let Some(detections_root) = &args.detections else {
        return Ok(());
    };
    let entries = segmenter::manifest_entries(&output.clips);
    let trajs = build_clip_trajectories(
        detections_root,
        &entries,
        &output.meta,
        config.pitch_gap_frames,
    )?;
    let hm = trajectory::accumulate_heatmap(&trajs, config.heatmap.nu, config.heatmap.nv)?;
    let zones = trajectory::weak_zones(&hm, 5);
    fs::write(
        args.out_dir.join("trajectories.csv"),
        trajectory::trajectories_to_csv(&trajs),
    )
    .map_err(Error::Io)?;
    fs::write(
        args.out_dir.join("trajectories_3d.dat"),
        trajectory::trajectories_to_gnuplot(&trajs),
    )
    .map_err(Error::Io)?;
    fs::write(
        args.out_dir.join("heatmap.csv"),
        trajectory::heatmap_to_csv(&hm),
    )
    .map_err(Error::Io)?;
    let zones_json = serde_json::to_string_pretty(&zones).expect("zones serialize");
    fs::write(args.out_dir.join("weak_zones.json"), zones_json + "\n").map_err(Error::Io)?;
    eprintln!("{} trajectorie(s), {} point(s)", trajs.len(), hm.total);
    Ok(())
}

fn parse_roi_flag(s: &str) -> Result<Roi> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(Error::InvalidParameter(format!(
            "--roi expects x,y,w,h, got '{s}'"
        )));
    }
    let mut nums = [0usize; 4];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|_| {
            Error::InvalidParameter(format!("bad roi component '{part}'"))
        })?;
    }
    Ok(Roi {
        x: nums[0],
        y: nums[1],
        w: nums[2],
        h: nums[3],
    })
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<()> {
    let img = crate::pnm::read_auto(&args.input)?;
    let config = args.config.as_deref().map(Config::load).transpose()?;
    let mut params = config
        .as_ref()
        .map(|c| c.preprocess_params())
        .unwrap_or_default();
    if let Some(v) = args.gamma {
        params.gamma = v;
    }
    if let Some(v) = args.morph_kernel {
        params.morph_kernel = v;
    }
    if let Some(v) = args.median_kernel {
        params.median_kernel = v;
    }
    let roi = match (&args.roi, &config) {
        (Some(s), _) => parse_roi_flag(s)?,
        (None, Some(c)) => c.roi,
        (None, None) => Roi {
            x: 0,
            y: 0,
            w: img.width(),
            h: img.height(),
        },
    };
    let stages = match &args.stages {
        Some(list) => StageSelection::parse(list)?,
        None => StageSelection::default(),
    };
    let out = crate::raster::preprocess_scorecard_stages(&img, &roi, &params, &stages)?;
    crate::pnm::write_auto(&out, &args.out)?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let (dataset, skipped) = detections::load_dataset(&args.preds, &args.gts)?;
    let report = detections::evaluate_dataset(
        &dataset,
        &detections::coco_thresholds(),
        args.conf,
        args.iou,
        skipped,
    )?;
    print!("{}", report.to_table());
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        fs::write(out, json + "\n").map_err(|e| Error::file(out, e))?;
    }
    Ok(())
}

fn cmd_trajectory(args: TrajectoryArgs) -> Result<()> {
    let entries = segmenter::read_clip_manifest(&args.manifest)?;
    let meta = VideoMeta::load(&args.meta)?;
    let trajs = build_clip_trajectories(&args.detections, &entries, &meta, args.pitch_gap)?;
    fs::write(&args.out, trajectory::trajectories_to_csv(&trajs))
        .map_err(|e| Error::file(&args.out, e))?;
    if let Some(out_3d) = &args.out_3d {
        fs::write(out_3d, trajectory::trajectories_to_gnuplot(&trajs))
            .map_err(|e| Error::file(out_3d, e))?;
    }
    eprintln!("{} trajectorie(s)", trajs.len());
    Ok(())
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (nu, nv) = s.split_once('x').ok_or_else(|| {
        Error::InvalidParameter(format!("--grid expects NUxNV, got '{s}'"))
    })?;
    let nu = nu
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad grid width '{nu}'")))?;
    let nv = nv
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad grid height '{nv}'")))?;
    Ok((nu, nv))
}

fn cmd_heatmap(args: HeatmapArgs) -> Result<()> {
    let text = fs::read_to_string(&args.trajectories)
        .map_err(|e| Error::file(&args.trajectories, e))?;
    let trajs = trajectory::trajectories_from_csv(&text)?;
    let (nu, nv) = parse_grid(&args.grid)?;
    let hm = trajectory::accumulate_heatmap(&trajs, nu, nv)?;
    let zones = trajectory::weak_zones(&hm, args.top_k);
    fs::write(&args.out, trajectory::heatmap_to_csv(&hm))
        .map_err(|e| Error::file(&args.out, e))?;
    if let Some(out_zones) = &args.out_zones {
        let json = serde_json::to_string_pretty(&zones).expect("zones serialize");
        fs::write(out_zones, json + "\n").map_err(|e| Error::file(out_zones, e))?;
    }
    for z in &zones {
        println!(
            "bin ({}, {}): {} point(s), {:.1}%",
            z.bin_u,
            z.bin_v,
            z.count,
            z.share * 100.0
        );
    }
    Ok(())
}

fn cmd_gen_fixture(args: GenFixtureArgs) -> Result<()> {
    let text = fs::read_to_string(&args.script).map_err(|e| Error::file(&args.script, e))?;
    let script: FixtureScript = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", args.script.display())))?;
    match script {
        FixtureScript::Match(mut script) => {
            if let Some(seed) = args.seed {
                script.seed = seed;
            }
            let gt = fixtures::gen_match_sequence(&script, &args.out_dir)?;
            eprintln!(
                "{} frame(s), {} scripted event(s)",
                script.frame_count(),
                gt.events.len()
            );
        }
        FixtureScript::Detections(spec) => {
            let gt = fixtures::gen_detection_fixture(&spec, &args.out_dir)?;
            eprintln!("{} detection frame(s)", gt.len());
        }
    }
    Ok(())
}
