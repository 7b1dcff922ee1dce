//! End-to-end tests of the `wicketlens` binary: exit codes, file
//! outputs, and the equivalence of `analyze` with the chained
//! subcommands.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wicketlens::fixtures::{gen_match_sequence, MatchScript, ScoreChange};
use wicketlens::raster::{RasterImage, Roi};
use wicketlens::scoreparse::ScoreFormat;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wicketlens"));
    // keep host configuration out of the tests
    cmd.env_remove("WICKETLENS_OCR_CMD");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn demo_script(noise: f64, seed: u64) -> MatchScript {
    MatchScript {
        fps: 10.0,
        duration_s: 6.0,
        score_changes: vec![
            ScoreChange { t: 1.5, runs: 12, wickets: 1 },
            ScoreChange { t: 4.0, runs: 30, wickets: 2 },
        ],
        separator: '/',
        format: ScoreFormat::RunsFirst,
        frame_width: 320,
        frame_height: 96,
        roi: Roi { x: 16, y: 24, w: 288, h: 48 },
        glyph_scale: 5,
        noise_density: noise,
        seed,
    }
}

fn write_frames(dir: &Path, noise: f64, seed: u64) -> MatchScript {
    let script = demo_script(noise, seed);
    gen_match_sequence(&script, dir).unwrap();
    script
}

#[test]
fn usage_errors_exit_1() {
    let out = run(&["no-such-subcommand"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["segment", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_0() {
    for args in [&["--help"][..], &["--version"], &["segment", "--help"]] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn segment_writes_manifest_and_score_log() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    write_frames(&frames, 0.0, 5);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "segment",
        "--frames",
        frames.to_str().unwrap(),
        "--config",
        frames.join("config.json").to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = wicketlens::segmenter::read_clip_manifest(&out_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.len(), 2);
    assert_eq!(manifest[0].label, "wicket_0_1");
    assert_eq!(manifest[1].wicket_number, 2);
    assert!((manifest[0].start_s - 0.0).abs() < 1e-9); // pre-roll clamped
    assert!(out_dir.join("score_log.json").exists());
}

#[test]
fn segment_missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    write_frames(&frames, 0.0, 6);
    let out = run(&[
        "segment",
        "--frames",
        frames.to_str().unwrap(),
        "--config",
        dir.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn external_ocr_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    write_frames(&frames, 0.0, 7);
    let out = bin()
        .args([
            "segment",
            "--frames",
            frames.to_str().unwrap(),
            "--config",
            frames.join("config.json").to_str().unwrap(),
            "--out",
            dir.path().join("m.json").to_str().unwrap(),
        ])
        .env("WICKETLENS_OCR_CMD", "false")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn external_ocr_env_override_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    write_frames(&frames, 0.0, 8);
    let manifest = dir.path().join("m.json");
    // constant score from a stub engine: no wicket ever falls
    let out = bin()
        .args([
            "segment",
            "--frames",
            frames.to_str().unwrap(),
            "--config",
            frames.join("config.json").to_str().unwrap(),
            "--out",
            manifest.to_str().unwrap(),
        ])
        .env("WICKETLENS_OCR_CMD", "echo 45/2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&manifest).unwrap(), "[]\n");
}

#[test]
fn preprocess_stage_subset() {
    let dir = tempfile::tempdir().unwrap();
    let mut img = RasterImage::filled(8, 8, 3, 10).unwrap();
    img.set(3, 3, 0, 200);
    img.set(3, 3, 1, 200);
    img.set(3, 3, 2, 200);
    let input = dir.path().join("in.ppm");
    wicketlens::pnm::write_ppm(&img, &input).unwrap();
    let output = dir.path().join("out.pgm");
    let out = run(&[
        "preprocess",
        "--in",
        input.to_str().unwrap(),
        "--out",
        output.to_str().unwrap(),
        "--stages",
        "gray,invert",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let got = wicketlens::pnm::read_auto(&output).unwrap();
    assert_eq!(got.channels(), 1);
    assert_eq!(got.at(0, 0, 0), 255 - 10);
    assert_eq!(got.at(3, 3, 0), 255 - 200);

    // bad stage name is a validation error
    let out = run(&[
        "preprocess",
        "--in",
        input.to_str().unwrap(),
        "--out",
        output.to_str().unwrap(),
        "--stages",
        "blur",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_reports_perfect_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("preds");
    let gts = dir.path().join("gts");
    std::fs::create_dir_all(&preds).unwrap();
    std::fs::create_dir_all(&gts).unwrap();
    std::fs::write(preds.join("a.txt"), "0 0.5 0.5 0.2 0.2 0.9\n").unwrap();
    std::fs::write(gts.join("a.txt"), "0 0.5 0.5 0.2 0.2\n").unwrap();
    let report_path = dir.path().join("report.json");
    let out = run(&[
        "evaluate",
        "--preds",
        preds.to_str().unwrap(),
        "--gts",
        gts.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("mAP50"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["ap50"], 1.0);
    assert_eq!(report["fn"], 0);
    assert_eq!(report["tp"], 1);
}

#[test]
fn gen_fixture_and_analyze_match_chained_subcommands() {
    let dir = tempfile::tempdir().unwrap();

    // match fixture via the CLI
    let script_path = dir.path().join("script.json");
    let script_json = serde_json::to_string(&demo_script(0.01, 9)).unwrap();
    std::fs::write(&script_path, script_json).unwrap();
    let frames = dir.path().join("frames");
    let out = run(&[
        "gen-fixture",
        "--script",
        script_path.to_str().unwrap(),
        "--out-dir",
        frames.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(frames.join("frame_000000.ppm").exists());
    assert!(frames.join("ground_truth.json").exists());

    // detection fixture via the CLI
    let det_spec = dir.path().join("det.json");
    std::fs::write(
        &det_spec,
        r#"{"pitch": {"cx":0.5,"cy":0.55,"w":0.5,"h":0.6},
            "frame_start": 0, "frame_end": 59,
            "path": [[0.2,0.1],[0.8,0.9]]}"#,
    )
    .unwrap();
    let detections = dir.path().join("detections");
    let out = run(&[
        "gen-fixture",
        "--script",
        det_spec.to_str().unwrap(),
        "--out-dir",
        detections.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(detections.join("ball/frame_000030.txt").exists());

    // one-shot analyze
    let combined = dir.path().join("combined");
    let out = run(&[
        "analyze",
        "--frames",
        frames.to_str().unwrap(),
        "--config",
        frames.join("config.json").to_str().unwrap(),
        "--detections",
        detections.to_str().unwrap(),
        "--out-dir",
        combined.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // the same pipeline as chained subcommands
    let chained = dir.path().join("chained");
    std::fs::create_dir_all(&chained).unwrap();
    let out = run(&[
        "segment",
        "--frames",
        frames.to_str().unwrap(),
        "--config",
        frames.join("config.json").to_str().unwrap(),
        "--out-dir",
        chained.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "trajectory",
        "--detections",
        detections.to_str().unwrap(),
        "--manifest",
        chained.join("manifest.json").to_str().unwrap(),
        "--meta",
        frames.join("meta.json").to_str().unwrap(),
        "--out",
        chained.join("trajectories.csv").to_str().unwrap(),
        "--out-3d",
        chained.join("trajectories_3d.dat").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "heatmap",
        "--trajectories",
        chained.join("trajectories.csv").to_str().unwrap(),
        "--out",
        chained.join("heatmap.csv").to_str().unwrap(),
        "--out-zones",
        chained.join("weak_zones.json").to_str().unwrap(),
        "--top-k",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!String::from_utf8_lossy(&out.stdout).trim().is_empty());

    for name in [
        "manifest.json",
        "score_log.json",
        "trajectories.csv",
        "trajectories_3d.dat",
        "heatmap.csv",
        "weak_zones.json",
    ] {
        let a = std::fs::read(combined.join(name)).unwrap();
        let b = std::fs::read(chained.join(name)).unwrap();
        assert_eq!(a, b, "analyze and chained subcommands disagree on {name}");
        assert!(!a.is_empty(), "{name} is empty");
    }
}

#[test]
fn flag_overrides_beat_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    write_frames(&frames, 0.0, 10);
    let manifest: PathBuf = dir.path().join("m.json");
    // an absurd debounce window: no event can ever be confirmed
    let out = run(&[
        "segment",
        "--frames",
        frames.to_str().unwrap(),
        "--config",
        frames.join("config.json").to_str().unwrap(),
        "--out",
        manifest.to_str().unwrap(),
        "--debounce",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&manifest).unwrap(), "[]\n");
}

#[test]
fn trimmer_runs_per_clip() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    write_frames(&frames, 0.0, 11);
    let out_dir = dir.path().join("out");
    std::fs::create_dir_all(&out_dir).unwrap();
    let out = run(&[
        "segment",
        "--frames",
        frames.to_str().unwrap(),
        "--config",
        frames.join("config.json").to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--trimmer",
        "cp {input} {output}",
        "--video",
        frames.join("meta.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("wicket_0_1.mp4").exists());
    assert!(out_dir.join("wicket_0_2.mp4").exists());
}
