//! End-to-end tests of the binary: every stage of the pipeline through the
//! command line, exit-code discipline, and output determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stegophylo::imaging::{load_image, save_image, SaveFormat};
use stegophylo::synthetic;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stegophylo"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup_pool(dir: &Path) {
    for i in 0..3u64 {
        let img = synthetic::generate(7100 + i, 128, 128);
        save_image(&img, &dir.join(format!("root_{i}.png")), SaveFormat::Png).unwrap();
    }
}

#[test]
fn project_outputs_hex_trait() {
    let tmp = tempfile::tempdir().unwrap();
    setup_pool(tmp.path());
    let hex = ok(
        &["project", "--projector", "phash", "root_0.png"],
        tmp.path(),
    );
    assert_eq!(hex.trim().len(), 16, "64 bits = 16 hex chars");
    assert!(hex.trim().chars().all(|c| c.is_ascii_hexdigit()));

    // sha256 at 128 bits.
    let hex = ok(
        &[
            "project",
            "--projector",
            "sha256",
            "--bits",
            "128",
            "root_0.png",
        ],
        tmp.path(),
    );
    assert_eq!(hex.trim().len(), 32);
}

#[test]
fn embed_extract_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    setup_pool(tmp.path());
    let trait_hex = "0123456789abcdef";
    ok(
        &[
            "embed",
            "--trait",
            trait_hex,
            "--stego",
            "qim",
            "--seed",
            "55",
            "root_0.png",
            "marked.png",
        ],
        tmp.path(),
    );
    let read = ok(
        &["extract", "--stego", "qim", "--seed", "55", "marked.png"],
        tmp.path(),
    );
    assert_eq!(read.trim(), trait_hex);
}

#[test]
fn inherit_then_match_names_the_parent() {
    let tmp = tempfile::tempdir().unwrap();
    setup_pool(tmp.path());
    ok(
        &[
            "tree",
            "build",
            "--roots",
            ".",
            "--branching",
            "2,1",
            "--projector",
            "phash",
            "--stego",
            "iss",
            "--seed",
            "99",
            "--out-dir",
            "pool",
        ],
        tmp.path(),
    );
    let manifest = tmp.path().join("pool/manifest.json");
    assert!(manifest.exists());

    // n0003 is the first child of root n0000's sibling set; match it back.
    let json = ok(
        &[
            "match",
            "--query",
            "pool/n0003.png",
            "--pool",
            "pool/manifest.json",
        ],
        tmp.path(),
    );
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    let manifest_json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    let expected_parent = manifest_json["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|n| n["id"] == "n0003")
        .unwrap()["parent_id"]
        .clone();
    assert_eq!(parsed["nominated"], expected_parent);
    assert_eq!(parsed["similarity"], 1.0);
}

#[test]
fn inherit_writes_record() {
    let tmp = tempfile::tempdir().unwrap();
    setup_pool(tmp.path());
    let json = ok(
        &[
            "inherit",
            "--parent",
            "root_0.png",
            "--cover",
            "root_1.png",
            "--projector",
            "sha256",
            "--stego",
            "qim",
            "--seed",
            "7",
            "offspring.png",
        ],
        tmp.path(),
    );
    let record: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(record["key_seed"], "0000000000000007");
    let embedded = record["trait"].as_str().unwrap().to_string();

    let read = ok(
        &["extract", "--stego", "qim", "--seed", "7", "offspring.png"],
        tmp.path(),
    );
    assert_eq!(read.trim(), embedded);
}

#[test]
fn channel_apply_and_quality() {
    let tmp = tempfile::tempdir().unwrap();
    setup_pool(tmp.path());
    ok(
        &[
            "channel",
            "apply",
            "--op",
            "brightness",
            "--severity",
            "0.5",
            "root_0.png",
            "bright.png",
        ],
        tmp.path(),
    );
    let json = ok(&["quality", "root_0.png", "bright.png"], tmp.path());
    let q: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(q["psnr"].as_f64().unwrap() > 5.0);
    assert!(q["ssim"].as_f64().unwrap() > 0.0);

    let json = ok(&["quality", "root_0.png", "root_0.png"], tmp.path());
    let q: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(q["psnr"].is_null());
    assert_eq!(q["identical"], true);

    // Unknown op is an operational error.
    let out = run(
        &[
            "channel",
            "apply",
            "--op",
            "posterize",
            "--severity",
            "0.5",
            "root_0.png",
            "x.png",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn theory_curve_and_check() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = ok(
        &[
            "theory", "curve", "--n", "16", "--p", "0.5", "--q", "0.5,0.9", "--N", "2,10",
        ],
        tmp.path(),
    );
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "p,q,N,accuracy");
    assert_eq!(lines.len(), 5);

    let json = ok(
        &[
            "theory", "check", "--n", "2", "--p", "0.5", "--q", "0.5", "--N", "2", "--trials",
            "100000",
        ],
        tmp.path(),
    );
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed["closed_form"], 0.3125);
    assert_eq!(parsed["within_4_se"], true);
}

#[test]
fn randproj_feature_file_path() {
    let tmp = tempfile::tempdir().unwrap();
    setup_pool(tmp.path());
    stegophylo::projector::write_features(
        &tmp.path().join("v.fvec"),
        &[1.5, -2.0, 0.25, 3.0, -1.0],
    )
    .unwrap();
    let hex = ok(
        &[
            "project",
            "--projector",
            "randproj",
            "--proj-seed",
            "5",
            "--features",
            "v.fvec",
            "root_0.png",
        ],
        tmp.path(),
    );
    assert_eq!(hex.trim().len(), 16);
    // Same features, same seed: identical trait on a different image.
    let hex2 = ok(
        &[
            "project",
            "--projector",
            "randproj",
            "--proj-seed",
            "5",
            "--features",
            "v.fvec",
            "root_1.png",
        ],
        tmp.path(),
    );
    assert_eq!(hex, hex2);
}

#[test]
fn bench_commands_emit_csv() {
    let tmp = tempfile::tempdir().unwrap();
    setup_pool(tmp.path());
    ok(
        &[
            "tree",
            "build",
            "--roots",
            ".",
            "--branching",
            "2",
            "--projector",
            "sha256",
            "--stego",
            "qim",
            "--seed",
            "3",
            "--out-dir",
            "pool",
        ],
        tmp.path(),
    );
    let csv = ok(
        &[
            "bench",
            "distortion",
            "--pool",
            "pool/manifest.json",
            "--op",
            "jpeg",
            "--severities",
            "0,1",
        ],
        tmp.path(),
    );
    assert!(csv.starts_with("experiment,op,severity,projector,stego,metric,value,samples\n"));
    assert!(csv.contains("stego_agreement,jpeg,0,"));

    fs::create_dir_all(tmp.path().join("extra")).unwrap();
    for i in 0..20u64 {
        let img = synthetic::generate(8200 + i, 64, 64);
        save_image(
            &img,
            &tmp.path().join(format!("extra/x{i:02}.png")),
            SaveFormat::Png,
        )
        .unwrap();
    }
    let csv = ok(
        &[
            "bench",
            "inclusion",
            "--pool",
            "pool/manifest.json",
            "--extraneous",
            "extra",
            "--ratios",
            "1,0.5",
            "--summary",
            "summary.json",
        ],
        tmp.path(),
    );
    assert!(csv.starts_with("experiment,ratio,threshold,"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap())
            .unwrap();
    assert!(summary["manifest_sha256"].as_str().unwrap().len() == 64);

    let retrieval = ok(
        &[
            "bench",
            "retrieval",
            "--pool",
            "pool/manifest.json",
            "--op",
            "brightness",
            "--severities",
            "0",
        ],
        tmp.path(),
    );
    assert!(retrieval.contains("retrieval,brightness,0,sha256,qim,top1_accuracy,1.00000e0,6"));

    let deletion = ok(
        &[
            "bench",
            "deletion",
            "--pool",
            "pool/manifest.json",
            "--ratios",
            "1,0.5",
        ],
        tmp.path(),
    );
    assert!(deletion.lines().count() == 3);
}

#[test]
fn outputs_are_deterministic_across_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    setup_pool(tmp.path());
    let build = |out: &str, jobs: &str| {
        ok(
            &[
                "tree",
                "build",
                "--roots",
                ".",
                "--branching",
                "2,1",
                "--projector",
                "sha256",
                "--stego",
                "qim",
                "--seed",
                "12",
                "--out-dir",
                out,
                "--jobs",
                jobs,
            ],
            tmp.path(),
        );
        fs::read(tmp.path().join(out).join("manifest.json")).unwrap()
    };
    assert_eq!(build("pa", "1"), build("pb", "8"));
    // Image bytes too.
    for entry in fs::read_dir(tmp.path().join("pa")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(tmp.path().join("pa").join(&name)).unwrap(),
            fs::read(tmp.path().join("pb").join(&name)).unwrap(),
            "{name:?} differs across job counts"
        );
    }

    let curve = |jobs: &str| {
        ok(
            &[
                "theory",
                "curve",
                "--n",
                "64",
                "--p",
                "0.5,0.55",
                "--q",
                "0.6,0.8,1.0",
                "--pool",
                "10,100",
                "--jobs",
                jobs,
            ],
            tmp.path(),
        )
    };
    assert_eq!(curve("1"), curve("8"));
}

#[test]
fn match_with_empty_or_missing_pool_is_operational_error() {
    let tmp = tempfile::tempdir().unwrap();
    setup_pool(tmp.path());
    let out = run(
        &["match", "--query", "root_0.png", "--pool", "absent.json"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    fs::write(
        tmp.path().join("empty.json"),
        r#"{"nodes": [], "branching": [], "stego": {"method":"qim","delta":6.0,"midband":{"lo":6,"hi":20}}, "created": "1970-01-01T00:00:00Z"}"#,
    )
    .unwrap();
    let out = run(
        &["match", "--query", "root_0.png", "--pool", "empty.json"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_2_and_help_works() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["project", "--bogus"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    for sub in [
        "project", "embed", "extract", "inherit", "tree", "match", "channel", "theory", "bench",
        "quality", "synth",
    ] {
        let out = run(&[sub, "--help"], tmp.path());
        assert!(out.status.success(), "--help failed for {sub}");
    }
}

#[test]
fn pad_resizes_offgrid_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    // A 100x100 PNG: rejected strictly, accepted with --pad.
    let img = synthetic::generate(1, 128, 128);
    save_image(&img, &tmp.path().join("big.png"), SaveFormat::Png).unwrap();
    let small = {
        // Write an off-grid image through the image crate directly.
        let rgb = image::RgbImage::from_fn(100, 100, |x, y| {
            image::Rgb([(x % 251) as u8, (y % 241) as u8, ((x + y) % 253) as u8])
        });
        let path = tmp.path().join("odd.png");
        rgb.save(&path).unwrap();
        path
    };
    let out = run(
        &["project", "--projector", "phash", small.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("width"),
        "must name the offending axis: {stderr}"
    );

    let hex = ok(
        &[
            "project",
            "--projector",
            "phash",
            "--pad",
            small.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(hex.trim().len(), 16);

    let _ = load_image(&tmp.path().join("big.png")).unwrap();
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        &[
            "synth",
            "--out-dir",
            "a",
            "--count",
            "2",
            "--width",
            "64",
            "--height",
            "64",
            "--seed",
            "5",
        ],
        tmp.path(),
    );
    ok(
        &[
            "synth",
            "--out-dir",
            "b",
            "--count",
            "2",
            "--width",
            "64",
            "--height",
            "64",
            "--seed",
            "5",
        ],
        tmp.path(),
    );
    assert_eq!(
        fs::read(tmp.path().join("a/synth_0000.png")).unwrap(),
        fs::read(tmp.path().join("b/synth_0000.png")).unwrap()
    );
}
