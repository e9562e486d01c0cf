use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use glyphforge::raster::io::{save_mask, save_rgb};
use glyphforge::raster::{BinaryMask, ColorSpace, RasterImage};
use sha2::{Digest, Sha256};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_glyphforge"));
    c.env_remove("GLYPHFORGE_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn digest(path: &Path) -> String {
    format!("{:x}", Sha256::digest(fs::read(path).unwrap()))
}

fn fixtures(dir: &Path) -> PathBuf {
    let fx = dir.join("fx");
    let o = run(&["fixtures", "--out", fx.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    fx
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FAST: [&str; 4] = ["--set", "texture.em_iters=2", "--set", "texture.pm_iters=2"];

#[test]
fn guidance_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures(dir.path());
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    for out in [&a, &b] {
        let o = run(&["guidance", "--style", s(&fx.join("blobs.png")), "--out", s(out), "--seed", "3"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(digest(&a), digest(&b));
}

#[test]
fn missing_input_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.png");
    let o = run(&["guidance", "--style", s(&missing), "--out", s(&dir.path().join("g.png"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains(s(&missing)), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["guidance"])), 2);
}

#[test]
fn config_precedence_flags_over_file_over_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures(dir.path());
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# comment\ntexture.patch = 4\n\nseed=5\n").unwrap();
    let out = dir.path().join("g.png");
    let blobs = fx.join("blobs.png");
    let base = ["guidance", "--style", s(&blobs), "--out", s(&out)];

    let o = bin().args(base).args(["--config", s(&cfg)]).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("patch"), "{}", stderr(&o));

    let o = bin().args(base).args(["--config", s(&cfg), "--set", "texture.patch=7"]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    fs::write(&cfg, "texture.patch=seven\n").unwrap();
    let o = bin().args(base).args(["--config", s(&cfg)]).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("run.cfg:1"), "{}", stderr(&o));

    let o = bin().args(base).args(["--set", "no.such.key=1"]).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn threads_env_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures(dir.path());
    let (blobs, g) = (fx.join("blobs.png"), dir.path().join("g.png"));
    let args = ["guidance", "--style", s(&blobs), "--out", s(&g)];
    let o = bin().env("GLYPHFORGE_THREADS", "0").args(args).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("GLYPHFORGE_THREADS"));
    let o = bin().env("GLYPHFORGE_THREADS", "2").args(args).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn compose_timings_list_the_five_stages() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures(dir.path());
    let timings = dir.path().join("t.json");
    let dbg = dir.path().join("dbg");
    let o = bin()
        .args(FAST)
        .args([
            "compose",
            "--text",
            s(&fx.join("tee.png")),
            "--style",
            s(&fx.join("blobs.png")),
            "--background",
            s(&fx.join("background.png")),
            "--out",
            s(&dir.path().join("poster.png")),
            "--timings",
            s(&timings),
            "--debug-dir",
            s(&dbg),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(&timings).unwrap()).unwrap();
    let mut sum = 0.0;
    for stage in ["guidance", "position", "color", "structure", "texture"] {
        let v = t[stage].as_f64().unwrap_or_else(|| panic!("missing {stage}"));
        assert!(v >= 0.0);
        sum += v;
    }
    assert!(t["total"].as_f64().unwrap() >= sum);
    assert!(t["megapixels"]["background"].as_f64().unwrap() > 0.0);
    for f in ["layout.json", "text_hat.png", "guide_hat.png", "canvas.png", "style_recolored.png"] {
        assert!(dbg.join(f).is_file(), "{f}");
    }
}

#[test]
fn layout_json_round_trips_into_compose() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures(dir.path());
    let layout = dir.path().join("layout.json");
    let (tee, blobs, bg) = (fx.join("tee.png"), fx.join("blobs.png"), fx.join("background.png"));
    let common = ["--text", s(&tee), "--style", s(&blobs), "--background", s(&bg)];
    let o = bin().arg("layout").args(common).args(["--out", s(&layout)]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let placed: serde_json::Value = serde_json::from_str(&fs::read_to_string(&layout).unwrap()).unwrap();
    assert_eq!(placed["w"], 48);

    let mut moved = placed.clone();
    moved["x"] = serde_json::json!(0.0);
    moved["y"] = serde_json::json!(0.0);
    fs::write(&layout, moved.to_string()).unwrap();
    let dbg = dir.path().join("dbg");
    let o = bin()
        .args(FAST)
        .arg("compose")
        .args(common)
        .args(["--out", s(&dir.path().join("p.png")), "--layout", s(&layout), "--debug-dir", s(&dbg)])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let used: serde_json::Value = serde_json::from_str(&fs::read_to_string(dbg.join("layout.json")).unwrap()).unwrap();
    assert_eq!(used, moved);
}

#[test]
fn compose_output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures(dir.path());
    let mut digests = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("p{threads}.png"));
        let o = bin()
            .args(FAST)
            .args([
                "compose",
                "--text",
                s(&fx.join("tee.png")),
                "--style",
                s(&fx.join("blobs.png")),
                "--background",
                s(&fx.join("background.png")),
                "--out",
                s(&out),
                "--threads",
                threads,
            ])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        digests.push(digest(&out));
    }
    assert_eq!(digests[0], digests[1]);
}

#[test]
fn stylize_dumps_energy_csv() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures(dir.path());
    let csv = dir.path().join("e.csv");
    let out = dir.path().join("st.png");
    let o = bin()
        .args(FAST)
        .args([
            "stylize",
            "--text",
            s(&fx.join("tee.png")),
            "--style",
            s(&fx.join("two_tone_00.png")),
            "--out",
            s(&out),
            "--dump-energy",
            s(&csv),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "level,iteration,stage,appearance,distribution,repetition,saliency,total"
    );
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 5);
    assert!(rows[0].contains(",init,"));
    assert!(out.is_file());
}

#[test]
fn structure_both_requires_second_output() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures(dir.path());
    let (bar, truth, t_out) = (fx.join("bar.png"), fx.join("two_tone_00_truth.png"), dir.path().join("t.png"));
    let args = ["structure", "--text", s(&bar), "--guidance", s(&truth), "--out", s(&t_out), "--direction", "both"];
    assert_eq!(code(&run(&args)), 2);
    let o = bin().args(args).args(["--out-guidance", s(&dir.path().join("g.png"))]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("g.png").is_file());
}

#[test]
fn recolor_both_directions() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures(dir.path());
    for d in ["style-to-background", "background-to-style"] {
        let out = dir.path().join(format!("{d}.png"));
        let o = run(&[
            "recolor",
            "--style",
            s(&fx.join("blobs.png")),
            "--background",
            s(&fx.join("background.png")),
            "--out",
            s(&out),
            "--direction",
            d,
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = image_dims(&dir.path().join("style-to-background.png"));
    let b = image_dims(&dir.path().join("background-to-style.png"));
    assert_eq!(a, (96, 96));
    assert_eq!(b, (160, 128));
}

fn image_dims(p: &Path) -> (usize, usize) {
    glyphforge::raster::io::load_rgb(p).unwrap().dims()
}

#[test]
fn degenerate_style_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.png");
    save_rgb(&RasterImage::filled(40, 40, [0.5, 0.5, 0.5], ColorSpace::Srgb), &flat).unwrap();
    let o = run(&["guidance", "--style", s(&flat), "--out", s(&dir.path().join("g.png"))]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn inpaint_region_limits() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures(dir.path());
    let big = dir.path().join("big.png");
    save_mask(&BinaryMask::from_fn(96, 96, |_, y| y < 60), &big).unwrap();
    let args = |mask: &Path, out: &Path| {
        vec![
            "inpaint".to_string(),
            "--image".into(),
            s(&fx.join("stripes.png")).into(),
            "--mask".into(),
            s(mask).into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let o = bin().args(args(&big, &dir.path().join("x.png"))).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("0.625"), "{}", stderr(&o));

    let small = dir.path().join("small.png");
    save_mask(&BinaryMask::from_fn(96, 96, |x, y| (40..52).contains(&x) && (40..52).contains(&y)), &small).unwrap();
    let out = dir.path().join("filled.png");
    let o = bin().args(FAST).args(args(&small, &out)).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(image_dims(&out), (96, 96));
}

#[test]
fn fixtures_are_reproducible_through_the_cli() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = fixtures(a.path());
    let fb = fixtures(b.path());
    assert_eq!(digest(&fa.join("manifest.json")), digest(&fb.join("manifest.json")));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(fa.join("manifest.json")).unwrap()).unwrap();
    let entries = manifest["entries"].as_array().unwrap();
    let pngs = fs::read_dir(&fa).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png")).count();
    assert_eq!(entries.len(), pngs);
    for e in entries {
        assert_eq!(e["sha256"].as_str().unwrap(), digest(&fa.join(e["file"].as_str().unwrap())));
    }
}
