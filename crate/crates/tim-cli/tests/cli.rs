//! Exit-code and behavior tests for the `tim` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tim(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tim"))
        .args(args)
        .current_dir(cwd)
        .env_remove("TIM_CONFIG")
        .output()
        .expect("binary runs")
}

fn spec_json(category: &str, seed: u64) -> serde_json::Value {
    serde_json::json!({
        "category": category,
        "approach_speed": 8.0,
        "intersection_scale": 25.0,
        "noise_sigma_speed": 0.0,
        "noise_sigma_pos": 0.0,
        "seed": seed,
    })
}

#[test]
fn extract_on_empty_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = tim(dir.path(), &["extract", "--input", "empty", "--out", "organized"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_config_ordering_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "[light]\neta_left = 0.1\neta_through_1 = 0.3\n",
    )
    .unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = tim(
        dir.path(),
        &["--config", "bad.toml", "extract", "--input", "empty", "--out", "organized"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eta"));
}

#[test]
fn tim_config_env_var_supplies_the_path() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "[light]\neta_left = 0.1\neta_through_1 = 0.3\n",
    )
    .unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tim"))
        .args(["extract", "--input", "empty", "--out", "organized"])
        .current_dir(dir.path())
        .env("TIM_CONFIG", "bad.toml")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn enhance_on_missing_dir_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = tim(dir.path(), &["enhance", "--dir", "nonexistent"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_with_infeasible_spec_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let specs = serde_json::json!([{
        "category": "light_stop",
        "approach_speed": 0.5,
        "intersection_scale": 25.0,
        "noise_sigma_speed": 0.0,
        "noise_sigma_pos": 0.0,
        "seed": 0,
    }]);
    fs::write(dir.path().join("specs.json"), specs.to_string()).unwrap();
    let out = tim(dir.path(), &["synth", "--spec", "specs.json", "--out", "segments"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("approach_speed"));
}

#[test]
fn seeded_synth_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let specs = serde_json::json!([
        spec_json("light_stop", 3),
        spec_json("sign_four_way", 4),
    ]);
    fs::write(dir.path().join("specs.json"), specs.to_string()).unwrap();
    for out_dir in ["a", "b"] {
        let out = tim(
            dir.path(),
            &["synth", "--spec", "specs.json", "--out", out_dir, "--seed", "100"],
        );
        assert!(out.status.success());
    }
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2);
    for name in names {
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs between reruns");
    }
}

#[test]
fn calibrate_with_one_trajectory_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let specs = serde_json::json!([spec_json("light_stop", 1)]);
    fs::write(dir.path().join("specs.json"), specs.to_string()).unwrap();
    assert!(tim(dir.path(), &["synth", "--spec", "specs.json", "--out", "segments"])
        .status
        .success());
    assert!(tim(
        dir.path(),
        &["extract", "--input", "segments", "--out", "organized"]
    )
    .status
    .success());
    let out = tim(
        dir.path(),
        &["calibrate", "--dir", "organized/light_stop", "--out", "calib"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn manifest_counts_sum_to_the_segment_total() {
    let dir = tempfile::tempdir().unwrap();
    let specs = serde_json::json!([
        spec_json("light_stop", 1),
        spec_json("light_straight", 2),
        spec_json("sign_four_way", 3),
        spec_json("none", 4),
        spec_json("none", 5),
    ]);
    fs::write(dir.path().join("specs.json"), specs.to_string()).unwrap();
    assert!(tim(dir.path(), &["synth", "--spec", "specs.json", "--out", "segments"])
        .status
        .success());
    assert!(tim(
        dir.path(),
        &["extract", "--input", "segments", "--out", "organized"]
    )
    .status
    .success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("organized/manifest.json")).unwrap())
            .unwrap();
    let total = manifest["segments_total"].as_u64().unwrap();
    assert_eq!(total, 5);
    let sum: u64 = manifest["per_category"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| row["count"].as_u64().unwrap())
        .sum();
    assert_eq!(sum, total, "category counts must sum to the processed total");
    let none_count = manifest["per_category"]
        .as_array()
        .unwrap()
        .iter()
        .find(|row| row["category"] == "none")
        .unwrap()["count"]
        .as_u64()
        .unwrap();
    assert_eq!(none_count, 2);
}

#[test]
fn manifest_counts_match_generator_labels_on_a_200_scene_batch() {
    let dir = tempfile::tempdir().unwrap();
    let mut specs = Vec::new();
    for category in [
        "light_stop",
        "light_left_turn",
        "light_right_turn",
        "light_straight",
        "sign_four_way",
        "sign_right_turn",
        "sign_left_one_step",
        "sign_left_two_step",
    ] {
        for k in 0..25u64 {
            specs.push(serde_json::json!({
                "category": category,
                "approach_speed": 5.0 + (k % 5) as f64 * 1.5,
                "intersection_scale": 20.0 + (k / 5) as f64 * 4.0,
                "noise_sigma_speed": 0.0,
                "noise_sigma_pos": 0.0,
                "seed": k,
            }));
        }
    }
    fs::write(
        dir.path().join("specs.json"),
        serde_json::Value::Array(specs).to_string(),
    )
    .unwrap();
    assert!(tim(dir.path(), &["synth", "--spec", "specs.json", "--out", "segments"])
        .status
        .success());
    assert!(tim(
        dir.path(),
        &["extract", "--input", "segments", "--out", "organized"]
    )
    .status
    .success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("organized/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["segments_total"], 200);
    for row in manifest["per_category"].as_array().unwrap() {
        let expected = if row["category"] == "none" { 0 } else { 25 };
        assert_eq!(
            row["count"], expected,
            "category {} count mismatch",
            row["category"]
        );
    }
}

#[test]
fn strict_mode_fails_on_an_invalid_segment() {
    let dir = tempfile::tempdir().unwrap();
    // one valid segment plus one with 90 steps
    let specs = serde_json::json!([spec_json("light_straight", 7)]);
    fs::write(dir.path().join("specs.json"), specs.to_string()).unwrap();
    assert!(tim(dir.path(), &["synth", "--spec", "specs.json", "--out", "segments"])
        .status
        .success());
    let file = fs::read_dir(dir.path().join("segments"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let mut docs: serde_json::Value = serde_json::from_str(&fs::read_to_string(&file).unwrap()).unwrap();
    let mut broken = docs[0].clone();
    broken["id"] = serde_json::json!("broken");
    broken["steps"].as_array_mut().unwrap().pop();
    docs.as_array_mut().unwrap().push(broken);
    fs::write(&file, docs.to_string()).unwrap();

    // default: skip and report, one segment survives
    let out = tim(dir.path(), &["extract", "--input", "segments", "--out", "lenient"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken"));

    // strict: fatal I/O-level failure
    let out = tim(
        dir.path(),
        &["extract", "--input", "segments", "--out", "strict", "--strict"],
    );
    assert_eq!(out.status.code(), Some(2));
}
