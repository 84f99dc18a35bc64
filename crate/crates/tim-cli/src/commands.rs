//! The five pipeline subcommands. All file outputs are byte-deterministic for
//! fixed inputs, config, and seeds, regardless of the worker count: workers
//! only transform; ordering, aggregation, and writing stay sequential.

use crate::summary::{summary_csv, summary_text, RunManifest, SummaryBuilder};
use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use tim_core::idm::{calibrate, evaluate_rmse, simulate_approach, CalibrationResult};
use tim_core::io::{
    load_params, read_segments, read_trajectory_csv, write_segments, write_trajectory_csv,
    ParamBundle, Strictness,
};
use tim_core::model::{InteractionCategory, Segment, TrajectoryRecord, DT};
use tim_core::organize::{classify_segment, organize_record};
use tim_core::quality::quality_report;
use tim_core::signal::{denoise_trajectory_independent_accel, denoise_trajectory_with, Denoiser};
use tim_core::synthgen::{generate, ScenarioSpec};

/// CLI failure with the exit code contract: 1 config, 2 I/O, 3 no usable data.
#[derive(Debug)]
pub struct CmdError {
    pub exit_code: i32,
    pub message: String,
}

impl CmdError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            exit_code: 1,
            message: message.into(),
        }
    }
    fn io(message: impl Into<String>) -> Self {
        Self {
            exit_code: 2,
            message: message.into(),
        }
    }
    fn no_data(message: impl Into<String>) -> Self {
        Self {
            exit_code: 3,
            message: message.into(),
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<ParamBundle, CmdError> {
    load_params(path).map_err(|e| CmdError::config(e.to_string()))
}

/// Installs a rayon pool of `jobs` workers (0 = all cores) around `f`.
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, CmdError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CmdError::io(format!("failed to build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Expands input paths: directories contribute their *.json files in sorted
/// order, plain files pass through.
fn gather_input_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CmdError> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| CmdError::io(format!("{}: {e}", input.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

/// Trajectory CSVs under `dir` (recursing into per-category subdirectories),
/// sorted for determinism. `enhanced` selects the `_enhanced` siblings
/// instead of the raw files.
fn gather_trajectory_files(dir: &Path, enhanced: bool) -> Result<Vec<PathBuf>, CmdError> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path.extension().is_some_and(|ext| ext == "csv") {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, &mut files).map_err(|e| CmdError::io(format!("{}: {e}", dir.display())))?;
    files.retain(|p| {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        stem != "summary" && stem.ends_with("_enhanced") == enhanced
    });
    files.sort();
    Ok(files)
}

fn write_summaries(
    out_dir: &Path,
    manifest: &RunManifest,
) -> Result<(), CmdError> {
    let to_io = |e: std::io::Error| CmdError::io(e.to_string());
    fs::create_dir_all(out_dir).map_err(to_io)?;
    let json = serde_json::to_string_pretty(manifest).expect("serializable");
    fs::write(out_dir.join("manifest.json"), json).map_err(to_io)?;
    fs::write(out_dir.join("summary.csv"), summary_csv(&manifest.per_category)).map_err(to_io)?;
    fs::write(out_dir.join("summary.txt"), summary_text(&manifest.per_category)).map_err(to_io)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

pub fn cmd_extract(
    inputs: &[PathBuf],
    config_path: Option<&Path>,
    out_dir: &Path,
    jobs: usize,
    strict: bool,
) -> Result<(), CmdError> {
    let started = Instant::now();
    let params = load_config(config_path)?;
    let strictness = if strict {
        Strictness::Strict
    } else {
        Strictness::SkipInvalid
    };

    let files = gather_input_files(inputs)?;
    let mut segments: Vec<Segment> = Vec::new();
    let mut skipped = 0usize;
    for file in &files {
        let report = read_segments(file, strictness).map_err(|e| match e {
            tim_core::io::IoModuleError::Io(e) => CmdError::io(format!("{}: {e}", file.display())),
            other => CmdError::io(other.to_string()),
        })?;
        for issue in &report.skipped {
            eprintln!("warning: {}: {} skipped: {}", file.display(), issue.context, issue.message);
        }
        skipped += report.skipped.len();
        segments.extend(report.segments);
    }
    if segments.is_empty() {
        return Err(CmdError::no_data("no valid segments in the inputs"));
    }

    let records: Vec<TrajectoryRecord> = with_pool(jobs, || {
        segments
            .par_iter()
            .map(|seg| {
                let classification = classify_segment(seg, &params.light, &params.sign);
                organize_record(seg, &classification)
            })
            .collect()
    })?;

    let to_io = |e: std::io::Error| CmdError::io(e.to_string());
    let mut builder = SummaryBuilder::new();
    for record in &records {
        let slot = builder.slot(record.category);
        slot.count += 1;
        slot.distance_m += record.path_length();
        if record.category != InteractionCategory::None {
            slot.before.push(quality_report(record, &params.quality));
            let dir = out_dir.join(record.category.as_str());
            fs::create_dir_all(&dir).map_err(to_io)?;
            write_trajectory_csv(record, &dir.join(format!("{}.csv", record.segment_id)))
                .map_err(|e| CmdError::io(e.to_string()))?;
        }
    }

    let manifest = RunManifest {
        command: "extract".into(),
        inputs: files.iter().map(|p| p.display().to_string()).collect(),
        config: config_path.map(|p| p.display().to_string()),
        output_dir: Some(out_dir.display().to_string()),
        segments_total: records.len(),
        skipped_invalid: skipped,
        per_category: builder.finish(),
    };
    write_summaries(out_dir, &manifest)?;
    print!("{}", summary_text(&manifest.per_category));
    println!(
        "extracted {} segments ({} skipped) in {:.2} s",
        manifest.segments_total,
        skipped,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// assess
// ---------------------------------------------------------------------------

pub fn cmd_assess(
    dir: &Path,
    config_path: Option<&Path>,
    jobs: usize,
    enhanced: bool,
) -> Result<(), CmdError> {
    let params = load_config(config_path)?;
    let files = gather_trajectory_files(dir, enhanced)?;
    if files.is_empty() {
        return Err(CmdError::io(format!(
            "no trajectory CSVs found under {}",
            dir.display()
        )));
    }
    let records = read_records(&files, jobs)?;
    let mut builder = SummaryBuilder::new();
    for record in &records {
        let slot = builder.slot(record.category);
        slot.count += 1;
        slot.distance_m += record.path_length();
        slot.before.push(quality_report(record, &params.quality));
    }
    let manifest = RunManifest {
        command: "assess".into(),
        inputs: vec![dir.display().to_string()],
        config: config_path.map(|p| p.display().to_string()),
        output_dir: None,
        segments_total: records.len(),
        skipped_invalid: 0,
        per_category: builder.finish(),
    };
    print!("{}", summary_text(&manifest.per_category));
    Ok(())
}

fn read_records(files: &[PathBuf], jobs: usize) -> Result<Vec<TrajectoryRecord>, CmdError> {
    let results: Vec<Result<TrajectoryRecord, String>> = with_pool(jobs, || {
        files
            .par_iter()
            .map(|f| read_trajectory_csv(f).map_err(|e| e.to_string()))
            .collect()
    })?;
    results
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(CmdError::io)
}

// ---------------------------------------------------------------------------
// enhance
// ---------------------------------------------------------------------------

pub fn cmd_enhance(
    dir: &Path,
    config_path: Option<&Path>,
    jobs: usize,
    independent_accel: bool,
) -> Result<(), CmdError> {
    let started = Instant::now();
    let params = load_config(config_path)?;
    let files = gather_trajectory_files(dir, false)?;
    if files.is_empty() {
        return Err(CmdError::io(format!(
            "no trajectory CSVs found under {}",
            dir.display()
        )));
    }
    let records = read_records(&files, jobs)?;
    let denoiser = Denoiser::new(tim_core::model::SEGMENT_LEN, &params.denoise)
        .map_err(|e| CmdError::config(e.to_string()))?;

    let enhanced: Vec<TrajectoryRecord> = with_pool(jobs, || {
        records
            .par_iter()
            .map(|r| {
                if independent_accel {
                    denoise_trajectory_independent_accel(r, &params.denoise)
                        .expect("records have full length")
                } else {
                    denoise_trajectory_with(r, &denoiser)
                }
            })
            .collect()
    })?;

    let mut builder = SummaryBuilder::new();
    for ((record, out), file) in records.iter().zip(&enhanced).zip(&files) {
        let slot = builder.slot(record.category);
        slot.count += 1;
        slot.distance_m += record.path_length();
        slot.before.push(quality_report(record, &params.quality));
        slot.after.push(quality_report(out, &params.quality));
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
        let sibling = file.with_file_name(format!("{stem}_enhanced.csv"));
        write_trajectory_csv(out, &sibling).map_err(|e| CmdError::io(e.to_string()))?;
    }

    let manifest = RunManifest {
        command: "enhance".into(),
        inputs: vec![dir.display().to_string()],
        config: config_path.map(|p| p.display().to_string()),
        output_dir: Some(dir.display().to_string()),
        segments_total: records.len(),
        skipped_invalid: 0,
        per_category: builder.finish(),
    };
    write_summaries(dir, &manifest)?;
    print!("{}", summary_text(&manifest.per_category));
    println!(
        "enhanced {} trajectories in {:.2} s",
        records.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct CalibrationReport {
    #[serde(flatten)]
    result: CalibrationResult,
    n_calibration: usize,
    n_validation: usize,
    calibration_ids: Vec<String>,
    validation_ids: Vec<String>,
}

pub fn cmd_calibrate(
    dir: &Path,
    config_path: Option<&Path>,
    out_dir: &Path,
    seed: Option<u64>,
    enhanced: bool,
    jobs: usize,
) -> Result<(), CmdError> {
    let started = Instant::now();
    let mut params = load_config(config_path)?;
    if let Some(seed) = seed {
        params.calibration.seed = seed;
    }
    let files = gather_trajectory_files(dir, enhanced)?;
    let records = read_records(&files, jobs)?;
    let stops: Vec<TrajectoryRecord> = records
        .into_iter()
        .filter(|r| r.category == InteractionCategory::LightStop)
        .collect();
    if stops.len() < 2 {
        return Err(CmdError::no_data(format!(
            "need at least 2 stop-at-light trajectories, found {}",
            stops.len()
        )));
    }

    // seeded split at the published 15:4 ratio
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut order: Vec<usize> = (0..stops.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.calibration.seed);
    order.shuffle(&mut rng);
    let n_cal = ((stops.len() as f64 * 15.0 / 19.0).round() as usize).clamp(1, stops.len() - 1);
    let cal: Vec<TrajectoryRecord> = order[..n_cal].iter().map(|&i| stops[i].clone()).collect();
    let val: Vec<TrajectoryRecord> = order[n_cal..].iter().map(|&i| stops[i].clone()).collect();

    let mut result = calibrate(&cal, &params.calibration).map_err(|e| CmdError::no_data(e.to_string()))?;
    result.rmse_validation = Some(
        evaluate_rmse(&val, &result.best, &params.calibration)
            .map_err(|e| CmdError::no_data(e.to_string()))?,
    );

    let to_io = |e: std::io::Error| CmdError::io(e.to_string());
    fs::create_dir_all(out_dir).map_err(to_io)?;
    let report = CalibrationReport {
        n_calibration: cal.len(),
        n_validation: val.len(),
        calibration_ids: cal.iter().map(|r| r.segment_id.clone()).collect(),
        validation_ids: val.iter().map(|r| r.segment_id.clone()).collect(),
        result,
    };
    fs::write(
        out_dir.join("calibration.json"),
        serde_json::to_string_pretty(&report).expect("serializable"),
    )
    .map_err(to_io)?;

    // per-trajectory speed comparison: observed vs model simulation from the
    // same initial state
    for (set, records) in [("calibration", &cal), ("validation", &val)] {
        for record in records.iter() {
            let Some(s0) = record.rows[0].dist_to_stop_line else {
                continue;
            };
            let v0 = record.rows[0].speed;
            let (speeds, _) = simulate_approach((v0, s0), &report.result.best, DT, record.rows.len())
                .map_err(|e| CmdError::no_data(e.to_string()))?;
            let mut csv = String::from("t,v_observed,v_model\n");
            for (i, row) in record.rows.iter().enumerate() {
                let model = speeds
                    .values
                    .get(i)
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_default();
                csv.push_str(&format!("{:.1},{:.6},{}\n", i as f64 * DT, row.speed, model));
            }
            fs::write(
                out_dir.join(format!("{}_{}_speed.csv", set, record.segment_id)),
                csv,
            )
            .map_err(to_io)?;
        }
    }

    println!(
        "calibrated on {} trajectories, validated on {}: rmse {:.4} / {:.4} ({:.2} s)",
        report.n_calibration,
        report.n_validation,
        report.result.rmse_calibration,
        report.result.rmse_validation.unwrap_or(f64::NAN),
        started.elapsed().as_secs_f64()
    );
    println!(
        "best params: v0={:.2} T={:.2} a_max={:.2} b={:.2} s0={:.2} delta={:.2}",
        report.result.best.v0,
        report.result.best.t_headway,
        report.result.best.a_max,
        report.result.best.b,
        report.result.best.s0,
        report.result.best.delta
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub fn cmd_synth(spec_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<usize, CmdError> {
    let text = fs::read_to_string(spec_path)
        .map_err(|e| CmdError::io(format!("{}: {e}", spec_path.display())))?;
    let mut specs: Vec<ScenarioSpec> = serde_json::from_str(&text)
        .map_err(|e| CmdError::config(format!("{}: {e}", spec_path.display())))?;
    if let Some(base) = seed {
        for (i, spec) in specs.iter_mut().enumerate() {
            spec.seed = base + i as u64;
        }
    }
    let to_io = |e: std::io::Error| CmdError::io(e.to_string());
    fs::create_dir_all(out_dir).map_err(to_io)?;
    let mut count = 0usize;
    for spec in &specs {
        let (segment, _) = generate(spec).map_err(|e| CmdError::config(e.to_string()))?;
        write_segments(&out_dir.join(format!("{}.json", segment.id)), &[segment])
            .map_err(|e| CmdError::io(e.to_string()))?;
        count += 1;
    }
    println!("wrote {count} segment files to {}", out_dir.display());
    Ok(count)
}
