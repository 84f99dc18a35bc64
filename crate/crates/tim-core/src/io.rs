//! Segment ingestion (JSON interchange), Table-style trajectory CSV emission
//! and read-back, and TOML configuration loading.
//!
//! Interchange files hold one segment object or an array of them. Trajectory
//! CSVs carry a leading `#` metadata record, a header row, and 91 data rows;
//! floats are emitted at 6 decimal places so identical inputs produce
//! identical bytes. Missing context is an empty field, never a zero.

use crate::idm::{CalibrationRanges, CalibrationSpec, Objective, ParamRange};
use crate::model::{
    validate_segment, InteractionCategory, LightRuleParams, Point, Segment, SignRuleParams,
    StopAreaMode, StopSign, TimeStep, TrafficLightTrack, TrajectoryRecord, TrajectoryRow,
};
use crate::quality::QualityThresholds;
use crate::signal::{BoundaryMode, DenoiseConfig};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable that supplies the config path when no explicit path
/// is given.
pub const CONFIG_ENV_VAR: &str = "TIM_CONFIG";

#[derive(Debug, Error)]
pub enum IoModuleError {
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("schema error in {path} ({context}): {message}")]
    Schema {
        path: String,
        context: String,
        message: String,
    },
    #[error("config error in {path}: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How to handle invalid entries in a batch file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Skip invalid entries and report them (batch robustness).
    #[default]
    SkipInvalid,
    /// Any schema violation is fatal.
    Strict,
}

// ---------------------------------------------------------------------------
// interchange format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    t_index: u32,
    x: f64,
    y: f64,
    v: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightDoc {
    stop_line: [f64; 2],
    states: Vec<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentDoc {
    id: String,
    steps: Vec<StepDoc>,
    #[serde(default)]
    lights: Vec<LightDoc>,
    #[serde(default)]
    signs: Vec<[f64; 2]>,
}

impl From<&Segment> for SegmentDoc {
    fn from(seg: &Segment) -> Self {
        SegmentDoc {
            id: seg.id.clone(),
            steps: seg
                .steps
                .iter()
                .map(|s| StepDoc {
                    t_index: s.index,
                    x: s.position.x,
                    y: s.position.y,
                    v: s.speed,
                })
                .collect(),
            lights: seg
                .lights
                .iter()
                .map(|l| LightDoc {
                    stop_line: [l.stop_line.x, l.stop_line.y],
                    states: l.states.clone(),
                })
                .collect(),
            signs: seg.signs.iter().map(|s| [s.position.x, s.position.y]).collect(),
        }
    }
}

impl From<SegmentDoc> for Segment {
    fn from(doc: SegmentDoc) -> Self {
        Segment {
            id: doc.id,
            steps: doc
                .steps
                .into_iter()
                .map(|s| TimeStep {
                    index: s.t_index,
                    position: Point::new(s.x, s.y),
                    speed: s.v,
                })
                .collect(),
            lights: doc
                .lights
                .into_iter()
                .map(|l| TrafficLightTrack {
                    stop_line: Point::new(l.stop_line[0], l.stop_line[1]),
                    states: l.states,
                })
                .collect(),
            signs: doc
                .signs
                .into_iter()
                .map(|p| StopSign {
                    position: Point::new(p[0], p[1]),
                })
                .collect(),
        }
    }
}

/// Issues encountered while reading a batch under [`Strictness::SkipInvalid`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadIssue {
    pub context: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ReadReport {
    pub segments: Vec<Segment>,
    pub skipped: Vec<ReadIssue>,
}

/// Reads one interchange file (single segment object or array of them),
/// validating every segment invariant.
pub fn read_segments(path: &Path, strictness: Strictness) -> Result<ReadReport, IoModuleError> {
    let text = fs::read_to_string(path)?;
    read_segments_str(&text, &path.display().to_string(), strictness)
}

/// As [`read_segments`] but from an in-memory document.
pub fn read_segments_str(
    text: &str,
    path_label: &str,
    strictness: Strictness,
) -> Result<ReadReport, IoModuleError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| IoModuleError::Parse {
            path: path_label.to_string(),
            message: e.to_string(),
        })?;
    let docs: Vec<serde_json::Value> = match value {
        serde_json::Value::Array(a) => a,
        v => vec![v],
    };

    let mut segments = Vec::new();
    let mut skipped = Vec::new();
    for (i, doc) in docs.into_iter().enumerate() {
        let context = match doc.get("id").and_then(|v| v.as_str()) {
            Some(id) => format!("segment {id:?} (entry {i})"),
            None => format!("entry {i}"),
        };
        let parsed: Result<SegmentDoc, _> = serde_json::from_value(doc);
        let seg: Segment = match parsed {
            Ok(d) => d.into(),
            Err(e) => {
                let err = IoModuleError::Schema {
                    path: path_label.to_string(),
                    context: context.clone(),
                    message: e.to_string(),
                };
                match strictness {
                    Strictness::Strict => return Err(err),
                    Strictness::SkipInvalid => {
                        skipped.push(ReadIssue {
                            context,
                            message: e.to_string(),
                        });
                        continue;
                    }
                }
            }
        };
        let violations = validate_segment(&seg);
        if !violations.is_empty() {
            let message = violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            let err = IoModuleError::Schema {
                path: path_label.to_string(),
                context: format!("segment {:?} (entry {i})", seg.id),
                message: message.clone(),
            };
            match strictness {
                Strictness::Strict => return Err(err),
                Strictness::SkipInvalid => {
                    skipped.push(ReadIssue {
                        context: format!("segment {:?} (entry {i})", seg.id),
                        message,
                    });
                    continue;
                }
            }
        }
        segments.push(seg);
    }
    Ok(ReadReport { segments, skipped })
}

/// Serializes segments as an interchange array document (pretty JSON, stable
/// field order).
pub fn write_segments(path: &Path, segments: &[Segment]) -> Result<(), IoModuleError> {
    let docs: Vec<SegmentDoc> = segments.iter().map(SegmentDoc::from).collect();
    let text = serde_json::to_string_pretty(&docs).expect("serializable");
    fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// trajectory CSV
// ---------------------------------------------------------------------------

const CSV_HEADER: &str = "index,x,y,v,a,light_state,dist_to_stop_line,dist_to_sign";

fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Renders a record as CSV text: metadata comment, header, 91 rows. Output is
/// byte-stable for identical input.
pub fn trajectory_csv_string(record: &TrajectoryRecord) -> String {
    let mut out = String::new();
    let (lx, ly) = match record.light_position {
        Some(p) => (fmt_f64(p.x), fmt_f64(p.y)),
        None => (String::new(), String::new()),
    };
    let (sx, sy) = match record.sign_position {
        Some(p) => (fmt_f64(p.x), fmt_f64(p.y)),
        None => (String::new(), String::new()),
    };
    writeln!(
        out,
        "# segment_id={},category={},light_x={},light_y={},sign_x={},sign_y={}",
        record.segment_id, record.category, lx, ly, sx, sy
    )
    .unwrap();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &record.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.index,
            fmt_f64(row.position.x),
            fmt_f64(row.position.y),
            fmt_f64(row.speed),
            fmt_f64(row.accel),
            row.light_state.map(|u| u.to_string()).unwrap_or_default(),
            fmt_opt(row.dist_to_stop_line),
            fmt_opt(row.dist_to_sign),
        )
        .unwrap();
    }
    out
}

/// Writes a record to `path` as CSV.
pub fn write_trajectory_csv(record: &TrajectoryRecord, path: &Path) -> Result<(), IoModuleError> {
    fs::write(path, trajectory_csv_string(record))?;
    Ok(())
}

fn parse_f64(field: &str, path: &str, context: &str) -> Result<f64, IoModuleError> {
    field.parse().map_err(|_| IoModuleError::Schema {
        path: path.to_string(),
        context: context.to_string(),
        message: format!("invalid number {field:?}"),
    })
}

fn parse_opt_f64(field: &str, path: &str, context: &str) -> Result<Option<f64>, IoModuleError> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field, path, context).map(Some)
    }
}

/// Parses a trajectory CSV produced by [`write_trajectory_csv`].
pub fn read_trajectory_csv(path: &Path) -> Result<TrajectoryRecord, IoModuleError> {
    let text = fs::read_to_string(path)?;
    parse_trajectory_csv(&text, &path.display().to_string())
}

/// Parses trajectory CSV text.
pub fn parse_trajectory_csv(text: &str, path_label: &str) -> Result<TrajectoryRecord, IoModuleError> {
    let schema_err = |context: &str, message: String| IoModuleError::Schema {
        path: path_label.to_string(),
        context: context.to_string(),
        message,
    };
    let mut lines = text.lines();
    let meta = lines
        .next()
        .ok_or_else(|| schema_err("metadata", "empty file".into()))?;
    let meta = meta
        .strip_prefix("# ")
        .ok_or_else(|| schema_err("metadata", "missing leading '# ' comment record".into()))?;

    let mut segment_id = None;
    let mut category = None;
    let mut light = [None::<f64>; 2];
    let mut sign = [None::<f64>; 2];
    for pair in meta.split(',') {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| schema_err("metadata", format!("malformed pair {pair:?}")))?;
        match key {
            "segment_id" => segment_id = Some(value.to_string()),
            "category" => {
                category = Some(InteractionCategory::from_str_name(value).ok_or_else(|| {
                    schema_err("metadata", format!("unknown category {value:?}"))
                })?)
            }
            "light_x" => light[0] = parse_opt_f64(value, path_label, "metadata")?,
            "light_y" => light[1] = parse_opt_f64(value, path_label, "metadata")?,
            "sign_x" => sign[0] = parse_opt_f64(value, path_label, "metadata")?,
            "sign_y" => sign[1] = parse_opt_f64(value, path_label, "metadata")?,
            other => {
                return Err(schema_err("metadata", format!("unknown key {other:?}")));
            }
        }
    }
    let segment_id =
        segment_id.ok_or_else(|| schema_err("metadata", "missing segment_id".into()))?;
    let category = category.ok_or_else(|| schema_err("metadata", "missing category".into()))?;

    let header = lines
        .next()
        .ok_or_else(|| schema_err("header", "missing column header".into()))?;
    if header != CSV_HEADER {
        return Err(schema_err(
            "header",
            format!("expected {CSV_HEADER:?}, got {header:?}"),
        ));
    }

    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let context = format!("row {}", lineno + 1);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(schema_err(&context, format!("expected 8 fields, got {}", fields.len())));
        }
        let light_state = if fields[5].is_empty() {
            None
        } else {
            Some(fields[5].parse::<u8>().map_err(|_| {
                schema_err(&context, format!("invalid light state {:?}", fields[5]))
            })?)
        };
        rows.push(TrajectoryRow {
            index: fields[0]
                .parse()
                .map_err(|_| schema_err(&context, format!("invalid index {:?}", fields[0])))?,
            position: Point::new(
                parse_f64(fields[1], path_label, &context)?,
                parse_f64(fields[2], path_label, &context)?,
            ),
            speed: parse_f64(fields[3], path_label, &context)?,
            accel: parse_f64(fields[4], path_label, &context)?,
            light_state,
            dist_to_stop_line: parse_opt_f64(fields[6], path_label, &context)?,
            dist_to_sign: parse_opt_f64(fields[7], path_label, &context)?,
        });
    }
    if rows.len() != crate::model::SEGMENT_LEN {
        return Err(schema_err(
            "rows",
            format!("expected {} rows, got {}", crate::model::SEGMENT_LEN, rows.len()),
        ));
    }

    let point_from = |p: [Option<f64>; 2]| match p {
        [Some(x), Some(y)] => Some(Point::new(x, y)),
        _ => None,
    };
    Ok(TrajectoryRecord {
        segment_id,
        category,
        light_position: point_from(light),
        sign_position: point_from(sign),
        rows,
    })
}

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

/// The full parameter bundle: classifier thresholds, quality bands, denoise
/// settings, and the calibration spec.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamBundle {
    pub light: LightRuleParams,
    pub sign: SignRuleParams,
    pub quality: QualityThresholds,
    pub denoise: DenoiseConfig,
    pub calibration: CalibrationSpec,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightToml {
    l_move: Option<f64>,
    d_pass: Option<f64>,
    d_poly: Option<usize>,
    p_extend: Option<f64>,
    v_stop: Option<f64>,
    l_begin: Option<f64>,
    l_end: Option<f64>,
    d_stop: Option<f64>,
    l_extend: Option<f64>,
    eta_left: Option<f64>,
    eta_right: Option<f64>,
    eta_through_1: Option<f64>,
    eta_through_2: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignToml {
    r_stop: Option<f64>,
    l_stop: Option<f64>,
    v_stop: Option<f64>,
    delta_t_stop: Option<f64>,
    eta_left: Option<f64>,
    eta_right: Option<f64>,
    dbscan_eps: Option<f64>,
    dbscan_min_pts: Option<usize>,
    stop_area: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct QualityToml {
    accel_min: Option<f64>,
    accel_max: Option<f64>,
    jerk_min: Option<f64>,
    jerk_max: Option<f64>,
    window: Option<f64>,
    max_inversions_per_window: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenoiseToml {
    wavelet: Option<String>,
    levels: Option<usize>,
    boundary: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationToml {
    n_samples: Option<usize>,
    seed: Option<u64>,
    exclude_stopped: Option<bool>,
    objective: Option<String>,
    v0: Option<[f64; 2]>,
    t_headway: Option<[f64; 2]>,
    a_max: Option<[f64; 2]>,
    b: Option<[f64; 2]>,
    s0: Option<[f64; 2]>,
    delta: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigToml {
    #[serde(default)]
    light: LightToml,
    #[serde(default)]
    sign: SignToml,
    #[serde(default)]
    quality: QualityToml,
    #[serde(default)]
    denoise: DenoiseToml,
    #[serde(default)]
    calibration: CalibrationToml,
}

fn range_from(v: Option<[f64; 2]>, base: ParamRange) -> ParamRange {
    match v {
        Some([low, high]) => ParamRange { low, high },
        None => base,
    }
}

fn bundle_from_toml(cfg: ConfigToml, path: &str) -> Result<ParamBundle, IoModuleError> {
    let config_err = |message: String| IoModuleError::Config {
        path: path.to_string(),
        message,
    };
    let base = ParamBundle::default();

    let light = LightRuleParams {
        l_move: cfg.light.l_move.unwrap_or(base.light.l_move),
        d_pass: cfg.light.d_pass.unwrap_or(base.light.d_pass),
        d_poly: cfg.light.d_poly.unwrap_or(base.light.d_poly),
        p_extend: cfg.light.p_extend.unwrap_or(base.light.p_extend),
        v_stop: cfg.light.v_stop.unwrap_or(base.light.v_stop),
        l_begin: cfg.light.l_begin.unwrap_or(base.light.l_begin),
        l_end: cfg.light.l_end.unwrap_or(base.light.l_end),
        d_stop: cfg.light.d_stop.unwrap_or(base.light.d_stop),
        l_extend: cfg.light.l_extend.unwrap_or(base.light.l_extend),
        eta_left: cfg.light.eta_left.unwrap_or(base.light.eta_left),
        eta_right: cfg.light.eta_right.unwrap_or(base.light.eta_right),
        eta_through_1: cfg.light.eta_through_1.unwrap_or(base.light.eta_through_1),
        eta_through_2: cfg.light.eta_through_2.unwrap_or(base.light.eta_through_2),
    };
    light.validate().map_err(&config_err)?;

    let stop_area_mode = match cfg.sign.stop_area.as_deref() {
        None | Some("nearest_point") => StopAreaMode::NearestPoint,
        Some("sign_centered") => StopAreaMode::SignCentered,
        Some(other) => {
            return Err(config_err(format!(
                "sign.stop_area: expected \"nearest_point\" or \"sign_centered\", got {other:?}"
            )))
        }
    };
    let sign = SignRuleParams {
        r_stop: cfg.sign.r_stop.unwrap_or(base.sign.r_stop),
        l_stop: cfg.sign.l_stop.unwrap_or(base.sign.l_stop),
        v_stop: cfg.sign.v_stop.unwrap_or(base.sign.v_stop),
        delta_t_stop: cfg.sign.delta_t_stop.unwrap_or(base.sign.delta_t_stop),
        eta_left: cfg.sign.eta_left.unwrap_or(base.sign.eta_left),
        eta_right: cfg.sign.eta_right.unwrap_or(base.sign.eta_right),
        dbscan_eps: cfg.sign.dbscan_eps.unwrap_or(base.sign.dbscan_eps),
        dbscan_min_pts: cfg.sign.dbscan_min_pts.unwrap_or(base.sign.dbscan_min_pts),
        stop_area_mode,
    };
    sign.validate().map_err(&config_err)?;

    let quality = QualityThresholds {
        accel_min: cfg.quality.accel_min.unwrap_or(base.quality.accel_min),
        accel_max: cfg.quality.accel_max.unwrap_or(base.quality.accel_max),
        jerk_min: cfg.quality.jerk_min.unwrap_or(base.quality.jerk_min),
        jerk_max: cfg.quality.jerk_max.unwrap_or(base.quality.jerk_max),
        window: cfg.quality.window.unwrap_or(base.quality.window),
        max_inversions_per_window: cfg
            .quality
            .max_inversions_per_window
            .unwrap_or(base.quality.max_inversions_per_window),
    };
    quality.validate().map_err(&config_err)?;

    let boundary = match cfg.denoise.boundary.as_deref() {
        None | Some("symmetric") => BoundaryMode::Symmetric,
        Some(other) => {
            return Err(config_err(format!(
                "denoise.boundary: only \"symmetric\" is implemented, got {other:?}"
            )))
        }
    };
    let denoise = DenoiseConfig {
        wavelet: cfg.denoise.wavelet.unwrap_or_else(|| base.denoise.wavelet.clone()),
        levels: cfg.denoise.levels.unwrap_or(base.denoise.levels),
        boundary,
    };

    let objective = match cfg.calibration.objective.as_deref() {
        None | Some("pooled") => Objective::Pooled,
        Some("per_trajectory_mean") => Objective::PerTrajectoryMean,
        Some(other) => {
            return Err(config_err(format!(
                "calibration.objective: expected \"pooled\" or \"per_trajectory_mean\", got {other:?}"
            )))
        }
    };
    let calibration = CalibrationSpec {
        ranges: CalibrationRanges {
            v0: range_from(cfg.calibration.v0, base.calibration.ranges.v0),
            t_headway: range_from(cfg.calibration.t_headway, base.calibration.ranges.t_headway),
            a_max: range_from(cfg.calibration.a_max, base.calibration.ranges.a_max),
            b: range_from(cfg.calibration.b, base.calibration.ranges.b),
            s0: range_from(cfg.calibration.s0, base.calibration.ranges.s0),
            delta: range_from(cfg.calibration.delta, base.calibration.ranges.delta),
        },
        n_samples: cfg.calibration.n_samples.unwrap_or(base.calibration.n_samples),
        seed: cfg.calibration.seed.unwrap_or(base.calibration.seed),
        exclude_stopped: cfg
            .calibration
            .exclude_stopped
            .unwrap_or(base.calibration.exclude_stopped),
        objective,
    };
    calibration.validate().map_err(&config_err)?;

    Ok(ParamBundle {
        light,
        sign,
        quality,
        denoise,
        calibration,
    })
}

/// Loads the parameter bundle from a TOML file; absent path means published
/// defaults. Unknown keys are rejected with their key path.
pub fn load_params(path: Option<&Path>) -> Result<ParamBundle, IoModuleError> {
    match path {
        None => Ok(ParamBundle::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            load_params_str(&text, &p.display().to_string())
        }
    }
}

/// Parses a TOML config document.
pub fn load_params_str(text: &str, path_label: &str) -> Result<ParamBundle, IoModuleError> {
    let cfg: ConfigToml = toml::from_str(text).map_err(|e| IoModuleError::Config {
        path: path_label.to_string(),
        message: e.to_string(),
    })?;
    bundle_from_toml(cfg, path_label)
}

/// Resolves the config path: an explicit path wins, then the `TIM_CONFIG`
/// environment variable, then none (defaults).
pub fn resolve_config_path(explicit: Option<PathBuf>) -> Option<PathBuf> {
    explicit.or_else(|| std::env::var_os(CONFIG_ENV_VAR).map(PathBuf::from))
}
