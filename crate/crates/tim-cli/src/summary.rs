//! Run manifests and the per-category summary tables (CSV and aligned text).

use serde::Serialize;
use std::fmt::Write as _;
use tim_core::model::InteractionCategory;
use tim_core::quality::QualityReport;

/// Per-category aggregate: counts, mileage, and mean quality metrics.
#[derive(Debug, Clone, Serialize)]
pub struct CategorySummary {
    pub category: String,
    pub count: usize,
    pub distance_km: f64,
    pub duration_h: f64,
    pub anomaly_accel_pct: Option<f64>,
    pub anomaly_jerk_pct: Option<f64>,
    pub anomaly_inversion_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anomaly_accel_pct_after: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anomaly_jerk_pct_after: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anomaly_inversion_pct_after: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub config: Option<String>,
    pub output_dir: Option<String>,
    pub segments_total: usize,
    pub skipped_invalid: usize,
    pub per_category: Vec<CategorySummary>,
}

/// Accumulates per-category quality means in a fixed category order.
#[derive(Debug, Default, Clone)]
pub struct CategoryAccumulator {
    pub count: usize,
    pub distance_m: f64,
    pub before: Vec<QualityReport>,
    pub after: Vec<QualityReport>,
}

pub struct SummaryBuilder {
    slots: Vec<(InteractionCategory, CategoryAccumulator)>,
}

impl SummaryBuilder {
    pub fn new() -> Self {
        Self {
            slots: InteractionCategory::ALL
                .iter()
                .map(|&c| (c, CategoryAccumulator::default()))
                .collect(),
        }
    }

    pub fn slot(&mut self, category: InteractionCategory) -> &mut CategoryAccumulator {
        &mut self
            .slots
            .iter_mut()
            .find(|(c, _)| *c == category)
            .expect("all categories present")
            .1
    }

    fn mean(reports: &[QualityReport], f: impl Fn(&QualityReport) -> f64) -> Option<f64> {
        if reports.is_empty() {
            None
        } else {
            Some(reports.iter().map(&f).sum::<f64>() / reports.len() as f64)
        }
    }

    /// Summaries in the fixed category order, skipping empty non-None rows is
    /// left to the caller (every category row is emitted for count stability).
    pub fn finish(self) -> Vec<CategorySummary> {
        self.slots
            .into_iter()
            .map(|(category, acc)| CategorySummary {
                category: category.as_str().to_string(),
                count: acc.count,
                distance_km: acc.distance_m / 1000.0,
                duration_h: acc.count as f64 * 9.1 / 3600.0,
                anomaly_accel_pct: Self::mean(&acc.before, |r| r.anomaly_accel_pct),
                anomaly_jerk_pct: Self::mean(&acc.before, |r| r.anomaly_jerk_pct),
                anomaly_inversion_pct: Self::mean(&acc.before, |r| r.anomaly_inversion_pct),
                anomaly_accel_pct_after: Self::mean(&acc.after, |r| r.anomaly_accel_pct),
                anomaly_jerk_pct_after: Self::mean(&acc.after, |r| r.anomaly_jerk_pct),
                anomaly_inversion_pct_after: Self::mean(&acc.after, |r| r.anomaly_inversion_pct),
            })
            .collect()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

/// CSV rendering of the summary table; after-columns appear only when any
/// category carries them.
pub fn summary_csv(rows: &[CategorySummary]) -> String {
    let with_after = rows.iter().any(|r| r.anomaly_accel_pct_after.is_some());
    let mut out = String::new();
    out.push_str("category,count,distance_km,duration_h,anomaly_accel_pct,anomaly_jerk_pct,anomaly_inversion_pct");
    if with_after {
        out.push_str(",anomaly_accel_pct_after,anomaly_jerk_pct_after,anomaly_inversion_pct_after");
    }
    out.push('\n');
    for r in rows {
        write!(
            out,
            "{},{},{:.3},{:.3},{},{},{}",
            r.category,
            r.count,
            r.distance_km,
            r.duration_h,
            fmt_opt(r.anomaly_accel_pct),
            fmt_opt(r.anomaly_jerk_pct),
            fmt_opt(r.anomaly_inversion_pct),
        )
        .unwrap();
        if with_after {
            write!(
                out,
                ",{},{},{}",
                fmt_opt(r.anomaly_accel_pct_after),
                fmt_opt(r.anomaly_jerk_pct_after),
                fmt_opt(r.anomaly_inversion_pct_after),
            )
            .unwrap();
        }
        out.push('\n');
    }
    out
}

/// Aligned-text rendering of the summary table.
pub fn summary_text(rows: &[CategorySummary]) -> String {
    let with_after = rows.iter().any(|r| r.anomaly_accel_pct_after.is_some());
    let mut header = vec![
        "category".to_string(),
        "count".into(),
        "km".into(),
        "hours".into(),
        "accel%".into(),
        "jerk%".into(),
        "invrt%".into(),
    ];
    if with_after {
        header.extend(["accel%'".into(), "jerk%'".into(), "invrt%'".into()]);
    }
    let mut table: Vec<Vec<String>> = vec![header];
    for r in rows {
        let mut row = vec![
            r.category.clone(),
            r.count.to_string(),
            format!("{:.3}", r.distance_km),
            format!("{:.3}", r.duration_h),
            fmt_opt(r.anomaly_accel_pct),
            fmt_opt(r.anomaly_jerk_pct),
            fmt_opt(r.anomaly_inversion_pct),
        ];
        if with_after {
            row.extend([
                fmt_opt(r.anomaly_accel_pct_after),
                fmt_opt(r.anomaly_jerk_pct_after),
                fmt_opt(r.anomaly_inversion_pct_after),
            ]);
        }
        table.push(row);
    }
    let cols = table[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                write!(out, "{cell:<width$}", width = widths[c]).unwrap();
            } else {
                write!(out, "  {cell:>width$}", width = widths[c]).unwrap();
            }
        }
        out.push('\n');
    }
    out
}
