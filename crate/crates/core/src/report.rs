//! CSV tables and hand-built SVG charts.
//!
//! Every chart has a CSV twin carrying the same numbers, so nothing
//! downstream ever needs to parse SVG. Floats are written with Rust's
//! shortest round-trip formatting, which keeps reruns byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::attribution::{AblationCurve, ImportanceReport, RegionCount, ShapReport};
use crate::capsule::Row;
use crate::sensor_label;
use crate::stats::{AttitudeAxis, ErrorMetric, ErrorStats, SignificanceSummary};
use crate::AXIS_NAMES;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ReportError {
    ReportError::Io { path: path.display().to_string(), reason: e.to_string() }
}

fn write_rows(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// `epoch,train_loss`, epochs counted from 1.
pub fn write_loss_curve(path: &Path, epoch_losses: &[f64]) -> Result<(), ReportError> {
    let rows = epoch_losses.iter().enumerate().map(|(i, l)| vec![(i + 1).to_string(), l.to_string()]).collect();
    write_rows(path, &["epoch", "train_loss"], rows)
}

pub const STAT_ROWS: [&str; 3] = ["Maximum Error", "Mean Error", "Standard Deviation"];

/// One error table in the layout `statistic,<axis>...`, rows
/// Maximum Error / Mean Error / Standard Deviation. `axes` indexes into
/// the six pose outputs.
pub fn write_error_table(path: &Path, stats: &[ErrorStats], axes: &[usize]) -> Result<(), ReportError> {
    let mut header = vec!["statistic"];
    header.extend(axes.iter().map(|&a| AXIS_NAMES[a]));
    let pick: [fn(&ErrorStats) -> f64; 3] = [|s| s.max, |s| s.mean_abs, |s| s.std_abs];
    let rows = STAT_ROWS
        .iter()
        .zip(pick)
        .map(|(label, f)| {
            let mut r = vec![label.to_string()];
            r.extend(axes.iter().map(|&a| f(&stats[a]).to_string()));
            r
        })
        .collect();
    write_rows(path, &header, rows)
}

pub fn write_importance(path: &Path, report: &ImportanceReport) -> Result<(), ReportError> {
    let rank_of = |f: usize| report.ranking.iter().position(|&r| r == f).map(|p| p + 1).unwrap_or(0);
    let rows = report
        .features
        .iter()
        .zip(&report.scores)
        .map(|(&f, s)| vec![f.to_string(), sensor_label(f), s.to_string(), rank_of(f).to_string()])
        .collect();
    write_rows(path, &["feature", "label", "score", "rank"], rows)
}

/// Long format `trial,ratio,axis,mean_err,max_err` (degrees), plus the label
/// of the sensor removed after each step.
pub fn write_ablation_csv(path: &Path, curves: &[AblationCurve]) -> Result<(), ReportError> {
    let mut rows = Vec::new();
    for c in curves {
        for p in &c.points {
            for axis in [AttitudeAxis::Pitch, AttitudeAxis::Roll] {
                rows.push(vec![
                    c.trial_seed.to_string(),
                    p.ratio.to_string(),
                    axis.name().to_string(),
                    p.value(axis, ErrorMetric::Mean).to_string(),
                    p.value(axis, ErrorMetric::Max).to_string(),
                    p.removed_label.clone().unwrap_or_default(),
                ]);
            }
        }
    }
    write_rows(path, &["trial", "ratio", "axis", "mean_err", "max_err", "removed_next"], rows)
}

/// Per-ratio Welch/Holm results. Each `(metric, axis)` pair is its own Holm family.
pub fn write_significance_csv(path: &Path, summaries: &[SignificanceSummary]) -> Result<(), ReportError> {
    let mut rows = Vec::new();
    for s in summaries {
        for t in &s.tests {
            rows.push(vec![
                format!("{}/{}", s.metric.name(), s.axis.name()),
                s.metric.name().to_string(),
                s.axis.name().to_string(),
                t.ratio.to_string(),
                t.t.to_string(),
                t.df.to_string(),
                t.p_raw.to_string(),
                t.p_adjusted.to_string(),
                t.significant.to_string(),
            ]);
        }
    }
    write_rows(path, &["holm_family", "metric", "axis", "ratio", "t", "df", "p_raw", "p_adjusted", "significant"], rows)
}

pub fn write_shap_csv(path: &Path, report: &ShapReport, regions: &[Row]) -> Result<(), ReportError> {
    let rows = report
        .aggregate
        .iter()
        .enumerate()
        .map(|(f, a)| {
            let rank = report.top3.iter().position(|&t| t == f).map(|p| (p + 1).to_string()).unwrap_or_default();
            vec![f.to_string(), sensor_label(f), regions[f].name().to_string(), a.to_string(), rank]
        })
        .collect();
    write_rows(path, &["feature", "label", "region", "mean_abs_shap", "top3_rank"], rows)
}

pub fn write_region_counts(path: &Path, counts: &[(String, usize, RegionCount)]) -> Result<(), ReportError> {
    let rows = counts
        .iter()
        .map(|(criterion, subset, c)| {
            vec![
                criterion.clone(),
                subset.to_string(),
                c.mid_capsular.to_string(),
                c.transitional.to_string(),
                c.bone_attachment.to_string(),
                c.total().to_string(),
                c.most_frequent.iter().map(|&f| sensor_label(f)).collect::<Vec<_>>().join(" "),
            ]
        })
        .collect();
    write_rows(
        path,
        &["criterion", "subset_size", "mid_capsular", "transitional", "bone_attachment", "total", "most_frequent"],
        rows,
    )
}

// ---- SVG ----------------------------------------------------------------

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

pub const RED: &str = "#d62728";
pub const DARK_GRAY: &str = "#4d4d4d";

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round `x` for coordinates so SVG text stays short.
fn c(x: f64) -> String {
    format!("{:.2}", x)
}

fn axes(s: &mut String, y_max: f64, x_label: &str, y_label: &str, x_ticks: &[(f64, String)]) {
    let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
    let _ = writeln!(s, r#"<path d="M{} {}H{}M{} {}V{}" stroke="black" fill="none"/>"#, c(x0), c(y0), c(x1), c(x0), c(y0), c(y1));
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let y = y0 - (y0 - y1) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, c(x0 - 4.0), c(y + 4.0), v);
    }
    for (x, label) in x_ticks {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, c(*x), c(y0 + 14.0), escape(label));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, c((x0 + x1) / 2.0), c(H - 10.0), escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        c((y0 + y1) / 2.0),
        c((y0 + y1) / 2.0),
        escape(y_label)
    );
}

/// Across-trial mean and population standard deviation of one metric at
/// each step present in every curve.
pub fn ablation_summary(curves: &[AblationCurve], axis: AttitudeAxis, metric: ErrorMetric) -> Vec<(f64, f64, f64)> {
    let steps = curves.iter().map(|c| c.points.len()).min().unwrap_or(0);
    (0..steps)
        .map(|k| {
            let v: Vec<f64> = curves.iter().map(|c| c.points[k].value(axis, metric)).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (curves[0].points[k].ratio, mean, var.sqrt())
        })
        .collect()
}

/// Mean and max error versus reduction ratio for one axis, with ±std error
/// bars scaled by `magnify`.
pub fn ablation_svg(curves: &[AblationCurve], axis: AttitudeAxis, magnify: f64) -> String {
    let series = [
        (ErrorMetric::Mean, "#1f77b4", ablation_summary(curves, axis, ErrorMetric::Mean)),
        (ErrorMetric::Max, "#ff7f0e", ablation_summary(curves, axis, ErrorMetric::Max)),
    ];
    let y_max = series
        .iter()
        .flat_map(|(_, _, pts)| pts.iter().map(|(_, m, s)| m + s * magnify))
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.05;
    let px = |r: f64| LEFT + r * (W - LEFT - RIGHT);
    let py = |v: f64| (H - BOTTOM) - v / y_max * (H - BOTTOM - TOP);
    let title = if magnify == 1.0 {
        format!("{} error vs. sensor reduction ratio", axis.name())
    } else {
        format!("{} error vs. sensor reduction ratio (error bars x{magnify})", axis.name())
    };
    let mut s = svg_open(&title);
    let ticks: Vec<(f64, String)> = (0..=5).map(|i| (px(i as f64 / 5.0), format!("{}%", i * 20))).collect();
    axes(&mut s, y_max, "reduction ratio", "error (deg)", &ticks);
    for (i, (metric, color, pts)) in series.iter().enumerate() {
        let mut d = String::new();
        for (k, (r, m, sd)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{} {}", if k == 0 { "M" } else { "L" }, c(px(*r)), c(py(*m)));
            let half = sd * magnify;
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="{color}" stroke-width="0.8"/>"#,
                c(py(m - half)),
                c(py(m + half)),
                x = c(px(*r))
            );
        }
        let _ = writeln!(s, r#"<path d="{d}" stroke="{color}" stroke-width="1.5" fill="none"/>"#);
        let ly = TOP + 14.0 * i as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/>"#, c(W - 150.0), c(ly));
        let _ = writeln!(s, r#"<text x="{}" y="{}">{} error</text>"#, c(W - 132.0), c(ly + 4.0), metric.name());
    }
    s.push_str("</svg>\n");
    s
}

/// Fill for a top-3 feature that is not among the most frequent: lighter
/// for lower scores.
fn shade(score: f64, max: f64) -> String {
    let t = if max > 0.0 { (score / max).clamp(0.0, 1.0) } else { 0.0 };
    let g = (200.0 - 110.0 * t).round() as u8;
    let b = (170.0 - 110.0 * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", 240u8, g, b)
}

/// Bar per feature of aggregated |SHAP|. Top-3 features that are also among
/// the most frequent top-3 features across trials are red, the other top-3
/// are shaded by score, and the rest are dark gray.
pub fn shap_bar_svg(report: &ShapReport, most_frequent: &[usize]) -> String {
    let n = report.aggregate.len().max(1);
    let max = report.aggregate.iter().copied().fold(0.0f64, f64::max);
    let y_max = max.max(1e-12) * 1.05;
    let slot = (W - LEFT - RIGHT) / n as f64;
    let title = format!("{} near-limit attribution, trial {}", report.criterion.name(), report.trial_seed);
    let mut s = svg_open(&title);
    let ticks: Vec<(f64, String)> =
        (0..n).step_by(15).map(|f| (LEFT + slot * (f as f64 + 0.5), sensor_label(f))).collect();
    axes(&mut s, y_max, "sensor", "mean |SHAP| (m + deg)", &ticks);
    for (f, &v) in report.aggregate.iter().enumerate() {
        let fill = if report.top3.contains(&f) {
            if most_frequent.contains(&f) {
                RED.to_string()
            } else {
                shade(v, max)
            }
        } else {
            DARK_GRAY.to_string()
        };
        let h = v / y_max * (H - BOTTOM - TOP);
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}"><title>{} {}</title></rect>"#,
            c(LEFT + slot * f as f64 + 0.5),
            c(H - BOTTOM - h),
            c((slot - 1.0).max(0.5)),
            c(h),
            sensor_label(f),
            v
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::AblationPoint;
    use crate::dataset::NearLimit;

    fn curve(seed: u64, values: &[f64]) -> AblationCurve {
        AblationCurve {
            trial_seed: seed,
            total_features: values.len(),
            points: values
                .iter()
                .enumerate()
                .map(|(k, &v)| AblationPoint {
                    removed: k,
                    ratio: k as f64 / values.len() as f64,
                    pitch_mean: v,
                    pitch_max: 2.0 * v,
                    roll_mean: v,
                    roll_max: 3.0 * v,
                    final_train_loss: 0.0,
                    removed_label: None,
                })
                .collect(),
        }
    }

    #[test]
    fn error_table_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let s = ErrorStats { max: 3.0, mean_abs: 2.0, std_abs: 1.0 };
        write_error_table(&p, &[s; 6], &[3, 4, 5]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            "statistic,roll,pitch,yaw\nMaximum Error,3,3,3\nMean Error,2,2,2\nStandard Deviation,1,1,1\n"
        );
    }

    #[test]
    fn ablation_csv_shape() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_ablation_csv(&p, &[curve(1, &[1.0, 2.0, 3.0]), curve(2, &[1.0, 2.0, 3.0])]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 3 * 2);
        assert!(text.starts_with("trial,ratio,axis,mean_err,max_err"));
    }

    #[test]
    fn summary_mean_and_spread() {
        let s = ablation_summary(&[curve(1, &[1.0, 2.0]), curve(2, &[3.0, 2.0])], AttitudeAxis::Pitch, ErrorMetric::Mean);
        assert_eq!(s, vec![(0.0, 2.0, 1.0), (0.5, 2.0, 0.0)]);
    }

    #[test]
    fn shap_colors() {
        let mut aggregate = vec![0.1; 6];
        aggregate[2] = 1.0;
        aggregate[4] = 0.8;
        aggregate[0] = 0.5;
        let r = ShapReport { trial_seed: 1, criterion: NearLimit::Twist, aggregate, top3: [2, 4, 0], evaluated_rows: 1 };
        let svg = shap_bar_svg(&r, &[2]);
        assert_eq!(svg.matches(RED).count(), 1);
        assert_eq!(svg.matches(DARK_GRAY).count(), 3);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn magnified_bars_are_longer() {
        let curves = [curve(1, &[1.0, 2.0]), curve(2, &[3.0, 4.0])];
        let a = ablation_svg(&curves, AttitudeAxis::Roll, 1.0);
        let b = ablation_svg(&curves, AttitudeAxis::Roll, 10.0);
        assert_ne!(a, b);
        assert!(b.contains("x10"));
    }
}
