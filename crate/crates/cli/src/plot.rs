//! Standalone SVG line plots of a run bundle.

use std::path::{Path, PathBuf};

use ahflow_core::diagnostics::{above_floor, fit_decay, tail_window, NOISE_FLOOR};
use plotters::prelude::*;

use crate::config::RunConfig;
use crate::io::Table;

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: csv::Error },
    #[error("{file} has no usable `{column}` column")]
    MissingColumn { file: PathBuf, column: String },
    #[error("drawing {path}: {message}")]
    Draw { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stroke {
    Solid,
    Dashed,
}

#[derive(Debug, Clone)]
struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    stroke: Stroke,
}

impl Series {
    fn new(label: &str, points: Vec<(f64, f64)>, stroke: Stroke) -> Self {
        let points = points
            .into_iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        Self {
            label: label.to_string(),
            points,
            stroke,
        }
    }
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

fn padded(values: impl Iterator<Item = f64>) -> std::ops::Range<f64> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !(lo.is_finite() && hi.is_finite()) {
        return 0.0..1.0;
    }
    let pad = if hi > lo {
        0.05 * (hi - lo)
    } else {
        0.5 * lo.abs().max(1.0)
    };
    (lo - pad)..(hi + pad)
}

fn line_plot(
    path: &Path,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
) -> Result<(), PlotError> {
    let draw_err = |e: &dyn std::fmt::Display| PlotError::Draw {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let xr = padded(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = padded(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(xr, yr)
        .map_err(|e| draw_err(&e))?;
    chart
        .configure_mesh()
        .x_desc(xlabel)
        .y_desc(ylabel)
        .draw()
        .map_err(|e| draw_err(&e))?;
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let style = color.stroke_width(2);
        let pts = s.points.iter().copied();
        let anno = match s.stroke {
            Stroke::Solid => chart.draw_series(LineSeries::new(pts, style)),
            Stroke::Dashed => chart.draw_series(DashedLineSeries::new(pts, 8, 5, style)),
        }
        .map_err(|e| draw_err(&e))?;
        anno.label(s.label.clone()).legend(move |(x, y)| {
            PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
        });
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| draw_err(&e))?;
    root.present().map_err(|e| draw_err(&e))?;
    Ok(())
}

fn required(table: &Table, file: &Path, column: &str) -> Result<Vec<f64>, PlotError> {
    match table.column(column) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(PlotError::MissingColumn {
            file: file.to_path_buf(),
            column: column.to_string(),
        }),
    }
}

/// Emit the plots for the bundle in `dir` and return their paths.
///
/// `rm_decay.svg` and `sup_r2_lambda.svg` need only `records.csv`;
/// `lambda_snapshots.svg` needs `snapshots.csv` and `envelopes.svg` needs
/// `config.resolved`, each skipped when its input is absent.
pub fn plot_bundle(dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let rec_path = dir.join("records.csv");
    let records = Table::read(&rec_path).map_err(|source| PlotError::Read {
        path: rec_path.clone(),
        source,
    })?;
    let t = required(&records, &rec_path, "t")?;
    let rm = required(&records, &rec_path, "sup_rm_plus_k")?;
    let min_l = required(&records, &rec_path, "min_lambda")?;
    let max_l = required(&records, &rec_path, "max_lambda")?;
    let r2l = required(&records, &rec_path, "sup_r2_lambda")?;
    let mut out = Vec::new();

    let path = dir.join("rm_decay.svg");
    let data: Vec<(f64, f64)> = t.iter().copied().zip(rm.iter().copied()).collect();
    let mut series = vec![Series::new(
        "log10 sup|Rm+K|",
        data.iter().map(|&(t, y)| (t, y.log10())).collect(),
        Stroke::Solid,
    )];
    let trimmed = above_floor(&data, NOISE_FLOOR);
    if let Ok(fit) = fit_decay(trimmed, tail_window(trimmed, 0.5)) {
        let (a, b) = fit.window;
        let line = |t: f64| (fit.c_fit.ln() - fit.rate_fit * t) / std::f64::consts::LN_10;
        let label = format!("fit, rate {:.4}", fit.rate_fit);
        series.push(Series::new(
            &label,
            vec![(a, line(a)), (b, line(b))],
            Stroke::Dashed,
        ));
    }
    line_plot(
        &path,
        "Curvature deviation",
        "t",
        "log10 sup|Rm+K|",
        &series,
    )?;
    out.push(path);

    let path = dir.join("sup_r2_lambda.svg");
    let series = [Series::new(
        "sup r^2 lambda",
        t.iter().copied().zip(r2l.iter().copied()).collect(),
        Stroke::Solid,
    )];
    line_plot(
        &path,
        "Minimal-sphere monitor",
        "t",
        "sup r^2 lambda",
        &series,
    )?;
    out.push(path);

    let snap_path = dir.join("snapshots.csv");
    if snap_path.exists() {
        let snaps = Table::read(&snap_path).map_err(|source| PlotError::Read {
            path: snap_path.clone(),
            source,
        })?;
        let st = required(&snaps, &snap_path, "t")?;
        let sr = required(&snaps, &snap_path, "r")?;
        let sl = required(&snaps, &snap_path, "lambda")?;
        let mut times: Vec<f64> = Vec::new();
        for &v in &st {
            if times.last() != Some(&v) {
                times.push(v);
            }
        }
        let picks: Vec<f64> = if times.len() <= 5 {
            times.clone()
        } else {
            (0..5).map(|k| times[k * (times.len() - 1) / 4]).collect()
        };
        let series: Vec<Series> = picks
            .iter()
            .map(|&tp| {
                let pts = (0..st.len())
                    .filter(|&i| st[i] == tp && sr[i] <= 10.0)
                    .map(|i| (sr[i], sl[i]))
                    .collect();
                Series::new(&format!("t = {tp:.3}"), pts, Stroke::Solid)
            })
            .collect();
        let path = dir.join("lambda_snapshots.svg");
        line_plot(&path, "Orbital curvature", "r", "lambda", &series)?;
        out.push(path);
    }

    let cfg_path = dir.join("config.resolved");
    if let Some(cfg) = std::fs::read_to_string(&cfg_path)
        .ok()
        .and_then(|s| RunConfig::parse(&s).ok())
    {
        let k = 2.0 * (cfg.dimension as f64 - 1.0);
        let (lo0, hi0) = (min_l[0], max_l[0]);
        let lower: Vec<(f64, f64)> = t
            .iter()
            .map(|&t| (t, -1.0 + (-k * t).exp() * (lo0 + 1.0)))
            .collect();
        let mut series = vec![
            Series::new(
                "min lambda",
                t.iter().copied().zip(min_l.iter().copied()).collect(),
                Stroke::Solid,
            ),
            Series::new("lower envelope", lower, Stroke::Dashed),
            Series::new(
                "max lambda",
                t.iter().copied().zip(max_l.iter().copied()).collect(),
                Stroke::Solid,
            ),
        ];
        if hi0 < 0.0 {
            let d2 = (0.99 * -hi0).min(0.99);
            let upper = t
                .iter()
                .map(|&t| (t, -1.0 + (1.0 - d2) * (-k * d2 * t).exp()))
                .collect();
            series.push(Series::new("upper envelope", upper, Stroke::Dashed));
        }
        let path = dir.join("envelopes.svg");
        line_plot(&path, "Curvature envelopes", "t", "lambda", &series)?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_records(dir: &Path, rate: f64) {
        let mut s = String::from("t,sup_rm_plus_k,min_lambda,max_lambda,sup_r2_lambda\n");
        for k in 0..=40 {
            let t = 0.1 * k as f64;
            s.push_str(&format!("{t},{},-1.5,-1,0\n", 0.3 * (-rate * t).exp()));
        }
        std::fs::write(dir.join("records.csv"), s).unwrap();
    }

    #[test]
    fn records_alone_give_two_plots() {
        let dir = tempfile::tempdir().unwrap();
        write_records(dir.path(), 2.0);
        let out = plot_bundle(dir.path()).unwrap();
        let names: Vec<_> = out
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap())
            .collect();
        assert_eq!(names, ["rm_decay.svg", "sup_r2_lambda.svg"]);
        let svg = std::fs::read_to_string(&out[0]).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("fit, rate 2.0000"));
    }

    #[test]
    fn missing_monitor_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("records.csv"), "t,min_lambda\n0,-1\n").unwrap();
        match plot_bundle(dir.path()) {
            Err(PlotError::MissingColumn { column, .. }) => assert_eq!(column, "sup_rm_plus_k"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn absent_records_is_a_read_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            plot_bundle(dir.path()),
            Err(PlotError::Read { .. })
        ));
    }
}
