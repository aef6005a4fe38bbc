//! SVG rendering of aggregate and sweep files.

use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::Deserialize;

use segab_core::baselines::SchemeId;
use segab_core::experiment::output::{is_sweep_file, read_aggregate, read_sweep};
use segab_core::experiment::{AggregateRow, Interval};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Gap,
    #[serde(rename = "worst_H")]
    WorstH,
}

impl Metric {
    fn label(self) -> &'static str {
        match self {
            Metric::Accuracy => "test accuracy",
            Metric::Gap => "optimality gap",
            Metric::WorstH => "worst-case H",
        }
    }

    fn slug(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Gap => "gap",
            Metric::WorstH => "worst_H",
        }
    }

    fn pick(self, row: &AggregateRow) -> Interval {
        match self {
            Metric::Accuracy => row.accuracy,
            Metric::Gap => row.gap,
            Metric::WorstH => row.worst_h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XAxis {
    ChannelUses,
    Round,
}

/// Optional plot settings, read from a small TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotSpec {
    pub metrics: Vec<Metric>,
    /// Ignored for sweep files, whose x-axis is the swept parameter.
    pub x_axis: XAxis,
    pub log_y: bool,
    pub width: u32,
    pub height: u32,
    pub title: Option<String>,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self {
            metrics: vec![Metric::Accuracy],
            x_axis: XAxis::ChannelUses,
            log_y: false,
            width: 900,
            height: 560,
            title: None,
        }
    }
}

impl PlotSpec {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

struct Point {
    x: f64,
    mean: f64,
    lo: f64,
    hi: f64,
}

struct Series {
    scheme: SchemeId,
    points: Vec<Point>,
}

fn transform(v: f64, log: bool) -> f64 {
    if log {
        if v > 0.0 {
            v.log10()
        } else {
            f64::NAN
        }
    } else {
        v
    }
}

fn collect_series<'a>(
    rows: impl Iterator<Item = (f64, &'a AggregateRow)> + Clone,
    metric: Metric,
    log: bool,
) -> Vec<Series> {
    SchemeId::ALL
        .into_iter()
        .filter_map(|scheme| {
            let mut points: Vec<Point> = rows
                .clone()
                .filter(|(_, r)| r.scheme == scheme)
                .map(|(x, r)| {
                    let iv = metric.pick(r);
                    Point {
                        x,
                        mean: transform(iv.mean, log),
                        lo: transform(iv.lo, log),
                        hi: transform(iv.hi, log),
                    }
                })
                .filter(|p| p.x.is_finite() && p.mean.is_finite())
                .collect();
            points.sort_by(|a, b| a.x.total_cmp(&b.x));
            (!points.is_empty()).then_some(Series { scheme, points })
        })
        .collect()
}

fn color(scheme: SchemeId) -> RGBColor {
    match scheme {
        SchemeId::SegAB => RGBColor(214, 39, 40),
        SchemeId::IdealSeg => RGBColor(31, 119, 180),
        SchemeId::IdealFM => RGBColor(44, 160, 44),
        SchemeId::MinSum => RGBColor(255, 127, 14),
        SchemeId::MinMax => RGBColor(148, 103, 189),
    }
}

fn range<const M: usize>(series: &[Series], f: impl Fn(&Point) -> [f64; M]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in series.iter().flat_map(|s| &s.points) {
        for v in f(p) {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5f64.max(lo.abs() * 0.05) };
    (lo - pad, hi + pad)
}

fn draw_err<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Plot(format!("{}: {e}", path.display()))
}

fn render(path: &Path, series: &[Series], spec: &PlotSpec, x_desc: &str, y_desc: &str, markers: bool) -> Result<(), CliError> {
    if series.is_empty() {
        return Err(CliError::Plot(format!("{}: no finite values to plot", path.display())));
    }
    let err = draw_err(path);
    let root = SVGBackend::new(path, (spec.width, spec.height)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let (x0, x1) = range(series, |p| [p.x, p.x]);
    let (y0, y1) = range(series, |p| [p.mean, p.lo, p.hi]);
    let mut builder = ChartBuilder::on(&root);
    builder.margin(16).x_label_area_size(44).y_label_area_size(70);
    if let Some(t) = &spec.title {
        builder.caption(t, ("sans-serif", 22));
    }
    let mut chart = builder.build_cartesian_2d(x0..x1, y0..y1).map_err(&err)?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .light_line_style(WHITE.mix(0.0))
        .draw()
        .map_err(&err)?;

    for s in series {
        let c = color(s.scheme);
        let band: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|p| p.lo.is_finite() && p.hi.is_finite())
            .map(|p| (p.x, p.hi))
            .chain(
                s.points
                    .iter()
                    .rev()
                    .filter(|p| p.lo.is_finite() && p.hi.is_finite())
                    .map(|p| (p.x, p.lo)),
            )
            .collect();
        if band.len() >= 2 {
            chart
                .draw_series(std::iter::once(Polygon::new(band, c.mix(0.18).filled())))
                .map_err(&err)?;
        }
        chart
            .draw_series(LineSeries::new(s.points.iter().map(|p| (p.x, p.mean)), c.stroke_width(2)))
            .map_err(&err)?
            .label(s.scheme.name())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c.stroke_width(2)));
        if markers {
            chart
                .draw_series(s.points.iter().map(|p| Circle::new((p.x, p.mean), 4, c.filled())))
                .map_err(&err)?;
        }
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::LowerRight)
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(&err)?;
    root.present().map_err(&err)?;
    Ok(())
}

fn y_label(metric: Metric, log: bool) -> String {
    if log {
        format!("log10 {}", metric.label())
    } else {
        metric.label().to_string()
    }
}

/// Writes one SVG per requested metric next to `out_dir/<stem>_<metric>.svg`
/// and returns the paths.
pub fn emit_plots(input: &Path, spec: &PlotSpec, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("plot")
        .to_string();
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io { path: out_dir.to_path_buf(), source: e })?;
    let mut written = Vec::new();
    if is_sweep_file(input)? {
        let rows = read_sweep(input)?;
        let param = rows.first().map_or("value", |r| r.param.as_str()).to_string();
        let x_desc = if param == "gamma" { "γ" } else { param.as_str() };
        for &metric in &spec.metrics {
            let series = collect_series(rows.iter().map(|r| (r.value, &r.stats)), metric, spec.log_y);
            let path = out_dir.join(format!("{stem}_{}.svg", metric.slug()));
            render(&path, &series, spec, x_desc, &y_label(metric, spec.log_y), true)?;
            written.push(path);
        }
    } else {
        let rows = read_aggregate(input)?;
        let x_of = |r: &AggregateRow| match spec.x_axis {
            XAxis::ChannelUses => r.channel_uses as f64,
            XAxis::Round => r.round as f64,
        };
        let x_desc = match spec.x_axis {
            XAxis::ChannelUses => "channel uses",
            XAxis::Round => "round",
        };
        for &metric in &spec.metrics {
            let series = collect_series(rows.iter().map(|r| (x_of(r), r)), metric, spec.log_y);
            let path = out_dir.join(format!("{stem}_{}.svg", metric.slug()));
            render(&path, &series, spec, x_desc, &y_label(metric, spec.log_y), false)?;
            written.push(path);
        }
    }
    Ok(written)
}
