use hiblk::experiment::SweepRow;
use plotters::prelude::*;

use crate::args::Metric;
use crate::CliError;

const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

fn value(r: &SweepRow, m: Metric) -> f64 {
    match m {
        Metric::Err => r.err,
        Metric::Nmse => r.nmse_mean,
        Metric::FalseAlarm => r.false_alarm_mean,
    }
}

fn label(m: Metric) -> &'static str {
    match m {
        Metric::Err => "ERR",
        Metric::Nmse => "NMSE",
        Metric::FalseAlarm => "false alarm ratio",
    }
}

fn draw_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Failed(format!("plot: {e}"))
}

/// One curve per algorithm, in first-appearance order.
fn series(rows: &[SweepRow], m: Metric) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut out: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        let pt = (r.point, value(r, m));
        match out.iter_mut().find(|(a, _)| *a == r.algorithm) {
            Some((_, pts)) => pts.push(pt),
            None => out.push((r.algorithm.clone(), vec![pt])),
        }
    }
    for (_, pts) in &mut out {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

pub fn render_svg(rows: &[SweepRow], metric: Metric, log_y: bool, title: Option<&str>) -> Result<String, CliError> {
    let curves = series(rows, metric);
    let xs = rows.iter().map(|r| r.point);
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if x0 == x1 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let ys: Vec<f64> = curves.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)).collect();
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (720, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;
        let mut builder = ChartBuilder::on(&root);
        builder
            .caption(title.unwrap_or(label(metric)), ("sans-serif", 20))
            .margin(16)
            .x_label_area_size(40)
            .y_label_area_size(64);
        macro_rules! finish {
            ($chart:ident) => {{
                $chart
                    .configure_mesh()
                    .x_desc("sweep point")
                    .y_desc(label(metric))
                    .draw()
                    .map_err(draw_err)?;
                for (i, (name, pts)) in curves.iter().enumerate() {
                    let color = PALETTE[i % PALETTE.len()];
                    let pts: Vec<(f64, f64)> = pts.iter().copied().filter(|p| !log_y || p.1 > 0.0).collect();
                    $chart
                        .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
                        .map_err(draw_err)?
                        .label(name.as_str())
                        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
                    $chart
                        .draw_series(pts.iter().map(|&p| Circle::new(p, 4, color.filled())))
                        .map_err(draw_err)?;
                }
                $chart
                    .configure_series_labels()
                    .background_style(WHITE.mix(0.85))
                    .border_style(BLACK)
                    .draw()
                    .map_err(draw_err)?;
            }};
        }
        if log_y {
            let pos: Vec<f64> = ys.iter().copied().filter(|v| *v > 0.0).collect();
            let lo = pos.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = pos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if lo.is_finite() {
                (lo / 2.0, hi * 2.0)
            } else {
                (1e-3, 1.0)
            };
            let mut chart = builder
                .build_cartesian_2d(x0..x1, (lo..hi).log_scale())
                .map_err(draw_err)?;
            finish!(chart);
        } else {
            let hi = ys.iter().copied().fold(0.0, f64::max).max(1e-12) * 1.05;
            let mut chart = builder.build_cartesian_2d(x0..x1, 0.0..hi).map_err(draw_err)?;
            finish!(chart);
        }
        root.present().map_err(draw_err)?;
    }
    Ok(svg)
}
