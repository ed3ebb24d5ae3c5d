//! SVG figures: RMSE per filter over time, and mean parameter variance per λ.

use std::path::Path;

use plotters::prelude::*;
use thiserror::Error;

use crate::metrics::{RmseSeries, VarianceSeries};
use crate::output::{read_rmse, read_theta_var, OutputError, RMSE_FILE, THETA_VAR_FILE};

#[derive(Debug, Error)]
pub enum PlotError {
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("{0}: nothing to plot")]
    Empty(String),
    #[error("drawing {path}: {msg}")]
    Draw { path: String, msg: String },
}

struct Line<'a> {
    label: String,
    values: &'a [f64],
}

fn draw_panel<DB: DrawingBackend>(
    area: &DrawingArea<DB, plotters::coord::Shift>,
    title: &str,
    y_desc: &str,
    lines: &[Line],
) -> Result<(), String> {
    let steps = lines
        .iter()
        .map(|l| l.values.len())
        .max()
        .unwrap_or(1)
        .max(2);
    let finite = lines
        .iter()
        .flat_map(|l| l.values.iter().copied())
        .filter(|v| v.is_finite());
    let y_max = finite.fold(0.0f64, f64::max).max(1e-12) * 1.05;
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(1f64..steps as f64, 0f64..y_max)
        .map_err(|e| e.to_string())?;
    chart
        .configure_mesh()
        .x_desc("step")
        .y_desc(y_desc)
        .draw()
        .map_err(|e| e.to_string())?;
    for (i, line) in lines.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let points = line
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(k, v)| ((k + 1) as f64, *v));
        chart
            .draw_series(LineSeries::new(points, color.stroke_width(2)))
            .map_err(|e| e.to_string())?
            .label(line.label.clone())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperRight)
        .draw()
        .map_err(|e| e.to_string())
}

fn rmse_label(s: &RmseSeries) -> String {
    match s.lambda {
        Some(l) => format!("{} λ={l}", s.method.name()),
        None => s.method.name().to_string(),
    }
}

/// Draws the RMSE curves and, when given, the parameter-variance curves
/// below them.
pub fn render_svg(
    path: &Path,
    rmse: &[RmseSeries],
    theta_var: &[VarianceSeries],
) -> Result<(), PlotError> {
    if rmse.is_empty() {
        return Err(PlotError::Empty(path.display().to_string()));
    }
    let draw_err = |msg: String| PlotError::Draw {
        path: path.display().to_string(),
        msg,
    };
    let height = if theta_var.is_empty() { 480 } else { 900 };
    let root = SVGBackend::new(path, (960, height)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(e.to_string()))?;
    let rmse_lines: Vec<_> = rmse
        .iter()
        .map(|s| Line {
            label: rmse_label(s),
            values: &s.values,
        })
        .collect();
    if theta_var.is_empty() {
        draw_panel(&root, "RMSE over Monte Carlo runs", "RMSE", &rmse_lines).map_err(draw_err)?;
    } else {
        let (top, bottom) = root.split_vertically(height / 2);
        draw_panel(&top, "RMSE over Monte Carlo runs", "RMSE", &rmse_lines).map_err(draw_err)?;
        let var_lines: Vec<_> = theta_var
            .iter()
            .map(|s| Line {
                label: format!("λ={}", s.lambda),
                values: &s.values,
            })
            .collect();
        draw_panel(&bottom, "Mean parameter variance", "E[Var(θ)]", &var_lines)
            .map_err(draw_err)?;
    }
    root.present().map_err(|e| draw_err(e.to_string()))?;
    Ok(())
}

/// Reads `rmse.csv` (and `theta_var.csv` if present) from `dir` and plots them.
pub fn plot_dir(dir: &Path, out: &Path) -> Result<(), PlotError> {
    let rmse = read_rmse(&dir.join(RMSE_FILE))?;
    let var_path = dir.join(THETA_VAR_FILE);
    let theta_var = if var_path.exists() {
        read_theta_var(&var_path)?
    } else {
        Vec::new()
    };
    render_svg(out, &rmse, &theta_var)
}
