//! SVG figures. The CSV files carry the same data; plots are optional.

use std::path::Path;

use arvar_core::bench::{DensityMap, RecoveryBands};
use plotters::prelude::*;

use crate::bench::Cell;
use crate::{CliError, CliResult};

fn draw_err<E: std::fmt::Debug>(path: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::input(format!("{}: plot failed: {e:?}", path.display()))
}

fn band(b: &RecoveryBands, k: f64) -> Vec<(f64, f64)> {
    let upper = (0..b.x.len()).map(|i| (b.x[i], b.mean[i] + k * b.std[i]));
    let lower = (0..b.x.len()).rev().map(|i| (b.x[i], (b.mean[i] - k * b.std[i]).max(0.0)));
    upper.chain(lower).collect()
}

/// Run-averaged `σ̂` with one and two standard deviation bands, over the
/// true `σ`.
pub fn recovery(path: &Path, cell: &Cell, b: &RecoveryBands) -> CliResult<()> {
    let err = draw_err(path);
    let (x0, x1) = (b.x[0], b.x[b.x.len() - 1]);
    let ymax = (0..b.x.len()).map(|i| (b.mean[i] + 2.0 * b.std[i]).max(b.truth[i])).fold(0.0, f64::max) * 1.05;
    let root = SVGBackend::new(path, (640, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{} {}", cell.dataset.name(), cell.estimator.label()), ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(40)
        .build_cartesian_2d(x0..x1, 0.0..ymax)
        .map_err(&err)?;
    chart.configure_mesh().x_desc("x").y_desc("sigma").draw().map_err(&err)?;
    chart.draw_series([Polygon::new(band(b, 2.0), BLUE.mix(0.15).filled())]).map_err(&err)?;
    chart.draw_series([Polygon::new(band(b, 1.0), BLUE.mix(0.3).filled())]).map_err(&err)?;
    chart
        .draw_series(LineSeries::new(b.x.iter().zip(&b.mean).map(|(x, y)| (*x, *y)), BLUE.stroke_width(2)))
        .map_err(&err)?
        .label("mean estimate")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], BLUE));
    chart
        .draw_series(LineSeries::new(b.x.iter().zip(&b.truth).map(|(x, y)| (*x, *y)), RED.stroke_width(2)))
        .map_err(&err)?
        .label("true sigma")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], RED));
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(&err)?;
    root.present().map_err(&err)?;
    Ok(())
}

/// Column-normalized density of predicted (horizontal) versus true
/// (vertical) `σ`.
pub fn density(path: &Path, m: &DensityMap) -> CliResult<()> {
    let err = draw_err(path);
    let root = SVGBackend::new(path, (520, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("5D predicted vs true sigma", ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(40)
        .build_cartesian_2d(m.lo..m.hi, m.lo..m.hi)
        .map_err(&err)?;
    chart.configure_mesh().x_desc("predicted sigma").y_desc("true sigma").draw().map_err(&err)?;
    let w = (m.hi - m.lo) / m.bins as f64;
    chart
        .draw_series((0..m.bins).flat_map(|c| {
            (0..m.bins).filter(move |r| m.density[c][*r] > 0.0).map(move |r| {
                let (x, y) = (m.lo + c as f64 * w, m.lo + r as f64 * w);
                let v = m.density[c][r];
                let shade = RGBColor((255.0 * (1.0 - v)) as u8, (255.0 * (1.0 - 0.6 * v)) as u8, 255);
                Rectangle::new([(x, y), (x + w, y + w)], shade.filled())
            })
        }))
        .map_err(&err)?;
    chart.draw_series(LineSeries::new([(m.lo, m.lo), (m.hi, m.hi)], BLACK)).map_err(&err)?;
    root.present().map_err(&err)?;
    Ok(())
}
