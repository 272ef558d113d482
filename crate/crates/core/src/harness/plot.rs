use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Result, TfitError};
use crate::tfit::Polarization;

use super::config::SweepAxis;
use super::sweep::{read_ber_csv, read_sweep_csv, BerRow, SweepRow};

fn plot_err(e: impl std::fmt::Display) -> TfitError {
    TfitError::Io(std::io::Error::other(e.to_string()))
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.08).max(1e-3);
    (lo - pad, hi + pad)
}

fn axes_present<T>(rows: &[T], axis: impl Fn(&T) -> SweepAxis) -> Vec<SweepAxis> {
    SweepAxis::ALL
        .into_iter()
        .filter(|a| rows.iter().any(|r| axis(r) == *a))
        .collect()
}

fn color(pol: Polarization) -> RGBColor {
    match pol {
        Polarization::X => RGBColor(200, 40, 40),
        Polarization::Y => RGBColor(30, 80, 200),
    }
}

/// Estimate against preset (with the y = x line) over the error against
/// preset, one SVG per swept axis.
pub fn plot_sweep(rows: &[SweepRow], out_dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for axis in axes_present(rows, |r| r.axis) {
        let rows: Vec<&SweepRow> = rows.iter().filter(|r| r.axis == axis && r.is_ok()).collect();
        let path = out_dir.join(format!("{stem}_{axis}.svg"));
        let unit = axis.unit();
        let (x0, x1) = span(rows.iter().map(|r| r.preset));
        let (y0, y1) = span(rows.iter().flat_map(|r| [r.swept().0, r.preset]));
        let (e0, e1) = span(rows.iter().map(|r| r.swept().1));

        let root = SVGBackend::new(&path, (720, 760)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let (top, bottom) = root.split_vertically(460);

        let mut chart = ChartBuilder::on(&top)
            .caption(format!("{axis}: estimate vs preset"), ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(56)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc(format!("preset [{unit}]"))
            .y_desc(format!("estimate [{unit}]"))
            .draw()
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new([(x0, x0), (x1, x1)], BLACK.stroke_width(1)))
            .map_err(plot_err)?
            .label("y = x")
            .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], BLACK));
        for pol in [Polarization::X, Polarization::Y] {
            let c = color(pol);
            chart
                .draw_series(
                    rows.iter()
                        .filter(|r| r.pol == pol)
                        .map(|r| Circle::new((r.preset, r.swept().0), 3, c.filled())),
                )
                .map_err(plot_err)?
                .label(format!("pol {pol:?}"))
                .legend(move |(x, y)| Circle::new((x + 8, y), 3, c.filled()));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;

        let mut chart = ChartBuilder::on(&bottom)
            .caption("error", ("sans-serif", 16))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(56)
            .build_cartesian_2d(x0..x1, e0..e1)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc(format!("preset [{unit}]"))
            .y_desc(format!("error [{unit}]"))
            .draw()
            .map_err(plot_err)?;
        for pol in [Polarization::X, Polarization::Y] {
            chart
                .draw_series(
                    rows.iter()
                        .filter(|r| r.pol == pol)
                        .map(|r| Circle::new((r.preset, r.swept().1), 3, color(pol).filled())),
                )
                .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
        written.push(path.clone());
    }
    Ok(written)
}

/// Mean BER per grid point, with and without compensation, per subcarrier.
pub fn plot_ber(rows: &[BerRow], out_dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    const FLOOR: f64 = 1e-7;
    let mut written = Vec::new();
    for axis in axes_present(rows, |r| r.axis) {
        let rows: Vec<&BerRow> = rows.iter().filter(|r| r.axis == axis && r.status == "ok").collect();
        let path = out_dir.join(format!("{stem}_{axis}.svg"));
        let (x0, x1) = span(rows.iter().map(|r| r.preset));
        let mut scs: Vec<usize> = rows.iter().map(|r| r.sc_index).collect();
        scs.sort_unstable();
        scs.dedup();

        let pooled = |sc: usize, compensated: bool| -> Vec<(f64, f64)> {
            let mut pts: Vec<(f64, u64, u64)> = Vec::new();
            for r in rows.iter().filter(|r| r.sc_index == sc) {
                let (e, n) = if compensated {
                    (r.bit_errors_compensated, r.bits_compensated)
                } else {
                    (r.bit_errors_uncompensated, r.bits_uncompensated)
                };
                match pts.iter_mut().find(|p| p.0 == r.preset) {
                    Some(p) => {
                        p.1 += e;
                        p.2 += n;
                    }
                    None => pts.push((r.preset, e, n)),
                }
            }
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            pts.into_iter()
                .map(|(x, e, n)| (x, (e as f64 / n.max(1) as f64).max(FLOOR)))
                .collect()
        };
        let series: Vec<_> = scs
            .iter()
            .flat_map(|&sc| [(sc, false, pooled(sc, false)), (sc, true, pooled(sc, true))])
            .collect();
        let top = series
            .iter()
            .flat_map(|s| s.2.iter().map(|p| p.1))
            .fold(FLOOR * 10.0, f64::max);

        let root = SVGBackend::new(&path, (720, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("BER vs {axis}"), ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(64)
            .build_cartesian_2d(x0..x1, (FLOOR..top * 2.0).log_scale())
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc(format!("preset [{}]", axis.unit()))
            .y_desc("BER")
            .draw()
            .map_err(plot_err)?;
        for (k, (sc, compensated, pts)) in series.into_iter().enumerate() {
            let c = Palette99::pick(k).to_rgba();
            let label = format!("SC-{} {}", sc + 1, if compensated { "compensated" } else { "raw" });
            chart
                .draw_series(LineSeries::new(pts, c.stroke_width(2)))
                .map_err(plot_err)?
                .label(label)
                .legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], c));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
        written.push(path.clone());
    }
    Ok(written)
}

/// Plots a sweep or BER CSV written by this crate. Files are named after
/// the CSV stem and the swept axis.
pub fn plot_csv(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let stem = csv_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("sweep")
        .to_string();
    std::fs::create_dir_all(out_dir)?;
    let written = match read_sweep_csv(csv_path) {
        Ok(rows) => plot_sweep(&rows, out_dir, &stem)?,
        Err(TfitError::Schema(first)) => match read_ber_csv(csv_path) {
            Ok(rows) => plot_ber(&rows, out_dir, &stem)?,
            Err(TfitError::Schema(_)) => return Err(TfitError::Schema(first)),
            Err(e) => return Err(e),
        },
        Err(e) => return Err(e),
    };
    if written.is_empty() {
        return Err(TfitError::Schema(format!("{} holds no rows to plot", csv_path.display())));
    }
    Ok(written)
}
