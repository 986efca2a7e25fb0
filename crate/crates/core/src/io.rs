//! File formats: regression CSV ingestion with coordinate-carrying parse
//! errors, deterministic CSV writers, ASCII PGM images, minimal SVG plots
//! and run manifests.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::fmt::Write as _;
use std::path::Path;

/// Raw regression table: first column is the response, remaining columns are
/// covariates. Values are returned uncentered; centering happens at
/// `RegressionData` construction so offsets can be recorded.
#[derive(Debug, Clone)]
pub struct RegressionTable {
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    pub covariate_names: Vec<String>,
}

/// Parse a headered CSV with the response in the first column. Row/column
/// coordinates in errors are 1-based file coordinates (the header is row 1).
pub fn load_regression_csv(path: &Path) -> Result<RegressionTable> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{}: empty file", path.display())))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{}: need a response column plus at least one covariate",
            path.display()
        )));
    }
    let ncols = names.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != ncols {
            return Err(Error::Parse {
                path: path.display().to_string(),
                row: lineno + 1,
                col: cells.len().min(ncols) + 1,
                msg: format!("expected {ncols} cells, found {}", cells.len()),
            });
        }
        let mut row = Vec::with_capacity(ncols);
        for (c, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    row: lineno + 1,
                    col: c + 1,
                    msg: "missing value".into(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                row: lineno + 1,
                col: c + 1,
                msg: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    row: lineno + 1,
                    col: c + 1,
                    msg: "non-finite value".into(),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.len() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: rows.len(),
        });
    }
    let n = rows.len();
    let p = ncols - 1;
    let y = rows.iter().map(|r| r[0]).collect();
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j + 1]);
    Ok(RegressionTable {
        y,
        x,
        covariate_names: names[1..].to_vec(),
    })
}

/// Write a CSV with a header row; every cell is rendered with the shortest
/// round-trip float representation so identical runs yield identical bytes.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "{}", header.join(",")).unwrap();
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(text, "{}", line.join(",")).unwrap();
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Write string-valued rows under a header.
pub fn write_csv_records(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "{}", header.join(",")).unwrap();
    for row in rows {
        writeln!(text, "{}", row.join(",")).unwrap();
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// ASCII (P2) PGM image of a grid of values in [lo, hi], mapped to 0..255.
pub fn write_pgm(path: &Path, values: &[f64], rows: usize, cols: usize, lo: f64, hi: f64) -> Result<()> {
    assert_eq!(values.len(), rows * cols);
    let span = (hi - lo).max(1e-300);
    let mut text = format!("P2\n{cols} {rows}\n255\n");
    for r in 0..rows {
        let line: Vec<String> = (0..cols)
            .map(|c| {
                let v = ((values[r * cols + c] - lo) / span).clamp(0.0, 1.0);
                format!("{}", (v * 255.0).round() as u8)
            })
            .collect();
        writeln!(text, "{}", line.join(" ")).unwrap();
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Minimal SVG line plot: one polyline per named series over [0,1]^2 data
/// coordinates, with axis labels.
pub fn write_svg_lines(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const MARGIN: f64 = 60.0;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            MARGIN + x.clamp(0.0, 1.0) * (W - 2.0 * MARGIN),
            H - MARGIN - y.clamp(0.0, 1.0) * (H - 2.0 * MARGIN),
        )
    };
    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    )
    .unwrap();
    writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>").unwrap();
    writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>",
        W / 2.0
    )
    .unwrap();
    let (x0, y0) = to_px(0.0, 0.0);
    let (x1, y1) = to_px(1.0, 1.0);
    writeln!(
        svg,
        "<polyline points=\"{x0},{y1} {x0},{y0} {x1},{y0}\" fill=\"none\" stroke=\"black\"/>"
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{x_label}</text>",
        W / 2.0,
        H - 16.0
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 18 {})\">{y_label}</text>",
        H / 2.0,
        H / 2.0
    )
    .unwrap();
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = colors[k % colors.len()];
        let path_pts: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let (px, py) = to_px(x, y);
                format!("{px:.1},{py:.1}")
            })
            .collect();
        writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            path_pts.join(" ")
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            W - MARGIN - 150.0,
            40.0 + 16.0 * k as f64
        )
        .unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    std::fs::write(path, svg)?;
    Ok(())
}

/// Write the run manifest: sorted key=value lines, one per entry.
pub fn write_manifest(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut sorted: Vec<&(String, String)> = entries.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut text = String::new();
    for (k, v) in sorted {
        writeln!(text, "{k}={v}").unwrap();
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn join_floats(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(";")
}
