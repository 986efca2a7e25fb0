//! Container format for voxel-grid time-series data: a key-value manifest
//! naming grid dimensions, series length, trend-basis size and the scale d,
//! plus four CSV payloads (mask grid, external-field grid, stimulus, signal
//! rows).

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub enum Stimulus {
    /// One series shared by every voxel.
    Shared(Vec<f64>),
    /// One series per in-mask voxel, in mask raster order.
    PerVoxel(Vec<Vec<f64>>),
}

impl Stimulus {
    pub fn for_voxel(&self, v: usize) -> &[f64] {
        match self {
            Stimulus::Shared(x) => x,
            Stimulus::PerVoxel(xs) => &xs[v],
        }
    }
}

/// Voxel grid with mask, per-voxel series, stimulus, external field and the
/// shared trend basis.
#[derive(Debug, Clone)]
pub struct FmriDataset {
    pub rows: usize,
    pub cols: usize,
    pub t_len: usize,
    pub m: usize,
    pub d: f64,
    /// row-major grid mask
    pub mask: Vec<bool>,
    /// row-major grid of external-field coefficients
    pub delta: Vec<f64>,
    /// per in-mask voxel series, raster order
    pub series: Vec<Vec<f64>>,
    pub stimulus: Stimulus,
    /// (row, col) of each in-mask voxel
    pub sites: Vec<(usize, usize)>,
    /// T x m trend basis, columns centered and unit-norm
    pub w: DMatrix<f64>,
}

/// Intercept-free Fourier trend basis: sine/cosine pairs at frequencies
/// 1..m/2 over [0, T), columns centered and scaled to unit norm.
pub fn fourier_trend_basis(t_len: usize, m: usize) -> DMatrix<f64> {
    assert!(m % 2 == 0, "trend basis size must be even");
    let mut w = DMatrix::zeros(t_len, m);
    for k in 0..m / 2 {
        let freq = (k + 1) as f64;
        for t in 0..t_len {
            let phase = 2.0 * std::f64::consts::PI * freq * t as f64 / t_len as f64;
            w[(t, 2 * k)] = phase.sin();
            w[(t, 2 * k + 1)] = phase.cos();
        }
    }
    for j in 0..m {
        let mean = w.column(j).sum() / t_len as f64;
        for t in 0..t_len {
            w[(t, j)] -= mean;
        }
        let norm = w.column(j).norm();
        if norm > 0.0 {
            for t in 0..t_len {
                w[(t, j)] /= norm;
            }
        }
    }
    w
}

impl FmriDataset {
    pub fn voxel_count(&self) -> usize {
        self.sites.len()
    }

    pub fn assemble(
        rows: usize,
        cols: usize,
        t_len: usize,
        m: usize,
        d: f64,
        mask: Vec<bool>,
        delta: Vec<f64>,
        series: Vec<Vec<f64>>,
        stimulus: Stimulus,
    ) -> Result<Self> {
        if mask.len() != rows * cols || delta.len() != rows * cols {
            return Err(Error::InvalidInput("mask/delta grid shape mismatch".into()));
        }
        let sites: Vec<(usize, usize)> = (0..rows * cols)
            .filter(|&f| mask[f])
            .map(|f| (f / cols, f % cols))
            .collect();
        if sites.is_empty() {
            return Err(Error::NoInMaskVoxels);
        }
        if series.len() != sites.len() {
            return Err(Error::InvalidInput(format!(
                "signal has {} rows but the mask has {} voxels",
                series.len(),
                sites.len()
            )));
        }
        for (v, s) in series.iter().enumerate() {
            if s.len() != t_len || s.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "voxel {v} series must hold {t_len} finite values"
                )));
            }
        }
        match &stimulus {
            Stimulus::Shared(x) => {
                if x.len() != t_len {
                    return Err(Error::InvalidInput("shared stimulus length mismatch".into()));
                }
                if x.iter().all(|&v| v == 0.0) {
                    return Err(Error::InvalidInput("stimulus is identically zero".into()));
                }
            }
            Stimulus::PerVoxel(xs) => {
                if xs.len() != sites.len() {
                    return Err(Error::InvalidInput("per-voxel stimulus row count mismatch".into()));
                }
                for (v, x) in xs.iter().enumerate() {
                    if x.len() != t_len {
                        return Err(Error::InvalidInput(format!(
                            "stimulus row {v} length mismatch"
                        )));
                    }
                    if x.iter().all(|&val| val == 0.0) {
                        return Err(Error::InvalidInput(format!(
                            "stimulus for voxel {v} is identically zero"
                        )));
                    }
                }
            }
        }
        let w = fourier_trend_basis(t_len, m);
        Ok(FmriDataset {
            rows,
            cols,
            t_len,
            m,
            d,
            mask,
            delta,
            series,
            stimulus,
            sites,
            w,
        })
    }

    /// Load the container from its manifest file.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let text = std::fs::read_to_string(manifest_path)?;
        let mut kv = HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                kv.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| -> Result<&String> {
            kv.get(k)
                .ok_or_else(|| Error::InvalidInput(format!("manifest is missing key `{k}`")))
        };
        let parse_num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::InvalidInput(format!("manifest key `{k}` is not numeric")))
        };
        let rows = parse_num("grid_rows")? as usize;
        let cols = parse_num("grid_cols")? as usize;
        let t_len = parse_num("T")? as usize;
        let m = kv.get("m").map(|v| v.parse().unwrap_or(8)).unwrap_or(8);
        let d = kv.get("d").map(|v| v.parse().unwrap_or(100.0)).unwrap_or(100.0);

        let path_of = |k: &str| -> Result<PathBuf> { Ok(base.join(get(k)?)) };
        let mask_grid = read_numeric_grid(&path_of("mask")?, rows, cols)?;
        let mask: Vec<bool> = mask_grid.iter().map(|&v| v != 0.0).collect();
        let delta = read_numeric_grid(&path_of("delta")?, rows, cols)?;

        let signal_rows = read_numeric_rows(&path_of("signal")?)?;
        let sites: Vec<(usize, usize)> = (0..rows * cols)
            .filter(|&f| mask[f])
            .map(|f| (f / cols, f % cols))
            .collect();
        let mut series = vec![Vec::new(); sites.len()];
        let site_index: HashMap<(usize, usize), usize> = sites
            .iter()
            .enumerate()
            .map(|(v, &rc)| (rc, v))
            .collect();
        for (lineno, row) in signal_rows.iter().enumerate() {
            if row.len() != t_len + 2 {
                return Err(Error::InvalidInput(format!(
                    "signal row {} holds {} values, expected row, col plus {t_len}",
                    lineno + 1,
                    row.len()
                )));
            }
            let rc = (row[0] as usize, row[1] as usize);
            let v = *site_index.get(&rc).ok_or_else(|| {
                Error::InvalidInput(format!("signal row names out-of-mask voxel {rc:?}"))
            })?;
            series[v] = row[2..].to_vec();
        }
        if series.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidInput("signal is missing rows for in-mask voxels".into()));
        }

        let stim_rows = read_numeric_rows(&path_of("stimulus")?)?;
        let stimulus = if stim_rows.iter().all(|r| r.len() == 1) {
            Stimulus::Shared(stim_rows.iter().map(|r| r[0]).collect())
        } else {
            let mut xs = vec![Vec::new(); sites.len()];
            for row in &stim_rows {
                if row.len() != t_len + 2 {
                    return Err(Error::InvalidInput(
                        "per-voxel stimulus rows must carry row, col plus T values".into(),
                    ));
                }
                let rc = (row[0] as usize, row[1] as usize);
                let v = *site_index.get(&rc).ok_or_else(|| {
                    Error::InvalidInput(format!("stimulus row names out-of-mask voxel {rc:?}"))
                })?;
                xs[v] = row[2..].to_vec();
            }
            Stimulus::PerVoxel(xs)
        };

        Self::assemble(rows, cols, t_len, m, d, mask, delta, series, stimulus)
    }

    /// Write the container (manifest plus payloads) into a directory.
    pub fn save(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let mask_csv = format!("{name}_mask.csv");
        let delta_csv = format!("{name}_delta.csv");
        let stim_csv = format!("{name}_stimulus.csv");
        let signal_csv = format!("{name}_signal.csv");

        write_grid(&dir.join(&mask_csv), self.rows, self.cols, |r, c| {
            if self.mask[r * self.cols + c] {
                "1".into()
            } else {
                "0".into()
            }
        })?;
        write_grid(&dir.join(&delta_csv), self.rows, self.cols, |r, c| {
            format!("{}", self.delta[r * self.cols + c])
        })?;

        let mut stim = String::new();
        match &self.stimulus {
            Stimulus::Shared(x) => {
                for v in x {
                    writeln!(stim, "{v}").unwrap();
                }
            }
            Stimulus::PerVoxel(xs) => {
                for (v, x) in xs.iter().enumerate() {
                    let (r, c) = self.sites[v];
                    write!(stim, "{r},{c}").unwrap();
                    for val in x {
                        write!(stim, ",{val}").unwrap();
                    }
                    writeln!(stim).unwrap();
                }
            }
        }
        std::fs::write(dir.join(&stim_csv), stim)?;

        let mut signal = String::new();
        for (v, s) in self.series.iter().enumerate() {
            let (r, c) = self.sites[v];
            write!(signal, "{r},{c}").unwrap();
            for val in s {
                write!(signal, ",{val}").unwrap();
            }
            writeln!(signal).unwrap();
        }
        std::fs::write(dir.join(&signal_csv), signal)?;

        let manifest = format!(
            "grid_rows={}\ngrid_cols={}\nT={}\nm={}\nd={}\nmask={}\ndelta={}\nstimulus={}\nsignal={}\n",
            self.rows, self.cols, self.t_len, self.m, self.d, mask_csv, delta_csv, stim_csv, signal_csv
        );
        let path = dir.join(format!("{name}.manifest"));
        std::fs::write(&path, manifest)?;
        Ok(path)
    }
}

fn parse_cell(path: &Path, row: usize, col: usize, cell: &str) -> Result<f64> {
    cell.trim().parse().map_err(|_| Error::Parse {
        path: path.display().to_string(),
        row,
        col,
        msg: format!("`{}` is not a number", cell.trim()),
    })
}

/// Read a rows x cols numeric grid; a non-numeric first line is treated as a
/// header and skipped.
fn read_numeric_grid(path: &Path, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let all = read_numeric_rows(path)?;
    if all.len() != rows {
        return Err(Error::InvalidInput(format!(
            "{}: expected {rows} grid rows, found {}",
            path.display(),
            all.len()
        )));
    }
    let mut out = Vec::with_capacity(rows * cols);
    for (r, row) in all.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::InvalidInput(format!(
                "{}: row {} holds {} values, expected {cols}",
                path.display(),
                r + 1,
                row.len()
            )));
        }
        out.extend_from_slice(row);
    }
    Ok(out)
}

fn read_numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        // tolerate one header line
        if lineno == 0 && cells.iter().any(|c| c.trim().parse::<f64>().is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            row.push(parse_cell(path, lineno + 1, c + 1, cell)?);
        }
        out.push(row);
    }
    Ok(out)
}

fn write_grid<F: Fn(usize, usize) -> String>(
    path: &Path,
    rows: usize,
    cols: usize,
    cell: F,
) -> Result<()> {
    let mut text = String::new();
    for r in 0..rows {
        let line: Vec<String> = (0..cols).map(|c| cell(r, c)).collect();
        writeln!(text, "{}", line.join(",")).unwrap();
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_basis_is_centered_and_unit_norm() {
        let w = fourier_trend_basis(63, 8);
        assert_eq!(w.shape(), (63, 8));
        for j in 0..8 {
            assert!(w.column(j).sum().abs() < 1e-10, "column {j} not centered");
            assert!((w.column(j).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn container_round_trips() {
        let rows = 3;
        let cols = 4;
        let t_len = 6;
        let mut mask = vec![true; 12];
        mask[0] = false;
        mask[7] = false;
        let delta = (0..12).map(|i| -2.0 + 0.1 * i as f64).collect::<Vec<_>>();
        let sites: Vec<(usize, usize)> = (0..12usize)
            .filter(|&f| mask[f])
            .map(|f| (f / cols, f % cols))
            .collect();
        let series: Vec<Vec<f64>> = (0..sites.len())
            .map(|v| (0..t_len).map(|t| (v * t) as f64 * 0.25 + 1.0).collect())
            .collect();
        let stimulus = Stimulus::Shared((0..t_len).map(|t| (t as f64 * 0.7).sin() + 0.1).collect());
        let ds = FmriDataset::assemble(
            rows, cols, t_len, 4, 50.0, mask, delta, series, stimulus,
        )
        .unwrap();

        let dir = tempfile::tempdir().unwrap();
        let manifest = ds.save(dir.path(), "toy").unwrap();
        let back = FmriDataset::load(&manifest).unwrap();
        assert_eq!(back.rows, ds.rows);
        assert_eq!(back.mask, ds.mask);
        assert_eq!(back.series, ds.series);
        assert_eq!(back.delta, ds.delta);
        assert_eq!(back.d, ds.d);
        match (&back.stimulus, &ds.stimulus) {
            (Stimulus::Shared(a), Stimulus::Shared(b)) => assert_eq!(a, b),
            _ => panic!("stimulus kind changed in round trip"),
        }
    }

    #[test]
    fn empty_mask_is_rejected() {
        let err = FmriDataset::assemble(
            2,
            2,
            4,
            2,
            10.0,
            vec![false; 4],
            vec![0.0; 4],
            vec![],
            Stimulus::Shared(vec![1.0; 4]),
        );
        assert!(matches!(err, Err(Error::NoInMaskVoxels)));
    }

    #[test]
    fn zero_stimulus_is_rejected() {
        let err = FmriDataset::assemble(
            1,
            2,
            4,
            2,
            10.0,
            vec![true, true],
            vec![0.0; 2],
            vec![vec![1.0; 4], vec![2.0; 4]],
            Stimulus::Shared(vec![0.0; 4]),
        );
        assert!(err.is_err());
    }

    #[test]
    fn parse_error_carries_coordinates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1,2,3\n4,oops,6\n").unwrap();
        match read_numeric_grid(&path, 2, 3) {
            Err(Error::Parse { row, col, .. }) => {
                assert_eq!((row, col), (2, 2));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
