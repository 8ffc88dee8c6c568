//! CSV and JSON persistence for panels, curves, models, draws and study
//! tables.
//!
//! Floats are written with `Display`, which emits the shortest representation
//! that parses back to the identical bits, so serialized grids round-trip
//! exactly. Ingestion errors cite the offending line number.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bvar::PosteriorDraw;
use crate::density::{DensityCurve, MicroPanel, Support};
use crate::error::{FvarError, Result};
use crate::fpca::FpcaModel;
use crate::lqd::LqdCurve;
use crate::numerics::quantile;
use crate::simlab::{McCorrelationTable, MiseCvTable};

/// Write `x,value` rows for a density curve.
pub fn write_density_csv(path: &Path, curve: &DensityCurve) -> Result<()> {
    write_xy_csv(path, curve.grid(), curve.values())
}

/// Read a density curve from `x,value` rows; the grid defines the support.
pub fn read_density_csv(path: &Path) -> Result<DensityCurve> {
    let (xs, ys) = read_xy_csv(path)?;
    let support = Support::new(
        *xs.first().ok_or_else(|| FvarError::Data("empty curve file".to_string()))?,
        *xs.last().unwrap(),
    )?;
    DensityCurve::new(support, xs, ys)
}

/// Write `x,value` rows for an LQD curve.
pub fn write_lqd_csv(path: &Path, curve: &LqdCurve) -> Result<()> {
    write_xy_csv(path, curve.grid01(), curve.values())
}

/// Read an LQD curve from `x,value` rows. The support upper bound is not part
/// of the file format and must be supplied.
pub fn read_lqd_csv(path: &Path, support_sup: f64) -> Result<LqdCurve> {
    let (xs, ys) = read_xy_csv(path)?;
    LqdCurve::new(xs, ys, support_sup)
}

fn write_xy_csv(path: &Path, xs: &[f64], ys: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "x,value")?;
    for (x, y) in xs.iter().zip(ys) {
        writeln!(out, "{x},{y}")?;
    }
    Ok(())
}

fn read_xy_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(File::open(path)?));
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "value" {
        return Err(FvarError::Data(format!(
            "expected header 'x,value' in {}, got '{}'",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let x: f64 = parse_f64(record.get(0), path, line, "x")?;
        let y: f64 = parse_f64(record.get(1), path, line, "value")?;
        xs.push(x);
        ys.push(y);
    }
    Ok((xs, ys))
}

fn parse_f64(field: Option<&str>, path: &Path, line: usize, name: &str) -> Result<f64> {
    let raw = field.ok_or_else(|| {
        FvarError::Data(format!("{}:{line}: missing '{name}' field", path.display()))
    })?;
    raw.trim().parse::<f64>().map_err(|_| {
        FvarError::Data(format!(
            "{}:{line}: cannot parse '{raw}' as a number for '{name}'",
            path.display()
        ))
    })
}

/// Write micro observations as `period,value` rows.
pub fn write_micro_csv(path: &Path, panel: &MicroPanel) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "period,value")?;
    for (period, sample) in panel.periods().iter().zip(panel.samples()) {
        for v in sample {
            writeln!(out, "{period},{v}")?;
        }
    }
    Ok(())
}

/// Read a `period,value` file into a panel.
///
/// Period labels are sorted lexicographically to define time order; the
/// support always comes from the caller, never from the data.
pub fn read_micro_csv(
    path: &Path,
    support: Support,
    min_observations: usize,
) -> Result<MicroPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(File::open(path)?));
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "period" || &headers[1] != "value" {
        return Err(FvarError::Data(format!(
            "expected header 'period,value' in {}, got '{}'",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let period = record
            .get(0)
            .ok_or_else(|| {
                FvarError::Data(format!("{}:{line}: missing period", path.display()))
            })?
            .trim()
            .to_string();
        if period.is_empty() {
            return Err(FvarError::Data(format!(
                "{}:{line}: empty period label",
                path.display()
            )));
        }
        let value = parse_f64(record.get(1), path, line, "value")?;
        if !support.contains(value) {
            return Err(FvarError::Data(format!(
                "{}:{line}: value {value} outside the support [{}, {}]",
                path.display(),
                support.lower,
                support.upper
            )));
        }
        groups.entry(period).or_default().push(value);
    }
    if groups.is_empty() {
        return Err(FvarError::Data(format!(
            "{}: no observations",
            path.display()
        )));
    }
    let periods: Vec<String> = groups.keys().cloned().collect();
    let samples: Vec<Vec<f64>> = groups.into_values().collect();
    MicroPanel::new(periods, samples, support, min_observations)
}

/// Write a macro panel as `period,<name>,...` rows.
pub fn write_macro_csv(
    path: &Path,
    names: &[String],
    periods: &[String],
    values: &DMatrix<f64>,
) -> Result<()> {
    if values.nrows() != periods.len() || values.ncols() != names.len() {
        return Err(FvarError::DimensionMismatch(
            "macro matrix shape does not match labels".to_string(),
        ));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "period,{}", names.join(","))?;
    for (i, period) in periods.iter().enumerate() {
        let row: Vec<String> = (0..names.len()).map(|j| values[(i, j)].to_string()).collect();
        writeln!(out, "{period},{}", row.join(","))?;
    }
    Ok(())
}

/// Read a macro panel; rows are sorted by period label.
pub fn read_macro_csv(path: &Path) -> Result<(Vec<String>, Vec<String>, DMatrix<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(File::open(path)?));
    let headers = reader.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "period" {
        return Err(FvarError::Data(format!(
            "expected header 'period,<series>...' in {}",
            path.display()
        )));
    }
    let names: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
    let mut rows: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() != names.len() + 1 {
            return Err(FvarError::Data(format!(
                "{}:{line}: expected {} fields, got {}",
                path.display(),
                names.len() + 1,
                record.len()
            )));
        }
        let period = record.get(0).unwrap().trim().to_string();
        let mut vals = Vec::with_capacity(names.len());
        for j in 0..names.len() {
            vals.push(parse_f64(record.get(j + 1), path, line, &names[j])?);
        }
        if rows.insert(period.clone(), vals).is_some() {
            return Err(FvarError::Data(format!(
                "{}:{line}: duplicate period '{period}'",
                path.display()
            )));
        }
    }
    if rows.is_empty() {
        return Err(FvarError::Data(format!("{}: no rows", path.display())));
    }
    let periods: Vec<String> = rows.keys().cloned().collect();
    let t = periods.len();
    let n = names.len();
    let mut z = DMatrix::zeros(t, n);
    for (i, vals) in rows.values().enumerate() {
        for j in 0..n {
            z[(i, j)] = vals[j];
        }
    }
    Ok((names, periods, z))
}

/// Which matrix of a posterior draw a columnar file stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawMatrix {
    Pi,
    Omega,
}

/// Write posterior draws in long form: `draw,row,col,value`.
pub fn write_draws_csv(path: &Path, draws: &[PosteriorDraw], which: DrawMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "draw,row,col,value")?;
    for (d, draw) in draws.iter().enumerate() {
        let m = match which {
            DrawMatrix::Pi => &draw.pi,
            DrawMatrix::Omega => &draw.omega,
        };
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                writeln!(out, "{d},{r},{c},{}", m[(r, c)])?;
            }
        }
    }
    Ok(())
}

/// Compact posterior summary: means and pointwise quantiles of the draws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrawsSummary {
    pub n_draws: usize,
    pub pi_mean: Vec<Vec<f64>>,
    pub omega_mean: Vec<Vec<f64>>,
    /// Per quantile level, the matrix of pointwise coefficient quantiles.
    pub pi_quantiles: Vec<(f64, Vec<Vec<f64>>)>,
}

/// Summarize sampled draws into posterior means and band quantiles.
pub fn summarize_draws(draws: &[PosteriorDraw], levels: &[f64]) -> Result<DrawsSummary> {
    let first = draws
        .first()
        .ok_or_else(|| FvarError::Data("no draws to summarize".to_string()))?;
    let (n, m) = (first.pi.nrows(), first.pi.ncols());
    let mut pi_mean = vec![vec![0.0; m]; n];
    let mut omega_mean = vec![vec![0.0; n]; n];
    for draw in draws {
        for r in 0..n {
            for c in 0..m {
                pi_mean[r][c] += draw.pi[(r, c)] / draws.len() as f64;
            }
            for c in 0..n {
                omega_mean[r][c] += draw.omega[(r, c)] / draws.len() as f64;
            }
        }
    }
    let mut pi_quantiles = Vec::new();
    for &level in levels {
        if !(0.0 < level && level < 1.0) {
            return Err(FvarError::BadQuantileLevel(level));
        }
        let mut q = vec![vec![0.0; m]; n];
        for r in 0..n {
            for c in 0..m {
                let vals: Vec<f64> = draws.iter().map(|d| d.pi[(r, c)]).collect();
                q[r][c] = quantile(&vals, level);
            }
        }
        pi_quantiles.push((level, q));
    }
    Ok(DrawsSummary {
        n_draws: draws.len(),
        pi_mean,
        omega_mean,
        pi_quantiles,
    })
}

/// Persist a fitted component model as one JSON document.
pub fn write_fpca_model_json(path: &Path, model: &FpcaModel) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(out, model)?;
    Ok(())
}

pub fn read_fpca_model_json(path: &Path) -> Result<FpcaModel> {
    let file = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(file)?)
}

/// Write the correlation-study table as CSV.
pub fn write_mc_table_csv(path: &Path, table: &McCorrelationTable) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "k,k_resolved_mean,shock,horizon,avg_correlation")?;
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.k_label, row.k_resolved_mean, row.shock, row.horizon, row.avg_correlation
        )?;
    }
    Ok(())
}

/// Write the transform-comparison table as CSV.
pub fn write_mise_table_csv(path: &Path, dgp_label: &str, table: &MiseCvTable) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "dgp,transform,k,avg_mise,ratio")?;
    for row in &table.rows {
        writeln!(
            out,
            "{dgp_label},{},{},{},{}",
            row.transform, row.k, row.avg_mise, row.ratio
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::estimate_density;
    use crate::lqd::lqd_forward;
    use crate::numerics::linspace;
    use proptest::prelude::*;
    use tempfile::tempdir;

    #[test]
    fn density_csv_round_trips_bit_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let support = Support::new(0.0, 6.0).unwrap();
        let sample: Vec<f64> = (0..200).map(|i| 3.0 + 2.0 * ((i as f64) * 0.37).sin()).collect();
        let curve = estimate_density(&sample, support, 128, None).unwrap();
        write_density_csv(&path, &curve).unwrap();
        let back = read_density_csv(&path).unwrap();
        assert_eq!(curve.grid(), back.grid());
        assert_eq!(curve.values(), back.values());
        // exact bitwise equality, not just numeric closeness
        for (a, b) in curve.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn lqd_csv_round_trips_bit_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("lqd.csv");
        let support = Support::new(0.0, 5.0).unwrap();
        let sample: Vec<f64> = (0..300).map(|i| 2.5 + 1.5 * ((i as f64) * 0.13).cos()).collect();
        let curve = estimate_density(&sample, support, 200, None).unwrap();
        let f = lqd_forward(&curve, 150).unwrap();
        write_lqd_csv(&path, &f).unwrap();
        let back = read_lqd_csv(&path, f.support_sup()).unwrap();
        assert_eq!(f.values(), back.values());
        assert_eq!(f.grid01(), back.grid01());
    }

    #[test]
    fn micro_ingestion_sorts_periods_and_reports_line_numbers() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("micro.csv");
        std::fs::write(
            &path,
            "period,value\n2020Q2,1.0\n2020Q1,0.5\n2020Q2,2.0\n2020Q1,1.5\n",
        )
        .unwrap();
        let support = Support::new(0.0, 6.0).unwrap();
        let panel = read_micro_csv(&path, support, 2).unwrap();
        assert_eq!(panel.periods(), &["2020Q1".to_string(), "2020Q2".to_string()]);
        assert_eq!(panel.samples()[0], vec![0.5, 1.5]);

        std::fs::write(&path, "period,value\n2020Q1,1.0\n2020Q1,oops\n").unwrap();
        match read_micro_csv(&path, support, 1) {
            Err(FvarError::Data(msg)) => assert!(msg.contains(":3:"), "got: {msg}"),
            other => panic!("expected data error, got {other:?}"),
        }

        std::fs::write(&path, "period,value\n2020Q1,9.5\n").unwrap();
        match read_micro_csv(&path, support, 1) {
            Err(FvarError::Data(msg)) => assert!(msg.contains("outside the support")),
            other => panic!("expected support error, got {other:?}"),
        }
    }

    #[test]
    fn macro_csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("macro.csv");
        let names = vec!["gdp".to_string(), "unc".to_string()];
        let periods = vec!["t0".to_string(), "t1".to_string(), "t2".to_string()];
        let z = DMatrix::from_row_slice(3, 2, &[1.0, -0.5, 0.25, 0.125, -2.0, 3.5]);
        write_macro_csv(&path, &names, &periods, &z).unwrap();
        let (names2, periods2, z2) = read_macro_csv(&path).unwrap();
        assert_eq!(names, names2);
        assert_eq!(periods, periods2);
        assert_eq!(z, z2);
        // malformed row count (the reader flags ragged rows itself)
        std::fs::write(&path, "period,a,b\nt0,1.0\n").unwrap();
        assert!(read_macro_csv(&path).is_err());
    }

    #[test]
    fn draws_csv_and_summary_are_consistent() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("draws.csv");
        let draws: Vec<PosteriorDraw> = (0..5)
            .map(|i| {
                let pi = DMatrix::from_element(2, 3, i as f64);
                let omega = DMatrix::identity(2, 2) * (1.0 + i as f64);
                PosteriorDraw::from_parameters(pi, omega).unwrap()
            })
            .collect();
        write_draws_csv(&path, &draws, DrawMatrix::Pi).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("draw,row,col,value\n"));
        assert_eq!(text.lines().count(), 1 + 5 * 6);
        let summary = summarize_draws(&draws, &[0.16, 0.84]).unwrap();
        assert_eq!(summary.pi_mean[0][0], 2.0);
        assert_eq!(summary.omega_mean[0][0], 3.0);
        assert_eq!(summary.pi_quantiles.len(), 2);
    }

    #[test]
    fn fpca_model_file_round_trips() {
        use crate::fpca::{fit_fpca, CurvePanel, CurveSpace};
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        let grid = linspace(0.0, 1.0, 50);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| grid.iter().map(|x| (i as f64) * x + (i as f64).sin()).collect())
            .collect();
        let times = (0..10).map(|i| format!("t{i}")).collect();
        let panel = CurvePanel::from_rows(times, grid, rows, CurveSpace::Density).unwrap();
        let model = fit_fpca(&panel, 2).unwrap();
        write_fpca_model_json(&path, &model).unwrap();
        let back = read_fpca_model_json(&path).unwrap();
        assert_eq!(model.basis(), back.basis());
        assert_eq!(model.mean(), back.mean());
        assert_eq!(model.scores(), back.scores());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn arbitrary_floats_survive_the_xy_round_trip(
            raw in proptest::collection::vec(-1e12f64..1e12, 2..40)
        ) {
            let dir = tempdir().unwrap();
            let path = dir.path().join("xy.csv");
            let xs: Vec<f64> = (0..raw.len()).map(|i| i as f64).collect();
            write_xy_csv(&path, &xs, &raw).unwrap();
            let (_, ys) = read_xy_csv(&path).unwrap();
            for (a, b) in raw.iter().zip(&ys) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
