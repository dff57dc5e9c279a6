//! File formats: the CSV layouts for curves, grids, responses and
//! predictions, the JSON document for fitted models, and the CSV
//! renderers for benchmark output.
//!
//! Curves file: n rows of m comma-separated values, no header. Grid file:
//! `point,weight` columns with that header. Responses file: one value per
//! line. All values are 64-bit floats with a `.` decimal separator;
//! everything written uses 17 significant digits so a read-back is
//! bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::apls::AplsModel;
use crate::bench::{BenchRecord, CurveSource, RateRow, SummaryRow};
use crate::classic::ClassicPlsModel;
use crate::error::{Error, Result};
use crate::pca::PcaModel;
use crate::space::{assemble_slope, check_same_grid, inner_product, Curve, Grid};

fn parse_field(path: &Path, line: usize, column: usize, field: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Csv {
        path: path.display().to_string(),
        line,
        column,
        message: format!("expected a number, found {field:?}"),
    })
}

/// Reads a curves CSV: every row one curve, all rows the same length.
pub fn read_curves_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (li, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (ci, field) in line.split(',').enumerate() {
            row.push(parse_field(path, li + 1, ci + 1, field)?);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Csv {
                    path: path.display().to_string(),
                    line: li + 1,
                    column: row.len(),
                    message: format!("row has {} values, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv {
            path: path.display().to_string(),
            line: 1,
            column: 1,
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

/// Reads a grid CSV with the header `point,weight`. The interval is the
/// span of the points.
pub fn read_grid_csv(path: impl AsRef<Path>) -> Result<Arc<Grid>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim().eq_ignore_ascii_case("point,weight") => {}
        _ => {
            return Err(Error::Csv {
                path: path.display().to_string(),
                line: 1,
                column: 1,
                message: "expected header `point,weight`".into(),
            })
        }
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (li, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let p = fields.next().unwrap_or("");
        let w = fields.next().ok_or_else(|| Error::Csv {
            path: path.display().to_string(),
            line: li + 1,
            column: 2,
            message: "missing weight column".into(),
        })?;
        points.push(parse_field(path, li + 1, 1, p)?);
        weights.push(parse_field(path, li + 1, 2, w)?);
    }
    let interval = (
        *points.first().ok_or_else(|| Error::Csv {
            path: path.display().to_string(),
            line: 2,
            column: 1,
            message: "no grid rows".into(),
        })?,
        *points.last().unwrap(),
    );
    Grid::new(points, weights, interval)
}

/// Reads a responses CSV: one value per line.
pub fn read_responses_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_field(path, li + 1, 1, line)?);
    }
    Ok(out)
}

/// Loads an external curve source: the grid (explicit, or integer
/// abscissae 1..=m with trapezoid weights when absent) and the raw rows.
pub fn read_curve_rows(source: &CurveSource) -> Result<(Arc<Grid>, Vec<Vec<f64>>)> {
    let rows = read_curves_csv(&source.curves_csv)?;
    let m = rows[0].len();
    let grid = match &source.grid_csv {
        Some(path) => {
            let grid = read_grid_csv(path)?;
            if grid.len() != m {
                return Err(Error::GridMismatch(format!(
                    "grid has {} points but curves have {} columns",
                    grid.len(),
                    m
                )));
            }
            grid
        }
        None => Grid::uniform_trapezoid(1.0, m as f64, m)?,
    };
    Ok((grid, rows))
}

/// Formats a float with 17 significant digits (round-trips exactly).
pub fn format_full(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_curves_csv(path: impl AsRef<Path>, curves: &[Curve]) -> Result<()> {
    let mut out = String::new();
    for c in curves {
        let mut first = true;
        for v in c.values() {
            if !first {
                out.push(',');
            }
            out.push_str(&format_full(*v));
            first = false;
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_grid_csv(path: impl AsRef<Path>, grid: &Grid) -> Result<()> {
    let mut out = String::from("point,weight\n");
    for (p, w) in grid.points().iter().zip(grid.weights()) {
        let _ = writeln!(out, "{},{}", format_full(*p), format_full(*w));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_responses_csv(path: impl AsRef<Path>, responses: &[f64]) -> Result<()> {
    let mut out = String::new();
    for y in responses {
        out.push_str(&format_full(*y));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Renders predictions, one per line, 17 significant digits.
pub fn render_predictions(predictions: &[f64]) -> String {
    let mut out = String::new();
    for p in predictions {
        out.push_str(&format_full(*p));
        out.push('\n');
    }
    out
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders benchmark records with the fixed header
/// `method,p,replicate,pe,ise,pe_hat,error`; missing values are empty.
pub fn render_records_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("method,p,replicate,pe,ise,pe_hat,error\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method.as_str(),
            r.p,
            r.replicate,
            opt_field(r.pe),
            opt_field(r.ise),
            opt_field(r.pe_hat),
            r.error.as_deref().unwrap_or(""),
        );
    }
    out
}

/// Renders the rate table with the fixed header `n,j,median_err,h_err,slope`.
pub fn render_rates_csv(rows: &[RateRow]) -> String {
    let mut out = String::from("n,j,median_err,h_err,slope\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.n, r.j, r.median_err, r.h_err, r.slope);
    }
    out
}

/// Renders the quartile summary with the header
/// `method,p,metric,q1,median,q3`.
pub fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("method,p,metric,q1,median,q3\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method.as_str(),
            r.p,
            r.metric,
            r.q1,
            r.median,
            r.q3
        );
    }
    out
}

/// The one JSON document shape shared by every fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub variant: String,
    pub p: usize,
    pub grid: Grid,
    pub mean_curve: Vec<f64>,
    pub mean_y: f64,
    /// p rows of m values.
    pub basis: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
}

impl ModelDocument {
    pub fn from_apls(model: &AplsModel) -> ModelDocument {
        ModelDocument {
            variant: model.variant().as_str().to_string(),
            p: model.p(),
            grid: model.mean_curve().grid().as_ref().clone(),
            mean_curve: model.mean_curve().values().to_vec(),
            mean_y: model.mean_y(),
            basis: model.basis().iter().map(|c| c.values().to_vec()).collect(),
            coefficients: model.coefficients().to_vec(),
        }
    }

    pub fn from_classic(model: &ClassicPlsModel) -> ModelDocument {
        ModelDocument {
            variant: "classic".to_string(),
            p: model.p(),
            grid: model.mean_curve().grid().as_ref().clone(),
            mean_curve: model.mean_curve().values().to_vec(),
            mean_y: model.mean_y(),
            basis: model
                .weight_curves()
                .iter()
                .map(|c| c.values().to_vec())
                .collect(),
            coefficients: model.slope_coefficients(),
        }
    }

    pub fn from_pca(model: &PcaModel) -> ModelDocument {
        ModelDocument {
            variant: "pca".to_string(),
            p: model.p(),
            grid: model.mean_curve().grid().as_ref().clone(),
            mean_curve: model.mean_curve().values().to_vec(),
            mean_y: model.mean_y(),
            basis: model
                .eigensystem()
                .eigenfunctions()
                .iter()
                .take(model.p())
                .map(|c| c.values().to_vec())
                .collect(),
            coefficients: model.coefficients().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<ModelDocument> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuilds the prediction rule: slope assembled from basis and
    /// coefficients exactly as the fitters assemble it.
    pub fn into_predictor(self) -> Result<LoadedModel> {
        let grid = Grid::new(
            self.grid.points().to_vec(),
            self.grid.weights().to_vec(),
            self.grid.interval(),
        )?;
        if self.basis.len() != self.p || self.coefficients.len() != self.p {
            return Err(Error::InvalidInput(format!(
                "document claims order {} but has {} basis curves and {} coefficients",
                self.p,
                self.basis.len(),
                self.coefficients.len()
            )));
        }
        let basis: Vec<Curve> = self
            .basis
            .into_iter()
            .map(|v| Curve::new(grid.clone(), v))
            .collect::<Result<_>>()?;
        let mean_curve = Curve::new(grid, self.mean_curve)?;
        let slope = assemble_slope(&basis, &self.coefficients)?;
        Ok(LoadedModel {
            variant: self.variant,
            mean_curve,
            mean_y: self.mean_y,
            slope,
        })
    }
}

/// A model reloaded from its JSON document, ready to predict.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub variant: String,
    pub mean_curve: Curve,
    pub mean_y: f64,
    pub slope: Curve,
}

impl LoadedModel {
    pub fn predict(&self, x: &Curve) -> Result<f64> {
        check_same_grid(self.mean_curve.grid(), x.grid())?;
        let deviation = x.sub(&self.mean_curve)?;
        Ok(self.mean_y + inner_product(&deviation, &self.slope)?)
    }
}
