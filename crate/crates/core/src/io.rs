//! CSV ingestion and report emission.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::engine::FitResult;
use crate::error::{Error, Result};
use crate::likelihood::{self, ClusterFit, ModelFamily};
use crate::weights::UnitIndexMap;

/// Column roles in a unit-level CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub id: String,
    pub x_coord: String,
    pub y_coord: String,
    pub response: String,
    /// `None` takes every remaining column, in file order.
    pub covariates: Option<Vec<String>>,
    pub intercept: bool,
}

impl Schema {
    pub fn new(response: impl Into<String>) -> Self {
        Self {
            id: "id".into(),
            x_coord: "coord_x".into(),
            y_coord: "coord_y".into(),
            response: response.into(),
            covariates: None,
            intercept: true,
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    read_dataset(fs::File::open(path)?, schema)
}

/// Parses a headed CSV into a [`Dataset`]. Every used cell must be a
/// finite number; rows keep their file order.
pub fn read_dataset<R: Read>(input: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let id_col = col(&schema.id)?;
    let cx = col(&schema.x_coord)?;
    let cy = col(&schema.y_coord)?;
    let resp = col(&schema.response)?;
    let cov_names: Vec<String> = match &schema.covariates {
        Some(c) => c.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| ![id_col, cx, cy, resp].contains(i))
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let cov_cols = cov_names.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;

    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut y = Vec::new();
    let mut cov = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumericCell {
                    row: row + 1,
                    column: headers[c].clone(),
                    value: raw.to_owned(),
                })
        };
        ids.push(rec.get(id_col).unwrap_or("").to_owned());
        coords.push([num(cx)?, num(cy)?]);
        y.push(num(resp)?);
        for &c in &cov_cols {
            cov.push(num(c)?);
        }
    }
    let index = UnitIndexMap::new(ids)?;
    let n = index.len();
    let p = cov_cols.len();
    let x = DMatrix::from_row_slice(n, p, &cov);
    if schema.intercept {
        Dataset::with_intercept(index, coords, y, &x, cov_names)
    } else {
        Dataset::new(index, coords, y, x, cov_names)
    }
}

/// Writes `id,coord_x,coord_y,<response>,<covariates>` with the intercept
/// column (if named as such) left out.
pub fn write_dataset_csv<W: Write>(d: &Dataset, response: &str, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let keep: Vec<usize> = (0..d.p())
        .filter(|&c| d.names()[c] != crate::dataset::INTERCEPT_NAME)
        .collect();
    let mut header = vec!["id".to_owned(), "coord_x".into(), "coord_y".into(), response.to_owned()];
    header.extend(keep.iter().map(|&c| d.names()[c].clone()));
    wtr.write_record(&header)?;
    for i in 0..d.n() {
        let mut rec = vec![
            d.index().id(i).to_owned(),
            d.coords()[i][0].to_string(),
            d.coords()[i][1].to_string(),
            d.y()[i].to_string(),
        ];
        rec.extend(keep.iter().map(|&c| d.x()[(i, c)].to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One column of the coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub label: String,
    pub fit: ClusterFit,
    pub aic_linear: f64,
    pub aic: f64,
    pub lr_statistic: Option<f64>,
    pub lr_p_value: Option<f64>,
}

impl ColumnSummary {
    pub fn new(label: impl Into<String>, fit: &ClusterFit) -> Self {
        let lr = likelihood::lr_test(fit).ok();
        Self {
            label: label.into(),
            aic_linear: fit.aic_linear(),
            aic: fit.aic(),
            lr_statistic: lr.map(|l| l.0),
            lr_p_value: lr.map(|l| l.1),
            fit: fit.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub covariates: Vec<String>,
    pub unit_ids: Vec<String>,
    pub pooled: ColumnSummary,
    pub clusters: Vec<ColumnSummary>,
    pub result: FitResult,
}

impl Report {
    pub fn new(result: &FitResult, pooled: &ClusterFit, dataset: &Dataset) -> Self {
        Self {
            covariates: dataset.names().to_vec(),
            unit_ids: dataset.index().ids().to_vec(),
            pooled: ColumnSummary::new("Pooled", pooled),
            clusters: result
                .fits
                .iter()
                .enumerate()
                .map(|(c, f)| ColumnSummary::new(format!("K={}", c + 1), f))
                .collect(),
            result: result.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Coefficient table in the layout `Pooled, K=1, ..., K=k`, values
    /// rounded to two decimals.
    pub fn text_table(&self) -> String {
        let columns: Vec<&ColumnSummary> = std::iter::once(&self.pooled).chain(&self.clusters).collect();
        let mut rows: Vec<(String, Vec<String>)> = Vec::new();
        let labels = coefficient_labels(&self.pooled.fit, &self.covariates);
        for (r, label) in labels.iter().enumerate() {
            let mut est = Vec::new();
            let mut se = Vec::new();
            for c in &columns {
                let (e, s) = coefficient_cells(&c.fit, self.covariates.len(), &self.pooled.fit.lagged_columns, r);
                est.push(e);
                se.push(s);
            }
            rows.push((label.clone(), est));
            rows.push((String::new(), se));
        }
        let sep = rows.len();
        let cell = |f: &dyn Fn(&ColumnSummary) -> String| columns.iter().map(|c| f(c)).collect::<Vec<_>>();
        rows.push(("Num. obs.".into(), cell(&|c| c.fit.n_units.to_string())));
        rows.push(("Parameters".into(), cell(&|c| c.fit.n_params().to_string())));
        rows.push(("Log Likelihood".into(), cell(&|c| format!("{:.2}", c.fit.loglik))));
        rows.push(("AIC (Linear model)".into(), cell(&|c| format!("{:.2}", c.aic_linear))));
        rows.push(("AIC (Spatial model)".into(), cell(&|c| format!("{:.2}", c.aic))));
        rows.push((
            "LR test: statistic".into(),
            cell(&|c| c.lr_statistic.map_or("-".into(), |v| format!("{v:.2}"))),
        ));
        rows.push((
            "LR test: p-value".into(),
            cell(&|c| c.lr_p_value.map_or("-".into(), |v| format!("{v:.2}"))),
        ));

        let head: Vec<String> = columns.iter().map(|c| c.label.clone()).collect();
        let lw = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut cw = vec![0; columns.len()];
        for cells in std::iter::once(&head).chain(rows.iter().map(|r| &r.1)) {
            for (w, c) in cw.iter_mut().zip(cells) {
                *w = (*w).max(c.len());
            }
        }
        let total = lw + cw.iter().map(|w| w + 2).sum::<usize>();
        let line = |out: &mut String, label: &str, cells: &[String]| {
            let _ = write!(out, "{label:<lw$}");
            for (c, w) in cells.iter().zip(&cw) {
                let _ = write!(out, "  {c:<w$}");
            }
            out.push('\n');
        };
        let mut out = String::new();
        let rule = "-".repeat(total);
        out.push_str(&rule);
        out.push('\n');
        line(&mut out, "", &head);
        out.push_str(&rule);
        out.push('\n');
        for (i, (label, cells)) in rows.iter().enumerate() {
            if i == sep {
                out.push_str(&rule);
                out.push('\n');
            }
            line(&mut out, label, cells);
        }
        out.push_str(&rule);
        out.push('\n');
        out.push_str("Statistical significance: ***pv<0.001; **pv<0.01; *pv<0.05\n");
        out
    }

    /// Table plus run metadata.
    pub fn text(&self) -> String {
        let r = &self.result;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "family = {}, K = {}, phi = {}, seed = {}",
            r.config.family, r.config.k, r.config.phi, r.config.seed
        );
        out.push('\n');
        out.push_str(&self.text_table());
        out.push('\n');
        let _ = writeln!(out, "Composite log likelihood: {:.2}", r.total_loglik);
        let _ = writeln!(out, "Composite parameters:     {}", r.n_params);
        let _ = writeln!(out, "Composite AIC:            {:.2}", r.aic);
        let _ = writeln!(out, "Composite BIC:            {:.2}", r.bic);
        let _ = writeln!(out, "Penalized objective:      {:.2}", r.penalized_objective);
        let _ = writeln!(out, "Same-cluster neighbour pairs: {}", r.same_cluster_pairs);
        let _ = writeln!(out, "Iterations: {} (stopped by {})", r.iterations, r.converged_by.as_str());
        if !r.non_monotone_iterations.is_empty() {
            let its: Vec<String> = r.non_monotone_iterations.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "Objective decreased at iterations: {}", its.join(", "));
        }
        for w in &r.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

/// Row labels: covariates, SLX lags (`W*name`), then the spatial parameter.
fn coefficient_labels(fit: &ClusterFit, names: &[String]) -> Vec<String> {
    let mut v = names.to_vec();
    if fit.family == ModelFamily::Slx {
        v.extend(fit.lagged_columns.iter().map(|&c| format!("W*{}", names[c])));
    }
    if let Some(s) = fit.family.spatial_symbol() {
        v.push(s.to_owned());
    }
    v
}

fn stars(p: Option<f64>) -> &'static str {
    match p {
        Some(p) if p < 0.001 => "***",
        Some(p) if p < 0.01 => "**",
        Some(p) if p < 0.05 => "*",
        _ => "",
    }
}

/// Estimate and `(SE)` cells of row `r` for `fit`. Rows follow
/// [`coefficient_labels`] of the pooled fit, whose SLX lag columns are
/// `lag_rows`; lags a cluster dropped print blank.
fn coefficient_cells(fit: &ClusterFit, p: usize, lag_rows: &[usize], r: usize) -> (String, String) {
    let spatial_first = usize::from(fit.has_free_spatial_param());
    let se_at = |i: usize| fit.std_errors.as_ref().and_then(|s| s.get(i).copied());
    let (est, se) = if r < p {
        (fit.theta[r], se_at(spatial_first + r))
    } else if fit.family == ModelFamily::Slx {
        match fit.lagged_columns.iter().position(|&c| Some(&c) == lag_rows.get(r - p)) {
            Some(j) => (fit.theta[p + j], se_at(p + j)),
            None => return (String::new(), String::new()),
        }
    } else if fit.has_free_spatial_param() {
        (fit.spatial_param, se_at(0))
    } else {
        (fit.spatial_param, None)
    };
    let p_value = se.and_then(|s| likelihood::wald_p_value(est, s));
    (
        format!("{est:.2}{}", stars(p_value)),
        se.map_or(String::new(), |s| format!("({s:.2})")),
    )
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub text: PathBuf,
    pub json: PathBuf,
    pub memberships: PathBuf,
    pub trace: PathBuf,
}

/// Writes `report.txt`, `report.json`, `memberships.csv` and `trace.csv`
/// into `dir`, creating it if needed.
pub fn emit_report(report: &Report, dir: impl AsRef<Path>) -> Result<ReportPaths> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let paths = ReportPaths {
        text: dir.join("report.txt"),
        json: dir.join("report.json"),
        memberships: dir.join("memberships.csv"),
        trace: dir.join("trace.csv"),
    };
    fs::write(&paths.text, report.text())?;
    let mut json = report.to_json()?;
    json.push('\n');
    fs::write(&paths.json, json)?;

    let mut wtr = csv::Writer::from_path(&paths.memberships)?;
    wtr.write_record(["unit_id", "cluster"])?;
    for (id, c) in report.unit_ids.iter().zip(report.result.assignment.one_based()) {
        wtr.write_record([id.as_str(), &c.to_string()])?;
    }
    wtr.flush()?;

    let r = &report.result;
    let mut wtr = csv::Writer::from_path(&paths.trace)?;
    wtr.write_record(["iteration", "objective", "loglik", "decreased"])?;
    for (i, (o, l)) in r.objective_trace.iter().zip(&r.loglik_trace).enumerate() {
        let it = i + 1;
        wtr.write_record([
            it.to_string(),
            o.to_string(),
            l.to_string(),
            r.non_monotone_iterations.contains(&it).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(paths)
}
