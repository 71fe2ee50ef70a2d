//! CSV readers and writers. Indices in every table are 1-based: `lag` is `ℓ`,
//! `row` the receiving series and `col` the sending series of `a_{ℓ,row,col}`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use tdvar_core::var::{GcTruth, PanelData, PanelParams, PanelTruth, VarParams};
use tdvar_core::{LagCube, Matrix, Vector};

use crate::error::{CliError, CliResult};

pub fn subject_file(i: usize) -> String {
    format!("subject_{:03}.csv", i + 1)
}

pub fn subject_label(i: usize) -> String {
    format!("subject_{:03}", i + 1)
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let msg = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        _ => CliError::Data(format!("{}: {msg}", path.display())),
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

/// Writes one `subject_XXX.csv` per subject, headed by the series names.
pub fn write_panel(dir: &Path, data: &PanelData) -> CliResult<()> {
    ensure_dir(dir)?;
    for (i, y) in data.subjects.iter().enumerate() {
        let path = dir.join(subject_file(i));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        w.write_record(&data.names).map_err(|e| csv_error(&path, e))?;
        for row in y.row_iter() {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

fn read_series(path: &Path) -> CliResult<(Vec<String>, Matrix)> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(|e| csv_error(path, e))?;
    let names: Vec<String> = r.headers().map_err(|e| csv_error(path, e))?.iter().map(|h| h.trim().to_string()).collect();
    let k = names.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = n + 2;
        if rec.len() != k {
            return Err(CliError::Data(format!("{} row {line}: expected {k} fields, found {}", path.display(), rec.len())));
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                CliError::Data(format!("{} row {line} column {} (`{}`): `{cell}` is not a number", path.display(), c + 1, names[c]))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 || k == 0 {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok((names, Matrix::from_row_slice(rows, k, &values)))
}

/// The `subject_*.csv` files of `dir`, in name order.
pub fn panel_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("subject_") && name.ends_with(".csv") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("{}: no subject_*.csv files", dir.display())));
    }
    Ok(files)
}

/// Reads every subject file of `dir` into a panel whose last `holdout` rows
/// are held out.
pub fn read_panel(dir: &Path, holdout: usize) -> CliResult<PanelData> {
    let files = panel_files(dir)?;
    let mut names: Option<Vec<String>> = None;
    let mut subjects = Vec::with_capacity(files.len());
    for path in &files {
        let (h, y) = read_series(path)?;
        match &names {
            None => names = Some(h),
            Some(first) if *first != h => {
                return Err(CliError::Data(format!("header of {} differs from header of {}", path.display(), files[0].display())))
            }
            Some(_) => {}
        }
        if let Some(prev) = subjects.first().map(|m: &Matrix| m.nrows()) {
            if y.nrows() != prev {
                return Err(CliError::Data(format!("{} has {} rows but {} has {prev}", path.display(), y.nrows(), files[0].display())));
            }
        }
        subjects.push(y);
    }
    PanelData::with_names(subjects, holdout, names.unwrap_or_default()).map_err(|e| CliError::Data(e.to_string()))
}

/// One coefficient, intercept or noise variance of a generating system.
/// `effect` is `fixed` or a subject label; `param` is `B`, `nu`, `alpha` or
/// `sigma2`. Unused indices are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub param: String,
    pub effect: String,
    pub lag: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

fn b_rows(param: &str, effect: &str, b: &Matrix, k: usize, out: &mut Vec<ParamRow>) {
    for l in 0..b.ncols() / k {
        for r in 0..k {
            for c in 0..k {
                out.push(ParamRow {
                    param: param.into(),
                    effect: effect.into(),
                    lag: l + 1,
                    row: r + 1,
                    col: c + 1,
                    value: b[(r, l * k + c)],
                });
            }
        }
    }
}

fn vector_rows(param: &str, effect: &str, v: &Vector, out: &mut Vec<ParamRow>) {
    for (r, x) in v.iter().enumerate() {
        out.push(ParamRow { param: param.into(), effect: effect.into(), lag: 0, row: r + 1, col: 0, value: *x });
    }
}

/// Long-format rows of the shared system and every subject's random effects.
pub fn params_to_rows(p: &PanelParams) -> Vec<ParamRow> {
    let k = p.shared.k();
    let mut out = Vec::new();
    b_rows("B", "fixed", &p.shared.b, k, &mut out);
    vector_rows("nu", "fixed", &p.shared.nu, &mut out);
    out.push(ParamRow { param: "sigma2".into(), effect: "fixed".into(), lag: 0, row: 0, col: 0, value: p.shared.sigma2 });
    for (i, b) in p.b_random.iter().enumerate() {
        b_rows("B_random", &subject_label(i), b, k, &mut out);
    }
    for (i, a) in p.alpha.iter().enumerate() {
        vector_rows("alpha", &subject_label(i), a, &mut out);
    }
    out
}

fn subject_index(effect: &str) -> CliResult<usize> {
    effect
        .strip_prefix("subject_")
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .map(|n| n - 1)
        .ok_or_else(|| CliError::Data(format!("unknown effect `{effect}`")))
}

/// Inverse of [`params_to_rows`].
pub fn rows_to_params(rows: &[ParamRow]) -> CliResult<PanelParams> {
    let bad = |m: String| CliError::Data(m);
    let k = rows.iter().filter(|r| r.param == "nu").count();
    let lags = rows.iter().filter(|r| r.param == "B").map(|r| r.lag).max().unwrap_or(0);
    let subjects = rows
        .iter()
        .filter(|r| r.effect != "fixed")
        .map(|r| subject_index(&r.effect).map(|i| i + 1))
        .collect::<CliResult<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    if k == 0 || lags == 0 {
        return Err(bad("parameter table has no B or nu rows".into()));
    }
    let mut b = Matrix::zeros(k, k * lags);
    let mut nu = Vector::zeros(k);
    let mut sigma2 = None;
    let mut b_random = vec![Matrix::zeros(k, k * lags); subjects];
    let mut alpha = vec![Vector::zeros(k); subjects];
    for r in rows {
        let in_b = r.lag >= 1 && r.lag <= lags && r.row >= 1 && r.row <= k && r.col >= 1 && r.col <= k;
        let in_v = r.row >= 1 && r.row <= k;
        match (r.param.as_str(), r.effect.as_str()) {
            ("B", "fixed") if in_b => b[(r.row - 1, (r.lag - 1) * k + r.col - 1)] = r.value,
            ("nu", "fixed") if in_v => nu[r.row - 1] = r.value,
            ("sigma2", "fixed") => sigma2 = Some(r.value),
            ("B_random", e) if in_b => b_random[subject_index(e)?][(r.row - 1, (r.lag - 1) * k + r.col - 1)] = r.value,
            ("alpha", e) if in_v => alpha[subject_index(e)?][r.row - 1] = r.value,
            _ => return Err(bad(format!("unexpected parameter row {r:?}"))),
        }
    }
    let sigma2 = sigma2.ok_or_else(|| bad("parameter table has no sigma2 row".into()))?;
    let shared = VarParams::new(b, nu, sigma2).map_err(|e| bad(e.to_string()))?;
    Ok(PanelParams { shared, b_random, alpha })
}

/// One cell of a true network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub effect: String,
    pub lag: usize,
    pub row: usize,
    pub col: usize,
    pub edge: u8,
}

fn cube_rows(effect: &str, t: &GcTruth, out: &mut Vec<EdgeRow>) {
    for ((l, r, c), e) in t.edges.indexed() {
        out.push(EdgeRow { effect: effect.into(), lag: l + 1, row: r + 1, col: c + 1, edge: u8::from(*e) });
    }
}

pub fn truth_to_rows(t: &PanelTruth) -> Vec<EdgeRow> {
    let mut out = Vec::new();
    cube_rows("fixed", &t.fixed, &mut out);
    for (i, s) in t.subjects.iter().enumerate() {
        cube_rows(&subject_label(i), s, &mut out);
    }
    out
}

/// The network of `effect` from a truth table.
pub fn truth_from_rows(rows: &[EdgeRow], effect: &str) -> CliResult<GcTruth> {
    let mine: Vec<&EdgeRow> = rows.iter().filter(|r| r.effect == effect).collect();
    let lags = mine.iter().map(|r| r.lag).max().unwrap_or(0);
    let k = mine.iter().map(|r| r.row.max(r.col)).max().unwrap_or(0);
    if lags == 0 || k == 0 || mine.len() != lags * k * k || mine.iter().any(|r| r.lag == 0 || r.row == 0 || r.col == 0) {
        return Err(CliError::Data(format!("truth table has no complete network for `{effect}`")));
    }
    let mut edges = LagCube::filled(lags, k, false);
    for r in mine {
        edges.set(r.lag - 1, r.row - 1, r.col - 1, r.edge != 0);
    }
    Ok(GcTruth { edges })
}

/// A metrics cell: a number, `NC` when the method could not be computed, or
/// `-` when it does not apply.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Value(f64),
    NotComputable,
    NotApplicable,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Value(v) => write!(f, "{v}"),
            Cell::NotComputable => f.write_str("NC"),
            Cell::NotApplicable => f.write_str("-"),
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::NotApplicable, Cell::Value)
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "NC" => Ok(Cell::NotComputable),
            "-" => Ok(Cell::NotApplicable),
            _ => s.parse().map(Cell::Value).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub r2_in: Cell,
    pub r2_out: Cell,
    pub tpr: Cell,
    pub tnr: Cell,
    pub fpr: Cell,
    pub fnr: Cell,
}
