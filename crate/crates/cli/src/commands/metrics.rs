use std::path::Path;

use tdvar_core::evaluate::evaluate_fit;
use tdvar_core::gc::{one_step_predictions, r_squared};
use tdvar_core::sampler::pool_draws;
use tdvar_core::var::{fit_ols, OlsFit, PanelData};
use tdvar_core::Vector;

use super::gc::load_finished;
use super::simulate::NETWORK_FILE;
use crate::checkpoint::data_digest;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, read_panel, read_rows, truth_from_rows, write_rows, Cell, EdgeRow, MetricsRow};

pub const METRICS_FILE: &str = "metrics.csv";

fn average(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Least-squares R² per subject averaged across subjects, or `None` when any
/// subject's fit is not computable.
pub fn ols_r2(data: &PanelData, lags: usize) -> CliResult<Option<(Option<f64>, Option<f64>)>> {
    let train = data.train_len();
    let (mut r_in, mut r_out) = (Vec::new(), Vec::new());
    for i in 0..data.n() {
        let OlsFit::Estimate(p) = fit_ols(&data.train(i), lags)? else {
            return Ok(None);
        };
        let y = &data.subjects[i];
        let zero = Vector::zeros(data.k());
        for (start, end, acc) in [(lags, train, &mut r_in), (train.max(lags), data.t(), &mut r_out)] {
            if start < end {
                let fitted = one_step_predictions(y, &p.b, &p.nu, &zero, start, end)?;
                if let Some(r2) = r_squared(&fitted, &y.rows(start, end - start).into_owned(), None)? {
                    acc.push(r2);
                }
            }
        }
    }
    Ok(Some((average(&r_in), average(&r_out))))
}

/// One row for the fitted model and one for the least-squares baseline.
pub fn run(cfg: &RunConfig, out: &Path) -> CliResult<Vec<(&'static str, String)>> {
    let dcfg = cfg.decision()?;
    let truth_rows: Vec<EdgeRow> = read_rows(&cfg.required_path("truth_dir")?.join(NETWORK_FILE))?;
    let truth = truth_from_rows(&truth_rows, "fixed")?;
    let ckpt = load_finished(cfg)?;
    let data_dir = cfg.required_path("data_dir")?;
    let data = read_panel(&data_dir, ckpt.config.holdout)?;
    if data_digest(&data) != ckpt.data_digest {
        return Err(CliError::Data(format!("{} does not hold the data the fit used", data_dir.display())));
    }
    if truth.edges.k() != data.k() {
        return Err(CliError::Data(format!("truth has K = {}, the fit has K = {}", truth.edges.k(), data.k())));
    }
    let draws = pool_draws(&ckpt.chains)?;
    let m = evaluate_fit(&data, &draws, &truth, &dcfg)?;
    let method = if data.n() == 1 { "BTDVAR" } else { "BPTDVAR" };
    let fitted = MetricsRow {
        method: method.into(),
        r2_in: m.r2_in.into(),
        r2_out: m.r2_out.into(),
        tpr: Cell::Value(m.tpr),
        tnr: Cell::Value(m.tnr),
        fpr: Cell::Value(m.fpr),
        fnr: Cell::Value(m.fnr),
    };
    let (r2_in, r2_out) = match ols_r2(&data, draws.lags)? {
        Some((a, b)) => (a.into(), b.into()),
        None => (Cell::NotComputable, Cell::NotComputable),
    };
    let na = Cell::NotApplicable;
    let ols = MetricsRow { method: "OLS".into(), r2_in, r2_out, tpr: na, tnr: na, fpr: na, fnr: na };
    ensure_dir(out)?;
    write_rows(&out.join(METRICS_FILE), &[fitted, ols])?;
    Ok(vec![("t_star", dcfg.t_star().to_string())])
}
