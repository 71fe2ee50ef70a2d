use std::path::Path;

use serde::{Deserialize, Serialize};
use tdvar_core::sampler::{pool_draws, resume_chains, select_lags, Chain, PosteriorDraws};
use tdvar_core::var::PanelData;
use tdvar_core::{Matrix, Vector};

use crate::checkpoint::{self, data_digest, Checkpoint};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, read_panel, subject_label, write_rows};

pub const SUMMARY_FILE: &str = "posterior_fixed.csv";
pub const INTERCEPT_FILE: &str = "intercepts.csv";
pub const LAGS_FILE: &str = "lags.csv";
pub const RANKS_FILE: &str = "ranks.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

pub fn subject_summary_file(i: usize) -> String {
    format!("posterior_{}.csv", subject_label(i))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub lag: usize,
    pub row: usize,
    pub col: usize,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub lag: usize,
    pub row: usize,
    pub col: usize,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterceptRow {
    pub effect: String,
    pub row: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagRow {
    pub lag: usize,
    pub active: u8,
    pub max_inclusion: f64,
    pub slice_inclusion: f64,
    pub row_norm_mean: f64,
    pub row_norm_median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub chain: usize,
    pub iteration: usize,
    pub rank1: usize,
    pub rank2: usize,
    pub rank3: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub chain: usize,
    pub iterations: usize,
    pub draws: usize,
    pub unstable_draws: usize,
    pub prune_events: usize,
    pub sigma2_mean: f64,
    pub rank1: usize,
    pub rank2: usize,
    pub rank3: usize,
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(draws: &[Matrix], k: usize) -> Vec<SummaryRow> {
    let lags = draws[0].ncols() / k;
    let mut out = Vec::with_capacity(lags * k * k);
    let mut values = Vec::with_capacity(draws.len());
    for l in 0..lags {
        for r in 0..k {
            for c in 0..k {
                values.clear();
                values.extend(draws.iter().map(|b| b[(r, l * k + c)]));
                let (mean, sd) = mean_sd(&values);
                values.sort_by(f64::total_cmp);
                out.push(SummaryRow {
                    lag: l + 1,
                    row: r + 1,
                    col: c + 1,
                    mean,
                    sd,
                    q025: quantile(&values, 0.025),
                    q500: quantile(&values, 0.5),
                    q975: quantile(&values, 0.975),
                });
            }
        }
    }
    out
}

fn mean_rows(b: &Matrix, k: usize) -> Vec<MeanRow> {
    let mut out = Vec::new();
    for l in 0..b.ncols() / k {
        for r in 0..k {
            for c in 0..k {
                out.push(MeanRow { lag: l + 1, row: r + 1, col: c + 1, mean: b[(r, l * k + c)] });
            }
        }
    }
    out
}

fn intercept_rows(effect: &str, draws: &[&Vector], out: &mut Vec<InterceptRow>) {
    let k = draws[0].len();
    for r in 0..k {
        let values: Vec<f64> = draws.iter().map(|v| v[r]).collect();
        let (mean, sd) = mean_sd(&values);
        out.push(InterceptRow { effect: effect.into(), row: r + 1, mean, sd });
    }
}

fn write_outputs(out: &Path, cfg: &RunConfig, ckpt: &Checkpoint) -> CliResult<PosteriorDraws> {
    let draws = pool_draws(&ckpt.chains)?;
    if draws.is_empty() {
        return Err(CliError::Data("the run kept no posterior draws".into()));
    }
    let k = draws.k;
    write_rows(&out.join(SUMMARY_FILE), &summarize(&draws.b_fixed, k))?;
    for i in 0..draws.subjects {
        if let Some(b) = draws.mean_b_subject(i) {
            write_rows(&out.join(subject_summary_file(i)), &mean_rows(&b, k))?;
        }
    }
    let mut intercepts = Vec::new();
    intercept_rows("fixed", &draws.nu.iter().collect::<Vec<_>>(), &mut intercepts);
    if !draws.alpha.is_empty() {
        for i in 0..draws.subjects {
            intercept_rows(&subject_label(i), &draws.alpha.iter().map(|a| &a[i]).collect::<Vec<_>>(), &mut intercepts);
        }
    }
    write_rows(&out.join(INTERCEPT_FILE), &intercepts)?;

    let report = select_lags(&draws, &cfg.decision()?)?;
    let lags: Vec<LagRow> = (0..draws.lags)
        .map(|l| LagRow {
            lag: l + 1,
            active: u8::from(report.active[l]),
            max_inclusion: report.max_inclusion[l],
            slice_inclusion: report.slice_inclusion[l],
            row_norm_mean: report.row_norm_mean[l],
            row_norm_median: report.row_norm_median[l],
        })
        .collect();
    write_rows(&out.join(LAGS_FILE), &lags)?;

    let mut ranks = Vec::new();
    let mut diagnostics = Vec::new();
    for (c, chain) in ckpt.chains.iter().enumerate() {
        let d = &chain.draws;
        for (it, r) in d.ranks.iter().enumerate() {
            ranks.push(RankRow { chain: c + 1, iteration: it + 1, rank1: r[0], rank2: r[1], rank3: r[2] });
        }
        let [r1, r2, r3] = chain.state.ranks();
        diagnostics.push(DiagnosticsRow {
            chain: c + 1,
            iterations: chain.iteration,
            draws: d.len(),
            unstable_draws: d.unstable_count(),
            prune_events: d.prune_events.len(),
            sigma2_mean: d.mean_sigma2().unwrap_or(f64::NAN),
            rank1: r1,
            rank2: r2,
            rank3: r3,
        });
    }
    write_rows(&out.join(RANKS_FILE), &ranks)?;
    write_rows(&out.join(DIAGNOSTICS_FILE), &diagnostics)?;
    Ok(draws)
}

fn validate(cfg: &RunConfig, data: &PanelData) -> CliResult<()> {
    cfg.sampler().validate(data.k()).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.decision()?;
    if data.train_len() <= cfg.lags {
        return Err(CliError::Config(format!(
            "training length {} (T = {}, holdout {}) must exceed lags = {}",
            data.train_len(),
            data.t(),
            data.holdout,
            cfg.lags
        )));
    }
    if cfg.chains == 0 {
        return Err(CliError::Config("chains must be positive".into()));
    }
    Ok(())
}

/// Runs (or resumes) the chains up to `halt_at` (or to the end), always
/// writing the checkpoint, and writes the summaries once every chain is done.
pub fn run(cfg: &RunConfig, out: &Path, resume: Option<&Path>) -> CliResult<Vec<(&'static str, String)>> {
    let data = read_panel(&cfg.required_path("data_dir")?, cfg.holdout)?;
    validate(cfg, &data)?;
    let digest = data_digest(&data);
    let mut ckpt = match resume {
        Some(path) => {
            let mut c = checkpoint::load(path)?;
            if !c.config.same_run(cfg) {
                return Err(CliError::Checkpoint(format!("{} was written with a different configuration", path.display())));
            }
            if c.data_digest != digest {
                return Err(CliError::Checkpoint(format!("{} was written for different data", path.display())));
            }
            c.config = cfg.clone();
            c
        }
        None => {
            let sampler = cfg.sampler();
            let chains = (0..cfg.chains).map(|c| Chain::with_stream(&data, sampler.clone(), c as u64)).collect::<Result<_, _>>()?;
            Checkpoint { config: cfg.clone(), names: data.names.clone(), data_digest: digest, chains }
        }
    };
    let until = if cfg.halt_at > 0 { cfg.halt_at.min(cfg.iterations) } else { cfg.iterations };
    resume_chains(&data, &mut ckpt.chains, until)?;
    ensure_dir(out)?;
    checkpoint::save(&out.join(checkpoint::FILE_NAME), &ckpt)?;
    if !ckpt.finished() {
        return Ok(vec![("status", format!("halted at iteration {}", ckpt.iteration()))]);
    }
    let draws = write_outputs(out, cfg, &ckpt)?;
    Ok(vec![("status", "complete".into()), ("draws", draws.len().to_string())])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate_between_order_statistics() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert!((quantile(&v, 0.125) - 1.5).abs() < 1e-15);
        assert_eq!(quantile(&[7.0], 0.975), 7.0);
    }

    #[test]
    fn summary_of_constant_draws_has_zero_spread() {
        let b = Matrix::from_row_slice(1, 2, &[0.5, -0.25]);
        let rows = summarize(&[b.clone(), b.clone(), b], 1);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[1].lag, rows[1].mean, rows[1].sd), (2, -0.25, 0.0));
        assert_eq!((rows[0].q025, rows[0].q975), (0.5, 0.5));
    }
}
