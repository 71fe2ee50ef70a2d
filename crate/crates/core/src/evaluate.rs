//! Scoring a fitted model against a known generating system.

use crate::error::{Error, Result};
use crate::gc::{
    decide_network, inclusion_probabilities, one_step_predictions, r_squared, score_network, DecisionConfig, GcNetwork, MetricsReport,
};
use crate::sampler::PosteriorDraws;
use crate::tensor::{Matrix, Vector};
use crate::var::{GcTruth, PanelData};

/// Posterior-mean transition matrix, intercept and random intercept of subject `i`.
pub fn posterior_means(draws: &PosteriorDraws, i: usize) -> Result<(Matrix, Vector, Vector)> {
    let empty = || Error::InvalidArgument("no posterior draws".into());
    let b = match draws.mean_b_subject(i) {
        Some(b) => b,
        None => draws.mean_b_fixed().ok_or_else(empty)?,
    };
    let nu = draws.mean_nu().ok_or_else(empty)?;
    let alpha = draws.mean_alpha(i).unwrap_or_else(|| Vector::zeros(draws.k));
    Ok((b, nu, alpha))
}

/// One-step R² over the rows `start(i)..end(i)` of each subject, averaged
/// across the subjects that have such rows.
fn mean_subject_r2(data: &PanelData, draws: &PosteriorDraws, rows: impl Fn(usize) -> (usize, usize)) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..data.n() {
        let (start, end) = rows(i);
        if start >= end {
            continue;
        }
        let (b, nu, alpha) = posterior_means(draws, i)?;
        let fitted = one_step_predictions(&data.subjects[i], &b, &nu, &alpha, start, end)?;
        if let Some(r2) = r_squared(&fitted, &data.subjects[i].rows(start, end - start).into_owned(), None)? {
            total += r2;
            count += 1;
        }
    }
    Ok((count > 0).then(|| total / count as f64))
}

/// Fixed-effects network from the `B_fixed` draws.
pub fn fixed_network(draws: &PosteriorDraws, cfg: &DecisionConfig) -> Result<GcNetwork> {
    decide_network(&inclusion_probabilities(&draws.b_fixed, cfg.delta)?, cfg)
}

/// Network rates of the fixed effects against `truth` (padded or truncated to
/// the fitted lag order), with in-sample R² on the training rows and
/// out-of-sample R² on the holdout rows, both averaged across subjects.
pub fn evaluate_fit(data: &PanelData, draws: &PosteriorDraws, truth: &GcTruth, cfg: &DecisionConfig) -> Result<MetricsReport> {
    if data.k() != draws.k {
        return Err(Error::Dimension(format!("data has K = {}, draws K = {}", data.k(), draws.k)));
    }
    let net = fixed_network(draws, cfg)?;
    let mut report = score_network(&net.decisions, &truth.padded(draws.lags))?;
    let lags = draws.lags;
    let train = data.train_len();
    report.r2_in = mean_subject_r2(data, draws, |_| (lags, train))?;
    report.r2_out = mean_subject_r2(data, draws, |_| (train.max(lags), data.t()))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::LagCube;

    fn draws_with(b: Matrix, nu: Vector) -> PosteriorDraws {
        PosteriorDraws { k: b.nrows(), lags: b.ncols() / b.nrows(), subjects: 1, b_fixed: vec![b], nu: vec![nu], ..Default::default() }
    }

    #[test]
    fn exact_model_scores_perfectly() {
        let b = Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.2, 0.3]);
        let nu = Vector::from_vec(vec![0.1, -0.2]);
        let mut y = Matrix::zeros(30, 2);
        y[(0, 0)] = 1.0;
        y[(0, 1)] = -1.0;
        for t in 1..30 {
            let next = &nu + &b * y.row(t - 1).transpose();
            y.set_row(t, &next.transpose());
        }
        let data = PanelData::new(vec![y], 10).unwrap();
        let truth = GcTruth { edges: LagCube::from_fn(1, 2, |_, r, c| b[(r, c)] != 0.0) };
        let m = evaluate_fit(&data, &draws_with(b, nu), &truth, &DecisionConfig::default()).unwrap();
        assert_eq!((m.tpr, m.tnr), (100.0, 100.0));
        assert!((m.r2_in.unwrap() - 1.0).abs() < 1e-12);
        assert!((m.r2_out.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_holdout_means_no_out_of_sample_r2() {
        let y = Matrix::from_fn(20, 1, |t, _| (t as f64).sin());
        let data = PanelData::new(vec![y], 0).unwrap();
        let truth = GcTruth { edges: LagCube::filled(1, 1, true) };
        let m = evaluate_fit(&data, &draws_with(Matrix::from_element(1, 1, 0.5), Vector::zeros(1)), &truth, &DecisionConfig::default())
            .unwrap();
        assert!(m.r2_in.is_some());
        assert_eq!(m.r2_out, None);
    }
}
