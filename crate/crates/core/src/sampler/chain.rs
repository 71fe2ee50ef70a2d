use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Vector};
use crate::var::{companion_matrix, spectral_radius, PanelData, VarParams};

use super::design::{ModelData, Workspace};
use super::prune::{prune_ranks, ColumnNormWindow, RankReport};
use super::steps::gibbs_sweep;
use super::{PanelState, SamplerConfig};

/// Thinned post-burn-in output of one chain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub k: usize,
    pub lags: usize,
    pub subjects: usize,
    pub b_fixed: Vec<Matrix>,
    /// Per draw, one matrix per subject; empty unless requested.
    pub b_subject: Vec<Vec<Matrix>>,
    /// Running sums of the subject transition matrices over stored draws.
    pub b_subject_sum: Vec<Matrix>,
    pub nu: Vec<Vector>,
    pub alpha: Vec<Vec<Vector>>,
    pub sigma2: Vec<f64>,
    pub beta3_row_norms: Vec<Vec<f64>>,
    /// `Some(true)` when the draw's companion matrix has spectral radius ≥ 1.
    pub unstable: Vec<Option<bool>>,
    /// Tucker ranks after every iteration, burn-in included.
    pub ranks: Vec<[usize; 3]>,
    pub prune_events: Vec<(usize, RankReport)>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.b_fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b_fixed.is_empty()
    }

    fn mean_of(ms: &[Matrix]) -> Option<Matrix> {
        let first = ms.first()?;
        let sum = ms.iter().skip(1).fold(first.clone(), |acc, m| acc + m);
        Some(sum / ms.len() as f64)
    }

    pub fn mean_b_fixed(&self) -> Option<Matrix> {
        Self::mean_of(&self.b_fixed)
    }

    pub fn mean_b_subject(&self, i: usize) -> Option<Matrix> {
        if self.is_empty() {
            return None;
        }
        self.b_subject_sum.get(i).map(|s| s / self.len() as f64)
    }

    pub fn mean_nu(&self) -> Option<Vector> {
        let first = self.nu.first()?;
        Some(self.nu.iter().skip(1).fold(first.clone(), |acc, v| acc + v) / self.nu.len() as f64)
    }

    pub fn mean_alpha(&self, i: usize) -> Option<Vector> {
        let first = self.alpha.first()?.get(i)?;
        Some(self.alpha.iter().skip(1).fold(first.clone(), |acc, a| acc + &a[i]) / self.alpha.len() as f64)
    }

    pub fn mean_sigma2(&self) -> Option<f64> {
        (!self.sigma2.is_empty()).then(|| self.sigma2.iter().sum::<f64>() / self.sigma2.len() as f64)
    }

    pub fn unstable_count(&self) -> usize {
        self.unstable.iter().filter(|u| **u == Some(true)).count()
    }
}

/// A resumable chain: configuration, current state, generator and output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Chain {
    pub cfg: SamplerConfig,
    pub state: PanelState,
    pub rng: ChaCha8Rng,
    pub iteration: usize,
    pub draws: PosteriorDraws,
    pub window: ColumnNormWindow,
}

impl Chain {
    pub fn new(data: &PanelData, cfg: SamplerConfig) -> Result<Self> {
        Self::with_stream(data, cfg, 0)
    }

    /// Chain whose generator uses ChaCha stream `stream` of the configured
    /// seed. Stream 0 is the chain built by [`Chain::new`].
    pub fn with_stream(data: &PanelData, cfg: SamplerConfig, stream: u64) -> Result<Self> {
        data.validate()?;
        cfg.validate(data.k())?;
        if data.train_len() <= cfg.lags {
            return Err(Error::Dimension(format!("training length {} must exceed L = {}", data.train_len(), cfg.lags)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let state = PanelState::initialize(data, &cfg, &mut rng)?;
        let window = ColumnNormWindow::new(&state);
        let draws = PosteriorDraws {
            k: data.k(),
            lags: cfg.lags,
            subjects: state.subjects(),
            b_subject_sum: if state.is_panel() { vec![Matrix::zeros(data.k(), data.k() * cfg.lags); state.subjects()] } else { Vec::new() },
            ..Default::default()
        };
        Ok(Self { cfg, state, rng, iteration: 0, draws, window })
    }

    pub fn finished(&self) -> bool {
        self.iteration >= self.cfg.iterations
    }

    /// Runs sweeps until `until` iterations (capped at the configured total)
    /// have been completed.
    pub fn run(&mut self, data: &PanelData, until: usize) -> Result<()> {
        let model = ModelData::new(data, self.cfg.lags)?;
        let mut ws = Workspace::new(&self.state, &model)?;
        let stop = until.min(self.cfg.iterations);
        while self.iteration < stop {
            self.advance(&model, &mut ws)?;
        }
        Ok(())
    }

    fn advance(&mut self, model: &ModelData, ws: &mut Workspace) -> Result<()> {
        gibbs_sweep(&mut self.state, model, ws, &mut self.rng)?;
        self.iteration += 1;
        let it = self.iteration;
        self.window.record(&self.state);
        if self.window.count >= self.cfg.prune_window {
            if self.cfg.prune_enabled && it >= self.cfg.burn_in / 2 {
                match prune_ranks(&mut self.state, &self.window, self.cfg.prune_threshold) {
                    Ok(report) if report.changed() => self.draws.prune_events.push((it, report)),
                    Ok(_) | Err(Error::RankZero(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            self.window.reset(&self.state);
        }
        self.draws.ranks.push(self.state.ranks());
        if it > self.cfg.burn_in && (it - self.cfg.burn_in) % self.cfg.thin == 0 {
            self.store()?;
        }
        Ok(())
    }

    fn store(&mut self) -> Result<()> {
        let (fixed, subjects) = self.state.all_b();
        let unstable = if self.cfg.check_stability {
            let p = VarParams { b: fixed.clone(), nu: self.state.nu.clone(), sigma2: self.state.hyper.sigma2 };
            Some(spectral_radius(&companion_matrix(&p))? >= 1.0)
        } else {
            None
        };
        let d = &mut self.draws;
        d.unstable.push(unstable);
        d.b_fixed.push(fixed);
        if self.state.is_panel() {
            for (acc, b) in d.b_subject_sum.iter_mut().zip(&subjects) {
                *acc += b;
            }
            if self.cfg.store_subject_draws {
                d.b_subject.push(subjects);
            }
            d.alpha.push(self.state.alpha.clone());
        }
        d.nu.push(self.state.nu.clone());
        d.sigma2.push(self.state.hyper.sigma2);
        d.beta3_row_norms.push(self.state.beta3.row_iter().map(|r| r.norm()).collect());
        Ok(())
    }

    pub fn into_draws(self) -> PosteriorDraws {
        self.draws
    }
}

/// Runs `chains` independent chains on separate threads (stream `c` for
/// chain `c`) and returns them in order.
pub fn run_chains(data: &PanelData, cfg: &SamplerConfig, chains: usize) -> Result<Vec<Chain>> {
    if chains == 0 {
        return Err(Error::InvalidArgument("at least one chain is required".into()));
    }
    let mut out: Vec<Chain> = (0..chains).map(|c| Chain::with_stream(data, cfg.clone(), c as u64)).collect::<Result<_>>()?;
    resume_chains(data, &mut out, cfg.iterations)?;
    Ok(out)
}

/// Advances every chain to `until` iterations in parallel.
pub fn resume_chains(data: &PanelData, chains: &mut [Chain], until: usize) -> Result<()> {
    std::thread::scope(|s| {
        let handles: Vec<_> = chains.iter_mut().map(|c| s.spawn(move || c.run(data, until))).collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect::<Result<Vec<()>>>()
    })?;
    Ok(())
}

/// Concatenates the draws of several chains, in chain order.
pub fn pool_draws(chains: &[Chain]) -> Result<PosteriorDraws> {
    let first = chains.first().ok_or_else(|| Error::InvalidArgument("no chains to pool".into()))?;
    let mut out = first.draws.clone();
    for c in &chains[1..] {
        let d = &c.draws;
        if (d.k, d.lags, d.subjects) != (out.k, out.lags, out.subjects) {
            return Err(Error::Dimension("chains disagree on model shape".into()));
        }
        out.b_fixed.extend(d.b_fixed.iter().cloned());
        out.b_subject.extend(d.b_subject.iter().cloned());
        for (acc, b) in out.b_subject_sum.iter_mut().zip(&d.b_subject_sum) {
            *acc += b;
        }
        out.nu.extend(d.nu.iter().cloned());
        out.alpha.extend(d.alpha.iter().cloned());
        out.sigma2.extend(d.sigma2.iter().cloned());
        out.beta3_row_norms.extend(d.beta3_row_norms.iter().cloned());
        out.unstable.extend(d.unstable.iter().cloned());
        out.ranks.extend(d.ranks.iter().cloned());
        out.prune_events.extend(d.prune_events.iter().cloned());
    }
    Ok(out)
}

/// Runs a full chain from the configured seed.
pub fn fit(data: &PanelData, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    let mut chain = Chain::new(data, cfg.clone())?;
    chain.run(data, cfg.iterations)?;
    Ok(chain.into_draws())
}
