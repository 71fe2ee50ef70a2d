use nalgebra::Cholesky;
use rand::Rng;

use crate::error::{Error, Result};
use crate::priors::{gamma, inv_gamma, std_normal, update_aux, update_scale};
use crate::tensor::{kronecker, mode_n_matricize, Matrix, Vector};

use super::design::{ModelData, Workspace};
use super::PanelState;

/// One block of the systematic-scan sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Step {
    Sigma2,
    LocalScales,
    GlobalScales,
    Delta,
    Psi,
    Beta1,
    Beta2,
    Beta3,
    Core,
    Intercept,
    RandomIntercepts,
    Auxiliaries,
    Xi,
}

pub const SWEEP_ORDER: [Step; 13] = [
    Step::Sigma2,
    Step::LocalScales,
    Step::GlobalScales,
    Step::Delta,
    Step::Psi,
    Step::Beta1,
    Step::Beta2,
    Step::Beta3,
    Step::Core,
    Step::Intercept,
    Step::RandomIntercepts,
    Step::Auxiliaries,
    Step::Xi,
];

impl Step {
    pub fn name(self) -> &'static str {
        match self {
            Step::Sigma2 => "noise variance",
            Step::LocalScales => "local scales",
            Step::GlobalScales => "global scales",
            Step::Delta => "gamma-process increments",
            Step::Psi => "column weights",
            Step::Beta1 => "response loadings",
            Step::Beta2 => "predictor loadings",
            Step::Beta3 => "lag loadings",
            Step::Core => "core tensor",
            Step::Intercept => "intercept",
            Step::RandomIntercepts => "subject intercepts",
            Step::Auxiliaries => "local auxiliaries",
            Step::Xi => "global auxiliary",
        }
    }
}

/// One full sweep. The workspace is rebuilt from `state` first and is left
/// consistent with the updated state.
pub fn gibbs_sweep<R: Rng + ?Sized>(state: &mut PanelState, data: &ModelData, ws: &mut Workspace, rng: &mut R) -> Result<()> {
    data.check_state(state)?;
    ws.refresh(state, data);
    for step in SWEEP_ORDER {
        run_step(step, state, data, ws, rng)?;
    }
    Ok(())
}

/// Draws one block from its full conditional. `ws` must be consistent with
/// `state` (see [`Workspace::refresh`]) and is kept consistent.
pub fn run_step<R: Rng + ?Sized>(step: Step, state: &mut PanelState, data: &ModelData, ws: &mut Workspace, rng: &mut R) -> Result<()> {
    match step {
        Step::Sigma2 => update_sigma2(state, data, ws, rng),
        Step::LocalScales => update_local_scales(state, rng),
        Step::GlobalScales => update_global_scales(state, rng),
        Step::Delta => update_delta(state, rng),
        Step::Psi => {
            for f in state.hyper.factors.iter_mut() {
                f.refresh_psi();
            }
        }
        Step::Beta1 => update_beta1(state, ws, rng)?,
        Step::Beta2 => update_beta2(state, data, ws, rng)?,
        Step::Beta3 => update_beta3(state, data, ws, rng)?,
        Step::Core => update_core(state, data, ws, rng)?,
        Step::Intercept => update_intercept(state, data, ws, rng),
        Step::RandomIntercepts => update_random_intercepts(state, data, ws, rng)?,
        Step::Auxiliaries => update_auxiliaries(state, rng),
        Step::Xi => {
            let h = &mut state.hyper;
            h.xi = inv_gamma(0.5 * (1.0 + h.global_count() as f64), 1.0 + h.inverse_global_sum(), rng);
        }
    }
    check_finite(step, state, ws)
}

fn check_finite(step: Step, state: &PanelState, ws: &Workspace) -> Result<()> {
    let fail = |what: &str| Err(Error::NonFinite { step: step.name(), detail: what.to_string() });
    let finite = |m: &Matrix| m.iter().all(|v| v.is_finite());
    let h = &state.hyper;
    match step {
        Step::Sigma2 if !h.sigma2.is_finite() => fail("noise variance"),
        Step::LocalScales | Step::Auxiliaries => {
            let ok = h.factors.iter().all(|f| finite(&f.local.tau2) && finite(&f.local.phi))
                && h.beta1_dev.iter().all(|s| finite(&s.tau2) && finite(&s.phi))
                && h.core.tau2.values().iter().chain(h.core.phi.values()).all(|v| v.is_finite())
                && h.nu.tau2.iter().chain(h.nu.phi.iter()).all(|v| v.is_finite());
            if ok {
                Ok(())
            } else {
                fail("local scale")
            }
        }
        Step::GlobalScales
            if !(h.factors.iter().all(|f| f.lambda2.is_finite())
                && [h.lambda2_dev, h.lambda2_alpha, h.core.lambda2, h.nu.lambda2].iter().all(|v| v.is_finite())) =>
        {
            fail("global scale")
        }
        Step::Delta | Step::Psi if !h.factors.iter().all(|f| f.psi.iter().chain(&f.delta).all(|v| v.is_finite() && *v > 0.0)) => {
            fail("column weight")
        }
        Step::Beta1 if !(finite(&state.beta1) && state.beta1_dev.iter().all(finite)) => fail("response loading"),
        Step::Beta2 if !finite(&state.beta2) => fail("predictor loading"),
        Step::Beta3 if !finite(&state.beta3) => fail("lag loading"),
        Step::Core if !state.core.values().iter().all(|v| v.is_finite()) => fail("core entry"),
        Step::Intercept if !state.nu.iter().all(|v| v.is_finite()) => fail("intercept"),
        Step::RandomIntercepts if !state.alpha.iter().all(|a| a.iter().all(|v| v.is_finite())) => fail("subject intercept"),
        Step::Xi if !h.xi.is_finite() => fail("global auxiliary"),
        Step::Beta1 | Step::Beta2 | Step::Beta3 | Step::Core | Step::Intercept | Step::RandomIntercepts if !ws.resid.iter().all(finite) => {
            fail("residual")
        }
        _ => Ok(()),
    }
}

/// `Σ ψ_r β²/(τ² λ²)` for factor `j`.
fn factor_quad(state: &PanelState, j: usize) -> f64 {
    let f = &state.hyper.factors[j];
    let b = match j {
        0 => &state.beta1,
        1 => &state.beta2,
        _ => &state.beta3,
    };
    let mut s = 0.0;
    for r in 0..b.ncols() {
        for a in 0..b.nrows() {
            s += f.psi[r] * b[(a, r)].powi(2) / f.local.tau2[(a, r)];
        }
    }
    s / f.lambda2
}

fn dev_quad(state: &PanelState) -> f64 {
    let psi = &state.hyper.factors[0].psi;
    let mut s = 0.0;
    for (d, sc) in state.beta1_dev.iter().zip(&state.hyper.beta1_dev) {
        for r in 0..d.ncols() {
            for a in 0..d.nrows() {
                s += psi[r] * d[(a, r)].powi(2) / sc.tau2[(a, r)];
            }
        }
    }
    s / state.hyper.lambda2_dev
}

fn core_quad(state: &PanelState) -> f64 {
    let h = &state.hyper.core;
    state.core.values().iter().zip(h.tau2.values()).map(|(g, t)| g * g / t).sum::<f64>() / h.lambda2
}

fn nu_quad(state: &PanelState) -> f64 {
    let h = &state.hyper.nu;
    state.nu.iter().zip(h.tau2.iter()).map(|(v, t)| v * v / t).sum::<f64>() / h.lambda2
}

fn alpha_quad(state: &PanelState) -> f64 {
    state.alpha.iter().map(|a| a.norm_squared()).sum::<f64>() / state.hyper.lambda2_alpha
}

fn update_sigma2<R: Rng + ?Sized>(state: &mut PanelState, data: &ModelData, ws: &Workspace, rng: &mut R) {
    let k = state.k();
    let [r1, r2, r3] = state.ranks();
    let mut count = data.total_rows() * k + k * r1 + k * r2 + state.lags() * r3 + r1 * r2 * r3 + k;
    let mut quad = (0..3).map(|j| factor_quad(state, j)).sum::<f64>() + core_quad(state) + nu_quad(state);
    if state.is_panel() {
        let n = state.subjects();
        count += n * k * r1 + n * k;
        quad += dev_quad(state) + alpha_quad(state);
    }
    let p = state.hyper.prior;
    state.hyper.sigma2 = inv_gamma(p.a_sigma + 0.5 * count as f64, p.b_sigma + 0.5 * (ws.sse() + quad), rng);
}

fn update_local_scales<R: Rng + ?Sized>(state: &mut PanelState, rng: &mut R) {
    let sigma2 = state.hyper.sigma2;
    let betas = [&state.beta1, &state.beta2, &state.beta3];
    for (f, b) in state.hyper.factors.iter_mut().zip(betas) {
        for r in 0..b.ncols() {
            for a in 0..b.nrows() {
                let z = f.psi[r] * b[(a, r)].powi(2) / (f.lambda2 * sigma2);
                f.local.tau2[(a, r)] = update_scale(f.local.phi[(a, r)], 1, z, rng);
            }
        }
    }
    let psi = state.hyper.factors[0].psi.clone();
    let lambda2_dev = state.hyper.lambda2_dev;
    for (d, sc) in state.beta1_dev.iter().zip(state.hyper.beta1_dev.iter_mut()) {
        for r in 0..d.ncols() {
            for a in 0..d.nrows() {
                let z = psi[r] * d[(a, r)].powi(2) / (lambda2_dev * sigma2);
                sc.tau2[(a, r)] = update_scale(sc.phi[(a, r)], 1, z, rng);
            }
        }
    }
    let core = &mut state.hyper.core;
    for (v, g) in state.core.values().iter().enumerate() {
        let z = g * g / (core.lambda2 * sigma2);
        core.tau2.values_mut()[v] = update_scale(core.phi.values()[v], 1, z, rng);
    }
    let nu = &mut state.hyper.nu;
    for a in 0..state.nu.len() {
        let z = state.nu[a].powi(2) / (nu.lambda2 * sigma2);
        nu.tau2[a] = update_scale(nu.phi[a], 1, z, rng);
    }
}

fn update_global_scales<R: Rng + ?Sized>(state: &mut PanelState, rng: &mut R) {
    let sigma2 = state.hyper.sigma2;
    let xi = state.hyper.xi;
    for j in 0..3 {
        let f = &state.hyper.factors[j];
        let entries = f.local.tau2.len();
        let z = factor_quad(state, j) * f.lambda2 / sigma2;
        state.hyper.factors[j].lambda2 = update_scale(xi, entries, z, rng);
    }
    if state.is_panel() {
        let entries: usize = state.beta1_dev.iter().map(|d| d.len()).sum();
        let z = dev_quad(state) * state.hyper.lambda2_dev / sigma2;
        state.hyper.lambda2_dev = update_scale(xi, entries, z, rng);
        let entries: usize = state.alpha.iter().map(|a| a.len()).sum();
        let z = alpha_quad(state) * state.hyper.lambda2_alpha / sigma2;
        state.hyper.lambda2_alpha = update_scale(xi, entries, z, rng);
    }
    let z = core_quad(state) * state.hyper.core.lambda2 / sigma2;
    state.hyper.core.lambda2 = update_scale(xi, state.core.values().len(), z, rng);
    let z = nu_quad(state) * state.hyper.nu.lambda2 / sigma2;
    state.hyper.nu.lambda2 = update_scale(xi, state.nu.len(), z, rng);
}

fn update_delta<R: Rng + ?Sized>(state: &mut PanelState, rng: &mut R) {
    let sigma2 = state.hyper.sigma2;
    let prior = state.hyper.prior;
    for j in 0..3 {
        let b = match j {
            0 => &state.beta1,
            1 => &state.beta2,
            _ => &state.beta3,
        };
        let f = &state.hyper.factors[j];
        let cols = b.ncols();
        let mut rows = b.nrows();
        // Per-column `Σ β²/τ²` divided by `λ²σ²`, without ψ.
        let mut q: Vec<f64> = (0..cols)
            .map(|r| (0..b.nrows()).map(|a| b[(a, r)].powi(2) / f.local.tau2[(a, r)]).sum::<f64>() / (f.lambda2 * sigma2))
            .collect();
        if j == 0 {
            for (d, sc) in state.beta1_dev.iter().zip(&state.hyper.beta1_dev) {
                rows += d.nrows();
                for (r, qr) in q.iter_mut().enumerate() {
                    *qr += (0..d.nrows()).map(|a| d[(a, r)].powi(2) / sc.tau2[(a, r)]).sum::<f64>() / (state.hyper.lambda2_dev * sigma2);
                }
            }
        }
        let f = &mut state.hyper.factors[j];
        for l in 0..cols {
            let mut rate = 1.0;
            let mut partial = 1.0;
            for (r, qr) in q.iter().enumerate() {
                if r != l {
                    partial *= f.delta[r];
                }
                if r >= l {
                    rate += 0.5 * partial * qr;
                }
            }
            let shape = if l == 0 { prior.a1 } else { prior.a2 } + 0.5 * (rows * (cols - l)) as f64;
            f.delta[l] = gamma(shape, rate, rng);
        }
        f.refresh_psi();
    }
}

/// `mean + σ L⁻ᵀ z` with `LLᵀ = prec` and `mean = prec⁻¹ rhs`.
fn gaussian_draw<R: Rng + ?Sized>(prec: Matrix, rhs: &Vector, sigma2: f64, step: Step, rng: &mut R) -> Result<Vector> {
    let chol = Cholesky::new(prec)
        .ok_or_else(|| Error::NonFinite { step: step.name(), detail: "conditional precision is not positive definite".into() })?;
    let mean = chol.solve(rhs);
    let z = Vector::from_fn(rhs.len(), |_, _| std_normal(rng));
    let noise = chol
        .l()
        .tr_solve_lower_triangular(&z)
        .ok_or_else(|| Error::NonFinite { step: step.name(), detail: "singular Cholesky factor".into() })?;
    Ok(mean + noise * sigma2.sqrt())
}

fn loadings(state: &PanelState, data: &ModelData) -> Vec<Matrix> {
    (0..data.n()).map(|i| state.subject_loading(if state.is_panel() { i } else { 0 })).collect()
}

/// `H_t = c_t I_K`, so the rows of a column are conditionally independent.
fn update_beta1<R: Rng + ?Sized>(state: &mut PanelState, ws: &mut Workspace, rng: &mut R) -> Result<()> {
    let k = state.k();
    let r1 = state.ranks()[0];
    let sigma = state.hyper.sigma2.sqrt();
    let proj = kronecker(&state.beta3, &state.beta2) * mode_n_matricize(&state.core, 1)?.transpose();
    let u: Vec<Matrix> = ws.w.iter().map(|w| w * &proj).collect();
    for r in 0..r1 {
        let cols: Vec<Vector> = u.iter().map(|u| u.column(r).into_owned()).collect();
        let cc: Vec<f64> = cols.iter().map(|c| c.norm_squared()).collect();
        let total: f64 = cc.iter().sum();
        let f = &state.hyper.factors[0];
        let mut delta = Vector::zeros(k);
        for a in 0..k {
            let cr: f64 = cols.iter().zip(&ws.resid).map(|(c, e)| c.dot(&e.column(a))).sum();
            let prec = total + f.psi[r] / (f.lambda2 * f.local.tau2[(a, r)]);
            let old = state.beta1[(a, r)];
            let new = (cr + old * total) / prec + sigma / prec.sqrt() * std_normal(rng);
            delta[a] = new - old;
            state.beta1[(a, r)] = new;
        }
        for (e, c) in ws.resid.iter_mut().zip(&cols) {
            e.ger(-1.0, c, &delta, 1.0);
        }
        if state.is_panel() {
            let psi = state.hyper.factors[0].psi[r];
            let lambda2 = state.hyper.lambda2_dev;
            for i in 0..state.subjects() {
                let sc = &state.hyper.beta1_dev[i];
                let e = &mut ws.resid[i];
                let mut delta = Vector::zeros(k);
                for a in 0..k {
                    let cr = cols[i].dot(&e.column(a));
                    let prec = cc[i] + psi / (lambda2 * sc.tau2[(a, r)]);
                    let old = state.beta1_dev[i][(a, r)];
                    let new = (cr + old * cc[i]) / prec + sigma / prec.sqrt() * std_normal(rng);
                    delta[a] = new - old;
                    state.beta1_dev[i][(a, r)] = new;
                }
                e.ger(-1.0, &cols[i], &delta, 1.0);
            }
        }
    }
    Ok(())
}

/// `H_t = P_i X_tᵀ` with `P_i = β1_i G_{·,r,·} β3ᵀ`; `Σ_t HᵀH` comes from the
/// centred lag cross products.
fn update_beta2<R: Rng + ?Sized>(state: &mut PanelState, data: &ModelData, ws: &mut Workspace, rng: &mut R) -> Result<()> {
    let k = state.k();
    let lags = state.lags();
    let [r1, r2, r3] = state.ranks();
    let loads = loadings(state, data);
    for r in 0..r2 {
        let slice = Matrix::from_fn(r1, r3, |a, q| state.core.at(a, r, q)) * state.beta3.transpose();
        let ps: Vec<Matrix> = loads.iter().map(|b| b * &slice).collect();
        let old = state.beta2.column(r).into_owned();
        let mut prec = Matrix::zeros(k, k);
        let mut rhs = Vector::zeros(k);
        for (i, p) in ps.iter().enumerate() {
            let ptp = p.tr_mul(p);
            let mut hh = Matrix::zeros(k, k);
            for l in 0..lags {
                for m in 0..lags {
                    hh += ws.sww[i].view((l * k, m * k), (k, k)) * ptp[(l, m)];
                }
            }
            let v = &ws.resid[i] * p;
            for l in 0..lags {
                rhs.gemv_tr(1.0, &ws.w[i].columns(l * k, k), &v.column(l), 1.0);
            }
            rhs.gemv(1.0, &hh, &old, 1.0);
            prec += hh;
        }
        let f = &state.hyper.factors[1];
        for a in 0..k {
            prec[(a, a)] += f.psi[r] / (f.lambda2 * f.local.tau2[(a, r)]);
        }
        let new = gaussian_draw(prec, &rhs, state.hyper.sigma2, Step::Beta2, rng)?;
        let delta = &new - &old;
        state.beta2.set_column(r, &new);
        for (i, p) in ps.iter().enumerate() {
            let mut m = Matrix::zeros(ws.w[i].nrows(), lags);
            for l in 0..lags {
                m.column_mut(l).gemv(1.0, &ws.w[i].columns(l * k, k), &delta, 0.0);
            }
            ws.resid[i].gemm(-1.0, &m, &p.transpose(), 1.0);
        }
    }
    Ok(())
}

/// `H_t = M_i A_t` with `M_i = β1_i G_{·,·,r}` and `A_t = β2ᵀ X_t`.
fn update_beta3<R: Rng + ?Sized>(state: &mut PanelState, data: &ModelData, ws: &mut Workspace, rng: &mut R) -> Result<()> {
    let k = state.k();
    let lags = state.lags();
    let [r1, r2, r3] = state.ranks();
    let loads = loadings(state, data);
    let fs: Vec<Vec<Matrix>> = ws.w.iter().map(|w| (0..lags).map(|l| w.columns(l * k, k) * &state.beta2).collect()).collect();
    for r in 0..r3 {
        let slice = Matrix::from_fn(r1, r2, |a, p| state.core.at(a, p, r));
        let ms: Vec<Matrix> = loads.iter().map(|b| b * &slice).collect();
        let old = state.beta3.column(r).into_owned();
        let mut prec = Matrix::zeros(lags, lags);
        let mut rhs = Vector::zeros(lags);
        for (i, m) in ms.iter().enumerate() {
            let c = m.tr_mul(m);
            let f = &fs[i];
            let fc: Vec<Matrix> = f.iter().map(|fl| fl * &c).collect();
            let hh = Matrix::from_fn(lags, lags, |l, q| fc[l].dot(&f[q]));
            let mres = &ws.resid[i] * m;
            for l in 0..lags {
                rhs[l] += f[l].dot(&mres);
            }
            rhs.gemv(1.0, &hh, &old, 1.0);
            prec += hh;
        }
        let h = &state.hyper.factors[2];
        for l in 0..lags {
            prec[(l, l)] += h.psi[r] / (h.lambda2 * h.local.tau2[(l, r)]);
        }
        let new = gaussian_draw(prec, &rhs, state.hyper.sigma2, Step::Beta3, rng)?;
        let delta = &new - &old;
        state.beta3.set_column(r, &new);
        for (i, m) in ms.iter().enumerate() {
            let mut acc = Matrix::zeros(ws.w[i].nrows(), r2);
            for (l, fl) in fs[i].iter().enumerate() {
                acc += fl * delta[l];
            }
            ws.resid[i].gemm(-1.0, &acc, &m.transpose(), 1.0);
        }
    }
    Ok(())
}

/// Elementwise with `ω_t = s_t β1_{·,r1}`, `s_t = β2_{·,r2}ᵀ X_t β3_{·,r3}`.
fn update_core<R: Rng + ?Sized>(state: &mut PanelState, data: &ModelData, ws: &mut Workspace, rng: &mut R) -> Result<()> {
    let [r1, r2, r3] = state.ranks();
    let sigma = state.hyper.sigma2.sqrt();
    let loads = loadings(state, data);
    let kr = kronecker(&state.beta3, &state.beta2);
    let z: Vec<Matrix> = ws.w.iter().map(|w| w * &kr).collect();
    let z2: Vec<Vec<f64>> = z.iter().map(|z| z.column_iter().map(|c| c.norm_squared()).collect()).collect();
    let mut q: Vec<Matrix> = ws.resid.iter().zip(&loads).map(|(e, b)| e * b).collect();
    let gram: Vec<Matrix> = loads.iter().map(|b| b.tr_mul(b)).collect();
    let mut dg = Matrix::zeros(r1, r2 * r3);
    let h = &state.hyper.core;
    for c3 in 0..r3 {
        for c2 in 0..r2 {
            let col = c2 + r2 * c3;
            for c1 in 0..r1 {
                let mut data_prec = 0.0;
                let mut cr = 0.0;
                for i in 0..z.len() {
                    data_prec += gram[i][(c1, c1)] * z2[i][col];
                    cr += z[i].column(col).dot(&q[i].column(c1));
                }
                let prec = data_prec + 1.0 / (h.lambda2 * h.tau2.at(c1, c2, c3));
                let old = state.core.at(c1, c2, c3);
                let new = (cr + old * data_prec) / prec + sigma / prec.sqrt() * std_normal(rng);
                let d = new - old;
                *state.core.at_mut(c1, c2, c3) = new;
                dg[(c1, col)] += d;
                for i in 0..z.len() {
                    let g_row = gram[i].row(c1).transpose();
                    q[i].ger(-d, &z[i].column(col), &g_row, 1.0);
                }
            }
        }
    }
    for (i, e) in ws.resid.iter_mut().enumerate() {
        let fit = &z[i] * dg.transpose();
        e.gemm(-1.0, &fit, &loads[i].transpose(), 1.0);
    }
    Ok(())
}

fn update_intercept<R: Rng + ?Sized>(state: &mut PanelState, data: &ModelData, ws: &mut Workspace, rng: &mut R) {
    let n = data.total_rows() as f64;
    let sigma = state.hyper.sigma2.sqrt();
    let h = &state.hyper.nu;
    let sums = ws.resid.iter().fold(Vector::zeros(state.k()), |acc, e| acc + e.row_sum().transpose());
    let mut delta = Vector::zeros(state.k());
    for a in 0..state.k() {
        let prec = n + 1.0 / (h.lambda2 * h.tau2[a]);
        let old = state.nu[a];
        let new = (sums[a] + old * n) / prec + sigma / prec.sqrt() * std_normal(rng);
        delta[a] = new - old;
        state.nu[a] = new;
    }
    for e in ws.resid.iter_mut() {
        for mut row in e.row_iter_mut() {
            row -= delta.transpose();
        }
    }
}

/// `y_t − ν − B_i x_t = C_i α_i + ε` with `C_i = I − Σ_ℓ A_{i,ℓ}`.
fn update_random_intercepts<R: Rng + ?Sized>(state: &mut PanelState, data: &ModelData, ws: &mut Workspace, rng: &mut R) -> Result<()> {
    if !state.is_panel() {
        return Ok(());
    }
    let k = state.k();
    let inv_scale = 1.0 / state.hyper.lambda2_alpha;
    for i in 0..state.subjects() {
        let c = Matrix::identity(k, k) - state.subject_lag_sum(i);
        let n = ws.resid[i].nrows() as f64;
        let old = state.alpha[i].clone();
        let s = ws.resid[i].row_sum().transpose() + &c * &old * n;
        let mut prec = c.tr_mul(&c) * n;
        for a in 0..k {
            prec[(a, a)] += inv_scale;
        }
        let rhs = c.tr_mul(&s);
        let new = gaussian_draw(prec, &rhs, state.hyper.sigma2, Step::RandomIntercepts, rng)?;
        let shift = &c * (&new - &old);
        state.alpha[i] = new;
        for mut row in ws.resid[i].row_iter_mut() {
            row -= shift.transpose();
        }
        ws.recentre(state, data, i);
    }
    Ok(())
}

fn update_auxiliaries<R: Rng + ?Sized>(state: &mut PanelState, rng: &mut R) {
    let h = &mut state.hyper;
    for f in h.factors.iter_mut() {
        for v in 0..f.local.tau2.len() {
            f.local.phi[v] = update_aux(f.local.tau2[v], 1.0, rng);
        }
    }
    for s in h.beta1_dev.iter_mut() {
        for v in 0..s.tau2.len() {
            s.phi[v] = update_aux(s.tau2[v], 1.0, rng);
        }
    }
    for v in 0..h.core.tau2.values().len() {
        h.core.phi.values_mut()[v] = update_aux(h.core.tau2.values()[v], 1.0, rng);
    }
    for v in 0..h.nu.tau2.len() {
        h.nu.phi[v] = update_aux(h.nu.tau2[v], 1.0, rng);
    }
}
