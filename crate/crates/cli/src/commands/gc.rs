use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tdvar_core::gc::{decide_network, inclusion_probabilities, DecisionConfig, GcNetwork};
use tdvar_core::Matrix;

use crate::checkpoint::{self, Checkpoint};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, subject_label, write_rows};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkRow {
    pub lag: usize,
    pub row: usize,
    pub col: usize,
    pub inclusion: f64,
    pub edge: u8,
}

/// Lag-wise OR of the decisions; `inclusion` is the largest over lags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeRow {
    pub row: usize,
    pub col: usize,
    pub inclusion: f64,
    pub edge: u8,
}

pub fn lag_file(label: &str) -> String {
    format!("network_{label}_lags.csv")
}

pub fn composite_file(label: &str) -> String {
    format!("network_{label}.csv")
}

pub fn dot_file(label: &str) -> String {
    format!("network_{label}.dot")
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Directed graph of the composite network. An edge `c -> r` means series
/// `c` Granger-causes series `r`.
pub fn to_dot(label: &str, net: &GcNetwork, names: &[String]) -> String {
    let k = names.len();
    let mut out = format!("digraph {} {{\n", quoted(label));
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(out, "  n{} [label={}];", i + 1, quoted(name));
    }
    for c in 0..k {
        for r in 0..k {
            if net.composite[(r, c)] {
                let v = (0..net.inclusion.lags()).map(|l| *net.inclusion.get(l, r, c)).fold(0.0, f64::max);
                let _ = writeln!(out, "  n{} -> n{} [weight={v}];", c + 1, r + 1);
            }
        }
    }
    out.push_str("}\n");
    out
}

fn write_network(out: &Path, label: &str, draws: &[Matrix], cfg: &DecisionConfig, names: &[String]) -> CliResult<usize> {
    let net = decide_network(&inclusion_probabilities(draws, cfg.delta)?, cfg)?;
    let per_lag: Vec<NetworkRow> = net
        .inclusion
        .indexed()
        .map(|((l, r, c), v)| NetworkRow { lag: l + 1, row: r + 1, col: c + 1, inclusion: *v, edge: u8::from(*net.decisions.get(l, r, c)) })
        .collect();
    write_rows(&out.join(lag_file(label)), &per_lag)?;
    let k = names.len();
    let mut composite = Vec::with_capacity(k * k);
    for r in 0..k {
        for c in 0..k {
            let v = (0..net.inclusion.lags()).map(|l| *net.inclusion.get(l, r, c)).fold(0.0, f64::max);
            composite.push(CompositeRow { row: r + 1, col: c + 1, inclusion: v, edge: u8::from(net.composite[(r, c)]) });
        }
    }
    write_rows(&out.join(composite_file(label)), &composite)?;
    let path = out.join(dot_file(label));
    fs::write(&path, to_dot(label, &net, names)).map_err(|e| CliError::io(&path, e))?;
    Ok(net.edge_count())
}

pub fn load_finished(cfg: &RunConfig) -> CliResult<Checkpoint> {
    let path = cfg.required_path("fit_dir")?.join(checkpoint::FILE_NAME);
    let ckpt = checkpoint::load(&path)?;
    if !ckpt.finished() {
        return Err(CliError::Checkpoint(format!(
            "{} holds an unfinished fit (iteration {}); resume it first",
            path.display(),
            ckpt.iteration()
        )));
    }
    Ok(ckpt)
}

/// Writes the fixed-effects network and, when subject draws were kept, one
/// network per subject.
pub fn run(cfg: &RunConfig, out: &Path) -> CliResult<Vec<(&'static str, String)>> {
    let dcfg = cfg.decision()?;
    let ckpt = load_finished(cfg)?;
    let draws = tdvar_core::sampler::pool_draws(&ckpt.chains)?;
    if draws.is_empty() {
        return Err(CliError::Data("the fit kept no posterior draws".into()));
    }
    ensure_dir(out)?;
    let edges = write_network(out, "fixed", &draws.b_fixed, &dcfg, &ckpt.names)?;
    let mut notes = vec![("t_star", dcfg.t_star().to_string()), ("fixed_edges", edges.to_string())];
    if draws.subjects > 1 && draws.b_subject.is_empty() {
        notes.push(("subject_networks", "unavailable (store_subject_draws = false)".into()));
    }
    if !draws.b_subject.is_empty() {
        for i in 0..draws.subjects {
            let mats: Vec<Matrix> = draws.b_subject.iter().map(|d| d[i].clone()).collect();
            write_network(out, &subject_label(i), &mats, &dcfg, &ckpt.names)?;
        }
        notes.push(("subject_networks", draws.subjects.to_string()));
    }
    Ok(notes)
}
