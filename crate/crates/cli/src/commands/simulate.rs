use std::path::Path;

use tdvar_core::var::{make_block_diagonal_truth, make_network_truth, simulate_panel};

use crate::config::{RunConfig, Scenario};
use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, params_to_rows, truth_to_rows, write_panel, write_rows};

pub const DATA_DIR: &str = "data";
pub const PARAMS_FILE: &str = "truth_params.csv";
pub const NETWORK_FILE: &str = "truth_network.csv";

fn validate(cfg: &RunConfig) -> CliResult<()> {
    let bad = |m: String| Err(CliError::Config(m));
    if cfg.k == 0 || cfg.l_true == 0 || cfg.subjects == 0 {
        return bad("k, l_true and subjects must be positive".into());
    }
    if cfg.scenario == Scenario::Block && cfg.k % 2 != 0 {
        return bad(format!("the block scenario needs an even k, got {}", cfg.k));
    }
    if cfg.scenario == Scenario::Network && (cfg.communities == 0 || cfg.communities > cfg.k) {
        return bad(format!("communities must be in 1..={}, got {}", cfg.k, cfg.communities));
    }
    if cfg.holdout >= cfg.length {
        return bad(format!("holdout {} leaves no training rows of length {}", cfg.holdout, cfg.length));
    }
    if !(cfg.random_scale >= 0.0) || !(cfg.alpha_scale >= 0.0) {
        return bad("random_scale and alpha_scale must be non-negative".into());
    }
    Ok(())
}

/// Writes `data/subject_XXX.csv`, the generating parameters and the planted
/// networks.
pub fn run(cfg: &RunConfig, out: &Path) -> CliResult<Vec<(&'static str, String)>> {
    validate(cfg)?;
    let (shared, _) = match cfg.scenario {
        Scenario::Block => make_block_diagonal_truth(cfg.k, cfg.l_true, cfg.seed)?,
        Scenario::Network => make_network_truth(cfg.k, cfg.l_true, cfg.communities, cfg.seed)?,
    };
    let (data, params, truth) = simulate_panel(&shared, &cfg.panel_sim(), cfg.seed)?;
    ensure_dir(out)?;
    write_panel(&out.join(DATA_DIR), &data)?;
    write_rows(&out.join(PARAMS_FILE), &params_to_rows(&params))?;
    write_rows(&out.join(NETWORK_FILE), &truth_to_rows(&truth))?;
    Ok(vec![("true_edges", truth.fixed.edges.iter().filter(|e| **e).count().to_string())])
}
