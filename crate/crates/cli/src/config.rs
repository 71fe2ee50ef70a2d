//! Flat `key = value` run configuration. Every key has a default, unknown or
//! repeated keys are errors, and the manifest echoes every key so that a
//! manifest is itself a complete configuration file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tdvar_core::gc::DecisionConfig;
use tdvar_core::priors::PriorConfig;
use tdvar_core::sampler::SamplerConfig;
use tdvar_core::var::{PanelSimConfig, DEFAULT_BURN_IN};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    Block,
    Network,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Block => "block",
            Scenario::Network => "network",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "block" => Ok(Scenario::Block),
            "network" => Ok(Scenario::Network),
            _ => Err(format!("expected `block` or `network`, got `{s}`")),
        }
    }
}

trait Value: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse().map_err(|e| format!("cannot parse `{s}`: {e}"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

from_str_value!(usize, u64, f64, bool, Scenario);

impl Value for String {
    fn parse_value(s: &str) -> Result<Self, String> {
        Ok(s.to_string())
    }
    fn render(&self) -> String {
        self.clone()
    }
}

macro_rules! schema {
    ($($key:ident: $ty:ty = $default:expr;)*) => {
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        pub struct RunConfig {
            $(pub $key: $ty,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $($key: $default,)* }
            }
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($key)),*];

            fn set(&mut self, key: &str, value: &str) -> Option<Result<(), String>> {
                match key {
                    $(stringify!($key) => Some(<$ty as Value>::parse_value(value).map(|v| self.$key = v)),)*
                    _ => None,
                }
            }

            /// Every key with its current value, in schema order.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$((stringify!($key), self.$key.render())),*]
            }
        }
    };
}

schema! {
    data_dir: String = String::new();
    fit_dir: String = String::new();
    truth_dir: String = String::new();
    seed: u64 = 0;

    scenario: Scenario = Scenario::Block;
    k: usize = 10;
    l_true: usize = 4;
    communities: usize = 5;
    subjects: usize = 10;
    length: usize = 200;
    holdout: usize = 50;
    sim_burn_in: usize = DEFAULT_BURN_IN;
    random_scale: f64 = 0.2;
    alpha_scale: f64 = 0.5;

    lags: usize = 6;
    rank1: usize = 10;
    rank2: usize = 10;
    rank3: usize = 6;
    iterations: usize = 4000;
    burn_in: usize = 2000;
    thin: usize = 5;
    chains: usize = 1;
    halt_at: usize = 0;
    prune: bool = true;
    prune_threshold: f64 = 1e-3;
    prune_window: usize = 50;
    a1: f64 = PriorConfig::default().a1;
    a2: f64 = PriorConfig::default().a2;
    a_sigma: f64 = PriorConfig::default().a_sigma;
    b_sigma: f64 = PriorConfig::default().b_sigma;
    random_effects: bool = true;
    store_subject_draws: bool = true;
    check_stability: bool = true;

    delta: f64 = DecisionConfig::default().delta;
    c: f64 = DecisionConfig::default().c;
}

impl RunConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(CliError::Config(format!("line {}: key `{key}` given twice", n + 1)));
            }
            match cfg.set(key, value) {
                None => return Err(CliError::Config(format!("line {}: unknown key `{key}`", n + 1))),
                Some(Err(e)) => return Err(CliError::Config(format!("line {}: key `{key}`: {e}", n + 1))),
                Some(Ok(())) => seen.push(key),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn sampler(&self) -> SamplerConfig {
        let mut s = SamplerConfig::new(self.lags, [self.rank1, self.rank2, self.rank3]);
        s.iterations = self.iterations;
        s.burn_in = self.burn_in;
        s.thin = self.thin;
        s.seed = self.seed;
        s.prune_enabled = self.prune;
        s.prune_threshold = self.prune_threshold;
        s.prune_window = self.prune_window;
        s.prior = PriorConfig { a1: self.a1, a2: self.a2, a_sigma: self.a_sigma, b_sigma: self.b_sigma };
        s.random_effects = self.random_effects;
        s.store_subject_draws = self.store_subject_draws;
        s.check_stability = self.check_stability;
        s
    }

    pub fn decision(&self) -> CliResult<DecisionConfig> {
        DecisionConfig::new(self.delta, self.c).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn panel_sim(&self) -> PanelSimConfig {
        PanelSimConfig {
            subjects: self.subjects,
            length: self.length,
            holdout: self.holdout,
            burn_in: self.sim_burn_in,
            random_scale: self.random_scale,
            alpha_scale: self.alpha_scale,
        }
    }

    /// A path-valued key that the command requires.
    pub fn required_path(&self, key: &str) -> CliResult<PathBuf> {
        let value = match key {
            "data_dir" => &self.data_dir,
            "fit_dir" => &self.fit_dir,
            "truth_dir" => &self.truth_dir,
            _ => return Err(CliError::Config(format!("`{key}` is not a path key"))),
        };
        if value.is_empty() {
            return Err(CliError::Config(format!("`{key}` is required for this command")));
        }
        Ok(PathBuf::from(value))
    }

    /// Equality ignoring `halt_at`.
    pub fn same_run(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.halt_at = other.halt_at;
        &a == other
    }

    /// Manifest text: a header of comment lines followed by every key.
    pub fn manifest(&self, command: &str, notes: &[(&str, String)]) -> String {
        let mut out = format!("# tdvar {}\n# command = {command}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in notes {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
