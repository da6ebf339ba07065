//! Scheme configuration: a flat TOML key-value file.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blocking::BlockStructure;
use crate::error::{Error, Result};
use crate::model::PendulumParams;
use crate::rti::WarmStartPolicy;

/// Block lengths of the 10-block structure `I = [0, 1, 3, 6, 10, 15, 20, 35, 50, 65, 80]`.
pub const PENDULUM_BLOCKS: [usize; 10] = [1, 2, 3, 4, 5, 5, 15, 15, 15, 15];

/// Interval lengths of the 42-interval nonuniform grid.
pub const PENDULUM_GRID_42: [usize; 42] = [
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, //
    2, 2, 4, 3, 2, 3, 2, 2, 2, 2, 2, 2, 3, 5, 5, 5, 5, 5,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Every interval has its own input.
    A,
    /// Nonuniform shooting grid with one input per (long) interval.
    B,
    /// Uniform grid with blocked inputs.
    C,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Self::A),
            "B" | "b" => Ok(Self::B),
            "C" | "c" => Ok(Self::C),
            other => Err(Error::Config {
                line: None,
                message: format!("unknown scheme '{other}', expected A, B or C"),
            }),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarmStart {
    Resimulate,
    Carry,
    Shift,
}

impl From<WarmStart> for WarmStartPolicy {
    fn from(w: WarmStart) -> Self {
        match w {
            WarmStart::Resimulate => Self::Resimulate,
            WarmStart::Carry => Self::Carry,
            WarmStart::Shift => Self::Shift,
        }
    }
}

fn default_scheme() -> Scheme {
    Scheme::C
}
fn default_ts() -> f64 {
    0.025
}
fn default_horizon() -> usize {
    80
}
fn default_blocks() -> Vec<usize> {
    PENDULUM_BLOCKS.to_vec()
}
fn default_q() -> Vec<f64> {
    vec![10.0, 10.0, 0.1, 0.1]
}
fn default_r() -> f64 {
    0.01
}
fn default_p_max() -> f64 {
    2.0
}
fn default_u_max() -> f64 {
    20.0
}
fn default_x0() -> Vec<f64> {
    vec![0.0, std::f64::consts::PI, 0.0, 0.0]
}
fn default_sim_time() -> f64 {
    10.0
}
fn default_plant_substeps() -> usize {
    10
}
fn default_qp_tol() -> f64 {
    1e-8
}
fn default_warm_start() -> WarmStart {
    WarmStart::Carry
}
fn default_m1() -> f64 {
    PendulumParams::default().m1
}
fn default_m2() -> f64 {
    PendulumParams::default().m2
}
fn default_l() -> f64 {
    PendulumParams::default().l
}
fn default_g() -> f64 {
    PendulumParams::default().g
}

/// Closed-loop run settings. Every key is optional; see `configs/` for examples.
///
/// `block_lengths` is used by scheme C and `grid_lengths` by scheme B, so one
/// file can describe all three schemes. Without `grid_lengths`, scheme B uses
/// `block_lengths` as its grid. `block_indices` (start indices including both
/// endpoints) may replace `block_lengths`; if both are given they must agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_ts")]
    pub ts: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_blocks")]
    pub block_lengths: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_indices: Option<Vec<usize>>,
    #[serde(default)]
    pub grid_lengths: Option<Vec<usize>>,
    /// Diagonal of the stage state weight.
    #[serde(default = "default_q")]
    pub q_diag: Vec<f64>,
    /// Input weight.
    #[serde(default = "default_r")]
    pub r: f64,
    /// Diagonal of the terminal weight; defaults to `q_diag`.
    #[serde(default)]
    pub qn_diag: Option<Vec<f64>>,
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    #[serde(default = "default_u_max")]
    pub u_max: f64,
    #[serde(default = "default_x0")]
    pub x0: Vec<f64>,
    #[serde(default = "default_sim_time")]
    pub sim_time: f64,
    #[serde(default = "default_plant_substeps")]
    pub plant_substeps: usize,
    #[serde(default = "default_qp_tol")]
    pub qp_tol: f64,
    #[serde(default)]
    pub qp_max_iter: Option<usize>,
    #[serde(default = "default_warm_start")]
    pub warm_start: WarmStart,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_m1")]
    pub m1: f64,
    #[serde(default = "default_m2")]
    pub m2: f64,
    #[serde(default = "default_l")]
    pub l: f64,
    #[serde(default = "default_g")]
    pub g: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        toml::from_str("").expect("all keys have defaults")
    }
}

impl SchemeConfig {
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn pendulum_params(&self) -> PendulumParams {
        PendulumParams {
            m1: self.m1,
            m2: self.m2,
            l: self.l,
            g: self.g,
        }
    }

    pub fn terminal_diag(&self) -> &[f64] {
        self.qn_diag.as_deref().unwrap_or(&self.q_diag)
    }

    /// Interval lengths (in multiples of `ts`) of the scheme B grid.
    pub fn grid(&self) -> &[usize] {
        self.grid_lengths.as_deref().unwrap_or(&self.block_lengths)
    }

    /// Block structure of the configured scheme's decision variables.
    pub fn block_structure(&self) -> Result<BlockStructure> {
        match self.scheme {
            Scheme::A => BlockStructure::unit(self.horizon),
            Scheme::B => BlockStructure::unit(self.grid().len()),
            Scheme::C => BlockStructure::from_block_lengths(&self.block_lengths),
        }
    }

    /// Number of samples a run of `sim_time` produces.
    pub fn num_samples(&self) -> usize {
        (self.sim_time / self.ts + 1e-9).floor() as usize
    }

    /// Checks ranges and cross-key consistency; errors carry the line of the
    /// offending key when `source` is the file text it was parsed from.
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate_with_source(&self, source: Option<&str>) -> Result<()> {
        let fail = |key: &str, message: String| Error::Config {
            line: source.and_then(|s| key_line(s, key)),
            message,
        };
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return Err(fail("ts", format!("ts must be positive, got {}", self.ts)));
        }
        if self.horizon == 0 {
            return Err(fail("horizon", "horizon must be at least 1".into()));
        }
        let check_lengths = |key: &str, lengths: &[usize]| -> Result<()> {
            if lengths.is_empty() || lengths.contains(&0) {
                return Err(fail(key, format!("{key} must be non-empty positive counts")));
            }
            let total: usize = lengths.iter().sum();
            if total != self.horizon {
                return Err(fail(key, format!("{key} sum to {total}, expected horizon {}", self.horizon)));
            }
            Ok(())
        };
        if let Some(indices) = &self.block_indices {
            let bs = BlockStructure::from_block_indices(indices).map_err(|e| fail("block_indices", e.to_string()))?;
            if bs.lengths() != self.block_lengths.as_slice() {
                return Err(fail(
                    "block_indices",
                    format!("block_indices {indices:?} disagree with block_lengths {:?}", self.block_lengths),
                ));
            }
        }
        if self.scheme == Scheme::C {
            check_lengths("block_lengths", &self.block_lengths)?;
        }
        if self.scheme == Scheme::B {
            let key = if self.grid_lengths.is_some() {
                "grid_lengths"
            } else {
                "block_lengths"
            };
            check_lengths(key, self.grid())?;
            if self.warm_start == WarmStart::Shift {
                return Err(fail("warm_start", "shift warm start is not defined on a nonuniform grid".into()));
            }
        }
        if self.scheme == Scheme::C && self.warm_start == WarmStart::Shift && self.block_lengths.iter().any(|&n| n != 1) {
            return Err(fail("warm_start", "shift warm start requires unit blocks".into()));
        }
        if self.q_diag.len() != 4 || self.q_diag.iter().any(|&q| !(q >= 0.0 && q.is_finite())) {
            return Err(fail("q_diag", "q_diag needs 4 non-negative entries".into()));
        }
        if let Some(qn) = &self.qn_diag {
            if qn.len() != 4 || qn.iter().any(|&q| !(q >= 0.0 && q.is_finite())) {
                return Err(fail("qn_diag", "qn_diag needs 4 non-negative entries".into()));
            }
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(fail("r", format!("r must be positive, got {}", self.r)));
        }
        if !(self.p_max > 0.0) {
            return Err(fail("p_max", "p_max must be positive".into()));
        }
        if !(self.u_max > 0.0) {
            return Err(fail("u_max", "u_max must be positive".into()));
        }
        if self.x0.len() != 4 || self.x0.iter().any(|v| !v.is_finite()) {
            return Err(fail("x0", "x0 needs 4 finite entries".into()));
        }
        if !(self.sim_time >= 0.0 && self.sim_time.is_finite()) {
            return Err(fail("sim_time", "sim_time must be non-negative".into()));
        }
        if self.plant_substeps == 0 {
            return Err(fail("plant_substeps", "plant_substeps must be at least 1".into()));
        }
        if !(self.qp_tol > 0.0) {
            return Err(fail("qp_tol", "qp_tol must be positive".into()));
        }
        for (key, v) in [("m1", self.m1), ("m2", self.m2), ("l", self.l), ("g", self.g)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(fail(key, format!("{key} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_source(None)
    }

    /// Effective configuration as TOML, plus the derived start-index vector.
    pub fn echo(&self) -> String {
        let mut out = toml::to_string(self).unwrap_or_default();
        if let Ok(bs) = self.block_structure() {
            out.push_str(&format!("# start indices: {:?}\n", bs.starts()));
        }
        if self.scheme == Scheme::B {
            let mut acc = 0;
            let mut starts = vec![0];
            for n in self.grid() {
                acc += n;
                starts.push(acc);
            }
            out.push_str(&format!("# grid indices: {starts:?}\n"));
        }
        out
    }
}

/// 1-based line of the first `key = ...` assignment in `source`.
fn key_line(source: &str, key: &str) -> Option<usize> {
    source
        .lines()
        .position(|line| {
            let t = line.trim_start();
            t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

fn offset_line(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

pub fn parse_config(source: &str) -> Result<SchemeConfig> {
    let mut cfg: SchemeConfig = toml::from_str(source).map_err(|e| Error::Config {
        line: e.span().map(|s| offset_line(source, s.start)),
        message: e.message().to_string(),
    })?;
    if key_line(source, "block_lengths").is_none() {
        if let Some(indices) = &cfg.block_indices {
            if let Ok(bs) = BlockStructure::from_block_indices(indices) {
                cfg.block_lengths = bs.lengths().to_vec();
            }
        }
    }
    cfg.validate_with_source(Some(source))?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SchemeConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
