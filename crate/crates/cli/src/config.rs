//! Run configuration: one JSON document, optionally overridden by flags. The
//! resolved configuration is echoed into every record and reproduces the run.

use std::path::PathBuf;

use looplab::lattice::SetSpec;
use looplab::maps::ConformalTestMap;
use looplab::C64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Energy,
    Mass,
    LambdaStar,
    Werner,
    Soup,
    Verify,
    Om,
    BrownianOm,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Energy => "energy",
            Self::Mass => "mass",
            Self::LambdaStar => "lambda-star",
            Self::Werner => "werner",
            Self::Soup => "soup",
            Self::Verify => "verify",
            Self::Om => "om",
            Self::BrownianOm => "brownian-om",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Identity {
    Restriction,
    Divergence,
    Mass,
    Energy,
    Continuity,
    OmConsistency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Rooted,
    Disk,
    Both,
}

/// A curve: a file path or a short form (`circle:<n>`, `quadratic:<c>:<n>`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurveArg {
    Named(String),
    Vertices { vertices: Vec<C64>, #[serde(default)] root: usize },
}

/// A driving function: `linear:<slope>`, `sine:<amplitude>`, or samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhiArg {
    Named(String),
    Samples { t: Vec<f64>, w: Vec<f64> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<Identity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<ConformalTestMap>,
    /// Inner parameter of the round annulus `𝔸_r`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annulus_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1: Option<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v2: Option<SetSpec>,
    /// Compact set `K` of the lattice identities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_prime: Option<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Vec<SetSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meshes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_factors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_half: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowance: Option<f64>,
    /// Also run the `κ = 8/3` neighbourhood count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical: Option<bool>,
}

/// A configuration problem; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Parses a configuration document; errors carry line and column.
pub fn parse_config(text: &str, origin: &str) -> anyhow::Result<RunConfig> {
    serde_json::from_str(text).map_err(|e| {
        config_err(format!("{origin}:{}:{}: {}", e.line(), e.column(), strip_position(&e.to_string())))
    })
}

fn strip_position(msg: &str) -> &str {
    msg.rfind(" at line ").map_or(msg, |i| &msg[..i])
}

/// `1/64`, `0.015625`, ...
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad number {s:?}"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad number {s:?}"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("bad number {s:?}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("bad number {s:?}"))
    }
}

/// Comma-separated numbers, as one flag value.
#[derive(Debug, Clone)]
pub struct NumberList(pub Vec<f64>);

pub fn parse_list(s: &str) -> Result<NumberList, String> {
    s.split(',').map(parse_number).collect::<Result<_, _>>().map(NumberList)
}

pub fn parse_set(s: &str) -> Result<SetSpec, String> {
    serde_json::from_str(s).map_err(|e| format!("bad set description: {e}"))
}

pub fn parse_map(s: &str) -> Result<ConformalTestMap, String> {
    s.parse()
}

pub fn parse_curve_arg(s: &str) -> Result<CurveArg, String> {
    Ok(CurveArg::Named(s.to_string()))
}

pub fn parse_phi_arg(s: &str) -> Result<PhiArg, String> {
    Ok(PhiArg::Named(s.to_string()))
}
