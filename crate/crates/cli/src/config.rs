//! Command configurations. Each one is accepted either as flags or as a JSON file with the same keys.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csoc_core::hierarchy::{default_grid, Variant, TSIRELSON_OMEGA};
use csoc_core::inequality::SlackRule;
use csoc_core::polytope::MdlParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "csoc",
    version,
    about = "Leakage-robust CHSH bounds, certificates and protocol simulations",
    args_conflicts_with_subcommands = true
)]
pub struct Cli {
    /// Read the command and its parameters from a JSON file instead of flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<RunConfig>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    /// Decide membership of a behavior in the local, MDL or AMDL polytope.
    Membership(MembershipConfig),
    /// Level-k optimal CHSH score as a function of leakage.
    Tsirelson(TsirelsonConfig),
    /// Certified min-entropy of Bob's output against CHSH score.
    Entropy(EntropyConfig),
    /// Run the TCF or compiled protocol and summarize the sampled behavior.
    Simulate(SimulateConfig),
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        match self {
            RunConfig::Membership(c) => c.seed,
            RunConfig::Tsirelson(c) => c.seed,
            RunConfig::Entropy(c) => c.seed,
            RunConfig::Simulate(c) => c.seed,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            RunConfig::Membership(_) => Ok(()),
            RunConfig::Tsirelson(c) => {
                parse_grid(&c.kappa_grid, 0.0, 0.5)?;
                check_range("shifted_slope", c.shifted_slope, 0.0, f64::MAX)
            }
            RunConfig::Entropy(c) => {
                parse_grid(&c.omega_grid, 0.0, 1.0)?;
                check_range("kappa_s", c.kappa_s, 0.0, 1.0)
            }
            RunConfig::Simulate(c) => c.validate(),
        }
    }
}

/// Polytope selector written `local`, `mdl(l,h)` or `amdl(κ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SetSpec {
    Local,
    Mdl(MdlParams),
    Amdl(f64),
}

impl FromStr for SetSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let s = s.trim();
        let bad = || CliError::Usage(format!("set `{s}` is not local, mdl(l,h) or amdl(kappa)"));
        if s == "local" {
            return Ok(SetSpec::Local);
        }
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args: Vec<f64> = rest
            .strip_suffix(')')
            .ok_or_else(bad)?
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        match (name.trim(), args.as_slice()) {
            ("mdl", &[l, h]) => Ok(SetSpec::Mdl(MdlParams::new(l, h)?)),
            ("amdl", &[k]) => Ok(SetSpec::Amdl(k)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for SetSpec {
    type Error = CliError;

    fn try_from(s: String) -> Result<Self, CliError> {
        s.parse()
    }
}

impl From<SetSpec> for String {
    fn from(s: SetSpec) -> String {
        s.to_string()
    }
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSpec::Local => write!(f, "local"),
            SetSpec::Mdl(p) => write!(f, "mdl({},{})", p.l, p.h),
            SetSpec::Amdl(k) => write!(f, "amdl({k})"),
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembershipConfig {
    /// Behavior JSON file.
    pub behavior: PathBuf,
    #[arg(long, default_value = "local")]
    pub set: SetSpec,
    /// Verdict JSON destination; standard output when absent.
    #[arg(long)]
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Recorded for provenance; the membership LP uses no randomness.
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
}

fn default_kappa_grid() -> String {
    "default".into()
}

fn default_level() -> usize {
    2
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsirelsonConfig {
    /// `default` (0 to 0.5 in steps of 0.0125), a comma list, or `start:end:count`.
    #[arg(long, default_value = "default")]
    #[serde(default = "default_kappa_grid")]
    pub kappa_grid: String,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "default_level")]
    pub level: usize,
    #[arg(long, default_value = "quantum", value_parser = parse_variant)]
    #[serde(default = "default_variant")]
    pub variant: Variant,
    /// Slope `c` of the reference line `min(1, cos²(π/8) + c·κ)` in the companion file.
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "default_shifted_slope")]
    pub shifted_slope: f64,
    /// Curve CSV; the reference lines go next to it with a `.reference.csv` suffix.
    #[arg(long, default_value = "tsirelson.csv")]
    #[serde(default = "default_tsirelson_output")]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
}

fn default_shifted_slope() -> f64 {
    1.0
}

fn default_variant() -> Variant {
    Variant::Quantum
}

fn default_tsirelson_output() -> PathBuf {
    "tsirelson.csv".into()
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse::<Variant>().map_err(|e| e.to_string())
}

fn default_omega_grid() -> String {
    format!("0.75:{TSIRELSON_OMEGA}:10")
}

fn default_entropy_output() -> PathBuf {
    "entropy.csv".into()
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyConfig {
    /// A comma list or `start:end:count`; defaults to ten points from 3/4 to the Tsirelson score.
    #[arg(long, default_value_t = default_omega_grid())]
    #[serde(default = "default_omega_grid")]
    pub omega_grid: String,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "default_level")]
    pub level: usize,
    /// Signaling budget allowed in the moment problem.
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    pub kappa_s: f64,
    #[arg(long, default_value = "entropy.csv")]
    #[serde(default = "default_entropy_output")]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Tcf,
    Compiled,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProverKind {
    Honest,
    ClassicalOptimal,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompiledKind {
    Ideal,
    Tilted,
    Classical,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseAKind {
    Shortcut,
    Statevector,
}

fn default_protocol() -> Protocol {
    Protocol::Tcf
}

fn default_shots() -> u64 {
    100_000
}

fn default_bits() -> u32 {
    8
}

fn default_prover() -> ProverKind {
    ProverKind::Honest
}

fn default_strategy() -> CompiledKind {
    CompiledKind::Ideal
}

fn default_phase_a() -> PhaseAKind {
    PhaseAKind::Shortcut
}

fn default_out_dir() -> PathBuf {
    "simulation".into()
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[arg(long, value_enum, default_value = "tcf")]
    #[serde(default = "default_protocol")]
    pub protocol: Protocol,
    #[arg(long, default_value_t = 100_000)]
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    /// Input size of the toy TCF; its key is derived from the seed.
    #[arg(long, default_value_t = 8)]
    #[serde(default = "default_bits")]
    pub n: u32,
    /// Leakage at which the showcase inequality is evaluated. Defaults to 0.025 (tcf) or 0.02 (compiled).
    #[arg(long)]
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Fixed slack; otherwise κ^0.45 (tcf) or κ^0.19 (compiled).
    #[arg(long)]
    #[serde(default)]
    pub slack: Option<f64>,
    /// Compiled-protocol prover strategy.
    #[arg(long, value_enum, default_value = "ideal")]
    #[serde(default = "default_strategy")]
    pub strategy: CompiledKind,
    /// Probability that the mock encryption reveals the encrypted input (compiled only).
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    pub leak: f64,
    /// TCF-protocol prover.
    #[arg(long, value_enum, default_value = "honest")]
    #[serde(default = "default_prover")]
    pub prover: ProverKind,
    #[arg(long, value_enum, default_value = "shortcut")]
    #[serde(default = "default_phase_a")]
    pub phase_a: PhaseAKind,
    /// Directory for `records.jsonl`, `behavior.json` and `summary.json`.
    #[arg(long, default_value = "simulation")]
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl SimulateConfig {
    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or(match self.protocol {
            Protocol::Tcf => 0.025,
            Protocol::Compiled => 0.02,
        })
    }

    pub fn slack_rule(&self) -> SlackRule {
        match (self.slack, self.protocol) {
            (Some(v), _) => SlackRule::Fixed(v),
            (None, Protocol::Tcf) => SlackRule::Tcf,
            (None, Protocol::Compiled) => SlackRule::Compiled,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        check_range("kappa", self.kappa(), 0.0, 0.5)?;
        check_range("leak", self.leak, 0.0, 1.0)?;
        if let Some(v) = self.slack {
            if v.is_nan() || v <= 0.0 {
                return Err(CliError::Usage(format!("slack {v} must be positive")));
            }
        }
        Ok(())
    }
}

fn check_range(name: &str, v: f64, lo: f64, hi: f64) -> Result<(), CliError> {
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{name} = {v} outside [{lo}, {hi}]"
        )))
    }
}

/// Parses `default`, `a,b,c` or `start:end:count` and checks every point lies in `[lo, hi]`.
pub fn parse_grid(spec: &str, lo: f64, hi: f64) -> Result<Vec<f64>, CliError> {
    let spec = spec.trim();
    let grid = if spec == "default" {
        default_grid()
    } else if let Some((start, rest)) = spec.split_once(':') {
        let (end, count) = rest
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("range `{spec}` must be start:end:count")))?;
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("`{v}` is not a number")))
        };
        let (start, end) = (num(start)?, num(end)?);
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("`{count}` is not a count")))?;
        match count {
            0 => Vec::new(),
            1 => vec![start],
            n => (0..n)
                .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    } else {
        spec.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("`{v}` is not a number")))
            })
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err(CliError::Usage("grid is empty".into()));
    }
    if let Some(v) = grid.iter().find(|v| !(lo..=hi).contains(*v)) {
        return Err(CliError::Usage(format!(
            "grid point {v} outside [{lo}, {hi}]"
        )));
    }
    Ok(grid)
}
