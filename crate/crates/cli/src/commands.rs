use std::path::{Path, PathBuf};

use csoc_core::entropy::{entropy_csv, entropy_curve, EntropyOptions};
use csoc_core::exec::Execution;
use csoc_core::hierarchy::{classical_line, curve_csv, shifted_bound, tsirelson_curve};
use csoc_core::inequality::{showcase_functional, LeakageParams};
use csoc_core::polytope::{amdl_membership, local_membership, mdl_membership};
use csoc_core::protocol::tcf::honest_behavior;
use csoc_core::protocol::{
    hidden_input_diagnostic, optimize_tilted, run_compiled_chsh, run_tcf_protocol, write_jsonl,
    ClassicalCompiled, CompiledStrategy, MockQhe, PhaseAMode, RunOptions, SimulationRun, TcfConfig,
    TcfProver, TiltedStrategy, ToyTcf,
};
use csoc_core::scenario::{chsh_winning_probability, JointBehavior, Mode};
use csoc_core::solver::SolverSettings;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{
    parse_grid, CompiledKind, EntropyConfig, MembershipConfig, PhaseAKind, Protocol, ProverKind,
    RunConfig, SetSpec, SimulateConfig, TsirelsonConfig,
};
use crate::CliError;

/// Everything a command produces; nothing touches the filesystem until [`Outcome::write`].
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(PathBuf, String)>,
    pub stdout: String,
    pub exit_code: u8,
}

impl Outcome {
    pub fn write(&self) -> Result<(), CliError> {
        for (path, text) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
            }
            std::fs::write(path, text).map_err(|e| CliError::Io(path.clone(), e))?;
        }
        Ok(())
    }
}

/// SHA-256 of the configuration with its output locations removed, so the same
/// computation has the same hash wherever it is written.
pub fn config_hash(config: &RunConfig) -> String {
    let mut value = serde_json::to_value(config).expect("config serializes");
    if let Some(map) = value.as_object_mut() {
        map.remove("output");
        map.remove("out_dir");
    }
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn of(config: &RunConfig) -> Self {
        Provenance {
            tool: format!("csoc {}", env!("CARGO_PKG_VERSION")),
            config_sha256: config_hash(config),
            seed: config.seed(),
        }
    }

    /// `#`-prefixed lines placed above the CSV header row.
    pub fn csv_header(&self) -> String {
        format!(
            "# tool: {}\n# config-sha256: {}\n# seed: {}\n",
            self.tool, self.config_sha256, self.seed
        )
    }
}

pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    let prov = Provenance::of(config);
    match config {
        RunConfig::Membership(c) => membership(c),
        RunConfig::Tsirelson(c) => tsirelson(c, &prov),
        RunConfig::Entropy(c) => entropy(c, &prov),
        RunConfig::Simulate(c) => simulate(c, &prov),
    }
}

fn membership(c: &MembershipConfig) -> Result<Outcome, CliError> {
    let text =
        std::fs::read_to_string(&c.behavior).map_err(|e| CliError::Io(c.behavior.clone(), e))?;
    let p = JointBehavior::from_json(&text)?;
    let verdict = match c.set {
        SetSpec::Local => local_membership(&p)?,
        SetSpec::Mdl(params) => mdl_membership(&p, params)?,
        SetSpec::Amdl(k) => amdl_membership(&p, k)?,
    };
    let json = serde_json::to_string_pretty(&verdict)? + "\n";
    let mut out = Outcome {
        exit_code: if verdict.inside { 0 } else { 1 },
        ..Default::default()
    };
    match &c.output {
        Some(path) => {
            out.files.push((path.clone(), json));
            out.stdout = format!(
                "{} {}\n",
                if verdict.inside { "inside" } else { "outside" },
                c.set
            );
        }
        None => out.stdout = json,
    }
    Ok(out)
}

fn tsirelson(c: &TsirelsonConfig, prov: &Provenance) -> Result<Outcome, CliError> {
    let grid = parse_grid(&c.kappa_grid, 0.0, 0.5)?;
    let settings = SolverSettings::from_env()?;
    let points = tsirelson_curve(&grid, c.level, c.variant, &settings, Execution::Parallel);
    let mut reference = String::from("kappa,classical_line,shifted_bound\n");
    for &k in &grid {
        reference.push_str(&format!(
            "{k},{:.10},{:.10}\n",
            classical_line(k),
            shifted_bound(k, c.shifted_slope)
        ));
    }
    let failed = points.iter().filter(|p| !p.is_usable()).count();
    let companion = c.output.with_extension("reference.csv");
    Ok(Outcome {
        stdout: format!(
            "{} points ({} failed) -> {}, {}\n",
            points.len(),
            failed,
            c.output.display(),
            companion.display()
        ),
        files: vec![
            (c.output.clone(), prov.csv_header() + &curve_csv(&points)),
            (companion, prov.csv_header() + &reference),
        ],
        exit_code: 0,
    })
}

fn entropy(c: &EntropyConfig, prov: &Provenance) -> Result<Outcome, CliError> {
    let grid = parse_grid(&c.omega_grid, 0.0, 1.0)?;
    let opts = EntropyOptions {
        settings: SolverSettings::from_env()?,
        ..Default::default()
    };
    let points = entropy_curve(&grid, c.level, c.kappa_s, &opts, Execution::Parallel);
    Ok(Outcome {
        stdout: format!("{} points -> {}\n", points.len(), c.output.display()),
        files: vec![(c.output.clone(), prov.csv_header() + &entropy_csv(&points))],
        exit_code: 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub provenance: Provenance,
    pub protocol: Protocol,
    pub shots: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub continued: u64,
    pub chsh: f64,
    /// Binomial standard error of `chsh`.
    pub chsh_sigma: f64,
    pub kappa: f64,
    pub slack: f64,
    pub showcase: Option<f64>,
    /// Showcase value of the exact behavior, when the prover has one in closed form.
    pub showcase_analytic: Option<f64>,
    pub diagnostic: Option<f64>,
    pub notes: Vec<String>,
}

fn simulate(c: &SimulateConfig, prov: &Provenance) -> Result<Outcome, CliError> {
    let kappa = c.kappa();
    let slack = c.slack_rule().slack(kappa);
    let mut notes = Vec::new();
    let functional = match LeakageParams::new(kappa, slack).and_then(showcase_functional) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("showcase not evaluated: {e}"));
            None
        }
    };
    let opts = RunOptions {
        keep_records: true,
        ..RunOptions::new(c.shots, c.seed)
    };
    let (run, analytic): (SimulationRun, Option<JointBehavior>) = match c.protocol {
        Protocol::Tcf => {
            let tcf = ToyTcf::generate(c.n, c.seed)?;
            let config = TcfConfig {
                phase_a: match c.phase_a {
                    PhaseAKind::Shortcut => PhaseAMode::Shortcut,
                    PhaseAKind::Statevector => PhaseAMode::Statevector,
                },
                ..TcfConfig::default()
            };
            let (prover, analytic) = match c.prover {
                ProverKind::Honest => (TcfProver::Honest, Some(honest_behavior(c.n, &config))),
                ProverKind::ClassicalOptimal => (TcfProver::ClassicalOptimal, None),
            };
            (run_tcf_protocol(&tcf, prover, &config, &opts)?, analytic)
        }
        Protocol::Compiled => {
            let qhe = MockQhe::new(c.leak)?;
            let (strategy, analytic) = match c.strategy {
                CompiledKind::Ideal => (
                    CompiledStrategy::Ideal,
                    Some(TiltedStrategy::ideal().behavior(c.leak)),
                ),
                CompiledKind::Tilted => {
                    let params = LeakageParams::new(kappa, slack)?;
                    let (st, _) = optimize_tilted(params, c.leak, c.seed)?;
                    (CompiledStrategy::MdlTilted(st), Some(st.behavior(c.leak)))
                }
                CompiledKind::Classical => {
                    let st = ClassicalCompiled {
                        a_of_x: [0, 0],
                        b_table: [[0, 0], [0, 1]],
                    };
                    (CompiledStrategy::Classical(st), None)
                }
            };
            (run_compiled_chsh(qhe, &strategy, &opts)?, analytic)
        }
    };

    let behavior = run.behavior()?;
    let chsh = chsh_winning_probability(&behavior, Mode::Diagnostic)?.omega;
    let n = run.tally.continued().max(1) as f64;
    let diagnostic = match hidden_input_diagnostic(&run.records) {
        Ok(d) => Some(d),
        Err(e) => {
            notes.push(format!("diagnostic unavailable: {e}"));
            None
        }
    };
    let eval = |p: &JointBehavior| functional.as_ref().map(|f| f.evaluate(p)).transpose();
    let summary = Summary {
        provenance: prov.clone(),
        protocol: c.protocol,
        shots: c.shots,
        accepted: run.tally.accepted,
        rejected: run.tally.rejected,
        continued: run.tally.continued(),
        chsh,
        chsh_sigma: (chsh * (1.0 - chsh) / n).sqrt(),
        kappa,
        slack,
        showcase: eval(&behavior)?,
        showcase_analytic: analytic.as_ref().map(eval).transpose()?.flatten(),
        diagnostic,
        notes,
    };

    let dir = &c.out_dir;
    let stdout = render_summary(&summary, dir);
    Ok(Outcome {
        files: vec![
            (
                dir.join("records.jsonl"),
                write_jsonl(&run.header, &run.records),
            ),
            (dir.join("behavior.json"), behavior.to_json() + "\n"),
            (
                dir.join("summary.json"),
                serde_json::to_string_pretty(&summary)? + "\n",
            ),
        ],
        stdout,
        exit_code: 0,
    })
}

fn render_summary(s: &Summary, dir: &Path) -> String {
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4e}"));
    let mut out = format!(
        "protocol      {:?}\nshots         {} (continued {}, accepted {}, rejected {})\n\
         chsh          {:.6} ± {:.6}\nshowcase      {} at kappa {} slack {:.6}\n\
         analytic      {}\ndiagnostic    {}\n",
        s.protocol,
        s.shots,
        s.continued,
        s.accepted,
        s.rejected,
        s.chsh,
        s.chsh_sigma,
        opt(s.showcase),
        s.kappa,
        s.slack,
        opt(s.showcase_analytic),
        s.diagnostic
            .map_or("n/a".to_string(), |d| format!("{d:.6}")),
    );
    for n in &s.notes {
        out.push_str(&format!("note          {n}\n"));
    }
    out.push_str(&format!("artifacts     {}\n", dir.display()));
    out
}
