//! Maximal CHSH winning probability as a function of leakage.

use serde::{Deserialize, Serialize};

use super::moment::{build_moment_problem, Objective};
use super::words::Variant;
use crate::error::Result;
use crate::exec::Execution;
use crate::inequality::signaling_from_leakage;
use crate::scenario::BellScenario;
use crate::solver::{SolveStatus, SolverSettings};

/// `cos²(π/8)`.
pub const TSIRELSON_OMEGA: f64 = 0.853_553_390_593_273_7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub kappa: f64,
    pub kappa_s: f64,
    /// Optimal value, `NaN` when the solve failed.
    pub value: f64,
    pub variant: Variant,
    pub level: usize,
    pub status: SolveStatus,
    pub gap: f64,
}

impl CurvePoint {
    /// Whether the point may be published on a curve.
    pub fn is_usable(&self) -> bool {
        self.status.is_solved()
    }
}

/// `{0, 0.0125, …, 0.5}`.
pub fn default_grid() -> Vec<f64> {
    (0..=40).map(|i| i as f64 * 0.0125).collect()
}

/// Classical optimum with leakage: the prover learns `x` with probability `2κ`.
pub fn classical_line(kappa: f64) -> f64 {
    (1.0 - 2.0 * kappa) * 0.75 + 2.0 * kappa
}

/// Shifted analytic reference `min(1, cos²(π/8) + c·κ)`.
pub fn shifted_bound(kappa: f64, slope: f64) -> f64 {
    (TSIRELSON_OMEGA + slope * kappa).min(1.0)
}

/// One point: the level-`level` relaxation at `κ_S = 2κ`. Solver errors become `failure` points.
pub fn tsirelson_point(
    kappa: f64,
    level: usize,
    variant: Variant,
    settings: &SolverSettings,
) -> CurvePoint {
    let kappa_s = signaling_from_leakage(2, kappa).unwrap_or(f64::NAN);
    let failed = |status| CurvePoint {
        kappa,
        kappa_s,
        value: f64::NAN,
        variant,
        level,
        status,
        gap: f64::NAN,
    };
    let solved: Result<_> = build_moment_problem(
        &BellScenario::CHSH,
        level,
        kappa_s,
        Objective::chsh(),
        variant,
    )
    .and_then(|mp| mp.solve(settings));
    match solved {
        Ok(sol) if sol.report.status.is_solved() => CurvePoint {
            kappa,
            kappa_s,
            value: sol.value,
            variant,
            level,
            status: sol.report.status,
            gap: sol.report.gap,
        },
        Ok(sol) => failed(sol.report.status),
        Err(_) => failed(SolveStatus::Failure),
    }
}

/// Solves every grid point independently; output follows grid order.
pub fn tsirelson_curve(
    kappas: &[f64],
    level: usize,
    variant: Variant,
    settings: &SolverSettings,
    exec: Execution,
) -> Vec<CurvePoint> {
    exec.map(kappas, |&k| tsirelson_point(k, level, variant, settings))
}

/// Rows `kappa,kappa_s,value,variant,level,status,gap`.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "kappa", "kappa_s", "value", "variant", "level", "status", "gap",
    ])
    .expect("in-memory write");
    for p in points {
        w.write_record([
            format!("{}", p.kappa),
            format!("{}", p.kappa_s),
            format!("{:.10}", p.value),
            p.variant.to_string(),
            p.level.to_string(),
            p.status.to_string(),
            format!("{:.3e}", p.gap),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
}
