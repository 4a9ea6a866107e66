//! Min-entropy of Bob's output given `X = 0, A = 0, Y = 0` and an adversary's guess.
//!
//! Each state block is split by the adversary's guess `e ∈ B`. The guessing
//! probability is the ratio `Σ_e tr(M(0,e) ψ(0|0,e)) / tr ψ(0|0)`; its supremum is
//! found by bisection on `t`, where each step maximizes `numerator − t·denominator`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::hierarchy::{MomentProblem, MomentSpec, Objective, ScoreConstraint, ScoreMode, Variant};
use crate::scenario::{BellFunctional, BellScenario};
use crate::solver::{Sense, SolveStatus, SolverSettings, Terms};

/// Upper limit on bisection steps.
pub const MAX_BISECTION: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub omega: f64,
    pub kappa_s: f64,
    pub p_guess: f64,
    pub h_min: f64,
    pub status: SolveStatus,
    pub bisection_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyOptions {
    pub score_mode: ScoreMode,
    /// Stop once the bracket is narrower than this.
    pub tol: f64,
    pub settings: SolverSettings,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        EntropyOptions {
            score_mode: ScoreMode::Equal,
            tol: 1e-9,
            settings: SolverSettings::default(),
        }
    }
}

/// The guessing problem with the objective left for [`GuessingProblem::excess`] to set.
pub struct GuessingProblem {
    mp: MomentProblem,
    numerator: Terms,
    denominator: Terms,
    settings: SolverSettings,
}

impl GuessingProblem {
    pub fn new(omega: f64, level: usize, kappa_s: f64, opts: &EntropyOptions) -> Result<Self> {
        if level < 2 {
            return Err(Error::InvalidParameter(
                "guessing probability needs level ≥ 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::InvalidParameter(format!(
                "score {omega} outside [0,1]"
            )));
        }
        let s = BellScenario::CHSH;
        let mut spec = MomentSpec::new(level, kappa_s, Variant::Quantum, Objective::Feasibility);
        spec.adversary = s.nb;
        spec.score = Some(ScoreConstraint {
            functional: BellFunctional::chsh(),
            value: omega,
            mode: opts.score_mode,
        });
        let mp = MomentProblem::build(&s, spec)?;
        let numerator = (0..s.nb)
            .flat_map(|e| mp.prob_terms(0, 0, Some(e), 0, e))
            .collect();
        let denominator = mp.norm_terms(0, 0, None);
        Ok(GuessingProblem {
            mp,
            numerator,
            denominator,
            settings: opts.settings.clone(),
        })
    }

    /// `max (numerator − t·denominator)`, or `None` when the constraints are infeasible.
    pub fn excess(&mut self, t: f64) -> Result<(Option<f64>, SolveStatus)> {
        let mut terms = self.numerator.clone();
        terms.extend(self.denominator.iter().map(|&(v, c)| (v, -t * c)));
        self.mp.set_linear_objective(Sense::Maximize, terms, 0.0);
        let sol = self.mp.solve(&self.settings)?;
        let status = sol.report.status;
        Ok((status.is_solved().then_some(sol.value), status))
    }

    pub fn problem(&self) -> &MomentProblem {
        &self.mp
    }
}

/// Supremum of the guessing ratio at CHSH score `omega`.
pub fn guessing_probability(omega: f64, level: usize, kappa_s: f64) -> Result<EntropyPoint> {
    guessing_probability_with(omega, level, kappa_s, &EntropyOptions::default())
}

pub fn guessing_probability_with(
    omega: f64,
    level: usize,
    kappa_s: f64,
    opts: &EntropyOptions,
) -> Result<EntropyPoint> {
    let mut gp = GuessingProblem::new(omega, level, kappa_s, opts)?;
    let nb = BellScenario::CHSH.nb as f64;
    let feasible_tol = opts.settings.feas_tol.max(1e-8);
    let point = |t: f64, status, iters| EntropyPoint {
        omega,
        kappa_s,
        p_guess: t,
        h_min: (-t.log2()).max(0.0),
        status,
        bisection_iters: iters,
    };

    let (lo_val, status) = gp.excess(1.0 / nb)?;
    match lo_val {
        None if status == SolveStatus::Infeasible => {
            return Err(Error::Infeasible(format!(
                "score {omega} unreachable at signaling budget {kappa_s}"
            )))
        }
        None => return Err(Error::Solver(format!("guessing problem returned {status}"))),
        Some(_) => {}
    }
    let mut worst = status;
    let (hi_val, st) = gp.excess(1.0)?;
    if hi_val.is_some_and(|v| v >= -feasible_tol) {
        return Ok(point(1.0, st, 0));
    }
    let (mut lo, mut hi) = (1.0 / nb, 1.0);
    let mut iters = 0;
    while hi - lo > opts.tol {
        if iters == MAX_BISECTION {
            return Err(Error::BisectionDiverged(iters));
        }
        iters += 1;
        let mid = 0.5 * (lo + hi);
        let (v, st) = gp.excess(mid)?;
        if st == SolveStatus::NearOptimal {
            worst = st;
        }
        match v {
            Some(v) if v >= -feasible_tol => lo = mid,
            Some(_) => hi = mid,
            None => return Err(Error::Solver(format!("bisection step returned {st}"))),
        }
    }
    Ok(point(lo, worst, iters))
}

/// Solves each score independently; failures become marked points.
pub fn entropy_curve(
    omegas: &[f64],
    level: usize,
    kappa_s: f64,
    opts: &EntropyOptions,
    exec: Execution,
) -> Vec<EntropyPoint> {
    exec.map(omegas, |&omega| {
        guessing_probability_with(omega, level, kappa_s, opts).unwrap_or_else(|e| EntropyPoint {
            omega,
            kappa_s,
            p_guess: f64::NAN,
            h_min: f64::NAN,
            status: match e {
                Error::Infeasible(_) => SolveStatus::Infeasible,
                _ => SolveStatus::Failure,
            },
            bisection_iters: 0,
        })
    })
}

/// Rows `omega,kappa_s,p_guess,h_min,status,bisection_iters`.
pub fn entropy_csv(points: &[EntropyPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "omega",
        "kappa_s",
        "p_guess",
        "h_min",
        "status",
        "bisection_iters",
    ])
    .expect("in-memory write");
    for p in points {
        w.write_record([
            format!("{}", p.omega),
            format!("{}", p.kappa_s),
            format!("{:.10}", p.p_guess),
            format!("{:.10}", p.h_min),
            p.status.to_string(),
            p.bisection_iters.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
}
