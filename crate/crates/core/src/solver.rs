//! Linear and semidefinite programs behind one interface, solved with Clarabel.
//!
//! A [`ConicProblem`] has scalar variables, linear rows and linear matrix
//! inequalities whose entries are affine in the scalars. LPs are problems
//! without PSD blocks.
//!
//! JSON interchange schema (all fields required):
//!
//! ```text
//! { "num_vars": n, "sense": "minimize" | "maximize",
//!   "objective": [[var, coeff], ...], "objective_constant": c,
//!   "constraints": [{"terms": [[var, coeff], ...], "relation": "eq"|"le"|"ge", "rhs": r}, ...],
//!   "psd_blocks": [{"size": k, "entries": [{"row": i, "col": j, "terms": [...], "constant": c}, ...]}, ...] }
//! ```
//!
//! Block entries are given for `row <= col`; the matrix is symmetric and
//! unspecified entries are zero.

use std::collections::BTreeMap;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable holding a JSON object that overrides [`SolverSettings`] fields.
pub const SETTINGS_ENV: &str = "CSOC_SOLVER_SETTINGS";

/// Sparse linear form: `(variable, coefficient)` pairs.
pub type Terms = Vec<(usize, f64)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConstraint {
    pub terms: Terms,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineEntry {
    pub row: usize,
    pub col: usize,
    pub terms: Terms,
    pub constant: f64,
}

/// A symmetric matrix, affine in the scalar variables, constrained PSD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdBlock {
    pub size: usize,
    pub entries: Vec<AffineEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConicProblem {
    pub num_vars: usize,
    pub sense: Sense,
    pub objective: Terms,
    pub objective_constant: f64,
    pub constraints: Vec<LinearConstraint>,
    pub psd_blocks: Vec<PsdBlock>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    Failure,
}

impl SolveStatus {
    /// Whether the reported primal point can be trusted as a solution.
    pub fn is_solved(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near-optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Failure => "failure",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Centralized numerical tolerances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Primal/dual feasibility tolerance handed to the backend.
    pub feas_tol: f64,
    /// Absolute primal-dual gap below which a solved problem is reported optimal.
    pub gap_tol: f64,
    /// Gap tolerance handed to the backend; tighter than `gap_tol` so audits pass.
    pub inner_gap_tol: f64,
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            feas_tol: 1e-8,
            gap_tol: 1e-7,
            inner_gap_tol: 1e-9,
            max_iter: 200,
        }
    }
}

impl SolverSettings {
    /// Defaults overridden by the JSON in [`SETTINGS_ENV`], if set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(SETTINGS_ENV) {
            Ok(text) if !text.trim().is_empty() => Ok(serde_json::from_str(&text)?),
            _ => Ok(SolverSettings::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Objective value at the primal point, in the problem's own sense.
    pub primal: f64,
    /// Dual objective value, in the problem's own sense.
    pub dual: f64,
    pub gap: f64,
    pub iterations: u32,
    /// Wall-clock seconds; excluded from serialized reports so they stay deterministic.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub report: SolveReport,
    pub x: Vec<f64>,
    /// Multiplier of each linear constraint in declaration order; nonnegative for
    /// inequalities, with the Lagrangian `obj + z·(lhs − rhs)` for `le` rows,
    /// `obj + z·(rhs − lhs)` for `ge` rows (minimization form).
    pub constraint_duals: Vec<f64>,
}

impl ConicProblem {
    pub fn new(sense: Sense) -> Self {
        ConicProblem {
            num_vars: 0,
            sense,
            objective: Vec::new(),
            objective_constant: 0.0,
            constraints: Vec::new(),
            psd_blocks: Vec::new(),
        }
    }

    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn add_vars(&mut self, n: usize) -> std::ops::Range<usize> {
        let start = self.num_vars;
        self.num_vars += n;
        start..self.num_vars
    }

    pub fn constrain(&mut self, terms: Terms, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(LinearConstraint {
            terms,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let check_terms = |t: &Terms, what: &str| -> Result<()> {
            for &(v, c) in t {
                if v >= self.num_vars {
                    return Err(Error::MalformedProblem(format!(
                        "{what} references variable {v}"
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::MalformedProblem(format!(
                        "{what} has a non-finite coefficient"
                    )));
                }
            }
            Ok(())
        };
        check_terms(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            check_terms(&c.terms, &format!("constraint {i}"))?;
            if !c.rhs.is_finite() {
                return Err(Error::MalformedProblem(format!(
                    "constraint {i} has a non-finite rhs"
                )));
            }
        }
        for (k, b) in self.psd_blocks.iter().enumerate() {
            if b.size == 0 {
                return Err(Error::MalformedProblem(format!("block {k} is empty")));
            }
            let mut seen = std::collections::BTreeSet::new();
            for e in &b.entries {
                if e.row > e.col || e.col >= b.size {
                    return Err(Error::MalformedProblem(format!(
                        "block {k} entry ({},{}) is not in the upper triangle of a {}x{} matrix",
                        e.row, e.col, b.size, b.size
                    )));
                }
                if !seen.insert((e.row, e.col)) {
                    return Err(Error::MalformedProblem(format!(
                        "block {k} repeats entry ({},{})",
                        e.row, e.col
                    )));
                }
                check_terms(&e.terms, &format!("block {k}"))?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: ConicProblem = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    /// Evaluates a linear form at a point.
    pub fn eval_terms(terms: &Terms, x: &[f64]) -> f64 {
        terms.iter().map(|&(v, c)| c * x[v]).sum()
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<Solution> {
        self.validate()?;
        let n = self.num_vars;
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut q = vec![0.0; n];
        for &(v, c) in &self.objective {
            q[v] += sign * c;
        }

        // Rows: equalities, then inequalities, then one svec group per block.
        let mut rows: Vec<BTreeMap<usize, f64>> = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let mut row_of_constraint = vec![0usize; self.constraints.len()];
        let mut push_row =
            |terms: &Terms, scale: f64, rhs: f64, rows: &mut Vec<BTreeMap<usize, f64>>| {
                let mut r = BTreeMap::new();
                for &(v, c) in terms {
                    *r.entry(v).or_insert(0.0) += scale * c;
                }
                rows.push(r);
                b.push(rhs);
            };
        let eqs: Vec<usize> = (0..self.constraints.len())
            .filter(|&i| self.constraints[i].relation == Relation::Eq)
            .collect();
        for &i in &eqs {
            let c = &self.constraints[i];
            row_of_constraint[i] = rows.len();
            push_row(&c.terms, 1.0, c.rhs, &mut rows);
        }
        if !eqs.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(eqs.len()));
        }
        let mut n_ineq = 0;
        for (i, c) in self.constraints.iter().enumerate() {
            let s = match c.relation {
                Relation::Eq => continue,
                Relation::Le => 1.0,
                Relation::Ge => -1.0,
            };
            row_of_constraint[i] = rows.len();
            push_row(&c.terms, s, s * c.rhs, &mut rows);
            n_ineq += 1;
        }
        if n_ineq > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(n_ineq));
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        for blk in &self.psd_blocks {
            let mut lookup = BTreeMap::new();
            for e in &blk.entries {
                lookup.insert((e.row, e.col), e);
            }
            // Upper triangle, column-major; s = b − A x equals svec of the block.
            for j in 0..blk.size {
                for i in 0..=j {
                    let scale = if i == j { 1.0 } else { sqrt2 };
                    match lookup.get(&(i, j)) {
                        Some(e) => push_row(&e.terms, -scale, scale * e.constant, &mut rows),
                        None => push_row(&Vec::new(), 0.0, 0.0, &mut rows),
                    }
                }
            }
            cones.push(SupportedConeT::PSDTriangleConeT(blk.size));
        }

        let m = rows.len();
        let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
        for (r, row) in rows.iter().enumerate() {
            for (&c, &v) in row {
                if v != 0.0 {
                    ii.push(r);
                    jj.push(c);
                    vv.push(v);
                }
            }
        }
        let a = CscMatrix::new_from_triplets(m, n, ii, jj, vv);
        let p = CscMatrix::zeros((n, n));

        let clarabel_settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(settings.max_iter)
            .tol_feas(settings.feas_tol.min(1e-8))
            .tol_gap_abs(settings.inner_gap_tol)
            .tol_gap_rel(settings.inner_gap_tol)
            .max_threads(1)
            .build()
            .map_err(|e| Error::Solver(format!("settings: {e:?}")))?;
        let start = Instant::now();
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, clarabel_settings)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let primal = sign * sol.obj_val + self.objective_constant;
        let dual = sign * sol.obj_val_dual + self.objective_constant;
        let gap = if primal.is_finite() && dual.is_finite() {
            (primal - dual).abs()
        } else {
            f64::INFINITY
        };
        let status = match sol.status {
            SolverStatus::Solved if gap < settings.gap_tol => SolveStatus::Optimal,
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::NearOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::Unbounded
            }
            _ => SolveStatus::Failure,
        };
        let constraint_duals = (0..self.constraints.len())
            .map(|i| sol.z.get(row_of_constraint[i]).copied().unwrap_or(f64::NAN))
            .collect();
        let report = SolveReport {
            status,
            primal,
            dual,
            gap,
            iterations: sol.iterations,
            wall_time: start.elapsed().as_secs_f64(),
        };
        Ok(Solution {
            report,
            x: sol.x.clone(),
            constraint_duals,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimize_x_above_three() {
        let mut p = ConicProblem::new(Sense::Minimize);
        let x = p.add_var();
        p.objective = vec![(x, 1.0)];
        p.constrain(vec![(x, 1.0)], Relation::Ge, 3.0);
        let s = p.solve(&SolverSettings::default()).unwrap();
        assert_eq!(s.report.status, SolveStatus::Optimal);
        assert!((s.report.primal - 3.0).abs() < 1e-7);
        assert!((s.constraint_duals[0] - 1.0).abs() < 1e-6);
    }

    /// max tr(C X), tr X = 1, X ⪰ 0 with C = diag(1, −1).
    fn top_eigen_problem(scale: f64) -> ConicProblem {
        let mut p = ConicProblem::new(Sense::Maximize);
        let v = p.add_vars(3); // x00, x01, x11
        let (x00, x01, x11) = (v.start, v.start + 1, v.start + 2);
        p.objective = vec![(x00, scale), (x11, -scale)];
        p.constrain(vec![(x00, 1.0), (x11, 1.0)], Relation::Eq, 1.0);
        p.psd_blocks.push(PsdBlock {
            size: 2,
            entries: vec![
                AffineEntry {
                    row: 0,
                    col: 0,
                    terms: vec![(x00, 1.0)],
                    constant: 0.0,
                },
                AffineEntry {
                    row: 0,
                    col: 1,
                    terms: vec![(x01, 1.0)],
                    constant: 0.0,
                },
                AffineEntry {
                    row: 1,
                    col: 1,
                    terms: vec![(x11, 1.0)],
                    constant: 0.0,
                },
            ],
        });
        p
    }

    #[test]
    fn top_eigenvalue_and_scaling() {
        let s1 = top_eigen_problem(1.0)
            .solve(&SolverSettings::default())
            .unwrap();
        assert_eq!(s1.report.status, SolveStatus::Optimal);
        assert!((s1.report.primal - 1.0).abs() < 1e-7);
        assert!((s1.report.primal - s1.report.dual).abs() < 1e-7);
        let s2 = top_eigen_problem(2.0)
            .solve(&SolverSettings::default())
            .unwrap();
        assert!((s2.report.primal - 2.0).abs() < 2e-7);
        assert!((s1.x[0] - s2.x[0]).abs() < 1e-6);
    }

    #[test]
    fn affine_offdiagonal_block() {
        // [[1, t], [t, 1]] ⪰ 0 → t ≤ 1.
        let mut p = ConicProblem::new(Sense::Maximize);
        let t = p.add_var();
        p.objective = vec![(t, 1.0)];
        p.psd_blocks.push(PsdBlock {
            size: 2,
            entries: vec![
                AffineEntry {
                    row: 0,
                    col: 0,
                    terms: vec![],
                    constant: 1.0,
                },
                AffineEntry {
                    row: 0,
                    col: 1,
                    terms: vec![(t, 1.0)],
                    constant: 0.0,
                },
                AffineEntry {
                    row: 1,
                    col: 1,
                    terms: vec![],
                    constant: 1.0,
                },
            ],
        });
        let s = p.solve(&SolverSettings::default()).unwrap();
        assert!((s.report.primal - 1.0).abs() < 1e-6, "{:?}", s.report);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = ConicProblem::new(Sense::Minimize);
        let x = p.add_var();
        p.objective = vec![(x, 1.0)];
        p.constrain(vec![(x, 1.0)], Relation::Ge, 3.0);
        p.constrain(vec![(x, 1.0)], Relation::Le, 2.0);
        assert_eq!(
            p.solve(&SolverSettings::default()).unwrap().report.status,
            SolveStatus::Infeasible
        );
        let mut q = ConicProblem::new(Sense::Maximize);
        let y = q.add_var();
        q.objective = vec![(y, 1.0)];
        q.constrain(vec![(y, 1.0)], Relation::Ge, 0.0);
        assert_eq!(
            q.solve(&SolverSettings::default()).unwrap().report.status,
            SolveStatus::Unbounded
        );
    }

    #[test]
    fn validation_rejects_bad_references() {
        let mut p = ConicProblem::new(Sense::Minimize);
        p.objective = vec![(3, 1.0)];
        assert!(matches!(
            p.solve(&SolverSettings::default()),
            Err(Error::MalformedProblem(_))
        ));
        let mut q = top_eigen_problem(1.0);
        q.psd_blocks[0].entries[1].row = 1;
        q.psd_blocks[0].entries[1].col = 0;
        assert!(q.validate().is_err());
    }

    #[test]
    fn json_roundtrip_solves_identically() {
        let p = top_eigen_problem(1.0);
        let q = ConicProblem::from_json(&p.to_json()).unwrap();
        assert_eq!(p, q);
        let a = p.solve(&SolverSettings::default()).unwrap().report.primal;
        let b = q.solve(&SolverSettings::default()).unwrap().report.primal;
        assert!((a - b).abs() < 1e-9);
        assert!(ConicProblem::from_json("{\"num_vars\":0}").is_err());
    }

    #[test]
    fn settings_defaults_are_pinned() {
        let s = SolverSettings::default();
        assert_eq!(s.feas_tol, 1e-8);
        assert_eq!(s.gap_tol, 1e-7);
        let partial: SolverSettings = serde_json::from_str("{\"gap_tol\":1e-6}").unwrap();
        assert_eq!(partial.gap_tol, 1e-6);
        assert_eq!(partial.feas_tol, 1e-8);
        assert!(serde_json::from_str::<SolverSettings>("{\"bogus\":1}").is_err());
    }
}
