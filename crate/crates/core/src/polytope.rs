//! Membership in the local, MDL(l, h) and AMDL(κ) polytopes.
//!
//! Each test solves an LP over deterministic strategies that minimizes the
//! ℓ∞ distance `t` between the query and the polytope. The query is inside when
//! `t ≤ tol`; otherwise the LP dual gives a separating functional. The module
//! also provides the constructive one-sided decomposition and the two
//! uniform-damping continuity operations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{
    total_variation, BellFunctional, BellScenario, DeterministicStrategy, JointBehavior, Mode,
    EQ_TOL, NORM_TOL,
};
use crate::solver::{ConicProblem, Relation, Sense, SolverSettings, Terms};

/// Atoms lighter than this are interior-point noise and are dropped from witnesses.
const ATOM_FLOOR: f64 = 1e-8;

/// Bounds `l ≤ P(x, y | γ) ≤ h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdlParams {
    pub l: f64,
    pub h: f64,
}

impl MdlParams {
    pub fn new(l: f64, h: f64) -> Result<Self> {
        if !(0.0 <= l && l <= h && h <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 ≤ l ≤ h ≤ 1, got l={l}, h={h}"
            )));
        }
        Ok(MdlParams { l, h })
    }

    /// Measurement independence: `l = h = 1/(|X||Y|)`.
    pub fn independent(s: &BellScenario) -> Self {
        let eta = 1.0 / (s.nx * s.ny) as f64;
        MdlParams { l: eta, h: eta }
    }
}

/// Hidden-variable atom with a law over the virtual input only (y is uniform).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmdlAtom {
    pub weight: f64,
    /// `P(x | γ)`.
    pub input_law: Vec<f64>,
    /// `response_a[x][a] = P_γ(a | x)`.
    pub response_a: Vec<Vec<f64>>,
    /// `response_b[y][b] = P_γ(b | y)`.
    pub response_b: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmdlWitness {
    pub scenario: BellScenario,
    pub atoms: Vec<AmdlAtom>,
}

/// Hidden-variable atom with a joint law `P(x, y | γ)` indexed by `x * ny + y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdlAtom {
    pub weight: f64,
    pub input_law: Vec<f64>,
    pub response_a: Vec<Vec<f64>>,
    pub response_b: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdlWitness {
    pub scenario: BellScenario,
    pub atoms: Vec<MdlAtom>,
}

fn point_mass(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

fn deterministic_responses(
    s: &BellScenario,
    st: &DeterministicStrategy,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (
        st.fa.iter().map(|&a| point_mass(s.na, a)).collect(),
        st.fb.iter().map(|&b| point_mass(s.nb, b)).collect(),
    )
}

fn is_distribution(v: &[f64]) -> bool {
    v.iter().all(|w| w.is_finite() && *w >= -EQ_TOL)
        && (v.iter().sum::<f64>() - 1.0).abs() <= NORM_TOL
}

fn check_responses(s: &BellScenario, ra: &[Vec<f64>], rb: &[Vec<f64>]) -> Result<()> {
    let ok_a = ra.len() == s.nx && ra.iter().all(|r| r.len() == s.na && is_distribution(r));
    let ok_b = rb.len() == s.ny && rb.iter().all(|r| r.len() == s.nb && is_distribution(r));
    if ok_a && ok_b {
        Ok(())
    } else {
        Err(Error::InvalidParameter("malformed response table".into()))
    }
}

impl AmdlWitness {
    pub fn new(scenario: BellScenario, atoms: Vec<AmdlAtom>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > NORM_TOL || atoms.iter().any(|a| a.weight < -EQ_TOL) {
            return Err(Error::InvalidParameter(format!(
                "atom weights sum to {total}"
            )));
        }
        for a in &atoms {
            if a.input_law.len() != scenario.nx || !is_distribution(&a.input_law) {
                return Err(Error::InvalidParameter(
                    "input law must be a distribution over X".into(),
                ));
            }
            check_responses(&scenario, &a.response_a, &a.response_b)?;
        }
        Ok(AmdlWitness { scenario, atoms })
    }

    /// `E_γ[max_x P(x|γ)] − 1/|X|`.
    pub fn leakage(&self) -> f64 {
        let nx = self.scenario.nx as f64;
        self.atoms
            .iter()
            .map(|a| a.weight * max_of(&a.input_law))
            .sum::<f64>()
            - 1.0 / nx
    }

    pub fn behavior(&self) -> JointBehavior {
        let s = self.scenario;
        let py = 1.0 / s.ny as f64;
        let mut p = vec![0.0; s.cells()];
        for atom in &self.atoms {
            for (i, v) in p.iter_mut().enumerate() {
                let (a, b, x, y) = s.cell(i);
                *v += atom.weight
                    * atom.input_law[x]
                    * py
                    * atom.response_a[x][a]
                    * atom.response_b[y][b];
            }
        }
        JointBehavior::from_solver(s, p).expect("witness synthesizes a distribution")
    }
}

impl MdlWitness {
    pub fn new(scenario: BellScenario, atoms: Vec<MdlAtom>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > NORM_TOL || atoms.iter().any(|a| a.weight < -EQ_TOL) {
            return Err(Error::InvalidParameter(format!(
                "atom weights sum to {total}"
            )));
        }
        for a in &atoms {
            if a.input_law.len() != scenario.nx * scenario.ny || !is_distribution(&a.input_law) {
                return Err(Error::InvalidParameter(
                    "input law must be a distribution over X×Y".into(),
                ));
            }
            check_responses(&scenario, &a.response_a, &a.response_b)?;
        }
        Ok(MdlWitness { scenario, atoms })
    }

    /// Smallest and largest `P(x, y | γ)` over atoms with positive weight.
    pub fn input_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in self.atoms.iter().filter(|a| a.weight > 0.0) {
            for &v in &a.input_law {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    pub fn behavior(&self) -> JointBehavior {
        let s = self.scenario;
        let mut p = vec![0.0; s.cells()];
        for atom in &self.atoms {
            for (i, v) in p.iter_mut().enumerate() {
                let (a, b, x, y) = s.cell(i);
                *v += atom.weight
                    * atom.input_law[x * s.ny + y]
                    * atom.response_a[x][a]
                    * atom.response_b[y][b];
            }
        }
        JointBehavior::from_solver(s, p).expect("witness synthesizes a distribution")
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Witness {
    Amdl(AmdlWitness),
    Mdl(MdlWitness),
}

impl Witness {
    pub fn behavior(&self) -> JointBehavior {
        match self {
            Witness::Amdl(w) => w.behavior(),
            Witness::Mdl(w) => w.behavior(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Certificate {
    Witness { witness: Witness },
    Separating { functional: BellFunctional },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub inside: bool,
    /// Set when the ℓ∞ residual is small enough that a perturbation of the query
    /// or of the tolerance could flip the verdict.
    pub marginal: bool,
    /// Optimal ℓ∞ distance from the query to the polytope's image.
    pub residual: f64,
    pub certificate: Certificate,
}

impl MembershipVerdict {
    pub fn witness(&self) -> Option<&Witness> {
        match &self.certificate {
            Certificate::Witness { witness } => Some(witness),
            Certificate::Separating { .. } => None,
        }
    }

    pub fn separating(&self) -> Option<&BellFunctional> {
        match &self.certificate {
            Certificate::Separating { functional } => Some(functional),
            Certificate::Witness { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MembershipOptions {
    /// Largest ℓ∞ residual counted as inside.
    pub tol: f64,
    /// Residuals in `(marginal_low, marginal_high]` mark the verdict marginal.
    pub marginal_low: f64,
    pub marginal_high: f64,
    /// Allowed deviation of `P(y)` from uniform for AMDL queries.
    pub y_marginal_tol: f64,
    pub solver: SolverSettings,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        MembershipOptions {
            tol: 1e-8,
            marginal_low: 1e-9,
            marginal_high: 1e-6,
            y_marginal_tol: 1e-6,
            solver: SolverSettings::default(),
        }
    }
}

/// An LP whose nonnegative columns each add a fixed vector to the synthesized behavior.
struct PolytopeLp {
    scenario: BellScenario,
    strategies: Vec<DeterministicStrategy>,
    /// `columns[k]` lists `(cell, coefficient)`.
    columns: Vec<Vec<(usize, f64)>>,
    num_aux: usize,
    /// Constraints over columns (indices `0..columns.len()`) and auxiliaries after them.
    constraints: Vec<(Terms, Relation, f64)>,
}

impl PolytopeLp {
    fn base_problem(&self, sense: Sense) -> ConicProblem {
        let mut p = ConicProblem::new(sense);
        let vars = p.add_vars(self.columns.len() + self.num_aux);
        for v in vars {
            p.constrain(vec![(v, 1.0)], Relation::Ge, 0.0);
        }
        for (t, r, b) in &self.constraints {
            p.constrain(t.clone(), *r, *b);
        }
        p
    }

    fn synthesized_terms(&self) -> Vec<Terms> {
        let mut rows = vec![Vec::new(); self.scenario.cells()];
        for (k, col) in self.columns.iter().enumerate() {
            for &(cell, c) in col {
                rows[cell].push((k, c));
            }
        }
        rows
    }

    fn solve(
        &self,
        query: &JointBehavior,
        opts: &MembershipOptions,
    ) -> Result<(f64, Vec<f64>, Option<BellFunctional>)> {
        let mut lp = self.base_problem(Sense::Minimize);
        let t = lp.add_var();
        lp.objective = vec![(t, 1.0)];
        let rows = self.synthesized_terms();
        let mut upper = Vec::new();
        let mut lower = Vec::new();
        for (cell, terms) in rows.iter().enumerate() {
            let target = query.probabilities()[cell];
            let mut up = terms.clone();
            up.push((t, -1.0));
            upper.push(lp.constrain(up, Relation::Le, target));
            let mut lo = terms.clone();
            lo.push((t, 1.0));
            lower.push(lp.constrain(lo, Relation::Ge, target));
        }
        let sol = lp.solve(&opts.solver)?;
        if !sol.report.status.is_solved() {
            return Err(Error::Solver(format!(
                "membership LP ended {}",
                sol.report.status
            )));
        }
        let residual = sol.x[t].max(0.0);
        let x = sol.x[..self.columns.len() + self.num_aux].to_vec();
        if residual <= opts.tol {
            return Ok((residual, x, None));
        }

        // v = z⁻ − z⁺ satisfies v·P − max_{Q ∈ polytope} v·Q = residual.
        let v: Vec<f64> = (0..rows.len())
            .map(|c| sol.constraint_duals[lower[c]] - sol.constraint_duals[upper[c]])
            .collect();
        let mut support = self.base_problem(Sense::Maximize);
        support.objective = rows
            .iter()
            .zip(&v)
            .flat_map(|(terms, &vc)| terms.iter().map(move |&(k, c)| (k, c * vc)))
            .collect();
        // The offset must bound the support from above, so solve tightly and keep the larger of
        // the primal and dual objectives.
        let tight = SolverSettings {
            feas_tol: opts.solver.feas_tol.min(1e-11),
            inner_gap_tol: opts.solver.inner_gap_tol.min(1e-12),
            ..opts.solver.clone()
        };
        let sup = support.solve(&tight)?;
        if !sup.report.status.is_solved() {
            return Err(Error::Solver(format!(
                "support LP ended {}",
                sup.report.status
            )));
        }
        let support_value = sup.report.primal.max(sup.report.dual);
        let scale = v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if scale <= 0.0 {
            return Err(Error::Solver("degenerate dual certificate".into()));
        }
        let f = BellFunctional::new(
            self.scenario,
            -support_value / scale,
            v.iter().map(|c| c / scale).collect(),
        )?;
        Ok((residual, x, Some(f)))
    }

    fn verdict(
        &self,
        query: &JointBehavior,
        opts: &MembershipOptions,
        make_witness: impl Fn(&[f64]) -> Result<Witness>,
    ) -> Result<MembershipVerdict> {
        let (residual, x, sep) = self.solve(query, opts)?;
        let marginal = residual > opts.marginal_low && residual <= opts.marginal_high;
        let certificate = match sep {
            None => Certificate::Witness {
                witness: make_witness(&x)?,
            },
            Some(functional) => Certificate::Separating { functional },
        };
        Ok(MembershipVerdict {
            inside: residual <= opts.tol,
            marginal,
            residual,
            certificate,
        })
    }
}

fn check_query(p: &JointBehavior) -> Result<()> {
    if p.scenario().num_strategies() > 4096 {
        return Err(Error::InvalidParameter(
            "scenario has too many deterministic strategies for the LP".into(),
        ));
    }
    Ok(())
}

/// Membership in AMDL(κ) with default options.
pub fn amdl_membership(p: &JointBehavior, kappa: f64) -> Result<MembershipVerdict> {
    amdl_membership_with(p, kappa, &MembershipOptions::default())
}

pub fn amdl_membership_with(
    p: &JointBehavior,
    kappa: f64,
    opts: &MembershipOptions,
) -> Result<MembershipVerdict> {
    check_query(p)?;
    let s = *p.scenario();
    let kmax = 1.0 - 1.0 / s.nx as f64;
    if !(0.0..=kmax + EQ_TOL).contains(&kappa) {
        return Err(Error::InvalidParameter(format!(
            "kappa {kappa} outside [0, {kmax}]"
        )));
    }
    let ym = p.y_marginal();
    if ym
        .iter()
        .any(|v| (v - 1.0 / s.ny as f64).abs() > opts.y_marginal_tol)
    {
        p.check_uniform_y(Mode::Exact)?;
    }
    let strategies = s.strategies();
    let ns = strategies.len();
    let py = 1.0 / s.ny as f64;
    // Column s*nx + x is w_{s,x}; auxiliary ns*nx + s is r_s.
    let mut columns = Vec::with_capacity(ns * s.nx);
    for st in &strategies {
        for x in 0..s.nx {
            columns.push(
                (0..s.ny)
                    .map(|y| (s.index(st.fa[x], st.fb[y], x, y), py))
                    .collect(),
            );
        }
    }
    let wcount = ns * s.nx;
    let mut constraints = vec![((0..wcount).map(|k| (k, 1.0)).collect(), Relation::Eq, 1.0)];
    for si in 0..ns {
        for x in 0..s.nx {
            constraints.push((
                vec![(wcount + si, 1.0), (si * s.nx + x, -1.0)],
                Relation::Ge,
                0.0,
            ));
        }
    }
    constraints.push((
        (wcount..wcount + ns).map(|k| (k, 1.0)).collect(),
        Relation::Le,
        1.0 / s.nx as f64 + kappa,
    ));
    let lp = PolytopeLp {
        scenario: s,
        strategies,
        columns,
        num_aux: ns,
        constraints,
    };
    lp.verdict(p, opts, |x| {
        let mut atoms = Vec::new();
        for (si, st) in lp.strategies.iter().enumerate() {
            let w: Vec<f64> = (0..s.nx).map(|k| x[si * s.nx + k].max(0.0)).collect();
            let g: f64 = w.iter().sum();
            if g > ATOM_FLOOR {
                let (response_a, response_b) = deterministic_responses(&s, st);
                atoms.push(AmdlAtom {
                    weight: g,
                    input_law: w.iter().map(|v| v / g).collect(),
                    response_a,
                    response_b,
                });
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        atoms.iter_mut().for_each(|a| a.weight /= total);
        Ok(Witness::Amdl(AmdlWitness::new(s, atoms)?))
    })
}

/// Membership in MDL(l, h) with default options.
pub fn mdl_membership(p: &JointBehavior, params: MdlParams) -> Result<MembershipVerdict> {
    mdl_membership_with(p, params, &MembershipOptions::default())
}

pub fn mdl_membership_with(
    p: &JointBehavior,
    params: MdlParams,
    opts: &MembershipOptions,
) -> Result<MembershipVerdict> {
    check_query(p)?;
    let params = MdlParams::new(params.l, params.h)?;
    let s = *p.scenario();
    let strategies = s.strategies();
    let ns = strategies.len();
    let nin = s.nx * s.ny;
    // Column s*nin + (x*ny + y) is u_{s,(x,y)}.
    let mut columns = Vec::with_capacity(ns * nin);
    for st in &strategies {
        for x in 0..s.nx {
            for y in 0..s.ny {
                columns.push(vec![(s.index(st.fa[x], st.fb[y], x, y), 1.0)]);
            }
        }
    }
    let mut constraints = vec![((0..ns * nin).map(|k| (k, 1.0)).collect(), Relation::Eq, 1.0)];
    for si in 0..ns {
        for j in 0..nin {
            let lam = |c: f64| -> Terms {
                (0..nin)
                    .map(|jj| (si * nin + jj, if jj == j { 1.0 - c } else { -c }))
                    .collect()
            };
            if params.l > 0.0 {
                constraints.push((lam(params.l), Relation::Ge, 0.0));
            }
            if params.h < 1.0 {
                constraints.push((lam(params.h), Relation::Le, 0.0));
            }
        }
    }
    let lp = PolytopeLp {
        scenario: s,
        strategies,
        columns,
        num_aux: 0,
        constraints,
    };
    lp.verdict(p, opts, |x| {
        let mut atoms = Vec::new();
        for (si, st) in lp.strategies.iter().enumerate() {
            let u: Vec<f64> = (0..nin).map(|j| x[si * nin + j].max(0.0)).collect();
            let lam: f64 = u.iter().sum();
            if lam > ATOM_FLOOR {
                let (response_a, response_b) = deterministic_responses(&s, st);
                atoms.push(MdlAtom {
                    weight: lam,
                    input_law: u.iter().map(|v| v / lam).collect(),
                    response_a,
                    response_b,
                });
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        atoms.iter_mut().for_each(|a| a.weight /= total);
        Ok(Witness::Mdl(MdlWitness::new(s, atoms)?))
    })
}

/// Membership in the local set: MDL with `l = h = 1/(|X||Y|)`.
pub fn local_membership(p: &JointBehavior) -> Result<MembershipVerdict> {
    mdl_membership(p, MdlParams::independent(p.scenario()))
}

/// Result of splitting an AMDL witness at the threshold `M(γ) ≤ κ + ϑ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    /// Mass of atoms above the threshold.
    pub alpha: f64,
    /// Behavior of the atoms below the threshold, renormalized.
    pub good: JointBehavior,
    /// Behavior of the atoms above the threshold, or uniform when `alpha = 0`.
    pub bad: JointBehavior,
    pub params: MdlParams,
    /// Whether `l_ϑ` was negative and clamped to zero.
    pub clamped: bool,
    pub good_witness: MdlWitness,
}

/// `h_ϑ = (1/|Y|)(1/|X| + κ + ϑ)` and `l_ϑ = (1/|Y|)(1 − (|X|−1)(1/|X| + κ + ϑ))`,
/// with `l_ϑ` clamped at 0 and `h_ϑ` at 1. The flag reports clamping of `l_ϑ`.
pub fn threshold_params(s: &BellScenario, kappa: f64, slack: f64) -> (MdlParams, bool) {
    let (nx, ny) = (s.nx as f64, s.ny as f64);
    let top = 1.0 / nx + kappa + slack;
    let h = (top / ny).min(1.0);
    let l = (1.0 - (nx - 1.0) * top) / ny;
    (
        MdlParams {
            l: l.max(0.0).min(h),
            h,
        },
        l < 0.0,
    )
}

pub fn amdl_decompose(w: &AmdlWitness, kappa: f64, slack: f64) -> Result<Decomposition> {
    if slack <= 0.0 {
        return Err(Error::InvalidParameter("slack must be positive".into()));
    }
    if w.leakage() > kappa + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "witness leakage {} exceeds kappa {kappa}",
            w.leakage()
        )));
    }
    let s = w.scenario;
    let threshold = kappa + slack;
    let excess = |a: &AmdlAtom| max_of(&a.input_law) - 1.0 / s.nx as f64;
    let (bad, good): (Vec<&AmdlAtom>, Vec<&AmdlAtom>) =
        w.atoms.iter().partition(|a| excess(a) > threshold);
    let alpha: f64 = bad.iter().map(|a| a.weight).sum();
    let renorm = |atoms: &[&AmdlAtom], total: f64| -> Vec<AmdlAtom> {
        atoms
            .iter()
            .map(|a| AmdlAtom {
                weight: a.weight / total,
                ..(*a).clone()
            })
            .collect()
    };
    let good_atoms = renorm(&good, 1.0 - alpha);
    let good_w = AmdlWitness::new(s, good_atoms.clone())?;
    let bad_b = if alpha > 0.0 {
        AmdlWitness::new(s, renorm(&bad, alpha))?.behavior()
    } else {
        JointBehavior::uniform(s)
    };
    let (params, clamped) = threshold_params(&s, kappa, slack);
    let py = 1.0 / s.ny as f64;
    let mdl_atoms = good_atoms
        .into_iter()
        .map(|a| MdlAtom {
            weight: a.weight,
            input_law: (0..s.nx * s.ny)
                .map(|j| a.input_law[j / s.ny] * py)
                .collect(),
            response_a: a.response_a,
            response_b: a.response_b,
        })
        .collect();
    Ok(Decomposition {
        alpha,
        good: good_w.behavior(),
        bad: bad_b,
        params,
        clamped,
        good_witness: MdlWitness::new(s, mdl_atoms)?,
    })
}

impl Decomposition {
    /// `(1 − α)·good + α·bad`.
    pub fn recombine(&self) -> JointBehavior {
        self.bad.mix(self.alpha, &self.good).expect("same scenario")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Damped {
    pub behavior: JointBehavior,
    pub witness: MdlWitness,
    /// Weight moved onto the uniform input law.
    pub q: f64,
}

/// Mixes every atom's input law toward uniform with `q = ε/(μ + ε)`, where
/// `μ = min(h − η, η − l)` and `η = 1/(|X||Y|)`, so that a witness for
/// MDL(l − ε, h + ε) becomes one for MDL(l, h).
pub fn mdl_uniform_damping(
    p: &JointBehavior,
    witness: &MdlWitness,
    params: MdlParams,
    eps: f64,
) -> Result<Damped> {
    let params = MdlParams::new(params.l, params.h)?;
    if eps < 0.0 {
        return Err(Error::InvalidParameter("eps must be nonnegative".into()));
    }
    let s = *p.scenario();
    if witness.scenario != s {
        return Err(Error::ScenarioMismatch(
            witness.scenario.to_string(),
            s.to_string(),
        ));
    }
    if total_variation(&witness.behavior(), p)? > 1e-7 {
        return Err(Error::InvalidParameter(
            "witness does not reproduce the behavior".into(),
        ));
    }
    let (lo, hi) = witness.input_bounds();
    if lo < params.l - eps - 1e-9 || hi > params.h + eps + 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "witness input laws span [{lo}, {hi}], outside [l−ε, h+ε]"
        )));
    }
    let eta = 1.0 / (s.nx * s.ny) as f64;
    let mu = (params.h - eta).min(eta - params.l);
    if mu < -1e-15 {
        return Err(Error::InvalidParameter(format!(
            "MDL({}, {}) is empty",
            params.l, params.h
        )));
    }
    let q = if eps == 0.0 {
        0.0
    } else if mu <= 0.0 {
        1.0
    } else {
        eps / (mu + eps)
    };
    let atoms = witness
        .atoms
        .iter()
        .map(|a| MdlAtom {
            input_law: a
                .input_law
                .iter()
                .map(|v| (1.0 - q) * v + q * eta)
                .collect(),
            ..a.clone()
        })
        .collect();
    let damped = MdlWitness::new(s, atoms)?;
    let behavior = if q == 0.0 {
        p.clone()
    } else {
        damped.behavior()
    };
    Ok(Damped {
        behavior,
        witness: damped,
        q,
    })
}

/// Mixes input laws toward uniform with `α = ε/(κ + ε)`, taking leakage `κ + ε` down to `κ`.
pub fn amdl_uniform_damping(w: &AmdlWitness, kappa: f64, eps: f64) -> Result<AmdlWitness> {
    if kappa < 0.0 || eps < 0.0 {
        return Err(Error::InvalidParameter(
            "kappa and eps must be nonnegative".into(),
        ));
    }
    if kappa + eps == 0.0 {
        return Ok(w.clone());
    }
    if w.leakage() > kappa + eps + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "witness leakage {} exceeds κ+ε",
            w.leakage()
        )));
    }
    let alpha = eps / (kappa + eps);
    let u = 1.0 / w.scenario.nx as f64;
    let atoms = w
        .atoms
        .iter()
        .map(|a| AmdlAtom {
            input_law: a
                .input_law
                .iter()
                .map(|v| (1.0 - alpha) * v + alpha * u)
                .collect(),
            ..a.clone()
        })
        .collect();
    AmdlWitness::new(w.scenario, atoms)
}

fn random_distribution<R: Rng + ?Sized>(n: usize, rng: &mut R, sharp: bool) -> Vec<f64> {
    if sharp && rng.random_bool(0.5) {
        return point_mass(n, rng.random_range(0..n));
    }
    let raw: Vec<f64> = (0..n)
        .map(|_| -rng.random::<f64>().max(1e-300).ln())
        .collect();
    let t: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / t).collect()
}

/// A random AMDL witness with leakage at most `kappa`.
///
/// Atoms draw input laws freely (often point masses) and are then damped
/// toward uniform just enough to meet the budget, so many samples sit on the
/// leakage boundary. Responses are deterministic with probability ½ per table.
pub fn random_amdl_witness<R: Rng + ?Sized>(
    s: BellScenario,
    kappa: f64,
    rng: &mut R,
) -> AmdlWitness {
    let k = rng.random_range(1..=6);
    let weights = random_distribution(k, rng, false);
    let atoms: Vec<AmdlAtom> = weights
        .into_iter()
        .map(|weight| {
            let sharp = rng.random_bool(0.5);
            AmdlAtom {
                weight,
                input_law: random_distribution(s.nx, rng, true),
                response_a: (0..s.nx)
                    .map(|_| random_distribution(s.na, rng, sharp))
                    .collect(),
                response_b: (0..s.ny)
                    .map(|_| random_distribution(s.nb, rng, sharp))
                    .collect(),
            }
        })
        .collect();
    let w = AmdlWitness { scenario: s, atoms };
    let leak = w.leakage();
    if leak <= kappa {
        return w;
    }
    let keep = kappa / leak;
    let u = 1.0 / s.nx as f64;
    let atoms = w
        .atoms
        .into_iter()
        .map(|a| AmdlAtom {
            input_law: a
                .input_law
                .iter()
                .map(|v| keep * v + (1.0 - keep) * u)
                .collect(),
            ..a
        })
        .collect();
    AmdlWitness { scenario: s, atoms }
}
