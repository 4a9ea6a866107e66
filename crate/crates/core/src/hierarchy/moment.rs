//! Level-ℓ moment relaxation with bounded signaling across the virtual input.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::programs::{enumerate_programs_capped, DEFAULT_PROGRAM_CAP};
use super::words::{Polynomial, Variant, Word};
use crate::error::{Error, Result};
use crate::scenario::{BellFunctional, BellScenario, JointBehavior};
use crate::solver::{
    AffineEntry, ConicProblem, PsdBlock, Relation, Sense, SolveReport, SolverSettings, Terms,
};

/// What the relaxation optimizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Objective {
    /// Maximize a functional of the reproduced uniform-input behavior.
    Maximize {
        functional: BellFunctional,
    },
    Minimize {
        functional: BellFunctional,
    },
    /// Maximize `Σ_x Σ_a m(x,a)[ε, ε]`.
    TotalNormalization,
    Feasibility,
}

impl Objective {
    pub fn chsh() -> Self {
        Objective::Maximize {
            functional: BellFunctional::chsh(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    #[default]
    Equal,
    AtLeast,
}

/// Pins a functional of the reproduced behavior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreConstraint {
    pub functional: BellFunctional,
    pub value: f64,
    pub mode: ScoreMode,
}

/// Everything that determines a moment problem besides the scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub level: usize,
    pub kappa_s: f64,
    pub variant: Variant,
    pub objective: Objective,
    /// Reproduce these conditional probabilities exactly.
    pub pin: Option<JointBehavior>,
    pub score: Option<ScoreConstraint>,
    /// Number of labels `e` splitting each state block; 1 means no adversary.
    pub adversary: usize,
    pub program_cap: usize,
}

impl MomentSpec {
    pub fn new(level: usize, kappa_s: f64, variant: Variant, objective: Objective) -> Self {
        MomentSpec {
            level,
            kappa_s,
            variant,
            objective,
            pin: None,
            score: None,
            adversary: 1,
            program_cap: DEFAULT_PROGRAM_CAP,
        }
    }
}

/// State block `ψ(a|x)` or its adversary component `ψ(a|x, e)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockLabel {
    pub x: usize,
    pub a: usize,
    pub e: usize,
}

/// An assembled relaxation: variables are block moments indexed by canonical words.
#[derive(Clone, Debug)]
pub struct MomentProblem {
    scenario: BellScenario,
    spec: MomentSpec,
    words: Vec<Word>,
    blocks: Vec<BlockLabel>,
    vars: HashMap<(usize, Word), usize>,
    num_programs: usize,
    num_signaling_tests: usize,
    conic: ConicProblem,
}

#[derive(Serialize)]
struct Interchange<'a> {
    scenario: BellScenario,
    level: usize,
    variant: Variant,
    kappa_s: f64,
    words: Vec<String>,
    blocks: &'a [BlockLabel],
    moments: Vec<(usize, String, usize)>,
    programs: usize,
    signaling_tests: usize,
    problem: &'a ConicProblem,
}

/// Outcome of a moment solve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentSolution {
    pub value: f64,
    pub report: SolveReport,
    /// One multiplier per linear constraint, in declaration order.
    pub dual_certificate: Vec<f64>,
    /// Reproduced uniform-input behavior, when the solve succeeded.
    pub behavior: Option<JointBehavior>,
}

pub fn build_moment_problem(
    s: &BellScenario,
    level: usize,
    kappa_s: f64,
    objective: Objective,
    variant: Variant,
) -> Result<MomentProblem> {
    MomentProblem::build(s, MomentSpec::new(level, kappa_s, variant, objective))
}

pub fn solve_moment_problem(
    mp: &MomentProblem,
    settings: &SolverSettings,
) -> Result<MomentSolution> {
    mp.solve(settings)
}

impl MomentProblem {
    pub fn build(s: &BellScenario, spec: MomentSpec) -> Result<Self> {
        if !(1..=3).contains(&spec.level) {
            return Err(Error::InvalidParameter(format!(
                "level {} outside 1..=3",
                spec.level
            )));
        }
        if !(0.0..=1.0).contains(&spec.kappa_s) {
            return Err(Error::InvalidParameter(format!(
                "signaling budget {} outside [0,1]",
                spec.kappa_s
            )));
        }
        if spec.adversary == 0 {
            return Err(Error::InvalidParameter(
                "adversary alphabet must be nonempty".into(),
            ));
        }
        let functionals = match &spec.objective {
            Objective::Maximize { functional } | Objective::Minimize { functional } => {
                vec![functional]
            }
            _ => vec![],
        };
        for f in functionals
            .into_iter()
            .chain(spec.score.as_ref().map(|c| &c.functional))
        {
            if f.scenario() != s {
                return Err(Error::ScenarioMismatch(
                    s.to_string(),
                    f.scenario().to_string(),
                ));
            }
        }
        if let Some(p) = &spec.pin {
            if p.scenario() != s {
                return Err(Error::ScenarioMismatch(
                    s.to_string(),
                    p.scenario().to_string(),
                ));
            }
        }

        let words = Word::enumerate(s, spec.level);
        let blocks: Vec<BlockLabel> = (0..s.nx)
            .flat_map(|x| {
                (0..s.na)
                    .flat_map(move |a| (0..spec.adversary).map(move |e| BlockLabel { x, a, e }))
            })
            .collect();
        let sense = match spec.objective {
            Objective::Minimize { .. } => Sense::Minimize,
            _ => Sense::Maximize,
        };
        let mut mp = MomentProblem {
            scenario: *s,
            spec,
            words,
            blocks,
            vars: HashMap::new(),
            num_programs: 0,
            num_signaling_tests: 0,
            conic: ConicProblem::new(sense),
        };
        mp.add_psd_blocks();
        mp.add_normalization();
        mp.add_pin()?;
        mp.add_score();
        mp.add_signaling()?;
        mp.set_objective();
        Ok(mp)
    }

    fn add_psd_blocks(&mut self) {
        for bi in 0..self.blocks.len() {
            let n = self.words.len();
            let mut entries = Vec::with_capacity(n * (n + 1) / 2);
            for j in 0..n {
                for i in 0..=j {
                    let Some(w) = self.words[i].adjoint().times(&self.words[j]) else {
                        continue;
                    };
                    let Some(c) = w.canonical(self.spec.variant) else {
                        continue;
                    };
                    let next = self.conic.num_vars;
                    let v = *self.vars.entry((bi, c)).or_insert(next);
                    if v == next {
                        self.conic.add_var();
                    }
                    entries.push(AffineEntry {
                        row: i,
                        col: j,
                        terms: vec![(v, 1.0)],
                        constant: 0.0,
                    });
                }
            }
            self.conic.psd_blocks.push(PsdBlock { size: n, entries });
        }
    }

    fn add_normalization(&mut self) {
        for x in 0..self.scenario.nx {
            let terms: Terms = (0..self.scenario.na)
                .flat_map(|a| self.norm_terms(x, a, None))
                .collect();
            self.conic.constrain(terms, Relation::Eq, 1.0);
        }
    }

    fn add_pin(&mut self) -> Result<()> {
        let Some(p) = self.spec.pin.clone() else {
            return Ok(());
        };
        let cond = p.conditional();
        let s = self.scenario;
        for i in 0..s.cells() {
            let (a, b, x, y) = s.cell(i);
            let terms = self.prob_terms(x, a, None, y, b);
            self.conic
                .constrain(terms, Relation::Eq, cond.get(a, b, x, y));
        }
        Ok(())
    }

    fn add_score(&mut self) {
        let Some(c) = self.spec.score.clone() else {
            return;
        };
        let terms = self.functional_terms(&c.functional);
        let rel = match c.mode {
            ScoreMode::Equal => Relation::Eq,
            ScoreMode::AtLeast => Relation::Ge,
        };
        self.conic
            .constrain(terms, rel, c.value - c.functional.offset());
    }

    fn add_signaling(&mut self) -> Result<()> {
        let s = self.scenario;
        let programs = enumerate_programs_capped(&s, self.spec.level, self.spec.program_cap)?;
        self.num_programs = programs.len();
        let mut seen: HashSet<BTreeMap<Word, i64>> = HashSet::new();
        for poly in &programs.polynomials {
            let acc = poly.adjoint().mul(poly);
            if acc.degree() > 2 * self.spec.level {
                return Err(Error::MalformedProblem(format!(
                    "acceptance operator of degree {} exceeds the word budget {}",
                    acc.degree(),
                    2 * self.spec.level
                )));
            }
            let form = self.canonical_form(&acc);
            let trivial =
                form.is_empty() || (form.len() == 1 && form.get(&Word::identity()) == Some(&1));
            if trivial || !seen.insert(form.clone()) {
                continue;
            }
            self.num_signaling_tests += 1;
            for x in 0..s.nx {
                for xp in x + 1..s.nx {
                    let diffs: Vec<Terms> = (0..self.spec.adversary)
                        .map(|e| {
                            let mut t = Terms::new();
                            for a in 0..s.na {
                                t.extend(self.form_terms(self.block_index(x, a, e), &form, 1.0));
                                t.extend(self.form_terms(self.block_index(xp, a, e), &form, -1.0));
                            }
                            t
                        })
                        .collect();
                    if self.spec.adversary == 1 {
                        self.conic
                            .constrain(diffs[0].clone(), Relation::Le, self.spec.kappa_s);
                        self.conic
                            .constrain(diffs[0].clone(), Relation::Ge, -self.spec.kappa_s);
                    } else {
                        let budget = self.conic.add_vars(diffs.len());
                        for (k, d) in diffs.into_iter().enumerate() {
                            let t = budget.start + k;
                            let mut up = d.clone();
                            up.push((t, -1.0));
                            self.conic.constrain(up, Relation::Le, 0.0);
                            let mut down = d;
                            down.push((t, 1.0));
                            self.conic.constrain(down, Relation::Ge, 0.0);
                        }
                        self.conic.constrain(
                            budget.map(|t| (t, 1.0)).collect(),
                            Relation::Le,
                            self.spec.kappa_s,
                        );
                    }
                }
            }
        }
        Ok(())
    }

    fn set_objective(&mut self) {
        match self.spec.objective.clone() {
            Objective::Maximize { functional } | Objective::Minimize { functional } => {
                self.conic.objective = self.functional_terms(&functional);
                self.conic.objective_constant = functional.offset();
            }
            Objective::TotalNormalization => {
                let s = self.scenario;
                self.conic.objective = (0..s.nx)
                    .flat_map(|x| (0..s.na).map(move |a| (x, a)))
                    .flat_map(|(x, a)| self.norm_terms(x, a, None))
                    .collect();
            }
            Objective::Feasibility => {}
        }
    }

    /// Moment linear form `Σ c_w m(w)` keyed by canonical word; zero words dropped.
    fn canonical_form(&self, p: &Polynomial) -> BTreeMap<Word, i64> {
        let mut out = BTreeMap::new();
        for (w, c) in p.terms() {
            if let Some(k) = w.canonical(self.spec.variant) {
                *out.entry(k).or_insert(0) += c;
            }
        }
        out.retain(|_, c| *c != 0);
        out
    }

    fn form_terms(&self, block: usize, form: &BTreeMap<Word, i64>, scale: f64) -> Terms {
        form.iter()
            .map(|(w, &c)| {
                let v = self
                    .vars
                    .get(&(block, w.clone()))
                    .copied()
                    .unwrap_or_else(|| {
                        panic!("moment {w} missing from block {block}: word set is not closed")
                    });
                (v, scale * c as f64)
            })
            .collect()
    }

    fn block_index(&self, x: usize, a: usize, e: usize) -> usize {
        (x * self.scenario.na + a) * self.spec.adversary + e
    }

    fn block_range(&self, x: usize, a: usize, e: Option<usize>) -> Vec<usize> {
        match e {
            Some(e) => vec![self.block_index(x, a, e)],
            None => (0..self.spec.adversary)
                .map(|e| self.block_index(x, a, e))
                .collect(),
        }
    }

    /// `tr ψ(a|x[, e])`; `e = None` sums over adversary labels.
    pub fn norm_terms(&self, x: usize, a: usize, e: Option<usize>) -> Terms {
        self.block_range(x, a, e)
            .into_iter()
            .map(|bi| (self.vars[&(bi, Word::identity())], 1.0))
            .collect()
    }

    /// `tr(M(y,b) ψ(a|x[, e]))`, i.e. `P(a, b | x, y)` for the aggregate block.
    pub fn prob_terms(&self, x: usize, a: usize, e: Option<usize>, y: usize, b: usize) -> Terms {
        let form = self.canonical_form(&Polynomial::projector(&self.scenario, y, b));
        self.block_range(x, a, e)
            .into_iter()
            .flat_map(|bi| self.form_terms(bi, &form, 1.0))
            .collect()
    }

    /// Linear part of a functional evaluated on the uniform-input reproduced behavior.
    pub fn functional_terms(&self, f: &BellFunctional) -> Terms {
        let s = self.scenario;
        let w = 1.0 / (s.nx * s.ny) as f64;
        let mut out = Terms::new();
        for (i, &c) in f.coeffs().iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let (a, b, x, y) = s.cell(i);
            out.extend(
                self.prob_terms(x, a, None, y, b)
                    .into_iter()
                    .map(|(v, k)| (v, k * c * w)),
            );
        }
        out
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn spec(&self) -> &MomentSpec {
        &self.spec
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn blocks(&self) -> &[BlockLabel] {
        &self.blocks
    }

    pub fn num_programs(&self) -> usize {
        self.num_programs
    }

    /// Distinct nontrivial acceptance operators constrained.
    pub fn num_signaling_tests(&self) -> usize {
        self.num_signaling_tests
    }

    pub fn conic(&self) -> &ConicProblem {
        &self.conic
    }

    /// Replaces the objective by `terms + constant` with the given sense.
    pub fn set_linear_objective(&mut self, sense: Sense, terms: Terms, constant: f64) {
        self.conic.sense = sense;
        self.conic.objective = terms;
        self.conic.objective_constant = constant;
    }

    /// JSON interchange: the conic program plus the meaning of each moment variable.
    pub fn to_json(&self) -> String {
        let mut moments: Vec<(usize, String, usize)> = self
            .vars
            .iter()
            .map(|((b, w), &v)| (*b, w.to_string(), v))
            .collect();
        moments.sort_by_key(|m| m.2);
        let doc = Interchange {
            scenario: self.scenario,
            level: self.spec.level,
            variant: self.spec.variant,
            kappa_s: self.spec.kappa_s,
            words: self.words.iter().map(Word::to_string).collect(),
            blocks: &self.blocks,
            moments,
            programs: self.num_programs,
            signaling_tests: self.num_signaling_tests,
            problem: &self.conic,
        };
        serde_json::to_string_pretty(&doc).expect("interchange serializes")
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<MomentSolution> {
        let sol = self.conic.solve(settings)?;
        let behavior = sol
            .report
            .status
            .is_solved()
            .then(|| self.behavior_from(&sol.x))
            .and_then(|r| r.ok());
        Ok(MomentSolution {
            value: sol.report.primal,
            report: sol.report,
            dual_certificate: sol.constraint_duals,
            behavior,
        })
    }

    /// Uniform-input behavior reproduced by a solution vector.
    pub fn behavior_from(&self, x: &[f64]) -> Result<JointBehavior> {
        let s = self.scenario;
        let w = 1.0 / (s.nx * s.ny) as f64;
        let p: Vec<f64> = (0..s.cells())
            .map(|i| {
                let (a, b, xx, y) = s.cell(i);
                w * ConicProblem::eval_terms(&self.prob_terms(xx, a, None, y, b), x)
            })
            .collect();
        JointBehavior::from_solver(s, p)
    }
}
