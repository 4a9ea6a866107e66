//! Bell scenarios, behaviors, deterministic strategies and affine Bell functionals.
//!
//! Every tensor is stored dense and row-major in `(a, b, x, y)` order, so the
//! flat index of a cell is `((a * nb + b) * nx + x) * ny + y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on total probability mass.
pub const NORM_TOL: f64 = 1e-9;
/// Tolerance for entrywise equality and range checks.
pub const EQ_TOL: f64 = 1e-12;

/// How strictly input marginals are checked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Deviations are errors.
    #[default]
    Exact,
    /// Deviations are reported as warnings; used for sampled behaviors.
    Diagnostic,
}

/// Alphabet sizes `(|X|, |Y|, |A|, |B|)`: virtual input, real input, virtual output, real output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[usize; 4]", try_from = "[usize; 4]")]
pub struct BellScenario {
    pub nx: usize,
    pub ny: usize,
    pub na: usize,
    pub nb: usize,
}

impl From<BellScenario> for [usize; 4] {
    fn from(s: BellScenario) -> Self {
        [s.nx, s.ny, s.na, s.nb]
    }
}

impl TryFrom<[usize; 4]> for BellScenario {
    type Error = Error;
    fn try_from(v: [usize; 4]) -> Result<Self> {
        BellScenario::new(v[0], v[1], v[2], v[3])
    }
}

impl std::fmt::Display for BellScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{},{})", self.nx, self.ny, self.na, self.nb)
    }
}

impl BellScenario {
    pub const CHSH: BellScenario = BellScenario {
        nx: 2,
        ny: 2,
        na: 2,
        nb: 2,
    };

    pub fn new(nx: usize, ny: usize, na: usize, nb: usize) -> Result<Self> {
        if [nx, ny, na, nb].contains(&0) {
            return Err(Error::InvalidScenario(format!(
                "zero alphabet in ({nx},{ny},{na},{nb})"
            )));
        }
        if [nx, ny, na, nb].iter().any(|&n| n > 16) {
            return Err(Error::InvalidScenario(
                "alphabets larger than 16 are not supported".into(),
            ));
        }
        Ok(BellScenario { nx, ny, na, nb })
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.na * self.nb
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((a * self.nb + b) * self.nx + x) * self.ny + y
    }

    /// Inverse of [`BellScenario::index`], returning `(a, b, x, y)`.
    pub fn cell(&self, i: usize) -> (usize, usize, usize, usize) {
        let y = i % self.ny;
        let r = i / self.ny;
        let x = r % self.nx;
        let r = r / self.nx;
        let b = r % self.nb;
        (r / self.nb, b, x, y)
    }

    pub fn num_strategies(&self) -> usize {
        self.na.pow(self.nx as u32) * self.nb.pow(self.ny as u32)
    }

    /// All deterministic strategies, `fa` digits varying slowest.
    pub fn strategies(&self) -> Vec<DeterministicStrategy> {
        (0..self.num_strategies())
            .map(|k| DeterministicStrategy::from_index(self, k))
            .collect()
    }

    fn ensure_same(&self, other: &BellScenario) -> Result<()> {
        if self != other {
            return Err(Error::ScenarioMismatch(self.to_string(), other.to_string()));
        }
        Ok(())
    }
}

/// A pair of response functions `fa: X -> A`, `fb: Y -> B`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub fa: Vec<usize>,
    pub fb: Vec<usize>,
}

impl DeterministicStrategy {
    pub fn new(scenario: &BellScenario, fa: Vec<usize>, fb: Vec<usize>) -> Result<Self> {
        if fa.len() != scenario.nx || fb.len() != scenario.ny {
            return Err(Error::InvalidParameter(
                "strategy tables do not match the scenario".into(),
            ));
        }
        if fa.iter().any(|&a| a >= scenario.na) || fb.iter().any(|&b| b >= scenario.nb) {
            return Err(Error::InvalidParameter(
                "strategy output out of range".into(),
            ));
        }
        Ok(DeterministicStrategy { fa, fb })
    }

    pub fn from_index(s: &BellScenario, mut k: usize) -> Self {
        let mut fb = vec![0; s.ny];
        for slot in fb.iter_mut().rev() {
            *slot = k % s.nb;
            k /= s.nb;
        }
        let mut fa = vec![0; s.nx];
        for slot in fa.iter_mut().rev() {
            *slot = k % s.na;
            k /= s.na;
        }
        DeterministicStrategy { fa, fb }
    }
}

/// Joint distribution `P(a, b, x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BehaviorFile", into = "BehaviorFile")]
pub struct JointBehavior {
    scenario: BellScenario,
    p: Vec<f64>,
}

impl JointBehavior {
    pub fn new(scenario: BellScenario, p: Vec<f64>) -> Result<Self> {
        if p.len() != scenario.cells() {
            return Err(Error::InvalidBehavior(format!(
                "expected {} entries, got {}",
                scenario.cells(),
                p.len()
            )));
        }
        if let Some(v) = p
            .iter()
            .find(|v| !v.is_finite() || **v < -EQ_TOL || **v > 1.0 + EQ_TOL)
        {
            return Err(Error::InvalidBehavior(format!("entry {v} outside [0,1]")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidBehavior(format!("total mass {total} != 1")));
        }
        Ok(JointBehavior { scenario, p })
    }

    /// Builds a behavior after clipping tiny negative round-off and renormalizing.
    ///
    /// Intended for solver output, where entries like `-1e-11` are expected.
    pub fn from_solver(scenario: BellScenario, mut p: Vec<f64>) -> Result<Self> {
        for v in p.iter_mut() {
            if *v < 0.0 && *v > -1e-6 {
                *v = 0.0;
            }
        }
        let total: f64 = p.iter().sum();
        if total > 0.0 && (total - 1.0).abs() < 1e-6 {
            p.iter_mut().for_each(|v| *v /= total);
        }
        JointBehavior::new(scenario, p)
    }

    pub fn uniform(scenario: BellScenario) -> Self {
        let n = scenario.cells();
        JointBehavior {
            scenario,
            p: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(
        scenario: BellScenario,
        a: usize,
        b: usize,
        x: usize,
        y: usize,
    ) -> Result<Self> {
        if a >= scenario.na || b >= scenario.nb || x >= scenario.nx || y >= scenario.ny {
            return Err(Error::InvalidParameter("cell out of range".into()));
        }
        let mut p = vec![0.0; scenario.cells()];
        p[scenario.index(a, b, x, y)] = 1.0;
        Ok(JointBehavior { scenario, p })
    }

    /// The PR box with uniform inputs: `a ⊕ b = x·y` with `a` uniform.
    pub fn pr_box() -> Self {
        let s = BellScenario::CHSH;
        let mut p = vec![0.0; 16];
        for (i, v) in p.iter_mut().enumerate() {
            let (a, b, x, y) = s.cell(i);
            if a ^ b == x & y {
                *v = 1.0 / 8.0;
            }
        }
        JointBehavior { scenario: s, p }
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[self.scenario.index(a, b, x, y)]
    }

    /// `P(x, y)` as a vector indexed by `x * ny + y`.
    pub fn input_marginal(&self) -> Vec<f64> {
        let s = &self.scenario;
        let mut m = vec![0.0; s.nx * s.ny];
        for (i, v) in self.p.iter().enumerate() {
            let (_, _, x, y) = s.cell(i);
            m[x * s.ny + y] += v;
        }
        m
    }

    pub fn x_marginal(&self) -> Vec<f64> {
        let s = &self.scenario;
        let m = self.input_marginal();
        (0..s.nx)
            .map(|x| m[x * s.ny..(x + 1) * s.ny].iter().sum())
            .collect()
    }

    pub fn y_marginal(&self) -> Vec<f64> {
        let s = &self.scenario;
        let m = self.input_marginal();
        (0..s.ny)
            .map(|y| (0..s.nx).map(|x| m[x * s.ny + y]).sum())
            .collect()
    }

    /// Checks `P(x, y) = 1/(|X||Y|)`. Returns warnings in diagnostic mode.
    pub fn check_uniform_inputs(&self, mode: Mode) -> Result<Vec<String>> {
        let target = 1.0 / (self.scenario.nx * self.scenario.ny) as f64;
        check_marginal(&self.input_marginal(), target, mode, "P(x,y)")
    }

    /// Checks `P(y) = 1/|Y|`. Returns warnings in diagnostic mode.
    pub fn check_uniform_y(&self, mode: Mode) -> Result<Vec<String>> {
        let target = 1.0 / self.scenario.ny as f64;
        check_marginal(&self.y_marginal(), target, mode, "P(y)")
    }

    /// Conditional behavior `P(a, b | x, y)`; input pairs with zero mass get uniform outputs.
    pub fn conditional(&self) -> ConditionalBehavior {
        let s = self.scenario;
        let m = self.input_marginal();
        let uniform = 1.0 / (s.na * s.nb) as f64;
        let p = self
            .p
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (_, _, x, y) = s.cell(i);
                let w = m[x * s.ny + y];
                if w > 0.0 {
                    v / w
                } else {
                    uniform
                }
            })
            .collect();
        ConditionalBehavior { scenario: s, p }
    }

    /// Convex combination `λ·self + (1−λ)·other`.
    pub fn mix(&self, lambda: f64, other: &JointBehavior) -> Result<JointBehavior> {
        self.scenario.ensure_same(&other.scenario)?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("mixing weight {lambda}")));
        }
        let p = self
            .p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Ok(JointBehavior {
            scenario: self.scenario,
            p,
        })
    }

    /// Applies a permutation-style relabeling to every cell.
    pub fn map_cells(
        &self,
        f: impl Fn(usize, usize, usize, usize) -> (usize, usize, usize, usize),
    ) -> Self {
        let s = self.scenario;
        let mut p = vec![0.0; s.cells()];
        for (i, v) in self.p.iter().enumerate() {
            let (a, b, x, y) = s.cell(i);
            let (a2, b2, x2, y2) = f(a, b, x, y);
            p[s.index(a2, b2, x2, y2)] += v;
        }
        JointBehavior { scenario: s, p }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("behavior serializes")
    }
}

fn check_marginal(m: &[f64], target: f64, mode: Mode, what: &str) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    for (i, v) in m.iter().enumerate() {
        if (v - target).abs() > NORM_TOL {
            let msg = format!("{what}[{i}] = {v}, expected {target}");
            match mode {
                Mode::Exact => return Err(Error::NonUniformInputs(msg)),
                Mode::Diagnostic => warnings.push(msg),
            }
        }
    }
    Ok(warnings)
}

/// Conditional distribution `P(a, b | x, y)` in the same `(a, b, x, y)` layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalBehavior {
    scenario: BellScenario,
    p: Vec<f64>,
}

impl ConditionalBehavior {
    pub fn new(scenario: BellScenario, p: Vec<f64>) -> Result<Self> {
        if p.len() != scenario.cells() {
            return Err(Error::InvalidBehavior(
                "conditional tensor has the wrong size".into(),
            ));
        }
        let c = ConditionalBehavior { scenario, p };
        for x in 0..scenario.nx {
            for y in 0..scenario.ny {
                let mut total = 0.0;
                for a in 0..scenario.na {
                    for b in 0..scenario.nb {
                        let v = c.get(a, b, x, y);
                        if !(-EQ_TOL..=1.0 + EQ_TOL).contains(&v) {
                            return Err(Error::InvalidBehavior(format!("entry {v} outside [0,1]")));
                        }
                        total += v;
                    }
                }
                if (total - 1.0).abs() > NORM_TOL {
                    return Err(Error::InvalidBehavior(format!(
                        "slice (x={x},y={y}) sums to {total}"
                    )));
                }
            }
        }
        Ok(c)
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[self.scenario.index(a, b, x, y)]
    }

    /// Joint behavior under the input law `P(x, y)` indexed by `x * ny + y`.
    pub fn with_inputs(&self, law: &[f64]) -> Result<JointBehavior> {
        let s = self.scenario;
        if law.len() != s.nx * s.ny {
            return Err(Error::InvalidParameter(
                "input law has the wrong size".into(),
            ));
        }
        let p = self
            .p
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (_, _, x, y) = s.cell(i);
                v * law[x * s.ny + y]
            })
            .collect();
        JointBehavior::new(s, p)
    }

    pub fn with_uniform_inputs(&self) -> JointBehavior {
        let n = self.scenario.nx * self.scenario.ny;
        self.with_inputs(&vec![1.0 / n as f64; n])
            .expect("uniform law is valid")
    }
}

/// Affine functional `offset + Σ coeffs[a,b,x,y]·P(a,b,x,y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FunctionalFile", into = "FunctionalFile")]
pub struct BellFunctional {
    scenario: BellScenario,
    offset: f64,
    coeffs: Vec<f64>,
}

impl BellFunctional {
    pub fn new(scenario: BellScenario, offset: f64, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != scenario.cells() {
            return Err(Error::InvalidParameter(format!(
                "functional needs {} coefficients, got {}",
                scenario.cells(),
                coeffs.len()
            )));
        }
        if !offset.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite functional coefficient".into(),
            ));
        }
        Ok(BellFunctional {
            scenario,
            offset,
            coeffs,
        })
    }

    pub fn zero(scenario: BellScenario) -> Self {
        BellFunctional {
            scenario,
            offset: 0.0,
            coeffs: vec![0.0; scenario.cells()],
        }
    }

    /// The CHSH winning predicate `1[x·y = a⊕b]` with zero offset.
    pub fn chsh() -> Self {
        let s = BellScenario::CHSH;
        let coeffs = (0..16)
            .map(|i| {
                let (a, b, x, y) = s.cell(i);
                if x & y == a ^ b {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        BellFunctional {
            scenario: s,
            offset: 0.0,
            coeffs,
        }
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.coeffs[self.scenario.index(a, b, x, y)]
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn scaled(&self, k: f64) -> Self {
        BellFunctional {
            scenario: self.scenario,
            offset: self.offset * k,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    /// `Σ |coeffs|`, the Lipschitz constant in total variation up to a factor 2.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn evaluate(&self, p: &JointBehavior) -> Result<f64> {
        self.scenario.ensure_same(&p.scenario)?;
        Ok(self.offset
            + self
                .coeffs
                .iter()
                .zip(&p.p)
                .map(|(c, v)| c * v)
                .sum::<f64>())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("functional serializes")
    }
}

/// `ℐ(P)` for a functional and behavior over the same scenario.
pub fn evaluate_functional(f: &BellFunctional, p: &JointBehavior) -> Result<f64> {
    f.evaluate(p)
}

/// `½ Σ |p − q|`.
pub fn total_variation(p: &JointBehavior, q: &JointBehavior) -> Result<f64> {
    p.scenario.ensure_same(&q.scenario)?;
    Ok(0.5
        * p.p
            .iter()
            .zip(&q.p)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChshScore {
    /// Winning probability `Σ P·1[x·y = a⊕b]`.
    pub omega: f64,
    /// `4·Σ (−1)^{x·y+a+b} P`, so that `omega = 1/2 + correlator/8`.
    pub correlator: f64,
}

/// CHSH winning probability and correlator of a `(2,2,2,2)` behavior.
pub fn chsh_winning_probability(p: &JointBehavior, mode: Mode) -> Result<ChshScore> {
    if p.scenario != BellScenario::CHSH {
        return Err(Error::ScenarioMismatch(
            p.scenario.to_string(),
            BellScenario::CHSH.to_string(),
        ));
    }
    p.check_uniform_inputs(mode)?;
    let s = p.scenario;
    let (mut omega, mut k) = (0.0, 0.0);
    for (i, v) in p.p.iter().enumerate() {
        let (a, b, x, y) = s.cell(i);
        if x & y == a ^ b {
            omega += v;
            k += v;
        } else {
            k -= v;
        }
    }
    Ok(ChshScore {
        omega,
        correlator: 4.0 * k,
    })
}

/// One hidden-variable atom of a measurement-dependent mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub strategy: DeterministicStrategy,
    /// `P(x | γ)` for [`behavior_from_strategy_mixture`], or `P(x, y | γ)`
    /// indexed by `x * ny + y` for [`behavior_from_joint_input_mixture`].
    pub input_law: Vec<f64>,
}

fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|w| !w.is_finite() || *w < -EQ_TOL) {
        return Err(Error::InvalidParameter(format!(
            "{what} has a negative entry"
        )));
    }
    let t: f64 = v.iter().sum();
    if (t - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidParameter(format!("{what} sums to {t}")));
    }
    Ok(())
}

/// `P(a,b,x,y) = Σ_γ g(γ) P(x|γ) (1/|Y|) 1[a = fa(x)] 1[b = fb(y)]`.
pub fn behavior_from_strategy_mixture(
    scenario: BellScenario,
    components: &[MixtureComponent],
) -> Result<JointBehavior> {
    let ws: Vec<f64> = components.iter().map(|c| c.weight).collect();
    check_distribution(&ws, "mixture weights")?;
    let py = 1.0 / scenario.ny as f64;
    let mut p = vec![0.0; scenario.cells()];
    for c in components {
        if c.input_law.len() != scenario.nx {
            return Err(Error::InvalidParameter(
                "input law must range over X".into(),
            ));
        }
        check_distribution(&c.input_law, "input law")?;
        let st =
            DeterministicStrategy::new(&scenario, c.strategy.fa.clone(), c.strategy.fb.clone())?;
        for x in 0..scenario.nx {
            for y in 0..scenario.ny {
                p[scenario.index(st.fa[x], st.fb[y], x, y)] += c.weight * c.input_law[x] * py;
            }
        }
    }
    JointBehavior::new(scenario, p)
}

/// Like [`behavior_from_strategy_mixture`] but with arbitrary `P(x, y | γ)`.
pub fn behavior_from_joint_input_mixture(
    scenario: BellScenario,
    components: &[MixtureComponent],
) -> Result<JointBehavior> {
    let ws: Vec<f64> = components.iter().map(|c| c.weight).collect();
    check_distribution(&ws, "mixture weights")?;
    let mut p = vec![0.0; scenario.cells()];
    for c in components {
        if c.input_law.len() != scenario.nx * scenario.ny {
            return Err(Error::InvalidParameter(
                "input law must range over X×Y".into(),
            ));
        }
        check_distribution(&c.input_law, "input law")?;
        let st =
            DeterministicStrategy::new(&scenario, c.strategy.fa.clone(), c.strategy.fb.clone())?;
        for x in 0..scenario.nx {
            for y in 0..scenario.ny {
                p[scenario.index(st.fa[x], st.fb[y], x, y)] +=
                    c.weight * c.input_law[x * scenario.ny + y];
            }
        }
    }
    JointBehavior::new(scenario, p)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BehaviorFile {
    scenario: BellScenario,
    p: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionalFile {
    scenario: BellScenario,
    offset: f64,
    coeffs: serde_json::Value,
}

/// Accepts either a flat array or nested rows; both flatten row-major.
fn flatten(v: &serde_json::Value) -> Result<Vec<f64>> {
    fn walk(v: &serde_json::Value, out: &mut Vec<f64>) -> Result<()> {
        match v {
            serde_json::Value::Array(items) => items.iter().try_for_each(|i| walk(i, out)),
            serde_json::Value::Number(n) => {
                out.push(
                    n.as_f64()
                        .ok_or_else(|| Error::Json("non-finite number".into()))?,
                );
                Ok(())
            }
            other => Err(Error::Json(format!("expected numbers, found {other}"))),
        }
    }
    let mut out = Vec::new();
    walk(v, &mut out)?;
    Ok(out)
}

/// Rows indexed by `(a, b)`, columns by `(x, y)`.
fn nest(s: &BellScenario, v: &[f64]) -> serde_json::Value {
    let width = s.nx * s.ny;
    serde_json::Value::Array(v.chunks(width).map(|row| serde_json::json!(row)).collect())
}

impl TryFrom<BehaviorFile> for JointBehavior {
    type Error = Error;
    fn try_from(f: BehaviorFile) -> Result<Self> {
        JointBehavior::new(f.scenario, flatten(&f.p)?)
    }
}

impl From<JointBehavior> for BehaviorFile {
    fn from(b: JointBehavior) -> Self {
        BehaviorFile {
            p: nest(&b.scenario, &b.p),
            scenario: b.scenario,
        }
    }
}

impl TryFrom<FunctionalFile> for BellFunctional {
    type Error = Error;
    fn try_from(f: FunctionalFile) -> Result<Self> {
        BellFunctional::new(f.scenario, f.offset, flatten(&f.coeffs)?)
    }
}

impl From<BellFunctional> for FunctionalFile {
    fn from(b: BellFunctional) -> Self {
        FunctionalFile {
            coeffs: nest(&b.scenario, &b.coeffs),
            scenario: b.scenario,
            offset: b.offset,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: BellScenario = BellScenario::CHSH;

    fn vertex(fa: [usize; 2], fb: [usize; 2]) -> JointBehavior {
        let st = DeterministicStrategy::new(&S, fa.to_vec(), fb.to_vec()).unwrap();
        behavior_from_strategy_mixture(
            S,
            &[MixtureComponent {
                weight: 1.0,
                strategy: st,
                input_law: vec![0.5, 0.5],
            }],
        )
        .unwrap()
    }

    #[test]
    fn index_roundtrip() {
        let s = BellScenario::new(3, 2, 4, 2).unwrap();
        for i in 0..s.cells() {
            let (a, b, x, y) = s.cell(i);
            assert_eq!(s.index(a, b, x, y), i);
        }
    }

    #[test]
    fn total_variation_examples() {
        let p = JointBehavior::point_mass(S, 0, 0, 0, 0).unwrap();
        let q = JointBehavior::point_mass(S, 1, 1, 1, 1).unwrap();
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        assert_eq!(total_variation(&p, &q).unwrap(), 1.0);
        let s64 = BellScenario::new(2, 2, 4, 4).unwrap();
        let u = JointBehavior::uniform(s64);
        let m = JointBehavior::point_mass(s64, 0, 0, 0, 0).unwrap();
        let oracle = 0.5 * ((1.0 - 1.0 / 64.0) + 63.0 / 64.0);
        assert!((total_variation(&u, &m).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.984375).abs() < 1e-15);
        assert!(total_variation(&u, &p).is_err());
    }

    #[test]
    fn functional_examples() {
        let v = vertex([0, 0], [0, 0]);
        let trivial = BellFunctional::new(S, 0.0, vec![-1.0; 16]).unwrap();
        assert!((trivial.evaluate(&v).unwrap() + 1.0).abs() < 1e-15);
        let chsh = BellFunctional::chsh().with_offset(-0.75);
        assert!(chsh.evaluate(&v).unwrap().abs() < 1e-15);
        assert_eq!(BellFunctional::zero(S).evaluate(&v).unwrap(), 0.0);
    }

    #[test]
    fn chsh_examples() {
        let u = JointBehavior::uniform(S);
        assert!((chsh_winning_probability(&u, Mode::Exact).unwrap().omega - 0.5).abs() < 1e-15);
        let pr = JointBehavior::pr_box();
        let sc = chsh_winning_probability(&pr, Mode::Exact).unwrap();
        assert!((sc.omega - 1.0).abs() < 1e-15);
        assert!((sc.omega - (0.5 + sc.correlator / 8.0)).abs() < 1e-15);
        let skewed = JointBehavior::point_mass(S, 0, 0, 0, 0).unwrap();
        assert!(chsh_winning_probability(&skewed, Mode::Exact).is_err());
        assert!(chsh_winning_probability(&skewed, Mode::Diagnostic).is_ok());
    }

    #[test]
    fn vertex_has_sixteen_quarter_cells() {
        let v = vertex([1, 0], [0, 1]);
        let mut hits = 0;
        for i in 0..16 {
            let (a, b, x, y) = S.cell(i);
            let expect = if a == [1, 0][x] && b == [0, 1][y] {
                0.25
            } else {
                0.0
            };
            assert_eq!(v.probabilities()[i], expect);
            hits += (expect > 0.0) as usize;
        }
        assert_eq!(hits, 4);
    }

    #[test]
    fn equal_mixture_is_average_of_vertices() {
        let s1 = DeterministicStrategy::new(&S, vec![0, 1], vec![1, 1]).unwrap();
        let s2 = DeterministicStrategy::new(&S, vec![1, 1], vec![0, 1]).unwrap();
        let law = vec![0.5, 0.5];
        let mix = behavior_from_strategy_mixture(
            S,
            &[
                MixtureComponent {
                    weight: 0.5,
                    strategy: s1.clone(),
                    input_law: law.clone(),
                },
                MixtureComponent {
                    weight: 0.5,
                    strategy: s2.clone(),
                    input_law: law.clone(),
                },
            ],
        )
        .unwrap();
        let v1 = vertex([0, 1], [1, 1]);
        let v2 = vertex([1, 1], [0, 1]);
        assert_eq!(mix, v1.mix(0.5, &v2).unwrap());
    }

    #[test]
    fn x_dependent_atoms_reproduce_pr_box() {
        // a uniform, b(y) = a ⊕ x·y, each atom pinned to one x.
        let mut comps = Vec::new();
        for x in 0..2 {
            for a in 0..2 {
                let fb = (0..2).map(|y| a ^ (x & y)).collect();
                let mut law = vec![0.0; 2];
                law[x] = 1.0;
                comps.push(MixtureComponent {
                    weight: 0.25,
                    strategy: DeterministicStrategy::new(&S, vec![a; 2], fb).unwrap(),
                    input_law: law,
                });
            }
        }
        let p = behavior_from_strategy_mixture(S, &comps).unwrap();
        for i in 0..16 {
            let (a, b, x, y) = S.cell(i);
            let expect = if a ^ b == x & y { 0.125 } else { 0.0 };
            assert!((p.probabilities()[i] - expect).abs() < 1e-15);
        }
        assert_eq!(p, JointBehavior::pr_box());
    }

    #[test]
    fn mixture_rejects_unnormalized() {
        let st = DeterministicStrategy::new(&S, vec![0, 0], vec![0, 0]).unwrap();
        let bad = [MixtureComponent {
            weight: 0.9,
            strategy: st.clone(),
            input_law: vec![0.5, 0.5],
        }];
        assert!(behavior_from_strategy_mixture(S, &bad).is_err());
        let bad_law = [MixtureComponent {
            weight: 1.0,
            strategy: st,
            input_law: vec![0.7, 0.5],
        }];
        assert!(behavior_from_strategy_mixture(S, &bad_law).is_err());
    }

    #[test]
    fn json_roundtrip_nested_and_flat() {
        let pr = JointBehavior::pr_box();
        let text = pr.to_json();
        assert_eq!(JointBehavior::from_json(&text).unwrap(), pr);
        let flat = format!(
            "{{\"scenario\":[2,2,2,2],\"p\":{}}}",
            serde_json::to_string(pr.probabilities()).unwrap()
        );
        assert_eq!(JointBehavior::from_json(&flat).unwrap(), pr);
        assert!(JointBehavior::from_json("{\"scenario\":[2,2,2,2],\"p\":[0.5,0.5]}").is_err());
        assert!(JointBehavior::from_json("{\"scenario\":[2,2,2,2],\"p\":[],\"extra\":1}").is_err());
        let f = BellFunctional::chsh().with_offset(-0.75);
        assert_eq!(BellFunctional::from_json(&f.to_json()).unwrap(), f);
    }
}
