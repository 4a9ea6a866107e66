//! Computational Bell inequalities for the `(2,2,2,2)` scenario.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::MdlParams;
use crate::scenario::{BellFunctional, BellScenario, JointBehavior};

/// Slack exponent used with the trapdoor-claw-free showcase.
pub const TCF_SLACK_EXPONENT: f64 = 0.45;
/// Slack exponent used with the compiled-game showcase.
pub const COMPILED_SLACK_EXPONENT: f64 = 0.19;

/// Leakage `κ` on the virtual input and the slack `ϑ > 0` of the threshold split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageParams {
    pub kappa: f64,
    pub slack: f64,
}

impl LeakageParams {
    pub fn new(kappa: f64, slack: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::InvalidParameter(format!(
                "kappa {kappa} outside [0,1]"
            )));
        }
        if slack.is_nan() || slack <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "slack {slack} must be positive"
            )));
        }
        Ok(LeakageParams { kappa, slack })
    }

    pub fn with_rule(kappa: f64, rule: SlackRule) -> Result<Self> {
        LeakageParams::new(kappa, rule.slack(kappa))
    }
}

/// How `ϑ` is chosen from `κ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "rule", content = "value")]
pub enum SlackRule {
    /// `ϑ = κ^0.45`.
    Tcf,
    /// `ϑ = κ^0.19`.
    Compiled,
    /// `ϑ = κ^e`.
    Power(f64),
    Fixed(f64),
}

impl SlackRule {
    pub fn slack(self, kappa: f64) -> f64 {
        match self {
            SlackRule::Tcf => kappa.powf(TCF_SLACK_EXPONENT),
            SlackRule::Compiled => kappa.powf(COMPILED_SLACK_EXPONENT),
            SlackRule::Power(e) => kappa.powf(e),
            SlackRule::Fixed(v) => v,
        }
    }
}

/// `l·P(0000) − h·(P(0101) + P(1010) + P(0011))` over cells `(a, b, x, y)`.
pub fn putz_mdl_functional(params: MdlParams) -> BellFunctional {
    let s = BellScenario::CHSH;
    let mut coeffs = vec![0.0; 16];
    coeffs[s.index(0, 0, 0, 0)] = params.l;
    for (a, b, x, y) in [(0, 1, 0, 1), (1, 0, 1, 0), (0, 0, 1, 1)] {
        coeffs[s.index(a, b, x, y)] = -params.h;
    }
    BellFunctional::new(s, 0.0, coeffs).expect("sixteen coefficients")
}

/// The Putz functional at `l = ½(½ − κ − ϑ)`, `h = ½(½ + κ + ϑ)`, shifted down by
/// [`classical_bound_certificate`], so every AMDL(κ) behavior scores at most 0.
pub fn showcase_functional(params: LeakageParams) -> Result<BellFunctional> {
    let u = params.kappa + params.slack;
    if u >= 0.5 {
        return Err(Error::InvalidParameter(format!(
            "κ + ϑ = {u} ≥ 1/2 leaves no positive part"
        )));
    }
    let putz = putz_mdl_functional(MdlParams {
        l: 0.5 * (0.5 - u),
        h: 0.5 * (0.5 + u),
    });
    Ok(putz.with_offset(-classical_bound_certificate(params)))
}

/// `(1/4)·(κ/(κ+ϑ))·(½ − κ − ϑ)`: the most an AMDL(κ) behavior can score on the
/// unshifted Putz part, attained by putting the above-threshold mass on cell 0000.
pub fn classical_bound_certificate(params: LeakageParams) -> f64 {
    let u = params.kappa + params.slack;
    if params.kappa == 0.0 {
        return 0.0;
    }
    0.25 * (params.kappa / u) * (0.5 - u).max(0.0)
}

/// `κ_S = |X|·κ`.
pub fn signaling_from_leakage(nx: usize, kappa: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::InvalidParameter(format!(
            "kappa {kappa} outside [0,1]"
        )));
    }
    Ok(nx as f64 * kappa)
}

/// Relabeling of inputs and of outputs conditioned on the input.
///
/// A cell `(a, b, x, y)` moves to `(a_map[x][a], b_map[y][b], x_map[x], y_map[y])`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relabeling {
    pub x_map: Vec<usize>,
    pub y_map: Vec<usize>,
    pub a_map: Vec<Vec<usize>>,
    pub b_map: Vec<Vec<usize>>,
}

fn is_permutation(v: &[usize]) -> bool {
    let mut seen = vec![false; v.len()];
    v.iter()
        .all(|&i| i < v.len() && !std::mem::replace(&mut seen[i], true))
}

impl Relabeling {
    pub fn new(
        s: &BellScenario,
        x_map: Vec<usize>,
        y_map: Vec<usize>,
        a_map: Vec<Vec<usize>>,
        b_map: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let ok = x_map.len() == s.nx
            && y_map.len() == s.ny
            && a_map.len() == s.nx
            && b_map.len() == s.ny
            && is_permutation(&x_map)
            && is_permutation(&y_map)
            && a_map.iter().all(|m| m.len() == s.na && is_permutation(m))
            && b_map.iter().all(|m| m.len() == s.nb && is_permutation(m));
        if !ok {
            return Err(Error::InvalidParameter(
                "relabeling maps must be permutations".into(),
            ));
        }
        Ok(Relabeling {
            x_map,
            y_map,
            a_map,
            b_map,
        })
    }

    pub fn identity(s: &BellScenario) -> Self {
        Relabeling {
            x_map: (0..s.nx).collect(),
            y_map: (0..s.ny).collect(),
            a_map: vec![(0..s.na).collect(); s.nx],
            b_map: vec![(0..s.nb).collect(); s.ny],
        }
    }

    pub fn apply(&self, p: &JointBehavior) -> JointBehavior {
        p.map_cells(|a, b, x, y| {
            (
                self.a_map[x][a],
                self.b_map[y][b],
                self.x_map[x],
                self.y_map[y],
            )
        })
    }

    /// The functional `f'` with `f'(apply(p)) = f(p)`.
    pub fn apply_functional(&self, f: &BellFunctional) -> BellFunctional {
        let s = *f.scenario();
        let mut coeffs = vec![0.0; s.cells()];
        for (i, c) in f.coeffs().iter().enumerate() {
            let (a, b, x, y) = s.cell(i);
            coeffs[s.index(
                self.a_map[x][a],
                self.b_map[y][b],
                self.x_map[x],
                self.y_map[y],
            )] = *c;
        }
        BellFunctional::new(s, f.offset(), coeffs).expect("same shape")
    }
}

/// All 64 relabelings of `(2,2,2,2)` built from input flips and input-conditioned output flips.
pub fn chsh_relabelings() -> Vec<Relabeling> {
    let flip = |bit: usize| if bit == 1 { vec![1, 0] } else { vec![0, 1] };
    let mut out = Vec::with_capacity(64);
    for mask in 0..64usize {
        let bit = |k: usize| (mask >> k) & 1;
        out.push(Relabeling {
            x_map: flip(bit(0)),
            y_map: flip(bit(1)),
            a_map: vec![flip(bit(2)), flip(bit(3))],
            b_map: vec![flip(bit(4)), flip(bit(5))],
        });
    }
    out
}

/// Largest value of `f` over relabelings of `p`, with the maximizing relabeling.
pub fn best_relabeled_value(f: &BellFunctional, p: &JointBehavior) -> Result<(f64, Relabeling)> {
    let mut best: Option<(f64, Relabeling)> = None;
    for r in chsh_relabelings() {
        let v = f.evaluate(&r.apply(p))?;
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, r));
        }
    }
    Ok(best.expect("64 relabelings"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::random_amdl_witness;
    use crate::scenario::{behavior_from_strategy_mixture, total_variation, MixtureComponent};
    use crate::solver::{ConicProblem, Relation, Sense, SolverSettings};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const S: BellScenario = BellScenario::CHSH;

    #[test]
    fn putz_examples() {
        let f = putz_mdl_functional(MdlParams::new(0.25, 0.25).unwrap());
        for st in S.strategies() {
            let p = behavior_from_strategy_mixture(
                S,
                &[MixtureComponent {
                    weight: 1.0,
                    strategy: st,
                    input_law: vec![0.5, 0.5],
                }],
            )
            .unwrap();
            assert!(f.evaluate(&p).unwrap() <= 1e-15);
        }
        let g = putz_mdl_functional(MdlParams::new(0.0, 0.3).unwrap());
        assert!(g.coeffs().iter().all(|c| *c <= 0.0));
        let h = putz_mdl_functional(MdlParams::new(0.1425, 0.3575).unwrap());
        let corner = JointBehavior::point_mass(S, 0, 0, 0, 0).unwrap();
        assert!((h.evaluate(&corner).unwrap() - 0.1425).abs() < 1e-15);
    }

    #[test]
    fn showcase_tcf_preset_arithmetic() {
        let kappa: f64 = 0.025;
        let p = LeakageParams::with_rule(kappa, SlackRule::Tcf).unwrap();
        let slack = kappa.powf(0.45);
        assert!((p.slack - slack).abs() < 1e-15);
        assert!((slack - 0.19013978736655335).abs() < 1e-14);
        let f = showcase_functional(p).unwrap();
        let u = kappa + slack;
        assert!((f.coeff(0, 0, 0, 0) - 0.5 * (0.5 - u)).abs() < 1e-15);
        assert!((f.coeff(0, 1, 0, 1) + 0.5 * (0.5 + u)).abs() < 1e-15);
        let offset = -0.25 * (kappa / u) * (0.5 - u);
        assert!((f.offset() - offset).abs() < 1e-15);
        assert!((f.offset() + 0.008275439660659566).abs() < 1e-13);
        assert!((classical_bound_certificate(p) + f.offset()).abs() < 1e-15);
    }

    #[test]
    fn showcase_leakage_free_limit() {
        let f = showcase_functional(LeakageParams::new(0.0, 1e-12).unwrap()).unwrap();
        assert_eq!(f.offset(), 0.0);
        assert!((f.coeff(0, 0, 0, 0) - 0.25).abs() < 1e-11);
        assert!((f.coeff(0, 0, 1, 1) + 0.25).abs() < 1e-11);
        assert!(showcase_functional(LeakageParams::new(0.3, 0.2).unwrap()).is_err());
        assert!(LeakageParams::new(0.1, 0.0).is_err());
    }

    /// Independent LP oracle: the largest value of `f` over AMDL(κ).
    fn amdl_max(f: &BellFunctional, kappa: f64) -> f64 {
        let strategies = S.strategies();
        let ns = strategies.len();
        let mut lp = ConicProblem::new(Sense::Maximize);
        let w = lp.add_vars(ns * 2);
        let r = lp.add_vars(ns);
        for (si, st) in strategies.iter().enumerate() {
            for x in 0..2 {
                let gain: f64 = (0..2)
                    .map(|y| 0.5 * f.coeff(st.fa[x], st.fb[y], x, y))
                    .sum();
                lp.objective.push((w.start + 2 * si + x, gain));
                lp.constrain(
                    vec![(r.start + si, 1.0), (w.start + 2 * si + x, -1.0)],
                    Relation::Ge,
                    0.0,
                );
                lp.constrain(vec![(w.start + 2 * si + x, 1.0)], Relation::Ge, 0.0);
            }
        }
        lp.constrain(w.clone().map(|k| (k, 1.0)).collect(), Relation::Eq, 1.0);
        lp.constrain(r.map(|k| (k, 1.0)).collect(), Relation::Le, 0.5 + kappa);
        let sol = lp.solve(&SolverSettings::default()).unwrap();
        assert!(sol.report.status.is_solved());
        sol.report.primal + f.offset()
    }

    #[test]
    fn certificate_dominates_lp_maximum() {
        for (kappa, slack) in [
            (0.0, 0.1),
            (0.025, 0.025f64.powf(0.45)),
            (0.05, 0.1),
            (0.1, 0.2),
            (0.2, 0.05),
        ] {
            let p = LeakageParams::new(kappa, slack).unwrap();
            let f = showcase_functional(p).unwrap();
            let m = amdl_max(&f, kappa);
            assert!(m <= 1e-8, "κ={kappa} ϑ={slack}: {m}");
        }
    }

    #[test]
    fn worst_case_is_monotone_but_closed_form_is_not() {
        let slack = 0.1;
        let mut last_lp = f64::NEG_INFINITY;
        let mut closed = Vec::new();
        for k in 0..=20 {
            let kappa = k as f64 * 0.01;
            let p = LeakageParams::new(kappa, slack).unwrap();
            let putz = showcase_functional(p).unwrap().with_offset(0.0);
            let m = amdl_max(&putz, kappa);
            assert!(m >= last_lp - 1e-8);
            assert!(m <= classical_bound_certificate(p) + 1e-8);
            last_lp = m;
            closed.push(classical_bound_certificate(p));
        }
        // The closed form rises only while (κ+ϑ)² ≤ ϑ/2.
        for k in 0..20 {
            let kappa = k as f64 * 0.01;
            if (kappa + 0.01 + slack).powi(2) <= slack / 2.0 {
                assert!(closed[k + 1] >= closed[k]);
            }
        }
        assert!(closed[20] < closed[10]);
    }

    #[test]
    fn random_witnesses_never_violate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kappa in [0.01, 0.05, 0.1] {
            let f = showcase_functional(LeakageParams::with_rule(kappa, SlackRule::Tcf).unwrap())
                .unwrap();
            for _ in 0..500 {
                let w = random_amdl_witness(S, kappa, &mut rng);
                assert!(f.evaluate(&w.behavior()).unwrap() <= 1e-9);
            }
        }
    }

    #[test]
    fn signaling_examples() {
        assert_eq!(signaling_from_leakage(2, 0.0).unwrap(), 0.0);
        assert!((signaling_from_leakage(2, 0.1).unwrap() - 0.2).abs() < 1e-15);
        assert!((signaling_from_leakage(4, 0.05).unwrap() - 0.2).abs() < 1e-15);
        assert!(signaling_from_leakage(2, 1.5).is_err());
    }

    #[test]
    fn relabelings_are_symmetries() {
        let rs = chsh_relabelings();
        assert_eq!(rs.len(), 64);
        let p = crate::quantum::ideal_chsh_behavior();
        let f = showcase_functional(LeakageParams::new(0.02, 0.3).unwrap()).unwrap();
        for r in &rs {
            let q = r.apply(&p);
            assert!((q.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let g = r.apply_functional(&f);
            assert!((g.evaluate(&q).unwrap() - f.evaluate(&p).unwrap()).abs() < 1e-15);
        }
        let id = Relabeling::identity(&S);
        assert_eq!(total_variation(&id.apply(&p), &p).unwrap(), 0.0);
        assert!(Relabeling::new(
            &S,
            vec![0, 0],
            vec![0, 1],
            vec![vec![0, 1]; 2],
            vec![vec![0, 1]; 2]
        )
        .is_err());
    }
}
