//! CHSH compiled into one prover with a mock homomorphic encryption.
//!
//! The verifier pads `x` with a fresh key bit. Evaluation is transparent: the prover's
//! simulated Alice measurement sees the plaintext, and the answer is padded again.
//! With probability `leak_prob` the prover also learns `x` and may use it for the rest
//! of the round; for binary inputs `leak_prob = 2κ` gives guessing advantage `κ`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optimize::{multistart, NelderMeadOptions};
use super::records::{PhaseFlag, ProverView, RecordHeader, Transcript, TranscriptRecord};
use super::run::{run_shards, RunOptions, SimulationRun};
use super::witness::{classical_shot, ClassicalProver, ClassicalRound};
use crate::error::{Error, Result};
use crate::hierarchy::OperatorStrategy;
use crate::inequality::{showcase_functional, LeakageParams};
use crate::quantum::{QubitState, SchmidtState, C, CHSH_ALICE, CHSH_BOB};
use crate::scenario::{BellScenario, ConditionalBehavior, JointBehavior};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PadKey(pub u8);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockQhe {
    leak_prob: f64,
}

impl MockQhe {
    pub fn new(leak_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&leak_prob) {
            return Err(Error::InvalidParameter(format!(
                "leak probability {leak_prob} outside [0,1]"
            )));
        }
        Ok(MockQhe { leak_prob })
    }

    /// Leak rate giving guessing advantage `kappa` on a binary input.
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        Self::new(2.0 * kappa)
    }

    pub fn leak_prob(&self) -> f64 {
        self.leak_prob
    }

    pub fn keygen(&self, rng: &mut ChaCha8Rng) -> PadKey {
        PadKey(rng.random_range(0..2))
    }

    pub fn encrypt(&self, key: PadKey, bit: u8) -> u8 {
        bit ^ key.0
    }

    pub fn decrypt(&self, key: PadKey, c: u8) -> u8 {
        c ^ key.0
    }

    /// Applies `g` to the plaintext of `c` and re-encrypts under `out`.
    pub fn eval(&self, key: PadKey, out: PadKey, c: u8, g: impl FnOnce(u8) -> u8) -> u8 {
        self.encrypt(out, g(self.decrypt(key, c)))
    }

    fn leaks(&self, rng: &mut ChaCha8Rng) -> bool {
        self.leak_prob > 0.0 && rng.random_bool(self.leak_prob)
    }
}

/// Strategy on `cos θ|00⟩ + sin θ|11⟩` with per-input Bloch angles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlainAngles {
    pub theta: f64,
    pub alice: [f64; 2],
    pub bob: [f64; 2],
}

impl PlainAngles {
    pub const IDEAL: PlainAngles = PlainAngles {
        theta: PI / 4.0,
        alice: CHSH_ALICE,
        bob: CHSH_BOB,
    };

    fn to_vec(self) -> Vec<f64> {
        vec![
            self.theta,
            self.alice[0],
            self.alice[1],
            self.bob[0],
            self.bob[1],
        ]
    }

    fn from_slice(v: &[f64]) -> Self {
        PlainAngles {
            theta: v[0],
            alice: [v[1], v[2]],
            bob: [v[3], v[4]],
        }
    }
}

/// Strategy used once `x` has leaked: everything may depend on `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakedAngles {
    pub theta: [f64; 2],
    pub alice: [f64; 2],
    /// `bob[x][y]`
    pub bob: [[f64; 2]; 2],
}

impl LeakedAngles {
    /// Product state `|00⟩` with answers `a[x]` and `b[x][y]` fixed.
    pub fn deterministic(a: [u8; 2], b: [[u8; 2]; 2]) -> Self {
        let angle = |bit: u8| f64::from(bit) * PI;
        LeakedAngles {
            theta: [0.0; 2],
            alice: a.map(angle),
            bob: b.map(|row| row.map(angle)),
        }
    }

    pub fn ignoring_leak(p: PlainAngles) -> Self {
        LeakedAngles {
            theta: [p.theta; 2],
            alice: p.alice,
            bob: [p.bob; 2],
        }
    }
}

/// A two-qubit strategy that switches to `leaked` when the input leaks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltedStrategy {
    pub plain: PlainAngles,
    pub leaked: LeakedAngles,
}

impl TiltedStrategy {
    pub fn ideal() -> Self {
        TiltedStrategy {
            plain: PlainAngles::IDEAL,
            leaked: LeakedAngles::ignoring_leak(PlainAngles::IDEAL),
        }
    }

    /// `(θ, α, [β_y])` used for input `x`.
    fn angles(&self, x: usize, leaked: bool) -> (f64, f64, [f64; 2]) {
        if leaked {
            (
                self.leaked.theta[x],
                self.leaked.alice[x],
                self.leaked.bob[x],
            )
        } else {
            (self.plain.theta, self.plain.alice[x], self.plain.bob)
        }
    }

    /// `P(a,b|x,y) = (1−q)·P_plain + q·P_leaked`.
    pub fn conditional(&self, leak_prob: f64) -> ConditionalBehavior {
        let s = BellScenario::CHSH;
        let p = (0..s.cells())
            .map(|i| {
                let (a, b, x, y) = s.cell(i);
                let part = |leaked| {
                    let (theta, alpha, beta) = self.angles(x, leaked);
                    SchmidtState { theta }.joint_prob(alpha, beta[y], a as u8, b as u8)
                };
                (1.0 - leak_prob) * part(false) + leak_prob * part(true)
            })
            .collect();
        ConditionalBehavior::new(s, p).expect("mixture of quantum behaviors")
    }

    /// Exact behavior with the verifier's uniform `x` and `y`.
    pub fn behavior(&self, leak_prob: f64) -> JointBehavior {
        self.conditional(leak_prob).with_uniform_inputs()
    }

    /// Bob's side as subnormalized states `ψ(a|x)` in three blocks: no leak, leaked 0, leaked 1.
    pub fn operator_strategy(&self, leak_prob: f64) -> OperatorStrategy {
        let proj = |theta: f64, b: u8| {
            let v = QubitState::measurement_vector(theta, b);
            let v = DVector::from_column_slice(&v.amp);
            &v * v.adjoint()
        };
        let place = |blocks: [DMatrix<C>; 3]| {
            let mut m = DMatrix::<C>::zeros(6, 6);
            for (k, blk) in blocks.iter().enumerate() {
                m.view_mut((2 * k, 2 * k), (2, 2)).copy_from(blk);
            }
            m
        };
        let zero = || DMatrix::<C>::zeros(2, 2);
        let mut states = Vec::new();
        for x in 0..2 {
            for a in 0..2u8 {
                let mut blocks = [zero(), zero(), zero()];
                let (t, al, _) = self.angles(x, false);
                blocks[0] =
                    SchmidtState { theta: t }.bob_conditional(al, a) * C::new(1.0 - leak_prob, 0.0);
                let (t, al, _) = self.angles(x, true);
                blocks[1 + x] =
                    SchmidtState { theta: t }.bob_conditional(al, a) * C::new(leak_prob, 0.0);
                states.push(place(blocks));
            }
        }
        let mut measurements = Vec::new();
        for y in 0..2 {
            for b in 0..2u8 {
                measurements.push(place([
                    proj(self.plain.bob[y], b),
                    proj(self.leaked.bob[0][y], b),
                    proj(self.leaked.bob[1][y], b),
                ]));
            }
        }
        OperatorStrategy::new(BellScenario::CHSH, states, measurements)
            .expect("block strategy is valid")
    }
}

/// A classical prover: `a = a_of_x[x]` through evaluation, `b = b_table[g][y]` where `g` is
/// the leaked `x` or else a private coin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalCompiled {
    pub a_of_x: [u8; 2],
    pub b_table: [[u8; 2]; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CompiledStrategy {
    Ideal,
    MdlTilted(TiltedStrategy),
    Classical(ClassicalCompiled),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompiledClassicalProver {
    pub qhe: MockQhe,
    pub strategy: ClassicalCompiled,
}

impl CompiledClassicalProver {
    /// Plays `gammas[g]` on guess `g`; guesses `x` with advantage `bias`.
    pub fn planted_bias(bias: f64, gammas: [[u8; 2]; 2]) -> Result<Self> {
        Ok(CompiledClassicalProver {
            qhe: MockQhe::from_kappa(bias)?,
            strategy: ClassicalCompiled {
                a_of_x: [0, 0],
                b_table: gammas,
            },
        })
    }
}

impl ClassicalProver for CompiledClassicalProver {
    type Memory = u8;

    fn phase_a(&self, rng: &mut ChaCha8Rng) -> ClassicalRound<u8> {
        let x = rng.random_range(0..2u8);
        let kx = self.qhe.keygen(rng);
        let x_enc = self.qhe.encrypt(kx, x);
        let leaked = self.qhe.leaks(rng);
        let guess = if leaked { x } else { rng.random_range(0..2u8) };
        let ka = self.qhe.keygen(rng);
        let a_enc = self
            .qhe
            .eval(kx, ka, x_enc, |v| self.strategy.a_of_x[v as usize]);
        ClassicalRound {
            transcript: Transcript::Compiled {
                x_enc,
                a_enc,
                pad: [kx.0, ka.0],
            },
            x: self.qhe.decrypt(kx, x_enc) as usize,
            a: self.qhe.decrypt(ka, a_enc) as usize,
            view: ProverView {
                label: if leaked { 1 + x as u32 } else { 0 },
                bloch: None,
            },
            memory: guess,
        }
    }

    fn phase_b(&self, memory: &u8, y: usize) -> usize {
        self.strategy.b_table[*memory as usize][y] as usize
    }
}

/// `(ξ, α) = (Dec(x̃), Dec(ã))`.
pub fn bell_map(x_enc: u8, a_enc: u8, pad: [u8; 2]) -> (u8, u8) {
    (x_enc ^ pad[0], a_enc ^ pad[1])
}

fn quantum_shot(
    qhe: &MockQhe,
    st: &TiltedStrategy,
    shot: u64,
    rng: &mut ChaCha8Rng,
) -> TranscriptRecord {
    let x = rng.random_range(0..2u8);
    let kx = qhe.keygen(rng);
    let x_enc = qhe.encrypt(kx, x);
    let leaked = qhe.leaks(rng);
    let (theta, alpha, beta) = st.angles(x as usize, leaked);
    let state = SchmidtState { theta };
    let p0: f64 = (0..2).map(|b| state.joint_prob(alpha, beta[0], 0, b)).sum();
    let a = u8::from(rng.random::<f64>() >= p0);
    let u = QubitState::measurement_vector(alpha, a);
    let (v0, v1) = (theta.cos() * u.amp[0].re, theta.sin() * u.amp[1].re);
    let n = v0.hypot(v1);
    let bob = QubitState::new(C::new(v0 / n, 0.0), C::new(v1 / n, 0.0)).expect("normalized");
    let ka = qhe.keygen(rng);
    let a_enc = qhe.eval(kx, ka, x_enc, |_| a);
    let y = rng.random_range(0..2u8);
    let b = u8::from(rng.random::<f64>() >= bob.outcome_prob(beta[y as usize], 0));
    let (xi, alpha_t) = bell_map(x_enc, a_enc, [kx.0, ka.0]);
    TranscriptRecord {
        shot,
        transcript: Transcript::Compiled {
            x_enc,
            a_enc,
            pad: [kx.0, ka.0],
        },
        virtual_x: xi,
        virtual_a: alpha_t,
        flag: PhaseFlag::Cont,
        challenge_y: Some(y),
        response_b: Some(b),
        view: ProverView {
            label: if leaked { 1 + x as u32 } else { 0 },
            bloch: Some(bob.bloch()),
        },
    }
}

pub fn run_compiled_chsh(
    qhe: MockQhe,
    strategy: &CompiledStrategy,
    opts: &RunOptions,
) -> Result<SimulationRun> {
    let s = BellScenario::CHSH;
    let (records, tally) = match strategy {
        CompiledStrategy::Ideal => {
            let st = TiltedStrategy::ideal();
            run_shards(s, opts, |i, rng| Ok(quantum_shot(&qhe, &st, i, rng)))?
        }
        CompiledStrategy::MdlTilted(st) => {
            run_shards(s, opts, |i, rng| Ok(quantum_shot(&qhe, st, i, rng)))?
        }
        CompiledStrategy::Classical(c) => {
            let p = CompiledClassicalProver { qhe, strategy: *c };
            run_shards(s, opts, |i, rng| Ok(classical_shot(&p, i, rng)))?
        }
    };
    let header = RecordHeader {
        protocol: "compiled".into(),
        seed: opts.seed,
        shots: opts.shots,
        config: serde_json::json!({ "leak_prob": qhe.leak_prob, "strategy": strategy }),
    };
    Ok(SimulationRun {
        header,
        records,
        tally,
    })
}

/// Maximizes the showcase value of a tilted strategy at leak rate `leak_prob`.
///
/// Once `x` has leaked the best response is deterministic (the functional is linear in
/// the leaked branch's behavior and that branch may depend on `x`), so it is chosen by
/// enumeration; the five no-leak angles are searched by multistart Nelder–Mead from the
/// ideal angles plus seeded random starts.
pub fn optimize_tilted(
    params: LeakageParams,
    leak_prob: f64,
    seed: u64,
) -> Result<(TiltedStrategy, f64)> {
    MockQhe::new(leak_prob)?;
    let f = showcase_functional(params)?;
    let mut a = [0u8; 2];
    let mut b = [[0u8; 2]; 2];
    for x in 0..2 {
        let mut best = f64::NEG_INFINITY;
        for ax in 0..2 {
            let value: f64 = (0..2)
                .map(|y| {
                    (0..2)
                        .map(|bb| f.coeff(ax, bb, x, y))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .sum();
            if value > best {
                best = value;
                a[x] = ax as u8;
                for (y, by) in b[x].iter_mut().enumerate() {
                    *by = u8::from(f.coeff(ax, 1, x, y) > f.coeff(ax, 0, x, y));
                }
            }
        }
    }
    let leaked = LeakedAngles::deterministic(a, b);
    let value = |v: &[f64]| {
        let st = TiltedStrategy {
            plain: PlainAngles::from_slice(v),
            leaked,
        };
        f.evaluate(&st.behavior(leak_prob)).expect("same scenario")
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (v, neg) = multistart(
        &|v: &[f64]| -value(v),
        &[PlainAngles::IDEAL.to_vec()],
        24,
        (-PI, PI),
        &mut rng,
        &NelderMeadOptions::default(),
    );
    Ok((
        TiltedStrategy {
            plain: PlainAngles::from_slice(&v),
            leaked,
        },
        -neg,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inequality::SlackRule;
    use crate::protocol::diagnostic::hidden_input_diagnostic;
    use crate::quantum::ideal_chsh_behavior;
    use crate::scenario::{chsh_winning_probability, Mode};

    const COS2: f64 = 0.853_553_390_593_273_8;

    #[test]
    fn pad_is_correct() {
        let q = MockQhe::new(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let k = q.keygen(&mut rng);
            let m = rng.random_range(0..2u8);
            assert_eq!(q.decrypt(k, q.encrypt(k, m)), m);
        }
        assert!(MockQhe::new(1.5).is_err());
        assert_eq!(MockQhe::from_kappa(0.02).unwrap().leak_prob(), 0.04);
    }

    #[test]
    fn ideal_run_matches_two_qubit_prediction() {
        let shots = 100_000;
        let run = run_compiled_chsh(
            MockQhe::new(0.0).unwrap(),
            &CompiledStrategy::Ideal,
            &RunOptions::new(shots, 3),
        )
        .unwrap();
        let p = run.behavior().unwrap();
        let omega = chsh_winning_probability(&p, Mode::Diagnostic)
            .unwrap()
            .omega;
        assert!((omega - COS2).abs() < 0.01);
        let exact = ideal_chsh_behavior();
        let leak_blind = TiltedStrategy::ideal().behavior(0.3);
        assert!(exact
            .probabilities()
            .iter()
            .zip(leak_blind.probabilities())
            .all(|(u, v)| (u - v).abs() < 1e-15));
        let tol = 4.0 * run.tally.sigma();
        for (u, v) in p.probabilities().iter().zip(exact.probabilities()) {
            assert!((u - v).abs() < tol, "{u} vs {v}");
        }
    }

    #[test]
    fn full_leak_wins_classically() {
        let c = ClassicalCompiled {
            a_of_x: [0, 0],
            b_table: [[0, 0], [0, 1]],
        };
        let run = run_compiled_chsh(
            MockQhe::new(1.0).unwrap(),
            &CompiledStrategy::Classical(c),
            &RunOptions::new(10_000, 1),
        )
        .unwrap();
        let omega = chsh_winning_probability(&run.behavior().unwrap(), Mode::Diagnostic)
            .unwrap()
            .omega;
        assert_eq!(omega, 1.0);
    }

    #[test]
    fn records_recompute() {
        let opts = RunOptions {
            keep_records: true,
            ..RunOptions::new(2_000, 8)
        };
        let tilted = CompiledStrategy::MdlTilted(TiltedStrategy::ideal());
        let run = run_compiled_chsh(MockQhe::new(0.5).unwrap(), &tilted, &opts).unwrap();
        for r in &run.records {
            let Transcript::Compiled { x_enc, a_enc, pad } = r.transcript else {
                panic!("compiled transcript")
            };
            assert_eq!(bell_map(x_enc, a_enc, pad), (r.virtual_x, r.virtual_a));
            assert!(r.is_consistent());
        }
    }

    /// With leak rate `q` only the leak label separates the inputs: advantage `q/2`.
    #[test]
    fn diagnostic_tracks_leak_rate() {
        let opts = RunOptions {
            keep_records: true,
            ..RunOptions::new(100_000, 9)
        };
        let run = run_compiled_chsh(
            MockQhe::from_kappa(0.05).unwrap(),
            &CompiledStrategy::Ideal,
            &opts,
        )
        .unwrap();
        let adv = hidden_input_diagnostic(&run.records).unwrap();
        assert!((adv - 0.05).abs() < 0.01, "{adv}");
    }

    #[test]
    fn operator_strategy_reproduces_behavior() {
        let st = TiltedStrategy {
            plain: PlainAngles {
                theta: 0.5,
                alice: [0.1, 1.2],
                bob: [0.7, -0.4],
            },
            leaked: LeakedAngles::deterministic([0, 1], [[0, 1], [1, 0]]),
        };
        let q = 0.3;
        let ops = st.operator_strategy(q).conditional();
        let direct = st.conditional(q);
        for i in 0..16 {
            let (a, b, x, y) = BellScenario::CHSH.cell(i);
            assert!((ops.get(a, b, x, y) - direct.get(a, b, x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn tilted_optimum_beats_zero() {
        let params = LeakageParams::with_rule(0.02, SlackRule::Compiled).unwrap();
        let (st, value) = optimize_tilted(params, 0.04, 1).unwrap();
        assert!(value >= 1.45e-6 - 1e-6, "{value}");
        let f = showcase_functional(params).unwrap();
        assert!((f.evaluate(&st.behavior(0.04)).unwrap() - value).abs() < 1e-15);
        assert_eq!(
            st.leaked,
            LeakedAngles::deterministic([0, 0], [[0, 0], [0, 1]])
        );
    }
}
