//! Toy trapdoor claw-free protocol.
//!
//! `f(b, x) = perm(x ⊕ b·s)` has claws `{(0, x), (1, x ⊕ s)}`. The honest prover
//! holds the preimage superposition of an image `z`, writes `r·w` into a qubit and
//! measures the preimage register in the Hadamard basis, obtaining `d`. Preimages are
//! the `(n+1)`-bit strings `w_b = b‖x_b`, so `w₀ ⊕ w₁ = 1‖s`.
//!
//! The permutation is seeded pseudorandomness, not a cryptographic object; anything
//! the prover could learn about `ξ` is measured by the hidden-input diagnostic.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::{PhaseFlag, ProverView, RecordHeader, Transcript, TranscriptRecord};
use super::run::{run_shards, RunOptions, SimulationRun};
use super::witness::{classical_shot, ClassicalProver, ClassicalRound};
use crate::error::{Error, Result};
use crate::hierarchy::OperatorStrategy;
use crate::quantum::{QubitState, C};
use crate::scenario::{BellScenario, ConditionalBehavior, JointBehavior};

fn parity(v: u32) -> u8 {
    (v.count_ones() & 1) as u8
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyTcf {
    bits: u32,
    secret: u32,
    perm: Vec<u32>,
    inverse: Vec<u32>,
    key: u64,
}

impl ToyTcf {
    pub const MAX_BITS: u32 = 16;
    /// Largest preimage length for the statevector mode.
    pub const MAX_STATEVECTOR_BITS: u32 = 8;

    pub fn from_parts(secret: u32, perm: Vec<u32>, key: u64) -> Result<Self> {
        let size = perm.len();
        if !size.is_power_of_two() || !(2..=1 << Self::MAX_BITS).contains(&size) {
            return Err(Error::InvalidParameter(format!(
                "permutation size {size} is not 2^n with 1 ≤ n ≤ 16"
            )));
        }
        let bits = size.trailing_zeros();
        if secret == 0 || secret as usize >= size {
            return Err(Error::InvalidParameter(format!(
                "secret must be a nonzero {bits}-bit string"
            )));
        }
        let mut inverse = vec![u32::MAX; size];
        for (x, &z) in perm.iter().enumerate() {
            if z as usize >= size || inverse[z as usize] != u32::MAX {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
            inverse[z as usize] = x as u32;
        }
        Ok(ToyTcf {
            bits,
            secret,
            perm,
            inverse,
            key,
        })
    }

    /// Secret and permutation drawn from a ChaCha stream seeded with `key`.
    pub fn generate(bits: u32, key: u64) -> Result<Self> {
        if bits == 0 || bits > Self::MAX_BITS {
            return Err(Error::InvalidParameter(format!(
                "preimage length {bits} outside 1..=16"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let size = 1u32 << bits;
        let secret = rng.random_range(1..size);
        let mut perm: Vec<u32> = (0..size).collect();
        perm.shuffle(&mut rng);
        Self::from_parts(secret, perm, key)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn secret(&self) -> u32 {
        self.secret
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn eval(&self, b: u8, x: u32) -> u32 {
        self.perm[(x ^ if b == 1 { self.secret } else { 0 }) as usize]
    }

    /// `(w₀, w₁)` for an image `z`, found with the trapdoor.
    pub fn preimages(&self, z: u32) -> Result<[u32; 2]> {
        let x0 = *self
            .inverse
            .get(z as usize)
            .ok_or_else(|| Error::InvalidParameter(format!("{z} is not an image")))?;
        Ok([x0, (1 << self.bits) | (x0 ^ self.secret)])
    }

    /// `w₀ ⊕ w₁ = 1‖s`.
    pub fn claw_difference(&self) -> u32 {
        (1 << self.bits) | self.secret
    }

    /// Verifier check of a preimage-test answer `(b, x)`.
    pub fn is_preimage(&self, z: u32, b: u8, x: u32) -> bool {
        b <= 1 && x < 1 << self.bits && self.eval(b, x) == z
    }
}

/// Which transcript bit the Bell mapping reads as the virtual answer.
///
/// `Verbatim` reads `r·w₀` when `ξ = 0` and the phase `d·(w₀⊕w₁)` when `ξ = 1`.
/// `Swapped` reads `r·w₀` when `ξ = 1`, where the honest qubit is `|r·w₀⟩`, and the
/// phase when `ξ = 0`, where the qubit is `|±⟩`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaConvention {
    Verbatim,
    #[default]
    Swapped,
}

/// `(ξ, α)` with `ξ = 1[r·w₀ = r·w₁]`.
pub fn bell_map(
    tcf: &ToyTcf,
    z: u32,
    r: u32,
    d: u32,
    convention: AlphaConvention,
) -> Result<(u8, u8)> {
    let [w0, w1] = tcf.preimages(z)?;
    let xi = u8::from(parity(r & w0) == parity(r & w1));
    let value = parity(r & w0);
    let phase = parity(d & tcf.claw_difference());
    let a = match (convention, xi) {
        (AlphaConvention::Swapped, 1) | (AlphaConvention::Verbatim, 0) => value,
        _ => phase,
    };
    Ok((xi, a))
}

/// Outcome of Phase A with the honest prover.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseA {
    pub z: u32,
    pub r: u32,
    pub d: u32,
    pub qubit: QubitState,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseAMode {
    /// Sample `d` and the qubit from their closed-form distribution.
    #[default]
    Shortcut,
    /// Simulate the preimage register and output qubit (n ≤ 8).
    Statevector,
}

fn sample_verifier_side(tcf: &ToyTcf, rng: &mut ChaCha8Rng) -> (u32, u32) {
    let x0 = rng.random_range(0..1u32 << tcf.bits);
    let r = rng.random_range(0..1u32 << (tcf.bits + 1));
    (tcf.perm[x0 as usize], r)
}

/// Closed form: if `r·Δ = 0` then `d` is uniform on `{d·Δ = 0}` and the qubit is `|r·w₀⟩`;
/// otherwise `d` is uniform and the qubit is `(|0⟩ + (−1)^{d·Δ}|1⟩)/√2`.
pub fn shortcut_phase_a(tcf: &ToyTcf, z: u32, r: u32, rng: &mut ChaCha8Rng) -> Result<PhaseA> {
    let [w0, _] = tcf.preimages(z)?;
    let delta = tcf.claw_difference();
    let mut d = rng.random_range(0..1u32 << (tcf.bits + 1));
    let qubit = if parity(r & delta) == 0 {
        if parity(d & delta) == 1 {
            d ^= 1 << tcf.bits;
        }
        QubitState::basis(parity(r & w0))
    } else {
        QubitState::hadamard(parity(d & delta))
    };
    Ok(PhaseA { z, r, d, qubit })
}

/// Exact distribution of `(d, qubit)` from the `(n+2)`-qubit statevector.
///
/// Amplitudes are indexed `(w << 1) | out`. The register starts in `(|w₀⟩ + |w₁⟩)/√2`,
/// the output qubit receives `r·w`, and each preimage qubit gets a Hadamard.
pub fn statevector_outcomes(tcf: &ToyTcf, z: u32, r: u32) -> Result<Vec<(u32, f64, QubitState)>> {
    if tcf.bits > ToyTcf::MAX_STATEVECTOR_BITS {
        return Err(Error::InvalidParameter(format!(
            "statevector mode needs n ≤ {}",
            ToyTcf::MAX_STATEVECTOR_BITS
        )));
    }
    let [w0, w1] = tcf.preimages(z)?;
    let mut amp = vec![0.0f64; 1 << (tcf.bits + 2)];
    for w in [w0, w1] {
        amp[((w << 1) | parity(r & w) as u32) as usize] = FRAC_1_SQRT_2;
    }
    for bit in 1..=tcf.bits + 1 {
        let m = 1usize << bit;
        for i in 0..amp.len() {
            if i & m == 0 {
                let (u, v) = (amp[i], amp[i | m]);
                amp[i] = (u + v) * FRAC_1_SQRT_2;
                amp[i | m] = (u - v) * FRAC_1_SQRT_2;
            }
        }
    }
    Ok((0..1u32 << (tcf.bits + 1))
        .filter_map(|d| {
            let (a0, a1) = (amp[(d << 1) as usize], amp[((d << 1) | 1) as usize]);
            let p = a0 * a0 + a1 * a1;
            let n = p.sqrt();
            (p > 1e-14).then(|| {
                (
                    d,
                    p,
                    QubitState::new(C::new(a0 / n, 0.0), C::new(a1 / n, 0.0)).expect("normalized"),
                )
            })
        })
        .collect())
}

fn statevector_phase_a(tcf: &ToyTcf, z: u32, r: u32, rng: &mut ChaCha8Rng) -> Result<PhaseA> {
    let outcomes = statevector_outcomes(tcf, z, r)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(d, p, qubit) in &outcomes {
        acc += p;
        if u < acc {
            return Ok(PhaseA { z, r, d, qubit });
        }
    }
    let &(d, _, qubit) = outcomes.last().expect("some outcome has weight");
    Ok(PhaseA { z, r, d, qubit })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TcfProver {
    #[default]
    Honest,
    ClassicalOptimal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TcfConfig {
    pub convention: AlphaConvention,
    pub phase_a: PhaseAMode,
    /// Fraction of rounds that end with a preimage test instead of Phase B.
    pub test_rate: f64,
    /// Bloch angles of Bob's two measurements.
    pub bob_angles: [f64; 2],
}

impl Default for TcfConfig {
    fn default() -> Self {
        TcfConfig {
            convention: AlphaConvention::Swapped,
            phase_a: PhaseAMode::Shortcut,
            test_rate: 0.0,
            bob_angles: [PI / 4.0, 3.0 * PI / 4.0],
        }
    }
}

/// Commits to `(0, x₀)`, answers `d = 0`, then `b₀ = r·w₀` and `b₁ = 0`.
///
/// With `d = 0` the phase bit is always 0, so this wins whenever `ξ·y` matches the
/// single bit it knows: three rounds in four.
#[derive(Clone, Copy, Debug)]
pub struct TcfClassicalProver<'a> {
    pub tcf: &'a ToyTcf,
    pub convention: AlphaConvention,
}

impl ClassicalProver for TcfClassicalProver<'_> {
    type Memory = u8;

    fn phase_a(&self, rng: &mut ChaCha8Rng) -> ClassicalRound<u8> {
        let (z, r) = sample_verifier_side(self.tcf, rng);
        let x0 = self.tcf.inverse[z as usize];
        let known = parity(r & x0);
        let (x, a) = bell_map(self.tcf, z, r, 0, self.convention).expect("z is an image");
        ClassicalRound {
            transcript: Transcript::Tcf {
                key: self.tcf.key,
                z,
                r,
                d: 0,
            },
            x: x as usize,
            a: a as usize,
            view: ProverView {
                label: known as u32,
                bloch: None,
            },
            memory: known,
        }
    }

    fn phase_b(&self, memory: &u8, y: usize) -> usize {
        if y == 0 {
            *memory as usize
        } else {
            0
        }
    }
}

fn honest_shot(
    tcf: &ToyTcf,
    config: &TcfConfig,
    shot: u64,
    rng: &mut ChaCha8Rng,
) -> Result<TranscriptRecord> {
    let (z, r) = sample_verifier_side(tcf, rng);
    let pa = match config.phase_a {
        PhaseAMode::Shortcut => shortcut_phase_a(tcf, z, r, rng)?,
        PhaseAMode::Statevector => statevector_phase_a(tcf, z, r, rng)?,
    };
    let (xi, a) = bell_map(tcf, z, r, pa.d, config.convention)?;
    let view = ProverView {
        label: 0,
        bloch: Some(pa.qubit.bloch()),
    };
    let transcript = Transcript::Tcf {
        key: tcf.key,
        z,
        r,
        d: pa.d,
    };
    let test = config.test_rate > 0.0 && rng.random_bool(config.test_rate);
    let (flag, challenge_y, response_b) = if test {
        // Measuring the preimage register in the computational basis yields either preimage.
        let b = rng.random_range(0..2u8);
        let x = tcf.inverse[z as usize] ^ if b == 1 { tcf.secret } else { 0 };
        (
            if tcf.is_preimage(z, b, x) {
                PhaseFlag::Acc
            } else {
                PhaseFlag::Rej
            },
            None,
            None,
        )
    } else {
        let y = rng.random_range(0..2u8);
        let p0 = pa.qubit.outcome_prob(config.bob_angles[y as usize], 0);
        let b = u8::from(rng.random::<f64>() >= p0);
        (PhaseFlag::Cont, Some(y), Some(b))
    };
    Ok(TranscriptRecord {
        shot,
        transcript,
        virtual_x: xi,
        virtual_a: a,
        flag,
        challenge_y,
        response_b,
        view,
    })
}

pub fn run_tcf_protocol(
    tcf: &ToyTcf,
    prover: TcfProver,
    config: &TcfConfig,
    opts: &RunOptions,
) -> Result<SimulationRun> {
    if !(0.0..1.0).contains(&config.test_rate) {
        return Err(Error::InvalidParameter(format!(
            "test rate {} outside [0, 1)",
            config.test_rate
        )));
    }
    if config.phase_a == PhaseAMode::Statevector && tcf.bits > ToyTcf::MAX_STATEVECTOR_BITS {
        return Err(Error::InvalidParameter(format!(
            "statevector mode needs n ≤ {}",
            ToyTcf::MAX_STATEVECTOR_BITS
        )));
    }
    let s = BellScenario::CHSH;
    let (records, tally) = match prover {
        TcfProver::Honest => run_shards(s, opts, |i, rng| honest_shot(tcf, config, i, rng))?,
        TcfProver::ClassicalOptimal => {
            let p = TcfClassicalProver {
                tcf,
                convention: config.convention,
            };
            run_shards(s, opts, |i, rng| Ok(classical_shot(&p, i, rng)))?
        }
    };
    let header = RecordHeader {
        protocol: "tcf".into(),
        seed: opts.seed,
        shots: opts.shots,
        config: serde_json::json!({
            "n": tcf.bits,
            "key": tcf.key,
            "prover": prover,
            "tcf": config,
        }),
    };
    Ok(SimulationRun {
        header,
        records,
        tally,
    })
}

/// Honest Phase-A ensembles `(weight, x, a, qubit)` conditioned on `x`, in closed form.
///
/// Among strings `r` with a given `ξ`, only one has a zero low part and then `r·w₀ = 0`,
/// so `P(r·w₀ = 0 | ξ) = ½ + 2^{−(n+1)}`; the phase bit is exactly uniform.
fn honest_ensembles(
    bits: u32,
    convention: AlphaConvention,
) -> Vec<(f64, usize, usize, QubitState)> {
    let eps = 0.5f64.powi(bits as i32 + 1);
    let value = [0.5 + eps, 0.5 - eps];
    let mut out = Vec::new();
    for xi in 0..2usize {
        let reads_value = matches!(
            (convention, xi),
            (AlphaConvention::Swapped, 1) | (AlphaConvention::Verbatim, 0)
        );
        for v in 0..2u8 {
            for ph in 0..2u8 {
                // ξ = 1 holds |r·w₀⟩ with a phase bit pinned to 0; ξ = 0 holds |±⟩ with independent r·w₀.
                let (w, qubit) = if xi == 1 {
                    (
                        if ph == 0 { value[v as usize] } else { 0.0 },
                        QubitState::basis(v),
                    )
                } else {
                    (0.5 * value[v as usize], QubitState::hadamard(ph))
                };
                if w > 0.0 {
                    out.push((w, xi, if reads_value { v } else { ph } as usize, qubit));
                }
            }
        }
    }
    out
}

/// Exact Bell-mapped behavior of the honest prover.
pub fn honest_behavior(bits: u32, config: &TcfConfig) -> JointBehavior {
    let s = BellScenario::CHSH;
    let mut p = vec![0.0; s.cells()];
    for (w, x, a, q) in honest_ensembles(bits, config.convention) {
        for y in 0..2 {
            for b in 0..2 {
                p[s.index(a, b, x, y)] += w * q.outcome_prob(config.bob_angles[y], b as u8);
            }
        }
    }
    ConditionalBehavior::new(s, p)
        .expect("normalized")
        .with_uniform_inputs()
}

/// The honest prover as `ψ(a|x)` on its qubit with Bob's projective measurements.
pub fn honest_operator_strategy(bits: u32, config: &TcfConfig) -> OperatorStrategy {
    let proj = |q: &QubitState| {
        let v = nalgebra::DVector::from_column_slice(&q.amp);
        &v * v.adjoint()
    };
    let mut states = vec![DMatrix::<C>::zeros(2, 2); 4];
    for (w, x, a, q) in honest_ensembles(bits, config.convention) {
        states[x * 2 + a] += proj(&q) * C::new(w, 0.0);
    }
    let measurements = (0..2)
        .flat_map(|y| (0..2u8).map(move |b| (y, b)))
        .map(|(y, b)| proj(&QubitState::measurement_vector(config.bob_angles[y], b)))
        .collect();
    OperatorStrategy::new(BellScenario::CHSH, states, measurements).expect("valid qubit strategy")
}
