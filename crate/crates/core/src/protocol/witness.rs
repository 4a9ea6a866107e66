//! Hidden-variable extraction from classical provers by rewinding Phase B.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::records::{PhaseFlag, ProverView, Transcript, TranscriptRecord};
use super::run::{shard_rng, RunOptions, Tally, SHARD_SIZE};
use crate::error::{Error, Result};
use crate::polytope::{AmdlAtom, AmdlWitness};
use crate::scenario::{BellScenario, JointBehavior};

/// One Phase-A round with a classical prover: the Bell-mapped pair and the prover's memory.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalRound<M> {
    pub transcript: Transcript,
    pub x: usize,
    pub a: usize,
    pub view: ProverView,
    pub memory: M,
}

/// A prover whose entire Phase-A state is classical and can be copied.
///
/// Phase B is a deterministic function of that memory, so it can be replayed for every
/// challenge. Quantum provers hold a state that cannot be cloned and have no implementation.
pub trait ClassicalProver: Sync {
    type Memory: Clone + Send;

    fn scenario(&self) -> BellScenario {
        BellScenario::CHSH
    }

    /// Runs the verifier and prover through Phase A.
    fn phase_a(&self, rng: &mut ChaCha8Rng) -> ClassicalRound<Self::Memory>;

    fn phase_b(&self, memory: &Self::Memory, y: usize) -> usize;
}

/// Samples one complete round with a uniform challenge.
pub(crate) fn classical_shot<P: ClassicalProver>(
    prover: &P,
    shot: u64,
    rng: &mut ChaCha8Rng,
) -> TranscriptRecord {
    let round = prover.phase_a(rng);
    let y = rng.random_range(0..prover.scenario().ny);
    record(shot, &round, y, prover.phase_b(&round.memory, y))
}

fn record<M>(shot: u64, round: &ClassicalRound<M>, y: usize, b: usize) -> TranscriptRecord {
    TranscriptRecord {
        shot,
        transcript: round.transcript.clone(),
        virtual_x: round.x as u8,
        virtual_a: round.a as u8,
        flag: PhaseFlag::Cont,
        challenge_y: Some(y as u8),
        response_b: Some(b as u8),
        view: round.view,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub witness: AmdlWitness,
    /// Behavior of the same runs with one sampled challenge each.
    pub empirical: JointBehavior,
    pub tally: Tally,
}

#[derive(Default)]
struct Bucket {
    runs: u64,
    x: Vec<u64>,
    /// `xa[x][a]`
    xa: Vec<Vec<u64>>,
}

/// Buckets runs by the rewound response vector `γ = (b_y)_y` and reads off `P(x|γ)` and `P(a|x,γ)`.
pub fn extract_amdl_witness<P: ClassicalProver>(
    prover: &P,
    opts: &RunOptions,
) -> Result<Extraction> {
    opts.validate()?;
    let s = prover.scenario();
    let shards = opts.shots.div_ceil(SHARD_SIZE) as usize;
    let parts = opts.exec.map_range(shards, |k| {
        let mut rng = shard_rng(opts.seed, k as u64);
        let start = k as u64 * SHARD_SIZE;
        let end = (start + SHARD_SIZE).min(opts.shots);
        let mut buckets: BTreeMap<Vec<usize>, Bucket> = BTreeMap::new();
        let mut tally = Tally::new(s);
        for i in start..end {
            let round = prover.phase_a(&mut rng);
            let gamma: Vec<usize> = (0..s.ny)
                .map(|y| prover.phase_b(&round.memory, y))
                .collect();
            let y = rng.random_range(0..s.ny);
            tally.add(&record(i, &round, y, gamma[y]));
            let bucket = buckets.entry(gamma).or_insert_with(|| Bucket {
                runs: 0,
                x: vec![0; s.nx],
                xa: vec![vec![0; s.na]; s.nx],
            });
            bucket.runs += 1;
            bucket.x[round.x] += 1;
            bucket.xa[round.x][round.a] += 1;
        }
        (buckets, tally)
    });
    let mut merged: BTreeMap<Vec<usize>, Bucket> = BTreeMap::new();
    let mut tally = Tally::new(s);
    for (part, t) in parts {
        tally.merge(&t);
        for (gamma, b) in part {
            let m = merged.entry(gamma).or_insert_with(|| Bucket {
                runs: 0,
                x: vec![0; s.nx],
                xa: vec![vec![0; s.na]; s.nx],
            });
            m.runs += b.runs;
            for x in 0..s.nx {
                m.x[x] += b.x[x];
                for a in 0..s.na {
                    m.xa[x][a] += b.xa[x][a];
                }
            }
        }
    }
    let total = opts.shots as f64;
    let atoms = merged
        .into_iter()
        .map(|(gamma, b)| {
            let n = b.runs as f64;
            AmdlAtom {
                weight: n / total,
                input_law: b.x.iter().map(|&c| c as f64 / n).collect(),
                response_a: (0..s.nx)
                    .map(|x| {
                        if b.x[x] == 0 {
                            vec![1.0 / s.na as f64; s.na]
                        } else {
                            b.xa[x].iter().map(|&c| c as f64 / b.x[x] as f64).collect()
                        }
                    })
                    .collect(),
                response_b: gamma
                    .iter()
                    .map(|&g| (0..s.nb).map(|v| if v == g { 1.0 } else { 0.0 }).collect())
                    .collect(),
            }
        })
        .collect();
    let witness = AmdlWitness::new(s, atoms)?;
    let empirical = tally.behavior().map_err(|e| match e {
        Error::InvalidBehavior(m) => Error::InvalidParameter(format!("too few runs: {m}")),
        other => other,
    })?;
    Ok(Extraction {
        witness,
        empirical,
        tally,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::{amdl_membership_with, MembershipOptions};
    use crate::protocol::compiled::{ClassicalCompiled, CompiledClassicalProver, MockQhe};
    use crate::protocol::tcf::{AlphaConvention, TcfClassicalProver, ToyTcf};
    use crate::scenario::total_variation;

    fn opts(runs: u64) -> RunOptions {
        RunOptions::new(runs, 21)
    }

    #[test]
    fn input_blind_prover_has_one_atom() {
        let p = CompiledClassicalProver {
            qhe: MockQhe::new(0.0).unwrap(),
            strategy: ClassicalCompiled {
                a_of_x: [0, 1],
                b_table: [[1, 0], [1, 0]],
            },
        };
        let ex = extract_amdl_witness(&p, &opts(10_000)).unwrap();
        assert_eq!(ex.witness.atoms.len(), 1);
        assert!((ex.witness.atoms[0].input_law[0] - 0.5).abs() < 0.02);
        assert!(ex.witness.leakage().abs() < 0.02);
        assert!(total_variation(&ex.witness.behavior(), &ex.empirical).unwrap() <= 0.02);
    }

    #[test]
    fn planted_bias_is_recovered() {
        let p = CompiledClassicalProver::planted_bias(0.1, [[0, 0], [1, 1]]).unwrap();
        let ex = extract_amdl_witness(&p, &opts(10_000)).unwrap();
        assert_eq!(ex.witness.atoms.len(), 2);
        assert!(
            (ex.witness.leakage() - 0.1).abs() < 0.02,
            "{}",
            ex.witness.leakage()
        );
        assert!(total_variation(&ex.witness.behavior(), &ex.empirical).unwrap() <= 0.02);
    }

    /// The empirical behavior sits in AMDL(leakage + 3σ) up to its sampling residual.
    #[test]
    fn empirical_behavior_passes_membership() {
        let tcf = ToyTcf::generate(6, 3).unwrap();
        type Run<'a> = Box<dyn Fn(&RunOptions) -> Extraction + 'a>;
        let provers: Vec<Run> = vec![
            Box::new(|o| {
                extract_amdl_witness(
                    &CompiledClassicalProver::planted_bias(0.1, [[0, 1], [1, 1]]).unwrap(),
                    o,
                )
                .unwrap()
            }),
            Box::new(|o| {
                extract_amdl_witness(
                    &TcfClassicalProver {
                        tcf: &tcf,
                        convention: AlphaConvention::Swapped,
                    },
                    o,
                )
                .unwrap()
            }),
        ];
        let runs = 20_000;
        for run in provers {
            let ex = run(&opts(runs));
            let slack = 3.0 * 0.5 / (runs as f64).sqrt();
            let mo = MembershipOptions {
                tol: 4.0 * ex.tally.sigma(),
                ..Default::default()
            };
            let v =
                amdl_membership_with(&ex.empirical, (ex.witness.leakage() + slack).min(0.5), &mo)
                    .unwrap();
            assert!(v.inside, "residual {}", v.residual);
        }
    }

    #[test]
    fn rejects_zero_runs() {
        let p = CompiledClassicalProver::planted_bias(0.0, [[0, 0], [0, 0]]).unwrap();
        assert!(extract_amdl_witness(&p, &opts(0)).is_err());
    }
}
