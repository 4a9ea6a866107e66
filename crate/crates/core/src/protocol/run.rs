//! Sharded seeded execution and aggregation of shots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::{PhaseFlag, RecordHeader, TranscriptRecord};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::scenario::{BellScenario, JointBehavior};

/// Shots per shard. Fixed so that results depend only on `(seed, shots)`.
pub const SHARD_SIZE: u64 = 4096;

/// Upper limit on shots per run.
pub const MAX_SHOTS: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub shots: u64,
    pub seed: u64,
    /// Keep per-shot records (memory grows linearly with shots).
    pub keep_records: bool,
    pub exec: Execution,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            shots: 100_000,
            seed: 0,
            keep_records: false,
            exec: Execution::Parallel,
        }
    }
}

impl RunOptions {
    pub fn new(shots: u64, seed: u64) -> Self {
        RunOptions {
            shots,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 || self.shots > MAX_SHOTS {
            return Err(Error::InvalidParameter(format!(
                "shots must be in 1..={MAX_SHOTS}, got {}",
                self.shots
            )));
        }
        Ok(())
    }
}

/// Cell counts of continued rounds plus Phase-A outcomes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub scenario: BellScenario,
    pub counts: Vec<u64>,
    pub accepted: u64,
    pub rejected: u64,
}

impl Tally {
    pub fn new(scenario: BellScenario) -> Self {
        Tally {
            scenario,
            counts: vec![0; scenario.cells()],
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn add(&mut self, r: &TranscriptRecord) {
        match (r.flag, r.challenge_y, r.response_b) {
            (PhaseFlag::Cont, Some(y), Some(b)) => {
                let i = self.scenario.index(
                    r.virtual_a as usize,
                    b as usize,
                    r.virtual_x as usize,
                    y as usize,
                );
                self.counts[i] += 1;
            }
            (PhaseFlag::Acc, ..) => self.accepted += 1,
            (PhaseFlag::Rej, ..) => self.rejected += 1,
            _ => {}
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.accepted += other.accepted;
        self.rejected += other.rejected;
    }

    pub fn continued(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn y_counts(&self) -> Vec<u64> {
        let s = self.scenario;
        let mut ny = vec![0; s.ny];
        for (i, &c) in self.counts.iter().enumerate() {
            ny[s.cell(i).3] += c;
        }
        ny
    }

    /// `P̂(a,b,x,y) = (1/|Y|)·N(a,b,x,y)/N(y)`: the challenge is chosen by the verifier
    /// uniformly, so its sampled frequencies are divided out.
    pub fn behavior(&self) -> Result<JointBehavior> {
        let s = self.scenario;
        let ny = self.y_counts();
        if ny.contains(&0) {
            return Err(Error::InvalidBehavior(
                "some challenge was never sampled".into(),
            ));
        }
        let p = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 / ny[s.cell(i).3] as f64 / s.ny as f64)
            .collect();
        JointBehavior::from_solver(s, p)
    }

    /// Largest per-cell binomial standard error of [`Tally::behavior`].
    pub fn sigma(&self) -> f64 {
        let s = self.scenario;
        let ny = self.y_counts();
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let n = ny[s.cell(i).3].max(1) as f64;
                let p = c as f64 / n;
                (p * (1.0 - p) / n).sqrt().max(0.5 / n) / s.ny as f64
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationRun {
    pub header: RecordHeader,
    /// Empty unless [`RunOptions::keep_records`] was set.
    pub records: Vec<TranscriptRecord>,
    pub tally: Tally,
}

impl SimulationRun {
    pub fn behavior(&self) -> Result<JointBehavior> {
        self.tally.behavior()
    }
}

/// Runs `opts.shots` shots of `shot(index, rng)`, shard `k` drawing from stream `k` of `seed`.
pub(crate) fn run_shards<F>(
    s: BellScenario,
    opts: &RunOptions,
    shot: F,
) -> Result<(Vec<TranscriptRecord>, Tally)>
where
    F: Fn(u64, &mut ChaCha8Rng) -> Result<TranscriptRecord> + Sync + Send,
{
    opts.validate()?;
    let shards = opts.shots.div_ceil(SHARD_SIZE) as usize;
    let parts = opts
        .exec
        .map_range(shards, |k| -> Result<(Vec<TranscriptRecord>, Tally)> {
            let mut rng = shard_rng(opts.seed, k as u64);
            let start = k as u64 * SHARD_SIZE;
            let end = (start + SHARD_SIZE).min(opts.shots);
            let mut tally = Tally::new(s);
            let mut records = Vec::new();
            for i in start..end {
                let r = shot(i, &mut rng)?;
                tally.add(&r);
                if opts.keep_records {
                    records.push(r);
                }
            }
            Ok((records, tally))
        });
    let mut tally = Tally::new(s);
    let mut records = Vec::new();
    for part in parts {
        let (r, t) = part?;
        tally.merge(&t);
        records.extend(r);
    }
    Ok((records, tally))
}

pub(crate) fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}
