//! Adaptive measurement programs: branching trees of projective measurements.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::words::Polynomial;
use crate::error::{Error, Result};
use crate::scenario::BellScenario;

/// Default bound on the raw number of programs generated at one level.
pub const DEFAULT_PROGRAM_CAP: usize = 100_000;

/// Measure `y`; on outcome `b` in the kept set continue with `branches[b]`, otherwise abort.
///
/// As an operator, a node is `Σ_b child_b · M(y, b)`: the measurement acts first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptiveProgram {
    Identity,
    Node {
        y: usize,
        branches: BTreeMap<usize, AdaptiveProgram>,
    },
}

impl fmt::Display for AdaptiveProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdaptiveProgram::Identity => f.write_str("I"),
            AdaptiveProgram::Node { y, branches } => {
                write!(f, "y{y}{{")?;
                for (i, (b, child)) in branches.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{b}:{child}")?;
                }
                f.write_str("}")
            }
        }
    }
}

impl AdaptiveProgram {
    pub fn node(
        s: &BellScenario,
        y: usize,
        branches: BTreeMap<usize, AdaptiveProgram>,
    ) -> Result<Self> {
        if y >= s.ny || branches.is_empty() || branches.keys().any(|&b| b >= s.nb) {
            return Err(Error::InvalidParameter(
                "program node needs a valid input and at least one kept outcome".into(),
            ));
        }
        Ok(AdaptiveProgram::Node { y, branches })
    }

    pub fn depth(&self) -> usize {
        match self {
            AdaptiveProgram::Identity => 0,
            AdaptiveProgram::Node { branches, .. } => {
                1 + branches.values().map(Self::depth).max().unwrap_or(0)
            }
        }
    }

    /// The program as an operator polynomial over the reduced alphabet.
    pub fn polynomial(&self, s: &BellScenario) -> Polynomial {
        match self {
            AdaptiveProgram::Identity => Polynomial::one(),
            AdaptiveProgram::Node { y, branches } => {
                branches
                    .iter()
                    .fold(Polynomial::zero(), |acc, (&b, child)| {
                        acc.add(&child.polynomial(s).mul(&Polynomial::projector(s, *y, b)))
                    })
            }
        }
    }

    /// `π†π`, the operator whose expectation is the acceptance probability.
    pub fn acceptance(&self, s: &BellScenario) -> Polynomial {
        let p = self.polynomial(s);
        p.adjoint().mul(&p)
    }
}

/// The set of programs of depth at most `level`, deduplicated by operator polynomial.
#[derive(Clone, Debug)]
pub struct ProgramSet {
    pub level: usize,
    pub programs: Vec<AdaptiveProgram>,
    pub polynomials: Vec<Polynomial>,
    /// Number of programs generated at the top level before deduplication.
    pub raw_count: usize,
}

impl ProgramSet {
    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }
}

pub fn enumerate_programs(s: &BellScenario, level: usize) -> Result<ProgramSet> {
    enumerate_programs_capped(s, level, DEFAULT_PROGRAM_CAP)
}

pub fn enumerate_programs_capped(s: &BellScenario, level: usize, cap: usize) -> Result<ProgramSet> {
    let mut current = ProgramSet {
        level: 0,
        programs: vec![AdaptiveProgram::Identity],
        polynomials: vec![Polynomial::one()],
        raw_count: 1,
    };
    for l in 1..=level {
        let n = current.len();
        let raw = raw_count(s, n)
            .filter(|&r| r <= cap)
            .ok_or(Error::TooManyPrograms(cap))?;
        let mut seen: HashSet<Polynomial> = HashSet::with_capacity(raw);
        let mut programs = Vec::new();
        let mut polynomials = Vec::new();
        for y in 0..s.ny {
            for mask in 1usize..(1 << s.nb) {
                let kept: Vec<usize> = (0..s.nb).filter(|b| mask >> b & 1 == 1).collect();
                let mut choice = vec![0usize; kept.len()];
                loop {
                    let branches: BTreeMap<usize, AdaptiveProgram> = kept
                        .iter()
                        .zip(&choice)
                        .map(|(&b, &c)| (b, current.programs[c].clone()))
                        .collect();
                    let poly =
                        kept.iter()
                            .zip(&choice)
                            .fold(Polynomial::zero(), |acc, (&b, &c)| {
                                acc.add(
                                    &current.polynomials[c].mul(&Polynomial::projector(s, y, b)),
                                )
                            });
                    if !poly.is_zero() && seen.insert(poly.clone()) {
                        programs.push(AdaptiveProgram::Node { y, branches });
                        polynomials.push(poly);
                    }
                    if !advance(&mut choice, n) {
                        break;
                    }
                }
            }
        }
        current = ProgramSet {
            level: l,
            programs,
            polynomials,
            raw_count: raw,
        };
    }
    Ok(current)
}

/// `|Y| · Σ_{S ≠ ∅} n^{|S|}`, or `None` on overflow.
fn raw_count(s: &BellScenario, n: usize) -> Option<usize> {
    let mut per_y = 0usize;
    for mask in 1usize..(1 << s.nb) {
        per_y = per_y.checked_add(n.checked_pow(mask.count_ones())?)?;
    }
    per_y.checked_mul(s.ny)
}

/// Odometer over `choice ∈ [0, n)^k`.
fn advance(choice: &mut [usize], n: usize) -> bool {
    for c in choice.iter_mut().rev() {
        *c += 1;
        if *c < n {
            return true;
        }
        *c = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const S: BellScenario = BellScenario::CHSH;

    #[test]
    fn level_zero_and_one() {
        let p0 = enumerate_programs(&S, 0).unwrap();
        assert_eq!(p0.programs, vec![AdaptiveProgram::Identity]);
        let p1 = enumerate_programs(&S, 1).unwrap();
        assert_eq!(p1.raw_count, 6);
        assert_eq!(p1.len(), 5);
        assert!(p1.polynomials.contains(&Polynomial::one()));
    }

    #[test]
    fn levels_are_nested() {
        let p1 = enumerate_programs(&S, 1).unwrap();
        let p2 = enumerate_programs(&S, 2).unwrap();
        assert_eq!(p2.raw_count, 70);
        for poly in &p1.polynomials {
            assert!(p2.polynomials.contains(poly));
        }
        assert!(p2.programs.iter().all(|p| p.depth() <= 2));
        for (prog, poly) in p2.programs.iter().zip(&p2.polynomials) {
            assert_eq!(&prog.polynomial(&S), poly);
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            enumerate_programs_capped(&S, 2, 50),
            Err(Error::TooManyPrograms(50))
        ));
    }

    /// Random real projectors in dimension 6, one rank-3 split per input.
    fn random_measurements(rng: &mut ChaCha8Rng) -> Vec<[DMatrix<f64>; 2]> {
        (0..2)
            .map(|_| {
                let g = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
                let q = g.qr().q();
                let cols = q.columns(0, 3);
                let p = cols * cols.transpose();
                let id = DMatrix::identity(6, 6);
                [p.clone(), id - p]
            })
            .collect()
    }

    /// Expands every (y, S, children) triple as matrices and dedupes numerically.
    fn brute_force(level: usize, meas: &[[DMatrix<f64>; 2]]) -> (usize, Vec<DMatrix<f64>>) {
        let mut set = vec![DMatrix::identity(6, 6)];
        let mut raw = 1;
        for _ in 0..level {
            let mut next: Vec<DMatrix<f64>> = Vec::new();
            raw = 0;
            for m in meas {
                for subset in [vec![0], vec![1], vec![0, 1]] {
                    let combos: Vec<Vec<usize>> = if subset.len() == 1 {
                        (0..set.len()).map(|i| vec![i]).collect()
                    } else {
                        (0..set.len())
                            .flat_map(|i| (0..set.len()).map(move |j| vec![i, j]))
                            .collect()
                    };
                    for combo in combos {
                        raw += 1;
                        let op = subset
                            .iter()
                            .zip(&combo)
                            .fold(DMatrix::zeros(6, 6), |acc, (&b, &c)| acc + &set[c] * &m[b]);
                        // Zero operators (e.g. a child that postselects an orthogonal outcome) accept nothing.
                        if op.norm() > 1e-9 && !next.iter().any(|o| (o - &op).norm() < 1e-9) {
                            next.push(op);
                        }
                    }
                }
            }
            set = next;
        }
        (raw, set)
    }

    #[test]
    fn level_two_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let meas = random_measurements(&mut rng);
        let (raw1, set1) = brute_force(1, &meas);
        assert_eq!((raw1, set1.len()), (6, 5));
        let (raw2, set2) = brute_force(2, &meas);
        assert_eq!(raw2, 70);
        let p2 = enumerate_programs(&S, 2).unwrap();
        assert_eq!(p2.len(), set2.len());
    }
}
