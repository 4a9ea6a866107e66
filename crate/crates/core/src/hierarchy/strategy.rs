//! Explicit finite-dimensional strategies, for checking the relaxation from inside.

use nalgebra::DMatrix;

use super::programs::{enumerate_programs, AdaptiveProgram};
use crate::error::{Error, Result};
use crate::quantum::C;
use crate::scenario::{BellScenario, ConditionalBehavior};

/// Subnormalized states `ψ(a|x)` with `Σ_a tr ψ(a|x) = 1` and projective measurements `M(y, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorStrategy {
    scenario: BellScenario,
    dim: usize,
    /// Indexed `x · na + a`.
    states: Vec<DMatrix<C>>,
    /// Indexed `y · nb + b`.
    measurements: Vec<DMatrix<C>>,
}

/// Largest acceptance-probability gap found over a program set.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalingReport {
    pub gap: f64,
    pub program: AdaptiveProgram,
    pub inputs: (usize, usize),
}

const TOL: f64 = 1e-9;

impl OperatorStrategy {
    pub fn new(
        scenario: BellScenario,
        states: Vec<DMatrix<C>>,
        measurements: Vec<DMatrix<C>>,
    ) -> Result<Self> {
        let dim = states.first().map(|m| m.nrows()).unwrap_or(0);
        let square = |m: &DMatrix<C>| m.nrows() == dim && m.ncols() == dim;
        if states.len() != scenario.nx * scenario.na
            || measurements.len() != scenario.ny * scenario.nb
            || dim == 0
            || !states.iter().chain(&measurements).all(square)
        {
            return Err(Error::InvalidParameter(
                "operator strategy shapes do not match the scenario".into(),
            ));
        }
        let id = DMatrix::<C>::identity(dim, dim);
        for y in 0..scenario.ny {
            let sum = (0..scenario.nb).fold(DMatrix::zeros(dim, dim), |acc, b| {
                acc + &measurements[y * scenario.nb + b]
            });
            if (sum - &id).norm() > TOL {
                return Err(Error::InvalidParameter(format!(
                    "measurement {y} is incomplete"
                )));
            }
        }
        for m in &measurements {
            if (m * m - m).norm() > TOL || (m.adjoint() - m).norm() > TOL {
                return Err(Error::InvalidParameter(
                    "measurement operators must be orthogonal projectors".into(),
                ));
            }
        }
        for x in 0..scenario.nx {
            let tr: f64 = (0..scenario.na)
                .map(|a| states[x * scenario.na + a].trace().re)
                .sum();
            if (tr - 1.0).abs() > TOL {
                return Err(Error::InvalidParameter(format!(
                    "states for input {x} have total trace {tr}"
                )));
            }
        }
        Ok(OperatorStrategy {
            scenario,
            dim,
            states,
            measurements,
        })
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, x: usize, a: usize) -> &DMatrix<C> {
        &self.states[x * self.scenario.na + a]
    }

    pub fn measurement(&self, y: usize, b: usize) -> &DMatrix<C> {
        &self.measurements[y * self.scenario.nb + b]
    }

    /// `ψ(x) = Σ_a ψ(a|x)`.
    pub fn marginal_state(&self, x: usize) -> DMatrix<C> {
        (0..self.scenario.na).fold(DMatrix::zeros(self.dim, self.dim), |acc, a| {
            acc + self.state(x, a)
        })
    }

    /// `P(a, b | x, y) = tr(M(y,b) ψ(a|x))`.
    pub fn conditional(&self) -> ConditionalBehavior {
        let s = self.scenario;
        let p: Vec<f64> = (0..s.cells())
            .map(|i| {
                let (a, b, x, y) = s.cell(i);
                (self.measurement(y, b) * self.state(x, a))
                    .trace()
                    .re
                    .max(0.0)
            })
            .collect();
        ConditionalBehavior::new(s, p).expect("valid strategy gives a conditional behavior")
    }

    /// Kraus operator of a program, built from the tree itself.
    pub fn program_operator(&self, p: &AdaptiveProgram) -> DMatrix<C> {
        match p {
            AdaptiveProgram::Identity => DMatrix::identity(self.dim, self.dim),
            AdaptiveProgram::Node { y, branches } => branches
                .iter()
                .fold(DMatrix::zeros(self.dim, self.dim), |acc, (&b, child)| {
                    acc + self.program_operator(child) * self.measurement(*y, b)
                }),
        }
    }

    /// `tr(π ψ(x) π†)`.
    pub fn acceptance(&self, p: &AdaptiveProgram, x: usize) -> f64 {
        let k = self.program_operator(p);
        (&k * self.marginal_state(x) * k.adjoint()).trace().re
    }

    /// Worst acceptance gap between virtual inputs over all programs of depth ≤ `level`.
    pub fn signaling(&self, level: usize) -> Result<SignalingReport> {
        let set = enumerate_programs(&self.scenario, level)?;
        let nx = self.scenario.nx;
        let mut best = SignalingReport {
            gap: 0.0,
            program: AdaptiveProgram::Identity,
            inputs: (0, 0),
        };
        for p in &set.programs {
            let k = self.program_operator(p);
            let acc: Vec<f64> = (0..nx)
                .map(|x| (&k * self.marginal_state(x) * k.adjoint()).trace().re)
                .collect();
            for x in 0..nx {
                for xp in x + 1..nx {
                    let g = (acc[x] - acc[xp]).abs();
                    if g > best.gap {
                        best = SignalingReport {
                            gap: g,
                            program: p.clone(),
                            inputs: (x, xp),
                        };
                    }
                }
            }
        }
        Ok(best)
    }
}

/// The four-dimensional strategy that reads the virtual input from a sequential measurement.
///
/// `ψ(a|x) = ½|a,x⟩⟨a,x|` and `M(y,b)` projects onto `{|a,x⟩ : a ⊕ b = x·y}`. It wins CHSH
/// with certainty and shows no signaling to single measurements.
pub fn sequential_leak_strategy() -> OperatorStrategy {
    let s = BellScenario::CHSH;
    let basis = |a: usize, x: usize| 2 * a + x;
    let diag = |f: &dyn Fn(usize, usize) -> bool| {
        let mut m = DMatrix::<C>::zeros(4, 4);
        for a in 0..2 {
            for x in 0..2 {
                if f(a, x) {
                    m[(basis(a, x), basis(a, x))] = C::new(1.0, 0.0);
                }
            }
        }
        m
    };
    let mut states = Vec::new();
    for x in 0..2 {
        for a in 0..2 {
            states.push(diag(&|aa, xx| aa == a && xx == x) * C::new(0.5, 0.0));
        }
    }
    let mut measurements = Vec::new();
    for y in 0..2 {
        for b in 0..2 {
            measurements.push(diag(&|a, x| a ^ b == x & y));
        }
    }
    OperatorStrategy::new(s, states, measurements).expect("well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{chsh_winning_probability, Mode};

    #[test]
    fn sequential_leak_needs_level_two() {
        let st = sequential_leak_strategy();
        let omega = chsh_winning_probability(&st.conditional().with_uniform_inputs(), Mode::Exact)
            .unwrap()
            .omega;
        assert!((omega - 1.0).abs() < 1e-12);
        assert!(st.signaling(1).unwrap().gap < 1e-12);
        let r = st.signaling(2).unwrap();
        assert!(r.gap >= 0.1);
        // Measuring y = 0 then y = 1 and accepting when the outcomes agree reveals x exactly.
        assert!((r.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_incomplete_measurements() {
        let st = sequential_leak_strategy();
        let mut meas: Vec<DMatrix<C>> = (0..2)
            .flat_map(|y| (0..2).map(move |b| (y, b)))
            .map(|(y, b)| st.measurement(y, b).clone())
            .collect();
        meas[1] = DMatrix::zeros(4, 4);
        let states = (0..2)
            .flat_map(|x| (0..2).map(move |a| (x, a)))
            .map(|(x, a)| st.state(x, a).clone())
            .collect();
        assert!(OperatorStrategy::new(BellScenario::CHSH, states, meas).is_err());
    }
}
