//! Qubit states and real-plane projective measurements.
//!
//! A measurement at Bloch angle `θ` (in the x–z plane) has outcome-0 vector
//! `cos(θ/2)|0⟩ + sin(θ/2)|1⟩` and outcome-1 vector `−sin(θ/2)|0⟩ + cos(θ/2)|1⟩`.

use std::f64::consts::PI;

use nalgebra::Complex;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::scenario::{BellScenario, ConditionalBehavior, JointBehavior};

pub type C = Complex<f64>;

/// A pure single-qubit state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    pub amp: [C; 2],
}

impl QubitState {
    pub fn new(a0: C, a1: C) -> Option<Self> {
        let n = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
        ((n - 1.0).abs() < 1e-12).then_some(QubitState { amp: [a0, a1] })
    }

    pub fn basis(bit: u8) -> Self {
        let (z, o) = (C::new(0.0, 0.0), C::new(1.0, 0.0));
        if bit == 0 {
            QubitState { amp: [o, z] }
        } else {
            QubitState { amp: [z, o] }
        }
    }

    /// `(|0⟩ + (−1)^bit |1⟩)/√2`.
    pub fn hadamard(bit: u8) -> Self {
        let r = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        QubitState {
            amp: [r, if bit == 0 { r } else { -r }],
        }
    }

    /// Outcome-`b` vector of the measurement at Bloch angle `theta`.
    pub fn measurement_vector(theta: f64, b: u8) -> Self {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let v = if b == 0 { [c, s] } else { [-s, c] };
        QubitState {
            amp: [C::new(v[0], 0.0), C::new(v[1], 0.0)],
        }
    }

    pub fn overlap_sq(&self, other: &QubitState) -> f64 {
        (self.amp[0].conj() * other.amp[0] + self.amp[1].conj() * other.amp[1]).norm_sqr()
    }

    /// Probability of outcome `b` when measured at Bloch angle `theta`.
    pub fn outcome_prob(&self, theta: f64, b: u8) -> f64 {
        Self::measurement_vector(theta, b).overlap_sq(self)
    }

    pub fn bloch(&self) -> Bloch {
        let [a, b] = self.amp;
        let c = a.conj() * b;
        Bloch([2.0 * c.re, 2.0 * c.im, a.norm_sqr() - b.norm_sqr()])
    }
}

/// Bloch vector of a (possibly mixed) qubit density matrix `(I + r·σ)/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bloch(pub [f64; 3]);

impl Bloch {
    pub fn density(&self) -> DMatrix<C> {
        let [x, y, z] = self.0;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                C::new((1.0 + z) / 2.0, 0.0),
                C::new(x / 2.0, -y / 2.0),
                C::new(x / 2.0, y / 2.0),
                C::new((1.0 - z) / 2.0, 0.0),
            ],
        )
    }
}

/// Bloch angles in the x–z plane for Alice (`x = 0, 1`) and Bob (`y = 0, 1`)
/// attaining `cos²(π/8)` on `|Φ+⟩`.
pub const CHSH_ALICE: [f64; 2] = [0.0, PI / 2.0];
pub const CHSH_BOB: [f64; 2] = [PI / 4.0, -PI / 4.0];

/// Two-qubit state `cos θ |00⟩ + sin θ |11⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtState {
    pub theta: f64,
}

impl SchmidtState {
    pub const MAX_ENTANGLED: SchmidtState = SchmidtState { theta: PI / 4.0 };

    /// `P(a, b)` for Alice measuring at `alpha` and Bob at `beta`.
    pub fn joint_prob(&self, alpha: f64, beta: f64, a: u8, b: u8) -> f64 {
        let u = QubitState::measurement_vector(alpha, a);
        let v = QubitState::measurement_vector(beta, b);
        let amp = self.theta.cos() * u.amp[0].re * v.amp[0].re
            + self.theta.sin() * u.amp[1].re * v.amp[1].re;
        amp * amp
    }

    /// Bob's reduced state after Alice measured `alpha` and got `a`, unnormalized
    /// (trace = `P(a)`), as a 2×2 density matrix.
    pub fn bob_conditional(&self, alpha: f64, a: u8) -> DMatrix<C> {
        let u = QubitState::measurement_vector(alpha, a);
        let v = DVector::from_vec(vec![
            C::new(self.theta.cos() * u.amp[0].re, 0.0),
            C::new(self.theta.sin() * u.amp[1].re, 0.0),
        ]);
        &v * v.adjoint()
    }
}

/// Conditional behavior of a two-qubit strategy with per-input angles.
pub fn two_qubit_conditional(
    state: SchmidtState,
    alice: &[f64],
    bob: &[f64],
) -> ConditionalBehavior {
    let s = BellScenario::new(alice.len(), bob.len(), 2, 2).expect("valid scenario");
    let mut p = vec![0.0; s.cells()];
    for (i, v) in p.iter_mut().enumerate() {
        let (a, b, x, y) = s.cell(i);
        *v = state.joint_prob(alice[x], bob[y], a as u8, b as u8);
    }
    ConditionalBehavior::new(s, p).expect("quantum probabilities are normalized")
}

/// Uniform-input behavior of the standard optimal CHSH strategy.
pub fn ideal_chsh_behavior() -> JointBehavior {
    two_qubit_conditional(SchmidtState::MAX_ENTANGLED, &CHSH_ALICE, &CHSH_BOB).with_uniform_inputs()
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm(m: &DMatrix<C>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.abs())
        .sum()
}
