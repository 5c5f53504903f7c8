//! Desk-scale statevector simulator providing the QCNN-style black box
//! g(x) = ⟨Z₀⟩, with an optional binomial shot-noise wrapper.
//!
//! Reference circuit (layout version 1, q qubits, 3q+2 parameters; 20 at
//! q = 6): angle embedding R_Y(xᵢ) on qubit i for i < D, then
//!   block 1: per qubit R_Z(θ[q+i]) followed by R_Y(θ[i]), CNOT ring,
//!   block 2: per qubit R_Y(θ[2q+i]), CNOT ring,
//!   pooling: CNOT(i → 0) for i = 1..q−1, then R_Z(θ[3q]) and R_Y(θ[3q+1])
//!   on qubit 0,
//! measured as ⟨Z₀⟩. Every gate is an entire function of its angle, so g is
//! real-analytic in x and |g| ≤ 1.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::derivatives::BlackBox;
use crate::error::{Error, Result};

pub const LAYOUT_VERSION: u32 = 1;
const MAX_QUBITS: usize = 12;

/// Frozen-parameter QCNN-style model. θ is drawn once from U[−π, π] and
/// never trained here; the surrogate pipeline treats `evaluate` as an
/// opaque oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QcnnModel {
    pub qubits: usize,
    pub theta: Vec<f64>,
    pub seed: u64,
    pub layout_version: u32,
}

impl QcnnModel {
    pub fn new(qubits: usize, seed: u64) -> Result<Self> {
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(Error::InvalidParameter(format!(
                "qubit count {qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n_params = 3 * qubits + 2;
        let theta = (0..n_params)
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        Ok(QcnnModel {
            qubits,
            theta,
            seed,
            layout_version: LAYOUT_VERSION,
        })
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    /// ⟨Z₀⟩ after embedding the first D = x.len() coordinates. Always lies
    /// in [−1, 1].
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let q = self.qubits;
        if x.len() > q {
            return Err(Error::InvalidParameter(format!(
                "input dimension {} exceeds qubit count {q}",
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite circuit input".into()));
        }
        let mut state = StateVector::zero_state(q);

        for (i, &xi) in x.iter().enumerate() {
            state.apply_ry(i, xi);
        }
        // block 1: R_Y(theta[i]) · R_Z(theta[q+i]) per qubit, then CNOT ring
        for i in 0..q {
            state.apply_rz(i, self.theta[q + i]);
            state.apply_ry(i, self.theta[i]);
        }
        state.apply_cnot_ring();
        // block 2: R_Y only, then CNOT ring
        for i in 0..q {
            state.apply_ry(i, self.theta[2 * q + i]);
        }
        state.apply_cnot_ring();
        // pooling onto qubit 0
        for i in 1..q {
            state.apply_cnot(i, 0);
        }
        state.apply_rz(0, self.theta[3 * q]);
        state.apply_ry(0, self.theta[3 * q + 1]);

        Ok(state.z_expectation(0))
    }
}

/// Finite-shot estimate of an expectation value in [−1, 1]: draw
/// k ~ Binomial(shots, (1+v)/2) and return 2k/shots − 1. The estimate is a
/// convex combination of ±1 outcomes, hence always in [−1, 1].
pub fn shot_estimate(exp_val: f64, shots: u64, seed: u64) -> f64 {
    assert!(shots >= 1, "shots must be >= 1");
    let p = ((1.0 + exp_val.clamp(-1.0, 1.0)) / 2.0).clamp(0.0, 1.0);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let k = Binomial::new(shots, p)
        .expect("valid binomial parameters")
        .sample(&mut rng);
    2.0 * k as f64 / shots as f64 - 1.0
}

/// 2^q complex amplitudes; qubit i corresponds to bit i of the index.
#[derive(Debug, Clone)]
pub struct StateVector {
    amps: Vec<Complex64>,
    qubits: usize,
}

impl StateVector {
    pub fn zero_state(qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { amps, qubits }
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply_ry(&mut self, qubit: usize, angle: f64) {
        debug_assert!(qubit < self.qubits);
        let c = (angle / 2.0).cos();
        let s = (angle / 2.0).sin();
        let mask = 1usize << qubit;
        for b in 0..self.amps.len() {
            if b & mask == 0 {
                let b1 = b | mask;
                let a0 = self.amps[b];
                let a1 = self.amps[b1];
                self.amps[b] = c * a0 - s * a1;
                self.amps[b1] = s * a0 + c * a1;
            }
        }
    }

    pub fn apply_rz(&mut self, qubit: usize, angle: f64) {
        debug_assert!(qubit < self.qubits);
        let phase0 = Complex64::from_polar(1.0, -angle / 2.0);
        let phase1 = Complex64::from_polar(1.0, angle / 2.0);
        let mask = 1usize << qubit;
        for (b, amp) in self.amps.iter_mut().enumerate() {
            *amp *= if b & mask == 0 { phase0 } else { phase1 };
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        debug_assert!(control < self.qubits && target < self.qubits && control != target);
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for b in 0..self.amps.len() {
            if b & cmask != 0 && b & tmask == 0 {
                self.amps.swap(b, b | tmask);
            }
        }
    }

    /// CNOT ring 0→1→···→q−1→0; no-op on a single qubit.
    pub fn apply_cnot_ring(&mut self) {
        let q = self.qubits;
        if q < 2 {
            return;
        }
        for i in 0..q {
            self.apply_cnot(i, (i + 1) % q);
        }
    }

    pub fn z_expectation(&self, qubit: usize) -> f64 {
        let mask = 1usize << qubit;
        self.amps
            .iter()
            .enumerate()
            .map(|(b, a)| {
                let sign = if b & mask == 0 { 1.0 } else { -1.0 };
                sign * a.norm_sqr()
            })
            .sum()
    }
}

/// Black-box adapter for a fixed input dimension D ≤ q. With shot noise the
/// labels satisfy |Y| ≤ 1 deterministically.
pub struct QcnnOracle {
    model: QcnnModel,
    dim: usize,
    shots: Option<u64>,
    shot_seed: u64,
    queries: std::sync::atomic::AtomicU64,
}

impl QcnnOracle {
    pub fn new(model: QcnnModel, dim: usize) -> Result<Self> {
        if dim == 0 || dim > model.qubits {
            return Err(Error::InvalidParameter(format!(
                "oracle dimension {dim} outside 1..={}",
                model.qubits
            )));
        }
        Ok(QcnnOracle {
            model,
            dim,
            shots: None,
            shot_seed: 0,
            queries: std::sync::atomic::AtomicU64::new(0),
        })
    }

    pub fn with_shots(mut self, shots: u64, seed: u64) -> Self {
        self.shots = Some(shots);
        self.shot_seed = seed;
        self
    }

    pub fn model(&self) -> &QcnnModel {
        &self.model
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(std::sync::atomic::Ordering::Relaxed)
    }
}

impl BlackBox for QcnnOracle {
    fn eval(&self, x: &[f64]) -> f64 {
        let q = self.queries.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let v = self.model.evaluate(x).expect("dimension validated");
        match self.shots {
            None => v,
            Some(shots) => shot_estimate(v, shots, self.shot_seed.wrapping_add(q)),
        }
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn bound(&self) -> Option<f64> {
        Some(1.0)
    }
}
