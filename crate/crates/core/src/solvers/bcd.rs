use nalgebra::DVector;
use rand::Rng;

use super::{ensure_finite, BcdPolicy, SolverConfig};
use crate::error::{Error, Result};
use crate::nonlinearity::shrink;
use crate::problem::{Dictionary, Signal};
use crate::rng::{self, StreamRng};

/// Bregman coordinate descent state. `v − u` is the subgradient of `λ‖u‖₁`,
/// so `|v_i − u_i| ≤ λ` with equality (sign of `u_i`) on the support.
#[derive(Debug, Clone, PartialEq)]
pub struct BcdState {
    pub v: DVector<f64>,
    pub u: DVector<f64>,
    pub t: u64,
    /// `AᵀA u`, kept in sync with `u`.
    gram_u: DVector<f64>,
    last: Option<usize>,
    policy: BcdPolicy,
    rng: Option<StreamRng>,
}

impl BcdState {
    pub fn new(n: usize, policy: BcdPolicy) -> Self {
        let rng = match policy {
            BcdPolicy::Random { seed } => Some(rng::stream(seed, 1)),
            _ => None,
        };
        BcdState {
            v: DVector::zeros(n),
            u: DVector::zeros(n),
            t: 0,
            gram_u: DVector::zeros(n),
            last: None,
            policy,
            rng,
        }
    }

    pub fn last_index(&self) -> Option<usize> {
        self.last
    }

    /// `Aᵢᵀ(Au − f)` for every `i`.
    pub fn gradient(&self, drive: &DVector<f64>) -> DVector<f64> {
        &self.gram_u - drive
    }

    /// Next coordinate according to the state's policy.
    pub fn select(&mut self, drive: &DVector<f64>) -> usize {
        let n = self.u.len();
        match self.policy {
            BcdPolicy::Cyclic => self.last.map_or(0, |i| (i + 1) % n),
            BcdPolicy::Random { .. } => self.rng.as_mut().expect("random policy has a stream").random_range(0..n),
            BcdPolicy::Greedy => {
                let mut best = 0;
                let mut best_mag = f64::NEG_INFINITY;
                for i in 0..n {
                    let mag = (self.gram_u[i] - drive[i]).abs();
                    if mag > best_mag {
                        best = i;
                        best_mag = mag;
                    }
                }
                best
            }
        }
    }

    /// Updates coordinate `i`: `v_i ← v_i − Aᵢᵀ(Au − f)`, `u_i ← shrink(v_i, λ)`.
    /// Returns 1 if the node broadcasts a nonzero value, else 0.
    pub fn step(&mut self, dict: &Dictionary, drive: &DVector<f64>, i: usize, cfg: &SolverConfig) -> Result<usize> {
        let n = self.u.len();
        if i >= n {
            return Err(Error::InvalidConfig(format!("coordinate {i} out of range for n = {n}")));
        }
        let grad = self.gram_u[i] - drive[i];
        self.v[i] -= grad;
        let new_u = shrink(self.v[i], cfg.lambda);
        let delta = new_u - self.u[i];
        self.u[i] = new_u;
        self.t += 1;
        self.last = Some(i);
        if delta != 0.0 {
            self.gram_u.axpy(delta, &dict.gram().column(i), 1.0);
        }
        // resynchronize the cached product once per sweep
        if self.t.is_multiple_of(n as u64) {
            self.gram_u = dict.gram() * &self.u;
        }
        if !self.v[i].is_finite() {
            return Err(Error::NonFinite(self.t));
        }
        ensure_finite(&self.gram_u, self.t)?;
        Ok(usize::from(new_u != 0.0))
    }
}

/// Coordinate the policy would update next.
pub fn select_index(state: &mut BcdState, dict: &Dictionary, f: &Signal) -> Result<usize> {
    let drive = dict.drive(f)?;
    Ok(state.select(&drive))
}

/// One coordinate update on signal `f`, returning the successor state.
pub fn bcd_step(state: &BcdState, dict: &Dictionary, f: &Signal, i: usize, cfg: &SolverConfig) -> Result<BcdState> {
    let drive = dict.drive(f)?;
    let mut next = state.clone();
    next.step(dict, &drive, i, cfg)?;
    Ok(next)
}
