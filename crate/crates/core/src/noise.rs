//! Signal corruption models and the static-noise error bound.
//!
//! White-noise draws are keyed on `(seed, k)`: iteration `k` reads `m`
//! standard normals from ChaCha8 stream `k`, one per signal component in
//! order. Replaying any iteration therefore reproduces its noise exactly,
//! independent of how often a run is sampled.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Signal;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// `f_i = f⁰_i (1 + level·ε_i)`.
    MultiplicativeWhite,
    /// `f_i = f⁰_i + level·ε_i`.
    AdditiveWhite,
    /// `f = f⁰ + ε` with a fixed `ε`.
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub level: f64,
    pub seed: u64,
    /// Present iff `kind == Static`.
    pub static_eps: Option<DVector<f64>>,
}

impl NoiseModel {
    pub fn multiplicative_white(level: f64, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::MultiplicativeWhite,
            level,
            seed,
            static_eps: None,
        }
    }

    pub fn additive_white(level: f64, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::AdditiveWhite,
            level,
            seed,
            static_eps: None,
        }
    }

    pub fn fixed(eps: DVector<f64>) -> Self {
        NoiseModel {
            kind: NoiseKind::Static,
            level: eps.norm(),
            seed: 0,
            static_eps: Some(eps),
        }
    }

    /// Static noise `ε = level · N(0, I)` drawn from stream 0 of `seed`.
    pub fn static_gaussian(m: usize, level: f64, seed: u64) -> Self {
        let mut rng = rng::stream(seed, 0);
        let eps = DVector::from_fn(m, |_, _| level * rng.sample::<f64, _>(StandardNormal));
        NoiseModel {
            kind: NoiseKind::Static,
            level,
            seed,
            static_eps: Some(eps),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.level >= 0.0) || !self.level.is_finite() {
            return Err(Error::InvalidConfig(format!("noise level must be >= 0, got {}", self.level)));
        }
        match (self.kind, &self.static_eps) {
            (NoiseKind::Static, Some(eps)) if eps.len() != m => {
                Err(Error::DimensionMismatch { expected: m, got: eps.len() })
            }
            (NoiseKind::Static, None) => Err(Error::InvalidConfig("static noise needs static_eps".into())),
            (NoiseKind::MultiplicativeWhite | NoiseKind::AdditiveWhite, Some(_)) => {
                Err(Error::InvalidConfig("static_eps is only valid for static noise".into()))
            }
            _ => Ok(()),
        }
    }

    /// True when every `corrupt(·, k)` returns the same signal.
    pub fn is_time_invariant(&self) -> bool {
        self.kind == NoiseKind::Static || self.level == 0.0
    }
}

fn white_draws(seed: u64, k: u64, m: usize) -> impl Iterator<Item = f64> {
    let mut rng = rng::stream(seed, k);
    (0..m).map(move |_| rng.sample::<f64, _>(StandardNormal))
}

/// Signal seen at iteration `k ≥ 1`.
pub fn corrupt(f0: &Signal, model: &NoiseModel, k: u64) -> Signal {
    debug_assert!(k >= 1);
    let values = match model.kind {
        NoiseKind::MultiplicativeWhite if model.level != 0.0 => {
            let eps = white_draws(model.seed, k, f0.len());
            DVector::from_iterator(f0.len(), f0.iter().zip(eps).map(|(x, e)| x * (1.0 + model.level * e)))
        }
        NoiseKind::AdditiveWhite if model.level != 0.0 => {
            let eps = white_draws(model.seed, k, f0.len());
            DVector::from_iterator(f0.len(), f0.iter().zip(eps).map(|(x, e)| x + model.level * e))
        }
        NoiseKind::Static => match &model.static_eps {
            Some(eps) => f0.values() + eps,
            None => f0.values().clone(),
        },
        _ => f0.values().clone(),
    };
    Signal::new(values).expect("finite noise")
}

/// Upper bound `c²/t² − 2c‖ε‖/t + 2‖ε‖²` on the clean-signal error
/// `‖f⁰ − λA s̄(t)‖₂²` under static noise, where `c` bounds
/// `‖∫(f − λAs)dt‖₂`.
pub fn static_noise_bound(c: f64, eps_norm: f64, t: f64) -> f64 {
    debug_assert!(t > 0.0);
    c * c / (t * t) - 2.0 * c * eps_norm / t + 2.0 * eps_norm * eps_norm
}

/// `‖Σ_{k=1}^{up_to} (corrupt(f⁰, k) − f⁰)‖₂`.
pub fn cumulative_noise_norm(model: &NoiseModel, f0: &Signal, up_to: u64) -> f64 {
    let mut acc = DVector::zeros(f0.len());
    if model.kind == NoiseKind::Static {
        if let Some(eps) = &model.static_eps {
            acc = eps * up_to as f64;
        }
        return acc.norm();
    }
    for k in 1..=up_to {
        acc += corrupt(f0, model, k).values() - f0.values();
    }
    acc.norm()
}

/// Estimate of the constant `c` in [`static_noise_bound`]: the largest
/// observed `t · ‖f − λA s̄(t)‖₂`, where `f` is the (noisy) signal actually
/// integrated. Takes `(t, signal_residual)` samples.
pub fn estimate_integral_bound(samples: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    samples.into_iter().map(|(t, r)| t * r).fold(0.0, f64::max)
}
