use nalgebra::DVector;

use super::{ensure_finite, SolverConfig};
use crate::error::Result;
use crate::nonlinearity::shrink;
use crate::problem::{Dictionary, Signal};

/// Linearized Bregman iteration state. After every step
/// `u = δ · shrink(v, λ)` componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct LbiState {
    pub v: DVector<f64>,
    pub u: DVector<f64>,
    pub t: u64,
}

impl LbiState {
    pub fn new(n: usize) -> Self {
        LbiState {
            v: DVector::zeros(n),
            u: DVector::zeros(n),
            t: 0,
        }
    }

    /// `v ← v − (AᵀA u − Aᵀf)`, `u ← δ·shrink(v, λ)`. Returns the number of
    /// nonzero entries of the new `u`, i.e. the analog values broadcast.
    pub fn step(&mut self, dict: &Dictionary, drive: &DVector<f64>, cfg: &SolverConfig) -> Result<usize> {
        let gram = dict.gram();
        self.v += drive;
        for (j, &uj) in self.u.iter().enumerate() {
            if uj != 0.0 {
                self.v.axpy(-uj, &gram.column(j), 1.0);
            }
        }
        self.t += 1;
        ensure_finite(&self.v, self.t)?;
        let (lambda, delta) = (cfg.lambda, cfg.delta);
        self.u
            .iter_mut()
            .zip(self.v.iter())
            .for_each(|(u, &v)| *u = delta * shrink(v, lambda));
        Ok(self.u.iter().filter(|x| **x != 0.0).count())
    }
}

/// One LBI step on signal `f`, returning the successor state.
pub fn lbi_step(state: &LbiState, dict: &Dictionary, f: &Signal, cfg: &SolverConfig) -> Result<LbiState> {
    let drive = dict.drive(f)?;
    let mut next = state.clone();
    next.step(dict, &drive, cfg)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn scalar() -> (Dictionary, Signal, SolverConfig) {
        let d = Dictionary::new(DMatrix::identity(1, 1)).unwrap();
        let f = Signal::from_slice(&[1.0]).unwrap();
        let cfg = SolverConfig {
            lambda: 0.5,
            delta: 1.0,
            ..SolverConfig::default()
        };
        (d, f, cfg)
    }

    #[test]
    fn hand_computed_scalar_steps() {
        let (d, f, cfg) = scalar();
        let s1 = lbi_step(&LbiState::new(1), &d, &f, &cfg).unwrap();
        assert_eq!((s1.v[0], s1.u[0]), (1.0, 0.5));
        let s2 = lbi_step(&s1, &d, &f, &cfg).unwrap();
        assert_eq!((s2.v[0], s2.u[0]), (1.5, 1.0));
        let s3 = lbi_step(&s2, &d, &f, &cfg).unwrap();
        assert_eq!((s3.v[0], s3.u[0], s3.t), (1.5, 1.0, 3));
    }

    #[test]
    fn zero_signal_is_a_fixed_point() {
        let (d, _, cfg) = scalar();
        let s = lbi_step(&LbiState::new(1), &d, &Signal::zeros(1), &cfg).unwrap();
        assert_eq!((s.v[0], s.u[0]), (0.0, 0.0));
    }

    #[test]
    fn divergent_step_is_reported() {
        let (d, f, _) = scalar();
        let cfg = SolverConfig {
            lambda: 1e-3,
            delta: 1e300,
            ..SolverConfig::default()
        };
        let mut s = LbiState::new(1);
        let mut err = None;
        for _ in 0..10 {
            if let Err(e) = s.step(&d, &d.drive(&f).unwrap(), &cfg) {
                err = Some(e);
                break;
            }
        }
        assert!(matches!(err, Some(crate::Error::NonFinite(_))));
    }
}
