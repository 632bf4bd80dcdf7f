use nalgebra::DVector;

use super::{ensure_finite, SolverConfig};
use crate::error::Result;
use crate::nonlinearity::{threshold, Ternary};
use crate::problem::{Dictionary, Signal};

/// Discrete-time HDA state. Nodes integrate `Aᵀf − λAᵀA s` and broadcast
/// ternary spikes; the solution is the scaled firing rate `λ·spike_sum/t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HdaState {
    pub v: DVector<f64>,
    /// Spikes emitted at the latest step.
    pub s: Vec<Ternary>,
    pub spike_sum: DVector<f64>,
    pub t: u64,
    pub u: DVector<f64>,
}

impl HdaState {
    pub fn new(n: usize) -> Self {
        HdaState {
            v: DVector::zeros(n),
            s: vec![Ternary::Zero; n],
            spike_sum: DVector::zeros(n),
            t: 0,
            u: DVector::zeros(n),
        }
    }

    /// `v ← v + Aᵀf − λAᵀA s`, then threshold. Firing nodes are reset on the
    /// following step through the unit Gram diagonal. Returns the number of
    /// spikes emitted.
    pub fn step(&mut self, dict: &Dictionary, drive: &DVector<f64>, lambda: f64) -> Result<usize> {
        let gram = dict.gram();
        self.v += drive;
        for (j, s) in self.s.iter().enumerate() {
            if !s.is_zero() {
                self.v.axpy(-lambda * s.as_f64(), &gram.column(j), 1.0);
            }
        }
        self.t += 1;
        ensure_finite(&self.v, self.t)?;
        let mut fired = 0;
        for (j, &vj) in self.v.iter().enumerate() {
            let s = threshold(vj, lambda);
            self.s[j] = s;
            if !s.is_zero() {
                self.spike_sum[j] += s.as_f64();
                fired += 1;
            }
        }
        let scale = lambda / self.t as f64;
        self.u = &self.spike_sum * scale;
        Ok(fired)
    }
}

/// One HDA step on signal `f`, returning the successor state.
pub fn hda_step(state: &HdaState, dict: &Dictionary, f: &Signal, cfg: &SolverConfig) -> Result<HdaState> {
    let drive = dict.drive(f)?;
    let mut next = state.clone();
    next.step(dict, &drive, cfg.lambda)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{exact_test_dictionary, generate_instance};

    fn atom_signal(d: &Dictionary, i: usize, sign: f64) -> Signal {
        Signal::new(d.matrix().column(i) * sign).unwrap()
    }

    #[test]
    fn single_atom_fires_every_lambda_steps() {
        let d = &exact_test_dictionary();
        let i = 2;
        let f = atom_signal(d, i, 1.0);
        let cfg = SolverConfig::default();
        let mut s = HdaState::new(4);
        let mut fire_times = Vec::new();
        for _ in 0..100 {
            s = hda_step(&s, d, &f, &cfg).unwrap();
            if s.t <= 11 {
                assert_eq!(s.v[i], if s.t <= 10 { s.t as f64 } else { 1.0 }, "t={}", s.t);
            }
            if s.s[i] == Ternary::Pos {
                fire_times.push(s.t);
            }
            assert!(s.s.iter().enumerate().all(|(j, x)| j == i || x.is_zero()));
        }
        assert_eq!(fire_times, (1..=10).map(|k| 10 * k).collect::<Vec<_>>());
        assert!((s.u[i] - 1.0).abs() < 1e-12);
        assert!(s.u.iter().enumerate().all(|(j, x)| j == i || *x == 0.0));
    }

    #[test]
    fn negative_atom_fires_negative() {
        let d = &exact_test_dictionary();
        let f = atom_signal(d, 2, -1.0);
        let mut s = HdaState::new(4);
        for _ in 0..10 {
            s = hda_step(&s, d, &f, &SolverConfig::default()).unwrap();
        }
        assert_eq!(s.s[2], Ternary::Neg);
        assert!((s.u[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_signal_stays_zero() {
        let inst = generate_instance(4, 6, 2, -0.5, 0.5, 1).unwrap();
        let mut s = HdaState::new(6);
        for _ in 0..50 {
            s = hda_step(&s, &inst.dictionary, &Signal::zeros(4), &SolverConfig::default()).unwrap();
        }
        assert_eq!(s.v, DVector::zeros(6));
        assert_eq!(s.u, DVector::zeros(6));
        assert_eq!(s.t, 50);
    }
}
