//! Exact event-driven simulation of the continuous-time network.
//!
//! Between spikes every potential grows linearly at rate `b_i = Aᵢᵀf`, so the
//! next threshold crossing can be computed in closed form and the simulation
//! jumps straight to it.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{Recorder, RunResult, SignalSource, Snapshot, SolverConfig, SolverKind, SolverState, StopReason};
use crate::diagnostics::CommCost;
use crate::error::{Error, Result};
use crate::nonlinearity::Ternary;
use crate::problem::{Dictionary, Signal};

/// Upper bound on simultaneous firings per node within one instant before
/// the cascade is declared runaway.
pub const CASCADE_LIMIT_PER_NODE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub time: f64,
    pub node: usize,
    /// +1 or -1.
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoppingState {
    pub v: DVector<f64>,
    /// Signed spike count per node, `∫₀ᵗ s dt′`.
    pub w: DVector<f64>,
    pub t: f64,
    pub events: u64,
    /// Largest `|v_i|` seen after any event has been fully processed.
    pub max_abs_v_after_event: f64,
}

impl HoppingState {
    pub fn new(n: usize) -> Self {
        HoppingState {
            v: DVector::zeros(n),
            w: DVector::zeros(n),
            t: 0.0,
            events: 0,
            max_abs_v_after_event: 0.0,
        }
    }

    /// `λ w / t`, zero at `t = 0`.
    pub fn solution(&self, lambda: f64) -> DVector<f64> {
        if self.t > 0.0 {
            &self.w * (lambda / self.t)
        } else {
            DVector::zeros(self.w.len())
        }
    }

    /// Time until the next threshold crossing and the node that crosses.
    /// Nodes without drive never self-fire.
    fn next_crossing(&self, drive: &DVector<f64>, lambda: f64) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (i, (&b, &v)) in drive.iter().zip(self.v.iter()).enumerate() {
            if b == 0.0 {
                continue;
            }
            let wait = ((lambda * b.signum() - v) / b).max(0.0);
            if best.is_none_or(|(w, _)| wait < w) {
                best = Some((wait, i));
            }
        }
        best
    }

    fn advance(&mut self, drive: &DVector<f64>, dt: f64) {
        self.v.axpy(dt, drive, 1.0);
    }

    fn fire(&mut self, dict: &Dictionary, j: usize, sign: Ternary, lambda: f64, log: &mut Vec<SpikeEvent>) {
        let sigma = sign.as_f64();
        self.v.axpy(-lambda * sigma, &dict.gram().column(j), 1.0);
        self.w[j] += sigma;
        self.events += 1;
        log.push(SpikeEvent {
            time: self.t,
            node: j,
            sign: sign.value(),
        });
    }

    /// Fires every node at or above threshold, largest `|v_i|` first, until
    /// all potentials are strictly inside `(-λ, λ)`.
    fn cascade(&mut self, dict: &Dictionary, lambda: f64, log: &mut Vec<SpikeEvent>) -> Result<()> {
        let limit = CASCADE_LIMIT_PER_NODE * self.v.len();
        let mut count = 0;
        loop {
            let j = self.v.iamax();
            let vj = self.v[j];
            if vj.abs() < lambda {
                break;
            }
            count += 1;
            if count > limit {
                return Err(Error::CascadeLimit(count));
            }
            self.fire(dict, j, Ternary::sign_of(vj), lambda, log);
        }
        if !self.v.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite(self.events));
        }
        self.max_abs_v_after_event = self.max_abs_v_after_event.max(self.v.amax());
        Ok(())
    }
}

pub(crate) fn run_events<F>(
    dict: &Dictionary,
    drive: &DVector<f64>,
    source: SignalSource<'_>,
    cfg: &SolverConfig,
    t_end: f64,
    sample_every: f64,
    observe: &mut F,
) -> Result<RunResult>
where
    F: FnMut(f64, &DVector<f64>),
{
    if !(t_end > 0.0) || !(sample_every > 0.0) {
        return Err(Error::InvalidConfig("t_end and the sampling interval must be > 0".into()));
    }
    let lambda = cfg.lambda;
    let n = dict.cols();
    let mut state = HoppingState::new(n);
    let mut rec = Recorder::new(dict, &source, cfg);
    let mut spikes = Vec::new();
    let mut stop = StopReason::MaxIters;

    let comm = |s: &HoppingState| CommCost {
        spike_events: s.events,
        analog_msgs: 0,
    };

    if drive.iter().all(|b| *b == 0.0) {
        let t = sample_every.min(t_end);
        state.t = t;
        observe(t, &state.v);
        let u = state.solution(lambda);
        rec.record(
            t,
            Snapshot::Spikes {
                u: &u,
                spike_sum: &state.w,
            },
            comm(&state),
        );
        return Ok(RunResult {
            solver: SolverKind::Hopping,
            u,
            state: SolverState::Hopping(state),
            trace: rec.trace,
            stop_reason: StopReason::Converged,
            spikes,
            comm: CommCost::default(),
        });
    }

    let mut k: u64 = 1;
    loop {
        let next_sample = (k as f64 * sample_every).min(t_end);
        let crossing = state.next_crossing(drive, lambda);
        match crossing {
            Some((wait, j)) if state.t + wait <= next_sample => {
                state.advance(drive, wait);
                state.t += wait;
                // land exactly on the threshold to absorb rounding in the crossing time
                let sigma = Ternary::sign_of(drive[j]);
                state.v[j] = lambda * sigma.as_f64();
                state.cascade(dict, lambda, &mut spikes)?;
            }
            _ => {
                state.advance(drive, next_sample - state.t);
                state.t = next_sample;
                observe(state.t, &state.v);
                let u = state.solution(lambda);
                rec.record(
                    state.t,
                    Snapshot::Spikes {
                        u: &u,
                        spike_sum: &state.w,
                    },
                    comm(&state),
                );
                if next_sample >= t_end {
                    break;
                }
                if let Some(reason) = rec.stop_check() {
                    stop = reason;
                    break;
                }
                k += 1;
            }
        }
    }

    let u = state.solution(lambda);
    let comm = comm(&state);
    Ok(RunResult {
        solver: SolverKind::Hopping,
        u,
        state: SolverState::Hopping(state),
        trace: rec.trace,
        stop_reason: stop,
        spikes,
        comm,
    })
}

/// Event-driven run on a constant signal up to time `t_end`, sampled at unit
/// time intervals. Returns the run and its spike log.
pub fn hopping_run(dict: &Dictionary, f: &Signal, cfg: &SolverConfig, t_end: f64) -> Result<(RunResult, Vec<SpikeEvent>)> {
    cfg.validate()?;
    let drive = dict.drive(f)?;
    let result = run_events(dict, &drive, SignalSource::Clean(f), cfg, t_end, 1.0, &mut |_, _| {})?;
    let spikes = result.spikes.clone();
    Ok((result, spikes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{exact_test_dictionary, generate_instance};

    #[test]
    fn single_atom_spike_train() {
        let d = &exact_test_dictionary();
        let i = 3;
        let f = Signal::new(d.matrix().column(i).into_owned()).unwrap();
        // the residual is exactly zero at every spike, so disable the stall rule
        let cfg = SolverConfig {
            tol: 0.0,
            ..SolverConfig::default()
        };
        let (res, spikes) = hopping_run(d, &f, &cfg, 100.0).unwrap();
        assert_eq!(spikes.len(), 10);
        for (k, e) in spikes.iter().enumerate() {
            assert_eq!((e.node, e.sign), (i, 1));
            assert!((e.time - 10.0 * (k + 1) as f64).abs() < 1e-9, "{e:?}");
        }
        assert!((res.u[i] - 1.0).abs() < 1e-9);
        let SolverState::Hopping(s) = &res.state else { panic!() };
        assert!(s.v[i].abs() < 1e-9);
        assert!(s.max_abs_v_after_event < 10.0);
        // u(10k) = 1 at every sample on the spike grid
        for r in res.trace.iter().filter(|r| r.t % 10.0 == 0.0) {
            assert!((r.l1 - 1.0).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn zero_signal_converges_immediately() {
        let inst = generate_instance(4, 6, 2, -0.5, 0.5, 1).unwrap();
        let (res, spikes) = hopping_run(&inst.dictionary, &Signal::zeros(4), &SolverConfig::default(), 50.0).unwrap();
        assert!(spikes.is_empty());
        assert_eq!(res.u, DVector::zeros(6));
        assert_eq!(res.stop_reason, StopReason::Converged);
        assert_eq!(res.trace.len(), 1);
    }

    #[test]
    fn events_are_time_ordered_and_bounded() {
        let inst = generate_instance(16, 32, 3, -0.5, 0.5, 9).unwrap();
        let cfg = SolverConfig::default();
        let (res, spikes) = hopping_run(&inst.dictionary, &inst.clean_signal, &cfg, 500.0).unwrap();
        assert!(!spikes.is_empty());
        assert!(spikes[0].time > 0.0);
        assert!(spikes.windows(2).all(|p| p[0].time <= p[1].time));
        let SolverState::Hopping(s) = &res.state else { panic!() };
        assert!(s.max_abs_v_after_event < cfg.lambda);
        assert_eq!(res.comm.spike_events, spikes.len() as u64);
    }
}
