//! The four iterative solvers and the common run loop.
//!
//! All solvers work on the same network: node `i` integrates the
//! feedforward drive `(Aᵀf)_i` and lateral input `-(AᵀA x)_i`, where `x` is
//! whatever the nodes broadcast (analog `u` for LBI and BCD, ternary spikes
//! for HDA).

mod bcd;
mod hda;
mod hopping;
mod lbi;

use std::borrow::Cow;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use bcd::{bcd_step, select_index, BcdState};
pub use hda::{hda_step, HdaState};
pub use hopping::{hopping_run, HoppingState, SpikeEvent, CASCADE_LIMIT_PER_NODE};
pub use lbi::{lbi_step, LbiState};

use crate::diagnostics::{self, CommCost, TraceRecord};
use crate::error::{Error, Result};
use crate::noise::{corrupt, NoiseModel};
use crate::problem::{check_len, Dictionary, Signal};

/// Relative residual below which a stalled run is reported as converged.
pub const CONVERGED_REL_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Lbi,
    Bcd,
    Hda,
    Hopping,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Lbi => "lbi",
            SolverKind::Bcd => "bcd",
            SolverKind::Hda => "hda",
            SolverKind::Hopping => "hopping",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lbi" => Ok(SolverKind::Lbi),
            "bcd" => Ok(SolverKind::Bcd),
            "hda" => Ok(SolverKind::Hda),
            "hopping" => Ok(SolverKind::Hopping),
            other => Err(Error::InvalidConfig(format!("unknown solver {other:?}"))),
        }
    }
}

/// Coordinate selection rule for Bregman coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum BcdPolicy {
    #[default]
    Cyclic,
    Random {
        seed: u64,
    },
    /// Largest `|Aᵢᵀ(Au − f)|`, lowest index on ties.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Spike threshold / shrinkage level.
    pub lambda: f64,
    /// LBI step size.
    pub delta: f64,
    pub max_iters: u64,
    /// Stop when the relative residual moves less than this over
    /// `stall_window` samples.
    pub tol: f64,
    pub stall_window: usize,
    pub bcd_policy: BcdPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 10.0,
            delta: 1.0,
            max_iters: 10_000,
            tol: 1e-8,
            stall_window: 10,
            bcd_policy: BcdPolicy::Cyclic,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidConfig(format!("delta must be > 0, got {}", self.delta)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be >= 0, got {}", self.tol)));
        }
        if self.stall_window == 0 {
            return Err(Error::InvalidConfig("stall_window must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    Stalled,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxIters => "max_iters",
            StopReason::Stalled => "stalled",
        }
    }
}

/// The signal fed to a solver: clean, or corrupted per iteration.
#[derive(Debug, Clone, Copy)]
pub enum SignalSource<'a> {
    Clean(&'a Signal),
    Noisy { clean: &'a Signal, model: &'a NoiseModel },
}

impl<'a> SignalSource<'a> {
    /// Clean signal `f⁰`; diagnostics are measured against it.
    pub fn reference(&self) -> &'a Signal {
        match self {
            SignalSource::Clean(f) => f,
            SignalSource::Noisy { clean, .. } => clean,
        }
    }

    /// Signal seen at iteration `k ≥ 1`.
    pub fn at(&self, k: u64) -> Cow<'a, Signal> {
        match self {
            SignalSource::Clean(f) => Cow::Borrowed(*f),
            SignalSource::Noisy { clean, model } => Cow::Owned(corrupt(clean, model, k)),
        }
    }

    /// The signal, if it does not change between iterations.
    pub fn constant(&self) -> Option<Cow<'a, Signal>> {
        match self {
            SignalSource::Clean(f) => Some(Cow::Borrowed(*f)),
            SignalSource::Noisy { model, .. } if model.is_time_invariant() => Some(self.at(1)),
            SignalSource::Noisy { .. } => None,
        }
    }
}

/// Final state of whichever solver ran.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverState {
    Lbi(LbiState),
    Bcd(BcdState),
    Hda(HdaState),
    Hopping(HoppingState),
}

impl SolverState {
    pub fn potentials(&self) -> &DVector<f64> {
        match self {
            SolverState::Lbi(s) => &s.v,
            SolverState::Bcd(s) => &s.v,
            SolverState::Hda(s) => &s.v,
            SolverState::Hopping(s) => &s.v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub solver: SolverKind,
    pub u: DVector<f64>,
    pub state: SolverState,
    pub trace: Vec<TraceRecord>,
    pub stop_reason: StopReason,
    /// Spike log of the event-driven solver; empty for the others.
    pub spikes: Vec<SpikeEvent>,
    pub comm: CommCost,
}

impl RunResult {
    pub fn final_t(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.t)
    }

    pub fn final_record(&self) -> &TraceRecord {
        self.trace.last().expect("trace is never empty")
    }
}

/// Builds trace records and applies the stall rule.
pub(crate) struct Recorder<'a> {
    dict: &'a Dictionary,
    reference: &'a Signal,
    reference_norm: f64,
    constant: Option<DVector<f64>>,
    lambda: f64,
    tol: f64,
    window: usize,
    pub trace: Vec<TraceRecord>,
}

/// How a sample expresses the current solution.
pub(crate) enum Snapshot<'s> {
    /// `u` only (analog solvers).
    Solution(&'s DVector<f64>),
    /// `u = λ·spike_sum / t` with the spike count available for the energy.
    Spikes { u: &'s DVector<f64>, spike_sum: &'s DVector<f64> },
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(dict: &'a Dictionary, source: &SignalSource<'a>, cfg: &SolverConfig) -> Self {
        let reference = source.reference();
        Recorder {
            dict,
            reference,
            reference_norm: reference.norm(),
            constant: source.constant().map(|f| f.into_owned().into_inner()),
            lambda: cfg.lambda,
            tol: cfg.tol,
            window: cfg.stall_window,
            trace: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, t: f64, snap: Snapshot<'_>, comm: CommCost) {
        let f = self.reference.values();
        let u = match snap {
            Snapshot::Solution(u) | Snapshot::Spikes { u, .. } => u,
        };
        let au = self.dict.matrix() * u;
        let residual = (f - &au).norm();
        let energy = match snap {
            Snapshot::Spikes { spike_sum, .. } => diagnostics::energy(spike_sum, t, self.dict, f, self.lambda),
            Snapshot::Solution(u) => diagnostics::energy_of_solution(u, t, self.dict, f, self.lambda),
        };
        let signal_residual = match &self.constant {
            Some(fc) => (fc - &au).norm(),
            None => residual,
        };
        self.trace.push(TraceRecord {
            t,
            residual,
            rel_residual: if self.reference_norm > 0.0 {
                residual / self.reference_norm
            } else {
                f64::NAN
            },
            energy,
            l1: u.lp_norm(1),
            l0: diagnostics::l0(u),
            comm_events: comm.spike_events,
            analog_msgs: comm.analog_msgs,
            signal_residual,
        });
    }

    /// Stall rule applied to the latest sample. Inactive while the solution
    /// is still identically zero, since no node has crossed its threshold yet.
    pub(crate) fn stop_check(&self) -> Option<StopReason> {
        let k = self.trace.len().checked_sub(1)?;
        let last = &self.trace[k];
        if last.l1 == 0.0 || k < self.window {
            return None;
        }
        let prev = &self.trace[k - self.window];
        if (last.rel_residual - prev.rel_residual).abs() < self.tol {
            if last.rel_residual <= CONVERGED_REL_RESIDUAL {
                Some(StopReason::Converged)
            } else {
                Some(StopReason::Stalled)
            }
        } else {
            None
        }
    }
}

/// Runs a solver to its stopping rule, sampling every `sample_every`
/// iterations (time units for the event-driven solver, which runs until
/// `t = max_iters`).
pub fn run(
    kind: SolverKind,
    dict: &Dictionary,
    source: SignalSource<'_>,
    cfg: &SolverConfig,
    sample_every: u64,
) -> Result<RunResult> {
    run_observed(kind, dict, source, cfg, sample_every, |_, _| {})
}

/// [`run`] with a callback receiving `(t, v)` after every discrete step, or
/// at every sample time for the event-driven solver.
pub fn run_observed<F>(
    kind: SolverKind,
    dict: &Dictionary,
    source: SignalSource<'_>,
    cfg: &SolverConfig,
    sample_every: u64,
    mut observe: F,
) -> Result<RunResult>
where
    F: FnMut(f64, &DVector<f64>),
{
    cfg.validate()?;
    if sample_every == 0 {
        return Err(Error::InvalidConfig("sample_every must be >= 1".into()));
    }
    check_len(dict.rows(), source.reference().len())?;
    if let SignalSource::Noisy { model, .. } = &source {
        model.validate(dict.rows())?;
    }

    if kind == SolverKind::Hopping {
        let f = source.constant().ok_or_else(|| {
            Error::InvalidConfig("the event-driven solver needs a time-invariant signal".into())
        })?;
        let drive = dict.drive(&f)?;
        return hopping::run_events(
            dict,
            &drive,
            source,
            cfg,
            cfg.max_iters as f64,
            sample_every as f64,
            &mut observe,
        );
    }

    if kind == SolverKind::Lbi {
        let limit = 2.0 / dict.spectral_norm_sq();
        if cfg.delta >= limit {
            log::warn!(
                "LBI step delta = {} is outside the stable range (< {limit:.4}); iterates may diverge",
                cfg.delta
            );
        }
    }

    let n = dict.cols();
    let fixed_drive = match source.constant() {
        Some(f) => Some(dict.drive(&f)?),
        None => None,
    };
    let silent = fixed_drive.as_ref().is_some_and(|b| b.iter().all(|x| *x == 0.0));
    let max_iters = if silent { 1 } else { cfg.max_iters.max(1) };

    let mut state = match kind {
        SolverKind::Lbi => SolverState::Lbi(LbiState::new(n)),
        SolverKind::Bcd => SolverState::Bcd(BcdState::new(n, cfg.bcd_policy)),
        SolverKind::Hda => SolverState::Hda(HdaState::new(n)),
        SolverKind::Hopping => unreachable!(),
    };
    let mut rec = Recorder::new(dict, &source, cfg);
    let mut comm = CommCost::default();
    let mut stop = StopReason::MaxIters;

    for t in 1..=max_iters {
        let varying;
        let drive = match &fixed_drive {
            Some(b) => b,
            None => {
                varying = dict.drive(&source.at(t))?;
                &varying
            }
        };
        match &mut state {
            SolverState::Lbi(s) => comm.analog_msgs += s.step(dict, drive, cfg)? as u64,
            SolverState::Bcd(s) => {
                let i = s.select(drive);
                comm.analog_msgs += s.step(dict, drive, i, cfg)? as u64;
            }
            SolverState::Hda(s) => comm.spike_events += s.step(dict, drive, cfg.lambda)? as u64,
            SolverState::Hopping(_) => unreachable!(),
        }
        observe(t as f64, state.potentials());

        if t % sample_every == 0 || t == max_iters {
            let snap = match &state {
                SolverState::Lbi(s) => Snapshot::Solution(&s.u),
                SolverState::Bcd(s) => Snapshot::Solution(&s.u),
                SolverState::Hda(s) => Snapshot::Spikes {
                    u: &s.u,
                    spike_sum: &s.spike_sum,
                },
                SolverState::Hopping(_) => unreachable!(),
            };
            rec.record(t as f64, snap, comm);
            if silent {
                stop = StopReason::Converged;
                break;
            }
            if let Some(reason) = rec.stop_check() {
                stop = reason;
                break;
            }
        }
    }

    let u = match &state {
        SolverState::Lbi(s) => s.u.clone(),
        SolverState::Bcd(s) => s.u.clone(),
        SolverState::Hda(s) => s.u.clone(),
        SolverState::Hopping(_) => unreachable!(),
    };
    Ok(RunResult {
        solver: kind,
        u,
        state,
        trace: rec.trace,
        stop_reason: stop,
        spikes: Vec::new(),
        comm,
    })
}

pub(crate) fn ensure_finite(v: &DVector<f64>, t: u64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(t))
    }
}
