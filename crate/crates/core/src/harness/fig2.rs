use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_metadata, write_overlay_csv};
use crate::diagnostics::{fmt_f64, rel_l2, write_trace_csv};
use crate::error::Result;
use crate::io::{self, write_with, SolutionFile};
use crate::nonlinearity::threshold;
use crate::problem::{InstanceSpec, ProblemInstance};
use crate::solvers::{run_observed, RunResult, SignalSource, SolverConfig, SolverKind};

/// Noiseless recovery on one random instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig2Config {
    pub m: usize,
    pub n: usize,
    pub nz: usize,
    pub amp_lo: f64,
    pub amp_hi: f64,
    pub seed: u64,
    pub lambda: f64,
    /// Iteration budget (end time for the event-driven solver).
    pub iters: u64,
    pub sample_every: u64,
    pub solver: SolverKind,
}

impl Default for Fig2Config {
    fn default() -> Self {
        let spec = InstanceSpec::recovery_default(1);
        Fig2Config {
            m: spec.m,
            n: spec.n,
            nz: spec.nz,
            amp_lo: spec.amp_lo,
            amp_hi: spec.amp_hi,
            seed: spec.seed,
            lambda: 10.0,
            iters: 10_000,
            sample_every: 1,
            solver: SolverKind::Hda,
        }
    }
}

impl Fig2Config {
    pub fn instance_spec(&self) -> InstanceSpec {
        InstanceSpec {
            m: self.m,
            n: self.n,
            nz: self.nz,
            amp_lo: self.amp_lo,
            amp_hi: self.amp_hi,
            seed: self.seed,
        }
    }

    /// Fixed budget: the stall rule is disabled.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            max_iters: self.iters,
            tol: 0.0,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fig2Result {
    pub instance: ProblemInstance,
    pub run: RunResult,
    /// `‖u − u⁰‖₂ / ‖u⁰‖₂`.
    pub rel_error: f64,
    /// Total spikes per node.
    pub spike_counts: Vec<u64>,
    pub firing_node: usize,
    pub silent_node: usize,
    /// `(t, v_firing, v_silent)` after every step (every sample for the
    /// event-driven solver).
    pub potentials: Vec<(f64, f64, f64)>,
}

pub fn run_fig2(cfg: &Fig2Config) -> Result<Fig2Result> {
    let instance = cfg.instance_spec().generate()?;
    run_fig2_on(cfg, instance)
}

pub(crate) fn run_fig2_on(cfg: &Fig2Config, instance: ProblemInstance) -> Result<Fig2Result> {
    let scfg = cfg.solver_config();
    let dict = &instance.dictionary;
    let source = SignalSource::Clean(&instance.clean_signal);
    let n = dict.cols();

    let mut counts = vec![0u64; n];
    let run = run_observed(cfg.solver, dict, source, &scfg, cfg.sample_every, |_, v| {
        if cfg.solver != SolverKind::Hopping {
            // a discrete node spikes at step t exactly when its potential is at threshold
            for (c, &vi) in counts.iter_mut().zip(v.iter()) {
                *c += u64::from(!threshold(vi, scfg.lambda).is_zero());
            }
        }
    })?;
    if cfg.solver == SolverKind::Hopping {
        for e in &run.spikes {
            counts[e.node] += 1;
        }
    }

    // most spikes, lowest index on ties; fewest spikes likewise
    let firing_node = (0..n).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).unwrap_or(0);
    let silent_node = (0..n).min_by_key(|&i| (counts[i], i)).unwrap_or(0);

    let mut potentials = Vec::new();
    run_observed(cfg.solver, dict, source, &scfg, cfg.sample_every, |t, v| {
        potentials.push((t, v[firing_node], v[silent_node]));
    })?;

    let rel_error = rel_l2(&run.u, &instance.truth.values)?;
    Ok(Fig2Result {
        instance,
        run,
        rel_error,
        spike_counts: counts,
        firing_node,
        silent_node,
        potentials,
    })
}

fn write_energy_csv(path: &Path, run: &RunResult) -> Result<()> {
    write_with(path, |w| {
        use std::io::Write;
        writeln!(w, "t,energy")?;
        for r in &run.trace {
            writeln!(w, "{},{}", fmt_f64(r.t), fmt_f64(r.energy))?;
        }
        Ok(())
    })
}

fn write_potentials_csv(path: &Path, res: &Fig2Result) -> Result<()> {
    write_with(path, |w| {
        use std::io::Write;
        writeln!(w, "t,v_node_{},v_node_{}", res.firing_node, res.silent_node)?;
        for (t, a, b) in &res.potentials {
            writeln!(w, "{},{},{}", fmt_f64(*t), fmt_f64(*a), fmt_f64(*b))?;
        }
        Ok(())
    })
}

pub(crate) fn write_common(out_dir: &Path, instance: &ProblemInstance, run: &RunResult, lambda: f64) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    instance.write_json(&out_dir.join("instance.json"))?;
    write_with(&out_dir.join("trace.csv"), |w| write_trace_csv(w, &run.trace))?;
    write_with(&out_dir.join("overlay.csv"), |w| {
        write_overlay_csv(w, &run.u, &instance.truth.values)
    })?;
    io::write_solution(
        &out_dir.join("solution.json"),
        &SolutionFile::from_run(run, lambda, instance.seed),
    )?;
    if !run.spikes.is_empty() {
        write_with(&out_dir.join("spikes.csv"), |w| io::write_spike_csv(w, &run.spikes))?;
    }
    Ok(())
}

/// Writes `instance.json`, `trace.csv`, `energy.csv`, `overlay.csv`,
/// `potentials.csv`, `solution.json`, `metadata.json` (and `spikes.csv` for
/// the event-driven solver) into `out_dir`.
pub fn write_fig2(res: &Fig2Result, cfg: &Fig2Config, out_dir: &Path) -> Result<()> {
    write_common(out_dir, &res.instance, &res.run, cfg.lambda)?;
    write_energy_csv(&out_dir.join("energy.csv"), &res.run)?;
    write_potentials_csv(&out_dir.join("potentials.csv"), res)?;
    write_metadata(
        &out_dir.join("metadata.json"),
        "fig2",
        cfg.seed,
        cfg,
        Some("fixed iteration budget; potentials.csv shows the node with most spikes and the node with fewest"),
    )
}
