use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{thread_limit, write_metadata};
use crate::diagnostics::{compare, fmt_f64};
use crate::error::{Error, Result};
use crate::io::write_with;
use crate::problem::generate_instance;
use crate::rng::derive_seed;
use crate::solvers::{run, SignalSource, SolverConfig, SolverKind};

/// Sweep over indeterminacy `α = m/n` and sparsity `β = nz/n`, comparing HDA
/// and LBI on the same instances under a fixed iteration budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    pub n: usize,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    pub amp_lo: f64,
    pub amp_hi: f64,
    /// HDA variant: `hopping` (continuous time) or `hda` (discrete).
    pub hda_solver: SolverKind,
    /// HDA threshold.
    pub lambda: f64,
    /// Iteration budget shared by both solvers.
    pub iters: u64,
    pub lbi_lambda: f64,
    /// LBI step; `1/σ_max(A)²` of each instance when absent.
    pub lbi_delta: Option<f64>,
}

fn tenths() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            n: 60,
            alphas: tenths(),
            betas: tenths(),
            realizations: 10,
            seed: 1,
            amp_lo: -0.5,
            amp_hi: 0.5,
            hda_solver: SolverKind::Hopping,
            lambda: 10.0,
            iters: 20_000,
            lbi_lambda: 10.0,
            lbi_delta: None,
        }
    }
}

impl PhaseConfig {
    /// `(round(α n), max(1, round(β n)))`.
    pub fn dims(&self, alpha: f64, beta: f64) -> (usize, usize) {
        let n = self.n as f64;
        ((alpha * n).round() as usize, ((beta * n).round() as usize).max(1))
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.realizations == 0 || self.iters == 0 {
            return Err(Error::InvalidConfig("n, realizations and iters must be >= 1".into()));
        }
        for &a in &self.alphas {
            let (m, _) = self.dims(a, 0.0);
            if !(a > 0.0 && a <= 1.0) || m == 0 {
                return Err(Error::InvalidConfig(format!("alpha {a} gives m = {m} for n = {}", self.n)));
            }
        }
        if !matches!(self.hda_solver, SolverKind::Hda | SolverKind::Hopping) {
            return Err(Error::InvalidConfig("hda_solver must be hda or hopping".into()));
        }
        for &b in &self.betas {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::InvalidConfig(format!("beta {b} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Means over realizations for one `(α, β)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub alpha: f64,
    pub beta: f64,
    /// Mean `‖u_HDA − u⁰‖²/‖u⁰‖²`.
    pub mse_hda: f64,
    pub mse_lbi: f64,
    /// Mean `‖u_HDA − u_LBI‖²/‖u_LBI‖²`.
    pub mse_diff: f64,
    /// Mean `|‖u_HDA‖₁ − ‖u_LBI‖₁| / ‖u_LBI‖₁`.
    pub l1_diff: f64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub n: usize,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub realizations: usize,
    /// Row-major in `(alpha, beta)`.
    pub cells: Vec<PhaseCell>,
}

impl PhaseGrid {
    pub fn cell(&self, alpha: f64, beta: f64) -> Option<&PhaseCell> {
        self.cells
            .iter()
            .find(|c| (c.alpha - alpha).abs() < 1e-12 && (c.beta - beta).abs() < 1e-12)
    }

    pub fn grand_mean_l1_diff(&self) -> f64 {
        self.cells.iter().map(|c| c.l1_diff).sum::<f64>() / self.cells.len() as f64
    }
}

/// Instance seed of realization `r` in cell `(α, β)`.
pub fn phase_cell_seed(seed: u64, alpha: f64, beta: f64, r: usize) -> u64 {
    derive_seed(
        seed,
        &[(alpha * 1000.0).round() as u64, (beta * 1000.0).round() as u64, r as u64],
    )
}

struct Sample {
    mse_hda: f64,
    mse_lbi: f64,
    mse_diff: f64,
    l1_diff: f64,
}

fn realization(cfg: &PhaseConfig, alpha: f64, beta: f64, r: usize) -> Result<Sample> {
    let (m, nz) = cfg.dims(alpha, beta);
    let inst = generate_instance(m, cfg.n, nz, cfg.amp_lo, cfg.amp_hi, phase_cell_seed(cfg.seed, alpha, beta, r))?;
    let dict = &inst.dictionary;
    let source = SignalSource::Clean(&inst.clean_signal);
    let budget = SolverConfig {
        max_iters: cfg.iters,
        tol: 0.0,
        ..SolverConfig::default()
    };
    let hda = run(
        cfg.hda_solver,
        dict,
        source,
        &SolverConfig {
            lambda: cfg.lambda,
            ..budget
        },
        cfg.iters,
    )?;
    let delta = cfg.lbi_delta.unwrap_or_else(|| 1.0 / dict.spectral_norm_sq());
    let lbi = run(
        SolverKind::Lbi,
        dict,
        source,
        &SolverConfig {
            lambda: cfg.lbi_lambda,
            delta,
            ..budget
        },
        cfg.iters,
    )?;
    let u0 = &inst.truth.values;
    let diff = compare(&hda.u, &lbi.u)?;
    Ok(Sample {
        mse_hda: compare(&hda.u, u0)?.rel_mse,
        mse_lbi: compare(&lbi.u, u0)?.rel_mse,
        mse_diff: diff.rel_mse,
        l1_diff: diff.rel_l1_diff,
    })
}

/// Computes the listed cells only. Each cell depends on nothing but its own
/// `(α, β)` and the top-level seed.
pub fn run_phase_cells(cfg: &PhaseConfig, cells: &[(f64, f64)]) -> Result<Vec<PhaseCell>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.realizations).map(move |r| (c, r)))
        .collect();
    let work = || -> Result<Vec<Sample>> {
        jobs.par_iter()
            .map(|&(c, r)| realization(cfg, cells[c].0, cells[c].1, r))
            .collect()
    };
    let samples = match thread_limit() {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let k = cfg.realizations as f64;
    Ok(cells
        .iter()
        .zip(samples.chunks(cfg.realizations))
        .map(|(&(alpha, beta), s)| PhaseCell {
            alpha,
            beta,
            mse_hda: s.iter().map(|x| x.mse_hda).sum::<f64>() / k,
            mse_lbi: s.iter().map(|x| x.mse_lbi).sum::<f64>() / k,
            mse_diff: s.iter().map(|x| x.mse_diff).sum::<f64>() / k,
            l1_diff: s.iter().map(|x| x.l1_diff).sum::<f64>() / k,
            realizations: cfg.realizations,
        })
        .collect())
}

pub fn run_phase(cfg: &PhaseConfig) -> Result<PhaseGrid> {
    let cells: Vec<(f64, f64)> = cfg
        .alphas
        .iter()
        .flat_map(|&a| cfg.betas.iter().map(move |&b| (a, b)))
        .collect();
    Ok(PhaseGrid {
        n: cfg.n,
        alphas: cfg.alphas.clone(),
        betas: cfg.betas.clone(),
        realizations: cfg.realizations,
        cells: run_phase_cells(cfg, &cells)?,
    })
}

pub const PHASE_HEADER: &str = "alpha,beta,mse_hda,mse_lbi,mse_diff,l1_diff,realizations";

pub fn write_phase_csv<W: Write>(mut out: W, grid: &PhaseGrid) -> std::io::Result<()> {
    writeln!(out, "{PHASE_HEADER}")?;
    for c in &grid.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(c.alpha),
            fmt_f64(c.beta),
            fmt_f64(c.mse_hda),
            fmt_f64(c.mse_lbi),
            fmt_f64(c.mse_diff),
            fmt_f64(c.l1_diff),
            c.realizations
        )?;
    }
    Ok(())
}

pub fn read_phase_csv(text: &str, path: &Path) -> Result<Vec<PhaseCell>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == PHASE_HEADER => {}
        _ => return Err(Error::malformed(path, 1, 1, format!("expected header {PHASE_HEADER:?}"))),
    }
    let mut cells = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::malformed(path, i + 1, 1, "expected 7 fields"));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse()
                .map_err(|_| Error::malformed(path, i + 1, k + 1, format!("not a number: {:?}", fields[k])))
        };
        cells.push(PhaseCell {
            alpha: num(0)?,
            beta: num(1)?,
            mse_hda: num(2)?,
            mse_lbi: num(3)?,
            mse_diff: num(4)?,
            l1_diff: num(5)?,
            realizations: fields[6]
                .parse()
                .map_err(|_| Error::malformed(path, i + 1, 7, "bad realization count"))?,
        });
    }
    Ok(cells)
}

/// Writes `phase.csv` and `metadata.json` into `out_dir`.
pub fn write_phase(grid: &PhaseGrid, cfg: &PhaseConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_with(&out_dir.join("phase.csv"), |w| write_phase_csv(w, grid))?;
    write_metadata(
        &out_dir.join("metadata.json"),
        "phase",
        cfg.seed,
        cfg,
        Some("both solvers run for the same fixed iteration budget (end time for the event-driven HDA); m = round(alpha n), nz = max(1, round(beta n))"),
    )
}
