//! Experiment drivers: single-instance recovery, recovery under white noise,
//! and the indeterminacy/sparsity phase diagram.
//!
//! Every driver is deterministic in its top-level seed. Output files are
//! plain CSV plus a JSON metadata sidecar holding the full configuration.

mod fig2;
mod fig3;
mod phase;

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::diagnostics::fmt_f64;
use crate::error::Result;
use crate::io;

pub use fig2::{run_fig2, write_fig2, Fig2Config, Fig2Result};
pub use fig3::{run_fig3, write_fig3, Fig3Config, Fig3Result};
pub use phase::{
    phase_cell_seed, read_phase_csv, run_phase, run_phase_cells, write_phase, write_phase_csv, PhaseCell, PhaseConfig,
    PhaseGrid, PHASE_HEADER,
};

/// Environment variable capping the worker count of parallel experiments.
pub const THREADS_ENV: &str = "THREADS";

/// Worker count from `THREADS`, if set to a positive integer.
pub fn thread_limit() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&k| k > 0)
}

/// `index,u,u0` rows for the recovered-versus-true overlay.
pub fn write_overlay_csv<W: Write>(mut out: W, u: &DVector<f64>, u0: &DVector<f64>) -> std::io::Result<()> {
    writeln!(out, "index,u,u0")?;
    for (i, (a, b)) in u.iter().zip(u0.iter()).enumerate() {
        writeln!(out, "{i},{},{}", fmt_f64(*a), fmt_f64(*b))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Metadata<'a, C: Serialize> {
    experiment: &'a str,
    seed: u64,
    config: &'a C,
    #[serde(skip_serializing_if = "Option::is_none")]
    notes: Option<&'a str>,
}

pub(crate) fn write_metadata<C: Serialize>(
    path: &Path,
    experiment: &str,
    seed: u64,
    config: &C,
    notes: Option<&str>,
) -> Result<()> {
    io::write_json(
        path,
        &Metadata {
            experiment,
            seed,
            config,
            notes,
        },
    )
}
