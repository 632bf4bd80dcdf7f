//! Solution files, spike logs and small helpers shared by the file writers.
//!
//! Floats are written in shortest round-trip form, so rewriting a file that
//! was just read reproduces it byte for byte.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, fmt_f64};
use crate::error::{Error, Result};
use crate::solvers::{RunResult, SpikeEvent};

pub use diagnostics::{write_trace_csv, TRACE_HEADER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub u: Vec<f64>,
    pub lambda: f64,
    pub t_final: f64,
    pub stop_reason: String,
    /// Absent (null) when the reference signal is zero.
    pub rel_residual: Option<f64>,
    pub l1: f64,
    pub l0: usize,
    pub seed: u64,
    pub solver: String,
}

impl SolutionFile {
    pub fn from_run(run: &RunResult, lambda: f64, seed: u64) -> Self {
        let last = run.final_record();
        SolutionFile {
            u: run.u.iter().copied().collect(),
            lambda,
            t_final: last.t,
            stop_reason: run.stop_reason.name().to_string(),
            rel_residual: last.rel_residual.is_finite().then_some(last.rel_residual),
            l1: run.u.lp_norm(1),
            l0: diagnostics::l0(&run.u),
            seed,
            solver: run.solver.name().to_string(),
        }
    }

    pub fn u_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.u)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes") + "\n"
    }

    pub fn from_json_str(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::malformed(path, e.line(), e.column(), e.to_string()))
    }
}

pub fn write_solution(path: &Path, sol: &SolutionFile) -> Result<()> {
    std::fs::write(path, sol.to_json())?;
    Ok(())
}

pub fn read_solution(path: &Path) -> Result<SolutionFile> {
    let text = std::fs::read_to_string(path)?;
    SolutionFile::from_json_str(&text, path)
}

pub const SPIKE_HEADER: &str = "time,node,sign";

pub fn write_spike_csv<W: Write>(mut out: W, spikes: &[SpikeEvent]) -> std::io::Result<()> {
    writeln!(out, "{SPIKE_HEADER}")?;
    for e in spikes {
        writeln!(out, "{},{},{}", fmt_f64(e.time), e.node, e.sign)?;
    }
    Ok(())
}

pub fn parse_spike_csv(text: &str, path: &Path) -> Result<Vec<SpikeEvent>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SPIKE_HEADER => {}
        _ => return Err(Error::malformed(path, 1, 1, format!("expected header {SPIKE_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |col: usize, what: &str| Error::malformed(path, i + 1, col, format!("bad {what} in {line:?}"));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(bad(1, "field count"));
        }
        let time: f64 = fields[0].parse().map_err(|_| bad(1, "time"))?;
        let node: usize = fields[1].parse().map_err(|_| bad(2, "node"))?;
        let sign: i8 = fields[2].parse().map_err(|_| bad(3, "sign"))?;
        if sign != 1 && sign != -1 {
            return Err(bad(3, "sign"));
        }
        out.push(SpikeEvent { time, node, sign });
    }
    Ok(out)
}

/// Writes `value` as pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes to `path` through a buffered writer.
pub fn write_with<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
{
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SolutionFile {
        SolutionFile {
            u: vec![0.1, -1.0 / 3.0, 0.0, 2.5e-17],
            lambda: 10.0,
            t_final: 10000.0,
            stop_reason: "max_iters".into(),
            rel_residual: Some(std::f64::consts::PI * 1e-5),
            l1: 0.1 + 1.0 / 3.0 + 2.5e-17,
            l0: 2,
            seed: 7,
            solver: "hda".into(),
        }
    }

    #[test]
    fn solution_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sol.json");
        write_solution(&p, &sample()).unwrap();
        let back = read_solution(&p).unwrap();
        assert_eq!(back, sample());
        assert_eq!(back.to_json(), std::fs::read_to_string(&p).unwrap());
    }

    #[test]
    fn missing_field_is_malformed() {
        let text = sample().to_json().replace("\"u\"", "\"v\"");
        let err = SolutionFile::from_json_str(&text, Path::new("x.json")).unwrap_err();
        match err {
            Error::MalformedFile { line, msg, .. } => {
                assert!(line >= 1);
                assert!(msg.contains("`u`"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spike_csv_round_trip() {
        let spikes = vec![
            SpikeEvent { time: 10.0, node: 3, sign: 1 },
            SpikeEvent { time: 12.345678901234567, node: 0, sign: -1 },
        ];
        let mut buf = Vec::new();
        write_spike_csv(&mut buf, &spikes).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,node,sign\n10.0,3,1\n"));
        assert_eq!(parse_spike_csv(&text, Path::new("s.csv")).unwrap(), spikes);
        let bad = text.replace(",-1", ",0");
        assert!(matches!(
            parse_spike_csv(&bad, Path::new("s.csv")),
            Err(Error::MalformedFile { line: 3, column: 3, .. })
        ));
    }
}
