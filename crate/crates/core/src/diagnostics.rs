//! Residuals, the spike-average energy, sparsity counts, decay-rate fits,
//! communication accounting and solution comparison.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Dictionary;

/// One diagnostic sample of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Iteration count, or continuous time for the event-driven solver.
    pub t: f64,
    /// `‖f⁰ − Au‖₂` against the reference (clean) signal.
    pub residual: f64,
    /// `residual / ‖f⁰‖₂`; NaN for a zero reference signal.
    pub rel_residual: f64,
    pub energy: f64,
    pub l1: f64,
    pub l0: usize,
    /// Cumulative ternary spike events.
    pub comm_events: u64,
    /// Cumulative full-precision scalar broadcasts.
    pub analog_msgs: u64,
    /// `‖f − Au‖₂` against the signal the solver integrates when that signal
    /// is constant (static noise); equal to `residual` otherwise. Not written
    /// to trace files.
    #[serde(skip)]
    pub signal_residual: f64,
}

/// Relative differences between two solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `‖u_a − u_b‖₂² / ‖u_b‖₂²`.
    pub rel_mse: f64,
    /// `|‖u_a‖₁ − ‖u_b‖₁| / ‖u_b‖₁`.
    pub rel_l1_diff: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommCost {
    pub spike_events: u64,
    pub analog_msgs: u64,
}

/// `E(t) = ‖f − λA s̄‖₂² + (λ²/t)‖s̄‖₁` with `s̄ = spike_sum / t`.
pub fn energy(spike_sum: &DVector<f64>, t: f64, dict: &Dictionary, f: &DVector<f64>, lambda: f64) -> f64 {
    debug_assert!(t > 0.0);
    let mean = spike_sum / t;
    let fit = f - dict.matrix() * &mean * lambda;
    fit.norm_squared() + lambda * lambda / t * mean.lp_norm(1)
}

/// The same energy written in terms of `u = λ s̄`:
/// `‖f − Au‖₂² + (λ/t)‖u‖₁`.
pub fn energy_of_solution(u: &DVector<f64>, t: f64, dict: &Dictionary, f: &DVector<f64>, lambda: f64) -> f64 {
    debug_assert!(t > 0.0);
    let fit = f - dict.matrix() * u;
    fit.norm_squared() + lambda / t * u.lp_norm(1)
}

/// `(‖f − Au‖₂, ‖f − Au‖₂ / ‖f‖₂)`.
pub fn residuals(u: &DVector<f64>, dict: &Dictionary, f: &DVector<f64>) -> Result<(f64, f64)> {
    let r = (f - dict.apply(u)?).norm();
    let scale = f.norm();
    if scale == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok((r, r / scale))
}

/// Zero tolerance used when counting nonzeros: `1e-6 · max(1, ‖u‖∞)`.
pub fn l0_tolerance(u: &DVector<f64>) -> f64 {
    1e-6 * u.amax().max(1.0)
}

pub fn l0(u: &DVector<f64>) -> usize {
    let tol = l0_tolerance(u);
    u.iter().filter(|x| x.abs() > tol).count()
}

pub const MIN_SLOPE_SAMPLES: usize = 8;

/// Least-squares slope of `ln y` against `ln t` over samples with
/// `t ∈ [t_min, t_max]` and `y > 0`.
pub fn fit_loglog_slope(samples: &[(f64, f64)], t_min: f64, t_max: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(t, y)| *t >= t_min && *t <= t_max && *t > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < MIN_SLOPE_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SLOPE_SAMPLES,
            got: pts.len(),
        });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in &pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData {
            needed: MIN_SLOPE_SAMPLES,
            got: 1,
        });
    }
    Ok(sxy / sxx)
}

/// `(t, rel_residual)` pairs of a trace.
pub fn rel_residual_series(trace: &[TraceRecord]) -> Vec<(f64, f64)> {
    trace.iter().map(|r| (r.t, r.rel_residual)).collect()
}

/// Cumulative communication at the end of a trace.
pub fn comm_cost(trace: &[TraceRecord]) -> CommCost {
    trace
        .last()
        .map(|r| CommCost {
            spike_events: r.comm_events,
            analog_msgs: r.analog_msgs,
        })
        .unwrap_or_default()
}

/// Cumulative communication at the first sample whose relative residual is
/// at most `target`, or `None` if the trace never gets there.
pub fn comm_cost_at_residual(trace: &[TraceRecord], target: f64) -> Option<(f64, CommCost)> {
    trace.iter().find(|r| r.rel_residual <= target).map(|r| {
        (
            r.t,
            CommCost {
                spike_events: r.comm_events,
                analog_msgs: r.analog_msgs,
            },
        )
    })
}

pub fn compare(u_a: &DVector<f64>, u_b: &DVector<f64>) -> Result<ComparisonReport> {
    if u_a.len() != u_b.len() {
        return Err(Error::DimensionMismatch {
            expected: u_b.len(),
            got: u_a.len(),
        });
    }
    let ref_sq = u_b.norm_squared();
    let ref_l1 = u_b.lp_norm(1);
    if ref_sq == 0.0 || ref_l1 == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(ComparisonReport {
        rel_mse: (u_a - u_b).norm_squared() / ref_sq,
        rel_l1_diff: (u_a.lp_norm(1) - ref_l1).abs() / ref_l1,
    })
}

/// `‖u_a − u_b‖₂ / ‖u_b‖₂`.
pub fn rel_l2(u_a: &DVector<f64>, u_b: &DVector<f64>) -> Result<f64> {
    compare(u_a, u_b).map(|c| c.rel_mse.sqrt())
}

pub const TRACE_HEADER: &str = "t,residual,rel_residual,energy,l1,l0,spikes_cum,analog_msgs_cum";

/// Shortest decimal representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_trace_csv<W: Write>(mut out: W, trace: &[TraceRecord]) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.residual),
            fmt_f64(r.rel_residual),
            fmt_f64(r.energy),
            fmt_f64(r.l1),
            r.l0,
            r.comm_events,
            r.analog_msgs
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::generate_instance;

    fn series(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (1..=40).map(|k| 10f64.powf(k as f64 / 10.0)).map(|t| (t, f(t))).collect()
    }

    #[test]
    fn slope_of_exact_power_laws() {
        assert!((fit_loglog_slope(&series(|t| 7.0 / t), 1.0, 1e4).unwrap() + 1.0).abs() < 1e-9);
        assert!((fit_loglog_slope(&series(|t| 3.0 / t.sqrt()), 1.0, 1e4).unwrap() + 0.5).abs() < 1e-9);
        assert!(fit_loglog_slope(&series(|_| 2.5), 1.0, 1e4).unwrap().abs() < 1e-9);
    }

    #[test]
    fn slope_needs_enough_samples() {
        let s = series(|t| 1.0 / t);
        assert!(matches!(
            fit_loglog_slope(&s, 1.0, 5.0),
            Err(Error::InsufficientData { got: 6, .. })
        ));
        let zeros: Vec<_> = s.iter().map(|(t, _)| (*t, 0.0)).collect();
        assert!(fit_loglog_slope(&zeros, 1.0, 1e4).is_err());
    }

    #[test]
    fn energy_examples() {
        let inst = generate_instance(6, 10, 3, -0.5, 0.5, 1).unwrap();
        let d = &inst.dictionary;
        let lambda = 10.0;
        let t = 100.0;
        // normalize u0 to unit l1 so that the penalty term is exactly 0.1
        let u0 = &inst.truth.values / inst.truth.values.lp_norm(1);
        let f = d.matrix() * &u0;
        let spike_sum = &u0 / lambda * t;
        let e = energy(&spike_sum, t, d, &f, lambda);
        assert!((e - 0.1).abs() < 1e-12, "{e}");
        let e0 = energy(&DVector::zeros(10), t, d, &f, lambda);
        assert!((e0 - f.norm_squared()).abs() < 1e-15);
        let via_u = energy_of_solution(&u0, t, d, &f, lambda);
        assert!((via_u - e).abs() < 1e-12);
    }

    #[test]
    fn residual_examples() {
        let inst = generate_instance(6, 10, 3, -0.5, 0.5, 2).unwrap();
        let f = inst.clean_signal.values();
        let (r, rr) = residuals(&inst.truth.values, &inst.dictionary, f).unwrap();
        assert!(r < 1e-10 && rr < 1e-10);
        let (r, rr) = residuals(&DVector::zeros(10), &inst.dictionary, f).unwrap();
        assert_eq!((r, rr), (f.norm(), 1.0));
        assert!(matches!(
            residuals(&DVector::zeros(10), &inst.dictionary, &DVector::zeros(6)),
            Err(Error::ZeroSignal)
        ));
    }

    #[test]
    fn compare_examples() {
        let b = DVector::from_column_slice(&[0.5, 0.0, -0.25]);
        let same = compare(&b, &b).unwrap();
        assert_eq!((same.rel_mse, same.rel_l1_diff), (0.0, 0.0));
        let double = compare(&(&b * 2.0), &b).unwrap();
        assert!((double.rel_mse - 1.0).abs() < 1e-15 && (double.rel_l1_diff - 1.0).abs() < 1e-15);
        assert!(matches!(compare(&b, &DVector::zeros(3)), Err(Error::ZeroReference)));
    }

    #[test]
    fn l0_counts_above_tolerance() {
        let u = DVector::from_column_slice(&[2.0, 1e-7, -3e-6, 0.0]);
        assert_eq!(l0(&u), 2);
        assert_eq!(l0(&DVector::zeros(4)), 0);
    }

    #[test]
    fn trace_csv_layout() {
        let rec = TraceRecord {
            t: 10.0,
            residual: 0.5,
            rel_residual: 0.25,
            energy: 1e-7,
            l1: 1.5,
            l0: 2,
            comm_events: 3,
            analog_msgs: 0,
            signal_residual: 0.5,
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("{TRACE_HEADER}\n10.0,0.5,0.25,1e-7,1.5,2,3,0\n"));
    }

    #[test]
    fn comm_cost_reads_last_record() {
        assert_eq!(comm_cost(&[]), CommCost::default());
    }
}
