//! Exhaustive basis-pursuit oracle for small dictionaries and a Lasso
//! optimality checker.
//!
//! Every vertex of the basis-pursuit feasible set is supported on at most `m`
//! linearly independent columns, so enumerating supports of size `≤ m` and
//! solving each restricted least-squares problem finds the minimum. Two
//! distinct minimizers among the candidates mean the minimum is not unique.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{check_len, Dictionary, Signal};

/// Largest `n` the exhaustive search accepts.
pub const MAX_ORACLE_N: usize = 14;

/// Relative tolerance under which two candidate ℓ1 norms count as equal.
const L1_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub u_star: DVector<f64>,
    pub l1: f64,
    pub support: Vec<usize>,
    pub feasible: bool,
    /// False when another feasible candidate attains the same ℓ1 norm.
    pub unique: bool,
}

/// `1e-9 · (1 + ‖f‖₂)`.
pub fn default_feas_tol(f: &Signal) -> f64 {
    1e-9 * (1.0 + f.norm())
}

fn restricted_lsq(a: &DMatrix<f64>, support: &[usize], f: &DVector<f64>) -> Option<DVector<f64>> {
    let sub = a.select_columns(support);
    sub.svd(true, true).solve(f, 1e-12).ok()
}

/// Calls `visit` with every subset of `0..n` of size `k`, in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(pos) = (0..k).rev().find(|&p| idx[p] < n - k + p) else {
            return;
        };
        idx[pos] += 1;
        for p in pos + 1..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
}

/// Minimum-ℓ1 solution of `Au = f` by support enumeration. Ties go to the
/// smaller support, then the lexicographically first one.
pub fn oracle_basis_pursuit(dict: &Dictionary, f: &Signal, feas_tol: f64) -> Result<OracleSolution> {
    let (m, n) = (dict.rows(), dict.cols());
    if n > MAX_ORACLE_N {
        return Err(Error::TooLarge { n, max: MAX_ORACLE_N });
    }
    check_len(m, f.len())?;
    let a = dict.matrix();
    let fv = f.values();

    let mut best: Option<(f64, Vec<usize>, DVector<f64>)> = None;
    let mut feasible: Vec<(f64, DVector<f64>)> = Vec::new();
    if fv.norm() <= feas_tol {
        best = Some((0.0, Vec::new(), DVector::zeros(n)));
        feasible.push((0.0, DVector::zeros(n)));
    }
    for k in 1..=m.min(n) {
        for_each_subset(n, k, |support| {
            let Some(x) = restricted_lsq(a, support, fv) else {
                return;
            };
            let mut u = DVector::zeros(n);
            for (&i, &xi) in support.iter().zip(x.iter()) {
                u[i] = xi;
            }
            if (a * &u - fv).norm() > feas_tol {
                return;
            }
            let l1 = u.lp_norm(1);
            let better = match &best {
                None => true,
                Some((b, _, _)) => l1 < b - L1_TIE_TOL * b.max(1.0),
            };
            if better {
                best = Some((l1, support.to_vec(), u.clone()));
            }
            feasible.push((l1, u));
        });
    }
    let Some((l1, support, u_star)) = best else {
        return Err(Error::Infeasible { max_support: m.min(n) });
    };
    let tie = L1_TIE_TOL * l1.max(1.0);
    let vec_tol = 1e-7 * u_star.norm().max(1.0);
    let unique = !feasible
        .iter()
        .any(|(c, u)| (c - l1).abs() <= tie && (u - &u_star).norm() > vec_tol);
    // report the support actually used by the minimizer
    let support = support.into_iter().filter(|&i| u_star[i] != 0.0).collect();
    Ok(OracleSolution {
        feasible: true,
        u_star,
        l1,
        support,
        unique,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktViolation {
    pub index: usize,
    /// `Aᵢᵀ(f − Au)`.
    pub correlation: f64,
    /// Distance from the admissible value or interval.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub optimal: bool,
    pub violations: Vec<KktViolation>,
}

/// Optimality check for `½‖Au − f‖₂² + λ‖u‖₁`: on the support the residual
/// correlation must equal `λ·sign(u_i)`, elsewhere lie in `[-λ, λ]`.
pub fn verify_lasso_kkt(u: &DVector<f64>, dict: &Dictionary, f: &Signal, lambda: f64, kkt_tol: f64) -> Result<KktReport> {
    check_len(dict.cols(), u.len())?;
    let r = f.values() - dict.apply(u)?;
    let corr = dict.drive(&r)?;
    let violations: Vec<KktViolation> = corr
        .iter()
        .zip(u.iter())
        .enumerate()
        .filter_map(|(index, (&c, &ui))| {
            let excess = if ui != 0.0 {
                (c - lambda * ui.signum()).abs()
            } else {
                (c.abs() - lambda).max(0.0)
            };
            (excess > kkt_tol).then_some(KktViolation {
                index,
                correlation: c,
                excess,
            })
        })
        .collect();
    Ok(KktReport {
        optimal: violations.is_empty(),
        violations,
    })
}
