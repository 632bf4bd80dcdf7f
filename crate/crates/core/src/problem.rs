//! Dictionaries, signals and synthetic sparse-recovery instances.

use std::ops::Deref;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Columns with norm below this are rejected by [`normalize_columns`].
pub const ZERO_COLUMN_TOL: f64 = 1e-14;

/// Smallest singular value below which a generated dictionary is reported as
/// (numerically) rank deficient.
pub const RANK_WARN_TOL: f64 = 1e-8;

/// Column-normalized `m × n` matrix with its cached Gram matrix `AᵀA`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl Dictionary {
    /// Normalizes the columns of `matrix`; see [`normalize_columns`].
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        normalize_columns(matrix)
    }

    pub fn rows(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn cols(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Feedforward input `Aᵀf`.
    pub fn drive(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.rows(), f.len())?;
        Ok(self.atoms.tr_mul(f))
    }

    /// `A u`.
    pub fn apply(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.cols(), u.len())?;
        Ok(&self.atoms * u)
    }

    /// Largest `|AᵢᵀAⱼ|` over `i ≠ j`.
    pub fn coherence(&self) -> f64 {
        let n = self.cols();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..j {
                worst = worst.max(self.gram[(i, j)].abs());
            }
        }
        worst
    }

    /// `σ_max(A)²`, the Lipschitz constant of `u ↦ Aᵀ(Au − f)`.
    pub fn spectral_norm_sq(&self) -> f64 {
        let s = self.atoms.singular_values();
        s.max().powi(2)
    }

    /// Smallest of the `min(m, n)` singular values of `A`.
    pub fn min_singular_value(&self) -> f64 {
        self.atoms.singular_values().min()
    }
}

/// Divides each column by its ℓ2 norm and caches `AᵀA`.
pub fn normalize_columns(mut matrix: DMatrix<f64>) -> Result<Dictionary> {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return Err(Error::InvalidDimensions("dictionary must be non-empty".into()));
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    for (j, mut col) in matrix.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm < ZERO_COLUMN_TOL {
            return Err(Error::ZeroColumn(j));
        }
        col /= norm;
    }
    let gram = matrix.tr_mul(&matrix);
    Ok(Dictionary { atoms: matrix, gram })
}

/// An observed (or clean) signal `f ∈ ℝᵐ` with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal(DVector<f64>);

impl Signal {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Signal(values))
    }

    pub fn zeros(m: usize) -> Self {
        Signal(DVector::zeros(m))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Signal::new(DVector::from_column_slice(values))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for Signal {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl std::ops::Neg for &Signal {
    type Output = Signal;

    fn neg(self) -> Signal {
        Signal(-&self.0)
    }
}

/// Sparse ground truth `u⁰`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub values: DVector<f64>,
    /// Sorted, distinct indices of the nonzero positions.
    pub support: Vec<usize>,
}

impl GroundTruth {
    pub fn nz(&self) -> usize {
        self.support.len()
    }

    /// Builds a ground truth from a dense vector; the support is every exact nonzero.
    pub fn from_dense(values: DVector<f64>) -> Self {
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(i, _)| i)
            .collect();
        GroundTruth { values, support }
    }
}

/// `(A, u⁰, f⁰ = A u⁰)` with the seed that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub dictionary: Dictionary,
    pub truth: GroundTruth,
    pub clean_signal: Signal,
    pub seed: u64,
}

/// Parameters of [`generate_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub m: usize,
    pub n: usize,
    pub nz: usize,
    pub amp_lo: f64,
    pub amp_hi: f64,
    pub seed: u64,
}

impl InstanceSpec {
    /// 64 × 128 dictionary with 10 nonzeros uniform on [-0.5, 0.5].
    pub fn recovery_default(seed: u64) -> Self {
        InstanceSpec {
            m: 64,
            n: 128,
            nz: 10,
            amp_lo: -0.5,
            amp_hi: 0.5,
            seed,
        }
    }

    pub fn generate(&self) -> Result<ProblemInstance> {
        generate_instance(self.m, self.n, self.nz, self.amp_lo, self.amp_hi, self.seed)
    }
}

/// Gaussian dictionary (column-normalized), `nz` uniformly placed nonzeros
/// with amplitudes uniform on `[amp_lo, amp_hi)`, and `f⁰ = A u⁰`.
///
/// The matrix is drawn column by column from one ChaCha8 stream, followed by
/// the support and then the amplitudes in increasing index order.
pub fn generate_instance(
    m: usize,
    n: usize,
    nz: usize,
    amp_lo: f64,
    amp_hi: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    if m == 0 || n == 0 || m > n {
        return Err(Error::InvalidDimensions(format!("need 0 < m <= n, got m = {m}, n = {n}")));
    }
    if nz == 0 || nz > n {
        return Err(Error::InvalidDimensions(format!("need 0 < nz <= n, got nz = {nz}, n = {n}")));
    }
    if !(amp_lo < amp_hi) || !amp_lo.is_finite() || !amp_hi.is_finite() {
        return Err(Error::InvalidDimensions(format!(
            "need finite amp_lo < amp_hi, got [{amp_lo}, {amp_hi}]"
        )));
    }

    let mut rng = rng::stream(seed, 0);
    let entries: Vec<f64> = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
    let dictionary = normalize_columns(DMatrix::from_vec(m, n, entries))?;

    let mut support = rand::seq::index::sample(&mut rng, n, nz).into_vec();
    support.sort_unstable();
    let mut values = DVector::zeros(n);
    for &i in &support {
        values[i] = rng.random_range(amp_lo..amp_hi);
    }
    let clean_signal = Signal(dictionary.matrix() * &values);

    let sigma_min = dictionary.min_singular_value();
    if sigma_min <= RANK_WARN_TOL {
        log::warn!("generated dictionary (seed {seed}) is numerically rank deficient: sigma_min = {sigma_min:e}");
    }

    Ok(ProblemInstance {
        dictionary,
        truth: GroundTruth { values, support },
        clean_signal,
        seed,
    })
}

/// `Aᵀf` for a signal; dimension-checked.
pub fn drive(dict: &Dictionary, f: &Signal) -> Result<DVector<f64>> {
    dict.drive(f)
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    m: usize,
    n: usize,
    seed: u64,
    #[serde(rename = "A")]
    a: MatrixField,
    u0: Vec<f64>,
    f0: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixField {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl ProblemInstance {
    /// JSON document `{ "m", "n", "seed", "A" (row-major), "u0", "f0" }`.
    pub fn to_json(&self) -> String {
        let a = self.dictionary.matrix();
        let mut flat = Vec::with_capacity(a.len());
        for i in 0..a.nrows() {
            flat.extend(a.row(i).iter().copied());
        }
        let file = InstanceFile {
            m: a.nrows(),
            n: a.ncols(),
            seed: self.seed,
            a: MatrixField::Flat(flat),
            u0: self.truth.values.iter().copied().collect(),
            f0: self.clean_signal.iter().copied().collect(),
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Reads an instance file. `A` may be a flat row-major array or an array
    /// of rows; its columns are re-normalized on load.
    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, path)
    }

    pub fn from_json_str(text: &str, path: &Path) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)
            .map_err(|e| Error::malformed(path, e.line(), e.column(), e.to_string()))?;
        let (m, n) = (file.m, file.n);
        let bad = |msg: String| Error::malformed(path, 0, 0, msg);
        let matrix = match file.a {
            MatrixField::Flat(v) => {
                if v.len() != m * n {
                    return Err(bad(format!("A has {} entries, expected {}", v.len(), m * n)));
                }
                DMatrix::from_row_slice(m, n, &v)
            }
            MatrixField::Rows(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != n) {
                    return Err(bad(format!("A must have {m} rows of {n} entries")));
                }
                DMatrix::from_fn(m, n, |i, j| rows[i][j])
            }
        };
        if file.u0.len() != n {
            return Err(bad(format!("u0 has {} entries, expected {n}", file.u0.len())));
        }
        if file.f0.len() != m {
            return Err(bad(format!("f0 has {} entries, expected {m}", file.f0.len())));
        }
        let dictionary = normalize_columns(matrix)?;
        Ok(ProblemInstance {
            dictionary,
            truth: GroundTruth::from_dense(DVector::from_vec(file.u0)),
            clean_signal: Signal::new(DVector::from_vec(file.f0))?,
            seed: file.seed,
        })
    }
}

/// Dense matrix from CSV text, one row per line. Blank lines are skipped.
pub fn parse_matrix_csv(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        let mut col = 1;
        for field in line.split(',') {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::malformed(path, lineno + 1, col, format!("not a number: {field:?}")))?;
            row.push(x);
            col += field.len() + 1;
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::malformed(
                    path,
                    lineno + 1,
                    1,
                    format!("row has {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::malformed(path, 1, 1, "empty matrix"));
    }
    let (m, n) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix_csv(&text, path)
}

/// Dictionary whose columns have unit norm exactly in floating point, so
/// that spike counts in small hand-checked examples are not perturbed.
#[cfg(test)]
pub(crate) fn exact_test_dictionary() -> Dictionary {
    Dictionary::new(DMatrix::from_column_slice(
        3,
        4,
        &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.6, 0.8, 0.0, 0.0, 0.6, -0.8],
    ))
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_is_unchanged() {
        let d = normalize_columns(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(d.matrix(), &DMatrix::identity(2, 2));
        assert_eq!(d.gram(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn three_four_five_column() {
        let d = normalize_columns(DMatrix::from_column_slice(2, 1, &[3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(d.matrix()[(0, 0)], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(d.matrix()[(1, 0)], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn zero_column_rejected() {
        let m = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(normalize_columns(m), Err(Error::ZeroColumn(1))));
    }

    #[test]
    fn generated_instance_matches_recovery_setup() {
        let inst = InstanceSpec::recovery_default(3).generate().unwrap();
        let d = &inst.dictionary;
        assert_eq!((d.rows(), d.cols()), (64, 128));
        assert_eq!(inst.truth.nz(), 10);
        for j in 0..d.cols() {
            assert!((d.matrix().column(j).norm() - 1.0).abs() <= 1e-12);
            assert!((d.gram()[(j, j)] - 1.0).abs() <= 1e-12);
        }
        assert!(d.coherence() < 1.0);
        let recomputed = d.matrix().tr_mul(d.matrix());
        assert!((recomputed - d.gram()).amax() <= 1e-12);
        for &i in &inst.truth.support {
            let a = inst.truth.values[i];
            assert!((-0.5..0.5).contains(&a) && a != 0.0);
        }
        let f = d.matrix() * &inst.truth.values;
        assert!((f - inst.clean_signal.values()).norm() <= 1e-12 * inst.clean_signal.norm());
    }

    #[test]
    fn dense_truth_when_nz_equals_n() {
        let inst = generate_instance(4, 6, 6, -1.0, 1.0, 9).unwrap();
        assert_eq!(inst.truth.support, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_instance(8, 16, 3, -0.5, 0.5, 42).unwrap();
        let b = generate_instance(8, 16, 3, -0.5, 0.5, 42).unwrap();
        let c = generate_instance(8, 16, 3, -0.5, 0.5, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_dimensions() {
        assert!(matches!(generate_instance(8, 4, 1, -1.0, 1.0, 0), Err(Error::InvalidDimensions(_))));
        assert!(matches!(generate_instance(4, 8, 0, -1.0, 1.0, 0), Err(Error::InvalidDimensions(_))));
        assert!(matches!(generate_instance(4, 8, 9, -1.0, 1.0, 0), Err(Error::InvalidDimensions(_))));
        assert!(matches!(generate_instance(4, 8, 2, 1.0, 1.0, 0), Err(Error::InvalidDimensions(_))));
    }

    #[test]
    fn drive_examples() {
        let id = Dictionary::new(DMatrix::identity(2, 2)).unwrap();
        let f = Signal::from_slice(&[0.3, 0.0]).unwrap();
        assert_eq!(drive(&id, &f).unwrap(), DVector::from_column_slice(&[0.3, 0.0]));
        assert_eq!(drive(&id, &Signal::zeros(2)).unwrap(), DVector::zeros(2));
        assert!(matches!(drive(&id, &Signal::zeros(3)), Err(Error::DimensionMismatch { .. })));

        let inst = generate_instance(16, 32, 2, -0.5, 0.5, 5).unwrap();
        let d = &inst.dictionary;
        for i in [0, 7, 31] {
            let f = Signal::new(d.matrix().column(i).into_owned()).unwrap();
            let b = drive(d, &f).unwrap();
            assert!((b[i] - 1.0).abs() <= 1e-12);
            for j in (0..32).filter(|&j| j != i) {
                assert!(b[j].abs() < 1.0);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let inst = generate_instance(5, 9, 2, -0.5, 0.5, 11).unwrap();
        let back = ProblemInstance::from_json_str(&inst.to_json(), Path::new("mem")).unwrap();
        assert_eq!(back.seed, 11);
        assert_eq!(back.truth, inst.truth);
        assert_eq!(back.clean_signal, inst.clean_signal);
        assert!((back.dictionary.matrix() - inst.dictionary.matrix()).amax() <= 1e-15);
    }

    #[test]
    fn json_errors_are_located() {
        let err = ProblemInstance::from_json_str("{\n \"m\": 1,\n \"n\": }", Path::new("x.json")).unwrap_err();
        assert!(matches!(err, Error::MalformedFile { line: 3, .. }), "{err}");
    }

    #[test]
    fn csv_matrix() {
        let m = parse_matrix_csv("1, 2,3\n4,5,6\n\n", Path::new("a.csv")).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        assert!(matches!(
            parse_matrix_csv("1,2\n3\n", Path::new("a.csv")),
            Err(Error::MalformedFile { line: 2, .. })
        ));
        assert!(matches!(
            parse_matrix_csv("1,x\n", Path::new("a.csv")),
            Err(Error::MalformedFile { line: 1, column: 3, .. })
        ));
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(entries in proptest::collection::vec(-10.0f64..10.0, 12)) {
            let mut m = DMatrix::from_vec(3, 4, entries);
            for j in 0..4 {
                m[(j % 3, j)] += 11.0;
            }
            let once = normalize_columns(m).unwrap();
            let twice = normalize_columns(once.matrix().clone()).unwrap();
            prop_assert!((once.matrix() - twice.matrix()).amax() <= 1e-12);
            let g = once.gram();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((g[(i, j)] - g[(j, i)]).abs() <= 1e-14);
                }
            }
        }
    }
}
