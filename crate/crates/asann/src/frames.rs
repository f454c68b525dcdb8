//! Projection matrices shared by coding and search, plus PCA preprocessing.
//!
//! Two constructions are provided for the d×m matrix `A`:
//!
//! - [`make_random_gaussian`]: i.i.d. standard normal entries;
//! - [`make_uniform_frame`]: the first `d` rows of the orthogonal factor of a
//!   QR decomposition of a random m×m Gaussian matrix, so that `A·Aᵀ = I_d`.
//!
//! Randomness comes from a ChaCha20 stream keyed by the caller's 64-bit seed,
//! with normal variates drawn via `rand_distr::StandardNormal` and matrices
//! filled in row-major order; identical `(d, m, seed, kind)` inputs therefore
//! reproduce bit-identical matrices on every platform. QR sign ambiguity is
//! removed by forcing the diagonal of `R` positive.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Relative singular-value threshold below which a matrix counts as
/// rank-deficient.
const RANK_TOL: f64 = 1e-10;

/// Max deviation allowed in the frame property `A·Aᵀ = I_d`.
const FRAME_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("invalid dimensions: d = {d}, m = {m} (need 1 <= d <= m)")]
    InvalidDimensions { d: usize, m: usize },
    #[error("vector length {got} does not match expected dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("requested output dimension {d_out} exceeds input dimension {dim}")]
    OutputDimTooLarge { d_out: usize, dim: usize },
    #[error("insufficient data: covariance rank {rank} < requested {d_out} components")]
    InsufficientData { rank: usize, d_out: usize },
    #[error("random draw produced a rank-deficient matrix for every retry seed")]
    RankDeficientDraw,
}

/// How a [`ProjectionMatrix`] was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MatrixKind {
    RandomGaussian,
    UniformFrame,
}

impl MatrixKind {
    /// Short lowercase tag used in identifiers, CSV rows and CLI flags.
    pub fn tag(&self) -> &'static str {
        match self {
            MatrixKind::RandomGaussian => "gauss",
            MatrixKind::UniformFrame => "frame",
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gauss" | "gaussian" => Ok(MatrixKind::RandomGaussian),
            "frame" => Ok(MatrixKind::UniformFrame),
            other => Err(format!("unknown matrix kind '{other}' (expected gauss|frame)")),
        }
    }
}

/// A full-rank d×m projection matrix (m ≥ d) with its construction metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    entries: DMatrix<f64>,
    kind: MatrixKind,
    seed: u64,
}

impl ProjectionMatrix {
    /// Wraps an explicit matrix, enforcing the type invariants (finite
    /// entries, full rank, and `A·Aᵀ = I` for uniform frames).
    pub fn from_matrix(entries: DMatrix<f64>, kind: MatrixKind, seed: u64) -> Result<Self, FrameError> {
        let (d, m) = (entries.nrows(), entries.ncols());
        if d == 0 || m < d {
            return Err(FrameError::InvalidDimensions { d, m });
        }
        if entries.iter().any(|v| !v.is_finite()) || !is_full_rank(&entries) {
            return Err(FrameError::RankDeficientDraw);
        }
        if kind == MatrixKind::UniformFrame {
            let dev = frame_deviation(&entries);
            if dev > FRAME_TOL {
                return Err(FrameError::RankDeficientDraw);
            }
        }
        Ok(Self { entries, kind, seed })
    }

    pub fn d(&self) -> usize {
        self.entries.nrows()
    }

    pub fn m(&self) -> usize {
        self.entries.ncols()
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Column `j` as a contiguous slice of length `d`.
    pub fn column(&self, j: usize) -> &[f64] {
        let d = self.d();
        &self.entries.as_slice()[j * d..(j + 1) * d]
    }

    /// Identifier binding indexes and sidecars to the matrix that encoded them.
    pub fn ref_id(&self) -> String {
        format!("{}-d{}-m{}-seed{}", self.kind.tag(), self.d(), self.m(), self.seed)
    }

    /// Computes `Aᵀy`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>, FrameError> {
        if y.len() != self.d() {
            return Err(FrameError::DimensionMismatch { expected: self.d(), got: y.len() });
        }
        let yv = DVector::from_column_slice(y);
        Ok(self.entries.tr_mul(&yv).as_slice().to_vec())
    }
}

fn is_full_rank(a: &DMatrix<f64>) -> bool {
    let sv = a.clone().singular_values();
    let largest = sv.max();
    let smallest = sv.min();
    largest > 0.0 && smallest > RANK_TOL * largest
}

/// Max absolute entry of `A·Aᵀ − I_d`.
fn frame_deviation(a: &DMatrix<f64>) -> f64 {
    let gram = a * a.transpose();
    let d = a.nrows();
    let mut dev = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((gram[(i, j)] - target).abs());
        }
    }
    dev
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    // Row-major draw order; nalgebra stores column-major internally.
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Draws a d×m matrix with i.i.d. standard normal entries.
///
/// A rank-deficient draw (measure zero) is retried with `seed + 1` so the
/// output stays a deterministic function of the arguments.
pub fn make_random_gaussian(d: usize, m: usize, seed: u64) -> Result<ProjectionMatrix, FrameError> {
    if d == 0 || m < d {
        return Err(FrameError::InvalidDimensions { d, m });
    }
    let mut s = seed;
    for _ in 0..16 {
        let mut rng = ChaCha20Rng::seed_from_u64(s);
        let a = gaussian_matrix(d, m, &mut rng);
        if is_full_rank(&a) {
            return Ok(ProjectionMatrix { entries: a, kind: MatrixKind::RandomGaussian, seed });
        }
        s = s.wrapping_add(1);
    }
    Err(FrameError::RankDeficientDraw)
}

/// Builds a uniform frame: the first `d` rows of the orthogonal factor `Q`
/// of a seeded random m×m Gaussian matrix, giving `A·Aᵀ = I_d`.
///
/// `Q` is made unique by flipping columns so the diagonal of `R` is positive.
pub fn make_uniform_frame(d: usize, m: usize, seed: u64) -> Result<ProjectionMatrix, FrameError> {
    if d == 0 || m < d {
        return Err(FrameError::InvalidDimensions { d, m });
    }
    let mut s = seed;
    for _ in 0..16 {
        let mut rng = ChaCha20Rng::seed_from_u64(s);
        let raw = gaussian_matrix(m, m, &mut rng);
        let (mut q, r) = raw.qr().unpack();
        for j in 0..m {
            if r[(j, j)] < 0.0 {
                for i in 0..m {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        let a = q.rows(0, d).into_owned();
        if is_full_rank(&a) && frame_deviation(&a) <= FRAME_TOL {
            return Ok(ProjectionMatrix { entries: a, kind: MatrixKind::UniformFrame, seed });
        }
        s = s.wrapping_add(1);
    }
    Err(FrameError::RankDeficientDraw)
}

/// A fitted PCA reduction: projection onto the top principal directions of
/// the centered training covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: DVector<f64>,
    /// d_out×D; rows are orthonormal principal directions, by non-increasing
    /// eigenvalue.
    basis: DMatrix<f64>,
}

impl PcaModel {
    pub fn from_parts(mean: DVector<f64>, basis: DMatrix<f64>) -> Self {
        Self { mean, basis }
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }
}

/// Fits a PCA model on training rows: mean-centering followed by projection
/// onto the top `d_out` eigenvectors of the sample covariance.
///
/// Eigenvector sign is fixed so the largest-magnitude coordinate of each row
/// is positive. Rows are ordered by non-increasing eigenvalue.
pub fn pca_fit<R: AsRef<[f64]>>(training: &[R], d_out: usize) -> Result<PcaModel, FrameError> {
    let n = training.len();
    if n == 0 || d_out == 0 {
        return Err(FrameError::InsufficientData { rank: 0, d_out });
    }
    let dim = training[0].as_ref().len();
    if d_out > dim {
        return Err(FrameError::OutputDimTooLarge { d_out, dim });
    }
    for row in training {
        if row.as_ref().len() != dim {
            return Err(FrameError::DimensionMismatch { expected: dim, got: row.as_ref().len() });
        }
    }

    let mut mean = DVector::zeros(dim);
    for row in training {
        for (acc, &v) in mean.iter_mut().zip(row.as_ref()) {
            *acc += v;
        }
    }
    mean /= n as f64;

    // Covariance accumulated in fixed chunks so the result is independent of
    // the worker count.
    let chunks: Vec<&[R]> = training.chunks(1024).collect();
    let partials = crate::exec::map(&chunks, |chunk| {
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        let mut centered = DVector::<f64>::zeros(dim);
        for row in chunk.iter() {
            for ((c, &v), mu) in centered.iter_mut().zip(row.as_ref()).zip(mean.iter()) {
                *c = v - mu;
            }
            cov.syger(1.0, &centered, &centered, 1.0);
        }
        cov
    });
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for p in partials {
        cov += p;
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    cov /= denom;

    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let rank = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > RANK_TOL * lambda_max && eig.eigenvalues[i] > 0.0)
        .count();
    if rank < d_out {
        return Err(FrameError::InsufficientData { rank, d_out });
    }

    let mut basis = DMatrix::<f64>::zeros(d_out, dim);
    for (r, &idx) in order.iter().take(d_out).enumerate() {
        let col = eig.eigenvectors.column(idx);
        // Deterministic sign: largest-magnitude coordinate positive, first
        // index winning ties.
        let mut pivot = 0;
        for i in 1..dim {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..dim {
            basis[(r, i)] = flip * col[i];
        }
    }
    Ok(PcaModel { mean, basis })
}

/// Applies a fitted model: `basis·(y − mean)`. No renormalization.
pub fn pca_apply(model: &PcaModel, y: &[f64]) -> Result<Vec<f64>, FrameError> {
    if y.len() != model.input_dim() {
        return Err(FrameError::DimensionMismatch { expected: model.input_dim(), got: y.len() });
    }
    let centered = DVector::from_iterator(y.len(), y.iter().zip(model.mean.iter()).map(|(&v, &mu)| v - mu));
    Ok((&model.basis * centered).as_slice().to_vec())
}

/// Applies a fitted model to every row of a batch.
pub fn pca_apply_batch<R: AsRef<[f64]> + Sync>(model: &PcaModel, rows: &[R]) -> Result<Vec<Vec<f64>>, FrameError> {
    for row in rows {
        if row.as_ref().len() != model.input_dim() {
            return Err(FrameError::DimensionMismatch { expected: model.input_dim(), got: row.as_ref().len() });
        }
    }
    Ok(crate::exec::map(rows, |row| {
        pca_apply(model, row.as_ref()).expect("dimensions pre-checked")
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn gaussian_1x1_is_nonzero() {
        let a = make_random_gaussian(1, 1, 42).unwrap();
        assert_eq!((a.d(), a.m()), (1, 1));
        assert!(a.matrix()[(0, 0)] != 0.0);
    }

    #[test]
    fn gaussian_is_deterministic() {
        let a = make_random_gaussian(16, 64, 0).unwrap();
        let b = make_random_gaussian(16, 64, 0).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        let c = make_random_gaussian(16, 64, 1).unwrap();
        assert_ne!(a.matrix(), c.matrix());
    }

    #[test]
    fn gaussian_moments_match_law_of_large_numbers() {
        let a = make_random_gaussian(16, 64, 0).unwrap();
        let n = (16 * 64) as f64;
        let mean: f64 = a.matrix().iter().sum::<f64>() / n;
        let var: f64 = a.matrix().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() <= 4.0 / n.sqrt(), "sample mean {mean}");
        assert!((var - 1.0).abs() <= 0.2, "sample variance {var}");
    }

    #[test]
    fn invalid_dimensions_are_rejected() {
        assert!(matches!(make_random_gaussian(0, 4, 0), Err(FrameError::InvalidDimensions { .. })));
        assert!(matches!(make_random_gaussian(4, 3, 0), Err(FrameError::InvalidDimensions { .. })));
        assert!(matches!(make_uniform_frame(5, 4, 0), Err(FrameError::InvalidDimensions { .. })));
    }

    #[test]
    fn square_frame_is_orthogonal() {
        let a = make_uniform_frame(4, 4, 7).unwrap();
        let q = a.matrix();
        let qtq = q.transpose() * q;
        let qqt = q * q.transpose();
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - target).abs() <= 1e-10);
                assert!((qqt[(i, j)] - target).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn frame_satisfies_tight_frame_property() {
        let a = make_uniform_frame(16, 64, 3).unwrap();
        assert!(frame_deviation(a.matrix()) <= 1e-10);
        // trace(AᵀA) = trace(A·Aᵀ) = d
        let sum_sq: f64 = a.matrix().iter().map(|v| v * v).sum();
        assert!((sum_sq - 16.0).abs() <= 1e-8);
    }

    #[test]
    fn frame_is_deterministic() {
        let a = make_uniform_frame(16, 64, 3).unwrap();
        let b = make_uniform_frame(16, 64, 3).unwrap();
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn rank_check_rejects_degenerate_matrix() {
        // Two identical rows: rank 1 < 2.
        let bad = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        assert!(!is_full_rank(&bad));
        assert!(ProjectionMatrix::from_matrix(bad, MatrixKind::RandomGaussian, 0).is_err());
    }

    #[test]
    fn pca_recovers_exact_subspace() {
        // Points in a 2-dim affine subspace of R^5.
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let offset = [0.5, -1.0, 2.0, 0.0, 3.0];
        let dir1 = [1.0, 0.0, 1.0, 0.0, 0.0];
        let dir2 = [0.0, 1.0, 0.0, 1.0, 0.0];
        let training: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let (s, t): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (0..5).map(|i| offset[i] + s * dir1[i] + t * dir2[i]).collect()
            })
            .collect();
        let model = pca_fit(&training, 2).unwrap();
        for row in &training {
            let proj = pca_apply(&model, row).unwrap();
            let recon = model.mean() + model.basis().transpose() * DVector::from_column_slice(&proj);
            for i in 0..5 {
                assert!((recon[i] - row[i]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn full_dimensional_pca_preserves_distances() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let training: Vec<Vec<f64>> = (0..40).map(|_| (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let model = pca_fit(&training, 5).unwrap();
        let p0 = pca_apply(&model, &training[0]).unwrap();
        let p1 = pca_apply(&model, &training[1]).unwrap();
        let orig: f64 = training[0].iter().zip(&training[1]).map(|(a, b)| (a - b) * (a - b)).sum();
        let proj: f64 = p0.iter().zip(&p1).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!((orig.sqrt() - proj.sqrt()).abs() <= 1e-8);
    }

    #[test]
    fn pca_dominant_direction_matches_closed_form() {
        // Cloud along (t, 2t): leading eigenvector ±(1,2)/√5.
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let training: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                let t: f64 = rng.gen_range(-1.0..1.0);
                let n1: f64 = rng.sample::<f64, _>(StandardNormal);
                let n2: f64 = rng.sample::<f64, _>(StandardNormal);
                vec![t + 0.01 * n1, 2.0 * t + 0.01 * n2]
            })
            .collect();
        let model = pca_fit(&training, 1).unwrap();
        let row = [model.basis()[(0, 0)], model.basis()[(0, 1)]];
        let expected = [1.0 / 5.0f64.sqrt(), 2.0 / 5.0f64.sqrt()];
        let dot = (row[0] * expected[0] + row[1] * expected[1]).abs();
        assert!(dot.min(1.0).acos() <= 1e-2, "angular distance too large: cos = {dot}");
    }

    #[test]
    fn pca_centering_and_orthonormality() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let training: Vec<Vec<f64>> = (0..50).map(|_| (0..6).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let model = pca_fit(&training, 3).unwrap();
        // y = mean -> zero projection
        let mean_vec: Vec<f64> = model.mean().as_slice().to_vec();
        let proj = pca_apply(&model, &mean_vec).unwrap();
        assert!(proj.iter().all(|v| v.abs() <= 1e-10));
        // y = mean + basis row 0 -> e1
        let shifted: Vec<f64> = mean_vec.iter().enumerate().map(|(i, &v)| v + model.basis()[(0, i)]).collect();
        let proj = pca_apply(&model, &shifted).unwrap();
        assert!((proj[0] - 1.0).abs() <= 1e-10);
        assert!(proj[1..].iter().all(|v| v.abs() <= 1e-10));
        // basis rows orthonormal
        let gram = model.basis() * model.basis().transpose();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - target).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn pca_apply_is_affine() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let training: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let model = pca_fit(&training, 2).unwrap();
        let y1: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y2: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let lhs: Vec<f64> = pca_apply(&model, &y1)
            .unwrap()
            .iter()
            .zip(pca_apply(&model, &y2).unwrap())
            .map(|(a, b)| a - b)
            .collect();
        let diff: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - b).collect();
        let rhs = model.basis() * DVector::from_column_slice(&diff);
        for i in 0..2 {
            assert!((lhs[i] - rhs[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn pca_insufficient_data_is_reported() {
        // 3 points in R^4 span at most rank 2.
        let training = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0, 0.0]];
        assert!(matches!(pca_fit(&training, 3), Err(FrameError::InsufficientData { .. })));
        assert!(matches!(pca_fit(&training, 5), Err(FrameError::OutputDimTooLarge { .. })));
    }
}
