//! Probabilistic matrix factorization of the familiarity matrix.
//!
//! `M ≈ Wᵀ L` with `W` (d × workers) and `L` (d × landmarks). Maximizing the
//! posterior under Gaussian noise and zero-mean Gaussian priors is the same as
//! minimizing
//!
//! ```text
//! Σ_ij I_ij (M_ij − W_iᵀ L_j)² + λ_W Σ_i ‖W_i‖² + λ_L Σ_j ‖L_j‖²
//! ```
//!
//! where `I_ij` marks the stored (non-zero) cells of `M`. Training is
//! full-batch gradient descent that halves the step size whenever a step
//! would increase the objective and grows it slightly after each accepted one.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FamiliarityMatrix, WorkerId};
use crate::error::PmfError;
use crate::landmark::LandmarkId;

const INIT_STD: f64 = 0.1;
const MIN_LR: f64 = 1e-30;
const LR_GROWTH: f64 = 1.05;
const RANK_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PmfParams {
    /// Latent dimension.
    pub d: usize,
    pub lambda_w: f64,
    pub lambda_l: f64,
    pub lr: f64,
    pub max_iters: usize,
    /// Stop once an accepted step improves the objective by less than this fraction.
    pub tol: f64,
    pub seed: u64,
}

impl Default for PmfParams {
    fn default() -> Self {
        Self { d: 8, lambda_w: 0.05, lambda_l: 0.05, lr: 0.005, max_iters: 5000, tol: 1e-8, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: usize,
    /// Objective after initialization and after every accepted step.
    pub objective_history: Vec<f64>,
    pub final_objective: f64,
    pub gradient_norm: f64,
    pub final_lr: f64,
    /// Singular values of `Wᵀ L` above 1e-6.
    pub effective_rank: usize,
}

/// Dense matrix in row-major order, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixRecord {
    fn from(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).flat_map(|r| m.row(r).iter().copied().collect::<Vec<_>>()).collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl TryFrom<MatrixRecord> for DMatrix<f64> {
    type Error = PmfError;

    fn try_from(r: MatrixRecord) -> Result<Self, Self::Error> {
        if r.data.len() != r.rows * r.cols {
            return Err(PmfError::DimensionMismatch(format!("{}x{} matrix with {} values", r.rows, r.cols, r.data.len())));
        }
        Ok(DMatrix::from_row_slice(r.rows, r.cols, &r.data))
    }
}

/// Trained factors; also the checkpoint file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Checkpoint", try_from = "Checkpoint")]
pub struct LatentFactors {
    pub params: PmfParams,
    pub workers: Vec<WorkerId>,
    pub landmarks: Vec<LandmarkId>,
    /// d × workers.
    pub w: DMatrix<f64>,
    /// d × landmarks.
    pub l: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    params: PmfParams,
    workers: Vec<WorkerId>,
    landmarks: Vec<LandmarkId>,
    w: MatrixRecord,
    l: MatrixRecord,
}

impl From<LatentFactors> for Checkpoint {
    fn from(f: LatentFactors) -> Self {
        Checkpoint { w: (&f.w).into(), l: (&f.l).into(), params: f.params, workers: f.workers, landmarks: f.landmarks }
    }
}

impl TryFrom<Checkpoint> for LatentFactors {
    type Error = PmfError;

    fn try_from(c: Checkpoint) -> Result<Self, Self::Error> {
        let f = LatentFactors { params: c.params, w: c.w.try_into()?, l: c.l.try_into()?, workers: c.workers, landmarks: c.landmarks };
        check_dims(f.workers.len(), f.landmarks.len(), &f.w, &f.l)?;
        Ok(f)
    }
}

impl LatentFactors {
    pub fn predict(&self, worker: usize, landmark: usize) -> f64 {
        self.w.column(worker).dot(&self.l.column(landmark))
    }
}

fn check_dims(n: usize, m: usize, w: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<(), PmfError> {
    if w.nrows() != l.nrows() {
        return Err(PmfError::DimensionMismatch(format!("latent dims differ: W has {}, L has {}", w.nrows(), l.nrows())));
    }
    if w.ncols() != n || l.ncols() != m {
        return Err(PmfError::DimensionMismatch(format!(
            "matrix is {n}x{m} but factors cover {} workers and {} landmarks",
            w.ncols(),
            l.ncols()
        )));
    }
    Ok(())
}

pub fn pmf_objective(m: &FamiliarityMatrix, w: &DMatrix<f64>, l: &DMatrix<f64>, lambda_w: f64, lambda_l: f64) -> Result<f64, PmfError> {
    let (n, cols) = m.shape();
    check_dims(n, cols, w, l)?;
    let fit: f64 = m.iter().map(|(i, j, v)| (v - w.column(i).dot(&l.column(j))).powi(2)).sum();
    Ok(fit + lambda_w * w.norm_squared() + lambda_l * l.norm_squared())
}

/// Gradient of [`pmf_objective`] with respect to `W` and `L`.
pub fn pmf_gradient(
    m: &FamiliarityMatrix,
    w: &DMatrix<f64>,
    l: &DMatrix<f64>,
    lambda_w: f64,
    lambda_l: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), PmfError> {
    let (n, cols) = m.shape();
    check_dims(n, cols, w, l)?;
    let mut gw = w * (2.0 * lambda_w);
    let mut gl = l * (2.0 * lambda_l);
    for (i, j, v) in m.iter() {
        let r = v - w.column(i).dot(&l.column(j));
        gw.column_mut(i).axpy(-2.0 * r, &l.column(j), 1.0);
        gl.column_mut(j).axpy(-2.0 * r, &w.column(i), 1.0);
    }
    Ok((gw, gl))
}

pub fn train_pmf(m: &FamiliarityMatrix, params: PmfParams) -> Result<(LatentFactors, TrainReport), PmfError> {
    if params.d == 0 {
        return Err(PmfError::InvalidParameter("latent dimension must be at least 1".into()));
    }
    if !(params.lr > 0.0) {
        return Err(PmfError::InvalidParameter(format!("learning rate must be positive, got {}", params.lr)));
    }
    let (n, cols) = m.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let mut w = DMatrix::from_fn(params.d, n, |_, _| normal.sample(&mut rng));
    let mut l = DMatrix::from_fn(params.d, cols, |_, _| normal.sample(&mut rng));

    let objective = |w: &DMatrix<f64>, l: &DMatrix<f64>| pmf_objective(m, w, l, params.lambda_w, params.lambda_l);
    let mut current = objective(&w, &l)?;
    if !current.is_finite() {
        return Err(PmfError::Divergence(0));
    }
    let mut history = vec![current];
    let mut lr = params.lr;
    let mut iterations = 0;
    while iterations < params.max_iters {
        iterations += 1;
        let (gw, gl) = pmf_gradient(m, &w, &l, params.lambda_w, params.lambda_l)?;
        let next_w = &w - &gw * lr;
        let next_l = &l - &gl * lr;
        let next = objective(&next_w, &next_l)?;
        if !next.is_finite() {
            return Err(PmfError::Divergence(iterations));
        }
        if next > current {
            lr *= 0.5;
            if lr < MIN_LR {
                break;
            }
            continue;
        }
        let decrease = current - next;
        w = next_w;
        l = next_l;
        current = next;
        history.push(current);
        lr *= LR_GROWTH;
        if decrease <= params.tol * current.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let (gw, gl) = pmf_gradient(m, &w, &l, params.lambda_w, params.lambda_l)?;
    let gradient_norm = (gw.norm_squared() + gl.norm_squared()).sqrt();
    let factors = LatentFactors { params, workers: m.workers().to_vec(), landmarks: m.landmarks().to_vec(), w, l };
    let report = TrainReport {
        iterations,
        objective_history: history,
        final_objective: current,
        gradient_norm,
        final_lr: lr,
        effective_rank: effective_rank(&factors),
    };
    Ok((factors, report))
}

/// Number of singular values of `Wᵀ L` above 1e-6.
pub fn effective_rank(f: &LatentFactors) -> usize {
    if f.w.ncols() == 0 || f.l.ncols() == 0 {
        return 0;
    }
    let product = f.w.transpose() * &f.l;
    product.singular_values().iter().filter(|&&s| s > RANK_THRESHOLD).count()
}

/// Completes `m`: observed cells are copied unchanged, every other cell gets
/// the clamped prediction `max(0, W_iᵀ L_j)`.
pub fn predict_matrix(m: &FamiliarityMatrix, f: &LatentFactors) -> Result<FamiliarityMatrix, PmfError> {
    let (n, cols) = m.shape();
    check_dims(n, cols, &f.w, &f.l)?;
    let mut out = m.clone();
    for i in 0..n {
        for j in 0..cols {
            if !m.is_observed(i, j) {
                let p = f.predict(i, j);
                if p > 0.0 {
                    out.set(i, j, p);
                }
            }
        }
    }
    Ok(out)
}
