//! Demixing by minimization of the plug-in contrast over rotations.
//!
//! The sample is whitened first, so the remaining unknown is a rotation. In
//! two dimensions the rotation angle is found by a grid search over
//! `[0, pi/2)`; in higher dimensions Jacobi sweeps repeat that search in every
//! coordinate plane. Each candidate is mapped back into `[0,1]^d` by a
//! per-axis affine map before the contrast is estimated.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::estimators::c2_plugin;
use crate::wavelet::ScalingTable;
use crate::{Error, Result, Sample, WaveletSpec};

pub const DEFAULT_GRID_SIZE: usize = 90;
pub const DEFAULT_SWEEPS: usize = 5;
const IMPROVEMENT_EPS: f64 = 1e-12;

/// Square invertible mixing matrix `A` with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl MixingMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "mixing matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("mixing matrix has non-finite entries".into()));
        }
        let det = matrix.determinant();
        if det.abs() <= 1e-10 {
            return Err(Error::Singular(format!("mixing matrix determinant {det:e}")));
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("mixing matrix is not invertible".into()))?;
        Ok(Self { matrix, inverse })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            matrix: DMatrix::identity(d, d),
            inverse: DMatrix::identity(d, d),
        }
    }

    /// Counter-clockwise rotation by `theta` in the plane.
    pub fn rotation_2d(theta: f64) -> Self {
        let r = plane_rotation(2, 0, 1, theta);
        Self {
            inverse: r.transpose(),
            matrix: r,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Givens rotation by `theta` in the plane of axes `p` and `q`.
pub fn plane_rotation(d: usize, p: usize, q: usize, theta: f64) -> DMatrix<f64> {
    let mut g = DMatrix::identity(d, d);
    let (s, c) = theta.sin_cos();
    g[(p, p)] = c;
    g[(q, q)] = c;
    g[(p, q)] = -s;
    g[(q, p)] = s;
    g
}

/// Centered, decorrelated data and the linear map that produced it.
#[derive(Debug, Clone)]
pub struct Whitening {
    /// `n x d`, zero mean and identity empirical covariance.
    pub white: DMatrix<f64>,
    /// `d x d` symmetric map `C^{-1/2}`; `white_i = transform (x_i - mean)`.
    pub transform: DMatrix<f64>,
    pub mean: DVector<f64>,
}

fn to_matrix(sample: &Sample) -> DMatrix<f64> {
    DMatrix::from_row_slice(sample.len(), sample.dim(), sample.as_slice())
}

/// Symmetric whitening `C^{-1/2} (x - mean)` with the empirical (1/n) covariance.
pub fn whiten(sample: &Sample) -> Result<Whitening> {
    let n = sample.len();
    let d = sample.dim();
    if n <= d {
        return Err(Error::SampleTooSmall {
            needed: d + 1,
            got: n,
        });
    }
    let x = to_matrix(sample);
    let mean = x.row_mean().transpose();
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / n as f64;
    let eig = SymmetricEigen::new(cov);
    let max_ev = eig.eigenvalues.max();
    if !(eig.eigenvalues.min() > 1e-12 * max_ev.max(f64::MIN_POSITIVE)) {
        return Err(Error::Singular(format!(
            "sample covariance has eigenvalue {:e}",
            eig.eigenvalues.min()
        )));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let transform = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let white = &centered * transform.transpose();
    Ok(Whitening {
        white,
        transform,
        mean,
    })
}

/// Maps each column affinely onto `[0,1]` using its minimum and maximum.
pub fn to_unit_cube(points: &DMatrix<f64>) -> Result<Sample> {
    let (n, d) = points.shape();
    let mut data = vec![0.0; n * d];
    for j in 0..d {
        let col = points.column(j);
        let lo = col.min();
        let hi = col.max();
        if !(hi > lo) {
            return Err(Error::Singular(format!("column {} is constant", j + 1)));
        }
        let scale = 1.0 / (hi - lo);
        for i in 0..n {
            data[i * d + j] = ((col[i] - lo) * scale).clamp(0.0, 1.0);
        }
    }
    Sample::new(d, data)
}

fn rotated_contrast(
    white: &DMatrix<f64>,
    rotation: &DMatrix<f64>,
    spec: WaveletSpec,
    table: &ScalingTable,
) -> Result<f64> {
    let rotated = white * rotation.transpose();
    let cube = to_unit_cube(&rotated)?;
    Ok(c2_plugin(&cube, spec, table)?.value)
}

fn grid_angles(grid_size: usize) -> Vec<f64> {
    (0..grid_size)
        .map(|i| FRAC_PI_2 * i as f64 / grid_size as f64)
        .collect()
}

/// Index of the smallest value, first on ties.
fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| {
            if v < bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// Contrast as a function of the rotation angle of whitened 2-d data.
#[derive(Debug, Clone)]
pub struct ContrastProfile {
    pub theta_star: f64,
    /// `(theta, contrast)` on the grid.
    pub profile: Vec<(f64, f64)>,
    /// `R(theta_star) C^{-1/2}`.
    pub unmixing: DMatrix<f64>,
}

/// Grid search of the plug-in contrast over rotations `R(theta)`,
/// `theta = i (pi/2) / grid_size`.
pub fn contrast_profile_2d(
    sample: &Sample,
    spec: WaveletSpec,
    table: &ScalingTable,
    grid_size: usize,
) -> Result<ContrastProfile> {
    if sample.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: sample.dim(),
        });
    }
    if grid_size == 0 {
        return Err(Error::InvalidArgument("grid size must be positive".into()));
    }
    let w = whiten(sample)?;
    let angles = grid_angles(grid_size);
    let values = angles
        .par_iter()
        .map(|&t| rotated_contrast(&w.white, &plane_rotation(2, 0, 1, t), spec, table))
        .collect::<Result<Vec<_>>>()?;
    let best = argmin(&values);
    let theta_star = angles[best];
    Ok(ContrastProfile {
        theta_star,
        profile: angles.into_iter().zip(values).collect(),
        unmixing: plane_rotation(2, 0, 1, theta_star) * &w.transform,
    })
}

/// One accepted plane rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub sweep: usize,
    pub plane: (usize, usize),
    pub angle: f64,
    pub contrast: f64,
}

#[derive(Debug, Clone)]
pub struct DemixResult {
    /// Accumulated rotation `Q` acting on whitened data; identity when no
    /// step was accepted.
    pub rotation: DMatrix<f64>,
    /// Whitening map `C^{-1/2}`.
    pub whitening: DMatrix<f64>,
    /// Full unmixing matrix `Q C^{-1/2}`, applied to centered observations.
    pub unmixing: DMatrix<f64>,
    pub initial_contrast: f64,
    pub final_contrast: f64,
    pub trace: Vec<TraceStep>,
}

/// Jacobi sweeps: in each coordinate plane, grid-search the rotation angle and
/// keep it when it lowers the full `d`-dimensional contrast by more than
/// `1e-12`. Stops after `sweeps` passes or a pass without improvement.
pub fn jacobi_sweep(
    sample: &Sample,
    spec: WaveletSpec,
    table: &ScalingTable,
    sweeps: usize,
    grid_size: usize,
) -> Result<DemixResult> {
    let d = sample.dim();
    if d < 2 {
        return Err(Error::InvalidArgument("demixing needs d >= 2".into()));
    }
    if grid_size == 0 {
        return Err(Error::InvalidArgument("grid size must be positive".into()));
    }
    let w = whiten(sample)?;
    let angles = grid_angles(grid_size);
    let mut rotation = DMatrix::identity(d, d);
    let initial = rotated_contrast(&w.white, &rotation, spec, table)?;
    let mut current = initial;
    let mut trace = Vec::new();
    for sweep in 0..sweeps {
        let mut improved = false;
        for p in 0..d {
            for q in p + 1..d {
                let values = angles
                    .par_iter()
                    .map(|&t| {
                        let candidate = plane_rotation(d, p, q, t) * &rotation;
                        rotated_contrast(&w.white, &candidate, spec, table)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let best = argmin(&values);
                if values[best] < current - IMPROVEMENT_EPS {
                    rotation = plane_rotation(d, p, q, angles[best]) * rotation;
                    current = values[best];
                    trace.push(TraceStep {
                        sweep,
                        plane: (p, q),
                        angle: angles[best],
                        contrast: current,
                    });
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(DemixResult {
        unmixing: &rotation * &w.transform,
        rotation,
        whitening: w.transform,
        initial_contrast: initial,
        final_contrast: current,
        trace,
    })
}

/// Amari distance of `p` from the set of scaled permutation matrices.
pub fn amari_error(p: &DMatrix<f64>) -> Result<f64> {
    if !p.is_square() || p.nrows() == 0 {
        return Err(Error::InvalidArgument("Amari error needs a square matrix".into()));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let d = p.nrows();
    let a = p.abs();
    let mut total = 0.0;
    for (i, row) in a.row_iter().enumerate() {
        let max = row.max();
        if max == 0.0 {
            return Err(Error::InvalidArgument(format!("row {} is zero", i + 1)));
        }
        total += row.sum() / max - 1.0;
    }
    for (j, col) in a.column_iter().enumerate() {
        let max = col.max();
        if max == 0.0 {
            return Err(Error::InvalidArgument(format!("column {} is zero", j + 1)));
        }
        total += col.sum() / max - 1.0;
    }
    Ok(total / (2.0 * d as f64))
}
