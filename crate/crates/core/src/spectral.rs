//! Spectral radius, Perron–Frobenius data and resolvents of nonnegative
//! matrices at desk scale.
//!
//! Spectral radii are computed per irreducible diagonal block, using power
//! iteration on `B + I` (the shift removes periodicity without moving the
//! Perron vector). Convergence is certified by the Collatz–Wielandt bracket
//! `min_i (Sx)_i / x_i <= rho(S) <= max_i (Sx)_i / x_i`, valid for any
//! positive `x`.
//!
//! Resolvents `(I - zA)^{-1}` are evaluated by block back-substitution along
//! the component DAG of the sparsity pattern, so that rounding errors never
//! couple diagonal blocks that the matrix itself keeps apart.

use nalgebra::{DMatrix, DVector, LU, Dyn};

use crate::error::{KmsError, Result};
use crate::graph::strongly_connected;

pub const MAX_POWER_ITERATIONS: usize = 100_000;
const POWER_TOLERANCE: f64 = 1e-12;
const POLISH_ITERATIONS: usize = 200;
const POLE_MARGIN: f64 = 1e-12;

/// Perron–Frobenius data of an irreducible nonnegative matrix.
///
/// Naming follows the projection `P = left * right^T`: `left` is the column
/// eigenvector (`A left = rho left`) and `right` the row eigenvector
/// (`right^T A = rho right^T`).
#[derive(Debug, Clone, PartialEq)]
pub struct PerronData {
    pub rho: f64,
    /// Normalized to unit l1 norm.
    pub left: DVector<f64>,
    /// Normalized so that `<right, left> = 1`.
    pub right: DVector<f64>,
    pub projection: DMatrix<f64>,
}

pub fn validate_nonnegative(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(KmsError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let x = a[(i, j)];
            if !(x >= 0.0 && x.is_finite()) {
                return Err(KmsError::NegativeEntry { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Irreducible blocks of the sparsity pattern, sinks first: every edge out
/// of a block points into a block listed earlier.
pub fn pattern_blocks(a: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    strongly_connected(n, |i| (0..n).filter(|&j| a[(i, j)] != 0.0).collect())
}

/// `A^n = 0` for `n = dim A`, decided on the boolean pattern.
pub fn is_nilpotent(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    if n == 0 {
        return true;
    }
    let pattern = a.map(|x| x != 0.0);
    let mut power = pattern.clone();
    for _ in 1..n {
        let next = DMatrix::from_fn(n, n, |i, j| (0..n).any(|k| power[(i, k)] && pattern[(k, j)]));
        power = next;
    }
    power.iter().all(|&b| !b)
}

fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Power iteration on `b + I` for an irreducible `b` with positive spectral
/// radius. Returns `(rho(b), eigenvector with unit l1 norm)`.
fn shifted_power_iteration(b: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let n = b.nrows();
    let shifted = b + DMatrix::<f64>::identity(n, n);
    let tolerance = POWER_TOLERANCE * inf_norm(b).max(1.0);
    let mut x = DVector::from_element(n, 1.0);
    let mut best_gap = f64::INFINITY;
    let mut converged_at: Option<usize> = None;
    let mut estimate = 0.0;

    for iteration in 0..MAX_POWER_ITERATIONS {
        let y = &shifted * &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let gap = hi - lo;
        let scale = y.max();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(KmsError::NoConvergence {
                iterations: iteration,
                gap,
            });
        }
        let next = y / scale;
        match converged_at {
            None => {
                x = next;
                estimate = 0.5 * (lo + hi);
                best_gap = gap;
                if gap <= tolerance {
                    converged_at = Some(iteration);
                }
            }
            Some(start) => {
                // Keep polishing while the bracket still tightens.
                if gap < best_gap {
                    best_gap = gap;
                    estimate = 0.5 * (lo + hi);
                    x = next;
                }
                if gap >= best_gap || iteration - start >= POLISH_ITERATIONS {
                    break;
                }
            }
        }
    }
    if converged_at.is_none() {
        return Err(KmsError::NoConvergence {
            iterations: MAX_POWER_ITERATIONS,
            gap: best_gap,
        });
    }
    let total = x.sum();
    Ok((estimate - 1.0, x / total))
}

fn block_radius(a: &DMatrix<f64>, block: &[usize]) -> Result<f64> {
    if block.len() == 1 {
        return Ok(a[(block[0], block[0])]);
    }
    let sub = DMatrix::from_fn(block.len(), block.len(), |i, j| a[(block[i], block[j])]);
    Ok(shifted_power_iteration(&sub)?.0)
}

/// `rho(A)` for a square nonnegative matrix, as the maximum over the
/// irreducible diagonal blocks.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    validate_nonnegative(a)?;
    let mut rho = 0.0f64;
    for block in pattern_blocks(a) {
        rho = rho.max(block_radius(a, &block)?);
    }
    Ok(rho)
}

pub fn is_irreducible(a: &DMatrix<f64>) -> bool {
    a.nrows() > 0 && pattern_blocks(a).len() == 1
}

pub fn perron_data(a: &DMatrix<f64>) -> Result<PerronData> {
    validate_nonnegative(a)?;
    if !is_irreducible(a) {
        return Err(KmsError::NotIrreducible);
    }
    let n = a.nrows();
    if n == 1 {
        let rho = a[(0, 0)];
        if rho == 0.0 {
            return Err(KmsError::ZeroSpectralRadius);
        }
        let one = DVector::from_element(1, 1.0);
        return Ok(PerronData {
            rho,
            left: one.clone(),
            right: one,
            projection: DMatrix::from_element(1, 1, 1.0),
        });
    }
    let (rho, left) = shifted_power_iteration(a)?;
    let (_, right) = shifted_power_iteration(&a.transpose())?;
    if rho <= 0.0 {
        return Err(KmsError::ZeroSpectralRadius);
    }
    let right = &right / right.dot(&left);
    let projection = &left * right.transpose();
    Ok(PerronData {
        rho,
        left,
        right,
        projection,
    })
}

/// Factored `I - zA`, solved block by block along the pattern DAG.
pub struct ShiftedSystem {
    a: DMatrix<f64>,
    z: f64,
    blocks: Vec<(Vec<usize>, LU<f64, Dyn, Dyn>)>,
}

impl ShiftedSystem {
    /// No convergence check is made here; singular diagonal blocks surface as
    /// [`KmsError::Singular`] from [`ShiftedSystem::solve`].
    pub fn new(a: &DMatrix<f64>, z: f64) -> Result<Self> {
        validate_nonnegative(a)?;
        let blocks = pattern_blocks(a)
            .into_iter()
            .map(|block| {
                let k = block.len();
                let m = DMatrix::from_fn(k, k, |i, j| {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    delta - z * a[(block[i], block[j])]
                });
                (block, m.lu())
            })
            .collect();
        Ok(ShiftedSystem {
            a: a.clone(),
            z,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Solves `(I - zA) y = b`.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(KmsError::InvalidParameter(format!(
                "right-hand side of length {} for dimension {n}",
                b.len()
            )));
        }
        let mut y = DVector::zeros(n);
        for (block, lu) in &self.blocks {
            let rhs = DVector::from_fn(block.len(), |i, _| {
                let row = block[i];
                let coupling: f64 = (0..n)
                    .filter(|j| !block.contains(j))
                    .map(|j| self.a[(row, j)] * y[j])
                    .sum();
                b[row] + self.z * coupling
            });
            let part = lu.solve(&rhs).ok_or(KmsError::Singular)?;
            if part.iter().any(|x| !x.is_finite()) {
                return Err(KmsError::Singular);
            }
            for (i, &row) in block.iter().enumerate() {
                y[row] = part[i];
            }
        }
        Ok(y)
    }
}

/// `(I - zA)^{-1}` for `0 <= z < 1 / rho(A)`.
pub fn resolvent(a: &DMatrix<f64>, z: f64) -> Result<DMatrix<f64>> {
    validate_nonnegative(a)?;
    if !(z >= 0.0 && z.is_finite()) {
        return Err(KmsError::InvalidParameter(format!("resolvent parameter z = {z}")));
    }
    let rho = spectral_radius(a)?;
    if z * rho >= 1.0 - POLE_MARGIN {
        return Err(KmsError::ResolventAtPole { z, rho });
    }
    let n = a.nrows();
    let system = ShiftedSystem::new(a, z)?;
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = system.solve(&DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 }))?;
        out.set_column(j, &col);
    }
    Ok(out)
}

/// Residue of `z -> [(I - zA)^{-1}]_{w,v}` at its simple pole `z = 1/rho`:
/// `-rho^{-1} <P e_v, e_w> = -rho^{-1} P[w, v]`.
pub fn pole_residue(a: &DMatrix<f64>, w: usize, v: usize) -> Result<f64> {
    let data = perron_data(a)?;
    let n = a.nrows();
    for index in [w, v] {
        if index >= n {
            return Err(KmsError::IndexOutOfRange { index, len: n });
        }
    }
    Ok(-data.projection[(w, v)] / data.rho)
}
