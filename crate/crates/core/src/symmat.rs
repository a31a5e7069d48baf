//! Small dense symmetric matrices.
//!
//! Storage is a full row-major `d × d` block. Spectral data comes from a cyclic
//! Jacobi sweep in fixed row-major pivot order, so the same input bytes always give
//! the same output bytes.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 16;
const MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-13;
const SINGULAR_REL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

/// `A = Qᵀ diag(values) Q`; row `i` of `vectors` is the eigenvector for `values[i]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenPair {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    pub dim: usize,
}

/// Outcome of one matrix inequality `lhs ≤ rhs` (up to the stated slack).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::InvalidDimension(dim))
    }
}

impl SymMatrix {
    /// Builds from a row-major buffer, replacing `a_ij` and `a_ji` by their mean.
    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { left: dim * dim, right: data.len() });
        }
        let mut entries = data.to_vec();
        for i in 0..dim {
            for j in 0..dim {
                if !entries[i * dim + j].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
            for j in (i + 1)..dim {
                let m = 0.5 * (entries[i * dim + j] + entries[j * dim + i]);
                entries[i * dim + j] = m;
                entries[j * dim + i] = m;
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { left: dim, right: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(dim, &data)
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        check_dim(dim)?;
        let data: Vec<f64> = (0..dim * dim).map(|k| f(k / dim, k % dim)).collect();
        Self::from_row_major(dim, &data)
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::from_fn(dim, |_, _| 0.0)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// Uniform entries in `[-half_width, half_width]` (upper triangle drawn, mirrored).
    pub fn random<R: Rng + ?Sized>(dim: usize, half_width: f64, rng: &mut R) -> Result<Self> {
        check_dim(dim)?;
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = rng.random_range(-half_width..=half_width);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Self::from_row_major(dim, &data)
    }

    /// `Qᵀ diag(values) Q` for an orthogonal `Q` drawn from a random symmetric matrix.
    pub fn random_with_spectrum<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> Result<Self> {
        let dim = values.len();
        let q = eig_sym(&Self::random(dim, 1.0, rng)?)?.vectors;
        Ok(compose(dim, &q, values))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|i| (0..d).map(|j| self.entries[i * d + j] * x[j]).sum()).collect()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        let data: Vec<f64> = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(Self { dim: self.dim, entries: data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        let data: Vec<f64> = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(Self { dim: self.dim, entries: data })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|a| a * s).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.entries.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Largest `|μ_i|`.
    pub fn op_norm(&self) -> f64 {
        match eig_sym(self) {
            Ok(e) => e.values.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
            // Jacobi cannot stall on finite input; the Frobenius norm is still a valid bound.
            Err(_) => self.frob_norm(),
        }
    }

    /// `Tr(AB)` for symmetric `B`, i.e. `Σ a_ij b_ij`.
    pub fn trace_product(&self, other: &Self) -> Result<f64> {
        same_dim(self, other)?;
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum())
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let d = self.dim;
        match d {
            1 => return self.entries[0],
            2 => return self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(1, 0),
            _ => {}
        }
        let mut a = self.entries.clone();
        let mut det = 1.0;
        for c in 0..d {
            let p = (c..d).max_by(|&x, &y| a[x * d + c].abs().total_cmp(&a[y * d + c].abs())).unwrap_or(c);
            if a[p * d + c] == 0.0 {
                return 0.0;
            }
            if p != c {
                for k in 0..d {
                    a.swap(p * d + k, c * d + k);
                }
                det = -det;
            }
            let piv = a[c * d + c];
            det *= piv;
            for r in (c + 1)..d {
                let f = a[r * d + c] / piv;
                for k in c..d {
                    a[r * d + k] -= f * a[c * d + k];
                }
            }
        }
        det
    }
}

fn same_dim(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.dim == b.dim {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left: a.dim, right: b.dim })
    }
}

/// `Qᵀ diag(w) Q` with `Q` given by rows.
fn compose(dim: usize, q: &[f64], w: &[f64]) -> SymMatrix {
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let mut s = 0.0;
            for k in 0..dim {
                s += q[k * dim + i] * w[k] * q[k * dim + j];
            }
            out[i * dim + j] = s;
            out[j * dim + i] = s;
        }
    }
    SymMatrix { dim, entries: out }
}

/// Cyclic Jacobi eigendecomposition, eigenvalues ascending.
pub fn eig_sym(a: &SymMatrix) -> Result<EigenPair> {
    let d = a.dim;
    let mut m = a.entries.clone();
    // columns of v accumulate the rotations; transposed into rows at the end
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let tol = JACOBI_REL_TOL * a.frob_norm();
    let off = |m: &[f64]| {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += m[i * d + j] * m[i * d + j];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&m) > tol {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NonConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * d + p];
                let aqq = m[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[k * d + p];
                    let mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[p * d + k];
                    let mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                m[p * d + q] = 0.0;
                m[q * d + p] = 0.0;
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[i * d + i].total_cmp(&m[j * d + j]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| m[i * d + i]).collect();
    let mut vectors = vec![0.0; d * d];
    for (row, &col) in order.iter().enumerate() {
        // sign fixed so the largest-magnitude component (first on ties) is positive
        let mut lead = 0;
        for k in 1..d {
            if v[k * d + col].abs() > v[lead * d + col].abs() {
                lead = k;
            }
        }
        let sign = if v[lead * d + col] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..d {
            vectors[row * d + k] = sign * v[k * d + col];
        }
    }
    Ok(EigenPair { values, vectors, dim: d })
}

impl EigenPair {
    pub fn reconstruct(&self) -> SymMatrix {
        compose(self.dim, &self.vectors, &self.values)
    }

    pub fn min_abs(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// `|A|^a = Qᵀ diag(|μ_i|^a) Q`.
pub fn abs_power(a: &SymMatrix, p: f64) -> Result<SymMatrix> {
    let e = eig_sym(a)?;
    abs_power_from(&e, p)
}

pub fn abs_power_from(e: &EigenPair, p: f64) -> Result<SymMatrix> {
    if p < 0.0 {
        let threshold = SINGULAR_REL * e.max_abs();
        let min_abs = e.min_abs();
        if min_abs <= threshold || min_abs == 0.0 {
            return Err(Error::SingularMatrix { min_abs, threshold });
        }
    }
    let w: Vec<f64> = e.values.iter().map(|v| v.abs().powf(p)).collect();
    Ok(compose(e.dim, &e.vectors, &w))
}

pub fn matrix_abs(a: &SymMatrix) -> Result<SymMatrix> {
    abs_power(a, 1.0)
}

fn require_spd(a: &SymMatrix) -> Result<EigenPair> {
    let e = eig_sym(a)?;
    let min_eig = e.values[0];
    if min_eig <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eig });
    }
    Ok(e)
}

/// `‖|A|−|B|‖_F ≤ ‖A−B‖_F`.
pub fn check_abs_contraction(a: &SymMatrix, b: &SymMatrix) -> Result<InequalityCheck> {
    same_dim(a, b)?;
    let lhs = matrix_abs(a)?.sub(&matrix_abs(b)?)?.frob_norm();
    let rhs = a.sub(b)?.frob_norm();
    Ok(InequalityCheck { lhs, rhs, holds: lhs <= rhs + 1e-10 * rhs })
}

/// `Tr(AB) ≤ Tr(|A||B|)`.
pub fn check_trace_inequality(a: &SymMatrix, b: &SymMatrix) -> Result<InequalityCheck> {
    same_dim(a, b)?;
    let lhs = a.trace_product(b)?;
    let rhs = matrix_abs(a)?.trace_product(&matrix_abs(b)?)?;
    Ok(InequalityCheck { lhs, rhs, holds: lhs <= rhs + 1e-10 * rhs.abs().max(1.0) })
}

/// `‖A^{-1/2} − B^{-1/2}‖_op ≤ d^{5/2} μ^{-3/2} ‖A−B‖_F` for SPD `A, B` with spectrum above `mu`.
pub fn check_sqrt_lipschitz(a: &SymMatrix, b: &SymMatrix, mu: f64) -> Result<InequalityCheck> {
    same_dim(a, b)?;
    if !(mu > 0.0) {
        return Err(Error::BadParams(format!("mu must be positive, got {mu}")));
    }
    let ea = require_spd(a)?;
    let eb = require_spd(b)?;
    let lhs = abs_power_from(&ea, -0.5)?.sub(&abs_power_from(&eb, -0.5)?)?.op_norm();
    let d = a.dim as f64;
    let rhs = d.powf(2.5) * mu.powf(-1.5) * a.sub(b)?.frob_norm();
    Ok(InequalityCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-8) })
}

/// Difference-quotient bound for `G(A) = A^{1/2}`: `‖dG(A)‖ ≤ d ‖A^{-1/2}‖_op`.
///
/// `h` defaults to `1e-6·‖A‖_op`. The slack `10·h·‖A^{-1/2}‖³_op·‖H‖_F` absorbs the
/// second-order term of the finite difference.
pub fn check_dg_bound(a: &SymMatrix, dir: &SymMatrix, h: Option<f64>) -> Result<InequalityCheck> {
    same_dim(a, dir)?;
    let hn = dir.frob_norm();
    if hn == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let ea = require_spd(a)?;
    let h = h.unwrap_or(1e-6 * ea.max_abs());
    let shifted = a.add(&dir.scale(h))?;
    let es = require_spd(&shifted)?;
    let g0 = abs_power_from(&ea, 0.5)?;
    let g1 = abs_power_from(&es, 0.5)?;
    let lhs = g1.sub(&g0)?.frob_norm() / (h * hn);
    let inv_half = ea.values[0].powf(-0.5);
    let rhs = a.dim as f64 * inv_half;
    let slack = 10.0 * h * inv_half.powi(3) * hn;
    Ok(InequalityCheck { lhs, rhs, holds: lhs <= rhs + slack })
}
