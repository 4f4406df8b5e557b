//! Small fixed-dimension linear algebra: 3-vectors, 3x3 matrices, singular
//! values via one-sided Jacobi, null spaces of small stacked systems, and a
//! numerically stable quadratic solver.

use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumericError {
    #[error("non-finite input")]
    NonFinite,
    #[error("leading coefficient is zero, not a quadratic")]
    NotQuadratic,
    #[error("matrix dimensions exceed the supported 8x8 limit")]
    TooLarge,
}

/// Maximum Jacobi sweeps before we give up on convergence. At dimension
/// <= 8 the method settles in a handful of sweeps.
const MAX_SWEEPS: usize = 60;

// ---------------------------------------------------------------------------
// Vec3
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);
    pub const EX: Vec3 = Vec3([1.0, 0.0, 0.0]);
    pub const EY: Vec3 = Vec3([0.0, 1.0, 0.0]);
    pub const EZ: Vec3 = Vec3([0.0, 0.0, 1.0]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn cross(&self, other: &Vec3) -> Vec3 {
        Vec3([
            self.0[1] * other.0[2] - self.0[2] * other.0[1],
            self.0[2] * other.0[0] - self.0[0] * other.0[2],
            self.0[0] * other.0[1] - self.0[1] * other.0[0],
        ])
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Unit vector in the same direction, or `None` below `tol`.
    pub fn normalized(&self, tol: f64) -> Option<Vec3> {
        let n = self.norm();
        if n > tol {
            Some(*self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Some unit vector orthogonal to `self` (which must be nonzero).
    pub fn any_orthogonal(&self) -> Vec3 {
        let trial = if self.0[0].abs() <= self.0[1].abs() && self.0[0].abs() <= self.0[2].abs() {
            Vec3::EX
        } else if self.0[1].abs() <= self.0[2].abs() {
            Vec3::EY
        } else {
            Vec3::EZ
        };
        let c = self.cross(&trial);
        c * (1.0 / c.norm())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

// ---------------------------------------------------------------------------
// Mat3 (row-major)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    pub fn identity() -> Mat3 {
        Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Outer product u otimes v, entries u_i v_j.
    pub fn outer(u: &Vec3, v: &Vec3) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = u[i] * v[j];
            }
        }
        Mat3(m)
    }

    pub fn transpose(&self) -> Mat3 {
        let a = &self.0;
        Mat3([
            [a[0][0], a[1][0], a[2][0]],
            [a[0][1], a[1][1], a[2][1]],
            [a[0][2], a[1][2], a[2][2]],
        ])
    }

    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        Vec3([
            self.0[0][0] * v[0] + self.0[0][1] * v[1] + self.0[0][2] * v[2],
            self.0[1][0] * v[0] + self.0[1][1] * v[1] + self.0[1][2] * v[2],
            self.0[2][0] * v[0] + self.0[2][1] * v[1] + self.0[2][2] * v[2],
        ])
    }

    /// M^T v without forming the transpose.
    pub fn tr_mul_vec(&self, v: &Vec3) -> Vec3 {
        Vec3([
            self.0[0][0] * v[0] + self.0[1][0] * v[1] + self.0[2][0] * v[2],
            self.0[0][1] * v[0] + self.0[1][1] * v[1] + self.0[2][1] * v[2],
            self.0[0][2] * v[0] + self.0[1][2] * v[1] + self.0[2][2] * v[2],
        ])
    }

    #[allow(clippy::needless_range_loop)]
    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for j in 0..3 {
                row[j] = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(m)
    }

    pub fn frobenius(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
        Mat3([
            [c0[0], c1[0], c2[0]],
            [c0[1], c1[1], c2[1]],
            [c0[2], c1[2], c2[2]],
        ])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut m = self.0;
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e += o.0[i][j];
            }
        }
        Mat3(m)
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        let mut m = self.0;
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e -= o.0[i][j];
            }
        }
        Mat3(m)
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, k: f64) -> Mat3 {
        let mut m = self.0;
        for row in m.iter_mut() {
            for e in row.iter_mut() {
                *e *= k;
            }
        }
        Mat3(m)
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

// ---------------------------------------------------------------------------
// Singular value decomposition
// ---------------------------------------------------------------------------

/// Factorization M = U diag(sigma) V^T with sigma sorted descending and
/// orthonormal factor columns.
#[derive(Debug, Clone, Copy)]
pub struct SingularTriple {
    pub sigma: [f64; 3],
    /// Left factor; columns are the left singular vectors.
    pub u: Mat3,
    /// Right factor; columns are the right singular vectors.
    pub v: Mat3,
}

impl SingularTriple {
    pub fn reconstruct(&self) -> Mat3 {
        let mut m = Mat3::ZERO;
        for k in 0..3 {
            m = m + Mat3::outer(&self.u.col(k), &self.v.col(k)) * self.sigma[k];
        }
        m
    }

    pub fn nuclear(&self) -> f64 {
        self.sigma.iter().sum()
    }
}

/// One-sided (Hestenes) Jacobi SVD. Columns of M are orthogonalized by
/// right rotations; the column norms become the singular values. Accurate
/// to machine precision including for rank-deficient input.
pub fn singular_values(m: &Mat3) -> Result<SingularTriple, NumericError> {
    if !m.is_finite() {
        return Err(NumericError::NonFinite);
    }
    let mut a = [m.col(0), m.col(1), m.col(2)];
    let mut v = [Vec3::EX, Vec3::EY, Vec3::EZ];
    let scale = m.frobenius();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..2 {
            for q in (p + 1)..3 {
                let g = a[p].dot(&a[q]);
                let app = a[p].norm_sq();
                let aqq = a[q].norm_sq();
                if g.abs() <= f64::EPSILON * (app * aqq).sqrt() || g == 0.0 {
                    continue;
                }
                let zeta = (aqq - app) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (ap, aq) = (a[p], a[q]);
                a[p] = ap * c - aq * s;
                a[q] = ap * s + aq * c;
                let (vp, vq) = (v[p], v[q]);
                v[p] = vp * c - vq * s;
                v[q] = vp * s + vq * c;
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<(f64, Vec3, Vec3)> = (0..3).map(|j| (a[j].norm(), a[j], v[j])).collect();
    sv.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());

    let tiny = f64::EPSILON * scale.max(1.0);
    let mut u_cols = [Vec3::EX, Vec3::EY, Vec3::EZ];
    let mut sigma = [0.0; 3];
    for (j, (s, col, _)) in sv.iter().enumerate() {
        sigma[j] = *s;
        if *s > tiny {
            u_cols[j] = *col * (1.0 / s);
        }
    }
    // Complete the left factor to an orthonormal basis for tiny singular values.
    if sigma[0] <= tiny {
        u_cols = [Vec3::EX, Vec3::EY, Vec3::EZ];
    } else {
        if sigma[1] <= tiny {
            u_cols[1] = u_cols[0].any_orthogonal();
        }
        if sigma[2] <= tiny {
            let c = u_cols[0].cross(&u_cols[1]);
            u_cols[2] = c * (1.0 / c.norm());
        }
    }

    Ok(SingularTriple {
        sigma,
        u: Mat3::from_cols(u_cols[0], u_cols[1], u_cols[2]),
        v: Mat3::from_cols(sv[0].2, sv[1].2, sv[2].2),
    })
}

/// Sum of singular values (Ky Fan / nuclear norm).
pub fn nuclear_norm(m: &Mat3) -> Result<f64, NumericError> {
    Ok(singular_values(m)?.nuclear())
}

/// Rank-one factorization M ~ sigma * u otimes v, unique up to a joint
/// sign flip of (u, v). Returns `None` when M is not numerically rank
/// one: either sigma1 <= tol (rank 0) or sigma2 > tol * max(sigma1, 1).
pub fn rank_one_factor(m: &Mat3, tol: f64) -> Option<(Vec3, Vec3, f64)> {
    let svd = singular_values(m).ok()?;
    if svd.sigma[0] <= tol || svd.sigma[1] > tol * svd.sigma[0].max(1.0) {
        return None;
    }
    Some((svd.u.col(0), svd.v.col(0), svd.sigma[0]))
}

// ---------------------------------------------------------------------------
// Null spaces of small m x n systems
// ---------------------------------------------------------------------------

fn col_dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Orthonormal basis of the numerical null space of an m x n matrix given
/// by rows, for m, n <= 8. A direction x counts as null when the singular
/// value of its invariant column is below tol * sigma_max (or tol
/// absolute for a near-zero matrix).
#[allow(clippy::needless_range_loop)] // the rotations update two columns at once
pub fn kernel_basis(rows: &[Vec<f64>], tol: f64) -> Result<Vec<Vec<f64>>, NumericError> {
    let m = rows.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let n = rows[0].len();
    if m > 8 || n > 8 {
        return Err(NumericError::TooLarge);
    }
    if rows.iter().any(|r| r.len() != n || r.iter().any(|x| !x.is_finite())) {
        if rows.iter().any(|r| r.iter().any(|x| !x.is_finite())) {
            return Err(NumericError::NonFinite);
        }
        return Err(NumericError::TooLarge);
    }

    // Columns of A, and the accumulated right factor V.
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let g = col_dot(&a[p], &a[q]);
                let app = col_dot(&a[p], &a[p]);
                let aqq = col_dot(&a[q], &a[q]);
                if g.abs() <= f64::EPSILON * (app * aqq).sqrt() || g == 0.0 {
                    continue;
                }
                let zeta = (aqq - app) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (a[p][i], a[q][i]);
                    a[p][i] = x * c - y * s;
                    a[q][i] = x * s + y * c;
                }
                for i in 0..n {
                    let (x, y) = (v[p][i], v[q][i]);
                    v[p][i] = x * c - y * s;
                    v[q][i] = x * s + y * c;
                }
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = a.iter().map(|c| col_dot(c, c).sqrt()).collect();
    let sigma_max = norms.iter().cloned().fold(0.0, f64::max);
    let threshold = if sigma_max > tol { tol * sigma_max } else { tol };

    let mut basis: Vec<(f64, Vec<f64>)> = norms
        .into_iter()
        .zip(v)
        .filter(|(s, _)| *s <= threshold)
        .collect();
    basis.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    Ok(basis.into_iter().map(|(_, col)| col).collect())
}

// ---------------------------------------------------------------------------
// Quadratic roots
// ---------------------------------------------------------------------------

/// Real roots of a t^2 + b t + c = 0, in increasing order, using the
/// cancellation-free form: the larger-magnitude root from
/// -(b + sign(b) sqrt(disc)) / 2, the companion via c / (a t).
/// Returns `None` for negative discriminant. When a*c < 0 the roots
/// straddle zero.
pub fn solve_quadratic(a: f64, b: f64, c: f64) -> Result<Option<(f64, f64)>, NumericError> {
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(NumericError::NonFinite);
    }
    if a == 0.0 {
        return Err(NumericError::NotQuadratic);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Ok(None);
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + sq.copysign(if b == 0.0 { 1.0 } else { b }));
    if q == 0.0 {
        // b == 0 and disc == 0: double root at the origin.
        return Ok(Some((0.0, 0.0)));
    }
    let r1 = q / a;
    let r2 = c / q;
    Ok(Some(if r1 <= r2 { (r1, r2) } else { (r2, r1) }))
}
