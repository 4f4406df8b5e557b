//! Core domain types of the 15-dimensional state space Z = R^3 x R^3 x R^{3x3}
//! and the scalar/matrix functions on it: the defect matrix M_0, the defect
//! bound G, the axial vector f_0 of a skew matrix, the Ohm defect in both
//! formulations, and membership in the constraint set K_{r,s}.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{Mat3, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("invalid parameters: need r > 0, s > 0, |p| <= r*s")]
    InvalidParams,
    #[error("matrix is not skew-symmetric within tolerance")]
    NotSkew,
    #[error("state lies outside the closed ball product |alpha| <= r, |beta| <= s")]
    OutsideBall,
    #[error("non-finite component")]
    NonFinite,
}

/// Fixed relaxation parameters (r, s, p): the two Elsasser sphere radii and
/// the pressure value, which stays constant throughout the relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    r: f64,
    s: f64,
    p: f64,
}

impl Params {
    pub fn new(r: f64, s: f64, p: f64) -> Result<Params, StateError> {
        if !(r.is_finite() && s.is_finite() && p.is_finite()) {
            return Err(StateError::NonFinite);
        }
        if r <= 0.0 || s <= 0.0 || p.abs() > r * s {
            return Err(StateError::InvalidParams);
        }
        Ok(Params { r, s, p })
    }

    /// Unit parameters r = s = 1, p = 0.
    pub fn unit() -> Params {
        Params { r: 1.0, s: 1.0, p: 0.0 }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Default scale-aware tolerance for all equality predicates.
    pub fn tau(&self) -> f64 {
        1e-9 * (self.r * self.s).max(1.0)
    }
}

impl<'de> Deserialize<'de> for Params {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Params, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            r: f64,
            s: f64,
            p: f64,
        }
        let raw = Raw::deserialize(d)?;
        Params::new(raw.r, raw.s, raw.p).map_err(serde::de::Error::custom)
    }
}

/// A point z = (alpha, beta, M) of the state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub alpha: Vec3,
    pub beta: Vec3,
    #[serde(rename = "M")]
    pub m: Mat3,
}

impl State {
    pub fn new(alpha: Vec3, beta: Vec3, m: Mat3) -> State {
        State { alpha, beta, m }
    }

    pub fn zero() -> State {
        State::new(Vec3::ZERO, Vec3::ZERO, Mat3::ZERO)
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.is_finite() && self.beta.is_finite() && self.m.is_finite()
    }

    pub fn add(&self, other: &State) -> State {
        State::new(self.alpha + other.alpha, self.beta + other.beta, self.m + other.m)
    }

    pub fn sub(&self, other: &State) -> State {
        State::new(self.alpha - other.alpha, self.beta - other.beta, self.m - other.m)
    }

    pub fn scale(&self, k: f64) -> State {
        State::new(self.alpha * k, self.beta * k, self.m * k)
    }

    /// Euclidean norm of z as a 15-vector.
    pub fn norm(&self) -> f64 {
        (self.alpha.norm_sq() + self.beta.norm_sq() + self.m.frobenius().powi(2)).sqrt()
    }
}

/// Defect matrix M_0(z) = alpha otimes beta - M + p id. Zero exactly on
/// states whose relaxed flux is consistent.
pub fn m0(z: &State, params: &Params) -> Mat3 {
    Mat3::outer(&z.alpha, &z.beta) - z.m + Mat3::identity() * params.p()
}

/// Defect bound G(z) = sqrt((r^2 - |alpha|^2)(s^2 - |beta|^2)). Tiny
/// negative radicands produced by boundary states are clamped to zero;
/// genuine excursions outside the ball product are an error.
pub fn g_defect(z: &State, params: &Params) -> Result<f64, StateError> {
    let tau = params.tau();
    let da = params.r() * params.r() - z.alpha.norm_sq();
    let db = params.s() * params.s() - z.beta.norm_sq();
    let clamp = |x: f64| -> Result<f64, StateError> {
        if x >= 0.0 {
            Ok(x)
        } else if x >= -2.0 * params.r().max(params.s()) * tau - tau {
            Ok(0.0)
        } else {
            Err(StateError::OutsideBall)
        }
    };
    Ok((clamp(da)? * clamp(db)?).sqrt())
}

/// The axial vector of a skew-symmetric matrix: the unique a with
/// A xi = xi x a for all xi, read directly from the entries.
pub fn f0(a: &Mat3, tol: f64) -> Result<Vec3, StateError> {
    if (*a + a.transpose()).frobenius() > tol {
        return Err(StateError::NotSkew);
    }
    Ok(Vec3::new(a[(1, 2)], a[(2, 0)], a[(0, 1)]))
}

/// Axial vector of the skew part of any matrix, A = M - M^T.
pub fn f0_skew_part(m: &Mat3) -> Vec3 {
    let a = *m - m.transpose();
    Vec3::new(a[(1, 2)], a[(2, 0)], a[(0, 1)])
}

/// The Ohm defect f_0(M - M^T) . (alpha - beta), the relaxed E.B quantity.
/// Lambda-affine; vanishes on K_{r,s} and on the wave cone.
pub fn ohm_defect(z: &State) -> f64 {
    f0_skew_part(&z.m).dot(&(z.alpha - z.beta))
}

/// Matrix form of the Ohm constraint: (|A|_F^2 id + 2 A^2)(alpha - beta)
/// with A = M - M^T. Equal to 2 f_0(A) (f_0(A) . (alpha - beta)) by the
/// identity |A|_F^2 id + 2 A^2 = 2 f_0(A) otimes f_0(A) for skew A, hence
/// zero exactly when the scalar Ohm defect is zero (or alpha - beta is
/// orthogonal to f_0).
pub fn ohm_defect_matrix_form(z: &State) -> Vec3 {
    let a = z.m - z.m.transpose();
    let op = Mat3::identity() * a.frobenius().powi(2) + a.mul_mat(&a) * 2.0;
    op.mul_vec(&(z.alpha - z.beta))
}

/// Membership in K_{r,s}: M = alpha otimes beta + p id with alpha and beta
/// on their spheres, each within `tol`.
pub fn in_k(z: &State, params: &Params, tol: f64) -> bool {
    let flux = (z.m - Mat3::outer(&z.alpha, &z.beta) - Mat3::identity() * params.p()).frobenius();
    flux <= tol
        && (z.alpha.norm() - params.r()).abs() <= tol
        && (z.beta.norm() - params.s()).abs() <= tol
}
