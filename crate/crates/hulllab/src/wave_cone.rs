//! Membership in the wave cone: the 8x4 stacked system deciding which
//! directions admit a plane-wave profile, witness extraction, and the
//! construction of cone directions used by the laminate splits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{kernel_basis, Mat3, Vec3};
use crate::state::State;

#[derive(Debug, Error, PartialEq)]
pub enum WaveConeError {
    #[error("abar must be nonzero")]
    ZeroAlphaBar,
    #[error("coplanarity condition (alpha - beta) . abar x bbar = 0 violated")]
    NotCoplanar,
    #[error("no wave-cone witness with nonzero spatial part exists")]
    NoWitness,
}

/// Plane-wave witness (xi, c) with |xi| = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub xi: Vec3,
    pub c: f64,
}

/// A candidate cone direction zbar = (abar, bbar, mbar), optionally carrying
/// the witness that certifies membership.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub alpha_bar: Vec3,
    pub beta_bar: Vec3,
    pub m_bar: Mat3,
    pub witness: Option<Witness>,
}

impl Direction {
    pub fn new(alpha_bar: Vec3, beta_bar: Vec3, m_bar: Mat3) -> Direction {
        Direction { alpha_bar, beta_bar, m_bar, witness: None }
    }

    pub fn scale(&self, k: f64) -> Direction {
        Direction {
            alpha_bar: self.alpha_bar * k,
            beta_bar: self.beta_bar * k,
            m_bar: self.m_bar * k,
            // The witness is invariant under rescaling the direction.
            witness: self.witness,
        }
    }

    pub fn as_state(&self) -> State {
        State::new(self.alpha_bar, self.beta_bar, self.m_bar)
    }

    pub fn norm(&self) -> f64 {
        self.as_state().norm()
    }
}

/// Advance a state along a direction: z + t zbar.
pub fn step(z: &State, d: &Direction, t: f64) -> State {
    State::new(
        z.alpha + d.alpha_bar * t,
        z.beta + d.beta_bar * t,
        z.m + d.m_bar * t,
    )
}

/// The stacked 8x4 system whose kernel elements (xi, c) with xi != 0
/// witness cone membership: rows [mbar | abar], [mbar^T | bbar],
/// [abar^T | 0], [bbar^T | 0].
#[allow(clippy::needless_range_loop)] // indices mirror the block layout
pub fn lambda_matrix(d: &Direction) -> [[f64; 4]; 8] {
    let mut rows = [[0.0; 4]; 8];
    for i in 0..3 {
        for j in 0..3 {
            rows[i][j] = d.m_bar[(i, j)];
            rows[3 + i][j] = d.m_bar[(j, i)];
        }
        rows[i][3] = d.alpha_bar[i];
        rows[3 + i][3] = d.beta_bar[i];
        rows[6][i] = d.alpha_bar[i];
        rows[7][i] = d.beta_bar[i];
    }
    rows
}

/// Residual of a witness against the stacked system.
pub fn lambda_residual(d: &Direction, w: &Witness) -> f64 {
    let rows = lambda_matrix(d);
    let x = [w.xi[0], w.xi[1], w.xi[2], w.c];
    rows.iter()
        .map(|r| {
            let dot: f64 = r.iter().zip(&x).map(|(a, b)| a * b).sum();
            dot * dot
        })
        .sum::<f64>()
        .sqrt()
}

/// Decide cone membership by a null-space computation of the stacked
/// system. Returns a witness normalized to |xi| = 1, or `None` when every
/// kernel element has (numerically) zero spatial part.
pub fn in_lambda(d: &Direction, tol: f64) -> Option<Witness> {
    let rows: Vec<Vec<f64>> = lambda_matrix(d).iter().map(|r| r.to_vec()).collect();
    let basis = kernel_basis(&rows, tol).ok()?;
    // Basis vectors are orthonormal in R^4; prefer the one with the
    // largest spatial part.
    let best = basis
        .iter()
        .max_by(|a, b| spatial_norm(a).partial_cmp(&spatial_norm(b)).unwrap())?;
    let xi_norm = spatial_norm(best);
    if xi_norm <= tol {
        return None;
    }
    let inv = 1.0 / xi_norm;
    Some(Witness {
        xi: Vec3::new(best[0] * inv, best[1] * inv, best[2] * inv),
        c: best[3] * inv,
    })
}

fn spatial_norm(x: &[f64]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Build the cone direction through z determined by a witness pair
/// (abar, bbar):
///
///   mbar = alpha otimes bbar + abar otimes beta
///          - (2 alpha.abar / |abar|^2) abar otimes bbar.
///
/// Requires abar != 0 and the coplanarity condition
/// (alpha - beta) . abar x bbar = 0. The witness is xi = abar x bbar with
/// c = -alpha.xi when the cross product is nonzero, else
/// xi = (alpha - beta) x abar, else a generic kernel solve.
pub fn direction_from_vectors(
    z: &State,
    abar: Vec3,
    bbar: Vec3,
    tol: f64,
) -> Result<Direction, WaveConeError> {
    let na = abar.norm();
    if na <= tol {
        return Err(WaveConeError::ZeroAlphaBar);
    }
    let cross = abar.cross(&bbar);
    let diff = z.alpha - z.beta;
    let scale = 1.0 + diff.norm() * na * bbar.norm().max(1.0);
    if diff.dot(&cross).abs() > tol * scale {
        return Err(WaveConeError::NotCoplanar);
    }

    let coeff = 2.0 * z.alpha.dot(&abar) / (na * na);
    let m_bar = Mat3::outer(&z.alpha, &bbar) + Mat3::outer(&abar, &z.beta)
        - Mat3::outer(&abar, &bbar) * coeff;
    let mut d = Direction::new(abar, bbar, m_bar);

    let witness_from = |xi: Vec3| -> Option<Witness> {
        let xi = xi.normalized(tol)?;
        Some(Witness { xi, c: -z.alpha.dot(&xi) })
    };
    d.witness = witness_from(cross)
        .or_else(|| witness_from(diff.cross(&abar)))
        .or_else(|| in_lambda(&d, tol));
    if d.witness.is_none() {
        return Err(WaveConeError::NoWitness);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{f0_skew_part, ohm_defect, Params};
    use proptest::prelude::*;

    /// The direction of the worked first-order split after rescaling:
    /// (0.8 e1, e2, 0.6 e2 otimes e2).
    fn dir_star() -> Direction {
        Direction::new(
            Vec3::EX * 0.8,
            Vec3::EY,
            Mat3::outer(&Vec3::EY, &Vec3::EY) * 0.6,
        )
    }

    #[test]
    fn lambda_matrix_assembly() {
        let zero = Direction::new(Vec3::ZERO, Vec3::ZERO, Mat3::ZERO);
        assert!(lambda_matrix(&zero).iter().flatten().all(|&x| x == 0.0));

        let d = Direction::new(Vec3::EX, Vec3::ZERO, Mat3::outer(&Vec3::EX, &Vec3::EY));
        let rows = lambda_matrix(&d);
        assert_eq!(rows[0], [0.0, 1.0, 0.0, 1.0]); // [mbar row 0 | abar_x]
        assert_eq!(rows[3], [0.0, 0.0, 0.0, 0.0]); // [mbar col 0 | bbar_x]
        assert_eq!(rows[4], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(rows[6], [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn kernel_of_worked_direction_contains_ez() {
        let rows: Vec<Vec<f64>> = lambda_matrix(&dir_star()).iter().map(|r| r.to_vec()).collect();
        let basis = kernel_basis(&rows, 1e-9).unwrap();
        assert!(!basis.is_empty());
        // Some kernel vector must have its spatial part along e3.
        let w = in_lambda(&dir_star(), 1e-9).unwrap();
        assert!((w.xi[2].abs() - 1.0).abs() < 1e-12);
        assert!(w.xi[0].abs() < 1e-12 && w.xi[1].abs() < 1e-12);
        assert!(w.c.abs() < 1e-12);
    }

    #[test]
    fn identity_direction_forces_zero_xi() {
        let d = Direction::new(Vec3::EX, Vec3::EX, Mat3::identity());
        assert!(in_lambda(&d, 1e-9).is_none());
    }

    #[test]
    fn parallel_alpha_zero_beta_direction() {
        // zbar = (abar, 0, abar otimes w): the kernel is the plane
        // xi perpendicular to abar with c = -w.xi, so any witness found
        // must satisfy both relations.
        let abar = Vec3::new(1.0, 0.5, 0.0);
        let w = Vec3::new(0.0, 1.0, 2.0);
        let d = Direction::new(abar, Vec3::ZERO, Mat3::outer(&abar, &w));
        let wit = in_lambda(&d, 1e-9).unwrap();
        assert!(lambda_residual(&d, &wit) < 1e-12);
        assert!(wit.xi.dot(&abar).abs() < 1e-12);
        assert!((wit.c + w.dot(&wit.xi)).abs() < 1e-12);
    }

    #[test]
    fn worked_direction_construction() {
        let z = State::new(
            Vec3::new(0.0, 0.6, 0.0),
            Vec3::ZERO,
            Mat3::outer(&Vec3::EX, &Vec3::EY) * 0.8,
        );
        let d = direction_from_vectors(&z, Vec3::EX * 0.8, Vec3::EY, 1e-9).unwrap();
        assert!((d.m_bar - Mat3::outer(&Vec3::EY, &Vec3::EY) * 0.6).frobenius() < 1e-14);
        let w = d.witness.unwrap();
        assert!(lambda_residual(&d, &w) < 1e-12);
    }

    #[test]
    fn formula_reduction_when_orthogonal() {
        // alpha.abar = 0 and beta = 0 collapses mbar to alpha otimes bbar.
        // bbar must keep abar x bbar orthogonal to alpha - beta = 0.3 e2,
        // so its e3 component is zero.
        let z = State::new(Vec3::EY * 0.3, Vec3::ZERO, Mat3::ZERO);
        let bbar = Vec3::new(0.5, 1.0, 0.0);
        let d = direction_from_vectors(&z, Vec3::EX, bbar, 1e-9).unwrap();
        let want = Mat3::outer(&z.alpha, &bbar);
        assert!((d.m_bar - want).frobenius() < 1e-14);
    }

    #[test]
    fn parallel_pair_uses_diff_cross_witness() {
        let z = State::new(Vec3::new(0.2, 0.1, 0.0), Vec3::new(0.0, 0.0, 0.3), Mat3::ZERO);
        let abar = Vec3::new(0.0, 1.0, 1.0);
        let d = direction_from_vectors(&z, abar, abar * 2.0, 1e-9).unwrap();
        let w = d.witness.unwrap();
        assert!(lambda_residual(&d, &w) < 1e-12);
        let expect = (z.alpha - z.beta).cross(&abar);
        assert!(w.xi.cross(&expect).norm() < 1e-9 * expect.norm());
    }

    #[test]
    fn coplanarity_violation_rejected() {
        let z = State::new(Vec3::EZ, Vec3::ZERO, Mat3::ZERO);
        let got = direction_from_vectors(&z, Vec3::EX, Vec3::EY, 1e-9);
        assert_eq!(got.unwrap_err(), WaveConeError::NotCoplanar);
    }

    fn arb_unit() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-1.0f64..1.0)
            .prop_filter_map("nonzero", |a| Vec3(a).normalized(0.1))
    }

    proptest! {
        #[test]
        fn constructed_directions_pass_in_lambda(
            a in arb_unit(), b in arb_unit(), u in arb_unit(), v in arb_unit(),
            la in 0.1f64..1.0, lb in 0.1f64..1.0,
        ) {
            let z = State::new(a * 0.7, b * 0.6, Mat3::ZERO);
            // Project v so the coplanarity condition holds.
            let diff = z.alpha - z.beta;
            let n = diff.cross(&u);
            let v_proj = match n.normalized(1e-9) {
                Some(nh) => v - nh * v.dot(&nh),
                None => v,
            };
            prop_assume!(v_proj.norm() > 0.05);
            let d = direction_from_vectors(&z, u * la, v_proj * lb, 1e-9).unwrap();
            let w = d.witness.unwrap();
            prop_assert!(lambda_residual(&d, &w) <= 1e-9);
            // Ohm defect vanishes on the cone.
            let ohm = f0_skew_part(&d.m_bar).dot(&(d.alpha_bar - d.beta_bar));
            prop_assert!(ohm.abs() <= 1e-9);
        }

        #[test]
        fn ohm_defect_is_affine_along_cone(
            a in arb_unit(), b in arb_unit(), u in arb_unit(), v in arb_unit(),
        ) {
            let z = State::new(a * 0.5, b * 0.4, Mat3::outer(&a, &b));
            let diff = z.alpha - z.beta;
            let n = diff.cross(&u);
            let v_proj = match n.normalized(1e-9) {
                Some(nh) => v - nh * v.dot(&nh),
                None => v,
            };
            prop_assume!(v_proj.norm() > 0.05);
            let d = direction_from_vectors(&z, u, v_proj, 1e-9).unwrap();
            let f = |t: f64| ohm_defect(&step(&z, &d, t));
            let second_diff = f(1.0) - 2.0 * f(0.0) + f(-1.0);
            prop_assert!(second_diff.abs() <= 1e-9);
        }

        #[test]
        fn cone_is_scale_invariant(
            u in arb_unit(), v in arb_unit(), kappa_idx in 0usize..3,
        ) {
            let _ = Params::unit();
            let kappa = [-2.0, 0.5, 10.0][kappa_idx];
            let z = State::new(Vec3::ZERO, Vec3::ZERO, Mat3::ZERO);
            let d = direction_from_vectors(&z, u, v, 1e-9).unwrap();
            let scaled = d.scale(kappa);
            let w = in_lambda(&scaled, 1e-9);
            if kappa == 0.0 {
                // Zero direction: any xi works, membership trivial.
                prop_assert!(w.is_some());
            } else {
                let w = w.unwrap();
                prop_assert!(lambda_residual(&scaled, &w) <= 1e-9 * kappa.abs().max(1.0));
            }
        }
    }
}
