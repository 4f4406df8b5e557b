//! Constructive lower-bound machinery: first/second/third-order laminate
//! decisions and splits, and full decomposition trees whose leaves lie in
//! the constraint set K_{r,s}.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{rank_one_factor, singular_values, solve_quadratic, Mat3, Vec3};
use crate::state::{g_defect, in_k, m0, ohm_defect, Params, State};
use crate::wave_cone::{
    direction_from_vectors, in_lambda, lambda_residual, step, Direction, Witness,
};

/// Why a state could not be decomposed into a laminate. The variants
/// mirror the individual membership conditions so the gap explorer can
/// report which one failed.
#[derive(Debug, Clone, Error, PartialEq, Serialize)]
#[serde(tag = "reason")]
pub enum DecomposeError {
    #[error("state lies outside the closed ball product")]
    OutOfBall,
    #[error("Ohm defect is nonzero")]
    OhmDefect,
    #[error("defect matrix is not rank one")]
    NotRankOne,
    #[error("nuclear norm of the defect exceeds the defect bound G")]
    NuclearExceedsG,
    #[error("sign condition alpha^T M_0 beta <= 0 fails")]
    SignCondition,
    #[error("defect/radius pairing mismatch: |M_0 b| sqrt(r^2-|a|^2) = {lhs}, |M_0^T a| sqrt(s^2-|b|^2) = {rhs}")]
    Eq28Mismatch { lhs: f64, rhs: f64 },
    #[error("state is not strictly interior to the ball product")]
    NotStrictInterior,
    #[error("internal construction failure: {0}")]
    Construction(String),
}

/// A rank-one witness pair (abar, bbar) with defect magnitude
/// c = |abar| |bbar|, satisfying M_0(z) + abar otimes bbar = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessPair {
    pub abar: Vec3,
    pub bbar: Vec3,
    pub c: f64,
}

/// Binary decomposition tree: cone directions at the internal nodes,
/// K-points at the leaves, barycentric weights mu1 = t2/(t2-t1) on the
/// t1 child and mu2 = -t1/(t2-t1) on the t2 child.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)] // leaves are rare relative to splits
pub enum LaminateTree {
    Leaf {
        state: State,
    },
    Split {
        state: State,
        direction: Direction,
        t1: f64,
        t2: f64,
        mu1: f64,
        mu2: f64,
        left: Box<LaminateTree>,
        right: Box<LaminateTree>,
    },
}

impl LaminateTree {
    pub(crate) fn split(
        state: State,
        direction: Direction,
        t1: f64,
        t2: f64,
        left: LaminateTree,
        right: LaminateTree,
    ) -> LaminateTree {
        let span = t2 - t1;
        LaminateTree::Split {
            state,
            direction,
            t1,
            t2,
            mu1: t2 / span,
            mu2: -t1 / span,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn state(&self) -> &State {
        match self {
            LaminateTree::Leaf { state } | LaminateTree::Split { state, .. } => state,
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            LaminateTree::Leaf { .. } => 1,
            LaminateTree::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            LaminateTree::Leaf { .. } => 0,
            LaminateTree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Leaves with the product of barycentric weights along their paths.
    pub fn leaves_with_weights(&self) -> Vec<(State, f64)> {
        let mut out = Vec::new();
        self.collect_leaves(1.0, &mut out);
        out
    }

    fn collect_leaves(&self, weight: f64, out: &mut Vec<(State, f64)>) {
        match self {
            LaminateTree::Leaf { state } => out.push((*state, weight)),
            LaminateTree::Split { mu1, mu2, left, right, .. } => {
                left.collect_leaves(weight * mu1, out);
                right.collect_leaves(weight * mu2, out);
            }
        }
    }

    /// Recompose the root state as the weighted sum of the leaves.
    pub fn recombine(&self) -> (State, Vec<(State, f64)>) {
        let leaves = self.leaves_with_weights();
        let mut acc = State::zero();
        for (leaf, w) in &leaves {
            acc = acc.add(&leaf.scale(*w));
        }
        (acc, leaves)
    }

    /// Structural verification: leaves in K, split directions in the
    /// cone (witness residual), children consistent with the split
    /// parameters, weights barycentric, and recombination exact.
    pub fn verify(&self, params: &Params, tol: f64) -> Result<(), String> {
        self.verify_node(params, tol)?;
        let (back, leaves) = self.recombine();
        let err = back.sub(self.state()).norm();
        if err > tol {
            return Err(format!("recombination error {err}"));
        }
        let total: f64 = leaves.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > tol {
            return Err(format!("leaf weights sum to {total}"));
        }
        Ok(())
    }

    fn verify_node(&self, params: &Params, tol: f64) -> Result<(), String> {
        match self {
            LaminateTree::Leaf { state } => {
                if !in_k(state, params, tol) {
                    return Err("leaf is not in K".into());
                }
                Ok(())
            }
            LaminateTree::Split { state, direction, t1, t2, mu1, mu2, left, right } => {
                if !(*t1 < 0.0 && *t2 > 0.0) {
                    return Err(format!("split roots not straddling zero: {t1}, {t2}"));
                }
                if !(0.0 < *mu1 && *mu1 < 1.0 && (mu1 + mu2 - 1.0).abs() <= 1e-12) {
                    return Err("weights not barycentric".into());
                }
                let witness = direction.witness.ok_or("split direction lacks a witness")?;
                let residual = lambda_residual(direction, &witness);
                if residual > tol * (1.0 + direction.norm()) {
                    return Err(format!("wave-cone residual {residual}"));
                }
                for (t, child) in [(t1, left), (t2, right)] {
                    let expect = step(state, direction, *t);
                    if expect.sub(child.state()).norm() > tol * (1.0 + state.norm()) {
                        return Err("child state inconsistent with split".into());
                    }
                    child.verify_node(params, tol)?;
                }
                Ok(())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// First order
// ---------------------------------------------------------------------------

/// Decide first-order laminate membership for a strictly interior state.
///
/// The canonical witness carries the sphere-gap magnitudes
/// |abar|^2 = s^2 - |beta|^2, |bbar|^2 = r^2 - |alpha|^2, so the defect
/// magnitude must equal G(z) exactly; the pairing alpha.abar = beta.bbar
/// and the coplanarity condition are then tested. Both tests are
/// invariant under the joint sign flip (abar, bbar) -> (-abar, -bbar)
/// (both sides negate, and the triple product negates twice), so a
/// single sign pair suffices.
pub fn first_order_witness(
    z: &State,
    params: &Params,
    tol: f64,
) -> Result<Option<WitnessPair>, DecomposeError> {
    let na = z.alpha.norm();
    let nb = z.beta.norm();
    if !(na < params.r() - tol && nb < params.s() - tol) {
        return Err(DecomposeError::NotStrictInterior);
    }
    let defect = m0(z, params);
    let Some((u, v, sigma)) = rank_one_factor(&defect, tol) else {
        // Rank zero (no nonzero witness exists in the interior) or
        // rank >= 2 (no witness at all).
        return Ok(None);
    };
    let g = g_defect(z, params).map_err(|_| DecomposeError::OutOfBall)?;
    if (sigma - g).abs() > tol {
        return Ok(None);
    }
    let da = params.r() * params.r() - na * na;
    let db = params.s() * params.s() - nb * nb;
    let abar = u * -db.sqrt();
    let bbar = v * da.sqrt();

    let pairing = z.alpha.dot(&abar) - z.beta.dot(&bbar);
    if pairing.abs() > tol * (1.0 + na + nb) {
        return Ok(None);
    }
    let coplanar = (z.alpha - z.beta).dot(&abar.cross(&bbar));
    if coplanar.abs() > tol * (1.0 + (na + nb) * g) {
        return Ok(None);
    }
    Ok(Some(WitnessPair { abar, bbar, c: sigma }))
}

/// Split a first-order state along its witness pair. The pair is first
/// rescaled by lambda = (ratio |bbar|^2 / |abar|^2)^{1/4} so that
/// |abar|^2 / |bbar|^2 matches (r^2-|alpha|^2)/(s^2-|beta|^2); the
/// alpha-sphere and beta-sphere quadratics then share their roots and
/// both children land in K.
pub fn first_order_split(
    z: &State,
    w: &WitnessPair,
    params: &Params,
    tol: f64,
) -> Result<LaminateTree, DecomposeError> {
    let da = params.r() * params.r() - z.alpha.norm_sq();
    let db = params.s() * params.s() - z.beta.norm_sq();
    if da <= 0.0 || db <= 0.0 {
        return Err(DecomposeError::NotStrictInterior);
    }
    let ratio = da / db;
    let lambda = (ratio * w.bbar.norm_sq() / w.abar.norm_sq()).powf(0.25);
    let abar = w.abar * lambda;
    let bbar = w.bbar * (1.0 / lambda);

    let direction = direction_from_vectors(z, abar, bbar, tol)
        .map_err(|e| DecomposeError::Construction(format!("cone direction: {e}")))?;
    let roots = solve_quadratic(abar.norm_sq(), 2.0 * z.alpha.dot(&abar), -da)
        .map_err(|e| DecomposeError::Construction(format!("root solver: {e}")))?;
    let Some((t1, t2)) = roots else {
        return Err(DecomposeError::Construction("no real roots for the split".into()));
    };
    if !(t1 < 0.0 && t2 > 0.0) {
        return Err(DecomposeError::Construction("roots do not straddle zero".into()));
    }
    let left = step(z, &direction, t1);
    let right = step(z, &direction, t2);
    Ok(LaminateTree::split(
        *z,
        direction,
        t1,
        t2,
        LaminateTree::Leaf { state: left },
        LaminateTree::Leaf { state: right },
    ))
}

// ---------------------------------------------------------------------------
// Second order
// ---------------------------------------------------------------------------

/// Wherever a unit vector choice is arbitrary, pick e1 for reproducibility.
fn unit_or_e1(v: &Vec3, tol: f64) -> Vec3 {
    v.normalized(tol).unwrap_or(Vec3::EX)
}

fn pure_move(
    abar: Vec3,
    bbar: Vec3,
    m_bar: Mat3,
    xi_candidate: Vec3,
    tol: f64,
) -> Result<Direction, DecomposeError> {
    let mut d = Direction::new(abar, bbar, m_bar);
    d.witness = xi_candidate
        .normalized(tol)
        .map(|xi| Witness { xi, c: 0.0 })
        .or_else(|| in_lambda(&d, tol));
    if d.witness.is_none() {
        return Err(DecomposeError::Construction("sphere move has no cone witness".into()));
    }
    Ok(d)
}

/// Decompose a flux-consistent state (M_0 = 0) inside the closed ball
/// product: first move beta onto its sphere along (0, bbar, alpha otimes
/// bbar), then move alpha onto its sphere along (abar, 0, abar otimes
/// beta). M_0 is invariant along both moves, so every leaf lies in K.
pub fn second_order_path(
    z: &State,
    params: &Params,
    tol: f64,
) -> Result<LaminateTree, DecomposeError> {
    let na = z.alpha.norm();
    let nb = z.beta.norm();
    if na > params.r() + tol || nb > params.s() + tol {
        return Err(DecomposeError::OutOfBall);
    }
    let defect_norm = m0(z, params).frobenius();
    if defect_norm > tol * (1.0 + z.norm()) {
        return Err(DecomposeError::Construction(format!(
            "flux defect {defect_norm} is nonzero"
        )));
    }
    if in_k(z, params, tol) {
        return Ok(LaminateTree::Leaf { state: *z });
    }

    if (nb - params.s()).abs() <= tol {
        return alpha_move(z, params, tol);
    }
    let bbar = unit_or_e1(&z.beta, tol);
    let d = pure_move(
        Vec3::ZERO,
        bbar,
        Mat3::outer(&z.alpha, &bbar),
        bbar.cross(&z.alpha),
        tol,
    )?;
    let (t1, t2) = sphere_roots(1.0, z.beta.dot(&bbar), nb * nb - params.s() * params.s())?;
    let left = alpha_move(&step(z, &d, t1), params, tol)?;
    let right = alpha_move(&step(z, &d, t2), params, tol)?;
    Ok(LaminateTree::split(*z, d, t1, t2, left, right))
}

fn alpha_move(z: &State, params: &Params, tol: f64) -> Result<LaminateTree, DecomposeError> {
    let na = z.alpha.norm();
    if (na - params.r()).abs() <= tol {
        return Ok(LaminateTree::Leaf { state: *z });
    }
    let abar = unit_or_e1(&z.alpha, tol);
    let d = pure_move(
        abar,
        Vec3::ZERO,
        Mat3::outer(&abar, &z.beta),
        abar.cross(&z.beta),
        tol,
    )?;
    let (t1, t2) = sphere_roots(1.0, z.alpha.dot(&abar), na * na - params.r() * params.r())?;
    Ok(LaminateTree::split(
        *z,
        d,
        t1,
        t2,
        LaminateTree::Leaf { state: step(z, &d, t1) },
        LaminateTree::Leaf { state: step(z, &d, t2) },
    ))
}

/// Roots of t^2 |vbar|^2 + 2 t (v.vbar) + |v|^2 - rho^2 for a unit move
/// direction; the constant term is negative for interior states, so the
/// roots straddle zero.
fn sphere_roots(a: f64, half_b: f64, c: f64) -> Result<(f64, f64), DecomposeError> {
    let roots = solve_quadratic(a, 2.0 * half_b, c)
        .map_err(|e| DecomposeError::Construction(format!("root solver: {e}")))?;
    match roots {
        Some((t1, t2)) if t1 < 0.0 && t2 > 0.0 => Ok((t1, t2)),
        _ => Err(DecomposeError::Construction("sphere roots do not straddle zero".into())),
    }
}

// ---------------------------------------------------------------------------
// Third order
// ---------------------------------------------------------------------------

/// Outcome of the third-order decision: either the defect already
/// vanishes (flux-consistent, second-order case) or a witness pair for a
/// genuine split exists.
#[derive(Debug, Clone, PartialEq)]
pub enum ThirdOrderWitness {
    SecondOrder,
    Split(WitnessPair),
}

/// Verify the rank-one membership conditions and construct the split
/// witness: rank(M_0) = 1, nuclear norm bounded by G, the sign condition
/// alpha^T M_0 beta <= 0, the defect/radius pairing equality, and a
/// vanishing Ohm defect. The witness magnitudes are chosen so
/// |abar| / |bbar| = sqrt((r^2-|alpha|^2)/(s^2-|beta|^2)) and
/// |abar| |bbar| equals the nuclear norm.
pub fn third_order_witness(
    z: &State,
    params: &Params,
    tol: f64,
) -> Result<ThirdOrderWitness, DecomposeError> {
    let na = z.alpha.norm();
    let nb = z.beta.norm();
    if na > params.r() + tol || nb > params.s() + tol {
        return Err(DecomposeError::OutOfBall);
    }
    let ohm = ohm_defect(z);
    if ohm.abs() > tol * (1.0 + z.norm().powi(2)) {
        return Err(DecomposeError::OhmDefect);
    }
    let defect = m0(z, params);
    let svd = singular_values(&defect)
        .map_err(|e| DecomposeError::Construction(format!("svd: {e}")))?;
    if svd.sigma[0] <= tol {
        return Ok(ThirdOrderWitness::SecondOrder);
    }
    if svd.sigma[1] > tol * svd.sigma[0].max(1.0) {
        return Err(DecomposeError::NotRankOne);
    }
    let g = g_defect(z, params).map_err(|_| DecomposeError::OutOfBall)?;
    let sigma = svd.nuclear();
    if sigma > g + tol {
        return Err(DecomposeError::NuclearExceedsG);
    }
    let sign = z.alpha.dot(&defect.mul_vec(&z.beta));
    if sign > tol * (1.0 + na * nb * sigma) {
        return Err(DecomposeError::SignCondition);
    }
    let da = params.r() * params.r() - na * na;
    let db = params.s() * params.s() - nb * nb;
    let lhs = defect.mul_vec(&z.beta).norm() * da.sqrt();
    let rhs = defect.tr_mul_vec(&z.alpha).norm() * db.sqrt();
    if (lhs - rhs).abs() > tol * (1.0 + lhs.max(rhs)) {
        return Err(DecomposeError::Eq28Mismatch { lhs, rhs });
    }

    // sigma <= g forces both sphere gaps to be strictly positive here.
    let (u, v) = (svd.u.col(0), svd.v.col(0));
    let ratio = (da / db).sqrt();
    let abar = u * -(sigma * ratio).sqrt();
    let bbar = v * (sigma / ratio).sqrt();
    let pairing = z.beta.dot(&bbar) * (da / db) - z.alpha.dot(&abar);
    if pairing.abs() > 1e2 * tol * (1.0 + na + nb) {
        return Err(DecomposeError::Construction(format!(
            "pairing residual {pairing} after magnitude normalization"
        )));
    }
    Ok(ThirdOrderWitness::Split(WitnessPair { abar, bbar, c: sigma }))
}

/// Split along a third-order witness: the roots of
/// t^2 + 2 t (alpha.abar / |abar|^2) - c / (|abar| |bbar|) = 0 give two
/// children with vanishing defect matrix inside the ball product; each
/// child is then expanded by the second-order path.
pub fn third_order_split(
    z: &State,
    w: &WitnessPair,
    params: &Params,
    tol: f64,
) -> Result<LaminateTree, DecomposeError> {
    let direction = direction_from_vectors(z, w.abar, w.bbar, tol)
        .map_err(|e| DecomposeError::Construction(format!("cone direction: {e}")))?;
    let na2 = w.abar.norm_sq();
    let product = w.abar.norm() * w.bbar.norm();
    if w.c <= 0.0 || product <= 0.0 {
        return Err(DecomposeError::Construction("degenerate witness magnitudes".into()));
    }
    let (t1, t2) = sphere_roots(1.0, z.alpha.dot(&w.abar) / na2, -w.c / product)?;
    let mut children = Vec::with_capacity(2);
    for t in [t1, t2] {
        let child = step(z, &direction, t);
        let residual = m0(&child, params).frobenius();
        if residual > 1e2 * tol * (1.0 + child.norm()) {
            return Err(DecomposeError::Construction(format!(
                "child flux defect {residual} after third-order split"
            )));
        }
        children.push(second_order_path(&child, params, tol)?);
    }
    let right = children.pop().unwrap();
    let left = children.pop().unwrap();
    Ok(LaminateTree::split(*z, direction, t1, t2, left, right))
}

// ---------------------------------------------------------------------------
// Full decomposition
// ---------------------------------------------------------------------------

/// Full decomposition into K-points: a K-point is a leaf; a first-order
/// state splits directly into two K-leaves; otherwise the third-order
/// conditions are verified and the state splits into two flux-consistent
/// children which are expanded by sphere moves. At most 8 leaves.
pub fn decompose(z: &State, params: &Params, tol: f64) -> Result<LaminateTree, DecomposeError> {
    if in_k(z, params, tol) {
        return Ok(LaminateTree::Leaf { state: *z });
    }
    if z.alpha.norm() > params.r() + tol || z.beta.norm() > params.s() + tol {
        return Err(DecomposeError::OutOfBall);
    }
    match first_order_witness(z, params, tol) {
        Ok(Some(w)) => return first_order_split(z, &w, params, tol),
        Ok(None) | Err(DecomposeError::NotStrictInterior) => {}
        Err(e) => return Err(e),
    }
    match third_order_witness(z, params, tol)? {
        ThirdOrderWitness::SecondOrder => second_order_path(z, params, tol),
        ThirdOrderWitness::Split(w) => third_order_split(z, &w, params, tol),
    }
}

/// Sufficient-condition membership in the lamination hull (order <= 3).
pub fn in_lower_hull(z: &State, params: &Params, tol: f64) -> bool {
    decompose(z, params, tol).is_ok()
}
