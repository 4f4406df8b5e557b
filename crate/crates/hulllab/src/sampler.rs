//! Deterministic random state generation and the Monte Carlo
//! classification driver. Every sample draws from its own counter-derived
//! child stream, so results are identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::hull::{classify, BoundaryKind, Verdict};
use crate::laminates::{decompose, LaminateTree};
use crate::numeric::{nuclear_norm, Mat3, Vec3};
use crate::state::{g_defect, m0, ohm_defect, Params, State};
use crate::wave_cone::{direction_from_vectors, lambda_residual, Direction, Witness};

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("sample generation failed after {0} attempts")]
    Generation(usize),
    #[error("laminate depth {0} unsupported; expected 0..=3")]
    BadDepth(usize),
    #[error("empty state cloud")]
    EmptyCloud,
}

/// 64-bit finalizer of the splitmix64 generator, used to decorrelate the
/// (seed, index) pairs that key the per-sample child streams.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent child stream for sample `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)))
}

/// Uniform direction on the unit sphere.
pub fn unit_vec(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if let Some(u) = v.normalized(1e-6) {
            return u;
        }
    }
}

/// Uniform point in the closed ball of the given radius, scaled away from
/// the boundary by `margin` on each side.
fn ball_vec(rng: &mut ChaCha8Rng, radius: f64, margin: f64) -> Vec3 {
    let u: f64 = rng.gen_range(margin..(1.0 - margin));
    unit_vec(rng) * (radius * u.cbrt() * (1.0 - margin))
}

/// Uniform sample from the constraint set: both spheres saturated and the
/// flux matrix determined by the pair.
pub fn sample_k(params: &Params, rng: &mut ChaCha8Rng) -> State {
    let alpha = unit_vec(rng) * params.r();
    let beta = unit_vec(rng) * params.s();
    let m = Mat3::outer(&alpha, &beta) + Mat3::identity() * params.p();
    State::new(alpha, beta, m)
}

/// Flux-consistent state (vanishing defect matrix) strictly inside the
/// ball product, with margins keeping both sphere moves well conditioned.
pub fn m0zero_state(params: &Params, rng: &mut ChaCha8Rng) -> State {
    let alpha = ball_vec(rng, params.r(), 0.1);
    let beta = ball_vec(rng, params.s(), 0.1);
    let m = Mat3::outer(&alpha, &beta) + Mat3::identity() * params.p();
    State::new(alpha, beta, m)
}

/// Solve for a unit v with n.v = 0 and beta.v = target: the intersection
/// of the unit circle in the plane orthogonal to n with an affine line.
fn unit_with_constraints(n: Vec3, beta: &Vec3, target: f64, rng: &mut ChaCha8Rng) -> Option<Vec3> {
    let (e, f) = match n.normalized(1e-9) {
        Some(nh) => {
            let e = nh.any_orthogonal();
            (e, nh.cross(&e))
        }
        None => {
            // Degenerate plane constraint: any orthonormal pair will do.
            let e = unit_vec(rng);
            let f = e.any_orthogonal();
            (e, f)
        }
    };
    let bp = Vec3::new(beta.dot(&e), beta.dot(&f), 0.0);
    let nb = bp.norm();
    if nb < 1e-6 || target.abs() > nb * (1.0 - 1e-9) {
        return None;
    }
    let along = target / (nb * nb);
    let ortho = (1.0 - (target / nb).powi(2)).max(0.0).sqrt() / nb;
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let x = along * bp[0] + sign * ortho * -bp[1];
    let y = along * bp[1] + sign * ortho * bp[0];
    (e * x + f * y).normalized(1e-9)
}

/// Interior state with a rank-one defect satisfying every third-order
/// membership condition: coplanarity, the defect/radius pairing, and a
/// nuclear norm strictly below the bound G.
pub fn rank_one_interior_state(params: &Params, rng: &mut ChaCha8Rng) -> Option<State> {
    rank_one_interior_parts(params, rng).map(|(z, _, _, _)| z)
}

/// Like `rank_one_interior_state` but also exposes the rank-one factors (u, v) and
/// the defect magnitude c, M_0 = -c u otimes v.
pub(crate) fn rank_one_interior_parts(
    params: &Params,
    rng: &mut ChaCha8Rng,
) -> Option<(State, Vec3, Vec3, f64)> {
    let alpha = ball_vec(rng, params.r(), 0.15);
    let beta = ball_vec(rng, params.s(), 0.15);
    if beta.norm() < 0.1 * params.s() {
        return None;
    }
    let da = params.r() * params.r() - alpha.norm_sq();
    let db = params.s() * params.s() - beta.norm_sq();
    let u = unit_vec(rng);
    // beta.v = -(alpha.u) sqrt(db/da) enforces both the pairing equality
    // and the sign condition; v also stays coplanar with (alpha - beta, u).
    let target = -alpha.dot(&u) * (db / da).sqrt();
    let n = (alpha - beta).cross(&u);
    let v = unit_with_constraints(n, &beta, target, rng)?;
    let g = (da * db).sqrt();
    let c = g * rng.gen_range(0.1..0.9);
    let m = Mat3::outer(&alpha, &beta) + Mat3::identity() * params.p() - Mat3::outer(&u, &v) * c;
    Some((State::new(alpha, beta, m), u, v, c))
}

/// Interior point of the upper-estimate set: like `rank_one_interior_state` but with
/// only the coplanarity constraint (which keeps the Ohm defect zero), so
/// the pairing generically fails and the state need not be a laminate.
pub fn interior_u_state(params: &Params, rng: &mut ChaCha8Rng) -> Option<State> {
    let level = rng.gen_range(0.1..0.9);
    boundary_like(params, rng, level)
}

/// A random wave-cone direction through z: abar free, bbar rotated into
/// the plane spanned by abar and alpha - beta so the coplanarity
/// condition holds.
pub fn random_cone_direction(z: &State, rng: &mut ChaCha8Rng, tol: f64) -> Option<Direction> {
    let abar = unit_vec(rng);
    let diff = z.alpha - z.beta;
    let n = diff.cross(&abar);
    let raw = unit_vec(rng);
    let bbar = match n.normalized(1e-9) {
        Some(nh) => (raw - nh * raw.dot(&nh)).normalized(1e-3)?,
        None => raw,
    };
    direction_from_vectors(z, abar, bbar, tol).ok()
}

/// State on the nuclear-norm boundary of the upper set: rank-one defect
/// saturating G, coplanar but with a free rotation in the plane, so the
/// pairing condition generically fails and the state is a gap candidate.
pub fn boundary_state(params: &Params, rng: &mut ChaCha8Rng) -> Option<State> {
    boundary_like(params, rng, 1.0)
}

fn boundary_like(params: &Params, rng: &mut ChaCha8Rng, level: f64) -> Option<State> {
    let alpha = ball_vec(rng, params.r(), 0.15);
    let beta = ball_vec(rng, params.s(), 0.15);
    let da = params.r() * params.r() - alpha.norm_sq();
    let db = params.s() * params.s() - beta.norm_sq();
    let u = unit_vec(rng);
    let n = (alpha - beta).cross(&u);
    let v = match n.normalized(1e-9) {
        Some(nh) => {
            let e = nh.any_orthogonal();
            let f = nh.cross(&e);
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            e * theta.cos() + f * theta.sin()
        }
        None => unit_vec(rng),
    };
    if u.cross(&v).norm() < 1e-3 {
        return None;
    }
    let c = (da * db).sqrt() * level;
    let m = Mat3::outer(&alpha, &beta) + Mat3::identity() * params.p() - Mat3::outer(&u, &v) * c;
    Some(State::new(alpha, beta, m))
}

/// Two constraint-set states whose difference lies in the wave cone,
/// together with the connecting plane-wave witness. The second endpoint's
/// beta is drawn from the circle cut out of its sphere by the coplanarity
/// condition; the witness is the plane normal itself.
fn k_pair(params: &Params, rng: &mut ChaCha8Rng) -> Option<(State, State, Witness)> {
    let r = params.r();
    let s = params.s();
    let alpha1 = unit_vec(rng) * r;
    let alpha2 = unit_vec(rng) * r;
    if (alpha1 - alpha2).norm() < 0.2 * r {
        return None;
    }
    let beta1 = unit_vec(rng) * s;
    let w = (alpha1 - alpha2).cross(&(alpha1 - beta1)).normalized(1e-3 * r * s)?;
    let h = w.dot(&beta1);
    let rho_sq = s * s - h * h;
    if rho_sq < (0.2 * s) * (0.2 * s) {
        return None;
    }
    let rho = rho_sq.sqrt();
    let e = w.any_orthogonal();
    let f = w.cross(&e);
    let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let beta2 = w * h + (e * theta.cos() + f * theta.sin()) * rho;
    if (beta1 - beta2).norm() < 0.2 * s {
        return None;
    }
    let mk = |a: Vec3, b: Vec3| {
        State::new(a, b, Mat3::outer(&a, &b) + Mat3::identity() * params.p())
    };
    // w is orthogonal to alpha1 - alpha2, beta1 - beta2, and alpha1 - beta1,
    // which is exactly the witness system for the connecting segment.
    let witness = Witness { xi: w, c: -w.dot(&beta2) };
    Some((mk(alpha1, beta1), mk(alpha2, beta2), witness))
}

fn depth1_tree(params: &Params, rng: &mut ChaCha8Rng) -> Option<(State, LaminateTree)> {
    let (z1, z2, witness) = k_pair(params, rng)?;
    let diff = z1.sub(&z2);
    let mut direction = Direction::new(diff.alpha, diff.beta, diff.m);
    direction.witness = Some(witness);
    if lambda_residual(&direction, &witness) > 1e-9 * (1.0 + direction.norm()) {
        return None;
    }
    let mu: f64 = rng.gen_range(0.2..0.8);
    let bary = z1.scale(mu).add(&z2.scale(1.0 - mu));
    let tree = LaminateTree::split(
        bary,
        direction,
        -mu,
        1.0 - mu,
        LaminateTree::Leaf { state: z2 },
        LaminateTree::Leaf { state: z1 },
    );
    Some((bary, tree))
}

const MAX_ATTEMPTS: usize = 200;

/// Forward-generate a laminate of the requested depth together with its
/// decomposition tree. Depth 1 builds the tree directly from a cone-
/// connected pair of constraint-set states; depths 2 and 3 construct the
/// barycenter from the flux-consistent and rank-one parametrizations and
/// verify that the decomposition realizes the expected depth.
pub fn forward_laminate(
    params: &Params,
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(State, LaminateTree), SampleError> {
    let tol = params.tau();
    match depth {
        0 => {
            let z = sample_k(params, rng);
            Ok((z, LaminateTree::Leaf { state: z }))
        }
        1 => {
            for _ in 0..MAX_ATTEMPTS {
                if let Some(out) = depth1_tree(params, rng) {
                    return Ok(out);
                }
            }
            Err(SampleError::Generation(MAX_ATTEMPTS))
        }
        2 => {
            for _ in 0..MAX_ATTEMPTS {
                let z = m0zero_state(params, rng);
                if let Ok(tree) = decompose(&z, params, tol) {
                    if tree.depth() == 2 {
                        return Ok((z, tree));
                    }
                }
            }
            Err(SampleError::Generation(MAX_ATTEMPTS))
        }
        3 => {
            for _ in 0..MAX_ATTEMPTS {
                let Some(z) = rank_one_interior_state(params, rng) else { continue };
                if let Ok(tree) = decompose(&z, params, tol) {
                    if tree.depth() == 3 {
                        return Ok((z, tree));
                    }
                }
            }
            Err(SampleError::Generation(MAX_ATTEMPTS))
        }
        d => Err(SampleError::BadDepth(d)),
    }
}

/// Sampling regimes for the Monte Carlo classifier.
#[derive(Debug, Clone)]
pub enum Region {
    /// Constraint-set states; always inside the lower hull.
    KPoints,
    /// Forward-generated laminates of depth 1-3, cycling by index.
    Laminates,
    /// Upper-boundary states with saturated nuclear norm.
    Boundary,
    /// An explicit list of states.
    Cloud(Vec<State>),
}

/// Per-verdict tallies of a classification run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub in_lower_hull: usize,
    pub in_upper_interior: usize,
    pub boundary_gap: usize,
    pub boundary_first_order: usize,
    pub boundary_rank_deficient: usize,
    pub outside_upper: usize,
    pub off_ohm_manifold: usize,
    pub generation_failures: usize,
}

impl Counts {
    fn bump(&mut self, v: &Verdict) {
        match v {
            Verdict::InLowerHull => self.in_lower_hull += 1,
            Verdict::InUpperInterior => self.in_upper_interior += 1,
            Verdict::OnUpperBoundary(BoundaryKind::GapCandidate) => self.boundary_gap += 1,
            Verdict::OnUpperBoundary(BoundaryKind::FirstOrderPoint) => {
                self.boundary_first_order += 1
            }
            Verdict::OnUpperBoundary(BoundaryKind::RankDeficient) => {
                self.boundary_rank_deficient += 1
            }
            Verdict::OutsideUpper => self.outside_upper += 1,
            Verdict::OffOhmManifold => self.off_ohm_manifold += 1,
        }
    }
}

/// One classified sample with its scalar diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct CloudRow {
    pub state: State,
    pub verdict: Verdict,
    pub nuclear_norm: f64,
    pub g_defect: f64,
    pub ohm_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub requested: usize,
    pub generated: usize,
    pub seed: u64,
    pub counts: Counts,
    pub rows: Vec<CloudRow>,
}

fn sample_state(params: &Params, region: &Region, seed: u64, index: usize) -> Option<State> {
    let mut rng = stream(seed, index as u64);
    match region {
        Region::KPoints => Some(sample_k(params, &mut rng)),
        Region::Laminates => {
            let depth = 1 + index % 3;
            forward_laminate(params, depth, &mut rng).ok().map(|(z, _)| z)
        }
        Region::Boundary => {
            for _ in 0..MAX_ATTEMPTS {
                if let Some(z) = boundary_state(params, &mut rng) {
                    return Some(z);
                }
            }
            None
        }
        Region::Cloud(states) => states.get(index).copied(),
    }
}

fn classify_row(params: &Params, tol: f64, state: State) -> CloudRow {
    let verdict = classify(&state, params, tol);
    CloudRow {
        state,
        verdict,
        nuclear_norm: nuclear_norm(&m0(&state, params)).unwrap_or(f64::NAN),
        g_defect: g_defect(&state, params).unwrap_or(f64::NAN),
        ohm_defect: ohm_defect(&state),
    }
}

fn assemble(
    requested: usize,
    seed: u64,
    rows_opt: Vec<Option<CloudRow>>,
) -> ClassificationReport {
    let mut counts = Counts::default();
    let mut rows = Vec::with_capacity(rows_opt.len());
    for row in rows_opt.into_iter() {
        match row {
            Some(r) => {
                counts.bump(&r.verdict);
                rows.push(r);
            }
            None => counts.generation_failures += 1,
        }
    }
    ClassificationReport { requested, generated: rows.len(), seed, counts, rows }
}

fn effective_n(n: usize, region: &Region) -> usize {
    match region {
        Region::Cloud(states) => states.len(),
        _ => n,
    }
}

/// Classify `n` samples from the region. Runs data-parallel when the
/// `parallel` feature is enabled; output is independent of thread count
/// because each index owns its child stream and rows keep index order.
pub fn monte_carlo_classify(
    params: &Params,
    n: usize,
    seed: u64,
    tol: f64,
    region: &Region,
) -> Result<ClassificationReport, SampleError> {
    let n = effective_n(n, region);
    if n == 0 {
        return Err(SampleError::EmptyCloud);
    }
    #[cfg(feature = "parallel")]
    let rows_opt: Vec<Option<CloudRow>> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| sample_state(params, region, seed, i).map(|z| classify_row(params, tol, z)))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows_opt: Vec<Option<CloudRow>> = (0..n)
        .map(|i| sample_state(params, region, seed, i).map(|z| classify_row(params, tol, z)))
        .collect();
    Ok(assemble(n, seed, rows_opt))
}

/// Sequential reference implementation of `monte_carlo_classify`;
/// available regardless of features for cross-checking the parallel path.
pub fn monte_carlo_classify_seq(
    params: &Params,
    n: usize,
    seed: u64,
    tol: f64,
    region: &Region,
) -> Result<ClassificationReport, SampleError> {
    let n = effective_n(n, region);
    if n == 0 {
        return Err(SampleError::EmptyCloud);
    }
    let rows_opt: Vec<Option<CloudRow>> = (0..n)
        .map(|i| sample_state(params, region, seed, i).map(|z| classify_row(params, tol, z)))
        .collect();
    Ok(assemble(n, seed, rows_opt))
}
