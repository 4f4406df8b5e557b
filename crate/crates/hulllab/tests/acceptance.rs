//! Acceptance suite. Each test prints an explicit pass/fail line for its
//! criterion; tolerances are pinned in the assertions.

use std::process::Command;
use std::time::Instant;

use hulllab::hull::{check_h_convexity, classify, gap_probe, BoundaryKind, Verdict};
use hulllab::laminates::{decompose, first_order_witness, DecomposeError, LaminateTree};
use hulllab::numeric::{Mat3, Vec3};
use hulllab::sampler::{forward_laminate, stream, unit_vec};
use hulllab::state::{f0, f0_skew_part, in_k, Params, State};
use hulllab::wave_cone::{direction_from_vectors, lambda_residual, Direction};

fn params() -> Params {
    Params::unit()
}

fn tau() -> f64 {
    Params::unit().tau()
}

fn z_star() -> State {
    State::new(
        Vec3::new(0.0, 0.6, 0.0),
        Vec3::ZERO,
        Mat3::outer(&Vec3::EX, &Vec3::EY) * 0.8,
    )
}

fn z_prime() -> State {
    State::new(
        Vec3::new(0.0, 0.6, 0.0),
        Vec3::ZERO,
        Mat3::outer(&Vec3::EX, &Vec3::EY) * 0.4,
    )
}

fn z_gap() -> State {
    State::new(
        Vec3::EX * 0.6,
        Vec3::ZERO,
        Mat3::outer(&Vec3::EX, &Vec3::EY) * 0.8,
    )
}

fn gate(name: &str, ok: bool) {
    println!("acceptance {}: {}", name, if ok { "pass" } else { "FAIL" });
    assert!(ok, "acceptance {name} failed");
}

/// Criterion 1: the worked first-order decomposition, exact leaves and
/// weights, sub-millisecond runtime.
#[test]
fn criterion_1_worked_first_order_example() {
    let p = params();
    let tree = decompose(&z_star(), &p, tau()).unwrap();
    let leaves = tree.leaves_with_weights();
    let mut ok = leaves.len() == 2;

    let expect_plus = State::new(
        Vec3::new(0.8, 0.6, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Mat3::outer(&Vec3::EX, &Vec3::EY) * 0.8 + Mat3::outer(&Vec3::EY, &Vec3::EY) * 0.6,
    );
    let expect_minus = State::new(
        Vec3::new(-0.8, 0.6, 0.0),
        Vec3::new(0.0, -1.0, 0.0),
        Mat3::outer(&Vec3::EX, &Vec3::EY) * 0.8 - Mat3::outer(&Vec3::EY, &Vec3::EY) * 0.6,
    );
    for expect in [&expect_plus, &expect_minus] {
        ok &= leaves
            .iter()
            .any(|(z, w)| z.sub(expect).norm() <= 1e-10 && (w - 0.5).abs() <= 1e-12);
    }
    for (z, _) in &leaves {
        ok &= in_k(z, &p, 1e-10);
    }

    // Runtime: average over repeats after the first call above warmed up.
    let reps = 100;
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(decompose(&z_star(), &p, tau()).unwrap());
    }
    let per_call = start.elapsed() / reps;
    ok &= per_call.as_micros() < 1000;

    gate("1 worked first-order example", ok);
}

/// Criterion 2: the worked third-order decomposition, 8 leaves in K,
/// tight recombination.
#[test]
fn criterion_2_worked_third_order_example() {
    let p = params();
    let tree = decompose(&z_prime(), &p, tau()).unwrap();
    let leaves = tree.leaves_with_weights();
    let mut ok = leaves.len() == 8;
    for (z, _) in &leaves {
        ok &= in_k(z, &p, 1e-8);
    }
    let (recombined, _) = tree.recombine();
    ok &= recombined.sub(&z_prime()).norm() <= 1e-10;
    gate("2 worked third-order example", ok);
}

/// Criterion 3: every seeded depth-1 forward laminate with interior
/// midpoint is accepted by the first-order witness test.
#[test]
fn criterion_3_forward_backward_first_order() {
    let p = params();
    let mut rejections = 0;
    for i in 0..10_000u64 {
        let (z, _) = forward_laminate(&p, 1, &mut stream(0xFB01, i)).unwrap();
        match first_order_witness(&z, &p, tau()) {
            Ok(Some(_)) => {}
            _ => rejections += 1,
        }
    }
    gate("3 forward/backward first order", rejections == 0);
}

/// Criterion 4: 1e5 forward laminates of depths 1-3 all satisfy the
/// closed upper-set membership, sequentially, under 60 seconds.
#[test]
fn criterion_4_sandwich() {
    let p = params();
    let start = Instant::now();
    let mut violations = 0;
    let n = 100_000u64;
    for i in 0..n {
        let depth = 1 + (i % 3) as usize;
        let (z, _) = forward_laminate(&p, depth, &mut stream(0xFB04, i)).unwrap();
        if !hulllab::hull::in_upper(&z, &p, 1e-8, true) {
            violations += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = violations == 0 && elapsed.as_secs() < 60;
    println!("sandwich: {n} laminates in {elapsed:?}, {violations} violations");
    gate("4 sandwich", ok);
}

/// Criterion 5: 1e5 random midpoint convexity tests of the certificate
/// family, violations bounded by 1e-10.
#[test]
fn criterion_5_h_convexity() {
    let report = check_h_convexity(&params(), 100_000, 0xFB05);
    let ok = report.checked == 100_000 && report.is_clean();
    gate("5 H-gamma convexity", ok);
}

/// Criterion 6: the algebraic identity tying the quadratic form of a skew
/// matrix to its axial vector, over 1e4 random skew matrices.
#[test]
fn criterion_6_f0_identity() {
    let mut ok = true;
    for i in 0..10_000u64 {
        let mut rng = stream(0xFB06, i);
        let w = unit_vec(&mut rng) * 3.0;
        let mut a = Mat3::ZERO;
        a.0[1][2] = w[0];
        a.0[2][1] = -w[0];
        a.0[2][0] = w[1];
        a.0[0][2] = -w[1];
        a.0[0][1] = w[2];
        a.0[1][0] = -w[2];
        let f = f0(&a, 1e-12).unwrap();
        let lhs = Mat3::identity() * a.frobenius().powi(2) + a.mul_mat(&a) * 2.0;
        let rhs = Mat3::outer(&f, &f) * 2.0;
        ok &= (lhs - rhs).frobenius() <= 1e-12 * (1.0 + a.frobenius().powi(2));
    }
    gate("6 f0 identity", ok);
}

/// Criterion 7: wave-cone soundness of every constructed direction:
/// witness residual within 1e-9 and a vanishing Ohm defect of the
/// direction itself.
#[test]
fn criterion_7_wave_cone_soundness() {
    let p = params();
    let mut ok = true;
    let mut checked = 0usize;

    let mut audit = |d: &Direction| {
        let scale = 1.0 + d.norm();
        match d.witness {
            Some(w) => ok &= lambda_residual(d, &w) <= 1e-9 * scale,
            None => ok = false,
        }
        let ohm = f0_skew_part(&d.m_bar).dot(&(d.alpha_bar - d.beta_bar));
        ok &= ohm.abs() <= 1e-9 * scale * scale;
        checked += 1;
    };

    // Directions from random coplanar witness pairs at random states.
    for i in 0..2_000u64 {
        let mut rng = stream(0xFB07, i);
        let alpha = unit_vec(&mut rng) * 0.7;
        let beta = unit_vec(&mut rng) * 0.5;
        let z = State::new(alpha, beta, Mat3::outer(&alpha, &beta));
        let abar = unit_vec(&mut rng);
        let raw = unit_vec(&mut rng);
        let n = (alpha - beta).cross(&abar);
        let bbar = match n.normalized(1e-9) {
            Some(nh) => raw - nh * raw.dot(&nh),
            None => raw,
        };
        if bbar.norm() < 0.05 {
            continue;
        }
        if let Ok(d) = direction_from_vectors(&z, abar, bbar, 1e-9) {
            audit(&d);
        }
    }

    // Every split direction inside forward-generated laminate trees.
    fn walk(tree: &LaminateTree, audit: &mut impl FnMut(&Direction)) {
        if let LaminateTree::Split { direction, left, right, .. } = tree {
            audit(direction);
            walk(left, audit);
            walk(right, audit);
        }
    }
    for i in 0..500u64 {
        for depth in 1..=3 {
            let (_, tree) = forward_laminate(&p, depth, &mut stream(0xFB17, i * 4 + depth as u64))
                .unwrap();
            walk(&tree, &mut audit);
        }
    }

    ok &= checked > 3_000;
    gate("7 wave-cone soundness", ok);
}

/// Criterion 8: the gap exhibit: boundary classification, pairing
/// residual of magnitude 0.6, and the pairing-equality failure with
/// sides (0, 0.48).
#[test]
fn criterion_8_gap_exhibit() {
    let p = params();
    let z = z_gap();
    let mut ok = classify(&z, &p, tau()) == Verdict::OnUpperBoundary(BoundaryKind::GapCandidate);

    let probe = gap_probe(&z, &p, tau()).unwrap();
    ok &= probe.rank_one && probe.magnitude_match && probe.coplanar && !probe.pairing;
    ok &= (probe.pairing_residual.abs() - 0.6).abs() <= 1e-10;
    ok &= probe.pairing_sides[0].abs() <= 1e-10;
    ok &= (probe.pairing_sides[1] - 0.48).abs() <= 1e-10;

    match decompose(&z, &p, tau()) {
        Err(DecomposeError::Eq28Mismatch { lhs, rhs }) => {
            ok &= lhs.abs() <= 1e-10 && (rhs - 0.48).abs() <= 1e-10;
        }
        _ => ok = false,
    }
    gate("8 gap exhibit", ok);
}

/// Criterion 9: the sampling CLI is byte-deterministic across repeated
/// runs and across thread counts 1 and 8.
#[test]
fn criterion_9_determinism() {
    let bin = env!("CARGO_BIN_EXE_hulllab");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (name, threads) in [("a.csv", "1"), ("b.csv", "1"), ("c.csv", "8")] {
        let path = dir.path().join(name);
        let status = Command::new(bin)
            .args([
                "sample",
                "--region",
                "boundary",
                "--n",
                "500",
                "--seed",
                "7",
                "--format",
                "csv",
                "--out",
            ])
            .arg(&path)
            .env("HULLLAB_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&path).unwrap());
    }
    let ok = outputs[0] == outputs[1] && outputs[0] == outputs[2] && !outputs[0].is_empty();
    gate("9 determinism", ok);
}
