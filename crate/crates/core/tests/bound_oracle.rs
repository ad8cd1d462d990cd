mod common;

use common::{brute_hoffman, lp_suite, random_lp, rng, sampled_inner_min};
use privcon::lp::solve_lp;
use privcon::matrix::dot;
use privcon::{
    cost_bound, hoffman_constant, inner_cone_min, privatize_matrix, support_width, xi_term,
    ConstraintSystem, Error, LinearProgram, Matrix, PrivacyParams, XiCase,
};
use rand::Rng;

fn random_matrix<R: Rng>(r: &mut R, m: usize, n: usize) -> Matrix {
    Matrix::from_fn(m, n, |_, _| r.gen_range(-1.0..1.0))
}

#[test]
fn inner_min_matches_sphere_sampling() {
    let mut r = rng(21);
    for _ in 0..20 {
        let m = random_matrix(&mut r, 3, 2);
        let exact = inner_cone_min(&m);
        let sampled = sampled_inner_min(&m, 1_000_000, &mut r);
        assert!(exact <= sampled + 1e-12, "{exact} above sampled {sampled}");
        assert!(sampled - exact < 1e-3, "{exact} vs {sampled}");
    }
}

#[test]
fn hoffman_matches_brute_force() {
    let mut r = rng(22);
    for _ in 0..10 {
        let a = random_matrix(&mut r, 3, 2);
        let brute = brute_hoffman(&a, 200_000, &mut r).expect("single rows are admissible");
        let h = hoffman_constant(&a).unwrap();
        assert!((h - brute).abs() <= 0.01 * brute, "{h} vs {brute}");
    }
}

#[test]
fn hoffman_small_cases() {
    for n in 1..=5 {
        assert_eq!(hoffman_constant(&Matrix::identity(n)).unwrap(), 1.0);
    }
    let two = Matrix::from_rows(vec![vec![2.0]]).unwrap();
    assert_eq!(hoffman_constant(&two).unwrap(), 0.5);
    assert!(matches!(
        hoffman_constant(&Matrix::zeros(1, 3)),
        Err(Error::DegenerateHoffman)
    ));
    assert!(matches!(
        hoffman_constant(&Matrix::filled(15, 2, 1.0)),
        Err(Error::HoffmanSizeCap { rows: 15, .. })
    ));
}

#[test]
fn hoffman_scales_reciprocally() {
    let mut r = rng(23);
    for _ in 0..20 {
        let a = random_matrix(&mut r, 4, 3);
        let h = hoffman_constant(&a).unwrap();
        for alpha in [0.3, 2.5, 7.0] {
            let scaled = hoffman_constant(&a.scale(alpha)).unwrap();
            assert!((scaled - h / alpha).abs() <= 1e-9 * h / alpha);
        }
    }
}

fn one_by_one(a: f64, sup: f64) -> ConstraintSystem {
    ConstraintSystem::with_inferred_mask(
        Matrix::from_rows(vec![vec![a]]).unwrap(),
        vec![1.0],
        Matrix::from_rows(vec![vec![sup]]).unwrap(),
    )
    .unwrap()
}

#[test]
fn xi_closed_forms() {
    let p = PrivacyParams::new(1.0, 0.05, 1.0).unwrap();
    let xi = xi_term(&one_by_one(0.1, 100.0), &p).unwrap();
    let s = ((1f64.exp() - 1.0) / 0.05 + 1.0).ln();
    assert_eq!(xi.case, XiCase::Interior);
    assert!((xi.xi - (2.0 + s * s).sqrt()).abs() < 1e-12);

    let xi = xi_term(&one_by_one(2.0, 2.0), &p).unwrap();
    assert_eq!(xi.case, XiCase::Clipped);
    assert_eq!(xi.xi, 0.0);
}

#[test]
fn clipped_case_detection_is_entrywise() {
    let mut r = rng(24);
    let p = PrivacyParams::new(2.0, 0.1, 0.3).unwrap();
    for _ in 0..200 {
        let sys = common::random_system(&mut r, 3, 3);
        let clipped = sys.a().iter_indexed().any(|((i, j), &a)| {
            if sys.zero_mask()[(i, j)] {
                return false;
            }
            let s = support_width(p.k, p.epsilon, p.delta, sys.nonzero_count(i)).unwrap();
            a + 2.0 * s >= sys.sup_a()[(i, j)]
        });
        let xi = xi_term(&sys, &p).unwrap();
        assert_eq!(xi.case == XiCase::Clipped, clipped);
        assert!(xi.xi >= 0.0);
        if clipped {
            assert_eq!(xi.xi, sys.a().frobenius_distance(sys.sup_a()));
        }
    }
}

#[test]
fn interior_xi_decreases_in_epsilon() {
    let a = Matrix::from_rows(vec![vec![1.0, 0.0, 2.0], vec![0.5, 0.5, 0.5]]).unwrap();
    let sys =
        ConstraintSystem::with_inferred_mask(a, vec![1.0, 1.0], Matrix::filled(2, 3, 1e4)).unwrap();
    let mut prev = f64::INFINITY;
    for eps in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let xi = xi_term(&sys, &PrivacyParams::new(eps, 0.05, 1.0).unwrap()).unwrap();
        assert_eq!(xi.case, XiCase::Interior);
        assert!(xi.xi < prev);
        prev = xi.xi;
    }
}

#[test]
fn bound_on_unit_box() {
    let sys = ConstraintSystem::with_inferred_mask(
        Matrix::identity(2),
        vec![1.0, 1.0],
        Matrix::filled(2, 2, 100.0),
    )
    .unwrap();
    let p = PrivacyParams::new(1.0, 0.05, 1.0).unwrap();
    let c = vec![3.0, 4.0];
    let report = cost_bound(&LinearProgram::new(c, sys.clone()).unwrap(), &p).unwrap();
    let s = support_width(1.0, 1.0, 0.05, 1).unwrap();
    let xi = (2.0 * (2.0 * 2.0 + s * s)).sqrt();
    assert_eq!(report.xi_case, XiCase::Interior);
    assert!((report.bound - 5.0 * 2f64.sqrt() * xi).abs() < 1e-9);

    let zero = cost_bound(&LinearProgram::new(vec![0.0, 0.0], sys).unwrap(), &p).unwrap();
    assert_eq!(zero.bound, 0.0);
}

#[test]
fn unbounded_region_gives_infinite_bound() {
    let sys = ConstraintSystem::with_inferred_mask(
        Matrix::from_rows(vec![vec![1.0, -1.0]]).unwrap(),
        vec![1.0],
        Matrix::from_rows(vec![vec![2.0, 0.0]]).unwrap(),
    )
    .unwrap();
    let lp = LinearProgram::new(vec![1.0, 1.0], sys).unwrap();
    let report = cost_bound(&lp, &PrivacyParams::new(1.0, 0.05, 1.0).unwrap()).unwrap();
    assert!(report.bound.is_infinite());
    let json = serde_json::to_value(report).unwrap();
    assert_eq!(json["bound"], "inf");
}

fn mean_gap(lp: &LinearProgram, p: &PrivacyParams, draws: u64) -> f64 {
    let optimum = solve_lp(&lp.c, &lp.system).objective.unwrap();
    let total: f64 = (0..draws)
        .map(|seed| {
            let private = privatize_matrix(&lp.system, p, seed).unwrap();
            let sol = solve_lp(&lp.c, &private.system(&lp.system).unwrap());
            (optimum - dot(&lp.c, &sol.x.unwrap())).abs()
        })
        .sum();
    total / draws as f64
}

#[test]
fn monte_carlo_gap_is_below_bound() {
    let p = PrivacyParams::new(1.0, 0.05, 0.5).unwrap();
    let lp = random_lp(&mut rng(25), 3, 2);
    let bound = cost_bound(&lp, &p).unwrap().bound;
    assert!(mean_gap(&lp, &p, 500) <= bound);

    for lp in lp_suite(26, 5) {
        let bound = cost_bound(&lp, &p).unwrap().bound;
        assert!(mean_gap(&lp, &p, 200) <= bound);
    }
}
