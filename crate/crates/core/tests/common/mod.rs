//! Instance generators and brute-force reference oracles shared by the
//! integration tests.
#![allow(dead_code)]

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use privcon::matrix::dot;
use privcon::{validate, ConstraintSystem, LinearProgram, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random LP that passes validation. Row 0 is strictly positive, which
/// keeps every tightened region bounded; other rows mix signs and
/// structural zeros. `b` is chosen so that the worst-case matrix is
/// feasible at a random interior point.
pub fn random_lp<R: Rng>(rng: &mut R, m: usize, n: usize) -> LinearProgram {
    let mut mask = Matrix::filled(m, n, false);
    for i in 1..m {
        for j in 0..n {
            mask[(i, j)] = rng.gen_bool(0.25);
        }
        if mask.row(i).iter().all(|&z| z) {
            mask[(i, rng.gen_range(0..n))] = false;
        }
    }
    let mut a = Matrix::zeros(m, n);
    let mut sup = Matrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            if mask[(i, j)] {
                continue;
            }
            let v = if i > 0 && rng.gen_bool(0.2) {
                rng.gen_range(-1.0..-0.1)
            } else {
                rng.gen_range(0.1..2.0)
            };
            a[(i, j)] = v;
            sup[(i, j)] = v + rng.gen_range(0.3..3.0);
        }
    }
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let b: Vec<f64> = (0..m)
        .map(|i| dot(sup.row(i), &x0) + rng.gen_range(0.05..1.0))
        .collect();
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
    let sys = ConstraintSystem::new(a, b, mask, sup).expect("generated system is consistent");
    let lp = LinearProgram::new(c, sys).expect("generated LP is consistent");
    validate(&lp).expect("generated LP validates");
    lp
}

/// `count` validated LPs with `2 <= m, n <= 6`.
pub fn lp_suite(seed: u64, count: usize) -> Vec<LinearProgram> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let m = r.gen_range(2..=6);
            let n = r.gen_range(2..=6);
            random_lp(&mut r, m, n)
        })
        .collect()
}

/// Mixed-sign instance; row 0 is positive so any nonempty region is
/// bounded, while the other rows can make it empty.
pub fn mixed_instance<R: Rng>(r: &mut R, m: usize, n: usize) -> (Vec<f64>, Matrix, Vec<f64>) {
    let a = Matrix::from_fn(m, n, |i, _| {
        if i == 0 {
            r.gen_range(0.1..1.0)
        } else {
            r.gen_range(-1.0..1.0)
        }
    });
    let b = (0..m)
        .map(|i| {
            if i == 0 {
                r.gen_range(0.5..2.0)
            } else {
                r.gen_range(-0.5..2.0)
            }
        })
        .collect();
    let c = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    (c, a, b)
}

/// Every vertex of `{x >= 0 : A x <= b}`, by solving each choice of `n`
/// tight constraints out of the `m + n`.
pub fn vertices(a: &Matrix, b: &[f64]) -> Vec<Vec<f64>> {
    let (m, n) = a.shape();
    let mut out = Vec::new();
    for subset in (0..m + n).combinations(n) {
        let mut lhs = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for (r, &k) in subset.iter().enumerate() {
            if k < m {
                for j in 0..n {
                    lhs[(r, j)] = a[(k, j)];
                }
                rhs[r] = b[k];
            } else {
                lhs[(r, k - m)] = 1.0;
            }
        }
        let sv = lhs.clone().svd(false, false).singular_values;
        if sv.min() <= 1e-10 * sv.max().max(1.0) {
            continue;
        }
        let Some(sol) = lhs.lu().solve(&rhs) else {
            continue;
        };
        let x: Vec<f64> = sol
            .iter()
            .map(|&v| if v.abs() < 1e-12 { 0.0 } else { v })
            .collect();
        let feasible = x.iter().all(|&v| v >= -1e-9)
            && (0..m).all(|i| dot(a.row(i), &x) <= b[i] + 1e-9 * (1.0 + b[i].abs()));
        if feasible {
            out.push(x);
        }
    }
    out
}

/// Best objective over all vertices, or `None` when there are none
/// (the region is empty).
pub fn vertex_optimum(c: &[f64], a: &Matrix, b: &[f64]) -> Option<f64> {
    vertices(a, b)
        .iter()
        .map(|x| dot(c, x))
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |w| w.max(v)))
        })
}

/// Largest norm over a grid of `(x1, x2)` with `x3` pushed as far as
/// feasibility allows. Requires three columns and a nonnegative `A` with
/// positive entries in every column. Returns the norm and the grid spacing
/// in each of the first two coordinates.
pub fn grid_max_norm3(a: &Matrix, b: &[f64], steps: usize) -> (f64, [f64; 2]) {
    assert_eq!(a.ncols(), 3);
    let m = a.nrows();
    let upper = |j: usize| {
        (0..m)
            .filter(|&i| a[(i, j)] > 0.0)
            .map(|i| b[i] / a[(i, j)])
            .fold(f64::INFINITY, f64::min)
    };
    let (u1, u2) = (upper(0), upper(1));
    let (h1, h2) = (u1 / steps as f64, u2 / steps as f64);
    let mut best = 0.0f64;
    for i1 in 0..=steps {
        let x1 = i1 as f64 * h1;
        for i2 in 0..=steps {
            let x2 = i2 as f64 * h2;
            let mut x3 = f64::INFINITY;
            let mut ok = true;
            for i in 0..m {
                let r = b[i] - a[(i, 0)] * x1 - a[(i, 1)] * x2;
                if r < 0.0 {
                    ok = false;
                    break;
                }
                if a[(i, 2)] > 0.0 {
                    x3 = x3.min(r / a[(i, 2)]);
                }
            }
            if ok {
                best = best.max((x1 * x1 + x2 * x2 + x3 * x3).sqrt());
            }
        }
    }
    (best, [h1, h2])
}

fn cone_value(m: &Matrix, w: &[f64]) -> f64 {
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return f64::INFINITY;
    }
    let image: f64 = (0..m.ncols())
        .map(|j| {
            let t: f64 = w.iter().enumerate().map(|(i, wi)| wi * m[(i, j)]).sum();
            t * t
        })
        .sum();
    image.sqrt() / norm
}

/// `min ||M^T v||` over unit `v >= 0`: dense random sampling of the
/// nonnegative orthant followed by a shrinking pattern search from the best
/// sample.
pub fn sampled_inner_min<R: Rng>(m: &Matrix, samples: usize, rng: &mut R) -> f64 {
    let r = m.nrows();
    let mut best_w = vec![1.0; r];
    let mut best = cone_value(m, &best_w);
    let mut w = vec![0.0; r];
    for _ in 0..samples {
        for v in w.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let f = cone_value(m, &w);
        if f < best {
            best = f;
            best_w.copy_from_slice(&w);
        }
    }
    let scale = best_w.iter().cloned().fold(0.0, f64::max);
    for v in best_w.iter_mut() {
        *v /= scale;
    }
    let mut step = 0.1;
    while step > 1e-13 {
        let mut improved = false;
        for i in 0..r {
            for dir in [-1.0, 1.0] {
                let mut trial = best_w.clone();
                trial[i] = (trial[i] + dir * step).max(0.0);
                let f = cone_value(m, &trial);
                if f < best {
                    best = f;
                    best_w = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// Whether some sampled `x` has `M x < 0` in every component, which makes
/// `x -> M x + R_+` surjective.
pub fn has_strict_descent<R: Rng>(m: &Matrix, samples: usize, rng: &mut R) -> bool {
    let mut x = vec![0.0; m.ncols()];
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        if m.row_iter().all(|row| dot(row, &x) < 0.0) {
            return true;
        }
    }
    false
}

/// Hoffman constant from its definition: enumerate row subsets, keep those
/// with a strict descent direction, and take the largest reciprocal of the
/// sampled inner minimum.
pub fn brute_hoffman<R: Rng>(a: &Matrix, samples: usize, rng: &mut R) -> Option<f64> {
    let mut best: Option<f64> = None;
    for size in 1..=a.nrows() {
        for rows in (0..a.nrows()).combinations(size) {
            let sub = a.select_rows(&rows);
            if !has_strict_descent(&sub, 200_000, rng) {
                continue;
            }
            let h = 1.0 / sampled_inner_min(&sub, samples, rng);
            best = Some(best.map_or(h, |b: f64| b.max(h)));
        }
    }
    best
}

/// Truncated Laplace CDF written out from the density.
pub fn trunc_laplace_cdf(sigma: f64, s: f64, z: f64) -> f64 {
    if z <= -s {
        return 0.0;
    }
    if z >= s {
        return 1.0;
    }
    let tail = (-s / sigma).exp();
    let half = |t: f64| ((-t / sigma).exp() - tail) / (2.0 * (1.0 - tail));
    if z < 0.0 {
        half(-z)
    } else {
        1.0 - half(z)
    }
}

pub fn trunc_laplace_pdf(sigma: f64, s: f64, z: f64) -> f64 {
    if z.abs() > s {
        return 0.0;
    }
    (-z.abs() / sigma).exp() / (2.0 * sigma * (1.0 - (-s / sigma).exp()))
}

/// Composite Simpson rule with `intervals` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    assert!(intervals.is_multiple_of(2));
    let h = (hi - lo) / intervals as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Kolmogorov-Smirnov distance between a sample and a CDF.
pub fn ks_distance(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.total_cmp(b));
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Whether `x` satisfies the original constraints of `sys` at `tol`.
pub fn satisfies(sys: &ConstraintSystem, x: &[f64], tol: f64) -> bool {
    x.iter().all(|&v| v >= -tol)
        && sys
            .a()
            .row_iter()
            .zip(sys.b())
            .all(|(row, &b)| dot(row, x) <= b + tol)
}

/// Outcome of the single-entry adjacency histogram test.
pub struct DpHistogram {
    pub counts_a: Vec<u64>,
    pub counts_b: Vec<u64>,
    /// Bins where either direction of the ratio inequality fails.
    pub violations: Vec<usize>,
}

/// Privatizes the one-entry rows `[0]` and `[k]` `draws` times each and
/// compares output histograms bin by bin: `count_x <= e^eps count_y +
/// delta draws + 4 sqrt(count_x)` in both directions.
pub fn dp_histogram(
    p: &privcon::PrivacyParams,
    draws: usize,
    bins: usize,
    seed: u64,
) -> DpHistogram {
    use privcon::mechanism::privatize_row;
    let sup = 1e6;
    let s = privcon::support_width(p.k, p.epsilon, p.delta, 1).unwrap();
    let (lo, hi) = (0.0, p.k + 2.0 * s);
    let width = (hi - lo) / bins as f64;
    let histogram = |a: f64, seed: u64| {
        let mut r = rng(seed);
        let mut counts = vec![0u64; bins];
        for _ in 0..draws {
            let out = privatize_row(&[a], &[false], &[sup], p, &mut r).unwrap();
            let bin = (((out.values[0] - lo) / width) as usize).min(bins - 1);
            counts[bin] += 1;
        }
        counts
    };
    let counts_a = histogram(0.0, seed);
    let counts_b = histogram(p.k, seed ^ 0x5eed);
    let bound = |x: u64, y: u64| {
        x as f64 <= p.epsilon.exp() * y as f64 + p.delta * draws as f64 + 4.0 * (x as f64).sqrt()
    };
    let violations = (0..bins)
        .filter(|&i| !bound(counts_a[i], counts_b[i]) || !bound(counts_b[i], counts_a[i]))
        .collect();
    DpHistogram {
        counts_a,
        counts_b,
        violations,
    }
}

/// Random system with a random mask and suprema at or above `A`.
pub fn random_system<R: Rng>(r: &mut R, m: usize, n: usize) -> ConstraintSystem {
    let mask = Matrix::from_fn(m, n, |_, _| r.gen_bool(0.3));
    let a = Matrix::from_fn(m, n, |i, j| {
        if mask[(i, j)] {
            0.0
        } else {
            r.gen_range(-3.0..3.0)
        }
    });
    let sup = Matrix::from_fn(m, n, |i, j| {
        if mask[(i, j)] {
            0.0
        } else if r.gen_bool(0.1) {
            a[(i, j)]
        } else {
            a[(i, j)] + r.gen_range(0.0..5.0)
        }
    });
    let b = (0..m).map(|_| r.gen_range(0.0..5.0)).collect();
    ConstraintSystem::new(a, b, mask, sup).unwrap()
}

/// Exact tightening check: `A <= A~ <= sup` on privatized entries and
/// masked entries untouched.
pub fn tightening_holds(sys: &ConstraintSystem, a_tilde: &Matrix) -> bool {
    sys.a().iter_indexed().all(|((i, j), &a)| {
        let t = a_tilde[(i, j)];
        if sys.zero_mask()[(i, j)] {
            t == a && t == 0.0
        } else {
            a <= t && t <= sys.sup_a()[(i, j)]
        }
    })
}
