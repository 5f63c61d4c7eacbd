#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use structcs_core::matrix::{BlockStructureSpec, DistKind};

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A random block Toeplitz or block circulant spec with `n * N <= max_size`.
pub fn random_block_spec<R: Rng>(rng: &mut R, max_size: usize) -> BlockStructureSpec {
    loop {
        let k = rng.random_range(1..=64);
        let l = rng.random_range(1..=32);
        let d = rng.random_range(1..=8);
        let e = rng.random_range(1..=8);
        if (l * d) * (k * e) > max_size {
            continue;
        }
        let dist = [
            DistKind::Gaussian,
            DistKind::Bernoulli,
            DistKind::SparseTernary,
        ][rng.random_range(0..3)];
        let seed = rng.random();
        return if rng.random_bool(0.5) {
            BlockStructureSpec::toeplitz_block(k, l, d, e, dist, seed)
        } else {
            BlockStructureSpec::circulant_block(k, l, d, e, dist, seed)
        };
    }
}

const EPS: f64 = 1e-10;

/// Dense-tableau simplex with Bland's rule over the first `allowed`
/// columns. Returns false if the problem is unbounded.
fn simplex(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize) -> bool {
    let rows = t.len();
    let rhs = t[0].len() - 1;
    loop {
        let mut entering = None;
        for j in 0..allowed {
            if basis.contains(&j) {
                continue;
            }
            let reduced = cost[j] - (0..rows).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>();
            if reduced < -EPS {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else { return true };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            if t[i][j] > EPS {
                let ratio = t[i][rhs] / t[i][j];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - EPS || ((ratio - lr).abs() <= EPS && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((i, _)) = leave else { return false };
        pivot(t, basis, i, j);
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], i: usize, j: usize) {
    let p = t[i][j];
    for v in t[i].iter_mut() {
        *v /= p;
    }
    let row = t[i].clone();
    for (r, tr) in t.iter_mut().enumerate() {
        if r != i {
            let f = tr[j];
            if f != 0.0 {
                for (a, b) in tr.iter_mut().zip(&row) {
                    *a -= f * b;
                }
            }
        }
    }
    basis[i] = j;
}

/// `min |x|_1 s.t. A x = y` as the linear program
/// `min 1^T (u + v) s.t. A u - A v = y, u, v >= 0`, by two-phase simplex.
/// `None` if infeasible.
pub fn lp_l1_min(a: &DMatrix<f64>, y: &[f64]) -> Option<f64> {
    let (n, big_n) = a.shape();
    let nv = 2 * big_n;
    let cols = nv + n;
    let mut t = vec![vec![0.0; cols + 1]; n];
    for i in 0..n {
        let sign = if y[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..big_n {
            t[i][j] = sign * a[(i, j)];
            t[i][big_n + j] = -sign * a[(i, j)];
        }
        t[i][nv + i] = 1.0;
        t[i][cols] = sign * y[i];
    }
    let mut basis: Vec<usize> = (nv..cols).collect();
    let mut phase1 = vec![0.0; cols];
    for c in phase1.iter_mut().skip(nv) {
        *c = 1.0;
    }
    simplex(&mut t, &mut basis, &phase1, cols);
    let infeas: f64 = (0..n).map(|i| phase1[basis[i]] * t[i][cols]).sum();
    let scale = y.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if infeas > 1e-8 * scale {
        return None;
    }
    for i in 0..n {
        if basis[i] >= nv {
            if let Some(j) = (0..nv).find(|&j| t[i][j].abs() > EPS && !basis.contains(&j)) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }
    let mut phase2 = vec![0.0; cols];
    for c in phase2.iter_mut().take(nv) {
        *c = 1.0;
    }
    if !simplex(&mut t, &mut basis, &phase2, nv) {
        return None;
    }
    Some((0..n).map(|i| phase2[basis[i]] * t[i][cols]).sum())
}

/// Exhaustive oracle for tiny instances: the l1 minimum is attained at a
/// basic solution, so try every column subset of size `rank(A)` or less.
pub fn brute_l1_min(a: &DMatrix<f64>, y: &[f64]) -> Option<f64> {
    let (n, big_n) = a.shape();
    let yv = nalgebra::DVector::from_column_slice(y);
    let mut best: Option<f64> = None;
    for mask in 0u64..(1u64 << big_n) {
        let cols: Vec<usize> = (0..big_n).filter(|&j| mask >> j & 1 == 1).collect();
        if cols.len() > n {
            continue;
        }
        if cols.is_empty() {
            if yv.norm() < 1e-12 {
                best = Some(0.0);
            }
            continue;
        }
        let sub = a.select_columns(&cols);
        let svd = sub.clone().svd(true, true);
        if svd.singular_values.iter().any(|s| *s < 1e-10) {
            continue;
        }
        let Ok(x) = svd.solve(&yv, 1e-12) else {
            continue;
        };
        if (&sub * &x - &yv).norm() > 1e-9 * yv.norm().max(1.0) {
            continue;
        }
        let obj: f64 = x.iter().map(|v| v.abs()).sum();
        best = Some(best.map_or(obj, |b: f64| b.min(obj)));
    }
    best
}
