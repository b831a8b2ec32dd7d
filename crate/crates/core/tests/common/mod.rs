//! Independent reference computations for the integration tests. Nothing
//! here calls into the crate's linear algebra.

#![allow(dead_code)]

use fedbandit::linalg::{Matrix, SufficientStats, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// log det(V + λI) through an LU determinant.
pub fn dense_log_det(v: &Matrix, lambda: f64) -> f64 {
    let n = v.nrows();
    (v + Matrix::identity(n, n) * lambda).determinant().ln()
}

/// ‖x‖ in the metric (V + λI)⁻¹ through an explicit inverse.
pub fn dense_mahalanobis(v: &Matrix, lambda: f64, x: &Vector) -> f64 {
    let n = v.nrows();
    let inv = (v + Matrix::identity(n, n) * lambda)
        .try_inverse()
        .expect("regularized matrix is invertible");
    x.dot(&(inv * x)).sqrt()
}

pub fn dense_ridge(v: &Matrix, b: &Vector, lambda: f64) -> Vector {
    let n = v.nrows();
    (v + Matrix::identity(n, n) * lambda)
        .try_inverse()
        .expect("regularized matrix is invertible")
        * b
}

/// Random PSD matrix `G Gᵀ` with `G` of size `dim × rank`.
pub fn random_psd<R: Rng>(rng: &mut R, dim: usize, rank: usize) -> Matrix {
    let g = Matrix::from_fn(dim, rank, |_, _| rng.random_range(-1.0..1.0));
    &g * g.transpose()
}

pub fn stats_from(design: Matrix, moment: Vector) -> SufficientStats {
    let sym = (&design + design.transpose()) * 0.5;
    SufficientStats::from_parts(sym, moment).expect("symmetric")
}

fn project(v: Vector) -> Vector {
    let n = v.norm();
    if n > 1.0 {
        v / n
    } else {
        v
    }
}

/// Moore–Penrose solve `M⁻ r` through the SVD.
fn pinv_solve(m: &Matrix, r: &Vector) -> Vector {
    let svd = m.clone().svd(true, true);
    svd.pseudo_inverse(1e-10).expect("svd computed") * r
}

/// One logged heterogeneous observation.
#[derive(Debug, Clone)]
pub struct HeteroSample {
    pub client: usize,
    pub global: Vector,
    pub local: Vector,
    pub y: f64,
}

/// Fixed point of centralized alternating minimization over the full log:
/// each client's local block from its own partial rewards, then the global
/// block from everyone's, both through a generalized inverse and projected
/// onto the unit ball. Iterates until nothing moves by more than `tol`.
pub fn centralized_am(
    log: &[HeteroSample],
    global_dim: usize,
    local_dims: &[usize],
    max_iter: usize,
    tol: f64,
) -> (Vector, Vec<Vector>) {
    let mut theta_g = Vector::zeros(global_dim);
    let mut theta_l: Vec<Vector> = local_dims.iter().map(|&d| Vector::zeros(d)).collect();
    for _ in 0..max_iter {
        let mut moved: f64 = 0.0;
        for (i, &dl) in local_dims.iter().enumerate() {
            let mut v = Matrix::zeros(dl, dl);
            let mut b = Vector::zeros(dl);
            for s in log.iter().filter(|s| s.client == i) {
                v += &s.local * s.local.transpose();
                b += &s.local * (s.y - s.global.dot(&theta_g));
            }
            let next = project(pinv_solve(&v, &b));
            moved = moved.max((&next - &theta_l[i]).norm());
            theta_l[i] = next;
        }
        let mut v = Matrix::zeros(global_dim, global_dim);
        let mut b = Vector::zeros(global_dim);
        for s in log {
            v += &s.global * s.global.transpose();
            b += &s.global * (s.y - s.local.dot(&theta_l[s.client]));
        }
        let next = project(pinv_solve(&v, &b));
        moved = moved.max((&next - &theta_g).norm());
        theta_g = next;
        if moved < tol {
            break;
        }
    }
    (theta_g, theta_l)
}

/// Spearman rank correlation (no ties expected).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut k = 0;
        while k < idx.len() {
            let mut end = k;
            while end + 1 < idx.len() && v[idx[end + 1]] == v[idx[k]] {
                end += 1;
            }
            let avg = (k + end) as f64 / 2.0 + 1.0;
            for &i in &idx[k..=end] {
                r[i] = avg;
            }
            k = end + 1;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Max-abs entrywise difference.
pub fn max_abs(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).abs().max()
}
