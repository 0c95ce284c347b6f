//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

/// Dirichlet(1) columns from sorted uniform spacings.
pub fn spacings_simplex(rng: &mut ChaCha8Rng, r: usize, n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(r, n);
    for j in 0..n {
        let mut cuts: Vec<f64> = (0..r - 1).map(|_| rng.random::<f64>()).collect();
        cuts.push(0.0);
        cuts.push(1.0);
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for i in 0..r {
            a[(i, j)] = cuts[i + 1] - cuts[i];
        }
    }
    a
}

/// Solve `argmin ½‖t − E·x‖² + (μ/2)‖x − g‖²` s.t. `1ᵀx = 1` column by
/// column through the dense bordered KKT system.
pub fn bordered_kkt(e: &DMatrix<f64>, t: &DMatrix<f64>, g: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    let k = e.ncols();
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        for j in 0..k {
            let mut s = 0.0;
            for b in 0..e.nrows() {
                s += e[(b, i)] * e[(b, j)];
            }
            kkt[(i, j)] = s + if i == j { mu } else { 0.0 };
        }
        kkt[(i, k)] = 1.0;
        kkt[(k, i)] = 1.0;
    }
    let lu = kkt.lu();
    let mut x = DMatrix::zeros(k, t.ncols());
    for c in 0..t.ncols() {
        let mut rhs = nalgebra::DVector::zeros(k + 1);
        for i in 0..k {
            let mut s = 0.0;
            for b in 0..e.nrows() {
                s += e[(b, i)] * t[(b, c)];
            }
            rhs[i] = s + mu * g[(i, c)];
        }
        rhs[k] = 1.0;
        let sol = lu.solve(&rhs).expect("KKT matrix is nonsingular");
        for i in 0..k {
            x[(i, c)] = sol[i];
        }
    }
    x
}

/// Neumaier-compensated sum.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `½‖Y − D·B·A‖² + λ‖D·B − m·1ᵀ‖²` with scalar loops.
pub fn naive_objective(
    y: &DMatrix<f64>,
    d: &DMatrix<f64>,
    b: &DMatrix<f64>,
    a: &DMatrix<f64>,
    lambda: f64,
) -> f64 {
    let (p, n) = y.shape();
    let (m, r) = b.shape();
    let mut e = vec![vec![0.0; r]; p];
    for i in 0..p {
        for k in 0..r {
            for j in 0..m {
                e[i][k] += d[(i, j)] * b[(j, k)];
            }
        }
    }
    let mut fit = 0.0;
    for i in 0..p {
        for px in 0..n {
            let mut rec = 0.0;
            for k in 0..r {
                rec += e[i][k] * a[(k, px)];
            }
            fit += (y[(i, px)] - rec).powi(2);
        }
    }
    let mut pen = 0.0;
    for i in 0..p {
        let mean: f64 = (0..n).map(|px| y[(i, px)]).sum::<f64>() / n as f64;
        for v in &e[i] {
            pen += (v - mean).powi(2);
        }
    }
    0.5 * fit + lambda * pen
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Spearman rank correlation (no ties expected).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}
