//! Evaluation metrics: abundance SRE, spectral angle, endmember alignment and
//! reconstruction error.

use itertools::Itertools;
use nalgebra::{DMatrix, DVectorView};

use crate::error::{Result, UnmixError};
use crate::types::{AbundanceMatrix, EndmemberMatrix, HsiMatrix};

/// Largest endmember count accepted by [`align_endmembers`].
pub const MAX_ALIGN_R: usize = 12;
/// Up to this many endmembers the alignment is an exhaustive search.
pub const EXHAUSTIVE_ALIGN_R: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub sre_db: f64,
    pub sad_degrees_per_endmember: Vec<f64>,
    pub rmse: f64,
    /// `permutation[i]` is the estimated column matched to reference column `i`.
    pub permutation: Vec<usize>,
}

/// Signal-reconstruction error in dB, `20·log10(‖A‖_F / ‖A − Â‖_F)`.
/// Returns `+∞` when the estimate is exact.
pub fn sre_db(a_true: &AbundanceMatrix, a_est: &AbundanceMatrix) -> Result<f64> {
    sre_db_raw(a_true.data(), a_est.data())
}

pub fn sre_db_raw(a_true: &DMatrix<f64>, a_est: &DMatrix<f64>) -> Result<f64> {
    if a_true.shape() != a_est.shape() {
        return Err(UnmixError::dims(
            "sre_db",
            format!("{}x{}", a_true.nrows(), a_true.ncols()),
            format!("{}x{}", a_est.nrows(), a_est.ncols()),
        ));
    }
    let err = (a_true - a_est).norm();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (a_true.norm() / err).log10())
}

/// Spectral angle between two spectra, in degrees.
pub fn sad_degrees(e_ref: &[f64], e_est: &[f64]) -> Result<f64> {
    if e_ref.len() != e_est.len() {
        return Err(UnmixError::dims("sad_degrees", e_ref.len(), e_est.len()));
    }
    sad_view(DVectorView::from(e_ref), DVectorView::from(e_est))
}

fn sad_view(u: DVectorView<f64>, v: DVectorView<f64>) -> Result<f64> {
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(UnmixError::DegenerateEndmember);
    }
    // Half-angle form of arccos(⟨u, v⟩ / ‖u‖‖v‖); stays accurate near 0°.
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v.iter()) {
        let (x, y) = (a / nu, b / nv);
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    Ok((2.0 * diff.sqrt().atan2(sum.sqrt())).to_degrees())
}

/// SAD between every reference column `i` and estimated column `j`.
fn sad_table(e_ref: &DMatrix<f64>, e_est: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = e_ref.ncols();
    let mut t = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            t[(i, j)] = sad_view(e_ref.column(i).as_view(), e_est.column(j).as_view())?;
        }
    }
    Ok(t)
}

fn total_cost(table: &DMatrix<f64>, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| table[(i, j)]).sum()
}

/// Find the assignment of estimated columns to reference columns with the
/// smallest total SAD. `result[i]` is the estimated column matched to
/// reference column `i`; applying it to `e_est` lines its columns up with
/// `e_ref`. Ties resolve to the lexicographically smallest permutation.
///
/// Exhaustive for `r ≤ 8`; above that a greedy match refined by pairwise swaps.
pub fn align_endmembers(e_ref: &EndmemberMatrix, e_est: &EndmemberMatrix) -> Result<Vec<usize>> {
    let (a, b) = (e_ref.data(), e_est.data());
    if a.shape() != b.shape() {
        return Err(UnmixError::dims(
            "align_endmembers",
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    let r = a.ncols();
    if r > MAX_ALIGN_R {
        return Err(UnmixError::Invalid(format!(
            "alignment supports at most {MAX_ALIGN_R} endmembers, got {r}"
        )));
    }
    let table = sad_table(a, b)?;
    if r <= EXHAUSTIVE_ALIGN_R {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for perm in (0..r).permutations(r) {
            let cost = total_cost(&table, &perm);
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, perm));
            }
        }
        return Ok(best.map(|(_, p)| p).unwrap_or_default());
    }
    Ok(greedy_with_swaps(&table))
}

fn greedy_with_swaps(table: &DMatrix<f64>) -> Vec<usize> {
    let r = table.nrows();
    let mut perm = vec![usize::MAX; r];
    let mut used = vec![false; r];
    let mut pairs: Vec<(f64, usize, usize)> = (0..r)
        .flat_map(|i| (0..r).map(move |j| (i, j)))
        .map(|(i, j)| (table[(i, j)], i, j))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    for (_, i, j) in pairs {
        if perm[i] == usize::MAX && !used[j] {
            perm[i] = j;
            used[j] = true;
        }
    }
    loop {
        let mut improved = false;
        for i in 0..r {
            for k in i + 1..r {
                let now = table[(i, perm[i])] + table[(k, perm[k])];
                let swapped = table[(i, perm[k])] + table[(k, perm[i])];
                if swapped < now - 1e-12 {
                    perm.swap(i, k);
                    improved = true;
                }
            }
        }
        if !improved {
            return perm;
        }
    }
}

/// Reorder the columns of `e` (or rows of abundances) by an alignment.
pub fn apply_permutation_columns(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), perm.len(), |i, j| m[(i, perm[j])])
}

pub fn apply_permutation_rows(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(perm.len(), m.ncols(), |i, j| m[(perm[i], j)])
}

/// `sqrt(‖Y − E·A‖²_F / (p·n))`
pub fn reconstruction_rmse(
    y: &HsiMatrix,
    e: &EndmemberMatrix,
    a: &AbundanceMatrix,
) -> Result<f64> {
    reconstruction_rmse_raw(y.data(), e.data(), a.data())
}

pub fn reconstruction_rmse_raw(
    y: &DMatrix<f64>,
    e: &DMatrix<f64>,
    a: &DMatrix<f64>,
) -> Result<f64> {
    if e.nrows() != y.nrows() || e.ncols() != a.nrows() || a.ncols() != y.ncols() {
        return Err(UnmixError::dims(
            "reconstruction_rmse",
            format!("Y {}x{}", y.nrows(), y.ncols()),
            format!("E {}x{}, A {}x{}", e.nrows(), e.ncols(), a.nrows(), a.ncols()),
        ));
    }
    let residual = y - e * a;
    Ok((residual.norm_squared() / (y.nrows() * y.ncols()) as f64).sqrt())
}

/// Full report: endmembers aligned when `align` is set (identity order
/// otherwise), abundance rows reordered to match, then SRE, SAD and RMSE.
pub fn evaluate(
    y: &HsiMatrix,
    e_true: &EndmemberMatrix,
    a_true: &AbundanceMatrix,
    e_est: &EndmemberMatrix,
    a_est: &AbundanceMatrix,
    align: bool,
) -> Result<MetricReport> {
    let r = e_true.endmember_count();
    let permutation = if align {
        align_endmembers(e_true, e_est)?
    } else {
        (0..r).collect()
    };
    let e_aligned = apply_permutation_columns(e_est.data(), &permutation);
    let a_aligned = apply_permutation_rows(a_est.data(), &permutation);
    let sre = sre_db_raw(a_true.data(), &a_aligned)?;
    let sad = (0..r)
        .map(|i| sad_view(e_true.data().column(i).as_view(), e_aligned.column(i).as_view()))
        .collect::<Result<Vec<_>>>()?;
    let rmse = reconstruction_rmse_raw(y.data(), &e_aligned, &a_aligned)?;
    Ok(MetricReport {
        sre_db: sre,
        sad_degrees_per_endmember: sad,
        rmse,
        permutation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn sre_exact_is_infinite() {
        let a = AbundanceMatrix::new(DMatrix::from_element(3, 4, 0.25)).unwrap();
        assert_eq!(sre_db(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn sre_ten_percent_error_is_twenty_db() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = rand_mat(&mut rng, 4, 9);
        let v = sre_db_raw(&a, &(&a * 0.9)).unwrap();
        assert!((v - 20.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn sre_matches_scalar_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = rand_mat(&mut rng, 5, 11);
        let b = rand_mat(&mut rng, 5, 11);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..5 {
            for j in 0..11 {
                num += a[(i, j)] * a[(i, j)];
                den += (a[(i, j)] - b[(i, j)]).powi(2);
            }
        }
        let oracle = 10.0 * (num / den).log10();
        assert!((sre_db_raw(&a, &b).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn sre_shape_mismatch() {
        assert!(sre_db_raw(&DMatrix::zeros(2, 2), &DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn sad_basics() {
        let u = [1.0, 2.0, 3.0];
        assert_eq!(sad_degrees(&u, &u).unwrap(), 0.0);
        assert_eq!(sad_degrees(&u, &[2.0, 4.0, 6.0]).unwrap(), 0.0);
        assert!((sad_degrees(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 90.0).abs() < 1e-12);
        assert!((sad_degrees(&[1.0, 0.0], &[-1.0, 0.0]).unwrap() - 180.0).abs() < 1e-12);
        assert!(matches!(
            sad_degrees(&u, &[0.0, 0.0, 0.0]),
            Err(UnmixError::DegenerateEndmember)
        ));
    }

    #[test]
    fn alignment_recovers_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = rand_mat(&mut rng, 12, 5);
        let perm = [3, 0, 4, 1, 2];
        let shuffled = apply_permutation_columns(&e, &perm);
        let found = align_endmembers(
            &EndmemberMatrix::given(e.clone()).unwrap(),
            &EndmemberMatrix::given(shuffled.clone()).unwrap(),
        )
        .unwrap();
        let realigned = apply_permutation_columns(&shuffled, &found);
        assert_eq!(realigned, e);
        // found inverts perm: shuffled[:, found[i]] = e[:, perm[found[i]]] = e[:, i]
        for i in 0..5 {
            assert_eq!(perm[found[i]], i);
        }
    }

    #[test]
    fn alignment_ties_pick_lowest_index() {
        let e = DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let m = EndmemberMatrix::given(e).unwrap();
        assert_eq!(align_endmembers(&m, &m).unwrap(), vec![0, 1]);
    }

    #[test]
    fn greedy_path_handles_large_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = rand_mat(&mut rng, 40, 10);
        let perm = [9, 2, 5, 0, 7, 1, 8, 3, 6, 4];
        let shuffled = apply_permutation_columns(&e, &perm);
        let found = align_endmembers(
            &EndmemberMatrix::given(e.clone()).unwrap(),
            &EndmemberMatrix::given(shuffled.clone()).unwrap(),
        )
        .unwrap();
        assert_eq!(apply_permutation_columns(&shuffled, &found), e);
        let too_big = EndmemberMatrix::given(rand_mat(&mut rng, 20, 13)).unwrap();
        assert!(align_endmembers(&too_big, &too_big).is_err());
    }

    #[test]
    fn rmse_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = rand_mat(&mut rng, 6, 3);
        let a = rand_mat(&mut rng, 3, 8);
        let y = &e * &a;
        assert!(reconstruction_rmse_raw(&y, &e, &a).unwrap() < 1e-15);
        let shifted = y.add_scalar(-0.25);
        assert!((reconstruction_rmse_raw(&shifted, &e, &a).unwrap() - 0.25).abs() < 1e-12);

        let noisy = rand_mat(&mut rng, 6, 8);
        let prod = &e * &a;
        let mut acc = 0.0;
        for i in 0..6 {
            for j in 0..8 {
                acc += (noisy[(i, j)] - prod[(i, j)]).powi(2);
            }
        }
        let oracle = (acc / 48.0).sqrt();
        assert!((reconstruction_rmse_raw(&noisy, &e, &a).unwrap() - oracle).abs() < 1e-12);
        assert!(reconstruction_rmse_raw(&noisy, &e, &DMatrix::zeros(2, 8)).is_err());
    }
}
