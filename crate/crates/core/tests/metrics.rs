mod common;

use common::{compensated_sum, rng, spacings_simplex, uniform};
use misisun::metrics::{
    align_endmembers, apply_permutation_columns, evaluate, reconstruction_rmse, sad_degrees,
    sre_db, sre_db_raw,
};
use misisun::{AbundanceMatrix, EndmemberMatrix, HsiMatrix, UnmixError};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn arccos_sad(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    (dot / (nu * nv)).clamp(-1.0, 1.0).acos().to_degrees()
}

fn all_permutations(r: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_permutations(r - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, r - 1);
            out.push(q);
        }
    }
    out
}

fn total_sad(e_ref: &DMatrix<f64>, e_est: &DMatrix<f64>, perm: &[usize]) -> f64 {
    perm.iter()
        .enumerate()
        .map(|(i, &j)| arccos_sad(e_ref.column(i).as_slice(), e_est.column(j).as_slice()))
        .sum()
}

#[test]
fn sre_matches_a_double_loop() {
    let mut g = rng(1);
    for _ in 0..20 {
        let a = uniform(&mut g, 6, 50, 0.0, 1.0);
        let b = uniform(&mut g, 6, 50, 0.0, 1.0);
        let mut num = Vec::new();
        let mut den = Vec::new();
        for i in 0..6 {
            for j in 0..50 {
                num.push(a[(i, j)] * a[(i, j)]);
                den.push((a[(i, j)] - b[(i, j)]).powi(2));
            }
        }
        let want = 20.0 * (compensated_sum(num).sqrt() / compensated_sum(den).sqrt()).log10();
        let got = sre_db_raw(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-10);
    }
}

#[test]
fn sre_reference_values() {
    let mut g = rng(2);
    let a = AbundanceMatrix::new(spacings_simplex(&mut g, 6, 100)).unwrap();
    assert_eq!(sre_db(&a, &a).unwrap(), f64::INFINITY);
    let scaled = AbundanceMatrix::new(a.data() * 0.9).unwrap();
    assert!((sre_db(&a, &scaled).unwrap() - 20.0).abs() < 1e-9);
    assert!(matches!(
        sre_db_raw(&DMatrix::zeros(2, 3), &DMatrix::zeros(3, 2)),
        Err(UnmixError::DimensionMismatch { .. })
    ));
}

#[test]
fn sad_reference_values() {
    assert_eq!(sad_degrees(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    assert_eq!(sad_degrees(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 0.0);
    assert!((sad_degrees(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 90.0).abs() < 1e-12);
    assert!((sad_degrees(&[1.0, 0.0], &[-1.0, 0.0]).unwrap() - 180.0).abs() < 1e-12);
    assert!(matches!(
        sad_degrees(&[0.0, 0.0], &[1.0, 0.0]),
        Err(UnmixError::DegenerateEndmember)
    ));
}

#[test]
fn alignment_undoes_a_column_permutation() {
    let mut g = rng(3);
    let e = uniform(&mut g, 30, 6, 0.0, 1.0);
    let shuffle = [3usize, 5, 0, 1, 4, 2];
    let est = apply_permutation_columns(&e, &shuffle);
    let perm = align_endmembers(
        &EndmemberMatrix::given(e.clone()).unwrap(),
        &EndmemberMatrix::given(est.clone()).unwrap(),
    )
    .unwrap();
    assert_eq!(apply_permutation_columns(&est, &perm), e);
    for (i, &j) in perm.iter().enumerate() {
        assert_eq!(shuffle[j], i);
    }
}

#[test]
fn alignment_matches_exhaustive_search() {
    let mut g = rng(4);
    for r in [3usize, 4, 5] {
        for _ in 0..10 {
            let a = uniform(&mut g, 12, r, 0.0, 1.0);
            let b = uniform(&mut g, 12, r, 0.0, 1.0);
            let perm = align_endmembers(
                &EndmemberMatrix::given(a.clone()).unwrap(),
                &EndmemberMatrix::given(b.clone()).unwrap(),
            )
            .unwrap();
            let best = all_permutations(r)
                .iter()
                .map(|p| total_sad(&a, &b, p))
                .fold(f64::INFINITY, f64::min);
            assert!((total_sad(&a, &b, &perm) - best).abs() < 1e-9);
        }
    }
}

#[test]
fn ties_resolve_to_the_lowest_index() {
    let e = DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    let perm = align_endmembers(
        &EndmemberMatrix::given(e.clone()).unwrap(),
        &EndmemberMatrix::given(e).unwrap(),
    )
    .unwrap();
    assert_eq!(perm, vec![0, 1]);
}

#[test]
fn large_r_uses_the_greedy_matcher() {
    let mut g = rng(5);
    let e = uniform(&mut g, 40, 10, 0.0, 1.0);
    let shuffle = [9usize, 2, 7, 0, 1, 8, 3, 6, 5, 4];
    let est = apply_permutation_columns(&e, &shuffle);
    let perm = align_endmembers(
        &EndmemberMatrix::given(e.clone()).unwrap(),
        &EndmemberMatrix::given(est.clone()).unwrap(),
    )
    .unwrap();
    assert_eq!(apply_permutation_columns(&est, &perm), e);
    let too_many = uniform(&mut g, 40, 13, 0.0, 1.0);
    let m = EndmemberMatrix::given(too_many).unwrap();
    assert!(align_endmembers(&m, &m).is_err());
}

#[test]
fn rmse_reference_values() {
    let mut g = rng(6);
    let e = uniform(&mut g, 10, 3, 0.0, 1.0);
    let a = spacings_simplex(&mut g, 3, 20);
    let clean = &e * &a;
    let em = EndmemberMatrix::given(e.clone()).unwrap();
    let am = AbundanceMatrix::new(a.clone()).unwrap();
    assert_eq!(
        reconstruction_rmse(&HsiMatrix::new(clean.clone()).unwrap(), &em, &am).unwrap(),
        0.0
    );
    let shifted = clean.add_scalar(-0.25);
    let v = reconstruction_rmse(&HsiMatrix::new(shifted).unwrap(), &em, &am).unwrap();
    assert!((v - 0.25).abs() < 1e-12);
    let y = uniform(&mut g, 10, 20, 0.0, 1.0);
    let mut sq = Vec::new();
    for i in 0..10 {
        for j in 0..20 {
            let mut s = 0.0;
            for k in 0..3 {
                s += e[(i, k)] * a[(k, j)];
            }
            sq.push((y[(i, j)] - s).powi(2));
        }
    }
    let want = (compensated_sum(sq) / 200.0).sqrt();
    let got = reconstruction_rmse(&HsiMatrix::new(y).unwrap(), &em, &am).unwrap();
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn evaluation_is_invariant_to_estimate_order() {
    let mut g = rng(7);
    let e = uniform(&mut g, 25, 4, 0.0, 1.0);
    let a = spacings_simplex(&mut g, 4, 60);
    let y = HsiMatrix::new(&e * &a).unwrap();
    let e_est = &e + uniform(&mut g, 25, 4, -0.05, 0.05);
    let a_est = &a + uniform(&mut g, 4, 60, -0.02, 0.02);
    let base = evaluate(
        &y,
        &EndmemberMatrix::given(e.clone()).unwrap(),
        &AbundanceMatrix::new(a.clone()).unwrap(),
        &EndmemberMatrix::given(e_est.clone()).unwrap(),
        &AbundanceMatrix::new(a_est.clone()).unwrap(),
        true,
    )
    .unwrap();
    let shuffle = [2usize, 0, 3, 1];
    let e_sh = apply_permutation_columns(&e_est, &shuffle);
    let a_sh = DMatrix::from_fn(4, 60, |k, j| a_est[(shuffle[k], j)]);
    let moved = evaluate(
        &y,
        &EndmemberMatrix::given(e.clone()).unwrap(),
        &AbundanceMatrix::new(a.clone()).unwrap(),
        &EndmemberMatrix::given(e_sh).unwrap(),
        &AbundanceMatrix::new(a_sh).unwrap(),
        true,
    )
    .unwrap();
    assert_eq!(base.sre_db, moved.sre_db);
    assert_eq!(base.sad_degrees_per_endmember, moved.sad_degrees_per_endmember);
    assert_eq!(base.rmse, moved.rmse);
    assert!(base.sad_degrees_per_endmember.iter().all(|v| (0.0..=180.0).contains(v)));
}

proptest! {
    #[test]
    fn sad_is_scale_invariant(
        u in prop::collection::vec(0.01f64..1.0, 3..40),
        seed in any::<u64>(),
        alpha in 1e-3f64..1e3,
        exp in -20i32..20,
    ) {
        let mut g = rng(seed);
        let v: Vec<f64> = uniform(&mut g, u.len(), 1, 0.01, 1.0).iter().copied().collect();
        let base = sad_degrees(&u, &v).unwrap();
        // Power-of-two scaling is exact in floating point.
        let pow2 = 2f64.powi(exp);
        let exact: Vec<f64> = v.iter().map(|x| x * pow2).collect();
        prop_assert_eq!(sad_degrees(&u, &exact).unwrap(), base);
        let scaled: Vec<f64> = v.iter().map(|x| x * alpha).collect();
        prop_assert!((sad_degrees(&u, &scaled).unwrap() - base).abs() < 1e-9);
        prop_assert!((base - arccos_sad(&u, &v)).abs() < 1e-6);
        prop_assert!((0.0..=180.0).contains(&base));
    }

    #[test]
    fn sre_is_invariant_under_consistent_permutations(seed in any::<u64>()) {
        let mut g = rng(seed);
        let a = uniform(&mut g, 5, 12, 0.0, 1.0);
        let b = uniform(&mut g, 5, 12, 0.0, 1.0);
        let rows = [4usize, 1, 3, 0, 2];
        let cols: Vec<usize> = (0..12).rev().collect();
        let p = |m: &DMatrix<f64>| DMatrix::from_fn(5, 12, |i, j| m[(rows[i], cols[j])]);
        let x = sre_db_raw(&a, &b).unwrap();
        let y = sre_db_raw(&p(&a), &p(&b)).unwrap();
        prop_assert!((x - y).abs() < 1e-12);
    }
}
