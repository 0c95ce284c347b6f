mod common;

use common::{compensated_sum, ks_statistic, rng, spacings_simplex};
use misisun::simulate::{
    add_noise, generate_library, generate_sim1, generate_sim2, sim2_abundances, tile_scene,
    Sim1Spec, Sim2Spec, SyntheticLibrarySpec,
};
use misisun::{HsiMatrix, UnmixError};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn frobenius(m: &DMatrix<f64>) -> f64 {
    compensated_sum(m.iter().map(|v| v * v)).sqrt()
}

#[test]
fn library_endmembers_are_the_library_times_the_mixing() {
    let lib = generate_library(&SyntheticLibrarySpec {
        bands: 224,
        atoms: 60,
        endmembers: 6,
        seed: 42,
        ..Default::default()
    })
    .unwrap();
    let d = lib.library.data();
    let b = lib.mixing.data();
    let e = lib.endmembers.data();
    for i in 0..224 {
        for k in 0..6 {
            let want = compensated_sum((0..60).map(|j| d[(i, j)] * b[(j, k)]));
            assert!((e[(i, k)] - want).abs() <= 1e-12, "({i},{k})");
        }
    }
    for col in b.column_iter() {
        let nnz = col.iter().filter(|&&v| v > 0.0).count();
        assert!((1..=3).contains(&nnz), "nonzeros {nnz}");
        assert!(col.iter().all(|&v| v >= 0.0));
        assert!((col.sum() - 1.0).abs() <= 1e-12);
    }
    assert!(d.iter().all(|&v| v >= 0.0));
}

#[test]
fn library_needs_at_least_r_atoms() {
    let spec = SyntheticLibrarySpec {
        atoms: 4,
        endmembers: 6,
        ..Default::default()
    };
    assert!(generate_library(&spec).is_err());
}

#[test]
fn squares_scene_layout() {
    let lib = generate_library(&SyntheticLibrarySpec::default()).unwrap();
    let (y, a) = generate_sim1(
        &Sim1Spec {
            snr_db: 30.0,
            seed: 3,
        },
        &lib.endmembers,
    )
    .unwrap();
    assert_eq!(y.pixel_count(), 11025);
    assert_eq!(y.band_count(), 224);
    assert_eq!(y.shape(), Some((105, 105)));
    let a = a.data();
    let background = 1.0 / 6.0;
    let squares = a
        .column_iter()
        .filter(|c| c.iter().any(|&v| v != background))
        .count();
    assert_eq!(squares, 1225);
    for col in a.column_iter() {
        assert!((col.sum() - 1.0).abs() <= 1e-12);
        assert!(col.iter().all(|&v| (0.0..=0.75).contains(&v)));
    }
    // Every pair appears at each binary ratio.
    let mut seen = std::collections::BTreeSet::new();
    for col in a.column_iter() {
        let nz: Vec<(usize, f64)> = col.iter().copied().enumerate().filter(|&(_, v)| v > 0.0).collect();
        if nz.len() == 2 {
            seen.insert((nz[0].0, nz[1].0, (nz[0].1 * 4.0) as u8));
        }
    }
    assert_eq!(seen.len(), 45);
    let noise = y.data() - lib.endmembers.data() * a;
    let clean = lib.endmembers.data() * a;
    let snr = 20.0 * (frobenius(&clean) / frobenius(&noise)).log10();
    assert!((snr - 30.0).abs() < 1e-10);
}

#[test]
fn unconstrained_purity_matches_an_independent_dirichlet_sampler() {
    let a = sim2_abundances(&Sim2Spec::new(1.0, 30.0, 11), 6).unwrap();
    assert_eq!(a.ncols(), 10000);
    let got: Vec<f64> = a.column_iter().map(|c| c.max()).collect();
    let mut g = rng(99);
    let oracle = spacings_simplex(&mut g, 6, 20000);
    let want: Vec<f64> = oracle.column_iter().map(|c| c.max()).collect();
    let d = ks_statistic(&got, &want);
    // Two-sample critical value at the 0.1% level.
    let crit = 1.95 * ((10000.0 + 20000.0) / (10000.0 * 20000.0f64)).sqrt();
    assert!(d < crit, "KS {d} >= {crit}");
}

#[test]
fn purity_near_the_floor_is_respected() {
    let a = sim2_abundances(
        &Sim2Spec {
            height: 20,
            width: 20,
            ..Sim2Spec::new(0.2, 30.0, 5)
        },
        6,
    )
    .unwrap();
    for col in a.column_iter() {
        assert!(col.max() <= 0.2);
        assert!((col.sum() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn infeasible_purity_is_rejected() {
    let err = sim2_abundances(&Sim2Spec::new(0.1, 30.0, 5), 6).unwrap_err();
    assert!(matches!(err, UnmixError::Invalid(_)));
}

#[test]
fn scene_generation_is_seed_deterministic() {
    let lib = generate_library(&SyntheticLibrarySpec::default()).unwrap();
    let again = generate_library(&SyntheticLibrarySpec::default()).unwrap();
    assert_eq!(lib.library.data(), again.library.data());
    assert_eq!(lib.mixing.data(), again.mixing.data());
    let spec = Sim2Spec::new(0.7, 25.0, 8);
    let (y1, a1) = generate_sim2(&spec, &lib.endmembers).unwrap();
    let (y2, a2) = generate_sim2(&spec, &lib.endmembers).unwrap();
    assert_eq!(y1.data(), y2.data());
    assert_eq!(a1.data(), a2.data());
    let (y3, _) = generate_sim2(&Sim2Spec::new(0.7, 25.0, 9), &lib.endmembers).unwrap();
    assert_ne!(y1.data(), y3.data());
}

#[test]
fn tiling_repeats_the_scene() {
    let lib = generate_library(&SyntheticLibrarySpec::default()).unwrap();
    let spec = Sim2Spec {
        height: 4,
        width: 5,
        ..Sim2Spec::new(0.9, 30.0, 1)
    };
    let (y, a) = generate_sim2(&spec, &lib.endmembers).unwrap();
    let (ty, ta) = tile_scene(&y, &a, 3).unwrap();
    assert_eq!(ty.shape(), Some((12, 15)));
    for row in 0..12 {
        for col in 0..15 {
            let src = (row % 4) * 5 + col % 5;
            assert_eq!(ty.data().column(row * 15 + col), y.data().column(src));
            assert_eq!(ta.data().column(row * 15 + col), a.data().column(src));
        }
    }
}

#[test]
fn noise_edge_cases() {
    let y = HsiMatrix::new(DMatrix::from_fn(5, 7, |i, j| (i + j) as f64 * 0.1 + 0.2)).unwrap();
    let same = add_noise(&y, f64::INFINITY, 1).unwrap();
    assert_eq!(same.data(), y.data());
    let noisy = add_noise(&y, 20.0, 1).unwrap();
    let ratio = frobenius(&(noisy.data() - y.data())) / frobenius(y.data());
    assert!((ratio - 0.1).abs() < 1e-12);
    let zero = HsiMatrix::new(DMatrix::zeros(3, 3)).unwrap();
    assert!(add_noise(&zero, 20.0, 1).is_err());
    assert!(add_noise(&y, f64::NAN, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noise_hits_the_requested_snr(
        snr in -10.0f64..80.0,
        seed in any::<u64>(),
        p in 1usize..12,
        n in 1usize..40,
    ) {
        let mut g = rng(seed);
        let clean = common::uniform(&mut g, p, n, 0.01, 2.0);
        let y = HsiMatrix::new(clean.clone()).unwrap();
        let noisy = add_noise(&y, snr, seed).unwrap();
        let achieved = 20.0 * (frobenius(&clean) / frobenius(&(noisy.data() - &clean))).log10();
        prop_assert!((achieved - snr).abs() < 1e-10, "{achieved} vs {snr}");
    }

    #[test]
    fn sampled_abundances_respect_purity(rho in 0.2f64..1.0, seed in any::<u64>()) {
        let spec = Sim2Spec { height: 5, width: 8, ..Sim2Spec::new(rho, 30.0, seed) };
        let a = sim2_abundances(&spec, 6).unwrap();
        for col in a.column_iter() {
            prop_assert!(col.max() <= rho);
            prop_assert!(col.min() >= 0.0);
            prop_assert!((col.sum() - 1.0).abs() <= 1e-12);
        }
    }
}
