//! Synthetic libraries and scenes with exact ground truth.
//!
//! Two scene layouts are provided: a 105 × 105 scene of homogeneous squares on a
//! uniform background, and a structureless 100 × 100 scene with Dirichlet
//! abundances capped at a purity level. All randomness is seeded; per-pixel
//! draws use independent ChaCha streams keyed by the pixel index.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Result, UnmixError};
use crate::types::{AbundanceMatrix, EndmemberMatrix, HsiMatrix, MixingMatrix, SpectralLibrary};

/// Rejection attempts allowed per pixel before giving up.
pub const MAX_REJECTIONS: usize = 1_000_000;

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_NOISE: u64 = 1;
const TAG_MIXTURES: u64 = 2;
const TAG_PIXELS: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLibrarySpec {
    pub bands: usize,
    pub atoms: usize,
    /// Number of ground-truth endmembers.
    pub endmembers: usize,
    /// Gaussian smoothing width, in bands.
    pub smoothness: f64,
    /// Scaled/perturbed variants generated per base atom.
    pub variability: usize,
    /// Maximum library atoms mixed into one ground-truth endmember (1 to 3).
    pub atoms_per_endmember: usize,
    pub seed: u64,
}

impl Default for SyntheticLibrarySpec {
    fn default() -> Self {
        Self {
            bands: 224,
            atoms: 60,
            endmembers: 6,
            smoothness: 6.0,
            variability: 0,
            atoms_per_endmember: 3,
            seed: 0,
        }
    }
}

/// Library, ground-truth endmembers `E = D·B` and the mixing matrix `B`.
#[derive(Debug, Clone)]
pub struct SyntheticLibrary {
    pub library: SpectralLibrary,
    pub endmembers: EndmemberMatrix,
    pub mixing: MixingMatrix,
}

fn gaussian_smooth(x: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return x.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (k, w) in (-radius..=radius).zip(&kernel) {
                let j = i + k;
                if (0..n).contains(&j) {
                    acc += w * x[j as usize];
                    wsum += w;
                }
            }
            acc / wsum
        })
        .collect()
}

/// Smooth positive spectrum with values in [0.1, 1] and peak exactly 1.
fn base_spectrum(rng: &mut ChaCha8Rng, bands: usize, sigma: f64) -> Vec<f64> {
    let noise: Vec<f64> = (0..bands).map(|_| rng.random::<f64>()).collect();
    let f = gaussian_smooth(&noise, sigma);
    let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    f.iter().map(|v| 0.1 + 0.9 * (v - lo) / span).collect()
}

fn variant_spectrum(rng: &mut ChaCha8Rng, base: &[f64], sigma: f64) -> Vec<f64> {
    let scale = rng.random_range(0.6..1.0);
    let noise: Vec<f64> = (0..base.len()).map(|_| rng.random::<f64>() - 0.5).collect();
    let perturb = gaussian_smooth(&noise, sigma);
    let amp = perturb.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    base.iter()
        .zip(&perturb)
        .map(|(b, p)| (scale * (b + 0.05 * p / amp)).max(0.0))
        .collect()
}

/// Generate a smooth nonnegative library and a sparse ground-truth mixing.
///
/// Atoms are laid out base-first: each base atom is followed by its
/// `variability` variants. Ground-truth endmembers mix 1 to
/// `atoms_per_endmember` distinct base atoms with random simplex weights.
pub fn generate_library(spec: &SyntheticLibrarySpec) -> Result<SyntheticLibrary> {
    let (p, m, r) = (spec.bands, spec.atoms, spec.endmembers);
    if r < 1 || p < 1 {
        return Err(UnmixError::Invalid("bands and endmembers must be >= 1".into()));
    }
    if m < r {
        return Err(UnmixError::Invalid(format!(
            "library atom count {m} is smaller than the endmember count {r}"
        )));
    }
    if !(1..=3).contains(&spec.atoms_per_endmember) {
        return Err(UnmixError::Invalid("atoms_per_endmember must be 1, 2 or 3".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let group = spec.variability + 1;
    let mut data = DMatrix::zeros(p, m);
    let mut base_indices = Vec::new();
    let mut current = Vec::new();
    for j in 0..m {
        if j % group == 0 {
            current = base_spectrum(&mut rng, p, spec.smoothness);
            data.set_column(j, &nalgebra::DVector::from_column_slice(&current));
            base_indices.push(j);
        } else {
            let v = variant_spectrum(&mut rng, &current, spec.smoothness);
            data.set_column(j, &nalgebra::DVector::from_vec(v));
        }
    }

    // Prefer distinct base atoms; fall back to the whole library when the
    // base set is too small.
    let mut pool = if base_indices.len() >= r {
        base_indices
    } else {
        (0..m).collect()
    };
    pool.shuffle(&mut rng);
    let mut b = DMatrix::zeros(m, r);
    let mut cursor = 0;
    for k in 0..r {
        let anchor = pool[k];
        let extra = rng.random_range(0..spec.atoms_per_endmember);
        let mut chosen = vec![anchor];
        for _ in 0..extra {
            // Extra atoms come from the part of the pool not used as anchors.
            let idx = r + cursor;
            if idx < pool.len() {
                chosen.push(pool[idx]);
                cursor += 1;
            }
        }
        if chosen.len() == 1 {
            b[(anchor, k)] = 1.0;
        } else {
            let w: Vec<f64> = chosen.iter().map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = w.iter().sum();
            for (&i, wi) in chosen.iter().zip(&w) {
                b[(i, k)] = wi / total;
            }
        }
    }
    let library = SpectralLibrary::new(data)?;
    let mixing = MixingMatrix::new(b)?;
    let endmembers = EndmemberMatrix::from_library(&library, &mixing)?;
    Ok(SyntheticLibrary {
        library,
        endmembers,
        mixing,
    })
}

/// Add i.i.d. Gaussian noise rescaled so that
/// `20·log10(‖Y‖_F / ‖N‖_F) = snr_db` exactly. `+∞` returns the input unchanged.
pub fn add_noise(y_clean: &HsiMatrix, snr_db: f64, seed: u64) -> Result<HsiMatrix> {
    if snr_db == f64::INFINITY {
        return Ok(y_clean.clone());
    }
    if !snr_db.is_finite() {
        return Err(UnmixError::Invalid(format!("invalid SNR {snr_db}")));
    }
    let signal = y_clean.data().norm();
    if signal == 0.0 {
        return Err(UnmixError::Invalid("cannot set an SNR on an all-zero signal".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p, n) = (y_clean.band_count(), y_clean.pixel_count());
    let mut noise = DMatrix::from_fn(p, n, |_, _| StandardNormal.sample(&mut rng));
    let target = signal / 10f64.powf(snr_db / 20.0);
    noise *= target / noise.norm();
    let noisy = y_clean.data() + noise;
    match y_clean.shape() {
        Some((h, w)) => HsiMatrix::with_shape(noisy, h, w),
        None => HsiMatrix::new(noisy),
    }
}

/// Layout of the homogeneous-squares scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Sim1Spec {
    pub snr_db: f64,
    pub seed: u64,
}

impl Sim1Spec {
    pub const SIDE: usize = 105;
    pub const BLOCK: usize = 15;
    pub const SQUARE: usize = 5;
    pub const SQUARES: usize = 49;
    pub const BINARY_SQUARES: usize = 45;
    pub const ENDMEMBERS: usize = 6;
    pub const MAX_ABUNDANCE: f64 = 0.75;
    pub const BINARY_RATIOS: [(f64, f64); 3] = [(0.75, 0.25), (0.5, 0.5), (0.25, 0.75)];
}

/// Random mixture of at least three endmembers with every entry ≤ `cap`.
fn higher_order_mixture(rng: &mut ChaCha8Rng, r: usize, cap: f64) -> Result<Vec<f64>> {
    for _ in 0..MAX_REJECTIONS {
        let k = rng.random_range(3..=r);
        let mut idx: Vec<usize> = (0..r).collect();
        idx.shuffle(rng);
        let g: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = g.iter().sum();
        let mut a = vec![0.0; r];
        for (&i, gi) in idx[..k].iter().zip(&g) {
            a[i] = gi / total;
        }
        if a.iter().all(|&v| v <= cap) && idx[..k].iter().all(|&i| a[i] > 0.0) {
            return Ok(a);
        }
    }
    Err(UnmixError::RejectionLimit {
        pixel: 0,
        attempts: MAX_REJECTIONS,
    })
}

/// Ground-truth abundances of the squares scene (`6 × 11025`).
pub fn sim1_abundances(spec: &Sim1Spec) -> Result<DMatrix<f64>> {
    let r = Sim1Spec::ENDMEMBERS;
    let side = Sim1Spec::SIDE;
    let mut a = DMatrix::from_element(r, side * side, 1.0 / r as f64);

    let mut cells: Vec<Vec<f64>> = Vec::with_capacity(Sim1Spec::SQUARES);
    for i in 0..r {
        for j in i + 1..r {
            for (wi, wj) in Sim1Spec::BINARY_RATIOS {
                let mut v = vec![0.0; r];
                v[i] = wi;
                v[j] = wj;
                cells.push(v);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, TAG_MIXTURES));
    while cells.len() < Sim1Spec::SQUARES {
        cells.push(higher_order_mixture(&mut rng, r, Sim1Spec::MAX_ABUNDANCE)?);
    }

    let per_row = side / Sim1Spec::BLOCK;
    let offset = (Sim1Spec::BLOCK - Sim1Spec::SQUARE) / 2;
    for (cell, v) in cells.iter().enumerate() {
        let top = (cell / per_row) * Sim1Spec::BLOCK + offset;
        let left = (cell % per_row) * Sim1Spec::BLOCK + offset;
        for row in top..top + Sim1Spec::SQUARE {
            for col in left..left + Sim1Spec::SQUARE {
                let px = row * side + col;
                for (k, &w) in v.iter().enumerate() {
                    a[(k, px)] = w;
                }
            }
        }
    }
    Ok(a)
}

/// 105 × 105 scene of 49 homogeneous 5 × 5 squares (45 binary mixtures, 4
/// higher-order) on a background of equal abundances.
pub fn generate_sim1(
    spec: &Sim1Spec,
    endmembers: &EndmemberMatrix,
) -> Result<(HsiMatrix, AbundanceMatrix)> {
    if endmembers.endmember_count() != Sim1Spec::ENDMEMBERS {
        return Err(UnmixError::dims(
            "sim1 endmembers",
            Sim1Spec::ENDMEMBERS,
            endmembers.endmember_count(),
        ));
    }
    let a = sim1_abundances(spec)?;
    let clean = HsiMatrix::with_shape(endmembers.data() * &a, Sim1Spec::SIDE, Sim1Spec::SIDE)?;
    let y = add_noise(&clean, spec.snr_db, derive_seed(spec.seed, TAG_NOISE))?;
    Ok((y, AbundanceMatrix::simplex(a)?))
}

/// Structureless scene with Dirichlet abundances filtered by purity.
#[derive(Debug, Clone, PartialEq)]
pub struct Sim2Spec {
    pub height: usize,
    pub width: usize,
    /// Upper bound on every abundance entry.
    pub rho: f64,
    pub dirichlet_alpha: f64,
    pub snr_db: f64,
    pub seed: u64,
}

impl Sim2Spec {
    pub fn new(rho: f64, snr_db: f64, seed: u64) -> Self {
        Self {
            height: 100,
            width: 100,
            rho,
            dirichlet_alpha: 1.0,
            snr_db,
            seed,
        }
    }
}

enum Concentration {
    Unit,
    General(Gamma<f64>),
}

impl Concentration {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Concentration::Unit => Exp1.sample(rng),
            Concentration::General(g) => g.sample(rng),
        }
    }
}

/// Sample `n` Dirichlet columns, rejecting any with an entry above `rho`.
pub fn sim2_abundances(spec: &Sim2Spec, r: usize) -> Result<DMatrix<f64>> {
    if !(spec.rho > 1.0 / r as f64) {
        return Err(UnmixError::Invalid(format!(
            "rho must exceed 1/r = {:.6}, got {}",
            1.0 / r as f64,
            spec.rho
        )));
    }
    if !(spec.dirichlet_alpha > 0.0) {
        return Err(UnmixError::Invalid("dirichlet_alpha must be positive".into()));
    }
    let conc = if spec.dirichlet_alpha == 1.0 {
        Concentration::Unit
    } else {
        Concentration::General(
            Gamma::new(spec.dirichlet_alpha, 1.0)
                .map_err(|e| UnmixError::Invalid(e.to_string()))?,
        )
    };
    let n = spec.height * spec.width;
    let base = derive_seed(spec.seed, TAG_PIXELS);
    let mut a = DMatrix::zeros(r, n);
    let mut draw = vec![0.0; r];
    for px in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(base);
        rng.set_stream(px as u64);
        let mut accepted = false;
        for _ in 0..MAX_REJECTIONS {
            for v in draw.iter_mut() {
                *v = conc.sample(&mut rng);
            }
            let total: f64 = draw.iter().sum();
            if total <= 0.0 {
                continue;
            }
            draw.iter_mut().for_each(|v| *v /= total);
            if draw.iter().all(|&v| v <= spec.rho) {
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(UnmixError::RejectionLimit {
                pixel: px,
                attempts: MAX_REJECTIONS,
            });
        }
        a.set_column(px, &nalgebra::DVector::from_column_slice(&draw));
    }
    Ok(a)
}

/// Mix the endmembers with purity-filtered Dirichlet abundances and add noise.
pub fn generate_sim2(
    spec: &Sim2Spec,
    endmembers: &EndmemberMatrix,
) -> Result<(HsiMatrix, AbundanceMatrix)> {
    let a = sim2_abundances(spec, endmembers.endmember_count())?;
    let clean = HsiMatrix::with_shape(endmembers.data() * &a, spec.height, spec.width)?;
    let y = add_noise(&clean, spec.snr_db, derive_seed(spec.seed, TAG_NOISE))?;
    Ok((y, AbundanceMatrix::simplex(a)?))
}

/// Tile a scene `reps × reps` times, keeping row-major pixel order.
pub fn tile_scene(
    y: &HsiMatrix,
    a: &AbundanceMatrix,
    reps: usize,
) -> Result<(HsiMatrix, AbundanceMatrix)> {
    let (h, w) = y
        .shape()
        .ok_or_else(|| UnmixError::Invalid("tiling needs a spatial shape".into()))?;
    let (th, tw) = (h * reps, w * reps);
    let src = |row: usize, col: usize| (row % h) * w + (col % w);
    let yd = y.data();
    let ad = a.data();
    let ty = DMatrix::from_fn(yd.nrows(), th * tw, |b, px| yd[(b, src(px / tw, px % tw))]);
    let ta = DMatrix::from_fn(ad.nrows(), th * tw, |k, px| ad[(k, src(px / tw, px % tw))]);
    Ok((
        HsiMatrix::with_shape(ty, th, tw)?,
        AbundanceMatrix::simplex(ta)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::max_column_sum_residual;

    #[test]
    fn pure_atom_endmembers_are_library_columns() {
        let lib = generate_library(&SyntheticLibrarySpec {
            bands: 40,
            atoms: 12,
            endmembers: 3,
            atoms_per_endmember: 1,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let b = lib.mixing.data();
        for k in 0..3 {
            let col = b.column(k);
            let j = col.iter().position(|&v| v == 1.0).unwrap();
            assert_eq!(col.iter().filter(|&&v| v != 0.0).count(), 1);
            assert_eq!(lib.endmembers.data().column(k), lib.library.data().column(j));
        }
    }

    #[test]
    fn mixed_endmembers_are_on_the_simplex() {
        for seed in 0..10 {
            let lib = generate_library(&SyntheticLibrarySpec {
                bands: 30,
                atoms: 40,
                endmembers: 5,
                variability: 3,
                atoms_per_endmember: 3,
                seed,
                ..Default::default()
            })
            .unwrap();
            let b = lib.mixing.data();
            assert!(b.iter().all(|&v| v >= 0.0));
            assert!(max_column_sum_residual(b) < 1e-15);
            for col in b.column_iter() {
                let nz = col.iter().filter(|&&v| v > 0.0).count();
                assert!((1..=3).contains(&nz));
            }
            assert!(lib.library.data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn library_rejects_too_few_atoms() {
        let spec = SyntheticLibrarySpec {
            atoms: 3,
            endmembers: 4,
            ..Default::default()
        };
        assert!(generate_library(&spec).is_err());
    }

    #[test]
    fn library_is_seed_deterministic() {
        let spec = SyntheticLibrarySpec {
            seed: 42,
            variability: 2,
            atoms_per_endmember: 2,
            ..Default::default()
        };
        let a = generate_library(&spec).unwrap();
        let b = generate_library(&spec).unwrap();
        assert_eq!(a.library, b.library);
        assert_eq!(a.mixing, b.mixing);
    }

    #[test]
    fn noise_hits_target_ratio() {
        let y = HsiMatrix::new(DMatrix::from_fn(10, 30, |i, j| ((i + 2 * j) % 7) as f64 * 0.1 + 0.05))
            .unwrap();
        let noisy = add_noise(&y, 20.0, 3).unwrap();
        let ratio = (noisy.data() - y.data()).norm() / y.data().norm();
        assert!((ratio - 0.1).abs() < 1e-12);
        assert_eq!(add_noise(&y, f64::INFINITY, 3).unwrap(), y);
        let zero = HsiMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        assert!(add_noise(&zero, 30.0, 1).is_err());
    }

    #[test]
    fn sim2_small_rho_respects_cap() {
        let spec = Sim2Spec {
            height: 10,
            width: 10,
            ..Sim2Spec::new(0.2, f64::INFINITY, 5)
        };
        let a = sim2_abundances(&spec, 6).unwrap();
        assert!(a.iter().all(|v| (0.0..=0.2).contains(v)));
        assert!(max_column_sum_residual(&a) < 1e-12);
    }

    #[test]
    fn sim2_rejects_infeasible_rho() {
        let spec = Sim2Spec::new(0.05, 30.0, 1);
        assert!(matches!(sim2_abundances(&spec, 6), Err(UnmixError::Invalid(_))));
        let spec = Sim2Spec::new(1.0 / 6.0, 30.0, 1);
        assert!(sim2_abundances(&spec, 6).is_err());
    }

    #[test]
    fn tiling_repeats_the_scene() {
        let y = HsiMatrix::with_shape(DMatrix::from_fn(2, 6, |b, p| (b * 10 + p) as f64), 2, 3)
            .unwrap();
        let a = AbundanceMatrix::simplex(DMatrix::from_element(1, 6, 1.0)).unwrap();
        let (ty, _) = tile_scene(&y, &a, 2).unwrap();
        assert_eq!(ty.shape(), Some((4, 6)));
        // row 3, col 4 maps to source row 1, col 1 -> pixel 4
        assert_eq!(ty.data()[(1, 3 * 6 + 4)], y.data()[(1, 4)]);
    }
}
