//! Sparse-regression baselines over the full library.

use nalgebra::DMatrix;

use crate::error::{Result, UnmixError};
use crate::quec::quec_prepare;
use crate::types::{max_column_sum_residual, AbundanceMatrix, HsiMatrix, SpectralLibrary, EPS_OUTPUT};

#[derive(Debug, Clone, PartialEq)]
pub struct SunsalConfig {
    /// ℓ1 weight.
    pub lambda_l1: f64,
    /// Augmented-Lagrangian weight.
    pub mu: f64,
    pub iters: usize,
    /// Sum-to-one constraint on each abundance column.
    pub enforce_asc: bool,
    /// Nonnegativity.
    pub enforce_anc: bool,
}

impl Default for SunsalConfig {
    fn default() -> Self {
        Self {
            lambda_l1: 1e-3,
            mu: 0.1,
            iters: 2000,
            enforce_asc: false,
            enforce_anc: true,
        }
    }
}

impl SunsalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters < 1 {
            return Err(UnmixError::Invalid("iters must be at least 1".into()));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(UnmixError::Invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.lambda_l1 >= 0.0 && self.lambda_l1.is_finite()) {
            return Err(UnmixError::Invalid("lambda_l1 must be >= 0".into()));
        }
        Ok(())
    }
}

/// `sign(v)·max(|v| − τ, 0)`
#[inline]
pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// SUnSAL: `min ½‖Y − D·X‖²_F + λ‖X‖₁`, optionally with `X ≥ 0` and
/// `1ᵀX = 1ᵀ`, via the split `X = Z`. Returns `Z` (`m × n`).
pub fn solve_sunsal(
    y: &HsiMatrix,
    d: &SpectralLibrary,
    cfg: &SunsalConfig,
) -> Result<AbundanceMatrix> {
    cfg.validate()?;
    if d.band_count() != y.band_count() {
        return Err(UnmixError::dims("sunsal library bands", y.band_count(), d.band_count()));
    }
    let (m, n) = (d.atom_count(), y.pixel_count());
    let fac = quec_prepare(d.data(), cfg.mu)?;
    let dty = fac.project(y.data())?;
    let tau = cfg.lambda_l1 / cfg.mu;

    let mut z = DMatrix::<f64>::zeros(m, n);
    let mut u = DMatrix::<f64>::zeros(m, n);
    for _ in 0..cfg.iters {
        let g = &z - &u;
        let x = if cfg.enforce_asc {
            fac.solve_projected(&dty, &g)?
        } else {
            fac.ridge_solve_projected(&dty, &g)?
        };
        for ((z, u), &x) in z.iter_mut().zip(u.iter_mut()).zip(x.iter()) {
            let v = x + *u;
            let mut s = soft_threshold(v, tau);
            if cfg.enforce_anc {
                s = s.max(0.0);
            }
            *z = s;
            *u = v - s;
        }
    }
    if !z.iter().all(|v| v.is_finite()) {
        return Err(UnmixError::NumericalFailure {
            iteration: cfg.iters,
            block: "sparse regression",
        });
    }
    let asc_ok = cfg.enforce_asc && max_column_sum_residual(&z) <= EPS_OUTPUT;
    AbundanceMatrix::with_constraints(z, cfg.enforce_anc, asc_ok, EPS_OUTPUT)
}

/// Nonnegative least squares over the library (SUnSAL with `λ = 0`).
pub fn solve_nnls(
    y: &HsiMatrix,
    d: &SpectralLibrary,
    mu: f64,
    iters: usize,
) -> Result<AbundanceMatrix> {
    solve_sunsal(
        y,
        d,
        &SunsalConfig {
            lambda_l1: 0.0,
            mu,
            iters,
            enforce_asc: false,
            enforce_anc: true,
        },
    )
}
