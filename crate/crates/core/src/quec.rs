//! Closed-form solver for the least-squares problem with a sum-to-one
//! equality constraint, shared by both ADMM blocks.
//!
//! For a fixed `E` (`p × k`) and `μ > 0` it solves, column by column,
//!
//! ```text
//! argmin_X ½‖T − E·X‖²_F + (μ/2)‖X − G‖²_F   s.t.  1ᵀX = 1ᵀ
//! ```
//!
//! via the bordered KKT system. With `Q = (EᵀE + μI)⁻¹` and
//! `c = −1/(1ᵀQ1)` the minimizer is
//!
//! ```text
//! X = (Q + c·Q1·1ᵀQ)(EᵀT + μG) − c·Q1·1ᵀ
//! ```
//!
//! The factorization depends only on `E` and `μ`, so it is prepared once and
//! reused for every inner iteration.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, UnmixError};

/// Prepared closed-form operator for a fixed `(E, μ)`.
#[derive(Debug, Clone)]
pub struct QuecFactorization {
    q: DMatrix<f64>,
    c: f64,
    et: DMatrix<f64>,
    mu: f64,
    /// `Q + c·Q1·1ᵀQ`
    w: DMatrix<f64>,
    /// `Q1`
    q1: DVector<f64>,
}

/// Factorize `EᵀE + μI` and precompute the constrained solve operator.
pub fn quec_prepare(e: &DMatrix<f64>, mu: f64) -> Result<QuecFactorization> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(UnmixError::Invalid(format!("mu must be positive, got {mu}")));
    }
    if !e.iter().all(|v| v.is_finite()) {
        return Err(UnmixError::NonFinite("QuEC design matrix"));
    }
    let k = e.ncols();
    if k == 0 {
        return Err(UnmixError::Invalid("QuEC design matrix has no columns".into()));
    }
    let et = e.transpose();
    let mut h = &et * e;
    for i in 0..k {
        h[(i, i)] += mu;
    }
    let q = match h.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => {
            return Err(UnmixError::IllConditioned {
                context: "EᵀE + μI is not positive definite",
                condition: condition_estimate(&h),
            })
        }
    };
    // Symmetrize: the Cholesky inverse is symmetric only up to rounding.
    let q = (&q + q.transpose()) * 0.5;
    let q1: DVector<f64> = q.column_sum();
    let s = q1.sum();
    if !(s > 0.0 && s.is_finite()) {
        return Err(UnmixError::IllConditioned {
            context: "1ᵀQ1 is not positive",
            condition: condition_estimate(&h),
        });
    }
    let c = -1.0 / s;
    let w = &q + (&q1 * q1.transpose()) * c;
    Ok(QuecFactorization {
        q,
        c,
        et,
        mu,
        w,
        q1,
    })
}

fn condition_estimate(h: &DMatrix<f64>) -> f64 {
    let eig = h.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(f64::MIN, |a, &b| a.max(b.abs()));
    let min = eig.iter().fold(f64::MAX, |a, &b| a.min(b.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

impl QuecFactorization {
    /// `(EᵀE + μI)⁻¹`
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `−1/(1ᵀQ1)`
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Cached `Eᵀ`.
    pub fn et(&self) -> &DMatrix<f64> {
        &self.et
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Number of unknowns per column (`k`).
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// Band count of the design matrix (`p`).
    pub fn band_count(&self) -> usize {
        self.et.ncols()
    }

    /// `Eᵀ·T`, the data-dependent part of the right-hand side.
    pub fn project(&self, t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if t.nrows() != self.band_count() {
            return Err(UnmixError::dims("QuEC target rows", self.band_count(), t.nrows()));
        }
        Ok(&self.et * t)
    }

    /// Constrained solve with `Eᵀ·T` already formed. `et_t` and `g` are `k × n`.
    pub fn solve_projected(&self, et_t: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let k = self.dim();
        if et_t.nrows() != k || g.nrows() != k || et_t.ncols() != g.ncols() {
            return Err(UnmixError::dims(
                "QuEC right-hand side",
                format!("{k}x{}", et_t.ncols()),
                format!("{}x{} and {}x{}", et_t.nrows(), et_t.ncols(), g.nrows(), g.ncols()),
            ));
        }
        let rhs = et_t + g * self.mu;
        let mut x = &self.w * rhs;
        let shift = &self.q1 * (-self.c);
        for mut col in x.column_iter_mut() {
            col += &shift;
        }
        Ok(x)
    }

    /// `argmin ½‖T − E·X‖² + (μ/2)‖X − G‖²` subject to `1ᵀX = 1ᵀ`.
    pub fn solve(&self, t: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let et_t = self.project(t)?;
        self.solve_projected(&et_t, g)
    }

    /// The same problem without the equality constraint: `Q(EᵀT + μG)`.
    pub fn ridge_solve_projected(
        &self,
        et_t: &DMatrix<f64>,
        g: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let k = self.dim();
        if et_t.nrows() != k || g.nrows() != k || et_t.ncols() != g.ncols() {
            return Err(UnmixError::dims(
                "ridge right-hand side",
                format!("{k}x{}", et_t.ncols()),
                format!("{}x{} and {}x{}", et_t.nrows(), et_t.ncols(), g.nrows(), g.ncols()),
            ));
        }
        Ok(&self.q * (et_t + g * self.mu))
    }
}

/// Free-function form of [`QuecFactorization::solve`].
pub fn quec_solve(
    f: &QuecFactorization,
    t: &DMatrix<f64>,
    g: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    f.solve(t, g)
}
