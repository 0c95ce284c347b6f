//! Two-block cyclic-descent ADMM for the minimum-simplex library model
//!
//! ```text
//! min_{B,A} ½‖Y − D·B·A‖²_F + λ‖D·B − m·1ᵀ‖²_F
//!   s.t. B ≥ 0, 1ᵀB = 1ᵀ, A ≥ 0, 1ᵀA = 1ᵀ
//! ```
//!
//! Each outer iteration runs a few ADMM iterations on the abundances with the
//! endmembers `E = D·B` held fixed, then a few on the mixing matrix with the
//! abundances held fixed. With `λ = 0` this is the FaSUn special case.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, UnmixError};
use crate::quec::{quec_prepare, QuecFactorization};
use crate::types::{
    max_column_sum_residual, mean_spectrum, AbundanceMatrix, EndmemberMatrix, HsiMatrix,
    MixingMatrix, SolveResult, SolverConfig, SpectralLibrary, EPS_OUTPUT,
};

/// ADMM variables of the abundance step: iterate `A`, split `S = A` and
/// scaled multiplier `L`, all `r × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmStateA {
    pub a: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub l: DMatrix<f64>,
}

impl AdmmStateA {
    pub fn zeros(r: usize, n: usize) -> Self {
        Self {
            a: DMatrix::zeros(r, n),
            s: DMatrix::zeros(r, n),
            l: DMatrix::zeros(r, n),
        }
    }

    fn is_finite(&self) -> bool {
        [&self.a, &self.s, &self.l]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
    }
}

/// ADMM variables of the mixing step: iterate `B` (`m × r`), splits
/// `S1 = B` (`m × r`) and `S2 = D·B` (`p × r`) with multipliers `L1`, `L2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmStateB {
    pub b: DMatrix<f64>,
    pub s1: DMatrix<f64>,
    pub s2: DMatrix<f64>,
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
}

impl AdmmStateB {
    pub fn zeros(atoms: usize, bands: usize, r: usize) -> Self {
        Self {
            b: DMatrix::zeros(atoms, r),
            s1: DMatrix::zeros(atoms, r),
            s2: DMatrix::zeros(bands, r),
            l1: DMatrix::zeros(atoms, r),
            l2: DMatrix::zeros(bands, r),
        }
    }

    fn is_finite(&self) -> bool {
        [&self.b, &self.s1, &self.s2, &self.l1, &self.l2]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
    }
}

/// `S ← max(0, X + L)`, `L ← L + X − S`, elementwise.
fn project_and_update(x: &DMatrix<f64>, s: &mut DMatrix<f64>, l: &mut DMatrix<f64>) {
    for ((s, l), &x) in s.iter_mut().zip(l.iter_mut()).zip(x.iter()) {
        let v = *l + x;
        *s = v.max(0.0);
        *l = v - *s;
    }
}

fn run_a_step(
    y: &DMatrix<f64>,
    fac: &QuecFactorization,
    state: &mut AdmmStateA,
    iters: usize,
) -> Result<()> {
    let ety = fac.project(y)?;
    for _ in 0..iters {
        let g = &state.s - &state.l;
        state.a = fac.solve_projected(&ety, &g)?;
        project_and_update(&state.a, &mut state.s, &mut state.l);
    }
    Ok(())
}

fn check_state_a(state: &AdmmStateA, r: usize, n: usize) -> Result<()> {
    for (name, m) in [("A", &state.a), ("S", &state.s), ("L", &state.l)] {
        if m.shape() != (r, n) {
            return Err(UnmixError::dims(
                "abundance state",
                format!("{name}: {r}x{n}"),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
    }
    Ok(())
}

/// Run `t1` ADMM iterations of the abundance step with fixed endmembers.
pub fn a_step(
    y: &HsiMatrix,
    e: &EndmemberMatrix,
    mut state: AdmmStateA,
    mu_a: f64,
    t1: usize,
) -> Result<AdmmStateA> {
    if t1 < 1 {
        return Err(UnmixError::Invalid("t1 must be at least 1".into()));
    }
    if e.band_count() != y.band_count() {
        return Err(UnmixError::dims("a_step endmember bands", y.band_count(), e.band_count()));
    }
    check_state_a(&state, e.endmember_count(), y.pixel_count())?;
    let fac = quec_prepare(e.data(), mu_a)?;
    run_a_step(y.data(), &fac, &mut state, t1)?;
    Ok(state)
}

/// Terms of the mixing step that stay fixed while `A` is fixed.
struct MixingStepTerms {
    /// `Y·Aᵀ + λ·m·1ᵀ`
    data_term: DMatrix<f64>,
    /// `(A·Aᵀ + (μ₂ + λ)I)⁻¹`
    s2_inverse: DMatrix<f64>,
}

impl MixingStepTerms {
    fn new(
        yat: &DMatrix<f64>,
        aat: &DMatrix<f64>,
        mean: &DVector<f64>,
        mu_b2: f64,
        penalty: Option<f64>,
    ) -> Result<Self> {
        let r = aat.nrows();
        let mut data_term = yat.clone();
        let mut m = aat.clone();
        match penalty {
            Some(lambda) => {
                for mut col in data_term.column_iter_mut() {
                    col += mean * lambda;
                }
                for i in 0..r {
                    m[(i, i)] += mu_b2 + lambda;
                }
            }
            None => {
                for i in 0..r {
                    m[(i, i)] += mu_b2;
                }
            }
        }
        let s2_inverse = match m.clone().cholesky() {
            Some(ch) => ch.inverse(),
            None => {
                return Err(UnmixError::IllConditioned {
                    context: "A·Aᵀ + (μ₂ + λ)I is not positive definite",
                    condition: f64::INFINITY,
                })
            }
        };
        Ok(Self {
            data_term,
            s2_inverse,
        })
    }
}

fn run_b_step(
    d: &DMatrix<f64>,
    dfac: &QuecFactorization,
    terms: &MixingStepTerms,
    mu_b2: f64,
    state: &mut AdmmStateB,
    iters: usize,
) -> Result<()> {
    for _ in 0..iters {
        let t = &state.s2 - &state.l2;
        let g = &state.s1 - &state.l1;
        state.b = dfac.solve(&t, &g)?;
        let db = d * &state.b;
        // L1 only depends on B and the new S1, so it can be folded in here.
        project_and_update(&state.b, &mut state.s1, &mut state.l1);
        let rhs = &terms.data_term + (&db + &state.l2) * mu_b2;
        state.s2 = rhs * &terms.s2_inverse;
        state.l2 += &db - &state.s2;
    }
    Ok(())
}

fn check_b_inputs(
    y: &HsiMatrix,
    d: &SpectralLibrary,
    a: &DMatrix<f64>,
    state: &AdmmStateB,
) -> Result<()> {
    if d.band_count() != y.band_count() {
        return Err(UnmixError::dims("b_step library bands", y.band_count(), d.band_count()));
    }
    if a.ncols() != y.pixel_count() {
        return Err(UnmixError::dims("b_step abundance columns", y.pixel_count(), a.ncols()));
    }
    let (m, p, r) = (d.atom_count(), d.band_count(), a.nrows());
    for (name, mat, shape) in [
        ("B", &state.b, (m, r)),
        ("S1", &state.s1, (m, r)),
        ("L1", &state.l1, (m, r)),
        ("S2", &state.s2, (p, r)),
        ("L2", &state.l2, (p, r)),
    ] {
        if mat.shape() != shape {
            return Err(UnmixError::dims(
                "mixing state",
                format!("{name}: {}x{}", shape.0, shape.1),
                format!("{}x{}", mat.nrows(), mat.ncols()),
            ));
        }
    }
    Ok(())
}

/// Run `t2` ADMM iterations of the mixing step with fixed abundances `a`.
#[allow(clippy::too_many_arguments)]
pub fn b_step(
    y: &HsiMatrix,
    d: &SpectralLibrary,
    a: &AbundanceMatrix,
    mut state: AdmmStateB,
    mu_b1: f64,
    mu_b2: f64,
    lambda: f64,
    t2: usize,
    mean: &DVector<f64>,
) -> Result<AdmmStateB> {
    if t2 < 1 {
        return Err(UnmixError::Invalid("t2 must be at least 1".into()));
    }
    if !(mu_b1 > 0.0 && mu_b2 > 0.0) {
        return Err(UnmixError::Invalid("mu_b1 and mu_b2 must be positive".into()));
    }
    if !(lambda >= 0.0) {
        return Err(UnmixError::Invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let a = a.data();
    check_b_inputs(y, d, a, &state)?;
    if mean.len() != y.band_count() {
        return Err(UnmixError::dims("b_step mean spectrum", y.band_count(), mean.len()));
    }
    let dfac = quec_prepare(d.data(), mu_b1 / mu_b2)?;
    let yat = y.data() * a.transpose();
    let aat = a * a.transpose();
    let terms = MixingStepTerms::new(&yat, &aat, mean, mu_b2, Some(lambda))?;
    run_b_step(d.data(), &dfac, &terms, mu_b2, &mut state, t2)?;
    Ok(state)
}

/// Objective from cached products: with `E = D·B`,
/// `‖Y − E·A‖² = ‖Y‖² − 2⟨Y·Aᵀ, E⟩ + ⟨A·Aᵀ, EᵀE⟩`.
fn cached_objective(
    y_norm2: f64,
    yat: &DMatrix<f64>,
    aat: &DMatrix<f64>,
    e: &DMatrix<f64>,
    mean: &DVector<f64>,
    penalty: Option<f64>,
) -> f64 {
    let ete = e.tr_mul(e);
    let fit = (y_norm2 - 2.0 * yat.dot(e) + aat.dot(&ete)).max(0.0);
    let mut f = 0.5 * fit;
    if let Some(lambda) = penalty {
        let mut centered = e.clone();
        for mut col in centered.column_iter_mut() {
            col -= mean;
        }
        f += lambda * centered.norm_squared();
    }
    f
}

fn validate_solve(y: &HsiMatrix, d: &SpectralLibrary, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if d.band_count() != y.band_count() {
        return Err(UnmixError::dims("library bands", y.band_count(), d.band_count()));
    }
    if cfg.r > d.atom_count() {
        return Err(UnmixError::Invalid(format!(
            "r = {} exceeds the library atom count {}",
            cfg.r,
            d.atom_count()
        )));
    }
    Ok(())
}

/// Normalize each column of a nonnegative matrix to sum to one. All-zero
/// columns become uniform.
fn renormalize_columns(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let k = m.nrows() as f64;
    for mut col in m.column_iter_mut() {
        let s = col.sum();
        if s > 0.0 {
            col /= s;
        } else {
            col.fill(1.0 / k);
        }
    }
    m
}

fn solve_two_block(
    y: &HsiMatrix,
    d: &SpectralLibrary,
    cfg: &SolverConfig,
    penalty: Option<f64>,
) -> Result<SolveResult> {
    validate_solve(y, d, cfg)?;
    let start = Instant::now();
    let (p, n, m, r) = (y.band_count(), y.pixel_count(), d.atom_count(), cfg.r);
    let ydata = y.data();
    let dmat = d.data();
    let mean = mean_spectrum(y);
    let y_norm2 = ydata.norm_squared();

    let dfac = quec_prepare(dmat, cfg.mu_b1 / cfg.mu_b2)?;
    let mut sa = AdmmStateA::zeros(r, n);
    let mut sb = AdmmStateB::zeros(m, p, r);
    let mut trace = Vec::with_capacity(cfg.outer_iters);

    for t in 0..cfg.outer_iters {
        let e = dmat * &sb.b;
        let afac = quec_prepare(&e, cfg.mu_a)?;
        run_a_step(ydata, &afac, &mut sa, cfg.a_iters)?;
        if !sa.is_finite() {
            return Err(UnmixError::NumericalFailure {
                iteration: t,
                block: "abundance step",
            });
        }

        let yat = ydata * sa.a.transpose();
        let aat = &sa.a * sa.a.transpose();
        let terms = MixingStepTerms::new(&yat, &aat, &mean, cfg.mu_b2, penalty)?;
        run_b_step(dmat, &dfac, &terms, cfg.mu_b2, &mut sb, cfg.b_iters)?;
        if !sb.is_finite() {
            return Err(UnmixError::NumericalFailure {
                iteration: t,
                block: "mixing step",
            });
        }

        let e = dmat * &sb.b;
        let f = cached_objective(y_norm2, &yat, &aat, &e, &mean, penalty);
        if !f.is_finite() {
            return Err(UnmixError::NumericalFailure {
                iteration: t,
                block: "objective",
            });
        }
        trace.push(f);

        if cfg.tol_obj > 0.0 && trace.len() > 10 {
            let prev = trace[trace.len() - 11];
            if (prev - f).abs() <= cfg.tol_obj * prev.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }

    let mut abund = sa.s;
    if cfg.asc_renormalize {
        abund = renormalize_columns(abund);
    }
    let abundance_sum_residual = max_column_sum_residual(&abund);
    let abundances = AbundanceMatrix::with_constraints(
        abund,
        true,
        abundance_sum_residual <= EPS_OUTPUT,
        EPS_OUTPUT,
    )?;
    let mixing_sum_residual = max_column_sum_residual(&sb.s1);
    let mixing = MixingMatrix::with_tolerance(renormalize_columns(sb.s1), EPS_OUTPUT)?;
    let endmembers = EndmemberMatrix::from_library(d, &mixing)?;

    let mut config = cfg.clone();
    if penalty.is_none() {
        config.lambda = 0.0;
    }
    Ok(SolveResult {
        abundances,
        mixing,
        endmembers,
        iterations_run: trace.len(),
        objective_trace: trace,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        config,
        abundance_sum_residual,
        mixing_sum_residual,
    })
}

/// Minimum-simplex semisupervised unmixing.
///
/// Starts from all-zero variables, so the first abundance step sees `E = 0`.
/// Released values: abundances are the nonnegative split `S` (optionally
/// renormalized), `B̂` is the nonnegative split `S1` renormalized onto the
/// simplex, and `Ê = D·B̂`.
pub fn solve_misisun(
    y: &HsiMatrix,
    d: &SpectralLibrary,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    // λ = 0 takes the penalty-free path so the result matches FaSUn bitwise.
    let penalty = (cfg.lambda != 0.0).then_some(cfg.lambda);
    solve_two_block(y, d, cfg, penalty)
}

/// The library archetypal model without the center penalty (`λ = 0`).
pub fn solve_fasun(y: &HsiMatrix, d: &SpectralLibrary, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_two_block(y, d, cfg, None)
}

/// Fully constrained least squares with fixed endmembers: the abundance step
/// alone, run for `iters` iterations from a zero start.
pub fn solve_fclsu(
    y: &HsiMatrix,
    e: &EndmemberMatrix,
    mu_a: f64,
    iters: usize,
) -> Result<AbundanceMatrix> {
    let state = a_step(
        y,
        e,
        AdmmStateA::zeros(e.endmember_count(), y.pixel_count()),
        mu_a,
        iters,
    )?;
    let residual = max_column_sum_residual(&state.s);
    AbundanceMatrix::with_constraints(state.s, true, residual <= EPS_OUTPUT, EPS_OUTPUT)
}
