//! Domain types shared by the solvers, generators and metrics.
//!
//! All matrices are dense `f64`. Hyperspectral data is stored band-major: a
//! `p × n` matrix holds one pixel spectrum per column.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, UnmixError};

/// Tolerance applied when validating constructed data.
pub const EPS_FEAS: f64 = 1e-9;

/// Tolerance applied when accepting solver outputs as feasible. ADMM meets its
/// constraints only asymptotically.
pub const EPS_OUTPUT: f64 = 1e-6;

fn check_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(UnmixError::NonFinite(what))
    }
}

fn check_nonempty(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(UnmixError::Invalid(format!(
            "{what} must be non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Largest deviation of any column sum from one.
pub fn max_column_sum_residual(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| (c.sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Check that every entry is `>= -tol` and every column sums to one within `tol`.
pub fn check_simplex_columns(m: &DMatrix<f64>, tol: f64, context: &'static str) -> Result<()> {
    if let Some(v) = m.iter().find(|&&v| v < -tol) {
        return Err(UnmixError::Infeasible {
            context,
            detail: format!("negative entry {v:e}"),
        });
    }
    let residual = max_column_sum_residual(m);
    if residual > tol {
        return Err(UnmixError::Infeasible {
            context,
            detail: format!("column sum deviates from 1 by {residual:e}"),
        });
    }
    Ok(())
}

/// Observed hyperspectral image, `p` bands by `n` pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiMatrix {
    data: DMatrix<f64>,
    shape: Option<(usize, usize)>,
}

impl HsiMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        check_nonempty(&data, "HsiMatrix")?;
        check_finite(&data, "HsiMatrix")?;
        Ok(Self { data, shape: None })
    }

    /// Attach a `height × width` raster layout; pixels are stored row-major.
    pub fn with_shape(data: DMatrix<f64>, height: usize, width: usize) -> Result<Self> {
        let mut y = Self::new(data)?;
        if height * width != y.pixel_count() {
            return Err(UnmixError::dims(
                "HsiMatrix spatial shape",
                y.pixel_count(),
                format!("{height}x{width}"),
            ));
        }
        y.shape = Some((height, width));
        Ok(y)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn band_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn pixel_count(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.shape
    }
}

/// Dictionary of candidate endmember spectra, `p` bands by `m` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLibrary {
    data: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl SpectralLibrary {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        check_nonempty(&data, "SpectralLibrary")?;
        check_finite(&data, "SpectralLibrary")?;
        Ok(Self { data, labels: None })
    }

    pub fn with_labels(data: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let mut lib = Self::new(data)?;
        if labels.len() != lib.atom_count() {
            return Err(UnmixError::dims(
                "SpectralLibrary labels",
                lib.atom_count(),
                labels.len(),
            ));
        }
        lib.labels = Some(labels);
        Ok(lib)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn band_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn atom_count(&self) -> usize {
        self.data.ncols()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

/// Fractional abundances, one column per pixel.
///
/// The flags record which constraints were checked at construction; an
/// unflagged matrix is only guaranteed finite.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMatrix {
    data: DMatrix<f64>,
    nonneg_enforced: bool,
    asc_enforced: bool,
}

impl AbundanceMatrix {
    /// Unconstrained abundances (e.g. an intermediate ADMM iterate).
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        check_finite(&data, "AbundanceMatrix")?;
        Ok(Self {
            data,
            nonneg_enforced: false,
            asc_enforced: false,
        })
    }

    /// Abundances on the probability simplex within [`EPS_FEAS`].
    pub fn simplex(data: DMatrix<f64>) -> Result<Self> {
        Self::with_constraints(data, true, true, EPS_FEAS)
    }

    /// Validate the requested constraints at tolerance `tol` and flag them.
    pub fn with_constraints(
        data: DMatrix<f64>,
        nonneg: bool,
        asc: bool,
        tol: f64,
    ) -> Result<Self> {
        check_finite(&data, "AbundanceMatrix")?;
        if nonneg {
            if let Some(v) = data.iter().find(|&&v| v < -tol) {
                return Err(UnmixError::Infeasible {
                    context: "AbundanceMatrix",
                    detail: format!("negative entry {v:e}"),
                });
            }
        }
        if asc {
            let residual = max_column_sum_residual(&data);
            if residual > tol {
                return Err(UnmixError::Infeasible {
                    context: "AbundanceMatrix",
                    detail: format!("column sum deviates from 1 by {residual:e}"),
                });
            }
        }
        Ok(Self {
            data,
            nonneg_enforced: nonneg,
            asc_enforced: asc,
        })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn nonneg_enforced(&self) -> bool {
        self.nonneg_enforced
    }

    pub fn asc_enforced(&self) -> bool {
        self.asc_enforced
    }
}

/// Simplex weights combining library atoms into endmembers (`m × r`).
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    data: DMatrix<f64>,
}

impl MixingMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(data, EPS_FEAS)
    }

    pub fn with_tolerance(data: DMatrix<f64>, tol: f64) -> Result<Self> {
        check_finite(&data, "MixingMatrix")?;
        check_simplex_columns(&data, tol, "MixingMatrix")?;
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivation {
    Given,
    ComputedAsDB,
}

/// Endmember spectra, `p × r`.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberMatrix {
    data: DMatrix<f64>,
    derivation: Derivation,
}

impl EndmemberMatrix {
    pub fn given(data: DMatrix<f64>) -> Result<Self> {
        check_finite(&data, "EndmemberMatrix")?;
        Ok(Self {
            data,
            derivation: Derivation::Given,
        })
    }

    /// `E = D·B`.
    pub fn from_library(library: &SpectralLibrary, mixing: &MixingMatrix) -> Result<Self> {
        if library.atom_count() != mixing.data().nrows() {
            return Err(UnmixError::dims(
                "EndmemberMatrix D·B",
                library.atom_count(),
                mixing.data().nrows(),
            ));
        }
        Ok(Self {
            data: library.data() * mixing.data(),
            derivation: Derivation::ComputedAsDB,
        })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn derivation(&self) -> Derivation {
        self.derivation
    }

    pub fn band_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn endmember_count(&self) -> usize {
        self.data.ncols()
    }
}

/// Hyperparameters of the two-block ADMM.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Number of endmembers.
    pub r: usize,
    /// Outer (cyclic descent) iterations.
    pub outer_iters: usize,
    /// Inner ADMM iterations of the abundance step.
    pub a_iters: usize,
    /// Inner ADMM iterations of the mixing step.
    pub b_iters: usize,
    /// Augmented-Lagrangian weight of the abundance split.
    pub mu_a: f64,
    /// Augmented-Lagrangian weight of the `B = S1` split.
    pub mu_b1: f64,
    /// Augmented-Lagrangian weight of the `D·B = S2` split.
    pub mu_b2: f64,
    /// Center-penalty weight.
    pub lambda: f64,
    pub seed: u64,
    /// Relative objective change over 10 outer iterations that triggers an
    /// early stop; 0 runs all `outer_iters`.
    pub tol_obj: f64,
    /// Renormalize released abundance columns to sum exactly to one.
    pub asc_renormalize: bool,
}

impl SolverConfig {
    /// Defaults tuned for simulated scenes: T = 10000, T_A = T_B = 5,
    /// μ = (50, 2, 1), λ = 0.3.
    pub fn simulated(r: usize) -> Self {
        Self {
            r,
            outer_iters: 10_000,
            a_iters: 5,
            b_iters: 5,
            mu_a: 50.0,
            mu_b1: 2.0,
            mu_b2: 1.0,
            lambda: 0.3,
            seed: 0,
            tol_obj: 0.0,
            asc_renormalize: false,
        }
    }

    /// Defaults tuned for the Cuprite scene: μ = (500, 50, 1), λ = 10.
    pub fn cuprite(r: usize) -> Self {
        Self {
            mu_a: 500.0,
            mu_b1: 50.0,
            mu_b2: 1.0,
            lambda: 10.0,
            ..Self::simulated(r)
        }
    }

    /// Simulated defaults with T = 1000 for CPU-scale runs.
    pub fn quick(r: usize) -> Self {
        Self {
            outer_iters: 1000,
            ..Self::simulated(r)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(UnmixError::Invalid(msg.to_string()));
        if self.r < 1 {
            return bad("r must be at least 1");
        }
        if self.outer_iters < 1 || self.a_iters < 1 || self.b_iters < 1 {
            return bad("iteration counts must be at least 1");
        }
        for (name, mu) in [
            ("mu_a", self.mu_a),
            ("mu_b1", self.mu_b1),
            ("mu_b2", self.mu_b2),
        ] {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(UnmixError::Invalid(format!(
                    "{name} must be positive and finite, got {mu}"
                )));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative and finite");
        }
        if !(self.tol_obj >= 0.0) {
            return bad("tol_obj must be non-negative");
        }
        Ok(())
    }
}

/// Output of a MiSiSUn / FaSUn solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub abundances: AbundanceMatrix,
    pub mixing: MixingMatrix,
    pub endmembers: EndmemberMatrix,
    /// Objective value after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub wall_time_seconds: f64,
    /// Configuration the solve ran with.
    pub config: SolverConfig,
    /// Largest column-sum deviation of the released abundances.
    pub abundance_sum_residual: f64,
    /// Largest column-sum deviation of the mixing split before renormalization.
    pub mixing_sum_residual: f64,
}

/// Mean pixel spectrum `(1/n)·Y·1`.
pub fn mean_spectrum(y: &HsiMatrix) -> DVector<f64> {
    let n = y.pixel_count() as f64;
    y.data().column_sum() / n
}

/// `½‖Y − D·B·A‖²_F + λ‖D·B − m·1ᵀ‖²_F` with `m` the mean spectrum of `Y`.
pub fn objective_misisun(
    y: &HsiMatrix,
    d: &SpectralLibrary,
    b: &DMatrix<f64>,
    a: &DMatrix<f64>,
    lambda: f64,
) -> Result<f64> {
    if d.band_count() != y.band_count() {
        return Err(UnmixError::dims(
            "objective: library bands",
            y.band_count(),
            d.band_count(),
        ));
    }
    if b.nrows() != d.atom_count() {
        return Err(UnmixError::dims(
            "objective: B rows",
            d.atom_count(),
            b.nrows(),
        ));
    }
    if a.nrows() != b.ncols() || a.ncols() != y.pixel_count() {
        return Err(UnmixError::dims(
            "objective: A shape",
            format!("{}x{}", b.ncols(), y.pixel_count()),
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    if !(lambda >= 0.0) {
        return Err(UnmixError::Invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let e = d.data() * b;
    let fit = 0.5 * (y.data() - &e * a).norm_squared();
    if lambda == 0.0 {
        return Ok(fit);
    }
    let m = mean_spectrum(y);
    let mut centered = e;
    for mut col in centered.column_iter_mut() {
        col -= &m;
    }
    Ok(fit + lambda * centered.norm_squared())
}
