use std::time::Instant;

use clap::ValueEnum;
use nalgebra::DMatrix;

use super::{usage, CliResult, Preset, SolverFlags};
use crate::baselines::{solve_sunsal, SunsalConfig};
use crate::dataio::{fmt_f64, KvRecord};
use crate::solver::{solve_fasun, solve_fclsu, solve_misisun};
use crate::types::{max_column_sum_residual, EndmemberMatrix, HsiMatrix, SolverConfig, SpectralLibrary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum Algo {
    /// Library archetypal model with the center penalty.
    Misisun,
    /// The same model without the penalty (lambda = 0).
    Fasun,
    /// Fully constrained least squares with known endmembers.
    Fclsu,
    /// l1 sparse regression over the whole library.
    Sunsal,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Misisun => "misisun",
            Algo::Fasun => "fasun",
            Algo::Fclsu => "fclsu",
            Algo::Sunsal => "sunsal",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        <Algo as ValueEnum>::from_str(s.trim(), true)
            .map_err(|_| usage(format!("unknown algorithm {s:?}; expected misisun, fasun, fclsu or sunsal")))
    }
}

/// Settings of every algorithm after applying the preset and the flags.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub algo: Algo,
    pub solver: SolverConfig,
    pub sunsal: SunsalConfig,
    pub fclsu_iters: usize,
}

pub fn resolve(flags: &SolverFlags, algo: Algo, r: usize) -> CliResult<Resolved> {
    let mut cfg = match flags.preset {
        Preset::Simulated => SolverConfig::simulated(r),
        Preset::Quick => SolverConfig::quick(r),
        Preset::Cuprite => SolverConfig::cuprite(r),
    };
    if let Some(v) = flags.outer {
        cfg.outer_iters = v;
    }
    if let Some(v) = flags.t1 {
        cfg.a_iters = v;
    }
    if let Some(v) = flags.t2 {
        cfg.b_iters = v;
    }
    if let Some(v) = flags.mu_a {
        cfg.mu_a = v;
    }
    if let Some(v) = flags.mu_b1 {
        cfg.mu_b1 = v;
    }
    if let Some(v) = flags.mu_b2 {
        cfg.mu_b2 = v;
    }
    cfg.asc_renormalize = flags.asc_renormalize;
    cfg.tol_obj = flags.tol_obj;
    let mut sunsal = SunsalConfig {
        mu: flags.sunsal_mu,
        iters: flags.iters,
        ..SunsalConfig::default()
    };
    match algo {
        Algo::Misisun => {
            if let Some(l) = flags.lambda {
                cfg.lambda = l;
            }
        }
        Algo::Fasun => {
            if flags.lambda.is_some_and(|l| l != 0.0) {
                return Err(usage("fasun fixes lambda = 0; use --algo misisun for other values"));
            }
            cfg.lambda = 0.0;
        }
        Algo::Sunsal => {
            if let Some(l) = flags.lambda {
                sunsal.lambda_l1 = l;
            }
        }
        Algo::Fclsu => {}
    }
    match algo {
        Algo::Misisun | Algo::Fasun => cfg.validate()?,
        Algo::Sunsal => sunsal.validate()?,
        Algo::Fclsu => {
            if flags.iters < 1 {
                return Err(usage("--iters must be at least 1"));
            }
            if !(cfg.mu_a > 0.0 && cfg.mu_a.is_finite()) {
                return Err(usage("--mu-a must be positive"));
            }
        }
    }
    Ok(Resolved {
        algo,
        solver: cfg,
        sunsal,
        fclsu_iters: flags.iters,
    })
}

impl Resolved {
    /// Settings that influence the result of the selected algorithm.
    pub fn record(&self) -> KvRecord {
        let mut rec = KvRecord::new();
        rec.set("algo", self.algo.name());
        let c = &self.solver;
        match self.algo {
            Algo::Misisun | Algo::Fasun => {
                rec.set("r", c.r);
                rec.set("T", c.outer_iters);
                rec.set("t1", c.a_iters);
                rec.set("t2", c.b_iters);
                rec.set("mu_a", fmt_f64(c.mu_a));
                rec.set("mu_b1", fmt_f64(c.mu_b1));
                rec.set("mu_b2", fmt_f64(c.mu_b2));
                rec.set("lambda", fmt_f64(c.lambda));
                rec.set("tol_obj", fmt_f64(c.tol_obj));
                rec.set("asc_renormalize", c.asc_renormalize);
            }
            Algo::Fclsu => {
                rec.set("mu_a", fmt_f64(c.mu_a));
                rec.set("iters", self.fclsu_iters);
                rec.set("asc_renormalize", c.asc_renormalize);
            }
            Algo::Sunsal => {
                let s = &self.sunsal;
                rec.set("lambda", fmt_f64(s.lambda_l1));
                rec.set("mu", fmt_f64(s.mu));
                rec.set("iters", s.iters);
                rec.set("enforce_asc", s.enforce_asc);
                rec.set("enforce_anc", s.enforce_anc);
            }
        }
        rec
    }
}

/// Estimates of one run. `abundances` is `r × n`, except for sunsal where
/// it is `m × n` over the whole library.
#[derive(Debug, Clone)]
pub struct AlgoOutput {
    pub abundances: DMatrix<f64>,
    pub mixing: Option<DMatrix<f64>>,
    pub endmembers: Option<DMatrix<f64>>,
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub wall_time_seconds: f64,
    pub abundance_sum_residual: f64,
    pub mixing_sum_residual: Option<f64>,
}

impl AlgoOutput {
    /// Abundances over the library atoms (`m × n`), when defined.
    pub fn library_abundances(&self, b_true: Option<&DMatrix<f64>>) -> Option<DMatrix<f64>> {
        match (&self.mixing, self.endmembers.is_some()) {
            (Some(b), _) => Some(b * &self.abundances),
            (None, true) => b_true.map(|b| b * &self.abundances),
            (None, false) => Some(self.abundances.clone()),
        }
    }

    /// Design matrix that reconstructs the data from `abundances`.
    pub fn design<'a>(&'a self, d: Option<&'a SpectralLibrary>) -> Option<&'a DMatrix<f64>> {
        match &self.endmembers {
            Some(e) => Some(e),
            None => d.map(|d| d.data()),
        }
    }
}

fn renormalized(mut a: DMatrix<f64>) -> DMatrix<f64> {
    let k = a.nrows() as f64;
    for mut col in a.column_iter_mut() {
        let s = col.sum();
        if s > 0.0 {
            col /= s;
        } else {
            col.fill(1.0 / k);
        }
    }
    a
}

pub fn run_algo(
    cfg: &Resolved,
    y: &HsiMatrix,
    d: Option<&SpectralLibrary>,
    e: Option<&EndmemberMatrix>,
) -> CliResult<AlgoOutput> {
    let need_library = || d.ok_or_else(|| usage("this algorithm needs a library (D.csv)"));
    match cfg.algo {
        Algo::Misisun | Algo::Fasun => {
            let d = need_library()?;
            let res = if cfg.algo == Algo::Fasun {
                solve_fasun(y, d, &cfg.solver)?
            } else {
                solve_misisun(y, d, &cfg.solver)?
            };
            Ok(AlgoOutput {
                abundances: res.abundances.into_data(),
                mixing: Some(res.mixing.into_data()),
                endmembers: Some(res.endmembers.into_data()),
                objective_trace: res.objective_trace,
                iterations_run: res.iterations_run,
                wall_time_seconds: res.wall_time_seconds,
                abundance_sum_residual: res.abundance_sum_residual,
                mixing_sum_residual: Some(res.mixing_sum_residual),
            })
        }
        Algo::Fclsu => {
            let e = e.ok_or_else(|| {
                usage("fclsu needs endmembers: E_true.csv in the input or --endmembers PATH")
            })?;
            let start = Instant::now();
            let mut a = solve_fclsu(y, e, cfg.solver.mu_a, cfg.fclsu_iters)?.into_data();
            if cfg.solver.asc_renormalize {
                a = renormalized(a);
            }
            Ok(AlgoOutput {
                abundance_sum_residual: max_column_sum_residual(&a),
                abundances: a,
                mixing: None,
                endmembers: Some(e.data().clone()),
                objective_trace: Vec::new(),
                iterations_run: cfg.fclsu_iters,
                wall_time_seconds: start.elapsed().as_secs_f64(),
                mixing_sum_residual: None,
            })
        }
        Algo::Sunsal => {
            let d = need_library()?;
            let start = Instant::now();
            let x = solve_sunsal(y, d, &cfg.sunsal)?.into_data();
            Ok(AlgoOutput {
                abundance_sum_residual: max_column_sum_residual(&x),
                abundances: x,
                mixing: None,
                endmembers: None,
                objective_trace: Vec::new(),
                iterations_run: cfg.sunsal.iters,
                wall_time_seconds: start.elapsed().as_secs_f64(),
                mixing_sum_residual: None,
            })
        }
    }
}
