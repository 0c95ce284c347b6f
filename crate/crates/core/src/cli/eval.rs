use std::path::Path;

use nalgebra::DMatrix;

use super::unmix::{A_EST_FILE, B_EST_FILE, E_EST_FILE};
use super::{usage, CliResult, EvalArgs};
use crate::dataio::{read_bundle, read_matrix, KvRecord};
use crate::error::UnmixError;
use crate::metrics::{
    align_endmembers, apply_permutation_columns, apply_permutation_rows, reconstruction_rmse_raw,
    sad_degrees, sre_db_raw,
};
use crate::types::EndmemberMatrix;

pub const METRICS_FILE: &str = "metrics.txt";

fn read_if_present(dir: &Path, name: &str) -> CliResult<Option<DMatrix<f64>>> {
    let path = dir.join(name);
    if path.exists() {
        Ok(Some(read_matrix(&path)?))
    } else {
        Ok(None)
    }
}

fn fmt_db(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

pub(super) fn run(args: &EvalArgs) -> CliResult<()> {
    let truth = read_bundle(&args.truth)?;
    let a_true = truth
        .a_true
        .as_ref()
        .ok_or(UnmixError::Required("A_true.csv in the truth bundle"))?
        .data();
    let a_est = read_matrix(args.est.join(A_EST_FILE))?;
    let e_est = read_if_present(&args.est, E_EST_FILE)?;
    let b_est = read_if_present(&args.est, B_EST_FILE)?;
    let e_true = truth.e_true.as_ref().map(|e| e.data());
    let b_true = truth.b_true.as_ref().map(|b| b.data());
    let mut rec = KvRecord::new();

    if a_est.shape() == a_true.shape() {
        let r = a_true.nrows();
        let perm: Vec<usize> = match (args.align, &e_est, e_true) {
            (false, _, _) => (0..r).collect(),
            (true, Some(e), Some(et)) => {
                align_endmembers(&EndmemberMatrix::given(et.clone())?, &EndmemberMatrix::given(e.clone())?)?
            }
            (true, _, _) => {
                return Err(usage(format!(
                    "--align needs {E_EST_FILE} in the estimate and E_true.csv in the truth"
                )))
            }
        };
        let a_aligned = apply_permutation_rows(&a_est, &perm);
        rec.set("sre_db", fmt_db(sre_db_raw(a_true, &a_aligned)?));
        if let (Some(e), Some(et)) = (&e_est, e_true) {
            if e.shape() != et.shape() {
                return Err(UnmixError::dims(
                    "estimated endmembers",
                    format!("{}x{}", et.nrows(), et.ncols()),
                    format!("{}x{}", e.nrows(), e.ncols()),
                )
                .into());
            }
            let e_aligned = apply_permutation_columns(e, &perm);
            let sad = (0..r)
                .map(|i| {
                    let a: Vec<f64> = et.column(i).iter().copied().collect();
                    let b: Vec<f64> = e_aligned.column(i).iter().copied().collect();
                    sad_degrees(&a, &b).map(|v| format!("{v:.6}"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rec.set("sad_degrees", sad.join(","));
            if let Some(y) = &truth.y {
                let rmse = reconstruction_rmse_raw(y.data(), &e_aligned, &a_aligned)?;
                rec.set("rmse", format!("{rmse:.6e}"));
            }
        }
        if let (Some(b), Some(bt)) = (&b_est, b_true) {
            if b.shape() == bt.shape() {
                let x_est = b * &a_est;
                rec.set("sre_library_db", fmt_db(sre_db_raw(&(bt * a_true), &x_est)?));
            }
        }
        rec.set(
            "permutation",
            perm.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","),
        );
    } else if let Some(bt) = b_true.filter(|bt| bt.nrows() == a_est.nrows() && a_est.ncols() == a_true.ncols()) {
        // Abundances over the whole library: compare at library level.
        rec.set("sre_db", fmt_db(sre_db_raw(&(bt * a_true), &a_est)?));
        rec.set("level", "library");
        if let (Some(y), Some(d)) = (&truth.y, &truth.d) {
            let rmse = reconstruction_rmse_raw(y.data(), d.data(), &a_est)?;
            rec.set("rmse", format!("{rmse:.6e}"));
        }
    } else {
        return Err(UnmixError::dims(
            "estimated abundances",
            format!("{}x{}", a_true.nrows(), a_true.ncols()),
            format!("{}x{}", a_est.nrows(), a_est.ncols()),
        )
        .into());
    }

    rec.write(args.est.join(METRICS_FILE))?;
    print!("{}", rec.render());
    Ok(())
}
