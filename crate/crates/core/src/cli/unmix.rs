use std::fs;

use super::manifest::{RunManifest, MANIFEST_FILE};
use super::run::{resolve, run_algo, Algo};
use super::{usage, CliResult, UnmixArgs};
use crate::dataio::{fmt_f64, read_bundle, read_matrix, write_atomic, write_matrix, E_TRUE_FILE};
use crate::error::UnmixError;
use crate::types::EndmemberMatrix;

pub const A_EST_FILE: &str = "A_est.csv";
pub const B_EST_FILE: &str = "B_est.csv";
pub const E_EST_FILE: &str = "E_est.csv";
pub const TRACE_FILE: &str = "objective_trace.csv";

pub(super) fn run(args: &UnmixArgs, command_line: &str) -> CliResult<()> {
    let bundle = read_bundle(&args.input)?;
    let y = bundle.require_y()?;
    let endmembers = match (&args.endmembers, args.algo) {
        (Some(path), _) => Some(EndmemberMatrix::given(read_matrix(path)?)?),
        (None, Algo::Fclsu) => Some(bundle.e_true.clone().ok_or_else(|| {
            usage(format!(
                "fclsu needs endmembers: {} is missing from {}; pass --endmembers PATH",
                E_TRUE_FILE,
                args.input.display()
            ))
        })?),
        (None, _) => None,
    };
    let r = match args.algo {
        Algo::Misisun | Algo::Fasun => args
            .r
            .ok_or_else(|| usage(format!("--r is required for {}", args.algo.name())))?,
        Algo::Fclsu => endmembers.as_ref().map_or(0, |e| e.endmember_count()),
        Algo::Sunsal => args.r.unwrap_or(0),
    };
    if let (Some(r_flag), Algo::Fclsu, Some(e)) = (args.r, args.algo, &endmembers) {
        if r_flag != e.endmember_count() {
            return Err(usage(format!(
                "--r {r_flag} disagrees with the {} endmember columns",
                e.endmember_count()
            )));
        }
    }
    let cfg = resolve(&args.solver, args.algo, r)?;

    fs::create_dir_all(&args.out).map_err(|e| UnmixError::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let manifest_path = args.out.join(MANIFEST_FILE);
    let mut manifest = RunManifest::start(command_line, None, cfg.record());
    manifest.input("bundle", &args.input);
    if let Some(p) = &args.endmembers {
        manifest.input("endmembers", p);
    }
    manifest.write(&manifest_path)?;

    let outcome = run_algo(&cfg, y, bundle.d.as_ref(), endmembers.as_ref()).and_then(|out| {
        let a_path = args.out.join(A_EST_FILE);
        write_matrix(&out.abundances, &a_path)?;
        manifest.output("abundances", &a_path);
        if let Some(b) = &out.mixing {
            let path = args.out.join(B_EST_FILE);
            write_matrix(b, &path)?;
            manifest.output("mixing", &path);
        }
        if let Some(e) = &out.endmembers {
            let path = args.out.join(E_EST_FILE);
            write_matrix(e, &path)?;
            manifest.output("endmembers", &path);
        }
        if matches!(args.algo, Algo::Misisun | Algo::Fasun) {
            let path = args.out.join(TRACE_FILE);
            let text: String = out.objective_trace.iter().map(|v| format!("{v:.16e}\n")).collect();
            write_atomic(&path, text.as_bytes())?;
            manifest.output("objective_trace", &path);
        }
        Ok(out)
    });
    let out = manifest.conclude(&manifest_path, outcome)?;

    println!("algo = {}", args.algo.name());
    println!("abundance_shape = {}x{}", out.abundances.nrows(), out.abundances.ncols());
    println!("iterations_run = {}", out.iterations_run);
    println!("wall_time_seconds = {:.6}", out.wall_time_seconds);
    if let (Some(first), Some(last)) = (out.objective_trace.first(), out.objective_trace.last()) {
        println!("objective_first = {}", fmt_f64(*first));
        println!("objective_final = {}", fmt_f64(*last));
    }
    println!("abundance_sum_residual = {:e}", out.abundance_sum_residual);
    if let Some(res) = out.mixing_sum_residual {
        println!("mixing_sum_residual = {res:e}");
    }
    println!("out = {}", args.out.display());
    Ok(())
}
