use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::manifest::RunManifest;
use super::run::{resolve, run_algo, Algo, Resolved};
use super::{usage, BenchArgs, CliResult, Suite};
use crate::dataio::{fmt_f64, write_atomic, KvRecord};
use crate::metrics::{align_endmembers, apply_permutation_rows, reconstruction_rmse_raw, sre_db_raw};
use crate::simulate::{generate_library, generate_sim1, generate_sim2, Sim1Spec, Sim2Spec, SyntheticLibrarySpec};
use crate::types::EndmemberMatrix;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed of one (algo, condition, repeat) cell.
pub fn cell_seed(base: u64, algo: &str, condition: f64, repeat: usize) -> u64 {
    base.wrapping_add(fnv1a(format!("{algo}|{}|{repeat}", fmt_f64(condition)).as_bytes()))
}

/// Seed of the data of one (condition, repeat) pair, shared by all
/// algorithms so they are compared on identical scenes.
pub fn data_seed(base: u64, condition: f64, repeat: usize) -> u64 {
    cell_seed(base, "data", condition, repeat)
}

#[derive(Debug, Clone)]
struct Cell {
    algo: Algo,
    condition: f64,
    repeat: usize,
}

#[derive(Debug, Clone)]
struct CellResult {
    cell: Cell,
    data_seed: u64,
    cell_seed: u64,
    sre_db: f64,
    sre_abundance_db: Option<f64>,
    rmse: f64,
    wall_seconds: f64,
    iterations: usize,
}

fn thread_count() -> CliResult<Option<usize>> {
    match std::env::var("UNMIX_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(usage(format!("UNMIX_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

fn run_cell(args: &BenchArgs, cfg: &Resolved, cell: &Cell) -> CliResult<CellResult> {
    let dseed = data_seed(args.seed, cell.condition, cell.repeat);
    let lib = generate_library(&SyntheticLibrarySpec {
        bands: args.bands,
        atoms: args.atoms,
        endmembers: args.r,
        seed: dseed,
        ..SyntheticLibrarySpec::default()
    })?;
    let (y, a_true) = match args.suite {
        Suite::Sim1 => generate_sim1(
            &Sim1Spec {
                snr_db: cell.condition,
                seed: dseed,
            },
            &lib.endmembers,
        )?,
        Suite::Sim2 => generate_sim2(&Sim2Spec::new(cell.condition, args.snr, dseed), &lib.endmembers)?,
    };
    let out = run_algo(cfg, &y, Some(&lib.library), Some(&lib.endmembers))?;
    let b_true = lib.mixing.data();
    let x_true = b_true * a_true.data();
    let x_est = out
        .library_abundances(Some(b_true))
        .expect("library abundances are defined when B_true is known");
    let sre_db = sre_db_raw(&x_true, &x_est)?;
    let sre_abundance_db = match (cell.algo, &out.endmembers) {
        (Algo::Sunsal, _) | (_, None) => None,
        (Algo::Fclsu, Some(_)) => Some(sre_db_raw(a_true.data(), &out.abundances)?),
        (_, Some(e)) => {
            let perm = align_endmembers(&lib.endmembers, &EndmemberMatrix::given(e.clone())?)?;
            let a = apply_permutation_rows(&out.abundances, &perm);
            Some(sre_db_raw(a_true.data(), &a)?)
        }
    };
    let design = out.design(Some(&lib.library)).expect("library is present");
    let rmse = reconstruction_rmse_raw(y.data(), design, &out.abundances)?;
    Ok(CellResult {
        cell: cell.clone(),
        data_seed: dseed,
        cell_seed: cell_seed(args.seed, cell.algo.name(), cell.condition, cell.repeat),
        sre_db,
        sre_abundance_db,
        rmse,
        wall_seconds: out.wall_time_seconds,
        iterations: out.iterations_run,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_aggregate.{}", ext.to_string_lossy()),
        None => format!("{stem}_aggregate"),
    };
    out.with_file_name(name)
}

fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_manifest.txt"))
}

pub(super) fn run(args: &BenchArgs, command_line: &str) -> CliResult<()> {
    let algos = args.algos.iter().map(|s| Algo::parse(s)).collect::<CliResult<Vec<_>>>()?;
    let (cond_name, conditions) = match args.suite {
        Suite::Sim1 => {
            if !args.rho_list.is_empty() {
                return Err(usage("--rho-list applies to the sim2 suite"));
            }
            if args.r != Sim1Spec::ENDMEMBERS {
                return Err(usage(format!("sim1 uses {} endmembers", Sim1Spec::ENDMEMBERS)));
            }
            ("snr_db", &args.snr_list)
        }
        Suite::Sim2 => {
            if !args.snr_list.is_empty() {
                return Err(usage("--snr-list applies to the sim1 suite; use --snr for sim2"));
            }
            ("rho", &args.rho_list)
        }
    };
    if conditions.is_empty() {
        return Err(usage(format!("no conditions given (--{}-list)", if cond_name == "rho" { "rho" } else { "snr" })));
    }
    if args.repeats < 1 {
        return Err(usage("--repeats must be at least 1"));
    }
    let configs = algos
        .iter()
        .map(|&a| resolve(&args.solver, a, args.r))
        .collect::<CliResult<Vec<_>>>()?;
    let threads = thread_count()?;

    let mut config = KvRecord::new();
    config.set("suite", if args.suite == Suite::Sim1 { "sim1" } else { "sim2" });
    config.set("algos", algos.iter().map(|a| a.name()).collect::<Vec<_>>().join(","));
    config.set(cond_name, conditions.iter().map(|&c| fmt_f64(c)).collect::<Vec<_>>().join(","));
    if args.suite == Suite::Sim2 {
        config.set("snr_db", fmt_f64(args.snr));
    }
    config.set("repeats", args.repeats);
    config.set("bands", args.bands);
    config.set("atoms", args.atoms);
    config.set("r", args.r);
    config.set("threads", threads.map_or("default".to_string(), |t| t.to_string()));
    for cfg in &configs {
        for (k, v) in cfg.record().entries() {
            if k != "algo" {
                config.set(format!("{}.{k}", cfg.algo.name()), v);
            }
        }
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| crate::error::UnmixError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    let mpath = manifest_path(&args.out);
    let mut manifest = RunManifest::start(command_line, Some(args.seed), config);
    manifest.output("results", &args.out);
    manifest.output("aggregate", &aggregate_path(&args.out));
    manifest.write(&mpath)?;

    let mut cells = Vec::new();
    for (ai, &algo) in algos.iter().enumerate() {
        for &condition in conditions {
            for repeat in 0..args.repeats {
                cells.push((ai, Cell { algo, condition, repeat }));
            }
        }
    }
    let work = || -> Vec<CliResult<CellResult>> {
        cells
            .par_iter()
            .map(|(ai, cell)| run_cell(args, &configs[*ai], cell))
            .collect()
    };
    let outcome = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| usage(format!("cannot start {n} worker threads: {e}")))
            .map(|pool| pool.install(work)),
        None => Ok(work()),
    }
    .and_then(|results| results.into_iter().collect::<CliResult<Vec<_>>>())
    .and_then(|results| {
        write_tables(args, cond_name, &algos, conditions, &results)?;
        Ok(results)
    });
    let results = manifest.conclude(&mpath, outcome)?;

    println!("cells = {}", results.len());
    println!("results = {}", args.out.display());
    println!("aggregate = {}", aggregate_path(&args.out).display());
    Ok(())
}

fn write_tables(
    args: &BenchArgs,
    cond_name: &str,
    algos: &[Algo],
    conditions: &[f64],
    results: &[CellResult],
) -> CliResult<()> {
    let mut rows = format!(
        "algo,{cond_name},repeat,data_seed,cell_seed,sre_db,sre_abundance_db,rmse,wall_seconds,iterations\n"
    );
    for r in results {
        let _ = writeln!(
            rows,
            "{},{},{},{},{},{},{},{},{:.6},{}",
            r.cell.algo.name(),
            fmt_f64(r.cell.condition),
            r.cell.repeat,
            r.data_seed,
            r.cell_seed,
            fmt_f64(r.sre_db),
            r.sre_abundance_db.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.rmse),
            r.wall_seconds,
            r.iterations
        );
    }
    write_atomic(&args.out, rows.as_bytes())?;

    let mut agg = format!(
        "algo,{cond_name},repeats,sre_db_mean,sre_db_std,rmse_mean,rmse_std,wall_seconds_mean\n"
    );
    for &algo in algos {
        for &c in conditions {
            let group: Vec<&CellResult> = results
                .iter()
                .filter(|r| r.cell.algo == algo && r.cell.condition == c)
                .collect();
            let sre: Vec<f64> = group.iter().map(|r| r.sre_db).collect();
            let rmse: Vec<f64> = group.iter().map(|r| r.rmse).collect();
            let wall: Vec<f64> = group.iter().map(|r| r.wall_seconds).collect();
            let (sm, ss) = mean_std(&sre);
            let (rm, rs) = mean_std(&rmse);
            let (wm, _) = mean_std(&wall);
            let _ = writeln!(
                agg,
                "{},{},{},{},{},{},{},{:.6}",
                algo.name(),
                fmt_f64(c),
                group.len(),
                fmt_f64(sm),
                fmt_f64(ss),
                fmt_f64(rm),
                fmt_f64(rs),
                wm
            );
        }
    }
    write_atomic(&aggregate_path(&args.out), agg.as_bytes())?;
    Ok(())
}
