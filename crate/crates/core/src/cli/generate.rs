use std::fs;

use super::manifest::{RunManifest, MANIFEST_FILE};
use super::{usage, CliResult, Dataset, GenerateArgs};
use crate::dataio::{fmt_f64, read_bundle, write_bundle, BundleMeta, DatasetBundle, KvRecord};
use crate::error::UnmixError;
use crate::simulate::{
    generate_library, generate_sim1, generate_sim2, Sim1Spec, Sim2Spec, SyntheticLibrary,
    SyntheticLibrarySpec,
};
use crate::types::{EndmemberMatrix, MixingMatrix, SpectralLibrary};

/// Library, endmembers and (when known) the mixing matrix.
pub(super) struct LibrarySource {
    pub library: SpectralLibrary,
    pub endmembers: EndmemberMatrix,
    pub mixing: Option<MixingMatrix>,
}

impl From<SyntheticLibrary> for LibrarySource {
    fn from(s: SyntheticLibrary) -> Self {
        Self {
            library: s.library,
            endmembers: s.endmembers,
            mixing: Some(s.mixing),
        }
    }
}

fn library_spec(args: &GenerateArgs, r: usize) -> SyntheticLibrarySpec {
    SyntheticLibrarySpec {
        bands: args.bands,
        atoms: args.atoms,
        endmembers: r,
        smoothness: args.smoothness,
        variability: args.variability,
        atoms_per_endmember: args.atoms_per_endmember,
        seed: args.seed,
    }
}

fn load_library(args: &GenerateArgs, r: usize) -> CliResult<LibrarySource> {
    match &args.library {
        None => Ok(generate_library(&library_spec(args, r))?.into()),
        Some(dir) => {
            let b = read_bundle(dir)?;
            let library = b.d.ok_or(UnmixError::Required("D.csv in the --library bundle"))?;
            let endmembers =
                b.e_true.ok_or(UnmixError::Required("E_true.csv in the --library bundle"))?;
            if endmembers.endmember_count() != r {
                return Err(usage(format!(
                    "--library provides {} endmembers, this dataset needs {r}",
                    endmembers.endmember_count()
                )));
            }
            Ok(LibrarySource {
                library,
                endmembers,
                mixing: b.b_true,
            })
        }
    }
}

fn resolved_config(args: &GenerateArgs) -> KvRecord {
    let mut rec = KvRecord::new();
    let kind = match args.kind {
        Dataset::Sim1 => "sim1",
        Dataset::Sim2 => "sim2",
        Dataset::Library => "library",
    };
    rec.set("kind", kind);
    rec.set("seed", args.seed);
    if args.kind != Dataset::Library {
        rec.set("snr_db", fmt_f64(args.snr));
    }
    if args.kind == Dataset::Sim2 {
        rec.set("rho", fmt_f64(args.rho));
        rec.set("dirichlet_alpha", 1);
    }
    match &args.library {
        Some(dir) => rec.set("library", dir.display()),
        None => {
            rec.set("bands", args.bands);
            rec.set("atoms", args.atoms);
            rec.set("r", args.r);
            rec.set("smoothness", fmt_f64(args.smoothness));
            rec.set("variability", args.variability);
            rec.set("atoms_per_endmember", args.atoms_per_endmember);
        }
    }
    rec
}

pub(super) fn build_bundle(args: &GenerateArgs) -> CliResult<DatasetBundle> {
    if args.snr.is_nan() || args.snr == f64::NEG_INFINITY {
        return Err(usage("--snr must be a number of dB or inf"));
    }
    let r = match args.kind {
        Dataset::Sim1 => {
            if args.r != Sim1Spec::ENDMEMBERS {
                return Err(usage(format!("sim1 uses {} endmembers", Sim1Spec::ENDMEMBERS)));
            }
            Sim1Spec::ENDMEMBERS
        }
        _ => args.r,
    };
    let src = load_library(args, r)?;
    let p = src.library.band_count();
    let mut meta = BundleMeta::new(
        match args.kind {
            Dataset::Sim1 => "sim1",
            Dataset::Sim2 => "sim2",
            Dataset::Library => "library",
        },
        p,
    );
    meta.m = Some(src.library.atom_count());
    meta.r = Some(r);
    meta.seed = Some(args.seed);
    let (y, a) = match args.kind {
        Dataset::Library => (None, None),
        Dataset::Sim1 => {
            let spec = Sim1Spec {
                snr_db: args.snr,
                seed: args.seed,
            };
            let (y, a) = generate_sim1(&spec, &src.endmembers)?;
            (Some(y), Some(a))
        }
        Dataset::Sim2 => {
            let spec = Sim2Spec::new(args.rho, args.snr, args.seed);
            meta.extra.push(("rho".into(), fmt_f64(args.rho)));
            meta.extra.push(("dirichlet_alpha".into(), fmt_f64(spec.dirichlet_alpha)));
            let (y, a) = generate_sim2(&spec, &src.endmembers)?;
            (Some(y), Some(a))
        }
    };
    if let Some(y) = &y {
        meta.n = Some(y.pixel_count());
        meta.snr_db = Some(args.snr);
        if let Some((h, w)) = y.shape() {
            meta.height = Some(h);
            meta.width = Some(w);
        }
    }
    Ok(DatasetBundle {
        y,
        d: Some(src.library),
        a_true: a,
        e_true: Some(src.endmembers),
        b_true: src.mixing,
        meta,
    })
}

pub(super) fn run(args: &GenerateArgs, command_line: &str) -> CliResult<()> {
    fs::create_dir_all(&args.out).map_err(|e| UnmixError::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let manifest_path = args.out.join(MANIFEST_FILE);
    let mut manifest = RunManifest::start(command_line, Some(args.seed), resolved_config(args));
    if let Some(dir) = &args.library {
        manifest.input("library", dir);
    }
    manifest.output("bundle", &args.out);
    manifest.write(&manifest_path)?;

    let outcome = build_bundle(args).and_then(|b| {
        write_bundle(&b, &args.out)?;
        Ok(b)
    });
    let bundle = manifest.conclude(&manifest_path, outcome)?;
    println!("out = {}", args.out.display());
    println!("p = {}", bundle.meta.p);
    if let Some(n) = bundle.meta.n {
        println!("n = {n}");
    }
    if let Some(m) = bundle.meta.m {
        println!("m = {m}");
    }
    if let Some(r) = bundle.meta.r {
        println!("r = {r}");
    }
    Ok(())
}
