//! Text file formats: CSV matrices, `key = value` records and dataset bundles.
//!
//! Matrices are stored band-major (one matrix row per line), comma separated,
//! with 17 significant digits so every `f64` round-trips bit for bit. Lines
//! starting with `#` are comments.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, UnmixError};
use crate::metrics::MetricReport;
use crate::types::{
    AbundanceMatrix, EndmemberMatrix, HsiMatrix, MixingMatrix, SpectralLibrary, EPS_OUTPUT,
};

pub const Y_FILE: &str = "Y.csv";
pub const D_FILE: &str = "D.csv";
pub const A_TRUE_FILE: &str = "A_true.csv";
pub const E_TRUE_FILE: &str = "E_true.csv";
pub const B_TRUE_FILE: &str = "B_true.csv";
pub const META_FILE: &str = "meta.txt";

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> UnmixError {
    UnmixError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Write `contents` to `path` through a temporary file in the same directory
/// followed by a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| UnmixError::io(dir, e))?;
    tmp.write_all(contents)
        .and_then(|_| tmp.flush())
        .map_err(|e| UnmixError::io(path, e))?;
    tmp.persist(path).map_err(|e| UnmixError::io(path, e.error))?;
    Ok(())
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 24);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), format_matrix(m).as_bytes())
}

/// Parse CSV text; `path` is only used in error messages.
pub fn parse_matrix(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = values.len();
        for tok in line.split(',') {
            let tok = tok.trim();
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, idx + 1, format!("non-numeric token {tok:?}")))?;
            values.push(v);
        }
        let width = values.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(parse_err(
                    path,
                    idx + 1,
                    format!("ragged row: expected {c} values, found {width}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(path, 0, "empty file"))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            UnmixError::MissingFile(path.to_path_buf())
        } else {
            UnmixError::io(path, e)
        }
    })?;
    parse_matrix(&text, path)
}

/// Ordered `key = value` record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvRecord {
    entries: Vec<(String, String)>,
}

impl KvRecord {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or replace a key, keeping first-insertion order.
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut rec = KvRecord::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(path, idx + 1, "expected `key = value`"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(parse_err(path, idx + 1, "empty key"));
            }
            rec.set(k, v.trim());
        }
        Ok(rec)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                UnmixError::MissingFile(path.to_path_buf())
            } else {
                UnmixError::io(path, e)
            }
        })?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.render().as_bytes())
    }
}

/// Shortest round-trip decimal, with `inf` for infinities.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

fn fmt_list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn metric_report_record(report: &MetricReport) -> KvRecord {
    let mut rec = KvRecord::new();
    rec.set("sre_db", fmt_f64(report.sre_db));
    let sad: Vec<String> = report
        .sad_degrees_per_endmember
        .iter()
        .map(|&v| fmt_f64(v))
        .collect();
    rec.set("sad_degrees", sad.join(","));
    rec.set("rmse", fmt_f64(report.rmse));
    rec.set("permutation", fmt_list(&report.permutation));
    rec
}

/// Dataset descriptor stored as `meta.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleMeta {
    pub generator: String,
    pub version: String,
    pub p: usize,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub r: Option<usize>,
    pub snr_db: Option<f64>,
    pub seed: Option<u64>,
    pub height: Option<usize>,
    pub width: Option<usize>,
    /// Additional generator parameters, kept verbatim.
    pub extra: Vec<(String, String)>,
}

impl BundleMeta {
    const KNOWN: [&'static str; 10] = [
        "generator", "version", "p", "n", "m", "r", "snr_db", "seed", "height", "width",
    ];

    pub fn new(generator: impl Into<String>, p: usize) -> Self {
        Self {
            generator: generator.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            p,
            n: None,
            m: None,
            r: None,
            snr_db: None,
            seed: None,
            height: None,
            width: None,
            extra: Vec::new(),
        }
    }

    pub fn to_record(&self) -> KvRecord {
        let mut rec = KvRecord::new();
        rec.set("generator", &self.generator);
        rec.set("version", &self.version);
        rec.set("p", self.p);
        let opt = |rec: &mut KvRecord, k: &str, v: Option<String>| {
            if let Some(v) = v {
                rec.set(k, v);
            }
        };
        opt(&mut rec, "n", self.n.map(|v| v.to_string()));
        opt(&mut rec, "m", self.m.map(|v| v.to_string()));
        opt(&mut rec, "r", self.r.map(|v| v.to_string()));
        opt(&mut rec, "snr_db", self.snr_db.map(fmt_f64));
        opt(&mut rec, "seed", self.seed.map(|v| v.to_string()));
        opt(&mut rec, "height", self.height.map(|v| v.to_string()));
        opt(&mut rec, "width", self.width.map(|v| v.to_string()));
        for (k, v) in &self.extra {
            rec.set(k.clone(), v);
        }
        rec
    }

    pub fn from_record(rec: &KvRecord, path: &Path) -> Result<Self> {
        fn num<T: std::str::FromStr>(rec: &KvRecord, key: &str, path: &Path) -> Result<Option<T>> {
            rec.get(key)
                .map(|v| {
                    v.parse::<T>()
                        .map_err(|_| parse_err(path, 0, format!("invalid value for {key}: {v:?}")))
                })
                .transpose()
        }
        let p = num(rec, "p", path)?.ok_or_else(|| parse_err(path, 0, "missing key p"))?;
        Ok(Self {
            generator: rec.get("generator").unwrap_or("unknown").to_string(),
            version: rec.get("version").unwrap_or("unknown").to_string(),
            p,
            n: num(rec, "n", path)?,
            m: num(rec, "m", path)?,
            r: num(rec, "r", path)?,
            snr_db: num(rec, "snr_db", path)?,
            seed: num(rec, "seed", path)?,
            height: num(rec, "height", path)?,
            width: num(rec, "width", path)?,
            extra: rec
                .entries()
                .iter()
                .filter(|(k, _)| !Self::KNOWN.contains(&k.as_str()))
                .cloned()
                .collect(),
        })
    }
}

/// A dataset directory: observations, library, optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub y: Option<HsiMatrix>,
    pub d: Option<SpectralLibrary>,
    pub a_true: Option<AbundanceMatrix>,
    pub e_true: Option<EndmemberMatrix>,
    pub b_true: Option<MixingMatrix>,
    pub meta: BundleMeta,
}

fn check_eq(context: &'static str, meta: usize, actual: usize) -> Result<()> {
    if meta != actual {
        return Err(UnmixError::dims(context, meta, actual));
    }
    Ok(())
}

impl DatasetBundle {
    /// Cross-check the meta record against the matrices.
    pub fn validate(&self) -> Result<()> {
        let meta = &self.meta;
        if let Some(y) = &self.y {
            check_eq("meta p vs Y.csv rows", meta.p, y.band_count())?;
            match meta.n {
                Some(n) => check_eq("meta n vs Y.csv columns", n, y.pixel_count())?,
                None => return Err(UnmixError::Invalid("meta lacks n for Y.csv".into())),
            }
        } else if meta.n.is_some() {
            return Err(UnmixError::Required("Y.csv (meta declares n)"));
        }
        if let (Some(h), Some(w), Some(n)) = (meta.height, meta.width, meta.n) {
            check_eq("meta height*width vs n", n, h * w)?;
        }
        if let Some(d) = &self.d {
            check_eq("meta p vs D.csv rows", meta.p, d.band_count())?;
            match meta.m {
                Some(m) => check_eq("meta m vs D.csv columns", m, d.atom_count())?,
                None => return Err(UnmixError::Invalid("meta lacks m for D.csv".into())),
            }
        } else if meta.m.is_some() {
            return Err(UnmixError::Required("D.csv (meta declares m)"));
        }
        if let Some(a) = &self.a_true {
            if let Some(r) = meta.r {
                check_eq("meta r vs A_true.csv rows", r, a.data().nrows())?;
            }
            if let Some(n) = meta.n {
                check_eq("meta n vs A_true.csv columns", n, a.data().ncols())?;
            }
        }
        if let Some(e) = &self.e_true {
            check_eq("meta p vs E_true.csv rows", meta.p, e.band_count())?;
            if let Some(r) = meta.r {
                check_eq("meta r vs E_true.csv columns", r, e.endmember_count())?;
            }
        }
        if let Some(b) = &self.b_true {
            if let Some(m) = meta.m {
                check_eq("meta m vs B_true.csv rows", m, b.data().nrows())?;
            }
            if let Some(r) = meta.r {
                check_eq("meta r vs B_true.csv columns", r, b.data().ncols())?;
            }
        }
        Ok(())
    }

    pub fn require_y(&self) -> Result<&HsiMatrix> {
        self.y.as_ref().ok_or(UnmixError::Required("observed data Y.csv"))
    }

    pub fn require_library(&self) -> Result<&SpectralLibrary> {
        self.d.as_ref().ok_or(UnmixError::Required("library"))
    }
}

fn read_optional(dir: &Path, name: &str) -> Result<Option<DMatrix<f64>>> {
    let path = dir.join(name);
    if path.exists() {
        read_matrix(&path).map(Some)
    } else {
        Ok(None)
    }
}

fn require_file(dir: &Path, name: &str, declared: bool) -> Result<Option<DMatrix<f64>>> {
    let path = dir.join(name);
    match (path.exists(), declared) {
        (true, _) => read_matrix(&path).map(Some),
        (false, true) => Err(UnmixError::MissingFile(path)),
        (false, false) => Ok(None),
    }
}

pub fn read_bundle(dir: impl AsRef<Path>) -> Result<DatasetBundle> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    let meta = BundleMeta::from_record(&KvRecord::read(&meta_path)?, &meta_path)?;
    let y = require_file(dir, Y_FILE, meta.n.is_some())?;
    let d = require_file(dir, D_FILE, meta.m.is_some())?;
    let a_true = read_optional(dir, A_TRUE_FILE)?;
    let e_true = read_optional(dir, E_TRUE_FILE)?;
    let b_true = read_optional(dir, B_TRUE_FILE)?;

    let y = match y {
        Some(y) => Some(match (meta.height, meta.width) {
            (Some(h), Some(w)) if h * w == y.ncols() => HsiMatrix::with_shape(y, h, w)?,
            _ => HsiMatrix::new(y)?,
        }),
        None => None,
    };
    let bundle = DatasetBundle {
        y,
        d: d.map(SpectralLibrary::new).transpose()?,
        a_true: a_true.map(AbundanceMatrix::new).transpose()?,
        e_true: e_true.map(EndmemberMatrix::given).transpose()?,
        b_true: b_true
            .map(|b| MixingMatrix::with_tolerance(b, EPS_OUTPUT))
            .transpose()?,
        meta,
    };
    bundle.validate()?;
    Ok(bundle)
}

pub fn write_bundle(bundle: &DatasetBundle, dir: impl AsRef<Path>) -> Result<()> {
    bundle.validate()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| UnmixError::io(dir, e))?;
    let files: [(&str, Option<&DMatrix<f64>>); 5] = [
        (Y_FILE, bundle.y.as_ref().map(|y| y.data())),
        (D_FILE, bundle.d.as_ref().map(|d| d.data())),
        (A_TRUE_FILE, bundle.a_true.as_ref().map(|a| a.data())),
        (E_TRUE_FILE, bundle.e_true.as_ref().map(|e| e.data())),
        (B_TRUE_FILE, bundle.b_true.as_ref().map(|b| b.data())),
    ];
    for (name, m) in files {
        if let Some(m) = m {
            write_matrix(m, dir.join(name))?;
        }
    }
    bundle.meta.to_record().write(dir.join(META_FILE))
}
