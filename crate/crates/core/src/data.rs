//! Synthetic ground-truth materials, deformation paths and dataset files.
//!
//! A dataset is a JSON Lines file with one `{"F": [..9], "P": [..9], "split": "cal"|"test"}`
//! record per line (row-major, stresses divided by `★`) and a sidecar
//! `<name>.header.json` describing its provenance.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{fibonacci_sphere, min_acoustic_eigenvalue};
use crate::kinematics::{bundle, from_row_major, to_row_major, Tensor2, Vec3};
use crate::material::Hyperelastic;
use crate::symmetry::PreferredFrame;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaterialKind {
    NeoHooke { e: f64, nu: f64 },
    /// `μ/2(tr C − 3) + κ/2(Σ cᵢ² − 3) − (μ + 2κ) ln J + λ/2(J − 1)²` with `cᵢ = nᵢ·C·nᵢ`.
    CubicReference { mu: f64, kappa: f64, lambda: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceMaterial {
    pub kind: MaterialKind,
    #[serde(default)]
    pub frame: PreferredFrame,
}

impl ReferenceMaterial {
    pub fn cubic_default() -> Self {
        Self { kind: MaterialKind::CubicReference { mu: 1.0, kappa: 0.5, lambda: 1.0 }, frame: PreferredFrame::standard() }
    }

    pub fn neo_hooke(e: f64, nu: f64) -> Self {
        Self { kind: MaterialKind::NeoHooke { e, nu }, frame: PreferredFrame::standard() }
    }

    /// `cubicref` or `neohooke` with default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "cubicref" | "cubic_reference" => Ok(Self::cubic_default()),
            "neohooke" | "neo_hooke" => Ok(Self::neo_hooke(1.0, 0.4)),
            _ => Err(Error::InvalidParams(format!("unknown material '{name}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            MaterialKind::NeoHooke { e, nu } => e > 0.0 && nu > 0.0 && nu < 0.5,
            MaterialKind::CubicReference { mu, kappa, lambda } => mu > 0.0 && kappa > 0.0 && lambda > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid material parameters {:?}", self.kind)))
        }
    }

    fn lame(e: f64, nu: f64) -> (f64, f64) {
        (e / (2.0 * (1.0 + nu)), e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)))
    }
}

impl Hyperelastic for ReferenceMaterial {
    fn potential(&self, f: &Tensor2) -> Result<f64> {
        let kb = bundle(f)?;
        let lnj = kb.j.ln();
        Ok(match self.kind {
            MaterialKind::NeoHooke { e, nu } => {
                let (mu, lambda) = Self::lame(e, nu);
                0.5 * mu * (kb.c.trace() - 3.0) - mu * lnj + 0.25 * lambda * (kb.j * kb.j - 1.0 - 2.0 * lnj)
            }
            MaterialKind::CubicReference { mu, kappa, lambda } => {
                let i1cub: f64 = self.frame.axes().iter().map(|n| n.dot(&(kb.c * n)).powi(2)).sum();
                0.5 * mu * (kb.c.trace() - 3.0) + 0.5 * kappa * (i1cub - 3.0) - (mu + 2.0 * kappa) * lnj
                    + 0.5 * lambda * (kb.j - 1.0).powi(2)
            }
        })
    }

    fn stress(&self, f: &Tensor2) -> Result<Tensor2> {
        let kb = bundle(f)?;
        let fit = kb.h / kb.j;
        Ok(match self.kind {
            MaterialKind::NeoHooke { e, nu } => {
                let (mu, lambda) = Self::lame(e, nu);
                (f - fit) * mu + fit * (0.5 * lambda * (kb.j * kb.j - 1.0))
            }
            MaterialKind::CubicReference { mu, kappa, lambda } => {
                let aniso = self.frame.axes().iter().fold(Tensor2::zeros(), |acc, n| acc + n * n.transpose() * n.dot(&(kb.c * n)));
                f * mu + f * aniso * (2.0 * kappa) - fit * (mu + 2.0 * kappa) + kb.h * (lambda * (kb.j - 1.0))
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "cal")]
    Calibration,
    #[serde(rename = "test")]
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Calibration => "cal",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathKind {
    /// `diag(λ, 1, 1)`.
    Uniaxial { lo: f64, hi: f64 },
    /// `I + γ e1⊗e2`.
    SimpleShear { lo: f64, hi: f64 },
    /// `[[λ, γ, 0], [0, 1, 0], [0, 0, 1]]` with `λ` and `γ` ramped together.
    MixedShearTension { lambda_lo: f64, lambda_hi: f64, gamma_lo: f64, gamma_hi: f64 },
    /// `I + A` with `Aᵢⱼ` uniform in `[−amplitude, amplitude]`, rejected unless `det F ∈ [j_lo, j_hi]`.
    RandomF { amplitude: f64, j_lo: f64, j_hi: f64 },
}

impl PathKind {
    pub fn name(&self) -> &'static str {
        match self {
            PathKind::Uniaxial { .. } => "uniaxial",
            PathKind::SimpleShear { .. } => "shear",
            PathKind::MixedShearTension { .. } => "mixed",
            PathKind::RandomF { .. } => "random",
        }
    }

    pub fn uniaxial() -> Self {
        PathKind::Uniaxial { lo: 0.7, hi: 1.3 }
    }

    pub fn shear() -> Self {
        PathKind::SimpleShear { lo: -0.3, hi: 0.3 }
    }

    pub fn mixed() -> Self {
        PathKind::MixedShearTension { lambda_lo: 0.8, lambda_hi: 1.2, gamma_lo: -0.3, gamma_hi: 0.3 }
    }

    pub fn random() -> Self {
        PathKind::RandomF { amplitude: 0.25, j_lo: 0.5, j_hi: 1.6 }
    }

    /// Uniaxial and shear paths calibrate, the others test.
    pub fn default_split(&self) -> Split {
        match self {
            PathKind::Uniaxial { .. } | PathKind::SimpleShear { .. } => Split::Calibration,
            _ => Split::Test,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub path: PathKind,
    pub count: usize,
    /// Defaults to [`PathKind::default_split`].
    #[serde(default)]
    pub split: Option<Split>,
}

impl PathSpec {
    pub fn new(path: PathKind, count: usize) -> Self {
        Self { path, count, split: None }
    }

    pub fn with_split(path: PathKind, count: usize, split: Split) -> Self {
        Self { path, count, split: Some(split) }
    }

    pub fn split(&self) -> Split {
        self.split.unwrap_or_else(|| self.path.default_split())
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.path {
            PathKind::Uniaxial { lo, hi } => lo > 0.0 && hi > 0.0,
            PathKind::SimpleShear { lo, hi } => lo.is_finite() && hi.is_finite(),
            PathKind::MixedShearTension { lambda_lo, lambda_hi, gamma_lo, gamma_hi } => {
                lambda_lo > 0.0 && lambda_hi > 0.0 && gamma_lo.is_finite() && gamma_hi.is_finite()
            }
            PathKind::RandomF { amplitude, j_lo, j_hi } => {
                amplitude > 0.0 && j_lo > 0.0 && j_hi > j_lo && j_lo <= 1.0 && j_hi >= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid path {:?}", self.path)))
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn sample_paths(spec: &PathSpec, seed: u64) -> Result<Vec<Tensor2>> {
    spec.validate()?;
    let n = spec.count;
    Ok(match spec.path {
        PathKind::Uniaxial { lo, hi } => linspace(lo, hi, n).into_iter().map(|l| Tensor2::from_diagonal(&Vec3::new(l, 1.0, 1.0))).collect(),
        PathKind::SimpleShear { lo, hi } => linspace(lo, hi, n)
            .into_iter()
            .map(|g| {
                let mut f = Tensor2::identity();
                f[(0, 1)] = g;
                f
            })
            .collect(),
        PathKind::MixedShearTension { lambda_lo, lambda_hi, gamma_lo, gamma_hi } => linspace(lambda_lo, lambda_hi, n)
            .into_iter()
            .zip(linspace(gamma_lo, gamma_hi, n))
            .map(|(l, g)| {
                let mut f = Tensor2::identity();
                f[(0, 0)] = l;
                f[(0, 1)] = g;
                f
            })
            .collect(),
        PathKind::RandomF { amplitude, j_lo, j_hi } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let f = Tensor2::identity() + Tensor2::from_fn(|_, _| rng.random_range(-amplitude..=amplitude));
                let j = f.determinant();
                if j >= j_lo && j <= j_hi {
                    out.push(f);
                }
            }
            out
        }
    })
}

/// Named path collections.
pub fn preset(name: &str) -> Result<Vec<PathSpec>> {
    use Split::*;
    Ok(match name {
        // uniaxial + shear calibrate, mixed + random test
        "default" => vec![
            PathSpec::new(PathKind::uniaxial(), 175),
            PathSpec::new(PathKind::shear(), 101),
            PathSpec::new(PathKind::mixed(), 172),
            PathSpec::new(PathKind::random(), 500),
        ],
        // 500 calibration and 500 test points
        "desk" => vec![
            PathSpec::new(PathKind::uniaxial(), 100),
            PathSpec::new(PathKind::shear(), 100),
            PathSpec::with_split(PathKind::random(), 300, Calibration),
            PathSpec::with_split(PathKind::mixed(), 100, Test),
            PathSpec::with_split(PathKind::random(), 400, Test),
        ],
        _ => return Err(Error::InvalidParams(format!("unknown path preset '{name}' (expected default or desk)"))),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record {
    pub f: Tensor2,
    pub p: Tensor2,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSummary {
    pub name: String,
    pub split: Split,
    /// Records kept, in file order.
    pub count: usize,
    /// Records dropped by the ellipticity filter.
    pub filtered: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub cal: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    /// Stress scale `★`; stored stresses are `P/★`.
    pub star: f64,
    pub unit: String,
    pub material: Option<ReferenceMaterial>,
    pub seed: u64,
    pub counts: SplitCounts,
    #[serde(default)]
    pub paths: Vec<PathSummary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn from_records(records: Vec<Record>) -> Self {
        let counts = count(&records);
        Self {
            header: DatasetHeader { star: 1.0, unit: "1".into(), material: None, seed: 0, counts, paths: Vec::new() },
            records,
        }
    }

    pub fn split(&self, s: Split) -> Vec<Record> {
        self.records.iter().filter(|r| r.split == s).copied().collect()
    }

    pub fn calibration(&self) -> Vec<Record> {
        self.split(Split::Calibration)
    }

    pub fn test(&self) -> Vec<Record> {
        self.split(Split::Test)
    }

    /// Records grouped by the path segments of the header, in file order.
    pub fn segments(&self) -> Vec<(&PathSummary, &[Record])> {
        let mut out = Vec::new();
        let mut k = 0;
        for p in &self.header.paths {
            let end = (k + p.count).min(self.records.len());
            out.push((p, &self.records[k..end]));
            k = end;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.header.counts.cal == 0 {
            return Err(Error::EmptyDataset);
        }
        if !(self.header.star > 0.0) {
            return Err(Error::InvalidParams(format!("non-positive stress scale {}", self.header.star)));
        }
        for (i, r) in self.records.iter().enumerate() {
            check_record(r).map_err(|reason| Error::MalformedRecord { line: i + 1, reason })?;
        }
        Ok(())
    }
}

fn count(records: &[Record]) -> SplitCounts {
    let cal = records.iter().filter(|r| r.split == Split::Calibration).count();
    SplitCounts { cal, test: records.len() - cal }
}

fn check_record(r: &Record) -> std::result::Result<(), String> {
    if !r.f.iter().chain(r.p.iter()).all(|x| x.is_finite()) {
        return Err("non-finite entry".into());
    }
    let j = r.f.determinant();
    if !(j > 0.0) {
        return Err(format!("det F = {j} is not positive"));
    }
    Ok(())
}

/// Whether the acoustic tensor of `m` at `f` is positive semi-definite over
/// `directions` Fibonacci directions, at tolerance `tol·‖𝔸‖∞`.
pub fn is_elliptic<M: Hyperelastic + ?Sized>(m: &M, f: &Tensor2, directions: &[Vec3], tol: f64) -> Result<bool> {
    let a = m.tangent(f)?;
    let (min, _) = min_acoustic_eigenvalue(&a, directions);
    Ok(min >= -tol * a.norm_inf())
}

/// Evaluates `mat` along every path; with `filter` set, non-elliptic points
/// are dropped. Random paths use the seed `seed + index`.
pub fn generate_dataset(mat: &ReferenceMaterial, specs: &[PathSpec], filter: bool, seed: u64) -> Result<Dataset> {
    mat.validate()?;
    let dirs = fibonacci_sphere(512);
    let mut records = Vec::new();
    let mut paths = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let fs = sample_paths(spec, seed.wrapping_add(i as u64))?;
        let mut kept = 0;
        for f in &fs {
            if filter && !is_elliptic(mat, f, &dirs, 1e-5)? {
                continue;
            }
            records.push(Record { f: *f, p: mat.stress(f)?, split: spec.split() });
            kept += 1;
        }
        paths.push(PathSummary { name: spec.path.name().into(), split: spec.split(), count: kept, filtered: fs.len() - kept });
    }
    let counts = count(&records);
    Ok(Dataset {
        header: DatasetHeader { star: 1.0, unit: "1".into(), material: Some(*mat), seed, counts, paths },
        records,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    #[serde(rename = "F")]
    f: [f64; 9],
    #[serde(rename = "P")]
    p: [f64; 9],
    split: Split,
}

/// Sidecar header path of a record file, `x.jsonl → x.header.json`.
pub fn header_path(records: &Path) -> PathBuf {
    let stem = records.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    records.with_file_name(format!("{stem}.header.json"))
}

/// `dir/dataset.jsonl` for a directory, the path itself otherwise.
pub fn records_path(path: &Path) -> PathBuf {
    if path.is_dir() || path.extension().is_none() {
        path.join("dataset.jsonl")
    } else {
        path.to_path_buf()
    }
}

pub fn write_records<W: Write>(records: &[Record], mut w: W) -> Result<()> {
    for r in records {
        let line = RecordLine { f: to_row_major(&r.f), p: to_row_major(&r.p), split: r.split };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedRecord { line: i + 1, reason };
        let rl: RecordLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let rec = Record { f: from_row_major(&rl.f), p: from_row_major(&rl.p), split: rl.split };
        check_record(&rec).map_err(malformed)?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes the records and header; `path` is a directory or a `.jsonl` file.
/// Returns the record file path.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<PathBuf> {
    let rp = records_path(path);
    if let Some(parent) = rp.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(&rp)?);
    write_records(&ds.records, &mut w)?;
    w.flush()?;
    fs::write(header_path(&rp), serde_json::to_string_pretty(&ds.header)? + "\n")?;
    Ok(rp)
}

/// Loads records and header. A missing header yields a default one with `★ = 1`.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let rp = records_path(path);
    let records = read_records(BufReader::new(fs::File::open(&rp)?))?;
    let hp = header_path(&rp);
    let ds = if hp.exists() {
        let mut header: DatasetHeader = serde_json::from_str(&fs::read_to_string(hp)?)?;
        let counts = count(&records);
        if header.counts != counts {
            return Err(Error::InvalidParams(format!("header counts {:?} disagree with records {:?}", header.counts, counts)));
        }
        header.counts = counts;
        Dataset { header, records }
    } else {
        Dataset::from_records(records)
    };
    ds.validate()?;
    Ok(ds)
}
