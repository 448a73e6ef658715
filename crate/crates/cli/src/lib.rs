//! Command-line driver: basis and group verification, synthetic data,
//! calibration, evaluation and diagnostics of PANN models.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use polyaniso::calibrate::{self, Selection, TrainConfig};
use polyaniso::data::{self, Dataset, PathSpec, ReferenceMaterial, Split};
use polyaniso::diagnostics::{self, SuiteConfig};
use polyaniso::invariants::{parametric_symmetrized_invariant, symmetrized_average, SymmetrizedInvariantParams};
use polyaniso::kinematics::{bundle, random_deformation, random_rotation, to_row_major};
use polyaniso::pann::ModelOptions;
use polyaniso::relations;
use polyaniso::symmetry::{group_elements, verify_group_axioms};
use polyaniso::{GroupId, PannModel, PreferredFrame, Tensor2, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "POLYANISO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "polyaniso", version, about = "Polyconvex anisotropic PANN toolkit")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, or a `.json` model path for `calibrate`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Strict JSON configuration of the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the relations between general and polyconvex bases.
    VerifyBases {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Check group axioms and the symmetrized invariant closed forms.
    VerifyGroups {
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Sample deformation paths of a reference material.
    GenData(GenDataArgs),
    /// Calibrate a PANN model on a dataset.
    Calibrate(CalibrateArgs),
    /// Stress tables and log10 MSE of calibrated models.
    Evaluate(EvaluateArgs),
    /// Ellipticity, polyconvexity and constitutive condition reports.
    Diagnose(DiagnoseArgs),
    /// Parameter counts per variant.
    Info {
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long, default_value = "cub")]
        group: GroupId,
    },
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub material: Option<String>,
    /// `default` or `desk`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Drop non-elliptic points of the reference material.
    #[arg(long)]
    pub filter: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub variant: Variant,
    #[arg(long, default_value = "cub")]
    pub group: GroupId,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub select_on_calibration: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset whose test split is scanned; sampled test paths otherwise.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub directions: usize,
    #[arg(long, default_value_t = 1000)]
    pub probes: usize,
}

/// `gen-data --config` schema.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenDataConfig {
    pub material: Option<ReferenceMaterial>,
    pub preset: Option<String>,
    pub paths: Option<Vec<PathSpec>>,
    pub filter: bool,
}

/// `calibrate --config` schema.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateConfig {
    pub training: TrainConfig,
    pub model: ModelOptions,
    pub frame: Option<PreferredFrame>,
}

/// `diagnose --config` schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseConfig {
    pub ellipticity_tol: f64,
    pub probe_tol: f64,
    pub suite_samples: usize,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self { ellipticity_tol: 1e-5, probe_tol: 1e-9, suite_samples: 100 }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failed(String),
}

impl From<polyaniso::Error> for CliError {
    fn from(e: polyaniso::Error) -> Self {
        use polyaniso::Error::*;
        match e {
            InvalidParams(_) | UnsupportedGroup(_) | VariantNotPolyconvex(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `argv` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|s| s.parse::<usize>().ok()).filter(|&n| n > 0) {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILED;
        }
    };
    match pool.install(|| dispatch(&cfg)) {
        Ok(pass) => {
            if pass {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILED
        }
    }
}

fn dispatch(cfg: &RunConfig) -> CliResult<bool> {
    match &cfg.command {
        Command::VerifyBases { samples } => verify_bases(cfg, *samples),
        Command::VerifyGroups { samples } => verify_groups(cfg, *samples),
        Command::GenData(a) => gen_data(cfg, a),
        Command::Calibrate(a) => calibrate_cmd(cfg, a),
        Command::Evaluate(a) => evaluate(cfg, a),
        Command::Diagnose(a) => diagnose(cfg, a),
        Command::Info { variant, group } => info(*variant, *group),
    }
}

/// Reads a strict JSON config; on failure the error names the expected schema.
fn load_config<C: DeserializeOwned + Serialize + Default>(path: Option<&Path>) -> CliResult<C> {
    let Some(path) = path else { return Ok(C::default()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        let schema = serde_json::to_string_pretty(&C::default()).unwrap_or_default();
        CliError::Usage(format!("{}: {e}\nexpected schema (defaults shown):\n{schema}", path.display()))
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn out_file(cfg: &RunConfig, name: &str) -> Option<PathBuf> {
    cfg.out.as_ref().map(|d| d.join(name))
}

const BASIS_GROUPS: [GroupId; 6] = [GroupId::Iso, GroupId::Ti, GroupId::Mon, GroupId::Rho, GroupId::Tet, GroupId::Cub];

#[derive(Serialize)]
struct BasesReport {
    groups: Vec<relations::RelationReport>,
    i6_renderings: relations::RenderingReport,
    pass: bool,
}

fn verify_bases(cfg: &RunConfig, samples: usize) -> CliResult<bool> {
    let mut groups = Vec::new();
    for (i, g) in BASIS_GROUPS.into_iter().enumerate() {
        let reports = relations::verify_roundtrip(g, samples, cfg.seed.wrapping_add(i as u64))?;
        for r in &reports {
            let worst = r.slots.iter().map(|s| s.max_rel_error).fold(0.0, f64::max);
            println!("{:<4} {:<16} {} (max rel error {worst:.2e})", g.name(), format!("{:?}", r.direction), verdict(r.pass));
        }
        groups.extend(reports);
    }
    let i6 = relations::compare_i6_renderings(samples, cfg.seed)?;
    println!(
        "cub  I6 renderings: printed disagreement {:.2e}, corrected {:.2e}",
        i6.printed_disagreement, i6.corrected_disagreement
    );
    let pass = groups.iter().all(|r| r.pass);
    let report = BasesReport { groups, i6_renderings: i6, pass };
    if let Some(p) = out_file(cfg, "verify-bases.json") {
        write_json(&p, &report)?;
    }
    Ok(pass)
}

#[derive(Serialize)]
struct SymmetrizationCheck {
    group: GroupId,
    samples: usize,
    max_rel_error: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct GroupsReport {
    axioms: Vec<polyaniso::symmetry::GroupAxiomReport>,
    symmetrization: Vec<SymmetrizationCheck>,
    pass: bool,
}

/// Group average of the single-axis term against the closed form over all
/// axes, for random deformations, frames and exponents.
pub fn symmetrization_check(g: GroupId, samples: usize, seed: u64) -> polyaniso::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        use rand::Rng;
        let frame = PreferredFrame::from_rotation(&random_rotation(&mut rng))?;
        let kb = bundle(&random_deformation(&mut rng, 0.4, 0.5, 2.0))?;
        let p = SymmetrizedInvariantParams {
            a1: rng.random_range(0.0..2.0),
            a2: rng.random_range(0.0..2.0),
            b1: rng.random_range(1.0..3.0),
            b2: rng.random_range(1.0..3.0),
            c: rng.random_range(1.0..2.0),
        };
        let avg = symmetrized_average(g, &kb.c, &kb.g, &frame, &p)?;
        let closed = parametric_symmetrized_invariant(g, &kb, &frame, &p)?;
        worst = worst.max(relations::relative_error(avg, closed));
    }
    Ok(worst)
}

fn verify_groups(cfg: &RunConfig, samples: usize) -> CliResult<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let frame = PreferredFrame::from_rotation(&random_rotation(&mut rng))?;
    let mut axioms = Vec::new();
    for g in GroupId::ALL {
        let Ok(rs) = group_elements(g, &frame) else { continue };
        let r = verify_group_axioms(&rs);
        println!("{:<4} order {:>2} axioms {}", g.name(), r.order, verdict(r.pass));
        axioms.push(r);
    }
    let mut symmetrization = Vec::new();
    for (i, g) in [GroupId::Tet, GroupId::Cub].into_iter().enumerate() {
        let err = symmetrization_check(g, samples, cfg.seed.wrapping_add(1 + i as u64))?;
        let tol = 1e-10;
        println!("{:<4} symmetrized invariant {} (max rel error {err:.2e})", g.name(), verdict(err <= tol));
        symmetrization.push(SymmetrizationCheck { group: g, samples, max_rel_error: err, tolerance: tol, pass: err <= tol });
    }
    let pass = axioms.iter().all(|r| r.pass) && symmetrization.iter().all(|c| c.pass);
    if let Some(p) = out_file(cfg, "verify-groups.json") {
        write_json(&p, &GroupsReport { axioms, symmetrization, pass })?;
    }
    Ok(pass)
}

fn gen_data(cfg: &RunConfig, a: &GenDataArgs) -> CliResult<bool> {
    let file: GenDataConfig = load_config(cfg.config.as_deref())?;
    let material = match (&a.material, file.material) {
        (Some(name), _) => ReferenceMaterial::from_name(name)?,
        (None, Some(m)) => m,
        (None, None) => ReferenceMaterial::cubic_default(),
    };
    let paths = match (&a.preset, file.paths, &file.preset) {
        (Some(name), _, _) => data::preset(name)?,
        (None, Some(p), _) => p,
        (None, None, Some(name)) => data::preset(name)?,
        (None, None, None) => data::preset("default")?,
    };
    let ds = data::generate_dataset(&material, &paths, a.filter || file.filter, cfg.seed)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("dataset.jsonl"));
    let path = data::save_dataset(&ds, &out)?;
    println!(
        "wrote {} ({} calibration, {} test records)",
        path.display(),
        ds.header.counts.cal,
        ds.header.counts.test
    );
    Ok(true)
}

/// Output locations of `calibrate`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CalibrationOutputs {
    pub model: PathBuf,
    pub report: PathBuf,
    pub loss_csv: PathBuf,
}

/// `x.json` names the model with `x.report.json` and `x.loss.csv` beside it;
/// any other path is a directory holding `model.json`, `report.json` and `loss.csv`.
pub fn calibration_outputs(out: &Path) -> CalibrationOutputs {
    if out.extension().is_some_and(|e| e == "json") {
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        CalibrationOutputs {
            model: out.to_path_buf(),
            report: out.with_file_name(format!("{stem}.report.json")),
            loss_csv: out.with_file_name(format!("{stem}.loss.csv")),
        }
    } else {
        CalibrationOutputs { model: out.join("model.json"), report: out.join("report.json"), loss_csv: out.join("loss.csv") }
    }
}

/// Per-step minibatch loss of every restart; aborted restarts leave blanks.
pub fn loss_csv(report: &calibrate::LossReport) -> String {
    let mut s = String::from("step");
    for r in &report.restarts {
        let _ = write!(s, ",restart_{}", r.index);
    }
    s.push('\n');
    let len = report.restarts.iter().map(|r| r.history.len()).max().unwrap_or(0);
    for step in 0..len {
        let _ = write!(s, "{step}");
        for r in &report.restarts {
            match r.history.get(step) {
                Some(v) => {
                    let _ = write!(s, ",{v:e}");
                }
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct CalibrationSummary<'a> {
    variant: Variant,
    group: GroupId,
    parameters: usize,
    seed: u64,
    config: &'a TrainConfig,
    report: &'a calibrate::LossReport,
}

fn calibrate_cmd(cfg: &RunConfig, a: &CalibrateArgs) -> CliResult<bool> {
    let mut file: CalibrateConfig = load_config(cfg.config.as_deref())?;
    let train = &mut file.training;
    train.seed = cfg.seed;
    if let Some(s) = a.steps {
        train.steps = s;
    }
    if let Some(r) = a.restarts {
        train.restarts = r;
    }
    if a.select_on_calibration {
        train.select_on = Selection::Calibration;
    }
    let ds = data::load_dataset(&a.data)?;
    let frame = file.frame.unwrap_or_default();
    let m0 = PannModel::build(a.variant, a.group, &frame, &file.model, cfg.seed)?;
    let t0 = Instant::now();
    let (model, report) = calibrate::train(&m0, &ds, &file.training)?;
    let outs = calibration_outputs(cfg.out.as_deref().unwrap_or(Path::new("calibration")));
    write_text(&outs.model, &(model.to_json()? + "\n"))?;
    let summary = CalibrationSummary {
        variant: a.variant,
        group: a.group,
        parameters: model.parameter_count(),
        seed: cfg.seed,
        config: &file.training,
        report: &report,
    };
    write_json(&outs.report, &summary)?;
    write_text(&outs.loss_csv, &loss_csv(&report))?;
    println!(
        "{} ({} parameters): restart {} selected, log10 MSE calibration {:.3}, test {}",
        a.variant,
        model.parameter_count(),
        report.selected,
        report.log10_calibration_mse,
        report.log10_test_mse.map_or("n/a".into(), |v| format!("{v:.3}"))
    );
    if cfg.verbose {
        eprintln!("calibration took {:.1?}", t0.elapsed());
    }
    Ok(true)
}

fn load_model(path: &Path) -> CliResult<PannModel> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    Ok(PannModel::from_json(&text)?)
}

#[derive(Serialize)]
struct EvaluationRow {
    model: String,
    variant: Variant,
    log10_mse_calibration: Option<f64>,
    log10_mse_test: Option<f64>,
}

fn stress_table(m: &PannModel, ds: &Dataset) -> CliResult<(String, [Option<f64>; 2])> {
    use polyaniso::Hyperelastic;
    let mut s = String::from("index,split");
    for prefix in ["F", "P_ref", "P_model"] {
        for i in 1..=3 {
            for j in 1..=3 {
                let _ = write!(s, ",{prefix}{i}{j}");
            }
        }
    }
    s.push('\n');
    let mut sums = [(0.0, 0usize); 2];
    for (k, r) in ds.records.iter().enumerate() {
        let pm = m.stress(&r.f)?;
        let slot = usize::from(r.split == Split::Test);
        sums[slot].0 += (pm - r.p).norm_squared() / 9.0;
        sums[slot].1 += 1;
        let split = if r.split == Split::Test { "test" } else { "cal" };
        let _ = write!(s, "{k},{split}");
        for t in [&r.f, &r.p, &pm] {
            for v in to_row_major(t) {
                let _ = write!(s, ",{v:e}");
            }
        }
        s.push('\n');
    }
    let mse = sums.map(|(t, n)| (n > 0).then(|| t / n as f64));
    Ok((s, mse))
}

fn evaluate(cfg: &RunConfig, a: &EvaluateArgs) -> CliResult<bool> {
    let ds = data::load_dataset(&a.data)?;
    let mut rows = Vec::new();
    println!("{:<24} {:>8} {:>14} {:>14}", "model", "variant", "log10MSE cal", "log10MSE test");
    for (i, path) in a.model.iter().enumerate() {
        let m = load_model(path)?;
        let (table, mse) = stress_table(&m, &ds)?;
        if let Some(p) = out_file(cfg, &format!("stress_{i}_{}.csv", m.variant().name())) {
            write_text(&p, &table)?;
        }
        let row = EvaluationRow {
            model: path.display().to_string(),
            variant: m.variant(),
            log10_mse_calibration: mse[0].map(f64::log10),
            log10_mse_test: mse[1].map(f64::log10),
        };
        let fmt = |v: Option<f64>| v.map_or("n/a".into(), |x| format!("{x:.2}"));
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        println!("{name:<24} {:>8} {:>14} {:>14}", m.variant(), fmt(row.log10_mse_calibration), fmt(row.log10_mse_test));
        rows.push(row);
    }
    if let Some(p) = out_file(cfg, "evaluation.json") {
        write_json(&p, &rows)?;
    }
    Ok(true)
}

#[derive(Serialize)]
struct EllipticitySummary {
    points: usize,
    directions: usize,
    tolerance: f64,
    non_elliptic: Vec<usize>,
    min_scaled_eigenvalue: f64,
}

#[derive(Serialize)]
struct DiagnoseReport {
    variant: Variant,
    group: GroupId,
    polyconvexity: diagnostics::PolyconvexityReport,
    conditions: diagnostics::ConditionReport,
    ellipticity: EllipticitySummary,
    pass: bool,
}

fn diagnose(cfg: &RunConfig, a: &DiagnoseArgs) -> CliResult<bool> {
    let dc: DiagnoseConfig = load_config(cfg.config.as_deref())?;
    let m = load_model(&a.model)?;
    let fs: Vec<Tensor2> = match &a.data {
        Some(p) => data::load_dataset(p)?.test().iter().map(|r| r.f).collect(),
        None => {
            let specs: Vec<PathSpec> = data::preset("default")?.into_iter().filter(|s| s.split() == Split::Test).collect();
            let mut fs = Vec::new();
            for (i, s) in specs.iter().enumerate() {
                fs.extend(data::sample_paths(s, cfg.seed.wrapping_add(i as u64))?);
            }
            fs
        }
    };
    let poly = diagnostics::polyconvexity_probe(&m, a.probes, dc.probe_tol, cfg.seed);
    let suite = SuiteConfig {
        seed: cfg.seed,
        samples: dc.suite_samples,
        rotations: dc.suite_samples,
        growth_alpha: Some(m.alpha()),
        ..Default::default()
    };
    let conditions = diagnostics::condition_suite(&m, m.group(), m.frame(), None, &suite)?;
    let scan = diagnostics::ellipticity_scan(&m, &fs, a.directions, dc.ellipticity_tol)?;

    let mut csv = String::from("index,min_eigenvalue,scale,elliptic\n");
    for (i, p) in scan.points.iter().enumerate() {
        let _ = writeln!(csv, "{i},{:e},{:e},{}", p.min_eigenvalue, p.scale, p.elliptic);
    }
    let min_scaled = scan.points.iter().map(|p| p.min_eigenvalue / p.scale.max(f64::MIN_POSITIVE)).fold(f64::INFINITY, f64::min);
    let ellipticity = EllipticitySummary {
        points: scan.points.len(),
        directions: scan.directions,
        tolerance: scan.tolerance,
        non_elliptic: scan.non_elliptic.clone(),
        min_scaled_eigenvalue: min_scaled,
    };
    let certified = m.variant().is_polyconvex();
    let pass = conditions.pass && (!certified || (poly.pass && ellipticity.non_elliptic.is_empty()));

    println!("{} on {}:", m.variant(), m.group());
    for c in &conditions.checks {
        println!("  {:<20} {} (worst {:.2e}, tol {:.0e})", c.name, verdict(c.pass), c.worst, c.tolerance);
    }
    let tag = if certified { "" } else { " (informational)" };
    for c in &poly.checks {
        println!("  {:<34} {}{tag} ({} of {} probes violate)", c.name, verdict(c.pass()), c.violations, c.probes);
    }
    println!(
        "  ellipticity: {} of {} points non-elliptic{tag}, min scaled eigenvalue {min_scaled:.3e}",
        ellipticity.non_elliptic.len(),
        ellipticity.points
    );
    if let Some(p) = out_file(cfg, "ellipticity.csv") {
        write_text(&p, &csv)?;
    }
    let report = DiagnoseReport { variant: m.variant(), group: m.group(), polyconvexity: poly, conditions, ellipticity, pass };
    if let Some(p) = out_file(cfg, "diagnose.json") {
        write_json(&p, &report)?;
    }
    Ok(pass)
}

fn info(variant: Option<Variant>, group: GroupId) -> CliResult<bool> {
    let variants: Vec<Variant> = variant.map_or_else(|| Variant::ALL.to_vec(), |v| vec![v]);
    for v in variants {
        let m = PannModel::build(v, group, &PreferredFrame::standard(), &ModelOptions::default(), 0)?;
        let hidden = &m.params().spec.hidden;
        println!("{v} {group}: {} parameters (inputs {}, hidden {hidden:?})", m.parameter_count(), v.input_width(group));
    }
    Ok(true)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_convention() {
        let o = calibration_outputs(Path::new("runs/c.json"));
        assert_eq!(o.report, Path::new("runs/c.report.json"));
        assert_eq!(o.loss_csv, Path::new("runs/c.loss.csv"));
        let d = calibration_outputs(Path::new("runs/c"));
        assert_eq!(d.model, Path::new("runs/c/model.json"));
    }

    #[test]
    fn configs_are_strict() {
        assert!(serde_json::from_str::<CalibrateConfig>(r#"{"training": {"steps": 3}, "extra": 1}"#).is_err());
        let c: CalibrateConfig = serde_json::from_str(r#"{"training": {"steps": 3}}"#).unwrap();
        assert_eq!(c.training.steps, 3);
        assert!(serde_json::from_str::<GenDataConfig>(r#"{"presets": "desk"}"#).is_err());
        assert!(serde_json::from_str::<DiagnoseConfig>(r#"{"tol": 1}"#).is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["polyaniso", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["polyaniso"]), EXIT_USAGE);
        assert_eq!(run(["polyaniso", "info", "--variant", "X"]), EXIT_USAGE);
        assert_eq!(run(["polyaniso", "--help"]), EXIT_OK);
    }
}
