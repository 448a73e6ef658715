//! Numerical checks of constitutive conditions: rank-one ellipticity through
//! the acoustic tensor, polyconvexity probes for PANN models, and a suite of
//! objectivity, symmetry, normalization, growth and gradient checks.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::invariants::BasisId;
use crate::kinematics::{bundle, random_deformation, random_rotation, sym, ExtendedArgs, Tensor2, Tensor4, Vec3};
use crate::material::{fd_stress4, Hyperelastic};
use crate::network::Workspace;
use crate::pann::{PannModel, Variant};
use crate::symmetry::{symmetry_samples, GroupId, PreferredFrame};
use crate::{Error, Result};

/// Unit vectors `a` (spatial) and `b` (material) of a rank-one direction `a⊗b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeDirection {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl ProbeDirection {
    pub fn new(a: &Vec3, b: &Vec3) -> Result<Self> {
        let (na, nb) = (a.norm(), b.norm());
        if !(na > 0.0 && nb > 0.0) {
            return Err(Error::InvalidParams("probe direction must be non-zero".into()));
        }
        let (a, b) = (a / na, b / nb);
        Ok(Self { a: [a.x, a.y, a.z], b: [b.x, b.y, b.z] })
    }

    pub fn vectors(&self) -> (Vec3, Vec3) {
        (Vec3::from(self.a), Vec3::from(self.b))
    }
}

/// `n` nearly uniform unit vectors on the sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Minimum over `directions` of the smallest eigenvalue of the symmetrized
/// acoustic tensor, with the minimizing direction and eigenvector.
pub fn min_acoustic_eigenvalue(a: &Tensor4, directions: &[Vec3]) -> (f64, Option<ProbeDirection>) {
    let mut best = f64::INFINITY;
    let mut witness = None;
    for n in directions {
        let q = sym(&a.acoustic(n));
        let eig = SymmetricEigen::new(q);
        let (k, &lam) = eig.eigenvalues.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1)).expect("3 eigenvalues");
        if lam < best {
            best = lam;
            witness = ProbeDirection::new(&eig.eigenvectors.column(k).into(), n).ok();
        }
    }
    (best, witness)
}

#[derive(Clone, Debug, Serialize)]
pub struct EllipticityPoint {
    pub f: [f64; 9],
    pub min_eigenvalue: f64,
    /// `‖𝔸‖∞`; the point is flagged when `min_eigenvalue < −tol·scale`.
    pub scale: f64,
    pub elliptic: bool,
    pub witness: Option<ProbeDirection>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EllipticityReport {
    pub directions: usize,
    pub tolerance: f64,
    pub points: Vec<EllipticityPoint>,
    /// Indices of non-elliptic points.
    pub non_elliptic: Vec<usize>,
}

pub fn ellipticity_scan<M: Hyperelastic + Sync + ?Sized>(m: &M, fs: &[Tensor2], directions: usize, tol: f64) -> Result<EllipticityReport> {
    let dirs = fibonacci_sphere(directions);
    let points = fs
        .par_iter()
        .map(|f| {
            let a = m.tangent(f)?;
            let (min, witness) = min_acoustic_eigenvalue(&a, &dirs);
            let scale = a.norm_inf();
            Ok(EllipticityPoint {
                f: crate::kinematics::to_row_major(f),
                min_eigenvalue: min,
                scale,
                elliptic: min >= -tol * scale,
                witness,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let non_elliptic = points.iter().enumerate().filter(|(_, p)| !p.elliptic).map(|(i, _)| i).collect();
    Ok(EllipticityReport { directions, tolerance: tol, points, non_elliptic })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeCheck {
    pub name: String,
    pub probes: usize,
    pub violations: usize,
    /// Largest violation amount, scaled as in the check.
    pub worst: f64,
    pub witness: Option<String>,
}

impl ProbeCheck {
    fn new(name: &str) -> Self {
        Self { name: name.into(), probes: 0, violations: 0, worst: 0.0, witness: None }
    }

    fn record(&mut self, excess: f64, witness: impl FnOnce() -> String) {
        self.probes += 1;
        if excess > 0.0 {
            if self.violations == 0 {
                self.witness = Some(witness());
            }
            self.violations += 1;
            self.worst = self.worst.max(excess);
        }
    }

    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PolyconvexityReport {
    pub variant: Variant,
    pub group: GroupId,
    /// Set for variants without a polyconvexity guarantee; violations are expected.
    pub informational: bool,
    pub tolerance: f64,
    pub checks: Vec<ProbeCheck>,
    pub pass: bool,
}

impl PolyconvexityReport {
    pub fn first_violation(&self) -> Option<&ProbeCheck> {
        self.checks.iter().find(|c| !c.pass())
    }
}

/// Errors for variants that are not polyconvex by construction.
pub fn require_polyconvex(m: &PannModel) -> Result<()> {
    if m.variant().is_polyconvex() {
        Ok(())
    } else {
        Err(Error::VariantNotPolyconvex(m.variant().to_string()))
    }
}

/// Sampled polyconvexity checks of a PANN model: sign audit of the network
/// weights and of the normalization coefficients, non-negative input
/// partials, midpoint convexity of the network, and midpoint convexity of
/// every input slot in the extended arguments `(F, H, J)`.
pub fn polyconvexity_probe(m: &PannModel, samples: usize, tol: f64, seed: u64) -> PolyconvexityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense = m.dense();
    let mut checks = Vec::new();

    let mut audit = ProbeCheck::new("weight_signs");
    for (l, layer) in dense.layers.iter().enumerate() {
        for (i, &w) in layer.w.iter().enumerate() {
            audit.record(-w - tol, || format!("layer {} weight {i} = {w:e}", l + 1));
        }
    }
    for (i, &w) in dense.out.iter().enumerate() {
        audit.record(-w - tol, || format!("layer {} weight {i} = {w:e}", dense.layers.len() + 1));
    }
    checks.push(audit);

    let n = m.reference_input().len();
    let linear_j = j_slots(m);
    let mut norm = ProbeCheck::new("normalization_signs");
    for (k, &w) in m.normalization().weights.iter().enumerate() {
        if !linear_j.contains(&k) {
            norm.record(-w - tol, || format!("slot {k} weight = {w:e}"));
        }
    }
    for (k, &c) in m.normalization().extra_coefs.iter().enumerate() {
        norm.record(-c - tol, || format!("extra term {k} coefficient = {c:e}"));
    }
    checks.push(norm);

    let reachable = |rng: &mut ChaCha8Rng| -> (Tensor2, Vec<f64>) {
        let f = random_deformation(rng, 0.4, 0.4, 2.0);
        let pf = m.features(&f).expect("sampled F is admissible");
        let q = rng.random_range(0..m.frames().len());
        (f, pf.x[q * n..(q + 1) * n].to_vec())
    };

    let mut ws = Workspace::default();
    let mut g = vec![0.0; n];
    let mut partials = ProbeCheck::new("input_partials");
    for _ in 0..samples {
        let (_, x) = reachable(&mut rng);
        dense.gradient_ws(&x, &mut ws, &mut g);
        let (k, gmin) = g.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty input");
        partials.record(-gmin - tol, || format!("∂N/∂x{k} = {gmin:e} at x = {x:?}"));
    }
    checks.push(partials);

    let mut convex = ProbeCheck::new("network_midpoint_convexity");
    for _ in 0..samples {
        let (_, x1) = reachable(&mut rng);
        let (_, x2) = reachable(&mut rng);
        let xm: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 0.5 * (a + b)).collect();
        let (f1, f2, fm) = (dense.value(&x1).unwrap(), dense.value(&x2).unwrap(), dense.value(&xm).unwrap());
        let scale = f1.abs().max(f2.abs()).max(1.0);
        convex.record((fm - 0.5 * (f1 + f2)) / scale - tol, || format!("x1 = {x1:?}, x2 = {x2:?}"));
    }
    checks.push(convex);

    let informational = !m.variant().is_polyconvex();
    if let Some(basis) = m.input_basis().filter(|b| b.kind == crate::invariants::BasisKind::Polyconvex) {
        let mut slots = ProbeCheck::new("slot_extended_convexity");
        let perturbed = |rng: &mut ChaCha8Rng| {
            let kb = bundle(&random_deformation(rng, 0.4, 0.4, 2.0)).expect("admissible");
            let mut xa = ExtendedArgs::from_bundle(&kb);
            xa.h += Tensor2::from_fn(|_, _| rng.random_range(-0.3..0.3));
            xa.j += rng.random_range(-0.5..0.5);
            xa
        };
        for _ in 0..samples {
            let (a, b) = (perturbed(&mut rng), perturbed(&mut rng));
            let mid = a.lerp(&b, 0.5);
            let frame = m.frames()[rng.random_range(0..m.frames().len())];
            for k in 0..basis.len() {
                let v = |xa: &ExtendedArgs| crate::invariants::invariant_extended(basis, k, xa, &frame).expect("polyconvex slot");
                let (va, vb, vm) = (v(&a), v(&b), v(&mid));
                let scale = va.abs().max(vb.abs()).max(1.0);
                slots.record((vm - 0.5 * (va + vb)) / scale - tol, || format!("slot {k}: mid {vm:e} > mean {:e}", 0.5 * (va + vb)));
            }
        }
        checks.push(slots);
    }

    let pass = checks.iter().all(ProbeCheck::pass);
    PolyconvexityReport { variant: m.variant(), group: m.group(), informational, tolerance: tol, checks, pass }
}

/// Input slots holding `J` and `−J`, whose weights may take either sign.
fn j_slots(m: &PannModel) -> Vec<usize> {
    match m.input_basis() {
        Some(BasisId { group: GroupId::Tri, .. }) => vec![12, 13],
        Some(b) if b.kind == crate::invariants::BasisKind::Polyconvex => vec![2, 3],
        _ => (0..m.reference_input().len()).collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Random deformations per check.
    pub samples: usize,
    /// Random rotations for objectivity and for continuous symmetry groups.
    pub rotations: usize,
    pub invariance_tol: f64,
    pub normalization_tol: f64,
    pub gradient_tol: f64,
    /// Growth coefficient of the model; `None` only requires growth.
    pub growth_alpha: Option<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 100,
            rotations: 100,
            invariance_tol: 1e-10,
            normalization_tol: 1e-8,
            gradient_tol: 1e-6,
            growth_alpha: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub pass: bool,
    pub samples: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
    pub pass: bool,
}

impl ConditionReport {
    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tracker {
    name: &'static str,
    samples: usize,
    worst: f64,
    tolerance: f64,
    witness: Option<String>,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, samples: 0, worst: 0.0, tolerance, witness: None }
    }

    fn record(&mut self, err: f64, witness: impl FnOnce() -> String) {
        self.samples += 1;
        if !(err <= self.worst) {
            self.worst = err;
            if !(err <= self.tolerance) {
                self.witness = Some(witness());
            }
        }
    }

    fn finish(self) -> ConditionCheck {
        ConditionCheck {
            name: self.name.into(),
            pass: self.worst <= self.tolerance,
            samples: self.samples,
            worst: self.worst,
            tolerance: self.tolerance,
            witness: self.witness,
        }
    }
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.max(1.0)
}

/// Objectivity, material symmetry, stress normalization, growth and
/// stress-gradient consistency of `m`. `symmetry` overrides the group
/// elements tested.
pub fn condition_suite<M: Hyperelastic + ?Sized>(
    m: &M,
    group: GroupId,
    frame: &PreferredFrame,
    symmetry: Option<&[Tensor2]>,
    cfg: &SuiteConfig,
) -> Result<ConditionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fs: Vec<Tensor2> = (0..cfg.samples).map(|_| random_deformation(&mut rng, 0.3, 0.6, 1.5)).collect();
    let base: Vec<(f64, Tensor2)> = fs.iter().map(|f| Ok((m.potential(f)?, m.stress(f)?))).collect::<Result<_>>()?;
    let mut checks = Vec::new();

    let mut obj = Tracker::new("objectivity", cfg.invariance_tol);
    let per_f = cfg.rotations.div_ceil(cfg.samples.max(1)).max(1);
    for (f, (w, p)) in fs.iter().zip(&base) {
        for _ in 0..per_f {
            let r = random_rotation(&mut rng);
            let rf = r * f;
            let ew = rel((m.potential(&rf)? - w).abs(), w.abs());
            let ep = rel((m.stress(&rf)? - r * p).norm(), p.norm());
            obj.record(ew.max(ep), || format!("R = {:?}, F = {:?}", r.as_slice(), f.as_slice()));
        }
    }
    checks.push(obj.finish());

    let owned;
    let elements = match symmetry {
        Some(s) => s,
        None => {
            owned = symmetry_samples(group, frame, cfg.rotations, &mut rng);
            &owned[..]
        }
    };
    let mut symm = Tracker::new("material_symmetry", cfg.invariance_tol);
    for (f, (w, p)) in fs.iter().zip(&base) {
        for q in elements {
            let fq = f * q.transpose();
            let ew = rel((m.potential(&fq)? - w).abs(), w.abs());
            let ep = rel((m.stress(&fq)? * q - p).norm(), p.norm());
            symm.record(ew.max(ep), || format!("Q = {:?}", q.as_slice()));
        }
    }
    checks.push(symm.finish());

    let mut norm = Tracker::new("normalization", cfg.normalization_tol);
    let p0 = m.stress(&Tensor2::identity())?;
    norm.record(p0.abs().max(), || format!("P(I) = {:?}", p0.as_slice()));
    checks.push(norm.finish());

    // deep in compression the energy rise must be at least half the growth term
    let mut growth = Tracker::new("growth", 0.0);
    let w1 = m.potential(&Tensor2::identity())?;
    for j in [1e-3_f64, 1e-4] {
        let wj = m.potential(&(Tensor2::identity() * j.cbrt()))?;
        let need = cfg.growth_alpha.map_or(0.0, |a| 0.5 * a * (j + 1.0 / j - 2.0).powi(2));
        let deficit = if wj - w1 > need { 0.0 } else { need - (wj - w1) + f64::MIN_POSITIVE };
        growth.record(deficit, || format!("J = {j}: ψ(J) − ψ(1) = {:e}, required {need:e}", wj - w1));
    }
    checks.push(growth.finish());

    let mut grad = Tracker::new("stress_gradient", cfg.gradient_tol);
    for (f, (_, p)) in fs.iter().zip(&base) {
        let fd = fd_stress4(|x| m.potential(x), f, 1e-4 * (1.0 + f.norm()))?;
        let err = (p - fd).norm() / fd.norm().max(1e-3);
        grad.record(err, || format!("F = {:?}", f.as_slice()));
    }
    checks.push(grad.finish());

    let pass = checks.iter().all(|c| c.pass);
    Ok(ConditionReport { checks, pass })
}
