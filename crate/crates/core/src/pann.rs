//! Physics-augmented neural network potentials.
//!
//! | variant | network | inputs | normalization |
//! |---|---|---|---|
//! | `I` | convex and monotone | polyconvex invariants | ti/cub closed forms, projection otherwise |
//! | `Istar` | unconstrained | `tr C`, `tr G`, `det C` and anisotropic general invariants | linear subtraction |
//! | `C` | convex and monotone | `ĉ` under every group rotation, averaged | projection onto `u⊗u` |
//! | `Cstar` | convex | components of `C` in the frame under every group rotation, averaged | linear subtraction |
//!
//! All variants add the growth term `α(J + 1/J − 2)²`.
//!
//! Every normalization term is linear in the network input gradient `g₀` at
//! the identity, up to the kinks of `ReLU`. It is stored together with its
//! Jacobian with respect to `g₀` so that calibration can differentiate
//! through it.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::invariants::{general_slots, istar_slots, polyconvex_slots, BasisId, SlotDerivative, SlotEvaluation};
use crate::kinematics::{bundle, ddot, KinematicBundle, Tensor2, Tensor4, Vec3};
use crate::material::{fd_tangent, Hyperelastic};
use crate::network::{ArchitectureSpec, ConstraintMode, Dense, NetworkParams, Positivity, Workspace};
use crate::symmetry::{group_elements, symmetry_samples, GroupId, PreferredFrame};
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    I,
    Istar,
    C,
    Cstar,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::I, Variant::Istar, Variant::C, Variant::Cstar];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::I => "I",
            Variant::Istar => "Istar",
            Variant::C => "C",
            Variant::Cstar => "Cstar",
        }
    }

    pub fn mode(&self) -> ConstraintMode {
        match self {
            Variant::I | Variant::C => ConstraintMode::ConvexMonotone,
            Variant::Istar => ConstraintMode::Unconstrained,
            Variant::Cstar => ConstraintMode::Convex,
        }
    }

    pub fn default_hidden(&self) -> &'static [usize] {
        match self {
            Variant::I | Variant::Istar => &[16, 16],
            Variant::C | Variant::Cstar => &[8, 8, 8],
        }
    }

    pub fn is_polyconvex(&self) -> bool {
        matches!(self, Variant::I | Variant::C)
    }

    pub fn is_symmetrized(&self) -> bool {
        matches!(self, Variant::C | Variant::Cstar)
    }

    pub fn input_width(&self, g: GroupId) -> usize {
        match self {
            Variant::I => BasisId::polyconvex(g).len(),
            Variant::Istar => BasisId::istar(g).len(),
            Variant::C => BasisId::polyconvex(GroupId::Tri).len(),
            Variant::Cstar => BasisId::general(GroupId::Tri).len(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" => Ok(Variant::I),
            "istar" | "i*" => Ok(Variant::Istar),
            "c" => Ok(Variant::C),
            "cstar" | "c*" => Ok(Variant::Cstar),
            _ => Err(Error::InvalidParams(format!("unknown variant '{s}'"))),
        }
    }
}

/// Overrides of the per-variant defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelOptions {
    pub hidden: Option<Vec<usize>>,
    pub alpha: Option<f64>,
    pub positivity: Option<Positivity>,
}

fn check_j(j: f64) -> Result<()> {
    if j > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveJacobian(j))
    }
}

/// `α(J + 1/J − 2)²`.
pub fn growth(j: f64, alpha: f64) -> Result<f64> {
    check_j(j)?;
    Ok(alpha * (j + 1.0 / j - 2.0).powi(2))
}

pub fn growth_dj(j: f64, alpha: f64) -> Result<f64> {
    check_j(j)?;
    Ok(2.0 * alpha * (j + 1.0 / j - 2.0) * (1.0 - 1.0 / (j * j)))
}

/// Normalization constants, for reporting.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalizationConstants {
    Ti { o: f64, p: f64, q: f64 },
    Cub { r: f64, s: f64, t: f64 },
    /// Coefficients of `C:A`, `G:A` and `J` over the `u⊗u` directions.
    ChatProjection { p: Vec<f64>, q: Vec<f64>, r: f64 },
    /// Same construction over the structural tensors of the group.
    StructuralProjection { p: Vec<f64>, q: Vec<f64>, r: f64 },
    /// `−g₀`, subtracted linearly from the network inputs.
    Linear { gradient: Vec<f64> },
}

/// Normalization term: slot weights `w` added to the network gradient and
/// extra terms `cⱼ φⱼ`, each with its Jacobian with respect to `g₀`.
#[derive(Clone, Debug)]
pub struct Normalization {
    pub constants: NormalizationConstants,
    pub weights: Vec<f64>,
    pub weight_jacobian: Vec<Vec<f64>>,
    pub extra_coefs: Vec<f64>,
    pub extra_jacobian: Vec<Vec<f64>>,
}

/// Coordinates of `−Σₖ g₀ₖ Tₖ(I)` in a basis of symmetric tensors, as a
/// linear map of `g₀`.
#[derive(Clone, Debug)]
struct Projection {
    /// Rows: basis elements (identity first when `with_identity`).
    coords: Vec<Vec<f64>>,
    traces: Vec<f64>,
    with_identity: bool,
}

impl Projection {
    fn new(basis: &[Tensor2], with_identity: bool, generators: &[Tensor2]) -> Self {
        let mut all = Vec::with_capacity(basis.len() + 1);
        if with_identity {
            all.push(Tensor2::identity());
        }
        all.extend_from_slice(basis);
        let b = DMatrix::from_fn(9, all.len(), |r, c| all[c][(r / 3, r % 3)]);
        let t = DMatrix::from_fn(9, generators.len(), |r, c| generators[c][(r / 3, r % 3)]);
        let bt = b.transpose();
        let normal = (&bt * &b).try_inverse().expect("projection basis is linearly independent");
        let d = -(normal * bt * t);
        let coords = (0..d.nrows()).map(|i| d.row(i).iter().copied().collect()).collect();
        Self { coords, traces: basis.iter().map(|a| a.trace()).collect(), with_identity }
    }

    /// `(p, q, r)` with Jacobians.
    #[allow(clippy::type_complexity)]
    fn solve(&self, g0: &[f64]) -> (Vec<(f64, Vec<f64>)>, Vec<(f64, Vec<f64>)>, (f64, Vec<f64>)) {
        let n = g0.len();
        let offset = usize::from(self.with_identity);
        let mut r = if self.with_identity { (dot(&self.coords[0], g0), self.coords[0].clone()) } else { (0.0, vec![0.0; n]) };
        let mut p = Vec::with_capacity(self.traces.len());
        let mut q = Vec::with_capacity(self.traces.len());
        for (k, tr) in self.traces.iter().enumerate() {
            let row = &self.coords[k + offset];
            let d = dot(row, g0);
            let pk = relu(d, row, 1.0, 0.5);
            let qk = relu(d, row, -1.0, 0.5);
            r.0 -= 2.0 * tr * qk.0;
            axpy(&mut r.1, -2.0 * tr, &qk.1);
            p.push(pk);
            q.push(qk);
        }
        (p, q, r)
    }
}

/// `scale·ReLU(sign·d)` and its gradient given `∇d = row`.
fn relu(d: f64, row: &[f64], sign: f64, scale: f64) -> (f64, Vec<f64>) {
    if sign * d > 0.0 {
        (scale * sign * d, row.iter().map(|v| scale * sign * v).collect())
    } else {
        (0.0, vec![0.0; row.len()])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Sparse linear functional `Σ cᵢ eᵢ`.
fn lin(n: usize, terms: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &(i, c) in terms {
        v[i] += c;
    }
    v
}

#[derive(Clone, Debug)]
enum Plan {
    Ti,
    Cub,
    Linear,
    Chat(Projection),
    Structural(Projection),
}

/// Slot index of `J` in the polyconvex bases.
const J_SLOT: usize = 2;

/// Features of one deformation for all evaluation frames, independent of
/// the network parameters.
#[derive(Clone, Debug)]
pub struct PointFeatures {
    pub j: f64,
    pub h: Tensor2,
    /// Network inputs, `frames × width`: invariants minus their values at `F = I`.
    pub x: Vec<f64>,
    /// `∂xₖ/∂F`, same layout as `x`.
    pub t: Vec<Tensor2>,
    pub extra_values: Vec<f64>,
    pub extra_t: Vec<Tensor2>,
}

/// Scratch buffers for repeated stress evaluations.
#[derive(Clone, Debug, Default)]
pub struct Scratch {
    ws: Workspace,
    g: Vec<f64>,
    v: Vec<f64>,
    wbar: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PannModel {
    variant: Variant,
    group: GroupId,
    frame: PreferredFrame,
    alpha: f64,
    params: NetworkParams,
    rotations: Vec<Tensor2>,
    frames: Vec<PreferredFrame>,
    extras: Vec<SlotDerivative>,
    plan: Plan,
    x_ref: Vec<f64>,
    /// Zero vector, the network input at `F = I`.
    origin: Vec<f64>,
    dense: Dense,
    norm: Normalization,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    variant: Variant,
    group: GroupId,
    frame: PreferredFrame,
    alpha: f64,
    params: NetworkParams,
    seed: u64,
}

/// Default rotation set of a symmetrized variant.
fn default_rotations(variant: Variant, g: GroupId, frame: &PreferredFrame) -> Result<Vec<Tensor2>> {
    if !variant.is_symmetrized() {
        return Ok(vec![Tensor2::identity()]);
    }
    match g {
        GroupId::Tet | GroupId::Cub => Ok(group_elements(g, frame)?.elements),
        // finite tables; the rng is not consumed for these groups
        GroupId::Mon | GroupId::Rho | GroupId::Tri => {
            Ok(symmetry_samples(g, frame, 0, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0)))
        }
        GroupId::Iso | GroupId::Ti => Err(Error::UnsupportedGroup(g)),
    }
}

fn outer(a: &Vec3) -> Tensor2 {
    a * a.transpose()
}

impl PannModel {
    pub fn build(variant: Variant, group: GroupId, frame: &PreferredFrame, opts: &ModelOptions, seed: u64) -> Result<Self> {
        let hidden = opts.hidden.clone().unwrap_or_else(|| variant.default_hidden().to_vec());
        let spec = ArchitectureSpec {
            input_width: variant.input_width(group),
            hidden,
            mode: variant.mode(),
            positivity: opts.positivity.unwrap_or_default(),
        };
        let params = NetworkParams::init(&spec, seed)?;
        let alpha = opts.alpha.unwrap_or(DEFAULT_ALPHA);
        Self::assemble(variant, group, *frame, alpha, params, None)
    }

    fn assemble(
        variant: Variant,
        group: GroupId,
        frame: PreferredFrame,
        alpha: f64,
        params: NetworkParams,
        rotations: Option<Vec<Tensor2>>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("growth coefficient must be positive, got {alpha}")));
        }
        params.spec.validate()?;
        let width = variant.input_width(group);
        if params.spec.input_width != width || params.spec.mode != variant.mode() {
            return Err(Error::InvalidParams(format!(
                "network {:?} with input width {} does not fit variant {variant} on {group} (needs {:?}, width {width})",
                params.spec.mode,
                params.spec.input_width,
                variant.mode()
            )));
        }
        let n = params.parameter_count();
        if params.to_flat().len() != n || params.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("network parameters are malformed".into()));
        }
        let rotations = match rotations {
            Some(r) => r,
            None => default_rotations(variant, group, &frame)?,
        };
        let frames = rotations.iter().map(|q| frame.rotated(q)).collect::<Result<Vec<_>>>()?;

        let id = Tensor2::identity();
        let base = slots_for(variant, group, &frame, &id, &id, 1.0);
        let generators = base.generators(&id, &id);
        let mut extras = Vec::new();
        let plan = match variant {
            Variant::Istar | Variant::Cstar => Plan::Linear,
            Variant::C => Plan::Chat(chat_projection(&frame, &generators)),
            Variant::I => match group {
                GroupId::Ti => Plan::Ti,
                GroupId::Cub => Plan::Cub,
                GroupId::Tri => Plan::Chat(chat_projection(&frame, &generators)),
                _ => {
                    let basis = projection_basis(group, &frame);
                    let z = Tensor2::zeros();
                    extras.extend(basis.iter().map(|a| SlotDerivative { dc: *a, dg: z, dj: 0.0 }));
                    extras.extend(basis.iter().map(|a| SlotDerivative { dc: z, dg: *a, dj: 0.0 }));
                    Plan::Structural(Projection::new(&basis, true, &generators))
                }
            },
        };
        let dense = params.dense();
        let mut model = Self {
            variant,
            group,
            frame,
            alpha,
            params,
            rotations,
            frames,
            extras,
            plan,
            origin: vec![0.0; base.values.len()],
            x_ref: base.values,
            dense,
            norm: Normalization {
                constants: NormalizationConstants::Linear { gradient: Vec::new() },
                weights: Vec::new(),
                weight_jacobian: Vec::new(),
                extra_coefs: Vec::new(),
                extra_jacobian: Vec::new(),
            },
        };
        model.norm = model.compute_normalization();
        Ok(model)
    }

    /// Same model evaluated over a custom rotation set (symmetrized variants).
    pub fn with_rotations(&self, rotations: Vec<Tensor2>) -> Result<Self> {
        if !self.variant.is_symmetrized() {
            return Err(Error::InvalidParams(format!("variant {} is not symmetrized", self.variant)));
        }
        if rotations.is_empty() {
            return Err(Error::InvalidParams("empty rotation set".into()));
        }
        Self::assemble(self.variant, self.group, self.frame, self.alpha, self.params.clone(), Some(rotations))
    }

    /// Replaces the network parameters and recomputes the normalization.
    pub fn set_params(&mut self, params: NetworkParams) -> Result<()> {
        if params.spec != self.params.spec {
            return Err(Error::InvalidParams("architecture mismatch".into()));
        }
        self.params = params;
        self.dense = self.params.dense();
        self.norm = self.compute_normalization();
        Ok(())
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        self.params.set_flat(flat)?;
        self.dense = self.params.dense();
        self.norm = self.compute_normalization();
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn frame(&self) -> &PreferredFrame {
        &self.frame
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn dense(&self) -> &Dense {
        &self.dense
    }

    pub fn parameter_count(&self) -> usize {
        self.params.parameter_count()
    }

    pub fn rotations(&self) -> &[Tensor2] {
        &self.rotations
    }

    /// Frames in which the network inputs are evaluated, one per rotation.
    pub fn frames(&self) -> &[PreferredFrame] {
        &self.frames
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norm
    }

    /// Invariants at `F = I`; the network sees inputs shifted by them.
    pub fn reference_input(&self) -> &[f64] {
        &self.x_ref
    }

    /// Basis whose slots feed the network; `None` for `Cstar`.
    pub fn input_basis(&self) -> Option<BasisId> {
        match self.variant {
            Variant::I => Some(BasisId::polyconvex(self.group)),
            Variant::Istar => Some(BasisId::istar(self.group)),
            Variant::C => Some(BasisId::polyconvex(GroupId::Tri)),
            Variant::Cstar => None,
        }
    }

    /// Extra normalization terms as slot derivatives; their values are
    /// `dc:C + dg:G + dj·J`.
    pub fn extra_terms(&self) -> &[SlotDerivative] {
        &self.extras
    }

    fn compute_normalization(&self) -> Normalization {
        let n = self.x_ref.len();
        let (_, g0) = self.dense.gradient(&self.origin).expect("reference input has the network width");
        let mut weights = vec![0.0; n];
        let mut wj = vec![vec![0.0; n]; n];
        let mut extra_coefs = Vec::new();
        let mut extra_jacobian = Vec::new();
        let constants = match &self.plan {
            Plan::Linear => {
                for k in 0..n {
                    weights[k] = -g0[k];
                    wj[k][k] = -1.0;
                }
                NormalizationConstants::Linear { gradient: weights.clone() }
            }
            Plan::Ti => {
                let oc = lin(n, &[(0, 1.0), (1, 2.0), (2, 0.5), (3, -0.5), (5, 1.0), (6, 1.0), (7, 1.0)]);
                let xc = lin(n, &[(4, 1.0), (5, -1.0), (6, -1.0), (7, 1.0)]);
                let (o, x) = (dot(&oc, &g0), dot(&xc, &g0));
                let (p, pj) = relu(x, &xc, -1.0, 1.0);
                let (q, qj) = relu(x, &xc, 1.0, 1.0);
                weights[J_SLOT] = -2.0 * (o + q);
                weights[4] = p;
                weights[5] = q;
                for i in 0..n {
                    wj[J_SLOT][i] = -2.0 * (oc[i] + qj[i]);
                }
                wj[4] = pj;
                wj[5] = qj;
                NormalizationConstants::Ti { o, p, q }
            }
            Plan::Cub => {
                let rc = lin(n, &[(0, 1.0), (1, 2.0), (2, 0.5), (3, -0.5), (6, 12.0), (7, 6.0), (8, 12.0), (9, 9.0)]);
                let xc = lin(n, &[(4, 2.0), (7, -2.0), (5, 3.0), (9, -3.0), (8, 4.0)]);
                let (r, x) = (dot(&rc, &g0), dot(&xc, &g0));
                let (s, sj) = relu(x, &xc, -1.0, 1.0);
                let (t, tj) = relu(x, &xc, 1.0, 1.0);
                weights[J_SLOT] = -2.0 * (r + 3.0 * t);
                weights[4] = 0.5 * s;
                weights[7] = 0.5 * t;
                for i in 0..n {
                    wj[J_SLOT][i] = -2.0 * (rc[i] + 3.0 * tj[i]);
                    wj[4][i] = 0.5 * sj[i];
                    wj[7][i] = 0.5 * tj[i];
                }
                NormalizationConstants::Cub { r, s, t }
            }
            Plan::Chat(proj) => {
                let (p, q, r) = proj.solve(&g0);
                let m = p.len();
                for k in 0..m {
                    weights[k] = p[k].0;
                    wj[k] = p[k].1.clone();
                    weights[m + k] = q[k].0;
                    wj[m + k] = q[k].1.clone();
                }
                weights[2 * m] = r.0;
                wj[2 * m] = r.1.clone();
                NormalizationConstants::ChatProjection {
                    p: p.iter().map(|v| v.0).collect(),
                    q: q.iter().map(|v| v.0).collect(),
                    r: r.0,
                }
            }
            Plan::Structural(proj) => {
                let (p, q, r) = proj.solve(&g0);
                weights[J_SLOT] = r.0;
                wj[J_SLOT] = r.1.clone();
                for (c, j) in p.iter().chain(q.iter()) {
                    extra_coefs.push(*c);
                    extra_jacobian.push(j.clone());
                }
                NormalizationConstants::StructuralProjection {
                    p: p.iter().map(|v| v.0).collect(),
                    q: q.iter().map(|v| v.0).collect(),
                    r: r.0,
                }
            }
        };
        Normalization { constants, weights, weight_jacobian: wj, extra_coefs, extra_jacobian }
    }

    pub fn features(&self, f: &Tensor2) -> Result<PointFeatures> {
        let kb = bundle(f)?;
        Ok(self.features_of(&kb))
    }

    pub fn features_of(&self, kb: &KinematicBundle) -> PointFeatures {
        let n = self.x_ref.len();
        let mut x = Vec::with_capacity(n * self.frames.len());
        let mut t = Vec::with_capacity(n * self.frames.len());
        for fr in &self.frames {
            let s = slots_for(self.variant, self.group, fr, &kb.c, &kb.g, kb.j);
            x.extend(s.values.iter().zip(&self.x_ref).map(|(a, b)| a - b));
            t.extend(s.derivatives.iter().map(|d| d.generator(&kb.f, &kb.h)));
        }
        let extra_values = self.extras.iter().map(|d| ddot(&d.dc, &kb.c) + ddot(&d.dg, &kb.g) + d.dj * kb.j).collect();
        let extra_t = self.extras.iter().map(|d| d.generator(&kb.f, &kb.h)).collect();
        PointFeatures { j: kb.j, h: kb.h, x, t, extra_values, extra_t }
    }

    pub fn potential_from(&self, pf: &PointFeatures) -> f64 {
        let n = self.x_ref.len();
        let nq = self.frames.len();
        let mut total = 0.0;
        for q in 0..nq {
            let x = &pf.x[q * n..(q + 1) * n];
            total += self.dense.value(x).expect("feature width") + dot(&self.norm.weights, x);
        }
        total / nq as f64
            + dot(&self.norm.extra_coefs, &pf.extra_values)
            + self.alpha * (pf.j + 1.0 / pf.j - 2.0).powi(2)
    }

    pub fn stress_from(&self, pf: &PointFeatures, sc: &mut Scratch) -> Tensor2 {
        let n = self.x_ref.len();
        let nq = self.frames.len();
        sc.g.resize(n, 0.0);
        let mut p = Tensor2::zeros();
        for q in 0..nq {
            let x = &pf.x[q * n..(q + 1) * n];
            self.dense.gradient_ws(x, &mut sc.ws, &mut sc.g);
            for k in 0..n {
                p += pf.t[q * n + k] * (sc.g[k] + self.norm.weights[k]);
            }
        }
        p /= nq as f64;
        for (c, e) in self.norm.extra_coefs.iter().zip(&pf.extra_t) {
            p += e * *c;
        }
        let j = pf.j;
        p + pf.h * (2.0 * self.alpha * (j + 1.0 / j - 2.0) * (1.0 - 1.0 / (j * j)))
    }

    /// Accumulates `∂(P̄:P)/∂θ` for the effective network parameters into
    /// `grad`, except for the dependence through the normalization, which is
    /// accumulated as a cotangent `u` on `g₀` (apply with
    /// [`PannModel::apply_normalization_cotangent`]).
    pub fn accumulate_stress_gradient(&self, pf: &PointFeatures, pbar: &Tensor2, sc: &mut Scratch, grad: &mut [f64], u: &mut [f64]) {
        let n = self.x_ref.len();
        let nq = self.frames.len();
        let inv = 1.0 / nq as f64;
        sc.v.resize(n, 0.0);
        sc.wbar.clear();
        sc.wbar.resize(n, 0.0);
        for q in 0..nq {
            let x = &pf.x[q * n..(q + 1) * n];
            for k in 0..n {
                sc.v[k] = inv * ddot(pbar, &pf.t[q * n + k]);
                sc.wbar[k] += sc.v[k];
            }
            self.dense.accumulate_input_grad_param_grad(x, &sc.v, &mut sc.ws, grad, None);
        }
        for (k, wb) in sc.wbar.iter().enumerate() {
            if *wb != 0.0 {
                axpy(u, *wb, &self.norm.weight_jacobian[k]);
            }
        }
        for (jac, e) in self.norm.extra_jacobian.iter().zip(&pf.extra_t) {
            axpy(u, ddot(pbar, e), jac);
        }
    }

    /// Adds `∂(u·g₀)/∂θ` to `grad` (effective parameters).
    pub fn apply_normalization_cotangent(&self, u: &[f64], sc: &mut Scratch, grad: &mut [f64]) {
        if u.iter().any(|v| *v != 0.0) {
            self.dense.accumulate_input_grad_param_grad(&self.origin, u, &mut sc.ws, grad, None);
        }
    }

    /// Potential at `F = I`; not subtracted from the model.
    pub fn reference_energy(&self) -> f64 {
        self.potential(&Tensor2::identity()).expect("identity is admissible")
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            variant: self.variant,
            group: self.group,
            frame: self.frame,
            alpha: self.alpha,
            params: self.params.clone(),
            seed: self.params.seed,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.seed != file.params.seed {
            return Err(Error::InvalidParams("seed disagrees with network parameters".into()));
        }
        Self::assemble(file.variant, file.group, file.frame, file.alpha, file.params, None)
    }
}

fn slots_for(variant: Variant, group: GroupId, frame: &PreferredFrame, c: &Tensor2, g: &Tensor2, j: f64) -> SlotEvaluation {
    match variant {
        Variant::I => polyconvex_slots(group, frame, c, g, j),
        Variant::Istar => istar_slots(group, frame, c),
        Variant::C => polyconvex_slots(GroupId::Tri, frame, c, g, j),
        Variant::Cstar => general_slots(GroupId::Tri, frame, c),
    }
}

fn chat_projection(frame: &PreferredFrame, generators: &[Tensor2]) -> Projection {
    let basis: Vec<Tensor2> = crate::symmetry::triclinic_directions(frame).iter().map(outer).collect();
    Projection::new(&basis, false, generators)
}

/// Positive semi-definite tensors spanning, together with `I`, the
/// symmetric tensors invariant under the group.
fn projection_basis(g: GroupId, frame: &PreferredFrame) -> Vec<Tensor2> {
    let nn = |i: usize| outer(frame.n(i));
    match g {
        GroupId::Iso => vec![],
        GroupId::Tet => vec![nn(0) + nn(1)],
        GroupId::Rho => vec![nn(0), nn(1)],
        GroupId::Mon => vec![nn(0), nn(1), outer(&(frame.n(0) + frame.n(1)))],
        GroupId::Ti => vec![nn(2)],
        GroupId::Cub | GroupId::Tri => vec![],
    }
}

impl Hyperelastic for PannModel {
    fn potential(&self, f: &Tensor2) -> Result<f64> {
        Ok(self.potential_from(&self.features(f)?))
    }

    fn stress(&self, f: &Tensor2) -> Result<Tensor2> {
        Ok(self.stress_from(&self.features(f)?, &mut Scratch::default()))
    }

    fn tangent(&self, f: &Tensor2) -> Result<Tensor4> {
        let sc = std::cell::RefCell::new(Scratch::default());
        fd_tangent(|x| Ok(self.stress_from(&self.features(x)?, &mut sc.borrow_mut())), f, 1e-6 * (1.0 + f.norm()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{random_deformation, random_rotation};
    use crate::material::fd_stress;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn supported(v: Variant) -> Vec<GroupId> {
        GroupId::ALL.iter().copied().filter(|g| !v.is_symmetrized() || !matches!(g, GroupId::Iso | GroupId::Ti)).collect()
    }

    /// Model with every raw parameter perturbed so biases and kinks are generic.
    fn random_model(v: Variant, g: GroupId, frame: &PreferredFrame, hidden: Option<Vec<usize>>, seed: u64) -> PannModel {
        let opts = ModelOptions { hidden, ..Default::default() };
        let mut m = PannModel::build(v, g, frame, &opts, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let flat: Vec<f64> = m.params().to_flat().iter().map(|x| x + rng.random_range(-0.5..0.5)).collect();
        m.set_flat_params(&flat).unwrap();
        m
    }

    fn random_frame(rng: &mut ChaCha8Rng) -> PreferredFrame {
        PreferredFrame::from_rotation(&random_rotation(rng)).unwrap()
    }

    fn rel(a: &Tensor2, b: &Tensor2) -> f64 {
        (a - b).norm() / b.norm().max(1e-12)
    }

    #[test]
    fn growth_examples() {
        assert_eq!(growth(1.0, 3.0).unwrap(), 0.0);
        assert_eq!(growth_dj(1.0, 3.0).unwrap(), 0.0);
        assert_relative_eq!(growth(2.0, 1.0).unwrap(), 0.25, epsilon = 1e-15);
        // (0.01 + 100 - 2)² = 98.01²
        assert_relative_eq!(growth(0.01, 1.0).unwrap(), 9605.9601, epsilon = 1e-8);
        assert!(growth(1e-3, 1.0).unwrap() > growth(1e-2, 1.0).unwrap());
        assert!(growth(1e3, 1.0).unwrap() > growth(1e2, 1.0).unwrap());
        assert!(matches!(growth(0.0, 1.0), Err(Error::NonPositiveJacobian(_))));
        assert!(matches!(growth_dj(-1.0, 1.0), Err(Error::NonPositiveJacobian(_))));
        let h = 1e-6;
        for j in [0.3, 0.9, 1.7] {
            let fd = (growth(j + h, 0.7).unwrap() - growth(j - h, 0.7).unwrap()) / (2.0 * h);
            assert_relative_eq!(growth_dj(j, 0.7).unwrap(), fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn cubic_parameter_counts() {
        let f = PreferredFrame::standard();
        let counts: Vec<usize> = Variant::ALL
            .iter()
            .map(|v| PannModel::build(*v, GroupId::Cub, &f, &ModelOptions::default(), 0).unwrap().parameter_count())
            .collect();
        assert_eq!(counts, vec![464, 448, 272, 208]);
    }

    #[test]
    fn supported_groups_build() {
        let f = PreferredFrame::standard();
        for v in Variant::ALL {
            for g in GroupId::ALL {
                let r = PannModel::build(v, g, &f, &ModelOptions::default(), 1);
                if supported(v).contains(&g) {
                    let m = r.unwrap();
                    assert_eq!(m.dense().input_width(), v.input_width(g));
                } else {
                    assert!(matches!(r, Err(Error::UnsupportedGroup(_))));
                }
            }
        }
        assert_eq!(PannModel::build(Variant::C, GroupId::Cub, &f, &ModelOptions::default(), 0).unwrap().frames().len(), 24);
        assert_eq!(PannModel::build(Variant::C, GroupId::Tet, &f, &ModelOptions::default(), 0).unwrap().frames().len(), 8);
    }

    #[test]
    fn bad_options_are_rejected() {
        let f = PreferredFrame::standard();
        let bad = ModelOptions { alpha: Some(-1.0), ..Default::default() };
        assert!(PannModel::build(Variant::I, GroupId::Cub, &f, &bad, 0).is_err());
        let bad = ModelOptions { hidden: Some(vec![]), ..Default::default() };
        assert!(PannModel::build(Variant::I, GroupId::Cub, &f, &bad, 0).is_err());
        assert!(serde_json::from_str::<ModelOptions>(r#"{"widths": [3]}"#).is_err());
    }

    #[test]
    fn stress_vanishes_at_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for v in Variant::ALL {
            for g in supported(v) {
                for seed in 0..5 {
                    let frame = random_frame(&mut rng);
                    let m = random_model(v, g, &frame, None, seed);
                    let p = m.stress(&Tensor2::identity()).unwrap();
                    assert!(p.abs().max() <= 1e-8, "{v} {g}: {:e}", p.abs().max());
                    assert!(m.reference_energy().is_finite());
                    match &m.normalization().constants {
                        NormalizationConstants::Ti { p, q, .. } => assert!(*p >= 0.0 && *q >= 0.0),
                        NormalizationConstants::Cub { s, t, .. } => assert!(*s >= 0.0 && *t >= 0.0),
                        NormalizationConstants::ChatProjection { p, q, .. }
                        | NormalizationConstants::StructuralProjection { p, q, .. } => {
                            assert!(p.iter().chain(q).all(|x| *x >= 0.0))
                        }
                        NormalizationConstants::Linear { .. } => {}
                    }
                }
            }
        }
    }

    #[test]
    fn fresh_models_are_normalized() {
        for v in Variant::ALL {
            let m = PannModel::build(v, GroupId::Cub, &PreferredFrame::standard(), &ModelOptions::default(), 3).unwrap();
            assert!(m.stress(&Tensor2::identity()).unwrap().abs().max() <= 1e-8);
        }
    }

    #[test]
    fn zero_network_leaves_growth_only() {
        let opts = ModelOptions { alpha: Some(1.0), ..Default::default() };
        let mut m = PannModel::build(Variant::Istar, GroupId::Cub, &PreferredFrame::standard(), &opts, 0).unwrap();
        m.set_flat_params(&vec![0.0; m.parameter_count()]).unwrap();
        assert_eq!(m.normalization().weights, vec![0.0; 9]);
        let f = Tensor2::from_diagonal(&Vec3::new(1.1, 0.9, 1.0));
        // (0.99 + 1/0.99 - 2)² = (1e-4/0.99)²
        assert_relative_eq!(m.potential(&f).unwrap(), 1.0203040506e-8, max_relative = 1e-6);
    }

    #[test]
    fn symmetrized_inputs_average_over_the_group() {
        let m = PannModel::build(Variant::C, GroupId::Cub, &PreferredFrame::standard(), &ModelOptions::default(), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_deformation(&mut rng, 0.3, 0.6, 1.5);
        let pf = m.features(&f).unwrap();
        let c = f.transpose() * f;
        let mean: f64 = (0..24).map(|q| pf.x[q * 14] + m.reference_input()[0]).sum::<f64>() / 24.0;
        assert_relative_eq!(mean, c.trace() / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn stress_matches_potential_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for v in Variant::ALL {
            for g in [GroupId::Cub, GroupId::Tet, GroupId::Mon, GroupId::Tri] {
                let frame = random_frame(&mut rng);
                let m = random_model(v, g, &frame, None, 4);
                for _ in 0..10 {
                    let f = random_deformation(&mut rng, 0.3, 0.6, 1.5);
                    let p = m.stress(&f).unwrap();
                    let fd = fd_stress(|x| m.potential(x), &f, 1e-5 * (1.0 + f.norm())).unwrap();
                    assert!(rel(&p, &fd) < 1e-6, "{v} {g}: {}", rel(&p, &fd));
                }
            }
        }
    }

    #[test]
    fn objectivity_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for v in Variant::ALL {
            for g in supported(v) {
                let frame = random_frame(&mut rng);
                let m = random_model(v, g, &frame, None, 6);
                let qs = symmetry_samples(g, &frame, 6, &mut rng);
                for _ in 0..5 {
                    let f = random_deformation(&mut rng, 0.3, 0.6, 1.5);
                    let w = m.potential(&f).unwrap();
                    let p = m.stress(&f).unwrap();
                    let r = random_rotation(&mut rng);
                    assert_relative_eq!(m.potential(&(r * f)).unwrap(), w, max_relative = 1e-10);
                    assert!(rel(&m.stress(&(r * f)).unwrap(), &(r * p)) < 1e-10);
                    for q in &qs {
                        let fq = f * q.transpose();
                        assert_relative_eq!(m.potential(&fq).unwrap(), w, max_relative = 1e-10);
                        assert!(rel(&(m.stress(&fq).unwrap() * q), &p) < 1e-10, "{v} {g}");
                    }
                }
            }
        }
    }

    #[test]
    fn tangent_has_major_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let m = random_model(Variant::C, GroupId::Cub, &PreferredFrame::standard(), None, 2);
        let f = random_deformation(&mut rng, 0.2, 0.8, 1.2);
        let a = m.tangent(&f).unwrap();
        let scale = a.norm_inf();
        for i in 0..3 {
            for al in 0..3 {
                for j in 0..3 {
                    for be in 0..3 {
                        assert!((a.get(i, al, j, be) - a.get(j, be, i, al)).abs() <= 1e-8 * scale.max(1.0));
                    }
                }
            }
        }
    }

    /// `∂(P̄:P)/∂θ` including the normalization path, against finite differences.
    #[test]
    fn stress_parameter_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let cases = [
            (Variant::I, GroupId::Cub),
            (Variant::I, GroupId::Ti),
            (Variant::I, GroupId::Mon),
            (Variant::I, GroupId::Tri),
            (Variant::I, GroupId::Iso),
            (Variant::Istar, GroupId::Cub),
            (Variant::C, GroupId::Tet),
            (Variant::Cstar, GroupId::Cub),
        ];
        for (v, g) in cases {
            let frame = random_frame(&mut rng);
            let m = random_model(v, g, &frame, Some(vec![3, 3]), 8);
            let f = random_deformation(&mut rng, 0.3, 0.7, 1.4);
            let pbar = Tensor2::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let pf = m.features(&f).unwrap();
            let n = m.parameter_count();
            let mut grad = vec![0.0; n];
            let mut u = vec![0.0; m.reference_input().len()];
            let mut sc = Scratch::default();
            m.accumulate_stress_gradient(&pf, &pbar, &mut sc, &mut grad, &mut u);
            m.apply_normalization_cotangent(&u, &mut sc, &mut grad);
            m.params().pullback(&mut grad);
            let flat = m.params().to_flat();
            let h = 1e-6;
            for k in 0..n {
                let eval = |d: f64| {
                    let mut mm = m.clone();
                    let mut x = flat.clone();
                    x[k] += d;
                    mm.set_flat_params(&x).unwrap();
                    ddot(&pbar, &mm.stress_from(&pf, &mut Scratch::default()))
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                assert!((grad[k] - fd).abs() <= 1e-6 * fd.abs().max(1e-2), "{v} {g} param {k}: {} vs {fd}", grad[k]);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for v in Variant::ALL {
            let frame = random_frame(&mut rng);
            let m = random_model(v, GroupId::Cub, &frame, None, 9);
            let s = m.to_json().unwrap();
            let back = PannModel::from_json(&s).unwrap();
            assert_eq!(back.to_json().unwrap(), s);
            let f = random_deformation(&mut rng, 0.3, 0.6, 1.5);
            assert_eq!(back.stress(&f).unwrap(), m.stress(&f).unwrap());
        }
        assert!(PannModel::from_json(r#"{"variant": "I"}"#).is_err());
    }

    #[test]
    fn custom_rotation_set_breaks_symmetry() {
        let m = random_model(Variant::C, GroupId::Tet, &PreferredFrame::standard(), None, 1);
        let rs = m.rotations()[..7].to_vec();
        let broken = m.with_rotations(rs).unwrap();
        assert!(broken.stress(&Tensor2::identity()).unwrap().abs().max() <= 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_deformation(&mut rng, 0.3, 0.6, 1.5);
        let w = broken.potential(&f).unwrap();
        let worst = m.rotations().iter().map(|q| (broken.potential(&(f * q.transpose())).unwrap() - w).abs()).fold(0.0, f64::max);
        assert!(worst > 1e-8 * w.abs());
        assert!(PannModel::build(Variant::I, GroupId::Cub, &PreferredFrame::standard(), &ModelOptions::default(), 0)
            .unwrap()
            .with_rotations(vec![Tensor2::identity()])
            .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn normalization_holds_for_any_seed(seed in any::<u64>(), vi in 0usize..4) {
            let v = Variant::ALL[vi];
            let m = random_model(v, GroupId::Cub, &PreferredFrame::standard(), None, seed);
            prop_assert!(m.stress(&Tensor2::identity()).unwrap().abs().max() <= 1e-8);
        }
    }
}
