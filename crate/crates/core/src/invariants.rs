//! Invariant bases: general (integrity) bases, polyconvex bases, the
//! triclinic projection tuple ĉ, and the parametric symmetrized invariants of
//! the tetragonal and cubic groups.
//!
//! Slot order is positional and fixed; networks and normalization constants
//! index into it.
//!
//! | basis | slots |
//! |---|---|
//! | polyconvex prefix (all but tri) | `tr C`, `tr G`, `J`, `-J` |
//! | ti | `C:M`, `G:M`, `tr C - C:M`, `tr G - G:M` with `M = n3⊗n3` |
//! | mon | `C:M̃1`, `C:M̃2`, `C:M̃2²`, `G:M̃1`, `G:M̃2` |
//! | rho | `c1`, `c2`, `g1`, `g2` |
//! | tet | `Σc`, `Σc²`, `Σg`, `Σg²`, `Σ(c+g)²` over two axes |
//! | cub | `Σc²`, `Σc³`, `Σ(c+g)²`, `Σg²`, `Σ(c²+g)²`, `Σg³` over three axes |
//! | tri | `C:A1..6`, `G:A1..6`, `J`, `-J` |
//!
//! Here `cᵢ = nᵢ·C·nᵢ`, `gᵢ = nᵢ·G·nᵢ` and `dᵢ = nᵢ·C²·nᵢ`. General bases carry
//! the prefix `tr C`, `tr C²`, `tr C³`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kinematics::{sym, tensor_cross, ExtendedArgs, KinematicBundle, Tensor2, Vec3};
use crate::symmetry::{structural_tensors, triclinic_directions, GroupId, PreferredFrame};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// Minimal integrity basis in traces of `C` and its powers.
    General,
    /// Polyconvex basis in `(C, G, J)`; for triclinic symmetry this is ĉ.
    Polyconvex,
    /// Input slate of the unconstrained invariant model: `tr C`, `tr G`,
    /// `det C` followed by the anisotropic general invariants.
    Istar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisId {
    pub group: GroupId,
    pub kind: BasisKind,
}

impl BasisId {
    pub fn general(group: GroupId) -> Self {
        Self { group, kind: BasisKind::General }
    }

    pub fn polyconvex(group: GroupId) -> Self {
        Self { group, kind: BasisKind::Polyconvex }
    }

    pub fn istar(group: GroupId) -> Self {
        Self { group, kind: BasisKind::Istar }
    }

    pub fn len(&self) -> usize {
        self.slot_names().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn slot_names(&self) -> Vec<String> {
        let names: &[&str] = match (self.kind, self.group) {
            (BasisKind::Polyconvex, GroupId::Tri) => &[
                "c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9", "c10", "c11", "c12", "c13", "c14",
            ],
            (BasisKind::Polyconvex, g) => {
                let tail: &[&str] = match g {
                    GroupId::Iso | GroupId::Tri => &[],
                    GroupId::Ti => &["I1ti", "I2ti", "I3ti", "I4ti"],
                    GroupId::Mon => &["I1mon", "I2mon", "I3mon", "I4mon", "I5mon"],
                    GroupId::Rho => &["I1rho", "I2rho", "I3rho", "I4rho"],
                    GroupId::Tet => &["I1tet", "I2tet", "I3tet", "I4tet", "I5tet"],
                    GroupId::Cub => &["I1cub", "I2cub", "I3cub", "I4cub", "I5cub", "I6cub"],
                };
                return ["I1iso", "I2iso", "J", "-J"].iter().chain(tail).map(|s| s.to_string()).collect();
            }
            (_, GroupId::Tri) => &["k1", "k2", "k3", "k4", "k5", "k6"],
            (kind, g) => {
                let head: &[&str] =
                    if kind == BasisKind::General { &["J1iso", "J2iso", "J3iso"] } else { &["I1iso", "I2iso", "I3iso"] };
                let tail: &[&str] = match g {
                    GroupId::Iso | GroupId::Tri => &[],
                    GroupId::Ti => &["J1ti", "J2ti"],
                    GroupId::Mon => &["J1mon", "J2mon", "J3mon", "J4mon", "J5mon"],
                    GroupId::Rho => &["J1rho", "J2rho", "J3rho", "J4rho"],
                    GroupId::Tet => &["J1tet", "J2tet", "J3tet", "J4tet", "J5tet"],
                    GroupId::Cub => &["J1cub", "J2cub", "J3cub", "J4cub", "J5cub", "J6cub"],
                };
                return head.iter().chain(tail).map(|s| s.to_string()).collect();
            }
        };
        names.iter().map(|s| s.to_string()).collect()
    }
}

impl fmt::Display for BasisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            BasisKind::General => "general",
            BasisKind::Polyconvex => "polyconvex",
            BasisKind::Istar => "istar",
        };
        write!(f, "{}-{}", self.group, k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantVector {
    pub basis: BasisId,
    pub values: Vec<f64>,
}

/// Partial derivatives of one slot with respect to `C`, `G` and `J`, each
/// treated as independent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotDerivative {
    pub dc: Tensor2,
    pub dg: Tensor2,
    pub dj: f64,
}

impl SlotDerivative {
    pub fn zero() -> Self {
        Self { dc: Tensor2::zeros(), dg: Tensor2::zeros(), dj: 0.0 }
    }

    /// Tensor generator `∂I/∂F = 2F·∂_C I + (2H·∂_G I)⨯F + ∂_J I·H`.
    pub fn generator(&self, f: &Tensor2, h: &Tensor2) -> Tensor2 {
        let mut t = f * self.dc * 2.0 + h * self.dj;
        if self.dg != Tensor2::zeros() {
            t += tensor_cross(&(h * self.dg * 2.0), f);
        }
        t
    }
}

/// Slot values together with their partial derivatives.
#[derive(Clone, Debug)]
pub struct SlotEvaluation {
    pub values: Vec<f64>,
    pub derivatives: Vec<SlotDerivative>,
}

impl SlotEvaluation {
    fn with_capacity(n: usize) -> Self {
        Self { values: Vec::with_capacity(n), derivatives: Vec::with_capacity(n) }
    }

    fn push(&mut self, v: f64, dc: Tensor2, dg: Tensor2, dj: f64) {
        self.values.push(v);
        self.derivatives.push(SlotDerivative { dc, dg, dj });
    }

    fn push_c(&mut self, v: f64, dc: Tensor2) {
        self.push(v, dc, Tensor2::zeros(), 0.0);
    }

    fn push_g(&mut self, v: f64, dg: Tensor2) {
        self.push(v, Tensor2::zeros(), dg, 0.0);
    }

    /// Generators `∂Iₖ/∂F` for all slots.
    pub fn generators(&self, f: &Tensor2, h: &Tensor2) -> Vec<Tensor2> {
        self.derivatives.iter().map(|d| d.generator(f, h)).collect()
    }
}

fn outer(a: &Vec3, b: &Vec3) -> Tensor2 {
    a * b.transpose()
}

fn ddot(a: &Tensor2, b: &Tensor2) -> f64 {
    crate::kinematics::ddot(a, b)
}

/// Polyconvex slots as functions of independent `(C, G, J)`.
pub fn polyconvex_slots(group: GroupId, frame: &PreferredFrame, c: &Tensor2, g: &Tensor2, j: f64) -> SlotEvaluation {
    let id = Tensor2::identity();
    let z = Tensor2::zeros();
    let mut s = SlotEvaluation::with_capacity(14);
    if group == GroupId::Tri {
        let a: Vec<Tensor2> = triclinic_directions(frame).iter().map(|u| outer(u, u)).collect();
        for ai in &a {
            s.push_c(ddot(c, ai), *ai);
        }
        for ai in &a {
            s.push_g(ddot(g, ai), *ai);
        }
        s.push(j, z, z, 1.0);
        s.push(-j, z, z, -1.0);
        return s;
    }
    s.push_c(c.trace(), id);
    s.push_g(g.trace(), id);
    s.push(j, z, z, 1.0);
    s.push(-j, z, z, -1.0);

    let nn: [Tensor2; 3] = std::array::from_fn(|i| outer(frame.n(i), frame.n(i)));
    let cs: [f64; 3] = std::array::from_fn(|i| ddot(c, &nn[i]));
    let gs: [f64; 3] = std::array::from_fn(|i| ddot(g, &nn[i]));
    let sum = |k: usize, w: &dyn Fn(usize) -> f64| (0..k).fold(z, |acc, i| acc + nn[i] * w(i));

    match group {
        GroupId::Iso | GroupId::Tri => {}
        GroupId::Ti => {
            let m = nn[2];
            s.push_c(cs[2], m);
            s.push_g(gs[2], m);
            s.push_c(c.trace() - cs[2], id - m);
            s.push_g(g.trace() - gs[2], id - m);
        }
        GroupId::Mon => {
            let st = structural_tensors(GroupId::Mon, frame, true).expect("mon tensors");
            let (m1, m2) = (st.second[0], st.second[1]);
            let m22 = m2 * m2;
            s.push_c(ddot(c, &m1), m1);
            s.push_c(ddot(c, &m2), m2);
            s.push_c(ddot(c, &m22), m22);
            s.push_g(ddot(g, &m1), m1);
            s.push_g(ddot(g, &m2), m2);
        }
        GroupId::Rho => {
            s.push_c(cs[0], nn[0]);
            s.push_c(cs[1], nn[1]);
            s.push_g(gs[0], nn[0]);
            s.push_g(gs[1], nn[1]);
        }
        GroupId::Tet => {
            let k = 2;
            s.push_c(cs[0] + cs[1], sum(k, &|_| 1.0));
            s.push_c(cs[0] * cs[0] + cs[1] * cs[1], sum(k, &|i| 2.0 * cs[i]));
            s.push_g(gs[0] + gs[1], sum(k, &|_| 1.0));
            s.push_g(gs[0] * gs[0] + gs[1] * gs[1], sum(k, &|i| 2.0 * gs[i]));
            let v = (0..k).map(|i| (cs[i] + gs[i]).powi(2)).sum();
            let d = sum(k, &|i| 2.0 * (cs[i] + gs[i]));
            s.push(v, d, d, 0.0);
        }
        GroupId::Cub => {
            let k = 3;
            s.push_c(cs.iter().map(|x| x * x).sum(), sum(k, &|i| 2.0 * cs[i]));
            s.push_c(cs.iter().map(|x| x * x * x).sum(), sum(k, &|i| 3.0 * cs[i] * cs[i]));
            let d = sum(k, &|i| 2.0 * (cs[i] + gs[i]));
            s.push((0..k).map(|i| (cs[i] + gs[i]).powi(2)).sum(), d, d, 0.0);
            s.push_g(gs.iter().map(|x| x * x).sum(), sum(k, &|i| 2.0 * gs[i]));
            let w = |i: usize| cs[i] * cs[i] + gs[i];
            s.push(
                (0..k).map(|i| w(i).powi(2)).sum(),
                sum(k, &|i| 4.0 * w(i) * cs[i]),
                sum(k, &|i| 2.0 * w(i)),
                0.0,
            );
            s.push_g(gs.iter().map(|x| x * x * x).sum(), sum(k, &|i| 3.0 * gs[i] * gs[i]));
        }
    }
    s
}

/// Derivative of `tr(X·C²)` w.r.t. symmetric `C`.
fn d_tr_c2x(c: &Tensor2, x: &Tensor2) -> Tensor2 {
    sym(&(x * c + c * x))
}

/// General-basis slots (functions of `C` only) with `∂/∂C`.
pub fn general_slots(group: GroupId, frame: &PreferredFrame, c: &Tensor2) -> SlotEvaluation {
    anisotropic_general(group, frame, c, true)
}

/// Input slate of the unconstrained invariant model.
pub fn istar_slots(group: GroupId, frame: &PreferredFrame, c: &Tensor2) -> SlotEvaluation {
    anisotropic_general(group, frame, c, false)
}

fn anisotropic_general(group: GroupId, frame: &PreferredFrame, c: &Tensor2, trace_prefix: bool) -> SlotEvaluation {
    let id = Tensor2::identity();
    let mut s = SlotEvaluation::with_capacity(9);
    if group == GroupId::Tri {
        let [a, b, d] = *frame.axes();
        for e in [outer(&a, &a), outer(&b, &b), outer(&d, &d), sym(&outer(&a, &b)), sym(&outer(&a, &d)), sym(&outer(&b, &d))] {
            s.push_c(ddot(c, &e), e);
        }
        return s;
    }
    let c2 = c * c;
    if trace_prefix {
        s.push_c(c.trace(), id);
        s.push_c(c2.trace(), c * 2.0);
        s.push_c((c2 * c).trace(), c2 * 3.0);
    } else {
        let gc = crate::kinematics::cofactor(c);
        s.push_c(c.trace(), id);
        s.push_c(gc.trace(), id * c.trace() - c);
        s.push_c(c.determinant(), sym(&gc));
    }
    let nn: [Tensor2; 3] = std::array::from_fn(|i| outer(frame.n(i), frame.n(i)));
    let cs: [f64; 3] = std::array::from_fn(|i| ddot(c, &nn[i]));
    let ds: [f64; 3] = std::array::from_fn(|i| ddot(&c2, &nn[i]));
    let dd: [Tensor2; 3] = std::array::from_fn(|i| d_tr_c2x(c, &nn[i]));
    match group {
        GroupId::Iso | GroupId::Tri => {}
        GroupId::Ti => {
            s.push_c(cs[2], nn[2]);
            s.push_c(ds[2], dd[2]);
        }
        GroupId::Mon => {
            let st = structural_tensors(GroupId::Mon, frame, false).expect("mon tensors");
            let (m1, m2) = (st.second[0], st.second[1]);
            let m22 = m2 * m2;
            let m12 = m1 * m2;
            s.push_c(ddot(c, &m22.transpose()), sym(&m22));
            s.push_c(ddot(c, &m1), m1);
            s.push_c(ddot(c, &m12.transpose()), sym(&m12));
            s.push_c(ddot(&c2, &m1), d_tr_c2x(c, &m1));
            s.push_c(ddot(&c2, &m12.transpose()), d_tr_c2x(c, &m12));
        }
        GroupId::Rho => {
            let m = nn[0] - nn[1];
            let mm = m * m;
            s.push_c(ddot(c, &m), m);
            s.push_c(ddot(c, &mm), mm);
            s.push_c(ddot(&c2, &m), d_tr_c2x(c, &m));
            s.push_c(ddot(&c2, &mm), d_tr_c2x(c, &mm));
        }
        GroupId::Tet => {
            let k = 0..2;
            let sum = |w: &dyn Fn(usize) -> Tensor2| k.clone().fold(Tensor2::zeros(), |a, i| a + w(i));
            s.push_c(cs[0] + cs[1], sum(&|i| nn[i]));
            s.push_c(cs[0] * cs[0] + cs[1] * cs[1], sum(&|i| nn[i] * (2.0 * cs[i])));
            s.push_c(ds[0] + ds[1], sum(&|i| dd[i]));
            s.push_c(cs[0] * ds[0] + cs[1] * ds[1], sum(&|i| nn[i] * ds[i] + dd[i] * cs[i]));
            s.push_c(ds[0] * ds[0] + ds[1] * ds[1], sum(&|i| dd[i] * (2.0 * ds[i])));
        }
        GroupId::Cub => {
            let sum = |w: &dyn Fn(usize) -> Tensor2| (0..3).fold(Tensor2::zeros(), |a, i| a + w(i));
            let tot = |w: &dyn Fn(usize) -> f64| (0..3).map(w).sum::<f64>();
            s.push_c(tot(&|i| cs[i] * cs[i]), sum(&|i| nn[i] * (2.0 * cs[i])));
            s.push_c(tot(&|i| cs[i].powi(3)), sum(&|i| nn[i] * (3.0 * cs[i] * cs[i])));
            s.push_c(tot(&|i| cs[i] * ds[i]), sum(&|i| nn[i] * ds[i] + dd[i] * cs[i]));
            s.push_c(tot(&|i| ds[i] * ds[i]), sum(&|i| dd[i] * (2.0 * ds[i])));
            s.push_c(
                tot(&|i| cs[i] * cs[i] * ds[i]),
                sum(&|i| nn[i] * (2.0 * cs[i] * ds[i]) + dd[i] * (cs[i] * cs[i])),
            );
            s.push_c(
                tot(&|i| ds[i] * ds[i] * cs[i]),
                sum(&|i| dd[i] * (2.0 * ds[i] * cs[i]) + nn[i] * (ds[i] * ds[i])),
            );
        }
    }
    s
}

fn check_spd(c: &Tensor2) -> Result<()> {
    let asym = (c - c.transpose()).abs().max();
    if !c.iter().all(|x| x.is_finite()) || asym > 1e-10 * c.abs().max().max(1.0) {
        return Err(Error::NotSpd);
    }
    if sym(c).cholesky().is_none() {
        return Err(Error::NotSpd);
    }
    Ok(())
}

pub fn general_invariants(group: GroupId, c: &Tensor2, frame: &PreferredFrame) -> Result<InvariantVector> {
    check_spd(c)?;
    Ok(InvariantVector { basis: BasisId::general(group), values: general_slots(group, frame, c).values })
}

pub fn istar_invariants(group: GroupId, c: &Tensor2, frame: &PreferredFrame) -> Result<InvariantVector> {
    check_spd(c)?;
    Ok(InvariantVector { basis: BasisId::istar(group), values: istar_slots(group, frame, c).values })
}

pub fn polyconvex_invariants(group: GroupId, kb: &KinematicBundle, frame: &PreferredFrame) -> InvariantVector {
    InvariantVector { basis: BasisId::polyconvex(group), values: polyconvex_slots(group, frame, &kb.c, &kb.g, kb.j).values }
}

/// One polyconvex slot evaluated at independent extended arguments.
pub fn invariant_extended(basis: BasisId, slot: usize, xa: &ExtendedArgs, frame: &PreferredFrame) -> Result<f64> {
    if basis.kind != BasisKind::Polyconvex || slot >= basis.len() {
        return Err(Error::SlotNotPolyconvex { basis: basis.to_string(), slot });
    }
    let (c, g, j) = xa.cgj();
    Ok(polyconvex_slots(basis.group, frame, &c, &g, j).values[slot])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizedInvariantParams {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
}

impl SymmetrizedInvariantParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.a1 >= 0.0 && self.a2 >= 0.0 && self.b1 >= 1.0 && self.b2 >= 1.0 && self.c >= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{self:?} violates a >= 0, b >= 1, c >= 1")))
        }
    }

    fn term(&self, cn: f64, gn: f64) -> f64 {
        (self.a1 * cn.powf(self.b1) + self.a2 * gn.powf(self.b2)).powf(self.c)
    }
}

fn symmetrized_axes(g: GroupId) -> Result<usize> {
    match g {
        GroupId::Tet => Ok(2),
        GroupId::Cub => Ok(3),
        other => Err(Error::UnsupportedGroup(other)),
    }
}

/// `f = Σᵢ (a1 [nᵢ⊗nᵢ:C]^b1 + a2 [nᵢ⊗nᵢ:G]^b2)^c` over two (tet) or three (cub) axes.
pub fn parametric_symmetrized_invariant(
    g: GroupId,
    kb: &KinematicBundle,
    frame: &PreferredFrame,
    p: &SymmetrizedInvariantParams,
) -> Result<f64> {
    p.validate()?;
    let axes = symmetrized_axes(g)?;
    Ok((0..axes)
        .map(|i| {
            let n = frame.n(i);
            p.term(n.dot(&(kb.c * n)), n.dot(&(kb.g * n)))
        })
        .sum())
}

/// Group average of `f̃ = k·(a1 [n1⊗n1:C]^b1 + a2 [n1⊗n1:G]^b2)^c` with `k`
/// the number of axes, evaluated by explicit enumeration of the rotation group.
pub fn symmetrized_average(
    g: GroupId,
    c: &Tensor2,
    gg: &Tensor2,
    frame: &PreferredFrame,
    p: &SymmetrizedInvariantParams,
) -> Result<f64> {
    p.validate()?;
    let axes = symmetrized_axes(g)? as f64;
    let rs = crate::symmetry::group_elements(g, frame)?;
    let n = frame.n(0);
    let total: f64 = rs
        .elements
        .iter()
        .map(|q| {
            let cq = q * c * q.transpose();
            let gq = q * gg * q.transpose();
            axes * p.term(n.dot(&(cq * n)), n.dot(&(gq * n)))
        })
        .sum();
    Ok(total / rs.elements.len() as f64)
}
