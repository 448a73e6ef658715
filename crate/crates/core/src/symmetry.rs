//! Preferred frames, structural tensors and finite rotation groups.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::kinematics::{axis_rotation, random_rotation, Tensor2, Tensor4, Vec3};
use crate::{Error, Result};

/// Orthonormal right-handed triad of preferred directions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameRepr", into = "FrameRepr")]
pub struct PreferredFrame {
    n: [Vec3; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRepr {
    n1: [f64; 3],
    n2: [f64; 3],
    n3: [f64; 3],
}

impl From<PreferredFrame> for FrameRepr {
    fn from(f: PreferredFrame) -> Self {
        let a = |v: &Vec3| [v[0], v[1], v[2]];
        Self { n1: a(&f.n[0]), n2: a(&f.n[1]), n3: a(&f.n[2]) }
    }
}

impl TryFrom<FrameRepr> for PreferredFrame {
    type Error = Error;
    fn try_from(r: FrameRepr) -> Result<Self> {
        PreferredFrame::new(Vec3::from(r.n1), Vec3::from(r.n2), Vec3::from(r.n3))
    }
}

impl Default for PreferredFrame {
    fn default() -> Self {
        Self::standard()
    }
}

impl PreferredFrame {
    pub fn standard() -> Self {
        Self { n: [Vec3::x(), Vec3::y(), Vec3::z()] }
    }

    pub fn new(n1: Vec3, n2: Vec3, n3: Vec3) -> Result<Self> {
        let n = [n1, n2, n3];
        for i in 0..3 {
            for j in 0..3 {
                let d = n[i].dot(&n[j]) - if i == j { 1.0 } else { 0.0 };
                if d.abs() > 1e-12 {
                    return Err(Error::InvalidParams(format!("frame not orthonormal: n{}·n{} off by {d:.2e}", i + 1, j + 1)));
                }
            }
        }
        if n1.cross(&n2).dot(&n3) < 0.0 {
            return Err(Error::InvalidParams("frame is left-handed".into()));
        }
        Ok(Self { n })
    }

    /// Frame whose directions are the columns of the rotation `r`.
    pub fn from_rotation(r: &Tensor2) -> Result<Self> {
        Self::new(r.column(0).into(), r.column(1).into(), r.column(2).into())
    }

    /// `[n1|n2|n3]`, maps standard basis vectors to the frame.
    pub fn rotation(&self) -> Tensor2 {
        Tensor2::from_columns(&self.n)
    }

    pub fn rotated(&self, r: &Tensor2) -> Result<Self> {
        Self::from_rotation(&(r * self.rotation()))
    }

    #[inline]
    pub fn n(&self, i: usize) -> &Vec3 {
        &self.n[i]
    }

    pub fn axes(&self) -> &[Vec3; 3] {
        &self.n
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupId {
    Iso,
    Ti,
    Tri,
    Mon,
    Rho,
    Tet,
    Cub,
}

impl GroupId {
    pub const ALL: [GroupId; 7] = [Self::Iso, Self::Ti, Self::Tri, Self::Mon, Self::Rho, Self::Tet, Self::Cub];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Iso => "iso",
            Self::Ti => "ti",
            Self::Tri => "tri",
            Self::Mon => "mon",
            Self::Rho => "rho",
            Self::Tet => "tet",
            Self::Cub => "cub",
        }
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown group '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct RotationSet {
    pub group: GroupId,
    pub frame: PreferredFrame,
    pub elements: Vec<Tensor2>,
}

#[derive(Clone, Debug, Default)]
pub struct StructuralTensorSet {
    pub second: Vec<Tensor2>,
    pub fourth: Option<Tensor4>,
}

impl StructuralTensorSet {
    /// `Q★𝒮`.
    pub fn rotate(&self, q: &Tensor2) -> Self {
        Self {
            second: self.second.iter().map(|m| q * m * q.transpose()).collect(),
            fourth: self.fourth.as_ref().map(|t| t.rotate(q)),
        }
    }

    pub fn max_difference(&self, other: &Self) -> f64 {
        let mut d = 0.0_f64;
        for (a, b) in self.second.iter().zip(&other.second) {
            d = d.max((a - b).abs().max());
        }
        if let (Some(a), Some(b)) = (&self.fourth, &other.fourth) {
            for (x, y) in a.data.iter().zip(b.data.iter()) {
                d = d.max((x - y).abs());
            }
        }
        d
    }
}

/// Signed permutation matrices with determinant +1.
fn signed_permutations() -> Vec<Tensor2> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [1, 0, 2], [0, 2, 1], [2, 1, 0], [1, 2, 0], [2, 0, 1]];
    let mut out = Vec::with_capacity(24);
    for p in PERMS {
        for signs in 0..8u8 {
            let mut q = Tensor2::zeros();
            for (row, &col) in p.iter().enumerate() {
                q[(row, col)] = if signs & (1 << row) == 0 { 1.0 } else { -1.0 };
            }
            if q.determinant() > 0.0 {
                out.push(q);
            }
        }
    }
    out
}

/// Proper rotations of the tetragonal (4-fold about n3) or cubic group in `frame`.
pub fn group_elements(g: GroupId, frame: &PreferredFrame) -> Result<RotationSet> {
    let std = signed_permutations();
    let keep: Vec<Tensor2> = match g {
        GroupId::Cub => std,
        // stabilizer of the n3 axis up to sign
        GroupId::Tet => std.into_iter().filter(|q| q[(2, 2)].abs() == 1.0).collect(),
        other => return Err(Error::UnsupportedGroup(other)),
    };
    let r = frame.rotation();
    let elements = keep.iter().map(|q| r * q * r.transpose()).collect();
    Ok(RotationSet { group: g, frame: *frame, elements })
}

/// Elements usable to test invariance for any group: the full table for
/// finite groups, random samples for the continuous ones.
pub fn symmetry_samples<R: rand::Rng + ?Sized>(g: GroupId, frame: &PreferredFrame, n: usize, rng: &mut R) -> Vec<Tensor2> {
    use std::f64::consts::PI;
    match g {
        GroupId::Tet | GroupId::Cub => group_elements(g, frame).expect("finite group").elements,
        GroupId::Iso => (0..n).map(|_| random_rotation(rng)).collect(),
        GroupId::Ti => (0..n)
            .map(|k| {
                let spin = axis_rotation(frame.n(2), rng.random_range(0.0..2.0 * PI));
                if k % 2 == 0 {
                    spin
                } else {
                    spin * axis_rotation(frame.n(0), PI)
                }
            })
            .collect(),
        GroupId::Mon => vec![Tensor2::identity(), axis_rotation(frame.n(2), PI)],
        GroupId::Rho => {
            let mut v = vec![Tensor2::identity()];
            v.extend((0..3).map(|i| axis_rotation(frame.n(i), PI)));
            v
        }
        GroupId::Tri => vec![Tensor2::identity()],
    }
}

fn outer(a: &Vec3, b: &Vec3) -> Tensor2 {
    a * b.transpose()
}

/// The six directions `e1, e2, e3, (e1+e2)/√2, (e1+e3)/√2, (e2+e3)/√2`
/// written in the frame.
pub fn triclinic_directions(frame: &PreferredFrame) -> [Vec3; 6] {
    let [a, b, c] = *frame.axes();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [a, b, c, (a + b) * s, (a + c) * s, (b + c) * s]
}

/// Structural tensors of `g`. With `polyconvex` set, the positive
/// semi-definite alternatives are returned for monoclinic and rhombic symmetry;
/// for triclinic symmetry the six projection tensors `u⊗u` are returned.
pub fn structural_tensors(g: GroupId, frame: &PreferredFrame, polyconvex: bool) -> Result<StructuralTensorSet> {
    let n = |i: usize| *frame.n(i);
    let nn = |i: usize| outer(&n(i), &n(i));
    let set = match g {
        GroupId::Iso => StructuralTensorSet::default(),
        GroupId::Ti => StructuralTensorSet { second: vec![nn(2)], fourth: None },
        GroupId::Tri if polyconvex => StructuralTensorSet {
            second: triclinic_directions(frame).iter().map(|u| outer(u, u)).collect(),
            fourth: None,
        },
        GroupId::Tri => return Err(Error::UnsupportedGroup(g)),
        GroupId::Mon if polyconvex => {
            let v = n(0) + n(1);
            StructuralTensorSet { second: vec![nn(0), outer(&v, &v) + (nn(0) + nn(1)) * 2.0], fourth: None }
        }
        GroupId::Mon => StructuralTensorSet {
            second: vec![nn(0) - nn(1), outer(&n(0), &n(1)) - outer(&n(1), &n(0))],
            fourth: None,
        },
        GroupId::Rho if polyconvex => StructuralTensorSet { second: vec![nn(0), nn(1)], fourth: None },
        GroupId::Rho => StructuralTensorSet { second: vec![nn(0) - nn(1)], fourth: None },
        GroupId::Tet | GroupId::Cub => {
            let axes = if g == GroupId::Tet { 2 } else { 3 };
            let mut m = Tensor4::default();
            for i in 0..axes {
                m += &Tensor4::quad(&n(i));
            }
            StructuralTensorSet { second: Vec::new(), fourth: Some(m) }
        }
    };
    Ok(set)
}

fn orthogonality_defect(q: &Tensor2) -> f64 {
    (q.transpose() * q - Tensor2::identity()).abs().max()
}

/// `Q·C·Qᵀ`.
pub fn act_on_c(q: &Tensor2, c: &Tensor2) -> Result<Tensor2> {
    let d = orthogonality_defect(q);
    if d > 1e-10 {
        return Err(Error::NotOrthogonal(d));
    }
    Ok(q * c * q.transpose())
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupAxiomReport {
    pub group: GroupId,
    pub order: usize,
    pub pass: bool,
    pub failure: Option<String>,
}

fn position(set: &[Tensor2], q: &Tensor2) -> Option<usize> {
    set.iter().position(|p| (p - q).abs().max() < 1e-9)
}

/// Identity presence, proper orthogonality, inverses and closure.
pub fn verify_group_axioms(rs: &RotationSet) -> GroupAxiomReport {
    let els = &rs.elements;
    let fail = |msg: String| GroupAxiomReport { group: rs.group, order: els.len(), pass: false, failure: Some(msg) };
    if position(els, &Tensor2::identity()).is_none() {
        return fail("identity missing".into());
    }
    for (a, q) in els.iter().enumerate() {
        if orthogonality_defect(q) > 1e-12 || (q.determinant() - 1.0).abs() > 1e-12 {
            return fail(format!("element {a} is not a proper rotation"));
        }
        if position(els, &q.transpose()).is_none() {
            return fail(format!("inverse of element {a} missing"));
        }
    }
    for (a, p) in els.iter().enumerate() {
        for (b, q) in els.iter().enumerate() {
            if position(els, &(p * q)).is_none() {
                return fail(format!("closure: product of elements {a} and {b} not in set"));
            }
        }
    }
    GroupAxiomReport { group: rs.group, order: els.len(), pass: true, failure: None }
}
