//! Finite-strain kinematics on 3x3 tensors.

use nalgebra::{Matrix3, Vector3};

use crate::{Error, Result};

/// Second-order tensor. Indexing `t[(i, j)]` is row/column as in index notation.
pub type Tensor2 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

/// Row-major component array, the on-disk layout.
pub fn to_row_major(t: &Tensor2) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = t[(i, j)];
        }
    }
    out
}

pub fn from_row_major(v: &[f64]) -> Tensor2 {
    assert_eq!(v.len(), 9, "expected 9 components");
    Tensor2::from_row_slice(v)
}

/// Double contraction `A:B = A_ij B_ij`.
#[inline]
pub fn ddot(a: &Tensor2, b: &Tensor2) -> f64 {
    a.component_mul(b).sum()
}

pub fn sym(a: &Tensor2) -> Tensor2 {
    (a + a.transpose()) * 0.5
}

/// Largest absolute component.
pub fn norm_inf(a: &Tensor2) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Cofactor from complementary 2x2 minors; `cof(A)·Aᵀ = det(A)·I` for any `A`.
pub fn cofactor(a: &Tensor2) -> Tensor2 {
    let mut h = Tensor2::zeros();
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        for p in 0..3 {
            let (q, r) = ((p + 1) % 3, (p + 2) % 3);
            h[(i, p)] = a[(j, q)] * a[(k, r)] - a[(j, r)] * a[(k, q)];
        }
    }
    h
}

/// Tensor cross product `(A⨯B)_iI = ε_ijk ε_IJK A_jJ B_kK`.
pub fn tensor_cross(a: &Tensor2, b: &Tensor2) -> Tensor2 {
    let mut out = Tensor2::zeros();
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        for p in 0..3 {
            let (q, r) = ((p + 1) % 3, (p + 2) % 3);
            out[(i, p)] = a[(j, q)] * b[(k, r)] - a[(j, r)] * b[(k, q)] - a[(k, q)] * b[(j, r)]
                + a[(k, r)] * b[(j, q)];
        }
    }
    out
}

/// `F` with its derived kinematic quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinematicBundle {
    pub f: Tensor2,
    pub c: Tensor2,
    pub h: Tensor2,
    pub g: Tensor2,
    pub j: f64,
}

pub fn bundle(f: &Tensor2) -> Result<KinematicBundle> {
    let h = cofactor(f);
    // det via the first row of the cofactor keeps J and H consistent
    let j = (0..3).map(|k| f[(0, k)] * h[(0, k)]).sum::<f64>();
    if !(j > 0.0) {
        return Err(Error::NonPositiveJacobian(j));
    }
    let c = sym(&(f.transpose() * f));
    let g = sym(&cofactor(&c));
    Ok(KinematicBundle { f: *f, c, h, g, j })
}

/// Extended polyconvexity arguments `(F, H, J)`, treated as independent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtendedArgs {
    pub f: Tensor2,
    pub h: Tensor2,
    pub j: f64,
}

impl ExtendedArgs {
    pub fn from_bundle(kb: &KinematicBundle) -> Self {
        Self { f: kb.f, h: kb.h, j: kb.j }
    }

    /// Convex combination `(1-t)·self + t·other`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        Self {
            f: self.f * (1.0 - t) + other.f * t,
            h: self.h * (1.0 - t) + other.h * t,
            j: self.j * (1.0 - t) + other.j * t,
        }
    }

    /// `(C, G, J)` with `C = FᵀF`, `G = HᵀH` and `J` taken literally.
    pub fn cgj(&self) -> (Tensor2, Tensor2, f64) {
        (sym(&(self.f.transpose() * self.f)), sym(&(self.h.transpose() * self.h)), self.j)
    }
}

/// Fourth-order tensor, components `A_ijkl` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    pub data: [f64; 81],
}

impl Default for Tensor4 {
    fn default() -> Self {
        Self { data: [0.0; 81] }
    }
}

impl Tensor4 {
    #[inline]
    fn idx(i: usize, j: usize, k: usize, l: usize) -> usize {
        27 * i + 9 * j + 3 * k + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[Self::idx(i, j, k, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.data[Self::idx(i, j, k, l)] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.data[Self::idx(i, j, k, l)] += v;
    }

    /// `a⊗a⊗a⊗a`.
    pub fn quad(a: &Vec3) -> Self {
        let mut t = Self::default();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        t.set(i, j, k, l, a[i] * a[j] * a[k] * a[l]);
                    }
                }
            }
        }
        t
    }

    /// `(𝔸:B)_ij = A_ijkl B_kl`.
    pub fn contract(&self, b: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += self.get(i, j, k, l) * b[(k, l)];
                    }
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    /// `(Q★𝔸)_ijkl = Q_ia Q_jb Q_kc Q_ld A_abcd`.
    pub fn rotate(&self, q: &Tensor2) -> Self {
        let mut cur = self.data;
        // apply Q on one index at a time
        for slot in 0..4 {
            let mut next = [0.0; 81];
            for n in 0..81 {
                let mut ix = [n / 27, (n / 9) % 3, (n / 3) % 3, n % 3];
                let target = ix[slot];
                let mut s = 0.0;
                for a in 0..3 {
                    ix[slot] = a;
                    s += q[(target, a)] * cur[Self::idx(ix[0], ix[1], ix[2], ix[3])];
                }
                next[n] = s;
            }
            cur = next;
        }
        Self { data: cur }
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Rank-one form `(a⊗b):𝔸:(a⊗b)`.
    pub fn rank_one(&self, a: &Vec3, b: &Vec3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for al in 0..3 {
                for j in 0..3 {
                    for be in 0..3 {
                        s += self.get(i, al, j, be) * a[i] * b[al] * a[j] * b[be];
                    }
                }
            }
        }
        s
    }

    /// Acoustic tensor `Q_ij = A_iαjβ n_α n_β`.
    pub fn acoustic(&self, n: &Vec3) -> Tensor2 {
        let mut q = Tensor2::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for al in 0..3 {
                    for be in 0..3 {
                        s += self.get(i, al, j, be) * n[al] * n[be];
                    }
                }
                q[(i, j)] = s;
            }
        }
        q
    }
}

impl std::ops::AddAssign<&Tensor4> for Tensor4 {
    fn add_assign(&mut self, rhs: &Tensor4) {
        for (a, b) in self.data.iter_mut().zip(rhs.data.iter()) {
            *a += b;
        }
    }
}

/// Rotation about unit `axis` by `angle` (Rodrigues).
pub fn axis_rotation(axis: &Vec3, angle: f64) -> Tensor2 {
    let k = axis.normalize();
    let kx = Tensor2::new(0.0, -k[2], k[1], k[2], 0.0, -k[0], -k[1], k[0], 0.0);
    Tensor2::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}

/// Uniformly distributed proper rotation from a random unit quaternion.
pub fn random_rotation<R: rand::Rng + ?Sized>(rng: &mut R) -> Tensor2 {
    let q = loop {
        let v: [f64; 4] = std::array::from_fn(|_| 2.0 * rng.random::<f64>() - 1.0);
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            break [v[0] / n, v[1] / n, v[2] / n, v[3] / n];
        }
    };
    let [w, x, y, z] = q;
    Tensor2::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// `I + A` with entries of `A` uniform in `[-amp, amp]`, rejected unless
/// `det F` lies in `[j_lo, j_hi]`.
pub fn random_deformation<R: rand::Rng + ?Sized>(rng: &mut R, amp: f64, j_lo: f64, j_hi: f64) -> Tensor2 {
    loop {
        let f = Tensor2::identity() + Tensor2::from_fn(|_, _| rng.random_range(-amp..=amp));
        let d = f.determinant();
        if d >= j_lo && d <= j_hi {
            return f;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(i: usize, j: usize) -> Tensor2 {
        let mut t = Tensor2::zeros();
        t[(i, j)] = 1.0;
        t
    }

    #[test]
    fn cofactor_examples() {
        let d = Tensor2::from_diagonal(&Vec3::new(2.0, 3.0, 4.0));
        assert_eq!(cofactor(&d), Tensor2::from_diagonal(&Vec3::new(12.0, 8.0, 6.0)));
        assert_eq!(cofactor(&Tensor2::identity()), Tensor2::identity());
        let f = Tensor2::identity() + e(0, 1) * 0.2;
        let expect = Tensor2::identity() - e(1, 0) * 0.2;
        assert_relative_eq!(cofactor(&f), expect, epsilon = 1e-15);
    }

    #[test]
    fn cofactor_of_singular_matrix_is_defined() {
        let a = Tensor2::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0);
        let h = cofactor(&a);
        assert_relative_eq!(h * a.transpose(), Tensor2::zeros(), epsilon = 1e-14);
    }

    #[test]
    fn bundle_examples() {
        let f = Tensor2::from_diagonal(&Vec3::new(1.1, 0.9, 1.0));
        let kb = bundle(&f).unwrap();
        assert_relative_eq!(kb.j, 0.99, epsilon = 1e-15);
        assert_relative_eq!(kb.c, Tensor2::from_diagonal(&Vec3::new(1.21, 0.81, 1.0)), epsilon = 1e-15);
        assert_relative_eq!(kb.g, Tensor2::from_diagonal(&Vec3::new(0.81, 1.21, 0.9801)), epsilon = 1e-15);

        let kb = bundle(&Tensor2::identity()).unwrap();
        assert_eq!((kb.c, kb.g, kb.h, kb.j), (Tensor2::identity(), Tensor2::identity(), Tensor2::identity(), 1.0));

        let bad = Tensor2::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
        assert!(matches!(bundle(&bad), Err(Error::NonPositiveJacobian(_))));
    }

    #[test]
    fn cross_examples() {
        let i = Tensor2::identity();
        assert_eq!(tensor_cross(&i, &i), i * 2.0);
        let a = Tensor2::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0);
        assert_eq!(tensor_cross(&a, &Tensor2::zeros()), Tensor2::zeros());
        let f = Tensor2::from_diagonal(&Vec3::new(1.1, 0.9, 1.0));
        let half = tensor_cross(&f, &f) * 0.5;
        assert_relative_eq!(half, Tensor2::from_diagonal(&Vec3::new(0.9, 1.1, 0.99)), epsilon = 1e-15);
    }

    #[test]
    fn cross_matches_permutation_symbols() {
        fn eps(i: usize, j: usize, k: usize) -> f64 {
            ((j as f64 - i as f64) * (k as f64 - i as f64) * (k as f64 - j as f64)) / 2.0
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Tensor2::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let b = Tensor2::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let mut brute = Tensor2::zeros();
        for i in 0..3 {
            for p in 0..3 {
                let mut s = 0.0;
                for j in 0..3 {
                    for k in 0..3 {
                        for q in 0..3 {
                            for r in 0..3 {
                                s += eps(i, j, k) * eps(p, q, r) * a[(j, q)] * b[(k, r)];
                            }
                        }
                    }
                }
                brute[(i, p)] = s;
            }
        }
        assert_relative_eq!(tensor_cross(&a, &b), brute, epsilon = 1e-14);
    }

    #[test]
    fn bulk_kinematic_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let f = random_deformation(&mut rng, 0.6, 0.3, 3.0);
            let kb = bundle(&f).unwrap();
            assert!((kb.g - kb.h.transpose() * kb.h).norm() <= 1e-12 * kb.g.norm());
            assert!((kb.j * kb.j - kb.c.determinant()).abs() <= 1e-12 * kb.j * kb.j);
            let j6 = ddot(&f, &tensor_cross(&f, &f)) / 6.0;
            assert!((kb.j - j6).abs() <= 1e-12 * kb.j);
            assert_eq!(kb.c, kb.c.transpose());
            assert_eq!(kb.g, kb.g.transpose());
        }
    }

    #[test]
    fn cofactor_commutes_with_cubic_rotations() {
        let rs = crate::symmetry::group_elements(crate::GroupId::Cub, &crate::PreferredFrame::standard()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let f = random_deformation(&mut rng, 0.4, 0.3, 3.0);
            for q in &rs.elements {
                let lhs = cofactor(&(q * f));
                let rhs = q * cofactor(&f);
                assert!((lhs - rhs).abs().max() <= 1e-12);
            }
        }
    }

    #[test]
    fn tensor4_rotation_of_isotropic_quad_sum() {
        let mut t = Tensor4::default();
        for i in 0..3 {
            let mut n = Vec3::zeros();
            n[i] = 1.0;
            t += &Tensor4::quad(&n);
        }
        let q = axis_rotation(&Vec3::z(), std::f64::consts::FRAC_PI_2);
        let r = t.rotate(&q);
        for (a, b) in r.data.iter().zip(t.data.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_relative_eq!(t.contract(&Tensor2::identity()), Tensor2::identity());
    }

    proptest! {
        #[test]
        fn cross_is_bilinear_and_symmetric(a in prop::array::uniform9(-2.0..2.0f64),
                                           b in prop::array::uniform9(-2.0..2.0f64),
                                           s in -3.0..3.0f64) {
            let a = from_row_major(&a);
            let b = from_row_major(&b);
            let ab = tensor_cross(&a, &b);
            prop_assert!((ab - tensor_cross(&b, &a)).abs().max() < 1e-13);
            prop_assert!((tensor_cross(&(a * s), &b) - ab * s).abs().max() < 1e-12);
        }

        #[test]
        fn cofactor_transposes_adjugate(a in prop::array::uniform9(-2.0..2.0f64)) {
            let a = from_row_major(&a);
            let lhs = cofactor(&a) * a.transpose();
            let rhs = Tensor2::identity() * a.determinant();
            prop_assert!((lhs - rhs).abs().max() < 1e-12);
            prop_assert!((cofactor(&a) - tensor_cross(&a, &a) * 0.5).abs().max() < 1e-13);
        }

        #[test]
        fn row_major_round_trip(a in prop::array::uniform9(-1e3..1e3f64)) {
            prop_assert_eq!(to_row_major(&from_row_major(&a)), a);
        }
    }
}
