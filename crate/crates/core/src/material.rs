//! Common interface of hyperelastic potentials (reference materials and PANN
//! models) and a few closed-form test materials.

use crate::kinematics::{Tensor2, Tensor4};
use crate::Result;

pub trait Hyperelastic {
    fn potential(&self, f: &Tensor2) -> Result<f64>;

    /// First Piola-Kirchhoff stress `∂W/∂F`.
    fn stress(&self, f: &Tensor2) -> Result<Tensor2>;

    /// Tangent `∂P/∂F` by central differences of the stress.
    fn tangent(&self, f: &Tensor2) -> Result<Tensor4> {
        fd_tangent(|x| self.stress(x), f, 1e-6 * (1.0 + f.norm()))
    }
}

/// Central-difference tangent of a stress function.
pub fn fd_tangent(stress: impl Fn(&Tensor2) -> Result<Tensor2>, f: &Tensor2, h: f64) -> Result<Tensor4> {
    let mut a = Tensor4::default();
    for k in 0..3 {
        for l in 0..3 {
            let (mut fp, mut fm) = (*f, *f);
            fp[(k, l)] += h;
            fm[(k, l)] -= h;
            let d = (stress(&fp)? - stress(&fm)?) / (2.0 * h);
            for i in 0..3 {
                for j in 0..3 {
                    a.set(i, j, k, l, d[(i, j)]);
                }
            }
        }
    }
    Ok(a)
}

/// Central-difference gradient of a potential.
pub fn fd_stress(potential: impl Fn(&Tensor2) -> Result<f64>, f: &Tensor2, h: f64) -> Result<Tensor2> {
    let mut p = Tensor2::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let (mut fp, mut fm) = (*f, *f);
            fp[(i, j)] += h;
            fm[(i, j)] -= h;
            p[(i, j)] = (potential(&fp)? - potential(&fm)?) / (2.0 * h);
        }
    }
    Ok(p)
}

/// Fourth-order central-difference gradient of a potential.
pub fn fd_stress4(potential: impl Fn(&Tensor2) -> Result<f64>, f: &Tensor2, h: f64) -> Result<Tensor2> {
    let mut p = Tensor2::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let at = |d: f64| {
                let mut x = *f;
                x[(i, j)] += d;
                potential(&x)
            };
            p[(i, j)] = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
        }
    }
    Ok(p)
}

/// `W = μ/2 ‖F‖²`, tangent `μ δᵢⱼ δ_αβ`.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticDirichlet {
    pub mu: f64,
}

impl Hyperelastic for QuadraticDirichlet {
    fn potential(&self, f: &Tensor2) -> Result<f64> {
        Ok(0.5 * self.mu * f.norm_squared())
    }

    fn stress(&self, f: &Tensor2) -> Result<Tensor2> {
        Ok(f * self.mu)
    }

    fn tangent(&self, _f: &Tensor2) -> Result<Tensor4> {
        let mut a = Tensor4::default();
        for i in 0..3 {
            for k in 0..3 {
                a.set(i, k, i, k, self.mu);
            }
        }
        Ok(a)
    }
}

/// `W = C₁₂ = Σₖ Fₖ₁Fₖ₂`, rank-one convexity fails for `a = e3`, `b = e1 - e2`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ShearCoupling;

impl Hyperelastic for ShearCoupling {
    fn potential(&self, f: &Tensor2) -> Result<f64> {
        Ok((0..3).map(|k| f[(k, 0)] * f[(k, 1)]).sum())
    }

    fn stress(&self, f: &Tensor2) -> Result<Tensor2> {
        let mut p = Tensor2::zeros();
        for k in 0..3 {
            p[(k, 0)] = f[(k, 1)];
            p[(k, 1)] = f[(k, 0)];
        }
        Ok(p)
    }

    fn tangent(&self, _f: &Tensor2) -> Result<Tensor4> {
        let mut a = Tensor4::default();
        for k in 0..3 {
            a.set(k, 0, k, 1, 1.0);
            a.set(k, 1, k, 0, 1.0);
        }
        Ok(a)
    }
}
