//! Dense softplus networks with optional convexity (ICNN) and
//! convexity + monotonicity (CMNN) structure.
//!
//! Layers `1..=H` are hidden softplus layers, layer `H+1` is a linear output
//! without bias. Non-negativity is imposed on the *effective* weights, which
//! are `softplus(raw)` under [`Positivity::Softplus`] and `raw` itself under
//! [`Positivity::Clip`] (raw values are clipped at zero after optimizer steps).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    Unconstrained,
    /// Effective weights of layers 2..=H+1 non-negative.
    Convex,
    /// All effective weights non-negative.
    ConvexMonotone,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Positivity {
    #[default]
    Softplus,
    Clip,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub input_width: usize,
    pub hidden: Vec<usize>,
    pub mode: ConstraintMode,
    #[serde(default)]
    pub positivity: Positivity,
}

impl ArchitectureSpec {
    pub fn new(input_width: usize, hidden: &[usize], mode: ConstraintMode) -> Self {
        Self { input_width, hidden: hidden.to_vec(), mode, positivity: Positivity::Softplus }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.input_width == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidParams(format!("invalid architecture {:?}", self)));
        }
        Ok(())
    }

    /// Whether layer `l` (0-based, `hidden.len()` is the output layer) is sign-constrained.
    pub fn constrained(&self, l: usize) -> bool {
        match self.mode {
            ConstraintMode::Unconstrained => false,
            ConstraintMode::Convex => l >= 1,
            ConstraintMode::ConvexMonotone => true,
        }
    }

    pub fn parameter_count(&self) -> usize {
        let mut n = 0;
        let mut prev = self.input_width;
        for &w in &self.hidden {
            n += prev * w + w;
            prev = w;
        }
        n + prev
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    /// Row-major `n_out × n_in`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkParams {
    pub spec: ArchitectureSpec,
    pub layers: Vec<Layer>,
    /// Raw output weights (no bias).
    pub output: Vec<f64>,
    pub seed: u64,
}

#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Inverse of softplus for `y > 0`.
fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

impl NetworkParams {
    /// Biases zero; unconstrained raw weights uniform in `[-1, 1]/√fan_in`;
    /// constrained layers get effective weights uniform in `(0, 1/√fan_in]`.
    pub fn init(spec: &ArchitectureSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |n: usize, fan_in: usize, constrained: bool, rng: &mut ChaCha8Rng| -> Vec<f64> {
            let s = 1.0 / (fan_in as f64).sqrt();
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random_range(-1.0..=1.0);
                    if constrained {
                        // shift [-1, 1] to (0, 1]
                        let eff = s * (0.5 * (u + 1.0)).max(1e-3);
                        match spec.positivity {
                            Positivity::Softplus => softplus_inv(eff),
                            Positivity::Clip => eff,
                        }
                    } else {
                        s * u
                    }
                })
                .collect()
        };
        let mut layers = Vec::with_capacity(spec.hidden.len());
        let mut prev = spec.input_width;
        for (l, &w) in spec.hidden.iter().enumerate() {
            let weights = draw(w * prev, prev, spec.constrained(l), &mut rng);
            layers.push(Layer { weights, biases: vec![0.0; w] });
            prev = w;
        }
        let output = draw(prev, prev, spec.constrained(spec.hidden.len()), &mut rng);
        Ok(Self { spec: spec.clone(), layers, output, seed })
    }

    pub fn parameter_count(&self) -> usize {
        self.spec.parameter_count()
    }

    fn effective(&self, l: usize, raw: f64) -> f64 {
        if self.spec.constrained(l) && self.spec.positivity == Positivity::Softplus {
            softplus(raw)
        } else {
            raw
        }
    }

    /// Network with effective weights resolved, ready for evaluation.
    pub fn dense(&self) -> Dense {
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut prev = self.spec.input_width;
        for (l, layer) in self.layers.iter().enumerate() {
            let n_out = layer.biases.len();
            layers.push(DenseLayer {
                w: layer.weights.iter().map(|&r| self.effective(l, r)).collect(),
                b: layer.biases.clone(),
                n_in: prev,
                n_out,
            });
            prev = n_out;
        }
        let h = self.layers.len();
        Dense { layers, out: self.output.iter().map(|&r| self.effective(h, r)).collect() }
    }

    /// Flat view in the order W¹, b¹, W², b², …, w^{H+1}.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        for layer in &self.layers {
            v.extend_from_slice(&layer.weights);
            v.extend_from_slice(&layer.biases);
        }
        v.extend_from_slice(&self.output);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch { expected: self.parameter_count(), got: v.len() });
        }
        let mut k = 0;
        for layer in &mut self.layers {
            for x in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *x = v[k];
                k += 1;
            }
        }
        self.output.copy_from_slice(&v[k..]);
        Ok(())
    }

    /// Converts a gradient w.r.t. effective weights (flat layout) into a
    /// gradient w.r.t. raw parameters, in place.
    pub fn pullback(&self, grad: &mut [f64]) {
        if self.spec.positivity != Positivity::Softplus {
            return;
        }
        let mut k = 0;
        for (l, layer) in self.layers.iter().enumerate() {
            if self.spec.constrained(l) {
                for (g, &r) in grad[k..k + layer.weights.len()].iter_mut().zip(&layer.weights) {
                    *g *= sigmoid(r);
                }
            }
            k += layer.weights.len() + layer.biases.len();
        }
        if self.spec.constrained(self.layers.len()) {
            for (g, &r) in grad[k..].iter_mut().zip(&self.output) {
                *g *= sigmoid(r);
            }
        }
    }

    /// Clips raw constrained weights at zero (only meaningful for [`Positivity::Clip`]).
    pub fn project(&mut self) {
        if self.spec.positivity != Positivity::Clip {
            return;
        }
        let h = self.layers.len();
        for l in 0..h {
            if self.spec.constrained(l) {
                self.layers[l].weights.iter_mut().for_each(|w| *w = w.max(0.0));
            }
        }
        if self.spec.constrained(h) {
            self.output.iter_mut().for_each(|w| *w = w.max(0.0));
        }
    }

    /// First constrained effective weight that is negative, as `(layer, index, value)`
    /// with 1-based layer numbering.
    pub fn sign_violation(&self) -> Option<(usize, usize, f64)> {
        let d = self.dense();
        for (l, layer) in d.layers.iter().enumerate() {
            if self.spec.constrained(l) {
                if let Some((i, &w)) = layer.w.iter().enumerate().find(|(_, &w)| w < 0.0) {
                    return Some((l + 1, i, w));
                }
            }
        }
        if self.spec.constrained(d.layers.len()) {
            if let Some((i, &w)) = d.out.iter().enumerate().find(|(_, &w)| w < 0.0) {
                return Some((d.layers.len() + 1, i, w));
            }
        }
        None
    }
}

#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub n_in: usize,
    pub n_out: usize,
}

/// Network with effective weights; gradient buffers use the flat layout of
/// [`NetworkParams::to_flat`].
#[derive(Clone, Debug)]
pub struct Dense {
    pub layers: Vec<DenseLayer>,
    pub out: Vec<f64>,
}

/// Reusable scratch buffers for [`Dense`] evaluations.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    z: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    zd: Vec<Vec<f64>>,
    ad: Vec<Vec<f64>>,
    bar: Vec<f64>,
    dot_bar: Vec<f64>,
    tmp: Vec<f64>,
    tmp2: Vec<f64>,
}

impl Dense {
    pub fn input_width(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum::<usize>() + self.out.len()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::DimensionMismatch { expected: self.input_width(), got: x.len() });
        }
        Ok(())
    }

    fn forward_ws(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        let h = self.layers.len();
        ws.z.resize(h, Vec::new());
        ws.a.resize(h, Vec::new());
        for l in 0..h {
            let layer = &self.layers[l];
            let (prev, cur) = ws.a.split_at_mut(l);
            let (z, a) = (&mut ws.z[l], &mut cur[0]);
            z.clear();
            a.clear();
            let input: &[f64] = if l == 0 { x } else { &prev[l - 1] };
            for i in 0..layer.n_out {
                let row = &layer.w[i * layer.n_in..(i + 1) * layer.n_in];
                let s = layer.b[i] + row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>();
                z.push(s);
                a.push(softplus(s));
            }
        }
        self.out.iter().zip(&ws.a[h - 1]).map(|(w, a)| w * a).sum()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.forward_ws(x, &mut Workspace::default()))
    }

    /// Value and input gradient.
    pub fn gradient_ws(&self, x: &[f64], ws: &mut Workspace, grad: &mut [f64]) -> f64 {
        let v = self.forward_ws(x, ws);
        let h = self.layers.len();
        ws.bar.clear();
        ws.bar.extend_from_slice(&self.out);
        for l in (0..h).rev() {
            let layer = &self.layers[l];
            // z̄ = ā ⊙ σ'(z)
            for (b, &z) in ws.bar.iter_mut().zip(&ws.z[l]) {
                *b *= sigmoid(z);
            }
            ws.tmp.clear();
            ws.tmp.resize(layer.n_in, 0.0);
            for i in 0..layer.n_out {
                let zb = ws.bar[i];
                let row = &layer.w[i * layer.n_in..(i + 1) * layer.n_in];
                for (t, w) in ws.tmp.iter_mut().zip(row) {
                    *t += w * zb;
                }
            }
            std::mem::swap(&mut ws.bar, &mut ws.tmp);
        }
        grad.copy_from_slice(&ws.bar);
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(x)?;
        let mut g = vec![0.0; x.len()];
        let v = self.gradient_ws(x, &mut Workspace::default(), &mut g);
        Ok((v, g))
    }

    /// Accumulates `∂forward/∂θ` (effective parameters) into `grad`.
    pub fn accumulate_value_param_grad(&self, x: &[f64], scale: f64, ws: &mut Workspace, grad: &mut [f64]) {
        self.forward_ws(x, ws);
        let h = self.layers.len();
        let offsets = self.offsets();
        let out_off = offsets[h];
        for (g, a) in grad[out_off..].iter_mut().zip(&ws.a[h - 1]) {
            *g += scale * a;
        }
        ws.bar.clear();
        ws.bar.extend(self.out.iter().map(|w| w * scale));
        for l in (0..h).rev() {
            let layer = &self.layers[l];
            for (b, &z) in ws.bar.iter_mut().zip(&ws.z[l]) {
                *b *= sigmoid(z);
            }
            let input: &[f64] = if l == 0 { x } else { &ws.a[l - 1] };
            let off = offsets[l];
            ws.tmp.clear();
            ws.tmp.resize(layer.n_in, 0.0);
            for i in 0..layer.n_out {
                let zb = ws.bar[i];
                let base = off + i * layer.n_in;
                for j in 0..layer.n_in {
                    grad[base + j] += zb * input[j];
                    ws.tmp[j] += layer.w[i * layer.n_in + j] * zb;
                }
                grad[off + layer.w.len() + i] += zb;
            }
            std::mem::swap(&mut ws.bar, &mut ws.tmp);
        }
    }

    /// Accumulates `∂(v·∇ₓforward)/∂θ` into `grad` (effective parameters).
    /// When `hv` is given, `∇ₓ(v·∇ₓforward) = ∇²forward·v` is written to it.
    pub fn accumulate_input_grad_param_grad(
        &self,
        x: &[f64],
        v: &[f64],
        ws: &mut Workspace,
        grad: &mut [f64],
        hv: Option<&mut [f64]>,
    ) {
        self.forward_ws(x, ws);
        let h = self.layers.len();
        let offsets = self.offsets();
        // tangent pass: ż = W ȧ, ȧ = σ'(z) ⊙ ż
        ws.zd.resize(h, Vec::new());
        ws.ad.resize(h, Vec::new());
        for l in 0..h {
            let layer = &self.layers[l];
            let (prev, cur) = ws.ad.split_at_mut(l);
            let input: &[f64] = if l == 0 { v } else { &prev[l - 1] };
            let (zd, ad) = (&mut ws.zd[l], &mut cur[0]);
            zd.clear();
            ad.clear();
            for i in 0..layer.n_out {
                let row = &layer.w[i * layer.n_in..(i + 1) * layer.n_in];
                let s: f64 = row.iter().zip(input).map(|(w, u)| w * u).sum();
                zd.push(s);
                ad.push(sigmoid(ws.z[l][i]) * s);
            }
        }
        // s = w·ȧ_H
        let out_off = offsets[h];
        for (g, a) in grad[out_off..].iter_mut().zip(&ws.ad[h - 1]) {
            *g += a;
        }
        // ǡ (adjoint of tangent activations) and ā (adjoint of primal activations)
        ws.dot_bar.clear();
        ws.dot_bar.extend_from_slice(&self.out);
        ws.bar.clear();
        ws.bar.resize(self.layers[h - 1].n_out, 0.0);
        for l in (0..h).rev() {
            let layer = &self.layers[l];
            let n_in = layer.n_in;
            let input: &[f64] = if l == 0 { x } else { &ws.a[l - 1] };
            let input_dot: &[f64] = if l == 0 { v } else { &ws.ad[l - 1] };
            let off = offsets[l];
            ws.tmp.clear();
            ws.tmp.resize(n_in, 0.0);
            ws.tmp2.clear();
            ws.tmp2.resize(n_in, 0.0);
            for i in 0..layer.n_out {
                let z = ws.z[l][i];
                let s1 = sigmoid(z);
                let s2 = s1 * (1.0 - s1);
                let zd_bar = ws.dot_bar[i] * s1;
                let z_bar = ws.dot_bar[i] * s2 * ws.zd[l][i] + ws.bar[i] * s1;
                let base = off + i * n_in;
                let row = &layer.w[i * n_in..(i + 1) * n_in];
                for j in 0..n_in {
                    grad[base + j] += zd_bar * input_dot[j] + z_bar * input[j];
                    ws.tmp[j] += row[j] * zd_bar;
                    ws.tmp2[j] += row[j] * z_bar;
                }
                grad[off + layer.w.len() + i] += z_bar;
            }
            std::mem::swap(&mut ws.dot_bar, &mut ws.tmp);
            std::mem::swap(&mut ws.bar, &mut ws.tmp2);
        }
        if let Some(out) = hv {
            out.copy_from_slice(&ws.bar);
        }
    }

    /// Flat offsets of each layer block; the last entry is the output block.
    pub fn offsets(&self) -> Vec<usize> {
        let mut o = Vec::with_capacity(self.layers.len() + 1);
        let mut k = 0;
        for l in &self.layers {
            o.push(k);
            k += l.w.len() + l.b.len();
        }
        o.push(k);
        o
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check(x)?;
        let n = x.len();
        let mut ws = Workspace::default();
        let mut scratch = vec![0.0; self.parameter_count()];
        let mut out = vec![vec![0.0; n]; n];
        let mut e = vec![0.0; n];
        for i in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[i] = 1.0;
            self.accumulate_input_grad_param_grad(x, &e, &mut ws, &mut scratch, Some(&mut out[i]));
        }
        Ok(out)
    }
}

pub fn forward(p: &NetworkParams, x: &[f64]) -> Result<f64> {
    p.dense().value(x)
}

pub fn input_gradient(p: &NetworkParams, x: &[f64]) -> Result<Vec<f64>> {
    Ok(p.dense().gradient(x)?.1)
}

pub fn input_hessian(p: &NetworkParams, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    p.dense().hessian(x)
}

/// `∂forward/∂θ` w.r.t. raw parameters, flat layout.
pub fn param_gradient_of_value(p: &NetworkParams, x: &[f64]) -> Result<Vec<f64>> {
    let d = p.dense();
    d.check(x)?;
    let mut g = vec![0.0; p.parameter_count()];
    d.accumulate_value_param_grad(x, 1.0, &mut Workspace::default(), &mut g);
    p.pullback(&mut g);
    Ok(g)
}

/// `∂(cotangent·∇ₓforward)/∂θ` w.r.t. raw parameters, flat layout.
pub fn param_gradient_of_input_gradient(p: &NetworkParams, x: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
    let d = p.dense();
    d.check(x)?;
    d.check(cotangent)?;
    let mut g = vec![0.0; p.parameter_count()];
    d.accumulate_input_grad_param_grad(x, cotangent, &mut Workspace::default(), &mut g, None);
    p.pullback(&mut g);
    Ok(g)
}
