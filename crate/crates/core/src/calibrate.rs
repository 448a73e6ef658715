//! Calibration of PANN models on `(F, P)` data with the stress MSE loss
//! `(1/m) Σ ‖P − P_model‖²/9` and minibatched ADAM over several restarts.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::data::{Dataset, Record, Split};
use crate::kinematics::{ddot, Tensor2};
use crate::network::{NetworkParams, Positivity};
use crate::pann::{PannModel, PointFeatures, Scratch};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Lowest test loss, falling back to calibration loss without test data.
    #[default]
    Test,
    Calibration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub shuffle: bool,
    pub restarts: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Full-batch ADAM steps after the minibatch stage; 0 disables it.
    pub refinement_steps: usize,
    pub refinement_learning_rate: f64,
    pub select_on: Selection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-3,
            steps: 250_000,
            batch_size: 32,
            shuffle: true,
            restarts: 5,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            refinement_steps: 0,
            refinement_learning_rate: 5e-4,
            select_on: Selection::Test,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.batch_size > 0
            && self.restarts > 0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.refinement_learning_rate > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid training configuration {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartReport {
    pub index: usize,
    pub init_seed: u64,
    pub calibration_mse: Option<f64>,
    pub test_mse: Option<f64>,
    /// Set when the restart aborted.
    pub failure: Option<String>,
    /// Minibatch loss per step, then full-batch loss per refinement step.
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossReport {
    pub calibration_mse: f64,
    pub test_mse: Option<f64>,
    pub log10_calibration_mse: f64,
    pub log10_test_mse: Option<f64>,
    pub selected: usize,
    pub select_on: Selection,
    pub restarts: Vec<RestartReport>,
}

/// Squared Frobenius error over 9, averaged over records.
pub fn loss<M: crate::material::Hyperelastic + ?Sized>(m: &M, records: &[Record]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for r in records {
        total += (m.stress(&r.f)? - r.p).norm_squared() / 9.0;
    }
    Ok(total / records.len() as f64)
}

/// ADAM moments and step counter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One bias-corrected ADAM update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], lr: f64, beta1: f64, beta2: f64, eps: f64) {
    state.t += 1;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        params[i] -= lr * (state.m[i] / c1) / ((state.v[i] / c2).sqrt() + eps);
    }
}

/// Cached inputs and target stress of one record.
#[derive(Clone, Debug)]
pub struct CachedRecord {
    pub features: PointFeatures,
    pub target: Tensor2,
}

pub fn cache_records(m: &PannModel, records: &[Record]) -> Result<Vec<CachedRecord>> {
    records
        .par_iter()
        .map(|r| Ok(CachedRecord { features: m.features(&r.f)?, target: r.p }))
        .collect()
}

/// Reusable buffers for [`loss_and_gradient`].
#[derive(Clone, Debug, Default)]
pub struct GradScratch {
    sc: Scratch,
    u: Vec<f64>,
}

/// Loss over `batch` and its gradient with respect to the raw network
/// parameters, including the dependence of the normalization on them.
pub fn loss_and_gradient(m: &PannModel, data: &[CachedRecord], batch: &[usize], gs: &mut GradScratch, grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    gs.u.clear();
    gs.u.resize(m.reference_input().len(), 0.0);
    let inv = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for &i in batch {
        let r = &data[i];
        let diff = m.stress_from(&r.features, &mut gs.sc) - r.target;
        total += ddot(&diff, &diff) / 9.0;
        let pbar = diff * (2.0 * inv / 9.0);
        m.accumulate_stress_gradient(&r.features, &pbar, &mut gs.sc, grad, &mut gs.u);
    }
    m.apply_normalization_cotangent(&gs.u, &mut gs.sc, grad);
    m.params().pullback(grad);
    total * inv
}

/// Loss over cached records.
pub fn cached_loss(m: &PannModel, data: &[CachedRecord]) -> f64 {
    let mut sc = Scratch::default();
    let total: f64 = data.iter().map(|r| (m.stress_from(&r.features, &mut sc) - r.target).norm_squared() / 9.0).sum();
    total / data.len() as f64
}

/// Visits records in epochs; every epoch is a (shuffled) permutation, the
/// last batch of an epoch may be short.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    shuffle: bool,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(n: usize, shuffle: bool, seed: u64) -> Self {
        let mut s = Self { order: (0..n).collect(), pos: 0, shuffle, rng: ChaCha8Rng::seed_from_u64(seed) };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        if self.shuffle {
            self.order.shuffle(&mut self.rng);
        }
    }

    pub fn next_batch(&mut self, size: usize, out: &mut Vec<usize>) {
        if self.pos >= self.order.len() {
            self.pos = 0;
            self.reshuffle();
        }
        let end = (self.pos + size).min(self.order.len());
        out.clear();
        out.extend_from_slice(&self.order[self.pos..end]);
        self.pos = end;
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Initialization seed of restart `k`; restart 0 keeps the initial model.
pub fn restart_seed(seed: u64, k: usize) -> u64 {
    splitmix64(seed ^ splitmix64(k as u64))
}

struct RestartOutcome {
    report: RestartReport,
    params: Option<NetworkParams>,
}

fn run_restart(m0: &PannModel, cal: &[CachedRecord], test: &[CachedRecord], cfg: &TrainConfig, k: usize) -> Result<RestartOutcome> {
    let init_seed = if k == 0 { m0.params().seed } else { restart_seed(cfg.seed, k) };
    let mut m = m0.clone();
    if k > 0 {
        m.set_params(NetworkParams::init(&m0.params().spec, init_seed)?)?;
    }
    let n = m.parameter_count();
    let mut flat = m.params().to_flat();
    let mut grad = vec![0.0; n];
    let mut gs = GradScratch::default();
    let mut adam = AdamState::new(n);
    let mut sampler = BatchSampler::new(cal.len(), cfg.shuffle, splitmix64(init_seed ^ cfg.seed));
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let all: Vec<usize> = (0..cal.len()).collect();
    let mut history = Vec::with_capacity(cfg.steps + cfg.refinement_steps);
    let clip = m.params().spec.positivity == Positivity::Clip;

    let stages = [(cfg.steps, cfg.learning_rate, false), (cfg.refinement_steps, cfg.refinement_learning_rate, true)];
    for (steps, lr, full) in stages {
        for _ in 0..steps {
            let idx: &[usize] = if full {
                &all
            } else {
                sampler.next_batch(cfg.batch_size, &mut batch);
                &batch
            };
            let l = loss_and_gradient(&m, cal, idx, &mut gs, &mut grad);
            if !l.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                let step = history.len();
                history.push(l);
                let report = RestartReport {
                    index: k,
                    init_seed,
                    calibration_mse: None,
                    test_mse: None,
                    failure: Some(Error::NonFiniteLoss(step).to_string()),
                    history,
                };
                return Ok(RestartOutcome { report, params: None });
            }
            history.push(l);
            adam_step(&mut adam, &mut flat, &grad, lr, cfg.beta1, cfg.beta2, cfg.epsilon);
            if clip {
                let mut p = m.params().clone();
                p.set_flat(&flat)?;
                p.project();
                flat = p.to_flat();
            }
            m.set_flat_params(&flat)?;
        }
    }
    let report = RestartReport {
        index: k,
        init_seed,
        calibration_mse: Some(cached_loss(&m, cal)),
        test_mse: (!test.is_empty()).then(|| cached_loss(&m, test)),
        failure: None,
        history,
    };
    Ok(RestartOutcome { report, params: Some(m.params().clone()) })
}

/// Calibrates `m0` on the calibration split of `ds`. Restarts run in
/// parallel and are independent; the result does not depend on the thread
/// count.
pub fn train(m0: &PannModel, ds: &Dataset, cfg: &TrainConfig) -> Result<(PannModel, LossReport)> {
    cfg.validate()?;
    let cal = cache_records(m0, &ds.calibration())?;
    let test = cache_records(m0, &ds.test())?;
    if cal.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let outcomes = (0..cfg.restarts)
        .into_par_iter()
        .map(|k| run_restart(m0, &cal, &test, cfg, k))
        .collect::<Result<Vec<_>>>()?;

    let metric = |r: &RestartReport| match cfg.select_on {
        Selection::Test => r.test_mse.or(r.calibration_mse),
        Selection::Calibration => r.calibration_mse,
    };
    let selected = outcomes
        .iter()
        .filter_map(|o| metric(&o.report).filter(|v| v.is_finite()).map(|v| (o.report.index, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or(Error::NonFiniteLoss(0))?;

    let mut model = m0.clone();
    model.set_params(outcomes[selected].params.clone().expect("selected restart finished"))?;
    let best = &outcomes[selected].report;
    let calibration_mse = best.calibration_mse.expect("selected restart finished");
    let report = LossReport {
        calibration_mse,
        test_mse: best.test_mse,
        log10_calibration_mse: calibration_mse.log10(),
        log10_test_mse: best.test_mse.map(f64::log10),
        selected,
        select_on: cfg.select_on,
        restarts: outcomes.into_iter().map(|o| o.report).collect(),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, preset, ReferenceMaterial};
    use crate::material::Hyperelastic;
    use crate::pann::{ModelOptions, Variant};
    use crate::symmetry::{GroupId, PreferredFrame};
    use approx::assert_relative_eq;

    struct Fixed(Tensor2);

    impl Hyperelastic for Fixed {
        fn potential(&self, f: &Tensor2) -> Result<f64> {
            Ok(ddot(&self.0, f))
        }
        fn stress(&self, _f: &Tensor2) -> Result<Tensor2> {
            Ok(self.0)
        }
    }

    fn rec(p: Tensor2) -> Record {
        Record { f: Tensor2::identity(), p, split: Split::Calibration }
    }

    #[test]
    fn loss_examples() {
        let z = Fixed(Tensor2::zeros());
        assert_eq!(loss(&z, &[rec(Tensor2::zeros())]).unwrap(), 0.0);
        assert_eq!(loss(&z, &[rec(Tensor2::from_element(1.0))]).unwrap(), 1.0);
        let off = Tensor2::from_diagonal_element(3f64.sqrt());
        assert_relative_eq!(loss(&z, &[rec(off), rec(Tensor2::zeros())]).unwrap(), 0.5, epsilon = 1e-15);
        assert!(matches!(loss(&z, &[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn adam_examples() {
        let mut s = AdamState::new(1);
        let mut p = [1.0];
        adam_step(&mut s, &mut p, &[2.0], 0.01, 0.9, 0.999, 1e-8);
        assert_relative_eq!(p[0], 0.99, epsilon = 1e-8);
        adam_step(&mut s, &mut p, &[2.0], 0.01, 0.9, 0.999, 1e-8);
        assert_relative_eq!(p[0], 0.98, epsilon = 1e-8);
        let mut s = AdamState::new(2);
        let mut q = [0.3, -0.7];
        for _ in 0..5 {
            adam_step(&mut s, &mut q, &[0.0, 0.0], 0.01, 0.9, 0.999, 1e-8);
        }
        assert_eq!(q, [0.3, -0.7]);
    }

    #[test]
    fn epochs_are_permutations() {
        let mut s = BatchSampler::new(10, true, 3);
        let mut b = Vec::new();
        for _ in 0..3 {
            let mut seen = Vec::new();
            while seen.len() < 10 {
                s.next_batch(4, &mut b);
                seen.extend_from_slice(&b);
            }
            seen.sort_unstable();
            assert_eq!(seen, (0..10).collect::<Vec<_>>());
        }
        let mut plain = BatchSampler::new(5, false, 0);
        plain.next_batch(3, &mut b);
        assert_eq!(b, vec![0, 1, 2]);
    }

    fn tiny_setup(v: Variant) -> (PannModel, Vec<CachedRecord>) {
        let opts = ModelOptions { hidden: Some(vec![3]), alpha: Some(1e-3), ..Default::default() };
        let mut m = PannModel::build(v, GroupId::Cub, &PreferredFrame::standard(), &opts, 5).unwrap();
        let flat: Vec<f64> = m.params().to_flat().iter().enumerate().map(|(i, x)| x + 0.1 * ((i * 7 % 5) as f64 - 2.0)).collect();
        m.set_flat_params(&flat).unwrap();
        let ds = generate_dataset(&ReferenceMaterial::cubic_default(), &preset("desk").unwrap(), false, 1).unwrap();
        let recs: Vec<Record> = ds.records.iter().step_by(97).take(4).copied().collect();
        let cached = cache_records(&m, &recs).unwrap();
        (m, cached)
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        for v in Variant::ALL {
            let (m, data) = tiny_setup(v);
            let idx: Vec<usize> = (0..data.len()).collect();
            let mut grad = vec![0.0; m.parameter_count()];
            let l = loss_and_gradient(&m, &data, &idx, &mut GradScratch::default(), &mut grad);
            assert_relative_eq!(l, cached_loss(&m, &data), max_relative = 1e-12);
            let flat = m.params().to_flat();
            let h = 1e-6;
            for k in 0..flat.len() {
                let at = |d: f64| {
                    let mut mm = m.clone();
                    let mut x = flat.clone();
                    x[k] += d;
                    mm.set_flat_params(&x).unwrap();
                    cached_loss(&mm, &data)
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                let err = (grad[k] - fd).abs() / fd.abs().max(1e-4);
                assert!(err <= 1e-5, "{v} param {k}: {} vs {fd}", grad[k]);
            }
        }
    }

    fn small_data() -> Dataset {
        generate_dataset(&ReferenceMaterial::cubic_default(), &preset("desk").unwrap(), false, 2).unwrap()
    }

    #[test]
    fn zero_steps_returns_initial_model() {
        let ds = small_data();
        let m0 = PannModel::build(Variant::I, GroupId::Cub, &PreferredFrame::standard(), &ModelOptions::default(), 1).unwrap();
        let cfg = TrainConfig { steps: 0, restarts: 1, ..Default::default() };
        let (m, r) = train(&m0, &ds, &cfg).unwrap();
        assert_eq!(m.params(), m0.params());
        assert_relative_eq!(r.calibration_mse, loss(&m0, &ds.calibration()).unwrap(), max_relative = 1e-12);
        assert_relative_eq!(r.test_mse.unwrap(), loss(&m0, &ds.test()).unwrap(), max_relative = 1e-12);
        assert_eq!(r.selected, 0);
    }

    #[test]
    fn training_reduces_loss_and_keeps_normalization() {
        let ds = small_data();
        for v in Variant::ALL {
            let m0 = PannModel::build(v, GroupId::Cub, &PreferredFrame::standard(), &ModelOptions::default(), 1).unwrap();
            let cfg = TrainConfig { steps: 150, restarts: 2, seed: 4, ..Default::default() };
            let (m, r) = train(&m0, &ds, &cfg).unwrap();
            let initial = loss(&m0, &ds.calibration()).unwrap();
            assert!(r.restarts[r.selected].calibration_mse.unwrap() < initial, "{v}");
            assert!(m.stress(&Tensor2::identity()).unwrap().abs().max() <= 1e-8);
            assert_eq!(r.restarts.len(), 2);
            assert!(r.restarts.iter().all(|x| x.history.len() == 150));
            let metric: Vec<f64> = r.restarts.iter().map(|x| x.test_mse.unwrap()).collect();
            assert!(metric.iter().all(|x| *x >= metric[r.selected]));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = small_data();
        let m0 = PannModel::build(Variant::C, GroupId::Cub, &PreferredFrame::standard(), &ModelOptions::default(), 1).unwrap();
        let cfg = TrainConfig { steps: 30, restarts: 3, seed: 9, refinement_steps: 3, ..Default::default() };
        let (a, ra) = train(&m0, &ds, &cfg).unwrap();
        let (b, rb) = train(&m0, &ds, &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let (c, rc) = single.install(|| train(&m0, &ds, &cfg)).unwrap();
        assert_eq!(ra, rc);
        assert_eq!(a.to_json().unwrap(), c.to_json().unwrap());
        assert_eq!(ra.restarts[0].history.len(), 33);
    }

    #[test]
    fn selection_on_calibration() {
        let ds = small_data();
        let m0 = PannModel::build(Variant::Istar, GroupId::Cub, &PreferredFrame::standard(), &ModelOptions::default(), 1).unwrap();
        let cfg = TrainConfig { steps: 20, restarts: 3, select_on: Selection::Calibration, ..Default::default() };
        let (_, r) = train(&m0, &ds, &cfg).unwrap();
        let cal: Vec<f64> = r.restarts.iter().map(|x| x.calibration_mse.unwrap()).collect();
        assert!(cal.iter().all(|x| *x >= cal[r.selected]));
        assert_eq!(r.log10_calibration_mse, r.calibration_mse.log10());
    }

    #[test]
    fn clip_positivity_stays_feasible() {
        let ds = small_data();
        let opts = ModelOptions { positivity: Some(Positivity::Clip), ..Default::default() };
        let m0 = PannModel::build(Variant::I, GroupId::Cub, &PreferredFrame::standard(), &opts, 1).unwrap();
        let cfg = TrainConfig { steps: 50, restarts: 1, ..Default::default() };
        let (m, _) = train(&m0, &ds, &cfg).unwrap();
        assert!(m.params().sign_violation().is_none());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lr": 0.1}"#).is_err());
        let c: TrainConfig = serde_json::from_str(r#"{"steps": 10}"#).unwrap();
        assert_eq!(c.steps, 10);
        assert_eq!(c.batch_size, 32);
        assert!(TrainConfig { restarts: 0, ..Default::default() }.validate().is_err());
    }
}
