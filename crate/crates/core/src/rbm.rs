//! Bernoulli-Bernoulli restricted Boltzmann machines.
//!
//! The energy of a joint configuration is `E(v, h) = -hᵀWv - bᵀv - cᵀh` with
//! `W` stored as a `u_h × u_v` matrix. Besides sampling and contrastive
//! divergence training, this module carries exact enumeration routines for
//! models small enough to sum over every configuration; the tests lean on
//! them heavily.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::{seeded, SimRng};

/// Largest `u_v + u_h` the exact routines will enumerate.
pub const ENUMERATION_LIMIT: usize = 20;

/// Standard deviation of the initial weights.
const INIT_WEIGHT_STD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct RbmParams {
    /// `u_h × u_v` couplings.
    pub w: Array2<f64>,
    /// Visible biases.
    pub b: Array1<f64>,
    /// Hidden biases.
    pub c: Array1<f64>,
}

impl RbmParams {
    pub fn new(w: Array2<f64>, b: Array1<f64>, c: Array1<f64>) -> Result<Self> {
        let p = RbmParams { w, b, c };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        RbmParams {
            w: Array2::zeros((n_hidden, n_visible)),
            b: Array1::zeros(n_visible),
            c: Array1::zeros(n_hidden),
        }
    }

    /// Small Gaussian weights and zero biases.
    pub fn random_init(n_visible: usize, n_hidden: usize, rng: &mut SimRng) -> Self {
        let normal = Normal::new(0.0, INIT_WEIGHT_STD).expect("valid normal");
        let mut p = RbmParams::zeros(n_visible, n_hidden);
        p.w.iter_mut().for_each(|x| *x = normal.sample(rng));
        p
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.w.nrows() == self.c.len() && self.w.ncols() == self.b.len(),
            Input,
            "W is {}x{} but b has {} and c has {} entries",
            self.w.nrows(),
            self.w.ncols(),
            self.b.len(),
            self.c.len()
        );
        ensure!(
            self.n_visible() >= 1 && self.n_hidden() >= 1,
            Input,
            "an RBM needs at least one visible and one hidden unit"
        );
        ensure!(
            self.w.iter().chain(&self.b).chain(&self.c).all(|x| x.is_finite()),
            Input,
            "RBM parameters must be finite"
        );
        Ok(())
    }

    pub fn n_visible(&self) -> usize {
        self.b.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.c.len()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    ensure!(got == want, Input, "{what} has length {got}, expected {want}");
    Ok(())
}

fn check_binary(what: &str, x: &[f64]) -> Result<()> {
    ensure!(x.iter().all(|&v| v == 0.0 || v == 1.0), Input, "{what} must be binary");
    Ok(())
}

fn hidden_drive(p: &RbmParams, v: &[f64]) -> Vec<f64> {
    p.w.rows()
        .into_iter()
        .zip(&p.c)
        .map(|(row, c)| c + row.iter().zip(v).map(|(w, x)| w * x).sum::<f64>())
        .collect()
}

fn visible_drive(p: &RbmParams, h: &[f64]) -> Vec<f64> {
    let mut out = p.b.to_vec();
    for (row, &hj) in p.w.rows().into_iter().zip(h) {
        if hj != 0.0 {
            out.iter_mut().zip(row).for_each(|(o, w)| *o += hj * w);
        }
    }
    out
}

pub fn energy(p: &RbmParams, v: &[f64], h: &[f64]) -> Result<f64> {
    check_len("v", v.len(), p.n_visible())?;
    check_len("h", h.len(), p.n_hidden())?;
    check_binary("v", v)?;
    check_binary("h", h)?;
    Ok(energy_unchecked(p, v, h))
}

fn energy_unchecked(p: &RbmParams, v: &[f64], h: &[f64]) -> f64 {
    let drive = hidden_drive(p, v);
    let hwc: f64 = drive.iter().zip(h).map(|(d, x)| d * x).sum();
    let bv: f64 = p.b.iter().zip(v).map(|(b, x)| b * x).sum();
    -hwc - bv
}

/// `F(v) = -bᵀv - Σ_j softplus(c_j + W_j·v)`.
pub fn free_energy(p: &RbmParams, v: &[f64]) -> Result<f64> {
    check_len("v", v.len(), p.n_visible())?;
    check_binary("v", v)?;
    Ok(free_energy_unchecked(p, v))
}

fn free_energy_unchecked(p: &RbmParams, v: &[f64]) -> f64 {
    let bv: f64 = p.b.iter().zip(v).map(|(b, x)| b * x).sum();
    -bv - hidden_drive(p, v).into_iter().map(softplus).sum::<f64>()
}

/// Per-unit `P(h_j = 1 | v)`. Soft visibles in [0, 1] are accepted.
pub fn prob_h_given_v(p: &RbmParams, v: &[f64]) -> Result<Vec<f64>> {
    check_len("v", v.len(), p.n_visible())?;
    Ok(hidden_drive(p, v).into_iter().map(sigmoid).collect())
}

/// Per-unit `P(v_i = 1 | h)`. Soft hiddens in [0, 1] are accepted.
pub fn prob_v_given_h(p: &RbmParams, h: &[f64]) -> Result<Vec<f64>> {
    check_len("h", h.len(), p.n_hidden())?;
    Ok(visible_drive(p, h).into_iter().map(sigmoid).collect())
}

fn bernoulli<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Vec<f64> {
    probs
        .iter()
        .map(|&q| if rng.random::<f64>() < q { 1.0 } else { 0.0 })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsStep {
    pub h_sample: Vec<f64>,
    pub v_next: Vec<f64>,
    pub h_probs: Vec<f64>,
    pub v_probs: Vec<f64>,
}

/// One block Gibbs sweep `v → h → v'`.
pub fn gibbs_step<R: Rng + ?Sized>(p: &RbmParams, v: &[f64], rng: &mut R) -> Result<GibbsStep> {
    check_binary("v", v)?;
    let h_probs = prob_h_given_v(p, v)?;
    let h_sample = bernoulli(&h_probs, rng);
    let v_probs = prob_v_given_h(p, &h_sample)?;
    let v_next = bernoulli(&v_probs, rng);
    Ok(GibbsStep {
        h_sample,
        v_next,
        h_probs,
        v_probs,
    })
}

/// Binary vector of length `n` holding the bits of `index`, LSB first.
pub fn binary_config(index: usize, n: usize) -> Vec<f64> {
    (0..n).map(|i| ((index >> i) & 1) as f64).collect()
}

fn check_enumerable(p: &RbmParams) -> Result<()> {
    let total = p.n_visible() + p.n_hidden();
    if total > ENUMERATION_LIMIT {
        return Err(Error::Capability(format!(
            "exact enumeration needs u_v + u_h <= {ENUMERATION_LIMIT}, model has {total}"
        )));
    }
    Ok(())
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn all_joint_configs(p: &RbmParams) -> impl Iterator<Item = (Vec<f64>, Vec<f64>)> + Clone + '_ {
    let (nv, nh) = (p.n_visible(), p.n_hidden());
    (0..1usize << nv).flat_map(move |i| (0..1usize << nh).map(move |j| (binary_config(i, nv), binary_config(j, nh))))
}

/// `log Q` by summing `exp(-E)` over every joint configuration.
pub fn log_partition_exact(p: &RbmParams) -> Result<f64> {
    check_enumerable(p)?;
    let neg_energies: Vec<f64> = all_joint_configs(p)
        .map(|(v, h)| -energy_unchecked(p, &v, &h))
        .collect();
    Ok(log_sum_exp(neg_energies.iter().copied()))
}

pub fn partition_function_exact(p: &RbmParams) -> Result<f64> {
    Ok(log_partition_exact(p)?.exp())
}

pub fn joint_prob_exact(p: &RbmParams, v: &[f64], h: &[f64]) -> Result<f64> {
    let e = energy(p, v, h)?;
    Ok((-e - log_partition_exact(p)?).exp())
}

fn check_dataset(p: &RbmParams, data: &[Vec<f64>]) -> Result<()> {
    ensure!(!data.is_empty(), Input, "dataset is empty");
    for v in data {
        check_len("data vector", v.len(), p.n_visible())?;
        check_binary("data vector", v)?;
    }
    Ok(())
}

/// Mean negative log marginal likelihood of binary `data`.
pub fn nll_exact(p: &RbmParams, data: &[Vec<f64>]) -> Result<f64> {
    check_enumerable(p)?;
    check_dataset(p, data)?;
    let log_q = log_partition_exact(p)?;
    let mean_f = data.iter().map(|v| free_energy_unchecked(p, v)).sum::<f64>() / data.len() as f64;
    Ok(mean_f + log_q)
}

/// Gradient with respect to `W`, `b` and `c`, shaped like [`RbmParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct RbmGradient {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub c: Array1<f64>,
}

impl RbmGradient {
    fn zeros_like(p: &RbmParams) -> Self {
        RbmGradient {
            w: Array2::zeros(p.w.raw_dim()),
            b: Array1::zeros(p.b.len()),
            c: Array1::zeros(p.c.len()),
        }
    }

    /// All entries flattened in `W`, `b`, `c` order.
    pub fn flatten(&self) -> Vec<f64> {
        self.w.iter().chain(&self.b).chain(&self.c).copied().collect()
    }

    /// Accumulates `scale · h vᵀ`, `scale · v` and `scale · h`.
    fn add_outer(&mut self, scale: f64, v: &[f64], h: &[f64]) {
        for (j, &hj) in h.iter().enumerate() {
            if hj != 0.0 {
                for (i, &vi) in v.iter().enumerate() {
                    self.w[[j, i]] += scale * hj * vi;
                }
            }
            self.c[j] += scale * hj;
        }
        for (i, &vi) in v.iter().enumerate() {
            self.b[i] += scale * vi;
        }
    }
}

/// Exact gradient of [`nll_exact`]: data expectations of the sufficient
/// statistics minus the same under the model, negated.
pub fn exact_gradient(p: &RbmParams, data: &[Vec<f64>]) -> Result<RbmGradient> {
    check_enumerable(p)?;
    check_dataset(p, data)?;
    let mut grad = RbmGradient::zeros_like(p);
    let m = data.len() as f64;
    for v in data {
        let ph = prob_h_given_v(p, v)?;
        grad.add_outer(-1.0 / m, v, &ph);
    }
    let log_q = log_partition_exact(p)?;
    for (v, h) in all_joint_configs(p) {
        let prob = (-energy_unchecked(p, &v, &h) - log_q).exp();
        grad.add_outer(prob, &v, &h);
    }
    Ok(grad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub cd_steps: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            batch_size: 32,
            epochs: 200,
            cd_steps: 1,
            momentum: 0.5,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.learning_rate >= 0.0 && self.learning_rate.is_finite(),
            Config,
            "learning_rate must be a non-negative finite number"
        );
        ensure!(self.batch_size >= 1, Config, "batch_size must be positive");
        ensure!(self.epochs >= 1, Config, "epochs must be positive");
        ensure!(self.cd_steps >= 1, Config, "cd_steps must be positive");
        ensure!(
            (0.0..1.0).contains(&self.momentum),
            Config,
            "momentum must lie in [0, 1)"
        );
        ensure!(
            self.weight_decay >= 0.0 && self.weight_decay.is_finite(),
            Config,
            "weight_decay must be non-negative"
        );
        Ok(())
    }
}

fn sample_matrix(probs: &Array2<f64>, rng: &mut SimRng) -> Array2<f64> {
    probs.mapv(|q| if rng.random::<f64>() < q { 1.0 } else { 0.0 })
}

fn hidden_probs(p: &RbmParams, v: &ArrayView2<f64>) -> Array2<f64> {
    let mut a = v.dot(&p.w.t());
    a += &p.c;
    a.mapv_inplace(sigmoid);
    a
}

fn visible_probs(p: &RbmParams, h: &Array2<f64>) -> Array2<f64> {
    let mut a = h.dot(&p.w);
    a += &p.b;
    a.mapv_inplace(sigmoid);
    a
}

/// Mean-field hidden activations for every row of `v`.
pub fn hidden_probs_batch(p: &RbmParams, v: &Array2<f64>) -> Array2<f64> {
    hidden_probs(p, &v.view())
}

/// Mean-field visible reconstructions for every row of `h`.
pub fn visible_probs_batch(p: &RbmParams, h: &Array2<f64>) -> Array2<f64> {
    visible_probs(p, h)
}

/// CD-k gradient estimate for a batch (rows are examples), signed as an
/// ascent direction on the log likelihood, plus the mean squared error of
/// the first reconstruction.
///
/// The chain samples hidden and visible units at every step; the statistics
/// use hidden probabilities.
pub fn cd_gradient(
    p: &RbmParams,
    batch: ArrayView2<f64>,
    cd_steps: usize,
    rng: &mut SimRng,
) -> Result<(RbmGradient, f64)> {
    ensure!(batch.nrows() > 0, Input, "empty training batch");
    check_len("batch row", batch.ncols(), p.n_visible())?;
    ensure!(cd_steps >= 1, Config, "cd_steps must be positive");
    let m = batch.nrows() as f64;

    let ph0 = hidden_probs(p, &batch);
    let mut h = sample_matrix(&ph0, rng);
    let mut recon_err = 0.0;
    let mut vk = Array2::zeros(batch.raw_dim());
    for step in 0..cd_steps {
        let pv = visible_probs(p, &h);
        if step == 0 {
            recon_err = (&pv - &batch).mapv(|d| d * d).mean().unwrap_or(0.0);
        }
        vk = sample_matrix(&pv, rng);
        if step + 1 < cd_steps {
            h = sample_matrix(&hidden_probs(p, &vk.view()), rng);
        }
    }
    let phk = hidden_probs(p, &vk.view());

    let w = (ph0.t().dot(&batch) - phk.t().dot(&vk)) / m;
    let b = (batch.sum_axis(Axis(0)) - vk.sum_axis(Axis(0))) / m;
    let c = (ph0.sum_axis(Axis(0)) - phk.sum_axis(Axis(0))) / m;
    Ok((RbmGradient { w, b, c }, recon_err))
}

/// Parameters plus momentum buffers for CD training.
#[derive(Clone, Debug)]
pub struct RbmTrainer {
    pub params: RbmParams,
    cfg: TrainConfig,
    velocity: RbmGradient,
}

impl RbmTrainer {
    pub fn new(params: RbmParams, cfg: TrainConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let velocity = RbmGradient::zeros_like(&params);
        Ok(RbmTrainer { params, cfg, velocity })
    }

    /// One momentum step on a batch. Returns the reconstruction error.
    pub fn cd_update(&mut self, batch: ArrayView2<f64>, rng: &mut SimRng) -> Result<f64> {
        let (grad, err) = cd_gradient(&self.params, batch, self.cfg.cd_steps, rng)?;
        let (lr, mom, wd) = (self.cfg.learning_rate, self.cfg.momentum, self.cfg.weight_decay);
        let p = &mut self.params;
        let vel = &mut self.velocity;
        Zip::from(&mut vel.w)
            .and(&grad.w)
            .and(&p.w)
            .for_each(|v, &g, &w| *v = mom * *v + lr * (g - wd * w));
        Zip::from(&mut vel.b)
            .and(&grad.b)
            .for_each(|v, &g| *v = mom * *v + lr * g);
        Zip::from(&mut vel.c)
            .and(&grad.c)
            .for_each(|v, &g| *v = mom * *v + lr * g);
        p.w += &vel.w;
        p.b += &vel.b;
        p.c += &vel.c;
        Ok(err)
    }

    pub fn into_params(self) -> RbmParams {
        self.params
    }
}

/// One stand-alone CD-k step from rest (zero momentum history).
pub fn cd_update(
    p: &RbmParams,
    batch: ArrayView2<f64>,
    cfg: &TrainConfig,
    rng: &mut SimRng,
) -> Result<(RbmParams, f64)> {
    let mut t = RbmTrainer::new(p.clone(), cfg.clone())?;
    let err = t.cd_update(batch, rng)?;
    Ok((t.into_params(), err))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean reconstruction error per epoch.
    pub epoch_errors: Vec<f64>,
}

impl TrainReport {
    pub fn final_error(&self) -> f64 {
        self.epoch_errors.last().copied().unwrap_or(f64::NAN)
    }
}

/// Trains a fresh RBM on the rows of `data` (values in [0, 1]).
pub fn train_rbm(data: &Array2<f64>, n_hidden: usize, cfg: &TrainConfig) -> Result<(RbmParams, TrainReport)> {
    cfg.validate()?;
    ensure!(data.nrows() > 0, Input, "no training data");
    ensure!(n_hidden >= 1, Input, "need at least one hidden unit");
    ensure!(
        data.iter().all(|v| (0.0..=1.0).contains(v)),
        Input,
        "training data must lie in [0, 1]"
    );
    let mut rng = seeded(cfg.seed);
    let mut init = RbmParams::random_init(data.ncols(), n_hidden, &mut rng);
    // start each visible unit at its data log-odds so the weights do not
    // have to absorb the marginal means
    let means = data.mean_axis(Axis(0)).expect("non-empty");
    init.b = means.mapv(|p| {
        let p = p.clamp(0.01, 0.99);
        (p / (1.0 - p)).ln()
    });
    let mut trainer = RbmTrainer::new(init, cfg.clone())?;
    let mut order: Vec<usize> = (0..data.nrows()).collect();
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.select(Axis(0), chunk);
            total += trainer.cd_update(batch.view(), &mut rng)?;
            batches += 1;
        }
        let err = total / batches as f64;
        log::trace!("rbm epoch {epoch}: reconstruction error {err:.5}");
        report.epoch_errors.push(err);
    }
    Ok((trainer.into_params(), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn example() -> RbmParams {
        RbmParams::new(array![[0.5, -0.2]], array![0.1, 0.3], array![-0.4]).unwrap()
    }

    #[test]
    fn energy_hand_value() {
        let e = energy(&example(), &[1.0, 0.0], &[1.0]).unwrap();
        assert!((e + 0.2).abs() < 1e-15);
    }

    #[test]
    fn energy_zero_params_and_zero_visible() {
        let z = RbmParams::zeros(3, 2);
        assert_eq!(energy(&z, &[1.0, 0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        let p = example();
        assert!((energy(&p, &[0.0, 0.0], &[1.0]).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn energy_rejects_bad_input() {
        let p = example();
        assert!(energy(&p, &[1.0], &[1.0]).is_err());
        assert!(energy(&p, &[0.5, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn free_energy_zero_params() {
        let z = RbmParams::zeros(2, 3);
        let f = free_energy(&z, &[0.0, 1.0]).unwrap();
        assert!((f + 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn free_energy_is_overflow_safe() {
        let mut p = RbmParams::zeros(1, 2);
        p.c[0] = 1000.0;
        let f = free_energy(&p, &[0.0]).unwrap();
        assert!(f.is_finite());
        assert!((f + 1000.0 + 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn conditionals_saturate() {
        let z = RbmParams::zeros(2, 3);
        assert_eq!(prob_h_given_v(&z, &[1.0, 0.0]).unwrap(), vec![0.5; 3]);
        let mut p = RbmParams::zeros(2, 1);
        p.c[0] = 50.0;
        assert!((prob_h_given_v(&p, &[0.0, 0.0]).unwrap()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn saturated_gibbs_is_deterministic() {
        let mut p = RbmParams::zeros(3, 2);
        p.c = array![60.0, -60.0];
        p.b = array![-60.0, 60.0, 60.0];
        let mut rng = seeded(3);
        for _ in 0..20 {
            let s = gibbs_step(&p, &[1.0, 0.0, 1.0], &mut rng).unwrap();
            assert_eq!(s.h_sample, vec![1.0, 0.0]);
            assert_eq!(s.v_next, vec![0.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn uniform_partition() {
        let z = RbmParams::zeros(2, 1);
        assert!((partition_function_exact(&z).unwrap() - 8.0).abs() < 1e-12);
        let pr = joint_prob_exact(&z, &[0.0, 1.0], &[1.0]).unwrap();
        assert!((pr - 0.125).abs() < 1e-15);
        let nll = nll_exact(&z, &[vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!((nll - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn example_partition_by_hand() {
        let p = example();
        let mut q = 0.0f64;
        for v in [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] {
            for h in [0.0f64, 1.0] {
                let e = -(h * (0.5 * v[0] - 0.2 * v[1])) - 0.1 * v[0] - 0.3 * v[1] + 0.4 * h;
                q += (-e).exp();
            }
        }
        assert!((partition_function_exact(&p).unwrap() - q).abs() < 1e-12);
    }

    #[test]
    fn enumeration_limit_enforced() {
        let p = RbmParams::zeros(15, 6);
        assert!(matches!(log_partition_exact(&p), Err(Error::Capability(_))));
    }

    #[test]
    fn uniform_fit_has_zero_gradient() {
        let z = RbmParams::zeros(2, 2);
        let data: Vec<Vec<f64>> = (0..4).map(|i| binary_config(i, 2)).collect();
        let g = exact_gradient(&z, &data).unwrap();
        assert!(g.flatten().iter().all(|x| x.abs() < 1e-10));
        assert_eq!(g.w.dim(), (2, 2));
    }

    #[test]
    fn zero_learning_rate_is_null_update() {
        let mut rng = seeded(1);
        let p = RbmParams::random_init(4, 3, &mut rng);
        let batch = array![[1.0, 0.0, 1.0, 1.0], [0.0, 0.0, 1.0, 0.0]];
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let (q, _) = cd_update(&p, batch.view(), &cfg, &mut rng).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn empty_batch_rejected() {
        let p = RbmParams::zeros(2, 2);
        let batch = Array2::<f64>::zeros((0, 2));
        let mut rng = seeded(0);
        assert!(cd_update(&p, batch.view(), &TrainConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            momentum: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
