//! Deep belief networks: greedy stacks of RBMs, the relative-activity
//! de-noiser and the back-propagation classifier built on top of them.

mod classifier;
mod denoise;

pub use classifier::{
    classifier_gradient, classifier_loss, classify, classify_batch, fine_tune_classifier, Classification,
    ClassifierGradient, ClassifierModel, FineTuneConfig,
};
pub use denoise::{
    build_denoise_model, compute_relative_activity, denoise, denoise_batch, denoise_flat, quantile_type7,
    DenoiseConfig, DenoiseModel,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rbm::{
    hidden_probs_batch, prob_h_given_v, prob_v_given_h, train_rbm, visible_probs_batch, RbmParams, TrainConfig,
};

/// Where a stack came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub train: Option<TrainConfig>,
    /// Final-epoch reconstruction error of each layer.
    pub reconstruction_errors: Vec<f64>,
    pub config_hash: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DbnModel {
    pub layers: Vec<RbmParams>,
    pub provenance: Provenance,
}

impl DbnModel {
    pub fn new(layers: Vec<RbmParams>) -> Result<Self> {
        ensure!(!layers.is_empty(), Input, "a DBN needs at least one layer");
        for (k, pair) in layers.windows(2).enumerate() {
            ensure!(
                pair[0].n_hidden() == pair[1].n_visible(),
                Input,
                "layer {k} has {} hidden units but layer {} expects {} visible",
                pair[0].n_hidden(),
                k + 1,
                pair[1].n_visible()
            );
        }
        for l in &layers {
            l.validate()?;
        }
        Ok(DbnModel {
            layers,
            provenance: Provenance::default(),
        })
    }

    /// Input size followed by every hidden size.
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.n_hidden()))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_visible()
    }

    pub fn top_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].n_hidden()
    }
}

/// Named layer-size presets. `input_dim` fills the visible size.
pub fn preset_layers(name: &str, input_dim: usize) -> Result<Vec<usize>> {
    let hidden: &[usize] = match name {
        "desk-denoise" => &[64],
        "paper-denoise" => &[625, 312],
        "desk-classify" => &[128, 32],
        "paper-classify" => &[1250, 50],
        other => {
            return Err(Error::Config(format!(
                "unknown layer preset '{other}' (expected desk-denoise, paper-denoise, \
                 desk-classify or paper-classify)"
            )))
        }
    };
    Ok(std::iter::once(input_dim).chain(hidden.iter().copied()).collect())
}

/// Greedy layer-wise training. Layer `k` sees the mean-field activations of
/// layer `k - 1` and trains with seed `cfg.seed ^ k`.
pub fn train_greedy(layer_sizes: &[usize], data: &Array2<f64>, cfg: &TrainConfig) -> Result<DbnModel> {
    ensure!(
        layer_sizes.len() >= 2,
        Input,
        "need an input size and at least one hidden size"
    );
    ensure!(
        layer_sizes.iter().all(|&s| s >= 1),
        Input,
        "layer sizes must be positive"
    );
    ensure!(
        data.ncols() == layer_sizes[0],
        Input,
        "data has {} columns but the first layer expects {}",
        data.ncols(),
        layer_sizes[0]
    );
    cfg.validate()?;

    let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
    let mut errors = Vec::with_capacity(layer_sizes.len() - 1);
    let mut input = data.clone();
    for (k, &n_hidden) in layer_sizes[1..].iter().enumerate() {
        let layer_cfg = TrainConfig {
            seed: cfg.seed ^ k as u64,
            ..cfg.clone()
        };
        let (params, report) = train_rbm(&input, n_hidden, &layer_cfg)?;
        log::debug!(
            "layer {k} ({}→{n_hidden}) reconstruction error {:.4}",
            input.ncols(),
            report.final_error()
        );
        errors.push(report.final_error());
        if k + 2 < layer_sizes.len() {
            input = hidden_probs_batch(&params, &input);
        }
        layers.push(params);
    }
    let mut model = DbnModel::new(layers)?;
    model.provenance = Provenance {
        train: Some(cfg.clone()),
        reconstruction_errors: errors,
        config_hash: None,
    };
    Ok(model)
}

/// Mean-field activations of every hidden layer, bottom first.
pub fn upward_pass(m: &DbnModel, v: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(m.layers.len());
    for layer in &m.layers {
        let below = out.last().map(|a| a.as_slice()).unwrap_or(v);
        out.push(prob_h_given_v(layer, below)?);
    }
    Ok(out)
}

/// Mean-field reconstruction of the visible layer from top activations.
pub fn downward_pass(m: &DbnModel, top: &[f64]) -> Result<Vec<f64>> {
    let mut act = top.to_vec();
    for layer in m.layers.iter().rev() {
        act = prob_v_given_h(layer, &act)?;
    }
    Ok(act)
}

/// Top-layer activations for every row of `v`.
pub fn upward_batch(m: &DbnModel, v: &Array2<f64>) -> Result<Array2<f64>> {
    ensure!(
        v.ncols() == m.input_dim(),
        Input,
        "input has {} columns, model expects {}",
        v.ncols(),
        m.input_dim()
    );
    let mut act = hidden_probs_batch(&m.layers[0], v);
    for layer in &m.layers[1..] {
        act = hidden_probs_batch(layer, &act);
    }
    Ok(act)
}

/// Visible reconstructions for every row of top activations.
pub fn downward_batch(m: &DbnModel, top: &Array2<f64>) -> Result<Array2<f64>> {
    ensure!(
        top.ncols() == m.top_dim(),
        Input,
        "top activations have {} columns, model expects {}",
        top.ncols(),
        m.top_dim()
    );
    let mut act = top.clone();
    for layer in m.layers.iter().rev() {
        act = visible_probs_batch(layer, &act);
    }
    Ok(act)
}
