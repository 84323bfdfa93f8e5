use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::DbnModel;
use crate::error::{ensure, Result};
use crate::rbm::sigmoid;
use crate::rng::seeded;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FineTuneConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Passes over the training set; zero only initializes the head.
    pub epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub seed: u64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            epochs: 50,
            patience: 10,
            seed: 0,
        }
    }
}

impl FineTuneConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.learning_rate >= 0.0 && self.learning_rate.is_finite(),
            Config,
            "fine-tune learning_rate must be non-negative"
        );
        ensure!(
            (0.0..1.0).contains(&self.momentum),
            Config,
            "fine-tune momentum must lie in [0, 1)"
        );
        ensure!(self.batch_size >= 1, Config, "fine-tune batch_size must be positive");
        Ok(())
    }
}

/// A sigmoid feed-forward stack initialized from a DBN plus a softmax head.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    pub base: DbnModel,
    /// `label_arity × top_dim`.
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
    pub label_arity: usize,
    pub validation_accuracy: Option<f64>,
}

impl ClassifierModel {
    pub fn input_dim(&self) -> usize {
        self.base.input_dim()
    }

    fn check(&self, x: &Array2<f64>) -> Result<()> {
        ensure!(
            x.ncols() == self.input_dim(),
            Input,
            "classifier expects {} inputs, got {}",
            self.input_dim(),
            x.ncols()
        );
        Ok(())
    }

    /// Activations of every hidden layer, input first.
    fn forward(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.clone()];
        for layer in &self.base.layers {
            let mut a = acts.last().expect("non-empty").dot(&layer.w.t());
            a += &layer.c;
            a.mapv_inplace(sigmoid);
            acts.push(a);
        }
        acts
    }

    fn logits(&self, top: &Array2<f64>) -> Array2<f64> {
        let mut z = top.dot(&self.head_w.t());
        z += &self.head_b;
        z
    }
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut p = z.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    p
}

fn check_labels(labels: &[usize], arity: usize, rows: usize) -> Result<()> {
    ensure!(
        labels.len() == rows,
        Input,
        "{} labels for {rows} examples",
        labels.len()
    );
    if let Some(l) = labels.iter().find(|&&l| l >= arity) {
        return Err(crate::Error::Input(format!("label {l} out of range for arity {arity}")));
    }
    Ok(())
}

/// Mean cross-entropy of the labels under the model.
pub fn classifier_loss(cm: &ClassifierModel, x: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    cm.check(x)?;
    check_labels(labels, cm.label_arity, x.nrows())?;
    ensure!(x.nrows() > 0, Input, "no examples");
    let acts = cm.forward(x);
    let z = cm.logits(acts.last().expect("non-empty"));
    let mut total = 0.0;
    for (row, &l) in z.rows().into_iter().zip(labels) {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[l];
    }
    Ok(total / x.nrows() as f64)
}

/// Gradient of [`classifier_loss`]: head first, then each stack layer's
/// weights and hidden biases, bottom layer first.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierGradient {
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
    pub layer_w: Vec<Array2<f64>>,
    pub layer_c: Vec<Array1<f64>>,
}

pub fn classifier_gradient(cm: &ClassifierModel, x: &Array2<f64>, labels: &[usize]) -> Result<ClassifierGradient> {
    cm.check(x)?;
    check_labels(labels, cm.label_arity, x.nrows())?;
    ensure!(x.nrows() > 0, Input, "no examples");
    let m = x.nrows() as f64;
    let acts = cm.forward(x);
    let top = acts.last().expect("non-empty");
    let mut delta = softmax_rows(&cm.logits(top));
    for (mut row, &l) in delta.rows_mut().into_iter().zip(labels) {
        row[l] -= 1.0;
    }
    delta /= m;
    let head_w = delta.t().dot(top);
    let head_b = delta.sum_axis(Axis(0));

    // back through the sigmoid stack
    let mut back = delta.dot(&cm.head_w);
    let n = cm.base.layers.len();
    let mut layer_w = vec![Array2::zeros((0, 0)); n];
    let mut layer_c = vec![Array1::zeros(0); n];
    for k in (0..n).rev() {
        let a = &acts[k + 1];
        let local = &back * &a.mapv(|s| s * (1.0 - s));
        layer_w[k] = local.t().dot(&acts[k]);
        layer_c[k] = local.sum_axis(Axis(0));
        if k > 0 {
            back = local.dot(&cm.base.layers[k].w);
        }
    }
    Ok(ClassifierGradient {
        head_w,
        head_b,
        layer_w,
        layer_c,
    })
}

/// Prediction for one input.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub label: usize,
    pub posterior: Vec<f64>,
}

/// Predicted label and posterior for every row of `x`.
pub fn classify_batch(cm: &ClassifierModel, x: &Array2<f64>) -> Result<Vec<Classification>> {
    cm.check(x)?;
    let acts = cm.forward(x);
    let p = softmax_rows(&cm.logits(acts.last().expect("non-empty")));
    Ok(p.rows()
        .into_iter()
        .map(|row| {
            let label = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                .0;
            Classification {
                label,
                posterior: row.to_vec(),
            }
        })
        .collect())
}

pub fn classify(cm: &ClassifierModel, input: &[f64]) -> Result<Classification> {
    let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).map_err(|e| crate::Error::Input(e.to_string()))?;
    Ok(classify_batch(cm, &x)?.remove(0))
}

fn accuracy(cm: &ClassifierModel, x: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    let preds = classify_batch(cm, x)?;
    let hits = preds.iter().zip(labels).filter(|(p, &l)| p.label == l).count();
    Ok(hits as f64 / labels.len().max(1) as f64)
}

/// Adds a softmax head on top of `m` and trains head and stack jointly with
/// momentum SGD on cross-entropy. With validation data the parameters of
/// the best validation epoch are kept.
pub fn fine_tune_classifier(
    m: &DbnModel,
    x: &Array2<f64>,
    labels: &[usize],
    label_arity: usize,
    validation: Option<(&Array2<f64>, &[usize])>,
    cfg: &FineTuneConfig,
) -> Result<ClassifierModel> {
    cfg.validate()?;
    ensure!(label_arity >= 2, Input, "label arity must be at least 2");
    ensure!(x.nrows() > 0, Input, "no training examples");
    let mut rng = seeded(cfg.seed);
    let normal = Normal::new(0.0, 0.01).expect("valid normal");
    let mut cm = ClassifierModel {
        base: m.clone(),
        head_w: Array2::from_shape_simple_fn((label_arity, m.top_dim()), || normal.sample(&mut rng)),
        head_b: Array1::zeros(label_arity),
        label_arity,
        validation_accuracy: None,
    };
    cm.check(x)?;
    check_labels(labels, label_arity, x.nrows())?;
    if let Some((vx, vl)) = validation {
        cm.check(vx)?;
        check_labels(vl, label_arity, vx.nrows())?;
    }

    let mut vel = ClassifierGradient {
        head_w: Array2::zeros(cm.head_w.raw_dim()),
        head_b: Array1::zeros(label_arity),
        layer_w: cm.base.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
        layer_c: cm.base.layers.iter().map(|l| Array1::zeros(l.c.len())).collect(),
    };
    let mut best: Option<(f64, ClassifierModel)> = None;
    let mut stale = 0usize;
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let (lr, mom) = (cfg.learning_rate, cfg.momentum);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let bx = x.select(Axis(0), chunk);
            let bl: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let g = classifier_gradient(&cm, &bx, &bl)?;
            vel.head_w = &vel.head_w * mom - &g.head_w * lr;
            vel.head_b = &vel.head_b * mom - &g.head_b * lr;
            cm.head_w += &vel.head_w;
            cm.head_b += &vel.head_b;
            for (k, layer) in cm.base.layers.iter_mut().enumerate() {
                vel.layer_w[k] = &vel.layer_w[k] * mom - &g.layer_w[k] * lr;
                vel.layer_c[k] = &vel.layer_c[k] * mom - &g.layer_c[k] * lr;
                layer.w += &vel.layer_w[k];
                layer.c += &vel.layer_c[k];
            }
        }
        if let Some((vx, vl)) = validation {
            let acc = accuracy(&cm, vx, vl)?;
            log::trace!("fine-tune epoch {epoch}: validation accuracy {acc:.4}");
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, cm.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    log::debug!("early stop after epoch {epoch}");
                    break;
                }
            }
        }
    }
    match best {
        Some((acc, mut model)) => {
            model.validation_accuracy = Some(acc);
            Ok(model)
        }
        None => {
            if let Some((vx, vl)) = validation {
                cm.validation_accuracy = Some(accuracy(&cm, vx, vl)?);
            }
            Ok(cm)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbm::RbmParams;
    use crate::rng::seeded;
    use rand::Rng;

    fn tiny_model(seed: u64) -> ClassifierModel {
        let mut rng = seeded(seed);
        let normal = Normal::new(0.0, 0.7).unwrap();
        let mut l0 = RbmParams::zeros(3, 4);
        let mut l1 = RbmParams::zeros(4, 2);
        for l in [&mut l0, &mut l1] {
            l.w.mapv_inplace(|_| normal.sample(&mut rng));
            l.c.mapv_inplace(|_| normal.sample(&mut rng));
        }
        ClassifierModel {
            base: DbnModel::new(vec![l0, l1]).unwrap(),
            head_w: Array2::from_shape_simple_fn((3, 2), || normal.sample(&mut rng)),
            head_b: Array1::from_shape_simple_fn(3, || normal.sample(&mut rng)),
            label_arity: 3,
            validation_accuracy: None,
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cm = tiny_model(5);
        let x = ndarray::array![[0.1, 0.9, 0.4], [0.7, 0.2, 0.5], [0.3, 0.3, 1.0]];
        let labels = [0, 2, 1];
        let g = classifier_gradient(&cm, &x, &labels).unwrap();
        let eps = 1e-6;
        let rel = |a: f64, b: f64| (a - b).abs() / (a.abs().max(b.abs()).max(1e-8));
        for i in 0..3 {
            for j in 0..2 {
                let mut p = cm.clone();
                p.head_w[[i, j]] += eps;
                let mut q = cm.clone();
                q.head_w[[i, j]] -= eps;
                let fd = (classifier_loss(&p, &x, &labels).unwrap() - classifier_loss(&q, &x, &labels).unwrap())
                    / (2.0 * eps);
                assert!(rel(fd, g.head_w[[i, j]]) < 1e-5, "head {i},{j}");
            }
        }
        for k in 0..2 {
            let (r, c) = cm.base.layers[k].w.dim();
            for i in 0..r {
                for j in 0..c {
                    let mut p = cm.clone();
                    p.base.layers[k].w[[i, j]] += eps;
                    let mut q = cm.clone();
                    q.base.layers[k].w[[i, j]] -= eps;
                    let fd = (classifier_loss(&p, &x, &labels).unwrap() - classifier_loss(&q, &x, &labels).unwrap())
                        / (2.0 * eps);
                    assert!(rel(fd, g.layer_w[k][[i, j]]) < 1e-5, "layer {k} w {i},{j}");
                }
            }
        }
    }

    #[test]
    fn zero_epochs_leaves_stack_untouched() {
        let cm = tiny_model(1);
        let x = Array2::from_elem((4, 3), 0.5);
        let cfg = FineTuneConfig {
            epochs: 0,
            ..FineTuneConfig::default()
        };
        let out = fine_tune_classifier(&cm.base, &x, &[0, 1, 0, 1], 2, None, &cfg).unwrap();
        assert_eq!(out.base, cm.base);
        assert_eq!(out.head_w.dim(), (2, 2));
    }

    #[test]
    fn separable_data_is_learned() {
        let mut rng = seeded(9);
        let n = 200;
        let mut x = Array2::zeros((n, 3));
        let mut labels = vec![0; n];
        for i in 0..n {
            let l = i % 2;
            labels[i] = l;
            for j in 0..3 {
                let centre = if l == 1 { 0.8 } else { 0.2 };
                x[[i, j]] = centre + rng.random_range(-0.15..0.15);
            }
        }
        let base = tiny_model(2).base;
        let cfg = FineTuneConfig {
            learning_rate: 0.5,
            epochs: 100,
            batch_size: 16,
            ..FineTuneConfig::default()
        };
        let cm = fine_tune_classifier(&base, &x, &labels, 2, Some((&x, &labels)), &cfg).unwrap();
        assert_eq!(cm.validation_accuracy, Some(1.0));
    }

    #[test]
    fn posterior_normalized_and_scale_invariant() {
        let cm = tiny_model(4);
        let x = [0.2, 0.4, 0.9];
        let c = classify(&cm, &x).unwrap();
        assert!((c.posterior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut scaled = cm.clone();
        scaled.head_w *= 3.0;
        scaled.head_b *= 3.0;
        assert_eq!(classify(&scaled, &x).unwrap().label, c.label);
    }

    #[test]
    fn label_range_checked() {
        let cm = tiny_model(0);
        let x = Array2::from_elem((1, 3), 0.5);
        assert!(classifier_loss(&cm, &x, &[3]).is_err());
        assert!(fine_tune_classifier(&cm.base, &x, &[2], 2, None, &FineTuneConfig::default()).is_err());
    }
}
