use ndarray::{concatenate, Array2, Axis};

use super::{salt, ExperimentConfig, SymbolSet};
use crate::dbn::{
    build_denoise_model, compute_relative_activity, fine_tune_classifier, preset_layers, train_greedy, ClassifierModel,
    DbnModel, DenoiseModel, FineTuneConfig,
};
use crate::error::{ensure, Result};
use crate::rbm::{RbmParams, TrainConfig};
use crate::receiver::{classifier_inputs, reconstruct_symbols};
use crate::rng::seeded;

#[derive(Clone, Debug, Default)]
pub struct TrainedModels {
    pub denoise: Option<DenoiseModel>,
    pub classifier: Option<ClassifierModel>,
}

/// Pre-trains the de-noise stack on clean and noisy frames together, then
/// selects noise nodes from the relative activity of each clean/noisy pair.
pub fn train_denoiser(cfg: &ExperimentConfig, train: &SymbolSet) -> Result<DenoiseModel> {
    ensure!(!train.is_empty(), Input, "training split is empty");
    let clean = train.clean_frames(&cfg.resolutions)?;
    let noisy = train.noisy_frames(&cfg.resolutions)?;
    let sizes = preset_layers(&cfg.denoise_preset, clean.ncols())?;
    let data = concatenate(Axis(0), &[clean.view(), noisy.view()]).expect("same width");
    let rbm = TrainConfig {
        seed: cfg.sub_seed(salt::DENOISE_TRAINING),
        ..cfg.rbm.clone()
    };
    let mut base = train_greedy(&sizes, &data, &rbm)?;
    base.provenance.config_hash = Some(cfg.hash());
    let scores = compute_relative_activity(&base, &clean, &noisy)?;
    build_denoise_model(&base, &scores, &clean, &cfg.denoise)
}

/// Classifier inputs for a symbol set: the normalized received windows,
/// passed through `denoiser` when one is given.
pub fn classifier_features(
    cfg: &ExperimentConfig,
    set: &SymbolSet,
    denoiser: Option<&DenoiseModel>,
) -> Result<Array2<f64>> {
    let rec = reconstruct_symbols(&set.noisy_segments(), denoiser, &cfg.resolutions)?;
    Ok(classifier_inputs(&rec))
}

/// Random stack of the given sizes, used when the pre-training budget is
/// zero.
fn untrained_stack(sizes: &[usize], seed: u64) -> Result<DbnModel> {
    let mut rng = seeded(seed);
    DbnModel::new(
        sizes
            .windows(2)
            .map(|w| RbmParams::random_init(w[0], w[1], &mut rng))
            .collect(),
    )
}

/// Greedy pre-training followed by supervised fine-tuning with early stopping
/// on the validation split. `layers` overrides the preset's hidden sizes.
pub fn train_classifier(
    cfg: &ExperimentConfig,
    train: &SymbolSet,
    validation: &SymbolSet,
    denoiser: Option<&DenoiseModel>,
    layers: Option<&[usize]>,
) -> Result<ClassifierModel> {
    ensure!(!train.is_empty(), Input, "training split is empty");
    let x = classifier_features(cfg, train, denoiser)?;
    let sizes = match layers {
        Some(hidden) => std::iter::once(x.ncols()).chain(hidden.iter().copied()).collect(),
        None => preset_layers(&cfg.classify_preset, x.ncols())?,
    };
    let seed = cfg.sub_seed(salt::CLASSIFIER_TRAINING);
    let mut base = if cfg.rbm.epochs == 0 {
        untrained_stack(&sizes, seed)?
    } else {
        train_greedy(
            &sizes,
            &x,
            &TrainConfig {
                seed,
                ..cfg.rbm.clone()
            },
        )?
    };
    base.provenance.config_hash = Some(cfg.hash());
    let vx = (!validation.is_empty())
        .then(|| classifier_features(cfg, validation, denoiser))
        .transpose()?;
    let ft = FineTuneConfig {
        seed: seed ^ 1,
        ..cfg.fine_tune.clone()
    };
    fine_tune_classifier(
        &base,
        &x,
        &train.labels,
        cfg.modulation.scheme.arity(),
        vx.as_ref().map(|v| (v, validation.labels.as_slice())),
        &ft,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{generate_split, ExperimentKind};

    #[test]
    fn zero_budget_classifier_is_untrained() {
        let mut cfg = ExperimentConfig::for_kind(ExperimentKind::ClassifyAwgn);
        cfg.rbm.epochs = 0;
        cfg.fine_tune.epochs = 0;
        let train = generate_split(&cfg, 64, &[10.0], 1, 0).unwrap();
        let val = generate_split(&cfg, 0, &[10.0], 2, 64).unwrap();
        let cm = train_classifier(&cfg, &train, &val, None, Some(&[8])).unwrap();
        assert_eq!(cm.base.layer_sizes(), vec![40, 8]);
        assert!(cm.base.layers[0].c.iter().all(|&c| c == 0.0));
    }
}
