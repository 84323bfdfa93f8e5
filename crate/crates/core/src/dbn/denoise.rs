use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{downward_batch, upward_batch, DbnModel};
use crate::error::{ensure, Result};
use crate::pixelizer::{trace_from_values, FrameSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseConfig {
    /// Nodes scoring strictly above this quantile of the activity scores are
    /// treated as noise nodes.
    pub quantile: f64,
    /// Give each noise node its own clean-corpus mean instead of one shared
    /// value.
    pub per_node_neutral: bool,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            quantile: 0.8,
            per_node_neutral: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseModel {
    pub base: DbnModel,
    /// Top-layer indices clamped during reconstruction, ascending.
    pub noise_nodes: Vec<usize>,
    /// Clamp value for each entry of `noise_nodes`.
    pub neutral_values: Vec<f64>,
    pub activity_scores: Vec<f64>,
}

/// Mean absolute change of each top-layer activation between the clean and
/// noisy member of each pair (rows of `clean` and `noisy` correspond).
pub fn compute_relative_activity(m: &DbnModel, clean: &Array2<f64>, noisy: &Array2<f64>) -> Result<Vec<f64>> {
    ensure!(clean.nrows() > 0, Input, "no clean/noisy pairs");
    ensure!(
        clean.dim() == noisy.dim(),
        Input,
        "clean set is {:?} but noisy set is {:?}",
        clean.dim(),
        noisy.dim()
    );
    let a = upward_batch(m, clean)?;
    let b = upward_batch(m, noisy)?;
    let diff = (&b - &a).mapv(f64::abs);
    Ok(diff.mean_axis(Axis(0)).expect("non-empty").to_vec())
}

/// Linear-interpolation sample quantile (Hyndman-Fan type 7).
pub fn quantile_type7(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Selects noise nodes from activity scores and fixes their neutral values
/// from the top-layer activations of `clean_corpus`.
pub fn build_denoise_model(
    m: &DbnModel,
    scores: &[f64],
    clean_corpus: &Array2<f64>,
    cfg: &DenoiseConfig,
) -> Result<DenoiseModel> {
    ensure!(
        scores.len() == m.top_dim(),
        Input,
        "{} scores for a top layer of {} nodes",
        scores.len(),
        m.top_dim()
    );
    ensure!(
        cfg.quantile > 0.0 && cfg.quantile < 1.0,
        Config,
        "quantile must lie strictly between 0 and 1, got {}",
        cfg.quantile
    );
    ensure!(
        scores.iter().all(|s| s.is_finite()),
        Input,
        "activity scores must be finite"
    );
    ensure!(clean_corpus.nrows() > 0, Input, "clean corpus is empty");

    let threshold = quantile_type7(scores, cfg.quantile);
    let noise_nodes: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] > threshold).collect();
    if noise_nodes.is_empty() || noise_nodes.len() == scores.len() {
        log::warn!(
            "quantile {} selects {} of {} nodes as noise",
            cfg.quantile,
            noise_nodes.len(),
            scores.len()
        );
    }

    let top = upward_batch(m, clean_corpus)?;
    let node_means: Vec<f64> = noise_nodes
        .iter()
        .map(|&j| top.column(j).mean().expect("non-empty"))
        .collect();
    let neutral_values = if cfg.per_node_neutral || node_means.is_empty() {
        node_means
    } else {
        let shared = node_means.iter().sum::<f64>() / node_means.len() as f64;
        vec![shared; node_means.len()]
    };
    Ok(DenoiseModel {
        base: m.clone(),
        noise_nodes,
        neutral_values,
        activity_scores: scores.to_vec(),
    })
}

/// Reconstructs one waveform per row of flattened frame sets. The finest
/// frame (`rows × cols`) must lead each row. Output samples lie in [-1, 1].
pub fn denoise_batch(dm: &DenoiseModel, inputs: &Array2<f64>, rows: usize, cols: usize) -> Result<Vec<Vec<f64>>> {
    ensure!(
        rows * cols <= dm.base.input_dim(),
        Input,
        "a {rows}x{cols} frame does not fit a {}-unit input",
        dm.base.input_dim()
    );
    let mut top = upward_batch(&dm.base, inputs)?;
    for (&j, &v) in dm.noise_nodes.iter().zip(&dm.neutral_values) {
        top.column_mut(j).fill(v);
    }
    let recon = downward_batch(&dm.base, &top)?;
    Ok(recon
        .rows()
        .into_iter()
        .map(|r| {
            let finest: Vec<f64> = r.iter().take(rows * cols).copied().collect();
            trace_from_values(&finest, rows, cols)
                .into_iter()
                .map(|s| 2.0 * s - 1.0)
                .collect()
        })
        .collect())
}

/// [`denoise_batch`] for a single flattened input.
pub fn denoise_flat(dm: &DenoiseModel, flat: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    let input =
        Array2::from_shape_vec((1, flat.len()), flat.to_vec()).map_err(|e| crate::Error::Input(e.to_string()))?;
    Ok(denoise_batch(dm, &input, rows, cols)?.remove(0))
}

/// Reconstructed symbol waveform for one frame set, one sample per column of
/// its finest frame.
pub fn denoise(dm: &DenoiseModel, fs: &FrameSet) -> Result<Vec<f64>> {
    ensure!(!fs.frames.is_empty(), Input, "frame set is empty");
    let finest = &fs.frames[0];
    denoise_flat(dm, &fs.flatten(), finest.rows(), finest.cols())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbn::{downward_pass, upward_pass};
    use crate::rbm::RbmParams;
    use ndarray::array;

    #[test]
    fn quantile_matches_linear_interpolation() {
        assert_eq!(quantile_type7(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
        assert!((quantile_type7(&[0.9, 0.1, 0.1, 0.1], 0.7) - 0.18).abs() < 1e-12);
        assert!((quantile_type7(&[0.0, 10.0], 0.25) - 2.5).abs() < 1e-12);
    }

    fn two_node_model() -> DbnModel {
        // node 0 reads pixels 0-1, node 1 reads pixels 2-3
        let w = array![[3.0, 3.0, 0.0, 0.0], [0.0, 0.0, 3.0, 3.0]];
        DbnModel::new(vec![
            RbmParams::new(w, array![0.0, 0.0, 0.0, 0.0], array![-3.0, -3.0]).unwrap()
        ])
        .unwrap()
    }

    #[test]
    fn node_reading_corrupted_pixels_scores_higher() {
        let m = two_node_model();
        let clean = array![[1.0, 1.0, 1.0, 1.0], [0.0, 0.0, 0.0, 0.0]];
        // corrupt pixels 2-3 only
        let noisy = array![[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]];
        let s = compute_relative_activity(&m, &clean, &noisy).unwrap();
        assert!(s[1] > s[0]);
        assert!(s.iter().all(|v| v.is_finite() && *v >= 0.0));
        let same = compute_relative_activity(&m, &clean, &clean).unwrap();
        assert!(same.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn order_statistic_selection() {
        let w = Array2::zeros((4, 3));
        let m = DbnModel::new(vec![RbmParams::new(
            w,
            ndarray::Array1::zeros(3),
            ndarray::Array1::zeros(4),
        )
        .unwrap()])
        .unwrap();
        let corpus = Array2::ones((2, 3));
        let cfg = DenoiseConfig {
            quantile: 0.7,
            ..DenoiseConfig::default()
        };
        let dm = build_denoise_model(&m, &[0.9, 0.1, 0.1, 0.1], &corpus, &cfg).unwrap();
        assert_eq!(dm.noise_nodes, vec![0]);
        assert_eq!(dm.neutral_values, vec![0.5]);
        let dm = build_denoise_model(&m, &[0.3; 4], &corpus, &cfg).unwrap();
        assert!(dm.noise_nodes.is_empty());
    }

    #[test]
    fn shared_versus_per_node_neutral() {
        let m = two_node_model();
        let corpus = array![[1.0, 1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0]];
        let scores = [0.5, 0.6];
        let q = DenoiseConfig {
            quantile: 0.01,
            per_node_neutral: true,
        };
        let per = build_denoise_model(&m, &scores, &corpus, &q).unwrap();
        assert_eq!(per.noise_nodes, vec![1]);
        let shared = build_denoise_model(&m, &[0.0, 0.0], &corpus, &q).unwrap();
        assert!(shared.noise_nodes.is_empty());
        let both = build_denoise_model(
            &m,
            &[0.5, 0.6],
            &corpus,
            &DenoiseConfig {
                quantile: 0.01,
                per_node_neutral: false,
            },
        )
        .unwrap();
        assert_eq!(both.neutral_values.len(), 1);
        assert!(per.neutral_values[0] < 0.1);
    }

    #[test]
    fn empty_noise_set_is_plain_autoencoding() {
        let m = two_node_model();
        let dm = DenoiseModel {
            base: m.clone(),
            noise_nodes: vec![],
            neutral_values: vec![],
            activity_scores: vec![0.0, 0.0],
        };
        let x = [1.0, 0.0, 0.0, 1.0];
        let top = upward_pass(&m, &x).unwrap();
        let rec = downward_pass(&m, top.last().unwrap()).unwrap();
        let expect: Vec<f64> = trace_from_values(&rec, 2, 2).iter().map(|s| 2.0 * s - 1.0).collect();
        assert_eq!(denoise_flat(&dm, &x, 2, 2).unwrap(), expect);
    }

    #[test]
    fn rejects_bad_quantile() {
        let m = two_node_model();
        let c = Array2::ones((1, 4));
        for q in [0.0, 1.0] {
            let cfg = DenoiseConfig {
                quantile: q,
                ..DenoiseConfig::default()
            };
            assert!(build_denoise_model(&m, &[0.1, 0.2], &c, &cfg).is_err());
        }
    }
}
