use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{salt, ExperimentConfig};
use crate::channel::{apply_awgn, propagate, sample_channel_params};
use crate::dsp;
use crate::error::{ensure, Result};
use crate::io::{self, ArtifactMeta};
use crate::pixelizer::{multi_resolution, FrameSet, Resolution};
use crate::receiver::{frame_matrix, normalized_symbols, NormScope};
use crate::rng::trial_rng;
use crate::waveforms::{energy_per_bit, modulate, BitSequence};

/// Aligned transmitted and received symbol windows.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSet {
    /// Transmitted symbol waveforms, one row per symbol.
    pub clean: Array2<f64>,
    /// Received windows at the genie symbol timing.
    pub noisy: Array2<f64>,
    pub labels: Vec<usize>,
    pub ebno_db: Vec<f64>,
    /// Number of propagation paths in each symbol's channel realization.
    pub path_counts: Vec<usize>,
    /// Global index of the first symbol; splits occupy disjoint ranges.
    pub first_index: usize,
}

impl SymbolSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.first_index..self.first_index + self.len()
    }

    fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
        m.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// Per-symbol min-max normalized transmitted windows.
    pub fn clean_segments(&self) -> Vec<Vec<f64>> {
        Self::rows(&self.clean)
            .iter()
            .flat_map(|r| normalized_symbols(r, r.len(), NormScope::Symbol))
            .collect()
    }

    /// Per-symbol min-max normalized received windows.
    pub fn noisy_segments(&self) -> Vec<Vec<f64>> {
        Self::rows(&self.noisy)
            .iter()
            .flat_map(|r| normalized_symbols(r, r.len(), NormScope::Symbol))
            .collect()
    }

    pub fn clean_frames(&self, res: &[Resolution]) -> Result<Array2<f64>> {
        frame_matrix(&self.clean_segments(), res)
    }

    pub fn noisy_frames(&self, res: &[Resolution]) -> Result<Array2<f64>> {
        frame_matrix(&self.noisy_segments(), res)
    }

    /// Symbols whose Eb/No equals `ebno_db`.
    pub fn at_ebno(&self, ebno_db: f64) -> SymbolSet {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.ebno_db[i] == ebno_db).collect();
        self.select(&keep)
    }

    pub fn select(&self, keep: &[usize]) -> SymbolSet {
        SymbolSet {
            clean: self.clean.select(Axis(0), keep),
            noisy: self.noisy.select(Axis(0), keep),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            ebno_db: keep.iter().map(|&i| self.ebno_db[i]).collect(),
            path_counts: keep.iter().map(|&i| self.path_counts[i]).collect(),
            first_index: self.first_index,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: SymbolSet,
    pub validation: SymbolSet,
    pub test: SymbolSet,
}

impl Dataset {
    pub fn splits(&self) -> [(&'static str, &SymbolSet); 3] {
        [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ]
    }
}

/// Generates `n_symbols` symbols, cycling through `ebno_grid` over channel
/// realizations. Realization `i` draws from `trial_rng(seed, i)`.
pub fn generate_split(
    cfg: &ExperimentConfig,
    n_symbols: usize,
    ebno_grid: &[f64],
    seed: u64,
    first_index: usize,
) -> Result<SymbolSet> {
    ensure!(!ebno_grid.is_empty(), Config, "Eb/No grid is empty");
    let spec = &cfg.modulation;
    let sps = spec.samples_per_symbol();
    let bps = spec.bits_per_symbol();
    let table = spec.symbol_waveforms();
    // earlier symbols feed multipath echoes into the kept window; one more
    // follows so a compressed window never reads past the end
    let context = cfg.channel.max_delay_samples.div_ceil(sps) + 1;
    let burst = cfg.burst_symbols;

    let mut clean = Vec::with_capacity(n_symbols * sps);
    let mut noisy = Vec::with_capacity(n_symbols * sps);
    let mut labels = Vec::with_capacity(n_symbols);
    let mut ebno_db = Vec::with_capacity(n_symbols);
    let mut path_counts = Vec::with_capacity(n_symbols);

    let mut realization = 0u64;
    while labels.len() < n_symbols {
        let keep = burst.min(n_symbols - labels.len());
        let total = context + keep + 1;
        let mut rng = trial_rng(seed, realization);
        let ebno = ebno_grid[realization as usize % ebno_grid.len()];
        realization += 1;

        let bits = BitSequence::random(total * bps, &mut rng);
        let symbols = spec.symbols_of(&bits)?;
        let tx = modulate(&bits, spec)?;
        let params = sample_channel_params(&cfg.channel, ebno, tx.len(), spec.fs_hz, &mut rng)?;
        let eb = energy_per_bit(&tx, bits.len());
        let rx = apply_awgn(&propagate(&tx, &params)?, ebno, eb, &mut rng)?;
        let alpha = params.paths[0].doppler_alpha;
        let rx: Vec<f64> = if cfg.genie_compensation {
            dsp::time_scale(rx.samples(), 1.0 / alpha)
        } else {
            rx.into_samples()
        };
        let step = if cfg.genie_compensation { 1.0 } else { 1.0 / alpha };

        for k in context..context + keep {
            let start = (k as f64 * sps as f64 * step).round() as usize;
            noisy.extend((start..start + sps).map(|i| rx.get(i).copied().unwrap_or(0.0)));
            clean.extend_from_slice(&table[symbols[k]]);
            labels.push(symbols[k]);
            ebno_db.push(ebno);
            path_counts.push(params.paths.len());
        }
    }
    let shape = (n_symbols, sps);
    Ok(SymbolSet {
        clean: Array2::from_shape_vec(shape, clean).expect("sized above"),
        noisy: Array2::from_shape_vec(shape, noisy).expect("sized above"),
        labels,
        ebno_db,
        path_counts,
        first_index,
    })
}

/// Generates the three splits. Training and validation cycle through the
/// training Eb/No values, the test split through the sweep grid; each split
/// draws from its own derived seed.
pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let [n_train, n_val, n_test] = cfg.split_sizes();
    Ok(Dataset {
        train: generate_split(cfg, n_train, &cfg.train_ebno_db, cfg.sub_seed(salt::TRAIN), 0)?,
        validation: generate_split(cfg, n_val, &cfg.train_ebno_db, cfg.sub_seed(salt::VALIDATION), n_train)?,
        test: generate_split(
            cfg,
            n_test,
            &cfg.ebno_grid_db,
            cfg.sub_seed(salt::TEST),
            n_train + n_val,
        )?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SplitIndex {
    first_index: usize,
    samples_per_symbol: usize,
    labels: Vec<usize>,
    ebno_db: Vec<f64>,
    path_counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct DatasetIndex {
    artifact: ArtifactMeta,
    resolutions: Vec<Resolution>,
    train: SplitIndex,
    validation: SplitIndex,
    test: SplitIndex,
}

fn frame_sets(segments: &[Vec<f64>], res: &[Resolution]) -> Result<Vec<FrameSet>> {
    segments.iter().map(|s| multi_resolution(s, res)).collect()
}

/// Writes `dataset.json` plus, per split, the raw windows as f32 matrices
/// and the pixelized clean/noisy frame sets.
pub fn write_dataset(dir: &Path, ds: &Dataset, res: &[Resolution], artifact: &ArtifactMeta) -> Result<()> {
    let index_of = |s: &SymbolSet| SplitIndex {
        first_index: s.first_index,
        samples_per_symbol: s.clean.ncols(),
        labels: s.labels.clone(),
        ebno_db: s.ebno_db.clone(),
        path_counts: s.path_counts.clone(),
    };
    for (name, s) in ds.splits() {
        io::write_f32_matrix(&dir.join(format!("{name}_clean.f32")), &s.clean)?;
        io::write_f32_matrix(&dir.join(format!("{name}_noisy.f32")), &s.noisy)?;
        io::write_frame_sets(
            &dir.join(format!("{name}_clean_frames.bin")),
            &frame_sets(&s.clean_segments(), res)?,
        )?;
        io::write_frame_sets(
            &dir.join(format!("{name}_noisy_frames.bin")),
            &frame_sets(&s.noisy_segments(), res)?,
        )?;
    }
    let index = DatasetIndex {
        artifact: artifact.clone(),
        resolutions: res.to_vec(),
        train: index_of(&ds.train),
        validation: index_of(&ds.validation),
        test: index_of(&ds.test),
    };
    io::write_json(&dir.join("dataset.json"), &index)
}

/// Reads a dataset written by [`write_dataset`]. Raw windows come back at
/// f32 precision.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let index: DatasetIndex = io::read_json(&dir.join("dataset.json"))?;
    let load = |name: &str, ix: SplitIndex| -> Result<SymbolSet> {
        let clean = io::read_f32_matrix(&dir.join(format!("{name}_clean.f32")))?;
        let noisy = io::read_f32_matrix(&dir.join(format!("{name}_noisy.f32")))?;
        ensure!(
            clean.dim() == noisy.dim() && clean.nrows() == ix.labels.len(),
            Format,
            "{}: {name} split matrices disagree with the index",
            dir.display()
        );
        Ok(SymbolSet {
            clean,
            noisy,
            labels: ix.labels,
            ebno_db: ix.ebno_db,
            path_counts: ix.path_counts,
            first_index: ix.first_index,
        })
    };
    Ok(Dataset {
        train: load("train", index.train)?,
        validation: load("validation", index.validation)?,
        test: load("test", index.test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NOISELESS_EBNO_DB;
    use crate::harness::ExperimentKind;

    fn small(kind: ExperimentKind, n: usize) -> ExperimentConfig {
        ExperimentConfig {
            dataset_symbols: n,
            ..ExperimentConfig::for_kind(kind)
        }
    }

    #[test]
    fn noiseless_identity_channel_gives_equal_frames() {
        let cfg = small(ExperimentKind::AwgnDenoise, 100);
        let s = generate_split(&cfg, 100, &[NOISELESS_EBNO_DB], 5, 0).unwrap();
        assert_eq!(s.clean, s.noisy);
        assert_eq!(
            s.clean_frames(&cfg.resolutions).unwrap(),
            s.noisy_frames(&cfg.resolutions).unwrap()
        );
    }

    #[test]
    fn splits_are_disjoint_and_sized() {
        let cfg = small(ExperimentKind::AwgnDenoise, 200);
        let ds = generate_dataset(&cfg).unwrap();
        assert_eq!(ds.train.len(), 100);
        assert_eq!(ds.validation.len(), 40);
        assert_eq!(ds.test.len(), 60);
        assert!(ds.train.indices().end <= ds.validation.indices().start);
        assert!(ds.validation.indices().end <= ds.test.indices().start);
        assert_ne!(ds.train.noisy.row(0), ds.validation.noisy.row(0));
    }

    #[test]
    fn labels_match_clean_waveforms() {
        let cfg = small(ExperimentKind::MultipathDenoise, 50);
        let s = generate_split(&cfg, 50, &[0.0], 1, 0).unwrap();
        let table = cfg.modulation.symbol_waveforms();
        for (row, &l) in s.clean.rows().into_iter().zip(&s.labels) {
            assert_eq!(row.to_vec(), table[l]);
        }
    }

    #[test]
    fn ebno_cycles_over_realizations() {
        let cfg = small(ExperimentKind::AwgnDenoise, 9);
        let s = generate_split(&cfg, 9, &[-10.0, -5.0, 0.0], 1, 0).unwrap();
        assert_eq!(s.at_ebno(-5.0).len(), 3);
    }

    #[test]
    fn round_trip_through_files() {
        let cfg = small(ExperimentKind::AwgnDenoise, 30);
        let ds = generate_dataset(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &ds, &cfg.resolutions, &cfg.artifact_meta("test")).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.test.labels, ds.test.labels);
        let err = (&back.train.noisy - &ds.train.noisy)
            .mapv(f64::abs)
            .fold(0.0f64, |a, &b| a.max(b));
        assert!(err < 1e-5);
    }
}
