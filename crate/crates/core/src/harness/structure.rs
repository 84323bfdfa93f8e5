use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{classifier_features, generate_dataset, salt, train_classifier, train_denoiser, ExperimentConfig};
use crate::dbn::classify_batch;
use crate::error::{ensure, Result};
use crate::io::{self, ArtifactMeta};
use crate::rng::derive_seed;

pub const STRUCTURE_CSV_HEADER: &str = "layers,epochs,repeat,seed,bits,errors,ber,wall_ms";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureRow {
    /// Hidden-layer sizes, input excluded.
    pub layers: Vec<usize>,
    pub epochs: usize,
    pub repeat: usize,
    pub seed: u64,
    pub bits: usize,
    pub errors: usize,
    pub ber: f64,
    pub wall_ms: u64,
}

/// Trains every structure at every epoch budget and reports held-out BER at
/// the configured Eb/No. Each repeat generates its own dataset and uses its
/// own weight seeds; all structures within a repeat share that dataset.
/// A budget applies to both pre-training and fine-tuning; zero means an
/// untrained network.
pub fn run_structure_search(cfg: &ExperimentConfig) -> Result<Vec<StructureRow>> {
    cfg.validate()?;
    let sc = &cfg.structure;
    ensure!(!sc.structures.is_empty(), Config, "no structures to search");
    ensure!(!sc.epoch_budgets.is_empty(), Config, "no epoch budgets");
    ensure!(sc.repeats >= 1, Config, "repeats must be at least 1");
    let spec = &cfg.modulation;
    let mut rows = Vec::new();
    for repeat in 0..sc.repeats {
        let seed = derive_seed(cfg.sub_seed(salt::STRUCTURE), repeat as u64);
        let rcfg = ExperimentConfig {
            seed,
            ebno_grid_db: vec![sc.ebno_db],
            ..cfg.clone()
        };
        let ds = generate_dataset(&rcfg)?;
        let denoiser = if rcfg.classify_on_denoised {
            Some(train_denoiser(&rcfg, &ds.train)?)
        } else {
            None
        };
        let test_x = classifier_features(&rcfg, &ds.test, denoiser.as_ref())?;
        let truth = spec.bits_of(&ds.test.labels);
        for layers in &sc.structures {
            for &epochs in &sc.epoch_budgets {
                let t0 = Instant::now();
                let mut ecfg = rcfg.clone();
                ecfg.rbm.epochs = epochs;
                ecfg.fine_tune.epochs = epochs;
                let cm = train_classifier(&ecfg, &ds.train, &ds.validation, denoiser.as_ref(), Some(layers))?;
                let labels: Vec<usize> = classify_batch(&cm, &test_x)?.iter().map(|c| c.label).collect();
                let errors = spec.bits_of(&labels).count_errors(&truth);
                let bits = truth.len();
                log::info!("repeat {repeat} layers {layers:?} epochs {epochs}: {errors}/{bits}");
                rows.push(StructureRow {
                    layers: layers.clone(),
                    epochs,
                    repeat,
                    seed,
                    bits,
                    errors,
                    ber: errors as f64 / bits.max(1) as f64,
                    wall_ms: if cfg.reproducible {
                        0
                    } else {
                        t0.elapsed().as_millis() as u64
                    },
                });
            }
        }
    }
    rows.sort_by(|a, b| (&a.layers, a.epochs, a.repeat).cmp(&(&b.layers, b.epochs, b.repeat)));
    Ok(rows)
}

pub fn structure_csv(rows: &[StructureRow]) -> String {
    let mut out = format!("{STRUCTURE_CSV_HEADER}\n");
    for r in rows {
        let layers: Vec<String> = r.layers.iter().map(usize::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            layers.join("-"),
            r.epochs,
            r.repeat,
            r.seed,
            r.bits,
            r.errors,
            r.ber,
            r.wall_ms
        );
    }
    out
}

#[derive(Serialize)]
struct StructureMeta<'a> {
    artifact: &'a ArtifactMeta,
    config: &'a ExperimentConfig,
}

/// Writes the CSV and a `<path>.meta.json` sidecar with provenance and the
/// full configuration.
pub fn write_structure_csv(
    path: &Path,
    rows: &[StructureRow],
    cfg: &ExperimentConfig,
    artifact: &ArtifactMeta,
) -> Result<()> {
    io::write_bytes(path, structure_csv(rows).as_bytes())?;
    let mut meta_path = path.as_os_str().to_owned();
    meta_path.push(".meta.json");
    io::write_json(Path::new(&meta_path), &StructureMeta { artifact, config: cfg })
}
