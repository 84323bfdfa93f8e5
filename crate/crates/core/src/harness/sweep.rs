use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{salt, ExperimentConfig, SyncMode, TrainedModels};
use crate::channel::{apply_awgn, propagate, sample_channel_params};
use crate::error::{Error, Result};
use crate::io::{self, ArtifactMeta};
use crate::receiver::{
    demodulate_payload, detect_pilot_blocks, estimate_doppler, extract_payload, payload_start, Method, RxModels,
};
use crate::rng::trial_rng;
use crate::waveforms::{build_frame, energy_per_bit, modulate, BitSequence, FrameLayout, Waveform};

pub const SWEEP_CSV_HEADER: &str = "method,ebno_db,bits,errors,ber,seed,wall_ms";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub method: Method,
    pub ebno_db: f64,
    pub bits: usize,
    pub errors: usize,
    pub ber: f64,
    pub seed: u64,
    /// Simulation plus demodulation time attributed to this point.
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    /// Sorted by method name, then Eb/No.
    pub records: Vec<BerRecord>,
    pub config_hash: String,
    /// Frames whose pilots could not be found, per Eb/No point.
    pub detection_failures: Vec<(f64, usize)>,
}

impl Sweep {
    pub fn get(&self, method: Method, ebno_db: f64) -> Option<&BerRecord> {
        self.records.iter().find(|r| r.method == method && r.ebno_db == ebno_db)
    }
}

/// Half-width of the normal-approximation 95% interval on a BER estimate.
pub fn ber_confidence_halfwidth(errors: usize, bits: usize) -> f64 {
    if bits == 0 {
        return f64::INFINITY;
    }
    let p = errors as f64 / bits as f64;
    1.96 * (p * (1.0 - p) / bits as f64).sqrt()
}

fn confident(errors: usize, bits: usize) -> bool {
    let p = errors as f64 / bits.max(1) as f64;
    ber_confidence_halfwidth(errors, bits) <= (0.3 * p).max(5e-3)
}

struct Trial {
    errors: Vec<usize>,
    nanos: Vec<u128>,
    detected: bool,
}

struct Frame {
    rx: Waveform,
    bits: BitSequence,
    /// Payload start and Doppler coefficient of the direct path.
    genie: (f64, f64),
}

fn simulate_frame<R: Rng>(cfg: &ExperimentConfig, layout: &FrameLayout, ebno_db: f64, rng: &mut R) -> Result<Frame> {
    let spec = &cfg.modulation;
    let bits = BitSequence::random(layout.payload_bits, rng);
    let payload = modulate(&bits, spec)?;
    let frame = build_frame(layout, &payload)?;
    let lead = rng.random_range(0..=cfg.max_lead_in);
    let mut samples = vec![0.0; lead];
    samples.extend_from_slice(frame.samples());
    samples.resize(samples.len() + layout.guard_samples + spec.samples_per_symbol(), 0.0);
    let tx = Waveform::new(samples, spec.fs_hz)?;
    let params = sample_channel_params(&cfg.channel, ebno_db, tx.len(), spec.fs_hz, rng)?;
    let eb = energy_per_bit(&payload, bits.len());
    let rx = apply_awgn(&propagate(&tx, &params)?, ebno_db, eb, rng)?;
    let alpha = params.paths[0].doppler_alpha;
    let start = (lead + layout.preamble_len()) as f64 / alpha;
    Ok(Frame {
        rx,
        bits,
        genie: (start, alpha),
    })
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    layout: FrameLayout,
    plain: RxModels,
    full: RxModels,
    seed: u64,
    block: usize,
}

impl Context<'_> {
    fn run_trial(&self, ebno_db: f64, t: u64) -> Result<Trial> {
        let cfg = self.cfg;
        let spec = &cfg.modulation;
        let t0 = Instant::now();
        let mut rng = trial_rng(self.seed, t);
        let frame = simulate_frame(cfg, &self.layout, ebno_db, &mut rng)?;
        let sync = match cfg.sync {
            SyncMode::Genie => Some(frame.genie),
            SyncMode::Pilot => detect_pilot_blocks(&frame.rx, &self.layout, cfg.detection_threshold, self.block)
                .and_then(|d| {
                    let a = estimate_doppler(&d, &self.layout)?;
                    Ok((payload_start(&d, &self.layout, a), a))
                })
                .ok(),
        };
        let shared = t0.elapsed().as_nanos();
        let n = self.layout.payload_bits / spec.bits_per_symbol() * spec.samples_per_symbol();
        let mut errors = Vec::with_capacity(cfg.methods.len());
        let mut nanos = Vec::with_capacity(cfg.methods.len());
        for &method in &cfg.methods {
            let t1 = Instant::now();
            let decided = match sync {
                None => BitSequence::new(vec![0; frame.bits.len()])?,
                Some((start, alpha)) => {
                    let rx_cfg = cfg.rx_config(method);
                    let payload = extract_payload(
                        frame.rx.samples(),
                        start,
                        n,
                        rx_cfg.compensates(method).then_some(alpha),
                    )?;
                    let models = if method == Method::DbnFull {
                        &self.full
                    } else {
                        &self.plain
                    };
                    let (symbols, _) = demodulate_payload(&payload, &rx_cfg, method, models)?;
                    spec.bits_of(&symbols)
                }
            };
            errors.push(decided.count_errors(&frame.bits));
            nanos.push(shared + t1.elapsed().as_nanos());
        }
        Ok(Trial {
            errors,
            nanos,
            detected: sync.is_some(),
        })
    }

    fn run_batch(&self, ebno_db: f64, trials: std::ops::Range<u64>) -> Result<Vec<Trial>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            trials.into_par_iter().map(|t| self.run_trial(ebno_db, t)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            trials.map(|t| self.run_trial(ebno_db, t)).collect()
        }
    }
}

fn models_for_sweep(cfg: &ExperimentConfig, given: Option<&TrainedModels>) -> Result<TrainedModels> {
    let mut out = given.cloned().unwrap_or_default();
    let needs_denoiser = cfg
        .methods
        .iter()
        .any(|m| m.needs_denoiser() || (m.needs_classifier() && cfg.classify_on_denoised));
    let needs_classifier = cfg.methods.iter().any(|m| m.needs_classifier());
    if needs_denoiser && out.denoise.is_none() {
        let path = cfg.models.denoise.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "the sweep needs a de-noise model (preset {}); set models.denoise",
                cfg.denoise_preset
            ))
        })?;
        out.denoise = Some(io::read_denoise_model(path).map_err(|e| {
            Error::Config(format!(
                "de-noise model (preset {}) unavailable: {e}",
                cfg.denoise_preset
            ))
        })?);
    }
    if needs_classifier && out.classifier.is_none() {
        let path = cfg.models.classifier.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "the sweep needs a classifier model (preset {}); set models.classifier",
                cfg.classify_preset
            ))
        })?;
        out.classifier = Some(io::read_classifier_model(path).map_err(|e| {
            Error::Config(format!(
                "classifier model (preset {}) unavailable: {e}",
                cfg.classify_preset
            ))
        })?);
    }
    Ok(out)
}

/// Monte-Carlo BER of every configured method at every grid point. Trial
/// `t` draws from `trial_rng(sweep_seed, t)` at every Eb/No and every method
/// decodes the same received frame, so points are paired. Models not
/// supplied in `models` are loaded from the configured paths.
pub fn run_ber_sweep(cfg: &ExperimentConfig, models: Option<&TrainedModels>) -> Result<Sweep> {
    cfg.validate()?;
    let trained = models_for_sweep(cfg, models)?;
    let ctx = Context {
        cfg,
        layout: cfg.frame.layout(cfg.modulation.fs_hz)?,
        plain: RxModels {
            denoise: trained.denoise.clone(),
            classifier: None,
        },
        full: RxModels {
            denoise: trained.denoise.clone().filter(|_| cfg.classify_on_denoised),
            classifier: trained.classifier.clone(),
        },
        seed: cfg.sub_seed(salt::SWEEP),
        block: cfg.rx_config(Method::Mle).pilot_block_samples(),
    };
    let bits_per_frame = ctx.layout.payload_bits;
    let max_frames = cfg.max_bits.div_ceil(bits_per_frame).max(cfg.trials);
    let mut records = Vec::new();
    let mut failures = Vec::new();

    for &ebno in &cfg.ebno_grid_db {
        let m = cfg.methods.len();
        let (mut errors, mut nanos) = (vec![0usize; m], vec![0u128; m]);
        let mut frames = 0usize;
        let mut missed = 0usize;
        loop {
            let batch = cfg.trials.min(max_frames - frames);
            for trial in ctx.run_batch(ebno, frames as u64..(frames + batch) as u64)? {
                for k in 0..m {
                    errors[k] += trial.errors[k];
                    nanos[k] += trial.nanos[k];
                }
                missed += usize::from(!trial.detected);
            }
            frames += batch;
            let bits = frames * bits_per_frame;
            let done = errors.iter().all(|&e| confident(e, bits));
            if !cfg.auto_extend || done || frames >= max_frames {
                break;
            }
        }
        log::info!("Eb/No {ebno} dB: {frames} frames, {missed} undetected");
        failures.push((ebno, missed));
        for (k, &method) in cfg.methods.iter().enumerate() {
            let bits = frames * bits_per_frame;
            records.push(BerRecord {
                method,
                ebno_db: ebno,
                bits,
                errors: errors[k],
                ber: errors[k] as f64 / bits as f64,
                seed: cfg.seed,
                wall_ms: if cfg.reproducible {
                    0
                } else {
                    (nanos[k] / 1_000_000) as u64
                },
            });
        }
    }
    records.sort_by(|a, b| {
        a.method
            .name()
            .cmp(b.method.name())
            .then(a.ebno_db.total_cmp(&b.ebno_db))
    });
    Ok(Sweep {
        records,
        config_hash: cfg.hash(),
        detection_failures: failures,
    })
}

pub fn sweep_csv(records: &[BerRecord]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method, r.ebno_db, r.bits, r.errors, r.ber, r.seed, r.wall_ms
        );
    }
    out
}

#[derive(Serialize)]
struct SweepMeta<'a> {
    artifact: &'a ArtifactMeta,
    config: &'a ExperimentConfig,
    detection_failures: &'a [(f64, usize)],
}

/// Writes the CSV and a `<path>.meta.json` sidecar with provenance and the
/// full configuration.
pub fn write_sweep_csv(path: &Path, sweep: &Sweep, cfg: &ExperimentConfig, artifact: &ArtifactMeta) -> Result<()> {
    io::write_bytes(path, sweep_csv(&sweep.records).as_bytes())?;
    let meta = SweepMeta {
        artifact,
        config: cfg,
        detection_failures: &sweep.detection_failures,
    };
    let mut meta_path = path.as_os_str().to_owned();
    meta_path.push(".meta.json");
    io::write_json(Path::new(&meta_path), &meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NOISELESS_EBNO_DB;
    use crate::harness::ExperimentKind;

    fn awgn(grid: Vec<f64>, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            ebno_grid_db: grid,
            methods: vec![Method::Mle, Method::MleDopplerSync],
            trials,
            auto_extend: false,
            reproducible: true,
            ..ExperimentConfig::for_kind(ExperimentKind::AwgnDenoise)
        }
    }

    #[test]
    fn noiseless_point_is_error_free() {
        let s = run_ber_sweep(&awgn(vec![NOISELESS_EBNO_DB], 2), None).unwrap();
        assert!(s.records.iter().all(|r| r.errors == 0 && r.bits == 832));
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let s = run_ber_sweep(&awgn(vec![0.0, 4.0], 1), None).unwrap();
        let csv = sweep_csv(&s.records);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines.len(), 1 + 2 * 2);
        assert!(lines[1].starts_with("mle,0,"));
        assert!(lines[3].starts_with("mle+doppler-sync,0,"));
    }

    #[test]
    fn auto_extend_meets_target() {
        let mut cfg = awgn(vec![0.0], 1);
        cfg.auto_extend = true;
        let s = run_ber_sweep(&cfg, None).unwrap();
        let r = &s.records[0];
        assert!(ber_confidence_halfwidth(r.errors, r.bits) <= (0.3 * r.ber).max(5e-3));
        assert!(r.bits > 416);
    }

    #[test]
    fn missing_model_names_preset() {
        let mut cfg = awgn(vec![0.0], 1);
        cfg.methods = vec![Method::DbnFull];
        cfg.classify_on_denoised = false;
        let err = run_ber_sweep(&cfg, None).unwrap_err().to_string();
        assert!(err.contains("desk-classify"), "{err}");
    }

    #[test]
    fn halfwidth_oracle() {
        assert!((ber_confidence_halfwidth(100, 10_000) - 1.96 * (0.01f64 * 0.99 / 1e4).sqrt()).abs() < 1e-15);
        assert_eq!(ber_confidence_halfwidth(0, 100), 0.0);
    }
}
