//! Browser bindings for a few interactive pieces of the link simulator.
//!
//! Every exported function returns a JSON string; the page parses it and
//! draws on a canvas. The plain Rust functions behind them are public so
//! they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use uwa_dbn::channel::{apply_channel, sample_channel_params, ChannelParams, DistributionSpec};
use uwa_dbn::harness::{ExperimentConfig, ExperimentKind};
use uwa_dbn::pixelizer::{normalize, pixelize};
use uwa_dbn::receiver::{receive, Method, RxConfig};
use uwa_dbn::rng::{seeded, SimRng};
use uwa_dbn::waveforms::{build_frame, modulate, BitSequence, ModSpec, Waveform};
use uwa_dbn::Result;

/// Longest trace handed back for plotting.
const PLOT_POINTS: usize = 1500;

#[derive(Debug, Serialize)]
pub struct LinkResult {
    pub tx: Vec<f64>,
    pub rx: Vec<f64>,
    pub n_bits: usize,
    pub errors: usize,
    pub ber: f64,
    pub alpha: f64,
    pub alpha_hat: f64,
    pub payload_start: f64,
    pub up_corr: f64,
    pub down_corr: f64,
}

#[derive(Debug, Serialize)]
pub struct PixelResult {
    pub rows: usize,
    pub cols: usize,
    pub clean: Vec<u8>,
    pub noisy: Vec<u8>,
    pub clean_trace: Vec<f64>,
    pub noisy_trace: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct DopplerPoint {
    pub alpha: f64,
    pub alpha_hat: f64,
    pub ber: f64,
}

fn rx_config() -> RxConfig {
    ExperimentConfig::for_kind(ExperimentKind::DopplerDenoise).rx_config(Method::MleDopplerSync)
}

fn energy_per_bit(spec: &ModSpec) -> f64 {
    let table = spec.symbol_waveforms();
    table.iter().flatten().map(|v| v * v).sum::<f64>() / (table.len() * spec.bits_per_symbol()) as f64
}

fn transmit(cfg: &RxConfig, rng: &mut SimRng) -> Result<(BitSequence, Waveform)> {
    let spec = &cfg.modulation;
    let layout = cfg.frame.layout(spec.fs_hz)?;
    let bits = BitSequence::random(layout.payload_bits, rng);
    let frame = build_frame(&layout, &modulate(&bits, spec)?)?;
    let mut samples = vec![0.0; layout.guard_samples];
    samples.extend_from_slice(frame.samples());
    samples.resize(samples.len() + layout.guard_samples + spec.samples_per_symbol(), 0.0);
    Ok((bits, Waveform::new(samples, spec.fs_hz)?))
}

fn thin(x: &[f64]) -> Vec<f64> {
    let step = x.len().div_ceil(PLOT_POINTS).max(1);
    x.chunks(step)
        .map(|c| {
            c.iter()
                .copied()
                .fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m })
        })
        .collect()
}

/// Sends one frame through an `awgn` or `multipath` channel with every path
/// scaled by `alpha`, then receives it with pilot sync and the matched filter.
pub fn simulate_link(channel: &str, ebno_db: f64, alpha: f64, seed: u64) -> Result<LinkResult> {
    let cfg = rx_config();
    let mut rng = seeded(seed);
    let (bits, tx) = transmit(&cfg, &mut rng)?;
    let fs = cfg.modulation.fs_hz;
    let mut params = match channel {
        "awgn" => ChannelParams::awgn(ebno_db),
        "multipath" => sample_channel_params(&DistributionSpec::multipath(fs), ebno_db, tx.len(), fs, &mut rng)?,
        other => {
            return Err(uwa_dbn::Error::Config(format!(
                "unknown channel {other:?}; expected awgn or multipath"
            )))
        }
    };
    for p in &mut params.paths {
        p.doppler_alpha = alpha;
    }
    let rx = apply_channel(&tx, &params, energy_per_bit(&cfg.modulation), &mut rng)?;
    let report = receive(&rx, &cfg)?;
    let errors = bits.count_errors(&report.bits);
    Ok(LinkResult {
        tx: thin(tx.samples()),
        rx: thin(rx.samples()),
        n_bits: bits.len(),
        errors,
        ber: errors as f64 / bits.len() as f64,
        alpha,
        alpha_hat: report.alpha_hat,
        payload_start: report.timing.payload_start,
        up_corr: report.timing.up_corr,
        down_corr: report.timing.down_corr,
    })
}

/// Pixelizes one clean and one noisy BPSK symbol for bit `bit`.
pub fn pixelize_symbol(bit: u8, ebno_db: f64, rows: usize, seed: u64) -> Result<PixelResult> {
    let cfg = rx_config();
    let spec = &cfg.modulation;
    let clean = modulate(&BitSequence::new(vec![bit])?, spec)?;
    let mut rng = seeded(seed);
    let noisy = apply_channel(&clean, &ChannelParams::awgn(ebno_db), energy_per_bit(spec), &mut rng)?;
    let clean_trace = normalize(clean.samples())?;
    let noisy_trace = normalize(noisy.samples())?;
    let c = pixelize(&clean_trace, rows)?;
    let n = pixelize(&noisy_trace, rows)?;
    Ok(PixelResult {
        rows,
        cols: c.cols(),
        clean: c.cells().to_vec(),
        noisy: n.cells().to_vec(),
        clean_trace,
        noisy_trace,
    })
}

/// Pilot-based Doppler estimates over a grid of true scale factors.
pub fn doppler_curve(
    ebno_db: f64,
    alpha_min: f64,
    alpha_max: f64,
    steps: usize,
    seed: u64,
) -> Result<Vec<DopplerPoint>> {
    let steps = steps.max(2);
    (0..steps)
        .map(|i| {
            let alpha = alpha_min + (alpha_max - alpha_min) * i as f64 / (steps - 1) as f64;
            let r = simulate_link("awgn", ebno_db, alpha, seed.wrapping_add(i as u64))?;
            Ok(DopplerPoint {
                alpha,
                alpha_hat: r.alpha_hat,
                ber: r.ber,
            })
        })
        .collect()
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = simulateLink)]
pub fn simulate_link_js(channel: &str, ebno_db: f64, alpha: f64, seed: u32) -> std::result::Result<String, JsError> {
    to_js(simulate_link(channel, ebno_db, alpha, seed.into()))
}

#[wasm_bindgen(js_name = pixelizeSymbol)]
pub fn pixelize_symbol_js(bit: u8, ebno_db: f64, rows: usize, seed: u32) -> std::result::Result<String, JsError> {
    to_js(pixelize_symbol(bit, ebno_db, rows, seed.into()))
}

#[wasm_bindgen(js_name = dopplerCurve)]
pub fn doppler_curve_js(
    ebno_db: f64,
    alpha_min: f64,
    alpha_max: f64,
    steps: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(doppler_curve(ebno_db, alpha_min, alpha_max, steps, seed.into()))
}
