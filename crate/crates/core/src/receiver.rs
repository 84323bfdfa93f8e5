//! Receive chain: pilot detection, Doppler estimation and compensation,
//! symbol slicing, and the two demodulators (coherent matched filter and
//! de-noise + classify networks).

use std::path::PathBuf;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channel::{MAX_ALPHA, MIN_ALPHA};
use crate::dbn::{classify_batch, denoise_batch, ClassifierModel, DenoiseModel};
use crate::dsp;
use crate::error::{ensure, Error, Result};
use crate::pixelizer::{self, Resolution, DEFAULT_RESOLUTIONS};
use crate::waveforms::{BitSequence, FrameConfig, FrameLayout, ModSpec, Waveform};

/// Correlation peaks of both pilots. Positions are in received samples with
/// sub-sample refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotDetection {
    /// Negative when a time-compressed sweep peaks ahead of the signal.
    pub up_peak_index: i64,
    pub down_peak_index: i64,
    pub up_peak_pos: f64,
    pub down_peak_pos: f64,
    pub up_corr: f64,
    pub down_corr: f64,
    /// Payload start assuming no time scaling.
    pub payload_offset: usize,
}

/// Running maximum of `x` over windows `[i + lo, i + hi]` for every `i`
/// such that the window starts inside `x`. Returns `(value, index)` pairs.
fn window_argmax(x: &[f64], lo: usize, hi: usize) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    let mut dq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut next = lo;
    for i in 0.. {
        let start = i + lo;
        if start >= x.len() {
            break;
        }
        let end = (i + hi).min(x.len() - 1);
        while next <= end {
            while dq.back().is_some_and(|&b| x[b] <= x[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        while dq.front().is_some_and(|&f| f < start) {
            dq.pop_front();
        }
        let j = *dq.front().expect("window is non-empty");
        out.push((x[j], j));
    }
    out
}

fn refine(env: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= env.len() {
        return i as f64;
    }
    i as f64 + dsp::parabolic_offset(env[i - 1], env[i], env[i + 1])
}

/// Apparent spacing between the up and down correlation peaks for a frame
/// time-scaled by `alpha`, in samples.
pub fn peak_spacing(layout: &FrameLayout, alpha: f64) -> f64 {
    let c = coupling_samples(layout);
    c + (layout.pilot_spacing() as f64 - c) / alpha
}

/// Range-Doppler coupling constant `T·(f0 + f1)/(f1 - f0)` of the pilot pair,
/// in samples.
fn coupling_samples(layout: &FrameLayout) -> f64 {
    let p = &layout.pilot;
    p.duration_s * layout.sample_rate_hz() * (p.f0_hz + p.f1_hz) / (p.f1_hz - p.f0_hz)
}

/// Locates the up and down pilots. The down peak is searched only where a
/// time scale within [`MIN_ALPHA`, `MAX_ALPHA`] could put it, and the pair
/// with the largest summed correlation wins.
pub fn detect_pilot(s: &Waveform, layout: &FrameLayout, threshold: f64) -> Result<PilotDetection> {
    detect_pilot_blocks(s, layout, threshold, 0)
}

/// [`detect_pilot`] with block-noncoherent correlation over `block`-sample
/// pieces of each template (see [`dsp::block_xcorr_envelope`]); 0 correlates
/// each template as a whole.
pub fn detect_pilot_blocks(s: &Waveform, layout: &FrameLayout, threshold: f64, block: usize) -> Result<PilotDetection> {
    ensure!(
        threshold > 0.0 && threshold < 1.0,
        Config,
        "detection threshold must lie in (0, 1), got {threshold}"
    );
    ensure!(
        s.len() >= layout.preamble_len(),
        Input,
        "signal of {} samples is shorter than the {}-sample preamble",
        s.len(),
        layout.preamble_len()
    );
    // a compressed up sweep correlates best at a lag before the sweep
    // itself begins, so leave room ahead of the first sample
    let fs = layout.sample_rate_hz();
    let (lead_up, _) = layout.pilot.doppler_lead_s(MAX_ALPHA);
    let (_, lead_down) = layout.pilot.doppler_lead_s(MIN_ALPHA);
    let pad = (lead_up.max(lead_down).max(0.0) * fs).ceil() as usize + 2;
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(s.samples());
    let env_up = dsp::block_xcorr_envelope(&padded, layout.pilot_up.samples(), block);
    let env_down = dsp::block_xcorr_envelope(&padded, layout.pilot_down.samples(), block);
    let a = peak_spacing(layout, MIN_ALPHA);
    let b = peak_spacing(layout, MAX_ALPHA);
    let lo = (a.min(b).floor() as usize).saturating_sub(2);
    let hi = a.max(b).ceil() as usize + 2;

    let best = window_argmax(&env_down, lo, hi)
        .into_iter()
        .enumerate()
        .map(|(i, (dv, j))| (env_up[i] + dv, i, j))
        .fold(None::<(f64, usize, usize)>, |acc, cand| match acc {
            Some(a) if a.0 >= cand.0 => Some(a),
            _ => Some(cand),
        });
    let Some((_, up, down)) = best else {
        return Err(Error::DetectionFailed("signal too short to hold both pilots".into()));
    };
    let (up_corr, down_corr) = (env_up[up], env_down[down]);
    if up_corr < threshold || down_corr < threshold {
        return Err(Error::DetectionFailed(format!(
            "best pilot correlations {up_corr:.3}/{down_corr:.3} below threshold {threshold}"
        )));
    }
    let shift = pad as f64;
    Ok(PilotDetection {
        up_peak_index: up as i64 - pad as i64,
        down_peak_index: down as i64 - pad as i64,
        up_peak_pos: refine(&env_up, up) - shift,
        down_peak_pos: refine(&env_down, down) - shift,
        up_corr,
        down_corr,
        payload_offset: (down + layout.pilot_down.len() + layout.guard_samples).saturating_sub(pad),
    })
}

/// Time-scale estimate from the pilot peak spacing.
///
/// Hyperbolic sweeps shift their correlation peak under time scaling by an
/// amount that differs in sign between the up and down sweep, so the
/// measured spacing is `c + (D - c)/α` rather than `D/α`, where `D` is the
/// transmitted spacing and `c` the coupling constant of the pilot band.
pub fn estimate_doppler(d: &PilotDetection, layout: &FrameLayout) -> Result<f64> {
    let measured = d.down_peak_pos - d.up_peak_pos;
    ensure!(measured > 0.0, Estimation, "down pilot peak precedes the up peak");
    let c = coupling_samples(layout);
    let nominal = layout.pilot_spacing() as f64;
    let denom = measured - c;
    ensure!(
        denom.abs() > 1e-9 && (nominal - c) / denom > 0.0,
        Estimation,
        "peak spacing {measured:.2} is inconsistent with any time scale"
    );
    Ok((nominal - c) / denom)
}

/// Sample position (in received samples) where the up pilot begins.
pub fn frame_start(d: &PilotDetection, layout: &FrameLayout, alpha_hat: f64) -> f64 {
    let (lead_up, _) = layout.pilot.doppler_lead_s(alpha_hat);
    d.up_peak_pos + lead_up * layout.sample_rate_hz()
}

/// Sample position (in received samples) where the payload begins.
pub fn payload_start(d: &PilotDetection, layout: &FrameLayout, alpha_hat: f64) -> f64 {
    frame_start(d, layout, alpha_hat) + layout.preamble_len() as f64 / alpha_hat
}

fn check_alpha(alpha: f64) -> Result<()> {
    ensure!(
        (MIN_ALPHA..=MAX_ALPHA).contains(&alpha),
        Input,
        "doppler estimate {alpha} outside [{MIN_ALPHA}, {MAX_ALPHA}]"
    );
    Ok(())
}

/// Undoes a time scaling by `alpha_hat`: output length `round(len·α̂)`.
pub fn compensate_doppler(s: &Waveform, alpha_hat: f64) -> Result<Waveform> {
    check_alpha(alpha_hat)?;
    Waveform::new(dsp::time_scale(s.samples(), 1.0 / alpha_hat), s.sample_rate_hz())
}

/// `n` payload samples starting at received position `start`. With
/// `alpha_hat` the received signal is resampled onto the transmit time
/// grid; otherwise samples are read at the nominal rate from
/// `round(start)`. Positions past the end read as zero.
pub fn extract_payload(s: &[f64], start: f64, n: usize, alpha_hat: Option<f64>) -> Result<Vec<f64>> {
    match alpha_hat {
        Some(a) => {
            check_alpha(a)?;
            Ok(dsp::resample_at(s, start, 1.0 / a, n, a.min(1.0)))
        }
        None => {
            let first = start.round().max(0.0) as usize;
            Ok((0..n).map(|i| s.get(first + i).copied().unwrap_or(0.0)).collect())
        }
    }
}

/// Per-symbol matched filter. Ties go to the lowest symbol index, i.e.
/// towards bit 0.
pub fn mle_symbols(s: &[f64], spec: &ModSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    let n = spec.samples_per_symbol();
    ensure!(
        s.len().is_multiple_of(n),
        Input,
        "{} samples is not a whole number of {n}-sample symbols",
        s.len()
    );
    let table = spec.symbol_waveforms();
    Ok(s.chunks(n)
        .map(|sym| {
            let mut best = (0, f64::NEG_INFINITY);
            for (k, cand) in table.iter().enumerate() {
                let corr: f64 = sym.iter().zip(cand).map(|(a, b)| a * b).sum();
                if corr > best.1 {
                    best = (k, corr);
                }
            }
            best.0
        })
        .collect())
}

pub fn mle_demodulate(s: &[f64], spec: &ModSpec) -> Result<BitSequence> {
    Ok(spec.bits_of(&mle_symbols(s, spec)?))
}

/// Scope of the min-max normalization applied before pixelization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormScope {
    #[default]
    Symbol,
    Frame,
}

fn normalize_or_flat(x: &[f64]) -> Vec<f64> {
    pixelizer::normalize(x).unwrap_or_else(|_| vec![0.5; x.len()])
}

/// Splits a payload into symbol segments normalized onto [0, 1]. A constant
/// segment maps to 0.5 everywhere.
pub fn normalized_symbols(payload: &[f64], samples_per_symbol: usize, scope: NormScope) -> Vec<Vec<f64>> {
    match scope {
        NormScope::Symbol => payload.chunks(samples_per_symbol).map(normalize_or_flat).collect(),
        NormScope::Frame => normalize_or_flat(payload)
            .chunks(samples_per_symbol)
            .map(<[f64]>::to_vec)
            .collect(),
    }
}

/// Flattened multi-resolution frame sets, one row per normalized segment.
pub fn frame_matrix(segments: &[Vec<f64>], resolutions: &[Resolution]) -> Result<Array2<f64>> {
    ensure!(!segments.is_empty(), Input, "no segments to pixelize");
    let dim = pixelizer::frame_set_dimension(resolutions, segments[0].len());
    let mut out = Array2::zeros((segments.len(), dim));
    for (mut row, seg) in out.rows_mut().into_iter().zip(segments) {
        let flat = pixelizer::multi_resolution(seg, resolutions)?.flatten();
        ensure!(flat.len() == dim, Input, "segments differ in length");
        row.iter_mut().zip(flat).for_each(|(r, v)| *r = v);
    }
    Ok(out)
}

/// Runs the de-noiser over normalized segments, returning waveforms in
/// [-1, 1]. Without a model the segments are only rescaled.
pub fn reconstruct_symbols(
    segments: &[Vec<f64>],
    denoiser: Option<&DenoiseModel>,
    resolutions: &[Resolution],
) -> Result<Vec<Vec<f64>>> {
    match denoiser {
        None => Ok(segments
            .iter()
            .map(|s| s.iter().map(|v| 2.0 * v - 1.0).collect())
            .collect()),
        Some(dm) => {
            let first = resolutions
                .first()
                .ok_or_else(|| Error::Config("no pixelization resolutions".into()))?;
            ensure!(
                first.decimation == 1,
                Config,
                "the first resolution must be undecimated to reconstruct a waveform"
            );
            let frames = frame_matrix(segments, resolutions)?;
            ensure!(
                frames.ncols() == dm.base.input_dim(),
                Config,
                "de-noise model expects {} inputs but the pixelization yields {}",
                dm.base.input_dim(),
                frames.ncols()
            );
            denoise_batch(dm, &frames, first.rows, segments[0].len())
        }
    }
}

/// Classifier input matrix: reconstructed waveforms mapped back to [0, 1].
pub fn classifier_inputs(reconstructed: &[Vec<f64>]) -> Array2<f64> {
    let n = reconstructed.first().map_or(0, Vec::len);
    Array2::from_shape_fn((reconstructed.len(), n), |(i, j)| {
        (0.5 * (reconstructed[i][j] + 1.0)).clamp(0.0, 1.0)
    })
}

/// Demodulation strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Matched filter on the received time grid.
    #[serde(rename = "mle")]
    Mle,
    /// Matched filter after Doppler compensation.
    #[serde(rename = "mle+doppler-sync")]
    MleDopplerSync,
    /// Matched filter on the de-noised reconstruction.
    #[serde(rename = "dbn-denoise+mle")]
    DbnDenoiseMle,
    /// De-noise then classify.
    #[serde(rename = "dbn-full")]
    DbnFull,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Mle,
        Method::MleDopplerSync,
        Method::DbnDenoiseMle,
        Method::DbnFull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::MleDopplerSync => "mle+doppler-sync",
            Method::DbnDenoiseMle => "dbn-denoise+mle",
            Method::DbnFull => "dbn-full",
        }
    }

    pub fn needs_denoiser(self) -> bool {
        matches!(self, Method::DbnDenoiseMle)
    }

    pub fn needs_classifier(self) -> bool {
        matches!(self, Method::DbnFull)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RxConfig {
    pub modulation: ModSpec,
    pub frame: FrameConfig,
    pub method: Method,
    pub detection_threshold: f64,
    /// Correlate the pilots noncoherently over pieces of this length
    /// (seconds) instead of as a whole.
    pub pilot_block_s: Option<f64>,
    /// Resample the payload by the estimated Doppler factor in the network
    /// methods. The matched-filter methods ignore this flag.
    pub doppler_compensation: bool,
    pub normalization: NormScope,
    pub resolutions: Vec<Resolution>,
    pub denoise_model: Option<PathBuf>,
    pub classifier_model: Option<PathBuf>,
}

impl Default for RxConfig {
    fn default() -> Self {
        RxConfig {
            modulation: ModSpec::default(),
            frame: FrameConfig::default(),
            method: Method::Mle,
            detection_threshold: 0.5,
            pilot_block_s: None,
            doppler_compensation: false,
            normalization: NormScope::Symbol,
            resolutions: DEFAULT_RESOLUTIONS.to_vec(),
            denoise_model: None,
            classifier_model: None,
        }
    }
}

impl RxConfig {
    pub fn validate(&self) -> Result<()> {
        self.modulation.validate()?;
        ensure!(
            self.detection_threshold > 0.0 && self.detection_threshold < 1.0,
            Config,
            "detection_threshold must lie in (0, 1)"
        );
        self.frame
            .layout(self.modulation.fs_hz)?
            .check_payload(&self.modulation)
    }

    /// Pilot correlation block in samples; 0 means fully coherent.
    pub fn pilot_block_samples(&self) -> usize {
        self.pilot_block_s
            .map_or(0, |b| (b * self.modulation.fs_hz).round().max(0.0) as usize)
    }

    /// Whether `method` resamples the payload by the Doppler estimate.
    pub fn compensates(&self, method: Method) -> bool {
        match method {
            Method::Mle => false,
            Method::MleDopplerSync => true,
            Method::DbnDenoiseMle | Method::DbnFull => self.doppler_compensation,
        }
    }
}

/// Trained networks available to [`receive_with`].
#[derive(Clone, Debug, Default)]
pub struct RxModels {
    pub denoise: Option<DenoiseModel>,
    pub classifier: Option<ClassifierModel>,
}

impl RxModels {
    /// Loads whichever model paths the config names.
    pub fn load(cfg: &RxConfig) -> Result<Self> {
        Ok(RxModels {
            denoise: cfg
                .denoise_model
                .as_deref()
                .map(crate::io::read_denoise_model)
                .transpose()?,
            classifier: cfg
                .classifier_model
                .as_deref()
                .map(crate::io::read_classifier_model)
                .transpose()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub up_peak_pos: f64,
    pub down_peak_pos: f64,
    pub up_corr: f64,
    pub down_corr: f64,
    pub payload_start: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RxReport {
    pub method: Method,
    pub n_bits: usize,
    /// Decided bits, hex encoded MSB first.
    #[serde(with = "hex_bits")]
    pub bits: BitSequence,
    pub alpha_hat: f64,
    /// Payload signal-to-noise ratio per sample, when a noise floor could
    /// be measured.
    pub snr_est_db: Option<f64>,
    /// Classifier posteriors, one row per symbol (empty for matched-filter
    /// methods).
    pub posteriors: Vec<Vec<f64>>,
    pub timing: Timing,
}

mod hex_bits {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::waveforms::BitSequence;

    pub fn serialize<S: Serializer>(bits: &BitSequence, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}:{}", bits.len(), bits.to_hex()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BitSequence, D::Error> {
        let text = String::deserialize(d)?;
        let (n, hex) = text
            .split_once(':')
            .ok_or_else(|| serde::de::Error::custom("expected '<bit count>:<hex>'"))?;
        let n: usize = n.parse().map_err(serde::de::Error::custom)?;
        BitSequence::from_hex(hex, n).map_err(serde::de::Error::custom)
    }
}

fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }
}

/// Per-sample payload SNR against the quietest pilot-free stretch: the lead-in
/// before the frame or the tail of the guard ahead of the payload.
fn estimate_snr_db(s: &[f64], frame_start: f64, payload_start: f64, payload_len: usize, guard: usize) -> Option<f64> {
    let fs0 = frame_start.floor().max(0.0) as usize;
    let p0 = payload_start.round().max(0.0) as usize;
    let mut floors = Vec::new();
    if fs0 >= 64 {
        floors.push(mean_power(&s[..fs0.min(s.len())]));
    }
    let tail = guard / 2;
    if tail >= 32 && p0 >= tail && p0 <= s.len() {
        floors.push(mean_power(&s[p0 - tail..p0]));
    }
    let noise = floors.into_iter().fold(f64::INFINITY, f64::min);
    let end = (p0 + payload_len).min(s.len());
    let signal = mean_power(s.get(p0..end)?) - noise;
    (noise.is_finite() && noise > 0.0 && signal > 0.0).then(|| 10.0 * (signal / noise).log10())
}

/// Demodulates a detected, sliced payload with the chosen method. Returns
/// the symbol decisions and any classifier posteriors.
pub fn demodulate_payload(
    payload: &[f64],
    cfg: &RxConfig,
    method: Method,
    models: &RxModels,
) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let spec = &cfg.modulation;
    match method {
        Method::Mle | Method::MleDopplerSync => Ok((mle_symbols(payload, spec)?, Vec::new())),
        Method::DbnDenoiseMle => {
            let dm = models
                .denoise
                .as_ref()
                .ok_or_else(|| Error::Config("method dbn-denoise+mle needs a de-noise model".into()))?;
            let segs = normalized_symbols(payload, spec.samples_per_symbol(), cfg.normalization);
            let rec = reconstruct_symbols(&segs, Some(dm), &cfg.resolutions)?;
            Ok((mle_symbols(&rec.concat(), spec)?, Vec::new()))
        }
        Method::DbnFull => {
            let cm = models
                .classifier
                .as_ref()
                .ok_or_else(|| Error::Config("method dbn-full needs a classifier model".into()))?;
            ensure!(
                cm.label_arity == spec.scheme.arity(),
                Config,
                "classifier has {} labels but the modulation has {} symbols",
                cm.label_arity,
                spec.scheme.arity()
            );
            ensure!(
                cm.input_dim() == spec.samples_per_symbol(),
                Config,
                "classifier expects {} inputs, symbols have {} samples",
                cm.input_dim(),
                spec.samples_per_symbol()
            );
            let segs = normalized_symbols(payload, spec.samples_per_symbol(), cfg.normalization);
            let rec = reconstruct_symbols(&segs, models.denoise.as_ref(), &cfg.resolutions)?;
            let out = classify_batch(cm, &classifier_inputs(&rec))?;
            let labels = out.iter().map(|c| c.label).collect();
            let post = out.into_iter().map(|c| c.posterior).collect();
            Ok((labels, post))
        }
    }
}

/// Full receive chain with already-loaded models.
pub fn receive_with(s: &Waveform, cfg: &RxConfig, models: &RxModels) -> Result<RxReport> {
    cfg.validate()?;
    let spec = &cfg.modulation;
    ensure!(
        s.sample_rate_hz() == spec.fs_hz,
        Input,
        "signal at {} Hz, receiver configured for {} Hz",
        s.sample_rate_hz(),
        spec.fs_hz
    );
    let layout = cfg.frame.layout(spec.fs_hz)?;
    let det = detect_pilot_blocks(s, &layout, cfg.detection_threshold, cfg.pilot_block_samples())?;
    let alpha_hat = estimate_doppler(&det, &layout)?;
    let start = payload_start(&det, &layout, alpha_hat);
    let n = layout.payload_bits / spec.bits_per_symbol() * spec.samples_per_symbol();
    let compensate = cfg.compensates(cfg.method);
    let payload = extract_payload(s.samples(), start, n, compensate.then_some(alpha_hat))?;
    let (symbols, posteriors) = demodulate_payload(&payload, cfg, cfg.method, models)?;
    let bits = spec.bits_of(&symbols);
    let f0 = frame_start(&det, &layout, alpha_hat);
    Ok(RxReport {
        method: cfg.method,
        n_bits: bits.len(),
        bits,
        alpha_hat,
        snr_est_db: estimate_snr_db(
            s.samples(),
            f0,
            start,
            (n as f64 / alpha_hat).round() as usize,
            layout.guard_samples,
        ),
        posteriors,
        timing: Timing {
            up_peak_pos: det.up_peak_pos,
            down_peak_pos: det.down_peak_pos,
            up_corr: det.up_corr,
            down_corr: det.down_corr,
            payload_start: start,
        },
    })
}

/// Full receive chain, loading models from the paths in `cfg`.
pub fn receive(s: &Waveform, cfg: &RxConfig) -> Result<RxReport> {
    let models = RxModels::load(cfg)?;
    receive_with(s, cfg, &models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::apply_doppler;
    use crate::rng::seeded;
    use crate::waveforms::{build_frame, modulate};

    fn frame(bits: usize, lead: usize, seed: u64) -> (Waveform, BitSequence, FrameLayout) {
        let spec = ModSpec::default();
        let mut rng = seeded(seed);
        let b = BitSequence::random(bits, &mut rng);
        let layout = FrameConfig {
            payload_bits: bits,
            ..FrameConfig::default()
        }
        .layout(spec.fs_hz)
        .unwrap();
        let f = build_frame(&layout, &modulate(&b, &spec).unwrap()).unwrap();
        let mut s = vec![0.0; lead];
        s.extend_from_slice(f.samples());
        s.resize(s.len() + 500, 0.0);
        (Waveform::new(s, spec.fs_hz).unwrap(), b, layout)
    }

    #[test]
    fn window_argmax_brute_force() {
        let x = [0.1, 0.5, 0.2, 0.9, 0.3, 0.3, 0.8, 0.0];
        let got = window_argmax(&x, 1, 3);
        for (i, (v, j)) in got.iter().enumerate() {
            let end = (i + 3).min(x.len() - 1);
            let m = x[i + 1..=end].iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(*v, m);
            assert_eq!(x[*j], m);
        }
        assert_eq!(got.len(), x.len() - 1);
    }

    #[test]
    fn clean_frame_detected_at_construction_offsets() {
        let (s, _, layout) = frame(40, 321, 1);
        let d = detect_pilot(&s, &layout, 0.5).unwrap();
        assert!(d.up_peak_index.abs_diff(321) <= 1);
        assert!(d.down_peak_index.abs_diff(321 + layout.pilot_spacing() as i64) <= 1);
        assert_eq!(d.payload_offset, 321 + layout.preamble_len());
        let a = estimate_doppler(&d, &layout).unwrap();
        assert!((a - 1.0).abs() < 1.0 / layout.pilot_spacing() as f64);
    }

    #[test]
    fn silence_is_not_a_frame() {
        let layout = FrameLayout::standard(40_000.0).unwrap();
        let mut rng = seeded(2);
        let noise = crate::channel::apply_awgn(&Waveform::new(vec![0.0; 6000], 40_000.0).unwrap(), 0.0, 20.0, &mut rng)
            .unwrap();
        assert!(matches!(
            detect_pilot(&noise, &layout, 0.5),
            Err(Error::DetectionFailed(_))
        ));
    }

    #[test]
    fn doppler_estimates_track_scaling() {
        for (alpha, lo, hi) in [(1.12, 1.10, 1.14), (0.87, 0.85, 0.89)] {
            let (s, bits, layout) = frame(40, 300, 3);
            let y = apply_doppler(&s, alpha).unwrap();
            let d = detect_pilot(&y, &layout, 0.5).unwrap();
            let a = estimate_doppler(&d, &layout).unwrap();
            assert!((lo..=hi).contains(&a), "alpha {alpha}: estimate {a}");
            assert!((a - alpha).abs() < 0.002, "alpha {alpha}: estimate {a}");
            let start = payload_start(&d, &layout, a);
            let truth = (300 + layout.preamble_len()) as f64 / alpha;
            assert!((start - truth).abs() < 1.0, "payload at {start}, expected {truth}");
            let payload = extract_payload(y.samples(), start, 40 * 40, Some(a)).unwrap();
            assert_eq!(mle_demodulate(&payload, &ModSpec::default()).unwrap(), bits);
        }
    }

    #[test]
    fn extreme_scaling_without_lead_in() {
        for alpha in [0.5, 0.6, 1.3, 1.5] {
            let (s, _, layout) = frame(40, 0, 4);
            let y = apply_doppler(&s, alpha).unwrap();
            let d = detect_pilot(&y, &layout, 0.3).unwrap();
            let a = estimate_doppler(&d, &layout).unwrap();
            assert!((a / alpha - 1.0).abs() < 0.01, "alpha {alpha}: estimate {a}");
        }
    }

    #[test]
    fn compensation_undoes_scaling() {
        // band-limited content only; symbol edges and pilot onsets are
        // broadband and lose energy to the anti-aliasing filter
        let tau = std::f64::consts::TAU;
        let x = (0..4000)
            .map(|i| {
                let t = i as f64 / 40_000.0;
                (tau * 2000.0 * t).cos() + 0.5 * (tau * 3700.0 * t + 0.3).sin()
            })
            .collect();
        let s = Waveform::new(x, 40_000.0).unwrap();
        assert_eq!(compensate_doppler(&s, 1.0).unwrap(), s);
        for alpha in [0.8, 1.2] {
            let y = apply_doppler(&s, alpha).unwrap();
            let back = compensate_doppler(&y, alpha).unwrap();
            assert_eq!(back.len(), (y.len() as f64 * alpha).round() as usize);
            let n = s.len().min(back.len());
            let err = dsp::rms_diff(&s.samples()[200..n - 200], &back.samples()[200..n - 200]);
            assert!(err < 1e-3, "alpha {alpha}: rms {err}");
        }
        assert!(compensate_doppler(&s, 1.6).is_err());
    }

    #[test]
    fn mle_ties_and_alignment() {
        let spec = ModSpec::default();
        assert_eq!(mle_demodulate(&[0.0; 40], &spec).unwrap().bits(), &[0]);
        assert!(mle_demodulate(&[0.0; 41], &spec).is_err());
    }

    #[test]
    fn receive_clean_frame_with_mle() {
        let (s, bits, _) = frame(416, 200, 5);
        for method in [Method::Mle, Method::MleDopplerSync] {
            let cfg = RxConfig {
                method,
                ..RxConfig::default()
            };
            let r = receive_with(&s, &cfg, &RxModels::default()).unwrap();
            assert_eq!(r.bits, bits);
            assert_eq!(r.n_bits, 416);
            let json = serde_json::to_string(&r).unwrap();
            let back: RxReport = serde_json::from_str(&json).unwrap();
            assert_eq!(back, r);
        }
    }

    #[test]
    fn network_methods_require_models() {
        let (s, _, _) = frame(416, 200, 6);
        let cfg = RxConfig {
            method: Method::DbnFull,
            ..RxConfig::default()
        };
        assert!(matches!(
            receive_with(&s, &cfg, &RxModels::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn frame_scope_normalization() {
        let payload: Vec<f64> = (0..80).map(|i| i as f64).collect();
        let sym = normalized_symbols(&payload, 40, NormScope::Symbol);
        assert_eq!(sym[1][0], 0.0);
        let frm = normalized_symbols(&payload, 40, NormScope::Frame);
        assert!(frm[1][0] > 0.49);
        assert_eq!(normalized_symbols(&[2.0; 40], 40, NormScope::Symbol)[0], vec![0.5; 40]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let j = serde_json::to_string(&m).unwrap();
            assert_eq!(j, format!("\"{}\"", m.name()));
        }
    }
}
