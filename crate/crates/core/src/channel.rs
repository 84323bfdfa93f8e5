//! Stochastic underwater acoustic channel.
//!
//! Each propagation path is time-scaled by its Doppler coefficient
//! (`y(t) = x(α·t)`, so `α = 1` means no Doppler), delayed, rotated by a
//! piecewise-constant phase trajectory and attenuated. Paths are summed and
//! white Gaussian noise is added at a requested Eb/No.
//!
//! Phase rotation acts on the analytic signal and the real part is kept:
//! `Re[(x + jH{x})·e^{-jθ}] = x·cos θ + H{x}·sin θ`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{ensure, Result};
use crate::waveforms::Waveform;

/// Eb/No at or above which the noise stage is skipped entirely.
pub const NOISELESS_EBNO_DB: f64 = 200.0;
pub const MIN_ALPHA: f64 = 0.5;
pub const MAX_ALPHA: f64 = 1.5;
const AMP_FLOOR: f64 = 1e-3;

/// One propagation path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// Amplitude, in (0, 1].
    pub amp: f64,
    /// Phase (radians) for each redraw interval; the last value holds once
    /// the trajectory runs out.
    pub phase_traj: Vec<f64>,
    pub delay_samples: usize,
    pub doppler_alpha: f64,
}

impl PathParams {
    /// Unit-gain, zero-phase, undelayed path.
    pub fn direct() -> Self {
        PathParams {
            amp: 1.0,
            phase_traj: vec![0.0],
            delay_samples: 0,
            doppler_alpha: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure!(
            self.amp > 0.0 && self.amp <= 1.0,
            Input,
            "path amplitude {} outside (0, 1]",
            self.amp
        );
        ensure!(
            (MIN_ALPHA..=MAX_ALPHA).contains(&self.doppler_alpha),
            Input,
            "doppler coefficient {} outside [{MIN_ALPHA}, {MAX_ALPHA}]",
            self.doppler_alpha
        );
        ensure!(!self.phase_traj.is_empty(), Input, "phase trajectory is empty");
        ensure!(
            self.phase_traj.iter().all(|p| p.is_finite()),
            Input,
            "phase trajectory has non-finite entries"
        );
        Ok(())
    }

    fn phase_at(&self, block: usize) -> f64 {
        self.phase_traj[block.min(self.phase_traj.len() - 1)]
    }
}

/// One realization of the channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub paths: Vec<PathParams>,
    pub ebno_db: f64,
    /// Rate at which path phases are redrawn.
    pub f_delta_hz: f64,
}

impl ChannelParams {
    /// Single transparent path plus noise.
    pub fn awgn(ebno_db: f64) -> Self {
        ChannelParams {
            paths: vec![PathParams::direct()],
            ebno_db,
            f_delta_hz: 2000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.paths.is_empty(), Input, "channel needs at least one path");
        ensure!(
            self.paths[0].delay_samples == 0,
            Input,
            "the first (direct) path must have zero delay"
        );
        ensure!(
            self.paths.windows(2).all(|w| w[0].delay_samples <= w[1].delay_samples),
            Input,
            "paths must be sorted by ascending delay"
        );
        ensure!(
            self.f_delta_hz.is_finite() && self.f_delta_hz > 0.0,
            Input,
            "phase redraw rate must be positive"
        );
        self.paths.iter().try_for_each(PathParams::validate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub std: f64,
}

impl Gaussian {
    pub const fn new(mean: f64, std: f64) -> Self {
        Gaussian { mean, std }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.std * z
    }
}

/// Distribution of the per-path Doppler coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AlphaDist {
    /// Normal draw clamped to [0.5, 1.5].
    Gaussian { mean: f64, std: f64 },
    /// Uniform choice among fixed values.
    Choice { values: Vec<f64> },
}

/// Distribution from which [`ChannelParams`] are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub amp: Gaussian,
    pub phase: Gaussian,
    pub alpha: AlphaDist,
    /// Excess delays are uniform on `[0, max_delay_samples]`.
    pub max_delay_samples: usize,
    /// `path_count_probs[i]` is the probability of `i + 1` paths.
    pub path_count_probs: Vec<f64>,
    /// `(rate_hz, probability)` pairs for the phase redraw rate.
    pub f_delta_mix: Vec<(f64, f64)>,
    /// Draw one Doppler coefficient per realization instead of per path.
    #[serde(default)]
    pub shared_alpha: bool,
}

impl DistributionSpec {
    /// Transparent channel; only the noise stage is active.
    pub fn awgn() -> Self {
        DistributionSpec {
            amp: Gaussian::new(1.0, 0.0),
            phase: Gaussian::new(0.0, 0.0),
            alpha: AlphaDist::Gaussian { mean: 1.0, std: 0.0 },
            max_delay_samples: 0,
            path_count_probs: vec![1.0],
            f_delta_mix: vec![(2000.0, 1.0)],
            shared_alpha: false,
        }
    }

    /// Multipath with reverberant amplitude and phase, no Doppler.
    /// Delays span up to `fs / 200` samples (5 symbols at 40 kHz / 1 kbit/s).
    pub fn multipath(fs_hz: f64) -> Self {
        DistributionSpec {
            amp: Gaussian::new(0.75, 0.25),
            phase: Gaussian::new(PI, PI / 2.0),
            alpha: AlphaDist::Gaussian { mean: 1.0, std: 0.0 },
            max_delay_samples: (fs_hz / 2.0 / 100.0).round() as usize,
            path_count_probs: vec![0.4, 0.3, 0.3],
            f_delta_mix: vec![(2000.0, 1.0)],
            shared_alpha: false,
        }
    }

    /// Combined multipath and per-path Doppler, with the 1 kHz / 2 kHz
    /// phase-redraw mix.
    pub fn overall(fs_hz: f64) -> Self {
        DistributionSpec {
            alpha: AlphaDist::Gaussian { mean: 1.0, std: 0.5 },
            f_delta_mix: vec![(1000.0, 0.6), (2000.0, 0.4)],
            ..Self::multipath(fs_hz)
        }
    }

    /// Single clean path with one of a few fixed Doppler coefficients.
    pub fn doppler(values: Vec<f64>) -> Self {
        DistributionSpec {
            alpha: AlphaDist::Choice { values },
            ..Self::awgn()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.amp.std >= 0.0 && self.phase.std >= 0.0,
            Config,
            "standard deviations must be non-negative"
        );
        match &self.alpha {
            AlphaDist::Gaussian { std, .. } => {
                ensure!(*std >= 0.0, Config, "alpha std must be non-negative")
            }
            AlphaDist::Choice { values } => ensure!(
                !values.is_empty() && values.iter().all(|a| (MIN_ALPHA..=MAX_ALPHA).contains(a)),
                Config,
                "alpha choices must be non-empty and within [{MIN_ALPHA}, {MAX_ALPHA}]"
            ),
        }
        ensure!(
            !self.path_count_probs.is_empty() && self.path_count_probs.iter().all(|p| *p >= 0.0),
            Config,
            "path-count probabilities must be non-negative"
        );
        let total: f64 = self.path_count_probs.iter().sum();
        ensure!(
            (total - 1.0).abs() <= 1e-12,
            Config,
            "path-count probabilities sum to {total}, not 1"
        );
        ensure!(
            !self.f_delta_mix.is_empty() && self.f_delta_mix.iter().all(|(f, p)| *f > 0.0 && *p >= 0.0),
            Config,
            "phase redraw mix needs positive rates and non-negative weights"
        );
        let total: f64 = self.f_delta_mix.iter().map(|(_, p)| p).sum();
        ensure!(
            (total - 1.0).abs() <= 1e-12,
            Config,
            "phase redraw mix weights sum to {total}, not 1"
        );
        Ok(())
    }

    fn sample_alpha<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.alpha {
            AlphaDist::Gaussian { mean, std } => Gaussian::new(*mean, *std).sample(rng).clamp(MIN_ALPHA, MAX_ALPHA),
            AlphaDist::Choice { values } => values[rng.random_range(0..values.len())],
        }
    }
}

fn categorical<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        acc += w;
        if w > 0.0 {
            last = i;
        }
        if u < acc {
            return i;
        }
    }
    last
}

fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Samples between phase redraws.
pub fn phase_block_len(fs_hz: f64, f_delta_hz: f64) -> usize {
    ((fs_hz / f_delta_hz).round() as usize).max(1)
}

/// Draws one channel realization. Phase trajectories are long enough to
/// cover a `signal_len`-sample input under any admissible Doppler and delay.
pub fn sample_channel_params<R: Rng + ?Sized>(
    spec: &DistributionSpec,
    ebno_db: f64,
    signal_len: usize,
    fs_hz: f64,
    rng: &mut R,
) -> Result<ChannelParams> {
    spec.validate()?;
    let n_paths = 1 + categorical(spec.path_count_probs.iter().copied(), rng);
    let f_delta_hz = spec.f_delta_mix[categorical(spec.f_delta_mix.iter().map(|(_, p)| *p), rng)].0;
    let block = phase_block_len(fs_hz, f_delta_hz);
    let max_out = (signal_len as f64 / MIN_ALPHA).ceil() as usize + spec.max_delay_samples;
    let n_blocks = max_out.div_ceil(block).max(1);
    let shared_alpha = spec.sample_alpha(rng);

    let mut paths: Vec<PathParams> = (0..n_paths)
        .map(|i| {
            let amp = spec.amp.sample(rng).clamp(AMP_FLOOR, 1.0);
            let doppler_alpha = if spec.shared_alpha {
                shared_alpha
            } else {
                spec.sample_alpha(rng)
            };
            let delay_samples = if i == 0 {
                0
            } else {
                rng.random_range(0..=spec.max_delay_samples)
            };
            let phase_traj = (0..n_blocks).map(|_| wrap_phase(spec.phase.sample(rng))).collect();
            PathParams {
                amp,
                phase_traj,
                delay_samples,
                doppler_alpha,
            }
        })
        .collect();
    // stable sort keeps the direct path first among zero-delay paths
    paths.sort_by_key(|p| p.delay_samples);
    Ok(ChannelParams {
        paths,
        ebno_db,
        f_delta_hz,
    })
}

/// Per-sample noise variance for a given Eb/No, with `energy_per_bit`
/// measured in sample units (sum of squared samples per bit). Equivalently
/// `Eb[J]·fs / (2·Eb/No)` with `Eb[J] = energy_per_bit / fs`.
pub fn noise_variance(energy_per_bit: f64, ebno_db: f64) -> f64 {
    if ebno_db >= NOISELESS_EBNO_DB {
        0.0
    } else {
        energy_per_bit / (2.0 * 10f64.powf(ebno_db / 10.0))
    }
}

/// Adds white Gaussian noise at the requested Eb/No.
pub fn apply_awgn<R: Rng + ?Sized>(x: &Waveform, ebno_db: f64, energy_per_bit: f64, rng: &mut R) -> Result<Waveform> {
    ensure!(
        ebno_db.is_finite() || ebno_db == f64::INFINITY,
        Input,
        "Eb/No must not be NaN"
    );
    ensure!(
        energy_per_bit.is_finite() && energy_per_bit >= 0.0,
        Input,
        "energy per bit must be finite and non-negative"
    );
    let var = noise_variance(energy_per_bit, ebno_db);
    if var == 0.0 {
        return Ok(x.clone());
    }
    let sigma = var.sqrt();
    let samples = x
        .samples()
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            v + sigma * z
        })
        .collect();
    Waveform::new(samples, x.sample_rate_hz())
}

/// Doppler time scaling `y(t) = x(α·t)` by band-limited resampling.
pub fn apply_doppler(x: &Waveform, alpha: f64) -> Result<Waveform> {
    ensure!(
        (MIN_ALPHA..=MAX_ALPHA).contains(&alpha),
        Input,
        "doppler coefficient {alpha} outside [{MIN_ALPHA}, {MAX_ALPHA}]"
    );
    Waveform::new(dsp::time_scale(x.samples(), alpha), x.sample_rate_hz())
}

/// Received carrier frequency for a relative speed `delta_rt_mps`
/// (positive when closing) and sound speed `delta_s_mps`.
pub fn doppler_shifted_fc(fc_hz: f64, delta_rt_mps: f64, delta_s_mps: f64) -> f64 {
    (1.0 + delta_rt_mps / delta_s_mps) * fc_hz
}

/// Adds one path's contribution (delay, phase trajectory, gain) of an
/// already Doppler-scaled input into `out`.
fn accumulate_path(out: &mut [f64], scaled: &[f64], path: &PathParams, block_len: usize) {
    if path.phase_traj.iter().all(|&p| p == 0.0) {
        let dst = &mut out[path.delay_samples..path.delay_samples + scaled.len()];
        dst.iter_mut().zip(scaled).for_each(|(o, x)| *o += path.amp * x);
        return;
    }
    let analytic = dsp::analytic_signal(scaled);
    let mut block = usize::MAX;
    let (mut c, mut s) = (1.0, 0.0);
    for (i, z) in analytic.iter().enumerate() {
        let t = i + path.delay_samples;
        if t / block_len != block {
            block = t / block_len;
            let theta = path.phase_at(block);
            c = theta.cos();
            s = theta.sin();
        }
        out[t] += path.amp * (z.re * c + z.im * s);
    }
}

/// Multipath without Doppler: output length is `len(x) + max delay`.
pub fn apply_multipath(x: &Waveform, paths: &[PathParams], f_delta_hz: f64) -> Result<Waveform> {
    ensure!(!paths.is_empty(), Input, "multipath needs at least one path");
    ensure!(f_delta_hz > 0.0, Input, "phase redraw rate must be positive");
    paths.iter().try_for_each(PathParams::validate)?;
    let block = phase_block_len(x.sample_rate_hz(), f_delta_hz);
    let max_delay = paths.iter().map(|p| p.delay_samples).max().unwrap_or(0);
    let mut out = vec![0.0; x.len() + max_delay];
    for p in paths {
        accumulate_path(&mut out, x.samples(), p, block);
    }
    Waveform::new(out, x.sample_rate_hz())
}

/// Noiseless part of the channel: every path scaled, delayed, rotated and
/// summed, zero-padded to the longest path.
pub fn propagate(x: &Waveform, p: &ChannelParams) -> Result<Waveform> {
    p.validate()?;
    let block = phase_block_len(x.sample_rate_hz(), p.f_delta_hz);
    let scaled: Vec<Vec<f64>> = p
        .paths
        .iter()
        .map(|path| dsp::time_scale(x.samples(), path.doppler_alpha))
        .collect();
    let total = scaled
        .iter()
        .zip(&p.paths)
        .map(|(s, path)| s.len() + path.delay_samples)
        .max()
        .unwrap_or(0);
    let mut out = vec![0.0; total];
    for (s, path) in scaled.iter().zip(&p.paths) {
        accumulate_path(&mut out, s, path, block);
    }
    Waveform::new(out, x.sample_rate_hz())
}

/// Full channel: [`propagate`] followed by [`apply_awgn`] at `p.ebno_db`.
pub fn apply_channel<R: Rng + ?Sized>(
    x: &Waveform,
    p: &ChannelParams,
    energy_per_bit: f64,
    rng: &mut R,
) -> Result<Waveform> {
    let y = propagate(x, p)?;
    apply_awgn(&y, p.ebno_db, energy_per_bit, rng)
}
