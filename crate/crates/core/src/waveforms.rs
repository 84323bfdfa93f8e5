//! PSK modulation, hyperbolic-FM pilot synthesis and transmit framing.
//!
//! Symbol waveforms use symbol-local time, so every symbol slot carries the
//! same candidate set regardless of its position in the frame. Mapping
//! conventions:
//!
//! * BPSK: bit 1 is `cos(2π·fc·t)`, bit 0 is its exact negation.
//! * QPSK: bit pairs `(b0, b1)` are Gray mapped onto phases
//!   `11 → π/4`, `01 → 3π/4`, `00 → 5π/4`, `10 → 7π/4`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// A uniformly sampled real signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        ensure!(!samples.is_empty(), Input, "waveform must have at least one sample");
        ensure!(
            sample_rate_hz.is_finite() && sample_rate_hz > 0.0,
            Input,
            "sample rate must be positive, got {sample_rate_hz}"
        );
        Ok(Waveform {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Copies `len` samples starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Waveform> {
        ensure!(
            start + len <= self.samples.len() && len > 0,
            Input,
            "slice {start}..{} outside waveform of {} samples",
            start + len,
            self.samples.len()
        );
        Waveform::new(self.samples[start..start + len].to_vec(), self.sample_rate_hz)
    }
}

/// A sequence of bits, each strictly 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BitSequence(Vec<u8>);

impl BitSequence {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::Input(format!(
                "bit {pos} has value {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(BitSequence(bits))
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        BitSequence((0..n).map(|_| rng.random::<bool>() as u8).collect())
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bitwise complement.
    pub fn inverted(&self) -> Self {
        BitSequence(self.0.iter().map(|b| 1 - b).collect())
    }

    pub fn count_errors(&self, other: &BitSequence) -> usize {
        let common = self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count();
        common + self.0.len().abs_diff(other.0.len())
    }

    /// Packs the bits MSB-first into bytes and renders them as lowercase hex.
    /// A trailing partial byte is zero padded.
    pub fn to_hex(&self) -> String {
        self.0
            .chunks(8)
            .map(|chunk| {
                let byte = chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i)));
                format!("{byte:02x}")
            })
            .collect()
    }

    pub fn from_hex(hex: &str, n_bits: usize) -> Result<Self> {
        ensure!(
            hex.len() == n_bits.div_ceil(8) * 2,
            Format,
            "hex string of {} chars cannot hold {n_bits} bits",
            hex.len()
        );
        let mut bits = Vec::with_capacity(n_bits);
        for i in 0..n_bits.div_ceil(8) {
            let byte =
                u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).map_err(|e| Error::Format(format!("bad hex: {e}")))?;
            for j in 0..8 {
                if bits.len() < n_bits {
                    bits.push((byte >> (7 - j)) & 1);
                }
            }
        }
        Ok(BitSequence(bits))
    }
}

impl From<BitSequence> for Vec<u8> {
    fn from(b: BitSequence) -> Self {
        b.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Bpsk,
    Qpsk,
}

impl Scheme {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Scheme::Bpsk => 1,
            Scheme::Qpsk => 2,
        }
    }

    pub fn arity(self) -> usize {
        1 << self.bits_per_symbol()
    }
}

/// Modulation parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModSpec {
    pub scheme: Scheme,
    pub fc_hz: f64,
    pub fs_hz: f64,
    pub rb_bits_per_s: f64,
}

impl Default for ModSpec {
    fn default() -> Self {
        ModSpec {
            scheme: Scheme::Bpsk,
            fc_hz: 2000.0,
            fs_hz: 40_000.0,
            rb_bits_per_s: 1000.0,
        }
    }
}

impl ModSpec {
    pub fn bpsk(fc_hz: f64, fs_hz: f64, rb_bits_per_s: f64) -> Self {
        ModSpec {
            scheme: Scheme::Bpsk,
            fc_hz,
            fs_hz,
            rb_bits_per_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.fc_hz > 0.0 && self.fs_hz > 0.0 && self.rb_bits_per_s > 0.0,
            Config,
            "carrier, sample rate and bit rate must be positive"
        );
        ensure!(
            self.fs_hz >= 4.0 * self.fc_hz,
            Config,
            "sample rate {} Hz is below 4x the carrier {} Hz",
            self.fs_hz,
            self.fc_hz
        );
        let ratio = self.fs_hz / self.rb_bits_per_s;
        ensure!(
            ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9,
            Config,
            "fs / rb = {ratio} is not a positive integer number of samples per bit"
        );
        Ok(())
    }

    pub fn samples_per_bit(&self) -> usize {
        (self.fs_hz / self.rb_bits_per_s).round() as usize
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.scheme.bits_per_symbol()
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_bit() * self.bits_per_symbol()
    }

    /// Candidate waveform for each symbol index. For QPSK the index is
    /// `2·b0 + b1`.
    pub fn symbol_waveforms(&self) -> Vec<Vec<f64>> {
        let n = self.samples_per_symbol();
        let w = 2.0 * PI * self.fc_hz / self.fs_hz;
        let carrier: Vec<f64> = (0..n).map(|i| (w * i as f64).cos()).collect();
        match self.scheme {
            Scheme::Bpsk => vec![carrier.iter().map(|c| -c).collect(), carrier],
            Scheme::Qpsk => {
                let quad: Vec<f64> = (0..n).map(|i| (w * i as f64).sin()).collect();
                (0..4)
                    .map(|sym| {
                        let i_amp = if sym & 0b10 != 0 { 1.0 } else { -1.0 };
                        let q_amp = if sym & 0b01 != 0 { 1.0 } else { -1.0 };
                        carrier
                            .iter()
                            .zip(&quad)
                            .map(|(c, s)| FRAC_1_SQRT_2 * (i_amp * c - q_amp * s))
                            .collect()
                    })
                    .collect()
            }
        }
    }

    /// Splits bits into symbol indices.
    pub fn symbols_of(&self, bits: &BitSequence) -> Result<Vec<usize>> {
        let bps = self.bits_per_symbol();
        ensure!(
            bits.len().is_multiple_of(bps),
            Input,
            "{} bits is not a whole number of {bps}-bit symbols",
            bits.len()
        );
        Ok(bits
            .bits()
            .chunks(bps)
            .map(|c| c.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize))
            .collect())
    }

    pub fn bits_of(&self, symbols: &[usize]) -> BitSequence {
        let bps = self.bits_per_symbol();
        let bits = symbols
            .iter()
            .flat_map(|&s| (0..bps).rev().map(move |j| ((s >> j) & 1) as u8))
            .collect();
        BitSequence(bits)
    }
}

/// Modulates `bits` onto the carrier described by `spec`.
pub fn modulate(bits: &BitSequence, spec: &ModSpec) -> Result<Waveform> {
    spec.validate()?;
    ensure!(!bits.is_empty(), Input, "cannot modulate an empty bit sequence");
    let symbols = spec.symbols_of(bits)?;
    let table = spec.symbol_waveforms();
    let mut samples = Vec::with_capacity(symbols.len() * spec.samples_per_symbol());
    for s in symbols {
        samples.extend_from_slice(&table[s]);
    }
    Waveform::new(samples, spec.fs_hz)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepDirection {
    Up,
    Down,
}

/// Instantaneous frequency of a hyperbolic sweep at time `t` seconds.
pub fn hfm_instantaneous_frequency(f0_hz: f64, f1_hz: f64, duration_s: f64, direction: SweepDirection, t: f64) -> f64 {
    let k = (f1_hz - f0_hz) / (f0_hz * f1_hz * duration_s);
    match direction {
        SweepDirection::Up => 1.0 / (1.0 / f0_hz - k * t),
        SweepDirection::Down => 1.0 / (1.0 / f1_hz + k * t),
    }
}

/// Unit-amplitude hyperbolic FM sweep whose period (1/f) varies linearly in
/// time, from `f0` to `f1` for an up sweep and from `f1` to `f0` for a down
/// sweep.
pub fn make_hfm(f0_hz: f64, f1_hz: f64, duration_s: f64, fs_hz: f64, direction: SweepDirection) -> Result<Waveform> {
    ensure!(
        f0_hz > 0.0 && f0_hz < f1_hz,
        Input,
        "HFM band needs 0 < f0 < f1, got f0={f0_hz}, f1={f1_hz}"
    );
    ensure!(duration_s > 0.0, Input, "HFM duration must be positive");
    ensure!(fs_hz > 0.0, Input, "sample rate must be positive");
    let n = (duration_s * fs_hz).round() as usize;
    ensure!(n > 0, Input, "HFM of {duration_s} s has no samples at {fs_hz} Hz");
    let k = (f1_hz - f0_hz) / (f0_hz * f1_hz * duration_s);
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs_hz;
            let phase = match direction {
                SweepDirection::Up => -2.0 * PI / k * (-k * f0_hz * t).ln_1p(),
                SweepDirection::Down => 2.0 * PI / k * (k * f1_hz * t).ln_1p(),
            };
            phase.cos()
        })
        .collect();
    Waveform::new(samples, fs_hz)
}

/// Band and duration of the HFM pilot pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotSpec {
    pub f0_hz: f64,
    pub f1_hz: f64,
    pub duration_s: f64,
}

impl Default for PilotSpec {
    /// 1–4 kHz, one 20 ms sweep (one symbol at 50 symbols/s).
    fn default() -> Self {
        PilotSpec {
            f0_hz: 1000.0,
            f1_hz: 4000.0,
            duration_s: 0.02,
        }
    }
}

impl PilotSpec {
    /// Delay (s) by which a sweep time-scaled by `alpha` appears to lead the
    /// unscaled template, for the up sweep and the down sweep respectively.
    /// A hyperbolic sweep stays a time-shifted copy of itself under
    /// time scaling, so a correlator's peak moves by these amounts.
    pub fn doppler_lead_s(&self, alpha: f64) -> (f64, f64) {
        let span = self.f1_hz - self.f0_hz;
        let common = (1.0 - 1.0 / alpha) * self.duration_s / span;
        (common * self.f1_hz, -common * self.f0_hz)
    }
}

/// Transmit frame: `[up | guard | down | guard | payload]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameLayout {
    pub pilot: PilotSpec,
    pub pilot_up: Waveform,
    pub pilot_down: Waveform,
    pub guard_samples: usize,
    pub payload_bits: usize,
}

/// Serializable description of a [`FrameLayout`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    #[serde(default)]
    pub pilot: PilotSpec,
    #[serde(default = "FrameConfig::default_guard_s")]
    pub guard_s: f64,
    #[serde(default = "FrameConfig::default_payload_bits")]
    pub payload_bits: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            pilot: PilotSpec::default(),
            guard_s: Self::default_guard_s(),
            payload_bits: Self::default_payload_bits(),
        }
    }
}

impl FrameConfig {
    fn default_guard_s() -> f64 {
        0.01
    }

    fn default_payload_bits() -> usize {
        416
    }

    pub fn layout(&self, fs_hz: f64) -> Result<FrameLayout> {
        let guard = (self.guard_s * fs_hz).round();
        ensure!(guard >= 0.0, Config, "guard interval must be non-negative");
        FrameLayout::new(self.pilot, fs_hz, guard as usize, self.payload_bits)
    }
}

impl FrameLayout {
    pub fn new(pilot: PilotSpec, fs_hz: f64, guard_samples: usize, payload_bits: usize) -> Result<Self> {
        ensure!(payload_bits > 0, Config, "payload must carry at least one bit");
        let up = make_hfm(pilot.f0_hz, pilot.f1_hz, pilot.duration_s, fs_hz, SweepDirection::Up)?;
        let down = make_hfm(pilot.f0_hz, pilot.f1_hz, pilot.duration_s, fs_hz, SweepDirection::Down)?;
        Ok(FrameLayout {
            pilot,
            pilot_up: up,
            pilot_down: down,
            guard_samples,
            payload_bits,
        })
    }

    /// Default layout: 1–4 kHz 20 ms pilots, 10 ms guards, 416 payload bits.
    pub fn standard(fs_hz: f64) -> Result<Self> {
        FrameConfig::default().layout(fs_hz)
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.pilot_up.sample_rate_hz()
    }

    /// Start of the down sweep relative to the start of the up sweep.
    pub fn pilot_spacing(&self) -> usize {
        self.pilot_up.len() + self.guard_samples
    }

    /// Samples ahead of the payload.
    pub fn preamble_len(&self) -> usize {
        self.pilot_up.len() + self.pilot_down.len() + 2 * self.guard_samples
    }

    pub fn check_payload(&self, spec: &ModSpec) -> Result<()> {
        ensure!(
            self.payload_bits.is_multiple_of(spec.bits_per_symbol()),
            Config,
            "payload of {} bits is not a whole number of symbols",
            self.payload_bits
        );
        Ok(())
    }
}

/// Concatenates `[up | guard | down | guard | payload]`.
pub fn build_frame(layout: &FrameLayout, payload: &Waveform) -> Result<Waveform> {
    let fs = layout.sample_rate_hz();
    ensure!(
        payload.sample_rate_hz() == fs && layout.pilot_down.sample_rate_hz() == fs,
        Input,
        "payload at {} Hz does not match pilot rate {fs} Hz",
        payload.sample_rate_hz()
    );
    let mut samples = Vec::with_capacity(layout.preamble_len() + payload.len());
    samples.extend_from_slice(layout.pilot_up.samples());
    samples.resize(samples.len() + layout.guard_samples, 0.0);
    samples.extend_from_slice(layout.pilot_down.samples());
    samples.resize(samples.len() + layout.guard_samples, 0.0);
    samples.extend_from_slice(payload.samples());
    Waveform::new(samples, fs)
}

/// Average energy per bit of a waveform carrying `n_bits` bits, in
/// sample units (sum of squares).
pub fn energy_per_bit(x: &Waveform, n_bits: usize) -> f64 {
    x.energy() / n_bits.max(1) as f64
}
