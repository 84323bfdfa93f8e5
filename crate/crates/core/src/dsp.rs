//! Signal-processing primitives shared by the channel and the receiver:
//! analytic signals, band-limited fractional resampling and FFT-based
//! correlation.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Half-width of the resampling kernel, in input samples at unit cutoff.
const SINC_HALF_WIDTH: f64 = 32.0;
const KAISER_BETA: f64 = 8.6;

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

/// Analytic signal `x + j·H{x}` computed with a one-sided spectrum.
///
/// The real part reproduces `x` up to FFT round-off.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf, false);
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || (n.is_multiple_of(2) && k == half) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *v *= gain;
    }
    fft_in_place(&mut buf, true);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser window sampled on `u² ∈ [0, 1]`; indexing by `u²` avoids a square
/// root per tap.
const KAISER_TABLE_LEN: usize = 16_384;

fn kaiser_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let norm = bessel_i0(KAISER_BETA);
        (0..=KAISER_TABLE_LEN)
            .map(|i| {
                let u2 = i as f64 / KAISER_TABLE_LEN as f64;
                bessel_i0(KAISER_BETA * (1.0 - u2).max(0.0).sqrt()) / norm
            })
            .collect()
    })
}

fn kaiser_lookup(table: &[f64], u2: f64) -> f64 {
    if u2 >= 1.0 {
        return 0.0;
    }
    let x = u2 * KAISER_TABLE_LEN as f64;
    let i = x as usize;
    let f = x - i as f64;
    table[i] + f * (table[i + 1] - table[i])
}

/// Evaluates the band-limited reconstruction of `x` at the fractional input
/// positions `start + n·step` for `n in 0..n_out`.
///
/// `cutoff` is the passband edge as a fraction of the input Nyquist rate and
/// must be in (0, 1]; lower it when the evaluation grid is coarser than the
/// input grid. Samples outside `x` are treated as zero.
pub fn resample_at(x: &[f64], start: f64, step: f64, n_out: usize, cutoff: f64) -> Vec<f64> {
    debug_assert!(cutoff > 0.0 && cutoff <= 1.0);
    let half = SINC_HALF_WIDTH / cutoff;
    let inv_half2 = 1.0 / (half * half);
    let len = x.len() as i64;
    let table = kaiser_table();
    // sin(π·c·d) advances by a fixed rotation as d drops by one per tap
    let (rot_s, rot_c) = (PI * cutoff).sin_cos();
    (0..n_out)
        .map(|n| {
            let pos = start + n as f64 * step;
            let lo = ((pos - half).ceil() as i64).max(0);
            let hi = ((pos + half).floor() as i64).min(len - 1);
            if lo > hi {
                return 0.0;
            }
            let mut d = pos - lo as f64;
            let (mut s, mut c) = (PI * cutoff * d).sin_cos();
            let mut acc = 0.0;
            for k in lo..=hi {
                let arg = PI * cutoff * d;
                let sinc = if arg.abs() < 1e-9 { 1.0 } else { s / arg };
                acc += x[k as usize] * cutoff * sinc * kaiser_lookup(table, d * d * inv_half2);
                d -= 1.0;
                let s_next = s * rot_c - c * rot_s;
                c = c * rot_c + s * rot_s;
                s = s_next;
            }
            acc
        })
        .collect()
}

/// Time-scales a sampled signal: `y[n] = x(alpha·n)`, output length
/// `round(len / alpha)`.
pub fn time_scale(x: &[f64], alpha: f64) -> Vec<f64> {
    let n_out = (x.len() as f64 / alpha).round() as usize;
    if alpha == 1.0 {
        return x.to_vec();
    }
    resample_at(x, 0.0, alpha, n_out, alpha.recip().min(1.0))
}

/// Normalized cross-correlation envelope of `signal` against `template`.
///
/// Entry `l` is `|Σ signal[l+n]·conj(a[n])| / (‖template‖·‖signal[l..l+m]‖)`
/// where `a` is the analytic template, clamped to [0, 1]. It is insensitive to
/// the carrier phase of the match. Returns one value per full-overlap lag.
pub fn normalized_xcorr_envelope(signal: &[f64], template: &[f64]) -> Vec<f64> {
    let m = template.len();
    if m == 0 || signal.len() < m {
        return Vec::new();
    }
    let n_lags = signal.len() - m + 1;
    let size = (signal.len() + m).next_power_of_two();
    let analytic = analytic_signal(template);

    let mut s: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    s.resize(size, Complex64::new(0.0, 0.0));
    let mut t = analytic;
    t.resize(size, Complex64::new(0.0, 0.0));
    fft_in_place(&mut s, false);
    fft_in_place(&mut t, false);
    for (a, b) in s.iter_mut().zip(&t) {
        *a *= b.conj();
    }
    fft_in_place(&mut s, true);
    let scale = 1.0 / size as f64;

    let t_norm = template.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut prefix = Vec::with_capacity(signal.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in signal {
        acc += v * v;
        prefix.push(acc);
    }
    (0..n_lags)
        .map(|l| {
            let energy = (prefix[l + m] - prefix[l]).max(0.0);
            let denom = t_norm * energy.sqrt();
            if denom <= f64::EPSILON {
                0.0
            } else {
                (s[l].norm() * scale / denom).min(1.0)
            }
        })
        .collect()
}

/// Block-noncoherent variant of [`normalized_xcorr_envelope`]. The template
/// is cut into `block` sample pieces, each piece is correlated on its own and
/// the magnitudes are summed, so a match survives carrier phase jumps
/// between pieces. Entry `l` is `Σ_k |c_k(l)| / Σ_k ‖t_k‖·‖s_k(l)‖`, in [0, 1].
pub fn block_xcorr_envelope(signal: &[f64], template: &[f64], block: usize) -> Vec<f64> {
    let m = template.len();
    if block == 0 || block >= m {
        return normalized_xcorr_envelope(signal, template);
    }
    if signal.len() < m {
        return Vec::new();
    }
    let n_lags = signal.len() - m + 1;
    let size = (signal.len() + m).next_power_of_two();
    let analytic = analytic_signal(template);
    let mut spec: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    spec.resize(size, Complex64::new(0.0, 0.0));
    fft_in_place(&mut spec, false);

    let mut prefix = Vec::with_capacity(signal.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in signal {
        acc += v * v;
        prefix.push(acc);
    }
    let scale = 1.0 / size as f64;
    let mut num = vec![0.0; n_lags];
    let mut den = vec![0.0; n_lags];
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for start in (0..m).step_by(block) {
        let end = (start + block).min(m);
        let t_norm = template[start..end].iter().map(|v| v * v).sum::<f64>().sqrt();
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        buf[start..end].copy_from_slice(&analytic[start..end]);
        fft_in_place(&mut buf, false);
        for (b, s) in buf.iter_mut().zip(&spec) {
            *b = s * b.conj();
        }
        fft_in_place(&mut buf, true);
        for l in 0..n_lags {
            num[l] += buf[l].norm() * scale;
            den[l] += t_norm * (prefix[l + end] - prefix[l + start]).max(0.0).sqrt();
        }
    }
    num.iter()
        .zip(&den)
        .map(|(n, d)| if *d <= f64::EPSILON { 0.0 } else { (n / d).min(1.0) })
        .collect()
}

/// Vertex offset of the parabola through three equally spaced samples,
/// in (-0.5, 0.5) when the middle sample is the maximum.
pub fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Magnitude spectrum (bins `0..=n/2`) of a real signal.
pub fn magnitude_spectrum(x: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf, false);
    buf.truncate(x.len() / 2 + 1);
    buf.iter().map(|c| c.norm()).collect()
}

/// Frequency (Hz) of the largest non-DC spectral bin, and the bin spacing.
pub fn dominant_frequency(x: &[f64], sample_rate_hz: f64) -> (f64, f64) {
    let spec = magnitude_spectrum(x);
    let (bin, _) = spec
        .iter()
        .enumerate()
        .skip(1)
        .fold((0, f64::MIN), |best, (i, &m)| if m > best.1 { (i, m) } else { best });
    let df = sample_rate_hz / x.len() as f64;
    (bin as f64 * df, df)
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// RMS of `a - b` over their common prefix.
pub fn rms_diff(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64).sqrt()
}
