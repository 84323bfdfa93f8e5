//! Pixelization of signal segments into binary trace images.
//!
//! A normalized segment of `F_l` samples becomes a `Pix × F_l` matrix that is
//! all ones except for a single zero per column marking the sample's level.
//! Rows are numbered from the top, so larger values sit higher. Several
//! resolutions of the same segment are stacked into a [`FrameSet`] whose
//! flattened form is the visible layer of the de-noising network.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// A `rows × cols` binary image with one zero per column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelFrame {
    rows: usize,
    cols: usize,
    /// Row-major cells in {0, 1}.
    cells: Vec<u8>,
}

impl PixelFrame {
    /// Builds a frame from row-major cells, checking the one-trace invariant.
    pub fn from_cells(rows: usize, cols: usize, cells: Vec<u8>) -> Result<Self> {
        ensure!(rows >= 1 && cols >= 1, Input, "pixel frame must be non-empty");
        ensure!(
            cells.len() == rows * cols,
            Input,
            "{} cells for a {rows}x{cols} frame",
            cells.len()
        );
        ensure!(cells.iter().all(|&c| c <= 1), Input, "pixel cells must be 0 or 1");
        for c in 0..cols {
            let zeros = (0..rows).filter(|&r| cells[r * cols + c] == 0).count();
            ensure!(zeros == 1, Input, "column {c} has {zeros} trace cells, expected 1");
        }
        Ok(PixelFrame { rows, cols, cells })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.cols + col]
    }

    /// Zero-based row of the trace in each column.
    pub fn trace_rows(&self) -> Vec<usize> {
        (0..self.cols)
            .map(|c| (0..self.rows).find(|&r| self.get(r, c) == 0).unwrap_or(0))
            .collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.cells.iter().map(|&c| c as f64).collect()
    }
}

/// Frames of one segment at several resolutions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameSet {
    pub frames: Vec<PixelFrame>,
}

impl FrameSet {
    /// Length of [`FrameSet::flatten`].
    pub fn dimension(&self) -> usize {
        self.frames.iter().map(|f| f.rows * f.cols).sum()
    }

    /// Concatenation of every frame's row-major cells, as visible-unit values.
    pub fn flatten(&self) -> Vec<f64> {
        self.frames
            .iter()
            .flat_map(|f| f.cells.iter().map(|&c| c as f64))
            .collect()
    }
}

/// One pixelization resolution: `rows` levels after block-mean decimation
/// by `decimation`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub rows: usize,
    pub decimation: usize,
}

impl Resolution {
    pub const fn new(rows: usize, decimation: usize) -> Self {
        Resolution { rows, decimation }
    }
}

/// Four resolutions whose flattened size on a 40-sample segment is
/// 15·40 + 10·20 + 5·10 + 5·5 = 875.
pub const DEFAULT_RESOLUTIONS: [Resolution; 4] = [
    Resolution::new(15, 1),
    Resolution::new(10, 2),
    Resolution::new(5, 4),
    Resolution::new(5, 8),
];

/// Flattened [`FrameSet`] size for a segment of `len` samples.
pub fn frame_set_dimension(resolutions: &[Resolution], len: usize) -> usize {
    resolutions.iter().map(|r| r.rows * len.div_ceil(r.decimation)).sum()
}

/// Min-max normalization onto [0, 1].
pub fn normalize(s: &[f64]) -> Result<Vec<f64>> {
    ensure!(!s.is_empty(), Input, "cannot normalize an empty signal");
    ensure!(s.iter().all(|v| v.is_finite()), Input, "signal has non-finite samples");
    let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    ensure!(hi > lo, Degenerate, "constant signal has no range to normalize");
    let span = hi - lo;
    Ok(s.iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect())
}

/// Zero-based row for a normalized value.
fn level_row(value: f64, rows: usize) -> usize {
    ((1.0 - value) * (rows - 1) as f64).round() as usize
}

/// Traces a normalized signal onto a `rows`-level binary image. Column `i`
/// holds its zero at 1-based row `1 + round((1 - s[i])·(rows - 1))`.
pub fn pixelize(s_norm: &[f64], rows: usize) -> Result<PixelFrame> {
    ensure!(rows >= 2, Input, "need at least 2 pixel rows, got {rows}");
    ensure!(!s_norm.is_empty(), Input, "cannot pixelize an empty signal");
    if let Some(v) = s_norm.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(crate::Error::Input(format!(
            "value {v} outside [0, 1]; normalize first"
        )));
    }
    let cols = s_norm.len();
    let mut cells = vec![1u8; rows * cols];
    for (c, &v) in s_norm.iter().enumerate() {
        cells[level_row(v, rows) * cols + c] = 0;
    }
    Ok(PixelFrame { rows, cols, cells })
}

/// Reads the trace back out of a (possibly soft) `rows × cols` image given
/// row-major: the per-column minimum, ties to the topmost row, mapped to
/// `1 - r/(rows - 1)` for zero-based row `r`.
pub fn trace_from_values(values: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(values.len(), rows * cols);
    let denom = (rows.max(2) - 1) as f64;
    (0..cols)
        .map(|c| {
            let mut best = 0;
            for r in 1..rows {
                if values[r * cols + c] < values[best * cols + c] {
                    best = r;
                }
            }
            1.0 - best as f64 / denom
        })
        .collect()
}

/// Inverse of [`pixelize`] up to quantization.
pub fn depixelize(f: &PixelFrame) -> Vec<f64> {
    trace_from_values(&f.to_f64(), f.rows, f.cols)
}

/// A window of a longer signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub samples: Vec<f64>,
    /// True when the source ran out and the tail was zero padded.
    pub padded: bool,
    /// Number of samples taken from the source.
    pub valid: usize,
}

/// Consecutive non-overlapping windows of `frame_len` samples; the final
/// partial window is zero padded and flagged.
pub fn segment(s: &[f64], frame_len: usize) -> Result<Vec<Segment>> {
    ensure!(frame_len >= 1, Input, "frame length must be at least 1");
    Ok(s.chunks(frame_len)
        .map(|c| {
            let mut samples = c.to_vec();
            let padded = c.len() < frame_len;
            samples.resize(frame_len, 0.0);
            Segment {
                samples,
                padded,
                valid: c.len(),
            }
        })
        .collect())
}

/// Mean over consecutive blocks of `factor` samples (last block may be short).
pub fn decimate(s: &[f64], factor: usize) -> Vec<f64> {
    s.chunks(factor.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Pixelizes `s_norm` at every resolution.
pub fn multi_resolution(s_norm: &[f64], resolutions: &[Resolution]) -> Result<FrameSet> {
    ensure!(!resolutions.is_empty(), Input, "at least one resolution is required");
    let frames = resolutions
        .iter()
        .map(|r| {
            ensure!(
                r.decimation >= 1 && r.decimation <= s_norm.len(),
                Input,
                "decimation {} invalid for a {}-sample segment",
                r.decimation,
                s_norm.len()
            );
            pixelize(&decimate(s_norm, r.decimation), r.rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameSet { frames })
}
