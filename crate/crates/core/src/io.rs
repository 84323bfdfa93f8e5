//! On-disk formats.
//!
//! * Waveforms: raw little-endian `f32` samples plus a `<file>.json` sidecar
//!   holding the sample rate and length.
//! * Pixel frames: `rows: u32`, `cols: u32`, then the cells row-major, eight
//!   per byte with the first cell in the most significant bit. A frame set is
//!   a `u32` frame count followed by its frames; a frame-set file is a `u32`
//!   set count followed by the sets.
//! * RBMs: magic `RBM1`, `u_v: u32`, `u_h: u32`, then `W` (row-major,
//!   `u_h × u_v`), `b` and `c` as little-endian `f64`.
//! * Models: magic `DBN1`, a `u32`-length-prefixed JSON metadata block, a
//!   `u32` layer count and one RBM blob per layer.
//!
//! All integers are little-endian.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dbn::{ClassifierModel, DbnModel, DenoiseModel, Provenance};
use crate::error::{ensure, Error, Result};
use crate::pixelizer::{FrameSet, PixelFrame, Resolution};
use crate::rbm::RbmParams;
use crate::waveforms::Waveform;

pub const RBM_MAGIC: &[u8; 4] = b"RBM1";
pub const MODEL_MAGIC: &[u8; 4] = b"DBN1";

/// Provenance stamped into every artifact.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub crate_version: String,
    pub git_revision: String,
    pub config_hash: String,
    pub seed: u64,
}

impl ArtifactMeta {
    pub fn new(git_revision: &str, config_hash: &str, seed: u64) -> Self {
        ArtifactMeta {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            git_revision: git_revision.to_string(),
            config_hash: config_hash.to_string(),
            seed,
        }
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes`, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push(b'\n');
    write_bytes(path, &text)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("{} truncated at byte {}", self.what, self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format(format!("{} too large", self.what)))?,
        )?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn magic(&mut self, m: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        ensure!(
            got == m,
            Format,
            "{}: bad magic {:?}, expected {:?}",
            self.what,
            String::from_utf8_lossy(got),
            String::from_utf8_lossy(m)
        );
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        ensure!(
            self.pos == self.buf.len(),
            Format,
            "{}: {} trailing bytes",
            self.what,
            self.buf.len() - self.pos
        );
        Ok(())
    }
}

fn push_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn push_f64s<'a>(out: &mut Vec<u8>, xs: impl IntoIterator<Item = &'a f64>) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

#[derive(Serialize, Deserialize)]
struct WaveformSidecar {
    sample_rate_hz: f64,
    length: usize,
}

/// Sidecar path for a raw waveform file: `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_waveform(path: &Path, w: &Waveform) -> Result<()> {
    let mut bytes = Vec::with_capacity(w.len() * 4);
    for &v in w.samples() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_bytes(path, &bytes)?;
    write_json(
        &sidecar_path(path),
        &WaveformSidecar {
            sample_rate_hz: w.sample_rate_hz(),
            length: w.len(),
        },
    )
}

/// Reads a raw waveform. Without a sidecar, `fallback_rate_hz` supplies the
/// sample rate.
pub fn read_waveform(path: &Path, fallback_rate_hz: Option<f64>) -> Result<Waveform> {
    let bytes = read_bytes(path)?;
    ensure!(
        bytes.len() % 4 == 0,
        Format,
        "{}: length {} is not a multiple of 4",
        path.display(),
        bytes.len()
    );
    let samples: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let side = sidecar_path(path);
    let rate = if side.exists() {
        let meta: WaveformSidecar = read_json(&side)?;
        ensure!(
            meta.length == samples.len(),
            Format,
            "{}: sidecar says {} samples, file holds {}",
            path.display(),
            meta.length,
            samples.len()
        );
        meta.sample_rate_hz
    } else {
        fallback_rate_hz.ok_or_else(|| {
            Error::Config(format!(
                "{} has no sidecar and no sample rate was given",
                path.display()
            ))
        })?
    };
    Waveform::new(samples, rate)
}

pub fn encode_pixel_frame(f: &PixelFrame, out: &mut Vec<u8>) -> Result<()> {
    push_u32(out, f.rows())?;
    push_u32(out, f.cols())?;
    for chunk in f.cells().chunks(8) {
        let mut byte = 0u8;
        for (i, &c) in chunk.iter().enumerate() {
            byte |= c << (7 - i);
        }
        out.push(byte);
    }
    Ok(())
}

fn decode_pixel_frame(r: &mut Reader) -> Result<PixelFrame> {
    let rows = r.u32()?;
    let cols = r.u32()?;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("pixel frame too large".into()))?;
    let packed = r.take(n.div_ceil(8))?;
    let cells = (0..n).map(|i| (packed[i / 8] >> (7 - i % 8)) & 1).collect();
    PixelFrame::from_cells(rows, cols, cells)
}

pub fn encode_frame_set(fs: &FrameSet, out: &mut Vec<u8>) -> Result<()> {
    push_u32(out, fs.frames.len())?;
    fs.frames.iter().try_for_each(|f| encode_pixel_frame(f, out))
}

fn decode_frame_set(r: &mut Reader) -> Result<FrameSet> {
    let n = r.u32()?;
    let frames = (0..n).map(|_| decode_pixel_frame(r)).collect::<Result<_>>()?;
    Ok(FrameSet { frames })
}

pub fn frame_set_from_bytes(bytes: &[u8]) -> Result<FrameSet> {
    let mut r = Reader::new(bytes, "frame set");
    let fs = decode_frame_set(&mut r)?;
    r.finish()?;
    Ok(fs)
}

pub fn write_frame_sets(path: &Path, sets: &[FrameSet]) -> Result<()> {
    let mut out = Vec::new();
    push_u32(&mut out, sets.len())?;
    for s in sets {
        encode_frame_set(s, &mut out)?;
    }
    write_bytes(path, &out)
}

pub fn read_frame_sets(path: &Path) -> Result<Vec<FrameSet>> {
    let bytes = read_bytes(path)?;
    let mut r = Reader::new(&bytes, "frame-set file");
    let n = r.u32()?;
    let sets = (0..n).map(|_| decode_frame_set(&mut r)).collect::<Result<_>>()?;
    r.finish()?;
    Ok(sets)
}

/// `rows: u32`, `cols: u32`, then row-major little-endian `f32`.
pub fn write_f32_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut out = Vec::with_capacity(8 + m.len() * 4);
    push_u32(&mut out, m.nrows())?;
    push_u32(&mut out, m.ncols())?;
    for &v in m.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_bytes(path, &out)
}

pub fn read_f32_matrix(path: &Path) -> Result<Array2<f64>> {
    let bytes = read_bytes(path)?;
    let mut r = Reader::new(&bytes, "matrix file");
    let rows = r.u32()?;
    let cols = r.u32()?;
    let body = r.take(rows * cols * 4)?;
    r.finish()?;
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))
}

pub fn encode_rbm(p: &RbmParams, out: &mut Vec<u8>) -> Result<()> {
    out.extend_from_slice(RBM_MAGIC);
    push_u32(out, p.n_visible())?;
    push_u32(out, p.n_hidden())?;
    push_f64s(out, p.w.iter());
    push_f64s(out, p.b.iter());
    push_f64s(out, p.c.iter());
    Ok(())
}

fn decode_rbm(r: &mut Reader) -> Result<RbmParams> {
    r.magic(RBM_MAGIC)?;
    let nv = r.u32()?;
    let nh = r.u32()?;
    let w = r.f64s(nv * nh)?;
    let b = r.f64s(nv)?;
    let c = r.f64s(nh)?;
    RbmParams::new(
        Array2::from_shape_vec((nh, nv), w).map_err(|e| Error::Format(e.to_string()))?,
        Array1::from(b),
        Array1::from(c),
    )
}

pub fn rbm_to_bytes(p: &RbmParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    encode_rbm(p, &mut out)?;
    Ok(out)
}

pub fn rbm_from_bytes(bytes: &[u8]) -> Result<RbmParams> {
    let mut r = Reader::new(bytes, "RBM blob");
    let p = decode_rbm(&mut r)?;
    r.finish()?;
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbmMeta {
    pub epochs_trained: usize,
    pub config_hash: String,
}

/// RBM blob plus its metadata in the `<path>.json` sidecar.
pub fn write_rbm(path: &Path, p: &RbmParams, meta: &RbmMeta) -> Result<()> {
    write_bytes(path, &rbm_to_bytes(p)?)?;
    write_json(&sidecar_path(path), meta)
}

pub fn read_rbm(path: &Path) -> Result<RbmParams> {
    rbm_from_bytes(&read_bytes(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// What a model container holds beyond its RBM stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelHead {
    Stack,
    Denoise {
        noise_nodes: Vec<usize>,
        neutral_values: Vec<f64>,
        activity_scores: Vec<f64>,
        #[serde(default)]
        resolutions: Vec<Resolution>,
    },
    Classifier {
        label_arity: usize,
        /// `label_arity` rows.
        head_w: Vec<Vec<f64>>,
        head_b: Vec<f64>,
        validation_accuracy: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub layer_sizes: Vec<usize>,
    pub head: ModelHead,
    pub provenance: Provenance,
    pub artifact: ArtifactMeta,
}

pub fn model_to_bytes(stack: &DbnModel, meta: &ModelMeta) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(meta).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    push_u32(&mut out, json.len())?;
    out.extend_from_slice(&json);
    push_u32(&mut out, stack.layers.len())?;
    for l in &stack.layers {
        encode_rbm(l, &mut out)?;
    }
    Ok(out)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<(DbnModel, ModelMeta)> {
    let mut r = Reader::new(bytes, "model file");
    r.magic(MODEL_MAGIC)?;
    let n = r.u32()?;
    let meta: ModelMeta = serde_json::from_slice(r.take(n)?).map_err(|e| Error::Format(e.to_string()))?;
    let layers = (0..r.u32()?).map(|_| decode_rbm(&mut r)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    let mut stack = DbnModel::new(layers)?;
    ensure!(
        stack.layer_sizes() == meta.layer_sizes,
        Format,
        "model metadata lists layers {:?} but the blobs chain as {:?}",
        meta.layer_sizes,
        stack.layer_sizes()
    );
    stack.provenance = meta.provenance.clone();
    Ok((stack, meta))
}

fn read_model(path: &Path) -> Result<(DbnModel, ModelMeta)> {
    model_from_bytes(&read_bytes(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_dbn_model(path: &Path, m: &DbnModel, artifact: &ArtifactMeta) -> Result<()> {
    let meta = ModelMeta {
        layer_sizes: m.layer_sizes(),
        head: ModelHead::Stack,
        provenance: m.provenance.clone(),
        artifact: artifact.clone(),
    };
    write_bytes(path, &model_to_bytes(m, &meta)?)
}

pub fn read_dbn_model(path: &Path) -> Result<DbnModel> {
    Ok(read_model(path)?.0)
}

pub fn write_denoise_model(
    path: &Path,
    dm: &DenoiseModel,
    resolutions: &[Resolution],
    artifact: &ArtifactMeta,
) -> Result<()> {
    let meta = ModelMeta {
        layer_sizes: dm.base.layer_sizes(),
        head: ModelHead::Denoise {
            noise_nodes: dm.noise_nodes.clone(),
            neutral_values: dm.neutral_values.clone(),
            activity_scores: dm.activity_scores.clone(),
            resolutions: resolutions.to_vec(),
        },
        provenance: dm.base.provenance.clone(),
        artifact: artifact.clone(),
    };
    write_bytes(path, &model_to_bytes(&dm.base, &meta)?)
}

pub fn read_denoise_model(path: &Path) -> Result<DenoiseModel> {
    let (base, meta) = read_model(path)?;
    match meta.head {
        ModelHead::Denoise {
            noise_nodes,
            neutral_values,
            activity_scores,
            ..
        } => {
            ensure!(
                noise_nodes.len() == neutral_values.len() && noise_nodes.iter().all(|&j| j < base.top_dim()),
                Format,
                "{}: inconsistent noise-node table",
                path.display()
            );
            Ok(DenoiseModel {
                base,
                noise_nodes,
                neutral_values,
                activity_scores,
            })
        }
        _ => Err(Error::Config(format!("{} is not a de-noise model", path.display()))),
    }
}

pub fn write_classifier_model(path: &Path, cm: &ClassifierModel, artifact: &ArtifactMeta) -> Result<()> {
    let meta = ModelMeta {
        layer_sizes: cm.base.layer_sizes(),
        head: ModelHead::Classifier {
            label_arity: cm.label_arity,
            head_w: cm.head_w.rows().into_iter().map(|r| r.to_vec()).collect(),
            head_b: cm.head_b.to_vec(),
            validation_accuracy: cm.validation_accuracy,
        },
        provenance: cm.base.provenance.clone(),
        artifact: artifact.clone(),
    };
    write_bytes(path, &model_to_bytes(&cm.base, &meta)?)
}

pub fn read_classifier_model(path: &Path) -> Result<ClassifierModel> {
    let (base, meta) = read_model(path)?;
    match meta.head {
        ModelHead::Classifier {
            label_arity,
            head_w,
            head_b,
            validation_accuracy,
        } => {
            let top = base.top_dim();
            ensure!(
                head_w.len() == label_arity && head_w.iter().all(|r| r.len() == top) && head_b.len() == label_arity,
                Format,
                "{}: classifier head does not match a {top}-node top layer",
                path.display()
            );
            Ok(ClassifierModel {
                base,
                head_w: Array2::from_shape_vec((label_arity, top), head_w.concat())
                    .map_err(|e| Error::Format(e.to_string()))?,
                head_b: Array1::from(head_b),
                label_arity,
                validation_accuracy,
            })
        }
        _ => Err(Error::Config(format!("{} is not a classifier model", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pixelizer::{multi_resolution, DEFAULT_RESOLUTIONS};
    use crate::rng::seeded;

    #[test]
    fn rbm_blob_layout() {
        let p = RbmParams::new(
            ndarray::array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]],
            ndarray::array![0.1, 0.2, 0.3],
            ndarray::array![-1.0, -2.0],
        )
        .unwrap();
        let b = rbm_to_bytes(&p).unwrap();
        assert_eq!(&b[..4], b"RBM1");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(b[12..20].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(b[20..28].try_into().unwrap()), 2.0);
        assert_eq!(b.len(), 12 + 8 * (6 + 3 + 2));
        assert_eq!(rbm_from_bytes(&b).unwrap(), p);
        assert!(rbm_from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(rbm_from_bytes(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn frame_bits_are_msb_first() {
        let f = PixelFrame::from_cells(2, 5, vec![0, 1, 1, 1, 0, 1, 0, 0, 0, 1]).unwrap();
        let mut out = Vec::new();
        encode_pixel_frame(&f, &mut out).unwrap();
        assert_eq!(&out[..8], &[2, 0, 0, 0, 5, 0, 0, 0]);
        assert_eq!(&out[8..], &[0b0111_0100, 0b0100_0000]);
    }

    #[test]
    fn frame_set_round_trip() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.4).sin() * 0.5 + 0.5).collect();
        let fs = multi_resolution(&x, &DEFAULT_RESOLUTIONS).unwrap();
        let mut out = Vec::new();
        encode_frame_set(&fs, &mut out).unwrap();
        assert_eq!(frame_set_from_bytes(&out).unwrap(), fs);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w = Waveform::new(vec![0.5, -0.25, 1.0], 8000.0).unwrap();
        let p = dir.path().join("w.f32");
        write_waveform(&p, &w).unwrap();
        assert_eq!(read_waveform(&p, None).unwrap(), w);

        let m = Array2::from_shape_fn((3, 4), |(i, j)| (i * 4 + j) as f64 * 0.5);
        let mp = dir.path().join("sub/m.bin");
        write_f32_matrix(&mp, &m).unwrap();
        assert_eq!(read_f32_matrix(&mp).unwrap(), m);

        let mut rng = seeded(1);
        let stack = DbnModel::new(vec![
            RbmParams::random_init(6, 4, &mut rng),
            RbmParams::random_init(4, 2, &mut rng),
        ])
        .unwrap();
        let cm = ClassifierModel {
            base: stack.clone(),
            head_w: ndarray::array![[0.1, 0.2], [0.3, -0.4]],
            head_b: ndarray::array![0.0, 1.0],
            label_arity: 2,
            validation_accuracy: Some(0.75),
        };
        let cp = dir.path().join("c.dbn");
        write_classifier_model(&cp, &cm, &ArtifactMeta::default()).unwrap();
        assert_eq!(read_classifier_model(&cp).unwrap(), cm);
        assert!(matches!(read_denoise_model(&cp), Err(Error::Config(_))));

        let dm = DenoiseModel {
            base: stack,
            noise_nodes: vec![1],
            neutral_values: vec![0.3],
            activity_scores: vec![0.1, 0.9],
        };
        let dp = dir.path().join("d.dbn");
        write_denoise_model(&dp, &dm, &DEFAULT_RESOLUTIONS, &ArtifactMeta::default()).unwrap();
        assert_eq!(read_denoise_model(&dp).unwrap(), dm);
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_bytes(Path::new("/nonexistent/x.bin")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.bin"));
    }

    #[test]
    fn sha_hex() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
