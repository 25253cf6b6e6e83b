//! PSNR and WS-PSNR over raw planar YUV 4:2:0 video.
//!
//! Input files are headerless I420: per frame a full-resolution Y plane
//! followed by quarter-size U and V planes. 8-bit samples take one byte,
//! 10-bit samples two bytes little-endian holding values 0..=1023.
//! All accumulation is done in `f64`.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{chroma_weight_map, sphere_weight_map, GeometryError, RowWeights, WeightGrid};
use crate::scalar::Scalar;

/// Reported in place of infinite PSNR for identical planes.
pub const PSNR_CAP: f64 = 999.99;

/// Y, U, V weights of the combined WS-PSNR.
pub const YUV_WEIGHTS: [f64; 3] = [6.0, 1.0, 1.0];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("width and height must be positive and even, got {width}x{height}")]
    Geometry { width: usize, height: usize },
    #[error("bit depth must be 8 or 10, got {0}")]
    BitDepth(u8),
    #[error("plane dimensions differ: {0}x{1} vs {2}x{3}")]
    PlaneMismatch(usize, usize, usize, usize),
    #[error("plane holds {actual} samples, expected {expected}")]
    SampleCount { expected: usize, actual: usize },
    #[error("weight grid {0}x{1} does not match plane {2}x{3}")]
    WeightMismatch(usize, usize, usize, usize),
    #[error("weights sum to zero")]
    ZeroWeight,
    #[error("frame formats differ")]
    FrameMismatch,
    #[error("{file}: frame {frame} is incomplete ({got} of {expected} bytes)")]
    ShortFile {
        file: &'static str,
        frame: usize,
        got: usize,
        expected: usize,
    },
    #[error("{file}: frame {frame} has sample {value} in plane {plane} above the {bit_depth}-bit maximum")]
    SampleRange {
        file: &'static str,
        frame: usize,
        plane: char,
        value: u16,
        bit_depth: u8,
    },
    #[error(transparent)]
    Weights(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Frame geometry of a raw 4:2:0 sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VideoSpec {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    pub frame_count: usize,
}

impl VideoSpec {
    pub fn new(width: usize, height: usize, bit_depth: u8, frame_count: usize) -> Result<Self, MetricsError> {
        let spec = Self {
            width,
            height,
            bit_depth,
            frame_count,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.width == 0 || self.height == 0 || self.width % 2 != 0 || self.height % 2 != 0 {
            return Err(MetricsError::Geometry {
                width: self.width,
                height: self.height,
            });
        }
        if self.bit_depth != 8 && self.bit_depth != 10 {
            return Err(MetricsError::BitDepth(self.bit_depth));
        }
        Ok(())
    }

    pub fn max_value(&self) -> u16 {
        (1u16 << self.bit_depth) - 1
    }

    pub fn bytes_per_sample(&self) -> usize {
        if self.bit_depth > 8 {
            2
        } else {
            1
        }
    }

    pub fn luma_samples(&self) -> usize {
        self.width * self.height
    }

    pub fn chroma_samples(&self) -> usize {
        (self.width / 2) * (self.height / 2)
    }

    pub fn frame_bytes(&self) -> usize {
        (self.luma_samples() + 2 * self.chroma_samples()) * self.bytes_per_sample()
    }
}

/// One plane of samples, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    width: usize,
    height: usize,
    samples: Vec<u16>,
}

impl Plane {
    pub fn new(width: usize, height: usize, samples: Vec<u16>) -> Result<Self, MetricsError> {
        if samples.len() != width * height {
            return Err(MetricsError::SampleCount {
                expected: width * height,
                actual: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, value: u16) -> Self {
        Self {
            width,
            height,
            samples: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    pub fn set(&mut self, row: usize, col: usize, value: u16) {
        self.samples[row * self.width + col] = value;
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.samples[row * self.width + col]
    }

    fn row(&self, r: usize) -> &[u16] {
        &self.samples[r * self.width..(r + 1) * self.width]
    }

    fn same_shape(&self, other: &Plane) -> Result<(), MetricsError> {
        if self.width != other.width || self.height != other.height {
            return Err(MetricsError::PlaneMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

/// A 4:2:0 frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YuvFrame {
    pub y: Plane,
    pub u: Plane,
    pub v: Plane,
    pub bit_depth: u8,
}

impl YuvFrame {
    pub fn new(y: Plane, u: Plane, v: Plane, bit_depth: u8) -> Result<Self, MetricsError> {
        let spec = VideoSpec::new(y.width, y.height, bit_depth, 1)?;
        for c in [&u, &v] {
            if c.width != spec.width / 2 || c.height != spec.height / 2 {
                return Err(MetricsError::PlaneMismatch(c.width, c.height, spec.width / 2, spec.height / 2));
            }
        }
        Ok(Self { y, u, v, bit_depth })
    }

    /// Frame with every sample of each plane set to the given value.
    pub fn flat(spec: &VideoSpec, y: u16, u: u16, v: u16) -> Self {
        let (w, h) = (spec.width, spec.height);
        Self {
            y: Plane::filled(w, h, y),
            u: Plane::filled(w / 2, h / 2, u),
            v: Plane::filled(w / 2, h / 2, v),
            bit_depth: spec.bit_depth,
        }
    }

    pub fn spec(&self) -> VideoSpec {
        VideoSpec {
            width: self.y.width,
            height: self.y.height,
            bit_depth: self.bit_depth,
            frame_count: 1,
        }
    }

    pub fn planes(&self) -> [&Plane; 3] {
        [&self.y, &self.u, &self.v]
    }

    pub fn max_value(&self) -> u16 {
        self.spec().max_value()
    }
}

/// Weighted mean squared error, `sum(w * (a - b)^2) / sum(w)`.
pub fn weighted_mse<T: Scalar>(
    reference: &Plane,
    test: &Plane,
    weights: &WeightGrid<T>,
) -> Result<f64, MetricsError> {
    reference.same_shape(test)?;
    if weights.rows() != reference.height || weights.cols() != reference.width {
        return Err(MetricsError::WeightMismatch(
            weights.cols(),
            weights.rows(),
            reference.width,
            reference.height,
        ));
    }
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for r in 0..reference.height {
        let (a, b) = (reference.row(r), test.row(r));
        match weights.row(r) {
            RowWeights::Constant(w) => {
                let sse: u64 = a
                    .iter()
                    .zip(b)
                    .map(|(&x, &y)| {
                        let d = x.abs_diff(y) as u64;
                        d * d
                    })
                    .sum();
                let w = w.as_f64();
                num += w * sse as f64;
                den += w * a.len() as f64;
            }
            RowWeights::Varying(ws) => {
                for ((&x, &y), w) in a.iter().zip(b).zip(ws) {
                    let d = x.abs_diff(y) as f64;
                    let w = w.as_f64();
                    num += w * d * d;
                    den += w;
                }
            }
        }
    }
    if den <= 0.0 {
        return Err(MetricsError::ZeroWeight);
    }
    Ok(num / den)
}

/// Plain mean squared error.
pub fn mse(reference: &Plane, test: &Plane) -> Result<f64, MetricsError> {
    reference.same_shape(test)?;
    let sse: u64 = reference
        .samples
        .iter()
        .zip(&test.samples)
        .map(|(&x, &y)| {
            let d = x.abs_diff(y) as u64;
            d * d
        })
        .sum();
    Ok(sse as f64 / reference.samples.len() as f64)
}

/// `10 log10(max^2 / mse)`, or [`PSNR_CAP`] when `mse` is zero.
pub fn psnr_from_mse(mse: f64, max_value: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (max_value * max_value / mse).log10()).min(PSNR_CAP)
    }
}

pub fn psnr_plane(reference: &Plane, test: &Plane, max_value: u16) -> Result<f64, MetricsError> {
    Ok(psnr_from_mse(mse(reference, test)?, max_value as f64))
}

pub fn ws_psnr_plane<T: Scalar>(
    reference: &Plane,
    test: &Plane,
    weights: &WeightGrid<T>,
    max_value: u16,
) -> Result<f64, MetricsError> {
    Ok(psnr_from_mse(weighted_mse(reference, test, weights)?, max_value as f64))
}

/// `(6 Y + U + V) / 8` combination of per-component values.
pub fn combine_yuv(values: [f64; 3]) -> f64 {
    let total: f64 = YUV_WEIGHTS.iter().sum();
    values.iter().zip(YUV_WEIGHTS).map(|(v, w)| v * w).sum::<f64>() / total
}

/// Luma and chroma spherical weights for one frame geometry.
#[derive(Debug, Clone)]
pub struct FrameWeights {
    pub luma: WeightGrid<f64>,
    pub chroma: WeightGrid<f64>,
}

impl FrameWeights {
    pub fn erp(width: usize, height: usize) -> Result<Self, MetricsError> {
        Ok(Self {
            luma: sphere_weight_map(height, width)?,
            chroma: chroma_weight_map(height, width)?,
        })
    }

    /// Every pixel weighted equally, reducing WS-PSNR to PSNR.
    pub fn uniform(width: usize, height: usize) -> Result<Self, MetricsError> {
        Ok(Self {
            luma: WeightGrid::uniform(height, width)?,
            chroma: WeightGrid::uniform(height / 2, width / 2)?,
        })
    }
}

/// Metrics of one frame pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMetrics {
    pub psnr: [f64; 3],
    pub ws_psnr: [f64; 3],
    pub ws_psnr_yuv: f64,
}

pub fn frame_metrics(
    reference: &YuvFrame,
    test: &YuvFrame,
    weights: &FrameWeights,
) -> Result<FrameMetrics, MetricsError> {
    if reference.spec() != test.spec() {
        return Err(MetricsError::FrameMismatch);
    }
    let max = reference.max_value();
    let mut psnr = [0.0; 3];
    let mut ws = [0.0; 3];
    for (i, (a, b)) in reference.planes().into_iter().zip(test.planes()).enumerate() {
        let w = if i == 0 { &weights.luma } else { &weights.chroma };
        psnr[i] = psnr_plane(a, b, max)?;
        ws[i] = ws_psnr_plane(a, b, w, max)?;
    }
    Ok(FrameMetrics {
        psnr,
        ws_psnr: ws,
        ws_psnr_yuv: combine_yuv(ws),
    })
}

/// Combined (6,1,1) WS-PSNR of one frame pair.
pub fn ws_psnr_yuv(reference: &YuvFrame, test: &YuvFrame) -> Result<f64, MetricsError> {
    let weights = FrameWeights::erp(reference.y.width, reference.y.height)?;
    Ok(frame_metrics(reference, test, &weights)?.ws_psnr_yuv)
}

/// Sequential frame reader over a raw I420 stream.
pub struct YuvReader<R> {
    inner: R,
    spec: VideoSpec,
    label: &'static str,
    next_frame: usize,
    buf: Vec<u8>,
}

impl<R: Read> YuvReader<R> {
    /// `label` names the stream in error messages.
    pub fn new(inner: R, spec: VideoSpec, label: &'static str) -> Result<Self, MetricsError> {
        spec.validate()?;
        Ok(Self {
            inner,
            spec,
            label,
            next_frame: 0,
            buf: vec![0; spec.frame_bytes()],
        })
    }

    /// Reads the next frame; a short read is an error naming the frame index.
    pub fn read_frame(&mut self) -> Result<YuvFrame, MetricsError> {
        let frame = self.next_frame;
        let expected = self.buf.len();
        let mut got = 0;
        while got < expected {
            match self.inner.read(&mut self.buf[got..]) {
                Ok(0) => break,
                Ok(n) => got += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        if got < expected {
            return Err(MetricsError::ShortFile {
                file: self.label,
                frame,
                got,
                expected,
            });
        }
        let samples: Vec<u16> = if self.spec.bytes_per_sample() == 1 {
            self.buf.iter().map(|&b| b as u16).collect()
        } else {
            self.buf
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect()
        };
        let max = self.spec.max_value();
        let (ly, lc) = (self.spec.luma_samples(), self.spec.chroma_samples());
        if let Some(i) = samples.iter().position(|&s| s > max) {
            let plane = if i < ly {
                'Y'
            } else if i < ly + lc {
                'U'
            } else {
                'V'
            };
            return Err(MetricsError::SampleRange {
                file: self.label,
                frame,
                plane,
                value: samples[i],
                bit_depth: self.spec.bit_depth,
            });
        }
        let (w, h) = (self.spec.width, self.spec.height);
        let y = Plane::new(w, h, samples[..ly].to_vec())?;
        let u = Plane::new(w / 2, h / 2, samples[ly..ly + lc].to_vec())?;
        let v = Plane::new(w / 2, h / 2, samples[ly + lc..].to_vec())?;
        self.next_frame += 1;
        Ok(YuvFrame {
            y,
            u,
            v,
            bit_depth: self.spec.bit_depth,
        })
    }
}

/// Writes frames in I420 layout.
pub fn write_frame(out: &mut impl Write, frame: &YuvFrame) -> io::Result<()> {
    for plane in frame.planes() {
        if frame.bit_depth > 8 {
            let bytes: Vec<u8> = plane.samples.iter().flat_map(|s| s.to_le_bytes()).collect();
            out.write_all(&bytes)?;
        } else {
            let bytes: Vec<u8> = plane.samples.iter().map(|&s| s as u8).collect();
            out.write_all(&bytes)?;
        }
    }
    Ok(())
}

/// Per-frame metrics and their per-component averages.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceReport {
    pub frames: Vec<FrameMetrics>,
    pub average: FrameMetrics,
}

impl SequenceReport {
    /// Averages are taken over per-frame dB values.
    pub fn from_frames(frames: Vec<FrameMetrics>) -> Self {
        let n = frames.len().max(1) as f64;
        let mut avg = FrameMetrics {
            psnr: [0.0; 3],
            ws_psnr: [0.0; 3],
            ws_psnr_yuv: 0.0,
        };
        for f in &frames {
            for c in 0..3 {
                avg.psnr[c] += f.psnr[c] / n;
                avg.ws_psnr[c] += f.ws_psnr[c] / n;
            }
            avg.ws_psnr_yuv += f.ws_psnr_yuv / n;
        }
        Self { frames, average: avg }
    }

    /// Comma-separated table followed by a `#`-prefixed summary block.
    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "frame,psnr_y,psnr_u,psnr_v,wspsnr_y,wspsnr_u,wspsnr_v,wspsnr_yuv")?;
        for (i, f) in self.frames.iter().enumerate() {
            writeln!(out, "{i},{}", metric_fields(f))?;
        }
        writeln!(out, "# summary")?;
        writeln!(out, "# frames,{}", self.frames.len())?;
        writeln!(out, "average,{}", metric_fields(&self.average))
    }
}

fn metric_fields(f: &FrameMetrics) -> String {
    let vals = f.psnr.iter().chain(&f.ws_psnr).chain(std::iter::once(&f.ws_psnr_yuv));
    vals.map(|&v| crate::format::sig6(v)).collect::<Vec<_>>().join(",")
}

/// Metrics of the first `spec.frame_count` frames of two streams.
///
/// Frames are read in batches and scored in parallel; the report keeps
/// frame order.
pub fn sequence_metrics_from_readers(
    reference: impl Read,
    test: impl Read,
    spec: &VideoSpec,
) -> Result<SequenceReport, MetricsError> {
    let weights = FrameWeights::erp(spec.width, spec.height)?;
    let mut ref_reader = YuvReader::new(reference, *spec, "reference")?;
    let mut test_reader = YuvReader::new(test, *spec, "test")?;
    let batch = 2 * rayon::current_num_threads().max(1);
    let mut frames = Vec::with_capacity(spec.frame_count);
    let mut done = 0;
    while done < spec.frame_count {
        let n = batch.min(spec.frame_count - done);
        let mut pairs = Vec::with_capacity(n);
        for _ in 0..n {
            pairs.push((ref_reader.read_frame()?, test_reader.read_frame()?));
        }
        let scored = pairs
            .par_iter()
            .map(|(a, b)| frame_metrics(a, b, &weights))
            .collect::<Result<Vec<_>, _>>()?;
        frames.extend(scored);
        done += n;
    }
    Ok(SequenceReport::from_frames(frames))
}

pub fn sequence_metrics(
    reference: impl AsRef<Path>,
    test: impl AsRef<Path>,
    spec: &VideoSpec,
) -> Result<SequenceReport, MetricsError> {
    let a = BufReader::new(File::open(reference)?);
    let b = BufReader::new(File::open(test)?);
    sequence_metrics_from_readers(a, b, spec)
}
