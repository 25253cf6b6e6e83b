//! Modulation vector banks and interpolation between quality levels.
//!
//! A bank holds one channel-wise scaling vector per integer quality index.
//! For a real quality `q` between two knots the vector is the linear blend
//! of its floor and ceiling neighbours, which lets every latent row carry its
//! own latitude-dependent quality without rounding.
//!
//! # Container format
//!
//! ```text
//! "VBANKSET"            8 bytes magic
//! version               u16 LE (currently 1)
//! q_num                 u16 LE
//! 4 x bank record       encoder, decoder, reconstruction, feature
//!     channels          u32 LE
//!     values            q_num * channels f32 LE, q-major
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::qpa::QualityMap;
use crate::scalar::Scalar;

pub const CONTAINER_MAGIC: &[u8; 8] = b"VBANKSET";
pub const CONTAINER_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum BankError {
    #[error("bank needs q_num >= 2 and channels >= 1, got q_num={q_num}, channels={channels}")]
    Shape { q_num: usize, channels: usize },
    #[error("bank holds {actual} values, expected q_num*channels = {expected}")]
    ValueCount { expected: usize, actual: usize },
    #[error("non-finite value in {bank} bank at q={q}, channel {channel}")]
    NonFinite {
        bank: BankKind,
        q: usize,
        channel: usize,
    },
    #[error("quality {q} outside bank range [0, {max}]")]
    QualityOutOfRange { q: f64, max: usize },
    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<BankError>,
    },
    #[error("banks disagree on q_num: {bank} bank has {found}, expected {expected}")]
    QNumMismatch {
        bank: BankKind,
        expected: usize,
        found: usize,
    },
    #[error("not a vector bank container (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),
    #[error("container truncated: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("container has {0} trailing bytes after the last bank")]
    TrailingBytes(usize),
    #[error("{what} = {value} does not fit the container field")]
    FieldOverflow { what: &'static str, value: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The four modulation points of the codec, in container order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BankKind {
    Encoder,
    Decoder,
    Reconstruction,
    Feature,
}

impl BankKind {
    pub const ALL: [BankKind; 4] = [
        BankKind::Encoder,
        BankKind::Decoder,
        BankKind::Reconstruction,
        BankKind::Feature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BankKind::Encoder => "encoder",
            BankKind::Decoder => "decoder",
            BankKind::Reconstruction => "reconstruction",
            BankKind::Feature => "feature",
        }
    }
}

impl fmt::Display for BankKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BankKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BankKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown bank '{s}', expected encoder|decoder|reconstruction|feature"))
    }
}

/// `q_num` vectors of `channels` values each, stored q-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorBank<T> {
    q_num: usize,
    channels: usize,
    values: Vec<T>,
}

impl<T: Scalar> VectorBank<T> {
    pub fn new(q_num: usize, channels: usize, values: Vec<T>) -> Result<Self, BankError> {
        if q_num < 2 || channels == 0 {
            return Err(BankError::Shape { q_num, channels });
        }
        if values.len() != q_num * channels {
            return Err(BankError::ValueCount {
                expected: q_num * channels,
                actual: values.len(),
            });
        }
        let bank = Self {
            q_num,
            channels,
            values,
        };
        bank.check_finite(BankKind::Encoder)?;
        Ok(bank)
    }

    /// Builds a bank from a function of `(q, channel)`.
    pub fn from_fn(
        q_num: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self, BankError> {
        let values = (0..q_num)
            .flat_map(|q| (0..channels).map(move |c| (q, c)))
            .map(|(q, c)| f(q, c))
            .collect();
        Self::new(q_num, channels, values)
    }

    fn check_finite(&self, kind: BankKind) -> Result<(), BankError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(BankError::NonFinite {
                bank: kind,
                q: i / self.channels,
                channel: i % self.channels,
            }),
            None => Ok(()),
        }
    }

    pub fn q_num(&self) -> usize {
        self.q_num
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Stored vector for integer quality `q`.
    pub fn vector(&self, q: usize) -> &[T] {
        &self.values[q * self.channels..(q + 1) * self.channels]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Vector for a real quality parameter in `[0, q_num - 1]`.
    ///
    /// Non-integer `q` blends the floor vector with weight `ceil(q) - q` and
    /// the ceiling vector with weight `q - floor(q)`. Integer `q` returns the
    /// stored vector unchanged. Blend weights are computed in `f64`.
    pub fn interpolate(&self, q_tilde: f64) -> Result<Vec<T>, BankError> {
        let top = self.q_num - 1;
        if !(q_tilde >= 0.0 && q_tilde <= top as f64) {
            return Err(BankError::QualityOutOfRange { q: q_tilde, max: top });
        }
        let lo = q_tilde.floor();
        let hi = q_tilde.ceil();
        if lo == hi {
            return Ok(self.vector(lo as usize).to_vec());
        }
        let (w_lo, w_hi) = (hi - q_tilde, q_tilde - lo);
        let (v_lo, v_hi) = (self.vector(lo as usize), self.vector(hi as usize));
        Ok(v_lo
            .iter()
            .zip(v_hi)
            .map(|(&a, &b)| T::lit(w_lo * a.as_f64() + w_hi * b.as_f64()))
            .collect())
    }

    /// Vector of the nearest integer quality, i.e. modulation without interpolation.
    pub fn nearest(&self, q_tilde: f64) -> Result<Vec<T>, BankError> {
        self.interpolate(q_tilde.round())
    }

    /// Interpolated vector for every row of `map`.
    pub fn row_modulation_matrix<Q: Scalar>(
        &self,
        map: &QualityMap<Q>,
    ) -> Result<ModulationMatrix<T>, BankError> {
        let mut values = Vec::with_capacity(map.rows() * self.channels);
        for (row, q) in map.values().iter().enumerate() {
            let v = self.interpolate(q.as_f64()).map_err(|e| BankError::Row {
                row,
                source: Box::new(e),
            })?;
            values.extend(v);
        }
        Ok(ModulationMatrix {
            rows: map.rows(),
            channels: self.channels,
            values,
        })
    }

    /// Same bank converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> VectorBank<U> {
        VectorBank {
            q_num: self.q_num,
            channels: self.channels,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// `rows x channels` per-row modulation vectors, row-major.
///
/// A consumer multiplies row `r` channel-wise into every latent column of
/// latent row `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationMatrix<T> {
    rows: usize,
    channels: usize,
    values: Vec<T>,
}

impl<T: Scalar> ModulationMatrix<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.values[r * self.channels..(r + 1) * self.channels]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Encoder, decoder, reconstruction and feature-extractor banks.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorBankSet<T> {
    banks: [VectorBank<T>; 4],
}

impl<T: Scalar> VectorBankSet<T> {
    pub fn new(
        encoder: VectorBank<T>,
        decoder: VectorBank<T>,
        reconstruction: VectorBank<T>,
        feature: VectorBank<T>,
    ) -> Result<Self, BankError> {
        let banks = [encoder, decoder, reconstruction, feature];
        let expected = banks[0].q_num;
        for (kind, bank) in BankKind::ALL.into_iter().zip(&banks) {
            if bank.q_num != expected {
                return Err(BankError::QNumMismatch {
                    bank: kind,
                    expected,
                    found: bank.q_num,
                });
            }
        }
        Ok(Self { banks })
    }

    pub fn q_num(&self) -> usize {
        self.banks[0].q_num
    }

    pub fn bank(&self, kind: BankKind) -> &VectorBank<T> {
        &self.banks[kind as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (BankKind, &VectorBank<T>)> {
        BankKind::ALL.into_iter().zip(self.banks.iter())
    }
}

impl VectorBankSet<f32> {
    pub fn to_bytes(&self) -> Result<Vec<u8>, BankError> {
        let q_num = u16::try_from(self.q_num()).map_err(|_| BankError::FieldOverflow {
            what: "q_num",
            value: self.q_num(),
        })?;
        let payload: usize = self.banks.iter().map(|b| 4 + 4 * b.values.len()).sum();
        let mut out = Vec::with_capacity(12 + payload);
        out.extend_from_slice(CONTAINER_MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&q_num.to_le_bytes());
        for bank in &self.banks {
            let channels = u32::try_from(bank.channels).map_err(|_| BankError::FieldOverflow {
                what: "channels",
                value: bank.channels,
            })?;
            out.extend_from_slice(&channels.to_le_bytes());
            for v in &bank.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BankError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CONTAINER_MAGIC {
            return Err(BankError::BadMagic);
        }
        let version = r.u16()?;
        if version != CONTAINER_VERSION {
            return Err(BankError::UnsupportedVersion(version));
        }
        let q_num = r.u16()? as usize;
        let mut banks = Vec::with_capacity(4);
        for kind in BankKind::ALL {
            let channels = r.u32()? as usize;
            if q_num < 2 || channels == 0 {
                return Err(BankError::Shape { q_num, channels });
            }
            let count = q_num * channels;
            let raw = r.take(count.checked_mul(4).ok_or(BankError::Shape { q_num, channels })?)?;
            let values: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let bank = VectorBank {
                q_num,
                channels,
                values,
            };
            bank.check_finite(kind)?;
            banks.push(bank);
        }
        if r.pos != bytes.len() {
            return Err(BankError::TrailingBytes(bytes.len() - r.pos));
        }
        let [e, d, rc, f]: [VectorBank<f32>; 4] = banks.try_into().expect("four banks");
        Self::new(e, d, rc, f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BankError> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BankError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Reads a container file.
pub fn load_bank_set(path: impl AsRef<Path>) -> Result<VectorBankSet<f32>, BankError> {
    VectorBankSet::load(path)
}

/// Writes a container file.
pub fn save_bank_set(set: &VectorBankSet<f32>, path: impl AsRef<Path>) -> Result<(), BankError> {
    set.save(path)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], BankError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(BankError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, BankError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, BankError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qpa::QpaConfig;

    fn ramp(q_num: usize, channels: usize) -> VectorBank<f64> {
        VectorBank::from_fn(q_num, channels, |q, c| 0.1 * q as f64 + c as f64).unwrap()
    }

    fn small_set() -> VectorBankSet<f32> {
        let mk = |ch: usize, s: f32| {
            VectorBank::from_fn(4, ch, |q, c| s * (q as f32 + 1.0) - c as f32 * 0.25).unwrap()
        };
        VectorBankSet::new(mk(3, 1.0), mk(2, 0.5), mk(1, 2.0), mk(5, -1.5)).unwrap()
    }

    #[test]
    fn construction_checks() {
        assert!(matches!(VectorBank::<f64>::new(1, 2, vec![0.0; 2]), Err(BankError::Shape { .. })));
        assert!(matches!(VectorBank::<f64>::new(2, 0, vec![]), Err(BankError::Shape { .. })));
        assert!(matches!(
            VectorBank::<f64>::new(2, 2, vec![0.0; 3]),
            Err(BankError::ValueCount { expected: 4, actual: 3 })
        ));
        assert!(matches!(
            VectorBank::<f64>::new(2, 2, vec![0.0, 0.0, f64::INFINITY, 0.0]),
            Err(BankError::NonFinite { q: 1, channel: 0, .. })
        ));
    }

    #[test]
    fn interpolation_examples() {
        let bank = ramp(10, 3);
        assert_eq!(bank.interpolate(5.0).unwrap(), bank.vector(5));
        let mid = bank.interpolate(5.5).unwrap();
        let quarter = bank.interpolate(5.25).unwrap();
        for c in 0..3 {
            let (a, b) = (bank.vector(5)[c], bank.vector(6)[c]);
            assert!((mid[c] - (0.5 * a + 0.5 * b)).abs() < 1e-15);
            assert!((quarter[c] - (0.75 * a + 0.25 * b)).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolation_range() {
        let bank = ramp(4, 1);
        assert!(bank.interpolate(0.0).is_ok());
        assert!(bank.interpolate(3.0).is_ok());
        assert!(matches!(
            bank.interpolate(3.0001),
            Err(BankError::QualityOutOfRange { max: 3, .. })
        ));
        assert!(bank.interpolate(-1e-9).is_err());
        assert!(bank.interpolate(f64::NAN).is_err());
    }

    #[test]
    fn linear_bank_rows() {
        let bank = VectorBank::from_fn(8, 2, |q, c| (c + 1) as f64 * q as f64).unwrap();
        let cfg = QpaConfig::new(1.0, 768.0, 8, 3.5).unwrap();
        let map = QualityMap::constant(1, 3.5, cfg).unwrap();
        let m = bank.row_modulation_matrix(&map).unwrap();
        assert_eq!(m.row(0), &[3.5, 7.0]);
    }

    #[test]
    fn constant_integer_map_selects_knot() {
        let bank = ramp(64, 4);
        let cfg = QpaConfig::with_default_range(7.0).unwrap();
        let map = QualityMap::constant(5, 7.0, cfg).unwrap();
        let m = bank.row_modulation_matrix(&map).unwrap();
        assert!((0..5).all(|r| m.row(r) == bank.vector(7)));
    }

    #[test]
    fn row_error_names_the_row() {
        let bank = ramp(64, 1);
        let cfg = QpaConfig::with_default_range(63.0).unwrap();
        let map = crate::qpa::build_quality_map(4, &cfg, false).unwrap();
        match bank.row_modulation_matrix(&map) {
            Err(BankError::Row { row: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_precision_knots_and_blend() {
        let bank = VectorBank::<f32>::from_fn(3, 2, |q, c| 0.1 + q as f32 * 0.3 + c as f32).unwrap();
        assert_eq!(bank.interpolate(2.0).unwrap(), bank.vector(2));
        let v = bank.interpolate(0.5).unwrap();
        assert!((v[0] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn bank_set_requires_common_q_num() {
        let a = VectorBank::<f32>::from_fn(4, 2, |_, _| 1.0).unwrap();
        let b = VectorBank::<f32>::from_fn(5, 2, |_, _| 1.0).unwrap();
        assert!(matches!(
            VectorBankSet::new(a.clone(), a.clone(), b, a),
            Err(BankError::QNumMismatch {
                bank: BankKind::Reconstruction,
                expected: 4,
                found: 5
            })
        ));
    }

    #[test]
    fn container_layout() {
        let set = small_set();
        let bytes = set.to_bytes().unwrap();
        assert_eq!(&bytes[..8], b"VBANKSET");
        assert_eq!(&bytes[8..10], &[1, 0]);
        assert_eq!(&bytes[10..12], &[4, 0]);
        assert_eq!(&bytes[12..16], &[3, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 12 + 4 * 4 + 4 * 4 * (3 + 2 + 1 + 5));
        assert_eq!(VectorBankSet::from_bytes(&bytes).unwrap(), set);
    }

    #[test]
    fn container_errors() {
        let bytes = small_set().to_bytes().unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(VectorBankSet::from_bytes(&bad), Err(BankError::BadMagic)));

        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(
            VectorBankSet::from_bytes(&bad),
            Err(BankError::UnsupportedVersion(9))
        ));

        assert!(matches!(
            VectorBankSet::from_bytes(&bytes[..bytes.len() - 1]),
            Err(BankError::Truncated { .. })
        ));
        assert!(matches!(VectorBankSet::from_bytes(&bytes[..5]), Err(BankError::Truncated { .. })));

        let mut bad = bytes.clone();
        bad.push(0);
        assert!(matches!(VectorBankSet::from_bytes(&bad), Err(BankError::TrailingBytes(1))));

        let mut bad = bytes.clone();
        bad[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            VectorBankSet::from_bytes(&bad),
            Err(BankError::NonFinite {
                bank: BankKind::Encoder,
                q: 0,
                channel: 0
            })
        ));

        let mut bad = bytes.clone();
        bad[12..16].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(VectorBankSet::from_bytes(&bad), Err(BankError::Shape { .. })));
    }

    #[test]
    fn bank_kind_parse() {
        assert_eq!("feature".parse::<BankKind>().unwrap(), BankKind::Feature);
        assert!("latent".parse::<BankKind>().is_err());
    }
}
