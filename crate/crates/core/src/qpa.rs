//! Quality parameter / Lagrange multiplier relation and latitude-adaptive
//! quality parameters.
//!
//! The codec ties an (integer, here extended to real) quality parameter `q`
//! to a Lagrange multiplier log-linearly over `[lambda_min, lambda_max]`.
//! Equalising spherical distortion under an exponential R-D model scales the
//! multiplier by `cos(latitude)`, which in the `q` domain is an additive
//! offset `delta_q`. The offset is re-centred by its latitude mean so the map
//! averages to the base parameter `q0`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{check_latitude, row_to_latitude, GeometryError};
use crate::scalar::Scalar;

pub const DEFAULT_LAMBDA_MIN: f64 = 1.0;
pub const DEFAULT_LAMBDA_MAX: f64 = 768.0;
pub const DEFAULT_Q_NUM: u32 = 64;

/// Per-frame quality offsets of the low-delay GOP used with the default model.
pub const DEFAULT_GOP_OFFSETS: [f64; 8] = [0.0, 8.0, 0.0, 4.0, 0.0, 4.0, 0.0, 4.0];

#[derive(Debug, Error)]
pub enum QpaError {
    #[error("invalid lambda range: need lambda_max > lambda_min > 0, got [{min}, {max}]")]
    LambdaRange { min: f64, max: f64 },
    #[error("q_num must be at least 2, got {0}")]
    QNum(u32),
    #[error("base quality q0 = {q0} outside [0, {max}]")]
    BaseQuality { q0: f64, max: f64 },
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("quality map must have at least one row")]
    EmptyMap,
    #[error("quality map declares {rows} rows but holds {values} values")]
    RowCount { rows: usize, values: usize },
    #[error("quality map value at row {row} is not finite")]
    NonFinite { row: usize },
    #[error("GOP schedule must not be empty")]
    EmptySchedule,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("quality map document: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("quality map document: {0}")]
    Format(#[from] toml::ser::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lambda range and quality-parameter constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpaConfig<T> {
    lambda_min: T,
    lambda_max: T,
    q_num: u32,
    q0: T,
}

impl<T: Scalar> QpaConfig<T> {
    pub fn new(lambda_min: T, lambda_max: T, q_num: u32, q0: T) -> Result<Self, QpaError> {
        let cfg = Self {
            lambda_min,
            lambda_max,
            q_num,
            q0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `lambda in [1, 768]`, 64 quality levels, base parameter `q0`.
    pub fn with_default_range(q0: T) -> Result<Self, QpaError> {
        Self::new(
            T::lit(DEFAULT_LAMBDA_MIN),
            T::lit(DEFAULT_LAMBDA_MAX),
            DEFAULT_Q_NUM,
            q0,
        )
    }

    pub fn validate(&self) -> Result<(), QpaError> {
        let (min, max) = (self.lambda_min, self.lambda_max);
        if !(min > T::zero() && max > min && max.is_finite()) {
            return Err(QpaError::LambdaRange {
                min: min.as_f64(),
                max: max.as_f64(),
            });
        }
        if self.q_num < 2 {
            return Err(QpaError::QNum(self.q_num));
        }
        if !(self.q0 >= T::zero() && self.q0 <= self.q_max()) {
            return Err(QpaError::BaseQuality {
                q0: self.q0.as_f64(),
                max: self.q_max().as_f64(),
            });
        }
        Ok(())
    }

    pub fn lambda_min(&self) -> T {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> T {
        self.lambda_max
    }

    pub fn q_num(&self) -> u32 {
        self.q_num
    }

    pub fn q0(&self) -> T {
        self.q0
    }

    /// Same range with a different base quality.
    pub fn with_q0(&self, q0: T) -> Result<Self, QpaError> {
        Self::new(self.lambda_min, self.lambda_max, self.q_num, q0)
    }

    /// Highest quality index, `q_num - 1`.
    pub fn q_max(&self) -> T {
        T::from_u32(self.q_num - 1).expect("q_num representable")
    }

    fn log_range(&self) -> T {
        self.lambda_max.ln() - self.lambda_min.ln()
    }
}

/// Multiplier for a (real-valued) quality parameter.
pub fn lambda_from_q<T: Scalar>(q: T, config: &QpaConfig<T>) -> T {
    let step = config.log_range() / config.q_max();
    (config.lambda_min.ln() + q * step).exp()
}

/// Inverse of [`lambda_from_q`].
pub fn q_from_lambda<T: Scalar>(lambda: T, config: &QpaConfig<T>) -> Result<T, QpaError> {
    if !(lambda > T::zero()) {
        return Err(QpaError::NonPositiveLambda(lambda.as_f64()));
    }
    Ok(config.q_max() * (lambda.ln() - config.lambda_min.ln()) / config.log_range())
}

/// Multiplier that keeps spherical distortion uniform at `latitude`.
pub fn lambda_at_latitude<T: Scalar>(lambda0: T, latitude: T) -> Result<T, QpaError> {
    check_latitude(latitude)?;
    Ok(lambda0 * latitude.cos())
}

/// Quality offset at `latitude` relative to the equator; never positive.
pub fn delta_q<T: Scalar>(latitude: T, config: &QpaConfig<T>) -> Result<T, QpaError> {
    check_latitude(latitude)?;
    Ok(config.q_max() * latitude.cos().ln() / config.log_range())
}

/// Mean of [`delta_q`] over latitude uniformly distributed on `[-pi/2, pi/2]`.
///
/// Closed form from `integral of ln(cos) over [-pi/2, pi/2] = -pi ln 2`.
pub fn mean_delta_q<T: Scalar>(config: &QpaConfig<T>) -> T {
    -(config.q_max() * T::LN_2()) / config.log_range()
}

/// Mean-corrected adaptive quality parameter at `latitude`.
pub fn adapted_q<T: Scalar>(latitude: T, config: &QpaConfig<T>) -> Result<T, QpaError> {
    Ok(config.q0 + delta_q(latitude, config)? - mean_delta_q(config))
}

/// Per-row adapted quality parameters of an ERP plane or latent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityMap<T> {
    rows: usize,
    clamp: bool,
    q_tilde: Vec<T>,
    config: QpaConfig<T>,
}

impl<T: Scalar> QualityMap<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn values(&self) -> &[T] {
        &self.q_tilde
    }

    pub fn config(&self) -> &QpaConfig<T> {
        &self.config
    }

    pub fn is_clamped(&self) -> bool {
        self.clamp
    }

    /// Map with the same value on every row, as used by a non-adaptive encoder.
    pub fn constant(rows: usize, q: T, config: QpaConfig<T>) -> Result<Self, QpaError> {
        let map = Self {
            rows,
            clamp: false,
            q_tilde: vec![q; rows],
            config,
        };
        map.validate()?;
        Ok(map)
    }

    /// Copy with every entry rounded to the nearest integer quality index.
    pub fn rounded(&self) -> Self {
        Self {
            q_tilde: self.q_tilde.iter().map(|q| q.round()).collect(),
            ..self.clone()
        }
    }

    pub fn min(&self) -> T {
        self.q_tilde.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.q_tilde.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn mean(&self) -> T {
        let sum = self.q_tilde.iter().fold(T::zero(), |a, &q| a + q);
        sum / T::from_count(self.rows)
    }

    fn validate(&self) -> Result<(), QpaError> {
        self.config.validate()?;
        if self.rows == 0 {
            return Err(QpaError::EmptyMap);
        }
        if self.q_tilde.len() != self.rows {
            return Err(QpaError::RowCount {
                rows: self.rows,
                values: self.q_tilde.len(),
            });
        }
        if let Some(row) = self.q_tilde.iter().position(|q| !q.is_finite()) {
            return Err(QpaError::NonFinite { row });
        }
        Ok(())
    }
}

impl<T> QualityMap<T>
where
    T: Scalar + Serialize + for<'de> Deserialize<'de>,
{
    /// Key/value text document with every value at round-trip precision.
    pub fn to_document(&self) -> Result<String, QpaError> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_document(text: &str) -> Result<Self, QpaError> {
        let map: Self = toml::from_str(text)?;
        map.validate()?;
        Ok(map)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), QpaError> {
        std::fs::write(path, self.to_document()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, QpaError> {
        Self::from_document(&std::fs::read_to_string(path)?)
    }
}

/// Adapted quality parameter for every row of a `rows`-row plane.
///
/// With `clamp` set, values are clipped to `[0, q_num - 1]`, the range on
/// which modulation vectors exist.
pub fn build_quality_map<T: Scalar>(
    rows: usize,
    config: &QpaConfig<T>,
    clamp: bool,
) -> Result<QualityMap<T>, QpaError> {
    config.validate()?;
    if rows == 0 {
        return Err(QpaError::EmptyMap);
    }
    let q_tilde = (0..rows)
        .map(|r| {
            let q = adapted_q(row_to_latitude(r, rows)?, config)?;
            Ok(if clamp {
                q.max(T::zero()).min(config.q_max())
            } else {
                q
            })
        })
        .collect::<Result<Vec<T>, QpaError>>()?;
    Ok(QualityMap {
        rows,
        clamp,
        q_tilde,
        config: *config,
    })
}

/// Cyclic per-frame quality offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct GopSchedule<T> {
    offsets: Vec<T>,
}

impl<T: Scalar> GopSchedule<T> {
    pub fn new(offsets: Vec<T>) -> Result<Self, QpaError> {
        if offsets.is_empty() {
            return Err(QpaError::EmptySchedule);
        }
        Ok(Self { offsets })
    }

    pub fn offsets(&self) -> &[T] {
        &self.offsets
    }

    pub fn offset(&self, frame_index: usize) -> T {
        self.offsets[frame_index % self.offsets.len()]
    }
}

impl<T: Scalar> Default for GopSchedule<T> {
    fn default() -> Self {
        Self {
            offsets: DEFAULT_GOP_OFFSETS.iter().map(|&o| T::lit(o)).collect(),
        }
    }
}

/// Base quality for frame `frame_index`: `q0` plus the cyclic offset,
/// clipped to `[0, q_num - 1]`.
pub fn gop_offset_schedule<T: Scalar>(
    frame_index: usize,
    schedule: &GopSchedule<T>,
    q0: T,
    q_num: u32,
) -> T {
    let q_max = T::from_u32(q_num.saturating_sub(1)).expect("q_num representable");
    (q0 + schedule.offset(frame_index)).max(T::zero()).min(q_max)
}
