//! Equirectangular (ERP) row geometry.
//!
//! Rows are sampled at their centers: row `r` of an `n`-row plane sits at
//! latitude `(n/2 - r - 0.5) * pi / n`, so the top row is the most northern
//! and no sample ever lands on a pole. Spherical weights are `cos(latitude)`
//! and are constant along a row.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("row index {row} out of range for {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("grid dimensions must be positive, got {rows}x{cols}")]
    EmptyGrid { rows: usize, cols: usize },
    #[error("latitude {latitude} rad is at or beyond a pole")]
    PoleSingularity { latitude: f64 },
    #[error("4:2:0 chroma needs even luma dimensions, got {cols}x{rows}")]
    OddLumaDimensions { rows: usize, cols: usize },
    #[error("weight grid has {actual} entries, expected {expected}")]
    WeightCount { expected: usize, actual: usize },
    #[error("weights must be finite and nonnegative")]
    InvalidWeight,
}

/// Fails with [`GeometryError::PoleSingularity`] when `|latitude| >= pi/2`.
pub fn check_latitude<T: Scalar>(latitude: T) -> Result<(), GeometryError> {
    if latitude.is_nan() || latitude.abs() >= T::FRAC_PI_2() {
        return Err(GeometryError::PoleSingularity {
            latitude: latitude.as_f64(),
        });
    }
    Ok(())
}

/// Latitude in radians of the center of row `row` in a plane of `rows` rows.
pub fn row_to_latitude<T: Scalar>(row: usize, rows: usize) -> Result<T, GeometryError> {
    if row >= rows {
        return Err(GeometryError::RowOutOfRange { row, rows });
    }
    let n = T::from_count(rows);
    let half = n / T::lit(2.0);
    // offset is exact in binary for realistic row counts, which keeps the
    // top/bottom halves exact negatives of each other
    let offset = half - T::from_count(row) - T::lit(0.5);
    Ok(offset * (T::PI() / n))
}

/// Horizontal stretch of an ERP area element relative to the equator, `1/cos(latitude)`.
pub fn area_stretch<T: Scalar>(latitude: T) -> Result<T, GeometryError> {
    check_latitude(latitude)?;
    Ok(latitude.cos().recip())
}

/// Per-row latitudes and spherical weights of an ERP plane.
#[derive(Debug, Clone, PartialEq)]
pub struct LatitudeGrid<T> {
    latitudes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> LatitudeGrid<T> {
    pub fn new(rows: usize) -> Result<Self, GeometryError> {
        if rows == 0 {
            return Err(GeometryError::EmptyGrid { rows, cols: 1 });
        }
        let latitudes = (0..rows)
            .map(|r| row_to_latitude::<T>(r, rows))
            .collect::<Result<Vec<_>, _>>()?;
        let weights = latitudes.iter().map(|phi| phi.cos()).collect();
        Ok(Self { latitudes, weights })
    }

    pub fn rows(&self) -> usize {
        self.latitudes.len()
    }

    /// Latitudes from top (north) to bottom (south).
    pub fn latitudes(&self) -> &[T] {
        &self.latitudes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn mean_weight(&self) -> T {
        let sum = self.weights.iter().fold(T::zero(), |acc, &w| acc + w);
        sum / T::from_count(self.rows())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layout<T> {
    PerRow(Vec<T>),
    PerPixel(Vec<T>),
}

/// Per-pixel weights for a plane.
///
/// ERP grids store one weight per row; arbitrary per-pixel grids are also
/// supported for synthetic checks.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGrid<T> {
    rows: usize,
    cols: usize,
    layout: Layout<T>,
}

impl<T: Scalar> WeightGrid<T> {
    /// Grid whose weight depends only on the row.
    pub fn from_rows(row_weights: Vec<T>, cols: usize) -> Result<Self, GeometryError> {
        let rows = row_weights.len();
        if rows == 0 || cols == 0 {
            return Err(GeometryError::EmptyGrid { rows, cols });
        }
        validate_weights(&row_weights)?;
        Ok(Self {
            rows,
            cols,
            layout: Layout::PerRow(row_weights),
        })
    }

    /// Grid with an explicit weight per pixel, row-major.
    pub fn from_pixels(rows: usize, cols: usize, weights: Vec<T>) -> Result<Self, GeometryError> {
        if rows == 0 || cols == 0 {
            return Err(GeometryError::EmptyGrid { rows, cols });
        }
        if weights.len() != rows * cols {
            return Err(GeometryError::WeightCount {
                expected: rows * cols,
                actual: weights.len(),
            });
        }
        validate_weights(&weights)?;
        Ok(Self {
            rows,
            cols,
            layout: Layout::PerPixel(weights),
        })
    }

    /// Every pixel weighted 1.
    pub fn uniform(rows: usize, cols: usize) -> Result<Self, GeometryError> {
        Self::from_rows(vec![T::one(); rows], cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        assert!(row < self.rows && col < self.cols, "weight index out of range");
        match &self.layout {
            Layout::PerRow(w) => w[row],
            Layout::PerPixel(w) => w[row * self.cols + col],
        }
    }

    /// Weights of one row, `cols` long.
    pub fn row(&self, row: usize) -> RowWeights<'_, T> {
        match &self.layout {
            Layout::PerRow(w) => RowWeights::Constant(w[row]),
            Layout::PerPixel(w) => RowWeights::Varying(&w[row * self.cols..(row + 1) * self.cols]),
        }
    }

    pub fn is_column_invariant(&self) -> bool {
        match &self.layout {
            Layout::PerRow(_) => true,
            Layout::PerPixel(w) => w
                .chunks_exact(self.cols)
                .all(|row| row.iter().all(|&x| x == row[0])),
        }
    }

    pub fn sum(&self) -> T {
        match &self.layout {
            Layout::PerRow(w) => w.iter().fold(T::zero(), |a, &x| a + x) * T::from_count(self.cols),
            Layout::PerPixel(w) => w.iter().fold(T::zero(), |a, &x| a + x),
        }
    }
}

/// Borrowed view of one row of a [`WeightGrid`].
#[derive(Debug, Clone, Copy)]
pub enum RowWeights<'a, T> {
    Constant(T),
    Varying(&'a [T]),
}

fn validate_weights<T: Scalar>(weights: &[T]) -> Result<(), GeometryError> {
    if weights.iter().all(|w| w.is_finite() && *w >= T::zero()) {
        Ok(())
    } else {
        Err(GeometryError::InvalidWeight)
    }
}

/// Spherical weight grid of a `rows` x `cols` ERP plane.
pub fn sphere_weight_map<T: Scalar>(rows: usize, cols: usize) -> Result<WeightGrid<T>, GeometryError> {
    if rows == 0 || cols == 0 {
        return Err(GeometryError::EmptyGrid { rows, cols });
    }
    let grid = LatitudeGrid::<T>::new(rows)?;
    WeightGrid::from_rows(grid.weights, cols)
}

/// Spherical weights for a 4:2:0 chroma plane of a `luma_rows` x `luma_cols` frame.
///
/// The half-height chroma plane is treated as its own ERP grid rather than a
/// subsampling of the luma weights.
pub fn chroma_weight_map<T: Scalar>(
    luma_rows: usize,
    luma_cols: usize,
) -> Result<WeightGrid<T>, GeometryError> {
    if luma_rows == 0 || luma_cols == 0 {
        return Err(GeometryError::EmptyGrid {
            rows: luma_rows,
            cols: luma_cols,
        });
    }
    if luma_rows % 2 != 0 || luma_cols % 2 != 0 {
        return Err(GeometryError::OddLumaDimensions {
            rows: luma_rows,
            cols: luma_cols,
        });
    }
    sphere_weight_map(luma_rows / 2, luma_cols / 2)
}
