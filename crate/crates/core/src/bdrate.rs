//! Bjøntegaard delta rate between two rate/quality curves.
//!
//! `log10(rate)` is interpolated as a function of quality and integrated
//! over the quality interval both curves cover; the mean log-rate gap is
//! reported as a percentage. The default interpolant is the monotone
//! piecewise cubic (PCHIP) used by current JVET tooling; the classic
//! least-squares cubic polynomial fit is available for cross-checking.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BdError {
    #[error("a curve needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("point {index} has non-positive or non-finite rate {rate}")]
    InvalidRate { index: usize, rate: f64 },
    #[error("point {index} has non-finite quality")]
    InvalidQuality { index: usize },
    #[error("points {0} and {1} share the same quality")]
    DuplicateQuality(Point, Point),
    #[error("curve is not strictly increasing in both rate and quality: {}", format_pairs(.0))]
    NonMonotonic(Vec<(Point, Point)>),
    #[error("quality ranges do not overlap")]
    EmptyOverlap,
    #[error("polynomial fit is singular")]
    SingularFit,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A point echoed back in diagnostics, as `(rate, quality)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point(pub f64, pub f64);

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

fn format_pairs(pairs: &[(Point, Point)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("{a} -> {b}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint<T> {
    pub rate: T,
    pub quality: T,
}

impl<T: Scalar> RdPoint<T> {
    pub fn new(rate: T, quality: T) -> Self {
        Self { rate, quality }
    }

    fn echo(&self) -> Point {
        Point(self.rate.as_f64(), self.quality.as_f64())
    }
}

/// Points sorted by rate, strictly increasing in rate and quality.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve<T> {
    points: Vec<RdPoint<T>>,
}

impl<T: Scalar> RdCurve<T> {
    pub fn new(points: Vec<RdPoint<T>>) -> Result<Self, BdError> {
        validate_curve(points)
    }

    pub fn from_pairs(pairs: &[(T, T)]) -> Result<Self, BdError> {
        validate_curve(pairs.iter().map(|&(r, q)| RdPoint::new(r, q)).collect())
    }

    pub fn points(&self) -> &[RdPoint<T>] {
        &self.points
    }

    fn qualities(&self) -> Vec<T> {
        self.points.iter().map(|p| p.quality).collect()
    }

    fn log_rates(&self) -> Vec<T> {
        self.points.iter().map(|p| p.rate.log10()).collect()
    }

    /// Parses two-column `rate, quality` text.
    ///
    /// Columns may be separated by commas, semicolons, tabs or spaces. Blank
    /// lines and `#` comments are skipped, as is a non-numeric first line.
    pub fn parse(text: &str) -> Result<Self, BdError> {
        let mut points = Vec::new();
        let mut seen_data = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
            match parsed {
                Some(v) if v.len() == 2 => {
                    points.push(RdPoint::new(T::lit(v[0]), T::lit(v[1])));
                    seen_data = true;
                }
                None if !seen_data && points.is_empty() => {}
                _ => {
                    return Err(BdError::Parse {
                        line: i + 1,
                        message: format!("expected two numeric columns, got '{line}'"),
                    })
                }
            }
        }
        validate_curve(points)
    }
}

/// Sorts by rate and checks the curve invariants.
pub fn validate_curve<T: Scalar>(mut points: Vec<RdPoint<T>>) -> Result<RdCurve<T>, BdError> {
    for (index, p) in points.iter().enumerate() {
        if !(p.rate.is_finite() && p.rate > T::zero()) {
            return Err(BdError::InvalidRate {
                index,
                rate: p.rate.as_f64(),
            });
        }
        if !p.quality.is_finite() {
            return Err(BdError::InvalidQuality { index });
        }
    }
    if points.len() < 4 {
        return Err(BdError::TooFewPoints(points.len()));
    }
    points.sort_by(|a, b| a.rate.partial_cmp(&b.rate).expect("finite"));

    let mut by_quality: Vec<&RdPoint<T>> = points.iter().collect();
    by_quality.sort_by(|a, b| a.quality.partial_cmp(&b.quality).expect("finite"));
    if let Some(w) = by_quality.windows(2).find(|w| w[0].quality == w[1].quality) {
        return Err(BdError::DuplicateQuality(w[0].echo(), w[1].echo()));
    }

    let bad: Vec<(Point, Point)> = points
        .windows(2)
        .filter(|w| !(w[1].rate > w[0].rate && w[1].quality > w[0].quality))
        .map(|w| (w[0].echo(), w[1].echo()))
        .collect();
    if !bad.is_empty() {
        return Err(BdError::NonMonotonic(bad));
    }
    Ok(RdCurve { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BdMethod {
    /// Monotone piecewise cubic Hermite interpolation.
    #[default]
    PiecewiseCubic,
    /// Least-squares cubic polynomial over all points.
    Polynomial,
}

impl FromStr for BdMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pchip" | "piecewise-cubic" => Ok(BdMethod::PiecewiseCubic),
            "poly" | "polynomial" => Ok(BdMethod::Polynomial),
            _ => Err(format!("unknown BD method '{s}', expected pchip|poly")),
        }
    }
}

/// Average rate difference of `test` against `reference` in percent.
/// Negative values mean `test` needs less rate for the same quality.
pub fn bd_rate<T: Scalar>(reference: &RdCurve<T>, test: &RdCurve<T>, method: BdMethod) -> Result<T, BdError> {
    let gap = mean_gap(
        (&reference.qualities(), &reference.log_rates()),
        (&test.qualities(), &test.log_rates()),
        method,
    )?;
    Ok((T::lit(10.0).powf(gap) - T::one()) * T::lit(100.0))
}

/// Average quality difference of `test` against `reference` in dB.
pub fn bd_psnr<T: Scalar>(reference: &RdCurve<T>, test: &RdCurve<T>, method: BdMethod) -> Result<T, BdError> {
    mean_gap(
        (&reference.log_rates(), &reference.qualities()),
        (&test.log_rates(), &test.qualities()),
        method,
    )
}

/// Mean of `f_test - f_ref` over the shared abscissa range.
fn mean_gap<T: Scalar>(reference: (&[T], &[T]), test: (&[T], &[T]), method: BdMethod) -> Result<T, BdError> {
    let lo = reference.0[0].max(test.0[0]);
    let hi = reference.0[reference.0.len() - 1].min(test.0[test.0.len() - 1]);
    if !(hi > lo) {
        return Err(BdError::EmptyOverlap);
    }
    let integrate = |x: &[T], y: &[T]| -> Result<T, BdError> {
        match method {
            BdMethod::PiecewiseCubic => Ok(Pchip::new(x, y).integral(lo, hi)),
            BdMethod::Polynomial => Ok(CubicFit::new(x, y)?.integral(lo, hi)),
        }
    };
    let a = integrate(reference.0, reference.1)?;
    let b = integrate(test.0, test.1)?;
    Ok((b - a) / (hi - lo))
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson
/// slopes with the three-point end condition).
#[derive(Debug, Clone)]
pub struct Pchip<T> {
    x: Vec<T>,
    y: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Scalar> Pchip<T> {
    /// `x` must be strictly increasing with at least two knots.
    pub fn new(x: &[T], y: &[T]) -> Self {
        assert!(x.len() == y.len() && x.len() >= 2, "pchip needs matching knots");
        let n = x.len();
        let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<T> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut m = vec![T::zero(); n];
        if n == 2 {
            m[0] = d[0];
            m[1] = d[0];
        } else {
            let two = T::lit(2.0);
            for k in 1..n - 1 {
                let (d0, d1) = (d[k - 1], d[k]);
                if sign(d0) == 0 || sign(d0) != sign(d1) {
                    continue;
                }
                let w1 = two * h[k] + h[k - 1];
                let w2 = h[k] + two * h[k - 1];
                m[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
            }
            m[0] = edge_slope(h[0], h[1], d[0], d[1]);
            m[n - 1] = edge_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            slopes: m,
        }
    }

    pub fn eval(&self, t: T) -> T {
        let k = self.segment(t);
        let c = self.coefficients(k);
        let s = t - self.x[k];
        ((c[3] * s + c[2]) * s + c[1]) * s + c[0]
    }

    /// Exact integral of the interpolant over `[a, b]` inside the knot range.
    pub fn integral(&self, a: T, b: T) -> T {
        let mut total = T::zero();
        for k in 0..self.x.len() - 1 {
            let lo = a.max(self.x[k]);
            let hi = b.min(self.x[k + 1]);
            if hi <= lo {
                continue;
            }
            let c = self.coefficients(k);
            let anti = |s: T| {
                let (two, three, four) = (T::lit(2.0), T::lit(3.0), T::lit(4.0));
                s * (c[0] + s * (c[1] / two + s * (c[2] / three + s * c[3] / four)))
            };
            total = total + anti(hi - self.x[k]) - anti(lo - self.x[k]);
        }
        total
    }

    fn segment(&self, t: T) -> usize {
        let last = self.x.len() - 2;
        (0..=last).find(|&k| t <= self.x[k + 1]).unwrap_or(last)
    }

    /// Power-basis coefficients of segment `k` in `s = t - x[k]`.
    fn coefficients(&self, k: usize) -> [T; 4] {
        let h = self.x[k + 1] - self.x[k];
        let delta = (self.y[k + 1] - self.y[k]) / h;
        let (m0, m1) = (self.slopes[k], self.slopes[k + 1]);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        [
            self.y[k],
            m0,
            (three * delta - two * m0 - m1) / h,
            (m0 + m1 - two * delta) / (h * h),
        ]
    }
}

fn edge_slope<T: Scalar>(h0: T, h1: T, d0: T, d1: T) -> T {
    let two = T::lit(2.0);
    let m = ((two * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if sign(m) != sign(d0) {
        T::zero()
    } else if sign(d0) != sign(d1) && m.abs() > T::lit(3.0) * d0.abs() {
        T::lit(3.0) * d0
    } else {
        m
    }
}

fn sign<T: Scalar>(v: T) -> i8 {
    if v > T::zero() {
        1
    } else if v < T::zero() {
        -1
    } else {
        0
    }
}

/// Least-squares cubic in a centred, scaled abscissa.
#[derive(Debug, Clone)]
struct CubicFit<T> {
    center: T,
    scale: T,
    coef: [T; 4],
}

impl<T: Scalar> CubicFit<T> {
    fn new(x: &[T], y: &[T]) -> Result<Self, BdError> {
        let n = T::from_count(x.len());
        let center = x.iter().fold(T::zero(), |a, &v| a + v) / n;
        let scale = x
            .iter()
            .fold(T::zero(), |a, &v| a.max((v - center).abs()))
            .max(T::min_positive_value());
        // normal equations A^T A c = A^T y with A = [1, u, u^2, u^3]
        let mut ata = [[T::zero(); 4]; 4];
        let mut aty = [T::zero(); 4];
        for (&xi, &yi) in x.iter().zip(y) {
            let u = (xi - center) / scale;
            let pw = [T::one(), u, u * u, u * u * u];
            for r in 0..4 {
                aty[r] = aty[r] + pw[r] * yi;
                for c in 0..4 {
                    ata[r][c] = ata[r][c] + pw[r] * pw[c];
                }
            }
        }
        let coef = solve4(ata, aty).ok_or(BdError::SingularFit)?;
        Ok(Self { center, scale, coef })
    }

    fn integral(&self, a: T, b: T) -> T {
        let anti = |t: T| {
            let u = (t - self.center) / self.scale;
            let c = &self.coef;
            let (two, three, four) = (T::lit(2.0), T::lit(3.0), T::lit(4.0));
            self.scale * u * (c[0] + u * (c[1] / two + u * (c[2] / three + u * c[3] / four)))
        };
        anti(b) - anti(a)
    }
}

fn solve4<T: Scalar>(mut a: [[T; 4]; 4], mut b: [T; 4]) -> Option<[T; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))?;
        if a[pivot][col].abs() <= T::epsilon() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = [T::zero(); 4];
    for row in (0..4).rev() {
        let mut s = b[row];
        for k in row + 1..4 {
            s = s - a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(pairs: &[(f64, f64)]) -> RdCurve<f64> {
        RdCurve::from_pairs(pairs).unwrap()
    }

    fn reference() -> RdCurve<f64> {
        curve(&[(100.0, 30.0), (200.0, 33.0), (400.0, 36.0), (800.0, 39.0)])
    }

    #[test]
    fn identity_is_zero() {
        for m in [BdMethod::PiecewiseCubic, BdMethod::Polynomial] {
            assert!(bd_rate(&reference(), &reference(), m).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn constant_rate_factor() {
        let r = reference();
        let inflated = curve(&r.points().iter().map(|p| (p.rate * 1.1, p.quality)).collect::<Vec<_>>());
        let saved = curve(&[(90.0, 30.0), (180.0, 33.0), (360.0, 36.0), (720.0, 39.0)]);
        for m in [BdMethod::PiecewiseCubic, BdMethod::Polynomial] {
            assert!((bd_rate(&r, &inflated, m).unwrap() - 10.0).abs() < 1e-6);
            assert!((bd_rate(&r, &saved, m).unwrap() + 10.0).abs() < 1e-6);
        }
    }

    #[test]
    fn validation_sorts_and_rejects() {
        let c = curve(&[(400.0, 36.0), (100.0, 30.0), (800.0, 39.0), (200.0, 33.0)]);
        assert_eq!(c.points()[0].rate, 100.0);
        assert_eq!(c.points()[3].rate, 800.0);

        assert_eq!(
            RdCurve::<f64>::from_pairs(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]),
            Err(BdError::TooFewPoints(3))
        );
        assert_eq!(
            RdCurve::<f64>::from_pairs(&[(1.0, 1.0), (2.0, 2.0), (3.0, 2.0), (4.0, 4.0)]),
            Err(BdError::DuplicateQuality(Point(2.0, 2.0), Point(3.0, 2.0)))
        );
        match RdCurve::<f64>::from_pairs(&[(1.0, 1.0), (2.0, 3.0), (3.0, 2.0), (4.0, 4.0)]) {
            Err(BdError::NonMonotonic(pairs)) => {
                assert_eq!(pairs, vec![(Point(2.0, 3.0), Point(3.0, 2.0))])
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            RdCurve::<f64>::from_pairs(&[(0.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)]),
            Err(BdError::InvalidRate { index: 0, .. })
        ));
    }

    #[test]
    fn disjoint_quality_ranges() {
        let hi = curve(&[(100.0, 50.0), (200.0, 53.0), (400.0, 56.0), (800.0, 59.0)]);
        assert_eq!(
            bd_rate(&reference(), &hi, BdMethod::PiecewiseCubic),
            Err(BdError::EmptyOverlap)
        );
    }

    #[test]
    fn pchip_reproduces_knots_and_monotone_data() {
        let x: [f64; 5] = [0.0, 1.0, 2.5, 3.0, 5.0];
        let y: [f64; 5] = [0.0, 0.2, 2.0, 2.1, 6.0];
        let p = Pchip::new(&x, &y);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.eval(*xi) - yi).abs() < 1e-12);
        }
        let mut prev = p.eval(0.0);
        for i in 1..=500 {
            let v = p.eval(5.0 * i as f64 / 500.0);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn pchip_integral_matches_dense_midpoint_sum() {
        let x = [30.0, 33.5, 36.0, 39.2];
        let y = [2.0, 2.31, 2.6, 2.95];
        let p = Pchip::new(&x, &y);
        let (a, b) = (31.0, 38.0);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let sum: f64 = (0..n).map(|i| p.eval(a + (i as f64 + 0.5) * h)).sum::<f64>() * h;
        assert!((p.integral(a, b) - sum).abs() < 1e-9);
    }

    #[test]
    fn parse_curve_text() {
        let text = "rate,quality\n# comment\n100, 30\n200\t33\n400;36\n\n800 39\n";
        assert_eq!(RdCurve::<f64>::parse(text).unwrap(), reference());
        assert!(matches!(
            RdCurve::<f64>::parse("100,30\n200,x\n"),
            Err(BdError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn bd_psnr_of_quality_shift() {
        let r = reference();
        let up = curve(&r.points().iter().map(|p| (p.rate, p.quality + 0.5)).collect::<Vec<_>>());
        assert!((bd_psnr(&r, &up, BdMethod::PiecewiseCubic).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn method_names() {
        assert_eq!("pchip".parse::<BdMethod>().unwrap(), BdMethod::PiecewiseCubic);
        assert_eq!("poly".parse::<BdMethod>().unwrap(), BdMethod::Polynomial);
        assert!("akima".parse::<BdMethod>().is_err());
    }
}
