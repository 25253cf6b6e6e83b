//! Latitude-banded rate allocation under the exponential R-D model
//! `D = C exp(-K R)`.
//!
//! Every band stands for one ERP row: all bands hold the same number of
//! plane pixels, so total rate is a plain sum, while distortion is scored on
//! the sphere with `cos(latitude)` weights. At the optimum `lambda = 1/(K D)`,
//! so scaling the multiplier by `cos(latitude)` makes `D cos(latitude)` equal
//! in every band. [`brute_force_optimal_allocation`] checks that claim with a
//! greedy search that knows nothing about multipliers.

use std::io::{self, Write};

use thiserror::Error;

use crate::bdrate::{bd_rate, BdError, BdMethod, RdCurve, RdPoint};
use crate::format::sig6;
use crate::geometry::{check_latitude, GeometryError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("model parameters must be positive and finite, got C={c}, K={k}")]
    Model { c: f64, k: f64 },
    #[error("rate must be nonnegative, got {0}")]
    NegativeRate(f64),
    #[error("multiplier must be positive, got {0}")]
    Lambda(f64),
    #[error("at least one band is required")]
    NoBands,
    #[error(transparent)]
    Pole(#[from] GeometryError),
    #[error("band {band} (latitude {latitude} rad) would need negative rate {rate}; multiplier too small for this model")]
    Infeasible { band: usize, latitude: f64, rate: f64 },
    #[error("total rate {0} is not attainable")]
    InfeasibleTotal(f64),
    #[error("grid needs at least 1000 steps per band, got {0}")]
    Grid(usize),
    #[error("multiplier sweep needs >= 4 distinct positive values spanning a decade")]
    Sweep,
    #[error("bisection on the uniform multiplier did not converge")]
    Bisection,
    #[error(transparent)]
    Bd(#[from] BdError),
}

/// Exponential rate-distortion model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdModel<T> {
    c: T,
    k: T,
}

impl<T: Scalar> RdModel<T> {
    pub fn new(c: T, k: T) -> Result<Self, SimError> {
        if !(c > T::zero() && k > T::zero() && c.is_finite() && k.is_finite()) {
            return Err(SimError::Model {
                c: c.as_f64(),
                k: k.as_f64(),
            });
        }
        Ok(Self { c, k })
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn k(&self) -> T {
        self.k
    }

    /// Rate that reaches distortion `d`; negative when `d > C`.
    pub fn rate_for_distortion(&self, d: T) -> T {
        (self.c / d).ln() / self.k
    }

    /// Distortion at which the optimal multiplier equals `lambda`.
    pub fn distortion_for_lambda(&self, lambda: T) -> T {
        (self.k * lambda).recip()
    }
}

pub fn distortion_at_rate<T: Scalar>(model: &RdModel<T>, rate: T) -> Result<T, SimError> {
    if !(rate >= T::zero()) {
        return Err(SimError::NegativeRate(rate.as_f64()));
    }
    Ok(model.c * (-model.k * rate).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band<T> {
    pub latitude: T,
    pub rate: T,
    pub distortion: T,
}

/// Rate and distortion chosen for each band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandAllocation<T> {
    pub bands: Vec<Band<T>>,
    pub model: RdModel<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereScore<T> {
    pub total_rate: T,
    pub weighted_distortion: T,
}

fn check_bands<T: Scalar>(latitudes: &[T]) -> Result<(), SimError> {
    if latitudes.is_empty() {
        return Err(SimError::NoBands);
    }
    for &phi in latitudes {
        check_latitude(phi)?;
    }
    Ok(())
}

fn allocation_from_distortions<T: Scalar>(
    model: &RdModel<T>,
    latitudes: &[T],
    distortion: impl Fn(T) -> T,
) -> Result<BandAllocation<T>, SimError> {
    let bands = latitudes
        .iter()
        .enumerate()
        .map(|(band, &latitude)| {
            let d = distortion(latitude);
            let rate = model.rate_for_distortion(d);
            if rate < T::zero() {
                return Err(SimError::Infeasible {
                    band,
                    latitude: latitude.as_f64(),
                    rate: rate.as_f64(),
                });
            }
            Ok(Band {
                latitude,
                rate,
                distortion: d,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(BandAllocation { bands, model: *model })
}

/// Allocation with multiplier `lambda0 cos(latitude)` in each band.
pub fn adapted_allocation<T: Scalar>(
    model: &RdModel<T>,
    lambda0: T,
    latitudes: &[T],
) -> Result<BandAllocation<T>, SimError> {
    if !(lambda0 > T::zero()) {
        return Err(SimError::Lambda(lambda0.as_f64()));
    }
    check_bands(latitudes)?;
    allocation_from_distortions(model, latitudes, |phi| {
        model.distortion_for_lambda(lambda0 * phi.cos())
    })
}

/// Allocation with the same multiplier in every band.
pub fn uniform_allocation<T: Scalar>(
    model: &RdModel<T>,
    lambda: T,
    latitudes: &[T],
) -> Result<BandAllocation<T>, SimError> {
    if !(lambda > T::zero()) {
        return Err(SimError::Lambda(lambda.as_f64()));
    }
    check_bands(latitudes)?;
    let d = model.distortion_for_lambda(lambda);
    allocation_from_distortions(model, latitudes, |_| d)
}

/// Equator multiplier whose adapted allocation spends exactly `total_rate`.
pub fn lambda0_for_total_rate<T: Scalar>(model: &RdModel<T>, latitudes: &[T], total_rate: T) -> Result<T, SimError> {
    check_bands(latitudes)?;
    // total = sum(ln(C K lambda0 cos(phi))) / K
    let n = T::from_count(latitudes.len());
    let log_cos: T = latitudes.iter().fold(T::zero(), |a, p| a + p.cos().ln());
    let ln_lambda0 = (model.k * total_rate - log_cos) / n - (model.c * model.k).ln();
    Ok(ln_lambda0.exp())
}

/// Total plane rate and cos-weighted mean distortion.
pub fn sphere_score<T: Scalar>(allocation: &BandAllocation<T>) -> SphereScore<T> {
    let mut total_rate = T::zero();
    let mut num = T::zero();
    let mut den = T::zero();
    for b in &allocation.bands {
        let w = b.latitude.cos();
        total_rate = total_rate + b.rate;
        num = num + w * b.distortion;
        den = den + w;
    }
    SphereScore {
        total_rate,
        weighted_distortion: num / den,
    }
}

/// Uniform allocation whose total rate matches `total_rate`, found by
/// bisection on `ln(lambda)` to 1e-9 relative.
pub fn matched_uniform_allocation<T: Scalar>(
    model: &RdModel<T>,
    latitudes: &[T],
    total_rate: T,
) -> Result<BandAllocation<T>, SimError> {
    check_bands(latitudes)?;
    if !(total_rate >= T::zero()) || !total_rate.is_finite() {
        return Err(SimError::InfeasibleTotal(total_rate.as_f64()));
    }
    let total_at = |ln_lambda: T| -> Result<T, SimError> {
        Ok(sphere_score(&uniform_allocation(model, ln_lambda.exp(), latitudes)?).total_rate)
    };
    // rate is zero at lambda = 1/(C K)
    let mut lo = -(model.c * model.k).ln();
    let mut hi = lo + T::one();
    while total_at(hi)? < total_rate {
        hi = hi + (hi - lo);
        if !hi.is_finite() {
            return Err(SimError::InfeasibleTotal(total_rate.as_f64()));
        }
    }
    let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
    for _ in 0..400 {
        let mid = (lo + hi) / T::lit(2.0);
        let r = total_at(mid)?;
        if (r - total_rate).abs() <= tol * total_rate.max(T::min_positive_value()) {
            return uniform_allocation(model, mid.exp(), latitudes);
        }
        if r < total_rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::epsilon() * hi.abs().max(T::one()) {
            return uniform_allocation(model, mid.exp(), latitudes);
        }
    }
    Err(SimError::Bisection)
}

/// Numerical optimum of the spherical distortion for a fixed rate budget.
///
/// Rate is handed out in `total_rate / (bands * steps_per_band)` increments,
/// each to the band whose cos-weighted distortion drops the most. The
/// objective is separable and convex, so the greedy result is optimal on the
/// grid.
pub fn brute_force_optimal_allocation<T: Scalar>(
    model: &RdModel<T>,
    latitudes: &[T],
    total_rate: T,
    steps_per_band: usize,
) -> Result<BandAllocation<T>, SimError> {
    check_bands(latitudes)?;
    if steps_per_band < 1000 {
        return Err(SimError::Grid(steps_per_band));
    }
    if !(total_rate >= T::zero()) || !total_rate.is_finite() {
        return Err(SimError::InfeasibleTotal(total_rate.as_f64()));
    }
    let steps = steps_per_band * latitudes.len();
    let step = total_rate / T::from_count(steps);
    let weights: Vec<T> = latitudes.iter().map(|p| p.cos()).collect();
    let mut rates = vec![T::zero(); latitudes.len()];
    let gain = |w: T, r: T| {
        let before = model.c * (-model.k * r).exp();
        let after = model.c * (-model.k * (r + step)).exp();
        w * (before - after)
    };
    for _ in 0..steps {
        let mut best = 0;
        let mut best_gain = T::neg_infinity();
        for (b, (&w, &r)) in weights.iter().zip(&rates).enumerate() {
            let g = gain(w, r);
            if g > best_gain {
                best = b;
                best_gain = g;
            }
        }
        rates[best] = rates[best] + step;
    }
    let bands = latitudes
        .iter()
        .zip(rates)
        .map(|(&latitude, rate)| Band {
            latitude,
            rate,
            distortion: model.c * (-model.k * rate).exp(),
        })
        .collect();
    Ok(BandAllocation { bands, model: *model })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Uniform,
    Adapted,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Adapted => "adapted",
        }
    }
}

/// One point of a simulated R-D curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimPoint<T> {
    pub strategy: Strategy,
    /// Equator multiplier for the adapted strategy, the common multiplier for uniform.
    pub lambda: T,
    pub total_rate: T,
    pub weighted_distortion: T,
    pub quality_db: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport<T> {
    pub adapted: Vec<SimPoint<T>>,
    /// Uniform points at the adapted points' total rates, in sweep order.
    pub uniform: Vec<SimPoint<T>>,
    pub bd_rate: T,
}

impl<T: Scalar> SimulationReport<T> {
    /// Sweep indices where adapted distortion exceeds uniform at matched rate.
    pub fn dominance_violations(&self, rel_tol: T) -> Vec<usize> {
        self.adapted
            .iter()
            .zip(&self.uniform)
            .enumerate()
            .filter(|(_, (a, u))| a.weighted_distortion > u.weighted_distortion * (T::one() + rel_tol))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "strategy,lambda,total_rate,weighted_distortion,quality_db")?;
        for p in self.uniform.iter().chain(&self.adapted) {
            writeln!(
                out,
                "{},{},{},{},{}",
                p.strategy.name(),
                sig6(p.lambda.as_f64()),
                sig6(p.total_rate.as_f64()),
                sig6(p.weighted_distortion.as_f64()),
                sig6(p.quality_db.as_f64())
            )?;
        }
        writeln!(out, "# bd_rate_percent (adapted vs uniform)")?;
        writeln!(out, "bd_rate,{}", sig6(self.bd_rate.as_f64()))
    }
}

fn sim_point<T: Scalar>(strategy: Strategy, lambda: T, alloc: &BandAllocation<T>) -> SimPoint<T> {
    let s = sphere_score(alloc);
    SimPoint {
        strategy,
        lambda,
        total_rate: s.total_rate,
        weighted_distortion: s.weighted_distortion,
        quality_db: -T::lit(10.0) * s.weighted_distortion.log10(),
    }
}

/// BD-rate of cos-law adapted allocation against uniform allocation.
///
/// For each equator multiplier in `lambda0_sweep` the adapted allocation is
/// scored, then the uniform allocation with the same total rate. Quality is
/// `-10 log10(weighted distortion)`.
pub fn simulate_bd_gain<T: Scalar>(
    model: &RdModel<T>,
    latitudes: &[T],
    lambda0_sweep: &[T],
) -> Result<SimulationReport<T>, SimError> {
    let mut sweep = lambda0_sweep.to_vec();
    if sweep.iter().any(|l| !(*l > T::zero() && l.is_finite())) {
        return Err(SimError::Sweep);
    }
    sweep.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    sweep.dedup();
    if sweep.len() < 4 || sweep[sweep.len() - 1] < sweep[0] * T::lit(10.0) {
        return Err(SimError::Sweep);
    }
    let mut adapted = Vec::with_capacity(sweep.len());
    let mut uniform = Vec::with_capacity(sweep.len());
    for &lambda0 in &sweep {
        let a = adapted_allocation(model, lambda0, latitudes)?;
        let ap = sim_point(Strategy::Adapted, lambda0, &a);
        let u = matched_uniform_allocation(model, latitudes, ap.total_rate)?;
        let lambda_u = (model.k * u.bands[0].distortion).recip();
        uniform.push(sim_point(Strategy::Uniform, lambda_u, &u));
        adapted.push(ap);
    }
    let curve = |pts: &[SimPoint<T>]| {
        RdCurve::new(pts.iter().map(|p| RdPoint::new(p.total_rate, p.quality_db)).collect())
    };
    let bd = bd_rate(&curve(&uniform)?, &curve(&adapted)?, BdMethod::PiecewiseCubic)?;
    Ok(SimulationReport {
        adapted,
        uniform,
        bd_rate: bd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, LN_2};

    fn model(c: f64, k: f64) -> RdModel<f64> {
        RdModel::new(c, k).unwrap()
    }

    #[test]
    fn model_validation() {
        assert!(RdModel::new(0.0, 1.0).is_err());
        assert!(RdModel::new(1.0, -1.0).is_err());
        assert!(RdModel::new(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn exponential_model_values() {
        let m = model(100.0, 0.5);
        assert_eq!(distortion_at_rate(&m, 0.0).unwrap(), 100.0);
        assert!((distortion_at_rate(&m, LN_2 / 0.5).unwrap() - 50.0).abs() < 1e-12);
        assert!((distortion_at_rate(&m, 4.0).unwrap() - 13.5335).abs() < 1e-4);
        assert!(matches!(distortion_at_rate(&m, -1.0), Err(SimError::NegativeRate(_))));
    }

    #[test]
    fn adapted_examples() {
        let m = model(100.0, 0.5);
        let a = adapted_allocation(&m, 1.0, &[0.0]).unwrap();
        assert_eq!(a.bands[0].distortion, 2.0);
        assert!((a.bands[0].rate - 2.0 * 50f64.ln()).abs() < 1e-12);
        assert!((a.bands[0].rate - 7.824).abs() < 1e-3);

        let two = adapted_allocation(&m, 1.0, &[0.0, FRAC_PI_3]).unwrap();
        assert!((two.bands[1].distortion / two.bands[0].distortion - 2.0).abs() < 1e-12);
    }

    #[test]
    fn adapted_errors() {
        let m = model(100.0, 0.5);
        assert!(matches!(
            adapted_allocation(&m, 1.0, &[FRAC_PI_2]),
            Err(SimError::Pole(_))
        ));
        match adapted_allocation(&m, 0.03, &[0.0, 1.5]) {
            Err(SimError::Infeasible { band: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(adapted_allocation(&m, 1.0, &[]), Err(SimError::NoBands)));
    }

    #[test]
    fn uniform_examples() {
        let m = model(100.0, 0.5);
        let u = uniform_allocation(&m, 2.0, &[0.3, -0.1, 1.2]).unwrap();
        assert!(u.bands.iter().all(|b| b.distortion == 1.0));
        assert_eq!(
            uniform_allocation(&m, 3.0, &[0.0]).unwrap(),
            adapted_allocation(&m, 3.0, &[0.0]).unwrap()
        );
    }

    #[test]
    fn scores() {
        let m = model(100.0, 1.0);
        let u = uniform_allocation(&m, 1.0, &[0.0, FRAC_PI_3]).unwrap();
        assert!((sphere_score(&u).weighted_distortion - 1.0).abs() < 1e-15);
        let one = adapted_allocation(&m, 4.0, &[0.2]).unwrap();
        assert_eq!(sphere_score(&one).weighted_distortion, one.bands[0].distortion);
    }

    #[test]
    fn lambda0_hits_total_rate() {
        let m = model(100.0, 1.0);
        let lat = [0.0, 0.4, -0.9, 1.3];
        let l0 = lambda0_for_total_rate(&m, &lat, 14.0).unwrap();
        let a = adapted_allocation(&m, l0, &lat).unwrap();
        assert!((sphere_score(&a).total_rate - 14.0).abs() < 1e-12);
    }

    #[test]
    fn matched_uniform_rate() {
        let m = model(50.0, 0.7);
        let lat = [0.1, 0.5, 1.0];
        let u = matched_uniform_allocation(&m, &lat, 9.0).unwrap();
        assert!((sphere_score(&u).total_rate - 9.0).abs() <= 9e-9);
    }

    #[test]
    fn brute_force_two_band_example() {
        let m = model(100.0, 1.0);
        let b = brute_force_optimal_allocation(&m, &[0.0, FRAC_PI_3], 8.0, 1000).unwrap();
        let diff = b.bands[0].rate - b.bands[1].rate;
        assert!((diff - LN_2).abs() < 8.0 / 2000.0 + 1e-12);
        let single = brute_force_optimal_allocation(&m, &[0.7], 5.0, 1000).unwrap();
        assert!((single.bands[0].rate - 5.0).abs() < 1e-9);
        let sym = brute_force_optimal_allocation(&m, &[0.6, -0.6], 6.0, 1000).unwrap();
        assert!((sym.bands[0].rate - sym.bands[1].rate).abs() <= 6.0 / 2000.0 + 1e-12);
        assert!(matches!(
            brute_force_optimal_allocation(&m, &[0.0], 1.0, 10),
            Err(SimError::Grid(10))
        ));
    }

    #[test]
    fn degenerate_bd_cases() {
        let m = model(100.0, 1.0);
        let sweep = [1.0, 2.0, 4.0, 8.0, 16.0];
        let eq = simulate_bd_gain(&m, &[0.0], &sweep).unwrap();
        assert!(eq.bd_rate.abs() < 1e-6);
        let pair = simulate_bd_gain(&m, &[FRAC_PI_3, -FRAC_PI_3], &sweep).unwrap();
        assert!(pair.bd_rate.abs() < 1e-6);
    }

    #[test]
    fn sweep_validation() {
        let m = model(100.0, 1.0);
        assert!(matches!(simulate_bd_gain(&m, &[0.0], &[1.0, 2.0, 4.0]), Err(SimError::Sweep)));
        assert!(matches!(
            simulate_bd_gain(&m, &[0.0], &[1.0, 2.0, 3.0, 4.0]),
            Err(SimError::Sweep)
        ));
        assert!(matches!(
            simulate_bd_gain(&m, &[0.0], &[1.0, 1.0, 20.0, 20.0, 20.0]),
            Err(SimError::Sweep)
        ));
    }

    #[test]
    fn report_csv() {
        let m = model(100.0, 1.0);
        let r = simulate_bd_gain(&m, &[0.0, 0.5], &[1.0, 2.0, 4.0, 8.0, 16.0]).unwrap();
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("strategy,lambda,total_rate,weighted_distortion,quality_db\nuniform,"));
        assert_eq!(text.lines().filter(|l| l.starts_with("adapted,")).count(), 5);
        assert!(text.lines().last().unwrap().starts_with("bd_rate,-"));
    }
}
