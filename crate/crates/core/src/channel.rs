//! Air-to-ground link geometry and the logistic outage-rate model.
//!
//! The achievable rate of a UE-to-UAV link at a fixed outage probability is
//! approximated in closed form as
//!
//! ```text
//! r = B log2(1 + (K1 + K2 / (1 + exp(-(K3 + K4 v)))) * gamma / d^alpha0)
//! ```
//!
//! with `v = sin(elevation)`, `gamma = p * beta0 / (sigma^2 * Gamma)` and `d`
//! the 3D distance. Everything here is a pure function of its inputs.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::{Error, Point2, Result};

/// Convert a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Link-budget and logistic-fit constants shared by every UE-UAV pair.
///
/// All values are linear SI quantities; dB figures are converted when the
/// parameters are built (see [`ChannelParams::default`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub bandwidth_hz: f64,
    /// Channel power gain at the 1 m reference distance.
    pub ref_gain: f64,
    /// Path-loss exponent; defaults to 2 (free space).
    pub pathloss_exp: f64,
    pub noise_w: f64,
    /// SNR gap of the practical modulation and coding, linear, `>= 1`.
    pub snr_gap: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    /// Rician-factor constants. Diagnostics only: the rate model uses the
    /// logistic fit `k1..k4` and these have placeholder defaults.
    pub rician_a1: f64,
    pub rician_a2: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 10e6,
            ref_gain: db_to_linear(-30.0),
            pathloss_exp: 2.0,
            noise_w: 1e-9,
            snr_gap: db_to_linear(8.2),
            k1: 0.01,
            k2: 0.99,
            k3: -4.7,
            k4: 8.9,
            rician_a1: 1.0,
            rician_a2: 1.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("channel.bandwidth_hz", self.bandwidth_hz),
            ("channel.ref_gain", self.ref_gain),
            ("channel.noise_w", self.noise_w),
            ("channel.k1", self.k1),
            ("channel.k2", self.k2),
            ("channel.k4", self.k4),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(field, format!("must be finite and > 0, got {value}")));
            }
        }
        if !(self.snr_gap.is_finite() && self.snr_gap >= 1.0) {
            return Err(Error::invalid(
                "channel.snr_gap",
                format!("must be >= 1 (linear), got {}", self.snr_gap),
            ));
        }
        if !(self.pathloss_exp.is_finite() && self.pathloss_exp >= 2.0) {
            return Err(Error::invalid(
                "channel.pathloss_exp",
                format!("must be >= 2, got {}", self.pathloss_exp),
            ));
        }
        if !(self.k3.is_finite() && self.k3 < 0.0) {
            return Err(Error::invalid("channel.k3", format!("must be < 0, got {}", self.k3)));
        }
        if (self.k1 + self.k2 - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "channel.k1+k2",
                format!("k1 + k2 must equal 1, got {}", self.k1 + self.k2),
            ));
        }
        if !(self.rician_a1.is_finite() && self.rician_a2.is_finite()) {
            return Err(Error::invalid("channel.rician_a1/a2", "must be finite"));
        }
        Ok(())
    }

    /// Reference SNR `gamma = p * beta0 / (sigma^2 * Gamma)` of a UE
    /// transmitting with `tx_power_w`.
    #[inline]
    pub fn snr_scale(&self, tx_power_w: f64) -> f64 {
        tx_power_w * self.ref_gain / (self.noise_w * self.snr_gap)
    }

    /// `exp(-(K3 + K4 v))`, the term the lower bounds are affine in.
    #[inline]
    pub fn exp_term(&self, v: f64) -> f64 {
        (-(self.k3 + self.k4 * v)).exp()
    }

    /// The angle-dependent factor `K1 + K2 / (1 + exp(-(K3 + K4 v)))`.
    #[inline]
    pub fn logistic_factor(&self, v: f64) -> f64 {
        self.k1 + self.k2 / (1.0 + self.exp_term(v))
    }
}

/// Which rate expression drives a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// Elevation-dependent logistic outage rate.
    Rician,
    /// Pure line-of-sight rate (the logistic factor replaced by 1).
    LineOfSight,
}

impl RateModel {
    /// Rate in bits/s for squared 3D distance `dist_sq`, elevation sine `v`
    /// and reference SNR `gamma`. No input checking; see [`outage_rate`] and
    /// [`los_rate`] for the checked entry points.
    #[inline]
    pub fn rate(self, params: &ChannelParams, dist_sq: f64, v: f64, gamma: f64) -> f64 {
        let factor = match self {
            RateModel::Rician => params.logistic_factor(v),
            RateModel::LineOfSight => 1.0,
        };
        let snr = factor * gamma / dist_sq.powf(0.5 * params.pathloss_exp);
        params.bandwidth_hz * snr.ln_1p() / LN_2
    }
}

/// Cached geometry of one UE-UAV pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub horiz_dist_sq: f64,
    pub altitude: f64,
    pub dist: f64,
    pub elev_sine: f64,
}

impl Geometry {
    pub fn new(q: Point2, h: f64, w: Point2) -> Self {
        let horiz_dist_sq = q.dist_sq(&w);
        let dist = (horiz_dist_sq + h * h).sqrt();
        let elev_sine = if dist > 0.0 { h / dist } else { 1.0 };
        Self {
            horiz_dist_sq,
            altitude: h,
            dist,
            elev_sine,
        }
    }

    #[inline]
    pub fn dist_sq(&self) -> f64 {
        self.horiz_dist_sq + self.altitude * self.altitude
    }
}

/// 3D distance between a UAV at `(q, h)` and a ground UE at `w`.
pub fn distance(q: Point2, h: f64, w: Point2) -> f64 {
    (q.dist_sq(&w) + h * h).sqrt()
}

/// Sine of the elevation angle from `w` up to the UAV at `(q, h)`.
pub fn elevation_sine(q: Point2, h: f64, w: Point2) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("altitude", format!("elevation needs h > 0, got {h}")));
    }
    Ok(h / distance(q, h, w))
}

/// Rician factor `A1 exp(A2 theta)` for elevation angle `theta` (radians).
pub fn rician_factor(theta: f64, params: &ChannelParams) -> f64 {
    params.rician_a1 * (params.rician_a2 * theta).exp()
}

fn check_link(horiz_dist_sq: f64, h: f64, tx_power: f64) -> Result<()> {
    for (field, value) in [("horiz_dist_sq", horiz_dist_sq), ("altitude", h), ("tx_power", tx_power)] {
        if !value.is_finite() {
            return Err(Error::invalid(field, format!("must be finite, got {value}")));
        }
    }
    if h <= 0.0 {
        return Err(Error::invalid("altitude", format!("must be > 0, got {h}")));
    }
    if horiz_dist_sq < 0.0 || tx_power < 0.0 {
        return Err(Error::invalid("link", "distance and power must be non-negative"));
    }
    Ok(())
}

/// Logistic-approximated outage rate in bits/s.
///
/// `v` is taken as given (it is an optimization variable upstream) and only
/// has to lie in `(0, 1]`.
pub fn outage_rate(
    horiz_dist_sq: f64,
    h: f64,
    v: f64,
    tx_power: f64,
    params: &ChannelParams,
) -> Result<f64> {
    check_link(horiz_dist_sq, h, tx_power)?;
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::invalid("elev_sine", format!("must lie in (0, 1], got {v}")));
    }
    let gamma = params.snr_scale(tx_power);
    Ok(RateModel::Rician.rate(params, horiz_dist_sq + h * h, v, gamma))
}

/// Line-of-sight rate in bits/s: the outage rate with the angle-dependent
/// factor replaced by 1.
pub fn los_rate(horiz_dist_sq: f64, h: f64, tx_power: f64, params: &ChannelParams) -> Result<f64> {
    check_link(horiz_dist_sq, h, tx_power)?;
    let gamma = params.snr_scale(tx_power);
    Ok(RateModel::LineOfSight.rate(params, horiz_dist_sq + h * h, 1.0, gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ORIGIN: Point2 = Point2::new(0.0, 0.0);

    #[test]
    fn distance_examples() {
        assert_eq!(distance(Point2::new(3.0, 4.0), 0.0, ORIGIN), 5.0);
        assert_eq!(distance(ORIGIN, 40.0, ORIGIN), 40.0);
        assert_eq!(distance(Point2::new(30.0, 0.0), 40.0, ORIGIN), 50.0);
    }

    #[test]
    fn elevation_examples() {
        assert_eq!(elevation_sine(ORIGIN, 40.0, ORIGIN).unwrap(), 1.0);
        assert_relative_eq!(elevation_sine(Point2::new(30.0, 0.0), 40.0, ORIGIN).unwrap(), 0.8);
        assert_relative_eq!(elevation_sine(Point2::new(40.0, 0.0), 30.0, ORIGIN).unwrap(), 0.6);
        assert!(elevation_sine(ORIGIN, 0.0, ORIGIN).is_err());
        assert!(elevation_sine(ORIGIN, -1.0, ORIGIN).is_err());
    }

    #[test]
    fn rician_factor_examples() {
        let mut p = ChannelParams::default();
        assert_eq!(rician_factor(0.0, &p), 1.0);
        p.rician_a1 = 2.0;
        p.rician_a2 = 0.0;
        assert_eq!(rician_factor(1.0, &p), 2.0);
        p.rician_a1 = 1.0;
        p.rician_a2 = 2.0;
        assert_relative_eq!(
            rician_factor(std::f64::consts::FRAC_PI_2, &p),
            std::f64::consts::PI.exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn default_params_convert_db() {
        let p = ChannelParams::default();
        assert_relative_eq!(p.ref_gain, 1e-3, max_relative = 1e-14);
        assert_relative_eq!(p.snr_gap, 10f64.powf(0.82), max_relative = 1e-14);
        assert_relative_eq!(dbm_to_watts(20.0), 0.1, max_relative = 1e-14);
        p.validate().unwrap();
    }

    #[test]
    fn zero_power_gives_zero_rate() {
        let p = ChannelParams::default();
        assert_eq!(outage_rate(100.0, 40.0, 0.5, 0.0, &p).unwrap(), 0.0);
        assert_eq!(los_rate(100.0, 40.0, 0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn logistic_midpoint() {
        let p = ChannelParams::default();
        let v_mid = -p.k3 / p.k4;
        assert_relative_eq!(v_mid, 0.528_089_887_640_449_4, max_relative = 1e-12);
        assert_relative_eq!(p.logistic_factor(v_mid), p.k1 + p.k2 / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn overhead_rate_matches_extended_precision_value() {
        // 40-digit evaluation of the rate expression (mpmath): B=1e7, beta0=1e-3,
        // sigma^2=1e-9, Gamma=10^0.82, p=0.1 W, alpha0=2, d=40 m, v=1.
        let p = ChannelParams::default();
        let r = outage_rate(0.0, 40.0, 1.0, 0.1, &p).unwrap();
        assert_relative_eq!(r, 33_675_662.955_950_972, max_relative = 1e-12);
    }

    #[test]
    fn los_reference_distance() {
        let p = ChannelParams::default();
        let gamma = p.snr_scale(0.1);
        let r = los_rate(0.0, 1.0, 0.1, &p).unwrap();
        assert_relative_eq!(r, p.bandwidth_hz * (1.0 + gamma).log2(), max_relative = 1e-13);
    }

    #[test]
    fn rejects_non_finite() {
        let p = ChannelParams::default();
        assert!(outage_rate(f64::NAN, 40.0, 0.5, 0.1, &p).is_err());
        assert!(outage_rate(1.0, f64::INFINITY, 0.5, 0.1, &p).is_err());
        assert!(outage_rate(1.0, 40.0, f64::NAN, 0.1, &p).is_err());
        assert!(los_rate(1.0, 40.0, f64::NAN, &p).is_err());
    }

    #[test]
    fn validate_rejects_bad_logistic_sum() {
        let p = ChannelParams {
            k1: 0.01,
            k2: 0.89,
            ..Default::default()
        };
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("k1 + k2 must equal 1"), "{err}");
    }

    #[test]
    fn sampled_geometry_and_monotonicity() {
        let p = ChannelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let q = Point2::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0));
            let w = Point2::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0));
            let h = rng.gen_range(40.0..=80.0);
            let g = Geometry::new(q, h, w);
            let v = elevation_sine(q, h, w).unwrap();
            assert!(v > 0.0 && v <= 1.0);
            assert_eq!(v, g.elev_sine);
            let d = distance(q, h, w);
            assert!((d * d - g.horiz_dist_sq - h * h).abs() <= 1e-9 * d * d);

            let r = outage_rate(g.horiz_dist_sq, h, v, 0.1, &p).unwrap();
            let r_up = outage_rate(g.horiz_dist_sq, h, (v + 1e-3).min(1.0), 0.1, &p).unwrap();
            let r_far = outage_rate(g.horiz_dist_sq + rng.gen_range(0.0..500.0), h, v, 0.1, &p).unwrap();
            assert!(r_up >= r);
            assert!(r_far <= r);
            assert!(r <= los_rate(g.horiz_dist_sq, h, 0.1, &p).unwrap());
        }
    }

    #[test]
    fn overhead_at_min_altitude_is_best() {
        // 1 m horizontal grid, 1 m altitude grid over the default box.
        let p = ChannelParams::default();
        let w = Point2::new(37.0, 61.0);
        let best = outage_rate(0.0, 40.0, 1.0, 0.1, &p).unwrap();
        for ix in 0..=100 {
            for iy in 0..=100 {
                let q = Point2::new(ix as f64, iy as f64);
                for h in 40..=80 {
                    let h = h as f64;
                    let g = Geometry::new(q, h, w);
                    let r = outage_rate(g.horiz_dist_sq, h, g.elev_sine, 0.1, &p).unwrap();
                    assert!(r <= best, "rate at {q:?},{h} beats overhead");
                }
            }
        }
    }
}
