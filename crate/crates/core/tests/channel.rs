use proptest::prelude::*;
use uavmec_core::channel::{distance, elevation_sine, los_rate, outage_rate, ChannelParams, Geometry};
use uavmec_core::Point2;

const P: f64 = 0.1;

fn coord() -> impl Strategy<Value = f64> {
    0.0..100.0f64
}

fn altitude() -> impl Strategy<Value = f64> {
    40.0..80.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn geometry_is_consistent(qx in coord(), qy in coord(), wx in coord(), wy in coord(), h in altitude()) {
        let (q, w) = (Point2::new(qx, qy), Point2::new(wx, wy));
        let g = Geometry::new(q, h, w);
        let d2 = g.dist * g.dist;
        prop_assert!((d2 - g.horiz_dist_sq - h * h).abs() <= 1e-9 * d2);
        prop_assert!(g.elev_sine > 0.0 && g.elev_sine <= 1.0);
        let s = elevation_sine(q, h, w).unwrap();
        prop_assert!((s - h / distance(q, h, w)).abs() <= 1e-15);
        prop_assert!((s - g.elev_sine).abs() <= 1e-15);
    }

    #[test]
    fn rate_increases_with_elevation(d2 in 0.0..20_000.0f64, h in altitude(), v in 1e-6..1.0f64) {
        let ch = ChannelParams::default();
        let up = (v + 1e-3).min(1.0);
        prop_assert!(outage_rate(d2, h, up, P, &ch).unwrap() >= outage_rate(d2, h, v, P, &ch).unwrap());
    }

    #[test]
    fn rate_decreases_with_distance(d2 in 0.0..20_000.0f64, extra in 0.0..5_000.0f64, h in altitude(), v in 1e-6..1.0f64) {
        let ch = ChannelParams::default();
        prop_assert!(outage_rate(d2 + extra, h, v, P, &ch).unwrap() <= outage_rate(d2, h, v, P, &ch).unwrap());
    }

    #[test]
    fn outage_rate_below_los(d2 in 0.0..20_000.0f64, h in altitude(), v in 1e-6..1.0f64) {
        let ch = ChannelParams::default();
        prop_assert!(outage_rate(d2, h, v, P, &ch).unwrap() <= los_rate(d2, h, P, &ch).unwrap());
    }
}

#[test]
fn overhead_minimum_altitude_maximizes_rate() {
    let ch = ChannelParams::default();
    let w = Point2::new(12.0, 83.0);
    let rate = |q: Point2, h: f64| {
        let g = Geometry::new(q, h, w);
        outage_rate(g.horiz_dist_sq, h, g.elev_sine, P, &ch).unwrap()
    };
    let best = rate(w, 40.0);
    for ix in 0..=100 {
        for iy in 0..=100 {
            for h in [40.0, 41.0, 50.0, 60.0, 80.0] {
                assert!(rate(Point2::new(ix as f64, iy as f64), h) <= best);
            }
        }
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let ch = ChannelParams::default();
    assert!(outage_rate(1.0, 0.0, 0.5, P, &ch).is_err());
    assert!(outage_rate(1.0, 40.0, 0.0, P, &ch).is_err());
    assert!(outage_rate(1.0, 40.0, 1.5, P, &ch).is_err());
    assert!(outage_rate(f64::NAN, 40.0, 0.5, P, &ch).is_err());
    assert!(los_rate(-1.0, 40.0, P, &ch).is_err());
    assert!(elevation_sine(Point2::new(0.0, 0.0), 0.0, Point2::new(1.0, 1.0)).is_err());

    let bad = ChannelParams {
        k2: 0.89,
        ..Default::default()
    };
    let err = bad.validate().unwrap_err().to_string();
    assert!(err.contains("k1") || err.contains("k2"), "{err}");
    let bad = ChannelParams {
        pathloss_exp: 1.5,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
}
