use calabi_lab_demo::{kr_speed, max_smoothing_density, sphere_bracket};

#[test]
fn speed_curve_decays_with_finite_length() {
    let c = kr_speed(64, 0.05, 2.0, 1.0, 6.0).unwrap();
    assert_eq!(c.times().len(), c.speeds().len());
    assert!(c.rate() > 1.5 && c.rate() < 2.5, "{}", c.rate());
    assert!(c.length().is_finite() && c.length() > 0.0);
    let s = c.speeds();
    assert!(s.last().unwrap() < &(1e-3 * s[0]));
    // p ≤ 0 selects the sup norm, which dominates p = 2 under the normalized measure
    let inf = kr_speed(64, 0.05, 0.0, 1.0, 6.0).unwrap();
    assert!(inf.length() >= c.length());
}

#[test]
fn bracket_orders_chord_below_segment() {
    for (p, q) in [(1.0, 1.0), (2.0, 1.0), (4.0, 2.0)] {
        let b = sphere_bracket(p, q, 0.2, 0.7, 1.5, 64).unwrap();
        assert!(b.chord() > 0.0);
        assert!(b.chord() <= b.segment() * (1.0 + 1e-12));
        assert_eq!(b.first().len(), 64);
        let same = sphere_bracket(p, q, 0.3, 0.3, 1.5, 64).unwrap();
        assert!(same.chord() < 1e-12 && same.segment() < 1e-12);
    }
    assert!(sphere_bracket(0.5, 1.0, 0.0, 0.5, 1.0, 16).is_err());
}

#[test]
fn smoothing_concentrates_density_on_the_crossing() {
    let wide = max_smoothing_density(64, 0.02).unwrap();
    let sharp = max_smoothing_density(64, 0.002).unwrap();
    let mean = sharp.density().iter().sum::<f64>() / (64.0 * 64.0);
    assert!((mean - 1.0).abs() < 1e-9);
    let max = |v: Vec<f64>| v.into_iter().fold(f64::MIN, f64::max);
    assert!(max(sharp.density()) > max(wide.density()));
    assert!(sharp.charge() > 0.0);
    assert!(max_smoothing_density(7, 0.01).is_err());
}
