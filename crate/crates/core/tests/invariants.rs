//! Property tests of the public invariants, one block per module.

use std::sync::Arc;

use calabi_lab::backend::{
    calabi_yau_inverse, make_p1_geometry, make_torus_geometry, mean_scalar_curvature, random_potential, Geometry,
};
use calabi_lab::experiments::families::{crossing_pair, low_mode_potential};
use calabi_lab::experiments::suites::zonal_start;
use calabi_lab::experiments::{max_smoothing_family, spike_density_family, SpikeConfig};
use calabi_lab::finsler::{
    calabi_cauchy_stat, calabi_closed_form_21, calabi_distance_bracket, embed_f, mabuchi_cauchy_stat, pinsker_gap,
    PINSKER_KAPPA_PER_VOLUME,
};
use calabi_lab::flows::{calabi_flow_run, kr_flow_run, FlowControls};
use calabi_lab::lpq_sphere::{
    chord_distance, comparison_bracket_check, curve_length, lp_norm, normalized_segment_curve, sphere_project,
    MeasureSpace,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exponent_pair() -> impl Strategy<Value = (f64, f64)> {
    (1.0f64..5.0).prop_flat_map(|p| (Just(p), 1.0f64..=p))
}

fn positive_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..3.0, n)
}

fn geometries() -> [Arc<Geometry>; 2] {
    [make_torus_geometry(16).unwrap(), make_p1_geometry(32).unwrap()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chord_bounded_by_segment_length(
        (p, q) in exponent_pair(),
        (w, a, b) in (2usize..20).prop_flat_map(|n| (positive_vec(n), positive_vec(n), positive_vec(n))),
        m in 2usize..40,
    ) {
        let mu = MeasureSpace::new(w).unwrap();
        let r = p / q;
        let f0 = sphere_project(&a, p, q, r, &mu).unwrap();
        let f1 = sphere_project(&b, p, q, r, &mu).unwrap();
        let curve = normalized_segment_curve(&f0, &f1, &mu, m).unwrap();
        for s in curve.samples() {
            prop_assert!(s.iter().all(|v| *v > 0.0));
            let norm = lp_norm(s, r, &mu).unwrap();
            prop_assert!((norm / r - 1.0).abs() < 1e-10);
        }
        let chord = chord_distance(&f0, &f1, p, &mu).unwrap();
        prop_assert!(chord <= curve_length(&curve, p, &mu).unwrap() + 1e-10);
    }

    #[test]
    fn estimate_chain_and_half_radius(
        (p, q) in exponent_pair(),
        (w, a, b, c) in (2usize..16).prop_flat_map(|n| (positive_vec(n), positive_vec(n), positive_vec(n), positive_vec(n))),
    ) {
        let mu = MeasureSpace::new(w).unwrap();
        let r = p / q;
        let proj = |v: &[f64]| sphere_project(v, p, q, r, &mu).unwrap();
        let rep = comparison_bracket_check(&proj(&c), &proj(&a), &proj(&b), p, &mu).unwrap();
        prop_assert!(rep.holds, "violation {}", rep.max_pointwise_violation);
        prop_assert!(rep.min_norm_ratio >= 0.5);
    }

    #[test]
    fn norm_homogeneity(v in prop::collection::vec(-3.0f64..3.0, 1..20), c in -4.0f64..4.0, p in 1.0f64..6.0) {
        let mu = MeasureSpace::uniform(v.len(), 1.0).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        let lhs = lp_norm(&scaled, p, &mu).unwrap();
        let rhs = c.abs() * lp_norm(&v, p, &mu).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn densities_conserve_mass_and_invert(seed in any::<u64>(), spread in 0.05f64..0.95, which in 0usize..2) {
        let g = &geometries()[which];
        let u = random_potential(g, &mut ChaCha8Rng::seed_from_u64(seed), spread);
        prop_assert!((g.mean(u.density_values()) - 1.0).abs() < 1e-12);
        let back = calabi_yau_inverse(u.density_values(), g).unwrap();
        let err = u.values().iter().zip(back.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-9);
        let dev = (mean_scalar_curvature(&u) - g.kind().mean_scalar_curvature()).abs();
        prop_assert!(dev < 1e-6);
    }

    #[test]
    fn laplacian_is_self_adjoint(
        f in prop::collection::vec(-1.0f64..1.0, 256),
        h in prop::collection::vec(-1.0f64..1.0, 256),
    ) {
        let g = make_torus_geometry(16).unwrap();
        let ip = |a: &[f64], b: &[f64]| g.integrate(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>());
        let lhs = ip(&g.laplace(&f), &h);
        let rhs = ip(&f, &g.laplace(&h));
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn embedding_lands_on_the_sphere((p, q) in exponent_pair(), seed in any::<u64>(), which in 0usize..2) {
        let g = &geometries()[which];
        let u = random_potential(g, &mut ChaCha8Rng::seed_from_u64(seed), 0.6);
        let f = embed_f(&u, p, q).unwrap();
        let norm = lp_norm(f.values(), p / q, g.measure()).unwrap();
        prop_assert!((norm / (p / q) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn great_circle_inside_bracket(seed in any::<u64>(), which in 0usize..2) {
        let g = &geometries()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u0 = random_potential(g, &mut rng, 0.7);
        let u1 = random_potential(g, &mut rng, 0.7);
        let b = calabi_distance_bracket(&u0, &u1, 2.0, 1.0, 16).unwrap();
        let d = calabi_closed_form_21(&u0, &u1).unwrap();
        prop_assert!(b.lower <= d * (1.0 + 1e-12) && d <= b.upper * (1.0 + 1e-12));
    }

    #[test]
    fn cauchy_statistics_vanish_on_the_diagonal_and_are_symmetric(seed in any::<u64>(), q in 1.0f64..3.0) {
        let g = make_torus_geometry(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_potential(&g, &mut rng, 0.5);
        let b = random_potential(&g, &mut rng, 0.5);
        prop_assert_eq!(calabi_cauchy_stat(&a, &a, q).unwrap(), 0.0);
        prop_assert_eq!(mabuchi_cauchy_stat(&a, &a, q).unwrap(), 0.0);
        let ab = calabi_cauchy_stat(&a, &b, q).unwrap();
        let ba = calabi_cauchy_stat(&b, &a, q).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-14 * ab.max(1e-300));
    }

    #[test]
    fn pinsker_holds(f in positive_vec(256), h in positive_vec(256)) {
        let g = make_torus_geometry(16).unwrap();
        let norm = |v: Vec<f64>| { let m = g.mean(&v); v.into_iter().map(|x| x / m).collect::<Vec<_>>() };
        let gap = pinsker_gap(&g, &norm(f), &norm(h)).unwrap();
        prop_assert!(gap.holds());
        prop_assert!((gap.kappa - PINSKER_KAPPA_PER_VOLUME * g.volume()).abs() < 1e-12);
    }

    #[test]
    fn generated_potentials_are_admissible(seed in any::<u64>(), spread in 0.05f64..0.9, modes in 1i32..3, which in 0usize..2) {
        let g = &geometries()[which];
        let u = low_mode_potential(g, &mut ChaCha8Rng::seed_from_u64(seed), spread, modes);
        prop_assert!(u.min_density().1 > 0.0);
        prop_assert!(g.mean(u.values()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn flows_keep_normalization_and_positivity(seed in any::<u64>(), spread in 0.1f64..0.5) {
        let torus = make_torus_geometry(16).unwrap();
        let u0 = random_potential(&torus, &mut ChaCha8Rng::seed_from_u64(seed), spread);
        let traj = calabi_flow_run(&u0, 1e-3, 0.02, FlowControls::default()).unwrap();
        let sphere = make_p1_geometry(32).unwrap();
        let v0 = random_potential(&sphere, &mut ChaCha8Rng::seed_from_u64(seed), spread);
        let kr = kr_flow_run(&v0, 0.01, 0.5, FlowControls::default()).unwrap();
        for s in traj.states.iter().chain(&kr.states) {
            let g = s.geometry();
            prop_assert!(g.mean(s.values()).abs() < 1e-10);
            prop_assert!(s.min_density().1 > 0.0);
        }
    }
}

#[test]
fn round_potential_is_a_kr_fixed_point() {
    let g = make_p1_geometry(64).unwrap();
    let zero = calabi_yau_inverse(&vec![1.0; g.len()], &g).unwrap();
    let traj = kr_flow_run(&zero, 0.01, 1.0, FlowControls::default()).unwrap();
    let drift = traj.last().values().iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(drift < 1e-12, "{drift}");
}

#[test]
fn experiments_are_deterministic() {
    let g = make_torus_geometry(64).unwrap();
    let (v0, v1) = crossing_pair(&g, 0.02).unwrap();
    let schedule: Vec<f64> = (0..5).map(|k| 0.025 * 0.5f64.powi(k)).collect();
    let a = max_smoothing_family(&v0, &v1, &schedule).unwrap();
    let b = max_smoothing_family(&v0, &v1, &schedule).unwrap();
    assert_eq!(a.consecutive_mabuchi, b.consecutive_mabuchi);
    assert_eq!(a.delta, b.delta);
    let cfg = SpikeConfig { resolution: 64, k_max: 8, ..Default::default() };
    let s = spike_density_family(cfg).unwrap();
    let t = spike_density_family(cfg).unwrap();
    assert_eq!(s.witness, t.witness);
    assert!(s.witness.windows(2).all(|w| w[1] > w[0]));
    let z = zonal_start(&make_p1_geometry(32).unwrap(), 0.05).unwrap();
    assert!(z.min_density().1 > 0.0);
}

#[test]
fn entropy_is_lower_semicontinuous_along_weak_limits() {
    use calabi_lab::finsler::{density_entropy, smoothing_sequence};
    use std::f64::consts::TAU;
    let g = make_torus_geometry(64).unwrap();
    // oscillations converge weakly to the reference density, whose entropy is zero
    let osc: Vec<f64> = [1usize, 2, 4, 8]
        .iter()
        .map(|&j| {
            let rho: Vec<f64> = g.sites().iter().map(|s| 1.0 + 0.5 * (TAU * j as f64 * s[0]).sin()).collect();
            density_entropy(&g, &rho)
        })
        .collect();
    let liminf = osc.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(density_entropy(&g, &vec![1.0; g.len()]) <= liminf + 1e-12);
    assert!(liminf > 0.05);
    // mollifications of a bounded rough density converge to it from below
    let f: Vec<f64> = g
        .sites()
        .iter()
        .enumerate()
        .map(|(i, s)| 1.0 + 0.4 * (TAU * s[1]).cos() + if i % 7 == 0 { 0.3 } else { -0.05 })
        .collect();
    let m = g.mean(&f);
    let f: Vec<f64> = f.into_iter().map(|v| v / m).collect();
    let smoothed: Vec<f64> = (1..=6)
        .map(|k| density_entropy(&g, &smoothing_sequence(&g, &f, k).unwrap()))
        .collect();
    let limit = density_entropy(&g, &f);
    let gaps: Vec<f64> = smoothed.iter().map(|e| limit - e).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(limit <= smoothed[5] + 1e-3 * limit, "{limit} vs {smoothed:?}");
}
