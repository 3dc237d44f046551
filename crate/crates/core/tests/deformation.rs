use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xxz_core::deformation::*;
use xxz_core::freefermion::f2_estimate;
use xxz_core::ikccp::{d_weight, ik_determinant};
use xxz_core::numerics::QuadOptions;
use xxz_core::onepoint::prob_leftmost_geq;
use xxz_core::special::bessel_j;
use xxz_core::{ModelParams, ParticleConfig, C64};

fn params(delta: f64, t: f64, y: &[i64]) -> ModelParams {
    ModelParams::new(delta, t, ParticleConfig::new(y.to_vec()).unwrap()).unwrap()
}

fn config(y: &[i64]) -> ParticleConfig {
    ParticleConfig::new(y.to_vec()).unwrap()
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn double_critical_point_at_left_edge() {
    let t = 3.0;
    let x = -2.0 * t;
    let i = C64::i();
    for order in [1, 2] {
        assert!(spectral_derivative(SpectralKind::G, i, x, t, order).unwrap().norm() < 1e-12);
        assert!(spectral_derivative(SpectralKind::H, -i, x, t, order).unwrap().norm() < 1e-12);
    }
    let cp = critical_points(x, t).unwrap();
    assert!(cp.xi.iter().all(|z| (z - i).norm() < 1e-7));
    assert!(cp.zeta.iter().all(|z| (z + i).norm() < 1e-7));
}

#[test]
fn cubic_taylor_term() {
    let t = 2.0;
    let g0 = spectral(SpectralKind::G, C64::i(), -2.0 * t, t).unwrap().value;
    for dir in [1.0, -1.0] {
        let d = c(1e-3 * dir, 5e-4);
        let g = spectral(SpectralKind::G, C64::i() + d, -2.0 * t, t).unwrap().value;
        let ratio = (g - g0) / (C64::new(0.0, t / 3.0) * d * d * d);
        assert!((ratio - 1.0).norm() < 0.01, "{ratio}");
    }
}

#[test]
fn h_is_g_at_the_reciprocal() {
    let (x, t) = (-3.0, 1.7);
    for z in [c(0.5, 1.2), c(-2.0, 0.3), c(1.0, -0.4), -C64::i()] {
        let h = spectral(SpectralKind::H, z, x, t).unwrap().value;
        let g = spectral(SpectralKind::G, z.inv(), x, t).unwrap().value;
        assert!((h - g).norm() < 1e-13, "{h} vs {g}");
    }
}

#[test]
fn branch_cut_is_rejected() {
    assert!(spectral(SpectralKind::G, c(-1.0, 0.0), 1.0, 1.0).is_err());
    assert!(spectral(SpectralKind::G, c(0.0, 0.0), 1.0, 1.0).is_err());
    assert!(spectral_derivative(SpectralKind::G, c(1.0, 0.0), 1.0, 1.0, 4).is_err());
}

#[test]
fn steep_contours_are_anchored_and_closed() {
    for (kind, anchor) in [(SteepKind::Plus, C64::i()), (SteepKind::Minus, -C64::i())] {
        let g = steep_contour(kind, 4.0).unwrap();
        let segs = g.segments();
        assert!(segs.iter().any(|s| (s.start() - anchor).norm() < 1e-12));
        for k in 0..segs.len() {
            let next = &segs[(k + 1) % segs.len()];
            assert!((segs[k].end() - next.start()).norm() < 1e-12);
        }
    }
    assert!(steep_contour(SteepKind::Plus, 1.5).is_err());
}

#[test]
fn gamma_hat_rejects_inconsistent_radii() {
    assert!(gamma_hat(3.0, 0.05, 0.2, 0.02).is_err());
    assert!(gamma_hat(3.0, 0.7, 0.02, 0.2).is_err());
    assert!(gamma_hat(0.1, 0.7, 0.2, 0.02).is_err());
    let g = gamma_hat(3.0, 0.0, 0.2, 0.02).unwrap();
    let segs = g.segments();
    for k in 0..segs.len() {
        assert!((segs[k].end() - segs[(k + 1) % segs.len()].start()).norm() < 1e-12);
    }
}

#[test]
fn steep_contour_is_below_the_saddle_value() {
    for t in [5.0, 20.0] {
        for z in steep_contour(SteepKind::Plus, 5.0).unwrap().sample(400) {
            assert!(re_g_at_edge(z, t) <= 1e-12, "t={t} {z}");
        }
    }
}

#[test]
fn saddle_bound_constant_is_positive_and_scales() {
    let a = lemma61_bound_check(1e2, 0.3, 6.0, 400).unwrap();
    let b = lemma61_bound_check(1e4, 0.3, 6.0, 400).unwrap();
    assert!(a.holds && b.holds);
    assert!(a.constant > 0.0 && b.constant > 0.0);
    let ratio = b.constant / a.constant;
    assert!((0.5..=2.0).contains(&ratio), "{ratio}");
    let edge = C64::i() + C64::from_polar(100f64.powf(-0.3), PI / 6.0);
    assert!(re_g_at_edge(edge, 100.0) < 0.0);
    assert!(lemma61_bound_check(1e2, 0.35, 6.0, 400).is_err());
}

#[test]
fn tau_counts() {
    assert_eq!(enumerate_tau(2, 2).unwrap().len(), 1);
    assert_eq!(enumerate_tau(2, 1).unwrap().len(), 4);
    assert_eq!(enumerate_tau(2, 0).unwrap().len(), 2);
    for n in 1..=4usize {
        // exhaustive count of maps {1..N} → {0..N} injective off 0
        let mut brute = 0;
        let total = (n + 1).pow(n as u32);
        for code in 0..total {
            let mut images = Vec::new();
            let mut c = code;
            for _ in 0..n {
                images.push(c % (n + 1));
                c /= n + 1;
            }
            if TauMap::new(images).is_ok() {
                brute += 1;
            }
        }
        let listed: usize = (0..=n).map(|z| enumerate_tau(n, z).unwrap().len()).sum();
        assert_eq!(listed, brute, "N={n}");
    }
}

#[test]
fn all_zero_tau_reduces_to_cumulative_integrand() {
    let p = params(0.8, 0.3, &[0, 2]);
    let tau = TauMap::new(vec![0, 0]).unwrap();
    let xi = [c(5.0, 2.0), c(-4.0, 3.5)];
    let zeta = [c(20.0, -7.0), c(-9.0, 25.0)];
    assert_eq!(f_factor(&xi, &zeta, &tau, p.y.sites(), p.delta).unwrap(), c(1.0, 0.0));
    let dn = dn_tau(&xi, &zeta, &tau, p.delta).unwrap();
    assert!((dn - ik_determinant(&xi, &zeta, p.delta).unwrap()).norm() <= 1e-14 * dn.norm());
    let a = tau_integrand(&p, 1, &xi, &zeta, &tau).unwrap();
    let b = full_integrand(&p, 1, &xi, &zeta).unwrap();
    assert!((a - b).norm() <= 1e-13 * b.norm());
}

#[test]
fn residue_algebra_matches_small_circle_quadrature() {
    let p = params(1.2, 0.4, &[0, 1]);
    let opts = QuadOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let xi: Vec<C64> = (0..2).map(|_| C64::from_polar(8.0, rng.gen_range(0.0..2.0 * PI))).collect();
        let zeta: Vec<C64> = (0..2).map(|_| C64::from_polar(30.0, rng.gen_range(0.0..2.0 * PI))).collect();
        for images in [vec![1, 0], vec![0, 2], vec![2, 0], vec![1, 2], vec![2, 1]] {
            let tau = TauMap::new(images.clone()).unwrap();
            let closed = tau_integrand(&p, 0, &xi, &zeta, &tau).unwrap();
            let quad = residue_by_quadrature(&p, 0, &xi, &zeta, &tau, &opts).unwrap();
            assert!((closed - quad).norm() <= 1e-8 * quad.norm().max(1e-12), "{images:?}: {closed} vs {quad}");
        }
    }
}

#[test]
fn crossed_residue_needs_inversion_sign() {
    let tau = TauMap::new(vec![2, 1]).unwrap();
    assert_eq!(printed_sign(&tau), 1.0);
    assert_eq!(residue_sign(&tau), -1.0);
    let tau = TauMap::new(vec![0, 3, 1]).unwrap();
    assert_eq!(residue_sign(&tau), -printed_sign(&tau));
}

#[test]
fn single_particle_series_is_bessel_law() {
    let opts = QuadOptions::default();
    for (delta, t, y, x) in [(1.0, 0.3, 2, 1), (-0.6, 0.5, 0, 0), (1.4, 0.4, 1, 2)] {
        let p = params(delta, t, &[y]);
        let r = theorem4_sum(&p, x, &opts).unwrap();
        let law: f64 = (x - y..60).map(|k| bessel_j(k, 2.0 * t).unwrap().powi(2)).sum();
        assert!((r.value - law).abs() < 1e-8, "{} vs {law}", r.value);
        assert_eq!(r.terms.len(), 2);
    }
}

#[test]
fn zero_time_series_is_one_left_of_the_particles() {
    let p = params(0.9, 0.0, &[0, 1]);
    let r = theorem4_sum(&p, -1, &QuadOptions::default()).unwrap();
    assert!((r.value - 1.0).abs() < 1e-9, "{}", r.value);
}

#[test]
fn two_particle_series_matches_contour_cumulative() {
    let opts = QuadOptions::default();
    let p = params(1.0, 0.4, &[0, 1]);
    let r = theorem4_sum(&p, 0, &opts).unwrap();
    let direct = prob_leftmost_geq(&p, 0, &opts).unwrap().value;
    assert!((r.value - direct).abs() < 1e-6, "{} vs {direct}", r.value);
    assert_eq!(r.terms.len(), 7);
}

#[test]
fn series_guards() {
    let opts = QuadOptions::default();
    assert!(theorem4_sum(&params(1.0, 0.8, &[0]), 0, &opts).is_err());
    assert!(theorem4_sum(&params(0.2, 0.3, &[0]), 0, &opts).is_err());
    assert!(theorem4_sum(&params(1.0, 0.3, &[0, 1, 2]), 0, &opts).is_err());
    assert!(series_radii(0.0).is_err());
    let r = series_radii(1.5).unwrap();
    assert!((r.r - 8.8).abs() < 1e-12 && (r.r_prime - 33.6).abs() < 1e-12);
}

#[test]
fn non_injective_terms_vanish() {
    let p = params(1.5, 0.4, &[0, 1]);
    let e = expansion_term(&p, 0, &[1, 1], 32).unwrap();
    assert!(e.value.norm() < 1e-9, "{e:?}");
    assert!(e.magnitude > 1e-3);
}

#[test]
fn steep_contours_reproduce_single_particle_series() {
    let p = params(1.5, 0.3, &[2]);
    let r = lemma75_check(&p, 1, &QuadOptions::default()).unwrap();
    assert!(r.difference < 1e-7, "{r:?}");
}

#[test]
fn edge_ratio_is_the_pair_factor_limit() {
    let delta = 0.7;
    let u = c(2.5, -1.0);
    let mut prev = f64::INFINITY;
    for t in [1e2, 1e4, 1e6] {
        let w = C64::i() * (1.0 + c(0.3, 0.2) * f64::powf(t, -1.0 / 3.0));
        let factor = (1.0 + u * w - 2.0 * delta * w) / (1.0 + u * w - 2.0 * delta * u);
        let err = (factor - edge_ratio(u, delta)).norm();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-2);
}

#[test]
fn edge_approximation_rates() {
    let xt = [c(0.3, 0.1), c(-0.4, 0.2), c(0.1, -0.5)];
    let zt = [c(-0.2, 0.4), c(0.5, -0.3), c(0.7, 0.6)];
    let xf = [c(3.0, 0.5), c(-2.0, 1.5), c(1.0, -2.5)];
    for delta in [0.7, -0.9] {
        for images in [vec![0, 1], vec![2, 0], vec![0, 3, 1], vec![2, 3, 0]] {
            let n = images.len();
            let y: Vec<i64> = (0..n as i64).map(|k| 2 * k - 1).collect();
            let tau = TauMap::new(images.clone()).unwrap();
            let r = appendix_b_rate_check(&tau, &y, delta, &xt[..n], &zt[..n], &xf[..n], &[1e2, 1e3, 1e4]).unwrap();
            assert!(r.within, "{images:?}: {r:?}");
            assert!(r.f_rate.is_finite() && r.d_rate.is_finite());
        }
    }
}

#[test]
fn d_weight_edge_scaling() {
    let delta = 1.1;
    let (a, b) = (c(0.3, -0.2), c(-0.5, 0.4));
    let lead = 1.0 / ((b - a) * (-2.0 * delta));
    let err = |t: f64| {
        let e = t.powf(-1.0 / 3.0);
        let xi = C64::i() + C64::i() * a * e;
        let zeta = -C64::i() + C64::i() * b * e;
        (d_weight(xi, zeta, delta).unwrap() * e - lead).norm()
    };
    let ratio = err(1e2) / err(1e4);
    let expected = 100f64.cbrt();
    assert!(ratio > expected / 2.0 && ratio < 2.0 * expected, "{ratio}");
}

#[test]
fn nu_counts_vanish_for_identity() {
    let ss = SigmaSubset::new(vec![0, 1, 2], vec![false; 3]).unwrap();
    for j in 0..3 {
        assert_eq!(nu_counts(&ss, j), Some((0, 0, 0)));
    }
    let ss = SigmaSubset::new(vec![2, 0, 1], vec![false, true, false]).unwrap();
    assert_eq!(nu_counts(&ss, 1), None);
    // S^c = {0, 2} with σ(0) = 2 > σ(2) = 1
    assert_eq!(nu_counts(&ss, 0), Some((0, 1, -1)));
    assert_eq!(nu_counts(&ss, 2), Some((1, 0, 0)));
    let xi = [c(0.2, 1.1), c(1.5, -0.3), c(-0.7, 0.9)];
    let b = b_factor(&xi, &ss, 0.6).unwrap();
    let expected = (1.0 + xi[1] * xi[2] - 1.2 * xi[2]) / (1.0 + xi[1] * xi[2] - 1.2 * xi[1]);
    assert!((b - expected).norm() < 1e-14);
    assert!(SigmaSubset::new(vec![0, 0], vec![false; 2]).is_err());
}

#[test]
fn f_is_one_for_empty_complement() {
    let y = config(&[0, 1, 3]);
    let ss = SigmaSubset::new(vec![0, 1, 2], vec![true; 3]).unwrap();
    assert_eq!(f_of(&ss, 0.7, &y).unwrap().value, c(1.0, 0.0));
}

#[test]
fn signed_sum_of_f_is_one() {
    for (delta, y) in [(0.7, vec![0]), (-0.9, vec![0, 2]), (1.5, vec![-1, 0]), (0.7, vec![0, 1, 2])] {
        let r = sign_sum_f_empty(delta, &config(&y)).unwrap();
        assert!((r.value - 1.0).norm() < 1e-8, "Δ={delta} y={y:?}: {r:?}");
    }
}

#[test]
fn free_fermion_f_is_an_indicator() {
    let y = config(&[0, 1, 3]);
    for perm in [vec![0, 1, 2], vec![1, 0, 2], vec![0, 2, 1], vec![2, 0, 1]] {
        for mask in 0..8u32 {
            let in_s: Vec<bool> = (0..3).map(|j| mask & (1 << j) != 0).collect();
            let ss = SigmaSubset::new(perm.clone(), in_s.clone()).unwrap();
            let identity = (0..3).all(|j| in_s[j] || perm[j] == j);
            let f = f_of(&ss, 0.0, &y).unwrap().value;
            let expected = if identity { 1.0 } else { 0.0 };
            assert!((f - expected).norm() < 1e-9, "{perm:?} {in_s:?}: {f}");
        }
    }
}

#[test]
fn free_fermion_partial_sum_is_the_finite_determinant() {
    for (y, s, t) in [(vec![0, 1, 2], -0.5, 50.0), (vec![-1, 2, 3], 0.3, 1e3), (vec![1, 4], -1.0, 8.0)] {
        let r = conjecture_partial_sum(0.0, &config(&y), s, t).unwrap();
        assert!((r.value - r.free_determinant).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn free_determinant_approaches_f2() {
    let y = ParticleConfig::step(30).unwrap();
    let d = free_edge_determinant(&y, 0.0, 1e4).unwrap();
    let f2 = f2_estimate(0.0).unwrap().value;
    assert!((d - f2).abs() < 5e-2, "{d} vs {f2}");
}

#[test]
fn partial_sum_is_limited_to_three_particles() {
    assert!(conjecture_partial_sum(0.0, &config(&[0, 1, 2, 3]), 0.0, 10.0).is_err());
}
