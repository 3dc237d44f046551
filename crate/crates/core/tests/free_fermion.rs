use xxz_core::freefermion::*;
use xxz_core::numerics::QuadOptions;
use xxz_core::onepoint::theorem2_table;
use xxz_core::special::{bessel_i, bessel_j};
use xxz_core::{ModelParams, ParticleConfig};

fn lis(perm: &[usize]) -> usize {
    let mut tails: Vec<usize> = Vec::new();
    for &v in perm {
        match tails.binary_search(&v) {
            Ok(_) => {}
            Err(p) if p == tails.len() => tails.push(v),
            Err(p) => tails[p] = v,
        }
    }
    tails.len()
}

/// Counts of permutations of size k by LIS length, by enumeration.
fn lis_counts(k: usize) -> Vec<u64> {
    let mut counts = vec![0u64; k + 1];
    let mut perm: Vec<usize> = (0..k).collect();
    loop {
        counts[lis(&perm)] += 1;
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| perm[i - 1] < perm[i]) else { break };
        let j = (i..k).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
    if k == 0 {
        counts[0] = 1;
    }
    counts
}

/// ℙ(𝓛(t) ≤ n) = e^{−t²} Σ_k (t^{2k}/k!) · #{σ ∈ S_k : LIS(σ) ≤ n}/k!.
fn poissonized_lis_cdf(t: f64, n: usize, k_max: usize) -> f64 {
    let mut total = 0.0;
    let mut fact = 1.0;
    for k in 0..=k_max {
        if k > 0 {
            fact *= k as f64;
        }
        let counts = lis_counts(k);
        let good: u64 = counts.iter().take(n + 1).sum();
        total += t.powi(2 * k as i32) / (fact * fact) * good as f64;
    }
    (-t * t).exp() * total
}

#[test]
fn lis_counts_are_sane() {
    assert_eq!(lis_counts(3), vec![0, 1, 4, 1]);
    assert_eq!(lis_counts(4).iter().sum::<u64>(), 24);
    // Permutations of 5 avoiding an increasing subsequence of length 3: Catalan(5).
    assert_eq!(lis_counts(5)[..3].iter().sum::<u64>(), 42);
}

#[test]
fn kernel_is_symmetric_and_matches_direct_sum() {
    let k = discrete_bessel_kernel(0, 1.0, 12).unwrap();
    assert!(k.max_asymmetry() < 1e-14);
    let direct = discrete_bessel_direct(0, 1.0, 0, 1, 60).unwrap();
    assert!((k.get(0, 1) - direct).abs() < 1e-12);
    // Orders start at 2 − x, so at x = 0 L(0,1) pairs J_{2+n} with J_{3+n}.
    let by_hand: f64 = (0..60).map(|n| bessel_j(n + 2, 2.0).unwrap() * bessel_j(n + 3, 2.0).unwrap()).sum();
    assert!((direct - by_hand).abs() < 1e-15);
    for j in 0..6 {
        for l in 0..6 {
            if j != l {
                let d = discrete_bessel_direct(-2, 1.5, j, l, 80).unwrap();
                let q = discrete_bessel_kernel(-2, 1.5, 6).unwrap().get(j, l);
                assert!((d - q).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn boiden_endpoints() {
    let one = bessel_fredholm_det(1, 1.0).unwrap();
    assert!((one.value - (-1.0f64).exp()).abs() < 1e-10);
    let zero = bessel_fredholm_det(0, 1.0).unwrap();
    let rhs = (-1.0f64).exp() * bessel_i(0, 2.0).unwrap();
    assert!((zero.value - rhs).abs() < 1e-10);
    assert!((toeplitz_rhs(0, 1.0).unwrap() - rhs).abs() < 1e-14);
}

#[test]
fn boiden_identity_on_grid() {
    for &t in &[0.5, 1.0, 2.0, 3.0] {
        for x in -6..=1 {
            let lhs = bessel_fredholm_det(x, t).unwrap().value;
            let rhs = toeplitz_rhs(x, t).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "t={t} x={x}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn poissonized_lis_matches_toeplitz() {
    for &t in &[0.3, 0.6, 0.8] {
        for n in 0..=3usize {
            let comb = poissonized_lis_cdf(t, n, 9);
            let toep = toeplitz_rhs(1 - n as i64, t).unwrap();
            assert!((comb - toep).abs() < 1e-8, "t={t} n={n}: {comb} vs {toep}");
        }
    }
}

#[test]
fn kdet_zero_time() {
    for x in -3..=1 {
        let d = kdet(0.0, x, 4, &QuadOptions::default()).unwrap();
        assert!((d.value - 1.0).abs() < 1e-10, "x={x}: {d:?}");
    }
}

#[test]
fn kdet_matches_contour_cumulative_at_zero_anisotropy() {
    let p = ModelParams::new(0.0, 0.5, ParticleConfig::step(2).unwrap()).unwrap();
    let f = theorem2_table(&p, 0, 0, &QuadOptions::default()).unwrap().entries[0].value;
    let k = kdet(0.5, 0, 2, &QuadOptions::default()).unwrap().value;
    assert!((f - k).abs() < 1e-8, "{f} vs {k}");
}

#[test]
fn kdet_stabilises_to_fredholm_determinant() {
    for x in [-2, 0, 1] {
        let k = kdet(1.0, x, 30, &QuadOptions::default()).unwrap().value;
        let l = bessel_fredholm_det(x, 1.0).unwrap().value;
        assert!((k - l).abs() < 1e-8, "x={x}: {k} vs {l}");
    }
    let above = kdet(1.0, 2, 30, &QuadOptions::default()).unwrap().value;
    assert!(above.abs() < 1e-8, "x=2: {above}");
}

#[test]
fn f2_known_values() {
    let f0 = f2_estimate(0.0).unwrap();
    assert!((f0.value - 0.969_372_828_355_5).abs() < 1e-8, "{f0:?}");
    let fm2 = f2_estimate(-2.0).unwrap();
    assert!((fm2.value - 0.413_224_142_505).abs() < 1e-8, "{fm2:?}");
    assert!((f2_estimate(8.0).unwrap().value - 1.0).abs() < 1e-8);
    let refined = f2_with_nodes(0.0, 120).unwrap();
    assert!((refined - f0.value).abs() < 1e-8);
    let mut last = 0.0;
    for s in [-6.0, -4.0, -3.0, -1.0, 1.0, 2.0] {
        let v = f2_estimate(s).unwrap().value;
        assert!(v > last);
        last = v;
    }
}
