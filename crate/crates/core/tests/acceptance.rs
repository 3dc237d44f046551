//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xxz_core::bethe::{all_permutations, psi1_closed_form, wavefunction, wavefunction_table, wavefunction_table_kind, ContourKind};
use xxz_core::deformation::{
    appendix_b_rate_check, conjecture_partial_sum, expansion_term, f_of, lemma61_bound_check, lemma75_check,
    sign_sum_f_empty, theorem4_sum, SigmaSubset, TauMap,
};
use xxz_core::ed::LatticeWindow;
use xxz_core::freefermion::{bessel_fredholm_det, edge_probability, f2_estimate, kdet, toeplitz_rhs};
use xxz_core::ikccp::{ccp_check, idenu_check, q2_closed_form, q_poly_value};
use xxz_core::numerics::QuadOptions;
use xxz_core::onepoint::{brute_force_table, oracle_table, prob_leftmost_geq, theorem2_table, travel_bound};
use xxz_core::{ModelParams, ParticleConfig, Result, C64};

const KINDS: [ContourKind; 2] = [ContourKind::Small, ContourKind::Large];

fn params(delta: f64, t: f64, y: &[i64]) -> ModelParams {
    ModelParams::new(delta, t, ParticleConfig::new(y.to_vec()).unwrap()).unwrap()
}

fn opts() -> QuadOptions {
    QuadOptions::default()
}

/// Largest error seen against a tolerance.
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Self { value: 0.0, at: String::new() }
    }

    fn see(&mut self, err: f64, at: impl FnOnce() -> String) {
        if !(err <= self.value) {
            self.value = err;
            self.at = at();
        }
    }

    fn within(&self, tol: f64) -> bool {
        self.value <= tol
    }

    fn show(&self) -> String {
        format!("max err {:.2e} ({})", self.value, self.at)
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<C64> {
    (0..n)
        .map(|_| C64::from_polar(radius * rng.gen_range(0.2..1.0), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect()
}

/// Window wide enough that the mass outside it is below 1e-13 per particle.
fn covering_window(y: &[i64], t: f64) -> LatticeWindow {
    let w = travel_bound(t, 1e-13);
    LatticeWindow::new(y[0] - w, y[y.len() - 1] + w + y.len() as i64).unwrap()
}

fn initial_condition() -> Result<(bool, String)> {
    let mut worst = Worst::new();
    for y in [vec![0], vec![0, 2], vec![-1, 0, 2]] {
        let p = params(0.6, 0.0, &y);
        for kind in KINDS {
            let tab = wavefunction_table_kind(&p, LatticeWindow::new(y[0] - 3, y[y.len() - 1] + 3)?, kind, &opts())?;
            for (s, v) in tab.states.iter().zip(&tab.values) {
                let expect = if *s == y { 1.0 } else { 0.0 };
                worst.see((v - expect).norm(), || format!("Y={y:?} X={s:?} {kind:?}"));
            }
        }
    }
    Ok((worst.within(1e-10), worst.show()))
}

fn single_particle_closed_form() -> Result<(bool, String)> {
    let mut worst = Worst::new();
    let y = 1;
    for delta in [-1.0, 0.0, 0.7] {
        for t in [0.5, 1.0] {
            let p = params(delta, t, &[y]);
            for x in y - 12..=y + 12 {
                let exact = psi1_closed_form(delta, t, x, y)?;
                for kind in KINDS {
                    let v = wavefunction(&p, &ParticleConfig::new(vec![x])?, kind, &opts())?.value;
                    worst.see((v - exact).norm(), || format!("Δ={delta} t={t} x={x} {kind:?}"));
                }
            }
        }
    }
    Ok((worst.within(1e-10), worst.show()))
}

fn single_particle_moments() -> Result<(bool, String)> {
    let mut worst = Worst::new();
    let mut lines = Vec::new();
    for t in [0.5f64, 1.0] {
        let p = params(0.3, t, &[0]);
        let tab = wavefunction_table(&p, covering_window(&[0], t), &opts())?;
        let moment = |k: i32| -> f64 { tab.states.iter().zip(&tab.values).map(|(s, v)| (s[0] as f64).powi(k) * v.norm_sqr()).sum() };
        let (m1, m2, m4) = (moment(1), moment(2), moment(4));
        worst.see(m1.abs(), || format!("first moment t={t}"));
        worst.see((m2 - t).abs(), || format!("second moment t={t}"));
        worst.see((m4 - (t * t + 3.0 * t.powi(4))).abs(), || format!("fourth moment t={t}"));
        lines.push(format!(
            "t={t}: Σx|ψ|²={m1:.1e} Σx²|ψ|²={m2:.10} (target {t}, 2t²={}) Σx⁴|ψ|²={m4:.10} (target {}, 2t²+6t⁴={})",
            2.0 * t * t,
            t * t + 3.0 * t.powi(4),
            2.0 * t * t + 6.0 * t.powi(4)
        ));
    }
    Ok((worst.within(1e-8), format!("{}; {}", worst.show(), lines.join("; "))))
}

fn unitarity() -> Result<(bool, String)> {
    let mut worst = Worst::new();
    for delta in [-1.0, 0.0, 0.7] {
        for (y, t) in [(vec![0, 1], 1.0), (vec![0, 2], 0.5), (vec![0, 1, 2], 1.0), (vec![0, 2, 3], 0.6)] {
            let p = params(delta, t, &y);
            let tab = wavefunction_table(&p, covering_window(&y, t), &opts())?;
            worst.see((tab.norm_sqr() - 1.0).abs(), || format!("Δ={delta} Y={y:?} t={t}"));
        }
    }
    Ok((worst.within(1e-8), worst.show()))
}

fn ccp_identities() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = Worst::new();
    for n in 1..=4 {
        for delta in [-1.0, -0.3, 0.5, 2.0] {
            for _ in 0..20 {
                let xi = random_points(&mut rng, n, 0.8);
                let zeta = random_points(&mut rng, n, 0.8);
                let a = ccp_check(delta, &xi, &zeta)?.relative_error;
                let b = idenu_check(delta, &xi, &zeta)?.relative_error;
                worst.see(a.max(b), || format!("N={n} Δ={delta}"));
            }
        }
    }
    Ok((worst.within(1e-9), worst.show()))
}

fn q_polynomial() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let mut q2 = Worst::new();
    for _ in 0..10 {
        let delta = rng.gen_range(-2.0..2.0);
        let xi = random_points(&mut rng, 2, 1.5);
        let zeta = random_points(&mut rng, 2, 1.5);
        let q = q_poly_value(&xi, &zeta, delta)?;
        let e = q2_closed_form([xi[0], xi[1]], [zeta[0], zeta[1]], delta);
        q2.see((q - e).norm() / e.norm().max(1.0), || format!("Δ={delta:.3}"));
    }

    let mut sym = Worst::new();
    let mut degree = Worst::new();
    for n in 2..=4 {
        let delta = 0.45;
        let xi = random_points(&mut rng, n, 0.9);
        let zeta = random_points(&mut rng, n, 0.9);
        let base = q_poly_value(&xi, &zeta, delta)?;
        for p in all_permutations(n) {
            let xs: Vec<C64> = p.perm.iter().map(|&i| xi[i]).collect();
            let zs: Vec<C64> = p.perm.iter().map(|&i| zeta[i]).collect();
            let a = q_poly_value(&xs, &zeta, delta)?;
            let b = q_poly_value(&xi, &zs, delta)?;
            sym.see(((a - base).norm().max((b - base).norm())) / base.norm(), || format!("N={n} σ={:?}", p.perm));
        }
        // degree ≤ N − 1 in ξ₁: the N-th forward difference vanishes
        let h = C64::new(0.11, 0.05);
        let mut vals = Vec::new();
        let mut moved = xi.clone();
        for k in 0..=n {
            moved[0] = xi[0] + h * k as f64;
            vals.push(q_poly_value(&moved, &zeta, delta)?);
        }
        let mut diff = vals.clone();
        for _ in 0..n {
            diff = diff.windows(2).map(|w| w[1] - w[0]).collect();
        }
        let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        degree.see(diff[0].norm() / scale, || format!("N={n}"));
    }
    let ok = q2.within(1e-12) && sym.within(1e-10) && degree.within(1e-9);
    Ok((ok, format!("Q₂ {}; symmetry {}; degree {}", q2.show(), sym.show(), degree.show())))
}

fn three_routes() -> Result<(bool, String)> {
    let mut worst = Worst::new();
    for y in [vec![1], vec![1, 2]] {
        for delta in [-0.8, 0.5] {
            for t in [0.4, 0.8] {
                let p = params(delta, t, &y);
                let (lo, hi) = (y[0] - 6, y[0] + 2);
                let f = theorem2_table(&p, lo, hi + 1, &opts())?;
                let brute = brute_force_table(&p, lo, hi, &opts())?;
                let oracle = oracle_table(&p, lo, hi)?;
                for (k, (b, o)) in brute.entries.iter().zip(&oracle.entries).enumerate() {
                    let th2 = f.entries[k].value - f.entries[k + 1].value;
                    let err = (th2 - b.value).abs().max((th2 - o.value).abs()).max((b.value - o.value).abs());
                    worst.see(err, || format!("N={} Δ={delta} t={t} x={}", y.len(), b.x));
                }
            }
        }
    }
    Ok((worst.within(1e-6), worst.show()))
}

fn series_and_contours() -> Result<(bool, String)> {
    let mut series = Worst::new();
    let cases: [(f64, f64, &[i64], i64); 6] = [
        (0.5, 0.5, &[0], -1),
        (-1.5, 0.3, &[0], 1),
        (1.0, 0.4, &[0], 0),
        (1.0, 0.4, &[0, 1], 0),
        (-0.5, 0.5, &[0, 1], -1),
        (1.5, 0.3, &[0, 2], 1),
    ];
    for (delta, t, y, x) in cases {
        let p = params(delta, t, y);
        let r = theorem4_sum(&p, x, &opts())?;
        let direct = prob_leftmost_geq(&p, x, &opts())?.value;
        series.see((r.value - direct).abs(), || format!("Δ={delta} t={t} Y={y:?} x={x}"));
    }
    let mut vanishing = Worst::new();
    for (delta, images) in [(1.5, [1, 1]), (-1.0, [2, 2]), (0.7, [1, 1])] {
        let p = params(delta, 0.4, &[0, 1]);
        let e = expansion_term(&p, 0, &images, 32)?;
        vanishing.see(e.value.norm(), || format!("Δ={delta} τ={images:?}"));
    }
    let mut steep = Worst::new();
    for (delta, t, y, x) in [(1.5, 0.3, 2, 1), (-1.0, 0.4, 0, 0)] {
        let r = lemma75_check(&params(delta, t, &[y]), x, &opts())?;
        steep.see(r.difference, || format!("Δ={delta} t={t} x={x}"));
    }
    let ok = series.within(1e-6) && vanishing.within(1e-9) && steep.within(1e-7);
    Ok((ok, format!("series {}; non-injective {}; steep {}", series.show(), vanishing.show(), steep.show())))
}

/// Longest increasing subsequence by patience sorting.
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

/// e^{−t²} Σ_k t^{2k}/k!² · #{σ ∈ S_k : LIS(σ) ≤ n}, by enumeration up to k_max.
fn poissonized_lis_cdf(t: f64, n: usize, k_max: usize) -> f64 {
    let mut total = 0.0;
    let mut fact = 1.0;
    for k in 0..=k_max {
        if k > 0 {
            fact *= k as f64;
        }
        let mut perm: Vec<usize> = (0..k).collect();
        let mut good = 0u64;
        loop {
            if lis(&perm) <= n {
                good += 1;
            }
            let Some(i) = (1..k).rev().find(|&i| perm[i - 1] < perm[i]) else { break };
            let j = (i..k).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
            perm.swap(i - 1, j);
            perm[i..].reverse();
        }
        total += t.powi(2 * k as i32) / (fact * fact) * good as f64;
    }
    (-t * t).exp() * total
}

fn free_fermion_identities() -> Result<(bool, String)> {
    let mut boiden = Worst::new();
    for t in [0.5, 1.0, 2.0, 3.0] {
        for x in -6..=1 {
            let d = bessel_fredholm_det(x, t)?.value;
            boiden.see((d - toeplitz_rhs(x, t)?).abs(), || format!("t={t} x={x}"));
        }
    }
    let mut kd = Worst::new();
    for x in [-3, -1, 0, 1] {
        let k = kdet(1.0, x, 30, &opts())?.value;
        let l = bessel_fredholm_det(x, 1.0)?.value;
        kd.see((k - l).abs(), || format!("t=1 x={x}"));
    }
    let above = kdet(1.0, 2, 30, &opts())?.value;
    kd.see(above.abs(), || "t=1 x=2 (zero)".into());
    let mut comb = Worst::new();
    for t in [0.3, 0.6, 0.8] {
        for n in 0..=3usize {
            let d = bessel_fredholm_det(1 - n as i64, t)?.value;
            comb.see((poissonized_lis_cdf(t, n, 9) - d).abs(), || format!("t={t} LIS≤{n}"));
        }
    }
    let ok = boiden.within(1e-10) && kd.within(1e-8) && comb.within(1e-8);
    Ok((ok, format!("Toeplitz {}; K_30 {}; LIS {}", boiden.show(), kd.show(), comb.show())))
}

fn edge_limit() -> Result<(bool, String)> {
    let mut gap = Worst::new();
    let mut nodes = Worst::new();
    let mut each = Vec::new();
    for y in [-1.0, 0.0, 1.0, 2.0] {
        let p = edge_probability(100.0, y)?.value;
        let f = f2_estimate(y)?;
        gap.see((p - f.value).abs(), || format!("y={y}"));
        nodes.see(f.error, || format!("y={y}"));
        each.push(format!("y={y}: {p:.5} vs {:.5}", f.value));
    }
    let ok = gap.within(0.01) && nodes.within(1e-8);
    Ok((ok, format!("edge {} [{}]; F₂ node doubling {}", gap.show(), each.join(", "), nodes.show())))
}

fn f_identities() -> Result<(bool, String)> {
    let mut sums = Worst::new();
    for (delta, y) in [(0.7, vec![0]), (-0.9, vec![0, 2]), (1.5, vec![-1, 0]), (0.7, vec![0, 1, 2]), (-0.6, vec![0, 2, 3])] {
        let r = sign_sum_f_empty(delta, &ParticleConfig::new(y.clone())?)?;
        sums.see((r.value - 1.0).norm(), || format!("Δ={delta} Y={y:?}"));
    }
    let mut indicator = Worst::new();
    let y = ParticleConfig::new(vec![0, 1, 3])?;
    for p in all_permutations(3) {
        for mask in 0..8u32 {
            let in_s: Vec<bool> = (0..3).map(|j| mask & (1 << j) != 0).collect();
            let identity = (0..3).all(|j| in_s[j] || p.perm[j] == j);
            let f = f_of(&SigmaSubset::new(p.perm.clone(), in_s.clone())?, 0.0, &y)?.value;
            let expect = if identity { 1.0 } else { 0.0 };
            indicator.see((f - expect).norm(), || format!("σ={:?} S={in_s:?}", p.perm));
        }
    }
    let mut partial = Worst::new();
    for (y, s, t) in [(vec![0, 1, 2], -0.5, 50.0), (vec![-1, 2, 3], 0.3, 1e3), (vec![1, 4], -1.0, 8.0)] {
        let r = conjecture_partial_sum(0.0, &ParticleConfig::new(y.clone())?, s, t)?;
        partial.see((r.value - r.free_determinant).abs(), || format!("Y={y:?} s={s} t={t}"));
    }
    let ok = sums.within(1e-8) && indicator.within(1e-9) && partial.within(1e-9);
    Ok((ok, format!("signed sums {}; Δ=0 indicator {}; partial sums {}", sums.show(), indicator.show(), partial.show())))
}

fn saddle_bound() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for t in [1e2, 1e4] {
        let r = lemma61_bound_check(t, 0.3, 6.0, 400)?;
        ok &= r.max_on_contour <= 1e-12 && r.constant > 0.0 && r.holds;
        parts.push(format!("t={t:e}: max Re(G−G(i)) on Γ₊ {:.2e}, constant {:.3e}", r.max_on_contour, r.constant));
    }
    Ok((ok, parts.join("; ")))
}

fn edge_rates() -> Result<(bool, String)> {
    let xt = [C64::new(0.3, 0.1), C64::new(-0.4, 0.2), C64::new(0.1, -0.5)];
    let zt = [C64::new(-0.2, 0.4), C64::new(0.5, -0.3), C64::new(0.7, 0.6)];
    let xf = [C64::new(3.0, 0.5), C64::new(-2.0, 1.5), C64::new(1.0, -2.5)];
    let mut ok = true;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for delta in [0.7, -0.9] {
        for images in [vec![0, 1], vec![2, 0], vec![0, 3, 1], vec![2, 3, 0]] {
            let n = images.len();
            let y: Vec<i64> = (0..n as i64).map(|k| 2 * k - 1).collect();
            let r = appendix_b_rate_check(&TauMap::new(images)?, &y, delta, &xt[..n], &zt[..n], &xf[..n], &[1e2, 1e3, 1e4])?;
            ok &= r.within;
            for v in r.f_steps.iter().chain([&r.f_rate]).filter(|v| v.is_finite()) {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
    }
    Ok((ok, format!("normalised f-error rates in [{lo:.3}, {hi:.3}]")))
}

type Criterion = fn() -> Result<(bool, String)>;

fn main() {
    let criteria: [(&str, Criterion); 13] = [
        ("initial condition", initial_condition),
        ("N=1 closed form", single_particle_closed_form),
        ("N=1 moments", single_particle_moments),
        ("unitarity", unitarity),
        ("CCP and U-form identities", ccp_identities),
        ("Q polynomial", q_polynomial),
        ("three-route left-most particle", three_routes),
        ("deformed series and contours", series_and_contours),
        ("Δ=0 determinant identities", free_fermion_identities),
        ("F₂ edge limit", edge_limit),
        ("F(σ,S) identities", f_identities),
        ("saddle-point bound", saddle_bound),
        ("edge approximation rates", edge_rates),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("{verdict} {:>2} {name} [{:.1}s]: {detail}", k + 1, start.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
