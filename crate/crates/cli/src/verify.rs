//! The identity suite behind `xxz verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use xxz_core::deformation::{appendix_b_rate_check, lemma61_bound_check, sign_sum_f_empty, TauMap};
use xxz_core::freefermion::{bessel_fredholm_det, toeplitz_rhs};
use xxz_core::ikccp::{ccp_check, idenu_check, q2_closed_form, q_poly_value};
use xxz_core::{ParticleConfig, Result, C64};

#[derive(Debug, Clone, Serialize)]
pub struct IdentityResult {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

struct Check {
    name: &'static str,
    tolerance: f64,
    cases: usize,
    max_error: f64,
    failure: Option<String>,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, cases: 0, max_error: 0.0, failure: None }
    }

    fn record(&mut self, result: Result<f64>) {
        self.cases += 1;
        match result {
            Ok(e) if e.is_finite() => self.max_error = self.max_error.max(e),
            Ok(e) => self.failure = Some(format!("non-finite error {e}")),
            Err(e) => self.failure = Some(e.to_string()),
        }
    }

    fn finish(self) -> IdentityResult {
        let passed = self.failure.is_none() && self.max_error <= self.tolerance;
        IdentityResult {
            name: self.name,
            cases: self.cases,
            max_error: self.max_error,
            tolerance: self.tolerance,
            passed,
            failure: self.failure,
        }
    }
}

fn points(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<C64> {
    (0..n)
        .map(|_| C64::from_polar(radius * rng.gen_range(0.2..1.0), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect()
}

/// Runs the default matrix with random points drawn from `seed`.
pub fn run_suite(seed: u64) -> Vec<IdentityResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deltas = [-1.0, -0.3, 0.5, 2.0];
    let mut out = Vec::new();

    let mut ccp = Check::new("ccp", 1e-9);
    let mut idenu = Check::new("idenU", 1e-9);
    for n in 1..=4 {
        for &delta in &deltas {
            for _ in 0..5 {
                let (xi, zeta) = (points(&mut rng, n, 0.8), points(&mut rng, n, 0.8));
                ccp.record(ccp_check(delta, &xi, &zeta).map(|r| r.relative_error));
                idenu.record(idenu_check(delta, &xi, &zeta).map(|r| r.relative_error));
            }
        }
    }
    out.push(ccp.finish());
    out.push(idenu.finish());

    let mut q2 = Check::new("q2_closed_form", 1e-12);
    for _ in 0..10 {
        let delta = rng.gen_range(-2.0..2.0);
        let (xi, zeta) = (points(&mut rng, 2, 1.5), points(&mut rng, 2, 1.5));
        q2.record(q_poly_value(&xi, &zeta, delta).map(|q| {
            let e = q2_closed_form([xi[0], xi[1]], [zeta[0], zeta[1]], delta);
            (q - e).norm() / e.norm().max(1.0)
        }));
    }
    out.push(q2.finish());

    let mut boiden = Check::new("boiden", 1e-10);
    for t in [0.5, 1.0, 2.0, 3.0] {
        for x in -6..=1 {
            boiden.record(bessel_fredholm_det(x, t).and_then(|d| Ok((d.value - toeplitz_rhs(x, t)?).abs())));
        }
    }
    out.push(boiden.finish());

    let mut fsum = Check::new("signed_f_sum", 1e-8);
    for (delta, y) in [(0.7, vec![0]), (-0.9, vec![0, 2]), (1.5, vec![0, 1]), (0.7, vec![0, 1, 2])] {
        let y = ParticleConfig::new(y).expect("valid sites");
        fsum.record(sign_sum_f_empty(delta, &y).map(|r| (r.value - 1.0).norm()));
    }
    out.push(fsum.finish());

    let mut l61 = Check::new("saddle_bound_sampling", 1e-12);
    for t in [1e2, 1e4] {
        l61.record(lemma61_bound_check(t, 0.3, 6.0, 400).map(|r| {
            if r.constant > 0.0 {
                r.max_on_contour.max(0.0)
            } else {
                f64::INFINITY
            }
        }));
    }
    out.push(l61.finish());

    // the deviation of the normalised rate from 1, allowed up to a factor 2
    let mut rates = Check::new("edge_rates", 1.0);
    let xt = [C64::new(0.3, 0.1), C64::new(-0.4, 0.2), C64::new(0.1, -0.5)];
    let zt = [C64::new(-0.2, 0.4), C64::new(0.5, -0.3), C64::new(0.7, 0.6)];
    let xf = [C64::new(3.0, 0.5), C64::new(-2.0, 1.5), C64::new(1.0, -2.5)];
    for delta in [0.7, -0.9] {
        for images in [vec![0, 1], vec![2, 0], vec![0, 3, 1], vec![2, 3, 0]] {
            let n = images.len();
            let y: Vec<i64> = (0..n as i64).map(|k| 2 * k - 1).collect();
            let tau = TauMap::new(images).expect("valid map");
            rates.record(appendix_b_rate_check(&tau, &y, delta, &xt[..n], &zt[..n], &xf[..n], &[1e2, 1e3, 1e4]).map(|r| {
                r.f_steps.iter().chain(&r.d_steps).chain([&r.f_rate, &r.d_rate]).filter(|v| v.is_finite()).map(|v| v.log2().abs()).fold(0.0, f64::max)
            }));
        }
    }
    out.push(rates.finish());
    out
}
