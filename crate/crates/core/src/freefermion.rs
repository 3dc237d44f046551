//! The free-fermion point Δ = 0: the K_N determinant for step initial data,
//! the discrete Bessel kernel and its Fredholm determinant, the Toeplitz
//! determinant of modified Bessel functions, and F₂ by Nyström.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{circle_nodes, det_complex, det_real, gauss_legendre, Contour, ContourCircle, QuadOptions};
use crate::special::{airy_kernel_matrix, BesselSeries};

/// Truncation size ⌈2t + 10t^{1/3} + 20⌉ for the discrete Bessel kernel.
pub fn default_size(t: f64) -> usize {
    (2.0 * t + 10.0 * t.cbrt() + 20.0).ceil() as usize
}

/// A finite section of a kernel on ℓ²({offset, offset+1, …}).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelMatrix {
    pub offset: i64,
    pub size: usize,
    /// Row-major.
    pub entries: Vec<f64>,
    /// Trace of the discarded part of the kernel.
    pub tail_bound: f64,
}

impl KernelMatrix {
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.size + k]
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.size;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in j + 1..n {
                worst = worst.max((self.get(j, k) - self.get(k, j)).abs());
            }
        }
        worst
    }
}

/// Discrete Bessel kernel L(j, k) = Σ_{n≥0} J_{j−x+2+n}(2t) J_{k−x+2+n}(2t)
/// for j, k = 0..size, i.e. on ℓ²({1−x, 2−x, …}) shifted to start at 0.
/// Off the diagonal the Christoffel–Darboux quotient is used.
pub fn discrete_bessel_kernel(x: i64, t: f64, size: usize) -> Result<KernelMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time {t} must be finite and non-negative")));
    }
    let z = 2.0 * t;
    let base = 2 - x;
    let top = base + size as i64 + z.ceil() as i64 + 80 + (20.0 * z.cbrt()).ceil() as i64;
    let lo = (base - 1).min(0);
    let series = BesselSeries::j(lo, top, z)?;
    let n = size;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            (0..n)
                .map(|k| {
                    let (nu, mu) = (base + j as i64, base + k as i64);
                    if j == k {
                        series.pair_sum(nu, nu)
                    } else {
                        let num = series.get(nu - 1) * series.get(mu) - series.get(nu) * series.get(mu - 1);
                        Ok(t * num / (j as f64 - k as f64))
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    // Σ_{j≥size} L(j, j) = Σ_{m ≥ base+size} (m − base − size + 1) J_m².
    let first = base + size as i64;
    let mut tail = 0.0;
    for m in first.max(series.n_min)..=series.n_max {
        let v = series.get(m);
        tail += (m - first + 1) as f64 * v * v;
    }
    Ok(KernelMatrix { offset: 1 - x, size: n, entries: rows.concat(), tail_bound: tail })
}

/// L(j, k) by direct summation Σ_{n=0}^{terms−1} J_{j−x+2+n} J_{k−x+2+n}.
pub fn discrete_bessel_direct(x: i64, t: f64, j: usize, k: usize, terms: usize) -> Result<f64> {
    let base = 2 - x;
    let hi = base + j.max(k) as i64 + terms as i64;
    let series = BesselSeries::j(base.min(0), hi, 2.0 * t)?;
    Ok((0..terms as i64).map(|n| series.get(base + j as i64 + n) * series.get(base + k as i64 + n)).sum())
}

/// det(I − K) for a certified truncation.
pub fn fredholm_det(kernel: &KernelMatrix) -> Result<f64> {
    if kernel.tail_bound >= 1e-12 {
        return Err(Error::Truncation(format!("kernel tail trace {:e} is not below 1e-12", kernel.tail_bound)));
    }
    let n = kernel.size;
    let mut a: Vec<f64> = kernel.entries.iter().map(|v| -v).collect();
    for i in 0..n {
        a[i * n + i] += 1.0;
    }
    det_real(&a, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetEstimate {
    pub value: f64,
    pub error: f64,
    pub size: usize,
}

/// det(I − L)_{ℓ²({1−x, 2−x, …})}: the default truncation is enlarged until
/// the tail is certified, then compared against double the size.
pub fn bessel_fredholm_det(x: i64, t: f64) -> Result<DetEstimate> {
    let mut size = default_size(t);
    let mut kernel = discrete_bessel_kernel(x, t, size)?;
    while kernel.tail_bound >= 1e-12 {
        size *= 2;
        if size > 8192 {
            return Err(Error::Truncation(format!("no certified truncation for x = {x}, t = {t}")));
        }
        kernel = discrete_bessel_kernel(x, t, size)?;
    }
    let value = fredholm_det(&kernel)?;
    let doubled = fredholm_det(&discrete_bessel_kernel(x, t, 2 * size)?)?;
    let error = (doubled - value).abs();
    if error >= 1e-10 {
        return Err(Error::Truncation(format!("doubling the truncation changed det(I − L) by {error:e}")));
    }
    Ok(DetEstimate { value: doubled, error, size: 2 * size })
}

/// e^{−t²} det(I_{j−k}(2t))_{j,k=0..−x}; the empty determinant (x = 1) is 1.
pub fn toeplitz_rhs(x: i64, t: f64) -> Result<f64> {
    if x > 1 {
        return Err(Error::InvalidInput(format!("Toeplitz form needs x ≤ 1, got {x}")));
    }
    let n = (1 - x) as usize;
    if n == 0 {
        return Ok((-t * t).exp());
    }
    let series = BesselSeries::i(0, n as i64, 2.0 * t)?;
    let mut a = Vec::with_capacity(n * n);
    for j in 0..n as i64 {
        for k in 0..n as i64 {
            a.push(series.get((j - k).abs()));
        }
    }
    Ok((-t * t).exp() * det_real(&a, n)?)
}

/// det K_N for step initial data y_j = j (j = 1..N) at Δ = 0, with
/// K_N(j, k) = ∫∫ ξ^{x−j−1} e^{−itε(ξ)} ζ^{x−k−1} e^{itε(ζ)} / (1 − ξζ) on two
/// circles of radius √q (q = |ξζ| < 1). Each entry is a product of three
/// matrices over the nodes, Φ·G·Ψᵀ.
pub fn kdet(t: f64, x: i64, n: usize, opts: &QuadOptions) -> Result<DetEstimate> {
    if n == 0 {
        return Err(Error::InvalidInput("kdet needs N ≥ 1".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time {t} must be finite and non-negative")));
    }
    // Exponents x − j − 1 reach x − N − 1 on both variables; keep the
    // growth q^{2(x−N−1)} below 10⁶.
    let lowest = (x - n as i64 - 1).min(0);
    let q = if lowest == 0 { 0.64 } else { 0.64f64.max((1e6f64.ln() / (2 * lowest) as f64).exp()) }.min(0.95);
    let rad = q.sqrt();
    let shift = (x - n as i64 - 1).unsigned_abs().max((x - 2).unsigned_abs()) as f64;
    let bandwidth = std::f64::consts::E * t / rad + shift + 40.0;
    let mut m = circle_nodes(q, bandwidth, 1e-14);
    let mut prev = kdet_at(t, x, n, rad, m)?;
    loop {
        m *= 2;
        if m > opts.max_nodes.max(1024) * 4 {
            return Err(Error::Convergence { nodes: m / 2, last: (prev, 0.0), previous: (f64::NAN, f64::NAN) });
        }
        let cur = kdet_at(t, x, n, rad, m)?;
        let err = (cur - prev).abs();
        if err <= opts.atol.max(1e-11).max(opts.rtol * cur.abs()) {
            return Ok(DetEstimate { value: cur, error: err, size: n });
        }
        prev = cur;
    }
}

fn kdet_at(t: f64, x: i64, n: usize, rad: f64, m: usize) -> Result<f64> {
    let grid = Contour::from(ContourCircle::centered(rad)?).discretize(m)?;
    let eps = |z: C64| z + z.inv();
    // Φ[j][a] = w_a ξ_a^{x−j−1} e^{−itε(ξ_a)}, Ψ[k][b] likewise with +it.
    let build = |sign: f64| -> Vec<Vec<C64>> {
        (1..=n as i64)
            .map(|j| {
                grid.nodes
                    .iter()
                    .zip(&grid.weights)
                    .map(|(&z, &w)| w * z.powi((x - j - 1) as i32) * (C64::new(0.0, -sign * t) * eps(z)).exp())
                    .collect()
            })
            .collect()
    };
    let phi = build(1.0);
    let psi = build(-1.0);
    // (G Ψᵀ)[a][k] = Σ_b Ψ[k][b] / (1 − ξ_a ζ_b)
    let gpsi: Vec<Vec<C64>> = grid
        .nodes
        .par_iter()
        .map(|&a| {
            psi.iter()
                .map(|row| grid.nodes.iter().zip(row).map(|(&b, &v)| v / (1.0 - a * b)).sum())
                .collect()
        })
        .collect();
    let mut k = Vec::with_capacity(n * n);
    for row in &phi {
        for c in 0..n {
            k.push(row.iter().zip(&gpsi).map(|(p, g)| p * g[c]).sum::<C64>());
        }
    }
    let d = det_complex(&k, n)?;
    if d.im.abs() > 1e-8 * d.norm().max(1.0) {
        return Err(Error::NonFinite(format!("det K_N has imaginary part {}", d.im)));
    }
    Ok(d.re)
}

/// The GUE edge distribution F₂(s) = det(I − K_Ai)_{L²(s, ∞)} by Gauss–Legendre Nyström on
/// [s, max(s, 0) + 12], beyond which K_Ai(x, x) < 1e-30. The value at
/// `nodes` points is checked against twice as many.
pub fn f2_with_nodes(s: f64, nodes: usize) -> Result<f64> {
    if s < -8.0 {
        return Err(Error::InvalidInput(format!("F₂ argument {s} below −8")));
    }
    let upper = s.max(0.0) + 12.0;
    let half = 0.5 * (upper - s);
    let (u, w) = gauss_legendre(nodes);
    let xs: Vec<f64> = u.iter().map(|&v| s + half * (v + 1.0)).collect();
    let sw: Vec<f64> = w.iter().map(|&v| (v * half).sqrt()).collect();
    let k = airy_kernel_matrix(&xs, &xs)?;
    let mut a = Vec::with_capacity(nodes * nodes);
    for i in 0..nodes {
        for j in 0..nodes {
            let delta = if i == j { 1.0 } else { 0.0 };
            a.push(delta - sw[i] * k[i * nodes + j] * sw[j]);
        }
    }
    det_real(&a, nodes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F2Estimate {
    pub s: f64,
    pub value: f64,
    pub error: f64,
}

/// F₂(s) at 40 nodes validated against 80 (then 160) to 1e-8.
pub fn f2_estimate(s: f64) -> Result<F2Estimate> {
    let mut n = 40;
    let mut prev = f2_with_nodes(s, n)?;
    while n < 160 {
        n *= 2;
        let cur = f2_with_nodes(s, n)?;
        let error = (cur - prev).abs();
        if error < 1e-8 {
            return Ok(F2Estimate { s, value: cur, error });
        }
        prev = cur;
    }
    Err(Error::Convergence { nodes: n, last: (prev, 0.0), previous: (f64::NAN, f64::NAN) })
}

/// ℙ(X₁(t) ≥ −2t − y t^{1/3}) for domain-wall data at Δ = 0, through
/// det(I − L) at the integer ⌈−2t − y t^{1/3}⌉.
pub fn edge_probability(t: f64, y: f64) -> Result<DetEstimate> {
    let x = (-2.0 * t - y * t.cbrt()).ceil() as i64;
    bessel_fredholm_det(x, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_kernel_vanishes() {
        let k = discrete_bessel_kernel(0, 0.0, 10).unwrap();
        assert!(k.entries.iter().all(|&v| v == 0.0));
        assert!((fredholm_det(&k).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn toeplitz_trivial_cases() {
        assert!((toeplitz_rhs(1, 1.3).unwrap() - (-1.69f64).exp()).abs() < 1e-15);
        for x in -4..=1 {
            assert!((toeplitz_rhs(x, 0.0).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!(toeplitz_rhs(2, 1.0).is_err());
    }
}
