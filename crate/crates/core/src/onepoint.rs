//! Distribution of the left-most particle: the 2N-fold contour integrals for
//! 𝒫_Y(x, 1; t) and F_N(x, t) = ℙ_Y(X₁(t) ≥ x), and the brute-force route
//! through |ψ_N|² summed over a window.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bethe::{critical_radius, dispersion_bandwidth, initial_factor, wavefunction_table, ModelParams};
use crate::ed::{LatticeWindow, OracleRun};
use crate::error::{Error, Result};
use crate::numerics::{circle_nodes, det_complex, pairwise_sum, Contour, ContourCircle, QuadOptions};

const MAX_PARTICLES: usize = 3;
/// Budget on integrand evaluations for one node count.
const MAX_EVALUATIONS: f64 = 1e9;
/// The 2N-fold sums cancel terms up to ~10⁵ in size, so absolute
/// tolerances below this are not attainable.
const ATOL_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Theorem2,
    DetRep,
    BruteForce,
    Oracle,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Theorem2 => "theorem2",
            Method::DetRep => "detRep",
            Method::BruteForce => "brute_force",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionEntry {
    pub x: i64,
    pub value: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionTable {
    pub params: ModelParams,
    pub method: Method,
    pub entries: Vec<DistributionEntry>,
}

impl DistributionTable {
    pub fn get(&self, x: i64) -> Option<&DistributionEntry> {
        self.entries.iter().find(|e| e.x == x)
    }

    /// Entries outside [−ε, 1 + ε].
    pub fn out_of_range(&self, eps: f64) -> Vec<i64> {
        self.entries.iter().filter(|e| e.value < -eps || e.value > 1.0 + eps).map(|e| e.x).collect()
    }

    /// Positions where F(x) − F(x+1) < −(tol + 2·error); only meaningful for
    /// cumulative tables.
    pub fn monotonicity_violations(&self, tol: f64) -> Vec<i64> {
        self.entries
            .windows(2)
            .filter(|w| w[0].value - w[1].value < -(tol + 2.0 * w[0].abs_error.max(w[1].abs_error)))
            .map(|w| w[0].x)
            .collect()
    }
}

/// Contour choice for the 2N-fold integrals: ζ on |ζ| = r, ξ on |ξ| = R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Radii {
    pub r: f64,
    pub big: f64,
    /// Largest trapezoid aliasing ratio among the integrand's poles.
    pub ratio: f64,
    /// Bound on the integrand modulus over the grid, which sets the
    /// roundoff floor of the sum.
    pub growth: f64,
}

const GROWTH_LIMIT: f64 = 1e10;

/// Radii for N particles at time t when the exponent Σ_j (x − y_j − 1)
/// reaches `lowest`. The product rR trades trapezoid aliasing of
/// 1/(1 − ξζ) against the growth (rR)^{lowest}, and the ratio R·ρ against
/// the ξ pair poles and the size of e^{−itε} on the circles. Among
/// R = β/ρ and rR = s on a small grid, the choice with the fewest nodes and
/// growth below 10¹⁰ is taken, or failing that the least growth.
pub fn onepoint_radii(n: usize, delta: f64, t: f64, lowest: i64) -> Result<Radii> {
    let rho = critical_radius(delta);
    let mut best: Option<(f64, Radii)> = None;
    let mut calmest: Option<Radii> = None;
    for bi in 0..=20 {
        let big = (1.1 + 0.1 * bi as f64) / rho;
        for si in 0..=12 {
            let prod = 0.3 + 0.05 * si as f64;
            let r = prod / big;
            let Ok(ratio) = aliasing_ratio(n, delta, r, big) else { continue };
            let growth = prod.powf(lowest.min(0) as f64)
                * (n as f64 * t * ((big - 1.0 / big).abs() + (1.0 / r - r).abs())).exp();
            let cand = Radii { r, big, ratio, growth };
            let nodes = (1e-10f64.ln() / ratio.ln()).max(0.5 * std::f64::consts::E * t * big.max(1.0 / r));
            if growth <= GROWTH_LIMIT && best.map_or(true, |(m, _)| nodes < m) {
                best = Some((nodes, cand));
            }
            if calmest.map_or(true, |c| growth < c.growth) {
                calmest = Some(cand);
            }
        }
    }
    best.map(|(_, c)| c)
        .or(calmest)
        .ok_or_else(|| Error::InvalidInput(format!("no admissible contour radii for Δ = {delta}")))
}

/// Largest aliasing ratio among the poles of the cumulative integrand.
fn aliasing_ratio(n: usize, delta: f64, r: f64, big: f64) -> Result<f64> {
    let a = 2.0 * delta.abs();
    let mut q = r * big;
    if n > 1 {
        q = q.max((a + 1.0 / big) / big).max(1.0 / (big * (big - a).max(1e-300))).max(r * (r + a));
    }
    if !(q < 1.0) || r * big >= 1.0 {
        return Err(Error::InvalidInput(format!("contour radii r = {r}, R = {big} violate the pole constraints")));
    }
    Ok(q)
}

fn check(params: &ModelParams, x_min: i64, x_max: i64) -> Result<()> {
    let n = params.n();
    if n > MAX_PARTICLES {
        return Err(Error::InvalidInput(format!("one-point integrals support N ≤ {MAX_PARTICLES}, got {n}")));
    }
    if x_max < x_min {
        return Err(Error::InvalidInput(format!("empty range {x_min}..={x_max}")));
    }
    Ok(())
}

#[inline]
fn det_small(m: &[C64], n: usize) -> C64 {
    match n {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => det_complex(m, n).unwrap_or(C64::new(f64::NAN, f64::NAN)),
    }
}

/// Π_{j,k}(ξ_j + ζ_k − 2Δξ_jζ_k) · D_N(ξ, ζ), computed as the determinant of
/// the row-rescaled matrix so the removable zeros never divide.
pub fn scaled_ik(xi: &[C64], zeta: &[C64], delta: f64) -> C64 {
    let n = xi.len();
    let mut m = [C64::new(0.0, 0.0); 9];
    let mut big;
    let buf: &mut [C64] = if n <= 3 {
        &mut m[..n * n]
    } else {
        big = vec![C64::new(0.0, 0.0); n * n];
        &mut big[..]
    };
    for i in 0..n {
        for j in 0..n {
            let mut v = 1.0 / (1.0 - xi[i] * zeta[j]);
            for (k, &z) in zeta.iter().enumerate() {
                if k != j {
                    v *= xi[i] + z - 2.0 * delta * xi[i] * z;
                }
            }
            buf[i * n + j] = v;
        }
    }
    det_small(buf, n)
}

/// Trapezoid data for one node count: weighted nodes per variable and the
/// pair tables the integrand is assembled from.
struct Grid {
    m: usize,
    n: usize,
    /// w[j][a]: weight × ξ^{−y_j−1} e^{−itε(ξ)} at node a of C_R.
    w: Vec<Vec<C64>>,
    /// v[j][b]: weight × ζ^{−y_j−1} e^{itε(ζ)} at node b of C_r.
    v: Vec<Vec<C64>>,
    /// c[a][b] = ξ_a + ζ_b − 2Δξ_aζ_b.
    c: Vec<C64>,
    /// inv[a][b] = 1/(1 − ξ_aζ_b).
    inv: Vec<C64>,
    /// pxi[a][a'] = 1/(1 + ξ_aξ_a' − 2Δξ_a), pz likewise on C_r.
    pxi: Vec<C64>,
    pz: Vec<C64>,
}

impl Grid {
    fn new(params: &ModelParams, r: f64, big: f64, m: usize) -> Result<Self> {
        let delta = params.delta;
        let t = params.t;
        let xi = Contour::from(ContourCircle::centered(big)?).discretize(m)?;
        let zeta = Contour::from(ContourCircle::centered(r)?).discretize(m)?;
        let ys = params.y.sites();
        let w = ys
            .iter()
            .map(|&y| xi.nodes.iter().zip(&xi.weights).map(|(&z, &wt)| wt * initial_factor(z, y, t, delta)).collect())
            .collect();
        let v = ys
            .iter()
            .map(|&y| zeta.nodes.iter().zip(&zeta.weights).map(|(&z, &wt)| wt * initial_factor(z, y, -t, delta)).collect())
            .collect();
        let mut c = Vec::with_capacity(m * m);
        let mut inv = Vec::with_capacity(m * m);
        let mut pxi = Vec::with_capacity(m * m);
        let mut pz = Vec::with_capacity(m * m);
        for &a in &xi.nodes {
            for &b in &zeta.nodes {
                c.push(a + b - 2.0 * delta * a * b);
                inv.push(1.0 / (1.0 - a * b));
            }
            for &b in &xi.nodes {
                pxi.push(1.0 / (1.0 + a * b - 2.0 * delta * a));
            }
        }
        for &a in &zeta.nodes {
            for &b in &zeta.nodes {
                pz.push(1.0 / (1.0 + a * b - 2.0 * delta * a));
            }
        }
        for (name, table) in [("c", &c), ("1/(1−ξζ)", &inv), ("ξ pair", &pxi), ("ζ pair", &pz)] {
            if table.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::NonFinite(format!("{name} table on the quadrature grid")));
            }
        }
        Ok(Self { m, n: params.n(), w, v, c, inv, pxi, pz })
    }

    /// H[K]: sum of the weighted integrand over node tuples whose index sum
    /// is K mod m. Since every node sits at angle 2πk/m on its circle,
    /// Π ξ_jζ_j = (rR)^N e^{2πiK/m} on each bin.
    fn histogram(&self) -> Vec<C64> {
        let m = self.m;
        let partial: Vec<Vec<C64>> = (0..m)
            .into_par_iter()
            .map(|a0| {
                let mut h = vec![C64::new(0.0, 0.0); m];
                match self.n {
                    1 => self.fill_one(a0, &mut h),
                    2 => self.fill_two(a0, &mut h),
                    _ => self.fill_general(a0, &mut h),
                }
                h
            })
            .collect();
        let mut column = vec![C64::new(0.0, 0.0); m];
        (0..m)
            .map(|k| {
                for (dst, p) in column.iter_mut().zip(&partial) {
                    *dst = p[k];
                }
                pairwise_sum(&column)
            })
            .collect()
    }

    fn fill_one(&self, a: usize, h: &mut [C64]) {
        let m = self.m;
        for b in 0..m {
            h[(a + b) % m] += self.w[0][a] * self.v[0][b] * self.inv[a * m + b];
        }
    }

    fn fill_two(&self, a1: usize, h: &mut [C64]) {
        let m = self.m;
        let (c, inv) = (&self.c, &self.inv);
        let mut y1 = vec![C64::new(0.0, 0.0); m];
        let mut y2 = vec![C64::new(0.0, 0.0); m];
        let mut bv = vec![C64::new(0.0, 0.0); m];
        for a2 in 0..m {
            let lead = self.w[0][a1] * self.w[1][a2] * self.pxi[a1 * m + a2];
            for b2 in 0..m {
                y1[b2] = c[a1 * m + b2] * inv[a2 * m + b2];
                y2[b2] = c[a2 * m + b2] * inv[a1 * m + b2];
            }
            for b1 in 0..m {
                let x1 = c[a2 * m + b1] * inv[a1 * m + b1];
                let x2 = c[a1 * m + b1] * inv[a2 * m + b1];
                let pre = lead * self.v[0][b1];
                for b2 in 0..m {
                    bv[b2] = self.pz[b1 * m + b2] * self.v[1][b2];
                }
                let base = a1 + a2 + b1;
                for b2 in 0..m {
                    let term = bv[b2] * (x1 * y1[b2] - x2 * y2[b2]);
                    h[(base + b2) % m] += pre * term;
                }
            }
        }
    }

    fn fill_general(&self, a0: usize, h: &mut [C64]) {
        let (m, n) = (self.m, self.n);
        let mut idx = vec![0usize; 2 * n];
        idx[0] = a0;
        let mut mat = vec![C64::new(0.0, 0.0); n * n];
        loop {
            let (ia, ib) = idx.split_at(n);
            let mut weight = C64::new(1.0, 0.0);
            for j in 0..n {
                weight *= self.w[j][ia[j]] * self.v[j][ib[j]];
                for k in j + 1..n {
                    weight *= self.pxi[ia[j] * m + ia[k]] * self.pz[ib[j] * m + ib[k]];
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let mut e = self.inv[ia[i] * m + ib[j]];
                    for k in 0..n {
                        if k != j {
                            e *= self.c[ia[i] * m + ib[k]];
                        }
                    }
                    mat[i * n + j] = e;
                }
            }
            let k: usize = idx.iter().sum();
            h[k % m] += weight * det_small(&mat, n);
            // Odometer over every index but the first.
            let mut d = 2 * n - 1;
            loop {
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
                d -= 1;
                if d == 0 {
                    return;
                }
            }
        }
    }

    /// Σ_K H[K] (rR)^{N x} e^{2πixK/m}, i.e. the integral with (Πξζ)^x, for
    /// x_min..x_min+count; with `with_one_minus` the x-th value is taken
    /// against (1 − Πξζ)(Πξζ)^x instead.
    fn moments(&self, hist: &[C64], ratio: f64, x_min: i64, count: usize, with_one_minus: bool) -> Vec<C64> {
        let m = self.m;
        let modulus = ratio.powi(self.n as i32);
        let extra = usize::from(with_one_minus);
        let raw: Vec<C64> = (0..count + extra)
            .map(|c| {
                let x = x_min + c as i64;
                let phase = x.rem_euclid(m as i64) as usize;
                let terms: Vec<C64> = hist
                    .iter()
                    .enumerate()
                    .map(|(k, &b)| b * C64::from_polar(1.0, 2.0 * PI * ((phase * k) % m) as f64 / m as f64))
                    .collect();
                pairwise_sum(&terms) * modulus.powi(x as i32)
            })
            .collect();
        if with_one_minus {
            raw.windows(2).map(|w| w[0] - w[1]).collect()
        } else {
            raw
        }
    }
}

/// The cumulative integrand times (Πξζ)^x with ξ on |ξ| = `xi_radius` and ζ on
/// |ζ| = `zeta_radius`, m trapezoid nodes per variable. The caller is
/// responsible for where the poles sit relative to the circles.
pub(crate) fn circle_integral(params: &ModelParams, xi_radius: f64, zeta_radius: f64, x: i64, m: usize) -> Result<C64> {
    check(params, x, x)?;
    let grid = Grid::new(params, zeta_radius, xi_radius, m)?;
    let hist = grid.histogram();
    Ok(grid.moments(&hist, zeta_radius * xi_radius, x, 1, false)[0])
}

/// Integrates the cumulative integrand times (Πξζ)^x for x in x_min..=x_max,
/// optionally times (1 − Πξζ). Node counts double until the change is
/// within max(atol, rtol·|value|) for every x.
fn contour_table(
    params: &ModelParams,
    x_min: i64,
    x_max: i64,
    with_one_minus: bool,
    opts: &QuadOptions,
) -> Result<Vec<DistributionEntry>> {
    check(params, x_min, x_max)?;
    let n = params.n();
    let delta = params.delta;
    let t = params.t;
    let ys = params.y.sites().to_vec();
    let lowest: i64 = ys.iter().map(|y| (x_min - y - 1).min(0)).sum();
    let Radii { r, big, ratio: q, .. } = onepoint_radii(n, delta, t, lowest)?;
    let opts = opts.with_atol(opts.atol.max(ATOL_FLOOR));

    let shift = ys.iter().map(|y| (x_min - y - 1).abs().max((x_max - y - 1).abs())).max().unwrap_or(0);
    let bandwidth = dispersion_bandwidth(t, big.max(1.0 / r), shift);
    let m0 = circle_nodes(q, 0.5 * bandwidth, opts.atol);
    let cap = (MAX_EVALUATIONS.powf(1.0 / (2 * n) as f64) as usize).min(opts.max_nodes);
    let count = (x_max - x_min + 1) as usize;

    let run = || -> Result<Vec<DistributionEntry>> {
        let mut m = m0;
        let eval = |m: usize| -> Result<Vec<C64>> {
            let grid = Grid::new(params, r, big, m)?;
            let hist = grid.histogram();
            Ok(grid.moments(&hist, r * big, x_min, count, with_one_minus))
        };
        let mut prev = eval(m)?;
        loop {
            let next = 2 * m;
            if next > cap {
                return Err(Error::Convergence { nodes: m, last: (prev[0].re, prev[0].im), previous: (f64::NAN, f64::NAN) });
            }
            let cur = eval(next)?;
            let errors: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| (a - b).norm()).collect();
            if cur.iter().zip(&errors).all(|(v, e)| *e <= opts.atol.max(opts.rtol * v.norm())) {
                return cur
                    .iter()
                    .zip(&errors)
                    .enumerate()
                    .map(|(k, (v, e))| {
                        let x = x_min + k as i64;
                        if v.im.abs() > 1e-9_f64.max(10.0 * e) {
                            return Err(Error::NonFinite(format!("probability at x = {x} has imaginary part {}", v.im)));
                        }
                        Ok(DistributionEntry { x, value: v.re, abs_error: *e })
                    })
                    .collect();
            }
            let worst = errors.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap_or(0);
            if 2 * next > cap {
                return Err(Error::Convergence {
                    nodes: next,
                    last: (cur[worst].re, cur[worst].im),
                    previous: (prev[worst].re, prev[worst].im),
                });
            }
            m = next;
            prev = cur;
        }
    };
    match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// F_N(x, t) on x_min..=x_max from the cumulative contour integral.
pub fn theorem2_table(params: &ModelParams, x_min: i64, x_max: i64, opts: &QuadOptions) -> Result<DistributionTable> {
    let entries = contour_table(params, x_min, x_max, false, opts)?;
    Ok(DistributionTable { params: params.clone(), method: Method::Theorem2, entries })
}

/// 𝒫_Y(x, 1; t) on x_min..=x_max from the integral with the (1 − Πξζ) factor.
pub fn detrep_table(params: &ModelParams, x_min: i64, x_max: i64, opts: &QuadOptions) -> Result<DistributionTable> {
    let entries = contour_table(params, x_min, x_max, true, opts)?;
    Ok(DistributionTable { params: params.clone(), method: Method::DetRep, entries })
}

pub fn prob_leftmost_at(params: &ModelParams, x: i64, opts: &QuadOptions) -> Result<DistributionEntry> {
    Ok(contour_table(params, x, x, true, opts)?[0])
}

pub fn prob_leftmost_geq(params: &ModelParams, x: i64, opts: &QuadOptions) -> Result<DistributionEntry> {
    Ok(contour_table(params, x, x, false, opts)?[0])
}

/// Half-width w such that each particle leaves [y − w, y + w] with
/// probability below `tol`, from |J_k(2t)| ≤ t^k/k!.
pub fn travel_bound(t: f64, tol: f64) -> i64 {
    let mut w = 0i64;
    loop {
        w += 1;
        let mut tail = 0.0;
        let mut term = (1..=w).fold(1.0, |acc, k| acc * t / k as f64);
        let mut k = w;
        while term > 1e-300 && k < w + 200 {
            tail += 2.0 * term * term;
            k += 1;
            term *= t / k as f64;
        }
        if tail < tol || w > 10_000 {
            return w;
        }
    }
}

/// 𝒫_Y(x, 1; t) on x_min..=x_max by summing |ψ_N(X; t)|² over X with x₁ = x.
/// The window extends the travel bound beyond Y; its tail mass is added to
/// the error.
pub fn brute_force_table(params: &ModelParams, x_min: i64, x_max: i64, opts: &QuadOptions) -> Result<DistributionTable> {
    check(params, x_min, x_max)?;
    let n = params.n();
    let ys = params.y.sites();
    let tail_tol = 1e-13;
    let w = travel_bound(params.t, tail_tol);
    let window = LatticeWindow::new(x_min.min(ys[0] - w), x_max.max(ys[n - 1] + w) + n as i64)?;
    let table = wavefunction_table(params, window, opts)?;
    let count = (x_max - x_min + 1) as usize;
    let mut values = vec![0.0; count];
    for (s, v) in table.states.iter().zip(&table.values) {
        if s[0] >= x_min && s[0] <= x_max {
            values[(s[0] - x_min) as usize] += v.norm_sqr();
        }
    }
    let per_state = 2.0 * table.error * table.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let truncation = n as f64 * tail_tol;
    let entries = values
        .into_iter()
        .enumerate()
        .map(|(k, value)| DistributionEntry {
            x: x_min + k as i64,
            value,
            abs_error: per_state * table.states.len() as f64 + truncation,
        })
        .collect();
    Ok(DistributionTable { params: params.clone(), method: Method::BruteForce, entries })
}

pub fn prob_leftmost_brute(params: &ModelParams, x: i64, opts: &QuadOptions) -> Result<DistributionEntry> {
    Ok(brute_force_table(params, x, x, opts)?.entries[0])
}

/// 𝒫_Y(x, 1; t) from the exact-diagonalization oracle.
pub fn oracle_table(params: &ModelParams, x_min: i64, x_max: i64) -> Result<DistributionTable> {
    if x_max < x_min {
        return Err(Error::InvalidInput(format!("empty range {x_min}..={x_max}")));
    }
    let run = OracleRun::new(params)?;
    let entries = (x_min..=x_max)
        .map(|x| Ok(DistributionEntry { x, value: run.marginal(1, x)?, abs_error: 1e-12 }))
        .collect::<Result<_>>()?;
    Ok(DistributionTable { params: params.clone(), method: Method::Oracle, entries })
}

/// Dispatches on the method; theorem2 yields F_N, the others 𝒫_Y(x, 1; t).
pub fn leftmost_table(
    params: &ModelParams,
    x_min: i64,
    x_max: i64,
    method: Method,
    opts: &QuadOptions,
) -> Result<DistributionTable> {
    match method {
        Method::Theorem2 => theorem2_table(params, x_min, x_max, opts),
        Method::DetRep => detrep_table(params, x_min, x_max, opts),
        Method::BruteForce => brute_force_table(params, x_min, x_max, opts),
        Method::Oracle => oracle_table(params, x_min, x_max),
    }
}
