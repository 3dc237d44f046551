//! Coordinate Bethe ansatz: S-matrix, A_σ coefficients and the contour
//! integral formulas for ψ_N(X; t) on small and large circles.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::ed::LatticeWindow;
use crate::error::{Error, Result};
pub use crate::model::{ModelParams, ParticleConfig};
use crate::numerics::{circle_nodes, integrate_nd, Contour, ContourCircle, Dim, Estimate, QuadOptions};
use crate::special::bessel_j;

const POLE_TOL: f64 = 1e-14;
const MAX_PARTICLES: usize = 6;

/// ε(ξ) = ξ + 1/ξ − 2Δ.
pub fn dispersion(xi: C64, delta: f64) -> Result<C64> {
    if xi.norm() == 0.0 {
        return Err(Error::InvalidInput("dispersion at ξ = 0".into()));
    }
    Ok(xi + xi.inv() - 2.0 * delta)
}

/// Yang–Yang S-matrix S(ξ_β, ξ_α) = −(1 + ξ_αξ_β − 2Δξ_β)/(1 + ξ_αξ_β − 2Δξ_α).
pub fn s_matrix(xb: C64, xa: C64, delta: f64) -> Result<C64> {
    let den = 1.0 + xa * xb - 2.0 * delta * xa;
    if den.norm() < POLE_TOL {
        return Err(Error::Pole(format!("S-matrix denominator vanishes at (ξβ, ξα) = ({xb}, {xa})")));
    }
    Ok(-(1.0 + xa * xb - 2.0 * delta * xb) / den)
}

#[inline]
fn s_fast(xb: C64, xa: C64, delta: f64) -> C64 {
    let p = xa * xb;
    -(1.0 + p - 2.0 * delta * xb) / (1.0 + p - 2.0 * delta * xa)
}

/// A permutation σ of {0..N−1} (σ[i] = σ(i)) with its inversion pairs
/// (β, α) = (σ(j), σ(k)) for j < k, σ(j) > σ(k).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PermutationTerm {
    pub perm: Vec<usize>,
    pub inversions: Vec<(usize, usize)>,
}

impl PermutationTerm {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidInput(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        let mut inversions = Vec::new();
        for j in 0..n {
            for k in j + 1..n {
                if perm[j] > perm[k] {
                    inversions.push((perm[j], perm[k]));
                }
            }
        }
        Ok(Self { perm, inversions })
    }

    pub fn sign(&self) -> f64 {
        if self.inversions.len() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        inv
    }
}

/// All permutations of {0..n−1} in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<PermutationTerm> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(PermutationTerm::new(p.clone()).expect("valid permutation"));
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

/// A_σ(ξ): product of S(ξ_β, ξ_α) over the inversions of σ.
pub fn a_coeff(term: &PermutationTerm, xi: &[C64], delta: f64) -> Result<C64> {
    let mut a = C64::new(1.0, 0.0);
    for &(b, al) in &term.inversions {
        a *= s_matrix(xi[b], xi[al], delta)?;
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContourKind {
    Small,
    Large,
}

/// √(Δ²+1) − |Δ|: the circle of this radius touches the S-matrix pole locus.
pub fn critical_radius(delta: f64) -> f64 {
    (delta * delta + 1.0).sqrt() - delta.abs()
}

/// Radius used for the wave function integrals. For N ≥ 2 the small circle
/// has radius 0.8ρ and the large one 1/(0.8ρ), which keeps the pole locus
/// of A_σ at aliasing ratio at most 0.8 while bounding |e^{−itε}| on the
/// contour; for N = 1 there are no poles.
pub fn wavefunction_radius(n: usize, delta: f64, kind: ContourKind) -> f64 {
    let rho = critical_radius(delta);
    match (n, kind) {
        (1, ContourKind::Small) => 0.8,
        (1, ContourKind::Large) => 1.25,
        (_, ContourKind::Small) => 0.8 * rho,
        (_, ContourKind::Large) => 1.0 / (0.8 * rho),
    }
}

/// Largest modulus ratio between the circle and the A_σ pole locus.
fn pole_ratio(n: usize, delta: f64, radius: f64, kind: ContourKind) -> Result<f64> {
    if n == 1 {
        return Ok(0.0);
    }
    let q = match kind {
        ContourKind::Small => radius * radius + 2.0 * delta.abs() * radius,
        ContourKind::Large => (1.0 + 2.0 * delta.abs() * radius) / (radius * radius),
    };
    if q >= 1.0 - 1e-9 {
        return Err(Error::Pole(format!(
            "circle of radius {radius} meets the S-matrix pole locus (ratio {q})"
        )));
    }
    Ok(q)
}

/// Trapezoid bandwidth of ξ^k e^{−itε(ξ)} on a circle of radius r.
pub fn dispersion_bandwidth(t: f64, radius: f64, shift: i64) -> f64 {
    std::f64::consts::E * t * radius.max(1.0 / radius) + shift.unsigned_abs() as f64 + 40.0
}

/// Per-node factor ξ^{−y−1} e^{−itε(ξ)}.
pub fn initial_factor(xi: C64, y: i64, t: f64, delta: f64) -> C64 {
    xi.powi(-(y as i32) - 1) * (C64::new(0.0, -t) * (xi + xi.inv() - 2.0 * delta)).exp()
}

fn check_params(params: &ModelParams, x: Option<&ParticleConfig>) -> Result<()> {
    let n = params.n();
    if n > MAX_PARTICLES {
        return Err(Error::InvalidInput(format!("N = {n} exceeds the cost guard {MAX_PARTICLES}")));
    }
    if let Some(x) = x {
        if x.len() != n {
            return Err(Error::InvalidInput(format!("X has {} sites, Y has {n}", x.len())));
        }
    }
    Ok(())
}

/// ψ_N(X; t) as Σ_σ of N-fold contour integrals on circles of the given kind.
pub fn wavefunction(params: &ModelParams, x: &ParticleConfig, kind: ContourKind, opts: &QuadOptions) -> Result<Estimate> {
    check_params(params, Some(x))?;
    let n = params.n();
    let delta = params.delta;
    let t = params.t;
    let r = wavefunction_radius(n, delta, kind);
    let q = pole_ratio(n, delta, r, kind)?;
    let ys = params.y.sites().to_vec();
    let xs = x.sites().to_vec();
    let shift = xs.iter().flat_map(|a| ys.iter().map(move |b| a - b)).map(i64::abs).max().unwrap_or(0);
    let m0 = circle_nodes(q, dispersion_bandwidth(t, r, shift), opts.rtol * 1e-2);
    let circle = ContourCircle::centered(r)?;
    let dims: Vec<Dim> = ys
        .iter()
        .map(|&y| Dim::new(circle, m0).with_factor(move |z| initial_factor(z, y, t, delta)))
        .collect();
    let perms = all_permutations(n);
    let integrand = |xi: &[C64]| -> C64 {
        let mut s = [[C64::new(0.0, 0.0); MAX_PARTICLES]; MAX_PARTICLES];
        let mut pw = [[C64::new(0.0, 0.0); MAX_PARTICLES]; MAX_PARTICLES];
        for b in 0..n {
            for a in 0..n {
                if a != b {
                    s[b][a] = s_fast(xi[b], xi[a], delta);
                }
            }
            for i in 0..n {
                pw[i][b] = xi[b].powi(xs[i] as i32);
            }
        }
        let mut total = C64::new(0.0, 0.0);
        for p in &perms {
            let mut term = C64::new(1.0, 0.0);
            for &(b, a) in &p.inversions {
                term *= s[b][a];
            }
            for i in 0..n {
                term *= pw[i][p.perm[i]];
            }
            total += term;
        }
        total
    };
    integrate_nd(&dims, integrand, opts)
}

/// e^{2iΔt} (−i)^{x−y} J_{x−y}(2t), the one-particle amplitude.
pub fn psi1_closed_form(delta: f64, t: f64, x: i64, y: i64) -> Result<C64> {
    let d = x - y;
    let phase = C64::from_polar(1.0, 2.0 * delta * t) * C64::new(0.0, -1.0).powi(d.rem_euclid(4) as i32);
    Ok(phase * bessel_j(d, 2.0 * t)?)
}

/// ψ_N on every configuration of a window, with the largest change between
/// node counts M and 2M as error.
#[derive(Debug, Clone, Serialize)]
pub struct WavefunctionTable {
    pub window: LatticeWindow,
    pub states: Vec<Vec<i64>>,
    pub values: Vec<C64>,
    pub error: f64,
    pub nodes: usize,
}

impl WavefunctionTable {
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Contract axis `axis` of a row-major tensor with shape `shape` against
/// `mat` (rows × shape[axis]).
fn mode_product(data: &[C64], shape: &[usize], axis: usize, mat: &[C64], rows: usize) -> Vec<C64> {
    let len = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); outer * rows * inner];
    out.par_chunks_mut(rows * inner).enumerate().for_each(|(o, chunk)| {
        let src = &data[o * len * inner..(o + 1) * len * inner];
        for k in 0..rows {
            let row = &mat[k * len..(k + 1) * len];
            let dst = &mut chunk[k * inner..(k + 1) * inner];
            for (nidx, &c) in row.iter().enumerate() {
                let s = &src[nidx * inner..(nidx + 1) * inner];
                for (d, v) in dst.iter_mut().zip(s) {
                    *d += c * v;
                }
            }
        }
    });
    out
}

fn table_at(params: &ModelParams, window: LatticeWindow, kind: ContourKind, m: usize) -> Result<Vec<C64>> {
    let n = params.n();
    let delta = params.delta;
    let t = params.t;
    let r = wavefunction_radius(n, delta, kind);
    let grid = Contour::from(ContourCircle::centered(r)?).discretize(m)?;
    let ys = params.y.sites();
    // per-variable weight·factor, wg[j][node]
    let wg: Vec<Vec<C64>> = ys
        .iter()
        .map(|&y| grid.nodes.iter().zip(&grid.weights).map(|(&z, &w)| w * initial_factor(z, y, t, delta)).collect())
        .collect();
    let perms = all_permutations(n);
    let inverses: Vec<Vec<usize>> = perms.iter().map(PermutationTerm::inverse).collect();
    let total = m.pow(n as u32);
    // W[n_1..n_N] = Σ_σ A_σ(ξ) Π_j wg_j(ξ_j) with ξ_{σ(i)} at node n_i
    let w: Vec<C64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut idx = [0usize; MAX_PARTICLES];
            let mut rem = flat;
            for i in (0..n).rev() {
                idx[i] = rem % m;
                rem /= m;
            }
            let mut acc = C64::new(0.0, 0.0);
            let mut xi = [C64::new(0.0, 0.0); MAX_PARTICLES];
            for (p, inv) in perms.iter().zip(&inverses) {
                let mut a = C64::new(1.0, 0.0);
                for j in 0..n {
                    let node = idx[inv[j]];
                    xi[j] = grid.nodes[node];
                    a *= wg[j][node];
                }
                for &(b, al) in &p.inversions {
                    a *= s_fast(xi[b], xi[al], delta);
                }
                acc += a;
            }
            acc
        })
        .collect();
    let k = window.size();
    let mut powers = vec![C64::new(0.0, 0.0); k * m];
    for (xi_idx, &z) in grid.nodes.iter().enumerate() {
        for (row, xsite) in (window.left..=window.right).enumerate() {
            powers[row * m + xi_idx] = z.powi(xsite as i32);
        }
    }
    let mut shape = vec![m; n];
    let mut data = w;
    for axis in 0..n {
        data = mode_product(&data, &shape, axis, &powers, k);
        shape[axis] = k;
    }
    Ok(data)
}

/// Flat tensor positions of the strictly increasing configurations.
fn ordered_entries(data: &[C64], window: LatticeWindow, n: usize) -> Vec<(usize, Vec<i64>)> {
    let k = window.size();
    let mut out = Vec::new();
    let mut sites = vec![0i64; n];
    for flat in 0..data.len() {
        let mut rem = flat;
        for j in (0..n).rev() {
            sites[j] = window.left + (rem % k) as i64;
            rem /= k;
        }
        if sites.windows(2).all(|p| p[0] < p[1]) {
            out.push((flat, sites.clone()));
        }
    }
    out
}

/// Whether the small circle is the better-conditioned choice for X: the
/// integrand modulus scales like r^{Σ(x_i − y_i) − N}.
pub fn prefers_small_contour(x: &[i64], y: &[i64]) -> bool {
    let s: i64 = x.iter().sum::<i64>() - y.iter().sum::<i64>();
    s >= y.len() as i64
}

fn table_kind(
    params: &ModelParams,
    window: LatticeWindow,
    kind: ContourKind,
    opts: &QuadOptions,
    keep: &dyn Fn(&[i64]) -> bool,
) -> Result<WavefunctionTable> {
    let n = params.n();
    let r = wavefunction_radius(n, params.delta, kind);
    let q = pole_ratio(n, params.delta, r, kind)?;
    let ys = params.y.sites();
    let shift = (window.right - ys[0]).abs().max((ys[n - 1] - window.left).abs());
    let mut m = circle_nodes(q, dispersion_bandwidth(params.t, r, shift), opts.rtol * 1e-2);
    let mut prev = table_at(params, window, kind, m)?;
    loop {
        let next_m = 2 * m;
        if next_m > opts.max_nodes {
            return Err(Error::Convergence { nodes: m, last: (prev[0].re, prev[0].im), previous: (f64::NAN, f64::NAN) });
        }
        let cur = table_at(params, window, kind, next_m)?;
        let ordered: Vec<(usize, Vec<i64>)> =
            ordered_entries(&cur, window, n).into_iter().filter(|(_, s)| keep(s)).collect();
        let err = ordered.iter().map(|&(i, _)| (cur[i] - prev[i]).norm()).fold(0.0, f64::max);
        let scale = ordered.iter().map(|&(i, _)| cur[i].norm()).fold(0.0, f64::max);
        if err <= opts.atol.max(opts.rtol * scale) {
            let values = ordered.iter().map(|&(i, _)| cur[i]).collect();
            let states = ordered.into_iter().map(|(_, s)| s).collect();
            return Ok(WavefunctionTable { window, states, values, error: err, nodes: next_m });
        }
        m = next_m;
        prev = cur;
    }
}

fn check_table(params: &ModelParams, window: LatticeWindow) -> Result<()> {
    check_params(params, None)?;
    let n = params.n();
    if n > 3 {
        return Err(Error::InvalidInput(format!("window tables support N ≤ 3, got {n}")));
    }
    if window.size() < n {
        return Err(Error::InvalidInput("window smaller than particle number".into()));
    }
    Ok(())
}

/// ψ_N(X; t) for all X in the window from one contour kind, via one tensor
/// contraction per node count instead of one integral per configuration.
pub fn wavefunction_table_kind(
    params: &ModelParams,
    window: LatticeWindow,
    kind: ContourKind,
    opts: &QuadOptions,
) -> Result<WavefunctionTable> {
    check_table(params, window)?;
    table_kind(params, window, kind, opts, &|_| true)
}

/// ψ_N(X; t) for all X in the window, each configuration taken from the
/// contour kind that is better conditioned for it.
pub fn wavefunction_table(params: &ModelParams, window: LatticeWindow, opts: &QuadOptions) -> Result<WavefunctionTable> {
    check_table(params, window)?;
    let ys = params.y.sites().to_vec();
    let y2 = ys.clone();
    let small = table_kind(params, window, ContourKind::Small, opts, &move |x| prefers_small_contour(x, &ys))?;
    let large = table_kind(params, window, ContourKind::Large, opts, &move |x| !prefers_small_contour(x, &y2))?;
    let mut rows: Vec<(Vec<i64>, C64)> =
        small.states.into_iter().zip(small.values).chain(large.states.into_iter().zip(large.values)).collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let (states, values) = rows.into_iter().unzip();
    Ok(WavefunctionTable {
        window,
        states,
        values,
        error: small.error.max(large.error),
        nodes: small.nodes.max(large.nodes),
    })
}
