//! Deformed-contour forms of F_N(x, t) = ℙ_Y(X₁(t) ≥ x).
//!
//! The ζ-circles of the one-point integral are pushed out past the poles
//! ζ = 1/ξ_j, which splits the integral into a sum over maps
//! τ: {1..N} → {0..N} (0: the large circle, ℓ: the residue at 1/ξ_ℓ).
//! Alongside the series this module holds the spectral functions and
//! steep descent contours at the left edge x = −2t, and the quantities
//! B, ν and F(σ, S) entering the conjectured edge asymptotics.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::bethe::{all_permutations, ModelParams};
use crate::error::{Error, Result};
use crate::ikccp::d_weight;
use crate::model::ParticleConfig;
use crate::numerics::{
    circle_nodes, det_complex, det_real, gauss_legendre, integrate_nd, pairwise_sum, ContourCircle, Dim,
    Orientation, PiecewiseContour, QuadGrid, QuadOptions, Segment,
};
use crate::onepoint::{circle_integral, scaled_ik};
use crate::special::airy_kernel_matrix;

const POLE_TOL: f64 = 1e-14;
const CUT_TOL: f64 = 1e-14;
/// The series is a verification route; beyond two particles the 2N-fold
/// large-circle term is out of budget.
const MAX_SERIES_N: usize = 2;
/// |e^{itε(ζ)}| on |ζ| = R′ grows like e^{tR′} with R′ > 8, which limits
/// the series to short times.
const MAX_SERIES_TIME: f64 = 0.5;
const SERIES_TOL: f64 = 1e-6;
const MAX_EVALUATIONS: f64 = 1e9;
const MAX_F_VARIABLES: usize = 3;

pub const EPS1: f64 = 0.2;
pub const EPS2: f64 = 0.02;

// ---------------------------------------------------------------------------
// Spectral functions

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpectralKind {
    G,
    H,
}

impl SpectralKind {
    fn sign(self) -> f64 {
        match self {
            SpectralKind::G => 1.0,
            SpectralKind::H => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPoint {
    pub kind: SpectralKind,
    pub x: f64,
    pub t: f64,
    pub z: C64,
    pub value: C64,
}

/// G(ξ) = x log ξ − it(ξ + 1/ξ), H(ζ) = −x log ζ − it(ζ + 1/ζ), with the
/// principal logarithm.
pub fn spectral(kind: SpectralKind, z: C64, x: f64, t: f64) -> Result<SpectralPoint> {
    if z.norm() < CUT_TOL || (z.re < 0.0 && z.im.abs() <= CUT_TOL * z.norm().max(1.0)) {
        return Err(Error::InvalidInput(format!("{z} lies on the branch cut of the logarithm")));
    }
    let value = kind.sign() * x * z.ln() - C64::i() * t * (z + z.inv());
    Ok(SpectralPoint { kind, x, t, z, value })
}

/// Derivatives of order 1 to 3.
pub fn spectral_derivative(kind: SpectralKind, z: C64, x: f64, t: f64, order: u32) -> Result<C64> {
    let s = kind.sign() * x;
    let it = C64::new(0.0, t);
    match order {
        1 => Ok(s / z - it * (1.0 - z.powi(-2))),
        2 => Ok(-s / (z * z) - 2.0 * it * z.powi(-3)),
        3 => Ok(2.0 * s * z.powi(-3) + 6.0 * it * z.powi(-4)),
        _ => Err(Error::InvalidInput(format!("derivative order {order} not in 1..=3"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoints {
    pub xi: [C64; 2],
    pub zeta: [C64; 2],
}

/// Zeros of G′ and H′: ξ = (x ± √(x² − 4t²))/(2it), ζ = (−x ± √(x² − 4t²))/(2it).
pub fn critical_points(x: f64, t: f64) -> Result<CriticalPoints> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("critical points need t > 0, got {t}")));
    }
    let root = C64::new(x * x - 4.0 * t * t, 0.0).sqrt();
    let den = C64::new(0.0, 2.0 * t);
    Ok(CriticalPoints {
        xi: [(x + root) / den, (x - root) / den],
        zeta: [(-x + root) / den, (-x - root) / den],
    })
}

// ---------------------------------------------------------------------------
// Contours

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SteepKind {
    Plus,
    Minus,
}

/// Γ₊: rays from i at angles π/6 and 5π/6 out to |ξ − i| = 1, horizontal
/// runs at height 3/2 out to the circle of radius `r_outer`, closed by the
/// part of that circle below height 3/2. Γ₋ is its mirror image through −i.
/// Both are positively oriented.
pub fn steep_contour(kind: SteepKind, r_outer: f64) -> Result<PiecewiseContour> {
    let c = 3f64.sqrt() / 2.0;
    let h = 1.5;
    if !(r_outer > 3f64.sqrt()) {
        return Err(Error::InvalidInput(format!("steep contour radius {r_outer} must exceed √3")));
    }
    let x_end = (r_outer * r_outer - h * h).sqrt();
    let theta = h.atan2(x_end);
    let p1 = C64::new(c, h);
    let p2 = C64::new(-c, h);
    let plus = PiecewiseContour::closed(vec![
        Segment::arc(C64::new(0.0, 0.0), r_outer, PI - theta, 2.0 * PI + theta),
        Segment::line(C64::new(x_end, h), p1),
        Segment::line(p1, C64::i()),
        Segment::line(C64::i(), p2),
        Segment::line(p2, C64::new(-x_end, h)),
    ])?;
    Ok(match kind {
        SteepKind::Plus => plus,
        SteepKind::Minus => plus.conj().reversed(),
    })
}

/// Γ̂: the rectangle |Re ξ| ≤ L, |Im ξ| ≤ 1, positively oriented, with an
/// outward half-circle of radius ε₁ at i, an inward one of radius ε₂ at
/// i + 2Δ, and an outward one of radius ε₁ at −i. At Δ = 0 the bump at
/// i + 2Δ is dropped.
pub fn gamma_hat(l: f64, delta: f64, eps1: f64, eps2: f64) -> Result<PiecewiseContour> {
    if !(0.0 < eps2 && eps2 < eps1 && eps1 < 1.0) {
        return Err(Error::InvalidInput(format!("bump radii need 0 < ε₂ < ε₁ < 1, got {eps2}, {eps1}")));
    }
    let a = 2.0 * delta;
    if delta != 0.0 && a.abs() < eps1 + eps2 {
        return Err(Error::InvalidInput(format!("bumps at i and i + 2Δ overlap for Δ = {delta}")));
    }
    if !(l > eps1 && l > a.abs() + eps2) {
        return Err(Error::InvalidInput(format!("half-length {l} leaves no room for the bumps")));
    }
    let i = C64::i();
    let mut segs = vec![
        Segment::line(C64::new(-l, -1.0), C64::new(-eps1, -1.0)),
        Segment::arc(-i, eps1, PI, 2.0 * PI),
        Segment::line(C64::new(eps1, -1.0), C64::new(l, -1.0)),
        Segment::line(C64::new(l, -1.0), C64::new(l, 1.0)),
    ];
    // top edge, right to left
    let mut bumps = vec![(0.0, eps1, PI)];
    if delta != 0.0 {
        bumps.push((a, eps2, -PI));
    }
    bumps.sort_by(|p, q| q.0.total_cmp(&p.0));
    let mut cursor = C64::new(l, 1.0);
    for (re, radius, sweep) in bumps {
        let center = C64::new(re, 1.0);
        segs.push(Segment::line(cursor, center + radius));
        segs.push(Segment::arc(center, radius, 0.0, sweep));
        cursor = center - radius;
    }
    segs.push(Segment::line(cursor, C64::new(-l, 1.0)));
    segs.push(Segment::line(C64::new(-l, 1.0), C64::new(-l, -1.0)));
    PiecewiseContour::closed(segs)
}

/// Γ̂ for a given Δ: half-length √(R² − 1) with R the series radius, or
/// R = 2.2 at Δ = 0.
pub fn default_gamma_hat(delta: f64) -> Result<PiecewiseContour> {
    let r = if delta == 0.0 { 2.2 } else { series_radii(delta)?.r };
    gamma_hat((r * r - 1.0).sqrt(), delta, EPS1, EPS2)
}

fn distance_to_segment(seg: &Segment, s0: f64, s1: f64, p: C64) -> f64 {
    match *seg {
        Segment::Line { .. } => {
            let (a, b) = (seg.point(s0), seg.point(s1));
            let d = b - a;
            let u = (((p - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
            (a + d * u - p).norm()
        }
        Segment::Arc { .. } => (0..=8)
            .map(|k| (seg.point(s0 + (s1 - s0) * k as f64 / 8.0) - p).norm())
            .fold(f64::INFINITY, f64::min),
    }
}

/// Gauss–Legendre panels on a piecewise contour, bisected until each panel
/// is at most `kappa` times its distance to the nearest focus point (but
/// not below `h_min`) and at most `h_max` long.
fn graded_grid(contour: &PiecewiseContour, focus: &[C64], kappa: f64, h_min: f64, h_max: f64, order: usize) -> QuadGrid {
    let (gx, gw) = gauss_legendre(order);
    let two_pi_i = C64::new(0.0, 2.0 * PI);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for seg in contour.segments() {
        let total = seg.length();
        let mut stack = vec![(0.0f64, 1.0f64)];
        let mut panels = Vec::new();
        while let Some((s0, s1)) = stack.pop() {
            let len = total * (s1 - s0);
            let d = focus.iter().map(|&f| distance_to_segment(seg, s0, s1, f)).fold(f64::INFINITY, f64::min);
            if len > h_max || (len > h_min && len > kappa * d) {
                let mid = 0.5 * (s0 + s1);
                stack.push((mid, s1));
                stack.push((s0, mid));
            } else {
                panels.push((s0, s1));
            }
        }
        for (s0, s1) in panels {
            let h = s1 - s0;
            for (x, w) in gx.iter().zip(&gw) {
                let s = s0 + h * (x + 1.0) / 2.0;
                nodes.push(seg.point(s));
                weights.push(seg.derivative(s) * (w * h / 2.0) / two_pi_i);
            }
        }
    }
    QuadGrid { nodes, weights, refinement_level: order }
}

fn junctions(contour: &PiecewiseContour) -> Vec<C64> {
    contour.segments().iter().map(Segment::start).collect()
}

/// Quadrature on Γ̂ graded toward its junctions, the bump centres and the
/// images of the junctions under the B-factor pole maps ξ ↦ 1/(2Δ − ξ) and
/// ξ ↦ 2Δ − 1/ξ, which is where poles of the other variables come closest.
fn gamma_hat_grid(contour: &PiecewiseContour, delta: f64, g: Grading) -> QuadGrid {
    let a = 2.0 * delta;
    let mut focus = vec![C64::i(), -C64::i(), C64::new(a, 1.0)];
    if g.junctions {
        focus.extend(junctions(contour));
    }
    let base = focus.clone();
    for z in base.into_iter().filter(|_| g.images) {
        for w in [1.0 / (a - z), a - 1.0 / z] {
            if w.re.is_finite() && w.im.is_finite() {
                focus.push(w);
            }
        }
    }
    graded_grid(contour, &focus, g.kappa, g.h_min, g.h_max, g.order)
}

/// Panel grading for Γ̂ quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grading {
    pub kappa: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub order: usize,
    /// Also grade toward the pole-map images of the junctions.
    pub images: bool,
    /// Also grade toward the segment junctions.
    pub junctions: bool,
}

impl Grading {
    pub const COARSE: Grading = Grading { kappa: 0.5, h_min: 0.1 * EPS2, h_max: 1.0, order: 8, images: false, junctions: false };
    pub const FINE: Grading = Grading { kappa: 0.5, h_min: 0.1 * EPS2, h_max: 1.0, order: 10, images: false, junctions: false };
}

// ---------------------------------------------------------------------------
// τ-maps

/// τ: {1..N} → {0..N}, stored as τ(j) for j = 1..N; 0 stands for the large
/// circle C_{R′} and ℓ ≥ 1 for the residue at ζ = 1/ξ_ℓ.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TauMap {
    images: Vec<usize>,
}

impl TauMap {
    /// Requires |τ⁻¹(ℓ)| ≤ 1 for every ℓ ≥ 1.
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n + 1];
        for &l in &images {
            if l > n {
                return Err(Error::InvalidInput(format!("τ image {l} outside 0..={n}")));
            }
            if l > 0 && std::mem::replace(&mut seen[l], true) {
                return Err(Error::InvalidInput(format!("τ = {images:?} is not injective off 0")));
            }
        }
        Ok(Self { images })
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// n = |τ⁻¹(0)|: the membership index in 𝒯_n.
    pub fn zeros(&self) -> usize {
        self.images.iter().filter(|&&l| l == 0).count()
    }

    /// K₁ = τ⁻¹(0) as 0-based positions.
    pub fn k1(&self) -> Vec<usize> {
        (0..self.n()).filter(|&k| self.images[k] == 0).collect()
    }

    /// K₂ = complement of K₁, ascending, as 0-based positions.
    pub fn k2(&self) -> Vec<usize> {
        (0..self.n()).filter(|&k| self.images[k] > 0).collect()
    }

    /// J₂ = τ(K₂) as 0-based positions, in the order of K₂.
    pub fn j2(&self) -> Vec<usize> {
        self.k2().iter().map(|&k| self.images[k] - 1).collect()
    }

    /// J₁ = complement of J₂, ascending.
    pub fn j1(&self) -> Vec<usize> {
        let j2 = self.j2();
        (0..self.n()).filter(|j| !j2.contains(j)).collect()
    }

    /// (k, τ(k)) for k ∈ K₂, 0-based, ascending in k.
    pub fn residue_pairs(&self) -> Vec<(usize, usize)> {
        self.k2().into_iter().map(|k| (k, self.images[k] - 1)).collect()
    }
}

/// All τ with |τ⁻¹(0)| = n that are injective off 0; there are
/// C(N, n)·N!/n! of them.
pub fn enumerate_tau(n_particles: usize, zeros: usize) -> Result<Vec<TauMap>> {
    if zeros > n_particles || n_particles > 4 {
        return Err(Error::InvalidInput(format!("need n ≤ N ≤ 4, got n = {zeros}, N = {n_particles}")));
    }
    let mut out = Vec::new();
    let mut images = vec![0usize; n_particles];
    fn rec(pos: usize, zeros_left: usize, used: &mut Vec<bool>, images: &mut Vec<usize>, out: &mut Vec<TauMap>) {
        let n = images.len();
        if pos == n {
            if zeros_left == 0 {
                out.push(TauMap { images: images.clone() });
            }
            return;
        }
        if zeros_left > 0 {
            images[pos] = 0;
            rec(pos + 1, zeros_left - 1, used, images, out);
        }
        if n - pos > zeros_left {
            for l in 1..=n {
                if !used[l] {
                    used[l] = true;
                    images[pos] = l;
                    rec(pos + 1, zeros_left, used, images, out);
                    used[l] = false;
                }
            }
        }
    }
    let mut used = vec![false; n_particles + 1];
    rec(0, zeros, &mut used, &mut images, &mut out);
    Ok(out)
}

fn parity(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// (−1)^{Σ_ℓ τ_ℓ − k_ℓ}, the sign printed with D_N(ξ, ζ; τ).
pub fn printed_sign(tau: &TauMap) -> f64 {
    let s: i64 = tau.residue_pairs().iter().map(|&(k, j)| j as i64 - k as i64).sum();
    parity(s.unsigned_abs() as usize)
}

/// Sign of the iterated residue: the printed sign times the parity of the
/// inversions of τ restricted to K₂ → J₂.
pub fn residue_sign(tau: &TauMap) -> f64 {
    let pairs = tau.residue_pairs();
    let mut inv = 0;
    for a in 0..pairs.len() {
        for b in a + 1..pairs.len() {
            if pairs[a].1 > pairs[b].1 {
                inv += 1;
            }
        }
    }
    printed_sign(tau) * parity(inv)
}

fn pair_den(u: C64, v: C64, delta: f64) -> C64 {
    1.0 + u * v - 2.0 * delta * u
}

fn checked_inv(z: C64, what: &str) -> Result<C64> {
    if z.norm() < POLE_TOL {
        return Err(Error::Pole(what.to_string()));
    }
    Ok(z.inv())
}

/// ε-dependent per-variable factor z^{x−y−1} e^{∓itε(z)} (upper sign for ξ).
fn exp_factor(z: C64, x: i64, y: i64, t: f64, delta: f64, sign: f64) -> C64 {
    let eps = z + z.inv() - 2.0 * delta;
    z.powi((x - y - 1) as i32) * (C64::new(0.0, -sign * t) * eps).exp()
}

fn check_points(params: &ModelParams, xi: &[C64], zeta: &[C64], tau: &TauMap) -> Result<()> {
    let n = params.n();
    if xi.len() != n || zeta.len() != n || tau.n() != n {
        return Err(Error::InvalidInput(format!(
            "need N = {n} values of ξ, ζ and τ, got {}, {}, {}",
            xi.len(),
            zeta.len(),
            tau.n()
        )));
    }
    Ok(())
}

/// The cumulative one-point integrand at a point (without quadrature weights).
pub fn full_integrand(params: &ModelParams, x: i64, xi: &[C64], zeta: &[C64]) -> Result<C64> {
    let n = params.n();
    if xi.len() != n || zeta.len() != n {
        return Err(Error::InvalidInput(format!("need {n} values of ξ and ζ")));
    }
    let (delta, t) = (params.delta, params.t);
    let ys = params.y.sites();
    let mut v = scaled_ik(xi, zeta, delta);
    for j in 0..n {
        v *= exp_factor(xi[j], x, ys[j], t, delta, 1.0) * exp_factor(zeta[j], x, ys[j], t, delta, -1.0);
        for k in j + 1..n {
            v *= checked_inv(pair_den(xi[j], xi[k], delta) * pair_den(zeta[j], zeta[k], delta), "pair factor")?;
        }
    }
    Ok(v)
}

/// D_N(ξ, ζ; τ): the residue sign times det d(ξ_j, ζ_k) over J₁ × K₁.
pub fn dn_tau(xi: &[C64], zeta: &[C64], tau: &TauMap, delta: f64) -> Result<C64> {
    let (j1, k1) = (tau.j1(), tau.k1());
    let mut m = Vec::with_capacity(j1.len() * k1.len());
    for &j in &j1 {
        for &k in &k1 {
            m.push(d_weight(xi[j], zeta[k], delta)?);
        }
    }
    Ok(residue_sign(tau) * det_complex(&m, j1.len())?)
}

/// I_N(ξ, ζ; τ): the cumulative integrand restricted to ξ_{J₁}, ζ_{K₁}. Only
/// those entries of `xi` and `zeta` are read.
pub fn in_tau(params: &ModelParams, x: i64, xi: &[C64], zeta: &[C64], tau: &TauMap) -> Result<C64> {
    check_points(params, xi, zeta, tau)?;
    let (delta, t) = (params.delta, params.t);
    let ys = params.y.sites();
    let (j1, k1) = (tau.j1(), tau.k1());
    let xs: Vec<C64> = j1.iter().map(|&j| xi[j]).collect();
    let zs: Vec<C64> = k1.iter().map(|&k| zeta[k]).collect();
    let mut v = residue_sign(tau) * if xs.is_empty() { C64::new(1.0, 0.0) } else { scaled_ik(&xs, &zs, delta) };
    for (a, &j) in j1.iter().enumerate() {
        v *= exp_factor(xi[j], x, ys[j], t, delta, 1.0);
        for &j2 in &j1[a + 1..] {
            v *= checked_inv(pair_den(xi[j], xi[j2], delta), "ξ pair factor")?;
        }
    }
    for (a, &k) in k1.iter().enumerate() {
        v *= exp_factor(zeta[k], x, ys[k], t, delta, -1.0);
        for &k2 in &k1[a + 1..] {
            v *= checked_inv(pair_den(zeta[k], zeta[k2], delta), "ζ pair factor")?;
        }
    }
    Ok(v)
}

/// f(ξ, ζ; τ): the t-independent factor left by the residues at
/// ζ_{k_ℓ} = 1/ξ_{τ_ℓ}. Reads ξ everywhere and ζ on K₁.
pub fn f_factor(xi: &[C64], zeta: &[C64], tau: &TauMap, y: &[i64], delta: f64) -> Result<C64> {
    let n = tau.n();
    let pairs = tau.residue_pairs();
    let mut v = C64::new(1.0, 0.0);
    for (l, &(kl, tl)) in pairs.iter().enumerate() {
        let later: Vec<(usize, usize)> = pairs[l + 1..].to_vec();
        let a = xi[tl];
        for k in tl + 1..n {
            if later.iter().any(|&(_, t)| t == k) {
                continue;
            }
            v *= (1.0 + a * xi[k] - 2.0 * delta * xi[k]) * checked_inv(pair_den(a, xi[k], delta), "ξ pair factor")?;
        }
        for k in kl + 1..n {
            if later.iter().any(|&(kk, _)| kk == k) {
                continue;
            }
            let num = a + zeta[k] - 2.0 * delta * a * zeta[k];
            v *= num * checked_inv(a + zeta[k] - 2.0 * delta, "ξ + ζ − 2Δ")?;
        }
        v *= a.powi((y[kl] - y[tl] - 1) as i32);
    }
    Ok(v)
}

/// I_N(ξ, ζ; τ)·f(ξ, ζ; τ), the integrand of the τ-term in the series.
pub fn tau_integrand(params: &ModelParams, x: i64, xi: &[C64], zeta: &[C64], tau: &TauMap) -> Result<C64> {
    Ok(in_tau(params, x, xi, zeta, tau)? * f_factor(xi, zeta, tau, params.y.sites(), params.delta)?)
}

fn small_radius(xi: &[C64], l: usize) -> f64 {
    let c = xi[l].inv();
    let sep = xi
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != l)
        .map(|(_, z)| (c - z.inv()).norm())
        .fold(f64::INFINITY, f64::min);
    (0.3 * sep).min(0.1 * c.norm())
}

/// The τ-term integrand computed without the residue algebra: the full
/// integrand integrated over ζ_k, k ∈ K₂, on small negatively oriented
/// circles about 1/ξ_{τ(k)} by the trapezoid rule. ξ and ζ_{K₁} are held
/// fixed.
pub fn residue_by_quadrature(
    params: &ModelParams,
    x: i64,
    xi: &[C64],
    zeta: &[C64],
    tau: &TauMap,
    opts: &QuadOptions,
) -> Result<C64> {
    check_points(params, xi, zeta, tau)?;
    let pairs = tau.residue_pairs();
    if pairs.is_empty() {
        return full_integrand(params, x, xi, zeta);
    }
    let mut dims = Vec::with_capacity(pairs.len());
    for &(_, l) in &pairs {
        let mut rho = small_radius(xi, l);
        let c = xi[l].inv();
        for &k in &tau.k1() {
            for p in [1.0 / (2.0 * params.delta - zeta[k]), 2.0 * params.delta - zeta[k].inv()] {
                rho = rho.min(0.3 * (p - c).norm());
            }
        }
        dims.push(Dim::new(ContourCircle::new(c, rho, Orientation::Negative)?, 32));
    }
    let est = integrate_nd(
        &dims,
        |z| {
            let mut zz = zeta.to_vec();
            for (&(k, _), &v) in pairs.iter().zip(z) {
                zz[k] = v;
            }
            full_integrand(params, x, xi, &zz).unwrap_or(C64::new(f64::NAN, f64::NAN))
        },
        opts,
    )?;
    Ok(est.value)
}

// ---------------------------------------------------------------------------
// Residue series

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRadii {
    /// ξ-circle radius R.
    pub r: f64,
    /// ζ-circle radius R′.
    pub r_prime: f64,
}

/// R = 1.1·m and R′ = 4.2·m with m = max{2/|Δ|, 2(1 + 2|Δ|)}, so that
/// m < R < 2m < R′/2.
pub fn series_radii(delta: f64) -> Result<SeriesRadii> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::InvalidInput(format!("the deformed series needs Δ ≠ 0, got {delta}")));
    }
    let lo = (2.0 / delta.abs()).max(2.0 * (1.0 + 2.0 * delta.abs()));
    Ok(SeriesRadii { r: 1.1 * lo, r_prime: 2.1 * 2.0 * lo })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauTerm {
    pub tau: TauMap,
    pub value: C64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    pub x: i64,
    pub value: f64,
    pub error: f64,
    pub radii: SeriesRadii,
    pub terms: Vec<TauTerm>,
}

/// Smallest M with a^M/M! ≤ tol: the trapezoid node count that resolves
/// e^{±itz} on a circle with t|z| = a.
fn exp_nodes(a: f64, tol: f64) -> f64 {
    let mut log_term = 0.0;
    let mut m = 0.0;
    while m < 10.0 || log_term > tol.ln() {
        m += 1.0;
        log_term += a.max(1e-300).ln() - f64::ln(m);
        if m > 1e4 {
            break;
        }
    }
    m
}

fn check_series(params: &ModelParams) -> Result<()> {
    let n = params.n();
    if n == 0 || n > MAX_SERIES_N {
        return Err(Error::InvalidInput(format!("the series is evaluated for 1 ≤ N ≤ {MAX_SERIES_N}, got {n}")));
    }
    let d = params.delta.abs();
    if !(0.5..=1.5).contains(&d) {
        return Err(Error::InvalidInput(format!("the series is evaluated for |Δ| ∈ [0.5, 1.5], got {}", params.delta)));
    }
    if params.t > MAX_SERIES_TIME {
        return Err(Error::InvalidInput(format!(
            "t = {} beyond the conditioning guard t ≤ {MAX_SERIES_TIME}",
            params.t
        )));
    }
    Ok(())
}

fn shift(params: &ModelParams, x: i64) -> f64 {
    let ys = params.y.sites();
    let span = (params.y.last() - params.y.first() + 1) as f64;
    ys.iter().map(|y| (x - y - 1).abs() as f64).fold(0.0, f64::max) + span
}

/// τ ≡ 0: the cumulative integrand with ζ on C_{R′}.
fn circle_term(params: &ModelParams, x: i64, radii: SeriesRadii, tol: f64) -> Result<(C64, f64)> {
    let n = params.n();
    let a = 2.0 * params.delta.abs();
    let (r, rp) = (radii.r, radii.r_prime);
    let q = [1.0 / (r * rp), (a + 1.0 / r) / r, 1.0 / (r * (r - a)), (a + 1.0 / rp) / rp, 1.0 / (rp * (rp - a))]
        .into_iter()
        .fold(0.0, f64::max);
    let bandwidth = exp_nodes(params.t * rp, 1e-13) + shift(params, x);
    let mut m = circle_nodes(q, bandwidth, 1e-13);
    let mut prev = circle_integral(params, r, rp, x, m)?;
    loop {
        let next = 2 * m;
        if (next as f64).powi(2 * n as i32) > MAX_EVALUATIONS {
            return Err(Error::Convergence { nodes: m, last: (prev.re, prev.im), previous: (f64::NAN, f64::NAN) });
        }
        let cur = circle_integral(params, r, rp, x, next)?;
        let err = (cur - prev).norm();
        if err <= tol {
            return Ok((cur, err));
        }
        m = next;
        prev = cur;
    }
}

/// A τ-term with at least one residue, by tensor trapezoid over ξ ∈ C_R
/// and ζ_{K₁} ∈ C_{R′}.
fn residue_term(params: &ModelParams, x: i64, tau: &TauMap, radii: SeriesRadii, opts: &QuadOptions) -> Result<(C64, f64)> {
    let n = params.n();
    let a = 2.0 * params.delta.abs();
    let (r, rp) = (radii.r, radii.r_prime);
    let sh = shift(params, x);
    let q_xi = [(a + 1.0 / r) / r, 1.0 / (r * (r - a)), r / (rp - a)].into_iter().fold(0.0, f64::max);
    let q_zeta = [(a + 1.0 / rp) / rp, 1.0 / (rp * (rp - a)), (r + a) / rp, 1.0 / (r * rp)].into_iter().fold(0.0, f64::max);
    let m_xi = circle_nodes(q_xi, exp_nodes(params.t * r, 1e-13) + sh, 1e-13);
    let m_zeta = circle_nodes(q_zeta, exp_nodes(params.t * rp, 1e-13) + sh, 1e-13);
    let k1 = tau.k1();
    let mut dims = Vec::new();
    for _ in 0..n {
        dims.push(Dim::new(ContourCircle::centered(r)?, m_xi));
    }
    for _ in &k1 {
        dims.push(Dim::new(ContourCircle::centered(rp)?, m_zeta));
    }
    let est = integrate_nd(
        &dims,
        |z| {
            let (xi, zs) = z.split_at(n);
            let mut zeta = vec![C64::new(0.0, 0.0); n];
            for (&k, &v) in k1.iter().zip(zs) {
                zeta[k] = v;
            }
            tau_integrand(params, x, xi, &zeta, tau).unwrap_or(C64::new(f64::NAN, f64::NAN))
        },
        opts,
    )?;
    Ok((est.value, est.error))
}

/// F_N(x, t) as Σ_n Σ_{τ∈𝒯_n} ∮_{C_R}…∮_{C_{R′}} I_N(ξ, ζ; τ) f(ξ, ζ; τ).
pub fn theorem4_sum(params: &ModelParams, x: i64, opts: &QuadOptions) -> Result<SeriesReport> {
    check_series(params)?;
    let n = params.n();
    let radii = series_radii(params.delta)?;
    let opts = opts.with_atol(opts.atol.max(1e-10)).with_rtol(0.0);
    let mut terms = Vec::new();
    for zeros in (0..=n).rev() {
        for tau in enumerate_tau(n, zeros)? {
            let (value, error) = if zeros == n {
                circle_term(params, x, radii, 1e-8)?
            } else {
                residue_term(params, x, &tau, radii, &opts)?
            };
            terms.push(TauTerm { tau, value, error });
        }
    }
    let total: C64 = pairwise_sum(&terms.iter().map(|t| t.value).collect::<Vec<_>>());
    let error: f64 = terms.iter().map(|t| t.error).sum();
    if error > SERIES_TOL || total.im.abs() > SERIES_TOL.max(10.0 * error) {
        return Err(Error::Convergence { nodes: 0, last: (total.re, total.im), previous: (error, f64::NAN) });
    }
    Ok(SeriesReport { x, value: total.re, error, radii, terms })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionTerm {
    pub value: C64,
    /// Σ of |weight × integrand| over the grid, the scale the value is
    /// cancelled from.
    pub magnitude: f64,
}

/// One term of the expansion over all maps {1..N} → {0..N} (not
/// necessarily injective off 0): ξ on C_R, ζ_k on C_{R′} when τ(k) = 0 and
/// on a negatively oriented small circle about 1/ξ_{τ(k)} otherwise. The
/// small radius is 1/(2R), reduced where needed so that the circle
/// encloses no other 1/ξ_j; tuples with coinciding ξ carry D_N = 0 and are
/// skipped. `m` trapezoid nodes on the ξ and small circles.
pub fn expansion_term(params: &ModelParams, x: i64, images: &[usize], m: usize) -> Result<ExpansionTerm> {
    check_series(params)?;
    let n = params.n();
    if images.len() != n || images.iter().any(|&l| l > n) {
        return Err(Error::InvalidInput(format!("map {images:?} is not {{1..{n}}} → {{0..{n}}}")));
    }
    let radii = series_radii(params.delta)?;
    let xi_grid = crate::numerics::Contour::from(ContourCircle::centered(radii.r)?).discretize(m)?;
    let big_nodes = circle_nodes(0.5, exp_nodes(params.t * radii.r_prime, 1e-13) + shift(params, x), 1e-13);
    let big = crate::numerics::Contour::from(ContourCircle::centered(radii.r_prime)?).discretize(big_nodes)?;
    let mut idx = vec![0usize; n];
    let mut values = Vec::new();
    let mut magnitude = 0.0;
    loop {
        let xi: Vec<C64> = idx.iter().map(|&a| xi_grid.nodes[a]).collect();
        let w_xi: C64 = idx.iter().map(|&a| xi_grid.weights[a]).product();
        let mut grids = Vec::with_capacity(n);
        let mut degenerate = false;
        for &l in images {
            if l == 0 {
                grids.push(big.clone());
            } else {
                let rho = (0.5 / radii.r).min(small_radius(&xi, l - 1));
                if rho < 1e-9 {
                    degenerate = true;
                    break;
                }
                let c = ContourCircle::new(xi[l - 1].inv(), rho, Orientation::Negative)?;
                grids.push(crate::numerics::Contour::from(c).discretize(m)?);
            }
        }
        if !degenerate {
            let mut jdx = vec![0usize; n];
            loop {
                let zeta: Vec<C64> = (0..n).map(|k| grids[k].nodes[jdx[k]]).collect();
                let w: C64 = (0..n).map(|k| grids[k].weights[jdx[k]]).product::<C64>() * w_xi;
                let term = w * full_integrand(params, x, &xi, &zeta)?;
                magnitude += term.norm();
                values.push(term);
                if !odometer(&mut jdx, |k| grids[k].len()) {
                    break;
                }
            }
        }
        if !odometer(&mut idx, |_| m) {
            break;
        }
    }
    Ok(ExpansionTerm { value: pairwise_sum(&values), magnitude })
}

fn odometer(idx: &mut [usize], len: impl Fn(usize) -> usize) -> bool {
    for d in (0..idx.len()).rev() {
        idx[d] += 1;
        if idx[d] < len(d) {
            return true;
        }
        idx[d] = 0;
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourEquivalence {
    pub circles: f64,
    pub circles_error: f64,
    pub steep: f64,
    pub steep_error: f64,
    pub difference: f64,
}

fn steep_grid(kind: SteepKind, r_outer: f64, t: f64, kappa: f64) -> Result<QuadGrid> {
    let c = steep_contour(kind, r_outer)?;
    let focus = junctions(&c);
    Ok(graded_grid(&c, &focus, kappa, 1e-12, (2.0 / t.max(1e-3)).min(2.0), 16))
}

/// N = 1: the series on (C_R, C_{R′}) against the same two terms with ξ on
/// Γ₊ (outer radius R), ζ on Γ₋ (outer radius R′) and the residue term on
/// Γ̂. The Γ± integrand is singular at (ξ, ζ) = (i, −i), where both contours
/// meet the pole ξζ = 1; the panels are graded geometrically toward ±i.
pub fn lemma75_check(params: &ModelParams, x: i64, opts: &QuadOptions) -> Result<ContourEquivalence> {
    check_series(params)?;
    if params.n() != 1 {
        return Err(Error::InvalidInput("the contour-equivalence check is for N = 1".into()));
    }
    let series = theorem4_sum(params, x, opts)?;
    let radii = series.radii;
    let (t, delta, y) = (params.t, params.delta, params.y.first());
    let eval = |kappa: f64| -> Result<C64> {
        let gp = steep_grid(SteepKind::Plus, radii.r, t, kappa)?;
        let gm = steep_grid(SteepKind::Minus, radii.r_prime, t, kappa)?;
        let u: Vec<C64> = gp.nodes.iter().zip(&gp.weights).map(|(&z, &w)| w * exp_factor(z, x, y, t, delta, 1.0)).collect();
        let v: Vec<C64> = gm.nodes.iter().zip(&gm.weights).map(|(&z, &w)| w * exp_factor(z, x, y, t, delta, -1.0)).collect();
        let rows: Vec<C64> = gp
            .nodes
            .iter()
            .zip(&u)
            .map(|(&a, &ua)| {
                let terms: Vec<C64> = gm.nodes.iter().zip(&v).map(|(&b, &vb)| vb / (1.0 - a * b)).collect();
                ua * pairwise_sum(&terms)
            })
            .collect();
        let grading = Grading { kappa, h_min: 1e-3, h_max: 1.0, order: 16, images: true, junctions: true };
        let hat = gamma_hat_grid(&default_gamma_hat(delta)?, delta, grading);
        let residue = hat.integrate(|z| z.inv());
        Ok(pairwise_sum(&rows) + residue)
    };
    let coarse = eval(1.0)?;
    let fine = eval(0.5)?;
    Ok(ContourEquivalence {
        circles: series.value,
        circles_error: series.error,
        steep: fine.re,
        steep_error: (fine - coarse).norm(),
        difference: (fine.re - series.value).abs(),
    })
}

// ---------------------------------------------------------------------------
// Saddle-point bound on Γ₊

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma61Report {
    pub t: f64,
    pub alpha: f64,
    pub r_outer: f64,
    pub samples: usize,
    /// max Re{G(ξ) − G(i)} over all samples of Γ₊.
    pub max_on_contour: f64,
    /// max Re{G(ξ) − G(i)} over samples with |ξ − i| ≥ t^{−α}.
    pub max_outside: f64,
    /// −max_outside / t^{1−3α}.
    pub constant: f64,
    pub worst_point: C64,
    pub holds: bool,
}

/// Re{G(ξ) − G(i)} at x = −2t, i.e. −2t log|ξ| + t Im(ξ + 1/ξ).
pub fn re_g_at_edge(xi: C64, t: f64) -> f64 {
    -2.0 * t * xi.norm().ln() + t * (xi + xi.inv()).im
}

/// Samples Γ₊ at x = −2t and reports the empirical constant c in
/// Re{G(ξ) − G(i)} ≤ −c·t^{1−3α} outside the ball B(i, t^{−α}). The two
/// points where the rays cross the ball boundary are always included.
pub fn lemma61_bound_check(t: f64, alpha: f64, r_outer: f64, samples: usize) -> Result<Lemma61Report> {
    if !(alpha > 0.25 && alpha < 1.0 / 3.0) {
        return Err(Error::InvalidInput(format!("α = {alpha} outside (1/4, 1/3)")));
    }
    if !(t > 1.0) {
        return Err(Error::InvalidInput(format!("t = {t} must exceed 1")));
    }
    let contour = steep_contour(SteepKind::Plus, r_outer)?;
    let radius = t.powf(-alpha);
    let mut pts = contour.sample(samples);
    let n_contour = pts.len();
    pts.push(C64::i() + C64::from_polar(radius, PI / 6.0));
    pts.push(C64::i() + C64::from_polar(radius, 5.0 * PI / 6.0));
    let max_on_contour = pts[..n_contour].iter().map(|&z| re_g_at_edge(z, t)).fold(f64::NEG_INFINITY, f64::max);
    let (worst_point, max_outside) = pts
        .iter()
        .filter(|z| (*z - C64::i()).norm() >= radius * (1.0 - 1e-12))
        .map(|&z| (z, re_g_at_edge(z, t)))
        .fold((C64::new(f64::NAN, f64::NAN), f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    let constant = -max_outside / t.powf(1.0 - 3.0 * alpha);
    Ok(Lemma61Report {
        t,
        alpha,
        r_outer,
        samples: pts.len(),
        max_on_contour,
        max_outside,
        constant,
        worst_point,
        holds: constant > 0.0 && max_on_contour <= 1e-12,
    })
}

// ---------------------------------------------------------------------------
// Edge formula ingredients: B factors and F(σ, S)

/// σ ∈ S_N (0-based, σ[j] = σ(j)) with a subset S ⊆ {0..N−1}; the pair
/// stands for (τ, γ) = (σ|_{S^c}, σ|_S).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SigmaSubset {
    pub sigma: Vec<usize>,
    pub in_s: Vec<bool>,
}

impl SigmaSubset {
    pub fn new(sigma: Vec<usize>, in_s: Vec<bool>) -> Result<Self> {
        if sigma.len() != in_s.len() {
            return Err(Error::InvalidInput("σ and S have different lengths".into()));
        }
        crate::bethe::PermutationTerm::new(sigma.clone())?;
        Ok(Self { sigma, in_s })
    }

    /// (j, σ(j)) for j ∈ S^c, ascending in j.
    pub fn complement_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.sigma.len()).filter(|&j| !self.in_s[j]).map(|j| (j, self.sigma[j])).collect()
    }
}

/// B over a partial bijection given as (j, target) pairs ascending in j:
/// the product over j < k with target(j) > target(k) of
/// (1 + ξ_{t(k)}ξ_{t(j)} − 2Δξ_{t(j)}) / (1 + ξ_{t(k)}ξ_{t(j)} − 2Δξ_{t(k)}).
fn b_pairs(xi: &[C64], pairs: &[(usize, usize)], delta: f64) -> Result<C64> {
    let mut v = C64::new(1.0, 0.0);
    for (a, &(_, tj)) in pairs.iter().enumerate() {
        for &(_, tk) in &pairs[a + 1..] {
            if tj > tk {
                v *= b_ratio(xi[tk], xi[tj], delta)?;
            }
        }
    }
    Ok(v)
}

fn b_ratio(u: C64, w: C64, delta: f64) -> Result<C64> {
    Ok((1.0 + u * w - 2.0 * delta * w) * checked_inv(1.0 + u * w - 2.0 * delta * u, "B factor")?)
}

/// (ν₁, ν₂, ν) at position `j` of a partial bijection.
fn nu_pairs(pairs: &[(usize, usize)], j: usize) -> Option<(i64, i64, i64)> {
    let &(_, tj) = pairs.iter().find(|p| p.0 == j)?;
    let nu1 = pairs.iter().filter(|&&(k, tk)| k < j && tk > tj).count() as i64;
    let nu2 = pairs.iter().filter(|&&(k, tk)| k > j && tj > tk).count() as i64;
    Some((nu1, nu2, j as i64 - tj as i64 + nu2 - nu1))
}

pub fn b_factor(xi: &[C64], ss: &SigmaSubset, delta: f64) -> Result<C64> {
    b_pairs(xi, &ss.complement_pairs(), delta)
}

/// (ν₁, ν₂, ν) for j ∈ S^c; None when j ∈ S.
pub fn nu_counts(ss: &SigmaSubset, j: usize) -> Option<(i64, i64, i64)> {
    nu_pairs(&ss.complement_pairs(), j)
}

/// (ξ − (2Δ + i)) / ((1 + 2iΔ)ξ − i): the limit of each U-type factor of f
/// as the J₁ variables approach i.
pub fn edge_ratio(xi: C64, delta: f64) -> C64 {
    (xi - C64::new(2.0 * delta, 1.0)) / (C64::new(1.0, 2.0 * delta) * xi - C64::i())
}

/// Leading term of f(ξ, ζ; τ) under the edge scaling:
/// B(ξ; τ) Π_{j∈K₂} ratio(ξ_{τ(j)})^{ν(j)} ξ_{τ(j)}^{y_j − y_{τ(j)} − 1}.
pub fn f_limit(xi: &[C64], tau: &TauMap, y: &[i64], delta: f64) -> Result<C64> {
    let pairs = tau.residue_pairs();
    let mut v = b_pairs(xi, &pairs, delta)?;
    for &(j, tj) in &pairs {
        let (_, _, nu) = nu_pairs(&pairs, j).expect("j in K₂");
        v *= edge_ratio(xi[tj], delta).powi(nu as i32) * xi[tj].powi((y[j] - y[tj] - 1) as i32);
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FEstimate {
    pub value: C64,
    pub error: f64,
}

struct HatGrid {
    nodes: Vec<C64>,
    weights: Vec<C64>,
}

/// Pair table M[a·n + b] for variables (p, q) at nodes (a, b).
struct Edge {
    p: usize,
    q: usize,
    table: Vec<C64>,
}

impl Edge {
    /// The table oriented as (u, w), transposed if stored the other way.
    fn oriented(&self, u: usize, n: usize) -> Vec<C64> {
        if self.p == u {
            self.table.clone()
        } else {
            let mut t = vec![C64::new(0.0, 0.0); n * n];
            for a in 0..n {
                for b in 0..n {
                    t[b * n + a] = self.table[a * n + b];
                }
            }
            t
        }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re - x.im * y.im;
        im += x.re * y.im + x.im * y.re;
    }
    C64::new(re, im)
}

/// Σ_b g_b M[a, b] for each a.
fn row_sums(m: &[C64], g: &[C64]) -> Vec<C64> {
    m.chunks(g.len()).map(|row| dot(row, g)).collect()
}

/// Tensor sum of Π_v g_v Π_edges M_e over one connected component of at
/// most three variables.
fn component_sum(n: usize, vars: &[usize], g: &[Vec<C64>], edges: &[&Edge]) -> C64 {
    match (vars.len(), edges.len()) {
        (1, _) => pairwise_sum(&g[vars[0]]),
        (2, 1) => {
            let (u, w) = (vars[0], vars[1]);
            dot(&row_sums(&edges[0].oriented(u, n), &g[w]), &g[u])
        }
        (3, 2) => {
            // path: sum over the centre last
            let centre = *vars.iter().find(|&&v| edges.iter().all(|e| e.p == v || e.q == v)).expect("path centre");
            let mut acc = g[centre].clone();
            for e in edges {
                let other = if e.p == centre { e.q } else { e.p };
                for (x, r) in acc.iter_mut().zip(row_sums(&e.oriented(centre, n), &g[other])) {
                    *x *= r;
                }
            }
            pairwise_sum(&acc)
        }
        (3, 3) => {
            let (u, v, w) = (vars[0], vars[1], vars[2]);
            let find = |p: usize, q: usize| edges.iter().find(|e| (e.p == p && e.q == q) || (e.p == q && e.q == p)).expect("edge");
            let uv = find(u, v).oriented(u, n);
            let uw = find(u, w).oriented(u, n);
            let vw = find(v, w).oriented(v, n);
            let outer: Vec<C64> = (0..n)
                .map(|a| {
                    let h: Vec<C64> = (0..n).map(|c| g[w][c] * uw[a * n + c]).collect();
                    let inner: Vec<C64> = (0..n).map(|b| g[v][b] * uv[a * n + b] * dot(&vw[b * n..(b + 1) * n], &h)).collect();
                    g[u][a] * pairwise_sum(&inner)
                })
                .collect();
            pairwise_sum(&outer)
        }
        _ => unreachable!("components have at most three variables"),
    }
}

/// ∮_{Γ̂}… of the F(σ, S) integrand on one grid.
fn f_on_grid(grid: &HatGrid, pairs: &[(usize, usize)], y: &[i64], delta: f64) -> Result<C64> {
    let n = grid.nodes.len();
    let vars: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let pos = |target: usize| vars.iter().position(|&v| v == target).expect("target present");
    let mut g = Vec::with_capacity(pairs.len());
    for &(j, tj) in pairs {
        let (_, _, nu) = nu_pairs(pairs, j).expect("j present");
        let p = y[j] - y[tj] - 1;
        let row: Vec<C64> = grid
            .nodes
            .iter()
            .zip(&grid.weights)
            .map(|(&z, &w)| w * edge_ratio(z, delta).powi(nu as i32) * (C64::i() * z).powi(p as i32))
            .collect();
        g.push(row);
    }
    // B factors, (p, q) = (var of t(k), var of t(j))
    let mut edges = Vec::new();
    for (a, &(_, tj)) in pairs.iter().enumerate() {
        for &(_, tk) in &pairs[a + 1..] {
            if tj > tk {
                let mut table = Vec::with_capacity(n * n);
                for &zu in &grid.nodes {
                    for &zw in &grid.nodes {
                        table.push(b_ratio(zu, zw, delta)?);
                    }
                }
                edges.push(Edge { p: pos(tk), q: pos(tj), table });
            }
        }
    }
    let k = vars.len();
    let mut comp: Vec<usize> = (0..k).collect();
    fn find(c: &mut [usize], i: usize) -> usize {
        if c[i] != i {
            let r = find(c, c[i]);
            c[i] = r;
        }
        c[i]
    }
    for e in &edges {
        let (rp, rq) = (find(&mut comp, e.p), find(&mut comp, e.q));
        comp[rp] = rq;
    }
    let mut total = C64::new(1.0, 0.0);
    for root in 0..k {
        if find(&mut comp, root) != root {
            continue;
        }
        let members: Vec<usize> = (0..k).filter(|&v| find(&mut comp, v) == root).collect();
        let local: Vec<&Edge> = edges.iter().filter(|e| members.contains(&e.p)).collect();
        total *= component_sum(n, &members, &g, &local);
    }
    Ok(total)
}

fn hat_grid(contour: &PiecewiseContour, delta: f64, grading: Grading) -> HatGrid {
    let g = gamma_hat_grid(contour, delta, grading);
    HatGrid { nodes: g.nodes, weights: g.weights }
}

/// F for a partial bijection (j, σ(j)), j ∈ S^c, on Γ̂: two refinement
/// levels, the finer value with their difference as error.
fn f_pairs(pairs: &[(usize, usize)], y: &[i64], delta: f64, contour: &PiecewiseContour) -> Result<FEstimate> {
    f_pairs_graded(pairs, y, delta, contour, Grading::COARSE, Grading::FINE)
}

fn f_pairs_graded(
    pairs: &[(usize, usize)],
    y: &[i64],
    delta: f64,
    contour: &PiecewiseContour,
    coarse: Grading,
    fine: Grading,
) -> Result<FEstimate> {
    if pairs.is_empty() {
        return Ok(FEstimate { value: C64::new(1.0, 0.0), error: 0.0 });
    }
    if pairs.len() > MAX_F_VARIABLES {
        return Err(Error::InvalidInput(format!("F(σ, S) supports |S^c| ≤ {MAX_F_VARIABLES}")));
    }
    let pre = C64::i().powi(pairs.len() as i32);
    let coarse = pre * f_on_grid(&hat_grid(contour, delta, coarse), pairs, y, delta)?;
    let fine = pre * f_on_grid(&hat_grid(contour, delta, fine), pairs, y, delta)?;
    Ok(FEstimate { value: fine, error: (fine - coarse).norm() })
}

/// F(σ, S) = i^{|S^c|} ∮_{Γ̂}… B(ξ; σ, S) Π_{j∈S^c} ratio(ξ_{σ(j)})^{ν(j)}
/// (iξ_{σ(j)})^{y_j − y_{σ(j)} − 1}, with Γ̂ from [`default_gamma_hat`].
pub fn f_of(ss: &SigmaSubset, delta: f64, y: &ParticleConfig) -> Result<FEstimate> {
    if ss.sigma.len() != y.len() {
        return Err(Error::InvalidInput(format!("σ has {} entries, Y has {}", ss.sigma.len(), y.len())));
    }
    f_pairs(&ss.complement_pairs(), y.sites(), delta, &default_gamma_hat(delta)?)
}

/// F(σ, S) with explicit gradings for the two refinement levels.
pub fn f_of_graded(ss: &SigmaSubset, delta: f64, y: &ParticleConfig, coarse: Grading, fine: Grading) -> Result<FEstimate> {
    f_pairs_graded(&ss.complement_pairs(), y.sites(), delta, &default_gamma_hat(delta)?, coarse, fine)
}

/// Number of Γ̂ quadrature nodes for a grading.
pub fn gamma_hat_nodes(delta: f64, grading: Grading) -> Result<usize> {
    Ok(gamma_hat_grid(&default_gamma_hat(delta)?, delta, grading).nodes.len())
}

/// Σ_σ (−1)^σ F(σ, ∅).
pub fn sign_sum_f_empty(delta: f64, y: &ParticleConfig) -> Result<FEstimate> {
    let n = y.len();
    let contour = default_gamma_hat(delta)?;
    let mut values = Vec::new();
    let mut error = 0.0;
    for p in all_permutations(n) {
        let pairs: Vec<(usize, usize)> = p.perm.iter().copied().enumerate().collect();
        let f = f_pairs(&pairs, y.sites(), delta, &contour)?;
        values.push(p.sign() * f.value);
        error += f.error;
    }
    Ok(FEstimate { value: pairwise_sum(&values), error })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureReport {
    pub s: f64,
    pub t: f64,
    pub v: Vec<f64>,
    pub value: f64,
    pub error: f64,
    /// det(I − t^{−1/3} K_Ai(s + v_j, s + v_k)), the Δ = 0 closed form.
    pub free_determinant: f64,
}

/// The finite sum Σ_σ (−1)^σ Σ_S (−1)^{|S|} t^{−|S|/3} F(σ, S)
/// Π_{k∈S} K_Ai(s + v_{σ(k)}, s + v_k) with v_j = (y_j + 1)/t^{1/3}.
pub fn conjecture_partial_sum(delta: f64, y: &ParticleConfig, s: f64, t: f64) -> Result<ConjectureReport> {
    let n = y.len();
    if n > 3 {
        return Err(Error::InvalidInput(format!("the partial sum runs over N!·2^N terms; N ≤ 3, got {n}")));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("t = {t} must be positive")));
    }
    let scale = t.cbrt();
    let v: Vec<f64> = y.sites().iter().map(|&yj| (yj + 1) as f64 / scale).collect();
    let pts: Vec<f64> = v.iter().map(|vj| s + vj).collect();
    let k = airy_kernel_matrix(&pts, &pts)?;
    let contour = default_gamma_hat(delta)?;
    let mut memo: HashMap<Vec<(usize, usize)>, FEstimate> = HashMap::new();
    let mut values = Vec::new();
    let mut error = 0.0;
    for p in all_permutations(n) {
        for mask in 0u32..(1 << n) {
            let in_s: Vec<bool> = (0..n).map(|j| mask & (1 << j) != 0).collect();
            let ss = SigmaSubset { sigma: p.perm.clone(), in_s: in_s.clone() };
            let pairs = ss.complement_pairs();
            let f = match memo.get(&pairs) {
                Some(f) => *f,
                None => {
                    let f = f_pairs(&pairs, y.sites(), delta, &contour)?;
                    memo.insert(pairs, f);
                    f
                }
            };
            let size = mask.count_ones() as i32;
            let mut coef = p.sign() * parity(size as usize) * scale.powi(-size);
            for j in (0..n).filter(|&j| in_s[j]) {
                coef *= k[p.perm[j] * n + j];
            }
            values.push(coef * f.value);
            error += coef.abs() * f.error;
        }
    }
    let value = pairwise_sum(&values);
    Ok(ConjectureReport { s, t, v, value: value.re, error, free_determinant: free_edge_determinant(y, s, t)? })
}

/// det(I − t^{−1/3} K_Ai(s + (y_j+1)/t^{1/3}, s + (y_k+1)/t^{1/3})).
pub fn free_edge_determinant(y: &ParticleConfig, s: f64, t: f64) -> Result<f64> {
    let n = y.len();
    let scale = t.cbrt();
    let pts: Vec<f64> = y.sites().iter().map(|&yj| s + (yj + 1) as f64 / scale).collect();
    let k = airy_kernel_matrix(&pts, &pts)?;
    let m: Vec<f64> = (0..n * n).map(|e| f64::from(u8::from(e / n == e % n)) - k[e] / scale).collect();
    det_real(&m, n)
}

// ---------------------------------------------------------------------------
// Edge approximation rates

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub t: Vec<f64>,
    /// |f − leading term| at each t.
    pub f_error: Vec<f64>,
    /// |t^{−1/3} d(ξ_j, ζ_k) − 1/((ζ̃_k − ξ̃_j)(−2Δ))| for the first pair in
    /// J₁ × K₁, when both are non-empty.
    pub d_error: Vec<f64>,
    /// e(t_first)/e(t_last) over (t_last/t_first)^{1/3}, for f and d; NaN
    /// when the errors vanish identically.
    pub f_rate: f64,
    pub d_rate: f64,
    /// The same normalised ratio for each consecutive pair of times.
    pub f_steps: Vec<f64>,
    pub d_steps: Vec<f64>,
    /// Every normalised ratio lies in [1/2, 2], or the error vanishes.
    pub within: bool,
}

/// Evaluates f(ξ, ζ; τ) at the edge scaling ξ_j = i + iξ̃_j t^{−1/3} (j ∈ J₁),
/// ζ_k = −i + iζ̃_k t^{−1/3} (k ∈ K₁), with ξ_{J₂} held at `xi_fixed`, and
/// compares with its claimed leading term. `xi_tilde`, `zeta_tilde` and
/// `xi_fixed` have length N; only the entries selected by τ are read.
pub fn appendix_b_rate_check(
    tau: &TauMap,
    y: &[i64],
    delta: f64,
    xi_tilde: &[C64],
    zeta_tilde: &[C64],
    xi_fixed: &[C64],
    ts: &[f64],
) -> Result<RateReport> {
    let n = tau.n();
    if y.len() != n || xi_tilde.len() != n || zeta_tilde.len() != n || xi_fixed.len() != n || ts.len() < 2 {
        return Err(Error::InvalidInput("rate check needs length-N inputs and at least two times".into()));
    }
    let (j1, j2, k1) = (tau.j1(), tau.j2(), tau.k1());
    let i = C64::i();
    let mut f_error = Vec::new();
    let mut d_error = Vec::new();
    for &t in ts {
        let e = t.powf(-1.0 / 3.0);
        let mut xi = vec![C64::new(0.0, 0.0); n];
        let mut zeta = vec![C64::new(0.0, 0.0); n];
        for &j in &j1 {
            xi[j] = i + i * xi_tilde[j] * e;
        }
        for &j in &j2 {
            xi[j] = xi_fixed[j];
        }
        for &k in &k1 {
            zeta[k] = -i + i * zeta_tilde[k] * e;
        }
        let f = f_factor(&xi, &zeta, tau, y, delta)?;
        f_error.push((f - f_limit(&xi, tau, y, delta)?).norm());
        if let (Some(&j), Some(&k)) = (j1.first(), k1.first()) {
            let lead = 1.0 / ((zeta_tilde[k] - xi_tilde[j]) * (-2.0 * delta));
            d_error.push((d_weight(xi[j], zeta[k], delta)? * e - lead).norm());
        }
    }
    let exact = |errs: &[f64]| errs.iter().all(|&e| e <= 1e-14);
    let rate = |errs: &[f64], a: usize, b: usize| {
        if exact(errs) {
            f64::NAN
        } else {
            errs[a] / errs[b] / (ts[b] / ts[a]).cbrt()
        }
    };
    let last = ts.len() - 1;
    let f_rate = rate(&f_error, 0, last);
    let d_rate = rate(&d_error, 0, last);
    let f_steps: Vec<f64> = (0..last).map(|a| rate(&f_error, a, a + 1)).collect();
    let d_steps: Vec<f64> = (0..last).map(|a| rate(&d_error, a, a + 1)).collect();
    let ok = |r: &f64| r.is_nan() || (0.5..=2.0).contains(r);
    let within = [f_rate, d_rate].iter().chain(&f_steps).chain(&d_steps).all(ok);
    Ok(RateReport { t: ts.to_vec(), f_error, d_error, f_rate, d_rate, f_steps, d_steps, within })
}
