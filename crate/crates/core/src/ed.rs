//! Exact propagation of the XXZ chain in a finite N-particle sector.
//!
//! Particles are up-spins on a window of ℤ; every site outside the window is
//! a down-spin. The sector Hamiltonian has hopping amplitude 1 and diagonal
//! −Δ per antiparallel bond, so a lone particle sees −2Δ. The propagator
//! e^{−itH} is applied with a Chebyshev expansion whose coefficients are
//! Bessel functions.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::model::{ModelParams, ParticleConfig};
use crate::special::BesselSeries;

const COEFF_CUTOFF: f64 = 1e-16;

/// Inclusive range of lattice sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LatticeWindow {
    pub left: i64,
    pub right: i64,
}

impl LatticeWindow {
    pub fn new(left: i64, right: i64) -> Result<Self> {
        if left >= right {
            return Err(Error::InvalidInput(format!("window [{left}, {right}] is empty or a point")));
        }
        Ok(Self { left, right })
    }

    pub fn size(&self) -> usize {
        (self.right - self.left + 1) as usize
    }

    pub fn contains(&self, x: i64) -> bool {
        self.left <= x && x <= self.right
    }

    /// Window around `y` padded by [`padding`] on both sides.
    pub fn padded(y: &ParticleConfig, t: f64) -> Self {
        let p = padding(t);
        Self { left: y.first() - p, right: y.last() + p }
    }
}

/// 2t + 10 t^{1/3} + 20, rounded up.
pub fn padding(t: f64) -> i64 {
    (2.0 * t + 10.0 * t.cbrt() + 20.0).ceil() as i64
}

/// All N-particle configurations in a window, lexicographically ordered.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub window: LatticeWindow,
    pub n: usize,
    pub states: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
}

impl SectorBasis {
    pub fn new(window: LatticeWindow, n: usize) -> Result<Self> {
        if n == 0 || n > window.size() {
            return Err(Error::InvalidInput(format!(
                "window of {} sites cannot hold {n} particles",
                window.size()
            )));
        }
        let mut states = Vec::new();
        let mut cur: Vec<i64> = (0..n as i64).map(|k| window.left + k).collect();
        loop {
            states.push(cur.clone());
            // advance to the next combination in lexicographic order
            let mut k = n;
            loop {
                if k == 0 {
                    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
                    return Ok(Self { window, n, states, index });
                }
                k -= 1;
                if cur[k] < window.right - (n - 1 - k) as i64 {
                    cur[k] += 1;
                    for j in k + 1..n {
                        cur[j] = cur[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, sites: &[i64]) -> Option<usize> {
        self.index.get(sites).copied()
    }
}

/// Real symmetric sparse matrix in triplet form with a row-compressed copy
/// for application.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    pub dimension: usize,
    pub entries: Vec<(usize, usize, f64)>,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseHamiltonian {
    fn from_triplets(dimension: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_start = vec![0; dimension + 1];
        for &(r, _, _) in &entries {
            row_start[r + 1] += 1;
        }
        for r in 0..dimension {
            row_start[r + 1] += row_start[r];
        }
        let cols = entries.iter().map(|e| e.1).collect();
        let vals = entries.iter().map(|e| e.2).collect();
        Self { dimension, entries, row_start, cols, vals }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_start[r]..self.row_start[r + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    /// Dense copy, for small test matrices.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.dimension]; self.dimension];
        for &(r, c, v) in &self.entries {
            m[r][c] += v;
        }
        m
    }

    fn apply_shifted(&self, v: &[C64], center: f64, scale: f64, out: &mut [C64]) {
        out.par_iter_mut().enumerate().for_each(|(r, o)| {
            let mut s = -center * v[r];
            for (c, h) in self.row(r) {
                s += h * v[c];
            }
            *o = s / scale;
        });
    }

    /// Spectrum enclosure from Gershgorin discs.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.dimension {
            let mut d = 0.0;
            let mut off = 0.0;
            for (c, v) in self.row(r) {
                if c == r {
                    d += v;
                } else {
                    off += v.abs();
                }
            }
            lo = lo.min(d - off);
            hi = hi.max(d + off);
        }
        (lo, hi)
    }
}

/// Sector Hamiltonian: hops of ±1 to empty sites, and −Δ for every bond of ℤ
/// joining an occupied and an empty site.
pub fn build_hamiltonian(basis: &SectorBasis, delta: f64) -> SparseHamiltonian {
    let mut entries = Vec::new();
    for (i, s) in basis.states.iter().enumerate() {
        let adjacent = s.windows(2).filter(|w| w[1] == w[0] + 1).count();
        let boundaries = 2 * (s.len() - adjacent);
        if delta != 0.0 {
            entries.push((i, i, -delta * boundaries as f64));
        }
        for k in 0..s.len() {
            for step in [-1i64, 1] {
                let target = s[k] + step;
                if !basis.window.contains(target) || s.binary_search(&target).is_ok() {
                    continue;
                }
                let mut moved = s.clone();
                moved[k] = target;
                let j = basis.index_of(&moved).expect("hop stays in the sector");
                entries.push((i, j, 1.0));
            }
        }
    }
    SparseHamiltonian::from_triplets(basis.len(), entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn basis_state(basis: &SectorBasis, config: &ParticleConfig) -> Result<Self> {
        let i = basis
            .index_of(config.sites())
            .ok_or_else(|| Error::InvalidInput(format!("{:?} is not in the basis", config.sites())))?;
        let mut amplitudes = vec![C64::new(0.0, 0.0); basis.len()];
        amplitudes[i] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// ψ(t) = e^{−itH} ψ₀ by Chebyshev expansion on the Gershgorin interval.
pub fn evolve(h: &SparseHamiltonian, psi0: &StateVector, t: f64) -> Result<StateVector> {
    if psi0.amplitudes.len() != h.dimension {
        return Err(Error::InvalidInput("state and Hamiltonian dimensions differ".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time {t} must be finite and non-negative")));
    }
    if t == 0.0 {
        return Ok(psi0.clone());
    }
    let (lo, hi) = h.spectral_bounds();
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::NonFinite("spectral bounds".into()));
    }
    let center = 0.5 * (lo + hi);
    let half = (0.5 * (hi - lo)).max(1e-12);
    let arg = half * t;
    let kmax = (arg + 60.0 + 20.0 * arg.cbrt()).ceil() as i64;
    let bessel = BesselSeries::j(0, kmax, arg)?;
    let phase = C64::from_polar(1.0, -t * center);
    let dim = h.dimension;
    let mut prev = psi0.amplitudes.clone();
    let mut cur = vec![C64::new(0.0, 0.0); dim];
    h.apply_shifted(&prev, center, half, &mut cur);
    let mut acc: Vec<C64> = prev.iter().map(|v| v * bessel.get(0)).collect();
    let mut minus_i_pow = C64::new(0.0, -1.0);
    let mut next = vec![C64::new(0.0, 0.0); dim];
    let mut k = 1;
    loop {
        let c = minus_i_pow * (2.0 * bessel.get(k));
        acc.par_iter_mut().zip(&cur).for_each(|(a, v)| *a += c * v);
        if k as f64 > arg && bessel.get(k).abs() < COEFF_CUTOFF {
            break;
        }
        if k >= kmax {
            return Err(Error::Truncation(format!("Chebyshev series needs more than {kmax} terms")));
        }
        h.apply_shifted(&cur, center, half, &mut next);
        next.par_iter_mut().zip(&prev).for_each(|(n, p)| *n = 2.0 * *n - p);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        minus_i_pow *= C64::new(0.0, -1.0);
        k += 1;
    }
    Ok(StateVector { amplitudes: acc.into_iter().map(|a| a * phase).collect() })
}

/// Probability that the m-th particle (1-based) sits at x.
pub fn marginal_mth_particle(basis: &SectorBasis, psi: &StateVector, m: usize, x: i64) -> Result<f64> {
    if m == 0 || m > basis.n {
        return Err(Error::InvalidInput(format!("particle index {m} outside 1..={}", basis.n)));
    }
    Ok(basis
        .states
        .iter()
        .zip(&psi.amplitudes)
        .filter(|(s, _)| s[m - 1] == x)
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

/// Full distribution of the m-th particle.
pub fn marginal_table(basis: &SectorBasis, psi: &StateVector, m: usize) -> Result<BTreeMap<i64, f64>> {
    if m == 0 || m > basis.n {
        return Err(Error::InvalidInput(format!("particle index {m} outside 1..={}", basis.n)));
    }
    let mut table = BTreeMap::new();
    for (s, a) in basis.states.iter().zip(&psi.amplitudes) {
        *table.entry(s[m - 1]).or_insert(0.0) += a.norm_sqr();
    }
    Ok(table)
}

/// Propagated domain-wall state on the padded window around Y.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub basis: SectorBasis,
    pub psi: StateVector,
}

impl OracleRun {
    pub fn new(params: &ModelParams) -> Result<Self> {
        Self::with_window(params, LatticeWindow::padded(&params.y, params.t))
    }

    pub fn with_window(params: &ModelParams, window: LatticeWindow) -> Result<Self> {
        let basis = SectorBasis::new(window, params.n())?;
        let h = build_hamiltonian(&basis, params.delta);
        let psi0 = StateVector::basis_state(&basis, &params.y)?;
        let psi = evolve(&h, &psi0, params.t)?;
        Ok(Self { basis, psi })
    }

    pub fn amplitude(&self, x: &ParticleConfig) -> C64 {
        self.basis.index_of(x.sites()).map_or(C64::new(0.0, 0.0), |i| self.psi.amplitudes[i])
    }

    pub fn marginal(&self, m: usize, x: i64) -> Result<f64> {
        marginal_mth_particle(&self.basis, &self.psi, m, x)
    }
}
