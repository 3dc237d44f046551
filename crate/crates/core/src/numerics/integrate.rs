use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::contour::{Contour, QuadGrid};
use super::sum::{pairwise_sum, NeumaierSum};
use crate::error::{Error, Result};

type Factor = Box<dyn Fn(C64) -> C64 + Send + Sync>;

/// One integration variable: its contour, starting node count and an
/// optional single-variable factor folded into the weights.
pub struct Dim {
    pub contour: Contour,
    pub m0: usize,
    factor: Option<Factor>,
}

impl Dim {
    pub fn new(contour: impl Into<Contour>, m0: usize) -> Self {
        Self { contour: contour.into(), m0, factor: None }
    }

    pub fn with_factor(mut self, f: impl Fn(C64) -> C64 + Send + Sync + 'static) -> Self {
        self.factor = Some(Box::new(f));
        self
    }

    fn grid(&self, m: usize) -> Result<(QuadGrid, Vec<C64>)> {
        let g = self.contour.discretize(m)?;
        let wg = match &self.factor {
            Some(f) => g.nodes.iter().zip(&g.weights).map(|(&z, &w)| w * f(z)).collect(),
            None => g.weights.clone(),
        };
        Ok((g, wg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_nodes: usize,
    pub workers: Option<usize>,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_nodes: 512, workers: None }
    }
}

impl QuadOptions {
    pub fn with_rtol(self, rtol: f64) -> Self {
        Self { rtol, ..self }
    }

    pub fn with_atol(self, atol: f64) -> Self {
        Self { atol, ..self }
    }

    pub fn with_max_nodes(self, max_nodes: usize) -> Self {
        Self { max_nodes, ..self }
    }

    pub fn with_workers(self, workers: Option<usize>) -> Self {
        Self { workers, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: C64,
    pub error: f64,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VecEstimate {
    pub values: Vec<C64>,
    pub errors: Vec<f64>,
    pub nodes: Vec<usize>,
}

/// Scalar tensor-product integral, see [`integrate_nd_vec`].
pub fn integrate_nd<F>(dims: &[Dim], f: F, opts: &QuadOptions) -> Result<Estimate>
where
    F: Fn(&[C64]) -> C64 + Sync,
{
    let r = integrate_nd_vec(dims, 1, |z, out| out[0] = f(z), opts)?;
    Ok(Estimate { value: r.values[0], error: r.errors[0], nodes: r.nodes })
}

/// Tensor-product contour integral of a vector-valued integrand.
///
/// `f` receives the node tuple and fills `out` (length `n_out`). Node counts
/// double in every dimension until consecutive levels agree to
/// `max(atol, rtol·|I|)` componentwise; the returned error is the difference
/// between the last two levels.
pub fn integrate_nd_vec<F>(dims: &[Dim], n_out: usize, f: F, opts: &QuadOptions) -> Result<VecEstimate>
where
    F: Fn(&[C64], &mut [C64]) + Sync,
{
    if dims.is_empty() {
        return Err(Error::InvalidInput("integration needs at least one dimension".into()));
    }
    let run = || -> Result<VecEstimate> {
        let mut ms: Vec<usize> = dims.iter().map(|d| d.m0).collect();
        let mut prev = evaluate(dims, &ms, n_out, &f)?;
        loop {
            let next_ms: Vec<usize> = ms.iter().map(|m| 2 * m).collect();
            if next_ms.iter().any(|&m| m > opts.max_nodes) {
                let cur = prev.clone();
                return Err(Error::Convergence {
                    nodes: ms.iter().copied().max().unwrap_or(0),
                    last: (cur[0].re, cur[0].im),
                    previous: (f64::NAN, f64::NAN),
                });
            }
            let cur = evaluate(dims, &next_ms, n_out, &f)?;
            let errors: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| (a - b).norm()).collect();
            let ok = cur
                .iter()
                .zip(&errors)
                .all(|(v, e)| *e <= opts.atol.max(opts.rtol * v.norm()));
            if ok {
                return Ok(VecEstimate { values: cur, errors, nodes: next_ms });
            }
            if next_ms.iter().any(|&m| 2 * m > opts.max_nodes) {
                let worst = errors
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, _)| k)
                    .unwrap_or(0);
                return Err(Error::Convergence {
                    nodes: next_ms.iter().copied().max().unwrap_or(0),
                    last: (cur[worst].re, cur[worst].im),
                    previous: (prev[worst].re, prev[worst].im),
                });
            }
            ms = next_ms;
            prev = cur;
        }
    };
    match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn evaluate<F>(dims: &[Dim], ms: &[usize], n_out: usize, f: &F) -> Result<Vec<C64>>
where
    F: Fn(&[C64], &mut [C64]) + Sync,
{
    let grids: Vec<(QuadGrid, Vec<C64>)> =
        dims.iter().zip(ms).map(|(d, &m)| d.grid(m)).collect::<Result<_>>()?;
    let d = grids.len();
    let lens: Vec<usize> = grids.iter().map(|g| g.0.len()).collect();
    let slices: Vec<Vec<C64>> = (0..lens[0])
        .into_par_iter()
        .map(|i0| {
            let mut z = vec![C64::new(0.0, 0.0); d];
            let mut idx = vec![0usize; d];
            let mut out = vec![C64::new(0.0, 0.0); n_out];
            let mut acc = vec![NeumaierSum::new(); n_out];
            idx[0] = i0;
            z[0] = grids[0].0.nodes[i0];
            for k in 1..d {
                z[k] = grids[k].0.nodes[0];
            }
            loop {
                let mut w = grids[0].1[i0];
                for k in 1..d {
                    w *= grids[k].1[idx[k]];
                }
                f(&z, &mut out);
                for (a, v) in acc.iter_mut().zip(&out) {
                    a.add(w * v);
                }
                let mut k = d;
                loop {
                    k -= 1;
                    if k == 0 {
                        return acc.iter().map(NeumaierSum::value).collect();
                    }
                    idx[k] += 1;
                    if idx[k] < lens[k] {
                        z[k] = grids[k].0.nodes[idx[k]];
                        break;
                    }
                    idx[k] = 0;
                    z[k] = grids[k].0.nodes[0];
                }
            }
        })
        .collect();
    let mut result = Vec::with_capacity(n_out);
    let mut column = vec![C64::new(0.0, 0.0); slices.len()];
    for c in 0..n_out {
        for (dst, s) in column.iter_mut().zip(&slices) {
            *dst = s[c];
        }
        let v = pairwise_sum(&column);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite(format!("integral component {c}")));
        }
        result.push(v);
    }
    Ok(result)
}

/// Trapezoid node count for a circle whose integrand has Laurent
/// coefficients decaying like `ratio^n` beyond `bandwidth`, so that the
/// aliasing error is below `tol`. Rounded up to a multiple of 4, at least 16.
pub fn circle_nodes(ratio: f64, bandwidth: f64, tol: f64) -> usize {
    let geometric = if ratio > 0.0 && ratio < 1.0 { tol.ln() / ratio.ln() } else { 0.0 };
    let m = geometric.max(bandwidth).max(16.0).ceil() as usize;
    m.div_ceil(4) * 4
}
