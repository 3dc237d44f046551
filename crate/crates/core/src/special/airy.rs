use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{Contour, PiecewiseContour, Segment};

const MIN_ARGUMENT: f64 = -10.0;
const VERTEX: f64 = 0.5;
const START_NODES: usize = 256;
const MAX_NODES: usize = 4096;
const TOL: f64 = 1e-13;

/// Nodes and weights for the ξ-contour of the Airy kernel; the ζ-contour is
/// its reflection ζ = −ξ, which carries the same weights.
#[derive(Debug, Clone)]
pub struct AiryQuadrature {
    nodes: Vec<C64>,
    weights: Vec<C64>,
}

fn phase(xi: C64, x: f64) -> f64 {
    (xi * xi * xi / 3.0 - x * xi).re
}

impl AiryQuadrature {
    /// Contour from ∞e^{−iπ/3} to ∞e^{iπ/3}: a vertical piece on Re ξ = 1/2
    /// through the saddle points ±i√|x| (absent for x ≥ 0), then rays at
    /// angles ±π/3 cut where the integrand has decayed below 1e-14.
    pub fn new(x_min: f64, m: usize) -> Result<Self> {
        if x_min < MIN_ARGUMENT {
            return Err(Error::InvalidInput(format!("Airy kernel argument {x_min} below {MIN_ARGUMENT}")));
        }
        let a = (-x_min).max(0.0).sqrt();
        let top = C64::new(VERTEX, a);
        let dir = C64::from_polar(1.0, PI / 3.0);
        let peak = VERTEX.powi(3) / 3.0 + VERTEX * (-x_min).max(0.0);
        let mut len = 1.0;
        while phase(top + dir * len, x_min) > -40.0 - 2.0 * peak {
            len += 0.25;
            if len > 100.0 {
                return Err(Error::Convergence { nodes: m, last: (len, 0.0), previous: (f64::NAN, f64::NAN) });
            }
        }
        let mut segs = vec![Segment::line(top.conj() + dir.conj() * len, top.conj())];
        if a > 0.0 {
            segs.push(Segment::line(top.conj(), top));
        }
        segs.push(Segment::line(top, top + dir * len));
        let grid = Contour::from(PiecewiseContour::path(segs)?).discretize(m)?;
        Ok(Self { nodes: grid.nodes, weights: grid.weights })
    }

    /// K(x_i, z_j) as a row-major matrix.
    pub fn matrix(&self, xs: &[f64], zs: &[f64]) -> Vec<f64> {
        let p = self.nodes.len();
        let expo = |x: f64| -> Vec<C64> {
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(&xi, &w)| w * (xi * xi * xi / 3.0 - x * xi).exp())
                .collect()
        };
        let ux: Vec<Vec<C64>> = xs.iter().map(|&x| expo(x)).collect();
        let uz: Vec<Vec<C64>> = zs.iter().map(|&z| expo(z)).collect();
        // v_j[a] = Σ_b uz_j[b] / (ξ_a + ξ_b)
        let vz: Vec<Vec<C64>> = uz
            .iter()
            .map(|u| {
                (0..p)
                    .map(|a| {
                        let mut s = C64::new(0.0, 0.0);
                        for b in 0..p {
                            s += u[b] / (self.nodes[a] + self.nodes[b]);
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(xs.len() * zs.len());
        for u in &ux {
            for v in &vz {
                let mut s = C64::new(0.0, 0.0);
                for a in 0..p {
                    s += u[a] * v[a];
                }
                out.push(s.re);
            }
        }
        out
    }
}

/// Airy kernel matrix K_Ai(x_i, z_j), refined until successive node counts
/// agree to 1e-13.
pub fn airy_kernel_matrix(xs: &[f64], zs: &[f64]) -> Result<Vec<f64>> {
    let x_min = xs.iter().chain(zs).copied().fold(f64::INFINITY, f64::min);
    if !x_min.is_finite() {
        return Ok(Vec::new());
    }
    let mut m = START_NODES;
    let mut prev = AiryQuadrature::new(x_min, m)?.matrix(xs, zs);
    loop {
        m *= 2;
        let cur = AiryQuadrature::new(x_min, m)?.matrix(xs, zs);
        let diff = cur.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if diff < TOL {
            return Ok(cur);
        }
        if m >= MAX_NODES {
            return Err(Error::Convergence { nodes: m, last: (cur[0], 0.0), previous: (prev[0], 0.0) });
        }
        prev = cur;
    }
}

/// Airy kernel K_Ai(x, z) = ∫_0^∞ Ai(x+λ)Ai(z+λ) dλ.
pub fn airy_kernel(x: f64, z: f64) -> Result<f64> {
    Ok(airy_kernel_matrix(&[x], &[z])?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_and_decaying() {
        let a = airy_kernel(0.3, 1.1).unwrap();
        let b = airy_kernel(1.1, 0.3).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(airy_kernel(8.0, 8.0).unwrap().abs() < 1e-6);
        assert!(airy_kernel(-11.0, 0.0).is_err());
    }
}
