//! The Izergin–Korepin determinant and the Cantini–Colomo–Pronko identity
//! that collapses the double permutation sum of the one-point function.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::bethe::{a_coeff, all_permutations};
use crate::error::{Error, Result};
use crate::numerics::det_complex;

const POLE_TOL: f64 = 1e-14;
const MARGIN: f64 = 1e-6;
const MAX_N: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheckReport {
    pub n: usize,
    pub delta: f64,
    pub xi: Vec<C64>,
    pub zeta: Vec<C64>,
    pub lhs: C64,
    pub rhs: C64,
    pub relative_error: f64,
}

impl IdentityCheckReport {
    fn new(delta: f64, xi: &[C64], zeta: &[C64], lhs: C64, rhs: C64) -> Self {
        let relative_error = (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1e-300);
        Self { n: xi.len(), delta, xi: xi.to_vec(), zeta: zeta.to_vec(), lhs, rhs, relative_error }
    }
}

/// d(ξ, ζ) = 1/((1 − ξζ)(ξ + ζ − 2Δξζ)).
pub fn d_weight(xi: C64, zeta: C64, delta: f64) -> Result<C64> {
    let a = 1.0 - xi * zeta;
    let b = xi + zeta - 2.0 * delta * xi * zeta;
    if a.norm() < POLE_TOL || b.norm() < POLE_TOL {
        return Err(Error::Pole(format!("d({xi}, {zeta}) with Δ = {delta}")));
    }
    Ok(1.0 / (a * b))
}

/// D_N(ξ, ζ) = det d(ξ_i, ζ_j).
pub fn ik_determinant(xi: &[C64], zeta: &[C64], delta: f64) -> Result<C64> {
    check_lengths(xi, zeta)?;
    let n = xi.len();
    let mut m = Vec::with_capacity(n * n);
    for &a in xi {
        for &b in zeta {
            m.push(d_weight(a, b, delta)?);
        }
    }
    det_complex(&m, n)
}

fn check_lengths(xi: &[C64], zeta: &[C64]) -> Result<()> {
    if xi.len() != zeta.len() || xi.is_empty() {
        return Err(Error::InvalidInput(format!(
            "need equal non-empty point sets, got {} and {}",
            xi.len(),
            zeta.len()
        )));
    }
    Ok(())
}

fn check_margins(xi: &[C64], zeta: &[C64], delta: f64) -> Result<()> {
    check_lengths(xi, zeta)?;
    if xi.len() > MAX_N {
        return Err(Error::InvalidInput(format!("identity checks are capped at N = {MAX_N}")));
    }
    for &a in xi {
        for &b in zeta {
            if (1.0 - a * b).norm() < MARGIN {
                return Err(Error::Pole(format!("ξζ = {} is within {MARGIN} of 1", a * b)));
            }
        }
    }
    for set in [xi, zeta] {
        for (i, &a) in set.iter().enumerate() {
            for &b in &set[i + 1..] {
                for (p, q) in [(a, b), (b, a)] {
                    if (1.0 + p * q - 2.0 * delta * p).norm() < MARGIN {
                        return Err(Error::Pole(format!("1 + ξξ' − 2Δξ vanishes at ({p}, {q})")));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Π_{m≥2} (ξ_{σ(m)}ζ_{μ(m)})^{m−1} / Π_{m≥2} (1 − Π_{l≥m} ξ_{σ(l)}ζ_{μ(l)}).
fn geometric_factor(xi: &[C64], zeta: &[C64], s: &[usize], mu: &[usize]) -> C64 {
    let n = xi.len();
    let mut num = C64::new(1.0, 0.0);
    let mut den = C64::new(1.0, 0.0);
    let mut tail = C64::new(1.0, 0.0);
    for m in (1..n).rev() {
        let p = xi[s[m]] * zeta[mu[m]];
        num *= p.powi(m as i32);
        tail *= p;
        den *= 1.0 - tail;
    }
    num / den
}

/// Left side: Σ_{σ,μ} A_σ(ξ) A_μ(ζ) × geometric factor.
pub fn ccp_lhs(xi: &[C64], zeta: &[C64], delta: f64) -> Result<C64> {
    check_margins(xi, zeta, delta)?;
    let perms = all_permutations(xi.len());
    let a_xi: Vec<C64> = perms.iter().map(|p| a_coeff(p, xi, delta)).collect::<Result<_>>()?;
    let a_zeta: Vec<C64> = perms.iter().map(|p| a_coeff(p, zeta, delta)).collect::<Result<_>>()?;
    let mut total = crate::numerics::NeumaierSum::new();
    for (p, ax) in perms.iter().zip(&a_xi) {
        for (q, az) in perms.iter().zip(&a_zeta) {
            total.add(ax * az * geometric_factor(xi, zeta, &p.perm, &q.perm));
        }
    }
    Ok(total.value())
}

/// Π_{j<k} (1 + ξ_jξ_k − 2Δξ_j).
pub fn pair_product(v: &[C64], delta: f64) -> C64 {
    let mut p = C64::new(1.0, 0.0);
    for j in 0..v.len() {
        for k in j + 1..v.len() {
            p *= 1.0 + v[j] * v[k] - 2.0 * delta * v[j];
        }
    }
    p
}

/// Π_{j,k} (ξ_j + ζ_k − 2Δξ_jζ_k).
pub fn cross_product(xi: &[C64], zeta: &[C64], delta: f64) -> C64 {
    let mut p = C64::new(1.0, 0.0);
    for &a in xi {
        for &b in zeta {
            p *= a + b - 2.0 * delta * a * b;
        }
    }
    p
}

/// Right side: (1 − Πξζ) Π(ξ + ζ − 2Δξζ) D_N / Π_{i<j}(…)(…).
pub fn ccp_rhs(xi: &[C64], zeta: &[C64], delta: f64) -> Result<C64> {
    check_margins(xi, zeta, delta)?;
    let prod: C64 = xi.iter().zip(zeta).map(|(a, b)| a * b).product();
    let d = ik_determinant(xi, zeta, delta)?;
    Ok((1.0 - prod) * cross_product(xi, zeta, delta) * d / (pair_product(xi, delta) * pair_product(zeta, delta)))
}

pub fn ccp_check(delta: f64, xi: &[C64], zeta: &[C64]) -> Result<IdentityCheckReport> {
    let lhs = ccp_lhs(xi, zeta, delta)?;
    let rhs = ccp_rhs(xi, zeta, delta)?;
    Ok(IdentityCheckReport::new(delta, xi, zeta, lhs, rhs))
}

/// Vandermonde Π_{j<k} (v_k − v_j).
pub fn vandermonde(v: &[C64]) -> C64 {
    let mut p = C64::new(1.0, 0.0);
    for j in 0..v.len() {
        for k in j + 1..v.len() {
            p *= v[k] - v[j];
        }
    }
    p
}

/// Q_N(ξ, ζ) = Π(ξ + ζ − 2Δξζ) D_N Π(1 − ξζ) / (V(ξ) V(ζ)).
pub fn q_poly_value(xi: &[C64], zeta: &[C64], delta: f64) -> Result<C64> {
    check_lengths(xi, zeta)?;
    let vx = vandermonde(xi);
    let vz = vandermonde(zeta);
    if vx.norm() < POLE_TOL || vz.norm() < POLE_TOL {
        return Err(Error::InvalidInput("coincident points in Q_N".into()));
    }
    let mut one_minus = C64::new(1.0, 0.0);
    for &a in xi {
        for &b in zeta {
            one_minus *= 1.0 - a * b;
        }
    }
    let d = ik_determinant(xi, zeta, delta)?;
    Ok(cross_product(xi, zeta, delta) * d * one_minus / (vx * vz))
}

/// Expanded Q_2 (nine monomials).
pub fn q2_closed_form(xi: [C64; 2], zeta: [C64; 2], delta: f64) -> C64 {
    let (x1, x2, z1, z2) = (xi[0], xi[1], zeta[0], zeta[1]);
    4.0 * delta * delta * z1 * z2 * x1 * x2
        - 2.0 * delta * z1 * z2 * x1
        - 2.0 * delta * z1 * z2 * x2
        - 2.0 * delta * z1 * x1 * x2
        - 2.0 * delta * z2 * x1 * x2
        + z1 * z2 * x1 * x2
        + z1 * z2
        + x1 * x2
        + 1.0
}

/// U(ξ, ξ') = (1 + ξξ' − 2Δξ)/(ξ' − ξ).
pub fn u_factor(a: C64, b: C64, delta: f64) -> Result<C64> {
    let den = b - a;
    if den.norm() < POLE_TOL {
        return Err(Error::Pole(format!("U({a}, {b}) with coincident arguments")));
    }
    Ok((1.0 + a * b - 2.0 * delta * a) / den)
}

fn u_product(v: &[C64], perm: &[usize], delta: f64) -> Result<C64> {
    let mut p = C64::new(1.0, 0.0);
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            p *= u_factor(v[perm[i]], v[perm[j]], delta)?;
        }
    }
    Ok(p)
}

/// Σ_{σ,μ} Π_{i<j} U(ξ_{σ(i)}, ξ_{σ(j)}) U(ζ_{μ(i)}, ζ_{μ(j)}) × geometric factor
/// against (1 − Πξζ)/Π(1 − ξζ) · Q_N.
pub fn idenu_check(delta: f64, xi: &[C64], zeta: &[C64]) -> Result<IdentityCheckReport> {
    check_margins(xi, zeta, delta)?;
    let perms = all_permutations(xi.len());
    let ux: Vec<C64> = perms.iter().map(|p| u_product(xi, &p.perm, delta)).collect::<Result<_>>()?;
    let uz: Vec<C64> = perms.iter().map(|p| u_product(zeta, &p.perm, delta)).collect::<Result<_>>()?;
    let mut total = crate::numerics::NeumaierSum::new();
    for (p, a) in perms.iter().zip(&ux) {
        for (q, b) in perms.iter().zip(&uz) {
            total.add(a * b * geometric_factor(xi, zeta, &p.perm, &q.perm));
        }
    }
    let prod: C64 = xi.iter().zip(zeta).map(|(a, b)| a * b).product();
    let mut one_minus = C64::new(1.0, 0.0);
    for &a in xi {
        for &b in zeta {
            one_minus *= 1.0 - a * b;
        }
    }
    let rhs = (1.0 - prod) / one_minus * q_poly_value(xi, zeta, delta)?;
    Ok(IdentityCheckReport::new(delta, xi, zeta, total.value(), rhs))
}
