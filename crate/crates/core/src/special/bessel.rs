use serde::Serialize;

use crate::error::{Error, Result};

const RESCALE_ABOVE: f64 = 1e200;
const MAX_ORDER: i64 = 1_000_000;

fn check_args(n: i64, x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidInput(format!("Bessel argument {x} must be finite and non-negative")));
    }
    if n.abs() > MAX_ORDER {
        return Err(Error::InvalidInput(format!("Bessel order {n} exceeds {MAX_ORDER}")));
    }
    Ok(())
}

/// Leading terms of the power series, used where the recurrence would
/// overflow in a single step.
fn small_argument(nmax: usize, x: f64, modified: bool) -> Vec<f64> {
    let h = x / 2.0;
    let mut out = vec![0.0; nmax + 1];
    let mut lead = 1.0;
    for (n, v) in out.iter_mut().enumerate() {
        if n > 0 {
            lead *= h / n as f64;
        }
        if lead == 0.0 {
            break;
        }
        let corr = h * h / (n as f64 + 1.0);
        *v = lead * if modified { 1.0 + corr } else { 1.0 - corr };
    }
    out
}

/// J_0(x), ..., J_nmax(x) by Miller's backward recurrence.
fn j_sequence(nmax: usize, x: f64) -> Vec<f64> {
    if x == 0.0 {
        let mut v = vec![0.0; nmax + 1];
        v[0] = 1.0;
        return v;
    }
    if x < 1e-6 {
        return small_argument(nmax, x, false);
    }
    let big = (nmax as f64).max(x);
    let mut m = (big + 30.0 + 15.0 * big.cbrt()).ceil() as usize;
    m += m % 2;
    let mut out = vec![0.0; nmax + 1];
    let (mut jp1, mut j) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        // j holds J_k, jp1 holds J_{k+1} (unnormalised)
        if k <= nmax {
            out[k] = j;
        }
        if k % 2 == 0 {
            norm += 2.0 * j;
        }
        let jm1 = (2.0 * k as f64 / x) * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > RESCALE_ABOVE {
            j /= RESCALE_ABOVE;
            jp1 /= RESCALE_ABOVE;
            norm /= RESCALE_ABOVE;
            for v in out.iter_mut().skip(k) {
                *v /= RESCALE_ABOVE;
            }
        }
    }
    out[0] = j;
    norm += j;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// I_0(x), ..., I_nmax(x) by backward recurrence normalised with
/// e^x = I_0 + 2 Σ I_k, carried in logarithms to avoid overflow.
fn i_sequence(nmax: usize, x: f64) -> Vec<f64> {
    if x == 0.0 {
        let mut v = vec![0.0; nmax + 1];
        v[0] = 1.0;
        return v;
    }
    if x < 1e-6 {
        return small_argument(nmax, x, true);
    }
    let mut m = nmax + 40 + (10.0 * x.sqrt()).ceil() as usize + (x.ceil() as usize).min(40);
    m += m % 2;
    let mut out = vec![0.0; nmax + 1];
    let (mut ip1, mut i) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        if k <= nmax {
            out[k] = i;
        }
        norm += 2.0 * i;
        let im1 = (2.0 * k as f64 / x) * i + ip1;
        ip1 = i;
        i = im1;
        if i > RESCALE_ABOVE {
            i /= RESCALE_ABOVE;
            ip1 /= RESCALE_ABOVE;
            norm /= RESCALE_ABOVE;
            for v in out.iter_mut().skip(k) {
                *v /= RESCALE_ABOVE;
            }
        }
    }
    out[0] = i;
    norm += i;
    let log_norm = norm.ln();
    for v in out.iter_mut() {
        *v = if *v > 0.0 { (x + v.ln() - log_norm).exp() } else { 0.0 };
    }
    out
}

/// Bessel J_n(x) of integer order, x ≥ 0.
pub fn bessel_j(n: i64, x: f64) -> Result<f64> {
    check_args(n, x)?;
    let v = j_sequence(n.unsigned_abs() as usize, x)[n.unsigned_abs() as usize];
    Ok(if n < 0 && n % 2 != 0 { -v } else { v })
}

/// Modified Bessel I_n(x) of integer order, x ≥ 0.
pub fn bessel_i(n: i64, x: f64) -> Result<f64> {
    check_args(n, x)?;
    Ok(i_sequence(n.unsigned_abs() as usize, x)[n.unsigned_abs() as usize])
}

/// Values J_n(x) (or I_n(x)) for all n in an order range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BesselSeries {
    pub n_min: i64,
    pub n_max: i64,
    pub argument: f64,
    pub values: Vec<f64>,
}

impl BesselSeries {
    pub fn j(n_min: i64, n_max: i64, x: f64) -> Result<Self> {
        Self::build(n_min, n_max, x, false)
    }

    pub fn i(n_min: i64, n_max: i64, x: f64) -> Result<Self> {
        Self::build(n_min, n_max, x, true)
    }

    fn build(n_min: i64, n_max: i64, x: f64, modified: bool) -> Result<Self> {
        if n_min > n_max {
            return Err(Error::InvalidInput(format!("empty order range [{n_min}, {n_max}]")));
        }
        check_args(n_min, x)?;
        check_args(n_max, x)?;
        let top = n_min.unsigned_abs().max(n_max.unsigned_abs()) as usize;
        let base = if modified { i_sequence(top, x) } else { j_sequence(top, x) };
        let values = (n_min..=n_max)
            .map(|n| {
                let v = base[n.unsigned_abs() as usize];
                if !modified && n < 0 && n % 2 != 0 {
                    -v
                } else {
                    v
                }
            })
            .collect();
        Ok(Self { n_min, n_max, argument: x, values })
    }

    /// Value at order `n`; zero outside the stored range.
    pub fn get(&self, n: i64) -> f64 {
        if n < self.n_min || n > self.n_max {
            0.0
        } else {
            self.values[(n - self.n_min) as usize]
        }
    }

    /// Σ_{n≥0} J_{ν+n} J_{μ+n}, summed until 30 consecutive terms fall
    /// below 1e-18 beyond the turning point.
    pub fn pair_sum(&self, nu: i64, mu: i64) -> Result<f64> {
        let turning = self.argument.ceil() as i64;
        let mut sum = 0.0;
        let mut comp = 0.0;
        let mut small_run = 0;
        let mut n = 0;
        loop {
            let (a, b) = (nu + n, mu + n);
            if a > self.n_max || b > self.n_max {
                return Err(Error::Truncation(format!(
                    "pair sum ({nu}, {mu}) needs orders beyond {}",
                    self.n_max
                )));
            }
            let term = self.get(a) * self.get(b);
            let s = sum + term;
            comp += if sum.abs() >= term.abs() { (sum - s) + term } else { (term - s) + sum };
            sum = s;
            if term.abs() < 1e-18 && a.min(b) > turning {
                small_run += 1;
                if small_run >= 30 {
                    return Ok(sum + comp);
                }
            } else {
                small_run = 0;
            }
            n += 1;
        }
    }
}

/// Order range wide enough for pair sums starting at orders ≥ `lowest`.
fn pair_sum_range(lowest: i64, highest: i64, x: f64) -> (i64, i64) {
    let top = highest.max(x.ceil() as i64) + 60 + (20.0 * x.cbrt()).ceil() as i64;
    (lowest, top)
}

/// Σ_{n≥0} J_{ν+n}(t) J_{μ+n}(t).
pub fn bessel_pair_sum(nu: i64, mu: i64, t: f64) -> Result<f64> {
    let (lo, hi) = pair_sum_range(nu.min(mu), nu.max(mu), t);
    BesselSeries::j(lo, hi, t)?.pair_sum(nu, mu)
}
