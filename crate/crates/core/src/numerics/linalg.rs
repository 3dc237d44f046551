use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Determinant by LU with partial pivoting; `a` is row-major n×n.
pub fn det_complex(a: &[C64], n: usize) -> Result<C64> {
    if a.len() != n * n {
        return Err(Error::InvalidInput(format!("matrix has {} entries, expected {}", a.len(), n * n)));
    }
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("determinant input".into()));
    }
    let mut m = a.to_vec();
    let mut det = C64::new(1.0, 0.0);
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i * n + c].norm().total_cmp(&m[j * n + c].norm()))
            .unwrap();
        let piv = m[p * n + c];
        if piv.norm() == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        if p != c {
            for k in 0..n {
                m.swap(p * n + k, c * n + k);
            }
            det = -det;
        }
        det *= piv;
        for r in c + 1..n {
            let l = m[r * n + c] / piv;
            if l.norm() == 0.0 {
                continue;
            }
            for k in c + 1..n {
                let v = m[c * n + k];
                m[r * n + k] -= l * v;
            }
        }
    }
    Ok(det)
}

/// Real counterpart of [`det_complex`].
pub fn det_real(a: &[f64], n: usize) -> Result<f64> {
    if a.len() != n * n {
        return Err(Error::InvalidInput(format!("matrix has {} entries, expected {}", a.len(), n * n)));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("determinant input".into()));
    }
    let mut m = a.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i * n + c].abs().total_cmp(&m[j * n + c].abs())).unwrap();
        let piv = m[p * n + c];
        if piv == 0.0 {
            return Ok(0.0);
        }
        if p != c {
            for k in 0..n {
                m.swap(p * n + k, c * n + k);
            }
            det = -det;
        }
        det *= piv;
        for r in c + 1..n {
            let l = m[r * n + c] / piv;
            for k in c + 1..n {
                m[r * n + k] -= l * m[c * n + k];
            }
        }
    }
    Ok(det)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_zero_row() {
        let mut a = vec![C64::new(0.0, 0.0); 9];
        for i in 0..3 {
            a[i * 4] = C64::new(1.0, 0.0);
        }
        assert_eq!(det_complex(&a, 3).unwrap(), C64::new(1.0, 0.0));
        a[3] = C64::new(0.0, 0.0);
        a[4] = C64::new(0.0, 0.0);
        assert_eq!(det_complex(&a, 3).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn empty_matrix_is_one() {
        assert_eq!(det_complex(&[], 0).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(det_real(&[], 0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(det_real(&[f64::NAN], 1).is_err());
    }
}
