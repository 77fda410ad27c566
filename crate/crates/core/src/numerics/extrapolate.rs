use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct ExtrapolationEstimate {
    pub value: f64,
    /// Difference between the two highest-order tableau entries.
    pub error: f64,
}

/// Neville extrapolation of samples `(h_i, f_i)` to `h = 0`.
pub fn neville_to_zero(h: &[f64], f: &[f64]) -> ExtrapolationEstimate {
    assert_eq!(h.len(), f.len());
    assert!(!h.is_empty());
    let n = h.len();
    let mut p = f.to_vec();
    let mut prev_top = p[0];
    for m in 1..n {
        prev_top = p[0];
        for i in 0..n - m {
            p[i] = (h[i + m] * p[i] - h[i] * p[i + 1]) / (h[i + m] - h[i]);
        }
    }
    let error = if n > 1 { (p[0] - prev_top).abs() } else { f64::INFINITY };
    ExtrapolationEstimate { value: p[0], error }
}

#[derive(Debug, Clone)]
pub struct PolyFit {
    pub coeffs: Vec<f64>,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Least-squares fit of `sum_k c_k * basis_k(x)` where `basis` returns the
/// row of basis values at `x`.
pub fn least_squares<B>(xs: &[f64], ys: &[f64], nbasis: usize, basis: B) -> Result<PolyFit>
where
    B: Fn(f64, &mut [f64]),
{
    if xs.len() != ys.len() || xs.len() < nbasis {
        return Err(Error::InvalidInput(format!(
            "least squares needs at least {nbasis} samples, got {}",
            xs.len()
        )));
    }
    let mut a = DMatrix::<f64>::zeros(xs.len(), nbasis);
    let mut row = vec![0.0; nbasis];
    // column scaling keeps the normal structure well conditioned
    for (i, &x) in xs.iter().enumerate() {
        basis(x, &mut row);
        for (j, &r) in row.iter().enumerate() {
            a[(i, j)] = r;
        }
    }
    let scale: Vec<f64> = (0..nbasis)
        .map(|j| a.column(j).amax().max(f64::MIN_POSITIVE))
        .collect();
    for (j, &s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let b = DVector::from_column_slice(ys);
    let svd = a.clone().svd(true, true);
    let c = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::nonconvergence("least squares", e))?;
    let r = &a * &c - &b;
    let residual = (r.norm_squared() / xs.len() as f64).sqrt();
    let coeffs = c.iter().zip(&scale).map(|(c, s)| c / s).collect();
    Ok(PolyFit { coeffs, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neville_reproduces_polynomial() {
        let h = [0.4, 0.2, 0.1, 0.05];
        let f: Vec<f64> = h.iter().map(|x| 3.0 - 2.0 * x + 0.5 * x * x * x).collect();
        let e = neville_to_zero(&h, &f);
        assert!((e.value - 3.0).abs() < 1e-13);
    }

    #[test]
    fn half_power_fit_recovers_constant() {
        let ts: Vec<f64> = (0..12).map(|k| 1e-3 * 1.5f64.powi(k)).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 0.7 + 0.3 * t.sqrt() - 1.2 * t + 0.1 * t * t).collect();
        let fit = least_squares(&ts, &ys, 5, |t, row| {
            for (k, r) in row.iter_mut().enumerate() {
                *r = t.powf(k as f64 / 2.0);
            }
        })
        .unwrap();
        assert!((fit.coeffs[0] - 0.7).abs() < 1e-10);
        assert!(fit.residual < 1e-12);
    }
}
