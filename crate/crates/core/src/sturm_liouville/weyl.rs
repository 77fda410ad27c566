use num_complex::Complex64;

use super::propagate::{propagate, State, StepOptions};
use super::{InitialData, Potential};
use crate::error::{Error, Result};
use crate::numerics::{least_squares, neville_to_zero};

#[derive(Debug, Clone, Copy)]
pub struct WeylOptions {
    /// First truncation point; doubled until `f` settles.
    pub y_start: f64,
    /// Relative change of `f` between successive truncation points.
    pub tol: f64,
    /// Stop refining once `int Re sqrt(q - nu) dy` exceeds this: the
    /// growing-mode contamination is then below `e^{-2 decay}`.
    pub decay: f64,
    pub max_doublings: usize,
    pub step: StepOptions,
}

impl Default for WeylOptions {
    fn default() -> Self {
        WeylOptions { y_start: 2.0, tol: 1e-11, decay: 20.0, max_doublings: 40, step: StepOptions::default() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WeylResult {
    pub f: Complex64,
    /// Truncation point of the returned value.
    pub y: f64,
    /// Change from the previous truncation point.
    pub increment: f64,
}

/// Log-derivative of the decaying WKB solution at `y`.
fn decaying_log_derivative(q: &Potential, nu: Complex64, y: f64) -> Complex64 {
    let kappa = (Complex64::new(q.eval(y), 0.0) - nu).sqrt();
    -kappa - q.derivative(y) / (kappa * kappa * 4.0)
}

fn m_from_state(q: &Potential, nu: Complex64, st: &State<Complex64>) -> Complex64 {
    let u = decaying_log_derivative(q, nu, st.y);
    let [t1, d1] = st.cols[0];
    let [t2, d2] = st.cols[1];
    -(d2 - u * t2) / (d1 - u * t1)
}

/// Titchmarsh-Weyl m-function: the `f` for which `theta2 + f theta1` is
/// square integrable.
///
/// The fundamental pair is propagated to a truncation point `Y` where the
/// decaying WKB log-derivative closes the problem; `Y` is doubled until
/// `f` stops changing.
pub fn weyl_m(q: &Potential, nu: Complex64, opts: &WeylOptions) -> Result<WeylResult> {
    if !(nu.im > 0.0) {
        return Err(Error::Domain(format!("m-function needs Im nu > 0, got {nu}")));
    }
    let mut st = State::new(0.0, InitialData::Theta1.vector(), InitialData::Theta2.vector());
    let mut decay = 0.0;
    let mut prev_y = 0.0;
    let mut y = opts.y_start;
    let mut h = None;
    let mut prev: Option<Complex64> = None;
    for _ in 0..=opts.max_doublings {
        let last = propagate(q, nu, &mut st, y, &opts.step, h, |s| {
            let k = (Complex64::new(q.eval(s.y), 0.0) - nu).sqrt().re;
            decay += k * (s.y - prev_y);
            prev_y = s.y;
        })?;
        h = Some(last);
        let f = m_from_state(q, nu, &st);
        if !(f.re.is_finite() && f.im.is_finite()) {
            return Err(Error::nonconvergence("m-function", format!("non-finite ratio at Y = {y}")));
        }
        if let Some(p) = prev {
            let inc = (f - p).norm();
            if inc <= opts.tol * f.norm() || decay >= opts.decay {
                if f.im >= 0.0 {
                    return Err(Error::nonconvergence(
                        "m-function",
                        format!("Im f = {} is not negative at nu = {nu} (precision loss)", f.im),
                    ));
                }
                return Ok(WeylResult { f, y, increment: inc });
            }
        }
        prev = Some(f);
        y *= 2.0;
    }
    Err(Error::nonconvergence(
        "m-function",
        format!("no settling up to Y = {} (last iterate {:?})", y / 2.0, prev),
    ))
}

#[derive(Debug, Clone)]
pub struct DensityOptions {
    /// Imaginary parts, strictly decreasing, before scaling.
    pub deltas: Vec<f64>,
    /// Scale the deltas by the distance to the continuum edge (capped at 1).
    pub scale_to_edge: bool,
    /// Retries with all deltas divided by ten when the two extrapolants
    /// disagree.
    pub retries: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub weyl: WeylOptions,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            deltas: vec![1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5)],
            scale_to_edge: true,
            retries: 3,
            abs_tol: 1e-7,
            rel_tol: 1e-4,
            weyl: WeylOptions::default(),
        }
    }
}

/// Spectral density `-Im f(nu + i0) / pi`, extrapolated from a decreasing
/// sequence of imaginary parts.
///
/// The interpolating polynomial through all samples gives the value; a
/// quadratic least-squares fit is a second estimate, and their disagreement
/// triggers a retry with smaller deltas (an atom is usually nearby).
pub fn spectral_density(q: &Potential, nu: f64, opts: &DensityOptions) -> Result<f64> {
    if opts.deltas.len() < 3
        || opts.deltas.iter().any(|d| !(*d > 0.0))
        || opts.deltas.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidInput(
            "delta sequence must hold at least three strictly decreasing positive values".into(),
        ));
    }
    let edge = q.continuum_edge();
    if edge == Some(nu) {
        return Ok(0.0);
    }
    let scale = match edge {
        Some(e) if opts.scale_to_edge => (nu - e).abs().min(1.0),
        _ => 1.0,
    };
    let mut worst = 0.0f64;
    for attempt in 0..=opts.retries {
        let f = scale * 10f64.powi(-(attempt as i32));
        let ds: Vec<f64> = opts.deltas.iter().map(|d| d * f).collect();
        let gs = ds
            .iter()
            .map(|&d| weyl_m(q, Complex64::new(nu, d), &opts.weyl).map(|w| -w.f.im / std::f64::consts::PI))
            .collect::<Result<Vec<f64>>>()?;
        let nev = neville_to_zero(&ds, &gs);
        let quad = least_squares(&ds, &gs, 3, |d, row| {
            row[0] = 1.0;
            row[1] = d;
            row[2] = d * d;
        })?;
        let spread = (nev.value - quad.coeffs[0]).abs();
        let tol = opts.abs_tol + opts.rel_tol * nev.value.abs();
        if spread <= tol {
            if nev.value < -tol {
                return Err(Error::Extrapolation { nu, spread: nev.value });
            }
            return Ok(nev.value.max(0.0));
        }
        worst = spread;
    }
    Err(Error::Extrapolation { nu, spread: worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_m_function() {
        let q = Potential::constant(1.0);
        let nu = Complex64::new(2.0, 0.1);
        let f = weyl_m(&q, nu, &WeylOptions::default()).unwrap().f;
        let expect = -Complex64::i() * (nu - 1.0).sqrt();
        assert!((f - expect).norm() < 1e-10, "{f} vs {expect}");
        assert!(expect.re > 0.0 && expect.im < 0.0);

        let nu = Complex64::new(5.0, 1e-3);
        let f = weyl_m(&q, nu, &WeylOptions::default()).unwrap().f;
        assert!((f - Complex64::new(0.0, -2.0)).norm() < 1e-3);
    }

    #[test]
    fn m_function_rejects_real_axis() {
        assert!(weyl_m(&Potential::constant(1.0), Complex64::new(2.0, 0.0), &WeylOptions::default()).is_err());
    }

    #[test]
    fn harmonic_m_function_matches_eigen_expansion_sign() {
        let q = Potential::harmonic();
        for &(re, im) in &[(1.0, 0.5), (3.0, 0.01), (20.0, 2.0), (-5.0, 0.1)] {
            let f = weyl_m(&q, Complex64::new(re, im), &WeylOptions::default()).unwrap().f;
            assert!(f.im < 0.0, "nu = {re}+{im}i: {f}");
        }
    }

    #[test]
    fn cylinder_density() {
        let q = Potential::constant(1.0);
        let o = DensityOptions::default();
        let d = spectral_density(&q, 5.0, &o).unwrap();
        assert!((d - 2.0 / std::f64::consts::PI).abs() < 1e-6);
        assert_eq!(spectral_density(&q, 0.5, &o).unwrap(), 0.0);
        assert_eq!(spectral_density(&q, 1.0, &o).unwrap(), 0.0);
    }

    #[test]
    fn density_rejects_bad_sequences() {
        let q = Potential::constant(1.0);
        let mut o = DensityOptions::default();
        o.deltas = vec![1e-2, 1e-1, 1e-3];
        assert!(matches!(spectral_density(&q, 5.0, &o), Err(Error::InvalidInput(_))));
    }
}
