//! Fourth-order Magnus propagation of `theta'' = (q - nu) theta`.
//!
//! A 2x2 fundamental matrix is advanced by `exp(Omega)` per step, with
//! `Omega` built from two Gauss points. `Omega` is traceless, so its
//! exponential is a closed form and every step has determinant one, which
//! keeps the Wronskian at one up to rounding. Columns share a log scale so
//! growth in forbidden regions never overflows.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::Potential;
use crate::error::{Error, Result};

const SQRT3_12: f64 = 0.144_337_567_297_406_43;
const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9;
/// Largest `|Re sqrt(z)|` allowed in one step, i.e. growth below e^40.
const MAX_GROWTH: f64 = 40.0;

pub trait Field:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self> + Neg<Output = Self>
{
    fn from_re(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn real(self) -> f64;
    /// `exp` of `[[c, h], [h w, -c]]` as `[m00, m01, m10, m11]`, and `|Re sqrt(z)|`.
    fn magnus_exp(c: Self, h: f64, w: Self) -> ([Self; 4], f64);
}

impl Field for f64 {
    fn from_re(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn real(self) -> f64 {
        self
    }
    fn magnus_exp(c: f64, h: f64, w: f64) -> ([f64; 4], f64) {
        let z = c * c + h * h * w;
        let (ch, sh, growth) = if z.abs() < 1e-8 {
            (1.0 + z / 2.0 + z * z / 24.0, 1.0 + z / 6.0 + z * z / 120.0, z.max(0.0).sqrt())
        } else if z > 0.0 {
            let s = z.sqrt();
            (s.cosh(), s.sinh() / s, s)
        } else {
            let a = (-z).sqrt();
            (a.cos(), a.sin() / a, 0.0)
        };
        ([ch + sh * c, sh * h, sh * h * w, ch - sh * c], growth)
    }
}

impl Field for Complex64 {
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn real(self) -> f64 {
        self.re
    }
    fn magnus_exp(c: Complex64, h: f64, w: Complex64) -> ([Complex64; 4], f64) {
        let z = c * c + w * (h * h);
        let (ch, sh, growth) = if z.norm() < 1e-8 {
            let one = Complex64::new(1.0, 0.0);
            (one + z / 2.0 + z * z / 24.0, one + z / 6.0 + z * z / 120.0, z.sqrt().re.abs())
        } else {
            let s = z.sqrt();
            (s.cosh(), s.sinh() / s, s.re.abs())
        };
        ([ch + sh * c, sh * h, sh * w * h, ch - sh * c], growth)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    /// Accepted relative change between one full step and two half steps.
    pub tol: f64,
    pub h_init: f64,
    pub h_max: f64,
    /// Limit steps to about one radian of oscillation so Prufer phases can
    /// be unwrapped from consecutive samples.
    pub counting: bool,
    pub max_steps: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { tol: 1e-12, h_init: 1e-2, h_max: f64::INFINITY, counting: false, max_steps: 5_000_000 }
    }
}

/// Fundamental matrix columns `(theta, theta')` at `y`, true values being
/// `e^{log_scale}` times the stored ones.
#[derive(Debug, Clone, Copy)]
pub struct State<T> {
    pub y: f64,
    /// `cols[j] = [theta_j, theta_j']`.
    pub cols: [[T; 2]; 2],
    pub log_scale: f64,
}

impl<T: Field> State<T> {
    pub fn new(y: f64, first: [T; 2], second: [T; 2]) -> Self {
        State { y, cols: [first, second], log_scale: 0.0 }
    }

    fn renormalize(&mut self) {
        let m = self
            .cols
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.modulus()));
        if m > 1e30 || (m < 1e-30 && m > 0.0) {
            let inv = 1.0 / m;
            for c in self.cols.iter_mut() {
                c[0] = c[0] * inv;
                c[1] = c[1] * inv;
            }
            self.log_scale += m.ln();
        }
    }

    /// Wronskian `theta_0 theta_1' - theta_0' theta_1` of the stored
    /// (scaled) columns; multiply by `e^{2 log_scale}` for the true value.
    pub fn scaled_wronskian(&self) -> T {
        self.cols[0][0] * self.cols[1][1] - self.cols[0][1] * self.cols[1][0]
    }
}

fn step_matrix<T: Field>(q: &Potential, nu: T, y: f64, h: f64) -> ([T; 4], f64) {
    let y1 = y + h * (0.5 - GAUSS_OFFSET);
    let y2 = y + h * (0.5 + GAUSS_OFFSET);
    let w1 = T::from_re(q.eval(y1)) - nu;
    let w2 = T::from_re(q.eval(y2)) - nu;
    let wbar = (w1 + w2) * 0.5;
    let c = (w1 - w2) * (SQRT3_12 * h * h);
    T::magnus_exp(c, h, wbar)
}

fn matmul<T: Field>(a: &[T; 4], b: &[T; 4]) -> [T; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn apply<T: Field>(m: &[T; 4], v: [T; 2]) -> [T; 2] {
    [m[0] * v[0] + m[1] * v[1], m[2] * v[0] + m[3] * v[1]]
}

/// Advances `state` to `y_end` (either direction), calling `on_step` after
/// every accepted step. Returns the last accepted step size.
pub fn propagate<T, F>(
    q: &Potential,
    nu: T,
    state: &mut State<T>,
    y_end: f64,
    opts: &StepOptions,
    h_hint: Option<f64>,
    mut on_step: F,
) -> Result<f64>
where
    T: Field,
    F: FnMut(&State<T>),
{
    let dir = if y_end >= state.y { 1.0 } else { -1.0 };
    let mut h = h_hint.unwrap_or(opts.h_init).abs().min(opts.h_max);
    let mut steps = 0usize;
    let mut last_h = h;
    while (y_end - state.y) * dir > 0.0 {
        let remaining = (y_end - state.y).abs();
        let mut hh = h.min(remaining);
        if opts.counting {
            let k = (nu.real() - q.eval(state.y + 0.5 * dir * hh)).max(0.0).sqrt();
            if k * hh > 1.0 {
                hh = 1.0 / k;
            }
        }
        let hs = dir * hh;
        let (full, growth) = step_matrix(q, nu, state.y, hs);
        if growth > MAX_GROWTH {
            h = hh * 0.5 * MAX_GROWTH / growth;
            continue;
        }
        let (h1, _) = step_matrix(q, nu, state.y, 0.5 * hs);
        let (h2, _) = step_matrix(q, nu, state.y + 0.5 * hs, 0.5 * hs);
        let two = matmul(&h2, &h1);
        let scale = two.iter().fold(0.0f64, |m, v| m.max(v.modulus())).max(1e-300);
        let err = full
            .iter()
            .zip(&two)
            .fold(0.0f64, |m, (a, b)| m.max((*a - *b).modulus()))
            / scale;
        if err <= opts.tol || hh <= 1e-14 * state.y.abs().max(1.0) {
            if hh <= 1e-14 * state.y.abs().max(1.0) && err > opts.tol {
                return Err(Error::StepUnderflow { y: state.y });
            }
            for c in state.cols.iter_mut() {
                *c = apply(&two, *c);
            }
            state.y = if hh == remaining { y_end } else { state.y + hs };
            state.renormalize();
            on_step(state);
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::nonconvergence(
                    "ODE propagation",
                    format!("more than {} steps before y = {y_end}", opts.max_steps),
                ));
            }
            last_h = hh;
            let fac = if err == 0.0 { 4.0 } else { (0.9 * (opts.tol / err).powf(0.2)).clamp(0.2, 4.0) };
            // a step clipped to land on y_end says nothing about the natural size
            h = if hh < h { h.max(hh * fac) } else { hh * fac };
            h = h.min(opts.h_max);
        } else {
            h = hh * (0.9 * (opts.tol / err).powf(0.2)).clamp(0.1, 0.5);
        }
    }
    Ok(last_h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_potential_is_exact() {
        let q = Potential::constant(1.0);
        let mut s = State::new(0.0, [0.0, 1.0], [-1.0, 0.0]);
        propagate(&q, 2.0, &mut s, 10.0, &StepOptions::default(), None, |_| {}).unwrap();
        let sc = s.log_scale.exp();
        assert!((s.cols[0][0] * sc - 10f64.sin()).abs() < 1e-12);
        assert!((s.cols[0][1] * sc - 10f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn backward_propagation_inverts_forward() {
        let q = Potential::harmonic();
        let mut s = State::new(0.0, [0.0, 1.0], [-1.0, 0.0]);
        propagate(&q, 5.0, &mut s, 3.0, &StepOptions::default(), None, |_| {}).unwrap();
        propagate(&q, 5.0, &mut s, 0.0, &StepOptions::default(), None, |_| {}).unwrap();
        let sc = s.log_scale.exp();
        assert!((s.cols[0][0] * sc).abs() < 1e-9);
        assert!((s.cols[0][1] * sc - 1.0).abs() < 1e-9);
    }

    #[test]
    fn log_scale_absorbs_growth() {
        let q = Potential::constant(1.0);
        let mut s = State::new(0.0, [0.0, 1.0], [-1.0, 0.0]);
        propagate(&q, 0.0, &mut s, 2000.0, &StepOptions::default(), None, |_| {}).unwrap();
        // theta = sinh(y): log theta = y - ln 2
        let lt = s.log_scale + s.cols[0][0].ln();
        assert!((lt - (2000.0 - 2f64.ln())).abs() < 1e-9);
    }
}
