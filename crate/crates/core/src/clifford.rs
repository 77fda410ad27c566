//! Clifford representations and the algebra behind conformal changes of
//! metric.
//!
//! Generators come from the Jordan-Wigner construction: with Pauli matrices
//! `X, Y, Z`, the Hermitian matrices `Z..Z X 1..1` and `Z..Z Y 1..1` square to
//! one and anticommute, and `c_k = i Gamma_k` then satisfies
//! `c_j c_k + c_k c_j = -2 delta_jk`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

type Mat = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest singular value.
pub fn operator_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliffordRep {
    p: usize,
    generators: Vec<Mat>,
    grading: Mat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepResiduals {
    /// `max ||c_i c_j + c_j c_i + 2 delta_ij||`.
    pub anticommutator: f64,
    /// `max ||c_i^* + c_i||`.
    pub anti_hermitian: f64,
    /// `||gamma^* - gamma||`.
    pub grading_hermitian: f64,
    /// `||gamma^2 - 1||`.
    pub grading_square: f64,
    /// `max ||gamma c_i + c_i gamma||`.
    pub grading_anticommutes: f64,
}

impl RepResiduals {
    pub fn max(&self) -> f64 {
        [
            self.anticommutator,
            self.anti_hermitian,
            self.grading_hermitian,
            self.grading_square,
            self.grading_anticommutes,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Complex representation of the Clifford algebra of `R^p` on `C^{2^{p/2}}`.
pub fn build_rep(p: usize) -> Result<CliffordRep> {
    if p == 0 || p % 2 == 1 || p > 8 {
        return Err(Error::InvalidInput(format!("p = {p} must be even and at most 8")));
    }
    let x = Mat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let y = Mat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]);
    let z = Mat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    let id = Mat::identity(2, 2);
    let m = p / 2;
    let mut generators = Vec::with_capacity(p);
    for k in 0..m {
        for pauli in [&x, &y] {
            let mut g = Mat::identity(1, 1);
            for j in 0..m {
                let factor = match j.cmp(&k) {
                    std::cmp::Ordering::Less => &z,
                    std::cmp::Ordering::Equal => pauli,
                    std::cmp::Ordering::Greater => &id,
                };
                g = kron(&g, factor);
            }
            generators.push(g * I);
        }
    }
    let dim = 1usize << m;
    let mut grading = Mat::identity(dim, dim);
    for g in &generators {
        grading *= g;
    }
    grading *= (-I).powu((p * (p + 1) / 2) as u32);
    Ok(CliffordRep { p, generators, grading })
}

impl CliffordRep {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.grading.nrows()
    }

    pub fn generators(&self) -> &[Mat] {
        &self.generators
    }

    pub fn grading(&self) -> &Mat {
        &self.grading
    }

    /// Clifford multiplication by `v = sum v_i e_i`.
    pub fn c(&self, v: &[f64]) -> Result<Mat> {
        self.check_vector(v)?;
        let mut out = Mat::zeros(self.dim(), self.dim());
        for (g, &vi) in self.generators.iter().zip(v) {
            out += g * Complex64::new(vi, 0.0);
        }
        Ok(out)
    }

    fn check_vector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.p {
            return Err(Error::InvalidInput(format!("vector has {} components, expected {}", v.len(), self.p)));
        }
        Ok(())
    }

    pub fn residuals(&self) -> RepResiduals {
        let n = self.dim();
        let id = Mat::identity(n, n);
        let mut r = RepResiduals {
            anticommutator: 0.0,
            anti_hermitian: 0.0,
            grading_hermitian: operator_norm(&(self.grading.adjoint() - &self.grading)),
            grading_square: operator_norm(&(&self.grading * &self.grading - &id)),
            grading_anticommutes: 0.0,
        };
        for (i, a) in self.generators.iter().enumerate() {
            r.anti_hermitian = r.anti_hermitian.max(operator_norm(&(a.adjoint() + a)));
            r.grading_anticommutes =
                r.grading_anticommutes.max(operator_norm(&(&self.grading * a + a * &self.grading)));
            for (j, b) in self.generators.iter().enumerate() {
                let mut ac = a * b + b * a;
                if i == j {
                    ac += &id * Complex64::new(2.0, 0.0);
                }
                r.anticommutator = r.anticommutator.max(operator_norm(&ac));
            }
        }
        r
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `|| [c(u)c(v), c(w)] - (-2<v,w> c(u) + 2<u,w> c(v)) ||`.
pub fn check_commutator_identity(rep: &CliffordRep, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    let (cu, cv, cw) = (rep.c(u)?, rep.c(v)?, rep.c(w)?);
    let uv = &cu * &cv;
    let lhs = &uv * &cw - &cw * &uv;
    let rhs = &cu * Complex64::new(-2.0 * dot(v, w), 0.0) + &cv * Complex64::new(2.0 * dot(u, w), 0.0);
    Ok(operator_norm(&(lhs - rhs)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionCheck {
    /// `|| [A_v, c(w)] - (w(phi) c(v) - <v,w> c(grad phi)) ||`.
    pub clifford_residual: f64,
    /// `|| A_v^* + A_v ||`, which is `|2f - 1| |<grad phi, v>|`.
    pub hermiticity_defect: f64,
}

/// Checks the endomorphism `A_v = c(grad phi) c(v) / 2 + f <grad phi, v>`
/// that corrects the Levi-Civita connection under `g -> e^{2 phi} g`.
pub fn check_connection_condition(
    rep: &CliffordRep,
    grad_phi: &[f64],
    f: f64,
    v: &[f64],
    w: &[f64],
) -> Result<ConnectionCheck> {
    let (cg, cv, cw) = (rep.c(grad_phi)?, rep.c(v)?, rep.c(w)?);
    let n = rep.dim();
    let b = dot(grad_phi, v);
    let a = &cg * &cv * Complex64::new(0.5, 0.0) + Mat::identity(n, n) * Complex64::new(f * b, 0.0);
    let comm = &a * &cw - &cw * &a;
    let expect = &cv * Complex64::new(dot(grad_phi, w), 0.0) - &cg * Complex64::new(dot(v, w), 0.0);
    Ok(ConnectionCheck {
        clifford_residual: operator_norm(&(comm - expect)),
        hermiticity_defect: operator_norm(&(a.adjoint() + &a)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformalReport {
    /// Mesh width in `x` per level.
    pub h: Vec<f64>,
    /// `max |e^{-(p+1)phi/2} D0_h(e^{(p-1)phi/2} s) - e^{-phi}(D0_h s + (p-1)/2 c(grad phi) s)|`
    /// over interior nodes.
    pub residuals: Vec<f64>,
    /// Product form `e^{-phi} c(e_p)(d_x + D_N + (p-1)/2 phi')` against the
    /// expanded form, both from the same difference operators.
    pub product_residuals: Vec<f64>,
    /// Least-squares slope of `log residual` against `log h`.
    pub order: f64,
}

/// Smooth test section on the cylinder.
fn section(theta: f64, x: f64) -> [Complex64; 2] {
    [
        Complex64::new(theta.sin() + x * x, x * theta.cos()),
        Complex64::new(x.exp() * (2.0 * theta).cos(), theta.sin()),
    ]
}

/// Compares the conformally changed Dirac operator in its conjugated and
/// expanded forms on `S^1 x [0, 1]` with second-order differences, at `x`
/// resolutions `intervals` (the circle gets `6 * intervals` points).
pub fn check_conformal_dirac<P, D>(rep: &CliffordRep, phi: P, dphi: D, intervals: &[usize]) -> Result<ConformalReport>
where
    P: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if rep.p() != 2 {
        return Err(Error::InvalidInput("the cylinder check needs the p = 2 representation".into()));
    }
    if intervals.len() < 2 || intervals.iter().any(|&m| m < 4) {
        return Err(Error::InvalidInput("need at least two resolutions with >= 4 intervals".into()));
    }
    let p = rep.p() as f64;
    let c_theta = rep.generators()[0].clone();
    let c_x = rep.generators()[1].clone();
    let apply = |m: &Mat, s: [Complex64; 2]| [m[(0, 0)] * s[0] + m[(0, 1)] * s[1], m[(1, 0)] * s[0] + m[(1, 1)] * s[1]];
    let add = |a: [Complex64; 2], b: [Complex64; 2]| [a[0] + b[0], a[1] + b[1]];
    let scale = |k: f64, a: [Complex64; 2]| [a[0] * k, a[1] * k];

    let mut report = ConformalReport { h: Vec::new(), residuals: Vec::new(), product_residuals: Vec::new(), order: 0.0 };
    for &m in intervals {
        let n = 6 * m;
        let (hx, ht) = (1.0 / m as f64, 2.0 * PI / n as f64);
        let xs: Vec<f64> = (0..=m).map(|j| j as f64 * hx).collect();
        let grid = |f: &dyn Fn(f64, f64) -> [Complex64; 2]| -> Vec<Vec<[Complex64; 2]>> {
            (0..n).map(|i| xs.iter().map(|&x| f(i as f64 * ht, x)).collect()).collect()
        };
        let s = grid(&|t, x| section(t, x));
        let k = (p - 1.0) / 2.0;
        let conj = grid(&|t, x| scale((k * phi(x)).exp(), section(t, x)));
        // centred differences, periodic in theta, interior in x
        let d_theta = |u: &Vec<Vec<[Complex64; 2]>>, i: usize, j: usize| {
            let (a, b) = (u[(i + 1) % n][j], u[(i + n - 1) % n][j]);
            scale(0.5 / ht, [a[0] - b[0], a[1] - b[1]])
        };
        let d_x = |u: &Vec<Vec<[Complex64; 2]>>, i: usize, j: usize| {
            let (a, b) = (u[i][j + 1], u[i][j - 1]);
            scale(0.5 / hx, [a[0] - b[0], a[1] - b[1]])
        };
        let d0 = |u: &Vec<Vec<[Complex64; 2]>>, i: usize, j: usize| {
            add(apply(&c_theta, d_theta(u, i, j)), apply(&c_x, d_x(u, i, j)))
        };
        // D_N = c(e_p)^{-1} c(e_1) d_theta with c(e_p)^{-1} = -c(e_p)
        let c_n = -(&c_x * &c_theta);
        let (mut res, mut prod) = (0.0f64, 0.0f64);
        for i in 0..n {
            for j in 1..m {
                let x = xs[j];
                let lhs = scale((-(p + 1.0) / 2.0 * phi(x)).exp(), d0(&conj, i, j));
                let grad = apply(&c_x, scale(k * dphi(x), s[i][j]));
                let rhs = scale((-phi(x)).exp(), add(d0(&s, i, j), grad));
                let inner = add(add(d_x(&s, i, j), apply(&c_n, d_theta(&s, i, j))), scale(k * dphi(x), s[i][j]));
                let product = scale((-phi(x)).exp(), apply(&c_x, inner));
                for r in 0..2 {
                    res = res.max((lhs[r] - rhs[r]).norm());
                    prod = prod.max((product[r] - rhs[r]).norm());
                }
            }
        }
        report.h.push(hx);
        report.residuals.push(res);
        report.product_residuals.push(prod);
    }
    report.order = slope(&report.h, &report.residuals);
    Ok(report)
}

/// Least-squares slope of `ln r` against `ln h`, over levels with `r > 0`.
fn slope(h: &[f64], r: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h.iter().zip(r).filter(|(_, &r)| r > 0.0).map(|(h, r)| (h.ln(), r.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_sized_rep() {
        let r = build_rep(2).unwrap();
        assert_eq!(r.dim(), 2);
        assert!(r.residuals().max() < 1e-15);
        assert!(build_rep(3).is_err() && build_rep(10).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let h = [0.1, 0.05, 0.025];
        let r: Vec<f64> = h.iter().map(|h| 3.0 * h * h).collect();
        assert!((slope(&h, &r) - 2.0).abs() < 1e-12);
    }
}
