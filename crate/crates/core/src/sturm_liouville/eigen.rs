//! Discrete eigenvalues by Prufer-phase matching.
//!
//! The Dirichlet solution is shot forward to a matching point, the decaying
//! solution backward from a point deep in the forbidden region, and the
//! unwrapped phase difference `D(nu)` is increasing in `nu` with `D = k pi`
//! exactly at the k-th eigenvalue (counting from zero). The same function
//! gives the weights: `||theta||^2 = R(y_m)^2 D'(nu)` at an eigenvalue, with
//! `R^2 = theta^2 + theta'^2` of the Dirichlet solution.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::propagate::{propagate, State, StepOptions};
use super::Potential;
use crate::error::{Error, Result};
use crate::numerics::brent;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub nu: f64,
    /// `1 / ||theta_nu||^2` for the Dirichlet solution `theta(0) = 0, theta'(0) = 1`.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub step: StepOptions,
    /// `int sqrt(q - nu_max)` over `[y_m, Y]`; the decaying boundary data
    /// at `Y` is then exact up to `e^{-2 decay}`.
    pub decay: f64,
    pub nu_tol: f64,
    /// Relative step of the finite-difference `D'(nu)`.
    pub fd_step: f64,
    /// Largest `y` searched for turning points.
    pub y_limit: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            step: StepOptions { counting: true, ..StepOptions::default() },
            decay: 20.0,
            nu_tol: 1e-12,
            fd_step: 1e-3,
            y_limit: 1e4,
        }
    }
}

fn wrap(d: f64) -> f64 {
    d - 2.0 * PI * ((d + PI) / (2.0 * PI)).floor()
}

/// Last `y` with `q(y) <= nu`, or 0 when there is none.
fn turning_point(q: &Potential, nu: f64, y_limit: f64) -> Result<f64> {
    let leave = match q.continuum_edge() {
        Some(e) if e > nu => nu + 0.5 * (e - nu),
        Some(e) => {
            return Err(Error::Precondition(format!(
                "nu = {nu} is not below the continuum edge {e}; discrete eigenvalues need a confining potential there"
            )))
        }
        None => nu + nu.abs().max(1.0),
    };
    let mut last_below: Option<f64> = None;
    let mut y = 0.0;
    loop {
        let v = q.eval(y);
        if !v.is_finite() {
            return Err(Error::Domain(format!("potential is not finite at y = {y}")));
        }
        if v <= nu {
            last_below = Some(y);
        } else if v >= leave {
            break;
        }
        if y > y_limit {
            return Err(Error::nonconvergence("turning point", format!("q stays below {leave} up to y = {y_limit}")));
        }
        y += 0.01 * (1.0 + 0.1 * y);
    }
    let Some(lo) = last_below else { return Ok(0.0) };
    let hi = lo + 0.01 * (1.0 + 0.1 * lo);
    if q.eval(hi) <= nu {
        return Ok(hi);
    }
    brent(|y| Ok(q.eval(y) - nu), lo, hi, 1e-12 * hi.max(1.0), 200)
}

/// First `Y > y_m` with `int_{y_m}^Y sqrt(q - nu) >= decay`.
fn decay_point(q: &Potential, nu: f64, y_m: f64, decay: f64, y_limit: f64) -> Result<f64> {
    let mut acc = 0.0;
    let mut y = y_m;
    let mut k_prev = (q.eval(y) - nu).max(0.0).sqrt();
    while acc < decay || y < y_m + 1.0 {
        let h = 0.02 * (1.0 + 0.1 * y);
        let k = (q.eval(y + h) - nu).max(0.0).sqrt();
        acc += 0.5 * (k + k_prev) * h;
        k_prev = k;
        y += h;
        if y > y_limit {
            return Err(Error::nonconvergence(
                "decay point",
                format!("sqrt(q - {nu}) integrates to only {acc} up to y = {y_limit}"),
            ));
        }
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy)]
struct PhaseEnd {
    omega: f64,
    theta: f64,
    dtheta: f64,
    log_scale: f64,
}

impl PhaseEnd {
    fn log_r(&self) -> f64 {
        self.log_scale + self.theta.hypot(self.dtheta).ln()
    }
}

/// Propagates one real column from `start` to `end`, unwrapping the phase.
fn shoot(q: &Potential, nu: f64, start: f64, init: [f64; 2], end: f64, step: &StepOptions) -> Result<PhaseEnd> {
    let mut st = State::new(start, init, [0.0, 0.0]);
    let mut prev = init[0].atan2(init[1]);
    let mut omega = prev;
    propagate(q, nu, &mut st, end, step, None, |s| {
        let a = s.cols[0][0].atan2(s.cols[0][1]);
        omega += wrap(a - prev);
        prev = a;
    })?;
    Ok(PhaseEnd { omega, theta: st.cols[0][0], dtheta: st.cols[0][1], log_scale: st.log_scale })
}

fn decaying_data(q: &Potential, nu: f64, y: f64) -> [f64; 2] {
    let kappa = (q.eval(y) - nu).max(1e-300).sqrt();
    [1.0, -kappa - q.derivative(y) / (4.0 * kappa * kappa)]
}

struct Matcher<'a> {
    q: &'a Potential,
    y_m: f64,
    y_end: f64,
    step: StepOptions,
}

impl Matcher<'_> {
    fn new<'a>(q: &'a Potential, nu_top: f64, opts: &EigenOptions) -> Result<Matcher<'a>> {
        let y_m = turning_point(q, nu_top, opts.y_limit)?;
        let y_end = decay_point(q, nu_top, y_m, opts.decay, opts.y_limit)?;
        Ok(Matcher { q, y_m, y_end, step: opts.step })
    }

    fn left(&self, nu: f64) -> Result<PhaseEnd> {
        shoot(self.q, nu, 0.0, [0.0, 1.0], self.y_m, &self.step)
    }

    fn right(&self, nu: f64, to: f64) -> Result<PhaseEnd> {
        shoot(self.q, nu, self.y_end, decaying_data(self.q, nu, self.y_end), to, &self.step)
    }

    fn mismatch(&self, nu: f64) -> Result<f64> {
        Ok(self.left(nu)?.omega - self.right(nu, self.y_m)?.omega)
    }

    /// Eigenvalues strictly below `nu_top` counted by the phase mismatch.
    fn count(&self, nu: f64) -> Result<usize> {
        let d = self.mismatch(nu)?;
        Ok(if d > 0.0 { (d / PI).ceil() as usize } else { 0 })
    }
}

/// Eigenvalues of the Dirichlet problem in `(nu_floor, nu_max]` with their
/// weights. The potential must be confining or `nu_max` must lie below the
/// continuum edge.
pub fn discrete_eigs(q: &Potential, nu_max: f64, opts: &EigenOptions) -> Result<Vec<Atom>> {
    if !nu_max.is_finite() {
        return Err(Error::InvalidInput(format!("nu_max = {nu_max} must be finite")));
    }
    if let Some(f) = q.nu_floor() {
        if nu_max <= f {
            return Ok(Vec::new());
        }
    }
    let m = Matcher::new(q, nu_max, opts)?;
    let total = m.count(nu_max)?;
    if total == 0 {
        return Ok(Vec::new());
    }

    // lower end of the bracket: below every eigenvalue, D <= 0
    let mut lo = q.nu_floor().unwrap_or(nu_max - 1.0);
    let mut widen = 1.0f64.max(lo.abs());
    for _ in 0..60 {
        if m.mismatch(lo)? <= 0.0 {
            break;
        }
        lo -= widen;
        widen *= 2.0;
    }
    if m.mismatch(lo)? > 0.0 {
        return Err(Error::nonconvergence("eigenvalue bracket", format!("phase mismatch positive at nu = {lo}")));
    }

    // every root is bracketed by [lo, nu_max] on its own, so they are found independently
    let d_lo = m.mismatch(lo)?;
    let d_hi = m.mismatch(nu_max)?;
    let nus = (0..total)
        .into_par_iter()
        .map(|k| {
            let target = k as f64 * PI;
            if !(d_lo <= target && d_hi >= target) {
                return Err(Error::MissedEigenvalue { expected: total, found: k, nu_max });
            }
            let g = |nu: f64| m.mismatch(nu).map(|d| d - target);
            brent(g, lo, nu_max, opts.nu_tol * nu_max.abs().max(1.0), 300)
        })
        .collect::<Result<Vec<f64>>>()?;
    if nus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::MissedEigenvalue { expected: total, found: nus.len(), nu_max });
    }
    // audit: halfway between neighbours the count must step by one
    for (k, w) in nus.windows(2).enumerate() {
        let c = m.count(0.5 * (w[0] + w[1]))?;
        if c != k + 1 {
            return Err(Error::MissedEigenvalue { expected: total, found: nus.len(), nu_max });
        }
    }

    nus.par_iter().map(|&nu| weight(q, nu, opts).map(|weight| Atom { nu, weight })).collect()
}

/// `1 / ||theta||^2` at an eigenvalue, via `R(y_m)^2 D'(nu)`.
fn weight(q: &Potential, nu: f64, opts: &EigenOptions) -> Result<f64> {
    let m = Matcher::new(q, nu, opts)?;
    let h = opts.fd_step * nu.abs().max(1.0);
    let d = |x: f64| m.mismatch(x);
    let dprime = (-d(nu + 2.0 * h)? + 8.0 * d(nu + h)? - 8.0 * d(nu - h)? + d(nu - 2.0 * h)?) / (12.0 * h);
    if !(dprime > 0.0) {
        return Err(Error::nonconvergence("eigenvalue weight", format!("phase derivative {dprime} at nu = {nu}")));
    }
    let log_r = m.left(nu)?.log_r();
    Ok((-2.0 * log_r).exp() / dprime)
}

/// `(theta, theta')` of the Dirichlet solution at `y0` for an eigenvalue
/// `nu`. Past the turning point the decaying solution is used, scaled to
/// match at the turning point, so the forbidden region adds no growth.
pub fn eigenfunction_at(q: &Potential, nu: f64, y0: f64, opts: &EigenOptions) -> Result<(f64, f64)> {
    let m = Matcher::new(q, nu, opts)?;
    let finish = |t: f64, dt: f64, log_scale: f64| -> Result<(f64, f64)> {
        let s = log_scale.exp();
        let (a, b) = (t * s, dt * s);
        if a.is_finite() && b.is_finite() {
            Ok((a, b))
        } else {
            Err(Error::Overflow { y: y0 })
        }
    };
    if y0 <= m.y_m {
        let e = shoot(q, nu, 0.0, [0.0, 1.0], y0, &m.step)?;
        return finish(e.theta, e.dtheta, e.log_scale);
    }
    let left = m.left(nu)?;
    let mut st = State::new(m.y_end, decaying_data(q, nu, m.y_end), [0.0, 0.0]);
    propagate(q, nu, &mut st, y0, &m.step, None, |_| {})?;
    let at_y0 = st;
    propagate(q, nu, &mut st, m.y_m, &m.step, None, |_| {})?;
    // least-squares proportionality constant between the two matched vectors
    let [rt, rd] = st.cols[0];
    let c = (left.theta * rt + left.dtheta * rd) / (rt * rt + rd * rd);
    let log_scale = at_y0.log_scale + left.log_scale - st.log_scale;
    finish(c * at_y0.cols[0][0], c * at_y0.cols[0][1], log_scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_odd_levels() {
        let atoms = discrete_eigs(&Potential::harmonic(), 12.0, &EigenOptions::default()).unwrap();
        let nus: Vec<f64> = atoms.iter().map(|a| a.nu).collect();
        assert_eq!(nus.len(), 3, "{nus:?}");
        for (a, e) in nus.iter().zip([3.0, 7.0, 11.0]) {
            assert!((a - e).abs() < 1e-8, "{a} vs {e}");
        }
    }

    #[test]
    fn harmonic_weights_match_hermite_norms() {
        // theta = y e^{-y^2/2} for nu = 3: ||theta||^2 = sqrt(pi)/4
        let atoms = discrete_eigs(&Potential::harmonic(), 4.0, &EigenOptions::default()).unwrap();
        let w = atoms[0].weight;
        assert!((w - 4.0 / PI.sqrt()).abs() < 1e-6 * w, "{w}");
    }

    #[test]
    fn constant_potential_has_no_atoms() {
        let atoms = discrete_eigs(&Potential::constant(1.0), 0.9, &EigenOptions::default()).unwrap();
        assert!(atoms.is_empty());
        assert!(discrete_eigs(&Potential::constant(1.0), 5.0, &EigenOptions::default()).is_err());
    }

    #[test]
    fn eigenfunction_matches_closed_form() {
        let q = Potential::harmonic();
        let o = EigenOptions::default();
        for y in [0.5, 1.0, 4.0, 6.0] {
            let (t, dt) = eigenfunction_at(&q, 3.0, y, &o).unwrap();
            let e = y * (-y * y / 2.0f64).exp();
            let de = (1.0 - y * y) * (-y * y / 2.0f64).exp();
            assert!((t - e).abs() < 1e-7 * e.abs().max(1e-300) + 1e-12, "y={y}: {t} vs {e}");
            assert!((dt - de).abs() < 1e-7 * de.abs() + 1e-10, "y={y}: {dt} vs {de}");
        }
    }
}
