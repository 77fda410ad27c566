//! The delocalised cusp contribution and its checks.
//!
//! For every boundary eigenvalue `|lambda|` the heat kernel of the cusp
//! restricted to the diagonal at `x = a'` reduces to a Laplace transform of
//! the spectral measure of `q_{|lambda|}^+`:
//!
//! ```text
//! K_lambda(s) = int e^{-s nu} theta_nu(y0) (theta_nu'(y0) + |lambda| e^{-phi(a')} theta_nu(y0)) d rho(nu)
//! ```
//!
//! with `y0 = xi(a')`. The contribution is then
//! `2 e^{-p phi(a')} int_0^inf sum_lambda sgn(lambda) tr(lambda) K_lambda(s) ds`,
//! integrated in `s` outermost so that the `+-lambda` cancellation happens
//! before any `s`-quadrature.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{gauss_kronrod, least_squares, neville_to_zero, ComplexSum, GaussLegendre, NeumaierSum};
use crate::shape::{CuspShape, Sign};
use crate::spectrum::{
    delocalised_eta, is_g_symmetric, shift_spectrum, AbelParams, EquivariantSpectrum, EtaEstimate, EtaMethod,
    SignedPair,
};
use crate::sturm_liouville::{
    build_measure, eigenfunction_at, integrate_theta, EigenOptions, InitialData, MeasureGrid, Potential,
    SpectralMeasure, StepOptions,
};

/// `ln(1e16)`: exponents beyond this are below double precision.
const CUT: f64 = 36.9;

#[derive(Debug, Clone)]
pub struct EtaNumerics {
    /// Lower end of the `s`-integral. By default the larger of
    /// `1e-4 min(1, a''^2)` and the point where the largest eigenvalue's
    /// kernel has decayed to `1e-16`.
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    /// Drop every `|lambda|` above this.
    pub lambda_cutoff: Option<f64>,
    /// Panel width of the Gauss rule in `ln s`.
    pub log_s_panel: f64,
    /// The spectrum is a window of an infinite one, so `s` has to stay
    /// where the omitted eigenvalues are invisible.
    pub truncated: bool,
    /// Return an exact zero for g-symmetric spectra without integrating.
    pub short_circuit: bool,
    /// Relative accuracy assumed for each kernel; the density samples and
    /// atom weights are good to about this.
    pub measure_rel_error: f64,
    pub measure: MeasureGrid,
}

impl Default for EtaNumerics {
    fn default() -> Self {
        EtaNumerics {
            s_min: None,
            s_max: None,
            lambda_cutoff: None,
            log_s_panel: 0.5,
            truncated: true,
            short_circuit: true,
            measure_rel_error: 1e-8,
            measure: MeasureGrid { panel: 2.0, ..MeasureGrid::default() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct EtaRequest {
    pub shape: CuspShape,
    pub spectrum: EquivariantSpectrum,
    pub a_prime: f64,
    pub p: u32,
    pub numerics: EtaNumerics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaContribution {
    pub abs_lambda: f64,
    pub value: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EtaDiagnostics {
    pub s_min: f64,
    pub s_max: f64,
    /// Estimated mass of the integrand on `(0, s_min)`.
    pub head_mass: f64,
    /// Bound for the integrand beyond `s_max`.
    pub tail_mass: f64,
    /// `mult e^{-s_min floor(max |lambda|)}` for the first omitted eigenvalue.
    pub lambda_tail_bound: f64,
    /// Largest `e^{-s_min (nu_max - floor)}` over the measures used.
    pub measure_truncation: f64,
    /// Difference between the `s`-rule and the same rule at half the panels.
    pub quadrature_error: f64,
    /// `measure_rel_error` times the sum of the per-lambda magnitudes.
    pub measure_error: f64,
    pub measure_nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub per_lambda: Vec<LambdaContribution>,
    pub diagnostics: EtaDiagnostics,
    /// The spectrum was g-symmetric and the integral was skipped.
    pub symmetric: bool,
}

impl EtaResult {
    fn zero(symmetric: bool) -> Self {
        EtaResult {
            value: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
            per_lambda: Vec::new(),
            diagnostics: EtaDiagnostics::default(),
            symmetric,
        }
    }
}

/// Where the kernel is sampled: `y0 = xi(x)` with a weight that already
/// contains `2 e^{-p phi(x)}`.
#[derive(Debug, Clone, Copy)]
struct KernelPoint {
    y: f64,
    weight: f64,
    damp: f64,
}

/// `K(s) = sum_i coeff_i e^{-s nu_i}` for one `|lambda|`.
#[derive(Debug, Clone, Default)]
struct LambdaKernel {
    nus: Vec<f64>,
    coeffs: Vec<f64>,
}

impl LambdaKernel {
    fn eval(&self, s: f64) -> f64 {
        let mut acc = NeumaierSum::new();
        for (nu, c) in self.nus.iter().zip(&self.coeffs) {
            acc.add(c * (-s * nu).exp());
        }
        acc.value()
    }

    fn floor(&self) -> Option<f64> {
        self.nus.iter().copied().reduce(f64::min)
    }

    fn abs_mass(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }
}

fn kernel_from_measure(
    q: &Potential,
    measure: &SpectralMeasure,
    abs: f64,
    points: &[KernelPoint],
    eigen: &EigenOptions,
) -> Result<LambdaKernel> {
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let y_last = ys.iter().copied().fold(0.0, f64::max);
    let combine = |j: usize, t: f64, dt: f64| {
        let pt = &points[j];
        pt.weight * t * (dt + abs * pt.damp * t)
    };
    let atoms = measure
        .atoms
        .par_iter()
        .map(|a| -> Result<(f64, f64)> {
            let mut acc = NeumaierSum::new();
            for (j, &y) in ys.iter().enumerate() {
                let (t, dt) = eigenfunction_at(q, a.nu, y, eigen)?;
                acc.add(combine(j, t, dt));
            }
            Ok((a.nu, a.weight * acc.value()))
        })
        .collect::<Result<Vec<_>>>()?;
    let step = StepOptions::default();
    let continuum = measure
        .continuum
        .par_iter()
        .map(|c| -> Result<(f64, f64)> {
            let sol = integrate_theta(q, Complex64::new(c.nu, 0.0), InitialData::Theta1, y_last, &ys, &step)?;
            let mut acc = NeumaierSum::new();
            for (j, &y) in ys.iter().enumerate() {
                let s = sol
                    .samples
                    .iter()
                    .find(|s| s.y == y)
                    .ok_or_else(|| Error::nonconvergence("boundary kernel", "missing sample"))?;
                let t = s.theta().ok_or(Error::Overflow { y })?.re;
                let dt = s.dtheta().ok_or(Error::Overflow { y })?.re;
                acc.add(combine(j, t, dt));
            }
            Ok((c.nu, c.density * c.quad_weight * acc.value()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (nus, coeffs) = atoms.into_iter().chain(continuum).unzip();
    Ok(LambdaKernel { nus, coeffs })
}

/// Diagonal boundary kernel at `x = a'` for one `|lambda|`, from a measure
/// of `q_{|lambda|}^+` built by the caller.
pub fn boundary_kernel_term(
    shape: &CuspShape,
    lambda: f64,
    a_prime: f64,
    s: f64,
    measure: &SpectralMeasure,
) -> Result<f64> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda = {lambda} must be finite and nonzero")));
    }
    if !(s > 0.0) {
        return Err(Error::InvalidInput(format!("s = {s} must be positive")));
    }
    let Some(floor) = measure.support_floor() else {
        return Ok(0.0);
    };
    if s * (measure.nu_max - floor) < CUT {
        return Err(Error::Precondition(format!(
            "measure ends at nu = {} but e^(-s nu) at s = {s} needs nu >= {}",
            measure.nu_max,
            floor + CUT / s
        )));
    }
    let abs = lambda.abs();
    let q = Potential::from_shape(shape, abs, Sign::Plus)?;
    let point = KernelPoint { y: shape.xi(a_prime)?, weight: 1.0, damp: (-shape.phi(a_prime)).exp() };
    let k = kernel_from_measure(&q, measure, abs, &[point], &EigenOptions::default())?;
    Ok(k.eval(s))
}

/// Closed form of the boundary kernel on the cylinder `phi = 0` at
/// distance `a_dd = a' - a` from the boundary.
pub fn cylinder_kernel(lambda: f64, a_dd: f64, s: f64) -> f64 {
    let l = lambda.abs();
    let x = a_dd * a_dd / s;
    let bracket = a_dd * s.powf(-1.5) * (-x).exp() - l * (-x).exp_m1() / s.sqrt();
    (-s * l * l).exp() * bracket / (2.0 * PI.sqrt())
}

/// Shape plus a cache of spectral measures, so that several `a'` or
/// `epsilon` runs share the expensive part.
///
/// Measures are keyed by `(|lambda|, nu_max, panel)` exactly, which keeps
/// every result independent of what ran before.
pub struct CuspContext {
    shape: CuspShape,
    y_resolution: f64,
    cache: Mutex<HashMap<(u64, u64, u64), Arc<SpectralMeasure>>>,
}

impl CuspContext {
    pub fn new(shape: CuspShape) -> Self {
        CuspContext { shape, y_resolution: 0.0, cache: Mutex::new(HashMap::new()) }
    }

    /// Resolve eigenfunctions up to `y = xi(x)` for every `x <= x_max`,
    /// so that runs at different `a' <= x_max` reuse the same measures.
    pub fn resolving_up_to(mut self, x_max: f64) -> Result<Self> {
        self.y_resolution = self.shape.xi(x_max)?;
        Ok(self)
    }

    pub fn shape(&self) -> &CuspShape {
        &self.shape
    }

    fn measure(&self, q: &Potential, abs: f64, nu_max: f64, grid: &MeasureGrid) -> Result<Arc<SpectralMeasure>> {
        let key = (abs.to_bits(), nu_max.to_bits(), grid.panel.to_bits());
        if let Some(m) = self.cache.lock().unwrap().get(&key) {
            return Ok(m.clone());
        }
        let measure = Arc::new(build_measure(q, nu_max, grid)?);
        self.cache.lock().unwrap().insert(key, measure.clone());
        Ok(measure)
    }

    fn kernels(
        &self,
        pairs: &[SignedPair],
        points: &[KernelPoint],
        s_min: f64,
        numerics: &EtaNumerics,
    ) -> Result<(Vec<LambdaKernel>, f64, usize)> {
        let y_max = points.iter().map(|p| p.y).fold(self.y_resolution, f64::max);
        let mut grid = numerics.measure.clone();
        grid.panel = grid.panel.min(PI / y_max);
        let out = pairs
            .par_iter()
            .map(|pair| -> Result<(LambdaKernel, f64)> {
                let q = Potential::from_shape(&self.shape, pair.abs, Sign::Plus)?;
                let floor = q.nu_floor().unwrap_or(0.0);
                let mut grid = grid.clone();
                if let Some(edge) = q.continuum_edge().filter(|&e| e > 0.0) {
                    // e^{-s nu} matters up to s ~ 40 / edge, i.e. down to t ~ sqrt(edge / 40)
                    grid.edge_panel = Some(0.03 * edge.sqrt());
                }
                let mut m = self.measure(&q, pair.abs, floor + CUT / s_min, &grid)?;
                // the first atom can sit far above the floor of q
                if let Some(f) = m.support_floor() {
                    if s_min * (m.nu_max - f) < CUT {
                        m = self.measure(&q, pair.abs, f + CUT / s_min, &grid)?;
                    }
                }
                let trunc = match m.support_floor() {
                    Some(f) => (-s_min * (m.nu_max - f)).exp(),
                    None => 0.0,
                };
                let k = kernel_from_measure(&q, &m, pair.abs, points, &grid.eigen)?;
                Ok((k, trunc))
            })
            .collect::<Result<Vec<_>>>()?;
        let trunc = out.iter().map(|o| o.1).fold(0.0, f64::max);
        let nodes = out.iter().map(|o| o.0.nus.len()).sum();
        Ok((out.into_iter().map(|o| o.0).collect(), trunc, nodes))
    }

    /// Cusp contribution at `a'` for the spectrum, reusing cached measures.
    pub fn contribution(
        &self,
        spectrum: &EquivariantSpectrum,
        a_prime: f64,
        p: u32,
        numerics: &EtaNumerics,
    ) -> Result<EtaResult> {
        let a = self.shape.a();
        if !(a_prime > a) || !a_prime.is_finite() {
            return Err(Error::InvalidInput(format!("a' = {a_prime} must exceed a = {a}")));
        }
        check_p(p)?;
        if !(spectrum.gap() > 0.0) {
            return Err(Error::Precondition("the boundary operator must be invertible (gap > 0)".into()));
        }
        if numerics.short_circuit && is_g_symmetric(spectrum, 0.0) {
            return Ok(EtaResult::zero(true));
        }
        let pairs = select_pairs(spectrum, numerics.lambda_cutoff);
        if pairs.is_empty() {
            return Ok(EtaResult::zero(false));
        }
        let y0 = self.shape.xi(a_prime)?;
        let point = KernelPoint {
            y: y0,
            weight: 2.0 * (-(p as f64) * self.shape.phi(a_prime)).exp(),
            damp: (-self.shape.phi(a_prime)).exp(),
        };
        let s_min = match numerics.s_min {
            Some(s) => s,
            None => {
                let dd = (a_prime - a).min(1.0);
                (1e-4 * dd * dd).max(self.truncation_floor(&pairs, numerics)?)
            }
        };
        let run = self.integrate(&pairs, &[point], &[s_min], numerics)?;
        Ok(run.result_for(0))
    }

    /// Smallest `s` at which the largest eigenvalue of a truncated spectrum
    /// no longer contributes.
    fn truncation_floor(&self, pairs: &[SignedPair], numerics: &EtaNumerics) -> Result<f64> {
        if !numerics.truncated {
            return Ok(0.0);
        }
        let top = pairs.last().expect("nonempty");
        let q = Potential::from_shape(&self.shape, top.abs, Sign::Plus)?;
        let floor = q.nu_floor().unwrap_or(0.0);
        if !(floor > 0.0) {
            return Err(Error::Precondition(format!(
                "q for |lambda| = {} has floor {floor}; the eigenvalue window cannot be truncated",
                top.abs
            )));
        }
        let mult = pairs.iter().map(|p| p.mult).max().unwrap_or(1) as f64;
        Ok((1e16 * mult * top.abs.max(1.0)).ln() / floor)
    }

    /// `2 int_{t_j}^{s_max} G(s) ds` for each lower limit `t_j` (ascending).
    fn integrate(
        &self,
        pairs: &[SignedPair],
        points: &[KernelPoint],
        lower: &[f64],
        numerics: &EtaNumerics,
    ) -> Result<Integrated> {
        let s_min = lower[0];
        if !(s_min > 0.0) {
            return Err(Error::InvalidInput(format!("s_min = {s_min} must be positive")));
        }
        if !(numerics.log_s_panel > 0.0) {
            return Err(Error::InvalidInput("log_s_panel must be positive".into()));
        }
        let (kernels, measure_truncation, measure_nodes) = self.kernels(pairs, points, s_min, numerics)?;
        let floor_min = kernels.iter().filter_map(|k| k.floor()).fold(f64::INFINITY, f64::min);
        let odds: Vec<Complex64> = pairs.iter().map(|p| p.odd_part()).collect();
        let s_max = match numerics.s_max {
            Some(s) => s,
            None if floor_min.is_finite() => {
                if !(floor_min > 0.0) {
                    return Err(Error::Precondition(format!(
                        "spectral measures reach down to nu = {floor_min}, so the s-integral diverges"
                    )));
                }
                let mass: f64 = kernels.iter().zip(&odds).map(|(k, o)| o.norm() * k.abs_mass()).sum();
                (1e16 * mass.max(1.0)).ln() / floor_min
            }
            None => 2.0 * lower[lower.len() - 1],
        }
        .max(2.0 * lower[lower.len() - 1]);

        let mut breaks: Vec<f64> = lower.iter().map(|s| s.ln()).collect();
        breaks.push(s_max.ln());
        let fine = LogRule::new(&breaks, numerics.log_s_panel);
        let coarse = LogRule::new(&breaks, 2.0 * numerics.log_s_panel);

        // per-|lambda| integrals on each interval [t_j, t_{j+1}]
        let per_segment = |rule: &LogRule| -> Vec<Vec<f64>> {
            kernels
                .par_iter()
                .map(|k| {
                    let mut seg = vec![NeumaierSum::new(); breaks.len() - 1];
                    for node in &rule.nodes {
                        seg[node.segment].add(node.weight * k.eval(node.s));
                    }
                    seg.iter().map(|v| v.value()).collect()
                })
                .collect()
        };
        let fine_seg = per_segment(&fine);
        let coarse_seg = per_segment(&coarse);
        let g_at = |s: f64| -> f64 {
            kernels
                .iter()
                .zip(&odds)
                .map(|(k, o)| *o * k.eval(s))
                .collect::<ComplexSum>()
                .value()
                .norm()
        };
        let head_mass = 2.0 * 2.0 * s_min * g_at(s_min);
        let tail_mass = if floor_min.is_finite() && floor_min > 0.0 { 2.0 * g_at(s_max) / floor_min } else { 0.0 };
        let lambda_tail_bound = if numerics.truncated {
            let top = pairs.last().expect("nonempty");
            let q = Potential::from_shape(&self.shape, top.abs, Sign::Plus)?;
            top.mult as f64 * (-s_min * q.nu_floor().unwrap_or(0.0)).exp()
        } else {
            0.0
        };
        Ok(Integrated {
            abs: pairs.iter().map(|p| p.abs).collect(),
            odds,
            fine: fine_seg,
            coarse: coarse_seg,
            diagnostics: EtaDiagnostics {
                s_min,
                s_max,
                head_mass,
                tail_mass,
                lambda_tail_bound,
                measure_truncation,
                quadrature_error: 0.0,
                measure_error: numerics.measure_rel_error,
                measure_nodes,
            },
        })
    }
}

struct Integrated {
    abs: Vec<f64>,
    odds: Vec<Complex64>,
    /// `[lambda][segment]` integrals of the kernel.
    fine: Vec<Vec<f64>>,
    coarse: Vec<Vec<f64>>,
    diagnostics: EtaDiagnostics,
}

impl Integrated {
    /// Result for the integral from the `j`-th lower limit upwards.
    fn result_for(&self, j: usize) -> EtaResult {
        let tail = |v: &[f64]| -> f64 { v[j..].iter().copied().collect::<NeumaierSum>().value() };
        let per_lambda: Vec<LambdaContribution> = self
            .abs
            .iter()
            .zip(&self.odds)
            .zip(&self.fine)
            .map(|((&abs_lambda, o), seg)| LambdaContribution { abs_lambda, value: *o * tail(seg) })
            .collect();
        let value = per_lambda.iter().map(|c| c.value).collect::<ComplexSum>().value();
        let coarse = self
            .odds
            .iter()
            .zip(&self.coarse)
            .map(|(o, seg)| *o * tail(seg))
            .collect::<ComplexSum>()
            .value();
        let mut diagnostics = self.diagnostics;
        diagnostics.quadrature_error = (value - coarse).norm();
        diagnostics.measure_error *= per_lambda.iter().map(|c| c.value.norm()).sum::<f64>();
        let error_estimate = diagnostics.quadrature_error
            + diagnostics.measure_error
            + diagnostics.head_mass
            + diagnostics.tail_mass
            + diagnostics.lambda_tail_bound * value.norm().max(1.0)
            + diagnostics.measure_truncation
            + 1e-14;
        EtaResult { value, error_estimate, per_lambda, diagnostics, symmetric: false }
    }
}

struct LogNode {
    s: f64,
    /// Includes `ds = s du`.
    weight: f64,
    segment: usize,
}

/// Composite 16-point Gauss rule in `u = ln s` with panels no wider than
/// `width`, aligned to the given breakpoints.
struct LogRule {
    nodes: Vec<LogNode>,
}

impl LogRule {
    fn new(breaks: &[f64], width: f64) -> Self {
        let gl = GaussLegendre::new(16);
        let mut nodes = Vec::new();
        for (segment, w) in breaks.windows(2).enumerate() {
            let n = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
            let h = (w[1] - w[0]) / n as f64;
            for k in 0..n {
                for (u, wt) in gl.mapped(w[0] + k as f64 * h, w[0] + (k + 1) as f64 * h) {
                    let s = u.exp();
                    nodes.push(LogNode { s, weight: wt * s, segment });
                }
            }
        }
        LogRule { nodes }
    }
}

fn check_p(p: u32) -> Result<()> {
    if p == 0 || p % 2 == 1 {
        return Err(Error::InvalidInput(format!("p = {p} must be even and positive")));
    }
    Ok(())
}

fn select_pairs(spectrum: &EquivariantSpectrum, cutoff: Option<f64>) -> Vec<SignedPair> {
    let mut pairs: Vec<SignedPair> = spectrum
        .pairs()
        .into_iter()
        .filter(|p| p.abs > 0.0 && cutoff.is_none_or(|c| p.abs <= c))
        .collect();
    pairs.sort_by(|a, b| a.abs.total_cmp(&b.abs));
    pairs
}

/// One-shot cusp contribution; see [`CuspContext::contribution`].
pub fn cusp_contribution(req: &EtaRequest) -> Result<EtaResult> {
    CuspContext::new(req.shape.clone()).contribution(&req.spectrum, req.a_prime, req.p, &req.numerics)
}

/// `int_0^inf sum_j c_j e^{-lambda_j^2 s} e^{-a^2/s} s^{-1/2} (a/s - |lambda_j|) ds`
/// with `c_j` already carrying the sign of `lambda_j`.
fn vanishing_integral(terms: &[(f64, Complex64)], a: f64) -> Result<Complex64> {
    let l1 = terms.iter().map(|t| t.0).fold(f64::INFINITY, f64::min);
    if !(l1 > 0.0) {
        return Err(Error::InvalidInput("every |lambda| must be positive".into()));
    }
    let (u0, u1) = ((a * a / 60.0).ln(), (60.0 / (l1 * l1)).ln());
    let scale: f64 = terms.iter().map(|t| t.1.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    let r = gauss_kronrod(
        |u: f64| {
            let s = u.exp();
            let g = (-a * a / s).exp() * s.sqrt();
            Ok(terms
                .iter()
                .map(|&(l, c)| c * ((-l * l * s).exp() * g * (a / s - l)))
                .collect::<ComplexSum>()
                .value())
        },
        u0.min(u1 - 1.0),
        u1,
        1e-15 * scale,
        1e-13,
        4000,
    )?;
    Ok(r.value)
}

/// Absolute value of the vanishing integral for eigenvalues `lambdas` with
/// coefficients `a_coeffs`. Each term integrates to zero on its own, so the
/// result measures quadrature error only.
pub fn vanish_check(lambdas: &[f64], a_coeffs: &[Complex64], a_prime: f64) -> Result<f64> {
    if lambdas.len() != a_coeffs.len() {
        return Err(Error::InvalidInput("one coefficient per eigenvalue".into()));
    }
    if !(a_prime > 0.0) {
        return Err(Error::InvalidInput(format!("a' = {a_prime} must be positive")));
    }
    if lambdas.is_empty() {
        return Ok(0.0);
    }
    let terms: Vec<(f64, Complex64)> = lambdas.iter().zip(a_coeffs).map(|(&l, &c)| (l.abs(), c * l.signum())).collect();
    Ok(vanishing_integral(&terms, a_prime)?.norm())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderSplit {
    /// `sum sgn(lambda) tr(lambda)`, Abel regularised.
    pub eta: EtaEstimate,
    /// The integral term that separates the cylinder contribution from the
    /// eta invariant.
    pub remainder: Complex64,
}

/// Cylinder contribution at distance `a_dd` split into the eta invariant
/// and a remainder that should vanish.
pub fn cylinder_closed_form(spectrum: &EquivariantSpectrum, a_dd: f64) -> Result<CylinderSplit> {
    if !(a_dd > 0.0) {
        return Err(Error::InvalidInput(format!("a'' = {a_dd} must be positive")));
    }
    if !(spectrum.gap() > 0.0) {
        return Err(Error::Precondition("the boundary operator must be invertible (gap > 0)".into()));
    }
    let terms: Vec<(f64, Complex64)> = spectrum
        .pairs()
        .iter()
        .filter(|p| p.odd_part() != Complex64::new(0.0, 0.0))
        .map(|p| (p.abs, p.odd_part()))
        .collect();
    let eta = delocalised_eta(spectrum, EtaMethod::Abel(AbelParams::default()))?;
    let remainder = if terms.is_empty() {
        Complex64::new(0.0, 0.0)
    } else {
        vanishing_integral(&terms, a_dd)? / PI.sqrt()
    };
    Ok(CylinderSplit { eta, remainder })
}

/// Cutoff `psi` on `[a, a + 1]`: one at `a`, zero at `a + 1`, monotone,
/// with vanishing first and second derivatives at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    a: f64,
}

impl CutoffProfile {
    pub fn smoothstep(a: f64) -> Self {
        CutoffProfile { a }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn psi(&self, x: f64) -> f64 {
        let u = (x - self.a).clamp(0.0, 1.0);
        1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    }

    pub fn dpsi(&self, x: f64) -> f64 {
        let u = x - self.a;
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        -30.0 * u * u * (1.0 - u) * (1.0 - u)
    }
}

#[derive(Debug, Clone)]
pub struct RegularisedOptions {
    /// Range of the lower `s`-limit `t` used for the small-`t` fit. By
    /// default `[s_floor, 10 s_floor]` with `s_floor` the truncation floor
    /// (at least `1e-3`).
    pub t_range: Option<(f64, f64)>,
    pub t_count: usize,
    /// Gauss points per panel across `[a, a + 1]`; panels shrink
    /// geometrically towards `a`, down to a tenth of `sqrt(t)`.
    pub x_nodes: usize,
    /// Largest acceptable RMS fit residual relative to the sampled values.
    pub fit_tol: f64,
    pub numerics: EtaNumerics,
}

impl Default for RegularisedOptions {
    fn default() -> Self {
        RegularisedOptions { t_range: None, t_count: 12, x_nodes: 12, fit_tol: 1e-6, numerics: EtaNumerics::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularisedSample {
    pub eps: f64,
    pub limit: Complex64,
    pub fit_residual: f64,
    /// Change of the limit when the fit gains a `t^{5/2}` term.
    pub limit_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularisedResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub samples: Vec<RegularisedSample>,
}

/// Regularised cusp contribution for a boundary operator with kernel: shift
/// the spectrum by each `eps`, take the constant term of the small-`t`
/// expansion of the contribution with lower `s`-limit `t`, and extrapolate
/// `eps -> 0`.
pub fn regularised_eta(
    ctx: &CuspContext,
    spectrum: &EquivariantSpectrum,
    psi: &CutoffProfile,
    eps_sequence: &[f64],
    p: u32,
    opts: &RegularisedOptions,
) -> Result<RegularisedResult> {
    check_p(p)?;
    let shape = ctx.shape();
    if psi.a() != shape.a() {
        return Err(Error::InvalidInput(format!("cutoff starts at {} but the cusp at {}", psi.a(), shape.a())));
    }
    if eps_sequence.is_empty() || eps_sequence.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("eps sequence must be nonempty and strictly decreasing".into()));
    }
    if opts.t_count < 6 {
        return Err(Error::InvalidInput("the t fit needs at least 6 samples".into()));
    }
    let gl = GaussLegendre::new(opts.x_nodes.max(1));
    let x_points = |t_lo: f64| -> Result<Vec<KernelPoint>> {
        // the kernel varies on the scale sqrt(t) next to the boundary
        let mut edges = vec![0.0];
        let mut e = 0.1 * t_lo.sqrt();
        while e < 0.5 {
            edges.push(e);
            e *= 10.0;
        }
        edges.push(1.0);
        let mut pts = Vec::new();
        for w in edges.windows(2) {
            for (x, wt) in gl.mapped(shape.a() + w[0], shape.a() + w[1]) {
                pts.push(KernelPoint {
                    y: shape.xi(x)?,
                    weight: 2.0 * wt * -psi.dpsi(x) * (-(p as f64) * shape.phi(x)).exp(),
                    damp: (-shape.phi(x)).exp(),
                });
            }
        }
        Ok(pts)
    };

    let mut samples = Vec::with_capacity(eps_sequence.len());
    for &eps in eps_sequence {
        let shifted = shift_spectrum(spectrum, eps)?;
        if opts.numerics.short_circuit && is_g_symmetric(&shifted, 0.0) {
            samples.push(RegularisedSample { eps, limit: Complex64::new(0.0, 0.0), fit_residual: 0.0, limit_error: 0.0 });
            continue;
        }
        let pairs = select_pairs(&shifted, opts.numerics.lambda_cutoff);
        if pairs.is_empty() {
            samples.push(RegularisedSample { eps, limit: Complex64::new(0.0, 0.0), fit_residual: 0.0, limit_error: 0.0 });
            continue;
        }
        let (t_lo, t_hi) = match opts.t_range {
            Some(r) => r,
            None => {
                let lo = ctx.truncation_floor(&pairs, &opts.numerics)?.max(1e-3);
                (lo, 10.0 * lo)
            }
        };
        if !(t_lo > 0.0 && t_hi > t_lo) {
            return Err(Error::InvalidInput(format!("t range ({t_lo}, {t_hi}) is empty")));
        }
        let n = opts.t_count;
        let ts: Vec<f64> = (0..n).map(|k| t_lo * (t_hi / t_lo).powf(k as f64 / (n - 1) as f64)).collect();
        let run = ctx.integrate(&pairs, &x_points(t_lo)?, &ts, &opts.numerics)?;
        let results: Vec<EtaResult> = (0..n).map(|j| run.result_for(j)).collect();
        let values: Vec<Complex64> = results.iter().map(|r| r.value).collect();
        let basis = |t: f64, out: &mut [f64]| {
            for (k, o) in out.iter_mut().enumerate() {
                *o = t.powf(0.5 * k as f64);
            }
        };
        let re_vals: Vec<f64> = values.iter().map(|v| v.re).collect();
        let im_vals: Vec<f64> = values.iter().map(|v| v.im).collect();
        let re = least_squares(&ts, &re_vals, 5, basis)?;
        let im = least_squares(&ts, &im_vals, 5, basis)?;
        let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
        let fit_residual = re.residual.hypot(im.residual) / scale;
        if fit_residual > opts.fit_tol {
            return Err(Error::Extrapolation { nu: eps, spread: fit_residual });
        }
        let limit = Complex64::new(re.coeffs[0], im.coeffs[0]);
        // one more term in the expansion shows how settled c0 is
        let re6 = least_squares(&ts, &re_vals, 6, basis)?;
        let im6 = least_squares(&ts, &im_vals, 6, basis)?;
        let limit_error = 2.0 * (limit - Complex64::new(re6.coeffs[0], im6.coeffs[0])).norm() + results[0].diagnostics.measure_error;
        samples.push(RegularisedSample { eps, limit, fit_residual, limit_error });
    }

    let (value, error_estimate) = if samples.len() == 1 {
        (samples[0].limit, samples[0].limit_error)
    } else {
        let hs: Vec<f64> = samples.iter().map(|s| s.eps).collect();
        let re = neville_to_zero(&hs, &samples.iter().map(|s| s.limit.re).collect::<Vec<_>>());
        let im = neville_to_zero(&hs, &samples.iter().map(|s| s.limit.im).collect::<Vec<_>>());
        let fit = samples.iter().map(|s| s.limit_error).fold(0.0, f64::max);
        (Complex64::new(re.value, im.value), re.error.hypot(im.error) + fit)
    };
    Ok(RegularisedResult { value, error_estimate, samples })
}
