//! Half-line Sturm-Liouville engine for `-theta'' + q theta = nu theta` with
//! Dirichlet data at `y = 0`: solutions, Titchmarsh-Weyl m-functions,
//! spectral densities, discrete eigenvalues and spectral measures.

mod eigen;
mod measure;
pub mod propagate;
mod weyl;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::shape::{CuspShape, ShapeKind, Sign};

pub use eigen::{discrete_eigs, eigenfunction_at, Atom, EigenOptions};
pub use measure::{build_measure, parseval_check, DensitySample, MeasureGrid, ParsevalReport, SpectralMeasure};
pub use propagate::StepOptions;
pub use weyl::{spectral_density, weyl_m, DensityOptions, WeylOptions, WeylResult};

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthClass {
    /// `q -> inf`: purely discrete spectrum.
    Confining,
    /// `q` stays bounded; the essential spectrum starts at `continuum_edge`.
    Bounded { continuum_edge: f64 },
}

/// A potential `q` on `[0, inf)` with what is known about its spectrum.
#[derive(Clone)]
pub struct Potential {
    q: Func,
    dq: Option<Func>,
    nu_floor: Option<f64>,
    growth: GrowthClass,
    label: String,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("label", &self.label)
            .field("nu_floor", &self.nu_floor)
            .field("growth", &self.growth)
            .finish()
    }
}

impl Potential {
    pub fn new<F>(q: F, growth: GrowthClass, nu_floor: Option<f64>, label: impl Into<String>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Potential { q: Arc::new(q), dq: None, nu_floor, growth, label: label.into() }
    }

    pub fn with_derivative<F>(mut self, dq: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.dq = Some(Arc::new(dq));
        self
    }

    pub fn constant(c: f64) -> Self {
        Potential::new(move |_| c, GrowthClass::Bounded { continuum_edge: c }, Some(c), format!("const={c}"))
            .with_derivative(|_| 0.0)
    }

    /// `q(y) = y^2`.
    pub fn harmonic() -> Self {
        Potential::new(|y| y * y, GrowthClass::Confining, Some(0.0), "harmonic").with_derivative(|y| 2.0 * y)
    }

    /// `q(y) = y`.
    pub fn linear() -> Self {
        Potential::new(|y| y, GrowthClass::Confining, Some(0.0), "linear").with_derivative(|_| 1.0)
    }

    /// `q_lambda^{sign}` of a cusp shape, as a function of `y = xi(x)`.
    pub fn from_shape(shape: &CuspShape, lambda: f64, sign: Sign) -> Result<Self> {
        if shape.xi_sup().is_finite() {
            return Err(Error::Domain(
                "incomplete cusp: xi is bounded, so the half line is not covered".into(),
            ));
        }
        let label = format!("q[{lambda},{sign}]");
        let a = shape.a();
        let growth = match shape.kind() {
            ShapeKind::Zero => GrowthClass::Bounded { continuum_edge: lambda * lambda },
            ShapeKind::MuLog { mu } if *mu == 0.0 => GrowthClass::Bounded { continuum_edge: lambda * lambda },
            ShapeKind::MuLog { mu } if *mu > 0.0 => GrowthClass::Confining,
            ShapeKind::MuLog { .. } => GrowthClass::Bounded { continuum_edge: 0.0 },
            ShapeKind::Tabulated(t) => {
                let diag = crate::shape::diagnose(shape, 2, lambda.abs().max(f64::MIN_POSITIVE));
                if diag.strongly_admissible == crate::shape::Tristate::Yes {
                    GrowthClass::Confining
                } else {
                    // lower envelope of q over the sampled tail
                    let xs = t.xs();
                    let start = xs.partition_point(|&x| x < 0.5 * xs[xs.len() - 1]);
                    let edge = xs[start..]
                        .iter()
                        .map(|&x| shape.q_at_x(lambda, sign, x))
                        .fold(f64::INFINITY, f64::min);
                    GrowthClass::Bounded { continuum_edge: edge }
                }
            }
        };
        let floor = shape_floor(shape, lambda, sign);
        let s1 = Arc::new(shape.clone());
        let s2 = s1.clone();
        let q = move |y: f64| {
            if y <= 0.0 {
                return s1.q_at_x(lambda, sign, a.max(f64::MIN_POSITIVE));
            }
            match s1.xi_inv(y) {
                Ok(x) => s1.q_at_x(lambda, sign, x),
                Err(_) => f64::NAN,
            }
        };
        let dq = move |y: f64| {
            let x = if y <= 0.0 { Ok(a) } else { s2.xi_inv(y) };
            match x {
                Ok(x) => s2.dq_at_x(lambda, sign, x),
                Err(_) => f64::NAN,
            }
        };
        Ok(Potential::new(q, growth, Some(floor), label).with_derivative(dq))
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        (self.q)(y)
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match &self.dq {
            Some(d) => d(y),
            None => {
                let h = 1e-5 * y.abs().max(1.0);
                let lo = (y - h).max(0.0);
                ((self.q)(y + h) - (self.q)(lo)) / (y + h - lo)
            }
        }
    }

    pub fn nu_floor(&self) -> Option<f64> {
        self.nu_floor
    }

    pub fn growth(&self) -> GrowthClass {
        self.growth
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn continuum_edge(&self) -> Option<f64> {
        match self.growth {
            GrowthClass::Bounded { continuum_edge } => Some(continuum_edge),
            GrowthClass::Confining => None,
        }
    }
}

/// Lower bound for `q` over the cusp, sampled on a log grid in `x`.
fn shape_floor(shape: &CuspShape, lambda: f64, sign: Sign) -> f64 {
    let a = shape.a();
    let x0 = if a > 0.0 { a } else { 1e-6 };
    let mut lo = f64::INFINITY;
    for k in 0..=4000 {
        let x = x0 * (1.0 + 1e-9) * 10f64.powf(k as f64 * 8.0 / 4000.0) + if a > 0.0 { 0.0 } else { k as f64 * 1e-3 };
        let v = shape.q_at_x(lambda, sign, x);
        if v.is_finite() {
            lo = lo.min(v);
        }
    }
    lo - 1e-9 * lo.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialData {
    /// `theta(0) = 0, theta'(0) = 1`.
    Theta1,
    /// `theta(0) = -1, theta'(0) = 0`.
    Theta2,
}

impl InitialData {
    fn vector(self) -> [Complex64; 2] {
        match self {
            InitialData::Theta1 => [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            InitialData::Theta2 => [Complex64::new(-1.0, 0.0), Complex64::new(0.0, 0.0)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// `theta`, `theta'` stored directly.
    Linear,
    /// Classically forbidden stretch (`q - Re nu` above the switch
    /// threshold): stored as `log|theta|`, a phase and `u = theta'/theta`.
    LogDerivative,
}

/// Threshold on `q - Re nu` above which samples switch representation.
pub const LOG_DERIVATIVE_THRESHOLD: f64 = 1e4;

#[derive(Debug, Clone, Copy)]
pub struct SolutionSample {
    pub y: f64,
    /// `theta = e^{log_scale} theta_hat`.
    pub log_scale: f64,
    pub theta_hat: Complex64,
    pub dtheta_hat: Complex64,
    pub repr: Representation,
}

impl SolutionSample {
    /// `theta`, if representable as a double.
    pub fn theta(&self) -> Option<Complex64> {
        let v = self.theta_hat * self.log_scale.exp();
        (v.re.is_finite() && v.im.is_finite()).then_some(v)
    }

    pub fn dtheta(&self) -> Option<Complex64> {
        let v = self.dtheta_hat * self.log_scale.exp();
        (v.re.is_finite() && v.im.is_finite()).then_some(v)
    }

    pub fn log_abs_theta(&self) -> f64 {
        self.log_scale + self.theta_hat.norm().ln()
    }

    /// `theta'/theta`.
    pub fn log_derivative(&self) -> Complex64 {
        self.dtheta_hat / self.theta_hat
    }
}

#[derive(Debug, Clone)]
pub struct SLSolution {
    pub nu: Complex64,
    pub init: InitialData,
    pub samples: Vec<SolutionSample>,
}

impl SLSolution {
    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.y)
    }
}

/// Solves `-theta'' + q theta = nu theta` on `[0, y_max]`. Samples are
/// returned at every accepted step and at each of `extra_points`.
pub fn integrate_theta(
    q: &Potential,
    nu: Complex64,
    init: InitialData,
    y_max: f64,
    extra_points: &[f64],
    opts: &StepOptions,
) -> Result<SLSolution> {
    if !(y_max > 0.0) {
        return Err(Error::Domain(format!("integration range Y = {y_max} must be positive")));
    }
    let mut stops: Vec<f64> = extra_points.iter().copied().filter(|&p| p > 0.0 && p < y_max).collect();
    stops.push(y_max);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let v0 = init.vector();
    let mut state = propagate::State::new(0.0, v0, [Complex64::new(0.0, 0.0); 2]);
    let mut samples = Vec::new();
    let record = |st: &propagate::State<Complex64>, samples: &mut Vec<SolutionSample>| -> Result<()> {
        let [t, dt] = st.cols[0];
        if !st.log_scale.is_finite() {
            return Err(Error::Overflow { y: st.y });
        }
        let forbidden = q.eval(st.y) - nu.re > LOG_DERIVATIVE_THRESHOLD;
        let huge = st.log_scale + t.norm().max(dt.norm()).ln() > 700.0;
        samples.push(SolutionSample {
            y: st.y,
            log_scale: st.log_scale,
            theta_hat: t,
            dtheta_hat: dt,
            repr: if forbidden || huge { Representation::LogDerivative } else { Representation::Linear },
        });
        Ok(())
    };
    record(&state, &mut samples)?;
    let mut h = None;
    let mut failure = None;
    for stop in stops {
        let last = propagate::propagate(q, nu, &mut state, stop, opts, h, |st| {
            if failure.is_none() {
                if let Err(e) = record(st, &mut samples) {
                    failure = Some(e);
                }
            }
        })?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        h = Some(last);
    }
    Ok(SLSolution { nu, init, samples })
}

/// Both Dirichlet solutions at `y`, in one propagation. Returns
/// `([theta1, theta1'], [theta2, theta2'], log_scale)`.
pub fn fundamental_at(
    q: &Potential,
    nu: Complex64,
    y: f64,
    opts: &StepOptions,
) -> Result<([Complex64; 2], [Complex64; 2], f64)> {
    let mut st = propagate::State::new(0.0, InitialData::Theta1.vector(), InitialData::Theta2.vector());
    propagate::propagate(q, nu, &mut st, y, opts, None, |_| {})?;
    Ok((st.cols[0], st.cols[1], st.log_scale))
}
