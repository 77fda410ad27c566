//! Cusp shape functions `phi` and the scalars derived from them.
//!
//! A cusp `N x (a, inf)` carries the metric `e^{2 phi} (B_N + dx^2)`. The
//! half-line coordinate `y = xi(x)` is the arc length along the cusp, and
//! every potential the spectral engine sees is written in `y`.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::numerics::{brent, gauss_kronrod};

const XI_ABS_TOL: f64 = 1e-12;
const XI_REL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Samples of `phi` and `phi'` on a strictly increasing grid.
///
/// Between nodes `phi` is the cubic Hermite interpolant of the supplied
/// values and slopes, so `phi'` is its exact derivative. Before the first
/// node `phi` continues linearly; past the last node it continues as
/// `phi_n - m log(x / x_n)`, the log profile matching the end value and slope.
#[derive(Debug, Clone)]
pub struct Tabulated {
    x: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    /// xi at each node, measured from the cusp start.
    xi_nodes: Vec<f64>,
}

impl Tabulated {
    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn phis(&self) -> &[f64] {
        &self.phi
    }

    pub fn dphis(&self) -> &[f64] {
        &self.dphi
    }

    fn tail_mu(&self) -> f64 {
        let n = self.x.len();
        -self.x[n - 1] * self.dphi[n - 1]
    }

    fn segment(&self, x: f64) -> usize {
        match self.x.partition_point(|&xi| xi <= x) {
            0 => 0,
            k => (k - 1).min(self.x.len() - 2),
        }
    }

    /// (phi, phi', phi'') at `x`.
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        if x <= self.x[0] {
            let d = self.dphi[0];
            return (self.phi[0] + d * (x - self.x[0]), d, 0.0);
        }
        if x >= self.x[n - 1] {
            let m = self.tail_mu();
            return (self.phi[n - 1] - m * (x / self.x[n - 1]).ln(), -m / x, m / (x * x));
        }
        let i = self.segment(x);
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.phi[i], self.phi[i + 1], self.dphi[i], self.dphi[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1;
        let dv = (6.0 * t2 - 6.0 * t) * (y0 - y1) / h + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (3.0 * t2 - 2.0 * t) * d1;
        let ddv = ((12.0 * t - 6.0) * (y0 - y1) / h + (6.0 * t - 4.0) * d0 + (6.0 * t - 2.0) * d1) / h;
        (v, dv, ddv)
    }
}

#[derive(Debug, Clone)]
pub enum ShapeKind {
    /// `phi(x) = -mu log x`; `mu = 1` is the hyperbolic cusp.
    MuLog { mu: f64 },
    /// `phi = 0`, a cylindrical end.
    Zero,
    Tabulated(Tabulated),
}

#[derive(Debug, Clone)]
pub struct CuspShape {
    kind: ShapeKind,
    a: f64,
}

impl CuspShape {
    pub fn mulog(mu: f64, a: f64) -> Result<Self> {
        if !mu.is_finite() || !a.is_finite() {
            return Err(Error::InvalidInput("mu and a must be finite".into()));
        }
        if a < 0.0 {
            return Err(Error::InvalidInput(format!("cusp start a = {a} is negative")));
        }
        if mu != 0.0 && a == 0.0 {
            return Err(Error::InvalidInput(format!(
                "phi = -mu log x is singular at x = 0; mu = {mu} needs a > 0"
            )));
        }
        Ok(CuspShape { kind: ShapeKind::MuLog { mu }, a })
    }

    pub fn zero(a: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::InvalidInput(format!("cusp start a = {a} must be finite and >= 0")));
        }
        Ok(CuspShape { kind: ShapeKind::Zero, a })
    }

    pub fn tabulated(a: f64, x: Vec<f64>, phi: Vec<f64>, dphi: Vec<f64>) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::InvalidInput(format!("cusp start a = {a} must be finite and >= 0")));
        }
        if x.len() != phi.len() || x.len() != dphi.len() {
            return Err(Error::InvalidInput("x, phi and dphi must have equal length".into()));
        }
        if x.len() < 2 {
            return Err(Error::InvalidInput("tabulated shape needs at least two rows".into()));
        }
        if x.iter().chain(&phi).chain(&dphi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("tabulated shape contains non-finite values".into()));
        }
        if x[0] <= a {
            return Err(Error::InvalidInput(format!("first grid point {} must exceed a = {a}", x[0])));
        }
        if let Some(w) = x.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "grid not strictly increasing at x = {}",
                w[1]
            )));
        }
        let mut tab = Tabulated { x, phi, dphi, xi_nodes: Vec::new() };
        // cumulative xi at the nodes; the stretch (a, x0) uses the linear extension
        let mut xi_nodes = Vec::with_capacity(tab.x.len());
        let mut acc = linear_exp_integral(tab.phi[0], tab.dphi[0], a - tab.x[0], 0.0);
        xi_nodes.push(acc);
        for i in 0..tab.x.len() - 1 {
            let r = gauss_kronrod(
                |s| Ok(tab.eval(s).0.exp()),
                tab.x[i],
                tab.x[i + 1],
                XI_ABS_TOL * 1e-2,
                XI_REL_TOL,
                400,
            )?;
            acc += r.value;
            xi_nodes.push(acc);
        }
        tab.xi_nodes = xi_nodes;
        Ok(CuspShape { kind: ShapeKind::Tabulated(tab), a })
    }

    pub fn kind(&self) -> &ShapeKind {
        &self.kind
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn is_zero(&self) -> bool {
        match self.kind {
            ShapeKind::Zero => true,
            ShapeKind::MuLog { mu } => mu == 0.0,
            ShapeKind::Tabulated(_) => false,
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        match &self.kind {
            ShapeKind::MuLog { mu } => {
                if *mu == 0.0 {
                    0.0
                } else {
                    -mu * x.ln()
                }
            }
            ShapeKind::Zero => 0.0,
            ShapeKind::Tabulated(t) => t.eval(x).0,
        }
    }

    pub fn dphi(&self, x: f64) -> f64 {
        match &self.kind {
            ShapeKind::MuLog { mu } => -mu / x,
            ShapeKind::Zero => 0.0,
            ShapeKind::Tabulated(t) => t.eval(x).1,
        }
    }

    pub fn d2phi(&self, x: f64) -> f64 {
        match &self.kind {
            ShapeKind::MuLog { mu } => mu / (x * x),
            ShapeKind::Zero => 0.0,
            ShapeKind::Tabulated(t) => t.eval(x).2,
        }
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if x.is_nan() || x <= self.a {
            return Err(Error::Domain(format!("x = {x} must exceed the cusp start a = {}", self.a)));
        }
        Ok(())
    }

    /// `xi(x) = int_a^x e^{phi}`.
    pub fn xi(&self, x: f64) -> Result<f64> {
        self.check_x(x)?;
        let a = self.a;
        Ok(match &self.kind {
            ShapeKind::Zero => x - a,
            ShapeKind::MuLog { mu } => {
                if *mu == 0.0 {
                    x - a
                } else if *mu == 1.0 {
                    (x / a).ln()
                } else {
                    let e = 1.0 - mu;
                    // x^e - a^e = a^e (exp(e ln(x/a)) - 1), stable for x near a
                    a.powf(e) * (e * (x / a).ln()).exp_m1() / e
                }
            }
            ShapeKind::Tabulated(t) => {
                let n = t.x.len();
                if x <= t.x[0] {
                    linear_exp_integral(t.phi[0], t.dphi[0], a - t.x[0], x - t.x[0])
                } else if x >= t.x[n - 1] {
                    let xn = t.x[n - 1];
                    t.xi_nodes[n - 1] + t.phi[n - 1].exp() * xn * log_profile_integral(t.tail_mu(), x / xn)
                } else {
                    let i = t.segment(x);
                    let r = gauss_kronrod(|s| Ok(t.eval(s).0.exp()), t.x[i], x, XI_ABS_TOL, XI_REL_TOL, 400)?;
                    t.xi_nodes[i] + r.value
                }
            }
        })
    }

    /// Supremum of `xi`, finite exactly when the cusp is incomplete.
    pub fn xi_sup(&self) -> f64 {
        match &self.kind {
            ShapeKind::MuLog { mu } if *mu > 1.0 => self.a.powf(1.0 - mu) / (mu - 1.0),
            ShapeKind::Tabulated(t) => {
                let n = t.x.len();
                let m = t.tail_mu();
                if m > 1.0 {
                    t.xi_nodes[n - 1] + t.phi[n - 1].exp() * t.x[n - 1] / (m - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            _ => f64::INFINITY,
        }
    }

    /// Inverse of `xi`.
    pub fn xi_inv(&self, y: f64) -> Result<f64> {
        if y.is_nan() || y <= 0.0 {
            return Err(Error::Domain(format!("y = {y} must be positive")));
        }
        let sup = self.xi_sup();
        if y >= sup {
            return Err(Error::nonconvergence(
                "xi inverse",
                format!("y = {y} is beyond the range of xi (sup {sup})"),
            ));
        }
        let a = self.a;
        let x = match &self.kind {
            ShapeKind::Zero => a + y,
            ShapeKind::MuLog { mu } => {
                if *mu == 0.0 {
                    a + y
                } else if *mu == 1.0 {
                    a * y.exp()
                } else {
                    let e = 1.0 - mu;
                    a * ((e * y / a.powf(e)).ln_1p() / e).exp()
                }
            }
            ShapeKind::Tabulated(t) => {
                let n = t.x.len();
                if y <= t.xi_nodes[0] {
                    // on (a, x0): xi = e^{phi0} (e^{d (x - x0)} - e^{d (a - x0)}) / d
                    let d = t.dphi[0];
                    let r = y * (-t.phi[0]).exp();
                    if d == 0.0 {
                        a + r
                    } else {
                        t.x[0] + ((d * (a - t.x[0])).exp() + d * r).ln() / d
                    }
                } else if y >= t.xi_nodes[n - 1] {
                    let xn = t.x[n - 1];
                    let m = t.tail_mu();
                    let r = (y - t.xi_nodes[n - 1]) * (-t.phi[n - 1]).exp() / xn;
                    let u = if m == 1.0 { r.exp() } else { ((1.0 - m) * r).ln_1p().exp().powf(1.0 / (1.0 - m)) };
                    xn * u
                } else {
                    let k = t.xi_nodes.partition_point(|&v| v <= y);
                    let (lo, hi) = (t.x[k - 1], t.x[k]);
                    brent(|x| Ok(self.xi(x)? - y), lo, hi, 1e-15 * hi.abs().max(1.0), 200)?
                }
            }
        };
        if !x.is_finite() {
            return Err(Error::nonconvergence("xi inverse", format!("x overflowed for y = {y}")));
        }
        Ok(x)
    }

    /// `q_lambda^{sign}(y) = lambda (lambda +- phi') e^{-2 phi}` at `x = xi^{-1}(y)`.
    pub fn q_lambda(&self, lambda: f64, sign: Sign, y: f64) -> Result<f64> {
        let x = self.xi_inv(y)?;
        Ok(self.q_at_x(lambda, sign, x))
    }

    pub(crate) fn q_at_x(&self, lambda: f64, sign: Sign, x: f64) -> f64 {
        let dphi = self.dphi(x);
        let inner = match sign {
            Sign::Plus => lambda + dphi,
            Sign::Minus => lambda - dphi,
        };
        lambda * inner * (-2.0 * self.phi(x)).exp()
    }

    /// `d q_lambda^{sign} / dy` at `x = xi^{-1}(y)`.
    pub(crate) fn dq_at_x(&self, lambda: f64, sign: Sign, x: f64) -> f64 {
        let (phi, dphi, d2phi) = (self.phi(x), self.dphi(x), self.d2phi(x));
        let s = sign.as_f64();
        let e2 = (-2.0 * phi).exp();
        // dy/dx = e^{phi}
        (lambda * s * d2phi * e2 - 2.0 * dphi * lambda * (lambda + s * dphi) * e2) * (-phi).exp()
    }

    /// `Phi(x) = e^{-(p-1) phi(x) / 2}`.
    pub fn phi_factor(&self, p: u32, x: f64) -> Result<f64> {
        self.check_x(x)?;
        Ok((-(p as f64 - 1.0) * self.phi(x) / 2.0).exp())
    }

    /// `h(y) = e^{-phi(xi^{-1}(y))}`.
    pub fn h(&self, y: f64) -> Result<f64> {
        let x = self.xi_inv(y)?;
        Ok((-self.phi(x)).exp())
    }

    /// Parses the line-oriented `key=value` shape config. Relative `file=`
    /// paths are resolved against `base_dir`.
    pub fn from_config_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut kind = None;
        let mut mu = None;
        let mut a = None;
        let mut file: Option<PathBuf> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: n + 1, message };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key=value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| parse_err(format!("`{v}` is not a number")))
            };
            match k {
                "kind" => kind = Some(v.to_ascii_lowercase()),
                "mu" => mu = Some(num(v)?),
                "a" => a = Some(num(v)?),
                "file" => file = Some(PathBuf::from(v)),
                other => return Err(parse_err(format!("unknown key `{other}`"))),
            }
        }
        let kind = kind.ok_or_else(|| Error::InvalidInput("shape config lacks `kind`".into()))?;
        match kind.as_str() {
            "mulog" => {
                if file.is_some() {
                    return Err(Error::InvalidInput("`file` is only valid for kind=tabulated".into()));
                }
                let mu = mu.ok_or_else(|| Error::InvalidInput("kind=mulog needs `mu`".into()))?;
                CuspShape::mulog(mu, a.unwrap_or(1.0))
            }
            "zero" => {
                if mu.is_some() || file.is_some() {
                    return Err(Error::InvalidInput("kind=zero takes only `a`".into()));
                }
                CuspShape::zero(a.unwrap_or(0.0))
            }
            "tabulated" => {
                if mu.is_some() {
                    return Err(Error::InvalidInput("`mu` is not valid for kind=tabulated".into()));
                }
                let file = file.ok_or_else(|| Error::InvalidInput("kind=tabulated needs `file`".into()))?;
                let path = match base_dir {
                    Some(d) if file.is_relative() => d.join(file),
                    _ => file,
                };
                let rows = std::fs::read_to_string(&path)?;
                let (x, phi, dphi) = parse_table(&rows)?;
                let a = a.ok_or_else(|| Error::InvalidInput("kind=tabulated needs `a`".into()))?;
                CuspShape::tabulated(a, x, phi, dphi)
            }
            other => Err(Error::InvalidInput(format!("unknown shape kind `{other}`"))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        CuspShape::from_config_str(&text, path.parent())
    }
}

/// `int_{s0}^{s1} e^{phi0 + d s} ds`.
fn linear_exp_integral(phi0: f64, d: f64, s0: f64, s1: f64) -> f64 {
    if d == 0.0 {
        return phi0.exp() * (s1 - s0);
    }
    // e^{phi0 + d s0} (e^{d (s1 - s0)} - 1) / d
    (phi0 + d * s0).exp() * (d * (s1 - s0)).exp_m1() / d
}

/// `int_1^u s^{-m} ds`.
fn log_profile_integral(m: f64, u: f64) -> f64 {
    if m == 1.0 {
        u.ln()
    } else {
        ((1.0 - m) * u.ln()).exp_m1() / (1.0 - m)
    }
}

fn parse_table(text: &str) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (mut x, mut phi, mut dphi) = (Vec::new(), Vec::new(), Vec::new());
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: n + 1, message: e.to_string() })?;
        if vals.len() != 3 {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected `x phi dphi`, got {} fields", vals.len()),
            });
        }
        x.push(vals[0]);
        phi.push(vals[1]);
        dphi.push(vals[2]);
    }
    Ok((x, phi, dphi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tristate {
    Yes,
    No,
    Unknown,
}

impl Tristate {
    fn from_bool(b: bool) -> Self {
        if b {
            Tristate::Yes
        } else {
            Tristate::No
        }
    }

    fn and(self, other: Tristate) -> Tristate {
        match (self, other) {
            (Tristate::No, _) | (_, Tristate::No) => Tristate::No,
            (Tristate::Yes, Tristate::Yes) => Tristate::Yes,
            _ => Tristate::Unknown,
        }
    }
}

impl fmt::Display for Tristate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tristate::Yes => "yes",
            Tristate::No => "no",
            Tristate::Unknown => "unknown",
        })
    }
}

/// `|phi'(x)| <= b - alpha` for all `x > threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakWitness {
    pub alpha: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeDiagnostics {
    pub complete: Tristate,
    pub p: u32,
    pub finite_volume: Tristate,
    pub b: f64,
    pub weakly_admissible: Tristate,
    pub weak_witness: Option<WeakWitness>,
    pub strongly_admissible: Tristate,
}

/// Power-law summary of the sampled tail: `phi ~ c - mu log x`.
struct TailFit {
    mu: f64,
    /// Uncertainty in `mu` from the worst fit residual over the tail.
    spread: f64,
    recurrent: bool,
}

fn tail_fit(t: &Tabulated) -> Option<TailFit> {
    let n = t.x.len();
    let x_end = t.x[n - 1];
    let start = t.x.partition_point(|&x| x < 0.5 * x_end);
    let idx: Vec<usize> = (start..n).collect();
    if idx.len() < 4 {
        return None;
    }
    let lx: Vec<f64> = idx.iter().map(|&i| t.x[i].ln()).collect();
    let ph: Vec<f64> = idx.iter().map(|&i| t.phi[i]).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let mp = ph.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|l| (l - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxp: f64 = lx.iter().zip(&ph).map(|(l, p)| (l - mx) * (p - mp)).sum();
    let slope = sxp / sxx;
    let resid = lx
        .iter()
        .zip(&ph)
        .map(|(l, p)| (p - mp - slope * (l - mx)).abs())
        .fold(0.0, f64::max);
    let width = lx[lx.len() - 1] - lx[0];
    let spread = (2.0 * resid / width).max(1e-9);
    // slope sign changes over the whole record mark an oscillating profile
    let changes = t
        .dphi
        .windows(2)
        .filter(|w| w[0].signum() * w[1].signum() < 0.0)
        .count();
    let third = n / 3;
    let recurrent = changes >= 4 && third > 0 && {
        let early = t.phi[..third].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let late = t.phi[n - third..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        late >= early - 2.0 * resid.max(1e-12)
    };
    Some(TailFit { mu: -slope, spread, recurrent })
}

fn classify_mu(mu: f64, p: u32, b: f64, a: f64) -> ShapeDiagnostics {
    let weak = mu >= 0.0;
    ShapeDiagnostics {
        complete: Tristate::from_bool(mu <= 1.0),
        p,
        finite_volume: Tristate::from_bool(mu * p as f64 > 1.0),
        b,
        weakly_admissible: Tristate::from_bool(weak),
        weak_witness: weak.then(|| WeakWitness { alpha: b / 2.0, threshold: a.max(2.0 * mu / b) }),
        strongly_admissible: Tristate::from_bool(mu > 0.0),
    }
}

/// Completeness, volume and admissibility classification of a shape.
///
/// Tabulated shapes are judged from a power-law fit to the sampled tail;
/// anything the samples cannot settle is reported as `Unknown`.
pub fn diagnose(shape: &CuspShape, p: u32, b: f64) -> ShapeDiagnostics {
    match shape.kind() {
        ShapeKind::MuLog { mu } => classify_mu(*mu, p, b, shape.a),
        ShapeKind::Zero => classify_mu(0.0, p, b, shape.a),
        ShapeKind::Tabulated(t) => {
            let unknown = ShapeDiagnostics {
                complete: Tristate::Unknown,
                p,
                finite_volume: Tristate::Unknown,
                b,
                weakly_admissible: Tristate::Unknown,
                weak_witness: None,
                strongly_admissible: Tristate::Unknown,
            };
            let Some(fit) = tail_fit(t) else {
                return unknown;
            };
            let decide = |lo: f64, hi: f64, thr: f64, below: Tristate| {
                if hi < thr {
                    below
                } else if lo > thr {
                    if below == Tristate::Yes {
                        Tristate::No
                    } else {
                        Tristate::Yes
                    }
                } else {
                    Tristate::Unknown
                }
            };
            let (lo, hi) = (fit.mu - fit.spread, fit.mu + fit.spread);
            let complete = if fit.recurrent {
                // e^{phi} keeps returning to a fixed level, so its integral diverges
                Tristate::Yes
            } else {
                decide(lo, hi, 1.0, Tristate::Yes)
            };
            let pf = p as f64;
            let finite_volume = if fit.recurrent {
                Tristate::No
            } else {
                decide(pf * lo, pf * hi, 1.0, Tristate::No)
            };
            let bounded_above = if fit.recurrent || lo >= 0.0 {
                Tristate::Yes
            } else if hi < 0.0 {
                Tristate::No
            } else {
                Tristate::Unknown
            };
            let strong = if fit.recurrent || hi < 0.0 {
                Tristate::No
            } else if lo > 0.0 {
                Tristate::Yes
            } else {
                Tristate::Unknown
            };

            let n = t.x.len();
            let start = t.x.partition_point(|&x| x < 0.5 * t.x[n - 1]);
            let tail_max = t.dphi[start..].iter().fold(0.0f64, |m, d| m.max(d.abs()));
            let (slope_ok, mut witness) = if tail_max < b {
                let alpha = 0.5 * (b - tail_max);
                (Tristate::Yes, Some(WeakWitness { alpha, threshold: slope_threshold(t, b - alpha, shape.a) }))
            } else if fit.recurrent {
                (Tristate::No, None)
            } else {
                (Tristate::Unknown, None)
            };
            let mut weak = bounded_above.and(slope_ok);
            if strong == Tristate::Yes {
                // phi -> -inf with phi' -> 0 gives every b a witness
                weak = Tristate::Yes;
                if witness.is_none() {
                    let alpha = b / 2.0;
                    let thr = (2.0 * fit.mu.abs() / b).max(t.x[n - 1]);
                    witness = Some(WeakWitness { alpha, threshold: thr });
                }
            }
            if weak != Tristate::Yes {
                witness = None;
            }
            ShapeDiagnostics {
                complete,
                p,
                finite_volume,
                b,
                weakly_admissible: weak,
                weak_witness: witness,
                strongly_admissible: strong,
            }
        }
    }
}

fn slope_threshold(t: &Tabulated, bound: f64, a: f64) -> f64 {
    let mut thr = a;
    for (i, d) in t.dphi.iter().enumerate() {
        if d.abs() > bound {
            thr = t.x[i];
        }
    }
    thr
}
