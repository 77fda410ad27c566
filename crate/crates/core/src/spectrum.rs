//! Equivariant spectra of the boundary operator and spectrum-level
//! quantities: g-symmetry, the gap, shifts and the delocalised eta invariant.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::format::g15;
use crate::numerics::{gauss_kronrod, neville_to_zero, ComplexSum};

pub const SPECTRUM_HEADER: &str = "# cusp-eta spectrum v1";

/// Slack allowed in `|trace| <= mult` for traces computed in floating point.
const TRACE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumEntry {
    pub lambda: f64,
    pub mult: u32,
    pub trace: Complex64,
}

/// Eigenvalues of the boundary operator with multiplicities and the trace of
/// the group element on each eigenspace.
///
/// Entries are kept sorted by `|lambda|`, negative before positive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EquivariantSpectrum {
    entries: Vec<SpectrumEntry>,
}

fn order(a: &SpectrumEntry, b: &SpectrumEntry) -> std::cmp::Ordering {
    a.lambda
        .abs()
        .total_cmp(&b.lambda.abs())
        .then(a.lambda.total_cmp(&b.lambda))
}

impl EquivariantSpectrum {
    pub fn new(mut entries: Vec<SpectrumEntry>) -> Result<Self> {
        for e in &entries {
            if !e.lambda.is_finite() || !e.trace.re.is_finite() || !e.trace.im.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite entry at lambda = {}", e.lambda)));
            }
            if e.mult == 0 {
                return Err(Error::InvalidInput(format!("multiplicity 0 at lambda = {}", e.lambda)));
            }
            if e.trace.norm() > e.mult as f64 * (1.0 + TRACE_SLACK) {
                return Err(Error::InvalidInput(format!(
                    "|trace| = {} exceeds mult = {} at lambda = {}",
                    e.trace.norm(),
                    e.mult,
                    e.lambda
                )));
            }
        }
        entries.sort_by(order);
        if let Some(w) = entries.windows(2).find(|w| w[0].lambda == w[1].lambda) {
            return Err(Error::InvalidInput(format!("duplicate lambda = {}", w[0].lambda)));
        }
        Ok(EquivariantSpectrum { entries })
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Smallest `|lambda|`; infinite for the empty spectrum.
    pub fn gap(&self) -> f64 {
        self.entries.first().map_or(f64::INFINITY, |e| e.lambda.abs())
    }

    pub fn max_abs_lambda(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.lambda.abs())
    }

    /// Trace at `lambda`; a missing eigenvalue has trace 0.
    pub fn trace_at(&self, lambda: f64) -> Complex64 {
        self.find(lambda).map_or(Complex64::new(0.0, 0.0), |e| e.trace)
    }

    pub fn find(&self, lambda: f64) -> Option<&SpectrumEntry> {
        let probe = SpectrumEntry { lambda, mult: 1, trace: Complex64::new(0.0, 0.0) };
        self.entries
            .binary_search_by(|e| order(e, &probe))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Pairs `(|lambda|, trace(|lambda|), trace(-|lambda|), mult)` in ascending
    /// `|lambda|`; `mult` is the larger of the two multiplicities.
    pub fn pairs(&self) -> Vec<SignedPair> {
        let mut out = Vec::new();
        let mut i = 0;
        let zero = Complex64::new(0.0, 0.0);
        while i < self.entries.len() {
            let e = self.entries[i];
            let abs = e.lambda.abs();
            if abs == 0.0 {
                // the kernel is its own partner
                out.push(SignedPair { abs, plus: e.trace, minus: e.trace, mult: e.mult });
                i += 1;
            } else if i + 1 < self.entries.len() && self.entries[i + 1].lambda == abs && e.lambda == -abs {
                let f = self.entries[i + 1];
                out.push(SignedPair { abs, plus: f.trace, minus: e.trace, mult: e.mult.max(f.mult) });
                i += 2;
            } else {
                let (plus, minus) = if e.lambda >= 0.0 { (e.trace, zero) } else { (zero, e.trace) };
                out.push(SignedPair { abs, plus, minus, mult: e.mult });
                i += 1;
            }
        }
        out
    }

    /// Negates every eigenvalue, carrying the traces along.
    pub fn negated(&self) -> Self {
        let mut entries: Vec<SpectrumEntry> = self
            .entries
            .iter()
            .map(|e| SpectrumEntry { lambda: -e.lambda, ..*e })
            .collect();
        entries.sort_by(order);
        EquivariantSpectrum { entries }
    }

    /// Multiplies every trace by `c`. Fails if a trace would exceed its
    /// multiplicity.
    pub fn scale_traces(&self, c: Complex64) -> Result<Self> {
        EquivariantSpectrum::new(
            self.entries
                .iter()
                .map(|e| SpectrumEntry { trace: e.trace * c, ..*e })
                .collect(),
        )
    }

    /// Adds `delta` to every eigenvalue without checking any gap condition.
    pub fn translate(&self, delta: f64) -> Result<Self> {
        EquivariantSpectrum::new(
            self.entries
                .iter()
                .map(|e| SpectrumEntry { lambda: e.lambda + delta, ..*e })
                .collect(),
        )
    }

    /// Drops the `lambda = 0` entry, if any.
    pub fn without_kernel(&self) -> Self {
        EquivariantSpectrum {
            entries: self.entries.iter().filter(|e| e.lambda != 0.0).copied().collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == SPECTRUM_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("missing header `{SPECTRUM_HEADER}`"),
                })
            }
        }
        let mut entries = Vec::new();
        for (n, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: n + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err(format!(
                    "expected `lambda mult re_trace im_trace`, got {} fields",
                    fields.len()
                )));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("`{s}` is not a number")));
            let lambda = num(fields[0])?;
            let mult: u32 = fields[1]
                .parse()
                .map_err(|_| err(format!("`{}` is not a positive integer", fields[1])))?;
            let trace = Complex64::new(num(fields[2])?, num(fields[3])?);
            if mult == 0 {
                return Err(err("multiplicity must be positive".into()));
            }
            if trace.norm() > mult as f64 * (1.0 + TRACE_SLACK) {
                return Err(err(format!("|trace| = {} exceeds mult = {mult}", trace.norm())));
            }
            entries.push(SpectrumEntry { lambda, mult, trace });
        }
        EquivariantSpectrum::new(entries)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        EquivariantSpectrum::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::from(SPECTRUM_HEADER);
        s.push('\n');
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {} {}", g15(e.lambda), e.mult, g15(e.trace.re), g15(e.trace.im));
        }
        s
    }
}

/// Traces at `+abs` and `-abs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedPair {
    pub abs: f64,
    pub plus: Complex64,
    pub minus: Complex64,
    pub mult: u32,
}

impl SignedPair {
    /// `sum_{sign} sgn(lambda) tr(lambda)` over the pair.
    pub fn odd_part(&self) -> Complex64 {
        self.plus - self.minus
    }
}

/// Dirac operator `i d/dtheta + shift` on the circle with the rotation by
/// `alpha`, truncated to the window `|n + shift| <= n_max + 1/2`.
///
/// The window is symmetric in `lambda`, so shift `1/2` keeps every
/// `+-lambda` pair together.
pub fn circle_dirac(shift: f64, alpha: f64, n_max: u32) -> EquivariantSpectrum {
    let bound = n_max as f64 + 0.5;
    let lo = (-bound - shift).ceil() as i64;
    let hi = (bound - shift).floor() as i64;
    let entries = (lo..=hi)
        .map(|n| SpectrumEntry {
            lambda: n as f64 + shift,
            mult: 1,
            trace: Complex64::from_polar(1.0, n as f64 * alpha),
        })
        .collect();
    EquivariantSpectrum::new(entries).expect("circle spectrum entries are distinct")
}

/// `trace(lambda) = trace(-lambda)` for every eigenvalue, within `tol`.
pub fn is_g_symmetric(s: &EquivariantSpectrum, tol: f64) -> bool {
    s.pairs().iter().all(|p| (p.plus - p.minus).norm() <= tol)
}

/// Replaces every `lambda` by `lambda + eps`, the boundary operator of the
/// conjugated operator `e^{-eps w} D e^{eps w}`.
///
/// Requires `eps > 0` and no nonzero eigenvalue in `(-2 eps, 2 eps)`.
pub fn shift_spectrum(s: &EquivariantSpectrum, eps: f64) -> Result<EquivariantSpectrum> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Precondition(format!("shift eps = {eps} must be positive")));
    }
    if let Some(e) = s.entries().iter().find(|e| e.lambda != 0.0 && e.lambda.abs() < 2.0 * eps) {
        return Err(Error::Precondition(format!(
            "eigenvalue {} lies in (-2 eps, 2 eps) = ({}, {})",
            e.lambda,
            -2.0 * eps,
            2.0 * eps
        )));
    }
    s.translate(eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaMethod {
    Heat(HeatParams),
    Abel(AbelParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatParams {
    /// Requested lower end of the s-integral. Raised automatically until the
    /// Gaussian weight of the largest eigenvalue is negligible there.
    pub s_min: f64,
    pub tol: f64,
}

impl Default for HeatParams {
    fn default() -> Self {
        HeatParams { s_min: 1e-4, tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbelParams {
    /// Smallest `1 - r`; by default `37 / max|lambda|`, so that
    /// `r^{max|lambda|} ~ 1e-16`.
    pub h_min: Option<f64>,
    pub nodes: usize,
    pub ratio: f64,
}

impl Default for AbelParams {
    fn default() -> Self {
        AbelParams { h_min: None, nodes: 10, ratio: 1.15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaEstimate {
    pub value: Complex64,
    pub error: f64,
}

/// Delocalised eta invariant `sum sgn(lambda) tr(lambda)`, regularised either
/// through the heat kernel or by Abel summation.
pub fn delocalised_eta(s: &EquivariantSpectrum, method: EtaMethod) -> Result<EtaEstimate> {
    let pairs: Vec<SignedPair> = s.pairs().into_iter().filter(|p| p.odd_part() != Complex64::new(0.0, 0.0)).collect();
    if pairs.is_empty() {
        return Ok(EtaEstimate { value: Complex64::new(0.0, 0.0), error: 0.0 });
    }
    match method {
        EtaMethod::Heat(p) => heat_eta(s, &pairs, p),
        EtaMethod::Abel(p) => abel_eta(s, &pairs, p),
    }
}

/// `sum_lambda lambda tr(lambda) e^{-s lambda^2}`, paired.
fn heat_trace(pairs: &[SignedPair], s: f64) -> Complex64 {
    pairs
        .iter()
        .map(|p| p.odd_part() * (p.abs * (-s * p.abs * p.abs).exp()))
        .collect::<ComplexSum>()
        .value()
}

fn heat_eta(spec: &EquivariantSpectrum, pairs: &[SignedPair], p: HeatParams) -> Result<EtaEstimate> {
    if spec.gap() <= 0.0 {
        return Err(Error::Precondition("heat regularisation needs a spectral gap".into()));
    }
    let lmax = pairs.last().map(|q| q.abs).unwrap_or(0.0);
    let lmin = pairs[0].abs;
    let mult_max = pairs.iter().map(|q| q.mult).max().unwrap_or(1) as f64;
    // the largest eigenvalue must be invisible at s_min
    let s_floor = (1e16 * mult_max * lmax).ln() / (lmax * lmax);
    let s_min = p.s_min.max(s_floor);
    let s_max = (1e16 * mult_max * (pairs.len() as f64) * lmax.max(1.0)).ln() / (lmin * lmin);
    let s_max = s_max.max(2.0 * s_min);
    let (u0, u1) = (s_min.ln(), s_max.ln());
    let quad = gauss_kronrod(
        |u: f64| {
            let s = u.exp();
            Ok(heat_trace(pairs, s) * s.sqrt())
        },
        u0,
        u1,
        p.tol,
        p.tol,
        2000,
    )?;
    let norm = 1.0 / PI.sqrt();
    // [0, s_min): the integrand is at most |F(s_min)| s^{-1/2} there for
    // spectra that regularise; the cut piece enters the error only.
    let f0 = heat_trace(pairs, s_min).norm();
    let head = 2.0 * s_min.sqrt() * f0;
    let tail: f64 = pairs
        .iter()
        .map(|q| q.odd_part().norm() * (-s_max * q.abs * q.abs).exp() / (q.abs * s_max.sqrt()))
        .sum();
    Ok(EtaEstimate {
        value: quad.value * norm,
        error: (quad.error + head + tail) * norm + 1e-14,
    })
}

fn abel_partial(pairs: &[SignedPair], r: f64) -> Complex64 {
    let lr = r.ln();
    pairs
        .iter()
        .map(|p| p.odd_part() * (p.abs * lr).exp())
        .collect::<ComplexSum>()
        .value()
}

fn abel_eta(spec: &EquivariantSpectrum, pairs: &[SignedPair], p: AbelParams) -> Result<EtaEstimate> {
    if p.nodes < 2 || p.ratio <= 1.0 {
        return Err(Error::InvalidInput("Abel extrapolation needs >= 2 nodes and ratio > 1".into()));
    }
    let lmax = spec.max_abs_lambda();
    let h_min = p.h_min.unwrap_or(37.0 / lmax);
    if h_min >= 0.5 {
        return Err(Error::nonconvergence(
            "Abel summation",
            format!("spectrum too short: smallest usable 1 - r is {h_min} (max |lambda| = {lmax})"),
        ));
    }
    // short spectra squeeze the node ratio so that r stays away from 0
    let h_top = (h_min * p.ratio.powi(p.nodes as i32 - 1)).min(0.9);
    let ratio = (h_top / h_min).powf(1.0 / (p.nodes as f64 - 1.0));
    let hs: Vec<f64> = (0..p.nodes).map(|k| h_min * ratio.powi(k as i32)).collect();
    let vals: Vec<Complex64> = hs.iter().map(|&h| abel_partial(pairs, 1.0 - h)).collect();
    let extrapolate = |hs: &[f64], vals: &[Complex64]| {
        let re = neville_to_zero(hs, &vals.iter().map(|z| z.re).collect::<Vec<_>>());
        let im = neville_to_zero(hs, &vals.iter().map(|z| z.im).collect::<Vec<_>>());
        (Complex64::new(re.value, im.value), re.error.hypot(im.error))
    };
    let (value, tableau_err) = extrapolate(&hs, &vals);
    // dropping the node closest to r = 1 gives an independent second estimate
    let (shifted, _) = extrapolate(&hs[1..], &vals[1..]);
    let spread = 2.0 * tableau_err.max((value - shifted).norm());
    // truncation: the largest omitted term is below |odd| r^{lmax}
    let trunc: f64 = pairs.last().map_or(0.0, |q| q.odd_part().norm()) * (1.0 - h_min).powf(lmax);
    Ok(EtaEstimate {
        value,
        error: spread + trunc + 1e-14,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Brute-force Abel sum: partial sums with the factor r^{|lambda|} at r
    /// close to one, then a two-point Richardson step in 1 - r.
    fn abel_oracle(alpha: f64) -> Complex64 {
        let sum = |r: f64| {
            let mut acc = c(0.0, 0.0);
            for n in -200_000i64..200_000 {
                let lam = n as f64 + 0.5;
                acc += lam.signum() * Complex64::from_polar(1.0, n as f64 * alpha) * r.powf(lam.abs());
            }
            acc
        };
        let (h1, h2) = (1e-3, 5e-4);
        let (s1, s2) = (sum(1.0 - h1), sum(1.0 - h2));
        (s2 * h1 - s1 * h2) / (h1 - h2)
    }

    #[test]
    fn circle_windows() {
        let s = circle_dirac(0.5, 0.0, 2);
        let l: Vec<f64> = s.entries().iter().map(|e| e.lambda).collect();
        assert_eq!(l, vec![-0.5, 0.5, -1.5, 1.5, -2.5, 2.5]);
        assert!(s.entries().iter().all(|e| e.trace == c(1.0, 0.0)));

        let s = circle_dirac(0.0, PI, 1);
        let l: Vec<(f64, f64)> = s.entries().iter().map(|e| (e.lambda, e.trace.re)).collect();
        assert_eq!(l.len(), 3);
        for (lam, tr) in l {
            let expect = if lam == 0.0 { 1.0 } else { -1.0 };
            assert!((tr - expect).abs() < 1e-15);
        }

        let s = circle_dirac(0.5, FRAC_PI_2, 3);
        let t = s.trace_at(1.5);
        assert!((t - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn symmetry_examples() {
        assert!(is_g_symmetric(&circle_dirac(0.5, 0.0, 50), 1e-12));
        assert!(!is_g_symmetric(&circle_dirac(0.5, PI / 3.0, 50), 1e-12));
        assert!(is_g_symmetric(&circle_dirac(0.0, PI, 50), 1e-12));
    }

    #[test]
    fn symmetry_matches_brute_force_pairing() {
        for &alpha in &[0.0, PI / 3.0, PI, 2.0] {
            let s = circle_dirac(0.5, alpha, 20);
            let brute = s.entries().iter().all(|e| {
                let partner = s.entries().iter().find(|f| f.lambda == -e.lambda);
                let t = partner.map_or(c(0.0, 0.0), |f| f.trace);
                (t - e.trace).norm() < 1e-12
            });
            assert_eq!(brute, is_g_symmetric(&s, 1e-12), "alpha = {alpha}");
        }
    }

    #[test]
    fn missing_partner_counts_as_zero_trace() {
        let s = EquivariantSpectrum::new(vec![SpectrumEntry { lambda: 1.0, mult: 1, trace: c(1.0, 0.0) }]).unwrap();
        assert!(!is_g_symmetric(&s, 1e-12));
        let s = EquivariantSpectrum::new(vec![SpectrumEntry { lambda: 1.0, mult: 2, trace: c(0.0, 0.0) }]).unwrap();
        assert!(is_g_symmetric(&s, 1e-12));
    }

    #[test]
    fn shift_examples() {
        let k = EquivariantSpectrum::new(vec![SpectrumEntry { lambda: 0.0, mult: 1, trace: c(1.0, 0.0) }]).unwrap();
        let s = shift_spectrum(&k, 0.5).unwrap();
        assert_eq!(s.entries()[0].lambda, 0.5);

        let pm = EquivariantSpectrum::new(vec![
            SpectrumEntry { lambda: 1.0, mult: 1, trace: c(0.5, 0.0) },
            SpectrumEntry { lambda: -1.0, mult: 2, trace: c(0.0, 1.0) },
        ])
        .unwrap();
        let s = shift_spectrum(&pm, 0.1).unwrap();
        assert_eq!(s.find(1.1).unwrap().trace, c(0.5, 0.0));
        assert_eq!(s.find(-0.9).unwrap().mult, 2);
        assert!(s.gap() >= 0.1);

        let close = EquivariantSpectrum::new(vec![
            SpectrumEntry { lambda: 0.05, mult: 1, trace: c(1.0, 0.0) },
            SpectrumEntry { lambda: -0.05, mult: 1, trace: c(1.0, 0.0) },
        ])
        .unwrap();
        let err = shift_spectrum(&close, 0.1).unwrap_err();
        assert!(matches!(err, Error::Precondition(ref m) if m.contains("0.05")));
    }

    #[test]
    fn shift_by_dyadic_is_exactly_invertible() {
        let s = circle_dirac(0.5, 1.0, 30);
        let back = shift_spectrum(&s, 0.25).unwrap().translate(-0.25).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn validation_errors() {
        assert!(EquivariantSpectrum::new(vec![SpectrumEntry { lambda: 1.0, mult: 1, trace: c(2.0, 0.0) }]).is_err());
        let dup = vec![SpectrumEntry { lambda: 1.0, mult: 1, trace: c(1.0, 0.0) }; 2];
        assert!(EquivariantSpectrum::new(dup).is_err());
    }

    #[test]
    fn file_round_trip() {
        let s = circle_dirac(0.5, 0.7, 4);
        let back = EquivariantSpectrum::parse(&s.to_file_string()).unwrap();
        for (a, b) in s.entries().iter().zip(back.entries()) {
            assert_eq!(a.lambda, b.lambda);
            assert!((a.trace - b.trace).norm() < 1e-14);
        }
    }

    #[test]
    fn file_errors() {
        let one = EquivariantSpectrum::parse("# cusp-eta spectrum v1\n0.5 1 1 0\n").unwrap();
        assert_eq!(one.entries()[0], SpectrumEntry { lambda: 0.5, mult: 1, trace: c(1.0, 0.0) });
        assert!(matches!(EquivariantSpectrum::parse("0.5 1 1 0\n"), Err(Error::Parse { line: 1, .. })));
        let bad = EquivariantSpectrum::parse("# cusp-eta spectrum v1\n# note\n1 1 2 0\n").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 3, .. }));
        assert!(EquivariantSpectrum::parse("# cusp-eta spectrum v1\n1 1 1 0\n1 1 0 0\n").is_err());
    }

    #[test]
    fn abel_oracle_closed_form() {
        // sum sgn(n + 1/2) e^{i n alpha} = 2 / (1 - e^{i alpha})
        for &alpha in &[FRAC_PI_2, PI, PI / 5.0] {
            let closed = c(2.0, 0.0) / (c(1.0, 0.0) - Complex64::from_polar(1.0, alpha));
            assert!((abel_oracle(alpha) - closed).norm() < 1e-5, "alpha = {alpha}");
        }
    }

    #[test]
    fn eta_circle_values() {
        let s = circle_dirac(0.5, FRAC_PI_2, 400);
        for m in [EtaMethod::Heat(HeatParams::default()), EtaMethod::Abel(AbelParams::default())] {
            let e = delocalised_eta(&s, m).unwrap();
            assert!((e.value - c(1.0, 1.0)).norm() < 1e-6, "{m:?}: {:?}", e);
        }
        let s = circle_dirac(0.5, PI, 400);
        for m in [EtaMethod::Heat(HeatParams::default()), EtaMethod::Abel(AbelParams::default())] {
            let e = delocalised_eta(&s, m).unwrap();
            assert!((e.value - c(1.0, 0.0)).norm() < 1e-6, "{m:?}: {:?}", e);
        }
    }

    #[test]
    fn heat_and_abel_agree_within_estimates() {
        for &alpha in &[PI / 5.0, FRAC_PI_2, PI] {
            let s = circle_dirac(0.5, alpha, 2000);
            let h = delocalised_eta(&s, EtaMethod::Heat(HeatParams::default())).unwrap();
            let a = delocalised_eta(&s, EtaMethod::Abel(AbelParams::default())).unwrap();
            assert!(
                (h.value - a.value).norm() <= h.error.max(a.error),
                "alpha = {alpha}: heat {h:?} abel {a:?}"
            );
            let oracle = abel_oracle(alpha);
            assert!((h.value - oracle).norm() < 1e-4);
        }
    }

    #[test]
    fn symmetric_spectra_have_zero_eta() {
        for s in [circle_dirac(0.5, 0.0, 100), circle_dirac(0.0, PI, 100).without_kernel()] {
            for m in [EtaMethod::Heat(HeatParams::default()), EtaMethod::Abel(AbelParams::default())] {
                assert!(delocalised_eta(&s, m).unwrap().value.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn conjugating_alpha_conjugates_eta() {
        let a = delocalised_eta(&circle_dirac(0.5, 0.9, 500), EtaMethod::Abel(AbelParams::default())).unwrap();
        let b = delocalised_eta(&circle_dirac(0.5, -0.9, 500), EtaMethod::Abel(AbelParams::default())).unwrap();
        assert!((a.value - b.value.conj()).norm() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn shift_preserves_mult_and_trace(alpha in -3.0f64..3.0, eps in 0.01f64..0.25) {
                let s = circle_dirac(0.5, alpha, 10);
                let t = shift_spectrum(&s, eps).unwrap();
                prop_assert!(t.gap() >= eps * (1.0 - 1e-15));
            prop_assert_eq!(t.len(), s.len());
                for e in s.entries() {
                    let f = t.find(e.lambda + eps).unwrap();
                    prop_assert_eq!(f.mult, e.mult);
                    prop_assert_eq!(f.trace, e.trace);
                }
                let back = t.translate(-eps).unwrap();
                // rounding may reorder entries of equal |lambda|, so compare by value
                let mut x: Vec<SpectrumEntry> = s.entries().to_vec();
                let mut y: Vec<SpectrumEntry> = back.entries().to_vec();
                x.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
                y.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
                for (a, b) in x.iter().zip(&y) {
                    prop_assert!((a.lambda - b.lambda).abs() <= 4.0 * f64::EPSILON * a.lambda.abs().max(1.0), "{} vs {}", a.lambda, b.lambda);
                    prop_assert_eq!(a.trace, b.trace);
                }
            }

            #[test]
            fn conjugation_symmetry(alpha in 0.3f64..3.0) {
                let p = EtaMethod::Heat(HeatParams::default());
                let a = delocalised_eta(&circle_dirac(0.5, alpha, 300), p).unwrap();
                let b = delocalised_eta(&circle_dirac(0.5, -alpha, 300), p).unwrap();
                prop_assert!((a.value - b.value.conj()).norm() < 1e-10);
            }
        }
    }
}
