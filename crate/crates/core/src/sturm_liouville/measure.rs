use num_complex::Complex64;
use rayon::prelude::*;

use super::eigen::{discrete_eigs, Atom, EigenOptions};
use super::weyl::{spectral_density, DensityOptions};
use super::{integrate_theta, GrowthClass, InitialData, Potential, StepOptions};
use crate::error::{Error, Result};
use crate::numerics::{GaussLegendre, NeumaierSum};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySample {
    pub nu: f64,
    pub density: f64,
    /// Quadrature weight in `nu`; `density * quad_weight` is the mass
    /// this sample stands for.
    pub quad_weight: f64,
}

/// Atoms plus continuum density on quadrature nodes, valid on
/// `[nu_min, nu_max]`.
#[derive(Debug, Clone, Default)]
pub struct SpectralMeasure {
    pub atoms: Vec<Atom>,
    pub continuum: Vec<DensitySample>,
    pub nu_min: f64,
    pub nu_max: f64,
}

impl SpectralMeasure {
    pub fn new(atoms: Vec<Atom>, continuum: Vec<DensitySample>, nu_min: f64, nu_max: f64) -> Result<Self> {
        if atoms.iter().any(|a| !(a.weight > 0.0)) {
            return Err(Error::InvalidInput("atom weights must be positive".into()));
        }
        if continuum.iter().any(|c| !(c.density >= 0.0) || !(c.quad_weight >= 0.0)) {
            return Err(Error::InvalidInput("densities must be nonnegative".into()));
        }
        if atoms.windows(2).any(|w| w[1].nu <= w[0].nu) || continuum.windows(2).any(|w| w[1].nu <= w[0].nu) {
            return Err(Error::InvalidInput("measure nodes must be strictly increasing".into()));
        }
        Ok(SpectralMeasure { atoms, continuum, nu_min, nu_max })
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.continuum.is_empty()
    }

    /// Every node as `(nu, mass)`: atoms first, then continuum samples.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms
            .iter()
            .map(|a| (a.nu, a.weight))
            .chain(self.continuum.iter().map(|c| (c.nu, c.density * c.quad_weight)))
    }

    /// `rho(nu) - rho(nu_min)` as seen by the quadrature.
    pub fn cumulative(&self, nu: f64) -> f64 {
        let mut s = NeumaierSum::default();
        for (x, m) in self.nodes() {
            if x <= nu {
                s.add(m);
            }
        }
        s.value()
    }

    /// Lowest point carrying mass.
    pub fn support_floor(&self) -> Option<f64> {
        let a = self.atoms.first().map(|a| a.nu);
        let c = self.continuum.first().map(|c| c.nu);
        match (a, c) {
            (Some(a), Some(c)) => Some(a.min(c)),
            (a, c) => a.or(c),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeasureGrid {
    /// Gauss-Legendre points per panel.
    pub order: usize,
    /// Panel width in `t = sqrt(nu - edge)`.
    pub panel: f64,
    /// Gap left below the continuum edge when searching for atoms.
    pub atom_margin: f64,
    /// When set, the first panel is split geometrically (ratio 4) down to
    /// this width in `t`, for Laplace transforms at large `s`.
    pub edge_panel: Option<f64>,
    pub density: DensityOptions,
    pub eigen: EigenOptions,
}

impl Default for MeasureGrid {
    fn default() -> Self {
        MeasureGrid {
            order: 16,
            panel: 1.0,
            atom_margin: 1e-2,
            edge_panel: None,
            density: DensityOptions::default(),
            eigen: EigenOptions::default(),
        }
    }
}

/// Spectral measure of `q` up to `nu_max`: eigenvalues below the continuum
/// (all of them for a confining potential) and density samples above it.
///
/// Continuum nodes sit at Gauss points in `t = sqrt(nu - edge)`, which
/// absorbs the square-root onset of the density at the edge.
pub fn build_measure(q: &Potential, nu_max: f64, grid: &MeasureGrid) -> Result<SpectralMeasure> {
    if !(grid.panel > 0.0) || grid.order == 0 {
        return Err(Error::InvalidInput("measure grid needs a positive panel width and order".into()));
    }
    let floor = q.nu_floor().unwrap_or(f64::NEG_INFINITY);
    let nu_min = floor;
    if nu_max <= floor {
        return SpectralMeasure::new(Vec::new(), Vec::new(), nu_min, nu_max);
    }
    let (atoms, continuum) = match q.growth() {
        GrowthClass::Confining => (discrete_eigs(q, nu_max, &grid.eigen)?, Vec::new()),
        GrowthClass::Bounded { continuum_edge: edge } => {
            let top = nu_max.min(edge - grid.atom_margin * edge.abs().max(1.0));
            let atoms = if floor < top { discrete_eigs(q, top, &grid.eigen)? } else { Vec::new() };
            let continuum = if nu_max > edge { continuum_samples(q, edge, nu_max, grid)? } else { Vec::new() };
            (atoms, continuum)
        }
    };
    SpectralMeasure::new(atoms, continuum, nu_min, nu_max)
}

fn continuum_samples(q: &Potential, edge: f64, nu_max: f64, grid: &MeasureGrid) -> Result<Vec<DensitySample>> {
    let t_max = (nu_max - edge).sqrt();
    let panels = (t_max / grid.panel).ceil().max(1.0) as usize;
    let width = t_max / panels as f64;
    let mut edges: Vec<f64> = (0..=panels).map(|p| p as f64 * width).collect();
    if let Some(fine) = grid.edge_panel.filter(|&f| f > 0.0 && f < width) {
        let mut inner = vec![0.0];
        let mut e = fine;
        while e < width {
            inner.push(e);
            e *= 4.0;
        }
        edges.splice(0..1, inner);
    }
    let gl = GaussLegendre::new(grid.order);
    let mut nodes = Vec::with_capacity(edges.len() * grid.order);
    for w in edges.windows(2) {
        for (t, wt) in gl.mapped(w[0], w[1]) {
            nodes.push((edge + t * t, 2.0 * t * wt));
        }
    }
    nodes
        .par_iter()
        .map(|&(nu, quad_weight)| {
            spectral_density(q, nu, &grid.density).map(|density| DensitySample { nu, density, quad_weight })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsevalReport {
    /// `| ||F f||^2_rho - ||f||^2 | / ||f||^2`.
    pub norm_residual: f64,
    /// `sup |f - F^{-1} F f| / sup |f|` over the quadrature nodes.
    pub inversion_residual: f64,
    /// Share of `||F f||^2` carried by the top tenth of the measure range;
    /// large values mean the residuals are truncation dominated.
    pub top_band_share: f64,
}

/// Checks unitarity and inversion of the generalized Fourier transform
/// `F f(nu) = int f theta_nu dy` on a test function supported in
/// `support`.
pub fn parseval_check<F>(q: &Potential, f: F, support: (f64, f64), measure: &SpectralMeasure) -> Result<ParsevalReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    let (a, b) = support;
    if !(a >= 0.0 && b > a) {
        return Err(Error::InvalidInput(format!("support ({a}, {b}) must be a nonempty interval in [0, inf)")));
    }
    let q_min = (0..=200).map(|k| q.eval(a + (b - a) * k as f64 / 200.0)).fold(f64::INFINITY, f64::min);
    let k_max = (measure.nu_max - q_min).max(16.0).sqrt();
    let panels = ((b - a) * k_max / 1.5).ceil() as usize;
    let gl = GaussLegendre::new(16);
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for p in 0..panels {
        let w = (b - a) / panels as f64;
        for (x, wt) in gl.mapped(a + p as f64 * w, a + (p + 1) as f64 * w) {
            ys.push(x);
            ws.push(wt);
        }
    }
    let fs: Vec<f64> = ys.iter().map(|&y| f(y)).collect();
    let f_norm2: NeumaierSum = fs.iter().zip(&ws).map(|(v, w)| v * v * w).collect();
    let f_norm2 = f_norm2.value();
    let f_sup = fs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if f_sup == 0.0 {
        return Ok(ParsevalReport { norm_residual: 0.0, inversion_residual: 0.0, top_band_share: 0.0 });
    }

    let nodes: Vec<(f64, f64)> = measure.nodes().collect();
    let step = StepOptions::default();
    // theta_nu at the y nodes, with the transform value
    let rows = nodes
        .par_iter()
        .map(|&(nu, _)| -> Result<(f64, Vec<f64>)> {
            let sol = integrate_theta(q, Complex64::new(nu, 0.0), InitialData::Theta1, b, &ys, &step)?;
            let mut vals = Vec::with_capacity(ys.len());
            let mut it = sol.samples.iter();
            for &y in &ys {
                let s = it.find(|s| s.y == y).ok_or_else(|| Error::nonconvergence("parseval", "missing node"))?;
                vals.push(s.theta().ok_or(Error::Overflow { y })?.re);
            }
            let tr: NeumaierSum = vals.iter().zip(&fs).zip(&ws).map(|((t, f), w)| t * f * w).collect();
            Ok((tr.value(), vals))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut norm = NeumaierSum::default();
    let mut top = NeumaierSum::default();
    let band = measure.nu_max - 0.1 * (measure.nu_max - measure.support_floor().unwrap_or(measure.nu_max));
    for ((nu, mass), (tr, _)) in nodes.iter().zip(&rows) {
        norm.add(mass * tr * tr);
        if *nu >= band {
            top.add(mass * tr * tr);
        }
    }
    let mut inv = 0.0f64;
    for (j, fy) in fs.iter().enumerate() {
        let back: NeumaierSum = nodes.iter().zip(&rows).map(|((_, m), (tr, vals))| m * tr * vals[j]).collect();
        inv = inv.max((fy - back.value()).abs());
    }
    let n = norm.value();
    Ok(ParsevalReport {
        norm_residual: (n - f_norm2).abs() / f_norm2,
        inversion_residual: inv / f_sup,
        top_band_share: if n > 0.0 { top.value() / n } else { 0.0 },
    })
}
