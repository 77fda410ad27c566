//! Cusp contributions to equivariant index formulas.
//!
//! The crate turns a cusp shape `phi` and an equivariant boundary spectrum
//! into the delocalised cusp contribution, going through the half-line
//! Sturm-Liouville problems `-theta'' + q theta = nu theta` that the shape
//! induces for each boundary eigenvalue.

pub mod clifford;
pub mod error;
pub mod eta;
pub mod format;
pub mod numerics;
pub mod shape;
pub mod spectrum;
pub mod sturm_liouville;

pub use clifford::{
    build_rep, check_commutator_identity, check_conformal_dirac, check_connection_condition, CliffordRep,
    ConformalReport, ConnectionCheck, RepResiduals,
};
pub use error::{Error, ErrorKind, Result};
pub use eta::{
    boundary_kernel_term, cusp_contribution, cylinder_closed_form, cylinder_kernel, regularised_eta, vanish_check,
    CuspContext, CutoffProfile, CylinderSplit, EtaDiagnostics, EtaNumerics, EtaRequest, EtaResult, LambdaContribution,
    RegularisedOptions, RegularisedResult, RegularisedSample,
};
pub use shape::{diagnose, CuspShape, ShapeDiagnostics, ShapeKind, Sign, Tristate, WeakWitness};
pub use spectrum::{
    circle_dirac, delocalised_eta, is_g_symmetric, shift_spectrum, AbelParams, EquivariantSpectrum, EtaEstimate,
    EtaMethod, HeatParams, SignedPair, SpectrumEntry,
};
pub use sturm_liouville::{
    build_measure, discrete_eigs, integrate_theta, parseval_check, spectral_density, weyl_m, Atom, DensitySample,
    GrowthClass, InitialData, MeasureGrid, ParsevalReport, Potential, SLSolution, SpectralMeasure,
};
