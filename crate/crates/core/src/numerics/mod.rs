//! Small numerical kernels shared by the spectral modules: quadrature,
//! extrapolation, root bracketing and compensated summation.

mod extrapolate;
mod quadrature;
mod roots;
mod sum;

pub use extrapolate::{neville_to_zero, least_squares, ExtrapolationEstimate, PolyFit};
pub use quadrature::{gauss_kronrod, GaussLegendre, QuadResult, QuadValue};
pub use roots::brent;
pub use sum::{ComplexSum, NeumaierSum};
