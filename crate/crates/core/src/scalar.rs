//! Floating-point abstraction shared by the numerical kernels.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Scalar type accepted by the linear algebra, LP and neural kernels.
///
/// The tolerance constants are tuned per precision; everything else comes
/// from `num_traits::Float`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + FromStr + Debug + Display + Default + Send + Sync + 'static
{
    /// Magnitude below which a pivot or coefficient is treated as zero.
    const PIVOT_TOL: f64;
    /// Primal feasibility tolerance used in ratio tests and bound checks.
    const FEAS_TOL: f64;
    /// Phase-one objective above which a linear program is declared infeasible.
    const INFEAS_TOL: f64;

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn pivot_tol() -> Self {
        Self::lit(Self::PIVOT_TOL)
    }

    #[inline]
    fn feas_tol() -> Self {
        Self::lit(Self::FEAS_TOL)
    }

    #[inline]
    fn infeas_tol() -> Self {
        Self::lit(Self::INFEAS_TOL)
    }
}

impl Scalar for f32 {
    const PIVOT_TOL: f64 = 1e-5;
    const FEAS_TOL: f64 = 1e-4;
    const INFEAS_TOL: f64 = 1e-3;
}

impl Scalar for f64 {
    const PIVOT_TOL: f64 = 1e-9;
    const FEAS_TOL: f64 = 1e-10;
    const INFEAS_TOL: f64 = 1e-7;
}
