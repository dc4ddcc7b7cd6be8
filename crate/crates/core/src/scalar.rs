//! Scalar abstraction for volume/capacity arithmetic.
//!
//! All bookkeeping (per-slot loads, prefix sums, residual demands) is generic
//! over a floating-point scalar so the whole stack can be instantiated with
//! `f32` or `f64`. The shipped simulations use `f64`; tolerances live here as
//! associated constants because a meaningful absolute epsilon depends on the
//! scalar's granularity around 1.0.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Floating-point scalar used for volumes, capacities and rates.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Display + Debug + LowerExp + Default + Send + Sync + 'static
{
    /// Absolute tolerance for capacity checks and prefix-sum/shares
    /// consistency. Volumes below this are treated as dust and dropped
    /// during moves.
    const GRID_EPS: Self;
    /// Feasibility tolerance for the embedded LP solver.
    const LP_EPS: Self;

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f64 {
    const GRID_EPS: Self = 1e-9;
    const LP_EPS: Self = 1e-7;
}

impl Scalar for f32 {
    // f32 has ~1.2e-7 granularity at 1.0; the f64 tolerances would be
    // unsatisfiable, so the f32 instantiation gets proportionally looser ones.
    const GRID_EPS: Self = 1e-5;
    const LP_EPS: Self = 1e-4;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_ordering() {
        assert!(f64::GRID_EPS < f64::LP_EPS);
        assert!(f32::GRID_EPS < f32::LP_EPS);
    }

    #[test]
    fn roundtrip_f64() {
        let v: f64 = 0.125;
        assert_eq!(f64::from_f64_lossy(v.to_f64_lossy()), v);
    }
}
