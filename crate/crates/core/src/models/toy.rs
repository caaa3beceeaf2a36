//! Small systems with known answers, used to validate the solver.

use crate::error::Result;
use crate::scalar::Scalar;

use super::Dynamics;

/// `s' = u`.
#[derive(Debug, Clone, Copy)]
pub struct SingleIntegrator;

impl<T: Scalar> Dynamics<T> for SingleIntegrator {
    fn eval(&self, _s: &[T], u: &[T], ds: &mut [T]) -> Result<()> {
        ds[0] = u[0];
        Ok(())
    }
}

/// Position/velocity pair driven by a bounded acceleration: `x'' = u`.
#[derive(Debug, Clone, Copy)]
pub struct DoubleIntegrator;

impl<T: Scalar> Dynamics<T> for DoubleIntegrator {
    fn eval(&self, s: &[T], u: &[T], ds: &mut [T]) -> Result<()> {
        ds[0] = s[1];
        ds[1] = u[0];
        Ok(())
    }
}

/// Planar car at constant speed steered by its turn rate. State `(x, y, heading)`.
#[derive(Debug, Clone, Copy)]
pub struct DubinsCar<T> {
    pub speed: T,
}

impl<T: Scalar> Dynamics<T> for DubinsCar<T> {
    fn eval(&self, s: &[T], u: &[T], ds: &mut [T]) -> Result<()> {
        let (sin, cos) = s[2].sin_cos();
        ds[0] = self.speed * cos;
        ds[1] = self.speed * sin;
        ds[2] = u[0];
        Ok(())
    }
}
