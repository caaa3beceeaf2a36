//! Dynamical systems and the frozen-in-target discrete step.
//!
//! A [`SystemModel`] wraps a continuous vector field `s' = f(s, u)` with its
//! control bounds. The solver never integrates `f` directly: it uses
//! [`SystemModel::step_into`], the forward Euler step of the modified
//! dynamics that stop moving once the state is inside the target.

mod ground;
mod longitudinal;
mod params;
mod toy;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::targets::TargetSet;

pub use ground::{GroundMotion, GroundMotionParams, NOSE_WHEEL_LIMIT};
pub use longitudinal::{LongitudinalFlight, LongitudinalParams, ELEVATOR_LIMIT};
pub use params::ParamTable;
pub use toy::{DoubleIntegrator, DubinsCar, SingleIntegrator};

/// Right-hand side of `s' = f(s, u)`.
///
/// Implementations write `dim` derivatives into `ds` and must be
/// deterministic.
pub trait Dynamics<T>: Send + Sync + fmt::Debug {
    fn eval(&self, s: &[T], u: &[T], ds: &mut [T]) -> Result<()>;
}

/// Adapter turning a closure into [`Dynamics`].
pub struct FnDynamics<F>(pub F);

impl<F> fmt::Debug for FnDynamics<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnDynamics")
    }
}

impl<T, F> Dynamics<T> for FnDynamics<F>
where
    F: Fn(&[T], &[T], &mut [T]) + Send + Sync,
{
    fn eval(&self, s: &[T], u: &[T], ds: &mut [T]) -> Result<()> {
        (self.0)(s, u, ds);
        Ok(())
    }
}

#[derive(Clone)]
pub struct SystemModel<T: Scalar> {
    name: String,
    dim: usize,
    control_bounds: Vec<(T, T)>,
    dynamics: Arc<dyn Dynamics<T>>,
}

impl<T: Scalar> fmt::Debug for SystemModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("control_bounds", &self.control_bounds)
            .field("dynamics", &self.dynamics)
            .finish()
    }
}

impl<T: Scalar> SystemModel<T> {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        control_bounds: Vec<(T, T)>,
        dynamics: impl Dynamics<T> + 'static,
    ) -> Result<Self> {
        let name = name.into();
        if dim == 0 || control_bounds.is_empty() {
            return Err(Error::usage(format!(
                "system {name}: state and control dimensions must be positive"
            )));
        }
        for (i, &(lo, hi)) in control_bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::usage(format!(
                    "system {name}: control bound {i} must satisfy lo <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            name,
            dim,
            control_bounds,
            dynamics: Arc::new(dynamics),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_bounds.len()
    }

    pub fn control_bounds(&self) -> &[(T, T)] {
        &self.control_bounds
    }

    /// `f(s, u)` with argument validation.
    pub fn eval_vector_field(&self, s: &[T], u: &[T]) -> Result<Vec<T>> {
        self.check_args(s, u)?;
        if let Some(i) = self
            .control_bounds
            .iter()
            .zip(u)
            .position(|(&(lo, hi), &x)| !(lo <= x && x <= hi))
        {
            return Err(Error::usage(format!(
                "control component {i} = {} outside [{}, {}]",
                u[i], self.control_bounds[i].0, self.control_bounds[i].1
            )));
        }
        let mut ds = vec![T::zero(); self.dim];
        self.eval_into(s, u, &mut ds)?;
        Ok(ds)
    }

    fn check_args(&self, s: &[T], u: &[T]) -> Result<()> {
        if s.len() != self.dim || u.len() != self.control_dim() {
            return Err(Error::usage(format!(
                "{} expects a {}-state and a {}-control, got {} and {}",
                self.name,
                self.dim,
                self.control_dim(),
                s.len(),
                u.len()
            )));
        }
        Ok(())
    }

    /// `f(s, u)` into `ds`, rejecting non-finite output. No dimension checks.
    pub fn eval_into(&self, s: &[T], u: &[T], ds: &mut [T]) -> Result<()> {
        self.dynamics.eval(s, u, ds)?;
        if ds.iter().any(|x| !x.is_finite()) {
            return Err(Error::Model {
                state: s.iter().map(|x| x.as_f64()).collect(),
                reason: format!("{} returned a non-finite derivative", self.name),
            });
        }
        Ok(())
    }

    /// One Euler step of the modified dynamics into `out`.
    ///
    /// Membership is tested on the pre-step state: inside the target the
    /// state is copied unchanged. Returns whether `s` was in the target.
    pub fn step_into(
        &self,
        target: &TargetSet<T>,
        s: &[T],
        u: &[T],
        dt: T,
        out: &mut [T],
    ) -> Result<bool> {
        if target.contains_unchecked(s) {
            out.copy_from_slice(s);
            return Ok(true);
        }
        self.eval_into(s, u, out)?;
        for (o, &x) in out.iter_mut().zip(s) {
            *o = x + *o * dt;
        }
        Ok(false)
    }
}

pub fn eval_vector_field<T: Scalar>(system: &SystemModel<T>, s: &[T], u: &[T]) -> Result<Vec<T>> {
    system.eval_vector_field(s, u)
}

/// Euler step of the dynamics frozen inside `target`.
pub fn modified_step<T: Scalar>(
    system: &SystemModel<T>,
    target: &TargetSet<T>,
    s: &[T],
    u: &[T],
    dt: T,
) -> Result<Vec<T>> {
    system.check_args(s, u)?;
    target.contains(s)?;
    if !(dt > T::zero()) {
        return Err(Error::usage(format!("time step must be positive, got {dt}")));
    }
    let mut out = vec![T::zero(); s.len()];
    system.step_into(target, s, u, dt, &mut out)?;
    Ok(out)
}

/// Indicator of the target's complement: 1 outside, 0 inside.
pub fn running_cost<T: Scalar>(target: &TargetSet<T>, s: &[T]) -> T {
    if target.contains_unchecked(s) {
        T::zero()
    } else {
        T::one()
    }
}

/// Cartesian product of uniform per-dimension control grids.
///
/// A count of 1 selects the interval midpoint; counts of 2 or more include
/// both endpoints. Ordering is row-major with the last dimension fastest.
pub fn discretize_controls<T: Scalar>(bounds: &[(T, T)], counts: &[usize]) -> Result<Vec<Vec<T>>> {
    if bounds.is_empty() {
        return Err(Error::usage("control bounds are empty"));
    }
    if bounds.len() != counts.len() {
        return Err(Error::usage(format!(
            "{} control counts for {} control dimensions",
            counts.len(),
            bounds.len()
        )));
    }
    let axes: Vec<Vec<T>> = bounds
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(i, (&(lo, hi), &n))| match n {
            0 => Err(Error::usage(format!("control count {i} must be at least 1"))),
            1 => Ok(vec![(lo + hi) / T::of(2.0)]),
            _ => {
                let step = (hi - lo) / T::of((n - 1) as f64);
                Ok((0..n)
                    .map(|k| if k + 1 == n { hi } else { lo + T::of(k as f64) * step })
                    .collect())
            }
        })
        .collect::<Result<_>>()?;

    let mut out = vec![Vec::with_capacity(bounds.len())];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut v = prefix.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    Ok(out)
}

pub const BUILTIN_NAMES: [&str; 5] = [
    "single_integrator",
    "double_integrator",
    "dubins_car",
    "longitudinal_flight",
    "ground_motion",
];

const DUBINS_KEYS: [&str; 2] = ["speed", "max_turn_rate"];
const DUBINS_UNIT: [(&str, f64); 2] = [("speed", 1.0), ("max_turn_rate", 1.0)];

/// Builds one of the named systems from an optional preset plus overrides.
///
/// Presets: `table1` for `longitudinal_flight`, `table2` for
/// `ground_motion`, `unit` for `dubins_car`. The integrators take no
/// parameters.
pub fn builtin_system<T: Scalar>(
    name: &str,
    preset: Option<&str>,
    params: &ParamTable,
) -> Result<SystemModel<T>> {
    let preset_table = |expected: &str, table: &'static [(&'static str, f64)]| match preset {
        None => Ok(&[][..]),
        Some(p) if p == expected => Ok(table),
        Some(p) => Err(Error::config(format!(
            "system.preset: {name} has no preset {p:?} (available: {expected})"
        ))),
    };
    let no_params = || {
        if let Some(k) = params.keys().next() {
            return Err(Error::config(format!(
                "system.params.{k}: {name} takes no parameters"
            )));
        }
        if let Some(p) = preset {
            return Err(Error::config(format!(
                "system.preset: {name} has no preset {p:?}"
            )));
        }
        Ok(())
    };
    let unit = (T::of(-1.0), T::one());
    match name {
        "single_integrator" => {
            no_params()?;
            SystemModel::new(name, 1, vec![unit], SingleIntegrator)
        }
        "double_integrator" => {
            no_params()?;
            SystemModel::new(name, 2, vec![unit], DoubleIntegrator)
        }
        "dubins_car" => {
            let r = params::Resolver::new(name, &DUBINS_KEYS, preset_table("unit", &DUBINS_UNIT)?, params)?;
            let speed = T::of(r.get("speed")?);
            let w = T::of(r.get("max_turn_rate")?);
            if w < T::zero() {
                return Err(Error::config("system.params.max_turn_rate: must be nonnegative"));
            }
            SystemModel::new(name, 3, vec![(-w, w)], DubinsCar { speed })
        }
        "longitudinal_flight" => {
            let params =
                LongitudinalParams::resolve(preset_table("table1", &longitudinal::TABLE1)?, params)?;
            let lim = T::of(ELEVATOR_LIMIT);
            SystemModel::new(name, 3, vec![(-lim, lim)], LongitudinalFlight { params })
        }
        "ground_motion" => {
            let params = GroundMotionParams::resolve(preset_table("table2", &ground::TABLE2)?, params)?;
            let lim = T::of(NOSE_WHEEL_LIMIT);
            SystemModel::new(name, 3, vec![(-lim, lim)], GroundMotion { params })
        }
        other => Err(Error::usage(format!(
            "unknown system {other:?} (expected one of {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}
