//! Longitudinal aircraft motion with airspeed held constant by thrust.
//!
//! The full state is `(v, alpha, q, theta)`. Thrust is chosen at every
//! instant so that `v' = 0`, which leaves the three-dimensional system
//! `(alpha, q, theta)` with the elevator deflection as the only control.
//! Aerodynamic coefficients are linear in `alpha`, `q` and the elevator,
//! with a quadratic drag term in `alpha`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::params::{ParamTable, Resolver};
use super::Dynamics;

pub const ELEVATOR_LIMIT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongitudinalParams<T> {
    pub mass: T,
    pub inertia_y: T,
    pub wing_area: T,
    pub chord: T,
    pub rho: T,
    pub airspeed: T,
    pub g: T,
    pub cl0: T,
    pub cl_alpha: T,
    pub cl_de: T,
    pub cd0: T,
    pub cd_alpha: T,
    pub cd_alpha2: T,
    pub cd_de: T,
    pub cm0: T,
    pub cm_alpha: T,
    pub cm_q: T,
    pub cm_de: T,
}

pub(crate) const KEYS: [&str; 18] = [
    "mass", "inertia_y", "wing_area", "chord", "rho", "airspeed", "g", "cl0", "cl_alpha",
    "cl_de", "cd0", "cd_alpha", "cd_alpha2", "cd_de", "cm0", "cm_alpha", "cm_q", "cm_de",
];

/// Reference transport aircraft.
pub(crate) const TABLE1: [(&str, f64); 18] = [
    ("mass", 235717.0),
    ("inertia_y", 22428285.0),
    ("wing_area", 524.0),
    ("chord", 6.32),
    ("rho", 1.293),
    ("airspeed", 200.0),
    ("g", 9.81),
    ("cl0", 0.1),
    ("cl_alpha", 2.4),
    ("cl_de", 0.2),
    ("cd0", 0.00108),
    ("cd_alpha", 0.01),
    ("cd_alpha2", 0.6),
    ("cd_de", 0.05),
    ("cm0", 0.04),
    ("cm_alpha", -0.2),
    ("cm_q", -1.0),
    ("cm_de", -1.2),
];

impl<T: Scalar> LongitudinalParams<T> {
    pub fn table1() -> Self {
        Self::resolve(&TABLE1, &ParamTable::new()).expect("embedded preset is complete")
    }

    pub(crate) fn resolve(preset: &[(&'static str, f64)], overrides: &ParamTable) -> Result<Self> {
        let r = Resolver::new("longitudinal_flight", &KEYS, preset, overrides)?;
        let p = |k: &str| r.get(k).map(T::of);
        let params = Self {
            mass: p("mass")?,
            inertia_y: p("inertia_y")?,
            wing_area: p("wing_area")?,
            chord: p("chord")?,
            rho: p("rho")?,
            airspeed: p("airspeed")?,
            g: p("g")?,
            cl0: p("cl0")?,
            cl_alpha: p("cl_alpha")?,
            cl_de: p("cl_de")?,
            cd0: p("cd0")?,
            cd_alpha: p("cd_alpha")?,
            cd_alpha2: p("cd_alpha2")?,
            cd_de: p("cd_de")?,
            cm0: p("cm0")?,
            cm_alpha: p("cm_alpha")?,
            cm_q: p("cm_q")?,
            cm_de: p("cm_de")?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("inertia_y", self.inertia_y),
            ("wing_area", self.wing_area),
            ("chord", self.chord),
            ("rho", self.rho),
            ("airspeed", self.airspeed),
        ];
        match positive.iter().find(|(_, v)| *v <= T::zero()) {
            Some((k, v)) => Err(Error::config(format!(
                "system.params.{k}: must be positive, got {v}"
            ))),
            None => Ok(()),
        }
    }

    /// `0.5 rho v^2 S`
    pub fn dynamic_force(&self) -> T {
        T::of(0.5) * self.rho * self.airspeed * self.airspeed * self.wing_area
    }

    pub fn lift_coefficient(&self, alpha: T, elevator: T) -> T {
        self.cl0 + self.cl_alpha * alpha + self.cl_de * elevator
    }

    pub fn drag_coefficient(&self, alpha: T, elevator: T) -> T {
        self.cd0 + self.cd_alpha * alpha + self.cd_alpha2 * alpha * alpha + self.cd_de * elevator
    }

    pub fn moment_coefficient(&self, alpha: T, q: T, elevator: T) -> T {
        self.cm0
            + self.cm_alpha * alpha
            + self.cm_q * q * self.chord / (T::of(2.0) * self.airspeed)
            + self.cm_de * elevator
    }

    /// Thrust that cancels the airspeed derivative at state `(alpha, q, theta)`.
    pub fn thrust_for_constant_speed(&self, s: &[T], elevator: T) -> Result<T> {
        let (alpha, theta) = (s[0], s[2]);
        let cos_a = alpha.cos();
        if cos_a.abs() < T::of(1e-9) {
            return Err(Error::Model {
                state: s.iter().map(|x| x.as_f64()).collect(),
                reason: "thrust for constant airspeed is singular at cos(alpha) = 0".into(),
            });
        }
        let drag = self.dynamic_force() * self.drag_coefficient(alpha, elevator);
        Ok((drag + self.mass * self.g * (theta - alpha).sin()) / cos_a)
    }

    /// Airspeed derivative of the four-state model under the given thrust.
    pub fn airspeed_rate(&self, s: &[T], elevator: T, thrust: T) -> T {
        let (alpha, theta) = (s[0], s[2]);
        let drag = self.dynamic_force() * self.drag_coefficient(alpha, elevator);
        (thrust * alpha.cos() - drag - self.mass * self.g * (theta - alpha).sin()) / self.mass
    }
}

#[derive(Debug, Clone)]
pub struct LongitudinalFlight<T> {
    pub params: LongitudinalParams<T>,
}

impl<T: Scalar> Dynamics<T> for LongitudinalFlight<T> {
    fn eval(&self, s: &[T], u: &[T], ds: &mut [T]) -> Result<()> {
        let p = &self.params;
        let (alpha, q, theta) = (s[0], s[1], s[2]);
        let elevator = u[0];
        let thrust = p.thrust_for_constant_speed(s, elevator)?;
        let qs = p.dynamic_force();
        let lift = qs * p.lift_coefficient(alpha, elevator);
        let weight = p.mass * p.g;
        ds[0] = q
            + (-thrust * alpha.sin() - lift + weight * (theta - alpha).cos())
                / (p.mass * p.airspeed);
        ds[1] = qs * p.chord * p.moment_coefficient(alpha, q, elevator) / p.inertia_y;
        ds[2] = q;
        Ok(())
    }
}
