//! Aircraft ground roll: longitudinal/lateral body velocity and yaw rate,
//! steered by the nose-wheel deflection.
//!
//! Underdetermined model. Only the rigid-body equations, the aerodynamic
//! force structure and the nose-wheel tire formula are published; the gear
//! force balance is closed here as follows:
//!
//! * gear loads: weight minus aerodynamic lift (`C_L0`), split statically by
//!   the lever arms; the nose carries `W a_m / (a_n + a_m)` and the two main
//!   gears share the rest equally;
//! * rolling forces `Q = mu * load` on every gear;
//! * lateral tire forces from the magic formula with coefficients
//!   `(mu_b, mu_c, mu_d, mu_e)` as `(B, C, D, E)`; nose slip from the wheel
//!   velocity rotated by the deflection, main-gear slip from the velocity at
//!   `x = -a_m` with zero deflection;
//! * yaw aerodynamic moment `0.5 rho V^2 S c (C_nb beta + C_nr r c / (2 V))`;
//! * drag uses `C_D0`, side force uses `C_Yb beta`;
//! * differential rolling moment `(Q_ml - Q_mr) b_w / 2`, zero under the
//!   symmetric split.
//!
//! Thrust is a constant parameter (zero in the embedded preset, i.e. a
//! rollout).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::params::{ParamTable, Resolver};
use super::Dynamics;

pub const NOSE_WHEEL_LIMIT: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundMotionParams<T> {
    pub mass: T,
    pub inertia_z: T,
    pub wing_area: T,
    pub chord: T,
    pub rho: T,
    /// Main-gear track.
    pub track: T,
    /// Nose-gear arm ahead of the center of gravity.
    pub nose_arm: T,
    /// Main-gear arm behind the center of gravity.
    pub main_arm: T,
    /// Rolling friction coefficient.
    pub mu: T,
    pub mu_d: T,
    pub mu_b: T,
    pub mu_c: T,
    pub mu_e: T,
    pub cd0: T,
    pub cy_beta: T,
    pub cn_beta: T,
    pub cn_r: T,
    pub cl0: T,
    pub g: T,
    pub thrust: T,
}

pub(crate) const KEYS: [&str; 20] = [
    "mass", "inertia_z", "wing_area", "chord", "rho", "track", "nose_arm", "main_arm", "mu",
    "mu_d", "mu_b", "mu_c", "mu_e", "cd0", "cy_beta", "cn_beta", "cn_r", "cl0", "g", "thrust",
];

pub(crate) const TABLE2: [(&str, f64); 20] = [
    ("mass", 104915.9),
    ("inertia_z", 10504308.1),
    ("wing_area", 249.9),
    ("chord", 12.1),
    ("rho", 1.293),
    ("track", 23.8),
    ("nose_arm", 17.9),
    ("main_arm", 2.3),
    ("mu", 0.04),
    ("mu_d", 0.1014),
    ("mu_b", -10.11),
    ("mu_c", 1.438),
    ("mu_e", -0.8507),
    ("cd0", 0.061),
    ("cy_beta", -1.4),
    ("cn_beta", 0.2),
    ("cn_r", -1.5),
    ("cl0", -0.053),
    ("g", 9.81),
    ("thrust", 0.0),
];

impl<T: Scalar> GroundMotionParams<T> {
    pub fn table2() -> Self {
        Self::resolve(&TABLE2, &ParamTable::new()).expect("embedded preset is complete")
    }

    pub(crate) fn resolve(preset: &[(&'static str, f64)], overrides: &ParamTable) -> Result<Self> {
        let r = Resolver::new("ground_motion", &KEYS, preset, overrides)?;
        let p = |k: &str| r.get(k).map(T::of);
        let params = Self {
            mass: p("mass")?,
            inertia_z: p("inertia_z")?,
            wing_area: p("wing_area")?,
            chord: p("chord")?,
            rho: p("rho")?,
            track: p("track")?,
            nose_arm: p("nose_arm")?,
            main_arm: p("main_arm")?,
            mu: p("mu")?,
            mu_d: p("mu_d")?,
            mu_b: p("mu_b")?,
            mu_c: p("mu_c")?,
            mu_e: p("mu_e")?,
            cd0: p("cd0")?,
            cy_beta: p("cy_beta")?,
            cn_beta: p("cn_beta")?,
            cn_r: p("cn_r")?,
            cl0: p("cl0")?,
            g: p("g")?,
            thrust: p("thrust")?,
        };
        let positive = [
            ("mass", params.mass),
            ("inertia_z", params.inertia_z),
            ("nose_arm", params.nose_arm),
            ("main_arm", params.main_arm),
            ("track", params.track),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| *v <= T::zero()) {
            return Err(Error::config(format!(
                "system.params.{k}: must be positive, got {v}"
            )));
        }
        Ok(params)
    }

    /// Lateral tire force for slip `tan_slip` under vertical load `load`.
    pub fn tire_force(&self, tan_slip: T, load: T) -> T {
        let bx = self.mu_b * tan_slip;
        let shaped = bx - self.mu_e * (bx - bx.atan());
        -self.mu_d * (self.mu_c * shaped.atan()).sin() * load
    }

    /// Static `(nose, each main gear)` vertical loads at airspeed `speed`.
    pub fn gear_loads(&self, speed: T) -> (T, T) {
        let lift = T::of(0.5) * self.rho * speed * speed * self.wing_area * self.cl0;
        let load = self.mass * self.g - lift;
        let arms = self.nose_arm + self.main_arm;
        let nose = load * self.main_arm / arms;
        (nose, (load - nose) / T::of(2.0))
    }
}

#[derive(Debug, Clone)]
pub struct GroundMotion<T> {
    pub params: GroundMotionParams<T>,
}

impl<T: Scalar> Dynamics<T> for GroundMotion<T> {
    fn eval(&self, s: &[T], u: &[T], ds: &mut [T]) -> Result<()> {
        let p = &self.params;
        let (vx, vy, r) = (s[0], s[1], s[2]);
        let steer = u[0];
        let two = T::of(2.0);

        let speed = vx.hypot(vy);
        let beta = vy.atan2(vx);
        let qs = T::of(0.5) * p.rho * speed * speed * p.wing_area;
        let drag = qs * p.cd0;
        let side = qs * p.cy_beta * beta;
        let yaw_aero = qs * p.chord * (p.cn_beta * beta + p.cn_r * r * p.chord / (two * speed));

        let (nose_load, main_load) = p.gear_loads(speed);
        let q_nose = p.mu * nose_load;
        let (q_left, q_right) = (p.mu * main_load, p.mu * main_load);

        let nose_lat = vy + r * p.nose_arm;
        let (sin_w, cos_w) = steer.sin_cos();
        let tan_nose = (nose_lat * cos_w - vx * sin_w) / (vx * cos_w + nose_lat * sin_w);
        let f_nose = p.tire_force(tan_nose, nose_load);
        let tan_main = (vy - r * p.main_arm) / vx;
        let f_main = p.tire_force(tan_main, main_load);
        let (f_left, f_right) = (f_main, f_main);

        let (sin_b, cos_b) = beta.sin_cos();
        let fx = -drag * cos_b - side * sin_b - q_nose - q_left - q_right + p.thrust;
        let fy = side * cos_b - drag * sin_b - f_nose - f_left - f_right;
        let mz = yaw_aero + (f_left + f_right) * p.main_arm - f_nose * p.nose_arm
            + (q_left - q_right) * p.track / two;

        ds[0] = r * vy + fx / p.mass;
        ds[1] = -r * vx + fy / p.mass;
        ds[2] = mz / p.inertia_z;
        Ok(())
    }
}
