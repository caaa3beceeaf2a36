//! Independent ground truth for validating solver classifications.
//!
//! [`brute_classify`] enumerates every piecewise-constant control sequence
//! on the discretized control set and steps it with the same frozen Euler
//! step the solver uses, so any disagreement with the solver comes from
//! interpolation and the recursion, not from integration.
//! [`analytic_min_time`] gives closed-form minimum arrival times for the
//! integrator toys.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::models::{discretize_controls, SystemModel};
use crate::scalar::Scalar;
use crate::solver::QueryKind;
use crate::targets::TargetSet;

/// Upper limit on enumerated control sequences per classification.
pub const MAX_SEQUENCES: f64 = 1e7;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult<T> {
    pub states: Vec<Vec<T>>,
    /// First step index whose state lies in the target.
    pub first_hit_step: Option<usize>,
    pub controls: Vec<Vec<T>>,
}

/// Steps `s0` through `controls` with the frozen dynamics.
pub fn simulate<T: Scalar>(
    system: &SystemModel<T>,
    target: &TargetSet<T>,
    s0: &[T],
    controls: &[Vec<T>],
    dt: T,
) -> Result<TrajectoryResult<T>> {
    if s0.len() != system.dim() {
        return Err(Error::usage(format!(
            "initial state has {} components, {} expects {}",
            s0.len(),
            system.name(),
            system.dim()
        )));
    }
    if !(dt > T::zero()) {
        return Err(Error::usage(format!("time step must be positive, got {dt}")));
    }
    for (k, u) in controls.iter().enumerate() {
        let ok = u.len() == system.control_dim()
            && system
                .control_bounds()
                .iter()
                .zip(u)
                .all(|(&(lo, hi), &x)| lo <= x && x <= hi);
        if !ok {
            return Err(Error::usage(format!(
                "control {k} = {u:?} outside the control bounds"
            )));
        }
    }
    target.contains(s0)?;
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(s0.to_vec());
    let mut first_hit_step = None;
    for (k, u) in controls.iter().enumerate() {
        let cur = &states[k];
        if first_hit_step.is_none() && target.contains_unchecked(cur) {
            first_hit_step = Some(k);
        }
        let mut next = vec![T::zero(); cur.len()];
        system.step_into(target, cur, u, dt, &mut next)?;
        states.push(next);
    }
    if first_hit_step.is_none() && target.contains_unchecked(states.last().unwrap()) {
        first_hit_step = Some(controls.len());
    }
    Ok(TrajectoryResult {
        states,
        first_hit_step,
        controls: controls.to_vec(),
    })
}

/// Number of Euler steps covering `horizon`.
pub fn steps_for<T: Scalar>(horizon: T, dt: T) -> usize {
    let steps = (horizon / dt).as_f64();
    (steps - 1e-9 * steps.abs().max(1.0)).ceil().max(0.0) as usize
}

/// Exhaustive reachability of `target` from `s0` within `horizon`.
///
/// `MaxReach`: some control sequence enters the target by step
/// `ceil(horizon / dt)`. `MinReach`: every sequence does.
pub fn brute_classify<T: Scalar>(
    system: &SystemModel<T>,
    target: &TargetSet<T>,
    s0: &[T],
    horizon: T,
    dt: T,
    control_counts: &[usize],
    kind: QueryKind,
) -> Result<bool> {
    let controls = discretize_controls(system.control_bounds(), control_counts)?;
    let steps = steps_for(horizon, dt);
    check_guard(controls.len(), steps)?;
    if s0.len() != system.dim() {
        return Err(Error::usage(format!(
            "initial state has {} components, {} expects {}",
            s0.len(),
            system.name(),
            system.dim()
        )));
    }
    target.contains(s0)?;
    let want_all = match kind {
        QueryKind::MaxReach => false,
        QueryKind::MinReach => true,
        other => {
            return Err(Error::usage(format!(
                "brute_classify supports max_reach and min_reach, not {other}"
            )))
        }
    };
    let search = Search {
        system,
        target,
        controls: &controls,
        dt,
        want_all,
    };
    let mut scratch = vec![vec![T::zero(); s0.len()]; steps + 1];
    scratch[0].copy_from_slice(s0);
    search.hits(&mut scratch, 0, steps)
}

pub fn check_guard(controls: usize, steps: usize) -> Result<()> {
    let sequences = (controls as f64).powi(steps as i32);
    if sequences > MAX_SEQUENCES {
        return Err(Error::usage(format!(
            "{controls}^{steps} control sequences exceed the enumeration limit of {MAX_SEQUENCES:e}; use fewer steps or controls"
        )));
    }
    Ok(())
}

struct Search<'a, T: Scalar> {
    system: &'a SystemModel<T>,
    target: &'a TargetSet<T>,
    controls: &'a [Vec<T>],
    dt: T,
    want_all: bool,
}

impl<T: Scalar> Search<'_, T> {
    /// Depth-first over sequence prefixes. A hit ends a branch: the frozen
    /// dynamics keep every continuation in the target.
    fn hits(&self, path: &mut [Vec<T>], depth: usize, steps: usize) -> Result<bool> {
        if self.target.contains_unchecked(&path[depth]) {
            return Ok(true);
        }
        if depth == steps {
            return Ok(false);
        }
        for u in self.controls {
            let (head, tail) = path.split_at_mut(depth + 1);
            self.system
                .step_into(self.target, &head[depth], u, self.dt, &mut tail[0])?;
            let hit = self.hits(path, depth + 1, steps)?;
            if hit != self.want_all {
                return Ok(hit);
            }
        }
        Ok(self.want_all)
    }
}

/// Nodes within one cell (in every axis, diagonals included) of a node
/// with the opposite label.
pub fn boundary_band<T: Scalar>(grid: &Grid<T>, mask: &[bool]) -> Result<Vec<bool>> {
    if mask.len() != grid.len() {
        return Err(Error::usage(format!(
            "mask has {} entries, grid has {} nodes",
            mask.len(),
            grid.len()
        )));
    }
    let d = grid.dim();
    let dims = grid.dims();
    let strides = grid.strides();
    let neighbours = 3usize.pow(d as u32);
    let band = (0..grid.len())
        .map(|node| {
            let idx = grid.unflatten(node);
            (0..neighbours).any(|code| {
                let mut c = code;
                let mut other = node as isize;
                for a in 0..d {
                    let off = (c % 3) as isize - 1;
                    c /= 3;
                    let i = idx[a] as isize + off;
                    if i < 0 || i >= dims[a] as isize {
                        return false;
                    }
                    other += off * strides[a] as isize;
                }
                mask[other as usize] != mask[node]
            })
        })
        .collect();
    Ok(band)
}

/// Closed-form minimum time to the target under unit-bounded control.
///
/// `single_integrator`: target `[-a, a]`, time `max(0, |s| - a)`.
/// `double_integrator`: point target at the origin (`a` must be 0), the
/// classical bang-bang time with switching curve `x = -v |v| / 2`.
pub fn analytic_min_time(name: &str, s0: &[f64], half_width: f64) -> Result<f64> {
    match name {
        "single_integrator" => {
            let [x] = s0 else {
                return Err(Error::usage("single_integrator state has one component"));
            };
            Ok((x.abs() - half_width).max(0.0))
        }
        "double_integrator" => {
            let [x, v] = s0 else {
                return Err(Error::usage("double_integrator state has two components"));
            };
            if half_width != 0.0 {
                return Err(Error::usage(
                    "double_integrator minimum time is only available for the point target at the origin",
                ));
            }
            let switch = x + 0.5 * v * v.abs();
            Ok(if switch > 0.0 {
                v + 2.0 * (x + 0.5 * v * v).sqrt()
            } else if switch < 0.0 {
                -v + 2.0 * (-x + 0.5 * v * v).sqrt()
            } else {
                v.abs()
            })
        }
        other => Err(Error::usage(format!(
            "no closed-form minimum time for {other:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_system, ParamTable};
    use proptest::prelude::*;

    #[test]
    fn band_marks_both_sides_of_a_label_change() {
        let grid = Grid::new(vec![(0.0, 1.0), (0.0, 1.0)], vec![4, 4]).unwrap();
        let mask: Vec<bool> = (0..16).map(|n| grid.unflatten(n)[0] < 2).collect();
        let band = boundary_band(&grid, &mask).unwrap();
        for n in 0..16 {
            let i = grid.unflatten(n)[0];
            assert_eq!(band[n], i == 1 || i == 2, "node {n}");
        }
        assert!(boundary_band(&grid, &[true; 3]).is_err());
    }

    fn single() -> SystemModel<f64> {
        builtin_system("single_integrator", None, &ParamTable::new()).unwrap()
    }

    fn k() -> TargetSet<f64> {
        TargetSet::boxed(vec![(-0.2, 0.2)]).unwrap()
    }

    #[test]
    fn start_inside_is_frozen() {
        let t = simulate(&single(), &k(), &[0.1], &vec![vec![1.0]; 5], 0.1).unwrap();
        assert_eq!(t.first_hit_step, Some(0));
        assert!(t.states.iter().all(|s| s == &[0.1]));
        assert_eq!(t.states.len(), 6);
    }

    #[test]
    fn constant_push_hits_after_eighty_steps() {
        let t = simulate(&single(), &k(), &[1.0], &vec![vec![-1.0]; 100], 0.01).unwrap();
        assert_eq!(t.first_hit_step, Some(80));
        let hit = t.first_hit_step.unwrap();
        assert!(k().contains(&t.states[hit]).unwrap());
        assert!(!k().contains(&t.states[hit - 1]).unwrap());
    }

    #[test]
    fn fleeing_never_hits() {
        let t = simulate(&single(), &k(), &[0.5], &vec![vec![1.0]; 50], 0.01).unwrap();
        assert_eq!(t.first_hit_step, None);
    }

    #[test]
    fn out_of_bounds_control_rejected() {
        assert!(simulate(&single(), &k(), &[0.5], &[vec![2.0]], 0.01).is_err());
    }

    #[test]
    fn bang_bang_enumeration() {
        let sys = single();
        let max = brute_classify(&sys, &k(), &[0.5], 0.4, 0.1, &[2], QueryKind::MaxReach).unwrap();
        let min = brute_classify(&sys, &k(), &[0.5], 0.4, 0.1, &[2], QueryKind::MinReach).unwrap();
        assert!(max);
        assert!(!min);
        for kind in [QueryKind::MaxReach, QueryKind::MinReach] {
            assert!(brute_classify(&sys, &k(), &[0.0], 0.4, 0.1, &[2], kind).unwrap());
        }
    }

    #[test]
    fn enumeration_guard() {
        let err = brute_classify(&single(), &k(), &[0.5], 3.0, 0.1, &[3], QueryKind::MaxReach)
            .unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        assert!(err.to_string().contains("fewer steps"));
    }

    #[test]
    fn closed_form_times() {
        assert!((analytic_min_time("single_integrator", &[1.2], 0.2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(analytic_min_time("single_integrator", &[-0.1], 0.2).unwrap(), 0.0);
        assert_eq!(analytic_min_time("double_integrator", &[0.0, 0.0], 0.0).unwrap(), 0.0);
        assert!((analytic_min_time("double_integrator", &[4.0, 0.0], 0.0).unwrap() - 4.0).abs() < 1e-15);
        assert!(analytic_min_time("dubins_car", &[0.0; 3], 0.0).is_err());
        assert!(analytic_min_time("double_integrator", &[1.0, 0.0], 0.1).is_err());
    }

    /// Fine-step simulation of the switching-curve feedback.
    fn simulated_switching_time(mut x: f64, mut v: f64) -> f64 {
        let h = 1e-5;
        let mut t = 0.0;
        while x.hypot(v) > 2e-3 && t < 50.0 {
            let switch = x + 0.5 * v * v.abs();
            let u = if switch > 0.0 { -1.0 } else if switch < 0.0 { 1.0 } else { -v.signum() };
            // exact integration over the small step
            x += v * h + 0.5 * u * h * h;
            v += u * h;
            t += h;
        }
        t
    }

    #[test]
    fn double_integrator_matches_switching_policy() {
        for (x, v) in [(1.0, 0.0), (2.25, 0.0), (-1.0, 0.5), (0.3, -1.2), (-0.5, -0.5)] {
            let exact = analytic_min_time("double_integrator", &[x, v], 0.0).unwrap();
            let sim = simulated_switching_time(x, v);
            assert!((exact - sim).abs() < 0.02, "({x}, {v}): {exact} vs {sim}");
        }
        assert!((analytic_min_time("double_integrator", &[2.25, 0.0], 0.0).unwrap() - 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn forall_implies_exists(s in -1.0..1.0f64) {
            let sys = single();
            let min = brute_classify(&sys, &k(), &[s], 0.5, 0.1, &[3], QueryKind::MinReach).unwrap();
            let max = brute_classify(&sys, &k(), &[s], 0.5, 0.1, &[3], QueryKind::MaxReach).unwrap();
            prop_assert!(!min || max);
        }

        #[test]
        fn closed_form_bounds_simulated_arrivals(
            s in -1.5..1.5f64,
            us in prop::collection::vec(-1.0..=1.0f64, 200),
        ) {
            let dt = 0.01;
            let controls: Vec<Vec<f64>> = us.into_iter().map(|u| vec![u]).collect();
            let t = simulate(&single(), &k(), &[s], &controls, dt).unwrap();
            if let Some(hit) = t.first_hit_step {
                let best = analytic_min_time("single_integrator", &[s], 0.2).unwrap();
                prop_assert!(hit as f64 * dt >= best - dt);
            }
        }
    }
}
