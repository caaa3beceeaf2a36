//! Backward recursion of the modified value functions and set extraction.
//!
//! Starting from the zero field, each recursion step sets every node `x` to
//!
//! ```text
//! opt_u [ c(x) dt + W(F(x, u)) ]
//! ```
//!
//! where `F` is the frozen-in-target Euler step, `c` the 0/1 running cost
//! and `W` the d-linear interpolant of the previous field. `opt` is `min`
//! for the maximal reachable set (earliest arrival under the best control)
//! and `max` for the minimal reachable set (latest arrival under the worst
//! control). After `k` steps the field is bounded by `k dt`; nodes that
//! cannot reach the target saturate at that value.
//!
//! Viable and invariant sets are obtained through complements: the viable
//! set of `K` is the complement of the minimal reachable set of `!K`, and
//! the invariant set of `K` the complement of the maximal reachable set of
//! `!K`. Complements are only reported on grid nodes, i.e. inside the
//! computational domain.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Grid, Interpolator, Mode, Relation, ValueField};
use crate::models::{discretize_controls, SystemModel};
use crate::scalar::Scalar;
use crate::targets::TargetSet;

/// Nodes per parallel work item.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryKind {
    MaxReach,
    MinReach,
    Viable,
    Invariant,
}

impl QueryKind {
    pub const ALL: [QueryKind; 4] = [
        QueryKind::MaxReach,
        QueryKind::MinReach,
        QueryKind::Viable,
        QueryKind::Invariant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryKind::MaxReach => "max_reach",
            QueryKind::MinReach => "min_reach",
            QueryKind::Viable => "viable",
            QueryKind::Invariant => "invariant",
        }
    }

    /// Optimization mode of the value function this kind is read from.
    pub fn required_mode(self) -> Mode {
        match self {
            QueryKind::MaxReach | QueryKind::Invariant => Mode::Minimize,
            QueryKind::MinReach | QueryKind::Viable => Mode::Maximize,
        }
    }

    /// Whether the value function is solved against the complement of the target.
    pub fn uses_complement(self) -> bool {
        matches!(self, QueryKind::Viable | QueryKind::Invariant)
    }

    pub fn relation(self) -> Relation {
        if self.uses_complement() {
            Relation::AtLeast
        } else {
            Relation::AtMost
        }
    }

    fn pairing(self) -> &'static str {
        match self {
            QueryKind::MaxReach => "max_reach needs a minimize field solved against K",
            QueryKind::MinReach => "min_reach needs a maximize field solved against K",
            QueryKind::Viable => "viable needs a maximize field solved against the complement of K",
            QueryKind::Invariant => {
                "invariant needs a minimize field solved against the complement of K"
            }
        }
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        QueryKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::usage(format!(
                    "query kind must be max_reach, min_reach, viable or invariant, got {s:?}"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetQuery<T> {
    pub kind: QueryKind,
    pub horizon: T,
}

#[derive(Debug, Clone)]
pub struct SolveConfig<T: Scalar> {
    pub system: SystemModel<T>,
    /// Target the value function is solved against (already complemented
    /// for viable and invariant queries).
    pub target: TargetSet<T>,
    pub grid: Grid<T>,
    pub dt: T,
    pub recursions: usize,
    pub control_counts: Vec<usize>,
    pub mode: Mode,
}

impl<T: Scalar> SolveConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return Err(Error::usage(format!("dt must be positive, got {}", self.dt)));
        }
        if self.system.dim() != self.grid.dim() {
            return Err(Error::usage(format!(
                "system {} is {}-dimensional but the grid is {}-dimensional",
                self.system.name(),
                self.system.dim(),
                self.grid.dim()
            )));
        }
        if let Some(d) = self.target.dim() {
            if d != self.grid.dim() {
                return Err(Error::usage(format!(
                    "target is {d}-dimensional but the grid is {}-dimensional",
                    self.grid.dim()
                )));
            }
        }
        discretize_controls(self.system.control_bounds(), &self.control_counts)?;
        Ok(())
    }

    /// Horizon `recursions * dt` of the final field.
    pub fn horizon(&self) -> T {
        T::of(self.recursions as f64) * self.dt
    }
}

/// Recursion count that puts the final horizon strictly above `horizon`.
pub fn recursions_for<T: Scalar>(horizon: T, dt: T) -> usize {
    let steps = (horizon / dt).as_f64();
    // Forgive rounding in the division so that e.g. 1.0 / 0.01 counts as 100.
    let steps = (steps - 1e-9 * steps.abs().max(1.0)).ceil().max(0.0);
    steps as usize + 1
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Worker count; `None` uses the ambient rayon pool, `Some(0)` all cores.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome<T: Scalar> {
    pub field: ValueField<T>,
    /// Successor states that fell outside the domain and were clamped.
    pub clamped_lookups: u64,
    /// Sum of all node values after each step, in node order.
    pub step_sums: Vec<f64>,
    pub elapsed: Duration,
}

impl<T: Scalar> SolveOutcome<T> {
    /// SHA-256 over the bit patterns of the per-step value sums.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.step_sums {
            h.update(s.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

struct Stepper<'a, T: Scalar> {
    config: &'a SolveConfig<T>,
    controls: Vec<Vec<T>>,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    fn new(config: &'a SolveConfig<T>) -> Result<Self> {
        config.validate()?;
        let controls = discretize_controls(config.system.control_bounds(), &config.control_counts)?;
        Ok(Self { config, controls })
    }

    /// Next-step values and the number of clamped lookups.
    fn step(&self, prev: &ValueField<T>) -> Result<(Vec<T>, u64)> {
        let grid = prev.grid();
        let d = grid.dim();
        let mut next = vec![T::zero(); grid.len()];
        // Saturation levels before and after this step. Sums of `dt` drift
        // from `k dt` in floating point, so saturated values are pinned.
        let caps = (prev.horizon(), T::of((prev.k() + 1) as f64) * prev.dt());
        let results: Vec<Result<u64>> = next
            .par_chunks_mut(CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut interp = Interpolator::new(d);
                let mut x = vec![T::zero(); d];
                let mut succ = vec![T::zero(); d];
                let mut clamped = 0u64;
                for (j, out) in chunk.iter_mut().enumerate() {
                    let node = ci * CHUNK + j;
                    grid.coordinate_into(node, &mut x);
                    *out = self
                        .node_update(prev, &x, &mut succ, &mut interp, &mut clamped, caps)
                        .map_err(|e| Error::AtNode {
                            node,
                            source: Box::new(e),
                        })?;
                }
                Ok(clamped)
            })
            .collect();
        let mut clamped = 0;
        for r in results {
            clamped += r?;
        }
        Ok((next, clamped))
    }

    #[inline]
    fn node_update(
        &self,
        prev: &ValueField<T>,
        x: &[T],
        succ: &mut [T],
        interp: &mut Interpolator<T>,
        clamped: &mut u64,
        caps: (T, T),
    ) -> Result<T> {
        let cfg = self.config;
        let mut best: Option<T> = None;
        for u in &self.controls {
            let inside = cfg.system.step_into(&cfg.target, x, u, cfg.dt, succ)?;
            let (w, c) = interp.eval(prev.grid(), prev.values(), succ);
            *clamped += c as u64;
            let total = if inside {
                w
            } else if w >= caps.0 {
                caps.1
            } else {
                (cfg.dt + w).min(caps.1)
            };
            best = Some(match (best, cfg.mode) {
                (None, _) => total,
                (Some(b), Mode::Minimize) if total < b => total,
                (Some(b), Mode::Maximize) if total > b => total,
                (Some(b), _) => b,
            });
        }
        Ok(best.expect("control grid is never empty"))
    }
}

/// One application of the recursion to `field`; the input is left untouched.
pub fn recursion_step<T: Scalar>(field: &ValueField<T>, config: &SolveConfig<T>) -> Result<ValueField<T>> {
    check_field(field, config)?;
    let stepper = Stepper::new(config)?;
    let (values, _) = stepper.step(field)?;
    Ok(field.with_values(values))
}

fn check_field<T: Scalar>(field: &ValueField<T>, config: &SolveConfig<T>) -> Result<()> {
    if field.grid() != &config.grid {
        return Err(Error::usage("field grid differs from the solve grid"));
    }
    if field.mode() != config.mode {
        return Err(Error::usage(format!(
            "field mode {} differs from solve mode {}",
            field.mode(),
            config.mode
        )));
    }
    if field.dt() != config.dt {
        return Err(Error::usage("field dt differs from the solve dt"));
    }
    Ok(())
}

/// `config.recursions` steps from the zero field.
pub fn solve<T: Scalar>(config: &SolveConfig<T>) -> Result<ValueField<T>> {
    solve_with(config, &SolveOptions::default()).map(|o| o.field)
}

pub fn solve_with<T: Scalar>(config: &SolveConfig<T>, opts: &SolveOptions) -> Result<SolveOutcome<T>> {
    solve_observed(config, opts, |_| {})
}

/// Like [`solve_with`], calling `observer` with the field after every step
/// (and once with the initial zero field).
pub fn solve_observed<T: Scalar>(
    config: &SolveConfig<T>,
    opts: &SolveOptions,
    mut observer: impl FnMut(&ValueField<T>) + Send,
) -> Result<SolveOutcome<T>> {
    let mut run = move || -> Result<SolveOutcome<T>> {
        let start = Instant::now();
        let stepper = Stepper::new(config)?;
        let mut field = ValueField::zeros(config.grid.clone(), config.mode, config.dt);
        observer(&field);
        let mut clamped_lookups = 0;
        let mut step_sums = Vec::with_capacity(config.recursions);
        for _ in 0..config.recursions {
            let (values, clamped) = stepper.step(&field)?;
            clamped_lookups += clamped;
            step_sums.push(values.iter().map(|v| v.as_f64()).sum());
            field = field.with_values(values);
            observer(&field);
        }
        Ok(SolveOutcome {
            field,
            clamped_lookups,
            step_sums,
            elapsed: start.elapsed(),
        })
    };
    match opts.threads {
        None => run(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::usage(format!("cannot start {n} workers: {e}")))?
            .install(run),
    }
}

/// Node mask of the set described by `query`.
///
/// `target` is the user's `K`. The field must have the mode required by
/// the query kind and must have been solved against `K` (reach kinds) or
/// its complement (viable, invariant); the latter is checked through the
/// zero set of the field, which coincides with the solve target's nodes.
pub fn extract_set<T: Scalar>(
    field: &ValueField<T>,
    query: &SetQuery<T>,
    target: &TargetSet<T>,
) -> Result<Vec<bool>> {
    let horizon = field.horizon();
    if !(query.horizon >= T::zero() && query.horizon < horizon) {
        return Err(Error::usage(format!(
            "horizon {} must satisfy 0 <= T < k*dt = {} (values are only exact below the computed horizon)",
            query.horizon, horizon
        )));
    }
    let kind = query.kind;
    if field.mode() != kind.required_mode() {
        return Err(Error::usage(format!(
            "{}; this field was computed with mode {}",
            kind.pairing(),
            field.mode()
        )));
    }
    let grid = field.grid();
    if let Some(d) = target.dim() {
        if d != grid.dim() {
            return Err(Error::usage(format!(
                "target is {d}-dimensional but the field is {}-dimensional",
                grid.dim()
            )));
        }
    }
    if field.k() > 0 {
        let mut x = vec![T::zero(); grid.dim()];
        for (node, &v) in field.values().iter().enumerate() {
            grid.coordinate_into(node, &mut x);
            let in_solve_target = target.contains_unchecked(&x) != kind.uses_complement();
            if in_solve_target != (v == T::zero()) {
                return Err(Error::usage(format!(
                    "{}; node {node} is inconsistent with that pairing",
                    kind.pairing()
                )));
            }
        }
    }
    Ok(field.level_mask(query.horizon, kind.relation()))
}

/// Picks mode, effective target and recursion count for `query`, solves,
/// and extracts the set.
pub fn solve_query<T: Scalar>(
    system: &SystemModel<T>,
    target: &TargetSet<T>,
    query: &SetQuery<T>,
    grid: &Grid<T>,
    dt: T,
    control_counts: &[usize],
) -> Result<(ValueField<T>, Vec<bool>)> {
    let config = query_config(system, target, query, grid, dt, control_counts, None);
    let mut field = solve(&config)?;
    field.set_kind(Some(query.kind));
    let mask = extract_set(&field, query, target)?;
    Ok((field, mask))
}

/// Solve configuration implied by a set query; `recursions` overrides the
/// default `ceil(T / dt) + 1`.
pub fn query_config<T: Scalar>(
    system: &SystemModel<T>,
    target: &TargetSet<T>,
    query: &SetQuery<T>,
    grid: &Grid<T>,
    dt: T,
    control_counts: &[usize],
    recursions: Option<usize>,
) -> SolveConfig<T> {
    let effective = if query.kind.uses_complement() {
        target.clone().complement()
    } else {
        target.clone()
    };
    SolveConfig {
        system: system.clone(),
        target: effective,
        grid: grid.clone(),
        dt,
        recursions: recursions.unwrap_or_else(|| recursions_for(query.horizon, dt)),
        control_counts: control_counts.to_vec(),
        mode: query.kind.required_mode(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_system, ParamTable};

    fn single_config(mode: Mode, grid: Grid<f64>, dt: f64, m: usize) -> SolveConfig<f64> {
        SolveConfig {
            system: builtin_system("single_integrator", None, &ParamTable::new()).unwrap(),
            target: TargetSet::boxed(vec![(-0.2, 0.2)]).unwrap(),
            grid,
            dt,
            recursions: m,
            control_counts: vec![2],
            mode,
        }
    }

    fn unit_grid() -> Grid<f64> {
        Grid::new(vec![(-1.0, 1.0)], vec![201]).unwrap()
    }

    #[test]
    fn first_step_is_cost_only() {
        for mode in [Mode::Minimize, Mode::Maximize] {
            let cfg = single_config(mode, unit_grid(), 0.01, 1);
            let zero = ValueField::zeros(cfg.grid.clone(), mode, 0.01);
            let one = recursion_step(&zero, &cfg).unwrap();
            assert_eq!(one.k(), 1);
            assert!(zero.values().iter().all(|&v| v == 0.0));
            let mut x = [0.0];
            for (i, &v) in one.values().iter().enumerate() {
                cfg.grid.coordinate_into(i, &mut x);
                let expected = if x[0].abs() <= 0.2 { 0.0 } else { 0.01 };
                assert_eq!(v, expected, "node {i} at {}", x[0]);
            }
        }
    }

    #[test]
    fn neighbour_of_target_reaches_it_in_one_step() {
        // Hand recursion at x = 0.21: step 1 gives dt; step 2 with u = -1
        // lands on the target boundary (value 0), so dt + 0.
        let cfg = single_config(Mode::Minimize, unit_grid(), 0.01, 2);
        let f = solve(&cfg).unwrap();
        let v = f.value_at(&[121]).unwrap();
        assert!((v - 0.01).abs() < 1e-12, "{v}");
        assert_eq!(f.value_at(&[122]).unwrap(), 0.02);
    }

    #[test]
    fn zero_recursions_give_zero_field() {
        let f = solve(&single_config(Mode::Maximize, unit_grid(), 0.01, 0)).unwrap();
        assert_eq!(f.k(), 0);
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recursion_count_rule() {
        assert_eq!(recursions_for(1.0, 0.01), 101);
        assert_eq!(recursions_for(1.5, 0.01), 151);
        assert_eq!(recursions_for(2.0, 0.01), 201);
        assert_eq!(recursions_for(0.0, 0.01), 1);
        assert_eq!(recursions_for(0.8, 0.1), 9);
        assert_eq!(recursions_for(1.0, 0.3), 5);
    }

    #[test]
    fn extract_set_guards() {
        let cfg = single_config(Mode::Minimize, unit_grid(), 0.01, 11);
        let f = solve(&cfg).unwrap();
        let k = &cfg.target;
        let q = |kind, horizon| SetQuery { kind, horizon };
        assert!(matches!(
            extract_set(&f, &q(QueryKind::MaxReach, 0.11), k),
            Err(Error::Usage(_))
        ));
        let err = extract_set(&f, &q(QueryKind::MinReach, 0.05), k).unwrap_err();
        assert!(err.to_string().contains("maximize"), "{err}");
        // minimize field solved against K, queried as invariant (needs !K)
        let err = extract_set(&f, &q(QueryKind::Invariant, 0.05), k).unwrap_err();
        assert!(err.to_string().contains("complement"), "{err}");
        let at_zero = extract_set(&f, &q(QueryKind::MaxReach, 0.0), k).unwrap();
        let mut x = [0.0];
        for (i, &b) in at_zero.iter().enumerate() {
            cfg.grid.coordinate_into(i, &mut x);
            assert_eq!(b, k.contains(&x).unwrap());
        }
    }

    #[test]
    fn model_failures_name_the_node() {
        use crate::models::FnDynamics;
        let system = SystemModel::new(
            "pole",
            1,
            vec![(-1.0, 1.0)],
            FnDynamics(|s: &[f64], _: &[f64], ds: &mut [f64]| ds[0] = 1.0 / (s[0] - 0.5)),
        )
        .unwrap();
        let cfg = SolveConfig {
            system,
            target: TargetSet::boxed(vec![(-0.2, 0.2)]).unwrap(),
            grid: Grid::new(vec![(0.0, 1.0)], vec![5]).unwrap(),
            dt: 0.1,
            recursions: 1,
            control_counts: vec![1],
            mode: Mode::Minimize,
        };
        match solve(&cfg).unwrap_err() {
            Error::AtNode { node, source } => {
                assert_eq!(node, 2);
                assert_eq!(source.exit_code(), 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = single_config(Mode::Minimize, unit_grid(), 0.0, 1);
        assert!(solve(&cfg).is_err());
        cfg.dt = 0.01;
        cfg.grid = Grid::new(vec![(-1.0, 1.0); 2], vec![3, 3]).unwrap();
        assert!(solve(&cfg).is_err());
    }
}
