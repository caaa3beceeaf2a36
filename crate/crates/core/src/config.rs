//! Run configuration files (TOML).
//!
//! ```toml
//! output = "runs/longitudinal"
//! dt = 0.01
//! domain = [[-0.4, 0.4], [-0.75, 0.75], [-0.75, 0.75]]
//! grid = [101, 101, 101]
//! controls = [5]
//!
//! [system]
//! name = "longitudinal_flight"
//! preset = "table1"
//!
//! [target]
//! variant = "box"
//! bounds = [[-0.05, 0.05], [-0.1, 0.1], [-0.1, 0.1]]
//!
//! [query]
//! kind = "max_reach"
//! horizon = 1.0
//! ```
//!
//! Relative paths (`output`, `mask_file`) are resolved against the
//! directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::models::{builtin_system, SystemModel};
use crate::scalar::Scalar;
use crate::solver::{query_config, QueryKind, SetQuery, SolveConfig};
use crate::targets::{voxel_from_cells, TargetSet, VoxelMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output: String,
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recursions: Option<usize>,
    pub domain: Vec<[f64; 2]>,
    pub grid: Vec<usize>,
    pub controls: Vec<usize>,
    pub system: SystemSpec,
    pub target: TargetSpec,
    pub query: QuerySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Box {
        bounds: Vec<[f64; 2]>,
    },
    /// Voxel mask stored in its own text file.
    Voxel {
        mask_file: String,
    },
    /// Voxel mask given inline as a list of marked cells.
    Cells {
        bounds: Vec<[f64; 2]>,
        cells: Vec<usize>,
        marked: Vec<Vec<usize>>,
    },
    Union {
        members: Vec<TargetSpec>,
    },
    Complement {
        inner: std::boxed::Box<TargetSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub kind: String,
    pub horizon: f64,
}

/// Everything a run needs, built and validated.
#[derive(Debug, Clone)]
pub struct Run<T: Scalar> {
    pub system: SystemModel<T>,
    /// The user's target `K` (not complemented).
    pub target: TargetSet<T>,
    pub grid: Grid<T>,
    pub query: SetQuery<T>,
    pub dt: T,
    pub controls: Vec<usize>,
    pub recursions: Option<usize>,
    pub output: PathBuf,
}

impl<T: Scalar> Run<T> {
    pub fn solve_config(&self) -> SolveConfig<T> {
        query_config(
            &self.system,
            &self.target,
            &self.query,
            &self.grid,
            self.dt,
            &self.controls,
            self.recursions,
        )
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Schema checks that need no file access or model construction.
    pub fn validate(&self) -> Result<()> {
        if self.output.trim().is_empty() {
            return Err(Error::config("output: must be a non-empty path prefix"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt: must be positive, got {}", self.dt)));
        }
        if self.domain.is_empty() {
            return Err(Error::config("domain: needs at least one interval"));
        }
        check_intervals("domain", &self.domain, true)?;
        if self.grid.len() != self.domain.len() {
            return Err(Error::config(format!(
                "grid: {} node counts for a {}-dimensional domain",
                self.grid.len(),
                self.domain.len()
            )));
        }
        if let Some(i) = self.grid.iter().position(|&n| n < 2) {
            return Err(Error::config(format!("grid[{i}]: need at least 2 nodes")));
        }
        if self.controls.is_empty() {
            return Err(Error::config("controls: needs one count per control dimension"));
        }
        if let Some(i) = self.controls.iter().position(|&n| n == 0) {
            return Err(Error::config(format!("controls[{i}]: must be at least 1")));
        }
        self.query.kind.parse::<QueryKind>().map_err(|_| {
            Error::config(format!(
                "query.kind: expected max_reach, min_reach, viable or invariant, got {:?}",
                self.query.kind
            ))
        })?;
        if !(self.query.horizon >= 0.0 && self.query.horizon.is_finite()) {
            return Err(Error::config(format!(
                "query.horizon: must be finite and nonnegative, got {}",
                self.query.horizon
            )));
        }
        self.target.validate("target", self.domain.len())?;
        Ok(())
    }

    /// Builds system, target and grid. `base` anchors relative paths.
    pub fn build<T: Scalar>(&self, base: &Path) -> Result<Run<T>> {
        self.validate()?;
        let system = builtin_system::<T>(
            &self.system.name,
            self.system.preset.as_deref(),
            &self.system.params,
        )
        .map_err(|e| match e {
            Error::Usage(m) => Error::config(format!("system.name: {m}")),
            other => other,
        })?;
        let d = self.domain.len();
        if system.dim() != d {
            return Err(Error::config(format!(
                "domain: {} is {}-dimensional, domain has {d} intervals",
                system.name(),
                system.dim()
            )));
        }
        if self.controls.len() != system.control_dim() {
            return Err(Error::config(format!(
                "controls: {} has {} control dimensions, got {} counts",
                system.name(),
                system.control_dim(),
                self.controls.len()
            )));
        }
        let grid = Grid::new(
            self.domain.iter().map(|&[lo, hi]| (T::of(lo), T::of(hi))).collect(),
            self.grid.clone(),
        )
        .map_err(|e| Error::config(format!("domain/grid: {e}")))?;
        let target = self.target.build(base, "target")?;
        Ok(Run {
            system,
            target,
            grid,
            query: SetQuery {
                kind: self.query.kind.parse()?,
                horizon: T::of(self.query.horizon),
            },
            dt: T::of(self.dt),
            controls: self.controls.clone(),
            recursions: self.recursions,
            output: base.join(&self.output),
        })
    }
}

fn check_intervals(key: &str, bounds: &[[f64; 2]], strict: bool) -> Result<()> {
    for (i, &[lo, hi]) in bounds.iter().enumerate() {
        let ok = lo.is_finite() && hi.is_finite() && if strict { lo < hi } else { lo <= hi };
        if !ok {
            return Err(Error::config(format!(
                "{key}[{i}]: invalid interval [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

impl TargetSpec {
    fn validate(&self, key: &str, dim: usize) -> Result<()> {
        match self {
            TargetSpec::Box { bounds } => {
                if bounds.len() != dim {
                    return Err(Error::config(format!(
                        "{key}.bounds: {} intervals for a {dim}-dimensional domain",
                        bounds.len()
                    )));
                }
                check_intervals(&format!("{key}.bounds"), bounds, false)
            }
            TargetSpec::Voxel { mask_file } => {
                if mask_file.trim().is_empty() {
                    return Err(Error::config(format!("{key}.mask_file: empty path")));
                }
                Ok(())
            }
            TargetSpec::Cells {
                bounds,
                cells,
                marked,
            } => {
                if bounds.len() != dim || cells.len() != dim {
                    return Err(Error::config(format!(
                        "{key}: bounds and cells must both have {dim} entries"
                    )));
                }
                check_intervals(&format!("{key}.bounds"), bounds, true)?;
                if let Some(i) = cells.iter().position(|&n| n == 0) {
                    return Err(Error::config(format!("{key}.cells[{i}]: must be positive")));
                }
                for (j, m) in marked.iter().enumerate() {
                    let ok = m.len() == dim && m.iter().zip(cells).all(|(&i, &n)| i < n);
                    if !ok {
                        return Err(Error::config(format!(
                            "{key}.marked[{j}]: {m:?} is not a cell index within {cells:?}"
                        )));
                    }
                }
                Ok(())
            }
            TargetSpec::Union { members } => members
                .iter()
                .enumerate()
                .try_for_each(|(i, m)| m.validate(&format!("{key}.members[{i}]"), dim)),
            TargetSpec::Complement { inner } => inner.validate(&format!("{key}.inner"), dim),
        }
    }

    fn build<T: Scalar>(&self, base: &Path, key: &str) -> Result<TargetSet<T>> {
        let bounds_of =
            |b: &[[f64; 2]]| -> Vec<(T, T)> { b.iter().map(|&[lo, hi]| (T::of(lo), T::of(hi))).collect() };
        match self {
            TargetSpec::Box { bounds } => TargetSet::boxed(bounds_of(bounds)),
            TargetSpec::Voxel { mask_file } => {
                let path = base.join(mask_file);
                let mask = VoxelMask::load(&path).map_err(|e| {
                    Error::config(format!("{key}.mask_file: {}: {e}", path.display()))
                })?;
                Ok(TargetSet::voxel(mask))
            }
            TargetSpec::Cells {
                bounds,
                cells,
                marked,
            } => voxel_from_cells(bounds_of(bounds), cells.clone(), marked),
            TargetSpec::Union { members } => TargetSet::union(
                members
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.build(base, &format!("{key}.members[{i}]")))
                    .collect::<Result<_>>()?,
            ),
            TargetSpec::Complement { inner } => {
                Ok(inner.build(base, &format!("{key}.inner"))?.complement())
            }
        }
        .map_err(|e| match e {
            Error::Usage(m) => Error::config(format!("{key}: {m}")),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LONGITUDINAL: &str = r#"
output = "runs/lon"
dt = 0.01
domain = [[-0.4, 0.4], [-0.75, 0.75], [-0.75, 0.75]]
grid = [101, 101, 101]
controls = [5]

[system]
name = "longitudinal_flight"
preset = "table1"

[target]
variant = "box"
bounds = [[-0.05, 0.05], [-0.1, 0.1], [-0.1, 0.1]]

[query]
kind = "max_reach"
horizon = 1.0
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = RunConfig::parse(LONGITUDINAL).unwrap();
        let run = cfg.build::<f64>(Path::new("/tmp")).unwrap();
        assert_eq!(run.grid.dims(), &[101, 101, 101]);
        let sc = run.solve_config();
        assert_eq!(sc.recursions, 101);
        assert_eq!(sc.mode, crate::grid::Mode::Minimize);
        assert_eq!(run.output, Path::new("/tmp/runs/lon"));
    }

    #[test]
    fn round_trip_through_toml() {
        let cfg = RunConfig::parse(LONGITUDINAL).unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    fn expect_config_error(text: &str, needle: &str) {
        let err = RunConfig::parse(text)
            .and_then(|c| c.build::<f64>(Path::new(".")).map(|_| ()))
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        assert!(err.to_string().contains(needle), "{err} lacks {needle}");
    }

    #[test]
    fn errors_name_the_key() {
        expect_config_error(&LONGITUDINAL.replace("dt = 0.01", "dt = -1.0"), "dt");
        expect_config_error(&LONGITUDINAL.replace("dt = 0.01\n", ""), "dt");
        expect_config_error(&LONGITUDINAL.replace("[101, 101, 101]", "[101, 101]"), "grid");
        expect_config_error(&LONGITUDINAL.replace("max_reach", "reach"), "query.kind");
        expect_config_error(&LONGITUDINAL.replace("controls = [5]", "controls = [5, 5]"), "controls");
        expect_config_error(&LONGITUDINAL.replace("preset = \"table1\"", ""), "airspeed");
        expect_config_error(
            &LONGITUDINAL.replace("[-0.05, 0.05], [-0.1, 0.1], [-0.1, 0.1]", "[-0.05, 0.05]"),
            "target.bounds",
        );
        expect_config_error(
            &LONGITUDINAL.replace("horizon = 1.0", "horizon = 1.0\nextra = 3"),
            "extra",
        );
        expect_config_error(
            &LONGITUDINAL.replace("longitudinal_flight", "blimp"),
            "system.name",
        );
    }

    #[test]
    fn zero_recursions_allowed() {
        let cfg = RunConfig::parse(&LONGITUDINAL.replace("controls = [5]", "controls = [5]\nrecursions = 0")).unwrap();
        assert_eq!(cfg.recursions, Some(0));
        let run = cfg.build::<f64>(Path::new(".")).unwrap();
        assert_eq!(run.solve_config().recursions, 0);
    }

    #[test]
    fn nested_targets() {
        let text = LONGITUDINAL.replace(
            "[target]\nvariant = \"box\"\nbounds = [[-0.05, 0.05], [-0.1, 0.1], [-0.1, 0.1]]",
            r#"[target]
variant = "complement"
[target.inner]
variant = "union"
[[target.inner.members]]
variant = "box"
bounds = [[-0.05, 0.05], [-0.1, 0.1], [-0.1, 0.1]]
[[target.inner.members]]
variant = "cells"
bounds = [[0.0, 0.4], [0.0, 0.75], [0.0, 0.75]]
cells = [2, 2, 2]
marked = [[1, 1, 1]]"#,
        );
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
        let run = cfg.build::<f64>(Path::new(".")).unwrap();
        assert!(!run.target.contains(&[0.0, 0.0, 0.0]).unwrap());
        assert!(!run.target.contains(&[0.3, 0.5, 0.5]).unwrap());
        assert!(run.target.contains(&[0.3, -0.5, 0.5]).unwrap());
    }

    proptest! {
        #[test]
        fn hash_tracks_every_field(dt in 0.001..0.1f64, horizon in 0.0..2.0f64, n in 2usize..200) {
            let base = RunConfig::parse(LONGITUDINAL).unwrap();
            let mut changed = base.clone();
            changed.dt = dt;
            changed.query.horizon = horizon;
            changed.grid[1] = n;
            prop_assert_eq!(changed == base, changed.hash() == base.hash());
            let again = RunConfig::parse(&changed.to_toml()).unwrap();
            prop_assert_eq!(&again, &changed);
            prop_assert_eq!(again.hash(), changed.hash());
        }
    }
}
