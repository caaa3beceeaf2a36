//! Cartesian grids, value fields and multilinear interpolation.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solver::QueryKind;

/// Regular lattice of `dims[i]` nodes over the box `bounds`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T: Scalar> {
    bounds: Vec<(T, T)>,
    dims: Vec<usize>,
    spacing: Vec<T>,
    strides: Vec<usize>,
    // Distance in cell units under which a query snaps onto a node.
    snap: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    pub fn new(bounds: Vec<(T, T)>, dims: Vec<usize>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != dims.len() {
            return Err(Error::usage(format!(
                "grid needs one node count per bound, got {} bounds and {} counts",
                bounds.len(),
                dims.len()
            )));
        }
        for (i, (&(lo, hi), &n)) in bounds.iter().zip(&dims).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(Error::usage(format!(
                    "grid dimension {i}: need finite lo < hi, got [{lo}, {hi}]"
                )));
            }
            if n < 2 {
                return Err(Error::usage(format!(
                    "grid dimension {i}: need at least 2 nodes, got {n}"
                )));
            }
        }
        let spacing: Vec<T> = bounds
            .iter()
            .zip(&dims)
            .map(|(&(lo, hi), &n)| (hi - lo) / T::of((n - 1) as f64))
            .collect();
        let mut strides = vec![1; dims.len()];
        for d in (0..dims.len() - 1).rev() {
            strides[d] = strides[d + 1] * dims[d + 1];
        }
        let snap = bounds
            .iter()
            .zip(&spacing)
            .map(|(&(lo, hi), &h)| T::of(64.0) * T::epsilon() * (T::one() + lo.abs().max(hi.abs()) / h))
            .collect();
        Ok(Self {
            bounds,
            dims,
            spacing,
            strides,
            snap,
        })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `i` along axis `d`; the last node is the upper bound exactly.
    #[inline]
    pub fn axis_coordinate(&self, d: usize, i: usize) -> T {
        if i + 1 == self.dims[d] {
            self.bounds[d].1
        } else {
            self.bounds[d].0 + T::of(i as f64) * self.spacing[d]
        }
    }

    pub fn node_coordinate(&self, idx: &[usize]) -> Result<Vec<T>> {
        self.flatten(idx)?;
        Ok(idx
            .iter()
            .enumerate()
            .map(|(d, &i)| self.axis_coordinate(d, i))
            .collect())
    }

    /// Coordinate of the node with row-major index `flat`.
    pub fn coordinate_into(&self, flat: usize, out: &mut [T]) {
        let mut rem = flat;
        for d in 0..self.dim() {
            let i = rem / self.strides[d];
            rem %= self.strides[d];
            out[d] = self.axis_coordinate(d, i);
        }
    }

    pub fn flatten(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.dim() {
            return Err(Error::usage(format!(
                "index has {} components, grid is {}-dimensional",
                idx.len(),
                self.dim()
            )));
        }
        let mut flat = 0;
        for (d, &i) in idx.iter().enumerate() {
            if i >= self.dims[d] {
                return Err(Error::usage(format!(
                    "node index {i} out of range 0..{} in dimension {d}",
                    self.dims[d]
                )));
            }
            flat += i * self.strides[d];
        }
        Ok(flat)
    }

    pub fn unflatten(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        self.strides
            .iter()
            .map(|&s| {
                let i = rem / s;
                rem %= s;
                i
            })
            .collect()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Lower corner index and fractional offset of the cell containing `x`
    /// along axis `d`, after clamping into the domain.
    #[inline]
    fn locate(&self, d: usize, x: T) -> (usize, T, bool) {
        let (lo, hi) = self.bounds[d];
        let clamped = !(lo <= x && x <= hi);
        let x = if x < lo {
            lo
        } else if x > hi || x.is_nan() {
            hi
        } else {
            x
        };
        let mut pos = (x - lo) / self.spacing[d];
        let r = pos.round();
        if (pos - r).abs() <= self.snap[d] {
            pos = r;
        }
        let last = self.dims[d] - 2;
        let cell = pos.floor().to_usize().unwrap_or(0).min(last);
        let t = (pos - T::of(cell as f64)).max(T::zero()).min(T::one());
        (cell, t, clamped)
    }

    /// Row-major index of the lower corner of the cell containing `s`.
    pub fn containing_cell(&self, s: &[T]) -> Vec<usize> {
        (0..self.dim()).map(|d| self.locate(d, s[d]).0).collect()
    }
}

/// Whether a value function maximizes or minimizes over controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Minimize,
    Maximize,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Minimize => "minimize",
            Mode::Maximize => "maximize",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimize" => Ok(Mode::Minimize),
            "maximize" => Ok(Mode::Maximize),
            other => Err(Error::usage(format!(
                "mode must be minimize or maximize, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// Scratch space for repeated interpolation on one grid.
#[derive(Debug, Clone)]
pub struct Interpolator<T> {
    corners: Vec<T>,
    cell: Vec<(usize, T)>,
}

impl<T: Scalar> Interpolator<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            corners: vec![T::zero(); 1 << dim],
            cell: vec![(0, T::zero()); dim],
        }
    }

    /// d-linear interpolation of `values` on `grid` at `s`, clamped into the domain.
    ///
    /// Returns the value and whether clamping was needed. Corners are blended
    /// pairwise as `a (1 - t) + b t`, last axis first, which is exact at nodes
    /// and monotone in the stored values. Equal corners pass through
    /// unchanged, so plateaus (e.g. saturated regions) stay exact.
    pub fn eval(&mut self, grid: &Grid<T>, values: &[T], s: &[T]) -> (T, bool) {
        let d = grid.dim();
        let mut base = 0;
        let mut clamped = false;
        for axis in 0..d {
            let (i, t, c) = grid.locate(axis, s[axis]);
            clamped |= c;
            base += i * grid.strides[axis];
            self.cell[axis] = (i, t);
        }
        let n = 1usize << d;
        for c in 0..n {
            let mut offset = base;
            for axis in 0..d {
                if c >> (d - 1 - axis) & 1 == 1 {
                    offset += grid.strides[axis];
                }
            }
            self.corners[c] = values[offset];
        }
        let mut len = n;
        for axis in (0..d).rev() {
            let t = self.cell[axis].1;
            let u = T::one() - t;
            len /= 2;
            for c in 0..len {
                let (a, b) = (self.corners[2 * c], self.corners[2 * c + 1]);
                self.corners[c] = if a == b { a } else { a * u + b * t };
            }
        }
        (self.corners[0], clamped)
    }
}

/// Scalar per grid node plus the recursion metadata that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField<T: Scalar> {
    grid: Grid<T>,
    values: Vec<T>,
    mode: Mode,
    dt: T,
    k: usize,
    kind: Option<QueryKind>,
}

impl<T: Scalar> ValueField<T> {
    pub fn zeros(grid: Grid<T>, mode: Mode, dt: T) -> Self {
        let values = vec![T::zero(); grid.len()];
        Self {
            grid,
            values,
            mode,
            dt,
            k: 0,
            kind: None,
        }
    }

    pub fn from_parts(grid: Grid<T>, values: Vec<T>, mode: Mode, dt: T, k: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::usage(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::usage(format!("value at node {i} is not finite")));
        }
        if !(dt > T::zero()) {
            return Err(Error::usage(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            grid,
            values,
            mode,
            dt,
            k,
            kind: None,
        })
    }

    pub(crate) fn with_values(&self, values: Vec<T>) -> Self {
        Self {
            grid: self.grid.clone(),
            values,
            mode: self.mode,
            dt: self.dt,
            k: self.k + 1,
            kind: self.kind,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Accumulated horizon `k * dt`, the saturation value.
    pub fn horizon(&self) -> T {
        T::of(self.k as f64) * self.dt
    }

    /// The set query this field was solved for, if recorded.
    pub fn kind(&self) -> Option<QueryKind> {
        self.kind
    }

    pub fn set_kind(&mut self, kind: Option<QueryKind>) {
        self.kind = kind;
    }

    pub fn interpolate(&self, s: &[T]) -> Result<T> {
        if s.len() != self.grid.dim() {
            return Err(Error::usage(format!(
                "state has {} components, field is {}-dimensional",
                s.len(),
                self.grid.dim()
            )));
        }
        Ok(Interpolator::new(self.grid.dim()).eval(&self.grid, &self.values, s).0)
    }

    pub fn value_at(&self, idx: &[usize]) -> Result<T> {
        Ok(self.values[self.grid.flatten(idx)?])
    }

    pub fn level_mask(&self, threshold: T, relation: Relation) -> Vec<bool> {
        self.values
            .iter()
            .map(|&v| match relation {
                Relation::AtMost => v <= threshold,
                Relation::AtLeast => v >= threshold,
            })
            .collect()
    }

    /// Header lines followed by raw little-endian `f64` values in storage order.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "reachkit value-field v1")?;
        write!(w, "dims")?;
        for n in self.grid.dims() {
            write!(w, " {n}")?;
        }
        write!(w, "\nbounds")?;
        for (lo, hi) in self.grid.bounds() {
            write!(w, " {} {}", lo.as_f64(), hi.as_f64())?;
        }
        writeln!(w, "\norder row-major-last-fastest")?;
        writeln!(w, "mode {}", self.mode)?;
        writeln!(
            w,
            "kind {}",
            self.kind.map_or("none", |k| k.as_str())
        )?;
        writeln!(w, "dt {}", self.dt.as_f64())?;
        writeln!(w, "k {}", self.k)?;
        writeln!(w, "data f64le {}", self.values.len())?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<Self> {
        let mut next = |key: &str| -> Result<Vec<String>> {
            let mut line = String::new();
            r.read_line(&mut line)?;
            let mut parts = line.split_whitespace().map(str::to_owned);
            match parts.next() {
                Some(k) if k == key => Ok(parts.collect()),
                _ => Err(Error::format(format!(
                    "value field: expected `{key}` line, found {:?}",
                    line.trim_end()
                ))),
            }
        };
        let magic = next("reachkit")?;
        if magic != ["value-field", "v1"] {
            return Err(Error::format("value field: unsupported version"));
        }
        let dims = parse_all::<usize>(&next("dims")?, "dims")?;
        let raw = parse_all::<f64>(&next("bounds")?, "bounds")?;
        if raw.len() != 2 * dims.len() {
            return Err(Error::format("value field: bounds do not match dims"));
        }
        if next("order")? != ["row-major-last-fastest"] {
            return Err(Error::format("value field: unsupported storage order"));
        }
        let mode: Mode = single(&next("mode")?, "mode")?.parse()?;
        let kind = match single(&next("kind")?, "kind")?.as_str() {
            "none" => None,
            other => Some(other.parse::<QueryKind>()?),
        };
        let dt: f64 = parse_one(&next("dt")?, "dt")?;
        let k: usize = parse_one(&next("k")?, "k")?;
        let data = next("data")?;
        if data.len() != 2 || data[0] != "f64le" {
            return Err(Error::format("value field: expected `data f64le <count>`"));
        }
        let count: usize = data[1]
            .parse()
            .map_err(|_| Error::format("value field: bad value count"))?;
        let bounds = raw.chunks(2).map(|p| (T::of(p[0]), T::of(p[1]))).collect();
        let grid = Grid::new(bounds, dims).map_err(|e| Error::format(e.to_string()))?;
        if count != grid.len() {
            return Err(Error::format(format!(
                "value field: {count} values for {} nodes",
                grid.len()
            )));
        }
        let mut bytes = vec![0u8; 8 * count];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::format("value field: truncated data"))?;
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(Error::format("value field: trailing bytes after data"));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|b| T::of(f64::from_le_bytes(b.try_into().unwrap())))
            .collect();
        let mut field = Self::from_parts(grid, values, mode, T::of(dt), k)
            .map_err(|e| Error::format(e.to_string()))?;
        field.kind = kind;
        Ok(field)
    }

    /// Writes the file atomically: readers never observe a partial field.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        {
            let mut w = std::io::BufWriter::new(tmp.as_file_mut());
            self.write_to(&mut w)?;
            w.flush()?;
        }
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(&mut std::io::BufReader::new(file))
    }
}

fn parse_all<P: FromStr>(tokens: &[String], key: &str) -> Result<Vec<P>> {
    tokens
        .iter()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::format(format!("value field: bad {key} entry {t:?}")))
        })
        .collect()
}

fn single(tokens: &[String], key: &str) -> Result<String> {
    match tokens {
        [one] => Ok(one.clone()),
        _ => Err(Error::format(format!("value field: `{key}` takes one value"))),
    }
}

fn parse_one<P: FromStr>(tokens: &[String], key: &str) -> Result<P> {
    single(tokens, key)?
        .parse()
        .map_err(|_| Error::format(format!("value field: bad {key}")))
}

pub fn node_coordinate<T: Scalar>(grid: &Grid<T>, idx: &[usize]) -> Result<Vec<T>> {
    grid.node_coordinate(idx)
}

/// Clamped d-linear interpolation of the field at `s`.
pub fn interpolate<T: Scalar>(field: &ValueField<T>, s: &[T]) -> Result<T> {
    field.interpolate(s)
}

/// Per-node `value <= threshold` or `value >= threshold`.
pub fn level_mask<T: Scalar>(field: &ValueField<T>, threshold: T, relation: Relation) -> Vec<bool> {
    field.level_mask(threshold, relation)
}
