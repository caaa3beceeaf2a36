//! Target sets as membership oracles.
//!
//! A target only has to answer "is this state in K?". Boxes, unions,
//! complements and voxel masks cover the regular and irregular shapes used
//! in practice without needing a signed distance function.
//!
//! Complements are taken over the whole state space. Anything derived from
//! them on a grid is of course only meaningful inside the grid's domain.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub enum TargetSet<T: Scalar> {
    /// Closed axis-aligned box, one `(lo, hi)` per dimension. Faces are
    /// widened by a few ulps of the bounds so that grid nodes and Euler
    /// steps meant to land on a face are not pushed off it by rounding.
    Box(Vec<(T, T)>),
    Union(Vec<TargetSet<T>>),
    Voxel(Arc<VoxelMask<T>>),
    Complement(std::boxed::Box<TargetSet<T>>),
}

impl<T: Scalar> TargetSet<T> {
    pub fn boxed(bounds: Vec<(T, T)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::usage("box target needs at least one dimension"));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::usage(format!(
                    "box target dimension {i}: need finite lo <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(TargetSet::Box(bounds))
    }

    pub fn union(members: Vec<TargetSet<T>>) -> Result<Self> {
        let dims: Vec<usize> = members.iter().filter_map(|m| m.dim()).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::usage(format!(
                "union members disagree on dimension: {dims:?}"
            )));
        }
        Ok(TargetSet::Union(members))
    }

    pub fn voxel(mask: VoxelMask<T>) -> Self {
        TargetSet::Voxel(Arc::new(mask))
    }

    /// State dimension, or `None` for an empty union (which accepts any dimension).
    pub fn dim(&self) -> Option<usize> {
        match self {
            TargetSet::Box(b) => Some(b.len()),
            TargetSet::Union(m) => m.iter().find_map(|t| t.dim()),
            TargetSet::Voxel(v) => Some(v.dim()),
            TargetSet::Complement(inner) => inner.dim(),
        }
    }

    pub fn contains(&self, s: &[T]) -> Result<bool> {
        if let Some(d) = self.dim() {
            if d != s.len() {
                return Err(Error::usage(format!(
                    "target is {d}-dimensional but state has {} components",
                    s.len()
                )));
            }
        }
        Ok(self.contains_unchecked(s))
    }

    /// Membership without the dimension check; used in the solver's inner loop.
    pub fn contains_unchecked(&self, s: &[T]) -> bool {
        match self {
            TargetSet::Box(b) => b.iter().zip(s).all(|(&(lo, hi), &x)| {
                let slack = T::epsilon() * T::of(8.0) * lo.abs().max(hi.abs());
                lo - slack <= x && x <= hi + slack
            }),
            TargetSet::Union(m) => m.iter().any(|t| t.contains_unchecked(s)),
            TargetSet::Voxel(v) => v.contains(s),
            TargetSet::Complement(inner) => !inner.contains_unchecked(s),
        }
    }

    /// Complement over the whole state space.
    pub fn complement(self) -> Self {
        TargetSet::Complement(std::boxed::Box::new(self))
    }
}

/// Membership oracle for the complement of `target`.
pub fn complement_within<T: Scalar>(target: TargetSet<T>) -> TargetSet<T> {
    target.complement()
}

/// Irregular target made of marked cells of a regular partition.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMask<T: Scalar> {
    bounds: Vec<(T, T)>,
    cells_per_dim: Vec<usize>,
    /// Row-major, last dimension fastest.
    bits: Vec<bool>,
}

impl<T: Scalar> VoxelMask<T> {
    pub fn new(bounds: Vec<(T, T)>, cells_per_dim: Vec<usize>, bits: Vec<bool>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != cells_per_dim.len() {
            return Err(Error::usage(format!(
                "voxel mask: {} bounds for {} cell counts",
                bounds.len(),
                cells_per_dim.len()
            )));
        }
        if let Some(i) = cells_per_dim.iter().position(|&n| n == 0) {
            return Err(Error::usage(format!("voxel mask: zero cells in dimension {i}")));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(Error::usage(format!(
                    "voxel mask dimension {i}: need finite lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        let total: usize = cells_per_dim.iter().product();
        if bits.len() != total {
            return Err(Error::usage(format!(
                "voxel mask: {} bits for {total} cells",
                bits.len()
            )));
        }
        Ok(Self {
            bounds,
            cells_per_dim,
            bits,
        })
    }

    pub fn empty(bounds: Vec<(T, T)>, cells_per_dim: Vec<usize>) -> Result<Self> {
        let total = cells_per_dim.iter().product();
        Self::new(bounds, cells_per_dim, vec![false; total])
    }

    /// Marks every cell whose center satisfies `pred`.
    pub fn from_centers(
        bounds: Vec<(T, T)>,
        cells_per_dim: Vec<usize>,
        mut pred: impl FnMut(&[T]) -> bool,
    ) -> Result<Self> {
        let mut mask = Self::empty(bounds, cells_per_dim)?;
        let mut idx = vec![0usize; mask.dim()];
        let mut center = vec![T::zero(); mask.dim()];
        for flat in 0..mask.bits.len() {
            mask.unflatten(flat, &mut idx);
            for (d, c) in center.iter_mut().enumerate() {
                let (lo, w) = (mask.bounds[d].0, mask.cell_width(d));
                *c = lo + (T::of(idx[d] as f64) + T::of(0.5)) * w;
            }
            mask.bits[flat] = pred(&center);
        }
        Ok(mask)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    pub fn cells_per_dim(&self) -> &[usize] {
        &self.cells_per_dim
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn marked_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    fn cell_width(&self, d: usize) -> T {
        let (lo, hi) = self.bounds[d];
        (hi - lo) / T::of(self.cells_per_dim[d] as f64)
    }

    pub fn flatten(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.dim() {
            return Err(Error::usage(format!(
                "cell index has {} components, mask is {}-dimensional",
                idx.len(),
                self.dim()
            )));
        }
        let mut flat = 0;
        for (d, (&i, &n)) in idx.iter().zip(&self.cells_per_dim).enumerate() {
            if i >= n {
                return Err(Error::usage(format!(
                    "cell index {i} out of range 0..{n} in dimension {d}"
                )));
            }
            flat = flat * n + i;
        }
        Ok(flat)
    }

    fn unflatten(&self, mut flat: usize, idx: &mut [usize]) {
        for d in (0..self.dim()).rev() {
            let n = self.cells_per_dim[d];
            idx[d] = flat % n;
            flat /= n;
        }
    }

    /// Flat index of the cell containing `s`, or `None` outside the bounds.
    ///
    /// Cells are half-open `[lo + i w, lo + (i + 1) w)`, the last one closed above.
    pub fn cell_of(&self, s: &[T]) -> Option<usize> {
        let mut flat = 0;
        for (d, &x) in s.iter().enumerate() {
            let (lo, hi) = self.bounds[d];
            if !(lo <= x && x <= hi) {
                return None;
            }
            let n = self.cells_per_dim[d];
            let w = self.cell_width(d);
            let mut i = ((x - lo) / w).floor().to_usize().unwrap_or(0).min(n - 1);
            // Settle rounding so the answer matches the interval definition.
            if i > 0 && x < lo + T::of(i as f64) * w {
                i -= 1;
            } else if i + 1 < n && x >= lo + T::of((i + 1) as f64) * w {
                i += 1;
            }
            flat = flat * n + i;
        }
        Some(flat)
    }

    pub fn contains(&self, s: &[T]) -> bool {
        s.len() == self.dim() && self.cell_of(s).is_some_and(|c| self.bits[c])
    }

    /// Text form: `dims ...`, `bounds ...`, then one 0/1 line per hyper-row.
    pub fn to_text(&self) -> String {
        let mut out = String::from("dims");
        for n in &self.cells_per_dim {
            write!(out, " {n}").unwrap();
        }
        out.push_str("\nbounds");
        for (lo, hi) in &self.bounds {
            write!(out, " {lo} {hi}").unwrap();
        }
        out.push('\n');
        let row = *self.cells_per_dim.last().unwrap();
        for chunk in self.bits.chunks(row) {
            out.extend(chunk.iter().map(|&b| if b { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let dims_line = lines
            .next()
            .ok_or_else(|| Error::format("voxel mask: missing dims line"))?;
        let cells: Vec<usize> = header_values(dims_line, "dims")?
            .iter()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::format(format!("voxel mask: bad cell count {t:?}")))
            })
            .collect::<Result<_>>()?;
        let bounds_line = lines
            .next()
            .ok_or_else(|| Error::format("voxel mask: missing bounds line"))?;
        let raw: Vec<T> = header_values(bounds_line, "bounds")?
            .iter()
            .map(|t| {
                t.parse::<T>()
                    .map_err(|_| Error::format(format!("voxel mask: bad bound {t:?}")))
            })
            .collect::<Result<_>>()?;
        if raw.len() != 2 * cells.len() {
            return Err(Error::format(format!(
                "voxel mask: {} bound values for {} dimensions",
                raw.len(),
                cells.len()
            )));
        }
        let bounds = raw.chunks(2).map(|p| (p[0], p[1])).collect();
        let row = *cells
            .last()
            .ok_or_else(|| Error::format("voxel mask: no dimensions"))?;
        let mut bits = Vec::with_capacity(cells.iter().product());
        for (ln, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line = line.trim();
            if line.len() != row {
                return Err(Error::format(format!(
                    "voxel mask row {ln}: expected {row} cells, found {}",
                    line.len()
                )));
            }
            for ch in line.chars() {
                bits.push(match ch {
                    '0' => false,
                    '1' => true,
                    other => {
                        return Err(Error::format(format!(
                            "voxel mask row {ln}: unexpected character {other:?}"
                        )))
                    }
                });
            }
        }
        Self::new(bounds, cells, bits).map_err(|e| Error::format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn header_values<'a>(line: &'a str, key: &str) -> Result<Vec<&'a str>> {
    let mut it = line.split_whitespace();
    match it.next() {
        Some(k) if k == key => Ok(it.collect()),
        _ => Err(Error::format(format!("expected a `{key}` line, found {line:?}"))),
    }
}

/// Voxel target with exactly the listed cells marked.
pub fn voxel_from_cells<T: Scalar>(
    bounds: Vec<(T, T)>,
    cells_per_dim: Vec<usize>,
    marked_cells: &[Vec<usize>],
) -> Result<TargetSet<T>> {
    let mut mask = VoxelMask::empty(bounds, cells_per_dim)?;
    for cell in marked_cells {
        let flat = mask.flatten(cell)?;
        mask.bits[flat] = true;
    }
    Ok(TargetSet::voxel(mask))
}
