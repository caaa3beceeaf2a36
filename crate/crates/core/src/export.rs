//! Field export for plotting: legacy VTK and 2-D CSV slices.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::ValueField;
use crate::scalar::Scalar;

/// Legacy ASCII `STRUCTURED_POINTS` dataset (first axis fastest, as VTK
/// expects). Fields of fewer than three dimensions are padded with
/// singleton axes.
pub fn write_vtk<T: Scalar>(field: &ValueField<T>, w: &mut (impl Write + ?Sized)) -> Result<()> {
    let grid = field.grid();
    let d = grid.dim();
    if d > 3 {
        return Err(Error::usage(format!(
            "VTK export supports up to 3 dimensions, field has {d}"
        )));
    }
    let mut dims = [1usize; 3];
    let mut origin = [0.0f64; 3];
    let mut spacing = [1.0f64; 3];
    for a in 0..d {
        dims[a] = grid.dims()[a];
        origin[a] = grid.bounds()[a].0.as_f64();
        spacing[a] = grid.spacing()[a].as_f64();
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "reachkit value field mode={} k={} dt={:?}", field.mode(), field.k(), field.dt().as_f64())?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2])?;
    writeln!(w, "ORIGIN {:?} {:?} {:?}", origin[0], origin[1], origin[2])?;
    writeln!(w, "SPACING {:?} {:?} {:?}", spacing[0], spacing[1], spacing[2])?;
    writeln!(w, "POINT_DATA {}", grid.len())?;
    writeln!(w, "SCALARS value double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    let strides = grid.strides();
    let values = field.values();
    let mut idx = [0usize; 3];
    for _ in 0..grid.len() {
        let flat: usize = (0..d).map(|a| idx[a] * strides[a]).sum();
        writeln!(w, "{:?}", values[flat].as_f64())?;
        for a in 0..3 {
            idx[a] += 1;
            if idx[a] < dims[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(())
}

/// `x,y,value` rows of a 2-D field, or of the slice `axis = index` of a
/// 3-D field. Rows follow storage order, the second free axis fastest.
pub fn write_csv_slice<T: Scalar>(
    field: &ValueField<T>,
    slice: Option<(usize, usize)>,
    w: &mut (impl Write + ?Sized),
) -> Result<()> {
    let grid = field.grid();
    let d = grid.dim();
    let free: Vec<usize> = match (d, slice) {
        (2, None) => vec![0, 1],
        (3, Some((axis, index))) => {
            if axis >= 3 {
                return Err(Error::usage(format!("slice axis {axis} out of range 0..3")));
            }
            if index >= grid.dims()[axis] {
                return Err(Error::usage(format!(
                    "slice index {index} out of range 0..{} on axis {axis}",
                    grid.dims()[axis]
                )));
            }
            (0..3).filter(|&a| a != axis).collect()
        }
        (2, Some(_)) => return Err(Error::usage("a 2-D field takes no slice axis")),
        (3, None) => return Err(Error::usage("a 3-D field needs a slice axis and index")),
        _ => {
            return Err(Error::usage(format!(
                "CSV slices need a 2-D or 3-D field, got {d} dimensions"
            )))
        }
    };
    let mut idx = vec![0usize; d];
    if let Some((axis, index)) = slice {
        idx[axis] = index;
    }
    writeln!(w, "x,y,value")?;
    for i in 0..grid.dims()[free[0]] {
        idx[free[0]] = i;
        for j in 0..grid.dims()[free[1]] {
            idx[free[1]] = j;
            let flat = grid.flatten(&idx)?;
            writeln!(
                w,
                "{:?},{:?},{:?}",
                grid.axis_coordinate(free[0], i).as_f64(),
                grid.axis_coordinate(free[1], j).as_f64(),
                field.values()[flat].as_f64()
            )?;
        }
    }
    Ok(())
}

/// Reads back the rows written by [`write_csv_slice`].
pub fn parse_csv_slice(text: &str) -> Result<Vec<[f64; 3]>> {
    let mut lines = text.lines();
    if lines.next() != Some("x,y,value") {
        return Err(Error::format("CSV slice must start with an `x,y,value` header"));
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(format!("row {}: {e}", n + 1)))?;
            <[f64; 3]>::try_from(cols)
                .map_err(|c| Error::format(format!("row {}: expected 3 columns, got {}", n + 1, c.len())))
        })
        .collect()
}
