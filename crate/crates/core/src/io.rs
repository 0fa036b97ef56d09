//! CSV dumps of grid fields: a header row, then one line per node
//! `i,j,x,y,<components...>`, ordered by `i` and then by `j`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geometry::{GeometryModel, Point2};
use crate::grid::{Grid2, OneFormField, ScalarField, SymTensorField};

fn write_rows<W: Write>(
    out: W,
    grid: &Grid2,
    names: &[&str],
    comp: impl Fn(usize, usize) -> Vec<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["i", "j", "x", "y"];
    header.extend_from_slice(names);
    w.write_record(&header)?;
    for (i, j) in grid.nodes() {
        let p = grid.point(i, j);
        let mut rec = vec![i.to_string(), j.to_string(), p.x.to_string(), p.y.to_string()];
        rec.extend(comp(i, j).into_iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

pub fn write_scalar<W: Write>(out: W, f: &ScalarField) -> Result<()> {
    write_rows(out, &f.grid, &["value"], |i, j| vec![f.values[[i, j]]])
}

pub fn write_one_form<W: Write>(out: W, a: &OneFormField) -> Result<()> {
    write_rows(out, &a.grid, &["a1", "a2"], |i, j| vec![a.a1[[i, j]], a.a2[[i, j]]])
}

pub fn write_tensor<W: Write>(out: W, s: &SymTensorField) -> Result<()> {
    write_rows(out, &s.grid, &["s11", "s12", "s22"], |i, j| {
        vec![s.s11[[i, j]], s.s12[[i, j]], s.s22[[i, j]]]
    })
}

/// Read a scalar field written by [`write_scalar`]. The grid geometry is
/// recovered from the node coordinates; the model is supplied by the caller.
pub fn read_scalar<R: Read>(input: R, model: GeometryModel) -> Result<ScalarField> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() != 5 || &headers[0] != "i" || &headers[1] != "j" {
        return Err(Error::Csv(format!("unexpected scalar header {headers:?}")));
    }
    let mut rows: Vec<(usize, usize, f64, f64, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse_f = |k: usize| -> Result<f64> {
            rec[k].trim().parse::<f64>().map_err(|e| Error::Csv(format!("column {k}: {e}")))
        };
        let parse_u = |k: usize| -> Result<usize> {
            rec[k].trim().parse::<usize>().map_err(|e| Error::Csv(format!("column {k}: {e}")))
        };
        rows.push((parse_u(0)?, parse_u(1)?, parse_f(2)?, parse_f(3)?, parse_f(4)?));
    }
    let nx = rows.iter().map(|r| r.0).max().map_or(0, |m| m + 1);
    let ny = rows.iter().map(|r| r.1).max().map_or(0, |m| m + 1);
    if rows.len() != nx * ny {
        return Err(Error::Csv(format!("expected {} rows for a {nx}x{ny} grid, got {}", nx * ny, rows.len())));
    }
    let mut coords = vec![None; nx * ny];
    for &(i, j, x, y, v) in &rows {
        coords[i * ny + j] = Some((x, y, v));
    }
    let at = |i: usize, j: usize| coords[i * ny + j].ok_or_else(|| Error::Csv(format!("missing node ({i}, {j})")));
    let origin = at(0, 0)?;
    let corner = at(nx - 1, ny - 1)?;
    let grid = Grid2::from_extents(model, [origin.0, corner.0], [origin.1, corner.1], nx, ny)?;
    let mut values = grid.zeros();
    for (i, j) in grid.nodes() {
        let (x, y, v) = at(i, j)?;
        let p = grid.point(i, j);
        if (p - Point2::new(x, y)).norm() > 1e-9 * (1.0 + p.norm()) {
            return Err(Error::Csv(format!("node ({i}, {j}) is not on a uniform grid")));
        }
        values[[i, j]] = v;
    }
    ScalarField::new(grid, values)
}
