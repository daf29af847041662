//! Text serialisation of nodal fields: a CSV layout that round-trips
//! exactly in `f64`, and a legacy ASCII VTK writer for visualisation.

use std::fmt::Write as _;

use crate::discretization::{FieldKind, Grid, ScalarField};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Column header used for fields on `grid`.
pub fn csv_header(grid: Grid) -> &'static str {
    if grid.dim() == 1 {
        "i,x,value"
    } else {
        "i,j,x,y,value"
    }
}

/// One row per node in index order; values use 17 significant digits.
pub fn field_to_csv<T: Real>(field: &ScalarField<T>) -> String {
    let grid = field.grid();
    let mut s = String::with_capacity(48 * grid.node_count());
    s.push_str(csv_header(grid));
    s.push('\n');
    for (p, v) in field.values().iter().enumerate() {
        let (i, j) = grid.lattice(p);
        let [x, y] = grid.coords::<f64>(p);
        let v = v.to_f64_lossy();
        let _ = if grid.dim() == 1 {
            writeln!(s, "{i},{x:.16e},{v:.16e}")
        } else {
            writeln!(s, "{i},{j},{x:.16e},{y:.16e},{v:.16e}")
        };
    }
    s
}

/// Parses the output of [`field_to_csv`]. The dimension comes from the
/// header and the resolution from the row count; rows must be complete
/// and in index order.
pub fn field_from_csv<T: Real>(text: &str, kind: FieldKind) -> Result<ScalarField<T>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))?;
    let dim = match header.trim() {
        "i,x,value" => 1,
        "i,j,x,y,value" => 2,
        other => return Err(Error::Parse(format!("unrecognised header `{other}`"))),
    };
    let rows: Vec<&str> = lines.collect();
    let per_axis = match dim {
        1 => rows.len(),
        _ => {
            let r = (rows.len() as f64).sqrt().round() as usize;
            if r * r != rows.len() {
                return Err(Error::Parse(format!("{} rows do not form a square grid", rows.len())));
            }
            r
        }
    };
    if per_axis < 3 {
        return Err(Error::Parse(format!("{} rows are too few for a grid", rows.len())));
    }
    let grid = Grid::new(dim, per_axis - 1)?;
    let mut values = Vec::with_capacity(rows.len());
    for (p, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').map(str::trim).collect();
        if cols.len() != dim * 2 + 1 {
            return Err(Error::Parse(format!("row {} has {} columns", p + 1, cols.len())));
        }
        let index = |c: &str| c.parse::<usize>().map_err(|e| Error::Parse(format!("row {}: {e}", p + 1)));
        let (i, j) = if dim == 1 {
            (index(cols[0])?, 0)
        } else {
            (index(cols[0])?, index(cols[1])?)
        };
        if grid.lattice(p) != (i, j) {
            return Err(Error::Parse(format!("row {} is out of order", p + 1)));
        }
        let v: f64 = cols[cols.len() - 1]
            .parse()
            .map_err(|e| Error::Parse(format!("row {}: {e}", p + 1)))?;
        values.push(T::lit(v));
    }
    ScalarField::new(grid, values, kind)
}

/// Legacy ASCII VTK (`STRUCTURED_POINTS`) with one point-data array per
/// named field. All fields must share a grid.
pub fn vtk_string<T: Real>(title: &str, fields: &[(&str, &ScalarField<T>)]) -> Result<String> {
    let grid = fields
        .first()
        .map(|(_, f)| f.grid())
        .ok_or_else(|| Error::InvalidParameter("no fields to write".into()))?;
    if let Some((name, _)) = fields.iter().find(|(_, f)| f.grid() != grid) {
        return Err(Error::InvalidParameter(format!("field `{name}` is on a different grid")));
    }
    let m = grid.nodes_per_axis();
    let h = grid.spacing::<f64>();
    let (ny, sy) = if grid.dim() == 1 { (1, 1.0) } else { (m, h) };
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {m} {ny} 1\nORIGIN 0 0 0\nSPACING {h:e} {sy:e} 1");
    let _ = writeln!(s, "POINT_DATA {}", grid.node_count());
    for (name, f) in fields {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in f.values() {
            let _ = writeln!(s, "{:.16e}", v.to_f64_lossy());
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_layout() {
        let g = Grid::new(1, 2).unwrap();
        let f = ScalarField::from_fn(g, |x: f64, _| x * x);
        let csv = field_to_csv(&f);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "i,x,value");
        assert_eq!(lines[2], "1,5.0000000000000000e-1,2.5000000000000000e-1");
    }

    #[test]
    fn two_dimensional_index_order() {
        let g = Grid::new(2, 2).unwrap();
        let f = ScalarField::from_fn(g, |x, y| x + 10.0 * y);
        let csv = field_to_csv(&f);
        assert!(csv.lines().nth(4).unwrap().starts_with("0,1,"));
        let back: ScalarField<f64> = field_from_csv(&csv, FieldKind::Free).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let bad = [
            "",
            "a,b\n",
            "i,x,value\n0,0,1\n1,1,2\n",
            "i,x,value\n0,0,1\n2,0.5,1\n2,1,1\n",
            "i,x,value\n0,0,1\n1,0.5,nan?\n2,1,1\n",
            "i,x,value\n0,0,1\n1,0.5\n2,1,1\n",
            "i,j,x,y,value\n0,0,0,0,1\n1,0,1,0,1\n",
        ];
        for b in bad {
            assert!(field_from_csv::<f64>(b, FieldKind::Free).is_err(), "{b:?}");
        }
    }

    #[test]
    fn zero_trace_is_enforced_on_import() {
        let g = Grid::new(1, 4).unwrap();
        let csv = field_to_csv(&ScalarField::constant(g, 1.0));
        assert!(field_from_csv::<f64>(&csv, FieldKind::ZeroTrace).is_err());
    }

    #[test]
    fn vtk_header_counts_points() {
        let g = Grid::new(2, 3).unwrap();
        let a = ScalarField::constant(g, 1.0);
        let s = vtk_string("t", &[("u", &a), ("phi", &a)]).unwrap();
        assert!(s.contains("DIMENSIONS 4 4 1"));
        assert!(s.contains("POINT_DATA 16"));
        assert_eq!(s.lines().filter(|l| l.starts_with("SCALARS")).count(), 2);
        assert!(vtk_string::<f64>("t", &[]).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bitwise(dim in 1usize..=2, n in 2usize..9, seed in any::<u64>()) {
            let g = Grid::new(dim, n).unwrap();
            let f = ScalarField::from_fn(g, |x: f64, y: f64| {
                ((seed % 1000) as f64 * 0.001 + x * 3.7 - y).sin() * 1e3f64.powf(x - y)
            });
            let back: ScalarField<f64> = field_from_csv(&field_to_csv(&f), FieldKind::Free).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
