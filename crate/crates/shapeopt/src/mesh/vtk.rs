//! Legacy ASCII VTK (2.0) unstructured-grid writer for meshes and fields.

use super::Mesh;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::util::{fmt_e9, write_atomic};
use std::io::Write;
use std::path::Path;

/// A named nodal field attached to a VTK export.
#[derive(Clone, Copy)]
pub enum FieldData<'a> {
    Scalar(&'a [f64]),
    Vector(&'a [Vec2]),
}

/// Writes the mesh with optional nodal and per-cell fields. Floats are
/// printed `%.9e` so identical states produce identical files.
pub fn write_vtk(
    mesh: &Mesh,
    path: &Path,
    point_fields: &[(&str, FieldData)],
    cell_fields: &[(&str, &[f64])],
) -> Result<()> {
    for (name, f) in point_fields {
        let len = match f {
            FieldData::Scalar(v) => v.len(),
            FieldData::Vector(v) => v.len(),
        };
        if len != mesh.node_count() {
            return Err(Error::Mesh(format!(
                "field `{name}` has {len} entries for {} nodes",
                mesh.node_count()
            )));
        }
    }
    for (name, f) in cell_fields {
        if f.len() != mesh.cell_count() {
            return Err(Error::Mesh(format!(
                "cell field `{name}` has {} entries for {} cells",
                f.len(),
                mesh.cell_count()
            )));
        }
    }

    write_atomic(path, |w| {
        writeln!(w, "# vtk DataFile Version 2.0")?;
        writeln!(w, "shapeopt output")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", mesh.node_count())?;
        for p in mesh.nodes() {
            writeln!(w, "{} {} 0.000000000e+00", fmt_e9(p.x), fmt_e9(p.y))?;
        }
        writeln!(w, "CELLS {} {}", mesh.cell_count(), 4 * mesh.cell_count())?;
        for t in mesh.triangles() {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "CELL_TYPES {}", mesh.cell_count())?;
        for _ in 0..mesh.cell_count() {
            writeln!(w, "5")?;
        }
        if !point_fields.is_empty() {
            writeln!(w, "POINT_DATA {}", mesh.node_count())?;
            for (name, field) in point_fields {
                match field {
                    FieldData::Scalar(v) => {
                        writeln!(w, "SCALARS {name} double 1")?;
                        writeln!(w, "LOOKUP_TABLE default")?;
                        for x in *v {
                            writeln!(w, "{}", fmt_e9(*x))?;
                        }
                    }
                    FieldData::Vector(v) => {
                        writeln!(w, "VECTORS {name} double")?;
                        for p in *v {
                            writeln!(w, "{} {} 0.000000000e+00", fmt_e9(p.x), fmt_e9(p.y))?;
                        }
                    }
                }
            }
        }
        if !cell_fields.is_empty() {
            writeln!(w, "CELL_DATA {}", mesh.cell_count())?;
            for (name, v) in cell_fields {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for x in *v {
                    writeln!(w, "{}", fmt_e9(*x))?;
                }
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryEdge, BoundaryTag};

    fn square() -> Mesh {
        Mesh::new(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![
                BoundaryEdge { nodes: [0, 1], tag: BoundaryTag::SlipWall },
                BoundaryEdge { nodes: [1, 2], tag: BoundaryTag::Outflow },
                BoundaryEdge { nodes: [2, 3], tag: BoundaryTag::SlipWall },
                BoundaryEdge { nodes: [3, 0], tag: BoundaryTag::Inflow },
            ],
        )
        .unwrap()
    }

    #[test]
    fn structure_and_vectors_present() {
        let m = square();
        let dir = std::env::temp_dir().join(format!("shapeopt-vtk-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mesh.vtk");

        write_vtk(&m, &path, &[], &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("POINTS 4 double"));
        assert!(text.contains("CELLS 2 8"));
        assert!(!text.contains("POINT_DATA"));

        let vel = vec![Vec2::new(1.0, 0.0); 4];
        write_vtk(&m, &path, &[("velocity", FieldData::Vector(&vel))], &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("VECTORS velocity double"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn coordinates_round_trip_through_text() {
        let m = square();
        let dir = std::env::temp_dir().join(format!("shapeopt-vtkrt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mesh.vtk");
        write_vtk(&m, &path, &[], &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        while let Some(l) = lines.next() {
            if l.starts_with("POINTS") {
                break;
            }
        }
        for i in 0..m.node_count() {
            let f: Vec<f64> = lines
                .next()
                .unwrap()
                .split_whitespace()
                .map(|s| s.parse().unwrap())
                .collect();
            let p = m.node(i);
            let scale = p.x.abs().max(1.0);
            assert!((f[0] - p.x).abs() <= 1e-9 * scale);
            assert!((f[1] - p.y).abs() <= 1e-9 * p.y.abs().max(1.0));
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
