//! Mesh and field export: OFF (ASCII) and VTK legacy ASCII with
//! POINT_DATA scalars, plus a small CSV writer used by the reports.

use crate::error::Result;
use crate::manifold::ChartManifold;
use std::io::Write;
use std::path::Path;

/// ASCII OFF: vertices with z = 0.
pub fn write_off(m: &ChartManifold, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("OFF\n");
    out.push_str(&format!("{} {} 0\n", m.num_vertices(), m.num_triangles()));
    for v in &m.vertices {
        out.push_str(&format!("{} {} 0\n", fmt(v[0]), fmt(v[1])));
    }
    for t in &m.triangles {
        out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// VTK legacy ASCII (POLYDATA) with named per-vertex scalar fields.
pub fn write_vtk(
    m: &ChartManifold,
    fields: &[(&str, &[f64])],
    path: &Path,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("mvslab mesh\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET POLYDATA\n");
    out.push_str(&format!("POINTS {} double\n", m.num_vertices()));
    for v in &m.vertices {
        out.push_str(&format!("{} {} 0\n", fmt(v[0]), fmt(v[1])));
    }
    out.push_str(&format!(
        "POLYGONS {} {}\n",
        m.num_triangles(),
        4 * m.num_triangles()
    ));
    for t in &m.triangles {
        out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    if !fields.is_empty() {
        out.push_str(&format!("POINT_DATA {}\n", m.num_vertices()));
        for (name, vals) in fields {
            assert_eq!(vals.len(), m.num_vertices());
            out.push_str(&format!("SCALARS {name} double 1\n"));
            out.push_str("LOOKUP_TABLE default\n");
            for v in *vals {
                out.push_str(&format!("{}\n", fmt(*v)));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// CSV with a header row, '.' decimals and '\n' line endings.
pub fn write_csv(header: &[&str], rows: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| fmt(*v)).collect();
        writeln!(file, "{}", line.join(","))?;
    }
    Ok(())
}

fn fmt(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v:.12e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{build_builtin, Shape};

    #[test]
    fn off_roundtrip_counts() {
        let m = build_builtin(Shape::Square { side: 1.0 }, 0.5).unwrap();
        let dir = std::env::temp_dir().join("mvslab_off_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mesh.off");
        write_off(&m, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "OFF");
        let counts: Vec<usize> =
            lines.next().unwrap().split_whitespace().map(|s| s.parse().unwrap()).collect();
        assert_eq!(counts[0], m.num_vertices());
        assert_eq!(counts[1], m.num_triangles());
    }

    #[test]
    fn vtk_contains_scalar_field() {
        let m = build_builtin(Shape::Square { side: 1.0 }, 0.5).unwrap();
        let field: Vec<f64> = (0..m.num_vertices()).map(|v| v as f64).collect();
        let dir = std::env::temp_dir().join("mvslab_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mesh.vtk");
        write_vtk(&m, &[("indicator", &field)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("SCALARS indicator double 1"));
        assert!(text.contains("POLYGONS"));
        assert!(text.contains(&format!("POINT_DATA {}", m.num_vertices())));
    }

    #[test]
    fn csv_deterministic_output() {
        let dir = std::env::temp_dir().join("mvslab_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join("a.csv");
        let p2 = dir.join("b.csv");
        let rows = vec![vec![0.5, 1.0], vec![0.25, 4.0]];
        write_csv(&["r", "volume"], &rows, &p1).unwrap();
        write_csv(&["r", "volume"], &rows, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let text = std::fs::read_to_string(&p1).unwrap();
        assert!(text.starts_with("r,volume\n"));
    }
}
