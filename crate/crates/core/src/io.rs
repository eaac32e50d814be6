//! Output files: history CSV, design checkpoints and legacy VTK.
//!
//! Every file is written to a temporary sibling and renamed into place so a
//! reader never sees a partial file.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::optimizer::HistoryRow;
use crate::solidmesh::SolidMesh;

const DESIGN_MAGIC: &str = "shellmmc-design 1";

/// Writes `contents` to `path` atomically.
pub fn write_atomic(path: &Path, contents: &[u8]) -> crate::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| crate::Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| crate::Error::io(path, e))?;
    tmp.persist(path).map_err(|e| crate::Error::io(path, e.error))?;
    Ok(())
}

/// CSV header of the iteration history.
pub fn history_header(with_band: bool) -> String {
    let mut s = String::from("iter,compliance,volume_fraction,max_scaled_delta");
    if with_band {
        s.push_str(",kept_elements,kept_dofs,active_components,fallback_flag");
    }
    s
}

/// One CSV row; band columns are written when `with_band` is set.
pub fn history_line(row: &HistoryRow, with_band: bool) -> String {
    let mut s = format!(
        "{},{:.12e},{:.12e},{}",
        row.iteration,
        row.compliance,
        row.volume_fraction,
        if row.max_scaled_delta.is_nan() {
            "nan".to_string()
        } else {
            format!("{:.6e}", row.max_scaled_delta)
        }
    );
    if with_band {
        match row.band {
            Some(b) => {
                let _ = write!(
                    s,
                    ",{},{},{},{}",
                    b.kept_elements, b.kept_dofs, b.active_components, b.fallback as u8
                );
            }
            None => s.push_str(",,,,"),
        }
    }
    s
}

pub fn write_history(path: &Path, rows: &[HistoryRow], with_band: bool) -> crate::Result<()> {
    let mut s = history_header(with_band);
    s.push('\n');
    for r in rows {
        s.push_str(&history_line(r, with_band));
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

/// Serializes a scaled design vector; `{:e}` round-trips exactly.
pub fn design_to_string(x: &[f64]) -> String {
    let mut s = format!("{DESIGN_MAGIC}\n{}\n", x.len());
    for v in x {
        let _ = writeln!(s, "{v:e}");
    }
    s
}

pub fn parse_design(text: &str) -> crate::Result<Vec<f64>> {
    let bad = |m: String| crate::Error::Invalid(format!("design file: {m}"));
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some(DESIGN_MAGIC) => {}
        other => return Err(bad(format!("expected header `{DESIGN_MAGIC}`, found {other:?}"))),
    }
    let n: usize = lines
        .next()
        .ok_or_else(|| bad("missing length".into()))?
        .parse()
        .map_err(|e| bad(format!("length: {e}")))?;
    let values = lines
        .map(|l| l.parse::<f64>().map_err(|e| bad(format!("value `{l}`: {e}"))))
        .collect::<crate::Result<Vec<f64>>>()?;
    if values.len() != n {
        return Err(bad(format!("expected {n} values, found {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite value".into()));
    }
    Ok(values)
}

pub fn write_design(path: &Path, x: &[f64]) -> crate::Result<()> {
    write_atomic(path, design_to_string(x).as_bytes())
}

pub fn read_design(path: &Path) -> crate::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
    parse_design(&text)
}

/// Legacy ASCII VTK unstructured grid of the prism mesh with element
/// density and nodal displacement.
pub fn vtk_string(mesh: &SolidMesh, element_density: &[f64], displacement: &[f64]) -> String {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nshellmmc solid\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.n_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(s, "{:e} {:e} {:e}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "CELLS {} {}", mesh.n_elements(), 7 * mesh.n_elements());
    for el in mesh.elements() {
        let _ = writeln!(s, "6 {} {} {} {} {} {}", el[0], el[1], el[2], el[3], el[4], el[5]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_elements());
    for _ in 0..mesh.n_elements() {
        s.push_str("13\n");
    }
    let _ = writeln!(s, "CELL_DATA {}\nSCALARS density double 1\nLOOKUP_TABLE default", mesh.n_elements());
    for d in element_density {
        let _ = writeln!(s, "{d:e}");
    }
    let _ = writeln!(s, "POINT_DATA {}\nVECTORS displacement double", mesh.n_nodes());
    for u in displacement.chunks(3) {
        let _ = writeln!(s, "{:e} {:e} {:e}", u[0], u[1], u[2]);
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &SolidMesh, element_density: &[f64], displacement: &[f64]) -> crate::Result<()> {
    write_atomic(path, vtk_string(mesh, element_density, displacement).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::BandStats;
    use proptest::prelude::*;

    #[test]
    fn history_format() {
        let row = HistoryRow {
            iteration: 0,
            compliance: 2.5,
            volume_fraction: 0.4,
            max_scaled_delta: f64::NAN,
            band: Some(BandStats {
                kept_elements: 10,
                kept_dofs: 30,
                active_components: 2,
                fallback: false,
            }),
        };
        assert_eq!(history_header(false), "iter,compliance,volume_fraction,max_scaled_delta");
        let line = history_line(&row, true);
        assert!(line.starts_with("0,2.5"));
        assert!(line.ends_with(",nan,10,30,2,0"), "{line}");
        assert_eq!(history_line(&row, false).split(',').count(), 4);
    }

    #[test]
    fn design_file_errors() {
        assert!(parse_design("nope\n1\n0").is_err());
        assert!(parse_design(&format!("{DESIGN_MAGIC}\n2\n1.0\n")).is_err());
        assert!(parse_design(&format!("{DESIGN_MAGIC}\n1\nNaN\n")).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/design.txt");
        write_design(&p, &[1.0, 2.0]).unwrap();
        write_design(&p, &[3.0]).unwrap();
        assert_eq!(read_design(&p).unwrap(), vec![3.0]);
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn vtk_layout() {
        let s = crate::fixtures::rectangle_plate(1.0, 1.0, 1, 1);
        let m = crate::solidmesh::generate_offset_mesh(&s, 0.1, 1).unwrap();
        let text = vtk_string(&m, &vec![1.0; m.n_elements()], &vec![0.0; 3 * m.n_nodes()]);
        assert!(text.contains("POINTS 12 double"));
        assert!(text.contains("CELLS 4 28"));
        assert_eq!(text.lines().filter(|l| *l == "13").count(), 4);
        assert!(text.contains("VECTORS displacement double"));
    }

    proptest! {
        #[test]
        fn design_round_trip_is_exact(x in proptest::collection::vec(-1e6f64..1e6, 0..40)) {
            let back = parse_design(&design_to_string(&x)).unwrap();
            prop_assert_eq!(back, x);
        }
    }
}
