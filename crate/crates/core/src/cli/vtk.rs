//! Legacy ASCII VTK unstructured-grid output.

use std::fmt::Write as _;
use std::path::Path;

use crate::geometry::Vec3;
use crate::mesh::SimplicialMesh;

const VTK_TRIANGLE: u8 = 5;
const VTK_TETRA: u8 = 10;

/// File contents with 17 significant digits per coordinate.
pub fn vtk_text(mesh: &SimplicialMesh, u: &[Vec3]) -> String {
    assert_eq!(u.len(), mesh.node_count(), "one displacement per point");
    let mut s = String::from(
        "# vtk DataFile Version 3.0\nfpm displacement\nASCII\nDATASET UNSTRUCTURED_GRID\n",
    );
    let _ = writeln!(s, "POINTS {} double", mesh.node_count());
    for x in mesh.nodes() {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", x.x, x.y, x.z);
    }
    let k = mesh.dim() + 1;
    let m = mesh.element_count();
    let _ = writeln!(s, "CELLS {} {}", m, m * (k + 1));
    for e in mesh.elements() {
        let ids: Vec<String> = e.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "{} {}", k, ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    let ty = if mesh.dim() == 2 {
        VTK_TRIANGLE
    } else {
        VTK_TETRA
    };
    for _ in 0..m {
        let _ = writeln!(s, "{ty}");
    }
    let _ = writeln!(
        s,
        "POINT_DATA {}\nVECTORS displacement double",
        mesh.node_count()
    );
    for v in u {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", v.x, v.y, v.z);
    }
    s
}

pub fn write_vtk(mesh: &SimplicialMesh, u: &[Vec3], path: &Path) -> std::io::Result<()> {
    std::fs::write(path, vtk_text(mesh, u))
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}
