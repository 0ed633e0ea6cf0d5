//! Structured simplicial grids for fixtures and benchmark cases.
//!
//! Boundary sets are named `xmin`, `xmax`, `ymin`, `ymax` (and `zmin`,
//! `zmax` in 3D).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MeshError, SimplicialMesh};
use crate::geometry::{simplex_measure, Vec3};

/// Random displacement of interior nodes, as a fraction of the local spacing.
#[derive(Debug, Clone, Copy)]
pub struct Jitter {
    pub fraction: f64,
    pub seed: u64,
}

/// `[0, lx] × [0, ly]` split into `(nx-1)(ny-1)` squares, each cut along
/// its rising diagonal. `nx`, `ny` count nodes per side.
pub fn rectangle(
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    jitter: Option<Jitter>,
) -> Result<SimplicialMesh, MeshError> {
    assert!(nx >= 2 && ny >= 2);
    let id = |i: usize, j: usize| j * nx + i;
    let (hx, hy) = (lx / (nx - 1) as f64, ly / (ny - 1) as f64);
    let mut nodes = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            nodes.push(Vec3::new(i as f64 * hx, j as f64 * hy, 0.0));
        }
    }
    if let Some(jt) = jitter {
        let mut rng = ChaCha8Rng::seed_from_u64(jt.seed);
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let p = &mut nodes[id(i, j)];
                p.x += jt.fraction * hx * rng.gen_range(-1.0..1.0);
                p.y += jt.fraction * hy * rng.gen_range(-1.0..1.0);
            }
        }
    }
    let mut elements = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elements.push(vec![a, b, c]);
            elements.push(vec![a, c, d]);
        }
    }
    let sets = vec![
        (
            "xmin".into(),
            (0..ny - 1).map(|j| vec![id(0, j), id(0, j + 1)]).collect(),
        ),
        (
            "xmax".into(),
            (0..ny - 1)
                .map(|j| vec![id(nx - 1, j), id(nx - 1, j + 1)])
                .collect(),
        ),
        (
            "ymin".into(),
            (0..nx - 1).map(|i| vec![id(i, 0), id(i + 1, 0)]).collect(),
        ),
        (
            "ymax".into(),
            (0..nx - 1)
                .map(|i| vec![id(i, ny - 1), id(i + 1, ny - 1)])
                .collect(),
        ),
    ];
    SimplicialMesh::new(2, nodes, elements, sets)
}

/// `[0, lx] × [0, ly] × [0, lz]` with every hexahedral block cut into six
/// tetrahedra around its main diagonal (Kuhn subdivision, conforming).
pub fn block(
    l: [f64; 3],
    n: [usize; 3],
    jitter: Option<Jitter>,
) -> Result<SimplicialMesh, MeshError> {
    assert!(n.iter().all(|&k| k >= 2));
    let [nx, ny, nz] = n;
    let id = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
    let h = [
        l[0] / (nx - 1) as f64,
        l[1] / (ny - 1) as f64,
        l[2] / (nz - 1) as f64,
    ];
    let mut nodes = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                nodes.push(Vec3::new(i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]));
            }
        }
    }
    if let Some(jt) = jitter {
        let mut rng = ChaCha8Rng::seed_from_u64(jt.seed);
        for k in 1..nz - 1 {
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    let p = &mut nodes[id(i, j, k)];
                    for (c, hc) in h.iter().enumerate() {
                        p[c] += jt.fraction * hc * rng.gen_range(-1.0..1.0);
                    }
                }
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut elements = Vec::with_capacity(6 * (nx - 1) * (ny - 1) * (nz - 1));
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = vec![id(c[0], c[1], c[2])];
                    for &axis in &perm {
                        c[axis] += 1;
                        tet.push(id(c[0], c[1], c[2]));
                    }
                    let v: Vec<Vec3> = tet.iter().map(|&t| nodes[t]).collect();
                    if simplex_measure(&v) < 0.0 {
                        tet.swap(2, 3);
                    }
                    elements.push(tet);
                }
            }
        }
    }

    // Each boundary quad is cut along the diagonal its Kuhn tetrahedra use:
    // from the corner with both in-plane indices low to the one with both high.
    let quad_faces = |fixed_axis: usize, fixed: usize| -> Vec<Vec<usize>> {
        let (a1, a2) = match fixed_axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mut faces = Vec::new();
        for q in 0..n[a2] - 1 {
            for p in 0..n[a1] - 1 {
                let at = |dp: usize, dq: usize| {
                    let mut c = [0; 3];
                    c[fixed_axis] = fixed;
                    c[a1] = p + dp;
                    c[a2] = q + dq;
                    id(c[0], c[1], c[2])
                };
                faces.push(vec![at(0, 0), at(1, 0), at(1, 1)]);
                faces.push(vec![at(0, 0), at(1, 1), at(0, 1)]);
            }
        }
        faces
    };
    let sets = vec![
        ("xmin".into(), quad_faces(0, 0)),
        ("xmax".into(), quad_faces(0, nx - 1)),
        ("ymin".into(), quad_faces(1, 0)),
        ("ymax".into(), quad_faces(1, ny - 1)),
        ("zmin".into(), quad_faces(2, 0)),
        ("zmax".into(), quad_faces(2, nz - 1)),
    ];
    SimplicialMesh::new(3, nodes, elements, sets)
}
