//! Median-dual construction: one polygonal/polyhedral cell per mesh node,
//! assembled from per-element fragments bounded by edge midpoints, face
//! centroids and element barycentres.

use std::collections::BTreeMap;

use thiserror::Error;

use super::support::build_supports;
use super::{sorted_face, SimplicialMesh};
use crate::geometry::{centroid, simplex_measure, Facet, Piece, Vec3};

#[derive(Debug, Error)]
pub enum DualError {
    #[error("element {element} is degenerate (measure {measure:e})")]
    DegenerateElement { element: usize, measure: f64 },
    #[error("point {point} has an empty support")]
    EmptySupport { point: usize },
    #[error(
        "point {point} at {origin:?}: support {neighbors:?} cannot resolve a full gradient even after second-ring extension"
    )]
    RankDeficient {
        point: usize,
        origin: Vec3,
        neighbors: Vec<(usize, Vec3)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub volume: f64,
    pub centroid: Vec3,
    /// `volume^(1/dim)`
    pub char_length: f64,
}

/// Interior interface between the cells of two adjacent points. The stored
/// orientation is from `plus` to `minus`; `plus < minus` always.
#[derive(Debug, Clone, PartialEq)]
pub struct Interface {
    pub plus: usize,
    pub minus: usize,
    pub facet: Facet,
}

/// The part of one mesh boundary face that belongs to the cell of `cell`.
/// Normals point out of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub cell: usize,
    /// Sorted node tuple of the mesh face this piece was cut from.
    pub face: Vec<usize>,
    pub facet: Facet,
}

#[derive(Debug, Clone)]
pub struct DualComplex {
    mesh: SimplicialMesh,
    cells: Vec<Cell>,
    interfaces: Vec<Interface>,
    boundary_facets: Vec<BoundaryFacet>,
    boundary_sets: BTreeMap<String, Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
    supports: Vec<Vec<usize>>,
    node_elements: Vec<Vec<usize>>,
}

impl DualComplex {
    pub fn build(mesh: SimplicialMesh) -> Result<Self, DualError> {
        let dim = mesh.dim();
        let n = mesh.node_count();
        let tol = mesh.degeneracy_tolerance();
        let x = mesh.nodes().to_vec();

        let mut volume = vec![0.0; n];
        let mut moment = vec![Vec3::zeros(); n];
        let mut pieces: BTreeMap<(usize, usize), Vec<Piece>> = BTreeMap::new();
        let mut node_elements = vec![Vec::new(); n];

        for (e, el) in mesh.elements().enumerate() {
            let measure = mesh.element_measure(e);
            if measure.abs() <= tol {
                return Err(DualError::DegenerateElement {
                    element: e,
                    measure,
                });
            }
            for &v in el {
                node_elements[v].push(e);
            }
            for (v, frags) in element_fragments(&x, el) {
                for f in frags {
                    let m = simplex_measure(&f).abs();
                    volume[v] += m;
                    moment[v] += centroid(&f) * m;
                }
            }
            for (a, b, ps) in element_interface_pieces(&x, el) {
                let (i, j) = (a.min(b), a.max(b));
                let dir = x[j] - x[i];
                pieces
                    .entry((i, j))
                    .or_default()
                    .extend(ps.into_iter().map(|p| p.orient_along(&dir)));
            }
        }

        let cells = (0..n)
            .map(|i| Cell {
                volume: volume[i],
                centroid: if volume[i] > 0.0 {
                    moment[i] / volume[i]
                } else {
                    x[i]
                },
                char_length: volume[i].powf(1.0 / dim as f64),
            })
            .collect();

        let mut neighbors = vec![Vec::new(); n];
        let interfaces: Vec<Interface> = pieces
            .into_iter()
            .map(|((i, j), ps)| {
                neighbors[i].push(j);
                neighbors[j].push(i);
                Interface {
                    plus: i,
                    minus: j,
                    facet: Facet::new(ps),
                }
            })
            .collect();
        for nb in &mut neighbors {
            nb.sort_unstable();
        }

        let mut boundary_facets = Vec::new();
        let mut by_face: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (face, e) in mesh.boundary_faces() {
            let el = mesh.element(e);
            let opposite = *el.iter().find(|v| !face.contains(v)).unwrap();
            for (v, ps) in boundary_face_pieces(&x, &face) {
                let out = x[v] - x[opposite];
                let ps: Vec<Piece> = ps.into_iter().map(|p| p.orient_along(&out)).collect();
                by_face
                    .entry(face.clone())
                    .or_default()
                    .push(boundary_facets.len());
                boundary_facets.push(BoundaryFacet {
                    cell: v,
                    face: face.clone(),
                    facet: Facet::new(ps),
                });
            }
        }
        let boundary_sets = mesh
            .boundary_sets()
            .map(|(name, facets)| {
                let idx = facets
                    .iter()
                    .flat_map(|f| by_face[&sorted_face(&f[..dim])].iter().copied())
                    .collect();
                (name.to_string(), idx)
            })
            .collect();

        let supports = build_supports(dim, &x, &neighbors)?;

        Ok(DualComplex {
            mesh,
            cells,
            interfaces,
            boundary_facets,
            boundary_sets,
            neighbors,
            supports,
            node_elements,
        })
    }

    pub fn mesh(&self) -> &SimplicialMesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn point_count(&self) -> usize {
        self.cells.len()
    }

    pub fn point(&self, i: usize) -> Vec3 {
        self.mesh.nodes()[i]
    }

    pub fn points(&self) -> &[Vec3] {
        self.mesh.nodes()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &Cell {
        &self.cells[i]
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    /// Indices into [`Self::boundary_facets`] for a named boundary set.
    pub fn boundary_set(&self, name: &str) -> Option<&[usize]> {
        self.boundary_sets.get(name).map(|v| v.as_slice())
    }

    pub fn boundary_set_names(&self) -> impl Iterator<Item = &str> + '_ {
        self.boundary_sets.keys().map(|s| s.as_str())
    }

    /// Points whose cells share an interface with cell `i`, ascending.
    pub fn first_ring(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Support `P1..Pm` of point `i` after rank repair, ascending.
    pub fn support_of(&self, i: usize) -> &[usize] {
        &self.supports[i]
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }

    /// Length of the bounding-box diagonal of the reference domain.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.mesh.bounding_box();
        (hi - lo).norm()
    }

    /// The simplices making up cell `i`, regenerated from the mesh.
    pub fn cell_subsimplices(&self, i: usize) -> Vec<Vec<Vec3>> {
        let x = self.mesh.nodes();
        self.node_elements[i]
            .iter()
            .flat_map(|&e| element_fragments(x, self.mesh.element(e)))
            .filter(|(v, _)| *v == i)
            .flat_map(|(_, f)| f)
            .collect()
    }
}

fn mid(a: &Vec3, b: &Vec3) -> Vec3 {
    (a + b) * 0.5
}

/// Per vertex of an element, the simplices of its median-dual fragment.
fn element_fragments(x: &[Vec3], el: &[usize]) -> Vec<(usize, Vec<Vec<Vec3>>)> {
    let g = centroid(&el.iter().map(|&i| x[i]).collect::<Vec<_>>());
    let mut out = Vec::with_capacity(el.len());
    for (k, &v) in el.iter().enumerate() {
        let others: Vec<usize> = el
            .iter()
            .enumerate()
            .filter(|&(o, _)| o != k)
            .map(|(_, &i)| i)
            .collect();
        let mut frags = Vec::new();
        if el.len() == 3 {
            for &u in &others {
                frags.push(vec![x[v], mid(&x[v], &x[u]), g]);
            }
        } else {
            for (a, &u) in others.iter().enumerate() {
                let m = mid(&x[v], &x[u]);
                for (b, &w) in others.iter().enumerate() {
                    if a == b {
                        continue;
                    }
                    let f = (x[v] + x[u] + x[w]) / 3.0;
                    frags.push(vec![x[v], m, f, g]);
                }
            }
        }
        out.push((v, frags));
    }
    out
}

/// Unoriented interface pieces contributed by one element, per element edge.
fn element_interface_pieces(x: &[Vec3], el: &[usize]) -> Vec<(usize, usize, Vec<Piece>)> {
    let g = centroid(&el.iter().map(|&i| x[i]).collect::<Vec<_>>());
    let mut out = Vec::new();
    for a in 0..el.len() {
        for b in a + 1..el.len() {
            let (v, u) = (el[a], el[b]);
            let m = mid(&x[v], &x[u]);
            let ps = if el.len() == 3 {
                vec![Piece::Segment([m, g])]
            } else {
                let rest: Vec<usize> = el.iter().copied().filter(|&i| i != v && i != u).collect();
                let f1 = (x[v] + x[u] + x[rest[0]]) / 3.0;
                let f2 = (x[v] + x[u] + x[rest[1]]) / 3.0;
                vec![Piece::Triangle([m, f1, g]), Piece::Triangle([m, g, f2])]
            };
            out.push((v, u, ps));
        }
    }
    out
}

/// Unoriented pieces of a boundary face, split among the face's nodes.
fn boundary_face_pieces(x: &[Vec3], face: &[usize]) -> Vec<(usize, Vec<Piece>)> {
    if face.len() == 2 {
        let m = mid(&x[face[0]], &x[face[1]]);
        face.iter()
            .map(|&v| (v, vec![Piece::Segment([x[v], m])]))
            .collect()
    } else {
        let f = centroid(&face.iter().map(|&i| x[i]).collect::<Vec<_>>());
        face.iter()
            .map(|&v| {
                let o: Vec<usize> = face.iter().copied().filter(|&i| i != v).collect();
                let m1 = mid(&x[v], &x[o[0]]);
                let m2 = mid(&x[v], &x[o[1]]);
                (
                    v,
                    vec![
                        Piece::Triangle([x[v], m1, f]),
                        Piece::Triangle([x[v], f, m2]),
                    ],
                )
            })
            .collect()
    }
}
