//! Simplicial input meshes, their ASCII file format, and the node-centred
//! dual complex built from them.
//!
//! File layout (0-based indices, `#` starts a comment line):
//!
//! ```text
//! dim nnodes nelems nbsets
//! x y [z]                      # nnodes lines
//! i j k [l]                    # nelems lines
//! set <name> <nfacets>         # nbsets blocks
//! i j [k]                      # nfacets lines per block
//! ```

mod dual;
pub mod generate;
mod support;

pub use dual::{BoundaryFacet, Cell, DualComplex, DualError, Interface};
pub use support::{build_supports, RANK_TOLERANCE};

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::{simplex_measure, Vec3};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cannot read mesh file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("element {element} references node {index} but the mesh has {count} nodes")]
    DanglingIndex {
        element: usize,
        index: usize,
        count: usize,
    },
    #[error("boundary set '{set}' references node {index} but the mesh has {count} nodes")]
    DanglingFacetIndex {
        set: String,
        index: usize,
        count: usize,
    },
    #[error("element {element} is inverted (signed measure {measure:e})")]
    InvertedElement { element: usize, measure: f64 },
    #[error("boundary set '{set}': facet {facet:?} is not a boundary facet of the mesh")]
    NotBoundaryFacet { set: String, facet: Vec<usize> },
    #[error("unsupported dimension {0}; expected 2 or 3")]
    Dimension(usize),
    #[error("duplicate boundary set name '{0}'")]
    DuplicateSet(String),
}

/// Facet node tuple; the first `dim` entries are used.
pub type FacetNodes = [usize; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialMesh {
    dim: usize,
    nodes: Vec<Vec3>,
    elements: Vec<[usize; 4]>,
    boundary_sets: BTreeMap<String, Vec<FacetNodes>>,
}

impl SimplicialMesh {
    /// Build and validate a mesh. Elements are slices of `dim + 1` node
    /// indices; boundary facets are slices of `dim` indices.
    pub fn new(
        dim: usize,
        nodes: Vec<Vec3>,
        elements: Vec<Vec<usize>>,
        boundary_sets: Vec<(String, Vec<Vec<usize>>)>,
    ) -> Result<Self, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::Dimension(dim));
        }
        let count = nodes.len();
        let mut packed = Vec::with_capacity(elements.len());
        for (e, el) in elements.iter().enumerate() {
            assert_eq!(el.len(), dim + 1, "element {e} has wrong arity");
            let mut a = [usize::MAX; 4];
            for (slot, &i) in a.iter_mut().zip(el) {
                if i >= count {
                    return Err(MeshError::DanglingIndex {
                        element: e,
                        index: i,
                        count,
                    });
                }
                *slot = i;
            }
            packed.push(a);
        }
        let mut sets = BTreeMap::new();
        for (name, facets) in boundary_sets {
            let mut packed_facets = Vec::with_capacity(facets.len());
            for f in facets {
                assert_eq!(f.len(), dim, "facet in set '{name}' has wrong arity");
                let mut a = [usize::MAX; 3];
                for (slot, &i) in a.iter_mut().zip(&f) {
                    if i >= count {
                        return Err(MeshError::DanglingFacetIndex {
                            set: name.clone(),
                            index: i,
                            count,
                        });
                    }
                    *slot = i;
                }
                packed_facets.push(a);
            }
            if sets.insert(name.clone(), packed_facets).is_some() {
                return Err(MeshError::DuplicateSet(name));
            }
        }
        let mesh = SimplicialMesh {
            dim,
            nodes,
            elements: packed,
            boundary_sets: sets,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<(), MeshError> {
        let tol = self.degeneracy_tolerance();
        for e in 0..self.elements.len() {
            let m = self.element_measure(e);
            if m < -tol {
                return Err(MeshError::InvertedElement {
                    element: e,
                    measure: m,
                });
            }
        }
        let faces = self.face_counts();
        for (name, facets) in &self.boundary_sets {
            for f in facets {
                let key = sorted_face(&f[..self.dim]);
                if faces.get(&key).map(|v| v.len()) != Some(1) {
                    return Err(MeshError::NotBoundaryFacet {
                        set: name.clone(),
                        facet: f[..self.dim].to_vec(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Absolute measure below which an element is considered degenerate.
    pub(crate) fn degeneracy_tolerance(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        let diag = (hi - lo).norm().max(f64::MIN_POSITIVE);
        1e-14 * diag.powi(self.dim as i32)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim + 1]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.elements.iter().map(move |e| &e[..self.dim + 1])
    }

    pub fn boundary_sets(&self) -> impl Iterator<Item = (&str, &[FacetNodes])> + '_ {
        self.boundary_sets
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn boundary_set(&self, name: &str) -> Option<&[FacetNodes]> {
        self.boundary_sets.get(name).map(|v| v.as_slice())
    }

    /// Signed area or volume of element `e`.
    pub fn element_measure(&self, e: usize) -> f64 {
        let verts: Vec<Vec3> = self.element(e).iter().map(|&i| self.nodes[i]).collect();
        simplex_measure(&verts)
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| self.element_measure(e))
            .sum()
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.nodes {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if self.nodes.is_empty() {
            return (Vec3::zeros(), Vec3::zeros());
        }
        (lo, hi)
    }

    /// Mean edge length, used as the nodal spacing `h` in reports.
    pub fn mean_edge_length(&self) -> f64 {
        let edges = self.edges();
        if edges.is_empty() {
            return 0.0;
        }
        edges
            .iter()
            .map(|&(a, b)| (self.nodes[a] - self.nodes[b]).norm())
            .sum::<f64>()
            / edges.len() as f64
    }

    /// Unique undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for el in self.elements() {
            for a in 0..el.len() {
                for b in a + 1..el.len() {
                    let (i, j) = (el[a].min(el[b]), el[a].max(el[b]));
                    edges.push((i, j));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Map from sorted face tuple to the elements containing it.
    fn face_counts(&self) -> HashMap<Vec<usize>, Vec<usize>> {
        let mut faces: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (e, el) in self.elements().enumerate() {
            for skip in 0..el.len() {
                let face: Vec<usize> = el
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != skip)
                    .map(|(_, &i)| i)
                    .collect();
                faces.entry(sorted_face(&face)).or_default().push(e);
            }
        }
        faces
    }

    /// Boundary faces as `(sorted face nodes, owning element)`, sorted by face.
    pub fn boundary_faces(&self) -> Vec<(Vec<usize>, usize)> {
        let mut out: Vec<(Vec<usize>, usize)> = self
            .face_counts()
            .into_iter()
            .filter(|(_, els)| els.len() == 1)
            .map(|(f, els)| (f, els[0]))
            .collect();
        out.sort();
        out
    }

    /// Nodes touched by the facets of a boundary set, ascending.
    pub fn boundary_set_nodes(&self, name: &str) -> Option<Vec<usize>> {
        let facets = self.boundary_sets.get(name)?;
        let mut nodes: Vec<usize> = facets
            .iter()
            .flat_map(|f| f[..self.dim].iter().copied())
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        Some(nodes)
    }

    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let mut next = |what: &str| {
            lines.next().ok_or_else(|| MeshError::Parse {
                line: text.lines().count() + 1,
                msg: format!("unexpected end of file, expected {what}"),
            })
        };

        let (hl, header) = next("header")?;
        let h = parse_usizes(hl, header)?;
        if h.len() != 4 {
            return Err(MeshError::Parse {
                line: hl,
                msg: "header must be `dim nnodes nelems nbsets`".into(),
            });
        }
        let (dim, nn, ne, nb) = (h[0], h[1], h[2], h[3]);
        if dim != 2 && dim != 3 {
            return Err(MeshError::Parse {
                line: hl,
                msg: format!("dimension must be 2 or 3, got {dim}"),
            });
        }

        let mut nodes = Vec::with_capacity(nn);
        for _ in 0..nn {
            let (ln, l) = next("node line")?;
            let c = parse_f64s(ln, l)?;
            if c.len() != dim {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: format!("node line needs {dim} coordinates, got {}", c.len()),
                });
            }
            nodes.push(Vec3::new(c[0], c[1], if dim == 3 { c[2] } else { 0.0 }));
        }

        let mut elements = Vec::with_capacity(ne);
        for _ in 0..ne {
            let (ln, l) = next("element line")?;
            let idx = parse_usizes(ln, l)?;
            if idx.len() != dim + 1 {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: format!("element line needs {} indices, got {}", dim + 1, idx.len()),
                });
            }
            elements.push(idx);
        }

        let mut sets = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (ln, l) = next("boundary set header")?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "set" {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: "expected `set <name> <nfacets>`".into(),
                });
            }
            let count: usize = parts[2].parse().map_err(|_| MeshError::Parse {
                line: ln,
                msg: format!("bad facet count '{}'", parts[2]),
            })?;
            let mut facets = Vec::with_capacity(count);
            for _ in 0..count {
                let (fl, f) = next("facet line")?;
                let idx = parse_usizes(fl, f)?;
                if idx.len() != dim {
                    return Err(MeshError::Parse {
                        line: fl,
                        msg: format!("facet line needs {dim} indices, got {}", idx.len()),
                    });
                }
                facets.push(idx);
            }
            sets.push((parts[1].to_string(), facets));
        }
        if let Some((ln, _)) = lines.next() {
            return Err(MeshError::Parse {
                line: ln,
                msg: "trailing content after the last boundary set".into(),
            });
        }
        SimplicialMesh::new(dim, nodes, elements, sets)
    }

    /// Serialize in the ASCII format, coordinates at 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {} {}",
            self.dim,
            self.nodes.len(),
            self.elements.len(),
            self.boundary_sets.len()
        );
        for p in &self.nodes {
            if self.dim == 2 {
                let _ = writeln!(s, "{:.16e} {:.16e}", p.x, p.y);
            } else {
                let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
            }
        }
        for el in self.elements() {
            let _ = writeln!(s, "{}", join(el));
        }
        for (name, facets) in &self.boundary_sets {
            let _ = writeln!(s, "set {} {}", name, facets.len());
            for f in facets {
                let _ = writeln!(s, "{}", join(&f[..self.dim]));
            }
        }
        s
    }
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<SimplicialMesh, MeshError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    SimplicialMesh::parse(&text)
}

pub fn write_mesh(mesh: &SimplicialMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let path = path.as_ref();
    std::fs::write(path, mesh.to_text()).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn sorted_face(face: &[usize]) -> Vec<usize> {
    let mut f = face.to_vec();
    f.sort_unstable();
    f
}

fn join(idx: &[usize]) -> String {
    idx.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_usizes(line: usize, s: &str) -> Result<Vec<usize>, MeshError> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<usize>().map_err(|_| MeshError::Parse {
                line,
                msg: format!("expected a non-negative integer, got '{t}'"),
            })
        })
        .collect()
}

fn parse_f64s(line: usize, s: &str) -> Result<Vec<f64>, MeshError> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| MeshError::Parse {
                    line,
                    msg: format!("expected a finite number, got '{t}'"),
                })
        })
        .collect()
}
