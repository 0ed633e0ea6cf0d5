//! Small geometric primitives shared by the dual-mesh builder and the force
//! assembly: flat facet pieces, their quadrature rules, and exact low-order
//! moments of piecewise-flat facets.
//!
//! Everything is stored in three components. Planar problems keep `z = 0`
//! on every coordinate and normal, which lets the constitutive code treat a
//! 2D run as plane strain without a separate code path.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// A flat piece of a facet. Segments carry 2D facets, triangles 3D ones.
///
/// Vertex order fixes the orientation: a segment `a -> b` has normal
/// `(dy, -dx)`, a triangle `a, b, c` has normal `(b - a) x (c - a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Segment([Vec3; 2]),
    Triangle([Vec3; 3]),
}

impl Piece {
    /// Normal scaled by the piece measure (length or area).
    pub fn vector_area(&self) -> Vec3 {
        match self {
            Piece::Segment([a, b]) => {
                let d = b - a;
                Vec3::new(d.y, -d.x, 0.0)
            }
            Piece::Triangle([a, b, c]) => 0.5 * (b - a).cross(&(c - a)),
        }
    }

    pub fn measure(&self) -> f64 {
        self.vector_area().norm()
    }

    pub fn vertices(&self) -> &[Vec3] {
        match self {
            Piece::Segment(v) => v,
            Piece::Triangle(v) => v,
        }
    }

    /// Reverse orientation in place.
    pub fn flip(&mut self) {
        match self {
            Piece::Segment(v) => v.swap(0, 1),
            Piece::Triangle(v) => v.swap(1, 2),
        }
    }

    /// Flip the piece if its normal does not point along `dir`.
    pub fn orient_along(mut self, dir: &Vec3) -> Self {
        if self.vector_area().dot(dir) < 0.0 {
            self.flip();
        }
        self
    }

    /// Quadrature points and weights. Two-point Gauss on segments (degree 3),
    /// three-point interior rule on triangles (degree 2).
    pub fn quadrature(&self) -> Vec<(Vec3, f64)> {
        match self {
            Piece::Segment([a, b]) => {
                let len = (b - a).norm();
                let s = 0.5 / 3f64.sqrt();
                [0.5 - s, 0.5 + s]
                    .iter()
                    .map(|&t| (a + (b - a) * t, 0.5 * len))
                    .collect()
            }
            Piece::Triangle([a, b, c]) => {
                let area = self.measure();
                const BARY: [[f64; 3]; 3] = [
                    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
                    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
                    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
                ];
                BARY.iter()
                    .map(|l| (a * l[0] + b * l[1] + c * l[2], area / 3.0))
                    .collect()
            }
        }
    }
}

/// Exact moments of a piecewise-flat facet, taken about its area centroid.
///
/// With `r = x - centroid` and `n` the piecewise-constant unit normal:
/// `vector_area = ∫ n`, `second_moment = ∫ r rᵀ`, `normal_moment = ∫ n rᵀ`.
/// These are all the facet integrals the assembly needs, since every
/// integrand there is at most quadratic on each piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetMoments {
    pub area: f64,
    pub centroid: Vec3,
    pub vector_area: Vec3,
    pub second_moment: Mat3,
    pub normal_moment: Mat3,
}

impl FacetMoments {
    pub fn from_pieces(pieces: &[Piece]) -> Self {
        let mut area = 0.0;
        let mut first = Vec3::zeros();
        let mut vector_area = Vec3::zeros();
        for piece in pieces {
            vector_area += piece.vector_area();
            for (x, w) in piece.quadrature() {
                area += w;
                first += x * w;
            }
        }
        let centroid = if area > 0.0 {
            first / area
        } else {
            Vec3::zeros()
        };
        let mut second_moment = Mat3::zeros();
        let mut normal_moment = Mat3::zeros();
        for piece in pieces {
            let va = piece.vector_area();
            let m = va.norm();
            let n = if m > 0.0 { va / m } else { Vec3::zeros() };
            for (x, w) in piece.quadrature() {
                let r = x - centroid;
                second_moment += r * r.transpose() * w;
                normal_moment += n * r.transpose() * w;
            }
        }
        FacetMoments {
            area,
            centroid,
            vector_area,
            second_moment,
            normal_moment,
        }
    }

    /// Area-averaged unit normal.
    pub fn unit_normal(&self) -> Vec3 {
        let n = self.vector_area.norm();
        if n > 0.0 {
            self.vector_area / n
        } else {
            Vec3::zeros()
        }
    }
}

/// A facet stored as its flat pieces plus precomputed moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub pieces: Vec<Piece>,
    pub moments: FacetMoments,
}

impl Facet {
    pub fn new(pieces: Vec<Piece>) -> Self {
        let moments = FacetMoments::from_pieces(&pieces);
        Facet { pieces, moments }
    }

    pub fn area(&self) -> f64 {
        self.moments.area
    }

    pub fn unit_normal(&self) -> Vec3 {
        self.moments.unit_normal()
    }

    /// Quadrature over all pieces, each point paired with its piece's unit normal.
    pub fn quadrature(&self) -> impl Iterator<Item = (Vec3, f64, Vec3)> + '_ {
        self.pieces.iter().flat_map(|p| {
            let n = p.vector_area().normalize();
            p.quadrature().into_iter().map(move |(x, w)| (x, w, n))
        })
    }

    /// Integrate a vector-valued function over the facet with the piece rules.
    pub fn integrate<F: Fn(&Vec3, &Vec3) -> Vec3>(&self, f: F) -> Vec3 {
        self.quadrature()
            .fold(Vec3::zeros(), |acc, (x, w, n)| acc + f(&x, &n) * w)
    }
}

/// Signed measure of a simplex: triangle area (z ignored) or tetrahedron volume.
pub fn simplex_measure(vertices: &[Vec3]) -> f64 {
    match vertices.len() {
        3 => {
            let (a, b, c) = (vertices[0], vertices[1], vertices[2]);
            0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
        }
        4 => {
            let (a, b, c, d) = (vertices[0], vertices[1], vertices[2], vertices[3]);
            (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
        }
        n => panic!("simplex_measure: unsupported vertex count {n}"),
    }
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / points.len() as f64
}
