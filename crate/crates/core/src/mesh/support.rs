//! Support domains: first-ring neighbours, extended once to the second ring
//! when the first ring cannot resolve a full gradient.

use nalgebra::DMatrix;

use super::DualError;
use crate::geometry::Vec3;

/// Relative singular-value threshold for the offset matrix of a support.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Ratio `σ_min / σ_max` of the `m × dim` offset matrix, 0 when `m < dim`.
pub(crate) fn offset_conditioning(dim: usize, origin: &Vec3, pts: &[Vec3]) -> f64 {
    if pts.len() < dim {
        return 0.0;
    }
    let x = DMatrix::from_fn(pts.len(), dim, |r, c| pts[r][c] - origin[c]);
    let sv = x.singular_values();
    let max = sv.max();
    if max <= 0.0 {
        return 0.0;
    }
    sv.min() / max
}

/// Build the final support list of every point from a first-ring adjacency.
///
/// `adjacency[i]` must be sorted ascending. A point whose first ring is
/// rank-deficient gets the union of its first and second rings; if that is
/// still deficient the whole build fails with the offending geometry.
pub fn build_supports(
    dim: usize,
    points: &[Vec3],
    adjacency: &[Vec<usize>],
) -> Result<Vec<Vec<usize>>, DualError> {
    let mut out = Vec::with_capacity(points.len());
    for (i, ring) in adjacency.iter().enumerate() {
        if ring.is_empty() {
            return Err(DualError::EmptySupport { point: i });
        }
        let coords: Vec<Vec3> = ring.iter().map(|&j| points[j]).collect();
        if offset_conditioning(dim, &points[i], &coords) >= RANK_TOLERANCE {
            out.push(ring.clone());
            continue;
        }
        let mut extended: Vec<usize> = ring
            .iter()
            .flat_map(|&j| adjacency[j].iter().copied().chain(std::iter::once(j)))
            .filter(|&j| j != i)
            .collect();
        extended.sort_unstable();
        extended.dedup();
        let coords: Vec<Vec3> = extended.iter().map(|&j| points[j]).collect();
        if offset_conditioning(dim, &points[i], &coords) < RANK_TOLERANCE {
            return Err(DualError::RankDeficient {
                point: i,
                origin: points[i],
                neighbors: extended.iter().map(|&j| (j, points[j])).collect(),
            });
        }
        out.push(extended);
    }
    Ok(out)
}
