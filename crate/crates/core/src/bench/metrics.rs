//! Error norms and field transfer between point clouds.

use nalgebra::{DMatrix, DVector};

use super::BenchError;
use crate::geometry::Vec3;

/// `√(Σ(u_h − u_ref)²/n) / (max u_ref − min u_ref)`
pub fn nrmse(u_h: &[f64], u_ref: &[f64]) -> Result<f64, BenchError> {
    if u_h.len() != u_ref.len() {
        return Err(BenchError::LengthMismatch {
            a: u_h.len(),
            b: u_ref.len(),
        });
    }
    if u_ref.is_empty() {
        return Err(BenchError::Empty);
    }
    let (lo, hi) = u_ref
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(BenchError::ZeroRange);
    }
    let mse = u_h
        .iter()
        .zip(u_ref)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / u_h.len() as f64;
    Ok(mse.sqrt() / range)
}

/// Per-component NRMSE of a vector field and their Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorNrmse {
    pub components: Vec<f64>,
    pub norm: f64,
}

pub fn vector_nrmse(u_h: &[Vec3], u_ref: &[Vec3], dim: usize) -> Result<VectorNrmse, BenchError> {
    let components = (0..dim)
        .map(|c| {
            let a: Vec<f64> = u_h.iter().map(|u| u[c]).collect();
            let b: Vec<f64> = u_ref.iter().map(|u| u[c]).collect();
            nrmse(&a, &b)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let norm = components.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(VectorNrmse { components, norm })
}

/// Uniform bucket grid for fixed-radius neighbour queries.
struct BucketGrid<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<usize>>,
}

impl<'a> BucketGrid<'a> {
    fn new(points: &'a [Vec3], cell: f64) -> Self {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let dims = [0, 1, 2].map(|c| (((hi[c] - lo[c]) / cell).floor() as usize) + 1);
        let mut grid = BucketGrid {
            points,
            origin: lo,
            cell,
            dims,
            buckets: vec![Vec::new(); dims[0] * dims[1] * dims[2]],
        };
        for (i, p) in points.iter().enumerate() {
            let k = grid.index(grid.coords(p));
            grid.buckets[k].push(i);
        }
        grid
    }

    fn coords(&self, p: &Vec3) -> [i64; 3] {
        [0, 1, 2].map(|c| ((p[c] - self.origin[c]) / self.cell).floor() as i64)
    }

    fn index(&self, c: [i64; 3]) -> usize {
        (c[2] as usize * self.dims[1] + c[1] as usize) * self.dims[0] + c[0] as usize
    }

    /// Indices within `radius` (≤ cell size) of `x`.
    fn within(&self, x: &Vec3, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let c = self.coords(x);
        let r2 = radius * radius;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let q = [c[0] + dx, c[1] + dy, c[2] + dz];
                    if (0..3).any(|k| q[k] < 0 || q[k] >= self.dims[k] as i64) {
                        continue;
                    }
                    out.extend(
                        self.buckets[self.index(q)]
                            .iter()
                            .filter(|&&i| (self.points[i] - x).norm_squared() <= r2),
                    );
                }
            }
        }
    }
}

/// Quartic spline `1 − 6s² + 8s³ − 3s⁴` on `s ∈ [0, 1]`.
pub fn quartic_spline(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        1.0 - s * s * (6.0 - s * (8.0 - 3.0 * s))
    }
}

const WEIGHT_REGULARIZATION: f64 = 1e-6;

/// Linear-basis moving least squares transfer of a vector field from
/// `sources` to `targets`. The quartic spline weight is divided by
/// `s² + ε²`, which makes the fit interpolate at coincident data sites while
/// staying finite.
pub fn mls_map(
    sources: &[Vec3],
    values: &[Vec3],
    targets: &[Vec3],
    dim: usize,
    radius: f64,
) -> Result<Vec<Vec3>, BenchError> {
    if sources.len() != values.len() {
        return Err(BenchError::LengthMismatch {
            a: sources.len(),
            b: values.len(),
        });
    }
    let grid = BucketGrid::new(sources, radius);
    let mut near = Vec::new();
    let nb = dim + 1;
    let eps2 = WEIGHT_REGULARIZATION * WEIGHT_REGULARIZATION;
    targets
        .iter()
        .enumerate()
        .map(|(t, x)| {
            grid.within(x, radius, &mut near);
            let insufficient = BenchError::InsufficientNeighbors {
                target: t,
                found: near.len(),
                needed: nb,
            };
            if near.len() < nb {
                return Err(insufficient);
            }
            // basis [1, (x_i − x)/r] centred at the target: the fitted value is
            // the constant coefficient
            let mut a = DMatrix::<f64>::zeros(nb, nb);
            // spline-weighted moments only decide whether the cloud spans
            let mut geom = DMatrix::<f64>::zeros(nb, nb);
            let mut b = DMatrix::<f64>::zeros(nb, dim);
            let mut p = DVector::<f64>::zeros(nb);
            for &i in &near {
                let d = (sources[i] - x) / radius;
                let s2 = d.norm_squared();
                let ws = quartic_spline(s2.sqrt());
                let w = ws / (s2 + eps2);
                p[0] = 1.0;
                for c in 0..dim {
                    p[c + 1] = d[c];
                }
                let ppt = &p * p.transpose();
                geom += &ppt * ws;
                a += ppt * w;
                for c in 0..dim {
                    for r in 0..nb {
                        b[(r, c)] += w * p[r] * values[i][c];
                    }
                }
            }
            let sv = geom.singular_values();
            if !(sv.min() > 1e-10 * sv.max()) {
                return Err(insufficient);
            }
            let svd = a.svd(true, true);
            let coef = svd
                .solve(&b, 0.0)
                .map_err(|_| BenchError::InsufficientNeighbors {
                    target: t,
                    found: near.len(),
                    needed: nb,
                })?;
            let mut out = Vec3::zeros();
            for c in 0..dim {
                out[c] = coef[(0, c)];
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nrmse_examples() {
        assert_eq!(nrmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_relative_eq!(
            nrmse(&[0.0, 1.0, 3.0], &[0.0, 1.0, 2.0]).unwrap(),
            (1.0f64 / 3.0).sqrt() / 2.0,
            epsilon = 1e-15
        );
        assert!(matches!(
            nrmse(&[1.0, 1.0], &[3.0, 3.0]),
            Err(BenchError::ZeroRange)
        ));
        assert!(matches!(
            nrmse(&[1.0], &[1.0, 2.0]),
            Err(BenchError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn vector_nrmse_is_norm_of_components() {
        let r = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 1.0, 0.0)];
        let h = vec![Vec3::new(0.2, 0.0, 0.0), Vec3::new(2.0, 1.1, 0.0)];
        let v = vector_nrmse(&h, &r, 2).unwrap();
        let ex = (0.04f64 / 2.0).sqrt() / 2.0;
        let ey = (0.01f64 / 2.0).sqrt();
        assert_relative_eq!(v.components[0], ex, epsilon = 1e-15);
        assert_relative_eq!(v.components[1], ey, epsilon = 1e-15);
        assert_relative_eq!(v.norm, ex.hypot(ey), epsilon = 1e-15);
    }

    fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect()
    }

    #[test]
    fn affine_fields_are_reproduced() {
        let src = cloud(400, 1);
        let tgt = cloud(50, 2);
        let f = |x: &Vec3| Vec3::new(1.0 + 2.0 * x.x - x.z, 0.5 * x.y, 3.0 - x.x + x.y + x.z);
        let vals: Vec<Vec3> = src.iter().map(f).collect();
        let out = mls_map(&src, &vals, &tgt, 3, 0.35).unwrap();
        for (x, u) in tgt.iter().zip(&out) {
            assert!((u - f(x)).amax() < 1e-10);
        }
    }

    #[test]
    fn data_sites_are_interpolated() {
        let src = cloud(300, 4);
        let vals: Vec<Vec3> = src
            .iter()
            .map(|x| Vec3::new(x.x.sin(), x.y * x.z, x.norm()))
            .collect();
        let out = mls_map(&src, &vals, &src, 3, 0.4).unwrap();
        for (a, b) in out.iter().zip(&vals) {
            assert!((a - b).amax() < 1e-10);
        }
    }

    #[test]
    fn sparse_target_is_named() {
        let src = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let vals = vec![Vec3::zeros(); 3];
        let err = mls_map(
            &src,
            &vals,
            &[Vec3::zeros(), Vec3::new(5.0, 5.0, 0.0)],
            2,
            1.5,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            BenchError::InsufficientNeighbors { target: 1, .. }
        ));
    }
}
