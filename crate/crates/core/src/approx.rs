//! Point-wise discontinuous linear trial/test functions.
//!
//! In the cell `E₀` of point `P₀` the displacement is
//! `uʰ(x) = u⁰ + ∇u (x − x₀)`, where the gradient is the weighted
//! least-squares fit to the support values `u¹..uᵐ`:
//! `a = (AᵀWA)⁻¹AᵀW (uₘ − u₀) = C u_E`.
//!
//! `A` is block diagonal with one identical `m × dim` offset block per
//! displacement component, so `C` collapses to one gradient-weight vector
//! `g_k` per stencil point with `∇u = Σ_k u_k ⊗ g_k`. The dense `C` is
//! still available through [`GfdmStencil::c_matrix`].

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Mat3, Vec3};
use crate::mesh::{DualComplex, RANK_TOLERANCE};

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error(
        "point {point} at {origin:?}: stencil {neighbors:?} is rank deficient (σmin/σmax = {ratio:e})"
    )]
    RankDeficient {
        point: usize,
        origin: Vec3,
        neighbors: Vec<(usize, Vec3)>,
        ratio: f64,
    },
}

/// Weight function of the least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    #[default]
    Uniform,
    /// `w_i = 1 / ‖P_i − P₀‖²`
    InverseDistanceSquared,
}

impl WeightScheme {
    fn weight(&self, offset: &Vec3) -> f64 {
        match self {
            WeightScheme::Uniform => 1.0,
            WeightScheme::InverseDistanceSquared => 1.0 / offset.norm_squared(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GfdmStencil {
    pub point: usize,
    pub origin: Vec3,
    pub dim: usize,
    /// `[P₀, P₁, .., Pₘ]` as global point indices.
    pub nodes: Vec<usize>,
    /// Gradient weight `g_k` of every stencil node, same order as `nodes`.
    pub grad_weights: Vec<Vec3>,
}

impl GfdmStencil {
    pub fn build(
        complex: &DualComplex,
        point: usize,
        scheme: WeightScheme,
    ) -> Result<Self, ApproxError> {
        let support = complex.support_of(point);
        let coords: Vec<Vec3> = support.iter().map(|&j| complex.point(j)).collect();
        Self::from_points(
            complex.dim(),
            point,
            complex.point(point),
            support,
            &coords,
            scheme,
        )
    }

    /// Build from explicit neighbour indices and coordinates.
    pub fn from_points(
        dim: usize,
        point: usize,
        origin: Vec3,
        neighbors: &[usize],
        coords: &[Vec3],
        scheme: WeightScheme,
    ) -> Result<Self, ApproxError> {
        Self::from_weighted_points(dim, point, origin, neighbors, coords, |d| scheme.weight(d))
    }

    /// Build with an arbitrary positive weight per offset `P_i − P₀`.
    pub fn from_weighted_points<W: Fn(&Vec3) -> f64>(
        dim: usize,
        point: usize,
        origin: Vec3,
        neighbors: &[usize],
        coords: &[Vec3],
        weight: W,
    ) -> Result<Self, ApproxError> {
        assert_eq!(neighbors.len(), coords.len());
        let m = coords.len();
        let deficient = |ratio: f64| ApproxError::RankDeficient {
            point,
            origin,
            neighbors: neighbors
                .iter()
                .copied()
                .zip(coords.iter().copied())
                .collect(),
            ratio,
        };
        if m < dim {
            return Err(deficient(0.0));
        }
        let sqrt_w: Vec<f64> = coords
            .iter()
            .map(|c| weight(&(c - origin)).sqrt())
            .collect();
        // W^{1/2} X, one row per neighbour
        let xw = DMatrix::from_fn(m, dim, |r, c| sqrt_w[r] * (coords[r][c] - origin[c]));
        let svd = xw.svd(true, true);
        let (smin, smax) = (svd.singular_values.min(), svd.singular_values.max());
        if smax <= 0.0 || smin < RANK_TOLERANCE * smax {
            return Err(deficient(if smax > 0.0 { smin / smax } else { 0.0 }));
        }
        // D = (XᵀWX)⁻¹XᵀW = pinv(W^{1/2}X) W^{1/2}, dim × m
        let pinv = svd.pseudo_inverse(0.0).expect("svd computed with u and v");
        let mut grad_weights = Vec::with_capacity(m + 1);
        let mut g0 = Vec3::zeros();
        let mut gk = Vec::with_capacity(m);
        for r in 0..m {
            let mut g = Vec3::zeros();
            for c in 0..dim {
                g[c] = pinv[(c, r)] * sqrt_w[r];
            }
            g0 -= g;
            gk.push(g);
        }
        grad_weights.push(g0);
        grad_weights.extend(gk);
        let mut nodes = Vec::with_capacity(m + 1);
        nodes.push(point);
        nodes.extend_from_slice(neighbors);
        Ok(GfdmStencil {
            point,
            origin,
            dim,
            nodes,
            grad_weights,
        })
    }

    pub fn neighbors(&self) -> &[usize] {
        &self.nodes[1..]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Dense `C` of size `dim² × dim(m+1)`: rows follow
    /// `[∂uₓ/∂x, ∂uₓ/∂y, .., ∂u_y/∂x, ..]`, columns `[uₓ⁰, u_y⁰, .., uₓ¹, ..]`.
    pub fn c_matrix(&self) -> DMatrix<f64> {
        let d = self.dim;
        let mut c = DMatrix::zeros(d * d, d * self.len());
        for (k, g) in self.grad_weights.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    c[(i * d + j, k * d + i)] = g[j];
                }
            }
        }
        c
    }

    /// Gradient `∇u` (3×3, zero-padded in 2D) from the global displacement field.
    pub fn gradient(&self, u: &[Vec3]) -> Mat3 {
        let mut g = Mat3::zeros();
        for (&n, w) in self.nodes.iter().zip(&self.grad_weights) {
            g += u[n] * w.transpose();
        }
        g
    }

    /// Gradient as a `dim × dim` matrix from the stacked local vector
    /// `u_E = [u⁰, u¹, .., uᵐ]`.
    pub fn displacement_gradient(&self, u_e: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        assert_eq!(u_e.len(), d * self.len());
        let a = self.c_matrix() * DVector::from_column_slice(u_e);
        DMatrix::from_fn(d, d, |i, j| a[i * d + j])
    }

    /// Scalar shape values `N_k(x) = δ_k0 + g_k · (x − x₀)`.
    pub fn shape_values(&self, x: &Vec3) -> Vec<f64> {
        let r = x - self.origin;
        self.grad_weights
            .iter()
            .enumerate()
            .map(|(k, g)| if k == 0 { 1.0 } else { 0.0 } + g.dot(&r))
            .collect()
    }

    /// `N(x)` of size `dim × dim(m+1)` with `uʰ(x) = N(x) u_E`.
    pub fn evaluate_shape(&self, x: &Vec3) -> DMatrix<f64> {
        let d = self.dim;
        let mut n = DMatrix::zeros(d, d * self.len());
        for (k, s) in self.shape_values(x).into_iter().enumerate() {
            for i in 0..d {
                n[(i, k * d + i)] = s;
            }
        }
        n
    }

    /// `uʰ(x)` from the global displacement field.
    pub fn evaluate(&self, u: &[Vec3], x: &Vec3) -> Vec3 {
        u[self.point] + self.gradient(u) * (x - self.origin)
    }

    /// Largest eigenvalue of `Σ_k g_k g_kᵀ`, i.e. `‖C Cᵀ‖₂`.
    pub fn cct_norm(&self) -> f64 {
        let mut m = Mat3::zeros();
        for g in &self.grad_weights {
            m += g * g.transpose();
        }
        m.symmetric_eigenvalues().max()
    }
}

/// One stencil per point, built once on the reference configuration.
#[derive(Debug, Clone)]
pub struct ShapeFunctionSet {
    stencils: Vec<GfdmStencil>,
}

impl ShapeFunctionSet {
    pub fn build(complex: &DualComplex, scheme: WeightScheme) -> Result<Self, ApproxError> {
        let stencils = (0..complex.point_count())
            .map(|i| GfdmStencil::build(complex, i, scheme))
            .collect::<Result<_, _>>()?;
        Ok(ShapeFunctionSet { stencils })
    }

    /// Same result as [`Self::build`], with points distributed over the
    /// current rayon pool.
    pub fn build_parallel(
        complex: &DualComplex,
        scheme: WeightScheme,
    ) -> Result<Self, ApproxError> {
        let stencils = (0..complex.point_count())
            .into_par_iter()
            .map(|i| GfdmStencil::build(complex, i, scheme))
            .collect::<Result<_, _>>()?;
        Ok(ShapeFunctionSet { stencils })
    }

    pub fn stencil(&self, i: usize) -> &GfdmStencil {
        &self.stencils[i]
    }

    pub fn stencils(&self) -> &[GfdmStencil] {
        &self.stencils
    }

    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    /// Per-cell constant gradients.
    pub fn gradients(&self, u: &[Vec3]) -> Vec<Mat3> {
        self.stencils.iter().map(|s| s.gradient(u)).collect()
    }
}
