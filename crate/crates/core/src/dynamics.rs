//! Lumped mass, internal forces (one-point bulk integration plus interior
//! penalty flux corrections), external loads and the critical time step.
//!
//! Sign conventions: `f_int = Σ_E ∫ BᵀS − Σ_e ∫ ⟦N⟧ᵀ t*`, with the interface
//! traction `t* = ½(P⁺ + P⁻) n₀ − β ⟦u⟧` where `n₀` is the stored interface
//! normal (from `plus` to `minus`), `⟦w⟧ = w⁺ − w⁻` and `P = F S`.
//!
//! Every facet integral is evaluated through the facet moments: the shape
//! functions are affine on each cell, so `∫ N_k t*` over a facet only needs
//! `∫ t*` and `∫ t* (x − x_c)ᵀ`. That turns the per-node interface terms into
//! one 3×3 "flux moment" per cell, scattered through the same gradient
//! weights as the bulk stress.

use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::ShapeFunctionSet;
use crate::geometry::{Mat3, Vec3};
use crate::material::{kinematics, second_pk_stress, MaterialError, MaterialParams};
use crate::mesh::DualComplex;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("cell {cell}: inverted deformation (det F = {det:e})")]
    Inversion { cell: usize, det: f64 },
    #[error("unknown boundary set '{0}'")]
    UnknownBoundarySet(String),
    #[error("invalid penalty coefficient {0}; must be finite and ≥ 0")]
    InvalidPenalty(f64),
}

fn attach_cell(cell: usize) -> impl Fn(MaterialError) -> DynamicsError {
    move |e| match e {
        MaterialError::Inversion { det } => DynamicsError::Inversion { cell, det },
        MaterialError::Invalid(_) => unreachable!("material validated on construction"),
    }
}

/// `⟦w⟧ = w⁺ − w⁻`
pub fn jump<T: Sub<Output = T>>(plus: T, minus: T) -> T {
    plus - minus
}

/// `{w} = ½(w⁺ + w⁻)`
pub fn avg<T: Add<Output = T> + Mul<f64, Output = T>>(plus: T, minus: T) -> T {
    (plus + minus) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub p: f64,
}

impl PenaltyConfig {
    pub fn new(p: f64) -> Result<Self, DynamicsError> {
        if p.is_finite() && p >= 0.0 {
            Ok(PenaltyConfig { p })
        } else {
            Err(DynamicsError::InvalidPenalty(p))
        }
    }

    /// Scalar of `β = pE/h_s I`, `h_s` the harmonic mean of both cells'
    /// characteristic lengths.
    pub fn beta(&self, young: f64, h_plus: f64, h_minus: f64) -> f64 {
        let hs = 2.0 * h_plus * h_minus / (h_plus + h_minus);
        self.p * young / hs
    }
}

/// `m_j = ρ₀ vol(E_j)`; the same mass acts on every displacement component.
pub fn lumped_mass(complex: &DualComplex, mat: &MaterialParams) -> Vec<f64> {
    complex
        .cells()
        .iter()
        .map(|c| mat.rho0 * c.volume)
        .collect()
}

/// Boundary facet whose masked traction components enter the weak form
/// explicitly (consistency term on essential boundaries).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialFacet {
    pub facet: usize,
    /// 1.0 on constrained components, 0.0 elsewhere.
    pub mask: Vec3,
}

/// Per-cell kinematic and stress state for one displacement field.
#[derive(Debug, Clone)]
pub struct CellStates {
    pub grad: Vec<Mat3>,
    /// First Piola–Kirchhoff stress `F S` per cell
    pub pk1: Vec<Mat3>,
}

/// Interface jump magnitudes over all interior facets (m).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct JumpStats {
    /// Largest facet RMS jump
    pub max_rms: f64,
    /// Mean facet RMS jump
    pub mean_rms: f64,
    /// Largest pointwise jump
    pub max_pointwise: f64,
}

/// Force state at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceState {
    pub f_int: Vec<Vec3>,
    pub f_ext: Vec<Vec3>,
    pub m_lumped: Vec<f64>,
}

/// Scatter accumulator: `f_k += Φ_c g_k` over each stencil, plus a direct
/// nodal term on the cell's own point.
struct Moments {
    phi: Vec<Mat3>,
    direct: Vec<Vec3>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Moments {
            phi: vec![Mat3::zeros(); n],
            direct: vec![Vec3::zeros(); n],
        }
    }
}

/// Interface data needed every step, precomputed from the facet moments.
#[derive(Debug, Clone)]
struct InterfaceOp {
    plus: usize,
    minus: usize,
    area: f64,
    vector_area: Vec3,
    second_moment: Mat3,
    normal_moment: Mat3,
    /// `x_c − x⁺`, `x_c − x⁻`
    off_plus: Vec3,
    off_minus: Vec3,
    beta: f64,
}

#[derive(Debug, Clone)]
struct BoundaryOp {
    cell: usize,
    mask: Vec3,
    vector_area: Vec3,
    normal_moment: Mat3,
    offset: Vec3,
}

/// Force assembly bound to one discretization, material and penalty.
pub struct ForceAssembler<'a> {
    complex: &'a DualComplex,
    shapes: &'a ShapeFunctionSet,
    mat: MaterialParams,
    penalty: PenaltyConfig,
    interfaces: Vec<InterfaceOp>,
    essential: Vec<BoundaryOp>,
    threads: usize,
    pool: Option<rayon::ThreadPool>,
}

impl<'a> ForceAssembler<'a> {
    pub fn new(
        complex: &'a DualComplex,
        shapes: &'a ShapeFunctionSet,
        mat: MaterialParams,
        penalty: PenaltyConfig,
    ) -> Self {
        let interfaces = complex
            .interfaces()
            .iter()
            .map(|f| {
                let m = &f.facet.moments;
                InterfaceOp {
                    plus: f.plus,
                    minus: f.minus,
                    area: m.area,
                    vector_area: m.vector_area,
                    second_moment: m.second_moment,
                    normal_moment: m.normal_moment,
                    off_plus: m.centroid - complex.point(f.plus),
                    off_minus: m.centroid - complex.point(f.minus),
                    beta: penalty.beta(
                        mat.young,
                        complex.cell(f.plus).char_length,
                        complex.cell(f.minus).char_length,
                    ),
                }
            })
            .collect();
        ForceAssembler {
            complex,
            shapes,
            mat,
            penalty,
            interfaces,
            essential: Vec::new(),
            threads: 0,
            pool: None,
        }
    }

    /// Add the traction consistency term `−∫ (P n)·v` on the given boundary
    /// facets, restricted to the masked components.
    pub fn with_essential_facets(mut self, facets: &[EssentialFacet]) -> Self {
        self.essential = facets
            .iter()
            .map(|e| {
                let bf = &self.complex.boundary_facets()[e.facet];
                let m = &bf.facet.moments;
                BoundaryOp {
                    cell: bf.cell,
                    mask: e.mask,
                    vector_area: m.vector_area,
                    normal_moment: m.normal_moment,
                    offset: m.centroid - self.complex.point(bf.cell),
                }
            })
            .collect();
        self
    }

    /// Number of worker threads for assembly; 0 assembles sequentially.
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self.pool = (threads > 0).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("thread pool")
        });
        self
    }

    pub fn complex(&self) -> &DualComplex {
        self.complex
    }

    pub fn shapes(&self) -> &ShapeFunctionSet {
        self.shapes
    }

    pub fn material(&self) -> &MaterialParams {
        &self.mat
    }

    pub fn penalty(&self) -> PenaltyConfig {
        self.penalty
    }

    pub fn cell_states(&self, u: &[Vec3]) -> Result<CellStates, DynamicsError> {
        let eval = |(c, s): (usize, &crate::approx::GfdmStencil)| {
            let g = s.gradient(u);
            let k = kinematics(&g).map_err(attach_cell(c))?;
            let stress = second_pk_stress(&k, &self.mat).map_err(attach_cell(c))?;
            Ok((g, k.f * stress))
        };
        let per_cell: Vec<(Mat3, Mat3)> = match &self.pool {
            Some(pool) => pool.install(|| {
                self.shapes
                    .stencils()
                    .par_iter()
                    .enumerate()
                    .map(eval)
                    .collect::<Result<_, DynamicsError>>()
            })?,
            None => self
                .shapes
                .stencils()
                .iter()
                .enumerate()
                .map(eval)
                .collect::<Result<_, DynamicsError>>()?,
        };
        let (grad, pk1) = per_cell.into_iter().unzip();
        Ok(CellStates { grad, pk1 })
    }

    /// Bulk term `Σ_E vol(E) Bᵀ S` per point. One-point integration is exact
    /// because `∇u`, hence `F` and `S`, are constant in each cell.
    pub fn internal_force_bulk(&self, u: &[Vec3]) -> Result<Vec<Vec3>, DynamicsError> {
        let st = self.cell_states(u)?;
        let mut acc = Moments::zeros(u.len());
        self.add_bulk(&st, &mut acc, 1.0);
        Ok(self.scatter(&acc))
    }

    /// Interface term `Σ_e ∫ ⟦N⟧ᵀ t*` per point.
    pub fn flux_correction(&self, u: &[Vec3]) -> Result<Vec<Vec3>, DynamicsError> {
        let st = self.cell_states(u)?;
        let mut acc = Moments::zeros(u.len());
        self.add_interfaces(u, &st, &mut acc, 1.0);
        Ok(self.scatter(&acc))
    }

    /// Full internal force `bulk − flux` (minus the essential-boundary
    /// consistency term when configured).
    pub fn internal_force(&self, u: &[Vec3]) -> Result<Vec<Vec3>, DynamicsError> {
        let st = self.cell_states(u)?;
        Ok(self.internal_force_from_states(u, &st))
    }

    pub fn internal_force_from_states(&self, u: &[Vec3], st: &CellStates) -> Vec<Vec3> {
        let mut acc = Moments::zeros(u.len());
        self.add_bulk(st, &mut acc, 1.0);
        self.add_interfaces(u, st, &mut acc, -1.0);
        self.add_essential(st, &mut acc, -1.0);
        self.scatter(&acc)
    }

    fn add_bulk(&self, st: &CellStates, acc: &mut Moments, sign: f64) {
        for (c, cell) in self.complex.cells().iter().enumerate() {
            acc.phi[c] += st.pk1[c] * (sign * cell.volume);
        }
    }

    /// Interface traction moments `(∫ t*, ∫ t* rᵀ)` about the facet centroid.
    fn interface_traction(&self, op: &InterfaceOp, u: &[Vec3], st: &CellStates) -> (Vec3, Mat3) {
        let (a, b) = (op.plus, op.minus);
        let (ga, gb) = (&st.grad[a], &st.grad[b]);
        let j0 = jump(u[a] + ga * op.off_plus, u[b] + gb * op.off_minus);
        let jg = jump(*ga, *gb);
        let p_avg = avg(st.pk1[a], st.pk1[b]);
        let t0 = p_avg * op.vector_area - j0 * (op.beta * op.area);
        let t1 = p_avg * op.normal_moment - jg * op.second_moment * op.beta;
        (t0, t1)
    }

    fn add_interfaces(&self, u: &[Vec3], st: &CellStates, acc: &mut Moments, sign: f64) {
        for op in &self.interfaces {
            let (t0, t1) = self.interface_traction(op, u, st);
            // ∫ N_k^c t* = δ_kc T0 + (T0 (x_c − x_c_node)ᵀ + T1) g_k
            let h_plus = t0 * op.off_plus.transpose() + t1;
            let h_minus = t0 * op.off_minus.transpose() + t1;
            acc.phi[op.plus] += h_plus * sign;
            acc.direct[op.plus] += t0 * sign;
            acc.phi[op.minus] -= h_minus * sign;
            acc.direct[op.minus] -= t0 * sign;
        }
    }

    fn add_essential(&self, st: &CellStates, acc: &mut Moments, sign: f64) {
        for op in &self.essential {
            let p = st.pk1[op.cell];
            let t0 = (p * op.vector_area).component_mul(&op.mask);
            let t1 = Mat3::from_diagonal(&op.mask) * p * op.normal_moment;
            acc.phi[op.cell] += (t0 * op.offset.transpose() + t1) * sign;
            acc.direct[op.cell] += t0 * sign;
        }
    }

    fn scatter(&self, acc: &Moments) -> Vec<Vec3> {
        scatter_moments(self.shapes, &acc.phi, &acc.direct, self.pool.as_ref())
    }

    /// Interface displacement jump statistics. Per interface the jump is
    /// measured as its root mean square over the facet, `(∫|⟦u⟧|²/|e|)^½`,
    /// evaluated exactly from the facet moments; the pointwise maximum is
    /// attained at a piece vertex since the jump is affine on each piece.
    pub fn interface_jumps(&self, u: &[Vec3]) -> JumpStats {
        let mut stats = JumpStats::default();
        for (op, f) in self.interfaces.iter().zip(self.complex.interfaces()) {
            let (sa, sb) = (self.shapes.stencil(op.plus), self.shapes.stencil(op.minus));
            let (ga, gb) = (sa.gradient(u), sb.gradient(u));
            let j0 = jump(
                u[op.plus] + ga * op.off_plus,
                u[op.minus] + gb * op.off_minus,
            );
            let jg = jump(ga, gb);
            // ∫ (x − x_c) = 0, so the cross term vanishes
            let mean_sq =
                j0.norm_squared() + (jg.transpose() * jg * op.second_moment).trace() / op.area;
            let rms = mean_sq.max(0.0).sqrt();
            let peak = f
                .facet
                .pieces
                .iter()
                .flat_map(|p| p.vertices().iter())
                .map(|x| {
                    let ua = u[op.plus] + ga * (x - sa.origin);
                    let ub = u[op.minus] + gb * (x - sb.origin);
                    (ua - ub).norm()
                })
                .fold(0.0, f64::max);
            stats.max_rms = stats.max_rms.max(rms);
            stats.mean_rms += rms;
            stats.max_pointwise = stats.max_pointwise.max(peak);
        }
        stats.mean_rms /= self.interfaces.len().max(1) as f64;
        stats
    }

    /// Critical time step estimate for this discretization.
    pub fn critical_time_step(&self) -> f64 {
        critical_time_step(self.shapes, self.complex, &self.mat, &self.penalty)
    }
}

/// `f_k = Σ_c Φ_c g_k^c + direct_k`, chunked over threads when a pool is given.
fn scatter_moments(
    shapes: &ShapeFunctionSet,
    phi: &[Mat3],
    direct: &[Vec3],
    pool: Option<&rayon::ThreadPool>,
) -> Vec<Vec3> {
    let n = direct.len();
    let scatter_range = |range: std::ops::Range<usize>| {
        let mut f = vec![Vec3::zeros(); n];
        for c in range {
            let s = shapes.stencil(c);
            for (&k, g) in s.nodes.iter().zip(&s.grad_weights) {
                f[k] += phi[c] * g;
            }
        }
        f
    };
    let mut f = match pool {
        Some(pool) => {
            let chunk = n.div_ceil(pool.current_num_threads().max(1)).max(1);
            pool.install(|| {
                (0..n)
                    .step_by(chunk)
                    .collect::<Vec<_>>()
                    .into_par_iter()
                    .map(|start| scatter_range(start..(start + chunk).min(n)))
                    .reduce(
                        || vec![Vec3::zeros(); n],
                        |mut a, b| {
                            for (x, y) in a.iter_mut().zip(b) {
                                *x += y;
                            }
                            a
                        },
                    )
            })
        }
        None => scatter_range(0..n),
    };
    for (x, d) in f.iter_mut().zip(direct) {
        *x += d;
    }
    f
}

/// Prescribed loads: dead tractions per boundary set (Pa) and a body force
/// density `ρ₀ b` (N/m³).
#[derive(Debug, Clone, Default)]
pub struct ExternalLoads {
    pub tractions: Vec<(String, Vec3)>,
    pub body: Vec3,
}

/// `f_ext,k = Σ_facets ∫ N_k t̄ + Σ_E vol(E) N_k(x̄_E) ρ₀b` (one-point at the
/// cell centroid for the body term).
pub fn external_force(
    complex: &DualComplex,
    shapes: &ShapeFunctionSet,
    loads: &ExternalLoads,
) -> Result<Vec<Vec3>, DynamicsError> {
    let n = complex.point_count();
    let mut phi = vec![Mat3::zeros(); n];
    let mut direct = vec![Vec3::zeros(); n];
    for (name, t) in &loads.tractions {
        let set = complex
            .boundary_set(name)
            .ok_or_else(|| DynamicsError::UnknownBoundarySet(name.clone()))?;
        for &fi in set {
            let bf = &complex.boundary_facets()[fi];
            let m = &bf.facet.moments;
            let t0 = t * m.area;
            phi[bf.cell] += t0 * (m.centroid - complex.point(bf.cell)).transpose();
            direct[bf.cell] += t0;
        }
    }
    if loads.body != Vec3::zeros() {
        for (c, cell) in complex.cells().iter().enumerate() {
            let t0 = loads.body * cell.volume;
            phi[c] += t0 * (cell.centroid - complex.point(c)).transpose();
            direct[c] += t0;
        }
    }
    Ok(scatter_moments(shapes, &phi, &direct, None))
}

/// `d̄t = min_j 2/√λ_j` with `λ_j = m_j c² ‖C_j C_jᵀ‖₂` (`m_j` the support
/// size), reduced by `√p` when `p > 0`.
pub fn critical_time_step(
    shapes: &ShapeFunctionSet,
    _complex: &DualComplex,
    mat: &MaterialParams,
    penalty: &PenaltyConfig,
) -> f64 {
    let c2 = mat.wave_speed().powi(2);
    let dt_bar = shapes
        .stencils()
        .iter()
        .map(|s| {
            let lambda = (s.len() - 1) as f64 * c2 * s.cct_norm();
            2.0 / lambda.sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    if penalty.p > 0.0 {
        dt_bar / penalty.p.sqrt()
    } else {
        dt_bar
    }
}
