//! Damped central-difference time stepping with load ramping (dynamic
//! relaxation towards the quasi-static state).
//!
//! Update with lumped mass `m` and mass-proportional damping `c`:
//!
//! `u_{k+1} = [2u_k − (1 − c dt/2) u_{k−1} + dt²/m (f_ext − f_int)] / (1 + c dt/2)`
//!
//! which is the undamped recursion `u_{k+1} = 2u_k − u_{k−1} + dt² M⁻¹ r` for
//! `c = 0`.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::ShapeFunctionSet;
use crate::dynamics::{
    external_force, lumped_mass, DynamicsError, EssentialFacet, ExternalLoads, ForceAssembler,
    JumpStats, PenaltyConfig,
};
use crate::geometry::Vec3;
use crate::material::MaterialParams;
use crate::mesh::DualComplex;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("diverged at step {step}: point {point} has displacement {value:e}")]
    Diverged {
        step: usize,
        point: usize,
        value: f64,
    },
    #[error("unknown boundary set '{0}'")]
    UnknownBoundarySet(String),
    #[error("point {point} component {component}: essential values {a} and {b} conflict")]
    ConflictingEssential {
        point: usize,
        component: usize,
        a: f64,
        b: f64,
    },
    #[error("boundary set '{traction}' loads component {component} that '{essential}' prescribes")]
    OverlappingConditions {
        essential: String,
        traction: String,
        component: usize,
    },
    #[error("invalid solver controls: {0}")]
    InvalidControls(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("log output: {0}")]
    Log(#[from] std::io::Error),
}

/// Boundary condition on a named boundary set. Values are the full load,
/// reached at the end of the ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// Prescribed displacement (m); `None` leaves a component free.
    Essential {
        set: String,
        values: [Option<f64>; 3],
    },
    /// Dead traction in the reference configuration (Pa).
    Traction { set: String, traction: [f64; 3] },
}

impl BoundaryCondition {
    pub fn set(&self) -> &str {
        match self {
            BoundaryCondition::Essential { set, .. } | BoundaryCondition::Traction { set, .. } => {
                set
            }
        }
    }

    pub fn fixed(set: &str, values: [Option<f64>; 3]) -> Self {
        BoundaryCondition::Essential {
            set: set.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    Linear,
    /// `(1 − cos πs)/2`, zero rate at both ends
    #[default]
    Smooth,
}

impl RampShape {
    pub fn factor(self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self {
            RampShape::Linear => s,
            RampShape::Smooth => 0.5 * (1.0 - (std::f64::consts::PI * s).cos()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Damping {
    /// Constant mass-proportional coefficient (1/s)
    Fixed(f64),
    /// Near-critical damping of the slowest active mode, re-estimated from
    /// the Rayleigh quotient of successive increments after the ramp.
    #[default]
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverControls {
    pub dt_safety: f64,
    pub ramp_steps: usize,
    pub ramp_shape: RampShape,
    pub damping: Damping,
    /// Window (steps) of the displacement-change criterion
    pub window: usize,
    /// Tolerances relative to the domain diagonal (m, m/s)
    pub displacement_tol: f64,
    pub speed_tol: f64,
    pub max_steps: usize,
    /// Emit a log line every this many steps (0 disables)
    pub log_every: usize,
    /// Include the traction consistency term on essential boundaries
    pub essential_flux: bool,
    /// Assembly threads (0 = sequential)
    pub threads: usize,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls {
            dt_safety: 0.8,
            ramp_steps: 10_000,
            ramp_shape: RampShape::Smooth,
            damping: Damping::Adaptive,
            window: 200,
            displacement_tol: 1e-6,
            speed_tol: 1e-6,
            max_steps: 500_000,
            log_every: 0,
            essential_flux: false,
            threads: 0,
        }
    }
}

impl SolverControls {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            v.push(format!(
                "dt_safety must lie in (0, 1], got {}",
                self.dt_safety
            ));
        }
        if let Damping::Fixed(c) = self.damping {
            if !(c >= 0.0 && c.is_finite()) {
                v.push(format!("damping must be finite and ≥ 0, got {c}"));
            }
        }
        if self.window == 0 {
            v.push("window must be positive".into());
        }
        if !(self.displacement_tol > 0.0) || !(self.speed_tol > 0.0) {
            v.push("tolerances must be positive".into());
        }
        if self.max_steps == 0 {
            v.push("max_steps must be positive".into());
        }
        v
    }
}

/// Time-stepping state. `u_prev`/`u_curr` are the displacements at steps
/// `k−1` and `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u_prev: Vec<Vec3>,
    pub u_curr: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub load_factor: f64,
    pub damping: f64,
}

impl SolverState {
    pub fn at_rest(n: usize, dt: f64, damping: f64) -> Self {
        SolverState {
            u_prev: vec![Vec3::zeros(); n],
            u_curr: vec![Vec3::zeros(); n],
            v: vec![Vec3::zeros(); n],
            step: 0,
            t: 0.0,
            dt,
            load_factor: 0.0,
            damping,
        }
    }

    /// `½ Σ m |v|²`
    pub fn kinetic_energy(&self, mass: &[f64]) -> f64 {
        0.5 * self
            .v
            .iter()
            .zip(mass)
            .map(|(v, m)| m * v.norm_squared())
            .sum::<f64>()
    }

    pub fn max_speed(&self) -> f64 {
        self.v.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Prescribed displacement components per point at full load.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EssentialDofs {
    pub points: Vec<(usize, [Option<f64>; 3])>,
}

impl EssentialDofs {
    fn apply(&self, u: &mut [Vec3], factor: f64) {
        for (p, vals) in &self.points {
            for (c, v) in vals.iter().enumerate() {
                if let Some(v) = v {
                    u[*p][c] = factor * v;
                }
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.points
            .iter()
            .all(|(_, v)| v.iter().flatten().all(|x| *x == 0.0))
    }

    fn free_mask(&self, n: usize) -> Vec<Vec3> {
        let mut m = vec![Vec3::repeat(1.0); n];
        for (p, vals) in &self.points {
            for (c, v) in vals.iter().enumerate() {
                if v.is_some() {
                    m[*p][c] = 0.0;
                }
            }
        }
        m
    }
}

/// One damped central-difference step with essential values overwritten.
pub fn step(
    state: &SolverState,
    f_ext: &[Vec3],
    f_int: &[Vec3],
    mass: &[f64],
    essential: &EssentialDofs,
    next_load_factor: f64,
) -> Result<SolverState, SolverError> {
    let dt = state.dt;
    let a = 0.5 * state.damping * dt;
    let (c_next, c_prev) = (1.0 / (1.0 + a), (1.0 - a) / (1.0 + a));
    let mut u_next: Vec<Vec3> = state
        .u_curr
        .iter()
        .zip(&state.u_prev)
        .zip(f_ext.iter().zip(f_int))
        .zip(mass)
        .map(|(((uc, up), (fe, fi)), m)| {
            (uc * 2.0 + (fe - fi) * (dt * dt / m)) * c_next - up * c_prev
        })
        .collect();
    essential.apply(&mut u_next, next_load_factor);
    if let Some((point, u)) = u_next
        .iter()
        .enumerate()
        .find(|(_, u)| !u.iter().all(|x| x.is_finite()))
    {
        return Err(SolverError::Diverged {
            step: state.step + 1,
            point,
            value: u.norm(),
        });
    }
    let v = u_next
        .iter()
        .zip(&state.u_curr)
        .map(|(un, uc)| (un - uc) / dt)
        .collect();
    Ok(SolverState {
        u_prev: state.u_curr.clone(),
        u_curr: u_next,
        v,
        step: state.step + 1,
        t: state.t + dt,
        dt,
        load_factor: next_load_factor,
        damping: state.damping,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// Step budget exhausted; the state is the last accepted one.
    MaxSteps,
    /// A cell's deformation gradient lost positive determinant.
    Inverted {
        cell: usize,
        step: usize,
    },
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub u: Vec<Vec3>,
    pub status: SolveStatus,
    pub steps: usize,
    pub time: f64,
    pub dt: f64,
    pub dt_crit: f64,
    pub damping: f64,
    pub jumps: JumpStats,
    /// Kinetic energy after every step
    pub kinetic_energy: Vec<f64>,
    pub ramp_steps: usize,
}

impl SolveReport {
    pub fn inverted(&self) -> bool {
        matches!(self.status, SolveStatus::Inverted { .. })
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// A quasi-static problem on a prepared discretization.
pub struct QuasiStaticProblem<'a> {
    pub complex: &'a DualComplex,
    pub shapes: &'a ShapeFunctionSet,
    pub material: MaterialParams,
    pub penalty: PenaltyConfig,
    pub conditions: Vec<BoundaryCondition>,
    /// Body force density `ρ₀b` (N/m³)
    pub body: Vec3,
}

impl<'a> QuasiStaticProblem<'a> {
    pub fn new(
        complex: &'a DualComplex,
        shapes: &'a ShapeFunctionSet,
        material: MaterialParams,
        penalty: PenaltyConfig,
        conditions: Vec<BoundaryCondition>,
    ) -> Self {
        QuasiStaticProblem {
            complex,
            shapes,
            material,
            penalty,
            conditions,
            body: Vec3::zeros(),
        }
    }

    /// Resolve essential conditions to point DOFs and check that no traction
    /// loads a component some essential set prescribes on a shared facet.
    pub fn essential_dofs(&self) -> Result<EssentialDofs, SolverError> {
        let mesh = self.complex.mesh();
        let mut map: BTreeMap<usize, [Option<f64>; 3]> = BTreeMap::new();
        for bc in &self.conditions {
            if self.complex.boundary_set(bc.set()).is_none() {
                return Err(SolverError::UnknownBoundarySet(bc.set().into()));
            }
            if let BoundaryCondition::Essential { set, values } = bc {
                for p in mesh.boundary_set_nodes(set).unwrap_or_default() {
                    let slot = map.entry(p).or_default();
                    for (component, v) in values.iter().enumerate().take(self.complex.dim()) {
                        match (slot[component], v) {
                            (Some(a), Some(b)) if a != *b => {
                                return Err(SolverError::ConflictingEssential {
                                    point: p,
                                    component,
                                    a,
                                    b: *b,
                                })
                            }
                            (_, Some(b)) => slot[component] = Some(*b),
                            _ => {}
                        }
                    }
                }
            }
        }
        if self.complex.dim() == 2 {
            // plane problems keep the out-of-plane component at zero
            for slot in map.values_mut() {
                slot[2] = None;
            }
        }
        for e in &self.conditions {
            let BoundaryCondition::Essential { set: es, values } = e else {
                continue;
            };
            for t in &self.conditions {
                let BoundaryCondition::Traction { set: ts, traction } = t else {
                    continue;
                };
                let shared = self
                    .complex
                    .boundary_set(es)
                    .unwrap()
                    .iter()
                    .any(|f| self.complex.boundary_set(ts).unwrap().contains(f));
                if !shared {
                    continue;
                }
                if let Some(component) = (0..3).find(|&c| values[c].is_some() && traction[c] != 0.0)
                {
                    return Err(SolverError::OverlappingConditions {
                        essential: es.clone(),
                        traction: ts.clone(),
                        component,
                    });
                }
            }
        }
        Ok(EssentialDofs {
            points: map.into_iter().collect(),
        })
    }

    /// Boundary facets of essential sets with their constrained-component mask.
    pub fn essential_facets(&self) -> Vec<EssentialFacet> {
        let mut masks: BTreeMap<usize, Vec3> = BTreeMap::new();
        for bc in &self.conditions {
            if let BoundaryCondition::Essential { set, values } = bc {
                for &f in self.complex.boundary_set(set).unwrap_or(&[]) {
                    let m = masks.entry(f).or_insert_with(Vec3::zeros);
                    for c in 0..self.complex.dim() {
                        if values[c].is_some() {
                            m[c] = 1.0;
                        }
                    }
                }
            }
        }
        masks
            .into_iter()
            .map(|(facet, mask)| EssentialFacet { facet, mask })
            .collect()
    }

    pub fn external_loads(&self) -> ExternalLoads {
        ExternalLoads {
            tractions: self
                .conditions
                .iter()
                .filter_map(|bc| match bc {
                    BoundaryCondition::Traction { set, traction } => {
                        Some((set.clone(), Vec3::from(*traction)))
                    }
                    _ => None,
                })
                .collect(),
            body: self.body,
        }
    }

    /// Slowest-mode estimate `ω₀ = (π/2) √(μ/ρ₀) / L`, `L` the largest
    /// bounding-box extent.
    pub fn fundamental_frequency(&self) -> f64 {
        let (lo, hi) = self.complex.mesh().bounding_box();
        let l = (hi - lo).max();
        0.5 * std::f64::consts::PI * (self.material.shear_modulus() / self.material.rho0).sqrt() / l
    }

    pub fn solve(&self, controls: &SolverControls) -> Result<SolveReport, SolverError> {
        self.solve_logged(controls, None)
    }

    /// Ramp the loads, relax with damping until the window criterion holds.
    /// Log lines `step,time,load_factor,max_speed,ke` go to `log` when given.
    pub fn solve_logged(
        &self,
        controls: &SolverControls,
        mut log: Option<&mut dyn Write>,
    ) -> Result<SolveReport, SolverError> {
        let bad = controls.violations();
        if !bad.is_empty() {
            return Err(SolverError::InvalidControls(bad.join("; ")));
        }
        let n = self.complex.point_count();
        let essential = self.essential_dofs()?;
        let loads = self.external_loads();
        let f_ext_full = external_force(self.complex, self.shapes, &loads)?;
        let mut asm = ForceAssembler::new(self.complex, self.shapes, self.material, self.penalty)
            .with_threads(controls.threads);
        if controls.essential_flux {
            asm = asm.with_essential_facets(&self.essential_facets());
        }
        let mass = lumped_mass(self.complex, &self.material);
        let free = essential.free_mask(n);
        let dt_crit = asm.critical_time_step();
        let dt = controls.dt_safety * dt_crit;
        let unloaded = essential.is_zero() && f_ext_full.iter().all(|f| *f == Vec3::zeros());
        let ramp_end = if unloaded { 0 } else { controls.ramp_steps };
        let c0 = match controls.damping {
            Damping::Fixed(c) => c,
            Damping::Adaptive => 2.0 * self.fundamental_frequency(),
        };
        let diag = self.complex.diameter();
        let (u_tol, v_tol) = (controls.displacement_tol * diag, controls.speed_tol * diag);

        let mut state = SolverState::at_rest(n, dt, c0);
        let factor = |k: usize| {
            if ramp_end == 0 {
                1.0
            } else {
                controls.ramp_shape.factor(k as f64 / ramp_end as f64)
            }
        };
        state.load_factor = factor(0);
        essential.apply(&mut state.u_curr, state.load_factor);
        state.u_prev.clone_from(&state.u_curr);

        const CHECK_EVERY: usize = 10;
        let mut snapshots: VecDeque<(usize, Vec<Vec3>)> = VecDeque::new();
        if ramp_end == 0 {
            snapshots.push_back((0, state.u_curr.clone()));
        }
        let mut ke = Vec::new();
        let mut f_prev: Option<Vec<Vec3>> = None;
        let mut omega2 = c0 * c0 / 4.0;
        let mut status = SolveStatus::MaxSteps;

        if let Some(w) = log.as_deref_mut() {
            writeln!(w, "step,time,load_factor,max_speed,ke")?;
        }
        while state.step < controls.max_steps {
            let f_int = match asm.internal_force(&state.u_curr) {
                Ok(f) => f,
                Err(DynamicsError::Inversion { cell, .. }) => {
                    status = SolveStatus::Inverted {
                        cell,
                        step: state.step,
                    };
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            if controls.damping == Damping::Adaptive && state.step > ramp_end {
                if let Some(fp) = &f_prev {
                    let (mut num, mut den) = (0.0, 0.0);
                    for j in 0..n {
                        let du = (state.u_curr[j] - state.u_prev[j]).component_mul(&free[j]);
                        num += du.dot(&(f_int[j] - fp[j]));
                        den += mass[j] * du.norm_squared();
                    }
                    if den > 0.0 && num > 0.0 {
                        // smoothed Rayleigh quotient of the current increment
                        omega2 = 0.98 * omega2 + 0.02 * (num / den);
                        state.damping = 2.0 * omega2.sqrt();
                    }
                }
            }
            let lf = factor(state.step + 1);
            let f_ext: Vec<Vec3> = f_ext_full.iter().map(|f| f * lf).collect();
            let next = step(&state, &f_ext, &f_int, &mass, &essential, lf)?;
            if let Some((point, u)) = next
                .u_curr
                .iter()
                .enumerate()
                .find(|(_, u)| u.norm() > 100.0 * diag)
            {
                return Err(SolverError::Diverged {
                    step: next.step,
                    point,
                    value: u.norm(),
                });
            }
            f_prev = Some(f_int);
            state = next;
            let k_e = state.kinetic_energy(&mass);
            ke.push(k_e);
            if let Some(w) = log.as_deref_mut() {
                if controls.log_every > 0 && state.step % controls.log_every == 0 {
                    writeln!(
                        w,
                        "{},{:e},{},{:e},{:e}",
                        state.step,
                        state.t,
                        state.load_factor,
                        state.max_speed(),
                        k_e
                    )?;
                }
            }
            if state.step >= ramp_end && (state.step - ramp_end) % CHECK_EVERY == 0 {
                while snapshots
                    .front()
                    .is_some_and(|(k, _)| state.step - k > controls.window)
                {
                    snapshots.pop_front();
                }
                let settled = state.step > ramp_end
                    && state.max_speed() < v_tol
                    && snapshots.front().is_some_and(|(_, old)| {
                        old.iter()
                            .zip(&state.u_curr)
                            .all(|(a, b)| (a - b).amax() < u_tol)
                    });
                if settled {
                    status = SolveStatus::Converged;
                    break;
                }
                snapshots.push_back((state.step, state.u_curr.clone()));
            }
        }
        let jumps = asm.interface_jumps(&state.u_curr);
        Ok(SolveReport {
            u: state.u_curr,
            status,
            steps: state.step,
            time: state.t,
            dt,
            dt_crit,
            damping: state.damping,
            jumps,
            kinetic_energy: ke,
            ramp_steps: ramp_end,
        })
    }
}
