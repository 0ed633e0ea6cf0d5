//! Validation studies: penalty sweep on a 2D bar, unconstrained and
//! constrained deformation of a 3D block, with NRMSE reporting.

mod metrics;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{mls_map, nrmse, quartic_spline, vector_nrmse, VectorNrmse};

use crate::approx::{ApproxError, ShapeFunctionSet, WeightScheme};
use crate::dynamics::{DynamicsError, PenaltyConfig};
use crate::geometry::Vec3;
use crate::material::MaterialParams;
use crate::mesh::{generate, read_mesh, DualComplex, DualError, MeshError, SimplicialMesh};
use crate::solver::{
    BoundaryCondition, QuasiStaticProblem, SolveReport, SolverControls, SolverError,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("reference field has zero range; NRMSE normalization undefined")]
    ZeroRange,
    #[error("field lengths differ ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("empty field")]
    Empty,
    #[error("target point {target}: {found} source neighbours within radius, need {needed} in general position")]
    InsufficientNeighbors {
        target: usize,
        found: usize,
        needed: usize,
    },
    #[error("unknown case '{0}'")]
    UnknownCase(String),
    #[error("case {case}: {msg}")]
    InvalidCase { case: CaseId, msg: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Dual(#[from] DualError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    Penalty2dExt,
    Penalty2dComp,
    UnconComp3d,
    ConExt3d,
    ConComp3d,
}

impl CaseId {
    pub const ALL: [CaseId; 5] = [
        CaseId::Penalty2dExt,
        CaseId::Penalty2dComp,
        CaseId::UnconComp3d,
        CaseId::ConExt3d,
        CaseId::ConComp3d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::Penalty2dExt => "penalty2d_ext",
            CaseId::Penalty2dComp => "penalty2d_comp",
            CaseId::UnconComp3d => "uncon_comp3d",
            CaseId::ConExt3d => "con_ext3d",
            CaseId::ConComp3d => "con_comp3d",
        }
    }
}

impl std::fmt::Display for CaseId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseId {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| BenchError::UnknownCase(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSource {
    /// `[0, l₀] × [0, l₁]` with `n` nodes per side
    Rectangle {
        size: [f64; 2],
        nodes: [usize; 2],
    },
    /// `[0, l₀] × [0, l₁] × [0, l₂]` with `n` nodes per side
    Block {
        size: [f64; 3],
        nodes: [usize; 3],
    },
    File {
        path: PathBuf,
    },
}

impl MeshSource {
    pub fn load(&self) -> Result<SimplicialMesh, MeshError> {
        match self {
            MeshSource::Rectangle { size, nodes } => {
                generate::rectangle(size[0], size[1], nodes[0], nodes[1], None)
            }
            MeshSource::Block { size, nodes } => generate::block(*size, *nodes, None),
            MeshSource::File { path } => read_mesh(path),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            MeshSource::Rectangle { nodes, .. } => format!("rectangle {}x{}", nodes[0], nodes[1]),
            MeshSource::Block { nodes, .. } => {
                format!("block {}x{}x{}", nodes[0], nodes[1], nodes[2])
            }
            MeshSource::File { path } => path.display().to_string(),
        }
    }

    fn cube(n: usize) -> Self {
        MeshSource::Block {
            size: [0.1; 3],
            nodes: [n; 3],
        }
    }
}

/// Parameters of one validation study. Deformation levels are fractions of
/// the loaded length (positive = extension).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudy {
    pub id: CaseId,
    pub material: MaterialParams,
    /// Penalty coefficient of the 3D studies
    pub penalty: f64,
    /// Penalty coefficients compared in the sweep
    pub penalties: Vec<f64>,
    /// Penalty coefficient of the sweep's reference solution
    pub reference_penalty: f64,
    pub levels: Vec<f64>,
    pub meshes: Vec<MeshSource>,
    /// Finer mesh for self-convergence references
    pub reference: Option<MeshSource>,
    /// MLS radius in units of the source mesh's mean edge length
    pub mls_radius: f64,
    pub controls: SolverControls,
}

impl CaseStudy {
    /// Setup of the published study at desk scale.
    pub fn standard(id: CaseId) -> Self {
        let material = MaterialParams {
            rho0: 1000.0,
            young: 3000.0,
            nu: 0.45,
        };
        let bar = MeshSource::Rectangle {
            size: [10.0, 4.0],
            nodes: [25, 5],
        };
        let base = CaseStudy {
            id,
            material,
            penalty: 20.0,
            penalties: vec![],
            reference_penalty: 100.0,
            levels: vec![],
            meshes: vec![],
            reference: None,
            mls_radius: 2.0,
            controls: SolverControls::default(),
        };
        match id {
            CaseId::Penalty2dExt | CaseId::Penalty2dComp => CaseStudy {
                penalties: vec![0.0, 10.0, 20.0, 50.0],
                levels: vec![if id == CaseId::Penalty2dExt {
                    0.2
                } else {
                    -0.2
                }],
                meshes: vec![bar],
                ..base
            },
            CaseId::UnconComp3d => CaseStudy {
                levels: vec![-0.4],
                meshes: vec![
                    MeshSource::cube(12),
                    MeshSource::cube(15),
                    MeshSource::cube(18),
                ],
                ..base
            },
            CaseId::ConExt3d => CaseStudy {
                levels: vec![0.6, 1.0, 2.0],
                meshes: vec![MeshSource::cube(12)],
                reference: Some(MeshSource::cube(18)),
                ..base
            },
            CaseId::ConComp3d => CaseStudy {
                levels: vec![-0.2, -0.4, -0.6],
                meshes: vec![MeshSource::cube(12)],
                reference: Some(MeshSource::cube(18)),
                ..base
            },
        }
    }

    /// Boundary conditions at a deformation level for a domain spanning
    /// `[lo, hi]`.
    pub fn conditions(&self, level: f64, lo: Vec3, hi: Vec3) -> Vec<BoundaryCondition> {
        let fix = BoundaryCondition::fixed;
        match self.id {
            CaseId::Penalty2dExt | CaseId::Penalty2dComp => vec![
                fix("xmin", [Some(0.0), Some(0.0), None]),
                fix("xmax", [Some(level * (hi.x - lo.x)), None, None]),
            ],
            CaseId::UnconComp3d => vec![
                fix("xmin", [Some(0.0), None, None]),
                fix("ymin", [None, Some(0.0), None]),
                fix("zmin", [None, None, Some(0.0)]),
                fix("zmax", [None, None, Some(level * (hi.z - lo.z))]),
            ],
            CaseId::ConExt3d | CaseId::ConComp3d => vec![
                fix("zmin", [Some(0.0), Some(0.0), Some(0.0)]),
                fix("zmax", [Some(0.0), Some(0.0), Some(level * (hi.z - lo.z))]),
            ],
        }
    }
}

/// A solved field on one discretization.
#[derive(Debug, Clone)]
pub struct CaseSolution {
    pub label: String,
    pub mesh: SimplicialMesh,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NrmseRow {
    /// Mean edge length of the mesh (m)
    pub h: f64,
    pub points: usize,
    pub level: f64,
    pub p: f64,
    pub nrmse: f64,
    pub components: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
    pub inverted: bool,
    /// Largest facet RMS interface jump (m)
    pub max_jump: f64,
    pub max_displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NrmseReport {
    pub case: CaseId,
    pub reference: String,
    pub rows: Vec<NrmseRow>,
}

impl NrmseReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("case,h,level,p,nrmse,steps,inverted\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{},{},{:e},{},{}",
                self.case, r.h, r.level, r.p, r.nrmse, r.steps, r.inverted
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} (reference: {})\n", self.case, self.reference);
        let _ = writeln!(
            s,
            "{:>8} {:>10} {:>7} {:>6} {:>11} {:>28} {:>8} {:>5} {:>5} {:>10}",
            "points",
            "h (m)",
            "level",
            "p",
            "NRMSE",
            "components",
            "steps",
            "conv",
            "inv",
            "max jump"
        );
        for r in &self.rows {
            let comps: Vec<String> = r.components.iter().map(|c| format!("{c:.3e}")).collect();
            let _ = writeln!(
                s,
                "{:>8} {:>10.3e} {:>7.2} {:>6} {:>11.4e} {:>28} {:>8} {:>5} {:>5} {:>10.3e}",
                r.points,
                r.h,
                r.level,
                r.p,
                r.nrmse,
                comps.join(" "),
                r.steps,
                r.converged,
                r.inverted,
                r.max_jump
            );
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct CaseRun {
    pub report: NrmseReport,
    pub solutions: Vec<CaseSolution>,
}

struct Discretization {
    complex: DualComplex,
    shapes: ShapeFunctionSet,
    h: f64,
}

impl Discretization {
    fn new(source: &MeshSource) -> Result<Self, BenchError> {
        let mesh = source.load()?;
        let h = mesh.mean_edge_length();
        let complex = DualComplex::build(mesh)?;
        let shapes = ShapeFunctionSet::build(&complex, WeightScheme::Uniform)?;
        Ok(Discretization { complex, shapes, h })
    }

    fn solve(&self, case: &CaseStudy, level: f64, p: f64) -> Result<SolveReport, BenchError> {
        let (lo, hi) = self.complex.mesh().bounding_box();
        let problem = QuasiStaticProblem::new(
            &self.complex,
            &self.shapes,
            case.material,
            PenaltyConfig::new(p)?,
            case.conditions(level, lo, hi),
        );
        Ok(problem.solve(&case.controls)?)
    }

    fn row(&self, level: f64, p: f64, err: VectorNrmse, r: &SolveReport) -> NrmseRow {
        NrmseRow {
            h: self.h,
            points: self.complex.point_count(),
            level,
            p,
            nrmse: err.norm,
            components: err.components,
            steps: r.steps,
            converged: r.converged(),
            inverted: r.inverted(),
            max_jump: r.jumps.max_rms,
            max_displacement: r.u.iter().map(|u| u.norm()).fold(0.0, f64::max),
        }
    }

    fn solution(&self, label: String, report: SolveReport) -> CaseSolution {
        CaseSolution {
            label,
            mesh: self.complex.mesh().clone(),
            report,
        }
    }
}

fn expect(case: &CaseStudy, ids: &[CaseId]) -> Result<(), BenchError> {
    if !ids.contains(&case.id) {
        return Err(BenchError::InvalidCase {
            case: case.id,
            msg: "wrong runner".into(),
        });
    }
    if case.meshes.is_empty() || case.levels.is_empty() {
        return Err(BenchError::InvalidCase {
            case: case.id,
            msg: "needs meshes and levels".into(),
        });
    }
    Ok(())
}

/// NRMSE of each swept penalty against the reference penalty on the same
/// mesh (displacement vector field, in-plane components).
pub fn run_penalty_sweep(case: &CaseStudy) -> Result<CaseRun, BenchError> {
    expect(case, &[CaseId::Penalty2dExt, CaseId::Penalty2dComp])?;
    let mut rows = Vec::new();
    let mut solutions = Vec::new();
    let mut reference = String::new();
    for source in &case.meshes {
        let disc = Discretization::new(source)?;
        let dim = disc.complex.dim();
        for &level in &case.levels {
            let r_ref = disc.solve(case, level, case.reference_penalty)?;
            reference = format!("p = {} on {}", case.reference_penalty, source.describe());
            for &p in &case.penalties {
                let r = disc.solve(case, level, p)?;
                let err = vector_nrmse(&r.u, &r_ref.u, dim)?;
                rows.push(disc.row(level, p, err, &r));
                solutions.push(disc.solution(format!("level{level}_p{p}"), r));
            }
            solutions
                .push(disc.solution(format!("level{level}_p{}", case.reference_penalty), r_ref));
        }
    }
    Ok(CaseRun {
        report: NrmseReport {
            case: case.id,
            reference,
            rows,
        },
        solutions,
    })
}

/// NRMSE of `u_z` against the homogeneous solution `u_z = level · z`.
pub fn run_unconstrained_compression(case: &CaseStudy) -> Result<CaseRun, BenchError> {
    expect(case, &[CaseId::UnconComp3d])?;
    let mut rows = Vec::new();
    let mut solutions = Vec::new();
    for source in &case.meshes {
        let disc = Discretization::new(source)?;
        let (lo, _) = disc.complex.mesh().bounding_box();
        for &level in &case.levels {
            let r = disc.solve(case, level, case.penalty)?;
            let exact: Vec<f64> = disc
                .complex
                .points()
                .iter()
                .map(|x| level * (x.z - lo.z))
                .collect();
            let uz: Vec<f64> = r.u.iter().map(|u| u.z).collect();
            let e = nrmse(&uz, &exact)?;
            let err = VectorNrmse {
                components: vec![e],
                norm: e,
            };
            rows.push(disc.row(level, case.penalty, err, &r));
            solutions.push(disc.solution(format!("{}_level{level}", source.describe()), r));
        }
    }
    Ok(CaseRun {
        report: NrmseReport {
            case: case.id,
            reference: "analytical u_z = level * z".into(),
            rows,
        },
        solutions,
    })
}

fn run_constrained(case: &CaseStudy) -> Result<CaseRun, BenchError> {
    let reference_source = case
        .reference
        .as_ref()
        .ok_or_else(|| BenchError::InvalidCase {
            case: case.id,
            msg: "needs a reference mesh".into(),
        })?;
    let reference = Discretization::new(reference_source)?;
    let discs = case
        .meshes
        .iter()
        .map(Discretization::new)
        .collect::<Result<Vec<_>, _>>()?;
    for d in &discs {
        if d.h <= reference.h {
            return Err(BenchError::InvalidCase {
                case: case.id,
                msg: "reference mesh must be strictly finer".into(),
            });
        }
    }
    let mut rows = Vec::new();
    let mut solutions = Vec::new();
    for &level in &case.levels {
        let r_ref = reference.solve(case, level, case.penalty)?;
        for (source, disc) in case.meshes.iter().zip(&discs) {
            let r = disc.solve(case, level, case.penalty)?;
            let mapped = mls_map(
                disc.complex.points(),
                &r.u,
                reference.complex.points(),
                3,
                case.mls_radius * disc.h,
            )?;
            let err = vector_nrmse(&mapped, &r_ref.u, 3)?;
            rows.push(disc.row(level, case.penalty, err, &r));
            solutions.push(disc.solution(format!("{}_level{level}", source.describe()), r));
        }
        solutions.push(reference.solution(format!("reference_level{level}"), r_ref));
    }
    Ok(CaseRun {
        report: NrmseReport {
            case: case.id,
            reference: format!(
                "FPM p = {} on {} ({} points, h = {:.3e} m)",
                case.penalty,
                reference_source.describe(),
                reference.complex.point_count(),
                reference.h
            ),
            rows,
        },
        solutions,
    })
}

/// Displacement-field NRMSE against a finer-mesh solution after MLS transfer
/// onto the reference points.
pub fn run_constrained_extension(case: &CaseStudy) -> Result<CaseRun, BenchError> {
    expect(case, &[CaseId::ConExt3d])?;
    run_constrained(case)
}

pub fn run_constrained_compression(case: &CaseStudy) -> Result<CaseRun, BenchError> {
    expect(case, &[CaseId::ConComp3d])?;
    run_constrained(case)
}

pub fn run_case(case: &CaseStudy) -> Result<CaseRun, BenchError> {
    match case.id {
        CaseId::Penalty2dExt | CaseId::Penalty2dComp => run_penalty_sweep(case),
        CaseId::UnconComp3d => run_unconstrained_compression(case),
        CaseId::ConExt3d => run_constrained_extension(case),
        CaseId::ConComp3d => run_constrained_compression(case),
    }
}
