//! JSON run configuration for `fpm solve`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::CaseId;
use crate::material::MaterialParams;
use crate::mesh::SimplicialMesh;
use crate::solver::{BoundaryCondition, SolverControls};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Mesh file; relative paths resolve against the config file's directory
    pub mesh: PathBuf,
    pub material: MaterialParams,
    pub boundary_conditions: Vec<BoundaryCondition>,
    #[serde(default)]
    pub body_force: [f64; 3],
    pub penalty: f64,
    #[serde(default)]
    pub controls: SolverControls,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseId>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve_mesh(&self, config_dir: &Path) -> PathBuf {
        if self.mesh.is_absolute() {
            self.mesh.clone()
        } else {
            config_dir.join(&self.mesh)
        }
    }

    /// Every violated constraint that does not need the mesh.
    pub fn violations(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .material
            .violations()
            .into_iter()
            .map(|m| format!("material: {m}"))
            .collect();
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            v.push(format!(
                "penalty must be finite and ≥ 0, got {}",
                self.penalty
            ));
        }
        v.extend(
            self.controls
                .violations()
                .into_iter()
                .map(|m| format!("controls: {m}")),
        );
        if self.body_force.iter().any(|x| !x.is_finite()) {
            v.push("body_force must be finite".into());
        }
        for (i, bc) in self.boundary_conditions.iter().enumerate() {
            let finite = match bc {
                BoundaryCondition::Essential { values, .. } => {
                    values.iter().flatten().all(|x| x.is_finite())
                }
                BoundaryCondition::Traction { traction, .. } => {
                    traction.iter().all(|x| x.is_finite())
                }
            };
            if !finite {
                v.push(format!("boundary_conditions[{i}]: values must be finite"));
            }
        }
        v
    }

    /// Violations against a loaded mesh: unknown boundary-set names.
    pub fn mesh_violations(&self, mesh: &SimplicialMesh) -> Vec<String> {
        self.boundary_conditions
            .iter()
            .enumerate()
            .filter(|(_, bc)| mesh.boundary_set(bc.set()).is_none())
            .map(|(i, bc)| {
                format!(
                    "boundary_conditions[{i}]: unknown boundary set '{}'",
                    bc.set()
                )
            })
            .collect()
    }
}
