//! Discretized benchmark problem assembled from a configuration.

use std::collections::BTreeSet;

use crate::adjoint::{compliance_sensitivity, constraint_sensitivities, LoadTerm};
use crate::darcy::{pressure_loads, DarcyModel, FlowParams, PressureSolver, PressureState};
use crate::elasticity::{ElasticModel, ElasticState};
use crate::error::{Error, Result};
use crate::fields::{build_filter, volume_bounds, volume_measures, DesignField, FilterOperator, MaterialSet};
use crate::mesh::{Edge, Mesh};

use super::config::{Fix, ProblemConfig};

/// Mesh, operators and solvers shared by every iteration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: ProblemConfig,
    pub mesh: Mesh,
    pub materials: MaterialSet,
    pub flow: FlowParams,
    pub filter: FilterOperator,
    pub darcy: DarcyModel,
    pub pressure_solver: PressureSolver,
    pub elastic: ElasticModel,
    /// Upper bounds of the volume measures.
    pub bounds: Vec<f64>,
}

/// Analysis of one design with its sensitivities.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub compliance: f64,
    /// Volume measures of the filtered variables.
    pub volumes: Vec<f64>,
    /// `volumes - bounds`, feasible when ≤ 0.
    pub constraints: Vec<f64>,
    pub d_compliance: Vec<Vec<f64>>,
    pub d_constraints: Vec<Vec<Vec<f64>>>,
    pub pressure: PressureState,
    pub elastic: ElasticState,
}

/// Position of a node along an edge as a fraction of its length.
fn edge_fraction(mesh: &Mesh, edge: Edge, node: usize) -> f64 {
    let p = mesh.nodes()[node];
    match edge {
        Edge::Top | Edge::Bottom => p[0] / mesh.lx(),
        Edge::Left | Edge::Right => p[1] / mesh.ly(),
    }
}

/// Constrained displacement dofs of the configured supports.
pub fn support_dofs(config: &ProblemConfig, mesh: &Mesh) -> Result<Vec<usize>> {
    let mut dofs = BTreeSet::new();
    for s in &config.supports {
        let edge = config.edge(&s.edge)?;
        let tol = 1e-9;
        let nodes: Vec<usize> = mesh
            .boundary_nodes(edge)
            .iter()
            .copied()
            .filter(|&n| {
                let t = edge_fraction(mesh, edge, n);
                t >= s.from - tol && t <= s.to + tol
            })
            .collect();
        if nodes.is_empty() {
            return Err(Error::Config(format!(
                "support on '{}' between {} and {} contains no mesh nodes",
                s.edge, s.from, s.to
            )));
        }
        for n in nodes {
            if matches!(s.fix, Fix::X | Fix::Xy) {
                dofs.insert(2 * n);
            }
            if matches!(s.fix, Fix::Y | Fix::Xy) {
                dofs.insert(2 * n + 1);
            }
        }
    }
    Ok(dofs.into_iter().collect())
}

/// Starting design: topology variable at the combined fraction, each
/// material variable at its share of the remaining stiffer phases.
pub fn initial_variables(fractions: &[f64]) -> Vec<f64> {
    let tail = volume_bounds(fractions);
    (0..fractions.len())
        .map(|k| if k == 0 { tail[0] } else { tail[k] / tail[k - 1] })
        .collect()
}

impl Problem {
    pub fn new(config: &ProblemConfig) -> Result<Self> {
        config.validate()?;
        let d = &config.domain;
        let mesh = Mesh::generate(d.nex, d.ney, d.lx, d.ly, d.layout)?;
        let materials = config.material_set()?;
        let flow = config.flow_params()?;
        let filter = build_filter(&mesh, config.filter_radius())?;
        let darcy = DarcyModel::new(&mesh, flow, materials.thickness())?;
        let pressure_solver = PressureSolver::new(&darcy, &mesh, &config.pressure_bc()?)?;
        let fixed = support_dofs(config, &mesh)?;
        let elastic = ElasticModel::new(&mesh, materials.clone(), &fixed)?;
        Ok(Problem {
            config: config.clone(),
            mesh,
            materials,
            flow,
            filter,
            darcy,
            pressure_solver,
            elastic,
            bounds: volume_bounds(&config.volume.fractions),
        })
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    pub fn num_vars(&self) -> usize {
        self.materials.num_vars()
    }

    /// Element volumes (area × thickness).
    pub fn element_volumes(&self) -> Vec<f64> {
        self.mesh
            .element_areas()
            .iter()
            .map(|a| a * self.materials.thickness())
            .collect()
    }

    pub fn initial_design(&self) -> Result<DesignField> {
        let values = initial_variables(&self.config.volume.fractions);
        DesignField::uniform(&values, self.element_volumes(), &self.filter)
    }

    pub fn design_from_raw(&self, raw: Vec<Vec<f64>>) -> Result<DesignField> {
        DesignField::new(raw, self.element_volumes(), &self.filter)
    }

    /// Solves the pressure and displacement fields of a design.
    pub fn analyse(&self, design: &DesignField) -> Result<(PressureState, ElasticState)> {
        let mut pressure = self.darcy.assemble(design);
        self.pressure_solver.solve(&mut pressure)?;
        let loads = pressure_loads(&pressure);
        let k = self.elastic.assemble(design)?;
        let elastic = self.elastic.solve(k, loads, design.fingerprint())?;
        Ok((pressure, elastic))
    }

    pub fn compliance(&self, design: &DesignField) -> Result<f64> {
        Ok(self.analyse(design)?.1.compliance)
    }

    pub fn evaluate(&self, design: &DesignField, load: LoadTerm) -> Result<Evaluation> {
        let (pressure, elastic) = self.analyse(design)?;
        let d_compliance = compliance_sensitivity(
            design,
            &self.filter,
            &self.elastic,
            &elastic,
            &self.darcy,
            &self.pressure_solver,
            &pressure,
            load,
        )?;
        let d_constraints = constraint_sensitivities(design, &self.filter)?;
        let volumes = volume_measures(design);
        let constraints = volumes.iter().zip(&self.bounds).map(|(v, b)| v - b).collect();
        Ok(Evaluation {
            compliance: elastic.compliance,
            volumes,
            constraints,
            d_compliance,
            d_constraints,
            pressure,
            elastic,
        })
    }
}
