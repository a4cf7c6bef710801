//! Compliance and volume-constraint sensitivities through the coupled
//! flow–elasticity system.

use rayon::prelude::*;

use crate::darcy::{DarcyModel, PressureSolver, PressureState};
use crate::elasticity::{ElasticModel, ElasticState};
use crate::error::{Error, Result};
use crate::fields::{DesignField, FilterOperator};

/// Whether the pressure-load contribution enters the compliance gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadTerm {
    #[default]
    Include,
    /// Treats the loads as fixed; only for studying the effect of the term.
    Exclude,
}

/// Gradients with respect to the raw design variables, one column per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityBundle {
    pub d_compliance: Vec<Vec<f64>>,
    /// `d_constraints[k][j]`: gradient of constraint `k` w.r.t. variable `j`.
    pub d_constraints: Vec<Vec<Vec<f64>>>,
}

fn check_fresh(design: &DesignField, pressure: &PressureState, elastic: &ElasticState) -> Result<()> {
    let fp = design.fingerprint();
    if pressure.design_fingerprint() != fp || elastic.design_fingerprint() != fp {
        return Err(Error::Consistency(
            "analysis states were computed for a different design".into(),
        ));
    }
    Ok(())
}

/// Compliance gradient with respect to the filtered variables.
pub fn compliance_sensitivity_filtered(
    design: &DesignField,
    elastic_model: &ElasticModel,
    elastic: &ElasticState,
    darcy_model: &DarcyModel,
    pressure_solver: &PressureSolver,
    pressure: &PressureState,
    load: LoadTerm,
) -> Result<Vec<Vec<f64>>> {
    check_fresh(design, pressure, elastic)?;
    let n = design.num_elements();
    let m = design.num_vars();
    let dmod = elastic_model.modulus_gradients(design)?;
    let energy: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|e| elastic_model.unit_energy(e, &elastic.u))
        .collect();
    let mut out: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..n).map(|e| -dmod[e][j] * energy[e]).collect())
        .collect();

    if load == LoadTerm::Include {
        // A is symmetric, so the flow adjoint reuses the state factorization
        let rhs: Vec<f64> = pressure.t.tr_mul_vec(&elastic.u).iter().map(|v| 2.0 * v).collect();
        let lambda = pressure_solver.solve_adjoint(pressure, &rhs)?;
        let rho1 = &design.filtered()[0];
        let p = &pressure.p;
        let load_terms: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|e| {
                let nodes = darcy_model.element_nodes(e);
                let da = darcy_model.element_matrix_derivative(e, rho1[e]);
                let nv = nodes.len();
                let mut s = 0.0;
                for a in 0..nv {
                    let la = lambda[nodes[a]];
                    if la == 0.0 {
                        continue;
                    }
                    let row: f64 = (0..nv).map(|b| da[a * nv + b] * p[nodes[b]]).sum();
                    s += la * row;
                }
                s
            })
            .collect();
        for (o, l) in out[0].iter_mut().zip(load_terms) {
            *o += l;
        }
    }
    Ok(out)
}

/// Compliance gradient with respect to the raw variables.
#[allow(clippy::too_many_arguments)]
pub fn compliance_sensitivity(
    design: &DesignField,
    filter: &FilterOperator,
    elastic_model: &ElasticModel,
    elastic: &ElasticState,
    darcy_model: &DarcyModel,
    pressure_solver: &PressureSolver,
    pressure: &PressureState,
    load: LoadTerm,
) -> Result<Vec<Vec<f64>>> {
    compliance_sensitivity_filtered(
        design,
        elastic_model,
        elastic,
        darcy_model,
        pressure_solver,
        pressure,
        load,
    )?
    .iter()
    .map(|col| filter.chain(col))
    .collect()
}

/// Gradients of the linear volume constraints `Σ v ρ̃_k / Σ v`.
pub fn constraint_sensitivities(design: &DesignField, filter: &FilterOperator) -> Result<Vec<Vec<Vec<f64>>>> {
    let total: f64 = design.volumes().iter().sum();
    let share: Vec<f64> = design.volumes().iter().map(|v| v / total).collect();
    let chained = filter.chain(&share)?;
    let n = design.num_elements();
    let m = design.num_vars();
    Ok((0..m)
        .map(|k| {
            (0..m)
                .map(|j| if j == k { chained.clone() } else { vec![0.0; n] })
                .collect()
        })
        .collect())
}
