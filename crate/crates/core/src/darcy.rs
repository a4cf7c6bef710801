//! Design-dependent pressure field from Darcy flow with a drainage sink, and
//! its conversion to consistent nodal loads.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::DesignField;
use crate::mesh::{tabulate_basis, Edge, Mesh, NV};
use crate::sparse::{AssemblyPlan, ConstrainedSolver, CscMatrix, Factorization};

/// Flow and drainage parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Void flow coefficient `K_v`.
    pub kv: f64,
    /// Flow contrast `K_s / K_v`.
    pub epsilon: f64,
    pub eta_k: f64,
    pub beta_k: f64,
    pub eta_d: f64,
    pub beta_d: f64,
    /// Drainage coefficient of fully solid material.
    pub ds: f64,
}

impl FlowParams {
    pub fn new(
        kv: f64,
        epsilon: f64,
        (eta_k, beta_k): (f64, f64),
        (eta_d, beta_d): (f64, f64),
        ds: f64,
    ) -> Result<Self> {
        let p = FlowParams {
            kv,
            epsilon,
            eta_k,
            beta_k,
            eta_d,
            beta_d,
            ds,
        };
        p.validate()?;
        Ok(p)
    }

    /// `K_v = 1`, `ε = 1e-7`, `{η, β} = {0.2, 10}` for both steps, with the
    /// drainage set by the penetration rule for `depth`.
    pub fn with_penetration_depth(depth: f64) -> Result<Self> {
        let (kv, epsilon) = (1.0, 1e-7);
        FlowParams::new(
            kv,
            epsilon,
            (0.2, 10.0),
            (0.2, 10.0),
            penetration_drainage(epsilon * kv, 0.1, depth)?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("flow parameters: {what}")));
        if !(self.kv > 0.0 && self.kv.is_finite()) {
            return bad("K_v must be positive");
        }
        // ε = 1 (no contrast) is accepted for design-independent load studies
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad("flow contrast must lie in (0, 1]");
        }
        if !(self.beta_k > 0.0 && self.beta_d > 0.0) {
            return bad("step slopes must be positive");
        }
        if !(self.eta_k > 0.0 && self.eta_k < 1.0 && self.eta_d > 0.0 && self.eta_d < 1.0) {
            return bad("step positions must lie in (0, 1)");
        }
        if !(self.ds >= 0.0 && self.ds.is_finite()) {
            return bad("drainage coefficient must be non-negative");
        }
        Ok(())
    }

    /// Solid flow coefficient `K_s = ε K_v`.
    pub fn ks(&self) -> f64 {
        self.epsilon * self.kv
    }
}

/// Drainage coefficient that makes the pressure in solid material decay to
/// the fraction `remainder` over `depth`: `D_s = (ln r / Δs)² K_s`.
pub fn penetration_drainage(ks: f64, remainder: f64, depth: f64) -> Result<f64> {
    if !(remainder > 0.0 && remainder < 1.0) || !(depth > 0.0) || !(ks > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "penetration rule needs 0 < r < 1, Δs > 0, K_s > 0 (got r = {remainder}, Δs = {depth}, K_s = {ks})"
        )));
    }
    Ok((remainder.ln() / depth).powi(2) * ks)
}

/// Smooth step `[tanh(βη) + tanh(β(x-η))] / [tanh(βη) + tanh(β(1-η))]`.
pub fn smooth_heaviside(x: f64, beta: f64, eta: f64) -> f64 {
    let a = (beta * eta).tanh();
    (a + (beta * (x - eta)).tanh()) / (a + (beta * (1.0 - eta)).tanh())
}

pub fn smooth_heaviside_derivative(x: f64, beta: f64, eta: f64) -> f64 {
    let a = (beta * eta).tanh();
    let t = (beta * (x - eta)).tanh();
    beta * (1.0 - t * t) / (a + (beta * (1.0 - eta)).tanh())
}

/// Flow coefficient `K_v(1 - (1-ε) H(ρ̃₁))` and its derivative.
pub fn flow_coefficient(rho1: f64, params: &FlowParams) -> (f64, f64) {
    let h = smooth_heaviside(rho1, params.beta_k, params.eta_k);
    let dh = smooth_heaviside_derivative(rho1, params.beta_k, params.eta_k);
    let c = params.kv * (1.0 - params.epsilon);
    (params.kv - c * h, -c * dh)
}

/// Drainage coefficient `D_s H(ρ̃₁)` and its derivative.
pub fn drainage_coefficient(rho1: f64, params: &FlowParams) -> (f64, f64) {
    let h = smooth_heaviside(rho1, params.beta_d, params.eta_d);
    let dh = smooth_heaviside_derivative(rho1, params.beta_d, params.eta_d);
    (params.ds * h, params.ds * dh)
}

/// Global `2·nodes × nodes` matrix with `F = -T p`, stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl TransformMatrix {
    fn from_element_blocks(mesh: &Mesh, blocks: &[[f64; 2 * NV * NV]]) -> Self {
        let n = mesh.num_nodes();
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); 2 * n];
        for (conn, block) in mesh.elements().iter().zip(blocks) {
            for a in 0..NV {
                for d in 0..2 {
                    let row = 2 * conn[a] + d;
                    for b in 0..NV {
                        *rows[row].entry(conn[b]).or_insert(0.0) += block[(2 * a + d) * NV + b];
                    }
                }
            }
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for r in rows {
            for (c, v) in r {
                cols.push(c);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        TransformMatrix {
            nrows: 2 * n,
            ncols: n,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// `T p`.
    pub fn mul_vec(&self, p: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.values[k] * p[self.cols[k]])
                    .sum()
            })
            .collect()
    }

    /// `Tᵀ u`.
    pub fn tr_mul_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (i, &ui) in u.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[k]] += self.values[k] * ui;
            }
        }
        out
    }
}

/// Prescribed pressures per named edge (Pa).
pub type PressureBc = BTreeMap<Edge, f64>;

/// Node → prescribed pressure. Conflicting values on shared nodes are an error.
pub fn resolve_pressure_bc(mesh: &Mesh, bc: &PressureBc) -> Result<BTreeMap<usize, f64>> {
    let mut out = BTreeMap::new();
    for (&edge, &value) in bc {
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "pressure on {edge} is not finite"
            )));
        }
        for &node in mesh.boundary_nodes(edge) {
            if let Some(prev) = out.insert(node, value) {
                if prev != value {
                    return Err(Error::InvalidArgument(format!(
                        "node {node} receives conflicting pressures {prev} and {value}"
                    )));
                }
            }
        }
    }
    Ok(out)
}

/// Assembled flow system and, once solved, the pressure field.
#[derive(Debug, Clone)]
pub struct PressureState {
    pub a: CscMatrix,
    pub p: Vec<f64>,
    pub t: Arc<TransformMatrix>,
    pub dirichlet: BTreeMap<usize, f64>,
    pub(crate) factor: Option<Arc<Factorization>>,
    pub(crate) fingerprint: u64,
}

impl PressureState {
    pub fn design_fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Element flow operators and the pressure-to-load transformation of a mesh.
#[derive(Debug, Clone)]
pub struct DarcyModel {
    params: FlowParams,
    /// `∫ ∇Nᵀ∇N` per element, row-major 6×6.
    diffusion: Vec<[f64; NV * NV]>,
    /// `∫ NᵀN` per element.
    mass: Vec<[f64; NV * NV]>,
    plan: AssemblyPlan,
    t: Arc<TransformMatrix>,
    elements: Vec<[usize; NV]>,
}

impl DarcyModel {
    pub fn new(mesh: &Mesh, params: FlowParams, thickness: f64) -> Result<Self> {
        params.validate()?;
        let per_element: Vec<_> = (0..mesh.num_elements())
            .into_par_iter()
            .map(|e| {
                let basis = tabulate_basis(&mesh.element_vertices(e))?;
                let mut lap = [0.0; NV * NV];
                let mut mass = [0.0; NV * NV];
                let mut tb = [0.0; 2 * NV * NV];
                for s in &basis {
                    for a in 0..NV {
                        for b in 0..NV {
                            lap[a * NV + b] += s.weight
                                * (s.grad[a][0] * s.grad[b][0] + s.grad[a][1] * s.grad[b][1]);
                            mass[a * NV + b] += s.weight * s.shape[a] * s.shape[b];
                            for d in 0..2 {
                                tb[(2 * a + d) * NV + b] +=
                                    thickness * s.weight * s.shape[a] * s.grad[b][d];
                            }
                        }
                    }
                }
                Ok((lap, mass, tb))
            })
            .collect::<Result<_>>()?;
        let mut diffusion = Vec::with_capacity(per_element.len());
        let mut mass = Vec::with_capacity(per_element.len());
        let mut blocks = Vec::with_capacity(per_element.len());
        for (l, m, t) in per_element {
            diffusion.push(l);
            mass.push(m);
            blocks.push(t);
        }
        let dofs: Vec<Vec<usize>> = mesh.elements().iter().map(|c| c.to_vec()).collect();
        Ok(DarcyModel {
            params,
            diffusion,
            mass,
            plan: AssemblyPlan::new(mesh.num_nodes(), &dofs),
            t: Arc::new(TransformMatrix::from_element_blocks(mesh, &blocks)),
            elements: mesh.elements().to_vec(),
        })
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn transform(&self) -> &Arc<TransformMatrix> {
        &self.t
    }

    pub fn num_nodes(&self) -> usize {
        self.plan.dim()
    }

    pub fn element_nodes(&self, e: usize) -> &[usize; NV] {
        &self.elements[e]
    }

    /// `K(ρ̃₁) ∫∇Nᵀ∇N + D(ρ̃₁) ∫NᵀN` for element `e`.
    pub fn element_matrix(&self, e: usize, rho1: f64) -> [f64; NV * NV] {
        let (k, _) = flow_coefficient(rho1, &self.params);
        let (d, _) = drainage_coefficient(rho1, &self.params);
        self.combine(e, k, d)
    }

    /// Derivative of [`DarcyModel::element_matrix`] with respect to `ρ̃₁`.
    pub fn element_matrix_derivative(&self, e: usize, rho1: f64) -> [f64; NV * NV] {
        let (_, dk) = flow_coefficient(rho1, &self.params);
        let (_, dd) = drainage_coefficient(rho1, &self.params);
        self.combine(e, dk, dd)
    }

    fn combine(&self, e: usize, k: f64, d: f64) -> [f64; NV * NV] {
        let mut out = [0.0; NV * NV];
        for (i, o) in out.iter_mut().enumerate() {
            *o = k * self.diffusion[e][i] + d * self.mass[e][i];
        }
        out
    }

    /// Assembles the global flow matrix for the filtered topology variable.
    pub fn assemble(&self, design: &DesignField) -> PressureState {
        let rho1 = &design.filtered()[0];
        let a = self
            .plan
            .assemble(|e, out| out.copy_from_slice(&self.element_matrix(e, rho1[e])));
        PressureState {
            a,
            p: vec![0.0; self.num_nodes()],
            t: Arc::clone(&self.t),
            dirichlet: BTreeMap::new(),
            factor: None,
            fingerprint: design.fingerprint(),
        }
    }

    /// Pattern-only matrix for building a [`PressureSolver`].
    pub fn pattern(&self) -> CscMatrix {
        self.plan.assemble(|_, out| out.fill(1.0))
    }
}

/// Dirichlet-constrained pressure solver with a cached symbolic factorization.
#[derive(Debug, Clone)]
pub struct PressureSolver {
    solver: ConstrainedSolver,
    dirichlet: BTreeMap<usize, f64>,
    values: Vec<f64>,
}

/// Relative residual accepted for a pressure solve.
pub const PRESSURE_RESIDUAL_TOL: f64 = 1e-10;

impl PressureSolver {
    pub fn new(model: &DarcyModel, mesh: &Mesh, bc: &PressureBc) -> Result<Self> {
        let dirichlet = resolve_pressure_bc(mesh, bc)?;
        if dirichlet.is_empty() {
            return Err(Error::IllPosed(
                "no Dirichlet pressure nodes: the flow problem has no unique solution".into(),
            ));
        }
        let prescribed: Vec<usize> = dirichlet.keys().copied().collect();
        let solver = ConstrainedSolver::new(&model.pattern(), &prescribed)?;
        let mut values = vec![0.0; model.num_nodes()];
        for (&n, &v) in &dirichlet {
            values[n] = v;
        }
        Ok(PressureSolver {
            solver,
            dirichlet,
            values,
        })
    }

    pub fn dirichlet(&self) -> &BTreeMap<usize, f64> {
        &self.dirichlet
    }

    pub fn constrained(&self) -> &ConstrainedSolver {
        &self.solver
    }

    /// Solves `A p = 0` on the free nodes; stores `p` and the factorization.
    pub fn solve(&self, state: &mut PressureState) -> Result<()> {
        let factor = self.solver.factorize(&state.a)?;
        let zero = vec![0.0; self.solver.dim()];
        let p = self.solver.solve(&state.a, &factor, &zero, &self.values);
        let scale = state.a.frobenius_norm() * crate::sparse::norm(&p);
        let residual = self.solver.free_residual(&state.a, &p, &zero);
        let rel = if scale > 0.0 { residual / scale } else { residual };
        if !(rel < PRESSURE_RESIDUAL_TOL) {
            return Err(Error::SolverFailure {
                message: "pressure solve did not reach the residual tolerance".into(),
                residual: rel,
            });
        }
        state.p = p;
        state.dirichlet = self.dirichlet.clone();
        state.factor = Some(Arc::new(factor));
        Ok(())
    }

    /// Solves `A_ff x = rhs_f` with the state's factorization (zero on
    /// Dirichlet nodes). `A` is symmetric, so this also serves the adjoint.
    pub fn solve_adjoint(&self, state: &PressureState, rhs: &[f64]) -> Result<Vec<f64>> {
        let factor = state
            .factor
            .as_ref()
            .ok_or_else(|| Error::Consistency("pressure state has not been solved".into()))?;
        Ok(self.solver.solve_homogeneous(factor, rhs))
    }
}

/// Assembles the flow matrix and transformation for a design.
pub fn assemble_flow(mesh: &Mesh, design: &DesignField, params: &FlowParams, thickness: f64) -> Result<(DarcyModel, PressureState)> {
    let model = DarcyModel::new(mesh, *params, thickness)?;
    let state = model.assemble(design);
    Ok((model, state))
}

/// Imposes the edge pressures and solves for the nodal pressure field.
pub fn solve_pressure(
    state: &mut PressureState,
    model: &DarcyModel,
    mesh: &Mesh,
    bc: &PressureBc,
) -> Result<Vec<f64>> {
    let solver = PressureSolver::new(model, mesh, bc)?;
    solver.solve(state)?;
    Ok(state.p.clone())
}

/// Consistent nodal loads `F = -T p`.
pub fn pressure_loads(state: &PressureState) -> Vec<f64> {
    state.t.mul_vec(&state.p).into_iter().map(|v| -v).collect()
}
