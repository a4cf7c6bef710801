//! Plane-stress elasticity on the hexagonal mesh with interpolated moduli.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{interpolate_modulus, modulus_derivatives, DesignField, MaterialSet};
use crate::mesh::{tabulate_basis, Mesh, Point, NV};
use crate::sparse::{norm, AssemblyPlan, ConstrainedSolver, CscMatrix};

/// Element dofs: two per vertex, interleaved `(x, y)`.
pub const EDOF: usize = 2 * NV;

pub type ElementMatrix = [f64; EDOF * EDOF];

/// Relative residual accepted for a displacement solve.
pub const DISPLACEMENT_RESIDUAL_TOL: f64 = 1e-9;

/// Plane-stress constitutive matrix in Voigt order `(xx, yy, xy)`.
pub fn plane_stress(e: f64, nu: f64) -> [[f64; 3]; 3] {
    let c = e / (1.0 - nu * nu);
    [
        [c, c * nu, 0.0],
        [c * nu, c, 0.0],
        [0.0, 0.0, c * (1.0 - nu) / 2.0],
    ]
}

/// `t ∫ Bᵀ C B dΩ` over one hexagon, row-major 12×12.
pub fn element_stiffness(verts: &[Point; NV], e: f64, nu: f64, thickness: f64) -> Result<ElementMatrix> {
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::InvalidArgument(format!("modulus must be positive, got {e}")));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::InvalidArgument(format!("Poisson ratio {nu} outside [0, 0.5)")));
    }
    if !(thickness > 0.0) {
        return Err(Error::InvalidArgument(format!("thickness must be positive, got {thickness}")));
    }
    let c = plane_stress(e, nu);
    let mut k = [0.0; EDOF * EDOF];
    for s in tabulate_basis(verts)? {
        let mut b = [[0.0; EDOF]; 3];
        for a in 0..NV {
            let [gx, gy] = s.grad[a];
            b[0][2 * a] = gx;
            b[1][2 * a + 1] = gy;
            b[2][2 * a] = gy;
            b[2][2 * a + 1] = gx;
        }
        let mut cb = [[0.0; EDOF]; 3];
        for r in 0..3 {
            for j in 0..EDOF {
                cb[r][j] = (0..3).map(|q| c[r][q] * b[q][j]).sum();
            }
        }
        let w = s.weight * thickness;
        for i in 0..EDOF {
            for j in 0..EDOF {
                k[i * EDOF + j] += w * (0..3).map(|r| b[r][i] * cb[r][j]).sum::<f64>();
            }
        }
    }
    // symmetrize round-off
    for i in 0..EDOF {
        for j in 0..i {
            let m = 0.5 * (k[i * EDOF + j] + k[j * EDOF + i]);
            k[i * EDOF + j] = m;
            k[j * EDOF + i] = m;
        }
    }
    Ok(k)
}

/// Global dof indices of an element.
pub fn element_dofs(conn: &[usize; NV]) -> [usize; EDOF] {
    let mut d = [0; EDOF];
    for (a, &n) in conn.iter().enumerate() {
        d[2 * a] = 2 * n;
        d[2 * a + 1] = 2 * n + 1;
    }
    d
}

/// Checks that the fixed dofs remove all three rigid-body modes.
pub fn check_rigid_modes(nodes: &[Point], fixed: &[usize]) -> Result<()> {
    let n = nodes.len();
    let mut c = [0.0; 2];
    for p in nodes {
        c[0] += p[0] / n as f64;
        c[1] += p[1] / n as f64;
    }
    let mode = |dof: usize| -> [f64; 3] {
        let p = nodes[dof / 2];
        if dof.is_multiple_of(2) {
            [1.0, 0.0, -(p[1] - c[1])]
        } else {
            [0.0, 1.0, p[0] - c[0]]
        }
    };
    let mut g = [[0.0; 3]; 3];
    for &d in fixed {
        if d >= 2 * n {
            return Err(Error::InvalidArgument(format!("fixed dof {d} out of range")));
        }
        let m = mode(d);
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] += m[i] * m[j];
            }
        }
    }
    if g[0][0] == 0.0 {
        return Err(Error::Singular("supports leave rigid mode translation-x free".into()));
    }
    if g[1][1] == 0.0 {
        return Err(Error::Singular("supports leave rigid mode translation-y free".into()));
    }
    // rotation component orthogonal to the fixed translations
    let det2 = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let det3 = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
        - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
        + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    let span = nodes
        .iter()
        .map(|p| (p[0] - c[0]).hypot(p[1] - c[1]))
        .fold(0.0, f64::max);
    if !(det3 / det2 > 1e-20 * span * span) {
        return Err(Error::Singular("supports leave rigid mode rotation free".into()));
    }
    Ok(())
}

/// Assembled stiffness and the solved displacement field.
#[derive(Debug, Clone)]
pub struct ElasticState {
    pub k: CscMatrix,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub fixed_dofs: BTreeSet<usize>,
    pub compliance: f64,
    pub(crate) fingerprint: u64,
}

impl ElasticState {
    pub fn design_fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Unit-modulus element stiffnesses, assembly plan and support handling.
#[derive(Debug, Clone)]
pub struct ElasticModel {
    materials: MaterialSet,
    unit: Vec<ElementMatrix>,
    dofs: Vec<[usize; EDOF]>,
    plan: AssemblyPlan,
    solver: ConstrainedSolver,
    fixed: BTreeSet<usize>,
}

impl ElasticModel {
    pub fn new(mesh: &Mesh, materials: MaterialSet, fixed_dofs: &[usize]) -> Result<Self> {
        let fixed: BTreeSet<usize> = fixed_dofs.iter().copied().collect();
        let fixed_list: Vec<usize> = fixed.iter().copied().collect();
        check_rigid_modes(mesh.nodes(), &fixed_list)?;
        let unit = (0..mesh.num_elements())
            .into_par_iter()
            .map(|e| {
                element_stiffness(
                    &mesh.element_vertices(e),
                    1.0,
                    materials.nu(),
                    materials.thickness(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let dofs: Vec<[usize; EDOF]> = mesh.elements().iter().map(element_dofs).collect();
        let lists: Vec<Vec<usize>> = dofs.iter().map(|d| d.to_vec()).collect();
        let plan = AssemblyPlan::new(2 * mesh.num_nodes(), &lists);
        let pattern = plan.assemble(|_, out| out.fill(1.0));
        let solver = ConstrainedSolver::new(&pattern, &fixed_list)?;
        Ok(ElasticModel {
            materials,
            unit,
            dofs,
            plan,
            solver,
            fixed,
        })
    }

    pub fn materials(&self) -> &MaterialSet {
        &self.materials
    }

    pub fn num_dofs(&self) -> usize {
        self.plan.dim()
    }

    pub fn fixed_dofs(&self) -> &BTreeSet<usize> {
        &self.fixed
    }

    pub fn element_dofs(&self, e: usize) -> &[usize; EDOF] {
        &self.dofs[e]
    }

    /// Stiffness of element `e` at unit modulus.
    pub fn unit_stiffness(&self, e: usize) -> &ElementMatrix {
        &self.unit[e]
    }

    /// Interpolated modulus of every element.
    pub fn moduli(&self, design: &DesignField) -> Result<Vec<f64>> {
        (0..design.num_elements())
            .map(|e| {
                let row = design.filtered_row(e);
                interpolate_modulus(&row[..design.num_vars()], &self.materials)
            })
            .collect()
    }

    /// Per-element modulus derivatives with respect to each filtered variable.
    pub fn modulus_gradients(&self, design: &DesignField) -> Result<Vec<Vec<f64>>> {
        (0..design.num_elements())
            .map(|e| {
                let row = design.filtered_row(e);
                modulus_derivatives(&row[..design.num_vars()], &self.materials)
            })
            .collect()
    }

    /// `u_eᵀ k0_e u_e` for element `e` at unit modulus.
    pub fn unit_energy(&self, e: usize, u: &[f64]) -> f64 {
        let d = &self.dofs[e];
        let k = &self.unit[e];
        let mut s = 0.0;
        for i in 0..EDOF {
            let mut r = 0.0;
            for j in 0..EDOF {
                r += k[i * EDOF + j] * u[d[j]];
            }
            s += u[d[i]] * r;
        }
        s
    }

    pub fn assemble_with_moduli(&self, moduli: &[f64]) -> CscMatrix {
        self.plan.assemble(|e, out| {
            for (o, &k) in out.iter_mut().zip(self.unit[e].iter()) {
                *o = moduli[e] * k;
            }
        })
    }

    pub fn assemble(&self, design: &DesignField) -> Result<CscMatrix> {
        Ok(self.assemble_with_moduli(&self.moduli(design)?))
    }

    /// Solves `K u = F` with the supports fixed at zero.
    pub fn solve(&self, k: CscMatrix, f: Vec<f64>, fingerprint: u64) -> Result<ElasticState> {
        if f.len() != self.num_dofs() {
            return Err(Error::InvalidArgument(format!(
                "force vector has {} entries, expected {}",
                f.len(),
                self.num_dofs()
            )));
        }
        let factor = self.solver.factorize(&k)?;
        let u = self.solver.solve_homogeneous(&factor, &f);
        let fnorm = norm(&self.free_part(&f));
        let residual = self.solver.free_residual(&k, &u, &f);
        let rel = if fnorm > 0.0 { residual / fnorm } else { residual };
        if !(rel < DISPLACEMENT_RESIDUAL_TOL) {
            return Err(Error::SolverFailure {
                message: "displacement solve did not reach the residual tolerance".into(),
                residual: rel,
            });
        }
        let compliance = u.iter().zip(&f).map(|(a, b)| a * b).sum();
        Ok(ElasticState {
            k,
            u,
            f,
            fixed_dofs: self.fixed.clone(),
            compliance,
            fingerprint,
        })
    }

    /// Solves with nonzero prescribed displacements on the fixed dofs.
    pub fn solve_prescribed(&self, k: &CscMatrix, f: &[f64], prescribed: &[f64]) -> Result<Vec<f64>> {
        let factor = self.solver.factorize(k)?;
        Ok(self.solver.solve(k, &factor, f, prescribed))
    }

    fn free_part(&self, v: &[f64]) -> Vec<f64> {
        self.solver.free_dofs().iter().map(|&i| v[i]).collect()
    }
}

/// Assembles the global stiffness for a design.
pub fn assemble_stiffness(mesh: &Mesh, design: &DesignField, materials: &MaterialSet) -> Result<CscMatrix> {
    // supports do not affect assembly; fix enough dofs to pass the rigid-mode check
    let fixed = [0, 1, 2, 3];
    ElasticModel::new(mesh, materials.clone(), &fixed)?.assemble(design)
}

/// Solves `K u = F` with homogeneous supports on `fixed_dofs`.
pub fn solve_displacements(
    mesh: &Mesh,
    k: CscMatrix,
    f: Vec<f64>,
    fixed_dofs: &[usize],
    materials: &MaterialSet,
) -> Result<ElasticState> {
    ElasticModel::new(mesh, materials.clone(), fixed_dofs)?.solve(k, f, 0)
}
