//! Static condensation of the element unknowns and solution of the
//! condensed trace system, plus a dense monolithic path used as an oracle.

use nalgebra::{DMatrix, DVector, LU};

use crate::assembly::{DofMap, GlobalSystem, LocalSystem, SchemeParams, SchemeVariant};
use crate::error::{Error, Result};
use crate::fem::BasisSet;
use crate::linalg::{cg_solve, BandedCholesky, Csr};
use crate::mesh::{EdgeClass, Mesh};
use crate::problem::ProblemData;

/// Per-element data needed to recover the interior unknowns.
struct ElementRecovery {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    a_utr: DMatrix<f64>,
    b_u: DVector<f64>,
    /// Condensed (trace-block) column index of each local trace dof.
    cols: Vec<usize>,
}

/// Schur complement over the trace dofs plus per-element recovery factors.
pub struct CondensedSystem {
    pub schur: Csr,
    pub rhs: DVector<f64>,
    pub dofs: DofMap,
    recovery: Vec<ElementRecovery>,
}

impl CondensedSystem {
    pub fn dim(&self) -> usize {
        self.dofs.n_trace_dofs
    }
}

/// Eliminates the element blocks: S = A_trtr - A_tru A_uu^-1 A_utr summed
/// over elements, g = b_tr - A_tru A_uu^-1 b_u.
pub fn condense(dofs: &DofMap, locals: &[LocalSystem]) -> Result<CondensedSystem> {
    let n_trace = dofs.n_trace_dofs;
    let mut triplets = Vec::new();
    let mut rhs = DVector::zeros(n_trace);
    let mut recovery = Vec::with_capacity(locals.len());
    for ls in locals {
        let a_uu = ls.a_uu();
        let a_utr = ls.a_utr();
        let b_u = ls.b_u();
        let lu = a_uu.lu();
        let cols: Vec<usize> = ls
            .trace_edges
            .iter()
            .flat_map(|&e| {
                let base = dofs.edge_trace[e].unwrap();
                [base, base + 1]
            })
            .collect();
        let x = lu
            .solve(&a_utr)
            .ok_or(Error::SingularLocalBlock(ls.element))?;
        let y = lu.solve(&b_u).ok_or(Error::SingularLocalBlock(ls.element))?;
        let s_k = ls.a_trtr() - a_utr.transpose() * &x;
        let g_k = ls.b_tr() - a_utr.transpose() * &y;
        for (r, &gr) in cols.iter().enumerate() {
            rhs[gr] += g_k[r];
            for (c, &gc) in cols.iter().enumerate() {
                triplets.push((gr, gc, s_k[(r, c)]));
            }
        }
        recovery.push(ElementRecovery {
            lu,
            a_utr,
            b_u,
            cols,
        });
    }
    Ok(CondensedSystem {
        schur: Csr::from_triplets(n_trace, &mut triplets),
        rhs,
        dofs: dofs.clone(),
        recovery,
    })
}

/// Solver choice for the condensed system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Banded Cholesky factorization.
    Direct,
    /// Diagonally preconditioned conjugate gradients.
    Cg,
}

/// Outcome metadata of a solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveInfo {
    /// Iteration count for the iterative path.
    pub iterations: Option<usize>,
    /// Relative residual |Sx - g| / |g|.
    pub residual: f64,
}

/// Solves the condensed system for the trace vector.
pub fn solve(
    cs: &CondensedSystem,
    method: SolveMethod,
    tol: f64,
) -> Result<(DVector<f64>, SolveInfo)> {
    let dim = cs.dim();
    let (x, iterations) = match method {
        SolveMethod::Direct => {
            let chol = BandedCholesky::factor(&cs.schur)?;
            (chol.solve(&cs.rhs), None)
        }
        SolveMethod::Cg => {
            let (x, iters) = cg_solve(&cs.schur, &cs.rhs, tol, 10 * dim.max(1))?;
            (x, Some(iters))
        }
    };
    let mut r = DVector::zeros(dim);
    cs.schur.matvec(&x, &mut r);
    r -= &cs.rhs;
    let norm_rhs = cs.rhs.norm();
    let residual = if norm_rhs > 0.0 {
        r.norm() / norm_rhs
    } else {
        r.norm()
    };
    Ok((x, SolveInfo { iterations, residual }))
}

/// The discrete pair (u, uhat) as coefficient vectors.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    /// Element coefficients, laid out by `dofs.elem_offset`.
    pub u: DVector<f64>,
    /// Trace coefficients, two per non-boundary edge.
    pub u_hat: DVector<f64>,
    pub dofs: DofMap,
}

impl DiscreteSolution {
    pub fn element_coeffs(&self, k: usize) -> &[f64] {
        let lo = self.dofs.elem_offset[k];
        let hi = self.dofs.elem_offset[k + 1];
        &self.u.as_slice()[lo..hi]
    }

    /// Trace coefficients of a non-boundary edge at its two endpoints.
    pub fn trace_coeffs(&self, edge: usize) -> Option<[f64; 2]> {
        self.dofs.edge_trace[edge].map(|base| [self.u_hat[base], self.u_hat[base + 1]])
    }

    /// Value and gradient at a physical point (element found by location).
    pub fn eval(&self, mesh: &Mesh, p: nalgebra::Point2<f64>) -> (f64, nalgebra::Vector2<f64>) {
        let k = mesh.locate(p);
        let basis = BasisSet::new(mesh.elements[k].kind, &mesh.element_vertices(k));
        let r = basis.map.to_reference(p);
        let coeffs = self.element_coeffs(k);
        (basis.value(coeffs, r[0], r[1]), basis.gradient(coeffs, r[0], r[1]))
    }

    /// Concatenated full dof vector [u | uhat].
    pub fn full_vector(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.dofs.total());
        x.rows_mut(0, self.dofs.n_elem_dofs).copy_from(&self.u);
        x.rows_mut(self.dofs.n_elem_dofs, self.dofs.n_trace_dofs)
            .copy_from(&self.u_hat);
        x
    }
}

/// Recovers the element unknowns from the solved traces.
pub fn recover(cs: &CondensedSystem, u_hat: &DVector<f64>) -> DiscreteSolution {
    let mut u = DVector::zeros(cs.dofs.n_elem_dofs);
    let mut off = 0;
    for rec in &cs.recovery {
        let m = rec.cols.len();
        let mut tr = DVector::zeros(m);
        for (c, &gc) in rec.cols.iter().enumerate() {
            tr[c] = u_hat[gc];
        }
        let rhs = &rec.b_u - &rec.a_utr * tr;
        let u_k = rec.lu.solve(&rhs).expect("block factorized during condensation");
        u.rows_mut(off, u_k.len()).copy_from(&u_k);
        off += u_k.len();
    }
    DiscreteSolution {
        u,
        u_hat: u_hat.clone(),
        dofs: cs.dofs.clone(),
    }
}

/// Assembles, condenses, solves, and recovers in one call.
pub fn solve_problem(
    mesh: &Mesh,
    problem: &ProblemData,
    params: &SchemeParams,
    method: SolveMethod,
    tol: f64,
) -> Result<(DiscreteSolution, SolveInfo)> {
    let dofs = DofMap::build(mesh);
    let locals = crate::assembly::local_systems(mesh, problem, params);
    let cs = condense(&dofs, &locals)?;
    let (u_hat, info) = solve(&cs, method, tol)?;
    Ok((recover(&cs, &u_hat), info))
}

/// Solves the full (uncondensed) system with a dense Cholesky factorization.
/// Intended for small meshes, as an independent check of the condensed path.
pub fn solve_monolithic(
    mesh: &Mesh,
    problem: &ProblemData,
    params: &SchemeParams,
) -> Result<DiscreteSolution> {
    let gs = crate::assembly::assemble(mesh, problem, params);
    let x = crate::linalg::dense_cholesky_solve(gs.matrix.to_dense(), &gs.rhs)?;
    let u = x.rows(0, gs.dofs.n_elem_dofs).clone_owned();
    let u_hat = x.rows(gs.dofs.n_elem_dofs, gs.dofs.n_trace_dofs).clone_owned();
    Ok(DiscreteSolution {
        u,
        u_hat,
        dofs: gs.dofs,
    })
}

/// Relative max-norm residual of the full system at a discrete pair.
pub fn full_residual(gs: &GlobalSystem, sol: &DiscreteSolution) -> f64 {
    let x = sol.full_vector();
    let mut r = DVector::zeros(gs.dim());
    gs.matrix.matvec(&x, &mut r);
    r -= &gs.rhs;
    let scale = gs.rhs.amax();
    if scale > 0.0 {
        r.amax() / scale
    } else {
        r.amax()
    }
}

/// Interpolates the problem's exact solution into the discrete space.
///
/// Element coefficients are nodal values of the subdomain branch. Trace
/// coefficients are the endpoint values of the branch shared by both
/// neighbors on interior edges; on interface edges the primary scheme takes
/// the mean of the two branches, the alternative one the subdomain-2 branch.
pub fn exact_interpolant(
    mesh: &Mesh,
    problem: &ProblemData,
    variant: SchemeVariant,
) -> Result<DiscreteSolution> {
    let dofs = DofMap::build(mesh);
    let mut u = DVector::zeros(dofs.n_elem_dofs);
    for (k, el) in mesh.elements.iter().enumerate() {
        for (i, &v) in el.vertices.iter().enumerate() {
            u[dofs.elem_offset[k] + i] = problem.exact_value(mesh.vertices[v], el.subdomain)?;
        }
    }
    let mut u_hat = DVector::zeros(dofs.n_trace_dofs);
    for (e, edge) in mesh.edges.iter().enumerate() {
        let Some(base) = dofs.edge_trace[e] else {
            continue;
        };
        for r in 0..2 {
            let p = mesh.vertices[edge.vertices[r]];
            u_hat[base + r] = match edge.class {
                EdgeClass::Interior => {
                    problem.exact_value(p, mesh.elements[edge.elements[0]].subdomain)?
                }
                EdgeClass::Interface => match variant {
                    SchemeVariant::Primary => {
                        0.5 * (problem.exact_value(p, 1)? + problem.exact_value(p, 2)?)
                    }
                    SchemeVariant::Alternative => problem.exact_value(p, 2)?,
                },
                EdgeClass::Boundary => unreachable!("boundary edges carry no trace dofs"),
            };
        }
    }
    Ok(DiscreteSolution { u, u_hat, dofs })
}
