//! Assembly of the hybrid discrete system.
//!
//! Unknowns are the element polynomials u and the single-valued edge traces
//! uhat (absent on outer-boundary edges). The bilinear form is, summed over
//! elements K and their edges e,
//!
//! ```text
//!   B(u, uhat; v, vhat) =  (A grad u, grad v)_K                      (B1)
//!                        - <A grad u . n_K, v - vhat>_dK             (B2)
//!                        - <A grad v . n_K, u - uhat>_dK             (B3)
//!                        + (eta_e / h_e) <u - uhat, v - vhat>_e      (B4)
//! ```
//!
//! and the load carries, besides (f, v)_K and <g_N, vhat> on interface
//! edges, the jump data g_D through a conormal term and a penalty term whose
//! element weights differ between the two scheme variants (see
//! [`sigma_factor`]). Prescribed boundary traces enter the load the same way
//! eliminated boundary uhat values would.

use nalgebra::{DMatrix, DVector, Matrix2, Point2};

use crate::error::{Error, Result};
use crate::linalg::Csr;
use crate::local::{self, LocalCtx, Rules};
use crate::mesh::{EdgeClass, Mesh};
use crate::problem::ProblemData;

/// The two load variants of the scheme.
///
/// Both share the bilinear form; they differ in how the jump datum g_D is
/// distributed over the two sides of an interface edge. `Primary` weights
/// both sides by +-1/2 (the trace unknown approximates the mean of the two
/// one-sided traces); `Alternative` loads only the subdomain-1 side (the
/// trace unknown approximates the subdomain-2 trace).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeVariant {
    Primary,
    Alternative,
}

/// Edge-wise penalty map e -> eta_e.
#[derive(Debug, Clone)]
pub enum Penalty {
    Constant(f64),
    PerEdge(Vec<f64>),
}

impl Penalty {
    fn bounds(&self) -> (f64, f64) {
        match self {
            Penalty::Constant(eta) => (*eta, *eta),
            Penalty::PerEdge(v) => v.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &e| {
                (lo.min(e), hi.max(e))
            }),
        }
    }
}

/// Scheme variant, penalty map, and polynomial degrees (both fixed at 1).
#[derive(Debug, Clone)]
pub struct SchemeParams {
    pub variant: SchemeVariant,
    pub penalty: Penalty,
    pub degree_k: usize,
    pub degree_l: usize,
}

impl SchemeParams {
    pub fn new(variant: SchemeVariant, penalty: Penalty) -> Result<Self> {
        if let Penalty::PerEdge(v) = &penalty {
            if v.is_empty() {
                return Err(Error::InvalidParam("empty penalty map".into()));
            }
        }
        let (lo, hi) = penalty.bounds();
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "penalties must satisfy 0 < eta_min <= eta_max < inf, got [{lo}, {hi}]"
            )));
        }
        Ok(SchemeParams {
            variant,
            penalty,
            degree_k: 1,
            degree_l: 1,
        })
    }

    /// Default penalty 10 * lambda_max of the problem's coefficient.
    pub fn with_default_eta(variant: SchemeVariant, problem: &ProblemData) -> Self {
        SchemeParams::new(variant, Penalty::Constant(problem.default_eta())).unwrap()
    }

    pub fn eta(&self, edge: usize) -> f64 {
        match &self.penalty {
            Penalty::Constant(eta) => *eta,
            Penalty::PerEdge(v) => v[edge],
        }
    }

    pub fn eta_bounds(&self) -> (f64, f64) {
        self.penalty.bounds()
    }
}

/// Sign factor multiplying the g_D penalty load of element `k` on interface
/// edge `e`: +1/-1 across the interface for `Primary`, +1/0 for
/// `Alternative`.
pub fn sigma_factor(variant: SchemeVariant, mesh: &Mesh, k: usize, e: usize) -> Result<f64> {
    let edge = &mesh.edges[e];
    if edge.class != EdgeClass::Interface || !edge.elements.contains(&k) {
        return Err(Error::NotInterfaceEdge(e));
    }
    let side1 = mesh.elements[k].subdomain == 1;
    Ok(match variant {
        SchemeVariant::Primary => {
            if side1 {
                1.0
            } else {
                -1.0
            }
        }
        SchemeVariant::Alternative => {
            if side1 {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// Degree-of-freedom layout: element dofs first, then two trace dofs per
/// interior/interface edge. Boundary edges carry none.
#[derive(Debug, Clone)]
pub struct DofMap {
    /// Prefix sums; element k owns dofs `elem_offset[k]..elem_offset[k+1]`.
    pub elem_offset: Vec<usize>,
    /// Per edge, the index of its first trace dof within the trace block.
    pub edge_trace: Vec<Option<usize>>,
    pub n_elem_dofs: usize,
    pub n_trace_dofs: usize,
}

impl DofMap {
    pub fn build(mesh: &Mesh) -> DofMap {
        let mut elem_offset = Vec::with_capacity(mesh.elements.len() + 1);
        let mut off = 0;
        for el in &mesh.elements {
            elem_offset.push(off);
            off += el.kind.node_count();
        }
        elem_offset.push(off);
        let mut edge_trace = Vec::with_capacity(mesh.edges.len());
        let mut tr = 0;
        for e in &mesh.edges {
            if e.class == EdgeClass::Boundary {
                edge_trace.push(None);
            } else {
                edge_trace.push(Some(tr));
                tr += 2;
            }
        }
        DofMap {
            elem_offset,
            edge_trace,
            n_elem_dofs: off,
            n_trace_dofs: tr,
        }
    }

    pub fn total(&self) -> usize {
        self.n_elem_dofs + self.n_trace_dofs
    }

    /// Global id of trace dof `r` of an edge within the full system.
    pub fn trace_dof(&self, edge: usize, r: usize) -> Option<usize> {
        self.edge_trace[edge].map(|base| self.n_elem_dofs + base + r)
    }
}

/// One element's block system over its own dofs and the trace dofs of its
/// non-boundary edges.
#[derive(Debug, Clone)]
pub struct LocalSystem {
    pub element: usize,
    /// Symmetric matrix over [u dofs | trace dofs].
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub n_elem: usize,
    /// Global edge ids backing the trace blocks, two dofs each, in order.
    pub trace_edges: Vec<usize>,
}

impl LocalSystem {
    pub fn a_uu(&self) -> DMatrix<f64> {
        self.matrix
            .view((0, 0), (self.n_elem, self.n_elem))
            .clone_owned()
    }

    pub fn a_utr(&self) -> DMatrix<f64> {
        let m = self.matrix.ncols() - self.n_elem;
        self.matrix
            .view((0, self.n_elem), (self.n_elem, m))
            .clone_owned()
    }

    pub fn a_trtr(&self) -> DMatrix<f64> {
        let m = self.matrix.ncols() - self.n_elem;
        self.matrix
            .view((self.n_elem, self.n_elem), (m, m))
            .clone_owned()
    }

    pub fn b_u(&self) -> DVector<f64> {
        self.rhs.rows(0, self.n_elem).clone_owned()
    }

    pub fn b_tr(&self) -> DVector<f64> {
        self.rhs
            .rows(self.n_elem, self.rhs.len() - self.n_elem)
            .clone_owned()
    }
}

/// Builds the local system of one element.
pub fn local_system(
    mesh: &Mesh,
    k: usize,
    problem: &ProblemData,
    params: &SchemeParams,
) -> LocalSystem {
    let rules = Rules::for_kind(mesh.elements[k].kind);
    local_system_with_rules(mesh, k, problem, params, &rules)
}

pub(crate) fn local_system_with_rules(
    mesh: &Mesh,
    k: usize,
    problem: &ProblemData,
    params: &SchemeParams,
    rules: &Rules,
) -> LocalSystem {
    let ctx = LocalCtx::new(mesh, k);
    let nk = ctx.nk;
    let sub = ctx.subdomain;
    let coeff = |p: Point2<f64>| -> Matrix2<f64> { problem.coefficient(p, sub) };

    let trace_edges: Vec<usize> = ctx
        .edges
        .iter()
        .filter(|le| le.class != EdgeClass::Boundary)
        .map(|le| le.id)
        .collect();
    let dim = nk + 2 * trace_edges.len();
    let mut mat = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);

    // B1 and the volume part of L1.
    let stiff = local::stiffness(&ctx, &rules.cell_form, &coeff);
    mat.view_mut((0, 0), (nk, nk)).copy_from(&stiff);
    let f_load = local::cell_load(&ctx, &rules.cell_data, &|p| problem.source(p, sub));
    rhs.rows_mut(0, nk).copy_from(&f_load);

    for le in &ctx.edges {
        let w_pen = params.eta(le.id) / le.length;
        let outward = le.outward();
        let (flux_u, flux_tr) = local::edge_flux(&ctx, le, &rules.edge_form, &coeff, outward);
        let jump = local::edge_jump_gram(&ctx, le, &rules.edge_form);

        if le.class == EdgeClass::Boundary {
            // No trace dofs: B2 + B3 and B4 restrict to the element block.
            for j in 0..nk {
                for i in 0..nk {
                    mat[(i, j)] -= flux_u[(i, j)] + flux_u[(j, i)];
                    mat[(i, j)] += w_pen * jump[(i, j)];
                }
            }
            // A prescribed boundary trace enters the load through the same
            // B3 and B4 couplings the eliminated uhat would have had.
            if problem.has_boundary_data() {
                let g = |p: Point2<f64>| problem.boundary_value(p, sub);
                let flux_g =
                    local::edge_flux_load(&ctx, le, &rules.edge_data, &g, &coeff, outward);
                let (load_g, _) = local::edge_scalar_load(&ctx, le, &rules.edge_data, &g);
                for i in 0..nk {
                    rhs[i] += -flux_g[i] + w_pen * load_g[i];
                }
            }
            continue;
        }

        let base = nk + 2 * trace_edges.iter().position(|&e| e == le.id).unwrap();
        let map = |r: usize| if r < nk { r } else { base + (r - nk) };

        // B2 over [test u | test trace] x [trial u], plus its transpose (B3).
        for j in 0..nk {
            for r in 0..nk + 2 {
                let b2 = if r < nk {
                    -flux_u[(r, j)]
                } else {
                    flux_tr[(r - nk, j)]
                };
                mat[(map(r), j)] += b2;
                mat[(j, map(r))] += b2;
            }
        }
        // B4.
        for r in 0..nk + 2 {
            for c in 0..nk + 2 {
                mat[(map(r), map(c))] += w_pen * jump[(r, c)];
            }
        }

        if le.class == EdgeClass::Interface {
            // Interface loads; le.normal is the subdomain-1 outward normal.
            let g_n = |p: Point2<f64>| problem.g_n(p);
            let g_d = |p: Point2<f64>| problem.g_d(p);
            // Flux-sum datum, counted once per edge: half from each side.
            let (_, load_tr_gn) = local::edge_scalar_load(&ctx, le, &rules.edge_data, &g_n);
            for r in 0..2 {
                rhs[base + r] += 0.5 * load_tr_gn[r];
            }
            // Conormal jump load: mean of the one-sided traces for the
            // primary scheme, the subdomain-1 trace alone for the
            // alternative one (the choice that keeps each variant exact for
            // solutions its trace unknown can represent).
            let flux_gd =
                local::edge_flux_load(&ctx, le, &rules.edge_data, &g_d, &coeff, le.normal);
            let l2_weight = match params.variant {
                SchemeVariant::Primary => 0.5,
                SchemeVariant::Alternative => {
                    if sub == 1 {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            for i in 0..nk {
                rhs[i] -= l2_weight * flux_gd[i];
            }
            // Penalty jump load.
            let sigma = sigma_factor(params.variant, mesh, k, le.id).unwrap();
            let l3_weight = match params.variant {
                SchemeVariant::Primary => 0.5 * sigma * w_pen,
                SchemeVariant::Alternative => sigma * w_pen,
            };
            let (load_u_gd, load_tr_gd) = local::edge_scalar_load(&ctx, le, &rules.edge_data, &g_d);
            for i in 0..nk {
                rhs[i] += l3_weight * load_u_gd[i];
            }
            for r in 0..2 {
                rhs[base + r] -= l3_weight * load_tr_gd[r];
            }
        }
    }

    LocalSystem {
        element: k,
        matrix: mat,
        rhs,
        n_elem: nk,
        trace_edges,
    }
}

/// All local systems in element order.
pub fn local_systems(mesh: &Mesh, problem: &ProblemData, params: &SchemeParams) -> Vec<LocalSystem> {
    let rules = Rules::for_kind(mesh.element_kind());
    (0..mesh.elements.len())
        .map(|k| local_system_with_rules(mesh, k, problem, params, &rules))
        .collect()
}

/// The assembled global system over all element and trace dofs.
pub struct GlobalSystem {
    pub matrix: Csr,
    pub rhs: DVector<f64>,
    pub dofs: DofMap,
}

impl GlobalSystem {
    pub fn dim(&self) -> usize {
        self.dofs.total()
    }

    /// max |M - M^T| over all entries.
    pub fn symmetry_defect(&self) -> f64 {
        self.matrix.symmetry_defect()
    }
}

/// Assembles the global sparse system by scattering the local systems.
pub fn assemble(mesh: &Mesh, problem: &ProblemData, params: &SchemeParams) -> GlobalSystem {
    let dofs = DofMap::build(mesh);
    let locals = local_systems(mesh, problem, params);
    assemble_from_locals(&dofs, &locals)
}

pub fn assemble_from_locals(dofs: &DofMap, locals: &[LocalSystem]) -> GlobalSystem {
    let dim = dofs.total();
    let mut rhs = DVector::zeros(dim);
    let mut triplets = Vec::new();
    for ls in locals {
        let k = ls.element;
        let global: Vec<usize> = (0..ls.matrix.nrows())
            .map(|r| {
                if r < ls.n_elem {
                    dofs.elem_offset[k] + r
                } else {
                    let e = ls.trace_edges[(r - ls.n_elem) / 2];
                    dofs.trace_dof(e, (r - ls.n_elem) % 2).unwrap()
                }
            })
            .collect();
        for r in 0..ls.matrix.nrows() {
            rhs[global[r]] += ls.rhs[r];
            for c in 0..ls.matrix.ncols() {
                let v = ls.matrix[(r, c)];
                if v != 0.0 {
                    triplets.push((global[r], global[c], v));
                }
            }
        }
    }
    GlobalSystem {
        matrix: Csr::from_triplets(dim, &mut triplets),
        rhs,
        dofs: dofs.clone(),
    }
}
