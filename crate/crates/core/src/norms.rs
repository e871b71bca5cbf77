//! Error measures, discrete norms of the hybrid pair, and convergence-rate
//! bookkeeping.
//!
//! Errors against an exact solution are integrated element-wise with a
//! degree-9 rule. When no exact solution exists, a discrete solution on a
//! nested finer mesh serves as the reference and the integration runs over
//! the fine mesh, evaluating the coarse solution through the nesting map.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fem::{cell_rule, edge_rule, BasisSet};
use crate::local::{edge_points, LocalCtx};
use crate::mesh::Mesh;
use crate::problem::ProblemData;
use crate::assembly::SchemeParams;
use crate::solver::DiscreteSolution;

/// What a discrete solution is measured against.
pub enum ErrorTarget<'a> {
    Exact(&'a ProblemData),
    Reference {
        mesh: &'a Mesh,
        solution: &'a DiscreteSolution,
    },
}

/// L2 error of the element part of the solution.
pub fn l2_error(mesh: &Mesh, sol: &DiscreteSolution, target: &ErrorTarget) -> Result<f64> {
    error_norm(mesh, sol, target, false)
}

/// Broken H1 seminorm error of the element part of the solution.
pub fn h1_broken_error(mesh: &Mesh, sol: &DiscreteSolution, target: &ErrorTarget) -> Result<f64> {
    error_norm(mesh, sol, target, true)
}

fn error_norm(
    mesh: &Mesh,
    sol: &DiscreteSolution,
    target: &ErrorTarget,
    gradient: bool,
) -> Result<f64> {
    match target {
        ErrorTarget::Exact(problem) => {
            if !problem.has_exact() {
                return Err(Error::MissingExact);
            }
            let rule = cell_rule(mesh.element_kind(), 9)?;
            let mut acc = 0.0;
            for (k, el) in mesh.elements.iter().enumerate() {
                let basis = BasisSet::new(el.kind, &mesh.element_vertices(k));
                let det = basis.map.det_jacobian();
                let coeffs = sol.element_coeffs(k);
                for (pt, w) in rule.points.iter().zip(rule.weights.iter()) {
                    let x = basis.map.to_physical(*pt);
                    acc += w * det
                        * if gradient {
                            let diff = problem.exact_gradient(x, el.subdomain)?
                                - basis.gradient(coeffs, pt[0], pt[1]);
                            diff.norm_squared()
                        } else {
                            let diff = problem.exact_value(x, el.subdomain)?
                                - basis.value(coeffs, pt[0], pt[1]);
                            diff * diff
                        };
                }
            }
            Ok(acc.sqrt())
        }
        ErrorTarget::Reference {
            mesh: fine_mesh,
            solution: fine_sol,
        } => {
            if !fine_mesh.refines(mesh) {
                return Err(Error::NotNested(format!(
                    "{} n={} does not refine {} n={}",
                    fine_mesh.geometry.name(),
                    fine_mesh.n,
                    mesh.geometry.name(),
                    mesh.n
                )));
            }
            let rule = cell_rule(fine_mesh.element_kind(), 9)?;
            let mut acc = 0.0;
            for (kf, el) in fine_mesh.elements.iter().enumerate() {
                let basis = BasisSet::new(el.kind, &fine_mesh.element_vertices(kf));
                let det = basis.map.det_jacobian();
                let coeffs = fine_sol.element_coeffs(kf);
                for (pt, w) in rule.points.iter().zip(rule.weights.iter()) {
                    let x = basis.map.to_physical(*pt);
                    let (coarse_val, coarse_grad) = sol.eval(mesh, x);
                    acc += w * det
                        * if gradient {
                            let diff = basis.gradient(coeffs, pt[0], pt[1]) - coarse_grad;
                            diff.norm_squared()
                        } else {
                            let diff = basis.value(coeffs, pt[0], pt[1]) - coarse_val;
                            diff * diff
                        };
                }
            }
            Ok(acc.sqrt())
        }
    }
}

/// The two discrete norms of a hybrid pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdgNormKind {
    /// Broken H1 seminorm plus weighted jumps to the traces.
    OneH,
    /// `OneH` plus the h_K-weighted element H2 seminorms.
    TwoH,
}

/// Discrete norm of the pair (v, vhat); on boundary edges vhat is zero.
pub fn hdg_norm(
    mesh: &Mesh,
    sol: &DiscreteSolution,
    params: &SchemeParams,
    which: HdgNormKind,
) -> f64 {
    let cell = cell_rule(mesh.element_kind(), 3).unwrap();
    let edge = edge_rule(3).unwrap();
    let mut acc = 0.0;
    for k in 0..mesh.elements.len() {
        let ctx = LocalCtx::new(mesh, k);
        let coeffs = sol.element_coeffs(k);
        let det = ctx.basis.map.det_jacobian();
        for (pt, w) in cell.points.iter().zip(cell.weights.iter()) {
            acc += w * det * ctx.basis.gradient(coeffs, pt[0], pt[1]).norm_squared();
        }
        if which == HdgNormKind::TwoH {
            acc += ctx.diameter * ctx.diameter * ctx.basis.h2_seminorm_sq(coeffs);
        }
        for le in &ctx.edges {
            let trace = sol.trace_coeffs(le.id).unwrap_or([0.0, 0.0]);
            let w_pen = params.eta(le.id) / le.length;
            for ep in edge_points(&ctx, le, &edge) {
                let v: f64 = coeffs
                    .iter()
                    .zip(ep.values.iter())
                    .map(|(c, n)| c * n)
                    .sum();
                let vhat = trace[0] * ep.trace[0] + trace[1] * ep.trace[1];
                acc += w_pen * ep.weight * (vhat - v) * (vhat - v);
            }
        }
    }
    acc.sqrt()
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct RateRow {
    pub h: f64,
    pub energy_error: f64,
    pub energy_rate: Option<f64>,
    pub l2_error: f64,
    pub l2_rate: Option<f64>,
}

/// Errors and observed orders over a sequence of halving mesh sizes.
#[derive(Debug, Clone)]
pub struct ConvergenceRecord {
    pub rows: Vec<RateRow>,
}

/// Computes rate columns from (h, energy error, L2 error) rows; h must halve
/// between consecutive rows.
pub fn rates(levels: &[(f64, f64, f64)]) -> Result<ConvergenceRecord> {
    let mut rows = Vec::with_capacity(levels.len());
    for (i, &(h, e_energy, e_l2)) in levels.iter().enumerate() {
        let (mut energy_rate, mut l2_rate) = (None, None);
        if i > 0 {
            let (h_prev, e_prev, l_prev) = levels[i - 1];
            if (h - 0.5 * h_prev).abs() > 1e-9 * h_prev {
                return Err(Error::BadSequence(format!(
                    "h must halve between rows, got {h_prev} -> {h}"
                )));
            }
            energy_rate = Some((e_prev.ln() - e_energy.ln()) / 2.0_f64.ln());
            l2_rate = Some((l_prev.ln() - e_l2.ln()) / 2.0_f64.ln());
        }
        rows.push(RateRow {
            h,
            energy_error: e_energy,
            energy_rate,
            l2_error: e_l2,
            l2_rate,
        });
    }
    Ok(ConvergenceRecord { rows })
}

impl ConvergenceRecord {
    /// CSV serialization: 6 significant digits, rate cells empty on the
    /// first row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,E_h,R_h,e_h,r_h\n");
        for row in &self.rows {
            let rate = |r: Option<f64>| r.map(|v| format!("{v:.5e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{:.5e},{:.5e},{},{:.5e},{}",
                row.h,
                row.energy_error,
                rate(row.energy_rate),
                row.l2_error,
                rate(row.l2_rate)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{SchemeParams, SchemeVariant};
    use crate::fem::ElementKind;
    use crate::mesh::{build_mesh, Geometry};
    use crate::problem::{preset, PresetName};
    use crate::solver::{exact_interpolant, solve_problem, SolveMethod};
    use nalgebra::DVector;

    #[test]
    fn representable_function_has_zero_error() {
        let p = preset(PresetName::Patch);
        for kind in [ElementKind::Rectangle, ElementKind::Triangle] {
            let mesh = build_mesh(p.geometry, 4, kind).unwrap();
            let interp = exact_interpolant(&mesh, &p.data, SchemeVariant::Primary).unwrap();
            let e = l2_error(&mesh, &interp, &ErrorTarget::Exact(&p.data)).unwrap();
            let big_e = h1_broken_error(&mesh, &interp, &ErrorTarget::Exact(&p.data)).unwrap();
            assert!(e <= 1e-12, "L2 error {e}");
            assert!(big_e <= 1e-12, "H1 error {big_e}");
        }
    }

    #[test]
    fn reference_against_itself_is_zero() {
        let p = preset(PresetName::Example1);
        let mesh = build_mesh(p.geometry, 4, ElementKind::Rectangle).unwrap();
        let params = SchemeParams::with_default_eta(SchemeVariant::Primary, &p.data);
        let (sol, _) = solve_problem(&mesh, &p.data, &params, SolveMethod::Direct, 1e-12).unwrap();
        let target = ErrorTarget::Reference {
            mesh: &mesh,
            solution: &sol,
        };
        // Not bitwise zero: the physical/reference round trip of quadrature
        // points leaves last-ulp noise.
        assert!(l2_error(&mesh, &sol, &target).unwrap() <= 1e-14);
        assert!(h1_broken_error(&mesh, &sol, &target).unwrap() <= 1e-14);
    }

    #[test]
    fn reference_mesh_must_be_nested() {
        let p = preset(PresetName::Example1);
        let coarse = build_mesh(p.geometry, 4, ElementKind::Rectangle).unwrap();
        let off = build_mesh(p.geometry, 6, ElementKind::Rectangle).unwrap();
        let params = SchemeParams::with_default_eta(SchemeVariant::Primary, &p.data);
        let (sol_c, _) = solve_problem(&coarse, &p.data, &params, SolveMethod::Direct, 1e-12).unwrap();
        let (sol_o, _) = solve_problem(&off, &p.data, &params, SolveMethod::Direct, 1e-12).unwrap();
        let target = ErrorTarget::Reference {
            mesh: &off,
            solution: &sol_o,
        };
        assert!(matches!(
            l2_error(&coarse, &sol_c, &target),
            Err(Error::NotNested(_))
        ));
    }

    #[test]
    fn constant_shift_leaves_h1_error_unchanged() {
        use std::sync::Arc;
        let p = preset(PresetName::Example1);
        let mesh = build_mesh(p.geometry, 4, ElementKind::Rectangle).unwrap();
        let params = SchemeParams::with_default_eta(SchemeVariant::Primary, &p.data);
        let (sol, _) = solve_problem(&mesh, &p.data, &params, SolveMethod::Direct, 1e-12).unwrap();
        let e0 = h1_broken_error(&mesh, &sol, &ErrorTarget::Exact(&p.data)).unwrap();
        let mut shifted = p.data.clone();
        let exact = shifted.exact.take().unwrap();
        let (v1, v2) = (exact.value[0].clone(), exact.value[1].clone());
        shifted.exact = Some(crate::problem::ExactSolution {
            value: [Arc::new(move |x| v1(x) + 5.0), Arc::new(move |x| v2(x) + 5.0)],
            gradient: exact.gradient.clone(),
        });
        let e1 = h1_broken_error(&mesh, &sol, &ErrorTarget::Exact(&shifted)).unwrap();
        assert!((e0 - e1).abs() <= 1e-13 * e0.max(1.0));
    }

    #[test]
    fn conforming_pair_reduces_to_broken_seminorm() {
        // Continuous interpolant with vhat equal to the trace: the jump
        // terms vanish and the 1h norm is the broken H1 seminorm; for P1 the
        // 2h norm coincides with it.
        let p = preset(PresetName::Example1);
        let mesh = build_mesh(p.geometry, 4, ElementKind::Triangle).unwrap();
        let params = SchemeParams::with_default_eta(SchemeVariant::Primary, &p.data);
        // abs(sin pi x sin pi y) is continuous; interpolate branch 1 everywhere.
        let dofs = crate::assembly::DofMap::build(&mesh);
        let mut u = DVector::zeros(dofs.n_elem_dofs);
        let f = |x: nalgebra::Point2<f64>| {
            (std::f64::consts::PI * x.x).sin() * (std::f64::consts::PI * x.y).sin()
        };
        for (k, el) in mesh.elements.iter().enumerate() {
            for (i, &v) in el.vertices.iter().enumerate() {
                u[dofs.elem_offset[k] + i] = f(mesh.vertices[v]);
            }
        }
        let mut u_hat = DVector::zeros(dofs.n_trace_dofs);
        for (e, edge) in mesh.edges.iter().enumerate() {
            if let Some(base) = dofs.edge_trace[e] {
                for r in 0..2 {
                    u_hat[base + r] = f(mesh.vertices[edge.vertices[r]]);
                }
            }
        }
        let sol = DiscreteSolution { u, u_hat, dofs };
        let one = hdg_norm(&mesh, &sol, &params, HdgNormKind::OneH);
        let two = hdg_norm(&mesh, &sol, &params, HdgNormKind::TwoH);
        assert!((one - two).abs() <= 1e-13 * one);
        // Jump terms on interior edges vanish, but boundary edges penalize
        // the nonzero boundary trace of f... f vanishes on the boundary of
        // the unit square, so the whole jump contribution is zero.
        let mut broken = 0.0;
        for k in 0..mesh.elements.len() {
            let basis = BasisSet::new(mesh.elements[k].kind, &mesh.element_vertices(k));
            let rule = cell_rule(ElementKind::Triangle, 3).unwrap();
            let coeffs = sol.element_coeffs(k);
            for (pt, w) in rule.points.iter().zip(rule.weights.iter()) {
                broken +=
                    w * basis.map.det_jacobian() * basis.gradient(coeffs, pt[0], pt[1]).norm_squared();
            }
        }
        assert!((one * one - broken).abs() <= 1e-12 * broken);
    }

    #[test]
    fn rate_columns_match_the_logarithmic_formula() {
        let rec = rates(&[
            (0.0625, 1.62e-1, 4.14e-3),
            (0.03125, 8.13e-2, 1.04e-3),
        ])
        .unwrap();
        let r = rec.rows[1];
        assert!(r.energy_rate.is_some());
        // Observed orders from the frozen error pairs.
        assert!((r.energy_rate.unwrap() - 1.0).abs() <= 0.011);
        assert!((r.l2_rate.unwrap() - 1.99).abs() <= 0.011);
        // Recompute from the columns.
        let again = (rec.rows[0].energy_error.ln() - rec.rows[1].energy_error.ln()) / 2f64.ln();
        assert!((again - r.energy_rate.unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn equal_errors_give_zero_rate() {
        let rec = rates(&[(0.5, 1.0, 2.0), (0.25, 1.0, 2.0)]).unwrap();
        assert_eq!(rec.rows[1].energy_rate.unwrap(), 0.0);
        assert_eq!(rec.rows[1].l2_rate.unwrap(), 0.0);
    }

    #[test]
    fn non_halving_sequence_is_rejected() {
        assert!(matches!(
            rates(&[(0.5, 1.0, 1.0), (0.3, 0.5, 0.5)]),
            Err(Error::BadSequence(_))
        ));
    }

    #[test]
    fn csv_format_is_stable() {
        let rec = rates(&[(0.5, 0.25, 0.0625), (0.25, 0.125, 0.015625)]).unwrap();
        let csv = rec.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "h,E_h,R_h,e_h,r_h");
        let first = lines.next().unwrap();
        assert!(first.starts_with("5.00000e-1,2.50000e-1,,6.25000e-2,"));
        assert_eq!(csv, rec.to_csv());
    }
}
