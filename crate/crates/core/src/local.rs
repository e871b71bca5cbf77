//! Per-element integration helpers shared by assembly, norms, and
//! verification. All blocks are built over the element's nodal basis and,
//! where edges are involved, the two-node trace basis of the edge.

use nalgebra::{DMatrix, DVector, Matrix2, Point2, Vector2};

use crate::fem::{cell_rule, edge_rule, BasisSet, ElementKind, QuadRule1d, QuadRule2d};
use crate::mesh::{EdgeClass, Mesh};

/// Quadrature rules for one element kind: exact low-order rules for the
/// bilinear form, a degree-9 rule for (typically trigonometric) data.
pub(crate) struct Rules {
    pub cell_form: QuadRule2d,
    pub cell_data: QuadRule2d,
    pub edge_form: QuadRule1d,
    pub edge_data: QuadRule1d,
}

impl Rules {
    pub fn for_kind(kind: ElementKind) -> Rules {
        Rules {
            cell_form: cell_rule(kind, 3).unwrap(),
            cell_data: cell_rule(kind, 9).unwrap(),
            edge_form: edge_rule(3).unwrap(),
            edge_data: edge_rule(9).unwrap(),
        }
    }
}

/// One edge seen from one element.
#[derive(Clone)]
pub(crate) struct LocalEdge {
    pub id: usize,
    /// Outward normal of the element = sign * stored edge normal.
    pub sign: f64,
    pub class: EdgeClass,
    /// Canonical endpoints; trace dof r sits at endpoint r.
    pub a: Point2<f64>,
    pub b: Point2<f64>,
    pub length: f64,
    pub normal: Vector2<f64>,
}

impl LocalEdge {
    pub fn outward(&self) -> Vector2<f64> {
        self.sign * self.normal
    }
}

/// Element context: basis, geometry, and edge list.
pub(crate) struct LocalCtx {
    pub nk: usize,
    pub subdomain: u8,
    pub basis: BasisSet,
    pub edges: Vec<LocalEdge>,
    pub diameter: f64,
}

impl LocalCtx {
    pub fn new(mesh: &Mesh, k: usize) -> LocalCtx {
        let el = &mesh.elements[k];
        let verts = mesh.element_vertices(k);
        let basis = BasisSet::new(el.kind, &verts);
        let edges = mesh.element_edges[k]
            .iter()
            .map(|ee| {
                let e = &mesh.edges[ee.edge];
                LocalEdge {
                    id: ee.edge,
                    sign: ee.sign,
                    class: e.class,
                    a: mesh.vertices[e.vertices[0]],
                    b: mesh.vertices[e.vertices[1]],
                    length: e.length,
                    normal: e.normal,
                }
            })
            .collect();
        LocalCtx {
            nk: el.kind.node_count(),
            subdomain: el.subdomain,
            basis,
            edges,
            diameter: mesh.element_diameter(k),
        }
    }
}

/// Stiffness block: integral of (A grad phi_j) . grad phi_i. Built on the
/// lower triangle and mirrored, so it is exactly symmetric.
pub(crate) fn stiffness(
    ctx: &LocalCtx,
    rule: &QuadRule2d,
    coeff: &dyn Fn(Point2<f64>) -> Matrix2<f64>,
) -> DMatrix<f64> {
    let nk = ctx.nk;
    let mut m = DMatrix::zeros(nk, nk);
    let det = ctx.basis.map.det_jacobian();
    for (pt, w) in rule.points.iter().zip(rule.weights.iter()) {
        let grads = ctx.basis.map.physical_gradients(pt[0], pt[1]);
        let a = coeff(ctx.basis.map.to_physical(*pt));
        let wq = w * det;
        for i in 0..nk {
            let agi = a * grads[i];
            for j in 0..=i {
                m[(i, j)] += wq * agi.dot(&grads[j]);
            }
        }
    }
    mirror_lower(&mut m);
    m
}

/// Element mass matrix.
pub(crate) fn mass(ctx: &LocalCtx, rule: &QuadRule2d) -> DMatrix<f64> {
    let nk = ctx.nk;
    let mut m = DMatrix::zeros(nk, nk);
    let det = ctx.basis.map.det_jacobian();
    for (pt, w) in rule.points.iter().zip(rule.weights.iter()) {
        let vals = crate::fem::shape_values(ctx.basis.kind, pt[0], pt[1]);
        let wq = w * det;
        for i in 0..nk {
            for j in 0..=i {
                m[(i, j)] += wq * vals[i] * vals[j];
            }
        }
    }
    mirror_lower(&mut m);
    m
}

/// Gram matrix of the H^2 seminorm; zero for degree-1 triangles, rank one
/// (the constant mixed derivative) for Q1 rectangles.
pub(crate) fn h2_gram(ctx: &LocalCtx) -> DMatrix<f64> {
    let nk = ctx.nk;
    let mut m = DMatrix::zeros(nk, nk);
    if ctx.basis.kind == ElementKind::Rectangle {
        let area = ctx.basis.map.area();
        let d = [1.0, -1.0, 1.0, -1.0].map(|s| s / area);
        for i in 0..nk {
            for j in 0..nk {
                m[(i, j)] = 2.0 * area * d[i] * d[j];
            }
        }
    }
    m
}

/// Element load vector: integral of f phi_i.
pub(crate) fn cell_load(
    ctx: &LocalCtx,
    rule: &QuadRule2d,
    f: &dyn Fn(Point2<f64>) -> f64,
) -> DVector<f64> {
    let nk = ctx.nk;
    let mut v = DVector::zeros(nk);
    let det = ctx.basis.map.det_jacobian();
    for (pt, w) in rule.points.iter().zip(rule.weights.iter()) {
        let vals = crate::fem::shape_values(ctx.basis.kind, pt[0], pt[1]);
        let fx = f(ctx.basis.map.to_physical(*pt));
        for i in 0..nk {
            v[i] += w * det * fx * vals[i];
        }
    }
    v
}

/// Quadrature data of one edge point: physical weight, physical point,
/// element shape values, element physical gradients, trace basis values.
pub(crate) struct EdgePoint {
    pub weight: f64,
    pub point: Point2<f64>,
    pub values: [f64; crate::fem::MAX_NODES],
    pub grads: [Vector2<f64>; crate::fem::MAX_NODES],
    pub trace: [f64; 2],
}

pub(crate) fn edge_points(ctx: &LocalCtx, le: &LocalEdge, rule: &QuadRule1d) -> Vec<EdgePoint> {
    rule.points
        .iter()
        .zip(rule.weights.iter())
        .map(|(t, w)| {
            let s = 0.5 * (t + 1.0);
            let point = Point2::from(le.a.coords + s * (le.b - le.a));
            let r = ctx.basis.map.to_reference(point);
            let (values, grads) = ctx.basis.eval(r[0], r[1]);
            EdgePoint {
                weight: w * 0.5 * le.length,
                point,
                values,
                grads,
                trace: [1.0 - s, s],
            }
        })
        .collect()
}

/// Jump Gram on one edge: psi psi^T with psi = [phi_0.., -chi_0, -chi_1],
/// i.e. the matrix of (u - uhat)(v - vhat) without the eta/h factor.
pub(crate) fn edge_jump_gram(ctx: &LocalCtx, le: &LocalEdge, rule: &QuadRule1d) -> DMatrix<f64> {
    let nk = ctx.nk;
    let dim = nk + 2;
    let mut m = DMatrix::zeros(dim, dim);
    for ep in edge_points(ctx, le, rule) {
        let mut psi = [0.0; crate::fem::MAX_NODES + 2];
        psi[..nk].copy_from_slice(&ep.values[..nk]);
        psi[nk] = -ep.trace[0];
        psi[nk + 1] = -ep.trace[1];
        for i in 0..dim {
            for j in 0..=i {
                m[(i, j)] += ep.weight * psi[i] * psi[j];
            }
        }
    }
    mirror_lower(&mut m);
    m
}

/// Conormal flux matrices on one edge:
/// `flux_u[(i, j)]  = integral of (A grad phi_j . normal) phi_i`,
/// `flux_tr[(r, j)] = integral of (A grad phi_j . normal) chi_r`.
pub(crate) fn edge_flux(
    ctx: &LocalCtx,
    le: &LocalEdge,
    rule: &QuadRule1d,
    coeff: &dyn Fn(Point2<f64>) -> Matrix2<f64>,
    normal: Vector2<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let nk = ctx.nk;
    let mut flux_u = DMatrix::zeros(nk, nk);
    let mut flux_tr = DMatrix::zeros(2, nk);
    for ep in edge_points(ctx, le, rule) {
        let a = coeff(ep.point);
        for j in 0..nk {
            let conormal = (a * ep.grads[j]).dot(&normal) * ep.weight;
            for i in 0..nk {
                flux_u[(i, j)] += conormal * ep.values[i];
            }
            for r in 0..2 {
                flux_tr[(r, j)] += conormal * ep.trace[r];
            }
        }
    }
    (flux_u, flux_tr)
}

/// Scalar data loads on one edge: (integral of g phi_i, integral of g chi_r).
pub(crate) fn edge_scalar_load(
    ctx: &LocalCtx,
    le: &LocalEdge,
    rule: &QuadRule1d,
    g: &dyn Fn(Point2<f64>) -> f64,
) -> (DVector<f64>, [f64; 2]) {
    let nk = ctx.nk;
    let mut lu = DVector::zeros(nk);
    let mut ltr = [0.0; 2];
    for ep in edge_points(ctx, le, rule) {
        let gx = g(ep.point) * ep.weight;
        for i in 0..nk {
            lu[i] += gx * ep.values[i];
        }
        for r in 0..2 {
            ltr[r] += gx * ep.trace[r];
        }
    }
    (lu, ltr)
}

/// Flux data load on one edge: integral of g (A grad phi_i . normal).
pub(crate) fn edge_flux_load(
    ctx: &LocalCtx,
    le: &LocalEdge,
    rule: &QuadRule1d,
    g: &dyn Fn(Point2<f64>) -> f64,
    coeff: &dyn Fn(Point2<f64>) -> Matrix2<f64>,
    normal: Vector2<f64>,
) -> DVector<f64> {
    let nk = ctx.nk;
    let mut l = DVector::zeros(nk);
    for ep in edge_points(ctx, le, rule) {
        let a = coeff(ep.point);
        let gx = g(ep.point) * ep.weight;
        for i in 0..nk {
            l[i] += gx * (a * ep.grads[i]).dot(&normal);
        }
    }
    l
}

/// Trace mass of the element basis on one edge: integral of phi_i phi_j.
pub(crate) fn edge_trace_mass(ctx: &LocalCtx, le: &LocalEdge, rule: &QuadRule1d) -> DMatrix<f64> {
    let nk = ctx.nk;
    let mut m = DMatrix::zeros(nk, nk);
    for ep in edge_points(ctx, le, rule) {
        for i in 0..nk {
            for j in 0..=i {
                m[(i, j)] += ep.weight * ep.values[i] * ep.values[j];
            }
        }
    }
    mirror_lower(&mut m);
    m
}

/// Gradient Gram on one edge: integral of grad phi_i . grad phi_j.
pub(crate) fn edge_grad_gram(ctx: &LocalCtx, le: &LocalEdge, rule: &QuadRule1d) -> DMatrix<f64> {
    let nk = ctx.nk;
    let mut m = DMatrix::zeros(nk, nk);
    for ep in edge_points(ctx, le, rule) {
        for i in 0..nk {
            for j in 0..=i {
                m[(i, j)] += ep.weight * ep.grads[i].dot(&ep.grads[j]);
            }
        }
    }
    mirror_lower(&mut m);
    m
}

fn mirror_lower(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            m[(i, j)] = m[(j, i)];
        }
    }
}
