//! Reference elements: shape functions, element maps, and quadrature rules.
//!
//! Two cell types are supported, both with nodal degree-1 bases:
//! - `Triangle`: P1 on the reference triangle (0,0)-(1,0)-(0,1),
//! - `Rectangle`: Q1 on the reference square [-1,1]^2.
//!
//! Edge traces use the 1D nodal basis on [-1,1] mapped by arc length.

use nalgebra::{Matrix2, Point2, Vector2};

use crate::error::{Error, Result};

/// Cell shape of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Triangle,
    Rectangle,
}

impl ElementKind {
    /// Number of nodes (= local degrees of freedom for degree 1).
    pub fn node_count(self) -> usize {
        match self {
            ElementKind::Triangle => 3,
            ElementKind::Rectangle => 4,
        }
    }

    /// Measure of the reference cell.
    pub fn reference_measure(self) -> f64 {
        match self {
            ElementKind::Triangle => 0.5,
            ElementKind::Rectangle => 4.0,
        }
    }
}

/// Maximum node count over the supported kinds; fixed-size buffers use this.
pub const MAX_NODES: usize = 4;

/// Corner signs of the Q1 reference square, in the node order used throughout.
const Q1_SIGNS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Shape function values at a reference point. Unused trailing slots are zero.
pub fn shape_values(kind: ElementKind, xi: f64, eta: f64) -> [f64; MAX_NODES] {
    match kind {
        ElementKind::Triangle => [1.0 - xi - eta, xi, eta, 0.0],
        ElementKind::Rectangle => {
            let mut v = [0.0; MAX_NODES];
            for (i, (sx, sy)) in Q1_SIGNS.iter().enumerate() {
                v[i] = 0.25 * (1.0 + sx * xi) * (1.0 + sy * eta);
            }
            v
        }
    }
}

/// Reference gradients of the shape functions at a reference point.
pub fn shape_gradients(kind: ElementKind, xi: f64, eta: f64) -> [Vector2<f64>; MAX_NODES] {
    match kind {
        ElementKind::Triangle => [
            Vector2::new(-1.0, -1.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(0.0, 1.0),
            Vector2::zeros(),
        ],
        ElementKind::Rectangle => {
            let mut g = [Vector2::zeros(); MAX_NODES];
            for (i, (sx, sy)) in Q1_SIGNS.iter().enumerate() {
                g[i] = Vector2::new(0.25 * sx * (1.0 + sy * eta), 0.25 * sy * (1.0 + sx * xi));
            }
            g
        }
    }
}

/// Affine map between the reference cell and a physical element.
///
/// Both supported shapes have a constant Jacobian: triangles are mapped
/// affinely and rectangles are axis-aligned, so the bilinear map degenerates
/// to a diagonal affine one.
#[derive(Debug, Clone)]
pub struct ElementMap {
    pub kind: ElementKind,
    jac: Matrix2<f64>,
    inv_jac: Matrix2<f64>,
    inv_jac_t: Matrix2<f64>,
    det_jac: f64,
    shift: Vector2<f64>,
}

impl ElementMap {
    /// Builds the map from the physical corner points (counterclockwise).
    ///
    /// Panics if a rectangle is not axis-aligned; the mesh builder only
    /// produces axis-aligned cells.
    pub fn new(kind: ElementKind, verts: &[Point2<f64>]) -> Self {
        assert_eq!(verts.len(), kind.node_count());
        let (jac, shift) = match kind {
            ElementKind::Triangle => {
                let jac = Matrix2::from_columns(&[verts[1] - verts[0], verts[2] - verts[0]]);
                (jac, verts[0].coords)
            }
            ElementKind::Rectangle => {
                let hx = verts[1].x - verts[0].x;
                let hy = verts[3].y - verts[0].y;
                let tol = 1e-12 * (hx.abs() + hy.abs());
                assert!(
                    (verts[1].y - verts[0].y).abs() <= tol
                        && (verts[3].x - verts[0].x).abs() <= tol
                        && (verts[2].x - verts[1].x).abs() <= tol
                        && (verts[2].y - verts[3].y).abs() <= tol,
                    "rectangle cells must be axis-aligned"
                );
                let jac = Matrix2::new(0.5 * hx, 0.0, 0.0, 0.5 * hy);
                let center = verts[0].coords + Vector2::new(0.5 * hx, 0.5 * hy);
                (jac, center)
            }
        };
        let det_jac = jac.determinant();
        assert!(det_jac > 0.0, "element vertices must be counterclockwise");
        let inv_jac = jac.try_inverse().expect("constant Jacobian is invertible");
        ElementMap {
            kind,
            jac,
            inv_jac,
            inv_jac_t: inv_jac.transpose(),
            det_jac,
            shift,
        }
    }

    pub fn to_physical(&self, reference: [f64; 2]) -> Point2<f64> {
        Point2::from(self.shift + self.jac * Vector2::new(reference[0], reference[1]))
    }

    pub fn to_reference(&self, physical: Point2<f64>) -> [f64; 2] {
        let r = self.inv_jac * (physical.coords - self.shift);
        [r.x, r.y]
    }

    /// Constant integration factor: physical integral = sum w_q f(x_q) * det.
    pub fn det_jacobian(&self) -> f64 {
        self.det_jac
    }

    pub fn area(&self) -> f64 {
        self.det_jac * self.kind.reference_measure()
    }

    /// Physical gradients of all shape functions at a reference point.
    pub fn physical_gradients(&self, xi: f64, eta: f64) -> [Vector2<f64>; MAX_NODES] {
        let mut g = shape_gradients(self.kind, xi, eta);
        for gi in g.iter_mut() {
            *gi = self.inv_jac_t * *gi;
        }
        g
    }
}

/// Nodal basis of one element: shape functions plus the geometric map.
#[derive(Debug, Clone)]
pub struct BasisSet {
    pub kind: ElementKind,
    pub map: ElementMap,
}

impl BasisSet {
    pub fn new(kind: ElementKind, verts: &[Point2<f64>]) -> Self {
        BasisSet {
            kind,
            map: ElementMap::new(kind, verts),
        }
    }

    pub fn node_count(&self) -> usize {
        self.kind.node_count()
    }

    /// Values and physical gradients at a reference point.
    pub fn eval(&self, xi: f64, eta: f64) -> ([f64; MAX_NODES], [Vector2<f64>; MAX_NODES]) {
        (shape_values(self.kind, xi, eta), self.map.physical_gradients(xi, eta))
    }

    /// Value of the interpolant with the given coefficients at a reference point.
    pub fn value(&self, coeffs: &[f64], xi: f64, eta: f64) -> f64 {
        let v = shape_values(self.kind, xi, eta);
        coeffs.iter().zip(v.iter()).map(|(c, n)| c * n).sum()
    }

    /// Physical gradient of the interpolant at a reference point.
    pub fn gradient(&self, coeffs: &[f64], xi: f64, eta: f64) -> Vector2<f64> {
        let g = self.map.physical_gradients(xi, eta);
        coeffs
            .iter()
            .zip(g.iter())
            .fold(Vector2::zeros(), |acc, (c, gi)| acc + *c * *gi)
    }

    /// Squared H^2 seminorm of the interpolant on this element.
    ///
    /// Degree-1 functions have no pure second derivatives; only the Q1 mixed
    /// derivative survives and is constant, so the value is closed-form.
    pub fn h2_seminorm_sq(&self, coeffs: &[f64]) -> f64 {
        match self.kind {
            ElementKind::Triangle => 0.0,
            ElementKind::Rectangle => {
                let area = self.map.area();
                let vxy = (coeffs[0] - coeffs[1] + coeffs[2] - coeffs[3]) / area;
                2.0 * vxy * vxy * area
            }
        }
    }
}

/// Highest polynomial degree the quadrature builders accept.
pub const MAX_QUAD_DEGREE: usize = 9;

/// 1D rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct QuadRule1d {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// 2D rule on the reference cell of an [`ElementKind`].
#[derive(Debug, Clone)]
pub struct QuadRule2d {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_QUAD_DEGREE {
        return Err(Error::InvalidParam(format!(
            "quadrature degree {degree} not supported (max {MAX_QUAD_DEGREE})"
        )));
    }
    Ok(())
}

/// Gauss-Legendre rule exact for polynomials of the given degree on [-1, 1].
pub fn edge_rule(degree: usize) -> Result<QuadRule1d> {
    check_degree(degree)?;
    let n = degree / 2 + 1;
    let (points, weights) = gauss_legendre(n);
    Ok(QuadRule1d {
        points,
        weights,
        degree,
    })
}

/// Rule on the reference cell, exact for total degree `degree` (triangles)
/// or degree `degree` per direction (rectangles).
pub fn cell_rule(kind: ElementKind, degree: usize) -> Result<QuadRule2d> {
    check_degree(degree)?;
    match kind {
        ElementKind::Rectangle => {
            let line = edge_rule(degree)?;
            let m = line.points.len();
            let mut points = Vec::with_capacity(m * m);
            let mut weights = Vec::with_capacity(m * m);
            for j in 0..m {
                for i in 0..m {
                    points.push([line.points[i], line.points[j]]);
                    weights.push(line.weights[i] * line.weights[j]);
                }
            }
            Ok(QuadRule2d {
                points,
                weights,
                degree,
            })
        }
        ElementKind::Triangle => {
            if degree <= 2 {
                // Edge-midpoint rule, exact for quadratics.
                Ok(QuadRule2d {
                    points: vec![[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]],
                    weights: vec![1.0 / 6.0; 3],
                    degree: 2,
                })
            } else {
                // Collapsed tensor rule: x = s(1-t), y = t with Jacobian (1-t).
                // The t-direction integrand gains one degree from the Jacobian.
                let (sp, sw) = gauss_legendre(degree / 2 + 1);
                let (tp, tw) = gauss_legendre((degree + 1) / 2 + 1);
                let mut points = Vec::with_capacity(sp.len() * tp.len());
                let mut weights = Vec::with_capacity(points.capacity());
                for (tj, wj) in tp.iter().zip(tw.iter()) {
                    let t = 0.5 * (tj + 1.0);
                    for (si, wi) in sp.iter().zip(sw.iter()) {
                        let s = 0.5 * (si + 1.0);
                        points.push([s * (1.0 - t), t]);
                        weights.push(0.25 * wi * wj * (1.0 - t));
                    }
                }
                Ok(QuadRule2d {
                    points,
                    weights,
                    degree,
                })
            }
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact integral of x^p over [-1, 1].
    fn edge_moment(p: u32) -> f64 {
        if p % 2 == 1 {
            0.0
        } else {
            2.0 / (p as f64 + 1.0)
        }
    }

    /// Exact integral of x^p y^q over the reference triangle: p! q! / (p+q+2)!.
    fn tri_moment(p: u32, q: u32) -> f64 {
        let fact = |m: u32| (1..=m as u128).product::<u128>().max(1) as f64;
        fact(p) * fact(q) / fact(p + q + 2)
    }

    #[test]
    fn edge_rule_degree_3_is_two_point_gauss() {
        let r = edge_rule(3).unwrap();
        let g = 1.0 / 3.0_f64.sqrt();
        assert_eq!(r.points.len(), 2);
        assert_relative_eq!(r.points[0], -g, max_relative = 1e-14);
        assert_relative_eq!(r.points[1], g, max_relative = 1e-14);
        assert_relative_eq!(r.weights[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(r.weights[1], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn edge_rules_integrate_monomials() {
        for degree in 0..=MAX_QUAD_DEGREE {
            let r = edge_rule(degree).unwrap();
            for p in 0..=degree as u32 {
                let got: f64 = r
                    .points
                    .iter()
                    .zip(r.weights.iter())
                    .map(|(x, w)| w * x.powi(p as i32))
                    .sum();
                let exact = edge_moment(p);
                assert!(
                    (got - exact).abs() <= 1e-13 * exact.abs().max(1.0),
                    "degree {degree}, p {p}: got {got}, exact {exact}"
                );
            }
        }
    }

    #[test]
    fn rectangle_rule_degree_3_is_2x2_tensor() {
        let r = cell_rule(ElementKind::Rectangle, 3).unwrap();
        assert_eq!(r.points.len(), 4);
        let sum: f64 = r.weights.iter().sum();
        assert_relative_eq!(sum, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn triangle_rule_degree_2_is_midpoint_rule() {
        let r = cell_rule(ElementKind::Triangle, 2).unwrap();
        assert_eq!(r.points.len(), 3);
        assert_relative_eq!(r.weights.iter().sum::<f64>(), 0.5, max_relative = 1e-14);
        // Verify against exact integrals of 1, x, y, x^2, xy, y^2.
        for (p, q) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
            let got: f64 = r
                .points
                .iter()
                .zip(r.weights.iter())
                .map(|(pt, w)| w * pt[0].powi(p) * pt[1].powi(q))
                .sum();
            assert_relative_eq!(got, tri_moment(p as u32, q as u32), max_relative = 1e-13);
        }
    }

    #[test]
    fn cell_rules_integrate_monomials() {
        for degree in 0..=MAX_QUAD_DEGREE {
            let r = cell_rule(ElementKind::Triangle, degree).unwrap();
            for p in 0..=degree as u32 {
                for q in 0..=(degree as u32 - p) {
                    let got: f64 = r
                        .points
                        .iter()
                        .zip(r.weights.iter())
                        .map(|(pt, w)| w * pt[0].powi(p as i32) * pt[1].powi(q as i32))
                        .sum();
                    let exact = tri_moment(p, q);
                    assert!(
                        (got - exact).abs() <= 1e-13 * exact.max(1.0),
                        "tri degree {degree} x^{p} y^{q}: got {got} exact {exact}"
                    );
                }
            }
            let r = cell_rule(ElementKind::Rectangle, degree).unwrap();
            for p in 0..=degree as u32 {
                for q in 0..=degree as u32 {
                    let got: f64 = r
                        .points
                        .iter()
                        .zip(r.weights.iter())
                        .map(|(pt, w)| w * pt[0].powi(p as i32) * pt[1].powi(q as i32))
                        .sum();
                    let exact = edge_moment(p) * edge_moment(q);
                    assert!(
                        (got - exact).abs() <= 1e-13 * exact.abs().max(1.0),
                        "rect degree {degree} x^{p} y^{q}: got {got} exact {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn unsupported_degree_is_rejected() {
        assert!(matches!(edge_rule(10), Err(Error::InvalidParam(_))));
        assert!(matches!(
            cell_rule(ElementKind::Triangle, 11),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn q1_center_values_are_quarter() {
        let v = shape_values(ElementKind::Rectangle, 0.0, 0.0);
        for i in 0..4 {
            assert_relative_eq!(v[i], 0.25, max_relative = 1e-15);
        }
    }

    #[test]
    fn p1_kronecker_at_vertices() {
        let v = shape_values(ElementKind::Triangle, 0.0, 0.0);
        assert_eq!(&v[..3], &[1.0, 0.0, 0.0]);
        let v = shape_values(ElementKind::Triangle, 1.0, 0.0);
        assert_eq!(&v[..3], &[0.0, 1.0, 0.0]);
        let v = shape_values(ElementKind::Triangle, 0.0, 1.0);
        assert_eq!(&v[..3], &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn partition_of_unity_and_gradient_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (xi, eta, kind) = if rng.gen_bool(0.5) {
                let xi: f64 = rng.gen_range(0.0..1.0);
                let eta = rng.gen_range(0.0..(1.0 - xi));
                (xi, eta, ElementKind::Triangle)
            } else {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    ElementKind::Rectangle,
                )
            };
            let v = shape_values(kind, xi, eta);
            let g = shape_gradients(kind, xi, eta);
            assert_relative_eq!(v.iter().sum::<f64>(), 1.0, max_relative = 1e-14);
            let gs = g.iter().fold(Vector2::zeros(), |a, b| a + b);
            assert!(gs.norm() <= 1e-14);
        }
    }

    #[test]
    fn affine_triangle_reproduces_linear_gradients() {
        let verts = [
            Point2::new(0.3, 0.1),
            Point2::new(1.1, 0.4),
            Point2::new(0.2, 0.9),
        ];
        let basis = BasisSet::new(ElementKind::Triangle, &verts);
        // u(x, y) = 2x - 3y + 1 interpolated at the nodes.
        let coeffs: Vec<f64> = verts.iter().map(|p| 2.0 * p.x - 3.0 * p.y + 1.0).collect();
        let g = basis.gradient(&coeffs, 0.25, 0.25);
        assert!((g - Vector2::new(2.0, -3.0)).norm() <= 1e-13);
    }

    #[test]
    fn q1_second_derivatives_are_mixed_only() {
        let verts = [
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 0.25),
            Point2::new(0.0, 0.25),
        ];
        let basis = BasisSet::new(ElementKind::Rectangle, &verts);
        // v = xy has v_xy = 1, v_xx = v_yy = 0, so |v|_{H^2}^2 = 2 |K|.
        let coeffs: Vec<f64> = verts.iter().map(|p| p.x * p.y).collect();
        assert_relative_eq!(
            basis.h2_seminorm_sq(&coeffs),
            2.0 * 0.5 * 0.25,
            max_relative = 1e-13
        );
        // The gradient of each basis function is affine along each axis:
        // finite differences of d/dx in the x direction must vanish.
        let dx = 1e-4;
        let g1 = basis.map.physical_gradients(-0.3 + dx, 0.4);
        let g0 = basis.map.physical_gradients(-0.3 - dx, 0.4);
        for i in 0..4 {
            assert!((g1[i].x - g0[i].x).abs() < 1e-10);
        }
    }

    #[test]
    fn map_round_trip() {
        let verts = [
            Point2::new(0.25, 0.5),
            Point2::new(0.5, 0.5),
            Point2::new(0.5, 0.75),
            Point2::new(0.25, 0.75),
        ];
        let map = ElementMap::new(ElementKind::Rectangle, &verts);
        let p = map.to_physical([0.3, -0.7]);
        let r = map.to_reference(p);
        assert_relative_eq!(r[0], 0.3, max_relative = 1e-13);
        assert_relative_eq!(r[1], -0.7, max_relative = 1e-13);
        assert_relative_eq!(map.area(), 0.25 * 0.25, max_relative = 1e-14);
    }
}
