//! Uniform interface-aligned meshes of two-subdomain geometries.
//!
//! The domain is always the unit square, split by a polygonal interface into
//! a lower/left subdomain 1 and an upper subdomain 2:
//!
//! ```text
//!   horizontal-split(y)          staircase
//!   +-----------------+          +--------+--------+
//!   |                 |          |        |  2     |
//!   |        2        |          |   2    +========+  y = 3/4
//!   +=================+  y       +========+        |  y = 1/2
//!   |        1        |          |   1    |   1    |
//!   |                 |          |        |        |
//!   +-----------------+          +--------+--------+
//!                                         x = 1/2
//! ```
//!
//! Edges are classified as interior, interface, or boundary; interface edges
//! store the unit normal outgoing from subdomain 1 and list the subdomain-1
//! element first.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};
use crate::fem::ElementKind;

/// Geometry presets the mesher knows how to triangulate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// Unit square with a straight horizontal interface at the given height.
    HorizontalSplit { y: f64 },
    /// Unit square with the three-segment staircase interface drawn above.
    Staircase,
}

impl Geometry {
    /// Grid fractions that must land on mesh lines for the interface to be
    /// resolved exactly.
    fn alignment_fractions(self) -> Vec<f64> {
        match self {
            Geometry::HorizontalSplit { y } => vec![y],
            Geometry::Staircase => vec![0.5, 0.75],
        }
    }

    /// Subdomain tag of a point that does not lie on the interface.
    pub fn subdomain_of(self, p: Point2<f64>) -> u8 {
        match self {
            Geometry::HorizontalSplit { y } => {
                if p.y < y {
                    1
                } else {
                    2
                }
            }
            Geometry::Staircase => {
                let ceiling = if p.x < 0.5 { 0.5 } else { 0.75 };
                if p.y < ceiling {
                    1
                } else {
                    2
                }
            }
        }
    }

    /// Whether a point lies on the interface (up to roundoff).
    pub fn on_interface(self, p: Point2<f64>) -> bool {
        const TOL: f64 = 1e-12;
        match self {
            Geometry::HorizontalSplit { y } => (p.y - y).abs() <= TOL,
            Geometry::Staircase => {
                let on_g1 = (p.y - 0.5).abs() <= TOL && p.x <= 0.5 + TOL;
                let on_g2 = (p.x - 0.5).abs() <= TOL && p.y >= 0.5 - TOL && p.y <= 0.75 + TOL;
                let on_g3 = (p.y - 0.75).abs() <= TOL && p.x >= 0.5 - TOL;
                on_g1 || on_g2 || on_g3
            }
        }
    }

    /// Total length of the interface.
    pub fn interface_length(self) -> f64 {
        match self {
            Geometry::HorizontalSplit { .. } => 1.0,
            Geometry::Staircase => 1.25,
        }
    }

    pub fn name(self) -> String {
        match self {
            Geometry::HorizontalSplit { y } => format!("horizontal-split(y={y})"),
            Geometry::Staircase => "staircase".to_string(),
        }
    }
}

/// Edge classes distinguished by the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClass {
    Interior,
    Interface,
    Boundary,
}

/// A mesh edge with its geometric and adjacency data.
#[derive(Debug, Clone)]
pub struct Edge {
    /// Endpoint vertex ids in canonical (ascending id) order; trace degrees
    /// of freedom are attached to the endpoints in this order.
    pub vertices: [usize; 2],
    pub class: EdgeClass,
    /// Edge length h_e.
    pub length: f64,
    /// Unit normal. On interface edges this is the normal outgoing from
    /// subdomain 1; on boundary edges the outward normal of the domain.
    pub normal: Vector2<f64>,
    /// Adjacent element ids. Interface edges list the subdomain-1 element
    /// first; interior edges list the element behind the normal first;
    /// boundary edges have exactly one entry.
    pub elements: Vec<usize>,
}

/// One element: its corner vertices (counterclockwise), shape, and subdomain.
#[derive(Debug, Clone)]
pub struct Element {
    pub vertices: Vec<usize>,
    pub kind: ElementKind,
    pub subdomain: u8,
}

/// Edge incidence of one element.
#[derive(Debug, Clone, Copy)]
pub struct ElementEdge {
    pub edge: usize,
    /// +1 if the element's outward normal on this edge equals the stored
    /// edge normal, -1 otherwise.
    pub sign: f64,
}

/// An immutable uniform mesh.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point2<f64>>,
    pub elements: Vec<Element>,
    pub edges: Vec<Edge>,
    pub element_edges: Vec<Vec<ElementEdge>>,
    /// Maximum element diameter.
    pub h: f64,
    /// Realized shape-regularity constant max(h_e / rho_K, h_K / h_e).
    pub nu1: f64,
    /// Subdivisions per unit length (nominal mesh size is 1/n).
    pub n: usize,
    pub geometry: Geometry,
}

/// Shape metrics of a mesh.
#[derive(Debug, Clone, Copy)]
pub struct MeshMetrics {
    pub h: f64,
    pub rho_min: f64,
    pub nu1: f64,
}

/// Builds the uniform mesh of a geometry preset with `n` subdivisions per
/// unit length.
///
/// Rectangle cells carry the Q1 basis; `Triangle` splits every cell along
/// the same lower-left to upper-right diagonal so that nested refinement
/// stays exact.
pub fn build_mesh(geometry: Geometry, n: usize, kind: ElementKind) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::InvalidParam(format!("n must be at least 2, got {n}")));
    }
    if let Geometry::HorizontalSplit { y } = geometry {
        if !(y > 0.0 && y < 1.0) {
            return Err(Error::InvalidParam(format!(
                "interface height must lie inside the unit square, got {y}"
            )));
        }
    }
    for f in geometry.alignment_fractions() {
        let t = f * n as f64;
        if (t - t.round()).abs() > 1e-9 {
            return Err(Error::Alignment(format!(
                "interface line at {f} does not lie on the n={n} grid"
            )));
        }
    }

    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push(Point2::new(i as f64 / n as f64, j as f64 / n as f64));
        }
    }

    let mut elements = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let b = j * np + i;
            let quad = [b, b + 1, b + np + 1, b + np];
            let center = Point2::new((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
            let sub = geometry.subdomain_of(center);
            match kind {
                ElementKind::Rectangle => elements.push(Element {
                    vertices: quad.to_vec(),
                    kind,
                    subdomain: sub,
                }),
                ElementKind::Triangle => {
                    // Lower and upper triangle of the cell, both counterclockwise.
                    elements.push(Element {
                        vertices: vec![quad[0], quad[1], quad[2]],
                        kind,
                        subdomain: sub,
                    });
                    elements.push(Element {
                        vertices: vec![quad[0], quad[2], quad[3]],
                        kind,
                        subdomain: sub,
                    });
                }
            }
        }
    }

    // Collect edges with their per-element outward normals.
    let mut edge_map: BTreeMap<(usize, usize), Vec<(usize, Vector2<f64>)>> = BTreeMap::new();
    for (k, el) in elements.iter().enumerate() {
        let nv = el.vertices.len();
        for i in 0..nv {
            let a = el.vertices[i];
            let b = el.vertices[(i + 1) % nv];
            let t = vertices[b] - vertices[a];
            let outward = Vector2::new(t.y, -t.x).normalize();
            let key = (a.min(b), a.max(b));
            edge_map.entry(key).or_default().push((k, outward));
        }
    }

    let mut edges = Vec::with_capacity(edge_map.len());
    let mut edge_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (key, adj) in &edge_map {
        let (a, b) = *key;
        let length = (vertices[b] - vertices[a]).norm();
        let (class, normal, elems) = match adj.as_slice() {
            [(k, outward)] => (EdgeClass::Boundary, *outward, vec![*k]),
            [(k1, n1), (k2, n2)] => {
                let s1 = elements[*k1].subdomain;
                let s2 = elements[*k2].subdomain;
                if s1 != s2 {
                    // Interface: store the normal outgoing from subdomain 1
                    // and list the subdomain-1 element first.
                    if s1 == 1 {
                        (EdgeClass::Interface, *n1, vec![*k1, *k2])
                    } else {
                        (EdgeClass::Interface, *n2, vec![*k2, *k1])
                    }
                } else {
                    // Interior: canonical normal from the ascending-id tangent,
                    // element behind the normal first.
                    let t = (vertices[b] - vertices[a]).normalize();
                    let normal = Vector2::new(-t.y, t.x);
                    if n1.dot(&normal) > 0.0 {
                        (EdgeClass::Interior, normal, vec![*k1, *k2])
                    } else {
                        (EdgeClass::Interior, normal, vec![*k2, *k1])
                    }
                }
            }
            _ => unreachable!("an edge has one or two adjacent elements"),
        };
        edge_ids.insert(*key, edges.len());
        edges.push(Edge {
            vertices: [a, b],
            class,
            length,
            normal,
            elements: elems,
        });
    }

    // Interface edges must tile the interface exactly.
    for e in &edges {
        if e.class == EdgeClass::Interface {
            let mid = nalgebra::center(&vertices[e.vertices[0]], &vertices[e.vertices[1]]);
            debug_assert!(geometry.on_interface(mid));
        }
    }

    let mut element_edges = Vec::with_capacity(elements.len());
    for el in &elements {
        let nv = el.vertices.len();
        let mut list = Vec::with_capacity(nv);
        for i in 0..nv {
            let a = el.vertices[i];
            let b = el.vertices[(i + 1) % nv];
            let t = vertices[b] - vertices[a];
            let outward = Vector2::new(t.y, -t.x).normalize();
            let id = edge_ids[&(a.min(b), a.max(b))];
            let sign = outward.dot(&edges[id].normal).round();
            debug_assert!(sign.abs() == 1.0);
            list.push(ElementEdge { edge: id, sign });
        }
        element_edges.push(list);
    }

    let mut mesh = Mesh {
        vertices,
        elements,
        edges,
        element_edges,
        h: 0.0,
        nu1: 0.0,
        n,
        geometry,
    };
    let metrics = mesh_metrics(&mesh);
    mesh.h = metrics.h;
    mesh.nu1 = metrics.nu1;
    Ok(mesh)
}

/// Mesh size, smallest inscribed diameter, and realized shape constant.
pub fn mesh_metrics(mesh: &Mesh) -> MeshMetrics {
    let mut h = 0.0_f64;
    let mut rho_min = f64::INFINITY;
    let mut nu1 = 0.0_f64;
    for (k, _) in mesh.elements.iter().enumerate() {
        let hk = mesh.element_diameter(k);
        let rho = mesh.element_inscribed_diameter(k);
        h = h.max(hk);
        rho_min = rho_min.min(rho);
        for ee in &mesh.element_edges[k] {
            let he = mesh.edges[ee.edge].length;
            nu1 = nu1.max(he / rho).max(hk / he);
        }
    }
    MeshMetrics { h, rho_min, nu1 }
}

impl Mesh {
    pub fn element_kind(&self) -> ElementKind {
        self.elements[0].kind
    }

    pub fn element_vertices(&self, k: usize) -> Vec<Point2<f64>> {
        self.elements[k].vertices.iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn element_diameter(&self, k: usize) -> f64 {
        let pts = self.element_vertices(k);
        let mut d = 0.0_f64;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d = d.max((pts[i] - pts[j]).norm());
            }
        }
        d
    }

    /// Diameter of the inscribed circle.
    pub fn element_inscribed_diameter(&self, k: usize) -> f64 {
        let pts = self.element_vertices(k);
        match self.elements[k].kind {
            ElementKind::Rectangle => {
                let hx = (pts[1] - pts[0]).norm();
                let hy = (pts[3] - pts[0]).norm();
                hx.min(hy)
            }
            ElementKind::Triangle => {
                let a = (pts[1] - pts[0]).norm();
                let b = (pts[2] - pts[1]).norm();
                let c = (pts[0] - pts[2]).norm();
                let area = 0.5
                    * ((pts[1] - pts[0]).x * (pts[2] - pts[0]).y
                        - (pts[1] - pts[0]).y * (pts[2] - pts[0]).x)
                        .abs();
                4.0 * area / (a + b + c)
            }
        }
    }

    pub fn element_area(&self, k: usize) -> f64 {
        let pts = self.element_vertices(k);
        let mut area = 0.0;
        for i in 0..pts.len() {
            let p = pts[i];
            let q = pts[(i + 1) % pts.len()];
            area += p.x * q.y - q.x * p.y;
        }
        0.5 * area
    }

    /// Id of the element containing a point of the unit square. Points on the
    /// triangle diagonal resolve to the lower triangle.
    pub fn locate(&self, p: Point2<f64>) -> usize {
        let n = self.n;
        let clamp = |v: f64| (v.floor() as isize).clamp(0, n as isize - 1) as usize;
        let i = clamp(p.x * n as f64);
        let j = clamp(p.y * n as f64);
        let cell = j * n + i;
        match self.element_kind() {
            ElementKind::Rectangle => cell,
            ElementKind::Triangle => {
                let tx = p.x * n as f64 - i as f64;
                let ty = p.y * n as f64 - j as f64;
                if ty <= tx {
                    2 * cell
                } else {
                    2 * cell + 1
                }
            }
        }
    }

    /// Whether `self` is a nested uniform refinement of `coarse` (possibly
    /// the same mesh).
    pub fn refines(&self, coarse: &Mesh) -> bool {
        if self.geometry != coarse.geometry || self.element_kind() != coarse.element_kind() {
            return false;
        }
        let mut m = coarse.n;
        while m < self.n {
            m *= 2;
        }
        m == self.n
    }

    /// Plain-text dump with VERTICES, ELEMENTS, and EDGES sections.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "VERTICES {}", self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(out, "{} {} {}", i, v.x, v.y);
        }
        let _ = writeln!(out, "ELEMENTS {}", self.elements.len());
        for (k, el) in self.elements.iter().enumerate() {
            let kind = match el.kind {
                ElementKind::Triangle => "triangle",
                ElementKind::Rectangle => "rectangle",
            };
            let ids: Vec<String> = el.vertices.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{} {} {} {}", k, kind, el.subdomain, ids.join(" "));
        }
        let _ = writeln!(out, "EDGES {}", self.edges.len());
        for (i, e) in self.edges.iter().enumerate() {
            let class = match e.class {
                EdgeClass::Interior => "interior",
                EdgeClass::Interface => "interface",
                EdgeClass::Boundary => "boundary",
            };
            let adj: Vec<String> = e.elements.iter().map(|k| k.to_string()).collect();
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {}",
                i,
                class,
                e.vertices[0],
                e.vertices[1],
                e.length,
                e.normal.x,
                e.normal.y,
                adj.join(" ")
            );
        }
        out
    }

    /// Structural sanity checks; used by tests and debug builds.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParam(msg));
        // Element areas tile the unit square.
        let total: f64 = (0..self.elements.len()).map(|k| self.element_area(k)).sum();
        if (total - 1.0).abs() > 1e-12 {
            return fail(format!("element areas sum to {total}"));
        }
        // Adjacency counts per class, interface normals, and subdomain purity.
        let mut interface_len = 0.0;
        for (i, e) in self.edges.iter().enumerate() {
            if e.length <= 0.0 || e.vertices[0] == e.vertices[1] {
                return fail(format!("degenerate edge {i}"));
            }
            match e.class {
                EdgeClass::Boundary => {
                    if e.elements.len() != 1 {
                        return fail(format!("boundary edge {i} adjacency"));
                    }
                }
                EdgeClass::Interior => {
                    if e.elements.len() != 2
                        || self.elements[e.elements[0]].subdomain
                            != self.elements[e.elements[1]].subdomain
                    {
                        return fail(format!("interior edge {i} adjacency"));
                    }
                }
                EdgeClass::Interface => {
                    if e.elements.len() != 2
                        || self.elements[e.elements[0]].subdomain != 1
                        || self.elements[e.elements[1]].subdomain != 2
                    {
                        return fail(format!("interface edge {i} adjacency"));
                    }
                    let mid = nalgebra::center(
                        &self.vertices[e.vertices[0]],
                        &self.vertices[e.vertices[1]],
                    );
                    if !self.geometry.on_interface(mid) {
                        return fail(format!("interface edge {i} off the interface"));
                    }
                    interface_len += e.length;
                }
            }
        }
        if (interface_len - self.geometry.interface_length()).abs() > 1e-12 {
            return fail(format!("interface edges tile length {interface_len}"));
        }
        // No element straddles the interface: its centroid's subdomain must
        // match the tag.
        for (k, el) in self.elements.iter().enumerate() {
            let pts = self.element_vertices(k);
            let centroid = Point2::from(
                pts.iter().map(|p| p.coords).sum::<Vector2<f64>>() / pts.len() as f64,
            );
            if self.geometry.subdomain_of(centroid) != el.subdomain {
                return fail(format!("element {k} straddles the interface"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> Geometry {
        Geometry::HorizontalSplit { y: 0.5 }
    }

    #[test]
    fn rectangle_mesh_counts_at_n2() {
        let mesh = build_mesh(example1(), 2, ElementKind::Rectangle).unwrap();
        assert_eq!(mesh.elements.len(), 4);
        assert_eq!(mesh.edges.len(), 12);
        let count = |c: EdgeClass| mesh.edges.iter().filter(|e| e.class == c).count();
        assert_eq!(count(EdgeClass::Interface), 2);
        assert_eq!(count(EdgeClass::Boundary), 8);
        assert_eq!(count(EdgeClass::Interior), 2);
        assert_eq!(
            mesh.elements.iter().filter(|e| e.subdomain == 1).count(),
            2
        );
        mesh.validate().unwrap();
    }

    #[test]
    fn triangle_mesh_counts_at_n2() {
        let mesh = build_mesh(example1(), 2, ElementKind::Triangle).unwrap();
        assert_eq!(mesh.elements.len(), 8);
        assert_eq!(mesh.edges.len(), 16);
        let count = |c: EdgeClass| mesh.edges.iter().filter(|e| e.class == c).count();
        assert_eq!(count(EdgeClass::Interface), 2);
        mesh.validate().unwrap();
    }

    #[test]
    fn misaligned_interface_is_rejected() {
        let err = build_mesh(Geometry::HorizontalSplit { y: 1.0 / 3.0 }, 2, ElementKind::Rectangle)
            .unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
        let err = build_mesh(Geometry::Staircase, 2, ElementKind::Rectangle).unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
    }

    #[test]
    fn too_small_n_is_rejected() {
        assert!(matches!(
            build_mesh(example1(), 1, ElementKind::Rectangle),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn metrics_on_unit_square() {
        let mesh = build_mesh(example1(), 4, ElementKind::Rectangle).unwrap();
        let m = mesh_metrics(&mesh);
        assert!((m.h - 2.0_f64.sqrt() / 4.0).abs() < 1e-14);
        assert!((m.nu1 - 2.0_f64.sqrt()).abs() < 1e-12);

        let mesh = build_mesh(example1(), 4, ElementKind::Triangle).unwrap();
        let m = mesh_metrics(&mesh);
        assert!(m.nu1.is_finite());
        assert!((m.nu1 - (1.0 + 2.0_f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn refinement_halves_h_and_keeps_nu1() {
        for kind in [ElementKind::Rectangle, ElementKind::Triangle] {
            let coarse = build_mesh(example1(), 4, kind).unwrap();
            let fine = build_mesh(example1(), 8, kind).unwrap();
            assert!((fine.h - coarse.h / 2.0).abs() < 1e-14);
            assert!((fine.nu1 - coarse.nu1).abs() < 1e-12);
            assert!(fine.refines(&coarse));
            assert!(!coarse.refines(&fine));
        }
    }

    #[test]
    fn areas_tile_the_domain() {
        for (geom, n) in [
            (example1(), 2),
            (example1(), 6),
            (Geometry::Staircase, 4),
            (Geometry::Staircase, 8),
        ] {
            for kind in [ElementKind::Rectangle, ElementKind::Triangle] {
                let mesh = build_mesh(geom, n, kind).unwrap();
                let total: f64 = (0..mesh.elements.len()).map(|k| mesh.element_area(k)).sum();
                assert!((total - 1.0).abs() <= 1e-12);
                mesh.validate().unwrap();
            }
        }
    }

    #[test]
    fn staircase_interface_edges_and_normals() {
        let mesh = build_mesh(Geometry::Staircase, 4, ElementKind::Rectangle).unwrap();
        let interface: Vec<&Edge> = mesh
            .edges
            .iter()
            .filter(|e| e.class == EdgeClass::Interface)
            .collect();
        // Gamma_1 (2 edges) + Gamma_2 (1 edge) + Gamma_3 (2 edges).
        assert_eq!(interface.len(), 5);
        for e in interface {
            let first = &mesh.elements[e.elements[0]];
            assert_eq!(first.subdomain, 1);
            let mid = nalgebra::center(&mesh.vertices[e.vertices[0]], &mesh.vertices[e.vertices[1]]);
            // The stored normal points from subdomain 1 into subdomain 2.
            let probe = mid + 1e-6 * e.normal;
            assert_eq!(mesh.geometry.subdomain_of(probe), 2);
        }
    }

    #[test]
    fn nested_refinement_contains_children() {
        for kind in [ElementKind::Rectangle, ElementKind::Triangle] {
            let coarse = build_mesh(example1(), 2, kind).unwrap();
            let fine = build_mesh(example1(), 4, kind).unwrap();
            // Every fine element lies inside a single coarse element: all of
            // its vertices locate to the same coarse cell as its centroid.
            for k in 0..fine.elements.len() {
                let pts = fine.element_vertices(k);
                let centroid = Point2::from(
                    pts.iter().map(|p| p.coords).sum::<Vector2<f64>>() / pts.len() as f64,
                );
                let parent = coarse.locate(centroid);
                for p in &pts {
                    let shrunk = Point2::from(centroid.coords + (p - centroid) * (1.0 - 1e-9));
                    assert_eq!(coarse.locate(shrunk), parent);
                }
            }
        }
    }

    #[test]
    fn dump_is_parseable() {
        let mesh = build_mesh(example1(), 2, ElementKind::Rectangle).unwrap();
        let text = mesh.dump();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "VERTICES 9");
        let line: Vec<&str> = lines.next().unwrap().split(' ').collect();
        assert_eq!(line[0], "0");
        assert!(text.contains("ELEMENTS 4"));
        assert!(text.contains("EDGES 12"));
    }
}
