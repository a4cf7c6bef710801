//! Honeycomb tessellations of rectangular domains.
//!
//! Elements are pointy-top hexagons laid out in rows. Node positions are
//! generated on an integer lattice (half element widths horizontally, quarter
//! element heights vertically) so that shared nodes are identified exactly,
//! and then scaled affinely onto the `lx × ly` bounding box.

mod quadrature;
mod wachspress;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use quadrature::{hex_quadrature, tabulate_basis, BasisSample, QuadratureRule};
pub use wachspress::{check_convex, wachspress_gradients, wachspress_shape, NV};

pub type Point = [f64; 2];

/// How consecutive rows of hexagons are arranged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshLayout {
    /// Every row holds `nex` hexagons; odd rows are shifted right by half an
    /// element width. Exactly `nex × ney` elements.
    #[default]
    Staggered,
    /// Even rows hold `nex` hexagons, odd rows `nex - 1` centred between them.
    /// The mesh is mirror-symmetric about `x = lx / 2`.
    Symmetric,
}

/// Named sides of the bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Top,
    Bottom,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Top, Edge::Bottom];

    pub fn name(self) -> &'static str {
        match self {
            Edge::Left => "left",
            Edge::Right => "right",
            Edge::Top => "top",
            Edge::Bottom => "bottom",
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Edge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Edge::Left),
            "right" => Ok(Edge::Right),
            "top" => Ok(Edge::Top),
            "bottom" => Ok(Edge::Bottom),
            other => Err(Error::InvalidArgument(format!("unknown edge '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point>,
    elements: Vec<[usize; NV]>,
    nex: usize,
    ney: usize,
    lx: f64,
    ly: f64,
    layout: MeshLayout,
    boundary: BTreeMap<Edge, Vec<usize>>,
    /// Lattice coordinates of each node.
    lattice: Vec<(i64, i64)>,
    /// (row, lattice x of the centre) of each element.
    element_slots: Vec<(usize, i64)>,
    lattice_width: i64,
}

/// Honeycomb with the default (staggered) layout.
pub fn generate_mesh(nex: usize, ney: usize, lx: f64, ly: f64) -> Result<Mesh> {
    Mesh::generate(nex, ney, lx, ly, MeshLayout::Staggered)
}

impl Mesh {
    pub fn generate(nex: usize, ney: usize, lx: f64, ly: f64, layout: MeshLayout) -> Result<Mesh> {
        if nex == 0 || ney == 0 {
            return Err(Error::InvalidArgument(format!(
                "element counts must be positive, got {nex} x {ney}"
            )));
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "domain dimensions must be positive, got {lx} x {ly}"
            )));
        }
        if layout == MeshLayout::Symmetric && nex < 2 && ney > 1 {
            return Err(Error::InvalidArgument(
                "symmetric layout needs nex >= 2 when ney > 1".into(),
            ));
        }

        // Element centres on the lattice: x in half widths, y in quarter heights.
        let mut slots = Vec::new();
        for row in 0..ney {
            let yc = 2 + 3 * row as i64;
            let odd = row % 2 == 1;
            let (count, first) = match (layout, odd) {
                (MeshLayout::Staggered, false) => (nex, 1),
                (MeshLayout::Staggered, true) => (nex, 2),
                (MeshLayout::Symmetric, false) => (nex, 1),
                (MeshLayout::Symmetric, true) => (nex - 1, 2),
            };
            for k in 0..count {
                slots.push((row, first + 2 * k as i64, yc));
            }
        }

        let offsets: [(i64, i64); NV] = [(0, -2), (1, -1), (1, 1), (0, 2), (-1, 1), (-1, -1)];
        let mut keyed: Vec<[(i64, i64); NV]> = Vec::with_capacity(slots.len());
        let mut lattice: Vec<(i64, i64)> = Vec::new();
        for &(_, xc, yc) in &slots {
            let mut verts = [(0, 0); NV];
            for (v, (dx, dy)) in verts.iter_mut().zip(offsets) {
                *v = (xc + dx, yc + dy);
                lattice.push(*v);
            }
            keyed.push(verts);
        }
        // node numbering: row-major by (y, x)
        lattice.sort_by_key(|&(x, y)| (y, x));
        lattice.dedup();
        let index: HashMap<(i64, i64), usize> =
            lattice.iter().enumerate().map(|(i, &k)| (k, i)).collect();

        let x_min = lattice.iter().map(|k| k.0).min().unwrap_or(0);
        let x_max = lattice.iter().map(|k| k.0).max().unwrap_or(1);
        let y_max = lattice.iter().map(|k| k.1).max().unwrap_or(1);
        debug_assert_eq!(x_min, 0);
        let width = x_max - x_min;
        let nodes: Vec<Point> = lattice
            .iter()
            .map(|&(x, y)| {
                [
                    lx * (x - x_min) as f64 / width as f64,
                    ly * y as f64 / y_max as f64,
                ]
            })
            .collect();
        let elements: Vec<[usize; NV]> = keyed
            .iter()
            .map(|verts| {
                let mut conn = [0; NV];
                for (c, k) in conn.iter_mut().zip(verts) {
                    *c = index[k];
                }
                conn
            })
            .collect();

        let tol = 1e-9 * lx.min(ly);
        let mut boundary = BTreeMap::new();
        for edge in Edge::ALL {
            let set: Vec<usize> = nodes
                .iter()
                .enumerate()
                .filter(|(_, p)| match edge {
                    Edge::Left => p[0] <= tol,
                    Edge::Right => p[0] >= lx - tol,
                    Edge::Bottom => p[1] <= tol,
                    Edge::Top => p[1] >= ly - tol,
                })
                .map(|(i, _)| i)
                .collect();
            boundary.insert(edge, set);
        }

        let mesh = Mesh {
            nodes,
            elements,
            nex,
            ney,
            lx,
            ly,
            layout,
            boundary,
            lattice,
            element_slots: slots.iter().map(|&(r, x, _)| (r, x)).collect(),
            lattice_width: width,
        };
        for e in 0..mesh.num_elements() {
            check_convex(&mesh.element_vertices(e))?;
        }
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; NV]] {
        &self.elements
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nex(&self) -> usize {
        self.nex
    }

    pub fn ney(&self) -> usize {
        self.ney
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn layout(&self) -> MeshLayout {
        self.layout
    }

    /// Nominal element width `lx / nex`.
    pub fn element_width(&self) -> f64 {
        self.lx / self.nex as f64
    }

    /// Nominal element height `ly / ney`.
    pub fn element_height(&self) -> f64 {
        self.ly / self.ney as f64
    }

    pub fn element_vertices(&self, e: usize) -> [Point; NV] {
        self.elements[e].map(|n| self.nodes[n])
    }

    pub fn element_area(&self, e: usize) -> f64 {
        polygon_area(&self.element_vertices(e))
    }

    pub fn element_centroid(&self, e: usize) -> Point {
        polygon_centroid(&self.element_vertices(e))
    }

    pub fn element_areas(&self) -> Vec<f64> {
        (0..self.num_elements()).map(|e| self.element_area(e)).collect()
    }

    pub fn centroids(&self) -> Vec<Point> {
        (0..self.num_elements()).map(|e| self.element_centroid(e)).collect()
    }

    /// Row index of an element (0 at the bottom).
    pub fn element_row(&self, e: usize) -> usize {
        self.element_slots[e].0
    }

    /// Nodes within `1e-9 · min(lx, ly)` of a side of the bounding box.
    pub fn boundary_nodes(&self, edge: Edge) -> &[usize] {
        &self.boundary[&edge]
    }

    /// Element paired with each element by the mirror `x → lx - x`, if the
    /// mesh is mirror-symmetric.
    pub fn mirror_element_map(&self) -> Option<Vec<usize>> {
        let lookup: HashMap<(usize, i64), usize> = self
            .element_slots
            .iter()
            .enumerate()
            .map(|(e, &s)| (s, e))
            .collect();
        self.element_slots
            .iter()
            .map(|&(row, x)| lookup.get(&(row, self.lattice_width - x)).copied())
            .collect()
    }

    /// Node paired with each node by the mirror `x → lx - x`, if the mesh is
    /// mirror-symmetric.
    pub fn mirror_node_map(&self) -> Option<Vec<usize>> {
        let lookup: HashMap<(i64, i64), usize> =
            self.lattice.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        self.lattice
            .iter()
            .map(|&(x, y)| lookup.get(&(self.lattice_width - x, y)).copied())
            .collect()
    }

    /// Undirected edges with the number of elements using each.
    pub fn edge_multiplicity(&self) -> BTreeMap<(usize, usize), usize> {
        let mut counts = BTreeMap::new();
        for conn in &self.elements {
            for i in 0..NV {
                let (a, b) = (conn[i], conn[(i + 1) % NV]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }
}

/// Signed area of a polygon (positive when counter-clockwise).
pub fn polygon_area(verts: &[Point]) -> f64 {
    let n = verts.len();
    0.5 * (0..n)
        .map(|i| {
            let p = verts[i];
            let q = verts[(i + 1) % n];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

/// Area centroid of a simple polygon.
pub fn polygon_centroid(verts: &[Point]) -> Point {
    let n = verts.len();
    // shift to the vertex average for accuracy away from the origin
    let o = [
        verts.iter().map(|v| v[0]).sum::<f64>() / n as f64,
        verts.iter().map(|v| v[1]).sum::<f64>() / n as f64,
    ];
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = [verts[i][0] - o[0], verts[i][1] - o[1]];
        let q = [verts[(i + 1) % n][0] - o[0], verts[(i + 1) % n][1] - o[1]];
        let cr = p[0] * q[1] - q[0] * p[1];
        a2 += cr;
        cx += (p[0] + q[0]) * cr;
        cy += (p[1] + q[1]) * cr;
    }
    [o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)]
}

/// Regular pointy-top hexagon with unit circumradius scaled by `edge`.
pub fn regular_hexagon(edge: f64, center: Point) -> [Point; NV] {
    let mut v = [[0.0; 2]; NV];
    for (k, vk) in v.iter_mut().enumerate() {
        let ang = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::FRAC_PI_3;
        *vk = [center[0] + edge * ang.cos(), center[1] + edge * ang.sin()];
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn single_hexagon_fills_unit_box() {
        let mesh = generate_mesh(1, 1, 1.0, 1.0).unwrap();
        assert_eq!(mesh.num_elements(), 1);
        assert_eq!(mesh.num_nodes(), 6);
        let xs: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = mesh.nodes().iter().map(|p| p[1]).collect();
        assert_eq!(xs.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        assert_eq!(ys.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }

    #[test]
    fn arch_discretization_count() {
        let mesh = generate_mesh(200, 100, 0.2, 0.1).unwrap();
        assert_eq!(mesh.num_elements(), 20000);
        let sym = Mesh::generate(200, 100, 0.2, 0.1, MeshLayout::Symmetric).unwrap();
        assert_eq!(sym.num_elements(), 200 * 100 - 50);
    }

    #[test]
    fn interior_edges_shared_by_two_elements() {
        let mesh = generate_mesh(3, 2, 0.3, 0.2).unwrap();
        assert_eq!(mesh.num_elements(), 6);
        // exhaustive oracle: count element pairs sharing each node pair
        let mut shared: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (ea, ca) in mesh.elements().iter().enumerate() {
            for i in 0..NV {
                let (a, b) = (ca[i], ca[(i + 1) % NV]);
                let key = (a.min(b), a.max(b));
                let users = mesh
                    .elements()
                    .iter()
                    .enumerate()
                    .filter(|(eb, cb)| {
                        *eb != ea && cb.contains(&key.0) && cb.contains(&key.1)
                    })
                    .count();
                shared.insert(key, users + 1);
            }
        }
        assert!(shared.values().all(|&c| c == 1 || c == 2));
        // 6 hexagons, 36 edge slots: 2 + 2 in-row and 5 between-row shared edges
        let interior = shared.values().filter(|&&c| c == 2).count();
        let boundary = shared.values().filter(|&&c| c == 1).count();
        assert_eq!(2 * interior + boundary, 36);
        assert_eq!(interior, 9);
        assert_eq!(shared, mesh.edge_multiplicity());
    }

    fn check_invariants(mesh: &Mesh) {
        let tol = 1e-12;
        for p in mesh.nodes() {
            assert!(p[0] >= -tol && p[0] <= mesh.lx() + tol);
            assert!(p[1] >= -tol && p[1] <= mesh.ly() + tol);
        }
        for (e, conn) in mesh.elements().iter().enumerate() {
            let set: BTreeSet<_> = conn.iter().collect();
            assert_eq!(set.len(), NV);
            assert!(mesh.element_area(e) > 0.0);
        }
        // elements sharing more than one node share exactly one edge
        for (a, ca) in mesh.elements().iter().enumerate() {
            for cb in mesh.elements().iter().skip(a + 1) {
                let common: Vec<usize> = ca.iter().filter(|n| cb.contains(n)).copied().collect();
                if common.len() > 1 {
                    assert_eq!(common.len(), 2);
                    let i = ca.iter().position(|&n| n == common[0]).unwrap();
                    let j = ca.iter().position(|&n| n == common[1]).unwrap();
                    assert!((i + 1) % NV == j || (j + 1) % NV == i);
                }
            }
        }
        // the edges used once are exactly the boundary of the union
        let area: f64 = mesh.element_areas().iter().sum();
        let mut boundary_flux = 0.0;
        for ((a, b), count) in mesh.edge_multiplicity() {
            assert!(count == 1 || count == 2);
            if count == 1 {
                // orient along the owning element to accumulate the shoelace sum
                let conn = mesh
                    .elements()
                    .iter()
                    .find(|c| c.contains(&a) && c.contains(&b))
                    .unwrap();
                let i = conn.iter().position(|&n| n == a).unwrap();
                let (p, q) = if conn[(i + 1) % NV] == b {
                    (mesh.nodes()[a], mesh.nodes()[b])
                } else {
                    (mesh.nodes()[b], mesh.nodes()[a])
                };
                boundary_flux += 0.5 * (p[0] * q[1] - q[0] * p[1]);
            }
        }
        assert!((boundary_flux - area).abs() <= 1e-9 * area);
    }

    #[test]
    fn mesh_invariants_hold_for_both_layouts() {
        for layout in [MeshLayout::Staggered, MeshLayout::Symmetric] {
            for (nex, ney) in [(1, 1), (2, 3), (5, 4), (8, 5)] {
                let mesh = Mesh::generate(nex, ney, 0.3, 0.17, layout).unwrap();
                check_invariants(&mesh);
            }
        }
    }

    #[test]
    fn symmetric_layout_has_mirror_pairs() {
        let mesh = Mesh::generate(6, 5, 2.0, 1.0, MeshLayout::Symmetric).unwrap();
        let emap = mesh.mirror_element_map().expect("symmetric mesh");
        for (e, &m) in emap.iter().enumerate() {
            assert_eq!(emap[m], e);
            let (c, d) = (mesh.element_centroid(e), mesh.element_centroid(m));
            assert!((c[0] + d[0] - 2.0).abs() < 1e-12 && (c[1] - d[1]).abs() < 1e-12);
        }
        let nmap = mesh.mirror_node_map().unwrap();
        for (i, &j) in nmap.iter().enumerate() {
            assert!((mesh.nodes()[i][0] + mesh.nodes()[j][0] - 2.0).abs() < 1e-12);
        }
        // the staggered honeycomb is not mirror-symmetric
        let stag = Mesh::generate(6, 5, 2.0, 1.0, MeshLayout::Staggered).unwrap();
        assert!(stag.mirror_element_map().is_none());
    }

    #[test]
    fn boundary_sets_from_bounding_box() {
        let mesh = generate_mesh(4, 3, 0.4, 0.3).unwrap();
        assert_eq!(mesh.boundary_nodes(Edge::Bottom).len(), 4);
        assert_eq!(mesh.boundary_nodes(Edge::Top).len(), 4);
        for &n in mesh.boundary_nodes(Edge::Left) {
            assert!(mesh.nodes()[n][0].abs() < 1e-12);
        }
        assert!(!mesh.boundary_nodes(Edge::Right).is_empty());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(generate_mesh(0, 1, 1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(generate_mesh(1, 0, 1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(generate_mesh(1, 1, -1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(generate_mesh(1, 1, 1.0, 0.0), Err(Error::InvalidArgument(_))));
        assert!(Mesh::generate(1, 2, 1.0, 1.0, MeshLayout::Symmetric).is_err());
    }

    #[test]
    fn edge_names_round_trip() {
        for e in Edge::ALL {
            assert_eq!(e.name().parse::<Edge>().unwrap(), e);
        }
        assert!("diagonal".parse::<Edge>().is_err());
    }
}
