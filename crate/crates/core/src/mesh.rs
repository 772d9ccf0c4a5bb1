//! Structured triangulations of rectangular design domains.
//!
//! Nodes are numbered row-major by `(y, x)`: node `(i, j)` (column `i`, row `j`)
//! has index `j * (nx + 1) + i`. Each rectangular cell is split along the diagonal
//! running from its lower-left to its upper-right corner, giving two
//! counterclockwise triangles per cell.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Tag given to boundary edges not claimed by any region.
pub const FREE_TAG: &str = "free";

const GEOM_EPS: f64 = 1e-9;

/// One side of the rectangle `[0, w] x [0, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// A named interval on one side of the rectangle.
///
/// `from` and `to` are coordinates along the side: `y` for the left and right
/// sides, `x` for the bottom and top sides. A boundary edge belongs to the
/// region when its midpoint lies in the closed interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryRegion {
    pub tag: String,
    pub side: Side,
    pub from: f64,
    pub to: f64,
}

impl BoundaryRegion {
    pub fn new(tag: impl Into<String>, side: Side, from: f64, to: f64) -> Self {
        Self {
            tag: tag.into(),
            side,
            from: from.min(to),
            to: from.max(to),
        }
    }

    /// The whole of one side.
    pub fn whole_side(tag: impl Into<String>, side: Side, w: f64, h: f64) -> Self {
        let len = match side {
            Side::Left | Side::Right => h,
            Side::Bottom | Side::Top => w,
        };
        Self::new(tag, side, 0.0, len)
    }

    fn contains(&self, p: [f64; 2], w: f64, h: f64) -> bool {
        let (on_side, s) = match self.side {
            Side::Left => (p[0].abs() <= GEOM_EPS, p[1]),
            Side::Right => ((p[0] - w).abs() <= GEOM_EPS, p[1]),
            Side::Bottom => (p[1].abs() <= GEOM_EPS, p[0]),
            Side::Top => ((p[1] - h).abs() <= GEOM_EPS, p[0]),
        };
        on_side && s >= self.from - GEOM_EPS && s <= self.to + GEOM_EPS
    }

    fn overlaps(&self, other: &BoundaryRegion) -> bool {
        self.side == other.side && self.from.max(other.from) < self.to.min(other.to) - GEOM_EPS
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: String,
}

/// Per-element area and constant P1 basis gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    /// Geometry of the triangle with counterclockwise vertices `p`.
    pub fn from_vertices(p: [[f64; 2]; 3]) -> Self {
        let det =
            (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let inv = 1.0 / det;
        let mut grads = [[0.0; 2]; 3];
        for a in 0..3 {
            let b = (a + 1) % 3;
            let c = (a + 2) % 3;
            grads[a] = [(p[b][1] - p[c][1]) * inv, (p[c][0] - p[b][0]) * inv];
        }
        Self {
            area: 0.5 * det,
            grads,
        }
    }

    /// Gradient of the P1 interpolant of nodal values `v`.
    pub fn gradient(&self, v: [f64; 3]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for a in 0..3 {
            g[0] += self.grads[a][0] * v[a];
            g[1] += self.grads[a][1] * v[a];
        }
        g
    }
}

/// Structured triangular mesh of `[0, width] x [0, height]`.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    geometry: Vec<ElementGeometry>,
    node_mass: Vec<f64>,
}

/// Serializable recipe for [`TriMesh::generate_rect`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub regions: Vec<BoundaryRegion>,
}

impl MeshSpec {
    pub fn build(&self) -> Result<TriMesh> {
        TriMesh::generate_rect(self.nx, self.ny, self.width, self.height, &self.regions)
    }
}

impl TriMesh {
    /// Builds an `nx` by `ny` cell mesh of a `w` by `h` rectangle and tags its
    /// boundary edges with `regions`.
    pub fn generate_rect(
        nx: usize,
        ny: usize,
        w: f64,
        h: f64,
        regions: &[BoundaryRegion],
    ) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return config_err(format!(
                "mesh needs at least one cell per direction, got {nx}x{ny}"
            ));
        }
        if !(w > 0.0 && h > 0.0) || !w.is_finite() || !h.is_finite() {
            return config_err(format!("domain size must be positive, got {w}x{h}"));
        }
        for (i, a) in regions.iter().enumerate() {
            if a.tag == FREE_TAG {
                return config_err(format!("region tag `{FREE_TAG}` is reserved"));
            }
            if !(a.from.is_finite() && a.to.is_finite()) || a.from > a.to {
                return config_err(format!("region `{}` has an invalid interval", a.tag));
            }
            for b in &regions[i + 1..] {
                if a.overlaps(b) {
                    return config_err(format!(
                        "boundary regions `{}` and `{}` overlap",
                        a.tag, b.tag
                    ));
                }
            }
        }

        let stride = nx + 1;
        let mut nodes = Vec::with_capacity(stride * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([w * i as f64 / nx as f64, h * j as f64 / ny as f64]);
            }
        }

        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let n0 = j * stride + i;
                let n1 = n0 + 1;
                let n2 = n1 + stride;
                let n3 = n0 + stride;
                elements.push([n0, n1, n2]);
                elements.push([n0, n2, n3]);
            }
        }

        // Walk the boundary counterclockwise: bottom, right, top, left.
        let mut pairs = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            pairs.push([i, i + 1]);
        }
        for j in 0..ny {
            pairs.push([j * stride + nx, (j + 1) * stride + nx]);
        }
        for i in (0..nx).rev() {
            pairs.push([ny * stride + i + 1, ny * stride + i]);
        }
        for j in (0..ny).rev() {
            pairs.push([(j + 1) * stride, j * stride]);
        }
        let boundary_edges = pairs
            .into_iter()
            .map(|nodes_pair| {
                let tag = regions
                    .iter()
                    .find(|r| {
                        let (a, b) = (nodes[nodes_pair[0]], nodes[nodes_pair[1]]);
                        r.contains([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])], w, h)
                    })
                    .map_or(FREE_TAG.to_string(), |r| r.tag.clone());
                BoundaryEdge {
                    nodes: nodes_pair,
                    tag,
                }
            })
            .collect();

        let geometry: Vec<ElementGeometry> = elements
            .iter()
            .map(|el| ElementGeometry::from_vertices([nodes[el[0]], nodes[el[1]], nodes[el[2]]]))
            .collect();
        let mut node_mass = vec![0.0; nodes.len()];
        for (el, g) in elements.iter().zip(&geometry) {
            for &n in el {
                node_mass[n] += g.area / 3.0;
            }
        }

        Ok(Self {
            nodes,
            elements,
            boundary_edges,
            width: w,
            height: h,
            nx,
            ny,
            geometry,
            node_mass,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn element_geometry(&self, e: usize) -> &ElementGeometry {
        &self.geometry[e]
    }

    pub fn geometries(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    /// Lumped (row-sum) mass of each node: one third of the adjacent element area.
    pub fn node_mass(&self) -> &[f64] {
        &self.node_mass
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.boundary_edges.iter().any(|e| e.tag == tag)
    }

    pub fn edges_with_tag<'a>(
        &'a self,
        tag: &'a str,
    ) -> impl Iterator<Item = &'a BoundaryEdge> + 'a {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Sorted, deduplicated nodes touched by edges carrying `tag`.
    pub fn nodes_with_tag(&self, tag: &str) -> Vec<usize> {
        let mut out: Vec<usize> = self.edges_with_tag(tag).flat_map(|e| e.nodes).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Every node on the rectangle boundary, sorted.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.boundary_edges.iter().flat_map(|e| e.nodes).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let a = self.nodes[edge.nodes[0]];
        let b = self.nodes[edge.nodes[1]];
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    /// Mean of nodal values over each element.
    pub fn element_means(&self, nodal: &[f64]) -> Vec<f64> {
        self.elements
            .iter()
            .map(|el| (nodal[el[0]] + nodal[el[1]] + nodal[el[2]]) / 3.0)
            .collect()
    }

    /// Recovers a nodal field from per-element values by area-weighted averaging.
    pub fn element_to_nodal(&self, per_element: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.num_nodes()];
        for ((el, g), v) in self.elements.iter().zip(&self.geometry).zip(per_element) {
            for &n in el {
                acc[n] += g.area * v;
            }
        }
        // node_mass holds a third of the adjacent area
        acc.iter()
            .zip(&self.node_mass)
            .map(|(a, m)| a / (3.0 * m))
            .collect()
    }

    /// Lumped integral of a nodal field over the domain.
    pub fn integrate(&self, nodal: &[f64]) -> f64 {
        nodal.iter().zip(&self.node_mass).map(|(v, m)| v * m).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantilever_regions() -> Vec<BoundaryRegion> {
        vec![
            BoundaryRegion::whole_side("dirichlet", Side::Left, 2.0, 1.0),
            BoundaryRegion::new("traction", Side::Right, 0.45, 0.55),
        ]
    }

    #[test]
    fn smallest_mesh() {
        let m = TriMesh::generate_rect(1, 1, 1.0, 1.0, &[]).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.num_elements(), 2);
        assert_eq!(m.boundary_edges.len(), 4);
        assert!(m.boundary_edges.iter().all(|e| e.tag == FREE_TAG));
    }

    #[test]
    fn area_identity() {
        let m = TriMesh::generate_rect(2, 1, 2.0, 1.0, &[]).unwrap();
        assert_eq!(m.num_nodes(), 6);
        assert_eq!(m.num_elements(), 4);
        let total: f64 = m.geometries().iter().map(|g| g.area).sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cantilever_tags_match_brute_force() {
        let m = TriMesh::generate_rect(80, 40, 2.0, 1.0, &cantilever_regions()).unwrap();
        // brute force: an edge belongs to a region iff both endpoints satisfy the predicate
        let mut n_d = 0;
        let mut n_t = 0;
        for e in &m.boundary_edges {
            let a = m.nodes[e.nodes[0]];
            let b = m.nodes[e.nodes[1]];
            let on_left = a[0] == 0.0 && b[0] == 0.0;
            let in_patch = a[0] == 2.0
                && b[0] == 2.0
                && [a[1], b[1]]
                    .iter()
                    .all(|&y| (0.45 - 1e-9..=0.55 + 1e-9).contains(&y));
            let expected = if on_left {
                n_d += 1;
                "dirichlet"
            } else if in_patch {
                n_t += 1;
                "traction"
            } else {
                FREE_TAG
            };
            assert_eq!(e.tag, expected, "edge {:?}", e.nodes);
        }
        assert_eq!(n_d, 40);
        assert_eq!(n_t, 4);
    }

    #[test]
    fn overlapping_regions_rejected() {
        let regions = [
            BoundaryRegion::new("a", Side::Left, 0.0, 0.6),
            BoundaryRegion::new("b", Side::Left, 0.5, 1.0),
        ];
        assert!(TriMesh::generate_rect(4, 4, 1.0, 1.0, &regions).is_err());
        // touching at an endpoint is fine
        let regions = [
            BoundaryRegion::new("a", Side::Left, 0.0, 0.5),
            BoundaryRegion::new("b", Side::Left, 0.5, 1.0),
        ];
        assert!(TriMesh::generate_rect(4, 4, 1.0, 1.0, &regions).is_ok());
    }

    #[test]
    fn bad_sizes_rejected() {
        assert!(TriMesh::generate_rect(0, 3, 1.0, 1.0, &[]).is_err());
        assert!(TriMesh::generate_rect(3, 3, -1.0, 1.0, &[]).is_err());
    }

    #[test]
    fn unit_right_triangle_geometry() {
        let g = ElementGeometry::from_vertices([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!((g.area - 0.5).abs() < 1e-15);
        let expected = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        for a in 0..3 {
            for c in 0..2 {
                assert!((g.grads[a][c] - expected[a][c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn translation_invariance() {
        let p = [[0.3, 0.1], [1.2, 0.4], [0.5, 0.9]];
        let q = p.map(|v| [v[0] + 7.5, v[1] - 3.25]);
        let a = ElementGeometry::from_vertices(p);
        let b = ElementGeometry::from_vertices(q);
        assert!((a.area - b.area).abs() < 1e-12);
        for k in 0..3 {
            for c in 0..2 {
                assert!((a.grads[k][c] - b.grads[k][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn elements_positive_and_gradients_sum_to_zero() {
        let m = TriMesh::generate_rect(5, 3, 1.7, 0.9, &[]).unwrap();
        for g in m.geometries() {
            assert!(g.area > 0.0);
            let sx: f64 = g.grads.iter().map(|v| v[0]).sum();
            let sy: f64 = g.grads.iter().map(|v| v[1]).sum();
            assert!(sx.abs() < 1e-12 && sy.abs() < 1e-12);
        }
        let mass: f64 = m.node_mass().iter().sum();
        assert!((mass - 1.7 * 0.9).abs() < 1e-12);
    }

    #[test]
    fn refinement_quadruples_elements() {
        let a = TriMesh::generate_rect(3, 2, 2.0, 1.0, &[]).unwrap();
        let b = TriMesh::generate_rect(6, 4, 2.0, 1.0, &[]).unwrap();
        assert_eq!(b.num_elements(), 4 * a.num_elements());
        let area = |m: &TriMesh| m.geometries().iter().map(|g| g.area).sum::<f64>();
        assert!((area(&a) - area(&b)).abs() < 1e-12);
    }

    #[test]
    fn element_to_nodal_preserves_constants() {
        let m = TriMesh::generate_rect(4, 3, 1.0, 1.0, &[]).unwrap();
        let nodal = m.element_to_nodal(&vec![2.5; m.num_elements()]);
        assert!(nodal.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_of_unity(nx in 1usize..6, ny in 1usize..6, l1 in 0.0f64..1.0, l2 in 0.0f64..1.0) {
                let m = TriMesh::generate_rect(nx, ny, 1.3, 0.7, &[]).unwrap();
                let (l1, l2) = if l1 + l2 > 1.0 { (1.0 - l1, 1.0 - l2) } else { (l1, l2) };
                let bary = [1.0 - l1 - l2, l1, l2];
                for (el, g) in m.elements.iter().zip(m.geometries()) {
                    // point inside the element from barycentric coordinates
                    let mut x = [0.0; 2];
                    for a in 0..3 {
                        x[0] += bary[a] * m.nodes[el[a]][0];
                        x[1] += bary[a] * m.nodes[el[a]][1];
                    }
                    // evaluate P1 basis functions at x via their gradients
                    let mut sum = 0.0;
                    for a in 0..3 {
                        let p = m.nodes[el[a]];
                        let val = 1.0 + g.grads[a][0] * (x[0] - p[0]) + g.grads[a][1] * (x[1] - p[1]);
                        prop_assert!((val - bary[a]).abs() < 1e-10);
                        sum += val;
                    }
                    prop_assert!((sum - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
