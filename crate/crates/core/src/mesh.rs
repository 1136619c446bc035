//! 2D quadrilateral meshes, bilinear shape functions, isoparametric mapping,
//! boundary tagging and degree-of-freedom maps.
//!
//! Local node/edge numbering (counterclockwise):
//!
//! ```text
//!   3 --- e2 --- 2
//!   |            |
//!   e3           e1
//!   |            |
//!   0 --- e0 --- 1
//! ```
//!
//! Edge `e` runs from local node `e` to local node `(e + 1) % 4`.

use crate::error::{io_err, Error, Result};
use crate::math::{Mat2, Scalar, Vec2};
use std::collections::BTreeMap;
use std::path::Path;

/// Map local edge -> (start, end) local nodes.
pub const EDGE_NODES: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (3, 0)];

#[derive(Clone, Debug)]
pub struct Mesh2D {
    /// Node coordinates in the scenario's length unit.
    pub nodes: Vec<Vec2<f64>>,
    /// Counterclockwise 4-tuples of node indices.
    pub cells: Vec<[usize; 4]>,
    /// tag -> list of (cell, local edge).
    pub boundary_edges: BTreeMap<String, Vec<(usize, usize)>>,
    /// (cell_a, local_edge_a, cell_b, local_edge_b) for faces shared by two cells.
    pub interior_faces: Vec<(usize, usize, usize, usize)>,
}

impl Mesh2D {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_coords(&self, c: usize) -> [Vec2<f64>; 4] {
        let k = self.cells[c];
        [
            self.nodes[k[0]],
            self.nodes[k[1]],
            self.nodes[k[2]],
            self.nodes[k[3]],
        ]
    }

    /// Global node pair of a cell's local edge, in edge orientation.
    pub fn edge_nodes(&self, cell: usize, edge: usize) -> (usize, usize) {
        let (a, b) = EDGE_NODES[edge];
        (self.cells[cell][a], self.cells[cell][b])
    }

    /// All boundary edges of the mesh regardless of tag.
    pub fn all_boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = self
            .boundary_edges
            .values()
            .flat_map(|e| e.iter().copied())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn tagged(&self, tag: &str) -> Result<&[(usize, usize)]> {
        self.boundary_edges
            .get(tag)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }

    /// Validate positive corner Jacobians, edge/face incidence counts and
    /// unique boundary tags.
    pub fn validate(&self) -> Result<()> {
        let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        for c in 0..self.n_cells() {
            let xs = self.cell_coords(c);
            for &(xi, eta) in &corners {
                let (_, _, det) = isoparametric_map(&xs, xi, eta)?;
                if det <= 0.0 {
                    return Err(Error::InvertedElement { cell: c, det });
                }
            }
        }
        // Each undirected edge belongs to one cell (boundary) or two (interior).
        let mut incidence: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for cell in 0..self.n_cells() {
            for e in 0..4 {
                let (a, b) = self.edge_nodes(cell, e);
                let key = (a.min(b), a.max(b));
                *incidence.entry(key).or_insert(0) += 1;
            }
        }
        for (edge, count) in &incidence {
            if *count > 2 {
                return Err(Error::Geometry(format!(
                    "edge {edge:?} shared by {count} cells"
                )));
            }
        }
        let mut seen: BTreeMap<(usize, usize), &str> = BTreeMap::new();
        for (tag, edges) in &self.boundary_edges {
            for &(cell, e) in edges {
                let (a, b) = self.edge_nodes(cell, e);
                let key = (a.min(b), a.max(b));
                if incidence.get(&key) != Some(&1) {
                    return Err(Error::Geometry(format!(
                        "tag {tag}: edge {key:?} is not a boundary edge"
                    )));
                }
                if let Some(prev) = seen.insert(key, tag) {
                    if prev != tag {
                        return Err(Error::Geometry(format!(
                            "edge {key:?} tagged both {prev} and {tag}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Area by summing mapped-cell integrals with 2x2 Gauss (exact for bilinear maps).
    pub fn total_area(&self) -> f64 {
        let mut area = 0.0;
        for c in 0..self.n_cells() {
            let xs = self.cell_coords(c);
            for (xi, eta, w) in crate::math::gauss_2x2() {
                let (_, _, det) = isoparametric_map(&xs, xi, eta).expect("valid cell");
                area += w * det;
            }
        }
        area
    }

    /// Current-configuration position of a node given a displacement lookup.
    pub fn deformed_node(&self, node: usize, u: impl Fn(usize) -> Vec2<f64>) -> Vec2<f64> {
        self.nodes[node] + u(node)
    }
}

/// Bilinear shape functions on the reference square; also valid outside
/// [-1,1]^2 (polynomial extension).
pub fn shape_eval(xi: f64, eta: f64) -> ([f64; 4], [Vec2<f64>; 4]) {
    let n = [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ];
    let dn = [
        Vec2::new(-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)),
        Vec2::new(0.25 * (1.0 - eta), -0.25 * (1.0 + xi)),
        Vec2::new(0.25 * (1.0 + eta), 0.25 * (1.0 + xi)),
        Vec2::new(-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)),
    ];
    (n, dn)
}

/// 1D linear shape functions on an edge parametrized by s in [-1, 1].
pub fn edge_shape(s: f64) -> [f64; 2] {
    [0.5 * (1.0 - s), 0.5 * (1.0 + s)]
}

/// Isoparametric map of a bilinear quadrilateral: physical point, Jacobian
/// dx/dxi and its determinant. Errors if det <= 0 (inverted element; the
/// caller attaches the cell index).
pub fn isoparametric_map(
    coords: &[Vec2<f64>; 4],
    xi: f64,
    eta: f64,
) -> Result<(Vec2<f64>, Mat2<f64>, f64)> {
    let (n, dn) = shape_eval(xi, eta);
    let mut x = Vec2::zero();
    let mut jac = Mat2::zero();
    for i in 0..4 {
        x += coords[i].scale(n[i]);
        jac.a[0][0] += coords[i].x * dn[i].x;
        jac.a[0][1] += coords[i].x * dn[i].y;
        jac.a[1][0] += coords[i].y * dn[i].x;
        jac.a[1][1] += coords[i].y * dn[i].y;
    }
    let det = jac.det();
    if det <= 0.0 {
        return Err(Error::InvertedElement { cell: usize::MAX, det });
    }
    Ok((x, jac, det))
}

/// Physical shape gradients: J^{-T} * reference gradients.
pub fn physical_gradients(jac: &Mat2<f64>, dn_ref: &[Vec2<f64>; 4]) -> [Vec2<f64>; 4] {
    let jinv_t = jac.inverse().transpose();
    [
        jinv_t.mul_vec(dn_ref[0]),
        jinv_t.mul_vec(dn_ref[1]),
        jinv_t.mul_vec(dn_ref[2]),
        jinv_t.mul_vec(dn_ref[3]),
    ]
}

/// Inverse of the isoparametric map for an axis-aligned rectangular cell.
pub fn rect_inverse_map(coords: &[Vec2<f64>; 4], x: Vec2<f64>) -> (f64, f64) {
    let x0 = coords[0];
    let x2 = coords[2];
    (
        2.0 * (x.x - x0.x) / (x2.x - x0.x) - 1.0,
        2.0 * (x.y - x0.y) / (x2.y - x0.y) - 1.0,
    )
}

/// Edge tag specification for [`build_structured_mesh`]: tag for each side of
/// the rectangle, bottom/right/top/left. Empty strings leave the side untagged
/// under a shared "untagged" tag.
#[derive(Clone, Debug)]
pub struct RectTags {
    pub bottom: String,
    pub right: String,
    pub top: String,
    pub left: String,
}

impl RectTags {
    pub fn new(bottom: &str, right: &str, top: &str, left: &str) -> Self {
        Self {
            bottom: bottom.into(),
            right: right.into(),
            top: top.into(),
            left: left.into(),
        }
    }
}

/// Structured conforming quadrilateral mesh of the axis-aligned rectangle
/// [x0, x1] x [y0, y1] with nx-by-ny cells. Node (i, j) has index
/// `j * (nx + 1) + i`. A `warp` closure may displace grid nodes (used for the
/// circular stamp face); it must keep cells counterclockwise.
pub fn build_structured_mesh_warped(
    rect: [f64; 4],
    nx: usize,
    ny: usize,
    tags: &RectTags,
    warp: impl Fn(f64, f64) -> Vec2<f64>,
) -> Result<Mesh2D> {
    let [x0, y0, x1, y1] = rect;
    if nx < 1 || ny < 1 {
        return Err(Error::Config(format!(
            "mesh resolution must be >= 1, got {nx} x {ny}"
        )));
    }
    if !(x1 > x0) || !(y1 > y0) {
        return Err(Error::Config(format!(
            "degenerate region [{x0}, {x1}] x [{y0}, {y1}]"
        )));
    }
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let fx = i as f64 / nx as f64;
            let fy = j as f64 / ny as f64;
            nodes.push(warp(x0 + fx * (x1 - x0), y0 + fy * (y1 - y0)));
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let cid = |i: usize, j: usize| j * nx + i;
    let mut boundary_edges: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    let mut push = |tag: &str, cell: usize, edge: usize| {
        let tag = if tag.is_empty() { "untagged" } else { tag };
        boundary_edges
            .entry(tag.to_string())
            .or_default()
            .push((cell, edge));
    };
    for i in 0..nx {
        push(&tags.bottom, cid(i, 0), 0);
        push(&tags.top, cid(i, ny - 1), 2);
    }
    for j in 0..ny {
        push(&tags.right, cid(nx - 1, j), 1);
        push(&tags.left, cid(0, j), 3);
    }
    let mut interior_faces = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                interior_faces.push((cid(i, j), 1, cid(i + 1, j), 3));
            }
            if j + 1 < ny {
                interior_faces.push((cid(i, j), 2, cid(i, j + 1), 0));
            }
        }
    }
    let mesh = Mesh2D {
        nodes,
        cells,
        boundary_edges,
        interior_faces,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Structured mesh of an axis-aligned rectangle.
pub fn build_structured_mesh(rect: [f64; 4], nx: usize, ny: usize, tags: &RectTags) -> Result<Mesh2D> {
    build_structured_mesh_warped(rect, nx, ny, tags, |x, y| Vec2::new(x, y))
}

// ---------------------------------------------------------------------------
// Degree-of-freedom map
// ---------------------------------------------------------------------------

/// Identifier of a field block within a [`DofMap`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct FieldId(pub usize);

/// Block allocator for per-node unknowns of several fields, with optional
/// node tying (shared global indices across fields, e.g. matched
/// solid/poroelastic interface displacements).
#[derive(Clone, Debug)]
pub struct DofMap {
    blocks: Vec<Block>,
    /// slot -> global index (after tying and numbering)
    global: Vec<usize>,
    n_global: usize,
    /// global index -> representative slot (for reverse lookup)
    rep_slot: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Block {
    name: String,
    n_nodes: usize,
    comps: usize,
    offset: usize,
}

/// Builder: declare blocks, then ties, then number.
#[derive(Default)]
pub struct DofMapBuilder {
    blocks: Vec<Block>,
    n_slots: usize,
    ties: Vec<(usize, usize)>,
}

impl DofMapBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_field(&mut self, name: &str, n_nodes: usize, comps: usize) -> FieldId {
        let id = FieldId(self.blocks.len());
        self.blocks.push(Block {
            name: name.to_string(),
            n_nodes,
            comps,
            offset: self.n_slots,
        });
        self.n_slots += n_nodes * comps;
        id
    }

    fn slot(&self, f: FieldId, node: usize, comp: usize) -> usize {
        let b = &self.blocks[f.0];
        debug_assert!(node < b.n_nodes && comp < b.comps);
        b.offset + node * b.comps + comp
    }

    /// Tie all components of `(fa, node_a)` to `(fb, node_b)`; the two fields
    /// must have the same component count.
    pub fn tie_nodes(&mut self, fa: FieldId, node_a: usize, fb: FieldId, node_b: usize) {
        let comps = self.blocks[fa.0].comps;
        assert_eq!(comps, self.blocks[fb.0].comps, "tied fields must match");
        for c in 0..comps {
            self.ties.push((self.slot(fa, node_a, c), self.slot(fb, node_b, c)));
        }
    }

    pub fn build(self) -> DofMap {
        // Union-find over slots.
        let mut parent: Vec<usize> = (0..self.n_slots).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for &(a, b) in &self.ties {
            let ra = find(&mut parent, a);
            let rb = find(&mut parent, b);
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut global = vec![usize::MAX; self.n_slots];
        let mut rep_slot = Vec::new();
        let mut next = 0usize;
        for s in 0..self.n_slots {
            let r = find(&mut parent, s);
            if global[r] == usize::MAX {
                global[r] = next;
                rep_slot.push(r);
                next += 1;
            }
            global[s] = global[r];
        }
        DofMap {
            blocks: self.blocks,
            global,
            n_global: next,
            rep_slot,
        }
    }
}

impl DofMap {
    pub fn n_dofs(&self) -> usize {
        self.n_global
    }

    #[inline]
    pub fn index(&self, f: FieldId, node: usize, comp: usize) -> usize {
        let b = &self.blocks[f.0];
        debug_assert!(node < b.n_nodes && comp < b.comps);
        self.global[b.offset + node * b.comps + comp]
    }

    /// Reverse lookup: representative (field, node, comp) of a global index.
    pub fn locate(&self, g: usize) -> (FieldId, usize, usize) {
        let slot = self.rep_slot[g];
        for (bi, b) in self.blocks.iter().enumerate() {
            if slot >= b.offset && slot < b.offset + b.n_nodes * b.comps {
                let local = slot - b.offset;
                return (FieldId(bi), local / b.comps, local % b.comps);
            }
        }
        unreachable!("slot out of range")
    }

    pub fn field_name(&self, f: FieldId) -> &str {
        &self.blocks[f.0].name
    }

    pub fn field_of_global(&self, g: usize) -> &str {
        let (f, _, _) = self.locate(g);
        self.field_name(f)
    }

    pub fn n_fields(&self) -> usize {
        self.blocks.len()
    }
}

// ---------------------------------------------------------------------------
// Plain-text mesh serialization
// ---------------------------------------------------------------------------
//
// Grammar (line-oriented, `#` starts a comment):
//
//   mesh2d 1
//   nodes <count>
//   <x> <y>                  (count lines)
//   cells <count>
//   <n0> <n1> <n2> <n3>      (count lines, counterclockwise)
//   tags <count>
//   tag <name> <edges>
//   <cell> <local-edge>      (edges lines)
//   end

/// Serialize a mesh in the documented plain-text format.
pub fn write_mesh_text(mesh: &Mesh2D) -> String {
    let mut s = String::new();
    s.push_str("mesh2d 1\n");
    s.push_str(&format!("nodes {}\n", mesh.n_nodes()));
    for p in &mesh.nodes {
        s.push_str(&format!("{:.17e} {:.17e}\n", p.x, p.y));
    }
    s.push_str(&format!("cells {}\n", mesh.n_cells()));
    for c in &mesh.cells {
        s.push_str(&format!("{} {} {} {}\n", c[0], c[1], c[2], c[3]));
    }
    s.push_str(&format!("tags {}\n", mesh.boundary_edges.len()));
    for (tag, edges) in &mesh.boundary_edges {
        s.push_str(&format!("tag {} {}\n", tag, edges.len()));
        for (cell, e) in edges {
            s.push_str(&format!("{cell} {e}\n"));
        }
    }
    s.push_str("end\n");
    s
}

/// Parse the plain-text mesh format. `origin` is used in error messages.
pub fn parse_mesh_text(text: &str, origin: &str) -> Result<Mesh2D> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, message: &str| Error::Parse {
        path: origin.to_string(),
        line,
        message: message.to_string(),
    };
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| err(0, &format!("unexpected end of input, expected {what}")))
    };
    let (ln, header) = next("header")?;
    if header != "mesh2d 1" {
        return Err(err(ln, "expected header 'mesh2d 1'"));
    }
    let (ln, nline) = next("nodes")?;
    let n_nodes: usize = nline
        .strip_prefix("nodes ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(ln, "expected 'nodes <count>'"))?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, l) = next("node coordinates")?;
        let mut it = l.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(ln, "bad node line"))?;
        let y: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(ln, "bad node line"))?;
        nodes.push(Vec2::new(x, y));
    }
    let (ln, cline) = next("cells")?;
    let n_cells: usize = cline
        .strip_prefix("cells ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(ln, "expected 'cells <count>'"))?;
    let mut cells = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let (ln, l) = next("cell connectivity")?;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(|s| s.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(ln, "bad cell line"))?;
        if ids.len() != 4 {
            return Err(err(ln, "cell needs 4 node indices"));
        }
        cells.push([ids[0], ids[1], ids[2], ids[3]]);
    }
    let (ln, tline) = next("tags")?;
    let n_tags: usize = tline
        .strip_prefix("tags ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(ln, "expected 'tags <count>'"))?;
    let mut boundary_edges = BTreeMap::new();
    for _ in 0..n_tags {
        let (ln, l) = next("tag header")?;
        let mut it = l.split_whitespace();
        if it.next() != Some("tag") {
            return Err(err(ln, "expected 'tag <name> <edges>'"));
        }
        let name = it.next().ok_or_else(|| err(ln, "missing tag name"))?;
        let count: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(ln, "missing edge count"))?;
        let mut edges = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, l) = next("tag edge")?;
            let mut it = l.split_whitespace();
            let cell: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err(ln, "bad tag edge line"))?;
            let e: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err(ln, "bad tag edge line"))?;
            edges.push((cell, e));
        }
        boundary_edges.insert(name.to_string(), edges);
    }
    // Rebuild interior faces from connectivity.
    let mut by_edge: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (cid, c) in cells.iter().enumerate() {
        for e in 0..4 {
            let (a, b) = EDGE_NODES[e];
            let key = (c[a].min(c[b]), c[a].max(c[b]));
            by_edge.entry(key).or_default().push((cid, e));
        }
    }
    let interior_faces = by_edge
        .values()
        .filter(|v| v.len() == 2)
        .map(|v| (v[0].0, v[0].1, v[1].0, v[1].1))
        .collect();
    let mesh = Mesh2D {
        nodes,
        cells,
        boundary_edges,
        interior_faces,
    };
    mesh.validate()?;
    Ok(mesh)
}

pub fn write_mesh_file(mesh: &Mesh2D, path: &Path) -> Result<()> {
    std::fs::write(path, write_mesh_text(mesh)).map_err(|e| io_err(path, e))
}

pub fn read_mesh_file(path: &Path) -> Result<Mesh2D> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_mesh_text(&text, &path.display().to_string())
}

// ---------------------------------------------------------------------------
// Field evaluation helpers shared by the assembly modules
// ---------------------------------------------------------------------------

/// Interpolate a 2-component nodal field at reference point given shape values.
#[inline]
pub fn interp_vec2<S: Scalar>(n: &[f64; 4], nodal: &[Vec2<S>; 4]) -> Vec2<S> {
    let mut v = Vec2::<S>::zero();
    for i in 0..4 {
        v += nodal[i].scale(S::from_f64(n[i]));
    }
    v
}

/// Spatial gradient tensor of a 2-component nodal field: sum_i u_i (x) grad N_i.
#[inline]
pub fn grad_vec2<S: Scalar>(dn: &[Vec2<f64>; 4], nodal: &[Vec2<S>; 4]) -> Mat2<S> {
    let mut g = Mat2::<S>::zero();
    for i in 0..4 {
        g.a[0][0] += nodal[i].x * S::from_f64(dn[i].x);
        g.a[0][1] += nodal[i].x * S::from_f64(dn[i].y);
        g.a[1][0] += nodal[i].y * S::from_f64(dn[i].x);
        g.a[1][1] += nodal[i].y * S::from_f64(dn[i].y);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_tags() -> RectTags {
        RectTags::new("bottom", "right", "top", "left")
    }

    #[test]
    fn unit_square_1x1() {
        let m = build_structured_mesh([0.0, 0.0, 1.0, 1.0], 1, 1, &unit_tags()).unwrap();
        assert_eq!(m.n_cells(), 1);
        assert_eq!(m.n_nodes(), 4);
        assert_eq!(m.boundary_edges.len(), 4);
        assert!(m.interior_faces.is_empty());
    }

    #[test]
    fn unit_square_2x2() {
        let m = build_structured_mesh([0.0, 0.0, 1.0, 1.0], 2, 2, &unit_tags()).unwrap();
        assert_eq!(m.n_cells(), 4);
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.interior_faces.len(), 4);
    }

    #[test]
    fn strip_area_recovered() {
        // 10mm x 0.1mm strip, 100 x 3 cells.
        let m = build_structured_mesh([0.0, 0.0, 10.0, 0.1], 100, 3, &unit_tags()).unwrap();
        assert_eq!(m.n_cells(), 300);
        let area = m.total_area();
        assert!((area - 1.0).abs() < 1e-12, "area = {area}");
    }

    #[test]
    fn degenerate_region_rejected() {
        assert!(build_structured_mesh([0.0, 0.0, 0.0, 1.0], 1, 1, &unit_tags()).is_err());
        assert!(build_structured_mesh([0.0, 0.0, 1.0, 1.0], 0, 1, &unit_tags()).is_err());
    }

    #[test]
    fn shape_center_and_nodes() {
        let (n, _) = shape_eval(0.0, 0.0);
        for v in n {
            assert!((v - 0.25).abs() < 1e-15);
        }
        let (n, _) = shape_eval(-1.0, -1.0);
        assert!((n[0] - 1.0).abs() < 1e-15);
        assert!(n[1].abs() < 1e-15 && n[2].abs() < 1e-15 && n[3].abs() < 1e-15);
    }

    #[test]
    fn isoparametric_identity_map() {
        // Reference-aligned square of side 2 centered at the origin.
        let xs = [
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, -1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(-1.0, 1.0),
        ];
        let (x, _, det) = isoparametric_map(&xs, 0.3, -0.2).unwrap();
        assert!((x.x - 0.3).abs() < 1e-15 && (x.y + 0.2).abs() < 1e-15);
        assert!((det - 1.0).abs() < 1e-15);
    }

    #[test]
    fn isoparametric_scaled_square() {
        let h = 0.25;
        let xs = [
            Vec2::new(0.0, 0.0),
            Vec2::new(h, 0.0),
            Vec2::new(h, h),
            Vec2::new(0.0, h),
        ];
        for &(xi, eta) in &[(0.0, 0.0), (0.5, -0.7), (-1.0, 1.0)] {
            let (_, _, det) = isoparametric_map(&xs, xi, eta).unwrap();
            assert!((det - h * h / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sheared_parallelogram_det_is_quarter_area() {
        let xs = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(3.0, 1.0),
            Vec2::new(1.0, 1.0),
        ];
        // Polygon area by the shoelace formula (independent oracle).
        let mut area = 0.0;
        for i in 0..4 {
            let a = xs[i];
            let b = xs[(i + 1) % 4];
            area += a.x * b.y - b.x * a.y;
        }
        area *= 0.5;
        for &(xi, eta) in &[(0.0, 0.0), (0.9, -0.3), (-0.5, 0.8)] {
            let (_, _, det) = isoparametric_map(&xs, xi, eta).unwrap();
            assert!((det - area / 4.0).abs() < 1e-13, "det {det} area/4 {}", area / 4.0);
        }
    }

    #[test]
    fn inverted_cell_detected() {
        let xs = [
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ];
        assert!(isoparametric_map(&xs, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn partition_of_unity(xi in -1.0f64..1.0, eta in -1.0f64..1.0) {
            let (n, dn) = shape_eval(xi, eta);
            let sum: f64 = n.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-14);
            let gx: f64 = dn.iter().map(|g| g.x).sum();
            let gy: f64 = dn.iter().map(|g| g.y).sum();
            prop_assert!(gx.abs() < 1e-14 && gy.abs() < 1e-14);
        }
    }

    #[test]
    fn dofmap_roundtrip_and_ties() {
        let mut b = DofMapBuilder::new();
        let fu = b.add_field("solid_u", 3, 2);
        let fp = b.add_field("poro_u", 4, 2);
        b.tie_nodes(fu, 2, fp, 0);
        let map = b.build();
        // 3*2 + 4*2 slots, minus 2 tied
        assert_eq!(map.n_dofs(), 12);
        assert_eq!(map.index(fu, 2, 0), map.index(fp, 0, 0));
        assert_eq!(map.index(fu, 2, 1), map.index(fp, 0, 1));
        // Round trip over all global indices.
        for g in 0..map.n_dofs() {
            let (f, n, c) = map.locate(g);
            assert_eq!(map.index(f, n, c), g);
        }
    }

    #[test]
    fn mesh_text_roundtrip() {
        let m = build_structured_mesh([0.0, 0.0, 2.0, 1.0], 3, 2, &unit_tags()).unwrap();
        let text = write_mesh_text(&m);
        let m2 = parse_mesh_text(&text, "test").unwrap();
        assert_eq!(m.nodes.len(), m2.nodes.len());
        assert_eq!(m.cells, m2.cells);
        assert_eq!(m.boundary_edges, m2.boundary_edges);
        for (a, b) in m.nodes.iter().zip(&m2.nodes) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
    }

    #[test]
    fn region_area_matches_analytic() {
        for (rect, nx, ny) in [
            ([0.0, 0.0, 1.0, 1.0], 7, 5),
            ([-2.0, 1.0, 3.0, 4.0], 4, 9),
        ] {
            let m = build_structured_mesh(rect, nx, ny, &unit_tags()).unwrap();
            let exact = (rect[2] - rect[0]) * (rect[3] - rect[1]);
            assert!((m.total_area() - exact).abs() / exact < 1e-12);
        }
    }
}
