//! Cut-finite-element geometry for the fluid background mesh: intersect
//! axis-aligned background cells with the current solid/poroelastic boundary
//! polylines, build volume quadrature on the physical (fluid) polygon pieces
//! and line quadrature on the interface segments, select ghost faces and
//! assemble the ghost-penalty stabilization, and filter tiny fluid islands.
//!
//! Conventions: embedded body boundaries are closed polylines oriented with
//! the fluid on the LEFT of the walking direction (bodies are walked
//! clockwise). Interface normals point out of the fluid.

use crate::error::{Error, Result};
use crate::math::{Scalar, Vec2};
use crate::mesh::Mesh2D;

/// Closed boundary polyline of an embedded body in its current configuration.
#[derive(Clone, Debug)]
pub struct Polyline {
    /// Body identifier assigned by the caller (index into the scenario's
    /// embedded-interface list).
    pub body: usize,
    /// Vertex positions; segment k runs points[k] -> points[(k+1) % len].
    pub points: Vec<Vec2<f64>>,
    /// Mesh node ids per vertex, aligned with `points` (the node at the
    /// segment start). Trace evaluation interpolates between consecutive ids.
    pub nodes: Vec<usize>,
}

impl Polyline {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn segment(&self, k: usize) -> (Vec2<f64>, Vec2<f64>) {
        (self.points[k], self.points[(k + 1) % self.len()])
    }

    #[inline]
    pub fn segment_nodes(&self, k: usize) -> (usize, usize) {
        (self.nodes[k], self.nodes[(k + 1) % self.len()])
    }

    /// Ray-casting point-in-body test (loop orientation does not matter).
    pub fn contains(&self, p: Vec2<f64>) -> bool {
        let mut inside = false;
        for k in 0..self.len() {
            let (a, b) = self.segment(k);
            if (a.y > p.y) != (b.y > p.y) {
                let t = (p.y - a.y) / (b.y - a.y);
                let x = a.x + t * (b.x - a.x);
                if x > p.x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Closest point on the polyline: returns (segment, t, distance).
    pub fn closest(&self, p: Vec2<f64>) -> (usize, f64, f64) {
        let mut best = (0usize, 0.0f64, f64::INFINITY);
        for k in 0..self.len() {
            let (a, b) = self.segment(k);
            let d = b - a;
            let len2 = d.norm_sq();
            let t = if len2 > 0.0 {
                ((p - a).dot(d) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = a.lerp(b, t);
            let dist = p.dist(q);
            if dist < best.2 {
                best = (k, t, dist);
            }
        }
        best
    }
}

/// Extract the closed boundary loop of a mesh in its current configuration,
/// oriented clockwise around the body so the exterior (fluid) lies on the
/// left of the walking direction.
pub fn boundary_polyline(
    mesh: &Mesh2D,
    body: usize,
    disp: impl Fn(usize) -> Vec2<f64>,
) -> Result<Polyline> {
    // Directed boundary edges in cell-local (counterclockwise) orientation.
    let edges = mesh.all_boundary_edges();
    let mut next: std::collections::BTreeMap<usize, usize> = Default::default();
    for &(cell, e) in &edges {
        let (a, b) = mesh.edge_nodes(cell, e);
        if next.insert(a, b).is_some() {
            return Err(Error::DegenerateGeometry(format!(
                "boundary is not a single loop (node {a} has two outgoing edges)"
            )));
        }
    }
    let start = *next
        .keys()
        .next()
        .ok_or_else(|| Error::DegenerateGeometry("mesh has no boundary".into()))?;
    let mut loop_nodes = vec![start];
    let mut cur = next[&start];
    while cur != start {
        loop_nodes.push(cur);
        cur = *next
            .get(&cur)
            .ok_or_else(|| Error::DegenerateGeometry("open boundary loop".into()))?;
        if loop_nodes.len() > edges.len() + 1 {
            return Err(Error::DegenerateGeometry(
                "boundary walk does not close".into(),
            ));
        }
    }
    if loop_nodes.len() != edges.len() {
        return Err(Error::DegenerateGeometry(
            "boundary has more than one loop".into(),
        ));
    }
    // Counterclockwise around the body -> reverse for fluid-on-left.
    loop_nodes.reverse();
    let points = loop_nodes.iter().map(|&n| mesh.nodes[n] + disp(n)).collect();
    Ok(Polyline {
        body,
        points,
        nodes: loop_nodes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellStatus {
    Full,
    Cut,
    Void,
}

/// One fluid polygon piece of a cut cell.
#[derive(Clone, Debug)]
pub struct Piece {
    /// Counterclockwise simple polygon.
    pub vertices: Vec<Vec2<f64>>,
    pub area: f64,
    /// Volume quadrature (points, weights); the weights sum to `area`.
    pub quad: Vec<(Vec2<f64>, f64)>,
    /// Interface sub-segments bounding this piece.
    pub segments: Vec<InterfaceSegment>,
    /// Connected-component id, filled by island filtering.
    pub component: usize,
    /// False once the piece was voided as an island.
    pub live: bool,
}

/// Interface sub-segment produced by clipping, with trace provenance.
#[derive(Clone, Debug)]
pub struct InterfaceSegment {
    pub a: Vec2<f64>,
    pub b: Vec2<f64>,
    /// Unit normal pointing out of the fluid.
    pub normal: Vec2<f64>,
    pub body: usize,
    /// Mesh nodes of the source boundary segment, in polyline direction.
    pub node_a: usize,
    pub node_b: usize,
    /// Parameter range along (node_a -> node_b) covered by [a, b].
    pub t0: f64,
    pub t1: f64,
    /// False once reassigned to the contact side by island filtering.
    pub live: bool,
}

impl InterfaceSegment {
    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }
    /// Trace parameter at a fraction s in [0,1] along the sub-segment.
    pub fn t_at(&self, s: f64) -> f64 {
        self.t0 + s * (self.t1 - self.t0)
    }
    pub fn point_at(&self, s: f64) -> Vec2<f64> {
        self.a.lerp(self.b, s)
    }
}

/// Cut data of one background cell.
#[derive(Clone, Debug)]
pub struct CutCellData {
    pub cell: usize,
    pub status: CellStatus,
    pub pieces: Vec<Piece>,
}

impl CutCellData {
    pub fn fluid_area(&self) -> f64 {
        self.pieces.iter().filter(|p| p.live).map(|p| p.area).sum()
    }

    pub fn live_segments(&self) -> impl Iterator<Item = &InterfaceSegment> {
        self.pieces
            .iter()
            .filter(|p| p.live)
            .flat_map(|p| p.segments.iter())
            .filter(|s| s.live)
    }
}

/// Shoelace area of a simple polygon (positive for counterclockwise).
pub fn polygon_area(poly: &[Vec2<f64>]) -> f64 {
    let n = poly.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    0.5 * a
}

/// Degree-2 quadrature on a simple counterclockwise polygon by ear-clip
/// triangulation with the 3-point edge-midpoint rule per triangle.
/// Degenerate polygons (area below 1e-14 of the squared diameter) yield an
/// empty rule.
pub fn cut_quadrature(poly: &[Vec2<f64>]) -> Vec<(Vec2<f64>, f64)> {
    let mut rule = Vec::new();
    let diam2 = polygon_diameter_sq(poly);
    if poly.len() < 3 || polygon_area(poly).abs() < 1e-14 * diam2.max(1e-300) {
        return rule;
    }
    for (a, b, c) in triangulate(poly) {
        let area = 0.5 * ((b - a).x * (c - a).y - (c - a).x * (b - a).y);
        if area <= 0.0 {
            continue;
        }
        let w = area / 3.0;
        rule.push((a.lerp(b, 0.5), w));
        rule.push((b.lerp(c, 0.5), w));
        rule.push((c.lerp(a, 0.5), w));
    }
    rule
}

fn polygon_diameter_sq(poly: &[Vec2<f64>]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..poly.len() {
        for j in (i + 1)..poly.len() {
            d = d.max((poly[i] - poly[j]).norm_sq());
        }
    }
    d
}

/// Ear-clipping triangulation of a simple counterclockwise polygon.
fn triangulate(poly: &[Vec2<f64>]) -> Vec<(Vec2<f64>, Vec2<f64>, Vec2<f64>)> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::new();
    let cross =
        |o: Vec2<f64>, a: Vec2<f64>, b: Vec2<f64>| (a - o).x * (b - o).y - (b - o).x * (a - o).y;
    let mut guard = 0;
    while idx.len() > 3 && guard < 10_000 {
        guard += 1;
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let (ip, ic, inx) = (idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]);
            let (a, b, c) = (poly[ip], poly[ic], poly[inx]);
            if cross(a, b, c) <= 0.0 {
                continue;
            }
            let mut ok = true;
            for &j in &idx {
                if j == ip || j == ic || j == inx {
                    continue;
                }
                let p = poly[j];
                if cross(a, b, p) > 0.0 && cross(b, c, p) > 0.0 && cross(c, a, p) > 0.0 {
                    ok = false;
                    break;
                }
            }
            if ok {
                tris.push((a, b, c));
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            // Fall back to a fan from the first remaining vertex.
            let p0 = poly[idx[0]];
            for w in 1..idx.len() - 1 {
                tris.push((p0, poly[idx[w]], poly[idx[w + 1]]));
            }
            return tris;
        }
    }
    if idx.len() == 3 {
        tris.push((poly[idx[0]], poly[idx[1]], poly[idx[2]]));
    }
    tris
}

// ---------------------------------------------------------------------------
// Cell intersection
// ---------------------------------------------------------------------------

/// A path vertex inside a cell, with provenance on its source polyline.
#[derive(Clone, Copy, Debug)]
struct PathVertex {
    pos: Vec2<f64>,
    /// Polyline segment index and parameter along it.
    seg: usize,
    t: f64,
}

/// A maximal run of a body polyline clipped to the cell rectangle.
#[derive(Clone, Debug)]
struct Chain {
    body_idx: usize,
    verts: Vec<PathVertex>,
}

/// Liang-Barsky clip of segment [p, q] to a rect; returns the parameter
/// interval of the inside portion.
fn clip_segment_to_rect(p: Vec2<f64>, q: Vec2<f64>, rect: &[f64; 4]) -> Option<(f64, f64)> {
    let [x0, y0, x1, y1] = *rect;
    let d = q - p;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (num, den) in [
        (p.x - x0, -d.x),
        (x1 - p.x, d.x),
        (p.y - y0, -d.y),
        (y1 - p.y, d.y),
    ] {
        if den.abs() < 1e-300 {
            if num < 0.0 {
                return None;
            }
            continue;
        }
        let t = num / den;
        if den < 0.0 {
            t0 = t0.max(t);
        } else {
            t1 = t1.min(t);
        }
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}

/// Intersect a background cell (axis-aligned rectangle) with the embedded
/// boundary polylines. Returns the fluid-side polygon pieces with quadrature
/// and interface segments. `eps_area` is the void threshold as a fraction of
/// the cell area.
pub fn intersect_cell(
    cell_id: usize,
    rect: [f64; 4],
    polylines: &[Polyline],
    eps_area: f64,
) -> Result<CutCellData> {
    let [x0, y0, x1, y1] = rect;
    let cell_area = (x1 - x0) * (y1 - y0);
    let diag = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let eps = 1e-10 * diag;

    // Collect chains per polyline.
    let mut chains: Vec<Chain> = Vec::new();
    for (pli, pl) in polylines.iter().enumerate() {
        let n = pl.len();
        let mut runs: Vec<Vec<PathVertex>> = Vec::new();
        let mut current: Vec<PathVertex> = Vec::new();
        let mut prev_t1 = f64::NAN;
        for k in 0..n {
            let (a, b) = pl.segment(k);
            match clip_segment_to_rect(a, b, &rect) {
                Some((t0, t1)) if t1 - t0 > 1e-14 => {
                    let pa = a.lerp(b, t0);
                    let pb = a.lerp(b, t1);
                    let continues = !current.is_empty() && t0 <= 1e-12 && prev_t1 >= 1.0 - 1e-12;
                    if !continues {
                        if current.len() >= 2 {
                            runs.push(std::mem::take(&mut current));
                        } else {
                            current.clear();
                        }
                        current.push(PathVertex {
                            pos: pa,
                            seg: k,
                            t: t0,
                        });
                    }
                    current.push(PathVertex {
                        pos: pb,
                        seg: k,
                        t: t1,
                    });
                    prev_t1 = t1;
                }
                _ => {
                    if current.len() >= 2 {
                        runs.push(std::mem::take(&mut current));
                    } else {
                        current.clear();
                    }
                    prev_t1 = f64::NAN;
                }
            }
        }
        if current.len() >= 2 {
            // The final run may wrap around into the first one.
            let wraps = !runs.is_empty()
                && prev_t1 >= 1.0 - 1e-12
                && runs[0][0].seg == 0
                && runs[0][0].t <= 1e-12
                && current.last().unwrap().pos.dist(runs[0][0].pos) < eps;
            if wraps {
                let first = runs.remove(0);
                current.extend(first.into_iter().skip(1));
            }
            runs.push(current);
        }
        for verts in runs {
            chains.push(Chain {
                body_idx: pli,
                verts,
            });
        }
    }

    let centroid = Vec2::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let inside_any = |p: Vec2<f64>| polylines.iter().any(|pl| pl.contains(p));

    if chains.is_empty() {
        return Ok(if inside_any(centroid) {
            CutCellData {
                cell: cell_id,
                status: CellStatus::Void,
                pieces: vec![],
            }
        } else {
            let verts = vec![
                Vec2::new(x0, y0),
                Vec2::new(x1, y0),
                Vec2::new(x1, y1),
                Vec2::new(x0, y1),
            ];
            CutCellData {
                cell: cell_id,
                status: CellStatus::Full,
                pieces: vec![Piece {
                    area: cell_area,
                    quad: vec![],
                    vertices: verts,
                    segments: vec![],
                    component: usize::MAX,
                    live: true,
                }],
            }
        });
    }

    if chains.len() * 2 > 8 {
        return Err(Error::UnsupportedCut {
            cell: cell_id,
            crossings: chains.len() * 2,
        });
    }

    // Start from the full cell and clip by each chain in turn.
    #[derive(Clone, Debug)]
    struct WorkPiece {
        verts: Vec<Vec2<f64>>,
        segs: Vec<InterfaceSegment>,
    }
    let mut pieces = vec![WorkPiece {
        verts: vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ],
        segs: vec![],
    }];

    for chain in &chains {
        let pl = &polylines[chain.body_idx];
        let mut next_pieces = Vec::new();
        for piece in pieces.drain(..) {
            match split_piece(&piece.verts, chain, eps) {
                SplitOutcome::NoCrossing => {
                    // Entirely on one side: keep iff an interior point lies
                    // outside the chain's body.
                    let rep = interior_point(&piece.verts);
                    if !pl.contains(rep) {
                        next_pieces.push(piece);
                    }
                }
                SplitOutcome::Split { left, path } => {
                    if left.len() < 3 {
                        continue;
                    }
                    let mut segs = piece.segs.clone();
                    for w in path.windows(2) {
                        let (va, vb) = (w[0], w[1]);
                        if va.pos.dist(vb.pos) < eps {
                            continue;
                        }
                        let dir = (vb.pos - va.pos).normalized().unwrap();
                        // Right of the walking direction = out of the fluid.
                        let normal = Vec2::new(dir.y, -dir.x);
                        let seg_idx = va.seg;
                        let (na, nb) = pl.segment_nodes(seg_idx);
                        let (t0, t1) = if vb.seg == seg_idx {
                            (va.t, vb.t)
                        } else {
                            (va.t, 1.0)
                        };
                        segs.push(InterfaceSegment {
                            a: va.pos,
                            b: vb.pos,
                            normal,
                            body: pl.body,
                            node_a: na,
                            node_b: nb,
                            t0,
                            t1,
                            live: true,
                        });
                    }
                    next_pieces.push(WorkPiece { verts: left, segs });
                }
                SplitOutcome::Unsupported(crossings) => {
                    return Err(Error::UnsupportedCut {
                        cell: cell_id,
                        crossings,
                    });
                }
            }
        }
        pieces = next_pieces;
    }

    // Drop sub-threshold slivers, build quadrature.
    let mut out_pieces = Vec::new();
    for p in pieces {
        let area = polygon_area(&p.verts);
        if area < eps_area.max(1e-14) * cell_area {
            continue;
        }
        let quad = cut_quadrature(&p.verts);
        out_pieces.push(Piece {
            vertices: p.verts,
            area,
            quad,
            segments: p.segs,
            component: usize::MAX,
            live: true,
        });
    }
    let total_area: f64 = out_pieces.iter().map(|p| p.area).sum();
    let status = if out_pieces.is_empty() {
        CellStatus::Void
    } else if (total_area - cell_area).abs() < 1e-9 * cell_area
        && out_pieces.iter().all(|p| p.segments.is_empty())
    {
        CellStatus::Full
    } else {
        CellStatus::Cut
    };
    Ok(CutCellData {
        cell: cell_id,
        status,
        pieces: out_pieces,
    })
}

/// A point strictly inside a simple counterclockwise polygon.
fn interior_point(poly: &[Vec2<f64>]) -> Vec2<f64> {
    for (a, b, c) in triangulate(poly) {
        let area = 0.5 * ((b - a).x * (c - a).y - (c - a).x * (b - a).y);
        if area > 0.0 {
            return Vec2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
        }
    }
    let n = poly.len() as f64;
    let mut s = Vec2::zero();
    for p in poly {
        s += *p;
    }
    Vec2::new(s.x / n, s.y / n)
}

enum SplitOutcome {
    NoCrossing,
    Split {
        left: Vec<Vec2<f64>>,
        /// Path vertices actually used for the cut (entry ... exit).
        path: Vec<PathVertex>,
    },
    Unsupported(usize),
}

/// Split a simple counterclockwise polygon by a chain crossing it once
/// (one entry, one exit); keeps the piece left of the chain direction.
fn split_piece(poly: &[Vec2<f64>], chain: &Chain, eps: f64) -> SplitOutcome {
    let n = poly.len();
    #[derive(Clone, Copy)]
    struct Crossing {
        pos: Vec2<f64>,
        /// Chain coordinate (sub-segment index + fraction).
        s: f64,
        /// Polygon boundary coordinate (edge index + fraction).
        b: f64,
        /// Provenance on the source polyline.
        seg: usize,
        t: f64,
    }
    let mut crossings: Vec<Crossing> = Vec::new();
    for ci in 0..chain.verts.len() - 1 {
        let ca = chain.verts[ci];
        let cb = chain.verts[ci + 1];
        let d1 = cb.pos - ca.pos;
        for ei in 0..n {
            let pa = poly[ei];
            let pb = poly[(ei + 1) % n];
            let d2 = pb - pa;
            let denom = d1.x * d2.y - d1.y * d2.x;
            if denom.abs() < 1e-300 {
                continue;
            }
            let r = pa - ca.pos;
            let s = (r.x * d2.y - r.y * d2.x) / denom;
            let t = (r.x * d1.y - r.y * d1.x) / denom;
            let tol_s = eps / d1.norm().max(1e-300);
            let tol_t = eps / d2.norm().max(1e-300);
            if s >= -tol_s && s <= 1.0 + tol_s && t >= -tol_t && t <= 1.0 + tol_t {
                let sc = s.clamp(0.0, 1.0);
                let tc = t.clamp(0.0, 1.0);
                let pos = ca.pos.lerp(cb.pos, sc);
                let (src_seg, src_t) = if cb.seg == ca.seg {
                    (ca.seg, ca.t + sc * (cb.t - ca.t))
                } else if sc < 1.0 {
                    (ca.seg, ca.t + sc * (1.0 - ca.t))
                } else {
                    (cb.seg, cb.t)
                };
                crossings.push(Crossing {
                    pos,
                    s: ci as f64 + sc,
                    b: ei as f64 + tc,
                    seg: src_seg,
                    t: src_t,
                });
            }
        }
    }
    crossings.sort_by(|a, b| a.s.partial_cmp(&b.s).unwrap());
    crossings.dedup_by(|a, b| a.pos.dist(b.pos) < eps);
    if crossings.is_empty() {
        return SplitOutcome::NoCrossing;
    }
    if crossings.len() != 2 {
        return SplitOutcome::Unsupported(crossings.len());
    }
    let (entry, exit) = (crossings[0], crossings[1]);

    // Path from entry to exit: entry point, interior chain vertices, exit point.
    let mut path = vec![PathVertex {
        pos: entry.pos,
        seg: entry.seg,
        t: entry.t,
    }];
    for (ci, v) in chain.verts.iter().enumerate() {
        let sc = ci as f64;
        if sc > entry.s && sc < exit.s {
            path.push(*v);
        }
    }
    path.push(PathVertex {
        pos: exit.pos,
        seg: exit.seg,
        t: exit.t,
    });

    // Left piece: the path, then the polygon boundary counterclockwise from
    // the exit around to the entry.
    let mut left: Vec<Vec2<f64>> = path.iter().map(|v| v.pos).collect();
    let start_edge = exit.b.floor() as usize % n;
    let end_edge = entry.b.floor() as usize % n;
    let mut ei = start_edge;
    let mut steps = 0;
    loop {
        let ahead_on_same_edge = ei == end_edge
            && (start_edge != end_edge || entry.b >= exit.b || steps > 0);
        if ahead_on_same_edge {
            break;
        }
        let vtx = poly[(ei + 1) % n];
        if vtx.dist(entry.pos) > eps && vtx.dist(exit.pos) > eps {
            left.push(vtx);
        }
        ei = (ei + 1) % n;
        steps += 1;
        if steps > n + 1 {
            break;
        }
    }
    if left.len() >= 2 && left.first().unwrap().dist(*left.last().unwrap()) < eps {
        left.pop();
    }
    if left.len() < 3 || polygon_area(&left) <= 0.0 {
        return SplitOutcome::Split { left: vec![], path };
    }
    SplitOutcome::Split { left, path }
}

// ---------------------------------------------------------------------------
// Ghost faces and ghost penalty
// ---------------------------------------------------------------------------

/// Interior background faces adjacent to at least one cut cell, both
/// neighbors not void.
#[derive(Clone, Debug, Default)]
pub struct GhostFaceSet {
    /// (cell_a, local_edge_a, cell_b, local_edge_b, face length, unit normal)
    pub faces: Vec<(usize, usize, usize, usize, f64, Vec2<f64>)>,
}

pub fn select_ghost_faces(mesh: &Mesh2D, status: &[CellStatus]) -> GhostFaceSet {
    let mut set = GhostFaceSet::default();
    for &(ca, ea, cb, eb) in &mesh.interior_faces {
        let (sa, sb) = (status[ca], status[cb]);
        if sa == CellStatus::Void || sb == CellStatus::Void {
            continue;
        }
        if sa != CellStatus::Cut && sb != CellStatus::Cut {
            continue;
        }
        let (na, nb) = mesh.edge_nodes(ca, ea);
        let (pa, pb) = (mesh.nodes[na], mesh.nodes[nb]);
        let d = pb - pa;
        let len = d.norm();
        let normal = Vec2::new(d.y / len, -d.x / len);
        set.faces.push((ca, ea, cb, eb, len, normal));
    }
    set
}

/// Ghost-penalty scalings for first-derivative jumps on bilinear elements:
/// s_v = (mu + rho h^2 / dt) h, s_p = h^3 / (mu + rho h^2 / dt).
pub fn ghost_scalings(mu: f64, rho: f64, dt: f64, h: f64) -> (f64, f64) {
    let m = mu + rho * h * h / dt;
    (m * h, h * h * h / m)
}

/// Ghost-penalty face kernel: accumulates
/// gamma_v s_v <[[dv/dn]], [[d(delta v)/dn]]> + gamma_p s_p (pressure analog)
/// into the local residual. Rows: cell_a v (0..8), cell_a p (8..12),
/// cell_b v (12..20), cell_b p (20..24); shared face nodes appear twice and
/// the caller maps to global dofs.
#[allow(clippy::too_many_arguments)]
pub fn ghost_penalty_face<S: Scalar>(
    coords_a: &[Vec2<f64>; 4],
    coords_b: &[Vec2<f64>; 4],
    v_a: &[Vec2<S>; 4],
    p_a: &[S; 4],
    v_b: &[Vec2<S>; 4],
    p_b: &[S; 4],
    face: (Vec2<f64>, Vec2<f64>, Vec2<f64>),
    gamma_v: f64,
    gamma_p: f64,
    s_v: f64,
    s_p: f64,
    resid: &mut [S; 24],
) {
    let (fa, fb, normal) = face;
    let half_len = 0.5 * fa.dist(fb);
    let (gp, gw) = crate::math::gauss_1d(2);
    for (q, &xi) in gp.iter().enumerate() {
        let w = gw[q] * half_len;
        let x = fa.lerp(fb, 0.5 * (xi + 1.0));
        let grads_a = cell_gradients(coords_a, x);
        let grads_b = cell_gradients(coords_b, x);
        let mut jump_vx = S::from_f64(0.0);
        let mut jump_vy = S::from_f64(0.0);
        let mut jump_p = S::from_f64(0.0);
        for i in 0..4 {
            let da = grads_a[i].dot(normal);
            let db = grads_b[i].dot(normal);
            jump_vx += v_a[i].x * da - v_b[i].x * db;
            jump_vy += v_a[i].y * da - v_b[i].y * db;
            jump_p += p_a[i] * da - p_b[i] * db;
        }
        let cv = w * gamma_v * s_v;
        let cp = w * gamma_p * s_p;
        for i in 0..4 {
            let da = grads_a[i].dot(normal);
            let db = grads_b[i].dot(normal);
            resid[2 * i] += jump_vx * (da * cv);
            resid[2 * i + 1] += jump_vy * (da * cv);
            resid[8 + i] += jump_p * (da * cp);
            resid[12 + 2 * i] -= jump_vx * (db * cv);
            resid[12 + 2 * i + 1] -= jump_vy * (db * cv);
            resid[20 + i] -= jump_p * (db * cp);
        }
    }
}

/// Physical shape gradients of an axis-aligned rectangular cell's bilinear
/// basis evaluated at a physical point (valid outside the cell as the
/// polynomial extension).
pub fn cell_gradients(coords: &[Vec2<f64>; 4], x: Vec2<f64>) -> [Vec2<f64>; 4] {
    let (xi, eta) = crate::mesh::rect_inverse_map(coords, x);
    let (_, dn) = crate::mesh::shape_eval(xi, eta);
    let jac = crate::math::Mat2::new(
        0.5 * (coords[2].x - coords[0].x),
        0.0,
        0.0,
        0.5 * (coords[2].y - coords[0].y),
    );
    crate::mesh::physical_gradients(&jac, &dn)
}

// ---------------------------------------------------------------------------
// Island filtering
// ---------------------------------------------------------------------------

/// Connected-component filtering of the fluid pieces. Components with total
/// area below `threshold_frac` of one (average) background cell area are
/// voided; their interface segments are flagged `live = false` so the
/// interface bookkeeping reassigns them to the contact side.
pub fn filter_islands(mesh: &Mesh2D, data: &mut [CutCellData], threshold_frac: f64) {
    let mut ids: Vec<(usize, usize)> = Vec::new();
    for (c, d) in data.iter().enumerate() {
        for p in 0..d.pieces.len() {
            ids.push((c, p));
        }
    }
    if ids.is_empty() {
        return;
    }
    let index_of = |ids: &[(usize, usize)], key: (usize, usize)| -> usize {
        ids.binary_search(&key).unwrap()
    };
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    // Pieces of neighboring cells connect if their boundaries overlap on the
    // shared face line.
    for &(ca, ea, cb, _eb) in &mesh.interior_faces {
        let (na, nb) = mesh.edge_nodes(ca, ea);
        let (fa, fb) = (mesh.nodes[na], mesh.nodes[nb]);
        let horizontal = (fa.y - fb.y).abs() < (fa.x - fb.x).abs();
        let tol = 1e-9 * fa.dist(fb).max(1e-300);
        let lo = if horizontal { fa.x.min(fb.x) } else { fa.y.min(fb.y) };
        let hi = if horizontal { fa.x.max(fb.x) } else { fa.y.max(fb.y) };
        let level = if horizontal { fa.y } else { fa.x };
        let piece_intervals = |d: &CutCellData| -> Vec<(usize, f64, f64)> {
            let mut out = Vec::new();
            for (pi, p) in d.pieces.iter().enumerate() {
                let n = p.vertices.len();
                let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
                for i in 0..n {
                    let va = p.vertices[i];
                    let vb = p.vertices[(i + 1) % n];
                    let on = |v: Vec2<f64>| {
                        let c = if horizontal { v.y } else { v.x };
                        (c - level).abs() < tol.max(1e-12 * level.abs())
                    };
                    if on(va) && on(vb) {
                        let (c0, c1) = if horizontal { (va.x, vb.x) } else { (va.y, vb.y) };
                        a = a.min(c0.min(c1)).max(lo);
                        b = b.max(c0.max(c1)).min(hi);
                    }
                }
                if b > a {
                    out.push((pi, a, b));
                }
            }
            out
        };
        let ia = piece_intervals(&data[ca]);
        let ib = piece_intervals(&data[cb]);
        for &(pa, a0, a1) in &ia {
            for &(pb, b0, b1) in &ib {
                let overlap = a1.min(b1) - a0.max(b0);
                if overlap > tol {
                    let ka = index_of(&ids, (ca, pa));
                    let kb = index_of(&ids, (cb, pb));
                    let ra = find(&mut parent, ka);
                    let rb = find(&mut parent, kb);
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
    }
    let mut areas: std::collections::BTreeMap<usize, f64> = Default::default();
    for (k, &(c, p)) in ids.iter().enumerate() {
        let r = find(&mut parent, k);
        *areas.entry(r).or_insert(0.0) += data[c].pieces[p].area;
    }
    let avg_cell_area = mesh.total_area() / mesh.n_cells() as f64;
    let threshold = threshold_frac * avg_cell_area;
    for (k, &(c, p)) in ids.iter().enumerate() {
        let r = find(&mut parent, k);
        let piece = &mut data[c].pieces[p];
        piece.component = r;
        if areas[&r] < threshold {
            piece.live = false;
            for s in &mut piece.segments {
                s.live = false;
            }
        }
    }
    for d in data.iter_mut() {
        if d.status != CellStatus::Void && !d.pieces.is_empty() && d.pieces.iter().all(|p| !p.live)
        {
            d.status = CellStatus::Void;
        }
    }
}

/// Plain-text polygon-soup dump of the cut geometry for external viewers:
/// one `poly` block per live piece plus its live interface segments.
pub fn dump_cut_geometry(data: &[CutCellData]) -> String {
    let mut s = String::from("cutgeometry 1\n");
    for d in data {
        for p in &d.pieces {
            if !p.live {
                continue;
            }
            s.push_str(&format!("poly cell {} n {}\n", d.cell, p.vertices.len()));
            for v in &p.vertices {
                s.push_str(&format!("{:.17e} {:.17e}\n", v.x, v.y));
            }
            for seg in &p.segments {
                if seg.live {
                    s.push_str(&format!(
                        "segment body {} {:.17e} {:.17e} {:.17e} {:.17e} normal {:.17e} {:.17e}\n",
                        seg.body, seg.a.x, seg.a.y, seg.b.x, seg.b.y, seg.normal.x, seg.normal.y
                    ));
                }
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Body occupying the half plane right of `x` (clockwise loop so the
    /// fluid/exterior is on the left of the walk).
    fn halfplane_body_right_of(x: f64) -> Polyline {
        let pts = [
            Vec2::new(x, -10.0),
            Vec2::new(x, 10.0),
            Vec2::new(20.0, 10.0),
            Vec2::new(20.0, -10.0),
        ];
        Polyline {
            body: 0,
            points: pts.to_vec(),
            nodes: vec![0, 1, 2, 3],
        }
    }

    #[test]
    fn polyline_outside_cell_is_full() {
        let pl = halfplane_body_right_of(5.0);
        let d = intersect_cell(0, [0.0, 0.0, 1.0, 1.0], &[pl], 1e-6).unwrap();
        assert_eq!(d.status, CellStatus::Full);
        assert!((d.fluid_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cell_inside_body_is_void() {
        let pl = halfplane_body_right_of(-5.0);
        let d = intersect_cell(0, [0.0, 0.0, 1.0, 1.0], &[pl], 1e-6).unwrap();
        assert_eq!(d.status, CellStatus::Void);
    }

    #[test]
    fn vertical_midline_cut_halves_cell() {
        let pl = halfplane_body_right_of(0.5);
        let d = intersect_cell(0, [0.0, 0.0, 1.0, 1.0], &[pl], 1e-6).unwrap();
        assert_eq!(d.status, CellStatus::Cut);
        assert!((d.fluid_area() - 0.5).abs() < 1e-12, "area {}", d.fluid_area());
        let segs: Vec<_> = d.live_segments().collect();
        assert_eq!(segs.len(), 1);
        assert!((segs[0].normal.x - 1.0).abs() < 1e-12);
        let quad_sum: f64 = d.pieces[0].quad.iter().map(|q| q.1).sum();
        assert!((quad_sum - 0.5).abs() < 1e-12);
    }

    #[test]
    fn diagonal_corner_cut_conserves_area() {
        // Body below the diagonal through (0,0)-(1,1); fluid above, so the
        // walk direction is (0,0) -> (1,1).
        let pts = [
            Vec2::new(-5.0, -5.0),
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(6.0, 6.0),
            Vec2::new(6.0, -5.0),
        ];
        let pl = Polyline {
            body: 0,
            points: pts.to_vec(),
            nodes: vec![0, 1, 2, 3, 4],
        };
        let d = intersect_cell(0, [0.0, 0.0, 1.0, 1.0], &[pl], 1e-9).unwrap();
        assert_eq!(d.status, CellStatus::Cut);
        assert!((d.fluid_area() - 0.5).abs() < 1e-12, "area {}", d.fluid_area());
    }

    #[test]
    fn quadrature_integrates_left_half_moment() {
        let poly = [
            Vec2::new(0.0, 0.0),
            Vec2::new(0.5, 0.0),
            Vec2::new(0.5, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let rule = cut_quadrature(&poly);
        let m: f64 = rule.iter().map(|(p, w)| w * p.x).sum();
        assert!((m - 0.125).abs() < 1e-13);
    }

    /// Analytic polygon moments via Green's theorem with exact edge
    /// integration (3-point Gauss is exact for the cubic integrands).
    fn polygon_moment(poly: &[Vec2<f64>], a: u32, b: u32) -> f64 {
        let n = poly.len();
        let (gp, gw) = crate::math::gauss_1d(3);
        let mut total = 0.0;
        for i in 0..n {
            let p = poly[i];
            let q = poly[(i + 1) % n];
            let dy = q.y - p.y;
            for (k, &xi) in gp.iter().enumerate() {
                let t = 0.5 * (xi + 1.0);
                let x = p.x + t * (q.x - p.x);
                let y = p.y + t * (q.y - p.y);
                total +=
                    gw[k] * 0.5 * x.powi(a as i32 + 1) * y.powi(b as i32) / (a as f64 + 1.0) * dy;
            }
        }
        total
    }

    #[test]
    fn quadrature_exact_for_degree_two() {
        let poly = [
            Vec2::new(0.1, 0.0),
            Vec2::new(1.0, 0.2),
            Vec2::new(0.8, 0.9),
            Vec2::new(0.3, 1.1),
            Vec2::new(-0.1, 0.5),
        ];
        let rule = cut_quadrature(&poly);
        for (a, b) in [(0u32, 0u32), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
            let num: f64 = rule
                .iter()
                .map(|(p, w)| w * p.x.powi(a as i32) * p.y.powi(b as i32))
                .sum();
            let exact = polygon_moment(&poly, a, b);
            assert!(
                (num - exact).abs() <= 1e-13 * exact.abs().max(1.0),
                "moment ({a},{b}): {num} vs {exact}"
            );
        }
    }

    #[test]
    fn quadrature_xy_matches_monte_carlo_on_random_quad() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(42);
        let poly = [
            Vec2::new(rng.random_range(0.0..0.3), rng.random_range(0.0..0.3)),
            Vec2::new(rng.random_range(0.7..1.0), rng.random_range(0.0..0.3)),
            Vec2::new(rng.random_range(0.7..1.0), rng.random_range(0.7..1.0)),
            Vec2::new(rng.random_range(0.0..0.3), rng.random_range(0.7..1.0)),
        ];
        let rule = cut_quadrature(&poly);
        let num: f64 = rule.iter().map(|(p, w)| w * p.x * p.y).sum();
        let samples = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let p = Vec2::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let mut inside = true;
            for i in 0..4 {
                let a = poly[i];
                let b = poly[(i + 1) % 4];
                if (b - a).x * (p - a).y - (b - a).y * (p - a).x < 0.0 {
                    inside = false;
                    break;
                }
            }
            if inside {
                acc += p.x * p.y;
            }
        }
        let mc = acc / samples as f64; // unit-area sampling box
        assert!(
            (num - mc).abs() / num.abs() < 1e-2,
            "quadrature {num} vs MC {mc}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn clipping_conserves_area(x0 in 0.05f64..0.95, y0 in -0.4f64..0.4, x1 in 0.05f64..0.95, y1 in -0.4f64..0.4) {
            // Random straight cut through the unit cell; fluid-side plus
            // body-side areas must add up to the cell area.
            let a = Vec2::new(x0, -1.0 + y0);
            let b = Vec2::new(x1, 2.0 + y1);
            let dir = (b - a).normalized().unwrap();
            let off = dir.perp().scale(-30.0);
            let pl = Polyline {
                body: 0,
                points: vec![a - dir.scale(10.0), b + dir.scale(10.0), b + dir.scale(10.0) + off, a - dir.scale(10.0) + off],
                nodes: vec![0, 1, 2, 3],
            };
            let d_fluid = intersect_cell(0, [0.0, 0.0, 1.0, 1.0], &[pl], 0.0).unwrap();
            let off2 = dir.perp().scale(30.0);
            let pl2 = Polyline {
                body: 0,
                points: vec![b + dir.scale(10.0), a - dir.scale(10.0), a - dir.scale(10.0) + off2, b + dir.scale(10.0) + off2],
                nodes: vec![0, 1, 2, 3],
            };
            let d_body = intersect_cell(0, [0.0, 0.0, 1.0, 1.0], &[pl2], 0.0).unwrap();
            let total = d_fluid.fluid_area() + d_body.fluid_area();
            prop_assert!((total - 1.0).abs() < 1e-12, "total {}", total);
        }
    }

    #[test]
    fn ghost_faces_selection() {
        let mesh = crate::mesh::build_structured_mesh(
            [0.0, 0.0, 3.0, 3.0],
            3,
            3,
            &crate::mesh::RectTags::new("b", "r", "t", "l"),
        )
        .unwrap();
        let status = vec![CellStatus::Full; 9];
        assert!(select_ghost_faces(&mesh, &status).faces.is_empty());
        let mut status = vec![CellStatus::Full; 9];
        status[4] = CellStatus::Cut;
        assert_eq!(select_ghost_faces(&mesh, &status).faces.len(), 4);
        status[1] = CellStatus::Void;
        assert_eq!(select_ghost_faces(&mesh, &status).faces.len(), 3);
    }

    #[test]
    fn ghost_penalty_vanishes_on_linear_fields_and_is_psd() {
        use rand::{RngExt, SeedableRng};
        let ca = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let cb = [
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, 1.0),
        ];
        let face = (Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0));
        let lin = |p: Vec2<f64>| Vec2::new(0.3 * p.x - 0.7 * p.y + 0.1, 1.1 * p.x + 0.2 * p.y);
        let linp = |p: Vec2<f64>| 0.4 * p.x - 0.9 * p.y + 2.0;
        let va = ca.map(lin);
        let vb = cb.map(lin);
        let pa = ca.map(linp);
        let pb = cb.map(linp);
        let mut r = [0.0f64; 24];
        ghost_penalty_face(&ca, &cb, &va, &pa, &vb, &pb, face, 0.1, 0.1, 1.0, 1.0, &mut r);
        for v in r {
            assert!(v.abs() < 1e-12, "residual {v}");
        }
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        for _ in 0..100 {
            let mut va = [Vec2::zero(); 4];
            let mut vb = [Vec2::zero(); 4];
            let mut pa = [0.0; 4];
            let mut pb = [0.0; 4];
            for i in 0..4 {
                va[i] = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                vb[i] = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                pa[i] = rng.random_range(-1.0..1.0);
                pb[i] = rng.random_range(-1.0..1.0);
            }
            let mut r = [0.0f64; 24];
            ghost_penalty_face(&ca, &cb, &va, &pa, &vb, &pb, face, 0.1, 0.1, 1.0, 1.0, &mut r);
            let mut dot = 0.0;
            for i in 0..4 {
                dot += r[2 * i] * va[i].x + r[2 * i + 1] * va[i].y + r[8 + i] * pa[i];
                dot += r[12 + 2 * i] * vb[i].x + r[12 + 2 * i + 1] * vb[i].y + r[20 + i] * pb[i];
            }
            assert!(dot >= -1e-14, "not PSD: {dot}");
        }
    }

    #[test]
    fn island_filtering_voids_small_components() {
        let mesh = crate::mesh::build_structured_mesh(
            [0.0, 0.0, 3.0, 1.0],
            3,
            1,
            &crate::mesh::RectTags::new("b", "r", "t", "l"),
        )
        .unwrap();
        // Body covers x in [0.9, 2.1]; carve an isolated pocket by hand into
        // the middle cell.
        let body = Polyline {
            body: 0,
            points: vec![
                Vec2::new(0.9, -1.0),
                Vec2::new(0.9, 2.0),
                Vec2::new(2.1, 2.0),
                Vec2::new(2.1, -1.0),
            ],
            nodes: vec![0, 1, 2, 3],
        };
        let mut data: Vec<CutCellData> = Vec::new();
        for c in 0..3 {
            let rect = [c as f64, 0.0, (c + 1) as f64, 1.0];
            data.push(intersect_cell(c, rect, std::slice::from_ref(&body), 1e-9).unwrap());
        }
        let pocket = vec![
            Vec2::new(1.4, 0.4),
            Vec2::new(1.6, 0.4),
            Vec2::new(1.6, 0.6),
            Vec2::new(1.4, 0.6),
        ];
        let quad = cut_quadrature(&pocket);
        data[1].status = CellStatus::Cut;
        data[1].pieces.push(Piece {
            vertices: pocket,
            area: 0.04,
            quad,
            segments: vec![InterfaceSegment {
                a: Vec2::new(1.4, 0.4),
                b: Vec2::new(1.6, 0.4),
                normal: Vec2::new(0.0, -1.0),
                body: 0,
                node_a: 0,
                node_b: 1,
                t0: 0.0,
                t1: 1.0,
                live: true,
            }],
            component: usize::MAX,
            live: true,
        });
        let before: f64 = data.iter().map(|d| d.fluid_area()).sum();
        filter_islands(&mesh, &mut data, 0.3);
        assert!(!data[1].pieces.last().unwrap().live);
        assert!(!data[1].pieces.last().unwrap().segments[0].live);
        let after: f64 = data.iter().map(|d| d.fluid_area()).sum();
        assert!((before - after - 0.04).abs() < 1e-12);
        // A single connected fluid domain stays unchanged.
        let mesh1 = crate::mesh::build_structured_mesh(
            [0.0, 0.0, 1.0, 1.0],
            1,
            1,
            &crate::mesh::RectTags::new("b", "r", "t", "l"),
        )
        .unwrap();
        let mut data2 = vec![intersect_cell(0, [0.0, 0.0, 1.0, 1.0], &[], 1e-9).unwrap()];
        filter_islands(&mesh1, &mut data2, 0.3);
        assert_eq!(data2[0].status, CellStatus::Full);
    }

    #[test]
    fn two_parallel_cuts_leave_band() {
        let below = Polyline {
            body: 0,
            points: vec![
                Vec2::new(-5.0, 0.3),
                Vec2::new(6.0, 0.3),
                Vec2::new(6.0, -5.0),
                Vec2::new(-5.0, -5.0),
            ],
            nodes: vec![0, 1, 2, 3],
        };
        let above = Polyline {
            body: 1,
            points: vec![
                Vec2::new(6.0, 0.7),
                Vec2::new(-5.0, 0.7),
                Vec2::new(-5.0, 6.0),
                Vec2::new(6.0, 6.0),
            ],
            nodes: vec![0, 1, 2, 3],
        };
        let d = intersect_cell(0, [0.0, 0.0, 1.0, 1.0], &[below, above], 1e-9).unwrap();
        assert_eq!(d.status, CellStatus::Cut);
        assert!((d.fluid_area() - 0.4).abs() < 1e-12, "band area {}", d.fluid_area());
        let segs: Vec<_> = d.live_segments().collect();
        assert_eq!(segs.len(), 2);
        for s in segs {
            if (s.a.y - 0.3).abs() < 1e-9 {
                assert!(s.normal.y < -0.99);
            } else {
                assert!(s.normal.y > 0.99);
            }
        }
    }

    #[test]
    fn segment_normal_points_from_fluid_into_body() {
        let pl = halfplane_body_right_of(0.5);
        let d = intersect_cell(0, [0.0, 0.0, 1.0, 1.0], &[pl.clone()], 1e-9).unwrap();
        for s in d.live_segments() {
            let fluid_rep = interior_point(&d.pieces[0].vertices);
            let seg_mid = s.a.lerp(s.b, 0.5);
            let body_probe = seg_mid + s.normal.scale(0.01);
            assert!(pl.contains(body_probe));
            assert!((seg_mid - fluid_rep).dot(s.normal) > 0.0);
        }
    }
}
