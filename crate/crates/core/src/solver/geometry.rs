//! Geometry cache: everything the interface terms treat in a fixed-point
//! fashion. Rebuilt when the accumulated displacement increment exceeds the
//! configured tolerance, and reclassified after every active-set update.

use super::{State, System};
use crate::constitutive::{beavers_joseph_kappa, kozeny_carman_generic, solve_porosity};
use crate::cutcell::{
    boundary_polyline, filter_islands, intersect_cell, select_ghost_faces, CellStatus,
    CutCellData, GhostFaceSet, Polyline,
};
use crate::error::{Error, Result};
use crate::forms::cell_diameter;
use crate::interface::{
    classify_contact_edges, fluid_force_coefficients, phi_v_scaling, smoothed_normals,
    ContactFluidEdge, ContactNodeState, CoupledSegment, InterfacePartition, InterfaceQp,
    MortarData, MortarEdge, MortarQp, OtherSide,
};
use crate::math::{gauss_1d, Vec2};
use crate::mesh::Mesh2D;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug)]
pub struct CutDomainData {
    pub cells: Vec<CutCellData>,
    pub ghost: GhostFaceSet,
}

/// Frozen interface geometry and stabilization data.
pub struct GeometryCache {
    /// Per fluid domain (None for fitted domains).
    pub cut: Vec<Option<CutDomainData>>,
    pub fsi_segments: Vec<CoupledSegment>,
    pub fpi_segments: Vec<CoupledSegment>,
    pub mortar: Option<MortarData>,
    /// Poro boundary edges (node-pair keys) reassigned by island filtering.
    pub island_edges: BTreeSet<(usize, usize)>,
    /// Contact-side classification per mortar edge (rebuilt per active set).
    pub contact_class: Vec<bool>,
    /// Linear pressure coefficients of the nodal fluid force.
    pub fn_coeffs: Vec<Vec<(usize, f64)>>,
    /// Edges under the fluid-mass Nitsche treatment (contact + islands +
    /// permanent impermeable tags).
    pub contact_fluid_edges: Vec<ContactFluidEdge>,
    /// Fluid dofs without support in any live cell (identity rows).
    pub inactive_dofs: Vec<usize>,
    pub partition: InterfacePartition,
    /// Body boundary polylines in the configuration the cache was built at
    /// (used for boundary-quadrature masking on cut domains).
    pub polylines: Vec<Polyline>,
    /// Displacement snapshot the cache was built at (geometry refresh test).
    pub built_at_x: Vec<f64>,
}

fn poro_body_id(sys: &System) -> usize {
    sys.solids.len()
}

/// Displacement lookup for a body id.
fn body_disp<'a>(
    sys: &'a System,
    state_x: &'a [f64],
    body: OtherSide,
) -> impl Fn(usize) -> Vec2<f64> + 'a {
    move |node| match body {
        OtherSide::Solid(b) => {
            let fu = sys.ids.solids[b];
            Vec2::new(
                state_x[sys.map.index(fu, node, 0)],
                state_x[sys.map.index(fu, node, 1)],
            )
        }
        OtherSide::Poro => {
            let (_, pu, _) = sys.ids.poro.expect("poro ids");
            Vec2::new(
                state_x[sys.map.index(pu, node, 0)],
                state_x[sys.map.index(pu, node, 1)],
            )
        }
    }
}


/// Interface porosity and slip coefficient at a poro boundary trace,
/// evaluated from the current state (then frozen).
fn interface_phi_kappa(
    sys: &System,
    x: &[f64],
    edge_lookup: &BTreeMap<(usize, usize), (usize, usize)>,
    na: usize,
    nb: usize,
    t: f64,
) -> Result<(f64, f64)> {
    let poro = sys.poro.as_ref().expect("poro domain");
    let (_, pu, pp) = sys.ids.poro.expect("poro ids");
    let key = (na.min(nb), na.max(nb));
    let &(cell, local_e) = edge_lookup
        .get(&key)
        .ok_or_else(|| Error::Geometry(format!("poro boundary edge {key:?} not found")))?;
    // Deformation gradient at the edge midpoint of the parent cell.
    let coords = poro.mesh.cell_coords(cell);
    let (xi, eta) = crate::forms::edge_ref_coords(local_e, 0.0);
    let (_, dn_ref) = crate::mesh::shape_eval(xi, eta);
    let (_, jac, _) = crate::mesh::isoparametric_map(&coords, xi, eta)?;
    let dn0 = crate::mesh::physical_gradients(&jac, &dn_ref);
    let nodes = poro.mesh.cells[cell];
    let mut grad_u = crate::math::Mat2::<f64>::zero();
    for i in 0..4 {
        let ux = x[sys.map.index(pu, nodes[i], 0)];
        let uy = x[sys.map.index(pu, nodes[i], 1)];
        grad_u.a[0][0] += ux * dn0[i].x;
        grad_u.a[0][1] += ux * dn0[i].y;
        grad_u.a[1][0] += uy * dn0[i].x;
        grad_u.a[1][1] += uy * dn0[i].y;
    }
    let j = crate::math::Mat2::identity().add(&grad_u).det();
    let p = (1.0 - t) * x[sys.map.index(pp, na, 0)] + t * x[sys.map.index(pp, nb, 0)];
    let phi = solve_porosity(j.max(1e-3), p, &poro.mat)?.phi;
    let k_mat = kozeny_carman_generic(j.max(1e-3) * phi, &poro.mat);
    let k_spatial = (k_mat / j.max(1e-3)).max(1e-300);
    let kappa = beavers_joseph_kappa(k_spatial, poro.mu_f, poro.mat.alpha_bj)?;
    Ok((phi, kappa))
}

/// Map (sorted node pair) -> (cell, local edge) over all boundary edges.
fn boundary_edge_lookup(mesh: &Mesh2D) -> BTreeMap<(usize, usize), (usize, usize)> {
    let mut map = BTreeMap::new();
    for (cell, e) in mesh.all_boundary_edges() {
        let (a, b) = mesh.edge_nodes(cell, e);
        map.insert((a.min(b), a.max(b)), (cell, e));
    }
    map
}

/// Fluid velocity magnitude scale over segment quadrature points (frozen
/// phi_v input).
fn segment_velocity_scale(
    sys: &System,
    x: &[f64],
    fluid_dom: usize,
    cell: usize,
    qps: &[InterfaceQp],
) -> f64 {
    let (fv, _) = sys.ids.fluids[fluid_dom];
    let mesh = &sys.fluids[fluid_dom].mesh;
    let coords = mesh.cell_coords(cell);
    let nodes = mesh.cells[cell];
    let mut scale = 0.0f64;
    for qp in qps {
        let (xi, eta) = crate::mesh::rect_inverse_map(&coords, qp.x);
        let (n, _) = crate::mesh::shape_eval(xi, eta);
        let mut v = Vec2::zero();
        for i in 0..4 {
            v += Vec2::new(
                x[sys.map.index(fv, nodes[i], 0)],
                x[sys.map.index(fv, nodes[i], 1)],
            )
            .scale(n[i]);
        }
        scale = scale.max(v.norm());
    }
    scale
}

/// Build the full geometry cache from the current state.
pub fn build_geometry(
    sys: &System,
    state: &State,
    theta: f64,
    dt: f64,
) -> Result<GeometryCache> {
    let n_solids = sys.solids.len();
    // Current-configuration boundary polylines, by body id.
    let mut polylines: Vec<Polyline> = Vec::new();
    for b in 0..n_solids {
        let disp = body_disp(sys, &state.x, OtherSide::Solid(b));
        polylines.push(boundary_polyline(&sys.solids[b].mesh, b, disp)?);
    }
    if let Some(poro) = &sys.poro {
        let disp = body_disp(sys, &state.x, OtherSide::Poro);
        polylines.push(boundary_polyline(&poro.mesh, poro_body_id(sys), disp)?);
    }

    // Cut fluid domains.
    let mut cut: Vec<Option<CutDomainData>> = vec![None; sys.fluids.len()];
    let mut island_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (dom_idx, bodies) in &sys.cut_fluids {
        let mesh = &sys.fluids[*dom_idx].mesh;
        let pls: Vec<Polyline> = bodies
            .iter()
            .map(|b| match b {
                OtherSide::Solid(k) => polylines[*k].clone(),
                OtherSide::Poro => polylines[poro_body_id(sys)].clone(),
            })
            .collect();
        let mut cells = Vec::with_capacity(mesh.n_cells());
        for c in 0..mesh.n_cells() {
            let xs = mesh.cell_coords(c);
            let rect = [xs[0].x, xs[0].y, xs[2].x, xs[2].y];
            cells.push(intersect_cell(c, rect, &pls, sys.eps_area)?);
        }
        filter_islands(mesh, &mut cells, sys.island_threshold);
        // Record island-reassigned poro edges.
        for d in &cells {
            for piece in &d.pieces {
                for seg in &piece.segments {
                    if !seg.live && seg.body == poro_body_id(sys) {
                        island_edges.insert((seg.node_a.min(seg.node_b), seg.node_a.max(seg.node_b)));
                    }
                }
            }
        }
        let status: Vec<CellStatus> = cells.iter().map(|d| d.status).collect();
        let ghost = select_ghost_faces(mesh, &status);
        cut[*dom_idx] = Some(CutDomainData { cells, ghost });
    }

    // Poro boundary lookup for interface parameters.
    let poro_edge_lookup = sys
        .poro
        .as_ref()
        .map(|p| boundary_edge_lookup(&p.mesh))
        .unwrap_or_default();

    // Interface segments from cut data.
    let (gp, gw) = gauss_1d(2);
    let mut fsi_segments: Vec<CoupledSegment> = Vec::new();
    let mut fpi_segments: Vec<CoupledSegment> = Vec::new();
    for (dom_idx, data) in cut.iter().enumerate() {
        let Some(data) = data else { continue };
        let mesh = &sys.fluids[dom_idx].mesh;
        let fluid = &sys.fluids[dom_idx];
        for cd in &data.cells {
            for seg in cd.live_segments() {
                let len = seg.length();
                if len < 1e-14 {
                    continue;
                }
                let other = if seg.body < n_solids {
                    OtherSide::Solid(seg.body)
                } else {
                    OtherSide::Poro
                };
                let coords = mesh.cell_coords(cd.cell);
                let h_e = cell_diameter(&coords);
                let mut qps = Vec::with_capacity(gp.len());
                for (k, &xi) in gp.iter().enumerate() {
                    let s = 0.5 * (xi + 1.0);
                    let mut qp = InterfaceQp {
                        x: seg.point_at(s),
                        w: gw[k] * 0.5 * len,
                        normal: seg.normal,
                        na: seg.node_a,
                        nb: seg.node_b,
                        t: seg.t_at(s),
                        phi: 0.0,
                    };
                    if other == OtherSide::Poro {
                        let (phi, _) = interface_phi_kappa(
                            sys,
                            &state.x,
                            &poro_edge_lookup,
                            qp.na,
                            qp.nb,
                            qp.t,
                        )?;
                        qp.phi = phi;
                    }
                    qps.push(qp);
                }
                let v_scale = segment_velocity_scale(sys, &state.x, dom_idx, cd.cell, &qps);
                let phi_v = phi_v_scaling(fluid.params.mu, fluid.params.rho, h_e, v_scale, theta, dt);
                let kappa = if other == OtherSide::Poro {
                    let mid = &qps[0];
                    interface_phi_kappa(sys, &state.x, &poro_edge_lookup, mid.na, mid.nb, mid.t)?.1
                } else {
                    0.0
                };
                let seg_out = CoupledSegment {
                    fluid_dom: dom_idx,
                    cell: cd.cell,
                    other,
                    h_e,
                    phi_v,
                    kappa,
                    qps,
                };
                if other == OtherSide::Poro {
                    fpi_segments.push(seg_out);
                } else {
                    fsi_segments.push(seg_out);
                }
            }
        }
    }

    // Fitted interfaces: integrate on the tagged fluid boundary edges,
    // project traces onto the deformed body polyline.
    for (list, target) in [
        (&sys.fitted_fsi, &mut fsi_segments),
        (&sys.fitted_fpi, &mut fpi_segments),
    ] {
        for fit in list.iter() {
            let mesh = &sys.fluids[fit.fluid_dom].mesh;
            let fluid = &sys.fluids[fit.fluid_dom];
            let pl = match fit.other {
                OtherSide::Solid(b) => &polylines[b],
                OtherSide::Poro => &polylines[poro_body_id(sys)],
            };
            for &(cell, e) in mesh.tagged(&fit.fluid_tag)? {
                let (a, b) = mesh.edge_nodes(cell, e);
                let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
                let len = pa.dist(pb);
                let dirv = (pb - pa).scale(1.0 / len);
                // Outward normal of the fluid mesh (edges are cell-local CCW).
                let normal = Vec2::new(dirv.y, -dirv.x);
                let coords = mesh.cell_coords(cell);
                let h_e = cell_diameter(&coords);
                let mut qps = Vec::with_capacity(gp.len());
                for (k, &xi) in gp.iter().enumerate() {
                    let s = 0.5 * (xi + 1.0);
                    let x = pa.lerp(pb, s);
                    let (seg_k, t, _) = pl.closest(x);
                    let (na, nb) = pl.segment_nodes(seg_k);
                    let mut qp = InterfaceQp {
                        x,
                        w: gw[k] * 0.5 * len,
                        normal,
                        na,
                        nb,
                        t,
                        phi: 0.0,
                    };
                    if fit.other == OtherSide::Poro {
                        let (phi, _) =
                            interface_phi_kappa(sys, &state.x, &poro_edge_lookup, na, nb, t)?;
                        qp.phi = phi;
                    }
                    qps.push(qp);
                }
                let v_scale = segment_velocity_scale(sys, &state.x, fit.fluid_dom, cell, &qps);
                let phi_v =
                    phi_v_scaling(fluid.params.mu, fluid.params.rho, h_e, v_scale, theta, dt);
                let kappa = if fit.other == OtherSide::Poro {
                    let q0 = &qps[0];
                    interface_phi_kappa(sys, &state.x, &poro_edge_lookup, q0.na, q0.nb, q0.t)?.1
                } else {
                    0.0
                };
                target.push(CoupledSegment {
                    fluid_dom: fit.fluid_dom,
                    cell,
                    other: fit.other,
                    h_e,
                    phi_v,
                    kappa,
                    qps,
                });
            }
        }
    }

    // Mortar contact data.
    let mortar = if let Some(cfg) = &sys.contact {
        let poro = sys.poro.as_ref().expect("contact needs a poro domain");
        let disp_p = body_disp(sys, &state.x, OtherSide::Poro);
        // Contact surface edges in current configuration.
        let mut edges_geo: Vec<(usize, usize, Vec2<f64>)> = Vec::new();
        let mut edge_meta: Vec<(usize, usize, usize, usize, f64, Vec2<f64>)> = Vec::new();
        let mut node_set: BTreeSet<usize> = BTreeSet::new();
        for &(cell, e) in poro.mesh.tagged(&cfg.poro_tag)? {
            let (na, nb) = poro.mesh.edge_nodes(cell, e);
            let xa = poro.mesh.nodes[na] + disp_p(na);
            let xb = poro.mesh.nodes[nb] + disp_p(nb);
            let d = xb - xa;
            let len = d.norm();
            let normal = Vec2::new(d.y / len, -d.x / len);
            edges_geo.push((na, nb, normal));
            edge_meta.push((cell, e, na, nb, len, normal));
            node_set.insert(na);
            node_set.insert(nb);
        }
        let nodes: Vec<usize> = node_set.into_iter().collect();
        let normals = smoothed_normals(&nodes, &edges_geo)?;
        // Solid contact polyline (ordered segments of the tagged edges).
        let solid_mesh = &sys.solids[cfg.solid_body].mesh;
        let disp_s = body_disp(sys, &state.x, OtherSide::Solid(cfg.solid_body));
        let mut solid_segs: Vec<(usize, usize, Vec2<f64>, Vec2<f64>)> = Vec::new();
        for &(cell, e) in solid_mesh.tagged(&cfg.solid_tag)? {
            let (sa, sb) = solid_mesh.edge_nodes(cell, e);
            let xa = solid_mesh.nodes[sa] + disp_s(sa);
            let xb = solid_mesh.nodes[sb] + disp_s(sb);
            solid_segs.push((sa, sb, xa, xb));
        }
        // Quadrature with ray projections along the smoothed normal.
        let (gp3, gw3) = gauss_1d(3);
        let node_index = |n: usize| nodes.binary_search(&n).ok();
        let mut edges = Vec::new();
        for &(cell, e, na, nb, len, normal) in &edge_meta {
            let xa = poro.mesh.nodes[na] + disp_p(na);
            let xb = poro.mesh.nodes[nb] + disp_p(nb);
            let n_a = node_index(na).map(|j| normals[j]).unwrap_or(normal);
            let n_b = node_index(nb).map(|j| normals[j]).unwrap_or(normal);
            let mut qps = Vec::new();
            for (k, &xi) in gp3.iter().enumerate() {
                let s = 0.5 * (xi + 1.0);
                let x = xa.lerp(xb, s);
                let nm = (n_a.scale(1.0 - s) + n_b.scale(s))
                    .normalized()
                    .unwrap_or(normal);
                // Ray x + alpha nm against the solid contact segments.
                let mut best: Option<(f64, usize, usize, f64)> = None;
                for &(sa, sb, ya, yb) in &solid_segs {
                    let d2 = yb - ya;
                    let denom = nm.x * (-d2.y) - nm.y * (-d2.x);
                    if denom.abs() < 1e-300 {
                        continue;
                    }
                    // Solve x + alpha nm = ya + t d2.
                    let rhs = ya - x;
                    let alpha = (rhs.x * (-d2.y) - rhs.y * (-d2.x)) / denom;
                    let t = (nm.x * rhs.y - nm.y * rhs.x) / denom;
                    if (-1e-9..=1.0 + 1e-9).contains(&t) {
                        let tc = t.clamp(0.0, 1.0);
                        if best.map(|b| alpha.abs() < b.0.abs()).unwrap_or(true) {
                            best = Some((alpha, sa, sb, tc));
                        }
                    }
                }
                qps.push(MortarQp {
                    s,
                    w: gw3[k] * 0.5 * len,
                    normal: nm,
                    pair: best.map(|(_, sa, sb, t)| (cfg.solid_body, sa, sb, t)),
                });
            }
            edges.push(MortarEdge {
                cell,
                edge: e,
                na,
                nb,
                len,
                normal,
                qps,
            });
        }
        // Partition-of-unity denominators over the whole potential interface.
        let mut denom = vec![0.0; nodes.len()];
        for edge in &edges {
            for qp in &edge.qps {
                let nsh = [1.0 - qp.s, qp.s];
                for (k, node) in [edge.na, edge.nb].into_iter().enumerate() {
                    if let Some(j) = node_index(node) {
                        denom[j] += qp.w * nsh[k];
                    }
                }
            }
        }
        Some(MortarData {
            nodes,
            normals,
            denom,
            edges,
            c_n: cfg.c_n,
        })
    } else {
        None
    };

    // Inactive fluid dofs on cut domains.
    let mut inactive = Vec::new();
    for (dom_idx, data) in cut.iter().enumerate() {
        let Some(data) = data else { continue };
        let mesh = &sys.fluids[dom_idx].mesh;
        let mut live = vec![false; mesh.n_nodes()];
        for cd in &data.cells {
            if cd.status != CellStatus::Void {
                for &n in &mesh.cells[cd.cell] {
                    live[n] = true;
                }
            }
        }
        let (fv, fp) = sys.ids.fluids[dom_idx];
        for (n, ok) in live.iter().enumerate() {
            if !ok {
                inactive.push(sys.map.index(fv, n, 0));
                inactive.push(sys.map.index(fv, n, 1));
                inactive.push(sys.map.index(fp, n, 0));
            }
        }
    }

    let cache = GeometryCache {
        cut,
        fsi_segments,
        fpi_segments,
        mortar,
        island_edges,
        contact_class: Vec::new(),
        fn_coeffs: Vec::new(),
        contact_fluid_edges: Vec::new(),
        inactive_dofs: inactive,
        partition: InterfacePartition::default(),
        polylines,
        built_at_x: state.x.clone(),
    };
    cache_with_classification(sys, state, cache, &[])
}

/// Rebuild the contact-side classification, the fluid-force coefficients and
/// the contact fluid-mass edge set for the given active states (fast; no
/// re-cutting).
pub fn cache_with_classification(
    sys: &System,
    state: &State,
    mut cache: GeometryCache,
    states: &[ContactNodeState],
) -> Result<GeometryCache> {
    let mut cf_edges: Vec<ContactFluidEdge> = Vec::new();
    let mut n_contact = 0usize;

    if let Some(mortar) = &cache.mortar {
        let class = if states.is_empty() {
            classify_contact_edges(
                mortar,
                &vec![
                    ContactNodeState {
                        node: 0,
                        lambda: Vec2::zero(),
                        gap: 0.0,
                        f_n: 0.0,
                        n_smooth: Vec2::new(0.0, 1.0),
                        active: false,
                        c_n: mortar.c_n,
                    };
                    mortar.nodes.len()
                ],
                &cache.island_edges,
            )
        } else {
            classify_contact_edges(mortar, states, &cache.island_edges)
        };
        cache.fn_coeffs = fluid_force_coefficients(mortar, &class);
        // Contact-side fluid mass edges from the classification.
        let poro = sys.poro.as_ref().expect("contact needs poro");
        let (_, pu, _) = sys.ids.poro.expect("poro ids");
        for (edge, is_contact) in mortar.edges.iter().zip(&class) {
            if !is_contact {
                continue;
            }
            n_contact += 1;
            let ua = Vec2::new(
                state.x[sys.map.index(pu, edge.na, 0)],
                state.x[sys.map.index(pu, edge.na, 1)],
            );
            let ub = Vec2::new(
                state.x[sys.map.index(pu, edge.nb, 0)],
                state.x[sys.map.index(pu, edge.nb, 1)],
            );
            let xa = poro.mesh.nodes[edge.na] + ua;
            let xb = poro.mesh.nodes[edge.nb] + ub;
            let d = xb - xa;
            let len = d.norm();
            let phi = interface_phi_edge(sys, state, edge.na, edge.nb)?;
            cf_edges.push(ContactFluidEdge {
                na: edge.na,
                nb: edge.nb,
                len,
                normal: Vec2::new(d.y / len, -d.x / len),
                phi,
            });
        }
        cache.contact_class = class;
    }

    // Permanent impermeable (matched) poroelastic interfaces.
    if let Some(poro) = &sys.poro {
        let (_, pu, _) = sys.ids.poro.expect("poro ids");
        for tag in &sys.ps_impermeable {
            for &(cell, e) in poro.mesh.tagged(tag)? {
                let (na, nb) = poro.mesh.edge_nodes(cell, e);
                let ua = Vec2::new(
                    state.x[sys.map.index(pu, na, 0)],
                    state.x[sys.map.index(pu, na, 1)],
                );
                let ub = Vec2::new(
                    state.x[sys.map.index(pu, nb, 0)],
                    state.x[sys.map.index(pu, nb, 1)],
                );
                let xa = poro.mesh.nodes[na] + ua;
                let xb = poro.mesh.nodes[nb] + ub;
                let d = xb - xa;
                let len = d.norm();
                let phi = interface_phi_edge(sys, state, na, nb)?;
                cf_edges.push(ContactFluidEdge {
                    na,
                    nb,
                    len,
                    normal: Vec2::new(d.y / len, -d.x / len),
                    phi,
                });
            }
        }
    }

    // Drop FPI segments lying on contact-classified edges (disjoint cover).
    if let Some(mortar) = &cache.mortar {
        let contact_keys: BTreeSet<(usize, usize)> = mortar
            .edges
            .iter()
            .zip(&cache.contact_class)
            .filter(|(_, c)| **c)
            .map(|(e, _)| (e.na.min(e.nb), e.na.max(e.nb)))
            .collect();
        cache.fpi_segments.retain(|seg| {
            seg.qps.iter().all(|qp| {
                !contact_keys.contains(&(qp.na.min(qp.nb), qp.na.max(qp.nb)))
            })
        });
    }

    cache.partition = InterfacePartition {
        n_fs_segments: cache.fsi_segments.len(),
        n_fp_segments: cache.fpi_segments.len(),
        n_contact_edges: n_contact,
    };
    cache.contact_fluid_edges = cf_edges;
    Ok(cache)
}

/// Interface porosity for a poro boundary edge from the current state.
fn interface_phi_edge(sys: &System, state: &State, na: usize, nb: usize) -> Result<f64> {
    let lookup = boundary_edge_lookup(&sys.poro.as_ref().unwrap().mesh);
    interface_phi_kappa(sys, &state.x, &lookup, na, nb, 0.5).map(|(phi, _)| phi)
}

/// Recompute the frozen phi_v stabilization scalars from the current iterate
/// (cheap; no re-cutting). The scalars lag one iteration like the other
/// fixed-point interface quantities, but must track the velocity scale for
/// the Nitsche penalties to control spurious interface transpiration.
pub fn refresh_phi_v(sys: &System, cache: &mut GeometryCache, x: &[f64], theta: f64, dt: f64) {
    for segs in [&mut cache.fsi_segments, &mut cache.fpi_segments] {
        for seg in segs.iter_mut() {
            let fluid = &sys.fluids[seg.fluid_dom];
            let v_scale = segment_velocity_scale(sys, x, seg.fluid_dom, seg.cell, &seg.qps);
            let candidate =
                phi_v_scaling(fluid.params.mu, fluid.params.rho, seg.h_e, v_scale, theta, dt);
            // Ratchet upward within the step so the penalty never weakens
            // mid-iteration (monotone fixed point).
            seg.phi_v = seg.phi_v.max(candidate);
        }
    }
}

impl GeometryCache {
    /// Maximum displacement-field change since the cache was built.
    pub fn displacement_drift(&self, sys: &System, x: &[f64]) -> f64 {
        let mut d = 0.0f64;
        for g in 0..x.len() {
            if sys.is_disp_dof(g) {
                d = d.max((x[g] - self.built_at_x[g]).abs());
            }
        }
        d
    }
}

impl std::fmt::Debug for GeometryCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeometryCache")
            .field("fsi_segments", &self.fsi_segments.len())
            .field("fpi_segments", &self.fpi_segments.len())
            .field("contact_fluid_edges", &self.contact_fluid_edges.len())
            .field("inactive_dofs", &self.inactive_dofs.len())
            .finish()
    }
}

