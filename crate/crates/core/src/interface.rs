//! Interface couplings: Nitsche fluid-structure and fluid-poroelastic terms,
//! mortar segment-to-segment contact with an active-set complementarity
//! treatment, the contact-interface fluid mass balance, and the KKT-driven
//! interface classification.
//!
//! Interface geometry (quadrature points, normals, pairings, stabilization
//! scalings, interface porosity and slip coefficient) is frozen in a geometry
//! cache between refreshes; only field values stay live in the residual and
//! tangent. This realizes the fixed-point treatment of interface-position
//! dependencies.

use crate::dual::DualN;
use crate::error::{Error, Result};
use crate::forms::{lift_vec2, Assembly, ThetaCtx};
use crate::math::{Scalar, Vec2};
use crate::mesh::{DofMap, FieldId, Mesh2D};

/// Nitsche constants; the spec's gamma values are "sufficiently small", the
/// penalty coefficients scale with 1/gamma.
#[derive(Clone, Copy, Debug, serde::Deserialize, serde::Serialize)]
pub struct NitscheParams {
    pub gamma: f64,
    pub gamma_n: f64,
    pub gamma_t: f64,
    /// Contact fluid-mass penalty parameter; the weak-form coefficient is
    /// 1/gamma_p.
    pub gamma_p: f64,
    /// Simplified Beavers-Joseph-Saffman variant: neglect the seepage
    /// velocity in the tangential slip jump.
    #[serde(default)]
    pub saffman: bool,
}

impl Default for NitscheParams {
    fn default() -> Self {
        Self {
            gamma: 0.005,
            gamma_n: 0.005,
            gamma_t: 0.005,
            gamma_p: 1.0,
            saffman: false,
        }
    }
}

/// Field-id bundle used by the interface drivers.
#[derive(Clone, Debug)]
pub struct FieldIds {
    /// Displacement field per solid body.
    pub solids: Vec<FieldId>,
    /// (velocity, pressure) per fluid domain.
    pub fluids: Vec<(FieldId, FieldId)>,
    /// (velocity, displacement, pressure) of the poroelastic layer.
    pub poro: Option<(FieldId, FieldId, FieldId)>,
    /// Contact multipliers.
    pub lambda: Option<FieldId>,
}

/// Which embedded body a segment's other side belongs to: solid bodies come
/// first, the poroelastic layer is last.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OtherSide {
    Solid(usize),
    Poro,
}

/// One interface quadrature point with its frozen geometry and trace pairing.
#[derive(Clone, Debug)]
pub struct InterfaceQp {
    pub x: Vec2<f64>,
    /// Length weight.
    pub w: f64,
    /// Unit normal pointing out of the fluid.
    pub normal: Vec2<f64>,
    /// Other-side trace: mesh nodes and parameter along (na -> nb).
    pub na: usize,
    pub nb: usize,
    pub t: f64,
    /// Interface porosity (FPI segments), frozen at refresh.
    pub phi: f64,
}

/// A coupled Nitsche segment (FSI or FPI) with fluid-side quadrature.
#[derive(Clone, Debug)]
pub struct CoupledSegment {
    pub fluid_dom: usize,
    pub cell: usize,
    pub other: OtherSide,
    pub h_e: f64,
    /// Frozen stabilization scaling phi_v = mu + rho h |v| + rho h^2/(theta dt).
    pub phi_v: f64,
    /// Frozen Beavers-Joseph slip coefficient (FPI only).
    pub kappa: f64,
    pub qps: Vec<InterfaceQp>,
}

/// Stabilization scaling phi_v from the segment's frozen velocity scale.
pub fn phi_v_scaling(mu: f64, rho: f64, h_e: f64, v_scale: f64, theta: f64, dt: f64) -> f64 {
    mu + rho * h_e * v_scale + rho * h_e * h_e / (theta * dt)
}

// ---------------------------------------------------------------------------
// Nitsche FSI
// ---------------------------------------------------------------------------

struct FluidTrace<S: Scalar> {
    v: Vec2<S>,
    p: S,
    /// Velocity gradient at the point.
    grad_v: crate::math::Mat2<S>,
    /// Shape values and gradients for test-function rows.
    n: [f64; 4],
    dn: [Vec2<f64>; 4],
}

fn fluid_trace<S: Scalar>(
    coords: &[Vec2<f64>; 4],
    v: &[Vec2<S>; 4],
    p: &[S; 4],
    x: Vec2<f64>,
) -> FluidTrace<S> {
    let (xi, eta) = crate::mesh::rect_inverse_map(coords, x);
    let (n, dn_ref) = crate::mesh::shape_eval(xi, eta);
    let jac = crate::math::Mat2::new(
        0.5 * (coords[2].x - coords[0].x),
        0.0,
        0.0,
        0.5 * (coords[2].y - coords[0].y),
    );
    let dn = crate::mesh::physical_gradients(&jac, &dn_ref);
    let vv = crate::mesh::interp_vec2(&n, v);
    let grad_v = crate::mesh::grad_vec2(&dn, v);
    let mut pp = S::from_f64(0.0);
    for i in 0..4 {
        pp += p[i] * n[i];
    }
    FluidTrace {
        v: vv,
        p: pp,
        grad_v,
        n,
        dn,
    }
}

/// sigma^F . n = -p n + 2 mu eps(v) n.
fn fluid_traction<S: Scalar>(tr: &FluidTrace<S>, mu: f64, n: Vec2<f64>) -> Vec2<S> {
    let nn = lift_vec2::<S>(n);
    let eps = tr.grad_v.sym();
    eps.mul_vec(nn).scale(S::from_f64(2.0 * mu)) - nn.scale(tr.p)
}

/// (eps(N_i e_d) n) . y for the adjoint rows: returns the contraction for
/// given shape gradient, component d, normal and vector y.
#[inline]
fn eps_test_n_dot<S: Scalar>(dn_i: Vec2<f64>, d: usize, n: Vec2<f64>, y: Vec2<S>) -> S {
    // eps(N e_d) n = 0.5 (e_d (dN . n) + dN (e_d . n))
    let dn_dot_n = dn_i.dot(n);
    let y_d = y.comp(d);
    let y_dot_dn = y.x * dn_i.x + y.y * dn_i.y;
    y_d * (0.5 * dn_dot_n) + y_dot_dn * (0.5 * n.comp(d))
}

/// FSI segment kernel at one quadrature point. Locals: fluid v (0..8),
/// fluid p (8..12), solid edge u (12..16).
#[allow(clippy::too_many_arguments)]
fn fsi_qp_kernel<S: Scalar>(
    coords: &[Vec2<f64>; 4],
    v_f: &[Vec2<S>; 4],
    p_f: &[S; 4],
    u_s: &[Vec2<S>; 2],
    u_s_old: &[Vec2<f64>; 2],
    w_s_old: &[Vec2<f64>; 2],
    qp: &InterfaceQp,
    mu: f64,
    penalty: f64,
    th: &ThetaCtx,
    resid: &mut [S; 16],
) {
    let tr = fluid_trace(coords, v_f, p_f, qp.x);
    let traction = fluid_traction(&tr, mu, qp.normal);
    // Solid interface velocity from the theta update.
    let nsh = [1.0 - qp.t, qp.t];
    let mut udot = Vec2::<S>::zero();
    for k in 0..2 {
        let w_new = th.velocity_vec(u_s[k], u_s_old[k], w_s_old[k]);
        udot += w_new.scale(S::from_f64(nsh[k]));
    }
    let jump = tr.v - udot;
    let w = qp.w;
    for k in 0..2 {
        for d in 0..2 {
            // consistency <delta u^S, sigma n> and penalty -<delta u^S, .>
            let mut val = traction.comp(d) * nsh[k];
            val -= jump.comp(d) * (penalty * nsh[k]);
            resid[12 + 2 * k + d] += val * w;
        }
    }
    for i in 0..4 {
        for d in 0..2 {
            // -<delta v, sigma n> + adjoint viscous + penalty
            let mut val = -traction.comp(d) * tr.n[i];
            val += eps_test_n_dot(tr.dn[i], d, qp.normal, jump) * (2.0 * mu);
            val += jump.comp(d) * (penalty * tr.n[i]);
            resid[2 * i + d] += val * w;
        }
        // adjoint pressure: -<delta p n, jump>
        resid[8 + i] -= jump.dot(lift_vec2(qp.normal)) * (tr.n[i] * w);
    }
}

/// Assemble the Nitsche FSI terms over the cached segments.
#[allow(clippy::too_many_arguments)]
pub fn assemble_fsi(
    segments: &[CoupledSegment],
    fluid_meshes: &[&Mesh2D],
    solid_meshes: &[&Mesh2D],
    ids: &FieldIds,
    map: &DofMap,
    x_new: &[f64],
    x_old: &[f64],
    w_old: &[f64],
    mu: f64,
    params: &NitscheParams,
    th: &ThetaCtx,
    asm: &mut Assembly,
) {
    for seg in segments {
        let body = match seg.other {
            OtherSide::Solid(b) => b,
            OtherSide::Poro => continue,
        };
        let (fv, fp) = ids.fluids[seg.fluid_dom];
        let fu = ids.solids[body];
        let mesh = fluid_meshes[seg.fluid_dom];
        let coords = mesh.cell_coords(seg.cell);
        let nodes = mesh.cells[seg.cell];
        let penalty = seg.phi_v / (params.gamma * seg.h_e);
        for qp in &seg.qps {
            let mut rows = [0usize; 16];
            for i in 0..4 {
                rows[2 * i] = map.index(fv, nodes[i], 0);
                rows[2 * i + 1] = map.index(fv, nodes[i], 1);
                rows[8 + i] = map.index(fp, nodes[i], 0);
            }
            for (k, node) in [qp.na, qp.nb].into_iter().enumerate() {
                rows[12 + 2 * k] = map.index(fu, node, 0);
                rows[12 + 2 * k + 1] = map.index(fu, node, 1);
            }
            let mut uo = [Vec2::zero(); 2];
            let mut wo = [Vec2::zero(); 2];
            for k in 0..2 {
                uo[k] = Vec2::new(x_old[rows[12 + 2 * k]], x_old[rows[12 + 2 * k + 1]]);
                wo[k] = Vec2::new(w_old[rows[12 + 2 * k]], w_old[rows[12 + 2 * k + 1]]);
            }
            let _ = solid_meshes;
            if asm.wants_tangent() {
                let mut vf = [Vec2::<DualN<16>>::zero(); 4];
                let mut pf = [DualN::<16>::constant(0.0); 4];
                let mut us = [Vec2::<DualN<16>>::zero(); 2];
                for i in 0..4 {
                    vf[i].x = DualN::variable(x_new[rows[2 * i]], 2 * i);
                    vf[i].y = DualN::variable(x_new[rows[2 * i + 1]], 2 * i + 1);
                    pf[i] = DualN::variable(x_new[rows[8 + i]], 8 + i);
                }
                for k in 0..2 {
                    us[k].x = DualN::variable(x_new[rows[12 + 2 * k]], 12 + 2 * k);
                    us[k].y = DualN::variable(x_new[rows[12 + 2 * k + 1]], 12 + 2 * k + 1);
                }
                let mut local = [DualN::<16>::constant(0.0); 16];
                fsi_qp_kernel(&coords, &vf, &pf, &us, &uo, &wo, qp, mu, penalty, th, &mut local);
                asm.scatter_dual(&rows, &rows, &local);
            } else {
                let mut vf = [Vec2::<f64>::zero(); 4];
                let mut pf = [0.0f64; 4];
                let mut us = [Vec2::<f64>::zero(); 2];
                for i in 0..4 {
                    vf[i] = Vec2::new(x_new[rows[2 * i]], x_new[rows[2 * i + 1]]);
                    pf[i] = x_new[rows[8 + i]];
                }
                for k in 0..2 {
                    us[k] = Vec2::new(x_new[rows[12 + 2 * k]], x_new[rows[12 + 2 * k + 1]]);
                }
                let mut local = [0.0f64; 16];
                fsi_qp_kernel(&coords, &vf, &pf, &us, &uo, &wo, qp, mu, penalty, th, &mut local);
                asm.scatter_f64(&rows, &local);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Nitsche FPI
// ---------------------------------------------------------------------------

/// FPI segment kernel at one quadrature point. Locals: fluid v (0..8),
/// fluid p (8..12), poro v (12..16), poro u (16..20), poro p (20..22).
#[allow(clippy::too_many_arguments)]
fn fpi_qp_kernel<S: Scalar>(
    coords: &[Vec2<f64>; 4],
    v_f: &[Vec2<S>; 4],
    p_f: &[S; 4],
    v_p: &[Vec2<S>; 2],
    u_p: &[Vec2<S>; 2],
    u_p_old: &[Vec2<f64>; 2],
    w_p_old: &[Vec2<f64>; 2],
    qp: &InterfaceQp,
    mu: f64,
    kappa: f64,
    penalty_n: f64,
    gamma_t: f64,
    h_e: f64,
    saffman: bool,
    th: &ThetaCtx,
    resid: &mut [S; 22],
) {
    let tr = fluid_trace(coords, v_f, p_f, qp.x);
    let traction = fluid_traction(&tr, mu, qp.normal);
    let n = qp.normal;
    let nsh = [1.0 - qp.t, qp.t];
    // Poro traces.
    let mut vp = Vec2::<S>::zero();
    let mut udot = Vec2::<S>::zero();
    for k in 0..2 {
        vp += v_p[k].scale(S::from_f64(nsh[k]));
        let w_new = th.velocity_vec(u_p[k], u_p_old[k], w_p_old[k]);
        udot += w_new.scale(S::from_f64(nsh[k]));
    }
    // Mass-flux jump v^F - udot - phi (v^P - udot).
    let seep = (vp - udot).scale(S::from_f64(qp.phi));
    let jump_full = tr.v - udot - seep;
    let jump_t_base = if saffman { tr.v - udot } else { jump_full };
    // Normal/tangential split.
    let jn_scalar = jump_full.dot(lift_vec2(n));
    let jump_n = lift_vec2::<S>(n).scale(jn_scalar);
    let jump_t = jump_t_base - lift_vec2::<S>(n).scale(jump_t_base.dot(lift_vec2(n)));
    // Traction split.
    let trac_n_scalar = traction.dot(lift_vec2(n));
    let trac_n = lift_vec2::<S>(n).scale(trac_n_scalar);
    let trac_t = traction - trac_n;
    // Tangential combinations.
    let bj = jump_t + trac_t.scale(S::from_f64(kappa));
    let coef_adj_t = gamma_t * h_e / (kappa * mu + gamma_t * h_e);
    let coef_pen_t = mu / (kappa * mu + gamma_t * h_e);
    let w = qp.w;

    // Poro rows (velocity and displacement get the normal consistency and
    // penalty; displacement also the tangential parts).
    for k in 0..2 {
        for d in 0..2 {
            // L1: +<delta v^P + delta u^P, (sigma n) . P_n>
            let cons_n = trac_n.comp(d) * nsh[k];
            resid[12 + 2 * k + d] += cons_n * w;
            resid[16 + 2 * k + d] += cons_n * w;
            // L3 penalty normal: -<delta v^P + delta u^P, .>
            // The seepage factor phi scales the poro-velocity test pairing the
            // same way it scales the jump.
            let pen = jump_n.comp(d) * (penalty_n * nsh[k]);
            resid[12 + 2 * k + d] -= pen * qp.phi;
            resid[16 + 2 * k + d] -= pen * (1.0 - qp.phi);
            // L4 tangential consistency: +<delta u^P, (sigma n) . P_t>
            resid[16 + 2 * k + d] += trac_t.comp(d) * (nsh[k] * w);
            // L6 tangential penalty: -<delta u^P, .>
            resid[16 + 2 * k + d] -= bj.comp(d) * (coef_pen_t * nsh[k] * w);
        }
    }
    // Fluid rows.
    for i in 0..4 {
        for d in 0..2 {
            let mut val = -traction.comp(d) * tr.n[i]; // L1 + L4 combined: -<delta v^F, sigma n>
            // L2 adjoint normal viscous part.
            val += eps_test_n_dot(tr.dn[i], d, n, jump_n) * (2.0 * mu);
            // L3 penalty normal.
            val += jump_n.comp(d) * (penalty_n * tr.n[i]);
            // L5 adjoint tangential.
            val += eps_test_n_dot(tr.dn[i], d, n, bj) * (2.0 * mu * coef_adj_t);
            // L6 penalty tangential.
            val += bj.comp(d) * (coef_pen_t * tr.n[i]);
            resid[2 * i + d] += val * w;
        }
        // L2 adjoint pressure part: -<delta p n, jump_n>.
        resid[8 + i] -= jn_scalar * (tr.n[i] * w);
    }
}

/// Assemble the Nitsche FPI terms over the cached segments.
#[allow(clippy::too_many_arguments)]
pub fn assemble_fpi(
    segments: &[CoupledSegment],
    fluid_meshes: &[&Mesh2D],
    ids: &FieldIds,
    map: &DofMap,
    x_new: &[f64],
    x_old: &[f64],
    w_old: &[f64],
    mu: f64,
    params: &NitscheParams,
    th: &ThetaCtx,
    asm: &mut Assembly,
) {
    let (pv, pu, pp) = match ids.poro {
        Some(t) => t,
        None => return,
    };
    for seg in segments {
        if seg.other != OtherSide::Poro {
            continue;
        }
        let (fv, fp) = ids.fluids[seg.fluid_dom];
        let mesh = fluid_meshes[seg.fluid_dom];
        let coords = mesh.cell_coords(seg.cell);
        let nodes = mesh.cells[seg.cell];
        let penalty_n = seg.phi_v / (params.gamma_n * seg.h_e);
        for qp in &seg.qps {
            let mut rows = [0usize; 22];
            for i in 0..4 {
                rows[2 * i] = map.index(fv, nodes[i], 0);
                rows[2 * i + 1] = map.index(fv, nodes[i], 1);
                rows[8 + i] = map.index(fp, nodes[i], 0);
            }
            for (k, node) in [qp.na, qp.nb].into_iter().enumerate() {
                rows[12 + 2 * k] = map.index(pv, node, 0);
                rows[12 + 2 * k + 1] = map.index(pv, node, 1);
                rows[16 + 2 * k] = map.index(pu, node, 0);
                rows[16 + 2 * k + 1] = map.index(pu, node, 1);
                rows[20 + k] = map.index(pp, node, 0);
            }
            let mut uo = [Vec2::zero(); 2];
            let mut wo = [Vec2::zero(); 2];
            for k in 0..2 {
                uo[k] = Vec2::new(x_old[rows[16 + 2 * k]], x_old[rows[16 + 2 * k + 1]]);
                wo[k] = Vec2::new(w_old[rows[16 + 2 * k]], w_old[rows[16 + 2 * k + 1]]);
            }
            if asm.wants_tangent() {
                let mut vf = [Vec2::<DualN<22>>::zero(); 4];
                let mut pf = [DualN::<22>::constant(0.0); 4];
                let mut vp = [Vec2::<DualN<22>>::zero(); 2];
                let mut up = [Vec2::<DualN<22>>::zero(); 2];
                for i in 0..4 {
                    vf[i].x = DualN::variable(x_new[rows[2 * i]], 2 * i);
                    vf[i].y = DualN::variable(x_new[rows[2 * i + 1]], 2 * i + 1);
                    pf[i] = DualN::variable(x_new[rows[8 + i]], 8 + i);
                }
                for k in 0..2 {
                    vp[k].x = DualN::variable(x_new[rows[12 + 2 * k]], 12 + 2 * k);
                    vp[k].y = DualN::variable(x_new[rows[12 + 2 * k + 1]], 12 + 2 * k + 1);
                    up[k].x = DualN::variable(x_new[rows[16 + 2 * k]], 16 + 2 * k);
                    up[k].y = DualN::variable(x_new[rows[16 + 2 * k + 1]], 16 + 2 * k + 1);
                }
                let mut local = [DualN::<22>::constant(0.0); 22];
                fpi_qp_kernel(
                    &coords, &vf, &pf, &vp, &up, &uo, &wo, qp, mu, seg.kappa, penalty_n,
                    params.gamma_t, seg.h_e, params.saffman, th, &mut local,
                );
                asm.scatter_dual(&rows, &rows, &local);
            } else {
                let mut vf = [Vec2::<f64>::zero(); 4];
                let mut pf = [0.0f64; 4];
                let mut vp = [Vec2::<f64>::zero(); 2];
                let mut up = [Vec2::<f64>::zero(); 2];
                for i in 0..4 {
                    vf[i] = Vec2::new(x_new[rows[2 * i]], x_new[rows[2 * i + 1]]);
                    pf[i] = x_new[rows[8 + i]];
                }
                for k in 0..2 {
                    vp[k] = Vec2::new(x_new[rows[12 + 2 * k]], x_new[rows[12 + 2 * k + 1]]);
                    up[k] = Vec2::new(x_new[rows[16 + 2 * k]], x_new[rows[16 + 2 * k + 1]]);
                }
                let mut local = [0.0f64; 22];
                fpi_qp_kernel(
                    &coords, &vf, &pf, &vp, &up, &uo, &wo, qp, mu, seg.kappa, penalty_n,
                    params.gamma_t, seg.h_e, params.saffman, th, &mut local,
                );
                asm.scatter_f64(&rows, &local);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Contact-interface fluid mass balance (Nitsche)
// ---------------------------------------------------------------------------

/// A poroelastic boundary edge under the contact fluid-mass treatment, with
/// frozen current-configuration geometry.
#[derive(Clone, Debug)]
pub struct ContactFluidEdge {
    /// Global poro mesh nodes in edge direction.
    pub na: usize,
    pub nb: usize,
    /// Frozen current edge length.
    pub len: f64,
    /// Frozen outward unit normal of the poro domain.
    pub normal: Vec2<f64>,
    /// Frozen interface porosity.
    pub phi: f64,
}

/// Kernel at one quadrature point; locals: poro v (0..4), u (4..8), p (8..10).
#[allow(clippy::too_many_arguments)]
fn contact_fluid_qp_kernel<S: Scalar>(
    v_p: &[Vec2<S>; 2],
    u_p: &[Vec2<S>; 2],
    p_p: &[S; 2],
    u_old: &[Vec2<f64>; 2],
    w_old: &[Vec2<f64>; 2],
    s: f64,
    w: f64,
    normal: Vec2<f64>,
    phi: f64,
    inv_gamma_p: f64,
    th: &ThetaCtx,
    resid: &mut [S; 10],
) {
    let nsh = [1.0 - s, s];
    let mut v = Vec2::<S>::zero();
    let mut udot = Vec2::<S>::zero();
    let mut p = S::from_f64(0.0);
    for k in 0..2 {
        v += v_p[k].scale(S::from_f64(nsh[k]));
        let w_new = th.velocity_vec(u_p[k], u_old[k], w_old[k]);
        udot += w_new.scale(S::from_f64(nsh[k]));
        p += p_p[k] * nsh[k];
    }
    let rel_n = (v - udot).dot(lift_vec2(normal));
    for k in 0..2 {
        for d in 0..2 {
            // consistency <delta v^P, p n> plus penalty (1/gamma_P) terms with
            // (delta v^P - delta u^P) testing.
            let mut val = p * (normal.comp(d) * nsh[k]);
            val += rel_n * (inv_gamma_p * normal.comp(d) * nsh[k]);
            resid[2 * k + d] += val * w;
            resid[4 + 2 * k + d] -= rel_n * (inv_gamma_p * normal.comp(d) * nsh[k]) * w;
        }
        // adjoint: -<delta p, phi (v - udot) . n>
        resid[8 + k] -= rel_n * (phi * nsh[k] * w);
    }
}

/// Assemble the fluid mass-balance Nitsche terms on contact-side edges.
#[allow(clippy::too_many_arguments)]
pub fn assemble_contact_fluid(
    edges: &[ContactFluidEdge],
    ids: &FieldIds,
    map: &DofMap,
    x_new: &[f64],
    x_old: &[f64],
    w_old: &[f64],
    params: &NitscheParams,
    th: &ThetaCtx,
    asm: &mut Assembly,
) {
    let (pv, pu, pp) = match ids.poro {
        Some(t) => t,
        None => return,
    };
    let inv_gamma_p = 1.0 / params.gamma_p;
    let (gp, gw) = crate::math::gauss_1d(2);
    for edge in edges {
        let mut rows = [0usize; 10];
        for (k, node) in [edge.na, edge.nb].into_iter().enumerate() {
            rows[2 * k] = map.index(pv, node, 0);
            rows[2 * k + 1] = map.index(pv, node, 1);
            rows[4 + 2 * k] = map.index(pu, node, 0);
            rows[4 + 2 * k + 1] = map.index(pu, node, 1);
            rows[8 + k] = map.index(pp, node, 0);
        }
        let mut uo = [Vec2::zero(); 2];
        let mut wo = [Vec2::zero(); 2];
        for k in 0..2 {
            uo[k] = Vec2::new(x_old[rows[4 + 2 * k]], x_old[rows[4 + 2 * k + 1]]);
            wo[k] = Vec2::new(w_old[rows[4 + 2 * k]], w_old[rows[4 + 2 * k + 1]]);
        }
        for (q, &xi) in gp.iter().enumerate() {
            let s = 0.5 * (xi + 1.0);
            let w = gw[q] * 0.5 * edge.len;
            if asm.wants_tangent() {
                let mut vp = [Vec2::<DualN<10>>::zero(); 2];
                let mut up = [Vec2::<DualN<10>>::zero(); 2];
                let mut ppv = [DualN::<10>::constant(0.0); 2];
                for k in 0..2 {
                    vp[k].x = DualN::variable(x_new[rows[2 * k]], 2 * k);
                    vp[k].y = DualN::variable(x_new[rows[2 * k + 1]], 2 * k + 1);
                    up[k].x = DualN::variable(x_new[rows[4 + 2 * k]], 4 + 2 * k);
                    up[k].y = DualN::variable(x_new[rows[4 + 2 * k + 1]], 4 + 2 * k + 1);
                    ppv[k] = DualN::variable(x_new[rows[8 + k]], 8 + k);
                }
                let mut local = [DualN::<10>::constant(0.0); 10];
                contact_fluid_qp_kernel(
                    &vp, &up, &ppv, &uo, &wo, s, w, edge.normal, edge.phi, inv_gamma_p, th,
                    &mut local,
                );
                asm.scatter_dual(&rows, &rows, &local);
            } else {
                let mut vp = [Vec2::<f64>::zero(); 2];
                let mut up = [Vec2::<f64>::zero(); 2];
                let mut ppv = [0.0f64; 2];
                for k in 0..2 {
                    vp[k] = Vec2::new(x_new[rows[2 * k]], x_new[rows[2 * k + 1]]);
                    up[k] = Vec2::new(x_new[rows[4 + 2 * k]], x_new[rows[4 + 2 * k + 1]]);
                    ppv[k] = x_new[rows[8 + k]];
                }
                let mut local = [0.0f64; 10];
                contact_fluid_qp_kernel(
                    &vp, &up, &ppv, &uo, &wo, s, w, edge.normal, edge.phi, inv_gamma_p, th,
                    &mut local,
                );
                asm.scatter_f64(&rows, &local);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Mortar contact
// ---------------------------------------------------------------------------

/// Per contact node state used by the active-set logic and diagnostics.
#[derive(Clone, Debug)]
pub struct ContactNodeState {
    /// Poro mesh node id.
    pub node: usize,
    pub lambda: Vec2<f64>,
    /// Mortar-weighted gap.
    pub gap: f64,
    /// Nodal fluid normal force.
    pub f_n: f64,
    /// Smoothed unit normal.
    pub n_smooth: Vec2<f64>,
    pub active: bool,
    pub c_n: f64,
}

/// Frozen mortar geometry: potential contact edges of the poro interface with
/// quadrature, smoothed normals and solid-side pairings.
#[derive(Clone, Debug, Default)]
pub struct MortarData {
    /// Lambda-carrying poro mesh nodes (interface nodes, sorted).
    pub nodes: Vec<usize>,
    /// Smoothed unit normals per node (aligned with `nodes`).
    pub normals: Vec<Vec2<f64>>,
    /// Denominator integral of N_j over the whole potential interface.
    pub denom: Vec<f64>,
    pub edges: Vec<MortarEdge>,
    pub c_n: f64,
}

#[derive(Clone, Debug)]
pub struct MortarEdge {
    /// Poro mesh (cell, local edge) and its global nodes in edge direction.
    pub cell: usize,
    pub edge: usize,
    pub na: usize,
    pub nb: usize,
    /// Frozen current length and outward normal.
    pub len: f64,
    pub normal: Vec2<f64>,
    pub qps: Vec<MortarQp>,
}

#[derive(Clone, Copy, Debug)]
pub struct MortarQp {
    /// Edge parameter in [0,1] and frozen weight (length measure included).
    pub s: f64,
    pub w: f64,
    /// Interpolated smoothed normal (unit, frozen).
    pub normal: Vec2<f64>,
    /// Frozen projection onto the solid contact surface: body, nodes, param.
    pub pair: Option<(usize, usize, usize, f64)>,
}

impl MortarData {
    pub fn node_index(&self, node: usize) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }
}

/// Smoothed nodal normals: normalized average of adjacent edge outward
/// normals on the current configuration of an interface polyline described by
/// consecutive edges (na, nb, normal).
pub fn smoothed_normals(
    nodes: &[usize],
    edges: &[(usize, usize, Vec2<f64>)],
) -> Result<Vec<Vec2<f64>>> {
    let mut sums: std::collections::BTreeMap<usize, Vec2<f64>> = Default::default();
    for &(na, nb, n) in edges {
        *sums.entry(na).or_insert(Vec2::zero()) += n;
        *sums.entry(nb).or_insert(Vec2::zero()) += n;
    }
    nodes
        .iter()
        .map(|node| {
            let s = sums.get(node).copied().unwrap_or(Vec2::zero());
            s.normalized().ok_or_else(|| {
                Error::DegenerateGeometry(format!(
                    "zero averaged normal at interface node {node}"
                ))
            })
        })
        .collect()
}

/// Complementarity function C = (lambda_n - f_n) - max(0, (lambda_n - f_n) - c_n g).
pub fn complementarity(lambda_n: f64, f_n: f64, g: f64, c_n: f64) -> f64 {
    let a = lambda_n - f_n;
    a - (a - c_n * g).max(0.0)
}

/// Mortar-weighted gaps at the current displacement state. Entries align with
/// `mortar.nodes`; non-projecting quadrature points contribute nothing.
pub fn weighted_gaps(
    mortar: &MortarData,
    poro_mesh: &Mesh2D,
    solid_meshes: &[&Mesh2D],
    u_poro: impl Fn(usize) -> Vec2<f64>,
    u_solid: impl Fn(usize, usize) -> Vec2<f64>,
) -> Vec<f64> {
    let mut gaps = vec![0.0; mortar.nodes.len()];
    for edge in &mortar.edges {
        for qp in &edge.qps {
            let Some((body, sa, sb, t)) = qp.pair else {
                continue;
            };
            let nsh = [1.0 - qp.s, qp.s];
            let xp = (poro_mesh.nodes[edge.na] + u_poro(edge.na)).scale(nsh[0])
                + (poro_mesh.nodes[edge.nb] + u_poro(edge.nb)).scale(nsh[1]);
            let sm = solid_meshes[body];
            let xs = (sm.nodes[sa] + u_solid(body, sa)).scale(1.0 - t)
                + (sm.nodes[sb] + u_solid(body, sb)).scale(t);
            let g = (xs - xp).dot(qp.normal);
            for (k, node) in [edge.na, edge.nb].into_iter().enumerate() {
                if let Some(j) = mortar.node_index(node) {
                    gaps[j] += qp.w * nsh[k] * g;
                }
            }
        }
    }
    gaps
}

/// Nodal fluid normal forces f_n^j from the pore pressure trace on the
/// contact-side edges: numerator over the active contact part, denominator
/// the partition integral over the whole potential interface.
pub fn nodal_fluid_forces(
    mortar: &MortarData,
    contact_class: &[bool],
    p_poro: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let mut f = vec![0.0; mortar.nodes.len()];
    for (edge, is_contact) in mortar.edges.iter().zip(contact_class) {
        if !is_contact {
            continue;
        }
        for qp in &edge.qps {
            let nsh = [1.0 - qp.s, qp.s];
            let p = p_poro(edge.na) * nsh[0] + p_poro(edge.nb) * nsh[1];
            for (k, node) in [edge.na, edge.nb].into_iter().enumerate() {
                if let Some(j) = mortar.node_index(node) {
                    let ndotn = edge.normal.dot(mortar.normals[j]);
                    f[j] += qp.w * nsh[k] * p * ndotn;
                }
            }
        }
    }
    for (j, v) in f.iter_mut().enumerate() {
        let den = mortar.denom[j];
        if den > 1e-300 {
            *v /= den;
        } else {
            *v = 0.0;
        }
    }
    f
}

/// Active-set update: node active iff lambda_n - f_n - c_n g >= 0 (ties
/// active). Returns the new states and whether the set changed.
pub fn update_active_set(
    mortar: &MortarData,
    gaps: &[f64],
    f_n: &[f64],
    lambda: impl Fn(usize) -> Vec2<f64>,
    previous: Option<&[ContactNodeState]>,
) -> (Vec<ContactNodeState>, bool) {
    let mut changed = false;
    let mut out = Vec::with_capacity(mortar.nodes.len());
    for (j, &node) in mortar.nodes.iter().enumerate() {
        let lam = lambda(j);
        let lam_n = lam.dot(mortar.normals[j]);
        let active = lam_n - f_n[j] - mortar.c_n * gaps[j] >= 0.0;
        if let Some(prev) = previous {
            if prev[j].active != active {
                changed = true;
            }
        } else if active {
            changed = true;
        }
        out.push(ContactNodeState {
            node,
            lambda: lam,
            gap: gaps[j],
            f_n: f_n[j],
            n_smooth: mortar.normals[j],
            active,
            c_n: mortar.c_n,
        });
    }
    (out, changed)
}

/// Contact-side classification of the mortar edges: an edge is contact-side
/// iff both endpoint nodes are active, or it was reassigned by island
/// filtering. Returns one flag per mortar edge.
pub fn classify_contact_edges(
    mortar: &MortarData,
    states: &[ContactNodeState],
    island_edges: &std::collections::BTreeSet<(usize, usize)>,
) -> Vec<bool> {
    mortar
        .edges
        .iter()
        .map(|e| {
            let key = (e.na.min(e.nb), e.na.max(e.nb));
            if island_edges.contains(&key) {
                return true;
            }
            let ja = mortar.node_index(e.na);
            let jb = mortar.node_index(e.nb);
            match (ja, jb) {
                (Some(a), Some(b)) => states[a].active && states[b].active,
                _ => false,
            }
        })
        .collect()
}

/// Interface partition bookkeeping per the KKT classification.
#[derive(Clone, Debug, Default)]
pub struct InterfacePartition {
    pub n_fs_segments: usize,
    pub n_fp_segments: usize,
    pub n_contact_edges: usize,
}

/// Coefficients of the (linear) nodal fluid force in the pore pressure dofs,
/// per lambda node: f_n^j = sum_k coeff * p_k. Frozen with the geometry and
/// the contact classification.
pub fn fluid_force_coefficients(
    mortar: &MortarData,
    contact_class: &[bool],
) -> Vec<Vec<(usize, f64)>> {
    let mut coeffs: Vec<std::collections::BTreeMap<usize, f64>> =
        vec![Default::default(); mortar.nodes.len()];
    for (edge, is_contact) in mortar.edges.iter().zip(contact_class) {
        if !is_contact {
            continue;
        }
        for qp in &edge.qps {
            let nsh = [1.0 - qp.s, qp.s];
            for (k, node) in [edge.na, edge.nb].into_iter().enumerate() {
                if let Some(j) = mortar.node_index(node) {
                    let ndotn = edge.normal.dot(mortar.normals[j]);
                    for (m, pnode) in [edge.na, edge.nb].into_iter().enumerate() {
                        *coeffs[j].entry(pnode).or_insert(0.0) += qp.w * nsh[k] * nsh[m] * ndotn;
                    }
                }
            }
        }
    }
    coeffs
        .into_iter()
        .enumerate()
        .map(|(j, m)| {
            let den = mortar.denom[j];
            if den > 1e-300 {
                m.into_iter().map(|(k, v)| (k, v / den)).collect()
            } else {
                Vec::new()
            }
        })
        .collect()
}

/// Assemble the mortar contact residual: multiplier forces into the
/// displacement rows, weighted-gap rows for active multipliers, tangential
/// constraints, and lambda = f(p) rows for inactive multipliers.
#[allow(clippy::too_many_arguments)]
pub fn assemble_contact(
    mortar: &MortarData,
    states: &[ContactNodeState],
    fn_coeffs: &[Vec<(usize, f64)>],
    poro_mesh: &Mesh2D,
    solid_meshes: &[&Mesh2D],
    ids: &FieldIds,
    map: &DofMap,
    x_new: &[f64],
    asm: &mut Assembly,
) {
    let Some((_, pu, pp)) = ids.poro else { return };
    let Some(flam) = ids.lambda else { return };
    // Segment loop: forces and gap rows.
    for edge in &mortar.edges {
        for qp in &edge.qps {
            let Some((body, sa, sb, t)) = qp.pair else {
                continue;
            };
            let fu_s = ids.solids[body];
            let nsh = [1.0 - qp.s, qp.s];
            let ssh = [1.0 - t, t];
            for (jloc, node_j) in [edge.na, edge.nb].into_iter().enumerate() {
                let Some(j) = mortar.node_index(node_j) else {
                    continue;
                };
                if !states[j].active {
                    continue;
                }
                let psi = nsh[jloc];
                // Force terms: +<delta u^P, lambda> - <delta u^S, lambda>.
                for d in 0..2 {
                    let lcol = map.index(flam, j, d);
                    let lam_d = x_new[lcol];
                    for (k, node_i) in [edge.na, edge.nb].into_iter().enumerate() {
                        let row = map.index(pu, node_i, d);
                        let c = qp.w * nsh[k] * psi;
                        asm.add(row, c * lam_d);
                        asm.add_jac(row, lcol, c);
                    }
                    for (k, node_s) in [sa, sb].into_iter().enumerate() {
                        let row = map.index(fu_s, node_s, d);
                        let c = -qp.w * ssh[k] * psi;
                        asm.add(row, c * lam_d);
                        asm.add_jac(row, lcol, c);
                    }
                }
                // Gap row (normal equation of the active multiplier).
                let row = map.index(flam, j, 0);
                let mut xp = Vec2::zero();
                let mut xs = Vec2::zero();
                for (k, node_i) in [edge.na, edge.nb].into_iter().enumerate() {
                    let upx = x_new[map.index(pu, node_i, 0)];
                    let upy = x_new[map.index(pu, node_i, 1)];
                    xp += (poro_mesh.nodes[node_i] + Vec2::new(upx, upy)).scale(nsh[k]);
                }
                let sm = solid_meshes[body];
                for (k, node_s) in [sa, sb].into_iter().enumerate() {
                    let usx = x_new[map.index(fu_s, node_s, 0)];
                    let usy = x_new[map.index(fu_s, node_s, 1)];
                    xs += (sm.nodes[node_s] + Vec2::new(usx, usy)).scale(ssh[k]);
                }
                let g = (xs - xp).dot(qp.normal);
                asm.add(row, qp.w * psi * g);
                for d in 0..2 {
                    for (k, node_s) in [sa, sb].into_iter().enumerate() {
                        asm.add_jac(
                            row,
                            map.index(fu_s, node_s, d),
                            qp.w * psi * ssh[k] * qp.normal.comp(d),
                        );
                    }
                    for (k, node_i) in [edge.na, edge.nb].into_iter().enumerate() {
                        asm.add_jac(
                            row,
                            map.index(pu, node_i, d),
                            -qp.w * psi * nsh[k] * qp.normal.comp(d),
                        );
                    }
                }
            }
        }
    }
    // Nodal multiplier rows: tangential constraint for all nodes, and the
    // lambda = f(p) identity for inactive nodes.
    for (j, st) in states.iter().enumerate() {
        let n = mortar.normals[j];
        let t = n.perp();
        let row_t = map.index(flam, j, 1);
        let lx = map.index(flam, j, 0);
        let ly = map.index(flam, j, 1);
        let lam = Vec2::new(x_new[lx], x_new[ly]);
        asm.add(row_t, lam.dot(t));
        asm.add_jac(row_t, lx, t.x);
        asm.add_jac(row_t, ly, t.y);
        if !st.active {
            let row_n = map.index(flam, j, 0);
            let mut val = lam.dot(n);
            for &(pnode, c) in &fn_coeffs[j] {
                val -= c * x_new[map.index(pp, pnode, 0)];
            }
            asm.add(row_n, val);
            asm.add_jac(row_n, lx, n.x);
            asm.add_jac(row_n, ly, n.y);
            for &(pnode, c) in &fn_coeffs[j] {
                asm.add_jac(row_n, map.index(pp, pnode, 0), -c);
            }
        }
    }
}
