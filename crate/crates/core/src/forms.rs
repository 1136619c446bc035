//! Semi-discrete residuals and consistent tangents of the three domain weak
//! forms: nonlinear elastodynamics, stabilized incompressible Navier-Stokes,
//! and the finite-deformation poroelastic layer.
//!
//! Each domain has a quadrature-agnostic element kernel generic over the
//! scalar type and a driver that gathers unknowns, runs the kernel once with
//! `f64` (residual only) or once with dual numbers (residual + exact element
//! Jacobian), and scatters into the global [`Assembly`].
//!
//! Time discretization is one-step-theta: rate terms are difference quotients
//! over the step, spatial terms are theta-weighted between the new and old
//! states, interface and stabilization terms are assembled fully implicit.

use crate::constitutive::{
    kozeny_carman_generic, neo_hooke_pk2_generic, poro_pk2_generic, porosity_lifted, PoroMaterial,
    SolidMaterial,
};
use crate::dual::DualN;
use crate::error::{Error, Result};
use crate::math::{gauss_1d, gauss_2x2, Mat2, Scalar, Vec2};
use crate::mesh::{
    isoparametric_map, physical_gradients, rect_inverse_map, shape_eval, DofMap, FieldId, Mesh2D,
    EDGE_NODES,
};

// ---------------------------------------------------------------------------
// Global assembly target
// ---------------------------------------------------------------------------

/// Residual vector plus optional Jacobian triplets.
pub struct Assembly {
    pub n: usize,
    pub residual: Vec<f64>,
    pub triplets: Option<Vec<(usize, usize, f64)>>,
}

impl Assembly {
    pub fn residual_only(n: usize) -> Self {
        Self {
            n,
            residual: vec![0.0; n],
            triplets: None,
        }
    }

    pub fn with_tangent(n: usize) -> Self {
        Self {
            n,
            residual: vec![0.0; n],
            triplets: Some(Vec::new()),
        }
    }

    #[inline]
    pub fn wants_tangent(&self) -> bool {
        self.triplets.is_some()
    }

    #[inline]
    pub fn add(&mut self, row: usize, v: f64) {
        self.residual[row] += v;
    }

    #[inline]
    pub fn add_jac(&mut self, row: usize, col: usize, v: f64) {
        if v != 0.0 {
            if let Some(t) = self.triplets.as_mut() {
                t.push((row, col, v));
            }
        }
    }

    /// Scatter a dual-valued local residual: values into the residual, the
    /// gradient entries into the triplets under the local->global column map.
    pub fn scatter_dual<const N: usize>(
        &mut self,
        rows: &[usize],
        cols: &[usize; N],
        local: &[DualN<N>],
    ) {
        for (k, r) in rows.iter().enumerate() {
            self.residual[*r] += local[k].v;
            if let Some(t) = self.triplets.as_mut() {
                for j in 0..N {
                    let v = local[k].d[j];
                    if v != 0.0 {
                        t.push((*r, cols[j], v));
                    }
                }
            }
        }
    }

    pub fn scatter_f64(&mut self, rows: &[usize], local: &[f64]) {
        for (k, r) in rows.iter().enumerate() {
            self.residual[*r] += local[k];
        }
    }
}

/// One-step-theta context.
#[derive(Clone, Copy, Debug)]
pub struct ThetaCtx {
    pub theta: f64,
    pub dt: f64,
}

impl ThetaCtx {
    /// New-step rate of a first-order quantity: (x_{n+1} - x_n) / dt.
    #[inline]
    pub fn rate<S: Scalar>(&self, new: S, old: f64) -> S {
        (new - old) * (1.0 / self.dt)
    }

    /// New-step velocity of a displacement-like quantity from the theta
    /// update: w_{n+1} = (u_{n+1} - u_n)/(theta dt) - (1-theta)/theta w_n.
    #[inline]
    pub fn velocity<S: Scalar>(&self, u_new: S, u_old: f64, w_old: f64) -> S {
        (u_new - u_old) * (1.0 / (self.theta * self.dt))
            - (1.0 - self.theta) / self.theta * w_old
    }

    #[inline]
    pub fn velocity_vec<S: Scalar>(&self, u_new: Vec2<S>, u_old: Vec2<f64>, w_old: Vec2<f64>) -> Vec2<S> {
        Vec2::new(
            self.velocity(u_new.x, u_old.x, w_old.x),
            self.velocity(u_new.y, u_old.y, w_old.y),
        )
    }
}

#[inline]
pub fn lift_vec2<S: Scalar>(v: Vec2<f64>) -> Vec2<S> {
    Vec2::new(S::from_f64(v.x), S::from_f64(v.y))
}

/// Precomputed quadrature-point geometry shared by the kernels.
#[derive(Clone, Debug)]
pub struct QpGeom {
    /// Shape values and (material/mesh) physical gradients.
    pub n: [f64; 4],
    pub dn: [Vec2<f64>; 4],
    /// Integration weight including the map determinant.
    pub w: f64,
    /// Physical location (used for masking and diagnostics).
    pub x: Vec2<f64>,
}

/// Reference 2x2 Gauss geometry for a (possibly deformed) quadrilateral.
pub fn full_cell_geometry(coords: &[Vec2<f64>; 4], cell: usize) -> Result<Vec<QpGeom>> {
    let mut out = Vec::with_capacity(4);
    for (xi, eta, wq) in gauss_2x2() {
        let (x, jac, det) = isoparametric_map(coords, xi, eta).map_err(|_| {
            Error::InvertedElement {
                cell,
                det: 0.0,
            }
        })?;
        let (n, dn_ref) = shape_eval(xi, eta);
        let dn = physical_gradients(&jac, &dn_ref);
        out.push(QpGeom {
            n,
            dn,
            w: wq * det,
            x,
        });
    }
    Ok(out)
}

/// Geometry from a physical quadrature rule on an axis-aligned rectangular
/// cell (cut-cell path).
pub fn physical_rule_geometry(coords: &[Vec2<f64>; 4], rule: &[(Vec2<f64>, f64)]) -> Vec<QpGeom> {
    let jac = Mat2::new(
        0.5 * (coords[2].x - coords[0].x),
        0.0,
        0.0,
        0.5 * (coords[2].y - coords[0].y),
    );
    rule.iter()
        .map(|&(x, w)| {
            let (xi, eta) = rect_inverse_map(coords, x);
            let (n, dn_ref) = shape_eval(xi, eta);
            let dn = physical_gradients(&jac, &dn_ref);
            QpGeom { n, dn, w, x }
        })
        .collect()
}

pub fn cell_diameter(coords: &[Vec2<f64>; 4]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..4 {
        for j in (i + 1)..4 {
            d = d.max(coords[i].dist(coords[j]));
        }
    }
    d
}

// ---------------------------------------------------------------------------
// Structure
// ---------------------------------------------------------------------------

/// Nonlinear elastodynamics element kernel. Rows 2i+d.
#[allow(clippy::too_many_arguments)]
pub fn structure_cell_kernel<S: Scalar>(
    qps: &[QpGeom],
    u_new: &[Vec2<S>; 4],
    u_old: &[Vec2<f64>; 4],
    w_old: &[Vec2<f64>; 4],
    mat: &SolidMaterial,
    body: Vec2<f64>,
    th: &ThetaCtx,
    dynamic: bool,
    resid: &mut [S; 8],
) {
    let (c, beta) = (mat.c_coef(), mat.beta_coef());
    for qp in qps {
        // First Piola-Kirchhoff stress at the new state.
        let grad_u = crate::mesh::grad_vec2(&qp.dn, u_new);
        let f = Mat2::<S>::identity().add(&grad_u);
        let s = neo_hooke_pk2_generic(&f, c, beta);
        let pk1 = f.matmul(&s);
        // Old-state stress for theta < 1.
        let pk1_old = if th.theta < 1.0 {
            let grad_old = crate::mesh::grad_vec2(&qp.dn, u_old);
            let f_old = Mat2::<f64>::identity().add(&grad_old);
            f_old.matmul(&neo_hooke_pk2_generic(&f_old, c, beta))
        } else {
            Mat2::zero()
        };
        for i in 0..4 {
            for d in 0..2 {
                let mut val = S::from_f64(0.0);
                // theta-weighted internal forces.
                let mut internal = pk1.a[d][0] * qp.dn[i].x + pk1.a[d][1] * qp.dn[i].y;
                internal = internal * th.theta;
                if th.theta < 1.0 {
                    let old = pk1_old.a[d][0] * qp.dn[i].x + pk1_old.a[d][1] * qp.dn[i].y;
                    internal = internal + old * (1.0 - th.theta);
                }
                val += internal;
                // Body force (theta-weighted trivially; constant in time here).
                val -= S::from_f64(qp.n[i] * mat.rho0 * body.comp(d));
                if dynamic {
                    // Acceleration from the theta velocity update.
                    let u_nd = u_new[i].comp(d);
                    let w_new = th.velocity(u_nd, u_old[i].comp(d), w_old[i].comp(d));
                    let acc = (w_new - w_old[i].comp(d)) * (1.0 / th.dt);
                    // Consistent mass: interpolate nodal accelerations.
                    // (acc per node; row uses N_i * rho0 * acc interpolated)
                    // We fold the interpolation below.
                    let _ = acc;
                }
                val = val * qp.w;
                resid[2 * i + d] += val;
            }
        }
        if dynamic {
            // Consistent mass term: rho0 * N_i * acc(x_qp).
            let mut acc_qp = Vec2::<S>::zero();
            for k in 0..4 {
                let w_new = th.velocity_vec(u_new[k], u_old[k], w_old[k]);
                let acc_k = (w_new - lift_vec2(w_old[k])).scale(S::from_f64(1.0 / th.dt));
                acc_qp += acc_k.scale(S::from_f64(qp.n[k]));
            }
            for i in 0..4 {
                for d in 0..2 {
                    resid[2 * i + d] += acc_qp.comp(d) * (qp.n[i] * mat.rho0 * qp.w);
                }
            }
        }
    }
}

/// Structural domain descriptor.
#[derive(Clone, Debug)]
pub struct SolidDomain {
    pub mesh: Mesh2D,
    pub mat: SolidMaterial,
    pub fu: FieldId,
    pub dynamic: bool,
    pub body_force: Vec2<f64>,
    /// (boundary tag, load schedule index) pairs; tractions are first
    /// Piola-Kirchhoff (reference-configuration) values.
    pub neumann: Vec<(String, usize)>,
}

/// Assemble the structural residual/tangent. `loads` holds the
/// theta-weighted tractions per schedule index.
pub fn assemble_structure(
    dom: &SolidDomain,
    map: &DofMap,
    x_new: &[f64],
    x_old: &[f64],
    w_old: &[f64],
    loads: &[Vec2<f64>],
    th: &ThetaCtx,
    asm: &mut Assembly,
) -> Result<()> {
    let mesh = &dom.mesh;
    for c in 0..mesh.n_cells() {
        let coords = mesh.cell_coords(c);
        let qps = full_cell_geometry(&coords, c).map_err(|e| e.in_module("forms::structure"))?;
        let nodes = mesh.cells[c];
        let mut rows = [0usize; 8];
        let mut uo = [Vec2::zero(); 4];
        let mut wo = [Vec2::zero(); 4];
        for i in 0..4 {
            for d in 0..2 {
                rows[2 * i + d] = map.index(dom.fu, nodes[i], d);
            }
            uo[i] = Vec2::new(x_old[rows[2 * i]], x_old[rows[2 * i + 1]]);
            wo[i] = Vec2::new(w_old[rows[2 * i]], w_old[rows[2 * i + 1]]);
        }
        if asm.wants_tangent() {
            let mut un = [Vec2::<DualN<8>>::zero(); 4];
            for i in 0..4 {
                for d in 0..2 {
                    let g = rows[2 * i + d];
                    let dv = DualN::<8>::variable(x_new[g], 2 * i + d);
                    if d == 0 {
                        un[i].x = dv;
                    } else {
                        un[i].y = dv;
                    }
                }
            }
            let mut local = [DualN::<8>::constant(0.0); 8];
            structure_cell_kernel(&qps, &un, &uo, &wo, &dom.mat, dom.body_force, th, dom.dynamic, &mut local);
            asm.scatter_dual(&rows, &rows, &local);
        } else {
            let mut un = [Vec2::<f64>::zero(); 4];
            for i in 0..4 {
                un[i] = Vec2::new(x_new[rows[2 * i]], x_new[rows[2 * i + 1]]);
            }
            let mut local = [0.0f64; 8];
            structure_cell_kernel(&qps, &un, &uo, &wo, &dom.mat, dom.body_force, th, dom.dynamic, &mut local);
            asm.scatter_f64(&rows, &local);
        }
    }
    // Reference-configuration Neumann tractions.
    for (tag, load_idx) in &dom.neumann {
        let traction = loads[*load_idx];
        if traction.x == 0.0 && traction.y == 0.0 {
            continue;
        }
        for &(cell, e) in mesh.tagged(tag)? {
            let (a, b) = mesh.edge_nodes(cell, e);
            let len = mesh.nodes[a].dist(mesh.nodes[b]);
            // Linear shape functions: each node takes half the edge load.
            for node in [a, b] {
                for d in 0..2 {
                    let row = map.index(dom.fu, node, d);
                    asm.add(row, -0.5 * len * traction.comp(d));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Fluid
// ---------------------------------------------------------------------------

/// Residual-based stabilization scalars for one element.
#[derive(Clone, Copy, Debug, Default)]
pub struct StabilizationParams {
    pub tau_supg: f64,
    pub tau_pspg: f64,
    pub tau_lsic: f64,
}

/// tau = ((2 rho / dt)^2 + (2 rho |v| / h)^2 + (12 mu / h^2)^2)^(-1/2),
/// evaluated smoothly (|v| enters squared). An extra quadratic drag
/// coefficient (the Darcy term of the poroelastic momentum equation) can be
/// added for the layer's pressure stabilization.
fn tau_smooth<S: Scalar>(v2: S, rho: f64, mu: f64, dt: f64, h: f64, drag: S) -> S {
    let a = 2.0 * rho / dt;
    let b = 2.0 * rho / h;
    let c = 12.0 * mu / (h * h);
    let sum = v2 * (b * b) + (a * a + c * c) + drag * drag;
    S::from_f64(1.0) / sum.sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct FluidParams {
    pub rho: f64,
    pub mu: f64,
    pub include_convection: bool,
    pub supg: bool,
    pub pspg: bool,
    pub lsic: bool,
}

/// Navier-Stokes element kernel with SUPG/PSPG/grad-div stabilization.
/// Rows: v at 2i+d, p at 8+i.
#[allow(clippy::too_many_arguments)]
pub fn fluid_cell_kernel<S: Scalar>(
    qps: &[QpGeom],
    v_new: &[Vec2<S>; 4],
    p_new: &[S; 4],
    v_old: &[Vec2<f64>; 4],
    params: &FluidParams,
    body_const: Vec2<f64>,
    body_fn: Option<fn(Vec2<f64>) -> Vec2<f64>>,
    th: &ThetaCtx,
    h_elem: f64,
    transient: bool,
    resid: &mut [S; 12],
) {
    let rho = params.rho;
    let mu = params.mu;
    for qp in qps {
        // rho-scaled acceleration-type body force plus the raw source term.
        let force = match body_fn {
            Some(f) => body_const.scale(rho) + f(qp.x),
            None => body_const.scale(rho),
        };
        let v = crate::mesh::interp_vec2(&qp.n, v_new);
        let grad_v = crate::mesh::grad_vec2(&qp.dn, v_new);
        let mut p = S::from_f64(0.0);
        let mut grad_p = Vec2::<S>::zero();
        for i in 0..4 {
            p += p_new[i] * qp.n[i];
            grad_p += Vec2::new(p_new[i] * qp.dn[i].x, p_new[i] * qp.dn[i].y);
        }
        let div_v = grad_v.trace();
        let vdot = if transient {
            let vo = crate::mesh::interp_vec2(&qp.n, v_old);
            (v - lift_vec2(vo)).scale(S::from_f64(1.0 / th.dt))
        } else {
            Vec2::zero()
        };
        // Convection rho (v . grad) v.
        let conv = if params.include_convection {
            grad_v.mul_vec(v).scale(S::from_f64(rho))
        } else {
            Vec2::zero()
        };
        // Strong momentum residual (second derivatives of bilinears dropped).
        let r_m = Vec2::new(
            vdot.x * rho + conv.x + grad_p.x - force.x,
            vdot.y * rho + conv.y + grad_p.y - force.y,
        );
        // Stabilization scalars from the new state.
        let tau = tau_smooth(v.norm_sq(), rho, mu, th.dt, h_elem, S::from_f64(0.0));
        let tau_l = S::from_f64(h_elem * h_elem / 4.0) / tau;

        // Old spatial terms for theta 1 are skipped.
        let spatial_old = if th.theta < 1.0 {
            let vo = crate::mesh::interp_vec2(&qp.n, v_old);
            let grad_vo = crate::mesh::grad_vec2(&qp.dn, v_old);
            Some((vo, grad_vo))
        } else {
            None
        };

        for i in 0..4 {
            let ni = qp.n[i];
            let dni = qp.dn[i];
            for d in 0..2 {
                let mut val = vdot.comp(d) * (rho * ni);
                // theta-weighted Galerkin spatial terms at the new state.
                let mut sp = conv.comp(d) * ni;
                // viscous: mu dN_i/dx_l (dv_d/dx_l + dv_l/dx_d)
                let mut visc = S::from_f64(0.0);
                for l in 0..2 {
                    visc += (grad_v.a[d][l] + grad_v.a[l][d]) * dni.comp(l);
                }
                sp += visc * mu;
                sp -= p * dni.comp(d);
                sp -= S::from_f64(force.comp(d) * ni);
                val += sp * th.theta;
                if let Some((vo, grad_vo)) = spatial_old {
                    let mut old = 0.0;
                    if params.include_convection {
                        old += rho * (grad_vo.a[d][0] * vo.x + grad_vo.a[d][1] * vo.y) * ni;
                    }
                    // Old pressure is part of the new unknowns at t_n; the
                    // one-step-theta fluid form keeps pressure implicit, so
                    // only velocity terms are theta-averaged.
                    for l in 0..2 {
                        old += mu * dni.comp(l) * (grad_vo.a[d][l] + grad_vo.a[l][d]);
                    }
                    old -= force.comp(d) * ni;
                    val += S::from_f64(old * (1.0 - th.theta));
                }
                // SUPG and grad-div.
                if params.supg && params.include_convection {
                    let vdn = v.dot(Vec2::new(S::from_f64(dni.x), S::from_f64(dni.y)));
                    val += tau * vdn * r_m.comp(d) * rho;
                }
                if params.lsic {
                    val += tau_l * div_v * dni.comp(d);
                }
                resid[2 * i + d] += val * qp.w;
            }
            // Continuity row (fully implicit) plus PSPG.
            let mut cont = div_v * ni;
            if params.pspg {
                cont += (r_m.x * dni.x + r_m.y * dni.y) * tau;
            }
            resid[8 + i] += cont * qp.w;
        }
    }
}

/// Fluid domain descriptor. The mesh is Eulerian and fixed; `cut` data, when
/// present, restricts integration to the physical fluid region.
#[derive(Clone, Debug)]
pub struct FluidDomain {
    pub mesh: Mesh2D,
    pub fv: FieldId,
    pub fp: FieldId,
    pub params: FluidParams,
    pub body_force: Vec2<f64>,
    /// Optional space-dependent momentum source density f(x) (manufactured
    /// forcing); unlike `body_force` it is not scaled by the density.
    pub body_force_fn: Option<fn(Vec2<f64>) -> Vec2<f64>>,
    /// (boundary tag, load schedule index): prescribed Cauchy traction.
    pub neumann: Vec<(String, usize)>,
    /// Ghost-penalty constants (used with cut data).
    pub gamma_ghost_v: f64,
    pub gamma_ghost_p: f64,
}

/// Assemble a fluid domain. For cut domains, `cut` carries the per-cell
/// geometry and `neumann_mask` drops boundary quadrature points covered by
/// embedded bodies.
#[allow(clippy::too_many_arguments)]
pub fn assemble_fluid(
    dom: &FluidDomain,
    map: &DofMap,
    x_new: &[f64],
    x_old: &[f64],
    loads: &[Vec2<f64>],
    th: &ThetaCtx,
    cut: Option<&[crate::cutcell::CutCellData]>,
    neumann_mask: Option<&dyn Fn(Vec2<f64>) -> bool>,
    asm: &mut Assembly,
) -> Result<()> {
    let mesh = &dom.mesh;
    for c in 0..mesh.n_cells() {
        let coords = mesh.cell_coords(c);
        let qps: Vec<QpGeom> = match cut {
            None => full_cell_geometry(&coords, c)?,
            Some(data) => match data[c].status {
                crate::cutcell::CellStatus::Void => continue,
                crate::cutcell::CellStatus::Full => full_cell_geometry(&coords, c)?,
                crate::cutcell::CellStatus::Cut => {
                    let mut rule = Vec::new();
                    for piece in data[c].pieces.iter().filter(|p| p.live) {
                        rule.extend_from_slice(&piece.quad);
                    }
                    if rule.is_empty() {
                        return Err(Error::MissingCutRule { cell: c });
                    }
                    physical_rule_geometry(&coords, &rule)
                }
            },
        };
        let h = cell_diameter(&coords);
        let nodes = mesh.cells[c];
        let mut rows = [0usize; 12];
        for i in 0..4 {
            rows[2 * i] = map.index(dom.fv, nodes[i], 0);
            rows[2 * i + 1] = map.index(dom.fv, nodes[i], 1);
            rows[8 + i] = map.index(dom.fp, nodes[i], 0);
        }
        let mut vo = [Vec2::zero(); 4];
        for i in 0..4 {
            vo[i] = Vec2::new(x_old[rows[2 * i]], x_old[rows[2 * i + 1]]);
        }
        if asm.wants_tangent() {
            let mut vn = [Vec2::<DualN<12>>::zero(); 4];
            let mut pn = [DualN::<12>::constant(0.0); 4];
            for i in 0..4 {
                vn[i].x = DualN::variable(x_new[rows[2 * i]], 2 * i);
                vn[i].y = DualN::variable(x_new[rows[2 * i + 1]], 2 * i + 1);
                pn[i] = DualN::variable(x_new[rows[8 + i]], 8 + i);
            }
            let mut local = [DualN::<12>::constant(0.0); 12];
            fluid_cell_kernel(&qps, &vn, &pn, &vo, &dom.params, dom.body_force, dom.body_force_fn, th, h, true, &mut local);
            asm.scatter_dual(&rows, &rows, &local);
        } else {
            let mut vn = [Vec2::<f64>::zero(); 4];
            let mut pn = [0.0f64; 4];
            for i in 0..4 {
                vn[i] = Vec2::new(x_new[rows[2 * i]], x_new[rows[2 * i + 1]]);
                pn[i] = x_new[rows[8 + i]];
            }
            let mut local = [0.0f64; 12];
            fluid_cell_kernel(&qps, &vn, &pn, &vo, &dom.params, dom.body_force, dom.body_force_fn, th, h, true, &mut local);
            asm.scatter_f64(&rows, &local);
        }
    }
    // Boundary tractions on the fixed fluid mesh.
    for (tag, load_idx) in &dom.neumann {
        let traction = loads[*load_idx];
        if traction.x == 0.0 && traction.y == 0.0 {
            continue;
        }
        let (gp, gw) = gauss_1d(2);
        for &(cell, e) in mesh.tagged(tag)? {
            if let Some(data) = cut {
                if data[cell].status == crate::cutcell::CellStatus::Void {
                    continue;
                }
            }
            let (a, b) = mesh.edge_nodes(cell, e);
            let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
            let half = 0.5 * pa.dist(pb);
            for (k, &xi) in gp.iter().enumerate() {
                let s = 0.5 * (xi + 1.0);
                let x = pa.lerp(pb, s);
                if let Some(mask) = neumann_mask {
                    if !mask(x) {
                        continue;
                    }
                }
                let w = gw[k] * half;
                let nsh = [1.0 - s, s];
                for (ln, node) in [a, b].into_iter().enumerate() {
                    for d in 0..2 {
                        let row = map.index(dom.fv, node, d);
                        asm.add(row, -w * nsh[ln] * traction.comp(d));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Assemble the ghost-penalty stabilization over the selected faces of a cut
/// fluid domain.
pub fn assemble_ghost_penalty(
    dom: &FluidDomain,
    map: &DofMap,
    x_new: &[f64],
    ghost: &crate::cutcell::GhostFaceSet,
    th: &ThetaCtx,
    asm: &mut Assembly,
) {
    let mesh = &dom.mesh;
    for &(ca, ea, cb, _eb, _len, normal) in &ghost.faces {
        let coords_a = mesh.cell_coords(ca);
        let coords_b = mesh.cell_coords(cb);
        let (na, nb) = mesh.edge_nodes(ca, ea);
        let face = (mesh.nodes[na], mesh.nodes[nb], normal);
        let h = cell_diameter(&coords_a);
        let (s_v, s_p) = crate::cutcell::ghost_scalings(dom.params.mu, dom.params.rho, th.dt, h);
        let nodes_a = mesh.cells[ca];
        let nodes_b = mesh.cells[cb];
        let mut rows = [0usize; 24];
        for i in 0..4 {
            rows[2 * i] = map.index(dom.fv, nodes_a[i], 0);
            rows[2 * i + 1] = map.index(dom.fv, nodes_a[i], 1);
            rows[8 + i] = map.index(dom.fp, nodes_a[i], 0);
            rows[12 + 2 * i] = map.index(dom.fv, nodes_b[i], 0);
            rows[12 + 2 * i + 1] = map.index(dom.fv, nodes_b[i], 1);
            rows[20 + i] = map.index(dom.fp, nodes_b[i], 0);
        }
        if asm.wants_tangent() {
            let mut va = [Vec2::<DualN<24>>::zero(); 4];
            let mut pa = [DualN::<24>::constant(0.0); 4];
            let mut vb = [Vec2::<DualN<24>>::zero(); 4];
            let mut pb = [DualN::<24>::constant(0.0); 4];
            for i in 0..4 {
                va[i].x = DualN::variable(x_new[rows[2 * i]], 2 * i);
                va[i].y = DualN::variable(x_new[rows[2 * i + 1]], 2 * i + 1);
                pa[i] = DualN::variable(x_new[rows[8 + i]], 8 + i);
                vb[i].x = DualN::variable(x_new[rows[12 + 2 * i]], 12 + 2 * i);
                vb[i].y = DualN::variable(x_new[rows[12 + 2 * i + 1]], 12 + 2 * i + 1);
                pb[i] = DualN::variable(x_new[rows[20 + i]], 20 + i);
            }
            let mut local = [DualN::<24>::constant(0.0); 24];
            crate::cutcell::ghost_penalty_face(
                &coords_a, &coords_b, &va, &pa, &vb, &pb, face, dom.gamma_ghost_v,
                dom.gamma_ghost_p, s_v, s_p, &mut local,
            );
            asm.scatter_dual(&rows, &rows, &local);
        } else {
            let mut va = [Vec2::<f64>::zero(); 4];
            let mut pa = [0.0f64; 4];
            let mut vb = [Vec2::<f64>::zero(); 4];
            let mut pb = [0.0f64; 4];
            for i in 0..4 {
                va[i] = Vec2::new(x_new[rows[2 * i]], x_new[rows[2 * i + 1]]);
                pa[i] = x_new[rows[8 + i]];
                vb[i] = Vec2::new(x_new[rows[12 + 2 * i]], x_new[rows[12 + 2 * i + 1]]);
                pb[i] = x_new[rows[20 + i]];
            }
            let mut local = [0.0f64; 24];
            crate::cutcell::ghost_penalty_face(
                &coords_a, &coords_b, &va, &pa, &vb, &pb, face, dom.gamma_ghost_v,
                dom.gamma_ghost_p, s_v, s_p, &mut local,
            );
            asm.scatter_f64(&rows, &local);
        }
    }
}

// ---------------------------------------------------------------------------
// Poroelastic layer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct PoroDomain {
    pub mesh: Mesh2D,
    pub mat: PoroMaterial,
    /// Fluid phase properties inside the layer.
    pub mu_f: f64,
    pub rho_f: f64,
    pub fv: FieldId,
    pub fu: FieldId,
    pub fp: FieldId,
    pub dynamic: bool,
    pub body_force_fluid: Vec2<f64>,
    pub body_force_mixture: Vec2<f64>,
    /// Mixture-momentum Neumann tractions (reference configuration).
    pub neumann: Vec<(String, usize)>,
    /// Pore-pressure Neumann boundaries: -<delta v^P, h n> with the traction
    /// magnitude h from the load schedule, current-configuration normal.
    pub neumann_pore: Vec<(String, usize)>,
    /// Boundary tags whose edges carry the seepage mass boundary term
    /// <delta p, phi n . (v - udot)>; sealed (strong normal-velocity) tags
    /// are omitted by the caller.
    pub mass_flux_tags: Vec<String>,
    pub pspg: bool,
}

/// Poroelastic element kernel; rows: v at 2i+d, u at 8+2i+d, p at 16+i.
#[allow(clippy::too_many_arguments)]
pub fn poro_cell_kernel<S: Scalar>(
    qps: &[QpGeom],
    coords0: &[Vec2<f64>; 4],
    v_new: &[Vec2<S>; 4],
    u_new: &[Vec2<S>; 4],
    p_new: &[S; 4],
    v_old: &[Vec2<f64>; 4],
    u_old: &[Vec2<f64>; 4],
    p_old: &[f64; 4],
    w_old: &[Vec2<f64>; 4],
    dom: &PoroDomain,
    th: &ThetaCtx,
    h_elem: f64,
    mass_bdry_edges: &[usize],
    pore_neumann_edges: &[(usize, f64)],
    resid: &mut [S; 20],
) -> Result<()> {
    let mat = &dom.mat;
    let (mu_f, rho_f) = (dom.mu_f, dom.rho_f);
    let rho0_mix = mat.rho0_mixture();
    for qp in qps {
        // Kinematics at the new state.
        let grad_u0 = crate::mesh::grad_vec2(&qp.dn, u_new); // material gradient
        let f = Mat2::<S>::identity().add(&grad_u0);
        let j = f.det();
        if j.value() <= 0.0 {
            return Err(Error::InvalidKinematics { j: j.value() });
        }
        let finv = f.inverse();
        let finv_t = finv.transpose();
        // Spatial gradients of the shape functions.
        let mut dn_sp = [Vec2::<S>::zero(); 4];
        for i in 0..4 {
            dn_sp[i] = finv_t.mul_vec(lift_vec2(qp.dn[i]));
        }
        // Field values.
        let v = crate::mesh::interp_vec2(&qp.n, v_new);
        let mut p = S::from_f64(0.0);
        let mut grad_p_sp = Vec2::<S>::zero();
        for i in 0..4 {
            p += p_new[i] * qp.n[i];
            grad_p_sp += Vec2::new(dn_sp[i].x * p_new[i], dn_sp[i].y * p_new[i]);
        }
        // Skeleton velocity and acceleration from the theta update.
        let mut udot = Vec2::<S>::zero();
        let mut acc = Vec2::<S>::zero();
        for k in 0..4 {
            let w_new = th.velocity_vec(u_new[k], u_old[k], w_old[k]);
            udot += w_new.scale(S::from_f64(qp.n[k]));
            acc += (w_new - lift_vec2(w_old[k])).scale(S::from_f64(qp.n[k] / th.dt));
        }
        // Spatial velocity gradients.
        let mut grad_v_sp = Mat2::<S>::zero();
        let mut grad_udot_sp = Mat2::<S>::zero();
        for i in 0..4 {
            let wi = th.velocity_vec(u_new[i], u_old[i], w_old[i]);
            for r in 0..2 {
                let vr = if r == 0 { v_new[i].x } else { v_new[i].y };
                let wr = if r == 0 { wi.x } else { wi.y };
                grad_v_sp.a[r][0] += vr * dn_sp[i].x;
                grad_v_sp.a[r][1] += vr * dn_sp[i].y;
                grad_udot_sp.a[r][0] += wr * dn_sp[i].x;
                grad_udot_sp.a[r][1] += wr * dn_sp[i].y;
            }
        }
        // Porosity closure and permeability at the new state.
        let phi = porosity_lifted(j, p, mat)?;
        let jphi = j * phi;
        let kscal = kozeny_carman_generic(jphi, mat);
        // Spatial permeability push-forward k = K/J * F F^T; inverse drag
        // tensor k^{-1} = (J/K) (F F^T)^{-1}.
        let b_tensor = f.matmul(&f.transpose());
        let kinv = b_tensor.inverse().scale(j / kscal);
        // Seepage and drag.
        let rel_v = v - udot;
        let drag = kinv.mul_vec(rel_v); // k^{-1} (v - udot)
        // Old-state porosity for the mass transient.
        let (j_old, p_old_qp) = {
            let grad_uo = crate::mesh::grad_vec2(&qp.dn, u_old);
            let f_old = Mat2::<f64>::identity().add(&grad_uo);
            let mut po = 0.0;
            for i in 0..4 {
                po += p_old[i] * qp.n[i];
            }
            (f_old.det(), po)
        };
        let phi_old = crate::constitutive::solve_porosity(j_old, p_old_qp, mat)?.phi;
        let phidot = (phi - phi_old) * (1.0 / th.dt);
        let div_udot = grad_udot_sp.trace();
        let vdot = {
            let vo = crate::mesh::interp_vec2(&qp.n, v_old);
            (v - lift_vec2(vo)).scale(S::from_f64(1.0 / th.dt))
        };
        // Mixture stress (material frame).
        let s_poro = poro_pk2_generic(&f, phi, p, mat);
        let pk1 = f.matmul(&s_poro);

        // Pressure stabilization (PSPG analog) with the Darcy drag in the
        // tau denominator.
        let tau = if dom.pspg {
            let drag_coef = (j / kscal) * phi * mu_f;
            tau_smooth(udot.norm_sq(), rho_f, mu_f, th.dt, h_elem, drag_coef)
        } else {
            S::from_f64(0.0)
        };
        // Strong form of the pore-fluid momentum residual.
        let r_m = Vec2::new(
            vdot.x * rho_f - (grad_v_sp.a[0][0] * udot.x + grad_v_sp.a[0][1] * udot.y) * rho_f
                + grad_p_sp.x
                + drag.x * (mu_f) * phi
                - S::from_f64(rho_f * dom.body_force_fluid.x),
            vdot.y * rho_f - (grad_v_sp.a[1][0] * udot.x + grad_v_sp.a[1][1] * udot.y) * rho_f
                + grad_p_sp.y
                + drag.y * (mu_f) * phi
                - S::from_f64(rho_f * dom.body_force_fluid.y),
        );

        let wj = j * qp.w; // current-configuration measure
        for i in 0..4 {
            let ni = qp.n[i];
            // Mass balance rows (delta p).
            let mut mass = phidot * ni + phi * div_udot * ni;
            mass -= dn_sp[i].x * phi * rel_v.x + dn_sp[i].y * phi * rel_v.y;
            if dom.pspg {
                mass += (dn_sp[i].x * r_m.x + dn_sp[i].y * r_m.y) * tau;
            }
            resid[16 + i] += mass * wj;

            for d in 0..2 {
                // Pore-fluid momentum rows (delta v).
                let mut fm = S::from_f64(0.0);
                if dom.dynamic {
                    fm += vdot.comp(d) * (rho_f * ni);
                    fm -= (grad_v_sp.a[d][0] * udot.x + grad_v_sp.a[d][1] * udot.y) * (rho_f * ni);
                }
                fm -= dn_sp[i].comp(d) * p;
                fm += drag.comp(d) * phi * (mu_f * ni);
                fm -= S::from_f64(rho_f * dom.body_force_fluid.comp(d) * ni);
                resid[2 * i + d] += fm * wj;

                // Mixture momentum rows (delta u), material frame.
                let mut mm = S::from_f64(0.0);
                if dom.dynamic {
                    mm += acc.comp(d) * (rho0_mix * ni);
                }
                mm += pk1.a[d][0] * qp.dn[i].x + pk1.a[d][1] * qp.dn[i].y;
                mm -= drag.comp(d) * phi * phi * j * (mu_f * ni);
                mm -= grad_p_sp.comp(d) * j * phi * ni;
                mm -= S::from_f64(rho0_mix * dom.body_force_mixture.comp(d) * ni);
                resid[8 + 2 * i + d] += mm * qp.w;
            }
        }
    }
    // Seepage boundary term <delta p, phi n . (v - udot)> on the current
    // configuration of the requested local edges.
    let (gp, gw) = gauss_1d(2);
    for &e in mass_bdry_edges {
        let (la, lb) = EDGE_NODES[e];
        for (k, &xi) in gp.iter().enumerate() {
            let s = 0.5 * (xi + 1.0);
            let nsh = [1.0 - s, s];
            // Current-configuration edge geometry (live in u).
            let xa = lift_vec2::<S>(coords0[la]) + u_new[la];
            let xb = lift_vec2::<S>(coords0[lb]) + u_new[lb];
            let dvec = xb - xa;
            let len = dvec.norm();
            // Outward normal: edges are counterclockwise, so outward is
            // (dy, -dx)/len.
            let nrm = Vec2::new(dvec.y / len, S::from_f64(0.0) - dvec.x / len);
            // Trace values.
            let mut v = Vec2::<S>::zero();
            let mut udot = Vec2::<S>::zero();
            let mut p = S::from_f64(0.0);
            for (ln, li) in [la, lb].into_iter().enumerate() {
                v += v_new[li].scale(S::from_f64(nsh[ln]));
                let w_new = th.velocity_vec(u_new[li], u_old[li], w_old[li]);
                udot += w_new.scale(S::from_f64(nsh[ln]));
                p += p_new[li] * nsh[ln];
            }
            // Porosity at the edge from the edge-midpoint cell kinematics:
            // evaluate F at the edge quadrature point in reference coords.
            let (xi_e, eta_e) = edge_ref_coords(e, xi);
            let (_, dn_ref) = shape_eval(xi_e, eta_e);
            let jac0 = {
                let mut jm = Mat2::<f64>::zero();
                for i in 0..4 {
                    jm.a[0][0] += coords0[i].x * dn_ref[i].x;
                    jm.a[0][1] += coords0[i].x * dn_ref[i].y;
                    jm.a[1][0] += coords0[i].y * dn_ref[i].x;
                    jm.a[1][1] += coords0[i].y * dn_ref[i].y;
                }
                jm
            };
            let dn0 = physical_gradients(&jac0, &dn_ref);
            let grad_u0 = crate::mesh::grad_vec2(&dn0, u_new);
            let fmat = Mat2::<S>::identity().add(&grad_u0);
            let jdet = fmat.det();
            let phi = porosity_lifted(jdet, p, &dom.mat)?;
            let rel_n = (v - udot).dot(nrm);
            let w = len * (0.5 * gw[k]);
            for (ln, li) in [la, lb].into_iter().enumerate() {
                resid[16 + li] += phi * rel_n * w * nsh[ln];
            }
        }
    }
    // Pore-pressure Neumann: -<delta v^P, h n> on the current configuration.
    for &(e, hval) in pore_neumann_edges {
        let (la, lb) = EDGE_NODES[e];
        for (k, &xi) in gp.iter().enumerate() {
            let s = 0.5 * (xi + 1.0);
            let nsh = [1.0 - s, s];
            let xa = lift_vec2::<S>(coords0[la]) + u_new[la];
            let xb = lift_vec2::<S>(coords0[lb]) + u_new[lb];
            let dvec = xb - xa;
            let len = dvec.norm();
            let nrm = Vec2::new(dvec.y / len, S::from_f64(0.0) - dvec.x / len);
            let w = len * (0.5 * gw[k]);
            for (ln, li) in [la, lb].into_iter().enumerate() {
                for d in 0..2 {
                    resid[2 * li + d] -= nrm.comp(d) * w * (hval * nsh[ln]);
                }
            }
        }
    }
    Ok(())
}

/// Reference coordinates of a point on a local edge at 1D Gauss coordinate xi.
pub fn edge_ref_coords(edge: usize, xi: f64) -> (f64, f64) {
    match edge {
        0 => (xi, -1.0),
        1 => (1.0, xi),
        2 => (-xi, 1.0),
        _ => (-1.0, -xi),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_poro(
    dom: &PoroDomain,
    map: &DofMap,
    x_new: &[f64],
    x_old: &[f64],
    w_old: &[f64],
    loads: &[Vec2<f64>],
    th: &ThetaCtx,
    asm: &mut Assembly,
) -> Result<()> {
    let mesh = &dom.mesh;
    // Collect the mass-flux boundary edges per cell.
    let mut mass_edges: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for tag in &dom.mass_flux_tags {
        for &(cell, e) in mesh.tagged(tag)? {
            mass_edges.entry(cell).or_default().push(e);
        }
    }
    // Pore-pressure Neumann edges per cell with their load magnitude.
    let mut pore_edges: std::collections::BTreeMap<usize, Vec<(usize, f64)>> = Default::default();
    for (tag, load_idx) in &dom.neumann_pore {
        // Load schedules store a direction; the pore traction is scalar, so
        // the magnitude is carried by the direction-scaled load's norm with
        // the sign of its first nonzero component convention: use the x
        // component if nonzero, else y.
        let lv = loads[*load_idx];
        let hval = if lv.x != 0.0 { lv.x } else { lv.y };
        for &(cell, e) in mesh.tagged(tag)? {
            pore_edges.entry(cell).or_default().push((e, hval));
        }
    }
    for c in 0..mesh.n_cells() {
        let coords = mesh.cell_coords(c);
        let qps = full_cell_geometry(&coords, c).map_err(|e| e.in_module("forms::poro"))?;
        let h = cell_diameter(&coords);
        let nodes = mesh.cells[c];
        let mut rows = [0usize; 20];
        for i in 0..4 {
            rows[2 * i] = map.index(dom.fv, nodes[i], 0);
            rows[2 * i + 1] = map.index(dom.fv, nodes[i], 1);
            rows[8 + 2 * i] = map.index(dom.fu, nodes[i], 0);
            rows[8 + 2 * i + 1] = map.index(dom.fu, nodes[i], 1);
            rows[16 + i] = map.index(dom.fp, nodes[i], 0);
        }
        let mut vo = [Vec2::zero(); 4];
        let mut uo = [Vec2::zero(); 4];
        let mut po = [0.0f64; 4];
        let mut wo = [Vec2::zero(); 4];
        for i in 0..4 {
            vo[i] = Vec2::new(x_old[rows[2 * i]], x_old[rows[2 * i + 1]]);
            uo[i] = Vec2::new(x_old[rows[8 + 2 * i]], x_old[rows[8 + 2 * i + 1]]);
            po[i] = x_old[rows[16 + i]];
            wo[i] = Vec2::new(w_old[rows[8 + 2 * i]], w_old[rows[8 + 2 * i + 1]]);
        }
        let edges: &[usize] = mass_edges.get(&c).map(|v| v.as_slice()).unwrap_or(&[]);
        let pedges: &[(usize, f64)] = pore_edges.get(&c).map(|v| v.as_slice()).unwrap_or(&[]);
        let res = if asm.wants_tangent() {
            let mut vn = [Vec2::<DualN<20>>::zero(); 4];
            let mut un = [Vec2::<DualN<20>>::zero(); 4];
            let mut pn = [DualN::<20>::constant(0.0); 4];
            for i in 0..4 {
                vn[i].x = DualN::variable(x_new[rows[2 * i]], 2 * i);
                vn[i].y = DualN::variable(x_new[rows[2 * i + 1]], 2 * i + 1);
                un[i].x = DualN::variable(x_new[rows[8 + 2 * i]], 8 + 2 * i);
                un[i].y = DualN::variable(x_new[rows[8 + 2 * i + 1]], 8 + 2 * i + 1);
                pn[i] = DualN::variable(x_new[rows[16 + i]], 16 + i);
            }
            let mut local = [DualN::<20>::constant(0.0); 20];
            poro_cell_kernel(
                &qps, &coords, &vn, &un, &pn, &vo, &uo, &po, &wo, dom, th, h, edges, pedges,
                &mut local,
            )
            .map(|_| {
                asm.scatter_dual(&rows, &rows, &local);
            })
        } else {
            let mut vn = [Vec2::<f64>::zero(); 4];
            let mut un = [Vec2::<f64>::zero(); 4];
            let mut pn = [0.0f64; 4];
            for i in 0..4 {
                vn[i] = Vec2::new(x_new[rows[2 * i]], x_new[rows[2 * i + 1]]);
                un[i] = Vec2::new(x_new[rows[8 + 2 * i]], x_new[rows[8 + 2 * i + 1]]);
                pn[i] = x_new[rows[16 + i]];
            }
            let mut local = [0.0f64; 20];
            poro_cell_kernel(
                &qps, &coords, &vn, &un, &pn, &vo, &uo, &po, &wo, dom, th, h, edges, pedges,
                &mut local,
            )
            .map(|_| {
                asm.scatter_f64(&rows, &local);
            })
        };
        res.map_err(|e| e.in_module("forms::poro"))?;
    }
    // Mixture Neumann tractions (reference configuration).
    for (tag, load_idx) in &dom.neumann {
        let traction = loads[*load_idx];
        if traction.x == 0.0 && traction.y == 0.0 {
            continue;
        }
        for &(cell, e) in mesh.tagged(tag)? {
            let (a, b) = mesh.edge_nodes(cell, e);
            let len = mesh.nodes[a].dist(mesh.nodes[b]);
            for node in [a, b] {
                for d in 0..2 {
                    let row = map.index(dom.fu, node, d);
                    asm.add(row, -0.5 * len * traction.comp(d));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, DofMapBuilder, RectTags};

    fn th1(dt: f64) -> ThetaCtx {
        ThetaCtx { theta: 1.0, dt }
    }

    fn solid_mat() -> SolidMaterial {
        SolidMaterial {
            e_mod: 1.0e6,
            nu: 0.3,
            rho0: 2.0,
        }
    }

    fn poro_mat() -> PoroMaterial {
        PoroMaterial {
            e_mod: 0.25e6,
            nu: 0.0,
            c_tilde: 0.25e6,
            alpha: 8.0,
            kappa_vol: 0.8e6,
            eta_pen: 1.0e3,
            phi0: 0.5,
            k0: 4.6e-4,
            alpha_bj: 1.0,
            rho0_solid: 1.0e-3,
        }
    }

    #[test]
    fn structure_zero_state_zero_residual() {
        let mesh = build_structured_mesh([0.0, 0.0, 1.0, 1.0], 2, 2, &RectTags::new("b", "r", "t", "l")).unwrap();
        let mut b = DofMapBuilder::new();
        let fu = b.add_field("solid_u", mesh.n_nodes(), 2);
        let map = b.build();
        let dom = SolidDomain {
            mesh,
            mat: solid_mat(),
            fu,
            dynamic: true,
            body_force: Vec2::zero(),
            neumann: vec![],
        };
        let n = map.n_dofs();
        let x = vec![0.0; n];
        let w = vec![0.0; n];
        let mut asm = Assembly::residual_only(n);
        assemble_structure(&dom, &map, &x, &x, &w, &[], &th1(0.1), &mut asm).unwrap();
        for v in &asm.residual {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn structure_gravity_consistent_load() {
        // Single static element under body force: the residual at each node
        // is the consistent nodal force -rho0 * b * area / 4.
        let mesh = build_structured_mesh([0.0, 0.0, 2.0, 3.0], 1, 1, &RectTags::new("b", "r", "t", "l")).unwrap();
        let mut b = DofMapBuilder::new();
        let fu = b.add_field("solid_u", 4, 2);
        let map = b.build();
        let mat = solid_mat();
        let body = Vec2::new(0.0, -9.81);
        let dom = SolidDomain {
            mesh,
            mat,
            fu,
            dynamic: false,
            body_force: body,
            neumann: vec![],
        };
        let x = vec![0.0; 8];
        let mut asm = Assembly::residual_only(8);
        assemble_structure(&dom, &map, &x, &x, &x, &[], &th1(1.0), &mut asm).unwrap();
        // Residual = internal - external; with zero displacement it equals
        // minus the consistent nodal load rho0 * b * area / 4 per node.
        let expected = -mat.rho0 * body.y * 6.0 / 4.0;
        for i in 0..4 {
            let ry = asm.residual[map.index(fu, i, 1)];
            assert!(
                (ry - expected).abs() < 1e-12 * expected.abs(),
                "node {i}: {ry} vs {expected}"
            );
        }
    }

    /// Finite-difference check of a tangent assembled by any driver.
    fn check_tangent_vs_fd(
        n: usize,
        assemble: impl Fn(&[f64], &mut Assembly),
        x0: &[f64],
        scale: f64,
        tol: f64,
    ) {
        let mut asm = Assembly::with_tangent(n);
        assemble(x0, &mut asm);
        let mut jac = vec![0.0; n * n];
        for (r, c, v) in asm.triplets.unwrap() {
            jac[r * n + c] += v;
        }
        let h = 1e-6 * scale;
        let mut max_entry = 0.0f64;
        for v in &jac {
            max_entry = max_entry.max(v.abs());
        }
        for col in 0..n {
            let mut xp = x0.to_vec();
            xp[col] += h;
            let mut ap = Assembly::residual_only(n);
            assemble(&xp, &mut ap);
            let mut xm = x0.to_vec();
            xm[col] -= h;
            let mut am = Assembly::residual_only(n);
            assemble(&xm, &mut am);
            for row in 0..n {
                let fd = (ap.residual[row] - am.residual[row]) / (2.0 * h);
                let an = jac[row * n + col];
                let denom = max_entry.max(1e-12);
                assert!(
                    (fd - an).abs() / denom < tol,
                    "J[{row}][{col}] analytic {an} vs fd {fd} (denom {denom})"
                );
            }
        }
    }

    #[test]
    fn structure_tangent_matches_fd() {
        use rand::{RngExt, SeedableRng};
        let mesh = build_structured_mesh([0.0, 0.0, 1.0, 1.0], 1, 1, &RectTags::new("b", "r", "t", "l")).unwrap();
        let mut b = DofMapBuilder::new();
        let fu = b.add_field("solid_u", 4, 2);
        let map = b.build();
        let dom = SolidDomain {
            mesh,
            mat: solid_mat(),
            fu,
            dynamic: true,
            body_force: Vec2::new(0.3, -0.7),
            neumann: vec![],
        };
        let mut rng = rand::rngs::StdRng::seed_from_u64(17);
        for _ in 0..10 {
            let x_old: Vec<f64> = (0..8).map(|_| rng.random_range(-0.02..0.02)).collect();
            let w_old: Vec<f64> = (0..8).map(|_| rng.random_range(-0.1..0.1)).collect();
            let x_new: Vec<f64> = x_old
                .iter()
                .map(|v| v + rng.random_range(-0.02..0.02))
                .collect();
            let th = th1(0.05);
            check_tangent_vs_fd(
                8,
                |x, asm| {
                    assemble_structure(&dom, &map, x, &x_old, &w_old, &[], &th, asm).unwrap()
                },
                &x_new,
                1.0,
                1e-5,
            );
        }
    }

    #[test]
    fn fluid_constant_velocity_interior_residual_vanishes() {
        // v = const, p = 0: interior momentum residual zero (convection of a
        // constant vanishes); continuity rows also vanish.
        let mesh = build_structured_mesh([0.0, 0.0, 1.0, 1.0], 2, 2, &RectTags::new("b", "r", "t", "l")).unwrap();
        let mut b = DofMapBuilder::new();
        let fv = b.add_field("fluid_v", mesh.n_nodes(), 2);
        let fp = b.add_field("fluid_p", mesh.n_nodes(), 1);
        let map = b.build();
        let n = map.n_dofs();
        let dom = FluidDomain {
            mesh: mesh.clone(),
            fv,
            fp,
            params: FluidParams {
                rho: 1.0,
                mu: 0.01,
                include_convection: true,
                supg: true,
                pspg: true,
                lsic: true,
            },
            body_force: Vec2::zero(),
            body_force_fn: None,
            neumann: vec![],
            gamma_ghost_v: 0.1,
            gamma_ghost_p: 0.1,
        };
        let mut x = vec![0.0; n];
        for i in 0..mesh.n_nodes() {
            x[map.index(fv, i, 0)] = 1.3;
            x[map.index(fv, i, 1)] = -0.4;
        }
        let mut asm = Assembly::residual_only(n);
        assemble_fluid(&dom, &map, &x, &x, &[], &th1(0.1), None, None, &mut asm).unwrap();
        for v in &asm.residual {
            assert!(v.abs() < 1e-12, "residual entry {v}");
        }
    }

    #[test]
    fn fluid_continuity_exact_on_solenoidal_linear_field() {
        // v = (a x, -a y) is divergence-free and exactly representable.
        let mesh = build_structured_mesh([0.0, 0.0, 1.0, 1.0], 3, 3, &RectTags::new("b", "r", "t", "l")).unwrap();
        let mut b = DofMapBuilder::new();
        let fv = b.add_field("fluid_v", mesh.n_nodes(), 2);
        let fp = b.add_field("fluid_p", mesh.n_nodes(), 1);
        let map = b.build();
        let n = map.n_dofs();
        let dom = FluidDomain {
            mesh: mesh.clone(),
            fv,
            fp,
            params: FluidParams {
                rho: 0.0,
                mu: 1.0,
                include_convection: false,
                supg: false,
                pspg: false,
                lsic: false,
            },
            body_force: Vec2::zero(),
            body_force_fn: None,
            neumann: vec![],
            gamma_ghost_v: 0.1,
            gamma_ghost_p: 0.1,
        };
        let mut x = vec![0.0; n];
        for i in 0..mesh.n_nodes() {
            let pos = mesh.nodes[i];
            x[map.index(fv, i, 0)] = 0.7 * pos.x;
            x[map.index(fv, i, 1)] = -0.7 * pos.y;
        }
        let mut asm = Assembly::residual_only(n);
        assemble_fluid(&dom, &map, &x, &x, &[], &th1(1.0), None, None, &mut asm).unwrap();
        for i in 0..mesh.n_nodes() {
            let r = asm.residual[map.index(fp, i, 0)];
            assert!(r.abs() < 1e-12, "continuity row {i}: {r}");
        }
    }

    #[test]
    fn fluid_tangent_matches_fd() {
        use rand::{RngExt, SeedableRng};
        let mesh = build_structured_mesh([0.0, 0.0, 1.0, 1.0], 1, 1, &RectTags::new("b", "r", "t", "l")).unwrap();
        let mut b = DofMapBuilder::new();
        let fv = b.add_field("fluid_v", 4, 2);
        let fp = b.add_field("fluid_p", 4, 1);
        let map = b.build();
        let dom = FluidDomain {
            mesh,
            fv,
            fp,
            params: FluidParams {
                rho: 1.0,
                mu: 0.01,
                include_convection: true,
                supg: true,
                pspg: true,
                lsic: true,
            },
            body_force: Vec2::new(0.1, 0.2),
            body_force_fn: None,
            neumann: vec![],
            gamma_ghost_v: 0.1,
            gamma_ghost_p: 0.1,
        };
        let mut rng = rand::rngs::StdRng::seed_from_u64(23);
        for _ in 0..10 {
            let x_old: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x_new: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let th = th1(0.1);
            check_tangent_vs_fd(
                12,
                |x, asm| {
                    assemble_fluid(&dom, &map, x, &x_old, &[], &th, None, None, asm).unwrap()
                },
                &x_new,
                1.0,
                1e-5,
            );
        }
    }

    fn poro_domain_strip(nx: usize, ny: usize) -> (PoroDomain, DofMap) {
        let mesh = build_structured_mesh(
            [0.0, 0.0, 1.0, 0.2],
            nx,
            ny,
            &RectTags::new("bottom", "right", "top", "left"),
        )
        .unwrap();
        let mut b = DofMapBuilder::new();
        let fv = b.add_field("poro_v", mesh.n_nodes(), 2);
        let fu = b.add_field("poro_u", mesh.n_nodes(), 2);
        let fp = b.add_field("poro_p", mesh.n_nodes(), 1);
        let map = b.build();
        let dom = PoroDomain {
            mesh,
            mat: poro_mat(),
            mu_f: 1e-3,
            rho_f: 1e-3,
            fv,
            fu,
            fp,
            dynamic: true,
            body_force_fluid: Vec2::zero(),
            body_force_mixture: Vec2::zero(),
            neumann: vec![],
            neumann_pore: vec![],
            mass_flux_tags: vec!["left".into(), "right".into()],
            pspg: true,
        };
        (dom, map)
    }

    #[test]
    fn poro_zero_state_zero_residual() {
        let (dom, map) = poro_domain_strip(2, 1);
        let n = map.n_dofs();
        let x = vec![0.0; n];
        let mut asm = Assembly::residual_only(n);
        assemble_poro(&dom, &map, &x, &x, &x, &[], &th1(0.05), &mut asm).unwrap();
        for v in &asm.residual {
            assert!(v.abs() < 1e-10, "residual entry {v}");
        }
    }

    #[test]
    fn poro_tangent_matches_fd() {
        use rand::{RngExt, SeedableRng};
        let (dom, map) = poro_domain_strip(1, 1);
        let n = map.n_dofs();
        let mut rng = rand::rngs::StdRng::seed_from_u64(29);
        for trial in 0..10 {
            let x_old: Vec<f64> = (0..n)
                .map(|i| {
                    if i >= 16 {
                        rng.random_range(0.0..5.0e3) // pressures
                    } else if i >= 8 {
                        rng.random_range(-0.005..0.005) // displacements
                    } else {
                        rng.random_range(-0.5..0.5) // velocities
                    }
                })
                .collect();
            let mut x_new = x_old.clone();
            for (i, v) in x_new.iter_mut().enumerate() {
                if i >= 16 {
                    *v += rng.random_range(-100.0..100.0);
                } else if i >= 8 {
                    *v += rng.random_range(-0.002..0.002);
                } else {
                    *v += rng.random_range(-0.1..0.1);
                }
            }
            let w_old: Vec<f64> = (0..n).map(|_| rng.random_range(-0.01..0.01)).collect();
            let th = th1(0.05);
            check_tangent_vs_fd(
                n,
                |x, asm| {
                    assemble_poro(&dom, &map, x, &x_old, &w_old, &[], &th, asm).unwrap()
                },
                &x_new,
                1.0,
                2e-5,
            );
            let _ = trial;
        }
    }
}
