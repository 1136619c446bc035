//! Monolithic residual and tangent: sum of all domain and interface
//! contributions, with identity rows for constrained and inactive dofs.

use super::{GeometryCache, State, System};
use crate::error::Result;
use crate::forms::{
    assemble_fluid, assemble_ghost_penalty, assemble_poro, assemble_structure, Assembly, ThetaCtx,
};
use crate::interface::{
    assemble_contact, assemble_contact_fluid, assemble_fpi, assemble_fsi, ContactNodeState,
};
use crate::math::Vec2;
use crate::mesh::Mesh2D;

/// Evaluate the theta-weighted load table.
pub fn eval_loads(sys: &System, th: &ThetaCtx, t_new: f64) -> Vec<Vec2<f64>> {
    sys.loads_at(th, t_new)
}

/// Assemble the full residual (and tangent when requested) at `x_new`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_monolithic(
    sys: &System,
    cache: &GeometryCache,
    states: &[ContactNodeState],
    x_new: &[f64],
    old: &State,
    loads: &[Vec2<f64>],
    th: &ThetaCtx,
    want_tangent: bool,
) -> Result<Assembly> {
    let n = sys.n_dofs();
    let mut asm = if want_tangent {
        Assembly::with_tangent(n)
    } else {
        Assembly::residual_only(n)
    };

    for dom in &sys.solids {
        assemble_structure(dom, &sys.map, x_new, &old.x, &old.w, loads, th, &mut asm)
            .map_err(|e| e.in_module("solver::monolithic"))?;
    }
    for (idx, dom) in sys.fluids.iter().enumerate() {
        let cut = cache.cut[idx].as_ref();
        // Mask Neumann quadrature points covered by embedded bodies.
        let mask = |x: Vec2<f64>| !cache.polylines.iter().any(|pl| pl.contains(x));
        let mask_ref: Option<&dyn Fn(Vec2<f64>) -> bool> = if cut.is_some() {
            Some(&mask)
        } else {
            None
        };
        assemble_fluid(
            dom,
            &sys.map,
            x_new,
            &old.x,
            loads,
            th,
            cut.map(|c| c.cells.as_slice()),
            mask_ref,
            &mut asm,
        )
        .map_err(|e| e.in_module("solver::monolithic"))?;
        if let Some(cutd) = cut {
            assemble_ghost_penalty(dom, &sys.map, x_new, &cutd.ghost, th, &mut asm);
        }
    }
    if let Some(poro) = &sys.poro {
        assemble_poro(poro, &sys.map, x_new, &old.x, &old.w, loads, th, &mut asm)
            .map_err(|e| e.in_module("solver::monolithic"))?;
    }

    // Interface terms.
    let fluid_meshes: Vec<&Mesh2D> = sys.fluids.iter().map(|d| &d.mesh).collect();
    let solid_meshes: Vec<&Mesh2D> = sys.solids.iter().map(|d| &d.mesh).collect();
    let mu_of = |dom: usize| sys.fluids[dom].params.mu;
    // FSI and FPI segments can come from different fluid domains; group by
    // viscosity is unnecessary since mu is read per segment's domain.
    let mut fsi_by_mu: std::collections::BTreeMap<u64, Vec<crate::interface::CoupledSegment>> =
        Default::default();
    for seg in &cache.fsi_segments {
        fsi_by_mu
            .entry(mu_of(seg.fluid_dom).to_bits())
            .or_default()
            .push(seg.clone());
    }
    for (mu_bits, segs) in fsi_by_mu {
        assemble_fsi(
            &segs,
            &fluid_meshes,
            &solid_meshes,
            &sys.ids,
            &sys.map,
            x_new,
            &old.x,
            &old.w,
            f64::from_bits(mu_bits),
            &sys.nitsche,
            th,
            &mut asm,
        );
    }
    let mut fpi_by_mu: std::collections::BTreeMap<u64, Vec<crate::interface::CoupledSegment>> =
        Default::default();
    for seg in &cache.fpi_segments {
        fpi_by_mu
            .entry(mu_of(seg.fluid_dom).to_bits())
            .or_default()
            .push(seg.clone());
    }
    for (mu_bits, segs) in fpi_by_mu {
        assemble_fpi(
            &segs,
            &fluid_meshes,
            &sys.ids,
            &sys.map,
            x_new,
            &old.x,
            &old.w,
            f64::from_bits(mu_bits),
            &sys.nitsche,
            th,
            &mut asm,
        );
    }
    assemble_contact_fluid(
        &cache.contact_fluid_edges,
        &sys.ids,
        &sys.map,
        x_new,
        &old.x,
        &old.w,
        &sys.nitsche,
        th,
        &mut asm,
    );
    if let (Some(mortar), Some(poro)) = (&cache.mortar, &sys.poro) {
        assemble_contact(
            mortar,
            states,
            &cache.fn_coeffs,
            &poro.mesh,
            &solid_meshes,
            &sys.ids,
            &sys.map,
            x_new,
            &mut asm,
        );
    }

    // Identity rows: Dirichlet + inactive fluid dofs. Residual drives the
    // value itself to zero (all constraints are homogeneous).
    let mut is_identity = vec![false; n];
    for &d in sys.dirichlet.iter().chain(&cache.inactive_dofs) {
        is_identity[d] = true;
    }
    for (d, flag) in is_identity.iter().enumerate() {
        if *flag {
            asm.residual[d] = x_new[d];
        }
    }
    if let Some(triplets) = asm.triplets.as_mut() {
        triplets.retain(|(r, _, _)| !is_identity[*r]);
        for (d, flag) in is_identity.iter().enumerate() {
            if *flag {
                triplets.push((d, d, 1.0));
            }
        }
    }
    Ok(asm)
}
