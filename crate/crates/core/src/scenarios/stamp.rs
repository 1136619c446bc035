//! Rough-surface contacting stamp: an elastic stamp with a circular face
//! presses through fluid onto a poroelastic-coated foundation (squeeze-out),
//! then a raised fluid traction lifts it off again. The fluid lives on a cut
//! background mesh; contact is mortar with the KKT active set.
//!
//! SI units (m, Pa, s, kg/m^3).

use super::config::ScenarioConfig;
use super::{collect_tag_nodes, retag_edges, tie_matching, Scenario, ScenarioKind};
use crate::error::{Error, Result};
use crate::forms::{FluidDomain, FluidParams, PoroDomain, SolidDomain};
use crate::interface::{FieldIds, NitscheParams, OtherSide};
use crate::math::Vec2;
use crate::mesh::{build_structured_mesh, build_structured_mesh_warped, DofMapBuilder, RectTags};
use crate::solver::{ContactConfig, LoadSchedule, NonlinearSettings, System, TimeScheme};

pub fn setup_stamp(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let g = &cfg.geometry;
    let m = &cfg.materials;
    let (l, h, delta, a, b, c) = (g.l, g.h, g.delta, g.a, g.b, g.c);
    if g.d <= 0.0 || g.g <= 0.0 {
        return Err(Error::Config(
            "stamp scenario needs geometry.d (face diameter) and geometry.g (gap)".into(),
        ));
    }
    let radius = g.d / 2.0;
    if radius < a / 2.0 {
        return Err(Error::Config("stamp face diameter smaller than its width".into()));
    }
    let x_center = c + a / 2.0;
    let sag_edge = (radius * radius - (a / 2.0) * (a / 2.0)).sqrt();
    // Stamp face: edges at y_edge, dipping toward the center by the sagitta.
    let y_edge = h + delta + g.g;
    let y_top = y_edge + a;
    let face = move |x: f64| y_edge - ((radius * radius - (x - x_center).powi(2)).sqrt() - sag_edge);

    let stamp_mesh = build_structured_mesh_warped(
        [c, 0.0, c + a, 1.0],
        g.nx_upper,
        g.ny_upper,
        &RectTags::new("stamp_contact", "slide", "sn", "slide"),
        |x, fy| {
            let yb = face(x);
            Vec2::new(x, yb + fy * (y_top - yb))
        },
    )?;

    let s2_mesh = build_structured_mesh(
        [0.0, 0.0, l, h],
        g.nx_layer,
        g.ny_foundation,
        &RectTags::new("fixed", "fixed", "s2_top", "fixed"),
    )?;

    let layer_mesh = build_structured_mesh(
        [0.0, h, l, h + delta],
        g.nx_layer,
        g.ny_layer,
        &RectTags::new("ps_bottom", "sealed", "contact", "sealed"),
    )?;

    // Cut fluid background: the bottom edge sits strictly inside the layer so
    // only the layer top and the stamp boundary ever cut the mesh.
    let y_bg = h + 0.25 * delta;
    let mut fluid_mesh = build_structured_mesh(
        [0.0, y_bg, l, b],
        g.nx_fluid,
        g.ny_fluid,
        &RectTags::new("covered", "noslip", "ftop", "noslip"),
    )?;
    retag_edges(&mut fluid_mesh, "ftop", |mid| {
        Some(
            if mid.x < c || mid.x > c + a {
                "fn"
            } else {
                "masked"
            }
            .to_string(),
        )
    })?;

    let mut builder = DofMapBuilder::new();
    let s1_u = builder.add_field("stamp_u", stamp_mesh.n_nodes(), 2);
    let s2_u = builder.add_field("foundation_u", s2_mesh.n_nodes(), 2);
    let f_v = builder.add_field("fluid_v", fluid_mesh.n_nodes(), 2);
    let f_p = builder.add_field("fluid_p", fluid_mesh.n_nodes(), 1);
    let p_v = builder.add_field("poro_v", layer_mesh.n_nodes(), 2);
    let p_u = builder.add_field("poro_u", layer_mesh.n_nodes(), 2);
    let p_p = builder.add_field("poro_p", layer_mesh.n_nodes(), 1);
    // Contact multipliers on the layer's potential contact surface.
    let contact_nodes = collect_tag_nodes(&layer_mesh, &["contact"])?;
    let lam = builder.add_field("lambda", contact_nodes.len(), 2);
    let tol = 1e-9 * l;
    tie_matching(
        &mut builder,
        p_u,
        &layer_mesh,
        "ps_bottom",
        s2_u,
        &s2_mesh,
        "s2_top",
        tol,
    )?;
    let map = builder.build();

    let ids = FieldIds {
        solids: vec![s1_u, s2_u],
        fluids: vec![(f_v, f_p)],
        poro: Some((p_v, p_u, p_p)),
        lambda: Some(lam),
    };

    let mut dirichlet = Vec::new();
    for n in collect_tag_nodes(&s2_mesh, &["fixed"])? {
        dirichlet.push(map.index(s2_u, n, 0));
        dirichlet.push(map.index(s2_u, n, 1));
    }
    // Vertical linear slide: the stamp sides move only vertically.
    for n in collect_tag_nodes(&stamp_mesh, &["slide"])? {
        dirichlet.push(map.index(s1_u, n, 0));
    }
    for n in collect_tag_nodes(&layer_mesh, &["sealed"])? {
        dirichlet.push(map.index(p_u, n, 0));
        dirichlet.push(map.index(p_u, n, 1));
        dirichlet.push(map.index(p_v, n, 0));
    }
    // No-slip outer fluid walls.
    for n in collect_tag_nodes(&fluid_mesh, &["noslip"])? {
        dirichlet.push(map.index(f_v, n, 0));
        dirichlet.push(map.index(f_v, n, 1));
    }
    dirichlet.sort_unstable();
    dirichlet.dedup();

    // Loads: 0 = fluid traction on the open tops, 1 = solid stress on the
    // stamp top. Both press downward.
    let fluid_load = LoadSchedule {
        knots: vec![
            (0.0, 0.0),
            (cfg.loads.fluid_ramp_start, 0.0),
            (cfg.loads.fluid_ramp_end, cfg.loads.fluid_max),
        ],
        direction: Vec2::new(0.0, -1.0),
    };
    let solid_load = LoadSchedule {
        knots: vec![(0.0, 0.0), (cfg.loads.solid_ramp_end, cfg.loads.solid_max)],
        direction: Vec2::new(0.0, -1.0),
    };

    let solids = vec![
        SolidDomain {
            mesh: stamp_mesh.clone(),
            mat: m.solid1,
            fu: s1_u,
            dynamic: true,
            body_force: Vec2::zero(),
            neumann: vec![("sn".into(), 1)],
        },
        SolidDomain {
            mesh: s2_mesh,
            mat: m.solid2,
            fu: s2_u,
            dynamic: true,
            body_force: Vec2::zero(),
            neumann: vec![],
        },
    ];
    let fluids = vec![FluidDomain {
        mesh: fluid_mesh,
        fv: f_v,
        fp: f_p,
        params: FluidParams {
            rho: m.fluid.rho,
            mu: m.fluid.mu,
            include_convection: true,
            supg: true,
            pspg: true,
            lsic: true,
        },
        body_force: Vec2::zero(),
        body_force_fn: None,
        neumann: vec![("fn".into(), 0)],
        gamma_ghost_v: cfg.numerics.ghost_gamma_v,
        gamma_ghost_p: cfg.numerics.ghost_gamma_p,
    }];
    let poro = PoroDomain {
        mesh: layer_mesh.clone(),
        mat: m.poro,
        mu_f: m.fluid.mu,
        rho_f: m.fluid.rho,
        fv: p_v,
        fu: p_u,
        fp: p_p,
        dynamic: true,
        body_force_fluid: Vec2::zero(),
        body_force_mixture: Vec2::zero(),
        neumann: vec![],
        neumann_pore: vec![],
        mass_flux_tags: vec!["contact".into(), "ps_bottom".into()],
        pspg: true,
    };

    let nitsche = NitscheParams {
        gamma: cfg.numerics.gamma,
        gamma_n: cfg.numerics.gamma_n,
        gamma_t: cfg.numerics.gamma_t,
        gamma_p: cfg.resolved_gamma_p(),
        saffman: cfg.numerics.saffman,
    };
    let geometry_tol = if cfg.numerics.geometry_tol > 0.0 {
        cfg.numerics.geometry_tol
    } else {
        1e-3 * (delta / g.ny_layer as f64)
    };

    let sys = System {
        solids,
        fluids,
        poro: Some(poro),
        map,
        ids,
        dirichlet,
        loads: vec![fluid_load, solid_load],
        nitsche,
        cut_fluids: vec![(0, vec![OtherSide::Solid(0), OtherSide::Poro])],
        fitted_fsi: vec![],
        fitted_fpi: vec![],
        ps_impermeable: vec!["ps_bottom".into()],
        contact: Some(ContactConfig {
            poro_tag: "contact".into(),
            solid_body: 0,
            solid_tag: "stamp_contact".into(),
            c_n: cfg.resolved_c_n(),
        }),
        eps_area: cfg.numerics.eps_area,
        island_threshold: cfg.numerics.island_threshold,
        disp_fields: vec![s1_u, s2_u, p_u],
    };

    let scheme = if cfg.time.dt_schedule.is_empty() {
        TimeScheme::constant(cfg.time.theta, cfg.time.dt, cfg.time.t_end)
    } else {
        TimeScheme {
            theta: cfg.time.theta,
            dt_schedule: cfg.time.dt_schedule.clone(),
            t_end: cfg.time.t_end,
        }
    };
    let settings = NonlinearSettings {
        eps: cfg.numerics.eps,
        max_newton: cfg.numerics.max_newton,
        max_active_set_cycles: cfg.numerics.max_active_set_cycles,
        geometry_tol,
        max_bisections: cfg.numerics.max_bisections,
    };

    // Selected trace nodes: two stamp face nodes left of center and the layer
    // top node nearest x = c + a/4 (contact stress and fluid pressure trace).
    let pick_nearest = |mesh: &crate::mesh::Mesh2D, nodes: &[usize], x: f64| -> usize {
        *nodes
            .iter()
            .min_by(|&&p, &&q| {
                (mesh.nodes[p].x - x)
                    .abs()
                    .partial_cmp(&(mesh.nodes[q].x - x).abs())
                    .unwrap()
            })
            .unwrap()
    };
    let stamp_nodes = collect_tag_nodes(&stamp_mesh, &["stamp_contact"])?;
    let sel1 = pick_nearest(&stamp_mesh, &stamp_nodes, c + 0.05 * a);
    let sel2 = pick_nearest(&stamp_mesh, &stamp_nodes, c + 0.25 * a);
    let sel3 = pick_nearest(&layer_mesh, &contact_nodes, c + 0.25 * a);

    Ok(Scenario {
        kind: ScenarioKind::Stamp,
        sys,
        scheme,
        settings,
        config: cfg.clone(),
        qoi_channels: vec![
            "solid_load".into(),
            "fluid_load".into(),
            "active_count".into(),
            "disp_y_node1".into(),
            "disp_y_node2".into(),
            "contact_stress_node3".into(),
            "fluid_pressure_node3".into(),
        ],
        section_x: l / 2.0,
        sel_solid_nodes: vec![(0, sel1), (0, sel2)],
        sel_poro_node: Some(sel3),
    })
}
