//! Leakage scenario: two pressurized fluid reservoirs connected only through
//! the compressed rough-surface layer between an elastic block and a stiff
//! foundation. Fitted fluid meshes, matched solid/poro interfaces, staircase
//! solid load.
//!
//! Length unit mm, stress Pa, time s; densities are in the coherent
//! Pa s^2/mm^2 unit (1000 kg/m^3 = 1e-3).

use super::config::ScenarioConfig;
use super::{collect_tag_nodes, retag_edges, tie_matching, Scenario, ScenarioKind};
use crate::error::{Error, Result};
use crate::forms::{FluidDomain, FluidParams, PoroDomain, SolidDomain};
use crate::interface::{FieldIds, NitscheParams, OtherSide};
use crate::math::Vec2;
use crate::mesh::{build_structured_mesh, DofMapBuilder, RectTags};
use crate::solver::{
    ContactConfig, FittedInterface, LoadSchedule, NonlinearSettings, System, TimeScheme,
};

pub fn setup_leakage(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let g = &cfg.geometry;
    let m = &cfg.materials;
    let (l, h, delta, a, b, c) = (g.l, g.h, g.delta, g.a, g.b, g.c);
    let hx = l / g.nx_layer as f64;
    // Node matching on the shared interfaces requires the upper block edges
    // to land on layer grid lines.
    let on_grid = |x: f64| (x / hx - (x / hx).round()).abs() < 1e-9;
    if !on_grid(c) || !on_grid(c + a) {
        return Err(Error::Config(format!(
            "upper block edges x = {c} and x = {} must lie on layer grid lines (hx = {hx})",
            c + a
        )));
    }
    let nx_upper = (a / hx).round() as usize;

    // Upper block Omega^S1 sits on the layer between the fluid columns.
    let mut s1_mesh = build_structured_mesh(
        [c, h + delta, c + a, h + delta + a],
        nx_upper,
        g.ny_upper,
        &RectTags::new("ps_s1", "side_r", "gp", "side_l"),
    )?;
    // Wet side faces below the fluid top b; dry above.
    retag_edges(&mut s1_mesh, "side_l", |mid| {
        Some(if mid.y <= b { "fs_wet" } else { "dry" }.to_string())
    })?;
    retag_edges(&mut s1_mesh, "side_r", |mid| {
        Some(if mid.y <= b { "fs_wet" } else { "dry" }.to_string())
    })?;

    // Foundation Omega^S2.
    let s2_mesh = build_structured_mesh(
        [0.0, 0.0, l, h],
        g.nx_layer,
        g.ny_foundation,
        &RectTags::new("fixed", "fixed", "s2_top", "fixed"),
    )?;

    // Poroelastic layer.
    let mut layer_mesh = build_structured_mesh(
        [0.0, h, l, h + delta],
        g.nx_layer,
        g.ny_layer,
        &RectTags::new("ps_bottom", "sealed", "top", "sealed"),
    )?;
    retag_edges(&mut layer_mesh, "top", |mid| {
        Some(
            if mid.x < c {
                "fp_left"
            } else if mid.x > c + a {
                "fp_right"
            } else {
                "ps_top"
            }
            .to_string(),
        )
    })?;

    // Fitted fluid columns.
    let fl_mesh = build_structured_mesh(
        [0.0, h + delta, c, b],
        g.nx_fluid,
        g.ny_fluid,
        &RectTags::new("fpi", "fsi", "slip_top", "inflow"),
    )?;
    let fr_mesh = build_structured_mesh(
        [c + a, h + delta, l, b],
        g.nx_fluid,
        g.ny_fluid,
        &RectTags::new("fpi", "outflow", "slip_top", "fsi"),
    )?;

    // Dof map with matched-node ties on Gamma^PS.
    let mut builder = DofMapBuilder::new();
    let s1_u = builder.add_field("solid1_u", s1_mesh.n_nodes(), 2);
    let s2_u = builder.add_field("solid2_u", s2_mesh.n_nodes(), 2);
    let fl_v = builder.add_field("fluid_left_v", fl_mesh.n_nodes(), 2);
    let fl_p = builder.add_field("fluid_left_p", fl_mesh.n_nodes(), 1);
    let fr_v = builder.add_field("fluid_right_v", fr_mesh.n_nodes(), 2);
    let fr_p = builder.add_field("fluid_right_p", fr_mesh.n_nodes(), 1);
    let p_v = builder.add_field("poro_v", layer_mesh.n_nodes(), 2);
    let p_u = builder.add_field("poro_u", layer_mesh.n_nodes(), 2);
    let p_p = builder.add_field("poro_p", layer_mesh.n_nodes(), 1);
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
    tie_matching(
        &mut builder,
        p_u,
        &layer_mesh,
        "ps_top",
        s1_u,
        &s1_mesh,
        "ps_s1",
        tol,
    )?;
    let map = builder.build();

    let ids = FieldIds {
        solids: vec![s1_u, s2_u],
        fluids: vec![(fl_v, fl_p), (fr_v, fr_p)],
        poro: Some((p_v, p_u, p_p)),
        lambda: None,
    };

    // Homogeneous Dirichlet constraints.
    let mut dirichlet = Vec::new();
    for n in collect_tag_nodes(&s2_mesh, &["fixed"])? {
        dirichlet.push(map.index(s2_u, n, 0));
        dirichlet.push(map.index(s2_u, n, 1));
    }
    // Tangential slide on the loaded top of the upper block.
    for n in collect_tag_nodes(&s1_mesh, &["gp"])? {
        dirichlet.push(map.index(s1_u, n, 0));
    }
    // Sealed layer ends: fixed skeleton, zero normal seepage velocity.
    for n in collect_tag_nodes(&layer_mesh, &["sealed"])? {
        dirichlet.push(map.index(p_u, n, 0));
        dirichlet.push(map.index(p_u, n, 1));
        dirichlet.push(map.index(p_v, n, 0));
    }
    // Tangential-Dirichlet inflow/outflow and slip tops (zero y-velocity).
    for n in collect_tag_nodes(&fl_mesh, &["inflow", "slip_top"])? {
        dirichlet.push(map.index(fl_v, n, 1));
    }
    for n in collect_tag_nodes(&fr_mesh, &["outflow", "slip_top"])? {
        dirichlet.push(map.index(fr_v, n, 1));
    }
    dirichlet.sort_unstable();
    dirichlet.dedup();

    // Load schedules: 0 = inflow traction ramp, 1 = solid staircase.
    let fluid_ramp = LoadSchedule {
        knots: vec![(0.0, 0.0), (cfg.loads.fluid_ramp_end, cfg.loads.fluid_max)],
        direction: Vec2::new(1.0, 0.0),
    };
    let mut knots = vec![(0.0, 0.0), (cfg.loads.fluid_ramp_end, 0.0)];
    let mut t = cfg.loads.fluid_ramp_end;
    for &level in &cfg.loads.solid_levels {
        knots.push((t + 1e-9, level));
        t += cfg.loads.solid_plateau;
        knots.push((t, level));
    }
    let solid_stairs = LoadSchedule {
        knots,
        direction: Vec2::new(0.0, -1.0),
    };

    let fluid_params = FluidParams {
        rho: m.fluid.rho,
        mu: m.fluid.mu,
        include_convection: true,
        supg: true,
        pspg: true,
        lsic: true,
    };
    let solids = vec![
        SolidDomain {
            mesh: s1_mesh,
            mat: m.solid1,
            fu: s1_u,
            dynamic: true,
            body_force: Vec2::zero(),
            neumann: vec![("gp".into(), 1)],
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
    let fluids = vec![
        FluidDomain {
            mesh: fl_mesh,
            fv: fl_v,
            fp: fl_p,
            params: fluid_params,
            body_force: Vec2::zero(),
            body_force_fn: None,
            neumann: vec![("inflow".into(), 0)],
            gamma_ghost_v: cfg.numerics.ghost_gamma_v,
            gamma_ghost_p: cfg.numerics.ghost_gamma_p,
        },
        FluidDomain {
            mesh: fr_mesh,
            fv: fr_v,
            fp: fr_p,
            params: fluid_params,
            body_force: Vec2::zero(),
            body_force_fn: None,
            neumann: vec![],
            gamma_ghost_v: cfg.numerics.ghost_gamma_v,
            gamma_ghost_p: cfg.numerics.ghost_gamma_p,
        },
    ];
    let poro = PoroDomain {
        mesh: layer_mesh,
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
        mass_flux_tags: vec![
            "fp_left".into(),
            "fp_right".into(),
            "ps_top".into(),
            "ps_bottom".into(),
        ],
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
        loads: vec![fluid_ramp, solid_stairs],
        nitsche,
        cut_fluids: vec![],
        fitted_fsi: vec![
            FittedInterface {
                fluid_dom: 0,
                fluid_tag: "fsi".into(),
                other: OtherSide::Solid(0),
            },
            FittedInterface {
                fluid_dom: 1,
                fluid_tag: "fsi".into(),
                other: OtherSide::Solid(0),
            },
        ],
        fitted_fpi: vec![
            FittedInterface {
                fluid_dom: 0,
                fluid_tag: "fpi".into(),
                other: OtherSide::Poro,
            },
            FittedInterface {
                fluid_dom: 1,
                fluid_tag: "fpi".into(),
                other: OtherSide::Poro,
            },
        ],
        ps_impermeable: vec!["ps_top".into(), "ps_bottom".into()],
        contact: None::<ContactConfig>,
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

    Ok(Scenario {
        kind: ScenarioKind::Leakage,
        sys,
        scheme,
        settings,
        config: cfg.clone(),
        qoi_channels: vec![
            "solid_load".into(),
            "fluid_load".into(),
            "leak_rate".into(),
            "flux_in".into(),
            "flux_out".into(),
            "mean_porosity".into(),
            "layer_height".into(),
        ],
        section_x: l / 2.0,
        sel_solid_nodes: Vec::new(),
        sel_poro_node: None,
    })
}
