//! Time-integrator orders, Newton convergence quality, active-set behavior,
//! and discrete conservation/dissipation properties on small systems.

use roughfsi::constitutive::{solve_porosity, PoroMaterial, SolidMaterial};
use roughfsi::forms::{FluidDomain, FluidParams, PoroDomain, SolidDomain, ThetaCtx};
use roughfsi::interface::{ContactNodeState, FieldIds, NitscheParams};
use roughfsi::math::{Mat2, Vec2};
use roughfsi::mesh::{build_structured_mesh, DofMapBuilder, RectTags};
use roughfsi::solver::{
    build_geometry, newton_solve_scaled, theta_step_linear, ContactConfig, LoadSchedule,
    NonlinearSettings, State, System,
};

#[test]
fn theta_scheme_scalar_orders() {
    // Steady state: derivatives vanish.
    let y1 = theta_step_linear(-1.0, 0.0, 1.0, 0.1);
    assert_eq!(y1, 0.0);
    // Backward Euler closed form on dy/dt = -y: y1 = y0 / 1.1.
    let y1 = theta_step_linear(-1.0, 1.0, 1.0, 0.1);
    assert!((y1 - 1.0 / 1.1).abs() < 1e-15);
    // theta = 0.5 shows order-2 convergence against exp(-t).
    let errors: Vec<f64> = [0.1f64, 0.05, 0.025]
        .iter()
        .map(|&dt| {
            let n = (1.0 / dt).round() as usize;
            let mut y = 1.0;
            for _ in 0..n {
                y = theta_step_linear(-1.0, y, 0.5, dt);
            }
            (y - (-1.0f64).exp()).abs()
        })
        .collect();
    let order1 = (errors[0] / errors[1]).log2();
    let order2 = (errors[1] / errors[2]).log2();
    assert!(order1 > 1.9 && order2 > 1.9, "orders {order1} {order2}");
    // theta = 1 is order 1.
    let errors: Vec<f64> = [0.1f64, 0.05]
        .iter()
        .map(|&dt| {
            let n = (1.0 / dt).round() as usize;
            let mut y = 1.0;
            for _ in 0..n {
                y = theta_step_linear(-1.0, y, 1.0, dt);
            }
            (y - (-1.0f64).exp()).abs()
        })
        .collect();
    let order = (errors[0] / errors[1]).log2();
    assert!(order > 0.9 && order < 1.2, "order {order}");
}

// Manufactured Stokes solution with homogeneous Dirichlet velocity:
// stream function psi = S x^2(1-x)^2 y^2(1-y)^2, pressure sin(pi x) sin(pi y).
const MMS_SCALE: f64 = 100.0;

fn poly_a(x: f64) -> f64 {
    x * x * (1.0 - x) * (1.0 - x)
}
fn poly_a1(x: f64) -> f64 {
    2.0 * x - 6.0 * x * x + 4.0 * x * x * x
}
fn poly_a2(x: f64) -> f64 {
    2.0 - 12.0 * x + 12.0 * x * x
}
fn poly_a3(x: f64) -> f64 {
    -12.0 + 24.0 * x
}

fn mms_velocity(p: Vec2<f64>) -> Vec2<f64> {
    Vec2::new(
        MMS_SCALE * poly_a(p.x) * poly_a1(p.y),
        -MMS_SCALE * poly_a1(p.x) * poly_a(p.y),
    )
}

fn mms_pressure(p: Vec2<f64>) -> f64 {
    MMS_SCALE * (std::f64::consts::PI * p.x).sin() * (std::f64::consts::PI * p.y).sin()
}

/// Forcing f = -mu lap(v) + grad p for mu = 1.
fn mms_forcing(p: Vec2<f64>) -> Vec2<f64> {
    let pi = std::f64::consts::PI;
    let lap_v1 = MMS_SCALE * (poly_a2(p.x) * poly_a1(p.y) + poly_a(p.x) * poly_a3(p.y));
    let lap_v2 = -MMS_SCALE * (poly_a3(p.x) * poly_a(p.y) + poly_a1(p.x) * poly_a2(p.y));
    let grad_p = Vec2::new(
        MMS_SCALE * pi * (pi * p.x).cos() * (pi * p.y).sin(),
        MMS_SCALE * pi * (pi * p.x).sin() * (pi * p.y).cos(),
    );
    Vec2::new(-lap_v1 + grad_p.x, -lap_v2 + grad_p.y)
}

struct StokesRun {
    l2_err: f64,
    newton_iterations: usize,
}

fn stokes_solve(n: usize) -> StokesRun {
    let mesh = build_structured_mesh(
        [0.0, 0.0, 1.0, 1.0],
        n,
        n,
        &RectTags::new("w", "w", "w", "w"),
    )
    .unwrap();
    let mut b = DofMapBuilder::new();
    let fv = b.add_field("fluid_v", mesh.n_nodes(), 2);
    let fp = b.add_field("fluid_p", mesh.n_nodes(), 1);
    let map = b.build();
    let mut dirichlet = Vec::new();
    for nn in roughfsi::scenarios::collect_tag_nodes(&mesh, &["w"]).unwrap() {
        dirichlet.push(map.index(fv, nn, 0));
        dirichlet.push(map.index(fv, nn, 1));
    }
    // Pin the pressure at the (0,0) corner where the manufactured p vanishes.
    dirichlet.push(map.index(fp, 0, 0));
    dirichlet.sort_unstable();
    dirichlet.dedup();
    // rho = 0 removes the transient and makes tau constant: a genuinely
    // linear Stokes system, solved in a single Newton iteration. The
    // manufactured forcing enters as a raw momentum source density.
    let sys = System {
        solids: vec![],
        fluids: vec![FluidDomain {
            mesh: mesh.clone(),
            fv,
            fp,
            params: FluidParams {
                rho: 0.0,
                mu: 1.0,
                include_convection: false,
                supg: false,
                pspg: true,
                lsic: true,
            },
            body_force: Vec2::zero(),
            body_force_fn: Some(mms_forcing),
            neumann: vec![],
            gamma_ghost_v: 0.1,
            gamma_ghost_p: 0.1,
        }],
        poro: None,
        map,
        ids: FieldIds {
            solids: vec![],
            fluids: vec![(fv, fp)],
            poro: None,
            lambda: None,
        },
        dirichlet,
        loads: vec![],
        nitsche: NitscheParams::default(),
        cut_fluids: vec![],
        fitted_fsi: vec![],
        fitted_fpi: vec![],
        ps_impermeable: vec![],
        contact: None,
        eps_area: 1e-6,
        island_threshold: 0.3,
        disp_fields: vec![],
    };
    let th = ThetaCtx {
        theta: 1.0,
        dt: 1.0,
    };
    let settings = NonlinearSettings::default();
    let state = State::zeros(sys.n_dofs());
    let mut scales = Vec::new();
    let (state, _, _, diag) =
        newton_solve_scaled(&sys, &state, &th, &settings, None, Vec::new(), &mut scales).unwrap();
    // L2 velocity error with a 3x3 Gauss rule.
    let (gp, gw) = roughfsi::math::gauss_1d(3);
    let mut err2 = 0.0;
    for c in 0..mesh.n_cells() {
        let coords = mesh.cell_coords(c);
        let nodes = mesh.cells[c];
        for (i, &xi) in gp.iter().enumerate() {
            for (j, &eta) in gp.iter().enumerate() {
                let (nsh, _) = roughfsi::mesh::shape_eval(xi, eta);
                let (x, _, det) = roughfsi::mesh::isoparametric_map(&coords, xi, eta).unwrap();
                let mut vh = Vec2::zero();
                for k in 0..4 {
                    vh += Vec2::new(
                        state.x[sys.map.index(fv, nodes[k], 0)],
                        state.x[sys.map.index(fv, nodes[k], 1)],
                    )
                    .scale(nsh[k]);
                }
                let diff = vh - mms_velocity(x);
                err2 += gw[i] * gw[j] * det * diff.norm_sq();
            }
        }
    }
    let _ = mms_pressure; // pressure field is pinned through the corner value
    StokesRun {
        l2_err: err2.sqrt(),
        newton_iterations: diag.newton_iterations,
    }
}

#[test]
fn stokes_manufactured_velocity_order_two() {
    let runs: Vec<StokesRun> = [8, 16, 32].iter().map(|&n| stokes_solve(n)).collect();
    let o1 = (runs[0].l2_err / runs[1].l2_err).log2();
    let o2 = (runs[1].l2_err / runs[2].l2_err).log2();
    assert!(
        o1 >= 1.8 && o2 >= 1.8,
        "observed velocity L2 orders {o1:.3}, {o2:.3} (errors {:.3e} {:.3e} {:.3e})",
        runs[0].l2_err,
        runs[1].l2_err,
        runs[2].l2_err
    );
    // A linear problem converges in one Newton iteration.
    assert_eq!(runs[0].newton_iterations, 1);
}

#[test]
fn newton_quadratic_on_hyperelastic_block() {
    // Static nonlinear elasticity under a single large load step; with the
    // consistent tangent the last iterations contract quadratically.
    let mesh = build_structured_mesh(
        [0.0, 0.0, 1.0, 1.0],
        3,
        3,
        &RectTags::new("bot", "free", "top", "free"),
    )
    .unwrap();
    let mut b = DofMapBuilder::new();
    let su = b.add_field("solid_u", mesh.n_nodes(), 2);
    let map = b.build();
    let mut dirichlet = Vec::new();
    for n in roughfsi::scenarios::collect_tag_nodes(&mesh, &["bot"]).unwrap() {
        dirichlet.push(map.index(su, n, 0));
        dirichlet.push(map.index(su, n, 1));
    }
    let e_mod = 1.0e6;
    let sys = System {
        solids: vec![SolidDomain {
            mesh,
            mat: SolidMaterial {
                e_mod,
                nu: 0.3,
                rho0: 0.0,
            },
            fu: su,
            dynamic: false,
            body_force: Vec2::zero(),
            neumann: vec![("top".into(), 0)],
        }],
        fluids: vec![],
        poro: None,
        map,
        ids: FieldIds {
            solids: vec![su],
            fluids: vec![],
            poro: None,
            lambda: None,
        },
        dirichlet,
        loads: vec![LoadSchedule::constant(0.15 * e_mod, Vec2::new(0.3, -1.0))],
        nitsche: NitscheParams::default(),
        cut_fluids: vec![],
        fitted_fsi: vec![],
        fitted_fpi: vec![],
        ps_impermeable: vec![],
        contact: None,
        eps_area: 1e-6,
        island_threshold: 0.3,
        disp_fields: vec![su],
    };
    let th = ThetaCtx {
        theta: 1.0,
        dt: 1.0,
    };
    let settings = NonlinearSettings {
        eps: 1e-12,
        max_newton: 30,
        ..Default::default()
    };
    let mut scales = Vec::new();
    let (_, _, _, diag) =
        newton_solve_scaled(&sys, &State::zeros(sys.n_dofs()), &th, &settings, None, Vec::new(), &mut scales)
            .unwrap();
    let h = &diag.history;
    assert!(h.len() >= 4, "history {h:?}");
    // Quadratic contraction over the final iterations (above the noise floor).
    let mut checked = 0;
    for w in h.windows(2) {
        let (r0, r1) = (w[0], w[1]);
        if r0 < 1e-2 && r1 > 1e-14 {
            assert!(
                r1 <= r0.powf(1.7),
                "not quadratic: {r0:.3e} -> {r1:.3e} (history {h:?})"
            );
            checked += 1;
        }
    }
    assert!(checked >= 2, "too few contraction pairs checked: {h:?}");
}

#[test]
fn wrongly_active_guess_converges_to_empty_set() {
    // Poro strip and a separate solid block above it with a visible gap and
    // no loads: the solution has an empty active set. Starting from an
    // all-active guess must converge with at least one active-set change.
    let poro_mesh = build_structured_mesh(
        [0.0, 0.0, 1.0, 0.1],
        4,
        1,
        &RectTags::new("pbot", "pside", "contact", "pside"),
    )
    .unwrap();
    let solid_mesh = build_structured_mesh(
        [0.0, 0.15, 1.0, 0.3],
        4,
        1,
        &RectTags::new("scontact", "sside", "stop", "sside"),
    )
    .unwrap();
    let mat = PoroMaterial {
        e_mod: 1.0e4,
        nu: 0.0,
        c_tilde: 0.0,
        alpha: 1.0,
        kappa_vol: 1.0e6,
        eta_pen: 1.0,
        phi0: 0.5,
        k0: 1.0e-2,
        alpha_bj: 1.0,
        rho0_solid: 1.0,
    };
    let mut b = DofMapBuilder::new();
    let su = b.add_field("solid_u", solid_mesh.n_nodes(), 2);
    let pv = b.add_field("poro_v", poro_mesh.n_nodes(), 2);
    let pu = b.add_field("poro_u", poro_mesh.n_nodes(), 2);
    let pp = b.add_field("poro_p", poro_mesh.n_nodes(), 1);
    let contact_nodes = roughfsi::scenarios::collect_tag_nodes(&poro_mesh, &["contact"]).unwrap();
    let lam = b.add_field("lambda", contact_nodes.len(), 2);
    let map = b.build();
    let mut dirichlet = Vec::new();
    for n in roughfsi::scenarios::collect_tag_nodes(&poro_mesh, &["pbot"]).unwrap() {
        dirichlet.push(map.index(pu, n, 0));
        dirichlet.push(map.index(pu, n, 1));
        dirichlet.push(map.index(pv, n, 1));
    }
    // Keep the free-floating block tame: constrain horizontal motion.
    for n in 0..solid_mesh.n_nodes() {
        dirichlet.push(map.index(su, n, 0));
    }
    dirichlet.sort_unstable();
    dirichlet.dedup();
    let sys = System {
        solids: vec![SolidDomain {
            mesh: solid_mesh.clone(),
            mat: SolidMaterial {
                e_mod: 1.0e4,
                nu: 0.3,
                rho0: 1.0,
            },
            fu: su,
            dynamic: true,
            body_force: Vec2::zero(),
            neumann: vec![],
        }],
        fluids: vec![],
        poro: Some(PoroDomain {
            mesh: poro_mesh.clone(),
            mat,
            mu_f: 1.0,
            rho_f: 1.0,
            fv: pv,
            fu: pu,
            fp: pp,
            dynamic: true,
            body_force_fluid: Vec2::zero(),
            body_force_mixture: Vec2::zero(),
            neumann: vec![],
            neumann_pore: vec![],
            mass_flux_tags: vec!["contact".into()],
            pspg: true,
        }),
        map,
        ids: FieldIds {
            solids: vec![su],
            fluids: vec![],
            poro: Some((pv, pu, pp)),
            lambda: Some(lam),
        },
        dirichlet,
        loads: vec![],
        nitsche: NitscheParams::default(),
        cut_fluids: vec![],
        fitted_fsi: vec![],
        fitted_fpi: vec![],
        ps_impermeable: vec![],
        contact: Some(ContactConfig {
            poro_tag: "contact".into(),
            solid_body: 0,
            solid_tag: "scontact".into(),
            c_n: 1e4 / 0.1,
        }),
        eps_area: 1e-6,
        island_threshold: 0.3,
        disp_fields: vec![su, pu],
    };
    let th = ThetaCtx {
        theta: 1.0,
        dt: 0.1,
    };
    // Build the wrongly-active initial contact states.
    let zero = State::zeros(sys.n_dofs());
    let cache = build_geometry(&sys, &zero, 1.0, 0.1).unwrap();
    let mortar = cache.mortar.as_ref().unwrap();
    let states: Vec<ContactNodeState> = mortar
        .nodes
        .iter()
        .enumerate()
        .map(|(j, &node)| ContactNodeState {
            node,
            lambda: Vec2::zero(),
            gap: 0.0,
            f_n: 0.0,
            n_smooth: mortar.normals[j],
            active: true,
            c_n: mortar.c_n,
        })
        .collect();
    let settings = NonlinearSettings::default();
    let mut scales = Vec::new();
    let (_, final_states, _, diag) =
        newton_solve_scaled(&sys, &zero, &th, &settings, Some(cache), states, &mut scales).unwrap();
    assert!(
        diag.active_set_cycles >= 2,
        "expected at least one active-set change, cycles = {}",
        diag.active_set_cycles
    );
    assert!(final_states.iter().all(|s| !s.active), "final set not empty");
}

#[test]
fn channel_flow_kinetic_energy_decays_after_forcing_removed() {
    let mesh = build_structured_mesh(
        [0.0, 0.0, 2.0, 0.5],
        8,
        4,
        &RectTags::new("wall", "open", "wall", "inflow"),
    )
    .unwrap();
    let mut b = DofMapBuilder::new();
    let fv = b.add_field("fluid_v", mesh.n_nodes(), 2);
    let fp = b.add_field("fluid_p", mesh.n_nodes(), 1);
    let map = b.build();
    let mut dirichlet = Vec::new();
    for n in roughfsi::scenarios::collect_tag_nodes(&mesh, &["wall"]).unwrap() {
        dirichlet.push(map.index(fv, n, 0));
        dirichlet.push(map.index(fv, n, 1));
    }
    for n in roughfsi::scenarios::collect_tag_nodes(&mesh, &["inflow"]).unwrap() {
        dirichlet.push(map.index(fv, n, 1));
    }
    dirichlet.sort_unstable();
    dirichlet.dedup();
    let sys = System {
        solids: vec![],
        fluids: vec![FluidDomain {
            mesh: mesh.clone(),
            fv,
            fp,
            params: FluidParams {
                rho: 1.0,
                mu: 0.05,
                include_convection: true,
                supg: true,
                pspg: true,
                lsic: true,
            },
            body_force: Vec2::zero(),
            body_force_fn: None,
            neumann: vec![("inflow".into(), 0)],
            gamma_ghost_v: 0.1,
            gamma_ghost_p: 0.1,
        }],
        poro: None,
        map,
        ids: FieldIds {
            solids: vec![],
            fluids: vec![(fv, fp)],
            poro: None,
            lambda: None,
        },
        dirichlet,
        loads: vec![LoadSchedule {
            knots: vec![(0.0, 1.0), (0.5, 1.0), (0.5 + 1e-9, 0.0)],
            direction: Vec2::new(1.0, 0.0),
        }],
        nitsche: NitscheParams::default(),
        cut_fluids: vec![],
        fitted_fsi: vec![],
        fitted_fpi: vec![],
        ps_impermeable: vec![],
        contact: None,
        eps_area: 1e-6,
        island_threshold: 0.3,
        disp_fields: vec![],
    };
    let settings = NonlinearSettings::default();
    let mut state = State::zeros(sys.n_dofs());
    let mut cache = None;
    let mut active = Vec::new();
    let mut scales = Vec::new();
    let ke = |state: &State| -> f64 {
        let mut e = 0.0;
        for c in 0..mesh.n_cells() {
            let coords = mesh.cell_coords(c);
            let nodes = mesh.cells[c];
            for (xi, eta, w) in roughfsi::math::gauss_2x2() {
                let (nsh, _) = roughfsi::mesh::shape_eval(xi, eta);
                let (_, _, det) = roughfsi::mesh::isoparametric_map(&coords, xi, eta).unwrap();
                let mut v = Vec2::zero();
                for k in 0..4 {
                    v += Vec2::new(
                        state.x[sys.map.index(fv, nodes[k], 0)],
                        state.x[sys.map.index(fv, nodes[k], 1)],
                    )
                    .scale(nsh[k]);
                }
                e += 0.5 * w * det * v.norm_sq();
            }
        }
        e
    };
    let mut energies = Vec::new();
    for _ in 0..15 {
        let th = ThetaCtx {
            theta: 1.0,
            dt: 0.1,
        };
        let (s, a, c, _) =
            newton_solve_scaled(&sys, &state, &th, &settings, cache, active, &mut scales).unwrap();
        state = s;
        active = a;
        cache = Some(c);
        energies.push((state.t, ke(&state)));
    }
    // After the forcing is removed the kinetic energy is nonincreasing.
    let peak = energies
        .iter()
        .map(|(_, e)| *e)
        .fold(0.0f64, f64::max);
    assert!(peak > 0.0, "flow never developed");
    let mut last = f64::INFINITY;
    for &(t, e) in &energies {
        if t > 0.65 {
            assert!(e <= last * (1.0 + 1e-12), "energy grew at t = {t}: {e} > {last}");
            last = e;
        }
    }
}

#[test]
fn sealed_layer_conserves_fluid_content() {
    // A sealed rigid-walled layer squeezed by a mixture traction cannot lose
    // fluid: the deformed-configuration fluid content integral stays put.
    let mat = PoroMaterial {
        e_mod: 1.0e5,
        nu: 0.0,
        c_tilde: 0.0,
        alpha: 1.0,
        kappa_vol: 1.0e6,
        eta_pen: 1.0e2,
        phi0: 0.5,
        k0: 1.0e-4,
        alpha_bj: 1.0,
        rho0_solid: 1e-6,
    };
    let mesh = build_structured_mesh(
        [0.0, 0.0, 0.5, 0.2],
        3,
        2,
        &RectTags::new("bot", "side", "top", "side"),
    )
    .unwrap();
    let mut b = DofMapBuilder::new();
    let pv = b.add_field("poro_v", mesh.n_nodes(), 2);
    let pu = b.add_field("poro_u", mesh.n_nodes(), 2);
    let pp = b.add_field("poro_p", mesh.n_nodes(), 1);
    let map = b.build();
    let mut dirichlet = Vec::new();
    for n in roughfsi::scenarios::collect_tag_nodes(&mesh, &["bot"]).unwrap() {
        dirichlet.push(map.index(pu, n, 0));
        dirichlet.push(map.index(pu, n, 1));
        dirichlet.push(map.index(pv, n, 1));
    }
    for n in roughfsi::scenarios::collect_tag_nodes(&mesh, &["side"]).unwrap() {
        dirichlet.push(map.index(pu, n, 0));
        dirichlet.push(map.index(pv, n, 0));
    }
    for n in roughfsi::scenarios::collect_tag_nodes(&mesh, &["top"]).unwrap() {
        dirichlet.push(map.index(pv, n, 1));
    }
    dirichlet.sort_unstable();
    dirichlet.dedup();
    let sys = System {
        solids: vec![],
        fluids: vec![],
        poro: Some(PoroDomain {
            mesh: mesh.clone(),
            mat,
            mu_f: 1e-3,
            rho_f: 1e-6,
            fv: pv,
            fu: pu,
            fp: pp,
            dynamic: false,
            body_force_fluid: Vec2::zero(),
            body_force_mixture: Vec2::zero(),
            neumann: vec![("top".into(), 0)],
            neumann_pore: vec![],
            mass_flux_tags: vec![],
            pspg: true,
        }),
        map,
        ids: FieldIds {
            solids: vec![],
            fluids: vec![],
            poro: Some((pv, pu, pp)),
            lambda: None,
        },
        dirichlet,
        loads: vec![LoadSchedule {
            knots: vec![(0.0, 0.0), (0.5, 2.0e3)],
            direction: Vec2::new(0.0, -1.0),
        }],
        nitsche: NitscheParams::default(),
        cut_fluids: vec![],
        fitted_fsi: vec![],
        fitted_fpi: vec![],
        ps_impermeable: vec![],
        contact: None,
        eps_area: 1e-6,
        island_threshold: 0.3,
        disp_fields: vec![pu],
    };
    let fluid_content = |state: &State| -> f64 {
        let mut total = 0.0;
        for c in 0..mesh.n_cells() {
            let coords = mesh.cell_coords(c);
            let nodes = mesh.cells[c];
            for (xi, eta, w) in roughfsi::math::gauss_2x2() {
                let (nsh, dn_ref) = roughfsi::mesh::shape_eval(xi, eta);
                let (_, jac, det) = roughfsi::mesh::isoparametric_map(&coords, xi, eta).unwrap();
                let dn = roughfsi::mesh::physical_gradients(&jac, &dn_ref);
                let mut grad_u = Mat2::<f64>::zero();
                let mut p = 0.0;
                for k in 0..4 {
                    let u = Vec2::new(
                        state.x[sys.map.index(pu, nodes[k], 0)],
                        state.x[sys.map.index(pu, nodes[k], 1)],
                    );
                    grad_u.a[0][0] += u.x * dn[k].x;
                    grad_u.a[0][1] += u.x * dn[k].y;
                    grad_u.a[1][0] += u.y * dn[k].x;
                    grad_u.a[1][1] += u.y * dn[k].y;
                    p += state.x[sys.map.index(pp, nodes[k], 0)] * nsh[k];
                }
                let j = Mat2::identity().add(&grad_u).det();
                let phi = solve_porosity(j, p, &mat).unwrap().phi;
                total += w * det * phi * j;
            }
        }
        total
    };
    let settings = NonlinearSettings::default();
    let mut state = State::zeros(sys.n_dofs());
    let mut cache = None;
    let mut active = Vec::new();
    let mut scales = Vec::new();
    let initial_content = fluid_content(&state);
    for _ in 0..10 {
        let th = ThetaCtx {
            theta: 1.0,
            dt: 0.1,
        };
        let (s, a, c, _) =
            newton_solve_scaled(&sys, &state, &th, &settings, cache, active, &mut scales).unwrap();
        state = s;
        active = a;
        cache = Some(c);
        let content = fluid_content(&state);
        assert!(
            (content - initial_content).abs() < 1e-6 * initial_content,
            "fluid content drifted: {content} vs {initial_content}"
        );
    }
    // The load did do something: pressure built up inside the sealed layer.
    let mut pmax = 0.0f64;
    for n in 0..mesh.n_nodes() {
        pmax = pmax.max(state.x[sys.map.index(pp, n, 0)]);
    }
    assert!(pmax > 100.0, "sealed layer pressure did not build up: {pmax}");
}
