//! Field snapshots in legacy VTK ASCII unstructured-grid format plus the run
//! manifest.

use crate::constitutive::solve_porosity;
use crate::error::{io_err, Result};
use crate::interface::ContactNodeState;
use crate::math::{Mat2, Vec2};
use crate::mesh::Mesh2D;
use crate::solver::{State, System};
use std::fmt::Write as _;
use std::path::Path;

fn vtk_header(title: &str, mesh: &Mesh2D, positions: &[Vec2<f64>]) -> String {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{title}");
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", positions.len());
    for p in positions {
        let _ = writeln!(s, "{:.9e} {:.9e} 0.0", p.x, p.y);
    }
    let _ = writeln!(s, "CELLS {} {}", mesh.n_cells(), 5 * mesh.n_cells());
    for c in &mesh.cells {
        let _ = writeln!(s, "4 {} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_cells());
    for _ in 0..mesh.n_cells() {
        s.push_str("9\n");
    }
    s
}

fn write_point_vectors(s: &mut String, name: &str, vals: &[Vec2<f64>]) {
    let _ = writeln!(s, "VECTORS {name} double");
    for v in vals {
        let _ = writeln!(s, "{:.9e} {:.9e} 0.0", v.x, v.y);
    }
}

fn write_point_scalars(s: &mut String, name: &str, vals: &[f64]) {
    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in vals {
        let _ = writeln!(s, "{v:.9e}");
    }
}

/// Write one snapshot per physical domain: deformed solids with displacement
/// and velocity, the poro layer with displacement/velocity/pressure and
/// cell-wise porosity plus the active-contact flag, and the fluid background
/// with velocity/pressure and the cell status.
pub fn write_vtk_snapshots(
    sys: &System,
    state: &State,
    contact: &[ContactNodeState],
    cache: &crate::solver::GeometryCache,
    dir: &Path,
    step: usize,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    // Solids.
    for (b, dom) in sys.solids.iter().enumerate() {
        let fu = sys.ids.solids[b];
        let mut pos = Vec::with_capacity(dom.mesh.n_nodes());
        let mut disp = Vec::with_capacity(dom.mesh.n_nodes());
        let mut vel = Vec::with_capacity(dom.mesh.n_nodes());
        for n in 0..dom.mesh.n_nodes() {
            let u = Vec2::new(
                state.x[sys.map.index(fu, n, 0)],
                state.x[sys.map.index(fu, n, 1)],
            );
            let w = Vec2::new(
                state.w[sys.map.index(fu, n, 0)],
                state.w[sys.map.index(fu, n, 1)],
            );
            pos.push(dom.mesh.nodes[n] + u);
            disp.push(u);
            vel.push(w);
        }
        let mut s = vtk_header(&format!("solid{b} t={:.6e}", state.t), &dom.mesh, &pos);
        let _ = writeln!(s, "POINT_DATA {}", pos.len());
        write_point_vectors(&mut s, "displacement", &disp);
        write_point_vectors(&mut s, "velocity", &vel);
        let path = dir.join(format!("solid{b}_{step:06}.vtk"));
        std::fs::write(&path, s).map_err(|e| io_err(&path, e))?;
    }
    // Poro layer.
    if let Some(poro) = &sys.poro {
        let (pv, pu, pp) = sys.ids.poro.unwrap();
        let mesh = &poro.mesh;
        let mut pos = Vec::with_capacity(mesh.n_nodes());
        let mut disp = Vec::with_capacity(mesh.n_nodes());
        let mut vel = Vec::with_capacity(mesh.n_nodes());
        let mut pres = Vec::with_capacity(mesh.n_nodes());
        let mut active = vec![0.0; mesh.n_nodes()];
        for st in contact {
            if st.active {
                active[st.node] = 1.0;
            }
        }
        for n in 0..mesh.n_nodes() {
            let u = Vec2::new(
                state.x[sys.map.index(pu, n, 0)],
                state.x[sys.map.index(pu, n, 1)],
            );
            pos.push(mesh.nodes[n] + u);
            disp.push(u);
            vel.push(Vec2::new(
                state.x[sys.map.index(pv, n, 0)],
                state.x[sys.map.index(pv, n, 1)],
            ));
            pres.push(state.x[sys.map.index(pp, n, 0)]);
        }
        // Element-wise constant porosity from cell-center kinematics.
        let mut phi_cells = Vec::with_capacity(mesh.n_cells());
        for c in 0..mesh.n_cells() {
            let coords = mesh.cell_coords(c);
            let (n, dn_ref) = crate::mesh::shape_eval(0.0, 0.0);
            let (_, jac, _) = crate::mesh::isoparametric_map(&coords, 0.0, 0.0)?;
            let dn0 = crate::mesh::physical_gradients(&jac, &dn_ref);
            let nodes = mesh.cells[c];
            let mut grad_u = Mat2::<f64>::zero();
            let mut p = 0.0;
            for i in 0..4 {
                let ui = disp[nodes[i]];
                grad_u.a[0][0] += ui.x * dn0[i].x;
                grad_u.a[0][1] += ui.x * dn0[i].y;
                grad_u.a[1][0] += ui.y * dn0[i].x;
                grad_u.a[1][1] += ui.y * dn0[i].y;
                p += pres[nodes[i]] * n[i];
            }
            let j = Mat2::identity().add(&grad_u).det();
            phi_cells.push(solve_porosity(j.max(1e-3), p, &poro.mat)?.phi);
        }
        let mut s = vtk_header(&format!("poro t={:.6e}", state.t), mesh, &pos);
        let _ = writeln!(s, "POINT_DATA {}", pos.len());
        write_point_vectors(&mut s, "displacement", &disp);
        write_point_vectors(&mut s, "velocity", &vel);
        write_point_scalars(&mut s, "pressure", &pres);
        write_point_scalars(&mut s, "contact_active", &active);
        let _ = writeln!(s, "CELL_DATA {}", mesh.n_cells());
        let _ = writeln!(s, "SCALARS porosity double 1\nLOOKUP_TABLE default");
        for v in &phi_cells {
            let _ = writeln!(s, "{v:.9e}");
        }
        let path = dir.join(format!("poro_{step:06}.vtk"));
        std::fs::write(&path, s).map_err(|e| io_err(&path, e))?;
    }
    // Fluids (Eulerian mesh).
    for (f, dom) in sys.fluids.iter().enumerate() {
        let (fv, fp) = sys.ids.fluids[f];
        let mesh = &dom.mesh;
        let pos: Vec<Vec2<f64>> = mesh.nodes.clone();
        let mut vel = Vec::with_capacity(mesh.n_nodes());
        let mut pres = Vec::with_capacity(mesh.n_nodes());
        for n in 0..mesh.n_nodes() {
            vel.push(Vec2::new(
                state.x[sys.map.index(fv, n, 0)],
                state.x[sys.map.index(fv, n, 1)],
            ));
            pres.push(state.x[sys.map.index(fp, n, 0)]);
        }
        let mut s = vtk_header(&format!("fluid{f} t={:.6e}", state.t), mesh, &pos);
        let _ = writeln!(s, "POINT_DATA {}", pos.len());
        write_point_vectors(&mut s, "velocity", &vel);
        write_point_scalars(&mut s, "pressure", &pres);
        if let Some(cut) = &cache.cut[f] {
            let status: Vec<f64> = cut
                .cells
                .iter()
                .map(|c| match c.status {
                    crate::cutcell::CellStatus::Void => 0.0,
                    crate::cutcell::CellStatus::Cut => 1.0,
                    crate::cutcell::CellStatus::Full => 2.0,
                })
                .collect();
            let _ = writeln!(s, "CELL_DATA {}", mesh.n_cells());
            let _ = writeln!(s, "SCALARS status double 1\nLOOKUP_TABLE default");
            for v in &status {
                let _ = writeln!(s, "{v:.1}");
            }
        }
        let path = dir.join(format!("fluid{f}_{step:06}.vtk"));
        std::fs::write(&path, s).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

/// Run manifest: resolved configuration plus solver diagnostics summary.
pub fn write_manifest(
    dir: &Path,
    resolved_config_toml: &str,
    summary_lines: &[String],
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut s = String::from("roughfsi run manifest v1\n\n[resolved config]\n");
    s.push_str(resolved_config_toml);
    s.push_str("\n[solver summary]\n");
    for line in summary_lines {
        s.push_str(line);
        s.push('\n');
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, s).map_err(|e| io_err(&path, e))
}
