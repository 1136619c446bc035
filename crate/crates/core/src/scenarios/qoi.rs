//! Quantity-of-interest evaluation: leak rate through a cross section of the
//! deformed layer, boundary fluxes, node traces, and the QoI time series with
//! its comma-separated on-disk format.

use crate::constitutive::solve_porosity;
use crate::error::{io_err, Error, Result};
use crate::math::{gauss_1d, Mat2, Vec2};
use crate::solver::{State, System};
use std::path::Path;

/// Named scalar channels sampled once per accepted step.
#[derive(Clone, Debug, Default)]
pub struct QoISeries {
    pub channels: Vec<String>,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl QoISeries {
    pub fn new(channels: &[&str]) -> Self {
        Self {
            channels: channels.iter().map(|s| s.to_string()).collect(),
            times: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, row: Vec<f64>) {
        assert_eq!(row.len(), self.channels.len());
        if let Some(last) = self.times.last() {
            assert!(t > *last, "time stamps must be strictly increasing");
        }
        self.times.push(t);
        self.rows.push(row);
    }

    pub fn channel(&self, name: &str) -> Option<Vec<(f64, f64)>> {
        let idx = self.channels.iter().position(|c| c == name)?;
        Some(
            self.times
                .iter()
                .zip(&self.rows)
                .map(|(t, row)| (*t, row[idx]))
                .collect(),
        )
    }

    /// Comma-separated text: header row with channel names, one row per
    /// accepted step, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time");
        for c in &self.channels {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for (t, row) in self.times.iter().zip(&self.rows) {
            s.push_str(&format!("{t:.17e}"));
            for v in row {
                s.push_str(&format!(",{v:.17e}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| io_err(path, e))
    }

    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse {
            path: origin.into(),
            line: 1,
            message: "empty QoI file".into(),
        })?;
        let mut cols = header.split(',');
        if cols.next() != Some("time") {
            return Err(Error::Parse {
                path: origin.into(),
                line: 1,
                message: "first column must be 'time'".into(),
            });
        }
        let channels: Vec<String> = cols.map(|s| s.to_string()).collect();
        let mut series = QoISeries {
            channels,
            times: Vec::new(),
            rows: Vec::new(),
        };
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    path: origin.into(),
                    line: i + 2,
                    message: "bad number".into(),
                })?;
            if vals.len() != series.channels.len() + 1 {
                return Err(Error::Parse {
                    path: origin.into(),
                    line: i + 2,
                    message: "wrong column count".into(),
                });
            }
            series.times.push(vals[0]);
            series.rows.push(vals[1..].to_vec());
        }
        Ok(series)
    }
}

/// Leak rate through the vertical cross section X = x_section of the
/// poroelastic layer: integral of phi (v^P - udot) . (J F^-T e_x) over the
/// reference section (Nanson-mapped deformed normal).
pub fn leak_rate(sys: &System, state: &State, x_section: f64) -> Result<f64> {
    let poro = sys
        .poro
        .as_ref()
        .ok_or_else(|| Error::Geometry("leak rate needs a poroelastic layer".into()))?;
    let (pv, pu, _pp) = sys.ids.poro.expect("poro ids");
    let mesh = &poro.mesh;
    let (gp, gw) = gauss_1d(2);
    let mut total = 0.0;
    let mut crossed = false;
    for c in 0..mesh.n_cells() {
        let coords = mesh.cell_coords(c);
        let (x0, x1) = (coords[0].x, coords[1].x);
        if !(x_section >= x0 && x_section < x1 || (c == mesh.n_cells() - 1 && x_section == x1)) {
            continue;
        }
        crossed = true;
        let xi = 2.0 * (x_section - x0) / (x1 - x0) - 1.0;
        let half_dy = 0.5 * (coords[3].y - coords[0].y);
        let nodes = mesh.cells[c];
        for (k, &eta) in gp.iter().enumerate() {
            let (n, dn_ref) = crate::mesh::shape_eval(xi, eta);
            let (_, jac, _) = crate::mesh::isoparametric_map(&coords, xi, eta)?;
            let dn0 = crate::mesh::physical_gradients(&jac, &dn_ref);
            let mut grad_u = Mat2::<f64>::zero();
            let mut v = Vec2::zero();
            let mut udot = Vec2::zero();
            let mut p = 0.0;
            for i in 0..4 {
                let ui = Vec2::new(
                    state.x[sys.map.index(pu, nodes[i], 0)],
                    state.x[sys.map.index(pu, nodes[i], 1)],
                );
                let wi = Vec2::new(
                    state.w[sys.map.index(pu, nodes[i], 0)],
                    state.w[sys.map.index(pu, nodes[i], 1)],
                );
                let vi = Vec2::new(
                    state.x[sys.map.index(pv, nodes[i], 0)],
                    state.x[sys.map.index(pv, nodes[i], 1)],
                );
                grad_u.a[0][0] += ui.x * dn0[i].x;
                grad_u.a[0][1] += ui.x * dn0[i].y;
                grad_u.a[1][0] += ui.y * dn0[i].x;
                grad_u.a[1][1] += ui.y * dn0[i].y;
                v += vi.scale(n[i]);
                udot += wi.scale(n[i]);
                p += state.x[sys.map.index(sys.ids.poro.unwrap().2, nodes[i], 0)] * n[i];
            }
            let f = Mat2::identity().add(&grad_u);
            let j = f.det();
            let phi = solve_porosity(j, p, &poro.mat)?.phi;
            // Nanson: n da = J F^-T N dA with N = e_x on the reference line.
            let jfinvt_ex = f.inverse().transpose().mul_vec(Vec2::new(1.0, 0.0)).scale(j);
            total += gw[k] * half_dy * phi * (v - udot).dot(jfinvt_ex);
        }
    }
    if !crossed {
        return Err(Error::Geometry(format!(
            "cross section x = {x_section} misses the poroelastic layer"
        )));
    }
    Ok(total)
}

/// Current layer thickness along the section (length of the mapped line).
pub fn layer_height(sys: &System, state: &State, x_section: f64) -> Result<f64> {
    let poro = sys
        .poro
        .as_ref()
        .ok_or_else(|| Error::Geometry("layer height needs a poroelastic layer".into()))?;
    let (_, pu, _) = sys.ids.poro.expect("poro ids");
    let mesh = &poro.mesh;
    let (gp, gw) = gauss_1d(2);
    let mut total = 0.0;
    for c in 0..mesh.n_cells() {
        let coords = mesh.cell_coords(c);
        let (x0, x1) = (coords[0].x, coords[1].x);
        if !(x_section >= x0 && x_section < x1 || (c == mesh.n_cells() - 1 && x_section == x1)) {
            continue;
        }
        let xi = 2.0 * (x_section - x0) / (x1 - x0) - 1.0;
        let half_dy = 0.5 * (coords[3].y - coords[0].y);
        let nodes = mesh.cells[c];
        for (k, &eta) in gp.iter().enumerate() {
            let (_, dn_ref) = crate::mesh::shape_eval(xi, eta);
            let (_, jac, _) = crate::mesh::isoparametric_map(&coords, xi, eta)?;
            let dn0 = crate::mesh::physical_gradients(&jac, &dn_ref);
            let mut grad_u = Mat2::<f64>::zero();
            for i in 0..4 {
                let ui = Vec2::new(
                    state.x[sys.map.index(pu, nodes[i], 0)],
                    state.x[sys.map.index(pu, nodes[i], 1)],
                );
                grad_u.a[0][0] += ui.x * dn0[i].x;
                grad_u.a[0][1] += ui.x * dn0[i].y;
                grad_u.a[1][0] += ui.y * dn0[i].x;
                grad_u.a[1][1] += ui.y * dn0[i].y;
            }
            let f = Mat2::identity().add(&grad_u);
            let fy = f.mul_vec(Vec2::new(0.0, 1.0));
            total += gw[k] * half_dy * fy.norm();
        }
    }
    Ok(total)
}

/// Mean porosity of the layer (area-weighted at cell centers, current J).
pub fn mean_porosity(sys: &System, state: &State) -> Result<f64> {
    let poro = sys
        .poro
        .as_ref()
        .ok_or_else(|| Error::Geometry("mean porosity needs a poroelastic layer".into()))?;
    let (_, pu, pp) = sys.ids.poro.expect("poro ids");
    let mesh = &poro.mesh;
    let mut num = 0.0;
    let mut den = 0.0;
    for c in 0..mesh.n_cells() {
        let coords = mesh.cell_coords(c);
        let (_, jac, det) = crate::mesh::isoparametric_map(&coords, 0.0, 0.0)?;
        let (n, dn_ref) = crate::mesh::shape_eval(0.0, 0.0);
        let dn0 = crate::mesh::physical_gradients(&jac, &dn_ref);
        let nodes = mesh.cells[c];
        let mut grad_u = Mat2::<f64>::zero();
        let mut p = 0.0;
        for i in 0..4 {
            let ui = Vec2::new(
                state.x[sys.map.index(pu, nodes[i], 0)],
                state.x[sys.map.index(pu, nodes[i], 1)],
            );
            grad_u.a[0][0] += ui.x * dn0[i].x;
            grad_u.a[0][1] += ui.x * dn0[i].y;
            grad_u.a[1][0] += ui.y * dn0[i].x;
            grad_u.a[1][1] += ui.y * dn0[i].y;
            p += state.x[sys.map.index(pp, nodes[i], 0)] * n[i];
        }
        let j = Mat2::identity().add(&grad_u).det();
        let phi = solve_porosity(j, p, &poro.mat)?.phi;
        let area = 4.0 * det;
        num += phi * area;
        den += area;
    }
    Ok(num / den)
}

/// Boundary flux: integral of v . n_ref over the tagged fluid boundary.
pub fn boundary_flux(
    sys: &System,
    state: &State,
    fluid_dom: usize,
    tag: &str,
    n_ref: Vec2<f64>,
) -> Result<f64> {
    let dom = &sys.fluids[fluid_dom];
    let (fv, _) = sys.ids.fluids[fluid_dom];
    let (gp, gw) = gauss_1d(2);
    let mut total = 0.0;
    for &(cell, e) in dom.mesh.tagged(tag)? {
        let (a, b) = dom.mesh.edge_nodes(cell, e);
        let (pa, pb) = (dom.mesh.nodes[a], dom.mesh.nodes[b]);
        let half = 0.5 * pa.dist(pb);
        let va = Vec2::new(
            state.x[sys.map.index(fv, a, 0)],
            state.x[sys.map.index(fv, a, 1)],
        );
        let vb = Vec2::new(
            state.x[sys.map.index(fv, b, 0)],
            state.x[sys.map.index(fv, b, 1)],
        );
        for (k, &xi) in gp.iter().enumerate() {
            let s = 0.5 * (xi + 1.0);
            let v = va.scale(1.0 - s) + vb.scale(s);
            total += gw[k] * half * v.dot(n_ref);
        }
    }
    Ok(total)
}

/// 1D Darcy series-resistance oracle for the leakage configuration:
/// q = (K / mu) (dp / l) * delta per unit depth.
pub fn darcy_leak_oracle(k0: f64, mu: f64, dp: f64, l: f64, delta: f64) -> f64 {
    k0 / mu * dp / l * delta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let mut s = QoISeries::new(&["leak_rate", "flux_in"]);
        s.push(0.05, vec![1.0 / 3.0, -2.718281828459045e-7]);
        s.push(0.10, vec![9.87654321e12, 0.0]);
        let text = s.to_csv();
        let back = QoISeries::from_csv(&text, "test").unwrap();
        assert_eq!(back.channels, s.channels);
        for (a, b) in s.times.iter().zip(&back.times) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (ra, rb) in s.rows.iter().zip(&back.rows) {
            for (a, b) in ra.iter().zip(rb) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn empty_series_is_header_only() {
        let s = QoISeries::new(&["a", "b"]);
        assert_eq!(s.to_csv(), "time,a,b\n");
    }

    #[test]
    fn one_step_has_one_row() {
        let mut s = QoISeries::new(&["a"]);
        s.push(0.05, vec![1.0]);
        let text = s.to_csv();
        assert_eq!(text.lines().count(), 2);
        let stamp: f64 = text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(stamp.to_bits(), 0.05f64.to_bits());
    }

    #[test]
    fn darcy_oracle_value() {
        // K = 4.6e-4 mm^2, mu = 1e-3 Pa s, dp = 10 kPa, l = 10 mm, delta = 0.1 mm
        let q = darcy_leak_oracle(4.6e-4, 1e-3, 1.0e4, 10.0, 0.1);
        assert!((q - 46.0).abs() < 1e-10, "q = {q}");
    }
}
