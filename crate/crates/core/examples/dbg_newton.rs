use roughfsi::forms::ThetaCtx;
use roughfsi::scenarios::*;
use roughfsi::solver::*;

fn main() {
    let mut cfg = default_leakage_config();
    cfg.output.qoi = false;
    let scn = setup(&cfg).unwrap();
    let sys = &scn.sys;
    let dt: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let th = ThetaCtx { theta: 1.0, dt };
    let state = State::zeros(sys.n_dofs());
    let cache = build_geometry(sys, &state, 1.0, dt).unwrap();
    let loads = sys.loads_at(&th, dt);
    let mut x = state.x.clone();
    let norm2 = |r: &[f64]| -> f64 { r.iter().map(|v| v * v).sum::<f64>().sqrt() };
    for it in 0..30 {
        let asm = assemble_monolithic(sys, &cache, &[], &x, &state, &loads, &th, true).unwrap();
        let vmax = {
            let (fv, _) = sys.ids.fluids[0];
            let mut m = 0.0f64;
            for n in 0..sys.fluids[0].mesh.n_nodes() {
                m = m.max(x[sys.map.index(fv, n, 0)].abs()).max(x[sys.map.index(fv, n, 1)].abs());
            }
            m
        };
        println!("it {it}: |R|2 = {:.4e}  vmax = {:.3e}", norm2(&asm.residual), vmax);
        if norm2(&asm.residual) < 1e-9 { break; }
        let dx = linear_solve(sys.n_dofs(), asm.triplets.as_ref().unwrap(), &asm.residual, Some(&sys.map)).unwrap();
        for (xi, di) in x.iter_mut().zip(&dx) { *xi += di; }
    }
}
