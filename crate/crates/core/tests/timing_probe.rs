use mpm_core::geometry::{rasterize, WaveguideGeometry};
use mpm_core::modes::{solve_modes_with_diagnostics, ModeLabel};
use std::time::Instant;

#[test]
#[ignore]
fn time_design_point_10nm() {
    let g = WaveguideGeometry::design_point();
    let t0 = Instant::now();
    let grid_s = rasterize(&g, 10.0, 1.530).unwrap();
    let (ms, diag_s) = solve_modes_with_diagnostics(&grid_s, 1.530, 4, grid_s.n_max).unwrap();
    let t_signal = t0.elapsed();
    let te00 = ms.iter().find(|m| m.label == ModeLabel::Te00).unwrap();
    println!(
        "signal: {:?}  n_eff={:.8} res={:.2e} sweeps={} matvecs={} unknowns={}",
        t_signal, te00.n_eff, te00.residual, diag_s.sweeps, diag_s.matvecs, diag_s.unknowns
    );
    let t1 = Instant::now();
    let grid_p = rasterize(&g, 10.0, 0.765).unwrap();
    let (mp, diag_p) = solve_modes_with_diagnostics(&grid_p, 0.765, 12, grid_p.n_max).unwrap();
    let t_pump = t1.elapsed();
    let te01 = mp.iter().find(|m| m.label == ModeLabel::Te01).unwrap();
    println!(
        "pump:   {:?}  n_eff={:.8} res={:.2e} sweeps={} matvecs={} unknowns={}",
        t_pump, te01.n_eff, te01.residual, diag_p.sweeps, diag_p.matvecs, diag_p.unknowns
    );
    println!("total: {:?}", t0.elapsed());
}
