//! Cross-validation of the mode solver against reference values computed with
//! an independent shift-invert ARPACK implementation of the same
//! discretization (frozen before this solver was written).

use mpm_core::geometry::{rasterize, WaveguideGeometry};
use mpm_core::modes::{solve_modes, ModeLabel};
use mpm_core::nonlinear::overlap_factor;

#[test]
fn design_point_matches_reference_at_25nm() {
    let g = WaveguideGeometry::design_point();

    let grid_s = rasterize(&g, 25.0, 1.530).unwrap();
    let modes_s = solve_modes(&grid_s, 1.530, 4, grid_s.n_max).unwrap();
    let te00 = modes_s
        .iter()
        .find(|m| m.label == ModeLabel::Te00 && m.n_eff > 1.50)
        .expect("TE00 at 1530 nm");
    assert!(
        (te00.n_eff - 1.91020635).abs() < 5e-6,
        "TE00 n_eff = {}",
        te00.n_eff
    );
    assert!(te00.polarization_fraction > 0.95);
    assert!(
        (te00.effective_area_um2 - 0.74529).abs() < 5e-4,
        "A_eff = {}",
        te00.effective_area_um2
    );

    let grid_p = rasterize(&g, 25.0, 0.765).unwrap();
    let modes_p = solve_modes(&grid_p, 0.765, 12, grid_p.n_max).unwrap();
    let te01 = modes_p
        .iter()
        .find(|m| m.label == ModeLabel::Te01 && m.n_eff > 1.76)
        .expect("TE01 at 765 nm");
    assert!(
        (te01.n_eff - 1.91064530).abs() < 5e-6,
        "TE01 n_eff = {}",
        te01.n_eff
    );

    // overlap factors on the shared raster
    let dnor = grid_s.nonlinearity_profile();
    let dual = overlap_factor(te00, te01, &dnor).unwrap();
    let single = overlap_factor(te00, te01, &dnor.mapv(f64::abs)).unwrap();
    assert!((dual.zeta - 0.78034).abs() < 5e-4, "zeta_dual = {}", dual.zeta);
    assert!(
        (single.zeta - 0.20340).abs() < 5e-4,
        "zeta_single = {}",
        single.zeta
    );

    // solver residual invariant
    for m in modes_s.iter().chain(modes_p.iter()) {
        assert!(
            m.residual <= 1e-8,
            "residual {} for mode at n_eff {}",
            m.residual,
            m.n_eff
        );
    }
}
