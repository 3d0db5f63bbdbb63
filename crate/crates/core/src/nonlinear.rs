//! Modal overlap factor, conversion-efficiency predictions and the
//! wavelength-scaled propagation-loss model.
//!
//! The overlap factor weights the three-field interaction integral by the
//! normalized nonlinearity profile d_Nor(x, z) = ±1/0:
//!
//! ```text
//! ζ = ∬ d_Nor·E₀₀*·E₀₀*·E₀₁ dx dz /
//!     ( |∬ |E₀₀|²E₀₀ dx dz|^(2/3) · |∬ |E₀₁|²·d_Nor·E₀₁ dx dz|^(1/3) )
//! ```
//!
//! evaluated by midpoint quadrature on the solver grid. The denominator
//! factors take absolute values before the fractional powers; the numerator
//! sign is preserved and reported.

use crate::error::{Error, Result};
use crate::modes::Mode;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

const VACUUM_PERMITTIVITY: f64 = 8.8541878128e-12; // F/m
const SPEED_OF_LIGHT: f64 = 2.99792458e8; // m/s

/// Guard below which a denominator integral is reported instead of divided.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerVariant {
    SingleLayer,
    DualLayer,
}

/// ζ with the intermediate integrals kept for audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapResult {
    pub zeta: f64,
    /// ∬ d_Nor·E₀₀²·E₀₁ dx dz (sign preserved).
    pub numerator: f64,
    /// |∬ |E₀₀|²E₀₀|^(2/3).
    pub denominator_signal: f64,
    /// |∬ |E₀₁|²·d_Nor·E₀₁|^(1/3).
    pub denominator_pump: f64,
    pub variant: LayerVariant,
}

impl OverlapResult {
    /// ζ recomputed from the stored intermediates.
    pub fn recompute(&self) -> f64 {
        self.numerator / (self.denominator_signal * self.denominator_pump)
    }
}

/// Eq.-style overlap factor between the signal TE00 and pump TE01 fields on a
/// shared grid with nonlinearity profile `d_nor`.
pub fn overlap_factor(
    signal_mode: &Mode,
    pump_mode: &Mode,
    d_nor: &Array2<f64>,
) -> Result<OverlapResult> {
    let shape = signal_mode.field.dim();
    if pump_mode.field.dim() != shape || d_nor.dim() != shape {
        return Err(Error::GridMismatch(
            signal_mode.field.len(),
            pump_mode.field.len().min(d_nor.len()),
        ));
    }
    if (signal_mode.spacing_um - pump_mode.spacing_um).abs() > 1e-12 {
        return Err(Error::GridMismatch(
            signal_mode.field.len(),
            pump_mode.field.len(),
        ));
    }
    let h2 = signal_mode.spacing_um * signal_mode.spacing_um;
    let e00 = &signal_mode.field;
    let e01 = &pump_mode.field;

    let mut numerator = 0.0;
    let mut cube_signal = 0.0;
    let mut cube_pump = 0.0;
    for ((j, i), &d) in d_nor.indexed_iter() {
        let a = e00[[j, i]];
        let b = e01[[j, i]];
        numerator += d * a * a * b;
        cube_signal += a.abs() * a * a; // |E00|² E00 for real fields
        cube_pump += b.abs() * b.abs() * d * b;
    }
    numerator *= h2;
    cube_signal *= h2;
    cube_pump *= h2;

    if cube_signal.abs() < DEGENERATE_DENOMINATOR {
        return Err(Error::DegenerateDenominator(cube_signal));
    }
    if cube_pump.abs() < DEGENERATE_DENOMINATOR {
        return Err(Error::DegenerateDenominator(cube_pump));
    }
    let denominator_signal = cube_signal.abs().powf(2.0 / 3.0);
    let denominator_pump = cube_pump.abs().powf(1.0 / 3.0);
    let variant = if d_nor.iter().any(|&d| d < 0.0) {
        LayerVariant::DualLayer
    } else {
        LayerVariant::SingleLayer
    };
    Ok(OverlapResult {
        zeta: numerator / (denominator_signal * denominator_pump),
        numerator,
        denominator_signal,
        denominator_pump,
        variant,
    })
}

/// (ζ_dual/ζ_single)² — the conversion-efficiency enhancement of the
/// dual-layer stack over the single-layer one.
pub fn enhancement_ratio(zeta_dual: f64, zeta_single: f64) -> Result<f64> {
    if zeta_single == 0.0 {
        return Err(Error::DivisionByZero("zeta_single".into()));
    }
    Ok((zeta_dual / zeta_single).powi(2))
}

/// Inputs echoed with the relative pair-generation rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EfficiencyPrediction {
    pub relative_pgr: f64,
    pub sinc2: f64,
    pub length_mm: f64,
    pub pump_power_mw: f64,
    pub d_eff_pm_per_v: f64,
    pub zeta: f64,
    pub effective_area_um2: f64,
    pub delta_k_rad_per_um: f64,
}

/// Relative PGR ∝ L²·P_p·d_eff²·ζ²/A_eff·sinc²(ΔkL/2). Consistent internal
/// units (mm² · mW · (pm/V)² / µm²); absolute calibration is a separate
/// constant.
pub fn predict_relative_pgr(
    length_mm: f64,
    pump_power_mw: f64,
    d_eff_pm_per_v: f64,
    zeta: f64,
    effective_area_um2: f64,
    delta_k_rad_per_um: f64,
) -> EfficiencyPrediction {
    let x = delta_k_rad_per_um * (length_mm * 1e3) / 2.0;
    let sinc2 = if x.abs() < 1e-12 {
        1.0
    } else {
        (x.sin() / x).powi(2)
    };
    let relative_pgr = length_mm * length_mm * pump_power_mw * d_eff_pm_per_v * d_eff_pm_per_v
        * zeta
        * zeta
        / effective_area_um2
        * sinc2;
    EfficiencyPrediction {
        relative_pgr,
        sinc2,
        length_mm,
        pump_power_mw,
        d_eff_pm_per_v,
        zeta,
        effective_area_um2,
        delta_k_rad_per_um,
    }
}

/// Measured pair-generation slope of the fabricated device, used as the
/// default absolute calibration for the relative PGR.
pub const PGR_CALIBRATION_GHZ_PER_MW: f64 = 41.77;

/// Transmissivity of the second-harmonic collection path (default).
pub const T_SH_DEFAULT: f64 = 0.35;
/// Transmissivity of the first-harmonic collection path (default).
pub const T_FH_DEFAULT: f64 = 0.30;
/// Waveguide length in cm (default).
pub const LENGTH_CM_DEFAULT: f64 = 0.52;

/// Normalized SHG efficiency from measured powers:
/// η = (P_SH/T_SH) / (P_FH·L/T_FH)², reported in %/W/cm².
pub fn shg_normalized_efficiency_from_measurement(
    p_sh_w: f64,
    p_fh_w: f64,
    t_sh: f64,
    t_fh: f64,
    length_cm: f64,
) -> f64 {
    let corrected_sh = p_sh_w / t_sh;
    let corrected_fh_l = p_fh_w * length_cm / t_fh;
    100.0 * corrected_sh / (corrected_fh_l * corrected_fh_l)
}

/// Theoretical normalized SHG efficiency in %/W/cm², from the coupled-mode
/// expression η = 8π²·d_eff²·ζ² / (ε₀·c·λ_FH²·n_FH²·n_SH·A_eff) with
/// d_eff = d33 and the effective area of the first-harmonic mode. Normalization
/// conventions in the literature differ by small integer factors; this one is
/// quoted against λ in m and A_eff in m².
pub fn predict_shg_efficiency(
    signal_mode: &Mode,
    pump_mode: &Mode,
    zeta: f64,
    lambda_fh_um: f64,
) -> f64 {
    let d33 = crate::materials::NonlinearCoefficients::LITHIUM_NIOBATE.d33_pm_per_v * 1e-12; // m/V
    let lambda_m = lambda_fh_um * 1e-6;
    let a_eff_m2 = signal_mode.effective_area_um2 * 1e-12;
    let n_fh = signal_mode.n_eff;
    let n_sh = pump_mode.n_eff;
    let eta_per_w_m2 = 8.0 * std::f64::consts::PI.powi(2) * d33 * d33 * zeta * zeta
        / (VACUUM_PERMITTIVITY
            * SPEED_OF_LIGHT
            * lambda_m
            * lambda_m
            * n_fh
            * n_fh
            * n_sh
            * a_eff_m2);
    // 1/(W·m²) → %/W/cm²
    eta_per_w_m2 * 100.0 * 1e-4
}

/// Rayleigh-scattering propagation loss scaled from a reference wavelength:
/// α(λ) = α_ref · (λ_ref/λ)².
pub fn propagation_loss(alpha_ref_db_per_cm: f64, lambda_ref_um: f64, lambda_um: f64) -> f64 {
    alpha_ref_db_per_cm * (lambda_ref_um / lambda_um).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::ModeLabel;

    fn mode_from(field: Array2<f64>, h: f64) -> Mode {
        let (ny, nx) = field.dim();
        Mode {
            n_eff: 1.91,
            wavelength_um: 1.53,
            field,
            label: ModeLabel::Te00,
            effective_area_um2: 1.0,
            polarization_fraction: 1.0,
            horizontal_um: (0..nx).map(|i| i as f64 * h).collect(),
            vertical_um: (0..ny).map(|j| j as f64 * h).collect(),
            spacing_um: h,
            residual: 0.0,
        }
    }

    /// Synthetic separable fields mimicking TE00 / TE01 shapes.
    fn synthetic_pair(n: usize, h: f64, lobe_imbalance: f64) -> (Mode, Mode, Array2<f64>) {
        let c = n as f64 * h / 2.0;
        let g = |x: f64, w: f64| (-(x * x) / (w * w)).exp();
        let mut e00 = Array2::<f64>::zeros((n, n));
        let mut e01 = Array2::<f64>::zeros((n, n));
        let mut dnor = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let y = j as f64 * h - c;
            for i in 0..n {
                let x = i as f64 * h - c;
                e00[[j, i]] = g(x, 0.7) * g(y, 0.25);
                // antisymmetric vertical profile with adjustable imbalance
                e01[[j, i]] = g(x, 0.5) * g(y, 0.22) * (y + lobe_imbalance * y * y);
                dnor[[j, i]] = if y < 0.0 { 1.0 } else { -1.0 };
            }
        }
        (mode_from(e00, h), mode_from(e01, h), dnor)
    }

    #[test]
    fn dual_layer_beats_single_layer() {
        let (s, p, dnor) = synthetic_pair(200, 0.02, 0.3);
        let dual = overlap_factor(&s, &p, &dnor).unwrap();
        let single = overlap_factor(&s, &p, &dnor.mapv(f64::abs)).unwrap();
        assert!(dual.zeta.abs() > single.zeta.abs());
        assert_eq!(dual.variant, LayerVariant::DualLayer);
        assert_eq!(single.variant, LayerVariant::SingleLayer);
        // intermediates reproduce ζ
        assert!((dual.recompute() - dual.zeta).abs() < 1e-14);
    }

    #[test]
    fn antisymmetric_pump_with_uniform_dnor_gives_zero_numerator() {
        let (s, p, dnor) = synthetic_pair(200, 0.02, 0.0);
        let single = overlap_factor(&s, &p, &dnor.mapv(f64::abs));
        match single {
            Ok(r) => {
                assert!(r.numerator.abs() < 1e-10, "numerator = {}", r.numerator);
                assert!(r.zeta.abs() < 1e-4);
            }
            // perfect antisymmetry can also trip the denominator guard
            Err(Error::DegenerateDenominator(_)) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn zeta_scale_invariant_in_each_field() {
        let (s, p, dnor) = synthetic_pair(150, 0.02, 0.3);
        let base = overlap_factor(&s, &p, &dnor).unwrap().zeta;
        let mut s2 = s.clone();
        s2.field.mapv_inplace(|v| 7.5 * v);
        let mut p2 = p.clone();
        p2.field.mapv_inplace(|v| 0.125 * v);
        let scaled = overlap_factor(&s2, &p2, &dnor).unwrap().zeta;
        assert!((base - scaled).abs() < 1e-12 * base.abs().max(1.0));
    }

    #[test]
    fn flipping_dnor_sign_flips_numerator_only() {
        let (s, p, dnor) = synthetic_pair(150, 0.02, 0.3);
        let a = overlap_factor(&s, &p, &dnor).unwrap();
        let b = overlap_factor(&s, &p, &dnor.mapv(|d| -d)).unwrap();
        assert!((a.numerator + b.numerator).abs() < 1e-14 * a.numerator.abs().max(1.0));
        assert!((a.zeta.abs() - b.zeta.abs()).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_detected() {
        let (s, p, _) = synthetic_pair(64, 0.02, 0.3);
        let wrong = Array2::<f64>::ones((32, 32));
        assert!(matches!(
            overlap_factor(&s, &p, &wrong),
            Err(Error::GridMismatch(..))
        ));
    }

    #[test]
    fn enhancement_ratio_values() {
        assert!((enhancement_ratio(0.81, 0.21).unwrap() - 14.877551020408163).abs() < 1e-12);
        assert_eq!(enhancement_ratio(0.5, 0.5).unwrap(), 1.0);
        assert_eq!(enhancement_ratio(0.9, 0.3).unwrap(), 9.0);
        assert!(enhancement_ratio(0.8, 0.0).is_err());
    }

    #[test]
    fn relative_pgr_scalings() {
        let base = predict_relative_pgr(5.2, 1.0, 34.4, 0.81, 0.75, 0.0);
        assert_eq!(base.sinc2, 1.0);
        let double_l = predict_relative_pgr(10.4, 1.0, 34.4, 0.81, 0.75, 0.0);
        assert!((double_l.relative_pgr / base.relative_pgr - 4.0).abs() < 1e-12);
        let double_p = predict_relative_pgr(5.2, 2.0, 34.4, 0.81, 0.75, 0.0);
        assert!((double_p.relative_pgr / base.relative_pgr - 2.0).abs() < 1e-12);
        // dual- vs single-layer at the design point differs only in ζ
        let single = predict_relative_pgr(5.2, 1.0, 34.4, 0.21, 0.75, 0.0);
        let ratio = base.relative_pgr / single.relative_pgr;
        assert!((ratio - enhancement_ratio(0.81, 0.21).unwrap()).abs() < 1e-9);
        assert!(base.relative_pgr >= 0.0);
    }

    #[test]
    fn shg_measurement_round_trip() {
        // construct P_SH so the formula inverts to exactly 2976 %/W/cm²
        let eta_target = 2976.0;
        let p_fh = 1e-3;
        let denom = p_fh * LENGTH_CM_DEFAULT / T_FH_DEFAULT;
        let p_sh = eta_target / 100.0 * T_SH_DEFAULT * denom * denom;
        let eta = shg_normalized_efficiency_from_measurement(
            p_sh,
            p_fh,
            T_SH_DEFAULT,
            T_FH_DEFAULT,
            LENGTH_CM_DEFAULT,
        );
        assert!((eta - eta_target).abs() <= 1e-12 * eta_target);
    }

    #[test]
    fn shg_measurement_structure() {
        assert_eq!(
            shg_normalized_efficiency_from_measurement(0.0, 1e-3, 0.35, 0.30, 0.52),
            0.0
        );
        let base = shg_normalized_efficiency_from_measurement(1e-5, 1e-3, 0.35, 0.30, 0.52);
        let scaled = shg_normalized_efficiency_from_measurement(1e-5, 3e-3, 0.35, 0.30, 0.52);
        assert!((scaled / base - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn shg_prediction_quadratic_in_zeta() {
        let (s, p, _) = synthetic_pair(64, 0.02, 0.3);
        let full = predict_shg_efficiency(&s, &p, 0.8, 1.53);
        let half = predict_shg_efficiency(&s, &p, 0.4, 1.53);
        assert!((full / half - 4.0).abs() < 1e-12);
        assert_eq!(predict_shg_efficiency(&s, &p, 0.0, 1.53), 0.0);
    }

    #[test]
    fn propagation_loss_scaling() {
        assert_eq!(propagation_loss(1.8, 1.530, 1.530), 1.8);
        assert!((propagation_loss(1.8, 1.530, 0.765) - 7.2).abs() < 1e-12);
        assert_eq!(propagation_loss(0.0, 1.0, 2.0), 0.0);
    }
}
