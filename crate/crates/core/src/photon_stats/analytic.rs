//! Closed-form small-occupancy predictions used to cross-check the Monte
//! Carlo chain.

use super::{SourceDetectionSpec, SplitterLayout};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Small-µ (R·τ ≪ 1) expectations for a detection spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticStatistics {
    /// Per-detector singles rates, Hz (2 photons per pair × branch × η + dark).
    pub singles_hz: Vec<f64>,
    /// True pair-coincidence rate between the signal and (merged) idler
    /// detectors, Hz.
    pub true_coincidences_hz: f64,
    /// Accidental rate in the full coincidence window, Hz: C_a·C_b·τ.
    pub accidentals_hz: f64,
    /// True + accidental.
    pub total_coincidences_hz: f64,
    /// CAR ≈ true/accidental (window-level estimate).
    pub car: f64,
    /// CAR × true pair rate, Hz; independent of the pump power.
    pub car_pgr_product_hz: f64,
    /// Predicted heralded g²(0), paper convention (three-detector layouts).
    pub g2_heralded_paper: Option<f64>,
    /// Same without the factor 2.
    pub g2_heralded_conventional: Option<f64>,
}

/// Evaluate the closed forms. Errors with `RegimeViolation` outside the
/// small-occupancy regime (R·τ > 0.1).
pub fn analytic_statistics(spec: &SourceDetectionSpec) -> Result<AnalyticStatistics> {
    spec.validate()?;
    let r = spec.pair_rate_hz;
    let tau = spec.coincidence_window_ps as f64 * 1e-12;
    if r * tau > 0.1 {
        return Err(Error::RegimeViolation(r * tau));
    }
    let eff = &spec.channel_efficiencies;
    let dark = &spec.dark_rates_hz;
    match spec.splitter_layout {
        SplitterLayout::TwoDetector => {
            let singles: Vec<f64> = (0..2).map(|d| r * eff[d] + dark[d]).collect();
            let true_c = r * eff[0] * eff[1] / 2.0;
            let acc = singles[0] * singles[1] * tau;
            let car = true_c / acc.max(1e-300);
            Ok(AnalyticStatistics {
                singles_hz: singles,
                true_coincidences_hz: true_c,
                accidentals_hz: acc,
                total_coincidences_hz: true_c + acc,
                car,
                car_pgr_product_hz: car * r,
                g2_heralded_paper: None,
                g2_heralded_conventional: None,
            })
        }
        SplitterLayout::ThreeDetector => {
            // branch probabilities 1/2, 1/4, 1/4; two photons per pair
            let p = [0.5, 0.25, 0.25];
            let singles: Vec<f64> = (0..3)
                .map(|d| 2.0 * r * p[d] * eff[d] + dark[d])
                .collect();
            let c_si1 = r * eff[0] * eff[1] / 4.0 + singles[0] * singles[1] * tau;
            let c_si2 = r * eff[0] * eff[2] / 4.0 + singles[0] * singles[2] * tau;
            // leading-order triples: a true two-fold plus an uncorrelated
            // single in the window, all three pairings
            let c_tri = (r * eff[0] * eff[1] / 4.0) * singles[2] * tau
                + (r * eff[0] * eff[2] / 4.0) * singles[1] * tau
                + (r * eff[1] * eff[2] / 8.0) * singles[0] * tau;
            let g2_conv = c_tri * singles[0] / (c_si1 * c_si2).max(1e-300);
            // merged-idler view for CAR
            let c_merged = singles[1] + singles[2];
            let true_c = r * eff[0] * (eff[1] + eff[2]) / 4.0;
            let acc = singles[0] * c_merged * tau;
            let car = true_c / acc.max(1e-300);
            Ok(AnalyticStatistics {
                singles_hz: singles,
                true_coincidences_hz: true_c,
                accidentals_hz: acc,
                total_coincidences_hz: true_c + acc,
                car,
                car_pgr_product_hz: car * r,
                g2_heralded_paper: Some(g2_conv / 2.0),
                g2_heralded_conventional: Some(g2_conv),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_stats::{count_coincidences, simulate_timetags};

    fn spec(rate: f64) -> SourceDetectionSpec {
        SourceDetectionSpec {
            pair_rate_hz: rate,
            duration_s: 1.0,
            channel_efficiencies: vec![0.17, 0.17],
            dark_rates_hz: vec![100.0, 100.0],
            timing_jitter_sigma_ps: vec![30.0, 30.0],
            ..Default::default()
        }
    }

    #[test]
    fn regime_violation_detected() {
        assert!(matches!(
            analytic_statistics(&spec(2.0e8)),
            Err(Error::RegimeViolation(_))
        ));
        assert!(analytic_statistics(&spec(1.0e7)).is_ok());
    }

    #[test]
    fn car_pgr_product_power_independent() {
        // two decades of pump power: the product varies < 5 %
        let products: Vec<f64> = [1e5, 1e6, 1e7]
            .iter()
            .map(|&r| analytic_statistics(&spec(r)).unwrap().car_pgr_product_hz)
            .collect();
        let max = products.iter().cloned().fold(f64::MIN, f64::max);
        let min = products.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            (max - min) / max < 0.05,
            "products vary too much: {products:?}"
        );
    }

    #[test]
    fn doubling_window_halves_car() {
        let a = analytic_statistics(&spec(1e6)).unwrap();
        let mut s2 = spec(1e6);
        s2.coincidence_window_ps *= 2;
        let b = analytic_statistics(&s2).unwrap();
        assert!((a.car / b.car - 2.0).abs() < 1e-9);
    }

    #[test]
    fn monte_carlo_matches_analytic_coincidences() {
        // zero darks, unit efficiency: total window coincidences within 3σ
        let s = SourceDetectionSpec {
            pair_rate_hz: 5.0e5,
            duration_s: 2.0,
            channel_efficiencies: vec![1.0, 1.0],
            dark_rates_hz: vec![0.0, 0.0],
            timing_jitter_sigma_ps: vec![20.0, 20.0],
            rng_seed: 17,
            ..Default::default()
        };
        let expect = analytic_statistics(&s).unwrap();
        let stream = simulate_timetags(&s).unwrap();
        let n = count_coincidences(&stream, 0, 1, s.coincidence_window_ps) as f64;
        let mu = expect.total_coincidences_hz * s.duration_s;
        assert!(
            (n - mu).abs() < 3.0 * mu.sqrt(),
            "counted {n}, expected {mu}"
        );
    }
}
