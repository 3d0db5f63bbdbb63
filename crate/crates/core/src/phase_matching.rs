//! Phase mismatch, modal-phase-matching searches and sinc² tuning curves.
//!
//! Degenerate modal phase matching places the pump in TE01 at λ/2 and the
//! signal in TE00 at λ; the searches below locate the geometry (or pump
//! wavelength) where the two effective indices cross.

use crate::error::{Error, Result};
use crate::geometry::{rasterize, WaveguideGeometry};
use crate::modes::{self, Mode, ModeLabel};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

const ENERGY_TOL_REL: f64 = 1e-9;
/// |n_eff(TE01, λ/2) − n_eff(TE00, λ)| accepted as phase matched.
pub const ROOT_TOL_NEFF: f64 = 1e-5;

/// One (wavelength µm, n_eff) pair.
pub type WavePoint = (f64, f64);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseMatchResult {
    pub delta_k_rad_per_um: f64,
    pub pump: WavePoint,
    pub signal: WavePoint,
    pub idler: WavePoint,
    pub geometry: WaveguideGeometry,
}

impl PhaseMatchResult {
    /// Δk recomputed from the stored (λ, n_eff) pairs.
    pub fn recompute_delta_k(&self) -> f64 {
        wavevector(self.signal) + wavevector(self.idler) - wavevector(self.pump)
    }
}

fn wavevector((lambda, n_eff): WavePoint) -> f64 {
    2.0 * PI * n_eff / lambda
}

/// Δk = k_s + k_i − k_p in rad/µm. Errors unless 1/λ_p = 1/λ_s + 1/λ_i holds
/// to 1e-9 relative.
pub fn phase_mismatch(pump: WavePoint, signal: WavePoint, idler: WavePoint) -> Result<f64> {
    let imbalance = 1.0 / pump.0 - 1.0 / signal.0 - 1.0 / idler.0;
    let relative = imbalance * pump.0;
    if relative.abs() > ENERGY_TOL_REL {
        return Err(Error::EnergyConservationViolated {
            imbalance,
            relative,
        });
    }
    Ok(wavevector(signal) + wavevector(idler) - wavevector(pump))
}

/// Pointwise sinc²(ΔkL/2) with sinc(x) = sin(x)/x, sinc(0) = 1.
pub fn tuning_curve(delta_k_rad_per_um: &[f64], length_mm: f64) -> Vec<f64> {
    let l_um = length_mm * 1e3;
    delta_k_rad_per_um
        .iter()
        .map(|&dk| sinc(dk * l_um / 2.0).powi(2))
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Options for the eigensolves behind the MPM searches.
#[derive(Debug, Clone)]
pub struct MpmSolveOptions {
    pub spacing_nm: f64,
    /// Modes to request at the pump wavelength (hybrid/TM states interleave
    /// above TE01, so this needs headroom).
    pub pump_mode_count: usize,
    pub signal_mode_count: usize,
    /// Optional directory for caching solved effective indices.
    pub cache_dir: Option<std::path::PathBuf>,
}

impl Default for MpmSolveOptions {
    fn default() -> Self {
        MpmSolveOptions {
            spacing_nm: 20.0,
            pump_mode_count: 12,
            signal_mode_count: 4,
            cache_dir: None,
        }
    }
}

/// The lateral continuum edge of an etched structure: anything guided by the
/// rib must exceed the unetched slab's fundamental TE index (and the
/// substrate/cladding indices).
fn lateral_bound(geometry: &WaveguideGeometry, wavelength_um: f64) -> Result<f64> {
    let n_sub = geometry.substrate.refractive_index(wavelength_um)?;
    let n_clad = geometry.cladding.refractive_index(wavelength_um)?;
    let n_core = geometry.film_extraordinary.refractive_index(wavelength_um)?;
    let slab_um = (geometry.film_thickness_nm - geometry.etch_depth_nm) * 1e-3;
    let slab = modes::slab_te0_neff(n_core, n_sub, n_clad, slab_um, wavelength_um).unwrap_or(0.0);
    Ok(n_sub.max(n_clad).max(slab))
}

fn find_labeled(
    modes_list: &[Mode],
    label: ModeLabel,
    min_neff: f64,
) -> Option<&Mode> {
    modes_list
        .iter()
        .find(|m| m.label == label && m.n_eff > min_neff)
}

/// n_eff of the fundamental TE mode at `wavelength_um`.
pub fn neff_te00(
    geometry: &WaveguideGeometry,
    wavelength_um: f64,
    opts: &MpmSolveOptions,
) -> Result<f64> {
    if let Some(v) = cache_lookup(geometry, wavelength_um, opts, "te00") {
        return Ok(v);
    }
    let grid = rasterize(geometry, opts.spacing_nm, wavelength_um)?;
    let solved = modes::solve_modes(&grid, wavelength_um, opts.signal_mode_count, grid.n_max)?;
    let bound = lateral_bound(geometry, wavelength_um)?;
    let m = find_labeled(&solved, ModeLabel::Te00, bound).ok_or_else(|| Error::NoGuidedMode {
        lower: bound,
        upper: grid.n_max,
    })?;
    cache_store(geometry, wavelength_um, opts, "te00", m.n_eff);
    Ok(m.n_eff)
}

/// n_eff of the TE01 mode at `wavelength_um`; `NoHigherOrderMode` when it is
/// not guided (cut off laterally by the slab continuum).
pub fn neff_te01(
    geometry: &WaveguideGeometry,
    wavelength_um: f64,
    opts: &MpmSolveOptions,
) -> Result<f64> {
    if let Some(v) = cache_lookup(geometry, wavelength_um, opts, "te01") {
        return Ok(v);
    }
    let grid = rasterize(geometry, opts.spacing_nm, wavelength_um)?;
    let solved = modes::solve_modes(&grid, wavelength_um, opts.pump_mode_count, grid.n_max)?;
    let bound = lateral_bound(geometry, wavelength_um)?;
    let m = find_labeled(&solved, ModeLabel::Te01, bound).ok_or_else(|| {
        Error::NoHigherOrderMode(format!(
            "no guided TE01 at {} um for w = {} um, h1 = {} nm (lateral bound {:.4})",
            wavelength_um, geometry.top_width_um, geometry.etch_depth_nm, bound
        ))
    })?;
    cache_store(geometry, wavelength_um, opts, "te01", m.n_eff);
    Ok(m.n_eff)
}

/// n_eff(TE01, λ_s/2) − n_eff(TE00, λ_s) at top width `w`.
fn mpm_mismatch(
    base: &WaveguideGeometry,
    w_um: f64,
    signal_wavelength_um: f64,
    opts: &MpmSolveOptions,
) -> Result<f64> {
    let mut g = base.clone();
    g.top_width_um = w_um;
    let n01 = neff_te01(&g, signal_wavelength_um / 2.0, opts)?;
    let n00 = neff_te00(&g, signal_wavelength_um, opts)?;
    Ok(n01 - n00)
}

fn degenerate_result(
    geometry: WaveguideGeometry,
    signal_wavelength_um: f64,
    n00: f64,
    n01: f64,
) -> PhaseMatchResult {
    let pump = (signal_wavelength_um / 2.0, n01);
    let signal = (signal_wavelength_um, n00);
    let idler = signal;
    PhaseMatchResult {
        delta_k_rad_per_um: wavevector(signal) + wavevector(idler) - wavevector(pump),
        pump,
        signal,
        idler,
        geometry,
    }
}

/// Locate the top width where the degenerate MPM condition
/// n_eff(TE01, λ_s/2) = n_eff(TE00, λ_s) holds at etch depth `h1`.
///
/// Bracketed root finding (Illinois variant of regula falsi) on w to
/// |Δn| < 1e-5; errors if TE01 is absent anywhere in the bracket or the
/// bracket does not straddle a sign change.
pub fn find_mpm_width(
    base: &WaveguideGeometry,
    h1_nm: f64,
    signal_wavelength_um: f64,
    bracket_um: (f64, f64),
    opts: &MpmSolveOptions,
) -> Result<(f64, PhaseMatchResult)> {
    let mut geom = base.clone();
    geom.etch_depth_nm = h1_nm;
    geom.validate()?;
    let (mut a, mut b) = bracket_um;
    let mut fa = mpm_mismatch(&geom, a, signal_wavelength_um, opts)?;
    let mut fb = mpm_mismatch(&geom, b, signal_wavelength_um, opts)?;
    if fa * fb > 0.0 {
        return Err(Error::BracketError(a, b));
    }
    let mut side = 0i8;
    let (mut w, mut fw) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..60 {
        if fw.abs() < ROOT_TOL_NEFF || (b - a).abs() < 1e-4 {
            break;
        }
        let mut m = (a * fb - b * fa) / (fb - fa);
        // keep iterates strictly inside the bracket
        if !(m > a && m < b) {
            m = 0.5 * (a + b);
        }
        let fm = mpm_mismatch(&geom, m, signal_wavelength_um, opts)?;
        w = m;
        fw = fm;
        if fa * fm < 0.0 {
            b = m;
            fb = fm;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = m;
            fa = fm;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    let mut g = geom.clone();
    g.top_width_um = w;
    let n01 = neff_te01(&g, signal_wavelength_um / 2.0, opts)?;
    let n00 = neff_te00(&g, signal_wavelength_um, opts)?;
    Ok((w, degenerate_result(g, signal_wavelength_um, n00, n01)))
}

/// Pump wavelength satisfying degenerate MPM at fixed geometry:
/// n_eff(TE01, λ_p) = n_eff(TE00, 2λ_p), found in `search_range_um`.
pub fn mpm_pump_wavelength(
    base: &WaveguideGeometry,
    search_range_um: (f64, f64),
    opts: &MpmSolveOptions,
) -> Result<f64> {
    let f = |lp: f64| -> Result<f64> {
        let n01 = neff_te01(base, lp, opts)?;
        let n00 = neff_te00(base, 2.0 * lp, opts)?;
        Ok(n01 - n00)
    };
    let (mut a, mut b) = search_range_um;
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa * fb > 0.0 {
        return Err(Error::NoSolutionInRange(a, b));
    }
    let mut side = 0i8;
    let (mut x, mut fx) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..60 {
        if fx.abs() < ROOT_TOL_NEFF || (b - a).abs() < 1e-5 {
            break;
        }
        let mut m = (a * fb - b * fa) / (fb - fa);
        if !(m > a && m < b) {
            m = 0.5 * (a + b);
        }
        let fm = f(m)?;
        x = m;
        fx = fm;
        if fa * fm < 0.0 {
            b = m;
            fb = fm;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = m;
            fa = fm;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(x)
}

/// One point of the (w, h1) effective-index landscape of the two MPM modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub top_width_um: f64,
    pub etch_depth_nm: f64,
    pub neff_te00_signal: Option<f64>,
    pub neff_te01_pump: Option<f64>,
}

/// Sample the TE00@λs / TE01@λs/2 landscapes over a (w, h1) lattice.
/// Points run in parallel; solved indices are cached when a cache directory
/// is configured.
pub fn landscape_sweep(
    base: &WaveguideGeometry,
    signal_wavelength_um: f64,
    w_range_um: (f64, f64),
    h1_range_nm: (f64, f64),
    w_samples: usize,
    h1_samples: usize,
    opts: &MpmSolveOptions,
) -> Vec<SweepPoint> {
    use rayon::prelude::*;
    let mut jobs = Vec::new();
    for iw in 0..w_samples {
        for ih in 0..h1_samples {
            let w = lerp(w_range_um, iw, w_samples);
            let h1 = lerp(h1_range_nm, ih, h1_samples);
            jobs.push((w, h1));
        }
    }
    jobs.par_iter()
        .map(|&(w, h1)| {
            let mut g = base.clone();
            g.top_width_um = w;
            g.etch_depth_nm = h1;
            SweepPoint {
                top_width_um: w,
                etch_depth_nm: h1,
                neff_te00_signal: neff_te00(&g, signal_wavelength_um, opts).ok(),
                neff_te01_pump: neff_te01(&g, signal_wavelength_um / 2.0, opts).ok(),
            }
        })
        .collect()
}

fn lerp((lo, hi): (f64, f64), i: usize, n: usize) -> f64 {
    if n <= 1 {
        lo
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

// ---- n_eff cache -----------------------------------------------------------

fn cache_key(
    geometry: &WaveguideGeometry,
    wavelength_um: f64,
    opts: &MpmSolveOptions,
    kind: &str,
) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(geometry).expect("geometry serializes"));
    hasher.update(wavelength_um.to_le_bytes());
    hasher.update(opts.spacing_nm.to_le_bytes());
    hasher.update(kind.as_bytes());
    format!("{:x}", hasher.finalize())
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    n_eff: f64,
}

fn cache_lookup(
    geometry: &WaveguideGeometry,
    wavelength_um: f64,
    opts: &MpmSolveOptions,
    kind: &str,
) -> Option<f64> {
    let dir = opts.cache_dir.as_ref()?;
    let path = dir.join(cache_key(geometry, wavelength_um, opts, kind) + ".json");
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str::<CacheEntry>(&text).ok().map(|e| e.n_eff)
}

fn cache_store(
    geometry: &WaveguideGeometry,
    wavelength_um: f64,
    opts: &MpmSolveOptions,
    kind: &str,
    n_eff: f64,
) {
    let Some(dir) = opts.cache_dir.as_ref() else {
        return;
    };
    if std::fs::create_dir_all(dir).is_err() {
        return;
    }
    let key = cache_key(geometry, wavelength_um, opts, kind);
    let tmp: &Path = &dir.join(format!("{key}.tmp"));
    let fin = dir.join(format!("{key}.json"));
    if let Ok(text) = serde_json::to_string(&CacheEntry { n_eff }) {
        // write-then-rename keeps concurrent writers single-writer per key
        if std::fs::write(tmp, text).is_ok() {
            let _ = std::fs::rename(tmp, fin);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_equal_indices_is_matched() {
        let dk = phase_mismatch((0.765, 2.0), (1.53, 2.0), (1.53, 2.0)).unwrap();
        assert!(dk.abs() < 1e-12);
    }

    #[test]
    fn mismatch_arithmetic_example() {
        // independent arithmetic: 2·(2π·1.99/1.53) − 2π·2.00/0.765
        let dk = phase_mismatch((0.765, 2.00), (1.53, 1.99), (1.53, 1.99)).unwrap();
        assert!((dk - (-0.08213314127031879)).abs() < 1e-12, "dk = {dk}");
        // the rounded value quoted alongside the estimator definition
        assert!((dk - (-0.0821)).abs() < 1e-4);
    }

    #[test]
    fn same_mode_pump_signal_has_negative_mismatch() {
        // normal dispersion: n_p > n_s when both travel in the same mode
        let dk = phase_mismatch((0.765, 2.05), (1.53, 2.00), (1.53, 2.00)).unwrap();
        assert!(dk < 0.0);
    }

    #[test]
    fn energy_conservation_enforced() {
        assert!(matches!(
            phase_mismatch((0.70, 2.0), (1.53, 2.0), (1.53, 2.0)),
            Err(Error::EnergyConservationViolated { .. })
        ));
    }

    #[test]
    fn tuning_curve_peak_and_null() {
        let l_mm = 5.2;
        let l_um = l_mm * 1e3;
        let first_null = 2.0 * PI / l_um;
        let vals = tuning_curve(&[0.0, first_null], l_mm);
        assert_eq!(vals[0], 1.0);
        assert!(vals[1].abs() < 1e-20);
    }

    #[test]
    fn tuning_curve_even_and_bounded() {
        let dks: Vec<f64> = (1..200).map(|i| i as f64 * 1e-4).collect();
        let pos = tuning_curve(&dks, 5.2);
        let neg: Vec<f64> = tuning_curve(&dks.iter().map(|d| -d).collect::<Vec<_>>(), 5.2);
        for (p, n) in pos.iter().zip(&neg) {
            assert_eq!(p, n);
            assert!((0.0..=1.0).contains(p));
        }
    }

    #[test]
    fn doubling_length_halves_fwhm() {
        // oracle: locate the half-maximum of sinc²(ΔkL/2) by bisection
        let fwhm = |l_mm: f64| -> f64 {
            let f = |dk: f64| tuning_curve(&[dk], l_mm)[0] - 0.5;
            let (mut a, mut b) = (0.0, 2.0 * PI / (l_mm * 1e3) * 0.9);
            assert!(f(a) > 0.0 && f(b) < 0.0);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if f(m) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            a + b // 2 × half-width
        };
        let r = fwhm(5.2) / fwhm(10.4);
        assert!((r - 2.0).abs() < 0.02, "ratio = {r}");
    }

    #[test]
    fn recompute_delta_k_matches_stored() {
        let g = WaveguideGeometry::design_point();
        let r = degenerate_result(g, 1.53, 1.910, 1.9105);
        assert!((r.delta_k_rad_per_um - r.recompute_delta_k()).abs() < 1e-15);
        // signal wavelength is exactly twice the pump wavelength
        assert_eq!(r.signal.0, 2.0 * r.pump.0);
    }
}
