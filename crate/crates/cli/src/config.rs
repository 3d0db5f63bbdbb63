//! Run configuration: TOML with strict key checking. Every default equals the
//! fabricated design point (w = 1.43 µm, h1 = 460 nm, θ = 75°, L = 5.2 mm,
//! 1 ns coincidence window).

use anyhow::{bail, Context, Result};
use mpm_core::materials::MaterialLibrary;
use mpm_core::photon_stats::{SourceDetectionSpec, SplitterLayout};
use mpm_core::WaveguideGeometry;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub top_width_um: f64,
    pub etch_depth_nm: f64,
    pub film_thickness_nm: f64,
    pub layer_thicknesses_nm: Vec<f64>,
    pub layer_orientations: Vec<i8>,
    pub sidewall_angle_deg: f64,
    pub substrate: String,
    pub cladding: String,
    pub film_extraordinary: String,
    pub film_ordinary: String,
    pub length_mm: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            top_width_um: 1.43,
            etch_depth_nm: 460.0,
            film_thickness_nm: 600.0,
            layer_thicknesses_nm: vec![300.0, 300.0],
            layer_orientations: vec![1, -1],
            sidewall_angle_deg: 75.0,
            substrate: "silica".into(),
            cladding: "air".into(),
            film_extraordinary: "ln_e".into(),
            film_ordinary: "ln_o".into(),
            length_mm: 5.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub spacing_nm: f64,
    pub signal_mode_count: usize,
    pub pump_mode_count: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            spacing_nm: 10.0,
            signal_mode_count: 4,
            pump_mode_count: 12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub signal_wavelength_um: f64,
    pub w_range_um: (f64, f64),
    pub h1_range_nm: (f64, f64),
    pub w_samples: usize,
    pub h1_samples: usize,
    /// Coarser spacing for landscape sweeps (eigensolves dominate).
    pub spacing_nm: f64,
    pub pump_search_range_um: (f64, f64),
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            signal_wavelength_um: 1.530,
            w_range_um: (1.30, 1.60),
            h1_range_nm: (420.0, 500.0),
            w_samples: 21,
            h1_samples: 21,
            spacing_nm: 25.0,
            pump_search_range_um: (0.72, 0.81),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpdcSection {
    pub pair_rate_hz: f64,
    pub duration_s: f64,
    pub channel_efficiencies: Vec<f64>,
    pub dark_rates_hz: Vec<f64>,
    pub timing_jitter_sigma_ps: Vec<f64>,
    pub coincidence_window_ps: u64,
    pub splitter_layout: String,
    pub histogram_bin_ps: u64,
    pub histogram_span_ps: u64,
    pub rng_seed: u64,
}

impl Default for SpdcSection {
    fn default() -> Self {
        SpdcSection {
            pair_rate_hz: 8.23e7, // the device's PGR slope at ~2 µW on-chip pump
            duration_s: 1.0,
            channel_efficiencies: vec![0.17, 0.17],
            dark_rates_hz: vec![100.0, 100.0],
            timing_jitter_sigma_ps: vec![30.0, 30.0],
            coincidence_window_ps: 1000,
            splitter_layout: "two_detector".into(),
            histogram_bin_ps: 100,
            histogram_span_ps: 10_000,
            rng_seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection {
            out_dir: PathBuf::from("out"),
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub spdc: SpdcSection,
    pub io: IoSection,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let cfg: RunConfig = toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?;
                Ok(cfg)
            }
        }
    }

    pub fn geometry(&self, library: &MaterialLibrary) -> Result<WaveguideGeometry> {
        let g = &self.geometry;
        let geom = WaveguideGeometry {
            top_width_um: g.top_width_um,
            etch_depth_nm: g.etch_depth_nm,
            film_thickness_nm: g.film_thickness_nm,
            layer_thicknesses_nm: g.layer_thicknesses_nm.clone(),
            layer_orientations: g.layer_orientations.clone(),
            sidewall_angle_deg: g.sidewall_angle_deg,
            substrate: library.get(&g.substrate)?.clone(),
            cladding: library.get(&g.cladding)?.clone(),
            film_extraordinary: library.get(&g.film_extraordinary)?.clone(),
            film_ordinary: library.get(&g.film_ordinary)?.clone(),
            length_mm: g.length_mm,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn detection_spec(&self) -> Result<SourceDetectionSpec> {
        let s = &self.spdc;
        let layout = match s.splitter_layout.as_str() {
            "two_detector" => SplitterLayout::TwoDetector,
            "three_detector" => SplitterLayout::ThreeDetector,
            other => bail!("unknown splitter_layout '{other}' (two_detector | three_detector)"),
        };
        let spec = SourceDetectionSpec {
            pair_rate_hz: s.pair_rate_hz,
            duration_s: s.duration_s,
            channel_efficiencies: s.channel_efficiencies.clone(),
            dark_rates_hz: s.dark_rates_hz.clone(),
            timing_jitter_sigma_ps: s.timing_jitter_sigma_ps.clone(),
            coincidence_window_ps: s.coincidence_window_ps,
            splitter_layout: layout,
            histogram_bin_ps: s.histogram_bin_ps,
            rng_seed: s.rng_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Cache directory after the environment override.
    pub fn cache_dir(&self) -> Option<PathBuf> {
        std::env::var_os("MPM_CACHE_DIR")
            .map(PathBuf::from)
            .or_else(|| self.io.cache_dir.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_design_point() {
        let c = RunConfig::default();
        assert_eq!(c.geometry.top_width_um, 1.43);
        assert_eq!(c.geometry.etch_depth_nm, 460.0);
        assert_eq!(c.geometry.sidewall_angle_deg, 75.0);
        assert_eq!(c.geometry.length_mm, 5.2);
        assert_eq!(c.spdc.coincidence_window_ps, 1000);
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: std::result::Result<RunConfig, _> = toml::from_str(
            r#"
            [geometry]
            top_width_um = 1.5
            not_a_key = 7
            "#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn partial_config_keeps_other_defaults() {
        let c: RunConfig = toml::from_str(
            r#"
            [geometry]
            top_width_um = 1.50
            "#,
        )
        .unwrap();
        assert_eq!(c.geometry.top_width_um, 1.50);
        assert_eq!(c.geometry.etch_depth_nm, 460.0);
    }
}
