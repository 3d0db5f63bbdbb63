//! The dual-layer rib waveguide cross-section and its rasterization.
//!
//! Coordinates: the horizontal axis runs along the in-plane crystal z
//! direction, the vertical axis along the film normal (crystal x; the wafer is
//! x-cut). The vertical origin sits at the bottom of the LN film, so the film
//! occupies `0 ≤ y < film_thickness` and the buried oxide lies below.

use crate::error::{Error, Result};
use crate::materials::MaterialModel;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Cladding/substrate margins kept around the rib when rasterizing. Guided
/// modes at 765/1530 nm decay well within these margins, which the Dirichlet
/// boundary of the mode solver relies on.
pub const SIDE_PADDING_UM: f64 = 1.5;
pub const TOP_PADDING_UM: f64 = 1.5;
/// Buried-oxide thickness below the film; the grid ends there (the oxide is
/// treated as semi-infinite beyond it).
pub const OXIDE_THICKNESS_UM: f64 = 2.0;

/// Coarsest spacing accepted by [`rasterize`], nm. The 300 nm layers and the
/// 460 nm etch must be resolved by at least ~12 cells.
pub const MAX_SPACING_NM: f64 = 25.0;

/// Dual-layer rib cross-section: a trapezoidal rib (top width `w`, sidewall
/// angle θ) etched `h1` deep into a film of stacked LN layers with alternating
/// crystal-z orientation, on silica, under air.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveguideGeometry {
    pub top_width_um: f64,
    pub etch_depth_nm: f64,
    pub film_thickness_nm: f64,
    /// Layer thicknesses bottom → top, nm. Must sum to `film_thickness_nm`.
    pub layer_thicknesses_nm: Vec<f64>,
    /// Crystal-z sign per layer, bottom → top; each entry ±1.
    pub layer_orientations: Vec<i8>,
    pub sidewall_angle_deg: f64,
    pub substrate: MaterialModel,
    pub cladding: MaterialModel,
    /// Film dispersion for fields along the in-plane crystal z axis
    /// (horizontal in the cross-section).
    pub film_extraordinary: MaterialModel,
    /// Film dispersion for fields perpendicular to crystal z (vertical and
    /// longitudinal components).
    pub film_ordinary: MaterialModel,
    pub length_mm: f64,
}

impl WaveguideGeometry {
    /// Validate the cross-section invariants.
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.layer_thicknesses_nm.iter().sum();
        if (sum - self.film_thickness_nm).abs() > 1e-9 * self.film_thickness_nm.max(1.0) {
            return Err(Error::InvalidGeometry(format!(
                "layer thicknesses sum to {sum} nm, film is {} nm",
                self.film_thickness_nm
            )));
        }
        if self.layer_thicknesses_nm.len() != self.layer_orientations.len() {
            return Err(Error::InvalidGeometry(
                "one orientation entry required per layer".into(),
            ));
        }
        if self.layer_orientations.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidGeometry(
                "layer orientations must be +1 or -1".into(),
            ));
        }
        if !(self.etch_depth_nm > 0.0 && self.etch_depth_nm <= self.film_thickness_nm) {
            return Err(Error::InvalidGeometry(format!(
                "etch depth {} nm must lie in (0, {}] nm",
                self.etch_depth_nm, self.film_thickness_nm
            )));
        }
        if self.top_width_um <= 0.0 {
            return Err(Error::InvalidGeometry("top width must be positive".into()));
        }
        if !(self.sidewall_angle_deg > 0.0 && self.sidewall_angle_deg <= 90.0) {
            return Err(Error::InvalidGeometry(format!(
                "sidewall angle {}° must lie in (0, 90]",
                self.sidewall_angle_deg
            )));
        }
        if self.length_mm <= 0.0 {
            return Err(Error::InvalidGeometry("length must be positive".into()));
        }
        Ok(())
    }

    /// The fabricated design point: w = 1.43 µm, h1 = 460 nm, θ = 75°, two
    /// 300 nm LN layers with opposite z orientation, L = 5.2 mm.
    pub fn design_point() -> Self {
        WaveguideGeometry {
            top_width_um: 1.43,
            etch_depth_nm: 460.0,
            film_thickness_nm: 600.0,
            layer_thicknesses_nm: vec![300.0, 300.0],
            layer_orientations: vec![1, -1],
            sidewall_angle_deg: 75.0,
            substrate: crate::materials::fused_silica(),
            cladding: crate::materials::vacuum(),
            film_extraordinary: crate::materials::lithium_niobate_extraordinary(),
            film_ordinary: crate::materials::lithium_niobate_ordinary(),
            length_mm: 5.2,
        }
    }

    /// Width of the rib base (at the etch floor), µm.
    pub fn base_width_um(&self) -> f64 {
        let h1_um = self.etch_depth_nm * 1e-3;
        self.top_width_um + 2.0 * h1_um / self.sidewall_angle_deg.to_radians().tan()
    }

    /// Same geometry with every layer orientation set to +1.
    pub fn single_layer_variant(&self) -> Self {
        let mut g = self.clone();
        for s in &mut g.layer_orientations {
            *s = 1;
        }
        g
    }

    /// True when any two adjacent layers have opposite orientation.
    pub fn is_dual_layer(&self) -> bool {
        self.layer_orientations.windows(2).any(|w| w[0] != w[1])
    }

    fn orientation_at(&self, y_um: f64) -> i8 {
        let mut top = 0.0;
        for (t, &s) in self
            .layer_thicknesses_nm
            .iter()
            .zip(&self.layer_orientations)
        {
            top += t * 1e-3;
            if y_um < top {
                return s;
            }
        }
        *self.layer_orientations.last().unwrap_or(&1)
    }
}

/// Rasterized cross-section on a uniform cell grid. Arrays are indexed
/// `[vertical][horizontal]` with row 0 at the bottom of the domain.
#[derive(Debug, Clone)]
pub struct CrossSectionGrid {
    /// Cell-center horizontal coordinates, µm (rib centered at 0).
    pub horizontal_um: Vec<f64>,
    /// Cell-center vertical coordinates, µm (film bottom at 0).
    pub vertical_um: Vec<f64>,
    pub spacing_um: f64,
    pub wavelength_um: f64,
    /// Relative permittivity seen by the horizontal (crystal z) field
    /// component; extraordinary axis inside LN.
    pub permittivity: Array2<f64>,
    /// Relative permittivity seen by the vertical and longitudinal field
    /// components; ordinary axis inside LN, identical to `permittivity` in
    /// isotropic regions.
    pub permittivity_ordinary: Array2<f64>,
    /// Normalized nonlinearity profile d_Nor: ±1 inside LN (layer
    /// orientation), 0 elsewhere.
    pub nonlinearity_sign: Array2<i8>,
    /// Maximum refractive index on the grid (over both axes).
    pub n_max: f64,
    /// max(substrate, cladding) index at this wavelength.
    pub n_background: f64,
}

impl CrossSectionGrid {
    pub fn shape(&self) -> (usize, usize) {
        (self.vertical_um.len(), self.horizontal_um.len())
    }

    /// d_Nor as f64 for quadrature.
    pub fn nonlinearity_profile(&self) -> Array2<f64> {
        self.nonlinearity_sign.mapv(|s| s as f64)
    }

    /// Write one field as a bare CSV matrix, rows top → bottom so the output
    /// reads like the cross-section.
    pub fn write_csv<W: Write>(&self, field: GridField, mut out: W) -> std::io::Result<()> {
        let (ny, nx) = self.shape();
        for j in (0..ny).rev() {
            let mut line = String::with_capacity(nx * 8);
            for i in 0..nx {
                if i > 0 {
                    line.push(',');
                }
                match field {
                    GridField::Permittivity => line.push_str(&self.permittivity[[j, i]].to_string()),
                    GridField::PermittivityOrdinary => {
                        line.push_str(&self.permittivity_ordinary[[j, i]].to_string())
                    }
                    GridField::NonlinearitySign => {
                        line.push_str(&self.nonlinearity_sign[[j, i]].to_string())
                    }
                }
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridField {
    Permittivity,
    PermittivityOrdinary,
    NonlinearitySign,
}

/// Rasterize the cross-section with cell-center membership (no subcell
/// averaging): each cell takes the material of its center point.
///
/// The trapezoidal rib (top width `w`, base width `w + 2·h1/tanθ`) sits on the
/// unetched slab of thickness `film − h1`; ε comes from the squared refractive
/// index of the material at each cell, d_Nor from the layer orientation where
/// the cell is LN.
pub fn rasterize(
    geometry: &WaveguideGeometry,
    spacing_nm: f64,
    wavelength_um: f64,
) -> Result<CrossSectionGrid> {
    geometry.validate()?;
    if !(spacing_nm > 0.0 && spacing_nm <= MAX_SPACING_NM + 1e-9) {
        return Err(Error::InvalidGeometry(format!(
            "spacing {spacing_nm} nm outside (0, {MAX_SPACING_NM}] nm"
        )));
    }
    let h = spacing_nm * 1e-3;
    let n_sub = geometry.substrate.refractive_index(wavelength_um)?;
    let n_clad = geometry.cladding.refractive_index(wavelength_um)?;
    let n_e = geometry.film_extraordinary.refractive_index(wavelength_um)?;
    let n_o = geometry.film_ordinary.refractive_index(wavelength_um)?;

    let film_um = geometry.film_thickness_nm * 1e-3;
    let h1_um = geometry.etch_depth_nm * 1e-3;
    let slab_top_um = film_um - h1_um;
    let tan_theta = geometry.sidewall_angle_deg.to_radians().tan();

    let y_lo = -OXIDE_THICKNESS_UM;
    let y_hi = film_um + TOP_PADDING_UM;
    let nx = ((geometry.base_width_um() + 2.0 * SIDE_PADDING_UM) / h).round() as usize;
    let ny = ((y_hi - y_lo) / h).round() as usize;
    // integer-symmetric cell centers: mirrored cells get bit-identical |x|
    let horizontal_um: Vec<f64> = (0..nx)
        .map(|i| (2 * i as i64 + 1 - nx as i64) as f64 * (h * 0.5))
        .collect();
    let vertical_um: Vec<f64> = (0..ny).map(|j| (j as f64 + 0.5) * h + y_lo).collect();

    let mut eps = Array2::<f64>::ones((ny, nx));
    let mut eps_o = Array2::<f64>::ones((ny, nx));
    let mut dnor = Array2::<i8>::zeros((ny, nx));

    for (j, &y) in vertical_um.iter().enumerate() {
        if y < 0.0 {
            for i in 0..nx {
                eps[[j, i]] = n_sub * n_sub;
                eps_o[[j, i]] = n_sub * n_sub;
            }
        } else if y < film_um {
            // inside the rib when below the etch floor, or within the
            // trapezoid half-width at this height
            let half_width = (geometry.top_width_um + 2.0 * (film_um - y) / tan_theta) / 2.0;
            let sign = geometry.orientation_at(y);
            for (i, &x) in horizontal_um.iter().enumerate() {
                if y < slab_top_um || x.abs() <= half_width {
                    eps[[j, i]] = n_e * n_e;
                    eps_o[[j, i]] = n_o * n_o;
                    dnor[[j, i]] = sign;
                } else {
                    eps[[j, i]] = n_clad * n_clad;
                    eps_o[[j, i]] = n_clad * n_clad;
                }
            }
        } else {
            for i in 0..nx {
                eps[[j, i]] = n_clad * n_clad;
                eps_o[[j, i]] = n_clad * n_clad;
            }
        }
    }

    Ok(CrossSectionGrid {
        horizontal_um,
        vertical_um,
        spacing_um: h,
        wavelength_um,
        permittivity: eps,
        permittivity_ordinary: eps_o,
        nonlinearity_sign: dnor,
        n_max: n_e.max(n_o).max(n_sub).max(n_clad),
        n_background: n_sub.max(n_clad),
    })
}
