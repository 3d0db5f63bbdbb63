//! Wavelength-dependent refractive indices and nonlinear coefficients.
//!
//! Dispersion is modeled with Sellmeier expansions of the form
//!
//! ```text
//! n²(λ) = A + Σᵢ Bᵢ λ² / (λ² − Cᵢ),      λ in µm, Cᵢ in µm²
//! ```
//!
//! stored as a flat coefficient list `[A, B₁, C₁, B₂, C₂, …]`. The built-in
//! library carries congruent lithium niobate at room temperature (Zelmon,
//! Small and Jundt, J. Opt. Soc. Am. B 14, 3319 (1997)), fused silica
//! (Malitson, J. Opt. Soc. Am. 55, 1205 (1965)) and air/vacuum (n = 1).
//! Alternative coefficient sets can be loaded from a TOML config without
//! rebuilding.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Transparency window of lithium niobate, µm (endpoints inclusive).
pub const TRANSPARENCY_WINDOW_UM: (f64, f64) = (0.35, 5.2);

/// Second-order nonlinear coefficients of lithium niobate, pm/V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearCoefficients {
    pub d33_pm_per_v: f64,
    pub d31_pm_per_v: f64,
}

impl NonlinearCoefficients {
    pub const LITHIUM_NIOBATE: NonlinearCoefficients = NonlinearCoefficients {
        d33_pm_per_v: -34.4,
        d31_pm_per_v: -4.35,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpticAxis {
    Ordinary,
    Extraordinary,
    Isotropic,
}

/// A single dispersion model: one material, one optic axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    pub name: String,
    /// `[A, B₁, C₁, B₂, C₂, …]`; dimensionless A, Bᵢ and Cᵢ in µm².
    pub sellmeier: Vec<f64>,
    /// Wavelength validity interval in µm, inclusive.
    pub valid_range_um: (f64, f64),
    pub axis: OpticAxis,
}

impl MaterialModel {
    pub fn new(
        name: impl Into<String>,
        sellmeier: Vec<f64>,
        valid_range_um: (f64, f64),
        axis: OpticAxis,
    ) -> Result<Self> {
        let name = name.into();
        if sellmeier.is_empty() || sellmeier.len() % 2 == 0 {
            return Err(Error::InvalidMaterial {
                name,
                reason: format!(
                    "coefficient list must be [A, B1, C1, ...] (odd length), got {}",
                    sellmeier.len()
                ),
            });
        }
        if !(valid_range_um.0 > 0.0 && valid_range_um.0 < valid_range_um.1) {
            return Err(Error::InvalidMaterial {
                name,
                reason: format!("invalid range {valid_range_um:?}"),
            });
        }
        Ok(MaterialModel {
            name,
            sellmeier,
            valid_range_um,
            axis,
        })
    }

    /// n(λ) from the Sellmeier expansion. Errors outside the valid range —
    /// never a silent extrapolation.
    pub fn refractive_index(&self, wavelength_um: f64) -> Result<f64> {
        let (lo, hi) = self.valid_range_um;
        if !(wavelength_um >= lo && wavelength_um <= hi) {
            return Err(Error::OutOfTransparencyWindow {
                material: self.name.clone(),
                wavelength_um,
                min_um: lo,
                max_um: hi,
            });
        }
        let l2 = wavelength_um * wavelength_um;
        let mut n2 = self.sellmeier[0];
        for pair in self.sellmeier[1..].chunks_exact(2) {
            n2 += pair[0] * l2 / (l2 - pair[1]);
        }
        Ok(n2.sqrt())
    }

    /// Relative permittivity ε = n².
    pub fn permittivity(&self, wavelength_um: f64) -> Result<f64> {
        self.refractive_index(wavelength_um).map(|n| n * n)
    }
}

/// `true` iff λ lies inside the lithium-niobate transparency window
/// (0.35–5.2 µm, endpoints inclusive).
pub fn check_transparency(wavelength_um: f64) -> bool {
    wavelength_um >= TRANSPARENCY_WINDOW_UM.0 && wavelength_um <= TRANSPARENCY_WINDOW_UM.1
}

pub fn vacuum() -> MaterialModel {
    MaterialModel::new("air", vec![1.0], (0.01, 1000.0), OpticAxis::Isotropic).unwrap()
}

pub fn fused_silica() -> MaterialModel {
    // Malitson 1965; resonances quoted as sqrt(C) in the original.
    MaterialModel::new(
        "silica",
        vec![
            1.0,
            0.6961663,
            0.0684043 * 0.0684043,
            0.4079426,
            0.1162414 * 0.1162414,
            0.8974794,
            9.896161 * 9.896161,
        ],
        (0.21, 3.71),
        OpticAxis::Isotropic,
    )
    .unwrap()
}

pub fn lithium_niobate_extraordinary() -> MaterialModel {
    MaterialModel::new(
        "ln_e",
        vec![1.0, 2.9804, 0.02047, 0.5981, 0.0666, 8.9543, 416.08],
        (0.4, 5.0),
        OpticAxis::Extraordinary,
    )
    .unwrap()
}

pub fn lithium_niobate_ordinary() -> MaterialModel {
    MaterialModel::new(
        "ln_o",
        vec![1.0, 2.6734, 0.01764, 1.2290, 0.05914, 12.614, 474.60],
        (0.4, 5.0),
        OpticAxis::Ordinary,
    )
    .unwrap()
}

/// Named collection of dispersion models, keyed by material name.
#[derive(Debug, Clone)]
pub struct MaterialLibrary {
    models: BTreeMap<String, MaterialModel>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialEntry {
    sellmeier: Vec<f64>,
    valid_range_um: (f64, f64),
    axis: OpticAxis,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialsFile {
    materials: BTreeMap<String, MaterialEntry>,
}

impl MaterialLibrary {
    /// Library with the built-in models: `air`, `silica`, `ln_e`, `ln_o`.
    pub fn builtin() -> Self {
        let mut models = BTreeMap::new();
        for m in [
            vacuum(),
            fused_silica(),
            lithium_niobate_extraordinary(),
            lithium_niobate_ordinary(),
        ] {
            models.insert(m.name.clone(), m);
        }
        MaterialLibrary { models }
    }

    /// Parse a TOML document of the form
    ///
    /// ```toml
    /// [materials.ln_e]
    /// sellmeier = [1.0, 2.9804, 0.02047]
    /// valid_range_um = [0.4, 5.0]
    /// axis = "extraordinary"
    /// ```
    ///
    /// Entries override built-ins of the same name; unknown keys are an error.
    pub fn from_toml(text: &str) -> Result<Self> {
        let parsed: MaterialsFile = toml::from_str(text).map_err(|e| Error::InvalidMaterial {
            name: "<config>".into(),
            reason: e.to_string(),
        })?;
        let mut lib = Self::builtin();
        for (name, entry) in parsed.materials {
            let model =
                MaterialModel::new(name.clone(), entry.sellmeier, entry.valid_range_um, entry.axis)?;
            lib.models.insert(name, model);
        }
        Ok(lib)
    }

    pub fn get(&self, name: &str) -> Result<&MaterialModel> {
        self.models
            .get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(|s| s.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_identity() {
        let v = vacuum();
        for lam in [0.2, 0.765, 1.53, 10.0] {
            assert_eq!(v.refractive_index(lam).unwrap(), 1.0);
        }
    }

    #[test]
    fn ln_extraordinary_at_1550() {
        // Frozen from an independent evaluation of the Zelmon 1997 set.
        let n = lithium_niobate_extraordinary()
            .refractive_index(1.55)
            .unwrap();
        assert!((n - 2.1375596497855565).abs() < 1e-12, "n = {n}");
        assert!((n - 2.138).abs() < 1e-3);
    }

    #[test]
    fn silica_at_1550() {
        // Frozen from an independent evaluation of the Malitson 1965 set.
        let n = fused_silica().refractive_index(1.55).unwrap();
        assert!((n - 1.444023621703261).abs() < 1e-12, "n = {n}");
        assert!((n - 1.444).abs() < 1e-3);
    }

    #[test]
    fn index_above_one_over_valid_range() {
        for m in [
            fused_silica(),
            lithium_niobate_extraordinary(),
            lithium_niobate_ordinary(),
        ] {
            let (lo, hi) = m.valid_range_um;
            for i in 0..=100 {
                let lam = lo + (hi - lo) * i as f64 / 100.0;
                assert!(m.refractive_index(lam).unwrap() >= 1.0);
            }
        }
    }

    #[test]
    fn out_of_range_is_an_error() {
        let ln = lithium_niobate_extraordinary();
        assert!(matches!(
            ln.refractive_index(0.2),
            Err(Error::OutOfTransparencyWindow { .. })
        ));
        assert!(matches!(
            ln.refractive_index(8.0),
            Err(Error::OutOfTransparencyWindow { .. })
        ));
    }

    #[test]
    fn transparency_window() {
        assert!(check_transparency(1.530));
        assert!(!check_transparency(0.30));
        // endpoints are inclusive
        assert!(check_transparency(5.2));
        assert!(check_transparency(0.35));
        assert!(!check_transparency(5.2000001));
    }

    #[test]
    fn ln_extraordinary_normal_dispersion() {
        // n(λ) decreases monotonically over 0.7–1.6 µm.
        let ln = lithium_niobate_extraordinary();
        let mut prev = f64::INFINITY;
        for i in 0..=90 {
            let lam = 0.7 + 0.01 * i as f64;
            let n = ln.refractive_index(lam).unwrap();
            assert!(n < prev, "dispersion not monotonic at {lam} um");
            prev = n;
        }
    }

    #[test]
    fn refractive_index_is_pure() {
        let ln = lithium_niobate_extraordinary();
        let a = ln.refractive_index(1.234).unwrap();
        let b = ln.refractive_index(1.234).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn library_from_toml_overrides_and_rejects_unknown_keys() {
        let lib = MaterialLibrary::from_toml(
            r#"
            [materials.glass]
            sellmeier = [2.25]
            valid_range_um = [0.3, 2.0]
            axis = "isotropic"
            "#,
        )
        .unwrap();
        assert!((lib.get("glass").unwrap().refractive_index(1.0).unwrap() - 1.5).abs() < 1e-12);
        assert!(lib.get("silica").is_ok());

        let bad = MaterialLibrary::from_toml(
            r#"
            [materials.glass]
            sellmeier = [2.25]
            valid_range_um = [0.3, 2.0]
            axis = "isotropic"
            typo_key = 1
            "#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn nonlinear_coefficients_fixed() {
        let c = NonlinearCoefficients::LITHIUM_NIOBATE;
        assert_eq!(c.d33_pm_per_v, -34.4);
        assert_eq!(c.d31_pm_per_v, -4.35);
    }
}
