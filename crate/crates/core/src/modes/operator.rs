//! Full-vector transverse-E wave operator on a staggered (Yee) grid.
//!
//! With propagation along the waveguide axis and exp(i(βz − ωt)) modes, the
//! transverse electric field satisfies
//!
//! ```text
//! β² Ex = k₀² εₓ Ex − ∂y(∂x Ey − ∂y Ex) + ∂x[(1/ε_z)(∂x(εₓEx) + ∂y(ε_y Ey))]
//! β² Ey = k₀² ε_y Ey + ∂x(∂x Ey − ∂y Ex) + ∂y[(1/ε_z)(∂x(εₓEx) + ∂y(ε_y Ey))]
//! ```
//!
//! where x is the horizontal (in-plane crystal z) axis and y the vertical.
//! Ex lives on horizontal cell edges (i+½, j), Ey on vertical edges (i, j+½),
//! with permittivities per cell. Tangential components get the arithmetic mean
//! of the two adjacent cells; ε_z, which only enters inverted, gets the
//! harmonic mean of the four cells around each node. The outer boundary is a
//! perfect electric conductor (tangential E = 0), which the padding margins
//! make inconsequential for guided modes.

use crate::geometry::CrossSectionGrid;
use crate::modes::eigen::Csr;
use ndarray::Array2;
use rayon::prelude::*;
use std::f64::consts::PI;

pub(crate) struct StaggeredOperator {
    pub csr: Csr,
    /// Cell grid shape (vertical, horizontal).
    pub ny: usize,
    pub nx: usize,
    pub n_ex: usize,
    pub n_ey: usize,
    pub k0: f64,
}

impl StaggeredOperator {
    /// Split a flat eigenvector into the staggered Ex and Ey component arrays.
    pub fn split(&self, v: &[f64]) -> (Array2<f64>, Array2<f64>) {
        debug_assert_eq!(v.len(), self.n_ex + self.n_ey);
        let ex = Array2::from_shape_vec((self.ny - 1, self.nx), v[..self.n_ex].to_vec()).unwrap();
        let ey = Array2::from_shape_vec((self.ny, self.nx - 1), v[self.n_ex..].to_vec()).unwrap();
        (ex, ey)
    }

    /// Interpolate a staggered component pair onto cell centers.
    pub fn to_cell_centers(&self, ex: &Array2<f64>, ey: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let (ny, nx) = (self.ny, self.nx);
        let mut exc = Array2::<f64>::zeros((ny, nx));
        for i in 0..nx {
            exc[[0, i]] = 0.5 * ex[[0, i]];
            exc[[ny - 1, i]] = 0.5 * ex[[ny - 2, i]];
        }
        for j in 1..ny - 1 {
            for i in 0..nx {
                exc[[j, i]] = 0.5 * (ex[[j - 1, i]] + ex[[j, i]]);
            }
        }
        let mut eyc = Array2::<f64>::zeros((ny, nx));
        for j in 0..ny {
            for i in 1..nx - 1 {
                eyc[[j, i]] = 0.5 * (ey[[j, i - 1]] + ey[[j, i]]);
            }
        }
        (exc, eyc)
    }
}

pub(crate) fn build(grid: &CrossSectionGrid) -> StaggeredOperator {
    let (ny, nx) = grid.shape();
    let h = grid.spacing_um;
    let k0 = 2.0 * PI / grid.wavelength_um;
    let eh = &grid.permittivity; // horizontal field component (extraordinary in LN)
    let eo = &grid.permittivity_ordinary; // vertical + longitudinal components

    // Edge and node averages.
    let mut exx = Array2::<f64>::zeros((ny - 1, nx));
    for j in 0..ny - 1 {
        for i in 0..nx {
            exx[[j, i]] = 0.5 * (eh[[j, i]] + eh[[j + 1, i]]);
        }
    }
    let mut eyy = Array2::<f64>::zeros((ny, nx - 1));
    for j in 0..ny {
        for i in 0..nx - 1 {
            eyy[[j, i]] = 0.5 * (eo[[j, i]] + eo[[j, i + 1]]);
        }
    }
    // inverse of ε_z at nodes: harmonic mean of the adjacent cells
    let mut inv_ezz = Array2::<f64>::zeros((ny + 1, nx + 1));
    for jn in 0..=ny {
        for in_ in 0..=nx {
            let mut acc = 0.0;
            let mut cnt = 0.0;
            for (dj, di) in [(0i64, 0i64), (0, -1), (-1, 0), (-1, -1)] {
                let cj = jn as i64 + dj;
                let ci = in_ as i64 + di;
                if (0..ny as i64).contains(&cj) && (0..nx as i64).contains(&ci) {
                    acc += 1.0 / eo[[cj as usize, ci as usize]];
                    cnt += 1.0;
                }
            }
            inv_ezz[[jn, in_]] = acc / cnt;
        }
    }

    let n_ex = (ny - 1) * nx;
    let n_ey = ny * (nx - 1);
    let exi = |jr: usize, i: usize| (jr * nx + i) as u32;
    let eyi = |jc: usize, ic: usize| (n_ex + jc * (nx - 1) + ic) as u32;
    let inv_h2 = 1.0 / (h * h);

    // Ex rows: unknown at (i+½, node row jr+1).
    let ex_rows: Vec<Vec<(u32, f64)>> = (0..n_ex)
        .into_par_iter()
        .map(|r| {
            let jr = r / nx;
            let i = r % nx;
            let mut row: Vec<(u32, f64)> = Vec::with_capacity(14);
            row.push((exi(jr, i), k0 * k0 * exx[[jr, i]]));
            // −∂y ω, with ω the out-of-plane curl at cell centers above (jr+1)
            // and below (jr) the unknown
            for (jc, s_out) in [(jr + 1, -1.0), (jr, 1.0)] {
                if i + 1 < nx {
                    row.push((eyi(jc, i), s_out * inv_h2));
                }
                if i >= 1 {
                    row.push((eyi(jc, i - 1), -s_out * inv_h2));
                }
                if jc + 1 < ny {
                    row.push((exi(jc, i), -s_out * inv_h2));
                }
                if jc >= 1 {
                    row.push((exi(jc - 1, i), s_out * inv_h2));
                }
            }
            // +∂x Sz with Sz = (1/ε_z)·div(εE) at the nodes left/right
            for (inode, s_out) in [(i + 1, 1.0), (i, -1.0)] {
                let iz = inv_ezz[[jr + 1, inode]];
                if inode < nx {
                    row.push((exi(jr, inode), s_out * iz * exx[[jr, inode]] * inv_h2));
                }
                if inode >= 1 {
                    row.push((exi(jr, inode - 1), -s_out * iz * exx[[jr, inode - 1]] * inv_h2));
                }
                if (1..nx).contains(&inode) {
                    row.push((eyi(jr + 1, inode - 1), s_out * iz * eyy[[jr + 1, inode - 1]] * inv_h2));
                    row.push((eyi(jr, inode - 1), -s_out * iz * eyy[[jr, inode - 1]] * inv_h2));
                }
            }
            row
        })
        .collect();

    // Ey rows: unknown at (node col ic+1, j+½).
    let ey_rows: Vec<Vec<(u32, f64)>> = (0..n_ey)
        .into_par_iter()
        .map(|r| {
            let jc = r / (nx - 1);
            let ic = r % (nx - 1);
            let mut row: Vec<(u32, f64)> = Vec::with_capacity(14);
            row.push((eyi(jc, ic), k0 * k0 * eyy[[jc, ic]]));
            // +∂x ω from the cells right/left of the unknown
            for (icell, s_out) in [(ic + 1, 1.0), (ic, -1.0)] {
                if icell + 1 < nx {
                    row.push((eyi(jc, icell), s_out * inv_h2));
                }
                if icell >= 1 {
                    row.push((eyi(jc, icell - 1), -s_out * inv_h2));
                }
                if jc + 1 < ny {
                    row.push((exi(jc, icell), -s_out * inv_h2));
                }
                if jc >= 1 {
                    row.push((exi(jc - 1, icell), s_out * inv_h2));
                }
            }
            // +∂y Sz from the nodes above/below
            for (jnode, s_out) in [(jc + 1, 1.0), (jc, -1.0)] {
                let iz = inv_ezz[[jnode, ic + 1]];
                if (1..ny).contains(&jnode) {
                    row.push((exi(jnode - 1, ic + 1), s_out * iz * exx[[jnode - 1, ic + 1]] * inv_h2));
                    row.push((exi(jnode - 1, ic), -s_out * iz * exx[[jnode - 1, ic]] * inv_h2));
                }
                if jnode < ny {
                    row.push((eyi(jnode, ic), s_out * iz * eyy[[jnode, ic]] * inv_h2));
                }
                if jnode >= 1 {
                    row.push((eyi(jnode - 1, ic), -s_out * iz * eyy[[jnode - 1, ic]] * inv_h2));
                }
            }
            row
        })
        .collect();

    let mut rows = ex_rows;
    rows.extend(ey_rows);
    StaggeredOperator {
        csr: Csr::from_row_entries(rows),
        ny,
        nx,
        n_ex,
        n_ey,
        k0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rasterize, WaveguideGeometry};

    #[test]
    fn operator_shape_and_uniform_limit() {
        // In a uniform medium the Ex block must reduce to ∇² + k0²ε with the
        // divergence term exactly cancelling the ∂xx part of the curl term.
        let mut g = WaveguideGeometry::design_point();
        g.substrate = crate::materials::fused_silica();
        g.cladding = crate::materials::fused_silica();
        g.film_extraordinary = crate::materials::fused_silica();
        g.film_ordinary = crate::materials::fused_silica();
        let grid = rasterize(&g, 25.0, 1.53).unwrap();
        let op = build(&grid);
        assert_eq!(op.csr.n, op.n_ex + op.n_ey);
        let h2 = grid.spacing_um * grid.spacing_um;
        let eps = 1.444262437154285_f64.powi(2); // silica at 1.53
        let k02 = op.k0 * op.k0;
        // pick an interior Ex row and check the assembled stencil
        let (ny, nx) = grid.shape();
        let r = (ny / 2) * nx + nx / 2;
        let mut diag = 0.0;
        let mut ex_neighbors = 0.0;
        let mut ey_sum = 0.0;
        for k in op.csr.row_ptr[r]..op.csr.row_ptr[r + 1] {
            let c = op.csr.cols[k] as usize;
            let v = op.csr.vals[k];
            if c == r {
                diag = v;
            } else if c < op.n_ex {
                ex_neighbors += v;
            } else {
                ey_sum += v.abs();
            }
        }
        // diag = k0²ε − 2/h² (curl y-part) − 2/h² (div x-part)
        assert!((diag - (k02 * eps - 4.0 / h2)).abs() < 1e-6 * k02 * eps);
        assert!((ex_neighbors - 4.0 / h2).abs() < 1e-6 / h2);
        // Ey couplings cancel pairwise in a uniform medium
        assert!(ey_sum < 1e-9 / h2);
    }
}
