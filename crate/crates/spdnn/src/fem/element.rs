//! Element-level kinematics: strain measures, strain-displacement matrices,
//! and element force/stiffness/mass contributions for the geometric
//! nonlinear truss and the 9-node plane-stress quadrilateral.

use super::quad::{gauss_quad, shape_quad9};
use crate::linalg::{SmallMat, Voigt};
use crate::{Error, Result};

pub const QUAD9_DOFS: usize = 18;
pub const QUAD9_GP: usize = 9;

/// Per-Gauss-point geometry of a quad9 element in the reference
/// configuration: physical shape-function gradients and the weighted
/// Jacobian determinant.
#[derive(Clone, Copy, Debug)]
pub struct GpGeom {
    pub dndx: [[f64; 2]; 9],
    /// Gauss weight × det J (area measure, no thickness).
    pub w_detj: f64,
    pub n: [f64; 9],
    /// Local coordinates of this point.
    pub xi: f64,
    pub eta: f64,
}

/// Reference geometry of one quad9 element at all 3×3 Gauss points.
pub fn quad9_geometry(coords: &[[f64; 2]; 9]) -> Result<[GpGeom; QUAD9_GP]> {
    let rule = gauss_quad(3)?;
    let mut out = [GpGeom { dndx: [[0.0; 2]; 9], w_detj: 0.0, n: [0.0; 9], xi: 0.0, eta: 0.0 };
        QUAD9_GP];
    for (g, &(xi, eta, w)) in rule.iter().enumerate() {
        let (n, dn) = shape_quad9(xi, eta);
        // Jacobian dx/dξ
        let mut j = [[0.0; 2]; 2];
        for k in 0..9 {
            for a in 0..2 {
                for b in 0..2 {
                    j[a][b] += coords[k][a] * dn[k][b];
                }
            }
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det > 0.0) {
            return Err(Error::Solver(format!(
                "non-positive Jacobian {det:e} in quad9 element"
            )));
        }
        let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        let mut dndx = [[0.0; 2]; 9];
        for k in 0..9 {
            // dN/dx = J⁻ᵀ dN/dξ
            dndx[k][0] = inv[0][0] * dn[k][0] + inv[1][0] * dn[k][1];
            dndx[k][1] = inv[0][1] * dn[k][0] + inv[1][1] * dn[k][1];
        }
        out[g] = GpGeom { dndx, w_detj: w * det, n, xi, eta };
    }
    Ok(out)
}

/// Displacement gradient ∇u (2×2) at a Gauss point from element
/// displacements (node-major `[u0x, u0y, u1x, ...]`).
pub fn disp_gradient(gp: &GpGeom, u_e: &[f64]) -> [[f64; 2]; 2] {
    let mut h = [[0.0; 2]; 2];
    for k in 0..9 {
        for a in 0..2 {
            for b in 0..2 {
                h[a][b] += u_e[2 * k + a] * gp.dndx[k][b];
            }
        }
    }
    h
}

/// Infinitesimal strain `½(∇u + ∇uᵀ)` in engineering Voigt form.
pub fn strain_small(gp: &GpGeom, u_e: &[f64]) -> Voigt {
    let h = disp_gradient(gp, u_e);
    Voigt::plane(h[0][0], h[1][1], h[0][1] + h[1][0])
}

/// Green-Lagrange strain and the deformation gradient `F = I + ∇u`.
pub fn strain_green_lagrange(gp: &GpGeom, u_e: &[f64]) -> (Voigt, [[f64; 2]; 2]) {
    let h = disp_gradient(gp, u_e);
    let f = [[1.0 + h[0][0], h[0][1]], [h[1][0], 1.0 + h[1][1]]];
    let e11 = h[0][0] + 0.5 * (h[0][0] * h[0][0] + h[1][0] * h[1][0]);
    let e22 = h[1][1] + 0.5 * (h[0][1] * h[0][1] + h[1][1] * h[1][1]);
    let g12 = h[0][1] + h[1][0] + h[0][0] * h[0][1] + h[1][0] * h[1][1];
    (Voigt::plane(e11, e22, g12), f)
}

/// Strain-displacement matrix (3 × 18, row-major). For the small-strain case
/// pass `f = I`; for total-Lagrangian finite strain pass the deformation
/// gradient, giving `δE = B δu`.
pub fn bmat(gp: &GpGeom, f: &[[f64; 2]; 2]) -> [f64; 3 * QUAD9_DOFS] {
    let mut b = [0.0; 3 * QUAD9_DOFS];
    for k in 0..9 {
        let gx = gp.dndx[k][0];
        let gy = gp.dndx[k][1];
        // row 0: E11, row 1: E22, row 2: engineering shear
        b[2 * k] = f[0][0] * gx;
        b[2 * k + 1] = f[1][0] * gx;
        b[QUAD9_DOFS + 2 * k] = f[0][1] * gy;
        b[QUAD9_DOFS + 2 * k + 1] = f[1][1] * gy;
        b[2 * QUAD9_DOFS + 2 * k] = f[0][0] * gy + f[0][1] * gx;
        b[2 * QUAD9_DOFS + 2 * k + 1] = f[1][0] * gy + f[1][1] * gx;
    }
    b
}

pub const IDENTITY_F: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

/// Accumulates the internal-force contribution `w·Lz·Bᵀσ` of one Gauss point.
pub fn add_internal_force(b: &[f64; 3 * QUAD9_DOFS], sig: &Voigt, w_lz: f64, f_e: &mut [f64]) {
    for r in 0..3 {
        let s = w_lz * sig.get(r);
        if s != 0.0 {
            let row = &b[r * QUAD9_DOFS..(r + 1) * QUAD9_DOFS];
            for (fe, &bv) in f_e.iter_mut().zip(row) {
                *fe += s * bv;
            }
        }
    }
}

/// Accumulates the material stiffness `w·Lz·BᵀDB` of one Gauss point into a
/// row-major 18×18 element matrix.
pub fn add_material_stiffness(
    b: &[f64; 3 * QUAD9_DOFS],
    d: &SmallMat,
    w_lz: f64,
    k_e: &mut [f64],
) {
    // db = D·B (3×18)
    let mut db = [0.0; 3 * QUAD9_DOFS];
    for r in 0..3 {
        for c in 0..QUAD9_DOFS {
            let mut v = 0.0;
            for m in 0..3 {
                v += d.get(r, m) * b[m * QUAD9_DOFS + c];
            }
            db[r * QUAD9_DOFS + c] = v;
        }
    }
    for i in 0..QUAD9_DOFS {
        for j in 0..QUAD9_DOFS {
            let mut v = 0.0;
            for m in 0..3 {
                v += b[m * QUAD9_DOFS + i] * db[m * QUAD9_DOFS + j];
            }
            k_e[i * QUAD9_DOFS + j] += w_lz * v;
        }
    }
}

/// Accumulates the geometric stiffness of one Gauss point (finite strain):
/// `K_geo[2I+a, 2J+b] = δ_ab ∇N_Iᵀ Ŝ ∇N_J`.
pub fn add_geometric_stiffness(gp: &GpGeom, sig: &Voigt, w_lz: f64, k_e: &mut [f64]) {
    let s = [[sig.get(0), sig.get(2)], [sig.get(2), sig.get(1)]];
    for i in 0..9 {
        let gi = gp.dndx[i];
        for j in 0..9 {
            let gj = gp.dndx[j];
            let v = w_lz
                * (gi[0] * (s[0][0] * gj[0] + s[0][1] * gj[1])
                    + gi[1] * (s[1][0] * gj[0] + s[1][1] * gj[1]));
            k_e[(2 * i) * QUAD9_DOFS + 2 * j] += v;
            k_e[(2 * i + 1) * QUAD9_DOFS + 2 * j + 1] += v;
        }
    }
}

/// Consistent element mass for quad9: `M[2I+a, 2J+b] = δ_ab ρ Lz ∫ N_I N_J`.
pub fn quad9_mass(geom: &[GpGeom; QUAD9_GP], rho: f64, lz: f64) -> [f64; QUAD9_DOFS * QUAD9_DOFS] {
    let mut m = [0.0; QUAD9_DOFS * QUAD9_DOFS];
    for gp in geom {
        let w = gp.w_detj * rho * lz;
        for i in 0..9 {
            for j in 0..9 {
                let v = w * (gp.n[i] * gp.n[j]);
                m[(2 * i) * QUAD9_DOFS + 2 * j] += v;
                m[(2 * i + 1) * QUAD9_DOFS + 2 * j + 1] += v;
            }
        }
    }
    m
}

/// Green-Lagrange strain of a two-node axial truss: `E = (l² − L²)/(2L²)`,
/// expressed through the stretch `λ = 1 + Δu/L`.
pub fn truss_strain(length: f64, du: f64) -> (f64, f64) {
    let lam = 1.0 + du / length;
    let e = du / length + 0.5 * (du / length) * (du / length);
    (e, lam)
}

/// Internal force of the truss element: `f = A·S·λ·[−1, +1]`.
pub fn truss_force(area: f64, s_pk2: f64, lam: f64) -> [f64; 2] {
    let f = area * s_pk2 * lam;
    [-f, f]
}

/// Tangent stiffness: material `A λ² D / L` plus geometric `A S / L`.
pub fn truss_stiffness(area: f64, length: f64, d_tan: f64, s_pk2: f64, lam: f64) -> [f64; 4] {
    let k = area / length * (lam * lam * d_tan + s_pk2);
    [k, -k, -k, k]
}

/// Consistent truss element mass `ρAL/6·[[2,1],[1,2]]`.
pub fn truss_mass(rho: f64, area: f64, length: f64) -> [f64; 4] {
    let m = rho * area * length / 6.0;
    [2.0 * m, m, m, 2.0 * m]
}
