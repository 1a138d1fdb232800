//! Global assembly: mass matrix, internal force and tangent from per-point
//! stresses, external loads, and the per-point force maps used by the
//! training losses.

use super::element::{
    self, add_geometric_stiffness, add_internal_force, add_material_stiffness, bmat,
    quad9_geometry, GpGeom, IDENTITY_F, QUAD9_DOFS, QUAD9_GP,
};
use super::mesh::{BCs, ElementKind, LoadProtocol, Mesh, TractionProfile};
use super::quad::{gauss_1d, shape_edge3};
use crate::linalg::band::BandMat;
use crate::linalg::{SmallMat, Voigt};
use crate::{Error, Result};

/// Reference geometry cached per element.
#[derive(Clone, Debug)]
pub enum ElemGeom {
    Truss { length: f64 },
    Quad(Box<[GpGeom; QUAD9_GP]>),
}

/// Precomputed reference geometry for every element.
pub fn reference_geometry(mesh: &Mesh) -> Result<Vec<ElemGeom>> {
    let mut out = Vec::with_capacity(mesh.n_elems());
    for e in 0..mesh.n_elems() {
        let nodes = mesh.elem_nodes(e);
        match mesh.kind {
            ElementKind::Truss2 => {
                let length = mesh.node_coord(nodes[1], 0) - mesh.node_coord(nodes[0], 0);
                if !(length > 0.0) {
                    return Err(Error::Data(format!("truss element {e} has non-positive length")));
                }
                out.push(ElemGeom::Truss { length });
            }
            ElementKind::Quad9 => {
                let mut coords = [[0.0; 2]; 9];
                for (k, &n) in nodes.iter().enumerate() {
                    coords[k] = [mesh.node_coord(n, 0), mesh.node_coord(n, 1)];
                }
                out.push(ElemGeom::Quad(Box::new(quad9_geometry(&coords)?)));
            }
        }
    }
    Ok(out)
}

pub fn new_band(mesh: &Mesh) -> BandMat {
    let hb = mesh.half_bandwidth();
    BandMat::new(mesh.ndof(), hb, hb)
}

/// Consistent global mass matrix; symmetric, total mass `ρ·V`.
pub fn assemble_mass(mesh: &Mesh, geom: &[ElemGeom]) -> BandMat {
    let mut m = new_band(mesh);
    let mut dofs = Vec::new();
    for e in 0..mesh.n_elems() {
        let rho = mesh.rho[mesh.mat_ids[e]];
        mesh.elem_dofs(e, &mut dofs);
        match &geom[e] {
            ElemGeom::Truss { length } => {
                let me = element::truss_mass(rho, mesh.thickness, *length);
                for i in 0..2 {
                    for j in 0..2 {
                        m.add(dofs[i], dofs[j], me[i * 2 + j]);
                    }
                }
            }
            ElemGeom::Quad(g) => {
                let me = element::quad9_mass(g, rho, mesh.thickness);
                for i in 0..QUAD9_DOFS {
                    for j in 0..QUAD9_DOFS {
                        m.add(dofs[i], dofs[j], me[i * QUAD9_DOFS + j]);
                    }
                }
            }
        }
    }
    m
}

/// Strains at every Gauss point for a displacement field. For quad9 the
/// `finite` flag selects Green-Lagrange vs infinitesimal strain; the truss
/// is always Green-Lagrange.
pub fn strains_at_gauss(
    mesh: &Mesh,
    geom: &[ElemGeom],
    u: &[f64],
    finite: bool,
) -> Vec<Voigt> {
    let mut out = Vec::with_capacity(mesh.n_gauss());
    let mut dofs = Vec::new();
    let mut u_e = [0.0; QUAD9_DOFS];
    for e in 0..mesh.n_elems() {
        mesh.elem_dofs(e, &mut dofs);
        match &geom[e] {
            ElemGeom::Truss { length } => {
                let du = u[dofs[1]] - u[dofs[0]];
                let (eps, _) = element::truss_strain(*length, du);
                out.push(Voigt::scalar(eps));
            }
            ElemGeom::Quad(g) => {
                for (k, &d) in dofs.iter().enumerate() {
                    u_e[k] = u[d];
                }
                for gp in g.iter() {
                    if finite {
                        out.push(element::strain_green_lagrange(gp, &u_e).0);
                    } else {
                        out.push(element::strain_small(gp, &u_e));
                    }
                }
            }
        }
    }
    out
}

/// Global internal force `P(u, σ)` from per-Gauss-point stresses, and the
/// tangent `∂P/∂u` when per-point material tangents are supplied.
pub fn assemble_internal(
    mesh: &Mesh,
    geom: &[ElemGeom],
    u: &[f64],
    sig: &[Voigt],
    tangents: Option<&[SmallMat]>,
    finite: bool,
) -> Result<(Vec<f64>, Option<BandMat>)> {
    if sig.len() != mesh.n_gauss() {
        return Err(Error::InvalidArgument(format!(
            "need {} Gauss-point stresses, got {}",
            mesh.n_gauss(),
            sig.len()
        )));
    }
    let mut p = vec![0.0; mesh.ndof()];
    let mut k_glob = tangents.map(|_| new_band(mesh));
    let lz = mesh.thickness;
    let mut dofs = Vec::new();
    let mut u_e = [0.0; QUAD9_DOFS];
    let npg = mesh.gauss_per_elem();
    for e in 0..mesh.n_elems() {
        mesh.elem_dofs(e, &mut dofs);
        match &geom[e] {
            ElemGeom::Truss { length } => {
                let du = u[dofs[1]] - u[dofs[0]];
                let (_, lam) = element::truss_strain(*length, du);
                let s = sig[e * npg].get(0);
                let fe = element::truss_force(lz, s, lam);
                p[dofs[0]] += fe[0];
                p[dofs[1]] += fe[1];
                if let (Some(kg), Some(tans)) = (&mut k_glob, tangents) {
                    let d = tans[e * npg].get(0, 0);
                    let ke = element::truss_stiffness(lz, *length, d, s, lam);
                    for i in 0..2 {
                        for j in 0..2 {
                            kg.add(dofs[i], dofs[j], ke[i * 2 + j]);
                        }
                    }
                }
            }
            ElemGeom::Quad(g) => {
                for (k, &d) in dofs.iter().enumerate() {
                    u_e[k] = u[d];
                }
                let mut f_e = [0.0; QUAD9_DOFS];
                let mut k_e = tangents.map(|_| vec![0.0; QUAD9_DOFS * QUAD9_DOFS]);
                for (gl, gp) in g.iter().enumerate() {
                    let idx = e * npg + gl;
                    let f = if finite {
                        element::strain_green_lagrange(gp, &u_e).1
                    } else {
                        IDENTITY_F
                    };
                    let b = bmat(gp, &f);
                    let w_lz = gp.w_detj * lz;
                    add_internal_force(&b, &sig[idx], w_lz, &mut f_e);
                    if let (Some(ke), Some(tans)) = (&mut k_e, tangents) {
                        add_material_stiffness(&b, &tans[idx], w_lz, ke);
                        if finite {
                            add_geometric_stiffness(gp, &sig[idx], w_lz, ke);
                        }
                    }
                }
                for (i, &di) in dofs.iter().enumerate() {
                    p[di] += f_e[i];
                }
                if let (Some(kg), Some(ke)) = (&mut k_glob, &k_e) {
                    for (i, &di) in dofs.iter().enumerate() {
                        for (j, &dj) in dofs.iter().enumerate() {
                            kg.add(di, dj, ke[i * QUAD9_DOFS + j]);
                        }
                    }
                }
            }
        }
    }
    Ok((p, k_glob))
}

/// Linear map from one Gauss point's stress to the element force vector:
/// `P_e += G σ`, with `G = w·detJ·Lz·Bᵀ` (row-major ndof_e × dim). The
/// adjoint `σ̄ = Gᵀ r_e` drives the reverse sweep of the indirect loss.
#[derive(Clone, Debug)]
pub struct GpForceMap {
    pub dofs: Vec<usize>,
    /// Row-major (ndof_e × dim).
    pub g: Vec<f64>,
    pub dim: usize,
}

impl GpForceMap {
    pub fn apply(&self, sig: &Voigt, p: &mut [f64]) {
        for (i, &d) in self.dofs.iter().enumerate() {
            let mut v = 0.0;
            for c in 0..self.dim {
                v += self.g[i * self.dim + c] * sig.get(c);
            }
            p[d] += v;
        }
    }

    /// `σ̄ += Gᵀ r` gathered from a global residual vector.
    pub fn adjoint(&self, r: &[f64]) -> Voigt {
        let mut out = Voigt::zeros(self.dim);
        for (i, &d) in self.dofs.iter().enumerate() {
            let ri = r[d];
            if ri != 0.0 {
                for c in 0..self.dim {
                    out.set(c, out.get(c) + self.g[i * self.dim + c] * ri);
                }
            }
        }
        out
    }
}

/// Per-Gauss-point force maps at a given displacement state.
pub fn gp_force_maps(
    mesh: &Mesh,
    geom: &[ElemGeom],
    u: &[f64],
    finite: bool,
) -> Vec<GpForceMap> {
    let mut out = Vec::with_capacity(mesh.n_gauss());
    let lz = mesh.thickness;
    let mut dofs = Vec::new();
    let mut u_e = [0.0; QUAD9_DOFS];
    for e in 0..mesh.n_elems() {
        mesh.elem_dofs(e, &mut dofs);
        match &geom[e] {
            ElemGeom::Truss { length } => {
                let du = u[dofs[1]] - u[dofs[0]];
                let (_, lam) = element::truss_strain(*length, du);
                let f = lz * lam;
                out.push(GpForceMap { dofs: dofs.clone(), g: vec![-f, f], dim: 1 });
            }
            ElemGeom::Quad(g) => {
                for (k, &d) in dofs.iter().enumerate() {
                    u_e[k] = u[d];
                }
                for gp in g.iter() {
                    let f = if finite {
                        element::strain_green_lagrange(gp, &u_e).1
                    } else {
                        IDENTITY_F
                    };
                    let b = bmat(gp, &f);
                    let w_lz = gp.w_detj * lz;
                    let mut gmat = vec![0.0; QUAD9_DOFS * 3];
                    for i in 0..QUAD9_DOFS {
                        for c in 0..3 {
                            gmat[i * 3 + c] = w_lz * b[c * QUAD9_DOFS + i];
                        }
                    }
                    out.push(GpForceMap { dofs: dofs.clone(), g: gmat, dim: 3 });
                }
            }
        }
    }
    out
}

/// Spatial part of the external load (amplitude 1): edge tractions and point
/// loads. Scaled by the protocol factor at each time.
pub fn assemble_load_vector(mesh: &Mesh, bcs: &BCs) -> Result<Vec<f64>> {
    let mut f = vec![0.0; mesh.ndof()];
    let nd = mesh.ndim();
    if !bcs.tractions.is_empty() && mesh.kind != ElementKind::Quad9 {
        return Err(Error::Data("edge tractions need quad9 meshes".into()));
    }
    let (pts, wts) = gauss_1d(5)?;
    for tr in &bcs.tractions {
        let xs: Vec<[f64; 2]> = tr
            .nodes
            .iter()
            .map(|&n| [mesh.node_coord(n, 0), mesh.node_coord(n, 1)])
            .collect();
        for (&xi, &w) in pts.iter().zip(&wts) {
            let (n, dn) = shape_edge3(xi);
            let mut x = [0.0; 2];
            let mut tang = [0.0; 2];
            for k in 0..3 {
                for a in 0..2 {
                    x[a] += n[k] * xs[k][a];
                    tang[a] += dn[k] * xs[k][a];
                }
            }
            let jac = (tang[0] * tang[0] + tang[1] * tang[1]).sqrt();
            let tval: [f64; 2] = match &tr.profile {
                TractionProfile::Uniform(v) => *v,
                TractionProfile::GaussianY { coeff, x0, sigma } => {
                    let dx = x[0] - x0;
                    [0.0, coeff * (-dx * dx / (sigma * sigma)).exp()]
                }
            };
            // Surface traction (Pa): force picks up the thickness.
            for k in 0..3 {
                for a in 0..2 {
                    f[tr.nodes[k] * nd + a] += w * jac * mesh.thickness * n[k] * tval[a];
                }
            }
        }
    }
    for p in &bcs.point_loads {
        f[p.node * nd + p.dof] += p.amplitude;
    }
    Ok(f)
}

/// Constant body-force vector `∫ ρ N b dV` (zero when no body force is set).
pub fn assemble_body_force(mesh: &Mesh, geom: &[ElemGeom], bcs: &BCs) -> Vec<f64> {
    let mut f = vec![0.0; mesh.ndof()];
    let Some(b) = bcs.body_force else {
        return f;
    };
    let nd = mesh.ndim();
    let mut dofs = Vec::new();
    for e in 0..mesh.n_elems() {
        let rho = mesh.rho[mesh.mat_ids[e]];
        mesh.elem_dofs(e, &mut dofs);
        match &geom[e] {
            ElemGeom::Truss { length } => {
                let half = 0.5 * rho * mesh.thickness * length * b[0];
                f[dofs[0]] += half;
                f[dofs[1]] += half;
            }
            ElemGeom::Quad(g) => {
                for gp in g.iter() {
                    let w = gp.w_detj * rho * mesh.thickness;
                    for k in 0..9 {
                        for a in 0..nd {
                            f[dofs[2 * k + a]] += w * gp.n[k] * b[a];
                        }
                    }
                }
            }
        }
    }
    f
}

/// External force at time `t`: protocol-scaled loads plus the body force.
pub fn external_force(
    mesh: &Mesh,
    geom: &[ElemGeom],
    bcs: &BCs,
    protocol: &LoadProtocol,
    t: f64,
) -> Result<Vec<f64>> {
    let spatial = assemble_load_vector(mesh, bcs)?;
    let body = assemble_body_force(mesh, geom, bcs);
    let s = protocol.factor(t);
    Ok(spatial.iter().zip(&body).map(|(l, b)| s * l + b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::{Dirichlet, EdgeTraction, PointLoad};
    use crate::reference::{linear_plane_stress, RefMaterial};
    use approx::assert_relative_eq;

    /// Structured nx × ny quad9 plate on [0,lx]×[0,ly], one material.
    pub fn plate_mesh(nx: usize, ny: usize, lx: f64, ly: f64, lz: f64, rho: f64) -> Mesh {
        let (gx, gy) = (2 * nx + 1, 2 * ny + 1);
        let mut coords = Vec::with_capacity(gx * gy * 2);
        for j in 0..gy {
            for i in 0..gx {
                coords.push(lx * i as f64 / (gx - 1) as f64);
                coords.push(ly * j as f64 / (gy - 1) as f64);
            }
        }
        let node = |i: usize, j: usize| j * gx + i;
        let mut conn = Vec::new();
        for ey in 0..ny {
            for ex in 0..nx {
                let (i0, j0) = (2 * ex, 2 * ey);
                conn.extend_from_slice(&[
                    node(i0, j0),
                    node(i0 + 2, j0),
                    node(i0 + 2, j0 + 2),
                    node(i0, j0 + 2),
                    node(i0 + 1, j0),
                    node(i0 + 2, j0 + 1),
                    node(i0 + 1, j0 + 2),
                    node(i0, j0 + 1),
                    node(i0 + 1, j0 + 1),
                ]);
            }
        }
        Mesh {
            kind: ElementKind::Quad9,
            coords,
            conn,
            mat_ids: vec![0; nx * ny],
            rho: vec![rho],
            thickness: lz,
        }
    }

    #[test]
    fn mass_matrix_totals() {
        // 10 cm × 5 cm plate, ρ = 4200, Lz = 0.1 cm → 0.021 kg.
        let mesh = plate_mesh(4, 2, 0.10, 0.05, 0.001, 4200.0);
        let geom = reference_geometry(&mesh).unwrap();
        let m = assemble_mass(&mesh, &geom);
        let ones_x: Vec<f64> = (0..mesh.ndof()).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let mv = m.matvec(&ones_x);
        let total: f64 = mv.iter().sum();
        assert_relative_eq!(total, 0.021, max_relative = 1e-12);
        // Symmetry via random vectors.
        let x: Vec<f64> = (0..mesh.ndof()).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..mesh.ndof()).map(|i| (i as f64 * 0.73).cos()).collect();
        let mx = m.matvec(&x);
        let my = m.matvec(&y);
        let xtmy: f64 = x.iter().zip(&my).map(|(a, b)| a * b).sum();
        let ytmx: f64 = y.iter().zip(&mx).map(|(a, b)| a * b).sum();
        assert_relative_eq!(xtmy, ytmx, max_relative = 1e-12);
    }

    #[test]
    fn zero_stress_zero_force() {
        let mesh = plate_mesh(2, 1, 1.0, 0.5, 0.01, 1000.0);
        let geom = reference_geometry(&mesh).unwrap();
        let u = vec![0.0; mesh.ndof()];
        let sig = vec![Voigt::zeros(3); mesh.n_gauss()];
        let (p, _) = assemble_internal(&mesh, &geom, &u, &sig, None, false).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn patch_test_interior_equilibrium() {
        // Linear displacement field + linear elasticity: interior nodal forces
        // vanish to round-off (quadrature-exact equilibrium).
        let mesh = plate_mesh(3, 2, 1.0, 0.6, 0.01, 1000.0);
        let geom = reference_geometry(&mesh).unwrap();
        let c = linear_plane_stress(1e9, 0.3).unwrap();
        let (a, b, d) = (1e-3, 4e-4, -2e-4);
        let mut u = vec![0.0; mesh.ndof()];
        for n in 0..mesh.n_nodes() {
            let (x, y) = (mesh.node_coord(n, 0), mesh.node_coord(n, 1));
            u[2 * n] = a * x + b * y;
            u[2 * n + 1] = d * x - 0.5 * a * y;
        }
        let eps = strains_at_gauss(&mesh, &geom, &u, false);
        let sig: Vec<Voigt> = eps.iter().map(|e| c.matvec(e)).collect();
        let (p, _) = assemble_internal(&mesh, &geom, &u, &sig, None, false).unwrap();
        // Interior nodes: grid indices 1..gx-1 × 1..gy-1.
        let gx = 2 * 3 + 1;
        let gy = 2 * 2 + 1;
        let pmax = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 1..gy - 1 {
            for i in 1..gx - 1 {
                let n = j * gx + i;
                assert!(
                    p[2 * n].abs() <= 1e-9 * pmax && p[2 * n + 1].abs() <= 1e-9 * pmax,
                    "interior residual at node {n}: ({:e}, {:e}) vs scale {pmax:e}",
                    p[2 * n],
                    p[2 * n + 1]
                );
            }
        }
    }

    #[test]
    fn single_element_uniform_stress_equilibrates_edge_traction() {
        // Uniform σ_xx on one clamped element equals the boundary-equivalent
        // nodal forces of the matching edge traction.
        let mesh = plate_mesh(1, 1, 0.1, 0.05, 0.002, 1.0);
        let geom = reference_geometry(&mesh).unwrap();
        let sxx = 3.0e6;
        let sig = vec![Voigt::plane(sxx, 0.0, 0.0); mesh.n_gauss()];
        let u = vec![0.0; mesh.ndof()];
        let (p, _) = assemble_internal(&mesh, &geom, &u, &sig, None, false).unwrap();
        // Traction σ_xx on the right edge (x = lx): nodes 2, 5(mid), 8 of grid.
        let gx = 3;
        let right: Vec<usize> = (0..3).map(|j| j * gx + 2).collect();
        let bcs = BCs {
            dirichlet: vec![],
            tractions: vec![EdgeTraction {
                nodes: [right[0], right[1], right[2]],
                profile: TractionProfile::Uniform([sxx, 0.0]),
            }],
            point_loads: vec![],
            body_force: None,
        };
        let f = assemble_load_vector(&mesh, &bcs).unwrap();
        for &n in &right {
            assert_relative_eq!(p[2 * n], f[2 * n], max_relative = 1e-10);
        }
        // Total x-traction equals σ·edge length·thickness.
        let total: f64 = right.iter().map(|&n| f[2 * n]).sum();
        assert_relative_eq!(total, sxx * 0.05 * 0.002, max_relative = 1e-12);
    }

    #[test]
    fn tangent_matches_finite_differences() {
        for finite in [false, true] {
            let mesh = plate_mesh(2, 1, 0.4, 0.2, 0.01, 1000.0);
            let geom = reference_geometry(&mesh).unwrap();
            let c = linear_plane_stress(5e8, 0.25).unwrap();
            let mut u = vec![0.0; mesh.ndof()];
            for (i, v) in u.iter_mut().enumerate() {
                *v = 1e-3 * ((i as f64) * 0.61).sin();
            }
            let eval = |u: &[f64]| -> Vec<f64> {
                let eps = strains_at_gauss(&mesh, &geom, u, finite);
                let sig: Vec<Voigt> = eps.iter().map(|e| c.matvec(e)).collect();
                assemble_internal(&mesh, &geom, u, &sig, None, finite).unwrap().0
            };
            let eps = strains_at_gauss(&mesh, &geom, &u, finite);
            let sig: Vec<Voigt> = eps.iter().map(|e| c.matvec(e)).collect();
            let tans = vec![c; mesh.n_gauss()];
            let (_, k) =
                assemble_internal(&mesh, &geom, &u, &sig, Some(&tans), finite).unwrap();
            let k = k.unwrap();
            let h = 1e-7;
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for col in (0..mesh.ndof()).step_by(5) {
                let mut up = u.clone();
                up[col] += h;
                let mut um = u.clone();
                um[col] -= h;
                let pp = eval(&up);
                let pm = eval(&um);
                for row in 0..mesh.ndof() {
                    let fd = (pp[row] - pm[row]) / (2.0 * h);
                    worst = worst.max((k.get(row, col) - fd).abs());
                    scale = scale.max(fd.abs());
                }
            }
            assert!(worst <= 1e-6 * scale, "finite={finite}: worst {worst:e} vs scale {scale:e}");
        }
    }

    #[test]
    fn rigid_rotation_of_finite_strain_plate_has_zero_force() {
        let mesh = plate_mesh(2, 2, 0.2, 0.2, 0.01, 1000.0);
        let geom = reference_geometry(&mesh).unwrap();
        let th = 0.4f64;
        let (c, s) = (th.cos(), th.sin());
        let mut u = vec![0.0; mesh.ndof()];
        for n in 0..mesh.n_nodes() {
            let (x, y) = (mesh.node_coord(n, 0), mesh.node_coord(n, 1));
            u[2 * n] = c * x - s * y - x;
            u[2 * n + 1] = s * x + c * y - y;
        }
        let cmat = linear_plane_stress(1e9, 0.3).unwrap();
        let mat = RefMaterial::LinearElastic(cmat);
        let eps = strains_at_gauss(&mesh, &geom, &u, true);
        let sig: Vec<Voigt> = eps
            .iter()
            .map(|e| mat.eval(&mat.init_state(), e).unwrap().0)
            .collect();
        let (p, _) = assemble_internal(&mesh, &geom, &u, &sig, None, true).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-6), "rotation produced force");
    }

    #[test]
    fn gp_force_maps_reproduce_assembly() {
        let mesh = plate_mesh(2, 2, 0.3, 0.3, 0.01, 1000.0);
        let geom = reference_geometry(&mesh).unwrap();
        let mut u = vec![0.0; mesh.ndof()];
        for (i, v) in u.iter_mut().enumerate() {
            *v = 2e-3 * ((i as f64) * 0.37).cos();
        }
        let sig: Vec<Voigt> = (0..mesh.n_gauss())
            .map(|g| Voigt::plane((g as f64).sin(), (g as f64).cos(), 0.5))
            .collect();
        let (p, _) = assemble_internal(&mesh, &geom, &u, &sig, None, true).unwrap();
        let maps = gp_force_maps(&mesh, &geom, &u, true);
        let mut p2 = vec![0.0; mesh.ndof()];
        for (map, s) in maps.iter().zip(&sig) {
            map.apply(s, &mut p2);
        }
        for (a, b) in p.iter().zip(&p2) {
            assert_relative_eq!(a, b, epsilon = 1e-10 * p.iter().fold(1.0f64, |m, v| m.max(v.abs())));
        }
    }

    #[test]
    fn external_force_time_shape() {
        let mesh = plate_mesh(2, 1, 0.1, 0.05, 0.001, 4200.0);
        let geom = reference_geometry(&mesh).unwrap();
        let gx = 2 * 2 + 1;
        let top: Vec<usize> = (0..gx).map(|i| (2 * 1) * gx + i).collect();
        let mut tractions = Vec::new();
        for ex in 0..2 {
            tractions.push(EdgeTraction {
                nodes: [top[2 * ex], top[2 * ex + 1], top[2 * ex + 2]],
                profile: TractionProfile::Uniform([0.0, 2.5e8]),
            });
        }
        let bcs = BCs { dirichlet: vec![], tractions, point_loads: vec![], body_force: None };
        let protocol = LoadProtocol::new(0.2, "A1").unwrap();
        let f0 = external_force(&mesh, &geom, &bcs, &protocol, 0.0).unwrap();
        assert!(f0.iter().all(|&v| v == 0.0));
        let fh = external_force(&mesh, &geom, &bcs, &protocol, 0.1).unwrap();
        let total: f64 = top.iter().map(|&n| fh[2 * n + 1]).sum();
        // sin(π/2) = 1: total force = traction × edge length × thickness.
        assert_relative_eq!(total, 2.5e8 * 0.1 * 0.001, max_relative = 1e-12);
    }

    #[test]
    fn point_load_assembles_directly() {
        let mesh = Mesh {
            kind: ElementKind::Truss2,
            coords: vec![0.0, 1.0],
            conn: vec![0, 1],
            mat_ids: vec![0],
            rho: vec![8000.0],
            thickness: 0.005,
        };
        let bcs = BCs {
            dirichlet: vec![Dirichlet { node: 0, dof: 0, value: 0.0 }],
            tractions: vec![],
            point_loads: vec![PointLoad { node: 1, dof: 0, amplitude: 2.8e6 }],
            body_force: None,
        };
        let f = assemble_load_vector(&mesh, &bcs).unwrap();
        assert_eq!(f, vec![0.0, 2.8e6]);
    }
}
