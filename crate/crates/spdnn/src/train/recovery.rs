//! Least-squares stress-field recovery from full-field observations, used to
//! pre-train models before indirect minimization.
//!
//! Displacements live on the quadratic nodes; the stress field is
//! approximated bilinearly on the corner nodes of each element, so the
//! equilibrium equations `P(u, σ) = F − M ü` outnumber the stress unknowns
//! and each time step becomes an overdetermined least-squares problem.

use super::data::{acceleration_fd, IndirectCase};
use crate::fem::assembly::{assemble_mass, gp_force_maps, reference_geometry};
use crate::fem::mesh::{BCs, ElementKind, Mesh};
use crate::fem::quad::{gauss_quad, shape_bilinear};
use crate::linalg::{lstsq, Voigt};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Recovered stresses: per snapshot `s = 0..=n−2`, one Voigt stress per
/// Gauss point (snapshot 0 is identically zero — the rest state).
pub struct RecoveredStress {
    pub gp_sig: Vec<Vec<Voigt>>,
    /// Least-squares residual ‖P − (F − Mü)‖ per recovered snapshot.
    pub residuals: Vec<f64>,
}

/// Recovers per-Gauss-point stresses for every usable snapshot of a case.
pub fn stress_recovery(
    mesh: &Mesh,
    bcs: &BCs,
    case: &IndirectCase,
    dt: f64,
    finite: bool,
) -> Result<RecoveredStress> {
    if mesh.kind != ElementKind::Quad9 {
        return Err(Error::InvalidArgument("stress recovery needs quad9 meshes".into()));
    }
    mesh.validate()?;
    case.validate(mesh.ndof())?;
    let geom = reference_geometry(mesh)?;
    let mass = assemble_mass(mesh, &geom);
    let constrained = bcs.dirichlet_mask(mesh);
    let acc = acceleration_fd(&case.disp, dt)?;
    let n_snap = case.disp.len();
    let last = n_snap - 2;

    // Corner-node numbering: positions 0..4 of each element's connectivity.
    let mut corner_ids = BTreeMap::new();
    for e in 0..mesh.n_elems() {
        for &n in &mesh.elem_nodes(e)[..4] {
            let next = corner_ids.len();
            corner_ids.entry(n).or_insert(next);
        }
    }
    let n_corner = corner_ids.len();
    let n_unknowns = 3 * n_corner;
    let free_rows: Vec<usize> =
        (0..mesh.ndof()).filter(|&d| !constrained[d]).collect();
    if free_rows.len() < n_unknowns {
        return Err(Error::Solver(format!(
            "stress recovery underdetermined: {} equations for {} unknowns",
            free_rows.len(),
            n_unknowns
        )));
    }
    let row_of: Vec<Option<usize>> = {
        let mut v = vec![None; mesh.ndof()];
        for (r, &d) in free_rows.iter().enumerate() {
            v[d] = Some(r);
        }
        v
    };
    // Bilinear weights of each Gauss point (fixed 3×3 rule).
    let rule = gauss_quad(3)?;
    let nb: Vec<[f64; 4]> = rule.iter().map(|&(xi, eta, _)| shape_bilinear(xi, eta)).collect();

    // One least-squares solve per snapshot, embarrassingly parallel.
    let results: Result<Vec<(Vec<Voigt>, f64)>> = (1..=last)
        .into_par_iter()
        .map(|s| {
            let maps = gp_force_maps(mesh, &geom, &case.disp[s], finite);
            let mut a = DMatrix::zeros(free_rows.len(), n_unknowns);
            for e in 0..mesh.n_elems() {
                let corners = &mesh.elem_nodes(e)[..4];
                for g in 0..9 {
                    let map = &maps[e * 9 + g];
                    for (ci, &cn) in corners.iter().enumerate() {
                        let col0 = 3 * corner_ids[&cn];
                        let w = nb[g][ci];
                        for (i, &dof) in map.dofs.iter().enumerate() {
                            if let Some(r) = row_of[dof] {
                                for c in 0..3 {
                                    a[(r, col0 + c)] += w * map.g[i * 3 + c];
                                }
                            }
                        }
                    }
                }
            }
            let ma = mass.matvec(&acc[s]);
            let rhs_full: Vec<f64> =
                case.force[s].iter().zip(&ma).map(|(f, m)| f - m).collect();
            let b = DVector::from_iterator(
                free_rows.len(),
                free_rows.iter().map(|&d| rhs_full[d]),
            );
            let x = lstsq(&a, &b)?;
            let residual = (&a * &x - &b).norm();
            // Sample the bilinear field at the Gauss points.
            let mut sig = Vec::with_capacity(mesh.n_gauss());
            for e in 0..mesh.n_elems() {
                let corners = &mesh.elem_nodes(e)[..4];
                for g in 0..9 {
                    let mut v = Voigt::zeros(3);
                    for (ci, &cn) in corners.iter().enumerate() {
                        let col0 = 3 * corner_ids[&cn];
                        for c in 0..3 {
                            v.set(c, v.get(c) + nb[g][ci] * x[col0 + c]);
                        }
                    }
                    sig.push(v);
                }
            }
            Ok((sig, residual))
        })
        .collect();
    let results = results?;
    let mut gp_sig = vec![vec![Voigt::zeros(3); mesh.n_gauss()]];
    let mut residuals = vec![0.0];
    for (sig, r) in results {
        gp_sig.push(sig);
        residuals.push(r);
    }
    Ok(RecoveredStress { gp_sig, residuals })
}
