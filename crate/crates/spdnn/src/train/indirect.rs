//! Indirect (full-field) training loss with exact reverse-mode gradients
//! through the stress recurrence.
//!
//! The loss is `Σ_j Σ_{i=2}^{n−1} ‖M ü_j^i + P(u_j^i, σ_j^i(θ)) − F_j^i‖²`
//! where the stress recursion feeds the PREDICTED previous stress back into
//! the model. The backward sweep runs the time chain in reverse, combining
//! the assembly adjoints `∂P/∂σ` with the model's stress-update adjoints.

use super::data::{acceleration_fd, IndirectCase};
use crate::fem::assembly::{gp_force_maps, reference_geometry, strains_at_gauss, GpForceMap};
use crate::fem::mesh::{BCs, Mesh};
use crate::fem::assembly::assemble_mass;
use crate::linalg::Voigt;
use crate::model::{Model, PointState};
use crate::{Error, Result};
use rayon::prelude::*;

/// Everything about one case that does not depend on θ: strains from the
/// measured displacements, per-step stress-to-force maps, and the residual
/// offsets `F − M ü` restricted to free dofs.
struct CaseCtx {
    label: String,
    /// `[snapshot][gauss point]`, snapshots 0..=last usable.
    eps: Vec<Vec<Voigt>>,
    /// Force maps per usable snapshot (indexed `s − 1`).
    maps: Vec<Vec<GpForceMap>>,
    /// `F_s − M ü_s` per usable snapshot (free dofs; constrained entries 0).
    rhs: Vec<Vec<f64>>,
}

/// Precomputed context for the indirect loss over a set of cases.
pub struct IndirectContext {
    cases: Vec<CaseCtx>,
    n_gauss: usize,
    dim: usize,
    /// Dirichlet dofs are excluded from the residual (their equations carry
    /// unknown reactions).
    constrained: Vec<bool>,
}

impl IndirectContext {
    /// Builds the θ-independent part of the loss. `finite` selects the
    /// strain measure used to interpret the measured displacements.
    pub fn build(
        mesh: &Mesh,
        bcs: &BCs,
        cases: &[IndirectCase],
        dt: f64,
        finite: bool,
    ) -> Result<Self> {
        mesh.validate()?;
        bcs.validate(mesh)?;
        if cases.is_empty() {
            return Err(Error::Data("indirect training needs at least one case".into()));
        }
        let geom = reference_geometry(mesh)?;
        let mass = assemble_mass(mesh, &geom);
        let constrained = bcs.dirichlet_mask(mesh);
        let dim = match mesh.kind {
            crate::fem::mesh::ElementKind::Truss2 => 1,
            crate::fem::mesh::ElementKind::Quad9 => 3,
        };
        let mut out = Vec::with_capacity(cases.len());
        for case in cases {
            case.validate(mesh.ndof())?;
            let n_snap = case.disp.len();
            // Usable residual snapshots: 1..=n_snap−2 (0-based).
            let last = n_snap - 2;
            let acc = acceleration_fd(&case.disp, dt)?;
            let mut eps = Vec::with_capacity(last + 1);
            let mut maps = Vec::with_capacity(last);
            let mut rhs = Vec::with_capacity(last);
            for s in 0..=last {
                eps.push(strains_at_gauss(mesh, &geom, &case.disp[s], finite));
                if s >= 1 {
                    maps.push(gp_force_maps(mesh, &geom, &case.disp[s], finite));
                    let ma = mass.matvec(&acc[s]);
                    let mut r: Vec<f64> = case.force[s]
                        .iter()
                        .zip(&ma)
                        .map(|(f, m)| f - m)
                        .collect();
                    for (v, &c) in r.iter_mut().zip(&constrained) {
                        if c {
                            *v = 0.0;
                        }
                    }
                    rhs.push(r);
                }
            }
            out.push(CaseCtx { label: case.case.clone(), eps, maps, rhs });
        }
        Ok(IndirectContext { cases: out, n_gauss: mesh.n_gauss(), dim, constrained })
    }

    pub fn n_cases(&self) -> usize {
        self.cases.len()
    }
}

/// Loss and exact gradient. With `recurrent = false` the adjoint flow into
/// the previous stress is cut (the forward pass is unchanged); this is only
/// useful to quantify how much the through-time term matters.
pub fn indirect_loss_opt(
    model: &Model,
    theta: &[f64],
    ctx: &IndirectContext,
    recurrent: bool,
) -> Result<(f64, Vec<f64>)> {
    if model.dim != ctx.dim {
        return Err(Error::Data("model dimension does not match context".into()));
    }
    let n_gauss = ctx.n_gauss;
    // Parallel over cases, ordered reduction.
    let partials: Result<Vec<(f64, Vec<f64>)>> = ctx
        .cases
        .par_iter()
        .map(|case| {
            let n_use = case.rhs.len();
            let mut grad = vec![0.0; model.param_count()];
            // Forward sweep: predicted stresses per snapshot.
            let mut sig: Vec<Vec<Voigt>> = Vec::with_capacity(n_use + 1);
            sig.push(vec![Voigt::zeros(model.dim); n_gauss]);
            let mut loss = 0.0;
            let mut residuals: Vec<Vec<f64>> = Vec::with_capacity(n_use);
            for s in 1..=n_use {
                let prev = &sig[s - 1];
                let cur: Result<Vec<Voigt>> = (0..n_gauss)
                    .map(|g| {
                        let state = PointState { eps: case.eps[s - 1][g], sig: prev[g] };
                        model.stress_update(theta, &case.eps[s][g], &state)
                    })
                    .collect();
                let cur = cur?;
                // r_s = P(u_s, σ_s) − (F_s − M ü_s), free dofs only.
                let mut r: Vec<f64> = case.rhs[s - 1].iter().map(|v| -v).collect();
                for (g, map) in case.maps[s - 1].iter().enumerate() {
                    map.apply(&cur[g], &mut r);
                }
                for (v, &c) in r.iter_mut().zip(&ctx.constrained) {
                    if c {
                        *v = 0.0;
                    }
                }
                let step_loss: f64 = r.iter().map(|v| v * v).sum();
                if !step_loss.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite indirect loss in case {} at snapshot {s}",
                        case.label
                    )));
                }
                loss += step_loss;
                residuals.push(r);
                sig.push(cur);
            }
            // Backward sweep over the recurrence.
            let mut sig_bar = vec![Voigt::zeros(model.dim); n_gauss];
            for s in (1..=n_use).rev() {
                let r = &residuals[s - 1];
                for (g, map) in case.maps[s - 1].iter().enumerate() {
                    let adj = map.adjoint(r);
                    sig_bar[g] = sig_bar[g].add_scaled(2.0, &adj);
                }
                let prev = &sig[s - 1];
                let next_bar: Result<Vec<Voigt>> = (0..n_gauss)
                    .map(|g| {
                        let state = PointState { eps: case.eps[s - 1][g], sig: prev[g] };
                        let mut gtheta = vec![0.0; model.param_count()];
                        let v = model.stress_update_vjp(
                            theta,
                            &case.eps[s][g],
                            &state,
                            &sig_bar[g],
                            &mut gtheta,
                        )?;
                        for (a, b) in grad.iter_mut().zip(gtheta) {
                            *a += b;
                        }
                        Ok(if recurrent { v.grad_sig_prev } else { Voigt::zeros(model.dim) })
                    })
                    .collect();
                sig_bar = next_bar?;
            }
            Ok((loss, grad))
        })
        .collect();
    let partials = partials?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.param_count()];
    for (l, g) in partials {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    Ok((loss, grad))
}

/// Standard entry point: full backpropagation through time.
pub fn indirect_loss(
    model: &Model,
    theta: &[f64],
    ctx: &IndirectContext,
) -> Result<(f64, Vec<f64>)> {
    indirect_loss_opt(model, theta, ctx, true)
}
