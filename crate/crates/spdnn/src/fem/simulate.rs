//! Forward dynamic simulation with either reference or learned constitutive
//! models, including divergence detection and full state recording.

use super::assembly::{
    assemble_body_force, assemble_internal, assemble_load_vector, assemble_mass,
    reference_geometry, strains_at_gauss,
};
use super::dynamics::{galpha_step, initial_acceleration, DynState, GAlphaParams, NewtonOpts};
use super::mesh::{BCs, ElementKind, LoadProtocol, Mesh};
use crate::linalg::{SmallMat, Voigt};
use crate::model::{Model, PointState};
use crate::reference::{RefMaterial, RefState};
use crate::{Error, Result};
use rayon::prelude::*;

/// A constitutive law driving one material id in a simulation.
#[derive(Clone, Debug)]
pub enum Material<'a> {
    Ref(&'a RefMaterial),
    Learned { model: &'a Model, theta: &'a [f64] },
}

/// Per-Gauss-point history for either material family.
#[derive(Clone, Copy, Debug)]
pub enum GpState {
    Ref(RefState),
    Point(PointState),
}

impl<'a> Material<'a> {
    pub fn dim(&self) -> usize {
        match self {
            Material::Ref(m) => m.dim(),
            Material::Learned { model, .. } => model.dim,
        }
    }

    pub fn init_state(&self) -> GpState {
        match self {
            Material::Ref(m) => GpState::Ref(m.init_state()),
            Material::Learned { model, .. } => GpState::Point(PointState::zero(model.dim)),
        }
    }

    /// Stress, tangent, and trial state at a new strain level.
    pub fn eval(
        &self,
        state: &GpState,
        eps_new: &Voigt,
        exact_tangent: bool,
    ) -> Result<(Voigt, SmallMat, GpState)> {
        match (self, state) {
            (Material::Ref(m), GpState::Ref(s)) => {
                let (sig, tan, new) = m.eval(s, eps_new)?;
                Ok((sig, tan, GpState::Ref(new)))
            }
            (Material::Learned { model, theta }, GpState::Point(s)) => {
                let sig = model.stress_update(theta, eps_new, s)?;
                let tan = model.consistent_tangent(theta, eps_new, s, exact_tangent)?;
                Ok((sig, tan, GpState::Point(PointState { eps: *eps_new, sig })))
            }
            _ => Err(Error::InvalidArgument("material/state kind mismatch".into())),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimOptions {
    pub dt: f64,
    pub n_steps: usize,
    pub galpha: GAlphaParams,
    pub newton: NewtonOpts,
    /// Use the full consistent tangent of learned models (`false` keeps the
    /// blended L Lᵀ approximation, at the cost of extra iterations).
    pub exact_tangent: bool,
    /// Green-Lagrange strain for quad9 elements (trusses are always
    /// geometrically nonlinear).
    pub finite_strain: bool,
    /// Displacement magnitude that counts as blow-up.
    pub blowup_disp: f64,
    /// Record per-Gauss-point strain/stress histories.
    pub record_gp: bool,
}

impl SimOptions {
    pub fn new(dt: f64, n_steps: usize) -> Self {
        SimOptions {
            dt,
            n_steps,
            galpha: GAlphaParams::default(),
            newton: NewtonOpts::default(),
            exact_tangent: true,
            finite_strain: false,
            blowup_disp: 1e3,
            record_gp: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimStatus {
    Completed,
    Diverged { step: usize, reason: String },
}

impl SimStatus {
    pub fn is_diverged(&self) -> bool {
        matches!(self, SimStatus::Diverged { .. })
    }
}

/// Full time history of a run. Index 0 is the initial state; snapshot `i`
/// corresponds to time `i·Δt`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub disp: Vec<Vec<f64>>,
    pub vel: Vec<Vec<f64>>,
    pub acc: Vec<Vec<f64>>,
    /// Per snapshot, per global Gauss point (empty when not recorded).
    pub gp_eps: Vec<Vec<Voigt>>,
    pub gp_sig: Vec<Vec<Voigt>>,
    pub newton_iters: Vec<usize>,
    pub status: SimStatus,
}

impl Trajectory {
    pub fn n_snapshots(&self) -> usize {
        self.times.len()
    }

    pub fn disp_at(&self, step: usize, node: usize, dof: usize, ndim: usize) -> f64 {
        self.disp[step][node * ndim + dof]
    }
}

/// Runs a transient simulation. Divergence (Newton failure, NaN, blow-up) is
/// a recorded outcome in the returned trajectory, not an error; hard errors
/// are reserved for invalid configurations.
pub fn simulate(
    mesh: &Mesh,
    bcs: &BCs,
    protocol: &LoadProtocol,
    materials: &[Material],
    opts: &SimOptions,
) -> Result<Trajectory> {
    mesh.validate()?;
    bcs.validate(mesh)?;
    let expect_dim = match mesh.kind {
        ElementKind::Truss2 => 1,
        ElementKind::Quad9 => 3,
    };
    if mesh.mat_ids.iter().any(|&m| m >= materials.len()) {
        return Err(Error::Config("material table shorter than mesh material ids".into()));
    }
    for m in materials {
        if m.dim() != expect_dim {
            return Err(Error::Config("material dimension does not match element kind".into()));
        }
    }

    let geom = reference_geometry(mesh)?;
    let mass = assemble_mass(mesh, &geom);
    let f_spatial = assemble_load_vector(mesh, bcs)?;
    let f_body = assemble_body_force(mesh, &geom, bcs);
    let constrained = bcs.dirichlet_mask(mesh);
    let ndof = mesh.ndof();
    let n_gauss = mesh.n_gauss();
    let npg = mesh.gauss_per_elem();
    let gp_mat: Vec<usize> = (0..n_gauss).map(|g| mesh.mat_ids[g / npg]).collect();

    let mut committed: Vec<GpState> =
        (0..n_gauss).map(|g| materials[gp_mat[g]].init_state()).collect();

    // Initial state honoring Dirichlet values.
    let mut state = DynState::zeros(ndof);
    for d in &bcs.dirichlet {
        state.u[d.node * mesh.ndim() + d.dof] = d.value;
    }
    let f_at = |t: f64| -> Vec<f64> {
        let s = protocol.factor(t);
        f_spatial.iter().zip(&f_body).map(|(l, b)| s * l + b).collect()
    };

    // Material sweep at a trial displacement; deterministic order by index.
    let finite = opts.finite_strain;
    let sweep = |u: &[f64], committed: &[GpState]| -> Result<(Vec<Voigt>, Vec<Voigt>, Vec<SmallMat>, Vec<GpState>)> {
        let eps = strains_at_gauss(mesh, &geom, u, finite);
        let evals: Result<Vec<(Voigt, SmallMat, GpState)>> = (0..n_gauss)
            .into_par_iter()
            .map(|g| materials[gp_mat[g]].eval(&committed[g], &eps[g], opts.exact_tangent))
            .collect();
        let evals = evals?;
        let mut sig = Vec::with_capacity(n_gauss);
        let mut tan = Vec::with_capacity(n_gauss);
        let mut states = Vec::with_capacity(n_gauss);
        for (s, t, st) in evals {
            sig.push(s);
            tan.push(t);
            states.push(st);
        }
        Ok((eps, sig, tan, states))
    };

    // Consistent initial acceleration from the initial residual.
    let (eps0, sig0, _, _) = sweep(&state.u, &committed)?;
    let (p0, _) = assemble_internal(mesh, &geom, &state.u, &sig0, None, finite)?;
    state.a = initial_acceleration(&mass, &p0, &f_at(0.0), &constrained)?;

    let mut traj = Trajectory {
        times: vec![0.0],
        disp: vec![state.u.clone()],
        vel: vec![state.v.clone()],
        acc: vec![state.a.clone()],
        gp_eps: if opts.record_gp { vec![eps0] } else { vec![] },
        gp_sig: if opts.record_gp { vec![sig0] } else { vec![] },
        newton_iters: vec![0],
        status: SimStatus::Completed,
    };

    for step in 1..=opts.n_steps {
        let t_new = step as f64 * opts.dt;
        let t_eval = (1.0 - opts.galpha.alpha_f) * t_new
            + opts.galpha.alpha_f * (t_new - opts.dt);
        let f_ext = f_at(t_eval);
        // Scratch for the states/stresses at the last evaluated displacement.
        let mut last: Option<(Vec<Voigt>, Vec<Voigt>, Vec<GpState>)> = None;
        let result = galpha_step(
            &state,
            opts.dt,
            &opts.galpha,
            &opts.newton,
            &mass,
            &constrained,
            &f_ext,
            |u| {
                let (eps, sig, tan, states) = sweep(u, &committed)?;
                let (p, k) = assemble_internal(mesh, &geom, u, &sig, Some(&tan), finite)?;
                last = Some((eps, sig, states));
                Ok((p, k.unwrap()))
            },
        );
        match result {
            Ok((next, report)) => {
                let blewup = next.u.iter().any(|v| !v.is_finite() || v.abs() > opts.blowup_disp);
                if blewup {
                    traj.status = SimStatus::Diverged {
                        step,
                        reason: "displacement exceeded blow-up threshold".into(),
                    };
                    break;
                }
                let (eps, sig, states) = last.expect("converged step evaluated at least once");
                committed = states;
                state = next;
                traj.times.push(t_new);
                traj.disp.push(state.u.clone());
                traj.vel.push(state.v.clone());
                traj.acc.push(state.a.clone());
                if opts.record_gp {
                    traj.gp_eps.push(eps);
                    traj.gp_sig.push(sig);
                }
                traj.newton_iters.push(report.iterations);
            }
            Err(Error::StepDiverged(reason)) => {
                traj.status = SimStatus::Diverged { step, reason };
                break;
            }
            Err(Error::Solver(reason)) => {
                traj.status = SimStatus::Diverged { step, reason };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(traj)
}
