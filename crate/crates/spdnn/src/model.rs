//! Constitutive models with SPD tangent structure, plus direct-output
//! baselines, with stress updates, consistent tangents, and reverse-mode
//! derivatives for training.
//!
//! All variants share the incremental interface
//! `σ_new = update(ε_new, ε_prev, σ_prev)`:
//!
//! - linear elastic: `σ = C ε_new` with `C = s·L Lᵀ` parameterized by the
//!   packed Cholesky entries themselves;
//! - spd-elastic: `σ = L(ε_new) L(ε_new)ᵀ (ε_new − ε_prev) + σ_prev`;
//! - spd-elasto-plastic: a smooth blend of a fixed linear-elastic branch and
//!   a network branch, weighted by a sigmoid transition in the previous
//!   equivalent stress;
//! - `sigma-nn` / `delta-sigma-nn`: networks that output the stress or the
//!   stress increment directly (no SPD structure, no time consistency).
//!
//! Network inputs are scaled by `(ε_ref, σ_ref)` and Cholesky outputs carry
//! `sqrt(σ_ref/ε_ref)` per entry, so the assembled tangent carries
//! `σ_ref/ε_ref` and all network quantities stay O(1).

use crate::linalg::{chol_assemble, CholLayout, LowerTri, SmallMat, Voigt};
use crate::net::{self, NetSpec};
use crate::{Error, Result};
use std::cell::RefCell;

/// Strain/stress references used to nondimensionalize network inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingSpec {
    pub eps_ref: f64,
    pub sig_ref: f64,
}

impl ScalingSpec {
    pub fn identity() -> Self {
        ScalingSpec { eps_ref: 1.0, sig_ref: 1.0 }
    }

    /// Tangent scale `σ_ref/ε_ref`.
    pub fn stiffness(&self) -> f64 {
        self.sig_ref / self.eps_ref
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_ref.is_finite() && self.eps_ref > 0.0)
            || !(self.sig_ref.is_finite() && self.sig_ref > 0.0)
        {
            return Err(Error::Config("scaling references must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Equivalent-stress measure driving the elastic/plastic transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqStressKind {
    /// 1D: |σ|.
    Abs,
    /// Plane stress von Mises.
    VonMisesPlane,
}

impl EqStressKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "abs" => Ok(EqStressKind::Abs),
            "von-mises" => Ok(EqStressKind::VonMisesPlane),
            other => Err(Error::Config(format!("unknown equivalent stress `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EqStressKind::Abs => "abs",
            EqStressKind::VonMisesPlane => "von-mises",
        }
    }
}

/// Equivalent stress: `|σ|` in 1D, `sqrt(σ₁₁² − σ₁₁σ₂₂ + σ₂₂² + 3σ₁₂²)` in
/// plane stress.
pub fn equivalent_stress(sig: &Voigt, kind: EqStressKind) -> f64 {
    equivalent_stress_sq(sig, kind).sqrt()
}

fn equivalent_stress_sq(sig: &Voigt, kind: EqStressKind) -> f64 {
    match kind {
        EqStressKind::Abs => sig.get(0) * sig.get(0),
        EqStressKind::VonMisesPlane => {
            let (a, b, c) = (sig.get(0), sig.get(1), sig.get(2));
            a * a - a * b + b * b + 3.0 * c * c
        }
    }
}

/// Gradient of the squared equivalent stress with respect to σ.
fn equivalent_stress_sq_grad(sig: &Voigt, kind: EqStressKind) -> Voigt {
    match kind {
        EqStressKind::Abs => Voigt::scalar(2.0 * sig.get(0)),
        EqStressKind::VonMisesPlane => {
            let (a, b, c) = (sig.get(0), sig.get(1), sig.get(2));
            Voigt::plane(2.0 * a - b, 2.0 * b - a, 6.0 * c)
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Smooth elastic→plastic transition weight
/// `sigmoid((σ_eq² − σ̃_Y²)/(d σ̃_Y²))`, monotone in the equivalent stress.
pub fn transition(sig_eq: f64, sigy_est: f64, d: f64) -> f64 {
    transition_from_sq(sig_eq * sig_eq, sigy_est, d)
}

fn transition_from_sq(eq_sq: f64, sigy_est: f64, d: f64) -> f64 {
    sigmoid((eq_sq - sigy_est * sigy_est) / (d * sigy_est * sigy_est))
}

/// One step of material history: strain and stress at the previous step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointState {
    pub eps: Voigt,
    pub sig: Voigt,
}

impl PointState {
    pub fn zero(dim: usize) -> Self {
        PointState { eps: Voigt::zeros(dim), sig: Voigt::zeros(dim) }
    }
}

/// Configuration of the blended elasto-plastic variant.
#[derive(Clone, Debug, PartialEq)]
pub struct PlasticCfg {
    /// Estimated yield strength (should underestimate the true one).
    pub sigy_est: f64,
    /// Transition sharpness.
    pub d: f64,
    pub eq_kind: EqStressKind,
    /// Packed Cholesky entries of the fixed linear branch, in tangent-scale
    /// units: `C = (σ_ref/ε_ref)·L Lᵀ`.
    pub lin_chol: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    LinearElastic,
    SpdElastic,
    SpdElastoPlastic(PlasticCfg),
    SigmaNn,
    DeltaSigmaNn,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::LinearElastic => "linear",
            ModelKind::SpdElastic => "spd",
            ModelKind::SpdElastoPlastic(_) => "spd-ep",
            ModelKind::SigmaNn => "sigma",
            ModelKind::DeltaSigmaNn => "dsigma",
        }
    }
}

/// A constitutive model: kind, dimensions, optional network architecture,
/// and input/output scaling. Trainable parameters are carried separately as
/// a flat vector.
#[derive(Clone, Debug)]
pub struct Model {
    pub kind: ModelKind,
    pub dim: usize,
    pub layout: CholLayout,
    pub net: Option<NetSpec>,
    pub scaling: ScalingSpec,
}

thread_local! {
    static NET_CACHE: RefCell<net::Cache> = RefCell::new(net::Cache::default());
}

impl Model {
    pub fn new(
        kind: ModelKind,
        dim: usize,
        layout: CholLayout,
        net: Option<NetSpec>,
        scaling: ScalingSpec,
    ) -> Result<Self> {
        let m = Model { kind, dim, layout, net, scaling };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 3 {
            return Err(Error::Config("model dim must be 1 or 3".into()));
        }
        if self.layout.dim() != self.dim {
            return Err(Error::Config("Cholesky layout does not match model dim".into()));
        }
        self.scaling.validate()?;
        let expect_in = match self.kind {
            ModelKind::LinearElastic => None,
            ModelKind::SpdElastic => Some(self.dim),
            _ => Some(3 * self.dim),
        };
        let expect_out = match self.kind {
            ModelKind::LinearElastic => None,
            ModelKind::SpdElastic | ModelKind::SpdElastoPlastic(_) => {
                Some(self.layout.entry_count())
            }
            ModelKind::SigmaNn | ModelKind::DeltaSigmaNn => Some(self.dim),
        };
        match (&self.net, expect_in) {
            (Some(spec), Some(nin)) => {
                if spec.input_dim() != nin {
                    return Err(Error::Config(format!(
                        "model kind {} needs input width {nin}, net has {}",
                        self.kind.name(),
                        spec.input_dim()
                    )));
                }
                if spec.output_dim() != expect_out.unwrap() {
                    return Err(Error::Config(format!(
                        "model kind {} needs output width {}, net has {}",
                        self.kind.name(),
                        expect_out.unwrap(),
                        spec.output_dim()
                    )));
                }
            }
            (None, None) => {}
            (Some(_), None) => {
                return Err(Error::Config("linear-elastic model takes no network".into()))
            }
            (None, Some(_)) => {
                return Err(Error::Config(format!(
                    "model kind {} requires a network spec",
                    self.kind.name()
                )))
            }
        }
        if let ModelKind::SpdElastoPlastic(cfg) = &self.kind {
            if !(cfg.sigy_est > 0.0) || !(cfg.d > 0.0) {
                return Err(Error::Config("transition needs σ̃_Y > 0 and d > 0".into()));
            }
            if cfg.lin_chol.len() != self.layout.entry_count() {
                return Err(Error::Config(format!(
                    "linear branch needs {} Cholesky entries, got {}",
                    self.layout.entry_count(),
                    cfg.lin_chol.len()
                )));
            }
            let expect_eq =
                if self.dim == 1 { EqStressKind::Abs } else { EqStressKind::VonMisesPlane };
            if cfg.eq_kind != expect_eq {
                return Err(Error::Config(
                    "equivalent-stress kind does not match model dim".into(),
                ));
            }
        }
        Ok(())
    }

    /// Number of trainable parameters.
    pub fn param_count(&self) -> usize {
        match &self.net {
            Some(spec) => spec.param_count(),
            None => self.layout.entry_count(),
        }
    }

    /// Fresh parameter vector: Xavier-initialized network weights, or an
    /// identity-scaled factor for the linear model.
    pub fn init_theta(&self, seed: u64) -> Vec<f64> {
        match &self.net {
            Some(spec) => {
                let mut s = spec.clone();
                s.seed = seed;
                net::init_params(&s)
            }
            None => {
                let mut theta = vec![0.0; self.layout.entry_count()];
                for (k, &(i, j)) in self.layout.positions().iter().enumerate() {
                    theta[k] = if i == j { 1.0 } else { 0.0 };
                }
                theta
            }
        }
    }

    fn check_update_args(&self, theta: &[f64], eps_new: &Voigt, state: &PointState) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::InvalidArgument(format!(
                "theta has length {}, model needs {}",
                theta.len(),
                self.param_count()
            )));
        }
        if eps_new.dim() != self.dim || state.eps.dim() != self.dim || state.sig.dim() != self.dim {
            return Err(Error::InvalidArgument("strain/stress dimension mismatch".into()));
        }
        Ok(())
    }

    /// Network input vector for the current step, in scaled units.
    fn net_input(&self, eps_new: &Voigt, state: &PointState) -> Vec<f64> {
        let e = self.scaling.eps_ref;
        let s = self.scaling.sig_ref;
        match self.kind {
            ModelKind::SpdElastic => eps_new.as_slice().iter().map(|x| x / e).collect(),
            _ => {
                let mut x = Vec::with_capacity(3 * self.dim);
                x.extend(eps_new.as_slice().iter().map(|v| v / e));
                x.extend(state.eps.as_slice().iter().map(|v| v / e));
                x.extend(state.sig.as_slice().iter().map(|v| v / s));
                x
            }
        }
    }

    /// The Cholesky factor (in scaled units) predicted for this step, when
    /// the model has one. Used by SPD property sweeps.
    pub fn cholesky_factor(
        &self,
        theta: &[f64],
        eps_new: &Voigt,
        state: &PointState,
    ) -> Result<Option<LowerTri>> {
        self.check_update_args(theta, eps_new, state)?;
        match &self.kind {
            ModelKind::LinearElastic => Ok(Some(chol_assemble(theta, self.layout)?)),
            ModelKind::SpdElastic | ModelKind::SpdElastoPlastic(_) => {
                let x = self.net_input(eps_new, state);
                let spec = self.net.as_ref().unwrap();
                let y = net::forward(spec, theta, &x)?;
                Ok(Some(chol_assemble(&y, self.layout)?))
            }
            _ => Ok(None),
        }
    }

    /// Advances the stress one step.
    pub fn stress_update(&self, theta: &[f64], eps_new: &Voigt, state: &PointState) -> Result<Voigt> {
        self.check_update_args(theta, eps_new, state)?;
        let stiff = self.scaling.stiffness();
        match &self.kind {
            ModelKind::LinearElastic => {
                let l = chol_assemble(theta, self.layout)?;
                Ok(l.spd_apply(eps_new)?.scale(stiff))
            }
            ModelKind::SpdElastic => {
                let spec = self.net.as_ref().unwrap();
                let x = self.net_input(eps_new, state);
                let deps = eps_new.sub(&state.eps);
                NET_CACHE.with(|c| {
                    let mut cache = c.borrow_mut();
                    let y = net::forward_cached(spec, theta, &x, &mut cache)?;
                    let l = chol_assemble(y, self.layout)?;
                    Ok(state.sig.add(&l.spd_apply(&deps)?.scale(stiff)))
                })
            }
            ModelKind::SpdElastoPlastic(cfg) => {
                let spec = self.net.as_ref().unwrap();
                let deps = eps_new.sub(&state.eps);
                let l_lin = chol_assemble(&cfg.lin_chol, self.layout)?;
                let sig_el = state.sig.add(&l_lin.spd_apply(&deps)?.scale(stiff));
                let x = self.net_input(eps_new, state);
                let sig_pl = NET_CACHE.with(|c| -> Result<Voigt> {
                    let mut cache = c.borrow_mut();
                    let y = net::forward_cached(spec, theta, &x, &mut cache)?;
                    let l = chol_assemble(y, self.layout)?;
                    Ok(state.sig.add(&l.spd_apply(&deps)?.scale(stiff)))
                })?;
                let q2 = equivalent_stress_sq(&state.sig, cfg.eq_kind);
                let dw = transition_from_sq(q2, cfg.sigy_est, cfg.d);
                // σ_el + D (σ_pl − σ_el): exact at Δε = 0 and a componentwise
                // convex combination for D ∈ (0, 1).
                Ok(sig_el.add_scaled(dw, &sig_pl.sub(&sig_el)))
            }
            ModelKind::SigmaNn => {
                let spec = self.net.as_ref().unwrap();
                let x = self.net_input(eps_new, state);
                let y = net::forward(spec, theta, &x)?;
                Ok(Voigt::from_slice(&y).scale(self.scaling.sig_ref))
            }
            ModelKind::DeltaSigmaNn => {
                let spec = self.net.as_ref().unwrap();
                let x = self.net_input(eps_new, state);
                let y = net::forward(spec, theta, &x)?;
                Ok(state.sig.add(&Voigt::from_slice(&y).scale(self.scaling.sig_ref)))
            }
        }
    }

    /// Full derivative `dσ_new/dε_new`. With `exact = false` the
    /// strain-dependence of the factor is dropped and only the blended
    /// `L Lᵀ` terms remain.
    pub fn consistent_tangent(
        &self,
        theta: &[f64],
        eps_new: &Voigt,
        state: &PointState,
        exact: bool,
    ) -> Result<SmallMat> {
        self.check_update_args(theta, eps_new, state)?;
        let stiff = self.scaling.stiffness();
        match &self.kind {
            ModelKind::LinearElastic => {
                let l = chol_assemble(theta, self.layout)?;
                Ok(l.gram().scale(stiff))
            }
            ModelKind::SpdElastic => {
                let spec = self.net.as_ref().unwrap();
                let x = self.net_input(eps_new, state);
                let deps = eps_new.sub(&state.eps);
                let (l, jac) = NET_CACHE.with(|c| -> Result<(LowerTri, Vec<f64>)> {
                    let mut cache = c.borrow_mut();
                    let y = net::forward_cached(spec, theta, &x, &mut cache)?.to_vec();
                    let mut jac = vec![0.0; spec.input_dim() * spec.output_dim()];
                    if exact {
                        net::jac_input_cached(spec, theta, &mut cache, &mut jac)?;
                    }
                    Ok((chol_assemble(&y, self.layout)?, jac))
                })?;
                let mut tan = l.gram().scale(stiff);
                if exact {
                    self.add_factor_strain_term(&mut tan, &l, &jac, &deps, 0, stiff);
                }
                Ok(tan)
            }
            ModelKind::SpdElastoPlastic(cfg) => {
                let spec = self.net.as_ref().unwrap();
                let x = self.net_input(eps_new, state);
                let deps = eps_new.sub(&state.eps);
                let l_lin = chol_assemble(&cfg.lin_chol, self.layout)?;
                let (l, jac) = NET_CACHE.with(|c| -> Result<(LowerTri, Vec<f64>)> {
                    let mut cache = c.borrow_mut();
                    let y = net::forward_cached(spec, theta, &x, &mut cache)?.to_vec();
                    let mut jac = vec![0.0; spec.input_dim() * spec.output_dim()];
                    if exact {
                        net::jac_input_cached(spec, theta, &mut cache, &mut jac)?;
                    }
                    Ok((chol_assemble(&y, self.layout)?, jac))
                })?;
                let q2 = equivalent_stress_sq(&state.sig, cfg.eq_kind);
                let dw = transition_from_sq(q2, cfg.sigy_est, cfg.d);
                let mut tan_pl = l.gram().scale(stiff);
                if exact {
                    // Only the ε_new block of the network input varies.
                    self.add_factor_strain_term(&mut tan_pl, &l, &jac, &deps, 0, stiff);
                }
                let tan_el = l_lin.gram().scale(stiff);
                Ok(tan_el.add(&tan_pl.sub(&tan_el).scale(dw)))
            }
            ModelKind::SigmaNn | ModelKind::DeltaSigmaNn => {
                let spec = self.net.as_ref().unwrap();
                let x = self.net_input(eps_new, state);
                let jac = net::jac_input(spec, theta, &x)?;
                let nin = spec.input_dim();
                let mut tan = SmallMat::zeros(self.dim);
                let scale = self.scaling.sig_ref / self.scaling.eps_ref;
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        tan.set(i, j, scale * jac[i * nin + j]);
                    }
                }
                Ok(tan)
            }
        }
    }

    /// Adds `s · Σ_k (∂(L Lᵀ)/∂x_k Δε) eₖᵀ / ε_ref` over the strain block of
    /// the network input — the product-rule term of the consistent tangent.
    fn add_factor_strain_term(
        &self,
        tan: &mut SmallMat,
        l: &LowerTri,
        jac: &[f64],
        deps: &Voigt,
        block: usize,
        stiff: f64,
    ) {
        let spec = self.net.as_ref().unwrap();
        let nin = spec.input_dim();
        let ld = l.to_dense();
        let positions = self.layout.positions();
        for k in 0..self.dim {
            // dL for input component block+k
            let mut dl = SmallMat::zeros(self.dim);
            for (row, &(i, j)) in positions.iter().enumerate() {
                dl.set(i, j, jac[row * nin + block + k]);
            }
            // dH = dL Lᵀ + L dLᵀ; column k of the extra term is stiff/ε_ref · dH Δε
            for i in 0..self.dim {
                let mut v = 0.0;
                for j in 0..self.dim {
                    let mut dh = 0.0;
                    for m in 0..self.dim {
                        dh += dl.get(i, m) * ld.get(j, m) + ld.get(i, m) * dl.get(j, m);
                    }
                    v += dh * deps.get(j);
                }
                tan.add_to(i, k, stiff * v / self.scaling.eps_ref);
            }
        }
    }

    /// Exact adjoints of `stress_update` in all four arguments. Parameter
    /// gradients accumulate into `grad_theta`; the returned struct carries
    /// the strain/stress adjoints.
    pub fn stress_update_vjp(
        &self,
        theta: &[f64],
        eps_new: &Voigt,
        state: &PointState,
        sig_bar: &Voigt,
        grad_theta: &mut [f64],
    ) -> Result<UpdateVjp> {
        self.check_update_args(theta, eps_new, state)?;
        if sig_bar.dim() != self.dim {
            return Err(Error::InvalidArgument("cotangent dimension mismatch".into()));
        }
        if grad_theta.len() != self.param_count() {
            return Err(Error::InvalidArgument("grad_theta length mismatch".into()));
        }
        let stiff = self.scaling.stiffness();
        let dim = self.dim;
        match &self.kind {
            ModelKind::LinearElastic => {
                // σ = s·L Lᵀ ε_new
                let l = chol_assemble(theta, self.layout)?;
                let h = l.gram().scale(stiff);
                let grad_eps_new = h.matvec(sig_bar);
                self.accumulate_factor_grad(&l, sig_bar, eps_new, stiff, grad_theta);
                Ok(UpdateVjp {
                    grad_eps_new,
                    grad_eps_prev: Voigt::zeros(dim),
                    grad_sig_prev: Voigt::zeros(dim),
                })
            }
            ModelKind::SpdElastic => {
                let spec = self.net.as_ref().unwrap();
                let x = self.net_input(eps_new, state);
                let deps = eps_new.sub(&state.eps);
                let mut xbar = vec![0.0; x.len()];
                let l = NET_CACHE.with(|c| -> Result<LowerTri> {
                    let mut cache = c.borrow_mut();
                    let y = net::forward_cached(spec, theta, &x, &mut cache)?.to_vec();
                    let l = chol_assemble(&y, self.layout)?;
                    let ybar = self.factor_cotangent(&l, sig_bar, &deps, stiff);
                    net::vjp_cached(spec, theta, &cache, &ybar, grad_theta, &mut xbar)?;
                    Ok(l)
                })?;
                let h = l.gram().scale(stiff);
                let hbar = h.matvec(sig_bar);
                let mut grad_eps_new = hbar;
                let grad_eps_prev = hbar.scale(-1.0);
                for k in 0..dim {
                    grad_eps_new.set(k, grad_eps_new.get(k) + xbar[k] / self.scaling.eps_ref);
                }
                Ok(UpdateVjp { grad_eps_new, grad_eps_prev, grad_sig_prev: *sig_bar })
            }
            ModelKind::SpdElastoPlastic(cfg) => {
                let spec = self.net.as_ref().unwrap();
                let deps = eps_new.sub(&state.eps);
                let l_lin = chol_assemble(&cfg.lin_chol, self.layout)?;
                let c_el = l_lin.gram().scale(stiff);
                let sig_el = state.sig.add(&c_el.matvec(&deps));
                let x = self.net_input(eps_new, state);
                let q2 = equivalent_stress_sq(&state.sig, cfg.eq_kind);
                let dw = transition_from_sq(q2, cfg.sigy_est, cfg.d);
                let sig_bar_pl = sig_bar.scale(dw);
                let sig_bar_el = sig_bar.scale(1.0 - dw);

                let mut xbar = vec![0.0; x.len()];
                let (l_pl, sig_pl) = NET_CACHE.with(|c| -> Result<(LowerTri, Voigt)> {
                    let mut cache = c.borrow_mut();
                    let y = net::forward_cached(spec, theta, &x, &mut cache)?.to_vec();
                    let l = chol_assemble(&y, self.layout)?;
                    let sig_pl = state.sig.add(&l.spd_apply(&deps)?.scale(stiff));
                    let ybar = self.factor_cotangent(&l, &sig_bar_pl, &deps, stiff);
                    net::vjp_cached(spec, theta, &cache, &ybar, grad_theta, &mut xbar)?;
                    Ok((l, sig_pl))
                })?;

                let h_pl = l_pl.gram().scale(stiff);
                let hp = h_pl.matvec(&sig_bar_pl);
                let he = c_el.matvec(&sig_bar_el);
                let mut grad_eps_new = hp.add(&he);
                let mut grad_eps_prev = hp.add(&he).scale(-1.0);
                let mut grad_sig_prev = *sig_bar;
                for k in 0..dim {
                    grad_eps_new.set(k, grad_eps_new.get(k) + xbar[k] / self.scaling.eps_ref);
                    grad_eps_prev
                        .set(k, grad_eps_prev.get(k) + xbar[dim + k] / self.scaling.eps_ref);
                    grad_sig_prev
                        .set(k, grad_sig_prev.get(k) + xbar[2 * dim + k] / self.scaling.sig_ref);
                }
                // Transition weight depends on σ_prev through the equivalent stress.
                let dbar = sig_bar.dot(&sig_pl.sub(&sig_el));
                let dd_dq2 = dw * (1.0 - dw) / (cfg.d * cfg.sigy_est * cfg.sigy_est);
                let q2_grad = equivalent_stress_sq_grad(&state.sig, cfg.eq_kind);
                grad_sig_prev = grad_sig_prev.add_scaled(dbar * dd_dq2, &q2_grad);
                Ok(UpdateVjp { grad_eps_new, grad_eps_prev, grad_sig_prev })
            }
            ModelKind::SigmaNn | ModelKind::DeltaSigmaNn => {
                let spec = self.net.as_ref().unwrap();
                let x = self.net_input(eps_new, state);
                let ybar: Vec<f64> =
                    sig_bar.as_slice().iter().map(|v| v * self.scaling.sig_ref).collect();
                let mut xbar = vec![0.0; x.len()];
                NET_CACHE.with(|c| -> Result<()> {
                    let mut cache = c.borrow_mut();
                    net::forward_cached(spec, theta, &x, &mut cache)?;
                    net::vjp_cached(spec, theta, &cache, &ybar, grad_theta, &mut xbar)?;
                    Ok(())
                })?;
                let mut grad_eps_new = Voigt::zeros(dim);
                let mut grad_eps_prev = Voigt::zeros(dim);
                let mut grad_sig_prev = if matches!(self.kind, ModelKind::DeltaSigmaNn) {
                    *sig_bar
                } else {
                    Voigt::zeros(dim)
                };
                for k in 0..dim {
                    grad_eps_new.set(k, xbar[k] / self.scaling.eps_ref);
                    grad_eps_prev.set(k, xbar[dim + k] / self.scaling.eps_ref);
                    grad_sig_prev
                        .set(k, grad_sig_prev.get(k) + xbar[2 * dim + k] / self.scaling.sig_ref);
                }
                Ok(UpdateVjp { grad_eps_new, grad_eps_prev, grad_sig_prev })
            }
        }
    }

    /// Cotangent on the packed factor entries for `σ̄` through
    /// `σ = s·L Lᵀ v`: `L̄ = s(σ̄ vᵀ + v σ̄ᵀ) L`, masked to the layout.
    fn factor_cotangent(&self, l: &LowerTri, sig_bar: &Voigt, v: &Voigt, stiff: f64) -> Vec<f64> {
        let d = self.dim;
        let ld = l.to_dense();
        let mut out = vec![0.0; self.layout.entry_count()];
        for (k, &(i, j)) in self.layout.positions().iter().enumerate() {
            let mut acc = 0.0;
            for m in 0..d {
                acc += (sig_bar.get(i) * v.get(m) + v.get(i) * sig_bar.get(m)) * ld.get(m, j);
            }
            out[k] = stiff * acc;
        }
        out
    }

    fn accumulate_factor_grad(
        &self,
        l: &LowerTri,
        sig_bar: &Voigt,
        eps: &Voigt,
        stiff: f64,
        grad_theta: &mut [f64],
    ) {
        let g = self.factor_cotangent(l, sig_bar, eps, stiff);
        for (gt, gi) in grad_theta.iter_mut().zip(g) {
            *gt += gi;
        }
    }
}

/// Adjoints of one stress update with respect to its vector arguments.
#[derive(Clone, Copy, Debug)]
pub struct UpdateVjp {
    pub grad_eps_new: Voigt,
    pub grad_eps_prev: Voigt,
    pub grad_sig_prev: Voigt,
}
