//! Ground-truth constitutive laws used to generate training/test data and to
//! serve as oracles: linear elasticity, 1D and plane-stress von Mises
//! elasto-plasticity with linear isotropic hardening, and incompressible
//! Rivlin-Saunders hyperelasticity under plane stress.

use crate::linalg::{SmallMat, Voigt};
use crate::model::{equivalent_stress, EqStressKind};
use crate::{Error, Result};

/// Elasto-plastic parameters: `f = σ_eq − σ_Y − K α`, flow rule `α̇ = λ̇`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EPParams {
    pub e: f64,
    pub nu: f64,
    pub sig_y: f64,
    pub k: f64,
}

impl EPParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e > 0.0)
            || !(self.nu >= 0.0 && self.nu < 0.5)
            || !(self.sig_y > 0.0)
            || self.k < 0.0
        {
            return Err(Error::InvalidArgument(
                "need E>0, 0<=nu<0.5, sig_y>0, K>=0 for elasto-plastic parameters".into(),
            ));
        }
        Ok(())
    }
}

/// Plastic strain and hardening variable; `alpha` never decreases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EPState {
    pub eps_p: Voigt,
    pub alpha: f64,
}

impl EPState {
    pub fn zero(dim: usize) -> Self {
        EPState { eps_p: Voigt::zeros(dim), alpha: 0.0 }
    }
}

/// Rivlin-Saunders coefficients of `w = c₁(I₁−3) + c₂(I₂−3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperParams {
    pub c1: f64,
    pub c2: f64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0) || self.c2 < 0.0 {
            return Err(Error::InvalidArgument("need c1>0 and c2>=0".into()));
        }
        Ok(())
    }
}

/// Isotropic plane-stress stiffness
/// `C = E/(1−ν²)·[[1, ν, 0], [ν, 1, 0], [0, 0, (1−ν)/2]]`.
pub fn linear_plane_stress(e: f64, nu: f64) -> Result<SmallMat> {
    if !(e > 0.0) || !nu.is_finite() || nu >= 1.0 || nu <= -1.0 {
        return Err(Error::InvalidArgument(format!(
            "invalid plane-stress parameters E={e}, nu={nu}"
        )));
    }
    let f = e / (1.0 - nu * nu);
    Ok(SmallMat::from_rows(&[
        &[f, f * nu, 0.0],
        &[f * nu, f, 0.0],
        &[0.0, 0.0, f * (1.0 - nu) / 2.0],
    ]))
}

/// Von Mises stress of a plane-stress state; same measure as the transition
/// function's equivalent stress.
pub fn vm_stress(sig: &Voigt) -> f64 {
    equivalent_stress(sig, EqStressKind::VonMisesPlane)
}

/// One 1D return-mapping step. Returns the stress, the updated state, and
/// the algorithmic tangent (E elastic, EK/(E+K) on the plastic branch).
pub fn ep1d_step(state: &EPState, eps_new: f64, p: &EPParams) -> Result<(f64, EPState, f64)> {
    p.validate()?;
    let sig_tr = p.e * (eps_new - state.eps_p.get(0));
    let f_tr = sig_tr.abs() - (p.sig_y + p.k * state.alpha);
    if f_tr <= 0.0 {
        Ok((sig_tr, *state, p.e))
    } else {
        let dlam = f_tr / (p.e + p.k);
        let sgn = sig_tr.signum();
        let sig = sig_tr - p.e * dlam * sgn;
        let new = EPState {
            eps_p: Voigt::scalar(state.eps_p.get(0) + dlam * sgn),
            alpha: state.alpha + dlam,
        };
        Ok((sig, new, p.e * p.k / (p.e + p.k)))
    }
}

/// Quadratic-form matrix of the squared von Mises stress in plane-stress
/// Voigt coordinates: `q² = σᵀ P σ`.
fn vm_p_matrix() -> SmallMat {
    SmallMat::from_rows(&[&[1.0, -0.5, 0.0], &[-0.5, 1.0, 0.0], &[0.0, 0.0, 3.0]])
}

fn invert3(m: &SmallMat) -> Result<SmallMat> {
    let a = m.to_dmatrix();
    let inv = a
        .try_inverse()
        .ok_or_else(|| Error::Solver("singular 3x3 matrix in return mapping".into()))?;
    let mut out = SmallMat::zeros(3);
    for i in 0..3 {
        for j in 0..3 {
            out.set(i, j, inv[(i, j)]);
        }
    }
    Ok(out)
}

/// Plane-stress-projected return mapping onto the von Mises surface with
/// linear isotropic hardening. Works entirely in the 3-component
/// plane-stress space with the plane-stress elastic tensor; the plastic
/// multiplier comes from a safeguarded scalar Newton iteration.
///
/// Returns stress, updated state, and the consistent algorithmic tangent.
pub fn ep_plane_stress_step(
    state: &EPState,
    eps_new: &Voigt,
    p: &EPParams,
) -> Result<(Voigt, EPState, SmallMat)> {
    p.validate()?;
    if eps_new.dim() != 3 || state.eps_p.dim() != 3 {
        return Err(Error::InvalidArgument("plane-stress step needs dim-3 Voigt vectors".into()));
    }
    let c = linear_plane_stress(p.e, p.nu)?;
    let pm = vm_p_matrix();
    let sig_tr = c.matvec(&eps_new.sub(&state.eps_p));
    let q_tr = vm_stress(&sig_tr);
    let f_tr = q_tr - (p.sig_y + p.k * state.alpha);
    if f_tr <= 0.0 {
        return Ok((sig_tr, *state, c));
    }

    // Solve F(m) = q(m) − σ_Y − K(α_n + m q(m)) = 0 with
    // σ(m) = (I + m C P)⁻¹ σ_tr. F is monotone decreasing with F(0) > 0.
    let eval = |m: f64| -> Result<(Voigt, f64, SmallMat)> {
        let mut a = SmallMat::identity(3);
        for i in 0..3 {
            for j in 0..3 {
                let mut cp = 0.0;
                for l in 0..3 {
                    cp += c.get(i, l) * pm.get(l, j);
                }
                a.add_to(i, j, m * cp);
            }
        }
        let ainv = invert3(&a)?;
        let sig = ainv.matvec(&sig_tr);
        let q = vm_stress(&sig);
        Ok((sig, q, ainv))
    };
    let fval = |m: f64| -> Result<f64> {
        let (_, q, _) = eval(m)?;
        Ok(q - p.sig_y - p.k * (state.alpha + m * q))
    };

    // Bracket the root, then Newton with bisection fallback.
    let mut lo = 0.0;
    let mut hi = 1.0 / p.e;
    let mut f_hi = fval(hi)?;
    let mut guard = 0;
    while f_hi > 0.0 {
        lo = hi;
        hi *= 4.0;
        f_hi = fval(hi)?;
        guard += 1;
        if guard > 200 {
            return Err(Error::Solver("plane-stress return mapping failed to bracket".into()));
        }
    }
    let tol = 1e-12 * p.sig_y;
    let mut m = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..100 {
        let (sig, q, ainv) = eval(m)?;
        let f = q - p.sig_y - p.k * (state.alpha + m * q);
        if f.abs() <= tol {
            converged = true;
            break;
        }
        if f > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
        // dq/dm = σᵀ P dσ/dm / q with dσ/dm = −(I + mCP)⁻¹ C P σ
        let psig = pm.matvec(&sig);
        let cpsig = c.matvec(&psig);
        let dsig = ainv.matvec(&cpsig).scale(-1.0);
        let dq = psig.dot(&dsig) / q;
        let df = dq - p.k * (q + m * dq);
        let mut m_next = m - f / df;
        if !(m_next > lo && m_next < hi) || !m_next.is_finite() {
            m_next = 0.5 * (lo + hi);
        }
        m = m_next;
    }
    if !converged {
        let f = fval(m)?;
        if f.abs() > 1e-8 * p.sig_y {
            return Err(Error::Solver(format!(
                "plane-stress return mapping did not converge, residual {f:.3e}"
            )));
        }
    }

    let (sig, q, _) = eval(m)?;
    let dlam = m * q;
    let n_dir = pm.matvec(&sig).scale(1.0 / q);
    let new = EPState { eps_p: state.eps_p.add_scaled(dlam, &n_dir), alpha: state.alpha + dlam };

    // Consistent tangent by implicit differentiation of
    //   R1 = σ − σ_tr + Δλ C P σ / q = 0,  R2 = q − σ_Y − K(α_n + Δλ) = 0:
    //   dσ/dε = [I + Δλ C (P − n nᵀ)/q + C n nᵀ/K]⁻¹ C   (K > 0)
    let tangent = if p.k > 0.0 {
        let mut a = SmallMat::identity(3);
        for i in 0..3 {
            for j in 0..3 {
                let mut v = 0.0;
                for l in 0..3 {
                    let pnl = pm.get(l, j) - n_dir.get(l) * n_dir.get(j);
                    v += c.get(i, l) * (dlam * pnl / q + n_dir.get(l) * n_dir.get(j) / p.k);
                }
                a.add_to(i, j, v);
            }
        }
        let ainv = invert3(&a)?;
        let mut t = SmallMat::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                let mut v = 0.0;
                for l in 0..3 {
                    v += ainv.get(i, l) * c.get(l, j);
                }
                t.set(i, j, v);
            }
        }
        t
    } else {
        // Perfect plasticity: continuum elastoplastic tangent.
        let n = n_dir;
        let cn = c.matvec(&n);
        let denom = n.dot(&cn);
        let mut t = c;
        for i in 0..3 {
            for j in 0..3 {
                t.add_to(i, j, -cn.get(i) * cn.get(j) / denom);
            }
        }
        t
    };
    Ok((sig, new, tangent))
}

/// Energy, gradient, and Hessian of the incompressible Rivlin-Saunders
/// density as a function of the in-plane right Cauchy-Green entries
/// `(a, b, c) = (C₁₁, C₂₂, C₁₂)`, with `C₃₃ = 1/(ab − c²)` eliminated.
fn rs_energy_abc(a: f64, b: f64, cc: f64, p: &HyperParams) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    let det = a * b - cc * cc;
    let g = [b, a, -2.0 * cc]; // ∇det
    let h_det = [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -2.0]];
    let s = a + b;
    let e12 = [1.0, 1.0, 0.0];
    let inv = 1.0 / det;
    let inv2 = inv * inv;
    let inv3 = inv2 * inv;

    // I1 = s + 1/det, I2 = det + s/det for the block-diagonal C.
    let t1 = inv;
    let t2 = s * inv;
    let w = p.c1 * (s + t1 - 3.0) + p.c2 * (det + t2 - 3.0);

    let mut grad = [0.0; 3];
    let mut hess = [[0.0; 3]; 3];
    for i in 0..3 {
        let dt1 = -inv2 * g[i];
        let dt2 = inv * e12[i] - s * inv2 * g[i];
        grad[i] = p.c1 * (e12[i] + dt1) + p.c2 * (g[i] + dt2);
        for j in 0..3 {
            let d2t1 = 2.0 * inv3 * g[i] * g[j] - inv2 * h_det[i][j];
            let d2t2 = -inv2 * (e12[i] * g[j] + g[i] * e12[j]) + 2.0 * s * inv3 * g[i] * g[j]
                - s * inv2 * h_det[i][j];
            hess[i][j] = p.c1 * d2t1 + p.c2 * (h_det[i][j] + d2t2);
        }
    }
    (w, grad, hess)
}

fn rs_cauchy_green(eps_gl: &Voigt) -> (f64, f64, f64) {
    (1.0 + 2.0 * eps_gl.get(0), 1.0 + 2.0 * eps_gl.get(1), eps_gl.get(2))
}

/// Strain-energy density at a Green-Lagrange strain (engineering-shear
/// Voigt), with the incompressibility constraint eliminated.
pub fn rivlin_saunders_energy(eps_gl: &Voigt, p: &HyperParams) -> Result<f64> {
    p.validate()?;
    let (a, b, c) = rs_cauchy_green(eps_gl);
    if a <= 0.0 || a * b - c * c <= 0.0 {
        return Err(Error::InvalidArgument(
            "in-plane Cauchy-Green tensor not positive definite".into(),
        ));
    }
    Ok(rs_energy_abc(a, b, c, p).0)
}

/// Second Piola-Kirchhoff stress of the incompressible plane-stress
/// Rivlin-Saunders material. Eliminating `C₃₃ = 1/det(C₂ₓ₂)` analytically is
/// equivalent to the Lagrange-multiplier form with `S₃₃ = 0`.
pub fn rivlin_saunders_s(eps_gl: &Voigt, p: &HyperParams) -> Result<Voigt> {
    let (s, _) = rivlin_saunders_s_tangent(eps_gl, p)?;
    Ok(s)
}

/// Stress and tangent `dS/dE` (engineering-shear Voigt pairing).
pub fn rivlin_saunders_s_tangent(eps_gl: &Voigt, p: &HyperParams) -> Result<(Voigt, SmallMat)> {
    p.validate()?;
    if eps_gl.dim() != 3 {
        return Err(Error::InvalidArgument("Green-Lagrange strain must have dim 3".into()));
    }
    let (a, b, c) = rs_cauchy_green(eps_gl);
    if a <= 0.0 || a * b - c * c <= 0.0 {
        return Err(Error::InvalidArgument(
            "in-plane Cauchy-Green tensor not positive definite".into(),
        ));
    }
    let (_, grad, hess) = rs_energy_abc(a, b, c, p);
    // S = ∂w/∂E with E_voigt = [E11, E22, 2E12]:
    // ∂/∂E11 = 2 ∂/∂a, ∂/∂E22 = 2 ∂/∂b, ∂/∂(2E12) = ∂/∂c.
    let s = Voigt::plane(2.0 * grad[0], 2.0 * grad[1], grad[2]);
    let scale = [2.0, 2.0, 1.0];
    let mut tan = SmallMat::zeros(3);
    for i in 0..3 {
        for j in 0..3 {
            tan.set(i, j, scale[i] * scale[j] * hess[i][j]);
        }
    }
    Ok((s, tan))
}

/// A reference material law, used by the forward solver and data generators.
#[derive(Clone, Debug)]
pub enum RefMaterial {
    /// σ = C ε with a fixed elastic tensor (dim taken from the matrix).
    LinearElastic(SmallMat),
    Ep1d(EPParams),
    EpPlane(EPParams),
    RivlinSaunders(HyperParams),
}

#[derive(Clone, Copy, Debug)]
pub enum RefState {
    Elastic,
    Ep(EPState),
}

impl RefMaterial {
    pub fn dim(&self) -> usize {
        match self {
            RefMaterial::LinearElastic(c) => c.dim(),
            RefMaterial::Ep1d(_) => 1,
            RefMaterial::EpPlane(_) | RefMaterial::RivlinSaunders(_) => 3,
        }
    }

    pub fn init_state(&self) -> RefState {
        match self {
            RefMaterial::Ep1d(_) => RefState::Ep(EPState::zero(1)),
            RefMaterial::EpPlane(_) => RefState::Ep(EPState::zero(3)),
            _ => RefState::Elastic,
        }
    }

    /// Stress, tangent, and trial state for a strain at the new time level.
    /// The caller commits the returned state only after global convergence.
    pub fn eval(&self, state: &RefState, eps_new: &Voigt) -> Result<(Voigt, SmallMat, RefState)> {
        match (self, state) {
            (RefMaterial::LinearElastic(c), _) => Ok((c.matvec(eps_new), *c, RefState::Elastic)),
            (RefMaterial::Ep1d(p), RefState::Ep(ep)) => {
                let (sig, new, tan) = ep1d_step(ep, eps_new.get(0), p)?;
                let mut t = SmallMat::zeros(1);
                t.set(0, 0, tan);
                Ok((Voigt::scalar(sig), t, RefState::Ep(new)))
            }
            (RefMaterial::EpPlane(p), RefState::Ep(ep)) => {
                let (sig, new, tan) = ep_plane_stress_step(ep, eps_new, p)?;
                Ok((sig, tan, RefState::Ep(new)))
            }
            (RefMaterial::RivlinSaunders(p), _) => {
                let (s, tan) = rivlin_saunders_s_tangent(eps_new, p)?;
                Ok((s, tan, RefState::Elastic))
            }
            _ => Err(Error::InvalidArgument("material state kind mismatch".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const GPA: f64 = 1e9;

    fn truss_params() -> EPParams {
        EPParams { e: 200.0 * GPA, nu: 0.0, sig_y: 0.3 * GPA, k: 200.0 / 9.0 * GPA }
    }

    fn plate_params() -> EPParams {
        EPParams { e: 100.0 * GPA, nu: 0.35, sig_y: 0.97 * GPA, k: 10.0 * GPA }
    }

    #[test]
    fn plane_stress_matrix_examples() {
        let c = linear_plane_stress(5.0, 0.0).unwrap();
        assert_relative_eq!(c.get(0, 0), 5.0);
        assert_relative_eq!(c.get(1, 1), 5.0);
        assert_relative_eq!(c.get(2, 2), 2.5);
        assert_relative_eq!(c.get(0, 1), 0.0);

        let c = linear_plane_stress(100.0 * GPA, 0.35).unwrap();
        assert_relative_eq!(c.get(0, 0), 113.96 * GPA, max_relative = 1e-3);
        assert_relative_eq!(c.get(0, 1), 39.89 * GPA, max_relative = 1e-3);
        assert_relative_eq!(c.get(2, 2), 37.04 * GPA, max_relative = 1e-3);
        assert_eq!(c.get(0, 1), c.get(1, 0));

        assert!(linear_plane_stress(1.0, 1.0).is_err());
    }

    #[test]
    fn ep1d_examples_from_truss_material() {
        let p = truss_params();
        let virgin = EPState::zero(1);
        let (sig, st, tan) = ep1d_step(&virgin, 0.001, &p).unwrap();
        assert_relative_eq!(sig, 0.2 * GPA, max_relative = 1e-14);
        assert_eq!(st.alpha, 0.0);
        assert_relative_eq!(tan, p.e);

        // Monotonic to 0.002: predictor 0.4 GPa, Δλ = 0.1/(E+K) GPa.
        let (sig, st, tan) = ep1d_step(&virgin, 0.002, &p).unwrap();
        assert_relative_eq!(sig, 0.31 * GPA, max_relative = 1e-12);
        let closed_form = p.sig_y + (p.e * p.k / (p.e + p.k)) * (0.002 - p.sig_y / p.e);
        assert_relative_eq!(sig, closed_form, max_relative = 1e-14);
        assert_relative_eq!(tan, 20.0 * GPA, max_relative = 1e-12);
        assert!(st.alpha > 0.0);

        // Unload by 0.001: elastic slope E.
        let (sig2, st2, tan2) = ep1d_step(&st, 0.001, &p).unwrap();
        assert_relative_eq!(sig2, 0.11 * GPA, max_relative = 1e-12);
        assert_relative_eq!(tan2, p.e);
        assert_eq!(st2.alpha, st.alpha);
    }

    #[test]
    fn hardening_tangent_matches_closed_form() {
        let p = truss_params();
        // E K/(E+K) = 200·(200/9)/(200 + 200/9) GPa = 20 GPa
        let mut state = EPState::zero(1);
        let mut eps = 0.0;
        for _ in 0..10 {
            eps += 0.002;
            let (_, st, tan) = ep1d_step(&state, eps, &p).unwrap();
            state = st;
            assert!((tan - 20.0 * GPA).abs() <= 1e-12 * 20.0 * GPA);
        }
    }

    #[test]
    fn ep_plane_elastic_branch_is_exact() {
        let p = plate_params();
        let st = EPState::zero(3);
        let eps = Voigt::plane(1e-3, -2e-3, 5e-4);
        let (sig, new, tan) = ep_plane_stress_step(&st, &eps, &p).unwrap();
        let c = linear_plane_stress(p.e, p.nu).unwrap();
        let expect = c.matvec(&eps);
        for i in 0..3 {
            assert_eq!(sig.get(i), expect.get(i));
        }
        assert_eq!(new.alpha, 0.0);
        assert_eq!(tan.get(0, 0), c.get(0, 0));
    }

    #[test]
    fn pure_shear_yield_threshold() {
        let p = plate_params();
        let st = EPState::zero(3);
        let c = linear_plane_stress(p.e, p.nu).unwrap();
        // Yield begins when √3·σ12 = σ_Y.
        let g12_yield = p.sig_y / 3.0f64.sqrt() / c.get(2, 2);
        let (sig, new, _) =
            ep_plane_stress_step(&st, &Voigt::plane(0.0, 0.0, 0.999 * g12_yield), &p).unwrap();
        assert_eq!(new.alpha, 0.0);
        assert!(vm_stress(&sig) < p.sig_y);
        let (sig, new, _) =
            ep_plane_stress_step(&st, &Voigt::plane(0.0, 0.0, 1.01 * g12_yield), &p).unwrap();
        assert!(new.alpha > 0.0);
        let f = vm_stress(&sig) - p.sig_y - p.k * new.alpha;
        assert!(f.abs() <= 1e-10 * p.sig_y, "yield residual {f:e}");
    }

    #[test]
    fn return_mapping_consistency_random_steps() {
        let p = plate_params();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut failures = 0;
        for _ in 0..1000 {
            let state = EPState {
                eps_p: Voigt::plane(
                    rng.gen_range(-5e-3..5e-3),
                    rng.gen_range(-5e-3..5e-3),
                    rng.gen_range(-5e-3..5e-3),
                ),
                alpha: rng.gen_range(0.0..2e-2),
            };
            let eps = Voigt::plane(
                rng.gen_range(-0.04..0.04),
                rng.gen_range(-0.04..0.04),
                rng.gen_range(-0.04..0.04),
            );
            let (sig, new, _) = ep_plane_stress_step(&state, &eps, &p).unwrap();
            let f = vm_stress(&sig) - p.sig_y - p.k * new.alpha;
            if f > 1e-8 * p.sig_y {
                failures += 1;
            }
            // Δλ ≥ 0 and plastic dissipation σᵀΔε^p ≥ 0.
            assert!(new.alpha >= state.alpha);
            let dep = new.eps_p.sub(&state.eps_p);
            assert!(sig.dot(&dep) >= -1e-8 * sig.norm() * dep.norm().max(1e-30));
        }
        assert_eq!(failures, 0);
    }

    #[test]
    fn ep_plane_consistent_tangent_fd_check() {
        let p = plate_params();
        let state = EPState { eps_p: Voigt::plane(1e-3, -4e-4, 6e-4), alpha: 3e-3 };
        let eps = Voigt::plane(0.018, -0.006, 0.009);
        let (_, new, tan) = ep_plane_stress_step(&state, &eps, &p).unwrap();
        assert!(new.alpha > state.alpha, "test point must be plastic");
        let h = 1e-8;
        for j in 0..3 {
            let mut ep = eps;
            ep.set(j, ep.get(j) + h);
            let mut em = eps;
            em.set(j, em.get(j) - h);
            let (sp, _, _) = ep_plane_stress_step(&state, &ep, &p).unwrap();
            let (sm, _, _) = ep_plane_stress_step(&state, &em, &p).unwrap();
            for i in 0..3 {
                let fd = (sp.get(i) - sm.get(i)) / (2.0 * h);
                assert!(
                    (tan.get(i, j) - fd).abs() <= 1e-4 * tan.frob_norm(),
                    "tangent ({i},{j}): {} vs fd {}",
                    tan.get(i, j),
                    fd
                );
            }
        }
    }

    #[test]
    fn ep_plane_tangent_is_spd_with_hardening() {
        let p = plate_params();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let state = EPState {
                eps_p: Voigt::plane(
                    rng.gen_range(-3e-3..3e-3),
                    rng.gen_range(-3e-3..3e-3),
                    rng.gen_range(-3e-3..3e-3),
                ),
                alpha: rng.gen_range(0.0..1e-2),
            };
            let eps = Voigt::plane(
                rng.gen_range(-0.03..0.03),
                rng.gen_range(-0.03..0.03),
                rng.gen_range(-0.03..0.03),
            );
            let (_, _, tan) = ep_plane_stress_step(&state, &eps, &p).unwrap();
            let min = crate::linalg::sym_eig_min(&tan.to_dmatrix()).unwrap();
            assert!(min > 0.0, "tangent lost positive definiteness: {min:e}");
        }
    }

    /// Forward-Euler integration of the continuum rate form, used as the
    /// independent oracle for the return mapping.
    fn rate_form_oracle(path_end: Voigt, n_sub: usize, p: &EPParams) -> Voigt {
        let c = linear_plane_stress(p.e, p.nu).unwrap();
        let pm = vm_p_matrix();
        let mut sig = Voigt::zeros(3);
        let mut alpha = 0.0;
        let deps = path_end.scale(1.0 / n_sub as f64);
        for _ in 0..n_sub {
            let q = vm_stress(&sig);
            let f = q - p.sig_y - p.k * alpha;
            if f >= -1e-9 * p.sig_y && q > 0.0 {
                let n = pm.matvec(&sig).scale(1.0 / q);
                let num = n.dot(&c.matvec(&deps));
                if num > 0.0 {
                    let denom = n.dot(&c.matvec(&n)) + p.k;
                    let lam_dot = num / denom;
                    alpha += lam_dot;
                    sig = sig.add(&c.matvec(&deps.sub(&n.scale(lam_dot))));
                    continue;
                }
            }
            sig = sig.add(&c.matvec(&deps));
        }
        sig
    }

    #[test]
    fn substepped_return_mapping_converges_to_rate_form() {
        let p = plate_params();
        let target = Voigt::plane(0.02, 0.005, 0.01);
        let oracle = rate_form_oracle(target, 200_000, &p);
        let mut state = EPState::zero(3);
        let n = 2000;
        let mut sig = Voigt::zeros(3);
        for i in 1..=n {
            let eps = target.scale(i as f64 / n as f64);
            let (s, st, _) = ep_plane_stress_step(&state, &eps, &p).unwrap();
            state = st;
            sig = s;
        }
        for i in 0..3 {
            assert_relative_eq!(sig.get(i), oracle.get(i), max_relative = 2e-3);
        }
    }

    #[test]
    fn substepping_error_is_bounded_and_first_order() {
        let p = plate_params();
        let target = Voigt::plane(0.02, 0.005, 0.01);
        let run = |k: usize| -> Voigt {
            let mut state = EPState::zero(3);
            let mut sig = Voigt::zeros(3);
            for i in 1..=k {
                let eps = target.scale(i as f64 / k as f64);
                let (s, st, _) = ep_plane_stress_step(&state, &eps, &p).unwrap();
                state = st;
                sig = s;
            }
            sig
        };
        let s1 = run(1);
        let s10 = run(10);
        let s1000 = run(1000);
        let d1 = s1.sub(&s1000).norm();
        let d10 = s10.sub(&s1000).norm();
        // One-shot vs dense substepping differ by O(‖Δε‖²) of the elastic scale,
        // and refining the path shrinks the gap roughly linearly.
        assert!(d1 <= p.e * target.norm() * target.norm());
        assert!(d10 < 0.35 * d1, "gap should shrink under substepping: {d1:e} -> {d10:e}");
    }

    #[test]
    fn uniaxial_plane_stress_matches_1d_law() {
        // Drive ε11, solve ε22 so σ22 = 0 (ε12 = 0): the σ11(ε11) curve must
        // match the 1D law with the same E, σ_Y, K.
        let p = plate_params();
        let p1d = EPParams { e: p.e, nu: 0.0, sig_y: p.sig_y, k: p.k };
        let mut state = EPState::zero(3);
        let mut state1d = EPState::zero(1);
        let mut eps22 = 0.0;
        let n = 400;
        for i in 1..=n {
            let e11 = 0.03 * i as f64 / n as f64;
            let mut sig = Voigt::zeros(3);
            let mut new = state;
            for _ in 0..60 {
                let eps = Voigt::plane(e11, eps22, 0.0);
                let (s, st, tan) = ep_plane_stress_step(&state, &eps, &p).unwrap();
                sig = s;
                new = st;
                if sig.get(1).abs() <= 1e-9 * p.sig_y {
                    break;
                }
                eps22 -= sig.get(1) / tan.get(1, 1);
            }
            assert!(sig.get(1).abs() <= 1e-6 * p.sig_y);
            state = new;
            let (sig1d, st1d, _) = ep1d_step(&state1d, e11, &p1d).unwrap();
            state1d = st1d;
            assert_relative_eq!(sig.get(0), sig1d, max_relative = 5e-3);
        }
        assert!(state.alpha > 0.0, "path must enter the plastic regime");
    }

    #[test]
    fn rivlin_saunders_reference_state_is_stress_free() {
        let p = HyperParams { c1: 0.1863e6, c2: 0.00979e6 };
        let s = rivlin_saunders_s(&Voigt::zeros(3), &p).unwrap();
        assert!(s.norm() < 1e-9 * p.c1);
    }

    #[test]
    fn rivlin_saunders_equibiaxial_matches_closed_form() {
        let p = HyperParams { c1: 0.1863e6, c2: 0.00979e6 };
        for lam in [1.05, 1.1, 1.25] {
            let e = (lam * lam - 1.0) / 2.0;
            let s = rivlin_saunders_s(&Voigt::plane(e, e, 0.0), &p).unwrap();
            // Cauchy σ = λ² S (J = 1); closed form σ = 2(λ² − λ⁻⁴)(c1 + c2 λ²).
            let cauchy = lam * lam * s.get(0);
            let expect = 2.0 * (lam * lam - lam.powi(-4)) * (p.c1 + p.c2 * lam * lam);
            assert_relative_eq!(cauchy, expect, max_relative = 1e-10);
            assert_relative_eq!(s.get(0), s.get(1), max_relative = 1e-12);
        }
    }

    #[test]
    fn rivlin_saunders_uniaxial_matches_closed_form() {
        let p = HyperParams { c1: 0.1863e6, c2: 0.00979e6 };
        for lam in [1.1f64, 1.3, 1.6] {
            let lat = 1.0 / lam.sqrt();
            let e1 = (lam * lam - 1.0) / 2.0;
            let e2 = (lat * lat - 1.0) / 2.0;
            let s = rivlin_saunders_s(&Voigt::plane(e1, e2, 0.0), &p).unwrap();
            // Lateral direction is stress-free by incompressible symmetry.
            assert!(s.get(1).abs() <= 1e-9 * p.c1);
            let cauchy = lam * lam * s.get(0);
            let expect = 2.0 * (lam * lam - 1.0 / lam) * (p.c1 + p.c2 / lam);
            assert_relative_eq!(cauchy, expect, max_relative = 1e-10);
        }
    }

    #[test]
    fn rivlin_saunders_stress_is_energy_gradient() {
        let p = HyperParams { c1: 0.1863e6, c2: 0.00979e6 };
        let eps = Voigt::plane(0.08, -0.03, 0.05);
        let s = rivlin_saunders_s(&eps, &p).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut ep = eps;
            ep.set(i, ep.get(i) + h);
            let mut em = eps;
            em.set(i, em.get(i) - h);
            let fd = (rivlin_saunders_energy(&ep, &p).unwrap()
                - rivlin_saunders_energy(&em, &p).unwrap())
                / (2.0 * h);
            assert!((s.get(i) - fd).abs() / fd.abs().max(s.norm()) < 1e-7, "component {i}");
        }
    }

    #[test]
    fn rivlin_saunders_tangent_fd_check() {
        let p = HyperParams { c1: 0.1863e6, c2: 0.00979e6 };
        let eps = Voigt::plane(0.08, -0.03, 0.05);
        let (_, tan) = rivlin_saunders_s_tangent(&eps, &p).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut ep = eps;
            ep.set(j, ep.get(j) + h);
            let mut em = eps;
            em.set(j, em.get(j) - h);
            let sp = rivlin_saunders_s(&ep, &p).unwrap();
            let sm = rivlin_saunders_s(&em, &p).unwrap();
            for i in 0..3 {
                let fd = (sp.get(i) - sm.get(i)) / (2.0 * h);
                assert!((tan.get(i, j) - fd).abs() <= 1e-6 * tan.frob_norm());
            }
        }
    }

    #[test]
    fn rivlin_saunders_rejects_inverted_state() {
        let p = HyperParams { c1: 1.0, c2: 0.1 };
        // E11 = -0.5 ⇒ C11 = 0.
        assert!(rivlin_saunders_s(&Voigt::plane(-0.5, 0.0, 0.0), &p).is_err());
    }

    #[test]
    fn vm_stress_shares_equivalent_stress() {
        assert_relative_eq!(vm_stress(&Voigt::plane(1.0, 0.0, 0.0)), 1.0);
        assert_relative_eq!(vm_stress(&Voigt::plane(0.0, 0.0, 1.0)), 3.0f64.sqrt());
        assert_relative_eq!(vm_stress(&Voigt::plane(1.0, 1.0, 0.0)), 1.0);
    }
}
