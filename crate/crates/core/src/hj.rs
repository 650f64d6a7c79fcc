//! Sections of E* x R, 1-jets, the Legendrian residual and the
//! Hamilton-Jacobi residual checks, including the projected-and-lifted
//! trajectory comparison.

use crate::algebroid::{AlgebroidModel, State, StateDerivative};
use crate::dual::{Dual, Dual1};
use crate::error::{CoreError, Result};
use crate::field::{DerivRequest, FieldScalar, ScalarField};
use crate::hamiltonian::ContactHamiltonianSystem;
use crate::integrate::integrate;
use crate::linalg::Mat;

/// Residual level above which the projected-dynamics check flags its
/// precondition as violated (it still runs; the gap is the point of the
/// negative controls).
pub const HJ_PRECONDITION_TOL: f64 = 1e-8;

enum GammaKind {
    /// gamma = j^1 f: momentum part generated from the anchor and df.
    Jet { f: ScalarField },
    /// Momentum components supplied explicitly.
    Explicit {
        gamma0: Vec<ScalarField>,
        gamma_s: ScalarField,
    },
}

/// A section q -> (gamma_alpha(q), gamma_s(q)) of E* x R -> Q.
pub struct SectionGamma {
    model: AlgebroidModel,
    kind: GammaKind,
}

fn check_base_field(model: &AlgebroidModel, f: &ScalarField, what: &str) -> Result<()> {
    if f.arity().m != 0 || f.arity().depends_on_s {
        return Err(CoreError::Invalid(format!(
            "{} must depend on the base coordinates only",
            what
        )));
    }
    if f.arity().n != model.n() {
        return Err(CoreError::DimensionMismatch {
            what: "section base dimension",
            expected: model.n(),
            got: f.arity().n,
        });
    }
    Ok(())
}

/// The 1-jet of f: gamma_alpha = rho^i_alpha df/dq^i, gamma_s = f.
pub fn one_jet(model: &AlgebroidModel, f: &ScalarField) -> Result<SectionGamma> {
    check_base_field(model, f, "a 1-jet generating function")?;
    Ok(SectionGamma {
        model: model.clone(),
        kind: GammaKind::Jet { f: f.clone() },
    })
}

impl SectionGamma {
    /// A section with explicitly supplied momentum components. Mixing an
    /// explicit momentum part with a jet is impossible by construction.
    pub fn explicit(
        model: &AlgebroidModel,
        gamma0: Vec<ScalarField>,
        gamma_s: ScalarField,
    ) -> Result<Self> {
        if gamma0.len() != model.m() {
            return Err(CoreError::DimensionMismatch {
                what: "explicit momentum components",
                expected: model.m(),
                got: gamma0.len(),
            });
        }
        for g in &gamma0 {
            check_base_field(model, g, "a momentum component")?;
        }
        check_base_field(model, &gamma_s, "the action component")?;
        Ok(Self {
            model: model.clone(),
            kind: GammaKind::Explicit { gamma0, gamma_s },
        })
    }

    pub fn model(&self) -> &AlgebroidModel {
        &self.model
    }

    /// The generating function of the action part (f for a jet).
    pub fn action_field(&self) -> &ScalarField {
        match &self.kind {
            GammaKind::Jet { f } => f,
            GammaKind::Explicit { gamma_s, .. } => gamma_s,
        }
    }

    /// Momentum components at any scalar level.
    pub fn momentum_at<T>(&self, q: &[T]) -> Result<Vec<T>>
    where
        T: FieldScalar,
        Dual<T>: FieldScalar,
    {
        match &self.kind {
            GammaKind::Jet { f } => {
                let rho = self.model.anchor_at(q)?;
                let n = self.model.n();
                let m = self.model.m();
                // df/dq^j at the (possibly dual) base point: one more level.
                let mut grad = Vec::with_capacity(n);
                for j in 0..n {
                    let qd: Vec<Dual<T>> = q
                        .iter()
                        .enumerate()
                        .map(|(k, &x)| {
                            if k == j {
                                Dual::variable(x)
                            } else {
                                Dual::constant(x)
                            }
                        })
                        .collect();
                    grad.push(f.eval_at(&qd, &[], Dual::constant(T::zero()))?.du);
                }
                Ok((0..m)
                    .map(|a| {
                        (0..n)
                            .map(|i| rho[i * m + a] * grad[i])
                            .fold(T::zero(), |acc, t| acc + t)
                    })
                    .collect())
            }
            GammaKind::Explicit { gamma0, .. } => gamma0
                .iter()
                .map(|g| g.eval_at(q, &[], T::zero()))
                .collect(),
        }
    }

    pub fn momentum(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.momentum_at(q)
    }

    /// Jacobian d gamma_alpha / d q^i, an m x n matrix.
    pub fn momentum_jacobian(&self, q: &[f64]) -> Result<Mat> {
        let n = self.model.n();
        let m = self.model.m();
        let mut jac = Mat::zeros(m, n);
        for i in 0..n {
            let qd: Vec<Dual1> = q
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    if k == i {
                        Dual1::variable(x)
                    } else {
                        Dual1::constant(x)
                    }
                })
                .collect();
            let col = self.momentum_at(&qd)?;
            for a in 0..m {
                jac[(a, i)] = col[a].du;
            }
        }
        Ok(jac)
    }

    pub fn action(&self, q: &[f64]) -> Result<f64> {
        self.action_field().value(q, &[], 0.0)
    }

    pub fn action_gradient(&self, q: &[f64]) -> Result<Vec<f64>> {
        let b = self.action_field().bundle(
            q,
            &[],
            0.0,
            &DerivRequest {
                grad_q: true,
                ..Default::default()
            },
        )?;
        Ok(b.grad_q().to_vec())
    }

    /// The Hamiltonian-side state gamma(q).
    pub fn state_at(&self, q: &[f64]) -> Result<State> {
        Ok(State::hamiltonian(
            q.to_vec(),
            self.momentum(q)?,
            self.action(q)?,
        ))
    }
}

/// d^E gamma_s(q) - gamma_0(q): zero exactly when gamma spans a
/// Legendrian Lie subalgebroid.
pub fn legendrian_residual(gamma: &SectionGamma, q: &[f64]) -> Result<Vec<f64>> {
    let de = gamma.model.d_e_function(gamma.action_field(), q)?;
    let g0 = gamma.momentum(q)?;
    Ok(de.iter().zip(&g0).map(|(d, g)| d - g).collect())
}

/// Fiber components of the reduced section on E: (dH/dp) o gamma.
pub fn xi_h_gamma(
    sys: &ContactHamiltonianSystem,
    gamma: &SectionGamma,
    q: &[f64],
) -> Result<Vec<f64>> {
    let st = gamma.state_at(q)?;
    let b = sys.hamiltonian.bundle_at(
        &st,
        &DerivRequest {
            grad_w: true,
            ..Default::default()
        },
    )?;
    Ok(b.grad_w().to_vec())
}

/// Componentwise defect of the gamma-relatedness conditions.
pub struct RelatednessResiduals {
    /// Momentum equations (one per fiber index).
    pub r_p: Vec<f64>,
    /// The action equation.
    pub r_s: f64,
}

pub fn relatedness_residuals(
    sys: &ContactHamiltonianSystem,
    gamma: &SectionGamma,
    q: &[f64],
) -> Result<RelatednessResiduals> {
    let st = gamma.state_at(q)?;
    let b = sys.hamiltonian.bundle_at(
        &st,
        &DerivRequest {
            grad_q: true,
            grad_w: true,
            d_s: true,
            ..Default::default()
        },
    )?;
    let h_q = b.grad_q();
    let h_p = b.grad_w();
    let h_s = b.d_s();
    let n = gamma.model.n();
    let m = gamma.model.m();
    let rho = gamma.model.anchor_at(q)?;
    let c = gamma.model.structure_at(q)?;
    let g = &st.w;
    let jac = gamma.momentum_jacobian(q)?;
    let ds_grad = gamma.action_gradient(q)?;

    let mut r_p = Vec::with_capacity(m);
    for a in 0..m {
        let mut lhs = 0.0;
        for i in 0..n {
            lhs -= rho[i * m + a] * h_q[i];
        }
        for eta in 0..m {
            for bb in 0..m {
                lhs -= c[(eta * m + a) * m + bb] * g[eta] * h_p[bb];
            }
        }
        lhs -= g[a] * h_s;
        let mut rhs = 0.0;
        for bb in 0..m {
            for i in 0..n {
                rhs += rho[i * m + bb] * h_p[bb] * jac[(a, i)];
            }
        }
        r_p.push(lhs - rhs);
    }

    let lhs_s: f64 = (0..m).map(|a| g[a] * h_p[a]).sum::<f64>() - b.value;
    let rhs_s: f64 = (0..m)
        .map(|a| {
            (0..n)
                .map(|i| rho[i * m + a] * h_p[a] * ds_grad[i])
                .sum::<f64>()
        })
        .sum();
    Ok(RelatednessResiduals {
        r_p,
        r_s: lhs_s - rhs_s,
    })
}

/// Which section the jet-form Hamilton-Jacobi equation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetEquation {
    /// d^E (H o gamma) = 0 and H o gamma = 0.
    Hamiltonian,
    /// d^E (H o gamma) = 0 only.
    Evolution,
}

/// Residuals of the jet-form Hamilton-Jacobi equations at q.
pub struct JetHjResiduals {
    /// Components of d^E (H o gamma).
    pub d_e: Vec<f64>,
    /// H o gamma, present for the Hamiltonian-section equation.
    pub value: Option<f64>,
}

impl JetHjResiduals {
    pub fn max_abs(&self) -> f64 {
        self.d_e
            .iter()
            .fold(self.value.unwrap_or(0.0).abs(), |acc, x| acc.max(x.abs()))
    }
}

/// Evaluate the Hamilton-Jacobi residuals for gamma = j^1 f.
pub fn jet_hj_residuals(
    sys: &ContactHamiltonianSystem,
    f: &ScalarField,
    q: &[f64],
    which: JetEquation,
) -> Result<JetHjResiduals> {
    let gamma = one_jet(&sys.model, f)?;
    let value = sys.hamiltonian.value_at(&gamma.state_at(q)?)?;

    // Gradient of H o gamma by seeding the whole composition.
    let n = sys.model.n();
    let m = sys.model.m();
    let mut grad = vec![0.0; n];
    for (i, gi) in grad.iter_mut().enumerate() {
        let qd: Vec<Dual1> = q
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                if k == i {
                    Dual1::variable(x)
                } else {
                    Dual1::constant(x)
                }
            })
            .collect();
        let p = gamma.momentum_at(&qd)?;
        let s = f.eval_at(&qd, &[], Dual1::constant(0.0))?;
        *gi = sys.hamiltonian.eval_at(&qd, &p, s)?.du;
    }
    let rho = sys.model.anchor_at(q)?;
    let d_e = (0..m)
        .map(|a| (0..n).map(|i| rho[i * m + a] * grad[i]).sum())
        .collect();

    Ok(JetHjResiduals {
        d_e,
        value: match which {
            JetEquation::Hamiltonian => Some(value),
            JetEquation::Evolution => None,
        },
    })
}

/// Result of projecting, integrating on the base, lifting through gamma
/// and comparing against the full contact Hamilton trajectory.
pub struct ProjectedDynamicsReport {
    pub sup_gap: f64,
    pub gaps: Vec<(f64, f64)>,
    /// Worst jet-form Hamilton-Jacobi residual seen along the base curve.
    pub hj_residual_max: f64,
    /// True when the residual exceeded [`HJ_PRECONDITION_TOL`] somewhere.
    pub precondition_violated: bool,
}

/// Integrate the base dynamics qdot = rho (dH/dp o gamma), lift through
/// gamma = j^1 f, and compare with the full flow started at gamma(q0).
pub fn projected_dynamics_check(
    sys: &ContactHamiltonianSystem,
    f: &ScalarField,
    q0: &[f64],
    t_end: f64,
    h: f64,
    sample_every: usize,
) -> Result<ProjectedDynamicsReport> {
    let gamma = one_jet(&sys.model, f)?;
    let m = sys.model.m();

    let base_field = |st: &State| -> Result<StateDerivative> {
        let xi = xi_h_gamma(sys, &gamma, &st.q)?;
        let rho = sys.model.anchor_at(&st.q)?;
        let dq = (0..st.q.len())
            .map(|i| (0..m).map(|a| rho[i * m + a] * xi[a]).sum())
            .collect();
        Ok(StateDerivative {
            dq,
            dw: vec![],
            ds: 0.0,
        })
    };
    let base_start = State::hamiltonian(q0.to_vec(), vec![], 0.0);
    let base_traj = integrate(&base_field, &base_start, t_end, h, sample_every, &[])?;
    if let Some(fail) = &base_traj.failure {
        return Err(CoreError::Integration {
            time: fail.time,
            reason: format!("projected base flow: {}", fail.reason),
        });
    }

    let full_field = |st: &State| sys.hamilton_field(st);
    let full_start = gamma.state_at(q0)?;
    let full_traj = integrate(&full_field, &full_start, t_end, h, sample_every, &[])?;
    if let Some(fail) = &full_traj.failure {
        return Err(CoreError::Integration {
            time: fail.time,
            reason: format!("contact Hamilton flow: {}", fail.reason),
        });
    }

    let mut gaps = Vec::with_capacity(base_traj.times.len());
    let mut sup_gap: f64 = 0.0;
    let mut hj_residual_max: f64 = 0.0;
    for (idx, (&t, base_state)) in base_traj.times.iter().zip(&base_traj.states).enumerate() {
        let lifted = gamma.state_at(&base_state.q)?;
        let full = &full_traj.states[idx];
        let mut gap = (lifted.s - full.s).abs();
        for (a, b) in lifted
            .q
            .iter()
            .zip(&full.q)
            .chain(lifted.w.iter().zip(&full.w))
        {
            gap = gap.max((a - b).abs());
        }
        sup_gap = sup_gap.max(gap);
        gaps.push((t, gap));

        let res = jet_hj_residuals(sys, f, &base_state.q, JetEquation::Hamiltonian)?;
        hj_residual_max = hj_residual_max.max(res.max_abs());
    }

    Ok(ProjectedDynamicsReport {
        sup_gap,
        gaps,
        hj_residual_max,
        precondition_violated: hj_residual_max > HJ_PRECONDITION_TOL,
    })
}
