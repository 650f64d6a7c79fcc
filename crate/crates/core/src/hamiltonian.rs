//! Contact Hamiltonian and evolution dynamics on the dual bundle, the
//! dissipation identity, and verification of the defining equations.

use crate::algebroid::{AlgebroidModel, Side, State, StateDerivative};
use crate::error::{CoreError, Result};
use crate::field::{DerivRequest, ScalarField};
use crate::lagrangian::{dot, CoframeComponents, ProlongationComponents, SectionResiduals};
use crate::linalg::Mat;

/// First-derivative data of H plus the chart fields; the Hamiltonian
/// formalism never needs second derivatives.
struct GradData {
    value: f64,
    grad_q: Vec<f64>,
    grad_w: Vec<f64>,
    d_s: f64,
    rho: Vec<f64>,
    c: Vec<f64>,
    n: usize,
    m: usize,
}

impl GradData {
    fn rho_at(&self, i: usize, a: usize) -> f64 {
        self.rho[i * self.m + a]
    }

    fn c_at(&self, g: usize, a: usize, b: usize) -> f64 {
        self.c[(g * self.m + a) * self.m + b]
    }

    fn anchor_apply(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.m).map(|a| self.rho_at(i, a) * w[a]).sum())
            .collect()
    }
}

/// A contact Hamiltonian system (model, H) on E* x R.
#[derive(Clone, Debug)]
pub struct ContactHamiltonianSystem {
    pub model: AlgebroidModel,
    pub hamiltonian: ScalarField,
}

impl ContactHamiltonianSystem {
    pub fn new(model: AlgebroidModel, hamiltonian: ScalarField) -> Result<Self> {
        if hamiltonian.arity().n != model.n() || hamiltonian.arity().m != model.m() {
            return Err(CoreError::Invalid(format!(
                "Hamiltonian arity ({}, {}) does not match the model ({}, {})",
                hamiltonian.arity().n,
                hamiltonian.arity().m,
                model.n(),
                model.m()
            )));
        }
        Ok(Self { model, hamiltonian })
    }

    fn check_side(&self, state: &State) -> Result<()> {
        if state.side != Side::Hamiltonian {
            return Err(CoreError::WrongSide {
                expected: "hamiltonian",
                got: state.side.name(),
            });
        }
        Ok(())
    }

    fn data(&self, state: &State) -> Result<GradData> {
        self.check_side(state)?;
        self.model.check_state(state)?;
        let b = self
            .hamiltonian
            .bundle_at(state, &DerivRequest::gradients())?;
        Ok(GradData {
            value: b.value,
            grad_q: b.grad_q.unwrap(),
            grad_w: b.grad_w.unwrap(),
            d_s: b.d_s.unwrap(),
            rho: self.model.anchor_at(&state.q)?,
            c: self.model.structure_at(&state.q)?,
            n: self.model.n(),
            m: self.model.m(),
        })
    }

    /// Fiber components of the Hamiltonian section xi_H:
    ///   dq^i  =  rho^i_a dH/dp_a
    ///   dp_a  = -(rho^i_a dH/dq^i + C^g_{ab} p_g dH/dp_b + p_a dH/ds)
    ///   ds    =  p_a dH/dp_a - H.
    pub fn hamilton_field(&self, state: &State) -> Result<StateDerivative> {
        let d = self.data(state)?;
        let dp = momentum_equation(&d, &state.w);
        Ok(StateDerivative {
            dq: d.anchor_apply(&d.grad_w),
            dw: dp,
            ds: dot(&state.w, &d.grad_w) - d.value,
        })
    }

    /// The evolution section: same q and p dynamics, ds = p_a dH/dp_a.
    /// Built as the Hamiltonian section shifted by H along V_s, so the
    /// relation F_evolution - F_xi = (0, 0, H) holds identically.
    pub fn evolution_field(&self, state: &State) -> Result<StateDerivative> {
        let d = self.data(state)?;
        let dp = momentum_equation(&d, &state.w);
        let ds_hamilton = dot(&state.w, &d.grad_w) - d.value;
        Ok(StateDerivative {
            dq: d.anchor_apply(&d.grad_w),
            dw: dp,
            ds: ds_hamilton + d.value,
        })
    }

    /// Predicted rate of H along xi_H: -(dH/ds) H. The structure-function
    /// term cancels against the symmetric product dH/dp_a dH/dp_b.
    pub fn dissipation_rate(&self, state: &State) -> Result<f64> {
        self.check_side(state)?;
        self.model.check_state(state)?;
        let b = self.hamiltonian.bundle_at(
            state,
            &DerivRequest {
                d_s: true,
                ..Default::default()
            },
        )?;
        Ok(-b.d_s() * b.value)
    }

    /// Chain-rule rate of H along xi_H minus the predicted dissipation;
    /// vanishes identically and is exposed as a trajectory diagnostic.
    pub fn dissipation_residual(&self, state: &State) -> Result<f64> {
        let d = self.data(state)?;
        let field = self.hamilton_field(state)?;
        let rate = dot(&d.grad_q, &field.dq) + dot(&d.grad_w, &field.dw) + d.d_s * field.ds;
        Ok(rate + d.d_s * d.value)
    }

    /// Components of the contact section eta = V^s - p_a X^a and of
    /// d(eta) at the state.
    pub fn coframe(&self, state: &State) -> Result<CoframeComponents> {
        let d = self.data(state)?;
        Ok(coframe_of(&d, &state.w))
    }

    /// Residuals of the defining equations for the solved section xi_H.
    pub fn verify_section(&self, state: &State) -> Result<SectionResiduals> {
        let d = self.data(state)?;
        let section = ProlongationComponents {
            v: momentum_equation(&d, &state.w),
            s: dot(&state.w, &d.grad_w) - d.value,
            x: d.grad_w,
        };
        self.verify_components(state, &section)
    }

    /// Residuals for an arbitrary candidate section (perturbation controls).
    pub fn verify_components(
        &self,
        state: &State,
        section: &ProlongationComponents,
    ) -> Result<SectionResiduals> {
        let d = self.data(state)?;
        let coframe = coframe_of(&d, &state.w);

        let r1 = coframe.contract_eta(section) + d.value;

        // dH in the coframe; the Reeb section is V_s, so rho(R)(H) = dH/ds.
        let dh = ProlongationComponents {
            x: (0..d.m)
                .map(|a| (0..d.n).map(|i| d.rho_at(i, a) * d.grad_q[i]).sum())
                .collect(),
            v: d.grad_w.clone(),
            s: d.d_s,
        };
        let reeb_rate = d.d_s;

        let contracted = coframe.contract_deta(section);
        let r2 = ProlongationComponents {
            x: (0..d.m)
                .map(|a| contracted.x[a] - dh.x[a] + reeb_rate * coframe.eta_x[a])
                .collect(),
            v: (0..d.m)
                .map(|a| contracted.v[a] - dh.v[a] + reeb_rate * coframe.eta_v[a])
                .collect(),
            s: contracted.s - dh.s + reeb_rate * coframe.eta_s,
        };

        Ok(SectionResiduals { r1, r2 })
    }
}

fn momentum_equation(d: &GradData, p: &[f64]) -> Vec<f64> {
    let (n, m) = (d.n, d.m);
    (0..m)
        .map(|a| {
            let mut acc = 0.0;
            for i in 0..n {
                acc += d.rho_at(i, a) * d.grad_q[i];
            }
            for g in 0..m {
                for b in 0..m {
                    acc += d.c_at(g, a, b) * p[g] * d.grad_w[b];
                }
            }
            acc += p[a] * d.d_s;
            -acc
        })
        .collect()
}

fn coframe_of(d: &GradData, p: &[f64]) -> CoframeComponents {
    let m = d.m;
    let mut xx = Mat::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            xx[(a, b)] = 0.5 * (0..m).map(|g| d.c_at(g, a, b) * p[g]).sum::<f64>();
        }
    }
    CoframeComponents {
        eta_x: p.iter().map(|x| -x).collect(),
        eta_v: vec![0.0; m],
        eta_s: 1.0,
        deta_xx: xx,
        deta_xv: Mat::identity(m),
        deta_xs: vec![0.0; m],
    }
}
