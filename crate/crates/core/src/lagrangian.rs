//! Contact Lagrangian dynamics on an algebroid: energy, regularity, the
//! Reeb section, the Herglotz section and the residuals of its defining
//! contact equations.

use crate::algebroid::{AlgebroidModel, Side, State, StateDerivative};
use crate::error::{CoreError, Result};
use crate::field::{DerivRequest, ScalarField};
use crate::linalg::{Lu, Mat};

/// |det W| must exceed this factor times (max |W entry|)^m.
pub const REGULARITY_DET_FACTOR: f64 = 1e-12;
/// Condition estimates above this cap count as non-regular.
pub const CONDITION_CAP: f64 = 1e12;

/// Components of a section of the prolongation in the local basis
/// {X_alpha, V_alpha, V_s} (or its dual, for covectors).
#[derive(Clone, Debug, PartialEq)]
pub struct ProlongationComponents {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub s: f64,
}

impl ProlongationComponents {
    pub fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .chain(self.v.iter())
            .fold(self.s.abs(), |acc, t| acc.max(t.abs()))
    }
}

/// Components of the contact 1-section and its exterior differential in
/// the coframe {X^a, V^a, V^s}.
///
/// `deta_xx` is stored antisymmetrized; `deta_xv[(a, b)]` multiplies
/// X^a ∧ V^b and `deta_xs[a]` multiplies X^a ∧ V^s.
#[derive(Clone, Debug)]
pub struct CoframeComponents {
    pub eta_x: Vec<f64>,
    pub eta_v: Vec<f64>,
    pub eta_s: f64,
    pub deta_xx: Mat,
    pub deta_xv: Mat,
    pub deta_xs: Vec<f64>,
}

impl CoframeComponents {
    /// i_Z eta for a section Z.
    pub fn contract_eta(&self, z: &ProlongationComponents) -> f64 {
        let mut acc = self.eta_s * z.s;
        for a in 0..self.eta_x.len() {
            acc += self.eta_x[a] * z.x[a] + self.eta_v[a] * z.v[a];
        }
        acc
    }

    /// Components of i_Z (d eta), using (u ∧ w)(Z1, Z2) = u(Z1)w(Z2) - u(Z2)w(Z1).
    pub fn contract_deta(&self, z: &ProlongationComponents) -> ProlongationComponents {
        let m = self.eta_x.len();
        let mut on_x = vec![0.0; m];
        let mut on_v = vec![0.0; m];
        let mut on_s = 0.0;
        for nu in 0..m {
            let mut acc = 0.0;
            for a in 0..m {
                acc += 2.0 * self.deta_xx[(a, nu)] * z.x[a];
            }
            for b in 0..m {
                acc -= self.deta_xv[(nu, b)] * z.v[b];
            }
            acc -= self.deta_xs[nu] * z.s;
            on_x[nu] = acc;
            on_v[nu] = (0..m).map(|a| self.deta_xv[(a, nu)] * z.x[a]).sum();
        }
        for a in 0..m {
            on_s += self.deta_xs[a] * z.x[a];
        }
        ProlongationComponents {
            x: on_x,
            v: on_v,
            s: on_s,
        }
    }
}

/// Regularity report for the fiber Hessian W.
#[derive(Clone, Copy, Debug)]
pub struct Regularity {
    pub det: f64,
    pub condition: f64,
    pub is_regular: bool,
}

/// Reeb-section data: R_L = V_s + v^alpha V_alpha.
#[derive(Clone, Debug)]
pub struct ReebCoeffs {
    /// Fiber coefficients v^alpha.
    pub v: Vec<f64>,
    /// The scalar rho^pi(R_L)(E_L) entering the defining equations;
    /// analytically equal to -dL/ds.
    pub energy_rate: f64,
    /// i_{R_L} eta_L, which must be 1.
    pub eta_contraction: f64,
    /// max |i_{R_L} d eta_L| over the coframe components, which must vanish.
    pub deta_contraction_max: f64,
}

/// Residuals of the defining contact equations for a candidate section.
#[derive(Clone, Debug)]
pub struct SectionResiduals {
    /// i_Gamma eta + E (scalar equation).
    pub r1: f64,
    /// i_Gamma d(eta) - dE + rho(R)(E) eta, componentwise.
    pub r2: ProlongationComponents,
}

impl SectionResiduals {
    pub fn max_abs(&self) -> f64 {
        self.r1.abs().max(self.r2.max_abs())
    }
}

/// Everything the per-state formulas consume, evaluated once.
pub(crate) struct PointData {
    pub value: f64,
    pub grad_q: Vec<f64>,
    pub grad_w: Vec<f64>,
    pub d_s: f64,
    pub hess_ww: Mat,
    pub mixed_qw: Mat,
    pub mixed_sw: Vec<f64>,
    pub rho: Vec<f64>,
    pub c: Vec<f64>,
    pub n: usize,
    pub m: usize,
}

impl PointData {
    pub fn rho_at(&self, i: usize, a: usize) -> f64 {
        self.rho[i * self.m + a]
    }

    pub fn c_at(&self, g: usize, a: usize, b: usize) -> f64 {
        self.c[(g * self.m + a) * self.m + b]
    }
}

pub(crate) fn point_data(
    model: &AlgebroidModel,
    field: &ScalarField,
    state: &State,
) -> Result<PointData> {
    model.check_state(state)?;
    let bundle = field.bundle_at(state, &DerivRequest::all())?;
    Ok(PointData {
        value: bundle.value,
        grad_q: bundle.grad_q.unwrap(),
        grad_w: bundle.grad_w.unwrap(),
        d_s: bundle.d_s.unwrap(),
        hess_ww: bundle.hess_ww.unwrap(),
        mixed_qw: bundle.mixed_qw.unwrap(),
        mixed_sw: bundle.mixed_sw.unwrap(),
        rho: model.anchor_at(&state.q)?,
        c: model.structure_at(&state.q)?,
        n: model.n(),
        m: model.m(),
    })
}

/// A contact Lagrangian system (model, L).
#[derive(Clone, Debug)]
pub struct ContactLagrangianSystem {
    pub model: AlgebroidModel,
    pub lagrangian: ScalarField,
}

impl ContactLagrangianSystem {
    pub fn new(model: AlgebroidModel, lagrangian: ScalarField) -> Result<Self> {
        if lagrangian.arity().n != model.n() || lagrangian.arity().m != model.m() {
            return Err(CoreError::Invalid(format!(
                "Lagrangian arity ({}, {}) does not match the model ({}, {})",
                lagrangian.arity().n,
                lagrangian.arity().m,
                model.n(),
                model.m()
            )));
        }
        Ok(Self { model, lagrangian })
    }

    fn check_side(&self, state: &State) -> Result<()> {
        if state.side != Side::Lagrangian {
            return Err(CoreError::WrongSide {
                expected: "lagrangian",
                got: state.side.name(),
            });
        }
        Ok(())
    }

    pub(crate) fn data(&self, state: &State) -> Result<PointData> {
        self.check_side(state)?;
        point_data(&self.model, &self.lagrangian, state)
    }

    /// Lagrangian energy E_L = y^a dL/dy^a - L.
    pub fn energy(&self, state: &State) -> Result<f64> {
        self.check_side(state)?;
        self.model.check_state(state)?;
        let b = self.lagrangian.bundle_at(
            state,
            &DerivRequest {
                grad_w: true,
                ..Default::default()
            },
        )?;
        let gw = b.grad_w();
        Ok(state.w.iter().zip(gw).map(|(y, g)| y * g).sum::<f64>() - b.value)
    }

    /// Determinant and conditioning of W = d2L/dy dy at the state.
    pub fn regularity(&self, state: &State) -> Result<Regularity> {
        self.check_side(state)?;
        self.model.check_state(state)?;
        let b = self.lagrangian.bundle_at(
            state,
            &DerivRequest {
                hess_ww: true,
                ..Default::default()
            },
        )?;
        let w = b.hess_ww();
        Ok(regularity_of(w))
    }

    /// Reeb coefficients and the contraction self-check.
    pub fn reeb_coeffs(&self, state: &State) -> Result<ReebCoeffs> {
        let d = self.data(state)?;
        let (lu, _) = factor_regular(&d.hess_ww)?;
        let v = lu
            .solve(&d.mixed_sw)
            .ok_or(CoreError::SingularHessian { det: lu.det() })?
            .iter()
            .map(|x| -x)
            .collect::<Vec<_>>();

        // rho^pi(R_L)(E_L) = dE/ds + v^a dE/dy^a.
        let de_ds = dot(&state.w, &d.mixed_sw) - d.d_s;
        let de_dy = hess_vec(&d.hess_ww, &state.w);
        let energy_rate = de_ds + dot(&v, &de_dy);

        let coframe = coframe_of(&d);
        let section = ProlongationComponents {
            x: vec![0.0; d.m],
            v: v.clone(),
            s: 1.0,
        };
        let eta_contraction = coframe.contract_eta(&section);
        let deta_contraction_max = coframe.contract_deta(&section).max_abs();

        Ok(ReebCoeffs {
            v,
            energy_rate,
            eta_contraction,
            deta_contraction_max,
        })
    }

    /// Components of eta_L and d(eta_L) at the state.
    pub fn coframe(&self, state: &State) -> Result<CoframeComponents> {
        let d = self.data(state)?;
        Ok(coframe_of(&d))
    }

    /// The Herglotz section evaluated as a state derivative:
    /// dq = rho y, dy solves the Herglotz linear system, ds = L.
    pub fn herglotz_field(&self, state: &State) -> Result<StateDerivative> {
        let d = self.data(state)?;
        let (lu, _) = factor_regular(&d.hess_ww)?;
        let rhs = herglotz_rhs(&d, &state.w);
        let dw = lu
            .solve(&rhs)
            .ok_or(CoreError::SingularHessian { det: lu.det() })?;
        Ok(StateDerivative {
            dq: anchor_apply(&d, &state.w),
            dw,
            ds: d.value,
        })
    }

    /// Residuals of the defining equations for the solved Herglotz section.
    pub fn verify_section(&self, state: &State) -> Result<SectionResiduals> {
        let field = self.herglotz_field(state)?;
        let section = ProlongationComponents {
            x: state.w.clone(),
            v: field.dw,
            s: field.ds,
        };
        self.verify_components(state, &section)
    }

    /// Residuals of the defining equations for an arbitrary candidate
    /// section (used by perturbation controls).
    pub fn verify_components(
        &self,
        state: &State,
        section: &ProlongationComponents,
    ) -> Result<SectionResiduals> {
        let d = self.data(state)?;
        let energy = dot(&state.w, &d.grad_w) - d.value;
        let reeb = self.reeb_coeffs(state)?;
        let coframe = coframe_of(&d);

        let r1 = coframe.contract_eta(section) + energy;

        // dE_L in the coframe.
        let de_q: Vec<f64> = (0..d.n)
            .map(|i| {
                (0..d.m)
                    .map(|b| state.w[b] * d.mixed_qw[(i, b)])
                    .sum::<f64>()
                    - d.grad_q[i]
            })
            .collect();
        let de = ProlongationComponents {
            x: (0..d.m)
                .map(|a| (0..d.n).map(|i| d.rho_at(i, a) * de_q[i]).sum())
                .collect(),
            v: hess_vec(&d.hess_ww, &state.w),
            s: dot(&state.w, &d.mixed_sw) - d.d_s,
        };

        let contracted = coframe.contract_deta(section);
        let r2 = ProlongationComponents {
            x: (0..d.m)
                .map(|a| contracted.x[a] - de.x[a] + reeb.energy_rate * coframe.eta_x[a])
                .collect(),
            v: (0..d.m)
                .map(|a| contracted.v[a] - de.v[a] + reeb.energy_rate * coframe.eta_v[a])
                .collect(),
            s: contracted.s - de.s + reeb.energy_rate * coframe.eta_s,
        };

        Ok(SectionResiduals { r1, r2 })
    }

    /// Chain-rule rate of E_L along the Herglotz field; the contact
    /// analogue of energy dissipation predicts -energy_rate * E_L.
    pub fn energy_dissipation_residual(&self, state: &State) -> Result<f64> {
        let d = self.data(state)?;
        let field = self.herglotz_field(state)?;
        let reeb = self.reeb_coeffs(state)?;
        let energy = dot(&state.w, &d.grad_w) - d.value;

        let de_q: Vec<f64> = (0..d.n)
            .map(|i| {
                (0..d.m)
                    .map(|b| state.w[b] * d.mixed_qw[(i, b)])
                    .sum::<f64>()
                    - d.grad_q[i]
            })
            .collect();
        let de_y = hess_vec(&d.hess_ww, &state.w);
        let de_s = dot(&state.w, &d.mixed_sw) - d.d_s;

        let rate = dot(&de_q, &field.dq) + dot(&de_y, &field.dw) + de_s * field.ds;
        Ok(rate + reeb.energy_rate * energy)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn hess_vec(w: &Mat, y: &[f64]) -> Vec<f64> {
    (0..w.cols())
        .map(|a| (0..w.rows()).map(|b| y[b] * w[(b, a)]).sum())
        .collect()
}

pub(crate) fn anchor_apply(d: &PointData, w: &[f64]) -> Vec<f64> {
    (0..d.n)
        .map(|i| (0..d.m).map(|a| d.rho_at(i, a) * w[a]).sum())
        .collect()
}

pub(crate) fn regularity_of(w: &Mat) -> Regularity {
    let lu = Lu::factor(w);
    let det = lu.det();
    let scale = w.max_abs();
    let threshold = REGULARITY_DET_FACTOR * scale.powi(w.rows() as i32);
    let condition = lu.condition_estimate(w);
    Regularity {
        det,
        condition,
        is_regular: det.abs() > threshold && condition < CONDITION_CAP,
    }
}

pub(crate) fn factor_regular(w: &Mat) -> Result<(Lu, Regularity)> {
    let reg = regularity_of(w);
    if !reg.is_regular {
        return Err(CoreError::SingularHessian { det: reg.det });
    }
    Ok((Lu::factor(w), reg))
}

fn coframe_of(d: &PointData) -> CoframeComponents {
    let m = d.m;
    let mut xx = Mat::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            let mut acc = 0.0;
            for i in 0..d.n {
                acc += 0.5
                    * (d.rho_at(i, b) * d.mixed_qw[(i, a)] - d.rho_at(i, a) * d.mixed_qw[(i, b)]);
            }
            for g in 0..m {
                acc += 0.5 * d.c_at(g, a, b) * d.grad_w[g];
            }
            xx[(a, b)] = acc;
        }
    }
    CoframeComponents {
        eta_x: d.grad_w.iter().map(|x| -x).collect(),
        eta_v: vec![0.0; m],
        eta_s: 1.0,
        deta_xx: xx,
        deta_xv: d.hess_ww.clone(),
        deta_xs: d.mixed_sw.clone(),
    }
}

/// Right-hand side of the Herglotz linear system W B = rhs.
fn herglotz_rhs(d: &PointData, y: &[f64]) -> Vec<f64> {
    let (n, m) = (d.n, d.m);
    (0..m)
        .map(|a| {
            let mut acc = 0.0;
            for i in 0..n {
                acc += d.rho_at(i, a) * d.grad_q[i];
            }
            for b in 0..m {
                for g in 0..m {
                    acc -= y[b] * d.c_at(g, a, b) * d.grad_w[g];
                }
            }
            acc += d.grad_w[a] * d.d_s;
            for b in 0..m {
                for i in 0..n {
                    acc -= y[b] * d.rho_at(i, b) * d.mixed_qw[(i, a)];
                }
            }
            acc -= d.value * d.mixed_sw[a];
            acc
        })
        .collect()
}
