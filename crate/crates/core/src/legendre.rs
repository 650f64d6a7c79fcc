//! Legendre transform between the two formalisms, the induced Hamiltonian
//! H = E_L o Leg^{-1}, and the trajectory-equivalence check.

use crate::algebroid::{Side, State};
use crate::dual::{Dual1, Dual2, Scalar};
use crate::error::{CoreError, EvalError, Result};
use crate::field::{Arity, DerivRequest, FieldBody, ScalarField};
use crate::hamiltonian::ContactHamiltonianSystem;
use crate::integrate::{integrate, Trajectory};
use crate::lagrangian::{factor_regular, ContactLagrangianSystem};
use crate::linalg::{Lu, Mat};
use std::sync::Arc;

/// Newton residual tolerance for fiber inversion.
pub const INVERSION_TOL: f64 = 1e-10;
const MAX_NEWTON_ITERS: usize = 50;
const MAX_HALVINGS: usize = 30;

/// The fiber map (q, y, s) -> (q, dL/dy, s); the side tag flips.
pub fn legendre_map(sys: &ContactLagrangianSystem, state: &State) -> Result<State> {
    if state.side != Side::Lagrangian {
        return Err(CoreError::WrongSide {
            expected: "lagrangian",
            got: state.side.name(),
        });
    }
    sys.model.check_state(state)?;
    let b = sys.lagrangian.bundle_at(
        state,
        &DerivRequest {
            grad_w: true,
            ..Default::default()
        },
    )?;
    Ok(State::hamiltonian(
        state.q.clone(),
        b.grad_w().to_vec(),
        state.s,
    ))
}

struct Inversion {
    y: Vec<f64>,
    /// W = d2L/dy dy factored at the solution.
    w_lu: Lu,
}

/// Damped Newton iteration on dL/dy = p at fixed (q, s).
fn invert_fiber(
    sys: &ContactLagrangianSystem,
    q: &[f64],
    p: &[f64],
    s: f64,
    guess: &[f64],
) -> Result<Inversion> {
    let grad_req = DerivRequest {
        grad_w: true,
        ..Default::default()
    };
    let full_req = DerivRequest {
        grad_w: true,
        hess_ww: true,
        ..Default::default()
    };
    let residual_at = |y: &[f64]| -> Result<f64> {
        let b = sys.lagrangian.bundle(q, y, s, &grad_req)?;
        Ok(b.grad_w()
            .iter()
            .zip(p)
            .map(|(g, pi)| (g - pi).abs())
            .fold(0.0, f64::max))
    };

    let mut y = guess.to_vec();
    let mut residual = residual_at(&y)?;
    for iteration in 0..MAX_NEWTON_ITERS {
        if residual < INVERSION_TOL {
            let b = sys.lagrangian.bundle(q, &y, s, &full_req)?;
            let (lu, _) = factor_regular(b.hess_ww())?;
            return Ok(Inversion { y, w_lu: lu });
        }
        let b = sys.lagrangian.bundle(q, &y, s, &full_req)?;
        let f: Vec<f64> = b.grad_w().iter().zip(p).map(|(g, pi)| g - pi).collect();
        let (lu, _) = factor_regular(b.hess_ww())?;
        let step = lu
            .solve(&f)
            .ok_or(CoreError::SingularHessian { det: lu.det() })?;

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = y
                .iter()
                .zip(&step)
                .map(|(yi, si)| yi - scale * si)
                .collect();
            let trial_res = residual_at(&trial)?;
            if trial_res < residual {
                y = trial;
                residual = trial_res;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(CoreError::NewtonDivergence {
                iterations: iteration + 1,
                residual,
            });
        }
    }
    if residual < INVERSION_TOL {
        let b = sys.lagrangian.bundle(q, &y, s, &full_req)?;
        let (lu, _) = factor_regular(b.hess_ww())?;
        return Ok(Inversion { y, w_lu: lu });
    }
    Err(CoreError::NewtonDivergence {
        iterations: MAX_NEWTON_ITERS,
        residual,
    })
}

/// Invert the Legendre map at a Hamiltonian state. The default initial
/// guess is y = p, exact for a unit-mass quadratic Lagrangian.
pub fn legendre_inverse(
    sys: &ContactLagrangianSystem,
    state: &State,
    guess: Option<&[f64]>,
) -> Result<State> {
    if state.side != Side::Hamiltonian {
        return Err(CoreError::WrongSide {
            expected: "hamiltonian",
            got: state.side.name(),
        });
    }
    sys.model.check_state(state)?;
    let guess = guess.unwrap_or(&state.w);
    let inv = invert_fiber(sys, &state.q, &state.w, state.s, guess)?;
    Ok(State::lagrangian(state.q.clone(), inv.y, state.s))
}

/// H = E_L o Leg^{-1}, evaluated through the Newton inversion with
/// derivatives from the implicit-function rule (the factored W is reused,
/// no iteration is ever differentiated).
struct InducedHamiltonian {
    sys: ContactLagrangianSystem,
}

struct FirstOrder {
    value: f64,
    /// Gradient in the coordinate order (q_1..q_n, p_1..p_m, s).
    grad: Vec<f64>,
    y: Vec<f64>,
    w_lu: Lu,
}

impl InducedHamiltonian {
    fn first_order(&self, q: &[f64], p: &[f64], s: f64) -> Result<FirstOrder, EvalError> {
        let to_eval = |e: CoreError| -> EvalError {
            match e {
                CoreError::Eval(inner) => inner,
                other => EvalError {
                    kind: crate::error::DomainErrorKind::NonFinite,
                    at: format!("induced Hamiltonian: {}", other),
                },
            }
        };
        let inv = invert_fiber(&self.sys, q, p, s, p).map_err(to_eval)?;
        let b = self
            .sys
            .lagrangian
            .bundle(
                q,
                &inv.y,
                s,
                &DerivRequest {
                    grad_q: true,
                    d_s: true,
                    ..Default::default()
                },
            )
            .map_err(to_eval)?;
        // H = p y* - L; dH/dq = -L_q, dH/dp = y*, dH/ds = -L_s.
        let value = inv.y.iter().zip(p).map(|(y, pi)| y * pi).sum::<f64>() - b.value;
        let mut grad = Vec::with_capacity(q.len() + p.len() + 1);
        grad.extend(b.grad_q().iter().map(|g| -g));
        grad.extend(inv.y.iter().copied());
        grad.push(-b.d_s());
        Ok(FirstOrder {
            value,
            grad,
            y: inv.y,
            w_lu: inv.w_lu,
        })
    }

    /// Full Hessian of H in the coordinate order (q, p, s), from the
    /// implicit rule: with P = W^{-1},
    ///   H_pp = P, H_qp = -P L_qy, H_sp = -P L_sy,
    ///   H_qq = -L_qq + L_qy^T P L_qy, and similarly for the s blocks.
    fn hessian(&self, q: &[f64], p: &[f64], s: f64, first: &FirstOrder) -> Result<Mat, EvalError> {
        let to_eval = |e: CoreError| -> EvalError {
            match e {
                CoreError::Eval(inner) => inner,
                other => EvalError {
                    kind: crate::error::DomainErrorKind::NonFinite,
                    at: format!("induced Hamiltonian: {}", other),
                },
            }
        };
        let n = q.len();
        let m = p.len();
        let y = &first.y;

        // Full second-derivative data of L at (q, y*, s).
        let lag = &self.sys.lagrangian;
        let b = lag
            .bundle(
                q,
                y,
                s,
                &DerivRequest {
                    hess_ww: true,
                    mixed_qw: true,
                    mixed_sw: true,
                    ..Default::default()
                },
            )
            .map_err(to_eval)?;
        let l_qy = b.mixed_qw();
        let l_sy = b.mixed_sw();

        // Blocks not on the standard request list, via seeded evaluation.
        let second = |inner: usize, outer: usize| -> Result<f64, EvalError> {
            // Coordinate slots: 0..n are q, n+m is s (w untouched here).
            let seed = |idx: usize, x: f64| -> Dual2 {
                Dual2::new(
                    Dual1::new(x, if idx == inner { 1.0 } else { 0.0 }),
                    Dual1::new(if idx == outer { 1.0 } else { 0.0 }, 0.0),
                )
            };
            let qd: Vec<Dual2> = q.iter().enumerate().map(|(i, &x)| seed(i, x)).collect();
            let wd: Vec<Dual2> = y.iter().map(|&x| Dual2::from_f64(x)).collect();
            let sd = seed(n, s);
            Ok(lag.eval_at(&qd, &wd, sd).map_err(to_eval)?.du.du)
        };
        let mut l_qq = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = second(i, j)?;
                l_qq[(i, j)] = v;
                l_qq[(j, i)] = v;
            }
        }
        let l_qs: Vec<f64> = (0..n).map(|i| second(i, n)).collect::<Result<_, _>>()?;
        let l_ss = second(n, n)?;

        let pmat = first.w_lu.inverse().ok_or_else(|| EvalError {
            kind: crate::error::DomainErrorKind::NonFinite,
            at: "induced Hamiltonian: singular W at the inversion point".into(),
        })?;
        // P L_qy^T columns: v_i = P * L_qy[i, :].
        let p_lqy: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let col: Vec<f64> = (0..m).map(|a| l_qy[(i, a)]).collect();
                pmat.matvec(&col)
            })
            .collect();
        let p_lsy = pmat.matvec(l_sy);

        let dim = n + m + 1;
        let mut h = Mat::zeros(dim, dim);
        // qq block.
        for i in 0..n {
            for j in 0..n {
                let corr: f64 = (0..m).map(|a| l_qy[(i, a)] * p_lqy[j][a]).sum();
                h[(i, j)] = -l_qq[(i, j)] + corr;
            }
        }
        // qp and pq blocks.
        for i in 0..n {
            for a in 0..m {
                let v = -p_lqy[i][a];
                h[(i, n + a)] = v;
                h[(n + a, i)] = v;
            }
        }
        // pp block.
        for a in 0..m {
            for bb in 0..m {
                h[(n + a, n + bb)] = pmat[(a, bb)];
            }
        }
        // s row/column.
        for a in 0..m {
            let v = -p_lsy[a];
            h[(n + a, n + m)] = v;
            h[(n + m, n + a)] = v;
        }
        for i in 0..n {
            let corr: f64 = (0..m).map(|a| l_qy[(i, a)] * p_lsy[a]).sum();
            let v = -l_qs[i] + corr;
            h[(i, n + m)] = v;
            h[(n + m, i)] = v;
        }
        let corr: f64 = (0..m).map(|a| l_sy[a] * p_lsy[a]).sum();
        h[(n + m, n + m)] = -l_ss + corr;
        Ok(h)
    }
}

impl FieldBody for InducedHamiltonian {
    fn eval_f64(&self, q: &[f64], w: &[f64], s: f64) -> Result<f64, EvalError> {
        Ok(self.first_order(q, w, s)?.value)
    }

    fn eval_dual(&self, q: &[Dual1], w: &[Dual1], s: Dual1) -> Result<Dual1, EvalError> {
        let q0: Vec<f64> = q.iter().map(|d| d.re).collect();
        let p0: Vec<f64> = w.iter().map(|d| d.re).collect();
        let first = self.first_order(&q0, &p0, s.re)?;
        let dir: Vec<f64> = q
            .iter()
            .map(|d| d.du)
            .chain(w.iter().map(|d| d.du))
            .chain(std::iter::once(s.du))
            .collect();
        let slope: f64 = first.grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        Ok(Dual1::new(first.value, slope))
    }

    fn eval_dual2(&self, q: &[Dual2], w: &[Dual2], s: Dual2) -> Result<Dual2, EvalError> {
        let q0: Vec<f64> = q.iter().map(|d| d.re.re).collect();
        let p0: Vec<f64> = w.iter().map(|d| d.re.re).collect();
        let first = self.first_order(&q0, &p0, s.re.re)?;
        let hess = self.hessian(&q0, &p0, s.re.re, &first)?;

        let inner: Vec<f64> = q
            .iter()
            .map(|d| d.re.du)
            .chain(w.iter().map(|d| d.re.du))
            .chain(std::iter::once(s.re.du))
            .collect();
        let outer: Vec<f64> = q
            .iter()
            .map(|d| d.du.re)
            .chain(w.iter().map(|d| d.du.re))
            .chain(std::iter::once(s.du.re))
            .collect();
        let cross: Vec<f64> = q
            .iter()
            .map(|d| d.du.du)
            .chain(w.iter().map(|d| d.du.du))
            .chain(std::iter::once(s.du.du))
            .collect();

        let g = &first.grad;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut curvature = dot(g, &cross);
        for (i, &ai) in inner.iter().enumerate() {
            if ai != 0.0 {
                for (j, &bj) in outer.iter().enumerate() {
                    curvature += ai * hess[(i, j)] * bj;
                }
            }
        }
        Ok(Dual2::new(
            Dual1::new(first.value, dot(g, &inner)),
            Dual1::new(dot(g, &outer), curvature),
        ))
    }

    fn describe(&self) -> String {
        format!("E_L o Leg^-1 of ({})", self.sys.lagrangian.describe())
    }
}

/// The Hamiltonian system induced by a hyperregular Lagrangian.
pub fn induced_hamiltonian(sys: &ContactLagrangianSystem) -> ContactHamiltonianSystem {
    let arity = Arity::new(sys.model.n(), sys.model.m());
    let field = ScalarField::from_body(Arc::new(InducedHamiltonian { sys: sys.clone() }), arity);
    ContactHamiltonianSystem::new(sys.model.clone(), field)
        .expect("induced Hamiltonian inherits the model dimensions")
}

/// Per-time gaps between the pushed-forward Herglotz trajectory and the
/// contact Hamilton trajectory of the induced Hamiltonian.
#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub sup_gap: f64,
    pub gaps: Vec<(f64, f64)>,
}

/// Integrate both flows with identical RK4 settings and compare
/// Leg(c(t)) against sigma(t) in the max norm at every sample.
pub fn equivalence_check(
    sys: &ContactLagrangianSystem,
    state0: &State,
    t_end: f64,
    h: f64,
    sample_every: usize,
) -> Result<EquivalenceReport> {
    let ham = induced_hamiltonian(sys);
    let herglotz = |st: &State| sys.herglotz_field(st);
    let hamilton = |st: &State| ham.hamilton_field(st);

    let lag_traj = integrate(&herglotz, state0, t_end, h, sample_every, &[])?;
    fail_on_truncation(&lag_traj, "Herglotz")?;
    let h_start = legendre_map(sys, state0)?;
    let ham_traj = integrate(&hamilton, &h_start, t_end, h, sample_every, &[])?;
    fail_on_truncation(&ham_traj, "contact Hamilton")?;

    let mut gaps = Vec::with_capacity(lag_traj.times.len());
    let mut sup_gap: f64 = 0.0;
    for (idx, (&t, lag_state)) in lag_traj.times.iter().zip(&lag_traj.states).enumerate() {
        let pushed = legendre_map(sys, lag_state)?;
        let sigma = &ham_traj.states[idx];
        let mut gap = (pushed.s - sigma.s).abs();
        for (a, b) in pushed
            .q
            .iter()
            .zip(&sigma.q)
            .chain(pushed.w.iter().zip(&sigma.w))
        {
            gap = gap.max((a - b).abs());
        }
        sup_gap = sup_gap.max(gap);
        gaps.push((t, gap));
    }
    Ok(EquivalenceReport { sup_gap, gaps })
}

fn fail_on_truncation(traj: &Trajectory, which: &str) -> Result<()> {
    if let Some(f) = &traj.failure {
        return Err(CoreError::Integration {
            time: f.time,
            reason: format!("{} flow: {}", which, f.reason),
        });
    }
    Ok(())
}
