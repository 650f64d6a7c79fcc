//! Fixed-step RK4 and step-doubling adaptive integration of state fields,
//! with per-sample diagnostics evaluated from analytic identities rather
//! than trajectory differencing.

use crate::algebroid::{State, StateDerivative};
use crate::error::{CoreError, Result};

/// Any map state -> state derivative (Herglotz field, Hamilton field, ...).
pub type FieldFn<'a> = &'a dyn Fn(&State) -> Result<StateDerivative>;

/// A named per-sample scalar evaluated along the trajectory.
pub struct Diagnostic<'a> {
    pub name: String,
    pub eval: Box<dyn Fn(&State) -> Result<f64> + 'a>,
}

impl<'a> Diagnostic<'a> {
    pub fn new(name: impl Into<String>, eval: impl Fn(&State) -> Result<f64> + 'a) -> Self {
        Self {
            name: name.into(),
            eval: Box::new(eval),
        }
    }
}

/// Why an integration stopped early.
#[derive(Clone, Debug)]
pub struct IntegrationFailure {
    pub time: f64,
    pub reason: String,
}

/// Time-indexed states with diagnostic columns.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// One (name, values) column per requested diagnostic, aligned with `times`.
    pub diagnostics: Vec<(String, Vec<f64>)>,
    /// Set when the integration blew up or the field failed mid-run.
    pub failure: Option<IntegrationFailure>,
}

impl Trajectory {
    pub fn last_state(&self) -> &State {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }

    pub fn diagnostic(&self, name: &str) -> Option<&[f64]> {
        self.diagnostics
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

fn lin_comb(state: &State, coeffs: &[(f64, &StateDerivative)]) -> State {
    let mut out = state.clone();
    for (c, d) in coeffs {
        for (o, x) in out.q.iter_mut().zip(&d.dq) {
            *o += c * x;
        }
        for (o, x) in out.w.iter_mut().zip(&d.dw) {
            *o += c * x;
        }
        out.s += c * d.ds;
    }
    out
}

/// One classical RK4 step.
pub fn rk4_step(field: FieldFn, state: &State, h: f64) -> Result<State> {
    let k1 = field(state)?;
    let k2 = field(&lin_comb(state, &[(0.5 * h, &k1)]))?;
    let k3 = field(&lin_comb(state, &[(0.5 * h, &k2)]))?;
    let k4 = field(&lin_comb(state, &[(h, &k3)]))?;
    Ok(lin_comb(
        state,
        &[
            (h / 6.0, &k1),
            (h / 3.0, &k2),
            (h / 3.0, &k3),
            (h / 6.0, &k4),
        ],
    ))
}

struct Recorder<'a> {
    sample_every: usize,
    diagnostics: &'a [Diagnostic<'a>],
    traj: Trajectory,
}

impl<'a> Recorder<'a> {
    fn new(diagnostics: &'a [Diagnostic<'a>], sample_every: usize) -> Self {
        Self {
            sample_every: sample_every.max(1),
            diagnostics,
            traj: Trajectory {
                diagnostics: diagnostics
                    .iter()
                    .map(|d| (d.name.clone(), Vec::new()))
                    .collect(),
                ..Default::default()
            },
        }
    }

    fn record(&mut self, t: f64, state: &State) -> Result<()> {
        self.traj.times.push(t);
        self.traj.states.push(state.clone());
        for (d, (_, col)) in self
            .diagnostics
            .iter()
            .zip(self.traj.diagnostics.iter_mut())
        {
            col.push((d.eval)(state)?);
        }
        Ok(())
    }

    fn maybe_record(&mut self, step: usize, t: f64, state: &State, is_last: bool) -> Result<()> {
        if is_last || step % self.sample_every == 0 {
            self.record(t, state)?;
        }
        Ok(())
    }
}

/// Integrate with fixed-step RK4 from t = 0 to `t_end`; the final step is
/// shortened to land exactly on `t_end`. A non-finite state truncates the
/// trajectory and sets the failure flag instead of erroring.
pub fn integrate(
    field: FieldFn,
    state0: &State,
    t_end: f64,
    h: f64,
    sample_every: usize,
    diagnostics: &[Diagnostic],
) -> Result<Trajectory> {
    if h <= 0.0 || t_end <= 0.0 {
        return Err(CoreError::Invalid(
            "integration needs h > 0 and t_end > 0".into(),
        ));
    }
    let mut rec = Recorder::new(diagnostics, sample_every);
    rec.record(0.0, state0)?;

    let mut state = state0.clone();
    let mut k: usize = 0;
    loop {
        let t0 = k as f64 * h;
        if t0 >= t_end {
            break;
        }
        // The final step is shortened so the trajectory lands on t_end.
        let t1 = ((k + 1) as f64 * h).min(t_end);
        state = match rk4_step(field, &state, t1 - t0) {
            Ok(next) => next,
            Err(e) => {
                rec.traj.failure = Some(IntegrationFailure {
                    time: t0,
                    reason: e.to_string(),
                });
                return Ok(rec.traj);
            }
        };
        if !state.is_finite() {
            rec.traj.failure = Some(IntegrationFailure {
                time: t1,
                reason: "non-finite state (blow-up)".into(),
            });
            return Ok(rec.traj);
        }
        let is_last = t1 >= t_end;
        rec.maybe_record(k + 1, t1, &state, is_last)?;
        if is_last {
            break;
        }
        k += 1;
    }
    Ok(rec.traj)
}

fn max_state_diff(a: &State, b: &State) -> f64 {
    let mut worst = (a.s - b.s).abs();
    for (x, y) in a.q.iter().zip(&b.q).chain(a.w.iter().zip(&b.w)) {
        worst = worst.max((x - y).abs());
    }
    worst
}

/// Step-doubling adaptive RK4: each step is accepted when the Richardson
/// error estimate (full step vs two half steps, over 15) is below `tol`.
pub fn adaptive_integrate(
    field: FieldFn,
    state0: &State,
    t_end: f64,
    tol: f64,
    sample_every: usize,
    diagnostics: &[Diagnostic],
) -> Result<Trajectory> {
    if tol <= 0.0 || t_end <= 0.0 {
        return Err(CoreError::Invalid(
            "adaptive integration needs tol > 0 and t_end > 0".into(),
        ));
    }
    let min_step = t_end * 1e-13;
    let mut rec = Recorder::new(diagnostics, sample_every);
    rec.record(0.0, state0)?;

    let mut state = state0.clone();
    let mut t = 0.0;
    let mut h = (t_end / 16.0).min(0.1);
    let mut accepted: usize = 0;
    while t < t_end {
        if h < min_step {
            return Err(CoreError::Integration {
                time: t,
                reason: format!("adaptive step underflow (h = {:.3e})", h),
            });
        }
        let step_h = h.min(t_end - t);
        let full = rk4_step(field, &state, step_h)?;
        let half = rk4_step(field, &state, 0.5 * step_h)?;
        let double = rk4_step(field, &half, 0.5 * step_h)?;
        let err = max_state_diff(&full, &double) / 15.0;

        if err <= tol {
            t += step_h;
            state = double;
            if !state.is_finite() {
                rec.traj.failure = Some(IntegrationFailure {
                    time: t,
                    reason: "non-finite state (blow-up)".into(),
                });
                return Ok(rec.traj);
            }
            accepted += 1;
            rec.maybe_record(accepted, t, &state, t >= t_end)?;
        }

        let scale = if err == 0.0 {
            5.0
        } else {
            (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
        };
        h = step_h * scale;
    }
    Ok(rec.traj)
}
