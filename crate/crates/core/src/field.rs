//! Scalar fields on (q, w, s) with machine-exact first and second partials.
//!
//! Derivatives come from nested dual numbers, so no step size enters any
//! identity downstream; central finite differences are kept only as a
//! cross-check ([`fd_crosscheck`]).

use crate::algebroid::State;
use crate::dual::{Dual1, Dual2, Scalar};
use crate::error::{CoreError, EvalError, Result};
use crate::expr::{self, Expr};
use crate::linalg::Mat;
use std::sync::Arc;

/// Expected input dimensions of a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arity {
    pub n: usize,
    pub m: usize,
    pub depends_on_s: bool,
}

impl Arity {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            depends_on_s: true,
        }
    }

    /// Functions of the base coordinates only.
    pub fn base_only(n: usize) -> Self {
        Self {
            n,
            m: 0,
            depends_on_s: false,
        }
    }
}

/// Object-safe evaluation interface at the three scalar levels.
pub trait FieldBody: Send + Sync {
    fn eval_f64(&self, q: &[f64], w: &[f64], s: f64) -> Result<f64, EvalError>;
    fn eval_dual(&self, q: &[Dual1], w: &[Dual1], s: Dual1) -> Result<Dual1, EvalError>;
    fn eval_dual2(&self, q: &[Dual2], w: &[Dual2], s: Dual2) -> Result<Dual2, EvalError>;
    fn describe(&self) -> String;
}

/// Generic evaluation rule; the blanket impl below lifts it to [`FieldBody`].
pub trait FieldRule: Send + Sync {
    fn eval<T: Scalar>(&self, q: &[T], w: &[T], s: T) -> Result<T, EvalError>;
    fn describe(&self) -> String {
        "<native rule>".to_string()
    }
}

impl<R: FieldRule> FieldBody for R {
    fn eval_f64(&self, q: &[f64], w: &[f64], s: f64) -> Result<f64, EvalError> {
        self.eval(q, w, s)
    }
    fn eval_dual(&self, q: &[Dual1], w: &[Dual1], s: Dual1) -> Result<Dual1, EvalError> {
        self.eval(q, w, s)
    }
    fn eval_dual2(&self, q: &[Dual2], w: &[Dual2], s: Dual2) -> Result<Dual2, EvalError> {
        self.eval(q, w, s)
    }
    fn describe(&self) -> String {
        FieldRule::describe(self)
    }
}

/// Scalar types that know how to dispatch themselves through a `dyn FieldBody`.
pub trait FieldScalar: Scalar {
    fn eval_body(body: &dyn FieldBody, q: &[Self], w: &[Self], s: Self) -> Result<Self, EvalError>;
}

impl FieldScalar for f64 {
    fn eval_body(body: &dyn FieldBody, q: &[f64], w: &[f64], s: f64) -> Result<f64, EvalError> {
        body.eval_f64(q, w, s)
    }
}

impl FieldScalar for Dual1 {
    fn eval_body(
        body: &dyn FieldBody,
        q: &[Dual1],
        w: &[Dual1],
        s: Dual1,
    ) -> Result<Dual1, EvalError> {
        body.eval_dual(q, w, s)
    }
}

impl FieldScalar for Dual2 {
    fn eval_body(
        body: &dyn FieldBody,
        q: &[Dual2],
        w: &[Dual2],
        s: Dual2,
    ) -> Result<Dual2, EvalError> {
        body.eval_dual2(q, w, s)
    }
}

struct ExprRule {
    expr: Expr,
}

impl FieldRule for ExprRule {
    fn eval<T: Scalar>(&self, q: &[T], w: &[T], s: T) -> Result<T, EvalError> {
        expr::eval(&self.expr, q, w, s)
    }
    fn describe(&self) -> String {
        expr::print(&self.expr)
    }
}

/// A smooth real function of (q, w, s): the container for Lagrangians,
/// Hamiltonians, Hamilton-Jacobi generating functions and chart data.
#[derive(Clone)]
pub struct ScalarField {
    arity: Arity,
    body: Arc<dyn FieldBody>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("arity", &self.arity)
            .field("body", &self.body.describe())
            .finish()
    }
}

impl ScalarField {
    /// Build from a closed expression (parameters already bound).
    pub fn from_expr(expr: Expr, arity: Arity) -> Self {
        Self {
            arity,
            body: Arc::new(ExprRule { expr }),
        }
    }

    pub fn from_rule(rule: impl FieldRule + 'static, arity: Arity) -> Self {
        Self {
            arity,
            body: Arc::new(rule),
        }
    }

    pub fn from_body(body: Arc<dyn FieldBody>, arity: Arity) -> Self {
        Self { arity, body }
    }

    pub fn constant(value: f64, arity: Arity) -> Self {
        Self::from_expr(Expr::num(value), arity)
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn describe(&self) -> String {
        self.body.describe()
    }

    fn check_dims(&self, nq: usize, nw: usize) -> Result<()> {
        if nq != self.arity.n {
            return Err(CoreError::DimensionMismatch {
                what: "field q input",
                expected: self.arity.n,
                got: nq,
            });
        }
        if nw != self.arity.m {
            return Err(CoreError::DimensionMismatch {
                what: "field w input",
                expected: self.arity.m,
                got: nw,
            });
        }
        Ok(())
    }

    /// Evaluate at any supported scalar level.
    pub fn eval_at<T: FieldScalar>(&self, q: &[T], w: &[T], s: T) -> Result<T> {
        self.check_dims(q.len(), w.len())?;
        Ok(T::eval_body(&*self.body, q, w, s)?)
    }

    pub fn value(&self, q: &[f64], w: &[f64], s: f64) -> Result<f64> {
        self.eval_at(q, w, s)
    }

    pub fn value_at(&self, state: &State) -> Result<f64> {
        self.value(&state.q, &state.w, state.s)
    }

    /// Value plus every block requested in `req`.
    pub fn bundle(
        &self,
        q: &[f64],
        w: &[f64],
        s: f64,
        req: &DerivRequest,
    ) -> Result<DerivativeBundle> {
        self.check_dims(q.len(), w.len())?;
        eval_bundle(&*self.body, q, w, s, req)
    }

    pub fn bundle_at(&self, state: &State, req: &DerivRequest) -> Result<DerivativeBundle> {
        self.bundle(&state.q, &state.w, state.s, req)
    }
}

/// Which derivative blocks to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DerivRequest {
    pub grad_q: bool,
    pub grad_w: bool,
    pub d_s: bool,
    pub hess_ww: bool,
    pub mixed_qw: bool,
    pub mixed_sw: bool,
}

impl DerivRequest {
    pub fn value_only() -> Self {
        Self::default()
    }

    pub fn all() -> Self {
        Self {
            grad_q: true,
            grad_w: true,
            d_s: true,
            hess_ww: true,
            mixed_qw: true,
            mixed_sw: true,
        }
    }

    pub fn gradients() -> Self {
        Self {
            grad_q: true,
            grad_w: true,
            d_s: true,
            ..Self::default()
        }
    }
}

/// Evaluated derivative blocks at one state.
#[derive(Clone, Debug, Default)]
pub struct DerivativeBundle {
    pub value: f64,
    pub grad_q: Option<Vec<f64>>,
    pub grad_w: Option<Vec<f64>>,
    pub d_s: Option<f64>,
    pub hess_ww: Option<Mat>,
    pub mixed_qw: Option<Mat>,
    pub mixed_sw: Option<Vec<f64>>,
}

impl DerivativeBundle {
    pub fn grad_q(&self) -> &[f64] {
        self.grad_q.as_deref().expect("grad_q was not requested")
    }
    pub fn grad_w(&self) -> &[f64] {
        self.grad_w.as_deref().expect("grad_w was not requested")
    }
    pub fn d_s(&self) -> f64 {
        self.d_s.expect("d_s was not requested")
    }
    pub fn hess_ww(&self) -> &Mat {
        self.hess_ww.as_ref().expect("hess_ww was not requested")
    }
    pub fn mixed_qw(&self) -> &Mat {
        self.mixed_qw.as_ref().expect("mixed_qw was not requested")
    }
    pub fn mixed_sw(&self) -> &[f64] {
        self.mixed_sw
            .as_deref()
            .expect("mixed_sw was not requested")
    }
}

/// Slot index into the flattened (q, w, s) coordinate list.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Q(usize),
    W(usize),
    S,
}

fn eval_first(
    body: &dyn FieldBody,
    q: &[f64],
    w: &[f64],
    s: f64,
    slot: Slot,
) -> Result<f64, EvalError> {
    let qd: Vec<Dual1> = q
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if slot == Slot::Q(i) {
                Dual1::variable(x)
            } else {
                Dual1::constant(x)
            }
        })
        .collect();
    let wd: Vec<Dual1> = w
        .iter()
        .enumerate()
        .map(|(a, &x)| {
            if slot == Slot::W(a) {
                Dual1::variable(x)
            } else {
                Dual1::constant(x)
            }
        })
        .collect();
    let sd = if slot == Slot::S {
        Dual1::variable(s)
    } else {
        Dual1::constant(s)
    };
    Ok(body.eval_dual(&qd, &wd, sd)?.du)
}

fn seed2(x: f64, inner: bool, outer: bool) -> Dual2 {
    Dual2::new(
        Dual1::new(x, if inner { 1.0 } else { 0.0 }),
        Dual1::new(if outer { 1.0 } else { 0.0 }, 0.0),
    )
}

fn eval_second(
    body: &dyn FieldBody,
    q: &[f64],
    w: &[f64],
    s: f64,
    inner: Slot,
    outer: Slot,
) -> Result<f64, EvalError> {
    let qd: Vec<Dual2> = q
        .iter()
        .enumerate()
        .map(|(i, &x)| seed2(x, inner == Slot::Q(i), outer == Slot::Q(i)))
        .collect();
    let wd: Vec<Dual2> = w
        .iter()
        .enumerate()
        .map(|(a, &x)| seed2(x, inner == Slot::W(a), outer == Slot::W(a)))
        .collect();
    let sd = seed2(s, inner == Slot::S, outer == Slot::S);
    Ok(body.eval_dual2(&qd, &wd, sd)?.du.du)
}

fn eval_bundle(
    body: &dyn FieldBody,
    q: &[f64],
    w: &[f64],
    s: f64,
    req: &DerivRequest,
) -> Result<DerivativeBundle> {
    let n = q.len();
    let m = w.len();
    let mut out = DerivativeBundle {
        value: body.eval_f64(q, w, s)?,
        ..Default::default()
    };

    if req.grad_q {
        let mut g = Vec::with_capacity(n);
        for i in 0..n {
            g.push(eval_first(body, q, w, s, Slot::Q(i))?);
        }
        out.grad_q = Some(g);
    }
    if req.grad_w {
        let mut g = Vec::with_capacity(m);
        for a in 0..m {
            g.push(eval_first(body, q, w, s, Slot::W(a))?);
        }
        out.grad_w = Some(g);
    }
    if req.d_s {
        out.d_s = Some(eval_first(body, q, w, s, Slot::S)?);
    }
    if req.hess_ww {
        // Upper triangle mirrored, so symmetry holds identically.
        let mut h = Mat::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let v = eval_second(body, q, w, s, Slot::W(a), Slot::W(b))?;
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        out.hess_ww = Some(h);
    }
    if req.mixed_qw {
        let mut h = Mat::zeros(n, m);
        for i in 0..n {
            for a in 0..m {
                h[(i, a)] = eval_second(body, q, w, s, Slot::Q(i), Slot::W(a))?;
            }
        }
        out.mixed_qw = Some(h);
    }
    if req.mixed_sw {
        let mut g = Vec::with_capacity(m);
        for a in 0..m {
            g.push(eval_second(body, q, w, s, Slot::S, Slot::W(a))?);
        }
        out.mixed_sw = Some(g);
    }
    Ok(out)
}

/// Default finite-difference step, scaled per coordinate.
pub const FD_STEP: f64 = 1e-5;

fn fd_step(h: f64, x: f64) -> f64 {
    h * x.abs().max(1.0)
}

/// Compare every dual-number partial against central finite differences.
///
/// First partials difference the value; second partials difference the
/// corresponding dual-number first partial. Returns the worst discrepancy
/// scaled by `1 + |analytic|`.
pub fn fd_crosscheck(field: &ScalarField, state: &State, h: f64) -> Result<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let q = &state.q;
    let w = &state.w;
    let s = state.s;
    let body = &*field.body;
    field.check_dims(q.len(), w.len())?;

    let mut worst: f64 = 0.0;
    let mut record = |analytic: f64, fd: f64| {
        let rel = (analytic - fd).abs() / (1.0 + analytic.abs().max(fd.abs()));
        worst = worst.max(rel);
    };

    let slots: Vec<Slot> = (0..q.len())
        .map(Slot::Q)
        .chain((0..w.len()).map(Slot::W))
        .chain(std::iter::once(Slot::S))
        .collect();

    let shift = |slot: Slot, delta: f64| -> (Vec<f64>, Vec<f64>, f64) {
        let mut q2 = q.clone();
        let mut w2 = w.clone();
        let mut s2 = s;
        match slot {
            Slot::Q(i) => q2[i] += delta,
            Slot::W(a) => w2[a] += delta,
            Slot::S => s2 += delta,
        }
        (q2, w2, s2)
    };

    // First partials: central difference of the value.
    for &slot in &slots {
        let x = match slot {
            Slot::Q(i) => q[i],
            Slot::W(a) => w[a],
            Slot::S => s,
        };
        let step = fd_step(h, x);
        let (qp, wp, sp) = shift(slot, step);
        let (qm, wm, sm) = shift(slot, -step);
        let fd = (body.eval_f64(&qp, &wp, sp)? - body.eval_f64(&qm, &wm, sm)?) / (2.0 * step);
        record(eval_first(body, q, w, s, slot)?, fd);
    }

    // Second partials against differenced first partials.
    let mut seconds: Vec<(Slot, Slot)> = Vec::new();
    for a in 0..w.len() {
        for b in a..w.len() {
            seconds.push((Slot::W(a), Slot::W(b)));
        }
        for i in 0..q.len() {
            seconds.push((Slot::Q(i), Slot::W(a)));
        }
        seconds.push((Slot::S, Slot::W(a)));
    }
    for &(inner, outer) in &seconds {
        let x = match outer {
            Slot::Q(i) => q[i],
            Slot::W(a) => w[a],
            Slot::S => s,
        };
        let step = fd_step(h, x);
        let (qp, wp, sp) = shift(outer, step);
        let (qm, wm, sm) = shift(outer, -step);
        let fd = (eval_first(body, &qp, &wp, sp, inner)? - eval_first(body, &qm, &wm, sm, inner)?)
            / (2.0 * step);
        record(eval_second(body, q, w, s, inner, outer)?, fd);
    }

    Ok(worst)
}

/// Free-function alias for [`ScalarField::bundle_at`].
pub fn eval_with_derivatives(
    field: &ScalarField,
    state: &State,
    req: &DerivRequest,
) -> Result<DerivativeBundle> {
    field.bundle_at(state, req)
}
