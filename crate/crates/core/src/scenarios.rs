//! Ready-made systems used by the test suites, the acceptance checks and
//! the shipped configuration files.

use crate::algebroid::{atiyah_trivial, so3, tangent_bundle, AlgebroidModel, AtiyahData};
use crate::dual::Scalar;
use crate::error::{EvalError, Result};
use crate::expr::{parse, Expr, ExprContext};
use crate::field::{Arity, FieldRule, ScalarField};
use crate::hamiltonian::ContactHamiltonianSystem;
use crate::lagrangian::ContactLagrangianSystem;

pub fn lagrangian_field(
    src: &str,
    model: &AlgebroidModel,
    params: &[(&str, f64)],
) -> Result<ScalarField> {
    let names: Vec<&str> = params.iter().map(|(k, _)| *k).collect();
    let ctx = ExprContext::lagrangian(model.n(), model.m(), &names);
    let expr = parse(src, &ctx)?;
    let bindings: Vec<(String, f64)> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let bound = expr
        .bind_parameters(&bindings)
        .map_err(crate::error::CoreError::UnboundParameter)?;
    Ok(ScalarField::from_expr(
        bound,
        Arity::new(model.n(), model.m()),
    ))
}

pub fn hamiltonian_field(
    src: &str,
    model: &AlgebroidModel,
    params: &[(&str, f64)],
) -> Result<ScalarField> {
    let names: Vec<&str> = params.iter().map(|(k, _)| *k).collect();
    let ctx = ExprContext::hamiltonian(model.n(), model.m(), &names);
    let expr = parse(src, &ctx)?;
    let bindings: Vec<(String, f64)> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let bound = expr
        .bind_parameters(&bindings)
        .map_err(crate::error::CoreError::UnboundParameter)?;
    Ok(ScalarField::from_expr(
        bound,
        Arity::new(model.n(), model.m()),
    ))
}

pub fn base_function(src: &str, n: usize, params: &[(&str, f64)]) -> Result<ScalarField> {
    let names: Vec<&str> = params.iter().map(|(k, _)| *k).collect();
    let ctx = ExprContext::base_only(n, &names);
    let expr = parse(src, &ctx)?;
    let bindings: Vec<(String, f64)> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let bound = expr
        .bind_parameters(&bindings)
        .map_err(crate::error::CoreError::UnboundParameter)?;
    Ok(ScalarField::from_expr(bound, Arity::base_only(n)))
}

/// Damped oscillator on T R: L = y^2/2 - q^2/2 - 0.5 s.
pub fn dissipative_oscillator() -> ContactLagrangianSystem {
    let model = tangent_bundle(1).expect("n = 1");
    let l = lagrangian_field("0.5*y1^2 - 0.5*q1^2 - 0.5*s", &model, &[]).unwrap();
    ContactLagrangianSystem::new(model, l).unwrap()
}

/// Hamiltonian twin of [`dissipative_oscillator`]: H = p^2/2 + q^2/2 + 0.5 s.
pub fn dissipative_oscillator_hamiltonian() -> ContactHamiltonianSystem {
    let model = tangent_bundle(1).expect("n = 1");
    let h = hamiltonian_field("0.5*p1^2 + 0.5*q1^2 + 0.5*s", &model, &[]).unwrap();
    ContactHamiltonianSystem::new(model, h).unwrap()
}

/// Rigid-body Lagrangian on so(3) with an action-dependent term,
/// registered as a native rule rather than an expression tree.
struct So3TopLagrangian {
    inertia: [f64; 3],
    kappa: f64,
}

impl FieldRule for So3TopLagrangian {
    fn eval<T: Scalar>(&self, _q: &[T], w: &[T], s: T) -> Result<T, EvalError> {
        let half = T::from_f64(0.5);
        let mut kinetic = T::zero();
        for a in 0..3 {
            kinetic = kinetic + T::from_f64(self.inertia[a]) * w[a] * w[a];
        }
        Ok(half * kinetic + T::from_f64(self.kappa) * s)
    }
    fn describe(&self) -> String {
        format!(
            "0.5*(I1*y1^2 + I2*y2^2 + I3*y3^2) + kappa*s, I = {:?}, kappa = {}",
            self.inertia, self.kappa
        )
    }
}

/// Euler-Poincare-Herglotz test system: quadratic kinetic energy on
/// so(3) plus kappa * s.
pub fn so3_herglotz(inertia: [f64; 3], kappa: f64) -> ContactLagrangianSystem {
    let model = so3();
    let field = ScalarField::from_rule(So3TopLagrangian { inertia, kappa }, Arity::new(0, 3));
    ContactLagrangianSystem::new(model, field).unwrap()
}

struct So3TopHamiltonian {
    inertia: [f64; 3],
    lambda: f64,
}

impl FieldRule for So3TopHamiltonian {
    fn eval<T: Scalar>(&self, _q: &[T], w: &[T], s: T) -> Result<T, EvalError> {
        let half = T::from_f64(0.5);
        let mut kinetic = T::zero();
        for a in 0..3 {
            kinetic = kinetic + w[a] * w[a] / T::from_f64(self.inertia[a]);
        }
        Ok(half * kinetic + T::from_f64(self.lambda) * s)
    }
    fn describe(&self) -> String {
        format!(
            "0.5*(p1^2/I1 + p2^2/I2 + p3^2/I3) + lambda*s, I = {:?}, lambda = {}",
            self.inertia, self.lambda
        )
    }
}

/// Lie-Poisson-Jacobi test system on so(3)*: the free rigid body with an
/// optional contact damping term (lambda = 0 is the conservative top).
pub fn so3_top(inertia: [f64; 3], lambda: f64) -> ContactHamiltonianSystem {
    let model = so3();
    let field = ScalarField::from_rule(So3TopHamiltonian { inertia, lambda }, Arity::new(0, 3));
    ContactHamiltonianSystem::new(model, field).unwrap()
}

/// A regular Lagrangian on the so(3) action algebroid over R^3.
pub fn action_so3_system() -> ContactLagrangianSystem {
    let model = crate::algebroid::action_so3_on_r3();
    let l = lagrangian_field(
        "0.5*(y1^2 + y2^2 + y3^2) - 0.2*(q1^2 + q2^2 + q3^2) - 0.15*s + 0.05*q1*y2",
        &model,
        &[],
    )
    .unwrap();
    ContactLagrangianSystem::new(model, l).unwrap()
}

/// Atiyah algebroid of a trivial SO(3) bundle over R^2 with a curved test
/// connection A_1 = (0, 0, q2), A_2 = (q1, 0, 0); the curvature follows
/// from B = dA - [A, A] in the left-trivialized convention.
pub fn atiyah_test_model() -> AlgebroidModel {
    let ctx = ExprContext::base_only(2, &[]);
    let e = |src: &str| parse(src, &ctx).unwrap();
    let zero = Expr::num(0.0);
    // connection[a * 2 + i] = A^a_i.
    let connection = vec![
        zero.clone(),
        e("q1"), // A^1_2
        zero.clone(),
        zero.clone(),
        e("q2"), // A^3_1
        zero.clone(),
    ];
    // B_12 = d1 A_2 - d2 A_1 - [A_1, A_2] = (1, -q1*q2, -1).
    let curvature = vec![e("1"), e("-(q1*q2)"), e("-1")];
    atiyah_trivial(
        &AtiyahData {
            base_dim: 2,
            fiber_dim: 3,
            algebra: crate::algebroid::so3_constants(),
            connection,
            curvature,
        },
        "atiyah_so3_over_r2",
    )
    .expect("the curved test connection satisfies the structure equations")
}

/// Regular Lagrangian on the Atiyah test algebroid; fiber coordinates are
/// (qdot1, qdot2, v1, v2, v3).
pub fn atiyah_test_system() -> ContactLagrangianSystem {
    let model = atiyah_test_model();
    let l = lagrangian_field(
        "0.5*(y1^2 + y2^2 + y3^2 + y4^2 + y5^2) + 0.2*y1*y4 \
         - 0.3*(q1^2 + q2^2) - 0.25*s + 0.05*s*y5",
        &model,
        &[],
    )
    .unwrap();
    ContactLagrangianSystem::new(model, l).unwrap()
}

/// The constructed Hamilton-Jacobi scenario: H = p^2/2 - q^2/2 + s with
/// f = a q^2, a the positive root of 2 a^2 + a - 1/2 = 0.
pub fn hj_constructed() -> (ContactHamiltonianSystem, ScalarField, f64) {
    let model = tangent_bundle(1).expect("n = 1");
    let h = hamiltonian_field("0.5*p1^2 - 0.5*q1^2 + s", &model, &[]).unwrap();
    let sys = ContactHamiltonianSystem::new(model, h).unwrap();
    let a = (-1.0 + 5.0_f64.sqrt()) / 4.0;
    let f = base_function("a*q1^2", 1, &[("a", a)]).unwrap();
    (sys, f, a)
}

/// Coordinate-rich Lagrangian on T R^2 for standard-form reduction checks.
pub fn rich_tq_lagrangian() -> ContactLagrangianSystem {
    let model = tangent_bundle(2).expect("n = 2");
    let l = lagrangian_field(
        "0.5*(1.0 + q1^2)*y1^2 + 0.5*y2^2 + 0.3*y1*y2 - cos(q1) - 0.5*q2^2 - 0.2*s + 0.1*s*y1",
        &model,
        &[],
    )
    .unwrap();
    ContactLagrangianSystem::new(model, l).unwrap()
}

/// Coordinate-rich Hamiltonian on T* R^2 for standard-form reduction checks.
pub fn rich_tq_hamiltonian() -> ContactHamiltonianSystem {
    let model = tangent_bundle(2).expect("n = 2");
    let h = hamiltonian_field(
        "0.5*(p1^2 + p2^2)*(1.0 + 0.1*sin(q1)) + 0.2*p1*p2 + cos(q2) + 0.3*s + 0.05*s*p2",
        &model,
        &[],
    )
    .unwrap();
    ContactHamiltonianSystem::new(model, h).unwrap()
}
