//! Contact (Herglotz) Lagrangian and Hamiltonian mechanics on Lie
//! algebroids in a single local chart.
//!
//! The crate provides:
//! - [`algebroid`]: local algebroid models (anchor, structure functions),
//!   builtin examples and structure-equation residuals;
//! - [`expr`] and [`field`]: the scenario expression language and scalar
//!   fields with exact first/second derivatives from nested dual numbers;
//! - [`lagrangian`] / [`hamiltonian`]: the Herglotz and contact Hamilton
//!   dynamics together with residual verification of their defining
//!   contact equations;
//! - [`legendre`]: the fiber Legendre transform, its Newton inverse, the
//!   induced Hamiltonian and the trajectory-equivalence check;
//! - [`hj`]: 1-jets, Legendrian residuals and Hamilton-Jacobi checks;
//! - [`integrate`]: RK4 and step-doubling integration with analytic
//!   diagnostics.
//!
//! ```
//! use contact_algebroids::algebroid::{so3, State};
//! use contact_algebroids::lagrangian::ContactLagrangianSystem;
//! use contact_algebroids::scenarios::lagrangian_field;
//!
//! let model = so3();
//! let l = lagrangian_field(
//!     "0.5*(I1*y1^2 + I2*y2^2 + I3*y3^2) + kappa*s",
//!     &model,
//!     &[("I1", 1.0), ("I2", 2.0), ("I3", 3.0), ("kappa", -0.4)],
//! )?;
//! let sys = ContactLagrangianSystem::new(model, l)?;
//! let state = State::lagrangian(vec![], vec![0.3, -1.2, 0.8], 0.0);
//!
//! let field = sys.herglotz_field(&state)?;
//! assert_eq!(field.ds, sys.lagrangian.value_at(&state)?);
//!
//! let residuals = sys.verify_section(&state)?;
//! assert!(residuals.max_abs() < 1e-12);
//! # Ok::<(), contact_algebroids::CoreError>(())
//! ```

pub mod algebroid;
pub mod dual;
pub mod error;
pub mod expr;
pub mod field;
pub mod hamiltonian;
pub mod hj;
pub mod integrate;
pub mod lagrangian;
pub mod legendre;
pub mod linalg;
pub mod scenarios;

pub use algebroid::{AlgebroidModel, Side, State, StateDerivative};
pub use error::{CoreError, Result};
pub use field::{Arity, DerivRequest, DerivativeBundle, ScalarField};
pub use hamiltonian::ContactHamiltonianSystem;
pub use lagrangian::ContactLagrangianSystem;
