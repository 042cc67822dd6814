//! Implicit solution families of nonlinear second-order PDEs.
//!
//! A field `phi(x)` is defined implicitly by a constraint `C(x, phi) = 0`
//! whose coefficients are user-supplied expressions. The crate solves the
//! constraint for `phi`, differentiates it exactly to second order through
//! [`Jet2`] arithmetic, and evaluates the residuals of the equations such
//! fields are claimed to solve: the Bateman equation, the Universal Field
//! Equation, the complex Bateman equation and several of their relatives.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix the scalar to `f64`, which is what
//! the scenario harness uses.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

pub mod error;
pub mod expr;
pub mod families;
pub mod harness;
pub mod implicit;
pub mod jet;
pub mod linalg;
pub mod quad;
pub mod residual;

pub use error::{Error, Result};
pub use expr::{Expr, Func, ParseError};
pub use jet::Jet2;

/// Real scalar type the numeric core is generic over.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type Jet = jet::Jet2<f64>;
pub type FieldJet = implicit::FieldJet<f64>;
pub type ImplicitFamily = implicit::ImplicitFamily<f64>;
pub type Matrix = linalg::SquareMatrix<f64>;
pub type AnsatzState = quad::AnsatzState<f64>;
pub type Residual = residual::Residual<f64>;

pub type Jet32 = jet::Jet2<f32>;
pub type FieldJet32 = implicit::FieldJet<f32>;
