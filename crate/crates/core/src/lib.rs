//! Computations with p-adic families of nearly overconvergent modular forms at the
//! level of q-expansions: Hecke-type operators, the Gauss-Manin connection and its
//! fractional iterates, overconvergent projection, slope decompositions and the
//! triple-product bracket at classical points.

pub mod error;
pub mod lvalue;
pub mod nearly;
pub mod padic;
pub mod qexp;
pub mod ring;
pub mod spectral;
pub mod symbolic;

pub use error::{Error, ErrorKind, Result};
pub use nearly::NearlyExp;
pub use padic::PadicScalar;
pub use qexp::QExp;
pub use ring::{FamilyElement, TameCharacter, Weight};
pub use spectral::{Matrix, PadicPoly};
